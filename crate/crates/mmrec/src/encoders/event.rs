//! Per-event encoders: max-pooled action vectors, embedding averages,
//! shared keyword vectors, and the modality-routed latent projection.

use crate::data::types::{Conversation, Event, Modality, WebSession};
use crate::encoders::tagmap::TagMap;
use crate::encoders::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::layer::ModalityMap;

/// Binarizes each action over the vocabulary and takes the element-wise
/// maximum across the session's actions. Out-of-vocabulary tags are ignored.
pub fn encode_session(session: &WebSession, vocab: &Vocabulary) -> Vec<f64> {
    let mut out = vec![0.0; vocab.len()];
    for action in &session.actions {
        for tag in &action.tags {
            if let Some(i) = vocab.index_of(tag) {
                out[i] = 1.0;
            }
        }
    }
    out
}

/// Arithmetic mean of the sentence embeddings.
pub fn encode_conversation_avg(conversation: &Conversation) -> Result<Vec<f64>> {
    let n = conversation.sentences.len();
    if n == 0 {
        return Err(Error::input("conversation has no sentences"));
    }
    let width = conversation.sentences[0].embedding.len();
    let mut out = vec![0.0; width];
    for s in &conversation.sentences {
        if s.embedding.len() != width {
            return Err(Error::schema(format!(
                "sentence embedding width {} differs from {}",
                s.embedding.len(),
                width
            )));
        }
        for (o, e) in out.iter_mut().zip(&s.embedding) {
            *o += e;
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    Ok(out)
}

/// Shared-space binary encoding: sessions binarize their action tags,
/// conversations binarize the union of their mapped keywords. Both land in
/// the same vocabulary, so the output width is the vocabulary size for
/// either modality. A conversation with only unmapped keywords yields the
/// zero vector (the event is retained).
pub fn encode_keywords(event: &Event, vocab: &Vocabulary, tag_map: &TagMap) -> Result<Vec<f64>> {
    match event {
        Event::WebSession(s) => Ok(encode_session(s, vocab)),
        Event::Conversation(c) => {
            if c.sentences.is_empty() {
                return Err(Error::input("conversation has no sentences"));
            }
            let mut out = vec![0.0; vocab.len()];
            for sentence in &c.sentences {
                for kw in &sentence.keywords {
                    if let Some(i) = vocab.index_of(tag_map.map(kw)) {
                        out[i] = 1.0;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Projects an encoded event into the common latent space via the modality's
/// tanh map. The other modality's weights do not participate (and receive no
/// gradient when the map is trained inside a network).
pub fn latent_map(
    encoded: &[f64],
    modality: Modality,
    map: &ModalityMap,
) -> Result<Vec<f64>> {
    let dense = match modality {
        Modality::Conversation => &map.conversation,
        Modality::WebSession => &map.session,
    };
    if encoded.len() != dense.in_width() {
        return Err(Error::config(format!(
            "latent map input width {} does not match {}",
            encoded.len(),
            dense.in_width()
        )));
    }
    let (out, _) = dense.forward(encoded, None);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::types::{Action, Sentence, Speaker};
    use crate::nn::activation::Activation;
    use crate::nn::layer::Dense;
    use crate::nn::matrix::Matrix;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        Vocabulary::fit(tokens.iter().copied(), 0.0).unwrap()
    }

    fn session(actions: &[&[&str]]) -> WebSession {
        WebSession {
            timestamp: 0,
            actions: actions
                .iter()
                .map(|tags| Action::new(tags.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }

    fn sentence(embedding: Vec<f64>, keywords: &[&str]) -> Sentence {
        Sentence {
            speaker: Speaker::User,
            embedding,
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn max_pool_is_elementwise_or() {
        // {[1,0,1],[0,1,1]} → [1,1,1]
        let v = vocab(&["a", "b", "c"]);
        let s = session(&[&["a", "c"], &["b", "c"]]);
        assert_eq!(encode_session(&s, &v), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_action_is_its_own_binarization() {
        let v = vocab(&["a", "b", "c"]);
        let s = session(&[&["b"]]);
        assert_eq!(encode_session(&s, &v), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn max_pool_matches_or_fold_oracle() {
        use rand::{Rng, SeedableRng};
        let tokens: Vec<String> = (0..12).map(|i| format!("t{:02}", i)).collect();
        let v = Vocabulary::fit(tokens.iter().map(String::as_str), 0.0).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(13);
        for _ in 0..100 {
            let n_actions = rng.random_range(1..6);
            let actions: Vec<Vec<String>> = (0..n_actions)
                .map(|_| {
                    let k = rng.random_range(1..4);
                    (0..k)
                        .map(|_| tokens[rng.random_range(0..tokens.len())].clone())
                        .collect()
                })
                .collect();
            let s = WebSession {
                timestamp: 0,
                actions: actions.iter().map(|t| Action::new(t.clone())).collect(),
            };
            let got = encode_session(&s, &v);

            // OR-fold oracle over per-action binarizations.
            let mut expect = vec![0.0; v.len()];
            for a in &actions {
                let mut bin = vec![0.0; v.len()];
                for t in a {
                    bin[v.index_of(t).unwrap()] = 1.0;
                }
                for (e, b) in expect.iter_mut().zip(&bin) {
                    *e = f64::max(*e, *b);
                }
            }
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn session_encoding_is_permutation_invariant_and_idempotent_under_duplicates() {
        let v = vocab(&["a", "b", "c", "d"]);
        let s1 = session(&[&["a"], &["b", "c"]]);
        let s2 = session(&[&["b", "c"], &["a"]]);
        let s3 = session(&[&["a"], &["b", "c"], &["a"], &["a"]]);
        let e1 = encode_session(&s1, &v);
        assert_eq!(e1, encode_session(&s2, &v));
        assert_eq!(e1, encode_session(&s3, &v));
    }

    #[test]
    fn conversation_avg_of_one_sentence_is_its_embedding() {
        let c = Conversation {
            timestamp: 0,
            sentences: vec![sentence(vec![0.5, -1.0], &[])],
        };
        assert_eq!(encode_conversation_avg(&c).unwrap(), vec![0.5, -1.0]);
    }

    #[test]
    fn conversation_avg_of_opposite_vectors_is_zero() {
        let c = Conversation {
            timestamp: 0,
            sentences: vec![sentence(vec![1.0, -2.0], &[]), sentence(vec![-1.0, 2.0], &[])],
        };
        assert_eq!(encode_conversation_avg(&c).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn conversation_avg_is_order_invariant() {
        let a = sentence(vec![1.0, 0.0], &[]);
        let b = sentence(vec![0.0, 3.0], &[]);
        let c1 = Conversation {
            timestamp: 0,
            sentences: vec![a.clone(), b.clone()],
        };
        let c2 = Conversation {
            timestamp: 0,
            sentences: vec![b, a],
        };
        assert_eq!(
            encode_conversation_avg(&c1).unwrap(),
            encode_conversation_avg(&c2).unwrap()
        );
    }

    #[test]
    fn empty_conversation_is_an_input_error() {
        let c = Conversation {
            timestamp: 0,
            sentences: vec![],
        };
        assert!(encode_conversation_avg(&c).is_err());
    }

    #[test]
    fn keywords_set_mapped_bits() {
        let v = vocab(&["car", "claim", "house"]);
        let c = Event::Conversation(Conversation {
            timestamp: 0,
            sentences: vec![
                sentence(vec![0.0], &["car"]),
                sentence(vec![0.0], &["claim", "car"]),
            ],
        });
        let out = encode_keywords(&c, &v, &TagMap::identity()).unwrap();
        assert_eq!(out, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn unmapped_keywords_give_zero_vector() {
        let v = vocab(&["car", "claim"]);
        let c = Event::Conversation(Conversation {
            timestamp: 0,
            sentences: vec![sentence(vec![0.0], &["weather", "smalltalk"])],
        });
        let out = encode_keywords(&c, &v, &TagMap::identity()).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn latent_map_zero_input_is_zero() {
        let map = ModalityMap {
            conversation: Dense {
                weights: Matrix::from_vec(2, 3, vec![0.5; 6]).unwrap(),
                bias: vec![0.0; 2],
                has_bias: true,
                activation: Activation::Tanh,
                dropout: 0.0,
            },
            session: Dense {
                weights: Matrix::from_vec(2, 4, vec![0.5; 8]).unwrap(),
                bias: vec![0.0; 2],
                has_bias: true,
                activation: Activation::Tanh,
                dropout: 0.0,
            },
        };
        let out = latent_map(&[0.0, 0.0, 0.0], Modality::Conversation, &map).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn latent_map_outputs_stay_in_tanh_range() {
        let map = ModalityMap {
            conversation: Dense {
                weights: Matrix::from_vec(2, 2, vec![5.0, -3.0, 2.0, 8.0]).unwrap(),
                bias: vec![0.1, -0.2],
                has_bias: true,
                activation: Activation::Tanh,
                dropout: 0.0,
            },
            session: Dense {
                weights: Matrix::from_vec(2, 2, vec![1.0; 4]).unwrap(),
                bias: vec![0.0; 2],
                has_bias: true,
                activation: Activation::Tanh,
                dropout: 0.0,
            },
        };
        let out = latent_map(&[10.0, -7.0], Modality::Conversation, &map).unwrap();
        for v in out {
            assert!(v > -1.0 && v < 1.0);
        }
    }
}
