//! Anchor-based relative representations.
//!
//! Two single-event networks (one per modality, dense tanh latent → dense
//! output) are trained on the recommendation labels. Their hidden layers
//! produce per-event latents; an event's relative representation is its
//! cosine similarity to each anchor user's latent of the same modality, in a
//! fixed anchor order shared by both modalities. That shared ordering is
//! what makes positions comparable across the two separately trained latent
//! spaces.

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::types::{Event, ItemCatalog, Modality, UserRecord};
use crate::encoders::event::{encode_conversation_avg, encode_session};
use crate::encoders::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::nn::loss::{LossKind, WeightedTarget};
use crate::nn::matrix::cosine_similarity;
use crate::nn::network::{LayerSpec, Network, NetworkSpec};
use crate::nn::train::{train, TrainConfig, TrainSample};
use crate::encoders::sequence::EncodedStep;

pub const DEFAULT_ANCHOR_COUNT: usize = 125;
pub const DEFAULT_ANCHOR_LATENT_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub anchor_count: usize,
    pub latent_width: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl AnchorConfig {
    pub fn new(seed: u64, train: TrainConfig) -> Self {
        AnchorConfig {
            anchor_count: DEFAULT_ANCHOR_COUNT,
            latent_width: DEFAULT_ANCHOR_LATENT_WIDTH,
            seed,
            train,
        }
    }
}

/// One anchor: an intersection train user and their per-modality latents
/// (taken from the user's most recent event of each modality).
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub user_id: String,
    pub conversation_latent: Vec<f64>,
    pub session_latent: Vec<f64>,
}

#[derive(Debug)]
pub struct AnchorModel {
    pub conversation_net: Network,
    pub session_net: Network,
    pub anchors: Vec<Anchor>,
}

impl AnchorModel {
    /// Trains the two single-event networks and selects the anchor set.
    ///
    /// Per-event training pairs are (event encoding, owning user's purchase
    /// label); the conversation net never sees sessions and vice versa.
    /// Anchors are sampled from intersection train users, stratified by
    /// purchased item: slots rotate round-robin over items by descending
    /// train purchase frequency.
    pub fn fit(
        train_records: &[UserRecord],
        valid_records: &[UserRecord],
        action_vocab: &Vocabulary,
        catalog: &ItemCatalog,
        cfg: &AnchorConfig,
    ) -> Result<Self> {
        let n_items = catalog.len();
        let conv_train = event_samples(train_records, Modality::Conversation, action_vocab, n_items)?;
        let conv_valid = event_samples(valid_records, Modality::Conversation, action_vocab, n_items)?;
        let sess_train = event_samples(train_records, Modality::WebSession, action_vocab, n_items)?;
        let sess_valid = event_samples(valid_records, Modality::WebSession, action_vocab, n_items)?;
        if conv_train.is_empty() || sess_train.is_empty() {
            return Err(Error::Anchor(
                "training split lacks events of one modality".into(),
            ));
        }

        let conv_width = conv_train[0].steps[0].vector.len();
        let sess_width = action_vocab.len();

        let mut conversation_net = single_event_net(conv_width, cfg.latent_width, n_items, cfg.seed)?;
        let mut session_net =
            single_event_net(sess_width, cfg.latent_width, n_items, cfg.seed.wrapping_add(1))?;

        let mut conv_cfg = cfg.train.clone();
        conv_cfg.seed = cfg.seed.wrapping_add(2);
        train(
            &mut conversation_net,
            LossKind::BinaryCrossEntropy,
            &conv_train,
            if conv_valid.is_empty() { &conv_train } else { &conv_valid },
            &conv_cfg,
        )?;
        let mut sess_cfg = cfg.train.clone();
        sess_cfg.seed = cfg.seed.wrapping_add(3);
        train(
            &mut session_net,
            LossKind::BinaryCrossEntropy,
            &sess_train,
            if sess_valid.is_empty() { &sess_train } else { &sess_valid },
            &sess_cfg,
        )?;

        let model = AnchorModel {
            conversation_net,
            session_net,
            anchors: Vec::new(),
        };
        let anchors = model.select_anchors(train_records, action_vocab, catalog, cfg.anchor_count)?;
        Ok(AnchorModel { anchors, ..model })
    }

    /// Hidden-layer latent of a single encoded event.
    pub fn latent(&self, encoded: &[f64], modality: Modality) -> Result<Vec<f64>> {
        let net = match modality {
            Modality::Conversation => &self.conversation_net,
            Modality::WebSession => &self.session_net,
        };
        let hidden = &net.dense[0];
        if encoded.len() != hidden.in_width() {
            return Err(Error::config(format!(
                "anchor net input width {} does not match {}",
                encoded.len(),
                hidden.in_width()
            )));
        }
        Ok(hidden.forward(encoded, None).0)
    }

    /// Cosine similarities of the event's latent to every anchor latent of
    /// the same modality, in anchor order. A zero-norm latent yields all
    /// zeros (with a warning) rather than an error.
    pub fn relative_representation(&self, event: &Event, action_vocab: &Vocabulary) -> Result<Vec<f64>> {
        let (encoded, modality) = match event {
            Event::Conversation(c) => (encode_conversation_avg(c)?, Modality::Conversation),
            Event::WebSession(s) => (encode_session(s, action_vocab), Modality::WebSession),
        };
        let latent = self.latent(&encoded, modality)?;
        if latent.iter().all(|v| *v == 0.0) {
            log::warn!("zero-norm latent vector; relative representation set to zeros");
        }
        Ok(self
            .anchors
            .iter()
            .map(|a| {
                let anchor_latent = match modality {
                    Modality::Conversation => &a.conversation_latent,
                    Modality::WebSession => &a.session_latent,
                };
                cosine_similarity(&latent, anchor_latent)
            })
            .collect())
    }

    pub fn width(&self) -> usize {
        self.anchors.len()
    }

    pub fn anchor_user_ids(&self) -> Vec<String> {
        self.anchors.iter().map(|a| a.user_id.clone()).collect()
    }

    fn select_anchors(
        &self,
        train_records: &[UserRecord],
        action_vocab: &Vocabulary,
        catalog: &ItemCatalog,
        count: usize,
    ) -> Result<Vec<Anchor>> {
        let intersection: Vec<&UserRecord> = train_records
            .iter()
            .filter(|r| r.has_conversation() && r.has_session())
            .collect();
        if intersection.is_empty() {
            return Err(Error::Anchor(
                "no intersection users available for anchor selection".into(),
            ));
        }

        // Items by descending train purchase frequency (ties by id) drive the
        // round-robin stratification.
        let counts = catalog.purchase_counts(train_records);
        let mut item_order: Vec<usize> = (0..catalog.len()).collect();
        item_order.sort_by_key(|&j| (std::cmp::Reverse(counts[j]), j));

        // Users that purchased each item, in input order.
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); catalog.len()];
        for (idx, r) in intersection.iter().enumerate() {
            for &j in &r.purchase.items {
                if j < buckets.len() {
                    buckets[j].push(idx);
                }
            }
        }

        let target = count.min(intersection.len());
        let mut chosen: Vec<usize> = Vec::with_capacity(target);
        let mut used = vec![false; intersection.len()];
        let mut cursors = vec![0usize; catalog.len()];
        while chosen.len() < target {
            let mut progressed = false;
            for &j in &item_order {
                if chosen.len() >= target {
                    break;
                }
                let bucket = &buckets[j];
                let cur = &mut cursors[j];
                while *cur < bucket.len() && used[bucket[*cur]] {
                    *cur += 1;
                }
                if *cur < bucket.len() {
                    let u = bucket[*cur];
                    used[u] = true;
                    chosen.push(u);
                    *cur += 1;
                    progressed = true;
                }
            }
            if !progressed {
                // Buckets exhausted (users without in-catalog purchases);
                // fill from the remaining intersection users in input order.
                for (idx, flag) in used.iter_mut().enumerate() {
                    if chosen.len() >= target {
                        break;
                    }
                    if !*flag {
                        *flag = true;
                        chosen.push(idx);
                    }
                }
                break;
            }
        }

        let mut anchors = Vec::with_capacity(chosen.len());
        for idx in chosen {
            let record = intersection[idx];
            let conv = record
                .conversations()
                .max_by_key(|c| c.timestamp)
                .expect("intersection user has a conversation");
            let sess = record
                .sessions()
                .max_by_key(|s| s.timestamp)
                .expect("intersection user has a session");
            let conversation_latent = self.latent(&encode_conversation_avg(conv)?, Modality::Conversation)?;
            let session_latent = self.latent(&encode_session(sess, action_vocab), Modality::WebSession)?;
            let zero = |v: &[f64]| v.iter().all(|x| *x == 0.0);
            if zero(&conversation_latent) || zero(&session_latent) {
                // The anchor invariant forbids zero-norm anchors; skip them.
                continue;
            }
            anchors.push(Anchor {
                user_id: record.user_id.clone(),
                conversation_latent,
                session_latent,
            });
        }
        if anchors.is_empty() {
            return Err(Error::Anchor("all anchor candidates had zero-norm latents".into()));
        }
        Ok(anchors)
    }
}

/// Builds a random seed-deterministic two-layer single-event network.
fn single_event_net(input: usize, latent: usize, output: usize, seed: u64) -> Result<Network> {
    let spec = NetworkSpec {
        layers: vec![
            LayerSpec::Dense {
                input,
                output: latent,
                activation: Activation::Tanh,
                dropout: 0.0,
                has_bias: true,
            },
            LayerSpec::Dense {
                input: latent,
                output,
                activation: Activation::Identity,
                dropout: 0.0,
                has_bias: true,
            },
        ],
    };
    Network::new(&spec, &mut StdRng::seed_from_u64(seed))
}

/// Per-event training pairs (event, owning user's purchase label) for one
/// modality.
fn event_samples(
    records: &[UserRecord],
    modality: Modality,
    action_vocab: &Vocabulary,
    n_items: usize,
) -> Result<Vec<TrainSample>> {
    let mut out = Vec::new();
    for r in records {
        let label = r.purchase.label_vector(n_items);
        for e in &r.events {
            if e.modality() != modality {
                continue;
            }
            let vector = match e {
                Event::Conversation(c) => encode_conversation_avg(c)?,
                Event::WebSession(s) => encode_session(s, action_vocab),
            };
            out.push(TrainSample {
                steps: vec![EncodedStep {
                    vector,
                    modality,
                }],
                targets: vec![WeightedTarget::hard(label.clone())],
            });
        }
    }
    Ok(out)
}
