//! Per-user encoded event sequences and the encoder modes that produce them.

use serde::{Deserialize, Serialize};

use crate::data::types::{Modality, UserRecord};
use crate::encoders::anchors::AnchorModel;
use crate::encoders::event::{encode_conversation_avg, encode_keywords, encode_session};
use crate::encoders::tagmap::TagMap;
use crate::encoders::vocab::Vocabulary;
use crate::error::Result;

/// One encoded event: a feature vector plus the modality it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedStep {
    pub vector: Vec<f64>,
    pub modality: Modality,
}

/// A user's events encoded in timestamp order (the record already is).
pub type EncodedSequence = Vec<EncodedStep>;

/// How raw events are mapped into vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    /// Shared keyword/action-tag space, max-pooled per event.
    Keyword,
    /// Conversations as embedding averages, sessions as action encodings;
    /// widths differ per modality and the network's modality map unifies
    /// them.
    Latent,
    /// Cosine similarities to the anchor latents; uniform width |anchors|.
    Relative,
    /// Sessions only (conversations are skipped).
    SessionOnly,
    /// Conversations only (sessions are skipped).
    ConversationOnly,
}

/// Outcome of encoding a user under a mode: either a nonempty sequence or a
/// routing signal that this model cannot score the user.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceOutcome {
    Encoded(EncodedSequence),
    NotScorable,
}

impl SequenceOutcome {
    pub fn encoded(self) -> Option<EncodedSequence> {
        match self {
            SequenceOutcome::Encoded(seq) => Some(seq),
            SequenceOutcome::NotScorable => None,
        }
    }
}

/// Everything the fitted encoders know; immutable and shareable once built.
pub struct EncoderSet<'a> {
    /// Action-tag vocabulary (session encodings).
    pub action_vocab: &'a Vocabulary,
    /// Shared keyword/action-tag vocabulary (keyword mode).
    pub shared_vocab: &'a Vocabulary,
    pub tag_map: &'a TagMap,
    /// Anchor model, required for [`EncoderMode::Relative`].
    pub anchors: Option<&'a AnchorModel>,
}

/// Encodes a user's history under the given mode. Users with no encodable
/// events under the mode yield [`SequenceOutcome::NotScorable`] rather than
/// an error.
pub fn build_sequence(
    user: &UserRecord,
    mode: EncoderMode,
    enc: &EncoderSet<'_>,
) -> Result<SequenceOutcome> {
    let mut steps = Vec::with_capacity(user.events.len());
    for event in &user.events {
        let modality = event.modality();
        match mode {
            EncoderMode::Keyword => {
                let vector = encode_keywords(event, enc.shared_vocab, enc.tag_map)?;
                steps.push(EncodedStep { vector, modality });
            }
            EncoderMode::Latent => {
                let vector = match event {
                    crate::data::types::Event::Conversation(c) => encode_conversation_avg(c)?,
                    crate::data::types::Event::WebSession(s) => encode_session(s, enc.action_vocab),
                };
                steps.push(EncodedStep { vector, modality });
            }
            EncoderMode::Relative => {
                let anchors = enc.anchors.ok_or_else(|| {
                    crate::error::Error::config("relative mode requires fitted anchors")
                })?;
                let vector = anchors.relative_representation(event, enc.action_vocab)?;
                steps.push(EncodedStep { vector, modality });
            }
            EncoderMode::SessionOnly => {
                if let crate::data::types::Event::WebSession(s) = event {
                    steps.push(EncodedStep {
                        vector: encode_session(s, enc.action_vocab),
                        modality,
                    });
                }
            }
            EncoderMode::ConversationOnly => {
                if let crate::data::types::Event::Conversation(c) = event {
                    steps.push(EncodedStep {
                        vector: encode_conversation_avg(c)?,
                        modality,
                    });
                }
            }
        }
    }
    if steps.is_empty() {
        return Ok(SequenceOutcome::NotScorable);
    }
    Ok(SequenceOutcome::Encoded(steps))
}
