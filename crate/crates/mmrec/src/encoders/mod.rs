//! Event encoders: vocabularies, max-pooled session vectors, embedding
//! averages, the shared keyword space, latent projections, and anchor-based
//! relative representations.

pub mod anchors;
pub mod event;
pub mod sequence;
pub mod tagmap;
pub mod vocab;

pub use anchors::{Anchor, AnchorConfig, AnchorModel};
pub use event::{encode_conversation_avg, encode_keywords, encode_session, latent_map};
pub use sequence::{build_sequence, EncodedSequence, EncodedStep, EncoderMode, EncoderSet, SequenceOutcome};
pub use tagmap::TagMap;
pub use vocab::Vocabulary;

use crate::data::types::UserRecord;
use crate::error::Result;

/// Fits the action-tag vocabulary from the training split.
pub fn fit_action_vocab(train: &[UserRecord], min_frequency: f64) -> Result<Vocabulary> {
    let occurrences = train
        .iter()
        .flat_map(|r| r.sessions())
        .flat_map(|s| s.actions.iter())
        .flat_map(|a| a.tags.iter())
        .map(String::as_str);
    Vocabulary::fit(occurrences, min_frequency)
}

/// Fits the shared keyword/action-tag vocabulary from the training split:
/// session action tags plus tag-mapped conversation keywords pooled together.
pub fn fit_shared_vocab(
    train: &[UserRecord],
    tag_map: &TagMap,
    min_frequency: f64,
) -> Result<Vocabulary> {
    let mut occurrences: Vec<&str> = Vec::new();
    for r in train {
        for s in r.sessions() {
            for a in &s.actions {
                for t in &a.tags {
                    occurrences.push(t.as_str());
                }
            }
        }
        for c in r.conversations() {
            for s in &c.sentences {
                for k in &s.keywords {
                    occurrences.push(tag_map.map(k));
                }
            }
        }
    }
    Vocabulary::fit(occurrences.into_iter(), min_frequency)
}
