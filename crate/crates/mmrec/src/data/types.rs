//! Domain types: events, user records, purchases, and the item catalog.
//!
//! Timestamps are unix seconds. A user record is one training/evaluation
//! example: the chronologically ordered events observed before a purchase,
//! plus the purchase itself as the label.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = i64;
pub type ItemId = usize;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Interaction channel of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Conversation,
    WebSession,
}

/// One user action on the website: a set of tags naming the section, the
/// object interacted with, and the kind of interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub tags: Vec<String>,
}

impl Action {
    pub fn new(tags: Vec<String>) -> Self {
        Action { tags }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebSession {
    pub timestamp: Timestamp,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Agent,
}

/// One transcribed sentence: who spoke, a precomputed text embedding, and the
/// keywords extracted from the text. Embeddings and keywords arrive with the
/// dataset; no NLP happens here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub speaker: Speaker,
    pub embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub timestamp: Timestamp,
    pub sentences: Vec<Sentence>,
}

/// A single interaction episode: either a conversation or a web session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Conversation(Conversation),
    WebSession(WebSession),
}

impl Event {
    pub fn timestamp(&self) -> Timestamp {
        match self {
            Event::Conversation(c) => c.timestamp,
            Event::WebSession(s) => s.timestamp,
        }
    }

    pub fn modality(&self) -> Modality {
        match self {
            Event::Conversation(_) => Modality::Conversation,
            Event::WebSession(_) => Modality::WebSession,
        }
    }

    pub fn as_conversation(&self) -> Option<&Conversation> {
        match self {
            Event::Conversation(c) => Some(c),
            Event::WebSession(_) => None,
        }
    }

    pub fn as_session(&self) -> Option<&WebSession> {
        match self {
            Event::WebSession(s) => Some(s),
            Event::Conversation(_) => None,
        }
    }
}

/// The purchase that closes a user's history: one or more items bought at the
/// same time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Purchase {
    pub timestamp: Timestamp,
    pub items: BTreeSet<ItemId>,
}

impl Purchase {
    /// Binary label vector of length `n_items`.
    pub fn label_vector(&self, n_items: usize) -> Vec<f64> {
        let mut p = vec![0.0; n_items];
        for &j in &self.items {
            if j < n_items {
                p[j] = 1.0;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub events: Vec<Event>,
    pub purchase: Purchase,
    /// Base products the user already owns (drives the post filter and the
    /// coverage purchase constraint). Optional in the released schema.
    #[serde(default)]
    pub owned_products: BTreeSet<ItemId>,
}

impl UserRecord {
    pub fn has_conversation(&self) -> bool {
        self.events.iter().any(|e| e.modality() == Modality::Conversation)
    }

    pub fn has_session(&self) -> bool {
        self.events.iter().any(|e| e.modality() == Modality::WebSession)
    }

    pub fn conversations(&self) -> impl Iterator<Item = &Conversation> {
        self.events.iter().filter_map(Event::as_conversation)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &WebSession> {
        self.events.iter().filter_map(Event::as_session)
    }

    /// Which test subset the user belongs to.
    pub fn subset(&self) -> UserSubset {
        match (self.has_conversation(), self.has_session()) {
            (true, false) => UserSubset::ConversationsOnly,
            (false, true) => UserSubset::WebSessionsOnly,
            (true, true) => UserSubset::Intersection,
            (false, false) => UserSubset::Intersection, // unreachable: records carry ≥1 event
        }
    }
}

/// Disjoint user subsets by modality availability; `Union` is everyone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserSubset {
    Union,
    ConversationsOnly,
    WebSessionsOnly,
    Intersection,
}

impl UserSubset {
    pub const ALL: [UserSubset; 4] = [
        UserSubset::Union,
        UserSubset::ConversationsOnly,
        UserSubset::WebSessionsOnly,
        UserSubset::Intersection,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            UserSubset::Union => "union",
            UserSubset::ConversationsOnly => "conversations-only",
            UserSubset::WebSessionsOnly => "web-sessions-only",
            UserSubset::Intersection => "intersection",
        }
    }

    pub fn contains(&self, record_subset: UserSubset) -> bool {
        *self == UserSubset::Union || *self == record_subset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    BaseProduct,
    AdditionalCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub id: ItemId,
    pub name: String,
    pub kind: ItemKind,
    /// For additional coverages, the base product they extend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_of: Option<ItemId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemCatalog {
    pub items: Vec<CatalogItem>,
}

impl ItemCatalog {
    pub fn new(items: Vec<CatalogItem>) -> Result<Self> {
        let n = items.len();
        for (idx, it) in items.iter().enumerate() {
            if it.id != idx {
                return Err(Error::schema(format!(
                    "catalog item at position {} has id {}, expected contiguous ids",
                    idx, it.id
                )));
            }
            match (it.kind, it.base_of) {
                (ItemKind::AdditionalCoverage, Some(base)) => {
                    if base >= n {
                        return Err(Error::schema(format!(
                            "coverage {} references missing base product {}",
                            it.id, base
                        )));
                    }
                    if items[base].kind != ItemKind::BaseProduct {
                        return Err(Error::schema(format!(
                            "coverage {} references item {} which is not a base product",
                            it.id, base
                        )));
                    }
                }
                (ItemKind::AdditionalCoverage, None) => {
                    return Err(Error::schema(format!(
                        "coverage {} is missing its base product link",
                        it.id
                    )));
                }
                (ItemKind::BaseProduct, Some(_)) => {
                    return Err(Error::schema(format!(
                        "base product {} must not carry a base link",
                        it.id
                    )));
                }
                (ItemKind::BaseProduct, None) => {}
            }
        }
        Ok(ItemCatalog { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Per-item purchase counts over the given records.
    pub fn purchase_counts(&self, records: &[UserRecord]) -> Vec<usize> {
        let mut counts = vec![0usize; self.len()];
        for r in records {
            for &j in &r.purchase.items {
                if j < counts.len() {
                    counts[j] += 1;
                }
            }
        }
        counts
    }
}
