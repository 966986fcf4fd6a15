//! Grounded sales-conversation generation.
//!
//! The pipeline ingests a product catalog and its reviews, mines
//! feature-level opinions out of the review sentences, indexes them per
//! product, and then composes simulated customer / sales-assistant dialogs
//! in two stages:
//!
//! 1. an information-search exchange that narrows the catalog down to a set
//!    of alternatives via feature-value questions ([`search_dialog`]);
//! 2. an evaluation exchange built from negotiation-tactic dialog pairs
//!    ([`negotiation`]) arranged by conversation templates ([`assembly`]).
//!
//! Every opinion uttered by either party embeds a real review sentence
//! verbatim and carries a provenance link back to it, which
//! [`dataset::validate`] re-checks against the corpus.

pub mod annotate;
pub mod assembly;
pub mod corpus;
pub mod dataset;
pub mod dialog;
pub mod index;
pub mod negotiation;
pub mod search_dialog;
pub mod seed;

pub use annotate::{ExtractConfig, Lexicons, OpinionSpan, PolarityLabel, PolarityThresholds};
pub use assembly::{ConversationTemplate, GenerationParams};
pub use corpus::{ProductCatalog, ReviewStore};
pub use dialog::{Conversation, Speaker, Turn};
pub use index::{OpinionIndex, SpanId};
pub use negotiation::{PairKind, Phrasebank};
