//! Weak labeling and claim classification for public regulatory comments.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod labeler;
pub mod models;
pub mod synth;
pub mod taxonomy;
pub mod workspace;

pub use corpus::{Comment, Sentence};
pub use labeler::{LabelRecord, RelabelDiff, WeakLabel};
pub use models::ModelBundle;
pub use taxonomy::{ClaimType, Stance, Taxonomy};
pub use workspace::Workspace;
