//! Explicit weak sources, subsource oracles, block-and-weak extractors and a
//! challenge-response pipeline for constant-length subsource-extraction
//! experiments.

pub mod bits;
pub mod challenge;
pub mod error;
pub mod extract;
pub mod harness;
pub mod lp;
pub mod oracles;
pub mod pipeline;
pub mod rng;
pub mod source;
pub mod tree;

pub use bits::{BitString, TreeNode};
pub use error::{Error, Result};
pub use source::{ExplicitSource, Mass};
pub use tree::{EntropyTree, Label};
