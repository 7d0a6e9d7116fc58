//! Contextual point-of-interest recommendation with factored relevance
//! models, their kernel-density generalization over word embeddings, and
//! trip-qualifier soft constraints.

pub mod baselines;
pub mod corpus;
pub mod dist;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod index;
pub mod pipeline;
pub mod recommend;
pub mod rlm;
pub mod synthetic;
pub mod tripctx;

pub use error::{Error, Result};
