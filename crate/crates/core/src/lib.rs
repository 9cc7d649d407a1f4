pub mod align;
pub mod corpus;
pub mod error;
pub mod lexicon;
pub mod link;
pub mod metrics;
pub mod synth;
pub mod template;

pub use error::{Error, Result};
