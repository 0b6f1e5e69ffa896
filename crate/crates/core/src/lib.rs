//! Hybrid machine-translation decoding: a neural attention scorer proposes
//! word hypotheses while a statistical phrase table injects phrase hypotheses
//! at attention-focused source positions. All hypotheses are scored under a
//! log-linear model with an n-gram language model, tunable by minimum error
//! rate training.

pub mod align;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod linalg;
pub mod loglinear;
pub mod mert;
pub mod nbest;
pub mod ngram_lm;
pub mod phrase_table;
pub mod scorer;
pub mod search;
pub mod vocab;
pub mod weights;

pub use error::Error;
pub use vocab::Vocabulary;
