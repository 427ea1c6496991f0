//! Symbolic regression steered by the effective information criterion.
//!
//! The crate scores formulas by the significant digits they lose under
//! finite-precision evaluation ([`eic`]), folds that score into the fitness
//! of genetic-programming and Monte-Carlo tree searches ([`search`]), filters
//! random formula corpora by it ([`genfilter`]) and runs seeded experiments
//! ([`bench`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dataset;
pub mod eic;
pub mod error;
pub mod expr;
pub mod fitting;
pub mod genfilter;
pub mod search;

pub use dataset::Dataset;
pub use eic::{calculate_eic, EicConfig, EicReport};
pub use error::{ArityError, DatasetError};
pub use fitting::{fit_linear, fitness, fitness_alpha, FitnessConfig, FittedModel};
pub use expr::{additive_terms, evaluate, parse, BinaryOp, EvalResult, Expression, NodePath, UnaryOp};
pub use search::{gp_search, mcts_search, Budget, Candidate, GpConfig, MctsConfig, SearchResult};
