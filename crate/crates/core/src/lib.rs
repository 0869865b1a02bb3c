//! Novice/Expert classification of spoken-dialog-system users from the
//! interaction log of a single session.
//!
//! The pipeline: [`corpus`] parses session logs, [`features`] turns each
//! session into thirteen task features, [`prep`] balances, imputes,
//! normalizes and selects features, [`forest`] and [`svm`] learn, and
//! [`eval`] runs cross-validation, cross-corpus tests and per-turn
//! classification. [`synth`] generates labeled corpora whose per-class
//! feature distributions follow published Let's Go statistics.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod matrix;
pub mod model;
pub mod prep;
pub mod seed;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
