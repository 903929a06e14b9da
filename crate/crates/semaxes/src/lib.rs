//! Reproducible semantic axes from word embeddings.
//!
//! The pipeline decomposes per-language embedding matrices with FastICA run
//! many times, clusters the components across runs to keep only the
//! reproducible ones, labels each surviving axis with its top-loading words,
//! and then matches axes across languages with significance-corrected
//! correlation tests over a translation-aligned vocabulary block.
//!
//! Modules follow the pipeline stages:
//!
//! * [`embeddings`]: `.vec` parsing, bilingual dictionaries, vocabulary
//!   planning, column-aligned materialization.
//! * [`ica`]: centering/whitening and seeded FastICA runs.
//! * [`icasso`]: cross-run component clustering, quality index, centrotypes.
//! * [`axes`]: top-word interpretation of reliable components.
//! * [`crosslang`]: inter-language correlation tests with FDR/FPR control
//!   and cross-language axis clustering.
//! * [`evalkappa`]: Fleiss' kappa over human judgments plus the
//!   questionnaire form.
//! * [`synth`]: synthetic ground-truth generators and component matching,
//!   the oracle behind the test suite.
//! * [`pipeline`]: config-driven end-to-end orchestration and artifacts.

pub mod axes;
pub mod binio;
pub mod crosslang;
pub mod embeddings;
pub mod error;
pub mod evalkappa;
pub mod exec;
pub mod ica;
pub mod icasso;
pub mod pipeline;
pub mod synth;

mod assignment;

pub use error::{Error, Result};
