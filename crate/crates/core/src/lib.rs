//! Discrete maximal functions along Piatetski-Shapiro type sequences
//! `N_h = { floor(h(m)) }`: growth functions and their inverses, sequence
//! generation, smoothed averaging kernels and their autocorrelation,
//! exponential sums with Van der Corput bounds, Calderon-Zygmund
//! decompositions, and ergodic averages on finite systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cz;
pub mod error;
pub mod ergodic;
pub mod expsum;
pub mod growth;
pub mod kernel;
pub mod maximal;
pub mod seqset;
pub mod signal;
pub mod stats;

pub use error::{Error, Result};
pub use growth::{parse_growth_spec, GrowthFunction, InverseFunction, Variant};
pub use seqset::SequenceSet;
pub use num_complex::Complex64;
pub use signal::Signal;
