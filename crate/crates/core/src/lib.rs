//! Open-closed Gromov-Witten potentials of affine toric Calabi-Yau 3-orbifolds `[C^3/G]`
//! with a framed outer brane, computed two ways: an A-model decorated graph sum and a
//! B-model side built from Laplace-transform data and Eynard-Orantin recursion.

pub mod amodel;
pub mod bernoulli;
pub mod bmodel;
pub mod eo;
pub mod gamma;
pub mod mirrormap;
pub mod orbifold;
pub mod potential;
pub mod psi;
pub mod series;

pub use amodel::graph::{enumerate_graphs, DecoratedGraph};
pub use orbifold::{build_orbifold, OrbifoldData, OrbifoldInput, C64};
pub use potential::{Basis, PotentialSeries};
pub use series::TruncatedSeries;

pub type Q = num_rational::Ratio<i64>;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("truncation window: {0}")]
    Window(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

/// Floating-point mode for Gamma evaluations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Extended,
}
