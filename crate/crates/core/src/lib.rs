//! Meyer-König–Zeller–Kantorovich and Stancu–Kantorovich operators on the
//! 2-simplex, measured in Orlicz norms.
//!
//! The crate is layered bottom-up:
//!
//! - [`nfunctions`]: N-functions, complements, the Δ₂ scan.
//! - [`domain`]: simplex geometry, the periodic extension of a field, quadrature.
//! - [`orlicz`]: modulars and Orlicz norms.
//! - [`smoothness`]: second-order moduli of continuity and Steklov means.
//! - [`operators`]: the two Kantorovich-type operators and their moments.
//! - [`harness`]: lemma checks, convergence experiments, CSV/JSON output.

pub mod domain;
pub mod error;
pub mod harness;
pub mod nfunctions;
pub mod operators;
pub mod orlicz;
pub mod smoothness;

pub use domain::{Point, QuadratureSpec, ScalarField};
pub use error::{Error, Result};
pub use nfunctions::NFunction;
