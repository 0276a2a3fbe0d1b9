//! Simplex geometry, the periodic extension of fields, and quadrature.

mod cells;
mod field;
mod quadrature;

pub use cells::{mkz_cell, mkz_cell_measure, stancu_cell, RectCell};
pub use field::{builtin_fields, extend_eval, Point, ScalarField, SmoothnessHint, BUILTIN_FIELD_KEYS};
pub use quadrature::{
    integrate_rect, integrate_simplex, FnIntegrand, GaussLegendre, Integral, Integrand,
    QuadratureSpec, SimplexRule, TabulatedLevel, Tabulation,
};

pub(crate) use quadrature::cell_mean;

/// Area of the simplex.
pub const SIMPLEX_AREA: f64 = 0.5;
