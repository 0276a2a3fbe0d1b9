use serde::{Deserialize, Serialize};

use super::OperatorSpec;
use crate::domain::{Point, ScalarField, SmoothnessHint};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentAxis {
    X1,
    X2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentOrder {
    First,
    Second,
    /// `|u1 - x1| |u2 - x2|`; the axis is ignored.
    AbsMixed,
}

/// The operator applied to `(u_axis - x_axis)^m` (m = 1, 2) or to
/// `|u1 - x1| |u2 - x2|`, evaluated at `x`.
pub fn moment(spec: &OperatorSpec, x: Point, axis: MomentAxis, order: MomentOrder) -> Result<f64> {
    let pick = move |u: Point| match axis {
        MomentAxis::X1 => u.x1 - x.x1,
        MomentAxis::X2 => u.x2 - x.x2,
    };
    let f = match order {
        MomentOrder::First => ScalarField::new("moment1", SmoothnessHint::Affine, pick),
        MomentOrder::Second => {
            ScalarField::new("moment2", SmoothnessHint::Smooth, move |u| pick(u).powi(2))
        }
        MomentOrder::AbsMixed => ScalarField::new("moment_abs_mixed", SmoothnessHint::Lipschitz, move |u| {
            (u.x1 - x.x1).abs() * (u.x2 - x.x2).abs()
        }),
    };
    Ok(spec.apply(&f, x)?.value)
}
