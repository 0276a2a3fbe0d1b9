//! The Meyer-König–Zeller–Kantorovich operator `K_n` (an infinite series)
//! and the Stancu–Kantorovich operator `K_{n,s}` (a finite sum), plus their
//! moment functionals.
//!
//! Both operators replace point evaluations by cell means. For `K_n` the
//! coefficient `c_{n,k1,k2}` is exactly the reciprocal of the cell measure,
//! so each term is `weight × mean of f over the cell`; for `K_{n,s}` the
//! factor `(n+2)²` plays the same role.

mod mkz;
mod moments;
mod stancu;

use serde::{Deserialize, Serialize};

use crate::domain::{GaussLegendre, Integrand, Point, QuadratureSpec, ScalarField};
use crate::error::{Error, Result};

pub use mkz::{mkz_apply, mkz_coefficient, mkz_weight};
pub use moments::{moment, MomentAxis, MomentOrder};
pub use stancu::{bernstein_basis, stancu_apply, stancu_weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Mkz,
    Stancu,
}

impl OperatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorKind::Mkz => "mkz",
            OperatorKind::Stancu => "stancu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "mkz" => Ok(OperatorKind::Mkz),
            "stancu" => Ok(OperatorKind::Stancu),
            other => Err(Error::Config(format!("unknown operator `{other}`"))),
        }
    }
}

/// Truncation of the `K_n` series.
///
/// Terms are summed by increasing total degree until the accumulated weight
/// reaches `1 - tail_eps`. The degree cap is
/// `max(max_degree, ceil(degree_scale · n / (1 - x1 - x2)))`: the weights
/// form a negative-binomial law in the total degree whose mean grows like
/// `n / (1 - x1 - x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub tail_eps: f64,
    pub max_degree: usize,
    pub degree_scale: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { tail_eps: 1e-10, max_degree: 1000, degree_scale: 50.0 }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_eps > 0.0 && self.tail_eps <= 1e-6) {
            return Err(Error::Parameter(format!(
                "tail_eps must lie in (0, 1e-6], got {}",
                self.tail_eps
            )));
        }
        if self.max_degree < 10 {
            return Err(Error::Parameter(format!(
                "max_degree must be at least 10, got {}",
                self.max_degree
            )));
        }
        if !(self.degree_scale >= 0.0 && self.degree_scale.is_finite()) {
            return Err(Error::Parameter("degree_scale must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub(crate) fn degree_cap(&self, n: u32, gap: f64) -> usize {
        let scaled = (self.degree_scale * n as f64 / gap).ceil();
        let scaled = if scaled.is_finite() && scaled < 1e15 { scaled as usize } else { usize::MAX / 2 };
        self.max_degree.max(scaled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub n: u32,
    /// Stancu shift, `0 <= s < n/2`; ignored for `mkz`.
    pub s: u32,
    /// Series truncation; ignored for `stancu`.
    pub truncation: TruncationPolicy,
    pub cell_quadrature: QuadratureSpec,
}

impl OperatorSpec {
    pub fn mkz(n: u32) -> Self {
        Self {
            kind: OperatorKind::Mkz,
            n,
            s: 0,
            truncation: TruncationPolicy::default(),
            cell_quadrature: QuadratureSpec::cell_default(),
        }
    }

    pub fn stancu(n: u32, s: u32) -> Self {
        Self { kind: OperatorKind::Stancu, s, ..Self::mkz(n) }
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_cell_order(mut self, order: usize) -> Self {
        self.cell_quadrature.order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Parameter("operator degree n must be >= 1".into()));
        }
        self.cell_quadrature.validate()?;
        match self.kind {
            OperatorKind::Mkz => self.truncation.validate(),
            OperatorKind::Stancu => {
                if 2 * self.s >= self.n {
                    Err(Error::Parameter(format!(
                        "stancu shift must satisfy s < n/2, got n={} s={}",
                        self.n, self.s
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Applies the operator to `f` at `x`.
    pub fn apply(&self, f: &ScalarField, x: Point) -> Result<ApplyResult> {
        match self.kind {
            OperatorKind::Mkz => mkz_apply(f, self, x),
            OperatorKind::Stancu => stancu_apply(f, self, x),
        }
    }

    /// Binds the operator to a field, precomputing what can be shared
    /// across evaluation points.
    pub fn bind(&self, f: &ScalarField) -> Result<BoundOperator> {
        BoundOperator::new(*self, f.clone())
    }
}

/// Result of one operator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplyResult {
    pub value: f64,
    /// Sum of the weights actually used.
    pub weight_mass: f64,
    pub terms_used: usize,
    pub truncated: bool,
}

/// An operator bound to a field.
///
/// For `K_{n,s}` the `(n+1)(n+2)/2` cell means are computed once; `K_n`
/// cells depend on the evaluation point, so nothing is cached there.
pub struct BoundOperator {
    spec: OperatorSpec,
    field: ScalarField,
    gl: GaussLegendre,
    stancu: Option<stancu::StancuTables>,
}

impl BoundOperator {
    pub fn new(spec: OperatorSpec, field: ScalarField) -> Result<Self> {
        spec.validate()?;
        let gl = GaussLegendre::new(spec.cell_quadrature.order);
        let stancu = match spec.kind {
            OperatorKind::Stancu => Some(stancu::StancuTables::new(&field, &spec, &gl)?),
            OperatorKind::Mkz => None,
        };
        Ok(Self { spec, field, gl, stancu })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn apply(&self, x: Point) -> Result<ApplyResult> {
        match &self.stancu {
            Some(tables) => tables.apply(&self.spec, x),
            None => mkz::apply_with(&|y| self.field.eval(y), &self.spec, &self.gl, x),
        }
    }

    /// `K f` as an integrand.
    pub fn image(&self) -> OperatorImage<'_> {
        OperatorImage { op: self, subtract_field: false }
    }

    /// `K f - f` as an integrand.
    pub fn residual(&self) -> OperatorImage<'_> {
        OperatorImage { op: self, subtract_field: true }
    }
}

/// Sampling view of a [`BoundOperator`]; see [`BoundOperator::image`] and
/// [`BoundOperator::residual`].
pub struct OperatorImage<'a> {
    op: &'a BoundOperator,
    subtract_field: bool,
}

impl Integrand for OperatorImage<'_> {
    fn eval_at(&self, x: Point) -> Result<f64> {
        let r = self.op.apply(x)?;
        Ok(if self.subtract_field { r.value - self.op.field.eval(x) } else { r.value })
    }
}

/// The ten-point interior grid used by the weight and moment checks.
pub fn interior_grid() -> Vec<Point> {
    let coords = [0.1, 0.3, 0.5, 0.7];
    let mut out = Vec::with_capacity(10);
    for &a in &coords {
        for &b in &coords {
            if a + b <= 0.8 + 1e-12 {
                out.push(Point::new(a, b));
            }
        }
    }
    out
}
