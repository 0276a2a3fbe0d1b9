//! Gauss–Legendre rules on intervals, rectangles and the simplex.
//!
//! The simplex rule pulls a tensor rule on `[0,1]²` through the collapsed
//! map `(u, v) -> (u(1-v), uv)` with Jacobian `u`. Level `L` splits the
//! parameter square into `2^L × 2^L` sub-squares. Adaptive integration walks
//! the levels until two successive values agree to `rel_tol`.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cells::RectCell;
use super::field::{Point, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss points per axis.
    pub order: usize,
    pub refinement_levels: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { order: 6, refinement_levels: 6, rel_tol: 1e-9 }
    }
}

impl QuadratureSpec {
    pub fn new(order: usize, refinement_levels: usize, rel_tol: f64) -> Result<Self> {
        let spec = Self { order, refinement_levels, rel_tol };
        spec.validate()?;
        Ok(spec)
    }

    /// Default for operator cells: order 5, no refinement.
    pub fn cell_default() -> Self {
        Self { order: 5, refinement_levels: 0, rel_tol: 1e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || self.order > 64 {
            return Err(Error::Parameter(format!(
                "quadrature order must be in [2, 64], got {}",
                self.order
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Parameter(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.refinement_levels > 10 {
            return Err(Error::Parameter("refinement_levels above 10 are not supported".into()));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]` (weights sum to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "gauss order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton on P_n from the Tricomi initial guess.
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, z);
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - z);
            nodes[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Node/weight set on the simplex for one refinement level.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    pub fn new(order: usize, level: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let parts = 1usize << level;
        let h = 1.0 / parts as f64;
        let size = parts * parts * order * order;
        let mut nodes = Vec::with_capacity(size);
        let mut weights = Vec::with_capacity(size);
        for iu in 0..parts {
            for (a, wa) in gl.nodes.iter().zip(&gl.weights) {
                let u = (iu as f64 + a) * h;
                for iv in 0..parts {
                    for (b, wb) in gl.nodes.iter().zip(&gl.weights) {
                        let v = (iv as f64 + b) * h;
                        nodes.push(Point::new(u * (1.0 - v), u * v));
                        weights.push(wa * wb * h * h * u);
                    }
                }
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Value of an adaptive integral and its refinement diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    /// `|I_L - I_{L-1}|` at the final level (0 when only level 0 ran).
    pub delta: f64,
    pub level: usize,
    /// False when `rel_tol` was not met within the refinement budget.
    pub converged: bool,
}

impl Integral {
    pub fn flagged(&self) -> bool {
        !self.converged
    }
}

/// Drives `level -> value` through `0..=refinement_levels` until two
/// successive values agree. Non-finite values end the walk immediately.
pub(crate) fn adaptive_levels(
    spec: &QuadratureSpec,
    mut at_level: impl FnMut(usize) -> Result<f64>,
) -> Result<Integral> {
    let mut prev = at_level(0)?;
    if !prev.is_finite() || spec.refinement_levels == 0 {
        return Ok(Integral {
            value: prev,
            delta: 0.0,
            level: 0,
            converged: false,
        });
    }
    let mut delta = 0.0;
    for level in 1..=spec.refinement_levels {
        let cur = at_level(level)?;
        if !cur.is_finite() {
            return Ok(Integral { value: cur, delta: f64::INFINITY, level, converged: false });
        }
        delta = (cur - prev).abs();
        if delta <= spec.rel_tol * cur.abs() {
            return Ok(Integral { value: cur, delta, level, converged: true });
        }
        prev = cur;
    }
    Ok(Integral { value: prev, delta, level: spec.refinement_levels, converged: false })
}

/// Adaptive integral of `g` over the simplex.
pub fn integrate_simplex(
    g: impl Fn(Point) -> f64 + Sync,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    spec.validate()?;
    adaptive_levels(spec, |level| {
        let rule = SimplexRule::new(spec.order, level);
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let gx = g(*x);
            if !gx.is_finite() {
                return Err(Error::Integrand { x1: x.x1, x2: x.x2 });
            }
            acc += w * gx;
        }
        Ok(acc)
    })
}

/// Tensor Gauss integral over a rectangle, no subdivision.
pub fn integrate_rect(g: impl Fn(Point) -> f64, cell: &RectCell, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let gl = GaussLegendre::new(spec.order);
    Ok(cell_mean(&g, cell, &gl)? * cell.measure())
}

/// Mean of `g` over `cell` with the given rule.
#[inline]
pub(crate) fn cell_mean(g: &impl Fn(Point) -> f64, cell: &RectCell, gl: &GaussLegendre) -> Result<f64> {
    let (w1, w2) = (cell.width(), cell.height());
    let mut acc = 0.0;
    for (a, wa) in gl.nodes.iter().zip(&gl.weights) {
        let y1 = cell.x1_lo + w1 * a;
        let mut row = 0.0;
        for (b, wb) in gl.nodes.iter().zip(&gl.weights) {
            let y = Point::new(y1, cell.x2_lo + w2 * b);
            let gy = g(y);
            if !gy.is_finite() {
                return Err(Error::Integrand { x1: y.x1, x2: y.x2 });
            }
            row += wb * gy;
        }
        acc += wa * row;
    }
    Ok(acc)
}

/// A function that can be sampled at simplex quadrature nodes, possibly
/// failing (operator evaluations can hit truncation limits).
pub trait Integrand: Sync {
    fn eval_at(&self, x: Point) -> Result<f64>;
}

impl Integrand for ScalarField {
    fn eval_at(&self, x: Point) -> Result<f64> {
        Ok(self.eval(x))
    }
}

impl<T: Integrand + ?Sized> Integrand for &T {
    fn eval_at(&self, x: Point) -> Result<f64> {
        (**self).eval_at(x)
    }
}

/// Adapter turning a fallible closure into an [`Integrand`].
pub struct FnIntegrand<F>(pub F);

impl<F: Fn(Point) -> Result<f64> + Sync> Integrand for FnIntegrand<F> {
    fn eval_at(&self, x: Point) -> Result<f64> {
        (self.0)(x)
    }
}

/// One refinement level of a tabulated field.
#[derive(Debug)]
pub struct TabulatedLevel {
    pub rule: SimplexRule,
    pub values: Vec<f64>,
}

/// Lazily samples an integrand on the simplex rules of a [`QuadratureSpec`],
/// one level at a time, caching each level.
///
/// Any number of integrals `∫ map(f(x)) dx` then reuse the samples. This is
/// how expensive fields (operator outputs, smoothed fields) are fed to norm
/// computations.
pub struct Tabulation<'a> {
    source: &'a dyn Integrand,
    spec: QuadratureSpec,
    levels: Vec<OnceLock<Result<Arc<TabulatedLevel>>>>,
}

impl<'a> Tabulation<'a> {
    pub fn new(source: &'a dyn Integrand, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let levels = (0..=spec.refinement_levels).map(|_| OnceLock::new()).collect();
        Ok(Self { source, spec, levels })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn level(&self, level: usize) -> Result<Arc<TabulatedLevel>> {
        let slot = self
            .levels
            .get(level)
            .ok_or_else(|| Error::Parameter(format!("level {level} beyond refinement budget")))?;
        slot.get_or_init(|| {
            let rule = SimplexRule::new(self.spec.order, level);
            let values = rule
                .nodes
                .par_iter()
                .map(|&x| {
                    let v = self.source.eval_at(x)?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Integrand { x1: x.x1, x2: x.x2 })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Arc::new(TabulatedLevel { rule, values }))
        })
        .clone()
    }

    /// Adaptive `∫ map(f(x)) dx`; a non-finite `map` output yields a
    /// non-finite value rather than an error.
    pub fn integrate_map(&self, map: impl Fn(f64) -> f64) -> Result<Integral> {
        adaptive_levels(&self.spec, |level| {
            let lvl = self.level(level)?;
            let mut acc = 0.0;
            for (w, v) in lvl.rule.weights.iter().zip(&lvl.values) {
                acc += w * map(*v);
            }
            Ok(acc)
        })
    }

    /// True when every sample on levels 0 and 1 is exactly zero.
    pub fn is_null(&self) -> Result<bool> {
        for level in 0..=self.spec.refinement_levels.min(1) {
            if self.level(level)?.values.iter().any(|v| *v != 0.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
