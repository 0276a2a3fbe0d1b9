//! Second-order moduli of continuity in Orlicz norms, and the Steklov mean.
//!
//! Off-simplex arguments go through [`ScalarField::extend_eval`]. The sup
//! over steps and directions is taken over finite grids, so every modulus
//! here is a lower estimate that grows as the grids are refined.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{FnIntegrand, GaussLegendre, Point, QuadratureSpec, ScalarField, SmoothnessHint};
use crate::error::{Error, Result};
use crate::nfunctions::NFunction;
use crate::orlicz::orlicz_norm;

pub const DEFAULT_T_SAMPLES: usize = 16;
pub const DEFAULT_DIRECTIONS: usize = 32;
pub const DEFAULT_KERNEL_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusResult {
    pub value: f64,
    pub r: f64,
    pub directions_sampled: usize,
    pub t_samples: usize,
    /// Unit direction attaining `value` (the first one on ties).
    pub argmax_direction: Point,
}

/// `f(x + t h) + f(x - t h) - 2 f(x)` through the extension of `f`.
pub fn second_difference(f: &ScalarField, x: Point, h: Point, t: f64) -> f64 {
    f.extend_eval(x.offset(h, t)) + f.extend_eval(x.offset(h, -t)) - 2.0 * f.extend_eval(x)
}

/// `ω_h²(f, r)_Φ`, the sup over `t = r j / t_samples`, `j = 1..=t_samples`.
pub fn directional_modulus2(
    nf: &NFunction,
    f: &ScalarField,
    h: Point,
    r: f64,
    spec: &QuadratureSpec,
    t_samples: usize,
) -> Result<f64> {
    if (h.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("direction must be a unit vector, |h| = {}", h.norm())));
    }
    check_step(r, t_samples)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for j in 1..=t_samples {
        let t = r * j as f64 / t_samples as f64;
        let diff = FnIntegrand(move |x: Point| Ok(second_difference(f, x, h, t)));
        best = best.max(orlicz_norm(nf, &diff, spec)?.value);
    }
    Ok(best)
}

fn check_step(r: f64, t_samples: usize) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("modulus radius must be finite and >= 0, got {r}")));
    }
    if t_samples == 0 {
        return Err(Error::Parameter("t_samples must be positive".into()));
    }
    Ok(())
}

/// `Ω²(f, r)_Φ` over the directions at angles `πk / n_directions`.
pub fn full_modulus2(
    nf: &NFunction,
    f: &ScalarField,
    r: f64,
    spec: &QuadratureSpec,
    n_directions: usize,
    t_samples: usize,
) -> Result<ModulusResult> {
    if n_directions < 4 {
        return Err(Error::Parameter(format!("need at least 4 directions, got {n_directions}")));
    }
    check_step(r, t_samples)?;
    let directions: Vec<Point> = (0..n_directions)
        .map(|k| {
            let a = PI * k as f64 / n_directions as f64;
            Point::new(a.cos(), a.sin())
        })
        .collect();
    let values = directions
        .par_iter()
        .map(|&h| directional_modulus2(nf, f, h, r, spec, t_samples))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(ModulusResult {
        value: values[best],
        r,
        directions_sampled: n_directions,
        t_samples,
        argmax_direction: directions[best],
    })
}

/// Which derivative of the Steklov mean to approximate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partial {
    D1,
    D2,
    D11,
    D22,
    D12,
}

impl Partial {
    pub const SECOND: [Partial; 3] = [Partial::D11, Partial::D22, Partial::D12];
}

/// The Steklov mean `f_r` of a field.
///
/// `f_r(x) = r⁻⁴ ∫_{[-r/2,r/2]⁴} f(x + u + v) du dv`. Since `u + v` has the
/// density `T_r(w1) T_r(w2)` with the hat `T_r(s) = (r - |s|)/r²` on
/// `[-r, r]`, this is evaluated as a 2-D convolution.
#[derive(Debug, Clone)]
pub struct SteklovField {
    pub base: ScalarField,
    pub r: f64,
    pub kernel_order: usize,
    /// Hat-weighted nodes on `[-r, r]`; the weights sum to 1.
    nodes: Arc<Vec<(f64, f64)>>,
}

impl SteklovField {
    pub fn new(base: ScalarField, r: f64, kernel_order: usize) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Parameter(format!("steklov radius must be positive, got {r}")));
        }
        if !(1..=64).contains(&kernel_order) {
            return Err(Error::Parameter(format!("kernel_order must lie in 1..=64, got {kernel_order}")));
        }
        Ok(Self { base, r, kernel_order, nodes: Arc::new(hat_nodes(r, kernel_order)) })
    }

    /// Sum of the discrete kernel weights (1 up to rounding).
    pub fn kernel_mass(&self) -> f64 {
        self.nodes.iter().map(|(_, w)| w).sum()
    }

    pub fn eval(&self, x: Point) -> f64 {
        let mut acc = 0.0;
        for &(s1, w1) in self.nodes.iter() {
            let mut row = 0.0;
            for &(s2, w2) in self.nodes.iter() {
                row += w2 * self.base.extend_eval(Point::new(x.x1 + s1, x.x2 + s2));
            }
            acc += w1 * row;
        }
        acc
    }

    /// Central differences of `f_r` with step `r/8`.
    pub fn partial(&self, x: Point, which: Partial) -> f64 {
        let d = self.r / 8.0;
        let at = |a: f64, b: f64| self.eval(Point::new(x.x1 + a, x.x2 + b));
        match which {
            Partial::D1 => (at(d, 0.0) - at(-d, 0.0)) / (2.0 * d),
            Partial::D2 => (at(0.0, d) - at(0.0, -d)) / (2.0 * d),
            Partial::D11 => (at(d, 0.0) - 2.0 * at(0.0, 0.0) + at(-d, 0.0)) / (d * d),
            Partial::D22 => (at(0.0, d) - 2.0 * at(0.0, 0.0) + at(0.0, -d)) / (d * d),
            Partial::D12 => (at(d, d) - at(d, -d) - at(-d, d) + at(-d, -d)) / (4.0 * d * d),
        }
    }

    /// `f_r` as a field on the simplex.
    pub fn to_field(&self) -> ScalarField {
        let me = self.clone();
        let label = format!("steklov({},r={})", self.base.label(), self.r);
        ScalarField::new(label, SmoothnessHint::Smooth, move |x| me.eval(x))
    }

    /// One partial derivative of `f_r` as a field on the simplex.
    pub fn partial_field(&self, which: Partial) -> ScalarField {
        let me = self.clone();
        let label = format!("steklov_{which:?}({},r={})", self.base.label(), self.r);
        ScalarField::new(label, SmoothnessHint::Smooth, move |x| me.partial(x, which))
    }
}

/// Gauss nodes on `[-r, 0]` and `[0, r]` weighted by the hat density.
fn hat_nodes(r: f64, order: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(order);
    let mut out = Vec::with_capacity(2 * order);
    for (z, w) in gl.nodes.iter().zip(&gl.weights) {
        // s in [0, r]: density (r - s)/r²
        let s = z * r;
        let mass = w * r * (r - s) / (r * r);
        out.push((-s, mass));
        out.push((s, mass));
    }
    out
}

/// `f_r(x)`.
pub fn steklov_eval(sf: &SteklovField, x: Point) -> f64 {
    sf.eval(x)
}

/// A finite-difference partial of `f_r` at `x`.
pub fn steklov_partials(sf: &SteklovField, x: Point, which: Partial) -> f64 {
    sf.partial(x, which)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orlicz::orlicz_norm;

    fn quad_field() -> ScalarField {
        ScalarField::builtin("quadratic").unwrap()
    }

    fn coarse() -> QuadratureSpec {
        QuadratureSpec { order: 6, refinement_levels: 2, rel_tol: 1e-9 }
    }

    /// Midpoint rule for `r⁻⁴ ∫_{[-r/2,r/2]⁴} f(x + u + v)` with `m` cells
    /// per axis.
    fn brute_steklov(f: &ScalarField, x: Point, r: f64, m: usize) -> f64 {
        let h = r / m as f64;
        let c: Vec<f64> = (0..m).map(|i| -r / 2.0 + (i as f64 + 0.5) * h).collect();
        let mut acc = 0.0;
        for &u1 in &c {
            for &v1 in &c {
                for &u2 in &c {
                    for &v2 in &c {
                        acc += f.extend_eval(Point::new(x.x1 + u1 + v1, x.x2 + u2 + v2));
                    }
                }
            }
        }
        acc / (m as f64).powi(4)
    }

    #[test]
    fn kernel_is_normalized() {
        for r in [0.02, 0.1, 0.5] {
            let sf = SteklovField::new(quad_field(), r, DEFAULT_KERNEL_ORDER).unwrap();
            assert!((sf.kernel_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_constants_and_affine() {
        let c = SteklovField::new(ScalarField::constant(2.5), 0.3, 6).unwrap();
        for x in [Point::new(0.0, 0.0), Point::new(0.7, 0.29), Point::new(-2.0, 5.0)] {
            assert!((c.eval(x) - 2.5).abs() < 1e-12);
            for which in [Partial::D1, Partial::D2, Partial::D11, Partial::D22, Partial::D12] {
                assert!(c.partial(x, which).abs() < 1e-9);
            }
        }
        let u1 = ScalarField::new("u1", SmoothnessHint::Affine, |x| x.x1);
        let sf = SteklovField::new(u1, 0.1, DEFAULT_KERNEL_ORDER).unwrap();
        assert!((sf.eval(Point::new(0.3, 0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn two_d_form_matches_four_d_oracle() {
        let f = quad_field();
        let sf = SteklovField::new(f.clone(), 0.1, DEFAULT_KERNEL_ORDER).unwrap();
        for x in [Point::new(0.25, 0.25), Point::new(0.45, 0.2)] {
            let brute = brute_steklov(&f, x, 0.1, 60);
            assert!((sf.eval(x) - brute).abs() < 1e-6, "{x:?}: {} vs {brute}", sf.eval(x));
        }
    }

    #[test]
    fn second_partials_in_the_clear_interior() {
        let x = Point::new(0.3, 0.3);
        let sq = ScalarField::new("u1^2", SmoothnessHint::Smooth, |x| x.x1 * x.x1);
        let sf = SteklovField::new(sq, 0.1, DEFAULT_KERNEL_ORDER).unwrap();
        assert!((sf.partial(x, Partial::D11) - 2.0).abs() < 1e-6);
        assert!(sf.partial(x, Partial::D22).abs() < 1e-6);
        assert!((sf.partial(x, Partial::D1) - 0.6).abs() < 1e-6);
        let prod = ScalarField::new("u1u2", SmoothnessHint::Smooth, |x| x.x1 * x.x2);
        let sf = SteklovField::new(prod, 0.1, DEFAULT_KERNEL_ORDER).unwrap();
        assert!((sf.partial(x, Partial::D12) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bad_inputs() {
        let nf = NFunction::power(2.0).unwrap();
        let f = quad_field();
        let spec = coarse();
        assert!(directional_modulus2(&nf, &f, Point::new(1.0, 1.0), 0.1, &spec, 4).is_err());
        assert!(directional_modulus2(&nf, &f, Point::new(1.0, 0.0), -0.1, &spec, 4).is_err());
        assert!(full_modulus2(&nf, &f, 0.1, &spec, 3, 4).is_err());
        assert!(SteklovField::new(f, 0.0, 4).is_err());
    }

    #[test]
    fn trivial_moduli() {
        let nf = NFunction::power(2.0).unwrap();
        let spec = coarse();
        let c = ScalarField::constant(3.0);
        let m = full_modulus2(&nf, &c, 0.2, &spec, 4, 3).unwrap();
        assert_eq!(m.value, 0.0);
        let f = quad_field();
        assert_eq!(full_modulus2(&nf, &f, 0.0, &spec, 4, 3).unwrap().value, 0.0);
        assert_eq!(directional_modulus2(&nf, &f, Point::new(0.0, 1.0), 0.0, &spec, 3).unwrap(), 0.0);
    }

    #[test]
    fn linear_second_difference_vanishes_off_the_seam() {
        let u1 = ScalarField::new("u1", SmoothnessHint::Affine, |x| x.x1);
        let h = Point::new(1.0, 0.0);
        let t = 0.05;
        let m = 200;
        let mut seen_nonzero = false;
        for i in 0..m {
            for j in 0..m {
                let x = Point::new((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64);
                if !x.in_simplex() {
                    continue;
                }
                let d = second_difference(&u1, x, h, t);
                let clear = x.x1 - t >= 0.0 && x.x1 + t + x.x2 <= 1.0;
                if clear {
                    assert!(d.abs() < 1e-15);
                } else {
                    assert!(d.abs() <= 4.0 + 1e-12);
                    seen_nonzero |= d.abs() > 1e-6;
                }
            }
        }
        assert!(seen_nonzero);
        let nf = NFunction::power(2.0).unwrap();
        assert!(directional_modulus2(&nf, &u1, h, 0.1, &coarse(), 4).unwrap() > 0.0);
    }

    #[test]
    fn modulus_grows_with_radius_and_respects_uniform_bound() {
        let nf = NFunction::power(2.0).unwrap();
        let spec = coarse();
        let f = quad_field();
        let vals: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&r| full_modulus2(&nf, &f, r, &spec, 8, 8).unwrap().value)
            .collect();
        assert!(vals[0] <= vals[1] + 1e-10 && vals[1] <= vals[2] + 1e-10, "{vals:?}");
        let norm = orlicz_norm(&nf, &f, &spec).unwrap().value;
        let m = full_modulus2(&nf, &f, 0.25, &spec, 8, 8).unwrap();
        assert!(m.value <= 4.0 * norm + 1e-8);
        assert!((m.argmax_direction.norm() - 1.0).abs() < 1e-12);
    }
}
