use statrs::function::factorial::ln_factorial;

use super::{ApplyResult, OperatorKind, OperatorSpec};
use crate::domain::{cell_mean, mkz_cell, GaussLegendre, Point, ScalarField};
use crate::error::{Error, Result};

/// Inner binomial terms below this fraction of the modal term are dropped.
const INNER_REL_CUT: f64 = 1e-17;
/// Coarsest relative cut used for light degree blocks.
const INNER_REL_CUT_MAX: f64 = 1e-4;
/// Target absolute weight of the largest dropped cell.
const ABS_CELL_CUT: f64 = 1e-16;
/// Degree blocks lighter than this contribute to the mass but are not expanded.
const SKIP_DEGREE_WEIGHT: f64 = 1e-20;
/// Seam guard: `K_n` degenerates as `x1 + x2 -> 1`.
const SEAM_GUARD: f64 = 1e-9;
/// Below this weight mass a truncated series is an error, not a flag.
const HARD_MASS_FLOOR: f64 = 1.0 - 1e-3;

/// `p̃_{n,k1,k2}(x) = (n+k1+k2)!/(n! k1! k2!) x1^k1 x2^k2 (1-x1-x2)^{n+1}`,
/// evaluated in log space.
pub fn mkz_weight(n: u32, k1: u64, k2: u64, x: Point) -> f64 {
    debug_assert!(x.in_simplex(), "mkz_weight needs x in the simplex");
    let gap = x.gap();
    let mut ln = ln_factorial(n as u64 + k1 + k2) - ln_factorial(n as u64) - ln_factorial(k1)
        - ln_factorial(k2);
    for (k, base) in [(k1, x.x1), (k2, x.x2), (n as u64 + 1, gap)] {
        if k == 0 {
            continue;
        }
        if base <= 0.0 {
            return 0.0;
        }
        ln += k as f64 * base.ln();
    }
    ln.exp()
}

/// `c_{n,k1,k2} = (n+k1+k2)²(n+k1+k2+1)² / ((n+k1)(n+k2))`.
pub fn mkz_coefficient(n: u32, k1: u64, k2: u64) -> f64 {
    let n = n as f64;
    let m = n + k1 as f64 + k2 as f64;
    (m * m * (m + 1.0) * (m + 1.0)) / ((n + k1 as f64) * (n + k2 as f64))
}

/// `K_n(f; x)` for `x` strictly inside the simplex (off the seam).
pub fn mkz_apply(f: &ScalarField, spec: &OperatorSpec, x: Point) -> Result<ApplyResult> {
    if spec.kind != OperatorKind::Mkz {
        return Err(Error::Parameter("mkz_apply needs an mkz operator spec".into()));
    }
    spec.validate()?;
    let gl = GaussLegendre::new(spec.cell_quadrature.order);
    apply_with(&|y| f.eval(y), spec, &gl, x)
}

/// `ln C(n+m, m)` as `Σ_{j=1..n} ln(1 + m/j)`: no cancellation between
/// large log-factorials, at O(n) cost.
fn ln_binom_upper(n: u32, m: usize) -> f64 {
    let m = m as f64;
    (1..=n).map(|j| (m / j as f64).ln_1p()).sum()
}

/// Series evaluation.
///
/// The weights factor as `NB(m) · Binom(k1; m, x1/t)` with `t = x1 + x2`,
/// where `NB(m) = C(n+m, m) t^m (1-t)^{n+1}` is the total-degree law.
/// The degree weights are propagated by their ratio from the mode (whose
/// log is computed without factorial cancellation); the binomial block of
/// each degree is walked outward from its mode and normalized by its sum.
pub(super) fn apply_with(
    f: &impl Fn(Point) -> f64,
    spec: &OperatorSpec,
    gl: &GaussLegendre,
    x: Point,
) -> Result<ApplyResult> {
    let n = spec.n;
    let policy = &spec.truncation;
    let gap = x.gap();
    if !(x.x1 >= 0.0 && x.x2 >= 0.0 && x.x1.is_finite() && x.x2.is_finite()) || gap <= SEAM_GUARD {
        return Err(Error::Domain(format!(
            "mkz operator needs x in the simplex interior (x1 + x2 < 1 - {SEAM_GUARD}), got ({}, {})",
            x.x1, x.x2
        )));
    }
    let t = x.x1 + x.x2;
    if t == 0.0 {
        let mean = cell_mean(f, &mkz_cell(n, 0, 0), gl)?;
        return Ok(ApplyResult { value: mean, weight_mass: 1.0, terms_used: 1, truncated: false });
    }
    let share = x.x1 / t;
    let cap = policy.degree_cap(n, gap);
    let target = 1.0 - policy.tail_eps;
    let step = |m: usize| t * (n as f64 + m as f64) / m as f64; // NB(m) / NB(m-1)

    let mode = ((n as f64 * t / gap).floor() as usize).min(cap);
    let ln_mode = ln_binom_upper(n, mode) + mode as f64 * t.ln() + (n as f64 + 1.0) * gap.ln();
    let w_mode = ln_mode.exp();

    // Degrees below the mode, computed downward, then replayed upward.
    let mut below = Vec::new();
    let mut w = w_mode;
    let mut m = mode;
    while m > 0 {
        w /= step(m);
        m -= 1;
        if w < 1e-300 {
            break;
        }
        below.push((m, w));
    }

    let mut value = 0.0;
    let mut mass = 0.0;
    let mut terms = 0usize;
    let mut accumulate = |m: usize, w: f64, value: &mut f64, mass: &mut f64| -> Result<()> {
        *mass += w;
        if w > SKIP_DEGREE_WEIGHT {
            let (mean, used) = degree_block_mean(f, n, m, share, w, gl)?;
            *value += w * mean;
            terms += used;
        }
        Ok(())
    };

    for &(m, w) in below.iter().rev() {
        accumulate(m, w, &mut value, &mut mass)?;
    }
    let mut last = mode;
    let mut w = w_mode;
    accumulate(mode, w, &mut value, &mut mass)?;
    while mass < target && last < cap {
        last += 1;
        w *= step(last);
        accumulate(last, w, &mut value, &mut mass)?;
    }

    let truncated = mass < target;
    if truncated && mass < HARD_MASS_FLOOR {
        return Err(Error::HardTruncation { degree: last, mass, x1: x.x1, x2: x.x2 });
    }
    Ok(ApplyResult { value, weight_mass: mass, terms_used: terms, truncated })
}

/// Mean of the cell means over the binomial block of degree `m`.
fn degree_block_mean(
    f: &impl Fn(Point) -> f64,
    n: u32,
    m: usize,
    share: f64,
    degree_weight: f64,
    gl: &GaussLegendre,
) -> Result<(f64, usize)> {
    let cell = |k1: usize| mkz_cell(n, k1 as u64, (m - k1) as u64);
    if share <= 0.0 {
        return Ok((cell_mean(f, &cell(0), gl)?, 1));
    }
    if share >= 1.0 {
        return Ok((cell_mean(f, &cell(m), gl)?, 1));
    }
    // The cut is set so that a dropped cell carries absolute weight below
    // ABS_CELL_CUT; light blocks are walked less far.
    let cut = (ABS_CELL_CUT / degree_weight).clamp(INNER_REL_CUT, INNER_REL_CUT_MAX);
    let odds = share / (1.0 - share);
    let mode = (((m + 1) as f64 * share).floor() as usize).min(m);

    let mut sum = 1.0;
    let mut acc = cell_mean(f, &cell(mode), gl)?;
    let mut used = 1;
    let mut w = 1.0;
    let mut k = mode;
    while k < m {
        w *= (m - k) as f64 / (k + 1) as f64 * odds;
        k += 1;
        if w < cut {
            break;
        }
        sum += w;
        acc += w * cell_mean(f, &cell(k), gl)?;
        used += 1;
    }
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / (m - k + 1) as f64 / odds;
        k -= 1;
        if w < cut {
            break;
        }
        sum += w;
        acc += w * cell_mean(f, &cell(k), gl)?;
        used += 1;
    }
    Ok((acc / sum, used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{mkz_cell_measure, SmoothnessHint};
    use crate::operators::TruncationPolicy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double sum with log-gamma weights and exact cell means of a
    /// polynomial given by its closed-form cell average.
    fn brute_mkz(n: u32, x: Point, max_deg: u64, mean: impl Fn(f64, f64, f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for m in 0..=max_deg {
            for k1 in 0..=m {
                let c = mkz_cell(n, k1, m - k1);
                acc += mkz_weight(n, k1, m - k1, x) * mean(c.x1_lo, c.x1_hi, c.x2_lo, c.x2_hi);
            }
        }
        acc
    }

    #[test]
    fn weight_examples() {
        let w = mkz_weight(1, 1, 0, Point::new(0.25, 0.25));
        assert!((w - 2.0 * 0.25 * 0.25).abs() < 1e-15);
        assert!((w - 0.125).abs() < 1e-15);
        let origin = Point::new(0.0, 0.0);
        for n in [1, 5, 40] {
            assert_eq!(mkz_weight(n, 0, 0, origin), 1.0);
            assert_eq!(mkz_weight(n, 1, 0, origin), 0.0);
            assert_eq!(mkz_weight(n, 2, 3, origin), 0.0);
        }
    }

    #[test]
    fn weights_partition_unity() {
        let x = Point::new(0.3, 0.3);
        let n = 5;
        let mut partial = 0.0;
        let mut prev_gap = 1.0;
        for m in 0..=400u64 {
            for k1 in 0..=m {
                partial += mkz_weight(n, k1, m - k1, x);
            }
            if m % 50 == 49 {
                let gap = 1.0 - partial;
                assert!(gap < prev_gap || gap.abs() < 1e-13);
                prev_gap = gap;
            }
        }
        assert!((partial - 1.0).abs() < 1e-12, "{partial}");
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(mkz_coefficient(1, 0, 0), 4.0);
        assert!((mkz_coefficient(2, 1, 1) - 400.0 / 9.0).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.gen_range(1..200);
            let (k1, k2) = (rng.gen_range(0..500), rng.gen_range(0..500));
            let prod = mkz_coefficient(n, k1, k2) * mkz_cell_measure(n, k1, k2);
            assert!((prod - 1.0).abs() <= 1e-14, "n={n} k=({k1},{k2}) -> {prod}");
        }
    }

    #[test]
    fn reproduces_constants() {
        let one = ScalarField::constant(1.0);
        for n in [1, 4, 16, 64] {
            let spec = OperatorSpec::mkz(n);
            for x in [Point::new(0.3, 0.3), Point::new(0.05, 0.8), Point::new(0.0, 0.6), Point::new(0.9, 0.0)] {
                let r = mkz_apply(&one, &spec, x).unwrap();
                assert!((r.value - 1.0).abs() < 1e-9, "n={n} {x:?} {r:?}");
                assert!(r.weight_mass >= 1.0 - 1e-10 && r.weight_mass <= 1.0 + 1e-12);
                assert!(!r.truncated);
            }
        }
    }

    #[test]
    fn origin_uses_single_cell() {
        let f = ScalarField::new("u1", SmoothnessHint::Affine, |y| y.x1);
        let r = mkz_apply(&f, &OperatorSpec::mkz(1), Point::new(0.0, 0.0)).unwrap();
        assert!((r.value - 0.25).abs() < 1e-15);
        assert_eq!(r.terms_used, 1);
    }

    #[test]
    fn matches_brute_force_summation() {
        let f = ScalarField::new("u1", SmoothnessHint::Affine, |y| y.x1);
        let x = Point::new(0.2, 0.2);
        let brute = brute_mkz(4, x, 300, |a, b, _, _| 0.5 * (a + b));
        let r = mkz_apply(&f, &OperatorSpec::mkz(4), x).unwrap();
        assert!((r.value - brute).abs() < 1e-10, "{} vs {brute}", r.value);
        // the O(1/n) first-moment bias is still about 0.05 at n = 4
        assert!((brute - 0.2532).abs() < 1e-3, "brute {brute}");
        let far = mkz_apply(&f, &OperatorSpec::mkz(64), x).unwrap();
        assert!((far.value - 0.2).abs() < 0.1 * (brute - 0.2), "{}", far.value);

        let g = ScalarField::new("u1u2", SmoothnessHint::Smooth, |y| y.x1 * y.x2 + y.x2 * y.x2);
        let x = Point::new(0.35, 0.15);
        let brute = brute_mkz(3, x, 300, |a, b, c, d| {
            0.25 * (a + b) * (c + d) + (d * d + d * c + c * c) / 3.0
        });
        let r = mkz_apply(&g, &OperatorSpec::mkz(3), x).unwrap();
        assert!((r.value - brute).abs() < 1e-10, "{} vs {brute}", r.value);
    }

    #[test]
    fn seam_and_outside_points_rejected() {
        let one = ScalarField::constant(1.0);
        let spec = OperatorSpec::mkz(3);
        assert!(mkz_apply(&one, &spec, Point::new(0.5, 0.5)).is_err());
        assert!(mkz_apply(&one, &spec, Point::new(-0.1, 0.5)).is_err());
        assert!(mkz_apply(&one, &spec, Point::new(0.5, 0.5 - 1e-12)).is_err());
        assert!(mkz_apply(&one, &OperatorSpec::stancu(3, 1), Point::new(0.1, 0.1)).is_err());
    }

    #[test]
    fn small_budget_is_a_hard_truncation() {
        let one = ScalarField::constant(1.0);
        let tight = TruncationPolicy { tail_eps: 1e-10, max_degree: 10, degree_scale: 0.0 };
        let spec = OperatorSpec::mkz(20).with_truncation(tight);
        let err = mkz_apply(&one, &spec, Point::new(0.45, 0.45)).unwrap_err();
        assert!(matches!(err, Error::HardTruncation { .. }));
        // a mild shortfall is flagged, not fatal
        let spec = OperatorSpec::mkz(2).with_truncation(TruncationPolicy { max_degree: 40, ..tight });
        let r = mkz_apply(&one, &spec, Point::new(0.35, 0.3)).unwrap();
        assert!(r.truncated);
        assert!(r.weight_mass < 1.0 - 1e-10 && r.weight_mass > 1.0 - 1e-3);
    }

    #[test]
    fn mode_anchor_agrees_with_log_gamma() {
        for (n, m) in [(1u32, 0usize), (5, 17), (40, 300), (128, 2000)] {
            let a = ln_binom_upper(n, m);
            let b = ln_factorial(n as u64 + m as u64) - ln_factorial(n as u64) - ln_factorial(m as u64);
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "n={n} m={m}");
        }
    }
}
