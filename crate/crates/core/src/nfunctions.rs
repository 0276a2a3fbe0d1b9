//! N-functions, their complementary functions and a sampled Δ₂ check.
//!
//! An [`NFunction`] is stored as a pair of closures (the function and its
//! right derivative) plus optional closed-form complement. Everything is
//! evaluated on `|u|`, so callers may pass sign-indefinite arguments.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Family tag, used to rebuild an N-function from its harness key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `u^p`
    Power { p: f64 },
    /// `u^p / p`
    ScaledPower { p: f64 },
    /// `u^p ln(1 + u)`
    PowerLog { p: f64 },
    /// `e^u - u - 1`
    ExpMinus,
    Custom,
}

#[derive(Clone)]
pub struct NFunction {
    name: String,
    family: Family,
    phi: RealMap,
    phi_prime: RealMap,
    analytic_complement: Option<RealMap>,
    params: Vec<(String, f64)>,
}

impl fmt::Debug for NFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NFunction")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("params", &self.params)
            .field("analytic_complement", &self.analytic_complement.is_some())
            .finish()
    }
}

fn power_of(u: f64, p: f64) -> f64 {
    // Integer exponents go through powi so that (2u)^p / u^p is exactly 2^p.
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        u.powi(p as i32)
    } else {
        u.powf(p)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::Parameter(format!("exponent must satisfy p > 1, got {p}")));
    }
    Ok(())
}

impl NFunction {
    /// `Φ(u) = u^p`, `p > 1`. Complement `Ψ(v) = (p-1)(v/p)^{p/(p-1)}`.
    pub fn power(p: f64) -> Result<Self> {
        check_exponent(p)?;
        let q = p / (p - 1.0);
        Ok(Self {
            name: format!("power:p={p}"),
            family: Family::Power { p },
            phi: Arc::new(move |u| power_of(u, p)),
            phi_prime: Arc::new(move |u| p * power_of(u, p - 1.0)),
            analytic_complement: Some(Arc::new(move |v| (p - 1.0) * power_of(v / p, q))),
            params: vec![("p".into(), p)],
        })
    }

    /// `Φ(u) = u^p / p`, whose complement is `v^q / q` with `1/p + 1/q = 1`.
    pub fn scaled_power(p: f64) -> Result<Self> {
        check_exponent(p)?;
        let q = p / (p - 1.0);
        Ok(Self {
            name: format!("scaledpower:p={p}"),
            family: Family::ScaledPower { p },
            phi: Arc::new(move |u| power_of(u, p) / p),
            phi_prime: Arc::new(move |u| power_of(u, p - 1.0)),
            analytic_complement: Some(Arc::new(move |v| power_of(v, q) / q)),
            params: vec![("p".into(), p)],
        })
    }

    /// `Φ(u) = u^p ln(1 + u)`, `p > 1`.
    pub fn power_log(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self {
            name: format!("powerlog:p={p}"),
            family: Family::PowerLog { p },
            phi: Arc::new(move |u| power_of(u, p) * u.ln_1p()),
            phi_prime: Arc::new(move |u| {
                p * power_of(u, p - 1.0) * u.ln_1p() + power_of(u, p) / (1.0 + u)
            }),
            analytic_complement: None,
            params: vec![("p".into(), p)],
        })
    }

    /// `Φ(u) = e^u - u - 1`. Fails the Δ₂-condition.
    pub fn exp_minus() -> Self {
        Self {
            name: "expm:".into(),
            family: Family::ExpMinus,
            phi: Arc::new(|u| u.exp_m1() - u),
            phi_prime: Arc::new(|u| u.exp_m1()),
            analytic_complement: Some(Arc::new(|v| (1.0 + v) * v.ln_1p() - v)),
            params: Vec::new(),
        }
    }

    /// Builds an N-function from closures and validates it by sampling.
    pub fn custom(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        analytic_complement: Option<RealMap>,
    ) -> Result<Self> {
        let nf = Self {
            name: name.into(),
            family: Family::Custom,
            phi: Arc::new(phi),
            phi_prime: Arc::new(phi_prime),
            analytic_complement,
            params: Vec::new(),
        };
        nf.validate()?;
        Ok(nf)
    }

    /// Parses a harness key such as `power:p=2`, `powerlog:p=2` or `expm:`.
    pub fn from_key(key: &str) -> Result<Self> {
        let (family, rest) = key.split_once(':').unwrap_or((key, ""));
        let mut p = None;
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed parameter `{item}` in `{key}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number `{v}` in `{key}`")))?;
            match k.trim() {
                "p" => p = Some(v),
                other => {
                    return Err(Error::Config(format!("unknown parameter `{other}` in `{key}`")))
                }
            }
        }
        let need_p = || p.ok_or_else(|| Error::Config(format!("`{key}` needs p=<exponent>")));
        match family.trim() {
            "power" => Self::power(need_p()?),
            "scaledpower" => Self::scaled_power(need_p()?),
            "powerlog" => Self::power_log(need_p()?),
            "expm" => Ok(Self::exp_minus()),
            other => Err(Error::Config(format!("unknown N-function family `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The harness key; identical to [`NFunction::name`] for built-in families.
    pub fn key(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn has_analytic_complement(&self) -> bool {
        self.analytic_complement.is_some()
    }

    /// `Φ(|u|)` without input checks; the hot path for modular integrals.
    #[inline]
    pub fn phi(&self, u: f64) -> f64 {
        (self.phi)(u.abs())
    }

    /// Right derivative `Φ'(|u|)`.
    #[inline]
    pub fn phi_prime(&self, u: f64) -> f64 {
        (self.phi_prime)(u.abs())
    }

    /// Drops the closed-form complement so that [`NFunction::complement`]
    /// falls back to the Legendre transform.
    pub fn without_analytic_complement(mut self) -> Self {
        self.analytic_complement = None;
        self
    }

    /// `Ψ(v) = sup_{u ≥ 0} (uv - Φ(u))`.
    pub fn complement(&self, v: f64) -> Result<f64> {
        self.complement_with(v, &ComplementOptions::default())
    }

    pub fn complement_with(&self, v: f64, opts: &ComplementOptions) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Domain(format!("complement argument must be finite, got {v}")));
        }
        let v = v.abs();
        if v == 0.0 {
            return Ok(0.0);
        }
        if let Some(psi) = &self.analytic_complement {
            return Ok(psi(v));
        }
        let (lo, hi) = self.invert_derivative(v, opts)?;
        let gain = |u: f64| u * v - (self.phi)(u);
        let best = gain(lo).max(gain(hi)).max(gain(0.5 * (lo + hi)));
        Ok(best.max(0.0))
    }

    /// Bracket `[lo, hi]` with `Φ'(lo) < v ≤ Φ'(hi)`, shrunk by bisection.
    fn invert_derivative(&self, v: f64, opts: &ComplementOptions) -> Result<(f64, f64)> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while (self.phi_prime)(hi) < v {
            lo = hi;
            hi *= 2.0;
            if hi > opts.bracket_cap {
                return Err(Error::UnboundedComplement { v, cap: opts.bracket_cap });
            }
        }
        for _ in 0..400 {
            if hi - lo <= opts.rel_tol * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if (self.phi_prime)(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo, hi))
    }

    /// The complementary function as an N-function in its own right.
    ///
    /// Its derivative is the generalized inverse of `Φ'`, and its own
    /// complement is `Φ`.
    pub fn complementary(&self) -> NFunction {
        let base = self.clone();
        let base_prime = self.clone();
        let opts = ComplementOptions::default();
        NFunction {
            name: format!("complement({})", self.name),
            family: Family::Custom,
            phi: Arc::new(move |v| base.complement(v).unwrap_or(f64::INFINITY)),
            phi_prime: Arc::new(move |v| {
                if v == 0.0 {
                    return 0.0;
                }
                match base_prime.invert_derivative(v, &opts) {
                    Ok((lo, hi)) => 0.5 * (lo + hi),
                    Err(_) => f64::INFINITY,
                }
            }),
            analytic_complement: Some(self.phi.clone()),
            params: self.params.clone(),
        }
    }

    /// Samples the N-function axioms: normalization, monotonicity,
    /// convexity, growth at 0⁺ and ∞, and derivative consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidNFunction { name: self.name.clone(), reason };
        let phi = |u: f64| (self.phi)(u);
        let dphi = |u: f64| (self.phi_prime)(u);

        if phi(0.0) != 0.0 {
            return Err(bad(format!("phi(0) = {} != 0", phi(0.0))));
        }
        let grid: Vec<f64> = (0..=120).map(|i| 10f64.powf(-6.0 + 0.1 * i as f64)).collect();
        for w in grid.windows(2) {
            let (a, b) = (phi(w[0]), phi(w[1]));
            if a.is_finite() && b.is_finite() && b < a {
                return Err(bad(format!("phi decreases between {} and {}", w[0], w[1])));
            }
            let (da, db) = (dphi(w[0]), dphi(w[1]));
            if da.is_finite() && db.is_finite() && db < da {
                return Err(bad(format!("phi' decreases between {} and {}", w[0], w[1])));
            }
        }
        for &u in &grid {
            let h = 0.1 * u;
            let (l, c, r) = (phi(u - h), phi(u), phi(u + h));
            if !(l.is_finite() && c.is_finite() && r.is_finite()) {
                continue;
            }
            if l - 2.0 * c + r < -1e-12 * c.max(1.0) {
                return Err(bad(format!("convexity violated near u = {u}")));
            }
        }
        let unit = phi(1.0);
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(bad(format!("phi(1) = {unit} is not positive and finite")));
        }
        let small = phi(1e-6) / 1e-6;
        if small > 1e-2 * unit {
            return Err(bad(format!("phi(u)/u = {small} at u = 1e-6 does not vanish")));
        }
        let large = phi(1e6) / 1e6;
        if large < 1e2 * unit {
            return Err(bad(format!("phi(u)/u = {large} at u = 1e6 does not blow up")));
        }
        for &u in grid.iter().filter(|&&u| (1e-3..=1e3).contains(&u)) {
            let h = 1e-3 * u;
            let step = phi(u + h) - phi(u);
            if !step.is_finite() {
                continue;
            }
            let slack = 1e-12 * (1.0 + phi(u + h));
            if (step - dphi(u) * h).abs() > dphi(u + h) * h + slack {
                return Err(bad(format!("phi' inconsistent with phi near u = {u}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplementOptions {
    pub rel_tol: f64,
    /// Largest `u` the derivative bracket may grow to.
    pub bracket_cap: f64,
}

impl Default for ComplementOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, bracket_cap: 1e100 }
    }
}

/// `Φ(|u|)`, rejecting non-finite input.
pub fn phi_eval(nf: &NFunction, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::Domain(format!("phi argument must be finite, got {u}")));
    }
    Ok(nf.phi(u))
}

pub fn complementary_eval(nf: &NFunction, v: f64) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::Domain(format!("complement argument must be >= 0, got {v}")));
    }
    nf.complement(v)
}

/// Log-spaced sample grid for the Δ₂ scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta2Grid {
    pub u_max: f64,
    pub points: usize,
    /// Verdict fails when the ratio at `u_max` exceeds the ratio at `u0` by
    /// more than this factor.
    pub growth_factor: f64,
}

impl Delta2Grid {
    pub fn up_to(u_max: f64) -> Self {
        Self { u_max, points: 200, growth_factor: 10.0 }
    }

    pub fn default_for(u0: f64) -> Self {
        Self::up_to(1e4 * u0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta2Report {
    pub satisfied: bool,
    pub c_estimate: f64,
    pub u0: f64,
    pub samples: usize,
    pub ratio_at_u0: f64,
    pub ratio_at_u_max: f64,
}

/// Scans `Φ(2u)/Φ(u)` on `[u0, u_max]`. A numeric verdict, not a proof.
pub fn check_delta2(nf: &NFunction, u0: f64, grid: &Delta2Grid) -> Result<Delta2Report> {
    if !(u0 > 0.0 && u0.is_finite()) {
        return Err(Error::Parameter(format!("u0 must be positive, got {u0}")));
    }
    if grid.points < 100 || !(grid.u_max > u0) {
        return Err(Error::Parameter(
            "delta2 grid needs at least 100 points and u_max > u0".into(),
        ));
    }
    let span = (grid.u_max / u0).ln();
    let last = grid.points - 1;
    let mut ratios = Vec::with_capacity(grid.points);
    for i in 0..grid.points {
        let u = if i == 0 {
            u0
        } else if i == last {
            grid.u_max
        } else {
            u0 * (span * i as f64 / last as f64).exp()
        };
        let base = nf.phi(u);
        if base == 0.0 {
            return Err(Error::DegenerateNFunction { u });
        }
        let ratio = if base.is_finite() { nf.phi(2.0 * u) / base } else { f64::INFINITY };
        ratios.push(if ratio.is_nan() { f64::INFINITY } else { ratio });
    }
    let c_estimate = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (first, final_) = (ratios[0], ratios[last]);
    let satisfied = final_.is_finite() && final_ <= grid.growth_factor * first;
    Ok(Delta2Report {
        satisfied,
        c_estimate,
        u0,
        samples: grid.points,
        ratio_at_u0: first,
        ratio_at_u_max: final_,
    })
}

/// Built-in N-functions: `u^p` for p ∈ {1.5, 2, 3}, `u² ln(1+u)` and the
/// non-Δ₂ specimen `e^u - u - 1`.
pub fn registry() -> Vec<NFunction> {
    let mut out: Vec<NFunction> = [1.5, 2.0, 3.0]
        .into_iter()
        .map(|p| NFunction::power(p).expect("valid exponent"))
        .collect();
    out.push(NFunction::power_log(2.0).expect("valid exponent"));
    out.push(NFunction::exp_minus());
    out
}

/// The registry entries that satisfy the Δ₂-condition.
pub fn delta2_registry() -> Vec<NFunction> {
    registry().into_iter().filter(|nf| nf.family() != Family::ExpMinus).collect()
}
