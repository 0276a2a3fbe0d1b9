use statrs::function::factorial::ln_factorial;

use super::{ApplyResult, OperatorKind, OperatorSpec};
use crate::domain::{cell_mean, stancu_cell, GaussLegendre, Point, ScalarField};
use crate::error::{Error, Result};

/// `p_{n,k,l}(x) = n!/(k! l! (n-k-l)!) x1^k x2^l (1-x1-x2)^{n-k-l}`.
pub fn bernstein_basis(n: u32, k: u32, l: u32, x: Point) -> Result<f64> {
    if k as u64 + l as u64 > n as u64 {
        return Err(Error::Domain(format!("bernstein index out of range: k={k} l={l} n={n}")));
    }
    Ok(basis_log_space(n, k, l, x, ln_factorial))
}

fn basis_log_space(n: u32, k: u32, l: u32, x: Point, lnfact: impl Fn(u64) -> f64) -> f64 {
    let rest = n - k - l;
    let mut ln = lnfact(n as u64) - lnfact(k as u64) - lnfact(l as u64) - lnfact(rest as u64);
    for (e, base) in [(k, x.x1), (l, x.x2), (rest, x.gap())] {
        if e == 0 {
            continue;
        }
        if base <= 0.0 {
            return 0.0;
        }
        ln += e as f64 * base.ln();
    }
    ln.exp()
}

/// The seven-branch weight table of `K_{n,s}`.
///
/// With `A = (1-x1-x2) p_{n-s,k,l}`, `B = x1 p_{n-s,k-s,l}` and
/// `C = x2 p_{n-s,k,l-s}`, the branch is picked by whether `k+l <= n-s`,
/// `k >= s` and `l >= s`. The one combination the table leaves out
/// (`k+l > n-s`, `k < s`, `l < s`) has weight 0.
fn branch_weight(n: u32, k: u32, l: u32, s: u32, x: Point, basis: impl Fn(u32, u32) -> f64) -> f64 {
    let lower = k + l <= n - s;
    let (ks, ls) = (k >= s, l >= s);
    let a = || x.gap() * basis(k, l);
    let b = || x.x1 * basis(k - s, l);
    let c = || x.x2 * basis(k, l - s);
    match (lower, ks, ls) {
        (true, false, false) => a(),
        (true, true, false) => a() + b(),
        (true, false, true) => a() + c(),
        (true, true, true) => a() + b() + c(),
        (false, true, false) => b(),
        (false, false, true) => c(),
        (false, true, true) => b() + c(),
        (false, false, false) => 0.0,
    }
}

fn check_shift(n: u32, s: u32) -> Result<()> {
    if n == 0 || 2 * s >= n {
        return Err(Error::Parameter(format!("stancu needs n >= 1 and s < n/2, got n={n} s={s}")));
    }
    Ok(())
}

/// `b_{n,k,l,s}(x)`.
pub fn stancu_weight(n: u32, k: u32, l: u32, s: u32, x: Point) -> Result<f64> {
    check_shift(n, s)?;
    if k as u64 + l as u64 > n as u64 {
        return Err(Error::Domain(format!("stancu index out of range: k={k} l={l} n={n}")));
    }
    let m = n - s;
    Ok(branch_weight(n, k, l, s, x, |i, j| {
        if i + j <= m {
            basis_log_space(m, i, j, x, ln_factorial)
        } else {
            0.0
        }
    }))
}

/// `K_{n,s}(f; x)`.
pub fn stancu_apply(f: &ScalarField, spec: &OperatorSpec, x: Point) -> Result<ApplyResult> {
    if spec.kind != OperatorKind::Stancu {
        return Err(Error::Parameter("stancu_apply needs a stancu operator spec".into()));
    }
    spec.validate()?;
    let gl = GaussLegendre::new(spec.cell_quadrature.order);
    StancuTables::new(f, spec, &gl)?.apply(spec, x)
}

/// Cell means of a fixed field over every `I_{n,k,l}`, plus log-factorials
/// of the reduced degree `n - s`.
pub(super) struct StancuTables {
    /// Row-major over `k`, each row holding `l = 0..=n-k`.
    means: Vec<f64>,
    row_start: Vec<usize>,
    ln_fact: Vec<f64>,
}

impl StancuTables {
    pub(super) fn new(f: &ScalarField, spec: &OperatorSpec, gl: &GaussLegendre) -> Result<Self> {
        let n = spec.n;
        let mut means = Vec::with_capacity(((n + 1) * (n + 2) / 2) as usize);
        let mut row_start = Vec::with_capacity(n as usize + 1);
        for k in 0..=n {
            row_start.push(means.len());
            for l in 0..=(n - k) {
                means.push(cell_mean(&|y| f.eval(y), &stancu_cell(n, k, l), gl)?);
            }
        }
        let ln_fact = (0..=n as u64).map(ln_factorial).collect();
        Ok(Self { means, row_start, ln_fact })
    }

    fn mean(&self, k: u32, l: u32) -> f64 {
        self.means[self.row_start[k as usize] + l as usize]
    }

    pub(super) fn apply(&self, spec: &OperatorSpec, x: Point) -> Result<ApplyResult> {
        let (n, s) = (spec.n, spec.s);
        if !(x.in_simplex() && x.x1.is_finite() && x.x2.is_finite()) {
            return Err(Error::Domain(format!(
                "stancu operator needs x in the simplex, got ({}, {})",
                x.x1, x.x2
            )));
        }
        let m = n - s;
        // p_{n-s,i,j}(x) for every i + j <= n - s
        let mut basis = Vec::with_capacity(((m + 1) * (m + 2) / 2) as usize);
        let mut basis_row = Vec::with_capacity(m as usize + 1);
        for i in 0..=m {
            basis_row.push(basis.len());
            for j in 0..=(m - i) {
                basis.push(basis_log_space(m, i, j, x, |v| self.ln_fact[v as usize]));
            }
        }
        let lookup = |i: u32, j: u32| {
            if i + j <= m {
                basis[basis_row[i as usize] + j as usize]
            } else {
                0.0
            }
        };
        let mut value = 0.0;
        let mut mass = 0.0;
        let mut terms = 0;
        for k in 0..=n {
            for l in 0..=(n - k) {
                let w = branch_weight(n, k, l, s, x, lookup);
                if w != 0.0 {
                    value += w * self.mean(k, l);
                    mass += w;
                    terms += 1;
                }
            }
        }
        Ok(ApplyResult { value, weight_mass: mass, terms_used: terms, truncated: false })
    }
}
