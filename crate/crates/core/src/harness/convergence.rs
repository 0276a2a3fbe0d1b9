use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{fit_rate, CheckRow, ConvergenceRecord, ExperimentConfig, RateFit};
use crate::domain::{SmoothnessHint, Tabulation};
use crate::error::{Error, Result};
use crate::nfunctions::{check_delta2, Delta2Grid, Family, NFunction};
use crate::orlicz::{lp_norm_tabulated, orlicz_norm, orlicz_norm_tabulated, power_norm_factor};
use crate::smoothness::full_modulus2;

/// Error norms at or below `NOISE_FLOOR · ‖f‖_Φ` count as zero when fitting.
const NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub kind: String,
    pub s: u32,
    pub phi: String,
    pub field: String,
    pub fit: Option<RateFit>,
    /// Why the fit was skipped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub max_ratio: f64,
    pub max_ratio_first_two: f64,
}

/// The Orlicz error norm against `p (p-1)^{(1-p)/p}` times the `L^p` one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerIdentityCheck {
    pub n: u32,
    pub s: u32,
    pub p: f64,
    pub orlicz: f64,
    pub scaled_lp: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub field_hint: SmoothnessHint,
    pub records: Vec<ConvergenceRecord>,
    pub fits: Vec<FitSummary>,
    pub power_identity_checks: Vec<PowerIdentityCheck>,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    /// The pass/fail suite of a convergence run.
    ///
    /// Every record must be unflagged and every ratio stable; smooth and
    /// affine fields must fit a slope in `[-1.25, -0.75]`, constants must
    /// be reproduced, and Lipschitz errors must not grow with `n`.
    pub fn checks(&self) -> Vec<CheckRow> {
        let mut rows = Vec::new();
        for r in &self.records {
            if let Some(flag) = &r.flag {
                rows.push(CheckRow::failed("record", group_label(r, r.n), flag));
            }
        }
        for g in &self.fits {
            let detail = format!("{} s={} phi={} field={}", g.kind, g.s, g.phi, g.field);
            let errors = self.group(g);
            match self.field_hint {
                SmoothnessHint::Constant => {
                    let worst = errors.iter().map(|r| r.error_norm).fold(0.0, f64::max);
                    rows.push(CheckRow::at_most("constant_error", detail.clone(), worst, 1e-9));
                }
                SmoothnessHint::Smooth | SmoothnessHint::Affine => match &g.fit {
                    Some(fit) => {
                        let off = (fit.slope + 1.0).abs();
                        let mut row = CheckRow::at_most("slope_window", detail.clone(), off, 0.25);
                        row.detail = format!("{detail} slope={:.4}", fit.slope);
                        rows.push(row);
                    }
                    None => rows.push(CheckRow::failed(
                        "slope_window",
                        detail.clone(),
                        g.skipped.clone().unwrap_or_default(),
                    )),
                },
                SmoothnessHint::Lipschitz => {
                    let worst = errors
                        .windows(2)
                        .map(|w| w[1].error_norm - w[0].error_norm)
                        .fold(f64::NEG_INFINITY, f64::max);
                    rows.push(CheckRow::at_most("monotone_error", detail.clone(), worst, 1e-9));
                }
                SmoothnessHint::Rough => {}
            }
            // constant fields leave only round-off in the ratio
            if self.field_hint != SmoothnessHint::Constant && g.max_ratio_first_two > 0.0 {
                rows.push(CheckRow::at_most(
                    "ratio_stability",
                    detail,
                    g.max_ratio,
                    1.5 * g.max_ratio_first_two,
                ));
            }
        }
        for c in &self.power_identity_checks {
            let detail = format!("n={} s={} p={}", c.n, c.s, c.p);
            rows.push(CheckRow::at_most("power_identity", detail, c.rel_diff, 1e-6));
        }
        rows
    }

    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|r| r.passed)
    }

    fn group(&self, g: &FitSummary) -> Vec<&ConvergenceRecord> {
        self.records
            .iter()
            .filter(|r| r.s == g.s && r.phi == g.phi && r.kind == g.kind)
            .collect()
    }
}

fn group_label(r: &ConvergenceRecord, n: u32) -> String {
    format!("{} n={n} s={} phi={} field={}", r.kind, r.s, r.phi, r.field)
}

/// Records for one `(n, s)`: one per N-function, sharing a single
/// tabulation of `K f - f`.
struct Cell {
    n: u32,
    s: u32,
}

/// Runs the convergence experiment for every `(n, s, Φ)` of the config.
///
/// `‖K f - f‖_Φ` is computed from `K f - f` sampled at the simplex
/// quadrature nodes; the bound is `‖f‖_Φ / n + Ω²(f, r(n))_Φ`.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if cfg.n_list.len() < 4 {
        return Err(Error::Config(format!("convergence runs need at least 4 values of n, got {}", cfg.n_list.len())));
    }
    let f = cfg.field()?;
    let nfs = cfg.nfunctions()?;
    let kind = cfg.operator.kind.as_str().to_string();

    let mut warnings = Vec::new();
    for nf in &nfs {
        let report = check_delta2(nf, 1.0, &Delta2Grid::default_for(1.0))?;
        if !report.satisfied {
            warnings.push(format!(
                "N-function `{}` fails the Δ₂ scan (Φ(2u)/Φ(u) grows from {:.3e} to {:.3e}); \
                 the convergence theorems do not apply, running anyway",
                nf.key(),
                report.ratio_at_u0,
                report.ratio_at_u_max
            ));
        }
    }

    let f_norms: Vec<f64> = nfs
        .iter()
        .map(|nf| Ok(orlicz_norm(nf, &f, &cfg.quadrature)?.value))
        .collect::<Result<_>>()?;

    // The modulus does not depend on the operator or the shift.
    let moduli: BTreeMap<(u32, usize), f64> = cfg
        .n_list
        .par_iter()
        .flat_map_iter(|&n| (0..nfs.len()).map(move |i| (n, i)))
        .map(|(n, i)| {
            let m = full_modulus2(&nfs[i], &f, cfg.r_rule.radius(n), &cfg.quadrature, cfg.n_directions, cfg.t_samples)?;
            Ok(((n, i), m.value))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<Cell> = cfg
        .shifts()
        .into_iter()
        .flat_map(|s| cfg.n_list.iter().map(move |&n| Cell { n, s }))
        .collect();

    let results: Vec<(Vec<ConvergenceRecord>, Vec<PowerIdentityCheck>)> = cells
        .par_iter()
        .map(|cell| {
            let start = Instant::now();
            let outcome = (|| -> Result<(Vec<f64>, Vec<PowerIdentityCheck>)> {
                let op = cfg.operator_spec(cell.n, cell.s)?.bind(&f)?;
                let residual = op.residual();
                let tab = Tabulation::new(&residual, cfg.quadrature)?;
                let mut errors = Vec::with_capacity(nfs.len());
                let mut identities = Vec::new();
                for nf in &nfs {
                    let e = orlicz_norm_tabulated(nf, &tab)?.value;
                    if let Some(p) = power_exponent(nf) {
                        let scaled_lp = power_norm_factor(p) * lp_norm_tabulated(p, &tab)?;
                        let rel_diff = if e == 0.0 && scaled_lp == 0.0 {
                            0.0
                        } else {
                            (e - scaled_lp).abs() / e.abs().max(scaled_lp.abs())
                        };
                        identities.push(PowerIdentityCheck { n: cell.n, s: cell.s, p, orlicz: e, scaled_lp, rel_diff });
                    }
                    errors.push(e);
                }
                Ok((errors, identities))
            })();
            let elapsed = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            let (errors, identities, flag) = match outcome {
                Ok((e, r)) => (e, r, None),
                Err(e) => (vec![f64::NAN; nfs.len()], Vec::new(), Some(e.to_string())),
            };
            let records = nfs
                .iter()
                .enumerate()
                .map(|(i, nf)| {
                    let modulus = moduli[&(cell.n, i)];
                    let bound = f_norms[i] / cell.n as f64 + modulus;
                    let ratio = if bound > 0.0 {
                        errors[i] / bound
                    } else if errors[i] == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    ConvergenceRecord {
                        kind: kind.clone(),
                        n: cell.n,
                        s: cell.s,
                        phi: nf.key().to_string(),
                        field: cfg.field_key.clone(),
                        error_norm: errors[i],
                        f_norm: f_norms[i],
                        modulus,
                        bound,
                        ratio,
                        wall_time_ms: elapsed,
                        flag: flag.clone(),
                    }
                })
                .collect();
            (records, identities)
        })
        .collect();

    let mut records = Vec::new();
    let mut power_identity_checks = Vec::new();
    for (r, c) in results {
        records.extend(r);
        power_identity_checks.extend(c);
    }
    // order: shift, N-function (config order), n
    let phi_rank = |key: &str| nfs.iter().position(|nf| nf.key() == key).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (r.s, phi_rank(&r.phi), r.n));

    let mut fits = Vec::new();
    for s in cfg.shifts() {
        for (i, nf) in nfs.iter().enumerate() {
            let group: Vec<&ConvergenceRecord> =
                records.iter().filter(|r| r.s == s && r.phi == nf.key()).collect();
            let floor = NOISE_FLOOR * f_norms[i];
            let pairs: Vec<(f64, f64)> = group
                .iter()
                .filter(|r| !r.is_flagged())
                .map(|r| (r.n as f64, if r.error_norm <= floor { 0.0 } else { r.error_norm }))
                .collect();
            let (fit, skipped) = match fit_rate(&pairs) {
                Ok(fit) => (Some(fit), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let ratio_max = |rs: &[&ConvergenceRecord]| rs.iter().map(|r| r.ratio).fold(0.0, f64::max);
            fits.push(FitSummary {
                kind: kind.clone(),
                s,
                phi: nf.key().to_string(),
                field: cfg.field_key.clone(),
                fit,
                skipped,
                max_ratio: ratio_max(&group),
                max_ratio_first_two: ratio_max(&group[..group.len().min(2)]),
            });
        }
    }

    Ok(ConvergenceReport { field_hint: f.hint(), records, fits, power_identity_checks, warnings })
}

fn power_exponent(nf: &NFunction) -> Option<f64> {
    match nf.family() {
        Family::Power { p } => Some(p),
        _ => None,
    }
}
