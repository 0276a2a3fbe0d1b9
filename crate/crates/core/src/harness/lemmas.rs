use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CheckRow, ExperimentConfig};
use crate::domain::{builtin_fields, mkz_cell_measure, Point, ScalarField, Tabulation};
use crate::error::Result;
use crate::nfunctions::delta2_registry;
use crate::operators::{
    bernstein_basis, mkz_coefficient, moment, stancu_weight, MomentAxis, MomentOrder, OperatorKind,
    OperatorSpec,
};
use crate::orlicz::{orlicz_norm, orlicz_norm_tabulated};

/// Degrees compared against the `n = 8` baseline in the moment-decay check.
pub const MOMENT_DECAY_NS: [u32; 5] = [16, 32, 64, 128, 256];
const MOMENT_BASELINE_N: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub operator: OperatorKind,
    pub rows: Vec<CheckRow>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

fn pairs(cfg: &ExperimentConfig) -> Vec<(u32, u32)> {
    cfg.n_list
        .iter()
        .flat_map(|&n| cfg.shifts().into_iter().map(move |s| (n, s)))
        .collect()
}

fn label(kind: OperatorKind, n: u32, s: u32) -> String {
    match kind {
        OperatorKind::Mkz => format!("mkz n={n}"),
        OperatorKind::Stancu => format!("stancu n={n} s={s}"),
    }
}

/// Weight sums on the configured points.
pub fn partition_rows(cfg: &ExperimentConfig) -> Vec<CheckRow> {
    let kind = cfg.operator.kind;
    let mut rows = Vec::new();
    for (n, s) in pairs(cfg) {
        let detail = label(kind, n, s);
        match kind {
            OperatorKind::Mkz => rows.push(CheckRow::capture("partition_of_unity", detail, || {
                let spec = cfg.operator_spec(n, s)?;
                let one = ScalarField::constant(1.0);
                let mut worst = 0.0f64;
                for &x in &cfg.points {
                    let r = spec.apply(&one, x)?;
                    worst = worst.max(1.0 - r.weight_mass).max(r.weight_mass - 1.0 - 1e-12);
                }
                Ok((worst, spec.truncation.tail_eps))
            })),
            OperatorKind::Stancu => {
                rows.push(CheckRow::capture("partition_of_unity", detail.clone(), || {
                    let mut worst = 0.0f64;
                    for &x in &cfg.points {
                        let mut total = 0.0;
                        for k in 0..=n {
                            for l in 0..=(n - k) {
                                total += stancu_weight(n, k, l, s, x)?;
                            }
                        }
                        worst = worst.max((total - 1.0).abs());
                    }
                    Ok((worst, 1e-12))
                }));
                rows.push(CheckRow::capture("bernstein_partition", format!("n={n}"), || {
                    let mut worst = 0.0f64;
                    for &x in &cfg.points {
                        let mut total = 0.0;
                        for k in 0..=n {
                            for l in 0..=(n - k) {
                                total += bernstein_basis(n, k, l, x)?;
                            }
                        }
                        worst = worst.max((total - 1.0).abs());
                    }
                    Ok((worst, 1e-12))
                }));
            }
        }
    }
    rows
}

/// `max |c_{n,k1,k2} · mes - 1|` over 500 seeded random triples.
pub fn cell_identity_row(seed: u64) -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.gen_range(1..=200u32);
        let (k1, k2) = (rng.gen_range(0..=500u64), rng.gen_range(0..=500u64));
        worst = worst.max((mkz_coefficient(n, k1, k2) * mkz_cell_measure(n, k1, k2) - 1.0).abs());
    }
    CheckRow::at_most("cell_identity", "500 random (n, k1, k2)", worst, 1e-14)
}

/// `max_x |K(1; x) - 1|`.
pub fn constant_reproduction_rows(cfg: &ExperimentConfig) -> Vec<CheckRow> {
    let kind = cfg.operator.kind;
    let limit = match kind {
        OperatorKind::Mkz => 1e-8,
        OperatorKind::Stancu => 1e-10,
    };
    pairs(cfg)
        .into_iter()
        .map(|(n, s)| {
            CheckRow::capture("constant_reproduction", label(kind, n, s), || {
                let op = cfg.operator_spec(n, s)?.bind(&ScalarField::constant(1.0))?;
                let mut worst = 0.0f64;
                for &x in &cfg.points {
                    worst = worst.max((op.apply(x)?.value - 1.0).abs());
                }
                Ok((worst, limit))
            })
        })
        .collect()
}

/// `‖K f‖_Φ / ‖f‖_Φ` over built-in fields × Δ₂ N-functions; the limit is
/// 2 (mkz) or 12 (stancu) plus `1e-6 / ‖f‖_Φ`.
pub fn norm_bound_rows(cfg: &ExperimentConfig) -> Vec<CheckRow> {
    let kind = cfg.operator.kind;
    let (name, constant) = match kind {
        OperatorKind::Mkz => ("mkz_norm_bound", 2.0),
        OperatorKind::Stancu => ("stancu_norm_bound", 12.0),
    };
    let nfs = delta2_registry();
    let mut rows = Vec::new();
    for f in builtin_fields() {
        let f_norms: Vec<Result<f64>> =
            nfs.iter().map(|nf| Ok(orlicz_norm(nf, &f, &cfg.quadrature)?.value)).collect();
        for (n, s) in pairs(cfg) {
            let bound = cfg.operator_spec(n, s).and_then(|spec| spec.bind(&f));
            let image = bound.as_ref().map(|op| op.image());
            let tab = match &image {
                Ok(img) => Tabulation::new(img, cfg.quadrature),
                Err(e) => Err((*e).clone()),
            };
            for (nf, f_norm) in nfs.iter().zip(&f_norms) {
                let detail = format!("{} field={} phi={}", label(kind, n, s), f.label(), nf.key());
                rows.push(CheckRow::capture(name, detail, || {
                    let tab = tab.as_ref().map_err(Clone::clone)?;
                    let f_norm = f_norm.clone()?;
                    let k_norm = orlicz_norm_tabulated(nf, tab)?.value;
                    Ok((k_norm / f_norm, constant + 1e-6 / f_norm))
                }));
            }
        }
    }
    rows
}

fn sup_second_moment(spec: &OperatorSpec, points: &[Point], axis: MomentAxis) -> Result<f64> {
    let mut sup = 0.0f64;
    for &x in points {
        sup = sup.max(moment(spec, x, axis, MomentOrder::Second)?);
    }
    Ok(sup)
}

/// `n · sup_x K((u_i - x_i)²; x)` against `1.25 · B_i`, where `B_i` is the
/// same quantity at `n = 8`.
pub fn moment_decay_rows(cfg: &ExperimentConfig) -> Vec<CheckRow> {
    let kind = cfg.operator.kind;
    let spec_at = |n: u32, s: u32| -> Result<OperatorSpec> {
        let spec = OperatorSpec { n, s, ..cfg.operator };
        spec.validate()?;
        Ok(spec)
    };
    let mut rows = Vec::new();
    for s in cfg.shifts() {
        for axis in [MomentAxis::X1, MomentAxis::X2] {
            let baseline = spec_at(MOMENT_BASELINE_N, s)
                .and_then(|spec| sup_second_moment(&spec, &cfg.points, axis))
                .map(|sup| MOMENT_BASELINE_N as f64 * sup);
            for n in MOMENT_DECAY_NS {
                let detail = format!("{} axis={axis:?}", label(kind, n, s));
                rows.push(CheckRow::capture("moment_decay", detail, || {
                    let b = baseline.clone()?;
                    let sup = sup_second_moment(&spec_at(n, s)?, &cfg.points, axis)?;
                    Ok((n as f64 * sup / b, 1.25))
                }));
            }
        }
    }
    rows
}

/// `K(|u1-x1||u2-x2|) <= ½(K((u1-x1)²) + K((u2-x2)²))` and the weaker
/// `<= ½ K((u1-x1)²) + K((u2-x2)²)` at 50 seeded random `(spec, x)`.
pub fn mixed_moment_rows(cfg: &ExperimentConfig) -> Vec<CheckRow> {
    let kind = cfg.operator.kind;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cases = Vec::with_capacity(50);
    for _ in 0..50 {
        let n = rng.gen_range(3..=32u32);
        let s = match kind {
            OperatorKind::Mkz => 0,
            OperatorKind::Stancu => rng.gen_range(0..=(n - 1) / 2),
        };
        let x = loop {
            let x = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
            if x.gap() > 0.05 {
                break x;
            }
        };
        cases.push((OperatorSpec { n, s, ..cfg.operator }, x));
    }
    let mut sym = 0.0f64;
    let mut asym = 0.0f64;
    for (spec, x) in &cases {
        let eval = || -> Result<(f64, f64, f64)> {
            Ok((
                moment(spec, *x, MomentAxis::X1, MomentOrder::Second)?,
                moment(spec, *x, MomentAxis::X2, MomentOrder::Second)?,
                moment(spec, *x, MomentAxis::X1, MomentOrder::AbsMixed)?,
            ))
        };
        match eval() {
            Ok((a, b, m)) => {
                sym = sym.max(m - 0.5 * (a + b));
                asym = asym.max(m - (0.5 * a + b));
            }
            Err(e) => {
                let detail = format!("{} x=({}, {})", label(kind, spec.n, spec.s), x.x1, x.x2);
                return vec![CheckRow::failed("mixed_moment", detail, e)];
            }
        }
    }
    let detail = format!("{kind:?} 50 random (n, s, x)").to_lowercase();
    vec![
        CheckRow::at_most("mixed_moment", detail.clone(), sym, 1e-10),
        CheckRow::at_most("mixed_moment_asymmetric", detail, asym, 1e-10),
    ]
}

/// Runs every lemma check for the configured operator. Failures inside a
/// check become failed rows; only an invalid config is an error.
pub fn run_verify_lemmas(cfg: &ExperimentConfig) -> Result<LemmaReport> {
    cfg.validate()?;
    let mut rows = partition_rows(cfg);
    rows.push(cell_identity_row(cfg.seed));
    rows.extend(constant_reproduction_rows(cfg));
    rows.extend(norm_bound_rows(cfg));
    rows.extend(moment_decay_rows(cfg));
    rows.extend(mixed_moment_rows(cfg));
    Ok(LemmaReport { operator: cfg.operator.kind, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::QuadratureSpec;

    fn small(kind: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::parse(&format!("operator = {kind}\nn = 8\ns = 0,3")).unwrap();
        cfg.quadrature = QuadratureSpec { order: 5, refinement_levels: 1, rel_tol: 1e-9 };
        cfg
    }

    #[test]
    fn stancu_suite_passes() {
        let report = run_verify_lemmas(&small("stancu")).unwrap();
        for row in &report.rows {
            assert!(row.passed, "{}", row.line());
        }
        let names: Vec<&str> = report.rows.iter().map(|r| r.check.as_str()).collect();
        for want in ["partition_of_unity", "cell_identity", "constant_reproduction", "stancu_norm_bound", "moment_decay"] {
            assert!(names.contains(&want), "missing {want}");
        }
    }

    #[test]
    fn mkz_rows_pass_at_small_n() {
        let cfg = small("mkz");
        for row in partition_rows(&cfg)
            .into_iter()
            .chain(constant_reproduction_rows(&cfg))
            .chain(mixed_moment_rows(&cfg))
            .chain([cell_identity_row(1)])
        {
            assert!(row.passed, "{}", row.line());
        }
    }

    #[test]
    fn errors_become_failed_rows() {
        let mut cfg = small("stancu");
        cfg.s_list = vec![5];
        cfg.n_list = vec![12];
        // s = 5 is fine at n = 12 but not at the n = 8 baseline
        let rows = moment_decay_rows(&cfg);
        assert!(rows.iter().all(|r| !r.passed && r.error.is_some()));
        assert!(rows[0].line().starts_with("FAIL moment_decay"));
    }
}
