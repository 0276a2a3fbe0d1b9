use serde::Serialize;

use super::ExperimentConfig;
use crate::domain::Point;
use crate::error::{Error, Result};
use crate::operators::ApplyResult;
use crate::orlicz::{orlicz_norm, power_norm_closed_form, NormResult};
use crate::nfunctions::Family;
use crate::smoothness::{full_modulus2, ModulusResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub phi: String,
    pub field: String,
    #[serde(flatten)]
    pub norm: NormResult,
    /// `p (p-1)^{(1-p)/p} ‖f‖_p` when `Φ(u) = u^p`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusReport {
    pub phi: String,
    pub field: String,
    pub results: Vec<ModulusResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplyRow {
    pub x: Point,
    pub field_value: f64,
    #[serde(flatten)]
    pub result: ApplyResult,
}

fn first_nfunction(cfg: &ExperimentConfig) -> Result<crate::NFunction> {
    cfg.nfunctions()?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("no N-function given".into()))
}

/// `‖f‖_Φ` for the configured field and the first configured N-function.
pub fn run_norm(cfg: &ExperimentConfig) -> Result<NormReport> {
    cfg.quadrature.validate()?;
    let nf = first_nfunction(cfg)?;
    let f = cfg.field()?;
    let norm = orlicz_norm(&nf, &f, &cfg.quadrature)?;
    let closed_form = match nf.family() {
        Family::Power { p } => Some(power_norm_closed_form(p, &f, &cfg.quadrature)?),
        _ => None,
    };
    Ok(NormReport { phi: nf.key().to_string(), field: cfg.field_key.clone(), norm, closed_form })
}

/// `Ω²(f, r)_Φ` for every configured radius.
pub fn run_modulus(cfg: &ExperimentConfig) -> Result<ModulusReport> {
    cfg.quadrature.validate()?;
    let nf = first_nfunction(cfg)?;
    let f = cfg.field()?;
    let results = cfg
        .r_list
        .iter()
        .map(|&r| full_modulus2(&nf, &f, r, &cfg.quadrature, cfg.n_directions, cfg.t_samples))
        .collect::<Result<_>>()?;
    Ok(ModulusReport { phi: nf.key().to_string(), field: cfg.field_key.clone(), results })
}

/// The operator at the first configured `n` and `s`, applied at every
/// configured point.
pub fn run_apply(cfg: &ExperimentConfig) -> Result<Vec<ApplyRow>> {
    let n = *cfg.n_list.first().ok_or_else(|| Error::Config("n list is empty".into()))?;
    let s = cfg.shifts()[0];
    let f = cfg.field()?;
    let op = cfg.operator_spec(n, s)?.bind(&f)?;
    cfg.points
        .iter()
        .map(|&x| Ok(ApplyRow { x, field_value: f.eval(x), result: op.apply(x)? }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_of_one_is_sqrt_two() {
        let cfg = ExperimentConfig::parse("field = const\nphi = power:p=2").unwrap();
        let r = run_norm(&cfg).unwrap();
        assert!((r.norm.value - 2f64.sqrt()).abs() < 1e-6);
        assert!((r.closed_form.unwrap() - 2f64.sqrt()).abs() < 1e-9);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("value").is_some() && json.get("alpha_star").is_some());
    }

    #[test]
    fn affine_cube_norm_matches_closed_form() {
        let cfg = ExperimentConfig::parse("field = affine\nphi = power:p=3").unwrap();
        let r = run_norm(&cfg).unwrap();
        assert!((r.norm.value - r.closed_form.unwrap()).abs() < 1e-6 * r.norm.value);
    }

    #[test]
    fn modulus_of_constant_vanishes() {
        let cfg = ExperimentConfig::parse("field = const\nr = 0.1\ndirections = 4\nt_samples = 4").unwrap();
        let r = run_modulus(&cfg).unwrap();
        assert_eq!(r.results[0].value, 0.0);
    }

    #[test]
    fn apply_reports_each_point() {
        let cfg = ExperimentConfig::parse("operator = stancu\nn = 10\ns = 2\nfield = const").unwrap();
        let rows = run_apply(&cfg).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| (r.result.value - 1.0).abs() < 1e-12));
    }
}
