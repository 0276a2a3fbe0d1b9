use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::domain::{Point, QuadratureSpec, ScalarField};
use crate::error::{Error, Result};
use crate::nfunctions::NFunction;
use crate::operators::{interior_grid, OperatorKind, OperatorSpec};
use crate::smoothness::{DEFAULT_DIRECTIONS, DEFAULT_T_SAMPLES};

/// `r(n) = scale · n^(-exponent)`; the default is `r = √(1/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusRule {
    pub scale: f64,
    pub exponent: f64,
}

impl Default for RadiusRule {
    fn default() -> Self {
        Self { scale: 1.0, exponent: 0.5 }
    }
}

impl RadiusRule {
    pub fn radius(&self, n: u32) -> f64 {
        self.scale * (n as f64).powf(-self.exponent)
    }
}

/// Everything an experiment run needs.
///
/// The text form is one `key = value` pair per line; `#` starts a comment.
///
/// | key | meaning | default |
/// |---|---|---|
/// | `operator` | `mkz` or `stancu` | `mkz` |
/// | `n` | comma list, strictly increasing | `8,16,32,64,128` |
/// | `s` | comma list of stancu shifts | `0` |
/// | `phi` | comma list of N-function keys | `power:p=2` |
/// | `field` | built-in field key | `quadratic` |
/// | `r_scale`, `r_exponent` | `r(n) = r_scale · n^-r_exponent` | `1`, `0.5` |
/// | `r` | radii for `modulus` | `0.1` |
/// | `quad_order`, `quad_levels`, `quad_rel_tol` | simplex quadrature | `6`, `2`, `1e-9` |
/// | `cell_order` | Gauss order on operator cells | `5` |
/// | `tail_eps`, `max_degree`, `degree_scale` | mkz truncation | `1e-10`, `1000`, `50` |
/// | `directions`, `t_samples` | modulus grids | `32`, `16` |
/// | `points` | `x1,x2` pairs separated by `;` for `apply` | interior grid |
/// | `seed` | rng seed | `20240607` |
/// | `timing` | fill `wall_time_ms` | `false` |
/// | `out` | output path | none |
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub operator: OperatorSpec,
    pub nfunction_keys: Vec<String>,
    pub field_key: String,
    pub n_list: Vec<u32>,
    pub s_list: Vec<u32>,
    pub r_rule: RadiusRule,
    pub r_list: Vec<f64>,
    pub quadrature: QuadratureSpec,
    pub n_directions: usize,
    pub t_samples: usize,
    pub points: Vec<Point>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    /// Off by default so that reruns reproduce CSV files byte for byte.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            operator: OperatorSpec::mkz(8),
            nfunction_keys: vec!["power:p=2".into()],
            field_key: "quadratic".into(),
            n_list: vec![8, 16, 32, 64, 128],
            s_list: vec![0],
            r_rule: RadiusRule::default(),
            r_list: vec![0.1],
            quadrature: QuadratureSpec { order: 6, refinement_levels: 2, rel_tol: 1e-9 },
            n_directions: DEFAULT_DIRECTIONS,
            t_samples: DEFAULT_T_SAMPLES,
            points: interior_grid(),
            output_path: None,
            seed: 20240607,
            timing: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_num(key, s)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn parse_points(v: &str) -> Result<Vec<Point>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let xs: Vec<f64> = parse_list("points", pair)?;
            match xs.as_slice() {
                [a, b] => Ok(Point::new(*a, *b)),
                _ => Err(Error::Config(format!("point `{pair}` needs two coordinates"))),
            }
        })
        .collect()
}

impl ExperimentConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Sets one key. Command-line flags go through here too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let op = &mut self.operator;
        match key {
            "operator" => op.kind = OperatorKind::parse(value)?,
            "n" => self.n_list = parse_list(key, value)?,
            "s" => self.s_list = parse_list(key, value)?,
            "phi" => {
                self.nfunction_keys =
                    value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
            "field" => self.field_key = value.to_string(),
            "r_scale" => self.r_rule.scale = parse_num(key, value)?,
            "r_exponent" => self.r_rule.exponent = parse_num(key, value)?,
            "r" => self.r_list = parse_list(key, value)?,
            "quad_order" => self.quadrature.order = parse_num(key, value)?,
            "quad_levels" => self.quadrature.refinement_levels = parse_num(key, value)?,
            "quad_rel_tol" => self.quadrature.rel_tol = parse_num(key, value)?,
            "cell_order" => op.cell_quadrature.order = parse_num(key, value)?,
            "tail_eps" => op.truncation.tail_eps = parse_num(key, value)?,
            "max_degree" => op.truncation.max_degree = parse_num(key, value)?,
            "degree_scale" => op.truncation.degree_scale = parse_num(key, value)?,
            "directions" => self.n_directions = parse_num(key, value)?,
            "t_samples" => self.t_samples = parse_num(key, value)?,
            "points" => self.points = parse_points(value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            "out" => self.output_path = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Config("n list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("n list must be strictly increasing: {:?}", self.n_list)));
        }
        if self.n_list[0] == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.operator.kind == OperatorKind::Stancu {
            if self.s_list.is_empty() {
                return Err(Error::Config("s list is empty".into()));
            }
            for &n in &self.n_list {
                for &s in &self.s_list {
                    if 2 * s >= n {
                        return Err(Error::Config(format!("shift s={s} violates s < n/2 for n={n}")));
                    }
                }
            }
        }
        if self.nfunction_keys.is_empty() {
            return Err(Error::Config("no N-function given".into()));
        }
        for key in &self.nfunction_keys {
            NFunction::from_key(key)?;
        }
        ScalarField::builtin(&self.field_key)?;
        if !(self.r_rule.scale > 0.0 && self.r_rule.exponent.is_finite()) {
            return Err(Error::Config("radius rule needs r_scale > 0".into()));
        }
        if self.r_list.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("radii must be finite and >= 0".into()));
        }
        if self.n_directions < 4 || self.t_samples == 0 {
            return Err(Error::Config("need directions >= 4 and t_samples >= 1".into()));
        }
        self.quadrature.validate()?;
        self.operator_spec(self.n_list[0], self.shifts()[0])?.validate()
    }

    /// The shifts to run: `s_list` for stancu, `[0]` for mkz.
    pub fn shifts(&self) -> Vec<u32> {
        match self.operator.kind {
            OperatorKind::Stancu => self.s_list.clone(),
            OperatorKind::Mkz => vec![0],
        }
    }

    pub fn operator_spec(&self, n: u32, s: u32) -> Result<OperatorSpec> {
        let spec = OperatorSpec { n, s, ..self.operator };
        spec.validate()?;
        Ok(spec)
    }

    pub fn nfunctions(&self) -> Result<Vec<NFunction>> {
        self.nfunction_keys.iter().map(|k| NFunction::from_key(k)).collect()
    }

    pub fn field(&self) -> Result<ScalarField> {
        ScalarField::builtin(&self.field_key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.r_rule.radius(16), 0.25);
        assert_eq!(cfg.points.len(), 10);
    }

    #[test]
    fn parses_flat_text() {
        let cfg = ExperimentConfig::parse(
            "# comment\noperator = stancu\nn = 8, 16,32\ns=0,3\nphi = power:p=3, powerlog:p=2\n\
             field = lipschitz  # trailing\nquad_levels = 1\ntail_eps = 1e-9\npoints = 0.1,0.2; 0.3,0.3\n\
             timing = yes\nout = /tmp/x.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.operator.kind, OperatorKind::Stancu);
        assert_eq!(cfg.n_list, vec![8, 16, 32]);
        assert_eq!(cfg.s_list, vec![0, 3]);
        assert_eq!(cfg.nfunction_keys, vec!["power:p=3", "powerlog:p=2"]);
        assert_eq!(cfg.field_key, "lipschitz");
        assert_eq!(cfg.quadrature.refinement_levels, 1);
        assert_eq!(cfg.operator.truncation.tail_eps, 1e-9);
        assert_eq!(cfg.points, vec![Point::new(0.1, 0.2), Point::new(0.3, 0.3)]);
        assert!(cfg.timing);
        assert_eq!(cfg.output_path.as_deref(), Some(Path::new("/tmp/x.csv")));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("n = 8, x").is_err());
        assert!(ExperimentConfig::parse("just a line").is_err());
        assert!(ExperimentConfig::parse("points = 0.1").is_err());
        let cfg = ExperimentConfig::parse("n = 16, 8").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("operator = stancu\nn = 8, 16\ns = 4").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("phi = nope").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("field = nope").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("tail_eps = 0.1").unwrap();
        assert!(cfg.validate().is_err());
    }
}
