use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane. Points of the simplex satisfy `x1, x2 >= 0`,
/// `x1 + x2 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn in_simplex(self) -> bool {
        self.x1 >= 0.0 && self.x2 >= 0.0 && self.x1 + self.x2 <= 1.0
    }

    /// `1 - x1 - x2`, the third barycentric coordinate.
    pub fn gap(self) -> f64 {
        1.0 - self.x1 - self.x2
    }

    pub fn offset(self, h: Point, t: f64) -> Point {
        Point::new(self.x1 + t * h.x1, self.x2 + t * h.x2)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x1, x2): (f64, f64)) -> Self {
        Point::new(x1, x2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessHint {
    Constant,
    Affine,
    Smooth,
    Lipschitz,
    Rough,
}

type Core = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// A real function on the simplex together with its reflect-and-periodize
/// extension to the whole plane.
#[derive(Clone)]
pub struct ScalarField {
    core: Core,
    label: String,
    hint: SmoothnessHint,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("hint", &self.hint)
            .finish()
    }
}

/// Reduces a coordinate into `[0, 1)`.
#[inline]
fn wrap_unit(y: f64) -> f64 {
    let r = y.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl ScalarField {
    pub fn new(
        label: impl Into<String>,
        hint: SmoothnessHint,
        core: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { core: Arc::new(core), label: label.into(), hint }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const:c={c}"), SmoothnessHint::Constant, move |_| c)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn hint(&self) -> SmoothnessHint {
        self.hint
    }

    /// Evaluates the core function. Only meaningful on the simplex.
    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        (self.core)(x)
    }

    /// Evaluates the extension to the plane: reduce modulo 1 into the unit
    /// square, then reflect `y -> 1 - y` when the reduced point lies above
    /// the seam `y1 + y2 = 1`. The seam itself uses the core value.
    #[inline]
    pub fn extend_eval(&self, y: Point) -> f64 {
        let r1 = wrap_unit(y.x1);
        let r2 = wrap_unit(y.x2);
        if r1 + r2 <= 1.0 {
            (self.core)(Point::new(r1, r2))
        } else {
            (self.core)(Point::new(1.0 - r1, 1.0 - r2))
        }
    }

    /// `c · f`
    pub fn scaled(&self, c: f64) -> ScalarField {
        let core = self.core.clone();
        let hint = if c == 0.0 { SmoothnessHint::Constant } else { self.hint };
        ScalarField::new(format!("{c}*({})", self.label), hint, move |x| c * core(x))
    }

    /// `f + g`
    pub fn plus(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.core.clone(), other.core.clone());
        let hint = rougher(self.hint, other.hint);
        ScalarField::new(format!("({})+({})", self.label, other.label), hint, move |x| {
            a(x) + b(x)
        })
    }

    /// `f - g`
    pub fn minus(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.core.clone(), other.core.clone());
        let hint = rougher(self.hint, other.hint);
        ScalarField::new(format!("({})-({})", self.label, other.label), hint, move |x| {
            a(x) - b(x)
        })
    }

    /// Parses a built-in field key: `const[:c=<v>]`, `affine`, `quadratic`,
    /// `lipschitz`, `oscillatory`.
    pub fn builtin(key: &str) -> Result<ScalarField> {
        let (name, rest) = key.split_once(':').unwrap_or((key, ""));
        match name.trim() {
            "const" | "constant" => {
                let mut c = 1.0;
                for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match item.split_once('=') {
                        Some(("c", v)) => {
                            c = v.trim().parse().map_err(|_| {
                                Error::Config(format!("bad constant `{v}` in `{key}`"))
                            })?
                        }
                        _ => return Err(Error::Config(format!("bad parameter `{item}` in `{key}`"))),
                    }
                }
                let mut f = ScalarField::constant(c);
                if c == 1.0 {
                    f.label = "const".into();
                }
                Ok(f)
            }
            "affine" => Ok(ScalarField::new("affine", SmoothnessHint::Affine, |x| x.x1 + x.x2)),
            "quadratic" => Ok(ScalarField::new("quadratic", SmoothnessHint::Smooth, |x| {
                x.x1 * x.x1 + x.x2 * x.x2
            })),
            "lipschitz" => Ok(ScalarField::new("lipschitz", SmoothnessHint::Lipschitz, |x| {
                (x.x1 - x.x2).abs()
            })),
            "oscillatory" => Ok(ScalarField::new("oscillatory", SmoothnessHint::Smooth, |x| {
                (2.0 * std::f64::consts::PI * (x.x1 + x.x2)).sin()
            })),
            other => Err(Error::Config(format!("unknown field `{other}`"))),
        }
    }
}

fn rougher(a: SmoothnessHint, b: SmoothnessHint) -> SmoothnessHint {
    fn rank(h: SmoothnessHint) -> u8 {
        match h {
            SmoothnessHint::Constant => 0,
            SmoothnessHint::Affine => 1,
            SmoothnessHint::Smooth => 2,
            SmoothnessHint::Lipschitz => 3,
            SmoothnessHint::Rough => 4,
        }
    }
    if rank(a) >= rank(b) {
        a
    } else {
        b
    }
}

pub const BUILTIN_FIELD_KEYS: [&str; 5] = ["const", "affine", "quadratic", "lipschitz", "oscillatory"];

/// The five built-in test fields.
pub fn builtin_fields() -> Vec<ScalarField> {
    BUILTIN_FIELD_KEYS
        .iter()
        .map(|k| ScalarField::builtin(k).expect("built-in key"))
        .collect()
}

/// Extension of `f` at `y`.
pub fn extend_eval(f: &ScalarField, y: Point) -> f64 {
    f.extend_eval(y)
}
