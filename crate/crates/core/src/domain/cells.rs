use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x1_lo, x1_hi] × [x2_lo, x2_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectCell {
    pub x1_lo: f64,
    pub x1_hi: f64,
    pub x2_lo: f64,
    pub x2_hi: f64,
}

impl RectCell {
    pub fn new(x1_lo: f64, x1_hi: f64, x2_lo: f64, x2_hi: f64) -> Result<Self> {
        let ok = [x1_lo, x1_hi, x2_lo, x2_hi].iter().all(|v| v.is_finite())
            && x1_lo <= x1_hi
            && x2_lo <= x2_hi;
        if !ok {
            return Err(Error::Domain(format!(
                "invalid cell [{x1_lo}, {x1_hi}] x [{x2_lo}, {x2_hi}]"
            )));
        }
        Ok(Self { x1_lo, x1_hi, x2_lo, x2_hi })
    }

    /// The period square `D = [0,1]²`.
    pub const fn unit() -> Self {
        Self { x1_lo: 0.0, x1_hi: 1.0, x2_lo: 0.0, x2_hi: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1_hi - self.x1_lo
    }

    pub fn height(&self) -> f64 {
        self.x2_hi - self.x2_lo
    }

    pub fn measure(&self) -> f64 {
        self.width() * self.height()
    }
}

/// `[k1/(n+k1+k2), (k1+1)/(n+k1+k2+1)] × [k2/(n+k1+k2), (k2+1)/(n+k1+k2+1)]`
pub fn mkz_cell(n: u32, k1: u64, k2: u64) -> RectCell {
    debug_assert!(n >= 1);
    let m = n as f64 + k1 as f64 + k2 as f64;
    RectCell {
        x1_lo: k1 as f64 / m,
        x1_hi: (k1 as f64 + 1.0) / (m + 1.0),
        x2_lo: k2 as f64 / m,
        x2_hi: (k2 as f64 + 1.0) / (m + 1.0),
    }
}

/// Closed-form measure of [`mkz_cell`]:
/// `(n+k1)(n+k2) / ((n+k1+k2)² (n+k1+k2+1)²)`.
///
/// Differencing the endpoints loses relative precision once the indices
/// grow; this form does not.
pub fn mkz_cell_measure(n: u32, k1: u64, k2: u64) -> f64 {
    let n = n as f64;
    let m = n + k1 as f64 + k2 as f64;
    ((n + k1 as f64) * (n + k2 as f64)) / (m * m * (m + 1.0) * (m + 1.0))
}

/// `[k/(n+2), (k+1)/(n+2)] × [l/(n+2), (l+1)/(n+2)]`
pub fn stancu_cell(n: u32, k: u32, l: u32) -> RectCell {
    let d = n as f64 + 2.0;
    RectCell {
        x1_lo: k as f64 / d,
        x1_hi: (k as f64 + 1.0) / d,
        x2_lo: l as f64 / d,
        x2_hi: (l as f64 + 1.0) / d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mkz_cell_examples() {
        let c = mkz_cell(1, 0, 0);
        assert_eq!(c, RectCell { x1_lo: 0.0, x1_hi: 0.5, x2_lo: 0.0, x2_hi: 0.5 });
        assert_eq!(c.measure(), 0.25);
        assert_eq!(mkz_cell_measure(1, 0, 0), 0.25);

        let c = mkz_cell(2, 1, 0);
        assert!((c.x1_lo - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(c.x1_hi, 0.5);
        assert_eq!((c.x2_lo, c.x2_hi), (0.0, 0.25));
        assert!((c.width() - 1.0 / 6.0).abs() < 1e-16);
        assert!((c.measure() - 1.0 / 24.0).abs() < 1e-16);
        assert!((mkz_cell_measure(2, 1, 0) - 1.0 / 24.0).abs() < 1e-17);
    }

    #[test]
    fn endpoint_and_closed_form_measures_agree() {
        for n in [1u32, 3, 10, 40] {
            for k1 in 0..30u64 {
                for k2 in 0..30u64 {
                    let a = mkz_cell(n, k1, k2).measure();
                    let b = mkz_cell_measure(n, k1, k2);
                    assert!((a - b).abs() <= 1e-12 * b, "n={n} k=({k1},{k2})");
                }
            }
        }
    }

    #[test]
    fn mkz_cells_stay_inside_simplex() {
        for n in 1..6u32 {
            for k1 in 0..50u64 {
                for k2 in 0..50u64 {
                    let c = mkz_cell(n, k1, k2);
                    assert!(c.x1_hi + c.x2_hi <= 1.0 + 1e-15);
                }
            }
        }
    }

    #[test]
    fn stancu_cell_examples() {
        let c = stancu_cell(2, 0, 0);
        assert_eq!(c, RectCell { x1_lo: 0.0, x1_hi: 0.25, x2_lo: 0.0, x2_hi: 0.25 });
        assert_eq!(c.measure(), 1.0 / 16.0);
        let c = stancu_cell(2, 3, 0);
        assert_eq!((c.x1_lo, c.x1_hi, c.x2_lo, c.x2_hi), (0.75, 1.0, 0.0, 0.25));
        let n = 9;
        let s = 3;
        for k in 0..5 {
            for l in 0..5 {
                let base = stancu_cell(n, k, l).measure();
                assert!((base - 1.0 / 121.0).abs() < 1e-15);
                assert!((stancu_cell(n, k + s, l).measure() - base).abs() < 1e-15);
                assert!((stancu_cell(n, k, l + s).measure() - base).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn invalid_cells_rejected() {
        assert!(RectCell::new(0.5, 0.2, 0.0, 1.0).is_err());
        assert!(RectCell::new(0.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(RectCell::new(0.0, 0.0, 0.3, 0.3).is_ok());
        assert_eq!(RectCell::unit().measure(), 1.0);
    }
}
