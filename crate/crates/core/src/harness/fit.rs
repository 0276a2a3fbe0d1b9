use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through `(ln n, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
    pub pairs_used: usize,
}

/// Fits `ln error = intercept + slope · ln n`. Pairs with a nonpositive
/// error are dropped; fewer than three remaining is an error.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(n, e)| *n > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(n, e)| (n.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitUnavailable(format!(
            "{} usable pairs, need at least 3",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitUnavailable("all n values coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(RateFit { slope, intercept, max_residual, pairs_used: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        [8.0, 16.0, 32.0, 64.0].into_iter().map(|n| (n, f(n))).collect()
    }

    #[test]
    fn exact_power_laws() {
        assert!((fit_rate(&pairs(|n| 1.0 / n)).unwrap().slope + 1.0).abs() < 1e-12);
        assert!(fit_rate(&pairs(|_| 5.0)).unwrap().slope.abs() < 1e-12);
        let half = fit_rate(&pairs(|n| n.powf(-0.5))).unwrap();
        assert!((half.slope + 0.5).abs() < 1e-12);
        assert!(half.max_residual < 1e-12);
        assert!((fit_rate(&pairs(|n| 3.0 / n)).unwrap().intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_errors_are_dropped() {
        let mut p = pairs(|n| 1.0 / n);
        p.push((128.0, 0.0));
        let fit = fit_rate(&p).unwrap();
        assert_eq!(fit.pairs_used, 4);
        p[0].1 = -1.0;
        p[1].1 = 0.0;
        assert!(matches!(fit_rate(&p), Err(Error::FitUnavailable(_))));
    }
}
