//! Ordinary least squares for a straight line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r_squared: f64,
    /// `y_i − (slope·x_i + intercept)`.
    pub residuals: Vec<f64>,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(LineFit { slope, intercept, r_squared, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = least_squares(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn noisy_line_has_partial_r2() {
        let f = least_squares(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(f.r_squared > 0.0 && f.r_squared < 1.0);
        assert!((f.residuals.iter().sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(least_squares(&[1.0], &[1.0]).is_err());
        assert!(least_squares(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(least_squares(&[1.0, 2.0], &[f64::NAN, 2.0]).is_err());
    }
}
