//! Log-log slope fitting.

use crate::error::{check_dim, Error, Result};

/// OLS slope of `log(error)` on `log(T)` and its standard error.
pub fn fit_rate(horizons: &[usize], errors: &[f64]) -> Result<(f64, f64)> {
    fit_rate_log(horizons, errors, 0)
}

/// As [`fit_rate`] after dividing each error by `(log T)^log_power`, so a rate
/// `T^-theta (log T)^p` fits to slope `-theta`.
pub fn fit_rate_log(horizons: &[usize], errors: &[f64], log_power: i32) -> Result<(f64, f64)> {
    check_dim(horizons.len(), errors.len())?;
    if horizons.len() < 3 {
        return Err(Error::Range(format!(
            "slope fitting needs at least 3 horizons, got {}",
            horizons.len()
        )));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Domain(format!(
            "errors must be positive and finite, got {e}"
        )));
    }
    if log_power != 0 && horizons.iter().any(|t| *t < 2) {
        return Err(Error::Domain("log correction needs T >= 2".into()));
    }
    let xs: Vec<f64> = horizons.iter().map(|t| (*t as f64).ln()).collect();
    let ys: Vec<f64> = errors
        .iter()
        .zip(&xs)
        .map(|(e, x)| e.ln() - log_power as f64 * x.ln())
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("horizons must not all be equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let hs = [256, 512, 1024, 2048];
        let es: Vec<f64> = hs.iter().map(|t| (*t as f64).powf(-2.0 / 3.0)).collect();
        let (slope, se) = fit_rate(&hs, &es).unwrap();
        assert!((slope + 2.0 / 3.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn constant_errors() {
        let (slope, _) = fit_rate(&[2, 4, 8], &[0.3, 0.3, 0.3]).unwrap();
        assert!(slope.abs() < 1e-15);
    }

    #[test]
    fn log_factor_is_removed() {
        let hs = [256, 512, 1024, 2048, 4096];
        let es: Vec<f64> = hs
            .iter()
            .map(|t| (*t as f64).powf(-0.5) * (*t as f64).ln())
            .collect();
        let (slope, _) = fit_rate_log(&hs, &es, 1).unwrap();
        assert!((slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_positive_error_is_domain_error() {
        assert!(matches!(
            fit_rate(&[2, 4, 8], &[1.0, 0.0, 1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_rate(&[2, 4], &[1.0, 1.0]),
            Err(Error::Range(_))
        ));
    }
}
