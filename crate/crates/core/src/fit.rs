//! Log-log power-law fits for scaling series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of points and decades of z₀ a fit must span.
pub const MIN_POINTS: usize = 4;
pub const MIN_DECADES: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub slope_stderr: f64,
}

impl ScalingSeries {
    pub fn fit(points: Vec<(f64, f64)>) -> Result<Self> {
        let (slope, slope_stderr) = fit_exponent(&points)?;
        Ok(ScalingSeries { points, slope, slope_stderr })
    }

    /// CSV with a `#` header line carrying the fit.
    pub fn to_csv(&self, value_name: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["z0", value_name]).map_err(|e| Error::Io(e.to_string()))?;
        for (z, v) in &self.points {
            w.write_record([format!("{z:e}"), format!("{v:e}")]).map_err(|e| Error::Io(e.to_string()))?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
            .map_err(|e| Error::Io(e.to_string()))?;
        Ok(format!("# slope={:e} slope_stderr={:e}\n{body}", self.slope, self.slope_stderr))
    }
}

/// Least-squares slope of ln(value) against ln(z₀), with its standard error.
pub fn fit_exponent(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    if series.len() < MIN_POINTS {
        return Err(Error::invalid(format!("a scaling fit needs at least {MIN_POINTS} points, got {}", series.len())));
    }
    if series.iter().any(|&(z, v)| !(z > 0.0 && v > 0.0 && z.is_finite() && v.is_finite())) {
        return Err(Error::invalid("scaling fit needs positive finite z0 and values"));
    }
    let (zmin, zmax) = series.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &(z, _)| (a.min(z), b.max(z)));
    let decades = (zmax / zmin).log10();
    if decades < MIN_DECADES - 1e-9 {
        return Err(Error::invalid(format!("z0 spans {decades:.2} decades, need {MIN_DECADES}")));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid() -> Vec<f64> {
        (0..8).map(|k| 1e-3 * 10f64.powf(k as f64 * 0.25)).collect()
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = grid().into_iter().map(|z| (z, z.powi(-3))).collect();
        let (s, e) = fit_exponent(&pts).unwrap();
        assert!((s + 3.0).abs() < 1e-12 && e < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<_> = grid()
            .into_iter()
            .map(|z| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                (z, z.powi(-3) * (1.0 + 0.01 * eps))
            })
            .collect();
        let (s, _) = fit_exponent(&pts).unwrap();
        assert!((s + 3.0).abs() < 0.05);
    }

    #[test]
    fn preconditions() {
        let pts: Vec<_> = grid().into_iter().take(3).map(|z| (z, z)).collect();
        assert!(fit_exponent(&pts).is_err());
        let narrow: Vec<_> = (0..5).map(|k| (1.0 + k as f64 * 0.1, 1.0)).collect();
        assert!(fit_exponent(&narrow).is_err());
        assert!(fit_exponent(&[(1e-3, 1.0), (1e-2, -1.0), (0.1, 1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn csv_has_header_comment() {
        let pts: Vec<_> = grid().into_iter().map(|z| (z, z * z)).collect();
        let csv = ScalingSeries::fit(pts).unwrap().to_csv("E").unwrap();
        assert!(csv.starts_with("# slope=") && csv.lines().nth(1) == Some("z0,E"));
    }
}
