//! Power-law fits `value ≈ c · t^p` by least squares in log-log coordinates.

use serde::{Deserialize, Serialize};

pub const MIN_SAMPLES: usize = 8;
/// Values below this are treated as round-off and left out of the fit.
pub const FLOOR: f64 = 1e-14;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("fit window [{0}, {1}] must satisfy 0 < t_lo < t_hi")]
    Window(f64, f64),
    #[error("{found} samples in the fit window, need at least {MIN_SAMPLES}")]
    Insufficient { found: usize },
    #[error("value {value} at t = {t} is not positive")]
    Nonpositive { t: f64, value: f64 },
    #[error("{floored} of {total} samples are below {FLOOR:e}")]
    Floored { floored: usize, total: usize },
    #[error("all samples share one time; slope undefined")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub stderr: f64,
    /// `log c` of the fitted law.
    pub intercept: f64,
    pub used: usize,
    pub floored: usize,
}

pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, FitError> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(FitError::Window(lo, hi));
    }
    let inside: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= lo && *t <= hi).collect();
    if inside.len() < MIN_SAMPLES {
        return Err(FitError::Insufficient { found: inside.len() });
    }
    if let Some(&(t, value)) = inside.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(FitError::Nonpositive { t, value });
    }
    let pts: Vec<(f64, f64)> = inside
        .iter()
        .filter(|(_, v)| *v >= FLOOR)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let floored = inside.len() - pts.len();
    if 2 * floored > inside.len() {
        return Err(FitError::Floored {
            floored,
            total: inside.len(),
        });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (k - 2.0) / sxx).sqrt();
    Ok(DecayFit {
        exponent: slope,
        stderr,
        intercept,
        used: pts.len(),
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(c: f64, p: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let t = 20.0 + 80.0 * k as f64 / (n - 1) as f64;
                (t, c * t.powf(p))
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let f = fit_decay(&law(3.0, -1.0, 40), (20.0, 100.0)).unwrap();
        assert!((f.exponent + 1.0).abs() < 1e-12);
        assert!(f.stderr <= 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn constant_series() {
        let f = fit_decay(&law(0.5, 0.0, 20), (20.0, 100.0)).unwrap();
        assert!(f.exponent.abs() < 1e-13);
    }

    #[test]
    fn window_errors() {
        let s = law(1.0, -1.0, 40);
        assert_eq!(fit_decay(&s, (50.0, 40.0)), Err(FitError::Window(50.0, 40.0)));
        assert!(matches!(fit_decay(&s, (20.0, 25.0)), Err(FitError::Insufficient { .. })));
        let mut neg = s.clone();
        neg[5].1 = -1.0;
        assert!(matches!(fit_decay(&neg, (20.0, 100.0)), Err(FitError::Nonpositive { .. })));
    }

    #[test]
    fn floored_values() {
        let mut s = law(1.0, -1.0, 20);
        for p in s.iter_mut().take(5) {
            p.1 = 1e-16;
        }
        let f = fit_decay(&s, (20.0, 100.0)).unwrap();
        assert_eq!(f.floored, 5);
        assert!((f.exponent + 1.0).abs() < 1e-12);
        for p in s.iter_mut().take(11) {
            p.1 = 1e-16;
        }
        assert!(matches!(fit_decay(&s, (20.0, 100.0)), Err(FitError::Floored { .. })));
    }
}
