use statrs::distribution::{ContinuousCDF, Gamma, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceCdf {
    Gaussian { mean: f64, std: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl ReferenceCdf {
    fn cdf_fn(&self) -> Result<Box<dyn Fn(f64) -> f64>> {
        match *self {
            ReferenceCdf::Gaussian { mean, std } => {
                let d = Normal::new(mean, std)
                    .map_err(|e| Error::invalid(format!("gaussian reference: {e}")))?;
                Ok(Box::new(move |x| d.cdf(x)))
            }
            ReferenceCdf::Gamma { shape, scale } => {
                let d = Gamma::new(shape, 1.0 / scale)
                    .map_err(|e| Error::invalid(format!("gamma reference: {e}")))?;
                Ok(Box::new(move |x| d.cdf(x)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub pass: bool,
}

/// Asymptotic one-sample critical coefficient c(α) = √(−ln(α/2)/2);
/// c(0.05) ≈ 1.358.
pub fn ks_critical_value(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// D = sup |F_emp − F_ref| over the sample.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// One-sample Kolmogorov–Smirnov test; passes when D < c(α)/√n.
pub fn ks_test(sample: &[f64], reference: ReferenceCdf, alpha: f64) -> Result<KsResult> {
    if sample.len() < 5 {
        return Err(Error::invalid(format!(
            "KS test needs at least 5 samples, got {}",
            sample.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("significance level {alpha} outside (0, 1)")));
    }
    let cdf = reference.cdf_fn()?;
    let statistic = ks_statistic(sample, cdf);
    let critical = ks_critical_value(alpha) / (sample.len() as f64).sqrt();
    Ok(KsResult {
        statistic,
        pass: statistic < critical,
    })
}
