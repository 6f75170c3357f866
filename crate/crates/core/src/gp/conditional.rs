use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{kernel_matrix, GpKernelParams, SiteLayout};
use crate::error::{Error, Result};

/// Distribution of the unobserved sites given the observed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGaussian {
    pub site_ids: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ConditionalGaussian {
    pub fn dim(&self) -> usize {
        self.site_ids.len()
    }
}

/// Precomputed kriging operator for a fixed observed/unobserved split.
///
/// Holds Σ₁₂Σ₂₂⁻¹ and Σ′ so that repeated conditioning over many timesteps
/// costs one matrix-vector product each.
#[derive(Debug, Clone)]
pub struct Conditioner {
    observed_ids: Vec<String>,
    unobserved_ids: Vec<String>,
    weights: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl Conditioner {
    pub fn new(
        params: &GpKernelParams,
        layout: &SiteLayout,
        observed_ids: &[String],
    ) -> Result<Self> {
        params.validate()?;
        if observed_ids.is_empty() {
            return Err(Error::invalid("at least one observed site is required"));
        }
        let mut obs_idx = Vec::with_capacity(observed_ids.len());
        for id in observed_ids {
            let i = layout
                .index_of(id)
                .ok_or_else(|| Error::invalid(format!("unknown observed site {id}")))?;
            if obs_idx.contains(&i) {
                return Err(Error::invalid(format!("observed site {id} listed twice")));
            }
            obs_idx.push(i);
        }
        let un_idx: Vec<usize> = (0..layout.len()).filter(|i| !obs_idx.contains(i)).collect();
        if un_idx.is_empty() {
            return Err(Error::invalid(
                "observed sites must be a strict subset of the layout",
            ));
        }

        let k = kernel_matrix(params, layout.coords());
        let s22 = k.select_rows(&obs_idx).select_columns(&obs_idx);
        let s21 = k.select_rows(&obs_idx).select_columns(&un_idx);
        let s11 = k.select_rows(&un_idx).select_columns(&un_idx);

        let chol = s22.cholesky().ok_or_else(|| {
            Error::numeric(format!(
                "Σ22 over observed sites [{}] is not positive definite",
                observed_ids.join(", ")
            ))
        })?;
        // Σ22⁻¹Σ21, so weights = (Σ22⁻¹Σ21)ᵀ = Σ12Σ22⁻¹
        let solved = chol.solve(&s21);
        let weights = solved.transpose();
        let mut cov = s11 - s21.transpose() * &solved;
        symmetrize(&mut cov);

        Ok(Self {
            observed_ids: observed_ids.to_vec(),
            unobserved_ids: un_idx.iter().map(|&i| layout.site_ids()[i].clone()).collect(),
            weights,
            cov,
        })
    }

    pub fn observed_ids(&self) -> &[String] {
        &self.observed_ids
    }

    pub fn unobserved_ids(&self) -> &[String] {
        &self.unobserved_ids
    }

    /// Σ₁₂Σ₂₂⁻¹, one row per unobserved site.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// μ′ = Σ₁₂Σ₂₂⁻¹ X₂ for zero-mean (debiased) observations.
    pub fn mean(&self, observed_values: &[f64]) -> Result<DVector<f64>> {
        if observed_values.len() != self.observed_ids.len() {
            return Err(Error::invalid(format!(
                "{} observed values for {} observed sites",
                observed_values.len(),
                self.observed_ids.len()
            )));
        }
        if observed_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observed values must be finite"));
        }
        Ok(&self.weights * DVector::from_column_slice(observed_values))
    }

    pub fn condition(&self, observed_values: &[f64]) -> Result<ConditionalGaussian> {
        Ok(ConditionalGaussian {
            site_ids: self.unobserved_ids.clone(),
            mean: self.mean(observed_values)?,
            cov: self.cov.clone(),
        })
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Gaussian conditional of the unobserved sites given debiased observations
/// at `observed_ids`.
pub fn condition(
    params: &GpKernelParams,
    layout: &SiteLayout,
    observed_ids: &[String],
    observed_values: &[f64],
) -> Result<ConditionalGaussian> {
    Conditioner::new(params, layout, observed_ids)?.condition(observed_values)
}

/// Square-root factor F with F Fᵀ ≈ Σ. Falls back to an eigen decomposition
/// with eigenvalues below 1e-12·trace clipped to zero.
fn factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = cov.clone().cholesky() {
        return ch.l();
    }
    let eig = cov.clone().symmetric_eigen();
    let floor = 1e-12 * cov.trace().abs();
    let sqrt_vals = eig
        .eigenvalues
        .map(|l| if l > floor { l.sqrt() } else { 0.0 });
    eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

/// `n` draws (rows) from the conditional Gaussian; deterministic in `seed`.
pub fn sample(cond: &ConditionalGaussian, n: usize, seed: u64) -> DMatrix<f64> {
    let d = cond.dim();
    let f = factor(&cond.cov);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, d);
    let mut z = DVector::zeros(d);
    for r in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let draw = &cond.mean + &f * &z;
        out.row_mut(r).copy_from(&draw.transpose());
    }
    out
}

/// Draws of κ: conditional samples plus the per-site means removed by
/// debiasing, truncated below at zero.
pub fn sample_kappa(
    cond: &ConditionalGaussian,
    site_means: &[f64],
    n: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if site_means.len() != cond.dim() {
        return Err(Error::invalid(format!(
            "{} site means for {} unobserved sites",
            site_means.len(),
            cond.dim()
        )));
    }
    let mut draws = sample(cond, n, seed);
    for (c, m) in site_means.iter().enumerate() {
        for v in draws.column_mut(c).iter_mut() {
            *v = (*v + m).max(0.0);
        }
    }
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{build_cov, oahu_like_layout};

    const REFERENCE: GpKernelParams = GpKernelParams {
        alpha: 0.0108,
        beta: 0.0001,
        theta_x: 61.6522,
        theta_y: 74.081,
    };

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn distant_observation_leaves_prior() {
        let layout = SiteLayout::new(ids(&["A", "B"]), vec![(0.0, 0.0), (100.0, 0.0)]).unwrap();
        let c = condition(&REFERENCE, &layout, &ids(&["B"]), &[0.3]).unwrap();
        assert_eq!(c.mean[0], 0.0);
        assert!((c.cov[(0, 0)] - (REFERENCE.alpha + REFERENCE.beta)).abs() < 1e-18);
    }

    #[test]
    fn coincident_site_copies_observation() {
        let p = GpKernelParams { beta: 0.0, ..REFERENCE };
        let layout = SiteLayout::new(ids(&["A", "B"]), vec![(0.0, 0.0), (0.0, 0.0)]).unwrap();
        let c = condition(&p, &layout, &ids(&["B"]), &[0.17]).unwrap();
        assert!((c.mean[0] - 0.17).abs() < 1e-15);
        assert!(c.cov[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_observation_sets() {
        let layout = oahu_like_layout();
        let all = layout.site_ids().to_vec();
        assert!(condition(&REFERENCE, &layout, &all, &[0.0; 17]).is_err());
        assert!(condition(&REFERENCE, &layout, &[], &[]).is_err());
        assert!(condition(&REFERENCE, &layout, &ids(&["XX"]), &[0.0]).is_err());
        assert!(condition(&REFERENCE, &layout, &ids(&["DH4"]), &[0.0, 1.0]).is_err());
        assert!(condition(&REFERENCE, &layout, &ids(&["DH4"]), &[f64::NAN]).is_err());
    }

    #[test]
    fn singular_observed_block_reports_sites() {
        let p = GpKernelParams { beta: 0.0, ..REFERENCE };
        let layout = SiteLayout::new(
            ids(&["A", "B", "C"]),
            vec![(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)],
        )
        .unwrap();
        match condition(&p, &layout, &ids(&["A", "B"]), &[0.1, 0.1]) {
            Err(Error::NumericFailure(msg)) => assert!(msg.contains("A, B"), "{msg}"),
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }

    #[test]
    fn sample_zero_cov_returns_mean() {
        let cond = ConditionalGaussian {
            site_ids: ids(&["A", "B"]),
            mean: DVector::from_vec(vec![0.25, -0.5]),
            cov: DMatrix::zeros(2, 2),
        };
        let d = sample(&cond, 5, 3);
        for r in 0..5 {
            assert_eq!(d[(r, 0)], 0.25);
            assert_eq!(d[(r, 1)], -0.5);
        }
    }

    #[test]
    fn sample_deterministic_and_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let cond = ConditionalGaussian {
            site_ids: ids(&["A", "B"]),
            mean: DVector::from_vec(vec![1.0, -1.0]),
            cov: cov.clone(),
        };
        let a = sample(&cond, 100_000, 9);
        assert_eq!(a, sample(&cond, 100_000, 9));
        let n = a.nrows() as f64;
        let mean = a.row_mean();
        let centered = DMatrix::from_fn(a.nrows(), 2, |r, c| a[(r, c)] - mean[c]);
        let emp = centered.transpose() * &centered / (n - 1.0);
        assert!((&emp - &cov).norm() / cov.norm() < 0.03);
    }

    #[test]
    fn sample_kappa_truncates_at_zero() {
        let cond = ConditionalGaussian {
            site_ids: ids(&["A"]),
            mean: DVector::from_vec(vec![0.0]),
            cov: DMatrix::from_element(1, 1, 1.0),
        };
        let d = sample_kappa(&cond, &[0.1], 1000, 1).unwrap();
        assert!(d.iter().all(|v| *v >= 0.0));
        assert!(d.iter().any(|v| *v == 0.0));
        assert!(sample_kappa(&cond, &[], 1, 1).is_err());
    }

    #[test]
    fn conditional_cov_is_psd() {
        let layout = oahu_like_layout();
        let c = condition(&REFERENCE, &layout, &ids(&["DH4", "AP5"]), &[0.05, -0.02]).unwrap();
        let eig = c.cov.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|l| *l > -1e-15));
        assert_eq!(c.dim(), 15);
        // the conditional variance never exceeds the prior variance
        let prior = build_cov(&REFERENCE, &layout).unwrap();
        assert!((0..15).all(|i| c.cov[(i, i)] <= prior.matrix()[(0, 0)] + 1e-15));
    }
}
