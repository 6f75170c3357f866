use super::{kernel_matrix, CovMatrix, GpKernelParams, SiteLayout};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

#[derive(Debug, Clone)]
pub struct KernelFit {
    pub params: GpKernelParams,
    /// ‖Σ_model − Σ_obs‖_F at the returned parameters.
    pub residual: f64,
    /// Best residual after each simplex iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

fn from_log(z: &[f64]) -> GpKernelParams {
    GpKernelParams {
        alpha: z[0].exp(),
        beta: z[1].exp(),
        theta_x: z[2].exp(),
        theta_y: z[3].exp(),
    }
}

/// Frobenius distance between the kernel matrix and `target`.
fn residual(params: &GpKernelParams, coords: &[(f64, f64)], target: &CovMatrix) -> f64 {
    (kernel_matrix(params, coords) - target.matrix()).norm()
}

/// Least-squares kernel calibration: minimize ‖Σ_model − Σ_obs‖_F with a
/// Nelder–Mead search over the log-parameters.
///
/// A zero nugget in `init` is lifted to a small positive value so that the
/// log transform is defined.
pub fn fit_kernel(
    sigma_obs: &CovMatrix,
    layout: &SiteLayout,
    init: &GpKernelParams,
) -> Result<KernelFit> {
    if sigma_obs.site_ids() != layout.site_ids() {
        return Err(Error::invalid(
            "observed covariance and layout must list the same sites in the same order",
        ));
    }
    init.validate()?;
    let coords = layout.coords();
    let start = GpKernelParams {
        beta: if init.beta > 0.0 {
            init.beta
        } else {
            1e-6 * init.alpha
        },
        ..*init
    };
    let r0 = residual(&start, coords, sigma_obs);
    if !r0.is_finite() {
        return Err(Error::invalid(format!(
            "kernel objective is not finite at the initial parameters {init:?}"
        )));
    }

    let z0 = [
        start.alpha.ln(),
        start.beta.ln(),
        start.theta_x.ln(),
        start.theta_y.ln(),
    ];
    let opts = NelderMeadOptions {
        initial_step: vec![0.2],
        max_evals: 20_000,
        ftol: 1e-15 * sigma_obs.matrix().norm().max(f64::MIN_POSITIVE),
        xtol: 1e-10,
        restarts: 4,
    };
    let result = nelder_mead(|z| residual(&from_log(z), coords, sigma_obs), &z0, &opts);

    // keep the caller's init verbatim when nothing beat it
    let params = if result.value < r0 {
        from_log(&result.x)
    } else {
        start
    };
    Ok(KernelFit {
        residual: residual(&params, coords, sigma_obs),
        params,
        trace: result.trace,
        evaluations: result.evaluations,
        converged: result.converged,
    })
}
