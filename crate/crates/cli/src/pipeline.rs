//! End-to-end steps shared by the subcommands and the acceptance suite:
//! kernel fit, PV prediction from sparse irradiance, and disaggregation of
//! net load into a calibrated masked-load model with a prediction envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pvdisagg::disagg::{
    best_calibration, calibrate_multistart, coverage, masked_from_net, predict_masked,
    Calibration, CalibrationProblem, CalibrationSettings, PredictionEnvelope, Weights,
};
use pvdisagg::gp::{empirical_cov, fit_kernel, Conditioner, GpKernelParams, KernelFit, SiteLayout};
use pvdisagg::io::PlantConfig;
use pvdisagg::optim::NelderMeadOptions;
use pvdisagg::ou::{estimate_params, EstimationReport, OuParams};
use pvdisagg::pv::{aggregate_values, TranspositionInputs};
use pvdisagg::timeseries::{
    debias, grid_time, IrradiancePanel, KappaPanel, UniformSeries, DEFAULT_KAPPA_FLOOR,
};
use pvdisagg::{Error, Result};

use crate::config::CalibrationConfig;

const INIT_STREAM: u64 = 0x1717;
/// Keeps envelope realizations independent of the calibration's frozen
/// streams for the same seed.
const ENVELOPE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn leading_kappa(irradiance: &IrradiancePanel, rows: usize) -> Result<KappaPanel> {
    let rows = rows.min(irradiance.n_times());
    let panel = irradiance.rows(0, rows)?.kappa_panel(DEFAULT_KAPPA_FLOOR)?;
    if panel.kappa().iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidArgument(
            "clear-sky index is zero everywhere in the window (night or twilight); choose a daylight window"
                .into(),
        ));
    }
    Ok(panel)
}

/// Per-site κ means over the first `rows` timesteps.
pub fn site_means(irradiance: &IrradiancePanel, rows: usize) -> Result<Vec<f64>> {
    Ok(debias(&leading_kappa(irradiance, rows)?).site_means().to_vec())
}

/// clear-sky index → debias → empirical covariance → least-squares kernel
/// fit, over the first `rows` timesteps of every site in `irradiance`.
pub fn fit_gp(
    irradiance: &IrradiancePanel,
    layout: &SiteLayout,
    init: &GpKernelParams,
    rows: usize,
) -> Result<KernelFit> {
    if irradiance.site_ids().len() < 2 {
        return Err(Error::InvalidArgument("kernel fit needs at least 2 sites".into()));
    }
    let panel = leading_kappa(irradiance, rows)?;
    if panel.n_times() < 2 {
        return Err(Error::InvalidArgument("kernel fit needs at least 2 timesteps".into()));
    }
    let layout = layout.select(irradiance.site_ids())?;
    let cov = empirical_cov(&debias(&panel))?;
    fit_kernel(&cov, &layout, init)
}

/// Aggregate PV power from irradiance measured at `observed` sites only.
///
/// `irradiance` must cover every plant site so that clear-sky GHI is known
/// everywhere; measured GHI at unobserved sites is ignored. Unobserved κ is
/// the kriging mean around `means` (per site, in `irradiance` order),
/// truncated at zero. Without `means`, every site takes the window average
/// of the observed sites.
pub fn predict_pv(
    kernel: &GpKernelParams,
    layout: &SiteLayout,
    irradiance: &IrradiancePanel,
    observed: &[String],
    means: Option<&[f64]>,
    plant: &PlantConfig,
) -> Result<UniformSeries> {
    let ids = irradiance.site_ids();
    let obs_cols = observed
        .iter()
        .map(|id| {
            ids.iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown observed site {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let kappa = irradiance.kappa_panel(DEFAULT_KAPPA_FLOOR)?;
    let n = kappa.n_times();
    let means: Vec<f64> = match means {
        Some(m) if m.len() == ids.len() => m.to_vec(),
        Some(m) => {
            return Err(Error::InvalidArgument(format!(
                "{} site means for {} sites",
                m.len(),
                ids.len()
            )))
        }
        None => {
            let avg = obs_cols
                .iter()
                .map(|&c| kappa.kappa().column(c).sum() / n as f64)
                .sum::<f64>()
                / obs_cols.len() as f64;
            vec![avg; ids.len()]
        }
    };

    let mut full = kappa.kappa().clone();
    let un_cols: Vec<usize> = (0..ids.len()).filter(|c| !obs_cols.contains(c)).collect();
    if !un_cols.is_empty() {
        let cond = Conditioner::new(kernel, &layout.select(ids)?, observed)?;
        let order: Vec<usize> = cond
            .unobserved_ids()
            .iter()
            .map(|id| ids.iter().position(|s| s == id).expect("id from layout"))
            .collect();
        let mut dev = vec![0.0; obs_cols.len()];
        for t in 0..n {
            for (d, &c) in dev.iter_mut().zip(&obs_cols) {
                *d = kappa.kappa()[(t, c)] - means[c];
            }
            let mu = cond.mean(&dev)?;
            for (k, &c) in order.iter().enumerate() {
                full[(t, c)] = (means[c] + mu[k]).max(0.0);
            }
        }
    }
    let values = aggregate_values(
        &full,
        ids,
        irradiance.ghi_clear(),
        &TranspositionInputs::constant(plant.transposition),
        &plant.sites_for(ids),
    )?;
    UniformSeries::new(irradiance.start_time(), irradiance.dt(), values)
}

/// The part of `series` that lies on the grid `start + i·dt`, i < len.
pub fn align(series: &UniformSeries, start: pvdisagg::timeseries::Timestamp, dt: f64, len: usize) -> Result<UniformSeries> {
    if (series.dt() - dt).abs() > 1e-12 * dt {
        return Err(Error::InvalidArgument(format!(
            "sampling mismatch: {} s vs {} s",
            series.dt(),
            dt
        )));
    }
    let offset_s = (start - series.start_time()).num_nanoseconds().unwrap_or(i64::MIN) as f64 / 1e9;
    let idx = (offset_s / dt).round();
    if idx < 0.0
        || (grid_time(series.start_time(), dt, idx as usize) - start)
            .num_nanoseconds()
            .is_none_or(|ns| ns.abs() > 1_000)
    {
        return Err(Error::InvalidArgument(format!(
            "series starting {} does not contain the time {start} on its grid",
            series.start_time()
        )));
    }
    let from = idx as usize;
    if from + len > series.len() {
        return Err(Error::InvalidArgument(format!(
            "series has {} samples; {len} needed from index {from}",
            series.len()
        )));
    }
    series.slice(from, from + len)
}

/// Outcome of one disaggregation run.
#[derive(Debug, Clone)]
pub struct Disaggregation {
    pub masked: UniformSeries,
    pub rough: EstimationReport,
    pub prior: OuParams,
    pub runs: Vec<Calibration>,
    pub best: Calibration,
    pub envelope: PredictionEnvelope,
    pub coverage: Option<f64>,
}

impl Disaggregation {
    pub fn budget_exhausted(&self) -> bool {
        self.best.budget_exhausted
    }
}

#[derive(Debug, Clone)]
pub struct DisaggregationSettings {
    pub calibration_steps: usize,
    pub horizon_steps: usize,
    pub calibration: CalibrationConfig,
    pub envelope_realizations: usize,
    pub seed: u64,
    /// Centre of the initial guesses. When absent the guesses surround the
    /// prior and include it.
    pub init_center: Option<OuParams>,
}

fn pin(p: &OuParams, fixed: &[(usize, f64)]) -> OuParams {
    let mut v = p.to_array();
    for &(i, x) in fixed {
        v[i] = x;
    }
    OuParams::from_array(v)
}

/// Initial guesses: each free component of `center` scaled by an
/// independent U[1 − s, 1 + s] factor.
pub fn initial_guesses(center: &OuParams, free: [bool; 7], spread: f64, n: usize, seed: u64) -> Vec<OuParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    (0..n)
        .map(|_| {
            let mut v = center.to_array();
            for (x, f) in v.iter_mut().zip(free) {
                let u: f64 = rng.random_range(-1.0..=1.0);
                if f {
                    *x *= 1.0 + spread * u;
                }
            }
            OuParams::from_array(v)
        })
        .collect()
}

/// masked_from_net → rough estimate Θ₁ → multi-start calibration Θ* →
/// envelope over the horizon after the calibration window → coverage of
/// `truth` if supplied.
pub fn disaggregate(
    net: &UniformSeries,
    pv: &UniformSeries,
    prior: Option<OuParams>,
    truth: Option<&UniformSeries>,
    s: &DisaggregationSettings,
) -> Result<Disaggregation> {
    let n = s.calibration_steps;
    if net.len() < n {
        return Err(Error::InvalidArgument(format!(
            "net load has {} samples; the calibration window needs {n}",
            net.len()
        )));
    }
    let net_w = net.slice(0, n)?;
    let pv_w = align(pv, net.start_time(), net.dt(), n)?;
    let masked = masked_from_net(&net_w, &pv_w)?;
    let rough = estimate_params(&masked).map_err(|e| match e {
        Error::EstimationFailure(m) => Error::EstimationFailure(format!(
            "{m}; the masked-load window may be too short or too smooth for the rough estimate"
        )),
        other => other,
    })?;
    let c = &s.calibration;
    let prior = pin(&prior.unwrap_or(rough.params), &c.fixed);
    let settings = CalibrationSettings {
        weights: Weights {
            stats: c.w_stats,
            regularization: c.w_reg,
        },
        n_realizations: c.n_realizations,
        t1: c.t1,
        seed: s.seed,
        free: c.free,
        optimizer: NelderMeadOptions {
            max_evals: c.max_evals,
            ..CalibrationSettings::default().optimizer
        },
    };
    let problem = CalibrationProblem::new(&masked, prior, settings)?;
    let inits = match s.init_center {
        Some(center) => {
            initial_guesses(&pin(&center, &c.fixed), problem.free(), c.init_spread, c.restarts, s.seed)
        }
        None => {
            let mut v = vec![prior];
            v.extend(initial_guesses(&prior, problem.free(), c.init_spread, c.restarts - 1, s.seed));
            v
        }
    };
    let runs = calibrate_multistart(&problem, &inits)?;
    let best = best_calibration(&runs).expect("at least one restart").clone();

    let last = masked.len() - 1;
    let envelope = predict_masked(
        &best.params,
        masked.values()[last],
        masked.time_at(last),
        s.horizon_steps,
        masked.dt(),
        s.envelope_realizations,
        s.seed ^ ENVELOPE_SEED_SALT,
    )?;
    let coverage = match truth {
        Some(t) => {
            let t = align(t, envelope.mean.start_time(), envelope.mean.dt(), envelope.mean.len())?;
            Some(coverage(&envelope, &t)?)
        }
        None => None,
    };
    Ok(Disaggregation {
        masked,
        rough,
        prior,
        runs,
        best,
        envelope,
        coverage,
    })
}

/// RMSE and MAE of `pred` against `truth` on a shared grid.
pub fn errors(pred: &UniformSeries, truth: &UniformSeries) -> Result<(f64, f64)> {
    let t = align(truth, pred.start_time(), pred.dt(), pred.len())?;
    let n = pred.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, q) in pred.values().iter().zip(t.values()) {
        se += (p - q) * (p - q);
        ae += (p - q).abs();
    }
    Ok(((se / n).sqrt(), ae / n))
}

/// Table columns for parameter errors, in display order.
pub const TABLE_COLUMNS: [(&str, usize); 7] = [
    ("mu", 1),
    ("gamma", 0),
    ("mu1", 2),
    ("sigma1", 3),
    ("k", 4),
    ("theta", 5),
    ("lambda", 6),
];

/// |Θ_ref − Θ| rows in the layout μ, γ, μ₁, σ₁, k, θ, λ.
pub fn parameter_table(reference: &OuParams, rows: &[(&str, OuParams)]) -> String {
    let mut out = format!("{:<14}", "");
    for (name, _) in TABLE_COLUMNS {
        out.push_str(&format!("{name:>11}"));
    }
    out.push('\n');
    let r = reference.to_array();
    for (label, p) in rows {
        let v = p.to_array();
        out.push_str(&format!("{label:<14}"));
        for (_, i) in TABLE_COLUMNS {
            out.push_str(&format!("{:>11.2e}", (r[i] - v[i]).abs()));
        }
        out.push('\n');
    }
    out
}
