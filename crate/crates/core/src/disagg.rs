//! Masked-load recovery from net load, statistics-matching calibration of
//! the jump OU model, and Monte Carlo prediction envelopes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::ou::{simulate_em_with, Innovations, OuParams};
use crate::timeseries::{grid_time, Timestamp, UniformSeries};

const NORM_EPS: f64 = 1e-9;
pub const DEFAULT_LAGS: usize = 60;

/// P̂_masked = P_net + P̂_pv.
pub fn masked_from_net(net: &UniformSeries, pv: &UniformSeries) -> Result<UniformSeries> {
    check_aligned(net, pv, "net load", "PV")?;
    net.with_values(net.values().iter().zip(pv.values()).map(|(n, p)| n + p).collect())
}

fn check_aligned(a: &UniformSeries, b: &UniformSeries, an: &str, bn: &str) -> Result<()> {
    if !a.aligned_with(b) || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "{an} ({} samples from {} every {} s) and {bn} ({} samples from {} every {} s) are not on the same time base",
            a.len(),
            a.start_time(),
            a.dt(),
            b.len(),
            b.start_time(),
            b.dt()
        )));
    }
    Ok(())
}

/// Summary statistics matched during calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatVector {
    pub mean: f64,
    pub std: f64,
    /// (1/t1)·‖[R(1) … R(t1)]‖₂ of the biased sample autocorrelation.
    pub ac_norm: f64,
    pub t1: usize,
}

impl StatVector {
    pub fn to_array(&self) -> [f64; 3] {
        [self.mean, self.std, self.ac_norm]
    }
}

pub fn stat_vector(series: &UniformSeries, t1: usize) -> Result<StatVector> {
    stats_of(series.values(), t1)
}

fn stats_of(x: &[f64], t1: usize) -> Result<StatVector> {
    let n = x.len();
    if t1 == 0 || n <= t1 {
        return Err(Error::invalid(format!(
            "statistics need 1 <= t1 < length, got t1 = {t1} for {n} samples"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = centered.iter().map(|v| v * v).sum();
    if !(ss > 0.0) {
        return Err(Error::invalid(
            "series has zero variance; autocorrelation is undefined",
        ));
    }
    let sum_sq: f64 = (1..=t1)
        .map(|lag| {
            let r = centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / ss;
            r * r
        })
        .sum();
    Ok(StatVector {
        mean,
        std: (ss / (n - 1) as f64).sqrt(),
        ac_norm: sum_sq.sqrt() / t1 as f64,
        t1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub stats: f64,
    pub regularization: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            stats: 1.0,
            regularization: 1e-3,
        }
    }
}

/// Tunables of a calibration run.
#[derive(Debug, Clone)]
pub struct CalibrationSettings {
    pub weights: Weights,
    pub n_realizations: usize,
    pub t1: usize,
    /// Frozen seed of the common random numbers.
    pub seed: u64,
    /// Which of [γ, μ, μ₁, σ₁, k, θ, λ] are optimized. `None` frees all of
    /// them except the jump block when the prior has no jumps.
    pub free: Option<[bool; 7]>,
    pub optimizer: NelderMeadOptions,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            weights: Weights::default(),
            n_realizations: 10,
            t1: DEFAULT_LAGS,
            seed: 0,
            free: None,
            optimizer: NelderMeadOptions {
                initial_step: vec![0.1],
                max_evals: 4000,
                ftol: 1e-10,
                xtol: 1e-7,
                restarts: 1,
            },
        }
    }
}

/// Observed statistics of a masked-load window, the prior Θ, and the
/// frozen innovations that every objective evaluation reuses.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    observed: StatVector,
    prior: OuParams,
    /// Deviation of the window's first sample from the window mean.
    x0_offset: f64,
    dt: f64,
    settings: CalibrationSettings,
    free: [bool; 7],
    noise: Vec<Innovations>,
}

impl CalibrationProblem {
    /// Simulated paths span as many samples as the window and start at
    /// μ(Θ) plus the window's initial deviation from its own mean, so a
    /// shift in μ translates every path rigidly.
    pub fn new(window: &UniformSeries, prior: OuParams, settings: CalibrationSettings) -> Result<Self> {
        prior.validate()?;
        let w = &settings.weights;
        if !(w.stats >= 0.0 && w.regularization >= 0.0) {
            return Err(Error::invalid(format!("weights must be non-negative: {w:?}")));
        }
        if settings.n_realizations == 0 {
            return Err(Error::invalid("calibration needs at least one realization"));
        }
        let observed = stat_vector(window, settings.t1)?;
        let free = settings.free.unwrap_or_else(|| {
            let jumps = prior.lambda > 0.0;
            [true, true, true, true, jumps, jumps, jumps]
        });
        let steps = window.len() - 1;
        let noise = (0..settings.n_realizations)
            .map(|r| Innovations::draw(steps, settings.seed, r as u64))
            .collect();
        Ok(Self {
            observed,
            prior,
            x0_offset: window.values()[0] - observed.mean,
            dt: window.dt(),
            settings,
            free,
            noise,
        })
    }

    pub fn observed(&self) -> &StatVector {
        &self.observed
    }

    pub fn prior(&self) -> &OuParams {
        &self.prior
    }

    pub fn settings(&self) -> &CalibrationSettings {
        &self.settings
    }

    pub fn free(&self) -> [bool; 7] {
        self.free
    }

    /// S̄_sim(Θ): statistics averaged over the frozen realizations, summed
    /// in realization order.
    pub fn simulated_stats(&self, theta: &OuParams) -> Result<[f64; 3]> {
        let mut acc = [0.0; 3];
        for noise in &self.noise {
            let x0 = theta.mu + self.x0_offset;
            let (path, _) = simulate_em_with(theta, x0, self.dt, noise)?;
            let s = stats_of(&path, self.settings.t1)?.to_array();
            for (a, v) in acc.iter_mut().zip(s) {
                *a += v;
            }
        }
        let n = self.noise.len() as f64;
        Ok(acc.map(|a| a / n))
    }
}

fn normalized_distance(a: &[f64], b: &[f64], reference: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(reference)
        .map(|((a, b), r)| {
            let d = (a - b) / (r.abs() + NORM_EPS);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// w_S‖S_obs − S̄_sim(Θ)‖ + w_R‖Θ_prior − Θ‖ on component-wise normalized
/// vectors.
pub fn objective(theta: &OuParams, problem: &CalibrationProblem) -> Result<f64> {
    theta.validate()?;
    let w = problem.settings.weights;
    let prior = problem.prior.to_array();
    let reg = normalized_distance(&prior, &theta.to_array(), &prior);
    if w.stats == 0.0 {
        return Ok(w.regularization * reg);
    }
    let obs = problem.observed.to_array();
    let sim = problem.simulated_stats(theta)?;
    Ok(w.stats * normalized_distance(&obs, &sim, &obs) + w.regularization * reg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: OuParams,
    pub value: f64,
    /// Best objective value per optimizer iteration; non-increasing.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

const LOG_SCALED: [bool; 7] = [true, false, false, true, true, true, true];

/// Map between Θ and the optimizer's coordinates: logs of the positive
/// components, μ and μ₁ divided by their starting magnitude.
struct Coordinates {
    base: OuParams,
    free: Vec<usize>,
    scale: [f64; 7],
}

impl Coordinates {
    fn new(init: &OuParams, free: [bool; 7]) -> Self {
        let v = init.to_array();
        let scale = std::array::from_fn(|i| if v[i].abs() > 1e-9 { v[i].abs() } else { 1.0 });
        Self {
            base: *init,
            free: (0..7).filter(|&i| free[i]).collect(),
            scale,
        }
    }

    fn encode(&self, p: &OuParams) -> Vec<f64> {
        let v = p.to_array();
        self.free
            .iter()
            .map(|&i| if LOG_SCALED[i] { v[i].ln() } else { v[i] / self.scale[i] })
            .collect()
    }

    fn decode(&self, z: &[f64]) -> OuParams {
        let mut v = self.base.to_array();
        for (&i, &zi) in self.free.iter().zip(z) {
            v[i] = if LOG_SCALED[i] { zi.exp() } else { zi * self.scale[i] };
        }
        OuParams::from_array(v)
    }
}

/// Nelder–Mead minimization of [`objective`] from `init`. Regions where Θ is
/// invalid or the simulation is undefined count as +∞. Running out of
/// evaluations is reported through `budget_exhausted`, not as an error.
pub fn calibrate(problem: &CalibrationProblem, init: &OuParams) -> Result<Calibration> {
    init.validate()?;
    if problem.free[6] && init.lambda <= 0.0 {
        return Err(Error::invalid(
            "jump intensity is free but the initial value is zero; freeze it instead",
        ));
    }
    if !problem.free.iter().any(|f| *f) {
        let value = objective(init, problem)?;
        return Ok(Calibration {
            params: *init,
            value,
            trace: vec![value],
            evaluations: 1,
            budget_exhausted: false,
        });
    }
    let coords = Coordinates::new(init, problem.free);
    let f = |z: &[f64]| objective(&coords.decode(z), problem).unwrap_or(f64::INFINITY);
    let z0 = coords.encode(init);
    let res = nelder_mead(f, &z0, &problem.settings.optimizer);
    if !res.value.is_finite() {
        return Err(Error::estimation(format!(
            "calibration objective is not finite at the initial guess {init:?}"
        )));
    }
    // skip the log/exp round trip when the start was never beaten
    let params = if res.x == z0 { *init } else { coords.decode(&res.x) };
    Ok(Calibration {
        params,
        value: res.value,
        trace: res.trace,
        evaluations: res.evaluations,
        budget_exhausted: !res.converged,
    })
}

/// [`calibrate`] from each initial guess, run in parallel. Results keep the
/// order of `inits`.
pub fn calibrate_multistart(
    problem: &CalibrationProblem,
    inits: &[OuParams],
) -> Result<Vec<Calibration>> {
    inits.par_iter().map(|init| calibrate(problem, init)).collect()
}

/// Lowest objective value; ties go to the earliest entry.
pub fn best_calibration(runs: &[Calibration]) -> Option<&Calibration> {
    runs.iter()
        .reduce(|best, c| if c.value < best.value { c } else { best })
}

/// Pointwise Monte Carlo mean with a ±2σ band.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionEnvelope {
    pub mean: UniformSeries,
    /// Pointwise sample standard deviation (1/(n−1)).
    pub std: Vec<f64>,
    pub lower: UniformSeries,
    pub upper: UniformSeries,
    pub n_realizations: usize,
}

impl PredictionEnvelope {
    /// Same mean with the band set to mean ± `k`σ.
    pub fn widened(&self, k: f64) -> Result<Self> {
        if !(k >= 0.0) {
            return Err(Error::invalid(format!("band multiplier {k} must be non-negative")));
        }
        let band = |sign: f64| {
            self.mean.with_values(
                self.mean
                    .values()
                    .iter()
                    .zip(&self.std)
                    .map(|(m, s)| m + sign * k * s)
                    .collect(),
            )
        };
        Ok(Self {
            lower: band(-1.0)?,
            upper: band(1.0)?,
            ..self.clone()
        })
    }
}

/// Envelope of `horizon` steps following `x0`, which sits at `origin`; the
/// first envelope sample is at `origin + dt`. Realization r uses stream r
/// of `seed`.
pub fn predict_masked(
    theta: &OuParams,
    x0: f64,
    origin: Timestamp,
    horizon: usize,
    dt: f64,
    n_realizations: usize,
    seed: u64,
) -> Result<PredictionEnvelope> {
    if n_realizations < 2 {
        return Err(Error::invalid("an envelope needs at least 2 realizations"));
    }
    let paths = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let noise = Innovations::draw(horizon, seed, r as u64);
            simulate_em_with(theta, x0, dt, &noise).map(|(p, _)| p)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = n_realizations as f64;
    let (mut mean, mut std) = (Vec::with_capacity(horizon), Vec::with_capacity(horizon));
    for i in 1..=horizon {
        let m = paths.iter().map(|p| p[i]).sum::<f64>() / n;
        let v = paths.iter().map(|p| (p[i] - m) * (p[i] - m)).sum::<f64>() / (n - 1.0);
        mean.push(m);
        std.push(v.sqrt());
    }
    let mean = UniformSeries::new(grid_time(origin, dt, 1), dt, mean)?;
    let env = PredictionEnvelope {
        lower: mean.clone(),
        upper: mean.clone(),
        mean,
        std,
        n_realizations,
    };
    env.widened(2.0)
}

/// Fraction of timesteps with lower ≤ truth ≤ upper.
pub fn coverage(envelope: &PredictionEnvelope, truth: &UniformSeries) -> Result<f64> {
    if truth.len() != envelope.mean.len() {
        return Err(Error::invalid(format!(
            "envelope has {} samples but truth has {}",
            envelope.mean.len(),
            truth.len()
        )));
    }
    let inside = truth
        .values()
        .iter()
        .zip(envelope.lower.values().iter().zip(envelope.upper.values()))
        .filter(|(t, (lo, hi))| *lo <= *t && *t <= *hi)
        .count();
    Ok(inside as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ou::simulate_em;
    use chrono::DateTime;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn series(v: Vec<f64>) -> UniformSeries {
        UniformSeries::new(DateTime::UNIX_EPOCH, 1.0, v).unwrap()
    }

    fn truth() -> OuParams {
        OuParams::diffusion(0.01, 4.0e5, 200.0)
    }

    fn settings(seed: u64) -> CalibrationSettings {
        CalibrationSettings {
            seed,
            free: Some([true, true, false, true, false, false, false]),
            ..Default::default()
        }
    }

    #[test]
    fn masked_examples() {
        let m = masked_from_net(&series(vec![100.0]), &series(vec![50.0])).unwrap();
        assert_eq!(m.values(), &[150.0]);
        let net = series(vec![3.0, -2.0, 7.5]);
        let zero = series(vec![0.0; 3]);
        assert_eq!(masked_from_net(&net, &zero).unwrap(), net);
    }

    #[test]
    fn masked_rejects_mismatch() {
        let a = series(vec![1.0, 2.0]);
        let b = UniformSeries::new(DateTime::UNIX_EPOCH, 2.0, vec![1.0, 2.0]).unwrap();
        assert!(masked_from_net(&a, &b).is_err());
        assert!(masked_from_net(&a, &series(vec![1.0])).is_err());
    }

    #[test]
    fn white_noise_has_small_ac_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let s = stat_vector(&series(x), 60).unwrap();
        assert!(s.ac_norm < 0.01, "{}", s.ac_norm);
        assert!((s.std - 1.0).abs() < 0.02);
    }

    #[test]
    fn alternating_series() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = stat_vector(&series(x), 1).unwrap();
        assert!((s.ac_norm - 1.0).abs() < 1e-2);
        assert_eq!(s.mean, 0.0);
    }

    #[test]
    fn ou_ac_norm_matches_analytic() {
        let p = truth();
        let (s, _) = simulate_em(&p, p.mu, 100_000, 1.0, 12).unwrap();
        let got = stat_vector(&s, 60).unwrap().ac_norm;
        let want = (1..=60)
            .map(|t| (-2.0 * p.gamma * t as f64).exp())
            .sum::<f64>()
            .sqrt()
            / 60.0;
        assert!((got - want).abs() / want < 0.15, "{got} vs {want}");
    }

    #[test]
    fn stat_vector_errors() {
        assert!(stat_vector(&series(vec![1.0; 100]), 5).is_err());
        assert!(stat_vector(&series(vec![1.0, 2.0]), 2).is_err());
        assert!(stat_vector(&series(vec![1.0, 2.0, 4.0]), 0).is_err());
    }

    fn observed_window(seed: u64) -> UniformSeries {
        let p = truth();
        simulate_em(&p, p.mu, 1799, 1.0, seed).unwrap().0
    }

    /// Path driven by stream 0 of `seed` whose start sits at μ plus its
    /// own deviation from the path mean, i.e. exactly what the first frozen
    /// realization reproduces.
    fn matched_window(p: &OuParams, seed: u64) -> UniformSeries {
        let noise = Innovations::draw(1799, seed, 0);
        let run = |x0: f64| simulate_em_with(p, x0, 1.0, &noise).unwrap().0;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // the path mean is affine in x0; solve mean(x0) = μ
        let (m0, m1) = (mean(&run(0.0)), mean(&run(1.0)));
        series(run((p.mu - m0) / (m1 - m0)))
    }

    #[test]
    fn matched_statistics_leave_only_regularization() {
        let p = truth();
        let st = settings(41);
        let window = matched_window(&p, 41);
        let prior = OuParams { gamma: 0.012, ..p };
        let problem = CalibrationProblem::new(
            &window,
            prior,
            CalibrationSettings {
                n_realizations: 1,
                ..st
            },
        )
        .unwrap();
        let reg = 1e-3 * (0.002f64 / (0.012 + NORM_EPS));
        let v = objective(&p, &problem).unwrap();
        assert!((v - reg).abs() < 1e-6, "{v} vs {reg}");
    }

    #[test]
    fn zero_stat_weight_is_pure_regularization() {
        let p = truth();
        let st = CalibrationSettings {
            weights: Weights {
                stats: 0.0,
                regularization: 1.0,
            },
            ..settings(1)
        };
        let problem = CalibrationProblem::new(&observed_window(1), p, st).unwrap();
        assert_eq!(objective(&p, &problem).unwrap(), 0.0);
        let moved = OuParams { mu: 4.4e5, ..p };
        let v = objective(&moved, &problem).unwrap();
        assert!((v - 0.1).abs() < 1e-9, "{v}");
    }

    #[test]
    fn mean_perturbation_raises_statistic_term() {
        // observed path shares the first frozen realization
        let p = truth();
        let worse = (0..20)
            .filter(|&seed| {
                let window = matched_window(&p, seed);
                let problem = CalibrationProblem::new(&window, p, settings(seed)).unwrap();
                let base = objective(&p, &problem).unwrap();
                let moved = objective(&OuParams { mu: p.mu * 1.01, ..p }, &problem).unwrap();
                moved > base
            })
            .count();
        assert_eq!(worse, 20);
    }

    #[test]
    fn ten_percent_mean_shift_is_ordered() {
        let p = truth();
        let ordered = (0..20)
            .filter(|&seed| {
                let problem = CalibrationProblem::new(&observed_window(200 + seed), p, settings(seed)).unwrap();
                let base = objective(&p, &problem).unwrap();
                [0.9, 1.1].iter().all(|f| {
                    objective(&OuParams { mu: p.mu * f, ..p }, &problem).unwrap() >= base
                })
            })
            .count();
        assert!(ordered >= 16, "{ordered}");
    }

    #[test]
    fn objective_deterministic() {
        let p = truth();
        let problem = CalibrationProblem::new(&observed_window(5), p, settings(9)).unwrap();
        let q = OuParams { gamma: 0.02, ..p };
        assert_eq!(objective(&q, &problem).unwrap(), objective(&q, &problem).unwrap());
    }

    #[test]
    fn calibration_stays_at_exact_fit() {
        let p = truth();
        let st = CalibrationSettings {
            n_realizations: 1,
            ..settings(4)
        };
        let problem = CalibrationProblem::new(&matched_window(&p, 4), p, st).unwrap();
        let c = calibrate(&problem, &p).unwrap();
        assert!(c.value < 1e-9, "{}", c.value);
        for (got, want) in c.params.to_array().iter().zip(p.to_array()) {
            assert!((got - want).abs() <= 1e-6 * want.abs(), "{:?}", c.params);
        }
        assert!(c.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn calibration_moves_toward_truth() {
        let p = truth();
        let window = observed_window(77);
        let problem = CalibrationProblem::new(&window, p, settings(3)).unwrap();
        let init = OuParams {
            gamma: 0.016,
            mu: 4.1e5,
            sigma1: 120.0,
            ..p
        };
        let c = calibrate(&problem, &init).unwrap();
        assert!(c.value < objective(&init, &problem).unwrap());
        assert!((c.params.mu - p.mu).abs() / p.mu < 0.005, "{:?}", c.params);
        assert!(c.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let p = truth();
        let mut st = settings(3);
        st.optimizer.max_evals = 10;
        let problem = CalibrationProblem::new(&observed_window(8), p, st).unwrap();
        let c = calibrate(&problem, &OuParams { gamma: 0.02, ..p }).unwrap();
        assert!(c.budget_exhausted);
        assert!(c.evaluations <= 12);
    }

    #[test]
    fn default_free_set_freezes_absent_jumps() {
        let p = truth();
        let problem = CalibrationProblem::new(&observed_window(8), p, CalibrationSettings::default()).unwrap();
        assert_eq!(problem.free(), [true, true, true, true, false, false, false]);
    }

    #[test]
    fn envelope_collapses_without_noise() {
        let p = OuParams {
            sigma1: 1e-300,
            ..truth()
        };
        let x0 = 3.9e5;
        let env = predict_masked(&p, x0, DateTime::UNIX_EPOCH, 200, 1.0, 10, 1).unwrap();
        for (i, m) in env.mean.values().iter().enumerate() {
            let want = p.mu + (x0 - p.mu) * (1.0 - p.gamma).powi(i as i32 + 1);
            assert!((m - want).abs() < 1e-6);
        }
        for (lo, hi) in env.lower.values().iter().zip(env.upper.values()) {
            assert!(hi - lo < 1e-6);
        }
        assert_eq!(env.mean.start_time(), grid_time(DateTime::UNIX_EPOCH, 1.0, 1));
    }

    #[test]
    fn envelope_width_reaches_stationary_band() {
        let p = truth();
        let env = predict_masked(&p, p.mu, DateTime::UNIX_EPOCH, 2000, 1.0, 400, 5).unwrap();
        let late = &env.std[1000..];
        let avg = late.iter().sum::<f64>() / late.len() as f64;
        let want = p.stationary_variance().sqrt();
        assert!((avg - want).abs() / want < 0.1, "{avg} vs {want}");
    }

    #[test]
    fn envelope_deterministic() {
        let p = truth();
        let a = predict_masked(&p, p.mu, DateTime::UNIX_EPOCH, 100, 1.0, 10, 2).unwrap();
        let b = predict_masked(&p, p.mu, DateTime::UNIX_EPOCH, 100, 1.0, 10, 2).unwrap();
        assert_eq!(a, b);
        assert!(predict_masked(&p, p.mu, DateTime::UNIX_EPOCH, 100, 1.0, 1, 2).is_err());
    }

    #[test]
    fn coverage_examples() {
        let p = truth();
        let env = predict_masked(&p, p.mu, DateTime::UNIX_EPOCH, 50, 1.0, 10, 2).unwrap();
        assert_eq!(coverage(&env, &env.mean).unwrap(), 1.0);
        let above = env.upper.with_values(env.upper.values().iter().map(|v| v + 1.0).collect()).unwrap();
        assert_eq!(coverage(&env, &above).unwrap(), 0.0);
        assert!(coverage(&env, &series(vec![0.0; 3])).is_err());
    }

    proptest! {
        #[test]
        fn masked_round_trip(v in prop::collection::vec((-1e6..1e6f64, 0.0..1e5f64), 1..50)) {
            let net = series(v.iter().map(|x| x.0).collect());
            let pv = series(v.iter().map(|x| x.1).collect());
            let m = masked_from_net(&net, &pv).unwrap();
            for ((m, p), n) in m.values().iter().zip(pv.values()).zip(net.values()) {
                prop_assert!((m - p - n).abs() <= 1e-9 * (n.abs() + p.abs() + 1.0));
            }
        }

        #[test]
        fn stats_symmetric_and_affine(
            v in prop::collection::vec(-100.0..100.0f64, 20..200),
            a in 0.1..10.0f64,
            b in -1e3..1e3f64,
        ) {
            let s = series(v.clone());
            prop_assume!(stat_vector(&s, 5).is_ok());
            let base = stat_vector(&s, 5).unwrap();
            let rev = stat_vector(&series(v.iter().rev().copied().collect()), 5).unwrap();
            prop_assert!((base.ac_norm - rev.ac_norm).abs() <= 1e-9);
            let scaled = stat_vector(&series(v.iter().map(|x| a * x + b).collect()), 5).unwrap();
            prop_assert!((scaled.mean - (a * base.mean + b)).abs() <= 1e-9 * (1.0 + scaled.mean.abs()));
            prop_assert!((scaled.std - a * base.std).abs() <= 1e-9 * (1.0 + scaled.std));
            prop_assert!((scaled.ac_norm - base.ac_norm).abs() <= 1e-9);
        }

        #[test]
        fn wider_band_never_covers_less(seed in 0u64..1000, shift in -3000.0..3000.0f64) {
            let p = truth();
            let env = predict_masked(&p, p.mu, DateTime::UNIX_EPOCH, 100, 1.0, 10, seed).unwrap();
            let (truth_path, _) = simulate_em(&p, p.mu + shift, 99, 1.0, seed + 1).unwrap();
            let truth_path = env.mean.with_values(truth_path.into_values()).unwrap();
            let c2 = coverage(&env, &truth_path).unwrap();
            let c3 = coverage(&env.widened(3.0).unwrap(), &truth_path).unwrap();
            prop_assert!(c3 >= c2);
            prop_assert!((0.0..=1.0).contains(&c2));
        }
    }
}
