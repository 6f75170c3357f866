use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Gamma};

use super::{JumpRecord, OuParams};
use crate::error::{Error, Result};
use crate::timeseries::{Timestamp, UniformSeries};

/// Pre-drawn random inputs for one path.
///
/// Every step consumes the same four variates whatever the parameters, so
/// re-simulating one `Innovations` under different Θ gives common random
/// numbers: the jump draw fires when `jump_u < λ·dt` and its size is the
/// Gamma quantile of `size_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovations {
    pub normal: Vec<f64>,
    pub jump_u: Vec<f64>,
    pub size_u: Vec<f64>,
    pub negative: Vec<bool>,
}

impl Innovations {
    /// `steps` draws from the ChaCha8 stream `(seed, stream)`.
    pub fn draw(steps: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut out = Self::with_capacity(steps);
        for _ in 0..steps {
            out.normal.push(rng.sample(StandardNormal));
            out.jump_u.push(rng.random::<f64>());
            out.size_u.push(rng.random::<f64>());
            out.negative.push(rng.random::<bool>());
        }
        out
    }

    /// No diffusion noise and no jumps.
    pub fn zeros(steps: usize) -> Self {
        Self {
            normal: vec![0.0; steps],
            jump_u: vec![1.0; steps],
            size_u: vec![0.5; steps],
            negative: vec![false; steps],
        }
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            normal: Vec::with_capacity(n),
            jump_u: Vec::with_capacity(n),
            size_u: Vec::with_capacity(n),
            negative: Vec::with_capacity(n),
        }
    }

    pub fn steps(&self) -> usize {
        self.normal.len()
    }
}

fn check_inputs(params: &OuParams, x0: f64, steps: usize, dt: f64) -> Result<()> {
    params.validate()?;
    if steps == 0 {
        return Err(Error::invalid("simulation needs at least one step"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !x0.is_finite() {
        return Err(Error::invalid("initial value must be finite"));
    }
    if params.lambda * dt > 1.0 {
        return Err(Error::invalid(format!(
            "λ·dt = {} exceeds 1; the per-step jump probability is undefined",
            params.lambda * dt
        )));
    }
    Ok(())
}

/// Total increment of step i excluding the drift toward μ, plus the jump.
struct StepNoise<'a> {
    params: &'a OuParams,
    dt: f64,
    sqrt_dt: f64,
    jump_prob: f64,
    sizes: Option<Gamma>,
}

impl<'a> StepNoise<'a> {
    fn new(params: &'a OuParams, dt: f64) -> Self {
        let jump_prob = params.lambda * dt;
        let sizes = (jump_prob > 0.0).then(|| {
            Gamma::new(params.k, 1.0 / params.theta).expect("validated shape and scale")
        });
        Self {
            params,
            dt,
            sqrt_dt: dt.sqrt(),
            jump_prob,
            sizes,
        }
    }

    /// (diffusion increment, jump)
    fn at(&self, noise: &Innovations, i: usize) -> (f64, f64) {
        let diffusion = self.params.sigma1 * self.sqrt_dt * noise.normal[i] + self.params.mu1 * self.dt;
        let jump = match &self.sizes {
            Some(g) if noise.jump_u[i] < self.jump_prob => {
                let size = g.inverse_cdf(noise.size_u[i]);
                if noise.negative[i] {
                    -size
                } else {
                    size
                }
            }
            _ => 0.0,
        };
        (diffusion, jump)
    }
}

/// Euler–Maruyama path driven by explicit innovations. Returns the
/// `steps + 1` samples x₀…xₙ and the jumps that fired.
pub fn simulate_em_with(
    params: &OuParams,
    x0: f64,
    dt: f64,
    noise: &Innovations,
) -> Result<(Vec<f64>, Vec<JumpRecord>)> {
    let steps = noise.steps();
    check_inputs(params, x0, steps, dt)?;
    let step = StepNoise::new(params, dt);
    let decay = params.gamma * dt;
    let mut path = Vec::with_capacity(steps + 1);
    let mut jumps = Vec::new();
    let mut x = x0;
    path.push(x);
    for i in 0..steps {
        let (diffusion, jump) = step.at(noise, i);
        x += decay * (params.mu - x) + diffusion + jump;
        if jump != 0.0 {
            jumps.push(JumpRecord {
                index: i + 1,
                magnitude: jump,
            });
        }
        path.push(x);
    }
    Ok((path, jumps))
}

/// Discretized closed-form solution driven by explicit innovations:
///
/// ```text
/// xᵢ = μ + (x₀ − μ)e^{−iγΔt} + Σⱼ e^{−γ(i−j+1)Δt}(σ₁ΔWⱼ + μ₁Δt + Jⱼ)
/// ```
///
/// evaluated with a running sum, so the cost is linear in the step count.
pub fn simulate_exact_with(
    params: &OuParams,
    x0: f64,
    dt: f64,
    noise: &Innovations,
) -> Result<Vec<f64>> {
    let steps = noise.steps();
    check_inputs(params, x0, steps, dt)?;
    let step = StepNoise::new(params, dt);
    let rho = (-params.gamma * dt).exp();
    let mut path = Vec::with_capacity(steps + 1);
    path.push(x0);
    let mut relax = 1.0;
    let mut acc = 0.0;
    for i in 0..steps {
        let (diffusion, jump) = step.at(noise, i);
        acc = rho * acc + diffusion + jump;
        relax *= rho;
        path.push(params.mu + (x0 - params.mu) * relax + rho * acc);
    }
    Ok(path)
}

fn epoch() -> Timestamp {
    DateTime::UNIX_EPOCH
}

/// Seeded Euler–Maruyama path of `steps` steps (`steps + 1` samples, the
/// first being `x0`), timestamped from the Unix epoch.
pub fn simulate_em(
    params: &OuParams,
    x0: f64,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<(UniformSeries, Vec<JumpRecord>)> {
    let noise = Innovations::draw(steps, seed, 0);
    let (path, jumps) = simulate_em_with(params, x0, dt, &noise)?;
    Ok((UniformSeries::new(epoch(), dt, path)?, jumps))
}

/// Seeded closed-form path sharing the innovation stream of [`simulate_em`]
/// for the same seed.
pub fn simulate_exact(
    params: &OuParams,
    x0: f64,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<UniformSeries> {
    let noise = Innovations::draw(steps, seed, 0);
    UniformSeries::new(epoch(), dt, simulate_exact_with(params, x0, dt, &noise)?)
}
