//! Synthetic ground truth: a clear-sky-index field drawn from the spatial
//! kernel at every timestep, clear-sky irradiance modulated by a shared
//! AR(1) driver, the resulting fleet PV output, and an OU masked load.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pvdisagg::gp::{build_cov, SiteLayout};
use pvdisagg::io::{read_plant, read_sites_csv, PlantConfig};
use pvdisagg::ou::{simulate_em_with, Innovations, JumpRecord};
use pvdisagg::pv::{aggregate_pv, TranspositionInputs};
use pvdisagg::timeseries::{IrradiancePanel, KappaPanel, UniformSeries};
use pvdisagg::{Error, Result};

use crate::config::ScenarioConfig;

const FIELD_STREAM: u64 = 0;
const DRIVER_STREAM: u64 = 1;
const LOAD_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub layout: SiteLayout,
    pub plant: PlantConfig,
    pub irradiance: IrradiancePanel,
    pub kappa: KappaPanel,
    pub pv: UniformSeries,
    pub masked: UniformSeries,
    pub net: UniformSeries,
    pub jumps: Vec<JumpRecord>,
}

pub fn load_layout(cfg: &ScenarioConfig) -> Result<SiteLayout> {
    match &cfg.layout {
        Some(p) => read_sites_csv(p),
        None => Ok(pvdisagg::gp::oahu_like_layout()),
    }
}

pub fn load_plant(cfg: &ScenarioConfig) -> Result<PlantConfig> {
    match &cfg.plant {
        Some(p) => read_plant(p),
        None => Ok(PlantConfig::default()),
    }
}

/// κ field, one row per timestep, drawn independently per row from the
/// kernel around `kappa_mean` and truncated at zero.
fn draw_field(cfg: &ScenarioConfig, layout: &SiteLayout, n: usize) -> Result<DMatrix<f64>> {
    let cov = build_cov(&cfg.kernel, layout)?;
    let l = cov
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericFailure("kernel matrix is not positive definite".into()))?
        .l();
    let d = layout.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(FIELD_STREAM);
    let mut out = DMatrix::zeros(n, d);
    for t in 0..n {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &l * z;
        for c in 0..d {
            out[(t, c)] = (cfg.kappa_mean + x[c]).max(0.0);
        }
    }
    Ok(out)
}

/// Clear-sky GHI per timestep: the base level scaled by 1 + a·u_t with u_t a
/// unit-variance AR(1) sequence.
fn draw_clear_sky(cfg: &ScenarioConfig, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(DRIVER_STREAM);
    let phi = cfg.driver_coefficient;
    let innov = (1.0 - phi * phi).sqrt();
    let mut u: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|_| {
            let g = cfg.clear_sky_wm2 * (1.0 + cfg.driver_amplitude * u).max(0.0);
            u = phi * u + innov * rng.sample::<f64, _>(StandardNormal);
            g
        })
        .collect()
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let layout = load_layout(cfg)?;
    let plant = load_plant(cfg)?;
    for id in &cfg.observed {
        if layout.index_of(id).is_none() {
            return Err(Error::InvalidArgument(format!("observed site {id} is not in the layout")));
        }
    }
    let n = cfg.total_steps()?;
    let ids = layout.site_ids().to_vec();
    let kappa = draw_field(cfg, &layout, n)?;
    let gc_t = draw_clear_sky(cfg, n);
    let gc = DMatrix::from_fn(n, ids.len(), |t, _| gc_t[t]);
    let ghi = DMatrix::from_fn(n, ids.len(), |t, c| kappa[(t, c)] * gc_t[t]);
    let irradiance = IrradiancePanel::new(cfg.start, cfg.dt, ids.clone(), ghi, gc.clone())?;
    let kappa = KappaPanel::new(cfg.start, cfg.dt, ids.clone(), kappa)?;

    let pv = aggregate_pv(
        &kappa,
        &gc,
        &TranspositionInputs::constant(plant.transposition),
        &plant.sites_for(&ids),
    )?;

    let noise = Innovations::draw(n - 1, cfg.seed, LOAD_STREAM);
    let (path, jumps) = simulate_em_with(&cfg.ou, cfg.ou.mu, cfg.dt, &noise)?;
    let masked = UniformSeries::new(cfg.start, cfg.dt, path)?;
    let net = masked.with_values(
        masked
            .values()
            .iter()
            .zip(pv.values())
            .map(|(m, p)| m - p)
            .collect(),
    )?;
    Ok(Scenario {
        layout,
        plant,
        irradiance,
        kappa,
        pv,
        masked,
        net,
        jumps,
    })
}
