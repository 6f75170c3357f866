//! Scenario and pipeline settings read from a sectioned `key = value` file.
//!
//! ```text
//! seed = 7
//! dt_s = 1.0
//! observed = ["DH4", "AP5"]
//!
//! [kernel]          # true kernel of the synthetic field
//! alpha = 0.0108
//! ...
//! [ou]              # true masked-load parameters
//! gamma = 0.01
//! ...
//! [calibration]
//! restarts = 50
//! free = ["gamma", "mu", "sigma1"]
//! [calibration.fixed]
//! mu1 = 0.0
//! lambda = 0.0
//! ```

use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use pvdisagg::gp::GpKernelParams;
use pvdisagg::io::{
    kv_check_keys, kv_number, kv_required, ou_params_from_table, parse_key_values, KeyValues,
};
use pvdisagg::ou::{OuParams, PARAM_NAMES};
use pvdisagg::timeseries::Timestamp;
use pvdisagg::{Error, Result};

/// Kernel of the synthetic clear-sky-index field.
pub const TRUE_KERNEL: GpKernelParams = GpKernelParams {
    alpha: 0.0108,
    beta: 0.0001,
    theta_x: 61.6522,
    theta_y: 74.081,
};

/// Starting point of the kernel least-squares fit.
pub const KERNEL_INIT: GpKernelParams = GpKernelParams {
    alpha: 0.015,
    beta: 0.0002,
    theta_x: 40.0,
    theta_y: 100.0,
};

pub fn true_ou() -> OuParams {
    OuParams::diffusion(0.01, 4.0e5, 200.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Number of initial guesses. Around the prior, the first guess is the
    /// prior itself.
    pub restarts: usize,
    /// Initial guesses scale each free component by U[1 − s, 1 + s].
    pub init_spread: f64,
    pub n_realizations: usize,
    pub t1: usize,
    pub w_stats: f64,
    pub w_reg: f64,
    pub max_evals: usize,
    /// Optimized components; `None` uses the library default.
    pub free: Option<[bool; 7]>,
    /// Values pinned for non-free components, in both prior and guesses.
    pub fixed: Vec<(usize, f64)>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            init_spread: 0.6,
            n_realizations: 10,
            t1: pvdisagg::disagg::DEFAULT_LAGS,
            w_stats: 1.0,
            w_reg: 1e-3,
            max_evals: 4000,
            free: None,
            fixed: Vec::new(),
        }
    }
}

impl CalibrationConfig {
    /// Jump-free calibration of γ, μ and σ₁ with μ₁ = 0 and no jumps.
    pub fn diffusion_only() -> Self {
        Self {
            free: Some([true, true, false, true, false, false, false]),
            fixed: vec![(2, 0.0), (4, 1.0), (5, 1.0), (6, 0.0)],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub start: Timestamp,
    pub dt: f64,
    /// Sites file; the built-in 17-site layout when absent.
    pub layout: Option<PathBuf>,
    /// Plant file; the built-in plant when absent.
    pub plant: Option<PathBuf>,
    pub observed: Vec<String>,
    pub kernel: GpKernelParams,
    pub kernel_init: GpKernelParams,
    pub ou: OuParams,
    /// Leading span used for the kernel fit and site means.
    pub gp_window_s: f64,
    /// Leading span of net load used for calibration.
    pub calibration_s: f64,
    /// Held-out span predicted after the calibration window.
    pub horizon_s: f64,
    /// Mean clear-sky GHI, W/m².
    pub clear_sky_wm2: f64,
    pub kappa_mean: f64,
    /// AR(1) coefficient of the shared irradiance driver.
    pub driver_coefficient: f64,
    /// Relative standard deviation of the driver's modulation of G_c.
    pub driver_amplitude: f64,
    pub envelope_realizations: usize,
    pub calibration: CalibrationConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            start: Utc.with_ymd_and_hms(2010, 4, 8, 21, 0, 0).unwrap(),
            dt: 1.0,
            layout: None,
            plant: None,
            observed: vec!["DH4".into(), "AP5".into()],
            kernel: TRUE_KERNEL,
            kernel_init: KERNEL_INIT,
            ou: true_ou(),
            gp_window_s: 3600.0,
            calibration_s: 300.0,
            horizon_s: 300.0,
            clear_sky_wm2: 900.0,
            kappa_mean: 0.7,
            driver_coefficient: 0.99,
            driver_amplitude: 0.05,
            envelope_realizations: 10,
            calibration: CalibrationConfig::default(),
        }
    }
}

fn steps_of(span: f64, dt: f64, name: &str) -> Result<usize> {
    let n = (span / dt).round();
    if !(n >= 1.0) || ((n * dt) - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} = {span} s is not a positive multiple of dt = {dt} s"
        )));
    }
    Ok(n as usize)
}

impl ScenarioConfig {
    pub fn gp_steps(&self) -> Result<usize> {
        steps_of(self.gp_window_s, self.dt, "gp_window_s")
    }

    pub fn calibration_steps(&self) -> Result<usize> {
        steps_of(self.calibration_s, self.dt, "calibration_s")
    }

    pub fn horizon_steps(&self) -> Result<usize> {
        steps_of(self.horizon_s, self.dt, "horizon_s")
    }

    /// Samples in the synthetic timeline: the longer of the kernel and
    /// calibration windows, plus the horizon.
    pub fn total_steps(&self) -> Result<usize> {
        Ok(self.gp_steps()?.max(self.calibration_steps()?) + self.horizon_steps()?)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.kernel_init.validate()?;
        self.ou.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt_s must be positive, got {}", self.dt)));
        }
        self.total_steps()?;
        if self.observed.is_empty() {
            return Err(Error::InvalidArgument("observed site list is empty".into()));
        }
        if !(self.clear_sky_wm2 > 0.0 && self.kappa_mean >= 0.0) {
            return Err(Error::InvalidArgument(
                "clear_sky_wm2 must be positive and kappa_mean non-negative".into(),
            ));
        }
        if !((0.0..1.0).contains(&self.driver_coefficient) && (0.0..1.0).contains(&self.driver_amplitude)) {
            return Err(Error::InvalidArgument(
                "driver_coefficient and driver_amplitude must lie in [0, 1)".into(),
            ));
        }
        if self.envelope_realizations < 2 {
            return Err(Error::InvalidArgument("envelope_realizations must be at least 2".into()));
        }
        let c = &self.calibration;
        if c.restarts == 0 || c.n_realizations == 0 || !(0.0..1.0).contains(&c.init_spread) {
            return Err(Error::InvalidArgument(
                "calibration needs restarts >= 1, n_realizations >= 1 and init_spread in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Paths in the file are taken relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_at(&text, &path.display().to_string(), base)
    }

    pub fn from_str_at(text: &str, origin: &str, base: &Path) -> Result<Self> {
        let t = parse_key_values(text, origin)?;
        kv_check_keys(
            &t,
            &[
                "seed",
                "start",
                "dt_s",
                "layout",
                "plant",
                "observed",
                "gp_window_s",
                "calibration_s",
                "horizon_s",
                "clear_sky_wm2",
                "kappa_mean",
                "driver_coefficient",
                "driver_amplitude",
                "envelope_realizations",
                "kernel",
                "kernel_init",
                "ou",
                "calibration",
            ],
            origin,
        )?;
        let mut c = Self::default();
        if let Some(v) = t.get("seed") {
            c.seed = as_count(v, "seed", origin)? as u64;
        }
        if let Some(v) = t.get("start") {
            let s = as_str(v, "start", origin)?;
            c.start = pvdisagg::io::parse_timestamp(s)
                .map_err(|m| Error::InvalidArgument(format!("{origin}: start: {m}")))?;
        }
        for (key, slot) in [
            ("dt_s", &mut c.dt),
            ("gp_window_s", &mut c.gp_window_s),
            ("calibration_s", &mut c.calibration_s),
            ("horizon_s", &mut c.horizon_s),
            ("clear_sky_wm2", &mut c.clear_sky_wm2),
            ("kappa_mean", &mut c.kappa_mean),
            ("driver_coefficient", &mut c.driver_coefficient),
            ("driver_amplitude", &mut c.driver_amplitude),
        ] {
            if let Some(v) = kv_number(&t, key, origin)? {
                *slot = v;
            }
        }
        if let Some(v) = t.get("envelope_realizations") {
            c.envelope_realizations = as_count(v, "envelope_realizations", origin)?;
        }
        for (key, slot) in [("layout", &mut c.layout), ("plant", &mut c.plant)] {
            if let Some(v) = t.get(key) {
                *slot = Some(base.join(as_str(v, key, origin)?));
            }
        }
        if let Some(v) = t.get("observed") {
            c.observed = as_str_list(v, "observed", origin)?;
        }
        if let Some(k) = table(&t, "kernel", origin)? {
            c.kernel = kernel_from(k, origin)?;
        }
        if let Some(k) = table(&t, "kernel_init", origin)? {
            c.kernel_init = kernel_from(k, origin)?;
        }
        if let Some(o) = table(&t, "ou", origin)? {
            c.ou = ou_params_from_table(o, origin)?;
        }
        if let Some(cal) = table(&t, "calibration", origin)? {
            c.calibration = calibration_from(cal, origin)?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn table<'a>(t: &'a KeyValues, key: &str, origin: &str) -> Result<Option<&'a KeyValues>> {
    match t.get(key) {
        None => Ok(None),
        Some(toml::Value::Table(s)) => Ok(Some(s)),
        Some(_) => Err(Error::InvalidArgument(format!("{origin}: {key} must be a [section]"))),
    }
}

fn as_str<'a>(v: &'a toml::Value, key: &str, origin: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::InvalidArgument(format!("{origin}: {key} must be a quoted string")))
}

fn as_count(v: &toml::Value, key: &str, origin: &str) -> Result<usize> {
    match v.as_integer() {
        Some(n) if n >= 0 => Ok(n as usize),
        _ => Err(Error::InvalidArgument(format!(
            "{origin}: {key} must be a non-negative integer"
        ))),
    }
}

fn as_str_list(v: &toml::Value, key: &str, origin: &str) -> Result<Vec<String>> {
    let bad = || Error::InvalidArgument(format!("{origin}: {key} must be a list of strings"));
    v.as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|s| s.as_str().map(str::to_string).ok_or_else(bad))
        .collect()
}

fn kernel_from(t: &KeyValues, origin: &str) -> Result<GpKernelParams> {
    kv_check_keys(t, &["alpha", "beta", "theta_x", "theta_y"], origin)?;
    GpKernelParams::new(
        kv_required(t, "alpha", origin)?,
        kv_required(t, "beta", origin)?,
        kv_required(t, "theta_x", origin)?,
        kv_required(t, "theta_y", origin)?,
    )
}

fn param_index(name: &str, origin: &str) -> Result<usize> {
    PARAM_NAMES.iter().position(|p| *p == name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "{origin}: unknown parameter {name} (expected one of {})",
            PARAM_NAMES.join(", ")
        ))
    })
}

fn calibration_from(t: &KeyValues, origin: &str) -> Result<CalibrationConfig> {
    kv_check_keys(
        t,
        &[
            "restarts",
            "init_spread",
            "n_realizations",
            "t1",
            "w_stats",
            "w_reg",
            "max_evals",
            "free",
            "fixed",
        ],
        origin,
    )?;
    let mut c = CalibrationConfig::default();
    for (key, slot) in [
        ("restarts", &mut c.restarts),
        ("n_realizations", &mut c.n_realizations),
        ("t1", &mut c.t1),
        ("max_evals", &mut c.max_evals),
    ] {
        if let Some(v) = t.get(key) {
            *slot = as_count(v, key, origin)?;
        }
    }
    for (key, slot) in [
        ("init_spread", &mut c.init_spread),
        ("w_stats", &mut c.w_stats),
        ("w_reg", &mut c.w_reg),
    ] {
        if let Some(v) = kv_number(t, key, origin)? {
            *slot = v;
        }
    }
    match t.get("free") {
        None => {}
        Some(toml::Value::String(s)) if s == "default" => {
            c.free = None;
            c.fixed.clear();
        }
        Some(v) => {
            let mut mask = [false; 7];
            for name in as_str_list(v, "free", origin)? {
                mask[param_index(&name, origin)?] = true;
            }
            c.free = Some(mask);
            c.fixed.retain(|(i, _)| !mask[*i]);
        }
    }
    if let Some(f) = table(t, "fixed", origin)? {
        c.fixed.clear();
        for k in f.keys() {
            let i = param_index(k, origin)?;
            c.fixed.push((i, kv_required(f, k, origin)?));
        }
    }
    Ok(c)
}
