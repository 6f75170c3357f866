//! Subcommand bodies. Each writes its files under the output directory and
//! returns the lines to print.

use std::fs;
use std::path::{Path, PathBuf};

use pvdisagg::gp::{GpKernelParams, SiteLayout};
use pvdisagg::io::{
    kernel_to_string, kv_line, ou_params_from_table, ou_params_to_string, plant_to_string,
    read_envelope_csv, read_irradiance_csv, read_key_values, read_kernel, read_load_csv,
    read_ou_params, read_pv_csv, read_series_csv, read_sites_csv, write_envelope_csv,
    write_irradiance_csv, write_jumps_csv, write_load_csv, write_pv_csv, write_series_csv,
    write_sites_csv, write_text, KeyValues,
};
use pvdisagg::ou::{estimate_params, EstimationReport, OuParams};
use pvdisagg::timeseries::{downsample, IrradiancePanel, UniformSeries};
use pvdisagg::disagg::coverage;
use pvdisagg::{Error, Result};

use crate::config::ScenarioConfig;
use crate::pipeline::{
    align, disaggregate, errors, fit_gp, parameter_table, predict_pv, site_means,
    Disaggregation, DisaggregationSettings,
};
use crate::scenario::{generate, load_layout, load_plant};

/// What a command reports back to the caller.
#[derive(Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    /// The best calibration ran out of evaluations.
    pub budget_exhausted: bool,
}

impl Outcome {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    fn wrote(&mut self, path: &Path) {
        self.say(format!("wrote {}", path.display()));
    }
}

/// Shared context: resolved configuration and output directory.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ScenarioConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: ScenarioConfig, out_dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(Self { config, out_dir })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn steps(&self, seconds: f64, dt: f64) -> Result<usize> {
        let n = (seconds / dt).round();
        if !(n >= 1.0) || ((n * dt - seconds).abs() > 1e-6 * seconds.max(1.0)) {
            return Err(Error::InvalidArgument(format!(
                "{seconds} s is not a whole number of {dt} s samples"
            )));
        }
        Ok(n as usize)
    }

    fn layout(&self, sites: Option<&Path>) -> Result<SiteLayout> {
        match sites {
            Some(p) => read_sites_csv(p),
            None => load_layout(&self.config),
        }
    }

    fn plant(&self, plant: Option<&Path>) -> Result<pvdisagg::io::PlantConfig> {
        match plant {
            Some(p) => pvdisagg::io::read_plant(p),
            None => load_plant(&self.config),
        }
    }
}

/// Series file with any single value column.
pub fn read_any_series(path: &Path) -> Result<UniformSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = text.lines().next().unwrap_or_default();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 2 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected `timestamp,<value>` header, found `{header}`"),
        });
    }
    read_series_csv(path, cols[1])
}

pub fn simulate(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let s = generate(cfg)?;
    let mut out = Outcome::default();

    let p = ctx.out("sites.csv");
    write_sites_csv(&p, &s.layout)?;
    out.wrote(&p);
    let p = ctx.out("plant.txt");
    write_text(&p, &plant_to_string(&s.plant))?;
    out.wrote(&p);
    let p = ctx.out("irradiance.csv");
    write_irradiance_csv(&p, &s.irradiance)?;
    out.wrote(&p);
    let p = ctx.out("pv_true.csv");
    write_pv_csv(&p, &s.pv)?;
    out.wrote(&p);
    let p = ctx.out("masked_true.csv");
    write_load_csv(&p, &s.masked)?;
    out.wrote(&p);
    let p = ctx.out("net.csv");
    write_load_csv(&p, &s.net)?;
    out.wrote(&p);
    let p = ctx.out("jumps.csv");
    write_jumps_csv(&p, &s.jumps)?;
    out.wrote(&p);

    let observed: Vec<String> = cfg.observed.iter().map(|s| format!("{s:?}")).collect();
    let truth = format!(
        "seed = {}\nobserved = [{}]\n\n[kernel]\n{}\n[ou]\n{}",
        cfg.seed,
        observed.join(", "),
        kernel_to_string(&cfg.kernel, None),
        ou_params_to_string(&cfg.ou)
    );
    let p = ctx.out("truth.txt");
    write_text(&p, &truth)?;
    out.wrote(&p);
    out.say(format!(
        "{} samples at {} s, {} sites, mean pv {:.1} W",
        s.net.len(),
        cfg.dt,
        s.layout.len(),
        s.pv.mean()
    ));
    Ok(out)
}

pub struct FitGpArgs<'a> {
    pub irradiance: &'a Path,
    pub sites: Option<&'a Path>,
    pub init: Option<&'a Path>,
    pub window_s: Option<f64>,
}

pub fn fit_gp_cmd(ctx: &Context, a: &FitGpArgs) -> Result<Outcome> {
    let irradiance = read_irradiance_csv(a.irradiance)?;
    let layout = ctx.layout(a.sites)?;
    let init = match a.init {
        Some(p) => read_kernel(p)?,
        None => ctx.config.kernel_init,
    };
    let rows = ctx.steps(a.window_s.unwrap_or(ctx.config.gp_window_s), irradiance.dt())?;
    let fit = fit_gp(&irradiance, &layout, &init, rows)?;
    let mut out = Outcome::default();
    let p = ctx.out("kernel.txt");
    write_text(&p, &kernel_to_string(&fit.params, Some(fit.residual)))?;
    out.wrote(&p);
    out.say(format!(
        "alpha {:e} beta {:e} theta_x {} theta_y {} residual {:e}",
        fit.params.alpha, fit.params.beta, fit.params.theta_x, fit.params.theta_y, fit.residual
    ));
    if !fit.converged {
        out.say("warning: kernel fit stopped before converging");
    }
    Ok(out)
}

pub struct PredictPvArgs<'a> {
    pub kernel: &'a Path,
    pub irradiance: &'a Path,
    pub sites: Option<&'a Path>,
    pub plant: Option<&'a Path>,
    pub observed: Option<Vec<String>>,
    pub history_s: Option<f64>,
}

fn predicted_pv(
    ctx: &Context,
    kernel: &GpKernelParams,
    irradiance: &IrradiancePanel,
    a_sites: Option<&Path>,
    a_plant: Option<&Path>,
    observed: &[String],
    history_s: Option<f64>,
) -> Result<UniformSeries> {
    let layout = ctx.layout(a_sites)?;
    let plant = ctx.plant(a_plant)?;
    let rows = ctx.steps(history_s.unwrap_or(ctx.config.gp_window_s), irradiance.dt())?;
    let means = site_means(irradiance, rows)?;
    predict_pv(kernel, &layout, irradiance, observed, Some(&means), &plant)
}

pub fn predict_pv_cmd(ctx: &Context, a: &PredictPvArgs) -> Result<Outcome> {
    let kernel = read_kernel(a.kernel)?;
    let irradiance = read_irradiance_csv(a.irradiance)?;
    let observed = a.observed.clone().unwrap_or_else(|| ctx.config.observed.clone());
    let pv = predicted_pv(ctx, &kernel, &irradiance, a.sites, a.plant, &observed, a.history_s)?;
    let mut out = Outcome::default();
    let p = ctx.out("pv_pred.csv");
    write_pv_csv(&p, &pv)?;
    out.wrote(&p);
    out.say(format!("{} samples, mean {:.1} W", pv.len(), pv.mean()));
    Ok(out)
}

fn estimation_text(r: &EstimationReport, n: usize) -> String {
    let mut s = format!("samples = {n}\njumps = {}\n", r.jumps.len());
    s.push_str(&kv_line("residual_mean", r.residual_mean));
    s.push_str(&kv_line("residual_std", r.residual_std));
    s.push_str(&format!("jump_sizes_fitted = {}\n", r.jump_sizes_fitted));
    s.push_str(&kv_line("ks_gaussian_statistic", r.ks_gaussian.statistic));
    s.push_str(&format!("ks_gaussian_pass = {}\n", r.ks_gaussian.pass));
    if let Some(k) = r.ks_gamma {
        s.push_str(&kv_line("ks_gamma_statistic", k.statistic));
        s.push_str(&format!("ks_gamma_pass = {}\n", k.pass));
    }
    s
}

pub fn estimate_ou_cmd(ctx: &Context, load: &Path) -> Result<Outcome> {
    let series = read_load_csv(load)?;
    let r = estimate_params(&series)?;
    let mut out = Outcome::default();
    let p = ctx.out("theta_rough.txt");
    write_text(&p, &ou_params_to_string(&r.params))?;
    out.wrote(&p);
    let p = ctx.out("jumps_detected.csv");
    write_jumps_csv(&p, &r.jumps)?;
    out.wrote(&p);
    let p = ctx.out("estimate_report.txt");
    write_text(&p, &estimation_text(&r, series.len()))?;
    out.wrote(&p);
    let q = r.params;
    out.say(format!(
        "gamma {:e} mu {} sigma1 {} jumps {} lambda {:e}",
        q.gamma,
        q.mu,
        q.sigma1,
        r.jumps.len(),
        q.lambda
    ));
    if !r.ks_gaussian.pass {
        out.say("warning: residuals fail the KS normality check");
    }
    Ok(out)
}

pub struct DisaggregateArgs<'a> {
    pub net: &'a Path,
    pub pv: Option<&'a Path>,
    pub irradiance: Option<&'a Path>,
    pub kernel: Option<&'a Path>,
    pub sites: Option<&'a Path>,
    pub plant: Option<&'a Path>,
    pub observed: Option<Vec<String>>,
    pub prior: Option<&'a Path>,
    pub truth: Option<&'a Path>,
    pub calibration_s: Option<f64>,
    pub horizon_s: Option<f64>,
}

fn disaggregation_text(d: &Disaggregation, s: &DisaggregationSettings) -> String {
    let mut t = format!(
        "calibration_samples = {}\nhorizon_samples = {}\nrestarts = {}\n",
        s.calibration_steps,
        s.horizon_steps,
        d.runs.len()
    );
    t.push_str(&kv_line("objective", d.best.value));
    t.push_str(&format!(
        "trace_length = {}\nevaluations = {}\nbudget_exhausted = {}\n",
        d.best.trace.len(),
        d.best.evaluations,
        d.best.budget_exhausted
    ));
    if let Some(c) = d.coverage {
        t.push_str(&kv_line("coverage", c));
    }
    t.push_str(&format!(
        "\n[rough]\n{}\n[prior]\n{}\n[calibrated]\n{}",
        ou_params_to_string(&d.rough.params),
        ou_params_to_string(&d.prior),
        ou_params_to_string(&d.best.params)
    ));
    t
}

pub fn disaggregate_cmd(ctx: &Context, a: &DisaggregateArgs) -> Result<Outcome> {
    let cfg = &ctx.config;
    let net = read_load_csv(a.net)?;
    let pv = match (a.pv, a.irradiance) {
        (Some(p), None) => read_pv_csv(p)?,
        (None, Some(ir)) => {
            let kernel = match a.kernel {
                Some(k) => read_kernel(k)?,
                None => {
                    return Err(Error::InvalidArgument(
                        "--irradiance needs --kernel to predict PV".into(),
                    ))
                }
            };
            let irradiance = read_irradiance_csv(ir)?;
            let observed = a.observed.clone().unwrap_or_else(|| cfg.observed.clone());
            predicted_pv(ctx, &kernel, &irradiance, a.sites, a.plant, &observed, None)?
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give exactly one of --pv or --irradiance".into(),
            ))
        }
    };
    let prior = a.prior.map(read_ou_params).transpose()?;
    let truth = a.truth.map(read_load_csv).transpose()?;
    let settings = DisaggregationSettings {
        calibration_steps: ctx.steps(a.calibration_s.unwrap_or(cfg.calibration_s), net.dt())?,
        horizon_steps: ctx.steps(a.horizon_s.unwrap_or(cfg.horizon_s), net.dt())?,
        calibration: cfg.calibration.clone(),
        envelope_realizations: cfg.envelope_realizations,
        seed: cfg.seed,
        init_center: None,
    };
    let d = disaggregate(&net, &pv, prior, truth.as_ref(), &settings)?;

    let mut out = Outcome {
        budget_exhausted: d.budget_exhausted(),
        ..Default::default()
    };
    let p = ctx.out("report.txt");
    write_text(&p, &disaggregation_text(&d, &settings))?;
    out.wrote(&p);
    let p = ctx.out("envelope.csv");
    write_envelope_csv(&p, &d.envelope)?;
    out.wrote(&p);
    let p = ctx.out("masked_est.csv");
    write_load_csv(&p, &d.masked)?;
    out.wrote(&p);
    let b = d.best.params;
    out.say(format!(
        "gamma {:e} mu {} sigma1 {} objective {:e}",
        b.gamma, b.mu, b.sigma1, d.best.value
    ));
    if let Some(c) = d.coverage {
        out.say(format!("coverage {c:.4}"));
    }
    if out.budget_exhausted {
        out.say("evaluation budget exhausted before convergence");
    }
    Ok(out)
}

pub struct EvaluateArgs<'a> {
    pub pred: Option<&'a Path>,
    pub truth: &'a Path,
    pub envelope: Option<&'a Path>,
    pub reference: Option<&'a Path>,
    pub report: Option<&'a Path>,
}

/// Θ from a flat parameter file or from `section` of a sectioned one.
fn ou_section(path: &Path, section: &str) -> Result<OuParams> {
    let t = read_key_values(path)?;
    let origin = format!("{} [{section}]", path.display());
    match t.get(section) {
        Some(toml::Value::Table(s)) => ou_params_from_table(s, &origin),
        Some(_) => Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("`{section}` is not a section"),
        }),
        None => {
            let flat: KeyValues = t.into_iter().filter(|(_, v)| !v.is_table()).collect();
            ou_params_from_table(&flat, &path.display().to_string())
        }
    }
}

pub fn evaluate_cmd(ctx: &Context, a: &EvaluateArgs) -> Result<Outcome> {
    let truth = read_any_series(a.truth)?;
    let envelope = a.envelope.map(read_envelope_csv).transpose()?;
    let pred = match (a.pred, &envelope) {
        (Some(p), _) => read_any_series(p)?,
        (None, Some(e)) => e.mean.clone(),
        (None, None) => {
            return Err(Error::InvalidArgument("give --pred or --envelope".into()))
        }
    };
    let (rmse, mae) = errors(&pred, &truth)?;
    let mut text = format!("samples = {}\n", pred.len());
    text.push_str(&kv_line("rmse", rmse));
    text.push_str(&kv_line("mae", mae));
    let mut out = Outcome::default();
    out.say(format!("rmse {rmse:.4} mae {mae:.4} over {} samples", pred.len()));
    if let Some(e) = &envelope {
        let t = align(&truth, e.mean.start_time(), e.mean.dt(), e.mean.len())?;
        let c = coverage(e, &t)?;
        text.push_str(&kv_line("coverage", c));
        out.say(format!("coverage {c:.4}"));
    }
    if let (Some(r), Some(rep)) = (a.reference, a.report) {
        let reference = ou_section(r, "ou")?;
        let rough = ou_section(rep, "rough")?;
        let cal = ou_section(rep, "calibrated")?;
        let table = parameter_table(
            &reference,
            &[("|ref-rough|", rough), ("|ref-opt|", cal)],
        );
        let p = ctx.out("param_errors.txt");
        write_text(&p, &table)?;
        out.wrote(&p);
        out.lines.extend(table.lines().map(str::to_string));
    } else if a.reference.is_some() || a.report.is_some() {
        return Err(Error::InvalidArgument(
            "the parameter table needs both --reference and --report".into(),
        ));
    }
    let p = ctx.out("metrics.txt");
    write_text(&p, &text)?;
    out.wrote(&p);
    Ok(out)
}

pub fn downsample_cmd(ctx: &Context, input: &Path, factor: usize) -> Result<Outcome> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let column = text
        .lines()
        .next()
        .and_then(|h| h.split(',').nth(1))
        .unwrap_or("value")
        .trim()
        .to_string();
    let series = read_any_series(input)?;
    let ds = downsample(&series, factor)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    let p = ctx.out(&format!("{stem}_x{factor}.csv"));
    write_series_csv(&p, &column, &ds)?;
    let mut out = Outcome::default();
    out.wrote(&p);
    out.say(format!("{} → {} samples at {} s", series.len(), ds.len(), ds.dt()));
    Ok(out)
}
