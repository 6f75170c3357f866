//! File formats: CSV time series with RFC 3339 UTC timestamps, and flat
//! `key = value` files with optional `[section]` headers for kernels, OU
//! parameters and plant descriptions.
//!
//! Writers are deterministic, so write → read → write reproduces a file
//! byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use nalgebra::DMatrix;

use crate::disagg::PredictionEnvelope;
use crate::error::{Error, Result};
use crate::gp::{GpKernelParams, SiteLayout};
use crate::ou::{JumpRecord, OuParams, PARAM_NAMES};
use crate::pv::{default_site, InverterRatings, PvSite, TranspositionStep};
use crate::timeseries::{grid_time, IrradiancePanel, Timestamp, UniformSeries};

/// Allowed deviation of a timestamp from the inferred uniform grid.
const GRID_TOLERANCE_NS: i64 = 1_000;

pub fn format_timestamp(t: Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// RFC 3339, or a naive `YYYY-MM-DD[T ]HH:MM:SS[.fff]` taken as UTC.
pub fn parse_timestamp(s: &str) -> std::result::Result<Timestamp, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(format!("invalid timestamp {s:?}"))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

/// Rows of a headed CSV file after checking the header, as
/// (line number, fields).
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    if got != header {
        return Err(parse_error(
            path,
            1,
            format!("expected header {}, found {}", header.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    Ok(rows)
}

fn field_f64(path: &Path, line: usize, name: &str, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(path, line, format!("{name}: invalid number {s:?}"))),
    }
}

fn field_time(path: &Path, line: usize, s: &str) -> Result<Timestamp> {
    parse_timestamp(s).map_err(|m| parse_error(path, line, m))
}

/// Start and step of strictly increasing timestamps that lie on a uniform
/// grid. A single timestamp gets a 1 s step.
fn infer_grid(path: &Path, times: &[(usize, Timestamp)]) -> Result<(Timestamp, f64)> {
    let t0 = times[0].1;
    if times.len() == 1 {
        return Ok((t0, 1.0));
    }
    for w in times.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(parse_error(path, w[1].0, "timestamps must be strictly increasing"));
        }
    }
    let span = (times[times.len() - 1].1 - t0)
        .num_nanoseconds()
        .ok_or_else(|| parse_error(path, times[times.len() - 1].0, "time span too large"))?;
    let dt = span as f64 / 1e9 / (times.len() - 1) as f64;
    for (i, (line, t)) in times.iter().enumerate() {
        let off = (*t - grid_time(t0, dt, i)).num_nanoseconds().unwrap_or(i64::MAX);
        if off.abs() > GRID_TOLERANCE_NS {
            return Err(parse_error(
                path,
                *line,
                format!("timestamp is off the uniform {dt} s grid by {} s", off as f64 / 1e9),
            ));
        }
    }
    Ok((t0, dt))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_records<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = writer(path)?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Two-column series file `timestamp,<column>`.
pub fn read_series_csv(path: &Path, column: &str) -> Result<UniformSeries> {
    let rows = read_rows(path, &["timestamp", column])?;
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        times.push((*line, field_time(path, *line, &f[0])?));
        values.push(field_f64(path, *line, column, &f[1])?);
    }
    let (t0, dt) = infer_grid(path, &times)?;
    UniformSeries::new(t0, dt, values)
}

pub fn write_series_csv(path: &Path, column: &str, series: &UniformSeries) -> Result<()> {
    let rows = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![format_timestamp(series.time_at(i)), v.to_string()]);
    write_records(path, &["timestamp", column], rows)
}

/// Load file: `timestamp,power_w`.
pub fn read_load_csv(path: &Path) -> Result<UniformSeries> {
    read_series_csv(path, "power_w")
}

pub fn write_load_csv(path: &Path, series: &UniformSeries) -> Result<()> {
    write_series_csv(path, "power_w", series)
}

/// PV file: `timestamp,p_pv_w`.
pub fn read_pv_csv(path: &Path) -> Result<UniformSeries> {
    read_series_csv(path, "p_pv_w")
}

pub fn write_pv_csv(path: &Path, series: &UniformSeries) -> Result<()> {
    write_series_csv(path, "p_pv_w", series)
}

type GhiPair = (f64, f64);

const IRRADIANCE_HEADER: [&str; 4] = ["timestamp", "site_id", "ghi_wm2", "ghi_clear_wm2"];

/// Long-format irradiance `timestamp,site_id,ghi_wm2,ghi_clear_wm2`. Sites
/// keep their order of first appearance; every site must report at every
/// timestamp exactly once.
pub fn read_irradiance_csv(path: &Path) -> Result<IrradiancePanel> {
    let rows = read_rows(path, &IRRADIANCE_HEADER)?;
    let mut site_ids: Vec<String> = Vec::new();
    // first line seen, then (ghi, ghi_clear) per site
    let mut by_time: BTreeMap<Timestamp, (usize, Vec<Option<GhiPair>>)> = BTreeMap::new();
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        let t = field_time(path, *line, &f[0])?;
        let site = f[1].clone();
        if site.is_empty() {
            return Err(parse_error(path, *line, "empty site_id"));
        }
        let g = field_f64(path, *line, "ghi_wm2", &f[2])?;
        let gc = field_f64(path, *line, "ghi_clear_wm2", &f[3])?;
        if g < 0.0 || gc < 0.0 {
            return Err(parse_error(path, *line, "irradiance must be non-negative"));
        }
        let col = match site_ids.iter().position(|s| *s == site) {
            Some(c) => c,
            None => {
                site_ids.push(site);
                site_ids.len() - 1
            }
        };
        parsed.push((*line, t, col, g, gc));
    }
    let n_sites = site_ids.len();
    for &(line, t, col, g, gc) in &parsed {
        let entry = by_time.entry(t).or_insert_with(|| (line, vec![None; n_sites]));
        if entry.1[col].is_some() {
            return Err(parse_error(
                path,
                line,
                format!("duplicate row for site {} at {}", site_ids[col], format_timestamp(t)),
            ));
        }
        entry.1[col] = Some((g, gc));
    }
    let times: Vec<(usize, Timestamp)> = by_time.iter().map(|(t, (l, _))| (*l, *t)).collect();
    let (t0, dt) = infer_grid(path, &times)?;
    let n = times.len();
    let mut ghi = DMatrix::zeros(n, n_sites);
    let mut gc = DMatrix::zeros(n, n_sites);
    for (r, (t, (line, cells))) in by_time.iter().enumerate() {
        for (c, cell) in cells.iter().enumerate() {
            let (g, k) = cell.ok_or_else(|| {
                parse_error(
                    path,
                    *line,
                    format!("site {} has no row at {}", site_ids[c], format_timestamp(*t)),
                )
            })?;
            ghi[(r, c)] = g;
            gc[(r, c)] = k;
        }
    }
    IrradiancePanel::new(t0, dt, site_ids, ghi, gc)
}

pub fn write_irradiance_csv(path: &Path, panel: &IrradiancePanel) -> Result<()> {
    let (ghi, gc) = (panel.ghi(), panel.ghi_clear());
    let rows = (0..panel.n_times()).flat_map(|r| {
        let ts = format_timestamp(grid_time(panel.start_time(), panel.dt(), r));
        panel.site_ids().iter().enumerate().map(move |(c, id)| {
            vec![
                ts.clone(),
                id.clone(),
                ghi[(r, c)].to_string(),
                gc[(r, c)].to_string(),
            ]
        })
    });
    write_records(path, &IRRADIANCE_HEADER, rows)
}

/// Sites file with either `site_id,lat_deg,lon_deg` (projected to km) or
/// `site_id,x_km,y_km`.
pub fn read_sites_csv(path: &Path) -> Result<SiteLayout> {
    let geographic = {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let h = rdr.headers().map_err(|e| csv_error(path, e))?;
        h.get(1).map(str::to_ascii_lowercase).as_deref() == Some("lat_deg")
    };
    let header: [&str; 3] = if geographic {
        ["site_id", "lat_deg", "lon_deg"]
    } else {
        ["site_id", "x_km", "y_km"]
    };
    let rows = read_rows(path, &header)?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut coords = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        if f[0].is_empty() {
            return Err(parse_error(path, *line, "empty site_id"));
        }
        if ids.contains(&f[0]) {
            return Err(parse_error(path, *line, format!("duplicate site id {}", f[0])));
        }
        ids.push(f[0].clone());
        coords.push((
            field_f64(path, *line, header[1], &f[1])?,
            field_f64(path, *line, header[2], &f[2])?,
        ));
    }
    if geographic {
        SiteLayout::from_lat_lon(ids, &coords)
    } else {
        SiteLayout::new(ids, coords)
    }
}

pub fn write_sites_csv(path: &Path, layout: &SiteLayout) -> Result<()> {
    let rows = layout
        .site_ids()
        .iter()
        .zip(layout.coords())
        .map(|(id, (x, y))| vec![id.clone(), x.to_string(), y.to_string()]);
    write_records(path, &["site_id", "x_km", "y_km"], rows)
}

const ENVELOPE_HEADER: [&str; 4] = ["timestamp", "mean_w", "lower_w", "upper_w"];

pub fn write_envelope_csv(path: &Path, env: &PredictionEnvelope) -> Result<()> {
    let rows = (0..env.mean.len()).map(|i| {
        vec![
            format_timestamp(env.mean.time_at(i)),
            env.mean.values()[i].to_string(),
            env.lower.values()[i].to_string(),
            env.upper.values()[i].to_string(),
        ]
    });
    write_records(path, &ENVELOPE_HEADER, rows)
}

/// Reads an envelope file; σ is recovered as (upper − lower)/4 and the
/// realization count is unknown (reported as 0).
pub fn read_envelope_csv(path: &Path) -> Result<PredictionEnvelope> {
    let rows = read_rows(path, &ENVELOPE_HEADER)?;
    let mut times = Vec::with_capacity(rows.len());
    let (mut m, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
    for (line, f) in &rows {
        times.push((*line, field_time(path, *line, &f[0])?));
        let vals = [
            field_f64(path, *line, "mean_w", &f[1])?,
            field_f64(path, *line, "lower_w", &f[2])?,
            field_f64(path, *line, "upper_w", &f[3])?,
        ];
        if !(vals[1] <= vals[0] && vals[0] <= vals[2]) {
            return Err(parse_error(path, *line, "need lower_w <= mean_w <= upper_w"));
        }
        m.push(vals[0]);
        lo.push(vals[1]);
        hi.push(vals[2]);
    }
    let (t0, dt) = infer_grid(path, &times)?;
    let std = lo.iter().zip(&hi).map(|(l, h)| (h - l) / 4.0).collect();
    Ok(PredictionEnvelope {
        mean: UniformSeries::new(t0, dt, m)?,
        std,
        lower: UniformSeries::new(t0, dt, lo)?,
        upper: UniformSeries::new(t0, dt, hi)?,
        n_realizations: 0,
    })
}

pub fn write_jumps_csv(path: &Path, jumps: &[JumpRecord]) -> Result<()> {
    let rows = jumps
        .iter()
        .map(|j| vec![j.index.to_string(), j.magnitude.to_string()]);
    write_records(path, &["index", "magnitude_w"], rows)
}

/// Jump file `index,magnitude_w`; a header with no rows is an empty list.
pub fn read_jumps_csv(path: &Path) -> Result<Vec<JumpRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.lines().filter(|l| !l.trim().is_empty()).count() == 1 {
        let h = text.lines().next().unwrap_or("").trim().to_ascii_lowercase();
        if h.replace(' ', "") == "index,magnitude_w" {
            return Ok(Vec::new());
        }
    }
    read_rows(path, &["index", "magnitude_w"])?
        .iter()
        .map(|(line, f)| {
            let index = f[0]
                .parse::<usize>()
                .map_err(|_| parse_error(path, *line, format!("invalid index {:?}", f[0])))?;
            Ok(JumpRecord {
                index,
                magnitude: field_f64(path, *line, "magnitude_w", &f[1])?,
            })
        })
        .collect()
}

// ---- key = value files -------------------------------------------------

/// Parsed `key = value` document. Keys before the first header live in the
/// root table; `[a.b]` headers nest.
pub type KeyValues = toml::Table;

pub fn parse_key_values(text: &str, origin: &str) -> Result<KeyValues> {
    text.parse::<toml::Table>().map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            path: origin.to_string(),
            line,
            message: e.message().to_string(),
        }
    })
}

pub fn read_key_values(path: &Path) -> Result<KeyValues> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_values(&text, &path.display().to_string())
}

/// Numeric entry; integers are accepted as floats.
pub fn kv_number(table: &KeyValues, key: &str, origin: &str) -> Result<Option<f64>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::Float(v)) => Ok(Some(*v)),
        Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(other) => Err(Error::InvalidArgument(format!(
            "{origin}: {key} must be a number, got {other}"
        ))),
    }
}

pub fn kv_required(table: &KeyValues, key: &str, origin: &str) -> Result<f64> {
    kv_number(table, key, origin)?
        .ok_or_else(|| Error::InvalidArgument(format!("{origin}: missing key {key}")))
}

/// Reject keys outside `allowed`.
pub fn kv_check_keys(table: &KeyValues, allowed: &[&str], origin: &str) -> Result<()> {
    match table.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidArgument(format!(
            "{origin}: unknown key {k} (expected one of {})",
            allowed.join(", ")
        ))),
        None => Ok(()),
    }
}

/// `key = value` line with a float that parses back to the same bits.
pub fn kv_line(key: &str, v: f64) -> String {
    format!("{key} = {v:?}\n")
}

const KERNEL_KEYS: [&str; 4] = ["alpha", "beta", "theta_x", "theta_y"];

/// Kernel file; an optional `residual` entry is ignored.
pub fn kernel_from_str(text: &str, origin: &str) -> Result<GpKernelParams> {
    let t = parse_key_values(text, origin)?;
    let mut allowed = KERNEL_KEYS.to_vec();
    allowed.push("residual");
    kv_check_keys(&t, &allowed, origin)?;
    let v: Vec<f64> = KERNEL_KEYS
        .iter()
        .map(|k| kv_required(&t, k, origin))
        .collect::<Result<_>>()?;
    GpKernelParams::new(v[0], v[1], v[2], v[3])
}

pub fn kernel_to_string(p: &GpKernelParams, residual: Option<f64>) -> String {
    let mut s: String = KERNEL_KEYS
        .iter()
        .zip([p.alpha, p.beta, p.theta_x, p.theta_y])
        .map(|(k, v)| kv_line(k, v))
        .collect();
    if let Some(r) = residual {
        s.push_str(&kv_line("residual", r));
    }
    s
}

pub fn read_kernel(path: &Path) -> Result<GpKernelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    kernel_from_str(&text, &path.display().to_string())
}

pub fn ou_params_from_table(t: &KeyValues, origin: &str) -> Result<OuParams> {
    kv_check_keys(t, &PARAM_NAMES, origin)?;
    let mut v = [0.0; 7];
    for (slot, k) in v.iter_mut().zip(PARAM_NAMES) {
        *slot = kv_required(t, k, origin)?;
    }
    let p = OuParams::from_array(v);
    p.validate()?;
    Ok(p)
}

pub fn ou_params_from_str(text: &str, origin: &str) -> Result<OuParams> {
    ou_params_from_table(&parse_key_values(text, origin)?, origin)
}

pub fn ou_params_to_string(p: &OuParams) -> String {
    PARAM_NAMES
        .iter()
        .zip(p.to_array())
        .map(|(k, v)| kv_line(k, v))
        .collect()
}

pub fn read_ou_params(path: &Path) -> Result<OuParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ou_params_from_str(&text, &path.display().to_string())
}

/// Plant description: per-site panel and inverter parameters plus the
/// transposition coefficients shared by all sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    /// Template for sites without their own section; `site_id` is unused.
    pub default: PvSite,
    pub sites: BTreeMap<String, PvSite>,
    pub transposition: TranspositionStep,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            default: default_site("default"),
            sites: BTreeMap::new(),
            transposition: TranspositionStep::default(),
        }
    }
}

impl PlantConfig {
    /// Parameters for `ids`, in that order.
    pub fn sites_for(&self, ids: &[String]) -> Vec<PvSite> {
        ids.iter()
            .map(|id| {
                self.sites.get(id).cloned().unwrap_or_else(|| PvSite {
                    site_id: id.clone(),
                    ..self.default.clone()
                })
            })
            .collect()
    }
}

const SITE_KEYS: [&str; 8] = [
    "tilt_deg",
    "albedo",
    "area_m2",
    "efficiency",
    "loss",
    "p_ac0_w",
    "p_dc0_w",
    "p_s0_w",
];

fn site_from_table(t: &KeyValues, base: &PvSite, id: &str, origin: &str) -> Result<PvSite> {
    kv_check_keys(t, &SITE_KEYS, origin)?;
    let get = |k: &str, fallback: f64| -> Result<f64> {
        Ok(kv_number(t, k, origin)?.unwrap_or(fallback))
    };
    let site = PvSite {
        site_id: id.to_string(),
        tilt: get("tilt_deg", base.tilt.to_degrees())?.to_radians(),
        albedo: get("albedo", base.albedo)?,
        area: get("area_m2", base.area)?,
        efficiency: get("efficiency", base.efficiency)?,
        loss: get("loss", base.loss)?,
        inverter: InverterRatings {
            p_ac0: get("p_ac0_w", base.inverter.p_ac0)?,
            p_dc0: get("p_dc0_w", base.inverter.p_dc0)?,
            p_s0: get("p_s0_w", base.inverter.p_s0)?,
        },
    };
    site.validate()?;
    Ok(site)
}

fn section<'a>(t: &'a KeyValues, name: &str, origin: &str) -> Result<Option<&'a KeyValues>> {
    match t.get(name) {
        None => Ok(None),
        Some(toml::Value::Table(s)) => Ok(Some(s)),
        Some(_) => Err(Error::InvalidArgument(format!(
            "{origin}: {name} must be a [section]"
        ))),
    }
}

/// Sections `[default]`, `[site.<id>]` and `[transposition]`; all optional.
/// Missing keys fall back to `[default]`, then to the built-in plant.
pub fn plant_from_str(text: &str, origin: &str) -> Result<PlantConfig> {
    let t = parse_key_values(text, origin)?;
    kv_check_keys(&t, &["default", "site", "transposition"], origin)?;
    let mut cfg = PlantConfig::default();
    if let Some(d) = section(&t, "default", origin)? {
        cfg.default = site_from_table(d, &cfg.default, "default", origin)?;
    }
    if let Some(sites) = section(&t, "site", origin)? {
        for (id, v) in sites {
            let toml::Value::Table(s) = v else {
                return Err(Error::InvalidArgument(format!(
                    "{origin}: site.{id} must be a [section]"
                )));
            };
            let site = site_from_table(s, &cfg.default, id, &format!("{origin} [site.{id}]"))?;
            cfg.sites.insert(id.clone(), site);
        }
    }
    if let Some(tr) = section(&t, "transposition", origin)? {
        kv_check_keys(tr, &["k_d", "r_b", "a_i"], origin)?;
        let d = TranspositionStep::default();
        cfg.transposition = TranspositionStep {
            k_d: kv_number(tr, "k_d", origin)?.unwrap_or(d.k_d),
            r_b: kv_number(tr, "r_b", origin)?.unwrap_or(d.r_b),
            a_i: kv_number(tr, "a_i", origin)?.unwrap_or(d.a_i),
        };
        crate::pv::TranspositionInputs::constant(cfg.transposition).validate(1)?;
    }
    Ok(cfg)
}

pub fn read_plant(path: &Path) -> Result<PlantConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    plant_from_str(&text, &path.display().to_string())
}

fn site_block(s: &PvSite) -> String {
    [
        ("tilt_deg", s.tilt.to_degrees()),
        ("albedo", s.albedo),
        ("area_m2", s.area),
        ("efficiency", s.efficiency),
        ("loss", s.loss),
        ("p_ac0_w", s.inverter.p_ac0),
        ("p_dc0_w", s.inverter.p_dc0),
        ("p_s0_w", s.inverter.p_s0),
    ]
    .iter()
    .map(|(k, v)| kv_line(k, *v))
    .collect()
}

pub fn plant_to_string(cfg: &PlantConfig) -> String {
    let mut out = format!("[default]\n{}", site_block(&cfg.default));
    for (id, s) in &cfg.sites {
        out.push_str(&format!("\n[site.{}]\n{}", toml_key(id), site_block(s)));
    }
    let t = cfg.transposition;
    out.push_str(&format!(
        "\n[transposition]\n{}{}{}",
        kv_line("k_d", t.k_d),
        kv_line("r_b", t.r_b),
        kv_line("a_i", t.a_i)
    ));
    out
}

/// Bare key if possible, otherwise quoted.
fn toml_key(k: &str) -> String {
    if !k.is_empty()
        && k
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        k.to_string()
    } else {
        format!("{:?}", k)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
