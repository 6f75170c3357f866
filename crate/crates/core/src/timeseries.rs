//! Uniformly sampled series, clear-sky-index panels, and the small set of
//! transforms shared by the irradiance and load models.

use chrono::{DateTime, Duration, Utc};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Clear-sky irradiance below this level (W/m²) yields κ = 0.
pub const DEFAULT_KAPPA_FLOOR: f64 = 20.0;

pub type Timestamp = DateTime<Utc>;

/// Offset of sample `index` from a start time on a grid of `dt` seconds,
/// rounded to the nearest nanosecond.
pub fn grid_time(start: Timestamp, dt: f64, index: usize) -> Timestamp {
    start + Duration::nanoseconds((index as f64 * dt * 1e9).round() as i64)
}

/// A real-valued series sampled every `dt` seconds from `start_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    start_time: Timestamp,
    dt: f64,
    values: Vec<f64>,
}

impl UniformSeries {
    pub fn new(start_time: Timestamp, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("series must contain at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            start_time,
            dt,
            values,
        })
    }

    pub fn start_time(&self) -> Timestamp {
        self.start_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> Timestamp {
        grid_time(self.start_time, self.dt, index)
    }

    /// Same start, step and length. Steps must match exactly.
    pub fn aligned_with(&self, other: &UniformSeries) -> bool {
        self.start_time == other.start_time && self.dt == other.dt && self.len() == other.len()
    }

    /// New series on the same time base with different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "replacement has {} values, series has {}",
                values.len(),
                self.len()
            )));
        }
        Self::new(self.start_time, self.dt, values)
    }

    /// Sub-series `[from, to)`, restarted at the time of `from`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.len() {
            return Err(Error::invalid(format!(
                "slice {from}..{to} out of bounds for length {}",
                self.len()
            )));
        }
        Self::new(self.time_at(from), self.dt, self.values[from..to].to_vec())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// Average non-overlapping windows of `factor` samples. A trailing partial
/// window is dropped.
pub fn downsample(series: &UniformSeries, factor: usize) -> Result<UniformSeries> {
    if factor == 0 {
        return Err(Error::invalid("downsample factor must be at least 1"));
    }
    if series.len() < factor {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than one window of {factor}",
            series.len()
        )));
    }
    if factor == 1 {
        return Ok(series.clone());
    }
    let values = series
        .values
        .chunks_exact(factor)
        .map(|w| w.iter().sum::<f64>() / factor as f64)
        .collect();
    UniformSeries::new(series.start_time, series.dt * factor as f64, values)
}

/// κ = G / G_c where G_c ≥ `floor`, and 0 elsewhere.
pub fn clear_sky_index(
    ghi: &UniformSeries,
    ghi_clear: &UniformSeries,
    floor: f64,
) -> Result<UniformSeries> {
    if !(floor > 0.0) {
        return Err(Error::invalid(format!("κ floor must be positive, got {floor}")));
    }
    if ghi.len() != ghi_clear.len() || ghi.dt != ghi_clear.dt {
        return Err(Error::invalid(format!(
            "irradiance series mismatch: {} samples at dt={} vs {} samples at dt={}",
            ghi.len(),
            ghi.dt,
            ghi_clear.len(),
            ghi_clear.dt
        )));
    }
    if let Some(i) = ghi.values.iter().position(|&g| g < 0.0) {
        return Err(Error::invalid(format!("negative GHI at index {i}")));
    }
    let kappa = ghi
        .values
        .iter()
        .zip(&ghi_clear.values)
        .map(|(&g, &gc)| if gc >= floor { g / gc } else { 0.0 })
        .collect();
    UniformSeries::new(ghi.start_time, ghi.dt, kappa)
}

/// Time-aligned clear-sky index across sites: one row per timestep, one
/// column per site.
///
/// A raw panel holds κ ≥ 0. After [`debias`] the columns are centered and
/// the removed means live in `site_means`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaPanel {
    start_time: Timestamp,
    dt: f64,
    site_ids: Vec<String>,
    kappa: DMatrix<f64>,
    site_means: Vec<f64>,
    centered: bool,
}

impl KappaPanel {
    pub fn new(
        start_time: Timestamp,
        dt: f64,
        site_ids: Vec<String>,
        kappa: DMatrix<f64>,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if kappa.ncols() != site_ids.len() {
            return Err(Error::invalid(format!(
                "{} κ columns for {} site ids",
                kappa.ncols(),
                site_ids.len()
            )));
        }
        if kappa.nrows() == 0 || kappa.ncols() == 0 {
            return Err(Error::invalid("κ panel must be non-empty"));
        }
        check_unique(&site_ids)?;
        if let Some((idx, v)) = kappa
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            let (row, col) = (idx % kappa.nrows(), idx / kappa.nrows());
            return Err(Error::invalid(format!(
                "κ must be finite and non-negative; got {v} at row {row}, site {}",
                site_ids[col]
            )));
        }
        let n = site_ids.len();
        Ok(Self {
            start_time,
            dt,
            site_ids,
            kappa,
            site_means: vec![0.0; n],
            centered: false,
        })
    }

    /// Build from per-site κ series sharing one time base.
    pub fn from_series(site_ids: Vec<String>, series: &[UniformSeries]) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::invalid("no κ series supplied"))?;
        if series.len() != site_ids.len() {
            return Err(Error::invalid(format!(
                "{} κ series for {} site ids",
                series.len(),
                site_ids.len()
            )));
        }
        for (id, s) in site_ids.iter().zip(series) {
            if !s.aligned_with(first) {
                return Err(Error::invalid(format!(
                    "site {id} is not on the shared time base"
                )));
            }
        }
        let kappa = DMatrix::from_fn(first.len(), series.len(), |r, c| series[c].values[r]);
        Self::new(first.start_time, first.dt, site_ids, kappa)
    }

    pub fn start_time(&self) -> Timestamp {
        self.start_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn site_ids(&self) -> &[String] {
        &self.site_ids
    }

    pub fn kappa(&self) -> &DMatrix<f64> {
        &self.kappa
    }

    pub fn site_means(&self) -> &[f64] {
        &self.site_means
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn n_times(&self) -> usize {
        self.kappa.nrows()
    }

    pub fn n_sites(&self) -> usize {
        self.kappa.ncols()
    }

    pub fn site_index(&self, id: &str) -> Option<usize> {
        self.site_ids.iter().position(|s| s == id)
    }

    /// One site's column as a series.
    pub fn site_series(&self, col: usize) -> Result<UniformSeries> {
        UniformSeries::new(
            self.start_time,
            self.dt,
            self.kappa.column(col).iter().copied().collect(),
        )
    }

    /// Rows `[from, to)`, keeping centering state and means.
    pub fn rows(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.n_times() {
            return Err(Error::invalid(format!(
                "row range {from}..{to} out of bounds for {} rows",
                self.n_times()
            )));
        }
        Ok(Self {
            start_time: grid_time(self.start_time, self.dt, from),
            dt: self.dt,
            site_ids: self.site_ids.clone(),
            kappa: self.kappa.rows(from, to - from).into_owned(),
            site_means: self.site_means.clone(),
            centered: self.centered,
        })
    }

    /// κ with the stored site means added back.
    pub fn restored(&self) -> DMatrix<f64> {
        let mut out = self.kappa.clone();
        for (c, m) in self.site_means.iter().enumerate() {
            out.column_mut(c).add_scalar_mut(*m);
        }
        out
    }
}

pub(crate) fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate site id {id}")));
        }
    }
    Ok(())
}

/// Center each column on its empirical mean; the removed means are
/// accumulated into `site_means` so the original panel can be restored.
pub fn debias(panel: &KappaPanel) -> KappaPanel {
    let mut out = panel.clone();
    let n = panel.n_times() as f64;
    for c in 0..panel.n_sites() {
        let mut col = out.kappa.column_mut(c);
        let mut m = col.sum() / n;
        col.add_scalar_mut(-m);
        // second pass absorbs the rounding left by the first
        let r = col.sum() / n;
        if r != 0.0 {
            col.add_scalar_mut(-r);
            m += r;
        }
        out.site_means[c] += m;
    }
    out.centered = true;
    out
}

/// Measured and clear-sky GHI for several sites on one time base; rows are
/// timesteps, columns sites.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradiancePanel {
    start_time: Timestamp,
    dt: f64,
    site_ids: Vec<String>,
    ghi: DMatrix<f64>,
    ghi_clear: DMatrix<f64>,
}

impl IrradiancePanel {
    pub fn new(
        start_time: Timestamp,
        dt: f64,
        site_ids: Vec<String>,
        ghi: DMatrix<f64>,
        ghi_clear: DMatrix<f64>,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if ghi.shape() != ghi_clear.shape() || ghi.ncols() != site_ids.len() {
            return Err(Error::invalid(format!(
                "GHI {:?} and clear-sky {:?} do not match {} sites",
                ghi.shape(),
                ghi_clear.shape(),
                site_ids.len()
            )));
        }
        if ghi.is_empty() {
            return Err(Error::invalid("irradiance panel must be non-empty"));
        }
        check_unique(&site_ids)?;
        for (name, m) in [("GHI", &ghi), ("clear-sky GHI", &ghi_clear)] {
            if let Some(v) = m.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            start_time,
            dt,
            site_ids,
            ghi,
            ghi_clear,
        })
    }

    pub fn start_time(&self) -> Timestamp {
        self.start_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn site_ids(&self) -> &[String] {
        &self.site_ids
    }

    pub fn ghi(&self) -> &DMatrix<f64> {
        &self.ghi
    }

    pub fn ghi_clear(&self) -> &DMatrix<f64> {
        &self.ghi_clear
    }

    pub fn n_times(&self) -> usize {
        self.ghi.nrows()
    }

    /// Columns for `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let cols = ids
            .iter()
            .map(|id| {
                self.site_ids
                    .iter()
                    .position(|s| s == id)
                    .ok_or_else(|| Error::invalid(format!("unknown site id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.start_time,
            self.dt,
            ids.to_vec(),
            self.ghi.select_columns(&cols),
            self.ghi_clear.select_columns(&cols),
        )
    }

    /// Rows `[from, to)`.
    pub fn rows(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.n_times() {
            return Err(Error::invalid(format!(
                "row range {from}..{to} out of bounds for {} rows",
                self.n_times()
            )));
        }
        Self::new(
            grid_time(self.start_time, self.dt, from),
            self.dt,
            self.site_ids.clone(),
            self.ghi.rows(from, to - from).into_owned(),
            self.ghi_clear.rows(from, to - from).into_owned(),
        )
    }

    /// Per-site [`clear_sky_index`].
    pub fn kappa_panel(&self, floor: f64) -> Result<KappaPanel> {
        let series = (0..self.site_ids.len())
            .map(|c| {
                let col = |m: &DMatrix<f64>| {
                    UniformSeries::new(self.start_time, self.dt, m.column(c).iter().copied().collect())
                };
                clear_sky_index(&col(&self.ghi)?, &col(&self.ghi_clear)?, floor)
            })
            .collect::<Result<Vec<_>>>()?;
        KappaPanel::from_series(self.site_ids.clone(), &series)
    }
}
