//! Irradiance-to-AC-power chain for a fleet of PV installations:
//! κ → G → (G_d, G_b) → G_T → P_dc → P_ac, summed over sites.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::timeseries::{KappaPanel, UniformSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterRatings {
    /// Rated maximum AC output, W.
    pub p_ac0: f64,
    /// DC input at which the AC rating is reached, W.
    pub p_dc0: f64,
    /// DC threshold below which no AC power is produced, W.
    pub p_s0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvSite {
    pub site_id: String,
    /// Panel tilt, radians.
    pub tilt: f64,
    pub albedo: f64,
    /// Array area, m².
    pub area: f64,
    pub efficiency: f64,
    /// Additional module/array loss fraction.
    pub loss: f64,
    pub inverter: InverterRatings,
}

impl PvSite {
    pub fn validate(&self) -> Result<()> {
        let inv = &self.inverter;
        let checks = [
            (
                (0.0..=std::f64::consts::FRAC_PI_2).contains(&self.tilt),
                "tilt must lie in [0, π/2]",
            ),
            ((0.0..=1.0).contains(&self.albedo), "albedo must lie in [0, 1]"),
            (self.area > 0.0 && self.area.is_finite(), "area must be positive"),
            (
                self.efficiency > 0.0 && self.efficiency <= 1.0,
                "efficiency must lie in (0, 1]",
            ),
            ((0.0..1.0).contains(&self.loss), "loss must lie in [0, 1)"),
            (
                inv.p_s0 >= 0.0 && inv.p_dc0 > inv.p_s0 && inv.p_dc0.is_finite(),
                "inverter needs p_dc0 > p_s0 >= 0",
            ),
            (inv.p_ac0 > 0.0 && inv.p_ac0.is_finite(), "p_ac0 must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(format!("site {}: {msg}", self.site_id))),
            None => Ok(()),
        }
    }
}

/// Per-timestep transposition coefficients. Each vector is either one entry
/// (held constant) or one entry per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TranspositionInputs {
    pub diffuse_fraction: Vec<f64>,
    pub geometric_factor: Vec<f64>,
    pub anisotropy_index: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranspositionStep {
    pub k_d: f64,
    pub r_b: f64,
    pub a_i: f64,
}

impl Default for TranspositionStep {
    fn default() -> Self {
        Self {
            k_d: 0.3,
            r_b: 1.0,
            a_i: 0.25,
        }
    }
}

impl TranspositionInputs {
    pub fn constant(step: TranspositionStep) -> Self {
        Self {
            diffuse_fraction: vec![step.k_d],
            geometric_factor: vec![step.r_b],
            anisotropy_index: vec![step.a_i],
        }
    }

    pub fn validate(&self, n_times: usize) -> Result<()> {
        for (name, v) in [
            ("k_d", &self.diffuse_fraction),
            ("R_b", &self.geometric_factor),
            ("A_i", &self.anisotropy_index),
        ] {
            if v.len() != 1 && v.len() != n_times {
                return Err(Error::invalid(format!(
                    "{name} has {} entries for {n_times} timesteps",
                    v.len()
                )));
            }
        }
        for t in 0..n_times {
            let s = self.at(t);
            if !(0.0..=1.0).contains(&s.k_d)
                || !(s.r_b >= 0.0 && s.r_b.is_finite())
                || !(0.0..=1.0).contains(&s.a_i)
            {
                return Err(Error::invalid(format!(
                    "transposition inputs out of range at step {t}: {s:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn at(&self, t: usize) -> TranspositionStep {
        let pick = |v: &[f64]| if v.len() == 1 { v[0] } else { v[t] };
        TranspositionStep {
            k_d: pick(&self.diffuse_fraction),
            r_b: pick(&self.geometric_factor),
            a_i: pick(&self.anisotropy_index),
        }
    }
}

/// Diffuse and beam components (G_d, G_b) of horizontal irradiance.
pub fn split_irradiance(ghi: f64, k_d: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&k_d) {
        return Err(Error::invalid(format!("diffuse fraction {k_d} outside [0, 1]")));
    }
    if !(ghi >= 0.0) {
        return Err(Error::invalid(format!("negative irradiance {ghi}")));
    }
    let diffuse = k_d * ghi;
    Ok((diffuse, ghi - diffuse))
}

/// Plane-of-array irradiance from global, beam and diffuse horizontal
/// components.
pub fn tilted_irradiance(
    ghi: f64,
    beam: f64,
    diffuse: f64,
    t: &TranspositionStep,
    site: &PvSite,
) -> f64 {
    let cos_tilt = site.tilt.cos();
    let sky = (1.0 - t.a_i) * (1.0 + cos_tilt) / 2.0 + t.a_i * t.r_b;
    let ground = ghi * site.albedo * (1.0 - cos_tilt) / 2.0;
    (beam * t.r_b + diffuse * sky + ground).max(0.0)
}

/// DC array output: G_T · A · η · (1 − q_a).
pub fn dc_power(g_tilted: f64, site: &PvSite) -> f64 {
    g_tilted * site.area * site.efficiency * (1.0 - site.loss)
}

/// Linear inverter curve clipped to [0, P_ac0].
pub fn ac_power(p_dc: f64, site: &PvSite) -> f64 {
    let inv = &site.inverter;
    if p_dc <= inv.p_s0 {
        return 0.0;
    }
    (inv.p_ac0 * (p_dc - inv.p_s0) / (inv.p_dc0 - inv.p_s0)).min(inv.p_ac0)
}

/// Full chain for one site and timestep.
pub fn site_ac_power(kappa: f64, ghi_clear: f64, t: &TranspositionStep, site: &PvSite) -> f64 {
    let ghi = kappa * ghi_clear;
    let diffuse = t.k_d * ghi;
    let beam = ghi - diffuse;
    ac_power(dc_power(tilted_irradiance(ghi, beam, diffuse, t, site), site), site)
}

/// Aggregate AC power over all sites.
///
/// `kappa` is a raw (non-negative) panel; `ghi_clear` has the same shape,
/// rows = timesteps, columns in panel site order. `sites` may be in any order
/// but must cover exactly the panel's sites. Summation runs in panel column
/// order.
pub fn aggregate_pv(
    kappa: &KappaPanel,
    ghi_clear: &DMatrix<f64>,
    transposition: &TranspositionInputs,
    sites: &[PvSite],
) -> Result<UniformSeries> {
    let values = aggregate_values(
        kappa.kappa(),
        kappa.site_ids(),
        ghi_clear,
        transposition,
        sites,
    )?;
    UniformSeries::new(kappa.start_time(), kappa.dt(), values)
}

/// Same as [`aggregate_pv`] on bare matrices.
pub fn aggregate_values(
    kappa: &DMatrix<f64>,
    site_ids: &[String],
    ghi_clear: &DMatrix<f64>,
    transposition: &TranspositionInputs,
    sites: &[PvSite],
) -> Result<Vec<f64>> {
    if kappa.shape() != ghi_clear.shape() {
        return Err(Error::invalid(format!(
            "κ is {:?} but clear-sky irradiance is {:?}",
            kappa.shape(),
            ghi_clear.shape()
        )));
    }
    if sites.len() != site_ids.len() {
        return Err(Error::invalid(format!(
            "{} plant sites for {} κ sites",
            sites.len(),
            site_ids.len()
        )));
    }
    let ordered = site_ids
        .iter()
        .map(|id| {
            sites
                .iter()
                .find(|s| &s.site_id == id)
                .ok_or_else(|| Error::invalid(format!("no plant parameters for site {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    for s in &ordered {
        s.validate()?;
    }
    let n = kappa.nrows();
    transposition.validate(n)?;
    Ok((0..n)
        .map(|t| {
            let step = transposition.at(t);
            ordered
                .iter()
                .enumerate()
                .map(|(c, site)| site_ac_power(kappa[(t, c)], ghi_clear[(t, c)], &step, site))
                .sum()
        })
        .collect())
}

/// Uniform plant used by the synthetic scenarios: one 1.6 m² panel per site
/// at 20° tilt, 18 % efficiency and 5 % losses, behind a 250 W
/// micro-inverter.
pub fn default_site(site_id: &str) -> PvSite {
    PvSite {
        site_id: site_id.to_string(),
        tilt: 20f64.to_radians(),
        albedo: 0.2,
        area: 1.6,
        efficiency: 0.18,
        loss: 0.05,
        inverter: InverterRatings {
            p_ac0: 250.0,
            p_dc0: 265.0,
            p_s0: 3.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn site() -> PvSite {
        default_site("S")
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_irradiance(800.0, 0.25).unwrap(), (200.0, 600.0));
        assert_eq!(split_irradiance(640.0, 1.0).unwrap(), (640.0, 0.0));
        assert_eq!(split_irradiance(640.0, 0.0).unwrap(), (0.0, 640.0));
        assert!(split_irradiance(100.0, 1.2).is_err());
        assert!(split_irradiance(-1.0, 0.5).is_err());
    }

    #[test]
    fn horizontal_plane_identity() {
        let s = PvSite { tilt: 0.0, ..site() };
        let t = TranspositionStep {
            k_d: 0.4,
            r_b: 1.0,
            a_i: 0.7,
        };
        let (d, b) = split_irradiance(733.0, t.k_d).unwrap();
        assert_eq!(tilted_irradiance(733.0, b, d, &t, &s), 733.0);
        assert_eq!(tilted_irradiance(0.0, 0.0, 0.0, &t, &site()), 0.0);
    }

    #[test]
    fn tilted_reference_value() {
        // G=800, k_d=0.3, R_b=1.1, A_i=0.5, β=30°, ρ_g=0.2, evaluated term by term:
        // beam 560·1.1 = 616
        // diffuse 240·(0.5·(1+cos30°)/2 + 0.55) = 240·(0.4665064 + 0.55) = 243.9615
        // ground 800·0.2·(1−cos30°)/2 = 10.71797
        let s = PvSite {
            tilt: 30f64.to_radians(),
            albedo: 0.2,
            ..site()
        };
        let t = TranspositionStep {
            k_d: 0.3,
            r_b: 1.1,
            a_i: 0.5,
        };
        let (d, b) = split_irradiance(800.0, 0.3).unwrap();
        let got = tilted_irradiance(800.0, b, d, &t, &s);
        assert!((got - 870.679_492).abs() < 1e-5, "{got}");
    }

    #[test]
    fn dc_examples() {
        let s = PvSite {
            area: 10.0,
            efficiency: 0.18,
            loss: 0.05,
            ..site()
        };
        assert!((dc_power(1000.0, &s) - 1710.0).abs() < 1e-9);
        assert_eq!(dc_power(0.0, &s), 0.0);
        let lossless = PvSite {
            efficiency: 1.0,
            loss: 0.0,
            ..s
        };
        assert_eq!(dc_power(321.0, &lossless), 3210.0);
    }

    #[test]
    fn ac_endpoints_and_midpoint() {
        let s = site();
        let inv = s.inverter;
        assert_eq!(ac_power(inv.p_s0, &s), 0.0);
        assert_eq!(ac_power(inv.p_dc0, &s), inv.p_ac0);
        assert!((ac_power(0.5 * (inv.p_s0 + inv.p_dc0), &s) - inv.p_ac0 / 2.0).abs() < 1e-9);
        assert_eq!(ac_power(10.0 * inv.p_dc0, &s), inv.p_ac0);
        assert_eq!(ac_power(0.0, &s), 0.0);
    }

    #[test]
    fn site_validation() {
        assert!(site().validate().is_ok());
        assert!(PvSite { tilt: 2.0, ..site() }.validate().is_err());
        assert!(PvSite { loss: 1.0, ..site() }.validate().is_err());
        let mut s = site();
        s.inverter.p_s0 = s.inverter.p_dc0;
        assert!(s.validate().is_err());
    }

    fn panel(n_sites: usize, n_times: usize, kappa: f64) -> KappaPanel {
        let ids = (0..n_sites).map(|i| format!("S{i}")).collect();
        let t0 = Utc.with_ymd_and_hms(2010, 4, 8, 21, 0, 0).unwrap();
        KappaPanel::new(t0, 1.0, ids, DMatrix::from_element(n_times, n_sites, kappa)).unwrap()
    }

    fn fleet(n: usize) -> Vec<PvSite> {
        (0..n).map(|i| default_site(&format!("S{i}"))).collect()
    }

    #[test]
    fn aggregate_singleton_zero_and_homogeneous() {
        let tr = TranspositionInputs::constant(TranspositionStep::default());
        let gc = DMatrix::from_element(4, 1, 900.0);
        let one = aggregate_pv(&panel(1, 4, 1.0), &gc, &tr, &fleet(1)).unwrap();
        let direct = site_ac_power(1.0, 900.0, &TranspositionStep::default(), &fleet(1)[0]);
        assert!(one.values().iter().all(|v| *v == direct));

        let zero = aggregate_pv(&panel(3, 4, 0.0), &DMatrix::from_element(4, 3, 900.0), &tr, &fleet(3))
            .unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));

        let single = site_ac_power(0.8, 900.0, &TranspositionStep::default(), &fleet(1)[0]);
        let many = aggregate_pv(
            &panel(17, 4, 0.8),
            &DMatrix::from_element(4, 17, 900.0),
            &tr,
            &fleet(17),
        )
        .unwrap();
        assert!(many.values().iter().all(|v| (v - 17.0 * single).abs() < 1e-9));
    }

    #[test]
    fn aggregate_rejects_site_mismatch() {
        let tr = TranspositionInputs::constant(TranspositionStep::default());
        let mut sites = fleet(2);
        sites[1].site_id = "other".into();
        let gc = DMatrix::from_element(2, 2, 900.0);
        assert!(aggregate_pv(&panel(2, 2, 0.5), &gc, &tr, &sites).is_err());
        assert!(aggregate_pv(&panel(2, 2, 0.5), &gc, &tr, &fleet(3)).is_err());
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let tr = TranspositionInputs::constant(TranspositionStep::default());
        let p = KappaPanel::new(
            Utc.with_ymd_and_hms(2010, 4, 8, 21, 0, 0).unwrap(),
            1.0,
            vec!["S0".into(), "S1".into(), "S2".into()],
            DMatrix::from_row_slice(2, 3, &[0.2, 0.9, 0.5, 1.1, 0.0, 0.7]),
        )
        .unwrap();
        let gc = DMatrix::from_element(2, 3, 850.0);
        let mut sites = fleet(3);
        sites[0].area = 4.0;
        let a = aggregate_pv(&p, &gc, &tr, &sites).unwrap();
        sites.reverse();
        let b = aggregate_pv(&p, &gc, &tr, &sites).unwrap();
        assert_eq!(a, b);
    }

    fn arb_site() -> impl Strategy<Value = PvSite> {
        (
            0.0..=std::f64::consts::FRAC_PI_2,
            0.0..=1.0f64,
            0.1..50.0f64,
            0.01..=1.0f64,
            0.0..0.99f64,
            (10.0..5000.0f64, 0.0..1.0f64, 0.01..0.99f64),
        )
            .prop_map(|(tilt, albedo, area, efficiency, loss, (p_ac0, dc_scale, s_frac))| {
                let p_dc0 = p_ac0 * (1.0 + dc_scale);
                PvSite {
                    site_id: "S".into(),
                    tilt,
                    albedo,
                    area,
                    efficiency,
                    loss,
                    inverter: InverterRatings {
                        p_ac0,
                        p_dc0,
                        p_s0: s_frac * p_dc0,
                    },
                }
            })
    }

    fn arb_step() -> impl Strategy<Value = TranspositionStep> {
        (0.0..=1.0f64, 0.0..3.0f64, 0.0..=1.0f64).prop_map(|(k_d, r_b, a_i)| TranspositionStep {
            k_d,
            r_b,
            a_i,
        })
    }

    proptest! {
        #[test]
        fn split_conserves_energy(g in 0.0..1500.0f64, k in 0.0..=1.0f64) {
            let (d, b) = split_irradiance(g, k).unwrap();
            prop_assert!((d + b - g).abs() <= 4.0 * f64::EPSILON * g);
        }

        #[test]
        fn horizontal_identity_any_params(s in arb_site(), t in arb_step(), g in 0.0..1500.0f64) {
            let s = PvSite { tilt: 0.0, ..s };
            let t = TranspositionStep { r_b: 1.0, ..t };
            let (d, b) = split_irradiance(g, t.k_d).unwrap();
            prop_assert!((tilted_irradiance(g, b, d, &t, &s) - g).abs() <= 1e-12 * g.max(1.0));
        }

        #[test]
        fn ac_monotone(s in arb_site(), a in 0.0..20_000.0f64, b in 0.0..20_000.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ac_power(lo, &s) <= ac_power(hi, &s));
            prop_assert!(ac_power(hi, &s) <= s.inverter.p_ac0);
        }

        #[test]
        fn chain_monotone_in_kappa(s in arb_site(), t in arb_step(), k in 0.0..1.5f64, dk in 0.0..0.5f64, gc in 0.0..1100.0f64) {
            prop_assert!(site_ac_power(k, gc, &t, &s) <= site_ac_power(k + dk, gc, &t, &s));
        }
    }
}
