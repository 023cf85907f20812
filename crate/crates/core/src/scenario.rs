//! Experiment configuration, large-scale path loss and power-delay profiles.
//!
//! A [`ScenarioConfig`] is the single parameterization shared by every other
//! module. It is read from TOML files whose keys are exactly the field names
//! listed below (`M`, `N_b`, `N_g`, `scenario`, `sigma_override`, `geometry`,
//! `pdp`, `P_t_dbm`, `W_0_dbm`, `phase_resolution`, `seed`); unknown keys are
//! rejected.
//!
//! ```toml
//! M = 128
//! N_b = 2
//! N_g = 1
//! scenario = "S1"
//! P_t_dbm = 30.0
//! W_0_dbm = -130.0
//! seed = 7
//!
//! [geometry]
//! d_tx_ris = 35.51
//! d_ris_rx = 20.22
//! d_tx_rx = 55.73
//! h_tx = 10.0
//! h_ris = 4.0
//! h_rx = 1.0
//! f_c = 5.0
//!
//! [pdp]
//! kind = "uniform"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigErrors, Error, Result};

/// Frequency range (GHz) over which the UMi NLOS path loss model holds.
pub const UMI_FREQ_RANGE_GHZ: (f64, f64) = (2.0, 6.0);
/// Distance range (m) over which the UMi NLOS path loss model holds.
pub const UMI_DISTANCE_RANGE_M: (f64, f64) = (10.0, 2000.0);

/// Largest supported phase resolution in bits.
pub const MAX_PHASE_BITS: u32 = 24;

/// Distances (m), heights (m) and carrier frequency (GHz) of the Tx/RIS/Rx layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub d_tx_ris: f64,
    pub d_ris_rx: f64,
    pub d_tx_rx: f64,
    pub h_tx: f64,
    pub h_ris: f64,
    pub h_rx: f64,
    pub f_c: f64,
}

impl Geometry {
    /// The reference outdoor layout: Tx 35.51 m from the RIS, Rx 20.22 m from
    /// the RIS, 5 GHz carrier. Heights are carried along but do not enter the
    /// path loss model.
    pub fn reference() -> Self {
        Self {
            d_tx_ris: 35.51,
            d_ris_rx: 20.22,
            d_tx_rx: 55.73,
            h_tx: 10.0,
            h_ris: 4.0,
            h_rx: 1.0,
            f_c: 5.0,
        }
    }
}

/// Per-link Rayleigh amplitude parameters used instead of geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaOverride {
    pub sigma_b: f64,
    pub sigma_g: f64,
}

impl SigmaOverride {
    pub fn both(sigma: f64) -> Self {
        Self {
            sigma_b: sigma,
            sigma_g: sigma,
        }
    }
}

/// Power-delay profile shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "PdpRepr")]
pub enum PdpKind {
    #[default]
    Uniform,
    Exponential { decay: f64 },
}

fn default_decay() -> f64 {
    1.0
}

// serde lets unit variants of internally tagged enums swallow unknown keys
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PdpRepr {
    kind: String,
    decay: Option<f64>,
}

impl TryFrom<PdpRepr> for PdpKind {
    type Error = String;

    fn try_from(r: PdpRepr) -> std::result::Result<Self, String> {
        match (r.kind.as_str(), r.decay) {
            ("uniform", None) => Ok(PdpKind::Uniform),
            ("uniform", Some(_)) => Err("pdp.decay only applies to kind = \"exponential\"".into()),
            ("exponential", d) => Ok(PdpKind::Exponential {
                decay: d.unwrap_or_else(default_decay),
            }),
            (k, _) => Err(format!("unknown pdp kind \"{k}\" (expected uniform or exponential)")),
        }
    }
}

impl PdpKind {
    pub fn exponential() -> Self {
        PdpKind::Exponential {
            decay: default_decay(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PdpKind::Uniform => "uniform",
            PdpKind::Exponential { .. } => "exponential",
        }
    }
}

/// Which links of the RIS are frequency selective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selectivity {
    /// Tx–RIS selective, RIS–Rx flat (`N_g = 1`).
    S1,
    /// Both links selective.
    S2,
}

/// Full parameterization of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of RIS elements.
    #[serde(rename = "M")]
    pub elements: usize,
    /// Number of resolvable Tx–RIS paths.
    #[serde(rename = "N_b")]
    pub tx_paths: usize,
    /// Number of resolvable RIS–Rx paths.
    #[serde(rename = "N_g")]
    pub rx_paths: usize,
    pub scenario: Selectivity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_override: Option<SigmaOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    #[serde(default)]
    pub pdp: PdpKind,
    #[serde(rename = "P_t_dbm")]
    pub tx_power_dbm: f64,
    #[serde(rename = "W_0_dbm")]
    pub noise_power_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_resolution: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    /// Reference setup: reference geometry, M = 128, two Tx–RIS paths,
    /// flat RIS–Rx link, P_t = 30 dBm, W_0 = -130 dBm.
    pub fn reference() -> Self {
        Self {
            elements: 128,
            tx_paths: 2,
            rx_paths: 1,
            scenario: Selectivity::S1,
            sigma_override: None,
            geometry: Some(Geometry::reference()),
            pdp: PdpKind::Uniform,
            tx_power_dbm: 30.0,
            noise_power_dbm: -130.0,
            phase_resolution: None,
            seed: 0,
        }
    }

    /// Scenario-1 setup with a fixed per-link amplitude instead of geometry.
    pub fn with_sigma(elements: usize, tx_paths: usize, sigma: f64) -> Self {
        Self {
            elements,
            tx_paths,
            rx_paths: 1,
            scenario: Selectivity::S1,
            sigma_override: Some(SigmaOverride::both(sigma)),
            geometry: None,
            ..Self::reference()
        }
    }

    /// Collects every violated invariant.
    pub fn violations(&self) -> ConfigErrors {
        let mut errs = ConfigErrors::default();
        if self.elements < 1 {
            errs.push("M ≥ 1 violated");
        }
        if self.tx_paths < 1 {
            errs.push("N_b ≥ 1 violated");
        }
        if self.rx_paths < 1 {
            errs.push("N_g ≥ 1 violated");
        }
        if self.scenario == Selectivity::S1 && self.rx_paths != 1 {
            errs.push(format!(
                "scenario S1 requires N_g = 1 (got N_g = {})",
                self.rx_paths
            ));
        }
        match (&self.sigma_override, &self.geometry) {
            (Some(_), Some(_)) => {
                errs.push("exactly one of sigma_override / geometry must be present (both given)")
            }
            (None, None) => {
                errs.push("exactly one of sigma_override / geometry must be present (neither given)")
            }
            _ => {}
        }
        if let Some(s) = &self.sigma_override {
            for (name, v) in [("sigma_b", s.sigma_b), ("sigma_g", s.sigma_g)] {
                if !(v.is_finite() && v > 0.0) {
                    errs.push(format!("sigma_override.{name} > 0 violated (got {v})"));
                }
            }
        }
        if let Some(g) = &self.geometry {
            for (name, d) in [
                ("d_tx_ris", g.d_tx_ris),
                ("d_ris_rx", g.d_ris_rx),
                ("d_tx_rx", g.d_tx_rx),
            ] {
                if !(d.is_finite() && d > 0.0) {
                    errs.push(format!("geometry.{name} > 0 violated (got {d})"));
                } else if d < UMI_DISTANCE_RANGE_M.0 || d > UMI_DISTANCE_RANGE_M.1 {
                    errs.push(format!(
                        "geometry.{name} = {d} m outside the path loss model range [{}, {}] m",
                        UMI_DISTANCE_RANGE_M.0, UMI_DISTANCE_RANGE_M.1
                    ));
                }
            }
            for (name, h) in [("h_tx", g.h_tx), ("h_ris", g.h_ris), ("h_rx", g.h_rx)] {
                if !(h.is_finite() && h >= 0.0) {
                    errs.push(format!("geometry.{name} ≥ 0 violated (got {h})"));
                }
            }
            if !(g.f_c >= UMI_FREQ_RANGE_GHZ.0 && g.f_c <= UMI_FREQ_RANGE_GHZ.1) {
                errs.push(format!(
                    "geometry.f_c = {} GHz outside the path loss model range [{}, {}] GHz",
                    g.f_c, UMI_FREQ_RANGE_GHZ.0, UMI_FREQ_RANGE_GHZ.1
                ));
            }
        }
        if let PdpKind::Exponential { decay } = self.pdp {
            if !(decay.is_finite() && decay > 0.0) {
                errs.push(format!("pdp.decay > 0 violated (got {decay})"));
            }
        }
        if !self.tx_power_dbm.is_finite() {
            errs.push("P_t_dbm must be finite");
        }
        if !self.noise_power_dbm.is_finite() {
            errs.push("W_0_dbm must be finite");
        }
        if let Some(r) = self.phase_resolution {
            if !(1..=MAX_PHASE_BITS).contains(&r) {
                errs.push(format!(
                    "phase_resolution in [1, {MAX_PHASE_BITS}] violated (got {r})"
                ));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Parses TOML text and checks every invariant.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable as TOML")
    }

    /// Symbol energy `E_s` in linear units (W) from `P_t_dbm`.
    pub fn symbol_energy(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Noise power `W_0` in linear units (W) from `W_0_dbm`.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// Longest relative delay (in symbols) of any Tx–RIS–Rx path.
    pub fn delay_span(&self) -> usize {
        (self.tx_paths - 1) + (self.rx_paths - 1)
    }
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// UMi NLOS path loss in dB for distance `d` (m) and carrier `f_c` (GHz).
pub fn path_loss_db(d: f64, f_c: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    if !(f_c > 0.0 && f_c.is_finite()) {
        return Err(Error::Domain(format!("carrier must be positive, got {f_c}")));
    }
    Ok(36.7 * d.log10() + 22.7 + 26.0 * f_c.log10())
}

/// Per-tap complex variances `(σ_b², σ_g²)` of the Tx–RIS and RIS–Rx links.
///
/// With geometry, each tap carries the full path loss of its link.
pub fn link_variance(config: &ScenarioConfig) -> Result<(f64, f64)> {
    config.validate()?;
    if let Some(s) = &config.sigma_override {
        return Ok((s.sigma_b * s.sigma_b, s.sigma_g * s.sigma_g));
    }
    let g = config
        .geometry
        .as_ref()
        .expect("validated config has geometry when sigma_override is absent");
    let lb = path_loss_db(g.d_tx_ris, g.f_c)?;
    let lg = path_loss_db(g.d_ris_rx, g.f_c)?;
    Ok((10f64.powf(-lb / 10.0), 10f64.powf(-lg / 10.0)))
}

/// Per-tap variances for `n` taps with total power `n · variance`.
///
/// The exponential profile weights tap `l` (0-based) by `exp(-l / decay)`
/// and is renormalized to the same total power as the uniform one.
pub fn pdp_profile(pdp: PdpKind, n: usize, variance: f64) -> Vec<f64> {
    match pdp {
        PdpKind::Uniform => vec![variance; n],
        PdpKind::Exponential { decay } => {
            let weights: Vec<f64> = (0..n).map(|l| (-(l as f64) / decay).exp()).collect();
            let total: f64 = weights.iter().sum();
            let scale = n as f64 * variance / total;
            weights.into_iter().map(|w| w * scale).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn path_loss_reference_points() {
        assert_relative_eq!(path_loss_db(1.0, 1.0).unwrap(), 22.7, epsilon = 1e-12);
        let expected = 36.7 + 22.7 + 26.0 * 5f64.log10();
        assert_relative_eq!(path_loss_db(10.0, 5.0).unwrap(), expected, epsilon = 1e-12);
        // 36.7*log10(35.51) + 22.7 + 26*log10(5), evaluated independently
        assert_relative_eq!(
            path_loss_db(35.51, 5.0).unwrap(),
            97.771_089_786,
            epsilon = 1e-6
        );
        assert!(path_loss_db(0.0, 5.0).is_err());
        assert!(path_loss_db(10.0, -1.0).is_err());
    }

    #[test]
    fn link_variance_override_and_geometry() {
        let cfg = ScenarioConfig::with_sigma(4, 2, 1e-3);
        let (b, g) = link_variance(&cfg).unwrap();
        assert_relative_eq!(b, 1e-6, max_relative = 1e-12);
        assert_relative_eq!(g, 1e-6, max_relative = 1e-12);

        let cfg = ScenarioConfig::with_sigma(4, 2, 1e-2);
        assert_relative_eq!(link_variance(&cfg).unwrap().0, 1e-4, max_relative = 1e-12);

        let cfg = ScenarioConfig::reference();
        let (b, g) = link_variance(&cfg).unwrap();
        let lb = path_loss_db(35.51, 5.0).unwrap();
        let lg = path_loss_db(20.22, 5.0).unwrap();
        assert_relative_eq!(b, 10f64.powf(-lb / 10.0), max_relative = 1e-12);
        assert_relative_eq!(g, 10f64.powf(-lg / 10.0), max_relative = 1e-12);
        assert_eq!(link_variance(&cfg).unwrap(), (b, g));
    }

    #[test]
    fn pdp_examples() {
        assert_eq!(pdp_profile(PdpKind::Uniform, 3, 0.5), vec![0.5; 3]);
        assert_eq!(pdp_profile(PdpKind::exponential(), 1, 0.5), vec![0.5]);
        let p = pdp_profile(PdpKind::exponential(), 2, 0.5);
        let e = (-1f64).exp();
        assert_relative_eq!(p[0], 2.0 * 0.5 / (1.0 + e), max_relative = 1e-14);
        assert_relative_eq!(p[1], 2.0 * 0.5 * e / (1.0 + e), max_relative = 1e-14);
    }

    #[test]
    fn violations_are_all_reported() {
        let mut cfg = ScenarioConfig::reference();
        cfg.elements = 0;
        cfg.rx_paths = 3;
        cfg.sigma_override = Some(SigmaOverride::both(1e-3));
        let errs = cfg.violations();
        assert_eq!(errs.0.len(), 3, "{errs}");
        assert!(errs.iter().any(|e| e == "M ≥ 1 violated"));
        assert!(errs.iter().any(|e| e.contains("both given")));
        assert!(errs.iter().any(|e| e.contains("S1 requires N_g = 1")));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let cfg = ScenarioConfig::reference();
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);

        for bad in [
            format!("bogus = 1\n{text}"),
            format!("{text}\nbogus = 1\n"),
            text.replace("kind = \"uniform\"", "kind = \"uniform\"\ndecay = 2.0"),
            text.replace("kind = \"uniform\"", "kind = \"gaussian\""),
        ] {
            assert_ne!(bad, text);
            assert!(matches!(ScenarioConfig::from_toml_str(&bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn exponential_pdp_parses_with_default_decay() {
        let text = r#"
            M = 16
            N_b = 4
            N_g = 1
            scenario = "S1"
            P_t_dbm = 30.0
            W_0_dbm = -130.0
            sigma_override = { sigma_b = 1e-3, sigma_g = 1e-3 }
            pdp = { kind = "exponential" }
        "#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.pdp, PdpKind::Exponential { decay: 1.0 });
    }

    proptest! {
        #[test]
        fn pdp_preserves_total_power(n in 1usize..64, var in 1e-12f64..10.0, decay in 0.05f64..20.0) {
            for pdp in [PdpKind::Uniform, PdpKind::Exponential { decay }] {
                let total: f64 = pdp_profile(pdp, n, var).iter().sum();
                let want = n as f64 * var;
                prop_assert!(((total - want) / want).abs() < 1e-12);
            }
        }

        #[test]
        fn path_loss_increasing(d in 1.0f64..5000.0, f in 0.5f64..50.0, step in 1e-6f64..10.0) {
            let base = path_loss_db(d, f).unwrap();
            prop_assert!(path_loss_db(d + step, f).unwrap() > base);
            prop_assert!(path_loss_db(d, f + step).unwrap() > base);
        }
    }
}
