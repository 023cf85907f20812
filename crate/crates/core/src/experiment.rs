//! CSV experiment runners behind the `otaeq` binary.
//!
//! An [`ExperimentSpec`] fixes a base scenario, a list of sweeps whose
//! cartesian product gives the sweep points, and the per-kind inner axes
//! (thresholds, phase modes, PDPs, PSK orders). Sweep points run
//! concurrently, each with its own seed `derive_seed(base.seed, index)`, and
//! rows are written in sweep order, so the output is byte-identical for a
//! given seed regardless of scheduling.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{ConfigErrors, Error, Result};
use crate::isiprob::{isi_elimination_mc_multi, isi_elimination_probability};
use crate::linksim::{ber_monte_carlo, sinr_monte_carlo, DEFAULT_SYMBOLS_PER_TRIAL};
use crate::montecarlo::derive_seed;
use crate::ris::PhaseMode;
use crate::scenario::{link_variance, load_config, PdpKind, ScenarioConfig, Selectivity, SigmaOverride};
use crate::septheory::{fit_gamma, sample_gamma_m, sep_bpsk, sep_psk, GammaFit};

/// What an experiment computes and which CSV schema it writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    IsiProbSweep,
    IsiProbVsM,
    BerCurve,
    DiscretePhaseBer,
    SinrVsM,
    GammaTable,
    SepCurve,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::IsiProbSweep,
        ExperimentKind::IsiProbVsM,
        ExperimentKind::BerCurve,
        ExperimentKind::DiscretePhaseBer,
        ExperimentKind::SinrVsM,
        ExperimentKind::GammaTable,
        ExperimentKind::SepCurve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::IsiProbSweep => "isi_prob_sweep",
            ExperimentKind::IsiProbVsM => "isi_prob_vs_M",
            ExperimentKind::BerCurve => "ber_curve",
            ExperimentKind::DiscretePhaseBer => "discrete_phase_ber",
            ExperimentKind::SinrVsM => "sinr_vs_M",
            ExperimentKind::GammaTable => "gamma_table",
            ExperimentKind::SepCurve => "sep_curve",
        }
    }

    /// CLI subcommand name.
    pub fn command(self) -> &'static str {
        match self {
            ExperimentKind::IsiProbSweep => "isi-prob",
            ExperimentKind::IsiProbVsM => "isi-prob-vs-m",
            ExperimentKind::BerCurve => "ber",
            ExperimentKind::DiscretePhaseBer => "discrete-ber",
            ExperimentKind::SinrVsM => "sinr-sweep",
            ExperimentKind::GammaTable => "gamma-fit",
            ExperimentKind::SepCurve => "sep",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::IsiProbSweep | ExperimentKind::IsiProbVsM => {
                &["X", "N_b", "N_g", "M", "sigma", "p_analytic", "p_mc", "mc_stderr"]
            }
            ExperimentKind::BerCurve | ExperimentKind::DiscretePhaseBer => {
                &["P_t_dbm", "M", "N_b", "r", "ber_sim", "ber_theory", "bits"]
            }
            ExperimentKind::SinrVsM => &["M", "pdp", "mode", "sinr_mean_db", "sinr_stderr"],
            ExperimentKind::GammaTable => &["N_b", "P_t_dbm", "kappa", "rho", "n_samples"],
            ExperimentKind::SepCurve => &["P_t_dbm", "M", "N_b", "Q", "kappa", "rho", "sep"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Preset sizes: `Fast` finishes in well under a minute, `Paper` uses the
/// full grids and trial counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    #[default]
    Fast,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Profile::Fast),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Parse(format!("unknown profile {s:?} (expected fast or paper)"))),
        }
    }
}

/// One swept scenario parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// A numeric `ScenarioConfig` key: `M`, `N_b`, `N_g`, `P_t_dbm`, `W_0_dbm`,
    /// `phase_resolution`, `seed`, or `sigma_override` (sets both links).
    pub param: String,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(param: &str, values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            param: param.to_string(),
            values: values.into_iter().collect(),
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub base: ScenarioConfig,
    /// Outermost first.
    pub sweeps: Vec<Sweep>,
    /// Threshold factors X (ISI probability kinds).
    pub thresholds: Vec<f64>,
    /// Phase controllers (BER and SINR kinds).
    pub modes: Vec<PhaseMode>,
    /// Power-delay profiles (SINR kind).
    pub pdps: Vec<PdpKind>,
    /// PSK orders (SEP kind).
    pub orders: Vec<u32>,
    /// Monte Carlo trials per sweep point.
    pub trials: u64,
    pub symbols_per_trial: usize,
    /// SINR samples behind each gamma fit.
    pub fit_samples: u64,
    pub output_path: PathBuf,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

const CANDIDATE_SIGMAS: [f64; 2] = [1e-2, 1e-3];

impl ExperimentSpec {
    /// Preset for `kind` on top of `base`. The preset overrides the swept
    /// axes of that experiment; everything else comes from `base`.
    pub fn preset(kind: ExperimentKind, profile: Profile, base: ScenarioConfig, output_path: impl Into<PathBuf>) -> Self {
        let fast = profile == Profile::Fast;
        let thresholds = if fast {
            vec![1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0]
        } else {
            (1..=50).map(f64::from).collect()
        };
        let s2 = base.scenario == Selectivity::S2;
        let mut spec = ExperimentSpec {
            kind,
            base,
            sweeps: Vec::new(),
            thresholds: Vec::new(),
            modes: vec![PhaseMode::Ideal],
            pdps: Vec::new(),
            orders: Vec::new(),
            trials: 1,
            symbols_per_trial: DEFAULT_SYMBOLS_PER_TRIAL,
            fit_samples: if fast { 20_000 } else { 1_000_000 },
            output_path: output_path.into(),
        };
        let sigmas = Sweep::new("sigma_override", CANDIDATE_SIGMAS);
        match kind {
            ExperimentKind::IsiProbSweep => {
                spec.thresholds = thresholds;
                spec.trials = if fast { 20_000 } else { 100_000 };
                spec.sweeps = if s2 {
                    vec![
                        sigmas,
                        Sweep::new("M", [32.0]),
                        Sweep::new("N_b", [10.0, 20.0, 40.0]),
                        Sweep::new("N_g", [10.0, 20.0, 40.0]),
                    ]
                } else {
                    vec![sigmas, Sweep::new("M", [256.0]), Sweep::new("N_b", [5.0, 10.0, 15.0])]
                };
            }
            ExperimentKind::IsiProbVsM => {
                spec.thresholds = thresholds;
                spec.trials = if fast { 20_000 } else { 100_000 };
                spec.sweeps = vec![sigmas, Sweep::new("M", [16.0, 64.0, 256.0])];
            }
            ExperimentKind::BerCurve => {
                spec.trials = if fast { 2_000 } else { 100_000 };
                spec.sweeps = vec![
                    Sweep::new("M", [64.0, 128.0, 256.0]),
                    Sweep::new("P_t_dbm", if fast { grid(0.0, 40.0, 5.0) } else { grid(-10.0, 40.0, 2.5) }),
                ];
            }
            ExperimentKind::DiscretePhaseBer => {
                spec.trials = if fast { 2_000 } else { 100_000 };
                spec.modes = vec![PhaseMode::Ideal, PhaseMode::Quantized(1), PhaseMode::Quantized(2)];
                spec.sweeps = vec![
                    Sweep::new("M", [16.0, 64.0, 256.0]),
                    Sweep::new("P_t_dbm", if fast { grid(0.0, 60.0, 5.0) } else { grid(0.0, 60.0, 2.5) }),
                ];
            }
            ExperimentKind::SinrVsM => {
                spec.trials = if fast { 10_000 } else { 100_000 };
                spec.modes = vec![PhaseMode::Ideal, PhaseMode::Blind];
                spec.pdps = vec![PdpKind::Uniform, PdpKind::exponential()];
                spec.sweeps = vec![
                    Sweep::new("N_b", [4.0]),
                    Sweep::new("P_t_dbm", [30.0]),
                    Sweep::new("M", [16.0, 32.0, 64.0, 128.0, 256.0]),
                ];
            }
            ExperimentKind::GammaTable => {
                spec.sweeps = vec![
                    Sweep::new("M", [128.0]),
                    Sweep::new("N_b", [1.0, 2.0, 5.0, 9.0]),
                    Sweep::new("P_t_dbm", grid(5.0, 30.0, 5.0)),
                ];
            }
            ExperimentKind::SepCurve => {
                spec.orders = vec![2, 4, 8];
                spec.fit_samples = if fast { 20_000 } else { 100_000 };
                spec.sweeps = vec![
                    Sweep::new("M", [64.0, 128.0, 256.0]),
                    Sweep::new("P_t_dbm", if fast { grid(0.0, 40.0, 5.0) } else { grid(0.0, 40.0, 2.5) }),
                ];
            }
        }
        spec
    }

    /// Every sweep point as a concrete, validated scenario, in row order.
    pub fn points(&self) -> Result<Vec<ScenarioConfig>> {
        let mut errs = ConfigErrors::default();
        if self.trials == 0 && !matches!(self.kind, ExperimentKind::GammaTable) {
            errs.push("trials ≥ 1 violated");
        }
        for s in &self.sweeps {
            if let Err(e) = apply_param(&mut self.base.clone(), &s.param, 0.0) {
                if !matches!(e, Error::Domain(_)) {
                    errs.push(e.to_string());
                }
            }
            if s.values.is_empty() {
                errs.push(format!("sweep over {} has no values", s.param));
            }
        }
        let missing: &[(bool, &str)] = match self.kind {
            ExperimentKind::IsiProbSweep | ExperimentKind::IsiProbVsM => {
                &[(self.thresholds.is_empty(), "threshold X")]
            }
            ExperimentKind::BerCurve | ExperimentKind::DiscretePhaseBer => {
                &[(self.modes.is_empty(), "phase mode")]
            }
            ExperimentKind::SinrVsM => &[(self.modes.is_empty(), "phase mode"), (self.pdps.is_empty(), "PDP")],
            ExperimentKind::SepCurve => &[(self.orders.is_empty(), "PSK order")],
            ExperimentKind::GammaTable => &[],
        };
        for (empty, what) in missing {
            if *empty {
                errs.push(format!("{} needs at least one {what}", self.kind));
            }
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }

        let mut points = vec![self.base.clone()];
        for s in &self.sweeps {
            let mut next = Vec::with_capacity(points.len() * s.values.len());
            for p in &points {
                for &v in &s.values {
                    let mut cfg = p.clone();
                    apply_param(&mut cfg, &s.param, v)?;
                    next.push(cfg);
                }
            }
            points = next;
        }
        for (i, p) in points.iter_mut().enumerate() {
            let v = p.violations();
            if !v.is_empty() {
                return Err(Error::Config(ConfigErrors(
                    v.iter().map(|m| format!("sweep point {i}: {m}")).collect(),
                )));
            }
            p.seed = derive_seed(self.base.seed, i as u64);
        }
        Ok(points)
    }
}

/// Sets the named `ScenarioConfig` key to `value`.
pub fn apply_param(cfg: &mut ScenarioConfig, name: &str, value: f64) -> Result<()> {
    let count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::Domain(format!("{name} must be a non-negative integer, got {v}")))
        }
    };
    match name {
        "M" => cfg.elements = count(value)?,
        "N_b" => cfg.tx_paths = count(value)?,
        "N_g" => cfg.rx_paths = count(value)?,
        "P_t_dbm" => cfg.tx_power_dbm = value,
        "W_0_dbm" => cfg.noise_power_dbm = value,
        "phase_resolution" => cfg.phase_resolution = Some(count(value)? as u32),
        "seed" => cfg.seed = count(value)? as u64,
        "sigma_override" => {
            cfg.sigma_override = Some(SigmaOverride::both(value));
            cfg.geometry = None;
        }
        "scenario" | "geometry" | "pdp" => {
            return Err(Error::Parse(format!("{name} cannot be swept over numeric values")))
        }
        _ => return Err(Error::Parse(format!("sweep parameter {name:?} is not a scenario key"))),
    }
    Ok(())
}

/// Parses and checks a scenario file, reporting every violation at once.
pub fn validate_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    load_config(path)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Effective per-link standard deviation `(σ_b² σ_g²)^{1/4}`.
fn effective_sigma(cfg: &ScenarioConfig) -> Result<f64> {
    let (vb, vg) = link_variance(cfg)?;
    Ok((vb * vg).sqrt().sqrt())
}

fn gamma_fit_for(cfg: &ScenarioConfig, samples: u64) -> Result<GammaFit> {
    fit_gamma(&sample_gamma_m(cfg, samples, derive_seed(cfg.seed, 1))?)
}

fn point_rows(spec: &ExperimentSpec, cfg: &ScenarioConfig) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    match spec.kind {
        ExperimentKind::IsiProbSweep | ExperimentKind::IsiProbVsM => {
            let sigma = effective_sigma(cfg)?;
            let mc = isi_elimination_mc_multi(cfg, &spec.thresholds, spec.trials, cfg.seed)?;
            for (&x, est) in spec.thresholds.iter().zip(mc) {
                rows.push(vec![
                    num(x),
                    cfg.tx_paths.to_string(),
                    cfg.rx_paths.to_string(),
                    cfg.elements.to_string(),
                    num(sigma),
                    num(isi_elimination_probability(cfg, x)?),
                    num(est.p),
                    num(est.std_error),
                ]);
            }
        }
        ExperimentKind::BerCurve | ExperimentKind::DiscretePhaseBer => {
            let theory = if cfg.scenario == Selectivity::S1 && spec.modes.contains(&PhaseMode::Ideal) {
                Some(sep_bpsk(&gamma_fit_for(cfg, spec.fit_samples)?)?)
            } else {
                None
            };
            for (k, &mode) in spec.modes.iter().enumerate() {
                let mut c = cfg.clone();
                c.seed = derive_seed(cfg.seed, 2 + k as u64);
                let m = ber_monte_carlo(&c, mode, spec.trials, spec.symbols_per_trial)?;
                let r = match mode {
                    PhaseMode::Quantized(r) => r.to_string(),
                    other => other.label(),
                };
                let th = match (mode, theory) {
                    (PhaseMode::Ideal, Some(t)) => num(t),
                    _ => String::new(),
                };
                rows.push(vec![
                    num(cfg.tx_power_dbm),
                    cfg.elements.to_string(),
                    cfg.tx_paths.to_string(),
                    r,
                    num(m.ber()),
                    th,
                    m.bits_total.to_string(),
                ]);
            }
        }
        ExperimentKind::SinrVsM => {
            for (i, &pdp) in spec.pdps.iter().enumerate() {
                let mut c = cfg.clone();
                c.pdp = pdp;
                for (k, &mode) in spec.modes.iter().enumerate() {
                    let seed = derive_seed(cfg.seed, (i * spec.modes.len() + k) as u64);
                    let mom = sinr_monte_carlo(&c, mode, spec.trials, seed)?;
                    let mean = mom.mean();
                    let se_db = 10.0 / std::f64::consts::LN_10 * mom.std_error() / mean;
                    rows.push(vec![
                        cfg.elements.to_string(),
                        pdp.label().to_string(),
                        mode.label(),
                        num(db(mean)),
                        num(se_db),
                    ]);
                }
            }
        }
        ExperimentKind::GammaTable => {
            let fit = gamma_fit_for(cfg, spec.fit_samples)?;
            rows.push(vec![
                cfg.tx_paths.to_string(),
                num(cfg.tx_power_dbm),
                num(fit.kappa),
                num(fit.rho),
                fit.n_samples.to_string(),
            ]);
        }
        ExperimentKind::SepCurve => {
            let fit = gamma_fit_for(cfg, spec.fit_samples)?;
            for &q in &spec.orders {
                rows.push(vec![
                    num(cfg.tx_power_dbm),
                    cfg.elements.to_string(),
                    cfg.tx_paths.to_string(),
                    q.to_string(),
                    num(fit.kappa),
                    num(fit.rho),
                    num(sep_psk(&fit, q)?),
                ]);
            }
        }
    }
    Ok(rows)
}

/// Runs the experiment and returns the CSV text.
pub fn render_csv(spec: &ExperimentSpec) -> Result<String> {
    let points = spec.points()?;
    let blocks: Vec<Vec<Vec<String>>> = points
        .par_iter()
        .map(|cfg| point_rows(spec, cfg))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(spec.kind.header())?;
    for row in blocks.iter().flatten() {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}

/// Runs the experiment and writes the CSV to `spec.output_path`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<PathBuf> {
    let text = render_csv(spec)?;
    if let Some(dir) = spec.output_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&spec.output_path, text)?;
    Ok(spec.output_path.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::preset(kind, Profile::Fast, ScenarioConfig::reference(), "unused.csv");
        spec.trials = 1;
        spec.fit_samples = 200;
        spec.thresholds.truncate(2);
        for s in &mut spec.sweeps {
            s.values.truncate(1);
        }
        spec
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("fast".parse::<Profile>().unwrap(), Profile::Fast);
        assert_eq!("paper".parse::<Profile>().unwrap(), Profile::Paper);
        assert!("slow".parse::<Profile>().is_err());
    }

    #[test]
    fn sweep_points_are_cartesian_and_seeded() {
        let mut spec = tiny(ExperimentKind::BerCurve);
        spec.sweeps = vec![Sweep::new("M", [8.0, 16.0]), Sweep::new("P_t_dbm", [0.0, 10.0, 20.0])];
        let pts = spec.points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4].elements, 16);
        assert_eq!(pts[4].tx_power_dbm, 10.0);
        let mut seeds: Vec<u64> = pts.iter().map(|p| p.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), 6);
    }

    #[test]
    fn bad_sweeps_are_rejected() {
        let mut spec = tiny(ExperimentKind::BerCurve);
        spec.sweeps = vec![Sweep::new("bogus", [1.0])];
        assert!(matches!(spec.points(), Err(Error::Config(_))));
        spec.sweeps = vec![Sweep::new("M", [0.0])];
        let err = spec.points().unwrap_err().to_string();
        assert!(err.contains("M ≥ 1 violated"), "{err}");
        spec.sweeps = vec![Sweep::new("M", [2.5])];
        assert!(spec.points().is_err());
        spec.sweeps = vec![];
        spec.trials = 0;
        assert!(spec.points().is_err());
    }

    #[test]
    fn sigma_sweep_replaces_geometry() {
        let mut cfg = ScenarioConfig::reference();
        apply_param(&mut cfg, "sigma_override", 1e-3).unwrap();
        assert!(cfg.geometry.is_none());
        assert!(cfg.validate().is_ok());
        assert!((effective_sigma(&cfg).unwrap() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn every_kind_emits_header_and_rows() {
        for kind in ExperimentKind::ALL {
            let spec = tiny(kind);
            let text = render_csv(&spec).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next().unwrap(), kind.header().join(","));
            let inner = match kind {
                ExperimentKind::IsiProbSweep | ExperimentKind::IsiProbVsM => spec.thresholds.len(),
                ExperimentKind::BerCurve | ExperimentKind::DiscretePhaseBer => spec.modes.len(),
                ExperimentKind::SinrVsM => spec.modes.len() * spec.pdps.len(),
                ExperimentKind::GammaTable => 1,
                ExperimentKind::SepCurve => spec.orders.len(),
            };
            let rows: Vec<&str> = lines.collect();
            assert_eq!(rows.len(), inner, "{kind}");
            for r in rows {
                assert_eq!(r.split(',').count(), kind.header().len(), "{kind}: {r}");
            }
        }
    }

    #[test]
    fn output_is_reproducible() {
        let spec = tiny(ExperimentKind::DiscretePhaseBer);
        assert_eq!(render_csv(&spec).unwrap(), render_csv(&spec).unwrap());
    }
}
