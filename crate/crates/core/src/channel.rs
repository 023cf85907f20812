//! Rayleigh multipath realizations and the effective post-RIS channel.
//!
//! A realization holds one complex coefficient per (RIS element, path) on
//! each side of the surface. Path `l` (0-based) sits at integer delay `l`
//! symbols. Combining through the surface with phases `θ` gives the
//! end-to-end taps
//!
//! ```text
//! h[d] = Σ_{(l1, l2): τ[l1] + ξ[l2] = d}  Σ_m b[m, l1] · g[m, l2] · e^{jθ_m}
//! ```
//!
//! Pairs whose delays collide add coherently in one bin.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ris::PhaseConfig;
use crate::scenario::{link_variance, pdp_profile, ScenarioConfig};

/// Draws from `CN(0, variance)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Per-element tap coefficients of both RIS links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Tx–RIS coefficients, `M × N_b`.
    pub b: Array2<Complex64>,
    /// RIS–Rx coefficients, `M × N_g`.
    pub g: Array2<Complex64>,
    /// Integer delay (symbols) of each Tx–RIS path.
    pub tau: Vec<usize>,
    /// Integer delay (symbols) of each RIS–Rx path.
    pub xi: Vec<usize>,
}

impl ChannelRealization {
    /// Builds a realization with consecutive delays `0, 1, 2, …` on both links.
    pub fn new(b: Array2<Complex64>, g: Array2<Complex64>) -> Result<Self> {
        let tau = (0..b.ncols()).collect();
        let xi = (0..g.ncols()).collect();
        Self::with_delays(b, g, tau, xi)
    }

    pub fn with_delays(
        b: Array2<Complex64>,
        g: Array2<Complex64>,
        tau: Vec<usize>,
        xi: Vec<usize>,
    ) -> Result<Self> {
        if b.nrows() == 0 || b.ncols() == 0 || g.ncols() == 0 {
            return Err(Error::Domain("channel needs at least one element and path".into()));
        }
        if g.nrows() != b.nrows() {
            return Err(Error::Dimension {
                expected: b.nrows(),
                actual: g.nrows(),
            });
        }
        for (delays, paths) in [(&tau, b.ncols()), (&xi, g.ncols())] {
            if delays.len() != paths {
                return Err(Error::Dimension {
                    expected: paths,
                    actual: delays.len(),
                });
            }
            if delays[0] != 0 || delays.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Domain(format!(
                    "delays must start at 0 and strictly increase, got {delays:?}"
                )));
            }
        }
        Ok(Self { b, g, tau, xi })
    }

    pub fn elements(&self) -> usize {
        self.b.nrows()
    }

    pub fn tx_paths(&self) -> usize {
        self.b.ncols()
    }

    pub fn rx_paths(&self) -> usize {
        self.g.ncols()
    }

    /// Cascaded first-path coefficient `b[m, 0] · g[m, 0]` of element `m`.
    pub fn first_path(&self, m: usize) -> Complex64 {
        self.b[[m, 0]] * self.g[[m, 0]]
    }

    /// Text dump for debugging.
    ///
    /// Layout: a header line `M N_b N_g`, the `tau` and `xi` delay lines, then
    /// `b` and `g` in row-major order (element-major, path index fastest), one
    /// `re im` pair per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.elements(), self.tx_paths(), self.rx_paths())?;
        let join = |d: &[usize]| d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(w, "{}", join(&self.tau))?;
        writeln!(w, "{}", join(&self.xi))?;
        for z in self.b.iter().chain(self.g.iter()) {
            writeln!(w, "{:e} {:e}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// Draws one realization with per-tap variances from the configured PDP.
///
/// All of `b` is drawn first (element-major), then all of `g`.
pub fn draw_channel<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> ChannelRealization {
    let (var_b, var_g) = link_variance(config).expect("draw_channel needs a valid config");
    draw_with_variances(
        config.elements,
        &pdp_profile(config.pdp, config.tx_paths, var_b),
        &pdp_profile(config.pdp, config.rx_paths, var_g),
        rng,
    )
}

pub(crate) fn draw_with_variances<R: Rng + ?Sized>(
    elements: usize,
    pdp_b: &[f64],
    pdp_g: &[f64],
    rng: &mut R,
) -> ChannelRealization {
    let b = Array2::from_shape_fn((elements, pdp_b.len()), |(_, l)| {
        complex_gaussian(rng, pdp_b[l])
    });
    let g = Array2::from_shape_fn((elements, pdp_g.len()), |(_, l)| {
        complex_gaussian(rng, pdp_g[l])
    });
    ChannelRealization {
        b,
        g,
        tau: (0..pdp_b.len()).collect(),
        xi: (0..pdp_g.len()).collect(),
    }
}

/// End-to-end taps indexed by delay bin relative to the first path.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub taps: Vec<Complex64>,
}

impl EffectiveChannel {
    pub fn single(h0: Complex64) -> Self {
        Self { taps: vec![h0] }
    }

    /// Largest delay bin.
    pub fn span(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|h| h.norm_sqr()).sum()
    }
}

fn check_phases(ch: &ChannelRealization, phases: &PhaseConfig) -> Result<Vec<Complex64>> {
    if phases.theta.len() != ch.elements() {
        return Err(Error::Dimension {
            expected: ch.elements(),
            actual: phases.theta.len(),
        });
    }
    Ok(phases.rotations())
}

/// Cascaded coefficient of path pair `(l1, l2)` through the whole surface.
fn pair_gain(ch: &ChannelRealization, rot: &[Complex64], l1: usize, l2: usize) -> Complex64 {
    let b = ch.b.column(l1);
    let g = ch.g.column(l2);
    b.iter()
        .zip(g.iter())
        .zip(rot)
        .map(|((b, g), r)| b * g * r)
        .sum()
}

pub fn effective_taps(ch: &ChannelRealization, phases: &PhaseConfig) -> Result<EffectiveChannel> {
    let rot = check_phases(ch, phases)?;
    let span = ch.tau[ch.tx_paths() - 1] + ch.xi[ch.rx_paths() - 1];
    let mut taps = vec![Complex64::new(0.0, 0.0); span + 1];
    for l1 in 0..ch.tx_paths() {
        for l2 in 0..ch.rx_paths() {
            taps[ch.tau[l1] + ch.xi[l2]] += pair_gain(ch, &rot, l1, l2);
        }
    }
    Ok(EffectiveChannel { taps })
}

/// Which path pairs count as intersymbol interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsiIndexSet {
    /// Every pair except the first, `(l1, l2) ≠ (1, 1)`.
    #[default]
    Physical,
    /// The pairs whose statistics the closed-form analysis models: `l1 ≥ 2`
    /// with the single RIS–Rx path when `N_g = 1`, otherwise `l1 ≥ 2 ∧ l2 ≥ 2`.
    /// Cross terms with exactly one first path are dropped.
    AnalysisCompatible,
}

impl IsiIndexSet {
    /// The ISI pairs (0-based) for a channel with the given path counts.
    pub fn pairs(self, tx_paths: usize, rx_paths: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for l1 in 0..tx_paths {
            for l2 in 0..rx_paths {
                let keep = match self {
                    IsiIndexSet::Physical => (l1, l2) != (0, 0),
                    IsiIndexSet::AnalysisCompatible if rx_paths == 1 => l1 >= 1,
                    IsiIndexSet::AnalysisCompatible => l1 >= 1 && l2 >= 1,
                };
                if keep {
                    out.push((l1, l2));
                }
            }
        }
        out
    }
}

/// First-path gain and per-pair ISI gains.
#[derive(Debug, Clone, PartialEq)]
pub struct TapAggregates {
    /// `A = Σ_m b[m,0] g[m,0] e^{jθ_m}`.
    pub first: Complex64,
    /// One `Σ_m b[m,l1] g[m,l2] e^{jθ_m}` per ISI pair.
    pub isi: Vec<Complex64>,
}

impl TapAggregates {
    pub fn isi_power(&self) -> f64 {
        self.isi.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn tap_aggregates(
    ch: &ChannelRealization,
    phases: &PhaseConfig,
    set: IsiIndexSet,
) -> Result<TapAggregates> {
    let rot = check_phases(ch, phases)?;
    Ok(aggregates_with_rotations(ch, &rot, set))
}

pub(crate) fn aggregates_with_rotations(
    ch: &ChannelRealization,
    rot: &[Complex64],
    set: IsiIndexSet,
) -> TapAggregates {
    let first = pair_gain(ch, rot, 0, 0);
    let isi = set
        .pairs(ch.tx_paths(), ch.rx_paths())
        .into_iter()
        .map(|(l1, l2)| pair_gain(ch, rot, l1, l2))
        .collect();
    TapAggregates { first, isi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::trial_rng;
    use crate::ris::{blind_phases, ideal_phases, PhaseConfig, PhaseMode};
    use approx::assert_relative_eq;
    use ndarray::array;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn phases(theta: Vec<f64>) -> PhaseConfig {
        PhaseConfig {
            theta,
            mode: PhaseMode::Ideal,
        }
    }

    #[test]
    fn single_path_unit_channel() {
        let ch = ChannelRealization::new(array![[c(1.0, 0.0)]], array![[c(1.0, 0.0)]]).unwrap();
        let eff = effective_taps(&ch, &phases(vec![0.0])).unwrap();
        assert_eq!(eff.taps.len(), 1);
        assert_relative_eq!(eff.taps[0].re, 1.0);
        assert_relative_eq!(eff.taps[0].im, 0.0);
    }

    #[test]
    fn phase_cancellation() {
        let z = Complex64::from_polar(1.0, PI / 4.0);
        let ch = ChannelRealization::new(array![[z]], array![[z]]).unwrap();
        let eff = effective_taps(&ch, &phases(vec![-PI / 2.0])).unwrap();
        assert_relative_eq!(eff.taps[0].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(eff.taps[0].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let ch = ChannelRealization::new(array![[c(1.0, 0.0)], [c(1.0, 0.0)]], array![[c(1.0, 0.0)], [c(1.0, 0.0)]])
            .unwrap();
        assert!(matches!(
            effective_taps(&ch, &phases(vec![0.0])),
            Err(Error::Dimension { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn bad_delays_rejected() {
        let b = array![[c(1.0, 0.0), c(1.0, 0.0)]];
        let g = array![[c(1.0, 0.0)]];
        assert!(ChannelRealization::with_delays(b.clone(), g.clone(), vec![0, 0], vec![0]).is_err());
        assert!(ChannelRealization::with_delays(b.clone(), g.clone(), vec![1, 2], vec![0]).is_err());
        assert!(ChannelRealization::with_delays(b, g, vec![0, 3], vec![0]).is_ok());
    }

    #[test]
    fn taps_match_triple_sum() {
        let mut cfg = ScenarioConfig::with_sigma(2, 2, 1.0);
        cfg.scenario = crate::scenario::Selectivity::S2;
        cfg.rx_paths = 2;
        for trial in 0..20 {
            let mut rng = trial_rng(99, trial);
            let ch = draw_channel(&cfg, &mut rng);
            let theta: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
            let eff = effective_taps(&ch, &phases(theta.clone())).unwrap();

            // brute force over delay bins, paths and elements
            for d in 0..=2usize {
                let mut want = c(0.0, 0.0);
                for l1 in 0..2 {
                    for l2 in 0..2 {
                        if l1 + l2 != d {
                            continue;
                        }
                        for m in 0..2 {
                            want += ch.b[[m, l1]] * ch.g[[m, l2]] * Complex64::from_polar(1.0, theta[m]);
                        }
                    }
                }
                assert_relative_eq!(eff.taps[d].re, want.re, epsilon = 1e-12);
                assert_relative_eq!(eff.taps[d].im, want.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn draw_is_deterministic_and_shaped() {
        let cfg = ScenarioConfig::with_sigma(3, 1, 1e-3);
        let a = draw_channel(&cfg, &mut trial_rng(1, 0));
        let b = draw_channel(&cfg, &mut trial_rng(1, 0));
        assert_eq!(a, b);
        assert_eq!(a.b.dim(), (3, 1));
        assert_eq!(a.g.dim(), (3, 1));
        assert_eq!((a.tau.clone(), a.xi.clone()), (vec![0], vec![0]));
    }

    #[test]
    fn aggregates_under_ideal_phases() {
        let cfg = ScenarioConfig::with_sigma(8, 3, 1.0);
        for t in 0..50 {
            let ch = draw_channel(&cfg, &mut trial_rng(3, t));
            let ideal = ideal_phases(&ch);
            let agg = tap_aggregates(&ch, &ideal, IsiIndexSet::Physical).unwrap();
            let bound: f64 = (0..8).map(|m| ch.first_path(m).norm()).sum();
            assert_relative_eq!(agg.first.re, bound, max_relative = 1e-12);
            assert!(agg.first.im.abs() < 1e-12 * bound);
            assert_eq!(agg.isi.len(), 2);

            let eff = effective_taps(&ch, &ideal).unwrap();
            assert_relative_eq!(eff.taps[0].re, agg.first.re, max_relative = 1e-12);
            // distinct delays in S1, so tap energy splits exactly
            assert_relative_eq!(
                eff.energy(),
                agg.first.norm_sqr() + agg.isi_power(),
                max_relative = 1e-12
            );

            let blind = tap_aggregates(&ch, &blind_phases(8), IsiIndexSet::Physical).unwrap();
            assert!(blind.first.norm() <= bound * (1.0 + 1e-12));
            let direct: Complex64 = (0..8).map(|m| ch.first_path(m)).sum();
            assert_relative_eq!(blind.first.re, direct.re, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_isi_with_single_paths() {
        let cfg = ScenarioConfig::with_sigma(4, 1, 1.0);
        let ch = draw_channel(&cfg, &mut trial_rng(0, 0));
        let agg = tap_aggregates(&ch, &ideal_phases(&ch), IsiIndexSet::Physical).unwrap();
        assert!(agg.isi.is_empty());
    }

    #[test]
    fn isi_index_sets() {
        assert_eq!(IsiIndexSet::Physical.pairs(1, 1), vec![]);
        assert_eq!(IsiIndexSet::AnalysisCompatible.pairs(3, 1), vec![(1, 0), (2, 0)]);
        assert_eq!(IsiIndexSet::Physical.pairs(2, 2), vec![(0, 1), (1, 0), (1, 1)]);
        assert_eq!(IsiIndexSet::AnalysisCompatible.pairs(2, 2), vec![(1, 1)]);
        assert_eq!(IsiIndexSet::AnalysisCompatible.pairs(40, 40).len(), 39 * 39);
    }

    #[test]
    fn rayleigh_amplitude_mean() {
        // E|b| = σ√π/2 for b ~ CN(0, σ²)
        let sigma: f64 = 0.7;
        let n = 200_000;
        let mut rng = trial_rng(8, 0);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let a = complex_gaussian(&mut rng, sigma * sigma).norm();
            s += a;
            s2 += a * a;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - sigma * PI.sqrt() / 2.0).abs() < 3.0 * se);
    }

    #[test]
    fn text_dump_layout() {
        let ch = ChannelRealization::new(
            array![[c(1.0, 2.0), c(3.0, 4.0)]],
            array![[c(5.0, 6.0)]],
        )
        .unwrap();
        let mut out = Vec::new();
        ch.write_text(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "1 2 1");
        assert_eq!(lines[1], "0 1");
        assert_eq!(lines[3], "1e0 2e0");
        assert_eq!(lines[4], "3e0 4e0");
        assert_eq!(lines[5], "5e0 6e0");
    }
}
