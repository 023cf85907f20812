//! Probability that the RIS-boosted first tap dominates the ISI.
//!
//! Under ideal phases the first-path gain `A = Σ_m |b₁^m||g₁^m|` is, for large
//! `M`, Gaussian with mean `μ₁ = Mπσ_bσ_g/4` and variance
//! `σ₁² = Mσ_b²σ_g²(1 − π²/16)`. Each ISI pair gain `B_i` is `CN(0, Mσ_b²σ_g²)`
//! and independent of `A`. The event "first tap at least `X` times stronger
//! than the combined ISI" is `C = A² − X Σ_i |B_i|² > 0`.
//!
//! `C` has the characteristic function
//!
//! ```text
//! Ψ(ω) = (1 − 2jωσ₁²)^(−1/2) · (1 + 2jωσ₂²)^(−n) · exp(jωμ₁² / (1 − 2jωσ₁²))
//! ```
//!
//! with `σ₂² = X·Mσ_b²σ_g²/2` (the per-real-dimension variance of `√X·B_i`)
//! and `n` ISI pairs. Its CDF follows from the Gil-Pelaez inversion
//!
//! ```text
//! F(c) = 1/2 − (1/π) ∫₀^∞ Im{e^{−jωc} Ψ(ω)} / ω dω
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{aggregates_with_rotations, draw_channel, IsiIndexSet};
use crate::error::{Error, QuadratureDiagnostics, Result};
use crate::montecarlo::fold_trials;
use crate::quad;
use crate::ris::ideal_phases;
use crate::scenario::{link_variance, PdpKind, ScenarioConfig};

/// Default negligibility threshold on the first-tap to ISI power ratio.
pub const DEFAULT_THRESHOLD: f64 = 10.0;

/// Absolute tolerance on the Gil-Pelaez integral.
pub const CDF_ABS_TOL: f64 = 1e-6;
const PANEL_TOL: f64 = CDF_ABS_TOL / 1024.0;
const TAIL_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 256;
const PANEL_PIECES: usize = 8;
const MAX_PANEL_INTERVALS: usize = 200_000;
// Below this (scaled) frequency the integrand is replaced by its ω → 0 limit.
const SERIES_CUTOFF: f64 = 1e-9;
/// Tail mass below which [`cdf_c`] returns exactly 0 or 1.
pub const TAIL_CUTOFF: f64 = 1e-10;
// Tail tolerance relative to the tail mass being computed.
const TAIL_REL_TOL: f64 = 1e-3;
// Tolerance refinement stops here, keeping panel tolerances above roundoff.
const MIN_TOL_SCALE: f64 = 1e-6;
const MAX_REFINEMENTS: usize = 4;

/// Closed-form moments that parameterize the characteristic function of `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbStatistics {
    /// Mean of `A`.
    pub mu1: f64,
    /// Variance of `A`.
    pub sigma1_sq: f64,
    /// Per-real-dimension variance of one `√X·B_i`.
    pub sigma2_sq: f64,
    /// Number of ISI pairs.
    pub dof_pairs: usize,
    /// Threshold factor `X`.
    pub threshold: f64,
}

impl AbStatistics {
    /// `E[C]`.
    pub fn mean(&self) -> f64 {
        self.mu1 * self.mu1 + self.sigma1_sq - 2.0 * self.dof_pairs as f64 * self.sigma2_sq
    }

    /// A characteristic magnitude of `C`, used to normalize frequencies.
    fn scale(&self) -> f64 {
        self.mu1 * self.mu1 + self.sigma1_sq + 2.0 * self.dof_pairs as f64 * self.sigma2_sq
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            mu1: self.mu1 / s.sqrt(),
            sigma1_sq: self.sigma1_sq / s,
            sigma2_sq: self.sigma2_sq / s,
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        let ok = self.mu1.is_finite()
            && self.mu1 >= 0.0
            && self.sigma1_sq.is_finite()
            && self.sigma1_sq > 0.0
            && self.sigma2_sq.is_finite()
            && self.sigma2_sq >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid A/B statistics: {self:?}")))
        }
    }
}

/// Number of ISI pairs in the analysis-compatible index set.
pub fn isi_pair_count(config: &ScenarioConfig) -> usize {
    IsiIndexSet::AnalysisCompatible
        .pairs(config.tx_paths, config.rx_paths)
        .len()
}

pub fn ab_statistics(config: &ScenarioConfig, threshold: f64) -> Result<AbStatistics> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Domain(format!("threshold X must be positive, got {threshold}")));
    }
    if config.pdp != PdpKind::Uniform {
        return Err(Error::Unsupported(
            "closed-form A/B statistics assume a uniform power-delay profile".into(),
        ));
    }
    let (var_b, var_g) = link_variance(config)?;
    let m = config.elements as f64;
    let prod_var = var_b * var_g;
    Ok(AbStatistics {
        mu1: m * PI * prod_var.sqrt() / 4.0,
        sigma1_sq: m * prod_var * (1.0 - PI * PI / 16.0),
        sigma2_sq: threshold * m * prod_var / 2.0,
        dof_pairs: isi_pair_count(config),
        threshold,
    })
}

/// Characteristic function `E[e^{jωC}]`.
pub fn cf_c(omega: f64, stats: &AbStatistics) -> Complex64 {
    let j = Complex64::i();
    let d1 = Complex64::new(1.0, -2.0 * omega * stats.sigma1_sq);
    let d2 = Complex64::new(1.0, 2.0 * omega * stats.sigma2_sq);
    let log_psi = -0.5 * d1.ln() - stats.dof_pairs as f64 * d2.ln()
        + j * omega * stats.mu1 * stats.mu1 / d1;
    log_psi.exp()
}

/// Lower bound on the logarithmic decay rate of `|Ψ|` beyond `omega`.
fn decay_floor(omega: f64, stats: &AbStatistics) -> f64 {
    let a = 4.0 * omega * omega * stats.sigma1_sq * stats.sigma1_sq;
    let b = 4.0 * omega * omega * stats.sigma2_sq * stats.sigma2_sq;
    0.5 * a / (1.0 + a) + stats.dof_pairs as f64 * b / (1.0 + b)
}

/// Bound on `(1/π) |∫_Ω^∞ Im(e^{-jωc} Ψ(ω)) / ω dω|`.
///
/// Beyond `Ω`, `|Ψ(ω)| ≤ |Ψ(Ω)| (Ω/ω)^p` with `p` from [`decay_floor`], which
/// bounds the integral of `|Ψ|/ω` by `|Ψ(Ω)|/p`. For `c ≠ 0` integrating by
/// parts against `e^{-jωc}` gives `(|φ(Ω)| + ∫|φ'|) / |c|` with `φ = Ψ/ω`, and
/// `|φ'| ≤ (κ/Ω) |Ψ|/ω` where `κ/ω` bounds the log-derivative of `φ`.
fn tail_bound(omega: f64, c: f64, st: &AbStatistics) -> f64 {
    let psi = cf_c(omega, st).norm();
    let p = decay_floor(omega, st);
    if !(p > 0.0) {
        return f64::INFINITY;
    }
    let absolute = psi / (PI * p);
    if c == 0.0 {
        return absolute;
    }
    let s1 = st.sigma1_sq;
    let kappa = 1.5
        + st.dof_pairs as f64
        + st.mu1 * st.mu1 / (4.0 * omega * s1 * s1);
    let oscillating = psi / (PI * c.abs() * omega) * (1.0 + kappa / p);
    absolute.min(oscillating)
}

/// `log E[e^{uC}]`, finite for `-1/(2σ₂²) < u < 1/(2σ₁²)`.
fn log_mgf_c(u: f64, st: &AbStatistics) -> f64 {
    let d1 = 1.0 - 2.0 * u * st.sigma1_sq;
    let d2 = 1.0 + 2.0 * u * st.sigma2_sq;
    if d1 <= 0.0 || d2 <= 0.0 {
        return f64::INFINITY;
    }
    u * st.mu1 * st.mu1 / d1 - 0.5 * d1.ln() - st.dof_pairs as f64 * d2.ln()
}

/// Chernoff bound on the smaller tail at `c`: `F(c)` below the mean,
/// `1 − F(c)` above it. The exponent is convex in `u`, so a golden-section
/// search over the admissible side suffices.
fn chernoff_tail(c: f64, st: &AbStatistics) -> f64 {
    let (mut a, mut b) = if c < st.mean() {
        (-0.5 / st.sigma2_sq, 0.0)
    } else {
        (0.0, 0.5 / st.sigma1_sq)
    };
    let g = |u: f64| log_mgf_c(u, st) - u * c;
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if g(x1) < g(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    g(0.5 * (a + b)).min(0.0).exp()
}

/// `P(C ≤ c)` by Gil-Pelaez inversion.
///
/// The problem is first rescaled so `C` is of order one. Points where a
/// Chernoff bound puts the tail below [`TAIL_CUTOFF`] return exactly 0 or 1.
/// Otherwise the half-line is covered by panels `[0, 1], [1, 2], [2, 4], …`,
/// each integrated adaptively, until a bound on the remaining tail falls below
/// tolerance. Near 0 or 1 the tolerances are scaled to the tail mass (first
/// the Chernoff bound, then the computed value), so the tails keep relative
/// accuracy and quadrature noise cannot reverse the ordering of nearby points.
pub fn cdf_c(c: f64, stats: &AbStatistics) -> Result<f64> {
    stats.check()?;
    let s = stats.scale();
    let st = stats.scaled(s);
    let c = c / s;
    let bound = chernoff_tail(c, &st);
    if bound <= TAIL_CUTOFF {
        return Ok(if c < st.mean() { 0.0 } else { 1.0 });
    }
    // Tightened passes are best effort: if one stalls at roundoff, the last
    // result that converged already meets the absolute tolerance.
    let target = |tail: f64| (tail * TAIL_REL_TOL / CDF_ABS_TOL).clamp(MIN_TOL_SCALE, 1.0);
    let mut scale = target(bound);
    let mut f = match gil_pelaez(c, &st, s, scale) {
        Ok(f) => f,
        Err(_) if scale < 1.0 => {
            scale = 1.0;
            gil_pelaez(c, &st, s, scale)?
        }
        Err(e) => return Err(e),
    };
    for _ in 0..MAX_REFINEMENTS {
        let next = target(f.min(1.0 - f));
        if next >= 0.25 * scale {
            break;
        }
        match gil_pelaez(c, &st, s, next) {
            Ok(v) => {
                f = v;
                scale = next;
            }
            Err(_) => break,
        }
    }
    Ok(f)
}

fn gil_pelaez(c: f64, st: &AbStatistics, s: f64, tol_scale: f64) -> Result<f64> {
    let series = (st.mean() - c) / PI;
    let integrand = |w: f64| {
        if w < SERIES_CUTOFF {
            series
        } else {
            (Complex64::from_polar(1.0, -w * c) * cf_c(w, st)).im / (PI * w)
        }
    };
    let panel_tol = PANEL_TOL * tol_scale;
    let tail_tol = TAIL_TOL * tol_scale;
    let abs_tol = CDF_ABS_TOL * tol_scale;

    let mut total = 0.0;
    let mut err = 0.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..MAX_PANELS {
        let est = quad::integrate_split(&integrand, lo, hi, PANEL_PIECES, panel_tol, MAX_PANEL_INTERVALS);
        if !est.converged {
            return Err(Error::Quadrature(QuadratureDiagnostics {
                stage: "Gil-Pelaez panel",
                value: total + est.value,
                error_estimate: err + est.error,
                tolerance: panel_tol,
                intervals: est.intervals,
                upper_limit: hi * s,
            }));
        }
        total += est.value;
        err += est.error;

        let tail = tail_bound(hi, c, st);
        if tail <= tail_tol {
            if err + tail > abs_tol {
                return Err(Error::Quadrature(QuadratureDiagnostics {
                    stage: "Gil-Pelaez total",
                    value: total,
                    error_estimate: err + tail,
                    tolerance: abs_tol,
                    intervals: 0,
                    upper_limit: hi * s,
                }));
            }
            return Ok((0.5 - total).clamp(0.0, 1.0));
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::Quadrature(QuadratureDiagnostics {
        stage: "Gil-Pelaez truncation",
        value: total,
        error_estimate: err,
        tolerance: abs_tol,
        intervals: MAX_PANELS,
        upper_limit: lo * s,
    }))
}

/// `P(A² > X Σ|B_i|²) = 1 − F_C(0)`.
pub fn isi_elimination_probability(config: &ScenarioConfig, threshold: f64) -> Result<f64> {
    let stats = ab_statistics(config, threshold)?;
    if stats.dof_pairs == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - cdf_c(0.0, &stats)?)
}

/// A Monte Carlo proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p: f64,
    pub std_error: f64,
    pub n_trials: u64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, n_trials: u64) -> Self {
        let p = successes as f64 / n_trials as f64;
        Self {
            p,
            std_error: (p * (1.0 - p) / n_trials as f64).sqrt(),
            n_trials,
        }
    }
}

/// Draws `(A², Σ|B_i|²)` per trial under ideal phases with the
/// analysis-compatible ISI pairs, and hands them to `visit`.
fn fold_first_vs_isi<Acc, I, V>(
    config: &ScenarioConfig,
    n_trials: u64,
    seed: u64,
    init: I,
    visit: V,
    merge: impl Fn(Acc, Acc) -> Acc,
) -> Acc
where
    Acc: Send,
    I: Fn() -> Acc + Sync,
    V: Fn(&mut Acc, f64, f64) + Sync,
{
    fold_trials(
        seed,
        n_trials,
        init,
        |acc, _, rng| {
            let ch = draw_channel(config, rng);
            let rot = ideal_phases(&ch).rotations();
            let agg = aggregates_with_rotations(&ch, &rot, IsiIndexSet::AnalysisCompatible);
            visit(acc, agg.first.norm_sqr(), agg.isi_power());
        },
        merge,
    )
}

/// Empirical `P(A² > X Σ|B_i|²)` for each threshold, all from the same draws.
pub fn isi_elimination_mc_multi(
    config: &ScenarioConfig,
    thresholds: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    config.validate()?;
    if n_trials < 1 {
        return Err(Error::Domain("n_trials must be at least 1".into()));
    }
    if let Some(x) = thresholds.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Domain(format!("threshold X must be positive, got {x}")));
    }
    let counts = fold_first_vs_isi(
        config,
        n_trials,
        seed,
        || vec![0u64; thresholds.len()],
        |acc, a2, isi| {
            for (n, x) in acc.iter_mut().zip(thresholds) {
                if a2 > x * isi {
                    *n += 1;
                }
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    Ok(counts
        .into_iter()
        .map(|k| McEstimate::from_counts(k, n_trials))
        .collect())
}

/// Empirical ISI-elimination probability from `n_trials` channel draws.
pub fn isi_elimination_mc(
    config: &ScenarioConfig,
    threshold: f64,
    n_trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    Ok(isi_elimination_mc_multi(config, &[threshold], n_trials, seed)?[0])
}

/// Samples of `C = A² − X Σ|B_i|²` from full channel draws, in trial order.
pub fn sample_c(config: &ScenarioConfig, threshold: f64, n_trials: u64, seed: u64) -> Result<Vec<f64>> {
    config.validate()?;
    Ok(crate::montecarlo::map_trials(seed, n_trials, |_, rng| {
        let ch = draw_channel(config, rng);
        let rot = ideal_phases(&ch).rotations();
        let agg = aggregates_with_rotations(&ch, &rot, IsiIndexSet::AnalysisCompatible);
        agg.first.norm_sqr() - threshold * agg.isi_power()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::trial_rng;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Exp1, StandardNormal};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn chi2_stats() -> AbStatistics {
        AbStatistics {
            mu1: 0.0,
            sigma1_sq: 1.0,
            sigma2_sq: 0.0,
            dof_pairs: 0,
            threshold: 1.0,
        }
    }

    /// Draws C directly from the idealized Gaussian model behind the CF.
    fn draw_model_c<R: Rng>(stats: &AbStatistics, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let a = stats.mu1 + stats.sigma1_sq.sqrt() * z;
        // X|B|² ~ Exp(mean 2σ₂²)
        let isi: f64 = (0..stats.dof_pairs)
            .map(|_| 2.0 * stats.sigma2_sq * rng.sample::<f64, _>(Exp1))
            .sum();
        a * a - isi
    }

    #[test]
    fn statistics_by_substitution() {
        let cfg = ScenarioConfig::with_sigma(1, 1, 1.0);
        let st = ab_statistics(&cfg, 10.0).unwrap();
        assert_relative_eq!(st.mu1, PI / 4.0, epsilon = 1e-15);
        assert_relative_eq!(st.sigma1_sq, 1.0 - PI * PI / 16.0, epsilon = 1e-15);
        assert_relative_eq!(st.sigma2_sq, 5.0, epsilon = 1e-15);
        assert_eq!(st.dof_pairs, 0);

        let mut cfg = ScenarioConfig::with_sigma(32, 40, 1e-3);
        cfg.scenario = crate::scenario::Selectivity::S2;
        cfg.rx_paths = 40;
        assert_eq!(ab_statistics(&cfg, 10.0).unwrap().dof_pairs, 39 * 39);
        assert!(ab_statistics(&cfg, 0.0).is_err());

        cfg.pdp = PdpKind::exponential();
        assert!(matches!(ab_statistics(&cfg, 10.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cf_at_origin_and_structure() {
        let st = ab_statistics(&ScenarioConfig::with_sigma(64, 5, 1e-3), 10.0).unwrap();
        let one = cf_c(0.0, &st);
        assert_relative_eq!(one.re, 1.0);
        assert_relative_eq!(one.im, 0.0);

        // no ISI pairs: noncentral chi-square with one degree of freedom only
        let mut nc = st;
        nc.dof_pairs = 0;
        let w = 1.0 / st.sigma1_sq;
        let d1 = Complex64::new(1.0, -2.0 * w * st.sigma1_sq);
        let want = d1.powf(-0.5) * (Complex64::i() * w * st.mu1 * st.mu1 / d1).exp();
        let got = cf_c(w, &nc);
        assert_relative_eq!(got.re, want.re, epsilon = 1e-12);
        assert_relative_eq!(got.im, want.im, epsilon = 1e-12);
    }

    #[test]
    fn cf_matches_sampled_model() {
        let st = AbStatistics {
            mu1: 2.0,
            sigma1_sq: 0.5,
            sigma2_sq: 0.4,
            dof_pairs: 3,
            threshold: 1.0,
        };
        let scale = st.scale();
        let n = 200_000;
        let mut rng = trial_rng(77, 0);
        let samples: Vec<f64> = (0..n).map(|_| draw_model_c(&st, &mut rng)).collect();
        for w in [0.1 / scale, 1.0 / scale, 10.0 / scale] {
            let (mut re, mut im, mut re2, mut im2) = (0.0, 0.0, 0.0, 0.0);
            for &x in &samples {
                let (s, c) = (w * x).sin_cos();
                re += c;
                im += s;
                re2 += c * c;
                im2 += s * s;
            }
            let nf = n as f64;
            let (re, im) = (re / nf, im / nf);
            let se_re = ((re2 / nf - re * re) / nf).sqrt();
            let se_im = ((im2 / nf - im * im) / nf).sqrt();
            let psi = cf_c(w, &st);
            assert!((psi.re - re).abs() < 4.0 * se_re + 1e-12, "w={w} re {} vs {re}", psi.re);
            assert!((psi.im - im).abs() < 4.0 * se_im + 1e-12, "w={w} im {} vs {im}", psi.im);
        }
    }

    #[test]
    fn cdf_chi_square_oracle() {
        let chi = ChiSquared::new(1.0).unwrap();
        for c in [0.25, 1.0, 3.0] {
            let got = cdf_c(c, &chi2_stats()).unwrap();
            assert!((got - chi.cdf(c)).abs() < 1e-5, "c={c}: {got} vs {}", chi.cdf(c));
        }
        assert!((cdf_c(1.0, &chi2_stats()).unwrap() - 0.682_689_492).abs() < 1e-5);
    }

    #[test]
    fn cdf_limits() {
        let st = ab_statistics(&ScenarioConfig::with_sigma(64, 5, 1e-3), 10.0).unwrap();
        let spread = st.scale();
        assert!(cdf_c(-1e3 * spread, &st).unwrap() < 1e-6);
        assert!(cdf_c(1e3 * spread, &st).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn cdf_matches_sampled_model() {
        let st = AbStatistics {
            mu1: 1.5,
            sigma1_sq: 0.3,
            sigma2_sq: 0.25,
            dof_pairs: 4,
            threshold: 1.0,
        };
        let mut rng = trial_rng(5, 0);
        let mut samples: Vec<f64> = (0..200_000).map(|_| draw_model_c(&st, &mut rng)).collect();
        samples.sort_by(f64::total_cmp);
        for q in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let c = samples[(q * samples.len() as f64) as usize];
            let f = cdf_c(c, &st).unwrap();
            assert!((f - q).abs() < 0.005, "q={q}: F={f}");
        }
    }

    #[test]
    fn cdf_monotone_and_bounded() {
        let st = ab_statistics(&ScenarioConfig::with_sigma(64, 10, 1e-3), 10.0).unwrap();
        let spread = st.scale();
        let mut prev = 0.0;
        for i in 0..100 {
            let c = spread * (-3.0 + 6.0 * i as f64 / 99.0);
            let f = cdf_c(c, &st).unwrap();
            assert!((0.0..=1.0).contains(&f));
            assert!(f >= prev, "F not monotone at {c}: {f} < {prev}");
            prev = f;
        }
    }

    // High-precision Gil-Pelaez values (M=64, N_b=5, σ=1e-3, X=50) at
    // c = t·s with s the scale used by `cdf_c`.
    #[test]
    fn cdf_deep_tail_relative_accuracy() {
        let st = ab_statistics(&ScenarioConfig::with_sigma(64, 5, 1e-3), 50.0).unwrap();
        let s = st.scale();
        for (t, want) in [(-7.0, 8.776_929_6e-12), (-6.99, 9.170_871_4e-12), (-6.5, 7.828_470_7e-11), (-6.0, 6.872_767_8e-10)] {
            let got = cdf_c(t * s, &st).unwrap();
            assert!((got / want - 1.0).abs() < 1e-3, "t={t}: {got:e} vs {want:e}");
        }
    }

    #[test]
    fn chernoff_dominates_tails() {
        let st = ab_statistics(&ScenarioConfig::with_sigma(64, 5, 1e-3), 50.0).unwrap();
        let s = st.scale();
        let sc = st.scaled(s);
        for t in [-7.0, -6.0, -3.0, 3.0, 5.0] {
            let f = cdf_c(t * s, &st).unwrap();
            let tail = if t < sc.mean() { f } else { 1.0 - f };
            assert!(tail <= chernoff_tail(t, &sc) * (1.0 + 1e-9), "t={t}");
        }
    }

    #[test]
    fn cdf_dense_grid_strictly_ordered() {
        let st = ab_statistics(&ScenarioConfig::with_sigma(64, 5, 1e-3), 50.0).unwrap();
        let s = st.scale();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let f = cdf_c(s * (-10.0 + 20.0 * i as f64 / 1000.0), &st).unwrap();
            assert!(f >= prev, "step {i}: {f:e} < {prev:e}");
            prev = f;
        }
    }

    #[test]
    fn no_isi_means_certain_elimination() {
        let cfg = ScenarioConfig::with_sigma(16, 1, 1e-3);
        assert_eq!(isi_elimination_probability(&cfg, 30.0).unwrap(), 1.0);
        assert_eq!(isi_elimination_mc(&cfg, 30.0, 100, 1).unwrap().p, 1.0);
    }

    #[test]
    fn mc_decreasing_in_threshold() {
        let cfg = ScenarioConfig::with_sigma(64, 5, 1e-3);
        let est = isi_elimination_mc_multi(&cfg, &[1.0, 5.0, 10.0, 30.0], 2_000, 3).unwrap();
        assert!(est.windows(2).all(|w| w[1].p <= w[0].p));
    }

    #[test]
    fn analytic_decreasing_in_paths() {
        let mut prev = 1.0;
        for nb in [2, 5, 10, 15] {
            let p = isi_elimination_probability(&ScenarioConfig::with_sigma(256, nb, 1e-3), 10.0).unwrap();
            assert!(p < prev, "N_b={nb}: {p} !< {prev}");
            prev = p;
        }
    }

    #[test]
    fn analytic_agrees_with_mc() {
        let cfg = ScenarioConfig::with_sigma(128, 5, 1e-3);
        let analytic = isi_elimination_probability(&cfg, 10.0).unwrap();
        let mc = isi_elimination_mc(&cfg, 10.0, 20_000, 9).unwrap();
        assert!(
            (analytic - mc.p).abs() < (0.01f64).max(3.0 * mc.std_error),
            "analytic {analytic} vs mc {mc:?}"
        );
    }
}
