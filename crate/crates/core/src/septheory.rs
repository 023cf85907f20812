//! Semi-analytical symbol error probability.
//!
//! The post-RIS SINR `γ_m = E_s A² / (E_s Σ|B_i|² + W_0)` has no known closed
//! form, so it is sampled, fitted with a gamma distribution by maximum
//! likelihood, and the fitted MGF `(1 − ρs)^(−κ)` is fed to the standard
//! MGF-based PSK error integral.

use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::channel::{aggregates_with_rotations, draw_channel, IsiIndexSet};
use crate::error::{Error, QuadratureDiagnostics, Result};
use crate::montecarlo::map_trials;
use crate::quad;
use crate::ris::ideal_phases;
use crate::scenario::{ScenarioConfig, Selectivity};

/// Shape value returned when the samples are (numerically) constant.
pub const KAPPA_CAP: f64 = 1e8;
pub const MIN_FIT_SAMPLES: usize = 100;
const NEWTON_MAX_ITER: usize = 100;
/// Absolute tolerance of the SEP quadratures.
pub const SEP_ABS_TOL: f64 = 1e-10;

/// Maximum-likelihood gamma fit of the post-RIS SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    /// Shape κ.
    pub kappa: f64,
    /// Scale ρ.
    pub rho: f64,
    pub n_samples: usize,
    pub log_likelihood: f64,
}

/// Samples of `γ_m` under ideal phases, one per channel draw, in trial order.
pub fn sample_gamma_m(config: &ScenarioConfig, n_trials: u64, seed: u64) -> Result<Vec<f64>> {
    config.validate()?;
    if config.scenario != Selectivity::S1 {
        return Err(Error::Unsupported(
            "SINR gamma fitting is defined for the single-side selective scenario (S1)".into(),
        ));
    }
    let es = config.symbol_energy();
    let w0 = config.noise_power();
    Ok(map_trials(seed, n_trials, |_, rng| {
        let ch = draw_channel(config, rng);
        let rot = ideal_phases(&ch).rotations();
        let agg = aggregates_with_rotations(&ch, &rot, IsiIndexSet::Physical);
        es * agg.first.norm_sqr() / (es * agg.isi_power() + w0)
    }))
}

/// Trigamma ψ'(x) for x > 0, by upward recurrence and the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + inv2 / 2.0
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))))
}

/// Moment-matched gamma shape and scale `(mean²/var, var/mean)`.
pub fn moment_match(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean * mean / var, var / mean)
}

fn log_likelihood(samples: &[f64], kappa: f64, rho: f64) -> f64 {
    let n = samples.len() as f64;
    let sum_ln: f64 = samples.iter().map(|x| x.ln()).sum();
    let sum: f64 = samples.iter().sum();
    (kappa - 1.0) * sum_ln - sum / rho - n * (kappa * rho.ln() + ln_gamma(kappa))
}

/// Maximum-likelihood gamma fit.
///
/// Solves `ln κ − ψ(κ) = ln(mean) − mean(ln x)` by Newton's method from the
/// moment-matched shape, then sets `ρ = mean / κ`.
pub fn fit_gamma(samples: &[f64]) -> Result<GammaFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Domain(format!(
            "gamma fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(x) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Domain(format!("gamma fit needs positive samples, found {x}")));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let target = mean.ln() - mean_ln;

    let capped = |reason: &str| {
        log::warn!("gamma fit degenerate ({reason}); capping shape at {KAPPA_CAP}");
        let rho = mean / KAPPA_CAP;
        GammaFit {
            kappa: KAPPA_CAP,
            rho,
            n_samples: samples.len(),
            log_likelihood: log_likelihood(samples, KAPPA_CAP, rho),
        }
    };
    // ln κ − ψ(κ) ≈ 1/(2κ) for large κ
    if !(target > 0.5 / KAPPA_CAP) {
        return Ok(capped("near-zero spread"));
    }

    let (k0, _) = moment_match(samples);
    let mut kappa = if k0.is_finite() && k0 > 0.0 {
        k0.min(KAPPA_CAP)
    } else {
        0.5 / target
    };
    for _ in 0..NEWTON_MAX_ITER {
        let f = kappa.ln() - digamma(kappa) - target;
        let df = 1.0 / kappa - trigamma(kappa);
        let mut next = kappa - f / df;
        if !(next > 0.0) {
            next = kappa / 2.0;
        }
        if next > KAPPA_CAP {
            return Ok(capped("shape diverging"));
        }
        let done = (next - kappa).abs() <= 1e-12 * kappa;
        kappa = next;
        if done {
            let rho = mean / kappa;
            return Ok(GammaFit {
                kappa,
                rho,
                n_samples: samples.len(),
                log_likelihood: log_likelihood(samples, kappa, rho),
            });
        }
    }
    Err(Error::FitDivergence {
        iterations: NEWTON_MAX_ITER,
        kappa,
    })
}

/// Gamma MGF `(1 − ρs)^(−κ)`, defined for `s < 1/ρ`.
pub fn mgf(fit: &GammaFit, s: f64) -> Result<f64> {
    if !(fit.rho * s < 1.0) {
        return Err(Error::Domain(format!(
            "MGF argument s = {s} must be below 1/ρ = {}",
            1.0 / fit.rho
        )));
    }
    Ok((-fit.kappa * (-fit.rho * s).ln_1p()).exp())
}

/// Average Q-PSK SEP `(1/π) ∫₀^{(Q−1)π/Q} M_γ(−sin²(π/Q) / sin²η) dη`.
pub fn sep_psk(fit: &GammaFit, q: u32) -> Result<f64> {
    if q < 2 {
        return Err(Error::Domain(format!("PSK order must be at least 2, got {q}")));
    }
    let g = (PI / q as f64).sin().powi(2);
    let upper = (q - 1) as f64 * PI / q as f64;
    let (kappa, rho) = (fit.kappa, fit.rho);
    let est = quad::integrate(
        |eta: f64| {
            let s2 = eta.sin().powi(2);
            if s2 == 0.0 {
                0.0
            } else {
                (-kappa * (rho * g / s2).ln_1p()).exp()
            }
        },
        0.0,
        upper,
        SEP_ABS_TOL * PI,
        10_000,
    );
    if !est.converged {
        return Err(Error::Quadrature(QuadratureDiagnostics {
            stage: "PSK error integral",
            value: est.value / PI,
            error_estimate: est.error / PI,
            tolerance: SEP_ABS_TOL,
            intervals: est.intervals,
            upper_limit: upper,
        }));
    }
    Ok(est.value / PI)
}

/// BPSK SEP `(1/π) ∫₀^{π/2} (1 + ρ / sin²η)^(−κ) dη`.
pub fn sep_bpsk(fit: &GammaFit) -> Result<f64> {
    sep_psk(fit, 2)
}

/// Kolmogorov–Smirnov distance between the samples and the fitted gamma law.
pub fn ks_distance(samples: &[f64], fit: &GammaFit) -> f64 {
    let dist = Gamma::new(fit.kappa, 1.0 / fit.rho).expect("fit parameters are positive");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::trial_rng;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::Gamma as GammaSampler;
    use statrs::function::erf::erfc;

    fn gamma_samples(kappa: f64, rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let dist = GammaSampler::new(kappa, rho).unwrap();
        let mut rng = trial_rng(seed, 0);
        (0..n).map(|_| rng.sample(dist)).collect()
    }

    fn fit(kappa: f64, rho: f64) -> GammaFit {
        GammaFit {
            kappa,
            rho,
            n_samples: 0,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn trigamma_known_values() {
        assert_relative_eq!(trigamma(1.0), PI * PI / 6.0, max_relative = 1e-13);
        assert_relative_eq!(trigamma(0.5), PI * PI / 2.0, max_relative = 1e-13);
        // ψ'(x) - ψ'(x+1) = 1/x²
        for x in [0.3, 2.5, 7.0, 40.0] {
            assert_relative_eq!(trigamma(x) - trigamma(x + 1.0), 1.0 / (x * x), max_relative = 1e-11);
        }
    }

    #[test]
    fn fit_round_trip() {
        let s = gamma_samples(51.7, 0.00137, 200_000, 1);
        let f = fit_gamma(&s).unwrap();
        assert!((f.kappa / 51.7 - 1.0).abs() < 0.02, "{f:?}");
        assert!((f.rho / 0.00137 - 1.0).abs() < 0.02, "{f:?}");

        let s = gamma_samples(0.7, 3.0, 50_000, 2);
        let f = fit_gamma(&s).unwrap();
        assert!((f.kappa / 0.7 - 1.0).abs() < 0.03, "{f:?}");
    }

    #[test]
    fn mle_beats_moment_matching_likelihood() {
        let s = gamma_samples(3.0, 2.0, 5_000, 3);
        let f = fit_gamma(&s).unwrap();
        let (k, r) = moment_match(&s);
        assert!(f.log_likelihood >= log_likelihood(&s, k, r));
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_gamma(&[1.0; 10]).is_err());
        let mut s = vec![1.0; 200];
        s[5] = -1.0;
        assert!(fit_gamma(&s).is_err());
        s[5] = 0.0;
        assert!(fit_gamma(&s).is_err());
    }

    #[test]
    fn degenerate_samples_are_capped() {
        let f = fit_gamma(&vec![2.5; 500]).unwrap();
        assert_eq!(f.kappa, KAPPA_CAP);
        assert!(f.rho.is_finite() && f.rho > 0.0);
        let s: Vec<f64> = (0..500).map(|i| 2.5 * (1.0 + 1e-13 * i as f64)).collect();
        let f = fit_gamma(&s).unwrap();
        assert!(f.kappa.is_finite() && f.kappa <= KAPPA_CAP);
    }

    #[test]
    fn mgf_examples() {
        assert_eq!(mgf(&fit(3.0, 2.0), 0.0).unwrap(), 1.0);
        assert_relative_eq!(mgf(&fit(1.0, 1.0), -1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(mgf(&fit(1.0, 0.5), 2.0).is_err());
        assert!(mgf(&fit(1.0, 0.5), 2.5).is_err());
    }

    #[test]
    fn mgf_matches_sample_mean() {
        let (kappa, rho) = (5.0, 0.3);
        let s = gamma_samples(kappa, rho, 200_000, 4);
        let f = fit_gamma(&s).unwrap();
        let arg = -1.0 / (2.0 * f.rho);
        let emp = s.iter().map(|g| (arg * g).exp()).sum::<f64>() / s.len() as f64;
        assert!((mgf(&f, arg).unwrap() / emp - 1.0).abs() < 0.02);
    }

    #[test]
    fn sep_limits_and_consistency() {
        assert!((sep_bpsk(&fit(2.0, 1e-14)).unwrap() - 0.5).abs() < 1e-10);
        assert!(sep_bpsk(&fit(50.0, 1e3)).unwrap() < 1e-12);
        let f = fit(19.6424, 0.921367);
        assert_eq!(sep_bpsk(&f).unwrap(), sep_psk(&f, 2).unwrap());
        assert!(sep_psk(&f, 1).is_err());
        // more points on the circle, more errors
        assert!(sep_psk(&f, 8).unwrap() > sep_psk(&f, 4).unwrap());
        assert!(sep_psk(&f, 4).unwrap() > sep_psk(&f, 2).unwrap());
    }

    #[test]
    fn sep_bpsk_high_resolution_value() {
        // 30-digit mpmath quadrature
        let f = fit(19.6424, 0.921367);
        assert_relative_eq!(sep_bpsk(&f).unwrap(), SEP_TABLE_ROW_REFERENCE, max_relative = 1e-8);
    }

    // Q=2 SEP at κ = 19.6424, ρ = 0.921367.
    const SEP_TABLE_ROW_REFERENCE: f64 = 2.393_621_768_083_177e-7;

    #[test]
    fn sep_bpsk_matches_gamma_snr_monte_carlo() {
        // BPSK error probability given γ is Q(√(2γ)) = erfc(√γ)/2
        for (kappa, rho) in [(2.0, 1.0), (5.0, 0.3), (51.7, 0.05)] {
            let f = fit(kappa, rho);
            let s = gamma_samples(kappa, rho, 400_000, 6);
            let mc = s.iter().map(|g| 0.5 * erfc(g.sqrt())).sum::<f64>() / s.len() as f64;
            let th = sep_bpsk(&f).unwrap();
            assert!(th >= 1e-4);
            assert!((mc / th - 1.0).abs() < 0.1, "κ={kappa} ρ={rho}: mc {mc} vs {th}");
        }
    }

    #[test]
    fn sep_bpsk_decreasing() {
        let mut prev = 1.0;
        for rho in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let v = sep_bpsk(&fit(4.0, rho)).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev = 1.0;
        for kappa in [0.5, 1.0, 4.0, 20.0] {
            let v = sep_bpsk(&fit(kappa, 0.5)).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn gamma_m_without_isi() {
        let cfg = ScenarioConfig {
            tx_paths: 1,
            ..ScenarioConfig::reference()
        };
        let s = sample_gamma_m(&cfg, 20_000, 5).unwrap();
        assert!(s.iter().all(|&g| g > 0.0));
        assert_eq!(s, sample_gamma_m(&cfg, 20_000, 5).unwrap());

        // E[γ] = E_s (μ₁² + σ₁²) / W_0
        let st = crate::isiprob::ab_statistics(&cfg, 1.0).unwrap();
        let want = cfg.symbol_energy() * (st.mu1 * st.mu1 + st.sigma1_sq) / cfg.noise_power();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let se = (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
    }

    #[test]
    fn gamma_m_requires_s1() {
        let mut cfg = ScenarioConfig::with_sigma(8, 2, 1e-3);
        cfg.scenario = Selectivity::S2;
        cfg.rx_paths = 2;
        assert!(matches!(sample_gamma_m(&cfg, 10, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn ks_small_for_exact_gamma() {
        let s = gamma_samples(4.0, 1.5, 20_000, 8);
        let f = fit_gamma(&s).unwrap();
        assert!(ks_distance(&s, &f) < 0.015);
    }
}
