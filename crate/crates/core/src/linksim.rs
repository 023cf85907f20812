//! Symbol-level link simulation through the effective post-RIS channel.
//!
//! The receiver is a flat-fading coherent detector: it knows the first-path
//! gain `A` exactly and treats the remaining taps as noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{aggregates_with_rotations, draw_channel, effective_taps, complex_gaussian};
use crate::channel::{ChannelRealization, EffectiveChannel, IsiIndexSet};
use crate::error::{Error, Result};
use crate::montecarlo::{fold_trials, Moments};
use crate::ris::{phases_for, PhaseConfig, PhaseMode};
use crate::scenario::ScenarioConfig;

pub const DEFAULT_SYMBOLS_PER_TRIAL: usize = 100;

/// Unit-energy Gray-mapped PSK symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    /// PSK order Q.
    pub order: u32,
}

/// Pooled link statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkMetrics {
    /// Mean SINR over the trials.
    pub sinr_linear: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
}

impl LinkMetrics {
    pub fn ber(&self) -> f64 {
        if self.bits_total == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_total as f64
        }
    }
}

/// Bits carried by one Q-PSK symbol; Q must be a power of two ≥ 2.
pub fn bits_per_symbol(q: u32) -> Result<usize> {
    if q < 2 || !q.is_power_of_two() {
        return Err(Error::Domain(format!(
            "PSK order must be a power of two ≥ 2, got {q}"
        )));
    }
    Ok(q.trailing_zeros() as usize)
}

fn phase_offset(q: u32) -> f64 {
    if q == 2 {
        0.0
    } else {
        PI / q as f64
    }
}

fn gray(p: u32) -> u32 {
    p ^ (p >> 1)
}

fn gray_inverse(mut g: u32) -> u32 {
    let mut p = g;
    while g > 1 {
        g >>= 1;
        p ^= g;
    }
    p
}

/// Maps bits (most significant first within each symbol) to Q-PSK points
/// `e^{j(2πp/Q + φ)}`, where `p` is the Gray position of the bit label and
/// `φ = π/Q` for `Q ≥ 4` (BPSK uses `φ = 0`, so bit 0 is `+1`).
pub fn modulate(bits: &[u8], q: u32) -> Result<SymbolFrame> {
    let k = bits_per_symbol(q)?;
    if !bits.len().is_multiple_of(k) {
        return Err(Error::Domain(format!(
            "{} bits do not fill whole {q}-PSK symbols",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::Domain(format!("bit value {b} is not 0 or 1")));
    }
    let step = 2.0 * PI / q as f64;
    let offset = phase_offset(q);
    let symbols = bits
        .chunks(k)
        .map(|c| {
            let label = c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
            let p = gray_inverse(label);
            Complex64::from_polar(1.0, p as f64 * step + offset)
        })
        .collect();
    Ok(SymbolFrame { symbols, order: q })
}

/// `y[n] = Σ_d h[d] √E_s x[n−d] + w[n]`, `w ~ CN(0, W_0)`, over the frame length.
pub fn transmit<R: Rng + ?Sized>(
    eff: &EffectiveChannel,
    frame: &SymbolFrame,
    es: f64,
    w0: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let amp = es.sqrt();
    (0..frame.symbols.len())
        .map(|n| {
            let s: Complex64 = eff
                .taps
                .iter()
                .take(n + 1)
                .enumerate()
                .map(|(d, h)| h * frame.symbols[n - d])
                .sum();
            let noise = if w0 > 0.0 {
                complex_gaussian(rng, w0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            s * amp + noise
        })
        .collect()
}

/// Minimum-distance Q-PSK decisions on `y[n] / (A √E_s)`.
pub fn detect(received: &[Complex64], gain: Complex64, es: f64, q: u32) -> Result<Vec<u8>> {
    let k = bits_per_symbol(q)?;
    let scale = gain * es.sqrt();
    if !(scale.norm() > 0.0) {
        return Err(Error::Domain("detector needs a nonzero first-path gain".into()));
    }
    let step = 2.0 * PI / q as f64;
    let offset = phase_offset(q);
    let mut out = Vec::with_capacity(received.len() * k);
    for y in received {
        let z = y / scale;
        let p = ((z.arg() - offset) / step).round().rem_euclid(q as f64) as u32 % q;
        let label = gray(p);
        out.extend((0..k).rev().map(|i| ((label >> i) & 1) as u8));
    }
    Ok(out)
}

/// `γ = E_s |A|² / (E_s Σ_i |B_i|² + W_0)` over every ISI path pair.
pub fn sinr(ch: &ChannelRealization, phases: &PhaseConfig, es: f64, w0: f64) -> Result<f64> {
    if phases.theta.len() != ch.elements() {
        return Err(Error::Dimension {
            expected: ch.elements(),
            actual: phases.theta.len(),
        });
    }
    let agg = aggregates_with_rotations(ch, &phases.rotations(), IsiIndexSet::Physical);
    Ok(es * agg.first.norm_sqr() / (es * agg.isi_power() + w0))
}

#[derive(Default)]
struct Acc {
    sinr: Moments,
    errors: u64,
    bits: u64,
}

/// BPSK Monte Carlo, see [`ber_monte_carlo_psk`].
pub fn ber_monte_carlo(
    config: &ScenarioConfig,
    mode: PhaseMode,
    n_trials: u64,
    symbols_per_trial: usize,
) -> Result<LinkMetrics> {
    ber_monte_carlo_psk(config, mode, 2, n_trials, symbols_per_trial)
}

/// Pooled BER and mean SINR over `n_trials` channel draws seeded by `config.seed`.
///
/// Each trial sends one frame of random bits. The first `delay_span` symbols of
/// each frame see a partially filled delay line and are not counted.
pub fn ber_monte_carlo_psk(
    config: &ScenarioConfig,
    mode: PhaseMode,
    q: u32,
    n_trials: u64,
    symbols_per_trial: usize,
) -> Result<LinkMetrics> {
    config.validate()?;
    let k = bits_per_symbol(q)?;
    if n_trials == 0 {
        return Err(Error::Domain("n_trials must be at least 1".into()));
    }
    let warmup = config.delay_span();
    if symbols_per_trial <= warmup {
        return Err(Error::Domain(format!(
            "symbols_per_trial = {symbols_per_trial} leaves nothing after {warmup} warm-up symbols"
        )));
    }
    mode.validate()?;
    let es = config.symbol_energy();
    let w0 = config.noise_power();

    let acc = fold_trials(
        config.seed,
        n_trials,
        Acc::default,
        |acc, _, rng| {
            let ch = draw_channel(config, rng);
            let phases = phases_for(&ch, mode).expect("mode validated above");
            let eff = effective_taps(&ch, &phases).expect("phase length matches");
            let agg = aggregates_with_rotations(&ch, &phases.rotations(), IsiIndexSet::Physical);
            acc.sinr.push(es * agg.first.norm_sqr() / (es * agg.isi_power() + w0));

            let bits: Vec<u8> = (0..symbols_per_trial * k)
                .map(|_| rng.random::<bool>() as u8)
                .collect();
            let frame = modulate(&bits, q).expect("order validated above");
            let y = transmit(&eff, &frame, es, w0, rng);
            // a zero first tap leaves the receiver nothing to lock onto
            let decided = detect(&y, eff.taps[0], es, q).unwrap_or_else(|_| vec![0; bits.len()]);
            let counted = warmup * k..bits.len();
            acc.errors += bits[counted.clone()]
                .iter()
                .zip(&decided[counted.clone()])
                .filter(|(a, b)| a != b)
                .count() as u64;
            acc.bits += counted.len() as u64;
        },
        |a, b| Acc {
            sinr: a.sinr.merge(b.sinr),
            errors: a.errors + b.errors,
            bits: a.bits + b.bits,
        },
    );
    Ok(LinkMetrics {
        sinr_linear: acc.sinr.mean(),
        bit_errors: acc.errors,
        bits_total: acc.bits,
    })
}

/// SINR moments over `n_trials` channel draws without any symbol simulation.
pub fn sinr_monte_carlo(
    config: &ScenarioConfig,
    mode: PhaseMode,
    n_trials: u64,
    seed: u64,
) -> Result<Moments> {
    config.validate()?;
    mode.validate()?;
    let es = config.symbol_energy();
    let w0 = config.noise_power();
    Ok(fold_trials(
        seed,
        n_trials,
        Moments::default,
        |acc, _, rng| {
            let ch = draw_channel(config, rng);
            let phases = phases_for(&ch, mode).expect("mode validated above");
            acc.push(sinr(&ch, &phases, es, w0).expect("phase length matches"));
        },
        Moments::merge,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::trial_rng;
    use crate::ris::{blind_phases, ideal_phases};
    use rand::Rng;
    use crate::septheory::{fit_gamma, sample_gamma_m, sep_bpsk};
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bpsk_and_qpsk_mapping() {
        let f = modulate(&[0, 1], 2).unwrap();
        assert_eq!(f.symbols[0], c(1.0, 0.0));
        assert!((f.symbols[1] - c(-1.0, 0.0)).norm() < 1e-15);
        let f = modulate(&[0, 0, 0, 1, 1, 1, 1, 0], 4).unwrap();
        let want = [1.0, 3.0, 5.0, 7.0].map(|k| Complex64::from_polar(1.0, k * PI / 4.0));
        for (s, w) in f.symbols.iter().zip(want) {
            assert!((s - w).norm() < 1e-15);
        }
        assert!(modulate(&[0, 1, 1], 4).is_err());
        assert!(modulate(&[0, 1], 3).is_err());
        assert!(modulate(&[2], 2).is_err());
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for q in [4u32, 8, 16, 64] {
            for p in 0..q {
                let d = gray(p) ^ gray((p + 1) % q);
                assert_eq!(d.count_ones(), 1);
                assert_eq!(gray_inverse(gray(p)), p);
            }
        }
    }

    #[test]
    fn random_frame_has_unit_energy() {
        let mut rng = trial_rng(1, 0);
        for q in [2u32, 4, 8] {
            let k = bits_per_symbol(q).unwrap();
            let bits: Vec<u8> = (0..1000 * k).map(|_| rng.random::<bool>() as u8).collect();
            let f = modulate(&bits, q).unwrap();
            let e = f.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / f.symbols.len() as f64;
            assert_relative_eq!(e, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn transmit_single_tap_and_impulse() {
        let mut rng = trial_rng(0, 0);
        let a = c(0.3, -0.4);
        let f = modulate(&[0, 1, 1, 0], 2).unwrap();
        let y = transmit(&EffectiveChannel::single(a), &f, 4.0, 0.0, &mut rng);
        for (yn, xn) in y.iter().zip(&f.symbols) {
            assert!((yn - a * 2.0 * xn).norm() < 1e-15);
        }

        let eff = EffectiveChannel {
            taps: vec![c(1.0, 0.0), c(0.0, 0.5), c(-0.25, 0.0)],
        };
        let impulse = SymbolFrame {
            symbols: vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            order: 2,
        };
        let y = transmit(&eff, &impulse, 9.0, 0.0, &mut rng);
        assert_eq!(y[..3], [c(3.0, 0.0), c(0.0, 1.5), c(-0.75, 0.0)]);
        assert_eq!(y[3], c(0.0, 0.0));
    }

    #[test]
    fn transmit_noise_variance() {
        let mut rng = trial_rng(2, 0);
        let n = 200_000;
        let f = SymbolFrame {
            symbols: vec![c(0.0, 0.0); n],
            order: 2,
        };
        let w0 = 2.5e-3;
        let y = transmit(&EffectiveChannel::single(c(1.0, 0.0)), &f, 1.0, w0, &mut rng);
        let p: Vec<f64> = y.iter().map(|v| v.norm_sqr()).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        let sd = (p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - w0).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn detect_examples() {
        assert_eq!(detect(&[c(-0.1, 0.0)], c(1.0, 0.0), 1.0, 2).unwrap(), vec![1]);
        assert!(detect(&[c(1.0, 0.0)], c(0.0, 0.0), 1.0, 2).is_err());
        let mut rng = trial_rng(3, 0);
        let bits: Vec<u8> = (0..300).map(|_| rng.random::<bool>() as u8).collect();
        let a = c(-0.2, 0.7);
        for q in [2u32, 4, 8] {
            let f = modulate(&bits, q).unwrap();
            let y = transmit(&EffectiveChannel::single(a), &f, 3.0, 0.0, &mut rng);
            assert_eq!(detect(&y, a, 3.0, q).unwrap(), bits);
        }
    }

    #[test]
    fn detect_matches_exhaustive_search() {
        let mut rng = trial_rng(4, 0);
        let eff = EffectiveChannel {
            taps: vec![c(1.0, 0.2), c(0.6, -0.5), c(0.1, 0.3)],
        };
        for q in [2u32, 4, 8] {
            let k = bits_per_symbol(q).unwrap();
            let bits: Vec<u8> = (0..64 * k).map(|_| rng.random::<bool>() as u8).collect();
            let f = modulate(&bits, q).unwrap();
            let y = transmit(&eff, &f, 1.0, 0.3, &mut rng);
            let got = detect(&y, eff.taps[0], 1.0, q).unwrap();

            // nearest point among all labels, brute force
            let labels: Vec<Vec<u8>> = (0..q)
                .map(|v| (0..k).rev().map(|i| ((v >> i) & 1) as u8).collect())
                .collect();
            let points: Vec<Complex64> = labels.iter().map(|l| modulate(l, q).unwrap().symbols[0]).collect();
            let mut want = Vec::new();
            for yn in &y {
                let z = yn / eff.taps[0];
                let best = (0..q as usize)
                    .min_by(|&i, &j| (z - points[i]).norm().total_cmp(&(z - points[j]).norm()))
                    .unwrap();
                want.extend_from_slice(&labels[best]);
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn sinr_examples() {
        let one = c(1.0, 0.0);
        let ch = ChannelRealization::new(array![[one]], array![[one]]).unwrap();
        assert_relative_eq!(sinr(&ch, &blind_phases(1), 2.0, 0.5).unwrap(), 4.0);

        let cfg = ScenarioConfig::with_sigma(8, 3, 1.0);
        let ch = draw_channel(&cfg, &mut trial_rng(7, 0));
        let p = ideal_phases(&ch);
        let (es, w0) = (2.0, 0.7);
        let num: f64 = (0..8).map(|m| ch.b[[m, 0]].norm() * ch.g[[m, 0]].norm()).sum::<f64>().powi(2);
        let isi: f64 = (1..3)
            .map(|l| {
                (0..8)
                    .map(|m| ch.b[[m, l]] * ch.g[[m, 0]] * Complex64::from_polar(1.0, p.theta[m]))
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum();
        assert_relative_eq!(sinr(&ch, &p, es, w0).unwrap(), es * num / (es * isi + w0), max_relative = 1e-12);
        assert!(sinr(&ch, &blind_phases(3), es, w0).is_err());
    }

    #[test]
    fn noiseless_flat_link_is_error_free() {
        let mut cfg = ScenarioConfig::with_sigma(16, 1, 1.0);
        cfg.noise_power_dbm = -400.0;
        let m = ber_monte_carlo(&cfg, PhaseMode::Ideal, 200, 100).unwrap();
        assert_eq!(m.bit_errors, 0);
        assert_eq!(m.bits_total, 200 * 100);
    }

    #[test]
    fn warmup_symbols_are_excluded() {
        let mut cfg = ScenarioConfig::with_sigma(4, 3, 1.0);
        cfg.seed = 9;
        let m = ber_monte_carlo_psk(&cfg, PhaseMode::Ideal, 4, 10, 50).unwrap();
        assert_eq!(m.bits_total, 10 * (50 - 2) * 2);
        assert!(ber_monte_carlo(&cfg, PhaseMode::Ideal, 10, 2).is_err());
        assert!(ber_monte_carlo(&cfg, PhaseMode::Quantized(0), 10, 50).is_err());
        assert!(ber_monte_carlo(&cfg, PhaseMode::Ideal, 0, 50).is_err());
    }

    #[test]
    fn ber_decreases_with_power() {
        let mut cfg = ScenarioConfig::reference();
        cfg.elements = 64;
        let mut prev = 1.0;
        for pt in [0.0, 10.0, 20.0, 25.0] {
            cfg.tx_power_dbm = pt;
            let m = ber_monte_carlo(&cfg, PhaseMode::Ideal, 2000, 100).unwrap();
            let se = (prev * (1.0 - prev) / m.bits_total as f64).sqrt();
            assert!(m.ber() <= prev + 3.0 * se, "P_t {pt}: {} after {prev}", m.ber());
            prev = m.ber();
        }
    }

    #[test]
    fn bpsk_flat_link_matches_gamma_theory() {
        // a flat link is the case where the fitted-gamma SEP is the exact law
        let mut cfg = ScenarioConfig::reference();
        cfg.tx_paths = 1;
        cfg.elements = 32;
        cfg.tx_power_dbm = 30.0;
        let fit = fit_gamma(&sample_gamma_m(&cfg, 100_000, 11).unwrap()).unwrap();
        let theory = sep_bpsk(&fit).unwrap();
        let m = ber_monte_carlo(&cfg, PhaseMode::Ideal, 20_000, 100).unwrap();
        assert!(theory > 1e-3, "{theory}");
        assert!((m.ber() / theory - 1.0).abs() < 0.1, "sim {} vs theory {theory}", m.ber());
    }

    #[test]
    fn ideal_beats_blind_sinr() {
        let mut cfg = ScenarioConfig::reference();
        cfg.tx_paths = 4;
        cfg.elements = 32;
        let ideal = sinr_monte_carlo(&cfg, PhaseMode::Ideal, 10_000, 3).unwrap();
        let blind = sinr_monte_carlo(&cfg, PhaseMode::Blind, 10_000, 3).unwrap();
        assert!(ideal.mean() > blind.mean());
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let cfg = ScenarioConfig::with_sigma(16, 2, 1.0);
        let a = ber_monte_carlo(&cfg, PhaseMode::Quantized(2), 700, 40).unwrap();
        let b = ber_monte_carlo(&cfg, PhaseMode::Quantized(2), 700, 40).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn noiseless_round_trip(bits in proptest::collection::vec(0u8..2, 1..40), qexp in 1u32..4) {
            let q = 1 << qexp;
            let k = qexp as usize;
            let mut bits = bits;
            bits.truncate(bits.len() / k * k);
            prop_assume!(!bits.is_empty());
            let f = modulate(&bits, q).unwrap();
            let y: Vec<Complex64> = f.symbols.iter().map(|s| s * c(0.5, 2.0)).collect();
            prop_assert_eq!(detect(&y, c(0.5, 2.0), 1.0, q).unwrap(), bits);
        }

        #[test]
        fn metrics_are_consistent(seed in 0u64..1000, r in 1u32..4) {
            let mut cfg = ScenarioConfig::with_sigma(4, 2, 1.0);
            cfg.seed = seed;
            let m = ber_monte_carlo(&cfg, PhaseMode::Quantized(r), 3, 20).unwrap();
            prop_assert!(m.bit_errors <= m.bits_total);
            prop_assert!(m.sinr_linear >= 0.0);
        }
    }
}
