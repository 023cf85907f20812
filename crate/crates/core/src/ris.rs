//! RIS phase controllers.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::scenario::MAX_PHASE_BITS;

/// How the surface chooses its phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseMode {
    /// Continuous alignment to the first tap.
    Ideal,
    /// First-tap alignment snapped to `2^r` uniform levels.
    Quantized(u32),
    /// Plain reflection, all phases zero.
    Blind,
}

impl PhaseMode {
    pub fn label(&self) -> String {
        match self {
            PhaseMode::Ideal => "ideal".into(),
            PhaseMode::Quantized(r) => format!("r{r}"),
            PhaseMode::Blind => "blind".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PhaseMode::Quantized(r) if r == 0 || r > MAX_PHASE_BITS => Err(Error::Domain(format!(
                "phase resolution must be in [1, {MAX_PHASE_BITS}] bits, got {r}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Phase vector applied by the surface, one angle in `[0, 2π)` per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub theta: Vec<f64>,
    pub mode: PhaseMode,
}

impl PhaseConfig {
    /// `e^{jθ_m}` for every element.
    pub fn rotations(&self) -> Vec<Complex64> {
        self.theta
            .iter()
            .map(|&t| Complex64::from_polar(1.0, t))
            .collect()
    }
}

fn wrap(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `θ_m = -arg(b[m,0] · g[m,0])`, which makes every first-path term real and positive.
pub fn ideal_phases(ch: &ChannelRealization) -> PhaseConfig {
    let theta = (0..ch.elements())
        .map(|m| wrap(-ch.first_path(m).arg()))
        .collect();
    PhaseConfig {
        theta,
        mode: PhaseMode::Ideal,
    }
}

/// Index of the level nearest to `theta` on a grid of `levels` points.
/// Exact ties go to the smaller index.
fn nearest_level(theta: f64, levels: u64) -> u64 {
    let x = wrap(theta) / (TAU / levels as f64);
    let lo = x.floor();
    let frac = x - lo;
    let lo = lo as u64 % levels;
    let hi = (lo + 1) % levels;
    if (frac - 0.5).abs() <= 1e-12 {
        lo.min(hi)
    } else if frac < 0.5 {
        lo
    } else {
        hi
    }
}

/// Snaps each phase to the nearest of `2^r` levels `2πk / 2^r`.
pub fn quantize_phases(ideal: &PhaseConfig, r: u32) -> Result<PhaseConfig> {
    PhaseMode::Quantized(r).validate()?;
    let levels = 1u64 << r;
    let step = TAU / levels as f64;
    let theta = ideal
        .theta
        .iter()
        .map(|&t| nearest_level(t, levels) as f64 * step)
        .collect();
    Ok(PhaseConfig {
        theta,
        mode: PhaseMode::Quantized(r),
    })
}

pub fn blind_phases(elements: usize) -> PhaseConfig {
    PhaseConfig {
        theta: vec![0.0; elements],
        mode: PhaseMode::Blind,
    }
}

/// Phases for `ch` under the given controller.
pub fn phases_for(ch: &ChannelRealization, mode: PhaseMode) -> Result<PhaseConfig> {
    match mode {
        PhaseMode::Ideal => Ok(ideal_phases(ch)),
        PhaseMode::Quantized(r) => quantize_phases(&ideal_phases(ch), r),
        PhaseMode::Blind => Ok(blind_phases(ch.elements())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, tap_aggregates, IsiIndexSet};
    use crate::montecarlo::trial_rng;
    use crate::scenario::ScenarioConfig;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;
    use std::f64::consts::PI;

    fn circ_dist(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    fn first_gain(ch: &ChannelRealization, p: &PhaseConfig) -> f64 {
        tap_aggregates(ch, p, IsiIndexSet::Physical).unwrap().first.norm_sqr()
    }

    #[test]
    fn ideal_examples() {
        let one = Complex64::new(1.0, 0.0);
        let ch = ChannelRealization::new(array![[Complex64::new(2.0, 0.0)]], array![[one]]).unwrap();
        assert_eq!(ideal_phases(&ch).theta, vec![0.0]);

        let ch = ChannelRealization::new(array![[Complex64::from_polar(1.0, PI / 3.0)]], array![[one]])
            .unwrap();
        assert_relative_eq!(ideal_phases(&ch).theta[0], TAU - PI / 3.0, epsilon = 1e-12);

        let zero = Complex64::new(0.0, 0.0);
        let ch = ChannelRealization::new(array![[zero]], array![[one]]).unwrap();
        assert_eq!(ideal_phases(&ch).theta, vec![0.0]);
    }

    #[test]
    fn ideal_first_tap_is_real() {
        let cfg = ScenarioConfig::with_sigma(32, 2, 1e-3);
        for t in 0..100 {
            let ch = draw_channel(&cfg, &mut trial_rng(4, t));
            let a = tap_aggregates(&ch, &ideal_phases(&ch), IsiIndexSet::Physical)
                .unwrap()
                .first;
            assert!(a.re > 0.0);
            assert!(a.im.abs() <= 1e-12 * a.re);
        }
    }

    #[test]
    fn quantize_examples() {
        let p = |t: f64| PhaseConfig {
            theta: vec![t],
            mode: PhaseMode::Ideal,
        };
        assert_eq!(quantize_phases(&p(PI / 3.0), 1).unwrap().theta, vec![0.0]);
        assert_relative_eq!(quantize_phases(&p(3.0 * PI / 4.0), 2).unwrap().theta[0], PI / 2.0);
        // just below 2π wraps to level 0
        assert_eq!(quantize_phases(&p(TAU - 1e-3), 2).unwrap().theta, vec![0.0]);
        assert!(quantize_phases(&p(0.3), 0).is_err());
        let q = quantize_phases(&p(1.0), 3).unwrap();
        assert_eq!(q.mode, PhaseMode::Quantized(3));
    }

    #[test]
    fn quantization_error_bounded_on_grid() {
        for r in 1..=8u32 {
            let levels = 1u64 << r;
            let step = TAU / levels as f64;
            let theta: Vec<f64> = (0..20_000).map(|i| i as f64 * TAU / 20_000.0).collect();
            let q = quantize_phases(
                &PhaseConfig {
                    theta: theta.clone(),
                    mode: PhaseMode::Ideal,
                },
                r,
            )
            .unwrap();
            for (t, qt) in theta.iter().zip(&q.theta) {
                assert!(circ_dist(*t, *qt) <= PI / levels as f64 + 1e-12);
                let k = qt / step;
                assert!((k - k.round()).abs() < 1e-9 && k.round() < levels as f64);
            }
        }
    }

    #[test]
    fn blind_is_zero() {
        assert_eq!(blind_phases(4).theta, vec![0.0; 4]);
    }

    #[test]
    fn ideal_maximizes_first_tap() {
        let cfg = ScenarioConfig::with_sigma(16, 3, 1.0);
        for t in 0..20 {
            let mut rng = trial_rng(12, t);
            let ch = draw_channel(&cfg, &mut rng);
            let best = first_gain(&ch, &ideal_phases(&ch));
            for _ in 0..100 {
                let theta = (0..16).map(|_| rng.random::<f64>() * TAU).collect();
                let other = PhaseConfig {
                    theta,
                    mode: PhaseMode::Blind,
                };
                assert!(first_gain(&ch, &other) <= best * (1.0 + 1e-12));
            }
            for r in [1, 2, 3] {
                let q = phases_for(&ch, PhaseMode::Quantized(r)).unwrap();
                assert!(first_gain(&ch, &q) <= best * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn quantized_gain_grows_with_resolution() {
        let cfg = ScenarioConfig::with_sigma(16, 1, 1.0);
        let n = 10_000;
        let mut means = Vec::new();
        for r in [1u32, 2, 3, 8] {
            let total: f64 = (0..n)
                .map(|t| {
                    let ch = draw_channel(&cfg, &mut trial_rng(21, t));
                    first_gain(&ch, &phases_for(&ch, PhaseMode::Quantized(r)).unwrap())
                })
                .sum();
            means.push(total / n as f64);
        }
        assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    }
}
