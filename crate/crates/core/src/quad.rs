//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// Kronrod abscissae on [0, 1) (mirrored), node 7 is the midpoint.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Sum of per-interval |Kronrod − Gauss| differences.
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

/// Single 15-point rule on `[a, b]`; returns (Kronrod, |Kronrod − Gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`, bisecting the
/// interval with the largest error estimate until the summed estimate meets
/// the tolerance or `max_intervals` pieces are in use.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Estimate {
    integrate_split(f, a, b, 1, abs_tol, max_intervals)
}

/// Like [`integrate`], but starts from `pieces` equal subintervals. A single
/// 15-point rule can miss a feature squeezed against one end of the range.
pub fn integrate_split<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    pieces: usize,
    abs_tol: f64,
    max_intervals: usize,
) -> Estimate {
    let pieces = pieces.max(1);
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    let width = (b - a) / pieces as f64;
    for i in 0..pieces {
        let lo = a + i as f64 * width;
        let hi = if i + 1 == pieces { b } else { lo + width };
        let (value, error) = gk15(&mut f, lo, hi);
        heap.push(Piece { a: lo, b: hi, value, error });
        total_err += error;
    }

    while total_err > abs_tol && heap.len() < max_intervals {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval below floating-point resolution
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, mid);
        let (rv, re) = gk15(&mut f, mid, worst.b);
        total_err += le + re - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Piece { a: mid, b: worst.b, value: rv, error: re });
    }

    // summed in interval order so the value does not depend on heap layout
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = pieces.iter().map(|p| p.value).sum();
    let error: f64 = pieces.iter().map(|p| p.error).sum();
    Estimate {
        value,
        error,
        intervals: pieces.len(),
        converged: error <= abs_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert_relative_eq!(k, 2.0, epsilon = 1e-15);
        assert_relative_eq!(g, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        // Kronrod part is exact through degree 22 (odd degrees vanish by symmetry)
        for deg in [2i32, 10, 20, 22] {
            let (v, _) = gk15(&mut |x: f64| x.powi(deg), -1.0, 1.0);
            assert_relative_eq!(v, 2.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_peaks_and_oscillation() {
        let est = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 2000);
        assert!(est.converged);
        assert_relative_eq!(est.value, 2.0 * (1.0f64 / 1e-2).atan() / 1e-2, max_relative = 1e-10);

        let est = integrate(|x: f64| (50.0 * x).sin() * x, 0.0, std::f64::consts::PI, 1e-10, 2000);
        let want = -std::f64::consts::PI / 50.0; // ∫ x sin(50x) on [0, π]
        assert_relative_eq!(est.value, want, max_relative = 1e-9);
    }

    #[test]
    fn split_start_handles_edge_bump() {
        let f = |x: f64| (-((x - 0.05) / 0.02).powi(2)).exp();
        let want = 0.02 * std::f64::consts::PI.sqrt() / 2.0 * (1.0 + statrs::function::erf::erf(2.5));
        let est = integrate_split(f, 0.0, 10.0, 16, 1e-12, 1000);
        assert!(est.converged);
        assert_relative_eq!(est.value, want, max_relative = 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let est = integrate(|x: f64| (1.0 / x).sin(), 1e-9, 1.0, 1e-14, 8);
        assert!(!est.converged);
        assert!(est.intervals <= 8);
    }
}
