#![allow(clippy::excessive_precision)]

//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.
//!
//! Intervals are bisected greedily by their error estimate until the summed
//! estimate falls below `max(abs_tol, rel_tol * |I|)`. Explicit breakpoints
//! seed the initial partition so that seams in piecewise-smooth integrands
//! never sit inside a panel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-14,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<f64>,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = err.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(f64::EPSILON * resabs);
    }
    err
}

fn kronrod_panel<F>(
    f: &mut F,
    dim: usize,
    a: f64,
    b: f64,
    scratch: &mut [Vec<f64>],
) -> (Vec<f64>, f64)
where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    // scratch[0..15]: integrand values at the 15 nodes, ordered
    // [center, -x0, +x0, -x1, +x1, ...]
    f(center, &mut scratch[0]);
    for j in 0..7 {
        let dx = half * XGK[j];
        f(center - dx, &mut scratch[1 + 2 * j]);
        f(center + dx, &mut scratch[2 + 2 * j]);
    }

    let mut value = vec![0.0; dim];
    let mut worst = 0.0f64;
    for c in 0..dim {
        let fc = scratch[0][c];
        let mut resk = WGK[7] * fc;
        let mut resg = WG[3] * fc;
        let mut resabs = (WGK[7] * fc).abs();
        for j in 0..7 {
            let f1 = scratch[1 + 2 * j][c];
            let f2 = scratch[2 + 2 * j][c];
            resk += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            resasc += WGK[j]
                * ((scratch[1 + 2 * j][c] - mean).abs() + (scratch[2 + 2 * j][c] - mean).abs());
        }
        let err = rescale_error((resk - resg) * half, resabs * abs_half, resasc * abs_half);
        value[c] = resk * half;
        worst = worst.max(err);
    }
    (value, worst)
}

/// Integrates a vector-valued `f` over `[a, b]`. The interval may be
/// reversed (`b < a`), in which case the result changes sign.
pub fn integrate_vec<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult>
where
    F: FnMut(f64, &mut [f64]),
{
    if a == b {
        return Ok(QuadResult {
            value: vec![0.0; dim],
            error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut edges = vec![lo];
    let mut interior: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    edges.extend(interior);
    edges.push(hi);

    let mut scratch = vec![vec![0.0; dim]; 15];
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let (value, error) = kronrod_panel(&mut f, dim, w[0], w[1], &mut scratch);
        evaluations += 15;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let min_width = (hi - lo) * 1e-14;
    loop {
        let mut total = vec![0.0; dim];
        let mut total_err = 0.0;
        for p in heap.iter() {
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
            total_err += p.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if total_err <= target {
            for t in total.iter_mut() {
                *t *= sign;
            }
            return Ok(QuadResult {
                value: total,
                error: total_err,
                evaluations,
            });
        }

        let worst = heap.peek().expect("at least one panel");
        if heap.len() >= opts.max_intervals || (worst.b - worst.a) < min_width {
            return Err(Error::Quadrature {
                estimate: sign * total.first().copied().unwrap_or(0.0),
                error: total_err,
            });
        }

        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = kronrod_panel(&mut f, dim, a, b, &mut scratch);
            evaluations += 15;
            heap.push(Panel { a, b, value, error });
        }
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_vec(
        |s, out: &mut [f64]| out[0] = f(s),
        1,
        a,
        b,
        breakpoints,
        opts,
    )?;
    Ok((r.value[0], r.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate(
            |x| x.powi(5) - 3.0 * x * x + 1.0,
            -1.0,
            2.0,
            &[],
            &QuadOptions::default(),
        )
        .unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let opts = QuadOptions::default();
        let (fwd, _) = integrate(f64::exp, 0.0, 1.5, &[], &opts).unwrap();
        let (rev, _) = integrate(f64::exp, 1.5, 0.0, &[], &opts).unwrap();
        assert!((fwd + rev).abs() < 1e-14);
        assert!((fwd - (1.5f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn kink_with_breakpoint() {
        let opts = QuadOptions::default();
        let (v, _) = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], &opts).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
        let r = integrate(|x: f64| (x - 0.3).abs().sqrt(), 0.0, 1.0, &[], &opts);
        let (v, _) = r.unwrap();
        let exact = (2.0 / 3.0) * (0.3f64.powf(1.5) + 0.7f64.powf(1.5));
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn vector_integrand() {
        let r = integrate_vec(
            |x, out: &mut [f64]| {
                out[0] = x.sin();
                out[1] = x.cos();
            },
            2,
            0.0,
            std::f64::consts::PI,
            &[],
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-13);
        assert!(r.value[1].abs() < 1e-13);
    }

    #[test]
    fn impossible_tolerance_reports_estimate() {
        let opts = QuadOptions {
            abs_tol: 1e-30,
            rel_tol: 0.0,
            max_intervals: 8,
        };
        match integrate(|x: f64| (x * 50.0).sin().abs(), 0.0, 3.0, &[], &opts) {
            Err(Error::Quadrature { estimate, .. }) => assert!(estimate.is_finite()),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }
}
