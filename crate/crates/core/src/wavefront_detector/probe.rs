use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical_flow::PhasePoint;
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::quantum_propagator::GridState;

/// Gaussian tails beyond this many widths are dropped from inner products.
const SUPPORT_WIDTHS: f64 = 8.0;
/// Coefficients below this fraction of `||u||` are treated as zero.
const COEFFICIENT_FLOOR: f64 = 1e-13;
/// Smallest number of lattice cells per probe width.
const MIN_CELLS_PER_WIDTH: f64 = 1.0;

/// Gaussian wave packet of width `lambda^(-1/2)` centred at `(x0, xi0)` and
/// oscillating at the physical frequency `lambda xi0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentProbe {
    center: PhasePoint,
    lambda: f64,
}

/// Separable one-axis factors of a probe restricted to its support.
struct AxisWindow {
    indices: Vec<usize>,
    weights: Vec<Complex64>,
}

impl CoherentProbe {
    pub fn new(center: PhasePoint, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Configuration(format!(
                "probe scale must be positive, got {lambda}"
            )));
        }
        if center.xi_norm() == 0.0 {
            return Err(Error::Domain("probe covector must be nonzero".into()));
        }
        Ok(Self { center, lambda })
    }

    pub fn center(&self) -> &PhasePoint {
        &self.center
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn width(&self) -> f64 {
        self.lambda.powf(-0.5)
    }

    /// Physical carrier frequency `lambda xi0`.
    pub fn frequency(&self) -> Vec<f64> {
        self.center.xi.iter().map(|v| self.lambda * v).collect()
    }

    /// Rejects probes whose carrier sits above half the Nyquist frequency or
    /// whose width is not resolved by the lattice.
    pub fn check_band(&self, grid: &GridState) -> Result<()> {
        if grid.dim() != self.center.dim() {
            return Err(Error::Lattice(format!(
                "probe lives in {} dimensions, lattice has {} axes",
                self.center.dim(),
                grid.dim()
            )));
        }
        let w = self.width();
        for (axis, k) in self.frequency().iter().enumerate() {
            let limit = 0.5 * grid.nyquist(axis);
            if k.abs() > limit {
                return Err(Error::Band(format!(
                    "carrier {k:.4} on axis {axis} exceeds half the Nyquist frequency {limit:.4}"
                )));
            }
            if w < MIN_CELLS_PER_WIDTH * grid.spacing(axis) {
                return Err(Error::Band(format!(
                    "probe width {w:.4e} is below {MIN_CELLS_PER_WIDTH} cells of {:.4e} on axis {axis}",
                    grid.spacing(axis)
                )));
            }
        }
        Ok(())
    }

    fn windows(&self, grid: &GridState, full: bool) -> Vec<AxisWindow> {
        let w = self.width();
        (0..grid.dim())
            .map(|axis| {
                let l = grid.extent()[axis];
                let x0 = self.center.x[axis];
                let k = self.lambda * self.center.xi[axis];
                let mut indices = Vec::new();
                let mut weights = Vec::new();
                for (j, x) in grid.positions(axis).into_iter().enumerate() {
                    let off = wrap(x - x0, l);
                    if !full && off.abs() > SUPPORT_WIDTHS * w {
                        continue;
                    }
                    indices.push(j);
                    weights.push(Complex64::from_polar(
                        (-0.5 * off * off / (w * w)).exp(),
                        k * off,
                    ));
                }
                let mass: f64 =
                    weights.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing(axis);
                let c = mass.sqrt().recip();
                for z in &mut weights {
                    *z *= c;
                }
                AxisWindow { indices, weights }
            })
            .collect()
    }

    /// The probe sampled on every point of `grid`, normalized there.
    pub fn packet(&self, grid: &GridState) -> Result<GridState> {
        self.check_band(grid)?;
        let win = self.windows(grid, true);
        let mut g = GridState::zeros(grid.sizes(), grid.extent())?;
        fill(&mut g, &win);
        Ok(g)
    }

    /// `<probe, u>` on the lattice of `u`.
    pub fn coefficient(&self, u: &GridState) -> Result<Complex64> {
        self.check_band(u)?;
        Ok(self.coefficient_unchecked(u))
    }

    pub(crate) fn coefficient_unchecked(&self, u: &GridState) -> Complex64 {
        let win = self.windows(u, false);
        let data = u.data();
        let mut sum = Complex64::new(0.0, 0.0);
        match win.as_slice() {
            [a] => {
                for (j, p) in a.indices.iter().zip(&a.weights) {
                    sum += p.conj() * data[*j];
                }
            }
            [a, b] => {
                let cols = u.sizes()[1];
                for (i, p) in a.indices.iter().zip(&a.weights) {
                    let mut row = Complex64::new(0.0, 0.0);
                    for (j, q) in b.indices.iter().zip(&b.weights) {
                        row += q.conj() * data[i * cols + j];
                    }
                    sum += p.conj() * row;
                }
            }
            _ => unreachable!("lattices have one or two axes"),
        }
        sum * u.cell_volume()
    }
}

fn fill(g: &mut GridState, win: &[AxisWindow]) {
    let cols = g.sizes().get(1).copied().unwrap_or(1);
    let data = g.data_mut();
    match win {
        [a] => {
            for (j, p) in a.indices.iter().zip(&a.weights) {
                data[*j] = *p;
            }
        }
        [a, b] => {
            for (i, p) in a.indices.iter().zip(&a.weights) {
                for (j, q) in b.indices.iter().zip(&b.weights) {
                    data[i * cols + j] = p * q;
                }
            }
        }
        _ => unreachable!("lattices have one or two axes"),
    }
}

/// Periodic offset in `[-L/2, L/2)`.
pub(crate) fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Regular,
    Singular,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Regular => "regular",
            Verdict::Singular => "singular",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Decay exponents separating the verdicts. These are heuristics: a finite
/// lattice cannot observe decay of every order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictThresholds {
    /// Exponents at or below this are regular.
    pub regular: f64,
    /// Exponents at or above this are singular.
    pub singular: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        Self {
            regular: -3.0,
            singular: -1.0,
        }
    }
}

impl VerdictThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.regular < self.singular) {
            return Err(Error::Configuration(format!(
                "regular threshold {} must lie below singular threshold {}",
                self.regular, self.singular
            )));
        }
        Ok(())
    }

    pub fn classify(&self, exponent: f64) -> Verdict {
        if exponent <= self.regular {
            Verdict::Regular
        } else if exponent >= self.singular {
            Verdict::Singular
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Probe coefficients of one state along a scale ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WFSample {
    pub center: PhasePoint,
    pub ladder: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Log-log slope of the magnitudes; `-inf` when fewer than two rungs
    /// rise above the noise floor.
    pub exponent: f64,
    /// Rungs used in the fit.
    pub fitted: usize,
    pub verdict: Verdict,
}

pub(crate) fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 5 {
        return Err(Error::Configuration(format!(
            "scale ladder needs at least 5 rungs, got {}",
            ladder.len()
        )));
    }
    if ladder.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::Configuration(
            "scale ladder entries must be positive".into(),
        ));
    }
    let q = ladder[1] / ladder[0];
    if !(q > 1.0) {
        return Err(Error::Configuration("scale ladder must increase".into()));
    }
    for pair in ladder.windows(2) {
        if ((pair[1] / pair[0]) / q - 1.0).abs() > 1e-9 {
            return Err(Error::Configuration(format!(
                "scale ladder {ladder:?} is not geometric"
            )));
        }
    }
    Ok(())
}

/// `n` rungs `first * ratio^k`.
pub fn geometric_ladder(first: f64, ratio: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| first * ratio.powi(k as i32)).collect()
}

/// Fits the decay of `|<probe_lambda, u>|` in `lambda` at one centre.
pub fn probe_decay(
    u: &GridState,
    center: &PhasePoint,
    ladder: &[f64],
    thresholds: &VerdictThresholds,
) -> Result<WFSample> {
    check_ladder(ladder)?;
    thresholds.validate()?;
    let probes = ladder
        .iter()
        .map(|&l| {
            let p = CoherentProbe::new(center.clone(), l)?;
            p.check_band(u)?;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let magnitudes: Vec<f64> = probes
        .par_iter()
        .map(|p| p.coefficient_unchecked(u).norm())
        .collect();
    let floor = COEFFICIENT_FLOOR * u.norm();
    let (exponent, fitted) = match loglog_slope(ladder, &magnitudes, floor) {
        Some(fit) => (fit.slope, fit.points),
        None => (
            f64::NEG_INFINITY,
            magnitudes.iter().filter(|m| **m > floor).count(),
        ),
    };
    Ok(WFSample {
        center: center.clone(),
        ladder: ladder.to_vec(),
        magnitudes,
        exponent,
        fitted,
        verdict: thresholds.classify(exponent),
    })
}

/// Long-format table, one row per centre and rung:
/// `sample, x, xi, lambda, coefficient, exponent, verdict`. Multi-axis
/// points are written space separated.
pub fn write_samples_csv<W: std::io::Write>(samples: &[WFSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sample",
        "x",
        "xi",
        "lambda",
        "coefficient",
        "exponent",
        "verdict",
    ])?;
    for (i, s) in samples.iter().enumerate() {
        let x = join(&s.center.x);
        let xi = join(&s.center.xi);
        for (l, m) in s.ladder.iter().zip(&s.magnitudes) {
            w.write_record(&[
                i.to_string(),
                x.clone(),
                xi.clone(),
                format!("{l:.16e}"),
                format!("{m:.16e}"),
                format!("{:.16e}", s.exponent),
                s.verdict.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|c| format!("{c:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn pp(x: f64, xi: f64) -> PhasePoint {
        PhasePoint::new(vec![x], vec![xi]).unwrap()
    }

    fn gaussian(n: usize, l: f64, x0: f64, w: f64) -> GridState {
        let mut g = GridState::from_fn(&[n], &[l], |x| {
            Complex64::new((-(x[0] - x0).powi(2) / (2.0 * w * w)).exp(), 0.0)
        })
        .unwrap();
        g.normalize().unwrap();
        g
    }

    #[test]
    fn packet_has_unit_norm() {
        let g = GridState::zeros(&[1024], &[20.0]).unwrap();
        for (x, l) in [(0.3, 16.0), (9.9, 64.0), (-3.7, 4.0)] {
            let p = CoherentProbe::new(pp(x, 0.5), l)
                .unwrap()
                .packet(&g)
                .unwrap();
            assert!((p.norm() - 1.0).abs() < 1e-10);
        }
        let g2 = GridState::zeros(&[128, 128], &[10.0, 10.0]).unwrap();
        let c = PhasePoint::new(vec![0.2, -1.0], vec![0.3, 0.4]).unwrap();
        let p = CoherentProbe::new(c, 9.0).unwrap().packet(&g2).unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_covector_rejected() {
        assert!(matches!(
            CoherentProbe::new(pp(0.0, 0.0), 4.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn band_violation() {
        let g = gaussian(256, 20.0, 0.0, 1.0);
        // Nyquist is 40.2, so half of it is below 64 * 0.5.
        let err = probe_decay(
            &g,
            &pp(0.0, 0.5),
            &geometric_ladder(4.0, 2.0, 5),
            &VerdictThresholds::default(),
        );
        assert!(matches!(err, Err(Error::Band(_))));
    }

    #[test]
    fn ladder_validation() {
        let g = gaussian(1024, 20.0, 0.0, 1.0);
        let th = VerdictThresholds::default();
        assert!(probe_decay(&g, &pp(0.0, 0.1), &[1.0, 2.0, 4.0, 8.0], &th).is_err());
        assert!(probe_decay(&g, &pp(0.0, 0.1), &[1.0, 2.0, 4.0, 8.0, 15.0], &th).is_err());
        let bad = VerdictThresholds {
            regular: -1.0,
            singular: -3.0,
        };
        assert!(probe_decay(&g, &pp(0.0, 0.1), &geometric_ladder(1.0, 2.0, 5), &bad).is_err());
    }

    #[test]
    fn smooth_gaussian_is_regular() {
        let g = gaussian(2048, 40.0, 0.0, 1.0);
        for (x, xi) in [(0.0, 1.0), (0.5, -1.2), (-1.0, 0.8)] {
            let s = probe_decay(
                &g,
                &pp(x, xi),
                &geometric_ladder(4.0, 2.0, 5),
                &VerdictThresholds::default(),
            )
            .unwrap();
            assert_eq!(s.verdict, Verdict::Regular, "{s:?}");
        }
    }

    /// Overlap of two normalized 1D Gaussians with widths `w1, w2` and
    /// carrier frequencies `k1, k2` at a common centre.
    fn overlap(w1: f64, k1: f64, w2: f64, k2: f64) -> f64 {
        let a = 1.0 / (w1 * w1) + 1.0 / (w2 * w2);
        (2.0 / (a * w1 * w2)).sqrt() * (-(k1 - k2).powi(2) / (2.0 * a)).exp()
    }

    #[test]
    fn coherent_state_self_overlap() {
        let (x0, xi0, l0) = (1.0, 0.05, 16.0);
        let g = GridState::zeros(&[4096], &[40.0]).unwrap();
        let u = CoherentProbe::new(pp(x0, xi0), l0)
            .unwrap()
            .packet(&g)
            .unwrap();
        let ladder = geometric_ladder(16.0, 2.0, 5);
        let s = probe_decay(&u, &pp(x0, xi0), &ladder, &VerdictThresholds::default()).unwrap();
        for (l, m) in ladder.iter().zip(&s.magnitudes) {
            let expected = overlap(l0.powf(-0.5), l0 * xi0, l.powf(-0.5), l * xi0);
            assert!((m - expected).abs() < 1e-10, "{l}: {m} vs {expected}");
        }
        assert_eq!(s.verdict, Verdict::Singular, "{s:?}");
    }

    /// `(lambda / pi)^(1/4) |int_0^inf exp(-i lambda xi x - lambda x^2 / 2) dx|`
    /// by composite Simpson on a fine grid.
    fn half_line_coefficient(lambda: f64, xi: f64) -> f64 {
        let w = lambda.powf(-0.5);
        let upper = 12.0 * w;
        let m = 200_000;
        let h = upper / m as f64;
        let f = |x: f64| Complex64::from_polar((-0.5 * lambda * x * x).exp(), -lambda * xi * x);
        let mut s = f(0.0) + f(upper);
        for j in 1..m {
            s += f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        (lambda / PI).powf(0.25) * (s * h / 3.0).norm()
    }

    #[test]
    fn jump_decays_slowly() {
        let (n, l) = (8192, 20.0);
        let h = l / n as f64;
        // Box on [0, 5] with half values at both jumps.
        let u = GridState::from_fn(&[n], &[l], |x| {
            let v = if (x[0].abs() < 0.5 * h) || ((x[0] - 5.0).abs() < 0.5 * h) {
                0.5
            } else if x[0] > 0.0 && x[0] < 5.0 {
                1.0
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .unwrap();
        let ladder = geometric_ladder(32.0, 2.0, 5);
        let xi0 = 0.5;
        let s = probe_decay(&u, &pp(0.0, xi0), &ladder, &VerdictThresholds::default()).unwrap();
        let oracle: Vec<f64> = ladder
            .iter()
            .map(|&lam| half_line_coefficient(lam, xi0))
            .collect();
        let expected = loglog_slope(&ladder, &oracle, 0.0).unwrap().slope;
        assert!(
            (s.exponent - expected).abs() < 0.05,
            "{} vs {expected}",
            s.exponent
        );
        assert!((expected + 0.75).abs() < 0.1, "{expected}");
        assert_eq!(s.verdict, Verdict::Singular);
        // Away from the jumps the box is locally constant.
        let away = probe_decay(&u, &pp(2.5, xi0), &ladder, &VerdictThresholds::default()).unwrap();
        assert_eq!(away.verdict, Verdict::Regular, "{away:?}");
    }

    #[test]
    fn csv_long_format() {
        let g = gaussian(1024, 20.0, 0.0, 1.0);
        let s = probe_decay(
            &g,
            &pp(0.0, 0.2),
            &geometric_ladder(2.0, 2.0, 5),
            &VerdictThresholds::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&[s.clone(), s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample,x,xi,lambda,coefficient,exponent,verdict");
        assert_eq!(lines.len(), 11);
        assert!(lines[10].starts_with("1,"));
        let mut empty = Vec::new();
        write_samples_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }

    #[test]
    fn wrap_is_periodic() {
        assert!((wrap(9.0, 10.0) + 1.0).abs() < 1e-15);
        assert!((wrap(-6.0, 10.0) - 4.0).abs() < 1e-15);
        assert!((wrap(0.3, 10.0) - 0.3).abs() < 1e-15);
    }
}
