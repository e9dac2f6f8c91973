//! Regression helpers and geometric-ladder tail extrapolation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        sxx += (xs[i] - mx).powi(2);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        points: n,
    })
}

/// Slope of `log y` against `log x`, ignoring samples with `y <= floor`.
/// Returns `None` when fewer than two samples survive.
pub fn loglog_slope(xs: &[f64], ys: &[f64], floor: f64) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > floor && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    linear_regression(&lx, &ly)
}

/// Limit of a sequence sampled on a geometric ladder, with the fitted
/// power-law tail `|v(t) - limit| ~ amplitude * t^(-rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub limit: Vec<f64>,
    /// Decay rate of the tail; `+inf` when the sequence is constant to noise.
    pub rate: f64,
    pub amplitude: f64,
    pub error: f64,
    /// Number of epsilon-table eliminations applied (0 = raw last value).
    pub levels: usize,
}

impl TailFit {
    /// Exponent of the tail in the `C t^exponent` convention.
    pub fn exponent(&self) -> f64 {
        -self.rate
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fitted decay rate of the successive differences over the last `window`
/// rungs, or `None` if the tail is at the noise floor.
fn tail_rate(
    values: &[Vec<f64>],
    ladder: &[f64],
    floor: f64,
    window: usize,
) -> Result<Option<f64>> {
    let k = values.len();
    let norms: Vec<f64> = (0..k - 1)
        .map(|i| norm(&diff(&values[i + 1], &values[i])))
        .collect();
    let start = norms.len().saturating_sub(window);
    let tail_norms = &norms[start..];
    let tail_t = &ladder[start..norms.len()];
    if tail_norms.iter().all(|&d| d <= floor) {
        return Ok(None);
    }
    let Some(fit) = loglog_slope(tail_t, tail_norms, floor) else {
        return Ok(None);
    };
    let rate = -fit.slope;
    if !(rate > 0.0) {
        return Err(Error::Convergence(format!(
            "fitted tail exponent {:.4} is not negative",
            fit.slope
        )));
    }
    Ok(Some(rate))
}

fn samelson_inverse(v: &[f64]) -> Vec<f64> {
    let n2 = dot(v, v);
    v.iter().map(|x| x / n2).collect()
}

/// Two columns of the vector epsilon table. On a geometric ladder each
/// power-law tail term is a geometric sequence in the rung index, and the
/// even column `2m` removes `m` such terms. Returns `None` once differences
/// reach the noise floor.
fn epsilon_step(prev: &[Vec<f64>], cur: &[Vec<f64>], floor: f64) -> Option<Vec<Vec<f64>>> {
    let k = cur.len();
    let mut out = Vec::with_capacity(k.saturating_sub(1));
    for i in 0..k.saturating_sub(1) {
        let d = diff(&cur[i + 1], &cur[i]);
        if norm(&d) <= floor {
            return None;
        }
        let inv = samelson_inverse(&d);
        let base = &prev[i + 1];
        out.push(base.iter().zip(&inv).map(|(b, v)| b + v).collect());
    }
    Some(out)
}

/// Extrapolates `values[k]` sampled at increasing `ladder[k]` (geometric) to
/// the limit `ladder -> inf`. At most `max_levels` eliminations are applied;
/// a deeper level is only kept when it lowers the error estimate.
pub fn extrapolate_tail(
    values: &[Vec<f64>],
    ladder: &[f64],
    floor: f64,
    max_levels: usize,
) -> Result<TailFit> {
    extrapolate(values, ladder, floor, max_levels, false)
}

/// Like [`extrapolate_tail`] but applies every level the table supports up
/// to `levels`, regardless of the error estimate. Makes the extrapolated
/// limit a smooth function of the samples.
pub fn extrapolate_tail_exact(
    values: &[Vec<f64>],
    ladder: &[f64],
    floor: f64,
    levels: usize,
) -> Result<TailFit> {
    extrapolate(values, ladder, floor, levels, true)
}

fn extrapolate(
    values: &[Vec<f64>],
    ladder: &[f64],
    floor: f64,
    max_levels: usize,
    force: bool,
) -> Result<TailFit> {
    assert_eq!(values.len(), ladder.len());
    let k = values.len();
    if k < 3 {
        return Err(Error::Convergence(
            "need at least three ladder rungs".into(),
        ));
    }
    let last = values[k - 1].clone();
    let raw_err = norm(&diff(&values[k - 1], &values[k - 2]));
    let mut best = TailFit {
        limit: last,
        rate: f64::INFINITY,
        amplitude: 0.0,
        error: raw_err,
        levels: 0,
    };
    let Some(rate) = tail_rate(values, ladder, floor, 4)? else {
        return Ok(best);
    };
    let q = ladder[k - 1] / ladder[k - 2];
    let r = q.powf(-rate);
    best.rate = rate;
    best.amplitude = raw_err * ladder[k - 2].powf(rate) / (1.0 - r);

    let dim = values[0].len();
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; dim]; k + 1];
    let mut cur: Vec<Vec<f64>> = values.to_vec();
    for depth in 0..max_levels {
        let Some(odd) = epsilon_step(&prev, &cur, floor) else {
            break;
        };
        let Some(even) = epsilon_step(&cur, &odd, floor * floor) else {
            break;
        };
        let n = even.len();
        if n == 0 {
            break;
        }
        let err = if n >= 2 {
            norm(&diff(&even[n - 1], &even[n - 2]))
        } else {
            norm(&diff(&even[0], &cur[cur.len() - 1]))
        };
        if !err.is_finite() {
            break;
        }
        if force || depth == 0 || err < best.error {
            best.limit = even[n - 1].clone();
            best.error = err.max(floor);
            best.levels = depth + 1;
        } else {
            break;
        }
        prev = odd;
        cur = even;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = linear_regression(&xs, &ys).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_power_tail_is_removed() {
        let ladder: Vec<f64> = (0..10).map(|k| 8.0 * 2f64.powi(k)).collect();
        let values: Vec<Vec<f64>> = ladder
            .iter()
            .map(|t| vec![3.0 + 2.0 * t.powf(-0.5), -1.0 + t.powf(-0.5)])
            .collect();
        let fit = extrapolate_tail(&values, &ladder, 1e-15, 1).unwrap();
        assert!((fit.rate - 0.5).abs() < 1e-10);
        assert!((fit.limit[0] - 3.0).abs() < 1e-12);
        assert!((fit.limit[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_power_tail_needs_second_level() {
        let ladder: Vec<f64> = (0..12).map(|k| 8.0 * 2f64.powi(k)).collect();
        let values: Vec<Vec<f64>> = ladder
            .iter()
            .map(|t| vec![1.0 + t.powf(-0.5) + 3.0 * t.powf(-0.75)])
            .collect();
        let one = extrapolate_tail(&values, &ladder, 1e-15, 1).unwrap();
        let two = extrapolate_tail(&values, &ladder, 1e-15, 3).unwrap();
        assert!((two.limit[0] - 1.0).abs() < (one.limit[0] - 1.0).abs());
        assert!((two.limit[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_sequence_is_exact() {
        let ladder = [1.0, 2.0, 4.0, 8.0];
        let values = vec![vec![5.0]; 4];
        let fit = extrapolate_tail(&values, &ladder, 1e-14, 2).unwrap();
        assert_eq!(fit.limit, vec![5.0]);
        assert!(fit.rate.is_infinite());
    }

    #[test]
    fn growing_tail_is_rejected() {
        let ladder: Vec<f64> = (0..6).map(|k| 2f64.powi(k)).collect();
        let values: Vec<Vec<f64>> = ladder.iter().map(|t| vec![t.sqrt()]).collect();
        assert!(matches!(
            extrapolate_tail(&values, &ladder, 1e-14, 1),
            Err(Error::Convergence(_))
        ));
    }
}
