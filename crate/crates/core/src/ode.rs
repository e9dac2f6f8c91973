//! Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! Every accepted step is kept so callers can rebuild a dense trajectory;
//! requested checkpoint times are hit exactly by clipping the step.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub max_step: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 2_000_000,
            max_step: f64::INFINITY,
        }
    }
}

/// Accepted steps of an integration, including the initial point.
#[derive(Debug, Clone, Default)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    pub rejected: usize,
}

impl OdeSolution {
    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("solution has at least the initial point")
    }

    /// Cubic Hermite interpolation between the bracketing accepted steps.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        let forward = n < 2 || self.times[n - 1] >= self.times[0];
        let key = |s: f64| if forward { s } else { -s };
        let tk = key(t);
        if tk < key(self.times[0]) || tk > key(self.times[n - 1]) {
            return None;
        }
        let idx = self.times.partition_point(|&s| key(s) <= tk);
        if idx == 0 {
            return Some(self.states[0].clone());
        }
        if idx >= n {
            return Some(self.states[n - 1].clone());
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let h = t1 - t0;
        let theta = (t - t0) / h;
        let h00 = (1.0 + 2.0 * theta) * (1.0 - theta).powi(2);
        let h10 = theta * (1.0 - theta).powi(2);
        let h01 = theta * theta * (3.0 - 2.0 * theta);
        let h11 = theta * theta * (theta - 1.0);
        let (y0, y1) = (&self.states[idx - 1], &self.states[idx]);
        let (d0, d1) = (&self.derivatives[idx - 1], &self.derivatives[idx]);
        Some(
            (0..y0.len())
                .map(|i| h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i])
                .collect(),
        )
    }

    /// State at an exact checkpoint time, if one was recorded.
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|&s| s == t)
            .map(|i| self.states[i].as_slice())
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let n = y.len() as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, landing exactly on every
/// entry of `checkpoints` that lies strictly between the two. `on_accept` is
/// invoked after each accepted step and may abort the integration.
pub fn integrate<F, G>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    checkpoints: &[f64],
    opts: &OdeOptions,
    mut on_accept: G,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> = checkpoints
        .iter()
        .copied()
        .filter(|&c| (c - t0) * dir > 0.0 && (t_end - c) * dir > 0.0)
        .collect();
    stops.push(t_end);
    stops.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    stops.dedup();

    let mut sol = OdeSolution::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1)?;
    sol.times.push(t);
    sol.states.push(y.clone());
    sol.derivatives.push(k1.clone());
    if t0 == t_end {
        return Ok(sol);
    }

    // Hairer's starting step heuristic
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k1
        .iter()
        .zip(&sc)
        .map(|(v, s)| (v / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min((t_end - t0).abs()).min(opts.max_step);
    {
        let y1: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + dir * h * b).collect();
        let mut f1 = vec![0.0; n];
        f(t + dir * h, &y1, &mut f1)?;
        let d2 = (f1
            .iter()
            .zip(&k1)
            .zip(&sc)
            .map(|((a, b), s)| ((a - b) / s).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt()
            / h;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        h = (100.0 * h).min(h1).min(opts.max_step);
    }

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut err_old = 1e-4f64;
    let mut stop_idx = 0;
    let mut steps = 0usize;
    let mut last_rejected = false;

    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let remaining = (target - t) * dir;
        let mut hs = h.min(remaining);
        let mut hit = false;
        if hs >= remaining * (1.0 - 1e-12) {
            hs = remaining;
            hit = true;
        }
        let min_h = 1e-14 * t.abs().max(1.0);
        if hs < min_h && !hit {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {hs:e})"),
            });
        }
        let hh = dir * hs;

        for i in 0..n {
            ytmp[i] = y[i] + hh * A21 * k1[i];
        }
        f(t + C2 * hh, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + hh * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hh, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + hh * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hh, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + hh * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hh, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] =
                y[i] + hh * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if hit { target } else { t + hh };
        f(t + hh, &ytmp, &mut k6)?;
        for i in 0..n {
            ynew[i] =
                y[i] + hh * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &ynew, &mut k7)?;
        for i in 0..n {
            err[i] =
                hh * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&y, &ynew, &err, opts);
        if !en.is_finite() {
            h = hs * 0.2;
            last_rejected = true;
            sol.rejected += 1;
            continue;
        }

        if en <= 1.0 {
            let en_c = en.max(1e-10);
            let mut fac = 0.9 * en_c.powf(-0.17) * err_old.powf(0.04);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_old = en_c;
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            on_accept(t, &y)?;
            sol.times.push(t);
            sol.states.push(y.clone());
            sol.derivatives.push(k1.clone());
            if hit {
                stop_idx += 1;
                // a clipped step says nothing about the natural step size
                h = h.max(hs * fac).min(opts.max_step);
            } else {
                h = (hs * fac).min(opts.max_step);
            }
            last_rejected = false;
        } else {
            let fac = (0.9 * en.powf(-0.2)).max(0.2);
            h = hs * fac;
            last_rejected = true;
            sol.rejected += 1;
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_hook(_: f64, _: &[f64]) -> Result<()> {
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let sol = integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            5.0,
            &[1.0, 2.5],
            &OdeOptions::with_tol(1e-11),
            no_hook,
        )
        .unwrap();
        assert!((sol.last()[0] - (-5.0f64).exp()).abs() < 1e-10);
        let mid = sol.state_at(2.5).unwrap()[0];
        assert!((mid - (-2.5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            -3.0,
            &[],
            &OdeOptions::with_tol(1e-12),
            no_hook,
        )
        .unwrap();
        let y = sol.last();
        assert!((y[0] - 3.0f64.cos()).abs() < 1e-10);
        assert!((y[1] - 3.0f64.sin()).abs() < 1e-10);
        let mid = sol.interpolate(-1.3).unwrap();
        assert!((mid[0] - 1.3f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn singular_field_underflows() {
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            2.0,
            &[],
            &OdeOptions::with_tol(1e-10),
            no_hook,
        );
        match r {
            Err(Error::Integration { t, .. }) => assert!(t < 1.0 && t > 0.9),
            other => panic!("expected integration error, got {other:?}"),
        }
    }
}
