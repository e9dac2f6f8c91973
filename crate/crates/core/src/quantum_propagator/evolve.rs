use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{GridState, Spectral};
use crate::error::{Error, Result};
use crate::symbols::SymbolModel;

/// Split-step settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    /// Largest time step; the actual step divides `|t|` evenly.
    pub dt: f64,
    /// Width of the absorbing layer as a fraction of the half extent.
    pub absorb_fraction: f64,
    pub absorb_strength: f64,
    /// The potential is flattened beyond this fraction of the half extent.
    pub truncation_fraction: f64,
    /// Largest tolerated relative norm loss.
    pub max_norm_loss: f64,
    /// Escalates excessive norm loss to an error.
    pub strict: bool,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            absorb_fraction: 0.1,
            absorb_strength: 20.0,
            truncation_fraction: 0.8,
            max_norm_loss: 0.1,
            strict: false,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Configuration(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(0.0..=0.2).contains(&self.absorb_fraction) {
            return Err(Error::Configuration(format!(
                "absorbing layer must cover at most 20% of each side, got {}",
                self.absorb_fraction
            )));
        }
        if !(self.absorb_strength >= 0.0) {
            return Err(Error::Configuration(
                "absorbing strength must be non-negative".into(),
            ));
        }
        if !(self.truncation_fraction > 0.0 && self.truncation_fraction <= 1.0) {
            return Err(Error::Configuration(format!(
                "truncation fraction must lie in (0, 1], got {}",
                self.truncation_fraction
            )));
        }
        if !(self.max_norm_loss > 0.0) {
            return Err(Error::Configuration(
                "norm-loss threshold must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of equal steps covering `|t|`.
    pub fn steps(&self, t: f64) -> usize {
        ((t.abs() / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }
}

/// Maps `r` to itself below `r_t` and saturates smoothly above it.
fn flatten_radius(r: f64, r_t: f64) -> f64 {
    if r <= r_t {
        r
    } else {
        let w = 0.1 * r_t;
        r_t + w * ((r - r_t) / w).tanh()
    }
}

/// Real potential and absorbing rate on the lattice.
pub(crate) fn lattice_potential(
    u: &GridState,
    model: &SymbolModel,
    cfg: &PropagatorConfig,
) -> (Vec<f64>, Vec<f64>) {
    let d = u.dim();
    let half: Vec<f64> = u.extent().iter().map(|l| 0.5 * l).collect();
    let r_t = cfg.truncation_fraction * half.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut v = Vec::with_capacity(u.len());
    let mut w = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        u.point_into(i, &mut x);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let f = if r > 0.0 {
            flatten_radius(r, r_t) / r
        } else {
            1.0
        };
        for (yk, xk) in y.iter_mut().zip(&x) {
            *yk = f * xk;
        }
        v.push(model.potential_weighted(&y, 1.0, 1.0));
        let mut rate = 0.0;
        if cfg.absorb_fraction > 0.0 {
            for (xk, h) in x.iter().zip(&half) {
                let start = h * (1.0 - cfg.absorb_fraction);
                if xk.abs() > start {
                    let s = (xk.abs() - start) / (h * cfg.absorb_fraction);
                    rate += cfg.absorb_strength * s * s;
                }
            }
        }
        w.push(rate);
    }
    (v, w)
}

/// `e^(-i t H) u_0` with `H = -Delta/2 + V` by Strang splitting: half a
/// kinetic step in Fourier space, a full potential step, half a kinetic
/// step. Absorption acts in both time directions.
pub fn evolve(
    u0: &GridState,
    model: &SymbolModel,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<GridState> {
    cfg.validate()?;
    if !model.is_flat() {
        return Err(Error::Unsupported(
            "quantum evolution needs the flat metric".into(),
        ));
    }
    if model.dim() != u0.dim() {
        return Err(Error::Lattice(format!(
            "state has {} axes, model has {}",
            u0.dim(),
            model.dim()
        )));
    }
    if !t.is_finite() {
        return Err(Error::Domain(format!(
            "evolution time must be finite, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let steps = cfg.steps(t);
    let h = t / steps as f64;
    let (v, w) = lattice_potential(u0, model, cfg);
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if h.abs() * vmax > PI {
        return Err(Error::Configuration(format!(
            "time step {:.3e} times max |V| {vmax:.3e} exceeds pi",
            h.abs()
        )));
    }
    let potential_step: Vec<Complex64> = v
        .iter()
        .zip(&w)
        .map(|(vi, wi)| Complex64::from_polar((-h.abs() * wi).exp(), -h * vi))
        .collect();
    let k2: Vec<f64> = u0
        .frequency_points()
        .iter()
        .map(|k| k.iter().map(|c| c * c).sum())
        .collect();
    let half_kinetic: Vec<Complex64> = k2
        .iter()
        .map(|q| Complex64::from_polar(1.0, -0.25 * h * q))
        .collect();
    let full_kinetic: Vec<Complex64> = half_kinetic.iter().map(|z| z * z).collect();

    let sp = Spectral::new(u0);
    let mut data = u0.data().to_vec();
    sp.forward(&mut data);
    mul(&mut data, &half_kinetic);
    for step in 0..steps {
        sp.inverse(&mut data);
        mul(&mut data, &potential_step);
        sp.forward(&mut data);
        mul(
            &mut data,
            if step + 1 == steps {
                &half_kinetic
            } else {
                &full_kinetic
            },
        );
    }
    sp.inverse(&mut data);
    let out = u0.with_data(data)?;

    let n0 = u0.norm();
    let loss = if n0 > 0.0 { 1.0 - out.norm() / n0 } else { 0.0 };
    if loss > cfg.max_norm_loss {
        let msg = format!("relative norm loss {loss:.3e} in the absorbing layer");
        if cfg.strict {
            return Err(Error::Boundary(msg));
        }
        log::warn!("{msg}");
    }
    Ok(out)
}

fn mul(data: &mut [Complex64], factor: &[Complex64]) {
    for (z, f) in data.iter_mut().zip(factor) {
        *z *= f;
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::quantum_propagator::{apply_multiplier, MultiplierSpec};
    use crate::symbols::{
        AngularProfile, ConformalDecayMetric, FlatMetric, HomogeneousPotential, PotentialSpec,
    };

    fn coherent(n: usize, l: f64, x0: f64, k0: f64, w: f64) -> GridState {
        let mut g = GridState::from_fn(&[n], &[l], |x| {
            Complex64::from_polar((-(x[0] - x0).powi(2) / (2.0 * w * w)).exp(), k0 * x[0])
        })
        .unwrap();
        g.normalize().unwrap();
        g
    }

    fn power_model(beta: f64) -> SymbolModel {
        let v = HomogeneousPotential::new(1, beta, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap()
    }

    #[test]
    fn free_evolution_is_the_free_multiplier() {
        let u = coherent(512, 40.0, -3.0, 2.0, 0.7);
        let m = SymbolModel::free(1);
        let cfg = PropagatorConfig {
            dt: 0.1,
            ..PropagatorConfig::default()
        };
        let a = evolve(&u, &m, 1.5, &cfg).unwrap();
        let b = apply_multiplier(&u, &MultiplierSpec::free(&u, -1.5).unwrap()).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-10);
    }

    #[test]
    fn free_gaussian_moments() {
        let (x0, k0, w, t) = (-4.0, 3.0, 0.8, 2.0);
        let u = coherent(1024, 60.0, x0, k0, w);
        let v = evolve(&u, &SymbolModel::free(1), t, &PropagatorConfig::default()).unwrap();
        let xs = v.positions(0);
        let dx = v.spacing(0);
        let mean: f64 = xs
            .iter()
            .zip(v.data())
            .map(|(x, z)| x * z.norm_sqr())
            .sum::<f64>()
            * dx;
        let var: f64 = xs
            .iter()
            .zip(v.data())
            .map(|(x, z)| (x - mean).powi(2) * z.norm_sqr())
            .sum::<f64>()
            * dx;
        // |u|^2 has variance w^2/2, growing to (w^2 + t^2/w^2)/2
        assert!((mean - (x0 + k0 * t)).abs() < 1e-9);
        assert!((var - 0.5 * (w * w + t * t / (w * w))).abs() < 1e-9);
    }

    #[test]
    fn second_order_in_time_step() {
        let m = power_model(1.25);
        let u = coherent(512, 30.0, 4.0, 0.0, 1.0);
        let run = |dt: f64| {
            let cfg = PropagatorConfig {
                dt,
                absorb_fraction: 0.0,
                ..PropagatorConfig::default()
            };
            evolve(&u, &m, 1.0, &cfg).unwrap()
        };
        let reference = run(0.1 / 64.0);
        let e1 = run(0.1).distance(&reference).unwrap();
        let e2 = run(0.05).distance(&reference).unwrap();
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn unitary_without_absorption() {
        let m = power_model(1.0);
        let u = coherent(512, 40.0, 1.0, -2.0, 0.6);
        let cfg = PropagatorConfig {
            dt: 0.01,
            absorb_fraction: 0.0,
            ..PropagatorConfig::default()
        };
        let v = evolve(&u, &m, 1.0, &cfg).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-10);
        let back = evolve(&v, &m, -1.0, &cfg).unwrap();
        assert!(back.distance(&u).unwrap() < 1e-10);
    }

    #[test]
    fn absorbing_layer_removes_escaping_mass() {
        let u = coherent(512, 20.0, 6.0, 6.0, 0.5);
        let cfg = PropagatorConfig {
            dt: 0.01,
            strict: true,
            ..PropagatorConfig::default()
        };
        let err = evolve(&u, &SymbolModel::free(1), 2.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Boundary(_)));
        let lenient = PropagatorConfig {
            strict: false,
            ..cfg
        };
        let v = evolve(&u, &SymbolModel::free(1), 2.0, &lenient).unwrap();
        assert!(v.norm() < 0.9);
    }

    #[test]
    fn configuration_guards() {
        let u = coherent(64, 10.0, 0.0, 1.0, 1.0);
        let bumpy = SymbolModel::new(
            Arc::new(ConformalDecayMetric::new(1, 0.2, 0.75)),
            PotentialSpec::zero(1, 0.75, 2.0),
        )
        .unwrap();
        assert!(matches!(
            evolve(&u, &bumpy, 1.0, &PropagatorConfig::default()),
            Err(Error::Unsupported(_))
        ));
        let wide = PropagatorConfig {
            absorb_fraction: 0.3,
            ..PropagatorConfig::default()
        };
        assert!(evolve(&u, &SymbolModel::free(1), 1.0, &wide).is_err());
        let coarse = PropagatorConfig {
            dt: 2.0,
            ..PropagatorConfig::default()
        };
        assert!(matches!(
            evolve(&u, &power_model(1.0), 2.0, &coarse),
            Err(Error::Configuration(_))
        ));
    }
}
