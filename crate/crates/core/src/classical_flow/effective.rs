use super::{check_start, FlowVariant, PhasePoint, Trajectory};
use crate::dollard_phase::{PhaseFunction, PhaseKind};
use crate::error::{Error, Result};
use crate::ode;
use crate::symbols::SymbolModel;

/// `l(t; z, xi) = p(z + d_xi Phi(t, xi), xi) - d_t Phi(t, xi)`, the generator
/// of the free-frame coordinates `z(t) = x(t) - d_xi Phi(t, xi(t))`.
#[derive(Debug)]
pub struct EffectiveHamiltonian<'a> {
    model: &'a SymbolModel,
    phase: &'a PhaseFunction,
}

impl<'a> EffectiveHamiltonian<'a> {
    pub fn new(model: &'a SymbolModel, phase: &'a PhaseFunction) -> Result<Self> {
        if phase.kind() != PhaseKind::LongRange {
            return Err(Error::Configuration(
                "effective Hamiltonian needs the long-range phase".into(),
            ));
        }
        if phase.model().dim() != model.dim() {
            return Err(Error::Configuration(
                "phase and model dimensions differ".into(),
            ));
        }
        Ok(Self { model, phase })
    }

    pub fn value(&self, t: f64, z: &[f64], xi: &[f64]) -> Result<f64> {
        let g = self.phase.phase_gradient(t, xi)?;
        let x: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a + b).collect();
        Ok(self.model.symbol_weighted(&x, xi, 1.0, 1.0) - self.phase.time_derivative(t, xi))
    }

    /// `(d_xi l, -d_z l)` written into `dz`, `dxi`.
    pub fn field(
        &self,
        t: f64,
        z: &[f64],
        xi: &[f64],
        dz: &mut [f64],
        dxi: &mut [f64],
    ) -> Result<()> {
        let d = self.model.dim();
        let (g, h) = self.phase.gradient_and_hessian(t, xi)?;
        let x: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a + b).collect();
        let mut vel = vec![0.0; d];
        let mut force = vec![0.0; d];
        self.model
            .field_weighted(&x, xi, 1.0, 1.0, &mut vel, &mut force);
        let dtg = self.phase.time_derivative_gradient(t, xi);
        for i in 0..d {
            let chain: f64 = (0..d).map(|j| h[i * d + j] * force[j]).sum();
            dz[i] = vel[i] - chain - dtg[i];
            dxi[i] = force[i];
        }
        Ok(())
    }
}

/// Integrates the time-dependent flow of the effective Hamiltonian from
/// `(z, xi) = (x_0, xi_0)` at `t_span.0 = 0`. Sample energies hold `l`.
pub fn effective_hamiltonian_flow(
    model: &SymbolModel,
    phase: &PhaseFunction,
    start: &PhasePoint,
    t_span: (f64, f64),
    tol: f64,
    checkpoints: &[f64],
) -> Result<Trajectory> {
    check_start(model, start)?;
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let ham = EffectiveHamiltonian::new(model, phase)?;
    let d = model.dim();
    let sol = ode::integrate(
        |t, y, dy| {
            let (dz, dxi) = dy.split_at_mut(d);
            ham.field(t, &y[..d], &y[d..], dz, dxi)
        },
        t_span.0,
        &start.to_state(),
        t_span.1,
        checkpoints,
        &ode::OdeOptions::with_tol(tol),
        |_, _| Ok(()),
    )?;
    let mut traj = Trajectory::from_solution(model, FlowVariant::Full, tol, sol);
    let mut energies = Vec::with_capacity(traj.len());
    for (t, p) in traj.times.iter().zip(&traj.points) {
        energies.push(ham.value(*t, &p.x, &p.xi)?);
    }
    let e0 = energies[0];
    traj.energy_drift = energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    traj.energies = energies;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::classical_flow::{integrate_flow_with, FlowOptions};
    use crate::symbols::{
        AngularProfile, ConformalDecayMetric, FlatMetric, HomogeneousPotential, PotentialSpec,
        RadialPower,
    };

    #[test]
    fn free_model_is_stationary() {
        let m = SymbolModel::free(2);
        let pf = PhaseFunction::long_range(Arc::new(m.clone()), 1e-12).unwrap();
        let p = PhasePoint::new(vec![1.0, 2.0], vec![-0.5, 0.7]).unwrap();
        let tr = effective_hamiltonian_flow(&m, &pf, &p, (0.0, 3.0), 1e-10, &[]).unwrap();
        assert!(tr.end().distance(&p) < 1e-12);
        let ham = EffectiveHamiltonian::new(&m, &pf).unwrap();
        assert!(ham.value(1.3, &p.x, &p.xi).unwrap().abs() < 1e-12);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn reconstructs_full_flow() {
        let v = HomogeneousPotential::new(
            2,
            1.25,
            1.0,
            AngularProfile::Trig {
                cos: vec![1.0, 0.2],
                sin: vec![0.0, 0.1],
            },
        )
        .unwrap();
        let m = SymbolModel::new(
            Arc::new(ConformalDecayMetric::new(2, 0.2, 0.75)),
            PotentialSpec::homogeneous(v)
                .with_exponents(0.75, 1.6)
                .with_short_range(Arc::new(RadialPower::new(2, 0.3, 0.4))),
        )
        .unwrap();
        let pf = PhaseFunction::long_range(Arc::new(m.clone()), 1e-13).unwrap();
        let p = PhasePoint::new(vec![0.5, -0.2], vec![1.2, 0.4]).unwrap();
        let tol = 1e-9;
        for t in [2.0, -2.0] {
            let full = integrate_flow_with(
                &m,
                &p,
                0.0,
                t,
                FlowVariant::Full,
                &FlowOptions::new(tol * 1e-2),
            )
            .unwrap();
            let eff = effective_hamiltonian_flow(&m, &pf, &p, (0.0, t), tol * 1e-2, &[]).unwrap();
            let e = full.end();
            let g = pf.phase_gradient(t, &e.xi).unwrap();
            let q = eff.end();
            for k in 0..2 {
                assert!(
                    (q.x[k] - (e.x[k] - g[k])).abs() < 10.0 * tol,
                    "{:?} vs {:?}",
                    q,
                    e
                );
                assert!((q.xi[k] - e.xi[k]).abs() < 10.0 * tol);
            }
        }
    }

    #[test]
    fn linear_potential_force_is_bounded_uniformly() {
        let v = HomogeneousPotential::new(1, 1.0, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        let m =
            SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap();
        let pf = PhaseFunction::long_range(Arc::new(m.clone()), 1e-12).unwrap();
        let ham = EffectiveHamiltonian::new(&m, &pf).unwrap();
        let slope_bound = (0..=400)
            .map(|k| {
                let (mut v, mut f) = ([0.0], [0.0]);
                m.field_weighted(&[-2.0 + 0.01 * k as f64], &[0.0], 1.0, 1.0, &mut v, &mut f);
                f[0].abs()
            })
            .fold(0.0, f64::max);
        let mut sups = Vec::new();
        for xi0 in [4.0, 8.0, 16.0, 32.0, 64.0] {
            let p = PhasePoint::new(vec![0.3], vec![xi0]).unwrap();
            let tr = effective_hamiltonian_flow(&m, &pf, &p, (0.0, 2.0), 1e-9, &[]).unwrap();
            let mut worst = 0.0f64;
            for (t, q) in tr.times.iter().zip(&tr.points) {
                let (mut dz, mut dxi) = ([0.0], [0.0]);
                ham.field(*t, &q.x, &q.xi, &mut dz, &mut dxi).unwrap();
                worst = worst.max(dxi[0].abs());
            }
            sups.push(worst);
        }
        assert!(
            sups.iter().all(|s| *s <= 1.01 * slope_bound),
            "{sups:?} vs {slope_bound}"
        );
        assert!(sups[4] <= 1.5 * sups[0], "{sups:?}");
    }
}
