//! Hamilton flows of the kinetic, full and high-energy-scaled symbols, their
//! scattering asymptotes and classical wave maps.

mod asymptotes;
mod effective;
mod estimates;
mod high_energy;
mod wave_map;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use asymptotes::{
    check_nontrapping, compute_asymptotes, AsymptoteOptions, Nontrapping, OneSidedLimit,
    ScatteringData,
};
pub use effective::{effective_hamiltonian_flow, EffectiveHamiltonian};
pub use estimates::{verify_flow_estimates, EstimateEntry, EstimateReport};
pub use high_energy::{high_energy_limit, HighEnergyComparison, HighEnergyLimit};
pub use wave_map::{wave_map, wave_map_jacobian, MapDirection, WaveMapOptions};

use crate::error::{ensure_finite, Error, Result};
use crate::ode::{self, OdeOptions, OdeSolution};
use crate::symbols::SymbolModel;

/// Point `(x, xi)` of phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() {
            return Err(Error::Domain(format!(
                "position has {} components but covector has {}",
                x.len(),
                xi.len()
            )));
        }
        ensure_finite("x", &x)?;
        ensure_finite("xi", &xi)?;
        Ok(Self { x, xi })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn to_state(&self) -> Vec<f64> {
        let mut s = self.x.clone();
        s.extend_from_slice(&self.xi);
        s
    }

    pub(crate) fn from_state(s: &[f64]) -> Self {
        let d = s.len() / 2;
        Self {
            x: s[..d].to_vec(),
            xi: s[d..].to_vec(),
        }
    }

    /// Largest componentwise distance to `other`.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.xi.iter().zip(&other.xi))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Which Hamiltonian generates the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowVariant {
    /// `k`
    Kinetic,
    /// `k + V^(L) + V^(S)`
    Full,
    /// `k + V^(L)`
    LongRange,
    /// `k + V / lambda^2`, the flow of `lambda^-2 p(x, lambda xi)`.
    Scaled(f64),
}

impl FlowVariant {
    pub(crate) fn weights(self) -> (f64, f64) {
        match self {
            FlowVariant::Kinetic => (0.0, 0.0),
            FlowVariant::Full => (1.0, 1.0),
            FlowVariant::LongRange => (1.0, 0.0),
            FlowVariant::Scaled(l) => (1.0 / (l * l), 1.0 / (l * l)),
        }
    }
}

/// Integration settings shared by the flow routines.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub tol: f64,
    /// Times the integrator must land on exactly.
    pub checkpoints: Vec<f64>,
    pub max_step: f64,
}

impl FlowOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            checkpoints: Vec::new(),
            max_step: f64::INFINITY,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub(crate) fn ode(&self) -> OdeOptions {
        OdeOptions {
            max_step: self.max_step,
            ..OdeOptions::with_tol(self.tol)
        }
    }
}

/// Accepted integrator steps of a Hamilton flow with conservation data.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub variant: FlowVariant,
    pub tol: f64,
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// Value of the generating symbol at each sample.
    pub energies: Vec<f64>,
    /// `max_i |p(x_i, xi_i) - p(x_0, xi_0)|`.
    pub energy_drift: f64,
    pub rejected_steps: usize,
    solution: OdeSolution,
}

impl Trajectory {
    pub(crate) fn from_solution(
        model: &SymbolModel,
        variant: FlowVariant,
        tol: f64,
        solution: OdeSolution,
    ) -> Self {
        let (wl, ws) = variant.weights();
        let points: Vec<PhasePoint> = solution
            .states
            .iter()
            .map(|s| PhasePoint::from_state(s))
            .collect();
        let energies: Vec<f64> = points
            .iter()
            .map(|p| model.symbol_weighted(&p.x, &p.xi, wl, ws))
            .collect();
        let e0 = energies[0];
        let energy_drift = energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        Self {
            variant,
            tol,
            times: solution.times.clone(),
            points,
            energies,
            energy_drift,
            rejected_steps: solution.rejected,
            solution,
        }
    }

    pub fn start(&self) -> &PhasePoint {
        &self.points[0]
    }

    pub fn end(&self) -> &PhasePoint {
        self.points
            .last()
            .expect("trajectory holds the initial point")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory holds the initial time")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Exact value at a checkpoint, otherwise the dense-output interpolant.
    pub fn at(&self, t: f64) -> Option<PhasePoint> {
        if let Some(s) = self.solution.state_at(t) {
            return Some(PhasePoint::from_state(s));
        }
        self.solution
            .interpolate(t)
            .map(|s| PhasePoint::from_state(&s))
    }

    /// Writes `t, x_1.., xi_1.., energy_drift` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.start().dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|k| format!("x_{k}")));
        header.extend((1..=d).map(|k| format!("xi_{k}")));
        header.push("energy_drift".into());
        w.write_record(&header)?;
        let e0 = self.energies[0];
        for ((t, p), e) in self.times.iter().zip(&self.points).zip(&self.energies) {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(p.x.iter().chain(&p.xi).map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", (e - e0).abs()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_start(model: &SymbolModel, start: &PhasePoint) -> Result<()> {
    if start.dim() != model.dim() {
        return Err(Error::Domain(format!(
            "phase point has dimension {}, model has {}",
            start.dim(),
            model.dim()
        )));
    }
    ensure_finite("x", &start.x)?;
    ensure_finite("xi", &start.xi)
}

/// Integrates the Hamilton flow of `variant` from `t0` to `t1`.
pub fn integrate_flow_with(
    model: &SymbolModel,
    start: &PhasePoint,
    t0: f64,
    t1: f64,
    variant: FlowVariant,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    check_start(model, start)?;
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if let FlowVariant::Scaled(l) = variant {
        if !(l >= 1.0) {
            return Err(Error::Precondition(format!(
                "scaling parameter must be >= 1, got {l}"
            )));
        }
    }
    let d = model.dim();
    let (wl, ws) = variant.weights();
    let flat = model.is_flat();
    let sol = ode::integrate(
        |_t, y, dy| {
            let (vel, force) = dy.split_at_mut(d);
            model.field_weighted(&y[..d], &y[d..], wl, ws, vel, force);
            Ok(())
        },
        t0,
        &start.to_state(),
        t1,
        &opts.checkpoints,
        &opts.ode(),
        |t, y| {
            if !flat && model.metric().min_eigenvalue(&y[..d]) <= 0.0 {
                return Err(Error::Integration {
                    t,
                    reason: "metric lost positive definiteness".into(),
                });
            }
            Ok(())
        },
    )?;
    Ok(Trajectory::from_solution(model, variant, opts.tol, sol))
}

/// Integrates the Hamilton flow of `variant` over `t_span`.
pub fn integrate_flow(
    model: &SymbolModel,
    start: &PhasePoint,
    t_span: (f64, f64),
    variant: FlowVariant,
    tol: f64,
) -> Result<Trajectory> {
    integrate_flow_with(
        model,
        start,
        t_span.0,
        t_span.1,
        variant,
        &FlowOptions::new(tol),
    )
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::symbols::{
        AngularProfile, ConformalDecayMetric, HomogeneousPotential, PotentialSpec,
    };

    pub(crate) fn bump(dim: usize) -> SymbolModel {
        SymbolModel::new(
            Arc::new(ConformalDecayMetric::new(dim, 0.2, 0.75)),
            PotentialSpec::zero(dim, 0.75, 2.0),
        )
        .unwrap()
    }

    #[test]
    fn free_flight() {
        let m = SymbolModel::free(2);
        let p = PhasePoint::new(vec![1.0, -2.0], vec![0.5, 0.25]).unwrap();
        let tr = integrate_flow(&m, &p, (0.0, 10.0), FlowVariant::Full, 1e-12).unwrap();
        let e = tr.end();
        assert!((e.x[0] - 6.0).abs() < 1e-10 && (e.x[1] - 0.5).abs() < 1e-10);
        assert_eq!(e.xi, vec![0.5, 0.25]);
    }

    #[test]
    fn constant_force_region() {
        let v = HomogeneousPotential::new(
            1,
            1.0,
            1.0,
            AngularProfile::Sides {
                plus: 1.0,
                minus: -1.0,
            },
        )
        .unwrap();
        let m = SymbolModel::new(
            Arc::new(crate::symbols::FlatMetric::new(1)),
            PotentialSpec::homogeneous(v),
        )
        .unwrap();
        let p = PhasePoint::new(vec![2.0], vec![3.0]).unwrap();
        let ts: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
        let opts = FlowOptions::new(1e-12).with_checkpoints(ts.clone());
        let tr = integrate_flow_with(&m, &p, 0.0, 4.0, FlowVariant::Full, &opts).unwrap();
        for t in ts {
            let q = tr.at(t).unwrap();
            assert!(q.x[0] > 1.0);
            assert!((q.xi[0] - (3.0 - t)).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_flow_matches_unscaled() {
        let m = bump(2);
        let p = PhasePoint::new(vec![0.3, 1.0], vec![0.7, -0.4]).unwrap();
        for lam in [2.0, 8.0] {
            let t = 3.0;
            let scaled = integrate_flow(&m, &p, (0.0, t), FlowVariant::Scaled(lam), 1e-12).unwrap();
            let big = PhasePoint::new(p.x.clone(), p.xi.iter().map(|v| v * lam).collect()).unwrap();
            let direct =
                integrate_flow(&m, &big, (0.0, t / lam), FlowVariant::Full, 1e-13).unwrap();
            let a = scaled.end();
            let b = direct.end();
            for k in 0..2 {
                assert!((a.x[k] - b.x[k]).abs() < 1e-8);
                assert!((a.xi[k] - b.xi[k] / lam).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn group_law_and_energy() {
        let m = bump(2);
        let p = PhasePoint::new(vec![-1.0, 0.5], vec![1.0, 0.2]).unwrap();
        let tol = 1e-10;
        let whole = integrate_flow(&m, &p, (0.0, 5.0), FlowVariant::Kinetic, tol).unwrap();
        let first = integrate_flow(&m, &p, (0.0, 2.0), FlowVariant::Kinetic, tol).unwrap();
        let second =
            integrate_flow(&m, first.end(), (0.0, 3.0), FlowVariant::Kinetic, tol).unwrap();
        assert!(whole.end().distance(second.end()) < 10.0 * tol);
        assert!(whole.energy_drift <= 10.0 * tol * 5.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = SymbolModel::free(1);
        let p = PhasePoint::new(vec![0.0], vec![1.0]).unwrap();
        assert!(integrate_flow(&m, &p, (0.0, 1.0), FlowVariant::Full, 0.0).is_err());
        assert!(integrate_flow(&m, &p, (0.0, 1.0), FlowVariant::Scaled(0.5), 1e-8).is_err());
        assert!(PhasePoint::new(vec![0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let m = SymbolModel::free(1);
        let p = PhasePoint::new(vec![0.0], vec![1.0]).unwrap();
        let tr = integrate_flow(&m, &p, (0.0, 1.0), FlowVariant::Full, 1e-10).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x_1,xi_1,energy_drift\n"));
        assert_eq!(text.lines().count(), tr.len() + 1);
    }
}
