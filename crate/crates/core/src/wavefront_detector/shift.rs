use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probe::{wrap, CoherentProbe};
use crate::classical_flow::PhasePoint;
use crate::error::{Error, Result};
use crate::quantum_propagator::{
    apply_multiplier, evolve, GridState, MultiplierSpec, PropagatorConfig,
};
use crate::symbols::{PotentialSpec, SymbolModel};

/// Largest fraction of the norm the absorbing layer may remove before the
/// localization is rejected.
const NORM_LOSS_LIMIT: f64 = 1e-4;

/// `(x, xi) -> (x + sign sigma grad V(sign xi_hat), xi)`, the time-`sign sigma`
/// Hamilton flow of the long-range potential read as a function of `xi`.
#[derive(Debug, Clone)]
pub struct ShiftMap<'a> {
    pub sign: f64,
    pub sigma: f64,
    pub potential: &'a PotentialSpec,
}

impl<'a> ShiftMap<'a> {
    pub fn new(sign: f64, sigma: f64, potential: &'a PotentialSpec) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::Configuration(format!(
                "shift sign must be +1 or -1, got {sign}"
            )));
        }
        if !sigma.is_finite() {
            return Err(Error::Domain(format!(
                "shift parameter must be finite, got {sigma}"
            )));
        }
        Ok(Self {
            sign,
            sigma,
            potential,
        })
    }

    /// `grad V(sign xi_hat)`. Homogeneous potentials use their exact
    /// homogeneous extension on the unit sphere.
    pub fn gradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::Domain("shift map is undefined at xi = 0".into()));
        }
        if xi.len() != self.potential.dim() {
            return Err(Error::Domain(format!(
                "covector has {} components, potential lives in {} dimensions",
                xi.len(),
                self.potential.dim()
            )));
        }
        let unit: Vec<f64> = xi.iter().map(|v| self.sign * v / n).collect();
        let d = unit.len();
        let mut g = vec![0.0; d];
        match self.potential.homogeneous_part() {
            Some(h) => {
                let mut hess = vec![0.0; d * d];
                h.homogeneous_part(&unit, &mut g, &mut hess);
            }
            None => self.potential.long_range().gradient(&unit, &mut g),
        }
        Ok(g)
    }
}

pub fn shift_map_apply(map: &ShiftMap<'_>, point: &PhasePoint) -> Result<PhasePoint> {
    let g = map.gradient(&point.xi)?;
    let x = point
        .x
        .iter()
        .zip(&g)
        .map(|(x, g)| x + map.sign * map.sigma * g)
        .collect();
    Ok(PhasePoint {
        x,
        xi: point.xi.clone(),
    })
}

/// Grid search for the phase-space point where a state concentrates at one
/// probe scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSearch {
    pub lambda: f64,
    /// Allowed position error in lattice cells.
    pub position_cells: f64,
    /// Allowed covector error in cells of `2 pi / (L lambda)`.
    pub covector_cells: f64,
    /// Extra half-width of the position window beyond the predicted shift.
    pub position_margin: f64,
    /// Extra half-width of the physical-frequency window beyond the largest
    /// momentum kick.
    pub frequency_margin: f64,
}

impl Default for ProbeSearch {
    fn default() -> Self {
        Self {
            lambda: 256.0,
            position_cells: 3.0,
            covector_cells: 1.0,
            position_margin: 1.0,
            frequency_margin: 1.0,
        }
    }
}

impl ProbeSearch {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("position_cells", self.position_cells),
            ("covector_cells", self.covector_cells),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Configuration(format!(
                    "probe search {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.position_margin >= 0.0) || !(self.frequency_margin >= 0.0) {
            return Err(Error::Configuration(
                "probe search margins must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Best probe centre in a window and its coefficient magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub center: PhasePoint,
    pub magnitude: f64,
}

fn offsets(radius: f64, step: f64) -> Vec<f64> {
    let m = (radius / step).ceil() as i64;
    (-m..=m).map(|j| j as f64 * step).collect()
}

/// Maximizes `|<probe, u>|` over lattice positions within `x_radius` of
/// `start.x` and covectors within `xi_radius` of `start.xi`, stepping by one
/// lattice cell and one frequency cell divided by `lambda`. One-axis
/// lattices are searched exhaustively; two-axis lattices by coordinate
/// sweeps until the centre stops moving.
pub fn locate_concentration(
    u: &GridState,
    start: &PhasePoint,
    lambda: f64,
    x_radius: f64,
    xi_radius: f64,
) -> Result<Concentration> {
    let d = u.dim();
    if start.dim() != d {
        return Err(Error::Lattice(format!(
            "start point has {} axes, lattice {d}",
            start.dim()
        )));
    }
    // Snap positions to the lattice.
    let x0: Vec<f64> = (0..d)
        .map(|a| {
            let h = u.spacing(a);
            let l = u.extent()[a];
            let j = ((wrap(start.x[a], l) + 0.5 * l) / h).round();
            -0.5 * l + j * h
        })
        .collect();
    let x_steps: Vec<Vec<f64>> = (0..d).map(|a| offsets(x_radius, u.spacing(a))).collect();
    let xi_steps: Vec<Vec<f64>> = (0..d)
        .map(|a| offsets(xi_radius, u.frequency_step(a) / lambda))
        .collect();
    let eval = |x: &[f64], xi: &[f64]| -> Result<f64> {
        let p = CoherentProbe::new(PhasePoint::new(x.to_vec(), xi.to_vec())?, lambda)?;
        p.check_band(u)?;
        Ok(p.coefficient_unchecked(u).norm())
    };
    let mut best_x = x0.clone();
    let mut best_xi = start.xi.clone();
    if d == 1 {
        let (xs, ks) = (x0[0], start.xi[0]);
        let cands: Vec<(f64, f64)> = x_steps[0]
            .iter()
            .flat_map(|dx| xi_steps[0].iter().map(move |dk| (xs + dx, ks + dk)))
            .filter(|(_, k)| *k != 0.0)
            .collect();
        let vals = cands
            .par_iter()
            .map(|(x, k)| eval(&[*x], &[*k]))
            .collect::<Result<Vec<f64>>>()?;
        let (i, m) = argmax(&vals);
        return Ok(Concentration {
            center: PhasePoint::new(vec![cands[i].0], vec![cands[i].1])?,
            magnitude: m,
        });
    }
    let mut best = eval(&best_x, &best_xi)?;
    for _ in 0..20 {
        let before = (best_x.clone(), best_xi.clone());
        for coord in 0..2 * d {
            let (axis, is_x) = (coord % d, coord < d);
            let steps = if is_x {
                &x_steps[axis]
            } else {
                &xi_steps[axis]
            };
            let base = if is_x { x0[axis] } else { start.xi[axis] };
            let vals = steps
                .par_iter()
                .map(|s| {
                    let mut x = best_x.clone();
                    let mut xi = best_xi.clone();
                    if is_x {
                        x[axis] = base + s;
                    } else {
                        xi[axis] = base + s;
                    }
                    if xi.iter().all(|v| *v == 0.0) {
                        return Ok(0.0);
                    }
                    eval(&x, &xi)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (i, m) = argmax(&vals);
            if m > best {
                best = m;
                if is_x {
                    best_x[axis] = base + steps[i];
                } else {
                    best_xi[axis] = base + steps[i];
                }
            }
        }
        if before == (best_x.clone(), best_xi.clone()) {
            break;
        }
    }
    Ok(Concentration {
        center: PhasePoint::new(best_x, best_xi)?,
        magnitude: best,
    })
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bm), (i, m)| {
            if *m > bm {
                (i, *m)
            } else {
                (bi, bm)
            }
        })
}

/// Outcome of moving a coherent state by the Dollard-free interaction
/// picture `e^(itH_0) e^(-itH)` and locating it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub source: PhasePoint,
    /// Image of the source under the shift map with `sigma = -t^2/2`.
    pub predicted: PhasePoint,
    /// Image under the opposite displacement.
    pub mirror: PhasePoint,
    pub detected: PhasePoint,
    pub peak: f64,
    pub cell: f64,
    pub frequency_cell: f64,
    /// Largest position error against `predicted`, in lattice cells.
    pub displacement_cells: f64,
    /// Largest covector error against `predicted`, in frequency cells.
    pub covector_cells: f64,
    /// Largest position error against `mirror`, in lattice cells.
    pub mirror_cells: f64,
    pub pass: bool,
}

impl ShiftReport {
    /// Position error against the prediction in length units.
    pub fn position_error(&self) -> f64 {
        self.displacement_cells * self.cell
    }
}

/// Evolves a coherent state centred at `source` (scaled covector, physical
/// frequency `lambda xi`) under `e^(itH_0) e^(-itH)`, locates the result and
/// compares it with the shift-map prediction.
pub fn verify_shift_law(
    u0: &GridState,
    source: &PhasePoint,
    model: &SymbolModel,
    t: f64,
    cfg: &PropagatorConfig,
    search: &ProbeSearch,
) -> Result<ShiftReport> {
    search.validate()?;
    let potential = model.potential();
    let beta = potential.homogeneous_part().map(|h| h.degree());
    if !(beta == Some(1.0) || potential.long_range().is_zero()) {
        return Err(Error::Precondition(
            "the shift law needs a degree-one homogeneous long-range potential".into(),
        ));
    }
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!(
            "shift law needs a nonzero finite time, got {t}"
        )));
    }
    let edge = u0.edge_mass_fraction(0.1);
    if edge > 1e-12 {
        return Err(Error::Boundary(format!(
            "{edge:.3e} of the initial mass lies near the lattice edge"
        )));
    }
    let sign = t.signum();
    let sigma = -0.5 * t * t;
    let predicted = shift_map_apply(&ShiftMap::new(sign, sigma, potential)?, source)?;
    let mirror = shift_map_apply(&ShiftMap::new(sign, -sigma, potential)?, source)?;
    let shift = predicted
        .x
        .iter()
        .zip(&source.x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let grad = ShiftMap::new(sign, 1.0, potential)?
        .gradient(&source.xi)?
        .iter()
        .map(|g| g.abs())
        .fold(0.0, f64::max);

    let evolved = evolve(u0, model, t, cfg)?;
    let loss = 1.0 - evolved.norm() / u0.norm();
    if loss > NORM_LOSS_LIMIT {
        return Err(Error::Boundary(format!(
            "absorbing layer removed {loss:.3e} of the norm"
        )));
    }
    let v = apply_multiplier(&evolved, &MultiplierSpec::free(&evolved, t)?)?;
    let edge = v.edge_mass_fraction(0.1);
    if edge > 1e-6 {
        return Err(Error::Boundary(format!(
            "{edge:.3e} of the mass reached the lattice edge"
        )));
    }
    let lambda = search.lambda;
    let x_radius = shift + search.position_margin;
    let xi_radius = (t.abs() * grad + search.frequency_margin) / lambda;
    let found = locate_concentration(&v, source, lambda, x_radius, xi_radius)?;

    let cell = (0..v.dim()).map(|a| v.spacing(a)).fold(0.0, f64::max);
    let frequency_cell = (0..v.dim())
        .map(|a| v.frequency_step(a))
        .fold(0.0, f64::max)
        / lambda;
    let err = |a: &[f64], b: &[f64], unit: f64| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs() / unit)
            .fold(0.0, f64::max)
    };
    let displacement_cells = err(&found.center.x, &predicted.x, cell);
    let covector_cells = err(&found.center.xi, &predicted.xi, frequency_cell);
    let mirror_cells = err(&found.center.x, &mirror.x, cell);
    let pass =
        displacement_cells <= search.position_cells && covector_cells <= search.covector_cells;
    Ok(ShiftReport {
        source: source.clone(),
        predicted,
        mirror,
        detected: found.center,
        peak: found.magnitude,
        cell,
        frequency_cell,
        displacement_cells,
        covector_cells,
        mirror_cells,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dollard_phase::PhaseFunction;
    use crate::symbols::{AngularProfile, FlatMetric, HomogeneousPotential};

    fn abs_potential(d: usize) -> PotentialSpec {
        PotentialSpec::homogeneous(
            HomogeneousPotential::new(d, 1.0, 1.0, AngularProfile::Constant { value: 1.0 })
                .unwrap(),
        )
    }

    fn pp(x: f64, xi: f64) -> PhasePoint {
        PhasePoint::new(vec![x], vec![xi]).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let v = abs_potential(2);
        let p = PhasePoint::new(vec![0.3, -2.0], vec![1.5, 0.2]).unwrap();
        for sign in [1.0, -1.0] {
            let q = shift_map_apply(&ShiftMap::new(sign, 0.0, &v).unwrap(), &p).unwrap();
            assert_eq!(q, p);
        }
    }

    #[test]
    fn absolute_value_moves_by_sigma() {
        let v = abs_potential(1);
        let q = shift_map_apply(&ShiftMap::new(1.0, 0.7, &v).unwrap(), &pp(2.0, 3.0)).unwrap();
        assert_eq!(q, pp(2.7, 3.0));
        let q = shift_map_apply(&ShiftMap::new(-1.0, 0.7, &v).unwrap(), &pp(2.0, 3.0)).unwrap();
        // sign -: x - sigma * V'(-1) = x + sigma.
        assert_eq!(q, pp(2.7, 3.0));
    }

    #[test]
    fn opposite_parameters_cancel() {
        let v = PotentialSpec::homogeneous(
            HomogeneousPotential::new(
                2,
                1.25,
                1.0,
                AngularProfile::Trig {
                    cos: vec![1.0, 0.3],
                    sin: vec![0.0, 0.2],
                },
            )
            .unwrap(),
        );
        let p = PhasePoint::new(vec![0.3, -2.0], vec![1.5, 0.2]).unwrap();
        for sign in [1.0, -1.0] {
            let a = shift_map_apply(&ShiftMap::new(sign, -0.9, &v).unwrap(), &p).unwrap();
            let b = shift_map_apply(&ShiftMap::new(sign, 0.9, &v).unwrap(), &a).unwrap();
            assert_eq!(a.xi, p.xi);
            assert!(b.distance(&p) < 1e-14);
        }
    }

    #[test]
    fn zero_covector_rejected() {
        let v = abs_potential(1);
        assert!(matches!(
            shift_map_apply(&ShiftMap::new(1.0, 0.5, &v).unwrap(), &pp(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
        assert!(ShiftMap::new(0.5, 0.5, &v).is_err());
    }

    fn packet(n: usize, l: f64, center: &PhasePoint, lambda: f64) -> GridState {
        CoherentProbe::new(center.clone(), lambda)
            .unwrap()
            .packet(&GridState::zeros(&[n], &[l]).unwrap())
            .unwrap()
    }

    #[test]
    fn locate_finds_packet() {
        let c = pp(1.37, 0.42);
        let u = packet(2048, 40.0, &c, 64.0);
        let found = locate_concentration(&u, &pp(1.0, 0.4), 64.0, 1.0, 0.05).unwrap();
        assert!((found.center.x[0] - 1.37).abs() <= 40.0 / 2048.0);
        assert!((found.center.xi[0] - 0.42).abs() <= 2.0 * std::f64::consts::PI / 40.0 / 64.0);
        assert!((found.magnitude - 1.0).abs() < 1e-3);
    }

    #[test]
    fn locate_two_axes() {
        let c = PhasePoint::new(vec![0.5, -0.8], vec![0.3, 0.25]).unwrap();
        let g = GridState::zeros(&[256, 256], &[16.0, 16.0]).unwrap();
        let u = CoherentProbe::new(c.clone(), 16.0)
            .unwrap()
            .packet(&g)
            .unwrap();
        let start = PhasePoint::new(vec![0.0, 0.0], vec![0.35, 0.2]).unwrap();
        let found = locate_concentration(&u, &start, 16.0, 1.5, 0.1).unwrap();
        for a in 0..2 {
            assert!(
                (found.center.x[a] - c.x[a]).abs() <= 1.5 * g.spacing(a),
                "{found:?}"
            );
            assert!(
                (found.center.xi[a] - c.xi[a]).abs() <= g.frequency_step(a) / 16.0,
                "{found:?}"
            );
        }
    }

    fn small_cfg() -> PropagatorConfig {
        PropagatorConfig {
            dt: 1e-3,
            ..PropagatorConfig::default()
        }
    }

    #[test]
    fn free_evolution_stays_put() {
        let m = SymbolModel::free(1);
        let src = pp(2.0, 0.25);
        let u = packet(4096, 160.0, &src, 64.0);
        let search = ProbeSearch {
            lambda: 64.0,
            ..ProbeSearch::default()
        };
        let r = verify_shift_law(&u, &src, &m, 1.0, &small_cfg(), &search).unwrap();
        assert_eq!(r.predicted, src);
        assert!(r.pass, "{r:?}");
        assert!(r.displacement_cells <= 1.0 && r.covector_cells <= 1.0);
    }

    #[test]
    fn rejects_wrong_degree() {
        let v = HomogeneousPotential::new(1, 1.25, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        let m =
            SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap();
        let src = pp(2.0, 0.25);
        let u = packet(1024, 40.0, &src, 64.0);
        assert!(matches!(
            verify_shift_law(&u, &src, &m, 1.0, &small_cfg(), &ProbeSearch::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn edge_mass_rejected() {
        let m = SymbolModel::free(1);
        let src = pp(19.0, 0.25);
        let u = packet(1024, 40.0, &src, 64.0);
        assert!(matches!(
            verify_shift_law(&u, &src, &m, 1.0, &small_cfg(), &ProbeSearch::default()),
            Err(Error::Boundary(_))
        ));
    }

    /// With the flat metric the classical wave maps are the identity, so the
    /// Dollard-modified evolution leaves the probe localization in place up
    /// to the bounded momentum kick.
    #[test]
    fn dollard_modified_evolution_keeps_position() {
        let m = Arc::new(SymbolModel::new(Arc::new(FlatMetric::new(1)), abs_potential(1)).unwrap());
        let pf = PhaseFunction::long_range(m.clone(), 1e-12).unwrap();
        let (lambda, t) = (64.0, 1.0);
        let src = pp(4.0, 0.25);
        let u = packet(4096, 160.0, &src, lambda);
        let evolved = evolve(&u, &m, t, &small_cfg()).unwrap();
        let v = apply_multiplier(
            &evolved,
            &MultiplierSpec::dollard(&evolved, &pf, t).unwrap(),
        )
        .unwrap();
        let found = locate_concentration(&v, &src, lambda, 1.5, 2.0 / lambda).unwrap();
        assert!(
            (found.center.x[0] - src.x[0]).abs() <= 3.0 * v.spacing(0),
            "{found:?}"
        );
        // Physical momentum drops by t; the probe resolves frequencies to
        // about sqrt(2 lambda), so allow a small fraction of that.
        let momentum = found.center.xi[0] * lambda;
        assert!(
            (momentum - (src.xi[0] * lambda - t)).abs() <= 0.25,
            "{found:?}"
        );
    }
}
