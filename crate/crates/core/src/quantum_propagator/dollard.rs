use super::evolve::{evolve, PropagatorConfig};
use super::grid::GridState;
use super::multiplier::{apply_chain, apply_multiplier, MultiplierSpec};
use crate::dollard_phase::{leading_coefficient, PhaseFunction, PhaseKind};
use crate::error::{Error, Result};
use crate::symbols::SymbolModel;

/// The two factorizations of the Dollard-modified evolution.
#[derive(Debug, Clone)]
pub struct DollardComparison {
    /// `e^(i Phi(t, D)) e^(-i t H) u_0`.
    pub v_dollard: GridState,
    /// `e^(i F(t, D)) e^(i sigma V(D)) e^(i t H_0) e^(-i t H) u_0`.
    pub v_split: GridState,
    /// Relative L2 distance of the two.
    pub discrepancy: f64,
    pub sigma: f64,
}

/// Evolves `u_0` once and applies both multiplier chains to the result.
pub fn dollard_conjugate(
    u0: &GridState,
    model: &SymbolModel,
    phase: &PhaseFunction,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<DollardComparison> {
    if phase.kind() != PhaseKind::LongRange {
        return Err(Error::Configuration(
            "Dollard conjugation needs the long-range phase".into(),
        ));
    }
    let potential = phase.model().potential();
    let beta = match potential.homogeneous_part() {
        Some(h) => h.degree(),
        None if potential.long_range().is_zero() => 1.0,
        None => {
            return Err(Error::Precondition(
                "Dollard conjugation needs a homogeneous long-range potential".into(),
            ))
        }
    };
    let evolved = evolve(u0, model, t, cfg)?;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let sigma = leading_coefficient(beta, t.abs());
    let full = MultiplierSpec::dollard(&evolved, phase, t)?;
    let free = MultiplierSpec::free(&evolved, t)?;
    let lead = MultiplierSpec::long_range(&evolved, potential, sigma, sign)?;
    let corr = MultiplierSpec::correction(&evolved, phase, t)?;
    let v_dollard = apply_multiplier(&evolved, &full)?;
    let v_split = apply_chain(&evolved, &[&free, &lead, &corr])?;
    let scale = v_dollard.norm();
    let discrepancy = if scale > 0.0 {
        v_dollard.distance(&v_split)? / scale
    } else {
        0.0
    };
    Ok(DollardComparison {
        v_dollard,
        v_split,
        discrepancy,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::symbols::{AngularProfile, FlatMetric, HomogeneousPotential, PotentialSpec};

    fn state() -> GridState {
        let mut g = GridState::from_fn(&[512], &[40.0], |x| {
            Complex64::from_polar((-(x[0] - 2.0).powi(2) / 0.5).exp(), 3.0 * x[0])
        })
        .unwrap();
        g.normalize().unwrap();
        g
    }

    fn cfg() -> PropagatorConfig {
        PropagatorConfig {
            dt: 0.01,
            ..PropagatorConfig::default()
        }
    }

    #[test]
    fn free_model_returns_input() {
        let m = Arc::new(SymbolModel::free(1));
        let pf = PhaseFunction::long_range(m.clone(), 1e-12).unwrap();
        let u = state();
        let c = dollard_conjugate(&u, &m, &pf, 1.0, &cfg()).unwrap();
        assert!(c.v_dollard.distance(&u).unwrap() < 1e-10);
        assert!(c.v_split.distance(&u).unwrap() < 1e-10);
    }

    #[test]
    fn factorizations_agree() {
        for beta in [1.0, 1.25] {
            let v =
                HomogeneousPotential::new(1, beta, 1.0, AngularProfile::Constant { value: 1.0 })
                    .unwrap();
            let m = Arc::new(
                SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v))
                    .unwrap(),
            );
            let pf = PhaseFunction::long_range(m.clone(), 1e-12).unwrap();
            let c = dollard_conjugate(&state(), &m, &pf, 1.0, &cfg()).unwrap();
            assert!(c.discrepancy < 1e-9, "{}", c.discrepancy);
            assert!((c.sigma - 1.0 / (1.0 + beta)).abs() < 1e-15);
        }
    }
}
