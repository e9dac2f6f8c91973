use std::sync::Arc;

use dollard_lab::classical_flow::{integrate_flow_with, FlowOptions, FlowVariant, PhasePoint};
use dollard_lab::dollard_phase::PhaseFunction;
use dollard_lab::quantum_propagator::{apply_chain, apply_multiplier, GridState, MultiplierSpec};
use dollard_lab::symbols::{
    AngularProfile, ConformalDecayMetric, FlatMetric, HomogeneousPotential, PotentialSpec,
    SymbolModel,
};
use dollard_lab::wavefront_detector::{shift_map_apply, CoherentProbe, ShiftMap};
use num_complex::Complex64;
use proptest::prelude::*;

const N: usize = 1024;
const L: f64 = 40.0;

fn signal(seed: f64) -> GridState {
    GridState::from_fn(&[N], &[L], |x| {
        let y = x[0];
        let env = (-(y - seed).powi(2) / 4.0).exp() + 0.5 * (-(y + 1.0).powi(2)).exp();
        Complex64::from_polar(env, 1.3 * y + 0.2 * seed * y * y)
    })
    .unwrap()
}

fn sides(beta: f64) -> SymbolModel {
    let v = HomogeneousPotential::new(
        1,
        beta,
        1.0,
        AngularProfile::Sides {
            plus: 1.0,
            minus: 0.4,
        },
    )
    .unwrap();
    SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probe_coefficient_is_translation_covariant(seed in -2.0f64..2.0, cells in -40i32..40, x in -3.0f64..3.0, xi in -1.0f64..1.0) {
        let u = signal(seed);
        let a = cells as f64 * u.spacing(0);
        let moved = apply_multiplier(&u, &MultiplierSpec::translation(&u, &[a]).unwrap()).unwrap();
        let before = CoherentProbe::new(PhasePoint::new(vec![x], vec![xi]).unwrap(), 16.0).unwrap().coefficient(&u).unwrap();
        let after = CoherentProbe::new(PhasePoint::new(vec![x + a], vec![xi]).unwrap(), 16.0).unwrap().coefficient(&moved).unwrap();
        prop_assert!((before.norm() - after.norm()).abs() <= 1e-8, "{before} vs {after}");
    }

    #[test]
    fn probe_coefficient_is_modulation_covariant(seed in -2.0f64..2.0, steps in -30i32..30, x in -3.0f64..3.0, xi in -1.0f64..1.0) {
        let lambda = 16.0;
        let u = signal(seed);
        let eta = steps as f64 * u.frequency_step(0);
        let pos = u.positions(0);
        let data: Vec<Complex64> = u.data().iter().zip(&pos).map(|(v, y)| v * Complex64::from_polar(1.0, eta * y)).collect();
        let modulated = u.with_data(data).unwrap();
        let before = CoherentProbe::new(PhasePoint::new(vec![x], vec![xi]).unwrap(), lambda).unwrap().coefficient(&u).unwrap();
        let after = CoherentProbe::new(PhasePoint::new(vec![x], vec![xi + eta / lambda]).unwrap(), lambda)
            .unwrap()
            .coefficient(&modulated)
            .unwrap();
        prop_assert!((before.norm() - after.norm()).abs() <= 1e-8, "{before} vs {after}");
    }

    #[test]
    fn multipliers_preserve_norm(t in -5.0f64..5.0, sigma in -2.0f64..2.0, beta in 1.0f64..1.45) {
        let u = signal(0.3);
        let m = sides(beta);
        let pf = PhaseFunction::long_range(Arc::new(m.clone()), 1e-12).unwrap();
        let specs = [
            MultiplierSpec::free(&u, t).unwrap(),
            MultiplierSpec::dollard(&u, &pf, t).unwrap(),
            MultiplierSpec::long_range(&u, m.potential(), sigma, 1.0).unwrap(),
        ];
        let refs: Vec<&MultiplierSpec> = specs.iter().collect();
        let out = apply_chain(&u, &refs).unwrap();
        prop_assert!((out.norm() / u.norm() - 1.0).abs() <= 1e-12);
        let undone = apply_chain(&out, &[&specs[2].negated(), &specs[1].negated(), &specs[0].negated()]).unwrap();
        prop_assert!(undone.distance(&u).unwrap() <= 1e-12 * u.norm());
    }

    #[test]
    fn shift_map_is_invertible(x in -5.0f64..5.0, xi in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], sigma in -3.0f64..3.0, beta in 1.0f64..1.45) {
        let m = sides(beta);
        let p = PhasePoint::new(vec![x], vec![xi]).unwrap();
        let there = shift_map_apply(&ShiftMap::new(1.0, sigma, m.potential()).unwrap(), &p).unwrap();
        let back = shift_map_apply(&ShiftMap::new(1.0, -sigma, m.potential()).unwrap(), &there).unwrap();
        prop_assert!(back.distance(&p) <= 1e-12 * (1.0 + sigma.abs()));
        prop_assert_eq!(&there.xi, &p.xi);
    }

    #[test]
    fn flow_is_time_reversible(x0 in -1.0f64..1.0, x1 in -1.0f64..1.0, r in 0.5f64..1.5, angle in 0.0f64..std::f64::consts::TAU, t in 1.0f64..30.0) {
        let m = SymbolModel::new(Arc::new(ConformalDecayMetric::new(2, 0.2, 0.75)), PotentialSpec::zero(2, 0.75, 2.0)).unwrap();
        let p = PhasePoint::new(vec![x0, x1], vec![r * angle.cos(), r * angle.sin()]).unwrap();
        let opts = FlowOptions::new(1e-12);
        let there = integrate_flow_with(&m, &p, 0.0, t, FlowVariant::Full, &opts).unwrap().end().clone();
        let back = integrate_flow_with(&m, &there, t, 0.0, FlowVariant::Full, &opts).unwrap().end().clone();
        prop_assert!(back.distance(&p) <= 1e-7, "{}", back.distance(&p));
    }
}
