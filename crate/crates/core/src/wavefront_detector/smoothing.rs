use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probe::{check_ladder, probe_decay, Verdict, VerdictThresholds, WFSample};
use crate::classical_flow::PhasePoint;
use crate::dollard_phase::leading_coefficient;
use crate::error::{Error, Result};
use crate::quantum_propagator::{
    apply_chain, apply_multiplier, smoothing_norms, GridState, MultiplierSpec,
};
use crate::symbols::{PotentialSpec, SymbolModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSettings {
    pub ladder: Vec<f64>,
    pub panel: Vec<PhasePoint>,
    pub sigmas: Vec<f64>,
    pub weights: Vec<u32>,
    /// Translation vectors applied to the norm state.
    pub translates: Vec<Vec<f64>>,
    pub thresholds: VerdictThresholds,
    /// Largest allowed max/min spread of the norm ratios for one weight.
    pub max_spread: f64,
}

impl SmoothingSettings {
    /// 9-point panel `x in {-2, 0, 2}`, `xi in {-1.2, 1, 1.2}`, ladder
    /// `4 .. 64`, ten translates in `[-2.5, 2.5]` and the sigma ladder
    /// `0.1 .. 1/2.25` for a one-axis lattice.
    pub fn one_dimensional(beta: f64) -> Self {
        let panel = [-2.0, 0.0, 2.0]
            .iter()
            .flat_map(|&x| {
                [-1.2, 1.0, 1.2].map(move |xi| PhasePoint {
                    x: vec![x],
                    xi: vec![xi],
                })
            })
            .collect();
        let top = 1.0 / (1.0 + beta);
        let sigmas = (0..5).map(|k| 0.1 + (top - 0.1) * k as f64 / 4.0).collect();
        let translates = (0..10).map(|k| vec![-2.5 + 5.0 * k as f64 / 9.0]).collect();
        Self {
            ladder: super::geometric_ladder(4.0, 2.0, 5),
            panel,
            sigmas,
            weights: vec![1, 2],
            translates,
            thresholds: VerdictThresholds::default(),
            max_spread: 1e2,
        }
    }

    fn validate(&self) -> Result<()> {
        check_ladder(&self.ladder)?;
        self.thresholds.validate()?;
        if self.panel.is_empty()
            || self.sigmas.is_empty()
            || self.weights.is_empty()
            || self.translates.is_empty()
        {
            return Err(Error::Configuration(
                "smoothing panel, sigmas, weights and translates must be nonempty".into(),
            ));
        }
        if !(self.max_spread > 1.0) {
            return Err(Error::Configuration(format!(
                "ratio spread bound must exceed 1, got {}",
                self.max_spread
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub weight: u32,
    pub s: f64,
    pub sigma: f64,
    pub translate: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub t: f64,
    /// `sign(t) sigma(|t|)` used for the probe panel.
    pub sigma: f64,
    /// Panel of `e^(i sigma V(D)) e^(itH_0) u_0`.
    pub samples: Vec<WFSample>,
    /// Same panel with `sigma = 0`; no smoothing claim is attached.
    pub baseline: Vec<WFSample>,
    pub ratios: Vec<RatioEntry>,
    /// `max / min` of the ratios, one entry per weight.
    pub spreads: Vec<(u32, f64)>,
    pub all_regular: bool,
    pub bounded: bool,
    pub pass: bool,
}

fn smoothing_degree(potential: &PotentialSpec) -> Result<f64> {
    let h = potential.homogeneous_part().ok_or_else(|| {
        Error::Precondition("smoothing needs a homogeneous long-range potential".into())
    })?;
    let beta = h.degree();
    if !(beta > 1.0 && beta < 1.5) {
        return Err(Error::Precondition(format!(
            "smoothing needs degree in (1, 3/2), got {beta}"
        )));
    }
    if !potential.gradient_nonvanishing() {
        return Err(Error::Precondition(
            "smoothing needs a nonvanishing angular gradient".into(),
        ));
    }
    Ok(beta)
}

/// Probe panel of `e^(i sigma V(D)) e^(itH_0) u_0` on the lattice of
/// `probe_state`, and the weighted norm ratios of translates of
/// `norm_state` along the sigma ladder.
pub fn verify_smoothing(
    probe_state: &GridState,
    norm_state: &GridState,
    model: &SymbolModel,
    t: f64,
    settings: &SmoothingSettings,
) -> Result<SmoothingReport> {
    settings.validate()?;
    let potential = model.potential();
    let beta = smoothing_degree(potential)?;
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!(
            "smoothing needs a nonzero finite time, got {t}"
        )));
    }
    let sign = t.signum();
    let sigma = sign * leading_coefficient(beta, t.abs());

    let free = MultiplierSpec::free(probe_state, t)?;
    let lead = MultiplierSpec::long_range(probe_state, potential, sigma.abs(), sign)?;
    let moved = apply_chain(probe_state, &[&free, &lead])?;
    let baseline_state = apply_multiplier(probe_state, &free)?;
    let panel = |u: &GridState| -> Result<Vec<WFSample>> {
        settings
            .panel
            .par_iter()
            .map(|c| probe_decay(u, c, &settings.ladder, &settings.thresholds))
            .collect()
    };
    let samples = panel(&moved)?;
    let baseline = panel(&baseline_state)?;

    let mut jobs = Vec::new();
    for &w in &settings.weights {
        for &s in &settings.sigmas {
            for a in &settings.translates {
                jobs.push((w, s, a.clone()));
            }
        }
    }
    let ratios = jobs
        .into_par_iter()
        .map(|(weight, sig, a)| {
            let shifted =
                apply_multiplier(norm_state, &MultiplierSpec::translation(norm_state, &a)?)?;
            let n = smoothing_norms(&shifted, potential, sig, weight)?;
            Ok(RatioEntry {
                weight,
                s: n.s,
                sigma: sig,
                translate: a,
                ratio: n.ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spreads: Vec<(u32, f64)> = settings
        .weights
        .iter()
        .map(|&w| {
            let (lo, hi) = ratios
                .iter()
                .filter(|r| r.weight == w)
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
                    (lo.min(r.ratio), hi.max(r.ratio))
                });
            (w, hi / lo)
        })
        .collect();
    let all_regular = samples.iter().all(|s| s.verdict == Verdict::Regular);
    let bounded = spreads
        .iter()
        .all(|(_, s)| s.is_finite() && *s < settings.max_spread);
    Ok(SmoothingReport {
        t,
        sigma,
        samples,
        baseline,
        ratios,
        spreads,
        all_regular,
        bounded,
        pass: all_regular && bounded,
    })
}

/// Decay exponents at `center` of `u` and of `e^(i sigma V(D)) u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularControl {
    pub before: WFSample,
    pub after: WFSample,
}

impl SingularControl {
    pub fn lowered(&self) -> bool {
        self.after.exponent < self.before.exponent
    }
}

pub fn singular_control(
    u: &GridState,
    center: &PhasePoint,
    potential: &PotentialSpec,
    sigma: f64,
    ladder: &[f64],
    thresholds: &VerdictThresholds,
) -> Result<SingularControl> {
    smoothing_degree(potential)?;
    let before = probe_decay(u, center, ladder, thresholds)?;
    let moved = apply_multiplier(
        u,
        &MultiplierSpec::long_range(u, potential, sigma.abs(), sigma.signum())?,
    )?;
    let after = probe_decay(&moved, center, ladder, thresholds)?;
    Ok(SingularControl { before, after })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::symbols::{AngularProfile, FlatMetric, HomogeneousPotential};

    fn model(beta: f64) -> SymbolModel {
        let v = HomogeneousPotential::new(1, beta, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap()
    }

    fn gaussian(n: usize, l: f64, w: f64) -> GridState {
        let mut g = GridState::from_fn(&[n], &[l], |x| {
            Complex64::new((-x[0] * x[0] / (2.0 * w * w)).exp(), 0.0)
        })
        .unwrap();
        g.normalize().unwrap();
        g
    }

    #[test]
    fn settings_shape() {
        let s = SmoothingSettings::one_dimensional(1.25);
        assert_eq!(s.panel.len(), 9);
        assert_eq!(s.translates.len(), 10);
        assert!((s.sigmas[0] - 0.1).abs() < 1e-15);
        assert!((s.sigmas[4] - 1.0 / 2.25).abs() < 1e-15);
    }

    #[test]
    fn gaussian_panel_regular_and_bounded() {
        let m = model(1.25);
        let r = verify_smoothing(
            &gaussian(2048, 40.0, 1.0),
            &gaussian(512, 10.0, 0.35),
            &m,
            1.0,
            &SmoothingSettings::one_dimensional(1.25),
        )
        .unwrap();
        assert!(r.all_regular, "{:?}", r.samples);
        assert!(r.bounded, "{:?}", r.spreads);
        assert_eq!(r.baseline.len(), 9);
        assert_eq!(r.ratios.len(), 2 * 5 * 10);
        assert!(r
            .ratios
            .iter()
            .filter(|e| e.weight == 2)
            .all(|e| (e.s - 0.5).abs() < 1e-15));
    }

    #[test]
    fn preconditions() {
        let s = SmoothingSettings::one_dimensional(1.0);
        let u = gaussian(2048, 40.0, 1.0);
        let v = gaussian(512, 10.0, 0.35);
        assert!(matches!(
            verify_smoothing(&u, &v, &model(1.0), 1.0, &s),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            verify_smoothing(&u, &v, &SymbolModel::free(1), 1.0, &s),
            Err(Error::Precondition(_))
        ));
        assert!(verify_smoothing(&u, &v, &model(1.25), 0.0, &s).is_err());
    }

    #[test]
    fn step_loses_its_singularity() {
        let (n, l) = (8192, 40.0);
        let h = l / n as f64;
        let u = GridState::from_fn(&[n], &[l], |x| {
            let v = if x[0].abs() < 0.5 * h || (x[0] - 5.0).abs() < 0.5 * h {
                0.5
            } else if x[0] > 0.0 && x[0] < 5.0 {
                1.0
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .unwrap();
        let m = model(1.25);
        let c = PhasePoint::new(vec![0.0], vec![0.5]).unwrap();
        let ladder = super::super::geometric_ladder(16.0, 2.0, 5);
        let th = VerdictThresholds::default();
        let ctl = singular_control(&u, &c, m.potential(), 0.5, &ladder, &th).unwrap();
        assert_eq!(ctl.before.verdict, Verdict::Singular);
        assert!(ctl.lowered(), "{ctl:?}");
        let zero = singular_control(&u, &c, m.potential(), 0.0, &ladder, &th).unwrap();
        for (a, b) in zero.before.magnitudes.iter().zip(&zero.after.magnitudes) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
