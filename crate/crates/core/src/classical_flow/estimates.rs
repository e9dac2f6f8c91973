use super::asymptotes::{one_sided_asymptote, phase_for, AsymptoteOptions};
use super::{check_start, integrate_flow_with, FlowOptions, FlowVariant, PhasePoint};
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::symbols::SymbolModel;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateEntry {
    pub quantity: String,
    pub times: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Log-log slope in `t`; `None` if the quantity vanishes.
    pub slope: Option<f64>,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub mu: f64,
    pub mu_prime: f64,
    pub entries: Vec<EstimateEntry>,
    pub pass: bool,
}

const SAMPLES: usize = 24;
const SLACK: f64 = 0.15;

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|c| c * c).sum::<f64>().sqrt()
}

fn entry(
    quantity: &str,
    times: &[f64],
    magnitude: Vec<f64>,
    scale: f64,
    expected: f64,
) -> EstimateEntry {
    let floor = 1e-12 * scale;
    let slope = if magnitude.iter().all(|m| *m <= floor) {
        None
    } else {
        let (ts, ms): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&magnitude)
            .filter(|(_, m)| **m > floor)
            .map(|(t, m)| (*t, *m))
            .unzip();
        loglog_slope(&ts, &ms, 0.0).map(|f| f.slope)
    };
    EstimateEntry {
        quantity: quantity.into(),
        times: times.to_vec(),
        pass: slope.is_none_or(|s| s <= expected + SLACK),
        slope,
        expected,
        magnitude,
    }
}

/// Fits the decay of `|eta(t) - xi_+|`, `|y(t) - t eta(t)|` and
/// `|z(t) - x_+|` along the kinetic flow `(y, eta)` over `t` in
/// `[100, t_max]`, with `z = y - d_xi Psi(t, eta)`.
pub fn verify_flow_estimates(
    model: &SymbolModel,
    start: &PhasePoint,
    t_max: f64,
) -> Result<EstimateReport> {
    check_start(model, start)?;
    if !(t_max >= 1e3) {
        return Err(Error::Precondition(format!(
            "estimate window needs t_max >= 1e3, got {t_max}"
        )));
    }
    let opts = AsymptoteOptions {
        t_max,
        variant: FlowVariant::Kinetic,
        ..AsymptoteOptions::default()
    };
    let limit = one_sided_asymptote(model, start, 1.0, &opts)?;
    let phase = phase_for(model, FlowVariant::Kinetic, opts.phase_tol)?;
    let (la, lb) = (1e2f64.ln(), t_max.ln());
    let mut times: Vec<f64> = (0..SAMPLES)
        .map(|k| (la + (lb - la) * k as f64 / (SAMPLES - 1) as f64).exp())
        .collect();
    times[0] = 1e2;
    times[SAMPLES - 1] = t_max;
    let traj = integrate_flow_with(
        model,
        start,
        0.0,
        t_max,
        FlowVariant::Kinetic,
        &FlowOptions::new(opts.tol).with_checkpoints(times.clone()),
    )?;
    let mut eta_gap = Vec::with_capacity(SAMPLES);
    let mut drift = Vec::with_capacity(SAMPLES);
    let mut z_gap = Vec::with_capacity(SAMPLES);
    let mut scale = 1.0f64;
    for &t in &times {
        let p = traj.at(t).expect("checkpoint recorded");
        let g = phase.phase_gradient(t, &p.xi)?;
        scale = scale.max(p.x.iter().fold(0.0, |m, v| m.max(v.abs())));
        eta_gap.push(norm(p.xi.iter().zip(&limit.xi).map(|(a, b)| a - b)));
        drift.push(norm(p.x.iter().zip(&p.xi).map(|(x, e)| x - t * e)));
        z_gap.push(norm(
            p.x.iter()
                .zip(&g)
                .zip(&limit.x)
                .map(|((x, gk), l)| x - gk - l),
        ));
    }
    let mu = model.mu();
    let mu_prime = mu.min(model.nu() / 2.0);
    let entries = vec![
        entry("momentum", &times, eta_gap, 1.0, -mu),
        entry("position_drift", &times, drift, scale, 1.0 - mu),
        entry(
            "free_frame_position",
            &times,
            z_gap,
            scale,
            1.0 - 2.0 * mu_prime,
        ),
    ];
    let pass = entries.iter().all(|e| e.pass);
    Ok(EstimateReport {
        mu,
        mu_prime,
        entries,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical_flow::tests::bump;

    #[test]
    fn free_model_passes_trivially() {
        let m = SymbolModel::free(2);
        let p = PhasePoint::new(vec![0.5, 0.0], vec![1.0, 0.5]).unwrap();
        let r = verify_flow_estimates(&m, &p, 1e4).unwrap();
        assert!(r.pass, "{r:#?}");
        assert!(r.entries[0].slope.is_none());
        assert!(r.entries[2].slope.is_none());
    }

    #[test]
    fn bump_momentum_decay() {
        let m = bump(2);
        let p = PhasePoint::new(vec![0.4, -0.3], vec![0.9, 0.5]).unwrap();
        let r = verify_flow_estimates(&m, &p, 1e4).unwrap();
        let s = r.entries[0].slope.unwrap();
        assert!(s <= -0.6, "{s}");
        assert!(r.pass, "{r:#?}");
    }

    #[test]
    fn long_range_model_free_frame_decay() {
        use std::sync::Arc;

        use crate::symbols::{
            AngularProfile, ConformalDecayMetric, HomogeneousPotential, PotentialSpec, RadialPower,
        };
        let v = HomogeneousPotential::new(2, 1.25, 1.0, AngularProfile::Constant { value: 0.5 })
            .unwrap();
        let m = SymbolModel::new(
            Arc::new(ConformalDecayMetric::new(2, 0.2, 0.75)),
            PotentialSpec::homogeneous(v)
                .with_exponents(0.75, 1.6)
                .with_short_range(Arc::new(RadialPower::new(2, 0.3, 0.4))),
        )
        .unwrap();
        let p = PhasePoint::new(vec![0.5, -0.2], vec![1.2, 0.4]).unwrap();
        let r = verify_flow_estimates(&m, &p, 1e4).unwrap();
        assert!((r.mu_prime - 0.75).abs() < 1e-12);
        let z = &r.entries[2];
        assert!(z.slope.unwrap() <= -0.35, "{z:#?}");
        assert!(r.pass, "{r:#?}");
    }
}
