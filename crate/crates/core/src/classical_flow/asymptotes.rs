use std::io::Write;
use std::sync::Arc;

use super::{check_start, integrate_flow_with, FlowOptions, FlowVariant, PhasePoint, Trajectory};
use crate::dollard_phase::PhaseFunction;
use crate::error::{Error, Result};
use crate::fit::{extrapolate_tail, linear_regression};
use crate::symbols::SymbolModel;

const NONTRAPPING_SAMPLES: usize = 32;

/// Escape-rate diagnostic `|x(t)| >= c |t| - C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nontrapping {
    pub c: f64,
    pub big_c: f64,
    /// Asymptotic speed the rate is compared against.
    pub speed: f64,
    pub pass: bool,
}

/// Fits the escape rate `c` on the outer half of the trajectory, sampled
/// from the dense output, and the smallest `C` making the linear lower
/// bound hold at every sample. Passes
/// iff `c >= 0.1 * speed`, where the speed is `|xi|` at the final sample.
pub fn check_nontrapping(traj: &Trajectory) -> Result<Nontrapping> {
    let span = traj.times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if span < 10.0 {
        return Err(Error::Precondition(format!(
            "nontrapping check needs |t| >= 10, trajectory spans {span}"
        )));
    }
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let sign = if traj.final_time() < traj.times[0] {
        -1.0
    } else {
        1.0
    };
    let mut samples: Vec<(f64, f64)> = (0..=NONTRAPPING_SAMPLES)
        .filter_map(|k| {
            let s = span * (0.5 + 0.5 * k as f64 / NONTRAPPING_SAMPLES as f64);
            traj.at(sign * s).map(|p| (s, norm(&p.x)))
        })
        .collect();
    let (ts, rs): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    let c = linear_regression(&ts, &rs).map_or(0.0, |f| f.slope);
    samples.extend(
        traj.times
            .iter()
            .zip(&traj.points)
            .map(|(t, p)| (t.abs(), norm(&p.x))),
    );
    let big_c = samples
        .iter()
        .map(|(t, r)| c * t - r)
        .fold(0.0f64, f64::max);
    let speed = traj.end().xi_norm();
    Ok(Nontrapping {
        c,
        big_c,
        speed,
        pass: c > 0.0 && c >= 0.1 * speed,
    })
}

#[derive(Debug, Clone)]
pub struct AsymptoteOptions {
    pub t_max: f64,
    /// First ladder rung; defaults to `8 / speed`.
    pub t0: Option<f64>,
    /// Explicit positive ladder overriding `t0`/`t_max`.
    pub ladder: Option<Vec<f64>>,
    /// Integrator tolerance.
    pub tol: f64,
    /// Quadrature tolerance of the phase gradient.
    pub phase_tol: f64,
    /// `Kinetic` subtracts `d_xi Psi`; other variants subtract `d_xi Phi`.
    pub variant: FlowVariant,
    pub max_levels: usize,
    /// Fixes the number of extrapolation levels instead of choosing the one
    /// with the smallest error estimate.
    pub levels: Option<usize>,
    pub require_nontrapping: bool,
}

impl Default for AsymptoteOptions {
    fn default() -> Self {
        Self {
            t_max: 1e4,
            t0: None,
            ladder: None,
            tol: 1e-11,
            phase_tol: 1e-12,
            variant: FlowVariant::Kinetic,
            max_levels: 3,
            levels: None,
            require_nontrapping: true,
        }
    }
}

/// Limit in one time direction.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedLimit {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// Fitted exponent of `|z(t) - x_lim| ~ C t^exponent`.
    pub x_exponent: f64,
    pub xi_exponent: f64,
    pub x_error: f64,
    pub xi_error: f64,
    pub x_levels: usize,
    pub xi_levels: usize,
    /// Ladder magnitudes `|t_k|`.
    pub ladder: Vec<f64>,
    /// `z(t_k)` and `xi(t_k)`.
    pub z_samples: Vec<Vec<f64>>,
    pub xi_samples: Vec<Vec<f64>>,
    pub nontrapping: Option<Nontrapping>,
}

impl OneSidedLimit {
    pub fn point(&self) -> PhasePoint {
        PhasePoint {
            x: self.x.clone(),
            xi: self.xi.clone(),
        }
    }

    pub fn error(&self) -> f64 {
        self.x_error.max(self.xi_error)
    }
}

/// Asymptotes `(x_+, xi_+)` and `(x_-, xi_-)` of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringData {
    pub plus: OneSidedLimit,
    pub minus: OneSidedLimit,
    pub horizon: f64,
    pub error: f64,
}

impl ScatteringData {
    pub fn side(&self, sign: f64) -> &OneSidedLimit {
        if sign >= 0.0 {
            &self.plus
        } else {
            &self.minus
        }
    }

    /// Flat `key = value` record.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        for (tag, side) in [("plus", &self.plus), ("minus", &self.minus)] {
            for (k, v) in side.x.iter().enumerate() {
                kv.push((format!("x_{tag}_{}", k + 1), format!("{v:.16e}")));
            }
            for (k, v) in side.xi.iter().enumerate() {
                kv.push((format!("xi_{tag}_{}", k + 1), format!("{v:.16e}")));
            }
            kv.push((
                format!("x_exponent_{tag}"),
                format!("{:.16e}", side.x_exponent),
            ));
            kv.push((
                format!("xi_exponent_{tag}"),
                format!("{:.16e}", side.xi_exponent),
            ));
            kv.push((format!("error_{tag}"), format!("{:.16e}", side.error())));
        }
        kv.push(("horizon".into(), format!("{:.16e}", self.horizon)));
        kv.push(("error".into(), format!("{:.16e}", self.error)));
        kv
    }

    pub fn write_key_values<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in self.key_values() {
            writeln!(out, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub(crate) fn phase_for(
    model: &SymbolModel,
    variant: FlowVariant,
    tol: f64,
) -> Result<PhaseFunction> {
    let shared = Arc::new(model.clone());
    match variant {
        FlowVariant::Kinetic => PhaseFunction::kinetic(shared, tol),
        FlowVariant::Scaled(l) => PhaseFunction::scaled(shared, l, tol),
        FlowVariant::Full | FlowVariant::LongRange => PhaseFunction::long_range(shared, tol),
    }
}

pub(crate) fn default_ladder(
    model: &SymbolModel,
    start: &PhasePoint,
    opts: &AsymptoteOptions,
) -> Result<Vec<f64>> {
    if let Some(l) = &opts.ladder {
        return Ok(l.clone());
    }
    let speed = match opts.variant {
        FlowVariant::Kinetic => (2.0 * model.kinetic_unchecked(&start.x, &start.xi)).sqrt(),
        _ => start.xi_norm(),
    };
    let t0 = opts.t0.unwrap_or(8.0 / speed);
    let mut ladder = Vec::new();
    let mut t = t0;
    while t <= opts.t_max * (1.0 + 1e-12) {
        ladder.push(t);
        t *= 2.0;
    }
    if ladder.len() < 3 {
        return Err(Error::Precondition(format!(
            "time ladder from {t0} to {} has fewer than three rungs",
            opts.t_max
        )));
    }
    Ok(ladder)
}

fn one_side(
    model: &SymbolModel,
    phase: &PhaseFunction,
    start: &PhasePoint,
    ladder: &[f64],
    sign: f64,
    opts: &AsymptoteOptions,
) -> Result<OneSidedLimit> {
    let stops: Vec<f64> = ladder.iter().map(|t| sign * t).collect();
    let t_end = *stops.last().expect("ladder is non-empty");
    let traj = integrate_flow_with(
        model,
        start,
        0.0,
        t_end,
        opts.variant,
        &FlowOptions::new(opts.tol).with_checkpoints(stops.clone()),
    )?;
    let nontrapping = if opts.require_nontrapping {
        let n = check_nontrapping(&traj)?;
        if !n.pass {
            return Err(Error::Precondition(format!(
                "trajectory does not escape (c = {:.3e}, speed {:.3e})",
                n.c, n.speed
            )));
        }
        Some(n)
    } else {
        None
    };
    let mut z_samples = Vec::with_capacity(stops.len());
    let mut xi_samples = Vec::with_capacity(stops.len());
    let mut scale = 1.0f64;
    for &t in &stops {
        let p = traj.at(t).expect("checkpoint recorded");
        let g = phase.phase_gradient(t, &p.xi)?;
        scale = scale.max(p.x.iter().chain(&g).fold(0.0, |m, v| m.max(v.abs())));
        z_samples.push(
            p.x.iter()
                .zip(&g)
                .map(|(x, gk)| x - gk)
                .collect::<Vec<f64>>(),
        );
        xi_samples.push(p.xi.clone());
    }
    let floor = 64.0 * f64::EPSILON * scale;
    let levels = opts.levels.unwrap_or(opts.max_levels);
    let fit_z = fit_fixed(&z_samples, ladder, floor, levels, opts.levels.is_some())?;
    let fit_xi = fit_fixed(&xi_samples, ladder, floor, levels, opts.levels.is_some())?;
    Ok(OneSidedLimit {
        x: fit_z.limit,
        xi: fit_xi.limit,
        x_exponent: fit_z.exponent,
        xi_exponent: fit_xi.exponent,
        x_error: fit_z.error,
        xi_error: fit_xi.error,
        x_levels: fit_z.levels,
        xi_levels: fit_xi.levels,
        ladder: ladder.to_vec(),
        z_samples,
        xi_samples,
        nontrapping,
    })
}

struct SideFit {
    limit: Vec<f64>,
    exponent: f64,
    error: f64,
    levels: usize,
}

/// Tail fit, optionally with a fixed number of levels.
fn fit_fixed(
    values: &[Vec<f64>],
    ladder: &[f64],
    floor: f64,
    levels: usize,
    exact: bool,
) -> Result<SideFit> {
    let fit = if exact {
        crate::fit::extrapolate_tail_exact(values, ladder, floor, levels)?
    } else {
        extrapolate_tail(values, ladder, floor, levels)?
    };
    Ok(SideFit {
        exponent: fit.exponent(),
        limit: fit.limit,
        error: fit.error,
        levels: fit.levels,
    })
}

/// Asymptote in the direction `sign` only.
pub(crate) fn one_sided_asymptote(
    model: &SymbolModel,
    start: &PhasePoint,
    sign: f64,
    opts: &AsymptoteOptions,
) -> Result<OneSidedLimit> {
    check_start(model, start)?;
    if start.xi_norm() < 1e-3 {
        return Err(Error::Precondition(format!(
            "|xi_0| = {:.3e} is below 1e-3; asymptotes need xi_0 != 0",
            start.xi_norm()
        )));
    }
    let ladder = default_ladder(model, start, opts)?;
    let phase = phase_for(model, opts.variant, opts.phase_tol)?;
    one_side(model, &phase, start, &ladder, sign, opts)
}

/// Scattering asymptotes of the trajectory through `start`:
/// `x_+- = lim (x(t) - d_xi Psi(t, xi(t)))`, `xi_+- = lim xi(t)`, extracted
/// from a geometric time ladder by tail extrapolation.
pub fn compute_asymptotes(
    model: &SymbolModel,
    start: &PhasePoint,
    opts: &AsymptoteOptions,
) -> Result<ScatteringData> {
    check_start(model, start)?;
    if start.xi_norm() < 1e-3 {
        return Err(Error::Precondition(format!(
            "|xi_0| = {:.3e} is below 1e-3; asymptotes need xi_0 != 0",
            start.xi_norm()
        )));
    }
    let ladder = default_ladder(model, start, opts)?;
    let phase = phase_for(model, opts.variant, opts.phase_tol)?;
    let (plus, minus) = rayon::join(
        || one_side(model, &phase, start, &ladder, 1.0, opts),
        || one_side(model, &phase, start, &ladder, -1.0, opts),
    );
    let (plus, minus) = (plus?, minus?);
    let error = plus.error().max(minus.error());
    Ok(ScatteringData {
        plus,
        minus,
        horizon: *ladder.last().expect("ladder is non-empty"),
        error,
    })
}
