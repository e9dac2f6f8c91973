use rayon::prelude::*;

use super::asymptotes::ScatteringData;
use super::{check_start, integrate_flow_with, FlowOptions, FlowVariant, PhasePoint};
use crate::dollard_phase::{PhaseFunction, PhaseKind};
use crate::error::{Error, Result};
use crate::fit::extrapolate_tail;
use crate::symbols::SymbolModel;

/// Large-`lambda` limit of `x(t; x0, lambda xi0) - d_xi Phi(t, xi(t))` and
/// `xi(t; x0, lambda xi0) / lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct HighEnergyLimit {
    pub t: f64,
    pub lambdas: Vec<f64>,
    pub x_samples: Vec<Vec<f64>>,
    pub xi_samples: Vec<Vec<f64>>,
    pub limit: PhasePoint,
    /// Fitted exponents of the convergence in `lambda`; `-inf` when the
    /// samples are constant.
    pub x_exponent: f64,
    pub xi_exponent: f64,
    pub x_error: f64,
    pub xi_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighEnergyComparison {
    /// Componentwise `|limit - asymptote|`, positions first.
    pub discrepancy: Vec<f64>,
    pub max_discrepancy: f64,
    pub combined_error: f64,
    /// Discrepancy within five times the combined error estimate.
    pub consistent: bool,
}

impl HighEnergyLimit {
    pub fn error(&self) -> f64 {
        self.x_error.max(self.xi_error)
    }

    /// Compares with the asymptote on the side selected by `sign(t)`.
    pub fn compare(&self, data: &ScatteringData) -> HighEnergyComparison {
        let side = data.side(self.t);
        let discrepancy: Vec<f64> = self
            .limit
            .x
            .iter()
            .zip(&side.x)
            .chain(self.limit.xi.iter().zip(&side.xi))
            .map(|(a, b)| (a - b).abs())
            .collect();
        let max_discrepancy = discrepancy.iter().copied().fold(0.0, f64::max);
        let combined_error = self.error() + side.error();
        HighEnergyComparison {
            consistent: max_discrepancy <= 5.0 * combined_error,
            discrepancy,
            max_discrepancy,
            combined_error,
        }
    }

    /// Like [`compare`](Self::compare) but escalates an inconsistency.
    pub fn ensure_consistent(&self, data: &ScatteringData) -> Result<HighEnergyComparison> {
        let c = self.compare(data);
        if c.consistent {
            Ok(c)
        } else {
            Err(Error::Inconsistent {
                discrepancy: c.max_discrepancy,
                allowed: 5.0 * c.combined_error,
            })
        }
    }
}

fn check_ladder(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 3 {
        return Err(Error::Precondition(
            "lambda ladder needs at least three rungs".into(),
        ));
    }
    let q = lambdas[1] / lambdas[0];
    if !(q > 1.0)
        || lambdas
            .windows(2)
            .any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9)
    {
        return Err(Error::Precondition(
            "lambda ladder must be geometric and increasing".into(),
        ));
    }
    if lambdas[0] < 1.0 {
        return Err(Error::Precondition(
            "lambda ladder must start at >= 1".into(),
        ));
    }
    if *lambdas.last().expect("non-empty") < 256.0 {
        return Err(Error::Precondition(
            "lambda ladder must reach at least 2^8".into(),
        ));
    }
    Ok(())
}

/// Integrates the `lambda`-scaled flow to time `lambda t` for every rung and
/// extrapolates the free-frame position and momentum to `lambda -> inf`.
/// `phase` must be the long-range phase of `model`; the scaled phases are
/// derived from it.
pub fn high_energy_limit(
    model: &SymbolModel,
    phase: &PhaseFunction,
    start: &PhasePoint,
    t: f64,
    lambdas: &[f64],
    tol: f64,
) -> Result<HighEnergyLimit> {
    check_start(model, start)?;
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Precondition(format!(
            "high-energy limit needs finite t != 0, got {t}"
        )));
    }
    if phase.kind() != PhaseKind::LongRange {
        return Err(Error::Configuration(
            "high-energy limit needs the long-range phase".into(),
        ));
    }
    check_ladder(lambdas)?;
    let samples: Vec<Result<(Vec<f64>, Vec<f64>)>> = lambdas
        .par_iter()
        .map(|&lam| {
            let scaled = PhaseFunction::scaled(phase.shared_model(), lam, phase.tolerance())?;
            let tr = integrate_flow_with(
                model,
                start,
                0.0,
                lam * t,
                FlowVariant::Scaled(lam),
                &FlowOptions::new(tol),
            )?;
            let e = tr.end();
            let g = scaled.phase_gradient(lam * t, &e.xi)?;
            let x: Vec<f64> = e.x.iter().zip(&g).map(|(a, b)| a - b).collect();
            Ok((x, e.xi.clone()))
        })
        .collect();
    let samples: Vec<(Vec<f64>, Vec<f64>)> = samples.into_iter().collect::<Result<_>>()?;
    let (x_samples, xi_samples): (Vec<Vec<f64>>, Vec<Vec<f64>>) = samples.into_iter().unzip();
    let scale = x_samples
        .iter()
        .chain(&xi_samples)
        .flatten()
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let lam_max = *lambdas.last().expect("non-empty");
    let floor = 64.0 * f64::EPSILON * scale.max(lam_max * t.abs());
    let fx = extrapolate_tail(&x_samples, lambdas, floor, 3)?;
    let fxi = extrapolate_tail(&xi_samples, lambdas, floor, 3)?;
    Ok(HighEnergyLimit {
        t,
        lambdas: lambdas.to_vec(),
        limit: PhasePoint {
            x: fx.limit.clone(),
            xi: fxi.limit.clone(),
        },
        x_exponent: fx.exponent(),
        xi_exponent: fxi.exponent(),
        x_error: fx.error,
        xi_error: fxi.error,
        x_samples,
        xi_samples,
    })
}
