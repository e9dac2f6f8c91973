use rayon::prelude::*;

use super::PhaseFunction;
use crate::error::{Error, Result};
use crate::fit::loglog_slope;

/// Sampling grid and pass thresholds for the phase-correction bounds.
#[derive(Debug, Clone)]
pub struct BoundSettings {
    pub times: Vec<f64>,
    pub xi_min: f64,
    pub xi_max: f64,
    pub points: usize,
    /// Frequency direction; normalized before use.
    pub direction: Vec<f64>,
    /// Highest derivative order checked (at most 2).
    pub max_order: usize,
    pub slope_slack: f64,
    /// Allowed growth of the normalized ratio from the lower to the upper
    /// half of the frequency grid.
    pub growth_limit: f64,
}

impl BoundSettings {
    pub fn new(dim: usize) -> Self {
        let mut direction = vec![0.0; dim];
        direction[0] = 1.0;
        Self {
            times: vec![-2.0, -0.5, 0.5, 2.0],
            xi_min: 1.0,
            xi_max: 1e3,
            points: 16,
            direction,
            max_order: 1,
            slope_slack: 0.1,
            growth_limit: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub t: f64,
    pub order: usize,
    pub xi: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Fitted log-log slope in `|xi|`; `None` if the correction vanishes.
    pub slope: Option<f64>,
    /// `2 - mu - order`.
    pub bound: f64,
    /// Largest value of `magnitude / (|t| <xi>^bound)`.
    pub max_ratio: f64,
    pub growth: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub mu: f64,
    pub entries: Vec<BoundEntry>,
    pub pass: bool,
}

fn jap(v: f64) -> f64 {
    (1.0 + v * v).sqrt()
}

/// Measures `|d_xi^alpha (Phi(t, xi) - t |xi|^2 / 2)|` for `|alpha| <= 2`
/// along a geometric frequency ray and checks its growth against
/// `|t| <xi>^(2 - mu - |alpha|)`.
pub fn verify_phase_bounds(pf: &PhaseFunction, settings: &BoundSettings) -> Result<BoundReport> {
    let d = pf.model().dim();
    if settings.direction.len() != d {
        return Err(Error::Configuration(format!(
            "bound direction has {} components, expected {d}",
            settings.direction.len()
        )));
    }
    if !(settings.xi_min > 0.0 && settings.xi_max > settings.xi_min) || settings.points < 3 {
        return Err(Error::Configuration(
            "bound frequency grid is degenerate".into(),
        ));
    }
    let dn = settings.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit: Vec<f64> = settings.direction.iter().map(|v| v / dn).collect();
    let n = settings.points;
    let (la, lb) = (settings.xi_min.ln(), settings.xi_max.ln());
    let radii: Vec<f64> = (0..n)
        .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
        .collect();
    let mu = pf.model().mu();
    let max_order = settings.max_order.min(2);

    let mut entries = Vec::new();
    for &t in &settings.times {
        // magnitudes[order][k]
        let rows: Vec<Result<Vec<f64>>> = radii
            .par_iter()
            .map(|&r| {
                let xi: Vec<f64> = unit.iter().map(|u| u * r).collect();
                let mut mags = Vec::with_capacity(max_order + 1);
                let value = pf.phase(t, &xi)? - 0.5 * t * r * r;
                mags.push(value.abs());
                if max_order >= 1 {
                    let (g, h) = if max_order >= 2 {
                        pf.gradient_and_hessian(t, &xi)?
                    } else {
                        (pf.phase_gradient(t, &xi)?, Vec::new())
                    };
                    let gn = g
                        .iter()
                        .zip(&xi)
                        .map(|(gk, xk)| (gk - t * xk).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    mags.push(gn);
                    if max_order >= 2 {
                        let mut worst = 0.0f64;
                        for i in 0..d {
                            for j in 0..d {
                                let delta = if i == j { t } else { 0.0 };
                                worst = worst.max((h[i * d + j] - delta).abs());
                            }
                        }
                        mags.push(worst);
                    }
                }
                Ok(mags)
            })
            .collect();
        let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
        for order in 0..=max_order {
            let bound = 2.0 - mu - order as f64;
            let magnitude: Vec<f64> = rows.iter().map(|m| m[order]).collect();
            let ratios: Vec<f64> = radii
                .iter()
                .zip(&magnitude)
                .map(|(r, m)| m / (t.abs() * jap(*r).powf(bound)))
                .collect();
            let (fit_r, fit_m): (Vec<f64>, Vec<f64>) = radii
                .iter()
                .zip(&magnitude)
                .zip(&ratios)
                .filter(|(_, q)| **q > 1e-11)
                .map(|((r, m), _)| (*r, *m))
                .unzip();
            let slope = loglog_slope(&fit_r, &fit_m, 0.0).map(|f| f.slope);
            let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
            let half = n / 2;
            // ratios at rounding level count as zero
            let significant = |q: f64| if q > 1e-11 { q } else { 0.0 };
            let lower = ratios[..half]
                .iter()
                .map(|q| significant(*q))
                .fold(0.0, f64::max);
            let upper = ratios[half..]
                .iter()
                .map(|q| significant(*q))
                .fold(0.0, f64::max);
            let growth = if lower > 0.0 {
                upper / lower
            } else if upper > 0.0 {
                f64::INFINITY
            } else {
                1.0
            };
            let pass = slope.is_none_or(|s| s <= bound + settings.slope_slack)
                && growth <= settings.growth_limit
                && max_ratio.is_finite();
            entries.push(BoundEntry {
                t,
                order,
                xi: radii.clone(),
                magnitude,
                slope,
                bound,
                max_ratio,
                growth,
                pass,
            });
        }
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(BoundReport { mu, entries, pass })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::symbols::{
        AngularProfile, FlatMetric, HomogeneousPotential, PotentialSpec, SymbolModel,
    };

    #[test]
    fn free_model_passes_trivially() {
        let pf = PhaseFunction::long_range(Arc::new(SymbolModel::free(1)), 1e-12).unwrap();
        let report = verify_phase_bounds(&pf, &BoundSettings::new(1)).unwrap();
        assert!(report.pass);
        assert!(report.entries.iter().all(|e| e.slope.is_none()));
    }

    #[test]
    fn linear_potential_slopes() {
        let v = HomogeneousPotential::new(1, 1.0, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        let m =
            SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap();
        let pf = PhaseFunction::long_range(Arc::new(m), 1e-12).unwrap();
        let mut s = BoundSettings::new(1);
        s.max_order = 2;
        let report = verify_phase_bounds(&pf, &s).unwrap();
        for e in &report.entries {
            if e.order == 0 {
                assert!(e.slope.unwrap() <= 1.1);
            }
        }
        assert!(report.pass, "{report:#?}");
    }
}
