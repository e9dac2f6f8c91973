use super::PhaseFunction;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::symbols::{HomogeneousPotential, ScalarField};

/// `sigma(t) = t^(1+beta) / (1+beta)` for `t >= 0`.
pub fn leading_coefficient(beta: f64, t: f64) -> f64 {
    t.powf(1.0 + beta) / (1.0 + beta)
}

/// Splitting of `int_0^t V^(L)(s xi) ds` into the homogeneous leading term
/// and a `t`-independent remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousDecomposition {
    pub beta: f64,
    /// `sigma(|t|)`.
    pub sigma: f64,
    /// `sign(t) sigma(|t|) |xi|^beta v(sign(t) xi_hat)`.
    pub leading: f64,
    pub remainder: f64,
    /// `phase - t |xi|^2 / 2 - leading`.
    pub correction: f64,
}

/// `|xi|^-1 int_0^rho (V(r xi_hat) - r^beta v(xi_hat)) dr`, with `rho` the
/// radius beyond which the potential is exactly homogeneous.
fn remainder(h: &HomogeneousPotential, xi: &[f64], tol: f64) -> Result<f64> {
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit: Vec<f64> = xi.iter().map(|v| v / norm).collect();
    let vhat = h.profile_value(&unit);
    let beta = h.degree();
    let rho = h.exact_radius();
    let r0 = h.blend_radius();
    let mut x = vec![0.0; unit.len()];
    let (val, _) = integrate(
        |r| {
            for (xk, uk) in x.iter_mut().zip(&unit) {
                *xk = r * uk;
            }
            h.value(&x) - r.powf(beta) * vhat
        },
        0.0,
        rho,
        &[0.5 * r0, r0],
        &QuadOptions {
            abs_tol: tol,
            rel_tol: 1e-15,
            max_intervals: 4000,
        },
    )?;
    Ok(val / norm)
}

/// Closed-form leading term and remainder of the long-range phase for a
/// homogeneous potential, together with the correction `F` left over from
/// the quadrature phase.
///
/// Requires `|xi| |t| >= rho`, where `rho = max(1, r0)`.
pub fn homogeneous_decomposition(
    pf: &PhaseFunction,
    t: f64,
    xi: &[f64],
) -> Result<HomogeneousDecomposition> {
    let h = pf.model().potential().homogeneous_part().ok_or_else(|| {
        Error::Precondition("potential has no homogeneous long-range part".into())
    })?;
    if t == 0.0 {
        return Err(Error::Precondition("decomposition needs t != 0".into()));
    }
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = h.exact_radius();
    if norm * t.abs() < threshold {
        return Err(Error::OutsideClosedForm {
            product: norm * t.abs(),
            threshold,
        });
    }
    let beta = h.degree();
    let sign = t.signum();
    let sigma = leading_coefficient(beta, t.abs());
    let oriented: Vec<f64> = xi.iter().map(|v| sign * v).collect();
    let unit: Vec<f64> = oriented.iter().map(|v| v / norm).collect();
    let leading = sign * sigma * norm.powf(beta) * h.profile_value(&unit);
    let rem = sign * remainder(h, &oriented, 0.1 * pf.tolerance())?;
    let phase = pf.phase(t, xi)?;
    let correction = phase - 0.5 * t * norm * norm - leading;
    Ok(HomogeneousDecomposition {
        beta,
        sigma,
        leading,
        remainder: rem,
        correction,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::symbols::{AngularProfile, FlatMetric, PotentialSpec, SymbolModel};

    fn pf(beta: f64, profile: AngularProfile, dim: usize) -> PhaseFunction {
        let v = HomogeneousPotential::new(dim, beta, 1.0, profile).unwrap();
        let m = SymbolModel::new(
            Arc::new(FlatMetric::new(dim)),
            PotentialSpec::homogeneous(v),
        )
        .unwrap();
        PhaseFunction::long_range(Arc::new(m), 1e-13).unwrap()
    }

    #[test]
    fn sigma_values() {
        assert_eq!(leading_coefficient(1.0, 3.0), 4.5);
        assert!((leading_coefficient(1.25, 1.0) - 1.0 / 2.25).abs() < 1e-15);
    }

    #[test]
    fn unit_linear_potential_example() {
        let p = pf(1.0, AngularProfile::Constant { value: 1.0 }, 1);
        let dec = homogeneous_decomposition(&p, 1.0, &[2.0]).unwrap();
        assert!((dec.leading - 1.0).abs() < 1e-15);
        // V = A + B s^2 below 1/2 and the cutoff blend up to 1; independent
        // evaluation with a fine Simpson rule of (V(s) - s) / 2.
        let (a, b) = (0.25, 1.0);
        let chi = |s: f64| {
            let g = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
            if s <= 0.5 {
                0.0
            } else if s >= 1.0 {
                1.0
            } else {
                g(s - 0.5) / (g(s - 0.5) + g(1.0 - s))
            }
        };
        let n = 40000;
        let hstep = 1.0 / n as f64;
        let f = |s: f64| (chi(s) * s + (1.0 - chi(s)) * (a + b * s * s) - s) * 0.5;
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hstep);
        }
        let oracle = acc * hstep / 3.0;
        assert!(
            (dec.remainder - oracle).abs() < 1e-12,
            "{} vs {oracle}",
            dec.remainder
        );
        // flat metric: the correction is the remainder itself
        assert!((dec.correction - dec.remainder).abs() < 1e-11);
    }

    #[test]
    fn closed_form_matches_quadrature_both_signs() {
        let p = pf(
            1.25,
            AngularProfile::Sides {
                plus: 1.0,
                minus: 0.5,
            },
            1,
        );
        for t in [-3.0f64, -0.5, 0.5, 2.0] {
            for xi in [-7.0, -2.0, 2.5, 40.0] {
                if (t * xi).abs() < 1.0 {
                    continue;
                }
                let dec = homogeneous_decomposition(&p, t, &[xi]).unwrap();
                let q = p.phase(t, &[xi]).unwrap();
                let rebuilt = dec.leading + dec.remainder + 0.5 * t * xi * xi;
                assert!(
                    (q - rebuilt).abs() < 1e-10,
                    "t={t} xi={xi}: {q} vs {rebuilt}"
                );
            }
        }
    }

    #[test]
    fn remainder_decays_like_inverse_frequency() {
        let p = pf(
            1.0,
            AngularProfile::Trig {
                cos: vec![1.0, 0.3],
                sin: vec![0.0, -0.2],
            },
            2,
        );
        let base = homogeneous_decomposition(&p, 1.0, &[3.0, 4.0])
            .unwrap()
            .remainder;
        let far = homogeneous_decomposition(&p, 1.0, &[30.0, 40.0])
            .unwrap()
            .remainder;
        assert!((far * 10.0 - base).abs() < 1e-12);
    }

    #[test]
    fn outside_closed_form_region() {
        let p = pf(1.0, AngularProfile::Constant { value: 1.0 }, 1);
        assert!(matches!(
            homogeneous_decomposition(&p, 0.1, &[2.0]),
            Err(Error::OutsideClosedForm { .. })
        ));
    }
}
