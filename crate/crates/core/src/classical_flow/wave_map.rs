use nalgebra::{DMatrix, DVector};

use super::asymptotes::{one_sided_asymptote, AsymptoteOptions};
use super::{check_start, PhasePoint};
use crate::error::{Error, Result};
use crate::symbols::SymbolModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    /// Asymptotic data to initial data.
    Forward,
    /// Initial data to asymptotic data.
    Inverse,
}

#[derive(Debug, Clone)]
pub struct WaveMapOptions {
    pub asymptotes: AsymptoteOptions,
    /// Residual target of the Newton shooting.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step of the Jacobian.
    pub fd_step: f64,
}

impl Default for WaveMapOptions {
    fn default() -> Self {
        Self {
            asymptotes: AsymptoteOptions {
                levels: Some(2),
                ..AsymptoteOptions::default()
            },
            tol: 1e-8,
            max_iter: 40,
            fd_step: 1e-5,
        }
    }
}

fn check_point(model: &SymbolModel, point: &PhasePoint) -> Result<()> {
    check_start(model, point)?;
    if point.xi_norm() < 1e-3 {
        return Err(Error::Precondition(format!(
            "|xi| = {:.3e} is below 1e-3; wave maps need xi != 0",
            point.xi_norm()
        )));
    }
    Ok(())
}

fn asymptote_state(
    model: &SymbolModel,
    y: &[f64],
    sign: f64,
    opts: &WaveMapOptions,
) -> Result<DVector<f64>> {
    let p = PhasePoint::from_state(y);
    let lim = one_sided_asymptote(model, &p, sign, &opts.asymptotes)?;
    Ok(DVector::from_vec(lim.point().to_state()))
}

fn fd_jacobian(
    model: &SymbolModel,
    y: &[f64],
    base: &DVector<f64>,
    sign: f64,
    opts: &WaveMapOptions,
) -> Result<DMatrix<f64>> {
    let n = y.len();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = opts.fd_step * y[j].abs().max(1.0);
        let mut shifted = y.to_vec();
        shifted[j] += h;
        let col = (asymptote_state(model, &shifted, sign, opts)? - base) / h;
        jac.set_column(j, &col);
    }
    Ok(jac)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, c| m.max(c.abs()))
}

/// Solves `asymptote(y) = target` by damped Newton iteration.
fn shoot(
    model: &SymbolModel,
    target: &PhasePoint,
    sign: f64,
    opts: &WaveMapOptions,
) -> Result<PhasePoint> {
    let goal = DVector::from_vec(target.to_state());
    let mut y = goal.clone();
    let mut value = asymptote_state(model, y.as_slice(), sign, opts)?;
    let mut residual = &value - &goal;
    let mut res_norm = max_abs(&residual);
    for _ in 0..opts.max_iter {
        if res_norm <= opts.tol {
            return Ok(PhasePoint::from_state(y.as_slice()));
        }
        let jac = fd_jacobian(model, y.as_slice(), &value, sign, opts)?;
        let step = jac.lu().solve(&(-&residual)).ok_or(Error::Solver {
            iterations: 0,
            residual: res_norm,
        })?;
        let mut alpha = 1.0;
        loop {
            let trial = &y + &step * alpha;
            let accepted = match asymptote_state(model, trial.as_slice(), sign, opts) {
                Ok(v) => {
                    let r = &v - &goal;
                    let rn = max_abs(&r);
                    if rn <= (1.0 - 1e-4 * alpha) * res_norm {
                        y = trial;
                        value = v;
                        residual = r;
                        res_norm = rn;
                        true
                    } else {
                        false
                    }
                }
                // trial points that trap or lose the metric count as rejections
                Err(Error::Precondition(_)) | Err(Error::Integration { .. }) => false,
                Err(e) => return Err(e),
            };
            if accepted {
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-6 {
                return Err(Error::Solver {
                    iterations: opts.max_iter,
                    residual: res_norm,
                });
            }
        }
    }
    if res_norm <= opts.tol {
        Ok(PhasePoint::from_state(y.as_slice()))
    } else {
        Err(Error::Solver {
            iterations: opts.max_iter,
            residual: res_norm,
        })
    }
}

/// Classical wave map of the side `sign`. `Forward` sends asymptotic data
/// `(x_+-, xi_+-)` to the initial data `(x_0, xi_0)` whose kinetic trajectory
/// has them as asymptotes; `Inverse` computes the asymptotes.
pub fn wave_map(
    model: &SymbolModel,
    point: &PhasePoint,
    direction: MapDirection,
    sign: f64,
    opts: &WaveMapOptions,
) -> Result<PhasePoint> {
    check_point(model, point)?;
    match direction {
        MapDirection::Inverse => {
            Ok(one_sided_asymptote(model, point, sign, &opts.asymptotes)?.point())
        }
        MapDirection::Forward => shoot(model, point, sign, opts),
    }
}

/// Finite-difference Jacobian of the forward map at the asymptotic point
/// `point` together with its 2-norm condition number.
pub fn wave_map_jacobian(
    model: &SymbolModel,
    point: &PhasePoint,
    sign: f64,
    opts: &WaveMapOptions,
) -> Result<(DMatrix<f64>, f64)> {
    let y = wave_map(model, point, MapDirection::Forward, sign, opts)?;
    let state = y.to_state();
    let base = asymptote_state(model, &state, sign, opts)?;
    let jac = fd_jacobian(model, &state, &base, sign, opts)?;
    let inv = jac.clone().try_inverse().ok_or(Error::Solver {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let sv = jac.singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(a, b), s| (a.max(*s), b.min(*s)));
    Ok((inv, smax / smin))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::classical_flow::tests::bump;

    #[test]
    fn free_model_identity() {
        let m = SymbolModel::free(2);
        let p = PhasePoint::new(vec![0.3, -0.7], vec![1.0, 0.4]).unwrap();
        let opts = WaveMapOptions::default();
        for dir in [MapDirection::Forward, MapDirection::Inverse] {
            for sign in [1.0, -1.0] {
                let q = wave_map(&m, &p, dir, sign, &opts).unwrap();
                assert!(q.distance(&p) < 1e-9);
            }
        }
    }

    #[test]
    fn bump_round_trip() {
        let m = bump(2);
        let opts = WaveMapOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let p = PhasePoint::new(
                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                vec![rng.random_range(0.6..1.2), rng.random_range(-0.5..0.5)],
            )
            .unwrap();
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a = wave_map(&m, &p, MapDirection::Inverse, sign, &opts).unwrap();
            let back = wave_map(&m, &a, MapDirection::Forward, sign, &opts).unwrap();
            assert!(back.distance(&p) < 1e-6, "{back:?} vs {p:?}");
        }
    }

    #[test]
    fn jacobian_well_conditioned() {
        let m = bump(2);
        let p = PhasePoint::new(vec![0.2, 0.1], vec![1.0, 0.3]).unwrap();
        let (j, cond) = wave_map_jacobian(&m, &p, 1.0, &WaveMapOptions::default()).unwrap();
        assert_eq!(j.nrows(), 4);
        assert!(cond < 1e3, "{cond}");
    }

    #[test]
    fn rejects_zero_momentum() {
        let m = SymbolModel::free(1);
        let p = PhasePoint::new(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(
            wave_map(
                &m,
                &p,
                MapDirection::Forward,
                1.0,
                &WaveMapOptions::default()
            ),
            Err(Error::Precondition(_))
        ));
    }
}
