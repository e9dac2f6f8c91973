//! Dollard-type phases `Phi`, `Psi`, `Phi^lambda` by adaptive quadrature,
//! their frequency derivatives, and closed forms for homogeneous potentials.

mod bounds;
mod homogeneous;
mod table;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

pub use bounds::{verify_phase_bounds, BoundEntry, BoundReport, BoundSettings};
pub use homogeneous::{homogeneous_decomposition, leading_coefficient, HomogeneousDecomposition};
pub use table::{phase_table, write_phase_table};

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{integrate_vec, QuadOptions};
use crate::symbols::SymbolModel;

/// Which phase integral a [`PhaseFunction`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseKind {
    /// `Psi(t, xi) = int_0^t k(s xi, xi) ds`
    Kinetic,
    /// `Phi(t, xi) = int_0^t p^(L)(s xi, xi) ds`
    LongRange,
    /// `Phi^lambda`, built from `k + V^(L) / lambda^2`.
    Scaled { lambda: f64 },
}

impl PhaseKind {
    fn weight(self) -> f64 {
        match self {
            PhaseKind::Kinetic => 0.0,
            PhaseKind::LongRange => 1.0,
            PhaseKind::Scaled { lambda } => 1.0 / (lambda * lambda),
        }
    }
}

type MemoKey = (u8, i64, Vec<i64>);

const MEMO_CAPACITY: usize = 1 << 20;
const MEMO_QUANTUM: f64 = 1e-12;

/// Phase integral evaluator with a memo of computed jets.
#[derive(Debug)]
pub struct PhaseFunction {
    model: Arc<SymbolModel>,
    kind: PhaseKind,
    tol: f64,
    memo: Mutex<HashMap<MemoKey, Vec<f64>>>,
}

impl Clone for PhaseFunction {
    fn clone(&self) -> Self {
        Self::new(self.model.clone(), self.kind, self.tol).expect("validated on construction")
    }
}

fn quantize(v: f64) -> Option<i64> {
    let q = (v / MEMO_QUANTUM).round();
    (q.abs() < 9.0e18).then_some(q as i64)
}

impl PhaseFunction {
    pub fn new(model: Arc<SymbolModel>, kind: PhaseKind, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Configuration(format!(
                "phase tolerance must be positive, got {tol}"
            )));
        }
        if let PhaseKind::Scaled { lambda } = kind {
            if !(lambda >= 1.0) {
                return Err(Error::Precondition(format!(
                    "scaling parameter must be >= 1, got {lambda}"
                )));
            }
        }
        Ok(Self {
            model,
            kind,
            tol,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn kinetic(model: Arc<SymbolModel>, tol: f64) -> Result<Self> {
        Self::new(model, PhaseKind::Kinetic, tol)
    }

    pub fn long_range(model: Arc<SymbolModel>, tol: f64) -> Result<Self> {
        Self::new(model, PhaseKind::LongRange, tol)
    }

    pub fn scaled(model: Arc<SymbolModel>, lambda: f64, tol: f64) -> Result<Self> {
        Self::new(model, PhaseKind::Scaled { lambda }, tol)
    }

    pub fn model(&self) -> &SymbolModel {
        &self.model
    }

    pub fn shared_model(&self) -> Arc<SymbolModel> {
        self.model.clone()
    }

    pub fn kind(&self) -> PhaseKind {
        self.kind
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Number of cached jets.
    pub fn memo_len(&self) -> usize {
        self.memo.lock().map(|m| m.len()).unwrap_or(0)
    }

    fn key(&self, order: usize, t: f64, xi: &[f64]) -> Option<MemoKey> {
        let qt = quantize(t)?;
        let qx: Option<Vec<i64>> = xi.iter().map(|v| quantize(*v)).collect();
        Some((order as u8, qt, qx?))
    }

    fn breakpoints(&self, xi: &[f64]) -> Vec<f64> {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self.model.potential().homogeneous_part() {
            Some(h) if norm > 0.0 && self.kind.weight() != 0.0 => {
                let r0 = h.blend_radius();
                vec![0.5 * r0 / norm, r0 / norm, h.exact_radius() / norm]
            }
            _ => Vec::new(),
        }
    }

    /// Derivatives up to `order` (0, 1 or 2) of `xi -> p(c xi, xi)`, written
    /// as `[value, grad (d), hessian (d*d)]`.
    fn integrand(&self, c: f64, xi: &[f64], order: usize, out: &mut [f64]) {
        let model = &self.model;
        let d = model.dim();
        let w = self.kind.weight();
        let x: Vec<f64> = xi.iter().map(|v| c * v).collect();
        out.fill(0.0);
        out[0] = model.symbol_weighted(&x, xi, w, 0.0);
        if order == 0 {
            return;
        }
        let flat = model.is_flat();
        let mut a = vec![0.0; d * d];
        let mut da = vec![0.0; d * d * d];
        if !flat {
            model.metric().coefficients(&x, &mut a);
            model.metric().gradient(&x, &mut da);
        }
        let mut gv = vec![0.0; d];
        model.potential_gradient_weighted(&x, w, 0.0, &mut gv);
        // d_xi p = a xi, d_x p = 1/2 (d a) xi xi + grad V
        for j in 0..d {
            let dxi = if flat {
                xi[j]
            } else {
                (0..d).map(|n| a[j * d + n] * xi[n]).sum()
            };
            let dx = if flat {
                gv[j]
            } else {
                crate::symbols::quadratic_form(&da[j * d * d..(j + 1) * d * d], xi, d) + gv[j]
            };
            out[1 + j] = c * dx + dxi;
        }
        if order == 1 {
            return;
        }
        let mut hv = vec![0.0; d * d];
        model.potential_hessian_weighted(&x, w, 0.0, &mut hv);
        let mut dda = vec![0.0; d.pow(4)];
        if !flat {
            model.metric().hessian(&x, &mut dda);
        }
        let base = 1 + d;
        for i in 0..d {
            for j in 0..d {
                let (pxx, pxxi, pxix, pxixi);
                if flat {
                    pxx = hv[i * d + j];
                    pxxi = 0.0;
                    pxix = 0.0;
                    pxixi = if i == j { 1.0 } else { 0.0 };
                } else {
                    let blk = &dda[(i * d + j) * d * d..(i * d + j + 1) * d * d];
                    pxx = crate::symbols::quadratic_form(blk, xi, d) + hv[i * d + j];
                    // d_{x_i} d_{xi_j} p = sum_n d_i a_{jn} xi_n
                    pxxi = (0..d)
                        .map(|n| da[i * d * d + j * d + n] * xi[n])
                        .sum::<f64>();
                    pxix = (0..d)
                        .map(|n| da[j * d * d + i * d + n] * xi[n])
                        .sum::<f64>();
                    pxixi = a[i * d + j];
                }
                out[base + i * d + j] = c * c * pxx + c * (pxxi + pxix) + pxixi;
            }
        }
    }

    fn jet_uncached(&self, t: f64, xi: &[f64], order: usize) -> Result<Vec<f64>> {
        let d = self.model.dim();
        let len = match order {
            0 => 1,
            1 => 1 + d,
            _ => 1 + d + d * d,
        };
        if t == 0.0 {
            return Ok(vec![0.0; len]);
        }
        // Negative times use the reflection -int_0^|t| p(-s xi, xi) ds.
        let (sign, span) = if t > 0.0 { (1.0, t) } else { (-1.0, -t) };
        let breaks = self.breakpoints(xi);
        let opts = QuadOptions {
            abs_tol: self.tol,
            rel_tol: 1e-14,
            max_intervals: 4000,
        };
        let r = integrate_vec(
            |s, out: &mut [f64]| self.integrand(sign * s, xi, order, out),
            len,
            0.0,
            span,
            &breaks,
            &opts,
        )?;
        Ok(r.value.into_iter().map(|v| sign * v).collect())
    }

    fn jet(&self, t: f64, xi: &[f64], order: usize) -> Result<Vec<f64>> {
        let d = self.model.dim();
        if xi.len() != d {
            return Err(Error::Domain(format!(
                "expected {d} frequency components, got {}",
                xi.len()
            )));
        }
        ensure_finite("t", &[t])?;
        ensure_finite("xi", xi)?;
        let key = self.key(order, t, xi);
        if let Some(k) = &key {
            if let Some(v) = self.memo.lock().ok().and_then(|m| m.get(k).cloned()) {
                return Ok(v);
            }
        }
        let v = self.jet_uncached(t, xi, order)?;
        if let Some(k) = key {
            if let Ok(mut m) = self.memo.lock() {
                if m.len() >= MEMO_CAPACITY {
                    m.clear();
                }
                m.insert(k, v.clone());
            }
        }
        Ok(v)
    }

    /// The phase value at `(t, xi)`.
    pub fn phase(&self, t: f64, xi: &[f64]) -> Result<f64> {
        Ok(self.jet(t, xi, 0)?[0])
    }

    /// `d_xi` of the phase.
    pub fn phase_gradient(&self, t: f64, xi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(t, xi, 1)?[1..].to_vec())
    }

    /// `d_xi^2` of the phase, row-major.
    pub fn phase_hessian(&self, t: f64, xi: &[f64]) -> Result<Vec<f64>> {
        let d = self.model.dim();
        Ok(self.jet(t, xi, 2)?[1 + d..].to_vec())
    }

    /// Gradient and Hessian from one quadrature pass.
    pub fn gradient_and_hessian(&self, t: f64, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.model.dim();
        let j = self.jet(t, xi, 2)?;
        Ok((j[1..1 + d].to_vec(), j[1 + d..].to_vec()))
    }

    /// `d_t` of the phase: the integrand at `s = t`.
    pub fn time_derivative(&self, t: f64, xi: &[f64]) -> f64 {
        let mut out = [0.0];
        self.integrand(t, xi, 0, &mut out);
        out[0]
    }

    /// `d_t d_xi` of the phase.
    pub fn time_derivative_gradient(&self, t: f64, xi: &[f64]) -> Vec<f64> {
        let d = self.model.dim();
        let mut out = vec![0.0; 1 + d];
        self.integrand(t, xi, 1, &mut out);
        out[1..].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{
        AngularProfile, ConformalDecayMetric, FlatMetric, HomogeneousPotential, PotentialSpec,
    };

    fn homogeneous_1d(beta: f64) -> Arc<SymbolModel> {
        let v = HomogeneousPotential::new(1, beta, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        Arc::new(
            SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap(),
        )
    }

    fn bump_2d() -> Arc<SymbolModel> {
        let v = HomogeneousPotential::new(
            2,
            1.25,
            1.0,
            AngularProfile::Trig {
                cos: vec![1.0, 0.2],
                sin: vec![0.0, 0.1],
            },
        )
        .unwrap();
        Arc::new(
            SymbolModel::new(
                Arc::new(ConformalDecayMetric::new(2, 0.2, 0.75)),
                PotentialSpec::homogeneous(v).with_exponents(0.75, 2.0),
            )
            .unwrap(),
        )
    }

    /// Composite Simpson rule on a fine uniform grid.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn free_phase_and_gradient() {
        let pf = PhaseFunction::long_range(Arc::new(SymbolModel::free(2)), 1e-12).unwrap();
        let xi = [1.5, -0.5];
        let t = 3.0;
        assert!((pf.phase(t, &xi).unwrap() - t * 1.25).abs() < 1e-12);
        let g = pf.phase_gradient(t, &xi).unwrap();
        assert!((g[0] - 4.5).abs() < 1e-12 && (g[1] + 1.5).abs() < 1e-12);
        assert_eq!(pf.phase(0.0, &xi).unwrap(), 0.0);
    }

    #[test]
    fn phase_matches_simpson_oracle() {
        let model = homogeneous_1d(1.0);
        let pf = PhaseFunction::long_range(model.clone(), 1e-13).unwrap();
        for (t, xi) in [(2.0, 3.0), (0.7, 0.9), (-1.3, 2.0), (1.0, -4.0)] {
            let v = |s: f64| {
                let x = s * xi;
                0.5 * xi * xi + model.potential().long_range().value(&[x])
            };
            let oracle = simpson(v, 0.0, t, 20000);
            let got = pf.phase(t, &[xi]).unwrap();
            assert!(
                (got - oracle).abs() < 1e-9,
                "t={t} xi={xi}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn kinetic_scaling_identity() {
        let pf = PhaseFunction::kinetic(bump_2d(), 1e-13).unwrap();
        let xi = [0.8, -0.3];
        let t = 1.7;
        for lam in [2.0, 4.0, 8.0] {
            let lhs = pf.phase(t, &[lam * xi[0], lam * xi[1]]).unwrap();
            let rhs = lam * pf.phase(lam * t, &xi).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn scaled_gradient_identity() {
        let model = bump_2d();
        let pf = PhaseFunction::long_range(model.clone(), 1e-13).unwrap();
        let xi = [0.6, 0.9];
        let t = 0.8;
        for lam in [2.0, 8.0, 32.0] {
            let scaled = PhaseFunction::scaled(model.clone(), lam, 1e-13).unwrap();
            let lhs = scaled.phase_gradient(lam * t, &xi).unwrap();
            let rhs = pf.phase_gradient(t, &[lam * xi[0], lam * xi[1]]).unwrap();
            for k in 0..2 {
                assert!(
                    (lhs[k] - rhs[k]).abs() < 1e-9 * rhs[k].abs().max(1.0),
                    "{lhs:?} vs {rhs:?}"
                );
            }
        }
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let model = bump_2d();
        let pf = PhaseFunction::long_range(model, 1e-13).unwrap();
        let h = 1e-5;
        for (t, xi) in [(1.5, [0.7, -1.1]), (-2.0, [2.0, 0.4]), (0.3, [5.0, 3.0])] {
            let (g, hess) = pf.gradient_and_hessian(t, &xi).unwrap();
            for j in 0..2 {
                let mut xp = xi;
                let mut xm = xi;
                xp[j] += h;
                xm[j] -= h;
                let fd = (pf.phase(t, &xp).unwrap() - pf.phase(t, &xm).unwrap()) / (2.0 * h);
                assert!(
                    (fd - g[j]).abs() < 1e-7 * g[j].abs().max(1.0),
                    "grad {j}: {fd} vs {}",
                    g[j]
                );
                let gp = pf.phase_gradient(t, &xp).unwrap();
                let gm = pf.phase_gradient(t, &xm).unwrap();
                for i in 0..2 {
                    let fdh = (gp[i] - gm[i]) / (2.0 * h);
                    assert!((fdh - hess[i * 2 + j]).abs() < 1e-6 * fdh.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn time_derivative_matches_difference() {
        let pf = PhaseFunction::long_range(bump_2d(), 1e-13).unwrap();
        let xi = [1.1, 0.4];
        for t in [-1.5, 0.4, 2.5] {
            let h = 1e-5;
            let fd = (pf.phase(t + h, &xi).unwrap() - pf.phase(t - h, &xi).unwrap()) / (2.0 * h);
            assert!((fd - pf.time_derivative(t, &xi)).abs() < 1e-7);
        }
    }

    #[test]
    fn negative_time_reflection_and_additivity() {
        let model = homogeneous_1d(1.25);
        let pf = PhaseFunction::long_range(model.clone(), 1e-13).unwrap();
        let xi = [1.7];
        let refl = -simpson(
            |s| 0.5 * xi[0] * xi[0] + model.potential().long_range().value(&[-s * xi[0]]),
            0.0,
            1.4,
            20000,
        );
        assert!((pf.phase(-1.4, &xi).unwrap() - refl).abs() < 1e-9);
        let (t1, t2) = (0.6, 0.9);
        let mid = crate::quadrature::integrate(
            |s| pf.time_derivative(s, &xi),
            t1,
            t1 + t2,
            &[],
            &QuadOptions::default(),
        )
        .unwrap()
        .0;
        let lhs = pf.phase(t1 + t2, &xi).unwrap();
        assert!((lhs - pf.phase(t1, &xi).unwrap() - mid).abs() < 1e-11);
    }

    #[test]
    fn memo_is_reused() {
        let pf = PhaseFunction::long_range(homogeneous_1d(1.0), 1e-12).unwrap();
        let a = pf.phase(1.0, &[2.0]).unwrap();
        let n = pf.memo_len();
        let b = pf.phase(1.0, &[2.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(pf.memo_len(), n);
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = Arc::new(SymbolModel::free(1));
        assert!(PhaseFunction::long_range(m.clone(), 0.0).is_err());
        assert!(PhaseFunction::scaled(m.clone(), 0.5, 1e-10).is_err());
        let pf = PhaseFunction::long_range(m, 1e-10).unwrap();
        assert!(matches!(pf.phase(f64::NAN, &[1.0]), Err(Error::Domain(_))));
    }
}
