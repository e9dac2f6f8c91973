use std::fmt;

use nalgebra::DMatrix;

/// Matrix-valued coefficient field `a(x)` of the kinetic symbol.
///
/// Layouts are row-major: `coefficients` writes `d*d` entries,
/// `gradient` writes `d` blocks (one per `x_k`) and `hessian` writes `d*d`
/// blocks indexed by `(k, l)`. The default derivative implementations use
/// central differences of the next-lower order, which costs roughly six
/// digits of accuracy per order.
pub trait MetricField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Decay exponent `mu` of `a - identity`.
    fn decay_exponent(&self) -> f64;

    fn coefficients(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let dd = d * d;
        let mut xp = x.to_vec();
        let mut plus = vec![0.0; dd];
        let mut minus = vec![0.0; dd];
        for k in 0..d {
            let h = 1e-6 * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            self.coefficients(&xp, &mut plus);
            xp[k] = x[k] - h;
            self.coefficients(&xp, &mut minus);
            xp[k] = x[k];
            for i in 0..dd {
                out[k * dd + i] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let block = d * d * d;
        let mut xp = x.to_vec();
        let mut plus = vec![0.0; block];
        let mut minus = vec![0.0; block];
        for l in 0..d {
            let h = 1e-5 * x[l].abs().max(1.0);
            xp[l] = x[l] + h;
            self.gradient(&xp, &mut plus);
            xp[l] = x[l] - h;
            self.gradient(&xp, &mut minus);
            xp[l] = x[l];
            // plus/minus hold d_k a at shifted points; store as (k, l)
            for k in 0..d {
                for i in 0..d * d {
                    out[(k * d + l) * d * d + i] =
                        (plus[k * d * d + i] - minus[k * d * d + i]) / (2.0 * h);
                }
            }
        }
    }

    fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut a = vec![0.0; d * d];
        self.coefficients(x, &mut a);
        let m = DMatrix::from_row_slice(d, d, &a);
        m.symmetric_eigenvalues().min()
    }

    fn is_flat(&self) -> bool {
        false
    }
}

/// `a(x) = identity`.
#[derive(Debug, Clone)]
pub struct FlatMetric {
    dim: usize,
}

impl FlatMetric {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl MetricField for FlatMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn decay_exponent(&self) -> f64 {
        1.0
    }

    fn coefficients(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = 1.0;
        }
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn min_eigenvalue(&self, _x: &[f64]) -> f64 {
        1.0
    }

    fn is_flat(&self) -> bool {
        true
    }
}

/// Conformal bump `a(x) = (1 + c <x>^{-mu}) identity`.
#[derive(Debug, Clone)]
pub struct ConformalDecayMetric {
    dim: usize,
    amplitude: f64,
    mu: f64,
}

impl ConformalDecayMetric {
    pub fn new(dim: usize, amplitude: f64, mu: f64) -> Self {
        Self { dim, amplitude, mu }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Conformal factor and its first two derivatives.
    /// `w = u^q` with `u = 1 + |x|^2`, `q = -mu/2`.
    fn factor(&self, x: &[f64]) -> (f64, f64, f64, f64) {
        let u = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
        let q = -0.5 * self.mu;
        let w = u.powf(q);
        (u, q, w, 1.0 + self.amplitude * w)
    }

    /// Radial profile derivatives `(w, w1, w2, w3)` so that
    /// `d_j w = w1 * x_j`, `d_ij w = w1 δ_ij + w2 x_i x_j`, and
    /// `d_ijk w = w2 (δ_ij x_k + δ_ik x_j + δ_jk x_i) + w3 x_i x_j x_k`.
    fn radial(&self, x: &[f64]) -> (f64, f64, f64, f64) {
        let (u, q, w, _) = self.factor(x);
        let w1 = 2.0 * q * w / u;
        let w2 = 4.0 * q * (q - 1.0) * w / (u * u);
        let w3 = 8.0 * q * (q - 1.0) * (q - 2.0) * w / (u * u * u);
        (w, w1, w2, w3)
    }

    /// Third derivatives of the conformal factor, `d_ijk f`, row-major `d^3`.
    pub fn factor_third(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (_, _, w2, w3) = self.radial(x);
        let c = self.amplitude;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let dij = if i == j { 1.0 } else { 0.0 };
                    let dik = if i == k { 1.0 } else { 0.0 };
                    let djk = if j == k { 1.0 } else { 0.0 };
                    out[(i * d + j) * d + k] =
                        c * (w2 * (dij * x[k] + dik * x[j] + djk * x[i]) + w3 * x[i] * x[j] * x[k]);
                }
            }
        }
    }
}

impl MetricField for ConformalDecayMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn decay_exponent(&self) -> f64 {
        self.mu
    }

    fn coefficients(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (_, _, _, f) = self.factor(x);
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = f;
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (_, w1, _, _) = self.radial(x);
        out.fill(0.0);
        for k in 0..d {
            let g = self.amplitude * w1 * x[k];
            for i in 0..d {
                out[k * d * d + i * d + i] = g;
            }
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (_, w1, w2, _) = self.radial(x);
        out.fill(0.0);
        for k in 0..d {
            for l in 0..d {
                let dkl = if k == l { 1.0 } else { 0.0 };
                let h = self.amplitude * (w1 * dkl + w2 * x[k] * x[l]);
                for i in 0..d {
                    out[(k * d + l) * d * d + i * d + i] = h;
                }
            }
        }
    }

    fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        self.factor(x).3
    }
}
