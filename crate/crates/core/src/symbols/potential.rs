use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth real field on `R^d` with derivative evaluators.
///
/// `hessian` writes `d*d` row-major entries, `third` writes `d^3`. Default
/// derivatives are central differences of the next lower order.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut xp = x.to_vec();
        for k in 0..self.dim() {
            let h = 1e-6 * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let fp = self.value(&xp);
            xp[k] = x[k] - h;
            let fm = self.value(&xp);
            xp[k] = x[k];
            out[k] = (fp - fm) / (2.0 * h);
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut xp = x.to_vec();
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        for l in 0..d {
            let h = 1e-5 * x[l].abs().max(1.0);
            xp[l] = x[l] + h;
            self.gradient(&xp, &mut gp);
            xp[l] = x[l] - h;
            self.gradient(&xp, &mut gm);
            xp[l] = x[l];
            for k in 0..d {
                out[k * d + l] = (gp[k] - gm[k]) / (2.0 * h);
            }
        }
    }

    fn third(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut xp = x.to_vec();
        let mut hp = vec![0.0; d * d];
        let mut hm = vec![0.0; d * d];
        for l in 0..d {
            let h = 1e-4 * x[l].abs().max(1.0);
            xp[l] = x[l] + h;
            self.hessian(&xp, &mut hp);
            xp[l] = x[l] - h;
            self.hessian(&xp, &mut hm);
            xp[l] = x[l];
            for i in 0..d * d {
                out[i * d + l] = (hp[i] - hm[i]) / (2.0 * h);
            }
        }
    }

    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ZeroField {
    dim: usize,
}

impl ZeroField {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ScalarField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn third(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Angular profile `v` of a homogeneous potential `|x|^beta v(x_hat)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularProfile {
    Constant {
        value: f64,
    },
    /// One dimension only: `v(+1) = plus`, `v(-1) = minus`.
    Sides {
        plus: f64,
        minus: f64,
    },
    /// Two dimensions only: `v(theta) = sum_k cos[k] cos(k theta) + sin[k] sin(k theta)`.
    Trig {
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// `v(x_hat) = constant + gradient . x_hat` in any dimension.
    Linear {
        constant: f64,
        gradient: Vec<f64>,
    },
}

/// Homogeneous polynomial of degree `k` used to represent the profile:
/// `|x|^beta v(x_hat) = sum_k |x|^(beta - k) P_k(x)`.
#[derive(Debug, Clone)]
enum ProfileTerm {
    Constant(f64),
    Linear(Vec<f64>),
    /// `re * Re (x + i y)^k + im * Im (x + i y)^k`
    ComplexPower {
        k: u32,
        re: f64,
        im: f64,
    },
}

impl ProfileTerm {
    fn degree(&self) -> i32 {
        match self {
            ProfileTerm::Constant(_) => 0,
            ProfileTerm::Linear(_) => 1,
            ProfileTerm::ComplexPower { k, .. } => *k as i32,
        }
    }

    /// Value, gradient and hessian (row-major) of the polynomial.
    fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        grad.fill(0.0);
        hess.fill(0.0);
        match self {
            ProfileTerm::Constant(c) => *c,
            ProfileTerm::Linear(g) => {
                grad.copy_from_slice(g);
                g.iter().zip(x).map(|(a, b)| a * b).sum()
            }
            ProfileTerm::ComplexPower { k, re, im } => {
                let z = num_complex::Complex64::new(x[0], x[1]);
                let k = *k as i32;
                let zk = z.powi(k);
                let value = re * zk.re + im * zk.im;
                if k >= 1 {
                    let dz = z.powi(k - 1) * k as f64;
                    let i = num_complex::Complex64::i();
                    let dx = dz;
                    let dy = dz * i;
                    grad[0] = re * dx.re + im * dx.im;
                    grad[1] = re * dy.re + im * dy.im;
                }
                if k >= 2 {
                    let ddz = z.powi(k - 2) * (k * (k - 1)) as f64;
                    let i = num_complex::Complex64::i();
                    let dxx = ddz;
                    let dxy = ddz * i;
                    let dyy = -ddz;
                    hess[0] = re * dxx.re + im * dxx.im;
                    hess[1] = re * dxy.re + im * dxy.im;
                    hess[2] = hess[1];
                    hess[3] = re * dyy.re + im * dyy.im;
                }
                value
            }
        }
    }
}

impl AngularProfile {
    fn terms(&self, dim: usize) -> Result<Vec<ProfileTerm>> {
        match self {
            AngularProfile::Constant { value } => Ok(vec![ProfileTerm::Constant(*value)]),
            AngularProfile::Sides { plus, minus } => {
                if dim != 1 {
                    return Err(Error::Configuration(
                        "`sides` profile requires dim = 1".into(),
                    ));
                }
                Ok(vec![
                    ProfileTerm::Constant(0.5 * (plus + minus)),
                    ProfileTerm::Linear(vec![0.5 * (plus - minus)]),
                ])
            }
            AngularProfile::Trig { cos, sin } => {
                if dim != 2 {
                    return Err(Error::Configuration(
                        "`trig` profile requires dim = 2".into(),
                    ));
                }
                let n = cos.len().max(sin.len());
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let re = cos.get(k).copied().unwrap_or(0.0);
                    let im = if k == 0 {
                        0.0
                    } else {
                        sin.get(k).copied().unwrap_or(0.0)
                    };
                    if k == 0 {
                        out.push(ProfileTerm::Constant(re));
                    } else {
                        out.push(ProfileTerm::ComplexPower {
                            k: k as u32,
                            re,
                            im,
                        });
                    }
                }
                Ok(out)
            }
            AngularProfile::Linear { constant, gradient } => {
                if gradient.len() != dim {
                    return Err(Error::Configuration(format!(
                        "`linear` profile gradient has {} components, expected {dim}",
                        gradient.len()
                    )));
                }
                Ok(vec![
                    ProfileTerm::Constant(*constant),
                    ProfileTerm::Linear(gradient.clone()),
                ])
            }
        }
    }

    /// Mean of the profile over the unit sphere.
    pub fn mean(&self) -> f64 {
        match self {
            AngularProfile::Constant { value } => *value,
            AngularProfile::Sides { plus, minus } => 0.5 * (plus + minus),
            AngularProfile::Trig { cos, .. } => cos.first().copied().unwrap_or(0.0),
            AngularProfile::Linear { constant, .. } => *constant,
        }
    }
}

/// Smooth cutoff: 0 for `s <= 1/2`, 1 for `s >= 1`, with derivatives.
pub fn blend_cutoff(s: f64) -> (f64, f64, f64) {
    if s <= 0.5 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    fn g(u: f64) -> (f64, f64, f64) {
        if u <= 2e-3 {
            return (0.0, 0.0, 0.0);
        }
        let v = (-1.0 / u).exp();
        (v, v / (u * u), v * (1.0 - 2.0 * u) / u.powi(4))
    }
    let (ga, ga1, ga2) = g(s - 0.5);
    let (gb, gb1, gb2) = g(1.0 - s);
    let (hb, hb1, hb2) = (gb, -gb1, gb2);
    let sum = ga + hb;
    let sum1 = ga1 + hb1;
    let sum2 = ga2 + hb2;
    let chi = ga / sum;
    let num1 = ga1 * sum - ga * sum1;
    let chi1 = num1 / (sum * sum);
    let chi2 = (ga2 * sum - ga * sum2) / (sum * sum) - 2.0 * sum1 * num1 / sum.powi(3);
    (chi, chi1, chi2)
}

/// `V(x) = chi(|x|/r0) |x|^beta v(x_hat) + (1 - chi(|x|/r0)) q(x)` with
/// `q(x) = A + B |x|^2` matched in value and radial slope to the
/// sphere-averaged homogeneous part at `|x| = r0/2`.
#[derive(Debug, Clone)]
pub struct HomogeneousPotential {
    dim: usize,
    beta: f64,
    blend_radius: f64,
    profile: AngularProfile,
    terms: Vec<ProfileTerm>,
    q_const: f64,
    q_quad: f64,
}

impl HomogeneousPotential {
    pub fn new(dim: usize, beta: f64, blend_radius: f64, profile: AngularProfile) -> Result<Self> {
        if !(blend_radius > 0.0) || !blend_radius.is_finite() {
            return Err(Error::Configuration(format!(
                "blend radius must be positive, got {blend_radius}"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::Configuration(format!(
                "homogeneity degree must be positive, got {beta}"
            )));
        }
        let terms = profile.terms(dim)?;
        let h = 0.5 * blend_radius;
        let vbar = profile.mean();
        let q_quad = 0.5 * beta * h.powf(beta - 2.0) * vbar;
        let q_const = h.powf(beta) * vbar * (1.0 - 0.5 * beta);
        Ok(Self {
            dim,
            beta,
            blend_radius,
            profile,
            terms,
            q_const,
            q_quad,
        })
    }

    pub fn degree(&self) -> f64 {
        self.beta
    }

    pub fn blend_radius(&self) -> f64 {
        self.blend_radius
    }

    pub fn profile(&self) -> &AngularProfile {
        &self.profile
    }

    /// Coefficients `(A, B)` of the inner polynomial `A + B |x|^2`.
    pub fn inner_polynomial(&self) -> (f64, f64) {
        (self.q_const, self.q_quad)
    }

    /// Radius beyond which the potential is exactly homogeneous.
    pub fn exact_radius(&self) -> f64 {
        self.blend_radius.max(1.0)
    }

    /// `v(x_hat)` for a unit vector.
    pub fn profile_value(&self, unit: &[f64]) -> f64 {
        let d = self.dim;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        self.terms
            .iter()
            .map(|t| t.eval(unit, &mut g, &mut h))
            .sum()
    }

    /// The homogeneous extension `|x|^beta v(x_hat)` with gradient and
    /// hessian; undefined at the origin.
    pub fn homogeneous_part(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = self.dim;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        grad.fill(0.0);
        hess.fill(0.0);
        let mut pg = vec![0.0; d];
        let mut ph = vec![0.0; d * d];
        let mut value = 0.0;
        for term in &self.terms {
            let p = term.eval(x, &mut pg, &mut ph);
            let m = self.beta - term.degree() as f64;
            let rm = r.powf(m);
            let rm2 = m * r.powf(m - 2.0);
            let rm4 = m * (m - 2.0) * r.powf(m - 4.0);
            value += rm * p;
            for i in 0..d {
                grad[i] += rm2 * x[i] * p + rm * pg[i];
                for j in 0..d {
                    let dij = if i == j { 1.0 } else { 0.0 };
                    hess[i * d + j] += (rm2 * dij + rm4 * x[i] * x[j]) * p
                        + rm2 * (x[i] * pg[j] + x[j] * pg[i])
                        + rm * ph[i * d + j];
                }
            }
        }
        value
    }

    fn eval_all(&self, x: &[f64], want_hess: bool, grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = self.dim;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let s = r / self.blend_radius;
        let q = self.q_const + self.q_quad * r2;
        if s <= 0.5 {
            for i in 0..d {
                grad[i] = 2.0 * self.q_quad * x[i];
            }
            if want_hess {
                hess.fill(0.0);
                for i in 0..d {
                    hess[i * d + i] = 2.0 * self.q_quad;
                }
            }
            return q;
        }
        let mut hg = vec![0.0; d];
        let mut hh = vec![0.0; d * d];
        let hv = self.homogeneous_part(x, &mut hg, &mut hh);
        if s >= 1.0 {
            grad.copy_from_slice(&hg);
            if want_hess {
                hess.copy_from_slice(&hh);
            }
            return hv;
        }
        let (chi, chi1, chi2) = blend_cutoff(s);
        let r0 = self.blend_radius;
        let diff = hv - q;
        let mut cg = vec![0.0; d];
        for i in 0..d {
            cg[i] = chi1 / r0 * x[i] / r;
        }
        let mut dg = vec![0.0; d];
        for i in 0..d {
            dg[i] = hg[i] - 2.0 * self.q_quad * x[i];
            grad[i] = 2.0 * self.q_quad * x[i] + diff * cg[i] + chi * dg[i];
        }
        if want_hess {
            for i in 0..d {
                for j in 0..d {
                    let dij = if i == j { 1.0 } else { 0.0 };
                    let ch = chi2 / (r0 * r0) * x[i] * x[j] / r2
                        + chi1 / r0 * (dij / r - x[i] * x[j] / (r2 * r));
                    let qh = 2.0 * self.q_quad * dij;
                    hess[i * d + j] =
                        qh + diff * ch + cg[i] * dg[j] + dg[i] * cg[j] + chi * (hh[i * d + j] - qh);
                }
            }
        }
        q + chi * diff
    }

    /// Minimum of `|grad v|` over sampled unit vectors (`|grad V(x_hat)|`).
    pub fn min_unit_gradient(&self, samples: usize) -> f64 {
        let d = self.dim;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        let mut best = f64::INFINITY;
        for u in unit_samples(d, samples) {
            let scaled: Vec<f64> = u.iter().map(|v| v * self.exact_radius()).collect();
            self.eval_all(&scaled, false, &mut g, &mut h);
            best = best.min(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        best
    }
}

/// Deterministic unit vectors: `{+1, -1}` in 1D, equally spaced angles in
/// 2D, Fibonacci-sphere points otherwise.
pub fn unit_samples(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / count.max(4) as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            let n = count.max(8);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    let mut v = vec![0.0; dim];
                    v[0] = rad * th.cos();
                    v[1] = rad * th.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

impl ScalarField for HomogeneousPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim];
        self.eval_all(x, false, &mut g, &mut [])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.eval_all(x, false, out, &mut []);
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.dim];
        self.eval_all(x, true, &mut g, out);
    }
}

/// `V(x) = A <x>^p`; with `p = 2 - nu` this saturates the short-range bound.
#[derive(Debug, Clone)]
pub struct RadialPower {
    dim: usize,
    amplitude: f64,
    power: f64,
}

impl RadialPower {
    pub fn new(dim: usize, amplitude: f64, power: f64) -> Self {
        Self {
            dim,
            amplitude,
            power,
        }
    }

    fn radial(&self, x: &[f64]) -> (f64, f64, f64) {
        let u = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
        let q = 0.5 * self.power;
        let w = self.amplitude * u.powf(q);
        (w, 2.0 * q * w / u, 4.0 * q * (q - 1.0) * w / (u * u))
    }
}

impl ScalarField for RadialPower {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.radial(x).0
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (_, w1, _) = self.radial(x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = w1 * xi;
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (_, w1, w2) = self.radial(x);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = w2 * x[i] * x[j] + if i == j { w1 } else { 0.0 };
            }
        }
    }
}

/// `V(x) = A exp(-|x|^2 / (2 w^2))`.
#[derive(Debug, Clone)]
pub struct GaussianBump {
    dim: usize,
    amplitude: f64,
    width: f64,
}

impl GaussianBump {
    pub fn new(dim: usize, amplitude: f64, width: f64) -> Self {
        Self {
            dim,
            amplitude,
            width,
        }
    }
}

impl ScalarField for GaussianBump {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.amplitude * (-r2 / (2.0 * self.width * self.width)).exp()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let v = self.value(x);
        let s = -1.0 / (self.width * self.width);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = v * s * xi;
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let v = self.value(x);
        let s = -1.0 / (self.width * self.width);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = v * (s * s * x[i] * x[j] + if i == j { s } else { 0.0 });
            }
        }
    }
}

/// `V(x) = omega^2 |x|^2 / 2`. Confining; violates the decay assumptions and
/// exists to exercise the trapping diagnostics.
#[derive(Debug, Clone)]
pub struct HarmonicWell {
    dim: usize,
    omega: f64,
}

impl HarmonicWell {
    pub fn new(dim: usize, omega: f64) -> Self {
        Self { dim, omega }
    }
}

impl ScalarField for HarmonicWell {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.omega * self.omega * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let w2 = self.omega * self.omega;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = w2 * xi;
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = self.omega * self.omega;
        }
    }
}

/// Long- and short-range parts of the potential together with the decay
/// exponents they are checked against.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub(crate) long_range: Arc<dyn ScalarField>,
    pub(crate) short_range: Arc<dyn ScalarField>,
    pub(crate) homogeneous: Option<Arc<HomogeneousPotential>>,
    pub(crate) mu: f64,
    pub(crate) nu: f64,
    pub(crate) gradient_nonvanishing: bool,
    pub(crate) admissible: bool,
}

impl PotentialSpec {
    pub fn zero(dim: usize, mu: f64, nu: f64) -> Self {
        Self {
            long_range: Arc::new(ZeroField::new(dim)),
            short_range: Arc::new(ZeroField::new(dim)),
            homogeneous: None,
            mu,
            nu,
            gradient_nonvanishing: false,
            admissible: true,
        }
    }

    /// Homogeneous long-range part; `mu` defaults to `2 - beta`, the largest
    /// exponent for which the long-range bound holds.
    pub fn homogeneous(potential: HomogeneousPotential) -> Self {
        let dim = potential.dim;
        let mu = (2.0 - potential.degree()).min(1.0);
        let nonvanishing = potential.min_unit_gradient(64) > 0.0;
        let h = Arc::new(potential);
        Self {
            long_range: h.clone(),
            short_range: Arc::new(ZeroField::new(dim)),
            homogeneous: Some(h),
            mu,
            nu: 2.0,
            gradient_nonvanishing: nonvanishing,
            admissible: true,
        }
    }

    pub fn with_long_range(mut self, field: Arc<dyn ScalarField>) -> Self {
        self.long_range = field;
        self.homogeneous = None;
        self
    }

    pub fn with_short_range(mut self, field: Arc<dyn ScalarField>) -> Self {
        self.short_range = field;
        self
    }

    pub fn with_exponents(mut self, mu: f64, nu: f64) -> Self {
        self.mu = mu;
        self.nu = nu;
        self
    }

    /// Marks the potential as outside the decay assumptions (e.g. a trap).
    pub fn non_admissible(mut self) -> Self {
        self.admissible = false;
        self
    }

    pub fn long_range(&self) -> &dyn ScalarField {
        self.long_range.as_ref()
    }

    pub fn short_range(&self) -> &dyn ScalarField {
        self.short_range.as_ref()
    }

    pub fn homogeneous_part(&self) -> Option<&HomogeneousPotential> {
        self.homogeneous.as_deref()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn gradient_nonvanishing(&self) -> bool {
        self.gradient_nonvanishing
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    pub fn is_zero(&self) -> bool {
        self.long_range.is_zero() && self.short_range.is_zero()
    }

    pub fn dim(&self) -> usize {
        self.long_range.dim()
    }
}
