//! Hamiltonian symbols `k`, `p`, `p^(L)`, their coefficient models and
//! derivative evaluators.

mod config;
mod decay;
mod metric;
mod potential;

use std::sync::Arc;

pub use config::{LongRangeConfig, MetricConfig, ModelConfig, PotentialConfig, ShortRangeConfig};
pub use decay::{verify_decay, DecayEntry, DecayReport, SampleBox};
pub use metric::{ConformalDecayMetric, FlatMetric, MetricField};
pub use potential::{
    blend_cutoff, unit_samples, AngularProfile, GaussianBump, HarmonicWell, HomogeneousPotential,
    PotentialSpec, RadialPower, ScalarField, ZeroField,
};

use crate::error::{ensure_finite, Error, Result};

/// Which symbol to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolVariant {
    /// `k + V^(L) + V^(S)`
    Full,
    /// `k`
    Kinetic,
    /// `k + V^(L)`
    LongRange,
}

impl SymbolVariant {
    pub(crate) fn weights(self) -> (f64, f64) {
        match self {
            SymbolVariant::Full => (1.0, 1.0),
            SymbolVariant::Kinetic => (0.0, 0.0),
            SymbolVariant::LongRange => (1.0, 0.0),
        }
    }
}

/// Metric and potential of `p(x, xi) = 1/2 sum a_mn(x) xi_m xi_n + V(x)`.
#[derive(Debug, Clone)]
pub struct SymbolModel {
    metric: Arc<dyn MetricField>,
    potential: PotentialSpec,
}

impl SymbolModel {
    pub fn new(metric: Arc<dyn MetricField>, potential: PotentialSpec) -> Result<Self> {
        let d = metric.dim();
        if d == 0 {
            return Err(Error::Configuration("dimension must be positive".into()));
        }
        if potential.long_range().dim() != d || potential.short_range().dim() != d {
            return Err(Error::Configuration(format!(
                "dimension mismatch: metric d = {d}, long-range d = {}, short-range d = {}",
                potential.long_range().dim(),
                potential.short_range().dim()
            )));
        }
        Ok(Self { metric, potential })
    }

    /// Flat metric and zero potential.
    pub fn free(dim: usize) -> Self {
        Self {
            metric: Arc::new(FlatMetric::new(dim)),
            potential: PotentialSpec::zero(dim, 1.0, 2.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &dyn MetricField {
        self.metric.as_ref()
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    /// Shared decay exponent: the weaker of the metric and potential ones.
    pub fn mu(&self) -> f64 {
        if self.metric.is_flat() {
            self.potential.mu()
        } else {
            self.metric.decay_exponent().min(self.potential.mu())
        }
    }

    pub fn nu(&self) -> f64 {
        self.potential.nu()
    }

    pub fn is_flat(&self) -> bool {
        self.metric.is_flat()
    }

    fn check(&self, x: &[f64], xi: &[f64]) -> Result<()> {
        let d = self.dim();
        if x.len() != d || xi.len() != d {
            return Err(Error::Domain(format!(
                "expected {d} components, got x: {}, xi: {}",
                x.len(),
                xi.len()
            )));
        }
        ensure_finite("x", x)?;
        ensure_finite("xi", xi)
    }

    pub(crate) fn kinetic_unchecked(&self, x: &[f64], xi: &[f64]) -> f64 {
        let d = self.dim();
        if self.metric.is_flat() {
            return 0.5 * xi.iter().map(|v| v * v).sum::<f64>();
        }
        let mut a = vec![0.0; d * d];
        self.metric.coefficients(x, &mut a);
        quadratic_form(&a, xi, d)
    }

    /// `V^(L)` and `V^(S)` weighted by `(wl, ws)`.
    pub(crate) fn potential_weighted(&self, x: &[f64], wl: f64, ws: f64) -> f64 {
        let mut v = 0.0;
        if wl != 0.0 && !self.potential.long_range.is_zero() {
            v += wl * self.potential.long_range.value(x);
        }
        if ws != 0.0 && !self.potential.short_range.is_zero() {
            v += ws * self.potential.short_range.value(x);
        }
        v
    }

    pub(crate) fn symbol_weighted(&self, x: &[f64], xi: &[f64], wl: f64, ws: f64) -> f64 {
        self.kinetic_unchecked(x, xi) + self.potential_weighted(x, wl, ws)
    }

    /// `(d_xi p, -d_x p)` for `p = k + wl V^(L) + ws V^(S)`.
    pub(crate) fn field_weighted(
        &self,
        x: &[f64],
        xi: &[f64],
        wl: f64,
        ws: f64,
        vel: &mut [f64],
        force: &mut [f64],
    ) {
        let d = self.dim();
        if self.metric.is_flat() {
            vel.copy_from_slice(xi);
            force.fill(0.0);
        } else {
            let mut a = vec![0.0; d * d];
            let mut da = vec![0.0; d * d * d];
            self.metric.coefficients(x, &mut a);
            self.metric.gradient(x, &mut da);
            for m in 0..d {
                vel[m] = (0..d).map(|n| a[m * d + n] * xi[n]).sum();
            }
            for k in 0..d {
                force[k] = -quadratic_form(&da[k * d * d..(k + 1) * d * d], xi, d);
            }
        }
        let mut g = vec![0.0; d];
        for (w, field) in [
            (wl, &self.potential.long_range),
            (ws, &self.potential.short_range),
        ] {
            if w != 0.0 && !field.is_zero() {
                field.gradient(x, &mut g);
                for k in 0..d {
                    force[k] -= w * g[k];
                }
            }
        }
    }

    pub(crate) fn potential_gradient_weighted(&self, x: &[f64], wl: f64, ws: f64, out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        let mut g = vec![0.0; d];
        for (w, field) in [
            (wl, &self.potential.long_range),
            (ws, &self.potential.short_range),
        ] {
            if w != 0.0 && !field.is_zero() {
                field.gradient(x, &mut g);
                for k in 0..d {
                    out[k] += w * g[k];
                }
            }
        }
    }

    pub(crate) fn potential_hessian_weighted(&self, x: &[f64], wl: f64, ws: f64, out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        let mut h = vec![0.0; d * d];
        for (w, field) in [
            (wl, &self.potential.long_range),
            (ws, &self.potential.short_range),
        ] {
            if w != 0.0 && !field.is_zero() {
                field.hessian(x, &mut h);
                for k in 0..d * d {
                    out[k] += w * h[k];
                }
            }
        }
    }

    /// `k(x, xi) = 1/2 sum a_mn(x) xi_m xi_n`.
    pub fn eval_kinetic(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        self.check(x, xi)?;
        Ok(self.kinetic_unchecked(x, xi))
    }

    pub fn eval_symbol(&self, x: &[f64], xi: &[f64], variant: SymbolVariant) -> Result<f64> {
        self.check(x, xi)?;
        let (wl, ws) = variant.weights();
        Ok(self.symbol_weighted(x, xi, wl, ws))
    }

    /// Hamilton vector field `(d_xi p, -d_x p)` of the chosen symbol.
    pub fn hamilton_field(
        &self,
        x: &[f64],
        xi: &[f64],
        variant: SymbolVariant,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(x, xi)?;
        let d = self.dim();
        let (wl, ws) = variant.weights();
        let mut vel = vec![0.0; d];
        let mut force = vec![0.0; d];
        self.field_weighted(x, xi, wl, ws, &mut vel, &mut force);
        Ok((vel, force))
    }
}

pub(crate) fn quadratic_form(a: &[f64], v: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for m in 0..d {
        let mut row = 0.0;
        for n in 0..d {
            row += a[m * d + n] * v[n];
        }
        s += v[m] * row;
    }
    0.5 * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_homogeneous_1d() -> SymbolModel {
        let v = HomogeneousPotential::new(1, 1.0, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        SymbolModel::new(Arc::new(FlatMetric::new(1)), PotentialSpec::homogeneous(v)).unwrap()
    }

    #[test]
    fn flat_kinetic_values() {
        let m = SymbolModel::free(2);
        assert_eq!(m.eval_kinetic(&[3.0, -1.0], &[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(m.eval_kinetic(&[3.0, -1.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn conformal_kinetic_at_origin() {
        let m = SymbolModel::new(
            Arc::new(ConformalDecayMetric::new(2, 1.0, 1.0)),
            PotentialSpec::zero(2, 1.0, 2.0),
        )
        .unwrap();
        assert_eq!(m.eval_kinetic(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        let m = SymbolModel::free(1);
        assert!(matches!(
            m.eval_kinetic(&[f64::NAN], &[1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            m.eval_symbol(&[0.0], &[f64::INFINITY], SymbolVariant::Full),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn variants_agree_without_potential() {
        let m = SymbolModel::free(2);
        let x = [0.3, 2.0];
        let xi = [-1.0, 0.5];
        let k = m.eval_kinetic(&x, &xi).unwrap();
        for v in [
            SymbolVariant::Full,
            SymbolVariant::Kinetic,
            SymbolVariant::LongRange,
        ] {
            assert_eq!(m.eval_symbol(&x, &xi, v).unwrap(), k);
        }
    }

    #[test]
    fn long_range_symbol_in_homogeneous_region() {
        let m = unit_homogeneous_1d();
        assert_eq!(
            m.eval_symbol(&[2.0], &[1.0], SymbolVariant::LongRange)
                .unwrap(),
            2.5
        );
    }

    #[test]
    fn free_and_linear_fields() {
        let m = SymbolModel::free(2);
        let (v, f) = m
            .hamilton_field(&[1.0, 2.0], &[0.5, -0.25], SymbolVariant::Full)
            .unwrap();
        assert_eq!(v, vec![0.5, -0.25]);
        assert_eq!(f, vec![0.0, 0.0]);
        let m = unit_homogeneous_1d();
        let (v, f) = m
            .hamilton_field(&[2.0], &[0.7], SymbolVariant::Full)
            .unwrap();
        assert_eq!(v, vec![0.7]);
        assert_eq!(f, vec![-1.0]);
    }

    #[test]
    fn model_rejects_dimension_mismatch() {
        let v = HomogeneousPotential::new(1, 1.0, 1.0, AngularProfile::Constant { value: 1.0 })
            .unwrap();
        assert!(
            SymbolModel::new(Arc::new(FlatMetric::new(2)), PotentialSpec::homogeneous(v)).is_err()
        );
    }
}
