use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{GridState, Spectral};
use crate::dollard_phase::{leading_coefficient, PhaseFunction};
use crate::error::{Error, Result};
use crate::symbols::PotentialSpec;

/// Real symbol `F` tabulated on a frequency lattice; applied as `e^(i F(D))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSpec {
    pub label: String,
    sizes: Vec<usize>,
    extent: Vec<f64>,
    values: Vec<f64>,
}

impl MultiplierSpec {
    pub fn tabulate(
        grid: &GridState,
        label: &str,
        f: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Self> {
        Self::try_tabulate(grid, label, |k| Ok(f(k)))
    }

    pub fn try_tabulate(
        grid: &GridState,
        label: &str,
        f: impl Fn(&[f64]) -> Result<f64> + Sync,
    ) -> Result<Self> {
        let d = grid.dim();
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut k = vec![0.0; d];
                grid.frequency_into(i, &mut k);
                let v = f(&k)?;
                if !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "multiplier {label} is not finite at {k:?}"
                    )));
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            label: label.into(),
            sizes: grid.sizes().to_vec(),
            extent: grid.extent().to_vec(),
            values,
        })
    }

    pub fn identity(grid: &GridState) -> Self {
        Self {
            label: "0".into(),
            sizes: grid.sizes().to_vec(),
            extent: grid.extent().to_vec(),
            values: vec![0.0; grid.len()],
        }
    }

    /// `t |xi|^2 / 2`; `e^(i F(D))` is then `e^(i t H_0)`.
    pub fn free(grid: &GridState, t: f64) -> Result<Self> {
        Self::tabulate(grid, "t|xi|^2/2", |k| {
            0.5 * t * k.iter().map(|v| v * v).sum::<f64>()
        })
    }

    /// `-a . xi`, the translation `u -> u(. - a)`.
    pub fn translation(grid: &GridState, a: &[f64]) -> Result<Self> {
        if a.len() != grid.dim() {
            return Err(Error::Lattice(
                "translation vector has the wrong dimension".into(),
            ));
        }
        Self::tabulate(grid, "translation", |k| {
            -k.iter().zip(a).map(|(x, y)| x * y).sum::<f64>()
        })
    }

    /// `Phi(t, xi)` from quadrature.
    pub fn dollard(grid: &GridState, pf: &PhaseFunction, t: f64) -> Result<Self> {
        check_dim(grid, pf.model().dim())?;
        Self::try_tabulate(grid, "Phi(t,xi)", |k| pf.phase(t, k))
    }

    /// `sign sigma V^(L)(sign xi)` with the long-range potential read as a
    /// function of the frequency.
    pub fn long_range(
        grid: &GridState,
        potential: &PotentialSpec,
        sigma: f64,
        sign: f64,
    ) -> Result<Self> {
        check_dim(grid, potential.dim())?;
        let s = if sign < 0.0 { -1.0 } else { 1.0 };
        let v = potential.long_range();
        Self::tabulate(grid, "sigma V(xi)", |k| {
            let ks: Vec<f64> = k.iter().map(|c| s * c).collect();
            s * sigma * v.value(&ks)
        })
    }

    /// `F(t, xi) = Phi(t, xi) - t |xi|^2 / 2 - sign(t) sigma(|t|) V^(L)(sign(t) xi)`.
    pub fn correction(grid: &GridState, pf: &PhaseFunction, t: f64) -> Result<Self> {
        check_dim(grid, pf.model().dim())?;
        let potential = pf.model().potential();
        let beta = potential.homogeneous_part().map_or(1.0, |h| h.degree());
        let s = if t < 0.0 { -1.0 } else { 1.0 };
        let sigma = leading_coefficient(beta, t.abs());
        let v = potential.long_range();
        Self::try_tabulate(grid, "F(t,xi)", |k| {
            let ks: Vec<f64> = k.iter().map(|c| s * c).collect();
            let k2: f64 = k.iter().map(|c| c * c).sum();
            Ok(pf.phase(t, k)? - 0.5 * t * k2 - s * sigma * v.value(&ks))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn negated(&self) -> Self {
        Self {
            label: format!("-({})", self.label),
            sizes: self.sizes.clone(),
            extent: self.extent.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Symbol of the product `e^(i F) e^(i G)`.
    pub fn compose(&self, other: &MultiplierSpec) -> Result<Self> {
        if self.sizes != other.sizes || self.extent != other.extent {
            return Err(Error::Lattice(
                "multipliers tabulated on different lattices".into(),
            ));
        }
        Ok(Self {
            label: format!("{} + {}", self.label, other.label),
            sizes: self.sizes.clone(),
            extent: self.extent.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    fn check_lattice(&self, u: &GridState) -> Result<()> {
        if self.sizes != u.sizes() || self.extent != u.extent() {
            return Err(Error::Lattice(format!(
                "multiplier {} tabulated on {:?} x {:?}, state lives on {:?} x {:?}",
                self.label,
                self.sizes,
                self.extent,
                u.sizes(),
                u.extent()
            )));
        }
        Ok(())
    }
}

fn check_dim(grid: &GridState, dim: usize) -> Result<()> {
    if grid.dim() != dim {
        return Err(Error::Lattice(format!(
            "grid has {} axes, model has {dim}",
            grid.dim()
        )));
    }
    Ok(())
}

pub(crate) fn apply_in_place(sp: &Spectral, data: &mut [Complex64], values: &[f64]) {
    sp.forward(data);
    for (z, f) in data.iter_mut().zip(values) {
        *z *= Complex64::from_polar(1.0, *f);
    }
    sp.inverse(data);
}

/// `e^(i F(D)) u`.
pub fn apply_multiplier(u: &GridState, spec: &MultiplierSpec) -> Result<GridState> {
    spec.check_lattice(u)?;
    let sp = Spectral::new(u);
    let mut data = u.data().to_vec();
    apply_in_place(&sp, &mut data, &spec.values);
    u.with_data(data)
}

/// Applies several multipliers in order, right to left as operators:
/// `chain = [A, B]` computes `e^(iB) e^(iA) u`.
pub fn apply_chain(u: &GridState, chain: &[&MultiplierSpec]) -> Result<GridState> {
    let sp = Spectral::new(u);
    let mut data = u.data().to_vec();
    sp.forward(&mut data);
    for spec in chain {
        spec.check_lattice(u)?;
        for (z, f) in data.iter_mut().zip(&spec.values) {
            *z *= Complex64::from_polar(1.0, *f);
        }
    }
    sp.inverse(&mut data);
    u.with_data(data)
}
