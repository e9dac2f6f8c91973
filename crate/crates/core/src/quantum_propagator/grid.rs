use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Complex amplitudes on a uniform periodic lattice with `n` points per axis
/// covering `[-L/2, L/2)`. Storage is row-major, the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    n: Vec<usize>,
    extent: Vec<f64>,
    data: Vec<Complex64>,
}

impl GridState {
    pub fn zeros(n: &[usize], extent: &[f64]) -> Result<Self> {
        if n.is_empty() || n.len() > 2 || n.len() != extent.len() {
            return Err(Error::Configuration(format!(
                "grids have one or two axes with one extent each, got {} sizes and {} extents",
                n.len(),
                extent.len()
            )));
        }
        for (&m, &l) in n.iter().zip(extent) {
            if m < 4 || !m.is_power_of_two() {
                return Err(Error::Configuration(format!(
                    "axis size must be a power of two >= 4, got {m}"
                )));
            }
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Configuration(format!(
                    "axis extent must be positive, got {l}"
                )));
            }
        }
        Ok(Self {
            n: n.to_vec(),
            extent: extent.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); n.iter().product()],
        })
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn(n: &[usize], extent: &[f64], f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let mut g = Self::zeros(n, extent)?;
        let mut x = vec![0.0; n.len()];
        for idx in 0..g.data.len() {
            g.point_into(idx, &mut x);
            g.data[idx] = f(&x);
        }
        Ok(g)
    }

    /// Same lattice, new amplitudes.
    pub fn with_data(&self, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::Lattice(format!(
                "{} amplitudes for a lattice of {} points",
                data.len(),
                self.data.len()
            )));
        }
        Ok(Self {
            n: self.n.clone(),
            extent: self.extent.clone(),
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.n
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.n[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Frequency spacing `2 pi / L` of an axis.
    pub fn frequency_step(&self, axis: usize) -> f64 {
        2.0 * PI / self.extent[axis]
    }

    /// Largest representable frequency `pi n / L` of an axis.
    pub fn nyquist(&self, axis: usize) -> f64 {
        PI / self.spacing(axis)
    }

    pub fn positions(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.n[axis])
            .map(|j| -0.5 * self.extent[axis] + j as f64 * h)
            .collect()
    }

    pub fn frequencies(&self, axis: usize) -> Vec<f64> {
        let m = self.n[axis];
        let dk = self.frequency_step(axis);
        (0..m)
            .map(|j| {
                if j < m / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - m as f64) * dk
                }
            })
            .collect()
    }

    pub(crate) fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [idx, 0]
        } else {
            [idx / self.n[1], idx % self.n[1]]
        }
    }

    pub(crate) fn point_into(&self, idx: usize, x: &mut [f64]) {
        let mi = self.multi_index(idx);
        for (a, xa) in x.iter_mut().enumerate() {
            *xa = -0.5 * self.extent[a] + mi[a] as f64 * self.spacing(a);
        }
    }

    pub(crate) fn frequency_into(&self, idx: usize, k: &mut [f64]) {
        let mi = self.multi_index(idx);
        for (a, ka) in k.iter_mut().enumerate() {
            let m = self.n[a];
            let j = mi[a] as f64;
            *ka = if mi[a] < m / 2 { j } else { j - m as f64 } * self.frequency_step(a);
        }
    }

    /// Coordinates of every lattice point in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut x = vec![0.0; self.dim()];
        (0..self.len())
            .map(|i| {
                self.point_into(i, &mut x);
                x.clone()
            })
            .collect()
    }

    /// Frequency of every Fourier mode in storage order.
    pub fn frequency_points(&self) -> Vec<Vec<f64>> {
        let mut k = vec![0.0; self.dim()];
        (0..self.len())
            .map(|i| {
                self.frequency_into(i, &mut k);
                k.clone()
            })
            .collect()
    }

    pub fn same_lattice(&self, other: &GridState) -> Result<()> {
        if self.n != other.n || self.extent != other.extent {
            return Err(Error::Lattice(format!(
                "lattice {:?} x {:?} differs from {:?} x {:?}",
                self.n, self.extent, other.n, other.extent
            )));
        }
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other> = sum conj(self) other dx`.
    pub fn inner(&self, other: &GridState) -> Result<Complex64> {
        self.same_lattice(other)?;
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.cell_volume())
    }

    /// L2 norm of `self - other`.
    pub fn distance(&self, other: &GridState) -> Result<f64> {
        self.same_lattice(other)?;
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.cell_volume()).sqrt())
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.data {
            *z *= c;
        }
    }

    /// Rescales to unit norm.
    pub fn normalize(&mut self) -> Result<()> {
        let nrm = self.norm();
        if !(nrm > 0.0) {
            return Err(Error::Domain("cannot normalize a zero state".into()));
        }
        self.scale(Complex64::new(1.0 / nrm, 0.0));
        Ok(())
    }

    /// Fraction of the squared norm in the outer `fraction` of each axis.
    pub fn edge_mass_fraction(&self, fraction: f64) -> f64 {
        let total: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut x = vec![0.0; self.dim()];
        let mut edge = 0.0;
        for (i, z) in self.data.iter().enumerate() {
            self.point_into(i, &mut x);
            let outside = x
                .iter()
                .zip(&self.extent)
                .any(|(xa, l)| xa.abs() >= 0.5 * l * (1.0 - fraction));
            if outside {
                edge += z.norm_sqr();
            }
        }
        edge / total
    }

    /// Writes the binary container: `d`, the sizes and the extents as
    /// little-endian 64-bit fields, then interleaved real and imaginary parts.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.dim() as u64).to_le_bytes())?;
        for &m in &self.n {
            out.write_all(&(m as u64).to_le_bytes())?;
        }
        for &l in &self.extent {
            out.write_all(&l.to_le_bytes())?;
        }
        for z in &self.data {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut buf)?;
            Ok(buf)
        };
        let d = u64::from_le_bytes(next(&mut input)?) as usize;
        if d == 0 || d > 2 {
            return Err(Error::Lattice(format!("container declares {d} axes")));
        }
        let mut n = Vec::with_capacity(d);
        for _ in 0..d {
            n.push(u64::from_le_bytes(next(&mut input)?) as usize);
        }
        let mut extent = Vec::with_capacity(d);
        for _ in 0..d {
            extent.push(f64::from_le_bytes(next(&mut input)?));
        }
        let mut g = Self::zeros(&n, &extent)?;
        for z in g.data.iter_mut() {
            let re = f64::from_le_bytes(next(&mut input)?);
            let im = f64::from_le_bytes(next(&mut input)?);
            *z = Complex64::new(re, im);
        }
        Ok(g)
    }

    /// `|u|^2` integrated over all other axes, one CSV row per lattice
    /// coordinate: `axis, x, density`.
    pub fn write_marginals<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["axis", "x", "density"])?;
        for axis in 0..self.dim() {
            let mut dens = vec![0.0; self.n[axis]];
            for (i, z) in self.data.iter().enumerate() {
                dens[self.multi_index(i)[axis]] += z.norm_sqr();
            }
            let other: f64 = (0..self.dim())
                .filter(|a| *a != axis)
                .map(|a| self.spacing(a))
                .product();
            for (x, d) in self.positions(axis).iter().zip(&dens) {
                w.write_record(&[
                    (axis + 1).to_string(),
                    format!("{x:.16e}"),
                    format!("{:.16e}", d * other),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// FFT plans for one lattice shape.
pub(crate) struct Spectral {
    n: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl Spectral {
    pub(crate) fn new(grid: &GridState) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: grid.n.clone(),
            forward: grid
                .n
                .iter()
                .map(|&m| planner.plan_fft_forward(m))
                .collect(),
            inverse: grid
                .n
                .iter()
                .map(|&m| planner.plan_fft_inverse(m))
                .collect(),
        }
    }

    fn run(&self, plans: &[Arc<dyn Fft<f64>>], data: &mut [Complex64]) {
        if self.n.len() == 1 {
            plans[0].process(data);
            return;
        }
        let (rows, cols) = (self.n[0], self.n[1]);
        plans[1].process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = data[r * cols + c];
            }
            plans[0].process(&mut column);
            for r in 0..rows {
                data[r * cols + c] = column[r];
            }
        }
    }

    /// Unnormalized forward transform `sum_j u_j e^(-i k x_j)` up to the
    /// constant phase of the lattice origin.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Inverse of [`forward`](Self::forward), including the `1/N` factor.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}
