use num_complex::Complex64;

use super::grid::{GridState, Spectral};
use super::multiplier::{apply_multiplier, MultiplierSpec};
use crate::error::{Error, Result};
use crate::symbols::PotentialSpec;

/// Edge mass above which weighted norms are considered unreliable.
const EDGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingNorms {
    /// Sobolev order `(beta - 1) N`.
    pub s: f64,
    /// `|| <x>^-N e^(i sigma V(D)) u ||_(H^s)`.
    pub weighted_sobolev: f64,
    /// `|| <x>^N u ||`.
    pub weighted_input: f64,
    pub ratio: f64,
}

/// `H^s` norm with the spectral weight `<xi>^s`.
pub fn sobolev_norm(u: &GridState, s: f64) -> f64 {
    let sp = Spectral::new(u);
    let mut data = u.data().to_vec();
    sp.forward(&mut data);
    let mut k = vec![0.0; u.dim()];
    let mut sum = 0.0;
    for (i, z) in data.iter().enumerate() {
        u.frequency_into(i, &mut k);
        let jap2 = 1.0 + k.iter().map(|c| c * c).sum::<f64>();
        sum += jap2.powf(s) * z.norm_sqr();
    }
    (sum * u.cell_volume() / u.len() as f64).sqrt()
}

fn weighted(u: &GridState, power: f64) -> Result<GridState> {
    let mut x = vec![0.0; u.dim()];
    let data: Vec<Complex64> = u
        .data()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            u.point_into(i, &mut x);
            let jap2 = 1.0 + x.iter().map(|c| c * c).sum::<f64>();
            z * jap2.powf(0.5 * power)
        })
        .collect();
    u.with_data(data)
}

/// Both sides of the weighted smoothing estimate for
/// `e^(i sigma V^(L)(D))`, with `s = (beta - 1) N`.
pub fn smoothing_norms(
    u: &GridState,
    potential: &PotentialSpec,
    sigma: f64,
    n_weight: u32,
) -> Result<SmoothingNorms> {
    let beta = potential
        .homogeneous_part()
        .map(|h| h.degree())
        .ok_or_else(|| {
            Error::Precondition("smoothing norms need a homogeneous long-range potential".into())
        })?;
    let edge = u.edge_mass_fraction(0.1);
    if edge > EDGE_TOLERANCE {
        return Err(Error::Boundary(format!(
            "{edge:.3e} of the mass lies in the outer 10% of the lattice"
        )));
    }
    let s = (beta - 1.0) * n_weight as f64;
    let n = n_weight as f64;
    let moved = apply_multiplier(u, &MultiplierSpec::long_range(u, potential, sigma, 1.0)?)?;
    let weighted_sobolev = sobolev_norm(&weighted(&moved, -n)?, s);
    let weighted_input = weighted(u, n)?.norm();
    Ok(SmoothingNorms {
        s,
        weighted_sobolev,
        weighted_input,
        ratio: weighted_sobolev / weighted_input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{AngularProfile, HomogeneousPotential};

    fn gaussian(x0: f64) -> GridState {
        gaussian_width(x0, 0.35, 10.0)
    }

    fn gaussian_width(x0: f64, w: f64, l: f64) -> GridState {
        let mut g = GridState::from_fn(&[512], &[l], |x| {
            Complex64::new((-(x[0] - x0).powi(2) / (2.0 * w * w)).exp(), 0.0)
        })
        .unwrap();
        g.normalize().unwrap();
        g
    }

    fn spec(beta: f64) -> PotentialSpec {
        PotentialSpec::homogeneous(
            HomogeneousPotential::new(1, beta, 1.0, AngularProfile::Constant { value: 1.0 })
                .unwrap(),
        )
    }

    #[test]
    fn plane_wave_sobolev_weight() {
        let g = GridState::from_fn(&[64], &[2.0 * std::f64::consts::PI], |x| {
            Complex64::from_polar(1.0, 5.0 * x[0])
        })
        .unwrap();
        let expected = g.norm() * 26f64.powf(0.5);
        assert!((sobolev_norm(&g, 1.0) - expected).abs() < 1e-10);
    }

    #[test]
    fn zero_sigma_ratio_at_most_one() {
        for n in [1, 2] {
            let r = smoothing_norms(&gaussian_width(0.0, 1.0, 20.0), &spec(1.25), 0.0, n).unwrap();
            assert!((r.s - 0.25 * n as f64).abs() < 1e-15);
            assert!(r.ratio <= 1.0, "{r:?}");
        }
    }

    #[test]
    fn translates_stay_bounded() {
        let ratios: Vec<f64> = (0..10)
            .map(|k| {
                let x0 = -2.5 + 5.0 * k as f64 / 9.0;
                smoothing_norms(&gaussian(x0), &spec(1.25), 0.3, 2)
                    .unwrap()
                    .ratio
            })
            .collect();
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1e2, "{ratios:?}");
    }

    #[test]
    fn boundary_mass_rejected() {
        assert!(matches!(
            smoothing_norms(&gaussian(4.8), &spec(1.25), 0.1, 1),
            Err(Error::Boundary(_))
        ));
    }
}
