use super::potential::{unit_samples, ScalarField};
use super::SymbolModel;
use crate::fit::loglog_slope;

/// Radial shells on which the decay bounds are sampled.
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub r_min: f64,
    pub r_max: f64,
    pub shells: usize,
    pub directions: usize,
    /// Only shells with `r >= fit_from` enter the slope regression.
    pub fit_from: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            r_min: 1.0,
            r_max: 1e3,
            shells: 25,
            directions: 16,
            fit_from: 10.0,
        }
    }
}

impl SampleBox {
    fn radii(&self) -> Vec<f64> {
        let n = self.shells.max(2);
        let (a, b) = (self.r_min.ln(), self.r_max.ln());
        (0..n)
            .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayEntry {
    /// `metric`, `long_range` or `short_range`.
    pub component: &'static str,
    pub order: usize,
    /// Smallest constant making the bound hold on the samples.
    pub constant: f64,
    /// Fitted log-log slope of the shell supremum against `<x>`; `None` when
    /// the derivative vanishes on the fitting shells.
    pub slope: Option<f64>,
    /// Exponent the bound prescribes.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub entries: Vec<DecayEntry>,
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
    pub pass: bool,
}

const SLOPE_SLACK: f64 = 0.1;

fn jap(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Metric derivatives of order 0..=3 at `x`, as `a - identity` for order 0.
fn metric_derivative(model: &SymbolModel, x: &[f64], order: usize) -> f64 {
    let metric = model.metric();
    let d = metric.dim();
    match order {
        0 => {
            let mut a = vec![0.0; d * d];
            metric.coefficients(x, &mut a);
            for i in 0..d {
                a[i * d + i] -= 1.0;
            }
            max_abs(&a)
        }
        1 => {
            let mut g = vec![0.0; d * d * d];
            metric.gradient(x, &mut g);
            max_abs(&g)
        }
        2 => {
            let mut h = vec![0.0; d.pow(4)];
            metric.hessian(x, &mut h);
            max_abs(&h)
        }
        _ => {
            let block = d.pow(4);
            let mut hp = vec![0.0; block];
            let mut hm = vec![0.0; block];
            let mut xp = x.to_vec();
            let mut worst = 0.0f64;
            for l in 0..d {
                let h = 1e-4 * x[l].abs().max(1.0);
                xp[l] = x[l] + h;
                metric.hessian(&xp, &mut hp);
                xp[l] = x[l] - h;
                metric.hessian(&xp, &mut hm);
                xp[l] = x[l];
                for i in 0..block {
                    worst = worst.max(((hp[i] - hm[i]) / (2.0 * h)).abs());
                }
            }
            worst
        }
    }
}

fn field_derivative(field: &dyn ScalarField, x: &[f64], order: usize) -> f64 {
    let d = field.dim();
    match order {
        0 => field.value(x).abs(),
        1 => {
            let mut g = vec![0.0; d];
            field.gradient(x, &mut g);
            max_abs(&g)
        }
        2 => {
            let mut h = vec![0.0; d * d];
            field.hessian(x, &mut h);
            max_abs(&h)
        }
        _ => {
            let mut t = vec![0.0; d * d * d];
            field.third(x, &mut t);
            max_abs(&t)
        }
    }
}

fn assess<F>(
    component: &'static str,
    order: usize,
    bound: f64,
    samples: &SampleBox,
    dirs: &[Vec<f64>],
    eval: F,
) -> DecayEntry
where
    F: Fn(&[f64]) -> f64,
{
    let mut constant = 0.0f64;
    let mut fit_r = Vec::new();
    let mut fit_v = Vec::new();
    for r in samples.radii() {
        let weight = jap(r).powf(bound);
        let sup = dirs
            .iter()
            .map(|u| {
                let x: Vec<f64> = u.iter().map(|c| c * r).collect();
                eval(&x)
            })
            .fold(0.0f64, f64::max);
        constant = constant.max(sup / weight);
        // Values at rounding level carry no slope information.
        if r >= samples.fit_from && sup > 1e-9 * weight {
            fit_r.push(jap(r));
            fit_v.push(sup);
        }
    }
    let slope = loglog_slope(&fit_r, &fit_v, 0.0).map(|f| f.slope);
    let pass = constant.is_finite() && slope.is_none_or(|s| s <= bound + SLOPE_SLACK);
    DecayEntry {
        component,
        order,
        constant,
        slope,
        bound,
        pass,
    }
}

/// Samples the metric and potential decay bounds up to derivative order
/// `max_order` (at most 3) and checks positive definiteness of the metric.
pub fn verify_decay(model: &SymbolModel, samples: &SampleBox, max_order: usize) -> DecayReport {
    let d = model.dim();
    let dirs = unit_samples(d, samples.directions);
    let mu = model.mu();
    let nu = model.nu();
    let mut entries = Vec::new();
    for order in 0..=max_order.min(3) {
        let o = order as f64;
        let metric_mu = model.metric().decay_exponent();
        entries.push(assess(
            "metric",
            order,
            -metric_mu - o,
            samples,
            &dirs,
            |x| metric_derivative(model, x, order),
        ));
        let lr = model.potential().long_range();
        entries.push(assess(
            "long_range",
            order,
            2.0 - mu - o,
            samples,
            &dirs,
            |x| field_derivative(lr, x, order),
        ));
        let sr = model.potential().short_range();
        entries.push(assess(
            "short_range",
            order,
            2.0 - nu - o,
            samples,
            &dirs,
            |x| field_derivative(sr, x, order),
        ));
    }

    let mut min_eigenvalue = model.metric().min_eigenvalue(&vec![0.0; d]);
    for r in samples.radii() {
        for u in &dirs {
            let x: Vec<f64> = u.iter().map(|c| c * r).collect();
            min_eigenvalue = min_eigenvalue.min(model.metric().min_eigenvalue(&x));
        }
    }
    let positive_definite = min_eigenvalue > 0.0;
    let pass =
        positive_definite && model.potential().is_admissible() && entries.iter().all(|e| e.pass);
    DecayReport {
        entries,
        min_eigenvalue,
        positive_definite,
        pass,
    }
}
