use std::io::Write;

use rayon::prelude::*;

use super::PhaseFunction;
use crate::error::Result;

/// Phase values `Phi(t, xi)` at the given frequencies, in input order.
pub fn phase_table(pf: &PhaseFunction, t: f64, frequencies: &[Vec<f64>]) -> Result<Vec<f64>> {
    frequencies.par_iter().map(|xi| pf.phase(t, xi)).collect()
}

/// Writes `xi_1..xi_d, phase` rows as CSV.
pub fn write_phase_table<W: Write>(out: W, frequencies: &[Vec<f64>], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = frequencies.first().map_or(1, |f| f.len());
    let mut header: Vec<String> = (1..=d).map(|k| format!("xi_{k}")).collect();
    header.push("phase".into());
    w.write_record(&header)?;
    for (xi, v) in frequencies.iter().zip(values) {
        let mut row: Vec<String> = xi.iter().map(|c| format!("{c:.16e}")).collect();
        row.push(format!("{v:.16e}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
