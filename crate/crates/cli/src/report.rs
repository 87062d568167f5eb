//! CSV writers.

use std::io::Write;

use apkin_core::phase_space::MomentState;
use apkin_core::stability::{StabilityError, StabilityReport, CSV_HEADER};

use crate::driver::ConvergenceStudy;

pub type CsvResult = Result<(), csv::Error>;

/// Scheme analysis table, one record per scheme. Schemes that could not be analyzed
/// are listed with the error in place of the verdicts.
pub fn write_analysis(
    w: impl Write,
    rows: &[(String, Result<StabilityReport, StabilityError>)],
) -> CsvResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for (name, r) in rows {
        match r {
            Ok(rep) => out.write_record(rep.csv_record())?,
            Err(e) => {
                let mut rec = vec![name.clone(), format!("error: {e}")];
                rec.resize(CSV_HEADER.len(), String::new());
                out.write_record(rec)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Human readable version of the analysis table.
pub fn format_analysis(rows: &[(String, Result<StabilityReport, StabilityError>)]) -> String {
    let mut s = String::new();
    for (name, r) in rows {
        match r {
            Ok(rep) => {
                let rec = rep.csv_record();
                s.push_str(&format!(
                    "{name:<16} {:<3} GSA={:<3} AA={:<3} AA-c={:<3} AM={:<10} weak-AP={}\n",
                    rec[1], rec[2], rec[3], rec[4], rec[5], rec[6]
                ));
            }
            Err(e) => s.push_str(&format!("{name:<16} error: {e}\n")),
        }
    }
    s
}

pub const MOMENT_HEADER: [&str; 7] = ["step", "t", "x", "rho", "u_x", "u_y", "T"];

/// Appends the cell moments at one time level.
pub fn write_moments<W: Write>(
    out: &mut csv::Writer<W>,
    step: usize,
    t: f64,
    centers: &[f64],
    m: &[MomentState],
) -> CsvResult {
    for (x, m) in centers.iter().zip(m) {
        let u = m.velocity();
        out.write_record([
            step.to_string(),
            format!("{t:.12e}"),
            format!("{x:.12e}"),
            format!("{:.15e}", m.rho),
            format!("{:.15e}", u[0]),
            format!("{:.15e}", u[1]),
            format!("{:.15e}", m.temperature()),
        ])?;
    }
    Ok(())
}

pub const CONVERGENCE_HEADER: [&str; 4] = ["scheme", "nx", "l1_density_error", "order"];

pub fn write_convergence(w: impl Write, studies: &[ConvergenceStudy]) -> CsvResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CONVERGENCE_HEADER)?;
    for s in studies {
        for r in &s.rows {
            out.write_record([
                s.scheme.clone(),
                r.nx.to_string(),
                format!("{:.10e}", r.error),
                r.order.map(|o| format!("{o:.6}")).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
