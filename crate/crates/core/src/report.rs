//! CSV report writers with a fixed column order and deterministic number
//! formatting, so identical runs produce byte-identical files.

use std::io::Write;

use crate::error::Result;
use crate::screen::ExperimentRow;
use crate::trace::{CdfPoint, DeltaSigmaPoint, HistBin, RegressionFit};

/// Shortest round-trip decimal form; stable across runs and platforms.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Render e^ln_value even when it overflows f64, as mantissa-exponent
/// scientific notation derived from the log.
pub fn fmt_from_ln(ln_value: f64) -> String {
    if ln_value == f64::NEG_INFINITY {
        return "0".to_string();
    }
    // comfortably inside f64 range: print the plain value
    if ln_value.abs() < 700.0 {
        return fmt_f64(ln_value.exp());
    }
    let log10 = ln_value / std::f64::consts::LN_10;
    let mut exp10 = log10.floor() as i64;
    let mut mantissa = 10f64.powf(log10 - exp10 as f64);
    // rounding at the print precision can push the mantissa to 10.0
    if format!("{mantissa:.9}").starts_with("10") {
        mantissa /= 10.0;
        exp10 += 1;
    }
    format!("{mantissa:.9}e{exp10}")
}

pub const EXPERIMENT_HEADER: &str =
    "seed,L_total,N_composite,N_product,log_ratio,delta_hat,premise_violations";

pub fn write_experiment_csv<W: Write>(mut w: W, rows: &[ExperimentRow]) -> Result<()> {
    writeln!(w, "{EXPERIMENT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.seed,
            r.l_total,
            fmt_from_ln(r.ln_n_composite),
            fmt_from_ln(r.ln_n_product),
            fmt_f64(r.log_ratio),
            fmt_f64(r.delta_hat),
            r.premise_violations
        )?;
    }
    Ok(())
}

pub fn write_cdf_csv<W: Write>(mut w: W, points: &[CdfPoint]) -> Result<()> {
    writeln!(w, "ratio,cdf,censored")?;
    for p in points {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(p.ratio),
            fmt_f64(p.cdf),
            u8::from(p.censored)
        )?;
    }
    Ok(())
}

pub fn write_regression_csv<W: Write>(mut w: W, fit: Option<&RegressionFit>) -> Result<()> {
    writeln!(w, "slope,intercept,slope_ci_low,slope_ci_high,n_pairs")?;
    if let Some(f) = fit {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(f.slope),
            fmt_f64(f.intercept),
            fmt_f64(f.slope_lo),
            fmt_f64(f.slope_hi),
            f.n_points
        )?;
    }
    Ok(())
}

pub fn write_noise_hist_csv<W: Write>(mut w: W, bins: &[HistBin]) -> Result<()> {
    writeln!(w, "bin_low,bin_high,count,density")?;
    for b in bins {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(b.lo),
            fmt_f64(b.hi),
            b.count,
            fmt_f64(b.density)
        )?;
    }
    Ok(())
}

pub fn write_delta_sigma_csv<W: Write>(mut w: W, points: &[DeltaSigmaPoint]) -> Result<()> {
    writeln!(
        w,
        "epsilon,delta,delta_lo,delta_hi,sigma,sigma_lo,sigma_hi"
    )?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_f64(p.epsilon),
            fmt_f64(p.delta),
            fmt_f64(p.delta_lo),
            fmt_f64(p.delta_hi),
            fmt_f64(p.sigma),
            fmt_f64(p.sigma_lo),
            fmt_f64(p.sigma_hi)
        )?;
    }
    Ok(())
}
