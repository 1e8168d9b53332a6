//! Artifact writers: `rates.csv`, `summary.json` and `plot.gp`.
//!
//! Numbers are written with 17 significant digits so identical runs produce
//! byte-identical CSV and JSON. Only `plot.gp` carries a timestamp, in a
//! comment line.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::harness::ConvergenceReport;

/// Serialize one float with full precision (17 significant digits).
pub fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

/// Render the per-eps table: columns `eps, horizon, err2p, stderr`, then one
/// capacity column per probe.
pub fn rates_csv(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str("eps,horizon,err2p,stderr");
    for probe in &report.probes_delta2 {
        out.push_str(&format!(",capacity@{probe}"));
    }
    out.push('\n');
    for row in &report.rows {
        out.push_str(&full_precision(row.eps));
        out.push(',');
        out.push_str(&full_precision(row.horizon));
        out.push(',');
        out.push_str(&full_precision(row.err2p));
        out.push(',');
        out.push_str(&full_precision(row.stderr));
        for cap in &row.capacity {
            out.push(',');
            out.push_str(&full_precision(*cap));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct SummaryFlags {
    pub monotone_err2p: bool,
    pub slope_floor: bool,
    pub capacity_halved: bool,
    pub capacity_chebyshev: bool,
    pub step_checks: bool,
    pub all: bool,
}

#[derive(Debug, Serialize)]
pub struct DeviationDiagnostics {
    /// State at which the deviations are evaluated.
    pub x: f64,
    /// Averaging horizons probed.
    pub t1: Vec<f64>,
    pub dev_f: Vec<f64>,
    pub dev_g: Vec<f64>,
    pub dev_sigma_sq: Vec<f64>,
    pub note: String,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub version: String,
    pub preset: String,
    pub seed: u64,
    pub p: f64,
    pub alpha: f64,
    pub horizon_scale: f64,
    pub eps_list: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub q_raw: f64,
    pub flags: SummaryFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<DeviationDiagnostics>,
}

impl Summary {
    pub fn from_report(
        report: &ConvergenceReport,
        preset: &str,
        seed: u64,
        alpha: f64,
        horizon_scale: f64,
        deviation: Option<DeviationDiagnostics>,
    ) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            preset: preset.to_string(),
            seed,
            p: report.p,
            alpha,
            horizon_scale,
            eps_list: report.rows.iter().map(|r| r.eps).collect(),
            slope: report.slope,
            intercept: report.intercept,
            q_raw: report.q_raw,
            flags: SummaryFlags {
                monotone_err2p: report.flags.monotone_err2p,
                slope_floor: report.flags.slope_floor,
                capacity_halved: report.flags.capacity_halved,
                capacity_chebyshev: report.flags.capacity_chebyshev,
                step_checks: report.flags.step_checks,
                all: report.flags.all(),
            },
            deviation,
        }
    }
}

/// Gnuplot script for the log-log error curve; the generation timestamp sits
/// in a comment line and is the only run-dependent byte.
pub fn plot_script(report: &ConvergenceReport) -> String {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut fit_line = String::new();
    if report.slope.is_finite() && report.intercept.is_finite() {
        fit_line = format!(
            ", exp({intercept}) * x**({slope}) with lines title \"fit slope {slope:.3}\"",
            intercept = report.intercept,
            slope = report.slope,
        );
    }
    format!(
        "# gnuplot script: moment error against the averaging scale\n\
         # generated at unix {stamp}\n\
         set logscale xy\n\
         set xlabel \"eps\"\n\
         set ylabel \"err2p\"\n\
         set datafile separator \",\"\n\
         set key left top\n\
         plot \"rates.csv\" skip 1 using 1:3 with linespoints title \"err2p\"{fit_line}\n"
    )
}

/// Check that the directory exists (creating it if needed) and is writable.
pub fn ensure_writable_dir(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write_probe");
    {
        let mut f = fs::File::create(&probe)?;
        f.write_all(b"ok")?;
    }
    fs::remove_file(&probe)?;
    Ok(())
}

/// Write the three artifacts into `dir`.
pub fn write_artifacts(
    dir: &Path,
    report: &ConvergenceReport,
    summary: &Summary,
) -> std::io::Result<()> {
    fs::write(dir.join("rates.csv"), rates_csv(report))?;
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(dir.join("summary.json"), json + "\n")?;
    fs::write(dir.join("plot.gp"), plot_script(report))?;
    Ok(())
}
