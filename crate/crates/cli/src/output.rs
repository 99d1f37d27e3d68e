//! Deterministic serialization of experiment results: CSV with a `#`
//! metadata block echoing the full configuration, and an optional JSON
//! mirror of the same content. Identical inputs produce byte-identical
//! output.

use std::io::Write;

use crate::config::ExperimentConfig;
use crate::experiment::{ConvergenceStudy, ExperimentOutput};
use crate::HarnessError;

/// Tool version stamped into every output artifact.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of the sweep CSV; one name per [`ResultRow`] field.
///
/// [`ResultRow`]: crate::experiment::ResultRow
pub const SWEEP_HEADER: &str = "t,C_estimate,Cdot_estimate,C_oracle,Cdot_oracle,rel_err_C,rel_err_Cdot,success_probability,standard_error";

/// Formats a float with 12 significant digits, the precision all numeric
/// CSV cells carry.
pub fn format_value(x: f64) -> String {
    format!("{x:.11e}")
}

fn format_optional(x: Option<f64>) -> String {
    x.map(format_value).unwrap_or_default()
}

fn write_metadata(
    out: &mut impl Write,
    kind: &str,
    config: &ExperimentConfig,
) -> Result<(), HarnessError> {
    writeln!(out, "# ratesim v{ARTIFACT_VERSION} {kind}")?;
    for (key, value) in config.echo() {
        writeln!(out, "# {key}={value}")?;
    }
    Ok(())
}

/// Writes the sweep CSV: metadata block, stable header, one row per time
/// point with empty cells for absent values.
pub fn write_sweep_csv(
    out: &mut impl Write,
    output: &ExperimentOutput,
) -> Result<(), HarnessError> {
    write_metadata(out, "sweep", &output.config)?;
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in &output.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_value(row.t),
            format_optional(row.c_estimate),
            format_optional(row.cdot_estimate),
            format_optional(row.c_oracle),
            format_optional(row.cdot_oracle),
            format_optional(row.rel_err_c),
            format_optional(row.rel_err_cdot),
            format_value(row.success_probability),
            format_optional(row.standard_error),
        )?;
    }
    Ok(())
}

/// Writes the convergence-study CSV: metadata (including the fixed time and
/// fitted slopes), then one row per step count.
pub fn write_convergence_csv(
    out: &mut impl Write,
    config: &ExperimentConfig,
    study: &ConvergenceStudy,
) -> Result<(), HarnessError> {
    write_metadata(out, "converge", config)?;
    writeln!(out, "# t_fixed={}", study.t)?;
    writeln!(
        out,
        "# slope_C={}",
        study.slope_c.map(|s| s.to_string()).unwrap_or_default()
    )?;
    writeln!(
        out,
        "# slope_Cdot={}",
        study.slope_cdot.map(|s| s.to_string()).unwrap_or_default()
    )?;
    writeln!(out, "steps,rel_err_C,rel_err_Cdot")?;
    for row in &study.rows {
        writeln!(
            out,
            "{},{},{}",
            row.steps,
            format_optional(row.rel_err_c),
            format_optional(row.rel_err_cdot),
        )?;
    }
    Ok(())
}

/// Serializes the sweep as pretty JSON (the mirror behind `--json`).
pub fn sweep_json(output: &ExperimentOutput) -> Result<String, HarnessError> {
    let document = serde_json::json!({
        "version": ARTIFACT_VERSION,
        "kind": "sweep",
        "config": output.config,
        "rows": output.rows,
    });
    serde_json::to_string_pretty(&document).map_err(|e| HarnessError::Config {
        field: "json".to_string(),
        message: e.to_string(),
    })
}

/// Serializes a convergence study as pretty JSON.
pub fn convergence_json(
    config: &ExperimentConfig,
    study: &ConvergenceStudy,
) -> Result<String, HarnessError> {
    let document = serde_json::json!({
        "version": ARTIFACT_VERSION,
        "kind": "converge",
        "config": config,
        "study": study,
    });
    serde_json::to_string_pretty(&document).map_err(|e| HarnessError::Config {
        field: "json".to_string(),
        message: e.to_string(),
    })
}
