//! CSV and JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cli::config::RunConfig;
use crate::experiments::{target_frame, SweepResult, SweepSummary, ValidationReport};
use crate::metrics::TargetFrame;
use crate::model::CouplingModel;
use crate::Trajectory;

pub const DYNAMICS_COLUMNS: [&str; 7] = ["t_us", "fidelity", "n_mean", "p_g", "p_e", "p_r", "p_s"];

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` with 12 significant digits in the shortest of fixed or exponent
/// notation, like C's `%.12g`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa.to_string()), exp.abs())
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn table<'a>(header: &[&str], rows: impl Iterator<Item = Vec<f64>> + 'a) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_number).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn dynamics_csv(t: &Trajectory) -> String {
    table(
        &DYNAMICS_COLUMNS,
        (0..t.len()).map(|i| vec![t.times[i], t.fidelity[i], t.n_mean[i], t.p_g[i], t.p_e[i], t.p_r[i], t.p_s[i]]),
    )
}

/// Row-major table of a sweep with the schema of its grid kind.
pub fn sweep_csv(r: &SweepResult) -> String {
    let g = &r.grid;
    table(
        &g.kind.columns(),
        (0..g.cardinality()).map(|i| {
            let (a, b) = g.point(i);
            vec![a, b, r.values[i]]
        }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conventions {
    pub target_frame: TargetFrame,
    pub coupling_model: CouplingModel,
    pub fock_dim: usize,
    pub frequency_unit: &'static str,
    pub time_unit: &'static str,
    pub thermal_truncation: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub min_eigenvalue: Option<f64>,
    pub max_trace_error: f64,
    pub max_hermiticity_defect: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub params: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extremum: Option<SweepSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_populations: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    pub conventions: Conventions,
    pub code_version: &'static str,
}

impl Summary {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            command: config.command.to_string(),
            params: config.clone(),
            extremum: None,
            final_fidelity: None,
            final_populations: None,
            diagnostics: None,
            validation: None,
            conventions: Conventions {
                target_frame: target_frame(config.kind),
                coupling_model: config.coupling,
                fock_dim: config.fock_dim,
                frequency_unit: "MHz (ordinary frequency, f = omega / 2pi)",
                time_unit: "us",
                thermal_truncation: "renormalized",
            },
            code_version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn with_trajectory(mut self, t: &Trajectory) -> Self {
        self.final_fidelity = Some(t.final_fidelity());
        let last = t.len() - 1;
        self.final_populations = Some([t.p_g[last], t.p_e[last], t.p_r[last], t.p_s[last]]);
        self.diagnostics = Some(Diagnostics {
            min_eigenvalue: t.min_eigenvalue,
            max_trace_error: t.max_trace_error,
            max_hermiticity_defect: t.max_hermiticity_defect,
            accepted_steps: t.accepted_steps,
            rejected_steps: t.rejected_steps,
        });
        self
    }

    pub fn with_sweep(mut self, r: &SweepResult) -> Self {
        self.extremum = Some(r.summary);
        self
    }

    pub fn with_validation(mut self, v: &ValidationReport) -> Self {
        self.validation = Some(v.clone());
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Writes `files` (name, contents) into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[(&str, String)]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}

/// Header check used when reading emitted tables back.
pub fn check_header(csv: &str, expected: &[&str]) -> Result<(), String> {
    let header = csv.lines().next().ok_or("empty table")?;
    if header.split(',').eq(expected.iter().copied()) {
        Ok(())
    } else {
        let mut msg = String::new();
        let _ = write!(msg, "expected columns {}, found {header}", expected.join(","));
        Err(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(std::f64::consts::PI), "3.14159265359");
        assert_eq!(format_number(-0.1234567890123456), "-0.123456789012");
        assert_eq!(format_number(1.5e-7), "1.5e-07");
        assert_eq!(format_number(123456789012345.0), "1.23456789012e+14");
        assert_eq!(format_number(0.000123), "0.000123");
        assert_eq!(format_number(99999999999.99), "100000000000");
        assert_eq!(format_number(12345.678901234), "12345.6789012");
        assert_eq!(format_number(999999999999.9), "1e+12");
    }

    #[test]
    fn header_check() {
        assert!(check_header("a,b\n1,2\n", &["a", "b"]).is_ok());
        assert!(check_header("a,c\n", &["a", "b"]).is_err());
        assert!(check_header("", &["a"]).is_err());
    }
}
