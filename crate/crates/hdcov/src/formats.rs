//! On-disk formats: covariance spec JSON, calibration JSON, CSV matrices,
//! and the report payloads emitted by the CLI.
//!
//! All writers produce deterministic bytes for identical inputs; JSON
//! documents carry a `schema_version` field and CSV files start with a
//! `# schema:` comment line.

use std::fs;
use std::io::Write;
use std::path::Path;

use hdcov_core::calibrate::{CalibrationMethod, NullCalibration};
use hdcov_core::contiguity::ContiguityReport;
use hdcov_core::model::{CovarianceKind, CovarianceSpec};
use hdcov_core::power::PowerPrediction;
use hdcov_core::stats::TestKind;
use hdcov_core::{Error, Matrix, Result};
use serde::{Deserialize, Serialize};

use crate::{LabError, LabResult};

pub const SCHEMA_VERSION: u32 = 1;

pub fn parse_kind(s: &str) -> Result<TestKind> {
    TestKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::BadArgument(format!("unknown test kind: {s}")))
}

fn io_err(path: &Path, err: std::io::Error) -> Error {
    Error::BadArgument(format!("{}: {err}", path.display()))
}

/// Reads a comma-separated matrix, one row per line. Lines starting with
/// `#` are skipped; `has_header` additionally drops the first data line.
pub fn read_matrix_csv(path: &Path, has_header: bool) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header_pending = has_header;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::BadArgument(format!(
                        "{}:{}: not a number: {tok:?}",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::BadDimension {
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::BadArgument(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let ncols = rows[0].len();
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Covariance spec wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceSpecFile {
    pub kind: String,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl CovarianceSpecFile {
    pub fn resolve(&self) -> Result<CovarianceSpec> {
        let kind = match self.kind.as_str() {
            "identity" => CovarianceKind::Identity,
            "scaled_identity" => CovarianceKind::ScaledIdentity(
                self.lambda
                    .ok_or_else(|| Error::BadArgument("scaled_identity requires lambda".into()))?,
            ),
            "diagonal" => CovarianceKind::Diagonal(
                self.eigenvalues
                    .clone()
                    .ok_or_else(|| Error::BadArgument("diagonal requires eigenvalues".into()))?,
            ),
            "spiked" => CovarianceKind::Spiked(
                self.a
                    .clone()
                    .ok_or_else(|| Error::BadArgument("spiked requires a".into()))?,
            ),
            "dense" => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::BadArgument("dense requires path".into()))?;
                CovarianceKind::Dense(read_matrix_csv(Path::new(path), false)?)
            }
            other => {
                return Err(Error::BadArgument(format!(
                    "unknown covariance kind: {other}"
                )))
            }
        };
        Ok(CovarianceSpec { kind, p: self.p })
    }

    /// Short human-readable tag for CSV rows.
    pub fn descriptor(&self) -> String {
        match self.kind.as_str() {
            "identity" => "identity".into(),
            "scaled_identity" => format!("scaled_identity({})", self.lambda.unwrap_or(f64::NAN)),
            "diagonal" => "diagonal".into(),
            "spiked" => {
                let a = self.a.clone().unwrap_or_default();
                let nonzero = a.iter().filter(|&&x| x != 0.0).count();
                format!("spiked(nonzero={nonzero})")
            }
            "dense" => format!("dense({})", self.path.clone().unwrap_or_default()),
            other => other.into(),
        }
    }
}

/// Loads a covariance spec from either a JSON spec file, an inline JSON
/// string, or a dense CSV matrix (by `.csv` extension).
pub fn load_covariance_spec(arg: &str) -> Result<(CovarianceSpecFile, CovarianceSpec)> {
    let trimmed = arg.trim_start();
    let file: CovarianceSpecFile = if trimmed.starts_with('{') {
        serde_json::from_str(trimmed)
            .map_err(|e| Error::BadArgument(format!("invalid covariance spec JSON: {e}")))?
    } else if arg.ends_with(".csv") {
        let m = read_matrix_csv(Path::new(arg), false)?;
        CovarianceSpecFile {
            kind: "dense".into(),
            p: m.nrows(),
            lambda: None,
            eigenvalues: None,
            a: None,
            path: Some(arg.to_string()),
        }
    } else {
        let text = fs::read_to_string(arg).map_err(|e| io_err(Path::new(arg), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::BadArgument(format!("{arg}: invalid covariance spec JSON: {e}")))?
    };
    let spec = file.resolve()?;
    Ok((file, spec))
}

/// Calibration wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(default)]
    pub schema_version: u32,
    pub kind: String,
    pub n: usize,
    pub p: usize,
    pub m: f64,
    pub sigma: f64,
    pub method: String,
    pub reps: u64,
    pub seed: u64,
}

impl From<&NullCalibration> for CalibrationFile {
    fn from(c: &NullCalibration) -> Self {
        CalibrationFile {
            schema_version: SCHEMA_VERSION,
            kind: c.kind.name().to_string(),
            n: c.n,
            p: c.p,
            m: c.m,
            sigma: c.sigma,
            method: c.method.name().to_string(),
            reps: c.reps,
            seed: c.seed,
        }
    }
}

impl CalibrationFile {
    pub fn resolve(&self) -> Result<NullCalibration> {
        let calib = NullCalibration {
            kind: parse_kind(&self.kind)?,
            n: self.n,
            p: self.p,
            m: self.m,
            sigma: self.sigma,
            method: CalibrationMethod::parse(&self.method)?,
            reps: self.reps,
            seed: self.seed,
        };
        calib.validate()?;
        Ok(calib)
    }
}

pub fn write_calibration(path: &Path, calib: &NullCalibration) -> LabResult<()> {
    let file = CalibrationFile::from(calib);
    write_json_lab(path, &file)
}

pub fn read_calibration(path: &Path) -> Result<NullCalibration> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: CalibrationFile = serde_json::from_str(&text).map_err(|e| {
        Error::BadArgument(format!("{}: invalid calibration JSON: {e}", path.display()))
    })?;
    file.resolve()
}

/// Serializes any payload as pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON serialization cannot fail");
    s.push('\n');
    s
}

/// Writes pretty JSON; write failures are internal errors (exit code 1).
pub fn write_json_lab<T: Serialize>(path: &Path, value: &T) -> LabResult<()> {
    let mut f = fs::File::create(path)
        .map_err(|e| LabError::Internal(format!("{}: {e}", path.display())))?;
    f.write_all(to_json_string(value).as_bytes())
        .map_err(|e| LabError::Internal(format!("{}: {e}", path.display())))
}

/// Power prediction wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerPredictionFile {
    pub schema_version: u32,
    pub kind: String,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub sigma: String,
    pub sigma_null: f64,
    pub sigma_null_source: String,
    pub tau: f64,
    pub power: f64,
    pub mean_gap_leading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose: Option<ContiguityReportFile>,
}

impl PowerPredictionFile {
    pub fn new(
        pred: &PowerPrediction,
        n: usize,
        p: usize,
        sigma_desc: String,
        sigma_null_source: String,
    ) -> Self {
        PowerPredictionFile {
            schema_version: SCHEMA_VERSION,
            kind: pred.kind.name().to_string(),
            n,
            p,
            alpha: pred.alpha,
            sigma: sigma_desc,
            sigma_null: pred.sigma_null,
            sigma_null_source,
            tau: pred.tau,
            power: pred.power,
            mean_gap_leading: pred.mean_gap_leading,
            diagnose: None,
        }
    }
}

/// Contiguity diagnostic wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContiguityReportFile {
    pub kind: String,
    pub v: f64,
    pub mean_gap: f64,
    pub sigma_null: f64,
    pub err_bar: f64,
    pub residual: f64,
    pub residual_exact: bool,
    pub t: f64,
    pub bound_term_23: f64,
    pub bound_term_49: f64,
    pub v_method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_std_error: Option<f64>,
}

impl ContiguityReportFile {
    pub fn new(report: &ContiguityReport, v_method: String, v_std_error: Option<f64>) -> Self {
        ContiguityReportFile {
            kind: report.kind.name().to_string(),
            v: report.v,
            mean_gap: report.mean_gap,
            sigma_null: report.sigma_null,
            err_bar: report.err_bar,
            residual: report.residual,
            residual_exact: report.residual_exact,
            t: report.t,
            bound_term_23: report.bound_term_23,
            bound_term_49: report.bound_term_49,
            v_method,
            v_std_error,
        }
    }
}

/// Flattens a JSON document into dotted column names and stringified
/// values (alphabetical within each object level), for `--format csv`.
pub fn flatten_json(value: &serde_json::Value) -> (Vec<String>, Vec<String>) {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, inner) in map {
                    let name = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&name, inner, out);
                }
            }
            serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut cells = Vec::new();
    walk("", value, &mut cells);
    cells.into_iter().unzip()
}

/// Rebuilds JSON row objects from CSV-shaped data, for `--format json` on
/// the tabular commands.
pub fn rows_to_json(header: &[&str], rows: &[Vec<String>]) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            for (name, cell) in header.iter().zip(row) {
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .and_then(serde_json::Number::from_f64)
                    .map(serde_json::Value::Number)
                    .unwrap_or_else(|| serde_json::Value::String(cell.clone()));
                obj.insert(name.to_string(), v);
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::json!({ "schema_version": SCHEMA_VERSION, "rows": rows })
}

/// Renders a CSV document with a schema comment line and a header row.
pub fn csv_string(schema: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# schema: {schema}/v{SCHEMA_VERSION}\n"));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv_lab(
    path: &Path,
    schema: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> LabResult<()> {
    fs::write(path, csv_string(schema, header, rows))
        .map_err(|e| LabError::Internal(format!("{}: {e}", path.display())))
}
