//! CSV and JSON artifacts. Numbers in CSV use 17 significant digits in
//! scientific notation so files round-trip bit-exactly; lines end in LF.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bellman::{ShapeReport, SolveResult, Spacing};
use crate::dynamics::{SimulationTrace, StationaryEstimate};
use crate::euler::EulerReport;
use crate::model::{AlphaSource, ModelSpec};
use crate::risk::Aggregator;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot serialize {what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            IoError::Write { .. } => "write_failed",
            IoError::Json { .. } => "serialize_failed",
        }
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer flushes");
    String::from_utf8(bytes).expect("ascii output")
}

fn csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [f64; N]>) -> String {
    let mut w = csv_writer();
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).expect("in-memory write");
    }
    finish(w)
}

/// `x,value,invest,consume` at every grid node.
pub fn value_policy_csv(result: &SolveResult) -> String {
    let x = result.grid().nodes();
    let v = result.value.values();
    let i = result.policy.invest_nodes();
    csv(
        ["x", "value", "invest", "consume"],
        (0..x.len()).map(|j| [x[j], v[j], i[j], x[j] - i[j]]),
    )
}

pub fn euler_csv(report: &EulerReport) -> String {
    csv(
        ["x", "lhs", "rhs", "rel_residual"],
        report.records.iter().map(|r| [r.x, r.lhs, r.rhs, r.rel_residual]),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerSummary {
    pub max: f64,
    pub median: f64,
    pub window: (f64, f64),
}

impl From<&EulerReport> for EulerSummary {
    fn from(r: &EulerReport) -> Self {
        Self {
            max: r.max,
            median: r.median,
            window: r.window,
        }
    }
}

/// `t,x` with `t = 0` the initial income.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut w = csv_writer();
    w.write_record(["t", "x"]).expect("in-memory write");
    for (t, x) in trace.path.iter().enumerate() {
        w.write_record([t.to_string(), fmt_f64(*x)]).expect("in-memory write");
    }
    finish(w)
}

pub fn ecdf_csv(est: &StationaryEstimate) -> String {
    csv(
        ["x", "cdf"],
        est.eval_points.iter().zip(&est.ecdf).map(|(&x, &c)| [x, c]),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub points: usize,
    pub spacing: Spacing,
    pub x_max: f64,
}

/// Serializable digest of a [`SolveResult`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub error_bound: f64,
    pub contraction_modulus: f64,
    pub alpha: f64,
    pub alpha_source: AlphaSource,
    pub utility_bound: f64,
    pub aggregator: Aggregator,
    pub grid: GridSummary,
    pub shape: ShapeReport,
    pub residual_history: Vec<f64>,
}

impl SolveSummary {
    pub fn new(result: &SolveResult, model: &ModelSpec) -> Self {
        let grid = result.grid();
        Self {
            iterations: result.iterations,
            final_residual: result.final_residual,
            error_bound: result.error_bound,
            contraction_modulus: result.contraction_modulus,
            alpha: model.alpha(),
            alpha_source: model.alpha_source(),
            utility_bound: model.utility_bound(grid),
            aggregator: result.aggregator,
            grid: GridSummary {
                points: grid.len(),
                spacing: grid.spacing(),
                x_max: grid.x_max(),
            },
            shape: result.shape,
            residual_history: result.residual_history.clone(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(what: &'static str, value: &T) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { what, source })?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, IoError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|source| IoError::Write {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, 0.1, 1.0 / 3.0, 6.02e23, 5e-324, f64::MAX] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_has_header_and_lf() {
        let s = csv(["a", "b"], [[1.0, 2.0]].into_iter());
        assert_eq!(s, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn artifacts_land_in_nested_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_artifact(&dir.path().join("a/b"), "x.csv", "t,x\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,x\n");
    }
}
