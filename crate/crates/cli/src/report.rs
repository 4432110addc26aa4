//! Benchmark results: a JSON document plus an aligned text table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uav_tpc::Scheme;

use crate::error::{CliError, CliResult};

/// Everything recorded about one successful solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    /// Sum over slots of the per-slot sum rate (bit/s).
    pub aggregate_rate: f64,
    /// Bits delivered over the flight, `aggregate_rate * Ts`.
    pub total_bits: f64,
    /// Wall time of the whole scheme including deployment (s).
    pub wall_seconds: f64,
    /// Wall time of the trajectory optimizer alone (s).
    pub solve_seconds: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub converged: bool,
    pub hover_slot: usize,
    pub slot_len: f64,
    /// True objective after every outer iteration (nats).
    pub objectives: Vec<f64>,
    /// Relative objective change per iteration.
    pub precision: Vec<f64>,
    /// Sum rate per slot over the full horizon (bit/s).
    pub slot_rates: Vec<f64>,
    pub ground_terminals: Vec<[f64; 3]>,
    /// `positions[k][n]` (m).
    pub positions: Vec<Vec<[f64; 3]>>,
    /// `powers[k][n]` (W).
    pub powers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellResult {
    Ok(Box<SchemeRun>),
    Failed { message: String },
}

/// One scheme applied to one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: usize,
    #[serde(with = "scheme_name")]
    pub scheme: Scheme,
    /// Seed of the scenario when it is known.
    pub seed: Option<u64>,
    pub result: CellResult,
}

impl Cell {
    pub fn run(&self) -> Option<&SchemeRun> {
        match &self.result {
            CellResult::Ok(r) => Some(r),
            CellResult::Failed { .. } => None,
        }
    }
}

/// Per-scheme averages over the scenarios that solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    #[serde(with = "scheme_name")]
    pub scheme: Scheme,
    pub solved: usize,
    pub failed: usize,
    pub mean_aggregate_rate: Option<f64>,
    pub mean_total_bits: Option<f64>,
    pub mean_wall_seconds: Option<f64>,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenarios: usize,
    pub cells: Vec<Cell>,
    pub summary: Vec<SchemeSummary>,
}

mod scheme_name {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use uav_tpc::Scheme;

    pub fn serialize<S: Serializer>(s: &Scheme, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(s.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Scheme, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(D::Error::custom)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl RunReport {
    /// Assembles a report and its per-scheme summary; schemes appear in the
    /// order of their first cell.
    pub fn new(scenarios: usize, cells: Vec<Cell>) -> Self {
        let mut order: Vec<Scheme> = Vec::new();
        for c in &cells {
            if !order.contains(&c.scheme) {
                order.push(c.scheme);
            }
        }
        let summary = order
            .into_iter()
            .map(|scheme| {
                let runs: Vec<&SchemeRun> = cells
                    .iter()
                    .filter(|c| c.scheme == scheme)
                    .filter_map(Cell::run)
                    .collect();
                let failed = cells.iter().filter(|c| c.scheme == scheme && c.run().is_none()).count();
                let col = |f: fn(&SchemeRun) -> f64| mean(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
                SchemeSummary {
                    scheme,
                    solved: runs.len(),
                    failed,
                    mean_aggregate_rate: col(|r| r.aggregate_rate),
                    mean_total_bits: col(|r| r.total_bits),
                    mean_wall_seconds: col(|r| r.wall_seconds),
                    mean_iterations: col(|r| r.iterations as f64),
                }
            })
            .collect();
        Self {
            scenarios,
            cells,
            summary,
        }
    }

    pub fn summary_for(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.summary.iter().find(|s| s.scheme == scheme)
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Aligned summary table. Numbers carry 12 significant digits.
    pub fn table(&self) -> String {
        let header = [
            "scheme",
            "solved",
            "failed",
            "aggregate rate (bit/s)",
            "total bits",
            "wall time (s)",
            "iterations",
        ];
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.11e}"));
        let rows: Vec<[String; 7]> = self
            .summary
            .iter()
            .map(|s| {
                [
                    s.scheme.name().to_string(),
                    s.solved.to_string(),
                    s.failed.to_string(),
                    fmt(s.mean_aggregate_rate),
                    fmt(s.mean_total_bits),
                    fmt(s.mean_wall_seconds),
                    fmt(s.mean_iterations),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for r in &rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(width)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
        for r in &rows {
            line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let json = dir.join("report.json");
        let txt = dir.join("report.txt");
        std::fs::write(&json, self.to_json()?).map_err(|e| CliError::io(&json, e))?;
        std::fs::write(&txt, self.table()).map_err(|e| CliError::io(&txt, e))?;
        Ok((json, txt))
    }
}
