use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Picks the format from a file extension, defaulting to CSV.
    pub fn for_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::Config(format!("unknown report format {other:?}"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 13] = [
    "matchup",
    "games",
    "mean_payoff",
    "rational_degree",
    "score",
    "agreement",
    "pareto",
    "freq_call",
    "freq_raise",
    "freq_fold",
    "freq_check",
    "mean_payoff_mirrored",
    "failed",
];

/// Marker written for metrics that are undefined (e.g. score with no deal).
const UNDEFINED: &str = "NA";

/// Mean payoff per (player, opponent): rows are players, columns opponents,
/// each in order of first appearance. Cells prefer the mirror-averaged mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub players: Vec<String>,
    pub opponents: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn payoff_matrix(report: &MetricsReport) -> PayoffMatrix {
    let mut players: Vec<String> = Vec::new();
    let mut opponents: Vec<String> = Vec::new();
    for r in &report.rows {
        if !players.contains(&r.player) {
            players.push(r.player.clone());
        }
        if !opponents.contains(&r.opponent) {
            opponents.push(r.opponent.clone());
        }
    }
    let cells = players
        .iter()
        .map(|p| {
            opponents
                .iter()
                .map(|o| {
                    report
                        .rows
                        .iter()
                        .find(|r| &r.player == p && &r.opponent == o)
                        .and_then(|r| r.mean_payoff_mirrored.or(r.mean_payoff))
                })
                .collect()
        })
        .collect();
    PayoffMatrix { players, opponents, cells }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x:.6}"))
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    #[serde(flatten)]
    report: MetricsReport,
    matrix: PayoffMatrix,
}

/// Path of the matrix file written next to a CSV report.
pub fn matrix_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}_matrix.csv"))
}

/// Writes the report. CSV output also writes `<stem>_matrix.csv`; JSON
/// output embeds the matrix. Returns the files written.
pub fn emit_report(report: &MetricsReport, format: ReportFormat, path: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let matrix = payoff_matrix(report);
    match format {
        ReportFormat::Json => {
            let doc = JsonReport { report: report.clone(), matrix };
            std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
            Ok(vec![path.to_path_buf()])
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(CSV_COLUMNS)?;
            for r in &report.rows {
                let freq = |k: &str| {
                    if r.actions.is_empty() {
                        UNDEFINED.to_string()
                    } else {
                        cell(r.actions.get(k).copied())
                    }
                };
                w.write_record([
                    r.matchup.clone(),
                    r.games.to_string(),
                    cell(r.mean_payoff),
                    cell(r.rational_degree),
                    cell(r.score),
                    cell(r.agreement),
                    cell(r.pareto),
                    freq("call"),
                    freq("raise"),
                    freq("fold"),
                    freq("check"),
                    cell(r.mean_payoff_mirrored),
                    r.failed.to_string(),
                ])?;
            }
            w.flush()?;

            let mpath = matrix_path(path);
            let mut m = csv::Writer::from_path(&mpath)?;
            let mut header = vec!["player \\ opponent".to_string()];
            header.extend(matrix.opponents.iter().cloned());
            m.write_record(&header)?;
            for (p, row) in matrix.players.iter().zip(&matrix.cells) {
                let mut rec = vec![p.clone()];
                rec.extend(row.iter().map(|v| cell(*v)));
                m.write_record(&rec)?;
            }
            m.flush()?;
            Ok(vec![path.to_path_buf(), mpath])
        }
    }
}

/// Reads a JSON report written by `emit_report`.
pub fn read_report(path: &Path) -> Result<MetricsReport, HarnessError> {
    let doc: JsonReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(doc.report)
}
