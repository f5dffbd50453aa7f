//! Run reports: one JSON object per instance, plus text rendering.

use std::collections::BTreeMap;

use pgm_forge::puzzles::PuzzleSpec;
use pgm_forge::{Assignment, State, VarRegistry, VariableId};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// One assignment, or a complete enumeration under the cap.
    Solved,
    /// The residual tree has several solutions and none were enumerated.
    Open,
    /// Enumeration stopped at the cap.
    Truncated,
    Contradiction,
    CapacityExceeded,
    Timeout,
    Failed,
}

impl Status {
    pub fn is_success(self) -> bool {
        self == Status::Solved
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStatsReport {
    pub rounds: usize,
    pub merges: usize,
    pub capacity_failures: usize,
    pub propagation_updates: usize,
    pub max_table_entries: usize,
    pub log2_max_table_entries: f64,
    pub max_upper_bound_entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub schema_version: u32,
    pub index: usize,
    pub source: String,
    pub kind: String,
    pub metric: String,
    pub status: Status,
    pub solved: bool,
    pub unique: bool,
    pub tree: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
    pub stats: SolveStatsReport,
    pub runtime_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solutions: Option<Vec<BTreeMap<String, State>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub topology: String,
    pub clusters: usize,
    pub edges: usize,
    pub solved: bool,
    pub undecided_variables: usize,
    pub updates: usize,
    pub converged: bool,
    pub runtime_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub status: Status,
    pub rounds: usize,
    pub max_table_entries: usize,
    pub log2_max_table_entries: f64,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub index: usize,
    pub source: String,
    pub kind: String,
    pub topologies: Vec<TopologyReport>,
    pub metrics: Vec<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammingReport {
    pub schema_version: u32,
    pub received: String,
    pub flip_prob: f64,
    pub codeword: String,
    pub message: String,
    pub confidence: Vec<f64>,
    pub updates: usize,
    pub converged: bool,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColourReport {
    pub schema_version: u32,
    pub source: String,
    pub nodes: usize,
    pub edges: usize,
    /// Colour counts tried, in order, with the status of each.
    pub attempts: Vec<(u16, Status)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colours: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colouring: Option<BTreeMap<String, State>>,
    pub runtime_ms: f64,
}

pub fn log2_entries(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64).log2()
    }
}

pub fn labelled(registry: &VarRegistry, a: &Assignment) -> BTreeMap<String, State> {
    a.iter().map(|(v, s)| (registry.name(v), s)).collect()
}

fn cell(a: &Assignment, cols: usize, r: usize, c: usize) -> Option<State> {
    a.get(VariableId((r * cols + c) as u32))
}

/// Human-readable picture of a solution.
pub fn render(spec: &PuzzleSpec, registry: &VarRegistry, a: &Assignment) -> String {
    let grid = |rows: usize, cols: usize, show: &dyn Fn(Option<State>) -> String| {
        let mut out = String::new();
        for r in 0..rows {
            let line: Vec<String> = (0..cols).map(|c| show(cell(a, cols, r, c))).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    };
    let digit = |s: Option<State>| s.map_or_else(|| "#".to_owned(), |s| s.to_string());
    match spec {
        PuzzleSpec::Sudoku(s) => grid(s.size, s.size, &digit),
        PuzzleSpec::Killer(g) | PuzzleSpec::Calcudoku(g) | PuzzleSpec::Kakuro(g) => grid(g.rows, g.cols, &digit),
        PuzzleSpec::FillAPix(g) => grid(g.rows, g.cols, &|s| if s == Some(1) { "#".into() } else { ".".into() }),
        PuzzleSpec::GraphColouring(_) | PuzzleSpec::Hamming74(_) => {
            a.iter().map(|(v, s)| format!("{}={s}\n", registry.name(v))).collect()
        }
    }
}
