//! Puzzle front-ends: specs, compilation to CSP factors, an independent
//! checker and a backtracking oracle.

mod build;
mod check;
mod format;
mod hamming;

pub use build::{build_factors, maximal_cliques, Model};
pub use check::{brute_force, verify_solution, BruteForce};
pub use format::{parse, parse_graph_colouring, parse_many, serialize};
pub use hamming::{decode_hamming, hamming_encode, HammingDecode};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::FactorError;
use crate::var::{State, VariableId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PuzzleError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("malformed puzzle: {0}")]
    Malformed(String),
    #[error("clue {value} at row {row}, column {col} is outside the domain")]
    InconsistentClue { row: usize, col: usize, value: State },
    #[error("assignment does not set {0}")]
    IncompleteAssignment(VariableId),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

impl PuzzleError {
    fn malformed(msg: impl Into<String>) -> Self {
        PuzzleError::Malformed(msg.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PuzzleKind {
    Sudoku4,
    Sudoku9,
    KillerSudoku,
    Calcudoku,
    Kakuro,
    FillAPix,
    GraphColouring,
    Hamming74,
}

impl PuzzleKind {
    pub const ALL: [PuzzleKind; 8] = [
        PuzzleKind::Sudoku4,
        PuzzleKind::Sudoku9,
        PuzzleKind::KillerSudoku,
        PuzzleKind::Calcudoku,
        PuzzleKind::Kakuro,
        PuzzleKind::FillAPix,
        PuzzleKind::GraphColouring,
        PuzzleKind::Hamming74,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PuzzleKind::Sudoku4 => "sudoku4",
            PuzzleKind::Sudoku9 => "sudoku9",
            PuzzleKind::KillerSudoku => "killer_sudoku",
            PuzzleKind::Calcudoku => "calcudoku",
            PuzzleKind::Kakuro => "kakuro",
            PuzzleKind::FillAPix => "fill_a_pix",
            PuzzleKind::GraphColouring => "graph_colouring",
            PuzzleKind::Hamming74 => "hamming74",
        }
    }

    /// Kinds stored one puzzle per line.
    pub fn is_line_based(self) -> bool {
        matches!(self, PuzzleKind::Sudoku4 | PuzzleKind::Sudoku9)
    }
}

impl fmt::Display for PuzzleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PuzzleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match key.as_str() {
            "sudoku4" => PuzzleKind::Sudoku4,
            "sudoku9" | "sudoku" => PuzzleKind::Sudoku9,
            "killer" | "killersudoku" => PuzzleKind::KillerSudoku,
            "calcudoku" | "kenken" => PuzzleKind::Calcudoku,
            "kakuro" => PuzzleKind::Kakuro,
            "fillapix" => PuzzleKind::FillAPix,
            "graphcolouring" | "graphcoloring" | "colouring" | "coloring" | "color" | "colour" => PuzzleKind::GraphColouring,
            "hamming" | "hamming74" => PuzzleKind::Hamming74,
            _ => return Err(format!("unknown puzzle kind `{s}`")),
        })
    }
}

/// Arithmetic rule of a cage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CageOp {
    #[serde(alias = "sum")]
    Sum,
    #[serde(alias = "add", alias = "+")]
    Add,
    #[serde(alias = "sub", alias = "-")]
    Sub,
    #[serde(alias = "mul", alias = "*", alias = "x")]
    Mul,
    #[serde(alias = "div", alias = "/")]
    Div,
    #[serde(alias = "none", alias = "=")]
    None,
}

impl CageOp {
    /// Whether `values` (all cells of the cage) meet `target`. Subtraction
    /// and division accept either operand order.
    pub fn holds(self, values: &[State], target: u32) -> bool {
        let t = u64::from(target);
        match self {
            CageOp::Sum | CageOp::Add => values.iter().map(|&s| u64::from(s)).sum::<u64>() == t,
            CageOp::Mul => values.iter().try_fold(1u64, |p, &s| p.checked_mul(u64::from(s))) == Some(t),
            CageOp::Sub => match values {
                [a, b] => u64::from(a.abs_diff(*b)) == t,
                _ => false,
            },
            CageOp::Div => match values {
                [a, b] => {
                    let (hi, lo) = (u64::from(*a.max(b)), u64::from(*a.min(b)));
                    lo != 0 && hi % lo == 0 && hi / lo == t
                }
                _ => false,
            },
            CageOp::None => matches!(values, [a] if u64::from(*a) == t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cage {
    pub cells: Vec<(usize, usize)>,
    pub target: u32,
    pub op: CageOp,
}

/// Grid puzzle with cages and pre-filled cells. For Kakuro the cages are the
/// runs; for Fill-a-pix the clues are the neighbourhood counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub cages: Vec<Cage>,
    #[serde(default)]
    pub clues: Vec<(usize, usize, State)>,
}

/// Sudoku grid in row-major order, `0` for blank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SudokuSpec {
    pub size: usize,
    pub grid: Vec<State>,
}

impl SudokuSpec {
    pub fn box_shape(&self) -> (usize, usize) {
        if self.size == 4 {
            (2, 2)
        } else {
            (3, 3)
        }
    }

    pub fn clue_count(&self) -> usize {
        self.grid.iter().filter(|&&s| s != 0).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSpec {
    pub nodes: Vec<String>,
    /// Edges `(a, b)` with `a < b`, sorted and without repeats.
    pub edges: Vec<(usize, usize)>,
    pub colours: u16,
}

impl GraphSpec {
    pub fn new(nodes: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>, colours: u16) -> Result<Self, PuzzleError> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(PuzzleError::malformed(format!("self loop on {}", nodes.get(a).map_or("?", String::as_str))));
            }
            if a.max(b) >= nodes.len() {
                return Err(PuzzleError::malformed("edge refers to an unknown node"));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        out.dedup();
        if colours == 0 {
            return Err(PuzzleError::malformed("need at least one colour"));
        }
        Ok(GraphSpec { nodes, edges: out, colours })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammingSpec {
    /// Received bits `r1..r7`.
    #[serde(with = "bits")]
    pub received: [u8; 7],
    pub flip_prob: f64,
}

mod bits {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8; 7], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&b.iter().map(|&x| if x == 1 { '1' } else { '0' }).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 7], D::Error> {
        let s = String::deserialize(d)?;
        let v: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(D::Error::custom(format!("bad bit `{c}`"))),
            })
            .collect::<Result<_, _>>()?;
        v.try_into().map_err(|_| D::Error::custom("expected 7 bits"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PuzzleSpec {
    Sudoku(SudokuSpec),
    Killer(GridSpec),
    Calcudoku(GridSpec),
    Kakuro(GridSpec),
    FillAPix(GridSpec),
    GraphColouring(GraphSpec),
    Hamming74(HammingSpec),
}

impl PuzzleSpec {
    pub fn kind(&self) -> PuzzleKind {
        match self {
            PuzzleSpec::Sudoku(s) if s.size == 4 => PuzzleKind::Sudoku4,
            PuzzleSpec::Sudoku(_) => PuzzleKind::Sudoku9,
            PuzzleSpec::Killer(_) => PuzzleKind::KillerSudoku,
            PuzzleSpec::Calcudoku(_) => PuzzleKind::Calcudoku,
            PuzzleSpec::Kakuro(_) => PuzzleKind::Kakuro,
            PuzzleSpec::FillAPix(_) => PuzzleKind::FillAPix,
            PuzzleSpec::GraphColouring(_) => PuzzleKind::GraphColouring,
            PuzzleSpec::Hamming74(_) => PuzzleKind::Hamming74,
        }
    }

    /// Checks the kind-specific well-formedness rules.
    pub fn validate(&self) -> Result<(), PuzzleError> {
        match self {
            PuzzleSpec::Sudoku(s) => {
                if s.size != 4 && s.size != 9 {
                    return Err(PuzzleError::malformed(format!("sudoku size {} (expected 4 or 9)", s.size)));
                }
                if s.grid.len() != s.size * s.size {
                    return Err(PuzzleError::malformed(format!("sudoku grid has {} cells", s.grid.len())));
                }
                if let Some(k) = s.grid.iter().position(|&v| usize::from(v) > s.size) {
                    return Err(PuzzleError::InconsistentClue { row: k / s.size, col: k % s.size, value: s.grid[k] });
                }
                Ok(())
            }
            PuzzleSpec::Killer(g) => {
                if g.rows != 9 || g.cols != 9 {
                    return Err(PuzzleError::malformed("killer sudoku must be 9x9"));
                }
                validate_cages(g, false, |op| matches!(op, CageOp::Sum | CageOp::Add))?;
                validate_clues(g, 9)
            }
            PuzzleSpec::Calcudoku(g) => {
                if g.rows != g.cols || g.rows == 0 || g.rows > 9 {
                    return Err(PuzzleError::malformed("calcudoku must be square with side 1 to 9"));
                }
                validate_cages(g, true, |_| true)?;
                validate_clues(g, g.rows as State)
            }
            PuzzleSpec::Kakuro(g) => validate_kakuro(g),
            PuzzleSpec::FillAPix(g) => {
                if !g.cages.is_empty() {
                    return Err(PuzzleError::malformed("fill-a-pix takes clues only"));
                }
                let mut seen = std::collections::HashSet::new();
                for &(r, c, v) in &g.clues {
                    if r >= g.rows || c >= g.cols {
                        return Err(PuzzleError::malformed(format!("clue at ({r}, {c}) is off the grid")));
                    }
                    if v > 9 {
                        return Err(PuzzleError::InconsistentClue { row: r, col: c, value: v });
                    }
                    if !seen.insert((r, c)) {
                        return Err(PuzzleError::malformed(format!("two clues at ({r}, {c})")));
                    }
                }
                Ok(())
            }
            PuzzleSpec::GraphColouring(g) => {
                if g.colours == 0 {
                    return Err(PuzzleError::malformed("need at least one colour"));
                }
                if g.edges.iter().any(|&(a, b)| a >= b || b >= g.nodes.len()) {
                    return Err(PuzzleError::malformed("edges must join distinct known nodes"));
                }
                Ok(())
            }
            PuzzleSpec::Hamming74(h) => {
                if !(h.flip_prob > 0.0 && h.flip_prob < 0.5) {
                    return Err(PuzzleError::malformed(format!("flip probability {} outside (0, 0.5)", h.flip_prob)));
                }
                if h.received.iter().any(|&b| b > 1) {
                    return Err(PuzzleError::malformed("received bits must be 0 or 1"));
                }
                Ok(())
            }
        }
    }
}

fn validate_clues(g: &GridSpec, max: State) -> Result<(), PuzzleError> {
    for &(r, c, v) in &g.clues {
        if r >= g.rows || c >= g.cols {
            return Err(PuzzleError::malformed(format!("clue at ({r}, {c}) is off the grid")));
        }
        if v == 0 || v > max {
            return Err(PuzzleError::InconsistentClue { row: r, col: c, value: v });
        }
    }
    Ok(())
}

fn validate_cages(g: &GridSpec, cover: bool, op_ok: impl Fn(CageOp) -> bool) -> Result<(), PuzzleError> {
    let mut owner = vec![None; g.rows * g.cols];
    for (k, cage) in g.cages.iter().enumerate() {
        if cage.cells.is_empty() {
            return Err(PuzzleError::malformed(format!("cage {k} has no cells")));
        }
        if !op_ok(cage.op) {
            return Err(PuzzleError::malformed(format!("cage {k} uses an unsupported operator {:?}", cage.op)));
        }
        let need = match cage.op {
            CageOp::Sub | CageOp::Div => Some(2),
            CageOp::None => Some(1),
            _ => None,
        };
        if need.is_some_and(|n| n != cage.cells.len()) {
            return Err(PuzzleError::malformed(format!("cage {k} has the wrong number of cells for {:?}", cage.op)));
        }
        for &(r, c) in &cage.cells {
            if r >= g.rows || c >= g.cols {
                return Err(PuzzleError::malformed(format!("cage {k} cell ({r}, {c}) is off the grid")));
            }
            if let Some(other) = owner[r * g.cols + c].replace(k) {
                return Err(PuzzleError::malformed(format!("cages {other} and {k} overlap at ({r}, {c})")));
            }
        }
    }
    if cover {
        if let Some(k) = owner.iter().position(Option::is_none) {
            return Err(PuzzleError::malformed(format!("cell ({}, {}) is in no cage", k / g.cols, k % g.cols)));
        }
    }
    Ok(())
}

fn validate_kakuro(g: &GridSpec) -> Result<(), PuzzleError> {
    // Each white cell lies in at most one run per direction.
    let mut across = vec![false; g.rows * g.cols];
    let mut down = vec![false; g.rows * g.cols];
    for (k, run) in g.cages.iter().enumerate() {
        if !matches!(run.op, CageOp::Sum | CageOp::Add) {
            return Err(PuzzleError::malformed(format!("run {k} must be a sum")));
        }
        let n = run.cells.len();
        if !(2..=9).contains(&n) {
            return Err(PuzzleError::malformed(format!("run {k} has {n} cells (expected 2 to 9)")));
        }
        let (lo, hi) = ((n * (n + 1) / 2) as u32, (n * (19 - n) / 2) as u32);
        if run.target < lo || run.target > hi {
            return Err(PuzzleError::malformed(format!("run {k} target {} is impossible for {n} cells", run.target)));
        }
        let mut cells = run.cells.clone();
        cells.sort_unstable();
        let horizontal = cells.iter().all(|c| c.0 == cells[0].0) && cells.windows(2).all(|w| w[1].1 == w[0].1 + 1);
        let vertical = cells.iter().all(|c| c.1 == cells[0].1) && cells.windows(2).all(|w| w[1].0 == w[0].0 + 1);
        if !horizontal && !vertical {
            return Err(PuzzleError::malformed(format!("run {k} is not a straight contiguous segment")));
        }
        let used = if horizontal { &mut across } else { &mut down };
        for &(r, c) in &cells {
            if r >= g.rows || c >= g.cols {
                return Err(PuzzleError::malformed(format!("run {k} cell ({r}, {c}) is off the grid")));
            }
            if std::mem::replace(&mut used[r * g.cols + c], true) {
                return Err(PuzzleError::malformed(format!("run {k} overlaps another run at ({r}, {c})")));
            }
        }
    }
    validate_clues(g, 9)?;
    let white: std::collections::HashSet<(usize, usize)> = g.cages.iter().flat_map(|r| r.cells.iter().copied()).collect();
    if let Some(&(r, c, _)) = g.clues.iter().find(|&&(r, c, _)| !white.contains(&(r, c))) {
        return Err(PuzzleError::malformed(format!("clue at ({r}, {c}) is not in any run")));
    }
    Ok(())
}

/// Variable id of grid cell `(r, c)`.
pub fn cell_id(cols: usize, r: usize, c: usize) -> VariableId {
    VariableId((r * cols + c) as u32)
}
