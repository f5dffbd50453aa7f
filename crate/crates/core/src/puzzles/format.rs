//! Text formats for puzzles.
//!
//! * Sudoku: one line of 16 or 81 characters, digits with `.` or `0` blank.
//! * Killer, Calcudoku, Kakuro, Fill-a-pix: a JSON object
//!   `{"kind", "rows", "cols", "cages": [{"cells", "target", "op"}], "clues": [[r, c, v]]}`.
//! * Graph colouring: one `u v` edge per line, optional `colours N` and
//!   `nodes a b c` lines, `#` comments.
//! * Hamming: `{"received": "1110010", "flip_prob": 0.1}`.

use serde::{Deserialize, Serialize};

use super::{Cage, GraphSpec, GridSpec, HammingSpec, PuzzleError, PuzzleKind, PuzzleSpec, SudokuSpec};
use crate::var::State;

#[derive(Serialize, Deserialize)]
struct GridFile {
    kind: String,
    rows: usize,
    cols: usize,
    #[serde(default)]
    cages: Vec<Cage>,
    #[serde(default)]
    clues: Vec<(usize, usize, State)>,
}

fn json_error(e: serde_json::Error) -> PuzzleError {
    PuzzleError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

fn parse_sudoku(kind: PuzzleKind, line: &str, line_no: usize) -> Result<PuzzleSpec, PuzzleError> {
    let size = if kind == PuzzleKind::Sudoku4 { 4 } else { 9 };
    let text = line.trim();
    let offset = line.len() - line.trim_start().len();
    let mut grid = Vec::with_capacity(size * size);
    for (k, ch) in text.chars().enumerate() {
        let v = match ch {
            '.' | '0' => 0,
            '1'..='9' => ch as State - '0' as State,
            _ => {
                return Err(PuzzleError::Parse { line: line_no, column: offset + k + 1, message: format!("unexpected `{ch}`") });
            }
        };
        if usize::from(v) > size {
            return Err(PuzzleError::Parse {
                line: line_no,
                column: offset + k + 1,
                message: format!("digit {v} is too large for a {size}x{size} grid"),
            });
        }
        grid.push(v);
    }
    if grid.len() != size * size {
        return Err(PuzzleError::Parse {
            line: line_no,
            column: offset + grid.len() + 1,
            message: format!("expected {} cells, found {}", size * size, grid.len()),
        });
    }
    let spec = PuzzleSpec::Sudoku(SudokuSpec { size, grid });
    spec.validate()?;
    Ok(spec)
}

fn parse_graph(text: &str, colours: Option<u16>) -> Result<PuzzleSpec, PuzzleError> {
    let mut nodes: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut intern = |name: &str, nodes: &mut Vec<String>| -> usize {
        *index.entry(name.to_owned()).or_insert_with(|| {
            nodes.push(name.to_owned());
            nodes.len() - 1
        })
    };
    let mut edges = Vec::new();
    let mut declared = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let column = raw.len() - raw.trim_start().len() + 1;
        let err = |message: String| PuzzleError::Parse { line: k + 1, column, message };
        match words[..] {
            ["colours" | "colors", n] => {
                declared = Some(n.parse::<u16>().map_err(|_| err(format!("bad colour count `{n}`")))?);
            }
            ["nodes", ref names @ ..] => {
                for name in names {
                    intern(name, &mut nodes);
                }
            }
            [a] => {
                intern(a, &mut nodes);
            }
            [a, b] => {
                let (a, b) = (intern(a, &mut nodes), intern(b, &mut nodes));
                if a == b {
                    return Err(err(format!("self loop on `{}`", words[0])));
                }
                edges.push((a, b));
            }
            _ => return Err(err(format!("expected `u v`, found `{line}`"))),
        }
    }
    let colours = colours.or(declared).ok_or_else(|| PuzzleError::malformed("colour count missing"))?;
    Ok(PuzzleSpec::GraphColouring(GraphSpec::new(nodes, edges, colours)?))
}

/// Parses a single puzzle of the given kind.
pub fn parse(kind: PuzzleKind, text: &str) -> Result<PuzzleSpec, PuzzleError> {
    let spec = match kind {
        PuzzleKind::Sudoku4 | PuzzleKind::Sudoku9 => {
            let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
            let Some((k, line)) = lines.next() else {
                return Err(PuzzleError::Parse { line: 1, column: 1, message: "no puzzle found".into() });
            };
            if let Some((j, _)) = lines.next() {
                return Err(PuzzleError::Parse { line: j + 1, column: 1, message: "more than one puzzle".into() });
            }
            return parse_sudoku(kind, line, k + 1);
        }
        PuzzleKind::GraphColouring => return parse_graph(text, None),
        PuzzleKind::Hamming74 => PuzzleSpec::Hamming74(serde_json::from_str(text).map_err(json_error)?),
        _ => {
            let file: GridFile = serde_json::from_str(text).map_err(json_error)?;
            let named: PuzzleKind = file.kind.parse().map_err(PuzzleError::Malformed)?;
            if named != kind {
                return Err(PuzzleError::malformed(format!("file holds a {named} puzzle, expected {kind}")));
            }
            let grid = GridSpec { rows: file.rows, cols: file.cols, cages: file.cages, clues: file.clues };
            match kind {
                PuzzleKind::KillerSudoku => PuzzleSpec::Killer(grid),
                PuzzleKind::Calcudoku => PuzzleSpec::Calcudoku(grid),
                PuzzleKind::Kakuro => PuzzleSpec::Kakuro(grid),
                _ => PuzzleSpec::FillAPix(grid),
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Edge-list graph with an explicit colour count, which overrides any
/// `colours` line in the text.
pub fn parse_graph_colouring(text: &str, colours: u16) -> Result<PuzzleSpec, PuzzleError> {
    parse_graph(text, Some(colours))
}

/// Parses a file that may hold several puzzles: one per non-blank line for
/// Sudoku, one per file otherwise.
pub fn parse_many(kind: PuzzleKind, text: &str) -> Result<Vec<PuzzleSpec>, PuzzleError> {
    if !kind.is_line_based() {
        return Ok(vec![parse(kind, text)?]);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(k, l)| parse_sudoku(kind, l, k + 1))
        .collect()
}

/// Writes a spec in the format [`parse`] reads.
pub fn serialize(spec: &PuzzleSpec) -> String {
    match spec {
        PuzzleSpec::Sudoku(s) => {
            s.grid.iter().map(|&v| if v == 0 { '.' } else { char::from(b'0' + v as u8) }).collect()
        }
        PuzzleSpec::Killer(g) | PuzzleSpec::Calcudoku(g) | PuzzleSpec::Kakuro(g) | PuzzleSpec::FillAPix(g) => {
            let file = GridFile {
                kind: spec.kind().name().to_owned(),
                rows: g.rows,
                cols: g.cols,
                cages: g.cages.clone(),
                clues: g.clues.clone(),
            };
            serde_json::to_string(&file).expect("grid specs serialise")
        }
        PuzzleSpec::GraphColouring(g) => {
            let mut out = format!("nodes {}\ncolours {}\n", g.nodes.join(" "), g.colours);
            for &(a, b) in &g.edges {
                out.push_str(&format!("{} {}\n", g.nodes[a], g.nodes[b]));
            }
            out
        }
        PuzzleSpec::Hamming74(h) => serde_json::to_string::<HammingSpec>(h).expect("hamming specs serialise"),
    }
}
