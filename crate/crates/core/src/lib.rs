//! Sparse discrete factors, cluster graphs, loopy belief propagation and a
//! purge-and-merge solver for constraint satisfaction problems.
//!
//! ```
//! use pgm_forge::csp::{enumerate_solutions, PurgeMergeConfig};
//! use pgm_forge::puzzles::{build_factors, parse, verify_solution, PuzzleKind};
//!
//! let spec = parse(PuzzleKind::Sudoku4, "1...........4...").unwrap();
//! let model = build_factors::<f64>(&spec).unwrap();
//! let result = model.problem.solve(&PurgeMergeConfig::default()).unwrap();
//! let all = enumerate_solutions(&result, 1000).unwrap();
//! assert!(!all.truncated);
//! assert!(all.solutions.iter().all(|a| verify_solution(&spec, a).unwrap()));
//! println!("{} completions", all.solutions.len());
//! ```

pub mod csp;
pub mod factor;
pub mod graph;
pub mod inference;
pub mod puzzles;
pub mod scalar;
pub mod var;

pub use factor::{FactorError, NormMode, SparseFactor, DEFAULT_TABLE_CAP};
pub use scalar::Potential;
pub use var::{Assignment, Domain, State, VarRegistry, VariableId};

/// Double-precision factor.
pub type Factor = SparseFactor<f64>;
/// Single-precision factor.
pub type Factor32 = SparseFactor<f32>;
/// Double-precision cluster graph.
pub type Graph = graph::ClusterGraph<f64>;
