//! Per-instance work and the worker pool.

use std::path::Path;
use std::time::{Duration, Instant};

use pgm_forge::csp::{enumerate_solutions, single_pass, AttractionMetric, CspError, PurgeMergeConfig, SolveResult, Topology};
use pgm_forge::inference::ConvergenceConfig;
use pgm_forge::puzzles::{build_factors, parse, verify_solution, Model, PuzzleError, PuzzleKind, PuzzleSpec};
use pgm_forge::{Assignment, NormMode};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::report::{
    labelled, log2_entries, render, CompareReport, InstanceReport, MetricReport, SolveStatsReport, Status, TopologyReport,
    SCHEMA_VERSION,
};

/// Error reading or parsing the input; maps to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub struct Instance {
    pub source: String,
    pub spec: PuzzleSpec,
}

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub metric: AttractionMetric,
    pub mode: NormMode,
    pub threshold_start: Option<f64>,
    pub threshold_step: Option<f64>,
    pub table_cap: usize,
    pub enumerate: bool,
    pub cap: usize,
    pub timeout: Option<Duration>,
}

impl Settings {
    /// Solver configuration with the deadline counted from now.
    pub fn config(&self, metric: AttractionMetric) -> PurgeMergeConfig {
        let mut config = PurgeMergeConfig {
            metric,
            table_cap: self.table_cap,
            inference: ConvergenceConfig::with_mode(self.mode),
            deadline: self.timeout.map(|t| Instant::now() + t),
            ..PurgeMergeConfig::default()
        };
        config.schedule.start = self.threshold_start;
        config.schedule.step = self.threshold_step;
        config
    }
}

pub fn read_input(path: &Path) -> Result<String, InputError> {
    if path.as_os_str() == "-" {
        return std::io::read_to_string(std::io::stdin()).map_err(|e| InputError(format!("stdin: {e}")));
    }
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn located(name: &str, line_offset: usize, e: PuzzleError) -> InputError {
    match e {
        PuzzleError::Parse { line, column, message } => InputError(format!("{name}:{}:{column}: {message}", line + line_offset)),
        e => InputError(format!("{name}: {e}")),
    }
}

/// Every instance in the files: one per non-blank line for Sudoku, one per
/// file otherwise.
pub fn load(kind: PuzzleKind, paths: &[std::path::PathBuf]) -> Result<Vec<Instance>, InputError> {
    if kind == PuzzleKind::Hamming74 {
        return Err(InputError("use the decode-hamming command for Hamming codes".into()));
    }
    let mut out = Vec::new();
    for path in paths {
        let name = if path.as_os_str() == "-" { "stdin".to_owned() } else { path.display().to_string() };
        let text = read_input(path)?;
        if kind.is_line_based() {
            for (k, line) in text.lines().enumerate() {
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                let spec = parse(kind, line).map_err(|e| located(&name, k, e))?;
                out.push(Instance { source: format!("{name}:{}", k + 1), spec });
            }
        } else {
            let spec = parse(kind, &text).map_err(|e| located(&name, 0, e))?;
            out.push(Instance { source: name, spec });
        }
    }
    if out.is_empty() {
        return Err(InputError("no puzzles in the input".into()));
    }
    Ok(out)
}

/// Runs `work` on every instance with `workers` threads. Results come back
/// in input order whatever order they finish in; `seed` shuffles the order
/// in which instances are started.
pub fn run_pool<T, R, F>(items: &[T], workers: usize, seed: Option<u64>, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    let mut order: Vec<usize> = (0..items.len()).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool");
    let mut done: Vec<(usize, R)> = pool.install(|| order.par_iter().map(|&k| (k, work(k, &items[k]))).collect());
    done.sort_by_key(|(k, _)| *k);
    done.into_iter().map(|(_, r)| r).collect()
}

pub struct Solved {
    pub report: InstanceReport,
    /// Solutions for text rendering.
    pub rendered: Vec<String>,
}

fn status_of(e: &CspError) -> Status {
    match e {
        CspError::Contradiction(_) => Status::Contradiction,
        CspError::CapacityExceeded { .. } => Status::CapacityExceeded,
        CspError::Timeout => Status::Timeout,
        _ => Status::Failed,
    }
}

fn stats_report(result: &SolveResult<f64>) -> SolveStatsReport {
    let s = &result.stats;
    SolveStatsReport {
        rounds: s.rounds,
        merges: s.merges,
        capacity_failures: s.capacity_failures,
        propagation_updates: s.propagation_updates,
        max_table_entries: s.max_table_entries,
        log2_max_table_entries: log2_entries(s.max_table_entries),
        max_upper_bound_entropy: s.max_upper_bound_entropy,
    }
}

/// Solution set of a solve result: the unique assignment, or an enumeration
/// when asked for.
fn collect(spec: &PuzzleSpec, result: &SolveResult<f64>, settings: &Settings) -> Result<(Vec<Assignment>, bool), String> {
    let solutions = if settings.enumerate {
        let e = enumerate_solutions(result, settings.cap).map_err(|e| e.to_string())?;
        (e.solutions, e.truncated)
    } else if result.is_unique() {
        (vec![result.solved.clone()], false)
    } else {
        (Vec::new(), false)
    };
    for a in &solutions.0 {
        if !verify_solution(spec, a).map_err(|e| e.to_string())? {
            return Err("solver returned an assignment that breaks a rule".into());
        }
    }
    Ok(solutions)
}

pub fn solve_instance(index: usize, instance: &Instance, settings: &Settings) -> Solved {
    let start = Instant::now();
    let kind = instance.spec.kind().name().to_owned();
    let mut report = InstanceReport {
        schema_version: SCHEMA_VERSION,
        index,
        source: instance.source.clone(),
        kind,
        metric: settings.metric.to_string(),
        status: Status::Failed,
        solved: false,
        unique: false,
        tree: false,
        solution_count: None,
        truncated: None,
        stats: SolveStatsReport::default(),
        runtime_ms: 0.0,
        solutions: None,
        error: None,
    };
    let mut rendered = Vec::new();
    match build_factors::<f64>(&instance.spec) {
        Err(e) => {
            report.status = Status::Contradiction;
            report.error = Some(e.to_string());
        }
        Ok(Model { registry, problem }) => match problem.solve(&settings.config(settings.metric)) {
            Err(e) => {
                report.status = status_of(&e);
                report.error = Some(e.to_string());
            }
            Ok(result) => {
                report.tree = result.graph_is_tree;
                report.unique = result.is_unique();
                report.stats = stats_report(&result);
                match collect(&instance.spec, &result, settings) {
                    Err(e) => report.error = Some(e),
                    Ok((solutions, truncated)) => {
                        report.status = if truncated {
                            Status::Truncated
                        } else if report.unique || settings.enumerate {
                            Status::Solved
                        } else {
                            Status::Open
                        };
                        if settings.enumerate {
                            report.solution_count = Some(solutions.len());
                            report.truncated = Some(truncated);
                            report.unique = solutions.len() == 1 && !truncated;
                        }
                        if report.status == Status::Solved && solutions.is_empty() {
                            report.status = Status::Contradiction;
                        }
                        rendered = solutions.iter().map(|a| render(&instance.spec, &registry, a)).collect();
                        if settings.enumerate || report.unique {
                            report.solutions = Some(solutions.iter().map(|a| labelled(&registry, a)).collect());
                        }
                    }
                }
            }
        },
    }
    report.solved = report.status.is_success();
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Solved { report, rendered }
}

pub fn compare_instance(index: usize, instance: &Instance, settings: &Settings) -> CompareReport {
    let mut report = CompareReport {
        schema_version: SCHEMA_VERSION,
        index,
        source: instance.source.clone(),
        kind: instance.spec.kind().name().to_owned(),
        topologies: Vec::new(),
        metrics: Vec::new(),
        error: None,
    };
    let model = match build_factors::<f64>(&instance.spec) {
        Ok(m) => m,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    for topology in Topology::ALL {
        let start = Instant::now();
        let config = ConvergenceConfig {
            deadline: settings.timeout.map(|t| Instant::now() + t),
            ..ConvergenceConfig::with_mode(settings.mode)
        };
        let entry = match single_pass(&model.problem, topology, &config) {
            Ok(pass) => TopologyReport {
                topology: topology.to_string(),
                clusters: pass.clusters,
                edges: pass.edges,
                solved: pass.is_solved() && verify_solution(&instance.spec, &pass.assignment).unwrap_or(false),
                undecided_variables: pass.domains.values().filter(|d| d.cardinality() > 1).count(),
                updates: pass.stats.updates,
                converged: pass.stats.converged,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                error: None,
            },
            Err(e) => TopologyReport {
                topology: topology.to_string(),
                clusters: 0,
                edges: 0,
                solved: false,
                undecided_variables: 0,
                updates: 0,
                converged: false,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                error: Some(e.to_string()),
            },
        };
        report.topologies.push(entry);
    }
    for metric in AttractionMetric::ALL {
        let start = Instant::now();
        let (status, rounds, max) = match model.problem.solve(&settings.config(metric)) {
            Ok(r) => (
                if r.is_unique() { Status::Solved } else { Status::Open },
                r.stats.rounds,
                r.stats.max_table_entries,
            ),
            Err(e) => (status_of(&e), 0, 0),
        };
        report.metrics.push(MetricReport {
            metric: metric.to_string(),
            status,
            rounds,
            max_table_entries: max,
            log2_max_table_entries: log2_entries(max),
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    report
}
