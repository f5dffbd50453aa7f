mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pgm_forge::csp::{enumerate_solutions, AttractionMetric, DEFAULT_MERGE_CAP};
use pgm_forge::inference::ConvergenceConfig;
use pgm_forge::puzzles::{build_factors, decode_hamming, parse_graph_colouring, HammingSpec, PuzzleKind, PuzzleSpec};
use pgm_forge::NormMode;
use serde::Serialize;

use report::{labelled, ColourReport, HammingReport, Status, SCHEMA_VERSION};
use run::{compare_instance, load, read_input, run_pool, solve_instance, InputError, Instance, Settings};

const SOLVE_FAILURE: u8 = 1;
const INPUT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "pgm-forge", version, about = "Solve puzzles and decode codes with loopy belief propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every puzzle in the input files.
    Solve(SolveArgs),
    /// Decode a received Hamming(7,4) word.
    DecodeHamming(HammingArgs),
    /// Single-pass Bethe vs LTRIP propagation, and purge-and-merge under each metric.
    Compare(CompareArgs),
    /// Colour a graph given as an edge list.
    Color(ColorArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Overlap,
    Entropy,
    Gravity,
}

impl From<Metric> for AttractionMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Overlap => AttractionMetric::Overlap,
            Metric::Entropy => AttractionMetric::Entropy,
            Metric::Gravity => AttractionMetric::Gravity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Max,
    Sum,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_kind(s: &str) -> Result<PuzzleKind, String> {
    s.parse()
}

#[derive(Args)]
struct SolverArgs {
    /// Attraction metric used to cluster factors.
    #[arg(long, value_enum, default_value = "gravity")]
    metric: Metric,
    /// Message normalisation for propagation.
    #[arg(long, value_enum, default_value = "max")]
    mode: Mode,
    /// First entropy budget in bits.
    #[arg(long)]
    threshold_start: Option<f64>,
    /// Budget increase per round in bits.
    #[arg(long)]
    threshold_step: Option<f64>,
    /// Largest table a merge may build.
    #[arg(long, default_value_t = DEFAULT_MERGE_CAP)]
    table_cap: usize,
    /// Per-instance time limit in seconds.
    #[arg(long)]
    timeout_s: Option<f64>,
    /// Worker threads; instances run independently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Shuffles the order instances are started in; output order is fixed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    /// Puzzle type, for example sudoku9, killer, kakuro, fill_a_pix, calcudoku.
    #[arg(long, value_parser = parse_kind)]
    kind: PuzzleKind,
    /// Input files; `-` reads standard input.
    #[arg(default_value = "-")]
    files: Vec<PathBuf>,
    /// List every solution up to --cap.
    #[arg(long)]
    enumerate: bool,
    /// Most solutions to enumerate.
    #[arg(long, default_value_t = 1000)]
    cap: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: PuzzleKind,
    #[arg(default_value = "-")]
    files: Vec<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ColorArgs {
    /// Edge-list file; `-` reads standard input.
    #[arg(default_value = "-")]
    file: PathBuf,
    /// Number of colours; without it the smallest sufficient count is searched.
    #[arg(long, visible_alias = "colors")]
    colours: Option<u16>,
    /// Count colourings up to --cap instead of finding one.
    #[arg(long)]
    enumerate: bool,
    #[arg(long, default_value_t = 1000)]
    cap: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct HammingArgs {
    /// Seven received bits, for example 1110010.
    received: String,
    /// Channel bit-flip probability.
    #[arg(long, default_value_t = 0.1)]
    flip_prob: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn settings(args: &SolverArgs, enumerate: bool, cap: usize) -> Result<Settings, InputError> {
    let timeout = match args.timeout_s {
        Some(t) if !(t.is_finite() && t > 0.0) => return Err(InputError(format!("--timeout-s must be positive, got {t}"))),
        t => t.map(Duration::from_secs_f64),
    };
    Ok(Settings {
        metric: args.metric.into(),
        mode: match args.mode {
            Mode::Max => NormMode::Max,
            Mode::Sum => NormMode::Sum,
        },
        threshold_start: args.threshold_start,
        threshold_step: args.threshold_step,
        table_cap: args.table_cap,
        enumerate,
        cap,
        timeout,
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("reports serialise"));
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode, InputError> {
    let settings = settings(&args.solver, args.enumerate, args.cap)?;
    let instances = load(args.kind, &args.files)?;
    Ok(solve_all(&instances, &settings, &args.solver))
}

fn solve_all(instances: &[Instance], settings: &Settings, args: &SolverArgs) -> ExitCode {
    let results = run_pool(instances, args.workers, args.seed, |k, inst| solve_instance(k, inst, settings));
    let mut failures = 0;
    for solved in &results {
        let r = &solved.report;
        failures += usize::from(!r.solved);
        if args.format == Format::Json {
            print_json(r);
            continue;
        }
        let mut line = format!("[{}] {} {}: {:?}", r.index + 1, r.source, r.kind, r.status);
        if let Some(n) = r.solution_count {
            line.push_str(&format!(", {n} solution(s){}", if r.truncated == Some(true) { " (cap reached)" } else { "" }));
        }
        line.push_str(&format!(
            ", {} rounds, max table {} entries, {:.1} ms",
            r.stats.rounds, r.stats.max_table_entries, r.runtime_ms
        ));
        if let Some(e) = &r.error {
            line.push_str(&format!(": {e}"));
        }
        println!("{line}");
        const SHOWN: usize = 3;
        for grid in solved.rendered.iter().take(SHOWN) {
            println!("{grid}");
        }
        if solved.rendered.len() > SHOWN {
            println!("... {} more\n", solved.rendered.len() - SHOWN);
        }
    }
    if args.format == Format::Text {
        println!("solved {}/{}", results.len() - failures, results.len());
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(SOLVE_FAILURE)
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<ExitCode, InputError> {
    let settings = settings(&args.solver, false, 0)?;
    let instances = load(args.kind, &args.files)?;
    let reports = run_pool(&instances, args.solver.workers, args.solver.seed, |k, inst| compare_instance(k, inst, &settings));
    let mut errors = 0;
    let (mut bethe, mut ltrip, mut bethe_only) = (0, 0, 0);
    let (mut gravity_smaller, mut compared) = (0, 0);
    for r in &reports {
        errors += usize::from(r.error.is_some());
        let solved = |name: &str| r.topologies.iter().any(|t| t.topology == name && t.solved);
        bethe += usize::from(solved("bethe"));
        ltrip += usize::from(solved("ltrip"));
        bethe_only += usize::from(solved("bethe") && !solved("ltrip"));
        let table = |name: &str| r.metrics.iter().find(|m| m.metric == name && m.status == Status::Solved).map(|m| m.max_table_entries);
        if let (Some(g), Some(h)) = (table("gravity"), table("entropy")) {
            compared += 1;
            gravity_smaller += usize::from(g <= h);
        }
        if args.solver.format == Format::Json {
            print_json(r);
            continue;
        }
        let topo: Vec<String> = r
            .topologies
            .iter()
            .map(|t| format!("{} {} ({} updates)", t.topology, if t.solved { "solved" } else { "open" }, t.updates))
            .collect();
        let metrics: Vec<String> =
            r.metrics.iter().map(|m| format!("{} {:?} max {}", m.metric, m.status, m.max_table_entries)).collect();
        println!("[{}] {}: {}; {}", r.index + 1, r.source, topo.join(", "), metrics.join(", "));
        if let Some(e) = &r.error {
            println!("    error: {e}");
        }
    }
    if args.solver.format == Format::Text {
        println!(
            "single pass: bethe solved {bethe}, ltrip solved {ltrip}, solved by bethe only {bethe_only}; \
             gravity table <= entropy table on {gravity_smaller}/{compared}"
        );
    }
    Ok(if errors == 0 { ExitCode::SUCCESS } else { ExitCode::from(SOLVE_FAILURE) })
}

fn cmd_color(args: &ColorArgs) -> Result<ExitCode, InputError> {
    let text = read_input(&args.file)?;
    let source = args.file.display().to_string();
    let parse = |k: Option<u16>| {
        let spec = match k {
            Some(k) => parse_graph_colouring(&text, k),
            None => pgm_forge::puzzles::parse(PuzzleKind::GraphColouring, &text),
        };
        spec.map_err(|e| InputError(format!("{source}: {e}")))
    };
    // The file may name a colour count; the flag wins.
    let declared = match args.colours {
        Some(k) => Some(k),
        None => match pgm_forge::puzzles::parse(PuzzleKind::GraphColouring, &text) {
            Ok(PuzzleSpec::GraphColouring(g)) => Some(g.colours),
            _ => None,
        },
    };
    if args.enumerate {
        let k = declared.ok_or_else(|| InputError("--enumerate needs a colour count".into()))?;
        let settings = settings(&args.solver, true, args.cap)?;
        return Ok(solve_all(&[Instance { source: source.clone(), spec: parse(Some(k))? }], &settings, &args.solver));
    }
    let settings = settings(&args.solver, false, 0)?;
    let start = Instant::now();
    let probe = parse(Some(1))?;
    let PuzzleSpec::GraphColouring(graph) = &probe else { unreachable!("graph parser") };
    let candidates: Vec<u16> = match declared {
        Some(k) => vec![k],
        None => (1..=graph.nodes.len().max(1) as u16).collect(),
    };
    let mut report = ColourReport {
        schema_version: SCHEMA_VERSION,
        source: source.clone(),
        nodes: graph.nodes.len(),
        edges: graph.edges.len(),
        attempts: Vec::new(),
        colours: None,
        colouring: None,
        runtime_ms: 0.0,
    };
    for k in candidates {
        let spec = parse(Some(k))?;
        let model = build_factors::<f64>(&spec).map_err(|e| InputError(e.to_string()))?;
        let found = model
            .problem
            .solve(&settings.config(settings.metric))
            .map_err(|e| e.to_string())
            .and_then(|r| enumerate_solutions(&r, 1).map_err(|e| e.to_string()));
        match found {
            Ok(e) if !e.solutions.is_empty() => {
                report.attempts.push((k, Status::Solved));
                report.colours = Some(k);
                report.colouring = Some(labelled(&model.registry, &e.solutions[0]));
                break;
            }
            Ok(_) => report.attempts.push((k, Status::Contradiction)),
            Err(e) => {
                log::info!("{k} colours: {e}");
                let status = if e.contains("contradiction") { Status::Contradiction } else { Status::Failed };
                report.attempts.push((k, status));
                if status != Status::Contradiction {
                    break;
                }
            }
        }
    }
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    if args.solver.format == Format::Json {
        print_json(&report);
    } else {
        match (&report.colours, &report.colouring) {
            (Some(k), Some(colouring)) => {
                println!("{source}: {k} colours suffice");
                for (node, c) in colouring {
                    println!("{node}={c}");
                }
            }
            _ => println!("{source}: no colouring found ({:?})", report.attempts),
        }
    }
    Ok(if report.colours.is_some() { ExitCode::SUCCESS } else { ExitCode::from(SOLVE_FAILURE) })
}

fn cmd_decode(args: &HammingArgs) -> Result<ExitCode, InputError> {
    let bits: Vec<u8> = args
        .received
        .trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(InputError(format!("received word must be bits, found `{c}`"))),
        })
        .collect::<Result<_, _>>()?;
    let received: [u8; 7] =
        bits.try_into().map_err(|b: Vec<u8>| InputError(format!("received word needs 7 bits, found {}", b.len())))?;
    let spec = HammingSpec { received, flip_prob: args.flip_prob };
    PuzzleSpec::Hamming74(spec.clone()).validate().map_err(|e| InputError(e.to_string()))?;
    let start = Instant::now();
    let decoded = decode_hamming(&spec, &ConvergenceConfig::default()).map_err(|e| InputError(e.to_string()))?;
    let bits = |b: &[u8]| b.iter().map(u8::to_string).collect::<String>();
    let report = HammingReport {
        schema_version: SCHEMA_VERSION,
        received: bits(&received),
        flip_prob: args.flip_prob,
        codeword: bits(&decoded.codeword),
        message: bits(&decoded.message),
        confidence: decoded.confidence.to_vec(),
        updates: decoded.stats.updates,
        converged: decoded.stats.converged,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    if args.format == Format::Json {
        print_json(&report);
    } else {
        println!("message {}", report.message);
        println!("codeword {}", report.codeword);
        for (i, c) in report.confidence.iter().enumerate() {
            println!("b{} = {} with probability {c:.4}", i + 1, decoded.codeword[i]);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PGM_FORGE_LOG")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::DecodeHamming(args) => cmd_decode(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Color(args) => cmd_color(args),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(INPUT_ERROR)
    })
}
