use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use lobexec::analysis::{alternating_limits, analyze_model, long_time_limit, Cutoff, LIMIT_MAX_ITER, LIMIT_TOL};
use lobexec::engine::{compute_y, compute_y_pimi, value_function, YField};
use lobexec::execution::{evaluate_field, generate_strategy, optimal_trade};
use lobexec::model::{
    build_example_premature_deterministic, build_example_premature_stochastic, build_example_roundtrip_on_unit_mean,
    load_model, model_to_file, random_tree, to_json, validate, validate_pimi, Model, RandomTreeConfig, StepMoments,
    ValidationReport,
};
use lobexec::oracle::{brute_force_value, monte_carlo_cost, GridSpec, MCConfig, MCEstimate};
use lobexec::report::{analysis_rows, strategy_rows, to_csv, y_rows, AnalysisRow};
use lobexec::{ModelError, Report, Tree};

const THREADS_ENV: &str = "LOBEXEC_THREADS";

#[derive(Parser)]
#[command(name = "lobexec", version, about = "Optimal execution in a limit order book with stochastic depth and resilience")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the main output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    PrematureDet,
    PrematureStoch,
    RoundtripUnitMean,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelArgs {
    /// Model file (JSON)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Built-in example model
    #[arg(long, value_enum)]
    example: Option<Preset>,
}

#[derive(Args)]
struct State {
    /// Initial position
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    x: f64,
    /// Initial price deviation
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    d: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model against the structural assumptions
    Validate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Solve the recursion and print the value and the optimal strategy
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        state: State,
        /// Write the Y field as CSV
        #[arg(long)]
        y_out: Option<PathBuf>,
        /// Write the optimal strategy as CSV
        #[arg(long)]
        strategy_out: Option<PathBuf>,
    },
    /// Classify round trips and premature closure at every node
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        /// Event tolerance
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Long-time limit of the homogeneous recursion, or alternating limits for two parameter triples
    Limit {
        /// beta eta alpha [beta2 eta2 alpha2]
        #[arg(num_args = 3..=6, required = true, allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long, default_value_t = LIMIT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = LIMIT_MAX_ITER)]
        max_iter: u64,
    },
    /// Compare the analytic value with the grid-search and Monte Carlo oracles
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        state: State,
        /// Relative tolerance of the grid comparison
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid points per node and round (odd)
        #[arg(long, default_value_t = 21)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        rounds: usize,
    },
    /// Write a random valid tree or an example model as JSON
    Generate {
        #[arg(long, value_enum, conflicts_with_all = ["depth", "branching"])]
        example: Option<Preset>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        branching: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A failed command: exit 1 for domain failures, 2 for unreadable or malformed input.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn domain(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn model_failure(error: ModelError) -> Failure {
    match error {
        ModelError::Validation(_) | ModelError::InvalidParameter(_) | ModelError::TooManyNodes { .. } => domain(error),
        _ => input(error),
    }
}

type Run = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        eprintln!("error: {:#}", f.error);
        return ExitCode::from(f.code);
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| input(anyhow!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(domain)
}

fn run(cli: &Cli) -> Run {
    let out = Output { format: cli.format, path: cli.out.as_deref() };
    match &cli.command {
        Command::Validate { model } => cmd_validate(&out, model),
        Command::Solve { model, state, y_out, strategy_out } => {
            cmd_solve(&out, model, state, y_out.as_deref(), strategy_out.as_deref())
        }
        Command::Analyze { model, tol } => cmd_analyze(&out, model, *tol),
        Command::Limit { params, tol, max_iter } => cmd_limit(&out, params, *tol, *max_iter),
        Command::Verify { model, state, tol, samples, seed, points, rounds } => {
            let grid = GridSpec { half_width: None, points: *points, rounds: *rounds };
            let mc = MCConfig { samples: *samples, seed: *seed, antithetic: false };
            cmd_verify(&out, model, state, *tol, &grid, &mc)
        }
        Command::Generate { example, depth, branching, seed } => cmd_generate(&out, *example, *depth, *branching, *seed),
    }
}

struct Output<'a> {
    format: Format,
    path: Option<&'a Path>,
}

impl Output<'_> {
    fn emit(&self, text: &str) -> Result<(), Failure> {
        match self.path {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(input)
}

fn json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn preset(which: Preset) -> Result<Model<f64>, ModelError> {
    let tree = match which {
        Preset::PrematureDet => build_example_premature_deterministic(1.0, 1.0, 0.5)?,
        Preset::PrematureStoch => build_example_premature_stochastic(0.5)?,
        Preset::RoundtripUnitMean => build_example_roundtrip_on_unit_mean(0.1, 0.5, [1.0, 1.25, 1.5625])?,
    };
    Ok(Model::Tree(tree))
}

fn load(args: &ModelArgs) -> Result<Model<f64>, Failure> {
    match (&args.model, args.example) {
        (_, Some(which)) => preset(which).map_err(model_failure),
        (Some(path), None) => load_model(path)
            .map_err(|e| match e {
                ModelError::Io(io) => input(anyhow!("cannot read {}: {io}", path.display())),
                other => model_failure(other),
            }),
        (None, None) => Err(input(anyhow!("either --model or --example is required"))),
    }
}

fn validation(model: &Model<f64>) -> ValidationReport {
    match model {
        Model::Tree(tree) => validate(tree),
        Model::Pimi(pimi) => validate_pimi(pimi),
    }
}

/// Loads, validates and solves; the tree is expanded for independent-increment models.
fn solved(args: &ModelArgs) -> Result<(Model<f64>, Tree, YField<f64>), Failure> {
    let model = load(args)?;
    let report = validation(&model);
    if !report.ok {
        return Err(domain(ModelError::Validation(report)));
    }
    let field = match &model {
        Model::Tree(tree) => compute_y(tree),
        Model::Pimi(pimi) => compute_y_pimi(pimi),
    }
    .map_err(domain)?;
    let tree = model.tree().map_err(model_failure)?;
    Ok((model, tree, field))
}

fn cmd_validate(out: &Output, args: &ModelArgs) -> Run {
    let model = load(args)?;
    let report = validation(&model);
    let text = match out.format {
        Format::Json => json(&report),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                location: String,
                rule: String,
                value: f64,
            }
            let rows: Vec<Row> = report
                .violations
                .iter()
                .map(|v| Row { location: v.location.to_string(), rule: format!("{:?}", v.rule), value: v.value })
                .collect();
            if rows.is_empty() { "location,rule,value\n".to_string() } else { to_csv(&rows) }
        }
        Format::Table => {
            let mut s = String::new();
            if report.ok {
                s.push_str("model is valid\n");
            }
            for v in &report.violations {
                let _ = writeln!(s, "{}: {} violated (value {})", v.location, v.rule, v.value);
            }
            s
        }
    };
    out.emit(&text)?;
    Ok(if report.ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct SolveRow {
    node_id: usize,
    time: i64,
    gamma: f64,
    #[serde(rename = "Y")]
    y: f64,
    trade: f64,
    position_after: f64,
    deviation_before: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    x: f64,
    d: f64,
    value: f64,
    expected_cost: f64,
    nodes: Vec<SolveRow>,
}

fn cmd_solve(out: &Output, args: &ModelArgs, state: &State, y_out: Option<&Path>, strategy_out: Option<&Path>) -> Run {
    let (_, tree, field) = solved(args)?;
    let root = tree.root();
    let value = value_function(&tree, root, &field, state.x, state.d);
    let strategy = generate_strategy(&tree, &field, state.x, state.d).map_err(domain)?;
    let costs = evaluate_field(&tree, &strategy).map_err(domain)?;
    if let Some(path) = y_out {
        write_file(path, &to_csv(&y_rows(&tree, &field)))?;
    }
    if let Some(path) = strategy_out {
        write_file(path, &to_csv(&strategy_rows(&tree, &strategy)))?;
    }
    let nodes: Vec<SolveRow> = y_rows(&tree, &field)
        .into_iter()
        .zip(strategy_rows(&tree, &strategy))
        .map(|(y, s)| SolveRow {
            node_id: y.node_id,
            time: y.time,
            gamma: y.gamma,
            y: y.y,
            trade: s.trade,
            position_after: s.position_after,
            deviation_before: s.deviation_before,
        })
        .collect();
    let result = SolveOutput { x: state.x, d: state.d, value, expected_cost: costs.expected_cost, nodes };
    let text = match out.format {
        Format::Json => json(&result),
        Format::Csv => to_csv(&result.nodes),
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "V(root, x = {}, d = {}) = {:.12}", state.x, state.d, value);
            let _ = writeln!(s, "expected cost of optimal strategy = {:.12}", costs.expected_cost);
            let _ = writeln!(s, "{:>6} {:>5} {:>14} {:>14} {:>16} {:>16} {:>16}", "node", "time", "gamma", "Y", "trade", "position_after", "deviation");
            for r in &result.nodes {
                let _ = writeln!(
                    s,
                    "{:>6} {:>5} {:>14.8} {:>14.10} {:>16.10} {:>16.10} {:>16.10}",
                    r.node_id, r.time, r.gamma, r.y, r.trade, r.position_after, r.deviation_before
                );
            }
            s
        }
    };
    out.emit(&text)?;
    Ok(0)
}

fn cmd_analyze(out: &Output, args: &ModelArgs, tol: f64) -> Run {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(input(anyhow!("--tol must be a non-negative number")));
    }
    let (model, _, field) = solved(args)?;
    let report: Report = analyze_model(&model, &field, tol).map_err(domain)?;
    let text = match out.format {
        Format::Json => json(&report),
        Format::Csv => to_csv(&analysis_rows(&report)),
        Format::Table => analysis_table(&report, model.pimi().map(|p| p.horizon())),
    };
    out.emit(&text)?;
    Ok(0)
}

fn analysis_table(report: &Report, horizon: Option<i64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6} {:>5} {:>14} {:>14} {:>11} {:>6} {:>16} {:>14}", "node", "time", "gamma", "Y", "round_trip", "one_go", "z", "upper_bound");
    for r in analysis_rows(report) {
        let AnalysisRow { node_id, time, gamma, y, round_trip, one_go, z, upper_bound } = r;
        let z = z.parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| format!("{v:.10}")).unwrap_or(z);
        let _ = writeln!(s, "{node_id:>6} {time:>5} {gamma:>14.8} {y:>14.10} {round_trip:>11} {one_go:>6} {z:>16} {upper_bound:>14.10}");
    }
    if let (Some(cutoff), Some(horizon)) = (report.pimi_cutoff, horizon) {
        match cutoff {
            Cutoff::NoneBeforeHorizon => {
                let _ = writeln!(s, "round-trip cutoff: none before the horizon");
            }
            Cutoff::At(n0) => {
                let _ = writeln!(s, "round-trip cutoff: Y = 1/2 for times {}..={horizon}", n0 + 1);
            }
        }
    }
    if let Some(limit) = &report.limit {
        let _ = writeln!(s, "long-time limit: {} {}", limit.case, values_text(&limit.values));
    }
    s
}

fn values_text(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.12}")).collect::<Vec<_>>().join(" ")
}

fn cmd_limit(out: &Output, params: &[f64], tol: f64, max_iter: u64) -> Run {
    if params.len() != 3 && params.len() != 6 {
        return Err(input(anyhow!("expected 3 or 6 parameters (beta eta alpha [beta2 eta2 alpha2]), got {}", params.len())));
    }
    let triple = |i: usize| StepMoments { beta: params[i], eta: params[i + 1], alpha: params[i + 2] };
    let result = if params.len() == 3 {
        long_time_limit(&triple(0), tol, max_iter)
    } else {
        alternating_limits(&triple(0), &triple(3), tol, max_iter)
    }
    .map_err(domain)?;
    let text = match out.format {
        Format::Json => json(&result),
        Format::Csv => {
            let mut s = String::from("case,index,value,iterations,residual,converged\n");
            for (i, v) in result.values.iter().enumerate() {
                let _ = writeln!(s, "{},{i},{v},{},{},{}", result.case, result.iterations, result.residual, result.converged);
            }
            s
        }
        Format::Table => {
            let mut s = format!("{} {}\n", result.case, values_text(&result.values));
            let _ = writeln!(s, "iterations {} residual {:e} converged {}", result.iterations, result.residual, result.converged);
            s
        }
    };
    out.emit(&text)?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyOutput {
    x: f64,
    d: f64,
    analytic: f64,
    grid: f64,
    grid_gap: f64,
    grid_tolerance: f64,
    grid_pass: bool,
    monte_carlo: MCEstimate<f64>,
    mc_z: f64,
    mc_pass: bool,
}

fn cmd_verify(out: &Output, args: &ModelArgs, state: &State, tol: f64, grid: &GridSpec, mc: &MCConfig) -> Run {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(input(anyhow!("--tol must be positive")));
    }
    grid.check().map_err(input)?;
    let (_, tree, field) = solved(args)?;
    let root = tree.root();
    let analytic = value_function(&tree, root, &field, state.x, state.d);
    let brute = brute_force_value(&tree, root, state.x, state.d, grid).map_err(domain)?;
    let estimate =
        monte_carlo_cost(&tree, state.x, state.d, |n, x, d| optimal_trade(&tree, n, &field, x, d), mc).map_err(domain)?;
    let grid_tolerance = tol * (1.0 + analytic.abs());
    let grid_gap = (brute - analytic).abs();
    let mc_gap = (estimate.mean - analytic).abs();
    let mc_z = if estimate.stderr > 0.0 {
        mc_gap / estimate.stderr
    } else if mc_gap <= 1e-12 * (1.0 + analytic.abs()) {
        0.0
    } else {
        f64::INFINITY
    };
    let result = VerifyOutput {
        x: state.x,
        d: state.d,
        analytic,
        grid: brute,
        grid_gap,
        grid_tolerance,
        grid_pass: grid_gap <= grid_tolerance,
        monte_carlo: estimate,
        mc_z,
        mc_pass: mc_z <= 4.0,
    };
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let text = match out.format {
        Format::Json => json(&result),
        Format::Csv => {
            let mut s = String::from("check,analytic,oracle,gap,bound,pass\n");
            let _ = writeln!(s, "grid,{analytic},{brute},{grid_gap},{grid_tolerance},{}", result.grid_pass);
            let _ = writeln!(s, "monte_carlo,{analytic},{},{mc_gap},{},{}", estimate.mean, 4.0 * estimate.stderr, result.mc_pass);
            s
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "analytic value  {analytic:.12}");
            let _ = writeln!(s, "grid oracle     {brute:.12}");
            let _ = writeln!(s, "MC mean         {:.12} +/- {:.3e} ({} draws, seed {})", estimate.mean, estimate.stderr, estimate.draws, mc.seed);
            let _ = writeln!(s, "{} grid: |gap| = {grid_gap:.3e} <= {grid_tolerance:.3e}", verdict(result.grid_pass));
            let _ = writeln!(s, "{} monte carlo: {mc_z:.3} standard errors (limit 4)", verdict(result.mc_pass));
            s
        }
    };
    out.emit(&text)?;
    Ok(if result.grid_pass && result.mc_pass { 0 } else { 1 })
}

fn cmd_generate(out: &Output, example: Option<Preset>, depth: usize, branching: usize, seed: u64) -> Run {
    let model = match example {
        Some(which) => preset(which).map_err(model_failure)?,
        None => {
            if branching == 0 {
                return Err(input(anyhow!("--branching must be at least 1")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = RandomTreeConfig { depth, max_branching: branching, ..Default::default() };
            Model::Tree(random_tree(&mut rng, &cfg))
        }
    };
    let mut text = to_json(&model_to_file(&model));
    text.push('\n');
    out.emit(&text)?;
    Ok(0)
}
