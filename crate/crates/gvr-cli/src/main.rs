use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gvr_core::closed_form::{delta_q_its, epsilon_lower_bound, ItsAnchor, ItsParams};
use gvr_core::experiments::reference::reference_checks;
use gvr_core::experiments::table::compare_tables;
use gvr_core::experiments::{
    fmt_sig9, parse_game_arg, run, training_table, write_outputs, ExperimentKind, ExperimentSpec, ResultTable,
};
use gvr_core::graph::{build_graph_with, joint_q_table, GraphOptions, QProvider};
use gvr_core::learners::{gvr_train, Decomposition, EpsilonSchedule, GvrConfig, Variant};
use gvr_core::par::Exec;
use gvr_core::{JointAction, PayoffMatrix};

// stdout writes propagate errors so a closed pipe ends the run instead of panicking.
macro_rules! outln {
    ($($t:tt)*) => { writeln!(std::io::stdout().lock(), $($t)*)? };
}

/// Exit status for a verification mismatch.
const MISMATCH: u8 = 2;

#[derive(Parser)]
#[command(name = "gvr", version, about = "Closed-form analysis, transition graphs and GVR training on matrix games")]
struct Cli {
    /// Seed for training runs and the occupancy master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV/JSON/SVG/DOT files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON config: a training config for `train`, an experiment spec elsewhere.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form joint Q values and analytic bounds.
    Calc {
        #[command(subcommand)]
        what: Calc,
    },
    /// Greedy transition diagram of a game.
    Graph(GraphArgs),
    /// One training run.
    Train(TrainArgs),
    /// Run an experiment spec (any kind).
    Sweep(SweepArgs),
    /// Compare results against the reference tables, or two result CSVs.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    ClosedForm,
    FixedPoint,
    Its,
}

#[derive(Args)]
struct ProviderOpts {
    #[arg(long, value_enum, default_value = "fixed-point")]
    provider: ProviderArg,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Relative gap that marks an action superior under ITS.
    #[arg(long = "e-q0", default_value_t = 0.1)]
    e_q0: f64,
    /// Anchor ITS inferior targets to the true greedy payoff instead of its learned joint Q.
    #[arg(long)]
    true_greedy_anchor: bool,
}

impl ProviderOpts {
    fn provider(&self) -> QProvider {
        match self.provider {
            ProviderArg::ClosedForm => QProvider::ClosedForm,
            ProviderArg::FixedPoint => QProvider::FixedPoint,
            ProviderArg::Its => QProvider::Its {
                alpha: self.alpha,
                e_q0: self.e_q0,
                anchor: if self.true_greedy_anchor { ItsAnchor::TrueGreedy } else { ItsAnchor::SelfConsistent },
            },
        }
    }
}

#[derive(Subcommand)]
enum Calc {
    /// Joint Q table for a given greedy action.
    JointQ {
        #[arg(long, default_value = "tab2")]
        game: String,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// Comma-separated greedy action; defaults to the optimum.
        #[arg(long)]
        greedy: Option<String>,
        #[command(flatten)]
        provider: ProviderOpts,
    },
    /// Superior-weight and exploration bounds table.
    Bounds,
    /// Smallest ε at which ITS alone leaves only the optimal STN.
    Eps0 {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long = "e-q0")]
        e_q0: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// ΔQ(u*) under ITS in the hardest case.
    DeltaQ {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "e-q")]
        e_q: f64,
        /// True payoff of the greedy action.
        #[arg(long, default_value_t = 6.0)]
        q_greedy: f64,
        /// Joint Q of the greedy action; defaults to the true payoff.
        #[arg(long)]
        q_joint: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
    Csv,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long, default_value = "tab2")]
    game: String,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "dot")]
    format: GraphFormat,
    #[command(flatten)]
    provider: ProviderOpts,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "tab2")]
    game: String,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    decomposition: Option<DecompositionArg>,
    /// Constant exploration rate (overrides the config schedule).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Vdn,
    Its,
    Gvr,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecompositionArg {
    Lvd,
    Mvd,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment kind; taken from --config when omitted.
    #[arg(long)]
    kind: Option<String>,
    /// Print the fully resolved spec as JSON and exit.
    #[arg(long)]
    print_spec: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Kinds to check (default: the analytic and quick statistical ones).
    #[arg(long)]
    kind: Vec<String>,
    /// Compare two result CSVs instead: EXPECTED ACTUAL.
    #[arg(long, num_args = 2, value_names = ["EXPECTED", "ACTUAL"])]
    compare: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe))
}

fn exec_for(jobs: Option<usize>) -> Result<Exec> {
    match jobs {
        Some(0) => bail!("--jobs must be >= 1"),
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker pool")?;
            #[cfg(not(feature = "parallel"))]
            let _ = n;
            Ok(Exec::Parallel)
        }
        None => Ok(Exec::Parallel),
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let exec = exec_for(cli.jobs)?;
    match cli.cmd {
        Cmd::Calc { what } => calc(what, &cli.config, &cli.out, exec),
        Cmd::Graph(a) => graph(a, &cli.out, exec),
        Cmd::Train(a) => train(a, cli.seed, &cli.config, &cli.out),
        Cmd::Sweep(a) => sweep(a, cli.seed, &cli.config, &cli.out, exec),
        Cmd::Verify(a) => verify(a, &cli.config, &cli.out, exec),
    }
}

fn parse_action(s: &str, game: &PayoffMatrix) -> Result<JointAction> {
    let v: Vec<usize> = s
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad joint action '{s}'"))?;
    let a = JointAction(v);
    game.check_action(&a)?;
    Ok(a)
}

fn load_spec(kind: Option<&str>, config: &Option<PathBuf>, fallback: ExperimentKind) -> Result<ExperimentSpec> {
    match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if let (Some(k), Some(obj)) = (kind, v.as_object_mut()) {
                obj.entry("kind").or_insert_with(|| k.into());
            }
            Ok(ExperimentSpec::from_json(&v.to_string())?)
        }
        None => Ok(ExperimentSpec::preset(match kind {
            Some(k) => ExperimentKind::parse(k)?,
            None => fallback,
        })),
    }
}

fn print_table(t: &ResultTable) -> Result<()> {
    outln!("{}", t.columns.join(","));
    for r in &t.rows {
        outln!("{}", r.iter().map(|c| c.render()).collect::<Vec<_>>().join(","));
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, res: &gvr_core::experiments::RunOutput) -> Result<()> {
    match out {
        Some(dir) => {
            for p in write_outputs(dir, res)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => print_table(&res.table)?,
    }
    Ok(())
}

fn calc(what: Calc, config: &Option<PathBuf>, out: &Option<PathBuf>, exec: Exec) -> Result<u8> {
    match what {
        Calc::JointQ { game, epsilon, greedy, provider } => {
            let g = parse_game_arg(&game)?;
            let greedy = match greedy {
                Some(s) => parse_action(&s, &g)?,
                None => g.optimal_action(),
            };
            let t = joint_q_table(&g, &greedy, epsilon, provider.provider())?;
            let shape = g.shape();
            outln!("action,true_q,joint_q");
            for (i, q) in t.iter().enumerate() {
                outln!("\"{}\",{},{}", shape.unindex(i), fmt_sig9(g.values[i]), fmt_sig9(*q));
            }
        }
        Calc::Bounds => {
            let spec = load_spec(Some("bounds_table"), config, ExperimentKind::BoundsTable)?;
            emit(out, &run(&spec, exec)?)?;
        }
        Calc::Eps0 { m, n, e_q0, alpha } => {
            let b = epsilon_lower_bound(m, n, e_q0, alpha)?;
            outln!("epsilon0,eta0\n{},{}", fmt_sig9(b.epsilon0), fmt_sig9(b.eta0));
        }
        Calc::DeltaQ { n, m, epsilon, alpha, e_q, q_greedy, q_joint } => {
            let its = ItsParams { alpha, e_q0: e_q, e_q };
            let v = delta_q_its(n, m, epsilon, &its, q_greedy, q_joint.unwrap_or(q_greedy))?;
            outln!("delta_q\n{}", fmt_sig9(v));
        }
    }
    Ok(0)
}

fn graph(a: GraphArgs, out: &Option<PathBuf>, exec: Exec) -> Result<u8> {
    let g = parse_game_arg(&a.game)?;
    let tg = build_graph_with(&g, a.epsilon, a.provider.provider(), &GraphOptions { exec, ..GraphOptions::default() })?;
    let body = match a.format {
        GraphFormat::Dot => tg.to_dot(),
        GraphFormat::Json => tg.to_json() + "\n",
        GraphFormat::Csv => {
            let mut s = String::from("node,action,successor,is_stn,optimal\n");
            for (p, &i) in tg.nodes.iter().enumerate() {
                s += &format!(
                    "{i},\"{}\",\"{}\",{},{}\n",
                    tg.action(i),
                    tg.action(tg.successor[p]),
                    tg.stn[p] as u8,
                    (i == tg.optimal) as u8
                );
            }
            s
        }
    };
    write_or_print(out, &format!("graph.{}", ext(a.format)), &body)?;
    Ok(0)
}

fn ext(f: GraphFormat) -> &'static str {
    match f {
        GraphFormat::Dot => "dot",
        GraphFormat::Json => "json",
        GraphFormat::Csv => "csv",
    }
}

fn write_or_print(out: &Option<PathBuf>, name: &str, body: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            eprintln!("wrote {}", p.display());
        }
        None => write!(std::io::stdout().lock(), "{body}")?,
    }
    Ok(())
}

fn train(a: TrainArgs, seed: Option<u64>, config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<u8> {
    let g = parse_game_arg(&a.game)?;
    let mut cfg: GvrConfig = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GvrConfig::from_json(&text)?
        }
        None => GvrConfig::default(),
    };
    if let Some(v) = a.variant {
        cfg.variant = match v {
            VariantArg::Vdn => Variant::Vdn,
            VariantArg::Its => Variant::Its,
            VariantArg::Gvr => Variant::Gvr,
        };
    }
    if let Some(d) = a.decomposition {
        cfg.decomposition = match d {
            DecompositionArg::Lvd => Decomposition::Lvd,
            DecompositionArg::Mvd => Decomposition::Mvd,
        };
    }
    if let Some(e) = a.epsilon {
        cfg.epsilon = EpsilonSchedule::Constant { epsilon: e };
    }
    if let Some(i) = a.iterations {
        cfg.iterations = i;
    }
    let rec = gvr_train(&g, &cfg, seed.unwrap_or(0), 0)?;
    let table = training_table(&rec, &g);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let p = dir.join("train.csv");
        std::fs::write(&p, table.to_csv())?;
        eprintln!("wrote {}", p.display());
    }
    outln!(
        "final_greedy {} true_q {} optimal {} non_converged {} switches {}",
        rec.final_greedy,
        fmt_sig9(rec.final_test_return),
        rec.reached_optimal,
        rec.non_converged,
        rec.greedy_switches
    );
    Ok(0)
}

fn sweep(a: SweepArgs, seed: Option<u64>, config: &Option<PathBuf>, out: &Option<PathBuf>, exec: Exec) -> Result<u8> {
    if a.kind.is_none() && config.is_none() {
        bail!("sweep needs --kind or --config");
    }
    let mut spec = load_spec(a.kind.as_deref(), config, ExperimentKind::StnOccupancy)?;
    if let (Some(s), ExperimentKind::StnOccupancy) = (seed, spec.kind) {
        spec.grid.seeds = vec![s];
    }
    if a.print_spec {
        outln!("{}", spec.to_json());
        return Ok(0);
    }
    let res = run(&spec, exec)?;
    emit(out, &res)?;
    for c in reference_checks(&spec, &res.table) {
        eprintln!("{}", c.line());
    }
    Ok(0)
}

const DEFAULT_VERIFY: [ExperimentKind; 5] = [
    ExperimentKind::BoundsTable,
    ExperimentKind::TransitionGraph,
    ExperimentKind::EpsilonSweep,
    ExperimentKind::VerifyClosedForm,
    ExperimentKind::DeltaQVerification,
];

fn verify(a: VerifyArgs, config: &Option<PathBuf>, out: &Option<PathBuf>, exec: Exec) -> Result<u8> {
    if let Some(files) = a.compare {
        return compare_files(&files[0], &files[1], a.tol);
    }
    let specs: Vec<ExperimentSpec> = if config.is_some() {
        vec![load_spec(None, config, ExperimentKind::BoundsTable)?]
    } else if a.kind.is_empty() {
        DEFAULT_VERIFY.iter().map(|&k| ExperimentSpec::preset(k)).collect()
    } else {
        a.kind.iter().map(|k| Ok(ExperimentSpec::preset(ExperimentKind::parse(k)?))).collect::<Result<_>>()?
    };
    let mut failed = 0;
    for spec in specs {
        let res = run(&spec, exec)?;
        if let Some(dir) = out {
            write_outputs(dir, &res)?;
        }
        for c in reference_checks(&spec, &res.table) {
            outln!("[{}] {}", spec.kind.name(), c.line());
            if !c.pass && !c.informational {
                failed += 1;
            }
        }
    }
    if failed > 0 {
        outln!("{failed} check(s) failed");
        Ok(MISMATCH)
    } else {
        Ok(0)
    }
}

fn compare_files(expected: &Path, actual: &Path, tol: f64) -> Result<u8> {
    let e = ResultTable::read_csv(expected)?;
    let g = ResultTable::read_csv(actual)?;
    let diffs = compare_tables(&e, &g, tol)?;
    if diffs.is_empty() {
        outln!("identical within {tol}: {} rows", e.rows.len());
        return Ok(0);
    }
    for d in diffs.iter().take(20) {
        outln!("row {} column {}: expected {} got {}", d.row, d.column, d.expected, d.got);
    }
    outln!("{} cell(s) differ", diffs.len());
    Ok(MISMATCH)
}
