mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use pavlov_cycle::dynamics::{CycleState, InitConfig, Outcome, Strategy, StrategyKind};
use pavlov_cycle::experiments::{defect_time_experiment, emit_svg, phase_summary, run_sweep, write_csv, SweepConfig};
use pavlov_cycle::io::write_atomic;
use pavlov_cycle::meanfield::{
    closed_form_p012, closed_form_y, eigen_check, integrate, long_run_time_bound, tail_check, write_trajectory_csv, OdeConfig,
};
use pavlov_cycle::weights::{build_weights, check_constraints, find_l0, threshold_table, Series, DEFAULT_L0_CAP};

use config::{load, DefectTimeConfig, MeanfieldConfig, SimulateConfig, ThresholdsConfig, WeightsConfig};

const DEFAULTS: &str = "\
Defaults: omega = 1e-4, dt = 1e-3, L = 64, step cap (max_steps) = 43000000, sweep reps = 100.
Exit codes: 0 success, 1 usage or configuration error, 2 infeasible parameters (weights).";

/// Randomized Pavlov dynamics on the cycle: simulation, potential-weight
/// certificates, mean-field integration and batch experiments.
#[derive(Parser, Debug)]
#[command(name = "pavlov-cycle", version, after_help = DEFAULTS)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Random seed (master seed for sweeps); overrides the config file [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the primary output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Do not echo the resolved configuration to stderr
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trajectory until absorption or the step cap
    #[command(after_help = DEFAULTS)]
    Simulate(SimulateArgs),
    /// Run a parameter sweep described by a JSON config
    #[command(after_help = DEFAULTS)]
    Sweep(SweepArgs),
    /// Build a potential-weight table and check every drift inequality
    #[command(after_help = DEFAULTS)]
    Weights(WeightsArgs),
    /// Locate the p at which h(l) or f(l) changes sign
    #[command(after_help = DEFAULTS)]
    Thresholds(ThresholdsArgs),
    /// Integrate the mean-field system and compare with the perturbative solutions
    #[command(after_help = DEFAULTS)]
    Meanfield(MeanfieldArgs),
    /// Time for a single defector to take over the cycle at p = 0
    #[command(name = "defect-time", after_help = DEFAULTS)]
    DefectTime(DefectTimeArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON file with any of the fields below
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cycle length [default: 100]
    #[arg(long)]
    n: Option<usize>,
    /// Forgiveness probability after mutual defection [default: 1]
    #[arg(long)]
    p: Option<f64>,
    /// pavlov, rp or srp [default: rp]
    #[arg(long)]
    strategy: Option<StrategyKind>,
    /// all-defect, all-cooperate, single-defector[:i], bernoulli:q or explicit:+-.. [default: all-defect]
    #[arg(long)]
    init: Option<InitConfig>,
    /// Step cap [default: 43000000]
    #[arg(long)]
    max_steps: Option<u64>,
    /// Write a run-structure CSV row every K steps to --trace-out
    #[arg(long, value_name = "K", requires = "trace_out")]
    trace: Option<u64>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON sweep config: strategy, n_list, p_list, reps [100], max_steps [43000000], master_seed [0], init [all-defect]
    #[arg(long)]
    config: PathBuf,
    /// Directory for records.csv, summary.csv, phase.svg and config.json
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct WeightsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// [default: 0.9]
    #[arg(long)]
    p: Option<f64>,
    /// Contraction rate; the per-step factor is 1 - omega/n [default: 1e-4]
    #[arg(long)]
    omega: Option<f64>,
    /// Cycle length [default: 100]
    #[arg(long)]
    n: Option<usize>,
    /// rp, srp or pavlov [default: rp]
    #[arg(long)]
    strategy: Option<StrategyKind>,
}

#[derive(Args, Debug)]
struct ThresholdsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// h (change of w_hat(l)/l) or f (change of w_hat(l)) [default: h]
    #[arg(long)]
    series: Option<Series>,
    /// [default: 4 for h, 3 for f]
    #[arg(long)]
    lmin: Option<usize>,
    /// [default: 8 for h, 7 for f]
    #[arg(long)]
    lmax: Option<usize>,
    /// rp or srp [default: rp]
    #[arg(long)]
    strategy: Option<StrategyKind>,
    /// Bisection tolerance on p [default: 1e-10]
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct MeanfieldArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// [default: 0.01]
    #[arg(long)]
    p: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    tau_end: Option<f64>,
    /// RK4 step in tau [default: 1e-3]
    #[arg(long)]
    dt: Option<f64>,
    /// Truncation order; P_{L+1} is taken as 0 [default: 64]
    #[arg(long = "L", id = "order")]
    order: Option<usize>,
    /// Keep every k-th step in the trajectory [default: 100]
    #[arg(long)]
    sample_every: Option<usize>,
    /// P_l columns in the trajectory CSV [default: 11]
    #[arg(long)]
    columns: Option<usize>,
}

#[derive(Args, Debug)]
struct DefectTimeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cycle length [default: 100]
    #[arg(long)]
    n: Option<usize>,
    /// [default: 200]
    #[arg(long)]
    reps: Option<usize>,
    /// c in the reported band c n^{3/2} ln n [default: 3]
    #[arg(long)]
    band_constant: Option<f64>,
}

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn infeasible(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<pavlov_cycle::Error> for Failure {
    fn from(e: pavlov_cycle::Error) -> Self {
        match e {
            pavlov_cycle::Error::InfeasibleParameter { .. } | pavlov_cycle::Error::NoFeasibleP { .. } => Failure::infeasible(e.to_string()),
            e => Failure::usage(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

macro_rules! override_from {
    ($cfg:ident, $args:ident, $($field:ident),+) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })+
    };
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate(a) => simulate(g, a),
        Command::Sweep(a) => sweep(g, a),
        Command::Weights(a) => weights(g, a),
        Command::Thresholds(a) => thresholds(g, a),
        Command::Meanfield(a) => meanfield(g, a),
        Command::DefectTime(a) => defect_time(g, a),
    }
}

fn echo<T: Serialize>(g: &Global, config: &T) -> Result<(), Failure> {
    if !g.quiet {
        eprintln!("config: {}", serde_json::to_string(config)?);
    }
    Ok(())
}

/// Writes to `path` atomically, or to stdout.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => Ok(write_atomic(p, bytes)?),
        None => std::io::stdout().write_all(bytes).map_err(|e| Failure::usage(format!("stdout: {e}"))),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn simulate(g: &Global, a: SimulateArgs) -> Result<(), Failure> {
    let mut cfg: SimulateConfig = load(a.config.as_deref())?;
    override_from!(cfg, a, n, p, strategy, init, max_steps);
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if a.trace.is_some() {
        cfg.trace = a.trace;
    }
    echo(g, &cfg)?;
    if cfg.max_steps == 0 {
        return Err(Failure::usage("max_steps must be at least 1"));
    }
    if cfg.trace == Some(0) {
        return Err(Failure::usage("--trace must be at least 1"));
    }
    let strategy = Strategy::new(cfg.strategy, cfg.p)?;
    let mut state = CycleState::new(cfg.n, &cfg.init, cfg.seed)?;

    let result = match cfg.trace {
        None => state.run(&strategy, cfg.max_steps),
        Some(k) => {
            let path = a.trace_out.as_deref().ok_or_else(|| Failure::usage("--trace needs --trace-out"))?;
            let mut wr = csv_writer();
            let row = |s: &CycleState, wr: &mut csv::Writer<Vec<u8>>| -> Result<(), Failure> {
                let runs = s.runs();
                let longest = |rs: &[pavlov_cycle::dynamics::Run]| rs.iter().map(|r| r.len).max().unwrap_or(0);
                wr.write_record([
                    s.step_count().to_string(),
                    s.minus_count().to_string(),
                    runs.plus_runs.len().to_string(),
                    runs.minus_runs.len().to_string(),
                    longest(&runs.plus_runs).to_string(),
                    longest(&runs.minus_runs).to_string(),
                ])
                .map_err(|e| Failure::usage(e.to_string()))
            };
            wr.write_record(["step", "minus_count", "plus_runs", "minus_runs", "longest_plus_run", "longest_minus_run"])
                .map_err(|e| Failure::usage(e.to_string()))?;
            row(&state, &mut wr)?;
            let mut taken = 0;
            let result = loop {
                let chunk = k.min(cfg.max_steps - taken);
                let r = state.run(&strategy, chunk);
                taken += r.steps_taken;
                if r.steps_taken > 0 {
                    row(&state, &mut wr)?;
                }
                if r.outcome != Outcome::Capped || taken == cfg.max_steps {
                    break pavlov_cycle::RunResult { steps_taken: taken, ..r };
                }
            };
            write_atomic(path, &wr.into_inner().map_err(|e| Failure::usage(e.to_string()))?)?;
            result
        }
    };
    let mut report = json!({
        "steps": result.steps_taken,
        "outcome": result.outcome,
        "coop_fraction": result.cooperator_fraction,
    });
    if cfg.n <= 200 {
        report["final_state"] = json!(state.to_string());
    }
    emit(g.out.as_deref(), &json_bytes(&report)?)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn sweep(g: &Global, a: SweepArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Failure::usage(format!("{}: {e}", a.config.display())))?;
    let mut cfg: SweepConfig =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", a.config.display())))?;
    if let Some(s) = g.seed {
        cfg.master_seed = s;
    }
    echo(g, &cfg)?;
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let start = Instant::now();
    let records = pool.install(|| run_sweep(&cfg))?;
    let summary = phase_summary(&records);

    let dir = &a.out_dir;
    write_atomic(&dir.join("config.json"), &json_bytes(&cfg)?)?;
    let mut buf = Vec::new();
    write_csv(&records, &mut buf)?;
    write_atomic(&dir.join("records.csv"), &buf)?;
    let mut wr = csv_writer();
    for c in &summary {
        wr.serialize(c).map_err(|e| Failure::usage(e.to_string()))?;
    }
    write_atomic(&dir.join("summary.csv"), &wr.into_inner().map_err(|e| Failure::usage(e.to_string()))?)?;
    emit_svg(&summary, &dir.join("phase.svg"))?;
    if !g.quiet {
        eprintln!("{} runs in {:.2}s, written to {}", records.len(), start.elapsed().as_secs_f64(), dir.display());
    }
    Ok(())
}

fn weights(g: &Global, a: WeightsArgs) -> Result<(), Failure> {
    let mut cfg: WeightsConfig = load(a.config.as_deref())?;
    override_from!(cfg, a, p, omega, n, strategy);
    echo(g, &cfg)?;
    let strategy = Strategy::new(cfg.strategy, cfg.p)?;
    let table = build_weights(&strategy, cfg.omega, cfg.n)?;
    let r = check_constraints(&table);
    let worst_internal = r.worst_internal().map(|(ell, margin)| json!({ "ell": ell, "margin": margin + 0.0 }));
    let report = json!({
        "l0": table.l0,
        "alpha": table.alpha,
        "l0_at_zero_omega": find_l0(&strategy, DEFAULT_L0_CAP).map(|x| x.l0),
        "feasible": r.feasible,
        "singleton_margin": r.singleton_margin,
        "worst_internal": worst_internal,
        "all_minus_margin": r.nrun_margin,
        "merge_margin": r.merge_margin,
        "merge_worst": r.merge_worst,
    });
    match g.out.as_deref() {
        Some(path) => {
            table.emit_csv(&r, path)?;
            std::io::stdout().write_all(&json_bytes(&report)?).map_err(|e| Failure::usage(e.to_string()))?;
        }
        None => emit(None, &json_bytes(&report)?)?,
    }
    if r.feasible {
        Ok(())
    } else {
        Err(Failure::infeasible(format!("weight table for {} at p = {} violates its inequalities", cfg.strategy, cfg.p)))
    }
}

fn thresholds(g: &Global, a: ThresholdsArgs) -> Result<(), Failure> {
    let mut cfg: ThresholdsConfig = load(a.config.as_deref())?;
    override_from!(cfg, a, series, strategy, tol);
    if a.lmin.is_some() {
        cfg.lmin = a.lmin;
    }
    if a.lmax.is_some() {
        cfg.lmax = a.lmax;
    }
    echo(g, &cfg)?;
    let (lo, hi) = cfg.range();
    if lo > hi || (cfg.series == Series::H && lo == 0) {
        return Err(Failure::usage(format!("invalid range {lo}..={hi}")));
    }
    let rows = threshold_table(cfg.strategy, cfg.series, lo..=hi, cfg.tol);
    let mut wr = csv_writer();
    let io = |e: csv::Error| Failure::usage(e.to_string());
    wr.write_record(["series", "ell", "root", "bound"]).map_err(io)?;
    for r in rows {
        wr.write_record([
            cfg.series.as_str().to_string(),
            r.ell.to_string(),
            r.root.map(|x| format!("{x:.6}")).unwrap_or_default(),
            r.bound.map(|x| format!("{x:.3}")).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    emit(g.out.as_deref(), &wr.into_inner().map_err(|e| Failure::usage(e.to_string()))?)
}

fn meanfield(g: &Global, a: MeanfieldArgs) -> Result<(), Failure> {
    let mut cfg: MeanfieldConfig = load(a.config.as_deref())?;
    override_from!(cfg, a, p, tau_end, dt, order, sample_every, columns);
    echo(g, &cfg)?;
    if cfg.columns == 0 {
        return Err(Failure::usage("columns must be at least 1"));
    }
    let ode = OdeConfig { dt: cfg.dt, order: cfg.order, sample_every: cfg.sample_every };
    let traj = integrate(cfg.p, cfg.tau_end, &ode)?;

    let mut comparisons = Vec::new();
    let checkpoints: Vec<f64> = (1..=cfg.tau_end.floor() as usize).map(|t| t as f64).chain([cfg.tau_end]).collect();
    for tau in checkpoints {
        let Some(s) = traj.iter().find(|s| (s.tau - tau).abs() < 1e-9) else { continue };
        if comparisons.last().is_some_and(|c: &serde_json::Value| c["tau"] == json!(s.tau)) {
            continue;
        }
        let (c0, c1, c2) = closed_form_p012(cfg.p, s.tau);
        comparisons.push(json!({
            "tau": s.tau,
            "P_0": s.probs[0], "closed_P_0": c0,
            "P_1": s.probs[1], "closed_P_1": c1,
            "P_2": s.probs[2], "closed_P_2": c2,
            "total": s.total(), "closed_y": closed_form_y(cfg.p, s.tau),
            "tail": s.tail_sum(),
        }));
    }
    let tail = tail_check(&traj, cfg.p);
    let eigen = match eigen_check(cfg.p) {
        Ok(r) => json!(r),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let report = json!({
        "comparisons": comparisons,
        "tail": tail,
        "eigen": eigen,
        "long_run_bound": {
            "n": cfg.bound_n,
            "steps": cfg.bound_t,
            "bound": long_run_time_bound(cfg.p, cfg.bound_n, cfg.bound_t, tail.fit.gamma),
        },
    });
    match g.out.as_deref() {
        Some(path) => {
            let mut buf = Vec::new();
            write_trajectory_csv(&traj, cfg.columns - 1, &mut buf)?;
            write_atomic(path, &buf)?;
            std::io::stdout().write_all(&json_bytes(&report)?).map_err(|e| Failure::usage(e.to_string()))
        }
        None => emit(None, &json_bytes(&report)?),
    }
}

fn defect_time(g: &Global, a: DefectTimeArgs) -> Result<(), Failure> {
    let mut cfg: DefectTimeConfig = load(a.config.as_deref())?;
    override_from!(cfg, a, n, reps, band_constant);
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    echo(g, &cfg)?;
    let (stats, records) = defect_time_experiment(cfg.n, cfg.reps, cfg.seed, cfg.band_constant)?;
    match g.out.as_deref() {
        Some(path) => {
            let mut buf = Vec::new();
            write_csv(&records, &mut buf)?;
            write_atomic(path, &buf)?;
            std::io::stdout().write_all(&json_bytes(&stats)?).map_err(|e| Failure::usage(e.to_string()))
        }
        None => emit(None, &json_bytes(&stats)?),
    }
}
