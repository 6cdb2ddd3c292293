//! `rydberg-asa`: simulate, optimize and budget ancilla-accelerated CZ gates.
//!
//! Exit codes: 0 success, 1 acceptance failure, 2 usage or configuration
//! error, 3 numerical failure.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rydberg_asa::effective::{acceleration_ratio, baseline_period, simulate_single_atom, PeriodDetection};
use rydberg_asa::errors::{error_report, rate_csv, sweep_csv, symmetric_grid, BudgetInputs, ErrorOptions, ReportRequest};
use rydberg_asa::metrics::{realistic_fidelity, TRACKED_LEVELS};
use rydberg_asa::optimizer::{batch_csv, history_csv, mean_std, run_ga_with, BatchStatistics, Problem};
use rydberg_asa::pulses::pulse_value_mhz;
use rydberg_asa::reproduce::{run_target, ReproduceOptions, Target, FIG2_DURATION_US, FIG2_STEPS};
use rydberg_asa::scalar::Real;
use rydberg_asa::scenario::{scenario_names, ScenarioKind};
use rydberg_asa::{simulate_gate, Error, FidelityMethod, Scenario, SimOptions, Variant};
use serde_json::json;

use crate::config::{parse_rate, select, GateOverrides};

/// Environment variable holding the default output directory.
const OUT_ENV: &str = "RYDBERG_ASA_OUT";

#[derive(Parser, Debug)]
#[command(name = "rydberg-asa", version, about = "Ancilla-accelerated Rydberg CZ gate toolkit")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a gate (or an acceleration panel) and write result files.
    Simulate(SimulateArgs),
    /// Run the genetic pulse search.
    Optimize(OptimizeArgs),
    /// Deviation sweeps, dephasing and leakage errors and the combined budget.
    Budget(BudgetArgs),
    /// Run reference checks and print a pass/fail table.
    Reproduce(ReproduceArgs),
    /// List the built-in scenarios.
    List,
}

#[derive(Args, Debug)]
struct Source {
    /// Built-in scenario name, e.g. III-ASA.
    #[arg(long)]
    scenario: Option<String>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Gate duration (us).
    #[arg(long)]
    duration: Option<f64>,
    /// Ancilla ratio alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Two-photon detuning delta_opt/2pi (MHz).
    #[arg(long)]
    delta_opt: Option<f64>,
    /// Include the leakage level.
    #[arg(long)]
    leakage: bool,
    /// RK4 steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Decay-included fidelity method.
    #[arg(long, default_value = "perturbative", value_parser = FidelityMethod::from_str)]
    method: FidelityMethod,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    /// Evolve single-excitation inputs in the full two-atom space.
    #[arg(long)]
    full_space: bool,
    /// Write every n-th integration step to the population CSV.
    #[arg(long, default_value_t = 10)]
    csv_stride: usize,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    /// Independent runs; run i uses stream i of the seed.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// sa, asa-rescaled or asa-free.
    #[arg(long, value_parser = Variant::from_str)]
    variant: Option<Variant>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    /// RK4 steps per evaluation.
    #[arg(long)]
    steps: Option<usize>,
    /// Suppress per-generation progress.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct BudgetArgs {
    #[command(flatten)]
    source: Source,
    /// Relative ancilla amplitude deviation for the combined budget.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Relative ancilla detuning deviation for the combined budget.
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Ancilla dephasing rate, e.g. 100kHz (bare numbers are kHz).
    #[arg(long, value_parser = parse_rate, default_value = "0")]
    gamma_d: f64,
    /// Probe dephasing rate, e.g. 100kHz (bare numbers are kHz).
    #[arg(long, value_parser = parse_rate, default_value = "0")]
    gamma_d_prime: f64,
    /// Include the leakage error.
    #[arg(long)]
    leakage: bool,
    /// Sweep half-width for epsilon and eta.
    #[arg(long, default_value_t = 0.02)]
    max_deviation: f64,
    /// Points per sweep.
    #[arg(long, default_value_t = 9)]
    points: usize,
    /// Time samples of the error integrands.
    #[arg(long, default_value_t = rydberg_asa::errors::DEFAULT_SAMPLES)]
    samples: usize,
    /// RK4 steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// fig2, table1, decay, fig6, feasibility, appendix, fig5, properties or all.
    target: String,
    /// GA runs per variant for fig5.
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = rydberg_asa::errors::DEFAULT_SAMPLES)]
    samples: usize,
}

/// Command failure with its exit code.
enum Failure {
    Usage(String),
    Numerical(String),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IntegrationFailure(_)
            | Error::NonFinite(_)
            | Error::NoPeriodFound(_)
            | Error::EliminationSingular(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a, &cli.out),
        Command::Optimize(a) => optimize(a, &cli.out),
        Command::Budget(a) => budget(a, &cli.out),
        Command::Reproduce(a) => reproduce(a, &cli.out),
        Command::List => {
            for s in rydberg_asa::scenario::catalog() {
                println!("{:<8} {}", s.name, s.description);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Acceptance) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn load(source: &Source, extra: &GateOverrides) -> Result<(config::RunConfig, Scenario), Failure> {
    let cfg = select(source.scenario.as_deref(), source.config.as_deref()).map_err(|e| match e {
        Error::UnknownScenario(n) => Failure::Usage(format!(
            "unknown scenario `{n}`; known: {}",
            scenario_names().join(", ")
        )),
        e => e.into(),
    })?;
    let mut s = cfg.resolve().map_err(|e| match e {
        Error::UnknownScenario(n) => Failure::Usage(format!(
            "unknown scenario `{n}`; known: {}",
            scenario_names().join(", ")
        )),
        e => e.into(),
    })?;
    extra.apply(&mut s)?;
    Ok((cfg, s))
}

fn file_stem(s: &Scenario) -> String {
    s.name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn to_json<S: serde::Serialize>(v: &S) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Usage(e.to_string()))
}

fn simulate(a: &SimulateArgs, out: &Path) -> CmdResult {
    let overrides = GateOverrides {
        duration_us: a.duration,
        alpha: a.alpha,
        delta_opt_mhz: a.delta_opt,
        include_leakage: a.leakage.then_some(true),
        ..GateOverrides::default()
    };
    let (cfg, s) = load(&a.source, &overrides)?;
    if s.kind == ScenarioKind::Acceleration {
        return simulate_acceleration(&s, a, out);
    }
    let steps = a.steps.or(cfg.steps);
    match a.precision {
        Precision::F64 => simulate_gate_as::<f64>(&s, a, steps, out),
        Precision::F32 => simulate_gate_as::<f32>(&s, a, steps, out),
    }
}

fn simulate_gate_as<T: Real + serde::Serialize>(
    s: &Scenario,
    a: &SimulateArgs,
    steps: Option<usize>,
    out: &Path,
) -> CmdResult {
    let params = s.params::<T>()?;
    let pulses = s.pulses::<T>()?;
    let opts = SimOptions {
        steps,
        full_space: a.full_space,
        record_stride: usize::MAX,
    };
    let start = Instant::now();
    let (mut result, traj) = simulate_gate(&params, &pulses, &opts)?;
    if a.method == FidelityMethod::Lindblad {
        result.fidelity_realistic = realistic_fidelity(&params, &pulses, &result, a.method)?;
        result.fidelity_method = a.method;
    }
    let elapsed = start.elapsed().as_secs_f64();

    let stem = file_stem(s);
    let doc = json!({
        "scenario": s.name,
        "precision": format!("{:?}", a.precision).to_lowercase(),
        "units": {"time": "us", "t_e": "us", "t_r": "us", "t_a": "us", "phases": "rad"},
        "result": result,
        "expected": s.expected,
        "wall_time_s": elapsed,
    });
    let json_path = write(out, &format!("{stem}_result.json"), &to_json(&doc)?)?;

    let labels: Vec<&str> = TRACKED_LEVELS.iter().map(|l| l.label()).collect();
    let mut csv = String::from("t (us)");
    for l in &labels {
        let _ = write!(csv, ",n_{l} (population)");
    }
    csv.push_str(",omega1/2pi (MHz),omegac/2pi (MHz)\n");
    let cols = labels
        .iter()
        .map(|l| traj.population(l))
        .collect::<rydberg_asa::Result<Vec<_>>>()?;
    let stride = a.csv_stride.max(1);
    let last = traj.times.len().saturating_sub(1);
    for (k, &t) in traj.times.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let _ = write!(csv, "{:.9e}", t.to_f64_lossy());
        for c in &cols {
            let _ = write!(csv, ",{:.9e}", c[k].to_f64_lossy());
        }
        let oc = pulses.ancilla.as_ref().map_or(0.0, |p| pulse_value_mhz(p, t).to_f64_lossy());
        let _ = writeln!(csv, ",{:.9e},{:.9e}", pulse_value_mhz(&pulses.probe, t).to_f64_lossy(), oc);
    }
    let csv_path = write(out, &format!("{stem}_trajectory.csv"), &csv)?;

    println!("scenario        {}", s.name);
    println!("fidelity_ideal  {:.6}", result.fidelity_ideal.to_f64_lossy());
    println!(
        "fidelity ({})  {:.6}",
        result.fidelity_method,
        result.fidelity_realistic.to_f64_lossy()
    );
    println!("cost J          {:.6e}", result.cost_j.to_f64_lossy());
    println!("T_e             {:.4} ns", 1e3 * result.t_e.to_f64_lossy());
    println!("T_r             {:.4} us", result.t_r.to_f64_lossy());
    println!("T_a             {:.4} ns", 1e3 * result.t_a.to_f64_lossy());
    println!("gamma_e T_e     {:.4e}", result.decay_e.to_f64_lossy());
    println!("gamma_r T_r     {:.4e}", result.decay_r.to_f64_lossy());
    println!("steps           {} ({elapsed:.2} s)", result.steps);
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn simulate_acceleration(s: &Scenario, a: &SimulateArgs, out: &Path) -> CmdResult {
    let (params, o1, oc) = s.acceleration_config()?.to_drive::<f64>()?;
    let steps = a.steps.unwrap_or(FIG2_STEPS);
    let traj = simulate_single_atom(&params, o1, oc, FIG2_DURATION_US, steps)?;
    let acc = acceleration_ratio(
        &traj,
        baseline_period(&params, o1),
        &PeriodDetection::for_detuning(params.delta_big),
    )?;
    let stem = file_stem(s);
    let doc = json!({
        "scenario": s.name,
        "units": {"period": "us", "reference_period": "us"},
        "p": acc.p,
        "period": acc.period,
        "reference_period": acc.reference,
        "peak_population": acc.peak_population,
        "expected": s.expected,
    });
    let json_path = write(out, &format!("{stem}_acceleration.json"), &to_json(&doc)?)?;

    let labels: Vec<&String> = traj.populations.keys().collect();
    let mut csv = String::from("t (us)");
    for l in &labels {
        let _ = write!(csv, ",P_{l} (population)");
    }
    csv.push('\n');
    let stride = a.csv_stride.max(1);
    for (k, t) in traj.times.iter().enumerate() {
        if k % stride != 0 {
            continue;
        }
        let _ = write!(csv, "{t:.9e}");
        for l in &labels {
            let _ = write!(csv, ",{:.9e}", traj.populations[*l][k]);
        }
        csv.push('\n');
    }
    let csv_path = write(out, &format!("{stem}_populations.csv"), &csv)?;

    println!("scenario   {}", s.name);
    println!("p          {:.4}", acc.p);
    println!("T          {:.4} us (T0 = {:.4} us)", acc.period, acc.reference);
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn optimize(a: &OptimizeArgs, out: &Path) -> CmdResult {
    if a.runs == 0 {
        return Err(Failure::Usage("--runs must be at least 1".into()));
    }
    let (cfg, s) = load(&a.source, &GateOverrides::default())?;
    let variant = a.variant.or(cfg.variant).unwrap_or(if s.is_accelerated() {
        Variant::AsaFree
    } else {
        Variant::Sa
    });
    let mut ga = cfg.ga.clone().unwrap_or_default();
    if let Some(seed) = a.seed {
        ga.seed = seed;
    }
    if let Some(p) = a.population {
        ga.population = p;
    }
    if let Some(g) = a.generations {
        ga.generations = g;
    }
    if let Some(st) = a.steps.or(cfg.steps) {
        ga.steps = Some(st);
    }
    ga.validate()?;
    let problem = Problem::<f64>::from_scenario(&s, variant)?;
    eprintln!(
        "optimizing {} ({variant}, {} genes, population {}, {} generations, seed {}, {} run(s))",
        s.name,
        problem.dim(),
        ga.population,
        ga.generations,
        ga.seed,
        a.runs
    );

    let mut runs = Vec::with_capacity(a.runs);
    for i in 0..a.runs {
        let quiet = a.quiet;
        let total = ga.generations;
        let r = run_ga_with(&ga, &problem, i as u64, |g| {
            if !quiet {
                eprintln!(
                    "run {i:>3} generation {:>4}/{total}  best {:+.6e}  mean {:+.6e}",
                    g.generation, g.best_fitness, g.mean_fitness
                );
            }
        })?;
        eprintln!(
            "run {i:>3} done: best F = {:.6} ({} evaluations, {:.1} s)",
            r.best_fidelity(),
            r.evaluations,
            r.wall_time.as_secs_f64()
        );
        runs.push(r);
    }
    let best: Vec<f64> = runs.iter().map(|r| r.best_fidelity()).collect();
    let (mean, std) = mean_std(&best);
    let stats = BatchStatistics {
        variant,
        seed: ga.seed,
        min: best.iter().copied().fold(f64::INFINITY, f64::min),
        max: best.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        best_fidelities: best,
        mean,
        std,
        runs,
    };

    let stem = format!("{}_{variant}", file_stem(&s));
    let doc = json!({
        "scenario": s.name,
        "ga": ga,
        "gene_names": stats.runs[0].gene_names,
        "units": {"genes": "MHz (beta, delta_opt), us (duration_us)", "fidelity": "dimensionless"},
        "statistics": stats,
    });
    write(out, &format!("{stem}_optimize.json"), &to_json(&doc)?)?;
    let csv_path = write(out, &format!("{stem}_runs.csv"), &batch_csv(&stats))?;
    for r in &stats.runs {
        write(out, &format!("{stem}_history_run{}.csv", r.run), &history_csv(r))?;
    }
    println!("best F over {} run(s): mean {:.6}, std {:.6}, min {:.6}, max {:.6}", stats.runs.len(), stats.mean, stats.std, stats.min, stats.max);
    if let Some(top) = stats.runs.iter().max_by(|x, y| x.best_fidelity().total_cmp(&y.best_fidelity())) {
        for (name, v) in top.gene_names.iter().zip(&top.best_genome) {
            println!("  {name:<16} {v:.6}");
        }
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn budget(a: &BudgetArgs, out: &Path) -> CmdResult {
    let (cfg, s) = load(&a.source, &GateOverrides::default())?;
    if s.kind != ScenarioKind::Gate || !s.is_accelerated() {
        return Err(Failure::Usage(format!(
            "scenario `{}` has no ancilla drive; the budget sweeps the ancillary laser and needs an ASA scenario",
            s.name
        )));
    }
    if a.points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let params = s.params::<f64>()?;
    let pulses = s.pulses::<f64>()?;
    let mut gammas: Vec<f64> = (0..5).map(|k| 0.025 * k as f64).collect();
    gammas.extend([a.gamma_d, a.gamma_d_prime]);
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let inputs = BudgetInputs {
        epsilon: a.epsilon,
        eta: a.eta,
        gamma_d: a.gamma_d,
        gamma_d_prime: a.gamma_d_prime,
        with_leakage: a.leakage,
    };
    let req = ReportRequest {
        epsilons: symmetric_grid(a.max_deviation, a.points),
        etas: symmetric_grid(a.max_deviation, a.points),
        gammas,
        leakage: a.leakage,
        combined: Some(inputs),
    };
    let opts = ErrorOptions {
        samples: a.samples,
        steps: a.steps.or(cfg.steps),
        ..ErrorOptions::default()
    };
    let start = Instant::now();
    let report = error_report(&params, &pulses, &req, &opts)?;
    let stem = file_stem(&s);
    write(out, &format!("{stem}_epsilon_sweep.csv"), &sweep_csv("epsilon", &report.epsilon_curve))?;
    write(out, &format!("{stem}_eta_sweep.csv"), &sweep_csv("eta", &report.eta_curve))?;
    write(out, &format!("{stem}_ancilla_dephasing.csv"), &rate_csv("E_d", &report.e_d))?;
    write(out, &format!("{stem}_probe_dephasing.csv"), &rate_csv("E_d_prime", &report.e_d_prime))?;
    let doc = json!({
        "scenario": s.name,
        "units": {"gamma": "us^-1", "errors": "dimensionless"},
        "report": report,
        "expected": s.expected,
    });
    let json_path = write(out, &format!("{stem}_budget.json"), &to_json(&doc)?)?;

    let lookup = |rows: &[(f64, f64)], g: f64| rows.iter().find(|r| r.0 == g).map_or(0.0, |r| r.1);
    let max_excess = |c: &[rydberg_asa::errors::SweepPoint<f64>]| {
        c.iter().map(|p| p.excess.abs()).fold(0.0, f64::max)
    };
    println!("scenario                 {}", s.name);
    println!("max |excess| over eps    {:.3e}", max_excess(&report.epsilon_curve));
    println!("max |excess| over eta    {:.3e}", max_excess(&report.eta_curve));
    println!("E_d  at {:>7.1} kHz      {:.4e}", 1e3 * a.gamma_d, lookup(&report.e_d, a.gamma_d));
    println!("E_d' at {:>7.1} kHz      {:.4e}", 1e3 * a.gamma_d_prime, lookup(&report.e_d_prime, a.gamma_d_prime));
    if let Some(k) = report.e_k {
        println!("E_k                      {k:.4e}");
    }
    if let Some(c) = &report.combined {
        println!("ancillary error          {:.4e}", c.ancillary_error);
        println!("combined fidelity        {:.6}", c.fidelity);
    }
    println!("({:.1} s) wrote {}", start.elapsed().as_secs_f64(), json_path.display());
    Ok(())
}

fn reproduce(a: &ReproduceArgs, out: &Path) -> CmdResult {
    let targets: Vec<Target> = if a.target.eq_ignore_ascii_case("all") {
        Target::ALL.to_vec()
    } else {
        vec![Target::from_str(&a.target)?]
    };
    let mut opts = ReproduceOptions {
        ga_runs: a.runs,
        error_samples: a.samples,
        ..ReproduceOptions::default()
    };
    opts.ga.seed = a.seed;
    let mut all_pass = true;
    let mut csv = String::new();
    for t in targets {
        eprintln!("running {t} ...");
        let start = Instant::now();
        let report = run_target(t, &opts)?;
        println!(
            "== criterion {} [{}] {}: {} ({}/{} checks, {:.1} s)",
            t.criterion(),
            t.name(),
            t.title(),
            if report.passed() { "PASS" } else { "FAIL" },
            report.pass_count(),
            report.checks.len(),
            start.elapsed().as_secs_f64()
        );
        print!("{}", report.table());
        let body = report.csv();
        if csv.is_empty() {
            csv.push_str(&body);
        } else {
            csv.push_str(body.split_once('\n').map_or("", |(_, rest)| rest));
        }
        all_pass &= report.passed();
    }
    write(out, &format!("reproduce_{}.csv", a.target.to_ascii_lowercase()), &csv)?;
    if all_pass {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}
