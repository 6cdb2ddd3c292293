//! Genetic-algorithm search over pulse coefficients, detunings, `α` and the
//! gate duration, plus batch statistics over independent runs.
//!
//! Operators: tournament selection, uniform crossover, per-gene Gaussian
//! mutation with clamping, and elitism. Evaluations within a generation run
//! in parallel; all random draws happen on the calling thread from a
//! ChaCha8 stream chosen by `(seed, run)`, so results do not depend on
//! scheduling.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_gate, GateResult};
use crate::model::{units, GateParams};
use crate::pulses::{GatePulses, PulseSpec};
use crate::scalar::Real;
use crate::scenario::{scenario, Scenario, SearchSpace};

/// Fitness assigned when an individual cannot be evaluated.
pub const WORST_FITNESS: f64 = -1.0e6;

/// Upper limit on `α`; `α = 1` is rejected by parameter validation.
pub const ALPHA_MAX: f64 = 1.0 - 1e-9;

/// Smallest duration the optimizer will propose (μs).
pub const MIN_DURATION_US: f64 = 0.01;

/// Which genes are free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Probe coefficients and `δ_opt` at fixed duration.
    Sa,
    /// Ancilla coefficients, `α` and `T`; the probe waveform and `δ_opt`
    /// come from the reference SA gate and are stretched to `T`.
    AsaRescaled,
    /// Every gene.
    AsaFree,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Sa => "sa",
            Variant::AsaRescaled => "asa-rescaled",
            Variant::AsaFree => "asa-free",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sa" => Ok(Variant::Sa),
            "asa-rescaled" | "asa_rescaled" | "rescaled" => Ok(Variant::AsaRescaled),
            "asa-free" | "asa_free" | "free" | "asa" => Ok(Variant::AsaFree),
            _ => Err(Error::Config(format!("unknown optimizer variant `{s}`"))),
        }
    }
}

/// A bounded real gene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gene {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl Gene {
    fn new(name: &str, [low, high]: [f64; 2]) -> Self {
        Self {
            name: name.to_string(),
            low,
            high,
        }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.low, self.high)
    }
}

/// GA settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GAConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation width as a fraction of each gene's range.
    pub mutation_sigma: f64,
    pub elitism: usize,
    /// Weight `w` of the amplitude-cap penalty `w Σ max(0, peak/cap − 1)²`.
    pub penalty_weight: f64,
    pub seed: u64,
    /// RK4 steps per evaluation; `None` uses the gate default.
    pub steps: Option<usize>,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 20,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.15,
            mutation_sigma: 0.05,
            elitism: 2,
            penalty_weight: 10.0,
            seed: 0,
            steps: None,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.tournament_size == 0 {
            return bad("tournament size must be positive");
        }
        if self.elitism > self.population {
            return bad("elitism cannot exceed the population");
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return bad("mutation_sigma must be finite and non-negative");
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return bad("penalty_weight must be finite and non-negative");
        }
        Ok(())
    }
}

/// Search problem: fixed parameters, free genes and how to decode them.
#[derive(Clone, Debug)]
pub struct Problem<T: Real> {
    pub variant: Variant,
    pub genes: Vec<Gene>,
    pub params: GateParams<T>,
    /// Probe used when it is not a gene (SA duration, rescaled waveform).
    pub probe: PulseSpec<T>,
}

impl<T: Real> Problem<T> {
    /// Builds the problem for a catalog or user scenario. The rescaled
    /// variant takes its probe and `δ_opt` from the scenario's `reference`
    /// when present, otherwise from the scenario itself.
    pub fn from_scenario(s: &Scenario, variant: Variant) -> Result<Self> {
        let params: GateParams<T> = s.params()?;
        let pulses: GatePulses<T> = s.pulses()?;
        let space = s.search_space();
        let probe_source = match (variant, &s.reference) {
            (Variant::AsaRescaled, Some(r)) => Some(scenario(r)?),
            _ => None,
        };
        let (params, probe) = match probe_source {
            Some(r) => {
                let rp: GateParams<T> = r.params()?;
                let rpulses: GatePulses<T> = r.pulses()?;
                (
                    GateParams {
                        delta_opt: rp.delta_opt,
                        ..params
                    },
                    rpulses.probe,
                )
            }
            None => (params, pulses.probe),
        };
        Self::new(variant, params, probe, &space)
    }

    pub fn new(
        variant: Variant,
        params: GateParams<T>,
        probe: PulseSpec<T>,
        space: &SearchSpace,
    ) -> Result<Self> {
        params.validate()?;
        probe.validate()?;
        let beta = |p: &'static str, r| (1..=4).map(move |v| Gene::new(&format!("{p}{v}_mhz"), r));
        let duration = [
            space.duration_us[0].max(MIN_DURATION_US),
            space.duration_us[1].max(MIN_DURATION_US),
        ];
        let mut genes: Vec<Gene> = Vec::new();
        match variant {
            Variant::Sa => {
                genes.extend(beta("beta", space.beta_mhz));
                genes.push(Gene::new("delta_opt_mhz", space.delta_opt_mhz));
            }
            Variant::AsaRescaled => {
                genes.extend(beta("beta_c", space.beta_c_mhz));
                genes.push(Gene::new("alpha", space.alpha));
                genes.push(Gene::new("duration_us", duration));
            }
            Variant::AsaFree => {
                genes.extend(beta("beta", space.beta_mhz));
                genes.extend(beta("beta_c", space.beta_c_mhz));
                genes.push(Gene::new("delta_opt_mhz", space.delta_opt_mhz));
                genes.push(Gene::new("alpha", space.alpha));
                genes.push(Gene::new("duration_us", duration));
            }
        }
        for g in &genes {
            if !(g.low.is_finite() && g.high.is_finite() && g.low <= g.high) {
                return Err(Error::Config(format!(
                    "gene `{}` needs finite bounds with low <= high",
                    g.name
                )));
            }
        }
        for g in genes.iter_mut().filter(|g| g.name == "alpha") {
            g.high = g.high.min(ALPHA_MAX);
            g.low = g.low.min(g.high);
        }
        Ok(Self {
            variant,
            genes,
            params,
            probe,
        })
    }

    pub fn dim(&self) -> usize {
        self.genes.len()
    }

    fn slice(&self, genome: &[f64], prefix: &str) -> Option<[f64; 4]> {
        let start = self
            .genes
            .iter()
            .position(|g| g.name == format!("{prefix}1_mhz"))?;
        Some(std::array::from_fn(|k| genome[start + k]))
    }

    fn scalar(&self, genome: &[f64], name: &str) -> Option<f64> {
        self.genes.iter().position(|g| g.name == name).map(|i| genome[i])
    }

    /// Genome to gate parameters and pulses.
    pub fn decode(&self, genome: &[f64]) -> Result<(GateParams<T>, GatePulses<T>)> {
        if genome.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "genome has {} genes, expected {}",
                genome.len(),
                self.dim()
            )));
        }
        let mut params = self.params.clone();
        if let Some(d) = self.scalar(genome, "delta_opt_mhz") {
            params.delta_opt = units::mhz(T::lit(d));
        }
        if let Some(a) = self.scalar(genome, "alpha") {
            params.alpha = T::lit(a);
        }
        let duration = self
            .scalar(genome, "duration_us")
            .map_or(self.probe.duration, T::lit);
        let order = self.probe.order_n;
        let probe = match self.slice(genome, "beta") {
            Some(b) => PulseSpec::with_order(b.map(T::lit), order, duration)?,
            None => PulseSpec::with_order(self.probe.beta, order, duration)?,
        };
        let ancilla = self
            .slice(genome, "beta_c")
            .map(|b| PulseSpec::with_order(b.map(T::lit), order, duration))
            .transpose()?;
        Ok((params, GatePulses::new(probe, ancilla)?))
    }

    /// Inverse of [`Problem::decode`] on the free genes.
    pub fn encode(&self, params: &GateParams<T>, pulses: &GatePulses<T>) -> Vec<f64> {
        let f = |x: T| x.to_f64_lossy();
        self.genes
            .iter()
            .map(|g| match g.name.as_str() {
                "delta_opt_mhz" => f(units::to_mhz(params.delta_opt)),
                "alpha" => f(params.alpha),
                "duration_us" => f(pulses.duration()),
                name => {
                    let v: usize = name
                        .trim_end_matches("_mhz")
                        .chars()
                        .last()
                        .and_then(|c| c.to_digit(10))
                        .map_or(1, |d| d as usize);
                    if name.starts_with("beta_c") {
                        pulses.ancilla.as_ref().map_or(0.0, |a| f(a.beta[v - 1]))
                    } else {
                        f(pulses.probe.beta[v - 1])
                    }
                }
            })
            .collect()
    }
}

/// Result of evaluating one genome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation<T: Real> {
    pub fitness: f64,
    pub penalty: f64,
    pub result: Option<GateResult<T>>,
}

/// Amplitude-cap penalty `w Σ max(0, peak/cap − 1)²` over the shaped lasers.
pub fn cap_penalty<T: Real>(params: &GateParams<T>, pulses: &GatePulses<T>, weight: f64) -> f64 {
    let (p1, pc) = pulses.peaks();
    let over = |peak: T, cap: T| {
        if cap <= T::zero() {
            0.0
        } else {
            let x = (peak / cap - T::one()).max(T::zero()).to_f64_lossy();
            x * x
        }
    };
    let mut s = over(p1, params.amp_cap_1);
    if pulses.ancilla.is_some() {
        s += over(pc, params.amp_cap_c);
    }
    weight * s
}

/// Fitness `−(𝒥 + penalty)`; evaluation failures map to [`WORST_FITNESS`].
pub fn evaluate_individual<T: Real>(
    problem: &Problem<T>,
    genome: &[f64],
    cfg: &GAConfig,
) -> Evaluation<T> {
    let attempt = || -> Result<(f64, GateResult<T>)> {
        let (params, pulses) = problem.decode(genome)?;
        let penalty = cap_penalty(&params, &pulses, cfg.penalty_weight);
        let r = evaluate_gate(&params, &pulses, cfg.steps)?;
        Ok((penalty, r))
    };
    match attempt() {
        Ok((penalty, r)) => {
            let fitness = -(r.cost_j.to_f64_lossy() + penalty);
            if fitness.is_finite() {
                Evaluation {
                    fitness,
                    penalty,
                    result: Some(r),
                }
            } else {
                worst()
            }
        }
        Err(e) => {
            log::debug!("evaluation failed: {e}");
            worst()
        }
    }
}

fn worst<T: Real>() -> Evaluation<T> {
    Evaluation {
        fitness: WORST_FITNESS,
        penalty: 0.0,
        result: None,
    }
}

/// Per-generation summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

/// Outcome of a single GA run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult<T: Real> {
    pub variant: Variant,
    pub seed: u64,
    pub run: u64,
    pub gene_names: Vec<String>,
    pub best_genome: Vec<f64>,
    pub best_fitness: f64,
    pub best: Option<GateResult<T>>,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl<T: Real> RunResult<T> {
    /// Realistic fidelity of the best individual (0 if it failed).
    pub fn best_fidelity(&self) -> f64 {
        self.best
            .as_ref()
            .map_or(0.0, |r| r.fidelity_realistic.to_f64_lossy())
    }
}

fn rng_for(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], k: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..k {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] > fitness[best] {
            best = c;
        }
    }
    best
}

/// Runs the GA as run number `run` of `cfg.seed`, calling `progress` after
/// each generation.
pub fn run_ga_with<T: Real>(
    cfg: &GAConfig,
    problem: &Problem<T>,
    run: u64,
    mut progress: impl FnMut(&GenerationStats),
) -> Result<RunResult<T>> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = rng_for(cfg.seed, run);
    let genes = &problem.genes;
    let sample = |rng: &mut ChaCha8Rng, g: &Gene| {
        if g.width() > 0.0 {
            rng.random_range(g.low..=g.high)
        } else {
            g.low
        }
    };
    let mut pop: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| genes.iter().map(|g| sample(&mut rng, g)).collect())
        .collect();
    let eval_all = |pop: &[Vec<f64>]| -> Vec<Evaluation<T>> {
        pop.par_iter()
            .map(|g| evaluate_individual(problem, g, cfg))
            .collect()
    };
    let mut evals = eval_all(&pop);
    let mut evaluations = pop.len();
    let mut history = Vec::with_capacity(cfg.generations + 1);
    let stats = |gen: usize, ev: &[Evaluation<T>]| {
        let best = ev.iter().map(|e| e.fitness).fold(f64::NEG_INFINITY, f64::max);
        let mean = ev.iter().map(|e| e.fitness).sum::<f64>() / ev.len() as f64;
        GenerationStats {
            generation: gen,
            best_fitness: best,
            mean_fitness: mean,
        }
    };
    let s0 = stats(0, &evals);
    progress(&s0);
    history.push(s0);

    for gen in 1..=cfg.generations {
        let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
        let mut next: Vec<Vec<f64>> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        let mut next_evals: Vec<Option<Evaluation<T>>> =
            order[..cfg.elitism].iter().map(|&i| Some(evals[i].clone())).collect();
        while next.len() < cfg.population {
            let a = &pop[tournament(&mut rng, &fitness, cfg.tournament_size)];
            let b = &pop[tournament(&mut rng, &fitness, cfg.tournament_size)];
            let cross = rng.random_bool(cfg.crossover_rate);
            let mut c1 = a.clone();
            let mut c2 = b.clone();
            if cross {
                for k in 0..genes.len() {
                    if rng.random_bool(0.5) {
                        std::mem::swap(&mut c1[k], &mut c2[k]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                for (k, g) in genes.iter().enumerate() {
                    if rng.random_bool(cfg.mutation_rate) && g.width() > 0.0 {
                        let sigma = cfg.mutation_sigma * g.width();
                        let step = Normal::new(0.0, sigma)
                            .map_err(|e| Error::Config(e.to_string()))?
                            .sample(&mut rng);
                        child[k] = g.clamp(child[k] + step);
                    }
                }
            }
            for child in [c1, c2] {
                if next.len() < cfg.population {
                    next.push(child);
                    next_evals.push(None);
                }
            }
        }
        let fresh: Vec<usize> = (0..next.len()).filter(|&i| next_evals[i].is_none()).collect();
        let new_evals: Vec<Evaluation<T>> = fresh
            .par_iter()
            .map(|&i| evaluate_individual(problem, &next[i], cfg))
            .collect();
        evaluations += fresh.len();
        for (i, e) in fresh.into_iter().zip(new_evals) {
            next_evals[i] = Some(e);
        }
        pop = next;
        evals = next_evals.into_iter().map(|e| e.expect("all evaluated")).collect();
        let s = stats(gen, &evals);
        progress(&s);
        history.push(s);
    }

    let best_idx = (0..pop.len())
        .max_by(|&a, &b| evals[a].fitness.total_cmp(&evals[b].fitness).then(b.cmp(&a)))
        .unwrap_or(0);
    Ok(RunResult {
        variant: problem.variant,
        seed: cfg.seed,
        run,
        gene_names: genes.iter().map(|g| g.name.clone()).collect(),
        best_genome: pop[best_idx].clone(),
        best_fitness: evals[best_idx].fitness,
        best: evals[best_idx].result.clone(),
        history,
        evaluations,
        wall_time: start.elapsed(),
    })
}

pub fn run_ga<T: Real>(cfg: &GAConfig, problem: &Problem<T>) -> Result<RunResult<T>> {
    run_ga_with(cfg, problem, 0, |_| {})
}

/// Statistics over independent runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchStatistics<T: Real> {
    pub variant: Variant,
    pub seed: u64,
    /// Best realistic fidelity of each run, in run order.
    pub best_fidelities: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub runs: Vec<RunResult<T>>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// `n_runs` independent runs, run `i` using stream `i` of `cfg.seed`.
pub fn batch_runs<T: Real>(
    cfg: &GAConfig,
    problem: &Problem<T>,
    n_runs: usize,
    mut progress: impl FnMut(usize, &RunResult<T>),
) -> Result<BatchStatistics<T>> {
    if n_runs < 2 {
        return Err(Error::Config("batch needs at least two runs".into()));
    }
    let mut runs = Vec::with_capacity(n_runs);
    for i in 0..n_runs {
        let r = run_ga_with(cfg, problem, i as u64, |_| {})?;
        progress(i, &r);
        runs.push(r);
    }
    let best: Vec<f64> = runs.iter().map(RunResult::best_fidelity).collect();
    let (mean, std) = mean_std(&best);
    Ok(BatchStatistics {
        variant: problem.variant,
        seed: cfg.seed,
        min: best.iter().copied().fold(f64::INFINITY, f64::min),
        max: best.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        best_fidelities: best,
        mean,
        std,
        runs,
    })
}

/// CSV of per-run best fidelities.
pub fn batch_csv<T: Real>(stats: &BatchStatistics<T>) -> String {
    let mut s = String::from("run,best_fidelity (dimensionless),best_fitness (dimensionless),duration (us)\n");
    for r in &stats.runs {
        let dur = r.best.as_ref().map_or(f64::NAN, |b| b.duration.to_f64_lossy());
        s.push_str(&format!("{},{},{},{}\n", r.run, r.best_fidelity(), r.best_fitness, dur));
    }
    s
}

/// CSV of the per-generation history of a run.
pub fn history_csv<T: Real>(run: &RunResult<T>) -> String {
    let mut s = String::from("generation,best_fitness (dimensionless),mean_fitness (dimensionless)\n");
    for h in &run.history {
        s.push_str(&format!("{},{},{}\n", h.generation, h.best_fitness, h.mean_fitness));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tiny() -> GAConfig {
        GAConfig {
            population: 8,
            generations: 3,
            seed: 11,
            ..GAConfig::default()
        }
    }

    fn short_problem(variant: Variant) -> Problem<f64> {
        let space = SearchSpace {
            duration_us: [0.03, 0.05],
            ..SearchSpace::default()
        };
        let params = GateParams {
            alpha: 0.93,
            ..GateParams::laboratory()
        };
        let probe = PulseSpec::new([50.0, 100.0, 120.0, 80.0], 0.04).unwrap();
        Problem::new(variant, params, probe, &space).unwrap()
    }

    #[test]
    fn gene_layout() {
        assert_eq!(short_problem(Variant::Sa).dim(), 5);
        assert_eq!(short_problem(Variant::AsaRescaled).dim(), 6);
        assert_eq!(short_problem(Variant::AsaFree).dim(), 11);
        let p = Problem::<f64>::from_scenario(&scenario("III-ASA").unwrap(), Variant::AsaRescaled).unwrap();
        let t = p.genes.iter().find(|g| g.name == "duration_us").unwrap();
        assert_eq!((t.low, t.high), (MIN_DURATION_US, 0.3));
        assert_eq!(p.probe.beta, [10.19, 25.47, 6.044, 200.0]);
    }

    #[test]
    fn table_genome_round_trips_and_scores() {
        let s = scenario("I-SA").unwrap();
        let prob = Problem::<f64>::from_scenario(&s, Variant::Sa).unwrap();
        let params: GateParams<f64> = s.params().unwrap();
        let pulses: GatePulses<f64> = s.pulses().unwrap();
        let g = prob.encode(&params, &pulses);
        assert_eq!(&g[..4], &[32.58, 49.19, 52.10, 61.16]);
        assert_relative_eq!(g[4], -3.794, max_relative = 1e-14);
        let (p2, pu2) = prob.decode(&g).unwrap();
        assert_relative_eq!(p2.delta_opt, params.delta_opt, max_relative = 1e-14);
        assert_eq!(pu2, pulses);
        let cfg = GAConfig::default();
        let ev = evaluate_individual(&prob, &g, &cfg);
        let r = ev.result.unwrap();
        assert_eq!(ev.penalty, 0.0);
        assert_relative_eq!(ev.fitness, -r.cost_j, max_relative = 1e-14);
    }

    #[test]
    fn zero_genome_is_identity() {
        let prob = short_problem(Variant::Sa);
        let ev = evaluate_individual(&prob, &[0.0, 0.0, 0.0, 0.0, 0.0], &GAConfig::default());
        assert_relative_eq!(ev.fitness, -0.75, max_relative = 1e-12);
    }

    #[test]
    fn bad_genome_is_worst() {
        let prob = short_problem(Variant::Sa);
        let ev = evaluate_individual(&prob, &[1.0], &GAConfig::default());
        assert_eq!(ev.fitness, WORST_FITNESS);
        assert!(ev.result.is_none());
    }

    #[test]
    fn penalty_only_above_cap() {
        let params = GateParams::<f64>::laboratory();
        let ok = GatePulses::probe_only(PulseSpec::new([10.0; 4], 0.1).unwrap());
        assert_eq!(cap_penalty(&params, &ok, 10.0), 0.0);
        let hot = GatePulses::probe_only(PulseSpec::new([400.0; 4], 0.1).unwrap());
        let (peak, _) = hot.peaks();
        let x = peak / params.amp_cap_1 - 1.0;
        assert_relative_eq!(cap_penalty(&params, &hot, 10.0), 10.0 * x * x, max_relative = 1e-12);
    }

    #[test]
    fn deterministic_and_elitist() {
        let prob = short_problem(Variant::AsaFree);
        let a = run_ga(&tiny(), &prob).unwrap();
        let b = run_ga(&tiny(), &prob).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.history.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        assert_eq!(a.history.len(), 4);
        assert_eq!(a.evaluations, 8 + 3 * 6);
        for (x, g) in a.best_genome.iter().zip(&prob.genes) {
            assert!(*x >= g.low && *x <= g.high);
        }
        let other = run_ga(&GAConfig { seed: 12, ..tiny() }, &prob).unwrap();
        assert_ne!(other.best_genome, a.best_genome);
    }

    #[test]
    fn batch_statistics() {
        let prob = short_problem(Variant::Sa);
        let cfg = GAConfig {
            population: 4,
            generations: 1,
            ..tiny()
        };
        let s = batch_runs(&cfg, &prob, 3, |_, _| {}).unwrap();
        assert_eq!(s.best_fidelities.len(), 3);
        let (m, sd) = mean_std(&s.best_fidelities);
        assert_eq!((s.mean, s.std), (m, sd));
        assert_ne!(s.runs[0].best_genome, s.runs[1].best_genome);
        assert_eq!(batch_csv(&s).lines().count(), 4);
        assert!(batch_runs(&cfg, &prob, 1, |_, _| {}).is_err());
        let again = batch_runs(&cfg, &prob, 3, |_, _| {}).unwrap();
        assert_eq!(again.best_fidelities, s.best_fidelities);
    }

    #[test]
    fn config_validation() {
        assert!(GAConfig { population: 1, ..GAConfig::default() }.validate().is_err());
        assert!(GAConfig { crossover_rate: 1.5, ..GAConfig::default() }.validate().is_err());
        assert!(GAConfig { elitism: 200, ..GAConfig::default() }.validate().is_err());
        let cfg: GAConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.population, 100);
        assert_eq!(cfg.seed, 3);
        assert!("asa-free".parse::<Variant>().is_ok());
        assert!("x".parse::<Variant>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn encode_decode_round_trip(g in proptest::collection::vec(0.0f64..1.0, 11)) {
            let prob = short_problem(Variant::AsaFree);
            let genome: Vec<f64> = prob.genes.iter().zip(&g).map(|(gene, u)| gene.low + u * gene.width()).collect();
            let (p, pu) = prob.decode(&genome).unwrap();
            let back = prob.encode(&p, &pu);
            for (a, b) in back.iter().zip(&genome) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
