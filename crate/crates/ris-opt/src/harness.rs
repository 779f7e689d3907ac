//! Experiment orchestration: seeded multi-run sweeps, action-space
//! arithmetic, smoothing, and CSV export.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ddqn_ga_train, ddqn_train, AgentConfig, StepTrace};
use crate::baselines::{
    baseline_static, columnwise_enum_train, exhaustive_oracle, pso_optimize, random_best_of,
    EnumVariant, PsoParams, StaticKind,
};
use crate::channel::realize_channels;
use crate::config::SystemConfig;
use crate::error::{Result, RisError};
use crate::rate::sum_rate;

/// Exact action-space size of each control scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Element-wise control: 2^(N R_theta).
    Element,
    /// Column-wise control: 2^(sqrt(N) R_theta).
    Column,
    /// Groups of 10 adjacent cells: 2^((N/10) R_theta).
    Group10,
    /// Accumulated column actions: sqrt(N) + 1, independent of R_theta.
    Proposed,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Element => "element",
            Scheme::Column => "column",
            Scheme::Group10 => "group10",
            Scheme::Proposed => "proposed",
        }
    }
}

pub fn action_space_size(scheme: Scheme, n_side: usize, resolution_bits: u32) -> Result<BigUint> {
    if n_side < 1 {
        return Err(RisError::InvalidArgument("n_side must be >= 1".into()));
    }
    let n = n_side * n_side;
    let two = BigUint::from(2u32);
    Ok(match scheme {
        Scheme::Element => two.pow(n as u32 * resolution_bits),
        Scheme::Column => two.pow(n_side as u32 * resolution_bits),
        Scheme::Group10 => {
            if !n.is_multiple_of(10) {
                return Err(RisError::InvalidArgument(format!(
                    "group-of-10 control needs N divisible by 10, got N = {n}"
                )));
            }
            two.pow((n / 10) as u32 * resolution_bits)
        }
        Scheme::Proposed => BigUint::from(n_side as u64 + 1),
    })
}

/// Trailing moving average; output length equals input length.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(RisError::InvalidArgument("window must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for i in 0..series.len() {
        acc += series[i];
        if i >= window {
            acc -= series[i - window];
        }
        out.push(acc / (i.min(window - 1) + 1) as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Flat,
    Random,
    Ddqn,
    DdqnGa,
    DqnEnum,
    DdqnEnum,
    Pso,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Flat,
        Method::Random,
        Method::Ddqn,
        Method::DdqnGa,
        Method::DqnEnum,
        Method::DdqnEnum,
        Method::Pso,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Flat => "flat",
            Method::Random => "random",
            Method::Ddqn => "ddqn",
            Method::DdqnGa => "ddqn-ga",
            Method::DqnEnum => "dqn-enum",
            Method::DdqnEnum => "ddqn-enum",
            Method::Pso => "pso",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| RisError::InvalidArgument(format!("unknown method '{s}'")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    SingleRun,
    SweepSteps,
    SweepSize,
    Compare,
    ActionSpace,
    OracleCheck,
}

/// Full experiment description; the effective (resolved) value is echoed into
/// the output directory for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub methods: Vec<Method>,
    pub steps_list: Vec<usize>,
    pub sides_list: Vec<usize>,
    pub space_sides: Vec<usize>,
    pub space_bits: Vec<u32>,
    /// When false (default), summary wall_seconds is written as 0 so outputs
    /// are byte-reproducible from (config, seeds) alone.
    pub timing: bool,
    pub smoothing_window: usize,
    pub system: SystemConfig,
    pub agent: AgentConfig,
    pub pso: PsoParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::default(),
            seeds: vec![1],
            out_dir: PathBuf::from("ris-out"),
            methods: vec![Method::DdqnGa],
            steps_list: vec![1, 3, 5, 7],
            sides_list: vec![2, 3, 4, 5],
            space_sides: vec![4, 10, 20, 50],
            space_bits: vec![1, 2, 3],
            timing: false,
            smoothing_window: 50,
            system: SystemConfig::default(),
            agent: AgentConfig::default(),
            pso: PsoParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(RisError::InvalidConfig("seeds must be nonempty".into()));
        }
        if self.methods.is_empty() {
            return Err(RisError::InvalidConfig("methods must be nonempty".into()));
        }
        match self.kind {
            ExperimentKind::SweepSteps if self.steps_list.is_empty() => {
                return Err(RisError::InvalidConfig("steps_list must be nonempty".into()))
            }
            ExperimentKind::SweepSize if self.sides_list.is_empty() => {
                return Err(RisError::InvalidConfig("sides_list must be nonempty".into()))
            }
            ExperimentKind::ActionSpace
                if self.space_sides.is_empty() || self.space_bits.is_empty() =>
            {
                return Err(RisError::InvalidConfig(
                    "space_sides and space_bits must be nonempty".into(),
                ))
            }
            _ => {}
        }
        if self.smoothing_window < 1 {
            return Err(RisError::InvalidConfig("smoothing_window must be >= 1".into()));
        }
        self.system.validate()?;
        self.agent.validate()?;
        self.pso.validate()?;
        Ok(())
    }
}

/// Named preset profiles for desk-scale and paper-scale experiments.
pub fn profile(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    match name {
        "tiny" => {
            cfg.system.n_elements = 4;
            cfg.system.n_antennas = 2;
            cfg.system.n_users = 2;
            cfg.agent.hidden = vec![32, 16];
            cfg.agent.hidden_ga = Some(vec![32, 16]);
            cfg.agent.n_episodes = 500;
            cfg.agent.n_steps = 3;
        }
        "small" => {
            cfg.system.n_elements = 25;
            cfg.system.n_antennas = 4;
            cfg.system.n_users = 2;
            cfg.agent.hidden = vec![128, 64];
            cfg.agent.hidden_ga = Some(vec![128, 64]);
            cfg.agent.n_episodes = 1500;
            cfg.agent.n_steps = 5;
        }
        "paper" => {}
        other => {
            return Err(RisError::InvalidArgument(format!(
                "unknown profile '{other}' (expected tiny|small|paper)"
            )))
        }
    }
    Ok(cfg)
}

/// One completed run, ready for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub n_side: usize,
    pub resolution_bits: u32,
    pub steps_per_episode: usize,
    pub final_rate_bps: f64,
    pub best_rate_bps: f64,
    pub episodes: usize,
    pub wall_seconds: f64,
    pub trace: Vec<StepTrace>,
    pub episode_final_rate_bps: Vec<f64>,
    /// Suffix distinguishing sweep points in trace file names, e.g. "_T3".
    pub tag: String,
}

/// Window used for the "final rate" of training methods: mean over the last
/// 100 episodes' final configurations.
pub const FINAL_RATE_WINDOW: usize = 100;

pub fn run_one(
    method: Method,
    seed: u64,
    sys: &SystemConfig,
    agent: &AgentConfig,
    pso: &PsoParams,
    timing: bool,
    tag: &str,
) -> Result<RunResult> {
    sys.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ch = realize_channels(sys, &mut rng)?;

    let mut trace = Vec::new();
    let mut episode_final = Vec::new();
    let (final_rate, best_rate, episodes) = match method {
        Method::Flat => {
            let rate = sum_rate(&baseline_static(StaticKind::Flat, sys, &mut rng), &ch, sys)?
                .rate_bps;
            (rate, rate, 1)
        }
        Method::Random => {
            // best-of-budget T*I/10 draws; the mean doubles as the
            // single-draw training-curve variant
            let draws = (agent.n_steps * agent.n_episodes / 10).max(1);
            let (_, best, mean) = random_best_of(&ch, sys, draws, &mut rng)?;
            (mean, best, draws)
        }
        Method::Pso => {
            let res = pso_optimize(&ch, sys, pso, &mut rng)?;
            // final = quantized (the deliverable); best = continuous bound
            (res.quantized_rate_bps, res.continuous_rate_bps, pso.iterations)
        }
        Method::Ddqn | Method::DdqnGa | Method::DqnEnum | Method::DdqnEnum => {
            let report = match method {
                Method::Ddqn => ddqn_train(agent, sys, &ch, &mut rng)?,
                Method::DdqnGa => ddqn_ga_train(agent, sys, &ch, &mut rng)?,
                Method::DqnEnum => {
                    columnwise_enum_train(EnumVariant::Dqn, agent, sys, &ch, &mut rng)?
                }
                Method::DdqnEnum => {
                    columnwise_enum_train(EnumVariant::Ddqn, agent, sys, &ch, &mut rng)?
                }
                _ => unreachable!(),
            };
            let final_rate = report.final_mean_rate_bps(FINAL_RATE_WINDOW);
            trace = report.steps;
            episode_final = report.episode_final_rate_bps;
            (final_rate, report.best_rate_bps, agent.n_episodes)
        }
    };

    Ok(RunResult {
        method,
        seed,
        n_side: sys.n_side(),
        resolution_bits: sys.resolution_bits,
        steps_per_episode: agent.n_steps,
        final_rate_bps: final_rate,
        best_rate_bps: best_rate,
        episodes,
        wall_seconds: if timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
        trace,
        episode_final_rate_bps: episode_final,
        tag: tag.to_string(),
    })
}

/// One job of a sweep: method x seed (x sweep parameter).
#[derive(Debug, Clone)]
struct Job {
    method: Method,
    seed: u64,
    sys: SystemConfig,
    agent: AgentConfig,
    tag: String,
    /// Aggregation key for sweep modes.
    param: Option<usize>,
}

fn build_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    match cfg.kind {
        ExperimentKind::SweepSteps => {
            for &t in &cfg.steps_list {
                let agent = AgentConfig {
                    n_steps: t,
                    ..cfg.agent.clone()
                };
                for &method in &cfg.methods {
                    for &seed in &cfg.seeds {
                        jobs.push(Job {
                            method,
                            seed,
                            sys: cfg.system.clone(),
                            agent: agent.clone(),
                            tag: format!("_T{t}"),
                            param: Some(t),
                        });
                    }
                }
            }
        }
        ExperimentKind::SweepSize => {
            for &side in &cfg.sides_list {
                let sys = SystemConfig {
                    n_elements: side * side,
                    ..cfg.system.clone()
                };
                for &method in &cfg.methods {
                    for &seed in &cfg.seeds {
                        jobs.push(Job {
                            method,
                            seed,
                            sys: sys.clone(),
                            agent: cfg.agent.clone(),
                            tag: format!("_n{side}"),
                            param: Some(side),
                        });
                    }
                }
            }
        }
        _ => {
            for &method in &cfg.methods {
                for &seed in &cfg.seeds {
                    jobs.push(Job {
                        method,
                        seed,
                        sys: cfg.system.clone(),
                        agent: cfg.agent.clone(),
                        tag: String::new(),
                        param: None,
                    });
                }
            }
        }
    }
    jobs
}

fn worker_count() -> usize {
    std::env::var("RIS_SIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

#[cfg(feature = "parallel")]
fn run_jobs(cfg: &ExperimentConfig, jobs: &[Job]) -> Result<Vec<RunResult>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| RisError::InvalidConfig(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|j| run_one(j.method, j.seed, &j.sys, &j.agent, &cfg.pso, cfg.timing, &j.tag))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_jobs(cfg: &ExperimentConfig, jobs: &[Job]) -> Result<Vec<RunResult>> {
    let _ = worker_count();
    jobs.iter()
        .map(|j| run_one(j.method, j.seed, &j.sys, &j.agent, &cfg.pso, cfg.timing, &j.tag))
        .collect()
}

fn fmt_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn write_trace_csv(path: &Path, trace: &[StepTrace]) -> Result<()> {
    let mut out = String::from("episode,step,epsilon,action,reward,sum_rate_bps,loss\n");
    for row in trace {
        let loss = row.loss.map(fmt_float).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.episode,
            row.step,
            fmt_float(row.epsilon),
            row.action,
            fmt_float(row.reward),
            fmt_float(row.sum_rate_bps),
            loss
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_summary_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let mut out = String::from(
        "method,seed,n_side,resolution_bits,steps_per_episode,final_rate_bps,best_rate_bps,episodes,wall_seconds\n",
    );
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.seed,
            r.n_side,
            r.resolution_bits,
            r.steps_per_episode,
            fmt_float(r.final_rate_bps),
            fmt_float(r.best_rate_bps),
            r.episodes,
            fmt_float(r.wall_seconds)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

fn write_aggregate_csv(path: &Path, jobs: &[Job], results: &[RunResult]) -> Result<()> {
    let mut out = String::from(
        "method,param,mean_final_rate_bps,std_final_rate_bps,mean_best_rate_bps,std_best_rate_bps,runs\n",
    );
    // preserve first-appearance order of (method, param) groups
    let mut groups: Vec<(Method, usize)> = Vec::new();
    for j in jobs {
        let key = (j.method, j.param.unwrap_or(0));
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (method, param) in groups {
        let finals: Vec<f64> = jobs
            .iter()
            .zip(results.iter())
            .filter(|(j, _)| j.method == method && j.param.unwrap_or(0) == param)
            .map(|(_, r)| r.final_rate_bps)
            .collect();
        let bests: Vec<f64> = jobs
            .iter()
            .zip(results.iter())
            .filter(|(j, _)| j.method == method && j.param.unwrap_or(0) == param)
            .map(|(_, r)| r.best_rate_bps)
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            method,
            param,
            fmt_float(mean(&finals)),
            fmt_float(std_dev(&finals)),
            fmt_float(mean(&bests)),
            fmt_float(std_dev(&bests)),
            finals.len()
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_smoothed_csv(path: &Path, rates: &[f64], window: usize) -> Result<()> {
    let smoothed = moving_average(rates, window)?;
    let mut out = String::from("episode,final_rate_bps,smoothed_rate_bps\n");
    for (i, (&raw, &sm)) in rates.iter().zip(smoothed.iter()).enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, fmt_float(raw), fmt_float(sm)));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_action_space_csv(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let mut out = String::from("scheme,n_side,resolution_bits,size\n");
    for scheme in [Scheme::Element, Scheme::Column, Scheme::Group10, Scheme::Proposed] {
        for &side in &cfg.space_sides {
            for &bits in &cfg.space_bits {
                match action_space_size(scheme, side, bits) {
                    Ok(size) => {
                        out.push_str(&format!("{},{side},{bits},{size}\n", scheme.name()))
                    }
                    // group10 rows are skipped where N is not divisible by 10
                    Err(_) if scheme == Scheme::Group10 => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_oracle_check_csv(path: &Path, cfg: &ExperimentConfig, results: &[RunResult]) -> Result<()> {
    let mut out = String::from("seed,oracle_rate_bps,method,method_best_rate_bps,ratio\n");
    for &seed in &cfg.seeds {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let ch = realize_channels(&cfg.system, &mut rng)?;
        let (_, oracle_rate) = exhaustive_oracle(&ch, &cfg.system)?;
        for r in results.iter().filter(|r| r.seed == seed) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                seed,
                fmt_float(oracle_rate),
                r.method,
                fmt_float(r.best_rate_bps),
                fmt_float(r.best_rate_bps / oracle_rate)
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Execute the experiment and write all artifacts into the output directory.
/// All runs complete before anything is written, so a failure leaves no
/// partial outputs behind. Returns the written file paths.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut written = Vec::new();

    if cfg.kind == ExperimentKind::ActionSpace {
        fs::create_dir_all(&cfg.out_dir)?;
        let path = cfg.out_dir.join("action_space.csv");
        write_action_space_csv(&path, cfg)?;
        written.push(path);
        written.push(echo_config(cfg)?);
        return Ok(written);
    }

    let jobs = build_jobs(cfg);
    let results = run_jobs(cfg, &jobs)?;

    fs::create_dir_all(&cfg.out_dir)?;
    for r in &results {
        if !r.trace.is_empty() {
            let path = cfg
                .out_dir
                .join(format!("trace_{}{}_seed{}.csv", r.method, r.tag, r.seed));
            write_trace_csv(&path, &r.trace)?;
            written.push(path);
        }
        if !r.episode_final_rate_bps.is_empty() {
            let path = cfg
                .out_dir
                .join(format!("smoothed_{}{}_seed{}.csv", r.method, r.tag, r.seed));
            write_smoothed_csv(&path, &r.episode_final_rate_bps, cfg.smoothing_window)?;
            written.push(path);
        }
    }

    let summary = cfg.out_dir.join("summary.csv");
    write_summary_csv(&summary, &results)?;
    written.push(summary);

    if matches!(cfg.kind, ExperimentKind::SweepSteps | ExperimentKind::SweepSize) {
        let path = cfg.out_dir.join("aggregate.csv");
        write_aggregate_csv(&path, &jobs, &results)?;
        written.push(path);
    }

    if cfg.kind == ExperimentKind::OracleCheck {
        let path = cfg.out_dir.join("oracle_check.csv");
        write_oracle_check_csv(&path, cfg, &results)?;
        written.push(path);
    }

    written.push(echo_config(cfg)?);
    Ok(written)
}

fn echo_config(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let path = cfg.out_dir.join("config.toml");
    let text = toml::to_string_pretty(cfg)
        .map_err(|e| RisError::InvalidConfig(format!("config serialization: {e}")))?;
    let mut f = fs::File::create(&path)?;
    f.write_all(text.as_bytes())?;
    Ok(path)
}
