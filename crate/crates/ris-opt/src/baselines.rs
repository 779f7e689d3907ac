//! Comparison schemes: flat/random configurations, exhaustive enumeration,
//! PSO with quantization, and column-wise DQN/DDQN with enumerated actions.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, StepTrace, TrainReport};
use crate::channel::ChannelPair;
use crate::config::SystemConfig;
use crate::env::{build_state, StateNorm};
use crate::error::{Result, RisError};
use crate::qlearn::{Adam, Mlp, ReplayBuffer, Transition};
use crate::rate::{quantize, sum_rate, sum_rate_continuous, PhaseConfig};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticKind {
    Flat,
    Random,
}

/// Flat (all zeros) or uniformly random configuration.
pub fn baseline_static<R: Rng>(kind: StaticKind, cfg: &SystemConfig, rng: &mut R) -> PhaseConfig {
    match kind {
        StaticKind::Flat => PhaseConfig::zeros(cfg.n_elements, cfg.resolution_bits),
        StaticKind::Random => PhaseConfig::random(cfg.n_elements, cfg.resolution_bits, rng),
    }
}

/// Best and mean rate over a budget of independent random draws.
pub fn random_best_of<R: Rng>(
    ch: &ChannelPair,
    cfg: &SystemConfig,
    draws: usize,
    rng: &mut R,
) -> Result<(PhaseConfig, f64, f64)> {
    if draws == 0 {
        return Err(RisError::InvalidArgument("need at least one draw".into()));
    }
    let mut best_cfg = PhaseConfig::zeros(cfg.n_elements, cfg.resolution_bits);
    let mut best = f64::NEG_INFINITY;
    let mut total = 0.0;
    for _ in 0..draws {
        let candidate = baseline_static(StaticKind::Random, cfg, rng);
        let rate = sum_rate(&candidate, ch, cfg)?.rate_bps;
        total += rate;
        if rate > best {
            best = rate;
            best_cfg = candidate;
        }
    }
    Ok((best_cfg, best, total / draws as f64))
}

const ORACLE_BIT_BUDGET: u32 = 20;

fn decode_element_config(counter: u64, n: usize, bits: u32) -> PhaseConfig {
    let mask = (1u64 << bits) - 1;
    PhaseConfig {
        indices: (0..n)
            .map(|i| ((counter >> (i as u32 * bits)) & mask) as u32)
            .collect(),
        resolution_bits: bits,
    }
}

fn oracle_bounds(cfg: &SystemConfig) -> Result<u64> {
    let bits = cfg.n_elements as u32 * cfg.resolution_bits;
    if bits > ORACLE_BIT_BUDGET {
        return Err(RisError::TooLarge(format!(
            "exhaustive oracle needs N * R_theta <= {ORACLE_BIT_BUDGET}, got {bits}"
        )));
    }
    Ok(1u64 << bits)
}

fn oracle_better(rate: f64, indices: &[u32], best_rate: f64, best_indices: &[u32]) -> bool {
    rate > best_rate || (rate == best_rate && indices < best_indices)
}

/// Brute force over all 2^(N R_theta) configurations; ties broken by the
/// lexicographically smallest index vector.
pub fn exhaustive_oracle_seq(ch: &ChannelPair, cfg: &SystemConfig) -> Result<(PhaseConfig, f64)> {
    let total = oracle_bounds(cfg)?;
    let mut best = decode_element_config(0, cfg.n_elements, cfg.resolution_bits);
    let mut best_rate = sum_rate(&best, ch, cfg)?.rate_bps;
    for counter in 1..total {
        let candidate = decode_element_config(counter, cfg.n_elements, cfg.resolution_bits);
        let rate = sum_rate(&candidate, ch, cfg)?.rate_bps;
        if oracle_better(rate, &candidate.indices, best_rate, &best.indices) {
            best = candidate;
            best_rate = rate;
        }
    }
    Ok((best, best_rate))
}

/// Data-parallel oracle; the reduction order is irrelevant because the
/// comparison is a strict total order on (rate, index vector).
#[cfg(feature = "parallel")]
pub fn exhaustive_oracle_par(ch: &ChannelPair, cfg: &SystemConfig) -> Result<(PhaseConfig, f64)> {
    use rayon::prelude::*;
    let total = oracle_bounds(cfg)?;
    let evaluated: Vec<_> = (0..total)
        .into_par_iter()
        .map(|counter| {
            let candidate = decode_element_config(counter, cfg.n_elements, cfg.resolution_bits);
            sum_rate(&candidate, ch, cfg).map(|br| (candidate, br.rate_bps))
        })
        .collect::<Result<_>>()?;
    evaluated
        .into_iter()
        .reduce(|best, cand| {
            if oracle_better(cand.1, &cand.0.indices, best.1, &best.0.indices) {
                cand
            } else {
                best
            }
        })
        .ok_or_else(|| RisError::InvalidArgument("empty enumeration".into()))
}

pub fn exhaustive_oracle(ch: &ChannelPair, cfg: &SystemConfig) -> Result<(PhaseConfig, f64)> {
    #[cfg(feature = "parallel")]
    {
        exhaustive_oracle_par(ch, cfg)
    }
    #[cfg(not(feature = "parallel"))]
    {
        exhaustive_oracle_seq(ch, cfg)
    }
}

/// Global-best particle swarm parameters (constriction-style defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            swarm_size: 40,
            iterations: 200,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(RisError::InvalidConfig("swarm_size must be >= 2".into()));
        }
        if self.inertia <= 0.0 || self.cognitive <= 0.0 || self.social <= 0.0 {
            return Err(RisError::InvalidConfig(
                "PSO coefficients must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub continuous_phases: Vec<f64>,
    pub continuous_rate_bps: f64,
    pub quantized: PhaseConfig,
    pub quantized_rate_bps: f64,
}

/// Global-best PSO over [0, 2pi)^N maximizing the continuous sum rate, then
/// per-element quantization to the nearest discrete phase.
pub fn pso_optimize<R: Rng>(
    ch: &ChannelPair,
    cfg: &SystemConfig,
    pso: &PsoParams,
    rng: &mut R,
) -> Result<PsoResult> {
    pso.validate()?;
    cfg.validate()?;
    let n = cfg.n_elements;

    let mut positions: Vec<Vec<f64>> = (0..pso.swarm_size)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..TWO_PI)).collect())
        .collect();
    let mut velocities: Vec<Vec<f64>> = (0..pso.swarm_size)
        .map(|_| {
            (0..n)
                .map(|_| rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2))
                .collect()
        })
        .collect();

    let mut pbest = positions.clone();
    let mut pbest_rate = Vec::with_capacity(pso.swarm_size);
    for p in &positions {
        pbest_rate.push(sum_rate_continuous(p, ch, cfg)?.rate_bps);
    }
    let gbest_idx = (0..pso.swarm_size)
        .max_by(|&a, &b| pbest_rate[a].partial_cmp(&pbest_rate[b]).unwrap())
        .unwrap();
    let mut gbest = pbest[gbest_idx].clone();
    let mut gbest_rate = pbest_rate[gbest_idx];

    for _ in 0..pso.iterations {
        for i in 0..pso.swarm_size {
            for d in 0..n {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                velocities[i][d] = pso.inertia * velocities[i][d]
                    + pso.cognitive * r1 * (pbest[i][d] - positions[i][d])
                    + pso.social * r2 * (gbest[d] - positions[i][d]);
                positions[i][d] = (positions[i][d] + velocities[i][d]).rem_euclid(TWO_PI);
            }
            let rate = sum_rate_continuous(&positions[i], ch, cfg)?.rate_bps;
            if rate > pbest_rate[i] {
                pbest_rate[i] = rate;
                pbest[i] = positions[i].clone();
            }
            if rate > gbest_rate {
                gbest_rate = rate;
                gbest = positions[i].clone();
            }
        }
    }

    let quantized = quantize(&gbest, cfg.resolution_bits);
    let quantized_rate_bps = sum_rate(&quantized, ch, cfg)?.rate_bps;
    Ok(PsoResult {
        continuous_phases: gbest,
        continuous_rate_bps: gbest_rate,
        quantized,
        quantized_rate_bps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnumVariant {
    Dqn,
    Ddqn,
}

const ENUM_BIT_BUDGET: u32 = 14;

/// Column levels for an enumerated action: little-endian base-2^R digits,
/// column 1 the least significant.
pub fn decode_enum_action(index: u64, n_side: usize, bits: u32) -> Vec<u32> {
    let mask = (1u64 << bits) - 1;
    (0..n_side)
        .map(|c| ((index >> (c as u32 * bits)) & mask) as u32)
        .collect()
}

pub fn encode_enum_action(levels: &[u32], bits: u32) -> u64 {
    levels
        .iter()
        .enumerate()
        .fold(0u64, |acc, (c, &lvl)| acc | ((lvl as u64) << (c as u32 * bits)))
}

fn enum_action_to_phases(index: u64, cfg: &SystemConfig) -> PhaseConfig {
    let side = cfg.n_side();
    let levels = decode_enum_action(index, side, cfg.resolution_bits);
    let mut phases = PhaseConfig::zeros(cfg.n_elements, cfg.resolution_bits);
    for row in 0..side {
        phases.indices[row * side..(row + 1) * side].copy_from_slice(&levels);
    }
    phases
}

/// Column-wise DQN/DDQN baseline: the action space enumerates every complete
/// column configuration, one action fully determines the surface, and
/// episodes terminate after a single action.
pub fn columnwise_enum_train(
    variant: EnumVariant,
    agent: &AgentConfig,
    sys: &SystemConfig,
    ch: &ChannelPair,
    rng: &mut ChaCha12Rng,
) -> Result<TrainReport> {
    agent.validate()?;
    sys.validate()?;
    let side_bits = sys.n_side() as u32 * sys.resolution_bits;
    if side_bits > ENUM_BIT_BUDGET {
        return Err(RisError::TooLarge(format!(
            "enumerated action space needs sqrt(N) * R_theta <= {ENUM_BIT_BUDGET}, got {side_bits}"
        )));
    }
    let n_actions = 1usize << side_bits;
    let norm = StateNorm::from_channel(ch);

    let zeros = PhaseConfig::zeros(sys.n_elements, sys.resolution_bits);
    let reset_state = build_state(ch, &zeros, None, &norm);
    let state_dim = reset_state.len();

    let mut sizes = vec![state_dim];
    sizes.extend(agent.hidden.clone());
    sizes.push(n_actions);
    let mut online = Mlp::new(&sizes, rng)?;
    let mut target = online.sync_target();
    let mut opt = Adam::new(agent.alpha, &online);
    let mut buffer = ReplayBuffer::new(agent.n_replay);
    let mut grad_steps: u64 = 0;

    let mut report = TrainReport {
        steps: Vec::with_capacity(agent.n_episodes),
        episode_final_reward: Vec::with_capacity(agent.n_episodes),
        episode_final_rate_bps: Vec::with_capacity(agent.n_episodes),
        best_phases: zeros.clone(),
        best_rate_bps: sum_rate(&zeros, ch, sys)?.rate_bps,
    };

    for episode in 1..=agent.n_episodes {
        let eps = agent.eps.value((episode - 1) as u64);
        let action = if rng.gen::<f64>() < eps {
            rng.gen_range(0..n_actions)
        } else {
            let q = online.forward(&reset_state)?;
            q.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        };
        let phases = enum_action_to_phases(action as u64, sys);
        let br = sum_rate(&phases, ch, sys)?;
        let reward = br.spectral_bps_hz;
        if br.rate_bps > report.best_rate_bps {
            report.best_rate_bps = br.rate_bps;
            report.best_phases = phases.clone();
        }

        let next_state = build_state(ch, &phases, None, &norm);
        buffer.push(Transition {
            state: reset_state.clone(),
            action,
            reward,
            next_state,
            done: true,
        });

        let mut loss = None;
        if buffer.len() >= agent.n_batch {
            loss = Some(enum_learn(variant, agent, &mut online, &target, &mut opt, &buffer, rng)?);
            grad_steps += 1;
            if grad_steps.is_multiple_of(agent.n_freq) {
                target = online.sync_target();
            }
        }

        report.steps.push(StepTrace {
            episode,
            step: 1,
            epsilon: eps,
            action,
            reward,
            sum_rate_bps: br.rate_bps,
            loss,
        });
        report.episode_final_reward.push(reward);
        report.episode_final_rate_bps.push(br.rate_bps);
    }
    Ok(report)
}

fn enum_learn(
    variant: EnumVariant,
    agent: &AgentConfig,
    online: &mut Mlp,
    target: &Mlp,
    opt: &mut Adam,
    buffer: &ReplayBuffer,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let batch = buffer.sample(agent.n_batch, rng)?;
    let dim = online.input_width();
    let mut x = Array2::zeros((batch.len(), dim));
    let mut x_next = Array2::zeros((batch.len(), dim));
    for (j, tr) in batch.iter().enumerate() {
        x.row_mut(j).assign(&ndarray::ArrayView1::from(&tr.state));
        x_next
            .row_mut(j)
            .assign(&ndarray::ArrayView1::from(&tr.next_state));
    }
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();

    let q_next_target = target.forward_batch(&x_next)?;
    let q_next_online = match variant {
        EnumVariant::Ddqn => Some(online.forward_batch(&x_next)?),
        EnumVariant::Dqn => None,
    };
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(j, tr)| {
            if tr.done {
                return tr.reward;
            }
            let boot = match &q_next_online {
                // DDQN: argmax from the online network, value from the target
                Some(qo) => {
                    let row = qo.row(j);
                    let mut a_max = 0;
                    for (i, &v) in row.iter().enumerate() {
                        if v > row[a_max] {
                            a_max = i;
                        }
                    }
                    q_next_target[[j, a_max]]
                }
                // DQN: max over the target network alone
                None => q_next_target
                    .row(j)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
            };
            tr.reward + agent.gamma * boot
        })
        .collect();
    online.train_step(opt, &x, &actions, &targets)
}
