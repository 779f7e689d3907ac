//! RIS control environment: accumulated column actions, flattened state
//! construction, and the embedded greedy element-wise refinement.

use crate::channel::ChannelPair;
use crate::config::SystemConfig;
use crate::error::{Result, RisError};
use crate::rate::{sum_rate, PhaseConfig, RateBreakdown};

/// Normalization constants shared by every state built within one run.
#[derive(Debug, Clone, Copy)]
pub struct StateNorm {
    pub channel_rms: f64,
}

impl StateNorm {
    pub fn from_channel(ch: &ChannelPair) -> Self {
        let total: f64 = ch.g.iter().chain(ch.h.iter()).map(|c| c.norm_sqr()).sum();
        let count = (ch.g.len() + ch.h.len()) as f64;
        let rms = (total / count).sqrt();
        StateNorm {
            channel_rms: if rms > 0.0 { rms } else { 1.0 },
        }
    }
}

/// Flattened state: row n concatenates Re(G)_n, Re(H)_n, Im(G)_n, Im(H)_n,
/// theta_n in degrees / 360, and (when present) theta'_n in degrees / 360.
/// Channel entries are divided by the run's channel RMS.
pub fn build_state(
    ch: &ChannelPair,
    phases: &PhaseConfig,
    refined: Option<&PhaseConfig>,
    norm: &StateNorm,
) -> Vec<f64> {
    let (n, m) = ch.g.dim();
    let k = ch.h.ncols();
    let width = 2 * m + 2 * k + 1 + usize::from(refined.is_some());
    let inv_rms = 1.0 / norm.channel_rms;
    let mut out = Vec::with_capacity(n * width);
    for row in 0..n {
        for j in 0..m {
            out.push(ch.g[[row, j]].re * inv_rms);
        }
        for j in 0..k {
            out.push(ch.h[[row, j]].re * inv_rms);
        }
        for j in 0..m {
            out.push(ch.g[[row, j]].im * inv_rms);
        }
        for j in 0..k {
            out.push(ch.h[[row, j]].im * inv_rms);
        }
        out.push(phases.phase_deg(row) / 360.0);
        if let Some(r) = refined {
            out.push(r.phase_deg(row) / 360.0);
        }
    }
    out
}

/// Best configuration seen so far, over every sum-rate evaluation performed.
#[derive(Debug, Clone)]
pub struct BestTracker {
    pub phases: PhaseConfig,
    pub rate_bps: f64,
}

impl BestTracker {
    fn update(&mut self, phases: &PhaseConfig, rate_bps: f64) {
        if rate_bps > self.rate_bps {
            self.rate_bps = rate_bps;
            self.phases = phases.clone();
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    /// Spectral efficiency, omega-weighted on the final step.
    pub reward: f64,
    /// Unweighted sum spectral efficiency of the current configuration.
    pub spectral: f64,
    pub rate_bps: f64,
    pub done: bool,
}

/// The RIS environment for one training run over a fixed channel pair.
pub struct RisEnv<'a> {
    sys: &'a SystemConfig,
    ch: &'a ChannelPair,
    norm: StateNorm,
    pub phases: PhaseConfig,
    pub refined: Option<PhaseConfig>,
    step_index: usize,
    t_max: usize,
    omega: f64,
    best: BestTracker,
}

impl<'a> RisEnv<'a> {
    pub fn new(
        sys: &'a SystemConfig,
        ch: &'a ChannelPair,
        t_max: usize,
        omega: f64,
        track_refined: bool,
    ) -> Result<Self> {
        sys.validate()?;
        if t_max == 0 {
            return Err(RisError::InvalidConfig("t_max must be >= 1".into()));
        }
        let zeros = PhaseConfig::zeros(sys.n_elements, sys.resolution_bits);
        Ok(RisEnv {
            sys,
            ch,
            norm: StateNorm::from_channel(ch),
            refined: track_refined.then(|| zeros.clone()),
            phases: zeros.clone(),
            step_index: 0,
            t_max,
            omega,
            best: BestTracker {
                phases: zeros,
                rate_bps: f64::NEG_INFINITY,
            },
        })
    }

    pub fn n_side(&self) -> usize {
        self.sys.n_side()
    }

    /// Action space size sqrt(N) + 1, independent of the phase resolution.
    pub fn action_count(&self) -> usize {
        self.n_side() + 1
    }

    pub fn state_dim(&self) -> usize {
        let m = self.sys.n_antennas;
        let k = self.sys.n_users;
        self.sys.n_elements * (2 * m + 2 * k + 1 + usize::from(self.refined.is_some()))
    }

    pub fn evaluate(&mut self, phases: &PhaseConfig) -> Result<RateBreakdown> {
        let br = sum_rate(phases, self.ch, self.sys)?;
        self.best.update(phases, br.rate_bps);
        Ok(br)
    }

    pub fn best(&self) -> &BestTracker {
        &self.best
    }

    pub fn state_vec(&self) -> Vec<f64> {
        build_state(self.ch, &self.phases, self.refined.as_ref(), &self.norm)
    }

    /// Start a new episode with the all-zero configuration.
    pub fn reset(&mut self) -> Result<Vec<f64>> {
        self.phases = PhaseConfig::zeros(self.sys.n_elements, self.sys.resolution_bits);
        if self.refined.is_some() {
            self.refined = Some(self.phases.clone());
        }
        self.step_index = 0;
        // the all-zero configuration is part of the search trajectory
        let zeros = self.phases.clone();
        self.evaluate(&zeros)?;
        Ok(self.state_vec())
    }

    /// Apply one accumulated column action. Action c > 0 advances every
    /// element of column c one discrete level (wrapping); action 0 leaves
    /// the configuration unchanged.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action > self.n_side() {
            return Err(RisError::InvalidArgument(format!(
                "action {action} out of range 0..={}",
                self.n_side()
            )));
        }
        if self.step_index >= self.t_max {
            return Err(RisError::InvalidArgument(
                "episode already finished; call reset".into(),
            ));
        }
        // accumulated actions build on the refined configuration when the
        // greedy stage is active
        if let Some(r) = &self.refined {
            self.phases = r.clone();
        }
        if action > 0 {
            let side = self.n_side();
            let col = action - 1;
            for row in 0..side {
                self.phases.advance(row * side + col);
            }
        }
        if self.refined.is_some() {
            self.refined = Some(self.phases.clone());
        }
        self.step_index += 1;
        let done = self.step_index == self.t_max;

        let br = {
            let phases = self.phases.clone();
            self.evaluate(&phases)?
        };
        let weight = if done { self.omega } else { 1.0 };
        Ok(StepOutcome {
            state: self.state_vec(),
            reward: weight * br.spectral_bps_hz,
            spectral: br.spectral_bps_hz,
            rate_bps: br.rate_bps,
            done,
        })
    }

    /// Element-wise greedy pass over the column selected by `action`:
    /// each trial advances one element a single level and is kept iff the
    /// spectral efficiency does not decrease. Returns the refined spectral
    /// efficiency r' >= baseline.
    pub fn greedy_refine(
        &mut self,
        action: usize,
        baseline_spectral: f64,
        iterations: usize,
    ) -> Result<f64> {
        if action == 0 || action > self.n_side() {
            return Err(RisError::InvalidArgument(format!(
                "greedy refinement needs a column action in 1..={}, got {action}",
                self.n_side()
            )));
        }
        let side = self.n_side();
        let col = action - 1;
        let mut refined = self
            .refined
            .clone()
            .unwrap_or_else(|| self.phases.clone());
        let mut best = baseline_spectral;
        for p in 1..=iterations {
            let row = (p - 1) % side;
            let element = row * side + col;
            refined.advance(element);
            let br = self.evaluate(&refined)?;
            if br.spectral_bps_hz >= best {
                best = br.spectral_bps_hz;
            } else {
                refined.retreat(element);
            }
        }
        self.refined = Some(refined);
        Ok(best)
    }
}
