//! Scenario and physical-layer configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RisError};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Large-scale loss model applied to every LoS path (and, with the same
/// per-entry amplitude, to the NLoS fading of that path).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
#[derive(Default)]
pub enum PathLossModel {
    /// Free-space loss, 20 dB/decade: L = 20 log10(d) + 20 log10(f) - 147.55 dB.
    #[default]
    FreeSpace,
    /// Indoor LoS variant with a configurable distance power coefficient and a
    /// constant floor-penetration term:
    /// L = 20 log10(f_MHz) + distance_coeff * log10(d) + floor_loss_db - 28 dB.
    IndoorLos {
        distance_coeff: f64,
        floor_loss_db: f64,
    },
}


impl PathLossModel {
    /// Loss in dB at the given distance and carrier frequency.
    pub fn loss_db(&self, distance_m: f64, freq_hz: f64) -> f64 {
        match *self {
            PathLossModel::FreeSpace => {
                20.0 * distance_m.log10() + 20.0 * freq_hz.log10() - 147.55
            }
            PathLossModel::IndoorLos {
                distance_coeff,
                floor_loss_db,
            } => {
                20.0 * (freq_hz / 1e6).log10() + distance_coeff * distance_m.log10()
                    + floor_loss_db
                    - 28.0
            }
        }
    }
}

/// How the RZF precoding matrix is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrecoderNorm {
    /// Each column scaled to unit norm; per-user powers are then exactly p_k.
    #[default]
    Column,
    /// Whole-matrix Frobenius normalization.
    Matrix,
}

/// Room dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for Room {
    fn default() -> Self {
        Room {
            length_m: 8.0,
            width_m: 8.0,
            height_m: 6.0,
        }
    }
}

/// All scenario and physical constants of the downlink system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Number of RIS unit cells N; must be a perfect square.
    pub n_elements: usize,
    /// Number of FBS antennas M.
    pub n_antennas: usize,
    /// Number of single-antenna users K.
    pub n_users: usize,
    /// Carrier frequency f_c in Hz.
    pub freq_hz: f64,
    /// System bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Total transmit power P_max in watts (linear).
    pub p_max_watt: f64,
    /// Per-user noise power in watts (linear).
    pub noise_watt: f64,
    /// Rician factor of the RIS-user channels.
    pub rician_h: f64,
    /// Rician factor of the FBS-RIS channel.
    pub rician_g: f64,
    /// Phase-shift resolution in bits, >= 1.
    pub resolution_bits: u32,
    /// Uniform RIS amplitude response, in (0, 1].
    pub amplitude: f64,
    pub room: Room,
    /// FBS antenna spacing in meters.
    pub fbs_antenna_spacing: f64,
    /// RIS cell spacing in meters.
    pub ris_cell_spacing: f64,
    pub path_loss: PathLossModel,
    pub precoder_norm: PrecoderNorm,
    /// RZF regularization; None means kappa = K * noise_watt.
    pub kappa: Option<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let freq_hz = 5.25e9;
        let lambda = SPEED_OF_LIGHT / freq_hz;
        SystemConfig {
            n_elements: 100,
            n_antennas: 4,
            n_users: 2,
            freq_hz,
            bandwidth_hz: 10e6,
            p_max_watt: dbm_to_watt(25.0),
            noise_watt: dbm_to_watt(-94.0),
            rician_h: 5.0,
            rician_g: 5.0,
            resolution_bits: 1,
            amplitude: 1.0,
            room: Room::default(),
            fbs_antenna_spacing: lambda / 2.0,
            ris_cell_spacing: lambda / 4.0,
            path_loss: PathLossModel::default(),
            precoder_norm: PrecoderNorm::default(),
            kappa: None,
        }
    }
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.freq_hz
    }

    /// Side length of the square RIS array.
    pub fn n_side(&self) -> usize {
        (self.n_elements as f64).sqrt().round() as usize
    }

    /// Number of phase levels 2^R_theta.
    pub fn n_levels(&self) -> u32 {
        1u32 << self.resolution_bits
    }

    /// Uniform per-user power P_max / K.
    pub fn power_per_user(&self) -> f64 {
        self.p_max_watt / self.n_users as f64
    }

    /// Effective RZF regularization parameter.
    pub fn effective_kappa(&self) -> f64 {
        self.kappa
            .unwrap_or(self.n_users as f64 * self.noise_watt)
    }

    pub fn validate(&self) -> Result<()> {
        let side = self.n_side();
        if side * side != self.n_elements || self.n_elements == 0 {
            return Err(RisError::InvalidConfig(format!(
                "n_elements = {} is not a positive perfect square",
                self.n_elements
            )));
        }
        if self.n_antennas == 0 || self.n_users == 0 {
            return Err(RisError::InvalidConfig(
                "n_antennas and n_users must be positive".into(),
            ));
        }
        if self.p_max_watt <= 0.0 {
            return Err(RisError::InvalidConfig("p_max_watt must be > 0".into()));
        }
        if self.noise_watt <= 0.0 {
            return Err(RisError::InvalidConfig("noise_watt must be > 0".into()));
        }
        if self.resolution_bits < 1 {
            return Err(RisError::InvalidConfig("resolution_bits must be >= 1".into()));
        }
        if self.rician_h < 0.0 || self.rician_g < 0.0 {
            return Err(RisError::InvalidConfig("Rician factors must be >= 0".into()));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(RisError::InvalidConfig(
                "amplitude must be in (0, 1]".into(),
            ));
        }
        if self.freq_hz <= 0.0 || self.bandwidth_hz <= 0.0 {
            return Err(RisError::InvalidConfig(
                "freq_hz and bandwidth_hz must be > 0".into(),
            ));
        }
        Ok(())
    }
}
