//! Scenario geometry and Rician channel realizations.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Result, RisError};

pub type CMat = Array2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Positions of every radiating element in the room.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePositions {
    pub ris_cells: Vec<Point>,
    pub fbs_antennas: Vec<Point>,
    pub users: Vec<Point>,
}

/// One channel realization. LoS/NLoS parts are retained alongside the mixed
/// matrices so tests can inspect the composition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    /// FBS -> RIS, N x M.
    pub g: CMat,
    /// RIS -> users, N x K.
    pub h: CMat,
    pub g_los: CMat,
    pub h_los: CMat,
    pub g_nlos: CMat,
    pub h_nlos: CMat,
}

/// RIS cells on a planar sqrt(N) x sqrt(N) grid centered on the ceiling
/// center; FBS and users uniform in opposite half-spaces along the length
/// axis, heights in [0, 4] m.
pub fn sample_positions<R: Rng>(cfg: &SystemConfig, rng: &mut R) -> Result<NodePositions> {
    cfg.validate()?;
    let side = cfg.n_side();
    let cx = cfg.room.length_m / 2.0;
    let cy = cfg.room.width_m / 2.0;
    let cz = cfg.room.height_m;
    let spacing = cfg.ris_cell_spacing;
    let offset = (side as f64 - 1.0) / 2.0;

    let mut ris_cells = Vec::with_capacity(cfg.n_elements);
    for row in 0..side {
        for col in 0..side {
            ris_cells.push(Point {
                x: cx + (row as f64 - offset) * spacing,
                y: cy + (col as f64 - offset) * spacing,
                z: cz,
            });
        }
    }

    let max_height = cfg.room.height_m.min(4.0);
    let half = cfg.room.length_m / 2.0;

    // FBS: uniform linear array along y around a random anchor in the first
    // half-space.
    let fx = rng.gen_range(0.0..half);
    let fy = rng.gen_range(0.0..cfg.room.width_m);
    let fz = rng.gen_range(0.0..max_height);
    let m = cfg.n_antennas;
    let f_offset = (m as f64 - 1.0) / 2.0;
    let fbs_antennas = (0..m)
        .map(|i| Point {
            x: fx,
            y: fy + (i as f64 - f_offset) * cfg.fbs_antenna_spacing,
            z: fz,
        })
        .collect();

    let users = (0..cfg.n_users)
        .map(|_| Point {
            x: rng.gen_range(half..cfg.room.length_m),
            y: rng.gen_range(0.0..cfg.room.width_m),
            z: rng.gen_range(0.0..max_height),
        })
        .collect();

    Ok(NodePositions {
        ris_cells,
        fbs_antennas,
        users,
    })
}

/// Linear amplitude gain sqrt(10^(-L/10)) for the configured loss model.
pub fn path_loss_amplitude(cfg: &SystemConfig, distance_m: f64) -> Result<f64> {
    if distance_m <= 0.0 {
        return Err(RisError::InvalidArgument(format!(
            "distance must be > 0, got {distance_m}"
        )));
    }
    let loss_db = cfg.path_loss.loss_db(distance_m, cfg.freq_hz);
    Ok(10f64.powf(-loss_db / 20.0))
}

fn los_entry(cfg: &SystemConfig, a: &Point, b: &Point) -> Result<Complex64> {
    let d = a.distance(b);
    let amp = path_loss_amplitude(cfg, d)?;
    let phase = -2.0 * std::f64::consts::PI * d / cfg.wavelength();
    Ok(Complex64::from_polar(amp, phase))
}

/// Near-field LoS components: per-element spherical-wave phases with
/// path-loss amplitudes. Returns (g_los N x M, h_los N x K).
pub fn build_los(positions: &NodePositions, cfg: &SystemConfig) -> Result<(CMat, CMat)> {
    let n = positions.ris_cells.len();
    let m = positions.fbs_antennas.len();
    let k = positions.users.len();
    if n != cfg.n_elements || m != cfg.n_antennas || k != cfg.n_users {
        return Err(RisError::ShapeMismatch(format!(
            "positions ({n}, {m}, {k}) inconsistent with config ({}, {}, {})",
            cfg.n_elements, cfg.n_antennas, cfg.n_users
        )));
    }
    let mut g_los = Array2::zeros((n, m));
    for (i, cell) in positions.ris_cells.iter().enumerate() {
        for (j, ant) in positions.fbs_antennas.iter().enumerate() {
            g_los[[i, j]] = los_entry(cfg, cell, ant)?;
        }
    }
    let mut h_los = Array2::zeros((n, k));
    for (i, cell) in positions.ris_cells.iter().enumerate() {
        for (j, user) in positions.users.iter().enumerate() {
            h_los[[i, j]] = los_entry(cfg, cell, user)?;
        }
    }
    Ok((g_los, h_los))
}

/// i.i.d. circularly-symmetric complex Gaussian entries, zero mean, unit
/// variance (path-loss scaling is applied separately).
pub fn sample_nlos<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_fn((rows, cols), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// sqrt(eps/(eps+1)) * los + sqrt(1/(eps+1)) * nlos, elementwise.
pub fn assemble_rician(los: &CMat, nlos: &CMat, factor: f64) -> Result<CMat> {
    if los.dim() != nlos.dim() {
        return Err(RisError::ShapeMismatch(format!(
            "los {:?} vs nlos {:?}",
            los.dim(),
            nlos.dim()
        )));
    }
    if factor < 0.0 {
        return Err(RisError::InvalidArgument(format!(
            "Rician factor must be >= 0, got {factor}"
        )));
    }
    let w_los = (factor / (factor + 1.0)).sqrt();
    let w_nlos = (1.0 / (factor + 1.0)).sqrt();
    Ok(los * Complex64::from(w_los) + nlos * Complex64::from(w_nlos))
}

/// Full realization: geometry, LoS, scaled NLoS, Rician mix, for both G and H.
pub fn realize_channels<R: Rng>(cfg: &SystemConfig, rng: &mut R) -> Result<ChannelPair> {
    let positions = sample_positions(cfg, rng)?;
    let (g_los, h_los) = build_los(&positions, cfg)?;

    // NLoS fading shares the per-entry path-loss amplitude of the LoS entry
    // so the Rician factor stays a LoS/NLoS power ratio.
    let scale_like = |los: &CMat, fading: CMat| -> CMat {
        let mut out = fading;
        out.zip_mut_with(los, |f, l| *f *= Complex64::from(l.norm()));
        out
    };
    let g_nlos = scale_like(&g_los, sample_nlos(rng, cfg.n_elements, cfg.n_antennas));
    let h_nlos = scale_like(&h_los, sample_nlos(rng, cfg.n_elements, cfg.n_users));

    let g = assemble_rician(&g_los, &g_nlos, cfg.rician_g)?;
    let h = assemble_rician(&h_los, &h_nlos, cfg.rician_h)?;
    Ok(ChannelPair {
        g,
        h,
        g_los,
        h_los,
        g_nlos,
        h_nlos,
    })
}
