//! Discrete phase configurations and the sum-rate objective:
//! beamforming vector, effective channel, RZF precoding, SINR, sum rate.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelPair, CMat};
use crate::config::{PrecoderNorm, SystemConfig};
use crate::error::{Result, RisError};
use crate::linalg::{hermitian, invert};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Length-N vector of discrete phase indices in {0, ..., 2^R_theta - 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseConfig {
    pub indices: Vec<u32>,
    pub resolution_bits: u32,
}

impl PhaseConfig {
    pub fn zeros(n: usize, resolution_bits: u32) -> Self {
        PhaseConfig {
            indices: vec![0; n],
            resolution_bits,
        }
    }

    pub fn random<R: Rng>(n: usize, resolution_bits: u32, rng: &mut R) -> Self {
        let levels = 1u32 << resolution_bits;
        PhaseConfig {
            indices: (0..n).map(|_| rng.gen_range(0..levels)).collect(),
            resolution_bits,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_levels(&self) -> u32 {
        1u32 << self.resolution_bits
    }

    /// Phase in radians of element n.
    pub fn phase(&self, n: usize) -> f64 {
        self.indices[n] as f64 * TWO_PI / self.n_levels() as f64
    }

    /// Phase in degrees of element n.
    pub fn phase_deg(&self, n: usize) -> f64 {
        self.indices[n] as f64 * 360.0 / self.n_levels() as f64
    }

    /// Advance element n to the next discrete level, wrapping past the top.
    pub fn advance(&mut self, n: usize) {
        self.indices[n] = (self.indices[n] + 1) % self.n_levels();
    }

    /// Step element n back one level (inverse of `advance`).
    pub fn retreat(&mut self, n: usize) {
        let levels = self.n_levels();
        self.indices[n] = (self.indices[n] + levels - 1) % levels;
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution_bits < 1 {
            return Err(RisError::InvalidConfig("resolution_bits must be >= 1".into()));
        }
        let levels = self.n_levels();
        if let Some(bad) = self.indices.iter().find(|&&i| i >= levels) {
            return Err(RisError::InvalidConfig(format!(
                "phase index {bad} out of range for {levels} levels"
            )));
        }
        Ok(())
    }
}

/// The ordered set of available discrete phases {j * 2pi / 2^R : j}.
pub fn phase_set(resolution_bits: u32) -> Result<Vec<f64>> {
    if resolution_bits < 1 {
        return Err(RisError::InvalidArgument(
            "resolution_bits must be >= 1".into(),
        ));
    }
    let levels = 1u32 << resolution_bits;
    Ok((0..levels)
        .map(|j| j as f64 * TWO_PI / levels as f64)
        .collect())
}

/// Diagonal of the RIS beamforming matrix: beta * e^{j theta_n}.
pub fn phases_to_beamforming(phases: &PhaseConfig, beta: f64) -> Vec<Complex64> {
    (0..phases.len())
        .map(|n| Complex64::from_polar(beta, phases.phase(n)))
        .collect()
}

/// Same, from continuous phases in radians (PSO baseline path).
pub fn continuous_beamforming(phases: &[f64], beta: f64) -> Vec<Complex64> {
    phases
        .iter()
        .map(|&t| Complex64::from_polar(beta, t))
        .collect()
}

/// Effective K x M channel: row k = h_k^T Phi G.
pub fn effective_channel(h: &CMat, phi: &[Complex64], g: &CMat) -> Result<CMat> {
    let (n, k) = h.dim();
    let (ng, m) = g.dim();
    if n != ng || phi.len() != n {
        return Err(RisError::ShapeMismatch(format!(
            "h {:?}, phi {}, g {:?}",
            h.dim(),
            phi.len(),
            g.dim()
        )));
    }
    let mut out = Array2::zeros((k, m));
    for kk in 0..k {
        for mm in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for nn in 0..n {
                acc += h[[nn, kk]] * phi[nn] * g[[nn, mm]];
            }
            out[[kk, mm]] = acc;
        }
    }
    Ok(out)
}

/// Regularized zero-forcing precoder W (M x K).
pub fn rzf_precoder(h_ris: &CMat, kappa: f64, norm: PrecoderNorm) -> Result<CMat> {
    let (k, m) = h_ris.dim();
    if kappa < 0.0 {
        return Err(RisError::InvalidArgument("kappa must be >= 0".into()));
    }
    let hh = hermitian(h_ris);
    let mut w = if k <= m {
        // H^H (H H^H + kappa I_K)^{-1}
        let mut gram = h_ris.dot(&hh);
        for i in 0..k {
            gram[[i, i]] += Complex64::from(kappa);
        }
        hh.dot(&invert(&gram)?)
    } else {
        // (H^H H + kappa I_M)^{-1} H^H
        let mut gram = hh.dot(h_ris);
        for i in 0..m {
            gram[[i, i]] += Complex64::from(kappa);
        }
        invert(&gram)?.dot(&hh)
    };
    match norm {
        PrecoderNorm::Column => {
            for mut col in w.columns_mut() {
                let nrm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if nrm < f64::MIN_POSITIVE {
                    return Err(RisError::Numerical("zero precoder column".into()));
                }
                col.mapv_inplace(|c| c / nrm);
            }
        }
        PrecoderNorm::Matrix => {
            let nrm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if nrm < f64::MIN_POSITIVE {
                return Err(RisError::Numerical("zero precoder matrix".into()));
            }
            w.mapv_inplace(|c| c / nrm);
        }
    }
    Ok(w)
}

/// Per-user SINR under the given powers and noise.
pub fn compute_sinr(h_ris: &CMat, w: &CMat, power_per_user: &[f64], noise: &[f64]) -> Vec<f64> {
    let (k, m) = h_ris.dim();
    debug_assert_eq!(w.dim(), (m, k));
    let mut gains = Array2::<f64>::zeros((k, k));
    for kk in 0..k {
        for jj in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for mm in 0..m {
                acc += h_ris[[kk, mm]] * w[[mm, jj]];
            }
            gains[[kk, jj]] = acc.norm_sqr();
        }
    }
    (0..k)
        .map(|kk| {
            let signal = power_per_user[kk] * gains[[kk, kk]];
            let interference: f64 = (0..k)
                .filter(|&jj| jj != kk)
                .map(|jj| power_per_user[jj] * gains[[kk, jj]])
                .sum();
            signal / (interference + noise[kk])
        })
        .collect()
}

/// Per-user SINR (linear), sum spectral efficiency, and sum rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBreakdown {
    pub sinr: Vec<f64>,
    pub spectral_bps_hz: f64,
    pub rate_bps: f64,
}

fn breakdown_from_phi(phi: &[Complex64], ch: &ChannelPair, cfg: &SystemConfig) -> Result<RateBreakdown> {
    let h_ris = effective_channel(&ch.h, phi, &ch.g)?;
    let w = rzf_precoder(&h_ris, cfg.effective_kappa(), cfg.precoder_norm)?;
    let p = vec![cfg.power_per_user(); cfg.n_users];
    let noise = vec![cfg.noise_watt; cfg.n_users];
    let sinr = compute_sinr(&h_ris, &w, &p, &noise);
    let spectral_bps_hz: f64 = sinr.iter().map(|&s| (1.0 + s).log2()).sum();
    Ok(RateBreakdown {
        sinr,
        rate_bps: cfg.bandwidth_hz * spectral_bps_hz,
        spectral_bps_hz,
    })
}

/// Objective of the optimization problem: sum rate of a discrete configuration.
pub fn sum_rate(phases: &PhaseConfig, ch: &ChannelPair, cfg: &SystemConfig) -> Result<RateBreakdown> {
    phases.validate()?;
    if phases.len() != cfg.n_elements {
        return Err(RisError::ShapeMismatch(format!(
            "phase config length {} != N = {}",
            phases.len(),
            cfg.n_elements
        )));
    }
    breakdown_from_phi(&phases_to_beamforming(phases, cfg.amplitude), ch, cfg)
}

/// Sum rate of a continuous phase vector (used by the PSO baseline).
pub fn sum_rate_continuous(phases: &[f64], ch: &ChannelPair, cfg: &SystemConfig) -> Result<RateBreakdown> {
    if phases.len() != cfg.n_elements {
        return Err(RisError::ShapeMismatch(format!(
            "phase vector length {} != N = {}",
            phases.len(),
            cfg.n_elements
        )));
    }
    breakdown_from_phi(&continuous_beamforming(phases, cfg.amplitude), ch, cfg)
}

/// Nearest discrete level to a continuous phase, by circular distance, ties
/// to the lower phase.
pub fn quantize_phase(theta: f64, resolution_bits: u32) -> u32 {
    let levels = 1u32 << resolution_bits;
    let step = TWO_PI / levels as f64;
    let t = theta.rem_euclid(TWO_PI);
    let mut best = 0u32;
    let mut best_dist = f64::INFINITY;
    for j in 0..levels {
        let d = (t - j as f64 * step).abs();
        let d = d.min(TWO_PI - d);
        if d < best_dist {
            best_dist = d;
            best = j;
        }
    }
    best
}

/// Quantize a continuous phase vector to a discrete configuration.
pub fn quantize(phases: &[f64], resolution_bits: u32) -> PhaseConfig {
    PhaseConfig {
        indices: phases
            .iter()
            .map(|&t| quantize_phase(t, resolution_bits))
            .collect(),
        resolution_bits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::realize_channels;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn rand_cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
        Array2::from_shape_fn((r, c), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn phase_set_values() {
        assert_eq!(phase_set(1).unwrap(), vec![0.0, PI]);
        let p2 = phase_set(2).unwrap();
        assert_eq!(p2.len(), 4);
        assert_relative_eq!(p2[1], PI / 2.0);
        assert_relative_eq!(p2[3], 3.0 * PI / 2.0);
        assert_eq!(phase_set(3).unwrap().len(), 8);
        assert!(phase_set(0).is_err());
    }

    #[test]
    fn beamforming_entries() {
        let all_zero = PhaseConfig::zeros(4, 2);
        let phi = phases_to_beamforming(&all_zero, 1.0);
        assert!(phi.iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let cfg = PhaseConfig { indices: vec![2], resolution_bits: 2 };
        let phi = phases_to_beamforming(&cfg, 1.0);
        assert!((phi[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        let cfg = PhaseConfig { indices: vec![0], resolution_bits: 2 };
        let phi = phases_to_beamforming(&cfg, 0.8);
        assert!((phi[0] - Complex64::new(0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn effective_channel_scalar_passthrough() {
        let h = array![[Complex64::new(1.0, 0.0)]];
        let g = array![[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]];
        let phi = vec![Complex64::new(1.0, 0.0)];
        let out = effective_channel(&h, &phi, &g).unwrap();
        assert_eq!(out.dim(), (1, 2));
        assert!((out[[0, 0]] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((out[[0, 1]] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn effective_channel_identity_phi_is_ht_g() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let h = rand_cmat(&mut rng, 4, 2);
        let g = rand_cmat(&mut rng, 4, 4);
        let phi = vec![Complex64::new(1.0, 0.0); 4];
        let out = effective_channel(&h, &phi, &g).unwrap();
        let ht_g = h.t().dot(&g);
        for (a, b) in out.iter().zip(ht_g.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn effective_channel_matches_triple_loop_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let h = rand_cmat(&mut rng, 4, 2);
        let g = rand_cmat(&mut rng, 4, 4);
        let phi: Vec<Complex64> = (0..4)
            .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..TWO_PI)))
            .collect();
        let out = effective_channel(&h, &phi, &g).unwrap();
        // independent oracle: explicit diag construction and naive loops
        for k in 0..2 {
            for m in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..4 {
                    for n2 in 0..4 {
                        let diag = if n == n2 { phi[n] } else { Complex64::new(0.0, 0.0) };
                        acc += h[[n, k]] * diag * g[[n2, m]];
                    }
                }
                assert!((out[[k, m]] - acc).norm() <= 1e-12 * acc.norm().max(1.0));
            }
        }
        // shape mismatch rejected
        assert!(effective_channel(&h, &phi[..3], &g).is_err());
    }

    #[test]
    fn rzf_single_user_single_antenna() {
        let c = Complex64::new(0.3, -0.4);
        let h_ris = array![[c]];
        for kappa in [0.0, 0.1, 3.0] {
            let w = rzf_precoder(&h_ris, kappa, PrecoderNorm::Column).unwrap();
            let expected = c.conj() / c.norm();
            assert!((w[[0, 0]] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn rzf_zero_forcing_limit() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let h_ris = rand_cmat(&mut rng, 2, 4);
        let w = rzf_precoder(&h_ris, 1e-15, PrecoderNorm::Column).unwrap();
        let prod = h_ris.dot(&w);
        for k in 0..2 {
            for j in 0..2 {
                if k != j {
                    assert!(prod[[k, j]].norm() / prod[[k, k]].norm() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn rzf_branches_agree_and_match_pinv_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for &(k, m) in &[(3usize, 2usize), (2, 4), (3, 3)] {
            let h_ris = rand_cmat(&mut rng, k, m);
            let kappa = 0.05;
            // evaluate both branch formulas directly (unnormalized)
            let hh = hermitian(&h_ris);
            let mut gram_k = h_ris.dot(&hh);
            for i in 0..k {
                gram_k[[i, i]] += Complex64::from(kappa);
            }
            let w_a = hh.dot(&invert(&gram_k).unwrap());
            let mut gram_m = hh.dot(&h_ris);
            for i in 0..m {
                gram_m[[i, i]] += Complex64::from(kappa);
            }
            let w_b = invert(&gram_m).unwrap().dot(&hh);
            for (a, b) in w_a.iter().zip(w_b.iter()) {
                assert!((a - b).norm() <= 1e-10 * b.norm().max(1e-12));
            }
            // independent oracle: nalgebra SVD-based regularized inverse
            let na = nalgebra::DMatrix::from_fn(k, m, |i, j| h_ris[[i, j]]);
            let svd = nalgebra::SVD::new(na.clone(), true, true);
            let u = svd.u.as_ref().unwrap();
            let vt = svd.v_t.as_ref().unwrap();
            // W = V diag(s/(s^2+kappa)) U^H
            let mut w_oracle = nalgebra::DMatrix::<Complex64>::zeros(m, k);
            for (idx, &s) in svd.singular_values.iter().enumerate() {
                let gain = Complex64::from(s / (s * s + kappa));
                let v_col = vt.row(idx).adjoint();
                let u_col = u.column(idx);
                w_oracle += (v_col * u_col.adjoint()) * gain;
            }
            for i in 0..m {
                for j in 0..k {
                    assert!(
                        (w_a[[i, j]] - w_oracle[(i, j)]).norm()
                            <= 1e-10 * w_oracle[(i, j)].norm().max(1e-9),
                        "branch vs pinv oracle mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn sinr_single_user_and_orthogonal() {
        let h_ris = array![[Complex64::new(2.0, 0.0)]];
        let w = array![[Complex64::new(1.0, 0.0)]];
        let sinr = compute_sinr(&h_ris, &w, &[0.5], &[0.25]);
        assert_relative_eq!(sinr[0], 0.5 * 4.0 / 0.25, max_relative = 1e-12);

        // orthogonal users: h_ris,k . w_j = 0 for j != k
        let h_ris = array![
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(3.0, 0.0)]
        ];
        let w = array![
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
        ];
        let sinr = compute_sinr(&h_ris, &w, &[2.0, 1.0], &[0.5, 0.5]);
        assert_relative_eq!(sinr[0], 2.0 * 1.0 / 0.5, max_relative = 1e-12);
        assert_relative_eq!(sinr[1], 1.0 * 9.0 / 0.5, max_relative = 1e-12);
    }

    #[test]
    fn sinr_matches_scalar_hand_evaluation() {
        // K=2, M=2 hand-built numeric instance, evaluated with scalar
        // arithmetic on complex pairs.
        let h_ris = array![
            [Complex64::new(1.0, 1.0), Complex64::new(0.5, -0.5)],
            [Complex64::new(-0.25, 0.75), Complex64::new(2.0, 0.0)]
        ];
        let w = array![
            [Complex64::new(0.6, 0.0), Complex64::new(0.1, 0.2)],
            [Complex64::new(0.0, -0.8), Complex64::new(0.9, 0.3)]
        ];
        let p = [0.7, 0.3];
        let noise = [0.01, 0.02];
        let sinr = compute_sinr(&h_ris, &w, &p, &noise);

        let dot = |k: usize, j: usize| -> Complex64 {
            h_ris[[k, 0]] * w[[0, j]] + h_ris[[k, 1]] * w[[1, j]]
        };
        let s0 = p[0] * dot(0, 0).norm_sqr() / (p[1] * dot(0, 1).norm_sqr() + noise[0]);
        let s1 = p[1] * dot(1, 1).norm_sqr() / (p[0] * dot(1, 0).norm_sqr() + noise[1]);
        assert_relative_eq!(sinr[0], s0, max_relative = 1e-12);
        assert_relative_eq!(sinr[1], s1, max_relative = 1e-12);
    }

    fn tiny_system(n: usize) -> SystemConfig {
        SystemConfig {
            n_elements: n,
            n_antennas: 2,
            n_users: 2,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn rate_is_bandwidth_times_spectral() {
        let cfg = tiny_system(4);
        let ch = realize_channels(&cfg, &mut ChaCha12Rng::seed_from_u64(5)).unwrap();
        let br = sum_rate(&PhaseConfig::zeros(4, 1), &ch, &cfg).unwrap();
        assert!(br.rate_bps >= 0.0);
        assert_relative_eq!(br.rate_bps, cfg.bandwidth_hz * br.spectral_bps_hz);
        let manual: f64 = br.sinr.iter().map(|&s| (1.0 + s).log2()).sum();
        assert_relative_eq!(br.spectral_bps_hz, manual);
        // SINR of 1 per user at B=10 MHz would give 2e7; check the algebra on
        // a forced breakdown
        let forced = RateBreakdown {
            sinr: vec![1.0, 1.0],
            spectral_bps_hz: 2.0,
            rate_bps: cfg.bandwidth_hz * 2.0,
        };
        assert_relative_eq!(forced.rate_bps, 2e7);
    }

    #[test]
    fn single_user_rate_monotone_in_power() {
        let cfg = SystemConfig {
            n_users: 1,
            ..tiny_system(4)
        };
        let ch = realize_channels(&cfg, &mut ChaCha12Rng::seed_from_u64(6)).unwrap();
        let phases = PhaseConfig::random(4, 1, &mut ChaCha12Rng::seed_from_u64(7));
        let mut last = 0.0;
        for mult in [1.0, 2.0, 4.0, 8.0] {
            let c = SystemConfig {
                p_max_watt: cfg.p_max_watt * mult,
                ..cfg.clone()
            };
            let r = sum_rate(&phases, &ch, &c).unwrap().rate_bps;
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn user_permutation_symmetry() {
        let cfg = tiny_system(9);
        let ch = realize_channels(&cfg, &mut ChaCha12Rng::seed_from_u64(8)).unwrap();
        let phases = PhaseConfig::random(9, 1, &mut ChaCha12Rng::seed_from_u64(9));
        let r1 = sum_rate(&phases, &ch, &cfg).unwrap();
        // swap the two user columns of H (and its components)
        let mut swapped = ch.clone();
        for n in 0..9 {
            swapped.h.swap([n, 0], [n, 1]);
        }
        let r2 = sum_rate(&phases, &swapped, &cfg).unwrap();
        assert_relative_eq!(r1.rate_bps, r2.rate_bps, max_relative = 1e-12);
    }

    #[test]
    fn quantization_rules() {
        // R=1: nearest of {0, pi}
        assert_eq!(quantize_phase(1.5, 1), 0);
        assert_eq!(quantize_phase(2.0, 1), 1);
        // wrap-around nearness: 5.8 rad is closer to 0 (via 2pi) than to pi
        assert_eq!(quantize_phase(5.8, 1), 0);
        // ties go to the lower phase
        assert_eq!(quantize_phase(PI / 2.0, 1), 0);
        // idempotent on already-discrete configurations
        let pc = PhaseConfig { indices: vec![0, 1, 3, 2], resolution_bits: 2 };
        let thetas: Vec<f64> = (0..4).map(|i| pc.phase(i)).collect();
        assert_eq!(quantize(&thetas, 2), pc);
    }

    #[test]
    fn advance_wraps_cyclically() {
        let mut pc = PhaseConfig { indices: vec![3], resolution_bits: 2 };
        pc.advance(0);
        assert_eq!(pc.indices[0], 0);
        pc.retreat(0);
        assert_eq!(pc.indices[0], 3);
    }
}
