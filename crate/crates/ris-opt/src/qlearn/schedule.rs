//! Geometric epsilon-greedy exploration schedule.

use serde::{Deserialize, Serialize};

/// epsilon(step) = max(eps_min, eps_init * (1 - eps_decay)^step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps_init: f64,
    pub eps_min: f64,
    pub eps_decay: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            eps_init: 1.0,
            eps_min: 0.001,
            eps_decay: 1e-4,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, global_step: u64) -> f64 {
        let decayed = self.eps_init * (1.0 - self.eps_decay).powf(global_step as f64);
        decayed.max(self.eps_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_one_and_floors() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.value(0), 1.0);
        assert_eq!(s.value(10_000_000), 0.001);
    }

    #[test]
    fn half_life_matches_independent_evaluation() {
        let s = EpsilonSchedule::default();
        // (1 - 1e-4)^6931 evaluated via exp/ln independently
        let expected = (6931.0 * (1.0f64 - 1e-4).ln()).exp();
        let got = s.value(6931);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.5).abs() < 5e-4);
    }

    #[test]
    fn monotone_non_increasing_and_bounded() {
        let s = EpsilonSchedule::default();
        let mut last = f64::INFINITY;
        for step in (0..200_000).step_by(997) {
            let e = s.value(step);
            assert!(e <= last);
            assert!((s.eps_min..=s.eps_init).contains(&e));
            last = e;
        }
    }
}
