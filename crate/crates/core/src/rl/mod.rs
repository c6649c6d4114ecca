//! Model-free learners: tabular Q-learning over joint channel and power
//! choices, and successive refinement of the powers with TD(0).

pub mod q;
pub mod srl;

pub use q::*;
pub use srl::*;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

/// Per-slot reward `w1 g / p_bar - w2 zeta - w3 sum_i d_i^2`.
///
/// `deceive_power` holds the `d_i^2`. The power term is left unnormalised.
pub fn reward(g: f64, zeta: bool, deceive_power: &[f64], cfg: &ScenarioConfig) -> f64 {
    let spent: f64 = deceive_power.iter().sum();
    cfg.w1 * g / cfg.p_bar - cfg.w2 * f64::from(u8::from(zeta)) - cfg.w3 * spent
}

/// Exploration probability after `k` slots: `max(exp(-k/phi), eps_thr)`.
pub fn epsilon(k: u64, phi: f64, eps_thr: f64) -> f64 {
    (-(k as f64) / phi).exp().max(eps_thr)
}

/// Quantised deception powers on `[0, rho]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    levels: Vec<f64>,
}

impl PowerGrid {
    /// `chi + 1` evenly spaced levels `k rho / chi`.
    pub fn uniform(chi: u32, rho: f64) -> Result<Self> {
        if chi == 0 {
            return Err(Error::Config("power grid needs at least one step".into()));
        }
        let levels = (0..=chi).map(|k| rho * f64::from(k) / f64::from(chi)).collect();
        Ok(Self { levels })
    }

    /// Multiples of `step` up to `rho`, plus `rho` itself when the step does
    /// not divide it.
    pub fn from_step(step: f64, rho: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("power step {step} must be positive")));
        }
        let count = (rho / step + 1e-9).floor() as usize;
        let mut levels: Vec<f64> = (0..=count).map(|k| k as f64 * step).collect();
        if rho - levels[count] > 1e-9 * rho.max(1.0) {
            levels.push(rho);
        } else {
            levels[count] = rho;
        }
        Ok(Self { levels })
    }

    /// Grid of the Q-learning stage: the explicit step when configured,
    /// otherwise `chi_q` steps.
    pub fn for_q(cfg: &ScenarioConfig) -> Result<Self> {
        match cfg.q_power_step {
            Some(step) => Self::from_step(step, cfg.rho),
            None => Self::uniform(cfg.chi_q, cfg.rho),
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, k: usize) -> f64 {
        self.levels[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reward_examples() {
        let c = ScenarioConfig::default();
        assert_relative_eq!(reward(8.0, false, &[2.0], &c), -0.2, epsilon = 1e-12);
        assert_relative_eq!(reward(0.0, true, &[0.0], &c), -1.5, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_single_user_rewards() {
        // With unit gains the decoy needs the whole cap, and the unnormalised
        // power term then outweighs the delivered power.
        let c = ScenarioConfig::default();
        let ch = crate::model::ChannelState::uniform(1, 4, 1.0);
        let opt = crate::oracle::solve_full(&ch, &c).unwrap();
        let d2 = opt.allocation.deceive_power.clone();
        assert_relative_eq!(d2[0], 5.0, epsilon = 1e-6);
        let deceive = reward(opt.trp(), false, &d2, &c);
        let idle = reward(0.0, true, &[0.0], &c);
        assert_relative_eq!(deceive, 3.5 * 0.5 - 1.5 * 5.0, epsilon = 1e-5);
        assert_relative_eq!(idle, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn deceiving_pays_on_a_strong_channel() {
        let c = ScenarioConfig::default();
        let ch = crate::model::ChannelState::from_power_gains(
            1,
            4,
            &[0.3, 0.2, 3.0, 0.4],
            &[1.0, 1.0, 0.2, 1.0],
        )
        .unwrap();
        let opt = crate::oracle::solve_full(&ch, &c).unwrap();
        let good = reward(opt.trp(), false, &opt.allocation.deceive_power, &c);
        let idle = reward(0.0, true, &[0.0], &c);
        assert!(idle < good, "{idle} {good}");
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon(0, 1e4, 1e-4), 1.0);
        assert_relative_eq!(epsilon(10_000, 1e4, 1e-4), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(epsilon(10_000_000, 1e4, 1e-4), 1e-4);
    }

    #[test]
    fn grids() {
        let g = PowerGrid::uniform(5, 5.0).unwrap();
        assert_eq!(g.levels(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let g = PowerGrid::from_step(2.0, 5.0).unwrap();
        assert_eq!(g.levels(), &[0.0, 2.0, 4.0, 5.0]);
        let g = PowerGrid::from_step(0.2, 5.0).unwrap();
        assert_eq!(g.len(), 26);
        assert_eq!(g.level(25), 5.0);
        let g = PowerGrid::from_step(0.1, 5.0).unwrap();
        assert_eq!(g.len(), 51);
        assert!(PowerGrid::uniform(0, 5.0).is_err());
        assert!(PowerGrid::from_step(0.0, 5.0).is_err());
    }
}
