//! Successive refinement: a coarse Q-learning stage with known user-AP gains,
//! then TD(0) stages that learn additive power adjustments on shrinking
//! grids around the committed powers.

use rand::Rng;

use crate::config::ScenarioConfig;
use crate::csvfmt::{g9, line};
use crate::error::{Error, Result};
use crate::jammer::JammerState;
use crate::model::{Allocation, ChannelState};
use crate::rl::q::{evaluate, run_algorithm1_with, Scenario};
use crate::rl::{epsilon, reward, PowerGrid};
use crate::rng::{stream, Lane};
use crate::sim::{run_slot, upsilon_top};

/// State values over per-user adjustment indices, `(chi+1)^N` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    n_users: usize,
    levels: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(n_users: usize, levels: usize) -> Self {
        Self {
            n_users,
            levels,
            values: vec![0.0; levels.pow(n_users as u32)],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn set(&mut self, s: usize, v: f64) {
        self.values[s] = v;
    }

    /// Lowest-index maximiser.
    pub fn argmax(&self) -> usize {
        crate::model::argmax(self.values.iter().copied())
    }

    pub fn encode(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &j| acc * self.levels + j)
    }

    pub fn decode(&self, mut s: usize) -> Vec<usize> {
        (0..self.n_users)
            .map(|_| {
                let j = s % self.levels;
                s /= self.levels;
                j
            })
            .collect()
    }
}

/// `V(s) <- V(s) + alpha (r + gamma V(s') - V(s))`.
pub fn td_update(v: &mut ValueTable, s: usize, r: f64, s_next: usize, alpha: f64, gamma: f64) {
    let old = v.get(s);
    let target = r + gamma * v.get(s_next);
    v.set(s, old + alpha * (target - old));
}

/// Committed result of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SrlStage {
    pub index: u32,
    /// Deception power per user after the stage.
    pub offsets: Vec<f64>,
    /// Adjustment range explored by the stage.
    pub tau: f64,
    /// Step of the stage's grid.
    pub omega: f64,
    /// Adjustment committed by the stage (zeros for the Q stage).
    pub adjustment: Vec<f64>,
    /// Slots since the start of the run when the stage ended.
    pub slots_elapsed: u64,
    pub trp_ratio: f64,
}

/// Greedy quality per slot across all stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SrlTraceRow {
    pub slot: u64,
    pub stage: u32,
    pub greedy_trp: f64,
    pub greedy_ratio: f64,
    /// The slot's played allocation drew the jammer onto the victim.
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrlRun {
    pub allocation: Allocation,
    pub stages: Vec<SrlStage>,
    pub trace: Vec<SrlTraceRow>,
    pub total_slots: u64,
    /// A stage past the minimum committed the zero adjustment.
    pub stopped_on_zero: bool,
}

/// Adjustment of index `j` on `chi + 1` levels over `[-tau, tau]`, with an
/// exact zero at the centre.
pub fn adjustment(j: usize, chi: u32, tau: f64) -> f64 {
    let chi = i64::from(chi);
    tau * (2 * j as i64 - chi) as f64 / chi as f64
}

/// Stage offsets plus adjustment, clamped to `[0, rho]`.
pub fn apply_adjustment(offsets: &[f64], adj: &[f64], rho: f64) -> Vec<f64> {
    offsets
        .iter()
        .zip(adj)
        .map(|(o, a)| (o + a).clamp(0.0, rho))
        .collect()
}

/// Explored space sizes per stage: joint actions of the Q stage, then states
/// of each TD stage.
pub fn srl_action_count(cfg: &ScenarioConfig) -> Vec<u64> {
    let n = cfg.n_users as u32;
    let mut counts = vec![cfg.n_channels as u64 * (u64::from(cfg.chi_q) + 1).pow(n)];
    for stage in 1..=cfg.max_td_stages {
        let chi = if stage == 1 { cfg.chi_td } else { cfg.chi_td_refine };
        counts.push((u64::from(chi) + 1).pow(n));
    }
    counts
}

/// Joint actions of flat Q-learning at `step` with known gains.
pub fn flat_action_count(cfg: &ScenarioConfig, step: f64) -> u64 {
    let levels = (cfg.rho / step + 1e-9).floor() as u64 + 1;
    cfg.n_channels as u64 * levels.pow(cfg.n_users as u32)
}

pub fn stage_csv(stages: &[SrlStage]) -> String {
    let mut out = String::from("stage,slots_elapsed,offsets,tau,omega,trp_ratio\n");
    for s in stages {
        let offsets: Vec<String> = s.offsets.iter().map(|o| g9(*o)).collect();
        out.push_str(&line([
            s.index.to_string(),
            s.slots_elapsed.to_string(),
            offsets.join(";"),
            g9(s.tau),
            g9(s.omega),
            g9(s.trp_ratio),
        ]));
    }
    out
}

pub fn srl_trace_csv(rows: &[SrlTraceRow]) -> String {
    let mut out = String::from("slot,stage,greedy_trp,greedy_trp_ratio,success\n");
    for r in rows {
        out.push_str(&line([
            r.slot.to_string(),
            r.stage.to_string(),
            g9(r.greedy_trp),
            g9(r.greedy_ratio),
            u8::from(r.success).to_string(),
        ]));
    }
    out
}

/// Runs the Q stage on the reduced spaces, then TD stages until a late stage
/// commits no adjustment or the stage budget is spent.
pub fn run_algorithm2(ch: &ChannelState, cfg: &ScenarioConfig, run: u64) -> Result<SrlRun> {
    if cfg.chi_td == 0 || cfg.chi_td_refine == 0 {
        return Err(Error::Config("TD stages need at least one power step".into()));
    }
    let upsilon = upsilon_top(ch, cfg);
    let grid = PowerGrid::uniform(cfg.chi_q, cfg.rho)?;
    let stage0 = run_algorithm1_with(ch, cfg, Scenario::KnownGains, grid, run)?;
    let mut trace: Vec<SrlTraceRow> = stage0
        .trace
        .iter()
        .map(|r| SrlTraceRow {
            slot: r.slot,
            stage: 0,
            greedy_trp: r.greedy_ratio * upsilon,
            greedy_ratio: r.greedy_ratio,
            success: !r.zeta,
        })
        .collect();
    let victim = stage0.allocation.victim;
    let comm = stage0.allocation.comm.clone();
    let mut offsets = stage0.allocation.deceive_power.clone();
    let mut slots = stage0.learner.slots();
    let mut stages = vec![SrlStage {
        index: 0,
        offsets: offsets.clone(),
        tau: cfg.rho,
        omega: cfg.rho / f64::from(cfg.chi_q),
        adjustment: vec![0.0; cfg.n_users],
        slots_elapsed: slots,
        trp_ratio: stage0.greedy_ratio,
    }];

    let n = cfg.n_users;
    let mut ex = stage0.learner.explorer().clone();
    let mut jam = stream(cfg.seed, run, Lane::Aux(1));
    let mut js = JammerState::new();
    let mut tau = cfg.tau;
    let mut stopped_on_zero = false;
    for index in 1..=cfg.max_td_stages {
        let chi = if index == 1 { cfg.chi_td } else { cfg.chi_td_refine };
        let levels = chi as usize + 1;
        let omega = 2.0 * tau / f64::from(chi);
        let mut v = ValueTable::new(n, levels);
        let powers_of = |s: usize, v: &ValueTable| -> Vec<f64> {
            let adj: Vec<f64> = v.decode(s).iter().map(|&j| adjustment(j, chi, tau)).collect();
            apply_adjustment(&offsets, &adj, cfg.rho)
        };
        let mut k = 0u64;
        let mut unchanged = 0u64;
        let mut best = v.argmax();
        let mut cached: Option<(usize, f64)> = None;
        loop {
            let eps = epsilon(k, cfg.phi_eps_td, cfg.eps_thr);
            let z: f64 = ex.shared.random();
            let s = if z < eps {
                let idx: Vec<usize> = ex.users.iter_mut().map(|u| u.random_range(0..levels)).collect();
                v.encode(&idx)
            } else {
                v.argmax()
            };
            let p = powers_of(s, &v);
            let alloc = Allocation::new(victim, comm.clone(), p, cfg.p_bar)?;
            let (outcome, next_js) = run_slot(&alloc, ch, js, cfg, &mut jam)?;
            js = next_js;
            let r = reward(outcome.trp_g, false, &alloc.deceive_power, cfg);
            let s_next = v.argmax();
            td_update(&mut v, s, r, s_next, cfg.alpha, cfg.gamma);
            k += 1;
            slots += 1;
            let g = v.argmax();
            if g == best {
                unchanged += 1;
            } else {
                unchanged = 0;
                best = g;
            }
            let greedy_trp = match cached {
                Some((s, t)) if s == g => t,
                _ => {
                    let a = Allocation::new(victim, comm.clone(), powers_of(g, &v), cfg.p_bar)?;
                    let t = evaluate(&a, ch).0;
                    cached = Some((g, t));
                    t
                }
            };
            trace.push(SrlTraceRow {
                slot: slots - 1,
                stage: index,
                greedy_trp,
                greedy_ratio: greedy_trp / upsilon,
                success: !outcome.zeta,
            });
            if unchanged >= cfg.psi_end || k >= cfg.pi_iteration {
                break;
            }
        }
        let idx = v.decode(best);
        let adj: Vec<f64> = idx.iter().map(|&j| adjustment(j, chi, tau)).collect();
        offsets = apply_adjustment(&offsets, &adj, cfg.rho);
        let committed = Allocation::new(victim, comm.clone(), offsets.clone(), cfg.p_bar)?;
        let zero = idx.iter().all(|&j| 2 * j == chi as usize);
        stages.push(SrlStage {
            index,
            offsets: offsets.clone(),
            tau,
            omega,
            adjustment: adj,
            slots_elapsed: slots,
            trp_ratio: evaluate(&committed, ch).0 / upsilon,
        });
        tau = omega;
        if zero && index >= cfg.min_td_stages {
            stopped_on_zero = true;
            break;
        }
    }
    let allocation = Allocation::new(victim, comm, offsets, cfg.p_bar)?;
    Ok(SrlRun {
        allocation,
        stages,
        trace,
        total_slots: slots,
        stopped_on_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::draw_channels;
    use approx::assert_relative_eq;

    #[test]
    fn td_examples() {
        let mut v = ValueTable::new(1, 3);
        td_update(&mut v, 0, 1.0, 1, 0.9, 0.9);
        assert_relative_eq!(v.get(0), 0.9, epsilon = 1e-15);
        let mut v = ValueTable::new(1, 3);
        v.set(1, 1.0);
        td_update(&mut v, 0, 0.0, 1, 0.9, 0.9);
        assert_relative_eq!(v.get(0), 0.81, epsilon = 1e-15);
        let before = v.clone();
        td_update(&mut v, 0, 3.0, 1, 0.0, 0.9);
        assert_eq!(v, before);
    }

    #[test]
    fn table_size() {
        assert_eq!(ValueTable::new(3, 11).len(), 1331);
        assert_eq!(ValueTable::new(1, 9).len(), 9);
    }

    #[test]
    fn offset_arithmetic() {
        let adj = [adjustment(3, 8, 2.0), adjustment(4, 8, 2.0), adjustment(5, 8, 2.0)];
        assert_eq!(adj, [-0.5, 0.0, 0.5]);
        assert_eq!(apply_adjustment(&[4.0, 4.0, 4.0], &adj, 5.0), vec![3.5, 4.0, 4.5]);
        assert_eq!(apply_adjustment(&[4.8, 0.2], &[0.5, -0.5], 5.0), vec![5.0, 0.0]);
        assert_eq!(adjustment(0, 10, 0.5), -0.5);
        assert_eq!(adjustment(5, 10, 0.5), 0.0);
    }

    #[test]
    fn action_counts() {
        let cfg = ScenarioConfig {
            chi_td: 10,
            max_td_stages: 2,
            ..ScenarioConfig::default().with_users(3).with_channels(5)
        };
        assert_eq!(srl_action_count(&cfg), vec![1080, 1331, 1331]);
        assert_eq!(flat_action_count(&cfg, 0.1), 51u64.pow(3) * 5);
        let cfg = ScenarioConfig {
            rho: 10.0,
            ..cfg
        };
        assert_eq!(flat_action_count(&cfg, 0.1), 101u64.pow(3) * 5);
        let cfg = ScenarioConfig::default().with_users(1).with_channels(4);
        let counts = srl_action_count(&cfg);
        assert_eq!(counts[0], 6 * 4);
        assert_eq!(counts[1], 9);
    }

    #[test]
    fn zero_step_schedule_rejected() {
        let cfg = ScenarioConfig {
            chi_td: 0,
            ..ScenarioConfig::default().with_users(1).with_channels(4)
        };
        let ch = ChannelState::uniform(1, 4, 1.0);
        assert!(matches!(run_algorithm2(&ch, &cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn stage_schedule_shrinks() {
        let cfg = ScenarioConfig::default().with_users(2).with_channels(5);
        let ch = draw_channels(&cfg, &mut stream(2, 0, Lane::Channels));
        let res = run_algorithm2(&ch, &cfg, 0).unwrap();
        assert!(res.stages.len() >= 1 + cfg.min_td_stages as usize);
        for w in res.stages.windows(2).skip(1) {
            assert_relative_eq!(w[1].tau, w[0].omega, epsilon = 1e-15);
        }
        for s in &res.stages {
            assert!(s.offsets.iter().all(|o| (0.0..=cfg.rho).contains(o)));
        }
        assert_eq!(res.trace.len() as u64, res.total_slots);
        let again = run_algorithm2(&ch, &cfg, 0).unwrap();
        assert_eq!(res, again);
        assert!(stage_csv(&res.stages).starts_with("stage,slots_elapsed,offsets,tau,omega,trp_ratio\n"));
    }
}
