//! Tabular Q-learning over (victim, communication channels, power levels).
//!
//! One slot is one episode. The learned state is the channel part of the
//! previous joint action, so `|S| = L^(N+1)` and `|A| = |S| (chi+1)^N` when
//! the user-AP gains are unknown. With known gains each user keeps its best
//! AP channel and only the victim and the powers are learned.

use rand::Rng;

use crate::config::ScenarioConfig;
use crate::csvfmt::{g9, line};
use crate::error::{Error, Result};
use crate::jammer::{loudest, JammerState};
use crate::model::{delivery_flags, sensed_spectrum, trp_at_ap, Allocation, ChannelState, SlotOutcome};
use crate::rl::{epsilon, PowerGrid};
use crate::rng::{stream, Lane, Stream};
use crate::sim::{run_slot, upsilon_top};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scenario {
    /// Channels and powers are learned jointly.
    UnknownGains,
    /// Communication channels fixed to each user's best AP channel.
    KnownGains,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateCode {
    pub victim: usize,
    pub comm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionCode {
    pub victim: usize,
    pub comm: Vec<usize>,
    /// Power level index per user.
    pub power: Vec<usize>,
}

/// Mixed-radix packing of states and actions.
///
/// Channel code `v + L (c_1 + L (c_2 + ...))` (only `v` with fixed channels),
/// power code `k_1 + (chi+1) (k_2 + ...)`, action `chan + n_chan * power`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codec {
    n_users: usize,
    n_channels: usize,
    levels: usize,
    fixed_comm: Option<Vec<usize>>,
    chan_codes: usize,
    power_codes: usize,
}

impl Codec {
    pub fn unknown_gains(n_users: usize, n_channels: usize, levels: usize) -> Self {
        Self {
            n_users,
            n_channels,
            levels,
            fixed_comm: None,
            chan_codes: n_channels.pow(n_users as u32 + 1),
            power_codes: levels.pow(n_users as u32),
        }
    }

    pub fn known_gains(comm: Vec<usize>, n_channels: usize, levels: usize) -> Self {
        let n_users = comm.len();
        Self {
            n_users,
            n_channels,
            levels,
            fixed_comm: Some(comm),
            chan_codes: n_channels,
            power_codes: levels.pow(n_users as u32),
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn fixed_comm(&self) -> Option<&[usize]> {
        self.fixed_comm.as_deref()
    }

    pub fn n_states(&self) -> usize {
        self.chan_codes
    }

    pub fn n_actions(&self) -> usize {
        self.chan_codes * self.power_codes
    }

    pub fn encode_state(&self, s: &StateCode) -> usize {
        match self.fixed_comm {
            Some(_) => s.victim,
            None => {
                let mut code = 0;
                for &c in s.comm.iter().rev() {
                    code = code * self.n_channels + c;
                }
                code * self.n_channels + s.victim
            }
        }
    }

    pub fn decode_state(&self, mut code: usize) -> StateCode {
        match &self.fixed_comm {
            Some(comm) => StateCode {
                victim: code,
                comm: comm.clone(),
            },
            None => {
                let victim = code % self.n_channels;
                code /= self.n_channels;
                let comm = (0..self.n_users)
                    .map(|_| {
                        let c = code % self.n_channels;
                        code /= self.n_channels;
                        c
                    })
                    .collect();
                StateCode { victim, comm }
            }
        }
    }

    pub fn encode_action(&self, a: &ActionCode) -> usize {
        let chan = self.encode_state(&StateCode {
            victim: a.victim,
            comm: a.comm.clone(),
        });
        let mut power = 0;
        for &k in a.power.iter().rev() {
            power = power * self.levels + k;
        }
        chan + self.chan_codes * power
    }

    pub fn decode_action(&self, code: usize) -> ActionCode {
        let s = self.decode_state(code % self.chan_codes);
        let mut p = code / self.chan_codes;
        let power = (0..self.n_users)
            .map(|_| {
                let k = p % self.levels;
                p /= self.levels;
                k
            })
            .collect();
        ActionCode {
            victim: s.victim,
            comm: s.comm,
            power,
        }
    }

    /// The state reached by playing `action`: its channel part.
    pub fn next_state(&self, action: usize) -> usize {
        action % self.chan_codes
    }

    /// No communication channel may coincide with the victim channel.
    pub fn is_valid_action(&self, action: usize) -> bool {
        let s = self.decode_state(action % self.chan_codes);
        !s.comm.contains(&s.victim)
    }

    pub fn allocation(&self, action: usize, grid: &PowerGrid, p_bar: f64) -> Result<Allocation> {
        let a = self.decode_action(action);
        let q = a.power.iter().map(|&k| grid.level(k)).collect();
        Allocation::new(a.victim, a.comm, q, p_bar)
    }
}

/// Dense Q table with a max tree per row.
///
/// Internal tree nodes live in `tree[s * width + k]` for `k in 1..width`;
/// leaves are read from `values` and invalid or padding actions count as
/// minus infinity, so the row maximum and its lowest index are `O(1)` and
/// an update costs `O(log |A|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    width: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
    tree: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, valid: impl Fn(usize) -> bool) -> Self {
        let width = n_actions.next_power_of_two().max(2);
        let valid: Vec<bool> = (0..n_actions).map(valid).collect();
        let mut t = Self {
            n_states,
            n_actions,
            width,
            values: vec![0.0; n_states * n_actions],
            valid,
            tree: vec![f64::NEG_INFINITY; n_states * width],
        };
        for s in 0..n_states {
            for k in (1..width).rev() {
                let m = t.node(s, 2 * k).max(t.node(s, 2 * k + 1));
                t.tree[s * width + k] = m;
            }
        }
        t
    }

    pub fn for_codec(codec: &Codec) -> Self {
        Self::new(codec.n_states(), codec.n_actions(), |a| codec.is_valid_action(a))
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn is_valid(&self, a: usize) -> bool {
        self.valid[a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    fn node(&self, s: usize, k: usize) -> f64 {
        if k >= self.width {
            let a = k - self.width;
            if a < self.n_actions && self.valid[a] {
                self.values[s * self.n_actions + a]
            } else {
                f64::NEG_INFINITY
            }
        } else {
            self.tree[s * self.width + k]
        }
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
        let mut k = (self.width + a) / 2;
        while k >= 1 {
            let m = self.node(s, 2 * k).max(self.node(s, 2 * k + 1));
            self.tree[s * self.width + k] = m;
            k /= 2;
        }
    }

    /// Largest value over the valid actions of row `s`.
    pub fn max(&self, s: usize) -> f64 {
        self.tree[s * self.width + 1]
    }

    /// Lowest-index maximiser over the valid actions of row `s`.
    pub fn argmax(&self, s: usize) -> usize {
        let mut k = 1;
        while k < self.width {
            k = if self.node(s, 2 * k) >= self.node(s, 2 * k + 1) {
                2 * k
            } else {
                2 * k + 1
            };
        }
        k - self.width
    }

    /// `Q(s,a) <- (1-alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a'))`.
    pub fn bellman_update(&mut self, s: usize, a: usize, r: f64, s_next: usize, alpha: f64, gamma: f64) {
        let target = r + gamma * self.max(s_next);
        let old = self.get(s, a);
        self.set(s, a, (1.0 - alpha) * old + alpha * target);
    }
}

/// Streams driving the exploration: one announced stream shared by all users
/// and a private stream per user.
#[derive(Debug, Clone)]
pub struct Explorer {
    pub shared: Stream,
    pub users: Vec<Stream>,
}

impl Explorer {
    pub fn new(seed: u64, run: u64, n_users: usize) -> Self {
        Self {
            shared: stream(seed, run, Lane::Shared),
            users: (0..n_users)
                .map(|i| stream(seed, run, Lane::User(i as u32)))
                .collect(),
        }
    }
}

/// Uniform exploratory action. The shared stream picks the victim channel;
/// every user then draws its own channel (never the victim) and power level.
pub fn explore_action(codec: &Codec, ex: &mut Explorer) -> usize {
    let l = codec.n_channels();
    let victim = match codec.fixed_comm() {
        None => ex.shared.random_range(0..l),
        Some(comm) => {
            let free: Vec<usize> = (0..l).filter(|c| !comm.contains(c)).collect();
            free[ex.shared.random_range(0..free.len())]
        }
    };
    let mut comm = Vec::with_capacity(codec.n_users());
    let mut power = Vec::with_capacity(codec.n_users());
    for (i, s) in ex.users.iter_mut().enumerate() {
        match codec.fixed_comm() {
            None => {
                let c = s.random_range(0..l - 1);
                comm.push(if c >= victim { c + 1 } else { c });
            }
            Some(fixed) => comm.push(fixed[i]),
        }
        power.push(s.random_range(0..codec.levels()));
    }
    codec.encode_action(&ActionCode { victim, comm, power })
}

/// Epsilon-greedy choice in state `s`. Returns the action and whether it was
/// the greedy one. The shared stream is always consumed once for the coin.
pub fn select_action(q: &QTable, codec: &Codec, s: usize, eps: f64, ex: &mut Explorer) -> (usize, bool) {
    let z: f64 = ex.shared.random();
    if z < eps {
        (explore_action(codec, ex), false)
    } else {
        (q.argmax(s), true)
    }
}

/// Received power of `alloc` against the deterministic jammer.
pub fn evaluate(alloc: &Allocation, ch: &ChannelState) -> (f64, bool) {
    let jammed = loudest(&sensed_spectrum(alloc, ch));
    let delivered = delivery_flags(alloc, jammed);
    (trp_at_ap(alloc, ch, &delivered), jammed == alloc.victim)
}

/// Result of one learning slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub action: usize,
    pub greedy_flag: bool,
    pub epsilon: f64,
    pub outcome: SlotOutcome,
}

/// A learner with its table, streams and counters.
#[derive(Debug, Clone)]
pub struct QLearner {
    pub codec: Codec,
    pub grid: PowerGrid,
    pub q: QTable,
    explorer: Explorer,
    jam_stream: Stream,
    jammer: JammerState,
    state: usize,
    slots: u64,
    unchanged: u64,
    greedy: Option<usize>,
}

impl QLearner {
    pub fn new(ch: &ChannelState, cfg: &ScenarioConfig, scenario: Scenario, grid: PowerGrid, run: u64) -> Result<Self> {
        cfg.validate()?;
        if ch.n_users() != cfg.n_users || ch.n_channels() != cfg.n_channels {
            return Err(Error::Config("channel state does not match the configuration".into()));
        }
        let codec = match scenario {
            Scenario::UnknownGains => Codec::unknown_gains(cfg.n_users, cfg.n_channels, grid.len()),
            Scenario::KnownGains => {
                if cfg.n_channels <= cfg.n_users {
                    return Err(Error::Config(
                        "known-gain learning needs more channels than users".into(),
                    ));
                }
                Codec::known_gains(ch.claim_best_ap_channels(), cfg.n_channels, grid.len())
            }
        };
        let q = QTable::for_codec(&codec);
        Ok(Self {
            explorer: Explorer::new(cfg.seed, run, cfg.n_users),
            jam_stream: stream(cfg.seed, run, Lane::Jammer),
            jammer: JammerState::new(),
            state: 0,
            slots: 0,
            unchanged: 0,
            greedy: None,
            codec,
            grid,
            q,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Exploration streams in their current position.
    pub fn explorer(&self) -> &Explorer {
        &self.explorer
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    /// Consecutive slots without a change of the greedy action.
    pub fn unchanged(&self) -> u64 {
        self.unchanged
    }

    pub fn greedy_action(&self) -> usize {
        self.q.argmax(self.state)
    }

    pub fn greedy_allocation(&self, p_bar: f64) -> Result<Allocation> {
        self.codec.allocation(self.greedy_action(), &self.grid, p_bar)
    }

    pub fn step(&mut self, ch: &ChannelState, cfg: &ScenarioConfig) -> Result<Step> {
        let eps = epsilon(self.slots, cfg.phi_eps, cfg.eps_thr);
        let (action, greedy_flag) = select_action(&self.q, &self.codec, self.state, eps, &mut self.explorer);
        let alloc = self.codec.allocation(action, &self.grid, cfg.p_bar)?;
        let (outcome, js) = run_slot(&alloc, ch, self.jammer, cfg, &mut self.jam_stream)?;
        self.jammer = js;
        let next = self.codec.next_state(action);
        self.q
            .bellman_update(self.state, action, outcome.reward, next, cfg.alpha, cfg.gamma);
        self.state = next;
        self.slots += 1;
        let g = self.q.argmax(self.state);
        if self.greedy == Some(g) {
            self.unchanged += 1;
        } else {
            self.unchanged = 0;
            self.greedy = Some(g);
        }
        Ok(Step {
            action,
            greedy_flag,
            epsilon: eps,
            outcome,
        })
    }

    pub fn finished(&self, cfg: &ScenarioConfig) -> bool {
        self.unchanged as f64 >= cfg.phi_eps || self.slots >= cfg.pi_iteration
    }

    /// Follows the greedy policy for `slots` slots without learning, against
    /// a jammer with its own stream.
    pub fn replay_greedy(&self, ch: &ChannelState, cfg: &ScenarioConfig, slots: usize, run: u64) -> Result<Vec<SlotOutcome>> {
        let mut s = self.state;
        let mut js = JammerState::new();
        let mut jam = stream(cfg.seed, run, Lane::Aux(0));
        let mut out = Vec::with_capacity(slots);
        for _ in 0..slots {
            let a = self.q.argmax(s);
            let alloc = self.codec.allocation(a, &self.grid, cfg.p_bar)?;
            let (o, next) = run_slot(&alloc, ch, js, cfg, &mut jam)?;
            js = next;
            s = self.codec.next_state(a);
            out.push(o);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub slot: u64,
    pub epsilon: f64,
    pub trp: f64,
    pub trp_ratio: f64,
    pub zeta: bool,
    pub jammed_channel: usize,
    pub greedy_flag: bool,
    /// Ratio the current greedy allocation would reach.
    pub greedy_ratio: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("slot,epsilon,trp,trp_ratio,zeta,jammed_channel,greedy_flag,greedy_trp_ratio\n");
    for r in rows {
        out.push_str(&line([
            r.slot.to_string(),
            g9(r.epsilon),
            g9(r.trp),
            g9(r.trp_ratio),
            u8::from(r.zeta).to_string(),
            r.jammed_channel.to_string(),
            u8::from(r.greedy_flag).to_string(),
            g9(r.greedy_ratio),
        ]));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Alg1Run {
    pub learner: QLearner,
    pub trace: Vec<TraceRow>,
    /// Greedy allocation at termination.
    pub allocation: Allocation,
    pub greedy_trp: f64,
    pub greedy_ratio: f64,
    /// Terminated by the stability counter rather than the slot cap.
    pub converged: bool,
}

/// Runs Q-learning on a static channel until the greedy action has been
/// stable for `phi_eps` slots or `pi_iteration` slots have elapsed.
pub fn run_algorithm1(ch: &ChannelState, cfg: &ScenarioConfig, scenario: Scenario, run: u64) -> Result<Alg1Run> {
    let grid = PowerGrid::for_q(cfg)?;
    run_algorithm1_with(ch, cfg, scenario, grid, run)
}

pub fn run_algorithm1_with(
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    scenario: Scenario,
    grid: PowerGrid,
    run: u64,
) -> Result<Alg1Run> {
    let mut learner = QLearner::new(ch, cfg, scenario, grid, run)?;
    let upsilon = upsilon_top(ch, cfg);
    let mut trace = Vec::new();
    let mut cached: Option<(usize, f64)> = None;
    while !learner.finished(cfg) {
        let step = learner.step(ch, cfg)?;
        let g = learner.greedy_action();
        let greedy_trp = match cached {
            Some((a, t)) if a == g => t,
            _ => {
                let t = evaluate(&learner.codec.allocation(g, &learner.grid, cfg.p_bar)?, ch).0;
                cached = Some((g, t));
                t
            }
        };
        trace.push(TraceRow {
            slot: learner.slots() - 1,
            epsilon: step.epsilon,
            trp: step.outcome.trp_g,
            trp_ratio: step.outcome.trp_g / upsilon,
            zeta: step.outcome.zeta,
            jammed_channel: step.outcome.jammed_channel,
            greedy_flag: step.greedy_flag,
            greedy_ratio: greedy_trp / upsilon,
        });
    }
    let allocation = learner.greedy_allocation(cfg.p_bar)?;
    let greedy_trp = evaluate(&allocation, ch).0;
    let converged = learner.unchanged() as f64 >= cfg.phi_eps;
    Ok(Alg1Run {
        learner,
        trace,
        allocation,
        greedy_trp,
        greedy_ratio: greedy_trp / upsilon,
        converged,
    })
}
