//! Slot orchestration, per-run metrics and the random-hopping baseline.

use rand::Rng;

use crate::config::ScenarioConfig;
use crate::csvfmt::{g9, line};
use crate::error::{Error, Result};
use crate::jammer::{react, JammerState};
use crate::model::{delivery_flags, sensed_spectrum, trp_at_ap, Allocation, ChannelState, SlotOutcome};
use crate::rl::reward;
use crate::rng::{stream, Lane, Stream};

/// Plays one slot: the jammer senses `alloc`, reacts, and the outcome is
/// scored. `stream` is only consumed by random jammer hops.
pub fn run_slot(
    alloc: &Allocation,
    ch: &ChannelState,
    jstate: JammerState,
    cfg: &ScenarioConfig,
    stream: &mut Stream,
) -> Result<(SlotOutcome, JammerState)> {
    let sensed = sensed_spectrum(alloc, ch);
    let next = react(jstate, &sensed, ch.n_channels(), cfg.jammer_random_prob, stream)?;
    let jammed = next.current_channel.expect("react always jams a channel");
    let delivered = delivery_flags(alloc, jammed);
    let trp_g = trp_at_ap(alloc, ch, &delivered);
    let zeta = jammed != alloc.victim;
    let reward = reward(trp_g, zeta, &alloc.deceive_power, cfg);
    Ok((
        SlotOutcome {
            jammed_channel: jammed,
            delivered,
            trp_g,
            zeta,
            reward,
        },
        next,
    ))
}

/// Largest achievable received power without a jammer:
/// every user at full power on its best channel.
pub fn upsilon_top(ch: &ChannelState, cfg: &ScenarioConfig) -> f64 {
    (0..ch.n_users())
        .map(|i| {
            let best = ch.best_ap_channel(i);
            cfg.p_bar * ch.hc2(i, best)
        })
        .sum()
}

/// Fraction of successes over the trailing `window` entries.
pub fn success_rate(series: &[bool], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::Domain("success rate over an empty window".into()));
    }
    if window > series.len() {
        return Err(Error::Domain(format!(
            "window {window} longer than the series ({})",
            series.len()
        )));
    }
    let tail = &series[series.len() - window..];
    Ok(tail.iter().filter(|s| **s).count() as f64 / window as f64)
}

/// First index from which every value stays at or above `target`; `None`
/// when the series ends below it.
pub fn slots_to_sustained(series: &[f64], target: f64) -> Option<usize> {
    let mut first = None;
    for (k, v) in series.iter().enumerate().rev() {
        if *v >= target {
            first = Some(k);
        } else {
            break;
        }
    }
    first
}

/// Per-slot record of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub trp: Vec<f64>,
    pub trp_ratio: Vec<f64>,
    /// Jammer hit the victim channel.
    pub success: Vec<bool>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.trp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trp.is_empty()
    }

    pub fn push(&mut self, trp: f64, upsilon: f64, success: bool) {
        self.trp.push(trp);
        self.trp_ratio.push(if upsilon > 0.0 { trp / upsilon } else { 0.0 });
        self.success.push(success);
    }

    pub fn record(&mut self, outcome: &SlotOutcome, upsilon: f64) {
        self.push(outcome.trp_g, upsilon, !outcome.zeta);
    }

    pub fn success_rate(&self, window: usize) -> Result<f64> {
        success_rate(&self.success, window)
    }

    pub fn mean_trp(&self) -> f64 {
        mean(&self.trp)
    }

    pub fn mean_ratio(&self) -> f64 {
        mean(&self.trp_ratio)
    }

    /// Running means of the ratio, one per slot.
    pub fn cumulative_ratio(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.trp_ratio
            .iter()
            .enumerate()
            .map(|(k, r)| {
                acc += r;
                acc / (k + 1) as f64
            })
            .collect()
    }

    /// `seed,slot,trp,trp_ratio,success` rows with header.
    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = String::from("seed,slot,trp,trp_ratio,success\n");
        for k in 0..self.len() {
            out.push_str(&line([
                seed.to_string(),
                k.to_string(),
                g9(self.trp[k]),
                g9(self.trp_ratio[k]),
                u8::from(self.success[k]).to_string(),
            ]));
        }
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Plays a fixed allocation for `slots` slots against the jammer.
pub fn replay_allocation(
    alloc: &Allocation,
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    slots: usize,
    stream: &mut Stream,
) -> Result<Metrics> {
    let upsilon = upsilon_top(ch, cfg);
    let mut js = JammerState::new();
    let mut m = Metrics::new();
    for _ in 0..slots {
        let (o, next) = run_slot(alloc, ch, js, cfg, stream)?;
        js = next;
        m.record(&o, upsilon);
    }
    Ok(m)
}

/// Random channel hopping at full power with no decoy. Each slot every user
/// picks a uniform channel from its own stream.
pub fn baseline_random_hop(
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    with_jammer: bool,
    slots: usize,
    run: u64,
) -> Result<Metrics> {
    let n = ch.n_users();
    let l = ch.n_channels();
    let upsilon = upsilon_top(ch, cfg);
    let mut users: Vec<Stream> = (0..n)
        .map(|i| stream(cfg.seed, run, Lane::User(i as u32)))
        .collect();
    let mut jam = stream(cfg.seed, run, Lane::Jammer);
    let mut js = JammerState::new();
    let mut metrics = Metrics::new();
    let mut comm = vec![0usize; n];
    for _ in 0..slots {
        for (i, s) in users.iter_mut().enumerate() {
            comm[i] = s.random_range(0..l);
        }
        let jammed = if with_jammer {
            let mut sensed = vec![0.0; l];
            for (i, &c) in comm.iter().enumerate() {
                sensed[c] += cfg.p_bar * ch.hj2(i, c);
            }
            js = react(js, &sensed, l, cfg.jammer_random_prob, &mut jam)?;
            js.current_channel
        } else {
            None
        };
        let trp: f64 = (0..n)
            .filter(|&i| {
                Some(comm[i]) != jammed && !(0..n).any(|k| k != i && comm[k] == comm[i])
            })
            .map(|i| cfg.p_bar * ch.hc2(i, comm[i]))
            .sum();
        metrics.push(trp, upsilon, false);
    }
    Ok(metrics)
}

/// Order-independent summary of per-seed values. Merging keeps the sorted
/// multiset, so every statistic is identical whatever the merge order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    values: Vec<f64>,
}

impl Summary {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut values: Vec<f64> = values.into_iter().collect();
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn single(x: f64) -> Self {
        Self { values: vec![x] }
    }

    pub fn merge(&self, other: &Summary) -> Summary {
        let mut out = Vec::with_capacity(self.values.len() + other.values.len());
        let (mut a, mut b) = (0, 0);
        while a < self.values.len() && b < other.values.len() {
            if self.values[a].total_cmp(&other.values[b]).is_le() {
                out.push(self.values[a]);
                a += 1;
            } else {
                out.push(other.values[b]);
                b += 1;
            }
        }
        out.extend_from_slice(&self.values[a..]);
        out.extend_from_slice(&other.values[b..]);
        Summary { values: out }
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn median(&self) -> f64 {
        let n = self.values.len();
        match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => self.values[n / 2],
            _ => 0.5 * (self.values[n / 2 - 1] + self.values[n / 2]),
        }
    }

    /// Standard error of the mean; NaN below two values.
    pub fn std_error(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return f64::NAN;
        }
        let m = self.mean();
        let var = self.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// `key,count,mean,median,se` rows, one per labelled summary.
pub fn aggregate_csv(rows: &[(String, Summary)]) -> String {
    let mut out = String::from("key,count,mean,median,se\n");
    for (key, s) in rows {
        out.push_str(&line([
            key.clone(),
            s.count().to_string(),
            g9(s.mean()),
            g9(s.median()),
            g9(s.std_error()),
        ]));
    }
    out
}
