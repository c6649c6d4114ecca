//! Channel model and the received-power quantities.
//!
//! Gains are stored as amplitudes. Squared gains are exponential with rate
//! `lambda_rate`, optionally scaled by a distance-based path-loss factor that
//! is shared by all channels of one link.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::config::ScenarioConfig;
use crate::csvfmt;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Amplitude gains of every user towards the access point and the jammer,
/// per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    n_users: usize,
    n_channels: usize,
    h_c: Vec<f64>,
    h_j: Vec<f64>,
}

impl ChannelState {
    /// Builds a state from row-major `n_users x n_channels` amplitude tables.
    pub fn new(n_users: usize, n_channels: usize, h_c: Vec<f64>, h_j: Vec<f64>) -> Result<Self> {
        let cells = n_users * n_channels;
        if h_c.len() != cells || h_j.len() != cells {
            return Err(Error::Config(format!(
                "gain tables must hold {cells} entries, got {} and {}",
                h_c.len(),
                h_j.len()
            )));
        }
        if h_c.iter().chain(&h_j).any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::Domain("gains must be finite and nonnegative".into()));
        }
        Ok(Self {
            n_users,
            n_channels,
            h_c,
            h_j,
        })
    }

    /// Same as [`ChannelState::new`] but takes squared (power) gains.
    pub fn from_power_gains(
        n_users: usize,
        n_channels: usize,
        h_c2: &[f64],
        h_j2: &[f64],
    ) -> Result<Self> {
        if h_c2.iter().chain(h_j2).any(|g| *g < 0.0) {
            return Err(Error::Domain("power gains must be nonnegative".into()));
        }
        Self::new(
            n_users,
            n_channels,
            h_c2.iter().map(|g| g.sqrt()).collect(),
            h_j2.iter().map(|g| g.sqrt()).collect(),
        )
    }

    /// Every amplitude equal to `g`.
    pub fn uniform(n_users: usize, n_channels: usize, g: f64) -> Self {
        Self::new(
            n_users,
            n_channels,
            vec![g; n_users * n_channels],
            vec![g; n_users * n_channels],
        )
        .expect("uniform gains are valid")
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    #[inline]
    pub fn hc(&self, user: usize, channel: usize) -> f64 {
        self.h_c[user * self.n_channels + channel]
    }

    #[inline]
    pub fn hj(&self, user: usize, channel: usize) -> f64 {
        self.h_j[user * self.n_channels + channel]
    }

    #[inline]
    pub fn hc2(&self, user: usize, channel: usize) -> f64 {
        let h = self.hc(user, channel);
        h * h
    }

    #[inline]
    pub fn hj2(&self, user: usize, channel: usize) -> f64 {
        let h = self.hj(user, channel);
        h * h
    }

    pub fn set_hc(&mut self, user: usize, channel: usize, amp: f64) {
        self.h_c[user * self.n_channels + channel] = amp;
    }

    pub fn set_hj(&mut self, user: usize, channel: usize, amp: f64) {
        self.h_j[user * self.n_channels + channel] = amp;
    }

    /// Channel with the largest AP power gain for `user`, lowest index on ties.
    pub fn best_ap_channel(&self, user: usize) -> usize {
        argmax((0..self.n_channels).map(|l| self.hc2(user, l)))
    }

    /// Communication channel of each user under the known-AP-gain scenario:
    /// users claim, in index order, their strongest AP channel among those not
    /// yet claimed.
    pub fn claim_best_ap_channels(&self) -> Vec<usize> {
        let mut taken = vec![false; self.n_channels];
        (0..self.n_users)
            .map(|i| {
                let free = (0..self.n_channels).filter(|&l| !taken[l]);
                let pick = free
                    .fold(None::<(usize, f64)>, |best, l| {
                        let g = self.hc2(i, l);
                        match best {
                            Some((_, bg)) if bg >= g => best,
                            _ => Some((l, g)),
                        }
                    })
                    .map(|(l, _)| l)
                    .unwrap_or_else(|| self.best_ap_channel(i));
                taken[pick] = true;
                pick
            })
            .collect()
    }

    /// CSV with columns `user,channel,h_c,h_j` (amplitudes).
    pub fn to_csv(&self) -> String {
        let mut out = csvfmt::line(["user", "channel", "h_c", "h_j"]);
        for i in 0..self.n_users {
            for l in 0..self.n_channels {
                out.push_str(&csvfmt::line([
                    i.to_string(),
                    l.to_string(),
                    csvfmt::g9(self.hc(i, l)),
                    csvfmt::g9(self.hj(i, l)),
                ]));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("user") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::Config(format!("line {}: expected 4 columns", n + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: bad number `{s}`", n + 1)))
            };
            let user = parse(cols[0])? as usize;
            let channel = parse(cols[1])? as usize;
            rows.push((user, channel, parse(cols[2])?, parse(cols[3])?));
        }
        let n_users = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n_channels = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n_users * n_channels {
            return Err(Error::Config("channel table is incomplete".into()));
        }
        let mut h_c = vec![f64::NAN; n_users * n_channels];
        let mut h_j = h_c.clone();
        for (i, l, c, j) in rows {
            h_c[i * n_channels + l] = c;
            h_j[i * n_channels + l] = j;
        }
        Self::new(n_users, n_channels, h_c, h_j)
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Draws one channel realisation. Positions (when path loss is on) are drawn
/// first, then for every user and channel the AP gain followed by the jammer
/// gain.
pub fn draw_channels(cfg: &ScenarioConfig, stream: &mut Stream) -> ChannelState {
    let n = cfg.n_users;
    let l = cfg.n_channels;
    let (scale_c, scale_j) = if cfg.pathloss_enabled {
        path_loss_factors(cfg, stream)
    } else {
        (vec![1.0; n], vec![1.0; n])
    };
    let exp = Exp::new(cfg.lambda_rate).expect("validated rate");
    let mut h_c = Vec::with_capacity(n * l);
    let mut h_j = Vec::with_capacity(n * l);
    for i in 0..n {
        for _ in 0..l {
            let gc: f64 = exp.sample(stream);
            let gj: f64 = exp.sample(stream);
            h_c.push((gc * scale_c[i]).sqrt());
            h_j.push((gj * scale_j[i]).sqrt());
        }
    }
    ChannelState {
        n_users: n,
        n_channels: l,
        h_c,
        h_j,
    }
}

/// Per-user path-loss factors `(kappa / kappa0)^-beta` towards the AP (at the
/// centre of the unit square) and towards a uniformly placed jammer.
/// Distances below `kappa0` are clamped to `kappa0`.
fn path_loss_factors(cfg: &ScenarioConfig, stream: &mut Stream) -> (Vec<f64>, Vec<f64>) {
    let ap = (0.5, 0.5);
    let jammer: (f64, f64) = (stream.random(), stream.random());
    let factor = |a: (f64, f64), b: (f64, f64)| {
        let dist = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        (dist.max(cfg.kappa0) / cfg.kappa0).powf(-cfg.beta)
    };
    let mut to_ap = Vec::with_capacity(cfg.n_users);
    let mut to_jammer = Vec::with_capacity(cfg.n_users);
    for _ in 0..cfg.n_users {
        let pos: (f64, f64) = (stream.random(), stream.random());
        to_ap.push(factor(pos, ap));
        to_jammer.push(factor(pos, jammer));
    }
    (to_ap, to_jammer)
}

/// Victim channel, communication channel per user and the per-user power
/// split between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub victim: usize,
    pub comm: Vec<usize>,
    /// Power `d_i^2` sent on the victim channel.
    pub deceive_power: Vec<f64>,
    /// Power `d'_i^2 = p_bar - d_i^2` sent on the communication channel.
    pub comm_power: Vec<f64>,
}

impl Allocation {
    /// Full-power split: every user spends `p_bar` in total.
    pub fn new(victim: usize, comm: Vec<usize>, deceive_power: Vec<f64>, p_bar: f64) -> Result<Self> {
        if comm.len() != deceive_power.len() {
            return Err(Error::Config("one deception power per user is required".into()));
        }
        if comm.contains(&victim) {
            return Err(Error::Domain(format!(
                "victim channel {victim} cannot also carry communication"
            )));
        }
        if deceive_power.iter().any(|q| !(*q >= 0.0 && *q <= p_bar)) {
            return Err(Error::Domain(format!(
                "deception powers must lie in [0, {p_bar}]"
            )));
        }
        let comm_power = deceive_power.iter().map(|q| p_bar - q).collect();
        Ok(Self {
            victim,
            comm,
            deceive_power,
            comm_power,
        })
    }

    pub fn n_users(&self) -> usize {
        self.comm.len()
    }

    pub fn deceive_amp(&self, user: usize) -> f64 {
        self.deceive_power[user].sqrt()
    }

    pub fn comm_amp(&self, user: usize) -> f64 {
        self.comm_power[user].sqrt()
    }

    /// Checks the channel indices against `n_channels` and the deception cap.
    pub fn check(&self, n_channels: usize, rho: f64) -> Result<()> {
        if self.victim >= n_channels || self.comm.iter().any(|&c| c >= n_channels) {
            return Err(Error::Domain("channel index out of range".into()));
        }
        if let Some(q) = self.deceive_power.iter().find(|q| **q > rho + 1e-12) {
            return Err(Error::Domain(format!("deception power {q} exceeds rho = {rho}")));
        }
        Ok(())
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub jammed_channel: usize,
    /// Per user: the communication channel was neither jammed nor shared.
    pub delivered: Vec<bool>,
    /// Total received power at the AP over delivered channels.
    pub trp_g: f64,
    /// True when the victim channel escaped the jammer (the deception failed).
    pub zeta: bool,
    pub reward: f64,
}

/// Delivery flags: user `i` gets through iff its channel is not jammed and no
/// other user transmits on it.
pub fn delivery_flags(alloc: &Allocation, jammed: usize) -> Vec<bool> {
    alloc
        .comm
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            c != jammed
                && !alloc
                    .comm
                    .iter()
                    .enumerate()
                    .any(|(k, &ck)| k != i && ck == c)
        })
        .collect()
}

/// Total received power at the access point:
/// `sum_i (p_bar - d_i^2) h_c[i][c_i]^2 x_i`.
pub fn trp_at_ap(alloc: &Allocation, ch: &ChannelState, delivered: &[bool]) -> f64 {
    alloc
        .comm
        .iter()
        .enumerate()
        .filter(|(i, _)| delivered[*i])
        .map(|(i, &c)| alloc.comm_power[i] * ch.hc2(i, c))
        .sum()
}

/// Power the jammer senses on every channel.
///
/// The victim channel carries the phase-aligned sum `(sum_i d_i h_j[i][v])^2`.
/// Communication signals add as powers, also when several users share a
/// channel.
pub fn sensed_spectrum(alloc: &Allocation, ch: &ChannelState) -> Vec<f64> {
    let mut sensed = vec![0.0; ch.n_channels()];
    let v = alloc.victim;
    let coherent: f64 = (0..alloc.n_users())
        .map(|i| alloc.deceive_amp(i) * ch.hj(i, v))
        .sum();
    sensed[v] = coherent * coherent;
    for (i, &c) in alloc.comm.iter().enumerate() {
        sensed[c] += alloc.comm_power[i] * ch.hj2(i, c);
    }
    sensed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Lane};
    use proptest::prelude::*;

    #[test]
    fn trp_direct_evaluation() {
        let ch = ChannelState::from_power_gains(2, 3, &[1.0, 1.0, 1.0, 0.5, 0.5, 0.5], &[1.0; 6])
            .unwrap();
        let alloc = Allocation::new(2, vec![0, 1], vec![2.0, 4.0], 10.0).unwrap();
        assert_eq!(trp_at_ap(&alloc, &ch, &[true, true]), 11.0);
        assert_eq!(trp_at_ap(&alloc, &ch, &[false, false]), 0.0);
        let full = Allocation::new(2, vec![0, 1], vec![10.0, 4.0], 10.0).unwrap();
        assert_eq!(trp_at_ap(&full, &ch, &[true, false]), 0.0);
    }

    #[test]
    fn sensed_power_direct_evaluation() {
        // d = [1, 2], h_j at the victim = [0.5, 0.25]: (0.5 + 0.5)^2 = 1.
        let mut ch = ChannelState::uniform(2, 3, 1.0);
        ch.set_hj(0, 2, 0.5);
        ch.set_hj(1, 2, 0.25);
        let alloc = Allocation::new(2, vec![0, 1], vec![1.0, 4.0], 10.0).unwrap();
        let s = sensed_spectrum(&alloc, &ch);
        assert!((s[2] - 1.0).abs() < 1e-15);

        // Single user, d'^2 = 4, h'_j = 0.5: comm power 1.
        let mut ch = ChannelState::uniform(1, 2, 1.0);
        ch.set_hj(0, 0, 0.5);
        let alloc = Allocation::new(1, vec![0], vec![6.0], 10.0).unwrap();
        assert!((sensed_spectrum(&alloc, &ch)[0] - 1.0).abs() < 1e-15);

        let alloc = Allocation::new(1, vec![0], vec![0.0], 10.0).unwrap();
        assert_eq!(sensed_spectrum(&alloc, &ch)[1], 0.0);
    }

    #[test]
    fn shared_channels_block_delivery() {
        let alloc = Allocation::new(0, vec![1, 1, 2], vec![0.0; 3], 10.0).unwrap();
        assert_eq!(delivery_flags(&alloc, 0), vec![false, false, true]);
        assert_eq!(delivery_flags(&alloc, 2), vec![false, false, false]);
    }

    #[test]
    fn allocation_invariants() {
        assert!(Allocation::new(1, vec![1], vec![1.0], 10.0).is_err());
        assert!(Allocation::new(0, vec![1], vec![11.0], 10.0).is_err());
        let a = Allocation::new(0, vec![1], vec![6.0], 10.0).unwrap();
        assert!(a.check(2, 5.0).is_err());
        assert!(a.check(1, 10.0).is_err());
    }

    #[test]
    fn draws_are_deterministic() {
        let cfg = ScenarioConfig::default().with_users(3).with_channels(5);
        let a = draw_channels(&cfg, &mut stream(11, 0, Lane::Channels));
        let b = draw_channels(&cfg, &mut stream(11, 0, Lane::Channels));
        assert_eq!(a, b);
        let mut pl = cfg.clone();
        pl.pathloss_enabled = true;
        let c = draw_channels(&pl, &mut stream(11, 0, Lane::Channels));
        let d = draw_channels(&pl, &mut stream(11, 0, Lane::Channels));
        assert_eq!(c, d);
    }

    #[test]
    fn path_loss_is_shared_across_channels_of_a_link() {
        let mut cfg = ScenarioConfig::default().with_users(2).with_channels(4);
        cfg.pathloss_enabled = true;
        let mut means = [0.0; 2];
        let runs = 2000;
        // Same seed/run: positions are identical, only fading differs by lane.
        for r in 0..runs {
            let mut s = stream(5, 0, Lane::Channels);
            let _ = r;
            let ch = draw_channels(&cfg, &mut s);
            for (i, m) in means.iter_mut().enumerate() {
                *m += (0..4).map(|l| ch.hc2(i, l)).sum::<f64>();
            }
        }
        assert!(means.iter().all(|m| m.is_finite() && *m > 0.0));
    }

    fn sample_mean_h2(lambda: f64, draws: usize) -> (f64, f64) {
        let mut cfg = ScenarioConfig::default().with_users(1).with_channels(2);
        cfg.lambda_rate = lambda;
        let mut s = stream(2024, 0, Lane::Channels);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut count = 0.0;
        while count < draws as f64 {
            let ch = draw_channels(&cfg, &mut s);
            for l in 0..2 {
                for g in [ch.hc2(0, l), ch.hj2(0, l)] {
                    sum += g;
                    sum2 += g * g;
                    count += 1.0;
                }
            }
        }
        let mean = sum / count;
        let sd = (sum2 / count - mean * mean).sqrt();
        (mean, sd / count.sqrt())
    }

    #[test]
    fn unit_mean_power_gains() {
        let (mean, se) = sample_mean_h2(1.0, 100_000);
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn rate_two_halves_the_mean() {
        let (mean, se) = sample_mean_h2(2.0, 100_000);
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn csv_round_trip_keeps_nine_digits() {
        let cfg = ScenarioConfig::default().with_users(2).with_channels(3);
        let ch = draw_channels(&cfg, &mut stream(1, 0, Lane::Channels));
        let back = ChannelState::from_csv(&ch.to_csv()).unwrap();
        for i in 0..2 {
            for l in 0..3 {
                assert!((back.hc(i, l) - ch.hc(i, l)).abs() <= 1e-8 * ch.hc(i, l).max(1.0));
            }
        }
    }

    #[test]
    fn claiming_gives_distinct_channels() {
        let ch = ChannelState::from_power_gains(2, 3, &[3.0, 1.0, 0.5, 2.0, 0.1, 0.2], &[1.0; 6])
            .unwrap();
        assert_eq!(ch.claim_best_ap_channels(), vec![0, 2]);
    }

    proptest! {
        #[test]
        fn full_power_split(qs in proptest::collection::vec(0.0f64..=10.0, 1..5)) {
            let n = qs.len();
            let alloc = Allocation::new(n, (0..n).collect(), qs, 10.0).unwrap();
            for i in 0..n {
                let total = alloc.deceive_amp(i).powi(2) + alloc.comm_amp(i).powi(2);
                prop_assert!((total - 10.0).abs() <= 1e-12 * 10.0);
            }
        }

        #[test]
        fn coherent_victim_dominates_incoherent(
            d in proptest::collection::vec(0.0f64..3.0, 1..6),
            h in proptest::collection::vec(0.0f64..3.0, 6),
        ) {
            let coherent: f64 = d.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>().powi(2);
            let incoherent: f64 = d.iter().zip(&h).map(|(a, b)| (a * b).powi(2)).sum();
            prop_assert!(coherent >= incoherent * (1.0 - 1e-12));
        }

        #[test]
        fn trp_nonincreasing_in_deception(q in 0.0f64..9.0, dq in 0.0f64..1.0, g in 0.0f64..5.0) {
            let ch = ChannelState::from_power_gains(1, 2, &[g, g], &[1.0, 1.0]).unwrap();
            let lo = Allocation::new(1, vec![0], vec![q], 10.0).unwrap();
            let hi = Allocation::new(1, vec![0], vec![q + dq], 10.0).unwrap();
            prop_assert!(trp_at_ap(&hi, &ch, &[true]) <= trp_at_ap(&lo, &ch, &[true]));
        }
    }
}
