//! Full-knowledge power allocation.
//!
//! Three solvers share this module:
//!
//! - [`solve_full`]: the exact convex program with coherent victim power.
//! - [`solve_modified`] / [`solve_modified_lp`]: the linear relaxation that
//!   drops the cross terms of the coherent sum, solved either as an equality
//!   system or as a small linear program.
//! - [`brute_force`]: grid search over everything, the validation oracle.
//!
//! Deception must be strict: the victim channel has to beat every other
//! channel at the jammer by [`DECEPTION_SLACK`].

use nalgebra::{DMatrix, DVector};

use crate::config::ScenarioConfig;
use crate::csvfmt;
use crate::error::{Error, Result};
use crate::jammer::loudest;
use crate::model::{argmax, delivery_flags, sensed_spectrum, trp_at_ap, Allocation, ChannelState};

/// Margin, in power units, by which the victim channel must dominate.
pub const DECEPTION_SLACK: f64 = 1e-11;
/// Violation of a deception constraint, in power units, still accepted when
/// the cap `rho` is hit; the jammer's own reaction is the final arbiter.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveConstraint {
    Interior,
    Zero,
    Cap,
    /// The user's own channel is sensed exactly as loud as the victim.
    DeceptionEquality,
}

impl ActiveConstraint {
    pub fn tag(self) -> &'static str {
        match self {
            ActiveConstraint::Interior => "interior",
            ActiveConstraint::Zero => "zero",
            ActiveConstraint::Cap => "cap",
            ActiveConstraint::DeceptionEquality => "deception_eq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Exact inner solve per victim amplitude plus a one-dimensional search.
    Parametric,
    ModifiedLp,
    BruteForce { step: f64 },
}

impl Method {
    pub fn tag(self) -> String {
        match self {
            Method::Parametric => "parametric".into(),
            Method::ModifiedLp => "modified_lp".into(),
            Method::BruteForce { step } => format!("brute_force_{}", csvfmt::g9(step)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub allocation: Allocation,
    /// Negative total received power at the AP.
    pub objective: f64,
    pub active_constraints: Vec<ActiveConstraint>,
    pub feasible: bool,
    pub method: Method,
}

impl OptimizationResult {
    pub fn trp(&self) -> f64 {
        -self.objective
    }

    /// Columns `user,victim,comm,d2,d2_comm,objective,method,active,feasible`.
    pub fn to_csv(&self) -> String {
        let mut out = csvfmt::line([
            "user", "victim", "comm", "d2", "d2_comm", "objective", "method", "active", "feasible",
        ]);
        let a = &self.allocation;
        for i in 0..a.n_users() {
            out.push_str(&csvfmt::line([
                i.to_string(),
                a.victim.to_string(),
                a.comm[i].to_string(),
                csvfmt::g9(a.deceive_power[i]),
                csvfmt::g9(a.comm_power[i]),
                csvfmt::g9(self.objective),
                self.method.tag(),
                self.active_constraints[i].tag().to_string(),
                u8::from(self.feasible).to_string(),
            ]));
        }
        out
    }
}

/// Replays an allocation against the deterministic jammer and returns the
/// received power, or `None` when the victim channel is not the one jammed.
pub fn deceiving_trp(alloc: &Allocation, ch: &ChannelState) -> Option<f64> {
    let jammed = loudest(&sensed_spectrum(alloc, ch));
    (jammed == alloc.victim).then(|| trp_at_ap(alloc, ch, &delivery_flags(alloc, jammed)))
}

/// All `(victim, comm)` assignments with `comm[i] != victim`, optionally
/// restricted to pairwise distinct communication channels.
pub fn assignments(n_users: usize, n_channels: usize, distinct: bool) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for v in 0..n_channels {
        let choices: Vec<usize> = (0..n_channels).filter(|&l| l != v).collect();
        let mut idx = vec![0usize; n_users];
        loop {
            let comm: Vec<usize> = idx.iter().map(|&k| choices[k]).collect();
            let ok = !distinct
                || comm
                    .iter()
                    .enumerate()
                    .all(|(i, c)| !comm[..i].contains(c));
            if ok {
                out.push((v, comm));
            }
            let mut pos = 0;
            loop {
                if pos == n_users {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < choices.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == n_users {
                break;
            }
        }
    }
    out
}

fn shared_flags(comm: &[usize]) -> Vec<bool> {
    comm.iter()
        .enumerate()
        .map(|(i, c)| comm.iter().enumerate().any(|(k, ck)| k != i && ck == c))
        .collect()
}

/// Largest TRP any allocation could reach under `comm`.
fn trp_upper_bound(ch: &ChannelState, comm: &[usize], p_bar: f64) -> f64 {
    let shared = shared_flags(comm);
    comm.iter()
        .enumerate()
        .filter(|(i, _)| !shared[*i])
        .map(|(i, &c)| p_bar * ch.hc2(i, c))
        .sum()
}

/// The continuous problem once the channels are fixed.
///
/// Writing `u` for the coherent victim amplitude `sum_i a_i sqrt(q_i)`, the
/// deception constraints become per-user lower bounds
/// `q_i >= p_bar - (u^2 - slack) / b_i^2`, and what remains is a separable
/// quadratic program in `sqrt(q_i)` with a single linear constraint. That
/// inner problem is solved exactly; `u` is searched numerically.
struct FixedAssignment {
    a: Vec<f64>,
    b2: Vec<f64>,
    cost: Vec<f64>,
    shared: Vec<bool>,
    shared_floor: f64,
    p_bar: f64,
    rho: f64,
}

impl FixedAssignment {
    fn new(ch: &ChannelState, cfg: &ScenarioConfig, v: usize, comm: &[usize]) -> Self {
        let n = comm.len();
        let shared = shared_flags(comm);
        let a = (0..n).map(|i| ch.hj(i, v)).collect();
        let b2: Vec<f64> = (0..n).map(|i| ch.hj2(i, comm[i])).collect();
        let cost = (0..n)
            .map(|i| if shared[i] { 0.0 } else { ch.hc2(i, comm[i]) })
            .collect();
        let mut shared_floor: f64 = 0.0;
        for l in 0..ch.n_channels() {
            let users: Vec<usize> = (0..n).filter(|&i| shared[i] && comm[i] == l).collect();
            if !users.is_empty() {
                let p: f64 = users.iter().map(|&i| (cfg.p_bar - cfg.rho) * b2[i]).sum();
                shared_floor = shared_floor.max(p);
            }
        }
        Self {
            a,
            b2,
            cost,
            shared,
            shared_floor,
            p_bar: cfg.p_bar,
            rho: cfg.rho,
        }
    }

    fn lower_bound(&self, i: usize, u: f64) -> f64 {
        if self.shared[i] {
            self.rho
        } else if self.b2[i] > 0.0 {
            (self.p_bar - (u * u - DECEPTION_SLACK) / self.b2[i]).max(0.0)
        } else {
            0.0
        }
    }

    /// Cheapest deception powers reaching victim amplitude `u`.
    fn inner(&self, u: f64) -> Option<(f64, Vec<f64>)> {
        let n = self.a.len();
        let cap = self.rho.sqrt();
        let mut low = Vec::with_capacity(n);
        for i in 0..n {
            let lo = self.lower_bound(i, u);
            if lo > self.rho && (lo - self.rho) * self.b2[i] > FEASIBILITY_TOL {
                return None;
            }
            low.push(lo.min(self.rho).sqrt());
        }
        let mut s = low.clone();
        let dot = |s: &[f64]| s.iter().zip(&self.a).map(|(x, a)| x * a).sum::<f64>();
        if dot(&s) < u {
            for i in 0..n {
                if self.cost[i] == 0.0 && self.a[i] > 0.0 {
                    s[i] = cap;
                }
            }
            let reach = dot(&s);
            if reach < u {
                let movable: Vec<usize> = (0..n)
                    .filter(|&i| self.cost[i] > 0.0 && self.a[i] > 0.0 && low[i] < cap)
                    .collect();
                let slope: Vec<f64> = movable
                    .iter()
                    .map(|&i| self.a[i] / (2.0 * self.cost[i]))
                    .collect();
                let at = |mu: f64, s: &mut [f64]| {
                    for (k, &i) in movable.iter().enumerate() {
                        s[i] = (mu * slope[k]).clamp(low[i], cap);
                    }
                };
                let mut breaks: Vec<f64> = movable
                    .iter()
                    .enumerate()
                    .flat_map(|(k, &i)| [low[i] / slope[k], cap / slope[k]])
                    .collect();
                breaks.sort_by(f64::total_cmp);
                let (mut prev_mu, mut prev_f) = (0.0, reach);
                let mut found = None;
                for &mu in &breaks {
                    at(mu, &mut s);
                    let f = dot(&s);
                    if f >= u {
                        let t = if f > prev_f { (u - prev_f) / (f - prev_f) } else { 1.0 };
                        found = Some(prev_mu + t * (mu - prev_mu));
                        break;
                    }
                    prev_mu = mu;
                    prev_f = f;
                }
                at(found?, &mut s);
            }
        }
        let q: Vec<f64> = s.iter().map(|x| (x * x).min(self.rho)).collect();
        let j = q.iter().zip(&self.cost).map(|(q, c)| q * c).sum();
        Some((j, q))
    }

    fn amplitude_range(&self) -> Option<(f64, f64)> {
        let mut need = self.shared_floor;
        for i in 0..self.a.len() {
            if !self.shared[i] {
                need = need.max((self.p_bar - self.rho) * self.b2[i]);
            }
        }
        let hi: f64 = self.a.iter().map(|a| a * self.rho.sqrt()).sum();
        // One slack of headroom keeps every lower bound at or below rho, so the
        // clamp in `inner` never undoes the deception at the bottom of the range.
        let strict = (need + 2.0 * DECEPTION_SLACK).sqrt();
        if strict <= hi {
            return Some((strict, hi));
        }
        // Only exact ties are left; the jammer's tie-break decides them on replay.
        let lo = (need + DECEPTION_SLACK - FEASIBILITY_TOL).max(0.0).sqrt();
        (lo <= hi).then_some((lo, hi))
    }

    fn solve(&self) -> Option<(f64, Vec<f64>)> {
        let (lo, hi) = self.amplitude_range()?;
        let eval = |u: f64| self.inner(u).map_or(f64::INFINITY, |(j, _)| j);
        const GRID: usize = 64;
        let us: Vec<f64> = (0..=GRID)
            .map(|k| lo + (hi - lo) * k as f64 / GRID as f64)
            .collect();
        let js: Vec<f64> = us.iter().map(|&u| eval(u)).collect();
        let k = js
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .map(|(k, _)| k)?;
        let (mut best_u, mut best_j) = (us[k], js[k]);
        let (mut a, mut b) = (us[k.saturating_sub(1)], us[(k + 1).min(GRID)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let (mut f1, mut f2) = (eval(x1), eval(x2));
        for _ in 0..200 {
            if b - a <= 1e-15 * hi.max(1e-300) {
                break;
            }
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = eval(x2);
            }
        }
        for (u, j) in [(x1, f1), (x2, f2)] {
            if j < best_j {
                best_u = u;
                best_j = j;
            }
        }
        if !best_j.is_finite() {
            return None;
        }
        self.inner(best_u).map(|(_, q)| (best_u, q))
    }
}

fn active_tags(q: &[f64], rho: f64, fixed: Option<&FixedAssignment>, u: f64) -> Vec<ActiveConstraint> {
    q.iter()
        .enumerate()
        .map(|(i, &qi)| {
            if qi <= 1e-12 {
                ActiveConstraint::Zero
            } else if qi >= rho - 1e-9 {
                ActiveConstraint::Cap
            } else if fixed.is_some_and(|f| {
                let lo = f.lower_bound(i, u);
                lo > 0.0 && (qi - lo).abs() <= 1e-9
            }) {
                ActiveConstraint::DeceptionEquality
            } else {
                ActiveConstraint::Interior
            }
        })
        .collect()
}

/// Solves the full problem for a fixed channel assignment.
pub fn solve_full_assigned(
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    victim: usize,
    comm: &[usize],
) -> Result<Option<OptimizationResult>> {
    let fixed = FixedAssignment::new(ch, cfg, victim, comm);
    let Some((u, q)) = fixed.solve() else {
        return Ok(None);
    };
    let alloc = Allocation::new(victim, comm.to_vec(), q.clone(), cfg.p_bar)?;
    let Some(g) = deceiving_trp(&alloc, ch) else {
        return Ok(None);
    };
    Ok(Some(OptimizationResult {
        active_constraints: active_tags(&q, cfg.rho, Some(&fixed), u),
        allocation: alloc,
        objective: -g,
        feasible: true,
        method: Method::Parametric,
    }))
}

/// Best allocation over every channel assignment.
///
/// Duplicate communication channels are skipped when `N < L - 1`. When no
/// assignment can deceive the jammer within `rho`, the result is marked
/// infeasible and carries the loudest possible victim: everyone at `rho` on
/// the channel with the largest summed jammer amplitude.
pub fn solve_full(ch: &ChannelState, cfg: &ScenarioConfig) -> Result<OptimizationResult> {
    let n = ch.n_users();
    let l = ch.n_channels();
    if n != cfg.n_users || l != cfg.n_channels {
        return Err(Error::Config("channel state does not match the configuration".into()));
    }
    let distinct = n + 1 < l;
    let mut cands: Vec<(f64, usize, Vec<usize>)> = assignments(n, l, distinct)
        .into_iter()
        .map(|(v, c)| (trp_upper_bound(ch, &c, cfg.p_bar), v, c))
        .collect();
    cands.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut best: Option<OptimizationResult> = None;
    for (bound, v, comm) in cands {
        if best.as_ref().is_some_and(|b| bound <= b.trp()) {
            break;
        }
        if let Some(r) = solve_full_assigned(ch, cfg, v, &comm)? {
            if best.as_ref().is_none_or(|b| r.trp() > b.trp()) {
                best = Some(r);
            }
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    let victim = argmax((0..l).map(|c| (0..n).map(|i| ch.hj(i, c)).sum::<f64>()));
    let comm = claim_excluding(ch, victim, |i, c| ch.hc2(i, c));
    let alloc = Allocation::new(victim, comm, vec![cfg.rho; n], cfg.p_bar)?;
    let sensed = sensed_spectrum(&alloc, ch);
    let g = trp_at_ap(&alloc, ch, &delivery_flags(&alloc, loudest(&sensed)));
    Ok(OptimizationResult {
        active_constraints: vec![ActiveConstraint::Cap; n],
        allocation: alloc,
        objective: -g,
        feasible: false,
        method: Method::Parametric,
    })
}

/// Users claim, in index order, the unclaimed non-victim channel with the
/// highest `score`.
pub fn claim_excluding(ch: &ChannelState, victim: usize, score: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut taken = vec![false; ch.n_channels()];
    taken[victim] = true;
    (0..ch.n_users())
        .map(|i| {
            let mut pick = None::<(usize, f64)>;
            for c in (0..ch.n_channels()).filter(|&c| !taken[c]) {
                let s = score(i, c);
                if pick.is_none_or(|(_, b)| s > b) {
                    pick = Some((c, s));
                }
            }
            let c = pick.map_or((victim + 1) % ch.n_channels(), |p| p.0);
            taken[c] = true;
            c
        })
        .collect()
}

/// Equality solution of the modified problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedSolution {
    /// Unclamped solution of `M p = p_bar h'^2`.
    pub raw: Vec<f64>,
    /// Powers after the boundary handling (clamp to `[0, rho]`, re-solve).
    pub p: Vec<f64>,
    /// Some raw power exceeded `rho`.
    pub exceeds_rho: bool,
    pub clamped: Vec<bool>,
}

fn modified_terms(ch: &ChannelState, victim: usize, comm: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let s: Vec<f64> = (0..comm.len()).map(|i| ch.hj2(i, victim)).collect();
    let h: Vec<f64> = comm.iter().enumerate().map(|(i, &c)| ch.hj2(i, c)).collect();
    if h.iter().any(|x| *x == 0.0) {
        return Err(Error::Degenerate(
            "a communication-channel jammer gain is zero; the system matrix is singular".into(),
        ));
    }
    Ok((s, h))
}

/// Solves the reduced system in which users in `fixed` hold their value.
fn solve_rows(s: &[f64], h: &[f64], p_bar: f64, fixed: &[Option<f64>]) -> Result<Vec<f64>> {
    let free: Vec<usize> = (0..s.len()).filter(|&i| fixed[i].is_none()).collect();
    let m = free.len();
    let mut p: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    if m == 0 {
        return Ok(p);
    }
    let offset: f64 = fixed
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.map(|v| s[i] * v))
        .sum();
    let mat = DMatrix::from_fn(m, m, |r, c| {
        let (k, i) = (free[r], free[c]);
        s[i] + if k == i { h[k] } else { 0.0 }
    });
    let rhs = DVector::from_fn(m, |r, _| p_bar * h[free[r]] - offset);
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("modified system is singular".into()))?;
    for (r, &i) in free.iter().enumerate() {
        p[i] = sol[r];
    }
    Ok(p)
}

/// Solves `M p = p_bar h'^2`, `M[k][i] = h_j[i][v]^2 + [k = i] h_j[k][c_k]^2`.
///
/// Users whose power leaves `[0, rho]` are pinned to the violated bound and
/// the remaining system is solved again until every power is in range.
pub fn solve_modified(
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    victim: usize,
    comm: &[usize],
) -> Result<ModifiedSolution> {
    let (s, h) = modified_terms(ch, victim, comm)?;
    let n = comm.len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let raw = solve_rows(&s, &h, cfg.p_bar, &fixed)?;
    let exceeds_rho = raw.iter().any(|p| *p > cfg.rho);
    let mut p = raw.clone();
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            if fixed[i].is_none() {
                if p[i] > cfg.rho {
                    fixed[i] = Some(cfg.rho);
                    changed = true;
                } else if p[i] < 0.0 {
                    fixed[i] = Some(0.0);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        p = solve_rows(&s, &h, cfg.p_bar, &fixed)?;
    }
    Ok(ModifiedSolution {
        raw,
        p,
        exceeds_rho,
        clamped: fixed.iter().map(Option::is_some).collect(),
    })
}

/// Closed form `p_k = p_bar - p_bar (S / h'_k^2) / (1 + sum_i s_i / h'_i^2)`
/// with `S = sum_i s_i`.
pub fn sherman_morrison(ch: &ChannelState, cfg: &ScenarioConfig, victim: usize, comm: &[usize]) -> Result<Vec<f64>> {
    let (s, h) = modified_terms(ch, victim, comm)?;
    let total: f64 = s.iter().sum();
    let denom = 1.0 + s.iter().zip(&h).map(|(a, b)| a / b).sum::<f64>();
    Ok(h.iter()
        .map(|hk| cfg.p_bar - cfg.p_bar * (total / hk) / denom)
        .collect())
}

/// Largest deviation between the closed form and the linear solve.
pub fn sherman_morrison_check(
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    victim: usize,
    comm: &[usize],
) -> Result<f64> {
    let closed = sherman_morrison(ch, cfg, victim, comm)?;
    let solved = solve_modified(ch, cfg, victim, comm)?.raw;
    Ok(closed
        .iter()
        .zip(&solved)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Cheapest powers satisfying the modified constraints as inequalities,
/// `M p >= p_bar h'^2 + slack`, `0 <= p <= rho`, minimising the AP power
/// given up. Returns `None` when the box and the constraints do not meet.
///
/// The polytope is tiny, so every vertex is enumerated.
pub fn solve_modified_lp(
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    victim: usize,
    comm: &[usize],
) -> Option<Vec<f64>> {
    let n = comm.len();
    let s: Vec<f64> = (0..n).map(|i| ch.hj2(i, victim)).collect();
    let h: Vec<f64> = comm.iter().enumerate().map(|(i, &c)| ch.hj2(i, c)).collect();
    let cost: Vec<f64> = comm.iter().enumerate().map(|(i, &c)| ch.hc2(i, c)).collect();
    let rhs: Vec<f64> = h.iter().map(|hk| cfg.p_bar * hk + DECEPTION_SLACK).collect();
    let row = |k: usize, p: &[f64]| -> f64 {
        p.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() + h[k] * p[k]
    };
    let feasible = |p: &[f64]| {
        p.iter().all(|x| *x >= -1e-12 && *x <= cfg.rho + 1e-12)
            && (0..n).all(|k| row(k, p) >= rhs[k] - 1e-12 * rhs[k].max(1.0))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |p: Vec<f64>| {
        if feasible(&p) {
            let p: Vec<f64> = p.into_iter().map(|x| x.clamp(0.0, cfg.rho)).collect();
            let j: f64 = p.iter().zip(&cost).map(|(a, b)| a * b).sum();
            if best.as_ref().is_none_or(|b| j < b.0) {
                best = Some((j, p));
            }
        }
    };
    // Status per user: 0 -> at zero, 1 -> at rho, 2 -> free.
    let mut status = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == 2).collect();
        let base: Vec<f64> = status
            .iter()
            .map(|&st| if st == 1 { cfg.rho } else { 0.0 })
            .collect();
        let m = free.len();
        if m == 0 {
            consider(base);
        } else {
            for rows in subsets(n, m) {
                let mat = DMatrix::from_fn(m, m, |r, c| {
                    let (k, i) = (rows[r], free[c]);
                    s[i] + if k == i { h[k] } else { 0.0 }
                });
                let b = DVector::from_fn(m, |r, _| {
                    let k = rows[r];
                    let fixed: f64 = (0..n)
                        .filter(|i| status[*i] != 2)
                        .map(|i| s[i] * base[i] + if i == k { h[k] * base[i] } else { 0.0 })
                        .sum();
                    rhs[k] - fixed
                });
                if let Some(x) = mat.lu().solve(&b) {
                    let mut p = base.clone();
                    for (c, &i) in free.iter().enumerate() {
                        p[i] = x[c];
                    }
                    consider(p);
                }
            }
        }
        let mut pos = 0;
        while pos < n {
            status[pos] += 1;
            if status[pos] < 3 {
                break;
            }
            status[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    best.map(|b| b.1)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

/// Rule picking the communication channels around a victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelRule {
    /// Weakest channel towards the jammer.
    MinJammerGain,
    /// Strongest channel towards the AP.
    MaxApGain,
}

/// Modified-problem allocation: for each victim the rule picks the
/// communication channels, the linear program picks the powers, and the
/// victim whose replay delivers the most power wins. Returns the allocation
/// and its received power, or `None` when no victim works.
pub fn best_modified_allocation(
    ch: &ChannelState,
    cfg: &ScenarioConfig,
    rule: ChannelRule,
) -> Option<(Allocation, f64)> {
    let mut best: Option<(Allocation, f64)> = None;
    for v in 0..ch.n_channels() {
        let comm = match rule {
            ChannelRule::MinJammerGain => claim_excluding(ch, v, |i, c| -ch.hj2(i, c)),
            ChannelRule::MaxApGain => claim_excluding(ch, v, |i, c| ch.hc2(i, c)),
        };
        let Some(p) = solve_modified_lp(ch, cfg, v, &comm) else {
            continue;
        };
        let Ok(alloc) = Allocation::new(v, comm, p, cfg.p_bar) else {
            continue;
        };
        if let Some(g) = deceiving_trp(&alloc, ch) {
            if best.as_ref().is_none_or(|b| g > b.1) {
                best = Some((alloc, g));
            }
        }
    }
    best
}

/// Same sensing and jamming as [`sensed_spectrum`] followed by the
/// deterministic jammer, without allocating.
struct FastCheck<'a> {
    ch: &'a ChannelState,
    victim: usize,
    comm: &'a [usize],
    p_bar: f64,
    buf: Vec<f64>,
}

impl FastCheck<'_> {
    fn deceives(&mut self, q: &[f64]) -> bool {
        self.buf.iter_mut().for_each(|x| *x = 0.0);
        let amp: f64 = q
            .iter()
            .enumerate()
            .map(|(i, qi)| qi.sqrt() * self.ch.hj(i, self.victim))
            .sum();
        self.buf[self.victim] = amp * amp;
        for (i, &c) in self.comm.iter().enumerate() {
            self.buf[c] += (self.p_bar - q[i]) * self.ch.hj2(i, c);
        }
        loudest(&self.buf) == self.victim
    }
}

/// Exhaustive search over assignments (duplicates allowed) and deception
/// powers on `{0, step, 2 step, ...} <= rho`. Feasibility is whatever the
/// deterministic jammer does with the sensed spectrum.
///
/// Raising one user's power only helps deception and only lowers the TRP,
/// so for every setting of the other users the last user takes the smallest
/// feasible level; that level is tracked with a moving pointer.
pub fn brute_force(ch: &ChannelState, cfg: &ScenarioConfig, step: f64) -> Result<OptimizationResult> {
    if !(step > 0.0) {
        return Err(Error::Config("grid step must be positive".into()));
    }
    let n = ch.n_users();
    let l = ch.n_channels();
    let levels: Vec<f64> = (0..)
        .map(|k| k as f64 * step)
        .take_while(|q| *q <= cfg.rho + 1e-12)
        .map(|q| q.min(cfg.rho))
        .collect();
    let mut cands: Vec<(f64, usize, Vec<usize>)> = assignments(n, l, false)
        .into_iter()
        .map(|(v, c)| (trp_upper_bound(ch, &c, cfg.p_bar), v, c))
        .collect();
    cands.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut best: Option<(f64, usize, Vec<usize>, Vec<f64>)> = None;
    for (bound, v, comm) in &cands {
        let best_g = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
        if *bound <= best_g {
            break;
        }
        let shared = shared_flags(comm);
        let cost: Vec<f64> = (0..n)
            .map(|i| if shared[i] { 0.0 } else { ch.hc2(i, comm[i]) })
            .collect();
        let mut check = FastCheck {
            ch,
            victim: *v,
            comm,
            p_bar: cfg.p_bar,
            buf: vec![0.0; l],
        };
        let mut idx = vec![0usize; n];
        let mut q = vec![0.0; n];
        // Odometer over users 0..n-1 (all but the last), pointer for the last.
        loop {
            for i in 0..n - 1 {
                q[i] = levels[idx[i]];
            }
            let head_bound: f64 = (0..n - 1).map(|i| (cfg.p_bar - q[i]) * cost[i]).sum::<f64>()
                + cfg.p_bar * cost[n - 1];
            let current = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
            if head_bound > current {
                // Smallest feasible level of the last user by bisection.
                let last = n - 1;
                q[last] = levels[levels.len() - 1];
                if check.deceives(&q) {
                    let (mut lo, mut hi) = (0usize, levels.len() - 1);
                    q[last] = levels[0];
                    if check.deceives(&q) {
                        hi = 0;
                    } else {
                        while hi - lo > 1 {
                            let mid = (lo + hi) / 2;
                            q[last] = levels[mid];
                            if check.deceives(&q) {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                    }
                    q[last] = levels[hi];
                    let g: f64 = (0..n).map(|i| (cfg.p_bar - q[i]) * cost[i]).sum();
                    if g > current {
                        best = Some((g, *v, comm.clone(), q.clone()));
                    }
                }
            }
            // Advance; skip the rest of a coordinate once its bound fails.
            let mut pos = 0;
            while pos + 1 < n {
                idx[pos] += 1;
                if idx[pos] < levels.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos + 1 >= n {
                break;
            }
        }
    }
    match best {
        Some((g, v, comm, q)) => {
            let alloc = Allocation::new(v, comm, q.clone(), cfg.p_bar)?;
            Ok(OptimizationResult {
                active_constraints: active_tags(&q, cfg.rho, None, 0.0),
                allocation: alloc,
                objective: -g,
                feasible: true,
                method: Method::BruteForce { step },
            })
        }
        None => {
            let mut r = solve_full(ch, cfg)?;
            r.feasible = false;
            r.method = Method::BruteForce { step };
            Ok(r)
        }
    }
}
