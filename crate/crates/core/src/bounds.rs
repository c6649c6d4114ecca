//! Analytic expectations of the deception power and of the received power.
//!
//! Two ways of choosing communication channels are covered:
//!
//! - APP1: each user talks on its weakest channel towards the jammer.
//! - APP2: each user talks on its strongest channel towards the AP.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::csvfmt;
use crate::error::{Error, Result};
use crate::rng::{stream, Lane};

/// Largest `L1` for which the alternating sums are evaluated exactly.
pub const V_EXACT_CAP: usize = 14;
/// Samples of the Monte Carlo estimate of `V` above the cap.
pub const V_MC_SAMPLES: usize = 1_000_000;

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Expected maximum, over `l` channels, of the sum of `n` exponential power
/// gains with rate `lam`.
///
/// Integrates `1 - F(z)^l` where `F` is the Erlang(n, lam) distribution
/// function, up to the point where the tail mass drops below 1e-10.
pub fn gamma(n: usize, l: usize, lam: f64) -> Result<f64> {
    if n == 0 || l == 0 || !(lam > 0.0) {
        return Err(Error::Domain(format!("gamma needs n, l >= 1 and lam > 0 (n={n}, l={l}, lam={lam})")));
    }
    let shape = n as f64;
    let lf = l as f64;
    let mut upper = shape.max(1.0);
    while lf * gamma_ur(shape, upper) > 1e-10 {
        upper *= 2.0;
    }
    let integrand = |x: f64| 1.0 - gamma_lr(shape, x).powf(lf);
    let out = quadrature::double_exponential::integrate(integrand, 0.0, upper, 1e-12);
    let rel = out.error_estimate / out.integral.abs().max(f64::MIN_POSITIVE);
    if !out.integral.is_finite() || rel > 1e-6 {
        return Err(Error::Numerical(format!(
            "quadrature for gamma(n={n}, l={l}) did not converge: integral {}, error estimate {}, {} evaluations",
            out.integral, out.error_estimate, out.num_function_evaluations
        )));
    }
    Ok(out.integral / lam)
}

/// Value of the normalised per-user maximum AP gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VFactor {
    pub value: f64,
    /// Standard error when the value is a Monte Carlo estimate.
    pub std_error: Option<f64>,
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// Expected maximum of `k` unit exponentials as the alternating sum
/// `sum_j (-1)^(j+1) C(k, j) / j`, in exact arithmetic.
fn expected_max_exact(k: usize) -> BigRational {
    let mut acc = BigRational::zero();
    for j in 1..=k {
        let term = BigRational::new(binomial(k, j), BigInt::from(j));
        if j % 2 == 1 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// `V(l1, n)`: users claim channels one after the other, each taking the best
/// of the channels still free, and the factor is the mean over users of the
/// expected claimed gain. The first user picks among `l1` channels, the next
/// among `l1 - 1`, and so on.
///
/// Exact up to `l1 = 14`; beyond that a seeded Monte Carlo estimate of the
/// claiming process with its standard error.
pub fn v_factor(l1: usize, n: usize) -> Result<VFactor> {
    if n == 0 || n > l1 {
        return Err(Error::Domain(format!("V(L1={l1}, N={n}) needs 1 <= N <= L1")));
    }
    if l1 <= V_EXACT_CAP {
        let mut acc = BigRational::zero();
        for m in 0..n {
            acc += expected_max_exact(l1 - m);
        }
        acc /= BigRational::from_integer(BigInt::from(n));
        let value = acc.to_f64().ok_or_else(|| Error::Numerical("V factor overflow".into()))?;
        return Ok(VFactor { value, std_error: None });
    }
    Ok(v_factor_monte_carlo(l1, n, V_MC_SAMPLES, 0))
}

/// Monte Carlo estimate of `V(l1, n)` from `samples` claiming rounds.
pub fn v_factor_monte_carlo(l1: usize, n: usize, samples: usize, seed: u64) -> VFactor {
    let mut rng = stream(seed, (l1 * 64 + n) as u64, Lane::Aux(0));
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let mut per_sample = 0.0;
        for m in 0..n {
            let best = (0..l1 - m)
                .map(|_| -> f64 { Exp1.sample(&mut rng) })
                .fold(0.0, f64::max);
            per_sample += best;
        }
        per_sample /= n as f64;
        sum += per_sample;
        sum2 += per_sample * per_sample;
    }
    let k = samples as f64;
    let mean = sum / k;
    let var = (sum2 / k - mean * mean).max(0.0) * k / (k - 1.0);
    VFactor {
        value: mean,
        std_error: Some((var / k).sqrt()),
    }
}

/// Where the index of the APP1 power sum starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumStart {
    Zero,
    One,
}

/// `S = sum_k 1 / (lam N (N - k) (L - 1 - k))` over `k = start..N-1`.
pub fn app1_sum(n: usize, l: usize, lam: f64, start: SumStart) -> Result<f64> {
    if n == 0 || l < n + 1 {
        return Err(Error::Domain(format!("APP1 needs L >= N + 1 (N={n}, L={l})")));
    }
    let from = match start {
        SumStart::Zero => 0,
        SumStart::One => 1,
    };
    let nf = n as f64;
    Ok((from..n)
        .map(|k| 1.0 / (lam * nf * (n - k) as f64 * (l - 1 - k) as f64))
        .sum())
}

/// Expected per-user deception power under APP1, `p_bar S / (S + Gamma)`.
pub fn expected_power_app1(n: usize, l: usize, lam: f64, p_bar: f64, start: SumStart) -> Result<f64> {
    let s = app1_sum(n, l, lam, start)?;
    let g = gamma(n, l, lam)?;
    Ok(p_bar * s / (s + g))
}

/// Expected per-user deception power under APP2, `p_bar / (1 + Gamma)`.
pub fn expected_power_app2(n: usize, l: usize, lam: f64, p_bar: f64) -> Result<f64> {
    if l < 2 {
        return Err(Error::Domain("APP2 needs L >= 2".into()));
    }
    Ok(p_bar / (1.0 + gamma(n, l, lam)?))
}

/// Expected TRP under APP1.
pub fn etrp_app1(n: usize, l: usize, lam: f64, p_bar: f64, mean_k2: f64) -> Result<f64> {
    let s = app1_sum(n, l, lam, SumStart::Zero)?;
    let g = gamma(n, l, lam)?;
    Ok(n as f64 * p_bar * g / (s + g) * mean_k2 / lam)
}

/// Expected TRP under APP2 (users claim among the `L - 1` non-victim
/// channels).
pub fn etrp_app2(n: usize, l: usize, lam: f64, p_bar: f64, mean_k2: f64) -> Result<f64> {
    let g = gamma(n, l, lam)?;
    let v = v_factor(l - 1, n)?.value;
    Ok(g * p_bar / (1.0 + g) * n as f64 * v * mean_k2 / lam)
}

/// Expected TRP without a jammer, every user on its own best channel.
pub fn c_top(n: usize, l: usize, lam: f64, p_bar: f64, mean_k2: f64) -> Result<f64> {
    Ok(p_bar * n as f64 * v_factor(l, n)?.value * mean_k2 / lam)
}

/// `C1 / C_top`, written so the path-loss mean cancels exactly.
pub fn ratio_app1(n: usize, l: usize, lam: f64) -> Result<f64> {
    let s = app1_sum(n, l, lam, SumStart::Zero)?;
    let g = gamma(n, l, lam)?;
    Ok(g / ((s + g) * v_factor(l, n)?.value))
}

/// `C2 / C_top`.
pub fn ratio_app2(n: usize, l: usize, lam: f64) -> Result<f64> {
    let g = gamma(n, l, lam)?;
    Ok(g * v_factor(l - 1, n)?.value / ((g + 1.0) * v_factor(l, n)?.value))
}

/// Every bound at one `(N, L)` point, `N <= L`. APP1 entries are `None`
/// when `L < N + 1`; the APP2 received-power entries need `N <= L - 1` as
/// well.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSet {
    pub n: usize,
    pub l: usize,
    pub gamma: f64,
    pub v_factor: f64,
    pub ep_app1: Option<f64>,
    pub ep_app2: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c_top: f64,
    pub ratio_app1: Option<f64>,
    pub ratio_app2: Option<f64>,
    pub min_rho_app1: Option<f64>,
    pub min_rho_app2: Option<f64>,
}

impl BoundSet {
    pub fn compute(n: usize, l: usize, lam: f64, p_bar: f64, mean_k2: f64) -> Result<Self> {
        let app1 = l > n;
        let app2 = n < l;
        let ep_app1 = app1
            .then(|| expected_power_app1(n, l, lam, p_bar, SumStart::Zero))
            .transpose()?;
        let ep_app2 = (l >= 2).then(|| expected_power_app2(n, l, lam, p_bar)).transpose()?;
        Ok(Self {
            n,
            l,
            gamma: gamma(n, l, lam)?,
            v_factor: v_factor(l, n)?.value,
            ep_app1,
            ep_app2,
            c1: app1.then(|| etrp_app1(n, l, lam, p_bar, mean_k2)).transpose()?,
            c2: app2.then(|| etrp_app2(n, l, lam, p_bar, mean_k2)).transpose()?,
            c_top: c_top(n, l, lam, p_bar, mean_k2)?,
            ratio_app1: app1.then(|| ratio_app1(n, l, lam)).transpose()?,
            ratio_app2: app2.then(|| ratio_app2(n, l, lam)).transpose()?,
            min_rho_app1: ep_app1.map(|e| e / p_bar),
            min_rho_app2: ep_app2.map(|e| e / p_bar),
        })
    }
}

/// One row of a per-approach grid table.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub n: usize,
    pub l: usize,
    pub approach: &'static str,
    pub value: Option<f64>,
}

fn grid(
    ns: impl Iterator<Item = usize> + Clone,
    ls: impl Iterator<Item = usize> + Clone,
    lam: f64,
    pick: impl Fn(&BoundSet) -> (Option<f64>, Option<f64>),
) -> Result<Vec<GridRow>> {
    let mut rows = Vec::new();
    for n in ns {
        for l in ls.clone() {
            if n > l {
                rows.push(GridRow { n, l, approach: "APP1", value: None });
                rows.push(GridRow { n, l, approach: "APP2", value: None });
                continue;
            }
            let b = BoundSet::compute(n, l, lam, 1.0, 1.0)?;
            let (a1, a2) = pick(&b);
            rows.push(GridRow { n, l, approach: "APP1", value: a1 });
            rows.push(GridRow { n, l, approach: "APP2", value: a2 });
        }
    }
    Ok(rows)
}

/// Minimum deception-cap fractions `E(P_i) / p_bar` per approach.
pub fn min_rho_grid(
    ns: impl Iterator<Item = usize> + Clone,
    ls: impl Iterator<Item = usize> + Clone,
    lam: f64,
) -> Result<Vec<GridRow>> {
    grid(ns, ls, lam, |b| (b.min_rho_app1, b.min_rho_app2))
}

/// Lower-bound TRP ratios per approach.
pub fn ratio_grid(
    ns: impl Iterator<Item = usize> + Clone,
    ls: impl Iterator<Item = usize> + Clone,
    lam: f64,
) -> Result<Vec<GridRow>> {
    grid(ns, ls, lam, |b| (b.ratio_app1, b.ratio_app2))
}

/// CSV body with columns `N,L,approach,<value_name>`.
pub fn grid_csv(rows: &[GridRow], value_name: &str) -> String {
    let mut out = csvfmt::line(["N", "L", "approach", value_name]);
    for r in rows {
        out.push_str(&csvfmt::line([
            r.n.to_string(),
            r.l.to_string(),
            r.approach.to_string(),
            csvfmt::opt_g9(r.value),
        ]));
    }
    out
}
