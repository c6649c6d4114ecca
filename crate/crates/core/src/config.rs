//! Scenario parameters.
//!
//! The flat `key=value` text form uses exactly the field names below, one
//! pair per line; `#` starts a comment.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of users N.
    pub n_users: usize,
    /// Number of orthogonal channels L.
    pub n_channels: usize,
    /// Per-user power budget per slot.
    pub p_bar: f64,
    /// Cap on the power a user may spend on the victim channel.
    pub rho: f64,
    /// Rate of the exponential channel power gains.
    pub lambda_rate: f64,
    pub pathloss_enabled: bool,
    /// Reference distance of the path-loss law.
    pub kappa0: f64,
    /// Path-loss exponent.
    pub beta: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Learning rate.
    pub alpha: f64,
    /// Discount factor.
    pub gamma: f64,
    /// Exploration decay constant of the Q-learning stage, in slots.
    pub phi_eps: f64,
    /// Exploration decay constant of the TD(0) refinement stages, in slots.
    pub phi_eps_td: f64,
    pub eps_thr: f64,
    /// Number of power steps of the Q-learning grid on `[0, rho]`.
    pub chi_q: u32,
    /// Explicit Q-learning power step; overrides `chi_q` when set.
    pub q_power_step: Option<f64>,
    /// Number of power steps of the first TD stage on `[-tau, tau]`.
    pub chi_td: u32,
    /// Number of power steps of every later TD stage.
    pub chi_td_refine: u32,
    /// Adjustment range of the first TD stage.
    pub tau: f64,
    /// Iteration cap of every learning stage.
    pub pi_iteration: u64,
    /// Consecutive unchanged value-argmax iterations ending a TD stage.
    pub psi_end: u64,
    /// TD stages always run before the zero-adjustment stop is honoured.
    pub min_td_stages: u32,
    pub max_td_stages: u32,
    /// Probability that the jammer ignores its sensing and hops at random.
    pub jammer_random_prob: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p_bar = 10.0;
        Self {
            n_users: 1,
            n_channels: 4,
            p_bar,
            rho: p_bar / 2.0,
            lambda_rate: 1.0,
            pathloss_enabled: false,
            kappa0: 0.1,
            beta: 3.0,
            w1: 3.5,
            w2: 1.5,
            w3: 1.5,
            alpha: 0.9,
            gamma: 0.9,
            phi_eps: 10_000.0,
            phi_eps_td: 1_000.0,
            eps_thr: 1e-4,
            chi_q: 5,
            q_power_step: None,
            chi_td: 8,
            chi_td_refine: 10,
            tau: 2.0,
            pi_iteration: 100_000,
            psi_end: 200,
            min_td_stages: 2,
            max_td_stages: 4,
            jammer_random_prob: 0.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_users(mut self, n: usize) -> Self {
        self.n_users = n;
        self
    }

    pub fn with_channels(mut self, l: usize) -> Self {
        self.n_channels = l;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_users < 1 {
            return bad("n_users must be at least 1".into());
        }
        if self.n_channels < 2 {
            return bad(format!("n_channels must be at least 2, got {}", self.n_channels));
        }
        if !(self.p_bar > 0.0 && self.p_bar.is_finite()) {
            return bad(format!("p_bar must be positive, got {}", self.p_bar));
        }
        if !(self.rho > 0.0 && self.rho <= self.p_bar) {
            return bad(format!("rho must lie in (0, p_bar], got {}", self.rho));
        }
        if !(self.lambda_rate > 0.0 && self.lambda_rate.is_finite()) {
            return bad(format!("lambda_rate must be positive, got {}", self.lambda_rate));
        }
        if [self.w1, self.w2, self.w3].iter().any(|w| !(*w >= 0.0)) {
            return bad("reward weights must be nonnegative".into());
        }
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.phi_eps > 0.0 && self.phi_eps_td > 0.0) {
            return bad("exploration decay constants must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.eps_thr) {
            return bad(format!("eps_thr must lie in [0, 1], got {}", self.eps_thr));
        }
        if let Some(step) = self.q_power_step {
            if !(step > 0.0 && step <= self.rho) {
                return bad(format!("q_power_step must lie in (0, rho], got {step}"));
            }
        } else if self.chi_q == 0 {
            return bad("chi_q must be at least 1".into());
        }
        if self.chi_td == 0 || self.chi_td_refine == 0 {
            return bad("TD stage schedule needs chi_td >= 1".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.min_td_stages > self.max_td_stages {
            return bad("min_td_stages exceeds max_td_stages".into());
        }
        if !(0.0..=1.0).contains(&self.jammer_random_prob) {
            return bad("jammer_random_prob must lie in [0, 1]".into());
        }
        if self.pathloss_enabled && !(self.kappa0 > 0.0) {
            return bad("kappa0 must be positive".into());
        }
        Ok(())
    }

    /// Resolved `(key, value)` pairs in a fixed order.
    pub fn to_kv(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_users", self.n_users.to_string()),
            ("n_channels", self.n_channels.to_string()),
            ("p_bar", self.p_bar.to_string()),
            ("rho", self.rho.to_string()),
            ("lambda_rate", self.lambda_rate.to_string()),
            ("pathloss_enabled", self.pathloss_enabled.to_string()),
            ("kappa0", self.kappa0.to_string()),
            ("beta", self.beta.to_string()),
            ("w1", self.w1.to_string()),
            ("w2", self.w2.to_string()),
            ("w3", self.w3.to_string()),
            ("alpha", self.alpha.to_string()),
            ("gamma", self.gamma.to_string()),
            ("phi_eps", self.phi_eps.to_string()),
            ("phi_eps_td", self.phi_eps_td.to_string()),
            ("eps_thr", self.eps_thr.to_string()),
            ("chi_q", self.chi_q.to_string()),
            (
                "q_power_step",
                self.q_power_step.map_or_else(|| "none".to_string(), |s| s.to_string()),
            ),
            ("chi_td", self.chi_td.to_string()),
            ("chi_td_refine", self.chi_td_refine.to_string()),
            ("tau", self.tau.to_string()),
            ("pi_iteration", self.pi_iteration.to_string()),
            ("psi_end", self.psi_end.to_string()),
            ("min_td_stages", self.min_td_stages.to_string()),
            ("max_td_stages", self.max_td_stages.to_string()),
            ("jammer_random_prob", self.jammer_random_prob.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("cannot parse {key}={v}")))
        }
        let v = value.trim();
        match key.trim() {
            "n_users" => self.n_users = num(key, v)?,
            "n_channels" => self.n_channels = num(key, v)?,
            "p_bar" => self.p_bar = num(key, v)?,
            "rho" => self.rho = num(key, v)?,
            "lambda_rate" => self.lambda_rate = num(key, v)?,
            "pathloss_enabled" => self.pathloss_enabled = num(key, v)?,
            "kappa0" => self.kappa0 = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "w1" => self.w1 = num(key, v)?,
            "w2" => self.w2 = num(key, v)?,
            "w3" => self.w3 = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "phi_eps" => self.phi_eps = num(key, v)?,
            "phi_eps_td" => self.phi_eps_td = num(key, v)?,
            "eps_thr" => self.eps_thr = num(key, v)?,
            "chi_q" => self.chi_q = num(key, v)?,
            "q_power_step" => {
                self.q_power_step = match v {
                    "none" | "" => None,
                    s => Some(num(key, s)?),
                }
            }
            "chi_td" => self.chi_td = num(key, v)?,
            "chi_td_refine" => self.chi_td_refine = num(key, v)?,
            "tau" => self.tau = num(key, v)?,
            "pi_iteration" => self.pi_iteration = num(key, v)?,
            "psi_end" => self.psi_end = num(key, v)?,
            "min_td_stages" => self.min_td_stages = num(key, v)?,
            "max_td_stages" => self.max_td_stages = num(key, v)?,
            "jammer_random_prob" => self.jammer_random_prob = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of `text` on top of `self`.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got `{raw}`", lineno + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_kv_text(&self) -> String {
        self.to_kv()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.rho, 5.0);
        assert_eq!((cfg.w1, cfg.w2, cfg.w3), (3.5, 1.5, 1.5));
        assert_eq!(cfg.phi_eps, 10_000.0);
        assert_eq!(cfg.eps_thr, 1e-4);
    }

    #[test]
    fn kv_text_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.n_users = 3;
        cfg.q_power_step = Some(2.0);
        cfg.seed = 99;
        let mut back = ScenarioConfig::default();
        back.apply_kv_text(&cfg.to_kv_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ScenarioConfig::default();
        assert!(cfg.set("nonsense", "1").is_err());
        assert!(cfg.set("rho", "abc").is_err());
        cfg.rho = 11.0;
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig::default().with_channels(1);
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.chi_td = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_kv_text("# header\n\nn_users = 2 # two users\nrho=4\n")
            .unwrap();
        assert_eq!(cfg.n_users, 2);
        assert_eq!(cfg.rho, 4.0);
    }
}
