//! Experiment registry and runners.

use rayon::prelude::*;

use decoy_core::bounds::{expected_power_app1, grid_csv, min_rho_grid, ratio_grid, GridRow, SumStart};
use decoy_core::csvfmt::{g9, line, opt_g9};
use decoy_core::model::draw_channels;
use decoy_core::oracle::solve_full;
use decoy_core::rl::q::{run_algorithm1, run_algorithm1_with, trace_csv, Scenario};
use decoy_core::rl::srl::{run_algorithm2, stage_csv, srl_trace_csv};
use decoy_core::rl::PowerGrid;
use decoy_core::rng::{stream, Lane};
use decoy_core::sim::{aggregate_csv, replay_allocation, slots_to_sustained, upsilon_top, Summary};
use decoy_core::{ChannelState, ScenarioConfig};

use crate::output::Output;
use crate::{parse_range, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Q-learning without gain knowledge.
    UnknownGains,
    /// Successive learning with AP gains known.
    Srl,
    /// Successive learning against flat Q-learning on a fine grid.
    SrlVsFlat,
    /// Success rate over the learning run and on replay.
    SuccessRate,
    BoundsOnly,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::UnknownGains => "unknown-gains",
            Kind::Srl | Kind::SrlVsFlat | Kind::SuccessRate => "known-gains",
            Kind::BoundsOnly => "bounds-only",
        }
    }
}

pub struct ExperimentSpec {
    pub name: &'static str,
    pub figure: u8,
    pub scenario: Kind,
    pub users: &'static [usize],
    pub channels: &'static [usize],
    /// Q-learning power step; `None` keeps `chi_q`.
    pub step: Option<f64>,
    pub n_seeds: u64,
    pub about: &'static str,
}

impl ExperimentSpec {
    /// Overrides applied on top of the config file.
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        match self.step {
            Some(s) if self.scenario == Kind::UnknownGains => vec![("q_power_step", s.to_string())],
            _ => Vec::new(),
        }
    }
}

/// Flat Q power step used by the comparison run.
pub const FLAT_STEP: f64 = 0.1;
/// Fraction of the per-draw optimum a learner must sustain.
pub const TARGET_FRACTION: f64 = 0.95;
/// Trace rows are kept every this many slots.
pub const CHECKPOINT: u64 = 100;
pub const SUCCESS_WINDOW: usize = 1000;

pub const REGISTRY: &[ExperimentSpec] = &[
    ExperimentSpec {
        name: "fig3",
        figure: 3,
        scenario: Kind::BoundsOnly,
        users: &[1, 2, 3, 4, 5],
        channels: &[4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14],
        step: None,
        n_seeds: 0,
        about: "minimum deception cap per approach (decoy bounds)",
    },
    ExperimentSpec {
        name: "fig4",
        figure: 4,
        scenario: Kind::BoundsOnly,
        users: &[1, 2, 3, 4, 5],
        channels: &[3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14],
        step: None,
        n_seeds: 0,
        about: "lower-bound ratio per approach (decoy bounds)",
    },
    ExperimentSpec {
        name: "fig5",
        figure: 5,
        scenario: Kind::BoundsOnly,
        users: &[1, 2, 3],
        channels: &[4, 6, 8],
        step: None,
        n_seeds: 0,
        about: "optimum ratio against the deception cap (decoy bounds)",
    },
    ExperimentSpec {
        name: "fig6",
        figure: 6,
        scenario: Kind::UnknownGains,
        users: &[1],
        channels: &[4, 5, 6, 7, 8],
        step: Some(0.2),
        n_seeds: 20,
        about: "single-user Q-learning, power step 0.2",
    },
    ExperimentSpec {
        name: "fig7",
        figure: 7,
        scenario: Kind::UnknownGains,
        users: &[2],
        channels: &[5, 6, 7, 8, 9],
        step: Some(2.0),
        n_seeds: 20,
        about: "two-user Q-learning, power step 2",
    },
    ExperimentSpec {
        name: "fig8",
        figure: 8,
        scenario: Kind::Srl,
        users: &[3],
        channels: &[5, 6, 7, 8, 9],
        step: None,
        n_seeds: 10,
        about: "three-user successive learning",
    },
    ExperimentSpec {
        name: "fig9",
        figure: 9,
        scenario: Kind::SrlVsFlat,
        users: &[3],
        channels: &[5, 6, 7, 8],
        step: Some(FLAT_STEP),
        n_seeds: 10,
        about: "slots to 95% of the optimum, successive vs flat Q (step 0.1)",
    },
    ExperimentSpec {
        name: "fig10",
        figure: 10,
        scenario: Kind::SuccessRate,
        users: &[1, 2, 3],
        channels: &[6, 7, 8],
        step: None,
        n_seeds: 10,
        about: "success-rate traces, window 1000",
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentSpec> {
    REGISTRY.iter().find(|e| e.name == name)
}

/// Channel draw of run `run`; the same for every method at that point.
fn channels_for(cfg: &ScenarioConfig, run: u64) -> ChannelState {
    draw_channels(cfg, &mut stream(cfg.seed, run, Lane::Channels))
}

fn parse_list(text: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        out.extend(parse_range(part.trim())?);
    }
    Ok(out)
}

/// Cap fractions of the sweep.
const RHO_FRACTIONS: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

pub struct SweepArgs {
    pub n: String,
    pub l: String,
    pub draws: u64,
}

pub fn bounds(
    cfg: &ScenarioConfig,
    ns: &[usize],
    ls: &[usize],
    sweep: &SweepArgs,
    out: &Output,
) -> Result<(), CliError> {
    let lam = cfg.lambda_rate;
    let mut rows = min_rho_grid(ns.iter().copied(), ls.iter().copied(), lam)?;
    // Power sum started at k1 = 1, kept next to the k1 = 0 rows for comparison.
    for &n in ns {
        for &l in ls {
            let value = (l > n)
                .then(|| expected_power_app1(n, l, lam, 1.0, SumStart::One))
                .transpose()?;
            rows.push(GridRow { n, l, approach: "APP1_from1", value });
        }
    }
    out.write("fig3.csv", &grid_csv(&rows, "min_rho_fraction"))?;
    let rows = ratio_grid(ns.iter().copied(), ls.iter().copied(), lam)?;
    out.write("fig4.csv", &grid_csv(&rows, "ratio"))?;

    let sn = parse_list(&sweep.n)?;
    let sl = parse_list(&sweep.l)?;
    let mut body = line(["N", "L", "rho", "rho_fraction", "mean_ratio", "se", "feasible_fraction"]);
    for &n in &sn {
        for &l in &sl {
            if n >= l {
                continue;
            }
            let base = cfg.clone().with_users(n).with_channels(l);
            // Same draws for every cap, so each draw's optimum can only grow with rho.
            let per_draw: Vec<Vec<Option<f64>>> = (0..sweep.draws)
                .into_par_iter()
                .map(|run| {
                    let ch = channels_for(&base, run);
                    let top = upsilon_top(&ch, &base);
                    RHO_FRACTIONS
                        .iter()
                        .map(|f| {
                            let mut c = base.clone();
                            c.rho = f * c.p_bar;
                            let r = solve_full(&ch, &c)?;
                            Ok(r.feasible.then(|| r.trp() / top))
                        })
                        .collect::<decoy_core::Result<Vec<_>>>()
                })
                .collect::<decoy_core::Result<_>>()?;
            for (k, f) in RHO_FRACTIONS.iter().enumerate() {
                let vals: Vec<f64> = per_draw.iter().map(|d| d[k].unwrap_or(0.0)).collect();
                let feasible = per_draw.iter().filter(|d| d[k].is_some()).count();
                let s = Summary::from_values(vals);
                body.push_str(&line([
                    n.to_string(),
                    l.to_string(),
                    g9(f * cfg.p_bar),
                    g9(*f),
                    g9(s.mean()),
                    g9(s.std_error()),
                    g9(feasible as f64 / sweep.draws.max(1) as f64),
                ]));
            }
        }
    }
    out.write("fig5.csv", &body)
}

/// Result of one (point, seed) job.
struct Job {
    n: usize,
    l: usize,
    seed: u64,
    row: String,
    /// Value aggregated across seeds, per series name.
    values: Vec<(&'static str, Option<f64>)>,
    /// Trace file name and rows, seed 0 only unless noted.
    trace: Option<(String, String)>,
    /// Rows for a shared trace file.
    shared_trace: String,
}

fn key(n: usize, l: usize, series: &str) -> String {
    format!("N={n};L={l};{series}")
}

fn thin(body: &str, keep: impl Fn(u64) -> bool) -> String {
    let mut lines = body.lines();
    let mut out = String::new();
    if let Some(h) = lines.next() {
        out.push_str(h);
        out.push('\n');
    }
    for l in lines {
        let slot: u64 = l.split(',').next().and_then(|s| s.parse().ok()).unwrap_or(0);
        if keep(slot) {
            out.push_str(l);
            out.push('\n');
        }
    }
    out
}

fn run_job(spec: &ExperimentSpec, cfg: &ScenarioConfig, n: usize, l: usize, seed: u64) -> Result<Job, CliError> {
    let cfg = cfg.clone().with_users(n).with_channels(l);
    cfg.validate()?;
    let ch = channels_for(&cfg, seed);
    let top = upsilon_top(&ch, &cfg);
    let opt = solve_full(&ch, &cfg)?;
    let opt_ratio = if opt.feasible { opt.trp() / top } else { 0.0 };
    let every = |s: u64| s % CHECKPOINT == 0;
    let mut job = Job {
        n,
        l,
        seed,
        row: String::new(),
        values: Vec::new(),
        trace: None,
        shared_trace: String::new(),
    };
    match spec.scenario {
        Kind::UnknownGains => {
            let run = run_algorithm1(&ch, &cfg, Scenario::UnknownGains, seed)?;
            job.row = line([
                n.to_string(),
                l.to_string(),
                seed.to_string(),
                run.learner.slots().to_string(),
                u8::from(run.converged).to_string(),
                g9(run.greedy_ratio),
                g9(opt_ratio),
            ]);
            job.values = vec![("greedy_ratio", Some(run.greedy_ratio)), ("optimal_ratio", Some(opt_ratio))];
            if seed == 0 {
                job.trace = Some((format!("{}_trace_N{n}_L{l}.csv", spec.name), thin(&trace_csv(&run.trace), every)));
            }
        }
        Kind::Srl => {
            let run = run_algorithm2(&ch, &cfg, seed)?;
            let series: Vec<f64> = run.trace.iter().map(|r| r.greedy_ratio).collect();
            let reach = slots_to_sustained(&series, TARGET_FRACTION * opt_ratio);
            let ratio = run.stages.last().map_or(0.0, |s| s.trp_ratio);
            job.row = line([
                n.to_string(),
                l.to_string(),
                seed.to_string(),
                run.total_slots.to_string(),
                run.stages.len().to_string(),
                g9(ratio),
                g9(opt_ratio),
                opt_g9(reach.map(|r| r as f64)),
            ]);
            job.values = vec![
                ("greedy_ratio", Some(ratio)),
                ("optimal_ratio", Some(opt_ratio)),
                ("slots_to_95", reach.map(|r| r as f64)),
            ];
            if seed == 0 {
                let mut body = stage_csv(&run.stages);
                body.push('\n');
                body.push_str(&thin(&srl_trace_csv(&run.trace), every));
                job.trace = Some((format!("{}_trace_N{n}_L{l}.csv", spec.name), body));
            }
        }
        Kind::SrlVsFlat => {
            let target = TARGET_FRACTION * opt_ratio;
            let srl = run_algorithm2(&ch, &cfg, seed)?;
            let s_series: Vec<f64> = srl.trace.iter().map(|r| r.greedy_ratio).collect();
            let s_reach = slots_to_sustained(&s_series, target);
            let grid = PowerGrid::from_step(spec.step.unwrap_or(FLAT_STEP), cfg.rho)?;
            let flat = run_algorithm1_with(&ch, &cfg, Scenario::KnownGains, grid, seed)?;
            let f_series: Vec<f64> = flat.trace.iter().map(|r| r.greedy_ratio).collect();
            let f_reach = slots_to_sustained(&f_series, target);
            // Censored runs count at their full length.
            let censor = |r: Option<usize>, len: usize| r.unwrap_or(len) as f64;
            job.row = line([
                n.to_string(),
                l.to_string(),
                seed.to_string(),
                opt_g9(s_reach.map(|r| r as f64)),
                u8::from(s_reach.is_none()).to_string(),
                opt_g9(f_reach.map(|r| r as f64)),
                u8::from(f_reach.is_none()).to_string(),
                g9(opt_ratio),
            ]);
            job.values = vec![
                ("srl_slots_to_95", Some(censor(s_reach, s_series.len()))),
                ("flat_slots_to_95", Some(censor(f_reach, f_series.len()))),
            ];
            for (method, series) in [("srl", &s_series), ("flat", &f_series)] {
                for (k, v) in series.iter().enumerate() {
                    if every(k as u64) {
                        job.shared_trace.push_str(&line([
                            n.to_string(),
                            l.to_string(),
                            seed.to_string(),
                            method.to_string(),
                            k.to_string(),
                            g9(*v),
                            g9(v / opt_ratio.max(f64::MIN_POSITIVE)),
                        ]));
                    }
                }
            }
        }
        Kind::SuccessRate => {
            let run = run_algorithm2(&ch, &cfg, seed)?;
            let flags: Vec<bool> = run.trace.iter().map(|r| r.success).collect();
            let replay = replay_allocation(&run.allocation, &ch, &cfg, SUCCESS_WINDOW, &mut stream(cfg.seed, seed, Lane::Aux(2)))?;
            let rate = replay.success_rate(SUCCESS_WINDOW)?;
            job.row = line([
                n.to_string(),
                l.to_string(),
                seed.to_string(),
                run.total_slots.to_string(),
                g9(rate),
            ]);
            job.values = vec![("replay_success_rate", Some(rate))];
            for end in (SUCCESS_WINDOW..=flags.len()).step_by(SUCCESS_WINDOW) {
                let r = decoy_core::sim::success_rate(&flags[..end], SUCCESS_WINDOW)?;
                job.shared_trace.push_str(&line([
                    n.to_string(),
                    l.to_string(),
                    seed.to_string(),
                    end.to_string(),
                    g9(r),
                ]));
            }
        }
        Kind::BoundsOnly => unreachable!("rejected before dispatch"),
    }
    Ok(job)
}

fn runs_header(kind: Kind) -> String {
    match kind {
        Kind::UnknownGains => line(["N", "L", "seed", "slots", "converged", "greedy_trp_ratio", "optimal_trp_ratio"]),
        Kind::Srl => line([
            "N",
            "L",
            "seed",
            "slots",
            "stages",
            "greedy_trp_ratio",
            "optimal_trp_ratio",
            "slots_to_95",
        ]),
        Kind::SrlVsFlat => line([
            "N",
            "L",
            "seed",
            "srl_slots_to_95",
            "srl_censored",
            "flat_slots_to_95",
            "flat_censored",
            "optimal_trp_ratio",
        ]),
        Kind::SuccessRate => line(["N", "L", "seed", "slots", "replay_success_rate"]),
        Kind::BoundsOnly => String::new(),
    }
}

pub fn simulate(spec: &ExperimentSpec, cfg: &ScenarioConfig, seeds: u64, out: &Output) -> Result<(), CliError> {
    let points: Vec<(usize, usize, u64)> = spec
        .users
        .iter()
        .flat_map(|&n| spec.channels.iter().map(move |&l| (n, l)))
        .flat_map(|(n, l)| (0..seeds).map(move |s| (n, l, s)))
        .collect();
    let mut jobs: Vec<Job> = points
        .into_par_iter()
        .map(|(n, l, s)| run_job(spec, cfg, n, l, s))
        .collect::<Result<_, _>>()?;
    jobs.sort_by_key(|j| (j.n, j.l, j.seed));

    let mut runs = runs_header(spec.scenario);
    let mut shared = match spec.scenario {
        Kind::SrlVsFlat => line(["N", "L", "seed", "method", "slot", "greedy_trp_ratio", "fraction_of_optimal"]),
        Kind::SuccessRate => line(["N", "L", "seed", "slot", "success_rate"]),
        _ => String::new(),
    };
    let mut agg: Vec<(String, Summary)> = Vec::new();
    for j in &jobs {
        runs.push_str(&j.row);
        shared.push_str(&j.shared_trace);
        for (series, v) in &j.values {
            let k = key(j.n, j.l, series);
            let Some(v) = v else { continue };
            let add = Summary::single(*v);
            match agg.iter_mut().find(|(name, _)| *name == k) {
                Some((_, s)) => *s = s.merge(&add),
                None => agg.push((k, add)),
            }
        }
        if let Some((name, body)) = &j.trace {
            out.write(name, body)?;
        }
    }
    out.write(&format!("{}_runs.csv", spec.name), &runs)?;
    out.write(&format!("{}_aggregate.csv", spec.name), &aggregate_csv(&agg))?;
    if !shared.is_empty() {
        out.write(&format!("{}_trace.csv", spec.name), &shared)?;
    }
    for (k, s) in &agg {
        println!("{k}\tcount={}\tmean={}\tmedian={}", s.count(), g9(s.mean()), g9(s.median()));
    }
    Ok(())
}
