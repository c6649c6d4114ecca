use decoy_core::bounds::{gamma, harmonic, ratio_app1, ratio_app2, v_factor, BoundSet};
use decoy_core::model::{draw_channels, sensed_spectrum};
use decoy_core::rl::q::{run_algorithm1, ActionCode, Codec, QLearner, QTable, Scenario};
use decoy_core::rl::srl::run_algorithm2;
use decoy_core::rl::{epsilon, PowerGrid};
use decoy_core::rng::{stream, Lane, Stream};
use decoy_core::sim::{baseline_random_hop, run_slot};
use decoy_core::{Allocation, ChannelState, ScenarioConfig};
use proptest::prelude::*;
use rand::Rng;

fn cfg(n: usize, l: usize) -> ScenarioConfig {
    ScenarioConfig::default().with_users(n).with_channels(l)
}

/// One user's view: its own table and its own copy of the announced stream.
struct Replica {
    q: QTable,
    shared: Stream,
}

#[test]
fn replicated_tables_stay_bitwise_identical() {
    let mut c = cfg(2, 4);
    c.q_power_step = Some(2.5);
    c.pi_iteration = 4000;
    c.phi_eps = 800.0;
    let ch = draw_channels(&c, &mut stream(c.seed, 11, Lane::Channels));
    let grid = PowerGrid::for_q(&c).unwrap();
    let mut reference = QLearner::new(&ch, &c, Scenario::UnknownGains, grid.clone(), 11).unwrap();

    let codec = Codec::unknown_gains(2, 4, grid.len());
    let mut replicas: Vec<Replica> = (0..3)
        .map(|_| Replica {
            q: QTable::for_codec(&codec),
            shared: stream(c.seed, 11, Lane::Shared),
        })
        .collect();
    let mut own: Vec<Stream> = (0..2).map(|i| stream(c.seed, 11, Lane::User(i))).collect();
    let mut jam = stream(c.seed, 11, Lane::Jammer);
    let mut js = decoy_core::jammer::JammerState::new();
    let mut s = 0usize;

    for k in 0..c.pi_iteration {
        let eps = epsilon(k, c.phi_eps, c.eps_thr);
        let mut picked = Vec::new();
        let mut explore = None;
        for r in replicas.iter_mut() {
            let z: f64 = r.shared.random();
            if z < eps {
                explore = Some(r.shared.random_range(0..4));
            } else {
                picked.push(r.q.argmax(s));
            }
        }
        let action = match explore {
            Some(victim) => {
                // each user draws its own part once and announces it
                let mut comm = Vec::new();
                let mut power = Vec::new();
                for u in own.iter_mut() {
                    let ch_idx = u.random_range(0..3);
                    comm.push(if ch_idx >= victim { ch_idx + 1 } else { ch_idx });
                    power.push(u.random_range(0..grid.len()));
                }
                assert!(picked.is_empty());
                codec.encode_action(&ActionCode { victim, comm, power })
            }
            None => {
                assert!(picked.windows(2).all(|w| w[0] == w[1]));
                picked[0]
            }
        };
        let alloc = codec.allocation(action, &grid, c.p_bar).unwrap();
        let (out, next_js) = run_slot(&alloc, &ch, js, &c, &mut jam).unwrap();
        js = next_js;
        let next = codec.next_state(action);
        for r in replicas.iter_mut() {
            r.q.bellman_update(s, action, out.reward, next, c.alpha, c.gamma);
        }
        s = next;

        let step = reference.step(&ch, &c).unwrap();
        assert_eq!(step.action, action, "slot {k}");
    }
    for r in &replicas {
        let a: Vec<u64> = r.q.values().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = reference.q.values().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn runs_are_reproducible() {
    let mut c = cfg(1, 4);
    c.q_power_step = Some(0.5);
    c.pi_iteration = 20_000;
    let ch = draw_channels(&c, &mut stream(c.seed, 2, Lane::Channels));
    let ch2 = draw_channels(&c, &mut stream(c.seed, 2, Lane::Channels));
    assert_eq!(ch, ch2);
    let a = run_algorithm1(&ch, &c, Scenario::UnknownGains, 2).unwrap();
    let b = run_algorithm1(&ch, &c, Scenario::UnknownGains, 2).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.allocation, b.allocation);
    assert_eq!(a.learner.q, b.learner.q);

    let mut c = cfg(2, 4);
    c.pi_iteration = 20_000;
    let ch = draw_channels(&c, &mut stream(c.seed, 5, Lane::Channels));
    let a = run_algorithm2(&ch, &c, 5).unwrap();
    let b = run_algorithm2(&ch, &c, 5).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.stages, b.stages);
    assert_eq!(a.allocation, b.allocation);

    let mut c = cfg(2, 5);
    c.jammer_random_prob = 0.2;
    let ch = draw_channels(&c, &mut stream(c.seed, 9, Lane::Channels));
    let a = baseline_random_hop(&ch, &c, true, 500, 9).unwrap();
    let b = baseline_random_hop(&ch, &c, true, 500, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn different_runs_differ() {
    let c = cfg(2, 5);
    let a = draw_channels(&c, &mut stream(c.seed, 0, Lane::Channels));
    let b = draw_channels(&c, &mut stream(c.seed, 1, Lane::Channels));
    assert_ne!(a, b);
}

#[test]
fn single_user_factors_are_harmonic() {
    for l in 1..=14 {
        let h = harmonic(l);
        assert!((v_factor(l, 1).unwrap().value - h).abs() <= 1e-6 * h, "V({l},1)");
        assert!((gamma(1, l, 1.0).unwrap() - h).abs() <= 1e-6 * h, "Gamma(1,{l})");
    }
}

#[test]
fn ratios_ignore_the_pathloss_mean() {
    for n in 1..=5 {
        for l in (n + 1)..=14 {
            let sets: Vec<BoundSet> = [0.1, 1.0, 10.0]
                .iter()
                .map(|k2| BoundSet::compute(n, l, 1.0, 10.0, *k2).unwrap())
                .collect();
            for s in &sets[1..] {
                assert_eq!(s.ratio_app1.map(f64::to_bits), sets[0].ratio_app1.map(f64::to_bits));
                assert_eq!(s.ratio_app2.map(f64::to_bits), sets[0].ratio_app2.map(f64::to_bits));
            }
            for s in &sets {
                let r2 = s.c2.unwrap() / s.c_top;
                assert!((r2 - ratio_app2(n, l, 1.0).unwrap()).abs() < 1e-12);
                let r1 = s.c1.unwrap() / s.c_top;
                assert!((r1 - ratio_app1(n, l, 1.0).unwrap()).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #[test]
    fn coherent_victim_power_dominates(
        d in prop::collection::vec(0.0..5.0f64, 1..5),
        h in prop::collection::vec(0.0..3.0f64, 5),
    ) {
        let n = d.len();
        let l = n + 1;
        let hj: Vec<f64> = (0..n * l).map(|k| h[k % h.len()]).collect();
        let hc = vec![1.0; n * l];
        let ch = ChannelState::new(n, l, hc, hj).unwrap();
        let comm: Vec<usize> = (1..=n).collect();
        let alloc = Allocation::new(0, comm, d.clone(), 10.0).unwrap();
        let sensed = sensed_spectrum(&alloc, &ch);
        let incoherent: f64 = (0..n).map(|i| d[i] * ch.hj2(i, 0)).sum();
        prop_assert!(sensed[0] >= incoherent * (1.0 - 1e-12));
    }
}
