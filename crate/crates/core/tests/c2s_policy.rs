use std::collections::BTreeMap;

use c2s_core::c2s::{
    c2s_heuristic, c2s_reward, c2s_state, feasibility_mask, reward_components, select_action, state_len, Decision,
    PendingLedger, RewardComponents, DROP_PENALTY,
};
use c2s_core::config::RunConfig;
use c2s_core::env::{EpisodeConfig, Order, OrderId, TimeWindow, TripPlan, WorldState};
use c2s_core::geometry::Point;
use c2s_core::orchestrator::{run_episode, Agents, EpisodeSettings};
use c2s_core::rng::seeded;
use proptest::prelude::*;

fn world_with(orders: &[(f64, f64, u32, f64, f64)]) -> WorldState {
    let mut w = WorldState::new(EpisodeConfig::default()).unwrap();
    w.add_orders(orders.iter().enumerate().map(|(k, &(x, y, m, a, b))| {
        Order::new(OrderId(k as u64), m, Point::new(x, y), 0.0, TimeWindow::new(a, b))
    }));
    w
}

#[test]
fn state_has_nineteen_entries() {
    let w = world_with(&[(0.2, -0.7, 4, 30.0, 90.0)]);
    let emb = BTreeMap::from([(OrderId(0), [0.1, -0.2])]);
    let s = c2s_state(&w, OrderId(0), &emb).unwrap();
    assert_eq!(s.len(), 19);
    assert_eq!(state_len(4), 19);
}

#[test]
fn corner_order_distance_component() {
    let mut w = world_with(&[(-1.0, -1.0, 3, 0.0, 500.0)]);
    w.assign_order(OrderId(0), 0).unwrap();
    let vehicle = w.acquire_vehicle(0, 0.0);
    let trip = w.execute_trip(&TripPlan { depot: 0, vehicle, start_time: 0.0, orders: vec![OrderId(0)] }).unwrap();
    let c = reward_components(&w, OrderId(0), &trip).unwrap();
    assert!((c.d + 2.1213).abs() < 1e-4);
    assert_eq!(c.f, 1.0);
    c.check().unwrap();
}

#[test]
fn drop_after_one_defer() {
    let mut ledger = PendingLedger::default();
    ledger.record_defer(OrderId(1), Decision { state: vec![0.0; 19], action: 4 });
    let t = ledger.settle(OrderId(1), DROP_PENALTY, 0.9).unwrap();
    assert_eq!(t.len(), 1);
    assert!((t[0].reward - -9.0).abs() < 1e-12);
    assert!(t[0].next_state.is_none());
}

#[test]
fn settled_rewards_from_traced_episodes() {
    // recompute every discounted reward from the settlement record
    let mut cfg = RunConfig::default();
    cfg.combo = "L+H".parse().unwrap();
    let gae = c2s_core::graph::GaeModel::new(16, &mut seeded(1));
    let mut agents = Agents::init(cfg.combo, &cfg, 0, Some(gae));
    let settings = EpisodeSettings { c2s_epsilon: 0.5, trace: true, ..EpisodeSettings::eval() };
    let mut checked = 0;
    for seed in 0..5 {
        let out = run_episode(cfg.combo, &mut agents, &cfg, &cfg.demand, seed, settings).unwrap();
        for s in &out.settlements {
            assert_eq!(s.rewards.len(), s.defers + usize::from(s.has_final));
            for (k, r) in s.rewards.iter().enumerate().take(s.defers) {
                let mut expect = s.base;
                for _ in 0..(s.defers - k) {
                    expect *= cfg.learn.gamma;
                }
                assert!((r - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
            if s.has_final {
                assert_eq!(*s.rewards.last().unwrap(), s.base);
            }
            if s.components.is_none() {
                assert_eq!(s.base, -10.0);
            }
            checked += s.rewards.len();
        }
    }
    assert!(checked > 100);
}

proptest! {
    #[test]
    fn reward_is_weighted_sum(d in -2.12f64..=0.0, l in -1.0f64..=0.0, f in prop::bool::ANY, u in -1.0f64..=0.0, a1 in 0.0f64..3.0, a2 in 0.0f64..3.0) {
        let f = if f { 1.0 } else { 0.0 };
        let r = c2s_reward(&RewardComponents { d, l, f, u }, a1, a2).unwrap();
        prop_assert!((r - (a1 * d + a1 * l + f + a2 * u)).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_components_rejected(l in 0.001f64..5.0) {
        let c = RewardComponents { d: 0.0, l, f: 1.0, u: 0.0 };
        prop_assert!(c2s_reward(&c, 1.0, 1.0).is_err());
    }

    #[test]
    fn defer_chain_discounting(h in 0usize..8, base in -10.0f64..2.0, gamma in 0.0f64..=1.0, has_final in prop::bool::ANY) {
        let mut ledger = PendingLedger::default();
        for k in 0..h {
            ledger.record_defer(OrderId(0), Decision { state: vec![k as f64], action: 4 });
        }
        if has_final {
            ledger.record_final(OrderId(0), Decision { state: vec![99.0], action: 1 });
        }
        let t = ledger.settle(OrderId(0), base, gamma).unwrap();
        prop_assert_eq!(t.len(), h + usize::from(has_final));
        // walk backwards from the outcome: each earlier defer is one more γ away
        let mut r = base;
        for k in (0..h).rev() {
            r *= gamma;
            prop_assert!((t[k].reward - r).abs() <= 1e-12);
            prop_assert_eq!(t[k].state[0], k as f64);
        }
    }

    #[test]
    fn heuristic_and_greedy_respect_mask(seed in 0u64..500, stock in prop::collection::vec(0u32..12, 4), eps in 0.0f64..=1.0) {
        let mut w = world_with(&[(0.3, 0.8, 6, 30.0, 90.0), (-0.4, -0.2, 9, 20.0, 250.0)]);
        for (wh, s) in w.warehouses.iter_mut().zip(&stock) {
            wh.inventory = *s;
        }
        for id in [OrderId(0), OrderId(1)] {
            let mask = feasibility_mask(&w, id).unwrap();
            let a = c2s_heuristic(&w, id).unwrap();
            prop_assert!(a == 4 || mask[a]);
            let mut r = seeded(seed);
            let q: Vec<f64> = (0..5).map(|k| (k as f64 * 1.7 + seed as f64).sin()).collect();
            match select_action(&q, eps, &mask, &mut r) {
                Ok(a) => prop_assert!(mask[a]),
                Err(_) => prop_assert!(mask.iter().all(|m| !m)),
            }
        }
    }
}
