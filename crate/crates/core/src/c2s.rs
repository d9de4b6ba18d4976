//! Fulfillment-node selection: nearest-warehouse heuristic, DQN agent and
//! reward settlement (including the discounted backup over defers).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::env::{capacity_utilization, OrderId, OrderState, Trip, WorldState};
use crate::error::{Error, Result};
use crate::geometry::{distance, MAX_WAREHOUSE_DISTANCE};
use crate::nn::{Activation, DenseNet, ReplayBuffer, Sample, Target, Transition, DEFAULT_BATCH, DEFAULT_CAPACITY};
use crate::rng::Rng;

pub const DROP_PENALTY: f64 = -10.0;
/// Worst single-customer round trip between a warehouse and a grid corner.
pub const TRIP_SHARE_SCALE: f64 = 2.0 * MAX_WAREHOUSE_DISTANCE;
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_LR: f64 = 1e-3;

/// `7 + 3N`: 19 for four warehouses.
pub fn state_len(n_warehouses: usize) -> usize {
    7 + 3 * n_warehouses
}

pub fn hidden_sizes(n_warehouses: usize) -> Vec<usize> {
    let input = state_len(n_warehouses);
    vec![input, 4 * input, 2 * input, n_warehouses + 1]
}

/// State of an open order at the current clock: embedding, warehouse
/// distances, inventory share, demand, window offsets, clock, defers,
/// per-depot idle-vehicle flags.
pub fn c2s_state(world: &WorldState, id: OrderId, embeddings: &BTreeMap<OrderId, [f64; 2]>) -> Result<Vec<f64>> {
    let order = world.order(id)?;
    if order.state != OrderState::Open {
        return Err(Error::OrderState { order: id, state: order.state.name(), expected: "open" });
    }
    let emb = embeddings.get(&id).ok_or(Error::MissingEmbedding(id))?;
    let cfg = &world.config;
    let now = world.clock;
    let mut s = Vec::with_capacity(state_len(world.warehouses.len()));
    s.extend_from_slice(emb);
    s.extend(world.warehouses.iter().map(|w| distance(w.location, order.location)));
    s.extend(world.warehouses.iter().map(|w| f64::from(w.inventory) / f64::from(cfg.max_inventory)));
    s.push(f64::from(order.demand) / 10.0);
    s.push((order.window.open - now) / cfg.wave_period);
    s.push((order.window.close - now) / cfg.wave_period);
    s.push(now / cfg.horizon);
    s.push(f64::from(order.defer_count) / 10.0);
    s.extend((0..world.warehouses.len()).map(|d| if world.has_idle_vehicle(d, now) { 1.0 } else { 0.0 }));
    Ok(s)
}

/// Legal actions: warehouses holding enough stock, then defer (legal only
/// if the window survives until the next wave).
pub fn feasibility_mask(world: &WorldState, id: OrderId) -> Result<Vec<bool>> {
    let order = world.order(id)?;
    let mut mask: Vec<bool> = world.warehouses.iter().map(|w| w.inventory >= order.demand).collect();
    mask.push(order.window.close >= world.clock + world.config.wave_period);
    Ok(mask)
}

/// Nearest warehouse with enough stock; defer when none has.
pub fn c2s_heuristic(world: &WorldState, id: OrderId) -> Result<usize> {
    let order = world.order(id)?;
    let best = world
        .warehouses
        .iter()
        .filter(|w| w.inventory >= order.demand)
        .map(|w| (distance(w.location, order.location), w.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(best.map_or(world.warehouses.len(), |(_, id)| id))
}

/// Epsilon-greedy over legal actions; ties go to the lowest index.
pub fn select_action(q: &[f64], epsilon: f64, mask: &[bool], rng: &mut Rng) -> Result<usize> {
    let legal: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
    if legal.is_empty() {
        return Err(Error::EmptyMask);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(*legal.choose(rng).expect("non-empty"));
    }
    let mut best = legal[0];
    for &a in &legal[1..] {
        if q[a] > q[best] {
            best = a;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardComponents {
    pub d: f64,
    pub l: f64,
    pub f: f64,
    pub u: f64,
}

impl RewardComponents {
    pub fn check(&self) -> Result<()> {
        let tol = 1e-9;
        let mut bad = Vec::new();
        if !(-MAX_WAREHOUSE_DISTANCE - tol..=0.0).contains(&self.d) {
            bad.push(format!("D = {}", self.d));
        }
        if !(-1.0..=0.0).contains(&self.l) {
            bad.push(format!("L = {}", self.l));
        }
        if self.f != 0.0 && self.f != 1.0 {
            bad.push(format!("F = {}", self.f));
        }
        if !(-1.0..=0.0).contains(&self.u) {
            bad.push(format!("U = {}", self.u));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::RewardRange(bad.join(", ")))
        }
    }
}

/// `a1 (D + L) + F + a2 U`.
pub fn c2s_reward(c: &RewardComponents, a1: f64, a2: f64) -> Result<f64> {
    c.check()?;
    Ok(a1 * (c.d + c.l) + c.f + a2 * c.u)
}

/// Components for an order served on `trip`: warehouse distance, the
/// order's equal share of the round trip, fulfilment, and empty space.
pub fn reward_components(world: &WorldState, id: OrderId, trip: &Trip) -> Result<RewardComponents> {
    let order = world.order(id)?;
    match order.state {
        OrderState::Served { trip: t, .. } if t == trip.id => {}
        s => return Err(Error::OrderState { order: id, state: s.name(), expected: "served on this trip" }),
    }
    let depot = world.warehouses[trip.depot].location;
    let r = trip.visits.len() as f64;
    Ok(RewardComponents {
        d: -distance(depot, order.location),
        l: -(trip.total_distance() / r / TRIP_SHARE_SCALE).clamp(0.0, 1.0),
        f: 1.0,
        u: -(1.0 - capacity_utilization(trip, world.config.vehicle_capacity)).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub state: Vec<f64>,
    pub action: usize,
}

/// Decisions on one order awaiting its outcome.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PendingReward {
    pub defers: Vec<Decision>,
    pub last: Option<Decision>,
}

/// Defer `k` (1-indexed, oldest first) of `h` gets `γ^(h-k+1) base`; the
/// closing decision gets `base`. All samples are terminal.
pub fn settle_deferred(pending: PendingReward, base: f64, gamma: f64) -> Vec<Transition> {
    let h = pending.defers.len() as i32;
    let mut out: Vec<Transition> = pending
        .defers
        .into_iter()
        .enumerate()
        .map(|(k, d)| Transition { state: d.state, action: d.action, reward: gamma.powi(h - k as i32) * base, next_state: None })
        .collect();
    if let Some(d) = pending.last {
        out.push(Transition { state: d.state, action: d.action, reward: base, next_state: None });
    }
    out
}

/// Per-order pending decisions for one episode.
#[derive(Debug, Clone, Default)]
pub struct PendingLedger {
    open: BTreeMap<OrderId, PendingReward>,
    settled: BTreeSet<OrderId>,
}

impl PendingLedger {
    pub fn record_defer(&mut self, order: OrderId, d: Decision) {
        self.open.entry(order).or_default().defers.push(d);
    }

    pub fn record_final(&mut self, order: OrderId, d: Decision) {
        self.open.entry(order).or_default().last = Some(d);
    }

    pub fn contains(&self, order: OrderId) -> bool {
        self.open.contains_key(&order)
    }

    /// Pending defers and whether a final decision is stored.
    pub fn shape(&self, order: OrderId) -> (usize, bool) {
        self.open.get(&order).map_or((0, false), |p| (p.defers.len(), p.last.is_some()))
    }

    pub fn settle(&mut self, order: OrderId, base: f64, gamma: f64) -> Result<Vec<Transition>> {
        if !self.settled.insert(order) {
            return Err(Error::DoubleSettlement(order));
        }
        Ok(self.open.remove(&order).map(|p| settle_deferred(p, base, gamma)).unwrap_or_default())
    }

    pub fn settled_count(&self) -> usize {
        self.settled.len()
    }

    /// Drops chains of orders still open when the episode ends.
    pub fn discard_unsettled(&mut self) -> usize {
        let n = self.open.len();
        self.open.clear();
        n
    }
}

/// Stable FNV-1a hash of a state vector's bit patterns.
pub fn state_hash(state: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in state {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

#[derive(Debug, Clone)]
pub struct C2sAgent {
    pub net: DenseNet,
    pub replay: ReplayBuffer<Transition>,
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
}

impl C2sAgent {
    pub fn new(n_warehouses: usize, rng: &mut Rng) -> Self {
        Self::with_net(DenseNet::new(&hidden_sizes(n_warehouses), Activation::Tanh, rng))
    }

    pub fn with_net(net: DenseNet) -> Self {
        Self { net, replay: ReplayBuffer::new(DEFAULT_CAPACITY), gamma: DEFAULT_GAMMA, lr: DEFAULT_LR, batch: DEFAULT_BATCH }
    }

    pub fn n_actions(&self) -> usize {
        self.net.output_size()
    }

    pub fn act(&self, state: &[f64], epsilon: f64, mask: &[bool], rng: &mut Rng) -> Result<usize> {
        if mask.len() != self.n_actions() {
            return Err(Error::Dimension { expected: self.n_actions(), got: mask.len() });
        }
        let q = self.net.forward(state)?;
        select_action(&q, epsilon, mask, rng)
    }

    /// One Adam step on a replay batch; `None` while the buffer holds
    /// fewer than a batch.
    pub fn train_step(&mut self, rng: &mut Rng) -> Result<Option<f64>> {
        if self.replay.len() < self.batch {
            return Ok(None);
        }
        let batch: Vec<Transition> = self.replay.sample(rng, self.batch).into_iter().cloned().collect();
        self.fit(&batch).map(Some)
    }

    /// Regresses `Q(s, a)` toward `r` (terminal) or `r + γ max Q(s')`.
    pub fn fit(&mut self, batch: &[Transition]) -> Result<f64> {
        let targets = batch
            .iter()
            .map(|t| match &t.next_state {
                None => Ok(t.reward),
                Some(s) => {
                    let q = self.net.forward(s)?;
                    Ok(t.reward + self.gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let samples: Vec<Sample<'_>> = batch
            .iter()
            .zip(&targets)
            .map(|(t, &value)| Sample { input: &t.state, target: Target::Single { index: t.action, value } })
            .collect();
        self.net.train_samples(&samples, self.lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EpisodeConfig, Order, TimeWindow, TripPlan};
    use crate::geometry::Point;
    use crate::rng::seeded;

    fn world_with(orders: &[(f64, f64, u32)]) -> WorldState {
        let mut w = WorldState::new(EpisodeConfig::default()).unwrap();
        w.add_orders(orders.iter().enumerate().map(|(i, &(x, y, m))| {
            Order::new(OrderId(i as u64), m, Point::new(x, y), 0.0, TimeWindow::new(20.0, 250.0))
        }));
        w
    }

    fn emb(w: &WorldState) -> BTreeMap<OrderId, [f64; 2]> {
        w.orders.keys().map(|&k| (k, [0.0, 0.0])).collect()
    }

    #[test]
    fn state_layout() {
        let w = world_with(&[(0.5, 0.5, 4)]);
        let s = c2s_state(&w, OrderId(0), &emb(&w)).unwrap();
        assert_eq!(s.len(), 19);
        assert_eq!(s[2], 0.0);
        assert_eq!(s[10], 0.4);
        assert_eq!(s[14], 0.0);
        assert!(matches!(c2s_state(&w, OrderId(0), &BTreeMap::new()), Err(Error::MissingEmbedding(_))));
    }

    #[test]
    fn heuristic_cases() {
        let mut w = world_with(&[(0.6, 0.6, 5)]);
        assert_eq!(c2s_heuristic(&w, OrderId(0)).unwrap(), 0);
        w.warehouses[0].inventory = 3;
        w.warehouses[1].inventory = 10;
        w.warehouses[3].inventory = 10;
        w.warehouses[2].inventory = 10;
        // UL and LR tie on distance; lower id wins
        assert_eq!(c2s_heuristic(&w, OrderId(0)).unwrap(), 1);
        w.warehouses.iter_mut().for_each(|x| x.inventory = 1);
        assert_eq!(c2s_heuristic(&w, OrderId(0)).unwrap(), 4);
    }

    #[test]
    fn argmax_and_masking() {
        let mut r = seeded(0);
        let q = [0.1, 0.9, 0.2, 0.3, 0.0];
        assert_eq!(select_action(&q, 0.0, &[true; 5], &mut r).unwrap(), 1);
        assert_eq!(select_action(&q, 0.0, &[false, false, false, false, true], &mut r).unwrap(), 4);
        assert_eq!(select_action(&[0.5; 5], 0.0, &[true; 5], &mut r).unwrap(), 0);
        assert!(matches!(select_action(&q, 0.0, &[false; 5], &mut r), Err(Error::EmptyMask)));
    }

    #[test]
    fn uniform_exploration() {
        let mut r = seeded(1);
        let mask = [true, false, true, true, false];
        let mut c = [0usize; 5];
        for _ in 0..10_000 {
            c[select_action(&[0.0; 5], 1.0, &mask, &mut r).unwrap()] += 1;
        }
        assert_eq!(c[1] + c[4], 0);
        for k in [0, 2, 3] {
            assert!((c[k] as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02, "{c:?}");
        }
    }

    #[test]
    fn reward_arithmetic() {
        let c = RewardComponents { d: -0.5, l: -0.2, f: 1.0, u: -0.3 };
        assert!(c2s_reward(&c, 1.0, 1.0).unwrap().abs() < 1e-15);
        assert_eq!(c2s_reward(&c, 0.0, 0.0).unwrap(), 1.0);
        let bad = RewardComponents { u: 0.5, ..c };
        assert!(matches!(c2s_reward(&bad, 1.0, 1.0), Err(Error::RewardRange(_))));
    }

    #[test]
    fn components_of_served_order() {
        let mut w = world_with(&[(0.6, 0.5, 8)]);
        w.assign_order(OrderId(0), 0).unwrap();
        let v = w.acquire_vehicle(0, 0.0);
        let trip = w.execute_trip(&TripPlan { depot: 0, vehicle: v, start_time: 0.0, orders: vec![OrderId(0)] }).unwrap();
        let c = reward_components(&w, OrderId(0), &trip).unwrap();
        assert!((c.d + 0.1).abs() < 1e-12);
        assert!((c.l + 0.2 / TRIP_SHARE_SCALE).abs() < 1e-12);
        assert_eq!(c.f, 1.0);
        assert!((c.u + 1.0 - 8.0 / f64::from(w.config.vehicle_capacity)).abs() < 1e-12);
    }

    #[test]
    fn deferred_settlement() {
        let d = |a| Decision { state: vec![0.0], action: a };
        let p = PendingReward { defers: vec![d(4), d(4)], last: Some(d(1)) };
        let r: Vec<f64> = settle_deferred(p, 1.0, 0.9).iter().map(|t| t.reward).collect();
        assert!((r[0] - 0.81).abs() < 1e-12 && (r[1] - 0.9).abs() < 1e-12 && r[2] == 1.0);
        let p = PendingReward { defers: vec![d(4)], last: None };
        assert!((settle_deferred(p, DROP_PENALTY, 0.9)[0].reward + 9.0).abs() < 1e-12);

        let mut ledger = PendingLedger::default();
        ledger.record_final(OrderId(3), d(0));
        assert_eq!(ledger.settle(OrderId(3), 1.0, 0.9).unwrap().len(), 1);
        assert!(matches!(ledger.settle(OrderId(3), 1.0, 0.9), Err(Error::DoubleSettlement(_))));
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let mut a = C2sAgent::new(4, &mut seeded(2));
        a.gamma = 0.0;
        let batch: Vec<Transition> = (0..8)
            .map(|k| Transition { state: vec![0.1 * k as f64; 19], action: k % 5, reward: 1.0, next_state: Some(vec![0.0; 19]) })
            .collect();
        let first = a.fit(&batch).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = a.fit(&batch).unwrap();
        }
        assert!(last < first);
    }
}
