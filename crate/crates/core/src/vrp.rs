//! Per-depot route construction: the first-feasible heuristic and the
//! learned vehicle-customer value agent.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::env::{OrderId, OrderState, TimeWindow, Trip, TripPlan, WorldState};
use crate::error::Result;
use crate::geometry::{distance, Point};
use crate::nn::{Activation, DenseNet, ReplayBuffer, Sample, Target, DEFAULT_BATCH, DEFAULT_CAPACITY};
use crate::rng::Rng;

pub const FEATURE_LEN: usize = 17;
pub const NET_SIZES: [usize; 6] = [FEATURE_LEN, 128, 64, 32, 8, 1];
pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const TRAIN_STEPS_PER_WAVE: usize = 4;
const RHO_FLOOR: f64 = 1e-3;

pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    "d", "b_d_short", "t", "b_t_short", "ngb", "non_d", "c_left", "drop_far", "drop_cls", "drop_long", "served",
    "cls_dem", "hops", "cls_tim", "urgt", "dfrac", "remote",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteOrder {
    pub id: OrderId,
    pub location: Point,
    pub demand: u32,
    pub window: TimeWindow,
}

/// Everything a depot's routing pass sees. Orders are sorted by window
/// opening, then id.
#[derive(Debug, Clone)]
pub struct RoutingContext {
    pub depot: Point,
    pub now: f64,
    pub capacity: u32,
    pub speed: f64,
    pub service_time: f64,
    pub orders: Vec<RouteOrder>,
    /// Member indices per cluster, leader first.
    pub clusters: Vec<Vec<usize>>,
    pub cluster_of: Vec<usize>,
    pub rho: f64,
    pub d_max: f64,
    pub t_max: f64,
    pub tau_thresh: f64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn pairwise(points: &[Point]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            out.push(distance(points[i], points[j]));
        }
    }
    out
}

/// Greedy leader clustering in the given order. Radius is half the median
/// pairwise distance; `ρ` is the largest member-to-leader distance.
pub fn cluster_orders(locations: &[Point]) -> (Vec<Vec<usize>>, Vec<usize>, f64) {
    let radius = 0.5 * median(pairwise(locations)).unwrap_or(0.0);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut cluster_of = Vec::with_capacity(locations.len());
    for (i, &p) in locations.iter().enumerate() {
        match clusters.iter().position(|c| distance(locations[c[0]], p) <= radius) {
            Some(k) => {
                clusters[k].push(i);
                cluster_of.push(k);
            }
            None => {
                cluster_of.push(clusters.len());
                clusters.push(vec![i]);
            }
        }
    }
    let rho = clusters
        .iter()
        .flat_map(|c| c.iter().map(move |&m| distance(locations[c[0]], locations[m])))
        .fold(0.0, f64::max)
        .max(RHO_FLOOR);
    (clusters, cluster_of, rho)
}

impl RoutingContext {
    pub fn new(depot: Point, now: f64, capacity: u32, speed: f64, service_time: f64, mut orders: Vec<RouteOrder>) -> Self {
        orders.sort_by(|a, b| a.window.open.total_cmp(&b.window.open).then(a.id.cmp(&b.id)));
        let locs: Vec<Point> = orders.iter().map(|o| o.location).collect();
        let (clusters, cluster_of, rho) = cluster_orders(&locs);
        let mut with_depot = locs.clone();
        with_depot.push(depot);
        let d_max = pairwise(&with_depot).into_iter().fold(0.0, f64::max).max(RHO_FLOOR);
        let tau_thresh = match median(pairwise(&locs)) {
            Some(m) => m / speed,
            None => locs.iter().map(|&p| distance(depot, p)).fold(0.0, f64::max) / speed,
        };
        Self {
            depot,
            now,
            capacity,
            speed,
            service_time,
            orders,
            clusters,
            cluster_of,
            rho,
            d_max,
            t_max: d_max / speed + service_time,
            tau_thresh,
        }
    }

    /// Orders assigned to `depot` and not yet served.
    pub fn from_world(world: &WorldState, depot: usize) -> Self {
        let cfg = &world.config;
        let orders = world
            .orders
            .values()
            .filter(|o| o.state == OrderState::Assigned(depot))
            .map(|o| RouteOrder { id: o.id, location: o.location, demand: o.demand, window: o.window })
            .collect();
        Self::new(world.warehouses[depot].location, world.clock, cfg.vehicle_capacity, cfg.vehicle_speed, cfg.service_time, orders)
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// A vehicle part-way through a trip.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub position: Point,
    /// Earliest time the vehicle can leave its position.
    pub ready: f64,
    pub remaining: u32,
    pub last: Option<usize>,
    pub route: Vec<usize>,
}

impl VehicleState {
    pub fn fresh(ctx: &RoutingContext) -> Self {
        Self { position: ctx.depot, ready: ctx.now, remaining: ctx.capacity, last: None, route: Vec::new() }
    }
}

/// `(arrival, service_start)` if `idx` can be served next.
pub fn next_service(ctx: &RoutingContext, vs: &VehicleState, idx: usize) -> Option<(f64, f64)> {
    let o = &ctx.orders[idx];
    if o.demand > vs.remaining {
        return None;
    }
    let arrival = vs.ready + distance(vs.position, o.location) / ctx.speed;
    let service = arrival.max(o.window.open);
    o.window.admits(service).then_some((arrival, service))
}

fn advance(ctx: &RoutingContext, vs: &VehicleState, idx: usize, service: f64) -> VehicleState {
    let o = &ctx.orders[idx];
    let mut route = vs.route.clone();
    route.push(idx);
    VehicleState {
        position: o.location,
        ready: service + ctx.service_time,
        remaining: vs.remaining - o.demand,
        last: Some(idx),
        route,
    }
}

/// Pending orders (`done[i] == false`) the vehicle can serve next.
pub fn feasible_candidates(ctx: &RoutingContext, vs: &VehicleState, done: &[bool]) -> Vec<usize> {
    (0..ctx.len()).filter(|&i| !done[i] && next_service(ctx, vs, i).is_some()).collect()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// The 17 candidate features (see [`FEATURE_NAMES`]).
pub fn vrp_features(ctx: &RoutingContext, vs: &VehicleState, done: &[bool], c: usize) -> Vec<f64> {
    let (arrival, service) = next_service(ctx, vs, c).expect("candidate must be feasible");
    let o = &ctx.orders[c];
    let loc = vs.position;
    let d = distance(loc, o.location);
    let gap = service - vs.ready;
    let cc = ctx.cluster_of[c];
    let members = &ctx.clusters[cc];
    let size = members.len() as f64;
    let cur = vs.last.map(|l| ctx.cluster_of[l]);
    let ngb = cur == Some(cc);
    let pending = |i: usize| !done[i] && i != c;

    let non_d = if ngb {
        (0..ctx.len())
            .filter(|&i| pending(i) && ctx.cluster_of[i] != cc)
            .map(|i| distance(o.location, ctx.orders[i].location))
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    let non_d = if non_d.is_finite() { non_d / ctx.d_max } else { 0.0 };

    let left: Vec<usize> = match cur {
        Some(k) if !ngb => ctx.clusters[k].iter().copied().filter(|&i| pending(i)).collect(),
        _ => Vec::new(),
    };
    let c_left = !left.is_empty();
    let (mut drop_far, mut drop_cls, mut drop_long) = (false, false, false);
    if c_left {
        let n = left.len() as f64;
        let k = cur.expect("left implies a current cluster");
        let mean_depot = left.iter().map(|&i| distance(ctx.depot, ctx.orders[i].location)).sum::<f64>() / n;
        drop_far = mean_depot > distance(ctx.depot, loc);
        drop_cls = left.iter().all(|&i| distance(loc, ctx.orders[i].location) <= ctx.rho);
        let to_outside: f64 = left
            .iter()
            .map(|&i| {
                (0..ctx.len())
                    .filter(|&j| pending(j) && ctx.cluster_of[j] != k)
                    .map(|j| distance(ctx.orders[i].location, ctx.orders[j].location))
                    .fold(f64::INFINITY, f64::min)
            })
            .map(|x| if x.is_finite() { x } else { 0.0 })
            .sum::<f64>()
            / n;
        let to_loc = left.iter().map(|&i| distance(loc, ctx.orders[i].location)).sum::<f64>() / n;
        drop_long = to_outside > to_loc;
    }

    let served = vs.route.iter().filter(|&&i| ctx.cluster_of[i] == cc).count() as f64 / size;
    let cls_need: u32 = members.iter().filter(|&&i| !done[i]).map(|&i| ctx.orders[i].demand).sum();
    let cls_dem = vs.remaining >= cls_need;
    let hops = members
        .iter()
        .filter(|&&i| pending(i))
        .filter(|&&i| match next_service(ctx, vs, i) {
            Some((_, s)) => next_service(ctx, &advance(ctx, vs, i, s), c).is_some(),
            None => false,
        })
        .count() as f64
        / size;
    let after = advance(ctx, vs, c, service);
    let cls_tim = members.iter().filter(|&&i| pending(i)).all(|&i| next_service(ctx, &after, i).is_some());

    let urgt = (o.window.close - arrival) / ctx.t_max;
    let dfrac = (gap / ctx.t_max) / (f64::from(o.demand) / f64::from(ctx.capacity)).max(1.0 / f64::from(ctx.capacity));
    let leader = ctx.orders[members[0]].location;
    let others: Vec<f64> = ctx
        .clusters
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != cc)
        .map(|(_, m)| distance(leader, ctx.orders[m[0]].location))
        .collect();
    let remote = if others.is_empty() { 0.0 } else { others.iter().sum::<f64>() / others.len() as f64 / ctx.d_max };

    vec![
        d / ctx.d_max,
        flag(d <= ctx.rho),
        gap / ctx.t_max,
        flag(gap <= ctx.tau_thresh),
        flag(ngb),
        non_d,
        flag(c_left),
        flag(drop_far),
        flag(drop_cls),
        flag(drop_long),
        served,
        flag(cls_dem),
        hops,
        flag(cls_tim),
        urgt,
        dfrac,
        remote,
    ]
}

/// `(ρ - d_p)/d_max + (τ - t_p)/t_max`.
pub fn vrp_step_reward(rho: f64, d_p: f64, t_p: f64, d_max: f64, t_max: f64, tau_thresh: f64) -> f64 {
    (rho - d_p) / d_max + (tau_thresh - t_p) / t_max
}

/// `2ρ - (Σ d_p + D_return) / (P + 1)`.
pub fn vrp_terminal_reward(rho: f64, legs: &[f64], return_distance: f64) -> f64 {
    let p = legs.len() as f64;
    2.0 * rho - (legs.iter().sum::<f64>() + return_distance) / (p + 1.0)
}

/// Decision `p` of `P` gets `partial_p + γ^(P-p) R_term`.
pub fn settle_trip_rewards(partials: &[f64], r_term: f64, gamma: f64) -> Vec<f64> {
    let n = partials.len();
    partials.iter().enumerate().map(|(k, r)| r + gamma.powi((n - 1 - k) as i32) * r_term).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    /// Uniform over candidates.
    Explore,
    /// Softmax (temperature 1) over values.
    Exploit,
    /// Argmax, first index on ties.
    Greedy,
}

/// Index into `values`, or `None` (close the trip) when there are none.
pub fn vrp_select(values: &[f64], mode: SelectMode, rng: &mut Rng) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let idx: Vec<usize> = (0..values.len()).collect();
    Some(match mode {
        SelectMode::Explore => *idx.choose(rng).expect("non-empty"),
        SelectMode::Exploit => {
            let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
            WeightedIndex::new(&w).expect("finite values").sample(rng)
        }
        SelectMode::Greedy => {
            let mut best = 0;
            for k in 1..values.len() {
                if values[k] > values[best] {
                    best = k;
                }
            }
            best
        }
    })
}

/// One planned trip: visiting order (context indices) and, for learned
/// routing, the feature vector and partial reward of each decision.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlannedRoute {
    pub stops: Vec<usize>,
    pub features: Vec<Vec<f64>>,
    pub partials: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutePlan {
    pub routes: Vec<PlannedRoute>,
    /// Orders no fresh vehicle could serve.
    pub dropped: Vec<usize>,
}

/// Marks orders a fresh vehicle cannot reach in time as dropped.
fn drop_unreachable(ctx: &RoutingContext, done: &mut [bool], dropped: &mut Vec<usize>) {
    let fresh = VehicleState::fresh(ctx);
    for i in 0..ctx.len() {
        if !done[i] && next_service(ctx, &fresh, i).is_none() {
            done[i] = true;
            dropped.push(i);
        }
    }
}

/// Sort by window opening; each vehicle repeatedly serves the first
/// feasible customer and returns when none is left; customers that no
/// fresh vehicle can serve are dropped.
pub fn vrp_heuristic(ctx: &RoutingContext) -> RoutePlan {
    let mut done = vec![false; ctx.len()];
    let mut plan = RoutePlan::default();
    loop {
        drop_unreachable(ctx, &mut done, &mut plan.dropped);
        if done.iter().all(|&d| d) {
            return plan;
        }
        let mut vs = VehicleState::fresh(ctx);
        while let Some(i) = (0..ctx.len()).find(|&i| !done[i] && next_service(ctx, &vs, i).is_some()) {
            let (_, s) = next_service(ctx, &vs, i).expect("checked");
            vs = advance(ctx, &vs, i, s);
            done[i] = true;
        }
        plan.routes.push(PlannedRoute { stops: vs.route, ..PlannedRoute::default() });
    }
}

/// Learned routing. Each step takes a uniform candidate with probability
/// `epsilon`, otherwise `mode` over the net's values.
pub fn vrp_learned(ctx: &RoutingContext, net: &DenseNet, epsilon: f64, mode: SelectMode, rng: &mut Rng) -> Result<RoutePlan> {
    let mut done = vec![false; ctx.len()];
    let mut plan = RoutePlan::default();
    loop {
        drop_unreachable(ctx, &mut done, &mut plan.dropped);
        if done.iter().all(|&d| d) {
            return Ok(plan);
        }
        let mut vs = VehicleState::fresh(ctx);
        let mut route = PlannedRoute::default();
        loop {
            let cands = feasible_candidates(ctx, &vs, &done);
            if cands.is_empty() {
                break;
            }
            let feats: Vec<Vec<f64>> = cands.iter().map(|&c| vrp_features(ctx, &vs, &done, c)).collect();
            let explore = epsilon > 0.0 && rng.random::<f64>() < epsilon;
            let pick = if explore {
                rng.random_range(0..cands.len())
            } else {
                let values = feats.iter().map(|f| net.forward(f).map(|o| o[0])).collect::<Result<Vec<f64>>>()?;
                vrp_select(&values, mode, rng).expect("non-empty candidates")
            };
            let c = cands[pick];
            let (_, s) = next_service(ctx, &vs, c).expect("candidate");
            let d_p = distance(vs.position, ctx.orders[c].location);
            let t_p = s - vs.ready;
            route.partials.push(vrp_step_reward(ctx.rho, d_p, t_p, ctx.d_max, ctx.t_max, ctx.tau_thresh));
            route.features.push(feats.into_iter().nth(pick).expect("picked"));
            vs = advance(ctx, &vs, c, s);
            done[c] = true;
        }
        route.stops = vs.route;
        plan.routes.push(route);
    }
}

/// Total distance of a plan: depot legs plus inter-customer legs.
pub fn plan_distance(ctx: &RoutingContext, plan: &RoutePlan) -> f64 {
    plan.routes
        .iter()
        .map(|r| {
            let mut pos = ctx.depot;
            let mut total = 0.0;
            for &i in &r.stops {
                total += distance(pos, ctx.orders[i].location);
                pos = ctx.orders[i].location;
            }
            total + distance(pos, ctx.depot)
        })
        .sum()
}

/// Settled `(features, reward)` pairs for the value net.
pub type VrpExperience = (Vec<f64>, f64);

#[derive(Debug, Clone)]
pub struct VrpAgent {
    pub net: DenseNet,
    pub replay: ReplayBuffer<VrpExperience>,
    pub lr: f64,
    pub gamma: f64,
    pub batch: usize,
}

impl VrpAgent {
    pub fn new(rng: &mut Rng) -> Self {
        Self::with_net(DenseNet::new(&NET_SIZES, Activation::Tanh, rng))
    }

    pub fn with_net(net: DenseNet) -> Self {
        Self { net, replay: ReplayBuffer::new(DEFAULT_CAPACITY), lr: DEFAULT_LR, gamma: DEFAULT_GAMMA, batch: DEFAULT_BATCH }
    }

    pub fn train_step(&mut self, rng: &mut Rng) -> Result<Option<f64>> {
        if self.replay.len() < self.batch {
            return Ok(None);
        }
        let batch: Vec<VrpExperience> = self.replay.sample(rng, self.batch).into_iter().cloned().collect();
        self.fit(&batch).map(Some)
    }

    /// Regresses the value toward the realized reward.
    pub fn fit(&mut self, batch: &[VrpExperience]) -> Result<f64> {
        let targets: Vec<[f64; 1]> = batch.iter().map(|(_, r)| [*r]).collect();
        let samples: Vec<Sample<'_>> =
            batch.iter().zip(&targets).map(|((f, _), t)| Sample { input: f, target: Target::Full(t) }).collect();
        self.net.train_samples(&samples, self.lr)
    }
}

/// Result of routing one depot in the world.
#[derive(Debug, Clone, Default)]
pub struct DepotRouting {
    pub trips: Vec<Trip>,
    pub dropped: Vec<OrderId>,
    pub experiences: Vec<VrpExperience>,
}

/// Executes a plan: one vehicle per route starting at the current clock,
/// unreachable orders dropped. Learned decisions are settled against each
/// trip's terminal reward.
pub fn apply_plan(world: &mut WorldState, depot: usize, ctx: &RoutingContext, plan: RoutePlan, gamma: f64) -> Result<DepotRouting> {
    let mut out = DepotRouting::default();
    for i in plan.dropped {
        let id = ctx.orders[i].id;
        world.drop_order(id)?;
        out.dropped.push(id);
    }
    for route in plan.routes {
        let vehicle = world.acquire_vehicle(depot, ctx.now);
        let orders = route.stops.iter().map(|&i| ctx.orders[i].id).collect();
        let trip = world.execute_trip(&TripPlan { depot, vehicle, start_time: ctx.now, orders })?;
        if !route.features.is_empty() {
            let r_term = vrp_terminal_reward(ctx.rho, &trip.leg_distances, trip.return_distance);
            let rewards = settle_trip_rewards(&route.partials, r_term, gamma);
            out.experiences.extend(route.features.into_iter().zip(rewards));
        }
        out.trips.push(trip);
    }
    Ok(out)
}
