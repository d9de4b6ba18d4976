//! Exact solver for tiny routing instances, used as ground truth.
//!
//! The best visiting order of every order subset is found by a pruned
//! depth-first search; a dynamic program over subsets then picks the
//! cheapest partition into trips.

use rand::Rng as _;

use crate::env::{schedule_route, schedule_violations, OrderId, Stop, TimeWindow};
use crate::error::{Error, Result, Violation};
use crate::geometry::{distance, Point};
use crate::rng::Rng;
use crate::vrp::{plan_distance, vrp_heuristic, RouteOrder, RoutingContext};

pub const MAX_ORDERS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct MicroInstance {
    pub depot: Point,
    pub orders: Vec<RouteOrder>,
    pub capacity: u32,
    pub speed: f64,
    pub service_time: f64,
    /// Dispatch time of every vehicle.
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub cost: f64,
    /// Indices into `orders`, one list per trip.
    pub routes: Vec<Vec<usize>>,
}

impl MicroInstance {
    fn stops(&self, route: &[usize]) -> Vec<Stop> {
        route
            .iter()
            .map(|&i| Stop { location: self.orders[i].location, window: self.orders[i].window, demand: self.orders[i].demand })
            .collect()
    }

    pub fn route_distance(&self, route: &[usize]) -> f64 {
        schedule_route(self.depot, self.start, &self.stops(route), self.speed, self.service_time).total_distance()
    }

    pub fn routing_context(&self) -> RoutingContext {
        RoutingContext::new(self.depot, self.start, self.capacity, self.speed, self.service_time, self.orders.clone())
    }

    /// Random instance with every order individually reachable in time.
    pub fn random(rng: &mut Rng, n: usize, capacity: u32, speed: f64, service_time: f64) -> Self {
        let depot = Point::new(0.5, 0.5);
        let orders = (0..n)
            .map(|k| {
                let location = Point::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
                let direct = distance(depot, location) / speed;
                let open: f64 = rng.random_range(0.0..=60.0);
                let close = open.max(direct) + rng.random_range(5.0..=80.0);
                RouteOrder { id: OrderId(k as u64), location, demand: rng.random_range(1..=10), window: TimeWindow::new(open, close) }
            })
            .collect();
        Self { depot, orders, capacity, speed, service_time, start: 0.0 }
    }
}

/// Cheapest feasible visiting order of the subset `mask`.
fn best_route(inst: &MicroInstance, mask: u32) -> Option<(f64, Vec<usize>)> {
    let load: u32 = (0..inst.orders.len()).filter(|i| mask >> i & 1 == 1).map(|i| inst.orders[i].demand).sum();
    if load > inst.capacity {
        return None;
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut path = Vec::new();
    dfs(inst, mask, inst.depot, inst.start, 0.0, &mut path, &mut best);
    best
}

fn dfs(inst: &MicroInstance, left: u32, pos: Point, ready: f64, dist: f64, path: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
    if left == 0 {
        let total = dist + distance(pos, inst.depot);
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            *best = Some((total, path.clone()));
        }
        return;
    }
    for i in 0..inst.orders.len() {
        if left >> i & 1 == 0 {
            continue;
        }
        let o = &inst.orders[i];
        let leg = distance(pos, o.location);
        if best.as_ref().is_some_and(|(b, _)| dist + leg >= *b) {
            continue;
        }
        let service = (ready + leg / inst.speed).max(o.window.open);
        if !o.window.admits(service) {
            continue;
        }
        path.push(i);
        dfs(inst, left & !(1 << i), o.location, service + inst.service_time, dist + leg, path, best);
        path.pop();
    }
}

/// Minimum total distance serving every order, or `None` when no plan
/// serves them all.
pub fn brute_force(inst: &MicroInstance) -> Result<Option<Solution>> {
    let n = inst.orders.len();
    if n > MAX_ORDERS {
        return Err(Error::InstanceTooLarge(n, MAX_ORDERS));
    }
    let full = (1u32 << n) - 1;
    let routes: Vec<Option<(f64, Vec<usize>)>> = (0..=full).map(|m| if m == 0 { None } else { best_route(inst, m) }).collect();
    // best[m]: cheapest partition of m; the block holding m's lowest bit is enumerated
    let mut best: Vec<Option<(f64, u32)>> = vec![None; full as usize + 1];
    best[0] = Some((0.0, 0));
    for m in 1..=full {
        let low = m & m.wrapping_neg();
        let mut sub = m;
        while sub > 0 {
            if sub & low != 0 {
                if let (Some((c, _)), Some((rest, _))) = (&routes[sub as usize], best[(m ^ sub) as usize]) {
                    let total = c + rest;
                    if best[m as usize].is_none_or(|(b, _)| total < b) {
                        best[m as usize] = Some((total, sub));
                    }
                }
            }
            sub = (sub - 1) & m;
        }
    }
    let Some((cost, _)) = best[full as usize] else { return Ok(None) };
    let mut out = Vec::new();
    let mut m = full;
    while m > 0 {
        let (_, sub) = best[m as usize].expect("reachable");
        out.push(routes[sub as usize].as_ref().expect("feasible block").1.clone());
        m ^= sub;
    }
    Ok(Some(Solution { cost, routes: out }))
}

/// Total distance of the heuristic plan, and whether it served everyone.
pub fn heuristic_cost(inst: &MicroInstance) -> (f64, bool) {
    let ctx = inst.routing_context();
    let plan = vrp_heuristic(&ctx);
    (plan_distance(&ctx, &plan), plan.dropped.is_empty())
}

/// Heuristic routes as indices into `orders`, and the dropped indices.
pub fn heuristic_routes(inst: &MicroInstance) -> (Vec<Vec<usize>>, Vec<usize>) {
    let ctx = inst.routing_context();
    let plan = vrp_heuristic(&ctx);
    let index = |k: usize| inst.orders.iter().position(|o| o.id == ctx.orders[k].id).expect("same orders");
    let routes = plan.routes.iter().map(|r| r.stops.iter().map(|&k| index(k)).collect()).collect();
    (routes, plan.dropped.iter().map(|&k| index(k)).collect())
}

/// Every violated constraint of `routes`: capacity, time windows, and
/// coverage (each order exactly once).
pub fn validate(inst: &MicroInstance, routes: &[Vec<usize>]) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut seen = vec![0usize; inst.orders.len()];
    for route in routes {
        let valid: Vec<usize> = route.iter().copied().filter(|&i| i < inst.orders.len()).collect();
        for &i in route {
            match seen.get_mut(i) {
                Some(s) => *s += 1,
                None => v.push(Violation::UnknownOrder(OrderId(i as u64))),
            }
        }
        let stops = inst.stops(&valid);
        let sched = schedule_route(inst.depot, inst.start, &stops, inst.speed, inst.service_time);
        let ids: Vec<OrderId> = valid.iter().map(|&i| inst.orders[i].id).collect();
        v.extend(schedule_violations(&ids, &stops, &sched, inst.capacity));
    }
    for (i, &s) in seen.iter().enumerate() {
        match s {
            0 => v.push(Violation::Missing(inst.orders[i].id)),
            1 => {}
            _ => v.push(Violation::Duplicate(inst.orders[i].id)),
        }
    }
    v
}
