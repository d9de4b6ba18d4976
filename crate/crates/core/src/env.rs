//! World model: warehouses, inventory, vehicles, clock, order lifecycle and
//! trip execution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::geometry::{distance, Point, QUADRANT_CENTERS};

/// Slack used when replaying floating-point schedules.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrderId(pub u64);

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub open: f64,
    pub close: f64,
}

impl TimeWindow {
    pub fn new(open: f64, close: f64) -> Self {
        Self { open, close }
    }

    /// Service may start exactly at `close`.
    pub fn admits(&self, t: f64) -> bool {
        t >= self.open - TIME_EPS && t <= self.close + TIME_EPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OrderState {
    Open,
    Assigned(usize),
    Served { time: f64, trip: TripId },
    Dropped,
}

impl OrderState {
    pub fn name(&self) -> &'static str {
        match self {
            OrderState::Open => "open",
            OrderState::Assigned(_) => "assigned",
            OrderState::Served { .. } => "served",
            OrderState::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub demand: u32,
    pub location: Point,
    pub created_at: f64,
    pub window: TimeWindow,
    pub state: OrderState,
    pub defer_count: u32,
}

impl Order {
    pub fn new(id: OrderId, demand: u32, location: Point, created_at: f64, window: TimeWindow) -> Self {
        Self { id, demand, location, created_at, window, state: OrderState::Open, defer_count: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warehouse {
    pub id: usize,
    pub location: Point,
    pub inventory: u32,
    pub max_inventory: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub home_depot: usize,
    pub capacity: u32,
    pub speed: f64,
    pub available_at: f64,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub order: OrderId,
    pub demand: u32,
    pub arrival: f64,
    pub service_start: f64,
}

/// One executed vehicle tour: depot, customers in visiting order, and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: TripId,
    pub vehicle: VehicleId,
    pub depot: usize,
    pub start_time: f64,
    pub visits: Vec<Visit>,
    /// `leg_distances[0]` is depot to first customer.
    pub leg_distances: Vec<f64>,
    pub return_distance: f64,
    pub total_load: u32,
    pub end_time: f64,
}

impl Trip {
    /// Round-trip distance `Z`.
    pub fn total_distance(&self) -> f64 {
        self.leg_distances.iter().sum::<f64>() + self.return_distance
    }
}

pub fn capacity_utilization(trip: &Trip, capacity: u32) -> f64 {
    f64::from(trip.total_load) / f64::from(capacity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestockPolicy {
    EveryWave,
    HalfWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub n_warehouses: usize,
    /// Wave period `T`.
    pub wave_period: f64,
    /// Episode length `τ`.
    pub horizon: f64,
    pub vehicle_capacity: u32,
    pub vehicle_speed: f64,
    pub service_time: f64,
    pub max_inventory: u32,
    pub restock: RestockPolicy,
}

impl Default for EpisodeConfig {
    /// Desk-scale profile.
    fn default() -> Self {
        Self {
            n_warehouses: 4,
            wave_period: 100.0,
            horizon: 300.0,
            vehicle_capacity: 40,
            vehicle_speed: 0.1,
            service_time: 1.0,
            max_inventory: 500,
            restock: RestockPolicy::EveryWave,
        }
    }
}

impl EpisodeConfig {
    /// Full-scale episode length (10 waves of `T = 100`).
    pub fn full_scale() -> Self {
        Self { horizon: 1000.0, ..Self::default() }
    }

    pub fn waves(&self) -> usize {
        (self.horizon / self.wave_period).round() as usize
    }

    pub fn restock_period(&self) -> f64 {
        match self.restock {
            RestockPolicy::EveryWave => self.wave_period,
            RestockPolicy::HalfWave => self.wave_period / 2.0,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(1..=4).contains(&self.n_warehouses) {
            v.push(format!("warehouses must be 1..=4, got {}", self.n_warehouses));
        }
        if !(self.wave_period > 0.0) {
            v.push(format!("wave period must be positive, got {}", self.wave_period));
        }
        if !(self.horizon > 0.0) {
            v.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.wave_period >= self.horizon {
            v.push(format!("wave period {} must be below horizon {}", self.wave_period, self.horizon));
        } else if self.wave_period > 0.0 {
            let ratio = self.horizon / self.wave_period;
            if (ratio - ratio.round()).abs() > 1e-9 {
                v.push(format!("wave period {} does not divide horizon {}", self.wave_period, self.horizon));
            }
        }
        if self.vehicle_capacity == 0 {
            v.push("vehicle capacity must be positive".into());
        }
        if !(self.vehicle_speed > 0.0) || !self.vehicle_speed.is_finite() {
            v.push(format!("vehicle speed must be positive, got {}", self.vehicle_speed));
        }
        if !(self.service_time > 0.0) || !self.service_time.is_finite() {
            v.push(format!("service time must be positive, got {}", self.service_time));
        }
        if self.max_inventory == 0 {
            v.push("max inventory must be positive".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

/// A stop handed to the schedule computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub location: Point,
    pub window: TimeWindow,
    pub demand: u32,
}

/// Timing of a customer sequence driven from a depot at a given start time.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSchedule {
    /// `(arrival, service_start)` per stop.
    pub times: Vec<(f64, f64)>,
    pub legs: Vec<f64>,
    pub return_distance: f64,
    pub end_time: f64,
    pub load: u32,
}

impl RouteSchedule {
    pub fn total_distance(&self) -> f64 {
        self.legs.iter().sum::<f64>() + self.return_distance
    }
}

/// Earliest-service schedule: the vehicle waits at a customer until its
/// window opens, then serves for `service_time`.
pub fn schedule_route(depot: Point, start: f64, stops: &[Stop], speed: f64, service_time: f64) -> RouteSchedule {
    let mut times = Vec::with_capacity(stops.len());
    let mut legs = Vec::with_capacity(stops.len());
    let mut pos = depot;
    let mut ready = start;
    let mut load = 0;
    for s in stops {
        let leg = distance(pos, s.location);
        let arrival = ready + leg / speed;
        let service = arrival.max(s.window.open);
        times.push((arrival, service));
        legs.push(leg);
        load += s.demand;
        pos = s.location;
        ready = service + service_time;
    }
    let return_distance = if stops.is_empty() { 0.0 } else { distance(pos, depot) };
    RouteSchedule { times, legs, return_distance, end_time: ready + return_distance / speed, load }
}

/// Constraint violations of a computed schedule.
pub fn schedule_violations(ids: &[OrderId], stops: &[Stop], sched: &RouteSchedule, capacity: u32) -> Vec<Violation> {
    let mut v = Vec::new();
    if sched.load > capacity {
        v.push(Violation::Capacity { load: sched.load, capacity });
    }
    for ((id, s), &(_, start)) in ids.iter().zip(stops).zip(&sched.times) {
        if !s.window.admits(start) {
            v.push(Violation::TimeWindow { order: *id, service_start: start, open: s.window.open, close: s.window.close });
        }
    }
    v
}

/// Counts of orders by lifecycle state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Census {
    pub generated: usize,
    pub open: usize,
    pub assigned: usize,
    pub served: usize,
    pub dropped: usize,
}

impl Census {
    pub fn is_conserved(&self) -> bool {
        self.generated == self.open + self.assigned + self.served + self.dropped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeferOutcome {
    Deferred,
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripPlan {
    pub depot: usize,
    pub vehicle: VehicleId,
    pub start_time: f64,
    pub orders: Vec<OrderId>,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub config: EpisodeConfig,
    pub clock: f64,
    pub warehouses: Vec<Warehouse>,
    pub fleets: Vec<Vec<Vehicle>>,
    pub orders: BTreeMap<OrderId, Order>,
    pub trips: Vec<Trip>,
    next_vehicle: u32,
    next_trip: u64,
}

impl WorldState {
    pub fn new(config: EpisodeConfig) -> Result<Self> {
        config.validate()?;
        let warehouses = QUADRANT_CENTERS
            .iter()
            .take(config.n_warehouses)
            .enumerate()
            .map(|(id, &location)| Warehouse {
                id,
                location,
                inventory: config.max_inventory,
                max_inventory: config.max_inventory,
            })
            .collect();
        Ok(Self {
            fleets: vec![Vec::new(); config.n_warehouses],
            config,
            clock: 0.0,
            warehouses,
            orders: BTreeMap::new(),
            trips: Vec::new(),
            next_vehicle: 0,
            next_trip: 0,
        })
    }

    pub fn restock(&mut self) {
        for w in &mut self.warehouses {
            w.inventory = w.max_inventory;
        }
    }

    pub fn add_orders(&mut self, orders: impl IntoIterator<Item = Order>) {
        for o in orders {
            let prev = self.orders.insert(o.id, o);
            assert!(prev.is_none(), "duplicate order id");
        }
    }

    pub fn order(&self, id: OrderId) -> Result<&Order> {
        self.orders.get(&id).ok_or(Error::UnknownOrder(id))
    }

    fn order_mut(&mut self, id: OrderId) -> Result<&mut Order> {
        self.orders.get_mut(&id).ok_or(Error::UnknownOrder(id))
    }

    /// Open orders in first-come-first-served order (creation time, then id).
    pub fn open_orders_fcfs(&self) -> Vec<OrderId> {
        let mut open: Vec<&Order> = self.orders.values().filter(|o| o.state == OrderState::Open).collect();
        open.sort_by(|a, b| a.created_at.total_cmp(&b.created_at).then(a.id.cmp(&b.id)));
        open.into_iter().map(|o| o.id).collect()
    }

    pub fn assigned_to(&self, depot: usize) -> Vec<OrderId> {
        self.orders
            .values()
            .filter(|o| o.state == OrderState::Assigned(depot))
            .map(|o| o.id)
            .collect()
    }

    pub fn assign_order(&mut self, id: OrderId, warehouse: usize) -> Result<()> {
        let order = self.order(id)?;
        if order.state != OrderState::Open {
            return Err(Error::OrderState { order: id, state: order.state.name(), expected: "open" });
        }
        let demand = order.demand;
        let wh = self
            .warehouses
            .get_mut(warehouse)
            .ok_or_else(|| Error::AgentMismatch(format!("no warehouse {warehouse}")))?;
        if wh.inventory < demand {
            return Err(Error::Infeasible { order: id, warehouse, inventory: wh.inventory, demand });
        }
        wh.inventory -= demand;
        self.order_mut(id)?.state = OrderState::Assigned(warehouse);
        Ok(())
    }

    /// Holds an order for the next decision epoch, or drops it when its
    /// window closes before that epoch.
    pub fn defer_order(&mut self, id: OrderId, now: f64) -> Result<DeferOutcome> {
        let next_epoch = now + self.config.wave_period;
        let order = self.order_mut(id)?;
        if order.state != OrderState::Open {
            return Err(Error::OrderState { order: id, state: order.state.name(), expected: "open" });
        }
        if order.window.close >= next_epoch {
            order.defer_count += 1;
            Ok(DeferOutcome::Deferred)
        } else {
            order.state = OrderState::Dropped;
            Ok(DeferOutcome::Dropped)
        }
    }

    /// Drops an open or assigned order. Reserved inventory goes back to the
    /// warehouse.
    pub fn drop_order(&mut self, id: OrderId) -> Result<()> {
        let order = self.order_mut(id)?;
        let prev = order.state;
        match prev {
            OrderState::Open => {}
            OrderState::Assigned(_) => {}
            other => return Err(Error::OrderState { order: id, state: other.name(), expected: "open or assigned" }),
        }
        order.state = OrderState::Dropped;
        let demand = order.demand;
        if let OrderState::Assigned(w) = prev {
            let wh = &mut self.warehouses[w];
            wh.inventory = (wh.inventory + demand).min(wh.max_inventory);
        }
        Ok(())
    }

    /// Drops every unserved order whose window closed strictly before `now`.
    pub fn drop_expired(&mut self, now: f64) -> Vec<OrderId> {
        let expired: Vec<OrderId> = self
            .orders
            .values()
            .filter(|o| matches!(o.state, OrderState::Open | OrderState::Assigned(_)) && o.window.close < now)
            .map(|o| o.id)
            .collect();
        for &id in &expired {
            self.drop_order(id).expect("expired order is open or assigned");
        }
        expired
    }

    /// Idle vehicle at `depot` (earliest `available_at`, then lowest id), or
    /// a freshly spawned one.
    pub fn acquire_vehicle(&mut self, depot: usize, at: f64) -> VehicleId {
        let idle = self.fleets[depot]
            .iter()
            .filter(|v| v.available_at <= at + TIME_EPS)
            .min_by(|a, b| a.available_at.total_cmp(&b.available_at).then(a.id.cmp(&b.id)));
        if let Some(v) = idle {
            return v.id;
        }
        let id = VehicleId(self.next_vehicle);
        self.next_vehicle += 1;
        self.fleets[depot].push(Vehicle {
            id,
            home_depot: depot,
            capacity: self.config.vehicle_capacity,
            speed: self.config.vehicle_speed,
            available_at: at,
            position: self.warehouses[depot].location,
        });
        id
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&Vehicle> {
        self.fleets.iter().flatten().find(|v| v.id == id)
    }

    pub fn has_idle_vehicle(&self, depot: usize, at: f64) -> bool {
        self.fleets[depot].iter().any(|v| v.available_at <= at + TIME_EPS)
    }

    pub fn vehicles_spawned(&self) -> usize {
        self.next_vehicle as usize
    }

    /// Runs a planned tour. Nothing is mutated unless every constraint holds.
    pub fn execute_trip(&mut self, plan: &TripPlan) -> Result<Trip> {
        let mut violations = Vec::new();
        let depot_loc = self.warehouses[plan.depot].location;
        match self.fleets[plan.depot].iter().find(|v| v.id == plan.vehicle) {
            Some(v) if v.available_at > plan.start_time + TIME_EPS => {
                violations.push(Violation::VehicleBusy { available_at: v.available_at, start: plan.start_time })
            }
            Some(_) => {}
            None => return Err(Error::AgentMismatch(format!("vehicle {:?} not at depot {}", plan.vehicle, plan.depot))),
        }
        let mut seen = BTreeSet::new();
        let mut stops = Vec::with_capacity(plan.orders.len());
        for &id in &plan.orders {
            if !seen.insert(id) {
                violations.push(Violation::Duplicate(id));
                continue;
            }
            match self.orders.get(&id) {
                None => violations.push(Violation::UnknownOrder(id)),
                Some(o) if o.state != OrderState::Assigned(plan.depot) => violations.push(Violation::NotAssigned(id)),
                Some(o) => stops.push(Stop { location: o.location, window: o.window, demand: o.demand }),
            }
        }
        if !violations.is_empty() {
            return Err(Error::TripRejected(violations));
        }
        let sched = schedule_route(depot_loc, plan.start_time, &stops, self.config.vehicle_speed, self.config.service_time);
        let violations = schedule_violations(&plan.orders, &stops, &sched, self.config.vehicle_capacity);
        if !violations.is_empty() {
            return Err(Error::TripRejected(violations));
        }

        let trip_id = TripId(self.next_trip);
        self.next_trip += 1;
        let visits = plan
            .orders
            .iter()
            .zip(&stops)
            .zip(&sched.times)
            .map(|((&order, s), &(arrival, service_start))| Visit { order, demand: s.demand, arrival, service_start })
            .collect::<Vec<_>>();
        for v in &visits {
            self.orders.get_mut(&v.order).expect("checked above").state =
                OrderState::Served { time: v.service_start, trip: trip_id };
        }
        let vehicle = self.fleets[plan.depot].iter_mut().find(|v| v.id == plan.vehicle).expect("checked above");
        vehicle.available_at = sched.end_time;
        let trip = Trip {
            id: trip_id,
            vehicle: plan.vehicle,
            depot: plan.depot,
            start_time: plan.start_time,
            visits,
            leg_distances: sched.legs,
            return_distance: sched.return_distance,
            total_load: sched.load,
            end_time: sched.end_time,
        };
        self.trips.push(trip.clone());
        Ok(trip)
    }

    pub fn census(&self) -> Census {
        let mut c = Census { generated: self.orders.len(), ..Census::default() };
        for o in self.orders.values() {
            match o.state {
                OrderState::Open => c.open += 1,
                OrderState::Assigned(_) => c.assigned += 1,
                OrderState::Served { .. } => c.served += 1,
                OrderState::Dropped => c.dropped += 1,
            }
        }
        c
    }
}

/// Replays an executed trip against the distance function and order data,
/// independently of the schedule that produced it.
pub fn validate_trip(trip: &Trip, orders: &BTreeMap<OrderId, Order>, depot: Point, config: &EpisodeConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    if trip.leg_distances.len() != trip.visits.len() {
        v.push(Violation::LegCount { legs: trip.leg_distances.len(), visits: trip.visits.len() });
    }
    let mut load = 0;
    let mut prev: Option<(Point, f64)> = None;
    for visit in &trip.visits {
        let Some(o) = orders.get(&visit.order) else {
            v.push(Violation::UnknownOrder(visit.order));
            continue;
        };
        load += o.demand;
        if !o.window.admits(visit.service_start) {
            v.push(Violation::TimeWindow {
                order: o.id,
                service_start: visit.service_start,
                open: o.window.open,
                close: o.window.close,
            });
        }
        let earliest = match prev {
            None => trip.start_time + distance(depot, o.location) / config.vehicle_speed,
            Some((p, t)) => t + config.service_time + distance(p, o.location) / config.vehicle_speed,
        };
        if visit.service_start < earliest - TIME_EPS {
            v.push(Violation::TravelTime { order: o.id, service_start: visit.service_start, earliest });
        }
        prev = Some((o.location, visit.service_start));
    }
    if load > config.vehicle_capacity {
        v.push(Violation::Capacity { load, capacity: config.vehicle_capacity });
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EpisodeConfig {
        EpisodeConfig { vehicle_capacity: 40, vehicle_speed: 0.1, service_time: 1.0, ..EpisodeConfig::default() }
    }

    fn order(id: u64, demand: u32, x: f64, y: f64, open: f64, close: f64) -> Order {
        Order::new(OrderId(id), demand, Point::new(x, y), 0.0, TimeWindow::new(open, close))
    }

    #[test]
    fn new_world_places_quadrant_warehouses() {
        let w = WorldState::new(EpisodeConfig::default()).unwrap();
        let locs: Vec<_> = w.warehouses.iter().map(|w| (w.location.x, w.location.y)).collect();
        assert_eq!(locs, vec![(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)]);
        assert!(w.warehouses.iter().all(|w| w.inventory == 500));
        assert!(w.fleets.iter().all(|f| f.is_empty()));
        assert_eq!(w.clock, 0.0);
    }

    #[test]
    fn wave_count_and_single_depot() {
        assert_eq!(EpisodeConfig::full_scale().waves(), 10);
        let w = WorldState::new(EpisodeConfig { n_warehouses: 1, ..cfg() }).unwrap();
        assert_eq!(w.warehouses.len(), 1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            EpisodeConfig { wave_period: 300.0, ..cfg() },
            EpisodeConfig { vehicle_capacity: 0, ..cfg() },
            EpisodeConfig { vehicle_speed: -0.1, ..cfg() },
            EpisodeConfig { service_time: 0.0, ..cfg() },
            EpisodeConfig { wave_period: 70.0, ..cfg() },
        ] {
            assert!(matches!(WorldState::new(bad), Err(Error::Config(_))));
        }
    }

    #[test]
    fn restock_resets_inventory() {
        let mut w = WorldState::new(cfg()).unwrap();
        for (wh, inv) in w.warehouses.iter_mut().zip([120, 0, 55, 500]) {
            wh.inventory = inv;
        }
        w.restock();
        assert!(w.warehouses.iter().all(|w| w.inventory == 500));
        w.restock();
        assert!(w.warehouses.iter().all(|w| w.inventory == 500));
    }

    #[test]
    fn assign_checks_inventory_boundary() {
        let mut w = WorldState::new(cfg()).unwrap();
        w.add_orders([order(1, 10, 0.5, 0.4, 10.0, 90.0), order(2, 10, 0.5, 0.4, 10.0, 90.0), order(3, 5, 0.5, 0.4, 10.0, 90.0)]);
        w.warehouses[0].inventory = 10;
        w.assign_order(OrderId(1), 0).unwrap();
        assert_eq!(w.warehouses[0].inventory, 0);
        w.warehouses[0].inventory = 9;
        assert!(matches!(w.assign_order(OrderId(2), 0), Err(Error::Infeasible { .. })));
        assert_eq!(w.order(OrderId(2)).unwrap().state, OrderState::Open);
        w.assign_order(OrderId(3), 1).unwrap();
        assert_eq!(w.warehouses[1].inventory, 495);
        assert!(matches!(w.assign_order(OrderId(3), 1), Err(Error::OrderState { .. })));
    }

    #[test]
    fn defer_or_drop_by_next_epoch() {
        let mut w = WorldState::new(cfg()).unwrap();
        w.add_orders([order(1, 1, 0.1, 0.1, 20.0, 150.0), order(2, 1, 0.1, 0.1, 20.0, 50.0), order(3, 1, 0.1, 0.1, 20.0, 1000.0)]);
        assert_eq!(w.defer_order(OrderId(1), 0.0).unwrap(), DeferOutcome::Deferred);
        assert_eq!(w.order(OrderId(1)).unwrap().defer_count, 1);
        assert_eq!(w.defer_order(OrderId(2), 0.0).unwrap(), DeferOutcome::Dropped);
        assert_eq!(w.order(OrderId(2)).unwrap().state, OrderState::Dropped);
        for k in 0..3 {
            w.defer_order(OrderId(3), 100.0 * k as f64).unwrap();
        }
        assert_eq!(w.order(OrderId(3)).unwrap().defer_count, 3);
        assert!(w.defer_order(OrderId(2), 0.0).is_err());
    }

    #[test]
    fn single_customer_trip_timing() {
        let mut w = WorldState::new(cfg()).unwrap();
        w.add_orders([order(1, 5, 0.5, 0.3, 0.0, 100.0)]);
        w.assign_order(OrderId(1), 0).unwrap();
        let v = w.acquire_vehicle(0, 0.0);
        let trip = w.execute_trip(&TripPlan { depot: 0, vehicle: v, start_time: 0.0, orders: vec![OrderId(1)] }).unwrap();
        assert!((trip.visits[0].arrival - 2.0).abs() < 1e-9);
        assert!((trip.visits[0].service_start - 2.0).abs() < 1e-9);
        assert!((trip.end_time - 5.0).abs() < 1e-9);
        assert!((w.vehicle(v).unwrap().available_at - 5.0).abs() < 1e-9);
        assert!(matches!(w.order(OrderId(1)).unwrap().state, OrderState::Served { .. }));
        assert!(validate_trip(&trip, &w.orders, w.warehouses[0].location, &w.config).is_empty());
    }

    #[test]
    fn waits_for_window_to_open() {
        let mut w = WorldState::new(cfg()).unwrap();
        // d = 0.4 -> arrival at 4
        w.add_orders([order(1, 5, 0.5, 0.1, 50.0, 60.0)]);
        w.assign_order(OrderId(1), 0).unwrap();
        let v = w.acquire_vehicle(0, 36.0);
        let trip = w.execute_trip(&TripPlan { depot: 0, vehicle: v, start_time: 36.0, orders: vec![OrderId(1)] }).unwrap();
        assert!((trip.visits[0].arrival - 40.0).abs() < 1e-9);
        assert_eq!(trip.visits[0].service_start, 50.0);
    }

    #[test]
    fn over_capacity_trip_is_rejected_without_mutation() {
        let mut w = WorldState::new(cfg()).unwrap();
        let ids: Vec<_> = (1..=5).map(OrderId).collect();
        w.add_orders(ids.iter().map(|id| order(id.0, 10, 0.5, 0.4, 0.0, 500.0)));
        for &id in &ids {
            w.assign_order(id, 0).unwrap();
        }
        let v = w.acquire_vehicle(0, 0.0);
        let err = w.execute_trip(&TripPlan { depot: 0, vehicle: v, start_time: 0.0, orders: ids.clone() }).unwrap_err();
        match err {
            Error::TripRejected(v) => assert!(v.iter().any(|x| matches!(x, Violation::Capacity { load: 50, capacity: 40 }))),
            e => panic!("unexpected {e}"),
        }
        assert!(ids.iter().all(|id| w.order(*id).unwrap().state == OrderState::Assigned(0)));
        assert_eq!(w.vehicle(v).unwrap().available_at, 0.0);
        assert!(w.trips.is_empty());
    }

    #[test]
    fn late_window_and_unknown_orders_rejected() {
        let mut w = WorldState::new(cfg()).unwrap();
        w.add_orders([order(1, 5, -0.5, -0.5, 0.0, 5.0)]);
        w.assign_order(OrderId(1), 0).unwrap();
        let v = w.acquire_vehicle(0, 0.0);
        let err = w.execute_trip(&TripPlan { depot: 0, vehicle: v, start_time: 0.0, orders: vec![OrderId(1), OrderId(9)] });
        let Err(Error::TripRejected(vs)) = err else { panic!() };
        assert!(vs.contains(&Violation::UnknownOrder(OrderId(9))));
        let err = w.execute_trip(&TripPlan { depot: 0, vehicle: v, start_time: 0.0, orders: vec![OrderId(1)] });
        let Err(Error::TripRejected(vs)) = err else { panic!() };
        assert!(matches!(vs[0], Violation::TimeWindow { .. }));
    }

    #[test]
    fn utilization_ratio() {
        let trip = |load| Trip {
            id: TripId(0),
            vehicle: VehicleId(0),
            depot: 0,
            start_time: 0.0,
            visits: vec![],
            leg_distances: vec![],
            return_distance: 0.0,
            total_load: load,
            end_time: 0.0,
        };
        assert_eq!(capacity_utilization(&trip(20), 40), 0.5);
        assert_eq!(capacity_utilization(&trip(40), 40), 1.0);
        assert_eq!(capacity_utilization(&trip(10), 40), 0.25);
    }

    #[test]
    fn expiry_is_inclusive_of_window_end() {
        let mut w = WorldState::new(cfg()).unwrap();
        w.add_orders([order(1, 5, 0.1, 0.1, 0.0, 99.0), order(2, 5, 0.1, 0.1, 0.0, 100.0), order(3, 7, 0.1, 0.1, 0.0, 50.0)]);
        w.assign_order(OrderId(3), 2).unwrap();
        let dropped = w.drop_expired(100.0);
        assert_eq!(dropped, vec![OrderId(1), OrderId(3)]);
        assert_eq!(w.order(OrderId(2)).unwrap().state, OrderState::Open);
        assert_eq!(w.warehouses[2].inventory, 500);
        assert!(w.census().is_conserved());
    }

    #[test]
    fn vehicles_are_reused_once_idle() {
        let mut w = WorldState::new(cfg()).unwrap();
        let a = w.acquire_vehicle(1, 0.0);
        w.fleets[1][0].available_at = 50.0;
        let b = w.acquire_vehicle(1, 10.0);
        assert_ne!(a, b);
        assert_eq!(w.acquire_vehicle(1, 60.0), b);
        assert_eq!(w.vehicles_spawned(), 2);
    }
}
