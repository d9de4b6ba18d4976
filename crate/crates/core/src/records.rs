//! Line-oriented CSV records: order dumps, trip logs, decision traces and
//! micro-instance files.
//!
//! Every file starts with a `#` version line, then a header row. Reals are
//! written with six decimals and rows end in LF so equal inputs give
//! byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::env::{capacity_utilization, Order, OrderId, OrderState, TimeWindow, Trip, TripId, WorldState};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::oracle::MicroInstance;
use crate::vrp::RouteOrder;

pub const ORDER_VERSION: &str = "# c2s-orders v1";
pub const TRIP_VERSION: &str = "# c2s-trips v1";
pub const DECISION_VERSION: &str = "# c2s-decisions v1";
pub const INSTANCE_VERSION: &str = "# c2s-instance v1";

pub const ORDER_HEADER: [&str; 10] = ["order_id", "x", "y", "m", "t", "theta_min", "theta_max", "state", "warehouse_id", "served_at"];
pub const TRIP_HEADER: [&str; 8] = ["trip_id", "depot", "vehicle", "start", "orders", "legs", "load", "utilization"];
pub const DECISION_HEADER: [&str; 4] = ["order_id", "state_hash", "action", "reward"];

/// Six-decimal fixed point without a negative zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Writes a version line, a header and rows.
pub fn write_table<P: AsRef<Path>>(path: P, version: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{version}")?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_table`]: version line, header, rows.
pub fn read_table<P: AsRef<Path>>(path: P) -> Result<(String, Vec<String>, Vec<Vec<String>>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut version = String::new();
    reader.read_line(&mut version)?;
    let version = version.trim_end().to_string();
    if !version.starts_with('#') {
        return Err(Error::Parse(format!("missing version line, found {version:?}")));
    }
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, csv::Error>>()?;
    Ok((version, header, rows))
}

fn expect_header(found: &[String], want: &[&str]) -> Result<()> {
    if found.iter().map(String::as_str).eq(want.iter().copied()) {
        Ok(())
    } else {
        Err(Error::Parse(format!("header {found:?}, expected {want:?}")))
    }
}

pub(crate) fn parse<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse(format!("row {line}: bad {what} {field:?}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRecord {
    pub id: OrderId,
    pub x: f64,
    pub y: f64,
    pub demand: u32,
    pub created_at: f64,
    pub window: TimeWindow,
    pub state: String,
    pub warehouse: Option<usize>,
    pub served_at: Option<f64>,
}

impl OrderRecord {
    pub fn from_world(world: &WorldState, o: &Order) -> Self {
        let (warehouse, served_at) = match o.state {
            OrderState::Assigned(w) => (Some(w), None),
            OrderState::Served { time, trip } => (Some(world.trips[trip.0 as usize].depot), Some(time)),
            _ => (None, None),
        };
        Self {
            id: o.id,
            x: o.location.x,
            y: o.location.y,
            demand: o.demand,
            created_at: o.created_at,
            window: o.window,
            state: o.state.name().into(),
            warehouse,
            served_at,
        }
    }

    pub fn from_order(o: &Order) -> Self {
        Self {
            id: o.id,
            x: o.location.x,
            y: o.location.y,
            demand: o.demand,
            created_at: o.created_at,
            window: o.window,
            state: o.state.name().into(),
            warehouse: match o.state {
                OrderState::Assigned(w) => Some(w),
                _ => None,
            },
            served_at: None,
        }
    }

    /// A fresh open order (state and assignment are not restored).
    pub fn to_order(&self) -> Order {
        Order::new(self.id, self.demand, Point::new(self.x, self.y), self.created_at, self.window)
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.id.0.to_string(),
            fmt6(self.x),
            fmt6(self.y),
            self.demand.to_string(),
            fmt6(self.created_at),
            fmt6(self.window.open),
            fmt6(self.window.close),
            self.state.clone(),
            self.warehouse.map(|w| w.to_string()).unwrap_or_default(),
            self.served_at.map(fmt6).unwrap_or_default(),
        ]
    }

    fn from_row(r: &[String], line: usize) -> Result<Self> {
        if r.len() != ORDER_HEADER.len() {
            return Err(Error::Parse(format!("row {line}: {} fields, expected {}", r.len(), ORDER_HEADER.len())));
        }
        Ok(Self {
            id: OrderId(parse(&r[0], "order_id", line)?),
            x: parse(&r[1], "x", line)?,
            y: parse(&r[2], "y", line)?,
            demand: parse(&r[3], "m", line)?,
            created_at: parse(&r[4], "t", line)?,
            window: TimeWindow::new(parse(&r[5], "theta_min", line)?, parse(&r[6], "theta_max", line)?),
            state: r[7].clone(),
            warehouse: opt(&r[8]).map(|s| parse(s, "warehouse_id", line)).transpose()?,
            served_at: opt(&r[9]).map(|s| parse(s, "served_at", line)).transpose()?,
        })
    }
}

pub fn world_orders(world: &WorldState) -> Vec<OrderRecord> {
    world.orders.values().map(|o| OrderRecord::from_world(world, o)).collect()
}

pub fn write_orders<P: AsRef<Path>>(path: P, records: &[OrderRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records.iter().map(OrderRecord::row).collect();
    write_table(path, ORDER_VERSION, &ORDER_HEADER, &rows)
}

pub fn read_orders<P: AsRef<Path>>(path: P) -> Result<Vec<OrderRecord>> {
    let (_, header, rows) = read_table(path)?;
    expect_header(&header, &ORDER_HEADER)?;
    rows.iter().enumerate().map(|(k, r)| OrderRecord::from_row(r, k + 1)).collect()
}

fn opt(s: &str) -> Option<&str> {
    (!s.is_empty()).then_some(s)
}

fn join_ids(ids: impl Iterator<Item = String>) -> String {
    ids.collect::<Vec<_>>().join(" ")
}

pub fn trip_row(trip: &Trip, capacity: u32) -> Vec<String> {
    vec![
        trip.id.0.to_string(),
        trip.depot.to_string(),
        trip.vehicle.0.to_string(),
        fmt6(trip.start_time),
        join_ids(trip.visits.iter().map(|v| v.order.0.to_string())),
        join_ids(trip.leg_distances.iter().map(|&d| fmt6(d))),
        trip.total_load.to_string(),
        fmt6(capacity_utilization(trip, capacity)),
    ]
}

pub fn write_trips<P: AsRef<Path>>(path: P, trips: &[Trip], capacity: u32) -> Result<()> {
    let rows: Vec<Vec<String>> = trips.iter().map(|t| trip_row(t, capacity)).collect();
    write_table(path, TRIP_VERSION, &TRIP_HEADER, &rows)
}

/// One C2S decision with its settled reward.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub order: OrderId,
    pub state_hash: u64,
    pub action: usize,
    pub reward: f64,
}

pub fn write_decisions<P: AsRef<Path>>(path: P, records: &[DecisionRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|d| vec![d.order.0.to_string(), format!("{:016x}", d.state_hash), d.action.to_string(), fmt6(d.reward)])
        .collect();
    write_table(path, DECISION_VERSION, &DECISION_HEADER, &rows)
}

/// Micro-instance: the order-dump schema preceded by a depot/fleet line.
pub fn write_instance<P: AsRef<Path>>(path: P, inst: &MicroInstance) -> Result<()> {
    let version = format!(
        "{INSTANCE_VERSION} depot={},{} capacity={} speed={} service_time={} start={}",
        fmt6(inst.depot.x),
        fmt6(inst.depot.y),
        inst.capacity,
        inst.speed,
        inst.service_time,
        inst.start
    );
    let rows: Vec<Vec<String>> = inst
        .orders
        .iter()
        .map(|o| {
            let order = Order::new(o.id, o.demand, o.location, inst.start, o.window);
            OrderRecord::from_order(&order).row()
        })
        .collect();
    write_table(path, &version, &ORDER_HEADER, &rows)
}

pub fn read_instance<P: AsRef<Path>>(path: P) -> Result<MicroInstance> {
    let (version, header, rows) = read_table(path)?;
    expect_header(&header, &ORDER_HEADER)?;
    let rest = version
        .strip_prefix(INSTANCE_VERSION)
        .ok_or_else(|| Error::Parse(format!("not an instance file: {version:?}")))?;
    let mut depot = None;
    let (mut capacity, mut speed, mut service_time, mut start) = (None, None, None, None);
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field {kv:?}")))?;
        match k {
            "depot" => {
                let (x, y) = v.split_once(',').ok_or_else(|| Error::Parse(format!("bad depot {v:?}")))?;
                depot = Some(Point::new(parse(x, "depot x", 0)?, parse(y, "depot y", 0)?));
            }
            "capacity" => capacity = Some(parse(v, "capacity", 0)?),
            "speed" => speed = Some(parse(v, "speed", 0)?),
            "service_time" => service_time = Some(parse(v, "service_time", 0)?),
            "start" => start = Some(parse(v, "start", 0)?),
            _ => return Err(Error::Parse(format!("unknown header field {k:?}"))),
        }
    }
    let missing = |name: &str| Error::Parse(format!("instance header lacks {name}"));
    let orders = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let rec = OrderRecord::from_row(r, k + 1)?;
            Ok(RouteOrder { id: rec.id, location: Point::new(rec.x, rec.y), demand: rec.demand, window: rec.window })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MicroInstance {
        depot: depot.ok_or_else(|| missing("depot"))?,
        orders,
        capacity: capacity.ok_or_else(|| missing("capacity"))?,
        speed: speed.ok_or_else(|| missing("speed"))?,
        service_time: service_time.ok_or_else(|| missing("service_time"))?,
        start: start.unwrap_or(0.0),
    })
}

/// Trip ids index `WorldState::trips`.
pub fn trip_by_id(world: &WorldState, id: TripId) -> Option<&Trip> {
    world.trips.get(id.0 as usize).filter(|t| t.id == id)
}
