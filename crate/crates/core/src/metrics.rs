//! Per-episode metrics, CSV export and mean/std aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::records::{fmt6, parse, read_table, write_table};

pub const METRICS_VERSION: &str = "# c2s-metrics v1";
pub const SUMMARY_VERSION: &str = "# c2s-summary v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub seed: u64,
    pub epsilon: f64,
    /// Order rewards: served orders at their weighted sum, drops at the penalty.
    pub sum_reward: f64,
    pub mean_d: f64,
    pub mean_l: f64,
    pub mean_u: f64,
    pub trips: u64,
    pub served_per_trip: f64,
    pub generated: u64,
    pub served: u64,
    pub dropped: u64,
    pub deferred: u64,
    pub utilization: f64,
    pub distance: f64,
    pub vrp_reward: f64,
}

pub const COLUMNS: [&str; 17] = [
    "episode",
    "seed",
    "epsilon",
    "sum_reward",
    "mean_d",
    "mean_l",
    "mean_u",
    "trips",
    "served_per_trip",
    "generated",
    "served",
    "dropped",
    "deferred",
    "utilization",
    "distance",
    "vrp_reward",
    "drop_rate",
];

impl EpisodeMetrics {
    pub fn drop_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.dropped as f64 / self.generated as f64
        }
    }

    /// Numeric columns in [`COLUMNS`] order.
    pub fn values(&self) -> [f64; 17] {
        [
            self.episode as f64,
            self.seed as f64,
            self.epsilon,
            self.sum_reward,
            self.mean_d,
            self.mean_l,
            self.mean_u,
            self.trips as f64,
            self.served_per_trip,
            self.generated as f64,
            self.served as f64,
            self.dropped as f64,
            self.deferred as f64,
            self.utilization,
            self.distance,
            self.vrp_reward,
            self.drop_rate(),
        ]
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.episode.to_string(),
            self.seed.to_string(),
            fmt6(self.epsilon),
            fmt6(self.sum_reward),
            fmt6(self.mean_d),
            fmt6(self.mean_l),
            fmt6(self.mean_u),
            self.trips.to_string(),
            fmt6(self.served_per_trip),
            self.generated.to_string(),
            self.served.to_string(),
            self.dropped.to_string(),
            self.deferred.to_string(),
            fmt6(self.utilization),
            fmt6(self.distance),
            fmt6(self.vrp_reward),
            fmt6(self.drop_rate()),
        ]
    }

    fn from_row(r: &[String], line: usize) -> Result<Self> {
        if r.len() != COLUMNS.len() {
            return Err(Error::Parse(format!("row {line}: {} fields, expected {}", r.len(), COLUMNS.len())));
        }
        Ok(Self {
            episode: parse(&r[0], "episode", line)?,
            seed: parse(&r[1], "seed", line)?,
            epsilon: parse(&r[2], "epsilon", line)?,
            sum_reward: parse(&r[3], "sum_reward", line)?,
            mean_d: parse(&r[4], "mean_d", line)?,
            mean_l: parse(&r[5], "mean_l", line)?,
            mean_u: parse(&r[6], "mean_u", line)?,
            trips: parse(&r[7], "trips", line)?,
            served_per_trip: parse(&r[8], "served_per_trip", line)?,
            generated: parse(&r[9], "generated", line)?,
            served: parse(&r[10], "served", line)?,
            dropped: parse(&r[11], "dropped", line)?,
            deferred: parse(&r[12], "deferred", line)?,
            utilization: parse(&r[13], "utilization", line)?,
            distance: parse(&r[14], "distance", line)?,
            vrp_reward: parse(&r[15], "vrp_reward", line)?,
        })
    }
}

pub fn export_csv<P: AsRef<Path>>(records: &[EpisodeMetrics], path: P) -> Result<()> {
    let rows: Vec<Vec<String>> = records.iter().map(EpisodeMetrics::row).collect();
    write_table(path, METRICS_VERSION, &COLUMNS, &rows)
}

pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Vec<EpisodeMetrics>> {
    let (version, header, rows) = read_table(path)?;
    if version != METRICS_VERSION {
        return Err(Error::Parse(format!("unsupported metrics version {version:?}")));
    }
    if !header.iter().map(String::as_str).eq(COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!("unexpected metrics header {header:?}")));
    }
    rows.iter().enumerate().map(|(k, r)| EpisodeMetrics::from_row(r, k + 1)).collect()
}

/// Mean and population standard deviation of every column.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub key: u64,
    pub count: usize,
    pub mean: [f64; 17],
    pub std: [f64; 17],
}

pub fn mean_std(records: &[&EpisodeMetrics]) -> ([f64; 17], [f64; 17]) {
    let n = records.len() as f64;
    let mut mean = [0.0; 17];
    let mut std = [0.0; 17];
    for r in records {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v / n;
        }
    }
    for r in records {
        for ((s, v), m) in std.iter_mut().zip(r.values()).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    (mean, std.map(f64::sqrt))
}

/// Groups by episode (across seeds) and reduces each group.
pub fn summarize(records: &[EpisodeMetrics]) -> Vec<Summary> {
    let mut groups: BTreeMap<u64, Vec<&EpisodeMetrics>> = BTreeMap::new();
    for r in records {
        groups.entry(r.episode).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, g)| {
            let (mean, std) = mean_std(&g);
            Summary { key, count: g.len(), mean, std }
        })
        .collect()
}

/// Column-wise `metric, mean, std` table over all records.
pub fn export_summary<P: AsRef<Path>>(records: &[EpisodeMetrics], path: P) -> Result<()> {
    let all: Vec<&EpisodeMetrics> = records.iter().collect();
    let (mean, std) = if all.is_empty() { ([0.0; 17], [0.0; 17]) } else { mean_std(&all) };
    let rows: Vec<Vec<String>> = COLUMNS
        .iter()
        .enumerate()
        .skip(2)
        .map(|(k, name)| vec![name.to_string(), fmt6(mean[k]), fmt6(std[k])])
        .collect();
    write_table(path, SUMMARY_VERSION, &["metric", "mean", "std"], &rows)
}
