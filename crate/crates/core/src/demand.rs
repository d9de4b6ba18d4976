//! Seeded customer-wave generation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{Order, OrderId, TimeWindow};
use crate::geometry::Point;
use crate::rng::{self, tag, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandParams {
    pub customers_per_wave: (u32, u32),
    pub demand_range: (u32, u32),
    /// Window opening offset, as fractions of `T`.
    pub window_offset: (f64, f64),
    /// Window width, as fractions of `T`.
    pub window_width: (f64, f64),
    /// Upper-right, upper-left, lower-left, lower-right.
    pub quadrant_weights: [f64; 4],
}

impl Default for DemandParams {
    fn default() -> Self {
        Self {
            customers_per_wave: (20, 40),
            demand_range: (1, 10),
            window_offset: (0.2, 0.8),
            window_width: (0.1, 2.0),
            quadrant_weights: UNIFORM_WEIGHTS,
        }
    }
}

pub const UNIFORM_WEIGHTS: [f64; 4] = [0.25; 4];
/// Test-time skew: most customers in the upper two quadrants.
pub const SKEWED_WEIGHTS: [f64; 4] = [0.4, 0.4, 0.1, 0.1];

impl DemandParams {
    pub fn full_scale() -> Self {
        Self { customers_per_wave: (200, 300), ..Self::default() }
    }

    pub fn fixed(customers: u32) -> Self {
        Self { customers_per_wave: (customers, customers), ..Self::default() }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let (lo, hi) = self.customers_per_wave;
        if lo > hi {
            v.push(format!("customers per wave: low {lo} above high {hi}"));
        }
        let (dlo, dhi) = self.demand_range;
        if dlo == 0 || dlo > dhi {
            v.push(format!("demand range ({dlo}, {dhi}) invalid"));
        }
        if self.quadrant_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            v.push("quadrant weights must be non-negative".into());
        }
        let sum: f64 = self.quadrant_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            v.push(format!("quadrant weights sum to {sum}, expected 1"));
        }
        for (name, (a, b)) in [("window offset", self.window_offset), ("window width", self.window_width)] {
            if !(a > 0.0 && a <= b) {
                v.push(format!("{name} ({a}, {b}) invalid"));
            }
        }
        v
    }
}

/// Independent streams for counts, locations, demands and windows.
#[derive(Debug, Clone)]
pub struct DemandSampler {
    counts: Rng,
    locations: Rng,
    demands: Rng,
    windows: Rng,
    next_id: u64,
}

impl DemandSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            counts: rng::substream(seed, tag::COUNTS),
            locations: rng::substream(seed, tag::LOCATIONS),
            demands: rng::substream(seed, tag::DEMANDS),
            windows: rng::substream(seed, tag::WINDOWS),
            next_id: 0,
        }
    }

    /// Generates the customers of the wave starting at `t`. Demands are
    /// capped at `capacity` so a single vehicle can always carry an order.
    pub fn sample_wave(&mut self, t: f64, wave_period: f64, params: &DemandParams, capacity: u32) -> Vec<Order> {
        let (lo, hi) = params.customers_per_wave;
        let n = self.counts.random_range(lo..=hi);
        let quadrant = WeightedIndex::new(params.quadrant_weights).expect("validated weights");
        let (dlo, dhi) = params.demand_range;
        let dhi = dhi.min(capacity).max(dlo);
        (0..n)
            .map(|_| {
                let q = quadrant.sample(&mut self.locations);
                let location = sample_in_quadrant(&mut self.locations, q);
                let demand = self.demands.random_range(dlo..=dhi);
                let window = sample_window_with(&mut self.windows, t, wave_period, params.window_offset, params.window_width);
                let id = OrderId(self.next_id);
                self.next_id += 1;
                Order::new(id, demand, location, t, window)
            })
            .collect()
    }
}

/// Uniform point inside quadrant `q`, generated on the raw grid.
fn sample_in_quadrant(rng: &mut Rng, q: usize) -> Point {
    let (sx, sy) = match q {
        0 => (1.0, 1.0),
        1 => (-1.0, 1.0),
        2 => (-1.0, -1.0),
        _ => (1.0, -1.0),
    };
    let x: f64 = rng.random_range(0.0..=100.0);
    let y: f64 = rng.random_range(0.0..=100.0);
    Point::from_raw(sx * x, sy * y)
}

fn sample_window_with(rng: &mut Rng, t: f64, period: f64, offset: (f64, f64), width: (f64, f64)) -> TimeWindow {
    let open = t + rng.random_range(offset.0 * period..=offset.1 * period);
    let close = open + rng.random_range(width.0 * period..=width.1 * period);
    TimeWindow::new(open, close)
}

/// `[t + U(0.2T, 0.8T), open + U(0.1T, 2T)]`.
pub fn sample_time_window(rng: &mut Rng, t: f64, wave_period: f64) -> TimeWindow {
    sample_window_with(rng, t, wave_period, (0.2, 0.8), (0.1, 2.0))
}

pub fn sample_demand(rng: &mut Rng) -> u32 {
    rng.random_range(1..=10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_bounds() {
        let mut r = rng::seeded(3);
        let (mut lo, mut hi, mut wlo, mut whi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for _ in 0..100_000 {
            let w = sample_time_window(&mut r, 0.0, 100.0);
            lo = lo.min(w.open);
            hi = hi.max(w.open);
            wlo = wlo.min(w.close - w.open);
            whi = whi.max(w.close - w.open);
        }
        assert!(lo >= 20.0 && hi <= 80.0, "{lo} {hi}");
        assert!(lo < 20.1 && hi > 79.9);
        assert!(wlo >= 10.0 && whi <= 200.0);
        let w = sample_time_window(&mut r, 500.0, 100.0);
        assert!((520.0..=580.0).contains(&w.open));
    }

    #[test]
    fn demand_is_uniform_on_one_to_ten() {
        let mut r = rng::seeded(11);
        let mut counts = [0usize; 11];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_demand(&mut r) as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        for c in &counts[1..] {
            assert!((*c as f64 / n as f64 - 0.1).abs() < 0.01);
        }
        let mean: f64 = counts.iter().enumerate().map(|(k, c)| (k * c) as f64).sum::<f64>() / n as f64;
        assert!((mean - 5.5).abs() < 0.05, "{mean}");
    }

    #[test]
    fn full_scale_episode_has_about_2500_customers() {
        let mut s = DemandSampler::new(1);
        let p = DemandParams::full_scale();
        let total: usize = (0..10).map(|k| s.sample_wave(100.0 * k as f64, 100.0, &p, 80).len()).sum();
        assert!((2300..=2700).contains(&total), "{total}");
    }

    #[test]
    fn orders_are_well_formed() {
        let mut s = DemandSampler::new(5);
        let orders = s.sample_wave(200.0, 100.0, &DemandParams::default(), 6);
        assert!(!orders.is_empty());
        for o in &orders {
            assert!(o.location.is_valid());
            assert!((1..=6).contains(&o.demand));
            assert!(o.window.open < o.window.close);
            assert!(o.created_at < o.window.open);
        }
    }

    fn quadrant_counts(weights: [f64; 4], draws: u32) -> [u32; 4] {
        let mut s = DemandSampler::new(9);
        let p = DemandParams { quadrant_weights: weights, ..DemandParams::fixed(draws) };
        let mut c = [0; 4];
        for o in s.sample_wave(0.0, 100.0, &p, 40) {
            c[o.location.quadrant()] += 1;
        }
        c
    }

    #[test]
    fn uniform_weights_pass_chi_square() {
        let c = quadrant_counts(UNIFORM_WEIGHTS, 10_000);
        let e = 2500.0;
        let chi2: f64 = c.iter().map(|&k| (k as f64 - e).powi(2) / e).sum();
        // 3 degrees of freedom, alpha = 0.01
        assert!(chi2 < 11.345, "{chi2} {c:?}");
    }

    #[test]
    fn skewed_weights_favour_upper_quadrants() {
        let c = quadrant_counts(SKEWED_WEIGHTS, 10_000);
        let upper = (c[0] + c[1]) as f64 / 10_000.0;
        assert!((upper - 0.8).abs() < 0.02, "{upper}");
    }

    #[test]
    fn same_seed_same_waves() {
        let p = DemandParams::default();
        let run = || {
            let mut s = DemandSampler::new(42);
            (0..3).flat_map(|k| s.sample_wave(100.0 * k as f64, 100.0, &p, 40)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn param_validation() {
        assert!(DemandParams::default().violations().is_empty());
        let bad = DemandParams { quadrant_weights: [0.3, 0.3, 0.2, 0.1], customers_per_wave: (5, 2), ..Default::default() };
        assert_eq!(bad.violations().len(), 2);
    }
}
