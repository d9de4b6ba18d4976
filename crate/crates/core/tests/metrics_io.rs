use c2s_core::config::RunConfig;
use c2s_core::metrics::{export_csv, export_summary, read_csv, EpisodeMetrics, COLUMNS};
use c2s_core::orchestrator::{run_episode, Agents, EpisodeSettings};
use c2s_core::records::{read_orders, world_orders, write_orders, write_trips};
use proptest::prelude::*;

#[test]
fn schema_carries_trip_and_reward_breakdown() {
    for c in ["trips", "mean_d", "mean_l", "mean_u", "utilization", "sum_reward", "served_per_trip", "drop_rate"] {
        assert!(COLUMNS.contains(&c), "{c}");
    }
}

#[test]
fn dumps_are_byte_identical_and_readable() {
    let cfg = RunConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let out = run_episode(cfg.combo, &mut Agents::default(), &cfg, &cfg.demand, 77, EpisodeSettings::eval()).unwrap();
        let (o, t, m) = (dir.path().join(format!("o{k}")), dir.path().join(format!("t{k}")), dir.path().join(format!("m{k}")));
        write_orders(&o, &world_orders(&out.world)).unwrap();
        write_trips(&t, &out.world.trips, cfg.env.vehicle_capacity).unwrap();
        export_csv(std::slice::from_ref(&out.metrics), &m).unwrap();
        files.push([o, t, m]);
        let back = read_orders(&files[k][0]).unwrap();
        assert_eq!(back.len(), out.world.orders.len());
        let served = back.iter().filter(|r| r.state == "served").count() as u64;
        assert_eq!(served, out.metrics.served);
    }
    for (a, b) in files[0].iter().zip(&files[1]) {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}

fn metrics() -> impl Strategy<Value = EpisodeMetrics> {
    (0u64..500, 0u64..10, -500.0f64..50.0, -2.2f64..0.0, 0u64..100, 0u64..300, 0.0f64..=1.0).prop_map(
        |(episode, seed, sum_reward, mean_d, trips, generated, utilization)| EpisodeMetrics {
            episode,
            seed,
            sum_reward,
            mean_d,
            trips,
            generated,
            served: generated / 2,
            dropped: generated - generated / 2,
            utilization,
            ..EpisodeMetrics::default()
        },
    )
}

proptest! {
    #[test]
    fn metrics_csv_round_trip(records in prop::collection::vec(metrics(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        export_csv(&records, &p).unwrap();
        let back = read_csv(&p).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            prop_assert_eq!((a.episode, a.seed, a.trips, a.generated), (b.episode, b.seed, b.trips, b.generated));
            prop_assert!((a.sum_reward - b.sum_reward).abs() <= 5e-7);
            prop_assert!((a.utilization - b.utilization).abs() <= 5e-7);
        }
        export_summary(&records, dir.path().join("s.csv")).unwrap();
    }
}
