use c2s_core::env::{schedule_route, schedule_violations, OrderId, Stop, TimeWindow};
use c2s_core::geometry::Point;
use c2s_core::nn::{Activation, DenseNet};
use c2s_core::oracle::{brute_force, MicroInstance};
use c2s_core::rng::seeded;
use c2s_core::vrp::{
    feasible_candidates, plan_distance, settle_trip_rewards, vrp_features, vrp_heuristic, vrp_learned, RouteOrder,
    RoutePlan, RoutingContext, SelectMode, VehicleState, FEATURE_LEN, NET_SIZES,
};
use proptest::prelude::*;

fn order() -> impl Strategy<Value = (f64, f64, u32, f64, f64)> {
    (-1.0f64..=1.0, -1.0f64..=1.0, 1u32..=10, 0.0f64..80.0, 5.0f64..200.0)
}

fn context(raw: &[(f64, f64, u32, f64, f64)], now: f64) -> RoutingContext {
    let orders = raw
        .iter()
        .enumerate()
        .map(|(k, &(x, y, m, a, w))| RouteOrder {
            id: OrderId(k as u64),
            location: Point::new(x, y),
            demand: m,
            window: TimeWindow::new(now + a, now + a + w),
        })
        .collect();
    RoutingContext::new(Point::new(0.5, 0.5), now, 40, 0.1, 1.0, orders)
}

fn check_plan(ctx: &RoutingContext, plan: &RoutePlan) -> Result<(), TestCaseError> {
    let mut count = vec![0; ctx.len()];
    for r in &plan.routes {
        prop_assert!(!r.stops.is_empty());
        let stops: Vec<Stop> = r
            .stops
            .iter()
            .map(|&i| Stop { location: ctx.orders[i].location, window: ctx.orders[i].window, demand: ctx.orders[i].demand })
            .collect();
        let ids: Vec<OrderId> = r.stops.iter().map(|&i| ctx.orders[i].id).collect();
        let sched = schedule_route(ctx.depot, ctx.now, &stops, ctx.speed, ctx.service_time);
        prop_assert!(schedule_violations(&ids, &stops, &sched, ctx.capacity).is_empty());
        for &i in &r.stops {
            count[i] += 1;
        }
    }
    for &i in &plan.dropped {
        count[i] += 1;
    }
    prop_assert!(count.iter().all(|&c| c == 1));
    Ok(())
}

#[test]
fn collinear_customers_single_optimal_trip() {
    let raw = [(0.6, 0.5, 3, 0.0, 500.0), (0.7, 0.5, 3, 0.0, 500.0), (0.8, 0.5, 3, 0.0, 500.0)];
    let ctx = context(&raw, 0.0);
    let plan = vrp_heuristic(&ctx);
    assert_eq!(plan.routes.len(), 1);
    let z = plan_distance(&ctx, &plan);
    assert!((z - 0.6).abs() < 1e-12);
    let inst = MicroInstance { depot: ctx.depot, orders: ctx.orders.clone(), capacity: 40, speed: 0.1, service_time: 1.0, start: 0.0 };
    let best = brute_force(&inst).unwrap().unwrap();
    assert!((best.cost - 0.6).abs() < 1e-12);
}

#[test]
fn capacity_forces_second_trip() {
    let ctx = context(&[(0.6, 0.6, 10, 0.0, 500.0), (0.7, 0.6, 10, 0.0, 500.0)], 0.0);
    let mut ctx = ctx;
    ctx.capacity = 15;
    assert_eq!(vrp_heuristic(&ctx).routes.len(), 2);
}

#[test]
fn trip_reward_settlement() {
    let partials = [0.5, -0.25, 0.1];
    let got = settle_trip_rewards(&partials, -2.0, 0.5);
    let expect = [0.5 + 0.25 * -2.0, -0.25 + 0.5 * -2.0, 0.1 + -2.0];
    for (g, e) in got.iter().zip(expect) {
        assert!((g - e).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn heuristic_plans_are_valid(raw in prop::collection::vec(order(), 0..25), now in 0.0f64..300.0) {
        let ctx = context(&raw, now);
        check_plan(&ctx, &vrp_heuristic(&ctx))?;
    }

    #[test]
    fn learned_plans_are_valid(raw in prop::collection::vec(order(), 0..25), seed in 0u64..1000, eps in 0.0f64..=1.0, mode in 0usize..3) {
        let ctx = context(&raw, 100.0);
        let mut r = seeded(seed);
        let net = DenseNet::new(&NET_SIZES, Activation::Relu, &mut r);
        let mode = [SelectMode::Explore, SelectMode::Exploit, SelectMode::Greedy][mode];
        let plan = vrp_learned(&ctx, &net, eps, mode, &mut r).unwrap();
        check_plan(&ctx, &plan)?;
        for route in &plan.routes {
            prop_assert_eq!(route.features.len(), route.stops.len());
            prop_assert_eq!(route.partials.len(), route.stops.len());
            for f in &route.features {
                prop_assert_eq!(f.len(), FEATURE_LEN);
                prop_assert!(f.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn features_have_seventeen_finite_entries(raw in prop::collection::vec(order(), 1..20)) {
        let ctx = context(&raw, 0.0);
        let vs = VehicleState::fresh(&ctx);
        let done = vec![false; ctx.len()];
        for c in feasible_candidates(&ctx, &vs, &done) {
            let f = vrp_features(&ctx, &vs, &done, c);
            prop_assert_eq!(f.len(), 17);
            prop_assert!(f.iter().all(|v| v.is_finite()));
        }
    }
}
