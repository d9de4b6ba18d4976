use c2s_core::nn::{Activation, DenseNet, ReplayBuffer, Sample, Target};
use c2s_core::rng::seeded;
use proptest::prelude::*;
use rand::Rng as _;

fn random_vec(r: &mut c2s_core::rng::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

#[test]
fn tanh_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let mut r = seeded(seed);
        let net = DenseNet::new(&[4, 8, 3], Activation::Tanh, &mut r);
        let (x, t) = (random_vec(&mut r, 4), random_vec(&mut r, 3));
        let err = net.gradient_check(&x, &t).unwrap();
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn linear_layer_gradient_is_exact() {
    let mut r = seeded(3);
    let net = DenseNet::new(&[5, 2], Activation::Tanh, &mut r);
    let err = net.gradient_check(&random_vec(&mut r, 5), &random_vec(&mut r, 2)).unwrap();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn relu_gradient_away_from_kinks() {
    let mut checked = 0;
    for seed in 0..50 {
        let mut r = seeded(seed);
        let net = DenseNet::new(&[4, 8, 3], Activation::Relu, &mut r);
        let x = random_vec(&mut r, 4);
        if net.kink_margin(&x).unwrap() < 1e-3 {
            continue;
        }
        let err = net.gradient_check(&x, &random_vec(&mut r, 3)).unwrap();
        assert!(err <= 1e-4, "seed {seed}: {err}");
        checked += 1;
    }
    assert!(checked >= 40);
}

#[test]
fn deep_relu_value_net_away_from_kinks() {
    let mut r = seeded(9);
    let mut checked = 0;
    while checked < 10 {
        let net = DenseNet::new(&c2s_core::vrp::NET_SIZES, Activation::Relu, &mut r);
        let x = random_vec(&mut r, 17);
        if net.kink_margin(&x).unwrap() < 1e-3 {
            continue;
        }
        let err = net.gradient_check(&x, &[0.25]).unwrap();
        assert!(err <= 1e-4, "{err}");
        checked += 1;
    }
}

#[test]
fn single_target_gradient_matches_finite_differences() {
    let mut r = seeded(11);
    let mut net = DenseNet::new(&[6, 10, 4], Activation::Tanh, &mut r);
    let x = random_vec(&mut r, 6);
    let sample = [Sample { input: &x, target: Target::Single { index: 2, value: 0.7 } }];
    let (_, grads) = net.loss_and_gradient(&sample).unwrap();
    let h = 1e-6;
    for idx in [0, 7, 23] {
        let orig = net.layers[0].weights[idx];
        net.layers[0].weights[idx] = orig + h;
        let plus = net.loss_and_gradient(&sample).unwrap().0;
        net.layers[0].weights[idx] = orig - h;
        let minus = net.loss_and_gradient(&sample).unwrap().0;
        net.layers[0].weights[idx] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        assert!((numeric - grads[0].weights[idx]).abs() <= 1e-6 * numeric.abs().max(1.0));
    }
}

#[test]
fn replay_holds_one_hundred_thousand() {
    let mut b = ReplayBuffer::new(100_000);
    for k in 0..100_001u32 {
        b.push(k);
    }
    assert_eq!(b.len(), 100_000);
    assert!(b.iter().all(|&k| k != 0));
    assert_eq!(b.total_pushed(), 100_001);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut r = seeded(5);
        let mut net = DenseNet::new(&[3, 8, 1], Activation::Tanh, &mut r);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..32).map(|_| {
            let x = random_vec(&mut r, 3);
            let y = vec![x[0] * x[1] - x[2]];
            (x, y)
        }).collect();
        let losses: Vec<f64> = (0..200).map(|_| net.train_batch(&batch, 1e-2).unwrap()).collect();
        (losses, net.to_text())
    };
    let (a, ta) = run();
    let (b, tb) = run();
    assert_eq!(ta, tb);
    assert_eq!(a, b);
    assert!(a[199] < 0.5 * a[0]);
}

proptest! {
    #[test]
    fn gradient_check_holds_for_random_shapes(seed in 0u64..1000, hidden in 1usize..12, inputs in 1usize..6, outputs in 1usize..4) {
        let mut r = seeded(seed);
        let net = DenseNet::new(&[inputs, hidden, outputs], Activation::Tanh, &mut r);
        let err = net.gradient_check(&random_vec(&mut r, inputs), &random_vec(&mut r, outputs)).unwrap();
        prop_assert!(err <= 1e-4, "{}", err);
    }

    #[test]
    fn checkpoint_text_round_trips(seed in 0u64..1000) {
        let net = DenseNet::new(&[3, 5, 2], Activation::Relu, &mut seeded(seed));
        let back = DenseNet::from_text(&net.to_text()).unwrap();
        let same = back.flat_parameters().iter().zip(net.flat_parameters()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn replay_never_exceeds_capacity(cap in 1usize..64, pushes in 0usize..200, n in 0usize..80, seed in 0u64..100) {
        let mut b = ReplayBuffer::new(cap);
        for k in 0..pushes {
            b.push(k);
        }
        prop_assert_eq!(b.len(), pushes.min(cap));
        let s = b.sample(&mut seeded(seed), n);
        prop_assert_eq!(s.len(), n.min(b.len()));
        let mut seen: Vec<usize> = s.iter().map(|&&k| k).collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), n.min(b.len()));
    }
}
