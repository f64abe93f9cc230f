use coopsteer::optim::{Adam, AdamConfig};
use coopsteer::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

#[test]
fn first_step_moments_equal_gradient_and_its_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g: Vec<f64> = (0..20_000)
        .map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-6..6)))
        .collect();
    let grad = Tensor::from_vec(g.clone());
    let mut p = Tensor::zeros(&[g.len()]);
    let mut adam = Adam::new(AdamConfig::default(), [p.shape()]);
    adam.step(&mut [&mut p], &[grad], &names(1)).unwrap();
    let (m, v) = adam.moments();
    for (i, &gi) in g.iter().enumerate() {
        assert_eq!(m[0].data()[i], gi);
        assert_eq!(v[0].data()[i], gi * gi);
    }
}

#[test]
fn quadratic_descends_monotonically_after_warmup() {
    let mut w = Tensor::scalar(1.0);
    let mut adam = Adam::new(AdamConfig::default(), [w.shape()]);
    let mut losses = Vec::new();
    for _ in 0..200 {
        let x = w.item().unwrap();
        losses.push(x * x);
        adam.step(&mut [&mut w], &[Tensor::scalar(2.0 * x)], &names(1)).unwrap();
    }
    for k in 5..losses.len() - 1 {
        assert!(losses[k + 1] < losses[k], "loss rose at step {k}");
    }
    assert!(losses[199] < losses[0]);
}

#[test]
fn ten_steps_are_bitwise_reproducible() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = Tensor::from_vec((0..50).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mut b = Tensor::new(&[4, 3], (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), [a.shape(), b.shape()]);
        for _ in 0..10 {
            let ga = a.map(|v| v.sin() + 0.1);
            let gb = b.map(|v| v * v - 0.3);
            adam.step(&mut [&mut a, &mut b], &[ga, gb], &names(2)).unwrap();
        }
        (a, b, adam)
    };
    let (a1, b1, s1) = run();
    let (a2, b2, s2) = run();
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a1), bits(&a2));
    assert_eq!(bits(&b1), bits(&b2));
    assert_eq!(s1, s2);
}

proptest! {
    #[test]
    fn first_step_size_is_bounded_by_lr(g in prop::collection::vec(-1e3f64..1e3, 1..40), lr in 1e-5f64..1e-1) {
        let cfg = AdamConfig { lr, ..AdamConfig::default() };
        let mut p = Tensor::zeros(&[g.len()]);
        let mut adam = Adam::new(cfg, [p.shape()]);
        adam.step(&mut [&mut p], &[Tensor::from_vec(g.clone())], &names(1)).unwrap();
        for (w, gi) in p.data().iter().zip(&g) {
            prop_assert!(w.abs() <= lr * (1.0 + 1e-12));
            prop_assert!(*gi == 0.0 || w.signum() == -gi.signum());
        }
    }

    #[test]
    fn rejected_step_changes_nothing(n in 1usize..20, bad in 0usize..20) {
        let bad = bad % n;
        let mut data = vec![0.5; n];
        data[bad] = f64::INFINITY;
        let mut p = Tensor::from_vec(vec![1.0; n]);
        let mut adam = Adam::new(AdamConfig::default(), [p.shape()]);
        let before = adam.clone();
        let msg = adam.step(&mut [&mut p], &[Tensor::from_vec(data)], &names(1)).unwrap_err().to_string();
        let want = format!("index {}", bad);
        prop_assert!(msg.contains(&want));
        prop_assert_eq!(adam, before);
        prop_assert!(p.data().iter().all(|&v| v == 1.0));
    }
}
