//! Optimizer oracle and training regressions.

use nett_core::pat::PatSetup;
use nett_core::phantom::make_training_set;
use nett_core::regularizer::{Architecture, NetParams};
use nett_core::training::{adam_update, train, train_loss, AdamState, TrainConfig};

#[test]
fn adam_matches_scalar_reference_for_ten_steps() {
    let config = TrainConfig {
        learning_rate: 0.1,
        ..TrainConfig::default()
    };
    let grad = |p: f64| 2.0 * (p - 3.0);
    let mut p = [0.0f64];
    let mut state = AdamState::new(1);
    let (mut q, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
    for t in 1..=10 {
        let g = [grad(p[0])];
        adam_update(p.iter_mut(), g.iter(), &mut state, &config);
        let gq = grad(q);
        m = 0.9 * m + 0.1 * gq;
        v = 0.999 * v + 0.001 * gq * gq;
        let m_hat = m / (1.0 - 0.9f64.powi(t));
        let v_hat = v / (1.0 - 0.999f64.powi(t));
        q -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - q).abs() <= 1e-12, "step {t}: {} vs {q}", p[0]);
    }
    assert_eq!(state.step, 10);
    // moving towards the minimizer at 3
    assert!(q > 0.9 && q < 3.0);
}

#[test]
fn one_epoch_decreases_the_loss() {
    let n = 16;
    let a = PatSetup::standard(n, 24, 32, 0.34).unwrap().build().unwrap();
    for seed in 0..5 {
        let pairs = make_training_set(&a, n, 4, 0.01, seed).unwrap();
        // a fresh network is the identity, where the L1 terms sit at their
        // kink; start from a perturbed output layer instead
        let mut initial = NetParams::init(Architecture::new(vec![4, 8]).unwrap(), seed);
        for (k, w) in initial.output_layer_mut().weight.iter_mut().enumerate() {
            *w = 0.05 * if (k as u64 + seed) % 2 == 0 { 1.0 } else { -1.0 };
        }
        let config = TrainConfig {
            epochs: 1,
            batch_size: 1,
            learning_rate: 1e-3,
            seed,
            ..TrainConfig::default()
        };
        let before = train_loss(&initial, &pairs, config.gamma).unwrap();
        let out = train(&pairs, initial, &config).unwrap();
        let after = train_loss(&out.theta, &pairs, config.gamma).unwrap();
        assert!(after < before, "seed {seed}: {before} -> {after}");
        assert_eq!(out.log.len(), 1);
        assert!(out.log[0].holdout_loss.is_nan());
    }
}

#[test]
fn training_is_deterministic() {
    let n = 16;
    let a = PatSetup::standard(n, 24, 32, 0.34).unwrap().build().unwrap();
    let pairs = make_training_set(&a, n, 6, 0.01, 3).unwrap();
    let config = TrainConfig {
        epochs: 2,
        batch_size: 2,
        seed: 3,
        ..TrainConfig::default()
    };
    let run = || train(&pairs, NetParams::init(Architecture::new(vec![2, 4]).unwrap(), 3), &config).unwrap();
    let (x, y) = (run(), run());
    assert_eq!(x.theta, y.theta);
    let bits = |log: &[nett_core::training::EpochLoss]| -> Vec<(u64, u64)> {
        log.iter().map(|l| (l.train_loss.to_bits(), l.holdout_loss.to_bits())).collect()
    };
    assert_eq!(bits(&x.log), bits(&y.log));
}
