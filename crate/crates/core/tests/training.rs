use ocdeepiv_core::model::INIT_STREAM;
use ocdeepiv_core::nn::{flatten_params, Adam, GradientSet, Parameterized};
use ocdeepiv_core::{
    build_features, estimate_theta_two_stage, gen_code_faithful, ortho_penalty, staged_train, DgpSpec, DualPathNet,
    Effect, Matrix, RngStream, TrainConfig,
};

fn small_run(seed: u64, epochs: usize, switch: usize) -> ocdeepiv_core::TrainOutcome {
    let data = gen_code_faithful(256, seed).unwrap();
    let features = build_features(&data.x, &data.t).unwrap();
    let cfg = TrainConfig {
        epochs,
        switch_epoch: switch,
        seed,
        ..Default::default()
    };
    let net = DualPathNet::treatment(cfg.dropout_p, &mut RngStream::new(seed, INIT_STREAM)).unwrap();
    staged_train(net, &data.z, &features, &data.t, &cfg).unwrap()
}

#[test]
fn loss_records_decompose_and_respect_the_switch() {
    let out = small_run(1, 12, 6);
    assert_eq!(out.history.len(), 12);
    for r in &out.history {
        assert!((r.total - (r.mse + r.ortho)).abs() <= 1e-12);
        if r.epoch <= 6 {
            assert_eq!(r.ortho, 0.0);
        } else {
            assert!(r.ortho >= 0.02 * 127.0);
        }
    }
    assert!(out.history[6].total > out.history[5].total);
}

#[test]
fn training_is_reproducible_per_seed() {
    let a = small_run(3, 5, 2);
    let b = small_run(3, 5, 2);
    let c = small_run(4, 5, 2);
    assert_eq!(flatten_params(&a.net), flatten_params(&b.net));
    assert_eq!(a.history, b.history);
    assert_ne!(flatten_params(&a.net), flatten_params(&c.net));
}

#[test]
fn penalty_floor_holds_for_fresh_networks() {
    for seed in 0..5 {
        let net = DualPathNet::treatment(0.3, &mut RngStream::new(seed, INIT_STREAM)).unwrap();
        assert!(ortho_penalty(&net, 1.0) >= 127.0);
    }
}

#[test]
fn adam_first_step_moves_by_learning_rate_times_sign() {
    // With zero moments, the bias-corrected first update is g/|g| (up to eps),
    // where g already includes the coupled decay term.
    let mut w = vec![0.5, -2.0, 3.0, 0.0];
    let g = vec![0.2, 0.3, -1e-3, -4.0];
    let (lr, wd) = (0.01, 0.1);
    let before = w.clone();
    let mut adam = Adam::new(lr, wd);
    adam.step(vec![&mut w[..]], &GradientSet { slots: vec![g.clone()] }).unwrap();
    for i in 0..4 {
        let coupled: f64 = g[i] + wd * before[i];
        let expected = before[i] - lr * coupled / (coupled.abs() + 1e-8);
        assert!((w[i] - expected).abs() < 1e-12, "{i}: {} vs {expected}", w[i]);
    }
}

#[test]
fn parameter_layout_is_stable() {
    let net = DualPathNet::treatment(0.3, &mut RngStream::new(0, INIT_STREAM)).unwrap();
    let names: Vec<String> = net.params().iter().map(|p| p.name.clone()).collect();
    assert_eq!(names.len(), 18);
    assert_eq!(names[0], "path_a.fc1.weight");
    assert_eq!(names.last().unwrap(), "head.bias");
    // fc1 (3→64), fc2 (64→64) on path A; 6→64 on path B; head 128→1; norms 4×128.
    let expected = (3 * 64 + 64) + (64 * 64 + 64) + (6 * 64 + 64) + (64 * 64 + 64) + 4 * 128 + 129;
    assert_eq!(net.param_count(), expected);
}

#[test]
fn two_stage_recovers_a_constant_effect() {
    let spec = DgpSpec {
        effect: Effect::Constant(1.0),
        ..DgpSpec::confounded(3000, 2)
    };
    let data = spec.generate().unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        switch_epoch: 100,
        lr: 0.01,
        ..Default::default()
    };
    let fit = estimate_theta_two_stage(&data, &cfg).unwrap();
    let mean = fit.theta_hat.mean();
    assert!((mean - 1.0).abs() < 0.15, "mean θ̂ {mean}");
    assert_eq!(fit.stage1_history.len(), 200);
    assert!(fit.t_hat.as_slice().iter().all(|v| v.is_finite()));
}

#[test]
fn matmul_identities_hold_on_random_data() {
    let mut rng = RngStream::new(8, 0);
    let a = rng.sample_standard_normal(40, 17);
    let b = rng.sample_standard_normal(17, 9);
    let ab = a.matmul(&b).unwrap();
    let bt_at = b.transpose().matmul(&a.transpose()).unwrap();
    let via_nt = a.matmul_nt(&b.transpose()).unwrap();
    let via_tn = a.transpose().matmul_tn(&b).unwrap();
    for m in [via_nt, via_tn, bt_at.transpose()] {
        for (x, y) in m.as_slice().iter().zip(ab.as_slice()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
    assert_eq!(Matrix::zeros(3, 0).matmul(&Matrix::zeros(0, 2)).unwrap(), Matrix::zeros(3, 2));
}
