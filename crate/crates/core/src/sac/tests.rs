use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::approx::{AdamState, Mlp};
use crate::env::ACTION_DIM;

const OBS: usize = 6;

fn small_config() -> SacConfig {
    SacConfig {
        hidden: vec![16, 16],
        batch_size: 8,
        warmup: 16,
        buffer_capacity: 1000,
        ..SacConfig::default()
    }
}

fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
    let obs: Vec<f64> = (0..OBS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let next_obs: Vec<f64> = (0..OBS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut action = [0.0; ACTION_DIM];
    for a in &mut action {
        *a = rng.random_range(-0.9..0.9);
    }
    let kind = if rng.random_bool(0.05) {
        TerminationKind::FallTerminal
    } else {
        TerminationKind::Running
    };
    Transition {
        obs,
        action,
        reward: rng.random_range(-1.0..1.0),
        next_obs,
        safety: rng.random_range(-0.1..0.4),
        kind,
    }
}

fn filled_buffer(n: usize, seed: u64) -> ReplayBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = ReplayBuffer::new(1000, seed);
    for _ in 0..n {
        buf.push(random_transition(&mut rng));
    }
    buf
}

fn batch_with_safety(safety: f64, rows: usize) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ts: Vec<Transition> = (0..rows)
        .map(|_| Transition {
            safety,
            ..random_transition(&mut rng)
        })
        .collect();
    Batch::from_transitions(&ts)
}

#[test]
fn multiplier_examples() {
    assert!((lambda_step(1.0, 0.01, -0.1) - 1.001).abs() < 1e-15);
    assert_eq!(lambda_step(0.001, 0.01, 0.2), 0.0);
    assert_eq!(lambda_step(0.0, 0.01, 0.0), 0.0);
}

#[test]
fn temperature_moves_against_excess_entropy() {
    // Entropy estimate −mean log π = 3 sits above the −4 target: α shrinks.
    let la = log_alpha_step(0.0, 0.1, -3.0, -4.0);
    assert!(la < 0.0);
    // Entropy −6 below target: α grows.
    assert!(log_alpha_step(0.0, 0.1, 6.0, -4.0) > 0.0);
}

proptest! {
    #[test]
    fn multiplier_stays_nonnegative(l in 0.0f64..10.0, lr in 0.0f64..1.0, sig in -5.0f64..5.0) {
        let next = lambda_step(l, lr, sig);
        prop_assert!(next >= 0.0);
        if lr > 0.0 && next > 0.0 {
            // Unclipped moves go against the signal.
            prop_assert!((next - l) * sig <= 0.0);
        }
    }

    #[test]
    fn multiplier_update_matches_signal(seed in 0u64..50, margin in -0.5f64..0.5) {
        let mut learner = LearnerState::new(small_config(), OBS, seed).unwrap();
        let batch = batch_with_safety(margin, 8);
        let report = learner.actor_update(&batch).unwrap();
        let before = learner.lambda;
        let after = learner.lambda_update(&batch, &report);
        prop_assert!(after >= 0.0);
        if margin > 0.0 {
            prop_assert!(after < before);
        } else if margin < 0.0 {
            prop_assert!(after > before);
        }
        prop_assert!(learner.alpha() > 0.0);
    }
}

#[test]
fn matched_targets_leave_fresh_critic_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = Mlp::new(&[3, 8, 1], &mut rng).unwrap();
    let input = Array2::from_shape_fn((5, 3), |(r, c)| (r as f64 - c as f64) * 0.3);
    let targets = net
        .forward_batch(input.view())
        .unwrap()
        .output
        .column(0)
        .to_owned();
    let before = net.clone();
    let mut opt = AdamState::for_mlp(&net, 3e-4);
    let loss = mse_step(&mut net, &mut opt, input.view(), &targets).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(net, before);
}

#[test]
fn constant_target_regression_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut net = Mlp::new(&[OBS + ACTION_DIM, 32, 32, 1], &mut rng).unwrap();
    let mut opt = AdamState::for_mlp(&net, 3e-4);
    let input = Array2::from_shape_fn((32, OBS + ACTION_DIM), |_| rng.random_range(-1.0..1.0));
    let targets = Array1::from_elem(32, 1.5);
    let mut last = f64::INFINITY;
    for _ in 0..50 {
        let loss = mse_step(&mut net, &mut opt, input.view(), &targets).unwrap();
        assert!(loss < last, "loss {loss} did not drop below {last}");
        last = loss;
    }
}

#[test]
fn warmup_gates_training() {
    let mut learner = LearnerState::new(small_config(), OBS, 0).unwrap();
    let mut buf = filled_buffer(15, 0);
    let snapshot = learner.clone();
    assert!(learner.train_step(&mut buf).unwrap().is_none());
    assert_eq!(learner, snapshot);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    buf.push(random_transition(&mut rng));
    assert!(learner.train_step(&mut buf).unwrap().is_some());
    assert_eq!(learner.q1_opt.step_count, 2);
    assert_eq!(learner.actor_opt.step_count, 2);
    assert_eq!(learner.s_opt.step_count, 2);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut learner = LearnerState::new(small_config(), OBS, 5).unwrap();
        let mut buf = filled_buffer(64, 5);
        for _ in 0..10 {
            learner.train_step(&mut buf).unwrap();
        }
        learner
    };
    assert_eq!(run(), run());
}

#[test]
fn targets_track_critics_slowly() {
    let mut learner = LearnerState::new(small_config(), OBS, 4).unwrap();
    let mut buf = filled_buffer(64, 4);
    learner.train_step(&mut buf).unwrap();
    // After two rounds the targets sit between their init and the critics.
    assert_ne!(learner.q1_target, learner.q1);
    let drift: f64 = learner.q1.weights()[0]
        .iter()
        .zip(learner.q1_target.weights()[0].iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-2);
}

#[test]
fn disabled_constraint_ignores_safety() {
    let config = SacConfig {
        constraint: Constraint::Disabled,
        ..small_config()
    };
    let mut learner = LearnerState::new(config, OBS, 8).unwrap();
    assert_eq!(learner.lambda, 0.0);
    let s_before = learner.s_critic.clone();
    let mut buf = filled_buffer(64, 8);
    learner.train_step(&mut buf).unwrap();
    assert_eq!(learner.lambda, 0.0);
    assert_eq!(learner.s_critic, s_before);
    assert_eq!(learner.s_opt.step_count, 0);
}

#[test]
fn zero_multiplier_matches_unconstrained_actor_step() {
    // With λ = 0 the safety term contributes nothing, so the actor update is
    // identical to the one with the constraint disabled.
    let lag = SacConfig {
        lambda_init: 0.0,
        ..small_config()
    };
    let off = SacConfig {
        constraint: Constraint::Disabled,
        ..small_config()
    };
    let mut a = LearnerState::new(lag, OBS, 11).unwrap();
    let mut b = LearnerState::new(off, OBS, 11).unwrap();
    let batch = batch_with_safety(0.1, 8);
    a.actor_update(&batch).unwrap();
    b.actor_update(&batch).unwrap();
    assert_eq!(a.actor, b.actor);
}

#[test]
fn safety_term_pushes_actions_toward_higher_safety() {
    // A linear safety critic rewarding the first action component: the actor
    // step with a large λ must raise the mean of that component.
    let config = SacConfig {
        lambda_init: 50.0,
        learning_rate: 1e-2,
        ..small_config()
    };
    let mut learner = LearnerState::new(config, OBS, 12).unwrap();
    let mut sizes = vec![OBS + ACTION_DIM];
    sizes.extend_from_slice(&learner.config.hidden);
    sizes.push(1);
    let zero = Mlp::zeros(&sizes).unwrap();
    learner.q1 = zero.clone();
    learner.q2 = zero.clone();
    // Build S(s, a) = a0 through a ReLU pair: relu(a0+1) − 1 on the valid range.
    let mut s = Mlp::zeros(&sizes).unwrap();
    s.weights[0][[0, OBS]] = 1.0;
    s.biases[0][0] = 1.0;
    s.weights[1][[0, 0]] = 1.0;
    s.weights[2][[0, 0]] = 1.0;
    s.biases[2][0] = -1.0;
    learner.s_critic = s;
    let batch = batch_with_safety(0.0, 8);
    let probe: Vec<f64> = batch.obs.row(0).to_vec();
    let before = learner.act_deterministic(&probe).unwrap()[0];
    for _ in 0..20 {
        learner.actor_update(&batch).unwrap();
    }
    let after = learner.act_deterministic(&probe).unwrap()[0];
    assert!(after > before, "{after} <= {before}");
}

#[test]
fn record_round_trip_is_exact() {
    let mut learner = LearnerState::new(small_config(), OBS, 21).unwrap();
    let mut buf = filled_buffer(64, 21);
    for _ in 0..3 {
        learner.train_step(&mut buf).unwrap();
    }
    let json = serde_json::to_string(&learner.to_record()).unwrap();
    let rec: LearnerRecord = serde_json::from_str(&json).unwrap();
    let restored = LearnerState::from_record(&rec).unwrap();
    assert_eq!(restored, learner);
    // Continued training stays in lockstep.
    let mut a = learner;
    let mut b = restored;
    let mut buf_b = buf.clone();
    a.train_step(&mut buf).unwrap();
    b.train_step(&mut buf_b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_validation() {
    assert!(SacConfig::default().validate().is_ok());
    let bad = SacConfig {
        gamma: 1.5,
        ..SacConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = SacConfig {
        hidden: vec![],
        ..SacConfig::default()
    };
    assert!(bad.validate().is_err());
}
