use amper::SamplerKind;
use amper_rlbench::cartpole::{Action, CartPole};
use amper_rlbench::dqn::{td_errors, write_curve_csv, Batch, Experience, CURVE_CSV_HEADER};
use amper_rlbench::mlp::Mlp;
use amper_rlbench::{train, Error, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(replay: SamplerKind, seed: u64) -> TrainConfig {
    TrainConfig {
        total_steps: 3000,
        learning_starts: 500,
        er_size: 1000,
        replay,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn fixed_action_trajectory_is_reproducible() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut env = CartPole::reset(&mut rng);
        let mut states = vec![env.state()];
        let mut i = 0;
        while !env.is_done() {
            states.push(
                env.step(if i % 3 == 0 {
                    Action::Left
                } else {
                    Action::Right
                })
                .state,
            );
            i += 1;
        }
        states
    };
    let a = run();
    assert!(a.len() > 2);
    let bits = |v: &Vec<[f64; 4]>| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&run()));
}

/// Plain triple loop, independent of the network's own layout tricks.
fn naive_forward(q: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let n = q.layers().len();
    for (k, l) in q.layers().iter().enumerate() {
        let mut z = vec![0.0; l.outputs];
        for j in 0..l.outputs {
            z[j] = l.b[j];
            for i in 0..l.inputs {
                z[j] += a[i] * l.w[i * l.outputs + j];
            }
            if k + 1 < n && z[j] < 0.0 {
                z[j] = 0.0;
            }
        }
        a = z;
    }
    a
}

#[test]
fn td_errors_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let q = Mlp::new(&[4, 16, 16, 2], &mut rng);
    let target = Mlp::new(&[4, 16, 16, 2], &mut rng);
    let exps: Vec<Experience> = (0..32)
        .map(|_| Experience {
            state: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            action: rng.gen_range(0..2),
            reward: 1.0,
            next_state: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            terminal: rng.gen_bool(0.3),
        })
        .collect();
    let got = td_errors(&q, &target, &Batch::from_experiences(&exps), 0.9);
    for (e, d) in exps.iter().zip(got) {
        let next = naive_forward(&target, &e.next_state);
        let y = e.reward
            + if e.terminal {
                0.0
            } else {
                0.9 * next[0].max(next[1])
            };
        let expect = y - naive_forward(&q, &e.state)[e.action];
        assert!((d - expect).abs() < 1e-12);
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    for kind in SamplerKind::ALL {
        let a = train(&small(kind, 3)).unwrap();
        let b = train(&small(kind, 3)).unwrap();
        assert_eq!(a, b, "{kind}");
        assert!(a.episodes > 0);
        assert_eq!(a.test_returns.len(), 10);
        if kind.variant().is_some() {
            assert!(a.mean_csp.unwrap() > 0.0);
        }
    }
}

#[test]
fn curve_csv_layout() {
    let r = train(&small(SamplerKind::AmperFr, 1)).unwrap();
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, &r).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CURVE_CSV_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 5);
    assert_eq!(first[3], "amper-fr");
    assert_eq!(first[4], "1");
    assert_eq!(text.lines().count(), r.episodes + 1);
}

#[test]
fn importance_weights_run() {
    let cfg = TrainConfig {
        is_weights: Some(Default::default()),
        ..small(SamplerKind::Per, 2)
    };
    let r = train(&cfg).unwrap();
    assert!(r.test_score >= 1.0);
}

#[test]
fn runaway_learning_rate_aborts() {
    let cfg = TrainConfig {
        learning_rate: 1e300,
        ..small(SamplerKind::Uniform, 4)
    };
    assert!(matches!(train(&cfg), Err(Error::Diverged { .. })));
}

#[test]
fn flat_priorities_behave_like_uniform_replay() {
    // alpha = 0 stores every priority as 1, so PER draws uniformly
    let mut flat = Vec::new();
    let mut uniform = Vec::new();
    for seed in 0..3 {
        let mut cfg = TrainConfig {
            total_steps: 8000,
            ..small(SamplerKind::Per, seed)
        };
        cfg.per.alpha = 0.0;
        flat.extend(train(&cfg).unwrap().curve.iter().map(|p| p.ret));
        cfg.replay = SamplerKind::Uniform;
        uniform.extend(train(&cfg).unwrap().curve.iter().map(|p| p.ret));
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var / v.len() as f64)
    };
    let (ma, sa) = stats(&flat);
    let (mb, sb) = stats(&uniform);
    let z = (ma - mb) / (sa + sb).sqrt();
    assert!(
        z.abs() < 3.3,
        "flat PER {ma:.1} vs uniform {mb:.1}, z = {z:.2}"
    );
}
