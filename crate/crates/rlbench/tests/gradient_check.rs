use amper_rlbench::dqn::{td_errors, td_gradient, Batch, Experience};
use amper_rlbench::mlp::Mlp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Finite differences are only an oracle where the loss is smooth, so
/// states within `1e-4` of a rectifier kink are redrawn. A single parameter
/// step of `1e-5` moves no pre-activation by more than a few `1e-5`.
fn random_batch(q: &Mlp, rng: &mut ChaCha8Rng, n: usize) -> Batch {
    let exps: Vec<Experience> = (0..n)
        .map(|_| {
            let state = loop {
                let s: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
                if q.kink_margin(&s, 1) > 1e-4 {
                    break s;
                }
            };
            Experience {
                state,
                action: rng.gen_range(0..2),
                reward: 1.0,
                next_state: std::array::from_fn(|_| rng.gen_range(-2.0..2.0)),
                terminal: rng.gen_bool(0.1),
            }
        })
        .collect();
    Batch::from_experiences(&exps)
}

/// `1/2 * sum (y - Q(s, a))^2` with the targets `y` frozen.
fn loss(q: &Mlp, batch: &Batch, targets: &[f64]) -> f64 {
    let out = q.forward(&batch.states, batch.len());
    (0..batch.len())
        .map(|i| 0.5 * (targets[i] - out[i * 2 + batch.actions[i]]).powi(2))
        .sum()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let q = Mlp::new(&[4, 64, 64, 2], &mut rng);
        let target = Mlp::new(&[4, 64, 64, 2], &mut rng);
        let batch = random_batch(&q, &mut rng, 64);
        let deltas = td_errors(&q, &target, &batch, 0.99);
        let current = q.forward(&batch.states, batch.len());
        let targets: Vec<f64> = (0..batch.len())
            .map(|i| deltas[i] + current[i * 2 + batch.actions[i]])
            .collect();
        let grad: Vec<f64> = td_gradient(&q, &batch, &deltas, None)
            .params()
            .copied()
            .collect();

        let count = q.param_count();
        for k in 0..count {
            let mut plus = q.clone();
            *plus.params_mut().nth(k).unwrap() += h;
            let mut minus = q.clone();
            *minus.params_mut().nth(k).unwrap() -= h;
            let numeric =
                (loss(&plus, &batch, &targets) - loss(&minus, &batch, &targets)) / (2.0 * h);
            let analytic = grad[k];
            // central differences at h = 1e-5 carry ~1e-10 roundoff, so tiny
            // components are compared against a floor instead of themselves
            let scale = analytic.abs().max(numeric.abs()).max(1e-5);
            let rel = (analytic - numeric).abs() / scale;
            worst = worst.max(rel);
            assert!(
                rel < 1e-4,
                "param {k}: analytic {analytic} numeric {numeric}"
            );
        }
    }
    println!("worst relative error {worst:.3e}");
}
