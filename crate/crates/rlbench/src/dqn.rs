//! DQN on cart-pole with a pluggable replay sampler.

use std::io::{self, Write};

use amper::amper::AmperConfig;
use amper::replay::PerConfig;
use amper::{AmperTuning, Codec, Replay, SamplerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cartpole::{Action, CartPole, State};
use crate::error::{Error, Result};
use crate::mlp::{Adam, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: State,
    pub action: usize,
    pub reward: f64,
    pub next_state: State,
    /// True only when the episode ended by failure; step-limit endings
    /// still bootstrap.
    pub terminal: bool,
}

/// Transitions laid out for the network: states are row-major `b x 4`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub states: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn from_experiences<'a>(items: impl IntoIterator<Item = &'a Experience>) -> Self {
        let mut b = Batch::default();
        for e in items {
            b.states.extend_from_slice(&e.state);
            b.actions.push(e.action);
            b.rewards.push(e.reward);
            b.next_states.extend_from_slice(&e.next_state);
            b.terminals.push(e.terminal);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// `delta = r + gamma * max_a' Q_target(s', a') * (1 - terminal) - Q(s, a)`.
pub fn td_errors(q: &Mlp, target: &Mlp, batch: &Batch, gamma: f64) -> Vec<f64> {
    let n = batch.len();
    let a_count = q.output_size();
    let current = q.forward(&batch.states, n);
    let next = target.forward(&batch.next_states, n);
    (0..n)
        .map(|i| {
            let best = next[i * a_count..(i + 1) * a_count]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let bootstrap = if batch.terminals[i] {
                0.0
            } else {
                gamma * best
            };
            batch.rewards[i] + bootstrap - current[i * a_count + batch.actions[i]]
        })
        .collect()
}

/// Gradient of `1/2 * sum_i w_i * delta_i^2` with the targets held fixed.
pub fn td_gradient(q: &Mlp, batch: &Batch, deltas: &[f64], weights: Option<&[f64]>) -> Mlp {
    let n = batch.len();
    let a_count = q.output_size();
    let mut grad_out = vec![0.0; n * a_count];
    for i in 0..n {
        let w = weights.map_or(1.0, |w| w[i]);
        grad_out[i * a_count + batch.actions[i]] = -w * deltas[i];
    }
    q.backward(&batch.states, n, &grad_out)
}

/// Importance-sampling correction for prioritized replay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsWeights {
    /// Exponent at step 0, annealed linearly to 1 at the last step.
    pub beta_start: f64,
}

impl Default for IsWeights {
    fn default() -> Self {
        Self { beta_start: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub er_size: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `total_steps` over which epsilon is annealed.
    pub epsilon_fraction: f64,
    pub target_sync: usize,
    /// Steps of pure collection before the first update.
    pub learning_starts: usize,
    pub hidden: Vec<usize>,
    pub replay: SamplerKind,
    pub per: PerConfig,
    pub amper: AmperConfig,
    pub tuning: AmperTuning,
    /// Importance weights, applied to the PER sampler only. Off by default.
    pub is_weights: Option<IsWeights>,
    /// Largest representable priority.
    pub v_max: f64,
    pub test_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 50_000,
            er_size: 2000,
            batch_size: 64,
            gamma: 0.99,
            learning_rate: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.1,
            target_sync: 500,
            learning_starts: 1000,
            hidden: vec![64, 64],
            replay: SamplerKind::Per,
            per: PerConfig::default(),
            amper: AmperConfig::default(),
            tuning: AmperTuning::default(),
            is_weights: None,
            v_max: 1024.0,
            test_episodes: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.er_size == 0 || self.batch_size == 0 || self.total_steps == 0 {
            return bad("step count, ER size and batch size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be > 0");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon bounds must be in [0, 1]");
        }
        if self.target_sync == 0 {
            return bad("target sync interval must be >= 1");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden widths must be >= 1");
        }
        Ok(())
    }

    pub fn epsilon(&self, step: usize) -> f64 {
        let span = (self.epsilon_fraction * self.total_steps as f64).max(1.0);
        let t = (step as f64 / span).min(1.0);
        self.epsilon_start + t * (self.epsilon_end - self.epsilon_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Environment step at which the episode ended.
    pub step: usize,
    pub episode: usize,
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub sampler: SamplerKind,
    pub seed: u64,
    pub er_size: usize,
    pub total_steps: usize,
    pub episodes: usize,
    pub curve: Vec<CurvePoint>,
    /// Mean return of the greedy test episodes after training.
    pub test_score: f64,
    pub test_returns: Vec<f64>,
    /// Mean CSP size over AMPER draws, if an AMPER sampler was used.
    pub mean_csp: Option<f64>,
}

pub const CURVE_CSV_HEADER: &str = "step,episode,return,sampler,seed";

pub fn write_curve_csv<W: Write>(mut w: W, report: &TrainReport) -> io::Result<()> {
    writeln!(w, "{CURVE_CSV_HEADER}")?;
    for p in &report.curve {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.step, p.episode, p.ret, report.sampler, report.seed
        )?;
    }
    Ok(())
}

fn greedy(q: &Mlp, s: &State) -> usize {
    let out = q.forward(s, 1);
    if out[1] > out[0] {
        1
    } else {
        0
    }
}

/// Mean return of `episodes` greedy rollouts.
pub fn evaluate<R: Rng + ?Sized>(q: &Mlp, episodes: usize, rng: &mut R) -> Vec<f64> {
    (0..episodes)
        .map(|_| {
            let mut env = CartPole::reset(rng);
            let mut ret = 0.0;
            while !env.is_done() {
                let a = greedy(q, &env.state());
                ret += env.step(Action::from_index(a)).reward;
            }
            ret
        })
        .collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Runs the full training loop and the final greedy test.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut init_rng = stream(cfg.seed, 0);
    let mut env_rng = stream(cfg.seed, 1);
    let mut act_rng = stream(cfg.seed, 2);
    let mut replay_rng = stream(cfg.seed, 3);
    let mut test_rng = stream(cfg.seed, 4);

    let mut sizes = vec![4];
    sizes.extend(&cfg.hidden);
    sizes.push(2);
    let mut q = Mlp::new(&sizes, &mut init_rng);
    let mut target = q.clone();
    let mut opt = Adam::new(&q, cfg.learning_rate);

    let amper_cfg = AmperConfig {
        batch_size: cfg.batch_size,
        ..cfg.amper
    };
    // LFSR seeds must be nonzero
    let hw_seed = (cfg.seed as u32 ^ (cfg.seed >> 32) as u32) | 1;
    let mut replay = Replay::new(
        cfg.replay,
        cfg.er_size,
        cfg.v_max,
        Codec::default(),
        amper_cfg,
        cfg.tuning,
        hw_seed,
    )?;
    let mut memory: Vec<Experience> = Vec::with_capacity(cfg.er_size);

    let mut env = CartPole::reset(&mut env_rng);
    let mut episode_return = 0.0;
    let mut curve = Vec::new();
    let (mut csp_sum, mut csp_draws) = (0.0, 0usize);

    for step in 0..cfg.total_steps {
        let state = env.state();
        let action = if act_rng.gen::<f64>() < cfg.epsilon(step) {
            act_rng.gen_range(0..2)
        } else {
            greedy(&q, &state)
        };
        let outcome = env.step(Action::from_index(action));
        episode_return += outcome.reward;
        let exp = Experience {
            state,
            action,
            reward: outcome.reward,
            next_state: outcome.state,
            terminal: outcome.failed,
        };
        let slot = replay.insert_max(1.0)?;
        if slot == memory.len() {
            memory.push(exp);
        } else {
            memory[slot] = exp;
        }
        if outcome.done() {
            curve.push(CurvePoint {
                step: step + 1,
                episode: curve.len(),
                ret: episode_return,
            });
            episode_return = 0.0;
            env = CartPole::reset(&mut env_rng);
        }

        if step + 1 >= cfg.learning_starts.max(cfg.batch_size) {
            let slots = replay.sample(cfg.batch_size, &mut replay_rng)?;
            if cfg.replay.variant().is_some() {
                csp_sum += replay.last_csp_size() as f64;
                csp_draws += 1;
            }
            let batch = Batch::from_experiences(slots.iter().map(|&s| &memory[s]));
            let deltas = td_errors(&q, &target, &batch, cfg.gamma);
            let loss = 0.5 * deltas.iter().map(|d| d * d).sum::<f64>();
            if !loss.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            let weights = match (cfg.is_weights, cfg.replay) {
                (Some(is), SamplerKind::Per) => {
                    let beta = is.beta_start
                        + (1.0 - is.beta_start) * step as f64 / cfg.total_steps as f64;
                    Some(importance_weights(&replay, &slots, beta))
                }
                _ => None,
            };
            let grad = td_gradient(&q, &batch, &deltas, weights.as_deref());
            opt.step(&mut q, &grad);
            if !q.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            let (slots, priorities) = dedup_updates(&slots, &deltas, &cfg.per);
            replay.update(&slots, &priorities)?;
        }
        if (step + 1) % cfg.target_sync == 0 {
            target = q.clone();
        }
    }

    let test_returns = evaluate(&q, cfg.test_episodes, &mut test_rng);
    let test_score = test_returns.iter().sum::<f64>() / test_returns.len().max(1) as f64;
    Ok(TrainReport {
        sampler: cfg.replay,
        seed: cfg.seed,
        er_size: cfg.er_size,
        total_steps: cfg.total_steps,
        episodes: curve.len(),
        curve,
        test_score,
        test_returns,
        mean_csp: (csp_draws > 0).then(|| csp_sum / csp_draws as f64),
    })
}

/// One update per distinct sampled slot; a slot drawn twice keeps the TD
/// error of its last occurrence.
pub fn dedup_updates(slots: &[usize], deltas: &[f64], per: &PerConfig) -> (Vec<usize>, Vec<f64>) {
    let mut out_slots: Vec<usize> = Vec::with_capacity(slots.len());
    let mut out_p: Vec<f64> = Vec::with_capacity(slots.len());
    for (&s, &d) in slots.iter().zip(deltas) {
        let p = per.shape(d);
        match out_slots.iter().position(|&x| x == s) {
            Some(i) => out_p[i] = p,
            None => {
                out_slots.push(s);
                out_p.push(p);
            }
        }
    }
    (out_slots, out_p)
}

/// `w_i = (N * P(i))^-beta`, normalized by the batch maximum.
fn importance_weights(replay: &Replay, slots: &[usize], beta: f64) -> Vec<f64> {
    let mem = replay.memory();
    let n = mem.len() as f64;
    let total = mem.tree().total() as f64;
    let w: Vec<f64> = slots
        .iter()
        .map(|&s| {
            let p = mem.store().get(s).expect("sampled slot").0 as f64 / total;
            (n * p).powf(-beta)
        })
        .collect();
    let max = w.iter().copied().fold(0.0, f64::max);
    w.into_iter().map(|x| x / max).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(reward: f64, terminal: bool) -> Experience {
        Experience {
            state: [0.1, -0.2, 0.03, 0.4],
            action: 1,
            reward,
            next_state: [0.2; 4],
            terminal,
        }
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = TrainConfig {
            total_steps: 1000,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(50) - 0.525).abs() < 1e-12);
        assert!((cfg.epsilon(100) - 0.05).abs() < 1e-12);
        assert!((cfg.epsilon(900) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn dedup_keeps_last() {
        let per = PerConfig {
            alpha: 1.0,
            epsilon_priority: 0.0,
        };
        let (s, p) = dedup_updates(&[3, 1, 3], &[1.0, 2.0, -5.0], &per);
        assert_eq!(s, vec![3, 1]);
        assert_eq!(p, vec![5.0, 2.0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            er_size: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            gamma: 1.5,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn terminal_and_myopic_td() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = Mlp::new(&[4, 8, 2], &mut rng);
        let target = Mlp::new(&[4, 8, 2], &mut rng);
        let e = exp(1.0, true);
        let qsa = q.forward(&e.state, 1)[1];
        let b = Batch::from_experiences([&e]);
        assert!((td_errors(&q, &target, &b, 0.99)[0] - (1.0 - qsa)).abs() < 1e-15);
        let b = Batch::from_experiences([&exp(2.0, false)]);
        assert!((td_errors(&q, &target, &b, 0.0)[0] - (2.0 - qsa)).abs() < 1e-15);
    }
}
