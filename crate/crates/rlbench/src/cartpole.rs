//! Cart-pole balancing with classic Euler-integrated dynamics.

use rand::Rng;

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * HALF_LENGTH;
const FORCE: f64 = 10.0;
const DT: f64 = 0.02;

pub const X_LIMIT: f64 = 2.4;
pub const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const MAX_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left = 0,
    Right = 1,
}

impl Action {
    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Left
        } else {
            Action::Right
        }
    }
}

/// `[x, x_dot, theta, theta_dot]`.
pub type State = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: State,
    pub reward: f64,
    /// The pole fell or the cart left the track.
    pub failed: bool,
    /// The episode hit the step limit without failing.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.failed || self.truncated
    }
}

/// One step of the dynamics, with no episode bookkeeping.
pub fn dynamics(s: State, action: Action) -> State {
    let [x, x_dot, theta, theta_dot] = s;
    let force = match action {
        Action::Left => -FORCE,
        Action::Right => FORCE,
    };
    let (sin, cos) = theta.sin_cos();
    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
    [
        x + DT * x_dot,
        x_dot + DT * x_acc,
        theta + DT * theta_dot,
        theta_dot + DT * theta_acc,
    ]
}

pub fn out_of_bounds(s: &State) -> bool {
    s[0].abs() > X_LIMIT || s[2].abs() > THETA_LIMIT
}

#[derive(Debug, Clone)]
pub struct CartPole {
    state: State,
    steps: usize,
    done: bool,
}

impl CartPole {
    /// Starts from an explicit state.
    pub fn with_state(state: State) -> Self {
        Self {
            state,
            steps: 0,
            done: false,
        }
    }

    /// Starts from a state drawn uniformly from `[-0.05, 0.05]^4`.
    pub fn reset<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::with_state(std::array::from_fn(|_| rng.gen_range(-0.05..0.05)))
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Advances one step. Every step, including the one that ends the
    /// episode, earns a reward of 1.
    ///
    /// # Panics
    /// If the episode has already ended.
    pub fn step(&mut self, action: Action) -> Step {
        assert!(!self.done, "step after end of episode");
        self.state = dynamics(self.state, action);
        self.steps += 1;
        let failed = out_of_bounds(&self.state);
        let truncated = !failed && self.steps >= MAX_STEPS;
        self.done = failed || truncated;
        Step {
            state: self.state,
            reward: 1.0,
            failed,
            truncated,
        }
    }
}
