//! Cart-pole swing-up and the observation permutation harness.
//!
//! The pole is modelled as a point mass `m_p` at distance `l` from a
//! frictionless pivot on a cart of mass `m_c`. With `θ = 0` upright and
//! `M = m_c + m_p`, the Lagrangian
//!
//! ```text
//! L = ½ M ẋ² + m_p l ẋ θ̇ cos θ + ½ m_p l² θ̇² − m_p g l cos θ
//! ```
//!
//! has canonical momenta `p_x = M ẋ + m_p l θ̇ cos θ` and
//! `p_θ = m_p l ẋ cos θ + m_p l² θ̇`. Each substep is semi-implicit
//! (symplectic) Euler in these momenta:
//!
//! ```text
//! p_x' = p_x + h F
//! p_θ' = p_θ + h m_p l sin θ (g − ẋ' θ̇')     (ẋ', θ̇') = velocities(θ, p')
//! x'   = x + h ẋ',   θ' = θ + h θ̇'
//! ```
//!
//! Stepping the velocities directly, with the accelerations from the same
//! Lagrangian, drifts in energy at first order because the mass matrix
//! depends on θ; the momentum form keeps the energy error bounded. The
//! conserved quantity for `F = 0` is
//! `E = ½ M ẋ² + m_p l ẋ θ̇ cos θ + ½ m_p l² θ̇² + m_p g l cos θ`.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, RngState};

pub const CART_MASS: f64 = 0.5;
pub const POLE_MASS: f64 = 0.5;
/// Pivot-to-mass distance; the pole half-length.
pub const POLE_LENGTH: f64 = 0.6;
pub const GRAVITY: f64 = 9.81;
pub const FORCE_SCALE: f64 = 10.0;
/// Simulated time per environment step.
pub const STEP_DT: f64 = 0.01;
pub const SUBSTEPS: usize = 2;
pub const X_LIMIT: f64 = 2.4;
pub const HORIZON: u64 = 1000;
pub const OBS_DIM: usize = 5;
pub const RESET_NOISE: f64 = 0.01;
const MAX_IMPLICIT_ITERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    /// 0 is upright, π hangs down.
    pub theta: f64,
    pub theta_dot: f64,
    pub t: u64,
}

impl CartPoleState {
    pub fn at_rest(x: f64, theta: f64) -> Self {
        CartPoleState {
            x,
            x_dot: 0.0,
            theta,
            theta_dot: 0.0,
            t: 0,
        }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.x_dot.is_finite() && self.theta.is_finite() && self.theta_dot.is_finite()
    }

    pub fn observation(&self) -> Observation {
        let (s, c) = sin_cos(self.theta);
        Observation([self.x, self.x_dot, c, s, self.theta_dot])
    }
}

/// `[x, ẋ, cos θ, sin θ, θ̇]`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `sin` and `cos` after reducing `θ` about the nearest multiple of π, so that
/// both `θ = 0` and `θ = π` give an exactly zero sine.
pub fn sin_cos(theta: f64) -> (f64, f64) {
    let k = (theta / std::f64::consts::PI).round();
    let r = theta - k * std::f64::consts::PI;
    let (s, c) = r.sin_cos();
    if k.rem_euclid(2.0) == 0.0 {
        (s, c)
    } else {
        (-s, -c)
    }
}

pub fn cartpole_reset(seed: u64) -> CartPoleState {
    let mut rng = RngState::new(seed);
    let eps = rng.uniform_range(-RESET_NOISE, RESET_NOISE);
    CartPoleState::at_rest(0.0, std::f64::consts::PI + eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: CartPoleState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// The cart left the track before the horizon.
    pub out_of_track: bool,
}

/// Inverse of the mass matrix `[[M, m_p l cos θ], [m_p l cos θ, m_p l²]]`
/// applied to the momenta, i.e. the generalized velocities.
fn velocities(cos: f64, p_x: f64, p_theta: f64) -> (f64, f64) {
    let total = CART_MASS + POLE_MASS;
    let det = POLE_MASS * POLE_LENGTH * POLE_LENGTH * (total - POLE_MASS * cos * cos);
    let ml = POLE_MASS * POLE_LENGTH;
    (
        (ml * POLE_LENGTH * p_x - ml * cos * p_theta) / det,
        (-ml * cos * p_x + total * p_theta) / det,
    )
}

/// One symplectic Euler substep of length `h`: momenta first (implicit in
/// the new momenta at the old angle, solved by fixed-point iteration), then
/// positions with the new velocities.
fn substep(s: &mut CartPoleState, force: f64, h: f64) {
    let (sin, cos) = sin_cos(s.theta);
    let ml = POLE_MASS * POLE_LENGTH;
    let p_x = (CART_MASS + POLE_MASS) * s.x_dot + ml * cos * s.theta_dot + h * force;
    let p_theta = ml * cos * s.x_dot + ml * POLE_LENGTH * s.theta_dot;

    // ṗ_θ = −∂H/∂θ = m_p l sin θ (g − ẋ θ̇)
    let mut next = p_theta;
    for _ in 0..MAX_IMPLICIT_ITERS {
        let (vx, vt) = velocities(cos, p_x, next);
        let candidate = p_theta + h * ml * sin * (GRAVITY - vx * vt);
        if candidate == next {
            break;
        }
        next = candidate;
    }
    let (vx, vt) = velocities(cos, p_x, next);
    s.x += h * vx;
    s.theta += h * vt;

    let (_, cos) = sin_cos(s.theta);
    let (vx, vt) = velocities(cos, p_x, next);
    s.x_dot = vx;
    s.theta_dot = vt;
}

pub fn cartpole_step(state: &CartPoleState, action: f64) -> Result<StepOutcome> {
    let force = FORCE_SCALE * action.clamp(-1.0, 1.0);
    let h = STEP_DT / SUBSTEPS as f64;
    let mut s = *state;
    for _ in 0..SUBSTEPS {
        substep(&mut s, force, h);
    }
    s.t += 1;
    if !s.is_finite() {
        return Err(Error::NonFiniteState { step: s.t });
    }
    let observation = s.observation();
    let out_of_track = s.x.abs() > X_LIMIT;
    Ok(StepOutcome {
        state: s,
        observation,
        reward: observation.0[2],
        done: out_of_track || s.t >= HORIZON,
        out_of_track,
    })
}

pub fn total_energy(s: &CartPoleState) -> f64 {
    let (_, cos) = sin_cos(s.theta);
    0.5 * (CART_MASS + POLE_MASS) * s.x_dot * s.x_dot
        + POLE_MASS * s.x_dot * POLE_LENGTH * s.theta_dot * cos
        + 0.5 * POLE_MASS * POLE_LENGTH * POLE_LENGTH * s.theta_dot * s.theta_dot
        + POLE_MASS * GRAVITY * POLE_LENGTH * cos
}

/// A fixed reordering of observation components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermSpec {
    perm: Vec<usize>,
}

impl PermSpec {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidConfig(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        Ok(PermSpec { perm })
    }

    pub fn identity(n: usize) -> Self {
        PermSpec {
            perm: (0..n).collect(),
        }
    }

    /// Uniformly random permutation drawn from `seed`.
    pub fn from_seed(seed: u64, n: usize) -> Self {
        PermSpec {
            perm: RngState::new(derive_seed(&[seed, 0x5045_524D])).permutation(n),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> PermSpec {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        PermSpec { perm: inv }
    }

    /// `out[i] = values[perm[i]]`.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&j| values[j]).collect()
    }
}

pub fn permute_observation(obs: &Observation, spec: &PermSpec) -> Observation {
    let mut out = [0.0; OBS_DIM];
    for (o, &j) in out.iter_mut().zip(spec.as_slice()) {
        *o = obs.0[j];
    }
    Observation(out)
}
