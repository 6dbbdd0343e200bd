//! Policy head and the agent that threads its previous action through time.

use serde::{Deserialize, Serialize};

use crate::envs::{cartpole_reset, cartpole_step, permute_observation, PermSpec, HORIZON, OBS_DIM};
use crate::error::{Error, Result};
use crate::layer::{layer_forward, load_params, ContextMixing, LayerConfig, LayerKind, LayerParams, Message};
use crate::modulation::ModulationKind;
use crate::rng::derive_seed;

pub const DEFAULT_D_MSG: usize = 32;
pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_D_ACTION: usize = 1;

// Both sensory layers must cost the same number of parameters at the default
// widths; a mismatch fails the build.
const _: () = assert!(
    crate::layer::cooperator_param_count(DEFAULT_D_MSG, DEFAULT_D_ACTION)
        == crate::layer::transformer_param_count(DEFAULT_D_MSG, DEFAULT_D_ACTION)
);

pub const fn policy_param_count(d_msg: usize, hidden: usize, d_action: usize) -> usize {
    d_msg * hidden + hidden + hidden * d_action + d_action
}

/// Two-layer tanh MLP: `a = tanh(W2ᵀ tanh(W1ᵀ m + b1) + b2)`.
///
/// Flat layout: `W1 (d_msg x hidden, row-major) | b1 | W2 (hidden x d_action) | b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    d_msg: usize,
    hidden: usize,
    d_action: usize,
    theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(d_msg: usize, hidden: usize, d_action: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = policy_param_count(d_msg, hidden, d_action);
        if theta.len() != expected {
            return Err(Error::dims(
                "PolicyParams::new",
                format!("{expected} parameters"),
                format!("{} parameters", theta.len()),
            ));
        }
        Ok(PolicyParams {
            d_msg,
            hidden,
            d_action,
            theta,
        })
    }

    pub fn zeros(d_msg: usize, hidden: usize, d_action: usize) -> Self {
        Self::new(d_msg, hidden, d_action, vec![0.0; policy_param_count(d_msg, hidden, d_action)])
            .expect("length matches by construction")
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

pub fn policy_forward(p: &PolicyParams, msg: &Message) -> Result<Vec<f64>> {
    let m = msg.values();
    if m.len() != p.d_msg {
        return Err(Error::dims("policy_forward", format!("message of width {}", p.d_msg), m.len()));
    }
    let (h, da) = (p.hidden, p.d_action);
    let (w1, rest) = p.theta.split_at(p.d_msg * h);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h * da);

    let mut hidden = b1.to_vec();
    for (i, &mi) in m.iter().enumerate() {
        for (hj, w) in hidden.iter_mut().zip(&w1[i * h..(i + 1) * h]) {
            *hj += w * mi;
        }
    }
    hidden.iter_mut().for_each(|v| *v = v.tanh());

    let mut out = b2.to_vec();
    for (j, &hj) in hidden.iter().enumerate() {
        for (o, w) in out.iter_mut().zip(&w2[j * da..(j + 1) * da]) {
            *o += w * hj;
        }
    }
    out.iter_mut().for_each(|v| *v = v.tanh());
    Ok(out)
}

/// Shapes of a full agent: sensory layer plus policy head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub layer: LayerConfig,
    pub hidden: usize,
}

impl AgentConfig {
    /// Cart-pole agent with the default widths.
    pub fn cartpole(kind: LayerKind) -> Self {
        AgentConfig {
            layer: LayerConfig {
                n_components: OBS_DIM,
                d_msg: DEFAULT_D_MSG,
                d_action: DEFAULT_D_ACTION,
                kind,
                mixing: ContextMixing::NeighborMean,
            },
            hidden: DEFAULT_HIDDEN,
        }
    }

    pub fn cooperator(modulation: ModulationKind) -> Self {
        Self::cartpole(LayerKind::Cooperator(modulation))
    }

    pub fn transformer() -> Self {
        Self::cartpole(LayerKind::Transformer)
    }

    pub fn layer_param_count(&self) -> usize {
        self.layer.param_count()
    }

    pub fn policy_param_count(&self) -> usize {
        policy_param_count(self.layer.d_msg, self.hidden, self.layer.d_action)
    }

    pub fn genome_len(&self) -> usize {
        self.layer_param_count() + self.policy_param_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub layer: LayerParams,
    pub policy: PolicyParams,
    pub prev_action: Vec<f64>,
}

impl Agent {
    /// Splits a genome into layer weights followed by policy weights.
    pub fn from_genome(config: &AgentConfig, genome: &[f64]) -> Result<Self> {
        if genome.len() != config.genome_len() {
            return Err(Error::dims(
                "Agent::from_genome",
                format!("genome of {} parameters", config.genome_len()),
                genome.len(),
            ));
        }
        let (layer, policy) = genome.split_at(config.layer_param_count());
        let lc = config.layer;
        Ok(Agent {
            layer: load_params(lc, layer.to_vec())?,
            policy: PolicyParams::new(lc.d_msg, config.hidden, lc.d_action, policy.to_vec())?,
            prev_action: vec![0.0; lc.d_action],
        })
    }

    pub fn reset(&mut self) {
        self.prev_action.iter_mut().for_each(|a| *a = 0.0);
    }

    pub fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        let msg = layer_forward(&self.layer, obs, &self.prev_action)?;
        let action = policy_forward(&self.policy, &msg)?;
        self.prev_action.clone_from(&action);
        Ok(action)
    }

    /// One cart-pole episode from a fresh internal state. With `shuffle`, the
    /// observation components are reordered by a permutation drawn from the
    /// episode seed and held fixed for the whole episode.
    ///
    /// The return is the sum of per-step rewards. Leaving the track forfeits
    /// the remaining steps of the horizon at the minimum reward of -1 each;
    /// otherwise driving off the track early would beat any policy that
    /// spends time hanging, and ES settles on that within a few generations.
    pub fn run_episode(&mut self, episode_seed: u64, shuffle: bool) -> Result<f64> {
        self.reset();
        let perm = shuffle.then(|| PermSpec::from_seed(derive_seed(&[episode_seed, 1]), OBS_DIM));
        let mut state = cartpole_reset(derive_seed(&[episode_seed, 0]));
        let mut obs = state.observation();
        let mut total = 0.0;
        loop {
            let seen = match &perm {
                Some(p) => permute_observation(&obs, p),
                None => obs,
            };
            let action = self.act(seen.values())?;
            let out = cartpole_step(&state, action[0])?;
            total += out.reward;
            if out.done {
                if out.out_of_track {
                    total -= (HORIZON - out.state.t) as f64;
                }
                return Ok(total);
            }
            state = out.state;
            obs = out.observation;
        }
    }
}

/// Functional form of [`Agent::act`].
pub fn agent_act(agent: &Agent, obs: &[f64]) -> Result<(Vec<f64>, Agent)> {
    let mut next = agent.clone();
    let action = next.act(obs)?;
    Ok((action, next))
}
