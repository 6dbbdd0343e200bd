//! Naive scalar re-implementation of the sensory layers.
//!
//! Written with explicit loops directly from the layer definitions and
//! sharing no code with [`crate::layer`] beyond the parameter container, so
//! the two can be checked against each other.

use crate::error::{Error, Result};
use crate::layer::{ContextMixing, LayerKind, LayerParams, Message};
use crate::modulation::ModulationKind;

fn positional_zero(k: usize) -> f64 {
    // position 0: sin(0) on even slots, cos(0) on odd slots
    if k % 2 == 0 {
        0.0f64.sin()
    } else {
        0.0f64.cos()
    }
}

fn transfer(kind: ModulationKind, r: f64, c: f64) -> f64 {
    let rc = r * c;
    let bounded = if rc > 500.0 {
        500.0
    } else if rc < -500.0 {
        -500.0
    } else {
        rc
    };
    match kind {
        ModulationKind::Cooperation => {
            let pre = r * r + 2.0 * r + 2.0 * c * (1.0 + r.abs());
            if pre > 0.0 {
                pre
            } else {
                0.0
            }
        }
        ModulationKind::Tm1 => 0.5 * r * (1.0 + bounded.exp()),
        ModulationKind::Tm2 => r + r * c,
        ModulationKind::Tm3 => r * (1.0 + rc.tanh()),
        ModulationKind::Tm4 => r * 2f64.powf(bounded),
    }
}

pub fn reference_forward(params: &LayerParams, obs: &[f64], prev_action: &[f64]) -> Result<Message> {
    let cfg = *params.config();
    let n = cfg.n_components;
    let dm = cfg.d_msg;
    let da = cfg.d_action;
    if obs.len() != n || prev_action.len() != da {
        return Err(Error::dims(
            "reference_forward",
            format!("{n} observations and {da} actions"),
            format!("{} observations and {} actions", obs.len(), prev_action.len()),
        ));
    }
    let theta = params.theta();
    let stride = 1 + da;
    let w_a = |k: usize, j: usize| theta[k * stride + j];
    let b_a = |k: usize| theta[dm * stride + k];
    let w_b = |k: usize| theta[dm * stride + dm + k];
    let b_b = |k: usize| theta[dm * stride + 2 * dm + k];

    let mut a_rows = vec![vec![0.0; dm]; n];
    let mut b_rows = vec![vec![0.0; dm]; n];
    for i in 0..n {
        for k in 0..dm {
            let mut acc = w_a(k, 0) * obs[i];
            for j in 0..da {
                acc += w_a(k, 1 + j) * prev_action[j];
            }
            a_rows[i][k] = (acc + b_a(k)).tanh();
            b_rows[i][k] = (w_b(k) * obs[i] + b_b(k)).tanh();
        }
    }

    let mut out = vec![0.0; dm];
    match cfg.kind {
        LayerKind::Cooperator(kind) => {
            for i in 0..n {
                for k in 0..dm {
                    let distal = match cfg.mixing {
                        ContextMixing::Rowwise => b_rows[i][k],
                        ContextMixing::NeighborMean => {
                            if n == 1 {
                                0.0
                            } else {
                                let mut s = 0.0;
                                for j in 0..n {
                                    if j != i {
                                        s += b_rows[j][k];
                                    }
                                }
                                s / (n - 1) as f64
                            }
                        }
                    };
                    let c = a_rows[i][k] + distal + positional_zero(k);
                    out[k] += transfer(kind, a_rows[i][k], c);
                }
            }
            for v in out.iter_mut() {
                *v /= n as f64;
            }
        }
        LayerKind::Transformer => {
            let mut scores = vec![0.0; n];
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..dm {
                    s += positional_zero(k) * a_rows[i][k];
                }
                scores[i] = s / (dm as f64).sqrt();
            }
            let mut top = scores[0];
            for &s in &scores {
                if s > top {
                    top = s;
                }
            }
            let mut z = 0.0;
            let mut w = vec![0.0; n];
            for i in 0..n {
                w[i] = (scores[i] - top).exp();
                z += w[i];
            }
            for k in 0..dm {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += w[i] / z * b_rows[i][k];
                }
                out[k] = acc.tanh();
            }
        }
    }
    Ok(Message(out))
}
