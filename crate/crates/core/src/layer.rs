//! Permutation-invariant sensory layers.
//!
//! Both layer kinds see the observation one component at a time. Component
//! `i` is encoded together with the previous action by two small shared
//! encoders, so swapping two components swaps two encoded rows and nothing
//! else. The rows are then reduced by an order-independent operation:
//!
//! * **Cooperator**: `R = tanh(W_R [o_i; a] + b_R)`, `D = tanh(W_D o_i + b_D)`,
//!   context `C = P + D̃ + U` with `P = R`, `D̃` the distal mix of `D` and `U`
//!   one positional row shared by every component. Each entry is modulated,
//!   `m[i][k] = modulate(kind, R[i][k], C[i][k])`, and the message is the
//!   column mean of `m`.
//! * **Transformer**: `K` and `V` are built like `R` and `D`, the query is the
//!   fixed positional row, and the message is
//!   `tanh(softmax(q Kᵀ / √d) V)` with the softmax taken over components.
//!
//! Both kinds own exactly four tensors of the same shapes, so their
//! parameter counts agree for equal dimensions.
//!
//! Flat parameter layout (shared by both kinds):
//!
//! ```text
//! [ W_a (d_msg x (1 + d_action), row-major) | b_a (d_msg) | W_b (d_msg x 1) | b_b (d_msg) ]
//! ```
//!
//! where `a` is the R/K encoder and `b` the D/V encoder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulation::{modulate, ModulationKind};
use crate::numerics::{mat_mul, positional_row, softmax, Matrix};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Cooperator(ModulationKind),
    Transformer,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Cooperator(_) => "cooperator",
            LayerKind::Transformer => "transformer",
        }
    }

    /// Modulation used by a cooperator layer. Transformer layers report
    /// `None`.
    pub fn modulation(self) -> Option<ModulationKind> {
        match self {
            LayerKind::Cooperator(m) => Some(m),
            LayerKind::Transformer => None,
        }
    }

    /// Builds a kind from its CLI names.
    pub fn from_names(layer: &str, modulation: ModulationKind) -> Result<Self> {
        match layer {
            "cooperator" => Ok(LayerKind::Cooperator(modulation)),
            "transformer" => Ok(LayerKind::Transformer),
            other => Err(Error::UnknownName {
                what: "layer kind",
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Cooperator(m) => write!(f, "cooperator/{m}"),
            LayerKind::Transformer => f.write_str("transformer"),
        }
    }
}

/// How the distal context of component `i` is assembled from the `D` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMixing {
    /// Row `i` uses its own `D` row.
    Rowwise,
    /// Row `i` uses the mean of the other components' `D` rows (zero when N = 1).
    #[default]
    NeighborMean,
}

impl ContextMixing {
    pub fn name(self) -> &'static str {
        match self {
            ContextMixing::Rowwise => "rowwise",
            ContextMixing::NeighborMean => "neighbormean",
        }
    }
}

impl FromStr for ContextMixing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rowwise" => Ok(ContextMixing::Rowwise),
            "neighbormean" => Ok(ContextMixing::NeighborMean),
            other => Err(Error::UnknownName {
                what: "context mixing",
                value: other.to_string(),
            }),
        }
    }
}

/// `|W_R| + |b_R| + |W_D| + |b_D|`
pub const fn cooperator_param_count(d_msg: usize, d_action: usize) -> usize {
    let w_r = d_msg * (1 + d_action);
    let w_d = d_msg;
    w_r + d_msg + w_d + d_msg
}

/// `|W_K| + |b_K| + |W_V| + |b_V|`
pub const fn transformer_param_count(d_msg: usize, d_action: usize) -> usize {
    let w_k = d_msg * (1 + d_action);
    let w_v = d_msg;
    w_k + d_msg + w_v + d_msg
}

pub const fn layer_param_count(kind: &LayerKind, d_msg: usize, d_action: usize) -> usize {
    match kind {
        LayerKind::Cooperator(_) => cooperator_param_count(d_msg, d_action),
        LayerKind::Transformer => transformer_param_count(d_msg, d_action),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub n_components: usize,
    pub d_msg: usize,
    pub d_action: usize,
    pub kind: LayerKind,
    pub mixing: ContextMixing,
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::InvalidConfig("n_components must be at least 1".into()));
        }
        if self.d_msg == 0 || self.d_msg % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "d_msg must be even and positive, got {}",
                self.d_msg
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        layer_param_count(&self.kind, self.d_msg, self.d_action)
    }

    fn encoder_in(&self) -> usize {
        1 + self.d_action
    }
}

pub fn param_count(config: &LayerConfig) -> usize {
    config.param_count()
}

/// A layer configuration together with its flat weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    config: LayerConfig,
    theta: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(config: LayerConfig) -> Result<Self> {
        load_params(config, vec![0.0; config.param_count()])
    }

    /// Weights drawn i.i.d. from `N(0, scale²)`.
    pub fn random(config: LayerConfig, rng: &mut RngState, scale: f64) -> Result<Self> {
        let theta = (0..config.param_count())
            .map(|_| scale * rng.gaussian())
            .collect();
        load_params(config, theta)
    }

    pub fn config(&self) -> &LayerConfig {
        &self.config
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let d = self.config.d_msg;
        let wa = d * self.config.encoder_in();
        let (w_a, rest) = self.theta.split_at(wa);
        let (b_a, rest) = rest.split_at(d);
        let (w_b, b_b) = rest.split_at(d);
        (w_a, b_a, w_b, b_b)
    }

    /// Weights of the R/K encoder as a `d_msg x (1 + d_action)` matrix.
    pub fn w_a(&self) -> Matrix {
        let (w, ..) = self.split();
        Matrix::from_vec(self.config.d_msg, self.config.encoder_in(), w.to_vec())
            .expect("layout checked on load")
    }

    pub fn b_a(&self) -> &[f64] {
        self.split().1
    }

    /// Weights of the D/V encoder as a `d_msg x 1` matrix.
    pub fn w_b(&self) -> Matrix {
        let (_, _, w, _) = self.split();
        Matrix::from_vec(self.config.d_msg, 1, w.to_vec()).expect("layout checked on load")
    }

    pub fn b_b(&self) -> &[f64] {
        self.split().3
    }
}

pub fn flatten_params(params: &LayerParams) -> Vec<f64> {
    params.theta.clone()
}

pub fn load_params(config: LayerConfig, theta: Vec<f64>) -> Result<LayerParams> {
    config.validate()?;
    if theta.len() != config.param_count() {
        return Err(Error::dims(
            "load_params",
            format!("{} parameters", config.param_count()),
            format!("{} parameters", theta.len()),
        ));
    }
    Ok(LayerParams { config, theta })
}

fn check_inputs(config: &LayerConfig, obs: &[f64], prev_action: &[f64]) -> Result<()> {
    if obs.len() != config.n_components {
        return Err(Error::dims(
            "layer input",
            format!("{} observation components", config.n_components),
            obs.len(),
        ));
    }
    if prev_action.len() != config.d_action {
        return Err(Error::dims(
            "layer input",
            format!("{} action components", config.d_action),
            prev_action.len(),
        ));
    }
    Ok(())
}

/// `tanh(X Wᵀ + 1 bᵀ)` for a batch of input rows.
fn encode(inputs: &Matrix, w: &Matrix, b: &[f64]) -> Matrix {
    let mut out = mat_mul(inputs, &w.transpose()).expect("encoder shapes fixed by config");
    for r in 0..out.rows() {
        for (v, bias) in out.row_mut(r).iter_mut().zip(b) {
            *v = (*v + bias).tanh();
        }
    }
    out
}

/// Per-component encodings `(R, D)` (or `(K, V)` for the baseline), each
/// `N x d_msg`.
pub fn encode_rd(params: &LayerParams, obs: &[f64], prev_action: &[f64]) -> Result<(Matrix, Matrix)> {
    let cfg = &params.config;
    check_inputs(cfg, obs, prev_action)?;
    let n = cfg.n_components;
    let mut with_action = Matrix::zeros(n, cfg.encoder_in());
    for (i, &o) in obs.iter().enumerate() {
        let row = with_action.row_mut(i);
        row[0] = o;
        row[1..].copy_from_slice(prev_action);
    }
    let alone = Matrix::from_vec(n, 1, obs.to_vec())?;
    let r = encode(&with_action, &params.w_a(), params.b_a());
    let d = encode(&alone, &params.w_b(), params.b_b());
    Ok((r, d))
}

/// `C = P + D̃ + U` with `P = R` and `U` the positional row for index 0 on
/// every component.
pub fn build_context(r: &Matrix, d: &Matrix, config: &LayerConfig) -> Result<Matrix> {
    let expected = (config.n_components, config.d_msg);
    if r.shape() != expected || d.shape() != expected {
        return Err(Error::dims(
            "build_context",
            format!("{expected:?}"),
            format!("R {:?}, D {:?}", r.shape(), d.shape()),
        ));
    }
    let (n, width) = expected;
    let u = positional_row(width, 0)?;
    let distal = match config.mixing {
        ContextMixing::Rowwise => d.clone(),
        ContextMixing::NeighborMean => {
            let mut out = Matrix::zeros(n, width);
            if n > 1 {
                let total: Vec<f64> = (0..width)
                    .map(|k| (0..n).map(|j| d.get(j, k)).sum())
                    .collect();
                let denom = (n - 1) as f64;
                for i in 0..n {
                    for k in 0..width {
                        out.set(i, k, (total[k] - d.get(i, k)) / denom);
                    }
                }
            }
            out
        }
    };
    let mut c = r.add(&distal)?;
    for i in 0..n {
        for (v, uk) in c.row_mut(i).iter_mut().zip(&u) {
            *v += uk;
        }
    }
    Ok(c)
}

/// Modulated rows `m` (`N x d_msg`) of a cooperator layer, before pooling.
pub fn modulated_rows(params: &LayerParams, obs: &[f64], prev_action: &[f64]) -> Result<Matrix> {
    let kind = match params.config.kind {
        LayerKind::Cooperator(kind) => kind,
        LayerKind::Transformer => {
            return Err(Error::InvalidConfig(
                "modulated rows exist only for cooperator layers".into(),
            ))
        }
    };
    let (r, d) = encode_rd(params, obs, prev_action)?;
    let c = build_context(&r, &d, &params.config)?;
    let mut m = r;
    for (mv, cv) in m.as_mut_slice().iter_mut().zip(c.as_slice()) {
        *mv = modulate(kind, *mv, *cv);
    }
    Ok(m)
}

/// Softmax attention of the fixed query over the components.
pub fn attention_weights(params: &LayerParams, obs: &[f64], prev_action: &[f64]) -> Result<Vec<f64>> {
    let (k, _) = encode_rd(params, obs, prev_action)?;
    attention_from_keys(&k)
}

fn attention_from_keys(k: &Matrix) -> Result<Vec<f64>> {
    let width = k.cols();
    let q = Matrix::from_vec(width, 1, positional_row(width, 0)?)?;
    let scale = (width as f64).sqrt();
    let scores = mat_mul(k, &q)?.map(|s| s / scale);
    Ok(softmax(scores.as_slice()))
}

/// Fixed-size message produced by a sensory layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Message(pub Vec<f64>);

impl Message {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &Message) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn layer_forward(params: &LayerParams, obs: &[f64], prev_action: &[f64]) -> Result<Message> {
    match params.config.kind {
        LayerKind::Cooperator(_) => {
            let m = modulated_rows(params, obs, prev_action)?;
            Ok(Message(m.column_mean()))
        }
        LayerKind::Transformer => {
            let (k, v) = encode_rd(params, obs, prev_action)?;
            let weights = attention_from_keys(&k)?;
            let w = Matrix::from_vec(1, weights.len(), weights)?;
            let pooled = mat_mul(&w, &v)?;
            Ok(Message(pooled.as_slice().iter().map(|x| x.tanh()).collect()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: LayerKind, n: usize, d_msg: usize, d_action: usize) -> LayerConfig {
        LayerConfig {
            n_components: n,
            d_msg,
            d_action,
            kind,
            mixing: ContextMixing::NeighborMean,
        }
    }

    fn coop() -> LayerKind {
        LayerKind::Cooperator(ModulationKind::Cooperation)
    }

    proptest::proptest! {
        #[test]
        fn kinds_have_equal_counts(d_msg in 1usize..200, d_action in 0usize..10) {
            proptest::prop_assert_eq!(
                cooperator_param_count(d_msg, d_action),
                transformer_param_count(d_msg, d_action)
            );
        }
    }

    #[test]
    fn param_counts() {
        for kind in [coop(), LayerKind::Transformer] {
            assert_eq!(config(kind, 5, 32, 1).param_count(), 160);
            assert_eq!(config(kind, 3, 2, 0).param_count(), 8);
        }
    }

    #[test]
    fn zero_weights_encode_to_zero() {
        let p = LayerParams::zeros(config(coop(), 4, 6, 2)).unwrap();
        let (r, d) = encode_rd(&p, &[0.3, -1.0, 2.0, 0.0], &[0.5, -0.5]).unwrap();
        assert_eq!(r, Matrix::zeros(4, 6));
        assert_eq!(d, Matrix::zeros(4, 6));
    }

    #[test]
    fn equal_components_encode_equally() {
        let mut rng = RngState::new(11);
        let p = LayerParams::random(config(coop(), 3, 4, 1), &mut rng, 1.0).unwrap();
        let (r, d) = encode_rd(&p, &[0.7, -0.2, 0.7], &[0.1]).unwrap();
        assert_eq!(r.row(0), r.row(2));
        assert_eq!(d.row(0), d.row(2));
        assert_ne!(r.row(0), r.row(1));
    }

    #[test]
    fn encoders_are_row_equivariant() {
        let mut rng = RngState::new(12);
        let p = LayerParams::random(config(coop(), 4, 4, 1), &mut rng, 1.0).unwrap();
        let obs = [0.1, 0.9, -0.4, 1.3];
        let perm = [2, 0, 3, 1];
        let shuffled: Vec<f64> = perm.iter().map(|&j| obs[j]).collect();
        let (r, d) = encode_rd(&p, &obs, &[0.2]).unwrap();
        let (rs, ds) = encode_rd(&p, &shuffled, &[0.2]).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            assert_eq!(rs.row(i), r.row(j));
            assert_eq!(ds.row(i), d.row(j));
        }
    }

    #[test]
    fn input_length_errors() {
        let p = LayerParams::zeros(config(coop(), 3, 4, 1)).unwrap();
        assert!(encode_rd(&p, &[0.0; 2], &[0.0]).is_err());
        assert!(encode_rd(&p, &[0.0; 3], &[]).is_err());
        assert!(layer_forward(&p, &[0.0; 4], &[0.0]).is_err());
    }

    #[test]
    fn single_component_has_no_neighbors() {
        let cfg = config(coop(), 1, 4, 0);
        let d = Matrix::from_vec(1, 4, vec![0.5, -0.5, 0.25, 1.0]).unwrap();
        let r = Matrix::zeros(1, 4);
        let c = build_context(&r, &d, &cfg).unwrap();
        assert_eq!(c.row(0), positional_row(4, 0).unwrap().as_slice());
    }

    #[test]
    fn zero_inputs_give_positional_context() {
        let cfg = config(coop(), 3, 6, 1);
        let z = Matrix::zeros(3, 6);
        let c = build_context(&z, &z, &cfg).unwrap();
        let u = positional_row(6, 0).unwrap();
        for i in 0..3 {
            assert_eq!(c.row(i), u.as_slice());
        }
    }

    #[test]
    fn neighbor_mean_of_identical_rows() {
        let cfg = config(coop(), 4, 2, 1);
        let v = [0.3, -0.8];
        let d = Matrix::from_rows(&vec![v.to_vec(); 4]).unwrap();
        let r = Matrix::zeros(4, 2);
        let c = build_context(&r, &d, &cfg).unwrap();
        for i in 0..4 {
            assert!((c.get(i, 0) - (0.3 + 0.0)).abs() < 1e-15);
            assert!((c.get(i, 1) - (-0.8 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn context_shape_mismatch() {
        let cfg = config(coop(), 3, 4, 1);
        assert!(build_context(&Matrix::zeros(3, 4), &Matrix::zeros(2, 4), &cfg).is_err());
    }

    #[test]
    fn zero_weight_cooperator_message() {
        for kind in ModulationKind::ALL {
            let p = LayerParams::zeros(config(LayerKind::Cooperator(kind), 5, 4, 1)).unwrap();
            let msg = layer_forward(&p, &[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0]).unwrap();
            let u = positional_row(4, 0).unwrap();
            let expected: Vec<f64> = u.iter().map(|&uk| modulate(kind, 0.0, uk)).collect();
            assert_eq!(msg.values(), expected.as_slice(), "{kind}");
        }
    }

    #[test]
    fn single_component_transformer_is_tanh_of_value_row() {
        let mut rng = RngState::new(5);
        let p = LayerParams::random(config(LayerKind::Transformer, 1, 4, 1), &mut rng, 1.0).unwrap();
        let w = attention_weights(&p, &[0.4], &[0.3]).unwrap();
        assert_eq!(w, vec![1.0]);
        let (_, v) = encode_rd(&p, &[0.4], &[0.3]).unwrap();
        let msg = layer_forward(&p, &[0.4], &[0.3]).unwrap();
        let expected: Vec<f64> = v.row(0).iter().map(|x| x.tanh()).collect();
        assert_eq!(msg.values(), expected.as_slice());
    }

    #[test]
    fn attention_is_a_distribution() {
        let mut rng = RngState::new(6);
        for _ in 0..50 {
            let p = LayerParams::random(config(LayerKind::Transformer, 7, 8, 1), &mut rng, 2.0).unwrap();
            let obs: Vec<f64> = (0..7).map(|_| rng.gaussian() * 3.0).collect();
            let w = attention_weights(&p, &obs, &[rng.gaussian()]).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(w.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn flat_round_trip_and_length_check() {
        let mut rng = RngState::new(8);
        let cfg = config(coop(), 5, 32, 1);
        let p = LayerParams::random(cfg, &mut rng, 1.0).unwrap();
        let back = load_params(cfg, flatten_params(&p)).unwrap();
        assert_eq!(
            back.theta().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            p.theta().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(load_params(cfg, vec![0.0; 159]).is_err());
        let zero = load_params(cfg, vec![0.0; 160]).unwrap();
        assert!(zero.theta().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_message_width_rejected() {
        assert!(LayerParams::zeros(config(coop(), 3, 5, 1)).is_err());
        assert!(LayerParams::zeros(config(coop(), 0, 4, 1)).is_err());
    }

    #[test]
    fn kind_names() {
        assert_eq!(
            LayerKind::from_names("transformer", ModulationKind::Tm2).unwrap(),
            LayerKind::Transformer
        );
        assert_eq!(
            LayerKind::from_names("cooperator", ModulationKind::Tm2).unwrap(),
            LayerKind::Cooperator(ModulationKind::Tm2)
        );
        assert!(LayerKind::from_names("lstm", ModulationKind::Tm2).is_err());
        assert_eq!("rowwise".parse::<ContextMixing>().unwrap(), ContextMixing::Rowwise);
    }
}
