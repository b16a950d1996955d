//! Network assembly: an optional per-step modality map, an optional GRU, and
//! a dense stack that ends in the output layer (logits, identity activation).
//!
//! Every model in the zoo is an instance of this shape:
//!
//! - feed-forward nets (no map, no GRU) consume a single vector,
//! - sequence nets run the GRU over all time steps from h_0 = 0 and apply the
//!   dense stack to the final hidden state,
//! - the common-latent-space sequence net additionally routes each step
//!   through its modality's projection before the GRU.

use rand::rngs::StdRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::types::Modality;
use crate::encoders::sequence::EncodedStep;
use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::nn::layer::{Dense, DenseCache, Gru, GruCache, ModalityMap, ModalityMapStepCache};
use crate::nn::matrix::Matrix;

/// Serializable description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
        #[serde(default)]
        dropout: f64,
        #[serde(default = "default_true")]
        has_bias: bool,
    },
    Gru {
        input: usize,
        hidden: usize,
        #[serde(default)]
        dropout: f64,
        #[serde(default = "default_true")]
        has_bias: bool,
    },
    /// Two dense tanh maps (one per modality) applied per time step.
    ModalityMap {
        conversation_input: usize,
        session_input: usize,
        output: usize,
        #[serde(default = "default_true")]
        has_bias: bool,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Validates widths, dropout rates, and layer ordering (modality map
    /// first if present, at most one GRU, dense stack last and nonempty).
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        let mut seen_gru = false;
        let mut seen_dense = false;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::ModalityMap {
                    conversation_input,
                    session_input,
                    output,
                    ..
                } => {
                    if i != 0 {
                        return Err(Error::config("modality map must be the first layer"));
                    }
                    if *conversation_input < 1 || *session_input < 1 || *output < 1 {
                        return Err(Error::config("modality map widths must be ≥ 1"));
                    }
                }
                LayerSpec::Gru {
                    input,
                    hidden,
                    dropout,
                    ..
                } => {
                    if seen_gru {
                        return Err(Error::config("at most one GRU layer is supported"));
                    }
                    if seen_dense {
                        return Err(Error::config("GRU must precede the dense stack"));
                    }
                    seen_gru = true;
                    if *input < 1 || *hidden < 1 {
                        return Err(Error::config("GRU widths must be ≥ 1"));
                    }
                    check_dropout(*dropout)?;
                }
                LayerSpec::Dense {
                    input,
                    output,
                    dropout,
                    ..
                } => {
                    seen_dense = true;
                    if *input < 1 || *output < 1 {
                        return Err(Error::config("dense widths must be ≥ 1"));
                    }
                    check_dropout(*dropout)?;
                }
            }
        }
        if !seen_dense {
            return Err(Error::config("network must end in a dense output layer"));
        }
        let has_map = matches!(self.layers.first(), Some(LayerSpec::ModalityMap { .. }));
        if has_map && !seen_gru {
            return Err(Error::config("modality map requires a GRU above it"));
        }
        // Width chaining.
        let mut prev_out: Option<usize> = None;
        for layer in &self.layers {
            let (inputs, output) = match layer {
                LayerSpec::ModalityMap { output, .. } => (None, *output),
                LayerSpec::Gru { input, hidden, .. } => (Some(*input), *hidden),
                LayerSpec::Dense { input, output, .. } => (Some(*input), *output),
            };
            if let (Some(expected), Some(got)) = (prev_out, inputs) {
                if expected != got {
                    return Err(Error::config(format!(
                        "layer input width {} does not match previous output width {}",
                        got, expected
                    )));
                }
            }
            prev_out = Some(output);
        }
        Ok(())
    }

    pub fn output_width(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Dense { output, .. }) => *output,
            Some(LayerSpec::Gru { hidden, .. }) => *hidden,
            Some(LayerSpec::ModalityMap { output, .. }) => *output,
            None => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub map: Option<ModalityMap>,
    pub gru: Option<Gru>,
    pub dense: Vec<Dense>,
}

pub struct ForwardCache {
    pub map_steps: Vec<ModalityMapStepCache>,
    pub gru: Option<GruCache>,
    pub dense: Vec<DenseCache>,
}

impl Network {
    /// Builds a network with Glorot-uniform dense/input weights, orthogonal
    /// recurrent weights, and zero biases.
    pub fn new(spec: &NetworkSpec, rng: &mut StdRng) -> Result<Self> {
        spec.validate()?;
        let mut map = None;
        let mut gru = None;
        let mut dense = Vec::new();
        for layer in &spec.layers {
            match *layer {
                LayerSpec::ModalityMap {
                    conversation_input,
                    session_input,
                    output,
                    has_bias,
                } => {
                    map = Some(ModalityMap {
                        conversation: init_dense(
                            output,
                            conversation_input,
                            Activation::Tanh,
                            0.0,
                            has_bias,
                            rng,
                        ),
                        session: init_dense(output, session_input, Activation::Tanh, 0.0, has_bias, rng),
                    });
                }
                LayerSpec::Gru {
                    input,
                    hidden,
                    dropout,
                    has_bias,
                } => {
                    gru = Some(Gru {
                        w_update: glorot(hidden, input, rng),
                        u_update: orthogonal(hidden, rng),
                        b_update: vec![0.0; hidden],
                        w_reset: glorot(hidden, input, rng),
                        u_reset: orthogonal(hidden, rng),
                        b_reset: vec![0.0; hidden],
                        w_cand: glorot(hidden, input, rng),
                        u_cand: orthogonal(hidden, rng),
                        b_cand: vec![0.0; hidden],
                        has_bias,
                        dropout,
                    });
                }
                LayerSpec::Dense {
                    input,
                    output,
                    activation,
                    dropout,
                    has_bias,
                } => {
                    dense.push(init_dense(output, input, activation, dropout, has_bias, rng));
                }
            }
        }
        Ok(Network { map, gru, dense })
    }

    /// Same shape with all parameters zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Network {
        let mut n = self.clone();
        n.for_each_tensor_mut(&mut |_, t| t.fill(0.0));
        n
    }

    pub fn spec(&self) -> NetworkSpec {
        let mut layers = Vec::new();
        if let Some(m) = &self.map {
            layers.push(LayerSpec::ModalityMap {
                conversation_input: m.conversation.in_width(),
                session_input: m.session.in_width(),
                output: m.out_width(),
                has_bias: m.conversation.has_bias,
            });
        }
        if let Some(g) = &self.gru {
            layers.push(LayerSpec::Gru {
                input: g.in_width(),
                hidden: g.hidden_width(),
                dropout: g.dropout,
                has_bias: g.has_bias,
            });
        }
        for d in &self.dense {
            layers.push(LayerSpec::Dense {
                input: d.in_width(),
                output: d.out_width(),
                activation: d.activation,
                dropout: d.dropout,
                has_bias: d.has_bias,
            });
        }
        NetworkSpec { layers }
    }

    pub fn output_width(&self) -> usize {
        self.dense.last().map(|d| d.out_width()).unwrap_or(0)
    }

    fn expected_input_width(&self, modality: Modality) -> usize {
        if let Some(m) = &self.map {
            return match modality {
                Modality::Conversation => m.conversation.in_width(),
                Modality::WebSession => m.session.in_width(),
            };
        }
        if let Some(g) = &self.gru {
            return g.in_width();
        }
        self.dense[0].in_width()
    }

    /// Forward over an encoded event sequence. Returns pre-sigmoid logits.
    /// `rng` enables dropout (training); pass `None` at inference so
    /// predictions are deterministic given parameters.
    pub fn forward(
        &self,
        steps: &[EncodedStep],
        mut rng: Option<&mut StdRng>,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        if steps.is_empty() {
            return Err(Error::input("empty event sequence"));
        }
        if self.gru.is_none() && steps.len() != 1 {
            return Err(Error::input(format!(
                "feed-forward network expects a single input vector, got {} steps",
                steps.len()
            )));
        }
        for step in steps {
            let want = self.expected_input_width(step.modality);
            if step.vector.len() != want {
                return Err(Error::config(format!(
                    "input width {} does not match expected width {}",
                    step.vector.len(),
                    want
                )));
            }
            if step.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric("non-finite input vector"));
            }
        }

        let mut map_steps = Vec::new();
        let mapped: Vec<Vec<f64>> = if let Some(m) = &self.map {
            steps
                .iter()
                .map(|s| {
                    let (out, cache) = m.forward_step(&s.vector, s.modality);
                    map_steps.push(cache);
                    out
                })
                .collect()
        } else {
            steps.iter().map(|s| s.vector.clone()).collect()
        };

        let mut dense_caches = Vec::new();
        let (mut current, gru_cache) = if let Some(g) = &self.gru {
            let (h, cache) = g.forward(&mapped, rng.as_deref_mut());
            (h, Some(cache))
        } else {
            (mapped.into_iter().next().unwrap(), None)
        };

        for d in &self.dense {
            let (out, cache) = d.forward(&current, rng.as_deref_mut());
            dense_caches.push(cache);
            current = out;
        }

        if current.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite network output"));
        }

        Ok((
            current,
            ForwardCache {
                map_steps,
                gru: gru_cache,
                dense: dense_caches,
            },
        ))
    }

    /// Backward pass from dL/d(logits); accumulates parameter gradients into
    /// `grads` (a `zeros_like` mirror, or one already holding other samples'
    /// gradients).
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &[f64], grads: &mut Network) {
        let mut g = grad_logits.to_vec();
        for i in (0..self.dense.len()).rev() {
            g = self.dense[i].backward(&cache.dense[i], &g, &mut grads.dense[i]);
        }
        if let Some(gru) = &self.gru {
            let gru_cache = cache.gru.as_ref().expect("forward cache missing GRU state");
            let gru_grads = grads.gru.as_mut().expect("gradient mirror missing GRU");
            let step_grads = gru.backward(gru_cache, &g, gru_grads);
            if let Some(map) = &self.map {
                let map_grads = grads.map.as_mut().expect("gradient mirror missing map");
                for (step_cache, step_grad) in cache.map_steps.iter().zip(&step_grads) {
                    map.backward_step(step_cache, step_grad, map_grads);
                }
            }
        }
    }

    /// Walks all trainable tensors in a fixed order.
    pub fn for_each_tensor<'a>(&'a self, f: &mut impl FnMut(&str, TensorRef<'a>)) {
        if let Some(m) = &self.map {
            f("map.conversation.w", TensorRef::Mat(&m.conversation.weights));
            if m.conversation.has_bias {
                f("map.conversation.b", TensorRef::Vec(&m.conversation.bias));
            }
            f("map.session.w", TensorRef::Mat(&m.session.weights));
            if m.session.has_bias {
                f("map.session.b", TensorRef::Vec(&m.session.bias));
            }
        }
        if let Some(g) = &self.gru {
            f("gru.update.w", TensorRef::Mat(&g.w_update));
            f("gru.update.u", TensorRef::Mat(&g.u_update));
            if g.has_bias {
                f("gru.update.b", TensorRef::Vec(&g.b_update));
            }
            f("gru.reset.w", TensorRef::Mat(&g.w_reset));
            f("gru.reset.u", TensorRef::Mat(&g.u_reset));
            if g.has_bias {
                f("gru.reset.b", TensorRef::Vec(&g.b_reset));
            }
            f("gru.candidate.w", TensorRef::Mat(&g.w_cand));
            f("gru.candidate.u", TensorRef::Mat(&g.u_cand));
            if g.has_bias {
                f("gru.candidate.b", TensorRef::Vec(&g.b_cand));
            }
        }
        for (i, d) in self.dense.iter().enumerate() {
            f(&format!("dense.{}.w", i), TensorRef::Mat(&d.weights));
            if d.has_bias {
                f(&format!("dense.{}.b", i), TensorRef::Vec(&d.bias));
            }
        }
    }

    /// Mutable variant of [`Network::for_each_tensor`], same order.
    pub fn for_each_tensor_mut(&mut self, f: &mut impl FnMut(&str, &mut [f64])) {
        if let Some(m) = &mut self.map {
            f("map.conversation.w", m.conversation.weights.as_mut_slice());
            if m.conversation.has_bias {
                f("map.conversation.b", &mut m.conversation.bias);
            }
            f("map.session.w", m.session.weights.as_mut_slice());
            if m.session.has_bias {
                f("map.session.b", &mut m.session.bias);
            }
        }
        if let Some(g) = &mut self.gru {
            f("gru.update.w", g.w_update.as_mut_slice());
            f("gru.update.u", g.u_update.as_mut_slice());
            if g.has_bias {
                f("gru.update.b", &mut g.b_update);
            }
            f("gru.reset.w", g.w_reset.as_mut_slice());
            f("gru.reset.u", g.u_reset.as_mut_slice());
            if g.has_bias {
                f("gru.reset.b", &mut g.b_reset);
            }
            f("gru.candidate.w", g.w_cand.as_mut_slice());
            f("gru.candidate.u", g.u_cand.as_mut_slice());
            if g.has_bias {
                f("gru.candidate.b", &mut g.b_cand);
            }
        }
        for (i, d) in self.dense.iter_mut().enumerate() {
            f(&format!("dense.{}.w", i), d.weights.as_mut_slice());
            if d.has_bias {
                f(&format!("dense.{}.b", i), &mut d.bias);
            }
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(&mut |_, t| n += t.len());
        n
    }

    /// All parameters concatenated in tensor order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_tensor(&mut |_, t| out.extend_from_slice(t.as_slice()));
        out
    }

    /// Writes a flat parameter vector back (inverse of [`Network::flat_params`]).
    pub fn set_flat_params(&mut self, src: &[f64]) {
        let mut cursor = 0;
        self.for_each_tensor_mut(&mut |_, t| {
            t.copy_from_slice(&src[cursor..cursor + t.len()]);
            cursor += t.len();
        });
        debug_assert_eq!(cursor, src.len());
    }
}

/// Read-only view of a tensor: matrix or bias vector.
#[derive(Clone, Copy)]
pub enum TensorRef<'a> {
    Mat(&'a Matrix),
    Vec(&'a Vec<f64>),
}

impl<'a> TensorRef<'a> {
    pub fn as_slice(&self) -> &'a [f64] {
        match *self {
            TensorRef::Mat(m) => m.as_slice(),
            TensorRef::Vec(v) => v.as_slice(),
        }
    }

    pub fn len(&self) -> usize {
        self.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.as_slice().is_empty()
    }

    /// (rows, cols); bias vectors report one row.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            TensorRef::Mat(m) => (m.rows(), m.cols()),
            TensorRef::Vec(v) => (1, v.len()),
        }
    }
}

fn check_dropout(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {} not in [0, 1)", rate)));
    }
    Ok(())
}

fn init_dense(
    rows: usize,
    cols: usize,
    activation: Activation,
    dropout: f64,
    has_bias: bool,
    rng: &mut StdRng,
) -> Dense {
    Dense {
        weights: glorot(rows, cols, rng),
        bias: vec![0.0; rows],
        has_bias,
        activation,
        dropout,
    }
}

/// Glorot-uniform initialization: U(−L, L) with L = √(6 / (fan_in + fan_out)).
fn glorot(rows: usize, cols: usize, rng: &mut StdRng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.random_range(-limit..limit);
    }
    m
}

/// Random orthogonal square matrix via modified Gram-Schmidt on a Gaussian
/// draw; used for recurrent weights.
fn orthogonal(n: usize, rng: &mut StdRng) -> Matrix {
    use rand_distr::{Distribution, StandardNormal};
    let mut m = Matrix::zeros(n, n);
    for v in m.as_mut_slice() {
        *v = StandardNormal.sample(rng);
    }
    for i in 0..n {
        for j in 0..i {
            let proj = crate::nn::matrix::dot(m.row(i), m.row(j));
            let (head, tail) = m.as_mut_slice().split_at_mut(i * n);
            let row_j = &head[j * n..(j + 1) * n];
            let row_i = &mut tail[..n];
            crate::nn::matrix::axpy(-proj, row_j, row_i);
        }
        let norm = crate::nn::matrix::dot(m.row(i), m.row(i)).sqrt();
        if norm > 1e-12 {
            for v in m.row_mut(i) {
                *v /= norm;
            }
        } else {
            // Degenerate draw; fall back to a unit basis row.
            m.row_mut(i).fill(0.0);
            m.row_mut(i)[i % n] = 1.0;
        }
    }
    m
}
