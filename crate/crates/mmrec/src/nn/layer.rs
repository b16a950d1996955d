//! Dense, gated-recurrent, and modality-routed layers with analytic
//! gradients.
//!
//! Each forward pass returns a cache holding what the backward pass needs.
//! Gradients are accumulated into a zero-initialized mirror of the layer
//! (see `Network::zeros_like`), so mini-batch accumulation is a plain `+=`.
//!
//! Dropout follows the inverted convention: surviving activations are scaled
//! by `1/(1-rate)` at train time and inference applies no mask.

use rand::rngs::StdRng;
use rand::Rng;

use crate::data::types::Modality;
use crate::nn::activation::Activation;
use crate::nn::matrix::Matrix;

/// Dense layer `y = act(Wx + b)` with optional dropout on the activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix, // out × in
    pub bias: Vec<f64>,
    pub has_bias: bool,
    pub activation: Activation,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    /// Activation output before dropout.
    pub output: Vec<f64>,
    /// Multiplicative dropout mask (already includes the 1/(1-rate) scale);
    /// `None` at inference or when the rate is zero.
    pub mask: Option<Vec<f64>>,
}

impl Dense {
    pub fn in_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_width(&self) -> usize {
        self.weights.rows()
    }

    /// Forward pass; `rng` enables dropout (train mode).
    pub fn forward(&self, x: &[f64], rng: Option<&mut StdRng>) -> (Vec<f64>, DenseCache) {
        debug_assert_eq!(x.len(), self.in_width());
        let mut z = vec![0.0; self.out_width()];
        self.weights.matvec(x, &mut z);
        if self.has_bias {
            for (zi, bi) in z.iter_mut().zip(&self.bias) {
                *zi += bi;
            }
        }
        self.activation.apply_slice(&mut z);
        let output = z;

        let mask = match rng {
            Some(rng) if self.dropout > 0.0 => Some(dropout_mask(self.dropout, output.len(), rng)),
            _ => None,
        };
        let mut out = output.clone();
        if let Some(m) = &mask {
            for (o, mi) in out.iter_mut().zip(m) {
                *o *= mi;
            }
        }
        (
            out,
            DenseCache {
                input: x.to_vec(),
                output,
                mask,
            },
        )
    }

    /// Backward pass. `grad_out` is dL/d(post-dropout output). Returns
    /// dL/d(input); parameter gradients accumulate into `grads`.
    pub fn backward(&self, cache: &DenseCache, grad_out: &[f64], grads: &mut Dense) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        if let Some(m) = &cache.mask {
            for (gi, mi) in g.iter_mut().zip(m) {
                *gi *= mi;
            }
        }
        for (gi, yi) in g.iter_mut().zip(&cache.output) {
            *gi *= self.activation.grad_from_output(*yi);
        }
        grads.weights.add_outer(&g, &cache.input);
        if self.has_bias {
            for (bi, gi) in grads.bias.iter_mut().zip(&g) {
                *bi += gi;
            }
        }
        let mut dx = vec![0.0; self.in_width()];
        self.weights.matvec_transpose_add(&g, &mut dx);
        dx
    }
}

fn dropout_mask(rate: f64, len: usize, rng: &mut StdRng) -> Vec<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect()
}

/// Single GRU layer. Gate equations per step:
///
/// ```text
/// z_i = σ(W_z x_i + U_z h_{i-1} + b_z)          update gate
/// r_i = σ(W_r x_i + U_r h_{i-1} + b_r)          reset gate
/// ĥ_i = tanh(W x_i + U (r_i ⊙ h_{i-1}) + b)     candidate
/// h_i = (1 − z_i) ⊙ h_{i-1} + z_i ⊙ ĥ_i
/// ```
///
/// Dropout (if any) applies to the final hidden state handed to the layers
/// above.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub w_update: Matrix,
    pub u_update: Matrix,
    pub b_update: Vec<f64>,
    pub w_reset: Matrix,
    pub u_reset: Matrix,
    pub b_reset: Vec<f64>,
    pub w_cand: Matrix,
    pub u_cand: Matrix,
    pub b_cand: Vec<f64>,
    pub has_bias: bool,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub h_cand: Vec<f64>,
    /// r ⊙ h_prev, the reset-gated recurrent input of the candidate.
    pub rh: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    pub steps: Vec<GruStepCache>,
    pub h_final: Vec<f64>,
    pub mask: Option<Vec<f64>>,
}

impl Gru {
    pub fn in_width(&self) -> usize {
        self.w_update.cols()
    }

    pub fn hidden_width(&self) -> usize {
        self.w_update.rows()
    }

    /// One recurrence step; returns the new hidden state and the step cache.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruStepCache) {
        debug_assert_eq!(x.len(), self.in_width());
        debug_assert_eq!(h_prev.len(), self.hidden_width());
        let n = self.hidden_width();

        let mut z = vec![0.0; n];
        self.w_update.matvec(x, &mut z);
        self.u_update.matvec_add(h_prev, &mut z);
        let mut r = vec![0.0; n];
        self.w_reset.matvec(x, &mut r);
        self.u_reset.matvec_add(h_prev, &mut r);
        if self.has_bias {
            for i in 0..n {
                z[i] += self.b_update[i];
                r[i] += self.b_reset[i];
            }
        }
        Activation::Sigmoid.apply_slice(&mut z);
        Activation::Sigmoid.apply_slice(&mut r);

        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
        let mut h_cand = vec![0.0; n];
        self.w_cand.matvec(x, &mut h_cand);
        self.u_cand.matvec_add(&rh, &mut h_cand);
        if self.has_bias {
            for i in 0..n {
                h_cand[i] += self.b_cand[i];
            }
        }
        Activation::Tanh.apply_slice(&mut h_cand);

        let h: Vec<f64> = (0..n)
            .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * h_cand[i])
            .collect();

        (
            h.clone(),
            GruStepCache {
                input: x.to_vec(),
                h_prev: h_prev.to_vec(),
                z,
                r,
                h_cand,
                rh,
            },
        )
    }

    /// Runs the recurrence over a whole sequence from h_0 = 0.
    pub fn forward(&self, inputs: &[Vec<f64>], rng: Option<&mut StdRng>) -> (Vec<f64>, GruCache) {
        let mut h = vec![0.0; self.hidden_width()];
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (h_next, cache) = self.step(x, &h);
            steps.push(cache);
            h = h_next;
        }
        let h_final = h.clone();
        let mask = match rng {
            Some(rng) if self.dropout > 0.0 => Some(dropout_mask(self.dropout, h.len(), rng)),
            _ => None,
        };
        if let Some(m) = &mask {
            for (hi, mi) in h.iter_mut().zip(m) {
                *hi *= mi;
            }
        }
        (
            h,
            GruCache {
                steps,
                h_final,
                mask,
            },
        )
    }

    /// Backpropagation through time. `grad_h_out` is dL/d(post-dropout final
    /// hidden state). Returns dL/d(input) per step, in step order.
    pub fn backward(&self, cache: &GruCache, grad_h_out: &[f64], grads: &mut Gru) -> Vec<Vec<f64>> {
        let n = self.hidden_width();
        let mut dh = grad_h_out.to_vec();
        if let Some(m) = &cache.mask {
            for (gi, mi) in dh.iter_mut().zip(m) {
                *gi *= mi;
            }
        }

        let mut input_grads = vec![Vec::new(); cache.steps.len()];
        for (t, step) in cache.steps.iter().enumerate().rev() {
            // h = (1−z)·h_prev + z·ĥ
            let mut dz = vec![0.0; n];
            let mut dcand = vec![0.0; n];
            let mut dh_prev = vec![0.0; n];
            for i in 0..n {
                dz[i] = dh[i] * (step.h_cand[i] - step.h_prev[i]);
                dcand[i] = dh[i] * step.z[i];
                dh_prev[i] = dh[i] * (1.0 - step.z[i]);
            }

            // candidate pre-activation
            let mut da_cand = dcand;
            for i in 0..n {
                da_cand[i] *= 1.0 - step.h_cand[i] * step.h_cand[i];
            }
            grads.w_cand.add_outer(&da_cand, &step.input);
            grads.u_cand.add_outer(&da_cand, &step.rh);
            if self.has_bias {
                for i in 0..n {
                    grads.b_cand[i] += da_cand[i];
                }
            }
            let mut d_rh = vec![0.0; n];
            self.u_cand.matvec_transpose_add(&da_cand, &mut d_rh);
            let mut da_reset = vec![0.0; n];
            for i in 0..n {
                da_reset[i] = d_rh[i] * step.h_prev[i] * step.r[i] * (1.0 - step.r[i]);
                dh_prev[i] += d_rh[i] * step.r[i];
            }
            grads.w_reset.add_outer(&da_reset, &step.input);
            grads.u_reset.add_outer(&da_reset, &step.h_prev);
            if self.has_bias {
                for i in 0..n {
                    grads.b_reset[i] += da_reset[i];
                }
            }
            self.u_reset.matvec_transpose_add(&da_reset, &mut dh_prev);

            // update gate pre-activation
            let mut da_update = dz;
            for i in 0..n {
                da_update[i] *= step.z[i] * (1.0 - step.z[i]);
            }
            grads.w_update.add_outer(&da_update, &step.input);
            grads.u_update.add_outer(&da_update, &step.h_prev);
            if self.has_bias {
                for i in 0..n {
                    grads.b_update[i] += da_update[i];
                }
            }
            self.u_update.matvec_transpose_add(&da_update, &mut dh_prev);

            let mut dx = vec![0.0; self.in_width()];
            self.w_cand.matvec_transpose_add(&da_cand, &mut dx);
            self.w_reset.matvec_transpose_add(&da_reset, &mut dx);
            self.w_update.matvec_transpose_add(&da_update, &mut dx);
            input_grads[t] = dx;

            dh = dh_prev;
        }
        input_grads
    }
}

/// Per-timestep modality-routed projection into a common latent space:
/// conversations go through one tanh map, web sessions through the other.
/// Both maps are trained jointly with the rest of the network; a step of one
/// modality contributes no gradient to the other modality's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityMap {
    pub conversation: Dense,
    pub session: Dense,
}

#[derive(Debug, Clone)]
pub struct ModalityMapStepCache {
    pub modality: Modality,
    pub cache: DenseCache,
}

impl ModalityMap {
    pub fn out_width(&self) -> usize {
        self.conversation.out_width()
    }

    pub fn forward_step(&self, x: &[f64], modality: Modality) -> (Vec<f64>, ModalityMapStepCache) {
        let (out, cache) = match modality {
            Modality::Conversation => self.conversation.forward(x, None),
            Modality::WebSession => self.session.forward(x, None),
        };
        (out, ModalityMapStepCache { modality, cache })
    }

    pub fn backward_step(
        &self,
        cache: &ModalityMapStepCache,
        grad_out: &[f64],
        grads: &mut ModalityMap,
    ) -> Vec<f64> {
        match cache.modality {
            Modality::Conversation => {
                self.conversation
                    .backward(&cache.cache, grad_out, &mut grads.conversation)
            }
            Modality::WebSession => self.session.backward(&cache.cache, grad_out, &mut grads.session),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::sigmoid;

    fn dense(rows: usize, cols: usize, w: Vec<f64>, b: Vec<f64>, act: Activation) -> Dense {
        Dense {
            weights: Matrix::from_vec(rows, cols, w).unwrap(),
            bias: b,
            has_bias: true,
            activation: act,
            dropout: 0.0,
        }
    }

    fn zero_gru(input: usize, hidden: usize) -> Gru {
        Gru {
            w_update: Matrix::zeros(hidden, input),
            u_update: Matrix::zeros(hidden, hidden),
            b_update: vec![0.0; hidden],
            w_reset: Matrix::zeros(hidden, input),
            u_reset: Matrix::zeros(hidden, hidden),
            b_reset: vec![0.0; hidden],
            w_cand: Matrix::zeros(hidden, input),
            u_cand: Matrix::zeros(hidden, hidden),
            b_cand: vec![0.0; hidden],
            has_bias: true,
            dropout: 0.0,
        }
    }

    #[test]
    fn dense_zero_input_tanh_is_zero() {
        let layer = dense(2, 2, vec![0.3, -0.2, 0.1, 0.4], vec![0.0, 0.0], Activation::Tanh);
        let (y, _) = layer.forward(&[0.0, 0.0], None);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn dense_zero_input_sigmoid_is_half() {
        let layer = dense(3, 2, vec![0.5; 6], vec![0.0; 3], Activation::Sigmoid);
        let (y, _) = layer.forward(&[0.0, 0.0], None);
        assert_eq!(y, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn dense_identity_map() {
        let layer = dense(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Identity);
        let (y, _) = layer.forward(&[1.0, 2.0], None);
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn dense_identity_weight_gradient_is_outer_product() {
        // For identity activation dL/dW = g ⊗ x.
        let layer = dense(2, 3, vec![0.1; 6], vec![0.0; 2], Activation::Identity);
        let x = [1.0, 2.0, 3.0];
        let (_, cache) = layer.forward(&x, None);
        let mut grads = Dense {
            weights: Matrix::zeros(2, 3),
            bias: vec![0.0; 2],
            has_bias: true,
            activation: Activation::Identity,
            dropout: 0.0,
        };
        let g = [0.5, -1.0];
        layer.backward(&cache, &g, &mut grads);
        assert_eq!(grads.weights.row(0), &[0.5, 1.0, 1.5]);
        assert_eq!(grads.weights.row(1), &[-1.0, -2.0, -3.0]);
        assert_eq!(grads.bias, vec![0.5, -1.0]);
    }

    #[test]
    fn gru_zero_weights_halves_previous_state() {
        // z = σ(0) = 0.5 and ĥ = tanh(0) = 0, so h = 0.5·h_prev.
        let gru = zero_gru(2, 3);
        let h_prev = [0.4, -0.8, 1.2];
        let (h, _) = gru.step(&[1.0, -1.0], &h_prev);
        for (hi, pi) in h.iter().zip(&h_prev) {
            assert!((hi - 0.5 * pi).abs() < 1e-15);
        }
    }

    #[test]
    fn gru_zero_weights_zero_state_stays_zero() {
        let gru = zero_gru(2, 3);
        let (h, _) = gru.step(&[0.3, 0.9], &[0.0; 3]);
        assert_eq!(h, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn gru_scalar_closed_form() {
        // 1-dim, all six weights = 1, biases = 0, k = 1, h_prev = 1:
        // z = r = σ(2), ĥ = tanh(1 + σ(2)), h = (1−z) + z·ĥ.
        let mut gru = zero_gru(1, 1);
        for m in [
            &mut gru.w_update,
            &mut gru.u_update,
            &mut gru.w_reset,
            &mut gru.u_reset,
            &mut gru.w_cand,
            &mut gru.u_cand,
        ] {
            m.as_mut_slice()[0] = 1.0;
        }
        let (h, cache) = gru.step(&[1.0], &[1.0]);
        let z = sigmoid(2.0);
        let expected = (1.0 - z) + z * (1.0 + z).tanh();
        assert!((h[0] - expected).abs() < 1e-12);
        assert!((cache.z[0] - z).abs() < 1e-12);
        assert!((cache.r[0] - z).abs() < 1e-12);
    }

    #[test]
    fn gru_state_is_convex_combination() {
        // Each component of h lies between h_prev and the candidate.
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(7);
        let mut gru = zero_gru(3, 4);
        for m in [
            &mut gru.w_update,
            &mut gru.u_update,
            &mut gru.w_reset,
            &mut gru.u_reset,
            &mut gru.w_cand,
            &mut gru.u_cand,
        ] {
            for v in m.as_mut_slice() {
                *v = rng.random_range(-1.5..1.5);
            }
        }
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h_prev: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (h, cache) = gru.step(&x, &h_prev);
            for i in 0..4 {
                let lo = h_prev[i].min(cache.h_cand[i]);
                let hi = h_prev[i].max(cache.h_cand[i]);
                assert!(h[i] >= lo - 1e-12 && h[i] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn modality_map_routes_by_modality() {
        let conv = dense(2, 1, vec![1.0, 1.0], vec![0.0, 0.0], Activation::Identity);
        let sess = dense(2, 1, vec![-1.0, -1.0], vec![0.0, 0.0], Activation::Identity);
        let map = ModalityMap {
            conversation: conv,
            session: sess,
        };
        let (yc, _) = map.forward_step(&[2.0], Modality::Conversation);
        let (ys, _) = map.forward_step(&[2.0], Modality::WebSession);
        assert_eq!(yc, vec![2.0, 2.0]);
        assert_eq!(ys, vec![-2.0, -2.0]);
    }
}
