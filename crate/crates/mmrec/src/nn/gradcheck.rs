//! Finite-difference gradient verification.
//!
//! Central differences with step 1e-5 in double precision, compared against
//! the analytic backward pass parameter by parameter. When a dropout RNG is
//! supplied, every loss evaluation clones the RNG so all evaluations see the
//! same masks.

use rand::rngs::StdRng;

use crate::error::Result;
use crate::nn::loss::{loss_and_grad, LossKind};
use crate::nn::network::Network;
use crate::nn::train::TrainSample;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index of the worst parameter.
    pub worst_param: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passes(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn sample_loss(
    net: &Network,
    loss: LossKind,
    sample: &TrainSample,
    rng: Option<&StdRng>,
) -> Result<f64> {
    let mut rng_clone = rng.cloned();
    let (logits, _) = net.forward(&sample.steps, rng_clone.as_mut())?;
    Ok(loss_and_grad(loss, &logits, &sample.targets).0)
}

/// Compares analytic gradients against central finite differences over every
/// parameter. Intended for small nets (≤ a few thousand parameters).
pub fn grad_check(
    net: &Network,
    loss: LossKind,
    sample: &TrainSample,
    tolerance: f64,
    dropout_rng: Option<&StdRng>,
) -> Result<GradCheckReport> {
    let mut rng_clone = dropout_rng.cloned();
    let (logits, cache) = net.forward(&sample.steps, rng_clone.as_mut())?;
    let (_, grad_logits) = loss_and_grad(loss, &logits, &sample.targets);
    let mut grads = net.zeros_like();
    net.backward(&cache, &grad_logits, &mut grads);
    let analytic = grads.flat_params();

    let mut probe = net.clone();
    let params = net.flat_params();
    let h = DEFAULT_FD_STEP;
    let mut max_rel = 0.0;
    let mut worst = 0;
    let mut perturbed = params.clone();
    for i in 0..params.len() {
        perturbed[i] = params[i] + h;
        probe.set_flat_params(&perturbed);
        let plus = sample_loss(&probe, loss, sample, dropout_rng)?;
        perturbed[i] = params[i] - h;
        probe.set_flat_params(&perturbed);
        let minus = sample_loss(&probe, loss, sample, dropout_rng)?;
        perturbed[i] = params[i];

        let numeric = (plus - minus) / (2.0 * h);
        let rel = relative_error(analytic[i], numeric);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }

    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst_param: worst,
        tolerance,
    })
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::types::Modality;
    use crate::encoders::sequence::EncodedStep;
    use crate::nn::activation::Activation;
    use crate::nn::loss::WeightedTarget;
    use crate::nn::network::{LayerSpec, NetworkSpec};
    use rand::{Rng, SeedableRng};

    fn random_sample(
        rng: &mut StdRng,
        steps: usize,
        conv_width: usize,
        sess_width: usize,
        out: usize,
        mixed: bool,
    ) -> TrainSample {
        let steps = (0..steps)
            .map(|i| {
                let modality = if mixed && i % 2 == 0 {
                    Modality::Conversation
                } else {
                    Modality::WebSession
                };
                let width = match modality {
                    Modality::Conversation => conv_width,
                    Modality::WebSession => sess_width,
                };
                EncodedStep {
                    vector: (0..width).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    modality,
                }
            })
            .collect();
        let target: Vec<f64> = (0..out).map(|_| f64::from(rng.random::<bool>())).collect();
        TrainSample {
            steps,
            targets: vec![WeightedTarget::hard(target)],
        }
    }

    #[test]
    fn linear_net_error_near_machine_precision() {
        let spec = NetworkSpec {
            layers: vec![LayerSpec::Dense {
                input: 3,
                output: 2,
                activation: Activation::Identity,
                dropout: 0.0,
                has_bias: true,
            }],
        };
        let mut rng = StdRng::seed_from_u64(1);
        let net = Network::new(&spec, &mut rng).unwrap();
        let sample = random_sample(&mut rng, 1, 3, 3, 2, false);
        let report = grad_check(&net, LossKind::SquaredError, &sample, 1e-6, None).unwrap();
        assert!(report.passes(), "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn gru_dense_sigmoid_bce_stack_checks_out() {
        let spec = NetworkSpec {
            layers: vec![
                LayerSpec::Gru {
                    input: 3,
                    hidden: 4,
                    dropout: 0.0,
                    has_bias: true,
                },
                LayerSpec::Dense {
                    input: 4,
                    output: 3,
                    activation: Activation::Relu,
                    dropout: 0.0,
                    has_bias: true,
                },
                LayerSpec::Dense {
                    input: 3,
                    output: 2,
                    activation: Activation::Identity,
                    dropout: 0.0,
                    has_bias: true,
                },
            ],
        };
        let mut rng = StdRng::seed_from_u64(2);
        let net = Network::new(&spec, &mut rng).unwrap();
        let sample = random_sample(&mut rng, 3, 3, 3, 2, false);
        let report = grad_check(&net, LossKind::BinaryCrossEntropy, &sample, 1e-4, None).unwrap();
        assert!(report.passes(), "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn modality_map_stack_checks_out() {
        let spec = NetworkSpec {
            layers: vec![
                LayerSpec::ModalityMap {
                    conversation_input: 4,
                    session_input: 3,
                    output: 3,
                    has_bias: true,
                },
                LayerSpec::Gru {
                    input: 3,
                    hidden: 4,
                    dropout: 0.0,
                    has_bias: true,
                },
                LayerSpec::Dense {
                    input: 4,
                    output: 2,
                    activation: Activation::Identity,
                    dropout: 0.0,
                    has_bias: true,
                },
            ],
        };
        let mut rng = StdRng::seed_from_u64(3);
        let net = Network::new(&spec, &mut rng).unwrap();
        let sample = random_sample(&mut rng, 4, 4, 3, 2, true);
        let report = grad_check(&net, LossKind::BinaryCrossEntropy, &sample, 1e-4, None).unwrap();
        assert!(report.passes(), "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn dropout_gradients_check_with_frozen_masks() {
        let spec = NetworkSpec {
            layers: vec![
                LayerSpec::Gru {
                    input: 3,
                    hidden: 5,
                    dropout: 0.4,
                    has_bias: true,
                },
                LayerSpec::Dense {
                    input: 5,
                    output: 2,
                    activation: Activation::Identity,
                    dropout: 0.0,
                    has_bias: true,
                },
            ],
        };
        let mut rng = StdRng::seed_from_u64(4);
        let net = Network::new(&spec, &mut rng).unwrap();
        let sample = random_sample(&mut rng, 3, 3, 3, 2, false);
        let mask_rng = StdRng::seed_from_u64(99);
        let report =
            grad_check(&net, LossKind::BinaryCrossEntropy, &sample, 1e-4, Some(&mask_rng)).unwrap();
        assert!(report.passes(), "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        // Scaling one analytic weight gradient by 1.01 must fail the check.
        let spec = NetworkSpec {
            layers: vec![
                LayerSpec::Dense {
                    input: 3,
                    output: 4,
                    activation: Activation::Tanh,
                    dropout: 0.0,
                    has_bias: true,
                },
                LayerSpec::Dense {
                    input: 4,
                    output: 2,
                    activation: Activation::Identity,
                    dropout: 0.0,
                    has_bias: true,
                },
            ],
        };
        let mut rng = StdRng::seed_from_u64(5);
        let net = Network::new(&spec, &mut rng).unwrap();
        let sample = random_sample(&mut rng, 1, 3, 3, 2, false);

        let good = grad_check(&net, LossKind::BinaryCrossEntropy, &sample, 1e-4, None).unwrap();
        assert!(good.passes());

        // Analytic gradient of the first weight, then its ×1.01 corruption.
        let (logits, cache) = net.forward(&sample.steps, None).unwrap();
        let (_, grad_logits) = loss_and_grad(LossKind::BinaryCrossEntropy, &logits, &sample.targets);
        let mut grads = net.zeros_like();
        net.backward(&cache, &grad_logits, &mut grads);
        let analytic = grads.flat_params();
        let idx = analytic
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        let corrupted = analytic[idx] * 1.01;

        // Finite difference for that same parameter.
        let h = DEFAULT_FD_STEP;
        let base = net.flat_params();
        let mut probe = net.clone();
        let mut perturbed = base.clone();
        perturbed[idx] = base[idx] + h;
        probe.set_flat_params(&perturbed);
        let plus = sample_loss(&probe, LossKind::BinaryCrossEntropy, &sample, None).unwrap();
        perturbed[idx] = base[idx] - h;
        probe.set_flat_params(&perturbed);
        let minus = sample_loss(&probe, LossKind::BinaryCrossEntropy, &sample, None).unwrap();
        let numeric = (plus - minus) / (2.0 * h);

        assert!(relative_error(analytic[idx], numeric) < 1e-4);
        assert!(
            relative_error(corrupted, numeric) > 1e-4,
            "corruption went undetected"
        );
    }
}
