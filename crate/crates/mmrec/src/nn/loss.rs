//! Multi-label losses over network logits.
//!
//! The recommendation loss is the item-summed binary cross-entropy between
//! the sigmoid of each logit and the binary purchase label. Knowledge
//! distillation adds further weighted cross-entropy terms against teacher
//! soft labels, so a training target is a weighted list of target vectors.

use crate::nn::activation::sigmoid;

/// Probability clamp applied before logarithms.
pub const PROB_EPSILON: f64 = 1e-7;

/// σ applied element-wise to logits; every output lies in (0, 1).
pub fn predict_probs(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&o| sigmoid(o)).collect()
}

/// Item-summed binary cross-entropy. Probabilities are clamped to
/// [ε, 1−ε] with ε = 1e-7, so the result is always finite and ≥ 0.
pub fn bce_multilabel(probs: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(probs.len(), targets.len());
    let mut loss = 0.0;
    for (&p_hat, &p) in probs.iter().zip(targets) {
        let q = p_hat.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
        loss -= p * q.ln() + (1.0 - p) * (1.0 - q).ln();
    }
    loss
}

/// A weighted cross-entropy component: the hard label carries weight 1,
/// distillation terms carry the α/β weights against teacher soft labels.
#[derive(Debug, Clone)]
pub struct WeightedTarget {
    pub weight: f64,
    pub target: Vec<f64>,
}

impl WeightedTarget {
    pub fn hard(target: Vec<f64>) -> Self {
        WeightedTarget {
            weight: 1.0,
            target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Sigmoid outputs + summed binary cross-entropy per weighted target.
    BinaryCrossEntropy,
    /// Identity outputs + summed squared error (regression imputer).
    SquaredError,
}

/// Loss value and dL/d(logits) for one sample.
pub fn loss_and_grad(kind: LossKind, logits: &[f64], targets: &[WeightedTarget]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; logits.len()];
    let mut loss = 0.0;
    match kind {
        LossKind::BinaryCrossEntropy => {
            let probs = predict_probs(logits);
            for wt in targets {
                debug_assert_eq!(wt.target.len(), logits.len());
                loss += wt.weight * bce_multilabel(&probs, &wt.target);
                // d(BCE∘σ)/d(logit) = p̂ − p, exact when the clamp is inactive.
                for ((g, &p_hat), &p) in grad.iter_mut().zip(&probs).zip(&wt.target) {
                    *g += wt.weight * (p_hat - p);
                }
            }
        }
        LossKind::SquaredError => {
            for wt in targets {
                debug_assert_eq!(wt.target.len(), logits.len());
                for ((g, &o), &y) in grad.iter_mut().zip(logits).zip(&wt.target) {
                    let d = o - y;
                    loss += wt.weight * d * d;
                    *g += wt.weight * 2.0 * d;
                }
            }
        }
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probs_at_zero_logits_are_half() {
        assert_eq!(predict_probs(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn probs_saturate_near_one() {
        let p = predict_probs(&[50.0]);
        assert!((p[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn probs_of_ln3_is_three_quarters() {
        let p = predict_probs(&[3.0f64.ln()]);
        assert!((p[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn bce_is_zero_when_exact() {
        let p = [1.0, 0.0, 1.0];
        let loss = bce_multilabel(&p, &p);
        // Clamping leaves a residual of J·(−ln(1−ε)) ≈ J·ε.
        assert!(loss < 1e-5);
    }

    #[test]
    fn bce_at_half_is_j_ln2() {
        let j = 7;
        let probs = vec![0.5; j];
        let targets = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let loss = bce_multilabel(&probs, &targets);
        assert!((loss - j as f64 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bce_hand_computed_example() {
        // J=2, p=[1,0], p̂=[0.8,0.3] → −ln 0.8 − ln 0.7 ≈ 0.5798
        let loss = bce_multilabel(&[0.8, 0.3], &[1.0, 0.0]);
        let expected = -(0.8f64.ln()) - (0.7f64.ln());
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 0.5798).abs() < 1e-4);
    }

    #[test]
    fn bce_nonnegative_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let probs: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            let targets: Vec<f64> = (0..5).map(|_| f64::from(rng.random::<bool>())).collect();
            assert!(bce_multilabel(&probs, &targets) >= 0.0);
        }
    }

    #[test]
    fn distillation_with_hard_soft_labels_scales_loss() {
        // When teacher soft labels equal the hard labels the total loss is
        // (1 + α + β) times the hard loss.
        let logits = [0.3, -0.8, 1.2];
        let hard = vec![1.0, 0.0, 1.0];
        let (alpha, beta) = (0.32, 0.87);
        let targets = vec![
            WeightedTarget::hard(hard.clone()),
            WeightedTarget {
                weight: alpha,
                target: hard.clone(),
            },
            WeightedTarget {
                weight: beta,
                target: hard.clone(),
            },
        ];
        let (loss, _) = loss_and_grad(LossKind::BinaryCrossEntropy, &logits, &targets);
        let (hard_loss, _) = loss_and_grad(
            LossKind::BinaryCrossEntropy,
            &logits,
            &[WeightedTarget::hard(hard)],
        );
        assert!((loss - (1.0 + alpha + beta) * hard_loss).abs() < 1e-12);
    }

    #[test]
    fn squared_error_grad() {
        let (loss, grad) = loss_and_grad(
            LossKind::SquaredError,
            &[1.0, 2.0],
            &[WeightedTarget::hard(vec![0.0, 3.0])],
        );
        assert!((loss - 2.0).abs() < 1e-12);
        assert_eq!(grad, vec![2.0, -2.0]);
    }
}
