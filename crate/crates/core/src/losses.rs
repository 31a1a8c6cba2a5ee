//! Loss functions for class-imbalanced detector training, with analytic
//! gradients with respect to the pre-sigmoid logit.
//!
//! Three classification re-weightings are covered: plain cross-entropy, the
//! focal factor `(1-p)^γ`, and its reduced variant that applies the factor
//! only above a probability threshold. The weighted multi-task form combines
//! per-class-weighted classification with smooth-L1 box regression gated on
//! positive samples. Probabilities are clamped to `[ε, 1-ε]` before every
//! logarithm so no input produces an infinite loss.

use crate::data::ObjectClass;
use crate::math;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_EPSILON, 1 - PROB_EPSILON]`.
pub const PROB_EPSILON: f64 = 1e-7;

fn clamp_p(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// Per-class loss multipliers. The defaults leave the loss unweighted;
/// grid-searched values keep 1.0 for cyclists and shrink the majority
/// classes (e.g. 0.5/0.9/1.0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub vehicle: f64,
    pub pedestrian: f64,
    pub cyclist: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self {
            vehicle: 1.0,
            pedestrian: 1.0,
            cyclist: 1.0,
        }
    }
}

impl ClassWeights {
    pub fn weight(&self, class: ObjectClass) -> f64 {
        match class {
            ObjectClass::Vehicle => self.vehicle,
            ObjectClass::Pedestrian => self.pedestrian,
            ObjectClass::Cyclist => self.cyclist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vehicle > 0.0 && self.pedestrian > 0.0 && self.cyclist > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParam {
                name: "class_weights",
                reason: "all weights must be positive",
            })
        }
    }
}

/// Focusing parameters shared by the focal and reduced-focal losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    /// Focusing exponent γ ≥ 0.
    pub gamma: f64,
    /// Balance multiplier α ≥ 0.
    pub alpha: f64,
    /// Reduced-focal threshold in (0, 1); unused by the plain focal loss.
    pub threshold: f64,
}

impl FocalParams {
    /// First-stage setting: threshold 0.5.
    pub fn rpn() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.25,
            threshold: 0.5,
        }
    }

    /// Second-stage setting: threshold 0.25.
    pub fn header() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.25,
            threshold: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 {
            return Err(Error::InvalidParam {
                name: "gamma",
                reason: "must be non-negative",
            });
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidParam {
                name: "alpha",
                reason: "must be non-negative",
            });
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParam {
                name: "threshold",
                reason: "must lie strictly between 0 and 1",
            });
        }
        Ok(())
    }
}

impl Default for FocalParams {
    fn default() -> Self {
        Self::rpn()
    }
}

/// Binary cross-entropy `−p*·ln(p) − (1−p*)·ln(1−p)` with `p*` in {0, 1}.
pub fn binary_cross_entropy(p: f64, p_star: f64) -> f64 {
    let p = clamp_p(p);
    -(p_star * math::ln(p) + (1.0 - p_star) * math::ln(1.0 - p))
}

/// Smooth-L1 (Huber with transition at |d| = 1): `0.5·d²` inside, `|d|−0.5`
/// outside.
pub fn smooth_l1(d: f64) -> f64 {
    let a = math::abs(d);
    if a < 1.0 {
        0.5 * d * d
    } else {
        a - 0.5
    }
}

/// Focal loss `−α·(1−p)^γ·ln(p)` where `p` is the probability assigned to
/// the true class. Collapses to `−α·ln(p)` at γ = 0.
pub fn focal_loss(p: f64, fp: &FocalParams) -> f64 {
    let p = clamp_p(p);
    -fp.alpha * math::powf(1.0 - p, fp.gamma) * math::ln(p)
}

/// Reduced focal loss `−α·RF(p, th)·ln(p)`: plain cross-entropy below the
/// threshold, the normalized focal factor `(1−p)^γ / th^γ` above it.
///
/// At exactly `p = th` the RF = 1 branch applies. The two branches agree
/// there only for th = 0.5; for other thresholds the factor jumps, which is
/// a property of the formula itself and is left as-is.
pub fn reduced_focal_loss(p: f64, fp: &FocalParams) -> f64 {
    let p = clamp_p(p);
    let rf = if p <= fp.threshold {
        1.0
    } else {
        math::powf(1.0 - p, fp.gamma) / math::powf(fp.threshold, fp.gamma)
    };
    -fp.alpha * rf * math::ln(p)
}

/// Logistic function mapping a logit to a probability.
pub fn sigmoid(logit: f64) -> f64 {
    1.0 / (1.0 + math::exp(-logit))
}

/// Classification loss selector for the gradient harness. All three act on
/// the probability of the true class (`p* = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClsLoss {
    CrossEntropy,
    Focal,
    ReducedFocal,
}

/// Loss value as a function of the pre-sigmoid logit.
pub fn loss_from_logit(kind: ClsLoss, logit: f64, fp: &FocalParams) -> f64 {
    let p = sigmoid(logit);
    match kind {
        ClsLoss::CrossEntropy => binary_cross_entropy(p, 1.0),
        ClsLoss::Focal => focal_loss(p, fp),
        ClsLoss::ReducedFocal => reduced_focal_loss(p, fp),
    }
}

/// Analytic derivative of the loss with respect to the pre-sigmoid logit.
///
/// Valid for probabilities inside the clamp range; at exactly `p = th` the
/// reduced focal loss differentiates through its below-threshold branch.
pub fn loss_grad_logit(kind: ClsLoss, logit: f64, fp: &FocalParams) -> f64 {
    let p = sigmoid(logit);
    match kind {
        ClsLoss::CrossEntropy => p - 1.0,
        ClsLoss::Focal => focal_grad(p, fp.gamma, fp.alpha),
        ClsLoss::ReducedFocal => {
            if p <= fp.threshold {
                fp.alpha * (p - 1.0)
            } else {
                focal_grad(p, fp.gamma, fp.alpha) / math::powf(fp.threshold, fp.gamma)
            }
        }
    }
}

fn focal_grad(p: f64, gamma: f64, alpha: f64) -> f64 {
    // d/dp [-α(1-p)^γ ln p] · dp/dz with dp/dz = p(1-p)
    let one_m = 1.0 - p;
    let dldp = alpha
        * (gamma * math::powf(one_m, gamma - 1.0) * math::ln(p) - math::powf(one_m, gamma) / p);
    dldp * p * one_m
}

/// One classification/regression training sample: predicted probability,
/// {0,1} ground-truth label, predicted and target box offsets, and the
/// object class that selects the weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub p: f64,
    pub p_star: f64,
    pub offsets: [f64; 4],
    pub target_offsets: [f64; 4],
    pub class: ObjectClass,
}

/// Balance and normalization of the multi-task loss. Normalizers default to
/// the usual mini-batch size of 256.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiTaskLossParams {
    pub lambda: f64,
    pub n_cls: f64,
    pub n_reg: f64,
}

impl Default for MultiTaskLossParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            n_cls: 256.0,
            n_reg: 256.0,
        }
    }
}

impl MultiTaskLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_cls > 0.0 && self.n_reg > 0.0) {
            return Err(Error::InvalidParam {
                name: "normalizers",
                reason: "must be positive",
            });
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParam {
                name: "lambda",
                reason: "must be non-negative",
            });
        }
        Ok(())
    }
}

/// The weighted multi-task loss split into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiTaskLoss {
    pub total: f64,
    pub classification: f64,
    pub regression: f64,
}

/// Class-weighted multi-task loss
/// `(1/N_cls)·Σ wᵢ·CE(pᵢ, p*ᵢ) + (λ/N_reg)·Σ wᵢ·p*ᵢ·smoothL1(tᵢ − t*ᵢ)`,
/// where the regression term sums smooth-L1 over the four offset components
/// and contributes only for positive samples.
pub fn weighted_multitask_loss(
    samples: &[LossSample],
    weights: &ClassWeights,
    params: &MultiTaskLossParams,
) -> Result<MultiTaskLoss> {
    weights.validate()?;
    params.validate()?;
    let mut cls = 0.0;
    let mut reg = 0.0;
    for s in samples {
        let w = weights.weight(s.class);
        cls += w * binary_cross_entropy(s.p, s.p_star);
        if s.p_star != 0.0 {
            let box_loss: f64 = s
                .offsets
                .iter()
                .zip(&s.target_offsets)
                .map(|(t, t_star)| smooth_l1(t - t_star))
                .sum();
            reg += w * s.p_star * box_loss;
        }
    }
    let classification = cls / params.n_cls;
    let regression = params.lambda / params.n_reg * reg;
    Ok(MultiTaskLoss {
        total: classification + regression,
        classification,
        regression,
    })
}
