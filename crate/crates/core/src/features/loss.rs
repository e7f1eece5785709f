use crate::{Error, Result};

/// Probabilities are clamped to `(PROB_EPS, 1 - PROB_EPS)` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPrediction {
    pub objectness: f64,
    pub bbox: [f64; 4],
    pub attribute_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorTarget {
    pub is_object: bool,
    pub bbox: [f64; 4],
    pub attribute_labels: Vec<bool>,
}

impl AnchorTarget {
    /// The attribute gate: on iff any attribute is annotated.
    pub fn has_attribute(&self) -> bool {
        self.attribute_labels.iter().any(|&a| a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttributeLoss {
    /// Class-weighted binary cross-entropy per attribute (multi-label).
    #[default]
    Sigmoid,
    /// Class-weighted cross-entropy against the normalized multi-hot target.
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub lambda_reg: f64,
    pub lambda_att: f64,
    pub class_counts: Vec<u64>,
    pub cb_beta: f64,
    pub attribute_loss: AttributeLoss,
}

impl LossConfig {
    pub fn new(class_counts: Vec<u64>) -> Self {
        LossConfig {
            lambda_reg: 1.0,
            lambda_att: 1.0,
            class_counts,
            cb_beta: 0.999,
            attribute_loss: AttributeLoss::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionLoss {
    pub total: f64,
    /// Normalized classification term.
    pub cls: f64,
    /// Normalized regression term, before `lambda_reg`.
    pub reg: f64,
    /// Normalized attribute term, before `lambda_att`.
    pub att: f64,
}

/// Sum of per-component smooth L1: `0.5 d^2` inside the unit band, `|d| - 0.5` outside.
pub fn smooth_l1(d: &[f64]) -> f64 {
    d.iter()
        .map(|&x| {
            let a = x.abs();
            if a < 1.0 {
                0.5 * x * x
            } else {
                a - 0.5
            }
        })
        .sum()
}

/// Effective-number class weights `(1 - beta) / (1 - beta^n_c)`, rescaled to mean 1.
pub fn class_balanced_weights(class_counts: &[u64], cb_beta: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&cb_beta) {
        return Err(Error::OutOfRange {
            value: cb_beta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if class_counts.is_empty() {
        return Err(Error::Empty("class counts"));
    }
    if class_counts.contains(&0) {
        return Err(Error::InvalidArgument("class counts must be >= 1".into()));
    }
    let raw: Vec<f64> = class_counts
        .iter()
        .map(|&n| (1.0 - cb_beta) / (1.0 - cb_beta.powf(n as f64)))
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.into_iter().map(|w| w / mean).collect())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn bce(p: f64, target: bool) -> f64 {
    let p = clamp_prob(p);
    if target {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Objectness + box regression + gated attribute loss over a set of anchors.
///
/// Normalizers: all anchors for the classification term, positive anchors
/// for regression, attribute-carrying anchors for the attribute term. A term
/// with no contributing anchors is zero.
pub fn detection_loss(preds: &[AnchorPrediction], targets: &[AnchorTarget], cfg: &LossConfig) -> Result<DetectionLoss> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            actual: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("anchor list"));
    }
    let weights = class_balanced_weights(&cfg.class_counts, cfg.cb_beta)?;
    let c = weights.len();

    let (mut cls, mut reg, mut att) = (0.0, 0.0, 0.0);
    let (mut n_reg, mut n_att) = (0usize, 0usize);
    for (p, t) in preds.iter().zip(targets) {
        cls += bce(p.objectness, t.is_object);
        if t.is_object {
            let d: Vec<f64> = p.bbox.iter().zip(&t.bbox).map(|(a, b)| a - b).collect();
            reg += smooth_l1(&d);
            n_reg += 1;
        }
        if t.has_attribute() {
            if p.attribute_probs.len() != c || t.attribute_labels.len() != c {
                return Err(Error::DimensionMismatch {
                    what: "attribute classes",
                    expected: c,
                    actual: p.attribute_probs.len().max(t.attribute_labels.len()),
                });
            }
            att += attribute_term(&p.attribute_probs, &t.attribute_labels, &weights, cfg.attribute_loss);
            n_att += 1;
        }
    }
    let cls = cls / preds.len() as f64;
    let reg = if n_reg > 0 { reg / n_reg as f64 } else { 0.0 };
    let att = if n_att > 0 { att / n_att as f64 } else { 0.0 };
    Ok(DetectionLoss {
        total: cls + cfg.lambda_reg * reg + cfg.lambda_att * att,
        cls,
        reg,
        att,
    })
}

fn attribute_term(probs: &[f64], labels: &[bool], weights: &[f64], kind: AttributeLoss) -> f64 {
    match kind {
        AttributeLoss::Sigmoid => probs
            .iter()
            .zip(labels)
            .zip(weights)
            .map(|((&p, &y), &w)| w * bce(p, y))
            .sum(),
        AttributeLoss::Softmax => {
            let total: f64 = probs.iter().map(|&p| clamp_prob(p)).sum();
            let positives = labels.iter().filter(|&&y| y).count() as f64;
            probs
                .iter()
                .zip(labels)
                .zip(weights)
                .filter(|((_, &y), _)| y)
                .map(|((&p, _), &w)| -w * (clamp_prob(p) / total).ln() / positives)
                .sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn smooth_l1_examples() {
        assert_eq!(smooth_l1(&[0.0; 4]), 0.0);
        assert_eq!(smooth_l1(&[1.0, 0.0, 0.0, 0.0]), 0.5);
        assert_eq!(smooth_l1(&[2.0, -3.0, 0.5, 0.0]), 4.125);
    }

    #[test]
    fn smooth_l1_is_c1_at_the_knee() {
        let h = 1e-7;
        for x0 in [1.0, -1.0] {
            let left = (smooth_l1(&[x0]) - smooth_l1(&[x0 - h])) / h;
            let right = (smooth_l1(&[x0 + h]) - smooth_l1(&[x0])) / h;
            assert!((left - right).abs() < 1e-6, "{left} {right}");
            let below = smooth_l1(&[x0 * (1.0 - 1e-12)]);
            assert!((below - smooth_l1(&[x0])).abs() < 1e-9);
        }
    }

    #[test]
    fn class_weights() {
        for w in class_balanced_weights(&[5, 5, 5], 0.99).unwrap() {
            close(w, 1.0, 1e-12);
        }
        assert_eq!(class_balanced_weights(&[1, 10, 1000], 0.0).unwrap(), [1.0, 1.0, 1.0]);
        // (1-b)/(1-b^10) = 0.10045...; (1-b)/(1-b^1000) = 0.0015819...; mean-normalized
        let w = class_balanced_weights(&[10, 1000], 0.999).unwrap();
        close(w[0], 1.968_999_705_672_165, 1e-12);
        close(w[1], 0.031_000_294_327_835_09, 1e-12);
        assert!(class_balanced_weights(&[1], 1.0).is_err());
        assert!(class_balanced_weights(&[1], -0.1).is_err());
        assert!(class_balanced_weights(&[0], 0.5).is_err());
    }

    #[test]
    fn class_weights_scale_invariant() {
        let a = class_balanced_weights(&[3, 30, 300], 0.0).unwrap();
        let b = class_balanced_weights(&[6, 60, 600], 0.0).unwrap();
        assert_eq!(a, b);
        let a = class_balanced_weights(&[3, 30, 300], 0.9).unwrap();
        let b = class_balanced_weights(&[3, 30, 300], 0.9).unwrap().iter().map(|w| w * 2.0 / 2.0).collect::<Vec<_>>();
        assert_eq!(a, b);
    }

    fn anchor(p: f64, b: [f64; 4], a: &[f64]) -> AnchorPrediction {
        AnchorPrediction {
            objectness: p,
            bbox: b,
            attribute_probs: a.to_vec(),
        }
    }

    fn target(y: bool, b: [f64; 4], a: &[bool]) -> AnchorTarget {
        AnchorTarget {
            is_object: y,
            bbox: b,
            attribute_labels: a.to_vec(),
        }
    }

    #[test]
    fn perfect_predictions_are_near_zero() {
        let preds = vec![
            anchor(1.0, [0.1, 0.2, 0.3, 0.4], &[1.0, 0.0, 1.0]),
            anchor(0.0, [0.0; 4], &[0.0, 0.0, 0.0]),
            anchor(1.0, [1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 0.0]),
        ];
        let targets = vec![
            target(true, [0.1, 0.2, 0.3, 0.4], &[true, false, true]),
            target(false, [0.0; 4], &[false, false, false]),
            target(true, [1.0, 2.0, 3.0, 4.0], &[false, true, false]),
        ];
        let l = detection_loss(&preds, &targets, &LossConfig::new(vec![10, 20, 30])).unwrap();
        assert!(l.total <= 1e-6 && l.cls <= 1e-6 && l.reg <= 1e-6 && l.att <= 1e-6, "{l:?}");
    }

    #[test]
    fn attribute_gate() {
        let preds = vec![anchor(0.7, [0.0; 4], &[0.9, 0.2]), anchor(0.2, [0.0; 4], &[0.1, 0.8])];
        let targets = vec![target(true, [0.5; 4], &[false, false]), target(false, [0.0; 4], &[false, false])];
        let l = detection_loss(&preds, &targets, &LossConfig::new(vec![1, 1])).unwrap();
        assert_eq!(l.att, 0.0);
        assert!(l.total > 0.0);
    }

    #[test]
    fn three_anchor_hand_evaluation() {
        // anchor 0: object with attributes {0}; anchor 1: object, no attributes;
        // anchor 2: background.
        let preds = vec![
            anchor(0.8, [0.0, 0.0, 2.0, 0.5], &[0.6, 0.3]),
            anchor(0.4, [1.0, 1.0, 1.0, 1.0], &[0.5, 0.5]),
            anchor(0.1, [9.0; 4], &[0.9, 0.9]),
        ];
        let targets = vec![
            target(true, [0.0, 0.0, 0.0, 0.0], &[true, false]),
            target(true, [1.0, 1.0, 1.0, 0.0], &[false, false]),
            target(false, [0.0; 4], &[false, false]),
        ];
        let mut cfg = LossConfig::new(vec![1, 1]);
        cfg.lambda_reg = 2.0;
        cfg.lambda_att = 0.5;
        let l = detection_loss(&preds, &targets, &cfg).unwrap();
        // cls = (-ln .8 - ln .4 - ln .9) / 3
        let cls = (-(0.8f64).ln() - (0.4f64).ln() - (0.9f64).ln()) / 3.0;
        // reg: anchor0 d=(0,0,2,.5) -> 1.5 + 0.125; anchor1 d=(0,0,0,1) -> 0.5; / 2
        let reg = (1.625 + 0.5) / 2.0;
        // att: weights equal (1,1); -ln .6 - ln .7, only anchor 0 gated in
        let att = -(0.6f64).ln() - (0.7f64).ln();
        close(l.cls, cls, 1e-12);
        close(l.reg, reg, 1e-12);
        close(l.att, att, 1e-12);
        close(l.total, cls + 2.0 * reg + 0.5 * att, 1e-12);
        close(l.total, 0.414_931_599_615_397 + 2.125 + 0.433_750_283_852_362, 1e-12);
    }

    #[test]
    fn softmax_variant_uses_normalized_target() {
        let preds = vec![anchor(0.9, [0.0; 4], &[0.5, 0.25, 0.25])];
        let targets = vec![target(true, [0.0; 4], &[true, false, true])];
        let mut cfg = LossConfig::new(vec![1, 1, 1]);
        cfg.attribute_loss = AttributeLoss::Softmax;
        let l = detection_loss(&preds, &targets, &cfg).unwrap();
        close(l.att, -(0.5 * (0.5f64).ln() + 0.5 * (0.25f64).ln()), 1e-12);
    }

    #[test]
    fn errors() {
        let cfg = LossConfig::new(vec![1]);
        assert!(matches!(detection_loss(&[], &[], &cfg), Err(Error::Empty(_))));
        let p = vec![anchor(0.5, [0.0; 4], &[0.5])];
        assert!(matches!(detection_loss(&p, &[], &cfg), Err(Error::LengthMismatch { .. })));
    }

    proptest::proptest! {
        #[test]
        fn loss_terms_nonnegative(
            probs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, -3.0f64..3.0), 1..8),
            labels in proptest::collection::vec((proptest::bool::ANY, proptest::bool::ANY, proptest::bool::ANY), 8),
        ) {
            let preds: Vec<_> = probs.iter().map(|&(p, a0, a1, b)| anchor(p, [b, -b, 0.5 * b, 0.0], &[a0, a1])).collect();
            let targets: Vec<_> = probs.iter().zip(&labels).map(|(_, &(y, l0, l1))| target(y, [0.0; 4], &[l0, l1])).collect();
            let l = detection_loss(&preds, &targets, &LossConfig::new(vec![3, 300])).unwrap();
            proptest::prop_assert!(l.total >= 0.0 && l.cls >= 0.0 && l.reg >= 0.0 && l.att >= 0.0);
        }
    }
}
