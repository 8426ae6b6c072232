/// Probabilities are kept within `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

/// Softmax over the two logits `(s⁺, s⁻)`, returning `(p⁺, p⁻)`.
pub fn binary_softmax(pos: f64, neg: f64) -> (f64, f64) {
    let max = pos.max(neg);
    let (a, b) = ((pos - max).exp(), (neg - max).exp());
    let p = (a / (a + b)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    (p, 1.0 - p)
}

/// Cross-entropy of a single example with label 1 (positive) or 0.
pub fn example_loss(probs: (f64, f64), label: bool) -> f64 {
    let p = if label { probs.0 } else { probs.1 };
    -p.max(PROB_FLOOR).ln()
}

/// Mean cross-entropy over a batch.
pub fn cross_entropy(probs: &[(f64, f64)], labels: &[bool]) -> f64 {
    assert_eq!(probs.len(), labels.len());
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &l)| example_loss(p, l))
        .sum();
    total / probs.len() as f64
}

/// Gradient of [`example_loss`] with respect to the two logits.
pub fn softmax_logit_grad(probs: (f64, f64), label: bool) -> (f64, f64) {
    let (t_pos, t_neg) = if label { (1.0, 0.0) } else { (0.0, 1.0) };
    (probs.0 - t_pos, probs.1 - t_neg)
}
