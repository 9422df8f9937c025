/// Predictions are clamped to `[1e-7, 1 − 1e-7]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Binary cross-entropy `−[y·ln p + (1−y)·ln(1−p)]`.
pub fn bce_loss(pred: f64, label: f64) -> f64 {
    let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// `∂ bce_loss / ∂ pred`; zero where the clamp is active.
pub fn bce_grad(pred: f64, label: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&pred) {
        return 0.0;
    }
    -label / pred + (1.0 - label) / (1.0 - pred)
}

/// `∂ bce_loss(σ(z), y) / ∂z` given `pred = σ(z)`.
pub fn bce_grad_logit(pred: f64, label: f64) -> f64 {
    bce_grad(pred, label) * pred * (1.0 - pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_gives_ln2() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.5, 0.0) - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn confident_correct_prediction_is_free() {
        assert!(bce_loss(1.0, 1.0) < 1e-6);
        assert!(bce_loss(0.0, 0.0) < 1e-6);
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let h = 1e-7;
        for pred in [0.05, 0.3, 0.5, 0.77, 0.95] {
            for label in [0.0, 1.0] {
                let fd = (bce_loss(pred + h, label) - bce_loss(pred - h, label)) / (2.0 * h);
                assert!((fd - bce_grad(pred, label)).abs() < 1e-6, "{pred} {label}");
            }
        }
    }

    #[test]
    fn logit_gradient_is_residual() {
        for pred in [0.1, 0.6, 0.9] {
            assert!((bce_grad_logit(pred, 1.0) - (pred - 1.0)).abs() < 1e-12);
            assert!((bce_grad_logit(pred, 0.0) - pred).abs() < 1e-12);
        }
    }
}
