//! Binary cross-entropy.

use super::NnError;

pub const BCE_CLAMP_EPS: f64 = 1e-12;

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy; predictions are clamped to
/// [eps, 1-eps] before the logs.
pub fn bce_loss(y_true: &[f64], y_pred: &[f64]) -> Result<f64, NnError> {
    if y_true.len() != y_pred.len() {
        return Err(NnError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let mut total = 0.0;
    for (&y, &p) in y_true.iter().zip(y_pred) {
        let p = p.clamp(BCE_CLAMP_EPS, 1.0 - BCE_CLAMP_EPS);
        total += y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    let loss = -total / y_true.len() as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(NnError::NonFinite("bce loss"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_near_zero() {
        let loss = bce_loss(&[1.0], &[1.0]).unwrap();
        assert!(loss >= 0.0 && loss <= 1e-11, "loss {loss}");
    }

    #[test]
    fn coin_flip_is_ln_two() {
        let loss = bce_loss(&[1.0], &[0.5]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn small_batch_arithmetic() {
        let loss = bce_loss(&[1.0, 0.0], &[0.9, 0.2]).unwrap();
        let expected = -((0.9f64).ln() + (0.8f64).ln()) / 2.0;
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 0.164252).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(bce_loss(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn loss_is_nonnegative_on_random_inputs() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(5, 0);
        for _ in 0..200 {
            let y: Vec<f64> = (0..8).map(|_| f64::from(rng.gen::<bool>())).collect();
            let p: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            assert!(bce_loss(&y, &p).unwrap() >= 0.0);
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
