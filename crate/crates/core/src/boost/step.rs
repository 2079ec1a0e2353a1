use serde::{Deserialize, Serialize};

/// Fixed step length for the sigma update in adaptive mode.
pub const ADAPTIVE_SIGMA_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum StepMode {
    /// Same learning rate for both sub-models.
    Fixed { nu: f64 },
    /// mu step scaled by the fitted base-learner and current variances;
    /// sigma step constant.
    Adaptive { lambda: f64, nu_sigma: f64 },
}

impl Default for StepMode {
    fn default() -> Self {
        StepMode::Adaptive {
            lambda: 0.1,
            nu_sigma: ADAPTIVE_SIGMA_STEP,
        }
    }
}

impl StepMode {
    pub fn fixed(nu: f64) -> Self {
        StepMode::Fixed { nu }
    }

    pub fn adaptive(lambda: f64) -> Self {
        StepMode::Adaptive {
            lambda,
            nu_sigma: ADAPTIVE_SIGMA_STEP,
        }
    }

    pub fn sigma_step(&self) -> f64 {
        match *self {
            StepMode::Fixed { nu } => nu,
            StepMode::Adaptive { nu_sigma, .. } => nu_sigma,
        }
    }
}

/// Adaptive mu step: `lambda * sum(h^2) / sum(h^2 / sigma^2)`, where `h` is the
/// fitted base-learner evaluated at each sample. Falls back to `lambda` when
/// the base-learner is identically zero.
pub fn adaptive_step_mu(base_learner_fit: &[f64], sigma_hat: &[f64], lambda: f64) -> f64 {
    debug_assert_eq!(base_learner_fit.len(), sigma_hat.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (&h, &s) in base_learner_fit.iter().zip(sigma_hat) {
        let h2 = h * h;
        num += h2;
        den += h2 / (s * s);
    }
    if den > 0.0 && den.is_finite() {
        lambda * (num / den)
    } else {
        lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sigma_gives_lambda() {
        let h = [0.3, -1.2, 0.7, 2.0];
        assert_eq!(adaptive_step_mu(&h, &[1.0; 4], 0.1), 0.1);
    }

    #[test]
    fn constant_sigma_scales_by_square() {
        let h = [0.3, -1.2, 0.7, 2.0];
        let nu = adaptive_step_mu(&h, &[2.0; 4], 0.1);
        assert!((nu - 0.4).abs() < 1e-15);
    }

    #[test]
    fn heterogeneous_sigma() {
        let nu = adaptive_step_mu(&[1.0, 1.0], &[1.0, 2.0], 0.1);
        assert!((nu - 0.16).abs() < 1e-15);
    }

    #[test]
    fn zero_learner_falls_back() {
        assert_eq!(adaptive_step_mu(&[0.0, 0.0], &[1.0, 3.0], 0.1), 0.1);
    }
}
