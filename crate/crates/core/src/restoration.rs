//! AESNR-optimal restoration of the time-domain access-link samples.
//!
//! With CRB-substituted estimation errors the average effective SNR of a real
//! weight vector η is
//!
//! ```text
//! γ̄(η) = ηᵀΞη(1−ε) / (ηᵀΞη − 2·1ᵀΥη + C)
//! ```
//!
//! Υ and Ξ are diagonal because R_λ is, so every operation here is elementwise.

use thiserror::Error;

use crate::channel::{BemBasis, BemCoefficients};
use crate::estimator::LinkModel;
use crate::numerics::{CVec, NumericsError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RestorationError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("degenerate weight system: 1ᵀΥΞ⁻¹Υ1 = {0}")]
    DegenerateWeights(f64),
    #[error("AESNR denominator is {0}, not positive")]
    NonpositiveDenominator(f64),
    #[error("no trials to average")]
    EmptyInput,
}

/// Diagonals of R_λ, Υ and Ξ plus the scalar C.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem {
    pub r_lambda: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub xi: Vec<f64>,
    pub c: f64,
    pub epsilon: f64,
}

/// Optimal weights η* and φ* = η*ᵀΞη*.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalWeights {
    pub eta: Vec<f64>,
    pub phi_star: f64,
}

pub fn weight_matrices(model: &LinkModel) -> WeightSystem {
    let a2 = model.alpha * model.alpha;
    let r_lambda = model.v_q.clone();
    let trace: f64 = r_lambda.iter().sum();
    let pilot_info = a2 * model.v_g * model.pilot_energy / model.v_n;
    let backhaul_info = model.v_g * model.t_r_energy / model.sigma2;

    let upsilon: Vec<f64> = r_lambda
        .iter()
        .map(|&v| pilot_info * (v * v + trace * v) + backhaul_info * v)
        .collect();
    let ridge = model.v_h + model.v_n * model.t_r_energy / (model.sigma2 * a2 * model.pilot_energy);
    let xi = upsilon
        .iter()
        .zip(&r_lambda)
        .map(|(u, v)| u + v + ridge)
        .collect();
    let c = upsilon.iter().sum::<f64>()
        + (model.v_g + 1.0 / a2)
            * (model.v_h * a2 * model.pilot_energy / model.v_n + model.t_r_energy / model.sigma2)
            * model.sigma2
            / model.p_s;

    WeightSystem {
        r_lambda,
        upsilon,
        xi,
        c,
        epsilon: model.epsilon,
    }
}

impl WeightSystem {
    /// 1ᵀΥΞ⁻¹Υ1.
    pub fn quadratic_gain(&self) -> f64 {
        self.upsilon
            .iter()
            .zip(&self.xi)
            .map(|(u, x)| u * u / x)
            .sum()
    }
}

/// η* = C·Ξ⁻¹Υ1 / (1ᵀΥΞ⁻¹Υ1).
pub fn optimal_weights(ws: &WeightSystem) -> Result<OptimalWeights, RestorationError> {
    let s = ws.quadratic_gain();
    if !(s > 0.0 && s.is_finite()) {
        return Err(RestorationError::DegenerateWeights(s));
    }
    let eta = ws
        .upsilon
        .iter()
        .zip(&ws.xi)
        .map(|(u, x)| ws.c * u / (x * s))
        .collect();
    Ok(OptimalWeights {
        eta,
        phi_star: ws.c * ws.c / s,
    })
}

/// γ̄(η) with CRB-substituted error terms.
pub fn aesnr_theoretical(eta: &[f64], ws: &WeightSystem) -> Result<f64, RestorationError> {
    if eta.len() != ws.xi.len() {
        return Err(NumericsError::LengthMismatch {
            left: eta.len(),
            right: ws.xi.len(),
        }
        .into());
    }
    let quad: f64 = eta.iter().zip(&ws.xi).map(|(e, x)| e * e * x).sum();
    let lin: f64 = eta.iter().zip(&ws.upsilon).map(|(e, u)| e * u).sum();
    let den = quad - 2.0 * lin + ws.c;
    if den.is_nan() || den <= 0.0 {
        return Err(RestorationError::NonpositiveDenominator(den));
    }
    Ok(quad * (1.0 - ws.epsilon) / den)
}

/// ĥ(n) = Σ_q η_q·λ̂_q·e^{j2πqn/N_s}.
pub fn restore(
    lambda_hat: &BemCoefficients,
    eta: &[f64],
    n_s: usize,
) -> Result<CVec, RestorationError> {
    restore_with_basis(lambda_hat, eta, &BemBasis::new(lambda_hat.q_order(), n_s))
}

pub fn restore_with_basis(
    lambda_hat: &BemCoefficients,
    eta: &[f64],
    basis: &BemBasis,
) -> Result<CVec, RestorationError> {
    if eta.len() != lambda_hat.len() {
        return Err(NumericsError::LengthMismatch {
            left: eta.len(),
            right: lambda_hat.len(),
        }
        .into());
    }
    Ok(basis.weighted_expand(lambda_hat, eta))
}

/// Per-trial sample means feeding the empirical AESNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AesnrTerms {
    /// mean_n |ĝ·ĥ(n)|².
    pub signal: f64,
    /// mean_n |ĝ·ĥ(n) − g·h(n)|².
    pub error: f64,
    /// |g|².
    pub g_power: f64,
}

impl AesnrTerms {
    pub fn from_trial(g_hat: C64, h_hat: &[C64], g: C64, h: &[C64]) -> Self {
        assert_eq!(h_hat.len(), h.len(), "channel length");
        let n = h.len() as f64;
        let (mut signal, mut error) = (0.0, 0.0);
        for (hh, ht) in h_hat.iter().zip(h) {
            let est = g_hat * hh;
            signal += est.norm_sqr();
            error += (est - g * ht).norm_sqr();
        }
        AesnrTerms {
            signal: signal / n,
            error: error / n,
            g_power: g.norm_sqr(),
        }
    }
}

/// Ratio of sample means: E|ĝĥ|²(1−ε) / (E|ĝĥ − gh|² + E(|g|² + 1/α²)σ²/P_s).
pub fn aesnr_empirical(trials: &[AesnrTerms], model: &LinkModel) -> Result<f64, RestorationError> {
    if trials.is_empty() {
        return Err(RestorationError::EmptyInput);
    }
    let n = trials.len() as f64;
    let signal = trials.iter().map(|t| t.signal).sum::<f64>() / n;
    let error = trials.iter().map(|t| t.error).sum::<f64>() / n;
    let inv_a2 = 1.0 / (model.alpha * model.alpha);
    let floor = trials
        .iter()
        .map(|t| (t.g_power + inv_a2) * model.sigma2 / model.p_s)
        .sum::<f64>()
        / n;
    Ok(signal * (1.0 - model.epsilon) / (error + floor))
}
