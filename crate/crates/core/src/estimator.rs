//! BBU-side estimation: projection onto the BEM subspaces, the MAP coordinate
//! iteration, its prior-free ML counterpart, and the closed-form bounds.
//!
//! The projected observation for BEM index q is
//!
//! ```text
//! r_q(m) = (1/K) Σ_k e^{−j2πq(kN_p+m)/N_s} x_s(kN_p+m),   m = 0..N_p−1
//!        = α g λ_q p + w_q
//! ```
//!
//! where `p = sqrt(ε)·t̃_s` is the pilot as it appears in the relayed signal and
//! `w_q` collects data interference and noise with per-entry variance υ_n.
//! Every formula below is written in terms of `p`.

use thiserror::Error;

use crate::channel::{BemBasis, BemCoefficients};
use crate::config::ValidatedParams;
use crate::numerics::{inner, CVec, NumericsError, C64};
use crate::transceiver::Training;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("backhaul estimate collapsed to zero at iteration {iteration}")]
    SingularEstimate { iteration: usize },
    #[error("CRB of λ is unbounded for a zero backhaul gain")]
    ZeroChannel,
}

/// Statistics and training the BBU knows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub alpha: f64,
    pub v_n: f64,
    pub v_q: Vec<f64>,
    pub v_g: f64,
    pub v_h: f64,
    pub sigma2: f64,
    pub p_s: f64,
    pub epsilon: f64,
    /// sqrt(ε)·t̃_s.
    pub pilot: CVec,
    pub pilot_energy: f64,
    pub t_r: CVec,
    pub t_r_energy: f64,
    pub n_p: usize,
    pub q_order: usize,
}

impl LinkModel {
    pub fn new(params: &ValidatedParams, training: &Training) -> Self {
        let pilot = training
            .t_s_tilde
            .scale(C64::new(params.epsilon().sqrt(), 0.0));
        LinkModel {
            alpha: params.alpha(),
            v_n: params.v_n(),
            v_q: params.v_q().to_vec(),
            v_g: params.v_g(),
            v_h: params.v_h(),
            sigma2: params.sigma_n2(),
            p_s: params.p_s(),
            epsilon: params.epsilon(),
            pilot_energy: pilot.norm_sqr(),
            pilot,
            t_r_energy: training.t_r.norm_sqr(),
            t_r: training.t_r.clone(),
            n_p: params.n_p(),
            q_order: params.q_order(),
        }
    }

    pub fn n_coeffs(&self) -> usize {
        2 * self.q_order + 1
    }

    /// α²‖λ‖²‖p‖²/υ_n + ‖t_r‖²/σ_n², the Fisher information on g for known λ.
    pub fn g_information(&self, lambda_energy: f64) -> f64 {
        self.alpha * self.alpha * lambda_energy * self.pilot_energy / self.v_n
            + self.t_r_energy / self.sigma2
    }
}

/// Per-index averaged observations r_q, q = −Q..Q.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedObservation {
    q_order: usize,
    blocks: Vec<CVec>,
}

impl ProjectedObservation {
    pub fn block(&self, q: i64) -> &CVec {
        &self.blocks[(q + self.q_order as i64) as usize]
    }

    pub fn blocks(&self) -> &[CVec] {
        &self.blocks
    }

    pub fn q_order(&self) -> usize {
        self.q_order
    }
}

/// Computes r_q for every q with the phasors of `basis`.
pub fn project_with_basis(
    x_s: &[C64],
    basis: &BemBasis,
    n_p: usize,
) -> Result<ProjectedObservation, NumericsError> {
    let n_s = basis.n_s();
    if x_s.len() != n_s {
        return Err(NumericsError::LengthMismatch {
            left: x_s.len(),
            right: n_s,
        });
    }
    let k = n_s / n_p;
    let q_order = basis.q_order();
    let blocks = (-(q_order as i64)..=q_order as i64)
        .map(|q| {
            let row = basis.row(q);
            let mut acc = vec![C64::new(0.0, 0.0); n_p];
            for (n, (x, ph)) in x_s.iter().zip(row).enumerate() {
                acc[n % n_p] += ph.conj() * x;
            }
            CVec::from_finite(acc.into_iter().map(|z| z / k as f64).collect())
        })
        .collect();
    Ok(ProjectedObservation { q_order, blocks })
}

/// r = (I ⊗ J)·Dᴴ·x_s, evaluated blockwise.
pub fn project(
    x_s: &CVec,
    params: &ValidatedParams,
) -> Result<ProjectedObservation, NumericsError> {
    let basis = BemBasis::new(params.q_order(), params.n_s());
    project_with_basis(x_s, &basis, params.n_p())
}

/// A candidate θ = (λ, g).
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub lambda: BemCoefficients,
    pub g: C64,
}

/// Output of an estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub lambda_hat: BemCoefficients,
    pub g_hat: C64,
    /// Cost after every λ-sweep and every g update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl EstimateSet {
    pub fn theta(&self) -> Theta {
        Theta {
            lambda: self.lambda_hat.clone(),
            g: self.g_hat,
        }
    }
}

/// Loop controls for the coordinate iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub iterations: usize,
    /// Stop once the relative parameter change falls below this value.
    pub early_exit: Option<f64>,
}

impl IterationOptions {
    pub fn fixed(iterations: usize) -> Self {
        IterationOptions {
            iterations,
            early_exit: None,
        }
    }

    pub fn from_params(params: &ValidatedParams) -> Self {
        Self::fixed(params.i_times())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prior {
    Map,
    None,
}

/// L(θ) = Σ_q {‖r_q − αgλ_q p‖²/υ_n + |λ_q|²/υ_q} + ‖x_r − g t_r‖²/σ² + |g|²/υ_g.
pub fn objective(model: &LinkModel, theta: &Theta, obs: &ProjectedObservation, x_r: &[C64]) -> f64 {
    cost(model, theta, obs, x_r, Prior::Map)
}

/// L(θ) without the prior terms; the quantity the ML iteration descends.
pub fn likelihood_cost(
    model: &LinkModel,
    theta: &Theta,
    obs: &ProjectedObservation,
    x_r: &[C64],
) -> f64 {
    cost(model, theta, obs, x_r, Prior::None)
}

fn cost(
    model: &LinkModel,
    theta: &Theta,
    obs: &ProjectedObservation,
    x_r: &[C64],
    prior: Prior,
) -> f64 {
    let ag = theta.g * model.alpha;
    let mut total = 0.0;
    for ((r_q, &lam), &v_q) in obs
        .blocks()
        .iter()
        .zip(theta.lambda.as_slice())
        .zip(&model.v_q)
    {
        let gain = ag * lam;
        let resid: f64 = r_q
            .iter()
            .zip(model.pilot.iter())
            .map(|(r, p)| (r - gain * p).norm_sqr())
            .sum();
        total += resid / model.v_n;
        if prior == Prior::Map {
            total += lam.norm_sqr() / v_q;
        }
    }
    let resid: f64 = x_r
        .iter()
        .zip(model.t_r.iter())
        .map(|(x, t)| (x - theta.g * t).norm_sqr())
        .sum();
    total += resid / model.sigma2;
    if prior == Prior::Map {
        total += theta.g.norm_sqr() / model.v_g;
    }
    total
}

/// pᴴr_q for every q, plus t_rᴴx_r.
struct Sufficient {
    pilot_corr: Vec<C64>,
    backhaul_corr: C64,
}

impl Sufficient {
    fn new(model: &LinkModel, obs: &ProjectedObservation, x_r: &[C64]) -> Self {
        Sufficient {
            pilot_corr: obs
                .blocks()
                .iter()
                .map(|r| inner(&model.pilot, r))
                .collect(),
            backhaul_corr: inner(&model.t_r, x_r),
        }
    }
}

fn check_shapes(
    model: &LinkModel,
    obs: &ProjectedObservation,
    x_r: &[C64],
) -> Result<(), NumericsError> {
    let bad = obs.q_order() != model.q_order || obs.blocks().iter().any(|b| b.len() != model.n_p);
    if bad {
        return Err(NumericsError::LengthMismatch {
            left: obs.blocks().len() * obs.blocks().first().map_or(0, |b| b.len()),
            right: model.n_coeffs() * model.n_p,
        });
    }
    if x_r.len() != model.t_r.len() {
        return Err(NumericsError::LengthMismatch {
            left: x_r.len(),
            right: model.t_r.len(),
        });
    }
    Ok(())
}

fn relative_change(prev: &Theta, lambda: &[C64], g: C64) -> f64 {
    let num: f64 = prev
        .lambda
        .as_slice()
        .iter()
        .zip(lambda)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        + (prev.g - g).norm_sqr();
    let den = prev.lambda.energy() + prev.g.norm_sqr();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Iterative MAP estimation of (λ, g).
///
/// ĝ starts at t_rᴴx_r/(‖t_r‖² + σ²/υ_g). Each iteration updates every λ_q
/// (ascending q) given ĝ, then ĝ given all λ̂_q. Each step minimizes [`objective`]
/// exactly in its coordinate, so the recorded trace never increases.
pub fn map_estimate(
    model: &LinkModel,
    obs: &ProjectedObservation,
    x_r: &[C64],
    opts: IterationOptions,
) -> Result<EstimateSet, EstimatorError> {
    check_shapes(model, obs, x_r)?;
    let stats = Sufficient::new(model, obs, x_r);
    let a = model.alpha;
    let a2 = a * a;

    let mut g = stats.backhaul_corr / (model.t_r_energy + model.sigma2 / model.v_g);
    let mut lambda = vec![C64::new(0.0, 0.0); model.n_coeffs()];
    let mut trace = Vec::with_capacity(2 * opts.iterations);
    let mut done = 0;

    for _ in 0..opts.iterations {
        let before = Theta {
            lambda: BemCoefficients::from_vec(lambda.clone()),
            g,
        };
        let shrink = a2 * g.norm_sqr() * model.pilot_energy;
        for ((lam, c), &v_q) in lambda.iter_mut().zip(&stats.pilot_corr).zip(&model.v_q) {
            *lam = g.conj() * a * c / (shrink + model.v_n / v_q);
        }
        trace.push(objective(
            model,
            &Theta {
                lambda: BemCoefficients::from_vec(lambda.clone()),
                g,
            },
            obs,
            x_r,
        ));

        g = g_update(model, &stats, &lambda, Prior::Map);
        let theta = Theta {
            lambda: BemCoefficients::from_vec(lambda.clone()),
            g,
        };
        trace.push(objective(model, &theta, obs, x_r));
        done += 1;

        if let Some(tol) = opts.early_exit {
            if done > 1 && relative_change(&before, &lambda, g) < tol {
                break;
            }
        }
    }

    Ok(EstimateSet {
        lambda_hat: BemCoefficients::from_vec(lambda),
        g_hat: g,
        objective_trace: trace,
        iterations: done,
    })
}

fn g_update(model: &LinkModel, stats: &Sufficient, lambda: &[C64], prior: Prior) -> C64 {
    let a = model.alpha;
    let mut num = C64::new(0.0, 0.0);
    let mut lam_energy = 0.0;
    for (lam, c) in lambda.iter().zip(&stats.pilot_corr) {
        num += lam.conj() * c * a;
        lam_energy += lam.norm_sqr();
    }
    let num = num / model.v_n + stats.backhaul_corr / model.sigma2;
    let mut den =
        a * a * lam_energy * model.pilot_energy / model.v_n + model.t_r_energy / model.sigma2;
    if prior == Prior::Map {
        den += 1.0 / model.v_g;
    }
    num / den
}

/// Prior-free counterpart of [`map_estimate`] (the υ_q, υ_g → ∞ limit).
///
/// Fails with [`EstimatorError::SingularEstimate`] when ĝ reaches zero, since
/// the λ update divides by it.
pub fn ml_estimate(
    model: &LinkModel,
    obs: &ProjectedObservation,
    x_r: &[C64],
    opts: IterationOptions,
) -> Result<EstimateSet, EstimatorError> {
    check_shapes(model, obs, x_r)?;
    let stats = Sufficient::new(model, obs, x_r);
    let a = model.alpha;

    let mut g = stats.backhaul_corr / model.t_r_energy;
    let mut lambda = vec![C64::new(0.0, 0.0); model.n_coeffs()];
    let mut trace = Vec::with_capacity(2 * opts.iterations);
    let mut done = 0;

    for it in 0..opts.iterations {
        let before = Theta {
            lambda: BemCoefficients::from_vec(lambda.clone()),
            g,
        };
        let denom = g * a * model.pilot_energy;
        if denom.norm_sqr() == 0.0 {
            return Err(EstimatorError::SingularEstimate { iteration: it });
        }
        for (lam, c) in lambda.iter_mut().zip(&stats.pilot_corr) {
            *lam = c / denom;
        }
        if lambda
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(EstimatorError::SingularEstimate { iteration: it });
        }
        let theta = Theta {
            lambda: BemCoefficients::from_vec(lambda.clone()),
            g,
        };
        trace.push(likelihood_cost(model, &theta, obs, x_r));

        g = g_update(model, &stats, &lambda, Prior::None);
        let theta = Theta {
            lambda: BemCoefficients::from_vec(lambda.clone()),
            g,
        };
        trace.push(likelihood_cost(model, &theta, obs, x_r));
        done += 1;

        if let Some(tol) = opts.early_exit {
            if done > 1 && relative_change(&before, &lambda, g) < tol {
                break;
            }
        }
    }

    Ok(EstimateSet {
        lambda_hat: BemCoefficients::from_vec(lambda),
        g_hat: g,
        objective_trace: trace,
        iterations: done,
    })
}

/// ML estimate of g when λ is known.
pub fn ml_g_given_lambda(
    model: &LinkModel,
    obs: &ProjectedObservation,
    x_r: &[C64],
    lambda: &BemCoefficients,
) -> Result<C64, EstimatorError> {
    check_shapes(model, obs, x_r)?;
    let stats = Sufficient::new(model, obs, x_r);
    Ok(g_update(model, &stats, lambda.as_slice(), Prior::None))
}

/// MAP estimate of g when λ is known.
pub fn map_g_given_lambda(
    model: &LinkModel,
    obs: &ProjectedObservation,
    x_r: &[C64],
    lambda: &BemCoefficients,
) -> Result<C64, EstimatorError> {
    check_shapes(model, obs, x_r)?;
    let stats = Sufficient::new(model, obs, x_r);
    Ok(g_update(model, &stats, lambda.as_slice(), Prior::Map))
}

/// Cramér–Rao bounds for λ_q (per q) and g.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbValues {
    pub crb_lambda: Vec<f64>,
    pub crb_g: f64,
}

/// CRB_λq = υ_n/(α²|g|²‖p‖²), CRB_g = 1/(α²‖λ‖²‖p‖²/υ_n + ‖t_r‖²/σ²).
pub fn crb(
    model: &LinkModel,
    g: C64,
    lambda: &BemCoefficients,
) -> Result<CrbValues, EstimatorError> {
    let info = model.alpha * model.alpha * g.norm_sqr() * model.pilot_energy;
    if info == 0.0 {
        return Err(EstimatorError::ZeroChannel);
    }
    Ok(CrbValues {
        crb_lambda: vec![model.v_n / info; lambda.len()],
        crb_g: 1.0 / model.g_information(lambda.energy()),
    })
}

/// Closed-form MSEs of ĝ for known λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GMse {
    /// Bayesian MSE of the prior-regularized estimate.
    pub map: f64,
    /// MSE of the prior-free estimate, equal to CRB_g.
    pub ml: f64,
}

pub fn analytic_mse_g(model: &LinkModel, lambda: &BemCoefficients) -> GMse {
    let info = model.g_information(lambda.energy());
    let ml = 1.0 / info;
    GMse {
        map: ml * model.v_g / (model.v_g + ml),
        ml,
    }
}
