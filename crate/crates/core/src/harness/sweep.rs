use rayon::prelude::*;

use super::{AesnrRow, HarnessError, Method, MseRow, Restorer, SweepConfig, SweepResult};
use crate::channel::{draw_realization, BemBasis, BemCoefficients, ChannelRealization};
use crate::config::{SystemParams, ValidatedParams};
use crate::estimator::{
    map_estimate, ml_estimate, project_with_basis, EstimateSet, EstimatorError, IterationOptions,
    LinkModel,
};
use crate::numerics::{CVec, Purpose, RngStream, C64};
use crate::restoration::{
    aesnr_empirical, aesnr_theoretical, optimal_weights, restore_with_basis, weight_matrices,
    AesnrTerms, WeightSystem,
};
use crate::transceiver::{generate_data, simulate_uplink, Training, TransmitBlock};

/// Everything shared by the trials of one operating point.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub snr_db: f64,
    pub params: ValidatedParams,
    pub model: LinkModel,
    pub basis: BemBasis,
    pub training: Training,
    pub weights: WeightSystem,
    pub eta_star: Vec<f64>,
    pub options: IterationOptions,
    pub run_map: bool,
    pub run_ml: bool,
    noiseless: bool,
}

impl TrialContext {
    pub fn new(params: &ValidatedParams) -> Result<Self, HarnessError> {
        let training = Training::new(params);
        let model = LinkModel::new(params, &training);
        let weights = weight_matrices(&model);
        let eta_star = optimal_weights(&weights)?.eta;
        Ok(TrialContext {
            snr_db: 10.0 * (params.p_s() / params.sigma_n2()).log10(),
            params: params.clone(),
            basis: BemBasis::new(params.q_order(), params.n_s()),
            options: IterationOptions::from_params(params),
            model,
            training,
            weights,
            eta_star,
            run_map: true,
            run_ml: true,
            noiseless: false,
        })
    }

    /// Context at P_s = P_r = 10^(snr/10), σ_n² = 1.
    pub fn at_snr(base: &SystemParams, snr_db: f64) -> Result<Self, HarnessError> {
        let mut ctx = Self::new(&base.at_snr_db(snr_db).validate()?)?;
        ctx.snr_db = snr_db;
        Ok(ctx)
    }

    /// Data-free, noise-free trials; the estimator model keeps only a vanishing
    /// noise floor so every estimate collapses onto the truth.
    #[cfg(any(test, feature = "test-overrides"))]
    pub fn noiseless_data_free(params: &ValidatedParams) -> Result<Self, HarnessError> {
        let mut ctx = Self::new(params)?;
        ctx.noiseless = true;
        ctx.model.v_n = 1e-24;
        ctx.model.sigma2 = 1e-24;
        Ok(ctx)
    }
}

/// Estimates of one method and their squared errors against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    /// `None` when the iteration hit a zero backhaul estimate.
    pub estimate: Option<EstimateSet>,
    pub sq_err_bl: f64,
    pub sq_err_al_coeff: f64,
    pub sq_err_al_time: f64,
}

impl MethodOutcome {
    fn scored(est: EstimateSet, truth: &ChannelRealization, basis: &BemBasis) -> Self {
        let n = est.lambda_hat.len() as f64;
        let coeff = est
            .lambda_hat
            .as_slice()
            .iter()
            .zip(truth.lambda.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n;
        let h_hat = basis.expand(&est.lambda_hat);
        MethodOutcome {
            sq_err_bl: (est.g_hat - truth.g).norm_sqr(),
            sq_err_al_coeff: coeff,
            sq_err_al_time: time_error(&h_hat, &truth.h),
            estimate: Some(est),
        }
    }

    fn singular() -> Self {
        MethodOutcome {
            estimate: None,
            sq_err_bl: f64::INFINITY,
            sq_err_al_coeff: f64::INFINITY,
            sq_err_al_time: f64::INFINITY,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.estimate.is_none()
    }
}

fn time_error(h_hat: &[C64], h: &[C64]) -> f64 {
    h_hat
        .iter()
        .zip(h)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / h.len() as f64
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub stream: u64,
    pub lambda: BemCoefficients,
    pub g: C64,
    pub map: Option<MethodOutcome>,
    pub ml: Option<MethodOutcome>,
    /// AESNR terms of the MAP estimate restored with η*.
    pub owa: Option<AesnrTerms>,
    /// AESNR terms of the MAP estimate restored with η = 1.
    pub baseline: Option<AesnrTerms>,
}

/// Draws channel, data and noise from stream `stream` of the context seed,
/// runs the enabled estimators and scores them.
pub fn run_trial(ctx: &TrialContext, stream: u64) -> Result<TrialRecord, HarnessError> {
    let p = &ctx.params;
    let seed = p.seed();
    let truth = draw_realization(
        p,
        &ctx.basis,
        &mut RngStream::new(seed, stream, Purpose::Channel),
    );
    let data = if ctx.noiseless {
        CVec::zeros(p.n_s())
    } else {
        generate_data(p, &mut RngStream::new(seed, stream, Purpose::Data))
    };
    let block = TransmitBlock::new(data, ctx.training.t_s.clone(), p.epsilon())?;
    let rx = match ctx.noiseless {
        #[cfg(any(test, feature = "test-overrides"))]
        true => crate::transceiver::simulate_uplink_noiseless(p, &truth, &block, &ctx.training.t_r),
        _ => simulate_uplink(
            p,
            &truth,
            &block,
            &ctx.training.t_r,
            &mut RngStream::new(seed, stream, Purpose::Noise),
        ),
    };
    let obs = project_with_basis(&rx.x_s, &ctx.basis, p.n_p())?;

    let map = if ctx.run_map {
        let est = map_estimate(&ctx.model, &obs, &rx.x_r, ctx.options)?;
        Some(MethodOutcome::scored(est, &truth, &ctx.basis))
    } else {
        None
    };
    let ml = if ctx.run_ml {
        Some(match ml_estimate(&ctx.model, &obs, &rx.x_r, ctx.options) {
            Ok(est) => MethodOutcome::scored(est, &truth, &ctx.basis),
            Err(EstimatorError::SingularEstimate { .. }) => MethodOutcome::singular(),
            Err(e) => return Err(e.into()),
        })
    } else {
        None
    };

    let (owa, baseline) = match map.as_ref().and_then(|m| m.estimate.as_ref()) {
        Some(est) => {
            let h_owa = restore_with_basis(&est.lambda_hat, &ctx.eta_star, &ctx.basis)?;
            let h_one = ctx.basis.expand(&est.lambda_hat);
            (
                Some(AesnrTerms::from_trial(est.g_hat, &h_owa, truth.g, &truth.h)),
                Some(AesnrTerms::from_trial(est.g_hat, &h_one, truth.g, &truth.h)),
            )
        }
        None => (None, None),
    };

    Ok(TrialRecord {
        stream,
        lambda: truth.lambda,
        g: truth.g,
        map,
        ml,
        owa,
        baseline,
    })
}

/// All trial records of one SNR point, in trial order.
#[derive(Debug, Clone)]
pub struct PointRecords {
    pub ctx: TrialContext,
    pub records: Vec<TrialRecord>,
}

/// Runs `trials` trials on streams `first_stream..` using the current rayon pool.
/// The output order is the trial order regardless of scheduling.
pub fn run_point(
    ctx: &TrialContext,
    first_stream: u64,
    trials: usize,
) -> Result<Vec<TrialRecord>, HarnessError> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(ctx, first_stream + t))
        .collect()
}

/// Runs every SNR point of the sweep and keeps the per-trial records.
///
/// Trial t of point i uses stream i·trials + t, so results depend only on the
/// seed and the configuration.
pub fn run_sweep_records(
    sweep: &SweepConfig,
    base: &SystemParams,
) -> Result<Vec<PointRecords>, HarnessError> {
    sweep.check()?;
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.workers)
        .build()
        .map_err(|e| HarnessError::InvalidSweep(e.to_string()))?;
    let trials = sweep.trials_per_point;

    sweep
        .snr_points_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let mut ctx = TrialContext::at_snr(base, snr)?;
            ctx.run_map = sweep.runs(Method::Map) || !sweep.restorers.is_empty();
            ctx.run_ml = sweep.runs(Method::Ml);
            let first = (i * trials) as u64;
            let records = pool.install(|| run_point(&ctx, first, trials))?;
            Ok(PointRecords { ctx, records })
        })
        .collect()
}

pub fn run_sweep(sweep: &SweepConfig, base: &SystemParams) -> Result<SweepResult, HarnessError> {
    let points = run_sweep_records(sweep, base)?;
    aggregate(&points, sweep)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Reduces per-trial records to the sweep tables. Sums run in trial order.
pub fn aggregate(
    points: &[PointRecords],
    sweep: &SweepConfig,
) -> Result<SweepResult, HarnessError> {
    let mut result = SweepResult::default();
    for point in points {
        let snr_db = point.ctx.snr_db;
        for &method in &sweep.methods {
            let outcomes: Vec<&MethodOutcome> = point
                .records
                .iter()
                .filter_map(|r| match method {
                    Method::Map => r.map.as_ref(),
                    Method::Ml => r.ml.as_ref(),
                })
                .collect();
            if outcomes.is_empty() {
                continue;
            }
            result.mse.push(MseRow {
                snr_db,
                method,
                mse_bl: mean(outcomes.iter().map(|o| o.sq_err_bl)),
                mse_al_coeff: mean(outcomes.iter().map(|o| o.sq_err_al_coeff)),
                mse_al_time: mean(outcomes.iter().map(|o| o.sq_err_al_time)),
                ml_singular_count: outcomes.iter().filter(|o| o.is_singular()).count(),
            });
        }
        for &restorer in &sweep.restorers {
            let terms: Vec<AesnrTerms> = point
                .records
                .iter()
                .filter_map(|r| match restorer {
                    Restorer::Owa => r.owa,
                    Restorer::Baseline => r.baseline,
                })
                .collect();
            if terms.is_empty() {
                continue;
            }
            let eta = match restorer {
                Restorer::Owa => point.ctx.eta_star.clone(),
                Restorer::Baseline => vec![1.0; point.ctx.eta_star.len()],
            };
            result.aesnr.push(AesnrRow {
                snr_db,
                restorer,
                aesnr_emp: aesnr_empirical(&terms, &point.ctx.model)?,
                aesnr_theory: aesnr_theoretical(&eta, &point.ctx.weights)?,
            });
        }
    }
    Ok(result)
}
