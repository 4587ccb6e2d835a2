use std::fmt;

use rayon::prelude::*;

use super::sweep::{run_point, TrialContext, TrialRecord};
use super::HarnessError;
use crate::channel::{draw_bem, draw_realization};
use crate::config::ValidatedParams;
use crate::estimator::{analytic_mse_g, project_with_basis};
use crate::numerics::{Purpose, RngStream, C64};
use crate::restoration::{aesnr_empirical, aesnr_theoretical, AesnrTerms};
use crate::transceiver::{generate_data, simulate_uplink, TransmitBlock};

/// Trial budgets for [`verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Trials for the estimator and AESNR checks.
    pub trials: usize,
    /// Trials for the projected-noise covariance.
    pub whitening_trials: usize,
    /// Random weight vectors tried against η*.
    pub search_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 2000,
            whitening_trials: 20_000,
            search_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            name,
            passed,
            detail,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Runs the property checks of every module at `params` and reports measured values.
pub fn verify(params: &ValidatedParams, opts: VerifyOptions) -> Result<VerifyReport, HarnessError> {
    let mut report = VerifyReport::default();
    let ctx = TrialContext::new(params)?;

    let again = params.validate()?;
    report.push(
        "validate_idempotent",
        again == *params,
        format!("K = {}, υ_n = {:.6e}", again.k(), again.v_n()),
    );

    projection_identity(&ctx, &mut report)?;
    noise_whitening(&ctx, opts.whitening_trials, &mut report)?;

    let records = run_point(&ctx, 0, opts.trials)?;
    map_monotone(&records, &mut report);
    if ctx.snr_db >= 10.0 {
        fixed_point(&ctx, &records, &mut report)?;
    }
    dominance(&records, params, &mut report);
    weights(&ctx, opts.search_samples, &mut report)?;
    aesnr(&ctx, &records, &mut report)?;
    eta_trend(params, &mut report)?;
    g_mse_ordering(&ctx, opts.search_samples, &mut report);
    Ok(report)
}

fn projection_identity(ctx: &TrialContext, report: &mut VerifyReport) -> Result<(), HarnessError> {
    let obs = project_with_basis(&ctx.training.t_s, &ctx.basis, ctx.params.n_p())?;
    let t_tilde = &ctx.training.t_s_tilde;
    let scale = t_tilde.norm_sqr().sqrt();
    let q_max = ctx.params.q_order() as i64;
    let leak = (-q_max..=q_max)
        .filter(|&q| q != 0)
        .map(|q| obs.block(q).norm_sqr().sqrt() / scale)
        .fold(0.0, f64::max);
    let dc = obs
        .block(0)
        .iter()
        .zip(t_tilde.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / scale;
    report.push(
        "projection_identity",
        leak < 1e-10 && dc < 1e-12,
        format!("max leakage {leak:.3e}, q = 0 deviation {dc:.3e}"),
    );
    Ok(())
}

fn noise_whitening(
    ctx: &TrialContext,
    trials: usize,
    report: &mut VerifyReport,
) -> Result<(), HarnessError> {
    let p = &ctx.params;
    let dim = p.n_coeffs() * p.n_p();
    let chunk = 500;
    let chunks = trials.div_ceil(chunk);
    let seed = p.seed();

    // Fixed chunking and a sequential reduction keep the sum order stable.
    let partials: Vec<Vec<C64>> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<C64>, HarnessError> {
            let mut acc = vec![C64::new(0.0, 0.0); dim * dim];
            let mut w = vec![C64::new(0.0, 0.0); dim];
            for t in (c * chunk)..((c + 1) * chunk).min(trials) {
                let stream = t as u64;
                let truth = draw_realization(
                    p,
                    &ctx.basis,
                    &mut RngStream::new(seed, stream, Purpose::Channel),
                );
                let data = generate_data(p, &mut RngStream::new(seed, stream, Purpose::Data));
                let block = TransmitBlock::new(data, ctx.training.t_s.clone(), p.epsilon())?;
                let mut noise = RngStream::new(seed, stream, Purpose::Noise);
                let rx = simulate_uplink(p, &truth, &block, &ctx.training.t_r, &mut noise);
                let obs = project_with_basis(&rx.x_s, &ctx.basis, p.n_p())?;
                let ag = truth.g * ctx.model.alpha;
                for (i, (r_q, lam)) in obs.blocks().iter().zip(truth.lambda.as_slice()).enumerate()
                {
                    for (m, (r, pm)) in r_q.iter().zip(ctx.model.pilot.iter()).enumerate() {
                        w[i * p.n_p() + m] = r - ag * lam * pm;
                    }
                }
                for (a, wa) in w.iter().enumerate() {
                    let row = &mut acc[a * dim..(a + 1) * dim];
                    for (cell, wb) in row.iter_mut().zip(&w) {
                        *cell += wa * wb.conj();
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;

    let mut cov = vec![C64::new(0.0, 0.0); dim * dim];
    for part in &partials {
        for (c, v) in cov.iter_mut().zip(part) {
            *c += v;
        }
    }
    let v_n = p.v_n();
    let (mut diag_dev, mut off_max) = (0.0f64, 0.0f64);
    for a in 0..dim {
        for b in 0..dim {
            let c = cov[a * dim + b] / trials as f64;
            if a == b {
                diag_dev = diag_dev.max((c.re / v_n - 1.0).abs());
            } else {
                off_max = off_max.max(c.norm() / v_n);
            }
        }
    }
    report.push(
        "noise_whitening",
        diag_dev < 0.05 && off_max < 0.05,
        format!("{trials} trials: max |diag/υ_n − 1| = {diag_dev:.4}, max |off-diag|/υ_n = {off_max:.4}"),
    );
    Ok(())
}

fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs())
}

fn map_monotone(records: &[TrialRecord], report: &mut VerifyReport) {
    let traces: Vec<&[f64]> = records
        .iter()
        .filter_map(|r| r.map.as_ref()?.estimate.as_ref())
        .map(|e| e.objective_trace.as_slice())
        .collect();
    let good = traces.iter().filter(|t| non_increasing(t)).count();
    let frac = good as f64 / traces.len() as f64;
    report.push(
        "map_monotone",
        frac >= 0.999,
        format!("{good}/{} traces non-increasing", traces.len()),
    );
}

fn fixed_point(
    ctx: &TrialContext,
    records: &[TrialRecord],
    report: &mut VerifyReport,
) -> Result<(), HarnessError> {
    let mut longer = ctx.clone();
    longer.options.iterations += 1;
    longer.run_ml = false;
    let extra = run_point(&longer, 0, records.len())?;
    let mut changes: Vec<f64> = records
        .iter()
        .zip(&extra)
        .filter_map(|(a, b)| {
            let a = a.map.as_ref()?.estimate.as_ref()?;
            let b = b.map.as_ref()?.estimate.as_ref()?;
            let num: f64 = a
                .lambda_hat
                .as_slice()
                .iter()
                .zip(b.lambda_hat.as_slice())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                + (a.g_hat - b.g_hat).norm_sqr();
            let den = a.lambda_hat.energy() + a.g_hat.norm_sqr();
            Some((num / den).sqrt())
        })
        .collect();
    changes.sort_by(f64::total_cmp);
    let worst = changes.last().copied().unwrap_or(0.0);
    let median = changes.get(changes.len() / 2).copied().unwrap_or(0.0);
    report.push(
        "map_fixed_point",
        worst < 1e-6,
        format!(
            "change from one extra iteration: median {median:.3e}, max {worst:.3e}, {} of {} above 1e-6",
            changes.iter().filter(|&&c| c >= 1e-6).count(),
            changes.len()
        ),
    );
    Ok(())
}

fn dominance(records: &[TrialRecord], params: &ValidatedParams, report: &mut VerifyReport) {
    let n = records.len() as f64;
    let avg = |f: &dyn Fn(&TrialRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let map_bl = avg(&|r| r.map.as_ref().map_or(f64::NAN, |m| m.sq_err_bl));
    let ml_bl = avg(&|r| r.ml.as_ref().map_or(f64::NAN, |m| m.sq_err_bl));
    let map_al = avg(&|r| r.map.as_ref().map_or(f64::NAN, |m| m.sq_err_al_coeff));
    let ml_al = avg(&|r| r.ml.as_ref().map_or(f64::NAN, |m| m.sq_err_al_coeff));
    report.push(
        "map_dominance",
        map_bl <= ml_bl && map_al <= ml_al,
        format!(
            "BL MSE map {map_bl:.4e} vs ml {ml_bl:.4e}; AL coefficient MSE map {map_al:.4e} vs ml {ml_al:.4e}"
        ),
    );

    let v_h = params.v_h();
    let map_worst = records
        .iter()
        .filter_map(|r| r.map.as_ref())
        .map(|m| m.sq_err_al_coeff)
        .fold(0.0, f64::max);
    let ml_blowups = records
        .iter()
        .filter_map(|r| r.ml.as_ref())
        .filter(|m| m.sq_err_al_time > 1e3 * v_h)
        .count();
    report.push(
        "map_al_bounded",
        map_worst <= 2.0 * v_h,
        format!(
            "worst MAP per-trial AL MSE {:.4}·υ_h; ML trials above 1e3·υ_h: {ml_blowups}",
            map_worst / v_h
        ),
    );
}

fn weights(
    ctx: &TrialContext,
    samples: usize,
    report: &mut VerifyReport,
) -> Result<(), HarnessError> {
    let ws = &ctx.weights;
    let best = aesnr_theoretical(&ctx.eta_star, ws)?;
    let mut rng = RngStream::new(ctx.params.seed(), 0, Purpose::Search);
    let top = ctx.eta_star.iter().copied().fold(0.0, f64::max);
    let mut champion = f64::NEG_INFINITY;
    for i in 0..samples {
        let eta: Vec<f64> = if i % 2 == 0 {
            ctx.eta_star
                .iter()
                .map(|e| e * (1.0 + 0.5 * rng.standard_normal()))
                .collect()
        } else {
            ctx.eta_star
                .iter()
                .map(|_| 2.0 * top * rng.uniform())
                .collect()
        };
        champion = champion.max(aesnr_theoretical(&eta, ws)?);
    }
    report.push(
        "weight_optimality",
        best >= champion - 1e-6,
        format!("γ̄(η*) = {best:.8e}, best of {samples} random η = {champion:.8e}"),
    );
    Ok(())
}

fn aesnr(
    ctx: &TrialContext,
    records: &[TrialRecord],
    report: &mut VerifyReport,
) -> Result<(), HarnessError> {
    let owa: Vec<AesnrTerms> = records.iter().filter_map(|r| r.owa).collect();
    let base: Vec<AesnrTerms> = records.iter().filter_map(|r| r.baseline).collect();
    let emp_owa = aesnr_empirical(&owa, &ctx.model)?;
    let emp_base = aesnr_empirical(&base, &ctx.model)?;
    report.push(
        "aesnr_ordering",
        emp_owa >= emp_base,
        format!("empirical AESNR η* {emp_owa:.6e} vs η = 1 {emp_base:.6e}"),
    );
    if ctx.snr_db >= 10.0 {
        let theory = aesnr_theoretical(&ctx.eta_star, &ctx.weights)?;
        let rel = (emp_owa - theory).abs() / theory;
        report.push(
            "aesnr_theory_agreement",
            rel < 0.10,
            format!(
                "empirical {emp_owa:.6e} vs theoretical {theory:.6e} ({:.1}% apart)",
                100.0 * rel
            ),
        );
    }
    Ok(())
}

fn eta_trend(params: &ValidatedParams, report: &mut VerifyReport) -> Result<(), HarnessError> {
    let grid: Vec<f64> = (0..=6).map(|i| 5.0 * i as f64).collect();
    let spreads = grid
        .iter()
        .map(|&snr| {
            let ctx = TrialContext::at_snr(params.raw(), snr)?;
            Ok(ctx
                .eta_star
                .iter()
                .map(|e| (e - 1.0).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>, HarnessError>>()?;
    let monotone = spreads.windows(2).all(|w| w[1] <= w[0]);
    let listed: Vec<String> = spreads.iter().map(|s| format!("{s:.4e}")).collect();
    report.push(
        "eta_approaches_one",
        monotone,
        format!("max |η*_q − 1| over 0:5:30 dB = [{}]", listed.join(", ")),
    );
    Ok(())
}

fn g_mse_ordering(ctx: &TrialContext, samples: usize, report: &mut VerifyReport) {
    let mut rng = RngStream::new(ctx.params.seed(), 1, Purpose::Search);
    let violations = (0..samples)
        .filter(|_| {
            let lambda = draw_bem(&ctx.params, &mut rng);
            let mse = analytic_mse_g(&ctx.model, &lambda);
            mse.map.is_nan() || mse.map >= mse.ml
        })
        .count();
    report.push(
        "g_mse_ordering",
        violations == 0,
        format!(
            "MAP g-MSE below CRB_g in {} of {samples} channel draws",
            samples - violations
        ),
    );
}
