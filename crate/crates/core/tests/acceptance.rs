//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use cranest::channel::{draw_bem, draw_realization, BemBasis, BemCoefficients, ChannelRealization};
use cranest::estimator::{analytic_mse_g, ml_g_given_lambda, project_with_basis, LinkModel};
use cranest::harness::{
    aggregate, run_sweep, run_sweep_records, Method, PointRecords, Restorer, SweepConfig,
    TrialContext,
};
use cranest::numerics::{CVec, Purpose, RngStream, C64};
use cranest::restoration::aesnr_theoretical;
use cranest::transceiver::{generate_data, simulate_uplink, Training, TransmitBlock};
use cranest::SystemParams;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<bool>, id: u32, name: &str, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let o = f();
    let tag = if o.passed { "PASS" } else { "FAIL" };
    println!(
        "{tag} criterion {id} ({name}): {} [{:.2} s]",
        o.detail,
        start.elapsed().as_secs_f64()
    );
    results.push(o.passed);
}

fn default_grid() -> Vec<f64> {
    (0..=6).map(|i| 5.0 * i as f64).collect()
}

fn projection_identity() -> Outcome {
    let start = Instant::now();
    let mut configs = vec![SystemParams::default()];
    let mut rng = RngStream::new(101, 0, Purpose::Test);
    while configs.len() < 51 {
        let n_p = 1 + rng.below(32);
        let q = rng.below(7);
        let k = 2 * q + 1 + rng.below(150);
        configs.push(SystemParams {
            n_p,
            n_s: n_p * k,
            q_order: q,
            ..SystemParams::default()
        });
    }
    let (mut leak, mut dc) = (0.0f64, 0.0f64);
    for raw in &configs {
        let p = raw.validate().expect("generated config is valid");
        let tr = Training::new(&p);
        let basis = BemBasis::new(p.q_order(), p.n_s());
        let obs = project_with_basis(&tr.t_s, &basis, p.n_p()).unwrap();
        let scale = tr.t_s_tilde.norm_sqr().sqrt();
        let q_max = p.q_order() as i64;
        for q in -q_max..=q_max {
            if q == 0 {
                let dev = obs
                    .block(0)
                    .iter()
                    .zip(tr.t_s_tilde.iter())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                dc = dc.max(dev);
            } else {
                leak = leak.max(obs.block(q).norm_sqr().sqrt() / scale);
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: leak < 1e-10 && dc < 1e-12 && elapsed < Duration::from_secs(1),
        detail: format!(
            "{} configs, max ‖J·D_q·t_s‖/‖t̃_s‖ = {leak:.3e} (< 1e-10), max |J·D_0·t_s − t̃_s| = {dc:.3e} (< 1e-12), {:.3} s (< 1 s)",
            configs.len(),
            elapsed.as_secs_f64()
        ),
    }
}

fn noise_whitening() -> Outcome {
    let start = Instant::now();
    let p = SystemParams::default().at_snr_db(10.0).validate().unwrap();
    let tr = Training::new(&p);
    let model = LinkModel::new(&p, &tr);
    let basis = BemBasis::new(p.q_order(), p.n_s());
    let trials = 20_000u64;
    let dim = p.n_coeffs() * p.n_p();
    let mut cov = vec![C64::new(0.0, 0.0); dim * dim];
    let mut w = vec![C64::new(0.0, 0.0); dim];
    for t in 0..trials {
        let truth = draw_realization(&p, &basis, &mut RngStream::new(202, t, Purpose::Channel));
        let b = generate_data(&p, &mut RngStream::new(202, t, Purpose::Data));
        let block = TransmitBlock::new(b, tr.t_s.clone(), p.epsilon()).unwrap();
        let rx = simulate_uplink(
            &p,
            &truth,
            &block,
            &tr.t_r,
            &mut RngStream::new(202, t, Purpose::Noise),
        );
        let q_max = p.q_order() as i64;
        let ag = truth.g * model.alpha;
        for (i, q) in (-q_max..=q_max).enumerate() {
            let r_q = common::project_direct(&rx.x_s, q, p.n_p());
            for m in 0..p.n_p() {
                w[i * p.n_p() + m] = r_q[m] - ag * truth.lambda.get(q) * model.pilot[m];
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += w[a] * w[b].conj();
            }
        }
    }
    let v_n = p.v_n();
    let (mut diag, mut within, mut cross) = (0.0f64, 0.0f64, 0.0f64);
    for a in 0..dim {
        for b in 0..dim {
            let c = cov[a * dim + b] / trials as f64;
            if a == b {
                diag = diag.max((c.re / v_n - 1.0).abs());
            } else if a / p.n_p() == b / p.n_p() {
                within = within.max(c.norm() / v_n);
            } else {
                cross = cross.max(c.norm() / v_n);
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: diag < 0.05 && cross < 0.05 && elapsed < Duration::from_secs(30),
        detail: format!(
            "{trials} trials at 10 dB, max |diag/υ_n − 1| = {diag:.4} (< 0.05), max cross-block |cov|/υ_n = {cross:.4} (< 0.05), within-block off-diagonal {within:.4}, {:.2} s (< 30 s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn map_convergence() -> Outcome {
    let sweep = SweepConfig {
        snr_points_db: vec![0.0, 10.0, 20.0, 30.0],
        trials_per_point: 2500,
        methods: vec![Method::Map],
        restorers: vec![],
        ..SweepConfig::default()
    };
    let points = run_sweep_records(
        &sweep,
        &SystemParams {
            seed: 303,
            ..SystemParams::default()
        },
    )
    .unwrap();
    let mut total = 0usize;
    let mut good = 0usize;
    let mut worst = 0.0f64;
    for rec in points.iter().flat_map(|p| &p.records) {
        let trace = &rec
            .map
            .as_ref()
            .unwrap()
            .estimate
            .as_ref()
            .unwrap()
            .objective_trace;
        total += 1;
        let mut ok = true;
        for w in trace.windows(2) {
            let rise = (w[1] - w[0]) / w[0].abs();
            worst = worst.max(rise);
            ok &= w[1] <= w[0] + 1e-9 * w[0].abs();
        }
        good += ok as usize;
    }
    let frac = good as f64 / total as f64;
    Outcome {
        passed: frac >= 0.999,
        detail: format!(
            "{good}/{total} traces non-increasing within 1e-9 relative ({:.4}% ≥ 99.9%), largest relative rise {worst:.3e}",
            100.0 * frac
        ),
    }
}

struct DefaultSweep {
    points: Vec<PointRecords>,
    single_worker: Duration,
    identical_across_workers: bool,
}

fn default_sweep() -> DefaultSweep {
    let base = SystemParams::default();
    let one = SweepConfig {
        workers: 1,
        ..SweepConfig::default()
    };
    let start = Instant::now();
    let points = run_sweep_records(&one, &base).unwrap();
    let result_one = aggregate(&points, &one).unwrap();
    let single_worker = start.elapsed();

    let eight = SweepConfig {
        workers: 8,
        ..SweepConfig::default()
    };
    let points8 = run_sweep_records(&eight, &base).unwrap();
    let result8 = aggregate(&points8, &eight).unwrap();
    let same_records = points
        .iter()
        .zip(&points8)
        .all(|(a, b)| a.records == b.records);
    let same_bits = result_one.mse.iter().zip(&result8.mse).all(|(a, b)| {
        a.mse_bl.to_bits() == b.mse_bl.to_bits()
            && a.mse_al_coeff.to_bits() == b.mse_al_coeff.to_bits()
            && a.mse_al_time.to_bits() == b.mse_al_time.to_bits()
    });
    DefaultSweep {
        points,
        single_worker,
        identical_across_workers: same_records && same_bits && result_one == result8,
    }
}

fn map_beats_ml(sweep: &DefaultSweep) -> Outcome {
    let cfg = SweepConfig {
        workers: 1,
        ..SweepConfig::default()
    };
    let res = aggregate(&sweep.points, &cfg).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for snr in default_grid() {
        let map = res.mse_row(snr, Method::Map).unwrap();
        let ml = res.mse_row(snr, Method::Ml).unwrap();
        let bl = map.mse_bl < ml.mse_bl;
        let al = map.mse_al_time < ml.mse_al_time;
        ok &= bl && al;
        lines.push(format!(
            "{snr} dB BL {:.3e}/{:.3e}{} AL {:.3e}/{:.3e}{}",
            map.mse_bl,
            ml.mse_bl,
            if bl { "" } else { "✗" },
            map.mse_al_time,
            ml.mse_al_time,
            if al { "" } else { "✗" }
        ));
    }

    // analytic ordering on random parameter draws
    let mut rng = RngStream::new(404, 0, Purpose::Test);
    let mut analytic_violations = 0;
    let draws = 10_000;
    for i in 0..draws {
        let raw = SystemParams {
            epsilon: 0.05 + 0.9 * rng.uniform(),
            v_g: 0.1 + 5.0 * rng.uniform(),
            v_h: 0.1 + 5.0 * rng.uniform(),
            q_order: rng.below(4),
            ..SystemParams::default()
        }
        .at_snr_db(-10.0 + 50.0 * rng.uniform());
        let p = raw.validate().unwrap();
        let model = LinkModel::new(&p, &Training::new(&p));
        let lam = draw_bem(&p, &mut RngStream::new(404, i, Purpose::Channel));
        let mse = analytic_mse_g(&model, &lam);
        if mse.map.is_nan() || mse.map >= mse.ml {
            analytic_violations += 1;
        }
    }
    ok &= analytic_violations == 0;
    Outcome {
        passed: ok,
        detail: format!(
            "MAP/ML: {}; analytic δ_MAP < δ_ML violated in {analytic_violations}/{draws} draws",
            lines.join("; ")
        ),
    }
}

fn ml_fragility(sweep: &DefaultSweep) -> Outcome {
    let mut low_trials = 0usize;
    let mut blowups = 0usize;
    let mut map_worst = 0.0f64;
    let mut bound = 0.0;
    for point in &sweep.points {
        let v_h = point.ctx.params.v_h();
        bound = 2.0 * v_h * point.ctx.params.n_coeffs() as f64;
        for rec in &point.records {
            map_worst = map_worst.max(rec.map.as_ref().unwrap().sq_err_al_time);
            if point.ctx.snr_db <= 10.0 {
                low_trials += 1;
                if rec.ml.as_ref().unwrap().sq_err_al_time > 1e3 * v_h {
                    blowups += 1;
                }
            }
        }
    }
    let needed = low_trials.div_ceil(2000);
    Outcome {
        passed: blowups >= needed && map_worst <= bound,
        detail: format!(
            "ML trials with AL squared error > 1e3·υ_h at ≤ 10 dB: {blowups} of {low_trials} (need ≥ {needed}, one per 2000); worst MAP per-trial AL MSE {map_worst:.4} (≤ {bound})"
        ),
    }
}

fn crb_consistency() -> Outcome {
    let p = SystemParams::default().at_snr_db(20.0).validate().unwrap();
    let tr = Training::new(&p);
    let model = LinkModel::new(&p, &tr);
    let basis = BemBasis::new(p.q_order(), p.n_s());
    let mut lam = vec![C64::new(0.0, 0.0); p.n_coeffs()];
    lam[p.q_order()] = C64::new(p.v_h().sqrt(), 0.0);
    let lambda = BemCoefficients::new(CVec::new(lam).unwrap()).unwrap();
    let g = C64::new(p.v_g().sqrt(), 0.0);
    let truth = ChannelRealization::from_parts(lambda.clone(), g, &basis);
    let trials = 10_000u64;
    let mut sq = 0.0;
    for t in 0..trials {
        let b = generate_data(&p, &mut RngStream::new(505, t, Purpose::Data));
        let block = TransmitBlock::new(b, tr.t_s.clone(), p.epsilon()).unwrap();
        let rx = simulate_uplink(
            &p,
            &truth,
            &block,
            &tr.t_r,
            &mut RngStream::new(505, t, Purpose::Noise),
        );
        let obs = project_with_basis(&rx.x_s, &basis, p.n_p()).unwrap();
        let g_hat = ml_g_given_lambda(&model, &obs, &rx.x_r, &lambda).unwrap();
        sq += (g_hat - g).norm_sqr();
    }
    let emp = sq / trials as f64;
    let theory = analytic_mse_g(&model, &lambda).ml;
    let rel = (emp - theory).abs() / theory;

    let mut rng = RngStream::new(506, 0, Purpose::Test);
    let mut violations = 0;
    for i in 0..10_000 {
        let raw = SystemParams {
            v_g: 0.1 + 5.0 * rng.uniform(),
            ..SystemParams::default()
        }
        .at_snr_db(-10.0 + 50.0 * rng.uniform());
        let q = raw.validate().unwrap();
        let m = LinkModel::new(&q, &Training::new(&q));
        let lam = draw_bem(&q, &mut RngStream::new(506, i, Purpose::Channel));
        let g = RngStream::new(506, i, Purpose::Data).complex_normal(q.v_g());
        let bound = cranest::estimator::crb(&m, g, &lam).unwrap().crb_g;
        let mse = analytic_mse_g(&m, &lam).map;
        if mse.is_nan() || mse >= bound {
            violations += 1;
        }
    }
    Outcome {
        passed: rel < 0.10 && violations == 0,
        detail: format!(
            "known-λ ML g-MSE {emp:.5e} vs closed form {theory:.5e} ({:.2}% apart, < 10%); δ_MAP < CRB_g violated in {violations}/10000 draws",
            100.0 * rel
        ),
    }
}

fn weight_optimality() -> Outcome {
    let mut ok = true;
    let mut worst_gap = f64::NEG_INFINITY;
    for snr in default_grid() {
        let ctx = TrialContext::at_snr(&SystemParams::default(), snr).unwrap();
        let ws = &ctx.weights;
        let best = aesnr_theoretical(&ctx.eta_star, ws).unwrap();
        let mut rng = RngStream::new(707, snr as u64, Purpose::Search);
        let top = ctx.eta_star.iter().copied().fold(0.0, f64::max);
        let mut champion = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let eta: Vec<f64> = if i % 2 == 0 {
                ctx.eta_star
                    .iter()
                    .map(|e| e * (1.0 + 0.3 * rng.standard_normal()))
                    .collect()
            } else {
                ctx.eta_star
                    .iter()
                    .map(|_| 2.0 * top * rng.uniform())
                    .collect()
            };
            champion = champion.max(aesnr_theoretical(&eta, ws).unwrap());
        }
        let neg = |eta: &[f64]| -aesnr_theoretical(eta, ws).unwrap();
        let nm = common::nelder_mead(neg, &vec![1.0; ctx.eta_star.len()], 0.5, 20_000);
        let simplex = aesnr_theoretical(&nm, ws).unwrap();
        let rival = champion.max(simplex);
        worst_gap = worst_gap.max(rival - best);
        ok &= best >= rival - 1e-6;
    }
    Outcome {
        passed: ok,
        detail: format!("largest γ̄(oracle) − γ̄(η*) over 0:5:30 dB = {worst_gap:.3e} (≤ 1e-6)"),
    }
}

fn aesnr_ordering() -> Outcome {
    let sweep = SweepConfig {
        trials_per_point: 10_000,
        methods: vec![Method::Map],
        ..SweepConfig::default()
    };
    let res = run_sweep(
        &sweep,
        &SystemParams {
            seed: 808,
            ..SystemParams::default()
        },
    )
    .unwrap();
    let mut ok = true;
    let mut gaps = Vec::new();
    for snr in default_grid() {
        let owa = res.aesnr_row(snr, Restorer::Owa).unwrap().aesnr_emp;
        let base = res.aesnr_row(snr, Restorer::Baseline).unwrap().aesnr_emp;
        ok &= owa >= base;
        gaps.push(format!("{snr}:{:+.3e}", owa - base));
    }
    let gap0 = res.aesnr_row(0.0, Restorer::Owa).unwrap().aesnr_emp
        - res.aesnr_row(0.0, Restorer::Baseline).unwrap().aesnr_emp;
    ok &= gap0 > 0.0;
    let spreads: Vec<f64> = default_grid()
        .iter()
        .map(|&s| {
            let ctx = TrialContext::at_snr(&SystemParams::default(), s).unwrap();
            ctx.eta_star
                .iter()
                .map(|e| (e - 1.0).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let trend = spreads.windows(2).all(|w| w[1] <= w[0]);
    ok &= trend;
    Outcome {
        passed: ok,
        detail: format!(
            "AESNR(η*) − AESNR(1) per dB: [{}]; max|η*−1|: [{}] non-increasing = {trend}",
            gaps.join(", "),
            spreads
                .iter()
                .map(|s| format!("{s:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn performance(sweep: &DefaultSweep) -> Outcome {
    Outcome {
        passed: sweep.single_worker < Duration::from_secs(300) && sweep.identical_across_workers,
        detail: format!(
            "7 × 2000 trials single-worker in {:.2} s (< 300 s); workers 1 vs 8 bit-identical = {}",
            sweep.single_worker.as_secs_f64(),
            sweep.identical_across_workers
        ),
    }
}

fn main() {
    let mut results = Vec::new();
    report(&mut results, 1, "projection identity", projection_identity);
    report(&mut results, 2, "noise whitening", noise_whitening);
    report(&mut results, 3, "MAP convergence", map_convergence);
    let sweep = default_sweep();
    report(&mut results, 4, "MAP beats ML", || map_beats_ml(&sweep));
    report(&mut results, 5, "ML fragility", || ml_fragility(&sweep));
    report(&mut results, 6, "CRB consistency", crb_consistency);
    report(&mut results, 7, "weight optimality", weight_optimality);
    report(&mut results, 8, "AESNR ordering", aesnr_ordering);
    report(&mut results, 9, "performance envelope", || {
        performance(&sweep)
    });
    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
