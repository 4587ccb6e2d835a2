//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cranest::numerics::C64;

/// r_q(m) = (1/K)·Σ_k e^{−j2πq(kN_p+m)/N_s}·x(kN_p+m), straight from the definition.
pub fn project_direct(x: &[C64], q: i64, n_p: usize) -> Vec<C64> {
    let n_s = x.len();
    let k = n_s / n_p;
    (0..n_p)
        .map(|m| {
            let mut acc = C64::new(0.0, 0.0);
            for kk in 0..k {
                let n = kk * n_p + m;
                let theta = -2.0 * std::f64::consts::PI * (q * n as i64) as f64 / n_s as f64;
                acc += C64::from_polar(1.0, theta) * x[n];
            }
            acc / k as f64
        })
        .collect()
}

/// Minimizes a unimodal `f` on [a, b].
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Grid scan followed by a golden-section refinement around the best cell.
pub fn global_min_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let step = (hi - lo) / cells as f64;
    let best = (0..=cells)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    golden_section(&f, (best - step).max(lo), (best + step).min(hi), 1e-14)
}

/// Nelder–Mead minimization from `start` with initial simplex spread `scale`.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], scale: f64, iters: usize) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += scale;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() < 1e-15 * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let refl = along(-1.0);
        let fr = f(&refl);
        if fr < vals[0] {
            let exp = along(-2.0);
            let fe = f(&exp);
            if fe < fr {
                simplex[n] = exp;
                vals[n] = fe;
            } else {
                simplex[n] = refl;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = refl;
            vals[n] = fr;
        } else {
            let con = if fr < vals[n] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f(&con);
            if fc < vals[n].min(fr) {
                simplex[n] = con;
                vals[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = best
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap();
    simplex[best].clone()
}
