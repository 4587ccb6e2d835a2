//! Channel draws: CE-BEM access-link coefficients, backhaul gain and AWGN.

use std::io::Write;

use crate::config::ValidatedParams;
use crate::numerics::{complex_gaussian, unit_phasor, CVec, NumericsError, RngStream, C64};

/// BEM coefficients λ_q stored for q = −Q..Q.
#[derive(Debug, Clone, PartialEq)]
pub struct BemCoefficients {
    q_order: usize,
    lambda: CVec,
}

impl BemCoefficients {
    pub fn new(lambda: CVec) -> Result<Self, NumericsError> {
        if lambda.len().is_multiple_of(2) {
            return Err(NumericsError::LengthMismatch {
                left: lambda.len(),
                right: lambda.len() + 1,
            });
        }
        Ok(BemCoefficients {
            q_order: lambda.len() / 2,
            lambda,
        })
    }

    pub(crate) fn from_vec(lambda: Vec<C64>) -> Self {
        BemCoefficients::new(CVec::from_finite(lambda)).expect("odd coefficient count")
    }

    pub fn zeros(q_order: usize) -> Self {
        BemCoefficients {
            q_order,
            lambda: CVec::zeros(2 * q_order + 1),
        }
    }

    pub fn q_order(&self) -> usize {
        self.q_order
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// λ_q for q in −Q..=Q.
    pub fn get(&self, q: i64) -> C64 {
        self.lambda[(q + self.q_order as i64) as usize]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.lambda
    }

    /// ‖λ‖².
    pub fn energy(&self) -> f64 {
        self.lambda.norm_sqr()
    }
}

/// Precomputed phasors e^{j2πqn/N_s} for q = −Q..Q, n = 0..N_s−1.
#[derive(Debug, Clone)]
pub struct BemBasis {
    n_s: usize,
    q_order: usize,
    // row-major: index (q+Q)*n_s + n
    table: Vec<C64>,
}

impl BemBasis {
    pub fn new(q_order: usize, n_s: usize) -> Self {
        let mut table = Vec::with_capacity((2 * q_order + 1) * n_s);
        for q in -(q_order as i64)..=q_order as i64 {
            for n in 0..n_s as i64 {
                // e^{+j2πqn/N} = conj(e^{−j2πqn/N})
                table.push(unit_phasor(q * n, n_s).conj());
            }
        }
        BemBasis {
            n_s,
            q_order,
            table,
        }
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn q_order(&self) -> usize {
        self.q_order
    }

    /// Row of phasors for BEM index `q`.
    pub fn row(&self, q: i64) -> &[C64] {
        let i = (q + self.q_order as i64) as usize;
        &self.table[i * self.n_s..(i + 1) * self.n_s]
    }

    /// h(n) = Σ_q w_q·λ_q·e^{j2πqn/N_s} with per-index real weights.
    pub fn weighted_expand(&self, lambda: &BemCoefficients, weights: &[f64]) -> CVec {
        assert_eq!(lambda.q_order(), self.q_order, "BEM order mismatch");
        assert_eq!(weights.len(), lambda.len());
        let mut h = vec![C64::new(0.0, 0.0); self.n_s];
        for (idx, (&l, &w)) in lambda.as_slice().iter().zip(weights).enumerate() {
            let c = l * w;
            let row = &self.table[idx * self.n_s..(idx + 1) * self.n_s];
            for (hn, ph) in h.iter_mut().zip(row) {
                *hn += c * ph;
            }
        }
        CVec::from_finite(h)
    }

    pub fn expand(&self, lambda: &BemCoefficients) -> CVec {
        self.weighted_expand(lambda, &vec![1.0; lambda.len()])
    }
}

/// h(n) = Σ_q λ_q e^{j2πqn/N_s}, n = 0..N_s−1.
pub fn expand(lambda: &BemCoefficients, n_s: usize) -> CVec {
    BemBasis::new(lambda.q_order(), n_s).expand(lambda)
}

/// One channel draw: BEM coefficients, backhaul gain and the expanded AL samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub lambda: BemCoefficients,
    pub g: C64,
    pub h: CVec,
}

impl ChannelRealization {
    /// Builds a realization from given λ and g, expanding h.
    pub fn from_parts(lambda: BemCoefficients, g: C64, basis: &BemBasis) -> Self {
        let h = basis.expand(&lambda);
        ChannelRealization { lambda, g, h }
    }
}

/// λ_q ~ CN(0, υ_q), independent across q.
pub fn draw_bem(params: &ValidatedParams, rng: &mut RngStream) -> BemCoefficients {
    let lambda = params
        .v_q()
        .iter()
        .map(|&v| rng.complex_normal(v))
        .collect();
    BemCoefficients::from_vec(lambda)
}

/// g ~ CN(0, υ_g).
pub fn draw_backhaul(params: &ValidatedParams, rng: &mut RngStream) -> C64 {
    rng.complex_normal(params.v_g())
}

/// n i.i.d. CN(0, σ²) noise samples.
pub fn awgn(n: usize, sigma2: f64, rng: &mut RngStream) -> Result<CVec, NumericsError> {
    complex_gaussian(rng, n, sigma2)
}

/// Draws λ then g from `rng` and expands h over `basis`.
pub fn draw_realization(
    params: &ValidatedParams,
    basis: &BemBasis,
    rng: &mut RngStream,
) -> ChannelRealization {
    let lambda = draw_bem(params, rng);
    let g = draw_backhaul(params, rng);
    ChannelRealization::from_parts(lambda, g, basis)
}

/// Writes `trial,n,re_h,im_h,re_g,im_g` rows for debugging.
pub fn write_channel_dump<W: Write>(
    out: W,
    realizations: &[(usize, &ChannelRealization)],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "n", "re_h", "im_h", "re_g", "im_g"])?;
    for (trial, r) in realizations {
        for (n, h) in r.h.iter().enumerate() {
            w.write_record(&[
                trial.to_string(),
                n.to_string(),
                format!("{:.16e}", h.re),
                format!("{:.16e}", h.im),
                format!("{:.16e}", r.g.re),
                format!("{:.16e}", r.g.im),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
