//! MS transmit chain, RRH amplify-and-forward relay, and the BBU observations.

use crate::channel::{awgn, ChannelRealization};
use crate::config::ValidatedParams;
use crate::numerics::{check_len, dft_column, unit_phasor, CVec, NumericsError, RngStream, C64};

/// One MS transmit block.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBlock {
    /// MPSK data, E|b(n)|² = P_s.
    pub b: CVec,
    /// Periodic training, |t_s(n)|² = P_s.
    pub t_s: CVec,
    /// s(n) = sqrt(1−ε)·b(n) + sqrt(ε)·t_s(n).
    pub s: CVec,
}

impl TransmitBlock {
    pub fn new(b: CVec, t_s: CVec, epsilon: f64) -> Result<Self, NumericsError> {
        let s = superimpose(&b, &t_s, epsilon)?;
        Ok(TransmitBlock { b, t_s, s })
    }
}

/// Observations available at the BBU for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignals {
    /// Relayed data-phase observation, length N_s.
    pub x_s: CVec,
    /// Backhaul-training observation, length N_r.
    pub x_r: CVec,
}

/// Known training sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    /// Access training tiled to N_s.
    pub t_s: CVec,
    /// One period of the access training, length N_p.
    pub t_s_tilde: CVec,
    /// Backhaul training, length N_r.
    pub t_r: CVec,
}

impl Training {
    pub fn new(params: &ValidatedParams) -> Self {
        let (t_s, t_s_tilde) = generate_access_training(params);
        Training {
            t_s,
            t_s_tilde,
            t_r: generate_backhaul_training(params),
        }
    }
}

/// N_s i.i.d. uniform MPSK symbols of magnitude sqrt(P_s).
pub fn generate_data(params: &ValidatedParams, rng: &mut RngStream) -> CVec {
    let m = params.mpsk_order();
    // positive-rotation alphabet e^{j2πk/M}
    let amp = params.p_s().sqrt();
    let alphabet: Vec<C64> = (0..m).map(|k| unit_phasor(-(k as i64), m) * amp).collect();
    CVec::from_finite((0..params.n_s()).map(|_| alphabet[rng.below(m)]).collect())
}

/// sqrt(P_s)·(column 1 of the N_p-point DFT), tiled K times; also returns one period.
pub fn generate_access_training(params: &ValidatedParams) -> (CVec, CVec) {
    let period = dft_column(params.n_p(), 1 % params.n_p())
        .expect("column index < n_p")
        .scale(C64::new(params.p_s().sqrt(), 0.0));
    let tiled = period.iter().copied().cycle().take(params.n_s()).collect();
    (CVec::from_finite(tiled), period)
}

/// sqrt(P_r)·(column 2 of the N_r-point DFT).
pub fn generate_backhaul_training(params: &ValidatedParams) -> CVec {
    dft_column(params.n_r(), 2 % params.n_r())
        .expect("column index < n_r")
        .scale(C64::new(params.p_r().sqrt(), 0.0))
}

/// s(n) = sqrt(1−ε)·b(n) + sqrt(ε)·t_s(n).
pub fn superimpose(b: &CVec, t_s: &CVec, epsilon: f64) -> Result<CVec, NumericsError> {
    check_len(b.len(), t_s.len())?;
    let (wb, wt) = ((1.0 - epsilon).sqrt(), epsilon.sqrt());
    Ok(CVec::from_finite(
        b.iter()
            .zip(t_s.iter())
            .map(|(b, t)| b * wb + t * wt)
            .collect(),
    ))
}

/// Runs the uplink for one block:
/// x_s = α·g·diag(h)·s + α·g·w_R + w_Ds and x_r = g·t_r + w_Dr.
pub fn simulate_uplink(
    params: &ValidatedParams,
    realization: &ChannelRealization,
    block: &TransmitBlock,
    t_r: &CVec,
    rng: &mut RngStream,
) -> ReceivedSignals {
    simulate(params, realization, block, t_r, Some(rng))
}

/// Noise-free variant of [`simulate_uplink`] for exact-chain checks.
#[cfg(any(test, feature = "test-overrides"))]
pub fn simulate_uplink_noiseless(
    params: &ValidatedParams,
    realization: &ChannelRealization,
    block: &TransmitBlock,
    t_r: &CVec,
) -> ReceivedSignals {
    simulate(params, realization, block, t_r, None)
}

fn simulate(
    params: &ValidatedParams,
    realization: &ChannelRealization,
    block: &TransmitBlock,
    t_r: &CVec,
    rng: Option<&mut RngStream>,
) -> ReceivedSignals {
    let n_s = params.n_s();
    assert_eq!(block.s.len(), n_s, "block length");
    assert_eq!(realization.h.len(), n_s, "channel length");
    let ag = realization.g * params.alpha();
    let sigma2 = params.sigma_n2();

    let (w_r, w_ds, w_dr) = match rng {
        Some(rng) => (
            awgn(n_s, sigma2, rng).expect("validated sigma"),
            awgn(n_s, sigma2, rng).expect("validated sigma"),
            awgn(t_r.len(), sigma2, rng).expect("validated sigma"),
        ),
        None => (CVec::zeros(n_s), CVec::zeros(n_s), CVec::zeros(t_r.len())),
    };

    // x_R(n) = h(n)s(n) + w_R(n), then x_s = α g x_R + w_Ds
    let x_s = realization
        .h
        .iter()
        .zip(block.s.iter())
        .zip(w_r.iter().zip(w_ds.iter()))
        .map(|((h, s), (wr, wd))| ag * (h * s + wr) + wd)
        .collect();
    let x_r = t_r
        .iter()
        .zip(w_dr.iter())
        .map(|(t, w)| realization.g * t + w)
        .collect();
    ReceivedSignals {
        x_s: CVec::from_finite(x_s),
        x_r: CVec::from_finite(x_r),
    }
}
