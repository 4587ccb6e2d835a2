//! Complex vectors, DFT columns and reproducible complex-Gaussian sampling.

use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("column {col} out of range for a {n}-point DFT")]
    IndexOutOfRange { n: usize, col: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// Vector of finite complex samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CVec(Vec<C64>);

impl CVec {
    pub fn new(entries: Vec<C64>) -> Result<Self, NumericsError> {
        if let Some(i) = entries
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(NumericsError::NonFinite(i));
        }
        Ok(CVec(entries))
    }

    pub fn zeros(n: usize) -> Self {
        CVec(vec![C64::new(0.0, 0.0); n])
    }

    /// Wraps entries produced by finite arithmetic on finite inputs.
    pub(crate) fn from_finite(entries: Vec<C64>) -> Self {
        debug_assert!(entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        CVec(entries)
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    /// ‖x‖².
    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    /// xᴴy.
    pub fn inner(&self, other: &[C64]) -> C64 {
        inner(&self.0, other)
    }

    pub fn scale(&self, a: C64) -> CVec {
        CVec(self.0.iter().map(|z| z * a).collect())
    }

    pub fn hadamard(&self, other: &CVec) -> Result<CVec, NumericsError> {
        check_len(self.len(), other.len())?;
        Ok(CVec(
            self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect(),
        ))
    }

    pub fn add(&self, other: &CVec) -> Result<CVec, NumericsError> {
        check_len(self.len(), other.len())?;
        Ok(CVec(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

impl Deref for CVec {
    type Target = [C64];

    fn deref(&self) -> &[C64] {
        &self.0
    }
}

pub(crate) fn check_len(left: usize, right: usize) -> Result<(), NumericsError> {
    if left == right {
        Ok(())
    } else {
        Err(NumericsError::LengthMismatch { left, right })
    }
}

/// xᴴy over the common prefix.
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// e^{−j2πk/n}, exact on the four axis points.
pub fn unit_phasor(k: i64, n: usize) -> C64 {
    let n_i = n as i64;
    let k = k.rem_euclid(n_i);
    if (4 * k) % n_i == 0 {
        return match 4 * k / n_i {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, -1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, 1.0),
        };
    }
    let theta = -2.0 * PI * k as f64 / n as f64;
    C64::new(theta.cos(), theta.sin())
}

/// Column `col` of the n-point DFT matrix: entry m = e^{−j2πm·col/n}.
pub fn dft_column(n: usize, col: usize) -> Result<CVec, NumericsError> {
    if col >= n {
        return Err(NumericsError::IndexOutOfRange { n, col });
    }
    Ok(CVec(
        (0..n).map(|m| unit_phasor((m * col) as i64, n)).collect(),
    ))
}

/// What a random stream is used for. Distinct tags give independent streams
/// for the same trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Channel = 1,
    Data = 2,
    Noise = 3,
    Search = 4,
    Test = 15,
}

/// Deterministic random stream addressed by (seed, stream id, purpose).
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64, purpose: Purpose) -> Self {
        assert!(stream < 1 << 60, "stream id {stream} exceeds 60 bits");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((stream << 4) | purpose as u64);
        RngStream { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// One CN(0, variance) draw.
    pub fn complex_normal(&mut self, variance: f64) -> C64 {
        let s = (variance / 2.0).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        C64::new(s * re, s * im)
    }
}

/// n i.i.d. circularly-symmetric CN(0, variance) samples.
pub fn complex_gaussian(
    rng: &mut RngStream,
    n: usize,
    variance: f64,
) -> Result<CVec, NumericsError> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(NumericsError::NonPositiveVariance(variance));
    }
    Ok(CVec((0..n).map(|_| rng.complex_normal(variance)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_zero_column_is_ones() {
        let c = dft_column(4, 0).unwrap();
        assert!(c.iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn dft_alternating_column() {
        let c = dft_column(4, 2).unwrap();
        let expect = [1.0, -1.0, 1.0, -1.0];
        for (z, e) in c.iter().zip(expect) {
            assert_eq!(*z, C64::new(e, 0.0));
        }
    }

    #[test]
    fn dft_column_energy() {
        let c = dft_column(8, 1).unwrap();
        assert!((c.norm_sqr() - 8.0).abs() < 1e-12);
        assert!(c.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn dft_sign_convention() {
        let c = dft_column(8, 1).unwrap();
        let expect = C64::from_polar(1.0, -2.0 * PI / 8.0);
        assert!((c[1] - expect).norm() < 1e-15);
    }

    #[test]
    fn dft_column_out_of_range() {
        assert_eq!(
            dft_column(4, 4),
            Err(NumericsError::IndexOutOfRange { n: 4, col: 4 })
        );
    }

    #[test]
    fn cvec_rejects_non_finite() {
        let v = vec![C64::new(1.0, 0.0), C64::new(f64::NAN, 0.0)];
        assert_eq!(CVec::new(v), Err(NumericsError::NonFinite(1)));
    }

    #[test]
    fn gaussian_rejects_zero_variance() {
        let mut rng = RngStream::new(0, 0, Purpose::Test);
        assert!(complex_gaussian(&mut rng, 4, 0.0).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |stream, purpose| {
            let mut rng = RngStream::new(42, stream, purpose);
            complex_gaussian(&mut rng, 16, 1.0).unwrap()
        };
        assert_eq!(draw(3, Purpose::Noise), draw(3, Purpose::Noise));
        assert_ne!(draw(3, Purpose::Noise), draw(4, Purpose::Noise));
        assert_ne!(draw(3, Purpose::Noise), draw(3, Purpose::Data));
    }

    #[test]
    fn gaussian_moments() {
        let n = 1_000_000;
        let var = 2.5;
        let mut rng = RngStream::new(7, 0, Purpose::Test);
        let x = complex_gaussian(&mut rng, n, var).unwrap();
        let mean: C64 = x.iter().sum::<C64>() / n as f64;
        let power = x.norm_sqr() / n as f64;
        let re_power = x.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        assert!(mean.norm() < 5e-3 * var.sqrt(), "mean {mean}");
        assert!((power / var - 1.0).abs() < 0.01, "power {power}");
        assert!((re_power / (var / 2.0) - 1.0).abs() < 0.01);
    }
}
