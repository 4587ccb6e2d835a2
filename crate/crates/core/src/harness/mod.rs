//! Monte Carlo driver: per-trial simulation, SNR sweeps, CSV artifacts and the
//! property report behind the `verify` subcommand.

mod output;
mod sweep;
mod verify;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::config::ConfigError;
use crate::estimator::EstimatorError;
use crate::numerics::NumericsError;
use crate::restoration::RestorationError;

pub use output::{emit_csv, read_csv, write_aesnr_csv, write_mse_csv, AESNR_FILE, MSE_FILE};
pub use sweep::{
    aggregate, run_point, run_sweep, run_sweep_records, run_trial, MethodOutcome, PointRecords,
    TrialContext, TrialRecord,
};
pub use verify::{verify, Check, VerifyOptions, VerifyReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Restoration(#[from] RestorationError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("malformed CSV: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Map,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Restorer {
    /// Restoration with the AESNR-optimal weights η*.
    Owa,
    /// Plain re-expansion, η = 1.
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Map => "map",
            Method::Ml => "ml",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "map" => Ok(Method::Map),
            "ml" => Ok(Method::Ml),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

impl fmt::Display for Restorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Restorer::Owa => "owa",
            Restorer::Baseline => "baseline",
        })
    }
}

impl FromStr for Restorer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "owa" => Ok(Restorer::Owa),
            "baseline" => Ok(Restorer::Baseline),
            other => Err(format!("unknown restorer `{other}`")),
        }
    }
}

/// What to run and where to put it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub snr_points_db: Vec<f64>,
    pub trials_per_point: usize,
    pub methods: Vec<Method>,
    pub restorers: Vec<Restorer>,
    pub output_path: String,
    pub workers: usize,
}

impl Default for SweepConfig {
    /// 0:5:30 dB, 2000 trials per point, everything enabled.
    fn default() -> Self {
        SweepConfig {
            snr_points_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            trials_per_point: 2000,
            methods: vec![Method::Map, Method::Ml],
            restorers: vec![Restorer::Owa, Restorer::Baseline],
            output_path: "out".into(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl SweepConfig {
    pub fn check(&self) -> Result<(), HarnessError> {
        let fail = |msg: &str| Err(HarnessError::InvalidSweep(msg.into()));
        if self.snr_points_db.is_empty() {
            return fail("no SNR points");
        }
        if self.snr_points_db.iter().any(|s| !s.is_finite()) {
            return fail("SNR points must be finite");
        }
        if self.methods.is_empty() {
            return fail("no estimation methods");
        }
        if self.trials_per_point == 0 {
            return fail("trials per point must be positive");
        }
        if self.workers == 0 {
            return fail("workers must be positive");
        }
        Ok(())
    }

    pub(crate) fn runs(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }
}

/// Parses `0,10,20` or an inclusive range `start:step:stop`.
pub fn parse_snr_points(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad SNR value `{}`", s.trim()))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(format!("empty SNR range `{text}`"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + step * i as f64).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(format!("bad SNR specification `{text}`")),
    }
}

/// Row of the MSE table.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub snr_db: f64,
    pub method: Method,
    /// E|ĝ − g|².
    pub mse_bl: f64,
    /// mean_q E|λ̂_q − λ_q|².
    pub mse_al_coeff: f64,
    /// (1/N_s)·Σ_n E|ĥ(n) − h(n)|².
    pub mse_al_time: f64,
    pub ml_singular_count: usize,
}

/// Row of the AESNR table.
#[derive(Debug, Clone, PartialEq)]
pub struct AesnrRow {
    pub snr_db: f64,
    pub restorer: Restorer,
    pub aesnr_emp: f64,
    pub aesnr_theory: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub mse: Vec<MseRow>,
    pub aesnr: Vec<AesnrRow>,
}

impl SweepResult {
    pub fn mse_row(&self, snr_db: f64, method: Method) -> Option<&MseRow> {
        self.mse
            .iter()
            .find(|r| r.snr_db == snr_db && r.method == method)
    }

    pub fn aesnr_row(&self, snr_db: f64, restorer: Restorer) -> Option<&AesnrRow> {
        self.aesnr
            .iter()
            .find(|r| r.snr_db == snr_db && r.restorer == restorer)
    }
}
