//! System constants, their validation, and the flat `key = value` config format.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("n_s = {n_s} is not a multiple of n_p = {n_p}")]
    IntegerDivisibility { n_s: usize, n_p: usize },
    #[error("BEM half-order q_order = {q_order} too high for K = {k} (need 2Q < K)")]
    OrderTooHigh { q_order: usize, k: usize },
    #[error("power split epsilon = {0} must lie strictly inside (0, 1)")]
    PowerSplit(f64),
    #[error("BEM variances sum to {sum}, expected v_h = {v_h}")]
    VarianceMismatch { sum: f64, v_h: f64 },
    #[error("v_q_profile has {got} entries, expected 2Q+1 = {expected}")]
    ProfileLength { got: usize, expected: usize },
    #[error("field `{field}` must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: String,
    },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid value `{value}` for key `{key}`")]
    BadValue { key: String, value: String },
}

/// Shape of the BEM coefficient variance profile.
#[derive(Debug, Clone, PartialEq)]
pub enum VqProfile {
    /// υ_q = υ_h / (2Q+1).
    Uniform,
    /// υ_q ∝ 1/sqrt(1 − (q/(Q+1))²), renormalized to sum υ_h.
    Jakes,
    /// Explicit variances for q = −Q..Q.
    Explicit(Vec<f64>),
}

impl VqProfile {
    pub fn variances(&self, q_order: usize, v_h: f64) -> Vec<f64> {
        let len = 2 * q_order + 1;
        match self {
            VqProfile::Uniform => vec![v_h / len as f64; len],
            VqProfile::Jakes => {
                let raw: Vec<f64> = (-(q_order as i64)..=q_order as i64)
                    .map(|q| {
                        let x = q as f64 / (q_order as f64 + 1.0);
                        1.0 / (1.0 - x * x).sqrt()
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| v_h * w / total).collect()
            }
            VqProfile::Explicit(v) => v.clone(),
        }
    }
}

impl fmt::Display for VqProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VqProfile::Uniform => f.write_str("uniform"),
            VqProfile::Jakes => f.write_str("jakes"),
            VqProfile::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for VqProfile {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim() {
            "uniform" => Ok(VqProfile::Uniform),
            "jakes" => Ok(VqProfile::Jakes),
            list => list
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| ()))
                .collect::<Result<Vec<_>, _>>()
                .map(VqProfile::Explicit),
        }
    }
}

/// Raw system constants as read from a config file or built in code.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Block length N_s in symbols.
    pub n_s: usize,
    /// Training period N_p.
    pub n_p: usize,
    /// Backhaul training length N_r.
    pub n_r: usize,
    /// BEM half-order Q.
    pub q_order: usize,
    /// Fraction of MS power spent on training.
    pub epsilon: f64,
    pub p_s: f64,
    pub p_r: f64,
    pub sigma_n2: f64,
    /// Access-link channel variance υ_h.
    pub v_h: f64,
    /// Backhaul channel variance υ_g.
    pub v_g: f64,
    pub v_q_profile: VqProfile,
    pub mpsk_order: usize,
    /// Number of MAP coordinate sweeps.
    pub i_times: usize,
    pub seed: u64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            n_s: 800,
            n_p: 8,
            n_r: 4,
            q_order: 2,
            epsilon: 0.3,
            p_s: 10.0,
            p_r: 10.0,
            sigma_n2: 1.0,
            v_h: 1.0,
            v_g: 1.0,
            v_q_profile: VqProfile::Uniform,
            mpsk_order: 2,
            i_times: 10,
            seed: 1,
        }
    }
}

pub const KEYS: &[&str] = &[
    "n_s",
    "n_p",
    "n_r",
    "q_order",
    "epsilon",
    "p_s",
    "p_r",
    "sigma_n2",
    "v_h",
    "v_g",
    "v_q_profile",
    "mpsk_order",
    "i_times",
    "seed",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl SystemParams {
    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "n_s" => self.n_s = parse_value(key, value)?,
            "n_p" => self.n_p = parse_value(key, value)?,
            "n_r" => self.n_r = parse_value(key, value)?,
            "q_order" => self.q_order = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "p_s" => self.p_s = parse_value(key, value)?,
            "p_r" => self.p_r = parse_value(key, value)?,
            "sigma_n2" => self.sigma_n2 = parse_value(key, value)?,
            "v_h" => self.v_h = parse_value(key, value)?,
            "v_g" => self.v_g = parse_value(key, value)?,
            "v_q_profile" => {
                self.v_q_profile = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: value.to_string(),
                })?
            }
            "mpsk_order" => self.mpsk_order = parse_value(key, value)?,
            "i_times" => self.i_times = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            self.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => {
                    ConfigError::UnknownKey { line: line_no, key }
                }
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_config_text(text: &str) -> Result<Self, ConfigError> {
        let mut p = SystemParams::default();
        p.apply_config_text(text)?;
        Ok(p)
    }

    /// Serializes every field as `key = value` lines.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("n_s", self.n_s.to_string());
        line("n_p", self.n_p.to_string());
        line("n_r", self.n_r.to_string());
        line("q_order", self.q_order.to_string());
        line("epsilon", format!("{:e}", self.epsilon));
        line("p_s", format!("{:e}", self.p_s));
        line("p_r", format!("{:e}", self.p_r));
        line("sigma_n2", format!("{:e}", self.sigma_n2));
        line("v_h", format!("{:e}", self.v_h));
        line("v_g", format!("{:e}", self.v_g));
        line("v_q_profile", self.v_q_profile.to_string());
        line("mpsk_order", self.mpsk_order.to_string());
        line("i_times", self.i_times.to_string());
        line("seed", self.seed.to_string());
        out
    }

    /// Same parameters with P_s = P_r = 10^(snr_db/10) and σ_n² = 1.
    pub fn at_snr_db(&self, snr_db: f64) -> SystemParams {
        let p = 10f64.powf(snr_db / 10.0);
        SystemParams {
            p_s: p,
            p_r: p,
            sigma_n2: 1.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<ValidatedParams, ConfigError> {
        ValidatedParams::new(self.clone())
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            requirement: "a positive finite real",
            value: value.to_string(),
        })
    }
}

fn at_least(field: &'static str, value: usize, min: usize) -> Result<(), ConfigError> {
    if value >= min {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            requirement: if min == 1 { "at least 1" } else { "at least 2" },
            value: value.to_string(),
        })
    }
}

/// Parameters that passed validation, with derived constants attached.
///
/// Immutable once built; share freely across trial workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedParams {
    raw: SystemParams,
    k: usize,
    alpha: f64,
    v_q: Vec<f64>,
    v_n: f64,
}

impl ValidatedParams {
    fn new(raw: SystemParams) -> Result<Self, ConfigError> {
        at_least("n_s", raw.n_s, 1)?;
        at_least("n_p", raw.n_p, 1)?;
        at_least("n_r", raw.n_r, 1)?;
        at_least("mpsk_order", raw.mpsk_order, 2)?;
        at_least("i_times", raw.i_times, 1)?;
        positive("p_s", raw.p_s)?;
        positive("p_r", raw.p_r)?;
        positive("sigma_n2", raw.sigma_n2)?;
        positive("v_h", raw.v_h)?;
        positive("v_g", raw.v_g)?;

        if !raw.n_s.is_multiple_of(raw.n_p) {
            return Err(ConfigError::IntegerDivisibility {
                n_s: raw.n_s,
                n_p: raw.n_p,
            });
        }
        let k = raw.n_s / raw.n_p;
        if 2 * raw.q_order >= k {
            return Err(ConfigError::OrderTooHigh {
                q_order: raw.q_order,
                k,
            });
        }
        if !(raw.epsilon > 0.0 && raw.epsilon < 1.0) {
            return Err(ConfigError::PowerSplit(raw.epsilon));
        }

        let v_q = raw.v_q_profile.variances(raw.q_order, raw.v_h);
        if v_q.len() != 2 * raw.q_order + 1 {
            return Err(ConfigError::ProfileLength {
                got: v_q.len(),
                expected: 2 * raw.q_order + 1,
            });
        }
        for &v in &v_q {
            positive("v_q_profile", v)?;
        }
        let sum: f64 = v_q.iter().sum();
        if (sum - raw.v_h).abs() > 1e-12 * raw.v_h {
            return Err(ConfigError::VarianceMismatch { sum, v_h: raw.v_h });
        }

        let alpha = (raw.p_r / (raw.v_h * raw.p_s + raw.sigma_n2)).sqrt();
        let v_n = noise_variance(alpha, &raw, k);
        Ok(ValidatedParams {
            raw,
            k,
            alpha,
            v_q,
            v_n,
        })
    }

    pub fn raw(&self) -> &SystemParams {
        &self.raw
    }

    pub fn validate(&self) -> Result<ValidatedParams, ConfigError> {
        ValidatedParams::new(self.raw.clone())
    }

    /// Number of training periods per block, N_s / N_p.
    pub fn k(&self) -> usize {
        self.k
    }

    /// RRH amplification factor.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// BEM coefficient variances for q = −Q..Q.
    pub fn v_q(&self) -> &[f64] {
        &self.v_q
    }

    /// Per-entry variance of the projected interference-plus-noise w_q.
    pub fn v_n(&self) -> f64 {
        self.v_n
    }

    pub fn n_s(&self) -> usize {
        self.raw.n_s
    }
    pub fn n_p(&self) -> usize {
        self.raw.n_p
    }
    pub fn n_r(&self) -> usize {
        self.raw.n_r
    }
    pub fn q_order(&self) -> usize {
        self.raw.q_order
    }
    /// 2Q + 1.
    pub fn n_coeffs(&self) -> usize {
        2 * self.raw.q_order + 1
    }
    pub fn epsilon(&self) -> f64 {
        self.raw.epsilon
    }
    pub fn p_s(&self) -> f64 {
        self.raw.p_s
    }
    pub fn p_r(&self) -> f64 {
        self.raw.p_r
    }
    pub fn sigma_n2(&self) -> f64 {
        self.raw.sigma_n2
    }
    pub fn v_h(&self) -> f64 {
        self.raw.v_h
    }
    pub fn v_g(&self) -> f64 {
        self.raw.v_g
    }
    pub fn mpsk_order(&self) -> usize {
        self.raw.mpsk_order
    }
    pub fn i_times(&self) -> usize {
        self.raw.i_times
    }
    pub fn seed(&self) -> u64 {
        self.raw.seed
    }
}

fn noise_variance(alpha: f64, p: &SystemParams, k: usize) -> f64 {
    let a2 = alpha * alpha;
    (a2 * p.v_g * p.v_h * (1.0 - p.epsilon) * p.p_s + (a2 * p.v_g + 1.0) * p.sigma_n2) / k as f64
}

/// υ_n = (α²υ_gυ_h(1−ε)P_s + (α²υ_g + 1)σ_n²) / K.
pub fn noise_variance_vn(params: &ValidatedParams) -> f64 {
    noise_variance(params.alpha, &params.raw, params.k)
}
