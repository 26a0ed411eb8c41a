//! Calibration sessions: one adjustable parameter, an append-only history
//! and an optional accepted value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use fovnoise::params::{CalibrationTable, F_E_RANGE, S_K_RANGE};
use fovnoise::{EnhanceConfig, ViewingSetup};
use serde::{Deserialize, Serialize};

/// Bandwidth range; the ends of the grid participants adjusted `s_k` on.
pub const S_F_RANGE: (f64, f64) = (1.0, 6.81);
pub const BLUR_RATE_RANGE: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "f_e")]
    FE,
    #[serde(rename = "s_k")]
    SK,
    #[serde(rename = "s_f")]
    SF,
    #[serde(rename = "blur_rate")]
    BlurRate,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::FE, Mode::SK, Mode::SF, Mode::BlurRate];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FE => "f_e",
            Mode::SK => "s_k",
            Mode::SF => "s_f",
            Mode::BlurRate => "blur_rate",
        }
    }

    pub fn range(self) -> (f64, f64) {
        match self {
            Mode::FE => F_E_RANGE,
            Mode::SK => S_K_RANGE,
            Mode::SF => S_F_RANGE,
            Mode::BlurRate => BLUR_RATE_RANGE,
        }
    }

    pub fn clamp(self, v: f64) -> f64 {
        let (lo, hi) = self.range();
        v.clamp(lo, hi)
    }

    pub fn get(self, cfg: &EnhanceConfig) -> f64 {
        match self {
            Mode::FE => cfg.f_e,
            Mode::SK => cfg.s_k,
            Mode::SF => cfg.s_f,
            Mode::BlurRate => cfg.blur_rate,
        }
    }

    pub fn set(self, cfg: &mut EnhanceConfig, v: f64) {
        match self {
            Mode::FE => cfg.f_e = v,
            Mode::SK => cfg.s_k = v,
            Mode::SF => cfg.s_f = v,
            Mode::BlurRate => cfg.blur_rate = v,
        }
    }

    /// Whether the test image carries noise. The `f_e` stage calibrates
    /// contrast enhancement on its own.
    pub fn uses_noise(self) -> bool {
        self != Mode::FE
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// Starting configuration: the calibrated row nearest `blur_rate`, with
/// the requested blur rate itself.
pub fn initial_config(blur_rate: f64, seed: u64) -> EnhanceConfig {
    let row = CalibrationTable::default().nearest(blur_rate);
    EnhanceConfig {
        blur_rate,
        f_e: row.f_e,
        s_k: row.s_k,
        s_f: row.s_f,
        seed,
        ..EnhanceConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEvent {
    /// Milliseconds since the Unix epoch.
    pub t_ms: u64,
    pub parameter: Mode,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Adjustment {
    Delta { delta: f64 },
    Absolute { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionError {
    Closed,
    NotFinite,
}

impl fmt::Display for SessionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionError::Closed => f.write_str("session already accepted"),
            SessionError::NotFinite => f.write_str("parameter value must be finite"),
        }
    }
}

impl std::error::Error for SessionError {}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    pub id: String,
    pub stimulus: String,
    pub setup: ViewingSetup,
    pub mode: Mode,
    /// Blur rate the session was opened with; the export groups by it.
    pub blur_rate: f64,
    pub initial: EnhanceConfig,
    pub config: EnhanceConfig,
    pub history: Vec<HistoryEvent>,
    pub accepted: Option<f64>,
}

impl Session {
    pub fn new(id: String, stimulus: String, setup: ViewingSetup, mode: Mode, blur_rate: f64, seed: u64) -> Self {
        let mut config = initial_config(blur_rate, seed);
        let start = mode.clamp(mode.get(&config));
        mode.set(&mut config, start);
        Self {
            id,
            stimulus,
            setup,
            mode,
            blur_rate,
            initial: config,
            config,
            history: Vec::new(),
            accepted: None,
        }
    }

    pub fn value(&self) -> f64 {
        self.mode.get(&self.config)
    }

    pub fn is_open(&self) -> bool {
        self.accepted.is_none()
    }

    pub fn adjust(&mut self, adj: Adjustment, t_ms: u64) -> Result<f64, SessionError> {
        if !self.is_open() {
            return Err(SessionError::Closed);
        }
        let target = match adj {
            Adjustment::Delta { delta } => self.value() + delta,
            Adjustment::Absolute { value } => value,
        };
        if !target.is_finite() {
            return Err(SessionError::NotFinite);
        }
        let v = self.mode.clamp(target);
        self.mode.set(&mut self.config, v);
        self.history.push(HistoryEvent {
            t_ms,
            parameter: self.mode,
            value: v,
        });
        Ok(v)
    }

    pub fn accept(&mut self) -> Result<f64, SessionError> {
        if !self.is_open() {
            return Err(SessionError::Closed);
        }
        let v = self.value();
        self.accepted = Some(v);
        Ok(v)
    }

    /// Configurations in force after creation and after each event.
    pub fn replay(&self) -> Vec<EnhanceConfig> {
        let mut cfg = self.initial;
        let mut out = vec![cfg];
        for ev in &self.history {
            ev.parameter.set(&mut cfg, ev.value);
            out.push(cfg);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportCell {
    pub stimulus: String,
    pub blur_rate: f64,
    pub mode: Mode,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; `None` for a single value.
    pub sem: Option<f64>,
    pub values: Vec<f64>,
}

/// Accepted values grouped by (stimulus, blur rate, mode).
pub fn export<'a>(sessions: impl IntoIterator<Item = &'a Session>) -> Vec<ExportCell> {
    let mut groups: BTreeMap<(String, u64, Mode), (f64, Vec<f64>)> = BTreeMap::new();
    for s in sessions {
        if let Some(v) = s.accepted {
            // Ordered by the bit pattern, which sorts non-negative floats.
            let key = (s.stimulus.clone(), s.blur_rate.to_bits(), s.mode);
            groups.entry(key).or_insert_with(|| (s.blur_rate, Vec::new())).1.push(v);
        }
    }
    groups
        .into_iter()
        .map(|((stimulus, _, mode), (blur_rate, values))| {
            let (mean, sem) = mean_sem(&values);
            ExportCell {
                stimulus,
                blur_rate,
                mode,
                n: values.len(),
                mean,
                sem,
                values,
            }
        })
        .collect()
}

pub fn mean_sem(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}
