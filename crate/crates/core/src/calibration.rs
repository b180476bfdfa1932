//! Timing probes for the cost model, and the JSON record they produce.
//!
//! Each probe runs BLB at one (n, B, R) several times on the calling
//! thread and keeps the median thread CPU time. The design is a fixed grid
//! plus randomised pairs B = ⌊b_scale·U(b_lo, b_hi)⌋, R = ⌊r_scale·U(r_lo, r_hi)⌋
//! that spread the nBR/nR ratio.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_blb, RunOptions};
use crate::experiments::tuning::BUDGET_GRID;
use crate::rng::{derive_seed, label_id, RngStream};
use crate::source::DataSource;
use crate::statistics::Statistic;
use crate::tuner::{fit_cost_model, predict_time, CostModel, TimingRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub n: usize,
    /// Fixed (B, R) probes.
    pub grid: Vec<(usize, usize)>,
    pub random_pairs: usize,
    pub b_scale: f64,
    pub b_range: (f64, f64),
    pub r_scale: f64,
    pub r_range: (f64, f64),
    pub repetitions: usize,
    pub seed: u64,
}

impl CalibrationConfig {
    /// 16 grid probes with B×R = δ·10³ plus 10 randomised ones, 20
    /// repetitions each. `r_scale` is 1 so the largest probes stay near a
    /// second on a desktop core; the full design uses 10.
    pub fn desk(n: usize, seed: u64) -> Self {
        Self {
            n,
            grid: BUDGET_GRID.to_vec(),
            random_pairs: 10,
            b_scale: 10.0,
            b_range: (2.0, 100.0),
            r_scale: 1.0,
            r_range: (1.0, 20.0),
            repetitions: 20,
            seed,
        }
    }

    pub fn full(n: usize, seed: u64) -> Self {
        Self { r_scale: 10.0, ..Self::desk(n, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.repetitions == 0 {
            return Err(Error::Config("calibration needs n >= 1 and repetitions >= 1".into()));
        }
        if self.grid.len() + self.random_pairs < 2 {
            return Err(Error::Config("calibration needs at least 2 probes".into()));
        }
        let range_ok = |(lo, hi): (f64, f64), scale: f64| lo.is_finite() && hi > lo && scale * lo >= 1.0;
        if !range_ok(self.b_range, self.b_scale) || !range_ok(self.r_range, self.r_scale) {
            return Err(Error::Config("random probe ranges must be increasing and yield counts >= 1".into()));
        }
        if self.grid.iter().any(|&(b, r)| b == 0 || r == 0) {
            return Err(Error::Config("grid probes need positive B and R".into()));
        }
        Ok(())
    }

    /// All probe (B, R) pairs: the grid, then the randomised ones.
    pub fn design(&self) -> Vec<(usize, usize)> {
        let mut rng = RngStream::new(derive_seed(&[self.seed, label_id("calibration-design")]), 0).rng();
        let mut pairs = self.grid.clone();
        for _ in 0..self.random_pairs {
            let b = (self.b_scale * rng.random_range(self.b_range.0..self.b_range.1)).floor() as usize;
            let r = (self.r_scale * rng.random_range(self.r_range.0..self.r_range.1)).floor() as usize;
            pairs.push((b.max(1), r.max(1)));
        }
        pairs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub cpu_seconds: f64,
    /// Observed minus fitted seconds.
    pub residual: f64,
}

/// A fitted cost model with the probes behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub beta1: f64,
    pub beta2: f64,
    pub r_squared: f64,
    pub host: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub probes: Vec<Probe>,
}

impl Calibration {
    pub fn model(&self) -> CostModel {
        CostModel { beta1: self.beta1, beta2: self.beta2, r_squared: self.r_squared }
    }

    /// Fits the model to existing timings and fills in residuals.
    pub fn from_records(records: &[TimingRecord]) -> Result<Self> {
        let model = fit_cost_model(records)?;
        let probes = records
            .iter()
            .map(|t| Probe {
                n: t.n,
                b: t.b,
                r: t.r,
                cpu_seconds: t.cpu_seconds,
                residual: t.cpu_seconds - predict_time(&model, t.n, t.b, t.r),
            })
            .collect();
        Ok(Self {
            beta1: model.beta1,
            beta2: model.beta2,
            r_squared: model.r_squared,
            host: hostname(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            probes,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("calibration serialises");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cal: Calibration =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        CostModel::new(cal.beta1, cal.beta2)?;
        Ok(cal)
    }
}

fn hostname() -> String {
    let mut buf = [0u8; 256];
    // SAFETY: buf is writable for its full length; gethostname NUL-terminates on success.
    let rc = unsafe { libc::gethostname(buf.as_mut_ptr().cast(), buf.len()) };
    if rc != 0 {
        return "unknown".into();
    }
    let end = buf.iter().position(|&b| b == 0).unwrap_or(buf.len());
    String::from_utf8_lossy(&buf[..end]).into_owned()
}

/// Times every probe of `config` on `source` and fits the cost model.
/// Runs strictly on the calling thread.
pub fn run_calibration(source: &DataSource, stat: &Statistic, config: &CalibrationConfig) -> Result<Calibration> {
    config.validate()?;
    if config.n > source.len() {
        return Err(Error::Config(format!("probe subset size {} exceeds N = {}", config.n, source.len())));
    }
    let mut records = Vec::new();
    for (p, (b, r)) in config.design().into_iter().enumerate() {
        let mut times = Vec::with_capacity(config.repetitions);
        for rep in 0..config.repetitions {
            let seed = derive_seed(&[config.seed, label_id("calibration-probe"), p as u64, rep as u64]);
            times.push(estimate_blb(source, stat, config.n, b, r, RunOptions::seeded(seed))?.cpu_seconds);
        }
        let cpu_seconds = crate::experiments::median(&times);
        records.push(TimingRecord { n: config.n, b, r, cpu_seconds });
    }
    Calibration::from_records(&records)
}
