//! Tuning study: BLB at a user-style (B, R) against the re-specified
//! (B*, R*) with the same predicted budget, on an on-disk correlation
//! dataset. MSE is the median squared error over M runs; time is the
//! median thread CPU time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_replications, median, monte_carlo_truth, Centering, Distribution, Generator, Scale, SeedPlan};
use crate::error::{Error, Result};
use crate::estimators::{estimate_blb, RunOptions};
use crate::report::{Tabular, Value};
use crate::rng::RngStream;
use crate::source::{build_record_index, Column, DataSource, DiskSource, TextFormat};
use crate::statistics::{central_moments, Statistic};
use crate::tuner::{improve_specification, CostModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    #[serde(rename = "M")]
    pub replications: usize,
    /// (B, R) specifications to improve.
    pub pairs: Vec<(usize, usize)>,
    pub rho: f64,
    /// Moment ratio for the optimiser; estimated from the data when absent.
    #[serde(default)]
    pub c: Option<f64>,
    pub truth_replications: usize,
    pub seed: u64,
}

/// B×R = δ·10³ for δ = 1..4, four (B, R) splits each.
pub const BUDGET_GRID: [(usize, usize); 16] = [
    (100, 10), (50, 20), (20, 50), (10, 100),
    (100, 20), (50, 40), (25, 80), (10, 200),
    (100, 30), (75, 40), (50, 60), (25, 120),
    (100, 40), (50, 80), (40, 100), (20, 200),
];

impl TuningConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            big_n: 50_000,
            n: 2000,
            replications: 50,
            pairs: vec![(10, 20), (50, 20), (10, 100), (50, 100)],
            rho: 0.5,
            c: None,
            truth_replications: 10_000,
            seed,
        }
    }

    pub fn full(seed: u64) -> Self {
        Self {
            big_n: 500_000,
            n: 5000,
            replications: 200,
            pairs: BUDGET_GRID.to_vec(),
            rho: 0.5,
            c: None,
            truth_replications: 5_000,
            seed,
        }
    }

    pub fn at_scale(scale: Scale, seed: u64) -> Self {
        match scale {
            Scale::Desk => Self::desk(seed),
            Scale::Full => Self::full(seed),
        }
    }

    pub fn generator(&self) -> Generator {
        Generator::new(Distribution::BivariateNormal { rho: self.rho })
    }

    pub fn validate(&self) -> Result<()> {
        check_replications(self.replications)?;
        self.generator().validate()?;
        if self.n == 0 || self.n > self.big_n {
            return Err(Error::Config(format!("subset size {} outside 1..={}", self.n, self.big_n)));
        }
        if self.pairs.is_empty() || self.pairs.iter().any(|&(b, r)| b == 0 || r == 0) {
            return Err(Error::Config("tuning needs nonempty, positive (B, R) pairs".into()));
        }
        if self.truth_replications < 2 {
            return Err(Error::Config("truth_replications must be at least 2".into()));
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("c must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn data_file_name(&self) -> String {
        format!("tuning-N{}-rho{}-seed{}.csv", self.big_n, self.rho, self.seed)
    }
}

/// Writes the study's bivariate-normal dataset under `dir`, indexes it and
/// opens it for disk sampling. The file is a function of the config alone.
pub fn prepare_tuning_data(config: &TuningConfig, dir: &Path) -> Result<DataSource> {
    config.validate()?;
    let path: PathBuf = dir.join(config.data_file_name());
    let plan = SeedPlan::new(config.seed, "tuning");
    let generator = config.generator();
    generator.write_csv(&path, config.big_n, RngStream::new(plan.data_seed(&generator.stream_tag()), 0))?;
    let format = TextFormat { columns: vec![Column::Ordinal(0), Column::Ordinal(1)], ..TextFormat::default() };
    let (index_path, _) = build_record_index(&path, &format, None)?;
    Ok(DataSource::Disk(DiskSource::open(&path, &index_path)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub b_star: usize,
    pub r_star: usize,
    pub c_max: f64,
    pub predicted_mse_ratio: f64,
    pub clamped: bool,
    pub mse_a: f64,
    pub mse_b: f64,
    pub time_a: f64,
    pub time_b: f64,
}

impl TuningRow {
    pub fn mse_ratio(&self) -> f64 {
        self.mse_b / self.mse_a
    }

    pub fn time_ratio(&self) -> f64 {
        self.time_b / self.time_a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub n: usize,
    pub c: f64,
    pub se_star2: f64,
    pub model: CostModel,
    pub rows: Vec<TuningRow>,
}

impl TuningReport {
    /// Mean of 1 − MSE_b/MSE_a over rows.
    pub fn mean_improvement(&self) -> f64 {
        self.rows.iter().map(|r| 1.0 - r.mse_ratio()).sum::<f64>() / self.rows.len() as f64
    }
}

/// The estimators run on the calling thread so that their CPU time is
/// what the cost model prices.
pub fn run_tuning_experiment(config: &TuningConfig, model: &CostModel, source: &DataSource) -> Result<TuningReport> {
    config.validate()?;
    if source.len() != config.big_n || !source.is_paired() {
        return Err(Error::Config(format!(
            "tuning expects {} paired records, source has {}{}",
            config.big_n,
            source.len(),
            if source.is_paired() { "" } else { " unpaired" }
        )));
    }
    let plan = SeedPlan::new(config.seed, "tuning");
    let generator = config.generator();
    let stat = Statistic::Correlation;
    let c = match config.c {
        Some(c) => c,
        None => central_moments(source.load_all()?.x())?.c()?,
    };
    let se_star2 = monte_carlo_truth(
        &stat,
        &generator,
        config.big_n,
        config.truth_replications,
        plan.truth_seed(&generator.stream_tag()),
        Centering::TrueParameter,
    )?;

    let mut rows = Vec::with_capacity(config.pairs.len());
    for &(b, r) in &config.pairs {
        let spec = improve_specification(model, c, config.n, b, r)?;
        let key_a = format!("a B={b} R={r}");
        let key_b = format!("b B={b} R={r}");
        let mut err_a = Vec::with_capacity(config.replications);
        let mut err_b = Vec::with_capacity(config.replications);
        let mut time_a = Vec::with_capacity(config.replications);
        let mut time_b = Vec::with_capacity(config.replications);
        let wrap = |key: &str, m: usize| {
            let cell = format!("tuning {key} replicate {m}");
            move |e: Error| Error::Cell { cell, source: Box::new(e) }
        };
        // Alternate the two specifications so drift in machine speed hits both.
        for m in 0..config.replications {
            let ea = estimate_blb(source, &stat, config.n, b, r, RunOptions::seeded(plan.estimator_seed(&key_a, m)))
                .map_err(wrap(&key_a, m))?;
            let eb = estimate_blb(
                source,
                &stat,
                config.n,
                spec.b_star,
                spec.r_star,
                RunOptions::seeded(plan.estimator_seed(&key_b, m)),
            )
            .map_err(wrap(&key_b, m))?;
            err_a.push((ea.se2 - se_star2).powi(2));
            err_b.push((eb.se2 - se_star2).powi(2));
            time_a.push(ea.cpu_seconds);
            time_b.push(eb.cpu_seconds);
        }
        rows.push(TuningRow {
            b,
            r,
            b_star: spec.b_star,
            r_star: spec.r_star,
            c_max: spec.c_max,
            predicted_mse_ratio: spec.predicted_mse_ratio.expect("set by improve_specification"),
            clamped: spec.clamped,
            mse_a: median(&err_a),
            mse_b: median(&err_b),
            time_a: median(&time_a),
            time_b: median(&time_b),
        });
    }
    Ok(TuningReport { n: config.n, c, se_star2, model: *model, rows })
}

impl Tabular for TuningReport {
    fn columns(&self) -> Vec<&'static str> {
        vec![
            "n", "B", "R", "B_star", "R_star", "c", "c_max", "predicted_mse_ratio", "log_mse_a", "log_mse_b",
            "mse_ratio", "time_a", "time_b", "time_ratio", "clamped",
        ]
    }

    fn rows(&self) -> Vec<Vec<Value>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    self.n.into(),
                    r.b.into(),
                    r.r.into(),
                    r.b_star.into(),
                    r.r_star.into(),
                    self.c.into(),
                    r.c_max.into(),
                    r.predicted_mse_ratio.into(),
                    r.mse_a.ln().into(),
                    r.mse_b.ln().into(),
                    r.mse_ratio().into(),
                    r.time_a.into(),
                    r.time_b.into(),
                    r.time_ratio().into(),
                    r.clamped.into(),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> TuningConfig {
        TuningConfig {
            big_n: 3000,
            n: 200,
            replications: 4,
            pairs: vec![(5, 4), (20, 2)],
            rho: 0.5,
            c: None,
            truth_replications: 50,
            seed,
        }
    }

    #[test]
    fn runs_on_disk_data_and_reports_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(1);
        let source = prepare_tuning_data(&cfg, dir.path()).unwrap();
        assert!(matches!(source, DataSource::Disk(_)));
        let model = CostModel::new(3e-8, 1e-6).unwrap();
        let rep = run_tuning_experiment(&cfg, &model, &source).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!((rep.c - 0.5).abs() < 0.1, "c = {}", rep.c);
        for row in &rep.rows {
            assert!(row.mse_ratio().is_finite() && row.mse_ratio() > 0.0);
            assert!(row.time_a > 0.0 && row.time_b > 0.0);
            assert!(row.predicted_mse_ratio < 1.0);
        }
    }

    #[test]
    fn data_file_is_reproducible() {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = small(2);
        prepare_tuning_data(&cfg, d1.path()).unwrap();
        prepare_tuning_data(&cfg, d2.path()).unwrap();
        let read = |d: &Path| std::fs::read(d.join(cfg.data_file_name())).unwrap();
        assert_eq!(read(d1.path()), read(d2.path()));
    }

    #[test]
    fn rejects_mismatched_source() {
        let cfg = small(3);
        let model = CostModel::new(3e-8, 1e-6).unwrap();
        let wrong = DataSource::Memory(crate::data::Dataset::scalar(vec![1.0, 2.0, 3.0]).unwrap());
        assert!(matches!(run_tuning_experiment(&cfg, &model, &wrong), Err(Error::Config(_))));
    }
}
