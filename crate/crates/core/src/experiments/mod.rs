//! Simulation studies: γ (consistency of ŜE² for a correlation), κ
//! (theoretical over empirical MSE for the mean) and the tuning study
//! (fixed-budget BLB before and after re-specification).
//!
//! Every experiment is a pure function of its config. Replicate `m` of
//! every cell reads dataset `m`, drawn once from the data stream, and runs
//! its estimator with a seed hashed from (experiment, cell, m).

pub mod gamma;
pub mod kappa;
pub mod tuning;

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution as _, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, Execution, Hyperparams, Method, RunOptions};
use crate::rng::{derive_seed, label_id, RngStream};
use crate::source::DataSource;
use crate::statistics::{MomentSummary, Statistic, Weights};

pub use gamma::{run_gamma_experiment, GammaConfig, GammaGroup, GammaReport, GammaRow};
pub use kappa::{run_kappa_experiment, KappaConfig, KappaReference, KappaReport, KappaRow};
pub use tuning::{prepare_tuning_data, run_tuning_experiment, TuningConfig, TuningReport, TuningRow};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    /// Standard normal.
    Normal,
    /// Exp(1) − 1.
    CenteredExponential,
    /// Standard bivariate normal with correlation `rho`.
    BivariateNormal { rho: f64 },
    PointMass { value: f64 },
}

/// A distribution, with every value multiplied by `scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(flatten)]
    pub distribution: Distribution,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Generator {
    pub fn new(distribution: Distribution) -> Self {
        Self { distribution, scale: 1.0 }
    }

    pub fn scaled(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    /// Name of the distribution, ignoring scale. Seeds are keyed on this,
    /// so a rescaled generator replays the same draws.
    pub fn stream_tag(&self) -> String {
        match self.distribution {
            Distribution::Normal => "normal".to_string(),
            Distribution::CenteredExponential => "exp".to_string(),
            Distribution::BivariateNormal { rho } => format!("binormal(rho={rho})"),
            Distribution::PointMass { value } => format!("point({value})"),
        }
    }

    pub fn label(&self) -> String {
        if self.scale == 1.0 {
            self.stream_tag()
        } else {
            format!("{}*{}", self.stream_tag(), self.scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale != 0.0) {
            return Err(Error::Config(format!("generator scale must be finite and nonzero, got {}", self.scale)));
        }
        match self.distribution {
            Distribution::BivariateNormal { rho } if !(rho > -1.0 && rho < 1.0) => {
                Err(Error::Config(format!("rho must lie in (-1, 1), got {rho}")))
            }
            Distribution::PointMass { value } if !value.is_finite() => {
                Err(Error::Config("point mass must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn is_paired(&self) -> bool {
        matches!(self.distribution, Distribution::BivariateNormal { .. })
    }

    /// `big_n` draws from `stream`.
    pub fn generate(&self, big_n: usize, stream: RngStream) -> Result<Dataset> {
        self.validate()?;
        let mut rng = stream.rng();
        let k = self.scale;
        match self.distribution {
            Distribution::Normal => {
                Dataset::scalar(
                (0..big_n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        k * z
                    })
                    .collect(),
            )
            }
            Distribution::CenteredExponential => Dataset::scalar(
                (0..big_n)
                    .map(|_| {
                        let e: f64 = Exp1.sample(&mut rng);
                        k * (e - 1.0)
                    })
                    .collect(),
            ),
            Distribution::BivariateNormal { rho } => {
                let tail = (1.0 - rho * rho).sqrt();
                let mut x = Vec::with_capacity(big_n);
                let mut y = Vec::with_capacity(big_n);
                for _ in 0..big_n {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    x.push(k * z1);
                    y.push(k * (rho * z1 + tail * z2));
                }
                Dataset::paired(x, y)
            }
            Distribution::PointMass { value } => Dataset::scalar(vec![k * value; big_n]),
        }
    }

    /// Population mean, σ² and σ₄ of the x column.
    pub fn x_moments(&self) -> MomentSummary {
        let base = match self.distribution {
            Distribution::Normal | Distribution::BivariateNormal { .. } => MomentSummary::population(0.0, 1.0, 3.0),
            Distribution::CenteredExponential => MomentSummary::population(0.0, 1.0, 9.0),
            Distribution::PointMass { value } => MomentSummary::population(value, 0.0, 0.0),
        };
        base.scaled(self.scale)
    }

    /// The population value of `stat`, where it is known in closed form.
    pub fn true_parameter(&self, stat: &Statistic) -> Option<f64> {
        let mean = self.x_moments().mean;
        match (stat, self.distribution) {
            (Statistic::Mean, _) => Some(mean),
            (Statistic::SmoothOfMean(f), _) => Some((f.g)(mean)),
            // Scaling both columns by the same factor leaves the correlation unchanged.
            (Statistic::Correlation, Distribution::BivariateNormal { rho }) => Some(rho),
            (Statistic::Correlation, _) => None,
        }
    }

    /// Writes `big_n` rows as delimited text (one or two columns).
    pub fn write_csv(&self, path: &Path, big_n: usize, stream: RngStream) -> Result<()> {
        let data = self.generate(big_n, stream)?;
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        match data.y() {
            Some(y) => {
                for (a, b) in data.x().iter().zip(y) {
                    writeln!(w, "{a},{b}").map_err(io)?;
                }
            }
            None => {
                for a in data.x() {
                    writeln!(w, "{a}").map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Where a Monte Carlo SE*² is centred.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// The generator's known parameter value.
    #[default]
    TrueParameter,
    /// The average of the replicate statistics.
    ReplicateMean,
}

/// SE*² = M⁻¹ Σ (θ̂⁽ᵐ⁾ − centre)² over `replications` fresh datasets of size
/// `big_n`; dataset m is drawn from `RngStream::new(seed, m)`.
pub fn monte_carlo_truth(
    stat: &Statistic,
    generator: &Generator,
    big_n: usize,
    replications: usize,
    seed: u64,
    centering: Centering,
) -> Result<f64> {
    if replications < 2 {
        return Err(Error::invalid(format!("need at least 2 replications, got {replications}")));
    }
    if big_n == 0 {
        return Err(Error::invalid("N must be positive"));
    }
    let values = (0..replications)
        .into_par_iter()
        .map(|m| {
            let data = generator.generate(big_n, RngStream::new(seed, m as u64))?;
            stat.evaluate(&data, Weights::Unit)
        })
        .collect::<Result<Vec<f64>>>()?;
    squared_spread(&values, centering, || {
        generator
            .true_parameter(stat)
            .ok_or_else(|| Error::UnsupportedStatistic(format!("{} has no known value under {generator}", stat.name())))
    })
}

fn squared_spread(values: &[f64], centering: Centering, truth: impl FnOnce() -> Result<f64>) -> Result<f64> {
    let m = values.len() as f64;
    let centre = match centering {
        Centering::TrueParameter => truth()?,
        Centering::ReplicateMean => values.iter().sum::<f64>() / m,
    };
    Ok(values.iter().map(|v| (v - centre) * (v - centre)).sum::<f64>() / m)
}

/// `⌊N^a⌋`, robust to `powf` landing just below an integer.
pub fn floor_power(big_n: usize, a: f64) -> usize {
    ((big_n as f64).powf(a) + 1e-9).floor() as usize
}

/// Desk runs finish in minutes; full runs use N = 10⁵ and larger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::invalid(format!("unknown scale {other:?} (desk|full)"))),
        }
    }
}

/// One estimator configuration inside an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    #[serde(flatten)]
    pub hyperparams: Hyperparams,
}

impl Cell {
    pub fn new(method: Method, n: usize, b: usize, r: usize) -> Self {
        Self { method, hyperparams: Hyperparams::new(n, b, r).effective(method) }
    }

    pub fn key(&self) -> String {
        let h = self.hyperparams;
        let mut s = self.method.as_str().to_string();
        let (un, ub, ur) = self.method.uses();
        if un {
            s += &format!(" n={}", h.n);
        }
        if ub {
            s += &format!(" B={}", h.b);
        }
        if ur {
            s += &format!(" R={}", h.r);
        }
        s
    }
}

/// Seeds for one experiment run. Streams never overlap between roles:
/// data, truth and each (cell, m) get their own hashed seed.
#[derive(Clone, Copy, Debug)]
pub struct SeedPlan {
    master: u64,
    experiment: u64,
}

impl SeedPlan {
    pub fn new(master: u64, experiment: &str) -> Self {
        Self { master, experiment: label_id(experiment) }
    }

    /// Seed whose stream m yields dataset m for generator `tag`.
    pub fn data_seed(&self, tag: &str) -> u64 {
        derive_seed(&[self.master, self.experiment, label_id("data"), label_id(tag)])
    }

    pub fn truth_seed(&self, tag: &str) -> u64 {
        derive_seed(&[self.master, self.experiment, label_id("truth"), label_id(tag)])
    }

    pub fn estimator_seed(&self, cell: &str, m: usize) -> u64 {
        derive_seed(&[self.master, self.experiment, label_id(cell), m as u64])
    }
}

/// Per-cell ŜE² over all replicates, plus the full-sample statistic of
/// each replicate dataset.
pub(crate) struct ReplicateTable {
    /// `se2[c][m]`
    pub se2: Vec<Vec<f64>>,
    pub statistic: Vec<f64>,
}

/// Runs every cell on datasets 0..replications of `generator`.
pub(crate) fn run_cells(
    cells: &[Cell],
    stat: &Statistic,
    generator: &Generator,
    big_n: usize,
    replications: usize,
    plan: &SeedPlan,
    execution: Execution,
) -> Result<ReplicateTable> {
    let keys: Vec<String> = cells.iter().map(Cell::key).collect();
    let tag = generator.stream_tag();
    let data_seed = plan.data_seed(&tag);
    let seed_keys: Vec<String> = keys.iter().map(|k| format!("{tag}/{k}")).collect();
    let one = |m: usize| -> Result<(Vec<f64>, f64)> {
        let data = generator.generate(big_n, RngStream::new(data_seed, m as u64))?;
        let full = stat.evaluate(&data, Weights::Unit)?;
        let source = DataSource::Memory(data);
        let se2 = cells
            .iter()
            .zip(keys.iter().zip(&seed_keys))
            .map(|(cell, (key, seed_key))| {
                let opts = RunOptions::seeded(plan.estimator_seed(seed_key, m));
                estimate(cell.method, &source, stat, cell.hyperparams, opts)
                    .map(|e| e.se2)
                    .map_err(|e| Error::Cell { cell: format!("{key} replicate {m}"), source: Box::new(e) })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((se2, full))
    };
    let per_m: Vec<(Vec<f64>, f64)> = match execution {
        Execution::Sequential => (0..replications).map(one).collect::<Result<_>>()?,
        Execution::Parallel => (0..replications).into_par_iter().map(one).collect::<Result<_>>()?,
    };
    let mut se2 = vec![Vec::with_capacity(replications); cells.len()];
    let mut statistic = Vec::with_capacity(replications);
    for (row, full) in per_m {
        for (c, v) in row.into_iter().enumerate() {
            se2[c].push(v);
        }
        statistic.push(full);
    }
    Ok(ReplicateTable { se2, statistic })
}

pub(crate) fn dedup_cells(cells: impl IntoIterator<Item = Cell>) -> Vec<Cell> {
    let mut out: Vec<Cell> = Vec::new();
    for c in cells {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (m - 1.0)).sqrt())
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Any of the three studies, tagged by name in its JSON form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
pub enum ExperimentConfig {
    Gamma(GammaConfig),
    Kappa(KappaConfig),
    Tuning(TuningConfig),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Gamma(c) => c.validate(),
            ExperimentConfig::Kappa(c) => c.validate(),
            ExperimentConfig::Tuning(c) => c.validate(),
        }
    }

    pub fn seed_mut(&mut self) -> &mut u64 {
        match self {
            ExperimentConfig::Gamma(c) => &mut c.seed,
            ExperimentConfig::Kappa(c) => &mut c.seed,
            ExperimentConfig::Tuning(c) => &mut c.seed,
        }
    }
}

pub(crate) fn check_replications(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Config(format!("replications must be at least 2, got {m}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_for_mean_is_sigma2_over_n() {
        let g = Generator::new(Distribution::Normal);
        let v = monte_carlo_truth(&Statistic::Mean, &g, 10_000, 10_000, 1, Centering::TrueParameter).unwrap();
        assert!((v * 1e4 - 1.0).abs() < 0.05, "{}", v * 1e4);
        let again = monte_carlo_truth(&Statistic::Mean, &g, 10_000, 10_000, 1, Centering::TrueParameter).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn truth_for_point_mass_is_zero() {
        let g = Generator::new(Distribution::PointMass { value: 3.5 });
        for c in [Centering::TrueParameter, Centering::ReplicateMean] {
            assert_eq!(monte_carlo_truth(&Statistic::Mean, &g, 100, 10, 1, c).unwrap(), 0.0);
        }
        assert!(monte_carlo_truth(&Statistic::Mean, &g, 100, 1, 1, Centering::ReplicateMean).is_err());
    }

    #[test]
    fn truth_for_correlation_matches_asymptotic_variance() {
        let g = Generator::new(Distribution::BivariateNormal { rho: 0.5 });
        let v = monte_carlo_truth(&Statistic::Correlation, &g, 2_000, 4_000, 2, Centering::TrueParameter).unwrap();
        let asym = (1.0f64 - 0.25).powi(2) / 2_000.0;
        assert!((v / asym - 1.0).abs() < 0.08, "{}", v / asym);
    }

    #[test]
    fn generators_hit_their_moments() {
        for g in [Generator::new(Distribution::Normal), Generator::new(Distribution::CenteredExponential).scaled(3.0)] {
            let d = g.generate(400_000, RngStream::new(4, 0)).unwrap();
            let m = crate::statistics::central_moments(d.x()).unwrap();
            let p = g.x_moments();
            assert!((m.mean - p.mean).abs() < 0.02 * g.scale);
            assert!((m.sigma2 / p.sigma2 - 1.0).abs() < 0.02);
            assert!((m.sigma4 / p.sigma4 - 1.0).abs() < 0.1);
        }
        let bad = Generator::new(Distribution::BivariateNormal { rho: 1.0 });
        assert!(bad.generate(10, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn floor_power_guards_round_off() {
        assert_eq!(floor_power(10_000, 0.5), 100);
        assert_eq!(floor_power(10_000, 0.4), 39);
        assert_eq!(floor_power(10_000, 0.6), 251);
        assert_eq!(floor_power(10_000, 0.7), 630);
        assert_eq!(floor_power(100_000, 0.6), 1000);
        assert_eq!(floor_power(100_000, 0.5), 316);
    }

    #[test]
    fn cell_keys_ignore_unused_hyperparameters() {
        assert_eq!(Cell::new(Method::Tb, 10, 25, 7), Cell::new(Method::Tb, 99, 25, 1));
        assert_eq!(Cell::new(Method::Sdb, 10, 25, 7).key(), "sdb n=10 R=7");
        assert_eq!(Cell::new(Method::Af, 10, 25, 7).key(), "af");
    }

    #[test]
    fn experiment_config_json_is_tagged() {
        let cfg = ExperimentConfig::Kappa(KappaConfig::desk(3));
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"experiment\":\"kappa\""));
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
