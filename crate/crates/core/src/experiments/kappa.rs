//! κ study: theoretical MSE over the empirical MSE of ŜE² for the sample
//! mean.
//!
//! The empirical MSE needs a reference SE². The population value σ²/N is
//! the default. The Monte Carlo SE*² from the replicate means is also
//! reported; with M replicates it carries relative noise of about √(2/M),
//! which exceeds the spread of the AF and TB estimators themselves once
//! N > M, so κ against it mostly measures that noise.

use serde::{Deserialize, Serialize};

use super::{check_replications, dedup_cells, floor_power, run_cells, squared_spread, Cell, Centering, Distribution, Generator, Scale, SeedPlan};
use crate::error::{Error, Result};
use crate::estimators::{Execution, Hyperparams, Method};
use crate::report::{Tabular, Value};
use crate::statistics::Statistic;
use crate::theory::theoretical_mse;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaReference {
    /// σ²/N from the generator's population variance.
    #[default]
    Population,
    /// M⁻¹ Σ (X̄⁽ᵐ⁾ − X̄̄)² over the replicate datasets.
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaConfig {
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(rename = "M")]
    pub replications: usize,
    pub generators: Vec<Generator>,
    pub methods: Vec<Method>,
    pub ns: Vec<usize>,
    #[serde(rename = "Bs")]
    pub bs: Vec<usize>,
    #[serde(rename = "Rs")]
    pub rs: Vec<usize>,
    #[serde(default)]
    pub reference: KappaReference,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl KappaConfig {
    /// n ∈ {⌊N^0.4⌋, ⌊N^0.5⌋, ⌊N^0.6⌋}, B, R ∈ {25, 50}, normal and
    /// centred-exponential data, all five methods.
    pub fn with_size(big_n: usize, replications: usize, seed: u64) -> Self {
        Self {
            big_n,
            replications,
            generators: vec![
                Generator::new(Distribution::Normal),
                Generator::new(Distribution::CenteredExponential),
            ],
            methods: Method::ALL.to_vec(),
            ns: [0.4, 0.5, 0.6].iter().map(|&a| floor_power(big_n, a)).collect(),
            bs: vec![25, 50],
            rs: vec![25, 50],
            reference: KappaReference::Population,
            seed,
            execution: Execution::Parallel,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self::with_size(10_000, 1000, seed)
    }

    pub fn full(seed: u64) -> Self {
        Self::with_size(100_000, 1000, seed)
    }

    pub fn at_scale(scale: Scale, seed: u64) -> Self {
        match scale {
            Scale::Desk => Self::desk(seed),
            Scale::Full => Self::full(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_replications(self.replications)?;
        if self.generators.is_empty()
            || self.methods.is_empty()
            || self.ns.is_empty()
            || self.bs.is_empty()
            || self.rs.is_empty()
        {
            return Err(Error::Config("kappa grid is empty".into()));
        }
        for g in &self.generators {
            g.validate()?;
            if g.is_paired() {
                return Err(Error::Config(format!("kappa studies the mean of scalar data, got {g}")));
            }
            g.x_moments().c()?;
        }
        for &m in &self.methods {
            for &n in &self.ns {
                for &b in &self.bs {
                    for &r in &self.rs {
                        Hyperparams::new(n, b, r).validate(m, self.big_n).map_err(|e| Error::Config(e.to_string()))?;
                    }
                }
            }
        }
        Ok(())
    }

    fn layout(&self) -> Vec<(usize, usize, usize, Method)> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &b in &self.bs {
                for &r in &self.rs {
                    for &m in &self.methods {
                        out.push((n, b, r, m));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub generator: String,
    pub method: Method,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "R")]
    pub r: usize,
    /// κ against the configured reference.
    pub kappa: f64,
    pub mse_theory: f64,
    pub mse_hat: f64,
    /// κ against the other reference.
    pub kappa_alt: f64,
    pub mse_hat_alt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub reference: KappaReference,
    pub rows: Vec<KappaRow>,
}

pub fn run_kappa_experiment(config: &KappaConfig) -> Result<KappaReport> {
    config.validate()?;
    let plan = SeedPlan::new(config.seed, "kappa");
    let stat = Statistic::Mean;
    let layout = config.layout();
    let cells = dedup_cells(layout.iter().map(|&(n, b, r, m)| Cell::new(m, n, b, r)));
    let mut rows = Vec::with_capacity(layout.len() * config.generators.len());

    for generator in &config.generators {
        let moments = generator.x_moments();
        let table = run_cells(&cells, &stat, generator, config.big_n, config.replications, &plan, config.execution)?;
        let population = moments.sigma2 / config.big_n as f64;
        let monte_carlo = squared_spread(&table.statistic, Centering::ReplicateMean, || unreachable!())?;
        let (primary, alt) = match config.reference {
            KappaReference::Population => (population, monte_carlo),
            KappaReference::MonteCarlo => (monte_carlo, population),
        };
        let mse_about = |c: usize, reference: f64| {
            let v = &table.se2[c];
            v.iter().map(|s| (s - reference) * (s - reference)).sum::<f64>() / v.len() as f64
        };
        for &(n, b, r, method) in &layout {
            let cell = Cell::new(method, n, b, r);
            let c = cells.iter().position(|x| *x == cell).expect("cell was deduplicated from layout");
            let mse_theory = theoretical_mse(method, &moments, config.big_n, cell.hyperparams)?.mse;
            let mse_hat = mse_about(c, primary);
            let mse_hat_alt = mse_about(c, alt);
            rows.push(KappaRow {
                generator: generator.label(),
                method,
                n,
                b,
                r,
                kappa: mse_theory / mse_hat,
                mse_theory,
                mse_hat,
                kappa_alt: mse_theory / mse_hat_alt,
                mse_hat_alt,
            });
        }
    }
    Ok(KappaReport { reference: config.reference, rows })
}

impl Tabular for KappaReport {
    fn columns(&self) -> Vec<&'static str> {
        let (alt, mse_alt) = match self.reference {
            KappaReference::Population => ("kappa_mc", "mse_hat_mc"),
            KappaReference::MonteCarlo => ("kappa_pop", "mse_hat_pop"),
        };
        vec!["generator", "method", "n", "B", "R", "kappa", "mse_theory", "mse_hat", alt, mse_alt]
    }

    fn rows(&self) -> Vec<Vec<Value>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.generator.clone().into(),
                    r.method.to_string().into(),
                    r.n.into(),
                    r.b.into(),
                    r.r.into(),
                    r.kappa.into(),
                    r.mse_theory.into(),
                    r.mse_hat.into(),
                    r.kappa_alt.into(),
                    r.mse_hat_alt.into(),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> KappaConfig {
        let mut c = KappaConfig::with_size(2_000, 60, seed);
        c.bs = vec![5];
        c.rs = vec![5, 10];
        c
    }

    #[test]
    fn desk_grid() {
        let c = KappaConfig::desk(0);
        assert_eq!(c.ns, vec![39, 100, 251]);
        c.validate().unwrap();
    }

    #[test]
    fn af_and_tb_rows_repeat_across_unused_parameters() {
        let rep = run_kappa_experiment(&small(1)).unwrap();
        for gen in ["normal", "exp"] {
            let af: Vec<f64> =
                rep.rows.iter().filter(|r| r.generator == gen && r.method == Method::Af).map(|r| r.kappa).collect();
            assert!(af.len() > 1 && af.iter().all(|&k| k == af[0]));
            let tb: Vec<f64> =
                rep.rows.iter().filter(|r| r.generator == gen && r.method == Method::Tb).map(|r| r.kappa).collect();
            assert!(tb.iter().all(|&k| k == tb[0]));
        }
    }

    #[test]
    fn kappa_is_exactly_scale_free_for_power_of_two_scale() {
        let a = run_kappa_experiment(&small(2)).unwrap();
        let mut s = small(2);
        for g in &mut s.generators {
            *g = g.scaled(4.0);
        }
        let b = run_kappa_experiment(&s).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.kappa, y.kappa, "{} {}", x.method, x.n);
        }
    }

    #[test]
    fn reference_switch_swaps_columns() {
        let a = run_kappa_experiment(&small(3)).unwrap();
        let mut c = small(3);
        c.reference = KappaReference::MonteCarlo;
        let b = run_kappa_experiment(&c).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.kappa, y.kappa_alt);
            assert_eq!(x.kappa_alt, y.kappa);
        }
    }

    #[test]
    fn rejects_paired_generator() {
        let mut c = small(1);
        c.generators = vec![Generator::new(Distribution::BivariateNormal { rho: 0.2 })];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = small(1);
        c.ns = vec![5000];
        assert!(c.validate().is_err());
    }
}
