//! γ study: ŜE² of the sample correlation over a Monte Carlo SE*²
//! centred at the true ρ, summarised per cell by mean and SD of γ.

use serde::{Deserialize, Serialize};

use super::{
    check_replications, dedup_cells, floor_power, mean_sd, monte_carlo_truth, run_cells, Cell, Centering,
    Distribution, Generator, Scale, SeedPlan,
};
use crate::error::{Error, Result};
use crate::estimators::{Execution, Method};
use crate::report::{Tabular, Value};
use crate::statistics::Statistic;

/// One subset size with its δ = B×R budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaGroup {
    pub n: usize,
    /// B for TB and SB, R for SDB.
    pub deltas: Vec<usize>,
    /// (B, R) for BLB, one per δ.
    pub blb_pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(rename = "M")]
    pub replications: usize,
    /// Datasets behind SE*²; independent of the M replicates.
    pub truth_replications: usize,
    pub rho: f64,
    #[serde(default = "one")]
    pub scale: f64,
    pub methods: Vec<Method>,
    pub groups: Vec<GammaGroup>,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

fn one() -> f64 {
    1.0
}

const BLB_PAIRS: [[(usize, usize); 4]; 3] = [
    [(5, 5), (5, 10), (15, 5), (10, 10)],
    [(5, 25), (15, 10), (25, 7), (10, 20)],
    [(15, 15), (10, 25), (25, 11), (10, 30)],
];

impl GammaConfig {
    /// n ∈ {⌊N^0.5⌋, ⌊N^0.6⌋, ⌊N^0.7⌋} with δ groups 25..100, 125..200, 225..300.
    pub fn with_size(big_n: usize, replications: usize, seed: u64) -> Self {
        let groups = [0.5, 0.6, 0.7]
            .iter()
            .enumerate()
            .map(|(g, &a)| GammaGroup {
                n: floor_power(big_n, a),
                deltas: (0..4).map(|k| 25 * (4 * g + k + 1)).collect(),
                blb_pairs: BLB_PAIRS[g].to_vec(),
            })
            .collect();
        Self {
            big_n,
            replications,
            truth_replications: 10_000,
            rho: 0.5,
            scale: 1.0,
            methods: vec![Method::Tb, Method::Blb, Method::Sb, Method::Sdb],
            groups,
            seed,
            execution: Execution::Parallel,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self::with_size(10_000, 500, seed)
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

    pub fn generator(&self) -> Generator {
        Generator::new(Distribution::BivariateNormal { rho: self.rho }).scaled(self.scale)
    }

    pub fn validate(&self) -> Result<()> {
        check_replications(self.replications)?;
        if self.truth_replications < 2 {
            return Err(Error::Config("truth_replications must be at least 2".into()));
        }
        self.generator().validate()?;
        if self.groups.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("gamma grid is empty".into()));
        }
        if self.methods.contains(&Method::Af) {
            return Err(Error::Config("AF has no formula for the correlation".into()));
        }
        for g in &self.groups {
            if g.n == 0 || g.n > self.big_n {
                return Err(Error::Config(format!("subset size {} outside 1..={}", g.n, self.big_n)));
            }
            if g.deltas.is_empty() || g.deltas.contains(&0) {
                return Err(Error::Config(format!("group n={} needs positive deltas", g.n)));
            }
            if self.methods.contains(&Method::Blb) && g.blb_pairs.len() != g.deltas.len() {
                return Err(Error::Config(format!("group n={} needs one BLB pair per delta", g.n)));
            }
            if g.blb_pairs.iter().any(|&(b, r)| b == 0 || r == 0) {
                return Err(Error::Config(format!("group n={} has a zero BLB pair", g.n)));
            }
        }
        Ok(())
    }

    /// (row label δ, cell) for every row of the report, in report order.
    pub fn rows(&self) -> Vec<(usize, usize, Cell)> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for g in &self.groups {
                for (k, &delta) in g.deltas.iter().enumerate() {
                    let cell = match method {
                        Method::Tb | Method::Sb => Cell::new(method, g.n, delta, 0),
                        Method::Sdb => Cell::new(method, g.n, 0, delta),
                        Method::Blb => {
                            let (b, r) = g.blb_pairs[k];
                            Cell::new(method, g.n, b, r)
                        }
                        Method::Af => continue,
                    };
                    out.push((g.n, delta, cell));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub method: Method,
    /// Subset size of the group the row belongs to.
    pub n: usize,
    pub delta: usize,
    pub cell: Cell,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub se_star2: f64,
    pub rows: Vec<GammaRow>,
}

impl GammaReport {
    pub fn row(&self, method: Method, n: usize, delta: usize) -> Option<&GammaRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n && r.delta == delta)
    }
}

pub fn run_gamma_experiment(config: &GammaConfig) -> Result<GammaReport> {
    config.validate()?;
    let plan = SeedPlan::new(config.seed, "gamma");
    let generator = config.generator();
    let stat = Statistic::Correlation;
    let se_star2 = monte_carlo_truth(
        &stat,
        &generator,
        config.big_n,
        config.truth_replications,
        plan.truth_seed(&generator.stream_tag()),
        Centering::TrueParameter,
    )?;

    let layout = config.rows();
    let cells = dedup_cells(layout.iter().map(|r| r.2));
    let table = run_cells(&cells, &stat, &generator, config.big_n, config.replications, &plan, config.execution)?;

    let rows = layout
        .into_iter()
        .map(|(n, delta, cell)| {
            let c = cells.iter().position(|x| *x == cell).expect("cell was deduplicated from layout");
            let gammas: Vec<f64> = table.se2[c].iter().map(|v| v / se_star2).collect();
            let (mean, sd) = mean_sd(&gammas);
            GammaRow { method: cell.method, n, delta, cell, mean, sd }
        })
        .collect();
    Ok(GammaReport { se_star2, rows })
}

impl Tabular for GammaReport {
    fn columns(&self) -> Vec<&'static str> {
        vec!["method", "n", "delta", "B", "R", "mean_gamma", "sd_gamma", "se_star2"]
    }

    fn rows(&self) -> Vec<Vec<Value>> {
        self.rows
            .iter()
            .map(|r| {
                let h = r.cell.hyperparams;
                let (_, ub, ur) = r.method.uses();
                vec![
                    r.method.to_string().into(),
                    r.n.into(),
                    r.delta.into(),
                    ub.then_some(h.b).into(),
                    ur.then_some(h.r).into(),
                    r.mean.into(),
                    r.sd.into(),
                    self.se_star2.into(),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GammaConfig {
        let mut c = GammaConfig::with_size(2_000, 40, seed);
        c.truth_replications = 400;
        for g in &mut c.groups {
            g.deltas.truncate(2);
            g.blb_pairs.truncate(2);
        }
        c.groups.truncate(2);
        c
    }

    #[test]
    fn desk_layout_matches_reference_grid() {
        let c = GammaConfig::desk(0);
        let ns: Vec<usize> = c.groups.iter().map(|g| g.n).collect();
        assert_eq!(ns, vec![100, 251, 630]);
        assert_eq!(c.groups[2].deltas, vec![225, 250, 275, 300]);
        for g in &c.groups {
            for (d, (b, r)) in g.deltas.iter().zip(&g.blb_pairs) {
                // The BLB pairs only approximate δ (e.g. 25×7 = 175).
                assert!((b * r) as f64 / *d as f64 > 0.9 && (b * r) as f64 / *d as f64 <= 1.1);
            }
        }
        assert_eq!(c.rows().len(), 48);
        c.validate().unwrap();
    }

    #[test]
    fn reproducible_and_sequential_matches_parallel() {
        let a = run_gamma_experiment(&small(3)).unwrap();
        let mut seq = small(3);
        seq.execution = Execution::Sequential;
        let b = run_gamma_experiment(&seq).unwrap();
        assert_eq!(a, b);
        let c = run_gamma_experiment(&small(4)).unwrap();
        assert_ne!(a.rows[0].mean, c.rows[0].mean);
    }

    #[test]
    fn gamma_is_scale_free() {
        let a = run_gamma_experiment(&small(5)).unwrap();
        let mut scaled = small(5);
        scaled.scale = 4.0;
        let b = run_gamma_experiment(&scaled).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x.mean / y.mean - 1.0).abs() < 1e-9, "{} vs {}", x.mean, y.mean);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = small(1);
        c.replications = 1;
        assert!(matches!(run_gamma_experiment(&c), Err(Error::Config(_))));
        let mut c = small(1);
        c.methods.push(Method::Af);
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.groups[0].blb_pairs.pop();
        assert!(c.validate().is_err());
    }
}
