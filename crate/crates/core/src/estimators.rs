//! The five SE² estimators: analytic formula (AF), traditional bootstrap
//! (TB), bag of little bootstraps (BLB), subsampled m-out-of-N bootstrap
//! (SB) and subsampled double bootstrap (SDB).
//!
//! Randomness: replication `k` of a call with seed `s` draws from
//! `RngStream::new(s, k)`, where a replication is one resample `b` for TB/SB
//! and one first-stage subset `r` for BLB/SDB. Per-replication squared
//! deviations are reduced in replication order, so results do not depend on
//! the execution mode.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cputime::CpuClock;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::resample::{bounded_index, fill_multinomial, fill_srswr, FrequencyVector};
use crate::rng::RngStream;
use crate::source::DataSource;
use crate::statistics::{central_moments, CompensatedSum, Statistic, Weights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Af,
    Tb,
    Blb,
    Sb,
    Sdb,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Af, Method::Tb, Method::Blb, Method::Sb, Method::Sdb];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Af => "af",
            Method::Tb => "tb",
            Method::Blb => "blb",
            Method::Sb => "sb",
            Method::Sdb => "sdb",
        }
    }

    /// Which of (n, B, R) the method reads.
    pub fn uses(self) -> (bool, bool, bool) {
        match self {
            Method::Af => (false, false, false),
            Method::Tb => (false, true, false),
            Method::Blb => (true, true, true),
            Method::Sb => (true, true, false),
            Method::Sdb => (true, false, true),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "af" => Method::Af,
            "tb" => Method::Tb,
            "blb" => Method::Blb,
            "sb" => Method::Sb,
            "sdb" => Method::Sdb,
            other => return Err(Error::invalid(format!("unknown method {other:?}"))),
        })
    }
}

/// Subset size `n`, resamples per subset `B`, replications `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "R")]
    pub r: usize,
}

impl Hyperparams {
    pub fn new(n: usize, b: usize, r: usize) -> Self {
        Self { n, b, r }
    }

    /// The triple with the entries `method` ignores set to zero.
    pub fn effective(self, method: Method) -> Self {
        let (un, ub, ur) = method.uses();
        Self {
            n: if un { self.n } else { 0 },
            b: if ub { self.b } else { 0 },
            r: if ur { self.r } else { 0 },
        }
    }

    pub fn validate(&self, method: Method, big_n: usize) -> Result<()> {
        let (un, ub, ur) = method.uses();
        if un && (self.n == 0 || self.n > big_n) {
            return Err(Error::invalid(format!("subset size n={} must be in 1..={big_n}", self.n)));
        }
        if ub && self.b == 0 {
            return Err(Error::invalid("B must be at least 1"));
        }
        if ur && self.r == 0 {
            return Err(Error::invalid("R must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Replications run on the calling thread; CPU time is thread time.
    #[default]
    Sequential,
    /// Replications fan out over the rayon pool; CPU time is process time.
    Parallel,
}

impl Execution {
    fn clock(self) -> CpuClock {
        match self {
            Execution::Sequential => CpuClock::Thread,
            Execution::Parallel => CpuClock::Process,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub execution: Execution,
}

impl RunOptions {
    pub fn seeded(seed: u64) -> Self {
        Self { seed, execution: Execution::Sequential }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeEstimate {
    pub se2: f64,
    pub method: Method,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub cpu_seconds: f64,
    pub n_statistic_evals: u64,
}

/// Runs `count` replications and returns their values in replication order.
fn replicate<S, I, F>(count: usize, execution: Execution, init: I, f: F) -> Result<Vec<f64>>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> Result<f64> + Sync + Send,
{
    match execution {
        Execution::Sequential => {
            let mut state = init();
            (0..count).map(|k| f(&mut state, k)).collect()
        }
        Execution::Parallel => (0..count).into_par_iter().map_init(&init, |s, k| f(s, k)).collect(),
    }
}

fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

fn label_replication(err: Error, what: &str, k: usize) -> Error {
    match err {
        Error::DegenerateStatistic(msg) => Error::DegenerateStatistic(format!("{what} {k}: {msg}")),
        other => other,
    }
}

/// Delta-method analytic estimate ġ²(x̄)·σ̂²/N.
pub fn estimate_af(data: &Dataset, stat: &Statistic) -> Result<SeEstimate> {
    let clock = CpuClock::Thread;
    let (se2, cpu) = clock.measure(|| -> Result<f64> {
        let deriv = stat.mean_derivative().ok_or_else(|| {
            Error::UnsupportedStatistic(format!("{} has no analytic derivative", stat.name()))
        })?;
        let m = central_moments(data.x())?;
        let d = deriv(m.mean);
        Ok(d * d * m.sigma2 / data.len() as f64)
    });
    Ok(SeEstimate {
        se2: se2?,
        method: Method::Af,
        hyperparams: Hyperparams::new(0, 0, 0),
        seed: 0,
        cpu_seconds: cpu,
        n_statistic_evals: 1,
    })
}

/// Traditional bootstrap: `B` size-N resamples of the full data.
pub fn estimate_tb(data: &Dataset, stat: &Statistic, b: usize, opts: RunOptions) -> Result<SeEstimate> {
    let big_n = data.len();
    let hp = Hyperparams::new(0, b, 0);
    hp.validate(Method::Tb, big_n)?;
    let (se2, cpu) = opts.execution.clock().measure(|| -> Result<f64> {
        let full = stat.evaluate(data, Weights::Unit)?;
        let devs = replicate(
            b,
            opts.execution,
            || vec![0u64; big_n],
            |counts, k| {
                let mut rng = RngStream::new(opts.seed, k as u64).rng();
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..big_n {
                    counts[bounded_index(&mut rng, big_n as u64) as usize] += 1;
                }
                let v = stat
                    .evaluate(data, Weights::Counts(counts))
                    .map_err(|e| label_replication(e, "resample", k))?;
                Ok((v - full) * (v - full))
            },
        )?;
        Ok(ordered_sum(&devs) / b as f64)
    });
    Ok(SeEstimate {
        se2: se2?,
        method: Method::Tb,
        hyperparams: hp,
        seed: opts.seed,
        cpu_seconds: cpu,
        n_statistic_evals: b as u64,
    })
}

/// m-out-of-N bootstrap: `B` size-n resamples, rescaled by n/N.
pub fn estimate_sb(data: &Dataset, stat: &Statistic, n: usize, b: usize, opts: RunOptions) -> Result<SeEstimate> {
    let big_n = data.len();
    let hp = Hyperparams::new(n, b, 0);
    hp.validate(Method::Sb, big_n)?;
    let (se2, cpu) = opts.execution.clock().measure(|| -> Result<f64> {
        let full = stat.evaluate(data, Weights::Unit)?;
        let devs = replicate(
            b,
            opts.execution,
            || (Vec::with_capacity(n), Dataset::with_capacity(n, data.is_paired())),
            |(idx, sub), k| {
                let mut rng = RngStream::new(opts.seed, k as u64).rng();
                fill_srswr(idx, n, big_n, &mut rng)?;
                data.gather_into(idx, sub)?;
                let v = stat
                    .evaluate(sub, Weights::Unit)
                    .map_err(|e| label_replication(e, "resample", k))?;
                Ok((v - full) * (v - full))
            },
        )?;
        Ok(n as f64 / big_n as f64 * ordered_sum(&devs) / b as f64)
    });
    Ok(SeEstimate {
        se2: se2?,
        method: Method::Sb,
        hyperparams: hp,
        seed: opts.seed,
        cpu_seconds: cpu,
        n_statistic_evals: b as u64,
    })
}

struct SubsetScratch {
    idx: Vec<usize>,
    subset: Dataset,
    freq: FrequencyVector,
}

fn little_bootstraps(
    source: &DataSource,
    stat: &Statistic,
    n: usize,
    b: usize,
    r: usize,
    opts: RunOptions,
) -> Result<f64> {
    let big_n = source.len();
    let paired = source.is_paired();
    let per_subset = replicate(
        r,
        opts.execution,
        || SubsetScratch {
            idx: Vec::with_capacity(n),
            subset: Dataset::with_capacity(n, paired),
            freq: FrequencyVector::from_counts(Vec::with_capacity(n)),
        },
        |s, k| {
            let mut rng = RngStream::new(opts.seed, k as u64).rng();
            fill_srswr(&mut s.idx, n, big_n, &mut rng)?;
            source.sample_records_into(&s.idx, &mut s.subset)?;
            let center = stat
                .evaluate(&s.subset, Weights::Unit)
                .map_err(|e| label_replication(e, "subset", k))?;
            let mut acc = CompensatedSum::default();
            for _ in 0..b {
                fill_multinomial(&mut s.freq, big_n as u64, n, &mut rng)?;
                let v = stat
                    .evaluate(&s.subset, Weights::Counts(s.freq.counts()))
                    .map_err(|e| label_replication(e, "subset", k))?;
                acc.add((v - center) * (v - center));
            }
            Ok(acc.value())
        },
    )?;
    Ok(ordered_sum(&per_subset) / (b as f64 * r as f64))
}

/// Bag of little bootstraps over `R` size-n subsets with `B` multinomial
/// resamples each.
pub fn estimate_blb(
    source: &DataSource,
    stat: &Statistic,
    n: usize,
    b: usize,
    r: usize,
    opts: RunOptions,
) -> Result<SeEstimate> {
    let hp = Hyperparams::new(n, b, r);
    hp.validate(Method::Blb, source.len())?;
    check_arity(source, stat)?;
    let (se2, cpu) = opts.execution.clock().measure(|| little_bootstraps(source, stat, n, b, r, opts));
    Ok(SeEstimate {
        se2: se2?,
        method: Method::Blb,
        hyperparams: hp,
        seed: opts.seed,
        cpu_seconds: cpu,
        n_statistic_evals: (r * (b + 1)) as u64,
    })
}

/// Subsampled double bootstrap: one multinomial resample per subset.
pub fn estimate_sdb(source: &DataSource, stat: &Statistic, n: usize, r: usize, opts: RunOptions) -> Result<SeEstimate> {
    let hp = Hyperparams::new(n, 0, r);
    hp.validate(Method::Sdb, source.len())?;
    check_arity(source, stat)?;
    let (se2, cpu) = opts.execution.clock().measure(|| little_bootstraps(source, stat, n, 1, r, opts));
    Ok(SeEstimate {
        se2: se2?,
        method: Method::Sdb,
        hyperparams: hp,
        seed: opts.seed,
        cpu_seconds: cpu,
        n_statistic_evals: 2 * r as u64,
    })
}

fn check_arity(source: &DataSource, stat: &Statistic) -> Result<()> {
    if stat.needs_pairs() && !source.is_paired() {
        return Err(Error::invalid(format!("{} needs paired observations", stat.name())));
    }
    Ok(())
}

/// Runs `method` on `source`. AF, TB and SB need the full sample and read
/// disk sources into memory first.
pub fn estimate(
    method: Method,
    source: &DataSource,
    stat: &Statistic,
    hp: Hyperparams,
    opts: RunOptions,
) -> Result<SeEstimate> {
    let with_data = |f: &dyn Fn(&Dataset) -> Result<SeEstimate>| match source {
        DataSource::Memory(d) => f(d),
        DataSource::Disk(_) => f(&source.load_all()?),
    };
    match method {
        Method::Af => with_data(&|d| estimate_af(d, stat)),
        Method::Tb => with_data(&|d| estimate_tb(d, stat, hp.b, opts)),
        Method::Sb => with_data(&|d| estimate_sb(d, stat, hp.n, hp.b, opts)),
        Method::Blb => estimate_blb(source, stat, hp.n, hp.b, hp.r, opts),
        Method::Sdb => estimate_sdb(source, stat, hp.n, hp.r, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::SmoothFn;

    fn fixed_data() -> Dataset {
        // deterministic, skewed, non-degenerate
        Dataset::scalar((0..100).map(|i| ((i * 37 % 101) as f64).sqrt() + (i % 7) as f64).collect()).unwrap()
    }

    fn af_target(d: &Dataset) -> f64 {
        central_moments(d.x()).unwrap().sigma2 / d.len() as f64
    }

    #[test]
    fn af_examples() {
        let d = Dataset::scalar(vec![-1.0, 1.0]).unwrap();
        assert_eq!(estimate_af(&d, &Statistic::Mean).unwrap().se2, 0.5);
        let c = Dataset::scalar(vec![4.2; 10]).unwrap();
        assert_eq!(estimate_af(&c, &Statistic::Mean).unwrap().se2, 0.0);
        let d = Dataset::scalar(vec![1.0, 3.0]).unwrap();
        let sq = Statistic::SmoothOfMean(SmoothFn::square());
        assert_eq!(estimate_af(&d, &sq).unwrap().se2, 8.0);
        let p = Dataset::paired(vec![1.0, 2.0], vec![2.0, 1.0]).unwrap();
        assert!(matches!(estimate_af(&p, &Statistic::Correlation), Err(Error::UnsupportedStatistic(_))));
    }

    #[test]
    fn constant_data_gives_zero() {
        let c = Dataset::scalar(vec![0.1; 50]).unwrap();
        let src = DataSource::Memory(c.clone());
        let o = RunOptions::seeded(5);
        assert_eq!(estimate_tb(&c, &Statistic::Mean, 20, o).unwrap().se2, 0.0);
        assert_eq!(estimate_sb(&c, &Statistic::Mean, 10, 20, o).unwrap().se2, 0.0);
        assert_eq!(estimate_blb(&src, &Statistic::Mean, 10, 5, 4, o).unwrap().se2, 0.0);
        assert_eq!(estimate_sdb(&src, &Statistic::Mean, 10, 20, o).unwrap().se2, 0.0);
    }

    #[test]
    fn invalid_hyperparams() {
        let d = fixed_data();
        let src = DataSource::Memory(d.clone());
        let o = RunOptions::seeded(1);
        assert!(estimate_tb(&d, &Statistic::Mean, 0, o).is_err());
        assert!(estimate_sb(&d, &Statistic::Mean, 101, 5, o).is_err());
        assert!(estimate_sb(&d, &Statistic::Mean, 0, 5, o).is_err());
        assert!(estimate_blb(&src, &Statistic::Mean, 10, 0, 5, o).is_err());
        assert!(estimate_blb(&src, &Statistic::Mean, 10, 5, 0, o).is_err());
        assert!(estimate_sdb(&src, &Statistic::Mean, 10, 0, o).is_err());
        assert!(estimate_blb(&src, &Statistic::Correlation, 10, 5, 5, o).is_err());
    }

    #[test]
    fn degenerate_subset_names_replication() {
        // Two distinct points: a size-2 subset is degenerate whenever both draws coincide.
        let d = Dataset::paired(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let src = DataSource::Memory(d);
        let err = estimate_blb(&src, &Statistic::Correlation, 2, 3, 50, RunOptions::seeded(1)).unwrap_err();
        match err {
            Error::DegenerateStatistic(msg) => assert!(msg.contains("subset "), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sdb_is_blb_with_one_resample() {
        let d = fixed_data();
        let src = DataSource::Memory(d);
        for seed in [0, 1, 99] {
            let o = RunOptions::seeded(seed);
            let a = estimate_sdb(&src, &Statistic::Mean, 10, 200, o).unwrap();
            let b = estimate_blb(&src, &Statistic::Mean, 10, 1, 200, o).unwrap();
            assert_eq!(a.se2.to_bits(), b.se2.to_bits());
        }
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let d = fixed_data();
        let src = DataSource::Memory(d.clone());
        let seq = RunOptions::seeded(3);
        let par = RunOptions { execution: Execution::Parallel, ..seq };
        assert_eq!(
            estimate_blb(&src, &Statistic::Mean, 20, 7, 13, seq).unwrap().se2,
            estimate_blb(&src, &Statistic::Mean, 20, 7, 13, par).unwrap().se2
        );
        assert_eq!(
            estimate_tb(&d, &Statistic::Mean, 50, seq).unwrap().se2,
            estimate_tb(&d, &Statistic::Mean, 50, par).unwrap().se2
        );
    }

    #[test]
    fn statistic_eval_accounting() {
        let d = fixed_data();
        let src = DataSource::Memory(d.clone());
        let o = RunOptions::seeded(3);
        assert_eq!(estimate_blb(&src, &Statistic::Mean, 10, 4, 6, o).unwrap().n_statistic_evals, 30);
        assert_eq!(estimate_sdb(&src, &Statistic::Mean, 10, 6, o).unwrap().n_statistic_evals, 12);
        assert_eq!(estimate_tb(&d, &Statistic::Mean, 9, o).unwrap().n_statistic_evals, 9);
        assert_eq!(estimate_sb(&d, &Statistic::Mean, 10, 9, o).unwrap().n_statistic_evals, 9);
    }

    #[test]
    fn sb_with_full_size_matches_tb_formula() {
        // n = N: the rescale factor is 1 and each resample is a size-N SRSWR draw.
        let d = fixed_data();
        let o = RunOptions::seeded(8);
        let sb = estimate_sb(&d, &Statistic::Mean, d.len(), 20_000, o).unwrap().se2;
        let tb = estimate_tb(&d, &Statistic::Mean, 20_000, o).unwrap().se2;
        let target = af_target(&d);
        assert!((sb / target - 1.0).abs() < 0.05);
        assert!((tb / target - 1.0).abs() < 0.05);
    }

    #[test]
    fn tb_conditional_expectation() {
        let d = fixed_data();
        let tb = estimate_tb(&d, &Statistic::Mean, 100_000, RunOptions::seeded(11)).unwrap();
        assert!((tb.se2 / af_target(&d) - 1.0).abs() < 0.02, "{}", tb.se2 / af_target(&d));
    }

    #[test]
    fn sb_conditional_expectation() {
        let d = fixed_data();
        let sb = estimate_sb(&d, &Statistic::Mean, 10, 100_000, RunOptions::seeded(12)).unwrap();
        assert!((sb.se2 / af_target(&d) - 1.0).abs() < 0.03, "{}", sb.se2 / af_target(&d));
    }

    #[test]
    fn sdb_law_of_total_expectation() {
        // E[σ̂²_r | S] = (1 - 1/n) σ̂² for a size-n SRSWR subset.
        let d = fixed_data();
        let n = 10;
        let src = DataSource::Memory(d.clone());
        let sdb = estimate_sdb(&src, &Statistic::Mean, n, 100_000, RunOptions::seeded(13)).unwrap();
        let target = (1.0 - 1.0 / n as f64) * af_target(&d);
        assert!((sdb.se2 / target - 1.0).abs() < 0.03, "{}", sdb.se2 / target);
    }

    #[test]
    fn blb_full_size_subset_matches_tb() {
        let d = fixed_data();
        let big_n = d.len();
        let src = DataSource::Memory(d.clone());
        let blb = estimate_blb(&src, &Statistic::Mean, big_n, 100_000, 1, RunOptions::seeded(14)).unwrap();
        // Conditional on the single subset the target is σ̂²_subset / N; check that exactly.
        let mut rng = RngStream::new(14, 0).rng();
        let idx = crate::resample::srswr_indices(big_n, big_n, &mut rng).unwrap();
        let subset = d.gather(&idx).unwrap();
        let conditional = central_moments(subset.x()).unwrap().sigma2 / big_n as f64;
        assert!((blb.se2 / conditional - 1.0).abs() < 0.03, "{}", blb.se2 / conditional);
        let tb = estimate_tb(&d, &Statistic::Mean, 100_000, RunOptions::seeded(14)).unwrap();
        // Both sit on the σ̂²/N scale; the subset variance differs from σ̂² by its own sampling noise.
        assert!((blb.se2 / tb.se2 - 1.0).abs() < 0.35);
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let d = fixed_data();
        let src = DataSource::Memory(d.clone());
        let o = RunOptions::seeded(2);
        let hp = Hyperparams::new(10, 5, 7);
        assert_eq!(
            estimate(Method::Blb, &src, &Statistic::Mean, hp, o).unwrap().se2,
            estimate_blb(&src, &Statistic::Mean, 10, 5, 7, o).unwrap().se2
        );
        assert_eq!(
            estimate(Method::Sb, &src, &Statistic::Mean, hp, o).unwrap().se2,
            estimate_sb(&d, &Statistic::Mean, 10, 5, o).unwrap().se2
        );
        assert_eq!(estimate(Method::Af, &src, &Statistic::Mean, hp, o).unwrap().se2, af_target(&d));
    }
}
