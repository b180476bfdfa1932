//! Plug-in statistics evaluated under frequency weights, and central
//! moments.
//!
//! A bootstrap resample is represented by integer weights over a base set of
//! observations: weight `w_i` means observation `i` appears `w_i` times. A
//! statistic evaluated under those weights equals the statistic of the
//! expanded resample, without ever materializing it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::resample::FrequencyVector;

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// A smooth function `g` of the mean, with optional derivative.
///
/// The derivative is only needed by the analytic (delta-method) estimator;
/// every resampling estimator works from `g` alone.
#[derive(Clone, Copy)]
pub struct SmoothFn {
    pub name: &'static str,
    pub g: fn(f64) -> f64,
    pub derivative: Option<fn(f64) -> f64>,
}

impl SmoothFn {
    pub fn square() -> Self {
        Self {
            name: "square-of-mean",
            g: |m| m * m,
            derivative: Some(|m| 2.0 * m),
        }
    }

    pub fn exp() -> Self {
        Self {
            name: "exp-of-mean",
            g: f64::exp,
            derivative: Some(f64::exp),
        }
    }

    pub fn ln() -> Self {
        Self {
            name: "log-of-mean",
            g: f64::ln,
            derivative: Some(|m| 1.0 / m),
        }
    }
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFn")
            .field("name", &self.name)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Statistic {
    Mean,
    /// Pearson correlation of paired observations.
    Correlation,
    SmoothOfMean(SmoothFn),
}

/// Serializable name of a built-in [`Statistic`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    Mean,
    Correlation,
    SquareOfMean,
    ExpOfMean,
    LogOfMean,
}

impl StatisticKind {
    pub fn statistic(self) -> Statistic {
        match self {
            StatisticKind::Mean => Statistic::Mean,
            StatisticKind::Correlation => Statistic::Correlation,
            StatisticKind::SquareOfMean => Statistic::SmoothOfMean(SmoothFn::square()),
            StatisticKind::ExpOfMean => Statistic::SmoothOfMean(SmoothFn::exp()),
            StatisticKind::LogOfMean => Statistic::SmoothOfMean(SmoothFn::ln()),
        }
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mean" => StatisticKind::Mean,
            "correlation" | "corr" => StatisticKind::Correlation,
            "square-of-mean" => StatisticKind::SquareOfMean,
            "exp-of-mean" => StatisticKind::ExpOfMean,
            "log-of-mean" => StatisticKind::LogOfMean,
            other => return Err(Error::invalid(format!("unknown statistic {other:?}"))),
        })
    }
}

/// Weights attached to a dataset for one evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Weights<'a> {
    /// Every observation counted once.
    Unit,
    Counts(&'a [u64]),
}

impl Weights<'_> {
    #[inline]
    fn at(&self, i: usize) -> f64 {
        match self {
            Weights::Unit => 1.0,
            Weights::Counts(c) => c[i] as f64,
        }
    }
}

impl Statistic {
    pub fn needs_pairs(&self) -> bool {
        matches!(self, Statistic::Correlation)
    }

    /// Derivative of the statistic with respect to the mean, when known
    /// analytically.
    pub fn mean_derivative(&self) -> Option<fn(f64) -> f64> {
        match self {
            Statistic::Mean => Some(|_| 1.0),
            Statistic::Correlation => None,
            Statistic::SmoothOfMean(f) => f.derivative,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Correlation => "correlation",
            Statistic::SmoothOfMean(f) => f.name,
        }
    }

    pub fn evaluate(&self, data: &Dataset, weights: Weights<'_>) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("statistic of an empty dataset"));
        }
        if let Weights::Counts(c) = weights {
            if c.len() != data.len() {
                return Err(Error::invalid(format!(
                    "{} weights for {} observations",
                    c.len(),
                    data.len()
                )));
            }
        }
        match self {
            Statistic::Mean => weighted_mean(data.x(), weights),
            Statistic::SmoothOfMean(f) => Ok((f.g)(weighted_mean(data.x(), weights)?)),
            Statistic::Correlation => {
                let y = data
                    .y()
                    .ok_or_else(|| Error::invalid("correlation needs paired observations"))?;
                weighted_correlation(data.x(), y, weights)
            }
        }
    }
}

/// Statistic of the resample encoded by `weights` over `data`.
pub fn weighted_statistic(stat: &Statistic, data: &Dataset, weights: &FrequencyVector) -> Result<f64> {
    stat.evaluate(data, Weights::Counts(weights.counts()))
}

/// Statistic of the raw data (unit weights).
pub fn full_statistic(stat: &Statistic, data: &Dataset) -> Result<f64> {
    stat.evaluate(data, Weights::Unit)
}

fn total_weight(n: usize, weights: Weights<'_>) -> Result<f64> {
    let total = match weights {
        Weights::Unit => n as f64,
        Weights::Counts(c) => c.iter().sum::<u64>() as f64,
    };
    if total <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    Ok(total)
}

// Sums are taken about a pilot value (the first observation) so that
// constant data yields its value exactly and large offsets do not cancel.
fn weighted_mean(x: &[f64], weights: Weights<'_>) -> Result<f64> {
    let total = total_weight(x.len(), weights)?;
    let pilot = x[0];
    let mut s = CompensatedSum::default();
    match weights {
        Weights::Unit => x.iter().for_each(|&v| s.add(v - pilot)),
        Weights::Counts(c) => x
            .iter()
            .zip(c)
            .filter(|(_, &w)| w > 0)
            .for_each(|(&v, &w)| s.add(w as f64 * (v - pilot))),
    }
    Ok(pilot + s.value() / total)
}

fn weighted_correlation(x: &[f64], y: &[f64], weights: Weights<'_>) -> Result<f64> {
    let total = total_weight(x.len(), weights)?;
    let (px, py) = (x[0], y[0]);
    let mut sx = CompensatedSum::default();
    let mut sy = CompensatedSum::default();
    let mut first: Option<(f64, f64)> = None;
    let (mut x_varies, mut y_varies) = (false, false);
    for i in 0..x.len() {
        let w = weights.at(i);
        if w == 0.0 {
            continue;
        }
        match first {
            None => first = Some((x[i], y[i])),
            Some((fx, fy)) => {
                x_varies |= x[i] != fx;
                y_varies |= y[i] != fy;
            }
        }
        sx.add(w * (x[i] - px));
        sy.add(w * (y[i] - py));
    }
    if !x_varies || !y_varies {
        return Err(Error::DegenerateStatistic(format!(
            "correlation undefined: weighted variance of {} is zero",
            if !x_varies { "x" } else { "y" }
        )));
    }
    let mx = px + sx.value() / total;
    let my = py + sy.value() / total;
    let mut sxx = CompensatedSum::default();
    let mut syy = CompensatedSum::default();
    let mut sxy = CompensatedSum::default();
    for i in 0..x.len() {
        let w = weights.at(i);
        if w == 0.0 {
            continue;
        }
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx.add(w * dx * dx);
        syy.add(w * dy * dy);
        sxy.add(w * dx * dy);
    }
    let r = sxy.value() / (sxx.value().sqrt() * syy.value().sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

/// Mean and divide-by-N central moments of a scalar sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    /// N⁻¹ Σ (xᵢ − x̄)²
    pub sigma2: f64,
    /// N⁻¹ Σ (xᵢ − x̄)⁴
    pub sigma4: f64,
}

impl MomentSummary {
    /// Known population moments, e.g. for a simulation generator.
    pub fn population(mean: f64, sigma2: f64, sigma4: f64) -> Self {
        Self { mean, sigma2, sigma4 }
    }

    /// σ₄ − σ⁴, the variance of a squared deviation.
    pub fn excess(&self) -> f64 {
        self.sigma4 - self.sigma2 * self.sigma2
    }

    /// c = σ⁴ / (σ₄ − σ⁴).
    pub fn c(&self) -> Result<f64> {
        let excess = self.excess();
        if !(excess > 0.0) || !(self.sigma2 > 0.0) {
            return Err(Error::DegenerateMoments(format!(
                "c undefined for sigma2 = {:e}, sigma4 = {:e}",
                self.sigma2, self.sigma4
            )));
        }
        Ok(self.sigma2 * self.sigma2 / excess)
    }

    /// The same moments for data multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            mean: self.mean * k,
            sigma2: self.sigma2 * k * k,
            sigma4: self.sigma4 * k.powi(4),
        }
    }
}

/// Single-pass accumulator for the first four central moments
/// (Pébay's update formulas).
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn summary(&self) -> Result<MomentSummary> {
        if self.n < 2 {
            return Err(Error::invalid(format!(
                "central moments need at least 2 observations, got {}",
                self.n
            )));
        }
        let n = self.n as f64;
        Ok(MomentSummary {
            mean: self.mean,
            sigma2: self.m2 / n,
            sigma4: self.m4 / n,
        })
    }
}

impl Extend<f64> for MomentAccumulator {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.push(v);
        }
    }
}

pub fn central_moments(data: &[f64]) -> Result<MomentSummary> {
    let mut acc = MomentAccumulator::default();
    acc.extend(data.iter().copied());
    acc.summary()
}
