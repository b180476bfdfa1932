//! Cost model `time ≈ β₁·nBR + β₂·nR` and the budget-optimal (B*, R*)
//! for BLB at fixed subset size n.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Median CPU seconds of one BLB run at (n, B, R).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub cpu_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Seconds per unit of nBR.
    pub beta1: f64,
    /// Seconds per unit of nR.
    pub beta2: f64,
    /// Uncentered R² of the zero-intercept fit.
    pub r_squared: f64,
}

impl CostModel {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        check_positive("beta1", beta1)?;
        check_positive("beta2", beta2)?;
        Ok(Self { beta1, beta2, r_squared: f64::NAN })
    }

    /// The cost-model coefficients reported for the airline-data host.
    pub fn reference() -> Self {
        Self { beta1: 2.342e-7, beta2: 1.076e-4, r_squared: 0.98 }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveCoefficient { name, value })
    }
}

/// Zero-intercept least squares of `cpu_seconds` on (nBR, nR).
pub fn fit_cost_model(records: &[TimingRecord]) -> Result<CostModel> {
    if records.len() < 2 {
        return Err(Error::SingularDesign(format!("need at least 2 timing records, got {}", records.len())));
    }
    for rec in records {
        if rec.n == 0 || rec.b == 0 || rec.r == 0 {
            return Err(Error::invalid(format!("timing record has a zero count: {rec:?}")));
        }
        if !(rec.cpu_seconds > 0.0 && rec.cpu_seconds.is_finite()) {
            return Err(Error::invalid(format!("timing record needs positive cpu_seconds: {rec:?}")));
        }
    }
    let x1: Vec<f64> = records.iter().map(|t| (t.n * t.b * t.r) as f64).collect();
    let x2: Vec<f64> = records.iter().map(|t| (t.n * t.r) as f64).collect();
    let y: Vec<f64> = records.iter().map(|t| t.cpu_seconds).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();

    // Modified Gram-Schmidt on the two columns: x2 first, then x1 orthogonalised against it.
    let n2 = dot(&x2, &x2).sqrt();
    let q2: Vec<f64> = x2.iter().map(|v| v / n2).collect();
    let p = dot(&q2, &x1);
    let resid1: Vec<f64> = x1.iter().zip(&q2).map(|(a, q)| a - p * q).collect();
    let n1 = dot(&resid1, &resid1).sqrt();
    if !(n1 > 1e-10 * dot(&x1, &x1).sqrt()) {
        return Err(Error::SingularDesign("nBR and nR columns are collinear (B constant across records)".into()));
    }
    let q1: Vec<f64> = resid1.iter().map(|v| v / n1).collect();
    let beta1 = dot(&q1, &y) / n1;
    let beta2 = (dot(&q2, &y) - p * beta1) / n2;
    check_positive("beta1", beta1)?;
    check_positive("beta2", beta2)?;

    let sse: f64 = records
        .iter()
        .map(|t| {
            let e = t.cpu_seconds - predict_time(&CostModel { beta1, beta2, r_squared: 0.0 }, t.n, t.b, t.r);
            e * e
        })
        .sum();
    let r_squared = (1.0 - sse / dot(&y, &y)).clamp(0.0, 1.0);
    Ok(CostModel { beta1, beta2, r_squared })
}

pub fn predict_time(model: &CostModel, n: usize, b: usize, r: usize) -> f64 {
    let (n, b, r) = (n as f64, b as f64, r as f64);
    model.beta1 * n * b * r + model.beta2 * n * r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunedSpec {
    pub n: usize,
    pub b_star: usize,
    pub r_star: usize,
    pub c_max: f64,
    /// Objective at (B*, R*) over the objective at the spec it replaces.
    pub predicted_mse_ratio: Option<f64>,
    /// Set when a floor produced 0 and was raised to 1.
    pub clamped: bool,
}

/// Leading BLB MSE in units of (σ₄−σ⁴)/N², with c = σ⁴/(σ₄−σ⁴):
/// 2c/(RB) + 1/(nR) + c/n².
pub fn blb_objective(c: f64, n: usize, b: usize, r: usize) -> f64 {
    let (n, b, r) = (n as f64, b as f64, r as f64);
    2.0 * c / (r * b) + 1.0 / (n * r) + c / (n * n)
}

pub fn optimize_hyperparams(model: &CostModel, c: f64, n: usize, c_max: f64) -> Result<TunedSpec> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("c must be positive, got {c}")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(c_max > 0.0 && c_max.is_finite()) {
        return Err(Error::invalid(format!("c_max must be positive, got {c_max}")));
    }
    check_positive("beta1", model.beta1)?;
    check_positive("beta2", model.beta2)?;

    let nf = n as f64;
    let b_raw = (2.0 * c * model.beta2 / model.beta1 * nf).sqrt().floor();
    let mut clamped = false;
    let b_star = if b_raw < 1.0 {
        clamped = true;
        1
    } else {
        b_raw as usize
    };

    let per_r = model.beta1 * nf * b_star as f64 + model.beta2 * nf;
    let q = (c_max / per_r).floor();
    // c_max is often itself a predicted time, so an exact multiple can land one ulp short.
    let q = if (q + 1.0) * per_r <= c_max * (1.0 + 1e-12) { q + 1.0 } else { q };
    let r_star = if q < 1.0 {
        clamped = true;
        1
    } else {
        q as usize
    };
    Ok(TunedSpec { n, b_star, r_star, c_max, predicted_mse_ratio: None, clamped })
}

/// Re-spends the predicted budget of (n, B, R) on the optimal (B*, R*).
pub fn improve_specification(model: &CostModel, c: f64, n: usize, b: usize, r: usize) -> Result<TunedSpec> {
    if n == 0 || b == 0 || r == 0 {
        return Err(Error::invalid(format!("n, B, R must be positive, got ({n}, {b}, {r})")));
    }
    let c_max = predict_time(model, n, b, r);
    let mut spec = optimize_hyperparams(model, c, n, c_max)?;
    spec.predicted_mse_ratio =
        Some(blb_objective(c, n, spec.b_star, spec.r_star) / blb_objective(c, n, b, r));
    Ok(spec)
}
