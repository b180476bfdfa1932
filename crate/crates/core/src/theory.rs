//! Leading-order bias, variance and MSE of each SE² estimator for the
//! sample mean, as functions of σ², σ₄, N and the hyperparameters.
//!
//! Bias is measured against σ²/N. Higher-order terms are dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Hyperparams, Method};
use crate::statistics::MomentSummary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseBreakdown {
    /// E[ŜE²] − σ²/N
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

impl MseBreakdown {
    fn new(bias: f64, variance: f64) -> Self {
        Self { bias, variance, mse: bias * bias + variance }
    }
}

/// Theoretical MSE of `method` with `big_n` observations and hyperparameters `hp`.
/// Entries of `hp` the method ignores are not read.
pub fn theoretical_mse(method: Method, moments: &MomentSummary, big_n: usize, hp: Hyperparams) -> Result<MseBreakdown> {
    let s2 = moments.sigma2;
    let s4 = s2 * s2;
    let excess = moments.excess();
    if !(excess > 0.0) {
        return Err(Error::DegenerateMoments(format!(
            "sigma4 = {:e} must exceed sigma2^2 = {:e}",
            moments.sigma4, s4
        )));
    }
    if big_n == 0 {
        return Err(Error::invalid("N must be positive"));
    }
    hp.validate(method, big_n)?;

    let nn = big_n as f64;
    let n = hp.n as f64;
    let b = hp.b as f64;
    let r = hp.r as f64;
    let af_var = excess / (nn * nn * nn);
    let full_bias = -s2 / (nn * nn);
    let sub_bias = -s2 / (nn * n);

    Ok(match method {
        Method::Af => MseBreakdown::new(full_bias, af_var),
        Method::Tb => MseBreakdown::new(full_bias, af_var + 2.0 * s4 / (nn * nn * b)),
        Method::Blb => MseBreakdown::new(
            sub_bias,
            af_var + 2.0 * s4 / (nn * nn * r * b) + excess / (nn * nn * n * r),
        ),
        Method::Sb => MseBreakdown::new(sub_bias, af_var + 2.0 * s4 / (nn * nn * b)),
        Method::Sdb => MseBreakdown::new(sub_bias, af_var + 2.0 * s4 / (nn * nn * r)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal() -> MomentSummary {
        MomentSummary::population(0.0, 1.0, 3.0)
    }

    fn hp(n: usize, b: usize, r: usize) -> Hyperparams {
        Hyperparams::new(n, b, r)
    }

    #[test]
    fn af_normal_example() {
        let m = theoretical_mse(Method::Af, &normal(), 100_000, hp(0, 0, 0)).unwrap();
        assert!((m.variance - 2e-15).abs() < 1e-27);
        assert!((m.mse / (2e-15 + 1e-20) - 1.0).abs() < 1e-12);
        assert!((m.mse / 2.0001e-15 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tb_minus_af() {
        for (mom, big_n, b) in [(normal(), 1000, 10), (MomentSummary::population(0.0, 2.5, 40.0), 77, 3)] {
            let tb = theoretical_mse(Method::Tb, &mom, big_n, hp(0, b, 0)).unwrap();
            let af = theoretical_mse(Method::Af, &mom, big_n, hp(0, 0, 0)).unwrap();
            let want = 2.0 * mom.sigma2 * mom.sigma2 / ((big_n * big_n * b) as f64);
            assert!(((tb.mse - af.mse) / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blb_limit_full_subset() {
        let big_n = 500;
        let m = theoretical_mse(Method::Blb, &normal(), big_n, hp(big_n, usize::MAX / 4, 1)).unwrap();
        let nn = big_n as f64;
        let want = 2.0 * 2.0 / (nn * nn * nn);
        assert!((m.variance / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blb_b1_vs_sdb_difference() {
        let mom = MomentSummary::population(1.0, 2.0, 13.0);
        let (big_n, n, r) = (1000, 40, 7);
        let blb = theoretical_mse(Method::Blb, &mom, big_n, hp(n, 1, r)).unwrap();
        let sdb = theoretical_mse(Method::Sdb, &mom, big_n, hp(n, 0, r)).unwrap();
        let diff = mom.excess() / ((big_n * big_n) as f64 * (n * r) as f64);
        assert!(((blb.variance - sdb.variance) / diff - 1.0).abs() < 1e-10);
        assert_eq!(blb.bias, sdb.bias);
    }

    #[test]
    fn mse_is_bias_squared_plus_variance() {
        for method in Method::ALL {
            let m = theoretical_mse(method, &normal(), 10_000, hp(100, 5, 9)).unwrap();
            assert!(((m.bias * m.bias + m.variance) / m.mse - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_b_r_and_n() {
        let mom = MomentSummary::population(0.0, 1.0, 9.0);
        let big_n = 10_000;
        let mse = |m, n, b, r| theoretical_mse(m, &mom, big_n, hp(n, b, r)).unwrap().mse;
        for n in [10, 100, 1000] {
            for k in 1..50 {
                for m in [Method::Tb, Method::Sb, Method::Blb] {
                    assert!(mse(m, n, k + 1, 5) < mse(m, n, k, 5));
                }
                for m in [Method::Blb, Method::Sdb] {
                    assert!(mse(m, n, 5, k + 1) < mse(m, n, 5, k));
                }
            }
        }
        for m in [Method::Blb, Method::Sb, Method::Sdb] {
            let bias2 = |n| theoretical_mse(m, &mom, big_n, hp(n, 5, 5)).unwrap().bias.powi(2);
            for n in [10, 50, 200, 1000, 9999] {
                assert!(bias2(n + 1) < bias2(n));
            }
        }
    }

    #[test]
    fn degenerate_and_invalid() {
        let point = MomentSummary::population(0.0, 1.0, 1.0);
        assert!(matches!(
            theoretical_mse(Method::Af, &point, 10, hp(0, 0, 0)),
            Err(Error::DegenerateMoments(_))
        ));
        assert!(theoretical_mse(Method::Blb, &normal(), 10, hp(11, 1, 1)).is_err());
        assert!(theoretical_mse(Method::Sdb, &normal(), 10, hp(5, 0, 0)).is_err());
    }
}
