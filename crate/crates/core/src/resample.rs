//! Sampling primitives: with-replacement index draws and uniform
//! multinomial frequency vectors.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Uniform integer on `0..range` by Lemire's multiply-and-reject method.
///
/// `range` must be nonzero.
#[inline]
pub fn bounded_index<R: RngCore + ?Sized>(rng: &mut R, range: u64) -> u64 {
    debug_assert!(range > 0);
    let mut m = u128::from(rng.next_u64()) * u128::from(range);
    let mut low = m as u64;
    if low < range {
        let threshold = range.wrapping_neg() % range;
        while low < threshold {
            m = u128::from(rng.next_u64()) * u128::from(range);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// `m` independent uniform draws from `0..pool_size`.
pub fn srswr_indices<R: RngCore + ?Sized>(
    m: usize,
    pool_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    fill_srswr(&mut out, m, pool_size, rng)?;
    Ok(out)
}

/// Like [`srswr_indices`], reusing `out`'s allocation.
pub fn fill_srswr<R: RngCore + ?Sized>(
    out: &mut Vec<usize>,
    m: usize,
    pool_size: usize,
    rng: &mut R,
) -> Result<()> {
    if m == 0 || pool_size == 0 {
        return Err(Error::invalid(format!(
            "srswr needs m >= 1 and pool_size >= 1 (got m={m}, pool_size={pool_size})"
        )));
    }
    out.clear();
    out.extend((0..m).map(|_| bounded_index(rng, pool_size as u64) as usize));
    Ok(())
}

/// Counts of a Multinomial(total; 1/n, ..., 1/n) draw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyVector {
    counts: Vec<u64>,
    total: u64,
}

impl FrequencyVector {
    /// Wraps explicit counts; `total` is their sum.
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Draw a uniform multinomial frequency vector with `cells` cells summing to
/// `total`.
pub fn multinomial_frequencies<R: Rng + ?Sized>(
    total: u64,
    cells: usize,
    rng: &mut R,
) -> Result<FrequencyVector> {
    let mut fv = FrequencyVector {
        counts: Vec::with_capacity(cells),
        total,
    };
    fill_multinomial(&mut fv, total, cells, rng)?;
    Ok(fv)
}

/// Refill `fv` in place with a new draw.
///
/// With at least four units per cell, cells start from independent
/// Poisson(total/cells) counts. Given their sum S these are
/// Multinomial(S) counts, so topping up with total−S uniform units, or
/// removing S−total uniformly chosen units, leaves an exact
/// Multinomial(total) draw. Sparser draws place `total` units one by one.
pub fn fill_multinomial<R: Rng + ?Sized>(
    fv: &mut FrequencyVector,
    total: u64,
    cells: usize,
    rng: &mut R,
) -> Result<()> {
    if total == 0 || cells == 0 {
        return Err(Error::invalid(format!(
            "multinomial needs total >= 1 and cells >= 1 (got total={total}, cells={cells})"
        )));
    }
    fv.counts.clear();
    fv.total = total;
    if cells == 1 {
        fv.counts.push(total);
        return Ok(());
    }
    let range = cells as u64;
    if total < 4 * range {
        fv.counts.resize(cells, 0);
        for _ in 0..total {
            fv.counts[bounded_index(rng, range) as usize] += 1;
        }
        return Ok(());
    }

    let poisson = Poisson::new(total as f64 / cells as f64).expect("finite positive rate");
    let mut sum = 0u64;
    fv.counts.extend((0..cells).map(|_| {
        let c = poisson.sample(rng) as u64;
        sum += c;
        c
    }));
    if sum < total {
        for _ in sum..total {
            fv.counts[bounded_index(rng, range) as usize] += 1;
        }
    } else if sum > total {
        // Pick a unit uniformly: a cell uniformly, accepted with probability count/max.
        let max = *fv.counts.iter().max().expect("cells > 0");
        for _ in total..sum {
            loop {
                let j = bounded_index(rng, range) as usize;
                if bounded_index(rng, max) < fv.counts[j] {
                    fv.counts[j] -= 1;
                    break;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn zero_arguments_rejected() {
        let mut rng = RngStream::new(1, 0).rng();
        assert!(matches!(srswr_indices(0, 5, &mut rng), Err(Error::InvalidArgument(_))));
        assert!(matches!(srswr_indices(5, 0, &mut rng), Err(Error::InvalidArgument(_))));
        assert!(matches!(multinomial_frequencies(0, 3, &mut rng), Err(Error::InvalidArgument(_))));
        assert!(matches!(multinomial_frequencies(3, 0, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_element_pool() {
        let mut rng = RngStream::new(1, 0).rng();
        assert_eq!(srswr_indices(5, 1, &mut rng).unwrap(), vec![0; 5]);
    }

    #[test]
    fn single_cell_takes_everything() {
        let mut rng = RngStream::new(1, 0).rng();
        assert_eq!(multinomial_frequencies(10, 1, &mut rng).unwrap().counts(), &[10]);
    }

    #[test]
    fn srswr_is_deterministic() {
        let a = srswr_indices(100, 37, &mut RngStream::new(9, 4).rng()).unwrap();
        let b = srswr_indices(100, 37, &mut RngStream::new(9, 4).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn srswr_frequencies_within_binomial_band() {
        let m = 100_000;
        let pool = 10;
        let idx = srswr_indices(m, pool, &mut RngStream::new(2024, 0).rng()).unwrap();
        let mut freq = [0u64; 10];
        for i in idx {
            freq[i] += 1;
        }
        let expect = m as f64 / pool as f64;
        let sd = (m as f64 * 0.1 * 0.9).sqrt();
        for f in freq {
            assert!((f as f64 - expect).abs() <= 4.0 * sd, "{freq:?}");
        }
    }

    #[test]
    fn bounded_index_has_no_modulo_bias() {
        // With range = 3 * 2^62, modulo reduction maps a uniform u64 below
        // 2^62 with probability 1/2 instead of the correct 1/3.
        let range = 3u64 << 62;
        let mut rng = RngStream::new(5, 5).rng();
        let below = (0..20_000)
            .filter(|_| bounded_index(&mut rng, range) < 1u64 << 62)
            .count();
        let frac = below as f64 / 20_000.0;
        assert!((frac - 1.0 / 3.0).abs() < 0.02, "{frac}");
    }

    #[test]
    fn multinomial_moments() {
        let (total, cells, draws) = (6u64, 3usize, 100_000usize);
        let mut rng = RngStream::new(77, 0).rng();
        let mut fv = FrequencyVector::from_counts(vec![]);
        let mut sum = [0f64; 3];
        let mut sumsq = [0f64; 3];
        for _ in 0..draws {
            fill_multinomial(&mut fv, total, cells, &mut rng).unwrap();
            assert_eq!(fv.counts().iter().sum::<u64>(), total);
            assert_eq!(fv.len(), cells);
            for (k, &c) in fv.counts().iter().enumerate() {
                sum[k] += c as f64;
                sumsq[k] += (c * c) as f64;
            }
        }
        let var_theory = 6.0 * (1.0 / 3.0) * (2.0 / 3.0);
        for k in 0..cells {
            let mean = sum[k] / draws as f64;
            let var = sumsq[k] / draws as f64 - mean * mean;
            let se = (var_theory / draws as f64).sqrt();
            assert!((mean - 2.0).abs() < 3.0 * se, "cell {k} mean {mean}");
            assert!((var / var_theory - 1.0).abs() < 0.05, "cell {k} var {var}");
        }
    }

    #[test]
    fn two_cell_distribution_matches_binomial() {
        // Exact enumeration: P(f1 = k) = C(4,k) / 16.
        let probs = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0);
        let draws = 100_000;
        let mut rng = RngStream::new(3, 1).rng();
        let mut hist = [0f64; 5];
        for _ in 0..draws {
            let fv = multinomial_frequencies(4, 2, &mut rng).unwrap();
            hist[fv.counts()[0] as usize] += 1.0;
        }
        let chi2: f64 = hist
            .iter()
            .zip(probs)
            .map(|(&o, p)| {
                let e = p * draws as f64;
                (o - e).powi(2) / e
            })
            .sum();
        // chi-square, 4 degrees of freedom, 99th percentile
        assert!(chi2 < 13.277, "chi2 = {chi2}");
    }

    #[test]
    fn dense_multinomial_covariance() {
        // total/cells = 100 takes the Poisson path; both top-up and removal occur.
        let (total, cells, draws) = (1000u64, 10usize, 100_000usize);
        let mut rng = RngStream::new(78, 0).rng();
        let mut fv = FrequencyVector::from_counts(vec![]);
        let (mut s0, mut s1, mut s00, mut s01) = (0f64, 0f64, 0f64, 0f64);
        for _ in 0..draws {
            fill_multinomial(&mut fv, total, cells, &mut rng).unwrap();
            assert_eq!(fv.counts().iter().sum::<u64>(), total);
            let (a, b) = (fv.counts()[0] as f64, fv.counts()[1] as f64);
            s0 += a;
            s1 += b;
            s00 += a * a;
            s01 += a * b;
        }
        let d = draws as f64;
        let (m0, m1) = (s0 / d, s1 / d);
        let var = s00 / d - m0 * m0;
        let cov = s01 / d - m0 * m1;
        // Var = N p (1-p) = 90, Cov = -N p^2 = -10.
        assert!((m0 - 100.0).abs() < 3.0 * (90.0 / d).sqrt(), "{m0}");
        assert!((var / 90.0 - 1.0).abs() < 0.03, "{var}");
        assert!((cov + 10.0).abs() < 1.0, "{cov}");
    }
}
