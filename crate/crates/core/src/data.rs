use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One record: a scalar, or an `(x, y)` pair for bivariate statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Scalar(f64),
    Pair(f64, f64),
}

/// Column-major observations. Either a single `x` column or paired `x`/`y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Option<Vec<f64>>,
}

impl Dataset {
    pub fn scalar(x: Vec<f64>) -> Result<Self> {
        check_finite(&x, "x")?;
        Ok(Self { x, y: None })
    }

    pub fn paired(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "paired columns differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        check_finite(&x, "x")?;
        check_finite(&y, "y")?;
        Ok(Self { x, y: Some(y) })
    }

    /// Builds from records; all records must have the same arity.
    pub fn from_observations(obs: &[Observation]) -> Result<Self> {
        match obs.first() {
            None | Some(Observation::Scalar(_)) => {
                let x = obs
                    .iter()
                    .map(|o| match *o {
                        Observation::Scalar(v) => Ok(v),
                        Observation::Pair(..) => Err(Error::invalid("mixed record arity")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::scalar(x)
            }
            Some(Observation::Pair(..)) => {
                let mut x = Vec::with_capacity(obs.len());
                let mut y = Vec::with_capacity(obs.len());
                for o in obs {
                    match *o {
                        Observation::Pair(a, b) => {
                            x.push(a);
                            y.push(b);
                        }
                        Observation::Scalar(_) => return Err(Error::invalid("mixed record arity")),
                    }
                }
                Self::paired(x, y)
            }
        }
    }

    pub(crate) fn with_capacity(n: usize, paired: bool) -> Self {
        Self {
            x: Vec::with_capacity(n),
            y: paired.then(|| Vec::with_capacity(n)),
        }
    }

    pub(crate) fn clear(&mut self) {
        self.x.clear();
        if let Some(y) = &mut self.y {
            y.clear();
        }
    }

    pub(crate) fn push(&mut self, obs: Observation) {
        match (obs, &mut self.y) {
            (Observation::Scalar(v), None) => self.x.push(v),
            (Observation::Pair(a, b), Some(y)) => {
                self.x.push(a);
                y.push(b);
            }
            _ => panic!("record arity does not match dataset"),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_paired(&self) -> bool {
        self.y.is_some()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn get(&self, i: usize) -> Option<Observation> {
        let x = *self.x.get(i)?;
        Some(match &self.y {
            Some(y) => Observation::Pair(x, y[i]),
            None => Observation::Scalar(x),
        })
    }

    /// Records at `indices`, in order, duplicates allowed.
    pub fn gather(&self, indices: &[usize]) -> Result<Dataset> {
        let mut out = Dataset::with_capacity(indices.len(), self.is_paired());
        self.gather_into(indices, &mut out)?;
        Ok(out)
    }

    pub(crate) fn gather_into(&self, indices: &[usize], out: &mut Dataset) -> Result<()> {
        out.clear();
        let len = self.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= len) {
            return Err(Error::OutOfRange { index: bad, len });
        }
        out.x.extend(indices.iter().map(|&i| self.x[i]));
        if let (Some(src), Some(dst)) = (&self.y, &mut out.y) {
            dst.extend(indices.iter().map(|&i| src[i]));
        }
        Ok(())
    }

    /// Applies `f` to every value (both columns).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Dataset {
        Dataset {
            x: self.x.iter().map(|&v| f(v)).collect(),
            y: self.y.as_ref().map(|y| y.iter().map(|&v| f(v)).collect()),
        }
    }
}

fn check_finite(v: &[f64], name: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::invalid(format!("non-finite value in column {name} at {i}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gather_duplicates_and_order() {
        let d = Dataset::paired(vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]).unwrap();
        let g = d.gather(&[2, 0, 0]).unwrap();
        assert_eq!(g.x(), &[3.0, 1.0, 1.0]);
        assert_eq!(g.y().unwrap(), &[6.0, 4.0, 4.0]);
        assert!(matches!(d.gather(&[3]), Err(Error::OutOfRange { index: 3, len: 3 })));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Dataset::scalar(vec![1.0, f64::NAN]).is_err());
        assert!(Dataset::paired(vec![1.0], vec![f64::INFINITY]).is_err());
        assert!(Dataset::paired(vec![1.0], vec![]).is_err());
    }
}
