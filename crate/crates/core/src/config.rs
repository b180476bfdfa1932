//! Everything needed to reproduce a single estimator run, as JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Execution, Hyperparams, Method};
use crate::experiments::Generator;
use crate::rng::RngStream;
use crate::source::{build_record_index, default_index_path, load_dataset, DataSource, DiskSource, Noise, TextFormat};
use crate::statistics::StatisticKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSpec {
    /// A delimited text file, sampled through its record index unless
    /// `in_memory` is set.
    File {
        path: PathBuf,
        #[serde(default)]
        format: TextFormat,
        #[serde(default)]
        index: Option<PathBuf>,
        #[serde(default)]
        in_memory: bool,
        #[serde(default)]
        noise: Option<Noise>,
    },
    /// Synthetic data drawn from stream 0 of `seed`.
    Generated {
        generator: Generator,
        #[serde(rename = "N")]
        big_n: usize,
        seed: u64,
    },
}

impl DataSpec {
    /// Opens the data, building a missing index for disk mode.
    pub fn open(&self) -> Result<DataSource> {
        match self {
            DataSpec::File { path, format, index, in_memory, noise } => {
                if *in_memory {
                    return Ok(DataSource::Memory(load_dataset(path, format, *noise)?));
                }
                let index_path = index.clone().unwrap_or_else(|| default_index_path(path));
                if !index_path.exists() {
                    build_record_index(path, format, Some(&index_path))?;
                }
                Ok(DataSource::Disk(DiskSource::open(path, &index_path)?.with_noise(*noise)))
            }
            DataSpec::Generated { generator, big_n, seed } => {
                Ok(DataSource::Memory(generator.generate(*big_n, RngStream::new(*seed, 0))?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSpec,
    pub statistic: StatisticKind,
    pub method: Method,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
    /// Calibration JSON used to plan (B, R), if any.
    #[serde(default)]
    pub calibration: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serialises")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}
