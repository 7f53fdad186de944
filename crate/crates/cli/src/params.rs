use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::InvalidConfig;

/// Flags shared by every subcommand. A `--config` JSON file may set any of
/// them (same names, kebab-case); flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Params {
    /// Neighbour counts, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub k: Option<Vec<u32>>,
    /// Side multiplier M of the square S (side M√k).
    #[arg(long = "m-param")]
    pub m_param: Option<u32>,
    /// Tiling refinement N (cells of side √k/N).
    #[arg(long = "n-param")]
    pub n_param: Option<u32>,
    /// Annulus weight threshold of the Type B check.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output path (`.json` for JSON, CSV otherwise; a directory for `plot`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event kinds: A, A', B, B' or `all`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub kind: Option<Vec<String>>,
    /// Expected point counts n of the connectivity squares.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n: Option<Vec<f64>>,
    /// Constants c of k = ⌊c ln n⌋.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub c: Option<Vec<f64>>,
    /// Annealing iterations per restart.
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub restarts: Option<u32>,
    /// Results file to plot.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

macro_rules! overlay {
    ($a:expr, $b:expr, $($f:ident),*) => {
        Params { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Params {
    /// Fields of `self` override those of `file`.
    pub fn over(self, file: Params) -> Params {
        overlay!(self, file, k, m_param, n_param, eps, trials, seed, workers, out, kind, n, c, iterations, restarts, input)
    }

    pub fn resolve(self, config: Option<&Path>) -> anyhow::Result<Params> {
        let Some(path) = config else { return Ok(self) };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file: Params = serde_json::from_str(&text)
            .map_err(|e| InvalidConfig(format!("config {}: {e}", path.display())))?;
        Ok(self.over(file))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn trials(&self, default: u64) -> u64 {
        self.trials.unwrap_or(default)
    }

    pub fn k_list(&self, default: &[u32]) -> Vec<u32> {
        self.k.clone().unwrap_or_else(|| default.to_vec())
    }

    /// The single `k` of commands that take one.
    pub fn single_k(&self, default: u32) -> anyhow::Result<u32> {
        match self.k.as_deref() {
            None => Ok(default),
            Some([k]) => Ok(*k),
            Some(ks) => Err(InvalidConfig(format!("expected one k, got {ks:?}")).into()),
        }
    }
}
