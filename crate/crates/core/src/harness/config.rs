use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{BoxDomain, KernelSpec};
use crate::partition::Partition;
use crate::synth::{NoiseModel, SyntheticTask};
use crate::theory::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Krls,
    Localized,
    Nystrom,
    LocalizedNystrom,
    DistributedAvg,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Krls,
        Estimator::Localized,
        Estimator::Nystrom,
        Estimator::LocalizedNystrom,
        Estimator::DistributedAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Krls => "krls",
            Estimator::Localized => "localized",
            Estimator::Nystrom => "nystrom",
            Estimator::LocalizedNystrom => "localized_nystrom",
            Estimator::DistributedAvg => "distributed_avg",
        }
    }

    pub fn uses_cells(self) -> bool {
        matches!(
            self,
            Estimator::Localized | Estimator::LocalizedNystrom | Estimator::DistributedAvg
        )
    }

    pub fn uses_landmarks(self) -> bool {
        matches!(self, Estimator::Nystrom | Estimator::LocalizedNystrom)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown estimator '{s}'")))
    }
}

/// Description of a synthetic task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Sobolev {
        r: f64,
        radius: f64,
        k_trunc: usize,
        noise: NoiseModel,
    },
    /// Equal-width cells on `[0, 1]`; cells listed in `exceptional` are rough.
    Piecewise {
        r_low: f64,
        r_high: f64,
        radius_low: f64,
        radius_high: f64,
        cells: usize,
        exceptional: Vec<usize>,
        k_trunc: usize,
        noise: NoiseModel,
    },
}

impl TaskConfig {
    pub fn build(&self) -> Result<SyntheticTask> {
        match self {
            TaskConfig::Sobolev {
                r,
                radius,
                k_trunc,
                noise,
            } => SyntheticTask::sobolev(*r, *radius, *k_trunc, noise.clone()),
            TaskConfig::Piecewise {
                r_low,
                r_high,
                radius_low,
                radius_high,
                cells,
                exceptional,
                k_trunc,
                noise,
            } => {
                let partition = Partition::intervals(0.0, 1.0, *cells)?;
                SyntheticTask::piecewise(
                    *r_low,
                    *r_high,
                    *radius_low,
                    *radius_high,
                    &partition,
                    exceptional,
                    *k_trunc,
                    noise.clone(),
                )
            }
        }
    }

    /// Cell structure of a piecewise task.
    pub fn partition(&self) -> Option<Result<Partition>> {
        match self {
            TaskConfig::Sobolev { .. } => None,
            TaskConfig::Piecewise { cells, .. } => Some(Partition::intervals(0.0, 1.0, *cells)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `n^{-1/(2r+1+γ)}`
    Pure,
    /// `(σ²/(R²n))^{1/(2r+1+γ)}`
    NoiseAdjusted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionRule {
    /// `m` equal cells with `m` from the schedule.
    Schedule,
    /// The cells of a piecewise task.
    Task,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `λ = lambda_scale · λ_n`, `m` and `l` from the schedules.
    Auto {
        lambda_scale: f64,
        lambda_rule: LambdaRule,
        partition_rule: PartitionRule,
    },
    /// One entry per grid point.
    Explicit {
        lambda: Vec<f64>,
        m: Vec<usize>,
        l: Vec<usize>,
    },
}

/// Kernel used on each cell by the partitioned estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalKernel {
    /// The global kernel, unchanged.
    Shared,
    /// The global kernel family restricted to the cell box; Brownian kernels
    /// are re-anchored at the lower corner of the cell.
    Anchored,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rate,
    ImprovedBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub task: TaskConfig,
    pub params: ModelParams,
    pub kernel: KernelSpec,
    pub local_kernel: LocalKernel,
    pub estimators: Vec<Estimator>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub schedule: ScheduleConfig,
    pub n_test: usize,
    pub master_seed: u64,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::contract("n_grid is empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("n_grid must be strictly ascending"));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::contract("sample sizes must be positive"));
        }
        if self.replications == 0 {
            return Err(Error::contract("replications must be at least 1"));
        }
        if self.n_test == 0 {
            return Err(Error::contract("n_test must be positive"));
        }
        if self.estimators.is_empty() {
            return Err(Error::contract("no estimators selected"));
        }
        let mut seen = self.estimators.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::contract("estimators are listed twice"));
        }
        self.params.validate()?;
        let unit = BoxDomain::unit(1);
        if self.kernel.domain() != &unit {
            return Err(Error::contract(
                "the estimator kernel must be defined on [0, 1]",
            ));
        }
        match &self.schedule {
            ScheduleConfig::Auto {
                lambda_scale,
                partition_rule,
                ..
            } => {
                if !(*lambda_scale > 0.0 && lambda_scale.is_finite()) {
                    return Err(Error::contract("lambda_scale must be positive"));
                }
                if *partition_rule == PartitionRule::Task && self.task.partition().is_none() {
                    return Err(Error::contract(
                        "partition_rule 'task' needs a piecewise task",
                    ));
                }
            }
            ScheduleConfig::Explicit { lambda, m, l } => {
                let k = self.n_grid.len();
                if lambda.len() != k || m.len() != k || l.len() != k {
                    return Err(Error::contract(
                        "explicit schedules need one entry per grid point",
                    ));
                }
                if lambda.iter().any(|v| !(*v > 0.0)) || m.contains(&0) || l.contains(&0) {
                    return Err(Error::contract(
                        "explicit schedule entries must be positive",
                    ));
                }
                if self.experiment == ExperimentKind::ImprovedBound {
                    return Err(Error::contract(
                        "the improved-bound experiment derives both schedules automatically",
                    ));
                }
            }
        }
        if self.experiment == ExperimentKind::ImprovedBound {
            if self.params.split_smoothness.is_none() {
                return Err(Error::contract(
                    "the improved-bound experiment needs split_smoothness",
                ));
            }
            if self.task.partition().is_none() {
                return Err(Error::contract(
                    "the improved-bound experiment needs a piecewise task",
                ));
            }
        }
        self.task.build()?;
        Ok(())
    }
}
