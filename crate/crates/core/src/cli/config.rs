//! JSON experiment configuration. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::divergence::ClampPolicy;
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, FlowDivergence, GridSpec, InitShape, KernelConfig, SinkhornConfig, TargetShape};
use crate::qr_drop::{ConsistencyKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum CommandName {
    #[serde(rename = "divergence")]
    Divergence,
    #[serde(rename = "flow")]
    Flow,
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "oracle-check")]
    OracleCheck,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Divergence => "divergence",
            Self::Flow => "flow",
            Self::Train => "train",
            Self::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub clamp_epsilon: Option<f64>,
    #[serde(default)]
    pub divergence: Option<DivergenceBlock>,
    #[serde(default)]
    pub flow: Option<FlowBlock>,
    #[serde(default)]
    pub train: Option<TrainBlock>,
    #[serde(default)]
    pub oracle: Option<OracleBlock>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn clamp(&self) -> Result<ClampPolicy> {
        self.clamp_epsilon.map_or(Ok(ClampPolicy::default()), ClampPolicy::new)
    }

    /// Resolves relative paths inside the config against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut self.output_dir {
            fix(d);
        }
        if let Some(DivergenceBlock { p_csv, q_csv, .. }) = &mut self.divergence {
            p_csv.iter_mut().chain(q_csv.iter_mut()).for_each(fix);
        }
        if let Some(TrainBlock {
            dataset: DatasetSpec::Csv { train, test, .. },
            ..
        }) = &mut self.train
        {
            fix(train);
            fix(test);
        }
    }
}

/// Two distributions given inline or as single-column CSV files.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceBlock {
    pub p: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub p_csv: Option<PathBuf>,
    pub q_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub shape: InitShape,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub shape: TargetShape,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_target_noise")]
    pub noise: f64,
}

fn default_n() -> usize {
    1000
}

fn default_target_noise() -> f64 {
    0.02
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowBlock {
    pub divergence: FlowDivergence,
    pub learning_rate: f64,
    pub iterations: usize,
    pub snapshot_every: usize,
    pub grid: GridSpec,
    pub sigma: f64,
    pub init: InitSpec,
    pub target: TargetSpec,
    pub sinkhorn: SinkhornConfig,
    pub record_wall_time: bool,
}

impl Default for FlowBlock {
    fn default() -> Self {
        let f = FlowConfig::default();
        Self {
            divergence: f.divergence,
            learning_rate: f.learning_rate,
            iterations: f.iterations,
            snapshot_every: f.snapshot_every,
            grid: f.grid,
            sigma: f.kernel.sigma,
            init: InitSpec {
                shape: InitShape::Star,
                n: default_n(),
                noise: 0.0,
            },
            target: TargetSpec {
                shape: TargetShape::Heart,
                n: default_n(),
                noise: default_target_noise(),
            },
            sinkhorn: f.sinkhorn,
            record_wall_time: false,
        }
    }
}

impl FlowBlock {
    pub fn flow_config(&self, seed: u64, clamp: ClampPolicy) -> Result<FlowConfig> {
        let cfg = FlowConfig {
            divergence: self.divergence,
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            grid: self.grid,
            kernel: KernelConfig::new(self.sigma)?,
            seed,
            snapshot_every: self.snapshot_every,
            sinkhorn: self.sinkhorn,
            clamp,
            record_wall_time: self.record_wall_time,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    TwoMoons {
        #[serde(default = "default_n")]
        n_train: usize,
        #[serde(default = "default_n")]
        n_test: usize,
        #[serde(default = "default_moons_noise")]
        noise: f64,
    },
    Rings {
        #[serde(default = "default_n")]
        n_train: usize,
        #[serde(default = "default_n")]
        n_test: usize,
        #[serde(default = "default_rings_noise")]
        noise: f64,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        classes: Option<usize>,
    },
}

fn default_moons_noise() -> f64 {
    0.3
}

fn default_rings_noise() -> f64 {
    0.1
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::TwoMoons {
            n_train: default_n(),
            n_test: default_n(),
            noise: default_moons_noise(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ConsistencySpec {
    One(ConsistencyKind),
    Sweep(Vec<ConsistencyKind>),
}

impl ConsistencySpec {
    pub fn kinds(&self) -> Vec<ConsistencyKind> {
        match self {
            Self::One(k) => vec![*k],
            Self::Sweep(v) => v.clone(),
        }
    }

    pub fn is_sweep(&self) -> bool {
        matches!(self, Self::Sweep(_))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainBlock {
    pub layer_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub beta: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub consistency: ConsistencySpec,
    pub dataset: DatasetSpec,
}

impl Default for TrainBlock {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            layer_widths: t.layer_widths,
            dropout_rate: t.dropout_rate,
            beta: t.beta,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            consistency: ConsistencySpec::One(t.consistency),
            dataset: DatasetSpec::default(),
        }
    }
}

impl TrainBlock {
    pub fn train_config(&self, kind: ConsistencyKind, seed: u64, clamp: ClampPolicy) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            layer_widths: self.layer_widths.clone(),
            dropout_rate: self.dropout_rate,
            beta: self.beta,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            consistency: kind,
            seed,
            clamp,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub dimension: usize,
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        assert!(ExperimentConfig::from_json(r#"{"command":"flow","bogus":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command":"flow","flow":{"lr":0.1}}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"command":"flow","flow":{"grid":{"bounds":[-1,1,-1,1],"resolution":16,"x":1}}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"command":"train","train":{"dataset":{"kind":"two_moons","nosie":0.1}}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(r#"{"command":"nope"}"#).is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(r#"{"command":"flow","flow":{}}"#).unwrap();
        let f = c.flow.unwrap();
        assert_eq!(f.iterations, 3000);
        assert_eq!(f.sigma, 0.3);
        assert_eq!(f.grid.resolution, 64);
        let c = ExperimentConfig::from_json(
            r#"{"command":"train","train":{"consistency":["none","qif"],"dataset":{"kind":"rings"}}}"#,
        )
        .unwrap();
        let t = c.train.unwrap();
        assert!(t.consistency.is_sweep());
        assert_eq!(t.consistency.kinds(), vec![ConsistencyKind::None, ConsistencyKind::Qif]);
        assert!(matches!(t.dataset, DatasetSpec::Rings { n_train: 1000, .. }));
    }

    #[test]
    fn clamp_epsilon_validated() {
        let c = ExperimentConfig::from_json(r#"{"command":"divergence","clamp_epsilon":0.5}"#).unwrap();
        assert!(c.clamp().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let mut c = ExperimentConfig::from_json(
            r#"{"command":"divergence","output_dir":"out","divergence":{"p_csv":"p.csv","q_csv":"/abs/q.csv"}}"#,
        )
        .unwrap();
        c.resolve_paths(Path::new("/base"));
        assert_eq!(c.output_dir.unwrap(), PathBuf::from("/base/out"));
        let d = c.divergence.unwrap();
        assert_eq!(d.p_csv.unwrap(), PathBuf::from("/base/p.csv"));
        assert_eq!(d.q_csv.unwrap(), PathBuf::from("/abs/q.csv"));
    }
}
