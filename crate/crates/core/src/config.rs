//! Flat `key = value` run configuration.
//!
//! Every key has a default; unknown keys are rejected. `#` starts a comment.
//! [`RunConfig::to_text`] emits every key, so the effective configuration of
//! a run can be written next to its outputs and parsed back unchanged.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::analysis::Property;
use crate::dqn::DqnConfig;
use crate::embed::{Backend, EmbedConfig, WalkConfig};
use crate::error::{Error, Result};
use crate::sbm::SbmSpec;
use crate::victim::{Task, VictimConfig, VictimKind};

/// Comma-separated list value; the empty string is the empty list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("'{p}': {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl<T> From<Vec<T>> for List<T> {
    fn from(v: Vec<T>) -> Self {
        List(v)
    }
}

/// Where the graph comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetSource {
    Sbm,
    Files,
}

/// Which distortion the correlation study ranks candidates by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyDistortion {
    /// `δ̂` under the trained embedder.
    Embedding,
    /// Jaccard distance of k-hop neighborhoods.
    Neighborhood,
}

macro_rules! keyword_enum {
    ($ty:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$var => $s),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($s => Ok($ty::$var),)+
                    _ => Err(format!("expected one of {}", [$($s),+].join("|"))),
                }
            }
        }
    };
}

keyword_enum!(DatasetSource { Sbm => "sbm", Files => "files" });
keyword_enum!(StudyDistortion { Embedding => "embedding", Neighborhood => "neighborhood" });

macro_rules! run_config {
    ($( $(#[doc = $doc:literal])* $key:ident : $ty:ty = $default:expr ),+ $(,)?) => {
        /// Every knob of the pipeline.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $( $(#[doc = $doc])* pub $key: $ty, )+
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $( $key: $default, )+ }
            }
        }

        impl RunConfig {
            /// All recognized keys, in emission order.
            pub const KEYS: &'static [&'static str] = &[$( stringify!($key) ),+];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( stringify!($key) => {
                        self.$key = value.parse::<$ty>().map_err(|e| {
                            Error::Config(format!("{key} = '{value}': {e}"))
                        })?;
                    } )+
                    _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
                }
                Ok(())
            }

            /// Textual value of one key.
            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $( stringify!($key) => Some(self.$key.to_string()), )+
                    _ => None,
                }
            }

            /// One `key = value` line per key, with the key's doc as comment.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(
                    let doc: &[&str] = &[$($doc),*];
                    for line in doc {
                        s.push_str("#");
                        s.push_str(line);
                        s.push('\n');
                    }
                    s.push_str(&format!("{} = {}\n", stringify!($key), self.$key));
                )+
                s
            }
        }
    };
}

run_config! {
    /// Root seed; every stage derives its own stream from it.
    seed: u64 = 0,
    /// Output directory; NBATTACK_OUT_DIR overrides it.
    out_dir: String = "out".to_string(),
    /// `sbm` samples a synthetic graph, `files` loads the dataset_* paths.
    dataset: DatasetSource = DatasetSource::Sbm,
    /// Edge list (`u<TAB>v` per line) when dataset = files.
    dataset_edges: String = String::new(),
    /// Optional feature matrix, one whitespace-separated row per node.
    dataset_features: String = String::new(),
    /// Optional labels, one per line.
    dataset_labels: String = String::new(),
    /// SBM block sizes.
    sbm_blocks: List<usize> = List(vec![50, 50]),
    sbm_p_in: f64 = 0.3,
    sbm_p_out: f64 = 0.02,
    sbm_feature_dim: usize = 16,
    sbm_feature_on: f64 = 0.3,
    sbm_feature_noise: f64 = 0.1,

    /// Embedder architecture: gin or gcn.
    embed_backend: Backend = Backend::Gin,
    embed_layers: usize = 2,
    embed_hidden: usize = 16,
    embed_epochs: usize = 100,
    embed_learning_rate: f64 = 0.01,
    walk_length: usize = 20,
    walk_context: usize = 10,
    walks_per_node: usize = 10,
    walk_return_p: f64 = 1.0,
    walk_inout_q: f64 = 1.0,

    dqn_episodes: usize = 100,
    dqn_steps: usize = 10,
    dqn_n_step: usize = 2,
    dqn_gamma: f64 = 0.99,
    dqn_replay_capacity: usize = 5000,
    dqn_batch_size: usize = 32,
    dqn_target_fraction: f64 = 0.4,
    dqn_learning_rate: f64 = 0.01,
    /// Neighborhood radius for rewards, states and distortion.
    k: usize = 2,
    dqn_gcn_layers: usize = 2,
    dqn_gcn_hidden: usize = 16,
    dqn_mlp_hidden: usize = 16,
    dqn_epsilon_floor: f64 = 0.05,
    dqn_epsilon_decay: f64 = 0.9,

    /// Victim architectures: gcn, sage.
    victims: List<VictimKind> = List(vec![VictimKind::Gcn, VictimKind::Sage]),
    /// Victim tasks: nc, lp, pnc.
    tasks: List<Task> = List(vec![Task::Nc]),
    victim_layers: usize = 2,
    victim_hidden: usize = 16,
    victim_pair_dim: usize = 16,
    victim_epochs: usize = 200,
    victim_patience: usize = 30,
    victim_learning_rate: f64 = 0.01,

    /// Attackers compared by evaluate: dqn, random, degree, greedy, noop.
    attackers: List<String> = List(vec!["dqn".into(), "random".into(), "degree".into()]),
    budgets: List<usize> = List(vec![1, 5, 10, 20]),
    /// Test targets sampled per victim when `targets` is empty.
    target_count: usize = 20,
    /// Explicit target node ids for attack/evaluate/analyze/oracle.
    targets: List<usize> = List(Vec::new()),
    /// Worker threads; 0 uses the available parallelism.
    threads: usize = 0,

    /// Properties correlated with distortion (empty = all).
    properties: List<Property> = List(Vec::new()),
    analysis_distortion: StudyDistortion = StudyDistortion::Embedding,
    analysis_targets: usize = 10,
    community_size: usize = 50,
    /// Reverse k-NN neighbor count; 0 = min(100, n - 1).
    knn_k: usize = 0,
    /// Use the complement-volume normalized cut.
    ncs_corrected: bool = false,

    /// Targets of the greedy-vs-dqn comparison when `targets` is empty.
    oracle_targets: usize = 10,
    oracle_budget: usize = 5,
}

impl RunConfig {
    /// Parses `key = value` lines on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides such as those given on a command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn sbm_spec(&self) -> SbmSpec {
        SbmSpec {
            block_sizes: self.sbm_blocks.0.clone(),
            p_in: self.sbm_p_in,
            p_out: self.sbm_p_out,
            feature_dim: self.sbm_feature_dim,
            feature_on: self.sbm_feature_on,
            feature_noise: self.sbm_feature_noise,
        }
    }

    pub fn embed_config(&self) -> EmbedConfig {
        EmbedConfig {
            backend: self.embed_backend,
            layers: self.embed_layers,
            hidden_dim: self.embed_hidden,
            epochs: self.embed_epochs,
            walk: WalkConfig {
                walk_length: self.walk_length,
                context_size: self.walk_context,
                walks_per_node: self.walks_per_node,
                return_p: self.walk_return_p,
                inout_q: self.walk_inout_q,
            },
            learning_rate: self.embed_learning_rate,
        }
    }

    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            episodes: self.dqn_episodes,
            steps: self.dqn_steps,
            n_step: self.dqn_n_step,
            gamma: self.dqn_gamma,
            replay_capacity: self.dqn_replay_capacity,
            batch_size: self.dqn_batch_size,
            target_fraction: self.dqn_target_fraction,
            learning_rate: self.dqn_learning_rate,
            k: self.k,
            gcn_layers: self.dqn_gcn_layers,
            gcn_hidden: self.dqn_gcn_hidden,
            mlp_hidden: self.dqn_mlp_hidden,
            epsilon_floor: self.dqn_epsilon_floor,
            epsilon_decay: self.dqn_epsilon_decay,
        }
    }

    pub fn victim_config(&self, kind: VictimKind) -> VictimConfig {
        VictimConfig {
            kind,
            layers: self.victim_layers,
            hidden_dim: self.victim_hidden,
            pair_dim: self.victim_pair_dim,
            epochs: self.victim_epochs,
            patience: self.victim_patience,
            learning_rate: self.victim_learning_rate,
        }
    }

    /// Properties of the correlation study; the empty list means all.
    pub fn study_properties(&self) -> Vec<Property> {
        if self.properties.0.is_empty() {
            Property::ALL.to_vec()
        } else {
            self.properties.0.clone()
        }
    }

    /// Checks cross-field constraints that single-key parsing cannot.
    pub fn validate(&self) -> Result<()> {
        if self.dataset == DatasetSource::Files && self.dataset_edges.is_empty() {
            return Err(Error::Config("dataset = files requires dataset_edges".into()));
        }
        if self.dataset == DatasetSource::Sbm {
            self.sbm_spec().validate()?;
        }
        self.embed_config().walk.validate()?;
        self.dqn_config().validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        const ATTACKERS: [&str; 5] = ["dqn", "random", "degree", "greedy", "noop"];
        if let Some(a) = self.attackers.0.iter().find(|a| !ATTACKERS.contains(&a.as_str())) {
            return Err(Error::Config(format!("unknown attacker '{a}'")));
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_text(s)
    }
}
