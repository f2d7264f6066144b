//! One flat declarative config file, one table per subcommand. Every run
//! echoes the resolved config next to its outputs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Worker threads; overridden by ZK_THREADS, defaults to the available
    /// parallelism.
    pub threads: Option<usize>,
    /// Base seed; overridden by --seed.
    pub seed: Option<u64>,
    pub simulate: Option<SimulateConfig>,
    pub norms: Option<NormsConfig>,
    pub classify: Option<ClassifyCmdConfig>,
    #[serde(rename = "verify-lemma")]
    pub verify_lemma: Option<VerifyConfig>,
    pub counterexample: Option<CounterexampleConfig>,
    #[serde(rename = "random-experiment")]
    pub random_experiment: Option<RandomConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub xi_max: f64,
    pub n_x1: usize,
    pub k_max: usize,
    /// Gaussian bump parameters, used when no input dump is given.
    pub amplitude: f64,
    pub width: f64,
    /// Optional initial-data dump to load instead.
    pub input: Option<String>,
    pub t_end: f64,
    pub dt: f64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    /// Field (version 1) or trajectory (version 2) dump.
    pub input: String,
    pub s_list: Vec<f64>,
    /// Modulation exponent for space-time norms of trajectory dumps.
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyCmdConfig {
    /// "census" over sampled triples or "triple" for one configuration.
    pub mode: String,
    pub n_min: Option<f64>,
    pub samples: Option<usize>,
    /// Halving floor override (dyadic).
    pub beta: Option<f64>,
    /// Explicit triple for mode = "triple".
    pub nu: Option<f64>,
    pub k2: Option<i64>,
    pub zeta: Option<f64>,
    pub m2: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub samples: Option<usize>,
    /// Level-set sweep: profiles per scale and lambda values per profile.
    pub profiles: Option<usize>,
    pub lambdas: Option<usize>,
    pub delta: Option<f64>,
    /// Interaction-set configurations and Monte-Carlo points per each.
    pub configs: Option<usize>,
    pub points: Option<usize>,
    /// Bilinear draws and cloud resolution.
    pub draws: Option<usize>,
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub s_list: Vec<f64>,
    pub b: f64,
    pub delta: f64,
    pub c_mod: f64,
    pub n_list: Vec<f64>,
    pub n_quad: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    pub alpha: f64,
    pub k_truncs: Vec<i64>,
    pub seeds: u64,
    pub s: f64,
    pub t_end: f64,
    pub n_t: usize,
    /// Seeds for the variance-oracle comparison.
    pub variance_seeds: Option<u64>,
}
