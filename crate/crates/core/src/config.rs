//! Run configuration: one TOML file with [space], [oracle], [predictor],
//! [search] and [hardware-profiles] sections drives every command.
//! Command-line flags override individual fields after loading.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::cost::{CostError, TechnologyProfile};
use crate::evolve::{CandidateEvaluator, EvalSettings, ObjectiveMode, SearchConfig, SearchError};
use crate::predictor::{
    one_hot_encode, train_predictor, AccuracySource, EncodedDesign, OracleParams, PredictorError,
    SyntheticOracle, TrainHyper, TrainedPredictor,
};
use crate::rng::{derived_seed, stream};
use crate::space::{SearchSpaceSpec, SpecError, ValueDistribution};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Profile(#[from] CostError),
    #[error("invalid config value: {0}")]
    Invalid(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Where the search gets its accuracy numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracySourceKind {
    /// Query the synthetic oracle directly.
    Oracle,
    /// Train the perceptron on oracle-labeled samples, then use it.
    Predictor,
}

#[derive(Debug, Clone)]
pub struct PredictorSettings {
    pub samples: usize,
    pub hyper: TrainHyper,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawOracle {
    ceiling: Option<f64>,
    amplitude: Option<f64>,
    capacity_scale: Option<f64>,
    precision_penalty: Option<f64>,
    precision_knee: Option<u32>,
    noise: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawPredictor {
    samples: Option<usize>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    source: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawSearch {
    population: Option<usize>,
    generations: Option<u32>,
    crossover_prob: Option<f64>,
    mutation_prob: Option<f64>,
    eta_c: Option<f64>,
    eta_m: Option<f64>,
    seed: Option<u64>,
    workers: Option<usize>,
    objective: Option<String>,
    area_constraint_mm2: Option<f64>,
    init_attempt_factor: Option<u64>,
    top_k: Option<usize>,
    histogram_samples: Option<usize>,
    activations: Option<String>,
    baseline_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawProfiles {
    profile: Option<String>,
    path: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawConfig {
    oracle: Option<RawOracle>,
    predictor: Option<RawPredictor>,
    search: Option<RawSearch>,
    #[serde(rename = "hardware-profiles")]
    profiles: Option<RawProfiles>,
}

/// Everything a run needs, validated.
#[derive(Clone)]
pub struct RunConfig {
    pub spec: Arc<SearchSpaceSpec>,
    pub oracle: OracleParams,
    pub predictor: PredictorSettings,
    pub accuracy_source: AccuracySourceKind,
    pub search: SearchConfig,
    pub profile: Arc<TechnologyProfile>,
    pub eval: EvalSettings,
    pub baseline_samples: usize,
}

pub fn parse_distribution(text: &str) -> Result<ValueDistribution, ConfigError> {
    match text {
        "uniform" => Ok(ValueDistribution::UniformNonneg),
        "half-gaussian" => Ok(ValueDistribution::HalfGaussian),
        other => match other.strip_prefix("constant:") {
            Some(v) => {
                let v: f64 = v
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("bad constant value {v:?}")))?;
                Ok(ValueDistribution::Constant(v))
            }
            None => Err(ConfigError::Invalid(format!(
                "unknown activations distribution {other:?}"
            ))),
        },
    }
}

/// Resolve a technology profile: a built-in name or a file path
/// (relative paths resolved against `base_dir`).
pub fn load_profile(
    name: Option<&str>,
    path: Option<&str>,
    base_dir: &Path,
) -> Result<TechnologyProfile, ConfigError> {
    if let Some(path) = path {
        let full = if Path::new(path).is_absolute() {
            PathBuf::from(path)
        } else {
            base_dir.join(path)
        };
        let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io {
            path: full,
            source,
        })?;
        return Ok(TechnologyProfile::parse(&text)?);
    }
    let name = name.unwrap_or("rram-32nm");
    TechnologyProfile::builtin(name)
        .ok_or_else(|| ConfigError::Invalid(format!("unknown built-in profile {name:?}")))
}

/// Parse a full run config from TOML text. `base_dir` anchors relative
/// profile paths (usually the config file's directory).
pub fn parse_run_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let spec = Arc::new(crate::space::load_spec_at(text, base_dir)?);
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let rs = raw.search.unwrap_or_default();
    let defaults = SearchConfig::default();
    let objective = match rs.objective.as_deref() {
        Some(text) => ObjectiveMode::parse(text).map_err(ConfigError::Invalid)?,
        None => defaults.objective,
    };
    let search = SearchConfig {
        population: rs.population.unwrap_or(defaults.population),
        generations: rs.generations.unwrap_or(defaults.generations),
        crossover_prob: rs.crossover_prob.unwrap_or(defaults.crossover_prob),
        mutation_prob: rs.mutation_prob.unwrap_or(defaults.mutation_prob),
        eta_c: rs.eta_c.unwrap_or(defaults.eta_c),
        eta_m: rs.eta_m.unwrap_or(defaults.eta_m),
        seed: rs.seed.unwrap_or(defaults.seed),
        workers: rs.workers.unwrap_or(defaults.workers),
        objective,
        area_constraint_mm2: rs.area_constraint_mm2.unwrap_or(defaults.area_constraint_mm2),
        init_attempt_factor: rs.init_attempt_factor.unwrap_or(defaults.init_attempt_factor),
        top_k: rs.top_k.unwrap_or(defaults.top_k),
    };
    search.validate()?;

    let ro = raw.oracle.unwrap_or_default();
    let od = OracleParams::default();
    let oracle = OracleParams {
        ceiling: ro.ceiling.unwrap_or(od.ceiling),
        amplitude: ro.amplitude.unwrap_or(od.amplitude),
        capacity_scale: ro.capacity_scale.unwrap_or(od.capacity_scale),
        penalty_per_bit: ro.precision_penalty.unwrap_or(od.penalty_per_bit),
        knee_bits: ro.precision_knee.unwrap_or(od.knee_bits),
        noise: ro.noise.unwrap_or(od.noise),
        seed: ro
            .seed
            .unwrap_or_else(|| derived_seed(search.seed, "oracle-noise")),
    };
    if !(oracle.ceiling > 0.0 && oracle.ceiling <= 100.0) {
        return Err(ConfigError::Invalid(
            "oracle ceiling must be in (0,100]".into(),
        ));
    }
    if !(oracle.capacity_scale > 0.0) || !(oracle.penalty_per_bit >= 0.0) {
        return Err(ConfigError::Invalid(
            "oracle capacity_scale must be positive and precision_penalty non-negative".into(),
        ));
    }

    let rp = raw.predictor.unwrap_or_default();
    let hd = TrainHyper::default();
    let predictor = PredictorSettings {
        samples: rp.samples.unwrap_or(5000),
        hyper: TrainHyper {
            learning_rate: rp.learning_rate.unwrap_or(hd.learning_rate),
            epochs: rp.epochs.unwrap_or(hd.epochs),
            batch_size: rp.batch_size.unwrap_or(hd.batch_size),
            seed: derived_seed(search.seed, "predictor-train"),
        },
    };
    let accuracy_source = match rp.source.as_deref() {
        None | Some("oracle") => AccuracySourceKind::Oracle,
        Some("predictor") => AccuracySourceKind::Predictor,
        Some(other) => {
            return Err(ConfigError::Invalid(format!(
                "unknown predictor source {other:?} (expected \"oracle\" or \"predictor\")"
            )))
        }
    };

    let rprof = raw.profiles.unwrap_or_default();
    let profile = Arc::new(load_profile(
        rprof.profile.as_deref(),
        rprof.path.as_deref(),
        base_dir,
    )?);

    let eval = EvalSettings {
        histogram_samples: rs.histogram_samples.unwrap_or(4096),
        distribution: parse_distribution(rs.activations.as_deref().unwrap_or("uniform"))?,
        value_seed: search.seed,
        input_resolution: spec.input_resolution,
    };
    if eval.histogram_samples == 0 {
        return Err(ConfigError::Invalid("histogram_samples must be >= 1".into()));
    }

    Ok(RunConfig {
        spec,
        oracle,
        predictor,
        accuracy_source,
        search,
        profile,
        eval,
        baseline_samples: rs.baseline_samples.unwrap_or(1000),
    })
}

/// Load a run config from a file.
pub fn load_run_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_run_config(&text, base)
}

/// Build the accuracy source the config asks for. The predictor variant
/// samples oracle-labeled designs and trains the perceptron first.
pub fn build_accuracy_source(cfg: &RunConfig) -> Result<Arc<dyn AccuracySource>, ConfigError> {
    match cfg.accuracy_source {
        AccuracySourceKind::Oracle => Ok(Arc::new(SyntheticOracle {
            params: cfg.oracle.clone(),
        })),
        AccuracySourceKind::Predictor => {
            let mut rng = stream(cfg.search.seed, "predictor-data");
            let samples: Vec<(EncodedDesign, f64)> = (0..cfg.predictor.samples)
                .map(|_| {
                    let d = cfg.spec.sample_uniform(&mut rng);
                    let acc = crate::predictor::oracle_accuracy(
                        &cfg.oracle,
                        &cfg.spec,
                        &d.model,
                        &d.quant,
                    );
                    Ok((one_hot_encode(&cfg.spec, &d.model, &d.quant)?, acc))
                })
                .collect::<Result<_, PredictorError>>()?;
            let model = train_predictor(&samples, cfg.predictor.hyper.clone())?;
            Ok(Arc::new(TrainedPredictor { model }))
        }
    }
}

/// Assemble the candidate evaluator for a run.
pub fn build_evaluator(cfg: &RunConfig) -> Result<CandidateEvaluator, ConfigError> {
    Ok(CandidateEvaluator {
        spec: cfg.spec.clone(),
        tech: cfg.profile.clone(),
        accuracy: build_accuracy_source(cfg)?,
        settings: cfg.eval,
    })
}
