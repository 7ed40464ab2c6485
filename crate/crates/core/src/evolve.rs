//! The search core: feasibility-filtered initialization, the generational
//! evaluate / select / crossover / mutate loop, objective functions, the
//! deduplicating archive, final top-k selection, the diversity metric, and
//! the two staged comparison searchers plus the fixed baselines.
//!
//! Determinism contract: archives are a pure function of (seed, spec,
//! config, profiles). All random draws happen in the sequential
//! orchestrator; candidate evaluations are pure and merged in candidate
//! order, so the worker count never changes results.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{
    check_feasibility, compute_area, evaluate as evaluate_cost, map_network, CostError,
    HardwareMetrics, TechnologyProfile,
};
use crate::operators::{polynomial_mutation, sbx_crossover, GeneBounds, OperatorError};
use crate::predictor::{AccuracySource, PredictorError};
use crate::rng::{derived_seed, keyed_stream, stream, Stream};
use crate::space::{DesignPoint, GeneGroup, SearchSpaceSpec, ValueDistribution};
use crate::workload::{build_histogram, expand_model, synth_values, WorkloadError};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("accuracy must be positive to score a design")]
    ZeroAccuracy,
    #[error("priority objective needs a normalization anchor (no sample evaluated yet)")]
    UnsetAnchor,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Accuracy(#[from] PredictorError),
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("sampling exhausted after {attempts} attempts{context}: the space looks over-constrained")]
    ExhaustedSampling { attempts: u64, context: String },
    #[error("evaluation failed at generation {generation}, candidate {candidate}: {source}")]
    Evaluation {
        generation: u32,
        candidate: usize,
        source: EvalError,
    },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Exponents of the priority objective (E^a * D^b * A^c / Acc^d).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityWeights {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveMode {
    /// E(mJ) * D(ms) * A(mm^2) / Acc(%)
    EdapAcc,
    /// D(ns) / Acc(%)
    DelayAcc,
    /// E(mJ) * A(mm^2) / Acc(%)
    EnergyAreaAcc,
    /// Metrics normalized to the first evaluated sample of the run.
    Priority(PriorityWeights),
}

impl ObjectiveMode {
    pub fn parse(text: &str) -> Result<ObjectiveMode, String> {
        match text {
            "edap" => Ok(ObjectiveMode::EdapAcc),
            "delay" => Ok(ObjectiveMode::DelayAcc),
            "energy-area" => Ok(ObjectiveMode::EnergyAreaAcc),
            other => {
                let rest = other
                    .strip_prefix("priority:")
                    .ok_or_else(|| format!("unknown objective {other:?}"))?;
                let mut w = PriorityWeights {
                    a: 1.0,
                    b: 1.0,
                    c: 1.0,
                    d: 1.0,
                };
                for part in rest.split(',') {
                    let (key, value) = part
                        .split_once('=')
                        .ok_or_else(|| format!("bad priority term {part:?}"))?;
                    let value: f64 = value
                        .parse()
                        .map_err(|_| format!("bad priority value {value:?}"))?;
                    if !(0.0..=1.0).contains(&value) {
                        return Err(format!("priority coefficient {key}={value} outside [0,1]"));
                    }
                    match key.trim() {
                        "a" => w.a = value,
                        "b" => w.b = value,
                        "c" => w.c = value,
                        "d" => w.d = value,
                        other => return Err(format!("unknown priority coefficient {other:?}")),
                    }
                }
                Ok(ObjectiveMode::Priority(w))
            }
        }
    }

    pub fn key(&self) -> String {
        match self {
            ObjectiveMode::EdapAcc => "edap".into(),
            ObjectiveMode::DelayAcc => "delay".into(),
            ObjectiveMode::EnergyAreaAcc => "energy-area".into(),
            ObjectiveMode::Priority(w) => {
                format!("priority:a={},b={},c={},d={}", w.a, w.b, w.c, w.d)
            }
        }
    }
}

/// First-sample metrics the priority objective normalizes against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub energy_mj: f64,
    pub delay_us: f64,
    pub area_mm2: f64,
    pub accuracy: f64,
}

/// Objective plus its (possibly unset) normalization anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub mode: ObjectiveMode,
    pub anchor: Option<Anchor>,
}

impl ObjectiveSpec {
    pub fn new(mode: ObjectiveMode) -> ObjectiveSpec {
        ObjectiveSpec { mode, anchor: None }
    }
}

/// Search score; lower is better.
pub fn score(
    metrics: &HardwareMetrics,
    accuracy: f64,
    objective: &ObjectiveSpec,
) -> Result<f64, ScoreError> {
    if !(accuracy > 0.0) {
        return Err(ScoreError::ZeroAccuracy);
    }
    let e = metrics.energy_mj;
    let d_us = metrics.delay_us;
    let a = metrics.area_mm2;
    Ok(match objective.mode {
        ObjectiveMode::EdapAcc => e * (d_us / 1000.0) * a / accuracy,
        ObjectiveMode::DelayAcc => d_us * 1000.0 / accuracy,
        ObjectiveMode::EnergyAreaAcc => e * a / accuracy,
        ObjectiveMode::Priority(w) => {
            let anchor = objective.anchor.ok_or(ScoreError::UnsetAnchor)?;
            (e / anchor.energy_mj).powf(w.a) * (d_us / anchor.delay_us).powf(w.b)
                * (a / anchor.area_mm2).powf(w.c)
                / (accuracy / anchor.accuracy).powf(w.d)
        }
    })
}

/// What one stage of a (possibly staged) search minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageObjective {
    /// The configured objective.
    Full(ObjectiveMode),
    /// Maximize predicted accuracy (score = -Acc).
    AccuracyMax,
    /// The configured objective's hardware terms, accuracy dropped.
    HardwareOnly(ObjectiveMode),
    /// E / Acc.
    EnergyAccuracy,
}

fn stage_score(
    stage: StageObjective,
    metrics: &HardwareMetrics,
    accuracy: f64,
    anchor: Option<Anchor>,
) -> Result<f64, ScoreError> {
    match stage {
        StageObjective::Full(mode) => score(metrics, accuracy, &ObjectiveSpec { mode, anchor }),
        StageObjective::AccuracyMax => {
            if !(accuracy > 0.0) {
                return Err(ScoreError::ZeroAccuracy);
            }
            Ok(-accuracy)
        }
        StageObjective::HardwareOnly(mode) => Ok(match mode {
            // delay*area, delay-only, and area-only hardware focuses
            ObjectiveMode::EdapAcc | ObjectiveMode::Priority(_) => {
                (metrics.delay_us / 1000.0) * metrics.area_mm2
            }
            ObjectiveMode::DelayAcc => metrics.delay_us,
            ObjectiveMode::EnergyAreaAcc => metrics.area_mm2,
        }),
        StageObjective::EnergyAccuracy => {
            if !(accuracy > 0.0) {
                return Err(ScoreError::ZeroAccuracy);
            }
            Ok(metrics.energy_mj / accuracy)
        }
    }
}

/// Engine parameters; every field is explicit so runs are reproducible
/// from the manifest alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: u32,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    pub seed: u64,
    pub workers: usize,
    pub objective: ObjectiveMode,
    pub area_constraint_mm2: f64,
    /// Sampling gives up after `init_attempt_factor * population` draws.
    pub init_attempt_factor: u64,
    pub top_k: usize,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.population < 2 {
            return Err(SearchError::InvalidConfig("population must be >= 2".into()));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SearchError::InvalidConfig(format!(
                    "{name} must be within [0,1]"
                )));
            }
        }
        if !(self.eta_c > 0.0) || !(self.eta_m > 0.0) {
            return Err(SearchError::InvalidConfig(
                "distribution indices must be positive".into(),
            ));
        }
        if !(self.area_constraint_mm2 > 0.0) {
            return Err(SearchError::InvalidConfig(
                "area constraint must be positive".into(),
            ));
        }
        if self.workers == 0 {
            return Err(SearchError::InvalidConfig("workers must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 150,
            generations: 70,
            crossover_prob: 0.95,
            mutation_prob: 0.95,
            eta_c: 3.0,
            eta_m: 3.0,
            seed: 7,
            workers: 4,
            objective: ObjectiveMode::EdapAcc,
            area_constraint_mm2: 800.0,
            init_attempt_factor: 1000,
            top_k: 5,
        }
    }
}

/// Histogram generation knobs for candidate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub histogram_samples: usize,
    pub distribution: ValueDistribution,
    /// Root seed of the synth-values streams (derived per layer).
    pub value_seed: u64,
    pub input_resolution: u32,
}

/// One design's evaluation: hardware metrics plus predicted accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub metrics: HardwareMetrics,
    pub accuracy: f64,
}

/// Bundles everything needed to price a candidate. Evaluations are pure:
/// per-layer value streams are keyed by the layer's shape fingerprint, so
/// identical designs always see identical histograms regardless of
/// evaluation order or padding-slot values.
pub struct CandidateEvaluator {
    pub spec: Arc<SearchSpaceSpec>,
    pub tech: Arc<TechnologyProfile>,
    pub accuracy: Arc<dyn AccuracySource>,
    pub settings: EvalSettings,
}

impl CandidateEvaluator {
    pub fn evaluate(&self, design: &DesignPoint) -> Result<Evaluation, EvalError> {
        let layers = expand_model(
            &self.spec,
            &design.model,
            &design.quant,
            self.settings.input_resolution,
        )?;
        let mut histograms = Vec::with_capacity(layers.len());
        for layer in &layers {
            let mut rng = keyed_stream(
                self.settings.value_seed,
                "synth-values",
                layer.fingerprint(),
            );
            let values = synth_values(
                self.settings.distribution,
                self.settings.histogram_samples,
                &mut rng,
            );
            histograms.push(build_histogram(&values, layer.input_bits)?);
        }
        let metrics = evaluate_cost(design, &layers, &histograms, &self.tech)?;
        let accuracy = self
            .accuracy
            .accuracy(&self.spec, &design.model, &design.quant)?;
        Ok(Evaluation { metrics, accuracy })
    }

    /// Cheap feasibility gate (capacity fit and area constraint) used by
    /// sampling and offspring filtering; no histograms or accuracy.
    pub fn quick_feasible(
        &self,
        design: &DesignPoint,
        area_constraint_mm2: f64,
    ) -> Result<bool, EvalError> {
        let layers = expand_model(
            &self.spec,
            &design.model,
            &design.quant,
            self.settings.input_resolution,
        )?;
        let mapping = map_network(&layers, &design.hardware);
        let fits = check_feasibility(&mapping, &design.hardware, design.hardware.execution_mode);
        Ok(fits && compute_area(&design.hardware, &self.tech) <= area_constraint_mm2)
    }
}

/// One evaluated design in the archive.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub design: DesignPoint,
    pub metrics: HardwareMetrics,
    pub accuracy: f64,
    pub score: f64,
    pub generation: u32,
    /// Capacity fit and area constraint both satisfied.
    pub feasible: bool,
    /// How many times this encoding was requested.
    pub hits: u32,
}

/// Per-generation convergence statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_score: f64,
    pub mean_score: f64,
    pub feasible_fraction: f64,
}

/// Full history of a run; entries are immutable once inserted and appear
/// once per distinct encoding with a hit counter.
#[derive(Debug)]
pub struct Archive {
    pub entries: Vec<ArchiveEntry>,
    pub anchor: Option<Anchor>,
    /// Rejected draws during initial sampling.
    pub rejections: u64,
    pub convergence: Vec<GenerationStats>,
    index: HashMap<Vec<u32>, usize>,
}

impl Archive {
    fn new() -> Archive {
        Archive {
            entries: Vec::new(),
            anchor: None,
            rejections: 0,
            convergence: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn lookup(&self, encoding: &[u32]) -> Option<&ArchiveEntry> {
        self.index.get(encoding).map(|&i| &self.entries[i])
    }

    #[cfg(test)]
    pub(crate) fn new_for_tests() -> Archive {
        Archive::new()
    }

    #[cfg(test)]
    pub(crate) fn push_for_tests(&mut self, entry: ArchiveEntry) {
        self.index
            .insert(entry.design.encoding.clone(), self.entries.len());
        self.entries.push(entry);
    }

    /// Best feasible entry by stored score, ties to earlier insertion.
    pub fn best(&self) -> Option<&ArchiveEntry> {
        let mut best: Option<(f64, u32, usize)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if !e.feasible {
                continue;
            }
            let key = (e.score, e.generation, i);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        best.map(|(_, _, i)| &self.entries[i])
    }
}

/// Ranked feasible entries; `truncated` flags k exceeding what exists.
pub struct TopK<'a> {
    pub entries: Vec<&'a ArchiveEntry>,
    pub truncated: bool,
}

/// Globally rank feasible archive entries under `objective`, stable
/// tie-break by (generation, insertion order).
pub fn select_top_k<'a>(
    archive: &'a Archive,
    objective: &ObjectiveSpec,
    k: usize,
) -> Result<TopK<'a>, ScoreError> {
    let objective = ObjectiveSpec {
        mode: objective.mode,
        anchor: objective.anchor.or(archive.anchor),
    };
    let mut ranked: Vec<(f64, u32, usize)> = Vec::new();
    for (i, entry) in archive.entries.iter().enumerate() {
        if !entry.feasible {
            continue;
        }
        ranked.push((
            score(&entry.metrics, entry.accuracy, &objective)?,
            entry.generation,
            i,
        ));
    }
    ranked.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let truncated = k > ranked.len();
    Ok(TopK {
        entries: ranked
            .iter()
            .take(k)
            .map(|&(_, _, i)| &archive.entries[i])
            .collect(),
        truncated,
    })
}

/// Mean pairwise normalized Hamming distance over gene index vectors;
/// 0 for fewer than two designs.
pub fn diversity(designs: &[&DesignPoint]) -> f64 {
    if designs.len() < 2 {
        return 0.0;
    }
    let genes = designs[0].encoding.len() as f64;
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..designs.len() {
        for j in (i + 1)..designs.len() {
            let differing = designs[i]
                .encoding
                .iter()
                .zip(&designs[j].encoding)
                .filter(|(a, b)| a != b)
                .count();
            total += differing as f64 / genes;
            pairs += 1.0;
        }
    }
    total / pairs
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

/// Which genes a (stage of a) search may vary; frozen genes are pinned to
/// a base encoding.
#[derive(Debug, Clone)]
pub struct GeneMask {
    pub active: Vec<bool>,
}

impl GeneMask {
    pub fn all(spec: &SearchSpaceSpec) -> GeneMask {
        GeneMask {
            active: vec![true; spec.gene_count()],
        }
    }

    pub fn by_groups(spec: &SearchSpaceSpec, groups: &[GeneGroup]) -> GeneMask {
        GeneMask {
            active: spec
                .schema()
                .genes
                .iter()
                .map(|g| groups.contains(&g.group))
                .collect(),
        }
    }
}

fn masked_bounds(spec: &SearchSpaceSpec, mask: &GeneMask, base: &[u32]) -> Vec<GeneBounds> {
    spec.schema()
        .genes
        .iter()
        .zip(&mask.active)
        .zip(base)
        .map(|((gene, &active), &b)| {
            if active {
                (0, gene.choices as u32 - 1)
            } else {
                (b, b)
            }
        })
        .collect()
}

fn sample_masked(
    spec: &SearchSpaceSpec,
    mask: &GeneMask,
    base: &[u32],
    rng: &mut Stream,
) -> DesignPoint {
    let encoding: Vec<u32> = spec
        .schema()
        .genes
        .iter()
        .zip(&mask.active)
        .zip(base)
        .map(|((gene, &active), &b)| {
            if active {
                rng.random_range(0..gene.choices as u32)
            } else {
                b
            }
        })
        .collect();
    spec.decode(&encoding).expect("masked sample is in range")
}

struct Engine<'a> {
    spec: &'a SearchSpaceSpec,
    cfg: &'a SearchConfig,
    evaluator: &'a CandidateEvaluator,
    stage: StageObjective,
    mask: GeneMask,
    base: Vec<u32>,
    bounds: Vec<GeneBounds>,
    /// When false the feasibility gate is skipped (pure software stage).
    constrained: bool,
    pool: rayon::ThreadPool,
    context: &'static str,
}

impl<'a> Engine<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        spec: &'a SearchSpaceSpec,
        cfg: &'a SearchConfig,
        evaluator: &'a CandidateEvaluator,
        stage: StageObjective,
        mask: GeneMask,
        base: Vec<u32>,
        constrained: bool,
        context: &'static str,
    ) -> Result<Engine<'a>, SearchError> {
        cfg.validate()?;
        let bounds = masked_bounds(spec, &mask, &base);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| SearchError::Pool(e.to_string()))?;
        Ok(Engine {
            spec,
            cfg,
            evaluator,
            stage,
            mask,
            base,
            bounds,
            constrained,
            pool,
            context,
        })
    }

    fn admit(&self, design: &DesignPoint, generation: u32) -> Result<bool, SearchError> {
        if !self.constrained {
            return Ok(true);
        }
        self.evaluator
            .quick_feasible(design, self.cfg.area_constraint_mm2)
            .map_err(|source| SearchError::Evaluation {
                generation,
                candidate: 0,
                source,
            })
    }

    /// Evaluate candidates in order, serving duplicates from the archive.
    /// Returns archive indices, one per candidate.
    fn evaluate_batch(
        &self,
        archive: &mut Archive,
        candidates: Vec<DesignPoint>,
        generation: u32,
    ) -> Result<Vec<usize>, SearchError> {
        let mut fresh: Vec<DesignPoint> = Vec::new();
        let mut seen: HashMap<Vec<u32>, ()> = HashMap::new();
        for design in &candidates {
            if !archive.index.contains_key(&design.encoding)
                && !seen.contains_key(&design.encoding)
            {
                seen.insert(design.encoding.clone(), ());
                fresh.push(design.clone());
            }
        }

        let results: Vec<Result<Evaluation, EvalError>> = self
            .pool
            .install(|| fresh.par_iter().map(|d| self.evaluator.evaluate(d)).collect());

        for (i, (design, result)) in fresh.into_iter().zip(results).enumerate() {
            let evaluation = result.map_err(|source| SearchError::Evaluation {
                generation,
                candidate: i,
                source,
            })?;
            if archive.anchor.is_none() {
                archive.anchor = Some(Anchor {
                    energy_mj: evaluation.metrics.energy_mj,
                    delay_us: evaluation.metrics.delay_us,
                    area_mm2: evaluation.metrics.area_mm2,
                    accuracy: evaluation.accuracy,
                });
            }
            let entry_score = stage_score(
                self.stage,
                &evaluation.metrics,
                evaluation.accuracy,
                archive.anchor,
            )?;
            let feasible = evaluation.metrics.feasible
                && evaluation.metrics.area_mm2 <= self.cfg.area_constraint_mm2;
            let index = archive.entries.len();
            archive.index.insert(design.encoding.clone(), index);
            archive.entries.push(ArchiveEntry {
                design,
                metrics: evaluation.metrics,
                accuracy: evaluation.accuracy,
                score: entry_score,
                generation,
                feasible,
                hits: 0,
            });
        }

        let mut out = Vec::with_capacity(candidates.len());
        for design in &candidates {
            let idx = archive.index[&design.encoding];
            archive.entries[idx].hits += 1;
            out.push(idx);
        }
        Ok(out)
    }

    fn record_stats(
        &self,
        archive: &mut Archive,
        generation: u32,
        population: &[usize],
        feasible_fraction: f64,
    ) {
        let scores: Vec<f64> = population
            .iter()
            .map(|&i| archive.entries[i].score)
            .collect();
        let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        archive.convergence.push(GenerationStats {
            generation,
            best_score: best,
            mean_score: mean,
            feasible_fraction,
        });
    }

    fn run(&self) -> Result<Archive, SearchError> {
        let mut archive = Archive::new();
        let p = self.cfg.population;
        let mut sampling = stream(self.cfg.seed, "sampling");
        let mut crossover_rng = stream(self.cfg.seed, "crossover");
        let mut mutation_rng = stream(self.cfg.seed, "mutation");

        // initial population: rejection-sample admissible designs
        let cap = self.cfg.init_attempt_factor.max(1) * p as u64;
        let mut initial: Vec<DesignPoint> = Vec::with_capacity(p);
        let mut attempts = 0u64;
        while initial.len() < p {
            if attempts >= cap {
                return Err(SearchError::ExhaustedSampling {
                    attempts,
                    context: self.context.to_string(),
                });
            }
            attempts += 1;
            let design = sample_masked(self.spec, &self.mask, &self.base, &mut sampling);
            if self.admit(&design, 0)? {
                initial.push(design);
            }
        }
        archive.rejections = attempts - p as u64;

        let mut population = self.evaluate_batch(&mut archive, initial, 0)?;
        self.record_stats(&mut archive, 0, &population, p as f64 / attempts as f64);

        for generation in 1..=self.cfg.generations {
            // elitist truncation: best half become parents
            population.sort_by(|&x, &y| {
                let (a, b) = (&archive.entries[x], &archive.entries[y]);
                a.score
                    .partial_cmp(&b.score)
                    .unwrap()
                    .then(a.generation.cmp(&b.generation))
                    .then(x.cmp(&y))
            });
            let parents: Vec<usize> = population[..(p / 2).max(1)].to_vec();

            let needed = p - parents.len();
            let mut offspring: Vec<DesignPoint> = Vec::with_capacity(needed);
            let mut kept = 0u64;
            let mut discarded = 0u64;
            let mut attempts = 0u64;
            let attempt_cap = self.cfg.init_attempt_factor.max(1) * p as u64;
            while offspring.len() < needed {
                if attempts >= attempt_cap {
                    // pathological space: pad with parent copies
                    while offspring.len() < needed {
                        let pick = crossover_rng.random_range(0..parents.len());
                        offspring.push(archive.entries[parents[pick]].design.clone());
                    }
                    break;
                }
                attempts += 1;
                let ia = crossover_rng.random_range(0..parents.len());
                let mut ib = crossover_rng.random_range(0..parents.len());
                if parents.len() > 1 {
                    while ib == ia {
                        ib = crossover_rng.random_range(0..parents.len());
                    }
                }
                let pa = &archive.entries[parents[ia]].design.encoding;
                let pb = &archive.entries[parents[ib]].design.encoding;
                let (ca, cb) = sbx_crossover(
                    pa,
                    pb,
                    &self.bounds,
                    self.cfg.eta_c,
                    self.cfg.crossover_prob,
                    &mut crossover_rng,
                )?;
                for child in [ca, cb] {
                    if offspring.len() >= needed {
                        break;
                    }
                    let mutated = polynomial_mutation(
                        &child,
                        &self.bounds,
                        self.cfg.eta_m,
                        self.cfg.mutation_prob,
                        &mut mutation_rng,
                    );
                    let design = self
                        .spec
                        .decode(&mutated)
                        .expect("operators keep indices in range");
                    if self.admit(&design, generation)? {
                        kept += 1;
                        offspring.push(design);
                        continue;
                    }
                    // infeasible offspring are discarded; the replacement is
                    // a fresh mutation of a feasible parent
                    discarded += 1;
                    let pick = mutation_rng.random_range(0..parents.len());
                    let base = &archive.entries[parents[pick]].design.encoding;
                    let fresh = polynomial_mutation(
                        base,
                        &self.bounds,
                        self.cfg.eta_m,
                        self.cfg.mutation_prob,
                        &mut mutation_rng,
                    );
                    let fresh_design = self
                        .spec
                        .decode(&fresh)
                        .expect("operators keep indices in range");
                    if self.admit(&fresh_design, generation)? {
                        kept += 1;
                        offspring.push(fresh_design);
                    } else {
                        discarded += 1;
                    }
                }
            }

            let offspring_indices = self.evaluate_batch(&mut archive, offspring, generation)?;
            population = parents;
            population.extend(offspring_indices);
            let fraction = if kept + discarded == 0 {
                1.0
            } else {
                kept as f64 / (kept + discarded) as f64
            };
            self.record_stats(&mut archive, generation, &population, fraction);
        }

        Ok(archive)
    }
}

/// Best entry encoding by stored score; optionally restricted to entries
/// satisfying the constraints.
fn best_encoding(archive: &Archive, feasible_only: bool) -> Option<Vec<u32>> {
    let mut best: Option<(f64, u32, usize)> = None;
    for (i, e) in archive.entries.iter().enumerate() {
        if feasible_only && !e.feasible {
            continue;
        }
        let key = (e.score, e.generation, i);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    best.map(|(_, _, i)| archive.entries[i].design.encoding.clone())
}

/// The joint search over all genes.
pub fn run_search(
    spec: &SearchSpaceSpec,
    cfg: &SearchConfig,
    evaluator: &CandidateEvaluator,
) -> Result<Archive, SearchError> {
    Engine::new(
        spec,
        cfg,
        evaluator,
        StageObjective::Full(cfg.objective),
        GeneMask::all(spec),
        spec.median_encoding(),
        true,
        "",
    )?
    .run()
}

fn stage_config(cfg: &SearchConfig, generations: u32, seed: u64) -> SearchConfig {
    SearchConfig {
        generations,
        seed,
        ..cfg.clone()
    }
}

/// Accuracy-first staged comparison: stage 1 maximizes predicted accuracy
/// over model+quant genes with hardware pinned to the median config and no
/// hardware feasibility pressure; stage 2 freezes the winner and searches
/// hardware genes for the configured objective under the constraints.
pub fn run_two_stage(
    spec: &SearchSpaceSpec,
    cfg: &SearchConfig,
    evaluator: &CandidateEvaluator,
) -> Result<Archive, SearchError> {
    cfg.validate()?;
    let g1 = cfg.generations / 2;
    let g2 = cfg.generations - g1;

    let mask1 = GeneMask::by_groups(spec, &[GeneGroup::Model, GeneGroup::Quant]);
    let cfg1 = stage_config(cfg, g1, derived_seed(cfg.seed, "two-stage.stage1"));
    let archive1 = Engine::new(
        spec,
        &cfg1,
        evaluator,
        StageObjective::AccuracyMax,
        mask1,
        spec.median_encoding(),
        false,
        " (two-stage search, stage 1: accuracy)",
    )?
    .run()?;
    let winner = best_encoding(&archive1, false).ok_or(SearchError::ExhaustedSampling {
        attempts: 0,
        context: " (two-stage search, stage 1 produced no design)".into(),
    })?;

    let mask2 = GeneMask::by_groups(spec, &[GeneGroup::Hardware]);
    let cfg2 = stage_config(cfg, g2, derived_seed(cfg.seed, "two-stage.stage2"));
    Engine::new(
        spec,
        &cfg2,
        evaluator,
        StageObjective::Full(cfg.objective),
        mask2,
        winner,
        true,
        " (two-stage search, stage 2: hardware under the area constraint)",
    )?
    .run()
}

/// Hardware-first staged comparison: stage 1 searches model+hardware genes
/// for the objective's hardware terms with quantization frozen to the
/// median; stage 2 freezes those and tunes quantization for accuracy (and
/// energy where the objective includes it).
pub fn run_xpert_like(
    spec: &SearchSpaceSpec,
    cfg: &SearchConfig,
    evaluator: &CandidateEvaluator,
) -> Result<Archive, SearchError> {
    cfg.validate()?;
    let g1 = cfg.generations / 2;
    let g2 = cfg.generations - g1;

    let mask1 = GeneMask::by_groups(spec, &[GeneGroup::Model, GeneGroup::Hardware]);
    let cfg1 = stage_config(cfg, g1, derived_seed(cfg.seed, "xpert.stage1"));
    let archive1 = Engine::new(
        spec,
        &cfg1,
        evaluator,
        StageObjective::HardwareOnly(cfg.objective),
        mask1,
        spec.median_encoding(),
        true,
        " (hardware-first search, stage 1)",
    )?
    .run()?;
    let winner = best_encoding(&archive1, true).ok_or(SearchError::ExhaustedSampling {
        attempts: 0,
        context: " (hardware-first search, stage 1 produced no feasible design)".into(),
    })?;

    let stage2 = match cfg.objective {
        ObjectiveMode::DelayAcc => StageObjective::AccuracyMax,
        _ => StageObjective::EnergyAccuracy,
    };
    let mask2 = GeneMask::by_groups(spec, &[GeneGroup::Quant]);
    let cfg2 = stage_config(cfg, g2, derived_seed(cfg.seed, "xpert.stage2"));
    Engine::new(
        spec,
        &cfg2,
        evaluator,
        stage2,
        mask2,
        winner,
        true,
        " (hardware-first search, stage 2: quantization)",
    )?
    .run()
}

/// The median-hardware baseline design: the fixed reference network on the
/// per-gene median hardware configuration.
pub fn median_baseline_design(spec: &SearchSpaceSpec) -> DesignPoint {
    let (model, quant) = spec.reference_model();
    spec.design_from_parts(model, quant, spec.median_hardware())
        .expect("reference model uses listed choices")
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub design: DesignPoint,
    pub metrics: HardwareMetrics,
    pub accuracy: f64,
}

/// Mean per-sample metrics over randomly drawn memory-feasible hardware
/// configs; every column (including EDAP and the score) is averaged per
/// sample, never recomposed from averaged factors.
#[derive(Debug, Clone, Copy)]
pub struct RandomBaseline {
    pub samples: usize,
    pub energy_mj: f64,
    pub delay_us: f64,
    pub area_mm2: f64,
    pub edap: f64,
    pub tops_per_w: f64,
    pub tops_per_mm2: f64,
    pub utilization: f64,
    pub accuracy: f64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct Baselines {
    pub median: BaselineResult,
    pub random: RandomBaseline,
}

/// Baseline 1 (median hardware) and Baseline 2 (mean over `samples` random
/// hardware configs, same fixed network). Random draws are filtered by the
/// capacity test only; the area constraint does not apply to baselines.
pub fn baselines(
    spec: &SearchSpaceSpec,
    evaluator: &CandidateEvaluator,
    objective: &ObjectiveSpec,
    seed: u64,
    samples: usize,
) -> Result<Baselines, SearchError> {
    let median_design = median_baseline_design(spec);
    let median_eval = evaluator
        .evaluate(&median_design)
        .map_err(|source| SearchError::Evaluation {
            generation: 0,
            candidate: 0,
            source,
        })?;

    let (model, quant) = spec.reference_model();
    let mut rng = stream(seed, "baseline-sampling");
    let hw_mask = GeneMask::by_groups(spec, &[GeneGroup::Hardware]);
    let base = median_design.encoding.clone();

    let mut acc = RandomBaseline {
        samples,
        energy_mj: 0.0,
        delay_us: 0.0,
        area_mm2: 0.0,
        edap: 0.0,
        tops_per_w: 0.0,
        tops_per_mm2: 0.0,
        utilization: 0.0,
        accuracy: 0.0,
        score: 0.0,
    };
    let mut drawn = 0usize;
    let mut attempts = 0u64;
    let cap = 1000 * samples as u64;
    while drawn < samples {
        if attempts >= cap {
            return Err(SearchError::ExhaustedSampling {
                attempts,
                context: " (random baseline)".into(),
            });
        }
        attempts += 1;
        let candidate = sample_masked(spec, &hw_mask, &base, &mut rng);
        let design = spec
            .design_from_parts(model.clone(), quant.clone(), candidate.hardware.clone())
            .expect("reference model uses listed choices");
        let evaluation = evaluator
            .evaluate(&design)
            .map_err(|source| SearchError::Evaluation {
                generation: 0,
                candidate: drawn,
                source,
            })?;
        if !evaluation.metrics.feasible {
            continue;
        }
        drawn += 1;
        let m = evaluation.metrics;
        acc.energy_mj += m.energy_mj;
        acc.delay_us += m.delay_us;
        acc.area_mm2 += m.area_mm2;
        acc.edap += m.edap;
        acc.tops_per_w += m.tops_per_w;
        acc.tops_per_mm2 += m.tops_per_mm2;
        acc.utilization += m.utilization;
        acc.accuracy += evaluation.accuracy;
        acc.score += score(&m, evaluation.accuracy, objective)?;
    }
    let n = samples as f64;
    Ok(Baselines {
        median: BaselineResult {
            design: median_design,
            metrics: median_eval.metrics,
            accuracy: median_eval.accuracy,
        },
        random: RandomBaseline {
            samples,
            energy_mj: acc.energy_mj / n,
            delay_us: acc.delay_us / n,
            area_mm2: acc.area_mm2 / n,
            edap: acc.edap / n,
            tops_per_w: acc.tops_per_w / n,
            tops_per_mm2: acc.tops_per_mm2 / n,
            utilization: acc.utilization / n,
            accuracy: acc.accuracy / n,
            score: acc.score / n,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{OracleParams, SyntheticOracle};
    use crate::testutil::{localize_spec_text, tiny_spec, TINY_SPEC};

    fn tiny_evaluator(spec: Arc<SearchSpaceSpec>) -> CandidateEvaluator {
        CandidateEvaluator {
            spec: spec.clone(),
            tech: Arc::new(TechnologyProfile::builtin("rram-32nm").unwrap()),
            accuracy: Arc::new(SyntheticOracle {
                params: OracleParams {
                    capacity_scale: 100.0,
                    amplitude: 6.0,
                    penalty_per_bit: 0.05,
                    noise: 0.02,
                    ..OracleParams::default()
                },
            }),
            settings: EvalSettings {
                histogram_samples: 256,
                distribution: ValueDistribution::UniformNonneg,
                value_seed: 7,
                input_resolution: 32,
            },
        }
    }

    fn tiny_config() -> SearchConfig {
        SearchConfig {
            population: 12,
            generations: 8,
            workers: 2,
            area_constraint_mm2: 200.0,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn score_matches_reported_identities() {
        // published metric triples and their printed scores
        let b1 = HardwareMetrics::from_eda(0.95, 6.94, 3691.0);
        let edap_acc = score(&b1, 73.00, &ObjectiveSpec::new(ObjectiveMode::EdapAcc)).unwrap();
        assert!((edap_acc - 0.334).abs() < 0.002, "{edap_acc}");
        let delay_acc = score(&b1, 73.00, &ObjectiveSpec::new(ObjectiveMode::DelayAcc)).unwrap();
        assert!((delay_acc - 95.1).abs() < 0.05, "{delay_acc}");
        let ea_acc =
            score(&b1, 73.00, &ObjectiveSpec::new(ObjectiveMode::EnergyAreaAcc)).unwrap();
        assert!((ea_acc - 48.02).abs() < 0.1, "{ea_acc}");

        let fast = HardwareMetrics::from_eda(0.30, 1.47, 467.0);
        let d = score(&fast, 73.71, &ObjectiveSpec::new(ObjectiveMode::DelayAcc)).unwrap();
        assert!((d - 19.9).abs() < 0.05, "{d}");
    }

    #[test]
    fn score_error_paths() {
        let m = HardwareMetrics::from_eda(1.0, 1.0, 1.0);
        assert!(matches!(
            score(&m, 0.0, &ObjectiveSpec::new(ObjectiveMode::EdapAcc)),
            Err(ScoreError::ZeroAccuracy)
        ));
        let w = PriorityWeights {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
        };
        assert!(matches!(
            score(&m, 70.0, &ObjectiveSpec::new(ObjectiveMode::Priority(w))),
            Err(ScoreError::UnsetAnchor)
        ));
    }

    #[test]
    fn objective_parsing_round_trips() {
        assert_eq!(ObjectiveMode::parse("edap").unwrap(), ObjectiveMode::EdapAcc);
        assert_eq!(
            ObjectiveMode::parse("delay").unwrap(),
            ObjectiveMode::DelayAcc
        );
        let p = ObjectiveMode::parse("priority:a=0.3,b=0.3,c=1,d=1").unwrap();
        match p {
            ObjectiveMode::Priority(w) => {
                assert_eq!((w.a, w.b, w.c, w.d), (0.3, 0.3, 1.0, 1.0));
            }
            _ => panic!(),
        }
        assert!(ObjectiveMode::parse("priority:a=2").is_err());
        assert!(ObjectiveMode::parse("nonsense").is_err());
    }

    #[test]
    fn diversity_identities() {
        let spec = tiny_spec();
        let mut rng = stream(3, "sampling");
        let d = spec.sample_uniform(&mut rng);
        assert_eq!(diversity(&[&d, &d, &d]), 0.0);
        assert_eq!(diversity(&[&d]), 0.0);

        // three 3-gene designs pairwise differing in 2 of 3 genes
        let make = |enc: Vec<u32>| DesignPoint {
            model: d.model.clone(),
            quant: d.quant.clone(),
            hardware: d.hardware.clone(),
            encoding: enc,
        };
        let a = make(vec![0, 0, 0]);
        let b = make(vec![0, 1, 1]);
        let c = make(vec![1, 0, 1]);
        let div = diversity(&[&a, &b, &c]);
        assert!((div - 2.0 / 3.0).abs() < 1e-12, "{div}");

        let e = make(vec![0, 0, 0]);
        let f = make(vec![1, 1, 1]);
        assert_eq!(diversity(&[&e, &f]), 1.0);
    }

    #[test]
    fn generation_zero_returns_initial_population_only() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let cfg = SearchConfig {
            generations: 0,
            ..tiny_config()
        };
        let archive = run_search(&spec, &cfg, &evaluator).unwrap();
        let total_hits: u32 = archive.entries.iter().map(|e| e.hits).sum();
        assert_eq!(total_hits as usize, cfg.population);
        assert!(archive.entries.iter().all(|e| e.generation == 0));
        assert!(archive.entries.iter().all(|e| e.feasible));
    }

    #[test]
    fn archives_are_deterministic_across_worker_counts() {
        let spec = Arc::new(tiny_spec());
        let mut archives = Vec::new();
        for workers in [1usize, 4, 8] {
            let evaluator = tiny_evaluator(spec.clone());
            let cfg = SearchConfig {
                workers,
                ..tiny_config()
            };
            archives.push(run_search(&spec, &cfg, &evaluator).unwrap());
        }
        for other in &archives[1..] {
            assert_eq!(archives[0].entries.len(), other.entries.len());
            for (a, b) in archives[0].entries.iter().zip(&other.entries) {
                assert_eq!(a.design.encoding, b.design.encoding);
                assert_eq!(a.score.to_bits(), b.score.to_bits());
                assert_eq!(a.hits, b.hits);
                assert_eq!(a.generation, b.generation);
            }
            assert_eq!(archives[0].rejections, other.rejections);
        }
    }

    #[test]
    fn best_population_score_never_worsens() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let archive = run_search(&spec, &tiny_config(), &evaluator).unwrap();
        for w in archive.convergence.windows(2) {
            assert!(w[1].best_score <= w[0].best_score);
        }
    }

    #[test]
    fn archive_entries_respect_constraints_and_cache() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let cfg = tiny_config();
        let archive = run_search(&spec, &cfg, &evaluator).unwrap();
        for e in &archive.entries {
            assert!(e.feasible);
            assert!(e.metrics.area_mm2 <= cfg.area_constraint_mm2);
            assert!(e.metrics.feasible);
            // cache correctness: re-evaluating returns identical metrics
            let again = evaluator.evaluate(&e.design).unwrap();
            assert_eq!(again.metrics, e.metrics);
            assert_eq!(again.accuracy, e.accuracy);
        }
        let hits: u32 = archive.entries.iter().map(|e| e.hits).sum();
        assert!(hits as usize >= cfg.population);
    }

    #[test]
    fn impossible_constraint_reports_exhaustion() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let cfg = SearchConfig {
            area_constraint_mm2: 1e-6,
            init_attempt_factor: 5,
            ..tiny_config()
        };
        match run_search(&spec, &cfg, &evaluator) {
            Err(SearchError::ExhaustedSampling { attempts, .. }) => {
                assert_eq!(attempts, 5 * cfg.population as u64)
            }
            other => panic!("expected ExhaustedSampling, got {other:?}"),
        }
    }

    #[test]
    fn rejection_count_is_reproducible() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let cfg = SearchConfig {
            area_constraint_mm2: 60.0, // tight enough to reject some draws
            ..tiny_config()
        };
        let a = run_search(&spec, &cfg, &evaluator).unwrap();
        let b = run_search(&spec, &cfg, &evaluator).unwrap();
        assert_eq!(a.rejections, b.rejections);
        assert!(a.rejections > 0, "constraint did not bite");
    }

    #[test]
    fn top_k_selection_and_tie_breaks() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let archive = run_search(&spec, &tiny_config(), &evaluator).unwrap();
        let objective = ObjectiveSpec::new(ObjectiveMode::EdapAcc);
        let top = select_top_k(&archive, &objective, 3).unwrap();
        assert_eq!(top.entries.len(), 3);
        for w in top.entries.windows(2) {
            let s0 = score(&w[0].metrics, w[0].accuracy, &objective).unwrap();
            let s1 = score(&w[1].metrics, w[1].accuracy, &objective).unwrap();
            assert!(s0 <= s1);
        }
        let all = select_top_k(&archive, &objective, archive.entries.len() + 10).unwrap();
        assert!(all.truncated);

        // hand-built tie-break: equal scores rank by generation
        let mut hand = Archive::new();
        for (generation, s) in [(2u32, 0.3), (0, 0.2), (1, 0.2)] {
            let mut rng = stream(generation as u64 + 100, "sampling");
            let d = spec.sample_uniform(&mut rng);
            hand.index.insert(d.encoding.clone(), hand.entries.len());
            hand.entries.push(ArchiveEntry {
                design: d,
                // E carries the intended score; D=1000us, A=1, Acc=1
                metrics: HardwareMetrics::from_eda(s, 1000.0, 1.0),
                accuracy: 1.0,
                score: s,
                generation,
                feasible: true,
                hits: 1,
            });
        }
        let top = select_top_k(&hand, &objective, 3).unwrap();
        assert_eq!(top.entries[0].generation, 0);
        assert_eq!(top.entries[1].generation, 1);
        assert_eq!(top.entries[2].generation, 2);
    }

    #[test]
    fn priority_with_unit_weights_ranks_like_edap() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let archive = run_search(&spec, &tiny_config(), &evaluator).unwrap();
        let unit = ObjectiveSpec {
            mode: ObjectiveMode::Priority(PriorityWeights {
                a: 1.0,
                b: 1.0,
                c: 1.0,
                d: 1.0,
            }),
            anchor: archive.anchor,
        };
        let edap = ObjectiveSpec::new(ObjectiveMode::EdapAcc);
        let k = archive.entries.len();
        let a = select_top_k(&archive, &unit, k).unwrap();
        let b = select_top_k(&archive, &edap, k).unwrap();
        let ids_a: Vec<&[u32]> = a
            .entries
            .iter()
            .map(|e| e.design.encoding.as_slice())
            .collect();
        let ids_b: Vec<&[u32]> = b
            .entries
            .iter()
            .map(|e| e.design.encoding.as_slice())
            .collect();
        assert_eq!(ids_a, ids_b);
    }

    #[test]
    fn staged_searches_are_deterministic_and_respect_masks() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let cfg = tiny_config();
        let a = run_two_stage(&spec, &cfg, &evaluator).unwrap();
        let b = run_two_stage(&spec, &cfg, &evaluator).unwrap();
        assert_eq!(a.entries.len(), b.entries.len());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.design.encoding, y.design.encoding);
        }
        let x1 = run_xpert_like(&spec, &cfg, &evaluator).unwrap();
        let x2 = run_xpert_like(&spec, &cfg, &evaluator).unwrap();
        assert_eq!(x1.entries.len(), x2.entries.len());
        for (x, y) in x1.entries.iter().zip(&x2.entries) {
            assert_eq!(x.design.encoding, y.design.encoding);
        }
        // two-stage stage-2 archives vary only hardware genes
        let frozen: Vec<usize> = spec
            .schema()
            .genes
            .iter()
            .enumerate()
            .filter(|(_, g)| g.group != GeneGroup::Hardware)
            .map(|(i, _)| i)
            .collect();
        let first = &a.entries[0].design.encoding;
        for e in &a.entries {
            for &g in &frozen {
                assert_eq!(e.design.encoding[g], first[g], "frozen gene moved");
            }
        }
        // hardware-first stage-2 archives vary only quant genes
        let frozen: Vec<usize> = spec
            .schema()
            .genes
            .iter()
            .enumerate()
            .filter(|(_, g)| g.group != GeneGroup::Quant)
            .map(|(i, _)| i)
            .collect();
        let first = &x1.entries[0].design.encoding;
        for e in &x1.entries {
            for &g in &frozen {
                assert_eq!(e.design.encoding[g], first[g], "frozen gene moved");
            }
        }
    }

    #[test]
    fn two_stage_reports_stage2_constraint_failure() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        // stage 1 is a pure software search and succeeds; no hardware
        // config satisfies this area bound, so stage 2 must report it
        let cfg = SearchConfig {
            area_constraint_mm2: 1e-6,
            init_attempt_factor: 3,
            ..tiny_config()
        };
        match run_two_stage(&spec, &cfg, &evaluator) {
            Err(SearchError::ExhaustedSampling { context, .. }) => {
                assert!(context.contains("stage 2"), "context={context}");
            }
            other => panic!("expected ExhaustedSampling, got {other:?}"),
        }
    }

    #[test]
    fn baselines_median_equals_random_on_singleton_hardware() {
        let text = localize_spec_text(TINY_SPEC)
            .replace("v_op = [0.6, 0.7]", "v_op = [0.7]")
            .replace("bits_cell = [2, 4]", "bits_cell = [4]")
            .replace("t_cycle_ns = [2.0, 4.0]", "t_cycle_ns = [4.0]")
            .replace("xbar_rows = [64, 128]", "xbar_rows = [128]")
            .replace("xbar_cols = [64, 128]", "xbar_cols = [128]")
            .replace("c_per_tile = [2, 4]", "c_per_tile = [4]")
            .replace("t_per_router = [2, 4]", "t_per_router = [4]")
            .replace("glb_mb = [1.0, 2.0]", "glb_mb = [2.0]");
        let spec = Arc::new(crate::space::load_spec(&text).unwrap());
        let evaluator = tiny_evaluator(spec.clone());
        let objective = ObjectiveSpec::new(ObjectiveMode::EdapAcc);
        let b = baselines(&spec, &evaluator, &objective, 7, 50).unwrap();
        assert!((b.median.metrics.edap - b.random.edap).abs() < 1e-12);
        assert!((b.median.metrics.energy_mj - b.random.energy_mj).abs() < 1e-15);
        assert!((b.median.accuracy - b.random.accuracy).abs() < 1e-12);
    }

    #[test]
    fn random_baseline_mean_edap_shows_jensen_gap() {
        let spec = Arc::new(tiny_spec());
        let evaluator = tiny_evaluator(spec.clone());
        let objective = ObjectiveSpec::new(ObjectiveMode::EdapAcc);
        let b = baselines(&spec, &evaluator, &objective, 7, 200).unwrap();
        let recomposed = b.random.energy_mj * (b.random.delay_us / 1000.0) * b.random.area_mm2;
        let gap = (b.random.edap - recomposed).abs() / b.random.edap;
        assert!(gap > 1e-6, "no Jensen gap: {gap}");
    }
}
