//! Accuracy surrogate layer.
//!
//! Accuracy can come from three interchangeable sources behind one trait:
//! a closed-form synthetic oracle (saturating capacity term plus a
//! precision-knee penalty), a trained perceptron over one-hot encoded
//! model/quantization genes, or a precomputed lookup table keyed by the
//! design's semantic fingerprint so measured accuracies can be injected.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use thiserror::Error;

use crate::rng::{keyed_stream, stream, Fingerprint};
use crate::space::{GeneGroup, ModelGenome, ModelTemplate, QuantPolicy, SearchSpaceSpec};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("invalid genome: {0}")]
    InvalidGenome(String),
    #[error("inconsistent encoding length: expected {expected}, found {found}")]
    InconsistentEncodingLength { expected: usize, found: usize },
    #[error("encoding shape mismatch: model expects {expected}, input has {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("need at least {min} training samples, got {found}")]
    TooFewSamples { min: usize, found: usize },
    #[error("no table entry for design fingerprint {0:#x}")]
    MissingTableEntry(u64),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint does not parse: {0}")]
    Parse(String),
}

/// One-hot vector over all model and quantization gene choices. Per-block
/// genes carry one extra "inactive" slot used when the block is padding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDesign {
    pub values: Vec<f64>,
}

/// Length of the one-hot encoding for a spec.
pub fn encoded_length(spec: &SearchSpaceSpec) -> usize {
    spec.schema()
        .genes
        .iter()
        .filter(|g| g.group != GeneGroup::Hardware)
        .map(|g| g.choices + usize::from(g.block.is_some()))
        .sum()
}

/// Encode model + quantization genes; hardware genes do not influence
/// accuracy and are excluded.
pub fn one_hot_encode(
    spec: &SearchSpaceSpec,
    model: &ModelGenome,
    quant: &QuantPolicy,
) -> Result<EncodedDesign, PredictorError> {
    let encoding = spec
        .encode(model, quant, &spec.median_hardware())
        .map_err(|e| PredictorError::InvalidGenome(e.to_string()))?;
    let mut values = Vec::with_capacity(encoded_length(spec));
    for (gene, &idx) in spec.schema().genes.iter().zip(&encoding) {
        if gene.group == GeneGroup::Hardware {
            continue;
        }
        match gene.block {
            None => {
                let mut slot = vec![0.0; gene.choices];
                slot[idx as usize] = 1.0;
                values.extend_from_slice(&slot);
            }
            Some((stage, block)) => {
                // last slot flags an inactive (padding) block
                let mut slot = vec![0.0; gene.choices + 1];
                if (block as u32) < model.depths[stage] {
                    slot[idx as usize] = 1.0;
                } else {
                    slot[gene.choices] = 1.0;
                }
                values.extend_from_slice(&slot);
            }
        }
    }
    Ok(EncodedDesign { values })
}

/// Fingerprint of the accuracy-relevant genes (active blocks only);
/// hardware genes are excluded. Keys oracle noise and lookup tables.
pub fn model_quant_fingerprint(
    spec: &SearchSpaceSpec,
    model: &ModelGenome,
    quant: &QuantPolicy,
) -> u64 {
    let mut fp = Fingerprint::new();
    fp.push_f64(model.width_mult);
    for s in 0..spec.stage_count {
        let d = model.depths[s] as usize;
        fp.push_u64(d as u64);
        for b in 0..d {
            let i = spec.slot_offset(s) + b;
            fp.push_u64(model.kernels[i] as u64);
            fp.push_f64(model.expansions[i]);
            fp.push_u64(quant.weight_bits_a[i] as u64);
            fp.push_u64(quant.input_bits_a[i] as u64);
            fp.push_u64(quant.weight_bits_b[i] as u64);
            fp.push_u64(quant.input_bits_b[i] as u64);
        }
    }
    fp.finish()
}

/// Parameters of the synthetic ground-truth oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    /// Best reachable accuracy, percent.
    pub ceiling: f64,
    /// Amplitude of the saturating capacity term.
    pub amplitude: f64,
    /// Capacity scale kappa.
    pub capacity_scale: f64,
    /// Penalty per missing bit below the knee, per conv kind, per block.
    pub penalty_per_bit: f64,
    /// Precisions at or above this many bits are penalty-free.
    pub knee_bits: u32,
    /// Uniform noise amplitude (+/-), percent.
    pub noise: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            ceiling: 78.0,
            amplitude: 8.0,
            capacity_scale: 5000.0,
            penalty_per_bit: 0.002,
            knee_bits: 6,
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Model capacity: sum of kernel^2 * expansion over active blocks,
/// scaled by width_mult^2 for the ResNet template.
pub fn model_capacity(spec: &SearchSpaceSpec, model: &ModelGenome) -> f64 {
    let mut capacity = 0.0;
    for s in 0..spec.stage_count {
        for b in 0..model.depths[s] as usize {
            let i = spec.slot_offset(s) + b;
            capacity += (model.kernels[i] * model.kernels[i]) as f64 * model.expansions[i];
        }
    }
    if spec.template == ModelTemplate::ResNet50Like {
        capacity *= model.width_mult * model.width_mult;
    }
    capacity
}

/// Noise-free part of the oracle.
pub fn oracle_accuracy_noiseless(
    params: &OracleParams,
    spec: &SearchSpaceSpec,
    model: &ModelGenome,
    quant: &QuantPolicy,
) -> f64 {
    let capacity = model_capacity(spec, model);
    let mut penalty = 0.0;
    for s in 0..spec.stage_count {
        for b in 0..model.depths[s] as usize {
            let i = spec.slot_offset(s) + b;
            let knee = params.knee_bits as f64;
            let a = quant.weight_bits_a[i].min(quant.input_bits_a[i]) as f64;
            let b_ = quant.weight_bits_b[i].min(quant.input_bits_b[i]) as f64;
            penalty += (knee - a).max(0.0) + (knee - b_).max(0.0);
        }
    }
    let acc = params.ceiling
        - params.amplitude * (-capacity / params.capacity_scale).exp()
        - params.penalty_per_bit * penalty;
    acc.clamp(1.0, params.ceiling)
}

/// Synthetic accuracy in percent, deterministic per (seed, design).
pub fn oracle_accuracy(
    params: &OracleParams,
    spec: &SearchSpaceSpec,
    model: &ModelGenome,
    quant: &QuantPolicy,
) -> f64 {
    let base = oracle_accuracy_noiseless(params, spec, model, quant);
    let fp = model_quant_fingerprint(spec, model, quant);
    let mut rng = keyed_stream(params.seed, "oracle-noise", fp);
    let noise = params.noise * (2.0 * rng.random::<f64>() - 1.0);
    (base + noise).clamp(1.0, params.ceiling)
}

// ---------------------------------------------------------------------------
// Perceptron
// ---------------------------------------------------------------------------

pub const HIDDEN: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 0.003,
            epochs: 60,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// input -> 400 -> 400 -> 1 perceptron with rectifier hidden activations
/// and identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array1<f64>,
    pub b3: f64,
    pub hyper: TrainHyper,
    pub final_loss: f64,
    pub loss_history: Vec<f64>,
}

impl PredictorModel {
    pub fn input_len(&self) -> usize {
        self.w1.nrows()
    }
}

fn he_init<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let scale = (2.0 / rows as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        // Box-Muller
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * scale
    })
}

struct Gradients {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    w3: Array1<f64>,
    b3: f64,
}

/// Mean squared error over a batch plus its analytic gradients.
fn loss_and_grads(model: &PredictorModel, x: &Array2<f64>, t: &Array1<f64>) -> (f64, Gradients) {
    let n = x.nrows() as f64;
    let z1 = x.dot(&model.w1) + &model.b1;
    let h1 = z1.mapv(|v| v.max(0.0));
    let z2 = h1.dot(&model.w2) + &model.b2;
    let h2 = z2.mapv(|v| v.max(0.0));
    let y = h2.dot(&model.w3) + model.b3;

    let err = &y - t;
    let loss = err.mapv(|e| e * e).sum() / n;

    let dy = err.mapv(|e| 2.0 * e / n);
    let dw3 = h2.t().dot(&dy);
    let db3 = dy.sum();
    let dh2 = outer(&dy, &model.w3);
    let dz2 = &dh2 * &z2.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let dw2 = h1.t().dot(&dz2);
    let db2 = dz2.sum_axis(Axis(0));
    let dh1 = dz2.dot(&model.w2.t());
    let dz1 = &dh1 * &z1.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let dw1 = x.t().dot(&dz1);
    let db1 = dz1.sum_axis(Axis(0));

    (
        loss,
        Gradients {
            w1: dw1,
            b1: db1,
            w2: dw2,
            b2: db2,
            w3: dw3,
            b3: db3,
        },
    )
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let c = col.view().insert_axis(Axis(1));
    let r = row.view().insert_axis(Axis(0));
    c.dot(&r)
}

/// Fit the perceptron to (encoding, percent) samples with momentum SGD.
/// Targets are normalized internally and the normalization is folded back
/// into the output layer, so prediction is a raw forward pass.
pub fn train_predictor(
    samples: &[(EncodedDesign, f64)],
    hyper: TrainHyper,
) -> Result<PredictorModel, PredictorError> {
    const MIN_SAMPLES: usize = 100;
    if samples.len() < MIN_SAMPLES {
        return Err(PredictorError::TooFewSamples {
            min: MIN_SAMPLES,
            found: samples.len(),
        });
    }
    let input_len = samples[0].0.values.len();
    for (enc, _) in samples {
        if enc.values.len() != input_len {
            return Err(PredictorError::InconsistentEncodingLength {
                expected: input_len,
                found: enc.values.len(),
            });
        }
    }

    let mean = samples.iter().map(|(_, t)| t).sum::<f64>() / samples.len() as f64;
    let var = samples
        .iter()
        .map(|(_, t)| (t - mean) * (t - mean))
        .sum::<f64>()
        / samples.len() as f64;
    let std = var.sqrt().max(1e-9);

    let mut init_rng = stream(hyper.seed, "predictor-init");
    let mut model = PredictorModel {
        w1: he_init(input_len, HIDDEN, &mut init_rng),
        b1: Array1::zeros(HIDDEN),
        w2: he_init(HIDDEN, HIDDEN, &mut init_rng),
        b2: Array1::zeros(HIDDEN),
        w3: he_init(HIDDEN, 1, &mut init_rng).column(0).to_owned(),
        b3: 0.0,
        hyper: hyper.clone(),
        final_loss: f64::NAN,
        loss_history: Vec::with_capacity(hyper.epochs),
    };

    let mut vel_w1: Array2<f64> = Array2::zeros(model.w1.raw_dim());
    let mut vel_b1: Array1<f64> = Array1::zeros(HIDDEN);
    let mut vel_w2: Array2<f64> = Array2::zeros(model.w2.raw_dim());
    let mut vel_b2: Array1<f64> = Array1::zeros(HIDDEN);
    let mut vel_w3: Array1<f64> = Array1::zeros(HIDDEN);
    let mut vel_b3 = 0.0f64;
    const MOMENTUM: f64 = 0.9;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = stream(hyper.seed, "predictor-shuffle");
    let lr = hyper.learning_rate;

    for _epoch in 0..hyper.epochs {
        // Fisher-Yates
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch_size.max(1)) {
            let x = Array2::from_shape_fn((chunk.len(), input_len), |(r, c)| {
                samples[chunk[r]].0.values[c]
            });
            let t = Array1::from_shape_fn(chunk.len(), |r| (samples[chunk[r]].1 - mean) / std);
            let (loss, g) = loss_and_grads(&model, &x, &t);
            epoch_loss += loss;
            batches += 1;

            vel_w1 = vel_w1 * MOMENTUM - &(g.w1 * lr);
            vel_b1 = vel_b1 * MOMENTUM - &(g.b1 * lr);
            vel_w2 = vel_w2 * MOMENTUM - &(g.w2 * lr);
            vel_b2 = vel_b2 * MOMENTUM - &(g.b2 * lr);
            vel_w3 = vel_w3 * MOMENTUM - &(g.w3 * lr);
            vel_b3 = vel_b3 * MOMENTUM - g.b3 * lr;
            model.w1 += &vel_w1;
            model.b1 += &vel_b1;
            model.w2 += &vel_w2;
            model.b2 += &vel_b2;
            model.w3 += &vel_w3;
            model.b3 += vel_b3;
        }
        model
            .loss_history
            .push(epoch_loss / batches as f64 * std * std);
    }

    // fold target normalization into the output layer
    model.w3.mapv_inplace(|w| w * std);
    model.b3 = model.b3 * std + mean;
    model.final_loss = *model.loss_history.last().unwrap();
    Ok(model)
}

/// Single forward pass, clamped to [0, 100] percent.
pub fn predict(model: &PredictorModel, encoding: &EncodedDesign) -> Result<f64, PredictorError> {
    if encoding.values.len() != model.input_len() {
        return Err(PredictorError::ShapeMismatch {
            expected: model.input_len(),
            found: encoding.values.len(),
        });
    }
    let x = ndarray::ArrayView1::from(&encoding.values);
    let h1 = (x.dot(&model.w1) + &model.b1).mapv(|v| v.max(0.0));
    let h2 = (h1.dot(&model.w2) + &model.b2).mapv(|v| v.max(0.0));
    Ok((h2.dot(&model.w3) + model.b3).clamp(0.0, 100.0))
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &str = "cimsearch-predictor v1";

/// Write the model as text: a version header, shapes, then row-major
/// parameters as lossless hex-encoded f64 bits.
pub fn save_checkpoint(model: &PredictorModel, path: &Path) -> Result<(), PredictorError> {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    out.push_str(&format!("input {} hidden {}\n", model.input_len(), HIDDEN));
    let mut push_slice = |slice: &[f64]| {
        for (i, v) in slice.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{:016x}", v.to_bits()));
        }
        out.push('\n');
    };
    push_slice(model.w1.as_slice().unwrap());
    push_slice(model.b1.as_slice().unwrap());
    push_slice(model.w2.as_slice().unwrap());
    push_slice(model.b2.as_slice().unwrap());
    push_slice(model.w3.as_slice().unwrap());
    push_slice(&[model.b3]);
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PredictorModel, PredictorError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or_default();
    if magic != CHECKPOINT_MAGIC {
        return Err(PredictorError::Parse(format!(
            "bad version header {magic:?}, expected {CHECKPOINT_MAGIC:?}"
        )));
    }
    let shape_line = lines.next().unwrap_or_default();
    let parts: Vec<&str> = shape_line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "input" || parts[2] != "hidden" {
        return Err(PredictorError::Parse("bad shape line".into()));
    }
    let input: usize = parts[1]
        .parse()
        .map_err(|_| PredictorError::Parse("bad input size".into()))?;
    let hidden: usize = parts[3]
        .parse()
        .map_err(|_| PredictorError::Parse("bad hidden size".into()))?;
    if hidden != HIDDEN {
        return Err(PredictorError::Parse(format!(
            "hidden size {hidden} unsupported"
        )));
    }

    let mut parse_row = |expected: usize| -> Result<Vec<f64>, PredictorError> {
        let line = lines
            .next()
            .ok_or_else(|| PredictorError::Parse("truncated checkpoint".into()))?;
        let vals: Result<Vec<f64>, _> = line
            .split_whitespace()
            .map(|tok| u64::from_str_radix(tok, 16).map(f64::from_bits))
            .collect();
        let vals = vals.map_err(|_| PredictorError::Parse("bad hex value".into()))?;
        if vals.len() != expected {
            return Err(PredictorError::Parse(format!(
                "expected {expected} values, found {}",
                vals.len()
            )));
        }
        Ok(vals)
    };

    let w1 = Array2::from_shape_vec((input, HIDDEN), parse_row(input * HIDDEN)?).unwrap();
    let b1 = Array1::from_vec(parse_row(HIDDEN)?);
    let w2 = Array2::from_shape_vec((HIDDEN, HIDDEN), parse_row(HIDDEN * HIDDEN)?).unwrap();
    let b2 = Array1::from_vec(parse_row(HIDDEN)?);
    let w3 = Array1::from_vec(parse_row(HIDDEN)?);
    let b3 = parse_row(1)?[0];

    Ok(PredictorModel {
        w1,
        b1,
        w2,
        b2,
        w3,
        b3,
        hyper: TrainHyper::default(),
        final_loss: f64::NAN,
        loss_history: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Pluggable accuracy sources
// ---------------------------------------------------------------------------

/// Anything the search can ask for a design's accuracy.
pub trait AccuracySource: Send + Sync {
    fn accuracy(
        &self,
        spec: &SearchSpaceSpec,
        model: &ModelGenome,
        quant: &QuantPolicy,
    ) -> Result<f64, PredictorError>;
}

/// The closed-form oracle itself.
pub struct SyntheticOracle {
    pub params: OracleParams,
}

impl AccuracySource for SyntheticOracle {
    fn accuracy(
        &self,
        spec: &SearchSpaceSpec,
        model: &ModelGenome,
        quant: &QuantPolicy,
    ) -> Result<f64, PredictorError> {
        Ok(oracle_accuracy(&self.params, spec, model, quant))
    }
}

/// A trained perceptron.
pub struct TrainedPredictor {
    pub model: PredictorModel,
}

impl AccuracySource for TrainedPredictor {
    fn accuracy(
        &self,
        spec: &SearchSpaceSpec,
        model: &ModelGenome,
        quant: &QuantPolicy,
    ) -> Result<f64, PredictorError> {
        predict(&self.model, &one_hot_encode(spec, model, quant)?)
    }
}

/// Precomputed accuracies keyed by the semantic fingerprint.
pub struct AccuracyTable {
    pub entries: HashMap<u64, f64>,
}

impl AccuracySource for AccuracyTable {
    fn accuracy(
        &self,
        spec: &SearchSpaceSpec,
        model: &ModelGenome,
        quant: &QuantPolicy,
    ) -> Result<f64, PredictorError> {
        let fp = model_quant_fingerprint(spec, model, quant);
        self.entries
            .get(&fp)
            .copied()
            .ok_or(PredictorError::MissingTableEntry(fp))
    }
}

// ---------------------------------------------------------------------------
