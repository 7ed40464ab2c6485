//! Expansion of a (genome, quantization policy) pair into per-layer
//! workloads, plus the value histograms that make energy data-dependent.
//!
//! Workloads carry matrix dimensions only; no tensor arithmetic happens
//! here. Activation values are synthetic draws from a documented
//! distribution standing in for real network tensors, so the histogram
//! pipeline keeps the same shape if measured data is substituted later.

use rand::Rng;
use thiserror::Error;

use crate::rng::Fingerprint;
use crate::space::{ModelGenome, ModelTemplate, QuantPolicy, SearchSpaceSpec, ValueDistribution};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid genome: {0}")]
    InvalidGenome(String),
    #[error("precision {0} outside 1..=16 bits")]
    PrecisionOutOfRange(u32),
    #[error("histogram has no samples")]
    EmptyHistogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    Pointwise,
    Depthwise,
    Standard,
    Linear,
}

/// One layer's matrix view of a convolution.
///
/// `rows` is the reduction length seen by a crossbar column (input channels
/// x kernel^2 for dense kinds, kernel^2 per group for depthwise), `cols`
/// the number of output channels, `positions` the OH x OW output pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWorkload {
    pub id: usize,
    pub name: String,
    pub kind: ConvKind,
    pub rows: u64,
    pub cols: u64,
    pub positions: u64,
    pub macs: u64,
    pub weight_bits: u32,
    pub input_bits: u32,
    pub weights: u64,
    pub input_bytes: f64,
    pub output_bytes: f64,
}

impl LayerWorkload {
    pub fn traffic_bytes(&self) -> f64 {
        self.input_bytes + self.output_bytes
    }

    pub fn weight_bytes(&self) -> f64 {
        self.weights as f64 * self.weight_bits as f64 / 8.0
    }

    /// Stable digest of the layer's shape and precisions; used to key the
    /// deterministic per-layer value streams.
    pub fn fingerprint(&self) -> u64 {
        let mut fp = Fingerprint::new();
        fp.push_u64(self.id as u64);
        fp.push_u64(match self.kind {
            ConvKind::Pointwise => 0,
            ConvKind::Depthwise => 1,
            ConvKind::Standard => 2,
            ConvKind::Linear => 3,
        });
        fp.push_u64(self.rows);
        fp.push_u64(self.cols);
        fp.push_u64(self.positions);
        fp.push_u64(self.weight_bits as u64);
        fp.push_u64(self.input_bits as u64);
        fp.finish()
    }
}

/// Total multiply-accumulate operations of a network.
pub fn total_macs(layers: &[LayerWorkload]) -> u64 {
    layers.iter().map(|l| l.macs).sum()
}

struct LayerBuilder {
    layers: Vec<LayerWorkload>,
}

impl LayerBuilder {
    fn push(
        &mut self,
        name: String,
        kind: ConvKind,
        in_channels: u64,
        out_channels: u64,
        kernel: u64,
        in_res: u64,
        out_res: u64,
        weight_bits: u32,
        input_bits: u32,
    ) {
        let (rows, cols, weights) = match kind {
            ConvKind::Depthwise => (kernel * kernel, in_channels, kernel * kernel * in_channels),
            ConvKind::Linear => (in_channels, out_channels, in_channels * out_channels),
            _ => (
                in_channels * kernel * kernel,
                out_channels,
                in_channels * kernel * kernel * out_channels,
            ),
        };
        let positions = out_res * out_res;
        let macs = rows * cols * positions;
        let id = self.layers.len();
        self.layers.push(LayerWorkload {
            id,
            name,
            kind,
            rows,
            cols,
            positions,
            macs,
            weight_bits,
            input_bits,
            weights,
            input_bytes: in_channels as f64 * (in_res * in_res) as f64 * input_bits as f64 / 8.0,
            output_bytes: out_channels as f64 * positions as f64 * input_bits as f64 / 8.0,
        });
    }
}

const FIXED_BITS: u32 = 8;

fn apply_stride(res: u64, stride: u64, what: &str) -> Result<u64, WorkloadError> {
    if stride == 0 || res % stride != 0 {
        return Err(WorkloadError::InvalidGenome(format!(
            "resolution {res} not divisible by stride {stride} at {what}"
        )));
    }
    Ok(res / stride)
}

/// Expand a genome and quantization policy into the layer list for the
/// spec's template at the given input resolution.
pub fn expand_model(
    spec: &SearchSpaceSpec,
    model: &ModelGenome,
    quant: &QuantPolicy,
    input_resolution: u32,
) -> Result<Vec<LayerWorkload>, WorkloadError> {
    if model.depths.len() != spec.stage_count
        || model.kernels.len() != spec.total_slots()
        || quant.weight_bits_a.len() != spec.total_slots()
    {
        return Err(WorkloadError::InvalidGenome(
            "genome vector lengths do not match the spec".into(),
        ));
    }
    for (s, &d) in model.depths.iter().enumerate() {
        if !spec.depth_choices[s].contains(&d) {
            return Err(WorkloadError::InvalidGenome(format!(
                "depth {d} not allowed in stage {s}"
            )));
        }
    }

    let mut b = LayerBuilder { layers: Vec::new() };
    let mut res = input_resolution as u64;
    let mut channels = 3u64;

    for (i, row) in spec.template_table.fixed_pre.iter().enumerate() {
        let name = format!("pre{i}.{}", row.kind);
        match row.kind.as_str() {
            "pool" => {
                res = apply_stride(res, row.stride as u64, &name)?;
            }
            "standard" => {
                let out = row.out_channels.unwrap_or(channels as u32) as u64;
                let k = row.kernel.unwrap_or(3) as u64;
                let out_res = apply_stride(res, row.stride as u64, &name)?;
                b.push(name, ConvKind::Standard, channels, out, k, res, out_res, FIXED_BITS, FIXED_BITS);
                channels = out;
                res = out_res;
            }
            "depthwise" => {
                let k = row.kernel.unwrap_or(3) as u64;
                let out_res = apply_stride(res, row.stride as u64, &name)?;
                b.push(name, ConvKind::Depthwise, channels, channels, k, res, out_res, FIXED_BITS, FIXED_BITS);
                res = out_res;
            }
            "pointwise" => {
                let out = row.out_channels.unwrap_or(channels as u32) as u64;
                let out_res = apply_stride(res, row.stride as u64, &name)?;
                b.push(name, ConvKind::Pointwise, channels, out, 1, res, out_res, FIXED_BITS, FIXED_BITS);
                channels = out;
                res = out_res;
            }
            other => {
                return Err(WorkloadError::InvalidGenome(format!(
                    "unknown template row kind {other:?}"
                )))
            }
        }
    }

    for (s, stage) in spec.template_table.stages.iter().enumerate() {
        let depth = model.depths[s] as usize;
        let out = scale_channels(stage.base_channels as u64, model.width_mult, spec.template);
        for blk in 0..depth {
            let slot = spec.slot_offset(s) + blk;
            let k = model.kernels[slot] as u64;
            let e = model.expansions[slot];
            let stride = if blk == 0 { stage.stride as u64 } else { 1 };
            let w_a = quant.weight_bits_a[slot];
            let i_a = quant.input_bits_a[slot];
            let w_b = quant.weight_bits_b[slot];
            let i_b = quant.input_bits_b[slot];
            let tag = format!("s{s}.b{blk}");
            match spec.template {
                ModelTemplate::MobileNetV2Like => {
                    // expand 1x1 -> depthwise kxk (strided) -> project 1x1
                    let hidden = ((channels as f64 * e).round() as u64).max(1);
                    b.push(format!("{tag}.expand"), ConvKind::Pointwise, channels, hidden, 1, res, res, w_b, i_b);
                    let out_res = apply_stride(res, stride, &tag)?;
                    b.push(format!("{tag}.dw"), ConvKind::Depthwise, hidden, hidden, k, res, out_res, w_a, i_a);
                    b.push(format!("{tag}.project"), ConvKind::Pointwise, hidden, out, 1, out_res, out_res, w_b, i_b);
                    channels = out;
                    res = out_res;
                }
                ModelTemplate::ResNet50Like => {
                    // reduce 1x1 -> kxk (strided) -> restore 1x1
                    let mid = ((out as f64 / e).round() as u64).max(1);
                    b.push(format!("{tag}.reduce"), ConvKind::Pointwise, channels, mid, 1, res, res, w_b, i_b);
                    let out_res = apply_stride(res, stride, &tag)?;
                    b.push(format!("{tag}.conv"), ConvKind::Standard, mid, mid, k, res, out_res, w_a, i_a);
                    b.push(format!("{tag}.restore"), ConvKind::Pointwise, mid, out, 1, out_res, out_res, w_b, i_b);
                    channels = out;
                    res = out_res;
                }
            }
        }
    }

    for (i, row) in spec.template_table.fixed_post.iter().enumerate() {
        let name = format!("post{i}.{}", row.kind);
        match row.kind.as_str() {
            "pointwise" => {
                let out = row.out_channels.unwrap_or(channels as u32) as u64;
                let out_res = apply_stride(res, row.stride as u64, &name)?;
                b.push(name, ConvKind::Pointwise, channels, out, 1, res, out_res, FIXED_BITS, FIXED_BITS);
                channels = out;
                res = out_res;
            }
            "linear" => {
                // global average pool down to 1x1 is implied
                let out = row.out_channels.unwrap_or(channels as u32) as u64;
                b.push(name, ConvKind::Linear, channels, out, 1, 1, 1, FIXED_BITS, FIXED_BITS);
                channels = out;
            }
            other => {
                return Err(WorkloadError::InvalidGenome(format!(
                    "unknown template row kind {other:?}"
                )))
            }
        }
    }

    Ok(b.layers)
}

fn scale_channels(base: u64, width_mult: f64, template: ModelTemplate) -> u64 {
    match template {
        ModelTemplate::MobileNetV2Like => base,
        ModelTemplate::ResNet50Like => ((base as f64 * width_mult).round() as u64).max(1),
    }
}

/// Draw `n` synthetic magnitudes in [0,1].
pub fn synth_values<R: Rng>(dist: ValueDistribution, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    match dist {
        ValueDistribution::UniformNonneg => {
            for _ in 0..n {
                out.push(rng.random::<f64>());
            }
        }
        ValueDistribution::HalfGaussian => {
            // |N(0,1)|/3, folded to magnitude and clamped to [0,1]
            for _ in 0..n {
                let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.random();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                out.push((z.abs() / 3.0).clamp(0.0, 1.0));
            }
        }
        ValueDistribution::Constant(v) => {
            out.resize(n, v.clamp(0.0, 1.0));
        }
    }
    out
}

/// Bin counts over all 2^precision quantized levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub precision: u32,
    pub bins: Vec<u64>,
    pub total: u64,
}

/// Quantize values in [0,1] to 2^precision levels: v maps to bin
/// floor(v * (2^p - 1) + 0.5).
pub fn build_histogram(values: &[f64], precision: u32) -> Result<Histogram, WorkloadError> {
    if precision == 0 || precision > 16 {
        return Err(WorkloadError::PrecisionOutOfRange(precision));
    }
    let levels = 1usize << precision;
    let top = (levels - 1) as f64;
    let mut bins = vec![0u64; levels];
    for &v in values {
        let idx = (v.clamp(0.0, 1.0) * top + 0.5).floor() as usize;
        bins[idx.min(levels - 1)] += 1;
    }
    Ok(Histogram {
        precision,
        bins,
        total: values.len() as u64,
    })
}

/// Mean normalized level of a histogram: sum(i * bins_i) / ((2^p - 1) * total).
pub fn activity_factor(h: &Histogram) -> Result<f64, WorkloadError> {
    if h.total == 0 {
        return Err(WorkloadError::EmptyHistogram);
    }
    let top = ((1u64 << h.precision) - 1) as f64;
    let weighted: f64 = h
        .bins
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    Ok(weighted / (top * h.total as f64))
}
