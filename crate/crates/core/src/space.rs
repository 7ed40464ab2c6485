//! Combined model / quantization / hardware search space.
//!
//! A [`SearchSpaceSpec`] is the single source of truth for what can be
//! searched: every gene is a choice out of a finite, sorted list, and a
//! design is a flat vector of choice indices. Genomes are fixed-length:
//! stages carry slots for the deepest allowed block count, and slots past
//! the chosen depth hold padding values that evaluation ignores.

use std::fmt;

use num_bigint::BigUint;
use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::rng::Fingerprint;

/// Canonical hardware gene names, in encoding order.
pub const HARDWARE_GENES: [&str; 9] = [
    "V_op",
    "Bits_cell",
    "T_cycle",
    "Xbar_rows",
    "Xbar_cols",
    "C_per_tile",
    "T_per_router",
    "G_per_chip",
    "GLB",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTemplate {
    MobileNetV2Like,
    ResNet50Like,
}

impl ModelTemplate {
    pub fn key(&self) -> &'static str {
        match self {
            ModelTemplate::MobileNetV2Like => "mobilenet-v2",
            ModelTemplate::ResNet50Like => "resnet-50",
        }
    }

    /// Config key names for the two searched convolution kinds.
    /// Kind A is the spatial convolution (depthwise / normal), kind B the
    /// pointwise one.
    pub fn kind_a_key(&self) -> &'static str {
        match self {
            ModelTemplate::MobileNetV2Like => "depthwise",
            ModelTemplate::ResNet50Like => "normal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// All weights stay resident on chip; the whole network must fit.
    WeightStationary,
    /// Layer groups are swapped in from DRAM; only the largest layer must fit.
    WeightSwapping,
}

impl ExecutionMode {
    pub fn key(&self) -> &'static str {
        match self {
            ExecutionMode::WeightStationary => "weight-stationary",
            ExecutionMode::WeightSwapping => "weight-swapping",
        }
    }
}

/// Synthetic activation/weight value distribution used to build histograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueDistribution {
    UniformNonneg,
    HalfGaussian,
    Constant(f64),
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("missing key: {0}")]
    MissingKey(String),
    #[error("empty choice list: {0}")]
    EmptyChoiceList(String),
    #[error("unknown template: {0}")]
    UnknownTemplate(String),
    #[error("choice list {key} must be strictly sorted and duplicate-free")]
    UnsortedChoiceList { key: String },
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("spec does not parse: {0}")]
    Parse(String),
    #[error("index {index} out of range for gene {gene} ({choices} choices)")]
    IndexOutOfRange {
        gene: String,
        index: u32,
        choices: usize,
    },
    #[error("encoding length {found} does not match spec gene count {expected}")]
    EncodingLength { expected: usize, found: usize },
    #[error("invalid genome: {0}")]
    InvalidGenome(String),
}

/// Choice lists for the nine hardware genes.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareChoices {
    pub v_op: Vec<f64>,
    pub bits_cell: Vec<u32>,
    pub t_cycle_ns: Vec<f64>,
    pub xbar_rows: Vec<u32>,
    pub xbar_cols: Vec<u32>,
    pub c_per_tile: Vec<u32>,
    pub t_per_router: Vec<u32>,
    pub g_per_chip: Vec<u32>,
    pub glb_mb: Vec<f64>,
}

impl HardwareChoices {
    pub fn gene_len(&self, gene: usize) -> usize {
        match gene {
            0 => self.v_op.len(),
            1 => self.bits_cell.len(),
            2 => self.t_cycle_ns.len(),
            3 => self.xbar_rows.len(),
            4 => self.xbar_cols.len(),
            5 => self.c_per_tile.len(),
            6 => self.t_per_router.len(),
            7 => self.g_per_chip.len(),
            8 => self.glb_mb.len(),
            _ => unreachable!("hardware gene index"),
        }
    }
}

/// One fixed (non-searched) layer row of a template table.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct FixedLayerRow {
    pub kind: String,
    #[serde(default)]
    pub out_channels: Option<u32>,
    #[serde(default)]
    pub kernel: Option<u32>,
    #[serde(default = "one")]
    pub stride: u32,
}

fn one() -> u32 {
    1
}

/// One searched stage row of a template table.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct StageRow {
    pub base_channels: u32,
    #[serde(default = "one")]
    pub stride: u32,
}

/// Channel/stride skeleton the genome is expanded against. Ships as data.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct TemplateTable {
    #[serde(default)]
    pub fixed_pre: Vec<FixedLayerRow>,
    #[serde(rename = "stage")]
    pub stages: Vec<StageRow>,
    #[serde(default)]
    pub fixed_post: Vec<FixedLayerRow>,
}

impl TemplateTable {
    pub fn parse(text: &str) -> Result<TemplateTable, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Parse(format!("template table: {e}")))
    }
}

const MOBILENET_V2_TABLE: &str = include_str!("../../../data/templates/mobilenet_v2.toml");
const RESNET50_TABLE: &str = include_str!("../../../data/templates/resnet50.toml");

pub fn builtin_template_table(template: ModelTemplate) -> TemplateTable {
    let text = match template {
        ModelTemplate::MobileNetV2Like => MOBILENET_V2_TABLE,
        ModelTemplate::ResNet50Like => RESNET50_TABLE,
    };
    TemplateTable::parse(text).expect("built-in template table parses")
}

/// Which part of the encoding a gene belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneGroup {
    Model,
    Quant,
    Hardware,
}

/// One gene of the flat encoding.
#[derive(Debug, Clone)]
pub struct Gene {
    pub name: String,
    pub group: GeneGroup,
    pub choices: usize,
    /// (stage, slot) for per-block genes; None for global genes.
    pub block: Option<(usize, usize)>,
}

/// The ordered gene list; encoding positions follow this order exactly.
#[derive(Debug, Clone)]
pub struct GeneSchema {
    pub genes: Vec<Gene>,
}

impl GeneSchema {
    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    /// Upper bound (exclusive) of each gene's index range.
    pub fn bounds(&self) -> Vec<u32> {
        self.genes.iter().map(|g| g.choices as u32 - 1).collect()
    }
}

/// The validated search space.
#[derive(Debug, Clone)]
pub struct SearchSpaceSpec {
    pub template: ModelTemplate,
    pub stage_count: usize,
    pub input_resolution: u32,
    /// Per-stage depth choice lists.
    pub depth_choices: Vec<Vec<u32>>,
    pub kernel_choices: Vec<u32>,
    pub expansion_choices: Vec<f64>,
    pub width_mult_choices: Vec<f64>,
    /// Kind A = depthwise (MobileNet) / normal (ResNet); kind B = pointwise.
    pub weight_bits_a: Vec<u32>,
    pub input_bits_a: Vec<u32>,
    pub weight_bits_b: Vec<u32>,
    pub input_bits_b: Vec<u32>,
    pub hardware: HardwareChoices,
    pub execution_mode: ExecutionMode,
    pub template_table: TemplateTable,
    schema: GeneSchema,
    slot_offsets: Vec<usize>,
    total_slots: usize,
}

impl SearchSpaceSpec {
    /// Block slots reserved for a stage (the deepest allowed depth).
    pub fn stage_slots(&self, stage: usize) -> usize {
        *self.depth_choices[stage].iter().max().unwrap() as usize
    }

    /// Offset of a stage's first slot in the flattened per-block vectors.
    pub fn slot_offset(&self, stage: usize) -> usize {
        self.slot_offsets[stage]
    }

    pub fn total_slots(&self) -> usize {
        self.total_slots
    }

    pub fn schema(&self) -> &GeneSchema {
        &self.schema
    }

    pub fn gene_count(&self) -> usize {
        self.schema.len()
    }

    fn build_schema(&mut self) {
        let mut genes = Vec::new();
        for s in 0..self.stage_count {
            genes.push(Gene {
                name: format!("depth[s{s}]"),
                group: GeneGroup::Model,
                choices: self.depth_choices[s].len(),
                block: None,
            });
        }
        for s in 0..self.stage_count {
            for b in 0..self.stage_slots(s) {
                genes.push(Gene {
                    name: format!("kernel[s{s}.b{b}]"),
                    group: GeneGroup::Model,
                    choices: self.kernel_choices.len(),
                    block: Some((s, b)),
                });
                genes.push(Gene {
                    name: format!("expansion[s{s}.b{b}]"),
                    group: GeneGroup::Model,
                    choices: self.expansion_choices.len(),
                    block: Some((s, b)),
                });
            }
        }
        genes.push(Gene {
            name: "width_mult".to_string(),
            group: GeneGroup::Model,
            choices: self.width_mult_choices.len(),
            block: None,
        });
        let a = self.template.kind_a_key();
        for s in 0..self.stage_count {
            for b in 0..self.stage_slots(s) {
                for (tag, list) in [
                    (format!("w_bits_{a}[s{s}.b{b}]"), &self.weight_bits_a),
                    (format!("in_bits_{a}[s{s}.b{b}]"), &self.input_bits_a),
                    (format!("w_bits_pointwise[s{s}.b{b}]"), &self.weight_bits_b),
                    (format!("in_bits_pointwise[s{s}.b{b}]"), &self.input_bits_b),
                ] {
                    genes.push(Gene {
                        name: tag,
                        group: GeneGroup::Quant,
                        choices: list.len(),
                        block: Some((s, b)),
                    });
                }
            }
        }
        for (i, name) in HARDWARE_GENES.iter().enumerate() {
            genes.push(Gene {
                name: name.to_string(),
                group: GeneGroup::Hardware,
                choices: self.hardware.gene_len(i),
                block: None,
            });
        }
        self.schema = GeneSchema { genes };
    }

    /// Exact subspace and total cardinalities.
    pub fn cardinality(&self) -> Cardinality {
        let per_block = BigUint::from(self.kernel_choices.len() * self.expansion_choices.len());
        let mut model = BigUint::from(1u32);
        for s in 0..self.stage_count {
            let mut stage = BigUint::from(0u32);
            for &d in &self.depth_choices[s] {
                stage += per_block.pow(d);
            }
            model *= stage;
        }
        model *= BigUint::from(self.width_mult_choices.len());

        let quant_per_slot = self.weight_bits_a.len()
            * self.input_bits_a.len()
            * self.weight_bits_b.len()
            * self.input_bits_b.len();
        let quant = BigUint::from(quant_per_slot).pow(self.total_slots as u32);

        let mut hardware = BigUint::from(1u32);
        for g in 0..HARDWARE_GENES.len() {
            hardware *= BigUint::from(self.hardware.gene_len(g));
        }

        let total = &model * &quant * &hardware;
        Cardinality {
            model,
            quant,
            hardware,
            total,
        }
    }

    /// Draw one design uniformly, gene by gene in schema order.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> DesignPoint {
        let encoding: Vec<u32> = self
            .schema
            .genes
            .iter()
            .map(|g| rng.random_range(0..g.choices as u32))
            .collect();
        self.decode(&encoding).expect("sampled indices are in range")
    }

    /// Rebuild the full design from a flat index vector.
    pub fn decode(&self, encoding: &[u32]) -> Result<DesignPoint, SpecError> {
        if encoding.len() != self.schema.len() {
            return Err(SpecError::EncodingLength {
                expected: self.schema.len(),
                found: encoding.len(),
            });
        }
        for (gene, &idx) in self.schema.genes.iter().zip(encoding) {
            if idx as usize >= gene.choices {
                return Err(SpecError::IndexOutOfRange {
                    gene: gene.name.clone(),
                    index: idx,
                    choices: gene.choices,
                });
            }
        }
        let mut pos = 0usize;
        let mut next = |n: usize| {
            let v = encoding[pos] as usize;
            pos += n; // n is always 1; kept for clarity of intent
            v
        };

        let mut depths = Vec::with_capacity(self.stage_count);
        for s in 0..self.stage_count {
            depths.push(self.depth_choices[s][next(1)]);
        }
        let mut kernels = Vec::with_capacity(self.total_slots);
        let mut expansions = Vec::with_capacity(self.total_slots);
        for s in 0..self.stage_count {
            for _ in 0..self.stage_slots(s) {
                kernels.push(self.kernel_choices[next(1)]);
                expansions.push(self.expansion_choices[next(1)]);
            }
        }
        let width_mult = self.width_mult_choices[next(1)];

        let mut quant = QuantPolicy {
            weight_bits_a: Vec::with_capacity(self.total_slots),
            input_bits_a: Vec::with_capacity(self.total_slots),
            weight_bits_b: Vec::with_capacity(self.total_slots),
            input_bits_b: Vec::with_capacity(self.total_slots),
        };
        for s in 0..self.stage_count {
            for _ in 0..self.stage_slots(s) {
                quant.weight_bits_a.push(self.weight_bits_a[next(1)]);
                quant.input_bits_a.push(self.input_bits_a[next(1)]);
                quant.weight_bits_b.push(self.weight_bits_b[next(1)]);
                quant.input_bits_b.push(self.input_bits_b[next(1)]);
            }
        }

        let hw = &self.hardware;
        let hardware = HardwareConfig {
            v_op: hw.v_op[next(1)],
            bits_cell: hw.bits_cell[next(1)],
            t_cycle_ns: hw.t_cycle_ns[next(1)],
            xbar_rows: hw.xbar_rows[next(1)],
            xbar_cols: hw.xbar_cols[next(1)],
            c_per_tile: hw.c_per_tile[next(1)],
            t_per_router: hw.t_per_router[next(1)],
            g_per_chip: hw.g_per_chip[next(1)],
            glb_mb: hw.glb_mb[next(1)],
            execution_mode: self.execution_mode,
        };
        debug_assert_eq!(pos, encoding.len());

        Ok(DesignPoint {
            model: ModelGenome {
                depths,
                kernels,
                expansions,
                width_mult,
            },
            quant,
            hardware,
            encoding: encoding.to_vec(),
        })
    }

    /// Flatten genome parts back into the index vector.
    pub fn encode(
        &self,
        model: &ModelGenome,
        quant: &QuantPolicy,
        hardware: &HardwareConfig,
    ) -> Result<Vec<u32>, SpecError> {
        if model.depths.len() != self.stage_count
            || model.kernels.len() != self.total_slots
            || model.expansions.len() != self.total_slots
            || quant.weight_bits_a.len() != self.total_slots
        {
            return Err(SpecError::InvalidGenome(
                "genome vector lengths do not match the spec".into(),
            ));
        }
        let mut enc = Vec::with_capacity(self.schema.len());
        for s in 0..self.stage_count {
            enc.push(find_u32(&self.depth_choices[s], model.depths[s], "depth")?);
        }
        for s in 0..self.stage_count {
            for b in 0..self.stage_slots(s) {
                let i = self.slot_offset(s) + b;
                enc.push(find_u32(&self.kernel_choices, model.kernels[i], "kernel")?);
                enc.push(find_f64(
                    &self.expansion_choices,
                    model.expansions[i],
                    "expansion",
                )?);
            }
        }
        enc.push(find_f64(
            &self.width_mult_choices,
            model.width_mult,
            "width_mult",
        )?);
        for s in 0..self.stage_count {
            for b in 0..self.stage_slots(s) {
                let i = self.slot_offset(s) + b;
                enc.push(find_u32(&self.weight_bits_a, quant.weight_bits_a[i], "w_bits")?);
                enc.push(find_u32(&self.input_bits_a, quant.input_bits_a[i], "in_bits")?);
                enc.push(find_u32(&self.weight_bits_b, quant.weight_bits_b[i], "w_bits")?);
                enc.push(find_u32(&self.input_bits_b, quant.input_bits_b[i], "in_bits")?);
            }
        }
        let hw = &self.hardware;
        enc.push(find_f64(&hw.v_op, hardware.v_op, "V_op")?);
        enc.push(find_u32(&hw.bits_cell, hardware.bits_cell, "Bits_cell")?);
        enc.push(find_f64(&hw.t_cycle_ns, hardware.t_cycle_ns, "T_cycle")?);
        enc.push(find_u32(&hw.xbar_rows, hardware.xbar_rows, "Xbar_rows")?);
        enc.push(find_u32(&hw.xbar_cols, hardware.xbar_cols, "Xbar_cols")?);
        enc.push(find_u32(&hw.c_per_tile, hardware.c_per_tile, "C_per_tile")?);
        enc.push(find_u32(&hw.t_per_router, hardware.t_per_router, "T_per_router")?);
        enc.push(find_u32(&hw.g_per_chip, hardware.g_per_chip, "G_per_chip")?);
        enc.push(find_f64(&hw.glb_mb, hardware.glb_mb, "GLB")?);
        Ok(enc)
    }

    pub fn design_from_parts(
        &self,
        model: ModelGenome,
        quant: QuantPolicy,
        hardware: HardwareConfig,
    ) -> Result<DesignPoint, SpecError> {
        let encoding = self.encode(&model, &quant, &hardware)?;
        Ok(DesignPoint {
            model,
            quant,
            hardware,
            encoding,
        })
    }

    /// Upper-median index of a choice list (len/2); ties toward the larger
    /// value so even-length lists like {64,128,256,512} pick 256.
    pub fn median_index(len: usize) -> u32 {
        (len / 2) as u32
    }

    /// Hardware config built from the per-gene median choices.
    pub fn median_hardware(&self) -> HardwareConfig {
        let hw = &self.hardware;
        let m = |len: usize| Self::median_index(len) as usize;
        HardwareConfig {
            v_op: hw.v_op[m(hw.v_op.len())],
            bits_cell: hw.bits_cell[m(hw.bits_cell.len())],
            t_cycle_ns: hw.t_cycle_ns[m(hw.t_cycle_ns.len())],
            xbar_rows: hw.xbar_rows[m(hw.xbar_rows.len())],
            xbar_cols: hw.xbar_cols[m(hw.xbar_cols.len())],
            c_per_tile: hw.c_per_tile[m(hw.c_per_tile.len())],
            t_per_router: hw.t_per_router[m(hw.t_per_router.len())],
            g_per_chip: hw.g_per_chip[m(hw.g_per_chip.len())],
            glb_mb: hw.glb_mb[m(hw.glb_mb.len())],
            execution_mode: self.execution_mode,
        }
    }

    /// The fixed reference network used by the baselines: full depth,
    /// smallest kernel, largest expansion, median width, highest precision.
    pub fn reference_model(&self) -> (ModelGenome, QuantPolicy) {
        let mut depths = Vec::with_capacity(self.stage_count);
        for s in 0..self.stage_count {
            depths.push(*self.depth_choices[s].last().unwrap());
        }
        let kernels = vec![self.kernel_choices[0]; self.total_slots];
        let expansions = vec![*self.expansion_choices.last().unwrap(); self.total_slots];
        let width_mult =
            self.width_mult_choices[Self::median_index(self.width_mult_choices.len()) as usize];
        let quant = QuantPolicy {
            weight_bits_a: vec![*self.weight_bits_a.last().unwrap(); self.total_slots],
            input_bits_a: vec![*self.input_bits_a.last().unwrap(); self.total_slots],
            weight_bits_b: vec![*self.weight_bits_b.last().unwrap(); self.total_slots],
            input_bits_b: vec![*self.input_bits_b.last().unwrap(); self.total_slots],
        };
        (
            ModelGenome {
                depths,
                kernels,
                expansions,
                width_mult,
            },
            quant,
        )
    }

    /// Median-index encoding over every gene; used to freeze gene groups
    /// in staged searches.
    pub fn median_encoding(&self) -> Vec<u32> {
        self.schema
            .genes
            .iter()
            .map(|g| Self::median_index(g.choices))
            .collect()
    }

    /// Canonical, platform-stable text form; hashed into run manifests.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        out.push_str("space-v1\n");
        out.push_str(&format!("template={}\n", self.template.key()));
        out.push_str(&format!("stage_count={}\n", self.stage_count));
        out.push_str(&format!("input_resolution={}\n", self.input_resolution));
        out.push_str(&format!("execution_mode={}\n", self.execution_mode.key()));
        for (s, d) in self.depth_choices.iter().enumerate() {
            out.push_str(&format!("depth[s{s}]={}\n", join_u32(d)));
        }
        out.push_str(&format!("kernel={}\n", join_u32(&self.kernel_choices)));
        out.push_str(&format!("expansion={}\n", join_f64(&self.expansion_choices)));
        out.push_str(&format!("width_mult={}\n", join_f64(&self.width_mult_choices)));
        out.push_str(&format!("w_bits_a={}\n", join_u32(&self.weight_bits_a)));
        out.push_str(&format!("in_bits_a={}\n", join_u32(&self.input_bits_a)));
        out.push_str(&format!("w_bits_b={}\n", join_u32(&self.weight_bits_b)));
        out.push_str(&format!("in_bits_b={}\n", join_u32(&self.input_bits_b)));
        let hw = &self.hardware;
        out.push_str(&format!("V_op={}\n", join_f64(&hw.v_op)));
        out.push_str(&format!("Bits_cell={}\n", join_u32(&hw.bits_cell)));
        out.push_str(&format!("T_cycle={}\n", join_f64(&hw.t_cycle_ns)));
        out.push_str(&format!("Xbar_rows={}\n", join_u32(&hw.xbar_rows)));
        out.push_str(&format!("Xbar_cols={}\n", join_u32(&hw.xbar_cols)));
        out.push_str(&format!("C_per_tile={}\n", join_u32(&hw.c_per_tile)));
        out.push_str(&format!("T_per_router={}\n", join_u32(&hw.t_per_router)));
        out.push_str(&format!("G_per_chip={}\n", join_u32(&hw.g_per_chip)));
        out.push_str(&format!("GLB={}\n", join_f64(&hw.glb_mb)));
        for row in &self.template_table.stages {
            out.push_str(&format!(
                "stage={},{}\n",
                row.base_channels, row.stride
            ));
        }
        out
    }
}

fn join_u32(v: &[u32]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn find_u32(choices: &[u32], value: u32, key: &str) -> Result<u32, SpecError> {
    choices
        .iter()
        .position(|&c| c == value)
        .map(|i| i as u32)
        .ok_or_else(|| SpecError::InvalidGenome(format!("{key} value {value} not in choice list")))
}

fn find_f64(choices: &[f64], value: f64, key: &str) -> Result<u32, SpecError> {
    choices
        .iter()
        .position(|&c| c == value)
        .map(|i| i as u32)
        .ok_or_else(|| SpecError::InvalidGenome(format!("{key} value {value} not in choice list")))
}

/// Exact counts of the three subspaces and their product.
#[derive(Debug, Clone, PartialEq)]
pub struct Cardinality {
    pub model: BigUint,
    pub quant: BigUint,
    pub hardware: BigUint,
    pub total: BigUint,
}

impl Cardinality {
    /// "9.9e85"-style rendering for big counts.
    pub fn scientific(n: &BigUint) -> String {
        let s = n.to_string();
        if s.len() <= 3 {
            return s;
        }
        let exp = s.len() - 1;
        let lead = &s[..1];
        let frac = &s[1..2];
        format!("{lead}.{frac}e{exp}")
    }
}

/// Searched network shape. Per-block vectors are flattened over stages and
/// always span the deepest allowed depth; slots past the chosen depth are
/// padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGenome {
    pub depths: Vec<u32>,
    pub kernels: Vec<u32>,
    pub expansions: Vec<f64>,
    pub width_mult: f64,
}

/// Per-block, per-conv-kind precision assignment. Same slot layout as the
/// model genome.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantPolicy {
    pub weight_bits_a: Vec<u32>,
    pub input_bits_a: Vec<u32>,
    pub weight_bits_b: Vec<u32>,
    pub input_bits_b: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardwareConfig {
    pub v_op: f64,
    pub bits_cell: u32,
    pub t_cycle_ns: f64,
    pub xbar_rows: u32,
    pub xbar_cols: u32,
    pub c_per_tile: u32,
    pub t_per_router: u32,
    pub g_per_chip: u32,
    pub glb_mb: f64,
    pub execution_mode: ExecutionMode,
}

impl HardwareConfig {
    /// Crossbar macros on the chip: groups x tiles x macros-per-tile.
    pub fn macros_available(&self) -> u64 {
        self.g_per_chip as u64 * self.t_per_router as u64 * self.c_per_tile as u64
    }
}

/// One candidate: genome parts plus their flat index encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub model: ModelGenome,
    pub quant: QuantPolicy,
    pub hardware: HardwareConfig,
    pub encoding: Vec<u32>,
}

impl DesignPoint {
    /// Fingerprint of the semantic content (active blocks only), invariant
    /// under padding-slot values. Keys histogram seeding, oracle noise and
    /// accuracy lookup tables.
    pub fn semantic_fingerprint(&self, spec: &SearchSpaceSpec) -> u64 {
        let mut fp = Fingerprint::new();
        fp.push_f64(self.model.width_mult);
        for s in 0..spec.stage_count {
            let d = self.model.depths[s] as usize;
            fp.push_u64(d as u64);
            for b in 0..d {
                let i = spec.slot_offset(s) + b;
                fp.push_u64(self.model.kernels[i] as u64);
                fp.push_f64(self.model.expansions[i]);
                fp.push_u64(self.quant.weight_bits_a[i] as u64);
                fp.push_u64(self.quant.input_bits_a[i] as u64);
                fp.push_u64(self.quant.weight_bits_b[i] as u64);
                fp.push_u64(self.quant.input_bits_b[i] as u64);
            }
        }
        let hw = &self.hardware;
        fp.push_f64(hw.v_op);
        fp.push_u64(hw.bits_cell as u64);
        fp.push_f64(hw.t_cycle_ns);
        fp.push_u64(hw.xbar_rows as u64);
        fp.push_u64(hw.xbar_cols as u64);
        fp.push_u64(hw.c_per_tile as u64);
        fp.push_u64(hw.t_per_router as u64);
        fp.push_u64(hw.g_per_chip as u64);
        fp.push_f64(hw.glb_mb);
        fp.finish()
    }
}

impl fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            self.encoding
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("-")
        )
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DepthChoicesRaw {
    Flat(Vec<u32>),
    PerStage(Vec<Vec<u32>>),
}

#[derive(Debug, Default, Deserialize)]
struct RawHardware {
    v_op: Option<Vec<f64>>,
    bits_cell: Option<Vec<u32>>,
    t_cycle_ns: Option<Vec<f64>>,
    xbar_rows: Option<Vec<u32>>,
    xbar_cols: Option<Vec<u32>>,
    c_per_tile: Option<Vec<u32>>,
    t_per_router: Option<Vec<u32>>,
    g_per_chip: Option<Vec<u32>>,
    glb_mb: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct RawSpace {
    template: Option<String>,
    stage_count: Option<usize>,
    input_resolution: Option<u32>,
    depth_choices: Option<DepthChoicesRaw>,
    kernel_choices: Option<Vec<u32>>,
    expansion_choices: Option<Vec<f64>>,
    width_mult_choices: Option<Vec<f64>>,
    weight_bits_depthwise: Option<Vec<u32>>,
    input_bits_depthwise: Option<Vec<u32>>,
    weight_bits_normal: Option<Vec<u32>>,
    input_bits_normal: Option<Vec<u32>>,
    weight_bits_pointwise: Option<Vec<u32>>,
    input_bits_pointwise: Option<Vec<u32>>,
    execution_mode: Option<String>,
    template_table: Option<String>,
}

fn require<T>(value: Option<T>, key: &str) -> Result<T, SpecError> {
    value.ok_or_else(|| SpecError::MissingKey(key.to_string()))
}

fn check_sorted_u32(list: &[u32], key: &str) -> Result<(), SpecError> {
    if list.is_empty() {
        return Err(SpecError::EmptyChoiceList(key.to_string()));
    }
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpecError::UnsortedChoiceList { key: key.into() });
    }
    Ok(())
}

fn check_sorted_f64(list: &[f64], key: &str) -> Result<(), SpecError> {
    if list.is_empty() {
        return Err(SpecError::EmptyChoiceList(key.to_string()));
    }
    if list.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(SpecError::InvalidValue {
            key: key.into(),
            reason: "values must be finite and positive".into(),
        });
    }
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpecError::UnsortedChoiceList { key: key.into() });
    }
    Ok(())
}

/// Parse and validate a search-space document (a TOML file with a `[space]`
/// table; other tables are ignored so full run configs load too). Relative
/// template-table paths resolve against the working directory.
pub fn load_spec(document: &str) -> Result<SearchSpaceSpec, SpecError> {
    load_spec_at(document, std::path::Path::new("."))
}

/// Like [`load_spec`], resolving relative template-table paths against
/// `base_dir` (usually the spec file's directory).
pub fn load_spec_at(
    document: &str,
    base_dir: &std::path::Path,
) -> Result<SearchSpaceSpec, SpecError> {
    let doc: toml::Value =
        toml::from_str(document).map_err(|e| SpecError::Parse(e.to_string()))?;
    let space_val = doc
        .get("space")
        .cloned()
        .ok_or_else(|| SpecError::MissingKey("space".into()))?;
    let hardware_val = space_val.get("hardware").cloned();
    let raw: RawSpace = space_val
        .try_into()
        .map_err(|e: toml::de::Error| SpecError::Parse(e.to_string()))?;
    let raw_hw: RawHardware = match hardware_val {
        Some(v) => v
            .try_into()
            .map_err(|e: toml::de::Error| SpecError::Parse(e.to_string()))?,
        None => return Err(SpecError::MissingKey("space.hardware".into())),
    };
    build_spec(raw, raw_hw, base_dir)
}

fn build_spec(
    raw: RawSpace,
    raw_hw: RawHardware,
    base_dir: &std::path::Path,
) -> Result<SearchSpaceSpec, SpecError> {
    let template_key = require(raw.template, "space.template")?;
    let template = match template_key.as_str() {
        "mobilenet-v2" | "mobilenet_v2" | "mobilenetv2" => ModelTemplate::MobileNetV2Like,
        "resnet-50" | "resnet_50" | "resnet50" => ModelTemplate::ResNet50Like,
        other => return Err(SpecError::UnknownTemplate(other.to_string())),
    };
    let stage_count = require(raw.stage_count, "space.stage_count")?;
    if stage_count == 0 {
        return Err(SpecError::InvalidValue {
            key: "space.stage_count".into(),
            reason: "must be >= 1".into(),
        });
    }
    let input_resolution = raw.input_resolution.unwrap_or(224);
    if input_resolution == 0 {
        return Err(SpecError::InvalidValue {
            key: "space.input_resolution".into(),
            reason: "must be >= 1".into(),
        });
    }

    let depth_choices = match require(raw.depth_choices, "space.depth_choices")? {
        DepthChoicesRaw::Flat(v) => vec![v; stage_count],
        DepthChoicesRaw::PerStage(v) => {
            if v.len() != stage_count {
                return Err(SpecError::InvalidValue {
                    key: "space.depth_choices".into(),
                    reason: format!("expected {stage_count} per-stage lists, found {}", v.len()),
                });
            }
            v
        }
    };
    for (s, d) in depth_choices.iter().enumerate() {
        check_sorted_u32(d, &format!("space.depth_choices[s{s}]"))?;
        if d.iter().any(|&x| x == 0) {
            return Err(SpecError::InvalidValue {
                key: format!("space.depth_choices[s{s}]"),
                reason: "depths must be >= 1".into(),
            });
        }
    }

    let kernel_choices = require(raw.kernel_choices, "space.kernel_choices")?;
    check_sorted_u32(&kernel_choices, "space.kernel_choices")?;
    if kernel_choices.iter().any(|&k| k == 0 || k % 2 == 0) {
        return Err(SpecError::InvalidValue {
            key: "space.kernel_choices".into(),
            reason: "kernel sizes must be odd and >= 1".into(),
        });
    }
    let expansion_choices = require(raw.expansion_choices, "space.expansion_choices")?;
    check_sorted_f64(&expansion_choices, "space.expansion_choices")?;

    let width_mult_choices = match template {
        ModelTemplate::ResNet50Like => {
            let w = require(raw.width_mult_choices, "space.width_mult_choices")?;
            check_sorted_f64(&w, "space.width_mult_choices")?;
            w
        }
        ModelTemplate::MobileNetV2Like => match raw.width_mult_choices {
            None => vec![1.0],
            Some(w) if w == vec![1.0] => w,
            Some(_) => {
                return Err(SpecError::InvalidValue {
                    key: "space.width_mult_choices".into(),
                    reason: "fixed to [1.0] for the MobileNet template".into(),
                })
            }
        },
    };

    let (wa_key, ia_key, wa, ia) = match template {
        ModelTemplate::MobileNetV2Like => (
            "space.weight_bits_depthwise",
            "space.input_bits_depthwise",
            raw.weight_bits_depthwise,
            raw.input_bits_depthwise,
        ),
        ModelTemplate::ResNet50Like => (
            "space.weight_bits_normal",
            "space.input_bits_normal",
            raw.weight_bits_normal,
            raw.input_bits_normal,
        ),
    };
    let weight_bits_a = require(wa, wa_key)?;
    let input_bits_a = require(ia, ia_key)?;
    let weight_bits_b = require(raw.weight_bits_pointwise, "space.weight_bits_pointwise")?;
    let input_bits_b = require(raw.input_bits_pointwise, "space.input_bits_pointwise")?;
    for (list, key) in [
        (&weight_bits_a, wa_key),
        (&input_bits_a, ia_key),
        (&weight_bits_b, "space.weight_bits_pointwise"),
        (&input_bits_b, "space.input_bits_pointwise"),
    ] {
        check_sorted_u32(list, key)?;
        if list.iter().any(|&b| b == 0 || b > 16) {
            return Err(SpecError::InvalidValue {
                key: key.into(),
                reason: "precisions must be within 1..=16 bits".into(),
            });
        }
    }

    let hardware = HardwareChoices {
        v_op: require(raw_hw.v_op, "space.hardware.v_op")?,
        bits_cell: require(raw_hw.bits_cell, "space.hardware.bits_cell")?,
        t_cycle_ns: require(raw_hw.t_cycle_ns, "space.hardware.t_cycle_ns")?,
        xbar_rows: require(raw_hw.xbar_rows, "space.hardware.xbar_rows")?,
        xbar_cols: require(raw_hw.xbar_cols, "space.hardware.xbar_cols")?,
        c_per_tile: require(raw_hw.c_per_tile, "space.hardware.c_per_tile")?,
        t_per_router: require(raw_hw.t_per_router, "space.hardware.t_per_router")?,
        g_per_chip: require(raw_hw.g_per_chip, "space.hardware.g_per_chip")?,
        glb_mb: require(raw_hw.glb_mb, "space.hardware.glb_mb")?,
    };
    check_sorted_f64(&hardware.v_op, "space.hardware.v_op")?;
    check_sorted_u32(&hardware.bits_cell, "space.hardware.bits_cell")?;
    check_sorted_f64(&hardware.t_cycle_ns, "space.hardware.t_cycle_ns")?;
    check_sorted_u32(&hardware.xbar_rows, "space.hardware.xbar_rows")?;
    check_sorted_u32(&hardware.xbar_cols, "space.hardware.xbar_cols")?;
    check_sorted_u32(&hardware.c_per_tile, "space.hardware.c_per_tile")?;
    check_sorted_u32(&hardware.t_per_router, "space.hardware.t_per_router")?;
    check_sorted_u32(&hardware.g_per_chip, "space.hardware.g_per_chip")?;
    check_sorted_f64(&hardware.glb_mb, "space.hardware.glb_mb")?;
    for (list, key) in [
        (&hardware.bits_cell, "space.hardware.bits_cell"),
        (&hardware.xbar_rows, "space.hardware.xbar_rows"),
        (&hardware.xbar_cols, "space.hardware.xbar_cols"),
        (&hardware.c_per_tile, "space.hardware.c_per_tile"),
        (&hardware.t_per_router, "space.hardware.t_per_router"),
        (&hardware.g_per_chip, "space.hardware.g_per_chip"),
    ] {
        if list.iter().any(|&v| v == 0) {
            return Err(SpecError::InvalidValue {
                key: (*key).into(),
                reason: "values must be >= 1".into(),
            });
        }
    }

    let execution_mode = match raw.execution_mode.as_deref() {
        None => match template {
            ModelTemplate::MobileNetV2Like => ExecutionMode::WeightStationary,
            ModelTemplate::ResNet50Like => ExecutionMode::WeightSwapping,
        },
        Some("weight-stationary") => ExecutionMode::WeightStationary,
        Some("weight-swapping") => ExecutionMode::WeightSwapping,
        Some(other) => {
            return Err(SpecError::InvalidValue {
                key: "space.execution_mode".into(),
                reason: format!("unknown mode {other:?}"),
            })
        }
    };

    let template_table = match raw.template_table {
        Some(path) => {
            let full = if std::path::Path::new(&path).is_absolute() {
                std::path::PathBuf::from(&path)
            } else {
                base_dir.join(&path)
            };
            let text =
                std::fs::read_to_string(&full).map_err(|e| SpecError::InvalidValue {
                    key: "space.template_table".into(),
                    reason: format!("{}: {e}", full.display()),
                })?;
            TemplateTable::parse(&text)?
        }
        None => builtin_template_table(template),
    };
    if template_table.stages.len() != stage_count {
        return Err(SpecError::InvalidValue {
            key: "space.stage_count".into(),
            reason: format!(
                "template table has {} searched stages, spec says {stage_count}",
                template_table.stages.len()
            ),
        });
    }

    let mut slot_offsets = Vec::with_capacity(stage_count);
    let mut total_slots = 0usize;
    for d in &depth_choices {
        slot_offsets.push(total_slots);
        total_slots += *d.iter().max().unwrap() as usize;
    }

    let mut spec = SearchSpaceSpec {
        template,
        stage_count,
        input_resolution,
        depth_choices,
        kernel_choices,
        expansion_choices,
        width_mult_choices,
        weight_bits_a,
        input_bits_a,
        weight_bits_b,
        input_bits_b,
        hardware,
        execution_mode,
        template_table,
        schema: GeneSchema { genes: Vec::new() },
        slot_offsets,
        total_slots,
    };
    spec.build_schema();
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::testutil::{localize_spec_text, reference_spec, tiny_spec, TINY_SPEC};
    use num_bigint::BigUint;
    use proptest::prelude::*;

    #[test]
    fn reference_spec_has_expected_shape() {
        let spec = reference_spec();
        assert_eq!(spec.stage_count, 6);
        assert_eq!(HARDWARE_GENES.len(), 9);
        assert_eq!(spec.template, ModelTemplate::MobileNetV2Like);
        // 6 depth + 24 slots * 2 model genes + width + 24 slots * 4 quant + 9 hw
        assert_eq!(spec.gene_count(), 6 + 48 + 1 + 96 + 9);
    }

    #[test]
    fn empty_choice_list_is_rejected() {
        let text = localize_spec_text(TINY_SPEC).replace("kernel_choices = [3, 5]", "kernel_choices = []");
        match load_spec(&text) {
            Err(SpecError::EmptyChoiceList(key)) => assert_eq!(key, "space.kernel_choices"),
            other => panic!("expected EmptyChoiceList, got {other:?}"),
        }
    }

    #[test]
    fn missing_hardware_key_is_named() {
        let text = localize_spec_text(TINY_SPEC).replace("xbar_rows = [64, 128]\n", "");
        match load_spec(&text) {
            Err(SpecError::MissingKey(key)) => assert_eq!(key, "space.hardware.xbar_rows"),
            other => panic!("expected MissingKey, got {other:?}"),
        }
    }

    #[test]
    fn unknown_template_is_rejected() {
        let text = localize_spec_text(TINY_SPEC).replace("mobilenet-v2", "vgg16");
        match load_spec(&text) {
            Err(SpecError::UnknownTemplate(t)) => assert_eq!(t, "vgg16"),
            other => panic!("expected UnknownTemplate, got {other:?}"),
        }
    }

    #[test]
    fn unsorted_choice_list_is_rejected() {
        let text = localize_spec_text(TINY_SPEC).replace("kernel_choices = [3, 5]", "kernel_choices = [5, 3]");
        assert!(matches!(
            load_spec(&text),
            Err(SpecError::UnsortedChoiceList { .. })
        ));
    }

    #[test]
    fn singleton_space_has_cardinality_one() {
        let text = localize_spec_text(TINY_SPEC)
            .replace("depth_choices = [1, 2]", "depth_choices = [1]")
            .replace("kernel_choices = [3, 5]", "kernel_choices = [3]")
            .replace("weight_bits_depthwise = [4, 8]", "weight_bits_depthwise = [8]")
            .replace("v_op = [0.6, 0.7]", "v_op = [0.7]")
            .replace("bits_cell = [2, 4]", "bits_cell = [4]")
            .replace("t_cycle_ns = [2.0, 4.0]", "t_cycle_ns = [4.0]")
            .replace("xbar_rows = [64, 128]", "xbar_rows = [64]")
            .replace("xbar_cols = [64, 128]", "xbar_cols = [64]")
            .replace("c_per_tile = [2, 4]", "c_per_tile = [4]")
            .replace("t_per_router = [2, 4]", "t_per_router = [4]")
            .replace("glb_mb = [1.0, 2.0]", "glb_mb = [1.0]");
        let spec = load_spec(&text).unwrap();
        let c = spec.cardinality();
        assert_eq!(c.model, BigUint::from(1u32));
        assert_eq!(c.quant, BigUint::from(1u32));
        assert_eq!(c.hardware, BigUint::from(1u32));
        assert_eq!(c.total, BigUint::from(1u32));
        // the unique design
        let mut rng = stream(3, "sampling");
        let d1 = spec.sample_uniform(&mut rng);
        let d2 = spec.sample_uniform(&mut rng);
        assert_eq!(d1, d2);
    }

    #[test]
    fn model_count_matches_depth_sum_formula() {
        // 1 stage, depths {1,2}, 2 kernels, 1 expansion: 2^1 + 2^2 = 6
        let spec = tiny_spec();
        let c = spec.cardinality();
        assert_eq!(c.model, BigUint::from(6u32));
        assert_eq!(&c.model * &c.quant * &c.hardware, c.total);
    }

    #[test]
    fn subspace_counts_multiply_exactly() {
        let c = reference_spec().cardinality();
        assert_eq!(&c.model * &c.quant * &c.hardware, c.total);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = reference_spec();
        let a = spec.sample_uniform(&mut stream(42, "sampling"));
        let b = spec.sample_uniform(&mut stream(42, "sampling"));
        assert_eq!(a, b);
        let c = spec.sample_uniform(&mut stream(43, "sampling"));
        assert_ne!(a.encoding, c.encoding);
    }

    #[test]
    fn two_choice_gene_frequencies_are_uniform() {
        // 1e5 draws of the first depth gene (2 choices); 3 sigma of binomial.
        let spec = tiny_spec();
        let mut rng = stream(5, "sampling");
        let n = 100_000u32;
        let mut ones = 0u32;
        for _ in 0..n {
            let d = spec.sample_uniform(&mut rng);
            if d.encoding[0] == 1 {
                ones += 1;
            }
        }
        let sigma = (0.25 * n as f64).sqrt();
        assert!(
            ((ones as f64) - n as f64 / 2.0).abs() < 3.0 * sigma,
            "ones={ones}"
        );
    }

    #[test]
    fn all_zero_encoding_decodes_to_first_choices() {
        let spec = reference_spec();
        let d = spec.decode(&vec![0; spec.gene_count()]).unwrap();
        assert_eq!(d.model.depths[0], spec.depth_choices[0][0]);
        assert_eq!(d.hardware.v_op, spec.hardware.v_op[0]);
        assert_eq!(d.hardware.glb_mb, spec.hardware.glb_mb[0]);
    }

    #[test]
    fn out_of_range_index_names_the_gene() {
        let spec = reference_spec();
        let mut enc = vec![0; spec.gene_count()];
        let pos = spec
            .schema()
            .genes
            .iter()
            .position(|g| g.name == "Xbar_rows")
            .unwrap();
        enc[pos] = 99;
        match spec.decode(&enc) {
            Err(SpecError::IndexOutOfRange { gene, .. }) => assert_eq!(gene, "Xbar_rows"),
            other => panic!("expected IndexOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn median_hardware_matches_reference_values() {
        let spec = reference_spec();
        let hw = spec.median_hardware();
        assert_eq!(hw.v_op, 0.7);
        assert_eq!(hw.bits_cell, 4);
        assert_eq!(hw.t_cycle_ns, 4.0);
        assert_eq!(hw.xbar_rows, 256);
        assert_eq!(hw.xbar_cols, 256);
        assert_eq!(hw.c_per_tile, 16);
        assert_eq!(hw.t_per_router, 8);
        assert_eq!(hw.g_per_chip, 16);
        assert_eq!(hw.glb_mb, 4.0);
        assert_eq!(hw.macros_available(), 2048);
    }

    #[test]
    fn semantic_fingerprint_ignores_padding_genes() {
        let spec = tiny_spec();
        // depth 1: slot 1 is padding; flip its kernel index.
        let mut enc = vec![0; spec.gene_count()];
        let base = spec.decode(&enc).unwrap();
        assert_eq!(base.model.depths[0], 1);
        let pad_kernel = spec
            .schema()
            .genes
            .iter()
            .position(|g| g.name == "kernel[s0.b1]")
            .unwrap();
        enc[pad_kernel] = 1;
        let padded = spec.decode(&enc).unwrap();
        assert_ne!(base.encoding, padded.encoding);
        assert_eq!(
            base.semantic_fingerprint(&spec),
            padded.semantic_fingerprint(&spec)
        );
    }

    proptest! {
        #[test]
        fn encode_decode_round_trips(seed in 0u64..10_000) {
            let spec = reference_spec();
            let d = spec.sample_uniform(&mut stream(seed, "sampling"));
            let enc = spec.encode(&d.model, &d.quant, &d.hardware).unwrap();
            prop_assert_eq!(&enc, &d.encoding);
            let d2 = spec.decode(&enc).unwrap();
            prop_assert_eq!(d, d2);
        }

        #[test]
        fn sampled_values_stay_in_choice_lists(seed in 0u64..2_000) {
            let spec = reference_spec();
            let d = spec.sample_uniform(&mut stream(seed, "sampling"));
            for (gene, idx) in spec.schema().genes.iter().zip(&d.encoding) {
                prop_assert!((*idx as usize) < gene.choices);
            }
            prop_assert!(spec.kernel_choices.contains(&d.model.kernels[0]));
            prop_assert!(spec.hardware.xbar_rows.contains(&d.hardware.xbar_rows));
        }
    }
}
