//! Shared fixtures for unit tests.

use crate::space::{load_spec, ModelGenome, QuantPolicy, SearchSpaceSpec};

pub const TINY_SPEC: &str = r#"
[space]
template = "mobilenet-v2"
stage_count = 1
input_resolution = 32
depth_choices = [1, 2]
kernel_choices = [3, 5]
expansion_choices = [3.0]
weight_bits_depthwise = [4, 8]
input_bits_depthwise = [8]
weight_bits_pointwise = [8]
input_bits_pointwise = [8]
template_table = "data/templates/tiny_one_stage.toml"

[space.hardware]
v_op = [0.6, 0.7]
bits_cell = [2, 4]
t_cycle_ns = [2.0, 4.0]
xbar_rows = [64, 128]
xbar_cols = [64, 128]
c_per_tile = [2, 4]
t_per_router = [2, 4]
g_per_chip = [4]
glb_mb = [1.0, 2.0]
"#;

/// Absolutize the template-table path so tests work from any directory.
pub fn localize_spec_text(text: &str) -> String {
    text.replace(
        "data/templates/tiny_one_stage.toml",
        std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../data/templates/tiny_one_stage.toml")
            .to_str()
            .unwrap(),
    )
}

pub fn tiny_spec() -> SearchSpaceSpec {
    load_spec(&localize_spec_text(TINY_SPEC)).expect("tiny spec loads")
}

pub fn reference_spec() -> SearchSpaceSpec {
    load_spec(include_str!("../../../data/configs/reference_mobilenet.toml"))
        .expect("reference spec loads")
}

/// Genome with every stage at `depth` and every slot at the given values.
pub fn uniform_genome(
    spec: &SearchSpaceSpec,
    depth: u32,
    kernel: u32,
    expansion: f64,
    bits: u32,
) -> (ModelGenome, QuantPolicy) {
    let slots = spec.total_slots();
    (
        ModelGenome {
            depths: vec![depth; spec.stage_count],
            kernels: vec![kernel; slots],
            expansions: vec![expansion; slots],
            width_mult: spec.width_mult_choices[0],
        },
        QuantPolicy {
            weight_bits_a: vec![bits; slots],
            input_bits_a: vec![bits; slots],
            weight_bits_b: vec![bits; slots],
            input_bits_b: vec![bits; slots],
        },
    )
}
