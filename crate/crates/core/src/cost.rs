//! Analytical cost model for the crossbar / tile / tile-group hierarchy:
//! mapping, feasibility, energy, delay, area and the derived figures of
//! merit.
//!
//! The formulas are deliberately simple and strictly monotone in the
//! intuitive directions; all technology constants live in
//! [`TechnologyProfile`] data files, never in code. Inputs are bit-serial
//! (1-bit DAC), so delay and drive energy scale with input precision, and
//! partial sums are digitized at full precision
//! (adc_bits = Bits_cell + ceil(log2(Xbar_rows)) - 1).

use serde::Deserialize;
use thiserror::Error;

use crate::space::{DesignPoint, ExecutionMode, HardwareConfig};
use crate::workload::{activity_factor, ConvKind, Histogram, LayerWorkload};

/// Average router hops charged per byte moved between a tile and the GLB.
const ROUTER_HOPS: f64 = 2.0;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("missing histogram for layer {0}")]
    MissingHistogram(usize),
    #[error("technology profile does not parse: {0}")]
    Parse(String),
    #[error("technology profile field {0} must be positive")]
    NonPositiveField(&'static str),
}

/// Per-node technology constants. Energies in pJ, areas in um^2 unless the
/// field name says otherwise, bandwidths in bytes/ns.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct TechnologyProfile {
    pub name: String,
    pub reference_voltage: f64,
    /// Per active cell, per input bit-slice, at the reference voltage.
    pub cell_read_energy_pj: f64,
    /// Scaled by 2^adc_bits per conversion.
    pub adc_energy_coeff_pj: f64,
    /// Per row activation (driver + DAC).
    pub driver_energy_pj: f64,
    pub buffer_energy_pj_per_byte: f64,
    pub router_energy_pj_per_byte: f64,
    /// Weight transfer cost in swap mode.
    pub dram_energy_pj_per_byte: f64,
    pub cell_area_um2: f64,
    pub adc_area_um2: f64,
    /// Columns sharing one ADC.
    pub adc_column_share: u32,
    pub macro_peripheral_area_um2: f64,
    pub router_area_mm2: f64,
    pub glb_area_mm2_per_mb: f64,
    /// Fraction added on top of macro area for tile buffers/control.
    pub tile_area_overhead: f64,
    pub buffer_bandwidth_bytes_per_ns: f64,
    pub dram_bandwidth_bytes_per_ns: f64,
}

const RRAM_32NM: &str = include_str!("../../../data/profiles/rram_32nm.toml");
const SRAM_7NM: &str = include_str!("../../../data/profiles/sram_7nm.toml");

impl TechnologyProfile {
    pub fn parse(text: &str) -> Result<TechnologyProfile, CostError> {
        let profile: TechnologyProfile =
            toml::from_str(text).map_err(|e| CostError::Parse(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn builtin(name: &str) -> Option<TechnologyProfile> {
        let text = match name {
            "rram-32nm" => RRAM_32NM,
            "sram-7nm" => SRAM_7NM,
            _ => return None,
        };
        Some(TechnologyProfile::parse(text).expect("built-in profile parses"))
    }

    fn validate(&self) -> Result<(), CostError> {
        let fields: [(&'static str, f64); 15] = [
            ("reference_voltage", self.reference_voltage),
            ("cell_read_energy_pj", self.cell_read_energy_pj),
            ("adc_energy_coeff_pj", self.adc_energy_coeff_pj),
            ("driver_energy_pj", self.driver_energy_pj),
            ("buffer_energy_pj_per_byte", self.buffer_energy_pj_per_byte),
            ("router_energy_pj_per_byte", self.router_energy_pj_per_byte),
            ("dram_energy_pj_per_byte", self.dram_energy_pj_per_byte),
            ("cell_area_um2", self.cell_area_um2),
            ("adc_area_um2", self.adc_area_um2),
            ("adc_column_share", self.adc_column_share as f64),
            ("macro_peripheral_area_um2", self.macro_peripheral_area_um2),
            ("router_area_mm2", self.router_area_mm2),
            ("glb_area_mm2_per_mb", self.glb_area_mm2_per_mb),
            (
                "buffer_bandwidth_bytes_per_ns",
                self.buffer_bandwidth_bytes_per_ns,
            ),
            (
                "dram_bandwidth_bytes_per_ns",
                self.dram_bandwidth_bytes_per_ns,
            ),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CostError::NonPositiveField(name));
            }
        }
        if !(self.tile_area_overhead >= 0.0) || !self.tile_area_overhead.is_finite() {
            return Err(CostError::NonPositiveField("tile_area_overhead"));
        }
        Ok(())
    }

    /// Canonical text form hashed into run manifests.
    pub fn canonical_string(&self) -> String {
        format!(
            "profile-v1\nname={}\nvref={}\ncell={}\nadc={}\ndriver={}\nbuffer={}\nrouter={}\ndram={}\ncell_area={}\nadc_area={}\nadc_share={}\nperipheral={}\nrouter_area={}\nglb_density={}\noverhead={}\nbw={}\ndram_bw={}\n",
            self.name,
            self.reference_voltage,
            self.cell_read_energy_pj,
            self.adc_energy_coeff_pj,
            self.driver_energy_pj,
            self.buffer_energy_pj_per_byte,
            self.router_energy_pj_per_byte,
            self.dram_energy_pj_per_byte,
            self.cell_area_um2,
            self.adc_area_um2,
            self.adc_column_share,
            self.macro_peripheral_area_um2,
            self.router_area_mm2,
            self.glb_area_mm2_per_mb,
            self.tile_area_overhead,
            self.buffer_bandwidth_bytes_per_ns,
            self.dram_bandwidth_bytes_per_ns,
        )
    }
}

/// Crossbar allocation of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMapping {
    pub layer: usize,
    pub cells_per_weight: u64,
    pub row_tiles: u64,
    pub col_tiles: u64,
    pub crossbars: u64,
    /// First macro index assigned by the sequential fill.
    pub macro_start: u64,
}

/// Network-to-chip placement summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    pub per_layer: Vec<LayerMapping>,
    /// Total macros required (M).
    pub total_macros: u64,
    pub macros_available: u64,
    /// Layers resident together; a single group in weight-stationary mode.
    pub swap_groups: Vec<Vec<usize>>,
}

impl MappingResult {
    pub fn largest_layer_macros(&self) -> u64 {
        self.per_layer.iter().map(|l| l.crossbars).max().unwrap_or(0)
    }
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    64 - (x - 1).leading_zeros()
}

/// ADC resolution needed for full-precision partial sums.
pub fn adc_bits(hw: &HardwareConfig) -> u32 {
    hw.bits_cell + ceil_log2(hw.xbar_rows as u64) - 1
}

/// Input bit-slices with 1-bit DACs.
fn bit_slices(layer: &LayerWorkload) -> u64 {
    layer.input_bits as u64
}

fn map_layer(layer: &LayerWorkload, hw: &HardwareConfig) -> (u64, u64, u64, u64) {
    let cpw = ceil_div(layer.weight_bits as u64, hw.bits_cell as u64);
    match layer.kind {
        ConvKind::Depthwise => {
            // Block-diagonal packing: several k^2-row groups share a macro.
            let per_rows = hw.xbar_rows as u64 / layer.rows;
            let per_cols = hw.xbar_cols as u64 / cpw;
            let groups_per_crossbar = per_rows.min(per_cols).max(1);
            let crossbars = ceil_div(layer.cols, groups_per_crossbar);
            (cpw, 1, 1, crossbars)
        }
        _ => {
            let row_tiles = ceil_div(layer.rows, hw.xbar_rows as u64);
            let col_tiles = ceil_div(layer.cols * cpw, hw.xbar_cols as u64);
            (cpw, row_tiles, col_tiles, row_tiles * col_tiles)
        }
    }
}

/// Place every layer onto crossbars with a sequential fill.
pub fn map_network(workloads: &[LayerWorkload], hw: &HardwareConfig) -> MappingResult {
    let available = hw.macros_available();
    let mut per_layer = Vec::with_capacity(workloads.len());
    let mut total = 0u64;

    for layer in workloads {
        let (cpw, row_tiles, col_tiles, crossbars) = map_layer(layer, hw);
        per_layer.push(LayerMapping {
            layer: layer.id,
            cells_per_weight: cpw,
            row_tiles,
            col_tiles,
            crossbars,
            macro_start: 0,
        });
        total += crossbars;
    }

    let swap_groups = match hw.execution_mode {
        ExecutionMode::WeightStationary => {
            let mut cursor = 0u64;
            for lm in per_layer.iter_mut() {
                lm.macro_start = cursor;
                cursor += lm.crossbars;
            }
            vec![(0..workloads.len()).collect()]
        }
        ExecutionMode::WeightSwapping => {
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut group: Vec<usize> = Vec::new();
            let mut cursor = 0u64;
            for (i, lm) in per_layer.iter_mut().enumerate() {
                if !group.is_empty() && cursor + lm.crossbars > available {
                    groups.push(std::mem::take(&mut group));
                    cursor = 0;
                }
                lm.macro_start = cursor;
                cursor += lm.crossbars;
                group.push(i);
            }
            if !group.is_empty() {
                groups.push(group);
            }
            groups
        }
    };

    MappingResult {
        per_layer,
        total_macros: total,
        macros_available: available,
        swap_groups,
    }
}

/// Capacity test: stationary mode needs the whole network resident,
/// swap mode only the largest layer.
pub fn check_feasibility(
    mapping: &MappingResult,
    _hw: &HardwareConfig,
    mode: ExecutionMode,
) -> bool {
    match mode {
        ExecutionMode::WeightStationary => mapping.macros_available >= mapping.total_macros,
        ExecutionMode::WeightSwapping => mapping.macros_available >= mapping.largest_layer_macros(),
    }
}

/// Chip area in mm^2: macro array + ADCs + peripherals with tile overhead,
/// plus routers and the global buffer.
pub fn compute_area(hw: &HardwareConfig, tech: &TechnologyProfile) -> f64 {
    let macros = hw.macros_available() as f64;
    let macro_um2 = hw.xbar_rows as f64 * hw.xbar_cols as f64 * tech.cell_area_um2
        + tech.adc_area_um2 * hw.xbar_cols as f64 / tech.adc_column_share as f64
        + tech.macro_peripheral_area_um2;
    macros * macro_um2 * (1.0 + tech.tile_area_overhead) / 1e6
        + hw.g_per_chip as f64 * tech.router_area_mm2
        + hw.glb_mb * tech.glb_area_mm2_per_mb
}

/// Per-layer energy decomposition, in pJ.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyTerms {
    pub driver: f64,
    pub cell_read: f64,
    pub adc: f64,
    pub movement: f64,
    pub dram: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.driver + self.cell_read + self.adc + self.movement + self.dram
    }
}

/// Energy terms for every layer; the data-dependent crossbar read term is
/// scaled by the input histogram's activity factor.
pub fn energy_terms(
    mapping: &MappingResult,
    workloads: &[LayerWorkload],
    histograms: &[Histogram],
    hw: &HardwareConfig,
    tech: &TechnologyProfile,
) -> Result<Vec<EnergyTerms>, CostError> {
    let voltage_scale = (hw.v_op / tech.reference_voltage).powi(2);
    let adc_scale = (1u64 << adc_bits(hw)) as f64;
    let mut out = Vec::with_capacity(workloads.len());
    for (layer, lm) in workloads.iter().zip(&mapping.per_layer) {
        let hist = histograms
            .get(layer.id)
            .ok_or(CostError::MissingHistogram(layer.id))?;
        let af = activity_factor(hist).map_err(|_| CostError::MissingHistogram(layer.id))?;
        let slices = bit_slices(layer) as f64;
        let positions = layer.positions as f64;

        let row_activations = match layer.kind {
            ConvKind::Depthwise => layer.rows as f64 * layer.cols as f64 * positions * slices,
            _ => layer.rows as f64 * positions * slices,
        };
        let active_cells = layer.weights as f64 * lm.cells_per_weight as f64 * positions;
        let conversions = layer.cols as f64
            * lm.cells_per_weight as f64
            * positions
            * slices
            * lm.row_tiles as f64;

        let dram = match hw.execution_mode {
            ExecutionMode::WeightSwapping => layer.weight_bytes() * tech.dram_energy_pj_per_byte,
            ExecutionMode::WeightStationary => 0.0,
        };

        out.push(EnergyTerms {
            driver: row_activations * tech.driver_energy_pj,
            cell_read: active_cells * tech.cell_read_energy_pj * voltage_scale * af * slices,
            adc: conversions * tech.adc_energy_coeff_pj * adc_scale,
            movement: layer.traffic_bytes()
                * (tech.buffer_energy_pj_per_byte + ROUTER_HOPS * tech.router_energy_pj_per_byte),
            dram,
        });
    }
    Ok(out)
}

/// Total inference energy in mJ.
pub fn compute_energy(
    mapping: &MappingResult,
    workloads: &[LayerWorkload],
    histograms: &[Histogram],
    hw: &HardwareConfig,
    tech: &TechnologyProfile,
) -> Result<f64, CostError> {
    let terms = energy_terms(mapping, workloads, histograms, hw, tech)?;
    Ok(terms.iter().map(|t| t.total()).sum::<f64>() / 1e9)
}

/// One layer's latency in ns: bit-serial compute over all output positions
/// (row/column tiles run in parallel macros) plus buffer traffic, plus the
/// DRAM weight load in swap mode.
pub fn layer_delay_ns(layer: &LayerWorkload, hw: &HardwareConfig, tech: &TechnologyProfile) -> f64 {
    let compute = layer.positions as f64 * bit_slices(layer) as f64 * hw.t_cycle_ns;
    let transfer = layer.traffic_bytes() / tech.buffer_bandwidth_bytes_per_ns;
    let dram = match hw.execution_mode {
        ExecutionMode::WeightSwapping => layer.weight_bytes() / tech.dram_bandwidth_bytes_per_ns,
        ExecutionMode::WeightStationary => 0.0,
    };
    compute + transfer + dram
}

/// Sequential execution over layers; returns microseconds.
pub fn compute_delay(
    _mapping: &MappingResult,
    workloads: &[LayerWorkload],
    hw: &HardwareConfig,
    tech: &TechnologyProfile,
) -> f64 {
    workloads
        .iter()
        .map(|l| layer_delay_ns(l, hw, tech))
        .sum::<f64>()
        / 1e3
}

/// Energy (mJ), delay (us), area (mm^2), their products and efficiency
/// figures, plus the capacity-fit flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareMetrics {
    pub energy_mj: f64,
    pub delay_us: f64,
    pub area_mm2: f64,
    pub edap: f64,
    pub tops_per_w: f64,
    pub tops_per_mm2: f64,
    pub utilization: f64,
    pub feasible: bool,
}

impl HardwareMetrics {
    /// Metrics carrying only an (E, D, A) triple; used for score identities
    /// on externally given numbers.
    pub fn from_eda(energy_mj: f64, delay_us: f64, area_mm2: f64) -> HardwareMetrics {
        HardwareMetrics {
            energy_mj,
            delay_us,
            area_mm2,
            edap: edap(energy_mj, delay_us, area_mm2),
            tops_per_w: 0.0,
            tops_per_mm2: 0.0,
            utilization: 0.0,
            feasible: true,
        }
    }
}

/// EDAP in mJ*ms*mm^2.
pub fn edap(energy_mj: f64, delay_us: f64, area_mm2: f64) -> f64 {
    energy_mj * (delay_us / 1000.0) * area_mm2
}

/// Full evaluation of one design against prepared workloads and histograms.
/// Infeasible designs still yield metrics, flagged `feasible = false`.
pub fn evaluate(
    design: &DesignPoint,
    workloads: &[LayerWorkload],
    histograms: &[Histogram],
    tech: &TechnologyProfile,
) -> Result<HardwareMetrics, CostError> {
    let hw = &design.hardware;
    let mapping = map_network(workloads, hw);
    let feasible = check_feasibility(&mapping, hw, hw.execution_mode);
    let energy_mj = compute_energy(&mapping, workloads, histograms, hw, tech)?;
    let delay_us = compute_delay(&mapping, workloads, hw, tech);
    let area_mm2 = compute_area(hw, tech);

    let total_ops = 2.0 * crate::workload::total_macs(workloads) as f64;
    let seconds = delay_us * 1e-6;
    let tops = total_ops / seconds / 1e12;
    let watts = (energy_mj * 1e-3) / seconds;

    let programmed_cells: f64 = workloads
        .iter()
        .zip(&mapping.per_layer)
        .map(|(l, m)| l.weights as f64 * m.cells_per_weight as f64)
        .sum();
    let total_cells = mapping.macros_available as f64 * hw.xbar_rows as f64 * hw.xbar_cols as f64;
    let utilization =
        (programmed_cells / (total_cells * mapping.swap_groups.len() as f64)).clamp(0.0, 1.0);

    Ok(HardwareMetrics {
        energy_mj,
        delay_us,
        area_mm2,
        edap: edap(energy_mj, delay_us, area_mm2),
        tops_per_w: tops / watts,
        tops_per_mm2: tops / area_mm2,
        utilization,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::space::ExecutionMode;
    use crate::testutil::{reference_spec, uniform_genome};
    use crate::workload::{build_histogram, expand_model, synth_values};
    use crate::ValueDistribution;
    use rand::Rng;

    fn profile() -> TechnologyProfile {
        TechnologyProfile::builtin("rram-32nm").unwrap()
    }

    fn dense_layer(
        rows: u64,
        cols: u64,
        positions: u64,
        w_bits: u32,
        in_bits: u32,
    ) -> LayerWorkload {
        LayerWorkload {
            id: 0,
            name: "dense".into(),
            kind: ConvKind::Standard,
            rows,
            cols,
            positions,
            macs: rows * cols * positions,
            weight_bits: w_bits,
            input_bits: in_bits,
            weights: rows * cols,
            input_bytes: rows as f64 * positions as f64 * in_bits as f64 / 8.0,
            output_bytes: cols as f64 * positions as f64 * in_bits as f64 / 8.0,
        }
    }

    fn hw(rows: u32, cols: u32, bits_cell: u32, macros: (u32, u32, u32)) -> HardwareConfig {
        HardwareConfig {
            v_op: 0.7,
            bits_cell,
            t_cycle_ns: 4.0,
            xbar_rows: rows,
            xbar_cols: cols,
            c_per_tile: macros.0,
            t_per_router: macros.1,
            g_per_chip: macros.2,
            glb_mb: 4.0,
            execution_mode: ExecutionMode::WeightStationary,
        }
    }

    fn flat_histograms(workloads: &[LayerWorkload], value: f64) -> Vec<Histogram> {
        workloads
            .iter()
            .map(|l| build_histogram(&vec![value; 64], l.input_bits).unwrap())
            .collect()
    }

    #[test]
    fn crossbar_count_matches_hand_formula() {
        // C_in=64, k=3 -> R=576; C=128; w=8 bits at 4 bits/cell -> 2 cells;
        // 256x256 arrays: ceil(576/256) * ceil(256/256) = 3
        let layer = dense_layer(576, 128, 1, 8, 8);
        let m = map_network(&[layer], &hw(256, 256, 4, (1, 1, 1)));
        assert_eq!(m.per_layer[0].crossbars, 3);
        assert_eq!(m.per_layer[0].row_tiles, 3);
        assert_eq!(m.per_layer[0].col_tiles, 1);
    }

    #[test]
    fn exact_fill_uses_one_crossbar() {
        let layer = dense_layer(256, 128, 1, 8, 8); // 128 * 2 cells = 256 cols
        let m = map_network(&[layer], &hw(256, 256, 4, (1, 1, 1)));
        assert_eq!(m.per_layer[0].crossbars, 1);
    }

    #[test]
    fn depthwise_block_diagonal_packing() {
        // k=3 (9 rows/group), 2 cells/weight, 64x64 array:
        // groups = min(64/9, 64/2) = 7; 32 channels -> ceil(32/7) = 5
        let layer = LayerWorkload {
            id: 0,
            name: "dw".into(),
            kind: ConvKind::Depthwise,
            rows: 9,
            cols: 32,
            positions: 16,
            macs: 9 * 32 * 16,
            weight_bits: 8,
            input_bits: 8,
            weights: 9 * 32,
            input_bytes: 1.0,
            output_bytes: 1.0,
        };
        let m = map_network(&[layer], &hw(64, 64, 4, (1, 1, 1)));
        assert_eq!(m.per_layer[0].crossbars, 5);
    }

    #[test]
    fn feasibility_boundaries() {
        let layer = dense_layer(256, 128, 1, 8, 8); // 1 crossbar
        let exact = hw(256, 256, 4, (1, 1, 1));
        let m = map_network(&[layer.clone()], &exact);
        assert!(check_feasibility(&m, &exact, ExecutionMode::WeightStationary));

        // two copies need 2 macros; only 1 available
        let m2 = map_network(
            &[layer.clone(), {
                let mut l = layer.clone();
                l.id = 1;
                l
            }],
            &exact,
        );
        assert!(!check_feasibility(&m2, &exact, ExecutionMode::WeightStationary));
        // swap mode: largest single layer fits
        assert!(check_feasibility(&m2, &exact, ExecutionMode::WeightSwapping));
    }

    #[test]
    fn area_is_monotone_and_glb_linear() {
        let tech = profile();
        let base = hw(256, 256, 4, (16, 8, 16));
        let mut bigger = base.clone();
        bigger.g_per_chip = 32;
        assert!(compute_area(&bigger, &tech) > compute_area(&base, &tech));

        let mut glb8 = base.clone();
        glb8.glb_mb = 8.0;
        let delta = compute_area(&glb8, &tech) - compute_area(&base, &tech);
        assert!((delta - 4.0 * tech.glb_area_mm2_per_mb).abs() < 1e-9);
    }

    #[test]
    fn zero_activity_kills_only_the_cell_read_term() {
        let tech = profile();
        let layer = dense_layer(256, 128, 4, 8, 8);
        let config = hw(256, 256, 4, (1, 1, 1));
        let m = map_network(&[layer.clone()], &config);
        let zero = energy_terms(
            &m,
            &[layer.clone()],
            &flat_histograms(&[layer.clone()], 0.0),
            &config,
            &tech,
        )
        .unwrap();
        assert_eq!(zero[0].cell_read, 0.0);
        assert!(zero[0].driver > 0.0 && zero[0].adc > 0.0 && zero[0].movement > 0.0);

        let half = energy_terms(
            &m,
            &[layer.clone()],
            &flat_histograms(&[layer], 0.5),
            &config,
            &tech,
        )
        .unwrap();
        assert!(half[0].cell_read > 0.0);
        assert_eq!(half[0].adc, zero[0].adc);
        assert_eq!(half[0].driver, zero[0].driver);
        assert_eq!(half[0].movement, zero[0].movement);
    }

    #[test]
    fn doubling_voltage_quadruples_only_cell_read() {
        let tech = profile();
        let layer = dense_layer(256, 128, 4, 8, 8);
        let lo = hw(256, 256, 4, (1, 1, 1));
        let mut hi = lo.clone();
        hi.v_op = 1.4;
        let m = map_network(&[layer.clone()], &lo);
        let hists = flat_histograms(&[layer.clone()], 0.5);
        let a = energy_terms(&m, &[layer.clone()], &hists, &lo, &tech).unwrap()[0];
        let b = energy_terms(&m, &[layer], &hists, &hi, &tech).unwrap()[0];
        assert!((b.cell_read / a.cell_read - 4.0).abs() < 1e-12);
        assert_eq!(a.driver, b.driver);
        assert_eq!(a.adc, b.adc);
        assert_eq!(a.movement, b.movement);
    }

    #[test]
    fn energy_and_delay_are_additive_over_layers() {
        let tech = profile();
        let config = hw(256, 256, 4, (4, 1, 1));
        let l0 = dense_layer(256, 128, 4, 8, 8);
        let mut l1 = l0.clone();
        l1.id = 1;
        let both = vec![l0.clone(), l1];
        let m_both = map_network(&both, &config);
        let m_one = map_network(&[l0.clone()], &config);
        let hists = flat_histograms(&both, 0.5);

        let e_both = compute_energy(&m_both, &both, &hists, &config, &tech).unwrap();
        let e_one = compute_energy(&m_one, &[l0.clone()], &hists[..1], &config, &tech).unwrap();
        assert!((e_both - 2.0 * e_one).abs() < 1e-15);

        let d_both = compute_delay(&m_both, &both, &config, &tech);
        let d_one = compute_delay(&m_one, &[l0], &config, &tech);
        assert!((d_both - 2.0 * d_one).abs() < 1e-12);
    }

    #[test]
    fn three_layer_delay_matches_per_layer_oracle() {
        let tech = profile();
        let config = hw(128, 128, 2, (8, 2, 2));
        let layers: Vec<LayerWorkload> = (0..3u64)
            .map(|i| {
                let mut l = dense_layer(100 + i, 60 + i, 5 + i, 8, 6);
                l.id = i as usize;
                l
            })
            .collect();
        let mapping = map_network(&layers, &config);
        let expected: f64 = layers
            .iter()
            .map(|l| layer_delay_ns(l, &config, &tech))
            .sum::<f64>()
            / 1e3;
        assert_eq!(compute_delay(&mapping, &layers, &config, &tech), expected);
    }

    #[test]
    fn minimal_layer_delay_is_one_cycle() {
        let tech = profile();
        let config = hw(64, 64, 4, (1, 1, 1));
        let mut layer = dense_layer(1, 1, 1, 8, 1);
        layer.input_bytes = 0.0;
        layer.output_bytes = 0.0;
        assert_eq!(layer_delay_ns(&layer, &config, &tech), config.t_cycle_ns);
    }

    #[test]
    fn halving_cycle_time_halves_compute_term() {
        let tech = profile();
        let mut fast = hw(256, 256, 4, (1, 1, 1));
        let slow = fast.clone();
        fast.t_cycle_ns = 2.0;
        let mut layer = dense_layer(256, 128, 64, 8, 8);
        layer.input_bytes = 0.0;
        layer.output_bytes = 0.0;
        assert!(
            (layer_delay_ns(&layer, &slow, &tech) - 2.0 * layer_delay_ns(&layer, &fast, &tech))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn full_chip_utilization_hits_one() {
        let tech = profile();
        let config = hw(256, 256, 4, (1, 1, 1));
        // weights * cpw = 128*256*2 = 256*256 cells = the whole single macro
        let layer = dense_layer(256, 128, 4, 8, 8);
        let spec = reference_spec();
        let design = {
            let (model, quant) = uniform_genome(&spec, 2, 3, 3.0, 8);
            let mut d = spec
                .design_from_parts(model, quant, spec.median_hardware())
                .unwrap();
            d.hardware = config;
            d
        };
        let hists = flat_histograms(&[layer.clone()], 0.5);
        let metrics = evaluate(&design, &[layer], &hists, &tech).unwrap();
        assert_eq!(metrics.utilization, 1.0);
        assert!(metrics.feasible);
        assert_eq!(
            metrics.edap,
            edap(metrics.energy_mj, metrics.delay_us, metrics.area_mm2)
        );
    }

    #[test]
    fn evaluate_reports_infeasible_designs() {
        let tech = profile();
        let spec = reference_spec();
        let (model, quant) = uniform_genome(&spec, 4, 7, 6.0, 8);
        let mut config = spec.median_hardware();
        config.c_per_tile = 4;
        config.t_per_router = 2;
        config.g_per_chip = 4;
        config.xbar_rows = 64;
        config.xbar_cols = 64;
        let design = spec
            .design_from_parts(model.clone(), quant.clone(), config)
            .unwrap();
        let layers = expand_model(&spec, &model, &quant, 224).unwrap();
        let hists = flat_histograms(&layers, 0.5);
        let metrics = evaluate(&design, &layers, &hists, &tech).unwrap();
        assert!(!metrics.feasible);
        assert!(metrics.energy_mj > 0.0 && metrics.delay_us > 0.0 && metrics.area_mm2 > 0.0);
    }

    #[test]
    fn missing_histogram_is_an_error() {
        let tech = profile();
        let config = hw(256, 256, 4, (1, 1, 1));
        let layer = dense_layer(256, 128, 4, 8, 8);
        let m = map_network(&[layer.clone()], &config);
        assert!(matches!(
            compute_energy(&m, &[layer], &[], &config, &tech),
            Err(CostError::MissingHistogram(0))
        ));
    }

    #[test]
    fn swap_mode_charges_dram_and_groups_layers() {
        let tech = profile();
        let mut config = hw(256, 256, 4, (2, 1, 1)); // 2 macros
        config.execution_mode = ExecutionMode::WeightSwapping;
        let layers: Vec<LayerWorkload> = (0..3)
            .map(|i| {
                let mut l = dense_layer(256, 128, 4, 8, 8); // 1 macro each
                l.id = i;
                l
            })
            .collect();
        let m = map_network(&layers, &config);
        assert_eq!(m.swap_groups.len(), 2); // 2 + 1 layers
        assert!(check_feasibility(&m, &config, ExecutionMode::WeightSwapping));
        let hists = flat_histograms(&layers, 0.5);
        let terms = energy_terms(&m, &layers, &hists, &config, &tech).unwrap();
        assert!(terms.iter().all(|t| t.dram > 0.0));
        let d = layer_delay_ns(&layers[0], &config, &tech);
        let mut stationary = config.clone();
        stationary.execution_mode = ExecutionMode::WeightStationary;
        assert!(d > layer_delay_ns(&layers[0], &stationary, &tech));
    }

    #[test]
    fn metrics_invariant_under_layer_permutation() {
        let tech = profile();
        let spec = reference_spec();
        let (model, quant) = uniform_genome(&spec, 2, 3, 4.0, 8);
        let design = spec
            .design_from_parts(model.clone(), quant.clone(), spec.median_hardware())
            .unwrap();
        let layers = expand_model(&spec, &model, &quant, 224).unwrap();
        let mut hists = Vec::new();
        for l in &layers {
            let vals = synth_values(
                ValueDistribution::UniformNonneg,
                256,
                &mut stream(l.id as u64, "synth-values"),
            );
            hists.push(build_histogram(&vals, l.input_bits).unwrap());
        }
        let a = evaluate(&design, &layers, &hists, &tech).unwrap();

        let mut perm: Vec<usize> = (0..layers.len()).collect();
        perm.reverse();
        let mut layers_p: Vec<LayerWorkload> = perm.iter().map(|&i| layers[i].clone()).collect();
        let hists_p: Vec<Histogram> = perm.iter().map(|&i| hists[i].clone()).collect();
        // histogram lookup is by layer id, so renumber to match positions
        for (pos, l) in layers_p.iter_mut().enumerate() {
            l.id = pos;
        }
        let b = evaluate(&design, &layers_p, &hists_p, &tech).unwrap();
        assert!((a.energy_mj - b.energy_mj).abs() < 1e-12 * a.energy_mj);
        assert_eq!(a.delay_us, b.delay_us);
        assert_eq!(a.area_mm2, b.area_mm2);
    }

    #[test]
    fn mapping_monotonicity_fuzz() {
        // 10^4 fuzzed (layer, hardware) pairs: growing the array or the
        // cell capacity never increases the crossbar count.
        let mut rng = stream(17, "fuzz");
        for _ in 0..10_000 {
            let dense = rng.random::<f64>() < 0.7;
            let k = [1u64, 3, 5, 7][rng.random_range(0..4)];
            let (rows, cols) = if dense {
                (
                    k * k * (1 + rng.random_range(0..64)),
                    1 + rng.random_range(0..512),
                )
            } else {
                (k * k, 1 + rng.random_range(0..512))
            };
            let layer = LayerWorkload {
                id: 0,
                name: String::new(),
                kind: if dense {
                    ConvKind::Standard
                } else {
                    ConvKind::Depthwise
                },
                rows,
                cols,
                positions: 1,
                macs: rows * cols,
                weight_bits: [4u32, 6, 8][rng.random_range(0..3)],
                input_bits: 8,
                weights: rows * cols,
                input_bytes: 1.0,
                output_bytes: 1.0,
            };
            let xr = [64u32, 128, 256, 512][rng.random_range(0..4)];
            let xc = [64u32, 128, 256, 512][rng.random_range(0..4)];
            let bc = [1u32, 2, 4, 8][rng.random_range(0..4)];
            let base = hw(xr, xc, bc, (1, 1, 1));

            let count =
                |h: &HardwareConfig| map_network(&[layer.clone()], h).per_layer[0].crossbars;
            let c0 = count(&base);

            let mut wider = base.clone();
            wider.xbar_cols *= 2;
            assert!(count(&wider) <= c0);

            let mut taller = base.clone();
            taller.xbar_rows *= 2;
            assert!(count(&taller) <= c0);

            let mut denser = base.clone();
            denser.bits_cell *= 2;
            let m0 = map_network(&[layer.clone()], &base).per_layer[0].cells_per_weight;
            let m1 = map_network(&[layer.clone()], &denser).per_layer[0].cells_per_weight;
            assert!(m1 <= m0);
            assert!(count(&denser) <= c0);
        }
    }

    #[test]
    fn feasibility_is_monotone_in_capacity() {
        let layer = dense_layer(512, 512, 1, 8, 4); // 2x4 = 8 macros at 256x256
        for c in 1..=12u32 {
            let config = hw(256, 256, 4, (c, 1, 1));
            let m = map_network(&[layer.clone()], &config);
            let ok = check_feasibility(&m, &config, ExecutionMode::WeightStationary);
            assert_eq!(ok, c >= 8);
        }
    }
}
