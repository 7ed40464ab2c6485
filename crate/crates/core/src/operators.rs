//! Real-coded variation operators applied to discrete gene indices.
//!
//! Simulated binary crossover and polynomial mutation act in continuous
//! index space; results are rounded to the nearest valid index and clamped
//! to each gene's range, so offspring always decode to valid designs.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("parent encodings have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Spread factor of simulated binary crossover.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    }
}

/// Children of one SBX gene pair before rounding.
pub fn sbx_children(parent_a: f64, parent_b: f64, beta: f64) -> (f64, f64) {
    let c1 = 0.5 * ((1.0 + beta) * parent_a + (1.0 - beta) * parent_b);
    let c2 = 0.5 * ((1.0 - beta) * parent_a + (1.0 + beta) * parent_b);
    (c1, c2)
}

/// Perturbation of polynomial mutation, in [-1, 1].
pub fn mutation_delta(u: f64, eta: f64) -> f64 {
    if u < 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0))
    }
}

fn round_clamp(value: f64, min: u32, max: u32) -> u32 {
    let r = value.round();
    if r <= min as f64 {
        min
    } else if r >= max as f64 {
        max
    } else {
        r as u32
    }
}

/// Per-gene index bounds (inclusive). Freezing a gene is expressed as
/// min == max, which pins it through both operators.
pub type GeneBounds = (u32, u32);

/// SBX over two index vectors: each gene crosses with probability `p_c`,
/// otherwise both parents' values pass through unchanged.
pub fn sbx_crossover<R: Rng>(
    parent_a: &[u32],
    parent_b: &[u32],
    bounds: &[GeneBounds],
    eta_c: f64,
    p_c: f64,
    rng: &mut R,
) -> Result<(Vec<u32>, Vec<u32>), OperatorError> {
    if parent_a.len() != parent_b.len() {
        return Err(OperatorError::LengthMismatch(parent_a.len(), parent_b.len()));
    }
    debug_assert_eq!(parent_a.len(), bounds.len());
    let mut child_a = Vec::with_capacity(parent_a.len());
    let mut child_b = Vec::with_capacity(parent_b.len());
    for i in 0..parent_a.len() {
        let (min, max) = bounds[i];
        if rng.random::<f64>() <= p_c {
            let u: f64 = rng.random();
            let beta = sbx_beta(u, eta_c);
            let (c1, c2) = sbx_children(parent_a[i] as f64, parent_b[i] as f64, beta);
            child_a.push(round_clamp(c1, min, max));
            child_b.push(round_clamp(c2, min, max));
        } else {
            child_a.push(parent_a[i].clamp(min, max));
            child_b.push(parent_b[i].clamp(min, max));
        }
    }
    Ok((child_a, child_b))
}

/// Polynomial mutation: each gene mutates with probability `p_m` by
/// delta * (max - min) in index space.
pub fn polynomial_mutation<R: Rng>(
    genome: &[u32],
    bounds: &[GeneBounds],
    eta_m: f64,
    p_m: f64,
    rng: &mut R,
) -> Vec<u32> {
    debug_assert_eq!(genome.len(), bounds.len());
    genome
        .iter()
        .zip(bounds)
        .map(|(&g, &(min, max))| {
            if rng.random::<f64>() <= p_m {
                let u: f64 = rng.random();
                let delta = mutation_delta(u, eta_m);
                round_clamp(g as f64 + delta * (max - min) as f64, min, max)
            } else {
                g.clamp(min, max)
            }
        })
        .collect()
}
