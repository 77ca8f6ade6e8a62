//! Support-size scaling study: wall-clock timings plus an analytic
//! working-set accounting for neural semidual training (batch-driven,
//! recomputing costs per step) versus the discrete Sinkhorn reference
//! (which must materialize the N×M cost and plan matrices).
//!
//! Memory numbers are analytic byte counts of the allocations each method
//! holds at peak, not OS probes: portable, deterministic, and sufficient
//! for the quadratic-versus-flat trend the study is about. Rows whose
//! predicted working set exceeds the configured budget are emitted as
//! infeasible instead of being attempted.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use ernot::mlp::Mlp;
use ernot::sinkhorn;
use ernot::ManifoldKind;

use crate::bench::{
    build_benchmark, median_cost_epsilon, run_sinkhorn_reference, train_potential, BenchmarkSpec,
    SUPPORT_SOURCE_STREAM, SUPPORT_TARGET_STREAM,
};
use crate::config::RunOptions;
use crate::report::ScalingCsvRow;

pub const METHOD_NEURAL: &str = "neural";
pub const METHOD_SINKHORN: &str = "sinkhorn";

const F64_BYTES: u64 = 8;

/// Peak working set of the streaming trainer: parameters with their two
/// Adam moments and the gradient, the traced forward activations, the
/// batch cost block, the batch embeddings, the support atoms themselves,
/// and the landmark pool held while features are selected.
pub fn neural_memory_bytes(
    kind: ManifoldKind,
    n: usize,
    m: usize,
    phi_dim: usize,
    options: &RunOptions,
) -> u64 {
    let params = Mlp::param_count(phi_dim, options.width, options.depth) as u64;
    let b = options.batch_size as u64;
    let dim = phi_dim as u64;
    let ambient = kind.ambient_dim() as u64;
    let param_blocks = 4 * params; // params, two moments, gradient
    let trace = b * (dim + 2 * options.depth as u64 * options.width as u64);
    let batch_cost = b * b;
    let batch_embed = b * dim;
    let supports = (n as u64 + m as u64) * ambient;
    let landmark_pool = options.landmark_pool as u64 * ambient;
    F64_BYTES * (param_blocks + trace + batch_cost + batch_embed + supports + landmark_pool)
}

/// Peak working set of the discrete solver: the cost matrix, the plan it
/// exponentiates into, and the potential/marginal vectors.
pub fn sinkhorn_memory_bytes(n: usize, m: usize) -> u64 {
    let (n, m) = (n as u64, m as u64);
    F64_BYTES * (2 * n * m + 4 * (n + m))
}

/// Landmark feature dimension on compact/product manifolds, logarithmic
/// chart width elsewhere (mirrors the benchmark feature choice).
fn phi_dim_for(kind: ManifoldKind, options: &RunOptions) -> usize {
    match kind {
        ManifoldKind::Sphere2 | ManifoldKind::Rotations3 | ManifoldKind::RigidMotions3 { .. } => {
            options.landmark_count
        }
        ManifoldKind::Spd3(_) | ManifoldKind::Hyperbolic2 => kind.tangent_flat_dim(),
    }
}

fn sized_spec(base: &BenchmarkSpec, n: usize, options: &RunOptions) -> BenchmarkSpec {
    let mut spec = base.clone();
    spec.support_size_n = n;
    spec.support_size_m = n;
    spec.epsilon_scale = options.epsilon_scale;
    spec
}

/// Fresh supports for one size cell, drawn on substream step = N so every
/// cell sees independent data.
fn supports_for(
    spec: &BenchmarkSpec,
    n: usize,
) -> Result<(ernot::DiscreteMeasure, ernot::DiscreteMeasure)> {
    let src = spec
        .source_spec
        .sample(spec.manifold, n, spec.seed, SUPPORT_SOURCE_STREAM, n as u64)?;
    let tgt = spec
        .target_spec
        .sample(spec.manifold, n, spec.seed, SUPPORT_TARGET_STREAM, n as u64)?;
    Ok((
        ernot::DiscreteMeasure::uniform(src)?,
        ernot::DiscreteMeasure::uniform(tgt)?,
    ))
}

/// Run the scaling study over ascending support sizes. One warm-up cell
/// (small N, few steps) runs first so timed cells don't pay first-touch
/// costs; each recorded row is (manifold, N, method, seconds, bytes,
/// feasible).
pub fn run_scaling_study(
    manifold: &str,
    sizes: &[usize],
    seed: u64,
    options: &RunOptions,
) -> Result<Vec<ScalingCsvRow>> {
    if sizes.is_empty() {
        bail!("at least one size is required");
    }
    for pair in sizes.windows(2) {
        if pair[0] >= pair[1] {
            bail!("sizes must be strictly ascending, got {} then {}", pair[0], pair[1]);
        }
    }
    if sizes[0] < 2 {
        bail!("sizes must be at least 2");
    }
    options.validate()?;
    let base = build_benchmark(manifold, seed).context("phase: benchmark spec")?;
    let tag = base.manifold.tag().to_string();

    // Warm-up: a small untimed cell exercises both code paths once.
    {
        let warm_n = sizes[0].min(64);
        let mut warm_options = options.clone();
        warm_options.steps = options.steps.min(10);
        let spec = sized_spec(&base, warm_n, &warm_options);
        let (source, target) = supports_for(&spec, warm_n).context("phase: warm-up")?;
        let epsilon = median_cost_epsilon(&source, &target, spec.epsilon_scale, seed)
            .context("phase: warm-up")?;
        train_potential(&spec, &warm_options, &source, &target, epsilon, false)
            .context("phase: warm-up")?;
        // The warm-up solve only exists to touch the code path; a
        // marginal-tolerance failure at this tiny size is irrelevant.
        let _ = run_sinkhorn_reference(&source, &target, epsilon, &warm_options);
    }

    let mut rows = Vec::new();
    for &n in sizes {
        let spec = sized_spec(&base, n, options);
        let phi_dim = phi_dim_for(spec.manifold, options);
        let neural_bytes = neural_memory_bytes(spec.manifold, n, n, phi_dim, options);
        let sink_bytes = sinkhorn_memory_bytes(n, n);
        let budget = options.memory_budget_bytes;

        // Supports and the matched ε are shared by both method cells and
        // not charged to either timing.
        let needs_data = neural_bytes <= budget || sink_bytes <= budget;
        let shared = if needs_data {
            let (source, target) =
                supports_for(&spec, n).with_context(|| format!("phase: supports (N={n})"))?;
            let epsilon = median_cost_epsilon(&source, &target, spec.epsilon_scale, seed)
                .with_context(|| format!("phase: epsilon (N={n})"))?;
            Some((source, target, epsilon))
        } else {
            None
        };

        if neural_bytes > budget {
            rows.push(ScalingCsvRow {
                manifold: tag.clone(),
                n,
                method: METHOD_NEURAL.into(),
                seconds: 0.0,
                bytes: neural_bytes,
                feasible: false,
            });
        } else {
            let (source, target, epsilon) = shared.as_ref().expect("data built above");
            let t0 = Instant::now();
            train_potential(&spec, options, source, target, *epsilon, false)
                .with_context(|| format!("phase: train (N={n})"))?;
            rows.push(ScalingCsvRow {
                manifold: tag.clone(),
                n,
                method: METHOD_NEURAL.into(),
                seconds: t0.elapsed().as_secs_f64(),
                bytes: neural_bytes,
                feasible: true,
            });
        }

        if sink_bytes > budget {
            rows.push(ScalingCsvRow {
                manifold: tag.clone(),
                n,
                method: METHOD_SINKHORN.into(),
                seconds: 0.0,
                bytes: sink_bytes,
                feasible: false,
            });
        } else {
            let (source, target, epsilon) = shared.as_ref().expect("data built above");
            let t0 = Instant::now();
            let cost_m = source
                .cost_matrix(target)
                .with_context(|| format!("phase: sinkhorn cost (N={n})"))?;
            let opts = sinkhorn::SinkhornOptions {
                max_iters: options.sinkhorn_iters,
                tol: options.sinkhorn_tol,
                record_history: false,
            };
            sinkhorn::sinkhorn_log_domain(
                &cost_m,
                source.weights(),
                target.weights(),
                *epsilon,
                &opts,
            )
            .with_context(|| format!("phase: sinkhorn solve (N={n})"))?;
            rows.push(ScalingCsvRow {
                manifold: tag.clone(),
                n,
                method: METHOD_SINKHORN.into(),
                seconds: t0.elapsed().as_secs_f64(),
                bytes: sink_bytes,
                feasible: true,
            });
        }
    }
    Ok(rows)
}

/// Parse a sizes argument: either a comma list ("512,1024,4096") or a
/// doubling range "128..4096" (inclusive at both ends).
pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().context("range start")?;
        let hi: usize = hi.trim().parse().context("range end")?;
        if lo < 2 || hi < lo {
            bail!("range must satisfy 2 <= start <= end");
        }
        let mut sizes = Vec::new();
        let mut n = lo;
        while n <= hi {
            sizes.push(n);
            match n.checked_mul(2) {
                Some(next) => n = next,
                None => break,
            }
        }
        Ok(sizes)
    } else {
        let sizes = text
            .split(',')
            .map(|part| part.trim().parse::<usize>().context("size list entry"))
            .collect::<Result<Vec<_>>>()?;
        if sizes.is_empty() {
            bail!("no sizes given");
        }
        Ok(sizes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse_both_forms() {
        assert_eq!(parse_sizes("128..4096").unwrap(), vec![128, 256, 512, 1024, 2048, 4096]);
        assert_eq!(parse_sizes("512,1024,4096").unwrap(), vec![512, 1024, 4096]);
        assert!(parse_sizes("1..8").is_err());
        assert!(parse_sizes("banana").is_err());
    }

    #[test]
    fn sinkhorn_memory_ratio_is_quadratic() {
        for n in [128usize, 512, 2048, 16384] {
            let ratio = sinkhorn_memory_bytes(2 * n, 2 * n) as f64
                / sinkhorn_memory_bytes(n, n) as f64;
            assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio} at n={n}");
        }
    }
}
