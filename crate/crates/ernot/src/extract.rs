//! Deterministic transport summaries from conditional laws: Karcher
//! barycentric projection and heat-smoothed mode finding, applied
//! row-wise to a plan's conditionals.
//!
//! Both extractors run a fixed iteration budget (no residual-based early
//! stop); the stationarity residual is reported for diagnostics. The
//! heat kernel surrogate exp(−c/(2t)) reuses one score pass per iterate
//! for the ascent weights, the density value, and the monotonicity
//! check.

use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{
    cost, exp_map, log_map, project, GeometryError, ManifoldPoint, TangentVector,
};
use crate::measure::DiscreteMeasure;
use crate::num;
use crate::semidual::GibbsPlan;

/// Heat time defaults to this multiple of the entropic regularization.
pub const DEFAULT_HEAT_TIME_FACTOR: f64 = 100.0;

/// Initialization policy for the mode search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// Start from the atom with the largest conditional weight.
    HeaviestAtom,
    /// Start from each of the k heaviest atoms and keep the best terminal.
    MultiStart(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractorConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub heat_time: f64,
    pub initializers: InitPolicy,
    pub chunk_size: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            iterations: 32,
            step_size: 0.5,
            heat_time: 1.0,
            initializers: InitPolicy::HeaviestAtom,
            chunk_size: 64,
        }
    }
}

impl ExtractorConfig {
    /// Default configuration with the heat time tied to the entropic
    /// regularization strength.
    pub fn for_epsilon(epsilon: f64) -> Self {
        ExtractorConfig {
            heat_time: DEFAULT_HEAT_TIME_FACTOR * epsilon,
            ..ExtractorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.iterations < 1 {
            return Err(Error::InvalidInput(alloc::string::String::from(
                "extractor needs at least one iteration",
            )));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidInput(alloc::string::String::from(
                "step size must lie in (0, 1]",
            )));
        }
        if !(self.heat_time > 0.0) {
            return Err(Error::NonPositive { what: "heat time" });
        }
        if self.chunk_size < 1 {
            return Err(Error::InvalidInput(alloc::string::String::from(
                "chunk size must be at least 1",
            )));
        }
        if let InitPolicy::MultiStart(k) = self.initializers {
            if k < 1 {
                return Err(Error::InvalidInput(alloc::string::String::from(
                    "multi-start needs at least one start",
                )));
            }
        }
        Ok(())
    }
}

/// Index of the largest weight; ties resolve to the lowest index.
pub fn heaviest_atom(weights: &[f64]) -> usize {
    let mut best = 0;
    for (j, w) in weights.iter().enumerate() {
        if *w > weights[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct BarycenterOutcome {
    pub point: ManifoldPoint,
    /// Stationarity residual ‖Σⱼ wⱼ Log_z(yⱼ)‖ at the returned point.
    pub residual: f64,
    /// Some atom's logarithm hit the cut locus and its contribution was
    /// skipped for that step.
    pub cut_locus_skipped: bool,
    /// The manifold has closed geodesics, so the barycenter may not be
    /// unique; the output is still deterministic.
    pub nonuniqueness_warning: bool,
}

#[derive(Debug, Clone)]
pub struct ModeOutcome {
    pub point: ManifoldPoint,
    /// Smoothed log-density log Σⱼ wⱼ·exp(−c(z,yⱼ)/(2t)) at the returned
    /// point.
    pub log_density: f64,
    /// Every responsibility underflowed; the heaviest atom was returned
    /// unrefined.
    pub underflow_fallback: bool,
    pub cut_locus_skipped: bool,
    /// The smoothed density decreased by more than 1e-9 along the ascent
    /// (possible off the Cartan–Hadamard manifolds, reported everywhere).
    pub monotonicity_violation: bool,
}

fn validate_weights(atoms: &[ManifoldPoint], weights: &[f64]) -> Result<(), Error> {
    if atoms.is_empty() {
        return Err(Error::InvalidInput(alloc::string::String::from(
            "extraction needs at least one atom",
        )));
    }
    if atoms.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "extraction atoms vs weights",
        });
    }
    if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
        return Err(Error::InvalidInput(alloc::string::String::from(
            "extraction weights must be finite and nonnegative",
        )));
    }
    Ok(())
}

/// One weighted-log accumulation at `z`: Σⱼ wⱼ·Log_z(yⱼ), skipping (and
/// flagging) atoms whose logarithm fails at the cut locus.
fn weighted_log_direction(
    z: &ManifoldPoint,
    atoms: &[ManifoldPoint],
    weights: &[f64],
    skipped: &mut bool,
) -> Result<TangentVector, Error> {
    let mut dir = TangentVector::zero(z);
    for (y, w) in atoms.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        match log_map(z, y) {
            Ok(v) => dir.add_scaled(*w, &v)?,
            Err(GeometryError::CutLocus) => *skipped = true,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(dir)
}

fn step_along(z: &ManifoldPoint, dir: &TangentVector, eta: f64) -> Result<ManifoldPoint, Error> {
    let next = exp_map(&dir.scale(eta))?;
    Ok(project(z.kind(), &next.to_flat())?)
}

/// Index of the only atom with positive weight, when there is exactly one.
fn sole_support(weights: &[f64]) -> Option<usize> {
    let mut found = None;
    for (j, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if found.is_some() {
                return None;
            }
            found = Some(j);
        }
    }
    found
}

fn karcher_core(
    atoms: &[ManifoldPoint],
    weights: &[f64],
    config: &ExtractorConfig,
) -> Result<BarycenterOutcome, Error> {
    // A point mass is its own barycenter; return it without iterating so
    // the answer (and its zero residual) is exact.
    if let Some(j) = sole_support(weights) {
        return Ok(BarycenterOutcome {
            point: atoms[j].clone(),
            residual: 0.0,
            cut_locus_skipped: false,
            nonuniqueness_warning: !atoms[j].kind().has_unique_geodesics(),
        });
    }
    let mut z = atoms[heaviest_atom(weights)].clone();
    let mut cut_locus_skipped = false;
    for _ in 0..config.iterations {
        let dir = weighted_log_direction(&z, atoms, weights, &mut cut_locus_skipped)?;
        z = step_along(&z, &dir, config.step_size)?;
    }
    let final_dir = weighted_log_direction(&z, atoms, weights, &mut cut_locus_skipped)?;
    Ok(BarycenterOutcome {
        residual: final_dir.norm(),
        nonuniqueness_warning: !z.kind().has_unique_geodesics(),
        point: z,
        cut_locus_skipped,
    })
}

/// Fixed-point iteration z ← Exp_z(η·Σⱼ wⱼ·Log_z(yⱼ)) for the Fréchet
/// mean of the weighted atoms, initialized at the heaviest atom.
pub fn karcher_barycenter(
    support: &DiscreteMeasure,
    weights: &[f64],
    config: &ExtractorConfig,
) -> Result<BarycenterOutcome, Error> {
    config.validate()?;
    validate_weights(support.atoms(), weights)?;
    let total = num::kahan_sum(weights.iter().copied());
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::NotAProbability {
            what: "barycenter weights",
            total,
        });
    }
    karcher_core(support.atoms(), weights, config)
}

/// Scores sⱼ = ln wⱼ − c(z,yⱼ)/(2t); returns (max, Σ exp(s−max)) or None
/// when nothing survives, with normalized responsibilities written into
/// `alpha` in the surviving case.
fn heat_scores(
    z: &ManifoldPoint,
    atoms: &[ManifoldPoint],
    weights: &[f64],
    inv_two_t: f64,
    alpha: &mut [f64],
) -> Result<Option<(f64, f64)>, Error> {
    let mut max_s = f64::NEG_INFINITY;
    for (j, (y, w)) in atoms.iter().zip(weights).enumerate() {
        alpha[j] = if *w > 0.0 {
            num::ln(*w) - cost(z, y)? * inv_two_t
        } else {
            f64::NEG_INFINITY
        };
        if alpha[j] > max_s {
            max_s = alpha[j];
        }
    }
    if !max_s.is_finite() {
        return Ok(None);
    }
    let mut sum = 0.0;
    for a in alpha.iter_mut() {
        *a = if a.is_finite() { num::exp(*a - max_s) } else { 0.0 };
        sum += *a;
    }
    for a in alpha.iter_mut() {
        *a /= sum;
    }
    Ok(Some((max_s, sum)))
}

fn heat_core(
    atoms: &[ManifoldPoint],
    weights: &[f64],
    config: &ExtractorConfig,
) -> Result<ModeOutcome, Error> {
    // A point mass peaks at its own atom with ℓ_t = log w there.
    if let Some(j) = sole_support(weights) {
        return Ok(ModeOutcome {
            point: atoms[j].clone(),
            log_density: num::ln(weights[j]),
            underflow_fallback: false,
            cut_locus_skipped: false,
            monotonicity_violation: false,
        });
    }
    let inv_two_t = 1.0 / (2.0 * config.heat_time);
    let starts: Vec<usize> = match config.initializers {
        InitPolicy::HeaviestAtom => alloc::vec![heaviest_atom(weights)],
        InitPolicy::MultiStart(k) => {
            let mut order: Vec<usize> = (0..weights.len()).collect();
            order.sort_by(|a, b| {
                weights[*b]
                    .partial_cmp(&weights[*a])
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(a.cmp(b))
            });
            order.truncate(k.min(order.len()));
            order
        }
    };

    let mut alpha = alloc::vec![0.0; atoms.len()];
    let mut best: Option<ModeOutcome> = None;
    for start in starts {
        let mut z = atoms[start].clone();
        let mut cut_locus_skipped = false;
        let mut monotonicity_violation = false;
        let mut prev_l = f64::NEG_INFINITY;
        let mut log_density = f64::NEG_INFINITY;
        let mut underflow = false;
        for iter in 0..=config.iterations {
            match heat_scores(&z, atoms, weights, inv_two_t, &mut alpha)? {
                None => {
                    underflow = true;
                    break;
                }
                Some((max_s, sum)) => {
                    let l = max_s + num::ln(sum);
                    if l < prev_l - 1e-9 {
                        monotonicity_violation = true;
                    }
                    prev_l = l;
                    log_density = l;
                    if iter == config.iterations {
                        break;
                    }
                    let dir =
                        weighted_log_direction(&z, atoms, &alpha, &mut cut_locus_skipped)?;
                    z = step_along(&z, &dir, config.step_size)?;
                }
            }
        }
        if underflow {
            return Ok(ModeOutcome {
                point: atoms[heaviest_atom(weights)].clone(),
                log_density: f64::NEG_INFINITY,
                underflow_fallback: true,
                cut_locus_skipped: false,
                monotonicity_violation: false,
            });
        }
        let candidate = ModeOutcome {
            point: z,
            log_density,
            underflow_fallback: false,
            cut_locus_skipped,
            monotonicity_violation,
        };
        let better = match &best {
            None => true,
            Some(b) => candidate.log_density > b.log_density,
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Ascend the heat-smoothed density ℓ_t(z) = log Σⱼ wⱼ·exp(−c(z,yⱼ)/(2t))
/// with responsibility-weighted log-map steps; returns the best terminal
/// across the configured starts together with its ℓ_t value.
pub fn heat_smoothed_mode(
    support: &DiscreteMeasure,
    weights: &[f64],
    config: &ExtractorConfig,
) -> Result<ModeOutcome, Error> {
    config.validate()?;
    validate_weights(support.atoms(), weights)?;
    heat_core(support.atoms(), weights, config)
}

/// Which extractor a row-wise transport map uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractMode {
    Barycenter,
    HeatMode,
}

#[derive(Debug, Clone)]
pub struct RowwiseExtraction {
    pub points: Vec<ManifoldPoint>,
    /// Barycenter mode: worst stationarity residual across rows.
    pub max_residual: f64,
    pub nonuniqueness_warning: bool,
    pub cut_locus_skipped: bool,
    pub underflow_fallback: bool,
    pub monotonicity_violation: bool,
}

/// Normalize each plan row to conditional weights and run the chosen
/// extractor per source atom, processing rows in chunks.
pub fn extract_map_rowwise(
    plan: &GibbsPlan,
    mode: ExtractMode,
    config: &ExtractorConfig,
) -> Result<RowwiseExtraction, Error> {
    config.validate()?;
    let n = plan.matrix().rows();
    let atoms = plan.col_support().atoms();
    let mut out = RowwiseExtraction {
        points: Vec::with_capacity(n),
        max_residual: 0.0,
        nonuniqueness_warning: false,
        cut_locus_skipped: false,
        underflow_fallback: false,
        monotonicity_violation: false,
    };
    let mut weights = alloc::vec![0.0; plan.matrix().cols()];
    let rows: Vec<usize> = (0..n).collect();
    for chunk in rows.chunks(config.chunk_size) {
        for &i in chunk {
            let row = plan.matrix().row(i);
            let mass = num::kahan_sum(row.iter().copied());
            if !(mass > 0.0) {
                return Err(Error::InvalidInput(alloc::format!(
                    "plan row {i} has zero mass; conditional law undefined"
                )));
            }
            for (w, p) in weights.iter_mut().zip(row) {
                *w = *p / mass;
            }
            match mode {
                ExtractMode::Barycenter => {
                    let r = karcher_core(atoms, &weights, config)?;
                    out.max_residual = out.max_residual.max(r.residual);
                    out.nonuniqueness_warning |= r.nonuniqueness_warning;
                    out.cut_locus_skipped |= r.cut_locus_skipped;
                    out.points.push(r.point);
                }
                ExtractMode::HeatMode => {
                    let r = heat_core(atoms, &weights, config)?;
                    out.underflow_fallback |= r.underflow_fallback;
                    out.cut_locus_skipped |= r.cut_locus_skipped;
                    out.monotonicity_violation |= r.monotonicity_violation;
                    out.points.push(r.point);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance, ManifoldKind, SpdMetric};
    use crate::mat::Mat;
    use crate::rng;
    use crate::sampling::{sample_wrapped_normal, WrappedNormalSpec};
    use alloc::vec;

    fn measure_on(kind: ManifoldKind, n: usize, seed: u64, sigma: f64) -> DiscreteMeasure {
        let spec = WrappedNormalSpec::Isotropic {
            center: kind.origin(),
            sigma,
        };
        DiscreteMeasure::uniform(sample_wrapped_normal(&spec, n, seed).unwrap()).unwrap()
    }

    fn random_simplex(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(seed, 77);
        let mut w: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r, 0.05, 1.0)).collect();
        let s = num::kahan_sum(w.iter().copied());
        w.iter_mut().for_each(|x| *x /= s);
        w
    }

    #[test]
    fn config_validation() {
        let mut c = ExtractorConfig::default();
        c.iterations = 0;
        assert!(c.validate().is_err());
        let mut c = ExtractorConfig::default();
        c.step_size = 1.5;
        assert!(c.validate().is_err());
        let mut c = ExtractorConfig::default();
        c.heat_time = 0.0;
        assert!(c.validate().is_err());
        let mut c = ExtractorConfig::default();
        c.initializers = InitPolicy::MultiStart(0);
        assert!(c.validate().is_err());
        assert!(ExtractorConfig::for_epsilon(0.05).validate().is_ok());
        assert!((ExtractorConfig::for_epsilon(0.05).heat_time - 5.0).abs() < 1e-15);
    }

    #[test]
    fn single_atom_is_exact_with_zero_residual() {
        for kind in [
            ManifoldKind::Sphere2,
            ManifoldKind::Spd3(SpdMetric::AffineInvariant),
            ManifoldKind::Hyperbolic2,
        ] {
            let m = measure_on(kind, 1, 5, 0.4);
            let out =
                karcher_barycenter(&m, &[1.0], &ExtractorConfig::default()).unwrap();
            assert!(distance(&out.point, &m.atoms()[0]).unwrap() < 1e-12);
            assert_eq!(out.residual, 0.0);

            let heat = heat_smoothed_mode(&m, &[1.0], &ExtractorConfig::default()).unwrap();
            assert!(distance(&heat.point, &m.atoms()[0]).unwrap() < 1e-12);
            // ℓ_t = log(1 · exp(0)) = 0 for the unit weight on itself.
            assert!(heat.log_density.abs() < 1e-12);
        }
    }

    #[test]
    fn hyperbolic_symmetric_pair_yields_the_midpoint() {
        // Two points built by shooting ±v from a base point: their
        // equal-weight barycenter is the base, characterized without
        // assuming it by equidistance plus stationarity.
        let base = ManifoldKind::Hyperbolic2.origin();
        let v = crate::geometry::tangent_from_chart(&base, &[0.7, -0.4]).unwrap();
        let y1 = exp_map(&v).unwrap();
        let y2 = exp_map(&v.scale(-1.0)).unwrap();
        let m = DiscreteMeasure::new(vec![y1.clone(), y2.clone()], vec![0.5, 0.5]).unwrap();
        let out = karcher_barycenter(&m, &[0.5, 0.5], &ExtractorConfig::default()).unwrap();
        let d1 = distance(&out.point, &y1).unwrap();
        let d2 = distance(&out.point, &y2).unwrap();
        assert!((d1 - d2).abs() <= 1e-8, "asymmetric: {d1} vs {d2}");
        assert!(out.residual <= 1e-8, "residual {}", out.residual);
        assert!(!out.nonuniqueness_warning);
    }

    #[test]
    fn spd_pair_barycenter_lands_on_the_geodesic() {
        let kind = ManifoldKind::Spd3(SpdMetric::AffineInvariant);
        let m = measure_on(kind, 2, 9, 0.6);
        let t = 0.3;
        let out =
            karcher_barycenter(&m, &[1.0 - t, t], &ExtractorConfig::default()).unwrap();
        let y1 = &m.atoms()[0];
        let y2 = &m.atoms()[1];
        let full = distance(y1, y2).unwrap();
        assert!(out.residual <= 1e-8, "residual {}", out.residual);
        let along = distance(y1, &out.point).unwrap();
        assert!(
            (along - t * full).abs() <= 1e-6,
            "expected {} got {along}",
            t * full
        );
    }

    #[test]
    fn karcher_stationarity_and_hull_bound_on_benchmark_like_conditionals() {
        for (kind, seed) in [
            (ManifoldKind::Spd3(SpdMetric::AffineInvariant), 11u64),
            (ManifoldKind::Spd3(SpdMetric::LogEuclidean), 12),
            (ManifoldKind::Hyperbolic2, 13),
        ] {
            let m = measure_on(kind, 8, seed, 0.5);
            let w = random_simplex(8, seed);
            let out = karcher_barycenter(&m, &w, &ExtractorConfig::default()).unwrap();
            assert!(
                out.residual <= 1e-6,
                "{kind:?} residual {}",
                out.residual
            );
            // Coarse hull check: the barycenter stays within the support's
            // diameter of its starting atom.
            let mut max_pairwise = 0.0f64;
            for a in m.atoms() {
                for b in m.atoms() {
                    max_pairwise = max_pairwise.max(distance(a, b).unwrap());
                }
            }
            let start = &m.atoms()[heaviest_atom(&w)];
            assert!(distance(start, &out.point).unwrap() <= max_pairwise);
        }
    }

    #[test]
    fn small_heat_time_pins_the_mode_to_the_heavy_atom() {
        let m = measure_on(ManifoldKind::Sphere2, 2, 21, 0.8);
        let y1 = &m.atoms()[0];
        let y2 = &m.atoms()[1];
        let d = distance(y1, y2).unwrap();
        let weights = [0.99, 0.01];
        let mut config = ExtractorConfig::default();
        config.heat_time = 1e-3 * d * d;
        let out = heat_smoothed_mode(&m, &weights, &config).unwrap();
        assert!(!out.underflow_fallback);
        assert!(
            distance(&out.point, y1).unwrap() <= 1e-3,
            "mode strayed {} from the heavy atom",
            distance(&out.point, y1).unwrap()
        );

        // Oracle: dense grid search over the connecting geodesic confirms
        // the smoothed density peaks within the same tolerance of y1.
        let log_dir = log_map(y1, y2).unwrap();
        let mut best_s = 0.0;
        let mut best_l = f64::NEG_INFINITY;
        for k in 0..=2000 {
            let s = k as f64 / 2000.0;
            let z = exp_map(&log_dir.scale(s)).unwrap();
            let l = num::ln(
                weights[0] * num::exp(-cost(&z, y1).unwrap() / (2.0 * config.heat_time))
                    + weights[1] * num::exp(-cost(&z, y2).unwrap() / (2.0 * config.heat_time)),
            );
            if l > best_l {
                best_l = l;
                best_s = s;
            }
        }
        assert!(best_s * d <= 1e-3, "grid argmax at arc length {}", best_s * d);
    }

    fn max_pairwise_cost(m: &DiscreteMeasure) -> f64 {
        let mut max_cost = 0.0f64;
        for a in m.atoms() {
            for b in m.atoms() {
                max_cost = max_cost.max(cost(a, b).unwrap());
            }
        }
        max_cost
    }

    fn extractor_gap(m: &DiscreteMeasure, w: &[f64], heat_time: f64) -> f64 {
        let mut config = ExtractorConfig::default();
        config.heat_time = heat_time;
        let bary = karcher_barycenter(m, w, &config).unwrap();
        let mode = heat_smoothed_mode(m, w, &config).unwrap();
        assert!(!mode.monotonicity_violation);
        distance(&bary.point, &mode.point).unwrap()
    }

    #[test]
    fn large_heat_time_recovers_the_karcher_barycenter() {
        // As t grows the responsibilities flatten to the conditional
        // weights and the mode search degenerates into the Karcher
        // iteration. The residual disagreement at finite t scales like
        // diameter/t, so the pinned 1e-6 agreement at t = 1e3·max-cost is
        // exhibited on a tight support, and the 1/t decay itself is
        // checked at benchmark scale.
        for (kind, seed) in [
            (ManifoldKind::Spd3(SpdMetric::AffineInvariant), 31u64),
            (ManifoldKind::Hyperbolic2, 32),
        ] {
            let tight = measure_on(kind, 5, seed, 1e-3);
            let w = random_simplex(5, seed);
            let gap = extractor_gap(&tight, &w, 1e3 * max_pairwise_cost(&tight));
            assert!(gap <= 1e-6, "{kind:?}: extractors disagree by {gap}");

            let wide = measure_on(kind, 5, seed + 100, 0.5);
            let w = random_simplex(5, seed + 100);
            let c_max = max_pairwise_cost(&wide);
            let gap_t = extractor_gap(&wide, &w, 1e3 * c_max);
            let gap_10t = extractor_gap(&wide, &w, 1e4 * c_max);
            assert!(gap_t <= 1e-3, "{kind:?}: gap {gap_t} at t = 1e3·max cost");
            assert!(
                gap_10t <= gap_t / 5.0,
                "{kind:?}: gap did not decay with t: {gap_t} -> {gap_10t}"
            );
        }
    }

    #[test]
    fn all_zero_weights_fall_back_to_the_heaviest_atom() {
        let m = measure_on(ManifoldKind::Sphere2, 3, 41, 0.5);
        let out = heat_smoothed_mode(&m, &[0.0, 0.0, 0.0], &ExtractorConfig::default()).unwrap();
        assert!(out.underflow_fallback);
        assert!(distance(&out.point, &m.atoms()[0]).unwrap() < 1e-12);
        assert_eq!(out.log_density, f64::NEG_INFINITY);
    }

    fn gibbs_from(
        src: &DiscreteMeasure,
        tgt: &DiscreteMeasure,
        g: &[f64],
        epsilon: f64,
    ) -> GibbsPlan {
        crate::semidual::build_gibbs_plan(src, tgt, g, epsilon).unwrap()
    }

    #[test]
    fn permutation_plan_maps_to_matched_atoms() {
        let tgt = measure_on(ManifoldKind::Sphere2, 3, 51, 0.6);
        // Permutation coupling: source atom i carries all its mass to
        // target atom (i+1) mod 3.
        let mut mat = Mat::zeros(3, 3);
        for i in 0..3 {
            mat.set(i, (i + 1) % 3, 1.0 / 3.0);
        }
        let plan = GibbsPlan::new(
            mat,
            vec![1.0 / 3.0; 3],
            tgt.clone(),
            0.1,
        )
        .unwrap();
        let mut config = ExtractorConfig::default();
        config.heat_time = 1e-4;
        let out = extract_map_rowwise(&plan, ExtractMode::HeatMode, &config).unwrap();
        for i in 0..3 {
            let want = &tgt.atoms()[(i + 1) % 3];
            assert!(distance(&out.points[i], want).unwrap() < 1e-12);
        }
        assert!(!out.underflow_fallback);
    }

    #[test]
    fn antipodal_uniform_conditional_warns_but_stays_deterministic() {
        let north = crate::geometry::project(ManifoldKind::Sphere2, &[0.0, 0.0, 1.0]).unwrap();
        let south = crate::geometry::project(ManifoldKind::Sphere2, &[0.0, 0.0, -1.0]).unwrap();
        let tgt = DiscreteMeasure::uniform(vec![north.clone(), south]).unwrap();
        let plan = GibbsPlan::new(
            Mat::from_vec(1, 2, vec![0.5, 0.5]),
            vec![1.0],
            tgt,
            0.1,
        )
        .unwrap();
        let a = extract_map_rowwise(&plan, ExtractMode::Barycenter, &ExtractorConfig::default())
            .unwrap();
        let b = extract_map_rowwise(&plan, ExtractMode::Barycenter, &ExtractorConfig::default())
            .unwrap();
        assert!(a.nonuniqueness_warning);
        assert!(a.cut_locus_skipped);
        // Deterministic: both runs return the identical point (the
        // heaviest atom, ties at the lowest index, here the north pole).
        assert!(distance(&a.points[0], &b.points[0]).unwrap() == 0.0);
        assert!(distance(&a.points[0], &north).unwrap() < 1e-12);
    }

    #[test]
    fn chunk_size_does_not_change_the_output() {
        let src = measure_on(ManifoldKind::Sphere2, 10, 61, 0.6);
        let tgt = measure_on(ManifoldKind::Sphere2, 10, 62, 0.6);
        let g = vec![0.0; 10];
        let plan = gibbs_from(&src, &tgt, &g, 0.3);
        let mut outputs = Vec::new();
        for chunk in [1usize, 4, 10] {
            let mut config = ExtractorConfig::default();
            config.chunk_size = chunk;
            config.heat_time = 0.5;
            let out = extract_map_rowwise(&plan, ExtractMode::HeatMode, &config).unwrap();
            outputs.push(out.points);
        }
        for other in &outputs[1..] {
            for (a, b) in outputs[0].iter().zip(other) {
                assert_eq!(a.to_flat(), b.to_flat());
            }
        }
    }

    #[test]
    fn zero_row_is_rejected_by_name() {
        let tgt = measure_on(ManifoldKind::Sphere2, 2, 71, 0.5);
        let plan = GibbsPlan::new(
            Mat::from_vec(2, 2, vec![0.5, 0.5, 0.0, 0.0]),
            vec![1.0, 0.0],
            tgt,
            0.1,
        )
        .unwrap();
        let err = extract_map_rowwise(&plan, ExtractMode::Barycenter, &ExtractorConfig::default())
            .unwrap_err();
        match err {
            Error::InvalidInput(msg) => assert!(msg.contains("row 1"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn multi_start_explores_the_second_mode() {
        // Two clusters; the lighter one is tighter, so the global smoothed
        // mode sits there. A single heaviest-atom start from the heavy
        // diffuse side can miss it; multi-start must not.
        let kind = ManifoldKind::Hyperbolic2;
        let origin = kind.origin();
        let far = exp_map(&crate::geometry::tangent_from_chart(&origin, &[2.2, 0.0]).unwrap())
            .unwrap();
        let near_far: Vec<ManifoldPoint> = (0..3)
            .map(|i| {
                exp_map(
                    &crate::geometry::tangent_from_chart(&far, &[0.01 * i as f64, 0.0]).unwrap(),
                )
                .unwrap()
            })
            .collect();
        let mut atoms = vec![origin.clone()];
        atoms.extend(near_far);
        let m = DiscreteMeasure::uniform(atoms).unwrap();
        // Heaviest single atom is index 0 (ties at lowest index), but the
        // cluster at `far` carries three-quarters of the mass.
        let w = vec![0.28, 0.24, 0.24, 0.24];
        let mut config = ExtractorConfig::default();
        config.heat_time = 0.01;
        config.initializers = InitPolicy::MultiStart(4);
        let multi = heat_smoothed_mode(&m, &w, &config).unwrap();
        assert!(
            distance(&multi.point, &far).unwrap() < 0.2,
            "multi-start missed the dominant cluster: {}",
            distance(&multi.point, &far).unwrap()
        );
    }
}
