//! Semidual entropic transport core: the soft c-transform against a
//! discrete target measure, the semidual objective it induces, gauge
//! centering of potentials, and the Gibbs plans a potential generates.
//!
//! Everything here works on potentials given by their values over the
//! atoms of a target measure. The soft c-transform
//!
//!   T g(x) = −ε · log Σⱼ wⱼ · exp((g(yⱼ) − c(x, yⱼ)) / ε)
//!
//! is evaluated with a max-shifted log-sum-exp so large cost-to-ε ratios
//! stay finite, and its softmax weights double as the conditional law of
//! the Gibbs plan at x.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{cost, ManifoldPoint};
use crate::mat::Mat;
use crate::measure::DiscreteMeasure;
use crate::num;

/// Row/total mass slack accepted when validating an assembled plan.
pub const PLAN_MASS_TOL: f64 = 1e-10;
/// A dual gap more negative than this is attributed to reference-solver
/// truncation and only flagged.
pub const GAP_WARN_TOL: f64 = -1e-8;
/// A dual gap more negative than this signals an unconverged reference
/// value and is reported as an error.
pub const GAP_ERROR_TOL: f64 = -1e-6;

/// Potential values over the atoms of a target measure.
#[derive(Debug, Clone)]
pub struct PotentialOnSupport {
    support: DiscreteMeasure,
    values: Vec<f64>,
}

impl PotentialOnSupport {
    /// Bundle raw values with their support, checking length and finiteness.
    pub fn new(support: DiscreteMeasure, values: Vec<f64>) -> Result<Self, Error> {
        if values.len() != support.len() {
            return Err(Error::DimensionMismatch {
                context: "potential values vs support atoms",
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "potential values",
            });
        }
        Ok(PotentialOnSupport { support, values })
    }

    /// Center raw values to zero weighted mean over the support.
    pub fn centered(support: DiscreteMeasure, raw: &[f64]) -> Result<Self, Error> {
        let values = center_potential(raw, support.weights())?;
        Self::new(support, values)
    }

    pub fn support(&self) -> &DiscreteMeasure {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Weighted mean of the values over the support, zero for the
    /// centered representative.
    pub fn weighted_mean(&self) -> f64 {
        weighted_mean(&self.values, self.support.weights())
    }
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    num::kahan_sum(values.iter().zip(weights).map(|(v, w)| v * w))
}

/// Subtract the weighted mean Σⱼ wⱼ·rawⱼ from every entry. Uniform batch
/// centering is the special case wⱼ = 1/B.
pub fn center_potential(raw: &[f64], weights: &[f64]) -> Result<Vec<f64>, Error> {
    if raw.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "potential values vs centering weights",
        });
    }
    let mean = weighted_mean(raw, weights);
    Ok(raw.iter().map(|v| v - mean).collect())
}

fn validate_transform_inputs(
    target: &DiscreteMeasure,
    g: &[f64],
    epsilon: f64,
) -> Result<(), Error> {
    if target.is_empty() {
        return Err(Error::InvalidInput(String::from(
            "soft c-transform needs a nonempty target support",
        )));
    }
    if g.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "potential values vs target support",
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive { what: "epsilon" });
    }
    Ok(())
}

/// Soft c-transform given a precomputed cost row `costs[j] = c(x, yⱼ)`.
/// Zero-weight atoms are skipped. Two passes (max then compensated sum of
/// shifted exponentials) keep the evaluation allocation-free.
pub fn soft_c_transform_from_costs(
    costs: &[f64],
    g: &[f64],
    weights: &[f64],
    epsilon: f64,
) -> Result<f64, Error> {
    if costs.len() != g.len() || costs.len() != weights.len() || costs.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "soft c-transform inputs",
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive { what: "epsilon" });
    }
    let mut max_s = f64::NEG_INFINITY;
    for j in 0..costs.len() {
        if weights[j] > 0.0 {
            let s = (g[j] - costs[j]) / epsilon + num::ln(weights[j]);
            if s > max_s {
                max_s = s;
            }
        }
    }
    if max_s == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(String::from(
            "soft c-transform support carries no positive weight",
        )));
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for j in 0..costs.len() {
        if weights[j] > 0.0 {
            let s = (g[j] - costs[j]) / epsilon + num::ln(weights[j]);
            let term = num::exp(s - max_s);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
    }
    Ok(-epsilon * (max_s + num::ln(sum)))
}

/// Soft c-transform T g(x) against the target support.
pub fn soft_c_transform(
    target: &DiscreteMeasure,
    g: &[f64],
    x: &ManifoldPoint,
    epsilon: f64,
) -> Result<f64, Error> {
    validate_transform_inputs(target, g, epsilon)?;
    let costs = cost_row(target, x)?;
    soft_c_transform_from_costs(&costs, g, target.weights(), epsilon)
}

fn cost_row(target: &DiscreteMeasure, x: &ManifoldPoint) -> Result<Vec<f64>, Error> {
    target
        .atoms()
        .iter()
        .map(|y| cost(x, y).map_err(Error::from))
        .collect()
}

/// Semidual objective J(g) = Σⱼ νⱼ g(yⱼ) + Σᵢ μᵢ · T g(xᵢ).
pub fn semidual_value(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    g: &[f64],
    epsilon: f64,
) -> Result<f64, Error> {
    validate_transform_inputs(target, g, epsilon)?;
    let nu_term = weighted_mean(g, target.weights());
    let mu_term = num::kahan_sum(
        source
            .atoms()
            .iter()
            .zip(source.weights())
            .map(|(x, w)| {
                soft_c_transform(target, g, x, epsilon).map(|t| w * t)
            })
            .collect::<Result<Vec<f64>, Error>>()?,
    );
    Ok(nu_term + mu_term)
}

/// Conditional Gibbs weights over the target atoms for one source point,
/// written into `out`: a max-shifted softmax of (g − c)/ε + log ν.
/// Zero-weight atoms receive exactly zero.
pub fn gibbs_conditional_weights_into(
    costs: &[f64],
    g: &[f64],
    weights: &[f64],
    epsilon: f64,
    out: &mut [f64],
) -> Result<(), Error> {
    if out.len() != costs.len() {
        return Err(Error::DimensionMismatch {
            context: "gibbs weight buffer",
        });
    }
    if costs.len() != g.len() || costs.len() != weights.len() || costs.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "gibbs weight inputs",
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive { what: "epsilon" });
    }
    let mut max_s = f64::NEG_INFINITY;
    for j in 0..costs.len() {
        if weights[j] > 0.0 {
            let s = (g[j] - costs[j]) / epsilon + num::ln(weights[j]);
            if s > max_s {
                max_s = s;
            }
        }
    }
    if max_s == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(String::from(
            "gibbs weights need positive target mass",
        )));
    }
    let mut total = 0.0;
    for j in 0..costs.len() {
        if weights[j] > 0.0 {
            let s = (g[j] - costs[j]) / epsilon + num::ln(weights[j]);
            out[j] = num::exp(s - max_s);
            total += out[j];
        } else {
            out[j] = 0.0;
        }
    }
    for v in out.iter_mut() {
        *v /= total;
    }
    Ok(())
}

/// Conditional Gibbs weights over the target atoms for one source point.
pub fn gibbs_conditional_weights(
    target: &DiscreteMeasure,
    g: &[f64],
    x: &ManifoldPoint,
    epsilon: f64,
) -> Result<Vec<f64>, Error> {
    validate_transform_inputs(target, g, epsilon)?;
    let costs = cost_row(target, x)?;
    let mut out = alloc::vec![0.0; costs.len()];
    gibbs_conditional_weights_into(&costs, g, target.weights(), epsilon, &mut out)?;
    Ok(out)
}

/// A discrete plan with Gibbs structure: entry (i, j) carries the mass
/// moved from source atom i to target atom j.
#[derive(Debug, Clone)]
pub struct GibbsPlan {
    matrix: Mat,
    row_marginal: Vec<f64>,
    col_support: DiscreteMeasure,
    epsilon: f64,
}

impl GibbsPlan {
    /// Validate and assemble a plan: nonnegative finite entries, rows
    /// summing to the row marginal and total mass one within
    /// [`PLAN_MASS_TOL`].
    pub fn new(
        matrix: Mat,
        row_marginal: Vec<f64>,
        col_support: DiscreteMeasure,
        epsilon: f64,
    ) -> Result<Self, Error> {
        if matrix.rows() != row_marginal.len() || matrix.cols() != col_support.len() {
            return Err(Error::DimensionMismatch {
                context: "plan matrix vs marginals",
            });
        }
        if !(epsilon > 0.0) {
            return Err(Error::NonPositive { what: "epsilon" });
        }
        if !matrix.is_finite() || matrix.iter().any(|v| v < 0.0) {
            return Err(Error::InvalidInput(String::from(
                "plan entries must be finite and nonnegative",
            )));
        }
        let mut total = 0.0;
        for i in 0..matrix.rows() {
            let row_sum = num::kahan_sum(matrix.row(i).iter().copied());
            if (row_sum - row_marginal[i]).abs() > PLAN_MASS_TOL {
                return Err(Error::Inconsistent(alloc::format!(
                    "plan row {i} sums to {row_sum}, expected {}",
                    row_marginal[i]
                )));
            }
            total += row_sum;
        }
        if (total - 1.0).abs() > PLAN_MASS_TOL {
            return Err(Error::NotAProbability {
                what: "plan total mass",
                total,
            });
        }
        Ok(GibbsPlan {
            matrix,
            row_marginal,
            col_support,
            epsilon,
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_support(&self) -> &DiscreteMeasure {
        &self.col_support
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Conditional law over target atoms given source atom `i`
    /// (row renormalized by its marginal). Zero-mass rows yield zeros.
    pub fn conditional_row(&self, i: usize) -> Vec<f64> {
        let m = self.row_marginal[i];
        self.matrix
            .row(i)
            .iter()
            .map(|p| if m > 0.0 { p / m } else { 0.0 })
            .collect()
    }
}

/// Build the Gibbs plan induced by the potential: row i is
/// μᵢ · (conditional softmax weights at xᵢ).
pub fn build_gibbs_plan(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    g: &[f64],
    epsilon: f64,
) -> Result<GibbsPlan, Error> {
    validate_transform_inputs(target, g, epsilon)?;
    let n = source.len();
    let m = target.len();
    let mut matrix = Mat::zeros(n, m);
    let mut costs = alloc::vec![0.0; m];
    for i in 0..n {
        let x = &source.atoms()[i];
        for (j, y) in target.atoms().iter().enumerate() {
            costs[j] = cost(x, y)?;
        }
        gibbs_conditional_weights_into(&costs, g, target.weights(), epsilon, matrix.row_mut(i))?;
        let mu_i = source.weights()[i];
        for v in matrix.row_mut(i) {
            *v *= mu_i;
        }
    }
    GibbsPlan::new(
        matrix,
        source.weights().to_vec(),
        target.clone(),
        epsilon,
    )
}

/// Outcome of a dual-gap evaluation against a reference objective value.
#[derive(Debug, Clone, Copy)]
pub struct DualGapOutcome {
    /// max(0, reference − J(g)).
    pub gap: f64,
    /// The unclamped difference reference − J(g).
    pub raw: f64,
    /// Set when the raw gap dips below [`GAP_WARN_TOL`], attributing the
    /// negativity to truncation of the reference solver.
    pub truncation_warning: bool,
}

/// Suboptimality gap of a potential: reference OT value minus its
/// semidual objective, clamped at zero. A gap below [`GAP_ERROR_TOL`]
/// indicates the reference value itself is unconverged and is an error.
pub fn dual_gap(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    g: &[f64],
    epsilon: f64,
    ot_eps: f64,
) -> Result<DualGapOutcome, Error> {
    let value = semidual_value(source, target, g, epsilon)?;
    let raw = ot_eps - value;
    if raw < GAP_ERROR_TOL {
        return Err(Error::Inconsistent(alloc::format!(
            "dual gap {raw} is negative beyond tolerance; reference value looks unconverged"
        )));
    }
    Ok(DualGapOutcome {
        gap: raw.max(0.0),
        raw,
        truncation_warning: raw < GAP_WARN_TOL,
    })
}

fn check_same_shape(a: &GibbsPlan, b: &GibbsPlan) -> Result<(), Error> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "plans of different shapes",
        });
    }
    Ok(())
}

/// Total variation ½·Σ|pᵢⱼ − qᵢⱼ| between two plans on common supports.
pub fn plan_total_variation(a: &GibbsPlan, b: &GibbsPlan) -> Result<f64, Error> {
    check_same_shape(a, b)?;
    let sum = num::kahan_sum(
        a.matrix
            .data()
            .iter()
            .zip(b.matrix.data())
            .map(|(p, q)| (p - q).abs()),
    );
    Ok(0.5 * sum)
}

/// Mixture-of-fibers total variation Σᵢ μᵢ · TV(πᵢ, π̃ᵢ) over conditional
/// rows, for two plans sharing their row marginal. Agrees with
/// [`plan_total_variation`] up to roundoff.
pub fn fiberwise_total_variation(a: &GibbsPlan, b: &GibbsPlan) -> Result<f64, Error> {
    check_same_shape(a, b)?;
    if a.row_marginal
        .iter()
        .zip(&b.row_marginal)
        .any(|(x, y)| (x - y).abs() > PLAN_MASS_TOL)
    {
        return Err(Error::Inconsistent(String::from(
            "fiberwise total variation needs a shared row marginal",
        )));
    }
    let mut acc = 0.0;
    for i in 0..a.rows() {
        let m = a.row_marginal[i];
        if m <= 0.0 {
            continue;
        }
        let row_tv = 0.5
            * num::kahan_sum(
                a.matrix
                    .row(i)
                    .iter()
                    .zip(b.matrix.row(i))
                    .map(|(p, q)| (p / m - q / m).abs()),
            );
        acc += m * row_tv;
    }
    Ok(acc)
}
