//! Log-domain Sinkhorn iteration on discrete cost matrices — the
//! reference solver that produces converged Schrödinger potentials, the
//! entropic objective value, and the optimal plan other components
//! compare themselves against.
//!
//! The solver is matrix-level: it never touches manifold geometry, only a
//! cost matrix and two weight vectors. Column updates stream the cost
//! matrix row-major (two passes: running column maxima, then shifted
//! exponential sums) so nothing walks the matrix with a stride.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::mat::Mat;
use crate::measure::DiscreteMeasure;
use crate::num;
use crate::semidual::GibbsPlan;

/// Iteration controls for the reference solver.
#[derive(Debug, Clone, Copy)]
pub struct SinkhornOptions {
    pub max_iters: usize,
    /// Stop once the running marginal-deviation estimate drops below this.
    pub tol: f64,
    /// Record the primal entropic objective of every iterate (one extra
    /// matrix pass per iteration); the final value is always computed.
    pub record_history: bool,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            max_iters: 200,
            tol: 1e-9,
            record_history: false,
        }
    }
}

/// Converged (or iteration-capped) solver output.
#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// ε-scaled potential on source atoms; equals the soft c-transform of
    /// `g_potential` row by row at exit.
    pub f_potential: Vec<f64>,
    /// ε-scaled potential on target atoms, gauge-fixed to zero ν-mean.
    pub g_potential: Vec<f64>,
    /// The Gibbs plan exp((fᵢ + gⱼ − Cᵢⱼ)/ε)·μᵢνⱼ.
    pub plan: Mat,
    /// Entropic primal objective of `plan` (transport cost plus ε·KL).
    pub value: f64,
    /// Full update rounds executed.
    pub iterations: usize,
    /// Largest row/column deviation of `plan` from the prescribed
    /// marginals.
    pub marginal_error: f64,
    /// Primal objective per iteration when requested, else empty.
    pub value_history: Vec<f64>,
}

impl SinkhornResult {
    /// Wrap the raw plan matrix as a validated [`GibbsPlan`] over a target
    /// support (the solver itself is geometry-free).
    pub fn gibbs_plan(
        &self,
        row_marginal: &[f64],
        col_support: &DiscreteMeasure,
        epsilon: f64,
    ) -> Result<GibbsPlan, Error> {
        GibbsPlan::new(
            self.plan.clone(),
            row_marginal.to_vec(),
            col_support.clone(),
            epsilon,
        )
    }
}

/// Median-cost bandwidth heuristic: `scale` × median of all cost entries
/// (mean of the two middle values for even counts).
pub fn median_epsilon(cost: &Mat, scale: f64) -> Result<f64, Error> {
    if !(scale > 0.0) {
        return Err(Error::NonPositive {
            what: "median-cost scale",
        });
    }
    if cost.data().is_empty() {
        return Err(Error::InvalidInput(String::from(
            "median epsilon needs a nonempty cost matrix",
        )));
    }
    let med = num::median(cost.data()).expect("nonempty checked above");
    if med <= 0.0 {
        return Err(Error::InvalidInput(String::from(
            "cost matrix has nonpositive median; epsilon heuristic is degenerate",
        )));
    }
    Ok(scale * med)
}

fn validate_weights(weights: &[f64], what: &'static str) -> Result<(), Error> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput(alloc::format!(
            "{what} weights must be finite and nonnegative"
        )));
    }
    let total = num::kahan_sum(weights.iter().copied());
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::NotAProbability { what, total });
    }
    Ok(())
}

/// f-update: for each source atom, the soft c-transform of g against ν.
/// Two passes per row, zero-weight atoms skipped.
fn update_f(cost: &Mat, nu: &[f64], g: &[f64], epsilon: f64, out: &mut [f64]) {
    for i in 0..cost.rows() {
        let row = cost.row(i);
        let mut max_s = f64::NEG_INFINITY;
        for j in 0..row.len() {
            if nu[j] > 0.0 {
                let s = num::ln(nu[j]) + (g[j] - row[j]) / epsilon;
                if s > max_s {
                    max_s = s;
                }
            }
        }
        let mut sum = 0.0;
        for j in 0..row.len() {
            if nu[j] > 0.0 {
                let s = num::ln(nu[j]) + (g[j] - row[j]) / epsilon;
                sum += num::exp(s - max_s);
            }
        }
        out[i] = -epsilon * (max_s + num::ln(sum));
    }
}

/// g-update: soft transform of f against μ, streamed row-major with
/// per-column running maxima and then shifted sums.
fn update_g(cost: &Mat, mu: &[f64], f: &[f64], epsilon: f64, out: &mut [f64]) {
    let m = cost.cols();
    for v in out.iter_mut() {
        *v = f64::NEG_INFINITY;
    }
    for i in 0..cost.rows() {
        if mu[i] > 0.0 {
            let lead = num::ln(mu[i]) + f[i] / epsilon;
            let row = cost.row(i);
            for j in 0..m {
                let s = lead - row[j] / epsilon;
                if s > out[j] {
                    out[j] = s;
                }
            }
        }
    }
    let max_s: Vec<f64> = out.to_vec();
    let mut sums = alloc::vec![0.0; m];
    for i in 0..cost.rows() {
        if mu[i] > 0.0 {
            let lead = num::ln(mu[i]) + f[i] / epsilon;
            let row = cost.row(i);
            for j in 0..m {
                sums[j] += num::exp(lead - row[j] / epsilon - max_s[j]);
            }
        }
    }
    for j in 0..m {
        out[j] = -epsilon * (max_s[j] + num::ln(sums[j]));
    }
}

fn build_plan(cost: &Mat, mu: &[f64], nu: &[f64], f: &[f64], g: &[f64], epsilon: f64) -> Mat {
    Mat::from_fn(cost.rows(), cost.cols(), |i, j| {
        mu[i] * nu[j] * num::exp((f[i] + g[j] - cost.get(i, j)) / epsilon)
    })
}

/// Primal entropic objective of a Gibbs-form iterate via the identity
/// Σπ·C + ε·KL(π‖μ⊗ν) = Σᵢ fᵢ·rowsumᵢ + Σⱼ gⱼ·colsumⱼ, computed in one
/// streaming pass without materializing the plan.
fn gibbs_primal_value(
    cost: &Mat,
    mu: &[f64],
    nu: &[f64],
    f: &[f64],
    g: &[f64],
    epsilon: f64,
) -> f64 {
    let mut value = 0.0;
    let mut colsum = alloc::vec![0.0; cost.cols()];
    for i in 0..cost.rows() {
        let row = cost.row(i);
        let mut rowsum = 0.0;
        for j in 0..row.len() {
            let p = mu[i] * nu[j] * num::exp((f[i] + g[j] - row[j]) / epsilon);
            rowsum += p;
            colsum[j] += p;
        }
        value += f[i] * rowsum;
    }
    value + num::kahan_sum(g.iter().zip(&colsum).map(|(gv, cv)| gv * cv))
}

/// Transport cost plus ε-scaled relative entropy of a plan against the
/// product μ⊗ν, with a 1e-30 density floor and the 0·log 0 = 0 convention.
pub fn entropic_objective(
    plan: &Mat,
    cost: &Mat,
    mu: &[f64],
    nu: &[f64],
    epsilon: f64,
) -> Result<f64, Error> {
    if plan.rows() != cost.rows()
        || plan.cols() != cost.cols()
        || mu.len() != plan.rows()
        || nu.len() != plan.cols()
    {
        return Err(Error::DimensionMismatch {
            context: "plan vs cost matrix shapes",
        });
    }
    let mut value = 0.0;
    for i in 0..plan.rows() {
        for j in 0..plan.cols() {
            let p = plan.get(i, j);
            if p > 0.0 {
                value += p * cost.get(i, j)
                    + epsilon * p * num::ln(p / (mu[i] * nu[j]).max(1e-30));
            }
        }
    }
    Ok(value)
}

/// Alternating log-domain updates f ← T_ν g, g ← T_μ f until the row
/// deviation estimate maxᵢ μᵢ·|exp((fᵢ − f′ᵢ)/ε) − 1| falls below `tol`
/// or the iteration budget runs out. The returned g is gauge-fixed to
/// zero ν-mean; the reported marginal error comes from the built plan.
pub fn sinkhorn_log_domain(
    cost: &Mat,
    mu: &[f64],
    nu: &[f64],
    epsilon: f64,
    opts: &SinkhornOptions,
) -> Result<SinkhornResult, Error> {
    if mu.len() != cost.rows() || nu.len() != cost.cols() {
        return Err(Error::DimensionMismatch {
            context: "marginal weights vs cost matrix",
        });
    }
    if cost.data().is_empty() {
        return Err(Error::InvalidInput(String::from(
            "sinkhorn needs a nonempty cost matrix",
        )));
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite {
            context: "cost matrix",
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive { what: "epsilon" });
    }
    validate_weights(mu, "source marginal")?;
    validate_weights(nu, "target marginal")?;

    let n = cost.rows();
    let m = cost.cols();
    let mut f = alloc::vec![0.0; n];
    let mut f_next = alloc::vec![0.0; n];
    let mut g = alloc::vec![0.0; m];
    update_f(cost, nu, &g, epsilon, &mut f);
    let mut iterations = 0;
    let mut value_history = Vec::new();
    for iter in 1..=opts.max_iters {
        update_g(cost, mu, &f, epsilon, &mut g);
        update_f(cost, nu, &g, epsilon, &mut f_next);
        if !f_next.iter().all(|v| v.is_finite()) || !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "sinkhorn produced non-finite potentials (epsilon too small for this cost scale)",
                index: iter,
            });
        }
        let row_dev = f
            .iter()
            .zip(&f_next)
            .zip(mu)
            .map(|((a, b), w)| w * (num::exp((a - b) / epsilon) - 1.0).abs())
            .fold(0.0, f64::max);
        core::mem::swap(&mut f, &mut f_next);
        iterations = iter;
        if opts.record_history {
            value_history.push(gibbs_primal_value(cost, mu, nu, &f, &g, epsilon));
        }
        if row_dev <= opts.tol {
            break;
        }
    }

    // Gauge: shift g to zero ν-mean and f the opposite way, which leaves
    // every f + g sum (and hence the plan) unchanged.
    let mean = num::kahan_sum(g.iter().zip(nu).map(|(v, w)| v * w));
    for v in g.iter_mut() {
        *v -= mean;
    }
    for v in f.iter_mut() {
        *v += mean;
    }

    let plan = build_plan(cost, mu, nu, &f, &g, epsilon);
    let row_sums = plan.row_sums();
    let col_sums = plan.col_sums();
    let marginal_error = row_sums
        .iter()
        .zip(mu)
        .map(|(s, w)| (s - w).abs())
        .chain(col_sums.iter().zip(nu).map(|(s, w)| (s - w).abs()))
        .fold(0.0, f64::max);
    let value = num::kahan_sum(f.iter().zip(&row_sums).map(|(a, b)| a * b))
        + num::kahan_sum(g.iter().zip(&col_sums).map(|(a, b)| a * b));
    Ok(SinkhornResult {
        f_potential: f,
        g_potential: g,
        plan,
        value,
        iterations,
        marginal_error,
        value_history,
    })
}
