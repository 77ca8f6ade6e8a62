//! Evaluation metrics for transport plans and maps: plan KL divergence,
//! exact discrete W₁ (transportation simplex), conditional W₁ averaged
//! over plan rows, and map L²/endpoint errors.
//!
//! The exact W₁ solver removes a tolerance from the reference metrics:
//! it solves the transportation LP to optimality with a documented
//! pivoting policy instead of approximating with a tiny-ε entropic run.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{distance, GeometryError, ManifoldKind, ManifoldPoint};
use crate::mat::Mat;
use crate::measure::DiscreteMeasure;
use crate::num;
use crate::semidual::GibbsPlan;

/// Largest per-side atom count the exact W₁ solver accepts.
pub const W1_ATOM_CAP: usize = 512;

/// One record of a method's evaluation on a benchmark instance.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub method: String,
    pub manifold: ManifoldKind,
    pub support_size: (usize, usize),
    pub plan_kl: f64,
    pub conditional_w1: f64,
    pub map_l2: f64,
    pub endpoint_error: f64,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<(), Error> {
        let all = [
            ("plan KL", self.plan_kl),
            ("conditional W1", self.conditional_w1),
            ("map L2", self.map_l2),
            ("endpoint error", self.endpoint_error),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Inconsistent(alloc::format!(
                    "metrics report for {} carries an invalid {name} of {v}",
                    self.method
                )));
            }
        }
        Ok(())
    }
}

/// KL divergence Σᵢⱼ pᵢⱼ·log(pᵢⱼ/qᵢⱼ) between plans of the same shape,
/// with 0·log 0 = 0. Entries of `q` that underflowed to exact zero are
/// floored at 1e-300 so a denormal-mass mismatch stays finite instead of
/// poisoning the sum; the result is clamped at zero against roundoff.
pub fn plan_kl(p: &GibbsPlan, q: &GibbsPlan) -> Result<f64, Error> {
    let (pm, qm) = (p.matrix(), q.matrix());
    if pm.rows() != qm.rows() || pm.cols() != qm.cols() {
        return Err(Error::DimensionMismatch {
            context: "plan KL shapes",
        });
    }
    let sum = num::kahan_sum(pm.iter().zip(qm.iter()).map(|(a, b)| {
        if a > 0.0 {
            // a/b instead of ln a − ln b: identical entries contribute an
            // exact zero even at denormal scale.
            a * num::ln(a / b.max(1e-300))
        } else {
            0.0
        }
    }));
    if sum < -1e-9 {
        return Err(Error::Inconsistent(alloc::format!(
            "plan KL came out {sum}; the inputs are not probability plans"
        )));
    }
    Ok(sum.max(0.0))
}

/// A solved transportation LP: optimal value, the supporting flows in
/// original indices, and the final dual prices (an optimality
/// certificate: all reduced costs cᵢⱼ − uᵢ − vⱼ are nonnegative up to the
/// pivot threshold).
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub value: f64,
    pub flows: Vec<(usize, usize, f64)>,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

#[derive(Clone, Copy)]
struct BasisCell {
    i: usize,
    j: usize,
    flow: f64,
}

/// Exact solver for min Σ γᵢⱼ·cᵢⱼ subject to row sums `a` and column sums
/// `b` (balanced, nonnegative). Transportation simplex: northwest-corner
/// start (ties advance the row), tree-structured duals, Dantzig entering
/// rule with lexicographic tie-breaks switching to Bland's rule after
/// 200·(n+m) pivots to rule out cycling, and smallest-index leaving cell
/// among the minimum-flow candidates.
pub fn solve_transportation(
    cost: &Mat,
    a: &[f64],
    b: &[f64],
) -> Result<TransportSolution, Error> {
    if cost.rows() != a.len() || cost.cols() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "transportation cost vs marginals",
        });
    }
    if !a.iter().chain(b).all(|w| w.is_finite() && *w >= 0.0) {
        return Err(Error::InvalidInput(String::from(
            "transportation marginals must be finite and nonnegative",
        )));
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite {
            context: "transportation cost matrix",
        });
    }
    let total_a = num::kahan_sum(a.iter().copied());
    let total_b = num::kahan_sum(b.iter().copied());
    if (total_a - total_b).abs() > 1e-9 * total_a.abs().max(1.0) {
        return Err(Error::InvalidInput(String::from(
            "transportation marginals must carry equal mass",
        )));
    }

    // Work on the positive-mass sub-problem.
    let rows: Vec<usize> = (0..a.len()).filter(|i| a[*i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|j| b[*j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Ok(TransportSolution {
            value: 0.0,
            flows: Vec::new(),
            row_duals: alloc::vec![0.0; a.len()],
            col_duals: alloc::vec![0.0; b.len()],
        });
    }
    let n = rows.len();
    let m = cols.len();
    let c = |i: usize, j: usize| cost.get(rows[i], cols[j]);
    let max_abs_cost = cost.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let threshold = -1e-12 * (1.0 + max_abs_cost);

    // Northwest-corner initial basis: n + m − 1 cells, exhausted-row ties
    // advance the row (adding a zero-flow basic cell keeps the tree).
    let mut basis: Vec<BasisCell> = Vec::with_capacity(n + m - 1);
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut ra = a[rows[0]];
        let mut cb = b[cols[0]];
        loop {
            let f = ra.min(cb).max(0.0);
            basis.push(BasisCell { i, j, flow: f });
            ra -= f;
            cb -= f;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if ra <= 0.0 && i < n - 1 {
                i += 1;
                ra = a[rows[i]];
            } else if j < m - 1 {
                j += 1;
                cb = b[cols[j]];
            } else {
                // Rounding in the running subtractions can leave residual
                // row mass after the last column is spent; advance the row
                // so the staircase still ends at (n−1, m−1).
                i += 1;
                ra = a[rows[i]];
            }
        }
    }

    let mut u = alloc::vec![0.0; n];
    let mut v = alloc::vec![0.0; m];
    let mut adj: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::new(); n + m];
    let mut visited = alloc::vec![false; n + m];
    let mut parent: Vec<Option<(usize, usize)>> = alloc::vec![None; n + m];
    let mut queue: Vec<usize> = Vec::with_capacity(n + m);
    let pivot_budget = 200 * (n + m);
    let hard_cap = 4000 * (n + m) + 1000;

    for pivot in 0..hard_cap {
        // Rebuild tree adjacency (row node i, column node n + j).
        for l in adj.iter_mut() {
            l.clear();
        }
        for (e, cell) in basis.iter().enumerate() {
            adj[cell.i].push((e, n + cell.j));
            adj[n + cell.j].push((e, cell.i));
        }

        // Duals from the spanning tree, anchored at u[0] = 0.
        visited.iter_mut().for_each(|x| *x = false);
        queue.clear();
        queue.push(0);
        visited[0] = true;
        u[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &(e, next) in &adj[node] {
                if !visited[next] {
                    visited[next] = true;
                    let cell = &basis[e];
                    if next >= n {
                        v[next - n] = c(cell.i, cell.j) - u[cell.i];
                    } else {
                        u[next] = c(cell.i, cell.j) - v[cell.j];
                    }
                    queue.push(next);
                }
            }
        }

        // Entering cell: Dantzig (most negative reduced cost, smallest
        // (i, j) on ties) until the budget, Bland afterwards.
        let bland = pivot >= pivot_budget;
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..n {
            for j in 0..m {
                let reduced = c(i, j) - u[i] - v[j];
                if reduced < threshold {
                    match &entering {
                        Some((_, _, best)) if reduced >= *best => {}
                        _ => entering = Some((i, j, reduced)),
                    }
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            // Optimal: collect flows in original indices.
            let value = num::kahan_sum(basis.iter().map(|cell| cell.flow * c(cell.i, cell.j)));
            let mut flows: Vec<(usize, usize, f64)> = basis
                .iter()
                .filter(|cell| cell.flow > 0.0)
                .map(|cell| (rows[cell.i], cols[cell.j], cell.flow))
                .collect();
            flows.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
            let mut row_duals = alloc::vec![0.0; a.len()];
            let mut col_duals = alloc::vec![0.0; b.len()];
            for (i, r) in rows.iter().enumerate() {
                row_duals[*r] = u[i];
            }
            for (j, cc) in cols.iter().enumerate() {
                col_duals[*cc] = v[j];
            }
            return Ok(TransportSolution {
                value,
                flows,
                row_duals,
                col_duals,
            });
        };

        // Unique tree path from row node ei to column node n + ej; with
        // the entering cell it closes the pivot cycle.
        visited.iter_mut().for_each(|x| *x = false);
        parent.iter_mut().for_each(|x| *x = None);
        queue.clear();
        queue.push(ei);
        visited[ei] = true;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            if node == n + ej {
                break;
            }
            for &(e, next) in &adj[node] {
                if !visited[next] {
                    visited[next] = true;
                    parent[next] = Some((e, node));
                    queue.push(next);
                }
            }
        }
        let mut path: Vec<usize> = Vec::new();
        let mut node = n + ej;
        while node != ei {
            let (e, prev) = parent[node].expect("basis tree is connected");
            path.push(e);
            node = prev;
        }
        path.reverse();

        // Walking ei → (n+ej) along the path, edges at even positions
        // leave mass (−θ); the entering cell gains it (+θ). The first
        // path edge shares column ej... no: it shares *row* ei, so it
        // alternates starting with −θ at position 0 counted from the
        // entering row.
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let cell = &basis[e];
                if cell.flow < theta
                    || (cell.flow == theta
                        && leaving != usize::MAX
                        && (cell.i, cell.j) < (basis[leaving].i, basis[leaving].j))
                {
                    theta = cell.flow;
                    leaving = e;
                }
            }
        }
        debug_assert!(leaving != usize::MAX, "cycle has a leaving cell");
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[e].flow = (basis[e].flow - theta).max(0.0);
            } else {
                basis[e].flow += theta;
            }
        }
        basis[leaving] = BasisCell {
            i: ei,
            j: ej,
            flow: theta,
        };
    }
    Err(Error::NumericalFailure {
        context: "transportation simplex failed to terminate",
        index: hard_cap,
    })
}

/// Exact W₁ between two discrete measures on the same manifold, using
/// the intrinsic distance as ground cost.
pub fn exact_w1_discrete(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, Error> {
    if a.kind() != b.kind() {
        return Err(Error::Geometry(GeometryError::KindMismatch));
    }
    for (len, _name) in [(a.len(), "first"), (b.len(), "second")] {
        if len > W1_ATOM_CAP {
            return Err(Error::SizeCap {
                what: "exact W1 solver (switch to the entropic solver beyond the cap)",
                limit: W1_ATOM_CAP,
                got: len,
            });
        }
    }
    let dist = a.distance_matrix(b)?;
    Ok(solve_transportation(&dist, a.weights(), b.weights())?.value)
}

/// W₁ between two weight vectors on one shared support with a
/// precomputed distance matrix. Common mass is cancelled first: for a
/// metric ground cost, W₁(α, β) = W₁((α−β)₊, (β−α)₊), because shared
/// mass can stay in place at zero cost and the triangle inequality makes
/// moving it never profitable.
pub fn w1_on_shared_support(dist: &Mat, alpha: &[f64], beta: &[f64]) -> Result<f64, Error> {
    if dist.rows() != alpha.len() || dist.cols() != beta.len() || alpha.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            context: "shared-support W1 weights vs distance matrix",
        });
    }
    let mut surplus: Vec<(usize, f64)> = Vec::new();
    let mut deficit: Vec<(usize, f64)> = Vec::new();
    for (j, (x, y)) in alpha.iter().zip(beta).enumerate() {
        let diff = x - y;
        if diff > 0.0 {
            surplus.push((j, diff));
        } else if diff < 0.0 {
            deficit.push((j, -diff));
        }
    }
    if surplus.is_empty() || deficit.is_empty() {
        return Ok(0.0);
    }
    let sub_cost = Mat::from_fn(surplus.len(), deficit.len(), |r, c| {
        dist.get(surplus[r].0, deficit[c].0)
    });
    let sa: Vec<f64> = surplus.iter().map(|x| x.1).collect();
    // Rebalance the float residue of the cancellation onto the largest
    // deficit entry so the LP sees exactly equal masses.
    let mut sb: Vec<f64> = deficit.iter().map(|x| x.1).collect();
    let imbalance = num::kahan_sum(sa.iter().copied()) - num::kahan_sum(sb.iter().copied());
    if imbalance.abs() > 0.0 {
        let argmax = sb
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap_or(core::cmp::Ordering::Equal))
            .map(|x| x.0)
            .unwrap_or(0);
        sb[argmax] = (sb[argmax] + imbalance).max(0.0);
    }
    Ok(solve_transportation(&sub_cost, &sa, &sb)?.value)
}

/// Mean over source atoms of the exact W₁ distance between the two
/// plans' row conditionals (unweighted 1/N average).
pub fn conditional_w1(
    p: &GibbsPlan,
    q: &GibbsPlan,
    target: &DiscreteMeasure,
) -> Result<f64, Error> {
    let (pm, qm) = (p.matrix(), q.matrix());
    if pm.rows() != qm.rows() || pm.cols() != qm.cols() || pm.cols() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "conditional W1 plan shapes vs target support",
        });
    }
    if p.col_support().atoms() != target.atoms() || q.col_support().atoms() != target.atoms() {
        return Err(Error::Inconsistent(String::from(
            "conditional W1 requires both plans to live on the given target support",
        )));
    }
    for (i, (rp, rq)) in p
        .row_marginal()
        .iter()
        .zip(q.row_marginal())
        .enumerate()
    {
        if (rp - rq).abs() > 1e-9 {
            return Err(Error::Inconsistent(alloc::format!(
                "conditional W1 requires matching row marginals (row {i}: {rp} vs {rq})"
            )));
        }
    }
    if target.len() > W1_ATOM_CAP {
        return Err(Error::SizeCap {
            what: "exact W1 solver (switch to the entropic solver beyond the cap)",
            limit: W1_ATOM_CAP,
            got: target.len(),
        });
    }
    let dist = target.distance_matrix(target)?;
    let n = pm.rows();
    let mut acc = 0.0;
    let mut pa = alloc::vec![0.0; pm.cols()];
    let mut qa = alloc::vec![0.0; pm.cols()];
    for i in 0..n {
        let mp = num::kahan_sum(pm.row(i).iter().copied());
        let mq = num::kahan_sum(qm.row(i).iter().copied());
        if !(mp > 0.0) || !(mq > 0.0) {
            return Err(Error::InvalidInput(alloc::format!(
                "conditional W1 undefined on zero-mass plan row {i}"
            )));
        }
        for (dst, src) in pa.iter_mut().zip(pm.row(i)) {
            *dst = *src / mp;
        }
        for (dst, src) in qa.iter_mut().zip(qm.row(i)) {
            *dst = *src / mq;
        }
        acc += w1_on_shared_support(&dist, &pa, &qa)?;
    }
    Ok(acc / n as f64)
}

/// Uniform and μ-weighted aggregate distances between two transport maps
/// sampled on the same source atoms.
#[derive(Debug, Clone, Copy)]
pub struct MapErrorReport {
    /// √((1/N)·Σ d(T̂(xᵢ), T*(xᵢ))²)
    pub map_l2: f64,
    /// (1/N)·Σ d(T̂(xᵢ), T*(xᵢ))
    pub endpoint: f64,
    /// √(Σ μᵢ·d²) — the weighting used by the surrogate-recovery bounds.
    pub weighted_map_l2: f64,
    /// Σ μᵢ·d
    pub weighted_endpoint: f64,
}

pub fn map_errors(
    t_hat: &[ManifoldPoint],
    t_star: &[ManifoldPoint],
    mu_weights: &[f64],
) -> Result<MapErrorReport, Error> {
    if t_hat.len() != t_star.len() || t_hat.len() != mu_weights.len() {
        return Err(Error::DimensionMismatch {
            context: "map error point lists vs weights",
        });
    }
    if t_hat.is_empty() {
        return Err(Error::InvalidInput(String::from(
            "map errors need at least one point",
        )));
    }
    let total = num::kahan_sum(mu_weights.iter().copied());
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::NotAProbability {
            what: "map error source weights",
            total,
        });
    }
    let n = t_hat.len() as f64;
    let mut ds = Vec::with_capacity(t_hat.len());
    for (a, b) in t_hat.iter().zip(t_star) {
        ds.push(distance(a, b)?);
    }
    let mean_sq = num::kahan_sum(ds.iter().map(|d| d * d)) / n;
    let mean = num::kahan_sum(ds.iter().copied()) / n;
    let w_sq = num::kahan_sum(ds.iter().zip(mu_weights).map(|(d, w)| w * d * d));
    let w_mean = num::kahan_sum(ds.iter().zip(mu_weights).map(|(d, w)| w * d));
    Ok(MapErrorReport {
        map_l2: num::sqrt(mean_sq),
        endpoint: mean,
        weighted_map_l2: num::sqrt(w_sq),
        weighted_endpoint: w_mean,
    })
}
