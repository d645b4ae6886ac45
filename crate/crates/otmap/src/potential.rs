//! Potentials and strict-convexity margin for a matched sample pair.
//!
//! Given matched points (x⁰ᵢ, x¹ᵢ), we maximize ε₀ subject to
//! ⟨x⁰ᵢ, x¹ᵢ − x¹ⱼ⟩ ≥ ψᵢ − ψⱼ + 2ε₀ for all i ≠ j. The optimal margin
//! satisfies 2ε₀ = μ*, the minimum mean of a directed cycle in the graph of
//! constraint weights (the LP's feasible region shrinks to empty exactly when
//! the reduced weights acquire a negative cycle), so we compute μ* with
//! Karp's algorithm and read ψ off shortest-path distances in the reduced
//! graph.

use crate::dataset::{dot, PairedSamples};
use crate::error::{Error, Result};

/// Complete directed graph of constraint weights,
/// `weight(i, j) = ⟨x⁰ᵢ, x¹ᵢ − x¹ⱼ⟩` for i ≠ j. No self-loops; diagonal
/// storage is unused.
#[derive(Debug, Clone)]
pub struct CostGraph {
    weights: Vec<Vec<f64>>,
    n: usize,
}

impl CostGraph {
    /// Wraps an explicit weight matrix. Off-diagonal entries must be finite;
    /// diagonal entries are ignored.
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        if n < 2 {
            return Err(Error::TooFewPoints { n });
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &w) in row.iter().enumerate() {
                if i != j && !w.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(CostGraph { weights, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of the directed edge i → j. Only defined for i ≠ j.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j, "cost graph has no self-loops");
        self.weights[i][j]
    }

    /// Largest |weight| over the off-diagonal entries.
    pub fn max_abs_weight(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    m = m.max(self.weights[i][j].abs());
                }
            }
        }
        m
    }

    /// Float tolerance used for feasibility checks on this graph.
    pub fn feas_tol(&self) -> f64 {
        1e-9 * (1.0 + self.max_abs_weight())
    }
}

/// Constraint weights for a matched pair: `weight(i,j) = ⟨x⁰ᵢ, x¹ᵢ − x¹ⱼ⟩`,
/// with the inner product summed coordinate by coordinate, left to right.
pub fn build_cost_graph(paired: &PairedSamples) -> Result<CostGraph> {
    let n = paired.source().n();
    if n < 2 {
        return Err(Error::TooFewPoints { n });
    }
    let d = paired.source().d();
    let mut weights = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        let xi = paired.source().row(i);
        let ti = paired.target().row(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let tj = paired.target().row(j);
            let diff: Vec<f64> = (0..d).map(|k| ti[k] - tj[k]).collect();
            weights[i][j] = dot(xi, &diff);
        }
    }
    Ok(CostGraph { weights, n })
}

/// Minimum cycle mean μ* = min over directed cycles of (weight / length),
/// by Karp's characterization μ* = min_v max_k (Dₙ(v) − D_k(v)) / (n − k)
/// where D_k(v) is the minimum weight of a k-edge walk from node 0 to v.
/// O(n³) time, O(n²) table.
pub fn min_cycle_mean(graph: &CostGraph) -> f64 {
    let n = graph.n();
    // d[k][v]: min weight over k-edge walks 0 → v; infinite when none exists.
    let mut d = vec![vec![f64::INFINITY; n]; n + 1];
    d[0][0] = 0.0;
    for k in 1..=n {
        for v in 0..n {
            let mut best = f64::INFINITY;
            for u in 0..n {
                if u != v && d[k - 1][u].is_finite() {
                    best = best.min(d[k - 1][u] + graph.weight(u, v));
                }
            }
            d[k][v] = best;
        }
    }
    let mut mu = f64::INFINITY;
    for v in 0..n {
        if !d[n][v].is_finite() {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            if d[k][v].is_finite() {
                worst = worst.max((d[n][v] - d[k][v]) / (n - k) as f64);
            }
        }
        mu = mu.min(worst);
    }
    mu
}

/// Shortest-path potentials of the reduced graph d(i,j) = weight(i,j) − 2·eps0:
/// ψᵢ = −dist(i) where dist is the Bellman–Ford distance from a virtual
/// source with zero-weight edges into every node. Result is shifted so
/// ψ₀ = 0 and satisfies ψᵢ − ψⱼ ≤ d(i,j) for all i ≠ j.
pub fn recover_potentials(graph: &CostGraph, eps0: f64) -> Result<Vec<f64>> {
    let n = graph.n();
    let two_eps = 2.0 * eps0;
    // Virtual-source distances start at 0; shortest paths then need at most
    // n−1 further relaxation rounds, so a change in round n is a cycle.
    let mut dist = vec![0.0f64; n];
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let cand = dist[i] + (graph.weight(i, j) - two_eps);
                if cand < dist[j] {
                    dist[j] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            let psi0 = -dist[0];
            return Ok(dist.iter().map(|&di| -di - psi0).collect());
        }
    }
    Err(Error::NegativeCycle)
}

/// Optimal potentials for a matched sample pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSolution {
    /// Strict-convexity margin ε₀ = μ*/2 (possibly shrunk by a few ulps to
    /// absorb float drift in the zero-mean cycle).
    pub eps0: f64,
    /// Potentials ψ, normalized so ψ₀ = 0.
    pub psi: Vec<f64>,
}

impl PotentialSolution {
    /// Smallest constraint slack weight(i,j) − (ψᵢ − ψⱼ) − 2·eps0 over i ≠ j.
    /// Feasibility means this is ≥ −feas_tol; optimality means it is also
    /// ≤ feas_tol (some constraint is tight, so eps0 cannot grow).
    pub fn min_slack(&self, graph: &CostGraph) -> f64 {
        let n = graph.n();
        let mut min_s = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let s = graph.weight(i, j) - (self.psi[i] - self.psi[j]) - 2.0 * self.eps0;
                    min_s = min_s.min(s);
                }
            }
        }
        min_s
    }
}

/// Solves the margin LP for a matched pair: eps0 = μ*/2 via [`min_cycle_mean`],
/// ψ via [`recover_potentials`], with full feasibility re-checked against all
/// n(n−1) constraints.
///
/// A duplicated source-target pair forces a zero-mean 2-cycle, hence
/// eps0 = 0; such samples are rejected as degenerate rather than silently
/// regularized.
pub fn fit_potential(paired: &PairedSamples) -> Result<PotentialSolution> {
    let graph = build_cost_graph(paired)?;
    let feas_tol = graph.feas_tol();
    let mut eps0 = min_cycle_mean(&graph) / 2.0;
    if !(eps0 > feas_tol) {
        return Err(Error::DegenerateSample {
            eps0,
            tol: feas_tol,
        });
    }
    // At eps0 = μ*/2 the minimum-mean cycle reduces to weight exactly zero;
    // float drift can make Bellman–Ford see it as negative. Shrinking eps0 by
    // a hair restores a strictly positive cycle.
    let mut psi = None;
    for _ in 0..4 {
        match recover_potentials(&graph, eps0) {
            Ok(p) => {
                psi = Some(p);
                break;
            }
            Err(Error::NegativeCycle) => {
                eps0 -= 1e-12 * (1.0 + eps0.abs());
            }
            Err(e) => return Err(e),
        }
    }
    let psi = psi.ok_or(Error::NegativeCycle)?;
    let solution = PotentialSolution { eps0, psi };
    let min_s = solution.min_slack(&graph);
    if min_s < -feas_tol {
        return Err(Error::InfeasiblePotentials {
            violation: -min_s,
            tol: feas_tol,
        });
    }
    debug_assert!(
        min_s <= feas_tol,
        "no tight constraint: eps0 underestimates the margin by {min_s:e}"
    );
    Ok(solution)
}
