//! Exact minimum-cost bipartite assignment under squared Euclidean cost.
//!
//! The solver is the O(n³) shortest-augmenting-path form of the Hungarian
//! algorithm, followed by a tie-break pass that picks, among all minimum-cost
//! bijections, the one whose permutation is lexicographically smallest.

use crate::dataset::{squared_distance, Dataset, PairedSamples};
use crate::error::{Error, Result};

/// Pairwise squared-distance matrix: `entries[i][j] = ‖x⁰ᵢ − x¹ⱼ‖²`.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    entries: Vec<Vec<f64>>,
    n: usize,
}

impl CostMatrix {
    /// Wraps an explicit square matrix of finite, nonnegative costs.
    pub fn from_entries(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = entries.len();
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(CostMatrix { entries, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Squared distances between all source/target row pairs. Each entry sums the
/// squared coordinate differences left to right, so the arithmetic order (and
/// hence the exact float value) is reproducible.
pub fn build_cost_matrix(ds0: &Dataset, ds1: &Dataset) -> Result<CostMatrix> {
    if ds0.d() != ds1.d() {
        return Err(Error::DimensionMismatch {
            left: ds0.d(),
            right: ds1.d(),
        });
    }
    if ds0.n() != ds1.n() {
        return Err(Error::SizeMismatch {
            left: ds0.n(),
            right: ds1.n(),
        });
    }
    let entries = ds0
        .rows()
        .map(|a| ds1.rows().map(|b| squared_distance(a, b)).collect())
        .collect();
    Ok(CostMatrix {
        entries,
        n: ds0.n(),
    })
}

/// A minimum-cost bijection: source row `i` is matched to target row
/// `permutation[i]`. `total_cost` re-sums the matched entries in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

/// Exact optimal assignment. Among equal-cost optima (equality judged via the
/// optimal dual's tight edges, with a float tolerance scaled to the matrix),
/// returns the lexicographically smallest permutation.
pub fn solve_assignment(cost: &CostMatrix) -> Assignment {
    let (mut perm, u, v) = hungarian(cost);
    lexicographic_refine(cost, &mut perm, &u, &v);
    let total_cost = (0..cost.n()).map(|i| cost.entry(i, perm[i])).sum();
    Assignment {
        permutation: perm,
        total_cost,
    }
}

/// Shortest-augmenting-path Hungarian algorithm with dual potentials.
/// Returns the matching as row→column plus the final duals (u over rows,
/// v over columns), which satisfy `cost[i][j] − u[i] − v[j] ≥ −fp-noise`
/// with equality on matched edges.
fn hungarian(cost: &CostMatrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.n();
    // 1-based internally; index 0 is the virtual free column/row.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row matched to column j, 0 = free
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.entry(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // unwind the augmenting path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    (perm, u[1..].to_vec(), v[1..].to_vec())
}

/// Rewires the matching toward the lexicographically smallest optimal
/// permutation. By complementary slackness every optimal assignment lives in
/// the subgraph of dual-tight edges, and any perfect matching of that
/// subgraph is optimal; so we fix rows in order, always trying the smallest
/// tight column that still leaves the remaining rows perfectly matchable.
fn lexicographic_refine(cost: &CostMatrix, perm: &mut [usize], u: &[f64], v: &[f64]) {
    let n = cost.n();
    let tol = 1e-9 * (1.0 + cost.max_abs());
    let tight =
        |i: usize, j: usize| cost.entry(i, j) - u[i] - v[j] <= tol;

    let mut col_owner = vec![usize::MAX; n];
    for (i, &j) in perm.iter().enumerate() {
        col_owner[j] = i;
    }
    let mut col_fixed = vec![false; n];

    for i in 0..n {
        for j in 0..perm[i] {
            if col_fixed[j] || !tight(i, j) {
                continue;
            }
            // Try forcing i→j: the current owner of j must be re-routed to
            // the column perm[i] frees up, through tight edges of rows > i.
            let displaced = col_owner[j];
            let freed = perm[i];
            if try_reroute(
                cost, &tight, &col_fixed, &mut col_owner, perm, i, displaced, j, freed,
            ) {
                perm[i] = j;
                col_owner[j] = i;
                break;
            }
        }
        col_fixed[perm[i]] = true;
    }
}

/// Augmenting-path search: can `displaced` (and transitively everyone it
/// bumps) be rematched so that column `taken` goes to the fixed row and the
/// only newly free column is `freed`? Applies the rematch when found.
#[allow(clippy::too_many_arguments)]
fn try_reroute(
    cost: &CostMatrix,
    tight: &dyn Fn(usize, usize) -> bool,
    col_fixed: &[bool],
    col_owner: &mut [usize],
    perm: &mut [usize],
    fixed_row: usize,
    displaced: usize,
    taken: usize,
    freed: usize,
) -> bool {
    let mut visited_rows = vec![false; cost.n()];
    // DFS over alternating paths: a displaced row picks any tight column;
    // taking an occupied one displaces its owner in turn.
    fn dfs(
        row: usize,
        cost: &CostMatrix,
        tight: &dyn Fn(usize, usize) -> bool,
        col_fixed: &[bool],
        col_owner: &mut [usize],
        perm: &mut [usize],
        visited_rows: &mut [bool],
        fixed_row: usize,
        taken: usize,
        freed: usize,
    ) -> bool {
        visited_rows[row] = true;
        for j in 0..cost.n() {
            if j == taken || col_fixed[j] || !tight(row, j) {
                continue;
            }
            if j == freed {
                perm[row] = j;
                col_owner[j] = row;
                return true;
            }
            let owner = col_owner[j];
            if owner == fixed_row || visited_rows[owner] {
                continue;
            }
            if dfs(
                owner, cost, tight, col_fixed, col_owner, perm, visited_rows, fixed_row, taken,
                freed,
            ) {
                perm[row] = j;
                col_owner[j] = row;
                return true;
            }
        }
        false
    }
    dfs(
        displaced,
        cost,
        tight,
        col_fixed,
        col_owner,
        perm,
        &mut visited_rows,
        fixed_row,
        taken,
        freed,
    )
}

/// Solves the discrete matching between two samples and reorders the target
/// so row `i` of the result's source matches row `i` of its target.
pub fn pair_samples(ds0: &Dataset, ds1: &Dataset) -> Result<PairedSamples> {
    let cost = build_cost_matrix(ds0, ds1)?;
    let assignment = solve_assignment(&cost);
    let target = ds1.select(&assignment.permutation);
    PairedSamples::from_aligned(ds0.clone(), target)
}
