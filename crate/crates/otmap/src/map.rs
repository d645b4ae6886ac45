//! Smooth interpolation of a matched sample pair.
//!
//! The fitted potentials turn the matching into a map: the targets x¹ᵢ are
//! the slopes of the max-of-affine potential φ̃(z) = maxᵢ{⟨z, x¹ᵢ⟩ − ψᵢ},
//! and the map is the gradient of its Moreau envelope,
//! T̄(x) = (x − prox(x))/ε with prox(x) = argmin_z φ̃(z) + ‖z − x‖²/(2ε).
//! For any ε > 0 this map sends each fit source exactly to its matched
//! target, takes every value in the convex hull of the targets, is monotone
//! (⟨T̄(x) − T̄(y), x − y⟩ ≥ 0), and is (1/ε)-Lipschitz.

use crate::assignment::pair_samples;
use crate::dataset::{align_groups, dot, Dataset};
use crate::error::{Error, Result};
use crate::potential::fit_potential;

/// Knobs for [`FittedMap::fit`]: subsampling seed, default evaluation
/// accuracy, and the per-point prox iteration cap.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Seed for the subsample drawn when the two groups differ in size.
    pub seed: u64,
    /// Default map-space accuracy of evaluations, ‖T̄(x) − T̄*(x)‖ ≤ map_tol.
    pub map_tol: f64,
    /// Hard cap on prox iterations per evaluated point.
    pub prox_max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: 0,
            map_tol: 1e-6,
            prox_max_iter: 1_000_000,
        }
    }
}

/// Fit provenance carried by a map (and persisted alongside it).
#[derive(Debug, Clone, PartialEq)]
pub struct FitMeta {
    pub seed: u64,
    pub map_tol: f64,
    pub prox_max_iter: usize,
    /// Row counts of the two input samples before any subsampling.
    pub source_rows: usize,
    pub target_rows: usize,
}

/// Certified proximal point: `z` minimizes φ̃(z) + ‖z − x‖²/(2ε) up to
/// `gap_bound` in objective, and `weights` is the simplex vector with
/// (x − z)/ε = Σᵢ weights[i]·targets[i]. By strong convexity,
/// ‖z − z*‖ ≤ sqrt(2·ε·gap_bound).
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub z: Vec<f64>,
    pub weights: Vec<f64>,
    pub gap_bound: f64,
}

/// A smooth monotone map interpolating matched sample pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedMap {
    sources: Dataset,
    targets: Dataset,
    psi: Vec<f64>,
    eps0: f64,
    eval_eps: f64,
    meta: FitMeta,
}

/// Anything that sends d-vectors to d-vectors rowwise. Lets audits run
/// against either a fitted map or a closed-form reference map.
pub trait TransportMap {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Rowwise [`Self::apply`] preserving row order. Failing rows are
    /// collected and reported together with their indices.
    fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.d() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: ds.d(),
                right: self.dim(),
            });
        }
        let mut rows = Vec::with_capacity(ds.n());
        let mut failed = Vec::new();
        for (i, row) in ds.rows().enumerate() {
            match self.apply(row) {
                Ok(y) => rows.push(y),
                Err(e) => failed.push((i, e)),
            }
        }
        if !failed.is_empty() {
            let indices: Vec<usize> = failed.iter().map(|(i, _)| *i).collect();
            let (first, source) = failed.swap_remove(0);
            return Err(Error::TransformRows {
                rows: indices,
                first,
                source: Box::new(source),
            });
        }
        Dataset::new(rows)
    }
}

impl TransportMap for FittedMap {
    fn dim(&self) -> usize {
        self.d()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x)
    }
}

impl FittedMap {
    /// End-to-end fit: equalize group sizes (seeded subsample), match the
    /// samples under squared Euclidean cost, solve the margin LP, and
    /// assemble the map. Duplicate or otherwise degenerate samples surface
    /// here as errors.
    pub fn fit(ds0: &Dataset, ds1: &Dataset, options: &FitOptions) -> Result<FittedMap> {
        let (src, tgt) = align_groups(ds0, ds1, options.seed)?;
        let paired = pair_samples(&src, &tgt)?;
        let solution = fit_potential(&paired)?;
        let meta = FitMeta {
            seed: options.seed,
            map_tol: options.map_tol,
            prox_max_iter: options.prox_max_iter,
            source_rows: ds0.n(),
            target_rows: ds1.n(),
        };
        let (sources, targets, _) = paired.into_parts();
        Ok(FittedMap::assemble(
            sources,
            targets,
            solution.psi,
            solution.eps0,
            meta,
        ))
    }

    /// Rebuilds a map from stored pieces (model files). Validates shapes and
    /// finiteness; the envelope parameter is recomputed deterministically, so
    /// a round-tripped map evaluates identically.
    pub fn from_parts(
        sources: Dataset,
        targets: Dataset,
        psi: Vec<f64>,
        eps0: f64,
        meta: FitMeta,
    ) -> Result<FittedMap> {
        if sources.d() != targets.d() {
            return Err(Error::InvalidModel(format!(
                "source dimension {} does not match target dimension {}",
                sources.d(),
                targets.d()
            )));
        }
        if sources.n() != targets.n() || sources.n() != psi.len() {
            return Err(Error::InvalidModel(format!(
                "inconsistent sizes: {} sources, {} targets, {} potentials",
                sources.n(),
                targets.n(),
                psi.len()
            )));
        }
        if sources.n() < 2 {
            return Err(Error::InvalidModel("need at least 2 points".into()));
        }
        if !(eps0 > 0.0) || !eps0.is_finite() {
            return Err(Error::InvalidModel(format!("eps0 = {eps0} must be positive")));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite potential".into()));
        }
        Ok(FittedMap::assemble(sources, targets, psi, eps0, meta))
    }

    fn assemble(
        sources: Dataset,
        targets: Dataset,
        psi: Vec<f64>,
        eps0: f64,
        meta: FitMeta,
    ) -> FittedMap {
        let eval_eps = safe_envelope_eps(&sources, &targets, &psi, eps0);
        FittedMap {
            sources,
            targets,
            psi,
            eps0,
            eval_eps,
            meta,
        }
    }

    pub fn n(&self) -> usize {
        self.targets.n()
    }

    pub fn d(&self) -> usize {
        self.targets.d()
    }

    /// Strict-convexity margin of the underlying potential LP.
    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// Envelope parameter actually used by prox and evaluation. Equals
    /// [`Self::eps0`] whenever the targets are small enough (norms within the
    /// unit ball always qualify); for larger targets it is capped so the
    /// interpolation property survives, see [`safe_envelope_eps`].
    pub fn eval_eps(&self) -> f64 {
        self.eval_eps
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn sources(&self) -> &Dataset {
        &self.sources
    }

    pub fn targets(&self) -> &Dataset {
        &self.targets
    }

    pub fn meta(&self) -> &FitMeta {
        &self.meta
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::PointDim {
                expected: self.d(),
                got: x.len(),
            });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteQuery { col });
        }
        Ok(())
    }

    /// Scores of all affine pieces at z: gᵢ(z) = ⟨z, targets[i]⟩ − ψᵢ.
    fn scores(&self, z: &[f64]) -> Vec<f64> {
        self.targets
            .rows()
            .zip(&self.psi)
            .map(|(y, &p)| dot(z, y) - p)
            .collect()
    }

    /// Max-of-affine potential value and the set of attaining indices
    /// (everything within arg_tol = 1e−12·(1+|value|) of the max).
    pub fn tilde_phi(&self, x: &[f64]) -> Result<(f64, Vec<usize>)> {
        self.check_query(x)?;
        let scores = self.scores(x);
        let value = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
        let arg_tol = 1e-12 * (1.0 + value.abs());
        let argmax = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= value - arg_tol)
            .map(|(i, _)| i)
            .collect();
        Ok((value, argmax))
    }

    /// Proximal point of the envelope at x, certified to objective gap
    /// ≤ tol_g (or, at a float-exact optimum, to the best representable gap,
    /// reported honestly in `gap_bound`).
    ///
    /// Works on the dual: over simplex weights λ, maximize
    /// q(λ) = ⟨x, s⟩ − Σλᵢψᵢ − (ε/2)‖s‖² with s = Σλᵢ·targets[i] and
    /// z = x − ε·s. The duality gap at (z, λ) telescopes to
    /// Σλᵢ·(max_j gⱼ(z) − gᵢ(z)) ≥ 0, which is the certificate. Each round
    /// adds the best-scoring vertex to the support and re-solves the
    /// equality-constrained quadratic over it exactly, dropping vertices
    /// whose weight would go negative, so the support stays small and
    /// convergence is finite in practice; a gradient step on the simplex is
    /// the fallback if the support system ever degenerates.
    pub fn prox(&self, x: &[f64], tol_g: f64) -> Result<ProxResult> {
        self.check_query(x)?;
        let d = self.d();
        let eps = self.eval_eps;

        // Start on the vertex active at x itself (deterministic: first of
        // the ties). This makes saturated queries converge in one step and
        // fit-point queries return their matched target exactly.
        let start = argmax_index(&self.scores(x));
        let mut support = vec![start];
        let mut lambda = vec![1.0f64];
        let mut best_gap = f64::INFINITY;
        let mut corrected = false;

        for _ in 0..self.meta.prox_max_iter {
            let s = self.combine(&support, &lambda);
            let z: Vec<f64> = (0..d).map(|k| x[k] - eps * s[k]).collect();
            let scores = self.scores(&z);
            let imax = argmax_index(&scores);
            let gap: f64 = support
                .iter()
                .zip(&lambda)
                .map(|(&a, &l)| l * (scores[imax] - scores[a]))
                .sum();
            best_gap = best_gap.min(gap);
            if gap <= tol_g {
                return Ok(self.certified(z, &support, &lambda, gap));
            }
            if !support.contains(&imax) {
                support.push(imax);
                lambda.push(0.0);
            } else if corrected {
                // The support is already optimal (scores on it agree to
                // rounding) and no vertex outside beats it: the remaining
                // gap is float noise below what the certificate can resolve.
                return Ok(self.certified(z, &support, &lambda, gap));
            }
            corrected = self.correct_support(x, &mut support, &mut lambda, imax, &s, gap);
        }
        Err(Error::ProxNoCertificate {
            gap: best_gap,
            tol: tol_g,
            iters: self.meta.prox_max_iter,
        })
    }

    /// Σ λ_a · targets[support[a]].
    fn combine(&self, support: &[usize], lambda: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0f64; self.d()];
        for (&a, &l) in support.iter().zip(lambda) {
            for (k, v) in self.targets.row(a).iter().enumerate() {
                s[k] += l * v;
            }
        }
        s
    }

    fn certified(&self, z: Vec<f64>, support: &[usize], lambda: &[f64], gap: f64) -> ProxResult {
        let mut weights = vec![0.0f64; self.n()];
        for (&a, &l) in support.iter().zip(lambda) {
            weights[a] = l;
        }
        ProxResult {
            z,
            weights,
            gap_bound: gap.max(0.0),
        }
    }

    /// Re-solves the bordered stationarity system over the support
    /// (ε·⟨yₐ, y_b⟩ λ_b + ν = ⟨yₐ, x⟩ − ψₐ, Σλ = 1), dropping the most
    /// negative weight until the solution is feasible. Returns whether the
    /// support is now exactly optimized (false after the gradient-step
    /// fallback for a degenerate system).
    fn correct_support(
        &self,
        x: &[f64],
        support: &mut Vec<usize>,
        lambda: &mut Vec<f64>,
        imax: usize,
        s: &[f64],
        gap: f64,
    ) -> bool {
        loop {
            match self.solve_support(x, support) {
                Some(sol) => {
                    let (worst, min_l) = sol
                        .iter()
                        .take(support.len())
                        .enumerate()
                        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| {
                            if v < bv {
                                (i, v)
                            } else {
                                (bi, bv)
                            }
                        });
                    if min_l >= 0.0 {
                        lambda.clear();
                        lambda.extend_from_slice(&sol[..support.len()]);
                        return true;
                    }
                    support.remove(worst);
                    if support.len() == 1 {
                        lambda.clear();
                        lambda.push(1.0);
                        return true;
                    }
                    lambda.truncate(support.len());
                }
                None => {
                    // Degenerate Gram system: take the certified-progress
                    // step toward the best vertex instead.
                    let eps = self.eval_eps;
                    let y = self.targets.row(imax);
                    let dir_sq: f64 = (0..self.d()).map(|k| (y[k] - s[k]).powi(2)).sum();
                    let gamma = if eps * dir_sq > 0.0 {
                        (gap / (eps * dir_sq)).min(1.0)
                    } else {
                        1.0
                    };
                    for l in lambda.iter_mut() {
                        *l *= 1.0 - gamma;
                    }
                    let pos = support.iter().position(|&a| a == imax).unwrap();
                    lambda[pos] += gamma;
                    return false;
                }
            }
        }
    }

    /// Bordered KKT solve over the support; None when the pivot degenerates.
    fn solve_support(&self, x: &[f64], support: &[usize]) -> Option<Vec<f64>> {
        let k = support.len();
        let eps = self.eval_eps;
        let mut m = vec![vec![0.0f64; k + 1]; k + 1];
        let mut rhs = vec![0.0f64; k + 1];
        for (a, &ia) in support.iter().enumerate() {
            let ya = self.targets.row(ia);
            for (b, &ib) in support.iter().enumerate() {
                m[a][b] = eps * dot(ya, self.targets.row(ib));
            }
            m[a][k] = 1.0;
            m[k][a] = 1.0;
            rhs[a] = dot(ya, x) - self.psi[ia];
        }
        rhs[k] = 1.0;
        solve_dense(m, rhs)
    }

    /// Map evaluation at the fitted default accuracy.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval_with_tol(x, self.meta.map_tol)
    }

    /// Map evaluation with ‖result − T̄*(x)‖ ≤ map_tol: runs prox to the
    /// objective gap ε·map_tol²/2 that strong convexity translates into
    /// map-space accuracy, then applies the envelope gradient formula
    /// (x − z)/ε.
    pub fn eval_with_tol(&self, x: &[f64], map_tol: f64) -> Result<Vec<f64>> {
        let tol_g = self.eval_eps * map_tol * map_tol / 2.0;
        let p = self.prox(x, tol_g)?;
        Ok((0..self.d())
            .map(|k| (x[k] - p.z[k]) / self.eval_eps)
            .collect())
    }
}

/// First index attaining the maximum (deterministic tie-break).
fn argmax_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Envelope parameter that preserves interpolation. Sending source i exactly
/// to target i requires the prox at x⁰ᵢ to sit on vertex i, i.e.
/// sᵢⱼ ≥ ε·tᵢⱼ for all j, where sᵢⱼ = ⟨x⁰ᵢ, x¹ᵢ − x¹ⱼ⟩ − (ψᵢ − ψⱼ) ≥ 2ε₀
/// is the LP slack and tᵢⱼ = ⟨x¹ᵢ, x¹ᵢ − x¹ⱼ⟩. When every target has norm
/// ≤ 1, tᵢⱼ ≤ 2 makes ε = ε₀ safe (and this function returns eps0 exactly);
/// otherwise the parameter is capped at the binding ratio with a hair of
/// strictness. Smaller ε only narrows the smoothing width between pieces.
fn safe_envelope_eps(sources: &Dataset, targets: &Dataset, psi: &[f64], eps0: f64) -> f64 {
    let n = sources.n();
    let d = sources.d();
    let mut safe = f64::INFINITY;
    for i in 0..n {
        let xi = sources.row(i);
        let yi = targets.row(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let yj = targets.row(j);
            let diff: Vec<f64> = (0..d).map(|k| yi[k] - yj[k]).collect();
            let slack = dot(xi, &diff) - (psi[i] - psi[j]);
            let growth = dot(yi, &diff);
            if growth > 0.0 {
                safe = safe.min(slack / growth);
            }
        }
    }
    if safe.is_finite() {
        eps0.min((1.0 - 1e-9) * safe)
    } else {
        eps0
    }
}

/// Dense LU solve with partial pivoting for the small bordered systems.
/// Returns None when the best available pivot is negligible.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| {
            m[a][col]
                .abs()
                .partial_cmp(&m[b][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[row][c] -= f * m[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = rhs[col];
        for c in (col + 1)..n {
            v -= m[col][c] * rhs[c];
        }
        rhs[col] = v / m[col][col];
    }
    Some(rhs)
}
