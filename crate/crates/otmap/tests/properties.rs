//! Property tests for the structural invariants: optimality and ordering of
//! the matching step, feasibility and scaling of the fitted potentials, and
//! the regularity guarantees of the evaluated map.

use itertools::Itertools;
use otmap::assignment::{build_cost_matrix, pair_samples, solve_assignment};
use otmap::potential::fit_potential;
use otmap::{Dataset, Error, FitOptions, FittedMap};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// n rows of d coordinates, each a multiple of 1/8 so that scaling tests stay
/// exact in floating point.
fn points(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec((-24i32..=24i32).prop_map(|k| k as f64 / 8.0), d),
        n,
    )
}

/// Distinct 1-d values; a BTreeSet guarantees distinctness, the shuffle
/// removes the sorted order.
fn distinct_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(-400i64..=400i64, n)
        .prop_map(|s| s.into_iter().map(|k| k as f64 / 16.0).collect::<Vec<_>>())
        .prop_shuffle()
}

fn brute_force_cost(ds0: &Dataset, ds1: &Dataset) -> f64 {
    let cost = build_cost_matrix(ds0, ds1).unwrap();
    let n = ds0.n();
    (0..n)
        .permutations(n)
        .map(|perm| (0..n).map(|i| cost.entry(i, perm[i])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn assignment_cost_matches_exhaustive_search(
        (src, tgt) in (1usize..=6, 1usize..=3).prop_flat_map(|(n, d)| (points(n, d), points(n, d)))
    ) {
        let ds0 = Dataset::new(src).unwrap();
        let ds1 = Dataset::new(tgt).unwrap();
        let solved = solve_assignment(&build_cost_matrix(&ds0, &ds1).unwrap());
        let best = brute_force_cost(&ds0, &ds1);
        let scale = 1.0 + best.abs();
        prop_assert!((solved.total_cost - best).abs() <= 1e-9 * scale);

        let mut seen = vec![false; ds0.n()];
        for &j in &solved.permutation {
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
    }

    #[test]
    fn one_dimensional_matching_preserves_order(
        (src, tgt) in (2usize..=8).prop_flat_map(|n| (distinct_values(n), distinct_values(n)))
    ) {
        let ds0 = Dataset::new(src.iter().map(|&v| vec![v]).collect()).unwrap();
        let ds1 = Dataset::new(tgt.iter().map(|&v| vec![v]).collect()).unwrap();
        let solved = solve_assignment(&build_cost_matrix(&ds0, &ds1).unwrap());
        // Rank k of the source must be matched to rank k of the target.
        let rank = |vals: &[f64]| {
            let mut order: Vec<usize> = (0..vals.len()).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            let mut r = vec![0usize; vals.len()];
            for (k, &i) in order.iter().enumerate() {
                r[i] = k;
            }
            r
        };
        let r0 = rank(&src);
        let r1 = rank(&tgt);
        for i in 0..src.len() {
            prop_assert_eq!(r0[i], r1[solved.permutation[i]]);
        }
    }

    #[test]
    fn matched_pairs_are_cyclically_monotone(
        (src, tgt) in (2usize..=7, 1usize..=3).prop_flat_map(|(n, d)| (points(n, d), points(n, d)))
    ) {
        let ds0 = Dataset::new(src).unwrap();
        let ds1 = Dataset::new(tgt).unwrap();
        let paired = pair_samples(&ds0, &ds1).unwrap();
        let x: Vec<&[f64]> = paired.source().rows().collect();
        let y: Vec<&[f64]> = paired.target().rows().collect();
        let n = x.len();
        let scale: f64 = 1.0 + x.iter().chain(&y).flat_map(|r| r.iter()).fold(0.0f64, |a, &v| a.max(v.abs()));
        // Two- and three-cycles of the cycle inequality.
        for i in 0..n {
            for j in 0..n {
                let diff: Vec<f64> = x[i].iter().zip(x[j]).map(|(a, b)| a - b).collect();
                let ydiff: Vec<f64> = y[i].iter().zip(y[j]).map(|(a, b)| a - b).collect();
                prop_assert!(dot(&diff, &ydiff) >= -1e-9 * scale * scale);
                for k in 0..n {
                    // sum <x_i, y_i - y_j> over the cycle i -> j -> k -> i.
                    let s = dot(x[i], &sub(y[i], y[j]))
                        + dot(x[j], &sub(y[j], y[k]))
                        + dot(x[k], &sub(y[k], y[i]));
                    prop_assert!(s >= -1e-9 * scale * scale);
                }
            }
        }
    }

    #[test]
    fn margin_scales_quadratically(
        (src, tgt) in (3usize..=6, 1usize..=2).prop_flat_map(|(n, d)| (points(n, d), points(n, d)))
    ) {
        let fit = |s: &[Vec<f64>], t: &[Vec<f64>]| {
            let ds0 = Dataset::new(s.to_vec()).unwrap();
            let ds1 = Dataset::new(t.to_vec()).unwrap();
            pair_samples(&ds0, &ds1).and_then(|p| fit_potential(&p))
        };
        let base = match fit(&src, &tgt) {
            Ok(sol) => sol,
            Err(Error::DegenerateSample { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let double = |rows: &[Vec<f64>]| {
            rows.iter()
                .map(|r| r.iter().map(|v| 2.0 * v).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        let scaled = fit(&double(&src), &double(&tgt)).unwrap();
        // Doubling every coordinate multiplies all costs, and hence the
        // margin, by exactly four; powers of two keep the floats exact. The
        // only wiggle room is the absolute feasibility backoff, which may
        // fire up to four times per fit and is not homogeneous in scale.
        let slack = 2e-11 * (1.0 + scaled.eps0.abs());
        prop_assert!(
            (scaled.eps0 - 4.0 * base.eps0).abs() <= slack,
            "{} vs {}", scaled.eps0, 4.0 * base.eps0
        );
    }

    #[test]
    fn fitted_potentials_are_feasible(
        (src, tgt) in (2usize..=8, 1usize..=3).prop_flat_map(|(n, d)| (points(n, d), points(n, d)))
    ) {
        let ds0 = Dataset::new(src).unwrap();
        let ds1 = Dataset::new(tgt).unwrap();
        let paired = match pair_samples(&ds0, &ds1) {
            Ok(p) => p,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let sol = match fit_potential(&paired) {
            Ok(sol) => sol,
            Err(Error::DegenerateSample { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(sol.psi[0], 0.0);
        prop_assert!(sol.eps0 > 0.0);
        let graph = otmap::potential::build_cost_graph(&paired).unwrap();
        prop_assert!(sol.min_slack(&graph) >= -graph.feas_tol());
    }

    #[test]
    fn map_queries_are_monotone_lipschitz_and_in_the_hull(
        (src, tgt, queries) in (3usize..=6, 1usize..=2).prop_flat_map(|(n, d)| {
            (points(n, d), points(n, d), points(4, d))
        })
    ) {
        let ds0 = Dataset::new(src).unwrap();
        let ds1 = Dataset::new(tgt).unwrap();
        let map = match FittedMap::fit(&ds0, &ds1, &FitOptions::default()) {
            Ok(m) => m,
            Err(Error::DegenerateSample { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let map_tol = 1e-6;
        let lip = 1.0 / map.eval_eps();
        let images: Vec<Vec<f64>> = queries
            .iter()
            .map(|q| map.eval(q).unwrap())
            .collect();
        for (q, img) in queries.iter().zip(&images) {
            // Image lies in the convex hull of the targets: within the
            // per-coordinate bounding box at least.
            for k in 0..map.d() {
                let lo = map.targets().rows().map(|r| r[k]).fold(f64::INFINITY, f64::min);
                let hi = map.targets().rows().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(img[k] >= lo - 1e-8 && img[k] <= hi + 1e-8);
            }
            let _ = q;
        }
        for i in 0..queries.len() {
            for j in (i + 1)..queries.len() {
                let dx = sub(&queries[i], &queries[j]);
                let dt = sub(&images[i], &images[j]);
                let nx = dot(&dx, &dx).sqrt();
                let nt = dot(&dt, &dt).sqrt();
                prop_assert!(dot(&dt, &dx) >= -2.0 * map_tol * nx);
                prop_assert!(nt <= lip * nx + 2.0 * map_tol);
            }
        }
    }

    #[test]
    fn prox_certificates_are_simplex_weights(
        (src, tgt, queries) in (3usize..=6, 1usize..=2).prop_flat_map(|(n, d)| {
            (points(n, d), points(n, d), points(3, d))
        })
    ) {
        let ds0 = Dataset::new(src).unwrap();
        let ds1 = Dataset::new(tgt).unwrap();
        let map = match FittedMap::fit(&ds0, &ds1, &FitOptions::default()) {
            Ok(m) => m,
            Err(Error::DegenerateSample { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let eps = map.eval_eps();
        for q in &queries {
            let p = map.prox(q, 1e-14).unwrap();
            let sum: f64 = p.weights.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(p.weights.iter().all(|&w| w >= -1e-12));
            prop_assert!(p.gap_bound >= 0.0);
            // z reconstructs as x - eps * sum of weighted targets.
            for k in 0..map.d() {
                let s: f64 = map
                    .targets()
                    .rows()
                    .zip(&p.weights)
                    .map(|(y, &w)| w * y[k])
                    .sum();
                prop_assert!((p.z[k] - (q[k] - eps * s)).abs() <= 1e-8 * (1.0 + q[k].abs()));
            }
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
