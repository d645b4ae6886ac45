//! Convergence benchmark: fit maps on growing synthetic samples and measure
//! the error against the family's closed-form map on a fixed evaluation grid.
//!
//! Sampling is nested: each seed draws one source pool and one target pool of
//! the largest requested size, and a run at size n uses the first n rows of
//! both pools. Smaller samples are therefore subsets of larger ones and the
//! error trend across n is not confounded by resampling noise.

use crate::error::{CliError, Result};
use crate::synthetic::Family;
use otmap::{Dataset, Error as CoreError, FitOptions, FittedMap, TransportMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const BENCH_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct GridInfo {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub steps_per_axis: usize,
    pub points: usize,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct BenchCell {
    pub n: usize,
    pub seed: u64,
    pub degenerate: bool,
    pub sup_error: Option<f64>,
    pub mse: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct BenchSummary {
    pub n: usize,
    pub fits: usize,
    pub degenerate: usize,
    pub median_sup: Option<f64>,
    pub median_mse: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct BenchReport {
    pub format_version: u32,
    pub family: String,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub grid: GridInfo,
    pub cells: Vec<BenchCell>,
    pub summary: Vec<BenchSummary>,
    pub degenerate_total: usize,
}

/// Median of an unordered slice; even lengths average the two middle values.
fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Uniform lattice with `steps` points per axis over [lo, hi].
fn build_grid(lo: &[f64], hi: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let axis = |k: usize| -> Vec<f64> {
        if steps == 1 {
            vec![0.5 * (lo[k] + hi[k])]
        } else {
            (0..steps)
                .map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (steps - 1) as f64)
                .collect()
        }
    };
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for k in 0..d {
        let ticks = axis(k);
        points = points
            .into_iter()
            .flat_map(|p| {
                ticks.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    points
}

/// 5 percent inflated bounding box of the sample, clipped to the stated box.
fn grid_bounds(
    sample: &[Vec<f64>],
    stated_lo: &[f64],
    stated_hi: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = stated_lo.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in sample {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..d {
        let pad = 0.05 * (hi[k] - lo[k]).max(1e-12);
        lo[k] = (lo[k] - pad).max(stated_lo[k]);
        hi[k] = (hi[k] + pad).min(stated_hi[k]);
        if lo[k] >= hi[k] {
            return Err(CliError::Flag(format!(
                "grid axis {k} is empty: sample box and stated box do not overlap"
            )));
        }
    }
    Ok((lo, hi))
}

fn evaluate_cell(
    fitted: &FittedMap,
    truth: &dyn TransportMap,
    grid: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let mut sup = 0.0f64;
    let mut sq_sum = 0.0f64;
    for x in grid {
        let got = fitted.apply(x)?;
        let want = truth.apply(x)?;
        let sq: f64 = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        sup = sup.max(sq.sqrt());
        sq_sum += sq;
    }
    Ok((sup, sq_sum / grid.len() as f64))
}

fn summarize(n_list: &[usize], cells: &[BenchCell]) -> Vec<BenchSummary> {
    n_list
        .iter()
        .map(|&n| {
            let mut sups = Vec::new();
            let mut mses = Vec::new();
            let mut degenerate = 0;
            for c in cells.iter().filter(|c| c.n == n) {
                if c.degenerate {
                    degenerate += 1;
                } else {
                    sups.push(c.sup_error.unwrap());
                    mses.push(c.mse.unwrap());
                }
            }
            BenchSummary {
                n,
                fits: sups.len() + degenerate,
                degenerate,
                median_sup: median(&mut sups),
                median_mse: median(&mut mses),
            }
        })
        .collect()
}

/// Runs the benchmark. Degenerate fits are recorded per cell, excluded from
/// the medians, and counted in `degenerate_total`; any other fit error aborts
/// the run.
pub fn bench_convergence(
    family: &Family,
    family_label: &str,
    n_list: &[usize],
    seeds: &[u64],
    stated_lo: &[f64],
    stated_hi: &[f64],
    steps: usize,
    options: &FitOptions,
) -> Result<BenchReport> {
    let d = family.dim();
    if stated_lo.len() != d || stated_hi.len() != d {
        return Err(CliError::Flag(format!(
            "grid bounds have {} axes, family has {d}",
            stated_lo.len()
        )));
    }
    if n_list.is_empty() || seeds.is_empty() {
        return Err(CliError::Flag("need at least one n and one seed".to_string()));
    }
    if n_list.iter().any(|&n| n < 2) {
        return Err(CliError::Flag("sample sizes must be at least 2".to_string()));
    }
    let n_max = *n_list.iter().max().unwrap();

    // One source pool and one target pool per seed, sliced per n.
    let pools: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = seeds
        .iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let src = family.sample_source(n_max, &mut rng);
            let tgt = family.sample_target(n_max, &mut rng);
            (src, tgt)
        })
        .collect();

    let (lo, hi) = grid_bounds(&pools[0].0, stated_lo, stated_hi)?;
    let grid = build_grid(&lo, &hi, steps);
    let truth = family.closed_form_map()?;

    let mut jobs: Vec<(usize, u64, usize)> = Vec::new();
    for &n in n_list {
        for (si, &s) in seeds.iter().enumerate() {
            jobs.push((n, s, si));
        }
    }
    let cells: Vec<Result<BenchCell>> = jobs
        .par_iter()
        .map(|&(n, seed, si)| {
            let (src, tgt) = &pools[si];
            let opts = FitOptions {
                seed,
                ..options.clone()
            };
            let src_ds = Dataset::new(src[..n].to_vec())?;
            let tgt_ds = Dataset::new(tgt[..n].to_vec())?;
            match FittedMap::fit(&src_ds, &tgt_ds, &opts) {
                Ok(map) => {
                    let (sup, mse) = evaluate_cell(&map, &truth, &grid)?;
                    Ok(BenchCell {
                        n,
                        seed,
                        degenerate: false,
                        sup_error: Some(sup),
                        mse: Some(mse),
                    })
                }
                Err(CoreError::DegenerateSample { .. }) => Ok(BenchCell {
                    n,
                    seed,
                    degenerate: true,
                    sup_error: None,
                    mse: None,
                }),
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let cells: Vec<BenchCell> = cells.into_iter().collect::<Result<_>>()?;

    let summary = summarize(n_list, &cells);
    let degenerate_total = cells.iter().filter(|c| c.degenerate).count();
    Ok(BenchReport {
        format_version: BENCH_FORMAT_VERSION,
        family: family_label.to_string(),
        n_list: n_list.to_vec(),
        seeds: seeds.to_vec(),
        grid: GridInfo {
            lo,
            hi,
            steps_per_axis: steps,
            points: grid.len(),
        },
        cells,
        summary,
        degenerate_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::parse_family;

    #[test]
    fn grid_covers_the_box() {
        let g = build_grid(&[0.0, -1.0], &[1.0, 1.0], 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, -1.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        assert_eq!(build_grid(&[2.0], &[4.0], 1), vec![vec![3.0]]);
    }

    #[test]
    fn bounds_are_clipped_to_the_stated_box() {
        let sample = vec![vec![-5.0], vec![5.0]];
        let (lo, hi) = grid_bounds(&sample, &[-1.5], &[1.5]).unwrap();
        assert_eq!(lo, vec![-1.5]);
        assert_eq!(hi, vec![1.5]);
        // Tight sample inside a wide stated box keeps the inflated sample box.
        let sample = vec![vec![0.0], vec![1.0]];
        let (lo, hi) = grid_bounds(&sample, &[-100.0], &[100.0]).unwrap();
        assert!((lo[0] + 0.05).abs() < 1e-12 && (hi[0] - 1.05).abs() < 1e-12);
        assert!(grid_bounds(&sample, &[50.0], &[60.0]).is_err());
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn summaries_exclude_degenerate_cells() {
        let cells = vec![
            BenchCell { n: 10, seed: 1, degenerate: false, sup_error: Some(2.0), mse: Some(4.0) },
            BenchCell { n: 10, seed: 2, degenerate: true, sup_error: None, mse: None },
            BenchCell { n: 10, seed: 3, degenerate: false, sup_error: Some(1.0), mse: Some(1.0) },
        ];
        let s = summarize(&[10], &cells);
        assert_eq!(s[0].fits, 3);
        assert_eq!(s[0].degenerate, 1);
        assert_eq!(s[0].median_sup, Some(1.5));
    }

    #[test]
    fn small_translation_bench_runs_and_is_deterministic() {
        let fam = parse_family("translation:2").unwrap();
        let run = || {
            bench_convergence(
                &fam,
                "translation:2",
                &[10, 30],
                &[5, 6, 7],
                &[-1.0],
                &[1.0],
                5,
                &FitOptions::default(),
            )
            .unwrap()
        };
        let a = run();
        assert_eq!(a.cells.len(), 6);
        assert_eq!(a.summary.len(), 2);
        for cell in &a.cells {
            assert!(!cell.degenerate);
            assert!(cell.sup_error.unwrap().is_finite());
        }
        // The fitted translation is recovered well even at these tiny sizes.
        assert!(a.summary[1].median_sup.unwrap() < 1.5);
        let b = run();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let fam = parse_family("translation:1,1").unwrap();
        let err = bench_convergence(
            &fam,
            "translation:1,1",
            &[10],
            &[1],
            &[-1.0],
            &[1.0],
            3,
            &FitOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("axes"));
    }
}
