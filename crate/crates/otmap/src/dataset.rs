//! Shared domain types: validated point clouds, group-labelled samples, and
//! matched source/target pairs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// An ordered list of `n` points in `d`-dimensional feature space.
///
/// Construction validates shape and finiteness; rows keep their input order
/// and values are never mutated afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    d: usize,
}

impl Dataset {
    /// Validates raw rows: nonempty, rectangular, every coordinate finite.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::RaggedRow {
                row: 0,
                expected: 1,
                got: 0,
            });
        }
        for (row, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::RaggedRow {
                    row,
                    expected: d,
                    got: p.len(),
                });
            }
            for (col, &v) in p.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Dataset { points, d })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.as_slice())
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    /// New dataset with the given rows of `self`, in the order given.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            d: self.d,
        }
    }
}

/// Equal-size alignment of two groups: the larger one is subsampled uniformly
/// without replacement (seeded, hence reproducible); kept rows preserve their
/// relative input order. Equal sizes pass through unchanged.
pub fn align_groups(ds0: &Dataset, ds1: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    if ds0.d() != ds1.d() {
        return Err(Error::DimensionMismatch {
            left: ds0.d(),
            right: ds1.d(),
        });
    }
    let (n0, n1) = (ds0.n(), ds1.n());
    if n0 == n1 {
        return Ok((ds0.clone(), ds1.clone()));
    }
    let keep = n0.min(n1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subsample = |ds: &Dataset, rng: &mut ChaCha8Rng| {
        let mut idx = rand::seq::index::sample(rng, ds.n(), keep).into_vec();
        idx.sort_unstable();
        ds.select(&idx)
    };
    if n0 > n1 {
        Ok((subsample(ds0, &mut rng), ds1.clone()))
    } else {
        Ok((ds0.clone(), subsample(ds1, &mut rng)))
    }
}

/// Features plus a binary sensitive attribute per row.
#[derive(Debug, Clone)]
pub struct GroupedDataset {
    features: Dataset,
    sensitive: Vec<u8>,
}

impl GroupedDataset {
    pub fn new(features: Dataset, sensitive: Vec<u8>) -> Result<Self> {
        if sensitive.len() != features.n() {
            return Err(Error::LabelCountMismatch {
                labels: sensitive.len(),
                rows: features.n(),
            });
        }
        if let Some(&bad) = sensitive.iter().find(|&&s| s > 1) {
            return Err(Error::InvalidLabel { found: bad });
        }
        Ok(GroupedDataset {
            features,
            sensitive,
        })
    }

    pub fn features(&self) -> &Dataset {
        &self.features
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    /// Row indices belonging to the given group, in input order.
    pub fn group_indices(&self, label: u8) -> Vec<usize> {
        self.sensitive
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// The rows of one group as a dataset. Errors if the group is empty.
    pub fn group(&self, label: u8) -> Result<Dataset> {
        let idx = self.group_indices(label);
        if idx.is_empty() {
            return Err(Error::SingleGroup { only: 1 - label });
        }
        Ok(self.features.select(&idx))
    }

    /// Fitting between groups needs both labels present.
    pub fn require_both_groups(&self) -> Result<()> {
        let has0 = self.sensitive.contains(&0);
        let has1 = self.sensitive.contains(&1);
        match (has0, has1) {
            (true, true) => Ok(()),
            (true, false) => Err(Error::SingleGroup { only: 0 }),
            _ => Err(Error::SingleGroup { only: 1 }),
        }
    }
}

/// Source/target samples reordered so row `i` of `source` is matched to row
/// `i` of `target` by the minimum-cost bijection; `cost` is that minimum.
///
/// The stored pairing is cyclically monotone: for any cycle of indices, the
/// cycle inequality on inner products holds (up to float noise).
#[derive(Debug, Clone)]
pub struct PairedSamples {
    source: Dataset,
    target: Dataset,
    cost: f64,
}

impl PairedSamples {
    /// Pairs rows positionally (row i of `source` with row i of `target`) and
    /// records their total squared-distance cost. Does not verify that the
    /// positional pairing is optimal; `assignment::pair_samples` is the
    /// constructor that does.
    pub fn from_aligned(source: Dataset, target: Dataset) -> Result<Self> {
        if source.d() != target.d() {
            return Err(Error::DimensionMismatch {
                left: source.d(),
                right: target.d(),
            });
        }
        if source.n() != target.n() {
            return Err(Error::SizeMismatch {
                left: source.n(),
                right: target.n(),
            });
        }
        let cost = source
            .rows()
            .zip(target.rows())
            .map(|(a, b)| squared_distance(a, b))
            .sum();
        Ok(PairedSamples {
            source,
            target,
            cost,
        })
    }

    pub fn source(&self) -> &Dataset {
        &self.source
    }

    pub fn target(&self) -> &Dataset {
        &self.target
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn n(&self) -> usize {
        self.source.n()
    }

    pub fn d(&self) -> usize {
        self.source.d()
    }

    pub fn into_parts(self) -> (Dataset, Dataset, f64) {
        (self.source, self.target, self.cost)
    }
}

/// Sum of squared coordinate differences, accumulated left to right.
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
