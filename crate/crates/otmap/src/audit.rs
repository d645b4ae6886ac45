//! Counterfactual fairness auditing and repair on top of a transport map.
//!
//! The audited sample is the protected group (label 0); the map sends it
//! onto the other group's distribution. A point flips when the classifier
//! treats it differently from its counterfactual: F⁻ collects points denied
//! as themselves but accepted as their counterpart, F⁺ the reverse. The
//! report aggregates where those points sit (mean difference and mean sign
//! vectors), compares them against the same statistics over the whole sample
//! (reference vectors), and adds disparate impact, the statistical-parity
//! gap, and degeneracy diagnostics for the sign statistics.

use crate::dataset::{Dataset, GroupedDataset};
use crate::error::{Error, Result};
use crate::map::TransportMap;
use serde::Serialize;

/// Decision rule under audit: either a per-group linear rule evaluated
/// in-process, or externally produced 0/1 predictions for the audited
/// points and their counterfactuals (black-box protocol).
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Linear {
        /// Weight vectors for group 0 and group 1: h(x, s) = 1 iff
        /// ⟨weights[s], x⟩ + biases[s] > 0.
        weights: [Vec<f64>; 2],
        biases: [f64; 2],
    },
    External {
        /// h(xᵢ, 0) over the audited rows.
        original: Vec<u8>,
        /// h(T̄(xᵢ), 1) over the counterfactual rows.
        counterfactual: Vec<u8>,
    },
}

impl ClassifierSpec {
    /// Per-group linear rule.
    pub fn linear(w0: Vec<f64>, b0: f64, w1: Vec<f64>, b1: f64) -> Self {
        ClassifierSpec::Linear {
            weights: [w0, w1],
            biases: [b0, b1],
        }
    }

    /// The same linear rule for both groups.
    pub fn linear_shared(w: Vec<f64>, b: f64) -> Self {
        ClassifierSpec::linear(w.clone(), b, w, b)
    }

    /// Externally supplied predictions; every label must be 0 or 1.
    pub fn external(original: Vec<u8>, counterfactual: Vec<u8>) -> Result<Self> {
        for &v in original.iter().chain(&counterfactual) {
            if v > 1 {
                return Err(Error::InvalidPrediction { found: v });
            }
        }
        Ok(ClassifierSpec::External {
            original,
            counterfactual,
        })
    }

    /// Linear decision for a single point in group s. None in external mode.
    pub fn decide(&self, x: &[f64], s: u8) -> Option<u8> {
        match self {
            ClassifierSpec::Linear { weights, biases } => {
                let s = usize::from(s);
                let score: f64 = weights[s].iter().zip(x).map(|(w, v)| w * v).sum();
                Some(u8::from(score + biases[s] > 0.0))
            }
            ClassifierSpec::External { .. } => None,
        }
    }

    fn linear_predictions(&self, ds: &Dataset, s: u8) -> Result<Vec<u8>> {
        match self {
            ClassifierSpec::Linear { weights, .. } => {
                if weights[usize::from(s)].len() != ds.d() {
                    return Err(Error::ClassifierDim {
                        expected: ds.d(),
                        got: weights[usize::from(s)].len(),
                    });
                }
                Ok(ds.rows().map(|x| self.decide(x, s).unwrap()).collect())
            }
            ClassifierSpec::External { .. } => unreachable!("external mode handled by caller"),
        }
    }

    fn predictions_on_originals(&self, ds0: &Dataset) -> Result<Vec<u8>> {
        match self {
            ClassifierSpec::Linear { .. } => self.linear_predictions(ds0, 0),
            ClassifierSpec::External { original, .. } => {
                if original.len() != ds0.n() {
                    return Err(Error::PredictionLength {
                        expected: ds0.n(),
                        got: original.len(),
                    });
                }
                Ok(original.clone())
            }
        }
    }

    fn predictions_on_counterfactuals(&self, cf: &Dataset) -> Result<Vec<u8>> {
        match self {
            ClassifierSpec::Linear { .. } => self.linear_predictions(cf, 1),
            ClassifierSpec::External { counterfactual, .. } => {
                if counterfactual.len() != cf.n() {
                    return Err(Error::PredictionLength {
                        expected: cf.n(),
                        got: counterfactual.len(),
                    });
                }
                Ok(counterfactual.clone())
            }
        }
    }
}

/// Audited rows split by how the classifier treats them versus their
/// counterfactuals, together with the counterfactual points and the two
/// prediction vectors that define the split.
#[derive(Debug, Clone)]
pub struct FlipSetPartition {
    /// h(xᵢ, 0) = 0 and h(T̄(xᵢ), 1) = 1.
    pub negative: Vec<usize>,
    /// h(xᵢ, 0) = 1 and h(T̄(xᵢ), 1) = 0.
    pub positive: Vec<usize>,
    pub unflipped: Vec<usize>,
    pub counterfactuals: Dataset,
    pub pred_original: Vec<u8>,
    pub pred_counterfactual: Vec<u8>,
}

impl FlipSetPartition {
    pub fn m(&self) -> usize {
        self.pred_original.len()
    }
}

/// Transports the audited sample and partitions it into the two flip sets
/// and the unflipped remainder.
pub fn flip_sets<M: TransportMap + ?Sized>(
    map: &M,
    clf: &ClassifierSpec,
    ds0: &Dataset,
) -> Result<FlipSetPartition> {
    let counterfactuals = map.transform(ds0)?;
    let pred_original = clf.predictions_on_originals(ds0)?;
    let pred_counterfactual = clf.predictions_on_counterfactuals(&counterfactuals)?;
    let mut negative = Vec::new();
    let mut positive = Vec::new();
    let mut unflipped = Vec::new();
    for (i, (&h0, &h1)) in pred_original.iter().zip(&pred_counterfactual).enumerate() {
        match (h0, h1) {
            (0, 1) => negative.push(i),
            (1, 0) => positive.push(i),
            _ => unflipped.push(i),
        }
    }
    Ok(FlipSetPartition {
        negative,
        positive,
        unflipped,
        counterfactuals,
        pred_original,
        pred_counterfactual,
    })
}

/// Mean difference and mean sign vectors over the two flip sets. An empty
/// flip set leaves its vectors `None`: the statistics are undefined there,
/// never silently zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransparencyReport {
    pub diff_negative: Option<Vec<f64>>,
    pub sign_negative: Option<Vec<f64>>,
    pub diff_positive: Option<Vec<f64>>,
    pub sign_positive: Option<Vec<f64>>,
}

/// Coordinate sign with a dead zone: 0 when |t| < sign_tol.
fn soft_sign(t: f64, sign_tol: f64) -> f64 {
    if t.abs() < sign_tol {
        0.0
    } else if t > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Means of x − T̄(x) and of its coordinate signs over the given rows.
fn displacement_means(
    ds0: &Dataset,
    counterfactuals: &Dataset,
    rows: &[usize],
    sign_tol: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    if rows.is_empty() {
        return None;
    }
    let d = ds0.d();
    let mut diff = vec![0.0f64; d];
    let mut sign = vec![0.0f64; d];
    for &i in rows {
        let x = ds0.row(i);
        let t = counterfactuals.row(i);
        for k in 0..d {
            let delta = x[k] - t[k];
            diff[k] += delta;
            sign[k] += soft_sign(delta, sign_tol);
        }
    }
    let m = rows.len() as f64;
    for k in 0..d {
        diff[k] /= m;
        sign[k] /= m;
    }
    Some((diff, sign))
}

/// Where the flipped points sit: mean of x − T̄(x) and of its coordinate
/// signs over each flip set.
pub fn transparency_report(
    partition: &FlipSetPartition,
    ds0: &Dataset,
    sign_tol: f64,
) -> TransparencyReport {
    let neg = displacement_means(ds0, &partition.counterfactuals, &partition.negative, sign_tol);
    let pos = displacement_means(ds0, &partition.counterfactuals, &partition.positive, sign_tol);
    let (diff_negative, sign_negative) = neg.map_or((None, None), |(d, s)| (Some(d), Some(s)));
    let (diff_positive, sign_positive) = pos.map_or((None, None), |(d, s)| (Some(d), Some(s)));
    TransparencyReport {
        diff_negative,
        sign_negative,
        diff_positive,
        sign_positive,
    }
}

/// The same displacement statistics over the whole audited sample; the
/// yardstick the flip-set vectors are compared against.
pub fn reference_vectors<M: TransportMap + ?Sized>(
    map: &M,
    ds0: &Dataset,
    sign_tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let counterfactuals = map.transform(ds0)?;
    let rows: Vec<usize> = (0..ds0.n()).collect();
    Ok(displacement_means(ds0, &counterfactuals, &rows, sign_tol).expect("nonempty dataset"))
}

/// Ratio of the smaller favorable rate to the larger one, in [0, 1].
/// Both rates zero counts as parity (1.0) by convention.
pub fn disparate_impact(pred0: &[u8], pred1: &[u8]) -> Result<f64> {
    if pred0.is_empty() || pred1.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rate = |p: &[u8]| p.iter().filter(|&&v| v == 1).count() as f64 / p.len() as f64;
    let (r0, r1) = (rate(pred0), rate(pred1));
    if r0 == 0.0 && r1 == 0.0 {
        return Ok(1.0);
    }
    Ok(r0.min(r1) / r0.max(r1))
}

/// Statistical-parity gap two ways: lhs from the favorable rates (group 1
/// estimated on the counterfactual predictions), rhs from the flip masses,
/// lhs = P̂(h=1|orig) − P̂(h=1|counterfactual) and rhs = |F⁺|/m − |F⁻|/m.
/// Both sides reduce to the same integer count difference over m, so with
/// shared predictions they are equal exactly, not just approximately.
pub fn parity_gap_identity_check(
    partition: &FlipSetPartition,
    pred0: &[u8],
    pred1: &[u8],
) -> (f64, f64) {
    let m = pred0.len() as f64;
    let favorable = |p: &[u8]| p.iter().filter(|&&v| v == 1).count() as isize;
    let lhs = (favorable(pred0) - favorable(pred1)) as f64 / m;
    let rhs = (partition.positive.len() as isize - partition.negative.len() as isize) as f64
        / partition.m() as f64;
    (lhs, rhs)
}

/// Default barycenter weight: the empirical share of group 0.
pub fn default_repair_weight(data: &GroupedDataset) -> f64 {
    data.group_indices(0).len() as f64 / data.n() as f64
}

/// Barycentric repair: every row is moved toward the weighted midpoint
/// between itself and its counterfactual in the other group,
/// w0·x + w1·T̄₀₁(x) for group-0 rows and w1·x + w0·T̄₁₀(x) for group-1
/// rows. Row order is preserved. w0 ∈ {0, 1} leaves one group untouched.
pub fn repair<A, B>(map01: &A, map10: &B, data: &GroupedDataset, w0: f64) -> Result<Dataset>
where
    A: TransportMap + ?Sized,
    B: TransportMap + ?Sized,
{
    if !(0.0..=1.0).contains(&w0) {
        return Err(Error::WeightRange { w0 });
    }
    for dim in [map01.dim(), map10.dim()] {
        if dim != data.d() {
            return Err(Error::DimensionMismatch {
                left: data.d(),
                right: dim,
            });
        }
    }
    let w1 = 1.0 - w0;
    let mut rows = Vec::with_capacity(data.n());
    let mut failed = Vec::new();
    for (i, (x, &s)) in data.features().rows().zip(data.sensitive()).enumerate() {
        let mapped = if s == 0 {
            map01.apply(x).map(|t| blend(w0, x, w1, &t))
        } else {
            map10.apply(x).map(|t| blend(w1, x, w0, &t))
        };
        match mapped {
            Ok(row) => rows.push(row),
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

fn blend(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(&xv, &yv)| a * xv + b * yv).collect()
}

/// Fraction of audited points, per coordinate, whose displacement
/// x − T̄(x) is smaller than sign_tol in absolute value. Coordinates where
/// this mass is non-negligible make the mean-sign statistics unreliable.
pub fn sign_degeneracy_check<M: TransportMap + ?Sized>(
    map: &M,
    ds0: &Dataset,
    sign_tol: f64,
) -> Result<Vec<f64>> {
    let counterfactuals = map.transform(ds0)?;
    let d = ds0.d();
    let mut fractions = vec![0.0f64; d];
    for (x, t) in ds0.rows().zip(counterfactuals.rows()) {
        for k in 0..d {
            if (x[k] - t[k]).abs() < sign_tol {
                fractions[k] += 1.0;
            }
        }
    }
    for f in fractions.iter_mut() {
        *f /= ds0.n() as f64;
    }
    Ok(fractions)
}

/// Knobs for [`audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    /// Dead zone for coordinate signs and the degeneracy diagnostic.
    pub sign_tol: f64,
    /// A defined deviation vector whose coordinates all stay within this
    /// bound is flagged as carrying no insight beyond the map itself.
    pub no_insight_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            sign_tol: 1e-9,
            no_insight_tol: 0.1,
        }
    }
}

/// Fraction above which a degenerate-sign coordinate triggers a warning.
const DEGENERACY_WARN_FRACTION: f64 = 0.05;

/// Full audit output. Vectors over flip sets are `None` when the set is
/// empty (the statistic is undefined there).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    /// Audited (group-0) sample size.
    pub m: usize,
    pub flip_mass_negative: f64,
    pub flip_mass_positive: f64,
    pub delta_diff_negative: Option<Vec<f64>>,
    pub delta_sign_negative: Option<Vec<f64>>,
    pub delta_diff_positive: Option<Vec<f64>>,
    pub delta_sign_positive: Option<Vec<f64>>,
    pub ref_diff: Vec<f64>,
    pub ref_sign: Vec<f64>,
    pub deviation_diff_negative: Option<Vec<f64>>,
    pub deviation_sign_negative: Option<Vec<f64>>,
    pub deviation_diff_positive: Option<Vec<f64>>,
    pub deviation_sign_positive: Option<Vec<f64>>,
    /// min rate / max rate using the pushforward group-1 estimate.
    pub di: f64,
    /// P̂(h=1|S=0) − P̂(h=1|S=1), group 1 estimated on counterfactuals.
    pub parity_gap: f64,
    /// Same two statistics with group 1 evaluated on its own rows
    /// (only available with the built-in linear classifier).
    pub di_independent: Option<f64>,
    pub parity_gap_independent: Option<f64>,
    /// Per-coordinate fraction of near-zero displacements.
    pub degeneracy: Vec<f64>,
    pub warnings: Vec<String>,
}

fn subtract(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Runs the full procedure on the group-0 rows of `data`: flip sets and
/// masses, transparency and reference vectors, their deviations, disparate
/// impact, parity gap, and degeneracy diagnostics. Deterministic given its
/// inputs.
pub fn audit<M: TransportMap + ?Sized>(
    map: &M,
    clf: &ClassifierSpec,
    data: &GroupedDataset,
    options: &AuditOptions,
) -> Result<AuditReport> {
    let ds0 = data.group(0)?;
    let partition = flip_sets(map, clf, &ds0)?;
    let m = partition.m();
    let report = transparency_report(&partition, &ds0, options.sign_tol);
    let rows: Vec<usize> = (0..ds0.n()).collect();
    let (ref_diff, ref_sign) =
        displacement_means(&ds0, &partition.counterfactuals, &rows, options.sign_tol)
            .expect("group 0 is nonempty");

    let deviation_diff_negative = report.diff_negative.as_ref().map(|v| subtract(v, &ref_diff));
    let deviation_sign_negative = report.sign_negative.as_ref().map(|v| subtract(v, &ref_sign));
    let deviation_diff_positive = report.diff_positive.as_ref().map(|v| subtract(v, &ref_diff));
    let deviation_sign_positive = report.sign_positive.as_ref().map(|v| subtract(v, &ref_sign));

    let di = disparate_impact(&partition.pred_original, &partition.pred_counterfactual)?;
    let (parity_gap, rhs) = parity_gap_identity_check(
        &partition,
        &partition.pred_original,
        &partition.pred_counterfactual,
    );
    debug_assert_eq!(parity_gap, rhs, "parity identity must be exact");

    let (di_independent, parity_gap_independent) = match clf {
        ClassifierSpec::Linear { .. } if !data.group_indices(1).is_empty() => {
            let ds1 = data.group(1)?;
            let pred1 = clf.linear_predictions(&ds1, 1)?;
            let rate = |p: &[u8]| p.iter().filter(|&&v| v == 1).count() as f64 / p.len() as f64;
            (
                Some(disparate_impact(&partition.pred_original, &pred1)?),
                Some(rate(&partition.pred_original) - rate(&pred1)),
            )
        }
        _ => (None, None),
    };

    let degeneracy = {
        let d = ds0.d();
        let mut fractions = vec![0.0f64; d];
        for (x, t) in ds0.rows().zip(partition.counterfactuals.rows()) {
            for k in 0..d {
                if (x[k] - t[k]).abs() < options.sign_tol {
                    fractions[k] += 1.0;
                }
            }
        }
        fractions.iter().map(|f| f / m as f64).collect::<Vec<f64>>()
    };

    let mut warnings = Vec::new();
    for (k, &f) in degeneracy.iter().enumerate() {
        if f > DEGENERACY_WARN_FRACTION {
            warnings.push(format!(
                "coordinate {k}: {:.1}% of audited points move by less than {:.0e}; \
                 mean-sign statistics are unreliable there",
                100.0 * f,
                options.sign_tol
            ));
        }
    }
    for (star, dev) in [
        ("negative", &deviation_diff_negative),
        ("positive", &deviation_diff_positive),
    ] {
        if let Some(v) = dev {
            if v.iter().all(|c| c.abs() <= options.no_insight_tol) {
                warnings.push(format!(
                    "{star} flip set moves like the sample average (deviation within \
                     {:.0e}): no insight on the decision rule beyond the map itself",
                    options.no_insight_tol
                ));
            }
        }
    }

    Ok(AuditReport {
        m,
        flip_mass_negative: partition.negative.len() as f64 / m as f64,
        flip_mass_positive: partition.positive.len() as f64 / m as f64,
        delta_diff_negative: report.diff_negative,
        delta_sign_negative: report.sign_negative,
        delta_diff_positive: report.diff_positive,
        delta_sign_positive: report.sign_positive,
        ref_diff,
        ref_sign,
        deviation_diff_negative,
        deviation_sign_negative,
        deviation_diff_positive,
        deviation_sign_positive,
        di,
        parity_gap,
        di_independent,
        parity_gap_independent,
        degeneracy,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// x ↦ x + delta.
    struct Translation {
        delta: Vec<f64>,
    }

    impl TransportMap for Translation {
        fn dim(&self) -> usize {
            self.delta.len()
        }
        fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.iter().zip(&self.delta).map(|(a, b)| a + b).collect())
        }
    }

    /// x ↦ 0, so the displacement x − T(x) equals x itself.
    struct Collapse {
        d: usize,
    }

    impl TransportMap for Collapse {
        fn dim(&self) -> usize {
            self.d
        }
        fn apply(&self, _x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0; self.d])
        }
    }

    /// x ↦ x.
    struct Identity {
        d: usize,
    }

    impl TransportMap for Identity {
        fn dim(&self) -> usize {
            self.d
        }
        fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.to_vec())
        }
    }

    fn ds(rows: &[&[f64]]) -> Dataset {
        Dataset::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn second_coordinate_rule() -> ClassifierSpec {
        ClassifierSpec::linear_shared(vec![0.0, 1.0], 0.0)
    }

    fn example_shift() -> Translation {
        Translation {
            delta: vec![4.0, 2.0],
        }
    }

    #[test]
    fn flip_sets_on_known_points() {
        let ds0 = ds(&[&[0.0, -1.0], &[0.0, -3.0], &[0.0, 1.0]]);
        let p = flip_sets(&example_shift(), &second_coordinate_rule(), &ds0).unwrap();
        assert_eq!(p.negative, vec![0]); // (0,-1): denied, counterpart (4,1) accepted
        assert!(p.positive.is_empty());
        assert_eq!(p.unflipped, vec![1, 2]);
        assert_eq!(p.pred_original, vec![0, 0, 1]);
        assert_eq!(p.pred_counterfactual, vec![1, 0, 1]);
    }

    #[test]
    fn constant_classifier_never_flips() {
        let ds0 = ds(&[&[0.0, -1.0], &[0.0, 1.0]]);
        let always_yes = ClassifierSpec::linear_shared(vec![0.0, 0.0], 1.0);
        let p = flip_sets(&example_shift(), &always_yes, &ds0).unwrap();
        assert!(p.negative.is_empty() && p.positive.is_empty());
        assert_eq!(p.unflipped.len(), 2);
    }

    #[test]
    fn external_mode_checks_lengths_and_labels() {
        let ds0 = ds(&[&[0.0], &[1.0]]);
        assert!(matches!(
            ClassifierSpec::external(vec![0, 2], vec![0, 1]),
            Err(Error::InvalidPrediction { found: 2 })
        ));
        let clf = ClassifierSpec::external(vec![0], vec![0]).unwrap();
        assert!(matches!(
            flip_sets(&Identity { d: 1 }, &clf, &ds0),
            Err(Error::PredictionLength { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn single_flip_transparency_vectors() {
        let ds0 = ds(&[&[0.0, -1.0], &[0.0, -3.0], &[0.0, 1.0]]);
        let p = flip_sets(&example_shift(), &second_coordinate_rule(), &ds0).unwrap();
        let r = transparency_report(&p, &ds0, 1e-9);
        assert_eq!(r.diff_negative, Some(vec![-4.0, -2.0]));
        assert_eq!(r.sign_negative, Some(vec![-1.0, -1.0]));
        assert_eq!(r.diff_positive, None);
        assert_eq!(r.sign_positive, None);
    }

    #[test]
    fn reference_vector_averages() {
        let ds0 = ds(&[&[1.0, 0.0], &[3.0, 0.0]]);
        let (diff, sign) = reference_vectors(&Collapse { d: 2 }, &ds0, 1e-9).unwrap();
        assert_eq!(diff, vec![2.0, 0.0]);
        assert_eq!(sign, vec![1.0, 0.0]);
    }

    #[test]
    fn disparate_impact_conventions() {
        assert_eq!(disparate_impact(&[1, 0, 1, 0], &[0, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(disparate_impact(&[1, 0, 0, 0], &[1, 1, 0, 0]).unwrap(), 0.5);
        assert_eq!(disparate_impact(&[0, 0], &[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(disparate_impact(&[1, 1], &[0, 0]).unwrap(), 0.0);
        assert!(disparate_impact(&[], &[1]).is_err());
    }

    #[test]
    fn parity_identity_is_exact_on_shared_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let m = 1 + rng.gen_range(0..40);
            let points = Dataset::new((0..m).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect())
                .unwrap();
            let orig: Vec<u8> = (0..m).map(|_| rng.gen_range(0..2) as u8).collect();
            let cf: Vec<u8> = (0..m).map(|_| rng.gen_range(0..2) as u8).collect();
            let clf = ClassifierSpec::external(orig.clone(), cf.clone()).unwrap();
            let p = flip_sets(&Identity { d: 1 }, &clf, &points).unwrap();
            let (lhs, rhs) = parity_gap_identity_check(&p, &orig, &cf);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn repair_endpoints_and_midpoint() {
        let features = ds(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let data = GroupedDataset::new(features, vec![0, 0, 1, 1]).unwrap();
        let t01 = Translation { delta: vec![2.0] };
        let t10 = Translation { delta: vec![-2.0] };

        let keep0 = repair(&t01, &t10, &data, 1.0).unwrap();
        let got: Vec<f64> = keep0.rows().map(|r| r[0]).collect();
        assert_eq!(got, vec![0.0, 1.0, 0.0, 1.0]); // group 1 fully pulled over

        let keep1 = repair(&t01, &t10, &data, 0.0).unwrap();
        let got: Vec<f64> = keep1.rows().map(|r| r[0]).collect();
        assert_eq!(got, vec![2.0, 3.0, 2.0, 3.0]); // group 0 fully pushed over

        let mid = repair(&t01, &t10, &data, 0.5).unwrap();
        let got: Vec<f64> = mid.rows().map(|r| r[0]).collect();
        assert_eq!(got, vec![1.0, 2.0, 1.0, 2.0]);

        assert!(matches!(
            repair(&t01, &t10, &data, 1.5),
            Err(Error::WeightRange { .. })
        ));
        assert_eq!(default_repair_weight(&data), 0.5);
    }

    #[test]
    fn repair_midpoint_with_fitted_maps() {
        use crate::map::{FitOptions, FittedMap};
        let g0 = ds(&[&[0.0], &[1.0]]);
        let g1 = ds(&[&[2.0], &[3.0]]);
        let t01 = FittedMap::fit(&g0, &g1, &FitOptions::default()).unwrap();
        let t10 = FittedMap::fit(&g1, &g0, &FitOptions::default()).unwrap();
        let features = ds(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let data = GroupedDataset::new(features, vec![0, 0, 1, 1]).unwrap();
        let mid = repair(&t01, &t10, &data, 0.5).unwrap();
        let got: Vec<f64> = mid.rows().map(|r| r[0]).collect();
        for (g, want) in got.iter().zip([1.0, 2.0, 1.0, 2.0]) {
            assert!((g - want).abs() <= 1e-9, "{got:?}");
        }
    }

    #[test]
    fn degeneracy_fractions() {
        let ds0 = ds(&[&[0.5, -1.0], &[1.5, 1.0]]);
        let all_still = sign_degeneracy_check(&Identity { d: 2 }, &ds0, 1e-9).unwrap();
        assert_eq!(all_still, vec![1.0, 1.0]);
        let all_moving = sign_degeneracy_check(&example_shift(), &ds0, 1e-9).unwrap();
        assert_eq!(all_moving, vec![0.0, 0.0]);
        // Zero tolerance counts exact zeros only.
        let exact = sign_degeneracy_check(&Identity { d: 2 }, &ds0, 0.0).unwrap();
        assert_eq!(exact, vec![0.0, 0.0]);
    }

    #[test]
    fn full_audit_on_translated_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let n0 = Normal::new(-2.0f64, 1.0).unwrap();
        let n1 = Normal::new(-1.0f64, 1.0).unwrap();
        let m = 600;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..m {
            points.push(vec![n0.sample(&mut rng), n1.sample(&mut rng)]);
            labels.push(0u8);
        }
        // A token group-1 block so the independent estimates exist.
        for _ in 0..m {
            points.push(vec![
                n0.sample(&mut rng) + 4.0,
                n1.sample(&mut rng) + 2.0,
            ]);
            labels.push(1u8);
        }
        let data = GroupedDataset::new(Dataset::new(points).unwrap(), labels).unwrap();
        let report = audit(
            &example_shift(),
            &second_coordinate_rule(),
            &data,
            &AuditOptions::default(),
        )
        .unwrap();

        assert_eq!(report.m, m);
        // Counterfactuals gain +2 in the decision coordinate: acceptance can
        // only be acquired, never lost.
        assert_eq!(report.flip_mass_positive, 0.0);
        assert!(report.flip_mass_negative > 0.4 && report.flip_mass_negative < 0.9);
        // Every point moves by the same shift, so the flip-set mean matches
        // the reference vector to rounding and the deviation carries nothing.
        let dev = report.deviation_diff_negative.as_ref().unwrap();
        assert!(dev.iter().all(|c| c.abs() <= 1e-12), "{dev:?}");
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("no insight")), "{:?}", report.warnings);
        let diff = report.delta_diff_negative.as_ref().unwrap();
        assert!((diff[0] + 4.0).abs() <= 1e-12);
        assert!((diff[1] + 2.0).abs() <= 1e-12);
        assert_eq!(report.ref_sign, vec![-1.0, -1.0]);
        // Parity gap equals the flip-mass difference exactly.
        assert_eq!(
            report.parity_gap,
            report.flip_mass_positive - report.flip_mass_negative
        );
        assert!(report.di > 0.0 && report.di < 1.0);
        assert_eq!(report.degeneracy, vec![0.0, 0.0]);
        // Independent estimates exist and are in the same ballpark.
        let ind = report.parity_gap_independent.unwrap();
        assert!((ind - report.parity_gap).abs() <= 3.0 / (m as f64).sqrt());
        assert!(report.di_independent.unwrap() > 0.0);
        // Sign vectors stay in [-1, 1].
        for v in report.delta_sign_negative.as_ref().unwrap() {
            assert!((-1.0..=1.0).contains(v));
        }
    }

    #[test]
    fn audit_flags_degenerate_coordinates() {
        let ds0 = ds(&[&[0.5, -1.0], &[1.5, 1.0]]);
        let data = GroupedDataset::new(ds0, vec![0, 0]).unwrap();
        let report = audit(
            &Identity { d: 2 },
            &second_coordinate_rule(),
            &data,
            &AuditOptions::default(),
        )
        .unwrap();
        assert_eq!(report.degeneracy, vec![1.0, 1.0]);
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("mean-sign statistics are unreliable")));
        assert_eq!(report.di, 1.0); // identical predictions both sides
        assert_eq!(report.parity_gap, 0.0);
    }
}
