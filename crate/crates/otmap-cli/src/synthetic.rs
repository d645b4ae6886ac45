//! Synthetic benchmark families: samplers plus the matching closed-form
//! transport map used as ground truth. Three families are supported:
//!
//! * `translation:dx,dy,...` source N(0, I), target shifted by delta,
//!   T(x) = x + delta;
//! * `gaussian-linear:m0:v0:m1:v1` Gaussians with diagonal covariances on
//!   the command line (the library type accepts full matrices),
//!   T(x) = A(x - m0) + m1;
//! * `quantile-1d:<law>:<law>` with laws `uniform(a,b)` or `exp(rate)`,
//!   T = F1^-1 . F0.

use crate::error::{CliError, Result};
use crate::linalg::{self, Matrix};
use otmap::TransportMap;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law1d {
    Uniform { lo: f64, hi: f64 },
    Exp { rate: f64 },
}

impl Law1d {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Law1d::Uniform { lo, hi } => rng.gen_range(lo..hi),
            Law1d::Exp { rate } => {
                let u: f64 = rng.gen_range(0.0..1.0);
                -(1.0 - u).ln() / rate
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Law1d::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Law1d::Exp { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        match *self {
            Law1d::Uniform { lo, hi } => lo + (hi - lo) * u,
            // Capped just inside the support so a u of exactly 1 stays finite.
            Law1d::Exp { rate } => -(1.0 - u.min(1.0 - 1e-16)).ln() / rate,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Translation {
        delta: Vec<f64>,
    },
    GaussianLinear {
        mean0: Vec<f64>,
        cov0: Matrix,
        mean1: Vec<f64>,
        cov1: Matrix,
    },
    Quantile1d {
        source: Law1d,
        target: Law1d,
    },
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::Translation { delta } => delta.len(),
            Family::GaussianLinear { mean0, .. } => mean0.len(),
            Family::Quantile1d { .. } => 1,
        }
    }

    pub fn sample_source<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            Family::Translation { delta } => sample_standard(n, delta.len(), rng),
            Family::GaussianLinear { mean0, cov0, .. } => sample_gaussian(n, mean0, cov0, rng),
            Family::Quantile1d { source, .. } => {
                (0..n).map(|_| vec![source.sample(rng)]).collect()
            }
        }
    }

    pub fn sample_target<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            Family::Translation { delta } => {
                let mut pts = sample_standard(n, delta.len(), rng);
                for p in &mut pts {
                    for (c, dv) in p.iter_mut().zip(delta) {
                        *c += dv;
                    }
                }
                pts
            }
            Family::GaussianLinear { mean1, cov1, .. } => sample_gaussian(n, mean1, cov1, rng),
            Family::Quantile1d { target, .. } => {
                (0..n).map(|_| vec![target.sample(rng)]).collect()
            }
        }
    }

    /// The exact transport map for the family.
    pub fn closed_form_map(&self) -> Result<ClosedFormMap> {
        let kind = match self {
            Family::Translation { delta } => MapKind::Translation {
                delta: delta.clone(),
            },
            Family::GaussianLinear {
                mean0,
                cov0,
                mean1,
                cov1,
            } => {
                // A = S0^-1/2 (S0^1/2 S1 S0^1/2)^1/2 S0^-1/2 maps N(m0,S0) to N(m1,S1).
                let half = linalg::sqrtm(cov0)?;
                let inv_half = linalg::inv_sqrtm(cov0)?;
                let inner = linalg::mat_mul(&linalg::mat_mul(&half, cov1), &half);
                let inner_half = linalg::sqrtm(&inner)?;
                let a = linalg::mat_mul(&linalg::mat_mul(&inv_half, &inner_half), &inv_half);
                MapKind::Affine {
                    a,
                    mean0: mean0.clone(),
                    mean1: mean1.clone(),
                }
            }
            Family::Quantile1d { source, target } => MapKind::Quantile {
                source: *source,
                target: *target,
            },
        };
        Ok(ClosedFormMap {
            dim: self.dim(),
            kind,
        })
    }
}

fn sample_standard<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

fn sample_gaussian<R: Rng>(n: usize, mean: &[f64], cov: &Matrix, rng: &mut R) -> Vec<Vec<f64>> {
    let l = linalg::cholesky(cov).expect("sampling covariance must be positive definite");
    let d = mean.len();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let mut x = linalg::mat_vec(&l, &z);
            for (c, m) in x.iter_mut().zip(mean) {
                *c += m;
            }
            x
        })
        .collect()
}

enum MapKind {
    Translation {
        delta: Vec<f64>,
    },
    Affine {
        a: Matrix,
        mean0: Vec<f64>,
        mean1: Vec<f64>,
    },
    Quantile {
        source: Law1d,
        target: Law1d,
    },
}

/// Ground-truth map with the same query interface as a fitted map.
pub struct ClosedFormMap {
    dim: usize,
    kind: MapKind,
}

impl TransportMap for ClosedFormMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> otmap::Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(otmap::Error::PointDim {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(match &self.kind {
            MapKind::Translation { delta } => x.iter().zip(delta).map(|(c, d)| c + d).collect(),
            MapKind::Affine { a, mean0, mean1 } => {
                let centered: Vec<f64> = x.iter().zip(mean0).map(|(c, m)| c - m).collect();
                let mut y = linalg::mat_vec(a, &centered);
                for (c, m) in y.iter_mut().zip(mean1) {
                    *c += m;
                }
                y
            }
            MapKind::Quantile { source, target } => vec![target.quantile(source.cdf(x[0]))],
        })
    }
}

fn parse_floats(part: &str, what: &str) -> Result<Vec<f64>> {
    part.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Flag(format!("{what}: {s:?} is not a number")))
        })
        .collect()
}

fn parse_law(part: &str) -> Result<Law1d> {
    let part = part.trim();
    let (name, args) = part
        .split_once('(')
        .and_then(|(n, rest)| rest.strip_suffix(')').map(|a| (n, a)))
        .ok_or_else(|| CliError::Flag(format!("law {part:?} must look like uniform(a,b) or exp(rate)")))?;
    match name {
        "uniform" => {
            let v = parse_floats(args, "uniform bounds")?;
            if v.len() != 2 || v[0] >= v[1] {
                return Err(CliError::Flag(format!(
                    "uniform law needs two bounds with lo < hi, got {part:?}"
                )));
            }
            Ok(Law1d::Uniform { lo: v[0], hi: v[1] })
        }
        "exp" => {
            let v = parse_floats(args, "exp rate")?;
            if v.len() != 1 || v[0] <= 0.0 {
                return Err(CliError::Flag(format!(
                    "exp law needs one positive rate, got {part:?}"
                )));
            }
            Ok(Law1d::Exp { rate: v[0] })
        }
        _ => Err(CliError::Family(part.to_string())),
    }
}

fn diag(vars: &[f64]) -> Result<Matrix> {
    if vars.iter().any(|&v| v <= 0.0) {
        return Err(CliError::Flag(
            "diagonal variances must be positive".to_string(),
        ));
    }
    let d = vars.len();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        m[i][i] = vars[i];
    }
    Ok(m)
}

/// Parses the `--family` flag.
pub fn parse_family(flag: &str) -> Result<Family> {
    let (name, rest) = flag
        .split_once(':')
        .ok_or_else(|| CliError::Family(flag.to_string()))?;
    match name {
        "translation" => {
            let delta = parse_floats(rest, "translation delta")?;
            if delta.is_empty() {
                return Err(CliError::Flag("translation needs a delta".to_string()));
            }
            Ok(Family::Translation { delta })
        }
        "gaussian-linear" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 4 {
                return Err(CliError::Flag(
                    "gaussian-linear needs mean0:variances0:mean1:variances1".to_string(),
                ));
            }
            let mean0 = parse_floats(parts[0], "mean0")?;
            let vars0 = parse_floats(parts[1], "variances0")?;
            let mean1 = parse_floats(parts[2], "mean1")?;
            let vars1 = parse_floats(parts[3], "variances1")?;
            if mean0.len() != vars0.len() || mean1.len() != vars1.len() || mean0.len() != mean1.len()
            {
                return Err(CliError::Flag(
                    "gaussian-linear parameter lengths disagree".to_string(),
                ));
            }
            Ok(Family::GaussianLinear {
                mean0,
                cov0: diag(&vars0)?,
                mean1,
                cov1: diag(&vars1)?,
            })
        }
        "quantile-1d" => {
            let (a, b) = rest
                .split_once(':')
                .ok_or_else(|| CliError::Flag("quantile-1d needs two laws".to_string()))?;
            Ok(Family::Quantile1d {
                source: parse_law(a)?,
                target: parse_law(b)?,
            })
        }
        _ => Err(CliError::Family(name.to_string())),
    }
}
