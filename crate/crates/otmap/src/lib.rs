//! Smooth monotone transport maps between empirical samples, with
//! counterfactual fairness audits built on top.
//!
//! The pipeline: match two equal-size samples one-to-one under squared
//! Euclidean cost ([`assignment`]), solve a small linear program for
//! potentials with a strict-convexity margin ([`potential`]), and smooth the
//! resulting piecewise map through a Moreau envelope into a single monotone
//! Lipschitz map that interpolates the matched pairs and stays in the convex
//! hull of the targets ([`map`]). The [`audit`] module uses such maps as
//! counterfactual generators: flip sets, transparency reports, disparate
//! impact, parity-gap identities, and barycentric repair.

pub mod assignment;
pub mod audit;
pub mod dataset;
mod error;
pub mod map;
pub mod potential;

pub use dataset::{align_groups, Dataset, GroupedDataset, PairedSamples};
pub use error::{Error, Result};
pub use map::{FitMeta, FitOptions, FittedMap, ProxResult, TransportMap};
