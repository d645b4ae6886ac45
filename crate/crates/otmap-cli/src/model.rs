//! Model persistence. A fitted map is stored as JSON with every float in
//! shortest round-trip form, so save→load reproduces the map bit for bit and
//! refitting with identical inputs produces byte-identical files (the meta
//! block carries no timestamps).

use crate::error::{CliError, Result};
use otmap::{Dataset, FitMeta, FittedMap};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub map_tol: f64,
    pub prox_max_iter: usize,
    pub source_rows: usize,
    pub target_rows: usize,
    pub created_by: String,
}

#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub d: usize,
    pub n: usize,
    pub eps0: f64,
    pub psi: Vec<f64>,
    pub sources: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub meta: ModelMeta,
}

impl ModelFile {
    pub fn from_map(map: &FittedMap) -> ModelFile {
        let meta = map.meta();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            d: map.d(),
            n: map.n(),
            eps0: map.eps0(),
            psi: map.psi().to_vec(),
            sources: map.sources().rows().map(|r| r.to_vec()).collect(),
            targets: map.targets().rows().map(|r| r.to_vec()).collect(),
            meta: ModelMeta {
                seed: meta.seed,
                map_tol: meta.map_tol,
                prox_max_iter: meta.prox_max_iter,
                source_rows: meta.source_rows,
                target_rows: meta.target_rows,
                created_by: format!("otmap {}", env!("CARGO_PKG_VERSION")),
            },
        }
    }

    pub fn into_map(self, path: &Path) -> Result<FittedMap> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(CliError::Model {
                path: path.display().to_string(),
                reason: format!(
                    "format_version {} is not supported (expected {})",
                    self.format_version, MODEL_FORMAT_VERSION
                ),
            });
        }
        let meta = FitMeta {
            seed: self.meta.seed,
            map_tol: self.meta.map_tol,
            prox_max_iter: self.meta.prox_max_iter,
            source_rows: self.meta.source_rows,
            target_rows: self.meta.target_rows,
        };
        let as_model_err = |path: &Path| {
            let path = path.display().to_string();
            move |e: otmap::Error| CliError::Model {
                path: path.clone(),
                reason: e.to_string(),
            }
        };
        let sources = Dataset::new(self.sources).map_err(as_model_err(path))?;
        let targets = Dataset::new(self.targets).map_err(as_model_err(path))?;
        FittedMap::from_parts(sources, targets, self.psi, self.eps0, meta)
            .map_err(as_model_err(path))
    }
}

pub fn save_model(path: &Path, map: &FittedMap) -> Result<()> {
    let file = ModelFile::from_map(map);
    let json = serde_json::to_string_pretty(&file).map_err(|e| CliError::Model {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))
}

pub fn load_model(path: &Path) -> Result<FittedMap> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
    let file: ModelFile = serde_json::from_str(&raw).map_err(|e| CliError::Model {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    file.into_map(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use otmap::FitOptions;

    fn ramp_map() -> FittedMap {
        let sources = Dataset::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let targets = Dataset::new(vec![vec![0.0], vec![1.0]]).unwrap();
        FittedMap::fit(&sources, &targets, &FitOptions::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let map = ramp_map();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_model(f.path(), &map).unwrap();
        let back = load_model(f.path()).unwrap();
        assert_eq!(back.eps0(), map.eps0());
        assert_eq!(back.psi(), map.psi());
        for (a, b) in map.sources().rows().zip(back.sources().rows()) {
            assert_eq!(a, b);
        }
        for x in [-5.0, 0.3, 0.5, 0.75, 10.0] {
            assert_eq!(map.eval(&[x]).unwrap(), back.eval(&[x]).unwrap());
        }
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let map = ramp_map();
        let f1 = tempfile::NamedTempFile::new().unwrap();
        let f2 = tempfile::NamedTempFile::new().unwrap();
        save_model(f1.path(), &map).unwrap();
        save_model(f2.path(), &map).unwrap();
        let b1 = std::fs::read(f1.path()).unwrap();
        let b2 = std::fs::read(f2.path()).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let map = ramp_map();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_model(f.path(), &map).unwrap();
        let mut file: ModelFile =
            serde_json::from_str(&std::fs::read_to_string(f.path()).unwrap()).unwrap();
        file.format_version = 99;
        let err = file.into_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("format_version 99"));
    }

    #[test]
    fn corrupt_json_is_a_model_error() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "{\"format_version\": 1,").unwrap();
        assert!(matches!(load_model(f.path()), Err(CliError::Model { .. })));
    }
}
