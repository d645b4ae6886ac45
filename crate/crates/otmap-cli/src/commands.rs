//! Subcommand surface of the `otmap` binary. All configuration flows through
//! flags; identical flags and seeds produce identical output files.

use crate::bench;
use crate::error::{CliError, Result};
use crate::io;
use crate::model::{load_model, save_model};
use crate::synthetic;
use clap::{Args, Parser, Subcommand};
use otmap::audit::{audit, default_repair_weight, repair, AuditOptions, AuditReport, ClassifierSpec};
use otmap::{Dataset, FitOptions, FittedMap, TransportMap};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "otmap",
    version,
    about = "Fit smooth monotone transport maps between two samples, apply them, \
             audit classifiers for counterfactual flips, repair datasets, and \
             benchmark convergence against closed-form maps."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a map from a group-0 sample onto a group-1 sample.
    Fit(FitArgs),
    /// Apply a fitted map to new feature rows.
    Transform(TransformArgs),
    /// Audit a classifier on counterfactual pairs (in-process linear
    /// classifier, or `prepare`/`finalize` for an external one).
    Audit(AuditArgs),
    /// Blend both groups toward their counterfactuals.
    Repair(RepairArgs),
    /// Measure fitted-map error against a synthetic ground-truth family.
    Bench(BenchArgs),
}

#[derive(Args)]
struct FitArgs {
    /// CSV with the source (group-0) feature rows.
    #[arg(long)]
    group0: PathBuf,
    /// CSV with the target (group-1) feature rows.
    #[arg(long)]
    group1: PathBuf,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Seed for the subsample drawn when the groups differ in size.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Default evaluation accuracy stored with the model.
    #[arg(long, default_value_t = 1e-6)]
    map_tol: f64,
}

#[derive(Args)]
struct TransformArgs {
    /// Model JSON produced by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// CSV of rows to push through the map.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV (same columns as the input).
    #[arg(long)]
    out: PathBuf,
    /// Override the model's stored evaluation accuracy.
    #[arg(long)]
    map_tol: Option<f64>,
    /// Objective-gap tolerance for the inner solver; overrides --map-tol.
    #[arg(long)]
    prox_tol: Option<f64>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(subcommand)]
    mode: Option<AuditMode>,
    /// Model JSON mapping group 0 onto group 1.
    #[arg(long)]
    model: Option<PathBuf>,
    /// CSV with feature columns plus the sensitive column.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Name of the 0/1 sensitive column.
    #[arg(long)]
    sensitive_col: Option<String>,
    /// JSON description of a group-aware linear classifier.
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Where to write the audit report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the model's stored evaluation accuracy.
    #[arg(long)]
    map_tol: Option<f64>,
    /// Objective-gap tolerance for the inner solver; overrides --map-tol.
    #[arg(long)]
    prox_tol: Option<f64>,
}

#[derive(Subcommand)]
enum AuditMode {
    /// Write original and counterfactual rows for an external classifier.
    Prepare(PrepareArgs),
    /// Ingest the external predictions and finish the audit.
    Finalize(FinalizeArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Model JSON mapping group 0 onto group 1.
    #[arg(long)]
    model: PathBuf,
    /// CSV with feature columns plus the sensitive column.
    #[arg(long)]
    input: PathBuf,
    /// Name of the 0/1 sensitive column.
    #[arg(long)]
    sensitive_col: String,
    /// Output CSV with orig_* and cf_* columns, one row per group-0 row.
    #[arg(long)]
    out: PathBuf,
    /// Override the model's stored evaluation accuracy.
    #[arg(long)]
    map_tol: Option<f64>,
    /// Objective-gap tolerance for the inner solver; overrides --map-tol.
    #[arg(long)]
    prox_tol: Option<f64>,
}

#[derive(Args)]
struct FinalizeArgs {
    /// Model JSON mapping group 0 onto group 1.
    #[arg(long)]
    model: PathBuf,
    /// CSV with feature columns plus the sensitive column.
    #[arg(long)]
    input: PathBuf,
    /// Name of the 0/1 sensitive column.
    #[arg(long)]
    sensitive_col: String,
    /// CSV with `original` and `counterfactual` 0/1 columns in the order
    /// written by `audit prepare`.
    #[arg(long)]
    predictions: PathBuf,
    /// Where to write the audit report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Override the model's stored evaluation accuracy.
    #[arg(long)]
    map_tol: Option<f64>,
    /// Objective-gap tolerance for the inner solver; overrides --map-tol.
    #[arg(long)]
    prox_tol: Option<f64>,
}

#[derive(Args)]
struct RepairArgs {
    /// CSV with feature columns plus the sensitive column.
    #[arg(long)]
    input: PathBuf,
    /// Name of the 0/1 sensitive column.
    #[arg(long)]
    sensitive_col: String,
    /// Output CSV (features plus the untouched sensitive column).
    #[arg(long)]
    out: PathBuf,
    /// Blend weight for group 0; defaults to the group-0 proportion.
    #[arg(long)]
    weights: Option<f64>,
    /// Seed for subsampling inside the two internal fits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation accuracy for the two internal fits.
    #[arg(long, default_value_t = 1e-6)]
    map_tol: f64,
    /// Objective-gap tolerance for the inner solver; overrides --map-tol.
    #[arg(long)]
    prox_tol: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Synthetic family, e.g. translation:4,2 or
    /// quantile-1d:uniform(-10,10):uniform(-20,20) or
    /// gaussian-linear:0,0:1,1:3,1:2,0.5 (diagonal covariances).
    #[arg(long)]
    family: String,
    /// Comma-separated sample sizes, e.g. 50,100,200,400.
    #[arg(long)]
    n_list: String,
    /// Number of seeds; the run uses seed, seed+1, ...
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower grid corner, comma per axis (a single value is broadcast).
    #[arg(long, allow_hyphen_values = true)]
    grid_lo: String,
    /// Upper grid corner, comma per axis (a single value is broadcast).
    #[arg(long, allow_hyphen_values = true)]
    grid_hi: String,
    /// Grid points per axis.
    #[arg(long, default_value_t = 10)]
    grid_steps: usize,
    /// Where to write the benchmark report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Evaluation accuracy for every fitted map in the run.
    #[arg(long, default_value_t = 1e-6)]
    map_tol: f64,
}

/// A fitted map with command-line accuracy overrides applied per query.
struct TunedMap<'a> {
    map: &'a FittedMap,
    map_tol: Option<f64>,
    prox_tol: Option<f64>,
}

impl<'a> TunedMap<'a> {
    fn new(map: &'a FittedMap, map_tol: Option<f64>, prox_tol: Option<f64>) -> Result<Self> {
        for (name, v) in [("--map-tol", map_tol), ("--prox-tol", prox_tol)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CliError::Flag(format!("{name} must be a positive number")));
                }
            }
        }
        Ok(TunedMap {
            map,
            map_tol,
            prox_tol,
        })
    }
}

impl TransportMap for TunedMap<'_> {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn apply(&self, x: &[f64]) -> otmap::Result<Vec<f64>> {
        if let Some(gap) = self.prox_tol {
            let p = self.map.prox(x, gap)?;
            let eps = self.map.eval_eps();
            Ok(x.iter().zip(&p.z).map(|(xi, zi)| (xi - zi) / eps).collect())
        } else if let Some(tol) = self.map_tol {
            self.map.eval_with_tol(x, tol)
        } else {
            self.map.eval(x)
        }
    }
}

pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;

/// On-disk description of the built-in linear classifier. `weights1`/`bias1`
/// default to the group-0 rule when omitted.
#[derive(Serialize, Deserialize)]
pub struct ClassifierFile {
    pub format_version: u32,
    pub kind: String,
    pub weights0: Vec<f64>,
    pub bias0: f64,
    #[serde(default)]
    pub weights1: Option<Vec<f64>>,
    #[serde(default)]
    pub bias1: Option<f64>,
}

fn load_classifier(path: &Path, d: usize) -> Result<ClassifierSpec> {
    let err = |reason: String| CliError::Classifier {
        path: path.display().to_string(),
        reason,
    };
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
    let file: ClassifierFile = serde_json::from_str(&raw).map_err(|e| err(e.to_string()))?;
    if file.format_version != CLASSIFIER_FORMAT_VERSION {
        return Err(err(format!(
            "format_version {} is not supported (expected {CLASSIFIER_FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.kind != "linear" {
        return Err(err(format!(
            "kind {:?} is not supported; use the audit prepare/finalize protocol \
             for external classifiers",
            file.kind
        )));
    }
    let w1 = file.weights1.unwrap_or_else(|| file.weights0.clone());
    let b1 = file.bias1.unwrap_or(file.bias0);
    for (name, w) in [("weights0", &file.weights0), ("weights1", &w1)] {
        if w.len() != d {
            return Err(err(format!(
                "{name} has {} entries, the model expects {d}",
                w.len()
            )));
        }
    }
    Ok(ClassifierSpec::linear(file.weights0, file.bias0, w1, b1))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    format_version: u32,
    report: &'a AuditReport,
}

fn write_report(path: &Path, report: &AuditReport) -> Result<()> {
    let file = ReportFile {
        format_version: 1,
        report,
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| CliError::Model {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| CliError::Model {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    let list: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Flag(format!("{what}: {p:?} is not a sample size")))
        })
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(CliError::Flag(format!("{what} must not be empty")));
    }
    Ok(list)
}

fn parse_axis_list(s: &str, d: usize, what: &str) -> Result<Vec<f64>> {
    let list: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Flag(format!("{what}: {p:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    if list.len() == d {
        Ok(list)
    } else if list.len() == 1 {
        Ok(vec![list[0]; d])
    } else {
        Err(CliError::Flag(format!(
            "{what} has {} entries, the family has {d} axes",
            list.len()
        )))
    }
}

fn run_fit(a: FitArgs) -> Result<()> {
    let (_, ds0) = io::read_dataset(&a.group0)?;
    let (_, ds1) = io::read_dataset(&a.group1)?;
    let opts = FitOptions {
        seed: a.seed,
        map_tol: a.map_tol,
        ..FitOptions::default()
    };
    let map = FittedMap::fit(&ds0, &ds1, &opts)?;
    save_model(&a.out, &map)?;
    println!(
        "fitted {} pairs in {} dimensions, margin {}",
        map.n(),
        map.d(),
        map.eps0()
    );
    Ok(())
}

fn run_transform(a: TransformArgs) -> Result<()> {
    let map = load_model(&a.model)?;
    let (headers, ds) = io::read_dataset(&a.input)?;
    let tuned = TunedMap::new(&map, a.map_tol, a.prox_tol)?;
    let mapped = tuned.transform(&ds)?;
    io::write_dataset(&a.out, &headers, &mapped)?;
    println!("transformed {} rows", mapped.n());
    Ok(())
}

fn run_audit(a: AuditArgs) -> Result<()> {
    if let Some(mode) = a.mode {
        return match mode {
            AuditMode::Prepare(p) => run_prepare(p),
            AuditMode::Finalize(f) => run_finalize(f),
        };
    }
    fn need<T>(v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| CliError::Flag(format!("audit requires {name}")))
    }
    let model = need(a.model, "--model")?;
    let input = need(a.input, "--input")?;
    let sensitive_col = need(a.sensitive_col, "--sensitive-col")?;
    let classifier = need(a.classifier, "--classifier")?;
    let out = need(a.out, "--out")?;

    let map = load_model(&model)?;
    let (_, data) = io::read_grouped(&input, &sensitive_col)?;
    let clf = load_classifier(&classifier, map.d())?;
    let tuned = TunedMap::new(&map, a.map_tol, a.prox_tol)?;
    let report = audit(&tuned, &clf, &data, &AuditOptions::default())?;
    write_report(&out, &report)?;
    println!(
        "audited {} rows: flip mass {} negative, {} positive",
        report.m, report.flip_mass_negative, report.flip_mass_positive
    );
    Ok(())
}

fn run_prepare(a: PrepareArgs) -> Result<()> {
    let map = load_model(&a.model)?;
    let (headers, data) = io::read_grouped(&a.input, &a.sensitive_col)?;
    let ds0 = data.group(0)?;
    let tuned = TunedMap::new(&map, a.map_tol, a.prox_tol)?;
    let counterfactuals = tuned.transform(&ds0)?;
    let mut out_headers: Vec<String> = headers.iter().map(|h| format!("orig_{h}")).collect();
    out_headers.extend(headers.iter().map(|h| format!("cf_{h}")));
    let rows: Vec<Vec<f64>> = ds0
        .rows()
        .zip(counterfactuals.rows())
        .map(|(o, c)| o.iter().chain(c).copied().collect())
        .collect();
    io::write_dataset(&a.out, &out_headers, &Dataset::new(rows)?)?;
    println!(
        "wrote {} original/counterfactual pairs; classify both sides and feed \
         the labels to `audit finalize`",
        ds0.n()
    );
    Ok(())
}

fn run_finalize(a: FinalizeArgs) -> Result<()> {
    let map = load_model(&a.model)?;
    let (_, data) = io::read_grouped(&a.input, &a.sensitive_col)?;
    let ds0 = data.group(0)?;
    let (original, counterfactual) = io::read_predictions(&a.predictions)?;
    if original.len() != ds0.n() {
        return Err(CliError::Flag(format!(
            "{} has {} prediction rows, the input has {} group-0 rows",
            a.predictions.display(),
            original.len(),
            ds0.n()
        )));
    }
    let clf = ClassifierSpec::external(original, counterfactual)?;
    let tuned = TunedMap::new(&map, a.map_tol, a.prox_tol)?;
    let report = audit(&tuned, &clf, &data, &AuditOptions::default())?;
    write_report(&a.out, &report)?;
    println!(
        "audited {} rows: flip mass {} negative, {} positive",
        report.m, report.flip_mass_negative, report.flip_mass_positive
    );
    Ok(())
}

fn run_repair(a: RepairArgs) -> Result<()> {
    let (headers, data) = io::read_grouped(&a.input, &a.sensitive_col)?;
    let ds0 = data.group(0)?;
    let ds1 = data.group(1)?;
    let opts = FitOptions {
        seed: a.seed,
        map_tol: a.map_tol,
        ..FitOptions::default()
    };
    let map01 = FittedMap::fit(&ds0, &ds1, &opts)?;
    let map10 = FittedMap::fit(&ds1, &ds0, &opts)?;
    let w0 = a.weights.unwrap_or_else(|| default_repair_weight(&data));
    let tuned01 = TunedMap::new(&map01, None, a.prox_tol)?;
    let tuned10 = TunedMap::new(&map10, None, a.prox_tol)?;
    let repaired = repair(&tuned01, &tuned10, &data, w0)?;
    io::write_dataset_with_labels(&a.out, &headers, &a.sensitive_col, &repaired, data.sensitive())?;
    println!("repaired {} rows with group-0 weight {w0}", repaired.n());
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let family = synthetic::parse_family(&a.family)?;
    let n_list = parse_usize_list(&a.n_list, "--n-list")?;
    if a.seeds == 0 {
        return Err(CliError::Flag("--seeds must be positive".to_string()));
    }
    if a.grid_steps == 0 {
        return Err(CliError::Flag("--grid-steps must be positive".to_string()));
    }
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| a.seed.wrapping_add(i)).collect();
    let d = family.dim();
    let lo = parse_axis_list(&a.grid_lo, d, "--grid-lo")?;
    let hi = parse_axis_list(&a.grid_hi, d, "--grid-hi")?;
    let opts = FitOptions {
        map_tol: a.map_tol,
        ..FitOptions::default()
    };
    let report = bench::bench_convergence(
        &family,
        &a.family,
        &n_list,
        &seeds,
        &lo,
        &hi,
        a.grid_steps,
        &opts,
    )?;
    write_json(&a.out, &report)?;
    println!(
        "benchmarked {} fits ({} degenerate, excluded from medians)",
        report.cells.len(),
        report.degenerate_total
    );
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Transform(a) => run_transform(a),
        Command::Audit(a) => run_audit(a),
        Command::Repair(a) => run_repair(a),
        Command::Bench(a) => run_bench(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_surface_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_usize_list("50,100", "--n-list").unwrap(), vec![50, 100]);
        assert!(parse_usize_list("50,x", "--n-list").is_err());
        assert_eq!(
            parse_axis_list("-1.5", 2, "--grid-lo").unwrap(),
            vec![-1.5, -1.5]
        );
        assert_eq!(
            parse_axis_list("1,2", 2, "--grid-hi").unwrap(),
            vec![1.0, 2.0]
        );
        assert!(parse_axis_list("1,2,3", 2, "--grid-hi").is_err());
    }

    #[test]
    fn tuned_map_matches_plain_eval() {
        let src = Dataset::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let tgt = Dataset::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let map = FittedMap::fit(&src, &tgt, &FitOptions::default()).unwrap();
        let plain = TunedMap::new(&map, None, None).unwrap();
        let tight = TunedMap::new(&map, Some(1e-9), None).unwrap();
        let gap = TunedMap::new(&map, None, Some(1e-18)).unwrap();
        for x in [-2.0, 0.3, 0.6, 0.75, 4.0] {
            let want = map.eval(&[x]).unwrap()[0];
            assert!((plain.apply(&[x]).unwrap()[0] - want).abs() < 1e-9);
            assert!((tight.apply(&[x]).unwrap()[0] - want).abs() < 1e-9);
            assert!((gap.apply(&[x]).unwrap()[0] - want).abs() < 1e-9);
        }
        assert!(TunedMap::new(&map, Some(0.0), None).is_err());
        assert!(TunedMap::new(&map, None, Some(-1.0)).is_err());
    }

    #[test]
    fn classifier_loading_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.json");
        std::fs::write(
            &path,
            r#"{"format_version":1,"kind":"linear","weights0":[0.0,1.0],"bias0":0.0}"#,
        )
        .unwrap();
        let clf = load_classifier(&path, 2).unwrap();
        match clf {
            ClassifierSpec::Linear { weights, biases } => {
                assert_eq!(weights[0], weights[1]);
                assert_eq!(biases, [0.0, 0.0]);
            }
            _ => panic!("expected linear"),
        }
        assert!(load_classifier(&path, 3).is_err());

        std::fs::write(
            &path,
            r#"{"format_version":2,"kind":"linear","weights0":[0.0],"bias0":0.0}"#,
        )
        .unwrap();
        assert!(load_classifier(&path, 1).is_err());

        std::fs::write(
            &path,
            r#"{"format_version":1,"kind":"forest","weights0":[0.0],"bias0":0.0}"#,
        )
        .unwrap();
        let err = load_classifier(&path, 1).unwrap_err().to_string();
        assert!(err.contains("prepare"), "{err}");
    }
}
