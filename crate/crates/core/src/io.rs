//! Files in and out: feature CSVs, truth sidecars, run configuration and
//! the artifacts of a fit.
//!
//! A fit directory holds
//!
//! | file | content |
//! |------|---------|
//! | `path_trace.csv` | one row per λ step |
//! | `snapshots/<n_active>.json` | model at each decrease of the active set |
//! | `selection.json` | chosen snapshot and per-feature elimination record |
//! | `feature_importance.csv` | step and λ at which each feature vanished |
//! | `assignments.csv` | hard label and soft assignments per sample |
//! | `metrics.json` | scores against a truth file, when one is given |
//! | `run.json` | resolved configuration, seed and config digest |
//!
//! On failure the directory only holds `error.json`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::gemini::{Distance, Mode, OtSolver, OtSolverKind};
use crate::metrics::{MetricsReport, SelectionTruth};
use crate::path::{fit_path, predict, select_model, PathConfig, PathResult, PathSnapshot, Regime, TraceRow};

// ---------------------------------------------------------------------------
// Data files.
// ---------------------------------------------------------------------------

/// Reads a headered CSV of decimal numbers. Rows and columns in error
/// messages are 1-based and count data rows only.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: header: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let d = names.len();
    if d == 0 || names.iter().all(String::is_empty) {
        return Err(Error::Data(format!("{}: empty header", path.display())));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), r + 1)))?;
        if record.len() != d {
            return Err(Error::Data(format!(
                "{}: row {} has {} fields, header has {d}",
                path.display(),
                r + 1,
                record.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!("{}: row {}, column {} (`{}`): `{cell}` is not a number", path.display(), r + 1, c + 1, names[c]))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!("{}: row {}, column {}: non-finite value", path.display(), r + 1, c + 1)));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let x = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(Dataset {
        x,
        feature_names: names,
        labels: None,
        informative: Vec::new(),
    })
}

/// Writes the feature matrix with a header row, floats at full precision.
pub fn write_features_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(&data.feature_names).map_err(fail)?;
    for row in data.x.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar with the evaluation-only ground truth of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub labels: Vec<usize>,
    /// 0-based column indices.
    pub informative: Vec<usize>,
    pub informative_names: Vec<String>,
    pub generator: serde_json::Value,
    pub seed: u64,
}

impl Truth {
    pub fn from_dataset(data: &Dataset, generator: serde_json::Value, seed: u64) -> Result<Self> {
        let labels = data
            .labels
            .clone()
            .ok_or_else(|| Error::InvalidInput("dataset carries no labels".into()))?;
        Ok(Truth {
            labels,
            informative: data.informative.clone(),
            informative_names: data.informative.iter().map(|&j| data.feature_names[j].clone()).collect(),
            generator,
            seed,
        })
    }

    pub fn check(&self, samples: usize, features: usize) -> Result<()> {
        if self.labels.len() != samples {
            return Err(Error::Data(format!("truth has {} labels for {samples} samples", self.labels.len())));
        }
        if let Some(&j) = self.informative.iter().find(|&&j| j >= features) {
            return Err(Error::Data(format!("informative index {j} out of range for {features} features")));
        }
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

/// One layer of run settings; unset fields fall through to the next layer.
///
/// The same type is read from a config file (flat TOML keys) and filled from
/// command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub clusters: Option<usize>,
    pub gemini: Option<Distance>,
    pub mode: Option<Mode>,
    pub lambda0: Option<f64>,
    pub rho: Option<f64>,
    pub f_thres: Option<usize>,
    pub hierarchy: Option<f64>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub batch_size: Option<usize>,
    pub regime: Option<Regime>,
    pub seed: Option<u64>,
    /// Apply the selection rule; only meaningful in the static regime.
    pub select: Option<bool>,
    pub hidden: Option<Vec<usize>>,
    pub learning_rate: Option<f64>,
    pub ot_solver: Option<OtSolverKind>,
    /// Entropic regularisation as a multiple of the mean ground cost.
    pub ot_epsilon: Option<f64>,
}

macro_rules! merge_fields {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        RunSettings { $($f: $hi.$f.or($lo.$f),)* }
    };
}

impl RunSettings {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e).context("config file"))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields of `self`, falling back to `lower`.
    pub fn over(self, lower: RunSettings) -> RunSettings {
        merge_fields!(self, lower; data, truth, out, clusters, gemini, mode, lambda0, rho, f_thres, hierarchy,
            epochs, patience, batch_size, regime, seed, select, hidden, learning_rate, ot_solver, ot_epsilon)
    }
}

/// Fully resolved settings of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    pub select: bool,
    pub path: PathConfig,
}

impl RunConfig {
    /// Resolves `flags > config file > defaults`.
    pub fn resolve(flags: RunSettings, config_file: Option<&Path>) -> Result<Self> {
        let file = match config_file {
            Some(p) => RunSettings::from_toml_file(p)?,
            None => RunSettings::default(),
        };
        Self::from_settings(flags.over(file))
    }

    pub fn from_settings(s: RunSettings) -> Result<Self> {
        let d = PathConfig::default();
        let regime = s.regime.unwrap_or(d.regime);
        if regime == Regime::Dynamic && s.select == Some(true) {
            return Err(Error::UnsupportedRegime("model selection was requested for a dynamic-regime run".into()));
        }
        let mut gemini = d.gemini;
        gemini.distance = s.gemini.unwrap_or(gemini.distance);
        gemini.mode = s.mode.unwrap_or(gemini.mode);
        gemini.solver = match s.ot_solver {
            Some(OtSolverKind::Entropic) => OtSolver::entropic(s.ot_epsilon.unwrap_or(OtSolver::default().epsilon_scale)),
            _ => OtSolver::default(),
        };
        let path = PathConfig {
            clusters: s.clusters.unwrap_or(d.clusters),
            gemini,
            hidden: s.hidden.unwrap_or(d.hidden),
            hierarchy: s.hierarchy.unwrap_or(d.hierarchy),
            lambda0: s.lambda0.unwrap_or(d.lambda0),
            rho: s.rho.unwrap_or(d.rho),
            f_thres: s.f_thres.unwrap_or(d.f_thres),
            epochs: s.epochs.unwrap_or(d.epochs),
            patience: s.patience.unwrap_or(d.patience),
            learning_rate: s.learning_rate.unwrap_or(d.learning_rate),
            batch_size: s.batch_size.or(d.batch_size),
            regime,
            seed: s.seed.unwrap_or(d.seed),
            ..d
        };
        if path.clusters < 2 {
            return Err(Error::Config(format!("need at least 2 clusters, got {}", path.clusters)));
        }
        Ok(RunConfig {
            data: s.data.ok_or_else(|| Error::Config("no data file given".into()))?,
            truth: s.truth,
            out: s.out.ok_or_else(|| Error::Config("no output directory given".into()))?,
            select: s.select.unwrap_or(regime == Regime::Static),
            path,
        })
    }
}

// ---------------------------------------------------------------------------
// Fit artifacts.
// ---------------------------------------------------------------------------

/// One line of `feature_importance.csv` and of the elimination record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureElimination {
    pub feature: String,
    pub index: usize,
    pub step: Option<usize>,
    pub lambda: Option<f64>,
}

/// Contents of `selection.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub regime: Regime,
    /// `ratio` for the 90% rule, `final` for the last snapshot.
    pub rule: String,
    /// File stem under `snapshots/`.
    pub chosen_snapshot: usize,
    pub chosen_step: usize,
    pub chosen_lambda: f64,
    pub gemini: f64,
    pub best_gemini: Option<f64>,
    pub threshold: Option<f64>,
    pub active: Vec<String>,
    pub active_indices: Vec<usize>,
    pub eliminations: Vec<FeatureElimination>,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    #[serde(flatten)]
    pub metrics: MetricsReport,
    pub seed: u64,
}

/// Result of [`run_fit`] besides the files.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub path: PathResult,
    pub selection: SelectionReport,
    pub labels: Vec<usize>,
    pub metrics: Option<MetricsReport>,
}

/// Picks the reported snapshot: the selection rule when asked for, the last
/// snapshot otherwise.
pub fn choose_snapshot(result: &PathResult, select: bool, names: &[String], seed: u64) -> Result<SelectionReport> {
    let (index, rule, best, threshold) = if select {
        let s = select_model(&result.snapshots, result.regime)?;
        (s.index, "ratio", Some(s.best_gemini), Some(s.threshold))
    } else {
        (result.snapshots.len() - 1, "final", None, None)
    };
    let snap = &result.snapshots[index];
    Ok(SelectionReport {
        regime: result.regime,
        rule: rule.into(),
        chosen_snapshot: snap.n_active,
        chosen_step: snap.step,
        chosen_lambda: snap.lambda,
        gemini: snap.gemini,
        best_gemini: best,
        threshold,
        active: snap.active.iter().map(|&j| names[j].clone()).collect(),
        active_indices: snap.active.clone(),
        eliminations: result
            .eliminations
            .iter()
            .enumerate()
            .map(|(j, e)| FeatureElimination {
                feature: names[j].clone(),
                index: j,
                step: e.map(|e| e.step),
                lambda: e.map(|e| e.lambda),
            })
            .collect(),
        seed,
        config_digest: result.config_digest.clone(),
    })
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(["step", "lambda", "epochs_used", "n_active", "gemini", "penalty", "objective"])
        .map_err(fail)?;
    for r in trace {
        w.write_record([
            r.step.to_string(),
            r.lambda.to_string(),
            r.epochs_used.to_string(),
            r.n_active.to_string(),
            r.gemini.to_string(),
            r.penalty.to_string(),
            r.objective.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_importance(path: &Path, record: &[FeatureElimination]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(["feature_name", "elimination_step", "elimination_lambda"]).map_err(fail)?;
    for e in record {
        let step = e.step.map(|s| s.to_string()).unwrap_or_default();
        let lambda = e.lambda.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([e.feature.as_str(), &step, &lambda]).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_assignments(path: &Path, tau: &Array2<f64>, labels: &[usize]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut header = vec!["sample".to_string(), "label".to_string()];
    header.extend((0..tau.ncols()).map(|k| format!("tau_{k}")));
    w.write_record(&header).map_err(fail)?;
    for (i, row) in tau.rows().into_iter().enumerate() {
        let mut rec = vec![i.to_string(), labels[i].to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Hard labels from an `assignments.csv`.
pub fn read_assignment_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), r + 1)))?;
        let label = record
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Data(format!("{}: row {}: bad label", path.display(), r + 1)))?;
        labels.push(label);
    }
    Ok(labels)
}

/// Sibling directory the artifacts are staged in before the final rename.
fn staging_dir(out: &Path) -> PathBuf {
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!(".{name}.partial"))
}

fn prepare_output(out: &Path, force: bool) -> Result<PathBuf> {
    if out.exists() && !force {
        return Err(Error::Config(format!(
            "output directory {} already exists (use --force to replace it)",
            out.display()
        )));
    }
    let stage = staging_dir(out);
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(|e| Error::io(&stage, e))?;
    }
    if let Some(parent) = stage.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::create_dir(&stage).map_err(|e| Error::io(&stage, e))?;
    Ok(stage)
}

fn publish(stage: &Path, out: &Path) -> Result<()> {
    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    fs::rename(stage, out).map_err(|e| Error::io(out, e))
}

fn load_truth(path: &Path, data: &Dataset) -> Result<Truth> {
    let truth: Truth = read_json(path)?;
    truth.check(data.samples(), data.features())?;
    Ok(truth)
}

/// Runs a whole fit and writes its artifacts into `config.out`.
///
/// The directory appears only once every file is written. Existing output is
/// refused unless `force` is set.
pub fn run_fit(config: &RunConfig, force: bool) -> Result<FitOutcome> {
    let stage = prepare_output(&config.out, force)?;
    let outcome = fit_into(config, &stage);
    match outcome {
        Ok(outcome) => {
            publish(&stage, &config.out)?;
            Ok(outcome)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&stage);
            Err(e)
        }
    }
}

fn fit_into(config: &RunConfig, dir: &Path) -> Result<FitOutcome> {
    let data = load_csv(&config.data)?;
    let truth = config.truth.as_deref().map(|p| load_truth(p, &data)).transpose()?;
    config.path.validate(data.features())?;
    let seed = config.path.seed;
    write_json(
        dir.join("run.json"),
        &serde_json::json!({
            "config": config,
            "seed": seed,
            "config_digest": config.path.digest(),
            "samples": data.samples(),
            "features": data.feature_names,
        }),
    )?;

    let result = fit_path(data.x.view(), &config.path)?;
    write_trace(&dir.join("path_trace.csv"), &result.trace)?;
    let snap_dir = dir.join("snapshots");
    fs::create_dir(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    for s in &result.snapshots {
        write_json(snap_dir.join(format!("{}.json", s.n_active)), s)?;
    }

    let selection = choose_snapshot(&result, config.select, &data.feature_names, seed)?;
    write_json(dir.join("selection.json"), &selection)?;
    write_importance(&dir.join("feature_importance.csv"), &selection.eliminations)?;

    let chosen = result
        .snapshots
        .iter()
        .find(|s| s.n_active == selection.chosen_snapshot)
        .expect("chosen snapshot exists");
    let model = chosen.model.to_model()?;
    let (tau, labels) = predict(&model, data.x.view())?;
    write_assignments(&dir.join("assignments.csv"), &tau, &labels)?;

    let metrics = match &truth {
        Some(t) => {
            let m = score(t, &labels, chosen, config.path.clusters, data.features())?;
            write_json(dir.join("metrics.json"), &MetricsDocument { metrics: m.clone(), seed })?;
            Some(m)
        }
        None => None,
    };
    Ok(FitOutcome {
        path: result,
        selection,
        labels,
        metrics,
    })
}

fn score(truth: &Truth, labels: &[usize], snapshot: &PathSnapshot, clusters: usize, features: usize) -> Result<MetricsReport> {
    let selection = SelectionTruth::new(features, truth.informative.iter().copied(), snapshot.active.iter().copied())?;
    MetricsReport::compute(&truth.labels, labels, clusters, &selection)
}

/// Recomputes `metrics.json` of an existing fit directory against a truth file.
pub fn evaluate(fit_dir: impl AsRef<Path>, truth_path: impl AsRef<Path>) -> Result<MetricsReport> {
    let dir = fit_dir.as_ref();
    let selection: SelectionReport = read_json(dir.join("selection.json"))?;
    let labels = read_assignment_labels(dir.join("assignments.csv"))?;
    let truth: Truth = read_json(truth_path)?;
    let features = selection.eliminations.len();
    truth.check(labels.len(), features)?;
    let snapshot: PathSnapshot = read_json(dir.join("snapshots").join(format!("{}.json", selection.chosen_snapshot)))?;
    let report = score(&truth, &labels, &snapshot, snapshot.model.clusters, features)?;
    write_json(
        dir.join("metrics.json"),
        &MetricsDocument {
            metrics: report.clone(),
            seed: selection.seed,
        },
    )?;
    Ok(report)
}

/// Contents of `error.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        ErrorReport {
            kind: e.kind().into(),
            exit_code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

/// Writes `error.json` into `out`, replacing it when it is ours to replace.
///
/// An existing directory that the run refused to overwrite is left untouched;
/// `None` is returned in that case.
pub fn write_error_report(out: &Path, force: bool, error: &Error) -> Result<Option<PathBuf>> {
    if out.exists() {
        if !force {
            return Ok(None);
        }
        fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("error.json");
    write_json(&path, &ErrorReport::from(error))?;
    Ok(Some(path))
}
