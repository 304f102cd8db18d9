//! Repeated fits on the synthetic scenarios, summarised per scenario and
//! objective.
//!
//! Every scenario is drawn once from the data seed; runs differ by the model
//! seed only. Cells run on a bounded pool of worker threads, each writing into
//! its own subdirectory, and a failing cell is recorded without stopping the
//! suite.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{gen_dataset1, gen_dataset2, Dataset, Scenario};
use crate::error::{Error, Result};
use crate::gemini::{Distance, Mode};
use crate::io::{choose_snapshot, write_json, write_trace};
use crate::metrics::{MetricsReport, SelectionTruth};
use crate::path::{fit_path, predict, PathConfig, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Suite {
    Dataset1(Scenario),
    D2,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Dataset1(Scenario::S1),
        Suite::Dataset1(Scenario::S2),
        Suite::Dataset1(Scenario::S3),
        Suite::Dataset1(Scenario::S4),
        Suite::Dataset1(Scenario::S5),
        Suite::D2,
    ];

    pub fn name(self) -> String {
        match self {
            Suite::Dataset1(s) => format!("{s:?}"),
            Suite::D2 => "D2".into(),
        }
    }

    pub fn generate(self, seed: u64) -> Result<Dataset> {
        match self {
            Suite::Dataset1(s) => gen_dataset1(&s.params(), seed),
            Suite::D2 => Ok(gen_dataset2(seed)),
        }
    }

    /// Number of true classes, used as the cluster count.
    pub fn classes(self) -> usize {
        match self {
            Suite::Dataset1(_) => 3,
            Suite::D2 => 4,
        }
    }

    /// Expected number of informative variables, used as the stop threshold.
    pub fn expected_features(self) -> usize {
        match self {
            Suite::Dataset1(_) => 5,
            Suite::D2 => 2,
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Suite::Dataset1(Scenario::S1)),
            "S2" => Ok(Suite::Dataset1(Scenario::S2)),
            "S3" => Ok(Suite::Dataset1(Scenario::S3)),
            "S4" => Ok(Suite::Dataset1(Scenario::S4)),
            "S5" => Ok(Suite::Dataset1(Scenario::S5)),
            "D2" => Ok(Suite::D2),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub suites: Vec<Suite>,
    pub objectives: Vec<(Distance, Mode)>,
    pub runs: usize,
    /// Training settings; cluster count and stop threshold are set per suite.
    pub base: PathConfig,
    pub data_seed: u64,
    /// Run `r` uses model seed `first_model_seed + r`.
    pub first_model_seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl BenchmarkConfig {
    pub fn all_objectives() -> Vec<(Distance, Mode)> {
        let mut v = Vec::new();
        for d in [Distance::Mmd, Distance::Wasserstein] {
            for m in [Mode::Ova, Mode::Ovo] {
                v.push((d, m));
            }
        }
        v
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("benchmark needs at least one run".into()));
        }
        if self.suites.is_empty() || self.objectives.is_empty() {
            return Err(Error::Config("benchmark needs a scenario and an objective".into()));
        }
        Ok(())
    }

    fn cell_config(&self, suite: Suite, (distance, mode): (Distance, Mode), run: usize) -> PathConfig {
        let mut c = self.base.clone();
        c.clusters = suite.classes();
        c.f_thres = suite.expected_features();
        c.gemini.distance = distance;
        c.gemini.mode = mode;
        c.seed = self.first_model_seed + run as u64;
        c
    }
}

/// One fit of the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: String,
    pub gemini: Distance,
    pub mode: Mode,
    pub regime: Regime,
    pub run: usize,
    pub seed: u64,
    pub data_seed: u64,
    pub metrics: Option<MetricsReport>,
    pub selected: Vec<usize>,
    pub error: Option<String>,
    pub seconds: f64,
}

/// One line of `benchmark_summary.csv`; standard deviations are population ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub gemini: Distance,
    pub mode: Mode,
    pub regime: Regime,
    pub runs: usize,
    pub failures: usize,
    pub ari_mean: f64,
    pub ari_std: f64,
    pub vser_mean: f64,
    pub vser_std: f64,
    pub cvr_mean: f64,
    pub cvr_std: f64,
    pub n_var_mean: f64,
    pub n_var_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates cells sharing scenario, objective and regime.
pub fn summarize(cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<(String, Distance, Mode, Regime, Vec<&CellResult>)> = Vec::new();
    for c in cells {
        match groups
            .iter_mut()
            .find(|g| g.0 == c.scenario && g.1 == c.gemini && g.2 == c.mode && g.3 == c.regime)
        {
            Some(g) => g.4.push(c),
            None => groups.push((c.scenario.clone(), c.gemini, c.mode, c.regime, vec![c])),
        }
    }
    for (scenario, gemini, mode, regime, members) in groups {
        let ok: Vec<&MetricsReport> = members.iter().filter_map(|c| c.metrics.as_ref()).collect();
        let column = |f: fn(&MetricsReport) -> f64| mean_std(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        let (ari_mean, ari_std) = column(|m| m.ari);
        let (vser_mean, vser_std) = column(|m| m.vser);
        let (cvr_mean, cvr_std) = column(|m| m.cvr);
        let (n_var_mean, n_var_std) = column(|m| m.n_selected as f64);
        rows.push(SummaryRow {
            scenario,
            gemini,
            mode,
            regime,
            runs: members.len(),
            failures: members.len() - ok.len(),
            ari_mean,
            ari_std,
            vser_mean,
            vser_std,
            cvr_mean,
            cvr_std,
            n_var_mean,
            n_var_std,
        });
    }
    rows
}

fn run_cell(data: &Dataset, config: &PathConfig, dir: &Path) -> Result<(MetricsReport, Vec<usize>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let result = fit_path(data.x.view(), config)?;
    write_trace(&dir.join("path_trace.csv"), &result.trace)?;
    let select = config.regime == Regime::Static;
    let report = choose_snapshot(&result, select, &data.feature_names, config.seed)?;
    let snap = result
        .snapshots
        .iter()
        .find(|s| s.n_active == report.chosen_snapshot)
        .expect("chosen snapshot exists");
    write_json(dir.join("selection.json"), &report)?;
    let (_, labels) = predict(&snap.model.to_model()?, data.x.view())?;
    let truth = data.labels.as_deref().expect("generated data has labels");
    let selection = SelectionTruth::new(data.features(), data.informative.iter().copied(), snap.active.iter().copied())?;
    let metrics = MetricsReport::compute(truth, &labels, config.clusters, &selection)?;
    Ok((metrics, snap.active.clone()))
}

/// Runs every cell and writes `benchmark_summary.csv`, `cells.csv` and one
/// subdirectory per cell into `config.out`.
pub fn run_benchmark(config: &BenchmarkConfig, force: bool) -> Result<Vec<SummaryRow>> {
    run_benchmark_with(config, force, |_| {})
}

/// Like [`run_benchmark`], calling `progress` as cells finish.
pub fn run_benchmark_with(
    config: &BenchmarkConfig,
    force: bool,
    progress: impl Fn(&CellResult) + Sync,
) -> Result<Vec<SummaryRow>> {
    config.validate()?;
    let out = &config.out;
    if out.exists() {
        if !force {
            return Err(Error::Config(format!(
                "output directory {} already exists (use --force to replace it)",
                out.display()
            )));
        }
        fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let datasets: Vec<Dataset> = config
        .suites
        .iter()
        .map(|s| s.generate(config.data_seed))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (si, &suite) in config.suites.iter().enumerate() {
        for &objective in &config.objectives {
            for run in 0..config.runs {
                jobs.push((si, suite, objective, run));
            }
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; jobs.len()]);
    let workers = config.workers.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(si, suite, objective, run)) = jobs.get(i) else { break };
                let cell = config.cell_config(suite, objective, run);
                let name = format!("{}-{}-{}-run{run}", suite.name(), cell.gemini.label(), regime_name(cell.regime));
                let dir = out.join("cells").join(name);
                let start = Instant::now();
                let outcome = catch_unwind(AssertUnwindSafe(|| run_cell(&datasets[si], &cell, &dir)))
                    .unwrap_or_else(|_| Err(Error::Numeric("worker panicked".into())));
                let (metrics, selected, error) = match outcome {
                    Ok((m, s)) => (Some(m), s, None),
                    Err(e) => (None, Vec::new(), Some(e.to_string())),
                };
                let result = CellResult {
                    scenario: suite.name(),
                    gemini: objective.0,
                    mode: objective.1,
                    regime: cell.regime,
                    run,
                    seed: cell.seed,
                    data_seed: config.data_seed,
                    metrics,
                    selected,
                    error,
                    seconds: start.elapsed().as_secs_f64(),
                };
                let _ = fs::create_dir_all(&dir).and_then(|_| {
                    let text = serde_json::to_string_pretty(&result).unwrap_or_default();
                    fs::write(dir.join("cell.json"), text)
                });
                progress(&result);
                results.lock().expect("results lock")[i] = Some(result);
            });
        }
    });
    let cells: Vec<CellResult> = results.into_inner().expect("results lock").into_iter().flatten().collect();
    write_cells(&out.join("cells.csv"), &cells)?;
    let summary = summarize(&cells);
    write_summary(&out.join("benchmark_summary.csv"), &summary)?;
    Ok(summary)
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Static => "static",
        Regime::Dynamic => "dynamic",
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record([
        "scenario", "gemini", "mode", "regime", "runs", "failures", "ari_mean", "ari_std", "vser_mean", "vser_std",
        "cvr_mean", "cvr_std", "n_var_mean", "n_var_std",
    ])
    .map_err(fail)?;
    for r in rows {
        let spec = crate::gemini::GeminiSpec::new(r.gemini, r.mode).label();
        let (g, m) = spec.split_once('-').expect("label has a dash");
        w.write_record([
            r.scenario.clone(),
            g.into(),
            m.into(),
            regime_name(r.regime).into(),
            r.runs.to_string(),
            r.failures.to_string(),
            fmt(r.ari_mean),
            fmt(r.ari_std),
            fmt(r.vser_mean),
            fmt(r.vser_std),
            fmt(r.cvr_mean),
            fmt(r.cvr_std),
            fmt(r.n_var_mean),
            fmt(r.n_var_std),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_cells(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record([
        "scenario", "objective", "regime", "run", "seed", "data_seed", "ari", "vser", "cvr", "n_var", "seconds", "error",
    ])
    .map_err(fail)?;
    for c in cells {
        let label = crate::gemini::GeminiSpec::new(c.gemini, c.mode).label();
        let m = c.metrics.as_ref();
        let num = |f: fn(&MetricsReport) -> f64| m.map(|m| fmt(f(m))).unwrap_or_default();
        w.write_record([
            c.scenario.clone(),
            label,
            regime_name(c.regime).into(),
            c.run.to_string(),
            c.seed.to_string(),
            c.data_seed.to_string(),
            num(|m| m.ari),
            num(|m| m.vser),
            num(|m| m.cvr),
            num(|m| m.n_selected as f64),
            format!("{:.3}", c.seconds),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
