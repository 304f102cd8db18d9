//! Regularisation path: one dense warm-up step, then a geometrically growing
//! group penalty until at most `f_thres` features survive.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gemini::{Distance, GeminiEvaluator, GeminiSpec, Mode};
use crate::geometry::{pairwise_affinity, AffinityMatrix, AffinitySpec};
use crate::nn::{hard_labels, soft_assign, softmax_backward, ModelDocument, OptimizerKind, OptimizerState, SkipConnectedModel};
use crate::sparsity::{active_set, apply_prox, group_penalty};

/// Largest number of penalised steps before the path gives up.
pub const MAX_PENALTY_STEPS: usize = 10_000;

/// Above this many samples training switches to shuffled minibatches.
pub const FULL_BATCH_LIMIT: usize = 2048;
pub const DEFAULT_BATCH: usize = 1024;

/// Fraction of the best GEMINI a selected snapshot must retain.
pub const SELECTION_RATIO: f64 = 0.9;

/// Whether the affinity matrix follows the active feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    #[default]
    Static,
    Dynamic,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Regime::Static),
            "dynamic" => Ok(Regime::Dynamic),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub clusters: usize,
    pub gemini: GeminiSpec,
    pub hidden: Vec<usize>,
    pub hierarchy: f64,
    pub lambda0: f64,
    pub rho: f64,
    pub f_thres: usize,
    pub epochs: usize,
    pub patience: usize,
    /// Relative objective gain an epoch needs to count as progress.
    pub min_improvement: f64,
    pub learning_rate: f64,
    /// `None` picks full batch up to [`FULL_BATCH_LIMIT`] samples.
    pub batch_size: Option<usize>,
    pub regime: Regime,
    pub seed: u64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            clusters: 3,
            gemini: GeminiSpec::new(Distance::Mmd, Mode::Ovo),
            hidden: vec![100],
            hierarchy: 10.0,
            lambda0: 1.0,
            rho: 1.05,
            f_thres: 2,
            epochs: 100,
            patience: 10,
            min_improvement: 0.01,
            learning_rate: 1e-3,
            batch_size: None,
            regime: Regime::Static,
            seed: 0,
        }
    }
}

impl PathConfig {
    /// Checks the configuration against a data set with `features` columns.
    pub fn validate(&self, features: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.clusters < 2 {
            return fail(format!("need at least 2 clusters, got {}", self.clusters));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return fail(format!("lambda0 must be positive, got {}", self.lambda0));
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return fail(format!("rho must exceed 1, got {}", self.rho));
        }
        if self.f_thres == 0 || self.f_thres >= features {
            return fail(format!("f_thres {} must lie in [1, {features})", self.f_thres));
        }
        if self.epochs == 0 || self.patience == 0 {
            return fail("epochs and patience must be positive".into());
        }
        if !(self.min_improvement >= 0.0 && self.min_improvement.is_finite()) {
            return fail(format!("min_improvement {}", self.min_improvement));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {}", self.learning_rate));
        }
        if !(self.hierarchy >= 0.0 && self.hierarchy.is_finite()) {
            return fail(format!("hierarchy coefficient {}", self.hierarchy));
        }
        if self.hidden.contains(&0) {
            return fail("hidden layers must have at least one unit".into());
        }
        if self.batch_size == Some(0) {
            return fail("batch size must be positive".into());
        }
        self.gemini.validate()
    }

    /// Penalty of the `t`-th penalised step (0-based).
    pub fn lambda_at(&self, t: usize) -> f64 {
        self.lambda0 * self.rho.powi(t as i32)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    fn batch_for(&self, samples: usize) -> usize {
        match self.batch_size {
            Some(b) => b.min(samples),
            None if samples <= FULL_BATCH_LIMIT => samples,
            None => DEFAULT_BATCH,
        }
    }
}

/// Stops once `patience` consecutive epochs fail to raise the best objective
/// by the relative margin.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    margin: f64,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, margin: f64) -> Self {
        EarlyStopping {
            patience,
            margin,
            best: None,
            stale: 0,
        }
    }

    /// Records one epoch; returns `true` when training should stop.
    pub fn observe(&mut self, objective: f64) -> bool {
        match self.best {
            Some(b) if objective <= b + self.margin * b.abs() => self.stale += 1,
            _ => {
                self.best = Some(objective);
                self.stale = 0;
            }
        }
        self.stale >= self.patience
    }
}

/// One row of `path_trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub lambda: f64,
    pub epochs_used: usize,
    pub n_active: usize,
    pub gemini: f64,
    pub penalty: f64,
    pub objective: f64,
}

/// Model state recorded when the active set shrinks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSnapshot {
    pub step: usize,
    pub lambda: f64,
    pub n_active: usize,
    pub active: Vec<usize>,
    pub gemini: f64,
    /// Epochs consumed along the path up to and including this step.
    pub epochs: usize,
    pub model: ModelDocument,
}

/// Step and penalty at which a feature left the active set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub step: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub trace: Vec<TraceRow>,
    /// Strictly decreasing in `n_active`; the first one is the dense model.
    pub snapshots: Vec<PathSnapshot>,
    /// Per feature; `None` for features still alive at the end.
    pub eliminations: Vec<Option<Elimination>>,
    pub regime: Regime,
    pub config_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub epochs: usize,
    pub gemini: f64,
    pub penalty: f64,
    pub objective: f64,
}

/// Owns the model and the geometry while a path is being fitted.
pub struct Trainer<'a> {
    x: ArrayView2<'a, f64>,
    config: &'a PathConfig,
    pub model: SkipConnectedModel,
    evaluator: GeminiEvaluator,
    /// Present in full-batch mode.
    affinity: Option<AffinityMatrix>,
    active: Vec<usize>,
    dead: Vec<bool>,
    batch: usize,
    rng: ChaCha8Rng,
}

impl<'a> Trainer<'a> {
    pub fn new(x: ArrayView2<'a, f64>, config: &'a PathConfig) -> Result<Self> {
        check_data(x)?;
        config.validate(x.ncols())?;
        let d = x.ncols();
        let model = SkipConnectedModel::init(d, &config.hidden, config.clusters, config.hierarchy, config.seed);
        let mut trainer = Trainer {
            x,
            config,
            model,
            evaluator: GeminiEvaluator::new(config.gemini),
            affinity: None,
            active: (0..d).collect(),
            dead: vec![false; d],
            batch: config.batch_for(x.nrows()),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c),
        };
        trainer.refresh_affinity()?;
        Ok(trainer)
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    fn affinity_spec(&self) -> AffinitySpec {
        let kind = self.config.gemini.distance.affinity_kind();
        match self.config.regime {
            Regime::Static => AffinitySpec::all(kind),
            Regime::Dynamic => AffinitySpec::restricted(kind, self.active.clone()),
        }
    }

    fn full_batch(&self) -> bool {
        self.batch >= self.x.nrows()
    }

    /// Recomputes the affinity (only the active features count in the dynamic regime).
    pub fn refresh_affinity(&mut self) -> Result<()> {
        self.evaluator.reset();
        self.affinity = if self.full_batch() {
            Some(pairwise_affinity(self.x, &self.affinity_spec())?)
        } else {
            None
        };
        Ok(())
    }

    fn batch_affinity(&self, xb: ArrayView2<f64>) -> Result<AffinityMatrix> {
        pairwise_affinity(xb, &self.affinity_spec())
    }

    /// GEMINI on a batch and the gradient of −GEMINI.
    fn gradient(&mut self, xb: ArrayView2<f64>, affinity: &AffinityMatrix) -> Result<(f64, crate::nn::Gradients)> {
        let (logits, cache) = self.model.forward_cached(xb)?;
        let tau = soft_assign(logits.view())?;
        let (value, grad_tau) = self.evaluator.evaluate(tau.view(), affinity)?;
        let mut grad_logits = softmax_backward(tau.view(), grad_tau.view());
        grad_logits.mapv_inplace(|g| -g);
        Ok((value, self.model.backward(&cache, grad_logits.view())?))
    }

    fn update(&mut self, optimizer: &mut OptimizerState, grads: &crate::nn::Gradients, lambda: f64) -> Result<()> {
        optimizer.step(&mut self.model.param_slices_mut(), &grads.slices())?;
        apply_prox(&mut self.model, optimizer.learning_rate() * lambda, self.config.hierarchy);
        // eliminated features never come back
        for j in 0..self.dead.len() {
            if self.dead[j] {
                self.model.zero_feature(j);
            } else if self.model.skip.column(j).iter().all(|&v| v == 0.0) {
                self.dead[j] = true;
            }
        }
        Ok(())
    }

    /// One pass over the data; returns the mean batch GEMINI seen before each update.
    fn epoch(&mut self, optimizer: &mut OptimizerState, lambda: f64) -> Result<f64> {
        if self.full_batch() {
            let affinity = self.affinity.take().expect("full-batch affinity");
            let result = self.gradient(self.x, &affinity);
            self.affinity = Some(affinity);
            let (value, grads) = result?;
            self.update(optimizer, &grads, lambda)?;
            return Ok(value);
        }
        let mut order: Vec<usize> = (0..self.x.nrows()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let chunks: Vec<Vec<usize>> = order.chunks(self.batch).map(|c| c.to_vec()).collect();
        for rows in &chunks {
            let xb = self.x.select(Axis(0), rows);
            let affinity = self.batch_affinity(xb.view())?;
            let (value, grads) = self.gradient(xb.view(), &affinity)?;
            self.update(optimizer, &grads, lambda)?;
            total += value;
        }
        Ok(total / chunks.len() as f64)
    }

    /// GEMINI of the current model over the training set (batch average when
    /// the data does not fit in one batch).
    pub fn evaluate_gemini(&mut self) -> Result<f64> {
        if self.full_batch() {
            let affinity = self.affinity.take().expect("full-batch affinity");
            let result = self.gemini_on(self.x, &affinity);
            self.affinity = Some(affinity);
            return result;
        }
        let x = self.x;
        let n = x.nrows();
        let mut total = 0.0;
        let mut count = 0;
        for start in (0..n).step_by(self.batch) {
            let xb = x.slice(ndarray::s![start..(start + self.batch).min(n), ..]);
            let affinity = self.batch_affinity(xb)?;
            total += self.gemini_on(xb, &affinity)?;
            count += 1;
        }
        Ok(total / count as f64)
    }

    fn gemini_on(&mut self, xb: ArrayView2<f64>, affinity: &AffinityMatrix) -> Result<f64> {
        let tau = soft_assign(self.model.forward(xb)?.view())?;
        Ok(self.evaluator.evaluate(tau.view(), affinity)?.0)
    }

    /// Trains at a fixed penalty until early stopping or the epoch budget.
    pub fn train_at_lambda(&mut self, lambda: f64, optimizer: &mut OptimizerState) -> Result<StepOutcome> {
        let mut stopper = EarlyStopping::new(self.config.patience, self.config.min_improvement);
        let mut epochs = 0;
        while epochs < self.config.epochs {
            let penalty = group_penalty(self.model.skip.view());
            let gemini = self.epoch(optimizer, lambda).map_err(|e| e.context(format!("epoch {epochs}")))?;
            epochs += 1;
            if stopper.observe(gemini - lambda * penalty) {
                break;
            }
        }
        let gemini = self.evaluate_gemini()?;
        let penalty = group_penalty(self.model.skip.view());
        self.active = active_set(&self.model);
        Ok(StepOutcome {
            epochs,
            gemini,
            penalty,
            objective: gemini - lambda * penalty,
        })
    }
}

fn check_data(x: ArrayView2<f64>) -> Result<()> {
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(Error::Data(format!("need at least 2 samples and 1 feature, got {:?}", x.dim())));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite value at row {}, column {}",
            pos / x.ncols(),
            pos % x.ncols()
        )));
    }
    Ok(())
}

fn param_shapes(model: &SkipConnectedModel) -> Vec<usize> {
    let mut m = model.clone();
    m.param_slices_mut().iter().map(|s| s.len()).collect()
}

/// Fits the whole path.
pub fn fit_path(x: ArrayView2<f64>, config: &PathConfig) -> Result<PathResult> {
    fit_path_with(x, config, |_| {})
}

/// Like [`fit_path`], calling `observe` after every λ step.
pub fn fit_path_with(x: ArrayView2<f64>, config: &PathConfig, mut observe: impl FnMut(&TraceRow)) -> Result<PathResult> {
    let mut trainer = Trainer::new(x, config)?;
    let d = x.ncols();
    let digest = config.digest();
    let shapes = param_shapes(&trainer.model);
    let mut trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut eliminations: Vec<Option<Elimination>> = vec![None; d];

    let snapshot = |trainer: &Trainer, step: usize, lambda: f64, gemini: f64, epochs: usize| PathSnapshot {
        step,
        lambda,
        n_active: trainer.active.len(),
        active: trainer.active.clone(),
        gemini,
        epochs,
        model: ModelDocument::from_model(&trainer.model, config.seed, &digest),
    };

    let mut adam = OptimizerState::new(OptimizerKind::AdaptiveMoments, config.learning_rate, &shapes)?;
    let dense = trainer
        .train_at_lambda(0.0, &mut adam)
        .map_err(|e| e.context("dense step"))?;
    let row = TraceRow {
        step: 0,
        lambda: 0.0,
        epochs_used: dense.epochs,
        n_active: trainer.active.len(),
        gemini: dense.gemini,
        penalty: dense.penalty,
        objective: dense.objective,
    };
    observe(&row);
    trace.push(row);
    let first_dead: Vec<usize> = (0..d).filter(|j| !trainer.active.contains(j)).collect();
    for j in first_dead {
        eliminations[j] = Some(Elimination { step: 0, lambda: 0.0 });
    }
    let mut epochs = dense.epochs;
    snapshots.push(snapshot(&trainer, 0, 0.0, dense.gemini, epochs));
    let mut last = trainer.active.len();

    let mut sgd = OptimizerState::new(OptimizerKind::MomentumSgd, config.learning_rate, &shapes)?;
    let mut t = 0;
    while last > config.f_thres {
        if t >= MAX_PENALTY_STEPS {
            return Err(Error::Numeric(format!(
                "{last} features still active after {MAX_PENALTY_STEPS} penalty increases (lambda {:.3e})",
                config.lambda_at(t)
            )));
        }
        let lambda = config.lambda_at(t);
        let step = t + 1;
        t += 1;
        let out = trainer
            .train_at_lambda(lambda, &mut sgd)
            .map_err(|e| e.context(format!("step {step} (lambda {lambda:.4})")))?;
        let row = TraceRow {
            step,
            lambda,
            epochs_used: out.epochs,
            n_active: trainer.active.len(),
            gemini: out.gemini,
            penalty: out.penalty,
            objective: out.objective,
        };
        observe(&row);
        trace.push(row);
        epochs += out.epochs;
        if trainer.active.len() < last {
            for (j, slot) in eliminations.iter_mut().enumerate() {
                if slot.is_none() && trainer.active.binary_search(&j).is_err() {
                    *slot = Some(Elimination { step, lambda });
                }
            }
            snapshots.push(snapshot(&trainer, step, lambda, out.gemini, epochs));
            last = trainer.active.len();
            if config.regime == Regime::Dynamic && last > config.f_thres {
                trainer.refresh_affinity()?;
            }
        }
    }
    Ok(PathResult {
        trace,
        snapshots,
        eliminations,
        regime: config.regime,
        config_digest: digest,
    })
}

/// Outcome of the model-selection rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Index into the snapshot list.
    pub index: usize,
    pub n_active: usize,
    pub active: Vec<usize>,
    pub gemini: f64,
    pub best_gemini: f64,
    pub threshold: f64,
}

/// Picks the snapshot with the fewest features whose GEMINI reaches
/// [`SELECTION_RATIO`] of the best one (ties go to the later snapshot).
pub fn select_model(snapshots: &[PathSnapshot], regime: Regime) -> Result<Selection> {
    if regime == Regime::Dynamic {
        return Err(Error::UnsupportedRegime(
            "GEMINI values on different feature subsets are not comparable, so no model is selected".into(),
        ));
    }
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("no snapshots to select from".into()));
    }
    let best = snapshots.iter().map(|s| s.gemini).fold(f64::NEG_INFINITY, f64::max);
    let threshold = SELECTION_RATIO * best;
    let mut chosen: Option<usize> = None;
    for (i, s) in snapshots.iter().enumerate() {
        if s.gemini >= threshold && chosen.is_none_or(|c| s.n_active <= snapshots[c].n_active) {
            chosen = Some(i);
        }
    }
    let index = chosen.ok_or_else(|| Error::Numeric("no snapshot has a finite GEMINI".into()))?;
    let s = &snapshots[index];
    Ok(Selection {
        index,
        n_active: s.n_active,
        active: s.active.clone(),
        gemini: s.gemini,
        best_gemini: best,
        threshold,
    })
}

/// Soft assignments and hard labels of a model on new data.
pub fn predict(model: &SkipConnectedModel, x: ArrayView2<f64>) -> Result<(Array2<f64>, Vec<usize>)> {
    let tau = soft_assign(model.forward(x)?.view())?;
    let labels = hard_labels(tau.view());
    Ok((tau, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_dataset1, Scenario1Params};

    #[test]
    fn lambda_schedule() {
        let c = PathConfig::default();
        for t in [0usize, 1, 2, 10, 50] {
            assert!((c.lambda_at(t) - 1.05f64.powi(t as i32)).abs() < 1e-12 * c.lambda_at(t));
        }
    }

    #[test]
    fn early_stopping_rule() {
        let mut s = EarlyStopping::new(10, 0.01);
        assert!(!s.observe(10.0));
        // small gains relative to the best do not reset the counter
        for i in 0..9 {
            assert!(!s.observe(10.0 + 0.005 * (i + 1) as f64));
        }
        assert!(s.observe(10.05));

        let mut s = EarlyStopping::new(3, 0.01);
        s.observe(1.0);
        s.observe(1.0);
        s.observe(1.0);
        assert!(!s.observe(1.5), "a 50% gain resets");
        assert!(!s.observe(1.5));
        assert!(!s.observe(1.5));
        assert!(s.observe(1.5));
    }

    fn snap(n_active: usize, gemini: f64) -> PathSnapshot {
        let model = SkipConnectedModel::zeros(3, &[2], 2, 1.0);
        PathSnapshot {
            step: 0,
            lambda: 0.0,
            n_active,
            active: (0..n_active).collect(),
            gemini,
            epochs: 0,
            model: ModelDocument::from_model(&model, 0, ""),
        }
    }

    #[test]
    fn selection_rule() {
        let snaps = vec![snap(25, 1.0), snap(10, 0.95), snap(5, 0.91), snap(3, 0.6)];
        let s = select_model(&snaps, Regime::Static).unwrap();
        assert_eq!(s.n_active, 5);
        assert_eq!(s.index, 2);
        assert!((s.threshold - 0.9).abs() < 1e-15);
        // the best snapshot may sit anywhere on the path
        let snaps = vec![snap(25, 0.8), snap(10, 1.0), snap(5, 0.85)];
        assert_eq!(select_model(&snaps, Regime::Static).unwrap().n_active, 10);
        // equal sizes: the later snapshot wins
        let snaps = vec![snap(4, 1.0), snap(4, 1.0)];
        assert_eq!(select_model(&snaps, Regime::Static).unwrap().index, 1);
        assert!(matches!(
            select_model(&snaps, Regime::Dynamic),
            Err(Error::UnsupportedRegime(_))
        ));
        assert!(select_model(&[], Regime::Static).is_err());
    }

    #[test]
    fn config_validation() {
        let c = PathConfig::default();
        assert!(c.validate(25).is_ok());
        assert!(c.validate(2).is_err());
        for bad in [
            PathConfig { rho: 1.0, ..c.clone() },
            PathConfig { lambda0: 0.0, ..c.clone() },
            PathConfig { clusters: 1, ..c.clone() },
            PathConfig { epochs: 0, ..c.clone() },
            PathConfig { f_thres: 0, ..c.clone() },
            PathConfig { batch_size: Some(0), ..c.clone() },
        ] {
            assert!(matches!(bad.validate(25), Err(Error::Config(_))));
        }
        assert_eq!(c.digest(), c.clone().digest());
        assert_ne!(c.digest(), PathConfig { seed: 1, ..c }.digest());
    }

    fn small_config() -> PathConfig {
        PathConfig {
            hidden: vec![10],
            epochs: 20,
            patience: 5,
            rho: 1.3,
            lambda0: 2.0,
            learning_rate: 1e-2,
            f_thres: 2,
            seed: 3,
            ..PathConfig::default()
        }
    }

    #[test]
    fn path_invariants() {
        let params = Scenario1Params {
            samples: 60,
            alpha: 1.0,
            noise: 5,
        };
        let data = gen_dataset1(&params, 1).unwrap();
        let config = small_config();
        let path = fit_path(data.x.view(), &config).unwrap();
        assert_eq!(path.trace[0].lambda, 0.0);
        assert_eq!(path.snapshots[0].n_active, 10);
        let sizes: Vec<usize> = path.snapshots.iter().map(|s| s.n_active).collect();
        assert!(sizes.windows(2).all(|w| w[0] > w[1]), "{sizes:?}");
        assert!(*sizes.last().unwrap() <= config.f_thres);
        let counts: Vec<usize> = path.trace.iter().map(|r| r.n_active).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        for (i, row) in path.trace.iter().enumerate().skip(1) {
            assert_eq!(row.step, i);
            assert!((row.lambda - config.lambda_at(i - 1)).abs() < 1e-12);
            assert!(row.epochs_used >= 1 && row.epochs_used <= config.epochs);
        }
        // the elimination record agrees with the final active set
        let last = path.snapshots.last().unwrap();
        for (j, e) in path.eliminations.iter().enumerate() {
            assert_eq!(e.is_none(), last.active.contains(&j));
        }
        for s in &path.snapshots {
            let model = s.model.to_model().unwrap();
            assert_eq!(active_set(&model), s.active);
            for j in (0..10).filter(|j| !s.active.contains(j)) {
                assert!(model.mlp.layers[0].weight.column(j).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn path_is_deterministic() {
        let params = Scenario1Params {
            samples: 40,
            alpha: 1.0,
            noise: 3,
        };
        let data = gen_dataset1(&params, 2).unwrap();
        let config = small_config();
        let a = fit_path(data.x.view(), &config).unwrap();
        let b = fit_path(data.x.view(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn minibatch_path_runs() {
        let params = Scenario1Params {
            samples: 50,
            alpha: 1.0,
            noise: 3,
        };
        let data = gen_dataset1(&params, 5).unwrap();
        let config = PathConfig {
            batch_size: Some(16),
            ..small_config()
        };
        let path = fit_path(data.x.view(), &config).unwrap();
        assert!(path.snapshots.last().unwrap().n_active <= 2);
    }

    #[test]
    fn dynamic_regime_refuses_selection() {
        let params = Scenario1Params {
            samples: 40,
            alpha: 1.0,
            noise: 3,
        };
        let data = gen_dataset1(&params, 4).unwrap();
        let config = PathConfig {
            regime: Regime::Dynamic,
            ..small_config()
        };
        let path = fit_path(data.x.view(), &config).unwrap();
        assert!(matches!(
            select_model(&path.snapshots, path.regime),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn rejects_bad_data() {
        let mut x = Array2::<f64>::zeros((10, 4));
        x[[3, 2]] = f64::NAN;
        let err = fit_path(x.view(), &small_config()).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("row 3")), "{err}");
    }
}
