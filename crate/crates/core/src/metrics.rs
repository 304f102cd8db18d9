//! Clustering and variable-selection scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand index between two labelings of the same samples.
pub fn ari(labels: &[usize], preds: &[usize]) -> Result<f64> {
    if labels.len() != preds.len() {
        return Err(Error::InvalidInput(format!(
            "label vectors differ in length: {} vs {}",
            labels.len(),
            preds.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("ARI needs at least one sample".into()));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&a, &b) in labels.iter().zip(preds) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: u64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: u64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: u64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(labels.len() as u64);
    // (index − expected) / (max − expected), both scaled by 2·total to stay integral
    let (index, sr, sc, total) = (index as i128, sum_rows as i128, sum_cols as i128, total as i128);
    let numerator = 2 * (index * total - sr * sc);
    let denominator = (sr + sc) * total - 2 * sr * sc;
    if denominator == 0 {
        let same = table.len() == rows.len() && table.len() == cols.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Ground truth and a selection to score against it (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionTruth {
    pub features: usize,
    pub informative: BTreeSet<usize>,
    pub selected: BTreeSet<usize>,
}

impl SelectionTruth {
    pub fn new(features: usize, informative: impl IntoIterator<Item = usize>, selected: impl IntoIterator<Item = usize>) -> Result<Self> {
        let truth = SelectionTruth {
            features,
            informative: informative.into_iter().collect(),
            selected: selected.into_iter().collect(),
        };
        if truth.informative.iter().chain(&truth.selected).any(|&j| j >= features) {
            return Err(Error::InvalidInput("feature index out of range".into()));
        }
        Ok(truth)
    }
}

/// Variable selection error rate: |Ŝ △ T| / d.
pub fn vser(truth: &SelectionTruth) -> f64 {
    let wrong = truth.selected.symmetric_difference(&truth.informative).count();
    wrong as f64 / truth.features as f64
}

/// Correct variable rate: |Ŝ ∩ T| / |T|.
pub fn cvr(truth: &SelectionTruth) -> Result<f64> {
    if truth.informative.is_empty() {
        return Err(Error::InvalidInput("CVR needs a nonempty informative set".into()));
    }
    let hit = truth.selected.intersection(&truth.informative).count();
    Ok(hit as f64 / truth.informative.len() as f64)
}

/// Maps every predicted cluster to the true class it shares most samples with
/// (ties toward the lower class index).
pub fn majority_map(labels: &[usize], preds: &[usize]) -> Result<Vec<usize>> {
    if labels.len() != preds.len() {
        return Err(Error::InvalidInput("label vectors differ in length".into()));
    }
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&l, &p) in labels.iter().zip(preds) {
        *counts.entry(p).or_default().entry(l).or_default() += 1;
    }
    let mapping: BTreeMap<usize, usize> = counts
        .into_iter()
        .map(|(cluster, classes)| {
            let mut best = (0usize, usize::MAX);
            for (class, n) in classes {
                if n > best.0 {
                    best = (n, class);
                }
            }
            (cluster, best.1)
        })
        .collect();
    Ok(preds.iter().map(|p| mapping[p]).collect())
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ari: f64,
    pub vser: f64,
    pub cvr: f64,
    pub n_selected: usize,
    pub n_clusters_nonempty: usize,
}

impl MetricsReport {
    /// Scores hard predictions and a feature selection against ground truth.
    ///
    /// When more clusters are used than there are classes, predictions are
    /// majority-mapped onto the classes before the ARI is taken.
    pub fn compute(labels: &[usize], preds: &[usize], clusters: usize, selection: &SelectionTruth) -> Result<Self> {
        let classes = labels.iter().collect::<BTreeSet<_>>().len();
        let ari = if clusters > classes {
            ari(labels, &majority_map(labels, preds)?)?
        } else {
            ari(labels, preds)?
        };
        Ok(MetricsReport {
            ari,
            vser: vser(selection),
            cvr: cvr(selection)?,
            n_selected: selection.selected.len(),
            n_clusters_nonempty: preds.iter().collect::<BTreeSet<_>>().len(),
        })
    }
}
