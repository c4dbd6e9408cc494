//! One-vs-rest linear SVM over TF-IDF vectors and per-bug suitability rows.
//!
//! Each binary problem is solved in the dual by coordinate descent on the
//! hinge loss with box constraint `0 <= a_i <= C` (the liblinear L1-loss
//! scheme). The bias is an extra constant feature. The visiting order is a
//! seeded shuffle per epoch and the epoch count is fixed, so identical input
//! gives identical weights.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BugId, DevId};
use crate::error::{validation, Error, Result};
use crate::textprep::TfidfVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1000.0,
            epochs: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeveloperWeights {
    pub dev_id: DevId,
    pub bias: f64,
    /// Nonzero weights only, sorted by term index.
    pub weights: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub params: SvmParams,
    pub n_features: usize,
    pub developers: Vec<DeveloperWeights>,
    #[serde(skip)]
    dense: Vec<Vec<f64>>,
}

impl LinearModel {
    fn densify(&mut self) {
        self.dense = self
            .developers
            .iter()
            .map(|d| {
                let mut w = vec![0.0; self.n_features];
                for &(i, v) in &d.weights {
                    w[i] = v;
                }
                w
            })
            .collect();
    }

    /// Rebuilds lookup tables after deserialization.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: LinearModel = serde_json::from_str(text)?;
        if m
            .developers
            .iter()
            .flat_map(|d| &d.weights)
            .any(|&(i, w)| i >= m.n_features || !w.is_finite())
        {
            return Err(Error::Model("classifier weights out of range".into()));
        }
        m.densify();
        Ok(m)
    }

    pub fn labels(&self) -> Vec<DevId> {
        self.developers.iter().map(|d| d.dev_id).collect()
    }

    /// Raw margin `w_d . x + b_d` for every trained developer.
    pub fn decision_values(&self, x: &TfidfVector) -> BTreeMap<DevId, f64> {
        self.developers
            .iter()
            .zip(&self.dense)
            .map(|(d, w)| {
                let margin: f64 = x
                    .entries
                    .iter()
                    .filter(|(i, _)| *i < w.len())
                    .map(|&(i, v)| v * w[i])
                    .sum();
                (d.dev_id, margin + d.bias)
            })
            .collect()
    }

    /// Developer with the largest margin; ties go to the smallest id.
    pub fn predict(&self, x: &TfidfVector) -> Option<DevId> {
        argmax_by_dev(&self.decision_values(x))
    }
}

pub(crate) fn argmax_by_dev(values: &BTreeMap<DevId, f64>) -> Option<DevId> {
    let mut best: Option<(DevId, f64)> = None;
    for (&d, &v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((d, v));
        }
    }
    best.map(|(d, _)| d)
}

pub fn train_classifier(
    pairs: &[(TfidfVector, DevId)],
    n_features: usize,
    params: &SvmParams,
) -> Result<LinearModel> {
    let labels: BTreeSet<DevId> = pairs.iter().map(|(_, d)| *d).collect();
    if labels.len() < 2 {
        return Err(validation(format!(
            "classifier needs at least two developer labels, got {}",
            labels.len()
        )));
    }
    if params.c <= 0.0 || !params.c.is_finite() {
        return Err(validation(format!("C must be positive, got {}", params.c)));
    }
    if let Some((v, _)) = pairs
        .iter()
        .find(|(v, _)| v.entries.iter().any(|&(i, _)| i >= n_features))
    {
        return Err(validation(format!(
            "feature index beyond vocabulary size {n_features}: {:?}",
            v.entries.last()
        )));
    }

    // ||x||^2 including the constant bias feature.
    let sq_norms: Vec<f64> = pairs.iter().map(|(x, _)| x.norm().powi(2) + 1.0).collect();

    let developers = labels
        .iter()
        .enumerate()
        .map(|(k, &dev)| {
            let y: Vec<f64> = pairs
                .iter()
                .map(|(_, d)| if *d == dev { 1.0 } else { -1.0 })
                .collect();
            let seed = params.seed.wrapping_add(k as u64);
            let (weights, bias) = dual_cd(pairs, &y, &sq_norms, n_features, params.c, params.epochs, seed);
            DeveloperWeights {
                dev_id: dev,
                bias,
                weights: weights
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| *w != 0.0)
                    .collect(),
            }
        })
        .collect();

    let mut model = LinearModel {
        params: params.clone(),
        n_features,
        developers,
        dense: vec![],
    };
    model.densify();
    Ok(model)
}

fn dual_cd(
    pairs: &[(TfidfVector, DevId)],
    y: &[f64],
    sq_norms: &[f64],
    n_features: usize,
    c: f64,
    epochs: usize,
    seed: u64,
) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; n_features];
    let mut b = 0.0;
    let mut alpha = vec![0.0; pairs.len()];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &pairs[i].0;
            let grad = y[i] * (x.dot(&w) + b) - 1.0;
            let projected = if alpha[i] == 0.0 {
                grad.min(0.0)
            } else if alpha[i] == c {
                grad.max(0.0)
            } else {
                grad
            };
            if projected == 0.0 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - grad / sq_norms[i]).clamp(0.0, c);
            let step = (alpha[i] - old) * y[i];
            for &(j, v) in &x.entries {
                w[j] += step * v;
            }
            b += step;
        }
    }
    (w, b)
}

/// Min-max normalized decision values for one bug; every value lies in
/// `[0, 1]` and the row maximum is exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityRow {
    pub bug_id: BugId,
    pub s: BTreeMap<DevId, f64>,
}

impl SuitabilityRow {
    pub fn from_decisions(bug_id: BugId, decisions: &BTreeMap<DevId, f64>) -> Result<Self> {
        if decisions.is_empty() {
            return Err(validation("suitability row needs at least one developer"));
        }
        let lo = decisions.values().copied().fold(f64::INFINITY, f64::min);
        let hi = decisions.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let s = decisions
            .iter()
            .map(|(&d, &v)| {
                let norm = if span > 0.0 { (v - lo) / span } else { 1.0 };
                (d, norm)
            })
            .collect();
        Ok(Self { bug_id, s })
    }

    pub fn best(&self) -> Option<DevId> {
        argmax_by_dev(&self.s)
    }
}

/// Suitability of `developers` for one bug. Developers without a trained
/// weight vector get the lowest observed margin.
pub fn predict_suitability(
    model: &LinearModel,
    bug_id: BugId,
    doc: &TfidfVector,
    developers: &[DevId],
) -> Result<SuitabilityRow> {
    if developers.is_empty() {
        return Err(validation("empty developer set"));
    }
    let raw = model.decision_values(doc);
    let floor = raw.values().copied().fold(f64::INFINITY, f64::min);
    let decisions: BTreeMap<DevId, f64> = developers
        .iter()
        .map(|d| (*d, raw.get(d).copied().unwrap_or(floor)))
        .collect();
    SuitabilityRow::from_decisions(bug_id, &decisions)
}
