//! Fixing-cost estimation: topic of each bug, per-developer mean fixing
//! days per topic, and collaborative filling of the cells a developer never
//! observed.

mod arun;
mod lda;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::DevId;
use crate::error::{validation, Result};

pub use arun::{arun_measure, select_topic_count, TopicCountChoice};
pub use lda::{fit_lda, LdaFit, LdaParams, TopicAssignment, TopicModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Observed,
    Cf,
    TopicMean,
    GlobalMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCell {
    pub days: Option<f64>,
    pub provenance: Option<Provenance>,
}

impl CostCell {
    const MISSING: CostCell = CostCell {
        days: None,
        provenance: None,
    };
}

/// Developer x topic matrix of mean fixing days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub developers: Vec<DevId>,
    pub n_topics: usize,
    /// One row per developer, `n_topics` cells each.
    pub cells: Vec<Vec<CostCell>>,
    /// Mean of the observed cells; the cost of a bug with no inferable topic.
    pub global_mean: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostObservation {
    pub dev: DevId,
    pub topic: TopicAssignment,
    pub days: f64,
}

impl CostMatrix {
    pub fn row_of(&self, dev: DevId) -> Option<usize> {
        self.developers.binary_search(&dev).ok()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().flatten().all(|c| c.days.is_some())
    }

    /// Estimated days for `dev` on a bug of `topic`. `None` for an unknown
    /// developer or a missing cell.
    pub fn cost(&self, dev: DevId, topic: TopicAssignment) -> Option<f64> {
        let row = self.row_of(dev)?;
        match topic {
            TopicAssignment::Global => Some(self.global_mean),
            TopicAssignment::Topic(k) => self.cells[row].get(k)?.days,
        }
    }

    fn observed(&self, row: usize, k: usize) -> Option<f64> {
        let c = self.cells[row][k];
        (c.provenance == Some(Provenance::Observed)).then_some(c.days).flatten()
    }
}

/// Observed cells are arithmetic means of each developer's fixing days on
/// that topic. Observations with a [`TopicAssignment::Global`] topic or an
/// unknown developer only count toward nothing.
pub fn build_cost_matrix(
    observations: &[CostObservation],
    developers: &[DevId],
    n_topics: usize,
) -> CostMatrix {
    let mut developers = developers.to_vec();
    developers.sort_unstable();
    developers.dedup();
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for o in observations {
        let (Ok(row), TopicAssignment::Topic(k)) = (developers.binary_search(&o.dev), o.topic) else {
            continue;
        };
        if k >= n_topics {
            continue;
        }
        let e = sums.entry((row, k)).or_default();
        e.0 += o.days;
        e.1 += 1;
    }
    let mut cells = vec![vec![CostCell::MISSING; n_topics]; developers.len()];
    for (&(row, k), &(sum, n)) in &sums {
        cells[row][k] = CostCell {
            days: Some(sum / n as f64),
            provenance: Some(Provenance::Observed),
        };
    }
    let observed: Vec<f64> = cells.iter().flatten().filter_map(|c| c.days).collect();
    let global_mean = if observed.is_empty() {
        0.0
    } else {
        observed.iter().sum::<f64>() / observed.len() as f64
    };
    CostMatrix {
        developers,
        n_topics,
        cells,
        global_mean,
    }
}

/// Cosine similarity of two developers over the topics both observed.
fn similarity(m: &CostMatrix, a: usize, b: usize) -> Option<f64> {
    let (mut dot, mut na, mut nb, mut shared) = (0.0, 0.0, 0.0, 0);
    for k in 0..m.n_topics {
        if let (Some(x), Some(y)) = (m.observed(a, k), m.observed(b, k)) {
            dot += x * y;
            na += x * x;
            nb += y * y;
            shared += 1;
        }
    }
    if shared == 0 || na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na.sqrt() * nb.sqrt()))
}

/// Fills every missing cell by user-based collaborative filtering:
/// the similarity-weighted mean of other developers' observed values on
/// that topic. Falls back to the topic's observed mean, then to the global
/// observed mean.
pub fn fill_missing_cf(matrix: &CostMatrix) -> Result<CostMatrix> {
    let n_dev = matrix.developers.len();
    let observed: Vec<f64> = (0..n_dev)
        .flat_map(|r| (0..matrix.n_topics).filter_map(move |k| matrix.observed(r, k)))
        .collect();
    if observed.is_empty() {
        return Err(validation("cost matrix has no observed cell to fill from"));
    }
    let global_mean = observed.iter().sum::<f64>() / observed.len() as f64;

    let sims: Vec<Vec<Option<f64>>> = (0..n_dev)
        .map(|a| (0..n_dev).map(|b| if a == b { None } else { similarity(matrix, a, b) }).collect())
        .collect();

    let mut filled = matrix.clone();
    filled.global_mean = global_mean;
    for row in 0..n_dev {
        for k in 0..matrix.n_topics {
            if matrix.observed(row, k).is_some() {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for other in 0..n_dev {
                if let (Some(s), Some(v)) = (sims[row][other], matrix.observed(other, k)) {
                    if s > 0.0 {
                        num += s * v;
                        den += s;
                    }
                }
            }
            let column: Vec<f64> = (0..n_dev).filter_map(|r| matrix.observed(r, k)).collect();
            filled.cells[row][k] = if den > 0.0 {
                CostCell {
                    days: Some(num / den),
                    provenance: Some(Provenance::Cf),
                }
            } else if !column.is_empty() {
                CostCell {
                    days: Some(column.iter().sum::<f64>() / column.len() as f64),
                    provenance: Some(Provenance::TopicMean),
                }
            } else {
                CostCell {
                    days: Some(global_mean),
                    provenance: Some(Provenance::GlobalMean),
                }
            };
        }
    }
    Ok(filled)
}
