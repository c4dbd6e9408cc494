//! Topic-count selection by Arun's symmetric KL divergence.
//!
//! For a fitted model, `cm1` is the descending singular-value spectrum of the
//! topic-word matrix and `cm2` the document-length-weighted topic mixture
//! `L . theta`, sorted descending. Both are normalized to sum to one and the
//! measure is `KL(cm1 || cm2) + KL(cm2 || cm1)`. Lower is better.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::lda::{fit_lda, LdaFit, LdaParams};
use crate::error::{validation, Result};

const FLOOR: f64 = 1e-12;

pub fn arun_measure(fit: &LdaFit) -> f64 {
    let k = fit.model.k;
    let v = fit.model.n_terms;
    let phi = DMatrix::from_fn(k, v, |r, c| fit.model.phi[r][c]);
    let mut cm1: Vec<f64> = phi.singular_values().iter().copied().collect();
    cm1.resize(k, 0.0);

    let mut cm2 = vec![0.0; k];
    for (theta, &len) in fit.theta.iter().zip(&fit.doc_lengths) {
        for (acc, p) in cm2.iter_mut().zip(theta) {
            *acc += len as f64 * p;
        }
    }
    symmetric_kl(&to_distribution(cm1), &to_distribution(cm2))
}

fn to_distribution(mut x: Vec<f64>) -> Vec<f64> {
    x.sort_by(|a, b| b.total_cmp(a));
    let sum: f64 = x.iter().sum();
    x.iter().map(|v| (v / sum).max(FLOOR)).collect()
}

fn symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| a * (a / b).ln() + b * (b / a).ln())
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopicCountChoice {
    pub k: usize,
    /// `(k, measure)` for every candidate, ascending in `k`.
    pub measures: Vec<(usize, f64)>,
}

/// Fits one model per candidate (in parallel) and keeps the `k` with the
/// smallest measure; ties resolve to the smaller `k`.
pub fn select_topic_count(
    docs: &[Vec<usize>],
    n_terms: usize,
    candidates: &[usize],
    template: &LdaParams,
) -> Result<TopicCountChoice> {
    let mut grid = candidates.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(validation("topic-count grid is empty"));
    }
    let measures: Vec<(usize, f64)> = grid
        .par_iter()
        .map(|&k| {
            let params = LdaParams {
                k,
                ..template.clone()
            };
            fit_lda(docs, n_terms, &params).map(|fit| (k, arun_measure(&fit)))
        })
        .collect::<Result<_>>()?;
    Ok(TopicCountChoice {
        k: smallest_measure(&measures),
        measures,
    })
}

/// `measures` ascending in `k`; the first minimum wins.
fn smallest_measure(measures: &[(usize, f64)]) -> usize {
    let mut best = measures[0];
    for &(k, m) in &measures[1..] {
        if m < best.1 {
            best = (k, m);
        }
    }
    best.0
}
