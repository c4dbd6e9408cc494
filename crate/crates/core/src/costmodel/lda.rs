//! Collapsed Gibbs sampling for LDA and fold-in inference of a single document.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Defaults to `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub inference_sweeps: usize,
}

impl LdaParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed,
            inference_sweeps: 50,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub n_terms: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub inference_sweeps: usize,
    pub seed: u64,
    /// Topic-word distributions, `k` rows of `n_terms` probabilities.
    pub phi: Vec<Vec<f64>>,
}

/// Result of inferring a document's dominant topic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicAssignment {
    Topic(usize),
    /// The document has no in-vocabulary token.
    Global,
}

#[derive(Clone, Debug)]
pub struct LdaFit {
    pub model: TopicModel,
    /// Per-document topic mixtures.
    pub theta: Vec<Vec<f64>>,
    pub doc_lengths: Vec<usize>,
}

/// `docs` hold vocabulary indices below `n_terms`.
pub fn fit_lda(docs: &[Vec<usize>], n_terms: usize, params: &LdaParams) -> Result<LdaFit> {
    let k = params.k;
    if k < 2 {
        return Err(validation(format!("LDA needs at least 2 topics, got {k}")));
    }
    let total: usize = docs.iter().map(Vec::len).sum();
    if total == 0 || n_terms == 0 {
        return Err(validation("LDA needs a nonempty corpus"));
    }
    if docs.iter().flatten().any(|&w| w >= n_terms) {
        return Err(validation("token index beyond vocabulary"));
    }
    let alpha = params.alpha();
    let beta = params.beta;
    let v_beta = n_terms as f64 * beta;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut n_dk = vec![vec![0u32; k]; docs.len()];
    let mut n_kw = vec![0u32; k * n_terms];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let t = rng.gen_range(0..k);
                    n_dk[d][t] += 1;
                    n_kw[t * n_terms + w] += 1;
                    n_k[t] += 1;
                    t
                })
                .collect()
        })
        .collect();

    let mut p = vec![0.0; k];
    for _ in 0..params.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (pos, &w) in doc.iter().enumerate() {
                let old = z[d][pos];
                n_dk[d][old] -= 1;
                n_kw[old * n_terms + w] -= 1;
                n_k[old] -= 1;

                let mut acc = 0.0;
                for t in 0..k {
                    acc += (n_dk[d][t] as f64 + alpha) * (n_kw[t * n_terms + w] as f64 + beta)
                        / (n_k[t] as f64 + v_beta);
                    p[t] = acc;
                }
                let new = sample_cumulative(&p, rng.gen::<f64>() * acc);

                z[d][pos] = new;
                n_dk[d][new] += 1;
                n_kw[new * n_terms + w] += 1;
                n_k[new] += 1;
            }
        }
    }

    let phi: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let row: Vec<f64> = (0..n_terms)
                .map(|w| (n_kw[t * n_terms + w] as f64 + beta) / (n_k[t] as f64 + v_beta))
                .collect();
            normalize(row)
        })
        .collect();
    let theta = docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let denom = doc.len() as f64 + k as f64 * alpha;
            (0..k).map(|t| (n_dk[d][t] as f64 + alpha) / denom).collect()
        })
        .collect();

    Ok(LdaFit {
        model: TopicModel {
            k,
            n_terms,
            alpha,
            beta,
            iterations: params.iterations,
            inference_sweeps: params.inference_sweeps,
            seed: params.seed,
            phi,
        },
        theta,
        doc_lengths: docs.iter().map(Vec::len).collect(),
    })
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    for x in &mut row {
        *x /= sum;
    }
    row
}

fn sample_cumulative(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

impl TopicModel {
    pub fn validate(&self) -> Result<()> {
        if self.phi.len() != self.k || self.phi.iter().any(|r| r.len() != self.n_terms) {
            return Err(Error::Model("topic-word matrix has the wrong shape".into()));
        }
        Ok(())
    }

    /// Fold-in Gibbs with `phi` held fixed. Topic counts are averaged over
    /// the second half of the sweeps; ties go to the lower topic index.
    pub fn infer_topic(&self, doc: &[usize]) -> TopicAssignment {
        let doc: Vec<usize> = doc.iter().copied().filter(|&w| w < self.n_terms).collect();
        if doc.is_empty() {
            return TopicAssignment::Global;
        }
        let k = self.k;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = doc
            .iter()
            .map(|_| {
                let t = rng.gen_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();
        let sweeps = self.inference_sweeps.max(1);
        let burn_in = sweeps / 2;
        let mut tally = vec![0u64; k];
        let mut p = vec![0.0; k];
        for sweep in 0..sweeps {
            for (pos, &w) in doc.iter().enumerate() {
                counts[z[pos]] -= 1;
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (counts[t] as f64 + self.alpha) * self.phi[t][w];
                    p[t] = acc;
                }
                let new = sample_cumulative(&p, rng.gen::<f64>() * acc);
                z[pos] = new;
                counts[new] += 1;
            }
            if sweep >= burn_in {
                for t in 0..k {
                    tally[t] += counts[t] as u64;
                }
            }
        }
        let mut best = 0;
        for t in 1..k {
            if tally[t] > tally[best] {
                best = t;
            }
        }
        TopicAssignment::Topic(best)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Ten docs over words 0..5, ten over words 5..10.
    pub(crate) fn two_cluster_corpus() -> Vec<Vec<usize>> {
        (0..20)
            .map(|d| {
                let base = if d < 10 { 0 } else { 5 };
                (0..12).map(|i| base + (d * 7 + i * 3) % 5).collect()
            })
            .collect()
    }

    fn quick(k: usize) -> LdaParams {
        LdaParams {
            iterations: 200,
            ..LdaParams::new(k, 7)
        }
    }

    #[test]
    fn disjoint_vocabularies_separate() {
        let docs = two_cluster_corpus();
        let fit = fit_lda(&docs, 10, &quick(2)).unwrap();
        let topics: Vec<TopicAssignment> = docs.iter().map(|d| fit.model.infer_topic(d)).collect();
        let first = topics[0];
        let second = topics[10];
        assert_ne!(first, second);
        let pure = topics[..10].iter().filter(|&&t| t == first).count()
            + topics[10..].iter().filter(|&&t| t == second).count();
        assert!(pure as f64 / 20.0 >= 0.9, "purity {pure}/20");
    }

    #[test]
    fn phi_rows_are_distributions() {
        let fit = fit_lda(&two_cluster_corpus(), 10, &quick(3)).unwrap();
        for row in &fit.model.phi {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
        for row in &fit.theta {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn preconditions() {
        assert!(fit_lda(&two_cluster_corpus(), 10, &quick(1)).is_err());
        assert!(fit_lda(&[vec![], vec![]], 10, &quick(2)).is_err());
        assert!(fit_lda(&[], 10, &quick(2)).is_err());
    }

    #[test]
    fn seeded_fits_repeat() {
        let a = fit_lda(&two_cluster_corpus(), 10, &quick(2)).unwrap();
        let b = fit_lda(&two_cluster_corpus(), 10, &quick(2)).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn inference_edge_cases() {
        let docs = two_cluster_corpus();
        let fit = fit_lda(&docs, 10, &quick(2)).unwrap();
        assert_eq!(fit.model.infer_topic(&[]), TopicAssignment::Global);
        assert_eq!(fit.model.infer_topic(&docs[3]), fit.model.infer_topic(&docs[3]));
        let training_topic = fit.theta[12]
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (t, &x)| if x > b.1 { (t, x) } else { b })
            .0;
        assert_eq!(fit.model.infer_topic(&docs[12]), TopicAssignment::Topic(training_topic));
    }
}
