//! Stage plumbing from raw records to a finished policy run.
//!
//! `prepare` cleans and splits, `train` fits the text classifier, the topic
//! model and the cost matrix on the training phase, `estimate` scores the
//! test bugs, and `simulate` replays one policy. Every trained artifact is
//! a JSON file so stages can run as separate processes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{clean_bugs, BugRecord, CleaningRules, Cleaned, Day, DevId, DeveloperProfile};
use crate::costmodel::{
    build_cost_matrix, fill_missing_cf, fit_lda, select_topic_count, CostMatrix, CostObservation, LdaParams,
    TopicModel,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_report, MetricsReport};
use crate::policies::{BugEstimate, Estimates, PolicyKind};
use crate::simulator::{run_simulation, Scenario, SimConfig, SimOutput};
use crate::solver::PrecedenceMode;
use crate::suitability::{predict_suitability, train_classifier, LinearModel, SvmParams};
use crate::textprep::{build_vocabulary, preprocess_text, tfidf_transform, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub boundary_day: Day,
    pub policy: PolicyKind,
    pub alpha: f64,
    pub seed: u64,
    /// Replaces the horizon derived from training fixing times.
    pub horizon: Option<f64>,
    pub topic_grid: Vec<usize>,
    pub svm_c: f64,
    pub svm_epochs: usize,
    pub lda_iterations: usize,
    pub min_df: usize,
    pub precedence_mode: PrecedenceMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            boundary_day: 0,
            policy: PolicyKind::Dabt,
            alpha: 0.5,
            seed: 0,
            horizon: None,
            topic_grid: (1..=10).map(|i| 5 * i).collect(),
            svm_c: 1000.0,
            svm_epochs: 50,
            lda_iterations: 1000,
            min_df: 2,
            precedence_mode: PrecedenceMode::SameDeveloper,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Validation(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if let Some(l) = self.horizon {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Validation(format!("horizon {l} must be positive")));
            }
        }
        if self.topic_grid.iter().any(|&k| k < 2) || self.topic_grid.is_empty() {
            return Err(Error::Validation("topic grid needs candidates of at least 2".into()));
        }
        if self.svm_c.is_nan() || self.svm_c <= 0.0 {
            return Err(Error::Validation(format!("C {} must be positive", self.svm_c)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub cleaned: Cleaned,
    pub train: Vec<BugRecord>,
    pub test: Vec<BugRecord>,
    pub horizon: f64,
}

pub fn prepare(records: &[BugRecord], config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    let cleaned = clean_bugs(records, &CleaningRules::new(config.boundary_day));
    let (train, test): (Vec<_>, Vec<_>) = cleaned
        .kept
        .iter()
        .cloned()
        .partition(|r| r.reported_at <= config.boundary_day);
    let horizon = match config.horizon {
        Some(l) => l,
        None => cleaned
            .summary
            .horizon_days
            .ok_or_else(|| Error::Validation("no training bug survives cleaning; cannot derive the horizon".into()))?,
    };
    Ok(Prepared {
        cleaned,
        train,
        test,
        horizon,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSelection {
    pub k: usize,
    pub measures: Vec<(usize, f64)>,
}

/// Everything fitted on the training phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub developers: Vec<DevId>,
    pub vocabulary: Vocabulary,
    pub classifier: LinearModel,
    pub topics: TopicModel,
    pub topic_selection: TopicSelection,
    pub costs: CostMatrix,
}

pub fn train(prepared: &Prepared, config: &PipelineConfig) -> Result<Models> {
    config.validate()?;
    let developers: Vec<DevId> = prepared.cleaned.summary.active_developers.clone();
    let tokens: Vec<Vec<String>> = prepared
        .train
        .iter()
        .map(|r| preprocess_text(&r.summary, &r.description))
        .collect();
    let docs: Vec<_> = prepared
        .train
        .iter()
        .zip(&tokens)
        .map(|(r, t)| crate::textprep::TokenizedDoc {
            bug_id: r.bug_id,
            tokens: t.clone(),
        })
        .collect();
    let vocabulary = build_vocabulary(&docs, config.min_df)?;

    let pairs: Vec<_> = prepared
        .train
        .iter()
        .zip(&tokens)
        .filter_map(|(r, t)| Some((tfidf_transform(t, &vocabulary), r.actual_assignee?)))
        .collect();
    let classifier = train_classifier(
        &pairs,
        vocabulary.len(),
        &SvmParams {
            c: config.svm_c,
            epochs: config.svm_epochs,
            seed: config.seed,
        },
    )?;

    let encoded: Vec<Vec<usize>> = tokens.iter().map(|t| vocabulary.encode(t)).collect();
    let template = LdaParams {
        iterations: config.lda_iterations,
        ..LdaParams::new(2, config.seed)
    };
    let choice = select_topic_count(&encoded, vocabulary.len(), &config.topic_grid, &template)?;
    let topics = fit_lda(
        &encoded,
        vocabulary.len(),
        &LdaParams {
            k: choice.k,
            ..template
        },
    )?
    .model;

    let observations = cost_observations(&prepared.train, &vocabulary, &topics);
    let costs = fill_missing_cf(&build_cost_matrix(&observations, &developers, topics.k))?;

    Ok(Models {
        developers,
        vocabulary,
        classifier,
        topics,
        topic_selection: TopicSelection {
            k: choice.k,
            measures: choice.measures,
        },
        costs,
    })
}

/// One observed fixing time per resolved bug, under the bug's inferred topic.
pub fn cost_observations(bugs: &[BugRecord], vocabulary: &Vocabulary, topics: &TopicModel) -> Vec<CostObservation> {
    bugs.iter()
        .filter_map(|r| {
            let doc = vocabulary.encode(&preprocess_text(&r.summary, &r.description));
            Some(CostObservation {
                dev: r.actual_assignee?,
                topic: topics.infer_topic(&doc),
                days: r.fixing_time()? as f64,
            })
        })
        .collect()
}

/// Suitability row, topic and per-developer cost for each bug.
pub fn estimate(models: &Models, bugs: &[BugRecord]) -> Result<Estimates> {
    let mut out = BTreeMap::new();
    for r in bugs {
        let tokens = preprocess_text(&r.summary, &r.description);
        let x = tfidf_transform(&tokens, &models.vocabulary);
        let suitability = predict_suitability(&models.classifier, r.bug_id, &x, &models.developers)?;
        let topic = models.topics.infer_topic(&models.vocabulary.encode(&tokens));
        let cost = models
            .developers
            .iter()
            .map(|&d| {
                models
                    .costs
                    .cost(d, topic)
                    .map(|c| (d, c))
                    .ok_or_else(|| Error::Model(format!("cost matrix has no cell for developer {d}")))
            })
            .collect::<Result<_>>()?;
        out.insert(
            r.bug_id,
            BugEstimate {
                suitability,
                topic,
                cost,
            },
        );
    }
    Ok(out)
}

pub fn scenario(records: &[BugRecord], prepared: &Prepared) -> Scenario {
    Scenario {
        records: records.to_vec(),
        managed: prepared.test.iter().map(|r| r.bug_id).collect(),
        developers: prepared.cleaned.summary.active_developers.clone(),
        boundary_day: prepared.cleaned.summary.boundary_day,
        end_day: prepared.cleaned.summary.last_day,
    }
}

/// A prepared dataset with trained models and test-bug estimates, ready to
/// replay any policy.
#[derive(Clone, Debug)]
pub struct Workbench {
    pub prepared: Prepared,
    pub models: Models,
    pub estimates: Estimates,
    pub scenario: Scenario,
}

impl Workbench {
    pub fn build(records: &[BugRecord], config: &PipelineConfig) -> Result<Self> {
        let prepared = prepare(records, config)?;
        let models = train(&prepared, config)?;
        Self::from_parts(records, prepared, models)
    }

    pub fn from_parts(records: &[BugRecord], prepared: Prepared, models: Models) -> Result<Self> {
        let estimates = estimate(&models, &prepared.test)?;
        let scenario = scenario(records, &prepared);
        Ok(Self {
            prepared,
            models,
            estimates,
            scenario,
        })
    }

    pub fn profiles(&self) -> Vec<DeveloperProfile> {
        self.prepared.cleaned.active_profiles()
    }

    pub fn simulate(&self, policy: PolicyKind, alpha: f64, precedence_mode: PrecedenceMode) -> Result<SimOutput> {
        let config = SimConfig {
            policy,
            alpha,
            horizon: self.prepared.horizon,
            precedence_mode,
        };
        run_simulation(&config, &self.scenario, &self.estimates)
    }

    pub fn report(&self, run: &SimOutput) -> MetricsReport {
        compute_report(&run.meta, &run.outcomes, &run.samples, &self.profiles())
    }
}

pub const VOCABULARY_FILE: &str = "vocabulary.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const TOPIC_MODEL_FILE: &str = "topic_model.json";
pub const TOPIC_SELECTION_FILE: &str = "topic_selection.json";
pub const COST_MATRIX_FILE: &str = "cost_matrix.json";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
struct CostFile {
    developers: Vec<DevId>,
    matrix: CostMatrix,
}

impl Models {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(VOCABULARY_FILE), &self.vocabulary)?;
        write_json(&dir.join(CLASSIFIER_FILE), &self.classifier)?;
        write_json(&dir.join(TOPIC_MODEL_FILE), &self.topics)?;
        write_json(&dir.join(TOPIC_SELECTION_FILE), &self.topic_selection)?;
        write_json(
            &dir.join(COST_MATRIX_FILE),
            &CostFile {
                developers: self.developers.clone(),
                matrix: self.costs.clone(),
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let vocabulary = read_json(&dir.join(VOCABULARY_FILE))?;
        let classifier = LinearModel::from_json(&fs::read_to_string(dir.join(CLASSIFIER_FILE))?)?;
        let topics: TopicModel = read_json(&dir.join(TOPIC_MODEL_FILE))?;
        topics.validate()?;
        let topic_selection = read_json(&dir.join(TOPIC_SELECTION_FILE))?;
        let cost: CostFile = read_json(&dir.join(COST_MATRIX_FILE))?;
        if !cost.matrix.is_complete() || cost.matrix.n_topics != topics.k {
            return Err(Error::Model("cost matrix does not match the topic model".into()));
        }
        Ok(Self {
            developers: cost.developers,
            vocabulary,
            classifier,
            topics,
            topic_selection,
            costs: cost.matrix,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthParams};

    fn small() -> (Vec<BugRecord>, PipelineConfig) {
        let params = SynthParams {
            n_bugs: 160,
            ..SynthParams::default()
        };
        let records = generate(&params);
        let config = PipelineConfig {
            boundary_day: params.boundary_day(),
            topic_grid: vec![4, 6],
            lda_iterations: 60,
            svm_epochs: 10,
            ..PipelineConfig::default()
        };
        (records, config)
    }

    #[test]
    fn artifacts_round_trip() {
        let (records, config) = small();
        let bench = Workbench::build(&records, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bench.models.save(dir.path()).unwrap();
        let loaded = Models::load(dir.path()).unwrap();
        assert_eq!(loaded, bench.models);
        let again = estimate(&loaded, &bench.prepared.test).unwrap();
        assert_eq!(again, bench.estimates);
    }

    #[test]
    fn bad_config_rejected() {
        let (records, mut config) = small();
        config.alpha = 2.0;
        assert!(prepare(&records, &config).is_err());
        config.alpha = 0.5;
        config.topic_grid = vec![1];
        assert!(prepare(&records, &config).is_err());
    }
}
