//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bugtriage::solver::{InstanceBug, InstanceDeveloper};
use bugtriage::synth::{generate, SynthParams};
use bugtriage::{AssignmentInstance, BugId, BugRecord, DevId, PipelineConfig, PrecedenceMode};

/// Random daily instance with roughly one blocker arc per five bug pairs
/// and capacities that fit about half the work.
pub fn random_instance(seed: u64, n_bugs: usize, n_devs: usize) -> AssignmentInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bugs: Vec<InstanceBug> = (0..n_bugs)
        .map(|i| {
            let mut suitability: Vec<f64> = (0..n_devs).map(|_| rng.gen_range(0.0..1.0)).collect();
            suitability[rng.gen_range(0..n_devs)] = 1.0;
            InstanceBug {
                bug_id: BugId(i as u64 + 1),
                suitability,
                cost: (0..n_devs).map(|_| rng.gen_range(0.5..10.0)).collect(),
            }
        })
        .collect();
    let mut precedence = Vec::new();
    for i in 0..n_bugs {
        for j in i + 1..n_bugs {
            if rng.gen_bool(0.05) {
                precedence.push((BugId(i as u64 + 1), BugId(j as u64 + 1)));
            }
        }
    }
    let total: f64 = bugs.iter().map(|b| b.cost.iter().sum::<f64>() / n_devs as f64).sum();
    let developers = (0..n_devs)
        .map(|d| InstanceDeveloper {
            dev_id: DevId(d as u32 + 1),
            capacity: total / (2.0 * n_devs as f64) * rng.gen_range(0.5..1.5),
        })
        .collect();
    AssignmentInstance {
        alpha: 0.5,
        developers,
        bugs,
        precedence,
        precedence_mode: PrecedenceMode::SameDeveloper,
    }
}

/// A small synthetic history with a config cheap enough to train repeatedly.
pub fn small_corpus(n_bugs: usize) -> (Vec<BugRecord>, PipelineConfig) {
    let params = SynthParams {
        n_bugs,
        ..SynthParams::default()
    };
    let config = PipelineConfig {
        boundary_day: params.boundary_day(),
        topic_grid: vec![5, 10],
        lda_iterations: 100,
        svm_epochs: 20,
        ..PipelineConfig::default()
    };
    (generate(&params), config)
}
