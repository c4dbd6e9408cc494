use bugtriage::metrics::{compare_policies, sweep_alpha};
use bugtriage::pipeline::{Models, Workbench};
use bugtriage::synth::{generate, SynthParams};
use bugtriage::{PipelineConfig, PolicyKind, PrecedenceMode};

fn small() -> (Vec<bugtriage::BugRecord>, PipelineConfig) {
    let params = SynthParams {
        n_bugs: 200,
        seed: 11,
        ..SynthParams::default()
    };
    let config = PipelineConfig {
        boundary_day: params.boundary_day(),
        topic_grid: vec![3, 5],
        lda_iterations: 80,
        svm_epochs: 15,
        ..PipelineConfig::default()
    };
    (generate(&params), config)
}

#[test]
fn every_policy_handles_every_managed_bug_once() {
    let (records, config) = small();
    let bench = Workbench::build(&records, &config).unwrap();
    let managed = bench.scenario.managed.len();
    assert!(managed > 0);
    let mut reports = Vec::new();
    for policy in PolicyKind::ALL {
        let run = bench.simulate(policy, 0.5, PrecedenceMode::SameDeveloper).unwrap();
        let mut ids: Vec<_> = run.outcomes.iter().map(|o| o.bug_id).collect();
        ids.dedup();
        assert_eq!(ids.len(), run.outcomes.len(), "{policy} assigned a bug twice");
        assert!(ids.iter().all(|id| bench.scenario.managed.contains(id)));
        let report = bench.report(&run);
        assert_eq!(report.n_assigned + report.n_unassigned, managed, "{policy}");
        reports.push((policy.name().to_string(), report));
    }
    let table = compare_policies(&reports);
    assert_eq!(table.columns.len(), 5);
    assert!(table.rows.iter().all(|r| r.best != Some(0)));
}

#[test]
fn reloaded_models_give_identical_runs() {
    let (records, config) = small();
    let bench = Workbench::build(&records, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bench.models.save(dir.path()).unwrap();
    let models = Models::load(dir.path()).unwrap();
    let reloaded = Workbench::from_parts(&records, bench.prepared.clone(), models).unwrap();
    assert_eq!(reloaded.estimates, bench.estimates);
    let a = bench.simulate(PolicyKind::Dabt, 0.5, PrecedenceMode::SameDeveloper).unwrap();
    let b = reloaded.simulate(PolicyKind::Dabt, 0.5, PrecedenceMode::SameDeveloper).unwrap();
    assert_eq!(a.outcomes, b.outcomes);
}

#[test]
fn sweep_covers_sorted_unique_alphas() {
    let (records, config) = small();
    let bench = Workbench::build(&records, &config).unwrap();
    let points = sweep_alpha(&[1.0, 0.0, 0.5, 0.0], |alpha| {
        let run = bench.simulate(PolicyKind::Dabt, alpha, PrecedenceMode::SameDeveloper)?;
        Ok(bench.report(&run))
    })
    .unwrap();
    let alphas: Vec<f64> = points.iter().map(|p| p.alpha).collect();
    assert_eq!(alphas, vec![0.0, 0.5, 1.0]);
}
