use std::path::PathBuf;

use bugtriage::corpus::{load_events, write_events};
use bugtriage::solver::{solve_dabt, AssignmentInstance};
use bugtriage::synth::{generate, SynthParams};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn mini_corpus_matches_the_generator() {
    let mut expected = Vec::new();
    write_events(&generate(&SynthParams::default()), &mut expected).unwrap();
    let on_disk = std::fs::read(data("mini_corpus.jsonl")).unwrap();
    assert!(on_disk == expected, "data/mini_corpus.jsonl is stale; regenerate it");
}

#[test]
fn mini_corpus_loads() {
    let records = load_events(data("mini_corpus.jsonl")).unwrap();
    assert_eq!(records.len(), 535);
    assert!(records.windows(2).all(|w| (w[0].reported_at, w[0].bug_id) <= (w[1].reported_at, w[1].bug_id)));
}

#[test]
fn one_bug_instance_solves_to_one() {
    let text = std::fs::read_to_string(data("one_bug_instance.json")).unwrap();
    let instance: AssignmentInstance = serde_json::from_str(&text).unwrap();
    let solution = solve_dabt(&instance).unwrap();
    assert_eq!(solution.objective_value, 1.0);
    assert_eq!(solution.assignments.len(), 1);
}
