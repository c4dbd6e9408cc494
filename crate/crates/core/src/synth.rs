//! Seeded generator for small bug histories with planted structure.
//!
//! The history has eight regular developers and a crowd of occasional
//! contributors with one or two fixes each, which the activity rule
//! filters out. Six components of skewed popularity each have an owner
//! who takes most of its bugs and two secondaries who take the rest.
//! Bug text mixes the component's vocabulary, a few words tied to the
//! developer who fixed it, and generic filler. Fixing times scale with a
//! per-component base and a per-developer speed. A fraction of bugs is
//! blocked by an earlier, still-open bug of the same component on the day
//! it is reported. Duplicates, undated assignments and slow outliers are
//! sprinkled in for the cleaning filters to remove.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{BugId, BugRecord, Day, DependencyEvent, DependencyKind, DevId, FinalStatus};

const COMPONENTS: [&str; 6] = ["Editor", "Debugger", "Build", "Workbench", "Network", "Storage"];

const COMPONENT_WORDS: [&[&str]; 6] = [
    &[
        "editor", "cursor", "caret", "syntax", "highlight", "indent", "selection", "paste", "undo",
        "folding", "gutter", "keystroke",
    ],
    &[
        "debugger", "breakpoint", "stack", "frame", "variable", "watch", "step", "thread", "suspend",
        "inspect", "launch", "console",
    ],
    &[
        "build", "compiler", "classpath", "linker", "artifact", "dependency", "maven", "gradle",
        "incremental", "target", "manifest", "jar",
    ],
    &[
        "workbench", "perspective", "toolbar", "menu", "dialog", "wizard", "preference", "theme",
        "layout", "icon", "shortcut", "tab",
    ],
    &[
        "network", "socket", "proxy", "timeout", "certificate", "handshake", "download", "http",
        "latency", "packet", "server", "request",
    ],
    &[
        "storage", "database", "index", "cache", "query", "transaction", "schema", "disk", "backup",
        "commit", "table", "journal",
    ],
];

const DEVELOPER_WORDS: [&[&str]; 8] = [
    &["renderer", "glyph", "font", "kerning", "ligature"],
    &["evaluator", "expression", "hover", "tooltip", "inline"],
    &["resolver", "plugin", "bundle", "version", "mirror"],
    &["docking", "splitter", "viewport", "scrollbar", "zoom"],
    &["tunnel", "redirect", "cookie", "header", "encoding"],
    &["lock", "deadlock", "migration", "replica", "snapshot"],
    &["accessibility", "screenreader", "contrast", "keyboard", "focus"],
    &["telemetry", "metric", "profiler", "trace", "sampling"],
];

const GENERIC_WORDS: &[&str] = &[
    "error", "crash", "exception", "fails", "broken", "wrong", "slow", "hang", "unexpected",
    "missing", "issue", "problem", "regression", "incorrect", "invalid", "window", "file", "user",
    "open", "save", "click", "update", "load", "display",
];

/// `(owner, [secondary, secondary])`, developers numbered from 1.
const STAFFING: [(u32, [u32; 2]); 6] = [(1, [2, 7]), (2, [3, 8]), (3, [4, 1]), (4, [5, 6]), (5, [6, 8]), (6, [7, 2])];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub seed: u64,
    pub n_bugs: usize,
    pub span_days: Day,
    /// Relative report frequency of each component.
    pub component_weights: [f64; 6],
    /// Median fixing days of each component.
    pub component_days: [f64; 6],
    /// Fixing-time multiplier of each regular developer.
    pub developer_speed: [f64; 8],
    /// Share of a component's bugs fixed by its owner.
    pub owner_share: f64,
    /// Spread of the log-normal noise on fixing times.
    pub fix_sigma: f64,
    /// Occasional contributors, each with one or two training-phase fixes.
    pub occasional_developers: u32,
    pub dependency_rate: f64,
    pub duplicate_rate: f64,
    pub undated_rate: f64,
    pub outlier_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 7,
            n_bugs: 500,
            span_days: 730,
            component_weights: [0.30, 0.22, 0.16, 0.12, 0.11, 0.09],
            component_days: [4.0, 5.0, 3.0, 5.0, 4.0, 6.0],
            developer_speed: [1.4, 1.3, 1.0, 0.9, 1.0, 0.8, 0.7, 0.8],
            owner_share: 0.7,
            fix_sigma: 0.35,
            occasional_developers: 24,
            dependency_rate: 0.15,
            duplicate_rate: 0.04,
            undated_rate: 0.02,
            outlier_rate: 0.03,
        }
    }
}

impl SynthParams {
    /// Last day of the training phase: the first half of the span.
    pub fn boundary_day(&self) -> Day {
        self.span_days / 2 - 1
    }
}

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("word lists are nonempty")
}

fn weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn text<R: Rng>(rng: &mut R, component: usize, dev: Option<usize>, words: usize) -> Vec<String> {
    (0..words)
        .map(|_| {
            let u = rng.gen::<f64>();
            let w = match dev {
                Some(d) if u < 0.25 => pick(rng, DEVELOPER_WORDS[d]),
                _ if u < 0.75 => pick(rng, COMPONENT_WORDS[component]),
                _ => pick(rng, GENERIC_WORDS),
            };
            w.to_string()
        })
        .collect()
}

fn sentence(words: &[String], rng: &mut impl Rng) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push(' ');
            // stop words and numbers the tokenizer must drop
            if rng.gen_bool(0.15) {
                out.push_str(["the ", "in ", "when ", "after ", "42 ", "with "].choose(rng).unwrap());
            }
        }
        out.push_str(w);
    }
    out
}

/// A complete history, sorted by `(reported_at, bug_id)`.
pub fn generate(params: &SynthParams) -> Vec<BugRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = LogNormal::new(0.0, params.fix_sigma).expect("finite sigma");
    let boundary = params.boundary_day();

    let mut days: Vec<Day> = (0..params.n_bugs).map(|_| rng.gen_range(0..params.span_days)).collect();
    days.sort_unstable();

    let mut records: Vec<BugRecord> = Vec::with_capacity(params.n_bugs + 2 * params.occasional_developers as usize);
    for (i, &reported_at) in days.iter().enumerate() {
        let component = weighted(&mut rng, &params.component_weights);
        let (owner, secondaries) = STAFFING[component];
        let dev = if rng.gen_bool(params.owner_share) {
            owner
        } else {
            *secondaries.choose(&mut rng).unwrap()
        };
        let d = dev as usize - 1;
        let mut days_to_fix =
            (params.component_days[component] * params.developer_speed[d] * noise.sample(&mut rng)).round() as Day;
        days_to_fix = days_to_fix.max(1);
        if rng.gen_bool(params.outlier_rate) {
            days_to_fix *= 8;
        }
        let assigned_at = reported_at + rng.gen_range(0..=2);
        let summary_len = rng.gen_range(3..=6);
        let description_len = rng.gen_range(10..=24);
        let summary = text(&mut rng, component, Some(d), summary_len);
        let description = text(&mut rng, component, Some(d), description_len);
        let mut record = BugRecord {
            bug_id: BugId(1000 + i as u64),
            summary: sentence(&summary, &mut rng),
            description: sentence(&description, &mut rng),
            component: COMPONENTS[component].to_string(),
            reported_at,
            assigned_at: Some(assigned_at),
            resolved_at: Some(assigned_at + days_to_fix - 1),
            actual_assignee: Some(DevId(dev)),
            status_final: if rng.gen_bool(0.9) {
                FinalStatus::Fixed
            } else {
                FinalStatus::Closed
            },
            dependency_events: vec![],
        };
        let u = rng.gen::<f64>();
        if u < params.duplicate_rate {
            record.status_final = FinalStatus::Other;
        } else if u < params.duplicate_rate + params.undated_rate {
            record.assigned_at = None;
        }
        records.push(record);
    }

    // occasional contributors: one or two fixes in the training phase
    let mut next_id = 1000 + params.n_bugs as u64;
    for k in 0..params.occasional_developers {
        let dev = DevId(100 + k);
        for _ in 0..rng.gen_range(1..=2) {
            let component = weighted(&mut rng, &params.component_weights);
            let reported_at = rng.gen_range(0..=boundary);
            let days_to_fix = (params.component_days[component] * noise.sample(&mut rng)).round().max(1.0) as Day;
            let n_words = rng.gen_range(10..=20);
            let words = text(&mut rng, component, None, n_words);
            records.push(BugRecord {
                bug_id: BugId(next_id),
                summary: sentence(&words[..3], &mut rng),
                description: sentence(&words[3..], &mut rng),
                component: COMPONENTS[component].to_string(),
                reported_at,
                assigned_at: Some(reported_at),
                resolved_at: Some(reported_at + days_to_fix - 1),
                actual_assignee: Some(dev),
                status_final: FinalStatus::Fixed,
                dependency_events: vec![],
            });
            next_id += 1;
        }
    }
    records.sort_by_key(|r| (r.reported_at, r.bug_id));

    // blockers: an earlier bug of the same component still open on the
    // child's report day
    for child in 0..records.len() {
        if !rng.gen_bool(params.dependency_rate) {
            continue;
        }
        let (day, component) = (records[child].reported_at, records[child].component.clone());
        let candidates: Vec<usize> = (0..child)
            .filter(|&p| {
                let r = &records[p];
                r.component == component
                    && r.reported_at >= day - 30
                    && r.reported_at < day
                    && r.status_final != FinalStatus::Other
                    && r.resolved_at.is_none_or(|z| z >= day)
            })
            .collect();
        let Some(&parent) = candidates.choose(&mut rng) else {
            continue;
        };
        let blocked = records[child].bug_id;
        let events = &mut records[parent].dependency_events;
        events.push(DependencyEvent {
            day,
            kind: DependencyKind::AddBlocks,
            other: blocked,
        });
        if rng.gen_bool(0.1) {
            events.push(DependencyEvent {
                day: day + rng.gen_range(1..=5),
                kind: DependencyKind::RemoveBlocks,
                other: blocked,
            });
        }
    }
    records
}
