//! Day-by-day replay of a bug history under one triage policy.
//!
//! Each simulated day runs, in order: (a) the recorded graph events of the
//! day, (b) completions due today, (c) the policy's decision over the open,
//! unassigned managed bugs, (d) capacity and completion bookkeeping for the
//! new assignments, (e) one day of capacity regained, capped at the horizon.
//!
//! Only the cleaned test-phase bugs are managed by the policy. Every other
//! bug follows its recorded history so the dependency graph sees the same
//! blockers under every policy. A developer works through their assignments
//! one at a time: a new bug starts when the previous one is done and takes
//! `ceil(cost)` days. The replayed historical policy instead resolves each
//! bug on its recorded day.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bdg::{DependencyGraph, GraphEvent};
use crate::corpus::{BugId, BugRecord, Day, DependencyKind, DevId, FinalStatus};
use crate::error::{Error, Result};
use crate::policies::{
    decide_actual, decide_cbr, decide_costriage, decide_knapsack, DailyDecision, Estimates,
    HistoricalAssignment, KnapsackSettings, PolicyKind,
};
use crate::solver::{PrecedenceMode, Variant, CAPACITY_EPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub policy: PolicyKind,
    pub alpha: f64,
    /// Capacity ceiling `L` in days.
    pub horizon: f64,
    #[serde(default)]
    pub precedence_mode: PrecedenceMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Validation(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Validation(format!("horizon {} must be positive", self.horizon)));
        }
        Ok(())
    }
}

/// The replayed world: every record of the dataset, which of them the
/// policy manages, and who can be assigned.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub records: Vec<BugRecord>,
    pub managed: BTreeSet<BugId>,
    pub developers: Vec<DevId>,
    /// Last training day; policies act from the day after.
    pub boundary_day: Day,
    /// Last simulated day; work scheduled later counts as unfinished.
    pub end_day: Day,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeveloperSlate {
    pub dev_id: DevId,
    /// Remaining schedulable days, `0 <= capacity <= L`.
    pub capacity: f64,
    pub in_progress: Vec<(BugId, Day)>,
    /// First day this developer is free to start new work.
    pub busy_until: Day,
}

/// One assignment made during the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub bug_id: BugId,
    pub dev_id: DevId,
    pub component: String,
    pub reported_at: Day,
    pub assigned_day: Day,
    /// Scheduled completion; may lie beyond the end of the run.
    pub completion_day: Day,
    pub estimated_cost_days: f64,
    /// Days from assignment to fix, counting the assignment day as in the
    /// recorded fixing times: queueing plus `ceil(cost)` for simulated
    /// work, the recorded value for the replayed history.
    pub fixing_days: i64,
    /// Open blockers at assignment time that were not queued before this
    /// bug on the same developer in the same batch.
    pub open_blockers: Vec<BugId>,
}

impl Outcome {
    pub fn is_infeasible(&self) -> bool {
        !self.open_blockers.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailySample {
    pub day: Day,
    pub open_bugs: usize,
    pub arcs: usize,
    pub mean_depth: f64,
    pub mean_degree: f64,
    pub assigned: usize,
    pub deferred: usize,
    pub in_progress: usize,
    pub solver_nodes: u64,
    /// End-of-day capacity per developer, in developer order.
    pub capacities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub policy: PolicyKind,
    pub alpha: f64,
    pub horizon: f64,
    pub boundary_day: Day,
    pub end_day: Day,
    pub managed_bugs: usize,
    pub developers: Vec<DevId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub meta: RunMeta,
    pub outcomes: Vec<Outcome>,
    pub samples: Vec<DailySample>,
}

#[derive(Clone, Debug, Default)]
struct DayEvents {
    opens: Vec<BugId>,
    arcs: Vec<GraphEvent>,
    resolves: Vec<BugId>,
}

pub struct Simulation<'a> {
    config: SimConfig,
    scenario: &'a Scenario,
    estimates: &'a Estimates,
    timeline: BTreeMap<Day, DayEvents>,
    history: BTreeMap<BugId, HistoricalAssignment>,
    by_id: BTreeMap<BugId, &'a BugRecord>,
    pub day: Day,
    pub graph: DependencyGraph,
    pub slates: Vec<DeveloperSlate>,
    /// Reported, open and not yet assigned managed bugs.
    pub pending: BTreeSet<BugId>,
    pub outcomes: Vec<Outcome>,
    pub samples: Vec<DailySample>,
}

fn build_timeline(scenario: &Scenario, graph: &mut DependencyGraph) -> BTreeMap<Day, DayEvents> {
    let known: BTreeSet<BugId> = scenario.records.iter().map(|r| r.bug_id).collect();
    let mut timeline: BTreeMap<Day, DayEvents> = BTreeMap::new();
    for r in &scenario.records {
        if r.status_final == FinalStatus::Other {
            graph.exclude(r.bug_id);
            continue;
        }
        timeline.entry(r.reported_at).or_default().opens.push(r.bug_id);
        if !scenario.managed.contains(&r.bug_id) {
            if let Some(day) = r.resolved_at {
                timeline.entry(day).or_default().resolves.push(r.bug_id);
            }
        }
        for e in &r.dependency_events {
            if !known.contains(&e.other) {
                continue;
            }
            let (blocker, blocked) = (r.bug_id, e.other);
            let event = match e.kind {
                DependencyKind::AddBlocks => GraphEvent::AddArc { blocker, blocked },
                DependencyKind::RemoveBlocks => GraphEvent::RemoveArc { blocker, blocked },
            };
            timeline.entry(e.day).or_default().arcs.push(event);
        }
    }
    timeline
}

impl<'a> Simulation<'a> {
    pub fn new(config: SimConfig, scenario: &'a Scenario, estimates: &'a Estimates) -> Result<Self> {
        config.validate()?;
        let mut devs = scenario.developers.clone();
        devs.sort_unstable();
        devs.dedup();
        if devs.is_empty() && !scenario.managed.is_empty() {
            return Err(Error::Validation("no developer to assign bugs to".into()));
        }
        let mut graph = DependencyGraph::new();
        let timeline = build_timeline(scenario, &mut graph);
        let by_id: BTreeMap<BugId, &BugRecord> = scenario.records.iter().map(|r| (r.bug_id, r)).collect();
        let mut history = BTreeMap::new();
        for &bug in &scenario.managed {
            let r = by_id
                .get(&bug)
                .ok_or_else(|| Error::Validation(format!("managed bug {bug} is not in the dataset")))?;
            if r.reported_at <= scenario.boundary_day {
                return Err(Error::Validation(format!(
                    "managed bug {bug} was reported before the test phase"
                )));
            }
            if let (Some(dev_id), Some(assigned_at), Some(resolved_at)) =
                (r.actual_assignee, r.assigned_at, r.resolved_at)
            {
                history.insert(
                    bug,
                    HistoricalAssignment {
                        dev_id,
                        assigned_at,
                        resolved_at,
                    },
                );
            }
        }
        let first_day = timeline.keys().next().copied().unwrap_or(scenario.boundary_day + 1);
        let slates = devs
            .iter()
            .map(|&dev_id| DeveloperSlate {
                dev_id,
                capacity: config.horizon,
                in_progress: vec![],
                busy_until: scenario.boundary_day + 1,
            })
            .collect();
        Ok(Self {
            config,
            scenario,
            estimates,
            timeline,
            history,
            by_id,
            day: first_day.min(scenario.boundary_day + 1),
            graph,
            slates,
            pending: BTreeSet::new(),
            outcomes: vec![],
            samples: vec![],
        })
    }

    fn in_test_phase(&self) -> bool {
        self.day > self.scenario.boundary_day
    }

    /// Open, unassigned managed bugs. Blocked bugs are included; the policy
    /// decides what to do with them.
    pub fn feasible_bugs(&self) -> Vec<BugId> {
        self.pending.iter().copied().collect()
    }

    pub fn capacities(&self) -> BTreeMap<DevId, f64> {
        self.slates.iter().map(|s| (s.dev_id, s.capacity)).collect()
    }

    pub fn is_finished(&self) -> bool {
        self.day > self.scenario.end_day
    }

    pub fn step_day(&mut self) -> Result<()> {
        let today = self.day;
        // (a) recorded events
        if let Some(events) = self.timeline.get(&today) {
            for &bug in &events.opens {
                self.graph.apply_event(GraphEvent::Open { bug });
                if self.scenario.managed.contains(&bug) {
                    self.pending.insert(bug);
                }
            }
            for &e in &events.arcs {
                self.graph.apply_event(e);
            }
            for &bug in &events.resolves {
                self.graph.apply_event(GraphEvent::Resolve { bug });
            }
        }
        if !self.in_test_phase() {
            self.day += 1;
            return Ok(());
        }

        // (b) completions
        for slate in &mut self.slates {
            let (done, rest): (Vec<_>, Vec<_>) = slate.in_progress.iter().partition(|(_, d)| *d <= today);
            slate.in_progress = rest;
            for (bug, _) in done {
                self.graph.apply_event(GraphEvent::Resolve { bug });
            }
        }

        // (c) policy
        let open = self.feasible_bugs();
        let decision = self.decide(today, &open)?;

        // (d) bookkeeping
        self.apply(today, &decision)?;

        // (e) regain a day of capacity
        let horizon = self.config.horizon;
        for slate in &mut self.slates {
            slate.capacity = (slate.capacity + 1.0).min(horizon);
        }

        let m = self.graph.metrics_snapshot();
        self.samples.push(DailySample {
            day: today,
            open_bugs: m.nodes,
            arcs: m.arcs,
            mean_depth: m.mean_depth,
            mean_degree: m.mean_degree,
            assigned: decision.assignments.len(),
            deferred: decision.deferred.len(),
            in_progress: self.slates.iter().map(|s| s.in_progress.len()).sum(),
            solver_nodes: decision.solver_nodes,
            capacities: self.slates.iter().map(|s| s.capacity).collect(),
        });
        self.day += 1;
        Ok(())
    }

    fn decide(&self, today: Day, open: &[BugId]) -> Result<DailyDecision> {
        let alpha = self.config.alpha;
        let knapsack = |variant| {
            decide_knapsack(
                today,
                open,
                self.estimates,
                &self.capacities(),
                &self.graph,
                KnapsackSettings {
                    alpha,
                    variant,
                    precedence_mode: self.config.precedence_mode,
                },
            )
        };
        Ok(match self.config.policy {
            PolicyKind::Actual => decide_actual(today, open, &self.history, self.estimates),
            PolicyKind::Cbr => decide_cbr(today, open, self.estimates)?,
            PolicyKind::CosTriage => decide_costriage(today, open, self.estimates, alpha)?,
            PolicyKind::Rabt => knapsack(Variant::Rabt)?,
            PolicyKind::Dabt => knapsack(Variant::Dabt)?,
        })
    }

    fn apply(&mut self, today: Day, decision: &DailyDecision) -> Result<()> {
        let dev_index: BTreeMap<DevId, usize> =
            self.slates.iter().enumerate().map(|(i, s)| (s.dev_id, i)).collect();
        let respects_capacity = self.config.policy.respects_capacity();

        let mut batch_load = vec![0.0; self.slates.len()];
        for a in &decision.assignments {
            if !self.pending.contains(&a.bug_id) {
                return Err(Error::Simulation(format!(
                    "day {today}: bug {} is not open and unassigned",
                    a.bug_id
                )));
            }
            let d = *dev_index.get(&a.dev_id).ok_or_else(|| {
                Error::Simulation(format!("day {today}: unknown developer {}", a.dev_id))
            })?;
            batch_load[d] += a.estimated_cost_days;
        }
        if respects_capacity {
            for (slate, load) in self.slates.iter().zip(&batch_load) {
                if *load > slate.capacity + CAPACITY_EPS {
                    return Err(Error::Simulation(format!(
                        "day {today}: developer {} given {load} days with {} remaining",
                        slate.dev_id, slate.capacity
                    )));
                }
            }
        }

        // blockers queue ahead of the bugs they block
        let depths = self.graph.depths();
        let mut order: Vec<_> = decision.assignments.iter().collect();
        order.sort_by_key(|a| (depths.get(&a.bug_id).copied().unwrap_or(0), a.bug_id));
        let batch_dev: BTreeMap<BugId, DevId> =
            decision.assignments.iter().map(|a| (a.bug_id, a.dev_id)).collect();

        let mut resolved_now = Vec::new();
        for a in order {
            let d = dev_index[&a.dev_id];
            let open_blockers: Vec<BugId> = if self.graph.is_open(a.bug_id) {
                self.graph
                    .blocking_parents(a.bug_id)?
                    .into_iter()
                    .filter(|p| batch_dev.get(p) != Some(&a.dev_id))
                    .collect()
            } else {
                vec![]
            };
            let record = self.by_id[&a.bug_id];
            let (completion_day, fixing_days) = match self.config.policy {
                PolicyKind::Actual => {
                    let h = self.history[&a.bug_id];
                    (h.resolved_at, h.resolved_at - today + 1)
                }
                _ => {
                    let slate = &mut self.slates[d];
                    let start = slate.busy_until.max(today);
                    let done = start + a.estimated_cost_days.ceil() as Day;
                    slate.busy_until = done;
                    (done, done - today)
                }
            };
            let slate = &mut self.slates[d];
            slate.capacity = (slate.capacity - a.estimated_cost_days).max(0.0);
            if completion_day <= today {
                resolved_now.push(a.bug_id);
            } else {
                slate.in_progress.push((a.bug_id, completion_day));
            }
            self.pending.remove(&a.bug_id);
            self.outcomes.push(Outcome {
                bug_id: a.bug_id,
                dev_id: a.dev_id,
                component: record.component.clone(),
                reported_at: record.reported_at,
                assigned_day: today,
                completion_day,
                estimated_cost_days: a.estimated_cost_days,
                fixing_days,
                open_blockers,
            });
        }
        for bug in resolved_now {
            self.graph.apply_event(GraphEvent::Resolve { bug });
        }
        Ok(())
    }

    pub fn finish(self) -> SimOutput {
        let mut outcomes = self.outcomes;
        outcomes.sort_by_key(|o| (o.assigned_day, o.bug_id));
        SimOutput {
            meta: RunMeta {
                policy: self.config.policy,
                alpha: self.config.alpha,
                horizon: self.config.horizon,
                boundary_day: self.scenario.boundary_day,
                end_day: self.scenario.end_day,
                managed_bugs: self.scenario.managed.len(),
                developers: self.slates.iter().map(|s| s.dev_id).collect(),
            },
            outcomes,
            samples: self.samples,
        }
    }
}

/// Replays every day up to the scenario's end day.
pub fn run_simulation(config: &SimConfig, scenario: &Scenario, estimates: &Estimates) -> Result<SimOutput> {
    let mut sim = Simulation::new(config.clone(), scenario, estimates)?;
    while !sim.is_finished() {
        sim.step_day()?;
    }
    Ok(sim.finish())
}

pub fn write_outcomes(outcomes: &[Outcome], mut out: impl Write) -> Result<()> {
    for o in outcomes {
        serde_json::to_writer(&mut out, o)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_outcomes(reader: impl BufRead) -> Result<Vec<Outcome>> {
    let mut outcomes = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        outcomes.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: "outcomes".into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(outcomes)
}

const FIXED_COLUMNS: [&str; 9] = [
    "day",
    "open_bugs",
    "arcs",
    "mean_depth",
    "mean_degree",
    "assigned",
    "deferred",
    "in_progress",
    "solver_nodes",
];

/// One row per test day; capacities follow as `capacity_<dev>` columns.
pub fn write_daily_csv(samples: &[DailySample], developers: &[DevId], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(developers.iter().map(|d| format!("capacity_{d}")));
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![
            s.day.to_string(),
            s.open_bugs.to_string(),
            s.arcs.to_string(),
            s.mean_depth.to_string(),
            s.mean_degree.to_string(),
            s.assigned.to_string(),
            s.deferred.to_string(),
            s.in_progress.to_string(),
            s.solver_nodes.to_string(),
        ];
        row.extend(s.capacities.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_daily_csv(reader: impl std::io::Read) -> Result<Vec<DailySample>> {
    let mut r = csv::Reader::from_reader(reader);
    let bad = |line: usize, message: String| Error::Parse {
        path: "daily metrics".into(),
        line,
        message,
    };
    let header = r.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len() || header.iter().zip(FIXED_COLUMNS).any(|(a, b)| a != b) {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        macro_rules! num {
            ($k:expr) => {
                field($k)
                    .parse()
                    .map_err(|_| bad(line, format!("bad value {:?} in column {}", field($k), header.get($k).unwrap_or("?"))))?
            };
        }
        let capacities = (FIXED_COLUMNS.len()..rec.len())
            .map(|k| field(k).parse::<f64>().map_err(|_| bad(line, format!("bad capacity {:?}", field(k)))))
            .collect::<Result<_>>()?;
        samples.push(DailySample {
            day: num!(0),
            open_bugs: num!(1),
            arcs: num!(2),
            mean_depth: num!(3),
            mean_degree: num!(4),
            assigned: num!(5),
            deferred: num!(6),
            in_progress: num!(7),
            solver_nodes: num!(8),
            capacities,
        });
    }
    Ok(samples)
}
