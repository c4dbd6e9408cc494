//! The five triage policies behind one daily-decision interface.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bdg::DependencyGraph;
use crate::corpus::{BugId, Day, DevId};
use crate::costmodel::TopicAssignment;
use crate::error::{Error, Result};
use crate::solver::{self, AssignmentInstance, InstanceBug, InstanceDeveloper, PrecedenceMode, Variant};
use crate::suitability::SuitabilityRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Actual,
    Cbr,
    CosTriage,
    Rabt,
    Dabt,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Actual,
        PolicyKind::Cbr,
        PolicyKind::CosTriage,
        PolicyKind::Rabt,
        PolicyKind::Dabt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Actual => "actual",
            PolicyKind::Cbr => "cbr",
            PolicyKind::CosTriage => "costriage",
            PolicyKind::Rabt => "rabt",
            PolicyKind::Dabt => "dabt",
        }
    }

    /// Whether the policy schedules against developer capacity.
    pub fn respects_capacity(self) -> bool {
        matches!(self, PolicyKind::Rabt | PolicyKind::Dabt)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown policy {s:?} (expected actual, cbr, costriage, rabt or dabt)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedAssignment {
    pub bug_id: BugId,
    pub dev_id: DevId,
    pub estimated_cost_days: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DailyDecision {
    pub day: Day,
    pub assignments: Vec<PlannedAssignment>,
    pub deferred: Vec<BugId>,
    /// Branch-and-bound nodes explored, zero for the direct policies.
    #[serde(default)]
    pub solver_nodes: u64,
}

/// Model outputs for one bug: normalized suitability and the estimated
/// cost for every developer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BugEstimate {
    pub suitability: SuitabilityRow,
    pub topic: TopicAssignment,
    pub cost: BTreeMap<DevId, f64>,
}

impl BugEstimate {
    /// `alpha * s/max(s) + (1 - alpha) * min(c)/c` for every developer
    /// that has both a suitability and a cost.
    pub fn scores(&self, alpha: f64) -> BTreeMap<DevId, f64> {
        let max_s = self.suitability.s.values().copied().fold(0.0, f64::max);
        let min_c = self.cost.values().copied().fold(f64::INFINITY, f64::min);
        self.suitability
            .s
            .iter()
            .filter_map(|(&d, &s)| {
                let c = *self.cost.get(&d)?;
                Some((d, alpha * (s / max_s) + (1.0 - alpha) * (min_c / c)))
            })
            .collect()
    }
}

pub type Estimates = BTreeMap<BugId, BugEstimate>;

fn estimate(est: &Estimates, bug: BugId) -> Result<&BugEstimate> {
    est.get(&bug)
        .ok_or_else(|| Error::Simulation(format!("no model estimate for bug {bug}")))
}

fn cost_of(e: &BugEstimate, bug: BugId, dev: DevId) -> Result<f64> {
    e.cost
        .get(&dev)
        .copied()
        .ok_or_else(|| Error::Simulation(format!("no cost estimate for bug {bug} and developer {dev}")))
}

/// Highest value; ties go to the smallest developer id.
fn argmax(values: &BTreeMap<DevId, f64>) -> Option<DevId> {
    let mut best: Option<(DevId, f64)> = None;
    for (&d, &v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((d, v));
        }
    }
    best.map(|(d, _)| d)
}

/// Every open bug goes to its most suitable developer.
pub fn decide_cbr(day: Day, open: &[BugId], est: &Estimates) -> Result<DailyDecision> {
    let mut assignments = Vec::with_capacity(open.len());
    for &bug in open {
        let e = estimate(est, bug)?;
        let dev = argmax(&e.suitability.s)
            .ok_or_else(|| Error::Simulation(format!("bug {bug} has an empty suitability row")))?;
        assignments.push(PlannedAssignment {
            bug_id: bug,
            dev_id: dev,
            estimated_cost_days: cost_of(e, bug, dev)?,
        });
    }
    Ok(DailyDecision {
        day,
        assignments,
        deferred: vec![],
        solver_nodes: 0,
    })
}

/// Every open bug goes to the developer with the best combined score.
pub fn decide_costriage(day: Day, open: &[BugId], est: &Estimates, alpha: f64) -> Result<DailyDecision> {
    let mut assignments = Vec::with_capacity(open.len());
    for &bug in open {
        let e = estimate(est, bug)?;
        let dev = argmax(&e.scores(alpha))
            .ok_or_else(|| Error::Simulation(format!("bug {bug} has no scorable developer")))?;
        assignments.push(PlannedAssignment {
            bug_id: bug,
            dev_id: dev,
            estimated_cost_days: cost_of(e, bug, dev)?,
        });
    }
    Ok(DailyDecision {
        day,
        assignments,
        deferred: vec![],
        solver_nodes: 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoricalAssignment {
    pub dev_id: DevId,
    pub assigned_at: Day,
    pub resolved_at: Day,
}

/// Replays the recorded assignee on the recorded assignment day. The cost
/// reported is the model estimate when one exists, otherwise the recorded
/// fixing time.
pub fn decide_actual(
    day: Day,
    open: &[BugId],
    history: &BTreeMap<BugId, HistoricalAssignment>,
    est: &Estimates,
) -> DailyDecision {
    let mut decision = DailyDecision {
        day,
        ..Default::default()
    };
    for &bug in open {
        match history.get(&bug) {
            Some(h) if h.assigned_at == day => {
                let recorded = (h.resolved_at - h.assigned_at + 1) as f64;
                let estimated = est
                    .get(&bug)
                    .and_then(|e| e.cost.get(&h.dev_id).copied())
                    .unwrap_or(recorded);
                decision.assignments.push(PlannedAssignment {
                    bug_id: bug,
                    dev_id: h.dev_id,
                    estimated_cost_days: estimated,
                });
            }
            _ => decision.deferred.push(bug),
        }
    }
    decision
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnapsackSettings {
    pub alpha: f64,
    pub variant: Variant,
    pub precedence_mode: PrecedenceMode,
}

/// Builds the day's assignment instance and solves it exactly.
///
/// The dependency-aware variant first defers every bug with an open blocker
/// outside today's candidates (already in progress, or not managed by the
/// policy), then lets the solver pair the remaining blockers with their
/// children. Bugs the solver leaves out are deferred to a later day.
pub fn decide_knapsack(
    day: Day,
    open: &[BugId],
    est: &Estimates,
    capacities: &BTreeMap<DevId, f64>,
    graph: &DependencyGraph,
    settings: KnapsackSettings,
) -> Result<DailyDecision> {
    let developers: Vec<InstanceDeveloper> = capacities
        .iter()
        .map(|(&dev_id, &capacity)| InstanceDeveloper { dev_id, capacity })
        .collect();
    let candidates: BTreeSet<BugId> = open.iter().copied().collect();
    let mut deferred = Vec::new();
    let mut bugs = Vec::new();
    let mut precedence = Vec::new();
    for &bug in open {
        if settings.variant == Variant::Dabt {
            let parents = if graph.is_open(bug) {
                graph.blocking_parents(bug)?
            } else {
                BTreeSet::new()
            };
            if parents.iter().any(|p| !candidates.contains(p)) {
                deferred.push(bug);
                continue;
            }
            precedence.extend(parents.into_iter().map(|p| (p, bug)));
        }
        let e = estimate(est, bug)?;
        let mut suitability = Vec::with_capacity(developers.len());
        let mut cost = Vec::with_capacity(developers.len());
        for d in &developers {
            suitability.push(e.suitability.s.get(&d.dev_id).copied().unwrap_or(0.0));
            cost.push(cost_of(e, bug, d.dev_id)?);
        }
        bugs.push(InstanceBug {
            bug_id: bug,
            suitability,
            cost,
        });
    }
    // a parent deferred above takes its children with it
    if settings.variant == Variant::Dabt {
        loop {
            let kept: BTreeSet<BugId> = bugs.iter().map(|b| b.bug_id).collect();
            let blocked: BTreeSet<BugId> = precedence
                .iter()
                .filter(|(p, _)| !kept.contains(p))
                .map(|&(_, c)| c)
                .collect();
            if blocked.is_empty() {
                break;
            }
            bugs.retain(|b| !blocked.contains(&b.bug_id));
            deferred.extend(blocked.iter().copied());
            precedence.retain(|(p, c)| !blocked.contains(p) && !blocked.contains(c));
        }
    }

    let instance = AssignmentInstance {
        alpha: settings.alpha,
        developers,
        bugs,
        precedence,
        precedence_mode: settings.precedence_mode,
    };
    let solution = solver::solve(&instance, settings.variant)?;
    let chosen: BTreeMap<BugId, DevId> = solution
        .assignments
        .iter()
        .map(|a| (a.bug_id, a.dev_id))
        .collect();
    let mut assignments = Vec::with_capacity(chosen.len());
    for (i, b) in instance.bugs.iter().enumerate() {
        match chosen.get(&b.bug_id) {
            Some(&dev) => {
                let d = instance
                    .developers
                    .iter()
                    .position(|x| x.dev_id == dev)
                    .expect("solver returns instance developers");
                assignments.push(PlannedAssignment {
                    bug_id: b.bug_id,
                    dev_id: dev,
                    estimated_cost_days: instance.bugs[i].cost[d],
                });
            }
            None => deferred.push(b.bug_id),
        }
    }
    deferred.sort_unstable();
    Ok(DailyDecision {
        day,
        assignments,
        deferred,
        solver_nodes: solution.node_count,
    })
}
