//! Daily assignment integer program.
//!
//! Binary `x[i][d]` assigns bug `i` to developer `d`. Every variant keeps
//! each bug with at most one developer and each developer's summed cost
//! within their remaining capacity. The dependency-aware variant maximizes
//!
//! ```text
//! sum  alpha * s[i][d] / max(s[i]) + (1 - alpha) * min(c[i]) / c[i][d]
//! ```
//!
//! and forbids assigning a bug unless every in-instance blocker is assigned
//! in the same batch (to the same developer, by default). The
//! release-aware variant maximizes `sum s[i][d]` with no precedence rule.

mod bnb;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{BugId, DevId};
use crate::error::{Error, Result};

pub use bnb::solve;
pub use oracle::{brute_force_oracle, ORACLE_MAX_BUGS};

/// Slack allowed on capacity sums.
pub const CAPACITY_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Dabt,
    Rabt,
}

/// How an assigned bug's in-instance blockers must be covered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecedenceMode {
    /// Every blocker goes to the same developer in the same batch.
    #[default]
    SameDeveloper,
    /// Every blocker is assigned to someone in the same batch.
    AnyDeveloper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceBug {
    pub bug_id: BugId,
    /// One value in `[0, 1]` per developer, in developer order.
    pub suitability: Vec<f64>,
    /// One positive cost (days) per developer, in developer order.
    pub cost: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDeveloper {
    pub dev_id: DevId,
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentInstance {
    pub alpha: f64,
    pub developers: Vec<InstanceDeveloper>,
    pub bugs: Vec<InstanceBug>,
    /// `(blocker, blocked)` pairs among instance bugs.
    #[serde(default)]
    pub precedence: Vec<(BugId, BugId)>,
    #[serde(default)]
    pub precedence_mode: PrecedenceMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub bug_id: BugId,
    pub dev_id: DevId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    /// Sorted by bug id.
    pub assignments: Vec<Assignment>,
    pub objective_value: f64,
    pub node_count: u64,
}

impl AssignmentSolution {
    pub fn empty() -> Self {
        Self {
            assignments: vec![],
            objective_value: 0.0,
            node_count: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Solver(msg.into())
}

impl AssignmentInstance {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        let d = self.developers.len();
        let mut devs = BTreeSet::new();
        for dev in &self.developers {
            if !devs.insert(dev.dev_id) {
                return Err(invalid(format!("duplicate developer {}", dev.dev_id)));
            }
            if !(dev.capacity >= 0.0 && dev.capacity.is_finite()) {
                return Err(invalid(format!("developer {} has capacity {}", dev.dev_id, dev.capacity)));
            }
        }
        let mut bugs = BTreeSet::new();
        for bug in &self.bugs {
            if !bugs.insert(bug.bug_id) {
                return Err(invalid(format!("duplicate bug {}", bug.bug_id)));
            }
            if bug.suitability.len() != d || bug.cost.len() != d {
                return Err(invalid(format!("bug {} rows do not cover {d} developers", bug.bug_id)));
            }
            if bug.suitability.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(invalid(format!("bug {} suitability outside [0, 1]", bug.bug_id)));
            }
            if d > 0 && bug.suitability.iter().all(|&s| s == 0.0) {
                return Err(invalid(format!("bug {} has an all-zero suitability row", bug.bug_id)));
            }
            if bug.cost.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return Err(invalid(format!("bug {} has a non-positive cost", bug.bug_id)));
            }
        }
        for &(p, c) in &self.precedence {
            if !bugs.contains(&p) || !bugs.contains(&c) {
                return Err(invalid(format!("precedence arc {p}->{c} leaves the instance")));
            }
        }
        if topological_positions(self).is_none() {
            return Err(invalid("precedence arcs contain a cycle"));
        }
        Ok(())
    }

    /// In-instance blockers of each bug, by bug index.
    pub(crate) fn parent_indices(&self) -> Vec<Vec<usize>> {
        let index: BTreeMap<BugId, usize> =
            self.bugs.iter().enumerate().map(|(i, b)| (b.bug_id, i)).collect();
        let mut parents = vec![Vec::new(); self.bugs.len()];
        for &(p, c) in &self.precedence {
            if let (Some(&pi), Some(&ci)) = (index.get(&p), index.get(&c)) {
                if !parents[ci].contains(&pi) {
                    parents[ci].push(pi);
                }
            }
        }
        for p in &mut parents {
            p.sort_unstable();
        }
        parents
    }

    /// Objective contribution of giving bug `i` to developer `d`.
    pub fn contribution(&self, variant: Variant, i: usize, d: usize) -> f64 {
        let bug = &self.bugs[i];
        match variant {
            Variant::Rabt => bug.suitability[d],
            Variant::Dabt => {
                let max_s = bug.suitability.iter().copied().fold(0.0, f64::max);
                let min_c = bug.cost.iter().copied().fold(f64::INFINITY, f64::min);
                self.alpha * (bug.suitability[d] / max_s) + (1.0 - self.alpha) * (min_c / bug.cost[d])
            }
        }
    }
}

/// Kahn order; `None` on a cycle.
fn topological_positions(instance: &AssignmentInstance) -> Option<Vec<usize>> {
    let parents = instance.parent_indices();
    let n = instance.bugs.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Checks at-most-one, capacity and (for the dependency-aware variant)
/// precedence coverage.
pub fn check_feasibility(
    instance: &AssignmentInstance,
    variant: Variant,
    assignments: &[Assignment],
) -> Result<()> {
    let dev_index: BTreeMap<DevId, usize> = instance
        .developers
        .iter()
        .enumerate()
        .map(|(i, d)| (d.dev_id, i))
        .collect();
    let bug_index: BTreeMap<BugId, usize> =
        instance.bugs.iter().enumerate().map(|(i, b)| (b.bug_id, i)).collect();
    let mut chosen: BTreeMap<BugId, DevId> = BTreeMap::new();
    let mut load = vec![0.0; instance.developers.len()];
    for a in assignments {
        let (Some(&i), Some(&d)) = (bug_index.get(&a.bug_id), dev_index.get(&a.dev_id)) else {
            return Err(invalid(format!("assignment {}->{} is not in the instance", a.bug_id, a.dev_id)));
        };
        if chosen.insert(a.bug_id, a.dev_id).is_some() {
            return Err(invalid(format!("bug {} assigned more than once", a.bug_id)));
        }
        load[d] += instance.bugs[i].cost[d];
    }
    for (d, dev) in instance.developers.iter().enumerate() {
        if load[d] > dev.capacity + CAPACITY_EPS {
            return Err(invalid(format!(
                "developer {} loaded {} over capacity {}",
                dev.dev_id, load[d], dev.capacity
            )));
        }
    }
    if variant == Variant::Dabt {
        for &(p, c) in &instance.precedence {
            let Some(&dev) = chosen.get(&c) else { continue };
            let ok = match (instance.precedence_mode, chosen.get(&p)) {
                (_, None) => false,
                (PrecedenceMode::SameDeveloper, Some(&pd)) => pd == dev,
                (PrecedenceMode::AnyDeveloper, Some(_)) => true,
            };
            if !ok {
                return Err(invalid(format!("bug {c} assigned without its blocker {p}")));
            }
        }
    }
    Ok(())
}

/// Objective of a feasible assignment set; infeasible sets are an error.
pub fn objective_value(
    instance: &AssignmentInstance,
    variant: Variant,
    assignments: &[Assignment],
) -> Result<f64> {
    check_feasibility(instance, variant, assignments)?;
    let dev_index: BTreeMap<DevId, usize> = instance
        .developers
        .iter()
        .enumerate()
        .map(|(i, d)| (d.dev_id, i))
        .collect();
    let bug_index: BTreeMap<BugId, usize> =
        instance.bugs.iter().enumerate().map(|(i, b)| (b.bug_id, i)).collect();
    Ok(assignments
        .iter()
        .map(|a| instance.contribution(variant, bug_index[&a.bug_id], dev_index[&a.dev_id]))
        .sum())
}

pub fn solve_dabt(instance: &AssignmentInstance) -> Result<AssignmentSolution> {
    solve(instance, Variant::Dabt)
}

pub fn solve_rabt(instance: &AssignmentInstance) -> Result<AssignmentSolution> {
    solve(instance, Variant::Rabt)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn dev(id: u32, capacity: f64) -> InstanceDeveloper {
        InstanceDeveloper {
            dev_id: DevId(id),
            capacity,
        }
    }

    pub(crate) fn bug(id: u64, s: &[f64], c: &[f64]) -> InstanceBug {
        InstanceBug {
            bug_id: BugId(id),
            suitability: s.to_vec(),
            cost: c.to_vec(),
        }
    }

    fn a(b: u64, d: u32) -> Assignment {
        Assignment {
            bug_id: BugId(b),
            dev_id: DevId(d),
        }
    }

    fn two_bug() -> AssignmentInstance {
        AssignmentInstance {
            alpha: 0.5,
            developers: vec![dev(1, 10.0), dev(2, 10.0)],
            bugs: vec![bug(1, &[1.0, 0.4], &[4.0, 2.0]), bug(2, &[0.2, 1.0], &[3.0, 6.0])],
            precedence: vec![],
            precedence_mode: PrecedenceMode::SameDeveloper,
        }
    }

    #[test]
    fn empty_assignment_is_zero() {
        assert_eq!(objective_value(&two_bug(), Variant::Dabt, &[]).unwrap(), 0.0);
    }

    #[test]
    fn ideal_match_contributes_one() {
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            let inst = AssignmentInstance {
                alpha,
                developers: vec![dev(1, 5.0), dev(2, 5.0)],
                bugs: vec![bug(1, &[1.0, 0.3], &[2.0, 4.0])],
                precedence: vec![],
                precedence_mode: PrecedenceMode::SameDeveloper,
            };
            assert_eq!(objective_value(&inst, Variant::Dabt, &[a(1, 1)]).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_bug_hand_value() {
        // bug1 -> dev2: 0.5*0.4 + 0.5*(2/2) = 0.7
        // bug2 -> dev1: 0.5*0.2 + 0.5*(3/3) = 0.6
        let v = objective_value(&two_bug(), Variant::Dabt, &[a(1, 2), a(2, 1)]).unwrap();
        assert!((v - 1.3).abs() < 1e-15);
        // bug1 -> dev1: 0.5 + 0.5*0.5 = 0.75; bug2 -> dev2: 0.5 + 0.5*0.5 = 0.75
        let v = objective_value(&two_bug(), Variant::Dabt, &[a(1, 1), a(2, 2)]).unwrap();
        assert!((v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn infeasible_sets_rejected() {
        let mut inst = two_bug();
        assert!(objective_value(&inst, Variant::Dabt, &[a(1, 1), a(1, 2)]).is_err());
        inst.developers[0].capacity = 5.0;
        assert!(objective_value(&inst, Variant::Dabt, &[a(1, 1), a(2, 1)]).is_err());
        inst.precedence = vec![(BugId(1), BugId(2))];
        assert!(objective_value(&inst, Variant::Dabt, &[a(2, 2)]).is_err());
        assert!(objective_value(&inst, Variant::Dabt, &[a(1, 1), a(2, 2)]).is_err());
        assert!(objective_value(&inst, Variant::Rabt, &[a(2, 2)]).is_ok());
        inst.precedence_mode = PrecedenceMode::AnyDeveloper;
        assert!(objective_value(&inst, Variant::Dabt, &[a(1, 1), a(2, 2)]).is_ok());
    }

    #[test]
    fn validation_catches_bad_instances() {
        let mut inst = two_bug();
        inst.alpha = 1.5;
        assert!(inst.validate().is_err());
        let mut inst = two_bug();
        inst.bugs[0].cost[1] = 0.0;
        assert!(inst.validate().is_err());
        let mut inst = two_bug();
        inst.precedence = vec![(BugId(1), BugId(2)), (BugId(2), BugId(1))];
        assert!(inst.validate().is_err());
        let mut inst = two_bug();
        inst.precedence = vec![(BugId(1), BugId(9))];
        assert!(inst.validate().is_err());
        assert!(two_bug().validate().is_ok());
    }
}
