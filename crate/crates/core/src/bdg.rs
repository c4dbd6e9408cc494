//! Evolving bug dependency graph over open bugs.
//!
//! Arcs point from the blocking bug to the bug it blocks. The graph stays
//! acyclic: an arc that would close a loop is dropped and counted.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::BugId;
use crate::error::{validation, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum GraphEvent {
    Open { bug: BugId },
    AddArc { blocker: BugId, blocked: BugId },
    RemoveArc { blocker: BugId, blocked: BugId },
    Resolve { bug: BugId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventOutcome {
    Applied,
    /// Nothing to do: already in that state, or an endpoint is resolved or excluded.
    Ignored,
    RejectedCycle,
}

#[derive(Clone, Debug, Default)]
pub struct DependencyGraph {
    open: BTreeSet<BugId>,
    resolved: BTreeSet<BugId>,
    excluded: BTreeSet<BugId>,
    parents: BTreeMap<BugId, BTreeSet<BugId>>,
    children: BTreeMap<BugId, BTreeSet<BugId>>,
    rejected_cycles: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub mean_depth: f64,
    pub mean_degree: f64,
    pub nodes: usize,
    pub arcs: usize,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bugs that must never enter the graph, e.g. duplicates.
    pub fn exclude(&mut self, bug: BugId) {
        self.excluded.insert(bug);
    }

    pub fn is_open(&self, bug: BugId) -> bool {
        self.open.contains(&bug)
    }

    pub fn is_resolved(&self, bug: BugId) -> bool {
        self.resolved.contains(&bug)
    }

    pub fn node_count(&self) -> usize {
        self.open.len()
    }

    pub fn arc_count(&self) -> usize {
        self.parents.values().map(BTreeSet::len).sum()
    }

    pub fn rejected_cycles(&self) -> usize {
        self.rejected_cycles
    }

    pub fn open_bugs(&self) -> impl Iterator<Item = BugId> + '_ {
        self.open.iter().copied()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (BugId, BugId)> + '_ {
        self.children
            .iter()
            .flat_map(|(&p, cs)| cs.iter().map(move |&c| (p, c)))
    }

    fn can_hold(&self, bug: BugId) -> bool {
        !self.resolved.contains(&bug) && !self.excluded.contains(&bug)
    }

    fn open_node(&mut self, bug: BugId) -> bool {
        self.can_hold(bug) && self.open.insert(bug)
    }

    pub fn apply_event(&mut self, event: GraphEvent) -> EventOutcome {
        match event {
            GraphEvent::Open { bug } => {
                if self.open_node(bug) {
                    EventOutcome::Applied
                } else {
                    EventOutcome::Ignored
                }
            }
            GraphEvent::AddArc { blocker, blocked } => {
                if !self.can_hold(blocker) || !self.can_hold(blocked) {
                    return EventOutcome::Ignored;
                }
                if self.children.get(&blocker).is_some_and(|c| c.contains(&blocked)) {
                    return EventOutcome::Ignored;
                }
                if blocker == blocked || self.reaches(blocked, blocker) {
                    self.rejected_cycles += 1;
                    return EventOutcome::RejectedCycle;
                }
                self.open_node(blocker);
                self.open_node(blocked);
                self.children.entry(blocker).or_default().insert(blocked);
                self.parents.entry(blocked).or_default().insert(blocker);
                EventOutcome::Applied
            }
            GraphEvent::RemoveArc { blocker, blocked } => {
                if self.unlink(blocker, blocked) {
                    EventOutcome::Applied
                } else {
                    EventOutcome::Ignored
                }
            }
            GraphEvent::Resolve { bug } => {
                let was_open = self.open.remove(&bug);
                self.resolved.insert(bug);
                for c in self.children.remove(&bug).unwrap_or_default() {
                    remove_from(&mut self.parents, c, bug);
                }
                for p in self.parents.remove(&bug).unwrap_or_default() {
                    remove_from(&mut self.children, p, bug);
                }
                if was_open {
                    EventOutcome::Applied
                } else {
                    EventOutcome::Ignored
                }
            }
        }
    }

    fn unlink(&mut self, blocker: BugId, blocked: BugId) -> bool {
        let removed = remove_from(&mut self.children, blocker, blocked);
        remove_from(&mut self.parents, blocked, blocker);
        removed
    }

    /// Whether `to` is reachable from `from` following blocker -> blocked arcs.
    fn reaches(&self, from: BugId, to: BugId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                if let Some(cs) = self.children.get(&n) {
                    stack.extend(cs.iter().copied());
                }
            }
        }
        false
    }

    /// Direct, unresolved blockers of an open bug.
    pub fn blocking_parents(&self, bug: BugId) -> Result<BTreeSet<BugId>> {
        if !self.open.contains(&bug) {
            return Err(validation(format!("bug {bug} is not open in the dependency graph")));
        }
        Ok(self.parents.get(&bug).cloned().unwrap_or_default())
    }

    /// Kahn's algorithm over the open nodes; `true` when every node sorts.
    pub fn is_acyclic(&self) -> bool {
        let mut indegree: BTreeMap<BugId, usize> = self.open.iter().map(|&b| (b, 0)).collect();
        for (_, c) in self.arcs() {
            *indegree.entry(c).or_default() += 1;
        }
        let mut ready: Vec<BugId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&b, _)| b).collect();
        let mut sorted = 0;
        while let Some(n) = ready.pop() {
            sorted += 1;
            for &c in self.children.get(&n).into_iter().flatten() {
                let d = indegree.get_mut(&c).expect("arc endpoint is a node");
                *d -= 1;
                if *d == 0 {
                    ready.push(c);
                }
            }
        }
        sorted == indegree.len()
    }

    /// Longest blocker chain above each open node (0 for roots).
    pub fn depths(&self) -> BTreeMap<BugId, usize> {
        let mut memo: BTreeMap<BugId, usize> = BTreeMap::new();
        for &bug in &self.open {
            self.depth_of(bug, &mut memo);
        }
        memo
    }

    fn depth_of(&self, bug: BugId, memo: &mut BTreeMap<BugId, usize>) -> usize {
        if let Some(&d) = memo.get(&bug) {
            return d;
        }
        // iterative post-order to survive long chains
        let mut stack = vec![(bug, false)];
        while let Some((n, expanded)) = stack.pop() {
            if memo.contains_key(&n) {
                continue;
            }
            let parents = self.parents.get(&n);
            if expanded {
                let d = parents
                    .into_iter()
                    .flatten()
                    .map(|p| memo[p] + 1)
                    .max()
                    .unwrap_or(0);
                memo.insert(n, d);
            } else {
                stack.push((n, true));
                for &p in parents.into_iter().flatten() {
                    if !memo.contains_key(&p) {
                        stack.push((p, false));
                    }
                }
            }
        }
        memo[&bug]
    }

    pub fn metrics_snapshot(&self) -> GraphMetrics {
        let nodes = self.open.len();
        if nodes == 0 {
            return GraphMetrics::default();
        }
        let arcs = self.arc_count();
        let depth_sum: usize = self.depths().values().sum();
        GraphMetrics {
            mean_depth: depth_sum as f64 / nodes as f64,
            mean_degree: arcs as f64 / nodes as f64,
            nodes,
            arcs,
        }
    }

    /// `blocker,blocked` rows, sorted.
    pub fn write_arc_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["blocker", "blocked"])?;
        for (p, c) in self.arcs() {
            w.write_record([p.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn remove_from(map: &mut BTreeMap<BugId, BTreeSet<BugId>>, key: BugId, value: BugId) -> bool {
    let Some(set) = map.get_mut(&key) else {
        return false;
    };
    let removed = set.remove(&value);
    if set.is_empty() {
        map.remove(&key);
    }
    removed
}
