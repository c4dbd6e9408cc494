//! Depth-first branch-and-bound.
//!
//! Bugs are branched in a topological order of the precedence arcs, taking
//! the bug with the best stand-alone contribution first among those whose
//! blockers are already decided. Each bug tries its feasible developers by
//! decreasing contribution and then "unassigned". A node is pruned when the
//! smaller of two admissible bounds cannot beat the incumbent:
//!
//! * every undecided bug at its best developer that still has room, and
//! * per-developer fractional knapsacks over the undecided bugs, which
//!   drops the at-most-one-developer rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    check_feasibility, Assignment, AssignmentInstance, AssignmentSolution, PrecedenceMode, Variant,
    CAPACITY_EPS,
};
use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Undecided,
    Skipped,
    Dev(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Allowed {
    Any,
    Only(usize),
    Nothing,
}

struct Search<'a> {
    mode: PrecedenceMode,
    cost: Vec<&'a [f64]>,
    contrib: Vec<Vec<f64>>,
    parents: Vec<Vec<usize>>,
    order: Vec<usize>,
    rank: Vec<usize>,
    /// Per bug, developers by decreasing contribution.
    dev_pref: Vec<Vec<usize>>,
    /// Per developer, bugs by decreasing contribution per day.
    by_density: Vec<Vec<usize>>,
    remaining: Vec<f64>,
    slots: Vec<Slot>,
    value: f64,
    best_value: f64,
    best_slots: Vec<Slot>,
    nodes: u64,
}

pub fn solve(instance: &AssignmentInstance, variant: Variant) -> Result<AssignmentSolution> {
    instance.validate()?;
    let n = instance.bugs.len();
    let nd = instance.developers.len();
    if n == 0 || nd == 0 {
        return Ok(AssignmentSolution::empty());
    }

    let contrib: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..nd).map(|d| instance.contribution(variant, i, d)).collect())
        .collect();
    let capacity: Vec<f64> = instance.developers.iter().map(|d| d.capacity).collect();
    let cost: Vec<&[f64]> = instance.bugs.iter().map(|b| b.cost.as_slice()).collect();
    let parents = match variant {
        Variant::Dabt => instance.parent_indices(),
        Variant::Rabt => vec![Vec::new(); n],
    };

    let standalone: Vec<f64> = (0..n)
        .map(|i| {
            (0..nd)
                .filter(|&d| cost[i][d] <= capacity[d] + CAPACITY_EPS)
                .map(|d| contrib[i][d])
                .fold(0.0, f64::max)
        })
        .collect();
    let order = branching_order(instance, &parents, &standalone);
    let mut rank = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }

    let dev_pref = (0..n)
        .map(|i| {
            let mut ds: Vec<usize> = (0..nd).collect();
            ds.sort_by(|&a, &b| contrib[i][b].total_cmp(&contrib[i][a]).then(a.cmp(&b)));
            ds
        })
        .collect();
    let by_density = (0..nd)
        .map(|d| {
            let mut bs: Vec<usize> = (0..n).collect();
            bs.sort_by(|&a, &b| {
                (contrib[b][d] / cost[b][d])
                    .total_cmp(&(contrib[a][d] / cost[a][d]))
                    .then(rank[a].cmp(&rank[b]))
            });
            bs
        })
        .collect();

    let mut search = Search {
        mode: instance.precedence_mode,
        cost,
        contrib,
        parents,
        order,
        rank,
        dev_pref,
        by_density,
        remaining: capacity,
        slots: vec![Slot::Undecided; n],
        value: 0.0,
        best_value: 0.0,
        best_slots: vec![Slot::Skipped; n],
        nodes: 0,
    };
    search.branch(0);

    let mut assignments: Vec<Assignment> = search
        .best_slots
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Slot::Dev(d) => Some(Assignment {
                bug_id: instance.bugs[i].bug_id,
                dev_id: instance.developers[*d].dev_id,
            }),
            _ => None,
        })
        .collect();
    assignments.sort();
    check_feasibility(instance, variant, &assignments)
        .map_err(|e| Error::Solver(format!("internal: solver produced an infeasible solution: {e}")))?;
    let objective_value = search
        .best_slots
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Slot::Dev(d) => Some(search.contrib[i][*d]),
            _ => None,
        })
        .sum();
    Ok(AssignmentSolution {
        assignments,
        objective_value,
        node_count: search.nodes,
    })
}

#[derive(PartialEq)]
struct Ready {
    score: f64,
    bug_id: u64,
    index: usize,
}

impl Eq for Ready {}

impl PartialOrd for Ready {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ready {
    // max-heap: higher score first, then smaller bug id
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(other.bug_id.cmp(&self.bug_id))
    }
}

fn branching_order(instance: &AssignmentInstance, parents: &[Vec<usize>], standalone: &[f64]) -> Vec<usize> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let entry = |i: usize| Ready {
        score: standalone[i],
        bug_id: instance.bugs[i].bug_id.0,
        index: i,
    };
    let mut heap: BinaryHeap<Ready> = (0..n).filter(|&i| indegree[i] == 0).map(entry).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Ready { index, .. }) = heap.pop() {
        order.push(index);
        for &c in &children[index] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                heap.push(entry(c));
            }
        }
    }
    order
}

impl Search<'_> {
    /// Which developers may take bug `i` given its blockers' decisions.
    /// Undecided blockers are treated optimistically.
    fn allowed(&self, i: usize) -> Allowed {
        let mut allowed = Allowed::Any;
        for &p in &self.parents[i] {
            match self.slots[p] {
                Slot::Undecided => {}
                Slot::Skipped => return Allowed::Nothing,
                Slot::Dev(d) => {
                    if self.mode == PrecedenceMode::SameDeveloper {
                        allowed = match allowed {
                            Allowed::Any => Allowed::Only(d),
                            Allowed::Only(e) if e == d => Allowed::Only(d),
                            _ => return Allowed::Nothing,
                        };
                    }
                }
            }
        }
        allowed
    }

    fn fits(&self, i: usize, d: usize) -> bool {
        self.cost[i][d] <= self.remaining[d] + CAPACITY_EPS
    }

    fn permits(allowed: Allowed, d: usize) -> bool {
        match allowed {
            Allowed::Any => true,
            Allowed::Only(e) => e == d,
            Allowed::Nothing => false,
        }
    }

    fn bound(&self, pos: usize) -> f64 {
        let undecided = &self.order[pos..];
        let mut allowed = vec![Allowed::Nothing; self.slots.len()];
        let mut per_bug = 0.0;
        for &i in undecided {
            let a = self.allowed(i);
            allowed[i] = a;
            per_bug += self.dev_pref[i]
                .iter()
                .find(|&&d| Self::permits(a, d) && self.fits(i, d))
                .map_or(0.0, |&d| self.contrib[i][d]);
        }
        if per_bug <= self.best_value - self.value + TOL {
            return per_bug;
        }
        let mut knapsacks = 0.0;
        for (d, bugs) in self.by_density.iter().enumerate() {
            let mut room = self.remaining[d] + CAPACITY_EPS;
            for &i in bugs {
                if room <= 0.0 {
                    break;
                }
                if self.rank[i] < pos || !Self::permits(allowed[i], d) {
                    continue;
                }
                let c = self.cost[i][d];
                if c <= room {
                    knapsacks += self.contrib[i][d];
                    room -= c;
                } else {
                    knapsacks += self.contrib[i][d] * room / c;
                    room = 0.0;
                }
            }
        }
        per_bug.min(knapsacks)
    }

    fn branch(&mut self, pos: usize) {
        self.nodes += 1;
        if pos == self.order.len() {
            if self.value > self.best_value + TOL {
                self.best_value = self.value;
                self.best_slots.clone_from(&self.slots);
            }
            return;
        }
        if self.value + self.bound(pos) <= self.best_value + TOL {
            return;
        }
        let i = self.order[pos];
        let allowed = self.allowed(i);
        for k in 0..self.dev_pref[i].len() {
            let d = self.dev_pref[i][k];
            if !Self::permits(allowed, d) || !self.fits(i, d) {
                continue;
            }
            let c = self.cost[i][d];
            let gain = self.contrib[i][d];
            self.slots[i] = Slot::Dev(d);
            self.remaining[d] -= c;
            self.value += gain;
            self.branch(pos + 1);
            self.value -= gain;
            self.remaining[d] += c;
        }
        self.slots[i] = Slot::Skipped;
        self.branch(pos + 1);
        self.slots[i] = Slot::Undecided;
    }
}
