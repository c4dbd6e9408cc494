//! Exhaustive reference solver for small instances.

use super::{Assignment, AssignmentInstance, AssignmentSolution, PrecedenceMode, Variant, CAPACITY_EPS};
use crate::error::{Error, Result};

pub const ORACLE_MAX_BUGS: usize = 12;

/// Enumerates every `(D + 1)^n` choice vector and keeps the best feasible
/// one. Feasibility and the objective are evaluated here from scratch so
/// the oracle shares nothing with the branch-and-bound code path beyond
/// the instance type.
pub fn brute_force_oracle(instance: &AssignmentInstance, variant: Variant) -> Result<AssignmentSolution> {
    instance.validate()?;
    let n = instance.bugs.len();
    let nd = instance.developers.len();
    if n > ORACLE_MAX_BUGS {
        return Err(Error::Solver(format!(
            "oracle refuses {n} bugs (at most {ORACLE_MAX_BUGS})"
        )));
    }
    let index_of = |id| instance.bugs.iter().position(|b| b.bug_id == id).unwrap();
    let arcs: Vec<(usize, usize)> = instance
        .precedence
        .iter()
        .map(|&(p, c)| (index_of(p), index_of(c)))
        .collect();

    // choice[i] == nd means unassigned
    let mut choice = vec![nd; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = 0u64;
    loop {
        visited += 1;
        if let Some(v) = evaluate(instance, variant, &arcs, &choice) {
            if best.as_ref().is_none_or(|(b, _)| v > *b + 1e-12) {
                best = Some((v, choice.clone()));
            }
        }
        // odometer increment
        let mut k = 0;
        while k < n {
            choice[k] = (choice[k] + 1) % (nd + 1);
            if choice[k] != nd {
                break;
            }
            k += 1;
        }
        if k == n {
            break;
        }
    }

    let (objective_value, choice) = best.unwrap_or((0.0, vec![nd; n]));
    let mut assignments: Vec<Assignment> = choice
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d < nd)
        .map(|(i, &d)| Assignment {
            bug_id: instance.bugs[i].bug_id,
            dev_id: instance.developers[d].dev_id,
        })
        .collect();
    assignments.sort();
    Ok(AssignmentSolution {
        assignments,
        objective_value,
        node_count: visited,
    })
}

fn evaluate(
    instance: &AssignmentInstance,
    variant: Variant,
    arcs: &[(usize, usize)],
    choice: &[usize],
) -> Option<f64> {
    let nd = instance.developers.len();
    let mut load = vec![0.0; nd];
    for (i, &d) in choice.iter().enumerate() {
        if d < nd {
            load[d] += instance.bugs[i].cost[d];
        }
    }
    for (d, dev) in instance.developers.iter().enumerate() {
        if load[d] > dev.capacity + CAPACITY_EPS {
            return None;
        }
    }
    if variant == Variant::Dabt {
        for &(p, c) in arcs {
            if choice[c] == nd {
                continue;
            }
            let covered = match instance.precedence_mode {
                PrecedenceMode::SameDeveloper => choice[p] == choice[c],
                PrecedenceMode::AnyDeveloper => choice[p] < nd,
            };
            if !covered {
                return None;
            }
        }
    }
    let mut total = 0.0;
    for (i, &d) in choice.iter().enumerate() {
        if d == nd {
            continue;
        }
        let bug = &instance.bugs[i];
        total += match variant {
            Variant::Rabt => bug.suitability[d],
            Variant::Dabt => {
                let max_s = bug.suitability.iter().cloned().fold(f64::MIN, f64::max);
                let min_c = bug.cost.iter().cloned().fold(f64::MAX, f64::min);
                instance.alpha * bug.suitability[d] / max_s + (1.0 - instance.alpha) * min_c / bug.cost[d]
            }
        };
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::super::tests::{bug, dev};
    use super::super::*;
    use super::*;
    use crate::corpus::BugId;

    prop_compose! {
        fn small_instance()(nd in 1usize..=3, n in 0usize..=6, seed in any::<u64>()) -> AssignmentInstance {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let developers = (0..nd).map(|d| dev(d as u32 + 1, rng.gen_range(0.0..8.0))).collect();
            let bugs = (0..n)
                .map(|i| {
                    let mut s: Vec<f64> = (0..nd).map(|_| rng.gen_range(0.0..1.0)).collect();
                    s[rng.gen_range(0..nd)] = 1.0;
                    let c: Vec<f64> = (0..nd).map(|_| rng.gen_range(1..=5) as f64).collect();
                    bug(i as u64 + 1, &s, &c)
                })
                .collect();
            let mut precedence = vec![];
            for c in 1..n {
                for p in 0..c {
                    if rng.gen_bool(0.2) {
                        precedence.push((BugId(p as u64 + 1), BugId(c as u64 + 1)));
                    }
                }
            }
            let precedence_mode = if rng.gen_bool(0.5) {
                PrecedenceMode::SameDeveloper
            } else {
                PrecedenceMode::AnyDeveloper
            };
            AssignmentInstance { alpha: rng.gen_range(0.0..=1.0), developers, bugs, precedence, precedence_mode }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn solver_matches_oracle(inst in small_instance()) {
            for variant in [Variant::Dabt, Variant::Rabt] {
                let exact = brute_force_oracle(&inst, variant).unwrap();
                let got = solve(&inst, variant).unwrap();
                prop_assert!((exact.objective_value - got.objective_value).abs() < 1e-9,
                    "{variant:?}: oracle {} solver {}", exact.objective_value, got.objective_value);
                let recomputed = objective_value(&inst, variant, &got.assignments).unwrap();
                prop_assert!((recomputed - got.objective_value).abs() < 1e-9);
            }
        }

        #[test]
        fn cost_units_do_not_matter(inst in small_instance(), power in -3i32..=3) {
            let lambda = 2f64.powi(power);
            let mut scaled = inst.clone();
            for d in &mut scaled.developers {
                d.capacity *= lambda;
            }
            for b in &mut scaled.bugs {
                for c in &mut b.cost {
                    *c *= lambda;
                }
            }
            let a = solve(&inst, Variant::Dabt).unwrap();
            let b = solve(&scaled, Variant::Dabt).unwrap();
            prop_assert!((a.objective_value - b.objective_value).abs() < 1e-9);
        }
    }

    #[test]
    fn refuses_large_instances() {
        let bugs = (0..13).map(|i| bug(i, &[1.0], &[1.0])).collect();
        let inst = AssignmentInstance {
            alpha: 0.5,
            developers: vec![dev(1, 1.0)],
            bugs,
            precedence: vec![],
            precedence_mode: PrecedenceMode::SameDeveloper,
        };
        assert!(brute_force_oracle(&inst, Variant::Dabt).is_err());
    }

    #[test]
    fn visits_every_vector() {
        let inst = AssignmentInstance {
            alpha: 0.5,
            developers: vec![dev(1, 1.0), dev(2, 1.0)],
            bugs: vec![bug(1, &[1.0, 0.5], &[1.0, 1.0]), bug(2, &[1.0, 0.5], &[1.0, 1.0])],
            precedence: vec![],
            precedence_mode: PrecedenceMode::SameDeveloper,
        };
        let sol = brute_force_oracle(&inst, Variant::Dabt).unwrap();
        assert_eq!(sol.node_count, 9);
        assert_eq!(sol.assignments.len(), 2);
    }
}
