//! Run-level comparison metrics, the policy comparison table and the
//! trade-off sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DevId, DeveloperProfile};
use crate::error::Result;
use crate::simulator::{DailySample, Outcome, RunMeta};
use crate::stats::mean_std;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_assigned: usize,
    pub n_unassigned: usize,
    pub n_assigned_developers: usize,
    /// Mean and population standard deviation of bugs per developer, over
    /// developers with at least one assignment.
    pub task_mean: f64,
    pub task_std: f64,
    /// Over bugs completed by the end of the run.
    pub mean_fixing_days: f64,
    pub pct_overdue: f64,
    pub pct_unfixed: f64,
    pub accuracy_pct: f64,
    pub pct_infeasible_assignments: f64,
    pub mean_bdg_depth: f64,
    pub mean_bdg_degree: f64,
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Percentages use every managed bug as the denominator, except accuracy
/// and infeasibility, which are shares of the assignments made.
///
/// A bug is unfixed when no completion falls inside the run, and overdue
/// when it is unfixed or took more than the horizon from report to fix.
/// An assignment is accurate when the developer fixed a bug of the same
/// component during training.
pub fn compute_report(
    meta: &RunMeta,
    outcomes: &[Outcome],
    samples: &[DailySample],
    profiles: &[DeveloperProfile],
) -> MetricsReport {
    let total = meta.managed_bugs;
    let n_assigned = outcomes.len();

    let mut per_dev: BTreeMap<DevId, usize> = BTreeMap::new();
    for o in outcomes {
        *per_dev.entry(o.dev_id).or_default() += 1;
    }
    let counts: Vec<f64> = per_dev.values().map(|&n| n as f64).collect();
    let (task_mean, task_std) = mean_std(&counts);

    let completed: Vec<&Outcome> = outcomes.iter().filter(|o| o.completion_day <= meta.end_day).collect();
    let on_time = completed
        .iter()
        .filter(|o| (o.completion_day - o.reported_at) as f64 <= meta.horizon)
        .count();

    let experience: BTreeMap<DevId, &BTreeSet<String>> =
        profiles.iter().map(|p| (p.dev_id, &p.components_experienced)).collect();
    let accurate = outcomes
        .iter()
        .filter(|o| experience.get(&o.dev_id).is_some_and(|c| c.contains(&o.component)))
        .count();

    MetricsReport {
        n_assigned,
        n_unassigned: total.saturating_sub(n_assigned),
        n_assigned_developers: per_dev.len(),
        task_mean,
        task_std,
        mean_fixing_days: mean(completed.iter().map(|o| o.fixing_days as f64)),
        pct_overdue: pct(total.saturating_sub(on_time), total),
        pct_unfixed: pct(total.saturating_sub(completed.len()), total),
        accuracy_pct: pct(accurate, n_assigned),
        pct_infeasible_assignments: pct(outcomes.iter().filter(|o| o.is_infeasible()).count(), n_assigned),
        mean_bdg_depth: mean(samples.iter().map(|s| s.mean_depth)),
        mean_bdg_degree: mean(samples.iter().map(|s| s.mean_degree)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Better {
    Higher,
    Lower,
    Neither,
}

type Getter = fn(&MetricsReport) -> f64;

const ROWS: [(&str, Better, Getter); 12] = [
    ("n_assigned", Better::Higher, |r| r.n_assigned as f64),
    ("n_unassigned", Better::Lower, |r| r.n_unassigned as f64),
    ("n_assigned_developers", Better::Higher, |r| r.n_assigned_developers as f64),
    ("task_mean", Better::Neither, |r| r.task_mean),
    ("task_std", Better::Lower, |r| r.task_std),
    ("mean_fixing_days", Better::Lower, |r| r.mean_fixing_days),
    ("pct_overdue", Better::Lower, |r| r.pct_overdue),
    ("pct_unfixed", Better::Lower, |r| r.pct_unfixed),
    ("accuracy_pct", Better::Higher, |r| r.accuracy_pct),
    ("pct_infeasible_assignments", Better::Lower, |r| r.pct_infeasible_assignments),
    ("mean_bdg_depth", Better::Neither, |r| r.mean_bdg_depth),
    ("mean_bdg_degree", Better::Neither, |r| r.mean_bdg_degree),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub values: Vec<f64>,
    /// Column of the unique best value, if any.
    pub best: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub columns: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// The historical replay is the reference column and never competes for
/// the best flag.
pub const REFERENCE_COLUMN: &str = "actual";

/// One column per labelled report, one row per metric.
pub fn compare_policies(reports: &[(String, MetricsReport)]) -> ComparisonTable {
    let columns: Vec<String> = reports.iter().map(|(l, _)| l.clone()).collect();
    let rows = ROWS
        .iter()
        .map(|&(metric, better, get)| {
            let values: Vec<f64> = reports.iter().map(|(_, r)| get(r)).collect();
            ComparisonRow {
                metric,
                best: unique_best(&columns, &values, better),
                values,
            }
        })
        .collect();
    ComparisonTable { columns, rows }
}

fn unique_best(columns: &[String], values: &[f64], better: Better) -> Option<usize> {
    let sign = match better {
        Better::Higher => 1.0,
        Better::Lower => -1.0,
        Better::Neither => return None,
    };
    let competing: Vec<usize> = (0..values.len()).filter(|&i| columns[i] != REFERENCE_COLUMN).collect();
    let top = competing.iter().map(|&i| sign * values[i]).fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = competing.into_iter().filter(|&i| sign * values[i] == top).collect();
    match winners.as_slice() {
        [only] if values.len() > 1 => Some(*only),
        _ => None,
    }
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

impl ComparisonTable {
    /// `metric,<columns...>,best`; `best` names the flagged column or is empty.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("best".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.metric.to_string()];
            rec.extend(row.values.iter().map(|v| v.to_string()));
            rec.push(row.best.map(|i| self.columns[i].clone()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text; the best value of a row carries a `*`.
    pub fn to_text(&self) -> String {
        let mut cells: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().cloned());
        cells.push(header);
        for row in &self.rows {
            let mut line = vec![row.metric.to_string()];
            for (i, v) in row.values.iter().enumerate() {
                let mark = if row.best == Some(i) { "*" } else { "" };
                line.push(format!("{}{mark}", format_value(*v)));
            }
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &cells {
            for (c, cell) in line.iter().enumerate() {
                if c == 0 {
                    let _ = write!(out, "{cell:<w$}", w = widths[c]);
                } else {
                    let _ = write!(out, "  {cell:>w$}", w = widths[c]);
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub accuracy_pct: f64,
    pub pct_overdue: f64,
}

/// Runs `run` once per distinct alpha (in parallel) and returns the points
/// in ascending alpha.
pub fn sweep_alpha<F>(alphas: &[f64], run: F) -> Result<Vec<SweepPoint>>
where
    F: Fn(f64) -> Result<MetricsReport> + Sync,
{
    let mut grid = alphas.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.par_iter()
        .map(|&alpha| {
            run(alpha).map(|r| SweepPoint {
                alpha,
                accuracy_pct: r.accuracy_pct,
                pct_overdue: r.pct_overdue,
            })
        })
        .collect()
}

pub fn write_sweep_csv(points: &[SweepPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "accuracy_pct", "pct_overdue"])?;
    for p in points {
        w.write_record([p.alpha.to_string(), p.accuracy_pct.to_string(), p.pct_overdue.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BugId, Day};
    use crate::policies::PolicyKind;

    fn meta(managed: usize) -> RunMeta {
        RunMeta {
            policy: PolicyKind::Dabt,
            alpha: 0.5,
            horizon: 5.0,
            boundary_day: 0,
            end_day: 20,
            managed_bugs: managed,
            developers: vec![DevId(1), DevId(2)],
        }
    }

    fn outcome(bug: u64, dev: u32, component: &str, reported: Day, assigned: Day, done: Day) -> Outcome {
        Outcome {
            bug_id: BugId(bug),
            dev_id: DevId(dev),
            component: component.into(),
            reported_at: reported,
            assigned_day: assigned,
            completion_day: done,
            estimated_cost_days: 1.0,
            fixing_days: done - assigned,
            open_blockers: vec![],
        }
    }

    fn profile(dev: u32, comps: &[&str]) -> DeveloperProfile {
        DeveloperProfile {
            dev_id: DevId(dev),
            name: format!("dev{dev}"),
            fixed_bug_count: 3,
            components_experienced: comps.iter().map(|c| c.to_string()).collect(),
            is_active: true,
        }
    }

    #[test]
    fn empty_run_is_all_zero() {
        let r = compute_report(&meta(0), &[], &[], &[]);
        assert_eq!(r, MetricsReport::default());
    }

    #[test]
    fn three_assignments_one_cross_component() {
        let outs = [
            outcome(1, 1, "ui", 1, 1, 3),
            outcome(2, 1, "core", 1, 2, 4),
            outcome(3, 2, "ui", 2, 2, 30),
        ];
        let profiles = [profile(1, &["ui"]), profile(2, &["ui", "net"])];
        let r = compute_report(&meta(4), &outs, &[], &profiles);
        assert!((r.accuracy_pct - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.n_assigned, 3);
        assert_eq!(r.n_unassigned, 1);
        assert_eq!(r.n_assigned_developers, 2);
        assert_eq!(r.task_mean, 1.5);
        assert_eq!(r.task_std, 0.5);
        // bug 3 finishes after day 20; bug 4 never assigned
        assert_eq!(r.pct_unfixed, 50.0);
        assert_eq!(r.pct_overdue, 50.0);
        assert_eq!(r.mean_fixing_days, 2.0);
        assert_eq!(r.pct_infeasible_assignments, 0.0);
    }

    #[test]
    fn overdue_uses_horizon_from_report() {
        // reported 1, done 7: 6 days > 5
        let outs = [outcome(1, 1, "ui", 1, 5, 7), outcome(2, 1, "ui", 1, 1, 6)];
        let r = compute_report(&meta(2), &outs, &[], &[]);
        assert_eq!(r.pct_overdue, 50.0);
        assert_eq!(r.pct_unfixed, 0.0);
    }

    #[test]
    fn infeasible_share_and_graph_means() {
        let mut blocked = outcome(2, 1, "ui", 1, 1, 2);
        blocked.open_blockers = vec![BugId(9)];
        let outs = [outcome(1, 1, "ui", 1, 1, 2), blocked];
        let sample = |depth, degree| DailySample {
            day: 1,
            open_bugs: 3,
            arcs: 1,
            mean_depth: depth,
            mean_degree: degree,
            assigned: 0,
            deferred: 0,
            in_progress: 0,
            solver_nodes: 0,
            capacities: vec![],
        };
        let r = compute_report(&meta(2), &outs, &[sample(0.5, 0.25), sample(1.5, 0.75)], &[]);
        assert_eq!(r.pct_infeasible_assignments, 50.0);
        assert_eq!(r.mean_bdg_depth, 1.0);
        assert_eq!(r.mean_bdg_degree, 0.5);
    }

    fn report(fix: f64, overdue: f64, acc: f64) -> MetricsReport {
        MetricsReport {
            mean_fixing_days: fix,
            pct_overdue: overdue,
            accuracy_pct: acc,
            ..Default::default()
        }
    }

    fn best_of(t: &ComparisonTable, metric: &str) -> Option<usize> {
        t.rows.iter().find(|r| r.metric == metric).unwrap().best
    }

    #[test]
    fn single_report_single_column() {
        let t = compare_policies(&[("dabt".into(), report(3.0, 10.0, 70.0))]);
        assert_eq!(t.columns, vec!["dabt"]);
        assert!(t.rows.iter().all(|r| r.values.len() == 1 && r.best.is_none()));
    }

    #[test]
    fn identical_reports_flag_nothing() {
        let r = report(3.0, 10.0, 70.0);
        let t = compare_policies(&[("a".into(), r.clone()), ("b".into(), r)]);
        assert!(t.rows.iter().all(|r| r.best.is_none()));
    }

    #[test]
    fn three_report_flags() {
        let t = compare_policies(&[
            ("cbr".into(), report(9.0, 30.0, 90.0)),
            ("costriage".into(), report(6.0, 20.0, 80.0)),
            ("dabt".into(), report(3.0, 20.0, 75.0)),
        ]);
        assert_eq!(best_of(&t, "mean_fixing_days"), Some(2));
        assert_eq!(best_of(&t, "pct_overdue"), None);
        assert_eq!(best_of(&t, "accuracy_pct"), Some(0));
        assert_eq!(best_of(&t, "mean_bdg_depth"), None);
        let text = t.to_text();
        assert!(text.contains("3*"), "{text}");
        assert!(text.contains("90*"), "{text}");
    }

    #[test]
    fn reference_column_never_flagged() {
        let t = compare_policies(&[
            ("actual".into(), report(1.0, 0.0, 99.0)),
            ("dabt".into(), report(3.0, 20.0, 75.0)),
            ("cbr".into(), report(5.0, 30.0, 80.0)),
        ]);
        assert_eq!(best_of(&t, "mean_fixing_days"), Some(1));
        assert_eq!(best_of(&t, "accuracy_pct"), Some(2));
    }

    #[test]
    fn csv_layout() {
        let t = compare_policies(&[("a".into(), report(3.0, 10.0, 70.0)), ("b".into(), report(2.0, 10.0, 60.0))]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("metric,a,b,best\n"));
        assert!(text.contains("mean_fixing_days,3,2,b\n"));
        assert!(text.contains("pct_overdue,10,10,\n"));
    }

    #[test]
    fn sweep_dedups_and_sorts() {
        let pts = sweep_alpha(&[1.0, 0.5, 0.5, 0.0], |a| Ok(report(0.0, 10.0 * a, 50.0 + a))).unwrap();
        let alphas: Vec<f64> = pts.iter().map(|p| p.alpha).collect();
        assert_eq!(alphas, vec![0.0, 0.5, 1.0]);
        assert_eq!(pts[2].accuracy_pct, 51.0);
        assert_eq!(sweep_alpha(&[0.5], |_| Ok(report(0.0, 0.0, 0.0))).unwrap().len(), 1);
    }
}
