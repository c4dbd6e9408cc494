//! Bug-history ingestion, the four cleaning filters, active-developer
//! selection and the train/test split.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::stats;

/// Integer day offset from the dataset epoch.
pub type Day = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BugId(pub u64);

impl fmt::Display for BugId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DevId(pub u32);

impl fmt::Display for DevId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FinalStatus {
    Fixed,
    Closed,
    Other,
}

impl FinalStatus {
    pub fn is_resolved(self) -> bool {
        matches!(self, FinalStatus::Fixed | FinalStatus::Closed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DependencyKind {
    AddBlocks,
    RemoveBlocks,
}

/// `self` blocks (or stops blocking) `other` on `day`.
///
/// Serialized as the array `[day, "ADD_BLOCKS" | "REMOVE_BLOCKS", other]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(Day, DependencyKind, BugId)", into = "(Day, DependencyKind, BugId)")]
pub struct DependencyEvent {
    pub day: Day,
    pub kind: DependencyKind,
    pub other: BugId,
}

impl From<(Day, DependencyKind, BugId)> for DependencyEvent {
    fn from((day, kind, other): (Day, DependencyKind, BugId)) -> Self {
        Self { day, kind, other }
    }
}

impl From<DependencyEvent> for (Day, DependencyKind, BugId) {
    fn from(e: DependencyEvent) -> Self {
        (e.day, e.kind, e.other)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BugRecord {
    pub bug_id: BugId,
    pub summary: String,
    pub description: String,
    pub component: String,
    pub reported_at: Day,
    #[serde(default)]
    pub assigned_at: Option<Day>,
    #[serde(default)]
    pub resolved_at: Option<Day>,
    #[serde(default)]
    pub actual_assignee: Option<DevId>,
    pub status_final: FinalStatus,
    #[serde(default)]
    pub dependency_events: Vec<DependencyEvent>,
}

impl BugRecord {
    /// `resolved_at - assigned_at + 1`, present only when the bug was
    /// assigned no later than it was resolved.
    pub fn fixing_time(&self) -> Option<i64> {
        match (self.assigned_at, self.resolved_at) {
            (Some(a), Some(r)) if a <= r => Some(r - a + 1),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeveloperProfile {
    pub dev_id: DevId,
    pub name: String,
    pub fixed_bug_count: usize,
    pub components_experienced: BTreeSet<String>,
    pub is_active: bool,
}

/// Reads one bug per line. Blank lines are skipped; the result is sorted by
/// `(reported_at, bug_id)`.
pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<BugRecord>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_events(file, path)
}

pub fn parse_events(reader: impl Read, label: impl AsRef<Path>) -> Result<Vec<BugRecord>> {
    let label = label.as_ref();
    let mut records: Vec<BugRecord> = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: BugRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: label.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(record.bug_id) {
            return Err(validation(format!(
                "duplicate bug_id {} on line {}",
                record.bug_id,
                idx + 1
            )));
        }
        records.push(record);
    }
    records.sort_by_key(|r| (r.reported_at, r.bug_id));
    Ok(records)
}

pub fn write_events(records: &[BugRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-developer fix counts over resolved, assigned records. A developer is
/// active when their count exceeds the IQR of all developers' counts.
///
/// Callers pass training-phase records only. Profiles come back sorted by id.
pub fn select_active_developers(records: &[BugRecord]) -> Vec<DeveloperProfile> {
    let mut by_dev: BTreeMap<DevId, (usize, BTreeSet<String>)> = BTreeMap::new();
    for r in records {
        if !r.status_final.is_resolved() {
            continue;
        }
        if let Some(dev) = r.actual_assignee {
            let entry = by_dev.entry(dev).or_default();
            entry.0 += 1;
            entry.1.insert(r.component.clone());
        }
    }
    let counts: Vec<f64> = by_dev.values().map(|(n, _)| *n as f64).collect();
    let iqr = stats::iqr(&counts).unwrap_or(0.0);
    by_dev
        .into_iter()
        .map(|(dev_id, (fixed_bug_count, components))| DeveloperProfile {
            dev_id,
            name: format!("dev{}", dev_id.0),
            fixed_bug_count,
            components_experienced: components,
            is_active: fixed_bug_count as f64 > iqr,
        })
        .collect()
}

/// Train keeps `reported_at <= boundary`, test the rest.
pub fn split_train_test(
    records: &[BugRecord],
    boundary_day: Day,
) -> Result<(Vec<BugRecord>, Vec<BugRecord>)> {
    if boundary_day < 0 {
        return Err(validation(format!(
            "boundary day {boundary_day} precedes the dataset epoch"
        )));
    }
    Ok(records
        .iter()
        .cloned()
        .partition(|r| r.reported_at <= boundary_day))
}

/// Third quartile of the training fixing times.
pub fn compute_horizon(train_fixing_times: &[f64]) -> Result<f64> {
    stats::quantile(train_fixing_times, 0.75)
        .ok_or_else(|| validation("cannot derive the horizon from an empty fixing-time sample"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum OutlierRule {
    /// Drop fixing times above `Q3 + whisker * IQR`.
    Tukey { whisker: f64 },
    MaxDays { days: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ActiveRule {
    /// Fix count above the IQR of training-phase fix counts.
    FromTraining,
    Fixed { developers: BTreeSet<DevId> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleaningRules {
    pub boundary_day: Day,
    pub outlier: OutlierRule,
    pub active: ActiveRule,
}

impl CleaningRules {
    pub fn new(boundary_day: Day) -> Self {
        Self {
            boundary_day,
            outlier: OutlierRule::Tukey { whisker: 1.5 },
            active: ActiveRule::FromTraining,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleaningStep {
    pub step: String,
    pub training: usize,
    pub testing: usize,
    pub kept: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub steps: Vec<CleaningStep>,
    pub boundary_day: Day,
    pub first_day: Day,
    pub last_day: Day,
    pub active_developers: Vec<DevId>,
    pub max_fix_threshold: f64,
    /// Q3 of the kept training fixing times, absent when no training bug survives.
    pub horizon_days: Option<f64>,
}

impl DatasetSummary {
    /// Rules that reproduce this cleaning exactly when applied again.
    pub fn frozen_rules(&self) -> CleaningRules {
        CleaningRules {
            boundary_day: self.boundary_day,
            outlier: OutlierRule::MaxDays {
                days: self.max_fix_threshold,
            },
            active: ActiveRule::Fixed {
                developers: self.active_developers.iter().copied().collect(),
            },
        }
    }

    pub fn write_cleaning_log(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "kept_count"])?;
        for s in &self.steps {
            w.write_record([s.step.as_str(), &s.kept.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Cleaned {
    pub kept: Vec<BugRecord>,
    pub summary: DatasetSummary,
    /// Every developer seen in the training phase, active or not.
    pub developers: Vec<DeveloperProfile>,
}

impl Cleaned {
    pub fn active_profiles(&self) -> Vec<DeveloperProfile> {
        self.developers.iter().filter(|p| p.is_active).cloned().collect()
    }
}

/// Applies, in order: resolved status, active assignee, valid assignment
/// date, acceptable fixing time.
pub fn clean_bugs(records: &[BugRecord], rules: &CleaningRules) -> Cleaned {
    let boundary = rules.boundary_day;
    let mut steps = Vec::with_capacity(5);
    let mut log = |name: &str, rs: &[BugRecord]| {
        let training = rs.iter().filter(|r| r.reported_at <= boundary).count();
        steps.push(CleaningStep {
            step: name.to_string(),
            training,
            testing: rs.len() - training,
            kept: rs.len(),
        });
    };
    log("total", records);

    let resolved: Vec<BugRecord> = records
        .iter()
        .filter(|r| r.status_final.is_resolved() && r.resolved_at.is_some())
        .cloned()
        .collect();
    log("resolved_status", &resolved);

    let training_resolved: Vec<BugRecord> = resolved
        .iter()
        .filter(|r| r.reported_at <= boundary)
        .cloned()
        .collect();
    let mut developers = select_active_developers(&training_resolved);
    if let ActiveRule::Fixed { developers: fixed } = &rules.active {
        for p in &mut developers {
            p.is_active = fixed.contains(&p.dev_id);
        }
    }
    let active: BTreeSet<DevId> = developers
        .iter()
        .filter(|p| p.is_active)
        .map(|p| p.dev_id)
        .collect();

    let by_active: Vec<BugRecord> = resolved
        .into_iter()
        .filter(|r| r.actual_assignee.is_some_and(|d| active.contains(&d)))
        .collect();
    log("active_assignee", &by_active);

    let dated: Vec<BugRecord> = by_active
        .into_iter()
        .filter(|r| match (r.assigned_at, r.resolved_at) {
            (Some(a), Some(z)) => r.reported_at <= a && a <= z,
            _ => false,
        })
        .collect();
    log("known_assignment_date", &dated);

    let fixing: Vec<f64> = dated
        .iter()
        .filter_map(|r| r.fixing_time())
        .map(|t| t as f64)
        .collect();
    let threshold = match &rules.outlier {
        OutlierRule::Tukey { whisker } => stats::quartiles(&fixing)
            .map(|(q1, q3)| q3 + whisker * (q3 - q1))
            .unwrap_or(f64::INFINITY),
        OutlierRule::MaxDays { days } => *days,
    };
    let kept: Vec<BugRecord> = dated
        .into_iter()
        .filter(|r| r.fixing_time().is_some_and(|t| t as f64 <= threshold))
        .collect();
    log("acceptable_fixing_time", &kept);

    let train_times: Vec<f64> = kept
        .iter()
        .filter(|r| r.reported_at <= boundary)
        .filter_map(|r| r.fixing_time())
        .map(|t| t as f64)
        .collect();

    let summary = DatasetSummary {
        steps,
        boundary_day: boundary,
        first_day: records.iter().map(|r| r.reported_at).min().unwrap_or(0),
        last_day: records.iter().map(last_known_day).max().unwrap_or(0),
        active_developers: active.into_iter().collect(),
        max_fix_threshold: threshold,
        horizon_days: compute_horizon(&train_times).ok(),
    };
    Cleaned {
        kept,
        summary,
        developers,
    }
}

/// Latest day mentioned anywhere in the record.
pub fn last_known_day(r: &BugRecord) -> Day {
    let mut last = r.reported_at;
    for d in [r.assigned_at, r.resolved_at].into_iter().flatten() {
        last = last.max(d);
    }
    for e in &r.dependency_events {
        last = last.max(e.day);
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn bug(id: u64, reported: Day) -> BugRecord {
        BugRecord {
            bug_id: BugId(id),
            summary: String::new(),
            description: String::new(),
            component: "core".into(),
            reported_at: reported,
            assigned_at: None,
            resolved_at: None,
            actual_assignee: None,
            status_final: FinalStatus::Other,
            dependency_events: vec![],
        }
    }

    fn fixed(id: u64, dev: u32, reported: Day, assigned: Day, resolved: Day) -> BugRecord {
        BugRecord {
            assigned_at: Some(assigned),
            resolved_at: Some(resolved),
            actual_assignee: Some(DevId(dev)),
            status_final: FinalStatus::Fixed,
            ..bug(id, reported)
        }
    }

    #[test]
    fn empty_file_loads_nothing() {
        let recs = parse_events("".as_bytes(), "mem").unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn records_come_back_in_report_order() {
        let text = r#"{"bug_id":3,"summary":"c","description":"","component":"x","reported_at":9,"status_final":"OTHER"}
{"bug_id":1,"summary":"a","description":"","component":"x","reported_at":5,"status_final":"FIXED","dependency_events":[[6,"ADD_BLOCKS",3]]}

{"bug_id":2,"summary":"b","description":"","component":"x","reported_at":1,"status_final":"CLOSED"}
"#;
        let recs = parse_events(text.as_bytes(), "mem").unwrap();
        let ids: Vec<u64> = recs.iter().map(|r| r.bug_id.0).collect();
        assert_eq!(ids, vec![2, 1, 3]);
        assert_eq!(
            recs[1].dependency_events,
            vec![DependencyEvent {
                day: 6,
                kind: DependencyKind::AddBlocks,
                other: BugId(3)
            }]
        );
    }

    #[test]
    fn missing_bug_id_names_the_line() {
        let text = "{\"bug_id\":1,\"summary\":\"\",\"description\":\"\",\"component\":\"x\",\"reported_at\":0,\"status_final\":\"OTHER\"}\n{\"summary\":\"\",\"description\":\"\",\"component\":\"x\",\"reported_at\":0,\"status_final\":\"OTHER\"}\n";
        match parse_events(text.as_bytes(), "bugs.jsonl") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bug_id"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = "{\"bug_id\":1,\"summary\":\"\",\"description\":\"\",\"component\":\"x\",\"reported_at\":0,\"status_final\":\"OTHER\"}\n";
        let text = format!("{line}{line}");
        assert!(matches!(
            parse_events(text.as_bytes(), "m"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn roundtrip_through_jsonl() {
        let mut r = fixed(4, 2, 1, 2, 5);
        r.dependency_events.push(DependencyEvent {
            day: 3,
            kind: DependencyKind::RemoveBlocks,
            other: BugId(9),
        });
        let mut buf = Vec::new();
        write_events(std::slice::from_ref(&r), &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("[3,\"REMOVE_BLOCKS\",9]"));
        assert_eq!(parse_events(buf.as_slice(), "m").unwrap(), vec![r]);
    }

    #[test]
    fn active_developers_by_iqr() {
        let mut recs = Vec::new();
        let mut id = 0;
        for (dev, n) in [(1, 10), (2, 1), (3, 1), (4, 1)] {
            for _ in 0..n {
                id += 1;
                recs.push(fixed(id, dev, 0, 0, 1));
            }
        }
        let profiles = select_active_developers(&recs);
        let active: Vec<u32> = profiles
            .iter()
            .filter(|p| p.is_active)
            .map(|p| p.dev_id.0)
            .collect();
        assert_eq!(active, vec![1]);
        assert_eq!(profiles[0].fixed_bug_count, 10);
    }

    #[test]
    fn lone_developer_is_active() {
        let profiles = select_active_developers(&[fixed(1, 7, 0, 0, 0)]);
        assert_eq!(profiles.len(), 1);
        assert!(profiles[0].is_active);
        assert!(select_active_developers(&[]).is_empty());
    }

    #[test]
    fn split_includes_boundary_in_training() {
        let recs = vec![bug(1, 1), bug(2, 5), bug(3, 9)];
        let (train, test) = split_train_test(&recs, 5).unwrap();
        assert_eq!(train.iter().map(|r| r.reported_at).collect::<Vec<_>>(), [1, 5]);
        assert_eq!(test.iter().map(|r| r.reported_at).collect::<Vec<_>>(), [9]);

        let (train, test) = split_train_test(&recs, 0).unwrap();
        assert!(train.is_empty() && test.len() == 3);
        let (train, test) = split_train_test(&recs, 100).unwrap();
        assert!(train.len() == 3 && test.is_empty());
        assert!(split_train_test(&recs, -1).is_err());
    }

    #[test]
    fn horizon_is_interpolated_q3() {
        assert_eq!(compute_horizon(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 3.25);
        assert_eq!(compute_horizon(&[6.0; 5]).unwrap(), 6.0);
        assert!(compute_horizon(&[]).is_err());
    }

    #[test]
    fn valid_records_pass_untouched() {
        let recs: Vec<BugRecord> = (0..6).map(|i| fixed(i, 1, i as Day, i as Day, i as Day + 2)).collect();
        let out = clean_bugs(&recs, &CleaningRules::new(3));
        assert_eq!(out.kept, recs);
    }

    #[test]
    fn ten_record_outliers() {
        // fixing times 1,2,2,3,3,3,4,4 plus 30 and 40:
        // Q1 = 2.25, Q3 = 4 -> threshold 4 + 1.5 * 1.75 = 6.625
        let times = [1, 2, 2, 3, 3, 3, 4, 4, 30, 40];
        let recs: Vec<BugRecord> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| fixed(i as u64, 1, 0, 0, t - 1))
            .collect();
        let out = clean_bugs(&recs, &CleaningRules::new(10));
        assert_eq!(out.kept.len(), 8);
        assert!((out.summary.max_fix_threshold - 6.625).abs() < 1e-12);
        assert!(out.kept.iter().all(|r| r.fixing_time().unwrap() <= 6));
    }

    #[test]
    fn invalid_assignment_dates_dropped() {
        let mut late = fixed(1, 1, 0, 5, 3);
        late.component = "late".into();
        let mut undated = fixed(2, 1, 0, 0, 3);
        undated.assigned_at = None;
        let ok = fixed(3, 1, 0, 1, 3);
        let out = clean_bugs(&[late, undated, ok.clone()], &CleaningRules::new(10));
        assert_eq!(out.kept, vec![ok]);
        let counts: Vec<usize> = out.summary.steps.iter().map(|s| s.kept).collect();
        assert_eq!(counts, vec![3, 3, 3, 1, 1]);
    }

    #[test]
    fn cleaning_log_csv() {
        let out = clean_bugs(&[fixed(1, 1, 0, 0, 0)], &CleaningRules::new(0));
        let mut buf = Vec::new();
        out.summary.write_cleaning_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,kept_count\ntotal,1\n"));
        assert!(text.ends_with("acceptable_fixing_time,1\n"));
    }
}
