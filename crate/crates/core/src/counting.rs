//! Long-format construction from a baseline table and a table of repeated
//! measurements.
//!
//! Each measurement epoch opens a new interval; values are carried forward
//! per covariate from the most recent non-missing measurement (LOCF), falling
//! back to the baseline table. Only the final interval of a subject carries
//! the terminal status.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::data::{Cohort, ObservationInterval, Status, SubjectId};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRecord {
    pub subject: SubjectId,
    pub follow_up: f64,
    pub status: Status,
    /// Aligned with [`BaselineTable::covariate_names`]; `None` is missing.
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaselineTable {
    pub covariate_names: Vec<String>,
    pub records: Vec<BaselineRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub subject: SubjectId,
    pub day: f64,
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LongitudinalTable {
    pub covariate_names: Vec<String>,
    pub rows: Vec<Measurement>,
}

/// Why a longitudinal row was dropped.
#[derive(Clone, Debug, PartialEq)]
pub enum RejectReason {
    AfterFollowUp { follow_up: f64 },
    Duplicate,
    UnknownSubject,
    NegativeDay,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RejectedRow {
    pub row: usize,
    pub subject: SubjectId,
    pub day: f64,
    pub reason: RejectReason,
}

impl std::fmt::Display for RejectedRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let why = match &self.reason {
            RejectReason::AfterFollowUp { follow_up } => {
                format!("measurement day is not before the end of follow-up ({follow_up})")
            }
            RejectReason::Duplicate => "duplicate (subject, day)".to_string(),
            RejectReason::UnknownSubject => "subject not in the baseline table".to_string(),
            RejectReason::NegativeDay => "negative measurement day".to_string(),
        };
        write!(f, "row {}: subject {} day {}: {}", self.row, self.subject, self.day, why)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildReport {
    pub subjects: usize,
    pub events: usize,
    /// Input measurement records: every longitudinal row read (accepted or
    /// rejected) plus a synthesised day-0 record for each subject lacking one.
    pub records: usize,
    pub intervals: usize,
    pub rejected: Vec<RejectedRow>,
}

/// Builds the counting-process cohort. Covariates are the union of the
/// baseline columns and the longitudinal columns (longitudinal columns are
/// time-varying; the rest stay at their baseline value). The marker is left
/// as NaN; scores are attached later.
pub fn build_counting_process(
    baseline: &BaselineTable,
    longitudinal: &LongitudinalTable,
) -> Result<(Cohort, BuildReport)> {
    check_widths(baseline, longitudinal)?;
    let mut names = baseline.covariate_names.clone();
    for n in &longitudinal.covariate_names {
        if !names.contains(n) {
            names.push(n.clone());
        }
    }
    let base_col: HashMap<&str, usize> =
        baseline.covariate_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let long_col: HashMap<&str, usize> =
        longitudinal.covariate_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let mut seen_subjects = HashSet::new();
    let mut follow_up: HashMap<&SubjectId, f64> = HashMap::new();
    for r in &baseline.records {
        if !seen_subjects.insert(&r.subject) {
            return Err(Error::invalid(format!("subject {} appears twice in the baseline table", r.subject)));
        }
        if !(r.follow_up > 0.0 && r.follow_up.is_finite()) {
            return Err(Error::invalid(format!(
                "subject {}: follow-up time must be positive, got {}",
                r.subject, r.follow_up
            )));
        }
        follow_up.insert(&r.subject, r.follow_up);
    }

    let mut rejected = Vec::new();
    let mut by_subject: HashMap<&SubjectId, BTreeMap<u64, usize>> = HashMap::new();
    for (row, m) in longitudinal.rows.iter().enumerate() {
        let reject = |reason| RejectedRow { row, subject: m.subject.clone(), day: m.day, reason };
        let Some(&fu) = follow_up.get(&m.subject) else {
            rejected.push(reject(RejectReason::UnknownSubject));
            continue;
        };
        if !(m.day >= 0.0) {
            rejected.push(reject(RejectReason::NegativeDay));
            continue;
        }
        if m.day >= fu {
            rejected.push(reject(RejectReason::AfterFollowUp { follow_up: fu }));
            continue;
        }
        let epochs = by_subject.entry(&m.subject).or_default();
        // non-negative floats order like their bit patterns; the first
        // occurrence of a (subject, day) pair wins
        match epochs.entry(m.day.to_bits()) {
            Entry::Occupied(_) => rejected.push(reject(RejectReason::Duplicate)),
            Entry::Vacant(slot) => {
                slot.insert(row);
            }
        }
    }

    let mut intervals = Vec::new();
    let mut records = longitudinal.rows.len();
    let mut events = 0;
    for r in &baseline.records {
        let base_values: Vec<f64> = names
            .iter()
            .map(|n| base_col.get(n.as_str()).and_then(|&j| r.values[j]).unwrap_or(f64::NAN))
            .collect();
        let mut epochs: Vec<(f64, Option<usize>)> = by_subject
            .get(&r.subject)
            .map(|e| e.values().map(|&row| (longitudinal.rows[row].day, Some(row))).collect())
            .unwrap_or_default();
        if epochs.first().is_none_or(|&(d, _)| d > 0.0) {
            epochs.insert(0, (0.0, None));
            records += 1;
        }
        if r.status.is_event() {
            events += 1;
        }
        let mut current = base_values.clone();
        for (k, &(day, row)) in epochs.iter().enumerate() {
            if let Some(row) = row {
                let m = &longitudinal.rows[row];
                for (j, n) in names.iter().enumerate() {
                    if let Some(&lj) = long_col.get(n.as_str()) {
                        if let Some(v) = m.values[lj] {
                            current[j] = v;
                        }
                    }
                }
            }
            let last = k + 1 == epochs.len();
            intervals.push(ObservationInterval {
                subject: r.subject.clone(),
                start: day,
                stop: if last { r.follow_up } else { epochs[k + 1].0 },
                status: if last { r.status } else { Status::Censored },
                marker: f64::NAN,
                covariates: current.clone(),
            });
        }
    }
    rejected.sort_by_key(|r| r.row);
    let n_intervals = intervals.len();
    let cohort = Cohort::new(intervals, names, 1.0)?;
    let report = BuildReport {
        subjects: cohort.n_subjects(),
        events,
        records,
        intervals: n_intervals,
        rejected,
    };
    Ok((cohort, report))
}

fn check_widths(baseline: &BaselineTable, longitudinal: &LongitudinalTable) -> Result<()> {
    let p = baseline.covariate_names.len();
    if let Some(r) = baseline.records.iter().find(|r| r.values.len() != p) {
        return Err(Error::invalid(format!("baseline record for subject {} has the wrong width", r.subject)));
    }
    let q = longitudinal.covariate_names.len();
    if let Some(m) = longitudinal.rows.iter().find(|m| m.values.len() != q) {
        return Err(Error::invalid(format!("measurement for subject {} has the wrong width", m.subject)));
    }
    Ok(())
}

/// Overwrites baseline values of the named columns with the day-0
/// longitudinal value when both are present and differ. Returns the number
/// of overwritten values per column.
pub fn correct_baseline_from_day0(
    baseline: &mut BaselineTable,
    longitudinal: &LongitudinalTable,
    columns: &[&str],
) -> Result<Vec<(String, usize)>> {
    let mut day0: HashMap<&SubjectId, &Measurement> = HashMap::new();
    for m in &longitudinal.rows {
        if m.day == 0.0 {
            day0.entry(&m.subject).or_insert(m);
        }
    }
    let mut counts = Vec::new();
    for &col in columns {
        let bj = baseline
            .covariate_names
            .iter()
            .position(|n| n == col)
            .ok_or_else(|| Error::Schema { column: col.to_string(), problem: "missing from baseline table".into() })?;
        let lj = longitudinal
            .covariate_names
            .iter()
            .position(|n| n == col)
            .ok_or_else(|| Error::Schema { column: col.to_string(), problem: "missing from longitudinal table".into() })?;
        let mut changed = 0;
        for r in baseline.records.iter_mut() {
            let Some(m) = day0.get(&r.subject) else { continue };
            if let (Some(b), Some(v)) = (r.values[bj], m.values[lj]) {
                if b != v {
                    r.values[bj] = Some(v);
                    changed += 1;
                }
            }
        }
        counts.push((col.to_string(), changed));
    }
    Ok(counts)
}
