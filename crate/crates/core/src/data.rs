//! Counting-process data model.
//!
//! A [`Cohort`] is a set of `(start, stop]` intervals grouped by subject. A
//! subject whose marker is re-measured during follow-up contributes one
//! interval per measurement epoch; only the last interval of a chain can
//! carry an event. Baseline-only data is the special case of one interval per
//! subject starting at zero.

use std::collections::HashMap;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default display unit: days per year.
pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SubjectId(pub String);

impl SubjectId {
    pub fn new(id: impl Into<String>) -> Self {
        SubjectId(id.into())
    }
}

impl std::fmt::Display for SubjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Status at the end of an interval. Causes are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Censored,
    Event(u32),
}

impl Status {
    /// Integer coding used in cohort files: 0 censored, `j >= 1` cause `j`.
    pub fn from_code(code: i64) -> Result<Status> {
        match code {
            0 => Ok(Status::Censored),
            c if c >= 1 && c <= u32::MAX as i64 => Ok(Status::Event(c as u32)),
            c => Err(Error::invalid(format!("status code {c} is not 0 or a positive cause"))),
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Status::Censored => 0,
            Status::Event(c) => c,
        }
    }

    pub fn is_event(self) -> bool {
        matches!(self, Status::Event(_))
    }

    pub fn cause(self) -> Option<u32> {
        match self {
            Status::Censored => None,
            Status::Event(c) => Some(c),
        }
    }
}

/// Maps the raw PBC status coding onto a death endpoint: transplant
/// recipients are censored at the time of transplantation.
pub fn transplant_censor(raw_status: i64) -> Result<Status> {
    match raw_status {
        0 | 1 => Ok(Status::Censored),
        2 => Ok(Status::Event(1)),
        other => Err(Error::invalid(format!(
            "PBC status code {other} is not one of 0 (censored), 1 (transplant), 2 (death)"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationInterval {
    pub subject: SubjectId,
    pub start: f64,
    pub stop: f64,
    pub status: Status,
    pub marker: f64,
    /// Values aligned with [`Cohort::covariate_names`]; missing values are NaN.
    pub covariates: Vec<f64>,
}

/// Which marker value an estimator should use for a subject with updated
/// measurements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MarkerMode {
    /// The value measured at entry, held fixed over follow-up.
    Baseline,
    /// The value in force on the interval containing the time of interest.
    Updated,
}

impl std::str::FromStr for MarkerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(MarkerMode::Baseline),
            "updated" => Ok(MarkerMode::Updated),
            other => Err(Error::invalid(format!("unknown marker mode `{other}`"))),
        }
    }
}

/// Where a marker column comes from when a cohort carries several candidate
/// scores.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MarkerSource {
    Marker,
    Covariate(String),
}

/// One subject summarised at the subject level: entry marker, total
/// follow-up and terminal status (`cause == 0` means censored).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarkedTime {
    pub marker: f64,
    pub time: f64,
    pub cause: u32,
}

impl MarkedTime {
    pub fn new(marker: f64, time: f64, cause: u32) -> Self {
        MarkedTime { marker, time, cause }
    }

    pub fn is_event(&self) -> bool {
        self.cause != 0
    }
}

/// Immutable collection of interval chains.
#[derive(Clone, Debug)]
pub struct Cohort {
    intervals: Vec<ObservationInterval>,
    covariate_names: Vec<String>,
    time_unit: f64,
    subjects: Vec<Range<usize>>,
    continues: Vec<bool>,
}

impl Cohort {
    /// Validates and groups intervals by subject (first-appearance order,
    /// then by start time within a subject).
    pub fn new(
        intervals: Vec<ObservationInterval>,
        covariate_names: Vec<String>,
        time_unit: f64,
    ) -> Result<Cohort> {
        if !(time_unit > 0.0 && time_unit.is_finite()) {
            return Err(Error::invalid(format!("time unit must be positive, got {time_unit}")));
        }
        let mut order: HashMap<&SubjectId, usize> = HashMap::new();
        for iv in &intervals {
            let next = order.len();
            order.entry(&iv.subject).or_insert(next);
        }
        let mut keyed: Vec<(usize, usize)> = intervals
            .iter()
            .enumerate()
            .map(|(i, iv)| (order[&iv.subject], i))
            .collect();
        keyed.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(intervals[a.1].start.total_cmp(&intervals[b.1].start))
        });
        drop(order);
        let mut slots: Vec<Option<ObservationInterval>> = intervals.into_iter().map(Some).collect();
        let sorted: Vec<ObservationInterval> = keyed
            .iter()
            .map(|&(_, i)| slots[i].take().expect("each interval moved once"))
            .collect();
        Cohort::from_grouped(sorted, covariate_names, time_unit)
    }

    /// Builds from intervals that are already grouped by subject and sorted
    /// by start within each subject.
    fn from_grouped(
        intervals: Vec<ObservationInterval>,
        covariate_names: Vec<String>,
        time_unit: f64,
    ) -> Result<Cohort> {
        let p = covariate_names.len();
        let mut subjects = Vec::new();
        let mut begin = 0;
        for i in 0..intervals.len() {
            let iv = &intervals[i];
            if !(iv.start.is_finite() && iv.stop.is_finite()) {
                return Err(Error::invalid(format!("subject {}: non-finite interval bounds", iv.subject)));
            }
            if iv.start < 0.0 {
                return Err(Error::invalid(format!("subject {}: negative start time {}", iv.subject, iv.start)));
            }
            if !(iv.start < iv.stop) {
                return Err(Error::invalid(format!(
                    "subject {}: interval ({}, {}] must have start < stop",
                    iv.subject, iv.start, iv.stop
                )));
            }
            if iv.covariates.len() != p {
                return Err(Error::invalid(format!(
                    "subject {}: {} covariate values for {} covariate names",
                    iv.subject,
                    iv.covariates.len(),
                    p
                )));
            }
            let last_of_subject = i + 1 == intervals.len() || intervals[i + 1].subject != iv.subject;
            if !last_of_subject {
                let next = &intervals[i + 1];
                if next.start != iv.stop {
                    return Err(Error::invalid(format!(
                        "subject {}: intervals ({}, {}] and ({}, {}] are not contiguous",
                        iv.subject, iv.start, iv.stop, next.start, next.stop
                    )));
                }
                if iv.status.is_event() {
                    return Err(Error::invalid(format!(
                        "subject {}: event at {} is not on the final interval",
                        iv.subject, iv.stop
                    )));
                }
            } else {
                subjects.push(begin..i + 1);
                begin = i + 1;
            }
        }
        let mut continues = vec![false; intervals.len()];
        for r in &subjects {
            for i in r.start..r.end - 1 {
                continues[i] = true;
            }
        }
        Ok(Cohort { intervals, covariate_names, time_unit, subjects, continues })
    }

    /// Baseline cohort from subject-level triples, one interval `(0, time]`
    /// per subject with ids `1..=n`.
    pub fn from_marked_times(sample: &[MarkedTime]) -> Result<Cohort> {
        let intervals = sample
            .iter()
            .enumerate()
            .map(|(i, s)| ObservationInterval {
                subject: SubjectId((i + 1).to_string()),
                start: 0.0,
                stop: s.time,
                status: if s.cause == 0 { Status::Censored } else { Status::Event(s.cause) },
                marker: s.marker,
                covariates: Vec::new(),
            })
            .collect();
        Cohort::from_grouped(intervals, Vec::new(), 1.0)
    }

    pub fn intervals(&self) -> &[ObservationInterval] {
        &self.intervals
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn time_unit(&self) -> f64 {
        self.time_unit
    }

    pub fn with_time_unit(mut self, time_unit: f64) -> Result<Cohort> {
        if !(time_unit > 0.0 && time_unit.is_finite()) {
            return Err(Error::invalid(format!("time unit must be positive, got {time_unit}")));
        }
        self.time_unit = time_unit;
        Ok(self)
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.intervals.len()
    }

    pub fn n_events(&self) -> usize {
        self.intervals.iter().filter(|iv| iv.status.is_event()).count()
    }

    /// The interval chain of the `k`-th subject.
    pub fn subject(&self, k: usize) -> &[ObservationInterval] {
        &self.intervals[self.subjects[k].clone()]
    }

    pub fn subjects(&self) -> impl Iterator<Item = &[ObservationInterval]> + '_ {
        self.subjects.iter().map(move |r| &self.intervals[r.clone()])
    }

    /// True when interval `i` is followed by another interval of the same
    /// subject, i.e. its censoring status only marks a new measurement.
    pub fn continues(&self, i: usize) -> bool {
        self.continues[i]
    }

    pub fn is_baseline_only(&self) -> bool {
        self.subjects.iter().all(|r| r.len() == 1)
    }

    /// Subject-level summary: first marker, last stop, terminal status.
    pub fn baseline_sample(&self) -> Vec<MarkedTime> {
        self.subjects()
            .map(|chain| {
                let first = &chain[0];
                let last = &chain[chain.len() - 1];
                MarkedTime::new(first.marker, last.stop, last.status.code())
            })
            .collect()
    }

    /// Collapses every chain to one interval from the first start to the last
    /// stop carrying the entry marker and covariates.
    pub fn baseline_view(&self) -> Cohort {
        if self.is_baseline_only() {
            return self.clone();
        }
        let intervals = self
            .subjects()
            .map(|chain| {
                let first = &chain[0];
                let last = &chain[chain.len() - 1];
                ObservationInterval {
                    subject: first.subject.clone(),
                    start: first.start,
                    stop: last.stop,
                    status: last.status,
                    marker: first.marker,
                    covariates: first.covariates.clone(),
                }
            })
            .collect();
        Cohort::from_grouped(intervals, self.covariate_names.clone(), self.time_unit)
            .expect("collapsing valid chains keeps them valid")
    }

    pub fn view(&self, mode: MarkerMode) -> Cohort {
        match mode {
            MarkerMode::Baseline => self.baseline_view(),
            MarkerMode::Updated => self.clone(),
        }
    }

    /// Replaces the marker of every interval.
    pub fn with_markers(&self, markers: Vec<f64>) -> Result<Cohort> {
        if markers.len() != self.intervals.len() {
            return Err(Error::invalid(format!(
                "{} marker values for {} intervals",
                markers.len(),
                self.intervals.len()
            )));
        }
        let mut out = self.clone();
        for (iv, m) in out.intervals.iter_mut().zip(markers) {
            iv.marker = m;
        }
        Ok(out)
    }

    pub fn with_marker_from(&self, source: &MarkerSource) -> Result<Cohort> {
        match source {
            MarkerSource::Marker => Ok(self.clone()),
            MarkerSource::Covariate(name) => {
                let j = self
                    .covariate_index(name)
                    .ok_or_else(|| Error::invalid(format!("cohort has no covariate `{name}`")))?;
                let markers = self.intervals.iter().map(|iv| iv.covariates[j]).collect();
                self.with_markers(markers)
            }
        }
    }

    /// Adds (or overwrites) a named covariate column.
    pub fn with_covariate(&self, name: &str, values: Vec<f64>) -> Result<Cohort> {
        if values.len() != self.intervals.len() {
            return Err(Error::invalid(format!(
                "{} values for {} intervals",
                values.len(),
                self.intervals.len()
            )));
        }
        let mut out = self.clone();
        match out.covariate_index(name) {
            Some(j) => {
                for (iv, v) in out.intervals.iter_mut().zip(values) {
                    iv.covariates[j] = v;
                }
            }
            None => {
                out.covariate_names.push(name.to_string());
                for (iv, v) in out.intervals.iter_mut().zip(values) {
                    iv.covariates.push(v);
                }
            }
        }
        Ok(out)
    }

    /// Keeps the given subjects (by index), preserving their ids.
    pub fn select_subjects(&self, keep: &[usize]) -> Cohort {
        let mut intervals = Vec::new();
        for &k in keep {
            intervals.extend_from_slice(self.subject(k));
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return self.resample(keep);
        }
        Cohort::from_grouped(intervals, self.covariate_names.clone(), self.time_unit)
            .expect("subset of valid chains is valid")
    }

    /// Bootstrap-style selection with replacement: each draw gets a fresh
    /// subject id `<original>#<draw index>` so repeated subjects stay
    /// distinct chains.
    pub fn resample(&self, picks: &[usize]) -> Cohort {
        let mut intervals = Vec::with_capacity(picks.len() * self.intervals.len() / self.subjects.len().max(1));
        for (draw, &k) in picks.iter().enumerate() {
            for iv in self.subject(k) {
                let mut iv = iv.clone();
                iv.subject = SubjectId(format!("{}#{}", iv.subject.0, draw));
                intervals.push(iv);
            }
        }
        Cohort::from_grouped(intervals, self.covariate_names.clone(), self.time_unit)
            .expect("resampled valid chains are valid")
    }

    /// Unique event times (any cause), sorted ascending.
    pub fn event_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .intervals
            .iter()
            .filter(|iv| iv.status.is_event())
            .map(|iv| iv.stop)
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub(crate) fn require_finite_markers(&self) -> Result<()> {
        match self.intervals.iter().find(|iv| !iv.marker.is_finite()) {
            Some(iv) => Err(Error::invalid(format!(
                "subject {}: marker on ({}, {}] is not finite",
                iv.subject, iv.start, iv.stop
            ))),
            None => Ok(()),
        }
    }
}

/// Cases and controls at one evaluation time, as interval indices into the
/// cohort.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskSet {
    pub eval_time: f64,
    pub cases: Vec<usize>,
    pub controls: Vec<usize>,
}

impl RiskSet {
    pub fn case_ids<'a>(&self, cohort: &'a Cohort) -> Vec<&'a SubjectId> {
        self.cases.iter().map(|&i| &cohort.intervals()[i].subject).collect()
    }

    pub fn control_ids<'a>(&self, cohort: &'a Cohort) -> Vec<&'a SubjectId> {
        self.controls.iter().map(|&i| &cohort.intervals()[i].subject).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty() && self.controls.is_empty()
    }
}

/// Splits the risk set at `t` into incident cases and dynamic controls.
///
/// Each subject is represented by its interval with `start < t <= stop`.
/// Cases fail exactly at `t` (any cause). Controls remain under observation
/// beyond `t`: either the interval extends past `t`, or it ends at `t` only
/// because a new measurement starts there. A subject censored at `t` is in
/// neither set.
pub fn risk_set_at(cohort: &Cohort, t: f64) -> RiskSet {
    let mut cases = Vec::new();
    let mut controls = Vec::new();
    for (i, iv) in cohort.intervals().iter().enumerate() {
        if !(iv.start < t && t <= iv.stop) {
            continue;
        }
        if iv.stop == t {
            if iv.status.is_event() {
                cases.push(i);
            } else if cohort.continues(i) {
                controls.push(i);
            }
        } else {
            controls.push(i);
        }
    }
    RiskSet { eval_time: t, cases, controls }
}

/// Re-baselines the cohort at landmark time `s`.
///
/// Subjects still under observation after `s` (last stop `> s`, entered at
/// or before `s`) are kept as a single interval `(0, stop - s]` with their
/// terminal status. The marker and covariates are those in force at `s`
/// under [`MarkerMode::Updated`], or the entry values under
/// [`MarkerMode::Baseline`].
pub fn landmark_subset(cohort: &Cohort, s: f64, mode: MarkerMode) -> Result<Cohort> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("landmark time must be >= 0, got {s}")));
    }
    let mut intervals = Vec::new();
    for chain in cohort.subjects() {
        let first = &chain[0];
        let last = &chain[chain.len() - 1];
        if !(last.stop > s) || first.start > s {
            continue;
        }
        let source = match mode {
            MarkerMode::Baseline => first,
            MarkerMode::Updated => chain
                .iter()
                .find(|iv| iv.start <= s && s < iv.stop)
                .expect("contiguous chain covers s"),
        };
        intervals.push(ObservationInterval {
            subject: first.subject.clone(),
            start: 0.0,
            stop: last.stop - s,
            status: last.status,
            marker: source.marker,
            covariates: source.covariates.clone(),
        });
    }
    Cohort::from_grouped(intervals, cohort.covariate_names.clone(), cohort.time_unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(id: &str, start: f64, stop: f64, status: Status, marker: f64) -> ObservationInterval {
        ObservationInterval {
            subject: SubjectId::new(id),
            start,
            stop,
            status,
            marker,
            covariates: vec![],
        }
    }

    #[test]
    fn risk_set_three_subjects() {
        let c = Cohort::new(
            vec![
                iv("1", 0.0, 5.0, Status::Event(1), 1.0),
                iv("2", 0.0, 8.0, Status::Event(1), 2.0),
                iv("3", 0.0, 10.0, Status::Censored, 3.0),
            ],
            vec![],
            1.0,
        )
        .unwrap();
        let rs = risk_set_at(&c, 8.0);
        assert_eq!(rs.case_ids(&c), vec![&SubjectId::new("2")]);
        assert_eq!(rs.control_ids(&c), vec![&SubjectId::new("3")]);
        assert!(risk_set_at(&c, 11.0).is_empty());
    }

    #[test]
    fn censoring_at_t_is_excluded_but_measurement_split_is_not() {
        let c = Cohort::new(
            vec![
                iv("a", 0.0, 4.0, Status::Censored, 1.0),
                iv("b", 0.0, 4.0, Status::Censored, 2.0),
                iv("b", 4.0, 9.0, Status::Censored, 2.5),
                iv("c", 0.0, 4.0, Status::Event(1), 3.0),
            ],
            vec![],
            1.0,
        )
        .unwrap();
        let rs = risk_set_at(&c, 4.0);
        assert_eq!(rs.case_ids(&c), vec![&SubjectId::new("c")]);
        // b is represented by its (0, 4] interval, marker 2.0
        assert_eq!(rs.controls.len(), 1);
        assert_eq!(c.intervals()[rs.controls[0]].marker, 2.0);
    }

    #[test]
    fn rejects_broken_chains() {
        let gap = Cohort::new(
            vec![iv("a", 0.0, 4.0, Status::Censored, 1.0), iv("a", 5.0, 9.0, Status::Censored, 1.0)],
            vec![],
            1.0,
        );
        assert!(gap.is_err());
        let early_event = Cohort::new(
            vec![iv("a", 0.0, 4.0, Status::Event(1), 1.0), iv("a", 4.0, 9.0, Status::Censored, 1.0)],
            vec![],
            1.0,
        );
        assert!(early_event.is_err());
        assert!(Cohort::new(vec![iv("a", 3.0, 3.0, Status::Censored, 1.0)], vec![], 1.0).is_err());
        assert!(Cohort::new(vec![], vec![], 0.0).is_err());
    }

    #[test]
    fn groups_unsorted_input() {
        let c = Cohort::new(
            vec![
                iv("a", 4.0, 9.0, Status::Event(1), 2.0),
                iv("b", 0.0, 3.0, Status::Censored, 5.0),
                iv("a", 0.0, 4.0, Status::Censored, 1.0),
            ],
            vec![],
            1.0,
        )
        .unwrap();
        assert_eq!(c.n_subjects(), 2);
        assert_eq!(c.subject(0).len(), 2);
        assert_eq!(c.subject(0)[0].start, 0.0);
        assert!(c.continues(0));
        assert!(!c.continues(1));
    }

    #[test]
    fn transplant_coding() {
        assert_eq!(transplant_censor(1).unwrap(), Status::Censored);
        assert_eq!(transplant_censor(2).unwrap(), Status::Event(1));
        assert_eq!(transplant_censor(0).unwrap(), Status::Censored);
        assert!(transplant_censor(3).is_err());
        assert!(transplant_censor(-1).is_err());
    }

    #[test]
    fn landmark_uses_value_in_force() {
        let c = Cohort::new(
            vec![
                iv("a", 0.0, 25.0, Status::Censored, 1.0),
                iv("a", 25.0, 58.0, Status::Censored, 2.0),
                iv("a", 58.0, 65.0, Status::Event(1), 3.0),
                iv("b", 0.0, 100.0, Status::Censored, 9.0),
            ],
            vec![],
            1.0,
        )
        .unwrap();
        let lm = landmark_subset(&c, 30.0, MarkerMode::Updated).unwrap();
        assert_eq!(lm.n_subjects(), 2);
        let a = &lm.intervals()[0];
        assert_eq!((a.start, a.stop, a.status, a.marker), (0.0, 35.0, Status::Event(1), 2.0));
        let base = landmark_subset(&c, 30.0, MarkerMode::Baseline).unwrap();
        assert_eq!(base.intervals()[0].marker, 1.0);
        // censored before the landmark
        assert_eq!(landmark_subset(&c, 200.0, MarkerMode::Updated).unwrap().n_subjects(), 0);
        assert!(landmark_subset(&c, -1.0, MarkerMode::Updated).is_err());
    }

    #[test]
    fn landmark_zero_is_identity_on_baseline_data() {
        let c = Cohort::new(
            vec![iv("a", 0.0, 5.0, Status::Event(1), 1.0), iv("b", 0.0, 7.0, Status::Censored, 2.0)],
            vec![],
            1.0,
        )
        .unwrap();
        let lm = landmark_subset(&c, 0.0, MarkerMode::Updated).unwrap();
        assert_eq!(lm.intervals(), c.intervals());
    }

    #[test]
    fn resample_keeps_duplicates_distinct() {
        let c = Cohort::new(
            vec![
                iv("a", 0.0, 4.0, Status::Censored, 1.0),
                iv("a", 4.0, 6.0, Status::Event(1), 1.5),
                iv("b", 0.0, 3.0, Status::Censored, 2.0),
            ],
            vec![],
            1.0,
        )
        .unwrap();
        let r = c.resample(&[0, 0, 1]);
        assert_eq!(r.n_subjects(), 3);
        assert_eq!(r.n_intervals(), 5);
        assert_eq!(r.n_events(), 2);
        let s = c.select_subjects(&[1, 1]);
        assert_eq!(s.n_subjects(), 2);
    }
}
