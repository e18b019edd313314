//! Cause-specific accuracy under competing risks.
//!
//! Causes are coded `1..=J` in the status of each subject; `0` is censored.

use serde::Serialize;

use crate::cox::{fit_cox, CoxFit, ModelSpec};
use crate::data::{Cohort, MarkedTime, ObservationInterval, Status};
use crate::error::{Error, Result};
use crate::id_roc::{cox_id_accuracy, ControlSet, GammaSpec};
use crate::km::{require_finite, KernelSpec, PercentileIndex};
use crate::roc::{RocCurve, RocPoint};

/// Conditional cumulative incidence of one cause at a marker value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CifCurve {
    pub cause: u32,
    pub anchor_marker: f64,
    /// Distinct event times (any cause) in the window.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl CifCurve {
    /// Right-continuous evaluation; zero before the first event time.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Aalen-Johansen pass over `members`: all-cause survival and the
/// cumulative incidence of every cause in `causes` at each distinct event
/// time. Returns `(times, survival, cif[cause][time])`.
fn aalen_johansen(members: &[&MarkedTime], causes: &[u32]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let mut sorted: Vec<&MarkedTime> = members.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let n = sorted.len();
    let mut times = Vec::new();
    let mut surv_path = Vec::new();
    let mut cif = vec![Vec::new(); causes.len()];
    let mut acc = vec![0.0; causes.len()];
    let mut surv = 1.0;
    let mut k = 0;
    while k < n {
        let t = sorted[k].time;
        let at_risk = (n - k) as f64;
        let mut d = vec![0.0; causes.len()];
        let mut d_all = 0.0;
        while k < n && sorted[k].time == t {
            if sorted[k].is_event() {
                d_all += 1.0;
                if let Some(j) = causes.iter().position(|&c| c == sorted[k].cause) {
                    d[j] += 1.0;
                }
            }
            k += 1;
        }
        if d_all == 0.0 {
            continue;
        }
        for j in 0..causes.len() {
            acc[j] += surv * d[j] / at_risk;
            cif[j].push(acc[j]);
        }
        surv *= 1.0 - d_all / at_risk;
        times.push(t);
        surv_path.push(surv);
    }
    (times, surv_path, cif)
}

fn causes_in(sample: &[MarkedTime]) -> Vec<u32> {
    let mut c: Vec<u32> = sample.iter().filter(|s| s.is_event()).map(|s| s.cause).collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// `C_j(t | M = anchor) = sum_{s <= t} S(s-) d_j(s) / Y(s)` within the
/// percentile window around `anchor`, with `S` the all-cause product-limit
/// survival in the same window.
pub fn cif_nne(sample: &[MarkedTime], anchor: f64, cause: u32, kernel: &KernelSpec) -> Result<CifCurve> {
    require_finite(sample)?;
    if cause == 0 || !sample.iter().any(|s| s.cause == cause) {
        return Err(Error::invalid(format!("cause {cause} is never observed")));
    }
    let markers: Vec<f64> = sample.iter().map(|s| s.marker).collect();
    let index = PercentileIndex::new(&markers);
    let window = index.window(index.rank_of(anchor), kernel);
    if window.is_empty() {
        return Err(Error::degenerate(format!("percentile window around marker {anchor} is empty")));
    }
    let members: Vec<&MarkedTime> = index.order[window].iter().map(|&i| &sample[i]).collect();
    let (times, _, mut cif) = aalen_johansen(&members, &[cause]);
    Ok(CifCurve { cause, anchor_marker: anchor, times, values: cif.remove(0) })
}

/// Cause-`j` cumulative sensitivity and all-cause dynamic specificity at
/// `t`, with the marker integrals taken over the empirical marker
/// distribution:
///
/// `Se_j(c) = sum_i C_j(t|M_i) 1(M_i > c) / sum_i C_j(t|M_i)`,
/// `Sp(c) = sum_i S(t|M_i) 1(M_i <= c) / sum_i S(t|M_i)`.
pub fn cd_accuracy_competing(sample: &[MarkedTime], cause: u32, t: f64, kernel: &KernelSpec) -> Result<RocCurve> {
    require_finite(sample)?;
    if cause == 0 {
        return Err(Error::invalid("cause codes start at 1"));
    }
    if !sample.iter().any(|s| s.cause == cause && s.time <= t) {
        return Err(Error::degenerate(format!("no cause-{cause} events up to {t}")));
    }
    let causes = causes_in(sample);
    let j = causes.iter().position(|&c| c == cause).expect("cause present");
    let markers: Vec<f64> = sample.iter().map(|s| s.marker).collect();
    let index = PercentileIndex::new(&markers);
    let n = sample.len();

    // per distinct marker: (marker, group size, C_j(t|M), S(t|M))
    let mut groups: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut k = 0;
    while k < n {
        let m = markers[index.order[k]];
        let mut e = k + 1;
        while e < n && markers[index.order[e]] == m {
            e += 1;
        }
        let window = index.window(index.ranks[k], kernel);
        if window.is_empty() {
            return Err(Error::degenerate(format!("percentile window around marker {m} is empty")));
        }
        let members: Vec<&MarkedTime> = index.order[window].iter().map(|&i| &sample[i]).collect();
        let (times, surv, cif) = aalen_johansen(&members, &causes);
        let at = times.partition_point(|&x| x <= t);
        let (c_j, s) = if at == 0 { (0.0, 1.0) } else { (cif[j][at - 1], surv[at - 1]) };
        groups.push((m, (e - k) as f64, c_j, s));
        k = e;
    }
    let total_c: f64 = groups.iter().map(|g| g.1 * g.2).sum();
    let total_s: f64 = groups.iter().map(|g| g.1 * g.3).sum();
    if total_c <= 0.0 || total_s <= 0.0 {
        return Err(Error::degenerate(format!("cause-{cause} incidence or survival at {t} is zero")));
    }
    let mut points = vec![RocPoint { fpf: 0.0, tpf: 0.0, threshold: f64::INFINITY }];
    let (mut above_c, mut above_s) = (0.0, 0.0);
    for g in groups.iter().rev() {
        points.push(RocPoint { fpf: above_s / total_s, tpf: above_c / total_c, threshold: g.0 });
        above_c += g.1 * g.2;
        above_s += g.1 * g.3;
    }
    points.push(RocPoint { fpf: 1.0, tpf: 1.0, threshold: f64::NEG_INFINITY });
    Ok(RocCurve::from_points(points))
}

/// Copy of `cohort` where only `cause` counts as an event.
pub fn cause_specific(cohort: &Cohort, cause: u32) -> Result<Cohort> {
    let intervals: Vec<ObservationInterval> = cohort
        .intervals()
        .iter()
        .map(|iv| {
            let mut iv = iv.clone();
            if iv.status.cause() != Some(cause) {
                iv.status = Status::Censored;
            } else {
                iv.status = Status::Event(1);
            }
            iv
        })
        .collect();
    Cohort::new(intervals, cohort.covariate_names().to_vec(), cohort.time_unit())
}

/// Incident cause-specific accuracy: the coefficient comes from a Cox model
/// for the marker with other causes treated as censored, sensitivity from
/// reweighting the all-cause risk set, and specificity from all-cause
/// survivors.
pub fn id_accuracy_competing(cohort: &Cohort, cause: u32, t: f64) -> Result<(RocCurve, CoxFit)> {
    if cause == 0 {
        return Err(Error::invalid("cause codes start at 1"));
    }
    let specific = cause_specific(cohort, cause)?;
    if specific.n_events() == 0 {
        return Err(Error::degenerate(format!("no cause-{cause} events")));
    }
    let fit = fit_cox(&specific, &ModelSpec::marker_only())?;
    let roc = cox_id_accuracy(cohort, &GammaSpec::Constant(fit.coefficients[0]), t, ControlSet::Survivors)?;
    Ok((roc, fit))
}
