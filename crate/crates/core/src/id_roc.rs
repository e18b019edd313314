//! Incident-case / dynamic-control accuracy.
//!
//! At each event time the failing subjects (cases) are compared with the
//! subjects still under observation (controls). The mean rank `A(t)` of the
//! cases among the controls is the time-specific AUC; smoothing it over
//! neighbouring event times gives the weighted mean rank curve, and a
//! survival-weighted average of `A(t)` gives the concordance index.

use rayon::prelude::*;
use serde::Serialize;

use crate::cox::{design, CoxFit};
use crate::data::{risk_set_at, Cohort, MarkerMode, RiskSet};
use crate::error::{Error, Result};
use crate::km::{kaplan_meier, KernelSpec};
use crate::roc::{thresholds, RocCurve, RocPoint};
use crate::series::{AccuracyPoint, AccuracySeries};

/// Smoothing span used for display AUC curves.
pub const DEFAULT_AUC_SPAN: f64 = 0.2;
/// Smoothing span used for display TPF curves.
pub const DEFAULT_TPR_SPAN: f64 = 0.3;

fn event_risk_sets(cohort: &Cohort) -> Vec<RiskSet> {
    cohort.event_times().par_iter().map(|&t| risk_set_at(cohort, t)).collect()
}

fn sorted_markers(cohort: &Cohort, idx: &[usize]) -> Vec<f64> {
    let mut m: Vec<f64> = idx.iter().map(|&i| cohort.intervals()[i].marker).collect();
    m.sort_by(f64::total_cmp);
    m
}

/// `A(t) = (1/(n_t d_t)) sum_cases sum_controls 1(M_case > M_control)` at
/// every event time. Marker ties count as discordant. Entries without
/// controls have `raw = None`.
pub fn mean_rank(cohort: &Cohort, mode: MarkerMode) -> Result<AccuracySeries> {
    let view = cohort.view(mode);
    view.require_finite_markers()?;
    if view.n_events() == 0 {
        return Err(Error::degenerate("no events"));
    }
    let points = event_risk_sets(&view)
        .into_iter()
        .map(|rs| {
            let controls = sorted_markers(&view, &rs.controls);
            let raw = (!controls.is_empty()).then(|| {
                let below: usize = rs
                    .cases
                    .iter()
                    .map(|&i| {
                        let m = view.intervals()[i].marker;
                        controls.partition_point(|&c| c < m)
                    })
                    .sum();
                below as f64 / (rs.cases.len() * controls.len()) as f64
            });
            AccuracyPoint::new(rs.eval_time, raw, rs.cases.len(), controls.len())
        })
        .collect();
    Ok(AccuracySeries::new(points))
}

/// Half-open window `|i - j| < span * n` around position `i` of `n` points.
fn rank_window(i: usize, n: usize, span: f64) -> std::ops::Range<usize> {
    let h = span * n as f64;
    let lo = (0..=i).find(|&j| ((i - j) as f64) < h).unwrap_or(i);
    let hi = (i..n).rev().find(|&j| ((j - i) as f64) < h).unwrap_or(i);
    lo..hi + 1
}

/// Nearest-neighbour smoothing over event-time rank: each defined point is
/// replaced by the unweighted mean of the defined raw values whose position
/// differs by less than `span * n_defined`. The variance is the window's
/// sample variance divided by the window size.
pub fn wmr_smooth(series: &AccuracySeries, kernel: &KernelSpec) -> AccuracySeries {
    let positions: Vec<usize> = (0..series.len()).filter(|&k| series.points[k].raw.is_some()).collect();
    let raw: Vec<f64> = positions.iter().map(|&k| series.points[k].raw.unwrap()).collect();
    let n = raw.len();
    let mut out = series.clone();
    for p in &mut out.points {
        p.smoothed = None;
        p.variance = None;
    }
    for (i, &k) in positions.iter().enumerate() {
        let w = &raw[rank_window(i, n, kernel.span())];
        let size = w.len() as f64;
        let mean = w.iter().sum::<f64>() / size;
        let var = if w.len() > 1 {
            w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (size - 1.0)
        } else {
            0.0
        };
        out.points[k].smoothed = Some(mean);
        out.points[k].variance = Some(var / size);
    }
    out
}

/// Leave-one-out mean squared error of the smoother against the raw
/// values. `None` when no point has a neighbour inside its window.
pub fn loo_imse(series: &AccuracySeries, span: f64) -> Option<f64> {
    let raw: Vec<f64> = series.defined().map(|p| p.raw.unwrap()).collect();
    let n = raw.len();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        let w = rank_window(i, n, span);
        let others = w.len() - 1;
        if others == 0 {
            continue;
        }
        let rest = raw[w.clone()].iter().enumerate().filter(|(j, _)| w.start + j != i).map(|(_, v)| *v);
        let mean = mean_of(rest.clone(), others);
        total += (raw[i] - mean).powi(2);
        count += 1;
    }
    (count > 0).then(|| total / count as f64)
}

/// Mean with one correction pass, so constant inputs reproduce exactly.
fn mean_of(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let m = values.clone().sum::<f64>() / n as f64;
    m + values.map(|v| v - m).sum::<f64>() / n as f64
}

/// `0.05 + k/200` for `k = 1..=80`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (1..=80).map(|k| 0.05 + k as f64 / 200.0).collect()
}

/// Span minimizing [`loo_imse`] over `grid`; the mean of all minimizers
/// when several tie.
pub fn bandwidth_cv(series: &AccuracySeries, grid: &[f64]) -> Result<f64> {
    for &g in grid {
        KernelSpec::new(g)?;
    }
    let scores: Vec<Option<f64>> = grid.par_iter().map(|&g| loo_imse(series, g)).collect();
    let best = scores.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::degenerate("leave-one-out error undefined for every bandwidth"));
    }
    // minimizers equal up to rounding are treated as tied
    let tol = 1e-12 * best + 1e-24;
    let ties: Vec<f64> = grid
        .iter()
        .zip(&scores)
        .filter(|(_, s)| s.is_some_and(|v| v - best <= tol))
        .map(|(g, _)| *g)
        .collect();
    Ok(ties.iter().sum::<f64>() / ties.len() as f64)
}

/// Sensitivity at false-positive fraction `p` per event time: the fraction
/// of cases whose percentile among the controls, `#(controls below)/n_t`,
/// exceeds `1 - p`. Smoothed as in [`wmr_smooth`].
pub fn dynamic_tpr(cohort: &Cohort, fpf: f64, mode: MarkerMode, kernel: &KernelSpec) -> Result<AccuracySeries> {
    if !(fpf > 0.0 && fpf < 1.0) {
        return Err(Error::invalid(format!("false-positive fraction must be in (0, 1), got {fpf}")));
    }
    let view = cohort.view(mode);
    view.require_finite_markers()?;
    if view.n_events() == 0 {
        return Err(Error::degenerate("no events"));
    }
    let points = event_risk_sets(&view)
        .into_iter()
        .map(|rs| {
            let controls = sorted_markers(&view, &rs.controls);
            let raw = (!controls.is_empty()).then(|| {
                let n = controls.len() as f64;
                let hits = rs
                    .cases
                    .iter()
                    .filter(|&&i| {
                        let m = view.intervals()[i].marker;
                        controls.partition_point(|&c| c < m) as f64 / n > 1.0 - fpf
                    })
                    .count();
                hits as f64 / rs.cases.len() as f64
            });
            AccuracyPoint::new(rs.eval_time, raw, rs.cases.len(), controls.len())
        })
        .collect();
    Ok(wmr_smooth(&AccuracySeries::new(points), kernel))
}

/// Step function of a time-varying coefficient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl GammaPath {
    /// Value at the last path time `<= t`; the first value before that.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        self.values[k.max(1) - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum GammaSpec {
    Constant(f64),
    Path(GammaPath),
}

impl GammaSpec {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            GammaSpec::Constant(g) => *g,
            GammaSpec::Path(p) => p.eval(t),
        }
    }
}

/// Reference distribution for specificity in [`cox_id_accuracy`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ControlSet {
    /// Empirical marker distribution among subjects surviving beyond `t`.
    #[default]
    Survivors,
    /// Uniform weights over the whole risk set at `t`, which is the null
    /// (`gamma = 0`) distribution of the case marker.
    RiskSet,
}

/// Semiparametric incident sensitivity under a Cox model for the marker:
/// `Se(c|t) = sum_k 1(M_k > c) pi_k`, with
/// `pi_k = exp(M_k gamma) / sum_j exp(M_j gamma)` over the risk set at `t`.
pub fn cox_id_accuracy(cohort: &Cohort, gamma: &GammaSpec, t: f64, controls: ControlSet) -> Result<RocCurve> {
    cohort.require_finite_markers()?;
    let g = gamma.at(t);
    if !g.is_finite() {
        return Err(Error::invalid(format!("coefficient {g} is not finite")));
    }
    let ivs = cohort.intervals();
    let at_risk: Vec<f64> = ivs.iter().filter(|iv| iv.start < t && t <= iv.stop).map(|iv| iv.marker).collect();
    if at_risk.is_empty() {
        return Err(Error::degenerate(format!("risk set at {t} is empty")));
    }
    let reference: Vec<f64> = match controls {
        ControlSet::Survivors => risk_set_at(cohort, t).controls.iter().map(|&i| ivs[i].marker).collect(),
        ControlSet::RiskSet => at_risk.clone(),
    };
    if reference.is_empty() {
        return Err(Error::degenerate(format!("no survivors beyond {t}")));
    }
    let top = at_risk.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x * g));
    let w: Vec<f64> = at_risk.iter().map(|&m| (m * g - top).exp()).collect();
    let total: f64 = w.iter().sum();

    let mut points = Vec::new();
    for c in thresholds(at_risk.iter().chain(&reference).copied()) {
        let tpf = at_risk.iter().zip(&w).filter(|(m, _)| **m > c).map(|(_, w)| w).sum::<f64>() / total;
        let fpf = reference.iter().filter(|&&m| m > c).count() as f64 / reference.len() as f64;
        points.push(RocPoint { fpf, tpf, threshold: c });
    }
    Ok(RocCurve::from_points(points))
}

/// Time-varying coefficient from scaled Schoenfeld residuals
/// `r*_k = gamma_hat + d Var(gamma_hat) r_k`, smoothed by local linear
/// regression over event-rank windows of span `kernel`. The fit must have a
/// single term.
pub fn gamma_t_schoenfeld(fit: &CoxFit, cohort: &Cohort, kernel: &KernelSpec) -> Result<GammaPath> {
    if fit.coefficients.len() != 1 {
        return Err(Error::invalid(format!(
            "coefficient path needs a single-term model, got {} terms",
            fit.coefficients.len()
        )));
    }
    if !fit.converged {
        return Err(Error::degenerate("Cox fit did not converge"));
    }
    let g = fit.coefficients[0];
    let x: Vec<f64> = design(cohort, &fit.spec)?.into_iter().map(|r| r[0]).collect();
    let ivs = cohort.intervals();
    let times = cohort.event_times();
    if times.len() < 3 {
        return Err(Error::degenerate("fewer than three event times"));
    }

    let mut resid: Vec<(f64, f64)> = Vec::new();
    for &t in &times {
        let risk: Vec<usize> = (0..ivs.len()).filter(|&i| ivs[i].start < t && t <= ivs[i].stop).collect();
        let top = risk.iter().fold(f64::NEG_INFINITY, |m, &i| m.max(x[i] * g));
        let (mut sw, mut swx) = (0.0, 0.0);
        for &i in &risk {
            let w = (x[i] * g - top).exp();
            sw += w;
            swx += w * x[i];
        }
        let xbar = swx / sw;
        for &i in &risk {
            if ivs[i].stop == t && ivs[i].status.is_event() {
                resid.push((t, x[i] - xbar));
            }
        }
    }
    let d = resid.len() as f64;
    let var = fit.variance[0][0];
    let scaled: Vec<(f64, f64)> = resid.iter().map(|&(t, r)| (t, g + d * var * r)).collect();

    let m = scaled.len();
    let smooth: Vec<f64> = (0..m)
        .map(|k| {
            let w = &scaled[rank_window(k, m, kernel.span())];
            let t0 = scaled[k].0;
            let n = w.len() as f64;
            let mx = w.iter().map(|p| p.0 - t0).sum::<f64>() / n;
            let my = w.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = w.iter().map(|p| (p.0 - t0 - mx).powi(2)).sum();
            if sxx <= 0.0 {
                return my;
            }
            let sxy: f64 = w.iter().map(|p| (p.0 - t0 - mx) * (p.1 - my)).sum();
            my - sxy / sxx * mx
        })
        .collect();

    let mut values = Vec::with_capacity(times.len());
    let mut k = 0;
    for &t in &times {
        let (mut s, mut c) = (0.0, 0.0);
        while k < m && scaled[k].0 == t {
            s += smooth[k];
            c += 1.0;
            k += 1;
        }
        values.push(s / c);
    }
    Ok(GammaPath { times, values })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CindexResult {
    pub value: f64,
    pub tau: f64,
    /// Sum of the normalized weights over the terms used; 1 up to rounding.
    pub weights_sum: f64,
    /// `sum 2 f(t) S(t)` before normalization.
    pub raw_weight_total: f64,
    pub n_times: usize,
}

/// Concordance as the weighted average `sum_t A(t) w(t)` over event times
/// `t <= tau`, with `w(t)` proportional to `2 f(t) S(t)`, `f` the
/// product-limit jump at `t` and `S` the survival at `t`. Weights are
/// normalized to sum to one over the times where `A(t)` is defined.
pub fn c_index(cohort: &Cohort, mode: MarkerMode, tau: f64) -> Result<CindexResult> {
    let series = mean_rank(cohort, mode)?;
    let mut t = Vec::with_capacity(cohort.n_subjects());
    let mut d = Vec::with_capacity(cohort.n_subjects());
    for chain in cohort.subjects() {
        let last = &chain[chain.len() - 1];
        t.push(last.stop);
        d.push(last.status.is_event());
    }
    let km = kaplan_meier(&t, &d, None)?;
    if km.eval(tau) >= 1.0 {
        return Err(Error::degenerate(format!("no events up to {tau}")));
    }
    let used: Vec<&AccuracyPoint> = series.points.iter().filter(|p| p.time <= tau).collect();
    if used.len() < 2 {
        return Err(Error::degenerate(format!("fewer than two event times up to {tau}")));
    }
    let terms: Vec<(f64, f64)> = used
        .iter()
        .filter_map(|p| p.raw.map(|a| (a, 2.0 * km.jump_at(p.time) * km.eval(p.time))))
        .collect();
    let total: f64 = terms.iter().map(|t| t.1).sum();
    if total <= 0.0 {
        return Err(Error::degenerate("all concordance weights are zero"));
    }
    let value = terms.iter().map(|(a, w)| a * w).sum::<f64>() / total;
    let weights_sum = terms.iter().map(|t| t.1 / total).sum();
    Ok(CindexResult { value, tau, weights_sum, raw_weight_total: total, n_times: terms.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MarkedTime;

    fn cohort(v: &[(f64, f64, u32)]) -> Cohort {
        let s: Vec<MarkedTime> = v.iter().map(|&(m, t, c)| MarkedTime::new(m, t, c)).collect();
        Cohort::from_marked_times(&s).unwrap()
    }

    fn series(raw: &[f64]) -> AccuracySeries {
        AccuracySeries::new(raw.iter().enumerate().map(|(i, &r)| AccuracyPoint::new(i as f64, Some(r), 1, 1)).collect())
    }

    #[test]
    fn mean_rank_examples() {
        let c = cohort(&[(5.0, 1.0, 1), (1.0, 2.0, 0), (2.0, 3.0, 0), (3.0, 4.0, 0)]);
        let s = mean_rank(&c, MarkerMode::Baseline).unwrap();
        assert_eq!(s.points[0].raw, Some(1.0));
        let c = cohort(&[(2.0, 1.0, 1), (1.0, 2.0, 0), (3.0, 3.0, 0)]);
        let s = mean_rank(&c, MarkerMode::Baseline).unwrap();
        assert_eq!(s.points[0].raw, Some(0.5));
        assert_eq!((s.points[0].n_cases, s.points[0].n_controls), (1, 2));
    }

    #[test]
    fn last_event_without_controls_is_undefined() {
        let c = cohort(&[(2.0, 1.0, 1), (1.0, 2.0, 1)]);
        let s = mean_rank(&c, MarkerMode::Baseline).unwrap();
        assert_eq!(s.points[1].raw, None);
    }

    #[test]
    fn constant_series_smooths_to_itself() {
        let s = wmr_smooth(&series(&[0.7; 9]), &KernelSpec::new(0.2).unwrap());
        for p in &s.points {
            assert!((p.smoothed.unwrap() - 0.7).abs() < 1e-15);
            assert!(p.variance.unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn wide_window_at_centre_is_global_mean() {
        let s = wmr_smooth(&series(&[0.2, 0.9, 0.4]), &KernelSpec::new(0.49).unwrap());
        assert!((s.points[1].smoothed.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rank_windows() {
        assert_eq!(rank_window(0, 10, 0.2), 0..2);
        assert_eq!(rank_window(5, 10, 0.2), 4..7);
        assert_eq!(rank_window(5, 10, 0.21), 3..8);
        assert_eq!(rank_window(9, 10, 0.2), 8..10);
        assert_eq!(rank_window(3, 10, 0.01), 3..4);
    }

    #[test]
    fn constant_series_ties_every_bandwidth() {
        let grid = default_bandwidth_grid();
        assert_eq!(grid.len(), 80);
        assert!((grid[0] - 0.055).abs() < 1e-15 && (grid[79] - 0.45).abs() < 1e-15);
        let lambda = bandwidth_cv(&series(&[0.6; 30]), &grid).unwrap();
        let mean = grid.iter().sum::<f64>() / 80.0;
        assert!((lambda - mean).abs() < 1e-12);
    }

    #[test]
    fn null_coefficient_gives_chance_against_risk_set() {
        let c = cohort(&[(0.3, 1.0, 1), (1.2, 2.0, 0), (-0.4, 3.0, 1), (2.2, 4.0, 0), (0.9, 5.0, 1)]);
        let roc = cox_id_accuracy(&c, &GammaSpec::Constant(0.0), 2.0, ControlSet::RiskSet).unwrap();
        assert!((roc.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_path_steps() {
        let p = GammaPath { times: vec![1.0, 2.0], values: vec![0.5, -0.5] };
        assert_eq!(p.eval(0.0), 0.5);
        assert_eq!(p.eval(1.5), 0.5);
        assert_eq!(p.eval(2.0), -0.5);
    }

    #[test]
    fn cindex_weights_are_normalized() {
        let c = cohort(&[(3.0, 1.0, 1), (1.0, 2.0, 0), (2.0, 3.0, 1), (0.5, 4.0, 1), (0.1, 6.0, 0)]);
        let r = c_index(&c, MarkerMode::Baseline, 5.0).unwrap();
        assert!((r.weights_sum - 1.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.value));
        assert!(c_index(&c, MarkerMode::Baseline, 0.5).is_err());
    }
}
