//! Cumulative-case / dynamic-control accuracy.
//!
//! Cases are subjects failing in `(0, t]`, controls those surviving beyond
//! `t`. Two estimators are provided: a Bayes-rule form built from
//! product-limit curves on threshold subsets, and the nearest-neighbour
//! bivariate survival estimator, which smooths the conditional survival
//! locally in marker percentile and stays valid when censoring depends on
//! the marker.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{landmark_subset, Cohort, MarkedTime, MarkerMode};
use crate::error::{Error, Result};
use crate::km::{kaplan_meier, km_at, require_finite, KernelSpec, PercentileIndex};
use crate::roc::{thresholds, RocCurve, RocPoint};
use crate::series::{AccuracyPoint, AccuracySeries};

/// Product-limit survival at a fixed time for a growing set of subjects.
struct IncrementalKm {
    event_times: Vec<f64>,
    at_risk: Vec<f64>,
    deaths: Vec<f64>,
}

impl IncrementalKm {
    fn new(sample: &[MarkedTime], t: f64) -> Self {
        let mut event_times: Vec<f64> =
            sample.iter().filter(|s| s.is_event() && s.time <= t).map(|s| s.time).collect();
        event_times.sort_by(f64::total_cmp);
        event_times.dedup();
        let m = event_times.len();
        IncrementalKm { event_times, at_risk: vec![0.0; m], deaths: vec![0.0; m] }
    }

    fn add(&mut self, s: &MarkedTime) {
        let reach = self.event_times.partition_point(|&e| e <= s.time);
        for y in &mut self.at_risk[..reach] {
            *y += 1.0;
        }
        if s.is_event() && reach > 0 && self.event_times[reach - 1] == s.time {
            self.deaths[reach - 1] += 1.0;
        }
    }

    fn survival(&self) -> f64 {
        self.at_risk
            .iter()
            .zip(&self.deaths)
            .filter(|(y, _)| **y > 0.0)
            .map(|(y, d)| 1.0 - d / y)
            .product()
    }
}

fn check_split(sample: &[MarkedTime], t: f64) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::degenerate("empty sample"));
    }
    if !sample.iter().any(|s| s.is_event() && s.time <= t) {
        return Err(Error::degenerate(format!("no events in (0, {t}]")));
    }
    if !sample.iter().any(|s| s.time > t) {
        return Err(Error::degenerate(format!("no subject observed beyond {t}")));
    }
    Ok(())
}

/// Bayes-rule estimator with product-limit curves on the subsets `M > c`
/// and `M <= c`:
///
/// `TPF(c) = (1 - S(t|M>c)) (1 - F(c)) / (1 - S(t))`,
/// `FPF(c) = 1 - S(t|M<=c) F(c) / S(t)`.
///
/// Sensitivity and specificity are not forced to be monotone or bounded;
/// points are returned as computed and sorted by FPF for the area.
pub fn cd_roc_km(sample: &[MarkedTime], t: f64) -> Result<RocCurve> {
    require_finite(sample)?;
    check_split(sample, t)?;
    let n = sample.len() as f64;
    let mut all = IncrementalKm::new(sample, t);
    for s in sample {
        all.add(s);
    }
    let s_all = all.survival();
    if s_all <= 0.0 || s_all >= 1.0 {
        return Err(Error::degenerate(format!("marginal survival at {t} is {s_all}")));
    }

    let mut desc: Vec<&MarkedTime> = sample.iter().collect();
    desc.sort_by(|a, b| b.marker.total_cmp(&a.marker));
    let cuts = thresholds(sample.iter().map(|s| s.marker));
    let finite = &cuts[1..cuts.len() - 1];

    // survival above each finite threshold, adding subjects from the top
    let mut above = IncrementalKm::new(sample, t);
    let mut s_above = Vec::with_capacity(finite.len());
    let mut n_above = Vec::with_capacity(finite.len());
    let mut k = 0;
    for &c in finite {
        while k < desc.len() && desc[k].marker > c {
            above.add(desc[k]);
            k += 1;
        }
        s_above.push(above.survival());
        n_above.push(k);
    }
    // survival at or below each threshold, adding subjects from the bottom
    let mut below = IncrementalKm::new(sample, t);
    let mut s_below = vec![0.0; finite.len()];
    let mut k = desc.len();
    for (j, &c) in finite.iter().enumerate().rev() {
        while k > 0 && desc[k - 1].marker <= c {
            below.add(desc[k - 1]);
            k -= 1;
        }
        s_below[j] = below.survival();
    }

    let mut points = Vec::with_capacity(cuts.len());
    points.push(RocPoint { fpf: 0.0, tpf: 0.0, threshold: f64::INFINITY });
    for (j, &c) in finite.iter().enumerate() {
        let frac_above = n_above[j] as f64 / n;
        let frac_below = 1.0 - frac_above;
        let tpf = if n_above[j] == 0 { 0.0 } else { (1.0 - s_above[j]) * frac_above / (1.0 - s_all) };
        let fpf = if n_above[j] == sample.len() { 1.0 } else { 1.0 - s_below[j] * frac_below / s_all };
        points.push(RocPoint { fpf, tpf, threshold: c });
    }
    points.push(RocPoint { fpf: 1.0, tpf: 1.0, threshold: f64::NEG_INFINITY });
    Ok(RocCurve::from_points(points))
}

/// Nearest-neighbour estimate of the bivariate survival `S(c, t) =
/// P(M > c, T > t)` on the observed marker grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BivariateSurvival {
    /// Distinct observed markers, ascending.
    pub marker_grid: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[i][g] = S(marker_grid[g], times[i])`.
    pub values: Vec<Vec<f64>>,
    /// `S(-inf, times[i])`, the marginal survival.
    pub marginal: Vec<f64>,
    /// Fraction of the sample with marker above each grid value, `1 - F(c)`.
    pub upper_mass: Vec<f64>,
}

impl BivariateSurvival {
    /// `S(c, t) = (1/n) sum_i S(t | M = M_i) 1(M_i > c)` with each
    /// conditional curve from the product-limit estimator on the percentile
    /// window around `M_i`.
    pub fn estimate(sample: &[MarkedTime], times: &[f64], kernel: &KernelSpec) -> Result<Self> {
        require_finite(sample)?;
        if sample.is_empty() {
            return Err(Error::degenerate("empty sample"));
        }
        let n = sample.len();
        let markers: Vec<f64> = sample.iter().map(|s| s.marker).collect();
        let index = PercentileIndex::new(&markers);

        // conditional survival per distinct marker (tied subjects share a window)
        let mut grid = Vec::new();
        let mut group_size = Vec::new();
        let mut cond: Vec<Vec<f64>> = Vec::new();
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
            let members = &index.order[window];
            let surv_at: Vec<f64> = if times.len() == 1 {
                let mut pairs: Vec<(f64, bool)> =
                    members.iter().map(|&i| (sample[i].time, sample[i].is_event())).collect();
                vec![km_at(&mut pairs, times[0])]
            } else {
                let t: Vec<f64> = members.iter().map(|&i| sample[i].time).collect();
                let d: Vec<bool> = members.iter().map(|&i| sample[i].is_event()).collect();
                let curve = kaplan_meier(&t, &d, None)?;
                times.iter().map(|&x| curve.eval(x)).collect()
            };
            grid.push(m);
            group_size.push((e - k) as f64);
            cond.push(surv_at);
            k = e;
        }

        let nf = n as f64;
        let g = grid.len();
        let mut values = vec![vec![0.0; g]; times.len()];
        let mut marginal = vec![0.0; times.len()];
        for (ti, row) in values.iter_mut().enumerate() {
            // accumulate from the top: S(grid[j], t) sums groups above j
            let mut acc = 0.0;
            for j in (0..g).rev() {
                row[j] = acc / nf;
                acc += group_size[j] * cond[j][ti];
            }
            marginal[ti] = acc / nf;
        }
        let mut upper_mass = vec![0.0; g];
        let mut count = 0.0;
        for j in (0..g).rev() {
            upper_mass[j] = count / nf;
            count += group_size[j];
        }
        Ok(BivariateSurvival { marker_grid: grid, times: times.to_vec(), values, marginal, upper_mass })
    }
}

/// Nearest-neighbour estimator:
///
/// `TPF(c) = ((1 - F(c)) - S(c, t)) / (1 - S(t))`, `FPF(c) = S(c, t) / S(t)`.
///
/// Both are monotone in the threshold by construction.
pub fn cd_roc_nne(sample: &[MarkedTime], t: f64, kernel: &KernelSpec) -> Result<RocCurve> {
    require_finite(sample)?;
    check_split(sample, t)?;
    let biv = BivariateSurvival::estimate(sample, &[t], kernel)?;
    let s_all = biv.marginal[0];
    if s_all <= 0.0 || s_all >= 1.0 {
        return Err(Error::degenerate(format!("nearest-neighbour marginal survival at {t} is {s_all}")));
    }
    let mut points = Vec::with_capacity(biv.marker_grid.len() + 2);
    points.push(RocPoint { fpf: 0.0, tpf: 0.0, threshold: f64::INFINITY });
    for (j, &c) in biv.marker_grid.iter().enumerate() {
        let s_ct = biv.values[0][j];
        let tpf = (biv.upper_mass[j] - s_ct) / (1.0 - s_all);
        let fpf = s_ct / s_all;
        points.push(RocPoint { fpf, tpf, threshold: c });
    }
    points.push(RocPoint { fpf: 1.0, tpf: 1.0, threshold: f64::NEG_INFINITY });
    Ok(RocCurve::from_points(points))
}

/// Span choice for estimators evaluated on samples of varying size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SpanRule {
    Fixed(KernelSpec),
    /// `0.04 * n^(-1/5)` recomputed from each sample's size.
    DefaultForN,
}

impl SpanRule {
    pub fn kernel_for(&self, n: usize) -> KernelSpec {
        match self {
            SpanRule::Fixed(k) => *k,
            SpanRule::DefaultForN => KernelSpec::default_for_n(n),
        }
    }
}

/// Landmark series of `AUC(s, s + window)`: at each index time the cohort is
/// re-baselined with [`landmark_subset`] and the nearest-neighbour AUC is
/// computed `window` time units ahead. Entries whose subset has no events in
/// the window (or no survivors past it) are kept with `raw = None`.
pub fn sequential_cd_auc(
    cohort: &Cohort,
    index_times: &[f64],
    window: f64,
    span: SpanRule,
    mode: MarkerMode,
) -> Result<AccuracySeries> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::invalid(format!("window must be positive, got {window}")));
    }
    cohort.require_finite_markers()?;
    let points: Result<Vec<AccuracyPoint>> = index_times
        .par_iter()
        .map(|&s| {
            let lm = landmark_subset(cohort, s, mode)?;
            let sample = lm.baseline_sample();
            let n_cases = sample.iter().filter(|x| x.is_event() && x.time <= window).count();
            let n_controls = sample.iter().filter(|x| x.time > window).count();
            let raw = match cd_roc_nne(&sample, window, &span.kernel_for(sample.len())) {
                Ok(roc) => Some(roc.auc),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(AccuracyPoint::new(s, raw, n_cases, n_controls))
        })
        .collect();
    Ok(AccuracySeries::new(points?))
}
