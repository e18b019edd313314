//! Product-limit estimation and percentile nearest-neighbour windows.

use serde::Serialize;

use crate::data::MarkedTime;
use crate::error::{Error, Result};

/// Right-continuous step function. `eval(t)` returns the value at the
/// largest jump time `<= t`, or `initial_value` before the first jump.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub initial_value: f64,
}

impl StepCurve {
    pub fn constant(value: f64) -> Self {
        StepCurve { times: Vec::new(), values: Vec::new(), initial_value: value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }

    /// Value just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }

    /// Size of the drop at `t` (zero away from jump times).
    pub fn jump_at(&self, t: f64) -> f64 {
        self.left_limit(t) - self.eval(t)
    }
}

/// Smoothing span `λ` of a percentile nearest-neighbour window: subject `j`
/// belongs to the window of anchor `a` when `|F(M_j) - F(a)| < λ`, so about
/// a fraction `2λ` of the sample is included. Windows are truncated at the
/// percentile boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelSpec {
    span: f64,
}

impl KernelSpec {
    pub fn new(span: f64) -> Result<Self> {
        if !(span > 0.0 && 2.0 * span < 1.0) {
            return Err(Error::invalid(format!("span must satisfy 0 < 2*span < 1, got {span}")));
        }
        Ok(KernelSpec { span })
    }

    /// `0.04 * n^(-1/5)`, the default span for the nearest-neighbour ROC
    /// estimator.
    pub fn default_for_n(n: usize) -> Self {
        KernelSpec { span: 0.04 * (n.max(1) as f64).powf(-0.2) }
    }

    pub fn span(&self) -> f64 {
        self.span
    }
}

/// Product-limit estimate `prod_{s <= t} (1 - sum w 1(Z = s) delta / sum w 1(Z >= s))`.
///
/// Subjects censored at an event time are still at risk at that time.
pub fn kaplan_meier(times: &[f64], events: &[bool], weights: Option<&[f64]>) -> Result<StepCurve> {
    if times.len() != events.len() {
        return Err(Error::invalid(format!("{} times but {} event flags", times.len(), events.len())));
    }
    if let Some(w) = weights {
        if w.len() != times.len() {
            return Err(Error::invalid(format!("{} times but {} weights", times.len(), w.len())));
        }
        if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::invalid(format!("survival time {t} is negative or not finite")));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..times.len()).map(weight).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("all weights are zero"));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    // Between censorings the product telescopes to a ratio of at-risk
    // totals; evaluating it that way keeps uncensored runs exact.
    let mut at_risk = total;
    let (mut base_surv, mut base_risk) = (1.0, total);
    let mut surv = 1.0;
    let mut curve = StepCurve::constant(1.0);
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let mut deaths = 0.0;
        let mut leaving = 0.0;
        while k < order.len() && times[order[k]] == t {
            let i = order[k];
            leaving += weight(i);
            if events[i] {
                deaths += weight(i);
            }
            k += 1;
        }
        if deaths > 0.0 {
            surv = base_surv * ((at_risk - deaths) / base_risk);
            curve.times.push(t);
            curve.values.push(surv);
        }
        at_risk -= leaving;
        if leaving > deaths {
            (base_surv, base_risk) = (surv, at_risk);
        }
    }
    Ok(curve)
}

/// Product-limit survival at a single time for unit-weight `(time, event)`
/// pairs. Sorts `pairs` in place.
pub(crate) fn km_at(pairs: &mut [(f64, bool)], t: f64) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let (mut base_surv, mut base_risk) = (1.0, n as f64);
    let mut surv = 1.0;
    let mut k = 0;
    while k < n && pairs[k].0 <= t {
        let time = pairs[k].0;
        let at_risk = n - k;
        let mut deaths = 0usize;
        while k < n && pairs[k].0 == time {
            deaths += pairs[k].1 as usize;
            k += 1;
        }
        if deaths > 0 {
            surv = base_surv * ((at_risk - deaths) as f64 / base_risk);
        }
        if n - k < at_risk - deaths {
            (base_surv, base_risk) = (surv, (n - k) as f64);
        }
    }
    surv
}

/// Average ranks (1-based, ties share the mean of their positions).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut k = 0;
    while k < order.len() {
        let mut e = k + 1;
        while e < order.len() && values[order[e]] == values[order[k]] {
            e += 1;
        }
        let avg = (k + 1 + e) as f64 / 2.0;
        for &i in &order[k..e] {
            ranks[i] = avg;
        }
        k = e;
    }
    ranks
}

/// Sample sorted by marker with average ranks, for percentile windows.
///
/// Window membership is evaluated on the rank scale (`|r_j - r_a| < λ n`),
/// which is the percentile rule scaled by `n` and avoids rounding noise in
/// `r / n`.
#[derive(Clone, Debug)]
pub(crate) struct PercentileIndex {
    /// Sample indices sorted by marker.
    pub order: Vec<usize>,
    /// Average rank of `order[k]`, non-decreasing in `k`.
    pub ranks: Vec<f64>,
    sorted_markers: Vec<f64>,
}

impl PercentileIndex {
    pub fn new(markers: &[f64]) -> Self {
        let ranks_by_index = average_ranks(markers);
        let mut order: Vec<usize> = (0..markers.len()).collect();
        order.sort_by(|&a, &b| markers[a].total_cmp(&markers[b]).then(a.cmp(&b)));
        let ranks = order.iter().map(|&i| ranks_by_index[i]).collect();
        let sorted_markers = order.iter().map(|&i| markers[i]).collect();
        PercentileIndex { order, ranks, sorted_markers }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    /// Average rank an arbitrary value would receive among the sample.
    pub fn rank_of(&self, value: f64) -> f64 {
        let below = self.sorted_markers.partition_point(|&m| m < value);
        let equal = self.sorted_markers.partition_point(|&m| m <= value) - below;
        below as f64 + (equal as f64 + 1.0) / 2.0
    }

    /// Positions `k` (into `order`) inside the window around `anchor_rank`.
    pub fn window(&self, anchor_rank: f64, kernel: &KernelSpec) -> std::ops::Range<usize> {
        let half_width = kernel.span() * self.len() as f64;
        let lo = self.ranks.partition_point(|&r| r <= anchor_rank - half_width);
        let hi = self.ranks.partition_point(|&r| r < anchor_rank + half_width);
        lo..hi.max(lo)
    }
}

pub(crate) fn require_finite(sample: &[MarkedTime]) -> Result<()> {
    if let Some(s) = sample.iter().find(|s| !s.marker.is_finite()) {
        return Err(Error::invalid(format!("marker value {} is not finite", s.marker)));
    }
    if let Some(s) = sample.iter().find(|s| !(s.time >= 0.0 && s.time.is_finite())) {
        return Err(Error::invalid(format!("survival time {} is negative or not finite", s.time)));
    }
    Ok(())
}

/// Conditional survival `S(t | M = anchor)` from the product-limit estimator
/// restricted to the percentile window around `anchor`. Any cause counts as
/// an event.
pub fn conditional_km_nne(sample: &[MarkedTime], anchor: f64, kernel: &KernelSpec) -> Result<StepCurve> {
    require_finite(sample)?;
    if !anchor.is_finite() {
        return Err(Error::invalid("anchor marker is not finite"));
    }
    let markers: Vec<f64> = sample.iter().map(|s| s.marker).collect();
    let index = PercentileIndex::new(&markers);
    let window = index.window(index.rank_of(anchor), kernel);
    if window.is_empty() {
        return Err(Error::degenerate(format!("percentile window around marker {anchor} is empty")));
    }
    let members = &index.order[window];
    let times: Vec<f64> = members.iter().map(|&i| sample[i].time).collect();
    let events: Vec<bool> = members.iter().map(|&i| sample[i].is_event()).collect();
    kaplan_meier(&times, &events, None)
}
