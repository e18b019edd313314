//! Per-time accuracy summaries (AUC or TPF series) and their smoothed
//! versions.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyPoint {
    pub time: f64,
    /// `None` when the statistic is undefined at this time (for instance no
    /// controls left in the risk set).
    pub raw: Option<f64>,
    pub n_cases: usize,
    pub n_controls: usize,
    pub smoothed: Option<f64>,
    pub variance: Option<f64>,
}

impl AccuracyPoint {
    pub fn new(time: f64, raw: Option<f64>, n_cases: usize, n_controls: usize) -> Self {
        AccuracyPoint { time, raw, n_cases, n_controls, smoothed: None, variance: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AccuracySeries {
    pub points: Vec<AccuracyPoint>,
}

impl AccuracySeries {
    pub fn new(points: Vec<AccuracyPoint>) -> Self {
        AccuracySeries { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points with a defined raw value, in time order.
    pub fn defined(&self) -> impl Iterator<Item = &AccuracyPoint> + '_ {
        self.points.iter().filter(|p| p.raw.is_some())
    }

    pub fn n_defined(&self) -> usize {
        self.defined().count()
    }

    pub fn raw_at(&self, t: f64) -> Option<f64> {
        self.points.iter().find(|p| p.time == t).and_then(|p| p.raw)
    }

    /// Smoothed curve evaluated at `t` by linear interpolation between the
    /// neighbouring smoothed points; flat beyond the first and last point.
    pub fn smoothed_at(&self, t: f64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) =
            self.points.iter().filter_map(|p| p.smoothed.map(|s| (p.time, s))).unzip();
        interpolate(&x, &y, t)
    }

    pub fn variance_at(&self, t: f64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) =
            self.points.iter().filter_map(|p| p.variance.map(|s| (p.time, s))).unzip();
        interpolate(&x, &y, t)
    }
}

/// Piecewise-linear interpolation through `(x, y)` (x ascending), constant
/// extrapolation outside the range. Returns `None` for empty input.
pub fn interpolate(x: &[f64], y: &[f64], target: f64) -> Option<f64> {
    if x.is_empty() || x.len() != y.len() {
        return None;
    }
    if target <= x[0] {
        return Some(y[0]);
    }
    let last = x.len() - 1;
    if target >= x[last] {
        return Some(y[last]);
    }
    let k = x.partition_point(|&v| v <= target);
    let (x0, x1, y0, y1) = (x[k - 1], x[k], y[k - 1], y[k]);
    if x1 == x0 {
        return Some(y0);
    }
    Some(y0 + (y1 - y0) * (target - x0) / (x1 - x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let x = [1.0, 2.0, 4.0];
        let y = [0.0, 1.0, 0.0];
        assert_eq!(interpolate(&x, &y, 0.0), Some(0.0));
        assert_eq!(interpolate(&x, &y, 1.5), Some(0.5));
        assert_eq!(interpolate(&x, &y, 3.0), Some(0.5));
        assert_eq!(interpolate(&x, &y, 2.0), Some(1.0));
        assert_eq!(interpolate(&x, &y, 9.0), Some(0.0));
        assert_eq!(interpolate(&[], &[], 1.0), None);
    }
}
