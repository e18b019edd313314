//! ROC curve container shared by the cumulative and incident estimators.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpf: f64,
    pub tpf: f64,
    /// Positivity rule is `M > threshold`; `-inf` classifies everyone as
    /// positive and `+inf` no one.
    pub threshold: f64,
}

/// Points ordered by decreasing threshold, with the trapezoidal area along
/// that path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Sorts the points and integrates. The caller supplies the `±inf`
    /// threshold points; estimators that do not guarantee monotone
    /// sensitivity keep their raw values here. Ordering by threshold rather
    /// than FPF keeps vertical segments in the right order when two FPF
    /// values differ only by rounding.
    pub fn from_points(mut points: Vec<RocPoint>) -> RocCurve {
        points.sort_by(|a, b| b.threshold.total_cmp(&a.threshold));
        let auc = trapezoid(&points);
        RocCurve { points, auc }
    }

    pub fn tpf_at_threshold(&self, c: f64) -> Option<f64> {
        self.points.iter().find(|p| p.threshold == c).map(|p| p.tpf)
    }

    pub fn fpf_at_threshold(&self, c: f64) -> Option<f64> {
        self.points.iter().find(|p| p.threshold == c).map(|p| p.fpf)
    }

    /// Points ordered by decreasing threshold.
    pub fn by_threshold(&self) -> Vec<RocPoint> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| b.threshold.total_cmp(&a.threshold));
        pts
    }
}

pub fn trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpf - w[0].fpf) * 0.5 * (w[0].tpf + w[1].tpf))
        .sum()
}

/// Distinct observed thresholds in decreasing order, framed by `+inf` and
/// `-inf`.
pub(crate) fn thresholds(markers: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut c: Vec<f64> = markers.into_iter().collect();
    c.sort_by(|a, b| b.total_cmp(a));
    c.dedup();
    let mut out = Vec::with_capacity(c.len() + 2);
    out.push(f64::INFINITY);
    out.extend(c);
    out.push(f64::NEG_INFINITY);
    out
}
