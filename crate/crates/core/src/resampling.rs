//! Subject-level bootstrap with percentile intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cd_roc::{cd_roc_km, cd_roc_nne, SpanRule};
use crate::data::{landmark_subset, Cohort, MarkerMode, MarkerSource};
use crate::error::{Error, Result};
use crate::id_roc::{bandwidth_cv, c_index, default_bandwidth_grid, dynamic_tpr, mean_rank, wmr_smooth};
use crate::km::KernelSpec;

pub const DEFAULT_NBOOT: usize = 500;

/// Smoothing choice for incident curves inside a statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Smoothing {
    Fixed(f64),
    /// Leave-one-out bandwidth on the default grid, reselected per sample.
    CrossValidated,
}

/// Declarative description of a scalar accuracy statistic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Statistic {
    /// Concordance index truncated at `tau`.
    CIndex { tau: f64, mode: MarkerMode },
    /// Smoothed incident AUC evaluated at `time`.
    IdAuc { time: f64, smoothing: Smoothing, mode: MarkerMode },
    /// Smoothed incident sensitivity at false-positive fraction `fpf`.
    IdTpr { time: f64, fpf: f64, span: f64, mode: MarkerMode },
    /// Nearest-neighbour cumulative AUC for `(s, s + window]` after
    /// landmarking at `s` (use `s = 0` for a baseline analysis).
    CdAucNne { landmark: f64, window: f64, span: SpanRule, mode: MarkerMode },
    /// Product-limit cumulative AUC at `t` on the baseline sample.
    CdAucKm { t: f64 },
}

impl Statistic {
    pub fn evaluate(&self, cohort: &Cohort) -> Result<f64> {
        match self {
            Statistic::CIndex { tau, mode } => Ok(c_index(cohort, *mode, *tau)?.value),
            Statistic::IdAuc { time, smoothing, mode } => {
                let raw = mean_rank(cohort, *mode)?;
                let span = match smoothing {
                    Smoothing::Fixed(s) => *s,
                    Smoothing::CrossValidated => bandwidth_cv(&raw, &default_bandwidth_grid())?,
                };
                wmr_smooth(&raw, &KernelSpec::new(span)?)
                    .smoothed_at(*time)
                    .ok_or_else(|| Error::degenerate("no defined mean ranks"))
            }
            Statistic::IdTpr { time, fpf, span, mode } => dynamic_tpr(cohort, *fpf, *mode, &KernelSpec::new(*span)?)?
                .smoothed_at(*time)
                .ok_or_else(|| Error::degenerate("no defined sensitivities")),
            Statistic::CdAucNne { landmark, window, span, mode } => {
                let lm = landmark_subset(cohort, *landmark, *mode)?;
                let sample = lm.baseline_sample();
                Ok(cd_roc_nne(&sample, *window, &span.kernel_for(sample.len()))?.auc)
            }
            Statistic::CdAucKm { t } => Ok(cd_roc_km(&cohort.baseline_sample(), *t)?.auc),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub point: f64,
    /// One entry per replicate; `None` where the statistic was undefined.
    pub replicates: Vec<Option<f64>>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub n_boot: usize,
    pub n_defined: usize,
    /// Fewer than 90% of the replicates were defined.
    pub unstable: bool,
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Generator for replicate `r`: the master seed selects the key and the
/// replicate index the stream, so results do not depend on scheduling.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Subject indices drawn with replacement for replicate `r`.
pub fn replicate_draw(n: usize, seed: u64, replicate: usize) -> Vec<usize> {
    let mut rng = replicate_rng(seed, replicate);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn undefined(e: &Error) -> bool {
    matches!(e, Error::Degenerate(_) | Error::Singular(_))
}

fn summarize(point: f64, replicates: Vec<Option<f64>>, n_boot: usize, seed: u64) -> BootstrapResult {
    let mut defined: Vec<f64> = replicates.iter().flatten().copied().collect();
    defined.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = if defined.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile_type7(&defined, 0.025), quantile_type7(&defined, 0.975))
    };
    let n_defined = defined.len();
    BootstrapResult {
        point,
        replicates,
        ci_low,
        ci_high,
        seed,
        n_boot,
        n_defined,
        unstable: (n_defined as f64) < 0.9 * n_boot as f64,
    }
}

/// Bootstraps several statistics on shared replicates. `statistic` returns
/// one entry per statistic (`None` where undefined) and must always return
/// the same number of entries. Degenerate or singular replicates count as
/// undefined for every entry; other errors abort.
pub fn bootstrap_many<F>(cohort: &Cohort, statistic: F, n_boot: usize, seed: u64) -> Result<Vec<BootstrapResult>>
where
    F: Fn(&Cohort) -> Result<Vec<Option<f64>>> + Sync,
{
    if n_boot == 0 {
        return Err(Error::invalid("number of bootstrap replicates must be at least 1"));
    }
    let point = statistic(cohort)?;
    let k = point.len();
    let n = cohort.n_subjects();
    let replicates: Vec<Vec<Option<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|r| {
            let sample = cohort.resample(&replicate_draw(n, seed, r));
            match statistic(&sample) {
                Ok(v) if v.len() == k => Ok(v.into_iter().map(|x| x.filter(|x| x.is_finite())).collect()),
                Ok(v) => Err(Error::invalid(format!("statistic returned {} values, expected {k}", v.len()))),
                Err(e) if undefined(&e) => Ok(vec![None; k]),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok((0..k)
        .map(|j| {
            let column = replicates.iter().map(|r| r[j]).collect();
            summarize(point[j].unwrap_or(f64::NAN), column, n_boot, seed)
        })
        .collect())
}

/// Bootstraps one statistic of the cohort.
pub fn bootstrap_with<F>(cohort: &Cohort, statistic: F, n_boot: usize, seed: u64) -> Result<BootstrapResult>
where
    F: Fn(&Cohort) -> Result<f64> + Sync,
{
    let mut out = bootstrap_many(cohort, |c| Ok(vec![Some(statistic(c)?)]), n_boot, seed)?;
    Ok(out.remove(0))
}

pub fn bootstrap_ci(cohort: &Cohort, statistic: &Statistic, n_boot: usize, seed: u64) -> Result<BootstrapResult> {
    bootstrap_with(cohort, |c| statistic.evaluate(c), n_boot, seed)
}

/// Paired bootstrap of `c(a) - c(b)`: both concordances are computed on the
/// same resampled subjects.
pub fn cindex_difference_ci(
    cohort: &Cohort,
    marker_a: &MarkerSource,
    marker_b: &MarkerSource,
    tau: f64,
    mode: MarkerMode,
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    cohort.with_marker_from(marker_a)?;
    cohort.with_marker_from(marker_b)?;
    bootstrap_with(
        cohort,
        |c| {
            let a = c_index(&c.with_marker_from(marker_a)?, mode, tau)?.value;
            let b = c_index(&c.with_marker_from(marker_b)?, mode, tau)?.value;
            Ok(a - b)
        },
        n_boot,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MarkedTime;

    #[test]
    fn type7_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&x, 0.0), 1.0);
        assert_eq!(quantile_type7(&x, 1.0), 4.0);
        assert!((quantile_type7(&x, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_type7(&x, 0.025) - 1.075).abs() < 1e-12);
        assert_eq!(quantile_type7(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn replicate_streams_are_fixed() {
        assert_eq!(replicate_draw(20, 5, 3), replicate_draw(20, 5, 3));
        assert_ne!(replicate_draw(20, 5, 3), replicate_draw(20, 5, 4));
    }

    #[test]
    fn constant_statistic_has_zero_width() {
        let s: Vec<MarkedTime> = (0..10).map(|i| MarkedTime::new(-(i as f64), 1.0 + i as f64, 1)).collect();
        let c = Cohort::from_marked_times(&s).unwrap();
        let r = bootstrap_ci(&c, &Statistic::CIndex { tau: 20.0, mode: MarkerMode::Baseline }, 50, 1).unwrap();
        assert_eq!(r.point, 1.0);
        assert_eq!((r.ci_low, r.ci_high), (1.0, 1.0));
        assert!(bootstrap_ci(&c, &Statistic::CdAucKm { t: 3.0 }, 0, 1).is_err());
    }
}
