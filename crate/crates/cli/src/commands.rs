//! Subcommand handlers. Each reads its inputs, runs the estimator and writes
//! a result table plus a plot-data file; a short summary goes to stdout.

use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use tdroc::case_study::{reference_row, run_case_study, scored_cohort, CaseStudyConfig, Estimate, REFERENCE_CINDEX_DIFFERENCE};
use tdroc::cd_roc::{cd_roc_km, cd_roc_nne, sequential_cd_auc, SpanRule};
use tdroc::competing::{cd_accuracy_competing, id_accuracy_competing};
use tdroc::cox::{fit_cox_with, CoxOptions, ModelId, ModelSpec, TieMethod};
use tdroc::data::{Cohort, MarkerMode, MarkerSource};
use tdroc::id_roc::{
    bandwidth_cv, c_index, default_bandwidth_grid, dynamic_tpr, gamma_t_schoenfeld, mean_rank, wmr_smooth,
    DEFAULT_AUC_SPAN, DEFAULT_TPR_SPAN,
};
use tdroc::io::{prepare_pbc_files, read_cohort_file, read_model_spec, write_cohort_file, ColumnMap, PreparedPbc};
use tdroc::km::{kaplan_meier, KernelSpec};
use tdroc::resampling::{bootstrap_ci, bootstrap_many, cindex_difference_ci, BootstrapResult, Smoothing, Statistic};
use tdroc::roc::RocCurve;
use tdroc::series::AccuracySeries;
use tdroc::simulate::{generate, truth_cd_auc, Censoring, ScenarioSpec};
use tdroc::{Error, Result};

use crate::output::{series_rows, Outputs, PlotRow};
use crate::*;

pub fn run(cli: &Cli) -> Result<()> {
    let mut out = Outputs::new(&cli.output_dir, cli.format)?;
    match &cli.command {
        Command::PreparePbc(a) => prepare(a, &mut out),
        Command::Km(a) => km(a, &mut out),
        Command::CdRoc(a) => cd_roc(a, &mut out),
        Command::CdSequential(a) => cd_sequential(a, &mut out),
        Command::IdAuc(a) => id_auc(a, &mut out),
        Command::IdTpr(a) => id_tpr(a, &mut out),
        Command::CoxFit(a) => cox(a, &mut out),
        Command::CvScores(a) => cv_scores(a, &mut out),
        Command::Cindex(a) => cindex(a, &mut out),
        Command::CindexDiff(a) => cindex_diff(a, &mut out),
        Command::CompetingCd(a) => competing_cd(a, &mut out),
        Command::CompetingId(a) => competing_id(a, &mut out),
        Command::Bootstrap(a) => bootstrap(a, &mut out),
        Command::Simulate(a) => simulate(a, &mut out),
        Command::CaseStudy(a) => case_study(a, &mut out),
    }?;
    for p in out.written() {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn source(name: &str) -> MarkerSource {
    if name == "marker" {
        MarkerSource::Marker
    } else {
        MarkerSource::Covariate(name.to_string())
    }
}

/// Reads a cohort and optionally swaps in a covariate as the marker.
fn load(input: &InputArgs, marker: Option<&str>) -> Result<Cohort> {
    let cohort = read_cohort_file(&input.input).map_err(|e| with_path(e, &input.input))?;
    match marker {
        Some(name) => cohort.with_marker_from(&source(name)),
        None => Ok(cohort),
    }
}

/// Names the file in bare I/O errors.
fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::InvalidInput(format!("{}: {io}", path.display())),
        other => other,
    }
}

fn load_pbc(input: &Path, sequential: &Path, columns: Option<&Path>) -> Result<PreparedPbc> {
    let map = match columns {
        Some(p) => ColumnMap::read(p).map_err(|e| with_path(e, p))?,
        None => ColumnMap::default(),
    };
    for p in [input, sequential] {
        if !p.is_file() {
            return Err(Error::InvalidInput(format!("{}: file not found", p.display())));
        }
    }
    prepare_pbc_files(input, sequential, &map)
}

fn model_spec(name: &str) -> Result<ModelSpec> {
    if let Some(path) = name.strip_prefix("custom:") {
        return read_model_spec(Path::new(path));
    }
    match name {
        "marker" => Ok(ModelSpec::marker_only()),
        other => ModelSpec::by_name(other).ok_or_else(|| {
            Error::InvalidInput(format!(
                "unknown model `{other}` (expected five_covariate, four_covariate, marker or custom:<path>)"
            ))
        }),
    }
}

fn model_label(id: ModelId) -> &'static str {
    match id {
        ModelId::FourCovariate => "4-cov",
        ModelId::FiveCovariate => "5-cov",
        ModelId::Custom => "custom",
    }
}

fn mode_label(mode: MarkerMode) -> &'static str {
    match mode {
        MarkerMode::Baseline => "baseline",
        MarkerMode::Updated => "updated",
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"))
}

fn fmt_ci(low: Option<f64>, high: Option<f64>) -> String {
    match (low, high) {
        (Some(l), Some(h)) => format!(" (95% CI {l:.3}, {h:.3})"),
        _ => String::new(),
    }
}

/// Percentile intervals of `f` evaluated on bootstrap replicates. Returns
/// `None` pairs when `nboot` is zero.
fn pointwise<F>(cohort: &Cohort, k: usize, boot: &BootArgs, f: F) -> Result<Vec<(Option<f64>, Option<f64>)>>
where
    F: Fn(&Cohort) -> Result<Vec<Option<f64>>> + Sync,
{
    if boot.nboot == 0 {
        return Ok(vec![(None, None); k]);
    }
    let res = bootstrap_many(cohort, f, boot.nboot, boot.seed)?;
    Ok(res.iter().map(|b| (finite(b.ci_low), finite(b.ci_high))).collect())
}

// ---- prepare-pbc and km ----------------------------------------------------

#[derive(Serialize)]
struct PrepareRow {
    subjects: usize,
    events: usize,
    records: usize,
    intervals: usize,
    rejected: usize,
    excluded_subjects: usize,
}

#[derive(Serialize)]
struct MessageRow {
    message: String,
}

fn prepare(a: &PrepareArgs, out: &mut Outputs) -> Result<()> {
    let p = load_pbc(&a.input, &a.sequential, a.columns.as_deref())?;
    let path = out.path("cohort.csv");
    write_cohort_file(&p.cohort, &path)?;
    out.record(path);
    let r = &p.report;
    out.table(
        "prepare_pbc",
        &[PrepareRow {
            subjects: r.subjects,
            events: r.events,
            records: r.records,
            intervals: r.intervals,
            rejected: r.rejected.len(),
            excluded_subjects: p.excluded_subjects,
        }],
    )?;
    let rejected: Vec<MessageRow> = r.rejected.iter().map(|x| MessageRow { message: x.to_string() }).collect();
    out.table("rejected_rows", &rejected)?;
    println!("subjects: {}", r.subjects);
    println!("events: {}", r.events);
    println!("records: {}", r.records);
    println!("intervals: {} ({} measurement rows rejected)", r.intervals, r.rejected.len());
    for (column, n) in &p.corrections {
        println!("baseline {column} replaced by the day-0 value for {n} subjects");
    }
    Ok(())
}

#[derive(Serialize)]
struct KmRow {
    time: f64,
    survival: f64,
}

fn km(a: &InputArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(a, None)?;
    let unit = cohort.time_unit();
    let (times, events): (Vec<f64>, Vec<bool>) = cohort
        .subjects()
        .map(|c| {
            let last = &c[c.len() - 1];
            (last.stop, last.status.is_event())
        })
        .unzip();
    let curve = kaplan_meier(&times, &events, None)?;
    let rows: Vec<KmRow> = std::iter::once(KmRow { time: 0.0, survival: curve.initial_value })
        .chain(curve.times.iter().zip(&curve.values).map(|(&t, &s)| KmRow { time: t / unit, survival: s }))
        .collect();
    out.table("km", &rows)?;
    let plot: Vec<PlotRow> = rows.iter().map(|r| PlotRow::point(r.time, Some(r.survival))).collect();
    out.plot("km", &plot)?;
    println!("subjects: {}, events: {}", cohort.n_subjects(), cohort.n_events());
    Ok(())
}

// ---- cumulative/dynamic ----------------------------------------------------

#[derive(Serialize)]
struct RocRow {
    threshold: f64,
    fpf: f64,
    tpf: f64,
}

#[derive(Serialize)]
struct AucSummary {
    time: f64,
    estimator: &'static str,
    span: Option<f64>,
    auc: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    subjects: usize,
}

fn roc_rows(roc: &RocCurve) -> Vec<RocRow> {
    roc.points.iter().map(|p| RocRow { threshold: p.threshold, fpf: p.fpf, tpf: p.tpf }).collect()
}

fn write_roc(out: &mut Outputs, name: &str, roc: &RocCurve, summary: AucSummary) -> Result<()> {
    out.table(name, &roc_rows(roc))?;
    let plot = PlotRow { time: summary.time, raw: Some(summary.auc), smoothed: None, ci_low: summary.ci_low, ci_high: summary.ci_high };
    println!("AUC({}) = {:.4}{}", summary.time, summary.auc, fmt_ci(summary.ci_low, summary.ci_high));
    out.table(&format!("{name}_summary"), &[summary])?;
    out.plot(name, &[plot])?;
    Ok(())
}

fn cd_roc(a: &CdRocArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.as_deref())?;
    let t = a.time * cohort.time_unit();
    let sample = cohort.baseline_sample();
    let (roc, span, statistic) = match a.estimator {
        Estimator::Km => (cd_roc_km(&sample, t)?, None, Statistic::CdAucKm { t }),
        Estimator::Nne => {
            let rule = match a.span {
                Some(s) => SpanRule::Fixed(KernelSpec::new(s)?),
                None => SpanRule::DefaultForN,
            };
            let kernel = rule.kernel_for(sample.len());
            let st = Statistic::CdAucNne { landmark: 0.0, window: t, span: rule, mode: MarkerMode::Baseline };
            (cd_roc_nne(&sample, t, &kernel)?, Some(kernel.span()), st)
        }
    };
    let (ci_low, ci_high) = interval(&cohort, &statistic, &a.boot)?;
    let summary = AucSummary {
        time: a.time,
        estimator: if a.estimator == Estimator::Km { "km" } else { "nne" },
        span,
        auc: roc.auc,
        ci_low,
        ci_high,
        subjects: sample.len(),
    };
    write_roc(out, "cd_roc", &roc, summary)
}

fn interval(cohort: &Cohort, statistic: &Statistic, boot: &BootArgs) -> Result<(Option<f64>, Option<f64>)> {
    if boot.nboot == 0 {
        return Ok((None, None));
    }
    let b = bootstrap_ci(cohort, statistic, boot.nboot, boot.seed)?;
    Ok((finite(b.ci_low), finite(b.ci_high)))
}

#[derive(Serialize)]
struct SequentialRow {
    landmark: f64,
    auc: Option<f64>,
    n_cases: usize,
    n_controls: usize,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

fn cd_sequential(a: &CdSequentialArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.marker.as_deref())?;
    let unit = cohort.time_unit();
    let mode = a.marker.marker_mode.into();
    let landmarks: Vec<f64> = a.landmarks.iter().map(|s| s * unit).collect();
    let window = a.window * unit;
    let rule = match a.span {
        Some(s) => SpanRule::Fixed(KernelSpec::new(s)?),
        None => SpanRule::DefaultForN,
    };
    let series = sequential_cd_auc(&cohort, &landmarks, window, rule, mode)?;
    let ci = pointwise(&cohort, landmarks.len(), &a.boot, |c| {
        Ok(sequential_cd_auc(c, &landmarks, window, rule, mode)?.points.iter().map(|p| p.raw).collect())
    })?;
    let rows: Vec<SequentialRow> = series
        .points
        .iter()
        .zip(&ci)
        .map(|(p, &(ci_low, ci_high))| SequentialRow {
            landmark: p.time / unit,
            auc: p.raw,
            n_cases: p.n_cases,
            n_controls: p.n_controls,
            ci_low,
            ci_high,
        })
        .collect();
    for r in &rows {
        println!("AUC({}, {} + {}) = {}{}", r.landmark, r.landmark, a.window, fmt_opt(r.auc), fmt_ci(r.ci_low, r.ci_high));
    }
    let plot: Vec<PlotRow> = rows
        .iter()
        .map(|r| PlotRow { time: r.landmark, raw: r.auc, smoothed: None, ci_low: r.ci_low, ci_high: r.ci_high })
        .collect();
    out.table("cd_sequential", &rows)?;
    out.plot("cd_sequential", &plot)?;
    Ok(())
}

// ---- incident/dynamic ------------------------------------------------------

#[derive(Serialize)]
struct SeriesRow {
    time: f64,
    raw: Option<f64>,
    smoothed: Option<f64>,
    variance: Option<f64>,
    n_cases: usize,
    n_controls: usize,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

/// Bootstrap intervals when requested; otherwise the smoothed value plus or
/// minus 1.96 pointwise standard errors.
fn series_output(
    out: &mut Outputs,
    name: &str,
    series: &AccuracySeries,
    unit: f64,
    ci: &[(Option<f64>, Option<f64>)],
    bootstrapped: bool,
) -> Result<()> {
    let rows: Vec<SeriesRow> = series
        .points
        .iter()
        .zip(ci)
        .map(|(p, &(lo, hi))| {
            let band = |sign: f64| match (p.smoothed, p.variance) {
                (Some(s), Some(v)) if !bootstrapped => Some(s + sign * 1.96 * v.sqrt()),
                _ => None,
            };
            SeriesRow {
                time: p.time / unit,
                raw: p.raw,
                smoothed: p.smoothed,
                variance: p.variance,
                n_cases: p.n_cases,
                n_controls: p.n_controls,
                ci_low: lo.or_else(|| band(-1.0)),
                ci_high: hi.or_else(|| band(1.0)),
            }
        })
        .collect();
    let mut plot = series_rows(series, unit);
    for (p, r) in plot.iter_mut().zip(&rows) {
        p.ci_low = r.ci_low;
        p.ci_high = r.ci_high;
    }
    out.table(name, &rows)?;
    out.plot(name, &plot)?;
    Ok(())
}

fn id_auc(a: &IdAucArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.marker.as_deref())?;
    let unit = cohort.time_unit();
    let mode: MarkerMode = a.marker.marker_mode.into();
    let smoothing = if a.smooth.cv_bandwidth {
        Smoothing::CrossValidated
    } else {
        Smoothing::Fixed(a.smooth.lambda.unwrap_or(DEFAULT_AUC_SPAN))
    };
    let smooth = |c: &Cohort| -> Result<(AccuracySeries, f64)> {
        let raw = mean_rank(c, mode)?;
        let span = match smoothing {
            Smoothing::Fixed(s) => s,
            Smoothing::CrossValidated => bandwidth_cv(&raw, &default_bandwidth_grid())?,
        };
        Ok((wmr_smooth(&raw, &KernelSpec::new(span)?), span))
    };
    let (series, span) = smooth(&cohort)?;
    let times: Vec<f64> = series.points.iter().map(|p| p.time).collect();
    let ci = pointwise(&cohort, times.len(), &a.boot, |c| {
        let (s, _) = smooth(c)?;
        Ok(times.iter().map(|&t| s.smoothed_at(t)).collect())
    })?;
    println!("span: {span}");
    for y in [1.0, 4.0, 6.0] {
        println!("AUC at {y}: {}", fmt_opt(series.smoothed_at(y * unit)));
    }
    series_output(out, "id_auc", &series, unit, &ci, a.boot.nboot > 0)
}

fn id_tpr(a: &IdTprArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.marker.as_deref())?;
    let unit = cohort.time_unit();
    let mode: MarkerMode = a.marker.marker_mode.into();
    let kernel = KernelSpec::new(a.lambda.unwrap_or(DEFAULT_TPR_SPAN))?;
    let series = dynamic_tpr(&cohort, a.fpf, mode, &kernel)?;
    let times: Vec<f64> = series.points.iter().map(|p| p.time).collect();
    let ci = pointwise(&cohort, times.len(), &a.boot, |c| {
        let s = dynamic_tpr(c, a.fpf, mode, &kernel)?;
        Ok(times.iter().map(|&t| s.smoothed_at(t)).collect())
    })?;
    println!("fpf: {}, span: {}", a.fpf, kernel.span());
    series_output(out, "id_tpr", &series, unit, &ci, a.boot.nboot > 0)
}

// ---- Cox models ------------------------------------------------------------

#[derive(Serialize)]
struct CoefRow {
    term: String,
    coefficient: f64,
    std_error: f64,
    hazard_ratio: f64,
    z: f64,
}

#[derive(Serialize)]
struct FitRow {
    model: String,
    ties: &'static str,
    events: usize,
    log_likelihood: f64,
    null_log_likelihood: f64,
    iterations: usize,
    converged: bool,
}

fn cox(a: &CoxFitArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, None)?;
    let unit = cohort.time_unit();
    let data = cohort.view(a.marker_mode.into());
    let spec = model_spec(&a.model)?;
    let ties = match a.ties {
        Ties::Efron => TieMethod::Efron,
        Ties::Breslow => TieMethod::Breslow,
    };
    let fit = fit_cox_with(&data, &spec, &CoxOptions { ties, ..CoxOptions::default() })?;
    let rows: Vec<CoefRow> = fit
        .term_names
        .iter()
        .zip(fit.coefficients.iter().zip(&fit.std_errors))
        .map(|(term, (&b, &se))| CoefRow {
            term: term.clone(),
            coefficient: b,
            std_error: se,
            hazard_ratio: b.exp(),
            z: b / se,
        })
        .collect();
    for r in &rows {
        println!("{:<16} {:>9.4} (se {:.4})", r.term, r.coefficient, r.std_error);
    }
    println!("log partial likelihood {:.4}, {} iterations", fit.log_partial_likelihood, fit.iterations);
    out.table("cox_fit", &rows)?;
    out.table(
        "cox_fit_summary",
        &[FitRow {
            model: a.model.clone(),
            ties: if ties == TieMethod::Efron { "efron" } else { "breslow" },
            events: fit.n_events,
            log_likelihood: fit.log_partial_likelihood,
            null_log_likelihood: fit.null_log_likelihood,
            iterations: fit.iterations,
            converged: fit.converged,
        }],
    )?;
    // coefficient path for single-term models; header only otherwise
    let plot = if fit.coefficients.len() == 1 {
        let path = gamma_t_schoenfeld(&fit, &data, &KernelSpec::new(a.lambda)?)?;
        path.times
            .iter()
            .zip(&path.values)
            .map(|(&t, &g)| PlotRow { time: t / unit, raw: Some(fit.coefficients[0]), smoothed: Some(g), ci_low: None, ci_high: None })
            .collect()
    } else {
        Vec::new()
    };
    out.plot("cox_fit", &plot)?;
    Ok(())
}

#[derive(Serialize)]
struct ScoreRow {
    id: String,
    start: f64,
    stop: f64,
    score: f64,
}

fn cv_scores(a: &CvScoresArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, None)?;
    let unit = cohort.time_unit();
    let spec = model_spec(&a.model)?;
    let mode: MarkerMode = a.marker_mode.into();
    let config = CaseStudyConfig { folds: a.folds, cv_seed: a.seed, ..CaseStudyConfig::default() };
    let scored = scored_cohort(&cohort, &spec, mode, &config)?;
    let path = out.path("scored.csv");
    write_cohort_file(&scored, &path)?;
    out.record(path);
    let rows: Vec<ScoreRow> = scored
        .intervals()
        .iter()
        .map(|iv| ScoreRow { id: iv.subject.0.clone(), start: iv.start / unit, stop: iv.stop / unit, score: iv.marker })
        .collect();
    out.table("cv_scores", &rows)?;
    // scores have no time series of their own
    out.plot("cv_scores", &[])?;
    println!("{} scores for {} subjects ({} mode)", rows.len(), scored.n_subjects(), mode_label(mode));
    Ok(())
}

// ---- concordance -----------------------------------------------------------

#[derive(Serialize)]
struct CindexRow {
    tau: f64,
    c_index: f64,
    weights_sum: f64,
    n_times: usize,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

fn cindex(a: &CindexArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.marker.as_deref())?;
    let mode: MarkerMode = a.marker.marker_mode.into();
    let tau = a.tau * cohort.time_unit();
    let c = c_index(&cohort, mode, tau)?;
    let (ci_low, ci_high) = interval(&cohort, &Statistic::CIndex { tau, mode }, &a.boot)?;
    println!("c-index(tau = {}) = {:.4}{}", a.tau, c.value, fmt_ci(ci_low, ci_high));
    let row = CindexRow { tau: a.tau, c_index: c.value, weights_sum: c.weights_sum, n_times: c.n_times, ci_low, ci_high };
    out.table("cindex", &[row])?;
    out.plot("cindex", &[PlotRow { time: a.tau, raw: Some(c.value), smoothed: None, ci_low, ci_high }])?;
    Ok(())
}

#[derive(Serialize)]
struct DiffRow {
    marker_a: String,
    marker_b: String,
    tau: f64,
    c_a: f64,
    c_b: f64,
    difference: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    n_boot: usize,
    n_defined: usize,
}

fn cindex_diff(a: &CindexDiffArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, None)?;
    let mode: MarkerMode = a.marker_mode.into();
    let tau = a.tau * cohort.time_unit();
    let (sa, sb) = (source(&a.marker_a), source(&a.marker_b));
    let ca = c_index(&cohort.with_marker_from(&sa)?, mode, tau)?.value;
    let cb = c_index(&cohort.with_marker_from(&sb)?, mode, tau)?.value;
    let b = cindex_difference_ci(&cohort, &sa, &sb, tau, mode, a.nboot, a.seed)?;
    let row = DiffRow {
        marker_a: a.marker_a.clone(),
        marker_b: a.marker_b.clone(),
        tau: a.tau,
        c_a: ca,
        c_b: cb,
        difference: b.point,
        ci_low: finite(b.ci_low),
        ci_high: finite(b.ci_high),
        n_boot: b.n_boot,
        n_defined: b.n_defined,
    };
    println!("c({}) - c({}) = {:.4}{}", a.marker_a, a.marker_b, row.difference, fmt_ci(row.ci_low, row.ci_high));
    let plot = PlotRow { time: a.tau, raw: Some(row.difference), smoothed: None, ci_low: row.ci_low, ci_high: row.ci_high };
    out.table("cindex_diff", &[row])?;
    out.plot("cindex_diff", &[plot])?;
    Ok(())
}

// ---- competing risks -------------------------------------------------------

fn competing_cd(a: &CompetingCdArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.as_deref())?;
    let sample = cohort.baseline_sample();
    let kernel = match a.span {
        Some(s) => KernelSpec::new(s)?,
        None => KernelSpec::default_for_n(sample.len()),
    };
    let roc = cd_accuracy_competing(&sample, a.cause, a.time * cohort.time_unit(), &kernel)?;
    let summary = AucSummary {
        time: a.time,
        estimator: "nne",
        span: Some(kernel.span()),
        auc: roc.auc,
        ci_low: None,
        ci_high: None,
        subjects: sample.len(),
    };
    write_roc(out, "competing_cd", &roc, summary)
}

fn competing_id(a: &CompetingIdArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.as_deref())?;
    let (roc, fit) = id_accuracy_competing(&cohort, a.cause, a.time * cohort.time_unit())?;
    println!("cause {} coefficient: {:.4}", a.cause, fit.coefficients[0]);
    let summary = AucSummary {
        time: a.time,
        estimator: "cox",
        span: None,
        auc: roc.auc,
        ci_low: None,
        ci_high: None,
        subjects: cohort.n_subjects(),
    };
    write_roc(out, "competing_id", &roc, summary)
}

// ---- bootstrap -------------------------------------------------------------

#[derive(Serialize)]
struct BootRow {
    statistic: String,
    point: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    n_boot: usize,
    n_defined: usize,
    unstable: bool,
    seed: u64,
}

#[derive(Serialize)]
struct ReplicateRow {
    replicate: usize,
    value: Option<f64>,
}

fn bootstrap(a: &BootstrapArgs, out: &mut Outputs) -> Result<()> {
    let cohort = load(&a.input, a.marker.marker.as_deref())?;
    let unit = cohort.time_unit();
    let mode: MarkerMode = a.marker.marker_mode.into();
    let name = a.statistic.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let time = || a.time.map(|t| t * unit).ok_or_else(|| Error::InvalidInput(format!("--time is required for {name}")));
    let (statistic, at) = match a.statistic {
        StatisticArg::Cindex => (Statistic::CIndex { tau: a.tau * unit, mode }, a.tau),
        StatisticArg::IdAuc => {
            let smoothing = if a.smooth.cv_bandwidth {
                Smoothing::CrossValidated
            } else {
                Smoothing::Fixed(a.smooth.lambda.unwrap_or(DEFAULT_AUC_SPAN))
            };
            (Statistic::IdAuc { time: time()?, smoothing, mode }, a.time.unwrap_or_default())
        }
        StatisticArg::IdTpr => {
            let span = a.smooth.lambda.unwrap_or(DEFAULT_TPR_SPAN);
            (Statistic::IdTpr { time: time()?, fpf: a.fpf, span, mode }, a.time.unwrap_or_default())
        }
        StatisticArg::CdNne => (
            Statistic::CdAucNne { landmark: a.landmark * unit, window: time()?, span: SpanRule::DefaultForN, mode },
            a.landmark,
        ),
        StatisticArg::CdKm => (Statistic::CdAucKm { t: time()? }, a.time.unwrap_or_default()),
    };
    let b: BootstrapResult = bootstrap_ci(&cohort, &statistic, a.nboot, a.seed)?;
    let row = BootRow {
        statistic: name.clone(),
        point: b.point,
        ci_low: finite(b.ci_low),
        ci_high: finite(b.ci_high),
        n_boot: b.n_boot,
        n_defined: b.n_defined,
        unstable: b.unstable,
        seed: b.seed,
    };
    println!("{} = {:.4}{}", row.statistic, row.point, fmt_ci(row.ci_low, row.ci_high));
    if b.unstable {
        println!("warning: only {} of {} replicates were defined", b.n_defined, b.n_boot);
    }
    let plot = PlotRow { time: at, raw: Some(b.point), smoothed: None, ci_low: row.ci_low, ci_high: row.ci_high };
    out.table("bootstrap", &[row])?;
    let reps: Vec<ReplicateRow> =
        b.replicates.iter().enumerate().map(|(replicate, &value)| ReplicateRow { replicate, value }).collect();
    out.table("bootstrap_replicates", &reps)?;
    out.plot("bootstrap", &[plot])?;
    Ok(())
}

// ---- simulation ------------------------------------------------------------

#[derive(Serialize)]
struct SimRow {
    n: usize,
    events: usize,
    seed: u64,
    time: Option<f64>,
    true_cd_auc: Option<f64>,
}

fn simulate(a: &SimulateArgs, out: &mut Outputs) -> Result<()> {
    let spec = match &a.scenario {
        Some(p) => ScenarioSpec::read(p)?,
        None => {
            let mut s = ScenarioSpec::simple(a.n, a.gamma, a.rate, a.seed);
            if a.censor_rate > 0.0 {
                s.censoring = Censoring::Independent { rate: a.censor_rate };
            }
            s
        }
    };
    let cohort = generate(&spec)?;
    let path = out.path("simulated.csv");
    write_cohort_file(&cohort, &path)?;
    out.record(path);
    let truth = a.time.map(|t| truth_cd_auc(&spec, 0.0, t, a.mc)).transpose()?;
    if let (Some(t), Some(v)) = (a.time, truth) {
        println!("true AUC(0, {t}) = {v:.4}");
    }
    println!("simulated {} subjects, {} events", cohort.n_subjects(), cohort.n_events());
    out.table("simulate", &[SimRow { n: cohort.n_subjects(), events: cohort.n_events(), seed: spec.seed, time: a.time, true_cd_auc: truth }])?;
    let (times, events): (Vec<f64>, Vec<bool>) = cohort
        .subjects()
        .map(|c| (c[c.len() - 1].stop, c[c.len() - 1].status.is_event()))
        .unzip();
    let km = kaplan_meier(&times, &events, None)?;
    let plot: Vec<PlotRow> = std::iter::once(PlotRow::point(0.0, Some(km.initial_value)))
        .chain(km.times.iter().zip(&km.values).map(|(&t, &s)| PlotRow::point(t, Some(s))))
        .collect();
    out.plot("simulate", &plot)?;
    Ok(())
}

// ---- case study ------------------------------------------------------------

fn num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::from)
}

fn estimate_cells(e: &Estimate) -> [Value; 3] {
    [num(e.value), num(e.ci_low), num(e.ci_high)]
}

fn case_study(a: &CaseStudyArgs, out: &mut Outputs) -> Result<()> {
    let p = load_pbc(&a.input, &a.sequential, a.columns.as_deref())?;
    let smoothing = if a.smooth.cv_bandwidth {
        Smoothing::CrossValidated
    } else {
        Smoothing::Fixed(a.smooth.lambda.unwrap_or(DEFAULT_AUC_SPAN))
    };
    let config = CaseStudyConfig {
        cv_seed: a.cv_seed,
        smoothing,
        landmarks: a.landmarks.clone(),
        window: a.window,
        tau: a.tau,
        fpf: a.fpf,
        n_boot: a.nboot,
        boot_seed: a.seed,
        ..CaseStudyConfig::default()
    };
    let cs = run_case_study(&p.cohort, &config)?;
    // published values only line up with the default landmarks
    let standard = config.landmarks == [1.0, 4.0, 6.0];

    let lm: Vec<String> = config.landmarks.iter().map(|s| s.to_string()).collect();
    let mut header: Vec<String> = vec!["model".into(), "scores".into(), "span".into(), "cv_span".into()];
    for (kind, _) in [("id_auc", ()), ("cd_auc", ())] {
        for s in &lm {
            header.extend([format!("{kind}_{s}"), format!("{kind}_{s}_low"), format!("{kind}_{s}_high"), format!("{kind}_{s}_reference")]);
        }
        if kind == "id_auc" {
            header.extend(["c_index", "c_index_low", "c_index_high", "c_index_reference"].map(String::from));
        }
    }
    header.push("unstable".into());

    let mut table = Vec::new();
    let mut sensitivity = Vec::new();
    for row in &cs.rows {
        let reference = if standard { reference_row(row.model, row.scores) } else { None };
        let mut cells = vec![
            Value::from(model_label(row.model)),
            Value::from(mode_label(row.scores)),
            Value::from(row.span),
            Value::from(row.cv_span),
        ];
        for (k, e) in row.id_auc.iter().enumerate() {
            cells.extend(estimate_cells(e));
            cells.push(num(reference.map(|r| r.id_auc[k])));
        }
        cells.extend(estimate_cells(&row.c_index));
        cells.push(num(reference.map(|r| r.c_index)));
        for (k, e) in row.cd_auc.iter().enumerate() {
            cells.extend(estimate_cells(e));
            cells.push(num(reference.map(|r| r.cd_auc[k])));
        }
        let unstable = row.id_auc.iter().chain(&row.cd_auc).chain([&row.c_index]).any(|e| e.unstable);
        cells.push(Value::from(unstable));
        table.push(cells);

        for s in &row.sensitivity {
            let mut cells = vec![Value::from(model_label(row.model)), Value::from(mode_label(row.scores)), Value::from(s.span)];
            cells.extend(s.id_auc.iter().map(|&v| num(v)));
            sensitivity.push(cells);
        }

        let tag = format!("{}_{}", if row.model == ModelId::FourCovariate { "four" } else { "five" }, mode_label(row.scores));
        let band = |e: &AccuracySeries| -> Vec<PlotRow> {
            let mut rows = series_rows(e, 1.0);
            for (r, p) in rows.iter_mut().zip(&e.points) {
                if let (Some(s), Some(v)) = (p.smoothed, p.variance) {
                    r.ci_low = Some(s - 1.96 * v.sqrt());
                    r.ci_high = Some(s + 1.96 * v.sqrt());
                }
            }
            rows
        };
        out.plot(&format!("id_auc_{tag}"), &band(&row.auc_series))?;
        out.plot(&format!("id_tpr_{tag}"), &band(&row.tpr_series))?;
        let cd: Vec<PlotRow> = config
            .landmarks
            .iter()
            .zip(&row.cd_auc)
            .map(|(&s, e)| PlotRow { time: s, raw: e.value, smoothed: None, ci_low: e.ci_low, ci_high: e.ci_high })
            .collect();
        out.plot(&format!("cd_auc_{tag}"), &cd)?;
    }
    out.records("table3", &header, &table)?;

    let mut sens_header: Vec<String> = vec!["model".into(), "scores".into(), "span".into()];
    sens_header.extend(lm.iter().map(|s| format!("id_auc_{s}")));
    out.records("span_sensitivity", &sens_header, &sensitivity)?;
    out.table("coefficients", &cs.coefficients)?;

    let d = &cs.cindex_difference;
    let diff_header: Vec<String> =
        ["comparison", "difference", "ci_low", "ci_high", "reference"].map(String::from).to_vec();
    let diff_row = vec![
        Value::from("5-cov minus 4-cov, baseline scores"),
        num(d.value),
        num(d.ci_low),
        num(d.ci_high),
        Value::from(REFERENCE_CINDEX_DIFFERENCE),
    ];
    out.records("cindex_difference", &diff_header, &[diff_row])?;

    print_summary(&cs, standard);
    Ok(())
}

fn print_summary(cs: &tdroc::case_study::CaseStudy, standard: bool) {
    let lm = &cs.config.landmarks;
    println!("{} subjects, {} deaths", cs.subjects, cs.events);
    let span = match cs.config.smoothing {
        Smoothing::Fixed(s) => format!("span {s}"),
        Smoothing::CrossValidated => "cross-validated span".to_string(),
    };
    println!("incident AUC with {span}; bootstrap replicates: {}", cs.config.n_boot);
    println!("values shown as estimate [reference]");
    let head: Vec<String> = lm.iter().map(|s| format!("ID {s}")).chain(["C".to_string()]).chain(lm.iter().map(|s| format!("CD {s}"))).collect();
    println!("{:<6} {:<9} {}", "model", "scores", head.iter().map(|h| format!("{h:<14}")).collect::<String>());
    for row in &cs.rows {
        let reference = if standard { reference_row(row.model, row.scores) } else { None };
        let cell = |v: Option<f64>, r: Option<f64>| match r {
            Some(r) => format!("{} [{r:.2}]", fmt_opt(v)),
            None => fmt_opt(v),
        };
        let mut cells: Vec<String> =
            row.id_auc.iter().enumerate().map(|(k, e)| cell(e.value, reference.map(|r| r.id_auc[k]))).collect();
        cells.push(cell(row.c_index.value, reference.map(|r| r.c_index)));
        cells.extend(row.cd_auc.iter().enumerate().map(|(k, e)| cell(e.value, reference.map(|r| r.cd_auc[k]))));
        println!(
            "{:<6} {:<9} {}",
            model_label(row.model),
            mode_label(row.scores),
            cells.iter().map(|c| format!("{c:<14}")).collect::<String>()
        );
    }
    let d = &cs.cindex_difference;
    println!(
        "c-index difference (5-cov minus 4-cov, baseline): {}{} [{REFERENCE_CINDEX_DIFFERENCE:.2}]",
        fmt_opt(d.value),
        fmt_ci(d.ci_low, d.ci_high)
    );
}
