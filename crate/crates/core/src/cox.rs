//! Cox proportional-hazards regression on `(start, stop]` data.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Cohort;
use crate::error::{Error, Result};

/// Name of the pseudo-covariate that reads an interval's marker.
pub const MARKER_TERM: &str = "marker";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Transform {
    Identity,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Term {
    pub covariate: String,
    pub transform: Transform,
}

impl Term {
    pub fn identity(covariate: &str) -> Term {
        Term { covariate: covariate.to_string(), transform: Transform::Identity }
    }

    pub fn log(covariate: &str) -> Term {
        Term { covariate: covariate.to_string(), transform: Transform::Log }
    }

    /// Parses `name` or `log(name)`.
    pub fn parse(text: &str) -> Result<Term> {
        let text = text.trim();
        if let Some(inner) = text.strip_prefix("log(").and_then(|r| r.strip_suffix(')')) {
            let inner = inner.trim();
            if inner.is_empty() {
                return Err(Error::invalid(format!("empty covariate in term '{text}'")));
            }
            return Ok(Term::log(inner));
        }
        if text.is_empty() || text.contains(['(', ')']) {
            return Err(Error::invalid(format!("cannot parse model term '{text}'")));
        }
        Ok(Term::identity(text))
    }

    fn apply(&self, x: f64) -> Option<f64> {
        match self.transform {
            Transform::Identity => x.is_finite().then_some(x),
            Transform::Log => (x > 0.0 && x.is_finite()).then(|| x.ln()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.transform {
            Transform::Identity => write!(f, "{}", self.covariate),
            Transform::Log => write!(f, "log({})", self.covariate),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModelId {
    FiveCovariate,
    FourCovariate,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub terms: Vec<Term>,
}

impl ModelSpec {
    /// log(bili), albumin, log(protime), edema, age.
    pub fn five_covariate() -> ModelSpec {
        ModelSpec {
            id: ModelId::FiveCovariate,
            terms: vec![
                Term::log("bili"),
                Term::identity("albumin"),
                Term::log("protime"),
                Term::identity("edema"),
                Term::identity("age"),
            ],
        }
    }

    /// The five-covariate model without bilirubin.
    pub fn four_covariate() -> ModelSpec {
        ModelSpec {
            id: ModelId::FourCovariate,
            terms: vec![
                Term::identity("albumin"),
                Term::log("protime"),
                Term::identity("edema"),
                Term::identity("age"),
            ],
        }
    }

    pub fn marker_only() -> ModelSpec {
        ModelSpec { id: ModelId::Custom, terms: vec![Term::identity(MARKER_TERM)] }
    }

    pub fn custom(terms: Vec<Term>) -> Result<ModelSpec> {
        if terms.is_empty() {
            return Err(Error::invalid("model has no terms"));
        }
        Ok(ModelSpec { id: ModelId::Custom, terms })
    }

    pub fn by_name(name: &str) -> Option<ModelSpec> {
        match name {
            "five_covariate" => Some(Self::five_covariate()),
            "four_covariate" => Some(Self::four_covariate()),
            _ => None,
        }
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.to_string()).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum TieMethod {
    #[default]
    Efron,
    Breslow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoxOptions {
    pub ties: TieMethod,
    pub max_iter: usize,
    /// Convergence when the sup-norm of the score falls below this.
    pub tol: f64,
}

impl Default for CoxOptions {
    fn default() -> Self {
        CoxOptions { ties: TieMethod::Efron, max_iter: 50, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoxFit {
    pub spec: ModelSpec,
    pub term_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Inverse information at the estimate.
    pub variance: Vec<Vec<f64>>,
    /// Training means of each term; predictions are centred here.
    pub means: Vec<f64>,
    pub log_partial_likelihood: f64,
    pub null_log_likelihood: f64,
    /// Log partial likelihood after each accepted iterate, starting at zero.
    pub loglik_trace: Vec<f64>,
    pub score_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ties: TieMethod,
    pub n_events: usize,
}

impl CoxFit {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.term_names.iter().position(|n| n == term).map(|k| self.coefficients[k])
    }

    /// Centred linear predictor for raw term values (already transformed).
    fn centred_lp(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.means).zip(&self.coefficients).map(|((x, m), b)| (x - m) * b).sum()
    }

    /// `exp(sum_j (x_j - mean_j) beta_j)` for named raw covariate values.
    pub fn predict_risk(&self, covariates: &HashMap<String, f64>) -> Result<f64> {
        let mut row = Vec::with_capacity(self.spec.terms.len());
        for term in &self.spec.terms {
            let raw = covariates
                .get(&term.covariate)
                .ok_or_else(|| Error::invalid(format!("covariate '{}' missing for prediction", term.covariate)))?;
            row.push(
                term.apply(*raw)
                    .ok_or_else(|| Error::invalid(format!("invalid value {raw} for term {term}")))?,
            );
        }
        Ok(self.centred_lp(&row).exp())
    }

    /// Risk score for every interval of `cohort`.
    pub fn predict_intervals(&self, cohort: &Cohort) -> Result<Vec<f64>> {
        let x = design(cohort, &self.spec)?;
        Ok(x.iter().map(|row| self.centred_lp(row).exp()).collect())
    }
}

/// Raw (uncentred, transformed) design matrix, one row per interval.
pub fn design(cohort: &Cohort, spec: &ModelSpec) -> Result<Vec<Vec<f64>>> {
    let columns: Vec<Option<usize>> = spec
        .terms
        .iter()
        .map(|t| {
            if t.covariate == MARKER_TERM {
                Ok(None)
            } else {
                cohort
                    .covariate_index(&t.covariate)
                    .map(Some)
                    .ok_or_else(|| Error::invalid(format!("cohort has no covariate '{}'", t.covariate)))
            }
        })
        .collect::<Result<_>>()?;
    cohort
        .intervals()
        .iter()
        .map(|iv| {
            spec.terms
                .iter()
                .zip(&columns)
                .map(|(term, col)| {
                    let raw = match col {
                        Some(c) => iv.covariates[*c],
                        None => iv.marker,
                    };
                    term.apply(raw).ok_or_else(|| {
                        Error::invalid(format!(
                            "subject {} interval ({}, {}]: invalid value {raw} for term {term}",
                            iv.subject, iv.start, iv.stop
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

/// Centred design with the orderings needed by the risk-set sweep.
struct CoxData {
    x: Vec<Vec<f64>>,
    start: Vec<f64>,
    stop: Vec<f64>,
    event: Vec<bool>,
    by_stop: Vec<usize>,
    by_start: Vec<usize>,
    p: usize,
}

impl CoxData {
    fn new(cohort: &Cohort, x: Vec<Vec<f64>>, means: &[f64]) -> CoxData {
        let p = means.len();
        let x = x.into_iter().map(|row| row.iter().zip(means).map(|(v, m)| v - m).collect()).collect();
        let iv = cohort.intervals();
        let start: Vec<f64> = iv.iter().map(|i| i.start).collect();
        let stop: Vec<f64> = iv.iter().map(|i| i.stop).collect();
        let event: Vec<bool> = iv.iter().map(|i| i.status.is_event()).collect();
        let mut by_stop: Vec<usize> = (0..iv.len()).collect();
        by_stop.sort_by(|&a, &b| stop[b].total_cmp(&stop[a]));
        let mut by_start: Vec<usize> = (0..iv.len()).collect();
        by_start.sort_by(|&a, &b| start[b].total_cmp(&start[a]));
        CoxData { x, start, stop, event, by_stop, by_start, p }
    }

    /// Log partial likelihood, score and information at `beta`.
    fn evaluate(&self, beta: &[f64], ties: TieMethod) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let p = self.p;
        let eta: Vec<f64> = self.x.iter().map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
        let w: Vec<f64> = eta.iter().map(|e| e.exp()).collect();

        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![vec![0.0; p]; p];
        let mut members = 0usize;
        let mut loglik = 0.0;
        let mut score = vec![0.0; p];
        let mut info = vec![vec![0.0; p]; p];

        let n = self.x.len();
        let (mut ia, mut ir) = (0, 0);
        let mut deaths = Vec::new();
        while ia < n {
            // next event time at or below the current add pointer
            let mut t = None;
            while ia < n {
                let i = self.by_stop[ia];
                if self.event[i] {
                    t = Some(self.stop[i]);
                    break;
                }
                add(&mut s0, &mut s1, &mut s2, &self.x[i], w[i], 1.0);
                members += 1;
                ia += 1;
            }
            let Some(t) = t else { break };
            deaths.clear();
            while ia < n && self.stop[self.by_stop[ia]] >= t {
                let i = self.by_stop[ia];
                add(&mut s0, &mut s1, &mut s2, &self.x[i], w[i], 1.0);
                members += 1;
                if self.event[i] && self.stop[i] == t {
                    deaths.push(i);
                }
                ia += 1;
            }
            while ir < n && self.start[self.by_start[ir]] >= t {
                let i = self.by_start[ir];
                add(&mut s0, &mut s1, &mut s2, &self.x[i], w[i], -1.0);
                members -= 1;
                ir += 1;
            }
            if members == 0 {
                s0 = 0.0;
                s1.iter_mut().for_each(|v| *v = 0.0);
                s2.iter_mut().flatten().for_each(|v| *v = 0.0);
            }

            let d = deaths.len();
            let mut d0 = 0.0;
            let mut d1 = vec![0.0; p];
            let mut d2 = vec![vec![0.0; p]; p];
            for &i in &deaths {
                loglik += eta[i];
                for a in 0..p {
                    score[a] += self.x[i][a];
                }
                add(&mut d0, &mut d1, &mut d2, &self.x[i], w[i], 1.0);
            }
            for l in 0..d {
                let frac = match ties {
                    TieMethod::Efron => l as f64 / d as f64,
                    TieMethod::Breslow => 0.0,
                };
                let den = s0 - frac * d0;
                loglik -= den.ln();
                let mean: Vec<f64> = (0..p).map(|a| (s1[a] - frac * d1[a]) / den).collect();
                for a in 0..p {
                    score[a] -= mean[a];
                    for b in 0..p {
                        info[a][b] += (s2[a][b] - frac * d2[a][b]) / den - mean[a] * mean[b];
                    }
                }
            }
        }
        (loglik, score, info)
    }
}

fn add(s0: &mut f64, s1: &mut [f64], s2: &mut [Vec<f64>], x: &[f64], w: f64, sign: f64) {
    let sw = sign * w;
    *s0 += sw;
    for a in 0..x.len() {
        s1[a] += sw * x[a];
        for b in 0..x.len() {
            s2[a][b] += sw * x[a] * x[b];
        }
    }
}

/// Lower-triangular Cholesky factor. On failure returns the index of the
/// first non-positive pivot.
fn cholesky(a: &[Vec<f64>]) -> std::result::Result<Vec<Vec<f64>>, usize> {
    let p = a.len();
    let scale = (0..p).map(|k| a[k][k].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= l[j][k] * l[j][k];
        }
        if diag <= 1e-10 * scale {
            return Err(j);
        }
        l[j][j] = diag.sqrt();
        for i in j + 1..p {
            let mut v = a[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = v / l[j][j];
        }
    }
    Ok(l)
}

fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let p = l.len();
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i][k] * y[k];
        }
        y[i] = v / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut v = y[i];
        for k in i + 1..p {
            v -= l[k][i] * x[k];
        }
        x[i] = v / l[i][i];
    }
    x
}

fn chol_inverse(l: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = l.len();
    let mut inv = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        for i in 0..p {
            inv[i][j] = col[i];
        }
    }
    inv
}

/// Names the terms involved in the linear dependency found at `pivot`.
fn collinear_terms(info: &[Vec<f64>], pivot: usize, names: &[String]) -> Vec<String> {
    if pivot == 0 {
        return vec![names[0].clone()];
    }
    let sub: Vec<Vec<f64>> = (0..pivot).map(|i| info[i][..pivot].to_vec()).collect();
    let mut out = Vec::new();
    if let Ok(l) = cholesky(&sub) {
        let rhs: Vec<f64> = (0..pivot).map(|i| info[i][pivot]).collect();
        let coef = chol_solve(&l, &rhs);
        let size = coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for (k, c) in coef.iter().enumerate() {
            if c.abs() > 1e-6 * size.max(1e-12) {
                out.push(names[k].clone());
            }
        }
    }
    out.push(names[pivot].clone());
    out
}

fn singular(info: &[Vec<f64>], pivot: usize, names: &[String]) -> Error {
    let terms = collinear_terms(info, pivot, names);
    Error::Singular(format!("information matrix is singular; collinear terms: {}", terms.join(", ")))
}

fn column_means(x: &[Vec<f64>], p: usize) -> Vec<f64> {
    let n = x.len().max(1) as f64;
    let mut m = vec![0.0; p];
    for row in x {
        for (a, v) in row.iter().enumerate() {
            m[a] += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n);
    m
}

pub fn fit_cox(cohort: &Cohort, spec: &ModelSpec) -> Result<CoxFit> {
    fit_cox_with(cohort, spec, &CoxOptions::default())
}

/// Newton-Raphson with step halving on the log partial likelihood.
/// Returns `converged = false` (not an error) when the iteration budget runs
/// out.
pub fn fit_cox_with(cohort: &Cohort, spec: &ModelSpec, options: &CoxOptions) -> Result<CoxFit> {
    if spec.terms.is_empty() {
        return Err(Error::invalid("model has no terms"));
    }
    let n_events = cohort.n_events();
    if n_events == 0 {
        return Err(Error::degenerate("no events to fit a Cox model"));
    }
    let p = spec.terms.len();
    let names = spec.term_names();
    let raw = design(cohort, spec)?;
    let means = column_means(&raw, p);
    let data = CoxData::new(cohort, raw, &means);

    let mut beta = vec![0.0; p];
    let (mut ll, mut score, mut info) = data.evaluate(&beta, options.ties);
    let null_ll = ll;
    let mut trace = vec![ll];
    let mut iterations = 0;
    let sup = |u: &[f64]| u.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    while sup(&score) >= options.tol && iterations < options.max_iter {
        let l = cholesky(&info).map_err(|k| singular(&info, k, &names))?;
        let step = chol_solve(&l, &score);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let eval = data.evaluate(&cand, options.ties);
            if eval.0.is_finite() && eval.0 >= ll {
                accepted = Some((cand, eval));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, (ll_new, u_new, i_new))) = accepted else { break };
        beta = cand;
        ll = ll_new;
        score = u_new;
        info = i_new;
        trace.push(ll);
        iterations += 1;
    }

    let l = cholesky(&info).map_err(|k| singular(&info, k, &names))?;
    let variance = chol_inverse(&l);
    let std_errors = (0..p).map(|k| variance[k][k].max(0.0).sqrt()).collect();
    let score_norm = sup(&score);
    Ok(CoxFit {
        spec: spec.clone(),
        term_names: names,
        coefficients: beta,
        std_errors,
        variance,
        means,
        log_partial_likelihood: ll,
        null_log_likelihood: null_ll,
        loglik_trace: trace,
        score_norm,
        iterations,
        converged: score_norm < options.tol,
        ties: options.ties,
        n_events,
    })
}

/// Log partial likelihood and score at an arbitrary coefficient vector
/// (covariates centred at the cohort means, which does not change either).
pub fn log_partial_likelihood(
    cohort: &Cohort,
    spec: &ModelSpec,
    beta: &[f64],
    ties: TieMethod,
) -> Result<(f64, Vec<f64>)> {
    if beta.len() != spec.terms.len() {
        return Err(Error::invalid(format!("{} coefficients for {} terms", beta.len(), spec.terms.len())));
    }
    let raw = design(cohort, spec)?;
    let means = column_means(&raw, spec.terms.len());
    let data = CoxData::new(cohort, raw, &means);
    let (ll, u, _) = data.evaluate(beta, ties);
    Ok((ll, u))
}

/// Fold labels `0..k` for `n` subjects. Labels are drawn uniformly and
/// redrawn while any fold is empty; after 1000 failed draws a shuffled
/// balanced assignment is used instead.
pub fn kfold_assign(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&f| sizes[f] += 1);
        if sizes.iter().all(|&s| s > 0) {
            return Ok(labels);
        }
    }
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut rng);
    Ok(labels)
}

/// Cross-validated risk scores, one per subject in cohort order: each
/// subject is scored by the model fitted on the other folds. Uses each
/// subject's first interval.
pub fn kfold_cv_scores(baseline: &Cohort, spec: &ModelSpec, k: usize, seed: u64) -> Result<Vec<f64>> {
    let base = baseline.baseline_view();
    let n = base.n_subjects();
    let folds = kfold_assign(n, k, seed)?;
    let per_fold: Vec<Result<Vec<(usize, f64)>>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let train_cohort = base.select_subjects(&train);
            if train_cohort.n_events() == 0 {
                return Err(Error::degenerate(format!("training split for fold {f} has no events")));
            }
            let fit = fit_cox(&train_cohort, spec)?;
            let test_cohort = base.select_subjects(&test);
            let scores = fit.predict_intervals(&test_cohort)?;
            Ok(test.into_iter().zip(scores).collect())
        })
        .collect();
    let mut out = vec![f64::NAN; n];
    for fold in per_fold {
        for (i, s) in fold? {
            out[i] = s;
        }
    }
    Ok(out)
}

/// Cohort whose markers are the risk scores of `fit` evaluated on each
/// interval's current covariates.
pub fn time_varying_scores(cohort: &Cohort, fit: &CoxFit) -> Result<Cohort> {
    if !fit.converged {
        return Err(Error::degenerate("Cox fit did not converge"));
    }
    let scores = fit.predict_intervals(cohort)?;
    cohort.with_markers(scores)
}
