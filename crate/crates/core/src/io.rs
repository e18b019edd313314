//! CSV ingestion and output, column mappings and key/value config files.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::counting::{
    build_counting_process, correct_baseline_from_day0, BaselineRecord, BaselineTable, BuildReport,
    LongitudinalTable, Measurement,
};
use crate::cox::{ModelSpec, Term};
use crate::data::{transplant_censor, Cohort, ObservationInterval, Status, SubjectId, DAYS_PER_YEAR};
use crate::error::{Error, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// keys may repeat.
pub fn parse_key_values(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                location: format!("{source}:{}", k + 1),
                message: format!("expected `key = value`, got '{line}'"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Parse { location: format!("{source}:{}", k + 1), message: "empty key".into() });
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Model spec file: one `term = <covariate>` or `term = log(<covariate>)`
/// line per term.
pub fn parse_model_spec(text: &str, source: &str) -> Result<ModelSpec> {
    let mut terms = Vec::new();
    for (key, value) in parse_key_values(text, source)? {
        match key.as_str() {
            "term" => terms.push(Term::parse(&value)?),
            "name" => {}
            other => {
                return Err(Error::Parse { location: source.to_string(), message: format!("unknown key '{other}'") })
            }
        }
    }
    ModelSpec::custom(terms)
}

pub fn read_model_spec(path: &Path) -> Result<ModelSpec> {
    parse_model_spec(&fs::read_to_string(path)?, &path.display().to_string())
}

/// Maps canonical column names to the names used in a file. Unmapped names
/// are used as is.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColumnMap {
    map: HashMap<String, String>,
}

impl ColumnMap {
    pub fn parse(text: &str, source: &str) -> Result<ColumnMap> {
        Ok(ColumnMap { map: parse_key_values(text, source)?.into_iter().collect() })
    }

    pub fn read(path: &Path) -> Result<ColumnMap> {
        ColumnMap::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn resolve<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.map.get(canonical).map(String::as_str).unwrap_or(canonical)
    }
}

/// Covariates read from the PBC baseline file.
pub const PBC_BASELINE_COVARIATES: &[&str] =
    &["trt", "age", "ascites", "hepato", "spiders", "edema", "bili", "chol", "albumin", "alk.phos", "ast", "platelet", "protime", "stage"];

/// Time-varying labs read from the PBC sequential file (age is carried so
/// the day-0 correction can compare it).
pub const PBC_SEQUENTIAL_COVARIATES: &[&str] =
    &["age", "ascites", "hepato", "spiders", "edema", "bili", "chol", "albumin", "alk.phos", "ast", "platelet", "protime", "stage"];

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

fn parse_number(field: &str, location: impl FnOnce() -> String) -> Result<Option<f64>> {
    if is_missing(field) {
        return Ok(None);
    }
    field
        .trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse { location: location(), message: format!("'{field}' is not a number") })
}

fn parse_integer(field: &str, location: impl FnOnce() -> String) -> Result<i64> {
    let loc = location();
    let v = parse_number(field, || loc.clone())?
        .ok_or_else(|| Error::Parse { location: loc.clone(), message: "missing value".into() })?;
    if v.fract() != 0.0 {
        return Err(Error::Parse { location: loc, message: format!("'{field}' is not an integer code") });
    }
    Ok(v as i64)
}

struct Header {
    index: HashMap<String, usize>,
    source: String,
}

impl Header {
    fn new(headers: &csv::StringRecord, source: &str) -> Header {
        let index = headers.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
        Header { index, source: source.to_string() }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::Schema {
            column: name.to_string(),
            problem: format!("not found in {}", self.source),
        })
    }
}

fn reader_from_text(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

/// Reads a PBC-style baseline table. Status uses the transplant coding
/// (0 censored, 1 transplant, 2 death); transplant is censored.
pub fn read_pbc_baseline(text: &str, source: &str, columns: &ColumnMap, covariates: &[&str]) -> Result<BaselineTable> {
    let mut rdr = reader_from_text(text);
    let header = Header::new(rdr.headers()?, source);
    let id = header.require(columns.resolve("id"))?;
    let time = header.require(columns.resolve("time"))?;
    let status = header.require(columns.resolve("status"))?;
    let cov: Vec<usize> = covariates.iter().map(|c| header.require(columns.resolve(c))).collect::<Result<_>>()?;
    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let loc = |col: &str| format!("{source}:{line} column {col}");
        let follow_up = parse_number(&row[time], || loc("time"))?
            .ok_or_else(|| Error::Parse { location: loc("time"), message: "missing follow-up time".into() })?;
        let code = parse_integer(&row[status], || loc("status"))?;
        let status = transplant_censor(code).map_err(|e| Error::Parse { location: loc("status"), message: e.to_string() })?;
        let values = cov
            .iter()
            .zip(covariates)
            .map(|(&j, name)| parse_number(&row[j], || loc(name)))
            .collect::<Result<_>>()?;
        records.push(BaselineRecord { subject: SubjectId::new(row[id].trim()), follow_up, status, values });
    }
    Ok(BaselineTable { covariate_names: covariates.iter().map(|s| s.to_string()).collect(), records })
}

/// Reads a PBC-style sequential table with a measurement-day column. An
/// empty file yields an empty table.
pub fn read_pbc_sequential(
    text: &str,
    source: &str,
    columns: &ColumnMap,
    covariates: &[&str],
) -> Result<LongitudinalTable> {
    let names: Vec<String> = covariates.iter().map(|s| s.to_string()).collect();
    if text.trim().is_empty() {
        return Ok(LongitudinalTable { covariate_names: names, rows: Vec::new() });
    }
    let mut rdr = reader_from_text(text);
    let header = Header::new(rdr.headers()?, source);
    let id = header.require(columns.resolve("id"))?;
    let day = header.require(columns.resolve("day"))?;
    let cov: Vec<usize> = covariates.iter().map(|c| header.require(columns.resolve(c))).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let loc = |col: &str| format!("{source}:{line} column {col}");
        let d = parse_number(&row[day], || loc("day"))?
            .ok_or_else(|| Error::Parse { location: loc("day"), message: "missing measurement day".into() })?;
        let values = cov
            .iter()
            .zip(covariates)
            .map(|(&j, name)| parse_number(&row[j], || loc(name)))
            .collect::<Result<_>>()?;
        rows.push(Measurement { subject: SubjectId::new(row[id].trim()), day: d, values });
    }
    Ok(LongitudinalTable { covariate_names: names, rows })
}

/// Result of the PBC preparation pipeline.
#[derive(Clone, Debug)]
pub struct PreparedPbc {
    pub cohort: Cohort,
    pub report: BuildReport,
    /// Baseline values overwritten by the day-0 sequential value, per column.
    pub corrections: Vec<(String, usize)>,
    /// Baseline subjects dropped because they were not randomized.
    pub excluded_subjects: usize,
}

/// Baseline + sequential PBC files to a counting-process cohort (time unit
/// days, display unit years). Only randomized subjects (non-missing `trt`)
/// are kept; baseline protime and age are replaced by the day-0 sequential
/// value when they disagree.
pub fn prepare_pbc(baseline_text: &str, sequential_text: &str, columns: &ColumnMap) -> Result<PreparedPbc> {
    let mut baseline = read_pbc_baseline(baseline_text, "baseline file", columns, PBC_BASELINE_COVARIATES)?;
    let sequential = read_pbc_sequential(sequential_text, "sequential file", columns, PBC_SEQUENTIAL_COVARIATES)?;
    let trt = baseline.covariate_names.iter().position(|n| n == "trt").expect("trt is a baseline covariate");
    let before = baseline.records.len();
    baseline.records.retain(|r| r.values[trt].is_some());
    let excluded_subjects = before - baseline.records.len();
    let corrections = correct_baseline_from_day0(&mut baseline, &sequential, &["protime", "age"])?;
    let (cohort, report) = build_counting_process(&baseline, &sequential)?;
    let cohort = cohort.with_time_unit(DAYS_PER_YEAR)?;
    Ok(PreparedPbc { cohort, report, corrections, excluded_subjects })
}

pub fn prepare_pbc_files(baseline: &Path, sequential: &Path, columns: &ColumnMap) -> Result<PreparedPbc> {
    let b = fs::read_to_string(baseline)?;
    let s = fs::read_to_string(sequential)?;
    prepare_pbc(&b, &s, columns)
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes `id,start,stop,status,marker,<covariates>` preceded by a
/// `# time_unit = <days per display unit>` comment.
pub fn write_cohort<W: Write>(cohort: &Cohort, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "# time_unit = {}", cohort.time_unit())?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "start".into(), "stop".into(), "status".into(), "marker".into()];
    header.extend(cohort.covariate_names().iter().cloned());
    w.write_record(&header)?;
    for iv in cohort.intervals() {
        let mut rec = vec![iv.subject.0.clone(), fmt_value(iv.start), fmt_value(iv.stop), iv.status.code().to_string(), fmt_value(iv.marker)];
        rec.extend(iv.covariates.iter().map(|&v| fmt_value(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cohort_file(cohort: &Cohort, path: &Path) -> Result<()> {
    write_cohort(cohort, fs::File::create(path)?)
}

/// Reads the cohort format written by [`write_cohort`]. Without a
/// `time_unit` comment the unit defaults to one.
pub fn read_cohort_text(text: &str, source: &str) -> Result<Cohort> {
    let mut time_unit = 1.0;
    for line in text.lines().take_while(|l| l.trim_start().starts_with('#')) {
        let body = line.trim_start().trim_start_matches('#');
        if let Some((k, v)) = body.split_once('=') {
            if k.trim() == "time_unit" {
                time_unit = v.trim().parse().map_err(|_| Error::Parse {
                    location: source.to_string(),
                    message: format!("bad time_unit '{}'", v.trim()),
                })?;
            }
        }
    }
    let mut rdr = reader_from_text(text);
    let header = Header::new(rdr.headers()?, source);
    let fixed = ["id", "start", "stop", "status", "marker"];
    let idx: Vec<usize> = fixed.iter().map(|c| header.require(c)).collect::<Result<_>>()?;
    let covariate_names: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .filter(|h| !fixed.contains(&h.as_str()))
        .collect();
    let cov_idx: Vec<usize> = covariate_names.iter().map(|c| header.require(c)).collect::<Result<_>>()?;
    let mut intervals = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let loc = |col: &str| format!("{source}: data row {line} column {col}");
        let num = |j: usize, col: &str| -> Result<f64> {
            parse_number(&row[j], || loc(col))?
                .ok_or_else(|| Error::Parse { location: loc(col), message: "missing value".into() })
        };
        let code = parse_integer(&row[idx[3]], || loc("status"))?;
        intervals.push(ObservationInterval {
            subject: SubjectId::new(row[idx[0]].trim()),
            start: num(idx[1], "start")?,
            stop: num(idx[2], "stop")?,
            status: Status::from_code(code).map_err(|e| Error::Parse { location: loc("status"), message: e.to_string() })?,
            marker: parse_number(&row[idx[4]], || loc("marker"))?.unwrap_or(f64::NAN),
            covariates: cov_idx
                .iter()
                .zip(&covariate_names)
                .map(|(&j, c)| parse_number(&row[j], || loc(c)).map(|v| v.unwrap_or(f64::NAN)))
                .collect::<Result<_>>()?,
        });
    }
    Cohort::new(intervals, covariate_names, time_unit)
}

pub fn read_cohort_file(path: &Path) -> Result<Cohort> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    read_cohort_text(&text, &path.display().to_string())
}
