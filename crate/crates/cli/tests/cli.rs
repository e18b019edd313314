//! End-to-end runs of the `tdroc` binary on the bundled PBC tables and on
//! simulated cohorts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn tdroc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdroc"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = tdroc(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Reads a CSV file into its header and rows of optional numbers.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| if c.is_empty() { None } else { c.parse().ok() }).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<Option<f64>> {
    let (header, rows) = read_table(path);
    let j = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.into_iter().map(|r| r[j]).collect()
}

fn prepared(dir: &Path) -> PathBuf {
    ok(dir, &["prepare-pbc", "--input", s(&data("pbc.csv")), "--sequential", s(&data("pbcseq.csv"))]);
    dir.join("cohort.csv")
}

#[test]
fn prepare_pbc_reports_counts() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["prepare-pbc", "--input", s(&data("pbc.csv")), "--sequential", s(&data("pbcseq.csv"))]);
    assert!(stdout.contains("subjects: 312"));
    assert!(stdout.contains("events: 125"));
    assert!(stdout.contains("records: 1945"));
    let (header, rows) = read_table(&dir.path().join("prepare_pbc.csv"));
    assert_eq!(&header[..3], ["subjects", "events", "records"]);
    assert_eq!(&rows[0][..3], [Some(312.0), Some(125.0), Some(1945.0)]);
    assert!(dir.path().join("cohort.csv").is_file());
}

#[test]
fn empty_sequential_file_gives_one_record_per_subject() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    ok(dir.path(), &["prepare-pbc", "--input", s(&data("pbc.csv")), "--sequential", s(&empty)]);
    let p = dir.path().join("prepare_pbc.csv");
    assert_eq!(column(&p, "records"), column(&p, "subjects"));
}

#[test]
fn corrupted_column_is_named() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(data("pbc.csv")).unwrap();
    let (head, rest) = text.split_once('\n').unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, format!("{}\n{rest}", head.replace("albumin", "albumen"))).unwrap();
    let o = tdroc(dir.path(), &["prepare-pbc", "--input", s(&bad), "--sequential", s(&data("pbcseq.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("albumin"));
}

#[test]
fn exit_codes_separate_input_and_estimation_errors() {
    let dir = TempDir::new().unwrap();
    let missing = tdroc(dir.path(), &["km", "--input", s(&dir.path().join("nope.csv"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));
    let bad_flag = tdroc(dir.path(), &["cd-roc", "--input", "x", "--time", "soon"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    ok(dir.path(), &["simulate", "--n", "50", "--seed", "4"]);
    let sim = dir.path().join("simulated.csv");
    let beyond = tdroc(dir.path(), &["cd-roc", "--input", s(&sim), "--time", "1000", "--estimator", "km"]);
    assert_eq!(beyond.status.code(), Some(3));
}

#[test]
fn null_simulation_round_trip() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--n", "2000", "--gamma", "0", "--seed", "3"]);
    let sim = dir.path().join("simulated.csv");
    for estimator in ["km", "nne"] {
        ok(dir.path(), &["cd-roc", "--input", s(&sim), "--time", "0.5", "--estimator", estimator]);
        let auc = column(&dir.path().join("cd_roc_summary.csv"), "auc")[0].unwrap();
        assert!((auc - 0.5).abs() < 0.02, "{estimator}: {auc}");
    }
}

#[test]
fn id_auc_plot_at_one_year() {
    let dir = TempDir::new().unwrap();
    let cohort = prepared(dir.path());
    ok(dir.path(), &["cv-scores", "--input", s(&cohort), "--model", "five_covariate"]);
    ok(dir.path(), &["id-auc", "--input", s(&dir.path().join("scored.csv")), "--lambda", "0.2"]);
    let plot = dir.path().join("id_auc_plot.csv");
    let (header, _) = read_table(&plot);
    assert_eq!(header, ["time", "raw", "smoothed", "ci_low", "ci_high"]);
    let time: Vec<f64> = column(&plot, "time").into_iter().map(Option::unwrap).collect();
    let smoothed: Vec<f64> = column(&plot, "smoothed").into_iter().map(Option::unwrap).collect();
    let k = time.partition_point(|&t| t < 1.0);
    let w = (1.0 - time[k - 1]) / (time[k] - time[k - 1]);
    let at_one = smoothed[k - 1] + w * (smoothed[k] - smoothed[k - 1]);
    assert!((at_one - 0.88).abs() < 0.04, "{at_one}");
}

#[test]
fn plot_files_respect_smoother_bounds() {
    let dir = TempDir::new().unwrap();
    let cohort = prepared(dir.path());
    ok(dir.path(), &["cv-scores", "--input", s(&cohort), "--marker-mode", "updated"]);
    let scored = dir.path().join("scored.csv");
    for cmd in ["id-auc", "id-tpr"] {
        ok(dir.path(), &[cmd, "--input", s(&scored), "--marker-mode", "updated"]);
        let plot = dir.path().join(format!("{}_plot.csv", cmd.replace('-', "_")));
        let raw: Vec<f64> = column(&plot, "raw").into_iter().flatten().collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (sm, (a, b)) in column(&plot, "smoothed")
            .into_iter()
            .zip(column(&plot, "ci_low").into_iter().zip(column(&plot, "ci_high")))
        {
            let sm = sm.unwrap();
            assert!(lo - 1e-12 <= sm && sm <= hi + 1e-12);
            assert!(a.unwrap() <= sm && sm <= b.unwrap());
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cohort = prepared(dir.path());
    ok(dir.path(), &["cv-scores", "--input", s(&cohort), "--marker-mode", "updated"]);
    let scored = dir.path().join("scored.csv");
    let runs: Vec<Vec<&str>> = vec![
        vec!["cd-sequential", "--input", s(&scored), "--marker-mode", "updated", "--nboot", "20", "--seed", "9"],
        vec!["id-auc", "--input", s(&scored), "--marker-mode", "updated", "--cv-bandwidth", "--nboot", "20"],
        vec!["cindex", "--input", s(&scored), "--marker-mode", "updated", "--nboot", "20"],
        vec!["bootstrap", "--input", s(&scored), "--statistic", "cd-km", "--time", "2", "--nboot", "20"],
    ];
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    for args in &runs {
        ok(first.path(), args);
        ok(second.path(), args);
    }
    let mut names: Vec<_> = fs::read_dir(first.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for n in names {
        assert_eq!(fs::read(first.path().join(&n)).unwrap(), fs::read(second.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn json_tables_parse() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--n", "300", "--seed", "2", "--censor-rate", "0.5"]);
    let sim = dir.path().join("simulated.csv");
    ok(dir.path(), &["--format", "json", "cindex", "--input", s(&sim), "--tau", "2"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cindex.json")).unwrap()).unwrap();
    let c = v[0]["c_index"].as_f64().unwrap();
    assert!(c > 0.5 && c < 1.0);
}

#[test]
fn cox_fit_reports_single_term_path() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--n", "400", "--seed", "5", "--gamma", "1"]);
    let sim = dir.path().join("simulated.csv");
    ok(dir.path(), &["cox-fit", "--input", s(&sim), "--model", "marker"]);
    let coef = column(&dir.path().join("cox_fit.csv"), "coefficient")[0].unwrap();
    assert!((coef - 1.0).abs() < 0.2, "{coef}");
    let path = column(&dir.path().join("cox_fit_plot.csv"), "smoothed");
    assert!(!path.is_empty() && path.iter().all(|g| g.is_some()));
}
