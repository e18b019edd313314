//! Result tables (CSV or JSON) and plot-data files (always CSV).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use tdroc::series::AccuracySeries;
use tdroc::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// One row of a plot-data file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PlotRow {
    pub time: f64,
    pub raw: Option<f64>,
    pub smoothed: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl PlotRow {
    pub fn point(time: f64, raw: Option<f64>) -> PlotRow {
        PlotRow { time, raw, ..PlotRow::default() }
    }
}

/// Plot rows from a series whose times are in storage units.
pub fn series_rows(series: &AccuracySeries, unit: f64) -> Vec<PlotRow> {
    series
        .points
        .iter()
        .map(|p| PlotRow { time: p.time / unit, raw: p.raw, smoothed: p.smoothed, ci_low: None, ci_high: None })
        .collect()
}

pub struct Outputs {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, format: Format) -> Result<Outputs> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    pub fn path(&self, file_name: &str) -> PathBuf {
        self.dir.join(file_name)
    }

    /// Writes `rows` as `<name>.csv` or `<name>.json`.
    pub fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}.{}", self.format.extension()));
        match self.format {
            Format::Csv => write_csv(&path, rows, None)?,
            Format::Json => {
                let mut w = BufWriter::new(File::create(&path)?);
                serde_json::to_writer_pretty(&mut w, rows).map_err(std::io::Error::other)?;
                writeln!(w)?;
                w.flush()?;
            }
        }
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes a table whose columns are only known at run time. Cells are
    /// null, numbers or strings; nulls become empty CSV cells.
    pub fn records(&mut self, name: &str, header: &[String], rows: &[Vec<Value>]) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}.{}", self.format.extension()));
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(header)?;
                for r in rows {
                    w.write_record(r.iter().map(cell))?;
                }
                w.flush()?;
            }
            Format::Json => {
                let objects: Vec<Map<String, Value>> =
                    rows.iter().map(|r| header.iter().cloned().zip(r.iter().cloned()).collect()).collect();
                let mut w = BufWriter::new(File::create(&path)?);
                serde_json::to_writer_pretty(&mut w, &objects).map_err(std::io::Error::other)?;
                writeln!(w)?;
                w.flush()?;
            }
        }
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `<name>_plot.csv` with columns time, raw, smoothed, ci_low,
    /// ci_high (empty cells where a value does not apply).
    pub fn plot(&mut self, name: &str, rows: &[PlotRow]) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}_plot.csv"));
        write_csv(&path, rows, Some(&PLOT_HEADER))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Records a file written by other means (cohort files).
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

const PLOT_HEADER: [&str; 5] = ["time", "raw", "smoothed", "ci_low", "ci_high"];

/// `empty_header` is written when there are no rows (serde only emits a
/// header alongside the first record).
fn write_csv<T: Serialize>(path: &Path, rows: &[T], empty_header: Option<&[&str]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let (true, Some(h)) = (rows.is_empty(), empty_header) {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
