//! Result rows and their serialization.
//!
//! Rows are sorted by key before writing, so output files depend only on the
//! rows themselves and never on the order in which jobs finished.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{ExpError, Result};

pub const CSV_HEADER: &str = "experiment,n,b,t,quantity,value,uncertainty,method,seed,walltime_ms";

/// One measured or computed value.
///
/// `uncertainty` is a certified half-width for bracketed values, one
/// standard error for stochastic values, and 0 for values computed to
/// floating-point accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub n: Option<usize>,
    pub b: Option<f64>,
    pub t: Option<f64>,
    pub quantity: String,
    pub value: f64,
    pub uncertainty: f64,
    pub method: String,
    pub seed: Option<u64>,
    pub walltime_ms: u64,
}

impl ResultRow {
    /// A deterministic value (uncertainty 0, no seed).
    pub fn exact(experiment: &str, quantity: &str, value: f64, method: &str) -> Self {
        Self {
            experiment: experiment.into(),
            n: None,
            b: None,
            t: None,
            quantity: quantity.into(),
            value,
            uncertainty: 0.0,
            method: method.into(),
            seed: None,
            walltime_ms: 0,
        }
    }

    /// A stochastic value; its uncertainty is kept strictly positive by
    /// flooring at the sampling resolution `1 / samples`.
    pub fn sampled(experiment: &str, quantity: &str, value: f64, se: f64, samples: usize, method: &str, seed: u64) -> Self {
        let floor = 1.0 / samples.max(1) as f64;
        Self { uncertainty: se.max(floor), seed: Some(seed), ..Self::exact(experiment, quantity, value, method) }
    }

    pub fn at_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn at_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn at_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_uncertainty(mut self, u: f64) -> Self {
        self.uncertainty = u;
        self
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        fn opt(a: Option<f64>, b: Option<f64>) -> Ordering {
            match (a, b) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (a, b) => a.is_some().cmp(&b.is_some()),
            }
        }
        self.experiment
            .cmp(&other.experiment)
            .then(self.n.cmp(&other.n))
            .then(opt(self.b, other.b))
            .then(opt(self.t, other.t))
            .then(self.quantity.cmp(&other.quantity))
            .then(self.method.cmp(&other.method))
            .then(self.seed.cmp(&other.seed))
            .then(self.value.total_cmp(&other.value))
    }
}

/// Sorts rows into the canonical output order.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(ResultRow::key_cmp);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    /// CSV plus one two-column data file per curve.
    Plot,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "plot" => Ok(Format::Plot),
            other => Err(format!("unknown format `{other}` (expected csv or plot)")),
        }
    }
}

/// Renders rows (in canonical order) as CSV text.
pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let io = |e: csv::Error| ExpError::Write { path: "<csv>".into(), source: std::io::Error::other(e) };
    writer
        .write_record(CSV_HEADER.split(','))
        .map_err(io)?;
    for row in &sorted {
        writer.serialize(row).map_err(io)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| ExpError::Write { path: "<csv>".into(), source: std::io::Error::other(e.to_string()) })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// A curve: rows sharing experiment, quantity, `n` and method, with `b`
/// (or else `t`) as abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotCurve {
    pub file_name: String,
    pub contents: String,
}

pub fn plot_curves(rows: &[ResultRow]) -> Vec<PlotCurve> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut groups: BTreeMap<(String, String, Option<usize>, String), Vec<(&'static str, f64, f64)>> = BTreeMap::new();
    for r in &sorted {
        let point = match (r.b, r.t) {
            (Some(b), _) => ("b", b, r.value),
            (None, Some(t)) => ("t", t, r.value),
            (None, None) => continue,
        };
        groups
            .entry((r.experiment.clone(), r.quantity.clone(), r.n, r.method.clone()))
            .or_default()
            .push(point);
    }
    // a quantity computed by several methods at one n gets the method in its name
    let mut methods_per: BTreeMap<(String, String, Option<usize>), usize> = BTreeMap::new();
    for (e, q, n, _) in groups.keys() {
        *methods_per.entry((e.clone(), q.clone(), *n)).or_default() += 1;
    }
    groups
        .into_iter()
        .map(|((experiment, quantity, n, method), pts)| {
            let mut name = format!("{experiment}_{}", sanitize(&quantity));
            if let Some(n) = n {
                write!(name, "_n{n}").unwrap();
            }
            if methods_per[&(experiment.clone(), quantity.clone(), n)] > 1 {
                write!(name, "_{}", sanitize(&method)).unwrap();
            }
            name.push_str(".dat");
            let axis = pts[0].0;
            let mut contents = format!("# experiment={experiment} quantity={quantity} method={method}");
            if let Some(n) = n {
                write!(contents, " n={n}").unwrap();
            }
            write!(contents, "\n# {axis} {quantity}\n").unwrap();
            for (_, x, y) in pts {
                writeln!(contents, "{x} {y}").unwrap();
            }
            PlotCurve { file_name: name, contents }
        })
        .collect()
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes `<out>/<id>.csv` and, for [`Format::Plot`], the curve files.
/// Returns the written paths in order.
pub fn emit(rows: &[ResultRow], id: &str, format: Format, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|source| ExpError::Write { path: out.into(), source })?;
    let mut written = Vec::new();
    let csv_path = out.join(format!("{id}.csv"));
    write_file(&csv_path, &csv_string(rows)?)?;
    written.push(csv_path);
    if format == Format::Plot {
        for curve in plot_curves(rows) {
            let path = out.join(&curve.file_name);
            write_file(&path, &curve.contents)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| ExpError::Write { path: path.into(), source })
}
