//! Report, plot-data and observation file formats.
//!
//! * `report.json`: the full [`ExperimentReport`].
//! * `report.csv`: one flat row per trial.
//! * `trial_NNN.csv`: columns `x_re,x_im,w_re,w_im,series` with `series` one
//!   of `exact`, `raw`, `refined`.
//! * observation input: columns `s_re,s_im,u_re,u_im` with a header row.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentReport, TrialRow};
use crate::eigenmatrix::{Eigenmatrix, EigenmatrixSummary};
use crate::error::{Error, Result};
use crate::kernels::SampleSet;
use crate::numerics::C64;
use crate::recovery::{Observations, SpikeModel, Warning};

#[derive(Debug, Serialize)]
struct FlatRow<'a> {
    trial: usize,
    seed: u64,
    sigma: f64,
    ok: bool,
    error: &'a str,
    n_a_used: Option<usize>,
    raw_location_error: Option<f64>,
    refined_location_error: Option<f64>,
    raw_weight_error: Option<f64>,
    refined_weight_error: Option<f64>,
    residual_raw: Option<f64>,
    residual_refined: Option<f64>,
    threshold_used: Option<f64>,
    retained_rank: Option<usize>,
    norm: Option<f64>,
    condition_number: Option<f64>,
    warnings: String,
}

fn warning_kind(w: &Warning) -> &'static str {
    match w {
        Warning::DegreeDropped { .. } => "degree_dropped",
        Warning::RankDeficientKrylov { .. } => "rank_deficient_krylov",
        Warning::DiscardedEigenvalues { .. } => "discarded_eigenvalues",
        Warning::RankDeficientCollocation { .. } => "rank_deficient_collocation",
        Warning::NoProgress => "no_progress",
        Warning::ZeroData => "zero_data",
        Warning::OrderNotConverged => "order_not_converged",
    }
}

fn flat(row: &TrialRow) -> FlatRow<'_> {
    let e = row.eigenmatrix.as_ref();
    FlatRow {
        trial: row.trial,
        seed: row.seed,
        sigma: row.sigma,
        ok: row.ok,
        error: row.error.as_deref().unwrap_or(""),
        n_a_used: row.n_a_used,
        raw_location_error: row.raw_location_error,
        refined_location_error: row.refined_location_error,
        raw_weight_error: row.raw_weight_error,
        refined_weight_error: row.refined_weight_error,
        residual_raw: row.residual_raw,
        residual_refined: row.residual_refined,
        threshold_used: e.map(|e| e.threshold_used),
        retained_rank: e.map(|e| e.retained_rank),
        norm: e.map(|e| e.norm),
        condition_number: e.and_then(|e| e.condition_number),
        warnings: row.warnings.iter().map(warning_kind).collect::<Vec<_>>().join(";"),
    }
}

pub fn report_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &report.rows {
        w.serialize(flat(row))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PlotRow {
    pub x_re: f64,
    pub x_im: f64,
    pub w_re: f64,
    pub w_im: f64,
    pub series: String,
}

pub fn plot_rows(row: &TrialRow) -> Vec<PlotRow> {
    let mut out = Vec::new();
    let series = [("exact", &row.truth), ("raw", &row.raw), ("refined", &row.refined)];
    for (name, model) in series {
        if let Some(m) = model {
            for (x, w) in m.locations.iter().zip(&m.weights) {
                out.push(PlotRow { x_re: x.re, x_im: x.im, w_re: w.re, w_im: w.im, series: name.to_string() });
            }
        }
    }
    out
}

/// Writes `report.json`, `report.csv` and one plot file per trial into
/// `dir`; returns the paths written.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("report.json");
    fs::write(&json, report.to_json()?)?;
    written.push(json);
    let csv_path = dir.join("report.csv");
    fs::write(&csv_path, report_csv(report)?)?;
    written.push(csv_path);
    for row in &report.rows {
        let path = dir.join(format!("trial_{:03}.csv", row.trial));
        let mut w = csv::Writer::from_path(&path)?;
        // header even when the trial failed before producing any spikes
        w.write_record(["x_re", "x_im", "w_re", "w_im", "series"])?;
        for p in plot_rows(row) {
            w.write_record(&[
                p.x_re.to_string(),
                p.x_im.to_string(),
                p.w_re.to_string(),
                p.w_im.to_string(),
                p.series,
            ])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Deserialize)]
struct ObservationRecord {
    s_re: f64,
    s_im: f64,
    u_re: f64,
    u_im: f64,
}

pub fn read_observations<R: Read>(reader: R) -> Result<(SampleSet, Observations)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for needed in ["s_re", "s_im", "u_re", "u_im"] {
        if !headers.iter().any(|h| h == needed) {
            return Err(Error::Config(format!("observation file is missing column {needed:?}")));
        }
    }
    let mut s = Vec::new();
    let mut u = Vec::new();
    for rec in rdr.deserialize::<ObservationRecord>() {
        let rec = rec?;
        s.push(C64::new(rec.s_re, rec.s_im));
        u.push(C64::new(rec.u_re, rec.u_im));
    }
    let samples = SampleSet::new(s)?;
    let obs = Observations::new(u, &samples)?;
    Ok((samples, obs))
}

pub fn read_observations_file(path: &Path) -> Result<(SampleSet, Observations)> {
    read_observations(fs::File::open(path)?)
}

pub fn write_observations(samples: &SampleSet, u: &Observations, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["s_re", "s_im", "u_re", "u_im"])?;
    for (s, v) in samples.iter().zip(u.values().iter()) {
        w.write_record(&[s.re.to_string(), s.im.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON form of an eigenmatrix: entries as `[re, im]` pairs, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenmatrixExport {
    pub summary: EigenmatrixSummary,
    pub probe_nodes: Vec<C64>,
    /// Max eigen-residual over the diagnostic points, when computed.
    pub residual: Option<f64>,
    pub matrix: Vec<Vec<C64>>,
}

impl EigenmatrixExport {
    pub fn new(e: &Eigenmatrix, residual: Option<f64>) -> Self {
        let matrix = (0..e.matrix.nrows())
            .map(|i| e.matrix.row(i).iter().copied().collect())
            .collect();
        EigenmatrixExport { summary: e.summary(), probe_nodes: e.grid.nodes.clone(), residual, matrix }
    }
}

/// Spike model as plot rows, for `recover` output.
pub fn model_rows(model: &SpikeModel, series: &str) -> Vec<PlotRow> {
    model
        .locations
        .iter()
        .zip(&model.weights)
        .map(|(x, w)| PlotRow { x_re: x.re, x_im: x.im, w_re: w.re, w_im: w.im, series: series.to_string() })
        .collect()
}
