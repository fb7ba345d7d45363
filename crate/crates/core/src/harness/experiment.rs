use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, NoiseSpec, TruthSpec};
use super::scoring::match_and_score;
use super::synth::{add_noise, derive_seed, generate_samples, spike_layout, synthesize, Stream};
use crate::eigenmatrix::{build, largest_well_conditioned_probe_count, EigenmatrixSummary, CONDITION_LIMIT};
use crate::error::Result;
use crate::kernels::SampleSet;
use crate::recovery::{recover, Problem, RecoveryOptions, SpikeModel, Warning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub sigma: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub n_a_used: Option<usize>,
    pub raw_location_error: Option<f64>,
    pub refined_location_error: Option<f64>,
    pub raw_weight_error: Option<f64>,
    pub refined_weight_error: Option<f64>,
    pub residual_raw: Option<f64>,
    pub residual_refined: Option<f64>,
    pub eigenmatrix: Option<EigenmatrixSummary>,
    pub warnings: Vec<Warning>,
    pub truth: Option<SpikeModel>,
    pub raw: Option<SpikeModel>,
    pub refined: Option<SpikeModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(ColumnStats {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            max: v[n - 1],
        })
    }
}

/// Statistics over the successful trials only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub successful: usize,
    pub failed: usize,
    pub raw_location_error: Option<ColumnStats>,
    pub refined_location_error: Option<ColumnStats>,
    pub raw_weight_error: Option<ColumnStats>,
    pub refined_weight_error: Option<ColumnStats>,
    pub residual_raw: Option<ColumnStats>,
    pub residual_refined: Option<ColumnStats>,
}

impl Aggregate {
    pub fn of(rows: &[TrialRow]) -> Self {
        let col = |f: fn(&TrialRow) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter(|r| r.ok).filter_map(f).collect();
            ColumnStats::of(&v)
        };
        let successful = rows.iter().filter(|r| r.ok).count();
        Aggregate {
            successful,
            failed: rows.len() - successful,
            raw_location_error: col(|r| r.raw_location_error),
            refined_location_error: col(|r| r.refined_location_error),
            raw_weight_error: col(|r| r.raw_weight_error),
            refined_weight_error: col(|r| r.refined_weight_error),
            residual_raw: col(|r| r.residual_raw),
            residual_refined: col(|r| r.residual_refined),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

impl ExperimentReport {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| !r.ok)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Refined location errors of successful trials, in trial order.
    pub fn refined_errors(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.refined_location_error).collect()
    }
}

/// Trial `i` uses seed `derive_seed(cfg.seed, i)`; samples, spike layout and
/// noise each draw from their own stream derived from that.
pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(cfg.seed, trial as u64)
}

/// Sample set of trial `trial`, as drawn by [`run_trial`].
pub fn trial_samples(cfg: &ExperimentConfig, trial: usize) -> Result<SampleSet> {
    generate_samples(&cfg.samples, derive_seed(trial_seed(cfg, trial), Stream::Samples as u64))
}

/// `cfg.n_a`, shrunk to the largest well-conditioned count when `auto_n_a` is set.
pub fn probe_count(cfg: &ExperimentConfig, samples: &SampleSet) -> Result<usize> {
    if cfg.auto_n_a {
        largest_well_conditioned_probe_count(&cfg.kernel, samples, cfg.domain, &cfg.map, cfg.n_a, CONDITION_LIMIT)
    } else {
        Ok(cfg.n_a)
    }
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialRow {
    let seed = trial_seed(cfg, trial);
    let mut row = TrialRow {
        trial,
        seed,
        sigma: cfg.sigma,
        ok: false,
        error: None,
        n_a_used: None,
        raw_location_error: None,
        refined_location_error: None,
        raw_weight_error: None,
        refined_weight_error: None,
        residual_raw: None,
        residual_refined: None,
        eigenmatrix: None,
        warnings: Vec::new(),
        truth: None,
        raw: None,
        refined: None,
    };
    if let Err(e) = fill_trial(cfg, seed, &mut row) {
        row.error = Some(e.to_string());
    }
    row
}

fn fill_trial(cfg: &ExperimentConfig, seed: u64, row: &mut TrialRow) -> Result<()> {
    let samples = generate_samples(&cfg.samples, derive_seed(seed, Stream::Samples as u64))?;
    let truth = match &cfg.truth {
        TruthSpec::Layout(l) => spike_layout(l, cfg.domain, &cfg.map, derive_seed(seed, Stream::Layout as u64))?,
        TruthSpec::Explicit { model } => model.clone(),
    };
    row.truth = Some(truth.clone());
    let exact = synthesize(&cfg.kernel, &samples, &truth)?;
    let noise = NoiseSpec { sigma: cfg.sigma, seed: derive_seed(seed, Stream::Noise as u64) };
    let u = add_noise(&exact, &noise)?;

    let n_a = probe_count(cfg, &samples)?;
    row.n_a_used = Some(n_a);
    let e = build(&cfg.kernel, &samples, cfg.domain, &cfg.map, n_a, cfg.norm_bound)?;
    row.eigenmatrix = Some(e.summary());

    let problem = Problem::new(&cfg.kernel, &samples, cfg.domain, cfg.map);
    let opts = RecoveryOptions {
        estimator: cfg.estimator,
        n_x: cfg.recovery_order(),
        ell: cfg.ell,
        refine: cfg.refine,
    };
    let result = recover(&problem, &e, &u, &opts)?;
    let diameter = cfg.map.image_diameter();
    let raw = match_and_score(&truth, &result.raw, diameter);
    let refined = match_and_score(&truth, &result.refined, diameter);
    row.raw_location_error = Some(raw.location_error);
    row.raw_weight_error = Some(raw.weight_error);
    row.refined_location_error = Some(refined.location_error);
    row.refined_weight_error = Some(refined.weight_error);
    row.residual_raw = Some(result.residual_raw);
    row.residual_refined = Some(result.residual_refined);
    row.warnings = result.warnings;
    row.raw = Some(result.raw);
    row.refined = Some(result.refined);
    row.ok = true;
    Ok(())
}

/// Runs all trials in parallel; rows come back in trial order, so the report
/// is identical to a serial run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows: Vec<TrialRow> = (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, i)).collect();
    let aggregate = Aggregate::of(&rows);
    Ok(ExperimentReport { config: cfg.clone(), rows, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Difficulty, Scenario};

    #[test]
    fn stats() {
        let s = ColumnStats::of(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.max, 10.0);
        assert_eq!(s.mean, 4.0);
        assert!(ColumnStats::of(&[]).is_none());
    }

    #[test]
    fn rational_noiseless_single_trial() {
        let mut cfg = ExperimentConfig::scenario(Scenario::Rational, Difficulty::Easy);
        cfg.sigma = 0.0;
        cfg.trials = 1;
        let report = run_experiment(&cfg).unwrap();
        let row = &report.rows[0];
        assert!(row.ok, "{:?}", row.error);
        assert!(row.refined_location_error.unwrap() <= 1e-8);
        assert!(row.residual_refined.unwrap() <= row.residual_raw.unwrap() + 1e-9);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut cfg = ExperimentConfig::scenario(Scenario::Fourier, Difficulty::Easy);
        cfg.trials = 2;
        // a zero-weight truth gives identically zero data
        cfg.truth = TruthSpec::Explicit {
            model: SpikeModel::new(vec![crate::numerics::C64::new(0.1, 0.0)], vec![crate::numerics::C64::new(0.0, 0.0)])
                .unwrap(),
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.all_failed());
        assert!(report.rows[0].error.as_deref().unwrap().contains("degenerate"));
        assert_eq!(report.aggregate.failed, 2);
    }
}
