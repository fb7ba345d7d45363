use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domains::{DomainMap, ReferenceDomain};
use crate::eigenmatrix::{DEFAULT_NORM_BOUND, DEFAULT_PROBE_COUNT};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::numerics::C64;
use crate::recovery::{Estimator, SpikeModel};
use crate::refine::RefineOptions;

pub const DEFAULT_SPIKE_COUNT: usize = 3;
pub const DEFAULT_TRIALS: usize = 5;
pub const DEFAULT_SEED: u64 = 20231;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Rational,
    Spectral,
    Fourier,
    Laplace,
    Deconv,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Rational,
        Scenario::Spectral,
        Scenario::Fourier,
        Scenario::Laplace,
        Scenario::Deconv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Rational => "rational",
            Scenario::Spectral => "spectral",
            Scenario::Fourier => "fourier",
            Scenario::Laplace => "laplace",
            Scenario::Deconv => "deconv",
        }
    }

    pub fn kernel(&self) -> Kernel {
        match self {
            Scenario::Rational | Scenario::Spectral => Kernel::Cauchy,
            Scenario::Fourier => Kernel::Fourier,
            Scenario::Laplace => Kernel::Laplace,
            Scenario::Deconv => Kernel::Lorentzian { gamma: 4.0 },
        }
    }

    pub fn domain(&self) -> ReferenceDomain {
        match self {
            Scenario::Rational => ReferenceDomain::Disk,
            _ => ReferenceDomain::Interval,
        }
    }

    pub fn map(&self) -> DomainMap {
        match self {
            // [-1, 1] onto [0.1, 2.1]
            Scenario::Laplace => DomainMap::Affine {
                center: C64::new(1.1, 0.0),
                scale: C64::new(1.0, 0.0),
            },
            _ => DomainMap::Identity,
        }
    }

    pub fn samples(&self) -> SampleSpec {
        match self {
            Scenario::Rational => SampleSpec::Annulus { n: 40, r_min: 1.2, r_max: 2.2 },
            Scenario::Spectral => SampleSpec::Matsubara { beta: 100.0, n_freq: 128 },
            Scenario::Fourier => SampleSpec::Uniform { n: 128, lo: -5.0, hi: 5.0 },
            Scenario::Laplace => SampleSpec::Uniform { n: 100, lo: 0.0, hi: 10.0 },
            Scenario::Deconv => SampleSpec::Uniform { n: 100, lo: -5.0, hi: 5.0 },
        }
    }

    pub fn default_sigma(&self) -> f64 {
        match self {
            Scenario::Laplace => 1e-6,
            _ => 1e-3,
        }
    }

    /// Distance of the close pair in the hard layout.
    pub fn close_separation(&self) -> f64 {
        match self {
            Scenario::Laplace => 0.25,
            _ => 0.1,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    #[default]
    Easy,
    Hard,
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::Config(format!("unknown difficulty {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma >= 0.0 && self.sigma.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("sigma must be nonnegative, got {}", self.sigma)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSpec {
    /// Modulus uniform in `[r_min, r_max]`, angle uniform in `[0, 2π)`.
    Annulus { n: usize, r_min: f64, r_max: f64 },
    /// Real points uniform in `[lo, hi]`.
    Uniform { n: usize, lo: f64, hi: f64 },
    /// `±i(2m−1)π/β` for `m = 1..=n_freq`, ascending by imaginary part.
    Matsubara { beta: f64, n_freq: usize },
    /// `s_j = j` for `j = 0..n`.
    Integer { n: usize },
    Explicit { points: Vec<C64> },
}

impl SampleSpec {
    pub fn count(&self) -> usize {
        match self {
            SampleSpec::Annulus { n, .. } | SampleSpec::Uniform { n, .. } | SampleSpec::Integer { n } => *n,
            SampleSpec::Matsubara { n_freq, .. } => 2 * n_freq,
            SampleSpec::Explicit { points } => points.len(),
        }
    }

    /// True when the set does not depend on the seed.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            SampleSpec::Matsubara { .. } | SampleSpec::Integer { .. } | SampleSpec::Explicit { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SampleSpec::Annulus { n, r_min, r_max } => n > 0 && 0.0 <= r_min && r_min <= r_max && r_max.is_finite(),
            SampleSpec::Uniform { n, lo, hi } => n > 0 && lo <= hi && lo.is_finite() && hi.is_finite(),
            SampleSpec::Matsubara { beta, n_freq } => n_freq > 0 && beta > 0.0 && beta.is_finite(),
            SampleSpec::Integer { n } => n > 0,
            SampleSpec::Explicit { ref points } => !points.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid sample spec {self:?}")))
        }
    }
}

/// Random spikes in reference coordinates, pushed through the domain map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub difficulty: Difficulty,
    pub n_x: usize,
    /// Spikes are drawn within this radius (disk) or half-width (interval).
    pub extent: f64,
    pub min_separation: f64,
    pub close_separation: f64,
}

impl LayoutSpec {
    pub fn for_scenario(scenario: Scenario, difficulty: Difficulty, n_x: usize) -> Self {
        LayoutSpec {
            difficulty,
            n_x,
            extent: 0.9,
            min_separation: 0.3,
            close_separation: scenario.close_separation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthSpec {
    Layout(LayoutSpec),
    /// Locations in `X`.
    Explicit { model: SpikeModel },
}

impl TruthSpec {
    pub fn n_x(&self) -> usize {
        match self {
            TruthSpec::Layout(l) => l.n_x,
            TruthSpec::Explicit { model } => model.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Scenario name, or any label for a custom setup.
    pub name: String,
    pub kernel: Kernel,
    pub domain: ReferenceDomain,
    pub map: DomainMap,
    pub samples: SampleSpec,
    pub truth: TruthSpec,
    pub sigma: f64,
    /// Master seed; every trial derives its own streams from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_a")]
    pub n_a: usize,
    /// Shrink `n_a` until `cond(Ĝ)` drops below the conditioning limit.
    #[serde(default = "yes")]
    pub auto_n_a: bool,
    #[serde(default = "default_norm_bound")]
    pub norm_bound: f64,
    #[serde(default)]
    pub estimator: Estimator,
    /// Model order used for recovery; `None` means the true spike count.
    #[serde(default)]
    pub n_x: Option<usize>,
    #[serde(default)]
    pub ell: Option<usize>,
    #[serde(default)]
    pub refine: RefineOptions,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_n_a() -> usize {
    DEFAULT_PROBE_COUNT
}

fn yes() -> bool {
    true
}

fn default_norm_bound() -> f64 {
    DEFAULT_NORM_BOUND
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

impl ExperimentConfig {
    pub fn scenario(scenario: Scenario, difficulty: Difficulty) -> Self {
        ExperimentConfig {
            name: scenario.name().to_string(),
            kernel: scenario.kernel(),
            domain: scenario.domain(),
            map: scenario.map(),
            samples: scenario.samples(),
            truth: TruthSpec::Layout(LayoutSpec::for_scenario(scenario, difficulty, DEFAULT_SPIKE_COUNT)),
            sigma: scenario.default_sigma(),
            seed: DEFAULT_SEED,
            n_a: DEFAULT_PROBE_COUNT,
            auto_n_a: true,
            norm_bound: DEFAULT_NORM_BOUND,
            estimator: Estimator::Esprit,
            n_x: None,
            ell: None,
            refine: RefineOptions::default(),
            trials: DEFAULT_TRIALS,
        }
    }

    pub fn recovery_order(&self) -> usize {
        self.n_x.unwrap_or_else(|| self.truth.n_x())
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.map.validate()?;
        self.samples.validate()?;
        self.refine.validate()?;
        NoiseSpec { sigma: self.sigma, seed: self.seed }.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_a == 0 {
            return Err(Error::Config("n_a must be at least 1".into()));
        }
        if !(self.norm_bound > 0.0) {
            return Err(Error::Config(format!("norm bound must be positive, got {}", self.norm_bound)));
        }
        if self.domain == ReferenceDomain::Interval {
            if let DomainMap::Affine { center, scale } = self.map {
                if center.im != 0.0 || scale.im != 0.0 {
                    return Err(Error::Config("an interval domain needs a real affine map".into()));
                }
            }
        }
        let n_x = self.recovery_order();
        if n_x == 0 || self.truth.n_x() == 0 {
            return Err(Error::Config("need at least one spike".into()));
        }
        let n_s = self.samples.count();
        if n_s < 2 * n_x.max(self.truth.n_x()) {
            return Err(Error::Config(format!("n_s = {n_s} is below 2·n_x")));
        }
        if let Some(ell) = self.ell {
            if ell <= n_x {
                return Err(Error::Config(format!("ell = {ell} must exceed n_x = {n_x}")));
            }
        }
        match &self.truth {
            TruthSpec::Layout(l) => {
                if !(l.extent > 0.0 && l.extent <= 1.0) || !(l.min_separation >= 0.0) || !(l.close_separation > 0.0) {
                    return Err(Error::Config(format!("invalid layout {l:?}")));
                }
                if l.difficulty == Difficulty::Hard && l.n_x < 2 {
                    return Err(Error::Config("a hard layout needs at least two spikes".into()));
                }
            }
            TruthSpec::Explicit { model } => {
                if model.locations.len() != model.weights.len() {
                    return Err(Error::Config("truth locations and weights differ in length".into()));
                }
            }
        }
        Ok(())
    }
}
