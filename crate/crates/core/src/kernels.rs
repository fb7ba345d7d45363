//! Kernel families `G(s, x)` and the sampled kernel vectors built from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CVector, C64};

/// A kernel that is analytic in `x`.
///
/// The built-in [`Kernel`] families implement this; library users can plug in
/// their own kernel by implementing it and calling the generic assembly and
/// refinement routines directly. The config file format only knows the
/// built-in families.
pub trait AnalyticKernel: Sync {
    fn eval(&self, s: C64, x: C64) -> Result<C64>;

    /// `∂G/∂x`.
    fn x_derivative(&self, s: C64, x: C64) -> Result<C64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Kernel {
    /// `1 / (s - x)`
    Cauchy,
    /// `x^s = exp(s Log x)`, principal branch (cut along the negative real axis).
    Power,
    /// `exp(πi s x)`
    Fourier,
    /// `x exp(-s x)`
    Laplace,
    /// `1 / (1 + γ (s - x)²)`
    Lorentzian { gamma: f64 },
}

impl Kernel {
    pub fn lorentzian(gamma: f64) -> Result<Self> {
        let k = Kernel::Lorentzian { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Lorentzian { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(
                Error::Config(format!("lorentzian kernel needs gamma > 0, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Cauchy => "cauchy",
            Kernel::Power => "power",
            Kernel::Fourier => "fourier",
            Kernel::Laplace => "laplace",
            Kernel::Lorentzian { .. } => "lorentzian",
        }
    }
}

fn finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn checked(value: C64, s: C64, x: C64) -> Result<C64> {
    if finite(value) {
        Ok(value)
    } else {
        Err(Error::KernelSingular { s, x })
    }
}

impl AnalyticKernel for Kernel {
    fn eval(&self, s: C64, x: C64) -> Result<C64> {
        let one = C64::new(1.0, 0.0);
        let value = match *self {
            Kernel::Cauchy => {
                if s == x {
                    return Err(Error::KernelSingular { s, x });
                }
                one / (s - x)
            }
            Kernel::Power => {
                if x == C64::new(0.0, 0.0) {
                    return Err(Error::KernelSingular { s, x });
                }
                (s * x.ln()).exp()
            }
            Kernel::Fourier => (C64::new(0.0, PI) * s * x).exp(),
            Kernel::Laplace => x * (-s * x).exp(),
            Kernel::Lorentzian { gamma } => {
                let d = s - x;
                let den = one + d * d * gamma;
                if den == C64::new(0.0, 0.0) {
                    return Err(Error::KernelSingular { s, x });
                }
                one / den
            }
        };
        checked(value, s, x)
    }

    fn x_derivative(&self, s: C64, x: C64) -> Result<C64> {
        let one = C64::new(1.0, 0.0);
        let value = match *self {
            Kernel::Cauchy => {
                if s == x {
                    return Err(Error::KernelSingular { s, x });
                }
                let d = s - x;
                one / (d * d)
            }
            Kernel::Power => {
                if x == C64::new(0.0, 0.0) {
                    return Err(Error::KernelSingular { s, x });
                }
                s * (s * x.ln()).exp() / x
            }
            Kernel::Fourier => C64::new(0.0, PI) * s * (C64::new(0.0, PI) * s * x).exp(),
            Kernel::Laplace => (one - s * x) * (-s * x).exp(),
            Kernel::Lorentzian { gamma } => {
                let d = s - x;
                let den = one + d * d * gamma;
                if den == C64::new(0.0, 0.0) {
                    return Err(Error::KernelSingular { s, x });
                }
                d * (2.0 * gamma) / (den * den)
            }
        };
        checked(value, s, x)
    }
}

/// The `n_s` unstructured sample locations `{s_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<C64>", into = "Vec<C64>")]
pub struct SampleSet(Vec<C64>);

impl SampleSet {
    pub fn new(locations: Vec<C64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidArgument("sample set is empty".into()));
        }
        if let Some(bad) = locations.iter().find(|z| !finite(**z)) {
            return Err(Error::InvalidArgument(format!(
                "sample location {bad} is not finite"
            )));
        }
        Ok(SampleSet(locations))
    }

    pub fn from_real(locations: &[f64]) -> Result<Self> {
        Self::new(locations.iter().map(|&s| C64::new(s, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.0.iter()
    }
}

impl TryFrom<Vec<C64>> for SampleSet {
    type Error = Error;

    fn try_from(v: Vec<C64>) -> Result<Self> {
        SampleSet::new(v)
    }
}

impl From<SampleSet> for Vec<C64> {
    fn from(s: SampleSet) -> Self {
        s.0
    }
}

pub fn eval_kernel<K: AnalyticKernel + ?Sized>(kernel: &K, s: C64, x: C64) -> Result<C64> {
    kernel.eval(s, x)
}

/// `g(x) = [G(s_j, x)]_j`.
pub fn assemble_vector<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    x: C64,
) -> Result<CVector> {
    let values = samples
        .iter()
        .map(|&s| kernel.eval(s, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(CVector::from_vec(values))
}

/// `ĝ(x) = g(x) / ‖g(x)‖₂`.
pub fn assemble_normalized<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    x: C64,
) -> Result<CVector> {
    let g = assemble_vector(kernel, samples, x)?;
    normalize(g).ok_or(Error::ZeroKernelVector { x })
}

pub(crate) fn normalize(mut g: CVector) -> Option<CVector> {
    let norm = g.norm();
    if norm > 0.0 && norm.is_finite() {
        g.unscale_mut(norm);
        Some(g)
    } else {
        None
    }
}
