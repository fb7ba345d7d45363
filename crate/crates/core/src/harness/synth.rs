//! Sample generation, forward synthesis, noise and spike layouts.
//!
//! All randomness is ChaCha8 seeded through [`derive_seed`], so a run is
//! reproducible across platforms and thread counts.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{Difficulty, LayoutSpec, NoiseSpec, SampleSpec};
use crate::domains::{map_forward, DomainMap, ReferenceDomain};
use crate::error::{Error, Result};
use crate::kernels::{AnalyticKernel, SampleSet};
use crate::numerics::{CVector, C64};
use crate::recovery::{Observations, Problem, SpikeModel};

/// Independent random streams inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Samples = 1,
    Layout = 2,
    Noise = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `splitmix64(seed ⊕ splitmix64(index))`; used for trial seeds from the
/// master seed and for stream seeds from a trial seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn stream_rng(trial_seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, stream as u64))
}

pub fn generate_samples(spec: &SampleSpec, seed: u64) -> Result<SampleSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match *spec {
        SampleSpec::Annulus { n, r_min, r_max } => (0..n)
            .map(|_| {
                let r = rng.random_range(r_min..=r_max);
                let theta = rng.random_range(0.0..2.0 * PI);
                C64::from_polar(r, theta)
            })
            .collect(),
        SampleSpec::Uniform { n, lo, hi } => (0..n).map(|_| C64::new(rng.random_range(lo..=hi), 0.0)).collect(),
        SampleSpec::Matsubara { beta, n_freq } => {
            let mut v: Vec<C64> = (1..=n_freq)
                .rev()
                .map(|m| C64::new(0.0, -((2 * m - 1) as f64) * PI / beta))
                .collect();
            v.extend((1..=n_freq).map(|m| C64::new(0.0, (2 * m - 1) as f64 * PI / beta)));
            v
        }
        SampleSpec::Integer { n } => (0..n).map(|j| C64::new(j as f64, 0.0)).collect(),
        SampleSpec::Explicit { ref points } => points.clone(),
    };
    SampleSet::new(points)
}

/// `u_j = Σ_k G(s_j, x_k) w_k`.
pub fn synthesize<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    truth: &SpikeModel,
) -> Result<Observations> {
    Problem::new(kernel, samples, ReferenceDomain::Disk, DomainMap::Identity).synthesize(truth)
}

/// `ũ_j = u_j (1 + σ Z_j)` with real standard normal `Z_j`.
pub fn add_noise(u: &Observations, noise: &NoiseSpec) -> Result<Observations> {
    noise.validate()?;
    if noise.sigma == 0.0 {
        return Ok(u.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let noisy: CVector = u.values().map(|v| {
        let z: f64 = rng.sample(StandardNormal);
        v * (1.0 + noise.sigma * z)
    });
    Observations::from_vector(noisy)
}

const LAYOUT_ATTEMPTS: usize = 100_000;

fn draw_point(rng: &mut ChaCha8Rng, domain: ReferenceDomain, extent: f64) -> C64 {
    match domain {
        ReferenceDomain::Disk => {
            let r = extent * rng.random::<f64>().sqrt();
            C64::from_polar(r, rng.random_range(0.0..2.0 * PI))
        }
        ReferenceDomain::Interval => C64::new(rng.random_range(-extent..=extent), 0.0),
    }
}

fn inside(domain: ReferenceDomain, extent: f64, t: C64) -> bool {
    match domain {
        ReferenceDomain::Disk => t.norm() <= extent,
        ReferenceDomain::Interval => t.re.abs() <= extent,
    }
}

/// Spike locations in reference coordinates.
///
/// Easy: every pair at least `min_separation` apart. Hard: spikes 0 and 1
/// exactly `close_separation` apart, all other pairs as in the easy layout.
pub fn reference_layout(layout: &LayoutSpec, domain: ReferenceDomain, seed: u64) -> Result<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = layout.n_x;
    let hard = layout.difficulty == Difficulty::Hard;
    for _ in 0..LAYOUT_ATTEMPTS {
        let mut x: Vec<C64> = (0..n).map(|_| draw_point(&mut rng, domain, layout.extent)).collect();
        if hard {
            let dir = match domain {
                ReferenceDomain::Disk => C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)),
                ReferenceDomain::Interval => C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0),
            };
            x[1] = x[0] + dir * layout.close_separation;
            if !inside(domain, layout.extent, x[1]) {
                continue;
            }
        }
        let ok = (0..n).all(|i| {
            (i + 1..n).all(|j| (hard && i == 0 && j == 1) || (x[i] - x[j]).norm() >= layout.min_separation)
        });
        if ok {
            return Ok(x);
        }
    }
    Err(Error::Config(format!(
        "could not place {n} spikes with separation {} inside extent {}",
        layout.min_separation, layout.extent
    )))
}

/// Unit-weight truth in `X` coordinates.
pub fn spike_layout(layout: &LayoutSpec, domain: ReferenceDomain, map: &DomainMap, seed: u64) -> Result<SpikeModel> {
    let t = reference_layout(layout, domain, seed)?;
    Ok(SpikeModel::unit_weights(t.into_iter().map(|t| map_forward(map, t)).collect()))
}
