//! The eigenmatrix `M = Ĝ Λ Ĝ⁺`, built so that `M ĝ(x) ≈ t ĝ(x)` for
//! `x = φ(t)` across the whole reference domain.

use serde::{Deserialize, Serialize};

use crate::domains::{map_forward, probe_grid, DomainMap, ProbeGrid, ReferenceDomain};
use crate::error::{Error, Result};
use crate::kernels::{assemble_normalized, AnalyticKernel, SampleSet};
use crate::numerics::{spectral_norm, svd, CMatrix, CVector, SvdResult, C64};

pub const DEFAULT_NORM_BOUND: f64 = 3.0;
pub const DEFAULT_PROBE_COUNT: usize = 32;
/// Singular values below this fraction of `s₁` are never kept.
pub const THRESHOLD_FLOOR: f64 = 1e-14;
/// Largest acceptable `cond(Ĝ)` when shrinking the probe grid.
pub const CONDITION_LIMIT: f64 = 1e7;

#[derive(Debug, Clone)]
pub struct Eigenmatrix {
    pub matrix: CMatrix,
    pub grid: ProbeGrid,
    /// Relative pseudoinverse cut: singular values `s_i > threshold_used · s₁` are kept.
    pub threshold_used: f64,
    pub retained_rank: usize,
    pub norm: f64,
    pub condition_number: f64,
    /// `None` when the threshold was given explicitly.
    pub norm_bound: Option<f64>,
}

/// Everything about an [`Eigenmatrix`] except the matrix itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenmatrixSummary {
    pub n_s: usize,
    pub n_a: usize,
    pub domain: ReferenceDomain,
    pub threshold_used: f64,
    pub retained_rank: usize,
    pub norm: f64,
    /// `None` encodes an exactly rank-deficient `Ĝ`.
    pub condition_number: Option<f64>,
    pub norm_bound: Option<f64>,
}

impl Eigenmatrix {
    pub fn n_s(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    pub fn summary(&self) -> EigenmatrixSummary {
        EigenmatrixSummary {
            n_s: self.n_s(),
            n_a: self.grid.len(),
            domain: self.grid.domain,
            threshold_used: self.threshold_used,
            retained_rank: self.retained_rank,
            norm: self.norm,
            condition_number: self
                .condition_number
                .is_finite()
                .then_some(self.condition_number),
            norm_bound: self.norm_bound,
        }
    }
}

/// `Ĝ` with columns `ĝ(φ(a_t))` in probe-grid order.
pub fn probe_matrix<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    grid: &ProbeGrid,
    map: &DomainMap,
) -> Result<CMatrix> {
    let mut g = CMatrix::zeros(samples.len(), grid.len());
    for (t, &a) in grid.nodes.iter().enumerate() {
        let col = assemble_normalized(kernel, samples, map_forward(map, a))?;
        g.set_column(t, &col);
    }
    Ok(g)
}

fn condition_from(f: &SvdResult, rows: usize, cols: usize) -> f64 {
    let s = &f.singular_values;
    let s1 = s[0];
    let smin = *s.last().unwrap();
    if smin <= s1 * f64::EPSILON * rows.max(cols) as f64 {
        f64::INFINITY
    } else {
        s1 / smin
    }
}

/// `‖Ĝ Λ Ĝ⁺‖₂` when `Ĝ⁺` keeps the leading `k` singular triplets.
///
/// With `Ĝ = U S V*` this is the norm of the small factor `S V* Λ V_k S_k⁻¹`.
fn truncated_norm(f: &SvdResult, nodes: &[C64], k: usize) -> Result<f64> {
    let p = f.singular_values.len();
    let small = CMatrix::from_fn(p, k, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for (t, &a) in nodes.iter().enumerate() {
            acc += f.v_adjoint[(i, t)] * a * f.v_adjoint[(j, t)].conj();
        }
        acc * (f.singular_values[i] / f.singular_values[j])
    });
    spectral_norm(&small)
}

fn assemble_m(ghat: &CMatrix, nodes: &[C64], f: &SvdResult, k: usize) -> CMatrix {
    let mut gl = ghat.clone();
    for (t, &a) in nodes.iter().enumerate() {
        gl.column_mut(t).iter_mut().for_each(|z| *z *= a);
    }
    gl * f.pinv_rank(k)
}

fn from_rank(
    ghat: &CMatrix,
    grid: ProbeGrid,
    f: &SvdResult,
    k: usize,
    threshold: f64,
    norm_bound: Option<f64>,
) -> Result<Eigenmatrix> {
    let matrix = assemble_m(ghat, &grid.nodes, f, k);
    let norm = if k == 0 { 0.0 } else { truncated_norm(f, &grid.nodes, k)? };
    Ok(Eigenmatrix {
        matrix,
        condition_number: condition_from(f, ghat.nrows(), ghat.ncols()),
        grid,
        threshold_used: threshold,
        retained_rank: k,
        norm,
        norm_bound,
    })
}

/// Builds `M`, keeping as many singular values of `Ĝ` as the norm bound allows.
///
/// Every distinct cut point of the spectrum is a candidate, scanned from the
/// smallest relative threshold ([`THRESHOLD_FLOOR`]) upward; the first
/// candidate with `‖M‖₂ ≤ norm_bound` wins.
pub fn build<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    domain: ReferenceDomain,
    map: &DomainMap,
    n_a: usize,
    norm_bound: f64,
) -> Result<Eigenmatrix> {
    if !(norm_bound > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "norm bound must be positive, got {norm_bound}"
        )));
    }
    let grid = probe_grid(domain, n_a)?;
    let ghat = probe_matrix(kernel, samples, &grid, map)?;
    let f = svd(&ghat)?;
    let s = &f.singular_values;
    let kmax = f.rank_above(THRESHOLD_FLOOR);
    let mut best = f64::INFINITY;
    for k in (1..=kmax).rev() {
        // a cut between equal singular values is not expressible as a threshold
        if k < kmax && s[k] >= s[k - 1] {
            continue;
        }
        let norm = truncated_norm(&f, &grid.nodes, k)?;
        if norm <= norm_bound {
            let threshold = if k == kmax {
                THRESHOLD_FLOOR
            } else {
                (s[k] * s[k - 1]).sqrt() / s[0]
            };
            return from_rank(&ghat, grid, &f, k, threshold, Some(norm_bound));
        }
        best = best.min(norm);
    }
    Err(Error::NormBoundUnreachable { bound: norm_bound, best })
}

/// Builds `M` with a fixed relative pseudoinverse threshold and no norm control.
pub fn build_with_threshold<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    domain: ReferenceDomain,
    map: &DomainMap,
    n_a: usize,
    threshold: f64,
) -> Result<Eigenmatrix> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let grid = probe_grid(domain, n_a)?;
    let ghat = probe_matrix(kernel, samples, &grid, map)?;
    let f = svd(&ghat)?;
    let k = f.rank_above(threshold);
    from_rank(&ghat, grid, &f, k, threshold, None)
}

/// `max_t ‖M ĝ(φ(t)) − t ĝ(φ(t))‖₂` over reference-domain test points.
pub fn residual_diagnostic<K: AnalyticKernel + ?Sized>(
    e: &Eigenmatrix,
    kernel: &K,
    samples: &SampleSet,
    map: &DomainMap,
    test_points: &[C64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in test_points {
        let g = assemble_normalized(kernel, samples, map_forward(map, t))?;
        let r = e.apply(&g) - &g * t;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// `count` reference-domain test points: a circle of radius `radius` for the
/// disk, an evenly spaced interior grid scaled by `radius` for the interval.
pub fn diagnostic_points(domain: ReferenceDomain, count: usize, radius: f64) -> Vec<C64> {
    match domain {
        ReferenceDomain::Disk => (0..count)
            .map(|i| C64::from_polar(radius, 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / count as f64))
            .collect(),
        ReferenceDomain::Interval => (0..count)
            .map(|i| C64::new(radius * (-1.0 + 2.0 * (i as f64 + 0.5) / count as f64), 0.0))
            .collect(),
    }
}

/// `cond(Ĝ) = s₁ / s_min`, `+∞` when `Ĝ` is numerically rank deficient.
pub fn condition_check<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    domain: ReferenceDomain,
    map: &DomainMap,
    n_a: usize,
) -> Result<f64> {
    let grid = probe_grid(domain, n_a)?;
    let ghat = probe_matrix(kernel, samples, &grid, map)?;
    let f = svd(&ghat)?;
    Ok(condition_from(&f, ghat.nrows(), ghat.ncols()))
}

/// Largest `n ≤ n_a` with `cond(Ĝ) < limit`; a single probe always qualifies.
pub fn largest_well_conditioned_probe_count<K: AnalyticKernel + ?Sized>(
    kernel: &K,
    samples: &SampleSet,
    domain: ReferenceDomain,
    map: &DomainMap,
    n_a: usize,
    limit: f64,
) -> Result<usize> {
    for n in (2..=n_a).rev() {
        if condition_check(kernel, samples, domain, map, n)? < limit {
            return Ok(n);
        }
    }
    Ok(n_a.min(1))
}
