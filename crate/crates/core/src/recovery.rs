//! Spike location estimates from the eigenmatrix Krylov sequence, and the
//! least-squares weights that go with them.

use serde::{Deserialize, Serialize};

use crate::domains::{map_forward, project_to_domain, DomainMap, ReferenceDomain};
use crate::eigenmatrix::{Eigenmatrix, EigenmatrixSummary};
use crate::error::{Error, Result};
use crate::kernels::{AnalyticKernel, SampleSet};
use crate::numerics::{
    eig, lstsq, pinv_thresholded, poly_roots, svd, CMatrix, CVector, C64,
    LSTSQ_RELATIVE_THRESHOLD,
};
use crate::refine::{refine, RefineOptions};

/// Relative size below which trailing Prony coefficients count as zero.
pub const PRONY_TRIM: f64 = 1e-12;
/// `s_{n_x} / s₁` of the Krylov matrix below which `n_x` is flagged as too large.
pub const RANK_WARNING: f64 = 1e-13;
pub const ESPRIT_PINV_THRESHOLD: f64 = 1e-12;

/// The data vector `ũ`, one entry per sample location.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    values: CVector,
}

impl Observations {
    pub fn new(values: Vec<C64>, samples: &SampleSet) -> Result<Self> {
        if values.len() != samples.len() {
            return Err(Error::Shape(format!(
                "{} observations for {} sample locations",
                values.len(),
                samples.len()
            )));
        }
        Self::from_vector(CVector::from_vec(values))
    }

    pub fn from_vector(values: CVector) -> Result<Self> {
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("observations contain non-finite values".into()));
        }
        Ok(Observations { values })
    }

    pub fn values(&self) -> &CVector {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpikeModel {
    pub locations: Vec<C64>,
    pub weights: Vec<C64>,
}

impl SpikeModel {
    pub fn new(locations: Vec<C64>, weights: Vec<C64>) -> Result<Self> {
        if locations.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} locations but {} weights",
                locations.len(),
                weights.len()
            )));
        }
        Ok(SpikeModel { locations, weights })
    }

    pub fn unit_weights(locations: Vec<C64>) -> Self {
        let weights = vec![C64::new(1.0, 0.0); locations.len()];
        SpikeModel { locations, weights }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Prony,
    #[default]
    Esprit,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prony" => Ok(Estimator::Prony),
            "esprit" => Ok(Estimator::Esprit),
            other => Err(Error::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Leading Prony coefficients vanished, so fewer roots than requested.
    DegreeDropped { expected: usize, found: usize },
    /// The Krylov matrix has numerical rank below `n_x`.
    RankDeficientKrylov { ratio: f64 },
    /// Eigenvalues far outside the reference domain were dropped.
    DiscardedEigenvalues { count: usize },
    /// Coalesced locations; weights are the minimum-norm solution.
    RankDeficientCollocation { rank: usize, n_x: usize },
    /// Refinement never found a descent step.
    NoProgress,
    ZeroData,
    /// No model order reached the noise level.
    OrderNotConverged,
}

/// Locations in reference coordinates, already projected into the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationEstimate {
    pub locations: Vec<C64>,
    pub warnings: Vec<Warning>,
}

/// A kernel, sample set and application domain `X = φ(reference domain)`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a, K: ?Sized> {
    pub kernel: &'a K,
    pub samples: &'a SampleSet,
    pub domain: ReferenceDomain,
    pub map: DomainMap,
}

impl<'a, K: AnalyticKernel + ?Sized> Problem<'a, K> {
    pub fn new(kernel: &'a K, samples: &'a SampleSet, domain: ReferenceDomain, map: DomainMap) -> Self {
        Problem { kernel, samples, domain, map }
    }

    /// `A[j, k] = G(s_j, x_k)`.
    pub fn collocation(&self, locations: &[C64]) -> Result<CMatrix> {
        let s = self.samples.as_slice();
        let mut a = CMatrix::zeros(s.len(), locations.len());
        for (k, &x) in locations.iter().enumerate() {
            for (j, &sj) in s.iter().enumerate() {
                a[(j, k)] = self.kernel.eval(sj, x)?;
            }
        }
        Ok(a)
    }

    pub fn synthesize(&self, model: &SpikeModel) -> Result<Observations> {
        let a = self.collocation(&model.locations)?;
        Observations::from_vector(a * CVector::from_column_slice(&model.weights))
    }

    /// `Σ_j |Σ_k G(s_j, x_k) w_k − ũ_j|²`.
    pub fn objective(&self, u: &Observations, model: &SpikeModel) -> Result<f64> {
        let a = self.collocation(&model.locations)?;
        let r = a * CVector::from_column_slice(&model.weights) - u.values();
        Ok(r.norm_squared())
    }
}

/// `[u, Mu, …, M^ell u]`, built by repeated multiplication.
pub fn krylov(m: &CMatrix, u: &CVector, ell: usize) -> Result<CMatrix> {
    if ell == 0 {
        return Err(Error::InvalidArgument("krylov needs ell >= 1".into()));
    }
    if m.nrows() != m.ncols() || m.ncols() != u.len() {
        return Err(Error::Shape(format!(
            "krylov: {}x{} matrix with vector of length {}",
            m.nrows(),
            m.ncols(),
            u.len()
        )));
    }
    let mut k = CMatrix::zeros(u.len(), ell + 1);
    let mut v = u.clone();
    for i in 0..=ell {
        k.set_column(i, &v);
        if i < ell {
            v = m * &v;
        }
    }
    Ok(k)
}

pub fn default_ell(n_x: usize) -> usize {
    n_x + 1
}

fn far_outside(domain: ReferenceDomain, t: C64) -> bool {
    match domain {
        ReferenceDomain::Disk => t.norm() > 2.0,
        ReferenceDomain::Interval => t.re.abs() > 2.0,
    }
}

fn finish(domain: ReferenceDomain, raw: Vec<C64>, mut warnings: Vec<Warning>) -> LocationEstimate {
    let total = raw.len();
    let locations: Vec<C64> = raw
        .into_iter()
        .filter(|&t| t.re.is_finite() && t.im.is_finite() && !far_outside(domain, t))
        .map(|t| project_to_domain(domain, t))
        .collect();
    if locations.len() < total {
        warnings.push(Warning::DiscardedEigenvalues { count: total - locations.len() });
    }
    LocationEstimate { locations, warnings }
}

fn check_data(u: &CVector) -> Result<()> {
    if u.norm() == 0.0 {
        Err(Error::DegenerateData("observations are identically zero".into()))
    } else {
        Ok(())
    }
}

/// Roots of the polynomial whose coefficients annihilate the Krylov columns
/// in the least-squares sense.
pub fn prony_locations(
    m: &CMatrix,
    u: &Observations,
    n_x: usize,
    domain: ReferenceDomain,
) -> Result<LocationEstimate> {
    if n_x == 0 || u.len() <= n_x {
        return Err(Error::InvalidArgument(format!(
            "prony needs 1 <= n_x < n_s, got n_x = {n_x}, n_s = {}",
            u.len()
        )));
    }
    check_data(u.values())?;
    let k = krylov(m, u.values(), n_x)?;
    let f = svd(&k)?;
    let last = f.v_adjoint.nrows() - 1;
    let mut p: Vec<C64> = f.v_adjoint.row(last).iter().map(|z| z.conj()).collect();
    let biggest = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
    while p.len() > 1 && p.last().unwrap().norm() <= PRONY_TRIM * biggest {
        p.pop();
    }
    let mut warnings = Vec::new();
    if p.len() - 1 < n_x {
        warnings.push(Warning::DegreeDropped { expected: n_x, found: p.len() - 1 });
    }
    let roots = poly_roots(&p)?;
    Ok(finish(domain, roots, warnings))
}

/// Rotational invariance on the row space of the Krylov matrix.
pub fn esprit_locations(
    m: &CMatrix,
    u: &Observations,
    n_x: usize,
    ell: usize,
    domain: ReferenceDomain,
) -> Result<LocationEstimate> {
    if n_x == 0 || ell <= n_x || u.len() < n_x {
        return Err(Error::InvalidArgument(format!(
            "esprit needs 1 <= n_x < ell and n_x <= n_s, got n_x = {n_x}, ell = {ell}, n_s = {}",
            u.len()
        )));
    }
    check_data(u.values())?;
    let k = krylov(m, u.values(), ell)?;
    let f = svd(&k)?;
    let s = &f.singular_values;
    let mut warnings = Vec::new();
    let ratio = s[n_x - 1] / s[0];
    if ratio < RANK_WARNING {
        warnings.push(Warning::RankDeficientKrylov { ratio });
    }
    let v = f.v_adjoint.rows(0, n_x);
    let z0 = v.columns(0, ell).into_owned();
    let z1 = v.columns(1, ell).into_owned();
    let pencil = z1 * pinv_thresholded(&z0, ESPRIT_PINV_THRESHOLD)?;
    Ok(finish(domain, eig(&pencil)?, warnings))
}

/// Least-squares weights for fixed locations in `X`.
pub fn recover_weights<K: AnalyticKernel + ?Sized>(
    problem: &Problem<'_, K>,
    u: &Observations,
    locations: &[C64],
) -> Result<(Vec<C64>, Vec<Warning>)> {
    if locations.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let a = problem.collocation(locations)?;
    let mut warnings = Vec::new();
    let rank = svd(&a)?.rank_above(LSTSQ_RELATIVE_THRESHOLD);
    if rank < locations.len() {
        warnings.push(Warning::RankDeficientCollocation { rank, n_x: locations.len() });
    }
    let w = lstsq(&a, u.values())?;
    Ok((w.iter().copied().collect(), warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub estimator: Estimator,
    pub n_x: usize,
    /// Krylov depth for ESPRIT; `None` means [`default_ell`].
    pub ell: Option<usize>,
    pub refine: RefineOptions,
}

impl RecoveryOptions {
    pub fn new(estimator: Estimator, n_x: usize) -> Self {
        RecoveryOptions { estimator, n_x, ell: None, refine: RefineOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub raw: SpikeModel,
    pub refined: SpikeModel,
    pub residual_raw: f64,
    pub residual_refined: f64,
    pub method: Estimator,
    pub eigenmatrix: EigenmatrixSummary,
    pub warnings: Vec<Warning>,
}

/// Estimate locations with `e`, fit weights, then refine.
pub fn recover<K: AnalyticKernel + ?Sized>(
    problem: &Problem<'_, K>,
    e: &Eigenmatrix,
    u: &Observations,
    opts: &RecoveryOptions,
) -> Result<RecoveryResult> {
    if u.len() != e.n_s() || u.len() != problem.samples.len() {
        return Err(Error::Shape(format!(
            "{} observations, {} samples, eigenmatrix of size {}",
            u.len(),
            problem.samples.len(),
            e.n_s()
        )));
    }
    let estimate = match opts.estimator {
        Estimator::Prony => prony_locations(&e.matrix, u, opts.n_x, problem.domain)?,
        Estimator::Esprit => {
            let ell = opts.ell.unwrap_or_else(|| default_ell(opts.n_x));
            esprit_locations(&e.matrix, u, opts.n_x, ell, problem.domain)?
        }
    };
    let mut warnings = estimate.warnings;
    let x_raw: Vec<C64> = estimate
        .locations
        .iter()
        .map(|&t| map_forward(&problem.map, t))
        .collect();
    let (w_raw, w_warnings) = recover_weights(problem, u, &x_raw)?;
    warnings.extend(w_warnings);
    let raw = SpikeModel::new(x_raw, w_raw)?;
    let residual_raw = problem.objective(u, &raw)?;

    let outcome = refine(problem, u, &raw.locations, &opts.refine)?;
    if outcome.no_progress && residual_raw > 0.0 {
        warnings.push(Warning::NoProgress);
    }
    Ok(RecoveryResult {
        raw,
        refined: outcome.model,
        residual_raw,
        residual_refined: outcome.objective,
        method: opts.estimator,
        eigenmatrix: e.summary(),
        warnings,
    })
}

#[cfg(test)]
pub(crate) mod oracles {
    //! Classical Prony and ESPRIT on the Hankel matrix of equispaced data
    //! `u_j = Σ w_k x_k^j`.

    use super::*;

    pub fn hankel(u: &[C64], rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |i, j| u[i + j])
    }

    pub fn hankel_prony(u: &[C64], n_x: usize) -> Vec<C64> {
        let h = hankel(u, u.len() - n_x, n_x + 1);
        let f = svd(&h).unwrap();
        let p: Vec<C64> = f.v_adjoint.row(n_x).iter().map(|z| z.conj()).collect();
        poly_roots(&p).unwrap()
    }

    pub fn hankel_esprit(u: &[C64], n_x: usize, ell: usize) -> Vec<C64> {
        let h = hankel(u, u.len() - ell, ell + 1);
        let f = svd(&h).unwrap();
        let v = f.v_adjoint.rows(0, n_x);
        let z0 = v.columns(0, ell).into_owned();
        let z1 = v.columns(1, ell).into_owned();
        eig(&(z1 * pinv_thresholded(&z0, 1e-12).unwrap())).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainMap;
    use crate::eigenmatrix::build;
    use crate::kernels::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Max distance after optimal matching, for small sets.
    fn set_distance(a: &[C64], b: &[C64]) -> f64 {
        assert_eq!(a.len(), b.len());
        fn go(a: &[C64], b: &mut Vec<C64>, i: usize, cur: f64, best: &mut f64) {
            if i == a.len() {
                *best = best.min(cur);
                return;
            }
            for j in i..b.len() {
                b.swap(i, j);
                go(a, b, i + 1, cur.max((a[i] - b[i]).norm()), best);
                b.swap(i, j);
            }
        }
        let mut best = f64::INFINITY;
        go(a, &mut b.to_vec(), 0, 0.0, &mut best);
        best
    }

    fn shift(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| if j == i + 1 { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn krylov_examples() {
        let u = CVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)]);
        let k = krylov(&CMatrix::identity(3, 3), &u, 2).unwrap();
        for i in 0..3 {
            assert_eq!(k.column(i), u.column(0));
        }
        let k = krylov(&CMatrix::zeros(3, 3), &u, 1).unwrap();
        assert_eq!(k.column(0), u.column(0));
        assert!(k.column(1).iter().all(|z| z.norm() == 0.0));

        let mut e = CVector::zeros(4);
        e[3] = c(1.0, 0.0);
        let k = krylov(&shift(4), &e, 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if j == 3 - i { 1.0 } else { 0.0 };
                assert_eq!(k[(j, i)], c(want, 0.0));
            }
        }
        assert!(krylov(&shift(4), &e, 0).is_err());
    }

    fn power_problem() -> (SampleSet, Eigenmatrix) {
        let s = SampleSet::from_real(&(0..32).map(|j| j as f64).collect::<Vec<_>>()).unwrap();
        let e = build(&Kernel::Power, &s, ReferenceDomain::Disk, &DomainMap::Identity, 32, 3.0).unwrap();
        (s, e)
    }

    fn power_data(x: &[C64]) -> Vec<C64> {
        (0..32)
            .map(|j| x.iter().map(|xk| xk.powi(j)).sum())
            .collect()
    }

    #[test]
    fn structured_case_matches_hankel_oracles() {
        let (s, e) = power_problem();
        let truth = [
            C64::from_polar(1.0, 2.0 * PI * 5.0 / 32.0),
            C64::from_polar(1.0, -2.0 * PI * 7.0 / 32.0),
        ];
        let data = power_data(&truth);
        let u = Observations::new(data.clone(), &s).unwrap();
        let prony = prony_locations(&e.matrix, &u, 2, ReferenceDomain::Disk).unwrap();
        let classical = oracles::hankel_prony(&data, 2);
        assert!(set_distance(&prony.locations, &classical) <= 1e-8);
        assert!(set_distance(&prony.locations, &truth) <= 1e-8);

        let esprit = esprit_locations(&e.matrix, &u, 2, 3, ReferenceDomain::Disk).unwrap();
        let classical = oracles::hankel_esprit(&data, 2, 3);
        assert!(set_distance(&esprit.locations, &classical) <= 1e-8);
    }

    #[test]
    fn esprit_eigenvalues_are_invariant_under_unitary_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = [c(0.3, 0.2), c(-0.5, 0.1), c(0.1, -0.6)];
        let v = CMatrix::from_fn(3, 6, |i, j| x[i].powi(j as i32));
        let raw = CMatrix::from_fn(3, 3, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let q = svd(&raw).unwrap().u;
        let eigs = |v: &CMatrix| {
            let z0 = v.columns(0, 5).into_owned();
            let z1 = v.columns(1, 5).into_owned();
            eig(&(z1 * pinv_thresholded(&z0, 1e-12).unwrap())).unwrap()
        };
        let a = eigs(&v);
        let b = eigs(&(&q * &v));
        assert!(set_distance(&a, &b) <= 1e-10);
        assert!(set_distance(&a, &x) <= 1e-10);
    }

    fn annulus(seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleSet::new(
            (0..40)
                .map(|_| C64::from_polar(rng.random_range(1.2..2.2), rng.random_range(0.0..2.0 * PI)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_cauchy_spike() {
        let s = annulus(0);
        let p = Problem::new(&Kernel::Cauchy, &s, ReferenceDomain::Disk, DomainMap::Identity);
        let e = build(&Kernel::Cauchy, &s, ReferenceDomain::Disk, &DomainMap::Identity, 32, 3.0).unwrap();
        let u = p.synthesize(&SpikeModel::unit_weights(vec![c(0.5, 0.0)])).unwrap();
        let pr = prony_locations(&e.matrix, &u, 1, ReferenceDomain::Disk).unwrap();
        assert_eq!(pr.locations.len(), 1);
        assert!((pr.locations[0] - c(0.5, 0.0)).norm() <= 1e-6, "{}", pr.locations[0]);
        let es = esprit_locations(&e.matrix, &u, 1, 2, ReferenceDomain::Disk).unwrap();
        assert!((es.locations[0] - c(0.5, 0.0)).norm() <= 1e-6, "{}", es.locations[0]);
    }

    #[test]
    fn fourier_two_spikes_esprit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<f64> = (0..128).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s = SampleSet::from_real(&pts).unwrap();
        let p = Problem::new(&Kernel::Fourier, &s, ReferenceDomain::Interval, DomainMap::Identity);
        let e = build(&Kernel::Fourier, &s, ReferenceDomain::Interval, &DomainMap::Identity, 22, 3.0).unwrap();
        let truth = vec![c(-0.4, 0.0), c(0.35, 0.0)];
        let u = p.synthesize(&SpikeModel::unit_weights(truth.clone())).unwrap();
        let es = esprit_locations(&e.matrix, &u, 2, 3, ReferenceDomain::Interval).unwrap();
        // raw accuracy is capped by the eigen-residual, about 1e-2 here
        assert!(set_distance(&es.locations, &truth) <= 5e-2, "{:?}", es.locations);
        assert!(es.locations.iter().all(|t| t.im == 0.0));
        let r = recover(&p, &e, &u, &RecoveryOptions::new(Estimator::Esprit, 2)).unwrap();
        assert!(set_distance(&r.refined.locations, &truth) <= 1e-8);
    }

    #[test]
    fn zero_data_is_degenerate() {
        let (s, e) = power_problem();
        let u = Observations::new(vec![c(0.0, 0.0); 32], &s).unwrap();
        assert!(matches!(
            prony_locations(&e.matrix, &u, 2, ReferenceDomain::Disk),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            esprit_locations(&e.matrix, &u, 2, 3, ReferenceDomain::Disk),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn overestimated_order_warns() {
        let (s, _) = power_problem();
        let u = Observations::new(power_data(&[c(0.5, 0.0)]), &s).unwrap();
        // M = I collapses the Krylov matrix to rank one
        let es = esprit_locations(&CMatrix::identity(32, 32), &u, 3, 4, ReferenceDomain::Disk).unwrap();
        assert!(es.warnings.iter().any(|w| matches!(w, Warning::RankDeficientKrylov { .. })));
    }

    #[test]
    fn argument_checks() {
        let (s, e) = power_problem();
        let u = Observations::new(power_data(&[c(0.5, 0.0)]), &s).unwrap();
        assert!(esprit_locations(&e.matrix, &u, 2, 2, ReferenceDomain::Disk).is_err());
        assert!(prony_locations(&e.matrix, &u, 0, ReferenceDomain::Disk).is_err());
        assert!(Observations::new(vec![c(1.0, 0.0)], &s).is_err());
        assert!(SpikeModel::new(vec![c(0.0, 0.0)], vec![]).is_err());
    }

    #[test]
    fn far_eigenvalues_are_discarded_and_near_ones_projected() {
        let est = finish(
            ReferenceDomain::Disk,
            vec![c(3.0, 0.0), c(1.05, 0.0), c(0.2, 0.0)],
            Vec::new(),
        );
        assert_eq!(est.locations, vec![c(1.0, 0.0), c(0.2, 0.0)]);
        assert_eq!(est.warnings, vec![Warning::DiscardedEigenvalues { count: 1 }]);
        let est = finish(ReferenceDomain::Interval, vec![c(0.3, 0.01), c(-2.5, 0.0)], Vec::new());
        assert_eq!(est.locations, vec![c(0.3, 0.0)]);
    }

    #[test]
    fn weight_examples() {
        let s = annulus(1);
        let p = Problem::new(&Kernel::Cauchy, &s, ReferenceDomain::Disk, DomainMap::Identity);
        let truth = vec![c(0.1, 0.2), c(-0.4, -0.3), c(0.5, -0.1)];
        let u = p.synthesize(&SpikeModel::unit_weights(truth.clone())).unwrap();
        let (w, warn) = recover_weights(&p, &u, &truth).unwrap();
        assert!(warn.is_empty());
        assert!(w.iter().all(|w| (w - c(1.0, 0.0)).norm() <= 1e-10));

        // residual is orthogonal to the collocation columns
        let x = vec![c(0.0, 0.1), c(0.3, 0.3)];
        let (w, _) = recover_weights(&p, &u, &x).unwrap();
        let a = p.collocation(&x).unwrap();
        let r = &a * CVector::from_vec(w) - u.values();
        let proj = a.adjoint() * &r;
        assert!(proj.norm() <= 1e-10 * a.norm() * u.norm());

        let zero = Observations::new(vec![c(0.0, 0.0); 40], &s).unwrap();
        let (w, _) = recover_weights(&p, &zero, &truth).unwrap();
        assert!(w.iter().all(|w| w.norm() == 0.0));

        let one = SampleSet::new(vec![c(2.0, 0.0)]).unwrap();
        let p1 = Problem::new(&Kernel::Cauchy, &one, ReferenceDomain::Disk, DomainMap::Identity);
        let u1 = Observations::new(vec![c(3.0, 1.0)], &one).unwrap();
        let (w, _) = recover_weights(&p1, &u1, &[c(0.5, 0.0)]).unwrap();
        let g = Kernel::Cauchy.eval(c(2.0, 0.0), c(0.5, 0.0)).unwrap();
        assert!((w[0] - c(3.0, 1.0) / g).norm() <= 1e-14);

        let (_, warn) = recover_weights(&p, &u, &[c(0.2, 0.0), c(0.2, 0.0)]).unwrap();
        assert!(matches!(warn[0], Warning::RankDeficientCollocation { rank: 1, n_x: 2 }));
    }

    #[test]
    fn recover_end_to_end_noiseless() {
        let s = annulus(2);
        let p = Problem::new(&Kernel::Cauchy, &s, ReferenceDomain::Disk, DomainMap::Identity);
        let e = build(&Kernel::Cauchy, &s, ReferenceDomain::Disk, &DomainMap::Identity, 32, 3.0).unwrap();
        let truth = vec![c(0.1, 0.5), c(-0.5, -0.3), c(0.6, -0.2)];
        let u = p.synthesize(&SpikeModel::unit_weights(truth.clone())).unwrap();
        for est in [Estimator::Esprit, Estimator::Prony] {
            let r = recover(&p, &e, &u, &RecoveryOptions::new(est, 3)).unwrap();
            assert!(r.residual_refined <= r.residual_raw + 1e-9);
            assert!(set_distance(&r.refined.locations, &truth) <= 1e-8, "{est:?}");
            assert!(set_distance(&r.raw.locations, &truth) <= 1e-2, "{est:?}");
        }
    }
}
