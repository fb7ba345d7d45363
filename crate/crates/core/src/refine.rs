//! Nonlinear least-squares polishing of spike locations (weights are
//! eliminated at every iterate) and model-order selection.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{map_forward, project_in_image, ReferenceDomain};
use crate::eigenmatrix::Eigenmatrix;
use crate::error::{Error, Result};
use crate::kernels::AnalyticKernel;
use crate::numerics::{lstsq, svd, CMatrix, CVector, C64, LSTSQ_RELATIVE_THRESHOLD};
use crate::recovery::{
    recover, Observations, Problem, RecoveryOptions, RecoveryResult, SpikeModel, Warning,
};

const MAX_DAMPING: f64 = 1e16;
const MIN_DAMPING: f64 = 1e-15;
/// Relative objective floor `(ORDER_FLOOR · ‖ũ‖)²` so that noiseless data
/// still has an attainable target in the model-order sweep.
pub const ORDER_FLOOR: f64 = 1e-8;
pub const DEFAULT_NOISE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    pub max_iterations: usize,
    /// Stop once `‖Jᵀr‖ ≤ gradient_tolerance · ‖J‖_F · ‖r‖`.
    pub gradient_tolerance: f64,
    /// Stop once an accepted step moves the locations by at most
    /// `step_tolerance · (1 + ‖x‖)`.
    pub step_tolerance: f64,
    pub damping_init: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            damping_init: 1e-3,
        }
    }
}

impl RefineOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && [self.gradient_tolerance, self.step_tolerance, self.damping_init]
                .iter()
                .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("refine options must all be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub model: SpikeModel,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    /// No descent step was found and the start was not already stationary.
    pub no_progress: bool,
}

pub fn kernel_x_derivative<K: AnalyticKernel + ?Sized>(kernel: &K, s: C64, x: C64) -> Result<C64> {
    kernel.x_derivative(s, x)
}

struct State {
    x: Vec<C64>,
    a: CMatrix,
    w: CVector,
    r: CVector,
    f: f64,
}

fn evaluate<K: AnalyticKernel + ?Sized>(
    problem: &Problem<'_, K>,
    u: &Observations,
    x: Vec<C64>,
) -> Result<State> {
    let a = problem.collocation(&x)?;
    let w = lstsq(&a, u.values())?;
    let r = &a * &w - u.values();
    let f = r.norm_squared();
    if !f.is_finite() {
        return Err(Error::NonFinite { op: "refine objective" });
    }
    Ok(State { x, a, w, r, f })
}

/// Real Jacobian of the stacked residual `[Re r; Im r]` with respect to the
/// location parameters: `Re x` only on the interval, `(Re x, Im x)` on the disk.
fn jacobian<K: AnalyticKernel + ?Sized>(problem: &Problem<'_, K>, st: &State) -> Result<DMatrix<f64>> {
    let s = problem.samples.as_slice();
    let n_s = s.len();
    let n_x = st.x.len();
    let mut d = CMatrix::zeros(n_s, n_x);
    for (k, &xk) in st.x.iter().enumerate() {
        for (j, &sj) in s.iter().enumerate() {
            d[(j, k)] = problem.kernel.x_derivative(sj, xk)? * st.w[k];
        }
    }
    // drop the component inside range(A), which the inner lstsq absorbs
    let f = svd(&st.a)?;
    let q = f.u.columns(0, f.rank_above(LSTSQ_RELATIVE_THRESHOLD)).into_owned();
    let j = &d - &q * (q.adjoint() * &d);
    let real = problem.domain == ReferenceDomain::Interval;
    let cols = if real { n_x } else { 2 * n_x };
    let mut jr = DMatrix::zeros(2 * n_s, cols);
    for k in 0..n_x {
        for i in 0..n_s {
            let z = j[(i, k)];
            jr[(i, k)] = z.re;
            jr[(n_s + i, k)] = z.im;
            if !real {
                // ∂r/∂(Im x) = i·J
                jr[(i, n_x + k)] = -z.im;
                jr[(n_s + i, n_x + k)] = z.re;
            }
        }
    }
    Ok(jr)
}

fn stacked(r: &CVector) -> DVector<f64> {
    let n = r.len();
    DVector::from_fn(2 * n, |i, _| if i < n { r[i].re } else { r[i - n].im })
}

/// Damped Gauss–Newton on `Σ_j |Σ_k G(s_j, x_k) w_k − ũ_j|²` with the
/// weights solved exactly at each iterate. Iterates are projected into `X`.
pub fn refine<K: AnalyticKernel + ?Sized>(
    problem: &Problem<'_, K>,
    u: &Observations,
    init: &[C64],
    opts: &RefineOptions,
) -> Result<RefineOutcome> {
    opts.validate()?;
    let project = |x: C64| project_in_image(problem.domain, &problem.map, x);
    let start: Vec<C64> = init.iter().map(|&x| project(x)).collect();
    let mut st = evaluate(problem, u, start)?;
    let initial_objective = st.f;
    let n_x = st.x.len();
    let real = problem.domain == ReferenceDomain::Interval;

    let mut lambda = opts.damping_init;
    let mut iterations = 0;
    let mut accepted_steps = 0;
    let mut stationary = n_x == 0 || st.f == 0.0;
    while !stationary && iterations < opts.max_iterations {
        iterations += 1;
        let jr = match jacobian(problem, &st) {
            Ok(j) => j,
            Err(_) => break,
        };
        let rr = stacked(&st.r);
        let g = jr.transpose() * &rr;
        if g.norm() <= opts.gradient_tolerance * jr.norm() * rr.norm() {
            stationary = true;
            break;
        }
        let h = jr.transpose() * &jr;
        let diag_floor = 1e-12 * h.diagonal().max().max(f64::MIN_POSITIVE);

        let mut accepted = None;
        while lambda <= MAX_DAMPING {
            let mut damped = h.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * h[(i, i)].max(diag_floor);
            }
            let Some(chol) = Cholesky::new(damped) else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<C64> = (0..n_x)
                .map(|k| {
                    let dx = if real { C64::new(step[k], 0.0) } else { C64::new(step[k], step[n_x + k]) };
                    project(st.x[k] + dx)
                })
                .collect();
            match evaluate(problem, u, trial) {
                Ok(next) if next.f < st.f => {
                    accepted = Some(next);
                    lambda = (lambda / 10.0).max(MIN_DAMPING);
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        let Some(next) = accepted else { break };
        accepted_steps += 1;
        let moved = next
            .x
            .iter()
            .zip(&st.x)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 + st.x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        st = next;
        if moved <= opts.step_tolerance * scale || st.f == 0.0 {
            stationary = true;
        }
    }

    Ok(RefineOutcome {
        objective: st.f,
        model: SpikeModel {
            locations: st.x,
            weights: st.w.iter().copied().collect(),
        },
        initial_objective,
        iterations,
        accepted_steps,
        no_progress: accepted_steps == 0 && !stationary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub n_x: usize,
    pub result: RecoveryResult,
    /// Refined objective for `n = 1..=n_max`; `None` where recovery failed.
    pub objectives: Vec<Option<f64>>,
    pub threshold: f64,
    pub converged: bool,
    pub zero_data: bool,
}

/// Smallest `n ≤ n_max` whose refined objective is within the noise level
/// `(noise_factor · σ · ‖ũ‖)²`.
pub fn select_model_order<K: AnalyticKernel + ?Sized>(
    problem: &Problem<'_, K>,
    e: &Eigenmatrix,
    u: &Observations,
    sigma_estimate: f64,
    n_max: usize,
    base: &RecoveryOptions,
    noise_factor: f64,
) -> Result<OrderSelection> {
    if n_max == 0 || 2 * n_max > u.len() {
        return Err(Error::InvalidArgument(format!(
            "model-order sweep needs 1 <= n_max <= n_s/2, got n_max = {n_max}, n_s = {}",
            u.len()
        )));
    }
    if !(sigma_estimate >= 0.0) || !(noise_factor > 0.0) {
        return Err(Error::InvalidArgument(
            "sigma estimate must be nonnegative and the noise factor positive".into(),
        ));
    }
    let unorm = u.norm();
    if unorm == 0.0 {
        let x0 = map_forward(&problem.map, C64::new(0.0, 0.0));
        let model = SpikeModel::new(vec![x0], vec![C64::new(0.0, 0.0)])?;
        return Ok(OrderSelection {
            n_x: 1,
            result: RecoveryResult {
                raw: model.clone(),
                refined: model,
                residual_raw: 0.0,
                residual_refined: 0.0,
                method: base.estimator,
                eigenmatrix: e.summary(),
                warnings: vec![Warning::ZeroData],
            },
            objectives: vec![Some(0.0)],
            threshold: 0.0,
            converged: true,
            zero_data: true,
        });
    }

    let threshold = (noise_factor * sigma_estimate * unorm).max(ORDER_FLOOR * unorm).powi(2);
    let runs: Vec<Option<RecoveryResult>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let opts = RecoveryOptions { n_x: n, ell: None, ..base.clone() };
            recover(problem, e, u, &opts).ok()
        })
        .collect();
    let objectives: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().map(|r| r.residual_refined)).collect();

    let hit = objectives
        .iter()
        .position(|f| matches!(f, Some(f) if *f <= threshold));
    let (index, converged) = match hit {
        Some(i) => (i, true),
        None => {
            let best = objectives
                .iter()
                .enumerate()
                .filter_map(|(i, f)| f.map(|f| (i, f)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .ok_or_else(|| Error::DegenerateData("recovery failed for every model order".into()))?;
            (best, false)
        }
    };
    let mut result = runs.into_iter().nth(index).flatten().expect("selected run succeeded");
    if !converged {
        result.warnings.push(Warning::OrderNotConverged);
    }
    Ok(OrderSelection {
        n_x: index + 1,
        result,
        objectives,
        threshold,
        converged,
        zero_data: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainMap;
    use crate::eigenmatrix::build;
    use crate::kernels::{Kernel, SampleSet};
    use crate::recovery::Estimator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
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

    fn uniform(seed: u64, n: usize, lo: f64, hi: f64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleSet::from_real(&(0..n).map(|_| rng.random_range(lo..hi)).collect::<Vec<_>>()).unwrap()
    }

    fn max_err(a: &[C64], b: &[C64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        let key = |z: &C64| (z.re, z.im);
        a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn derivative_examples() {
        let d = kernel_x_derivative(&Kernel::Cauchy, c(2.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!((d - c(0.25, 0.0)).norm() < 1e-16);
        let d = kernel_x_derivative(&Kernel::Fourier, c(0.0, 0.0), c(0.37, 0.0)).unwrap();
        assert_eq!(d.norm(), 0.0);
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let s = annulus(3);
        let p = Problem::new(&Kernel::Cauchy, &s, ReferenceDomain::Disk, DomainMap::Identity);
        let truth = vec![c(0.2, 0.3), c(-0.4, 0.1), c(0.1, -0.5)];
        let u = p.synthesize(&SpikeModel::unit_weights(truth.clone())).unwrap();
        let out = refine(&p, &u, &truth, &RefineOptions::default()).unwrap();
        assert!(max_err(&out.model.locations, &truth) <= 1e-10);
        assert!(out.objective <= 1e-20 * u.norm().powi(2));
        assert!(!out.no_progress);
    }

    #[test]
    fn perturbed_truth_converges_disk_and_interval() {
        let s = annulus(4);
        let p = Problem::new(&Kernel::Cauchy, &s, ReferenceDomain::Disk, DomainMap::Identity);
        let truth = vec![c(0.2, 0.3), c(-0.4, 0.1), c(0.1, -0.5)];
        let u = p.synthesize(&SpikeModel::unit_weights(truth.clone())).unwrap();
        let init: Vec<C64> = truth.iter().map(|x| x + c(1e-3, -1e-3)).collect();
        let out = refine(&p, &u, &init, &RefineOptions::default()).unwrap();
        assert!(max_err(&out.model.locations, &truth) <= 1e-8);
        assert!(out.objective <= out.initial_objective + 1e-12);

        let s = uniform(5, 100, -5.0, 5.0);
        let k = Kernel::Lorentzian { gamma: 4.0 };
        let p = Problem::new(&k, &s, ReferenceDomain::Interval, DomainMap::Identity);
        let truth = vec![c(-0.6, 0.0), c(0.0, 0.0), c(0.5, 0.0)];
        let u = p.synthesize(&SpikeModel::unit_weights(truth.clone())).unwrap();
        let init: Vec<C64> = truth.iter().map(|x| x + 1e-3).collect();
        let out = refine(&p, &u, &init, &RefineOptions::default()).unwrap();
        assert!(max_err(&out.model.locations, &truth) <= 1e-8);
        assert!(out.model.locations.iter().all(|x| x.im == 0.0));
        assert!(out.model.weights.iter().all(|w| (w - c(1.0, 0.0)).norm() <= 1e-8));
    }

    #[test]
    fn objective_is_fresh_and_monotone_under_noise() {
        let s = uniform(6, 128, -5.0, 5.0);
        let p = Problem::new(&Kernel::Fourier, &s, ReferenceDomain::Interval, DomainMap::Identity);
        let truth = vec![c(-0.5, 0.0), c(0.2, 0.0), c(0.7, 0.0)];
        let exact = p.synthesize(&SpikeModel::unit_weights(truth.clone())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noisy: Vec<C64> = exact
            .values()
            .iter()
            .map(|v| v * (1.0 + 1e-2 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let u = Observations::new(noisy, &s).unwrap();
        let init: Vec<C64> = truth.iter().map(|x| x + 0.02).collect();
        let out = refine(&p, &u, &init, &RefineOptions::default()).unwrap();
        assert!(out.objective <= out.initial_objective + 1e-12);
        let again = p.objective(&u, &out.model).unwrap();
        assert!((again - out.objective).abs() <= 1e-12 * again.max(f64::MIN_POSITIVE));
        assert!(max_err(&out.model.locations, &truth) <= 1e-2);
    }

    #[test]
    fn iterates_stay_in_the_domain() {
        let s = annulus(7);
        let p = Problem::new(&Kernel::Cauchy, &s, ReferenceDomain::Disk, DomainMap::Identity);
        // the best single-spike fit for a spike near the rim can leave the disk
        let u = p.synthesize(&SpikeModel::unit_weights(vec![c(0.99, 0.0), c(0.98, 0.05)])).unwrap();
        let out = refine(&p, &u, &[c(0.9, 0.0)], &RefineOptions::default()).unwrap();
        assert!(out.model.locations[0].norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn options_validate() {
        assert!(RefineOptions::default().validate().is_ok());
        let bad = RefineOptions { damping_init: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RefineOptions { max_iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn fourier_setup(seed: u64) -> (SampleSet, Eigenmatrix) {
        let s = uniform(seed, 128, -5.0, 5.0);
        let e = build(&Kernel::Fourier, &s, ReferenceDomain::Interval, &DomainMap::Identity, 22, 3.0).unwrap();
        (s, e)
    }

    #[test]
    fn model_order_noiseless_three_spikes() {
        let (s, e) = fourier_setup(11);
        let p = Problem::new(&Kernel::Fourier, &s, ReferenceDomain::Interval, DomainMap::Identity);
        let truth = vec![c(-0.6, 0.0), c(0.05, 0.0), c(0.55, 0.0)];
        let u = p.synthesize(&SpikeModel::unit_weights(truth)).unwrap();
        let base = RecoveryOptions::new(Estimator::Esprit, 1);
        let sel = select_model_order(&p, &e, &u, 0.0, 8, &base, DEFAULT_NOISE_FACTOR).unwrap();
        assert_eq!(sel.n_x, 3, "{:?}", sel.objectives);
        assert!(sel.converged);
        let f2 = sel.objectives[1].unwrap();
        let f3 = sel.objectives[2].unwrap();
        assert!(f3 <= 1e-6 * f2);

        let serial: Vec<Option<f64>> = (1..=8)
            .map(|n| recover(&p, &e, &u, &RecoveryOptions::new(Estimator::Esprit, n)).ok().map(|r| r.residual_refined))
            .collect();
        assert_eq!(serial, sel.objectives);
    }

    #[test]
    fn model_order_zero_data() {
        let (s, e) = fourier_setup(12);
        let p = Problem::new(&Kernel::Fourier, &s, ReferenceDomain::Interval, DomainMap::Identity);
        let u = Observations::new(vec![c(0.0, 0.0); 128], &s).unwrap();
        let base = RecoveryOptions::new(Estimator::Esprit, 1);
        let sel = select_model_order(&p, &e, &u, 1e-3, 4, &base, 2.0).unwrap();
        assert_eq!(sel.n_x, 1);
        assert!(sel.zero_data);
        assert!(sel.result.refined.weights.iter().all(|w| w.norm() == 0.0));
        assert!(select_model_order(&p, &e, &u, 1e-3, 65, &base, 2.0).is_err());
    }
}
