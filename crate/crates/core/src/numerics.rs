//! Dense complex linear algebra used by the rest of the crate.
//!
//! Every factorization goes through this module so the callers only see
//! semantic operations (SVD, thresholded pseudoinverse, eigenvalues, least
//! squares, polynomial roots). The heavy lifting is delegated to `nalgebra`.

use nalgebra::{linalg::Schur, DMatrix, DVector, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative singular-value cutoff used by [`lstsq`].
pub const LSTSQ_RELATIVE_THRESHOLD: f64 = 1e-12;

/// Thin singular value decomposition `A = U diag(s) V*`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × k` left singular vectors, `k = min(rows, cols)`.
    pub u: CMatrix,
    /// Nonincreasing singular values.
    pub singular_values: Vec<f64>,
    /// `k × cols` conjugate-transposed right singular vectors.
    pub v_adjoint: CMatrix,
}

impl SvdResult {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values strictly above `threshold · s₁`.
    pub fn rank_above(&self, threshold: f64) -> usize {
        let cut = threshold * self.largest();
        self.singular_values.iter().filter(|&&s| s > cut && s > 0.0).count()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.v_adjoint
    }

    /// `V diag(1/sᵢ) U*` keeping only `sᵢ > threshold · s₁`.
    pub fn pinv(&self, threshold: f64) -> CMatrix {
        let keep = self.rank_above(threshold);
        self.pinv_rank(keep)
    }

    /// Pseudoinverse restricted to the `keep` largest singular triplets.
    pub fn pinv_rank(&self, keep: usize) -> CMatrix {
        let rows = self.v_adjoint.ncols();
        let cols = self.u.nrows();
        if keep == 0 {
            return CMatrix::zeros(rows, cols);
        }
        let mut v = self.v_adjoint.rows(0, keep).adjoint();
        for j in 0..keep {
            v.column_mut(j).unscale_mut(self.singular_values[j]);
        }
        v * self.u.columns(0, keep).adjoint()
    }
}

fn check_finite(a: &CMatrix, op: &'static str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Shape(format!("{op}: empty matrix")));
    }
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn iteration_cap(n: usize) -> usize {
    1000 + 200 * n
}

pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    check_finite(a, "svd")?;
    let k = a.nrows().min(a.ncols());
    let dec = SVD::try_new(a.clone(), true, true, f64::EPSILON, iteration_cap(k))
        .ok_or(Error::NonConvergence { op: "svd" })?;
    let u = dec.u.ok_or(Error::NonConvergence { op: "svd" })?;
    let v_adjoint = dec.v_t.ok_or(Error::NonConvergence { op: "svd" })?;
    let singular_values: Vec<f64> = dec.singular_values.iter().copied().collect();
    // nalgebra sorts already; the 2x2/3x3 special paths are ordered too, but
    // check rather than trust it.
    debug_assert!(singular_values.windows(2).all(|w| w[0] >= w[1]));
    Ok(SvdResult {
        u,
        singular_values,
        v_adjoint,
    })
}

/// Singular values only.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    check_finite(a, "svd")?;
    let k = a.nrows().min(a.ncols());
    let dec = SVD::try_new(a.clone(), false, false, f64::EPSILON, iteration_cap(k))
        .ok_or(Error::NonConvergence { op: "svd" })?;
    let mut s: Vec<f64> = dec.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Pseudoinverse with a threshold relative to the largest singular value.
///
/// When no singular value survives the cut the zero matrix is returned;
/// callers that care record that in their own metadata.
pub fn pinv_thresholded(a: &CMatrix, threshold: f64) -> Result<CMatrix> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pinv threshold must be nonnegative, got {threshold}"
        )));
    }
    Ok(svd(a)?.pinv(threshold))
}

/// All eigenvalues of a square matrix, with multiplicity, in no particular order.
pub fn eig(a: &CMatrix) -> Result<Vec<C64>> {
    check_finite(a, "eig")?;
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "eig needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, iteration_cap(n))
        .ok_or(Error::NonConvergence { op: "eig" })?;
    // Complex Schur form is upper triangular: the eigenvalues sit on the diagonal.
    let (_, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence { op: "eig" });
    }
    Ok(values)
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
pub fn lstsq(a: &CMatrix, b: &CVector) -> Result<CVector> {
    if a.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "lstsq: matrix has {} rows but right-hand side has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    Ok(svd(a)?.pinv(LSTSQ_RELATIVE_THRESHOLD) * b)
}

/// Roots of `c₀ + c₁x + … + c_d x^d` as eigenvalues of the companion matrix.
///
/// Exact trailing zeros (highest degree) are dropped before the degree is
/// decided.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let degree = match coeffs.iter().rposition(|c| *c != C64::new(0.0, 0.0)) {
        Some(d) => d,
        None => return Err(Error::DegeneratePolynomial("zero polynomial".into())),
    };
    if degree == 0 {
        return Err(Error::DegeneratePolynomial(
            "constant polynomial has no roots".into(),
        ));
    }
    if coeffs[..=degree].iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::DegeneratePolynomial("non-finite coefficient".into()));
    }
    let lead = coeffs[degree];
    let mut companion = CMatrix::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -coeffs[i] / lead;
    }
    eig(&companion)
}

/// Evaluate `c₀ + c₁x + …` by Horner's rule.
pub fn poly_eval(coeffs: &[C64], x: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, c| acc * x + c)
}
