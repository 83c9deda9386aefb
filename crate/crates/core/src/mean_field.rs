//! Closed-form approximation of mean-field consistency equations.
//!
//! A single consistency system has the form
//!
//! ```text
//! phi = sigmoid(A (2 phi - 1) + b)
//! ```
//!
//! with `A` a symmetric `d x d` matrix and `b` a `d`-vector. The arguments are
//! scaled by `lambda` so that every sigmoid input stays inside `[-c, c]`, the
//! sigmoid is replaced by its least-squares line on that interval, and the
//! resulting linear system is solved directly. The solution is then stretched
//! back onto `[-c, c]` and squashed into marginals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Upper limit on the approximation half-interval. Below it the invertibility
/// condition `2 c1 < 1 / c` holds for the fitted slope.
pub const MAX_BOUND: f64 = 2.5997;

/// Default approximation half-interval.
pub const DEFAULT_BOUND: f64 = 2.0;

/// Threshold under which `b` (max norm) or `A` (max row sum) count as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Relative residual accepted from the affine solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

const QUADRATURE_TOL: f64 = 1e-10;
const INTERCEPT_TOL: f64 = 1e-9;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Least-squares line `sigmoid(x) ~ slope * x + intercept` on `[-c, c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSigmoid {
    c: f64,
    slope: f64,
    intercept: f64,
}

impl LinearizedSigmoid {
    /// Fits the line for half-interval `c`; see [`fit_linearization`].
    pub fn fit(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < MAX_BOUND) {
            return Err(Error::InvalidBound(c));
        }
        // The integrands are O(c^3) and O(c) respectively, so the absolute
        // tolerance shrinks with small c to keep the relative accuracy.
        let tol = QUADRATURE_TOL * c.powi(3).min(1.0);
        let first_moment = adaptive_simpson(|x| x * sigmoid(x), -c, c, tol);
        let mass = adaptive_simpson(sigmoid, -c, c, tol);
        // Normal equations: the x and 1 basis functions are orthogonal on a
        // symmetric interval, with squared norms 2c^3/3 and 2c.
        let slope = first_moment * 3.0 / (2.0 * c.powi(3));
        let intercept = mass / (2.0 * c);
        assert!(
            (intercept - 0.5).abs() <= INTERCEPT_TOL,
            "fitted intercept {intercept} deviates from 1/2"
        );
        let lin = LinearizedSigmoid {
            c,
            slope,
            intercept,
        };
        assert!(
            lin.satisfies_condition(),
            "2 * c1 < 1 / c violated for c = {c}, c1 = {slope}"
        );
        assert!(slope > 0.0 && slope < 0.25);
        Ok(lin)
    }

    /// Half-interval `c`.
    pub fn bound(&self) -> f64 {
        self.c
    }

    /// Fitted slope `c1`.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Fitted intercept `c2` (always 1/2 up to quadrature error).
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn satisfies_condition(&self) -> bool {
        check_condition(self.c, self.slope)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Largest `|sigmoid(x) - line(x)|` on a uniform grid of `samples + 1`
    /// points over `[-c, c]`.
    pub fn max_abs_error(&self, samples: usize) -> f64 {
        let samples = samples.max(1);
        (0..=samples)
            .map(|k| -self.c + 2.0 * self.c * k as f64 / samples as f64)
            .map(|x| (sigmoid(x) - self.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}

impl Default for LinearizedSigmoid {
    fn default() -> Self {
        LinearizedSigmoid::fit(DEFAULT_BOUND).expect("default bound is valid")
    }
}

/// Fits `min ∫_{-c}^{c} (sigmoid(x) - c1 x - c2)^2 dx` in closed form, with
/// the integrals evaluated by adaptive quadrature.
pub fn fit_linearization(c: f64) -> Result<LinearizedSigmoid> {
    LinearizedSigmoid::fit(c)
}

/// Sufficient condition for `lambda I - 2 c1 A` to be positive definite:
/// `2 c1 < 1 / c`.
pub fn check_condition(c: f64, slope: f64) -> bool {
    2.0 * slope < 1.0 / c
}

/// `max_i (sum_j |A_ij| + |b_i|) / c`.
pub fn build_scale(a: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "scale matrix (columns)",
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "scale vector",
            expected: a.nrows(),
            actual: b.len(),
        });
    }
    let max = a
        .row_iter()
        .zip(b.iter())
        .map(|(row, bi)| row.iter().map(|x| x.abs()).sum::<f64>() + bi.abs())
        .fold(0.0, f64::max);
    Ok(max / c)
}

/// One consistency system `phi = sigmoid(lambda^-1 (A (2 phi - 1) + b))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    c: f64,
}

impl RowSystem {
    /// Validates shape and exact symmetry of `a`, then computes the scale.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        if c.is_nan() || c <= 0.0 {
            return Err(Error::InvalidBound(c));
        }
        let lambda = build_scale(&a, &b, c)?;
        let d = a.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                if a[(i, j)] != a[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(RowSystem { a, b, lambda, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bound(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// True when `b` is zero to within [`ZERO_TOL`] and the homogeneous
    /// branch applies.
    pub fn is_homogeneous(&self) -> bool {
        self.b.amax() < ZERO_TOL
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, f64) {
        (self.a, self.b, self.lambda)
    }
}

/// Marginals `phi_k = P(bit k = +1)` for one row of codes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftRow(DVector<f64>);

impl SoftRow {
    pub fn uniform(d: usize) -> Self {
        SoftRow(DVector::from_element(d, 0.5))
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for SoftRow {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

fn max_row_sum(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `(lambda A^-1 - 2 c1 I) v = 2 c1 lambda^-1 b` through the
/// equivalent `(lambda I - 2 c1 A) v = 2 c1 lambda^-1 A b`, which needs no
/// inverse of `A` and has a positive definite left-hand side.
pub fn solve_affine(sys: &RowSystem, lin: &LinearizedSigmoid) -> Result<DVector<f64>> {
    if sys.is_homogeneous() {
        return Err(Error::Degenerate("affine solve needs b != 0"));
    }
    if sys.lambda.is_nan() || sys.lambda <= 0.0 {
        return Err(Error::Degenerate("affine solve needs lambda > 0"));
    }
    if !lin.satisfies_condition() {
        return Err(Error::NotPositiveDefinite(0.0));
    }
    let d = sys.dim();
    if max_row_sum(&sys.a) < ZERO_TOL {
        return Ok(DVector::zeros(d));
    }
    let two_c1 = 2.0 * lin.slope();
    let lhs = DMatrix::identity(d, d) * sys.lambda - &sys.a * two_c1;
    let rhs = (&sys.a * &sys.b) * (two_c1 / sys.lambda);
    let chol = lhs.clone().cholesky().ok_or(Error::Factorization(
        "lambda I - 2 c1 A is not positive definite",
    ))?;
    let v = chol.solve(&rhs);
    let residual = (&lhs * &v - &rhs).norm();
    let scale = lhs.norm() * v.norm() + rhs.norm();
    let tolerance = RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE);
    if residual > tolerance || !residual.is_finite() {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance,
        });
    }
    Ok(v)
}

/// Picks, among the eigenpairs `(mu, p)` of `A`, the direction that
/// minimizes `|lambda / mu - 2 c1|`, i.e. the smallest singular direction of
/// `lambda A^-1 - 2 c1 I`. Zero eigenvalues map to an infinite singular value
/// and are skipped, so singular `A` is handled. Returns the eigenvector index.
pub(crate) fn select_homogeneous(eigenvalues: &[f64], lambda: f64, two_c1: f64) -> Option<usize> {
    let scale = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale < ZERO_TOL {
        return None;
    }
    let cutoff = scale * 1e-12;
    let mut best: Option<(usize, f64)> = None;
    for (j, &mu) in eigenvalues.iter().enumerate() {
        if mu.abs() <= cutoff {
            continue;
        }
        let score = (lambda - two_c1 * mu).abs() / mu.abs();
        best = match best {
            None => Some((j, score)),
            Some((bj, bs)) => {
                if score < bs || (score == bs && mu > eigenvalues[bj]) {
                    Some((j, score))
                } else {
                    Some((bj, bs))
                }
            }
        };
    }
    best.map(|(j, _)| j)
}

/// Flips `v` so its first non-negligible entry is positive.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let tol = v.amax() * 1e-12;
    if let Some(first) = v.iter().copied().find(|x| x.abs() > tol) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Unit-norm minimizer of `||(lambda A^-1 - 2 c1 I) v||` for `b = 0`.
///
/// Computed from the eigendecomposition of `A` itself: every eigenvector of
/// `A` with eigenvalue `mu` is a singular vector of the transformed matrix
/// with singular value `|lambda / mu - 2 c1|`. When `A` is positive
/// semidefinite this is the eigenvector of the largest eigenvalue.
pub fn solve_homogeneous(sys: &RowSystem, lin: &LinearizedSigmoid) -> Result<DVector<f64>> {
    if sys.lambda.is_nan() || sys.lambda <= 0.0 {
        return Err(Error::Degenerate("homogeneous solve needs lambda > 0"));
    }
    if max_row_sum(&sys.a) < ZERO_TOL {
        return Err(Error::Degenerate("A = 0 has no preferred direction"));
    }
    let eig = SymmetricEigen::new(sys.a.clone());
    let j = select_homogeneous(eig.eigenvalues.as_slice(), sys.lambda, 2.0 * lin.slope())
        .ok_or(Error::Degenerate("A = 0 has no preferred direction"))?;
    let mut v: DVector<f64> = eig.eigenvectors.column(j).into_owned();
    v.normalize_mut();
    fix_sign(&mut v);
    Ok(v)
}

/// Forms `v' = v + b / lambda`, stretches it affinely so that `min -> -c`
/// and `max -> +c`, and applies the sigmoid. A constant `v'` (spread below
/// `1e-12`) yields the uniform marginal 0.5.
pub fn renormalize_and_squash(
    v: &DVector<f64>,
    b: &DVector<f64>,
    lambda: f64,
    c: f64,
) -> Result<SoftRow> {
    if v.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "renormalization",
            expected: v.len(),
            actual: b.len(),
        });
    }
    let shifted = if lambda > 0.0 {
        v + b / lambda
    } else {
        v.clone()
    };
    Ok(stretch_and_squash(shifted, c))
}

fn stretch_and_squash(mut shifted: DVector<f64>, c: f64) -> SoftRow {
    let lo = shifted.min();
    let hi = shifted.max();
    let spread = hi - lo;
    if spread.is_nan() || spread < ZERO_TOL {
        return SoftRow::uniform(shifted.len());
    }
    shifted.apply(|x| *x = sigmoid(c * (2.0 * (*x - lo) / spread - 1.0)));
    SoftRow(shifted)
}

/// Turns a linear-system solution into marginals.
///
/// With a single bit there is nothing to stretch against, so the scaled
/// argument is clamped to `[-c, c]` and squashed directly; this keeps the
/// sign of `b` instead of collapsing every row to 0.5.
pub fn squash_solution(v: &DVector<f64>, b: &DVector<f64>, lambda: f64, c: f64) -> Result<SoftRow> {
    if v.len() == 1 && b.len() == 1 && lambda > 0.0 {
        let arg = (v[0] + b[0] / lambda).clamp(-c, c);
        return Ok(SoftRow(DVector::from_element(1, sigmoid(arg))));
    }
    renormalize_and_squash(v, b, lambda, c)
}

/// Solves one consistency system: affine branch when `b != 0`, homogeneous
/// branch when `b = 0`, uniform marginals when there is no evidence at all
/// (`lambda = 0`, or `A` and `b` both zero to within [`ZERO_TOL`]).
pub fn solve_row_system(sys: &RowSystem, lin: &LinearizedSigmoid) -> Result<SoftRow> {
    if sys.lambda == 0.0 || (sys.is_homogeneous() && max_row_sum(&sys.a) < ZERO_TOL) {
        return Ok(SoftRow::uniform(sys.dim()));
    }
    let v = if sys.is_homogeneous() {
        solve_homogeneous(sys, lin)?
    } else {
        solve_affine(sys, lin)?
    };
    squash_solution(&v, &sys.b, sys.lambda, sys.c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_off_sized_b_with_zero_a_is_uniform() {
        // b cancels to ~1e-16 instead of exactly 0
        let sys = RowSystem::new(dmatrix![0.0], dvector![2.0e-16], 2.0).unwrap();
        assert!(sys.lambda() > 0.0);
        let row = solve_row_system(&sys, &lin2()).unwrap();
        assert_eq!(row.as_slice(), &[0.5]);
    }

    fn lin2() -> LinearizedSigmoid {
        fit_linearization(2.0).unwrap()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    // Composite Simpson on a fixed fine grid; independent of the adaptive
    // routine used by the implementation.
    fn composite_simpson_slope(c: f64) -> f64 {
        let n = 20_000;
        let h = 2.0 * c / n as f64;
        let f = |x: f64| x / (1.0 + (-x).exp());
        let mut s = f(-c) + f(c);
        for k in 1..n {
            let x = -c + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        let integral = s * h / 3.0;
        1.5 / c.powi(3) * integral
    }

    #[test]
    fn default_slope_matches_reported_value() {
        let lin = lin2();
        assert!((lin.slope() - 0.2109).abs() < 1e-4, "{}", lin.slope());
        assert!((lin.intercept() - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn slope_at_unit_bound_matches_simpson_oracle() {
        let oracle = composite_simpson_slope(1.0);
        let lin = fit_linearization(1.0).unwrap();
        assert!((oracle - 0.238).abs() < 5e-4, "{oracle}");
        assert!((lin.slope() - oracle).abs() < 1e-10);
    }

    #[test]
    fn slope_approaches_tangent_for_tiny_bound() {
        let lin = fit_linearization(0.01).unwrap();
        assert!((lin.slope() - 0.25).abs() < 1e-5);
        assert!(lin.slope() < 0.25);
    }

    #[test]
    fn rejects_bounds_outside_range() {
        assert!(matches!(
            fit_linearization(0.0),
            Err(Error::InvalidBound(_))
        ));
        assert!(matches!(
            fit_linearization(-1.0),
            Err(Error::InvalidBound(_))
        ));
        assert!(matches!(
            fit_linearization(2.5997),
            Err(Error::InvalidBound(_))
        ));
        assert!(matches!(
            fit_linearization(3.0),
            Err(Error::InvalidBound(_))
        ));
        assert!(fit_linearization(f64::NAN).is_err());
    }

    #[test]
    fn condition_examples() {
        assert!(check_condition(2.0, 0.2109));
        assert!(!check_condition(2.0, 0.25));
        for k in 1..=25 {
            let lin = fit_linearization(k as f64 * 0.1).unwrap();
            assert!(lin.satisfies_condition());
        }
    }

    #[test]
    fn scale_examples() {
        let a = dmatrix![0.0, 1.0; 1.0, 0.0];
        assert_eq!(build_scale(&a, &dvector![1.0, -1.0], 2.0).unwrap(), 1.0);
        assert_eq!(
            build_scale(&DMatrix::zeros(3, 3), &DVector::zeros(3), 2.0).unwrap(),
            0.0
        );
        assert_eq!(
            build_scale(&dmatrix![2.0], &dvector![3.0], 2.0).unwrap(),
            2.5
        );
        assert!(build_scale(&a, &dvector![1.0], 2.0).is_err());
        assert!(build_scale(&DMatrix::zeros(2, 3), &dvector![1.0, 1.0], 2.0).is_err());
    }

    #[test]
    fn row_system_rejects_asymmetry() {
        let a = dmatrix![0.0, 1.0; 0.5, 0.0];
        assert!(matches!(
            RowSystem::new(a, dvector![1.0, 1.0], 2.0),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn affine_scalar_case() {
        let lin = lin2();
        let sys = RowSystem::new(dmatrix![1.0], dvector![1.0], 2.0).unwrap();
        assert_eq!(sys.lambda(), 1.0);
        let v = solve_affine(&sys, &lin).unwrap();
        let t = 2.0 * lin.slope();
        assert!((v[0] - t / (1.0 - t)).abs() < 1e-14);
        assert!((v[0] - 0.7295).abs() < 1e-3);
        // substitution into the original form
        assert!(((1.0 / 1.0 - t) * v[0] - t * 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_identity_case() {
        let lin = lin2();
        let b = dvector![0.3, -1.2, 2.0, 0.0];
        let sys = RowSystem::new(DMatrix::identity(4, 4), b.clone(), 2.0).unwrap();
        let lam = sys.lambda();
        let t = 2.0 * lin.slope();
        let v = solve_affine(&sys, &lin).unwrap();
        for k in 0..4 {
            let expected = t * b[k] / (lam * (lam - t));
            assert!((v[k] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_zero_matrix_short_circuits() {
        let sys = RowSystem::new(DMatrix::zeros(3, 3), dvector![1.0, 2.0, 3.0], 2.0).unwrap();
        assert_eq!(solve_affine(&sys, &lin2()).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn affine_requires_nonzero_b() {
        let sys = RowSystem::new(DMatrix::identity(2, 2), DVector::zeros(2), 2.0).unwrap();
        assert!(solve_affine(&sys, &lin2()).is_err());
    }

    #[test]
    fn affine_residual_against_explicit_inverse() {
        let lin = lin2();
        let t = 2.0 * lin.slope();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_symmetric(&mut rng, 16);
            let b = DVector::from_fn(16, |_, _| rng.random_range(-1.0..1.0));
            let sys = RowSystem::new(a.clone(), b.clone(), 2.0).unwrap();
            let lam = sys.lambda();
            let v = solve_affine(&sys, &lin).unwrap();
            let inv = a.try_inverse().unwrap();
            let lhs = (inv * lam - DMatrix::identity(16, 16) * t) * &v;
            let rhs = &b * (t / lam);
            assert!((lhs - rhs).norm() <= 1e-8);
        }
    }

    #[test]
    fn affine_handles_singular_matrix() {
        let lin = lin2();
        // rank one
        let u = dvector![1.0, -1.0, 0.5];
        let a = &u * u.transpose();
        let sys = RowSystem::new(a, dvector![1.0, 0.0, 0.0], 2.0).unwrap();
        let v = solve_affine(&sys, &lin).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn homogeneous_diagonal_case() {
        let sys = RowSystem::new(dmatrix![2.0, 0.0; 0.0, 1.0], DVector::zeros(2), 2.0).unwrap();
        assert_eq!(sys.lambda(), 1.0);
        let v = solve_homogeneous(&sys, &lin2()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
    }

    #[test]
    fn homogeneous_prefers_dominant_negative_eigenvalue() {
        // |1/(-2) - 2c1| < |1/0.1 - 2c1|: the negative direction wins
        let sys = RowSystem::new(dmatrix![0.1, 0.0; 0.0, -2.0], DVector::zeros(2), 2.0).unwrap();
        let v = solve_homogeneous(&sys, &lin2()).unwrap();
        assert!(v[0].abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_sign_is_canonical() {
        let a = dmatrix![0.0, -3.0; -3.0, 0.0];
        let sys = RowSystem::new(a.clone(), DVector::zeros(2), 2.0).unwrap();
        let neg = RowSystem::new(a, DVector::zeros(2), 2.0).unwrap();
        let v = solve_homogeneous(&sys, &lin2()).unwrap();
        assert!(v[0] > 0.0);
        assert_eq!(v, solve_homogeneous(&neg, &lin2()).unwrap());
        assert!((v.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_rejects_zero_matrix() {
        let sys = RowSystem::new(DMatrix::zeros(2, 2), DVector::zeros(2), 2.0).unwrap();
        assert!(solve_homogeneous(&sys, &lin2()).is_err());
    }

    #[test]
    fn homogeneous_matches_svd_oracle() {
        let lin = lin2();
        let t = 2.0 * lin.slope();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2usize, 5, 9, 16] {
            for _ in 0..10 {
                let a = random_symmetric(&mut rng, d);
                let sys = RowSystem::new(a.clone(), DVector::zeros(d), 2.0).unwrap();
                let v = solve_homogeneous(&sys, &lin).unwrap();
                let m = a.try_inverse().unwrap() * sys.lambda() - DMatrix::identity(d, d) * t;
                let svd = m.svd(true, true);
                let j = svd.singular_values.imin();
                let oracle = svd.v_t.unwrap().row(j).transpose();
                let overlap = v.dot(&oracle).abs();
                assert!(overlap >= 1.0 - 1e-8, "d={d} overlap={overlap}");
            }
        }
    }

    #[test]
    fn renormalize_examples() {
        let row =
            renormalize_and_squash(&dvector![0.0, 1.0, 2.0], &DVector::zeros(3), 1.0, 2.0).unwrap();
        assert!((row[0] - 0.119_202_922).abs() < 1e-8);
        assert!((row[1] - 0.5).abs() < 1e-15);
        assert!((row[2] - 0.880_797_078).abs() < 1e-8);

        let flat =
            renormalize_and_squash(&dvector![0.7, 0.7, 0.7], &DVector::zeros(3), 1.0, 2.0).unwrap();
        assert!(flat.as_slice().iter().all(|&x| x == 0.5));

        let ends = renormalize_and_squash(&dvector![-2.0, 0.5, 2.0], &DVector::zeros(3), 1.0, 2.0)
            .unwrap();
        let direct: Vec<f64> = [-2.0, 0.5, 2.0].iter().map(|&x| sigmoid(x)).collect();
        for k in 0..3 {
            assert!((ends[k] - direct[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn renormalize_adds_scaled_b() {
        let row =
            renormalize_and_squash(&dvector![0.0, 0.0], &dvector![-1.0, 1.0], 2.0, 2.0).unwrap();
        assert!((row[0] - sigmoid(-2.0)).abs() < 1e-15);
        assert!((row[1] - sigmoid(2.0)).abs() < 1e-15);
    }

    #[test]
    fn row_solve_uniform_when_empty() {
        let sys = RowSystem::new(DMatrix::zeros(3, 3), DVector::zeros(3), 2.0).unwrap();
        assert_eq!(
            solve_row_system(&sys, &lin2()).unwrap(),
            SoftRow::uniform(3)
        );
    }

    #[test]
    fn row_solve_composes_branches() {
        let lin = lin2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(&mut rng, 6);
        let b = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let sys = RowSystem::new(a.clone(), b.clone(), 2.0).unwrap();
        let v = solve_affine(&sys, &lin).unwrap();
        assert_eq!(
            solve_row_system(&sys, &lin).unwrap(),
            renormalize_and_squash(&v, &b, sys.lambda(), 2.0).unwrap()
        );

        let hom = RowSystem::new(a, DVector::zeros(6), 2.0).unwrap();
        let v = solve_homogeneous(&hom, &lin).unwrap();
        assert_eq!(
            solve_row_system(&hom, &lin).unwrap(),
            renormalize_and_squash(&v, hom.b(), hom.lambda(), 2.0).unwrap()
        );
    }

    #[test]
    fn single_bit_keeps_sign_of_b() {
        let lin = lin2();
        let pos = RowSystem::new(DMatrix::zeros(1, 1), dvector![3.0], 2.0).unwrap();
        let neg = RowSystem::new(DMatrix::zeros(1, 1), dvector![-0.1], 2.0).unwrap();
        assert!((solve_row_system(&pos, &lin).unwrap()[0] - sigmoid(2.0)).abs() < 1e-15);
        assert!((solve_row_system(&neg, &lin).unwrap()[0] - sigmoid(-2.0)).abs() < 1e-15);
    }
}
