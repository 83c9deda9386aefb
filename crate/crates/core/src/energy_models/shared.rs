use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mean_field::{fix_sign, select_homogeneous, LinearizedSigmoid};

/// Eigendecomposition `A = P D P^T` of a symmetric matrix shared by many
/// systems.
#[derive(Debug, Clone)]
pub struct SharedEig {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl SharedEig {
    /// Decomposes `a` and checks orthogonality (`||P^T P - I||_F <= 1e-10`)
    /// and reconstruction (`||P D P^T - A||_F <= 1e-8 ||A||_F`).
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "shared matrix (columns)",
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        let d = a.nrows();
        let eig = SymmetricEigen::new(a.clone());
        let shared = SharedEig {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        };
        let ortho = (shared.vectors.tr_mul(&shared.vectors) - DMatrix::identity(d, d)).norm();
        if ortho > 1e-10 {
            return Err(Error::Factorization("eigenvectors are not orthonormal"));
        }
        let recon = (shared.reconstruct() - a).norm();
        if recon > 1e-8 * a.norm() + f64::MIN_POSITIVE {
            return Err(Error::Factorization(
                "eigendecomposition does not reproduce A",
            ));
        }
        Ok(shared)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `P`, eigenvectors in columns.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `D`.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    /// Homogeneous (`b = 0`) solution for scale `lambda`, using the stored
    /// spectrum instead of a fresh decomposition.
    pub fn homogeneous_direction(
        &self,
        lambda: f64,
        lin: &LinearizedSigmoid,
    ) -> Result<DVector<f64>> {
        let j = select_homogeneous(self.values.as_slice(), lambda, 2.0 * lin.slope())
            .ok_or(Error::Degenerate("A = 0 has no preferred direction"))?;
        let mut v: DVector<f64> = self.vectors.column(j).into_owned();
        v.normalize_mut();
        fix_sign(&mut v);
        Ok(v)
    }
}

/// Solves every tail system `(lambda_i I - 2 c1 A) v_i = 2 c1 lambda_i^-1 A b_i`
/// through the shared eigenbasis:
///
/// ```text
/// v_i = 2 c1 P ( [D_j / (lambda_i - 2 c1 D_j)]_j ⊙ (P^T b_i / lambda_i) )
/// ```
///
/// `b` is row-major with one `d`-vector per system. Each solve holds a
/// single `d`-vector of scratch. Rows with `lambda_i = 0` have no system and
/// come back as zeros.
pub fn batch_solve_shared(
    eig: &SharedEig,
    b: &[f64],
    lambdas: &[f64],
    lin: &LinearizedSigmoid,
) -> Result<Vec<f64>> {
    let d = eig.dim();
    if b.len() != lambdas.len() * d {
        return Err(Error::DimensionMismatch {
            context: "batched right-hand sides",
            expected: lambdas.len() * d,
            actual: b.len(),
        });
    }
    let two_c1 = 2.0 * lin.slope();
    let values = eig.values.as_slice();
    for &lam in lambdas.iter().filter(|&&l| l != 0.0) {
        if let Some(denom) = values
            .iter()
            .map(|&mu| lam - two_c1 * mu)
            .find(|&den| den.is_nan() || den <= 0.0)
        {
            return Err(Error::NotPositiveDefinite(denom));
        }
    }
    let p = &eig.vectors;
    let mut out = vec![0.0; b.len()];
    if d == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(d)
        .zip(b.par_chunks(d))
        .zip(lambdas.par_iter())
        .for_each_init(
            || vec![0.0; d],
            |coeff, ((v, bi), &lam)| {
                if lam == 0.0 {
                    return;
                }
                for (j, cj) in coeff.iter_mut().enumerate() {
                    let proj: f64 = p.column(j).iter().zip(bi).map(|(pk, bk)| pk * bk).sum();
                    let mu = values[j];
                    *cj = two_c1 * mu / (lam - two_c1 * mu) * (proj / lam);
                }
                for (j, &cj) in coeff.iter().enumerate() {
                    for (vk, pk) in v.iter_mut().zip(p.column(j).iter()) {
                        *vk += cj * pk;
                    }
                }
            },
        );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean_field::{solve_affine, RowSystem};
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_matrix_divides_per_coordinate() {
        let lin = LinearizedSigmoid::fit(2.0).unwrap();
        let t = 2.0 * lin.slope();
        let a = dmatrix![-1.0, 0.0; 0.0, 3.0];
        let eig = SharedEig::new(&a).unwrap();
        let b = [0.5, -2.0];
        let lam = 2.5;
        let v = batch_solve_shared(&eig, &b, &[lam], &lin).unwrap();
        for k in 0..2 {
            let mu = a[(k, k)];
            let expected = t * mu * b[k] / (lam * (lam - t * mu));
            assert!((v[k] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_reduction() {
        let lin = LinearizedSigmoid::fit(2.0).unwrap();
        let t = 2.0 * lin.slope();
        let eig = SharedEig::new(&dmatrix![0.7]).unwrap();
        let v = batch_solve_shared(&eig, &[1.3], &[1.0], &lin).unwrap();
        let expected = t * 0.7 * 1.3 / (1.0 * (1.0 - t * 0.7));
        assert!((v[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_direct_solves() {
        let lin = LinearizedSigmoid::fit(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let d = 12;
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                let x = rng.random_range(-2.0..2.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        let eig = SharedEig::new(&a).unwrap();
        let rows = 20;
        let b: Vec<f64> = (0..rows * d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut lambdas = Vec::new();
        for r in 0..rows {
            let sys = RowSystem::new(
                a.clone(),
                DVector::from_column_slice(&b[r * d..(r + 1) * d]),
                2.0,
            )
            .unwrap();
            lambdas.push(sys.lambda());
        }
        let batch = batch_solve_shared(&eig, &b, &lambdas, &lin).unwrap();
        for r in 0..rows {
            let sys = RowSystem::new(
                a.clone(),
                DVector::from_column_slice(&b[r * d..(r + 1) * d]),
                2.0,
            )
            .unwrap();
            let direct = solve_affine(&sys, &lin).unwrap();
            for k in 0..d {
                assert!((batch[r * d + k] - direct[k]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn rejects_undersized_scale() {
        let lin = LinearizedSigmoid::fit(2.0).unwrap();
        let eig = SharedEig::new(&dmatrix![10.0]).unwrap();
        assert!(matches!(
            batch_solve_shared(&eig, &[1.0], &[1.0], &lin),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert_eq!(
            batch_solve_shared(&eig, &[0.0], &[0.0], &lin).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn decomposition_invariants() {
        let a = dmatrix![2.0, -1.0, 0.0; -1.0, 2.0, -1.0; 0.0, -1.0, 2.0];
        let eig = SharedEig::new(&a).unwrap();
        assert!((eig.reconstruct() - &a).norm() < 1e-12);
        let p = eig.vectors();
        assert!((p.transpose() * p - DMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
