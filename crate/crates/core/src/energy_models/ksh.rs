use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::shared::{batch_solve_shared, SharedEig};
use super::{negative_offdiag_gram, SimilarityView, SoftCodes, TrainConfig};
use crate::error::{Error, Result};
use crate::mean_field::{self, LinearizedSigmoid, RowSystem, SoftRow};

/// KSH consistency system for anchor `i`:
///
/// ```text
/// A_kk' = -sum_{j != i, j < m} [k != k'] u_jk u_jk'
/// b_k   =  sum_{j != i, j < m} d S_ij u_jk
/// ```
///
/// with `u = 2 phi - 1`. Unobserved pairs (`S_ij = 0`) still enter `A`.
pub fn ksh_anchor_system(
    phi: &SoftCodes,
    sim: &SimilarityView,
    i: usize,
    c: f64,
) -> Result<RowSystem> {
    let m = sim.anchors();
    if i >= m {
        return Err(Error::IndexOutOfRange {
            context: "anchor",
            index: i,
            len: m,
        });
    }
    check_rows(phi, m)?;
    let d = phi.ncols();
    let u = phi.expectations();
    let others = (0..m).filter(|&j| j != i);
    let a = negative_offdiag_gram(d, others.clone().map(|j| (&u[j * d..(j + 1) * d], 1.0)));
    let mut b = DVector::zeros(d);
    for j in others {
        accumulate_b(
            &mut b,
            &u[j * d..(j + 1) * d],
            d as f64 * sim.get(i, j) as f64,
        );
    }
    RowSystem::new(a, b, c)
}

fn check_rows(phi: &SoftCodes, m: usize) -> Result<()> {
    if phi.nrows() < m {
        return Err(Error::DimensionMismatch {
            context: "soft codes (anchor rows)",
            expected: m,
            actual: phi.nrows(),
        });
    }
    Ok(())
}

#[inline]
fn accumulate_b(b: &mut DVector<f64>, u: &[f64], weight: f64) {
    if weight != 0.0 {
        for (bk, uk) in b.iter_mut().zip(u) {
            *bk += weight * uk;
        }
    }
}

/// Systems for every tail point `i >= m`. They share one matrix
/// `A = -sum_{j < m} offdiag(u_j u_j^T)`; only `b_i` and `lambda_i` vary.
#[derive(Debug, Clone)]
pub struct TailSystems {
    pub a: DMatrix<f64>,
    /// Row-major `(n - m) x d`.
    pub b: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl TailSystems {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn b_row(&self, r: usize) -> &[f64] {
        let d = self.dim();
        &self.b[r * d..(r + 1) * d]
    }

    /// Materializes the `r`-th tail system (tail point `m + r`).
    pub fn system(&self, r: usize, c: f64) -> Result<RowSystem> {
        RowSystem::new(self.a.clone(), DVector::from_column_slice(self.b_row(r)), c)
    }
}

/// Builds the tail systems from the anchor block `phi1` (exactly `m` rows).
///
/// `b_ik = sum_{j < m} d S_ij u_jk`, i.e. the expectation of the anchor `j`
/// enters, matching the anchor systems.
pub fn ksh_tail_systems(phi1: &SoftCodes, sim: &SimilarityView, c: f64) -> Result<TailSystems> {
    let m = sim.anchors();
    if phi1.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "anchor block rows",
            expected: m,
            actual: phi1.nrows(),
        });
    }
    let d = phi1.ncols();
    let u = phi1.expectations();
    let a = negative_offdiag_gram(d, (0..m).map(|j| (&u[j * d..(j + 1) * d], 1.0)));
    let row_sums: Vec<f64> = a
        .row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum())
        .collect();
    let tail = sim.nrows() - m;
    let scale = d as f64;
    let mut b = vec![0.0; tail * d];
    let mut lambdas = vec![0.0; tail];
    b.par_chunks_mut(d.max(1))
        .zip(lambdas.par_iter_mut())
        .enumerate()
        .for_each(|(r, (bi, lam))| {
            let srow = sim.row(m + r);
            for (j, &s) in srow.iter().enumerate() {
                if s != 0 {
                    let w = scale * s as f64;
                    for (bk, uk) in bi.iter_mut().zip(&u[j * d..(j + 1) * d]) {
                        *bk += w * uk;
                    }
                }
            }
            *lam = row_sums
                .iter()
                .zip(bi.iter())
                .map(|(rs, bk)| rs + bk.abs())
                .fold(0.0, f64::max)
                / c;
        });
    Ok(TailSystems { a, b, lambdas })
}

/// One Gauss-Seidel sweep over the anchors, in index order: row `i` is
/// solved against the already updated rows `j < i` and the incoming rows
/// `j > i`.
///
/// A Jacobi sweep (every system built from the incoming `phi1`) falls into
/// period-2 cycles on class-structured `S`: each row moves towards the
/// majority of the others, and the others move at the same time.
fn anchor_sweep(phi1: &mut SoftCodes, sim: &SimilarityView, lin: &LinearizedSigmoid) -> Result<()> {
    let m = phi1.nrows();
    let d = phi1.ncols();
    let c = lin.bound();
    let mut u = phi1.expectations();
    let scale = d as f64;
    // Strict upper triangle of G = sum_j u_j u_j^T, kept current as rows change.
    // A^i = -offdiag(G - u_i u_i^T).
    let mut gram = vec![0.0; d * d];
    for j in 0..m {
        add_outer(&mut gram, &u[j * d..(j + 1) * d], d, 1.0);
    }
    for i in 0..m {
        let ui = &u[i * d..(i + 1) * d];
        let mut a = DMatrix::zeros(d, d);
        for k in 0..d {
            for kp in (k + 1)..d {
                let v = -(gram[k * d + kp] - ui[k] * ui[kp]);
                a[(k, kp)] = v;
                a[(kp, k)] = v;
            }
        }
        let mut b = DVector::zeros(d);
        for (j, &s) in sim.row(i).iter().enumerate() {
            if j != i {
                accumulate_b(&mut b, &u[j * d..(j + 1) * d], scale * s as f64);
            }
        }
        let row = mean_field::solve_row_system(&RowSystem::new(a, b, c)?, lin)?;
        add_outer(&mut gram, &u[i * d..(i + 1) * d], d, -1.0);
        for (uk, p) in u[i * d..(i + 1) * d].iter_mut().zip(row.as_slice()) {
            *uk = 2.0 * p - 1.0;
        }
        add_outer(&mut gram, &u[i * d..(i + 1) * d], d, 1.0);
        phi1.set_row(i, &row);
    }
    Ok(())
}

fn add_outer(upper: &mut [f64], u: &[f64], d: usize, w: f64) {
    for k in 0..d {
        let uk = w * u[k];
        for kp in (k + 1)..d {
            upper[k * d + kp] += uk * u[kp];
        }
    }
}

/// Solves all tail rows in one pass using the shared eigendecomposition.
fn solve_tail(phi1: &SoftCodes, sim: &SimilarityView, lin: &LinearizedSigmoid) -> Result<Vec<f64>> {
    let c = lin.bound();
    let d = phi1.ncols();
    let tail = ksh_tail_systems(phi1, sim, c)?;
    if tail.is_empty() {
        return Ok(Vec::new());
    }
    let eig = SharedEig::new(&tail.a)?;
    let mut out = batch_solve_shared(&eig, &tail.b, &tail.lambdas, lin)?;
    out.par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(r, vrow)| -> Result<()> {
            let lam = tail.lambdas[r];
            let b = DVector::from_column_slice(tail.b_row(r));
            let b_zero = b.amax() < mean_field::ZERO_TOL;
            let row = if lam == 0.0 || (b_zero && eig.values().amax() < mean_field::ZERO_TOL) {
                SoftRow::uniform(d)
            } else {
                let v = if b_zero {
                    eig.homogeneous_direction(lam, lin)?
                } else {
                    DVector::from_column_slice(vrow)
                };
                mean_field::squash_solution(&v, &b, lam, c)?
            };
            vrow.copy_from_slice(row.as_slice());
            Ok(())
        })?;
    Ok(out)
}

/// EM-KSH training on a sampled similarity view.
///
/// Starts from uniform random marginals (seeded), refines the `m` anchor
/// rows with `cfg.sweeps` sequential sweeps, then solves the `n - m` tail rows
/// in one batched pass. Rows are returned in view order (anchors first).
pub fn em_ksh_train(
    sim: &SimilarityView,
    cfg: &TrainConfig,
    lin: &LinearizedSigmoid,
) -> Result<SoftCodes> {
    let n = sim.nrows();
    cfg.validate(n)?;
    check_view(sim, cfg, lin)?;
    let (m, d) = (sim.anchors(), cfg.bits);
    if sim.is_empty() {
        return Ok(SoftCodes::uniform(n, d));
    }
    let mut rng = cfg.rng();
    let init = SoftCodes::random(n, d, &mut rng);
    let mut phi1 = init.head(m);
    for _ in 0..cfg.sweeps {
        anchor_sweep(&mut phi1, sim, lin)?;
    }
    let tail = solve_tail(&phi1, sim, lin)?;
    let mut data = phi1.as_slice().to_vec();
    data.extend_from_slice(&tail);
    SoftCodes::from_row_major(n, d, data)
}

pub(super) fn check_view(
    sim: &SimilarityView,
    cfg: &TrainConfig,
    lin: &LinearizedSigmoid,
) -> Result<()> {
    if cfg.anchors != sim.anchors() {
        return Err(Error::DimensionMismatch {
            context: "anchor count (config vs view)",
            expected: cfg.anchors,
            actual: sim.anchors(),
        });
    }
    if cfg.c != lin.bound() {
        return Err(Error::InvalidConfig(format!(
            "config bound {} differs from linearization bound {}",
            cfg.c,
            lin.bound()
        )));
    }
    Ok(())
}
