use nalgebra::DVector;
use rayon::prelude::*;

use super::ksh::check_view;
use super::{negative_offdiag_gram, SimilarityView, SoftCodes, TrainConfig};
use crate::error::{Error, Result};
use crate::mean_field::{self, sigmoid, LinearizedSigmoid, RowSystem, SoftRow};

/// How the pairwise coefficient `lambda(xi_ij)` of the local variational
/// bound is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LfhCoupling {
    /// `xi_ij = |E[B_i]^T E[B_j]|` from the current marginals.
    #[default]
    Variational,
    /// Hard assignment: `xi_ij = d`, with `lambda(d)` replaced by its
    /// large-`d` value `-1 / (4 d)`. The system is then the KSH one divided
    /// by `d`.
    HardAssignment,
}

/// `lambda(xi) = -(sigmoid(xi) - 1/2) / (2 xi)`, tending to `-1/8` at 0.
pub fn lfh_coupling(xi: f64) -> f64 {
    let xi = xi.abs();
    if xi < 1e-4 {
        // sigmoid(x) - 1/2 = x/4 - x^3/48 + O(x^5)
        -0.125 + xi * xi / 96.0
    } else {
        -(sigmoid(xi) - 0.5) / (2.0 * xi)
    }
}

/// LFH consistency system for point `i` against the anchors `j != i`:
///
/// ```text
/// A_kk' = sum_j 4 lambda(xi_ij) [k != k'] u_jk u_jk'
/// b_k   = sum_j S_ij u_jk
/// ```
pub fn lfh_system(
    phi: &SoftCodes,
    sim: &SimilarityView,
    i: usize,
    c: f64,
    coupling: LfhCoupling,
) -> Result<RowSystem> {
    let n = sim.nrows();
    if i >= n {
        return Err(Error::IndexOutOfRange {
            context: "point",
            index: i,
            len: n,
        });
    }
    if phi.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "soft codes rows",
            expected: n,
            actual: phi.nrows(),
        });
    }
    system_from_expectations(&phi.expectations(), phi.ncols(), sim, i, c, coupling)
}

/// [`lfh_system`] on precomputed expectations `u = 2 phi - 1` (row-major).
fn system_from_expectations(
    u: &[f64],
    d: usize,
    sim: &SimilarityView,
    i: usize,
    c: f64,
    coupling: LfhCoupling,
) -> Result<RowSystem> {
    let m = sim.anchors();
    let ui = &u[i * d..(i + 1) * d];
    let hard = -1.0 / (4.0 * d as f64);
    let weight = |uj: &[f64]| -> f64 {
        let lam = match coupling {
            LfhCoupling::Variational => {
                lfh_coupling(ui.iter().zip(uj).map(|(a, b)| a * b).sum::<f64>())
            }
            LfhCoupling::HardAssignment => hard,
        };
        // negative_offdiag_gram negates
        -4.0 * lam
    };
    let others = (0..m).filter(|&j| j != i);
    let a = negative_offdiag_gram(
        d,
        others.clone().map(|j| {
            let uj = &u[j * d..(j + 1) * d];
            (uj, weight(uj))
        }),
    );
    let mut b = DVector::zeros(d);
    for j in others {
        let s = sim.get(i, j) as f64;
        if s != 0.0 {
            for (bk, uk) in b.iter_mut().zip(&u[j * d..(j + 1) * d]) {
                *bk += s * uk;
            }
        }
    }
    RowSystem::new(a, b, c)
}

/// EM-LFH: sequential sweeps over the anchors as in EM-KSH, then one pass over
/// the tail rows. The tail systems are not shared (the coupling depends on
/// `i`), so each is solved directly.
pub fn em_lfh_train(
    sim: &SimilarityView,
    cfg: &TrainConfig,
    lin: &LinearizedSigmoid,
    coupling: LfhCoupling,
) -> Result<SoftCodes> {
    let n = sim.nrows();
    cfg.validate(n)?;
    check_view(sim, cfg, lin)?;
    let (m, d) = (sim.anchors(), cfg.bits);
    if sim.is_empty() {
        return Ok(SoftCodes::uniform(n, d));
    }
    let mut rng = cfg.rng();
    let mut phi = SoftCodes::random(n, d, &mut rng);
    let solve = |u: &[f64], i: usize| -> Result<SoftRow> {
        let sys = system_from_expectations(u, d, sim, i, lin.bound(), coupling)?;
        mean_field::solve_row_system(&sys, lin)
    };
    let mut u = phi.expectations();
    for _ in 0..cfg.sweeps {
        for i in 0..m {
            let row = solve(&u, i)?;
            for (uk, p) in u[i * d..(i + 1) * d].iter_mut().zip(row.as_slice()) {
                *uk = 2.0 * p - 1.0;
            }
            phi.set_row(i, &row);
        }
    }
    let rows: Vec<SoftRow> = (m..n)
        .into_par_iter()
        .map(|i| solve(&u, i))
        .collect::<Result<_>>()?;
    for (r, row) in rows.iter().enumerate() {
        phi.set_row(m + r, row);
    }
    Ok(phi)
}
