use crate::codec::BinaryCodes;
use crate::energy_models::{SimilarityView, SoftCodes, TrainConfig};
use crate::error::{Error, Result};
use crate::mean_field::sigmoid;

/// Largest `n * d` accepted by [`brute_force_min_energy`] (`2^12 = 4096`
/// code matrices).
pub const MAX_BRUTE_FORCE_CELLS: usize = 12;

/// Right-hand side of an exact (unlinearized) consistency equation:
/// `phi_ik = sigmoid(field_ik(phi))`.
pub trait ConsistencyMap {
    fn nrows(&self) -> usize;

    /// Writes the sigmoid arguments of row `i` into `out`. `phi` is
    /// row-major with `out.len()` columns.
    fn field(&self, phi: &[f64], i: usize, out: &mut [f64]);
}

/// KSH equations over the anchor columns:
///
/// ```text
/// field_ik = -sum_{j != i, j < m} sum_{k' != k} u_jk u_jk' u_ik' + sum_{j != i, j < m} d S_ij u_jk
/// ```
pub struct KshConsistency<'a> {
    pub sim: &'a SimilarityView,
}

impl ConsistencyMap for KshConsistency<'_> {
    fn nrows(&self) -> usize {
        self.sim.nrows()
    }

    fn field(&self, phi: &[f64], i: usize, out: &mut [f64]) {
        let d = out.len();
        let row = |j: usize| &phi[j * d..(j + 1) * d];
        let ui: Vec<f64> = row(i).iter().map(|p| 2.0 * p - 1.0).collect();
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut uj = vec![0.0; d];
        for j in (0..self.sim.anchors()).filter(|&j| j != i) {
            for (u, p) in uj.iter_mut().zip(row(j)) {
                *u = 2.0 * p - 1.0;
            }
            let dot: f64 = uj.iter().zip(&ui).map(|(a, b)| a * b).sum();
            let s = d as f64 * self.sim.get(i, j) as f64;
            for k in 0..d {
                // sum over k' != k of u_jk' u_ik'
                let rest = dot - uj[k] * ui[k];
                out[k] += -uj[k] * rest + s * uj[k];
            }
        }
    }
}

/// SPLH equations `field_ik = sum_{j != i} S_ij u_jk` on a square view.
pub struct SplhConsistency<'a> {
    pub sim: &'a SimilarityView,
}

impl ConsistencyMap for SplhConsistency<'_> {
    fn nrows(&self) -> usize {
        self.sim.nrows()
    }

    fn field(&self, phi: &[f64], i: usize, out: &mut [f64]) {
        let d = out.len();
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in (0..self.sim.anchors()).filter(|&j| j != i) {
            let s = self.sim.get(i, j) as f64;
            if s != 0.0 {
                for (o, p) in out.iter_mut().zip(&phi[j * d..(j + 1) * d]) {
                    *o += s * (2.0 * p - 1.0);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Damping `eta` in `phi <- (1 - eta) phi + eta sigmoid(...)`.
    pub damping: f64,
    pub max_iters: usize,
    /// Stop once the largest change in a full pass is below this.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            damping: 0.5,
            max_iters: 10_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub phi: SoftCodes,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped coordinate iteration of the exact consistency equations, starting
/// from the same seeded random marginals as training. Rows are updated in
/// place one at a time (Gauss-Seidel order). Slow; meant as a reference.
pub fn fixed_point_oracle(
    map: &impl ConsistencyMap,
    cfg: &TrainConfig,
    opts: OracleOptions,
) -> Result<OracleOutcome> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "damping must be in (0, 1], got {}",
            opts.damping
        )));
    }
    let (n, d) = (map.nrows(), cfg.bits);
    let mut rng = cfg.rng();
    let mut data = SoftCodes::random(n, d, &mut rng).as_slice().to_vec();
    let mut field = vec![0.0; d];
    for iter in 1..=opts.max_iters {
        let mut change: f64 = 0.0;
        for i in 0..n {
            map.field(&data, i, &mut field);
            for (k, x) in field.iter().enumerate() {
                let old = data[i * d + k];
                let new = (1.0 - opts.damping) * old + opts.damping * sigmoid(*x);
                change = change.max((new - old).abs());
                data[i * d + k] = new;
            }
        }
        if change < opts.tol {
            return Ok(OracleOutcome {
                phi: SoftCodes::from_row_major(n, d, data)?,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(OracleOutcome {
        phi: SoftCodes::from_row_major(n, d, data)?,
        iterations: opts.max_iters,
        converged: false,
    })
}

/// Exhaustive search over all `2^(n d)` code matrices. Returns the first
/// minimizer in enumeration order and its energy.
pub fn brute_force_min_energy(
    n: usize,
    d: usize,
    energy: impl Fn(&BinaryCodes) -> Result<f64>,
) -> Result<(BinaryCodes, f64)> {
    let cells = n * d;
    if cells > MAX_BRUTE_FORCE_CELLS {
        return Err(Error::TooLarge { bits: cells });
    }
    let mut best: Option<(BinaryCodes, f64)> = None;
    for mask in 0u32..(1u32 << cells) {
        let codes = BinaryCodes::from_fn(n, d, |i, k| mask >> (i * d + k) & 1 == 1);
        let e = energy(&codes)?;
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((codes, e));
        }
    }
    Ok(best.expect("at least one code matrix"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::round_codes;
    use crate::energy_models::{ksh_energy, splh_energy};

    fn cfg(n: usize, d: usize) -> TrainConfig {
        TrainConfig {
            bits: d,
            anchors: n,
            sweeps: 1,
            c: 2.0,
            seed: 3,
        }
    }

    #[test]
    fn brute_force_trivial_optima() {
        let all = SimilarityView::from_fn(3, 3, |_, _| 1).unwrap();
        let (b, e) = brute_force_min_energy(3, 2, |c| ksh_energy(c, &all)).unwrap();
        assert_eq!(e, 0.0);
        for i in 1..3 {
            assert_eq!(b.row(i), b.row(0));
        }
        let anti = SimilarityView::from_classes(&[0, 1]);
        let (b, e) = brute_force_min_energy(2, 1, |c| ksh_energy(c, &anti)).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(b.get(0, 0), -b.get(1, 0));
        assert!(matches!(
            brute_force_min_energy(5, 3, |c| ksh_energy(c, &all)),
            Err(Error::TooLarge { bits: 15 })
        ));
    }

    #[test]
    fn splh_oracle_separates_blocks() {
        let labels: Vec<usize> = (0..12).map(|i| usize::from(i >= 5)).collect();
        let sim = SimilarityView::from_classes(&labels);
        let out = fixed_point_oracle(
            &SplhConsistency { sim: &sim },
            &cfg(12, 1),
            OracleOptions::default(),
        )
        .unwrap();
        assert!(out.converged);
        let (codes, _) = round_codes(&out.phi);
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(codes.get(i, 0) == codes.get(j, 0), labels[i] == labels[j]);
            }
        }
        // every pair agrees with S, which is the global minimum
        let ideal = BinaryCodes::from_fn(12, 1, |i, _| labels[i] == 0);
        assert_eq!(
            splh_energy(&codes, &sim).unwrap(),
            splh_energy(&ideal, &sim).unwrap()
        );
    }

    #[test]
    fn undamped_single_step_is_the_definition() {
        // two points, one bit, S_12 = -1: from phi = (p, q), row 0 becomes
        // sigmoid(-(2q - 1)) and row 1 then sees the updated row 0.
        let sim = SimilarityView::from_classes(&[0, 1]);
        let c = cfg(2, 1);
        let opts = OracleOptions {
            damping: 1.0,
            max_iters: 1,
            tol: 0.0,
        };
        let out = fixed_point_oracle(&SplhConsistency { sim: &sim }, &c, opts).unwrap();
        let init = SoftCodes::random(2, 1, &mut c.rng());
        let p0 = sigmoid(-(2.0 * init.get(1, 0) - 1.0));
        let p1 = sigmoid(-(2.0 * p0 - 1.0));
        assert!((out.phi.get(0, 0) - p0).abs() < 1e-15);
        assert!((out.phi.get(1, 0) - p1).abs() < 1e-15);
        assert!(!out.converged);
    }

    #[test]
    fn ksh_field_matches_definition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (n, m, d) = (5, 3, 3);
        let sim = SimilarityView::from_fn(n, m, |i, j| {
            if i == j {
                1
            } else {
                [-1, 0, 1][rng.random_range(0..3)]
            }
        })
        .unwrap();
        let phi = SoftCodes::random(n, d, &mut rng);
        let u = |i: usize, k: usize| 2.0 * phi.get(i, k) - 1.0;
        let map = KshConsistency { sim: &sim };
        let mut out = vec![0.0; d];
        for i in 0..n {
            map.field(phi.as_slice(), i, &mut out);
            for (k, got) in out.iter().enumerate() {
                let mut x = 0.0;
                for j in (0..m).filter(|&j| j != i) {
                    for kp in (0..d).filter(|&kp| kp != k) {
                        x -= u(j, k) * u(j, kp) * u(i, kp);
                    }
                    x += d as f64 * sim.get(i, j) as f64 * u(j, k);
                }
                assert!((got - x).abs() < 1e-12);
            }
        }
    }
}
