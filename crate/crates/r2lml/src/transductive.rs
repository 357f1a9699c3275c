//! Block-3 of the transductive variant: re-assigning the test-involving
//! similarity entries.
//!
//! With transforms and coefficients fixed, the objective is linear in the
//! free similarity entries with coefficient matrix Psi. Each test row is
//! solved optimally by inspection: pick every negative coefficient, or the
//! single smallest one when none is negative; symmetrization then
//! reconciles test-test pairs by OR. Train-train entries are data and are
//! never modified.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{pair_sq_dists, transformed};
use crate::scalar::Scalar;

/// Coefficients of the test-involving similarity entries in the objective.
///
/// Row `m` belongs to test sample `m` (global index `n_train + m`); columns
/// range over all `n_train + n_test` samples. The diagonal position
/// `(m, n_train + m)` is excluded from assignment (that similarity is
/// fixed at 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMatrix<T: Scalar> {
    entries: DMatrix<T>,
    n_train: usize,
}

impl<T: Scalar> PsiMatrix<T> {
    pub fn n_test(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_total(&self) -> usize {
        self.entries.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// True for the fixed diagonal position of row `m`.
    pub fn is_excluded(&self, m: usize, n: usize) -> bool {
        n == self.n_train + m
    }

    pub fn entry(&self, m: usize, n: usize) -> T {
        self.entries[(m, n)]
    }

    /// Build from raw entries (diagonal positions are ignored thereafter).
    pub fn from_entries(entries: DMatrix<T>, n_train: usize) -> Result<Self> {
        if entries.ncols() != n_train + entries.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "psi is {}x{}, expected columns = {} train + {} test",
                entries.nrows(),
                entries.ncols(),
                n_train,
                entries.nrows()
            )));
        }
        if entries.iter().any(|v: &T| !v.is_finite()) {
            return Err(Error::NonFinite("psi entries".into()));
        }
        Ok(Self { entries, n_train })
    }
}

/// Compute the similarity coefficients
/// `psi_mn = sum_k (||L_k dx_mn||^2 g_m g_n - C [1 - ||L_k dx_mn||^2]_+)`
/// for every test row `m` and column `n`.
pub fn compute_psi<T: Scalar>(
    transforms: &[DMatrix<T>],
    coefficients: &DMatrix<T>,
    features: &DMatrix<T>,
    n_train: usize,
    c: T,
) -> Result<PsiMatrix<T>> {
    let q = features.nrows();
    if n_train > q {
        return Err(Error::DimensionMismatch(format!(
            "n_train {n_train} exceeds {q} feature rows"
        )));
    }
    let m_count = q - n_train;
    if coefficients.ncols() != q || coefficients.nrows() != transforms.len() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients are {}x{}, expected {}x{q}",
            coefficients.nrows(),
            coefficients.ncols(),
            transforms.len()
        )));
    }
    let one = T::one();
    let mut entries = DMatrix::zeros(m_count, q);
    for (k, l) in transforms.iter().enumerate() {
        if l.ncols() != features.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "transform {k} has {} columns, features have {}",
                l.ncols(),
                features.ncols()
            )));
        }
        let y = transformed(features, l);
        let dist = pair_sq_dists(&y);
        for m in 0..m_count {
            let gm = n_train + m;
            for n in 0..q {
                if n == gm {
                    continue;
                }
                let d = dist[(gm, n)];
                let margin = one - d;
                let hinge = if margin > T::zero() {
                    margin
                } else {
                    T::zero()
                };
                entries[(m, n)] += d * coefficients[(k, gm)] * coefficients[(k, n)] - c * hinge;
            }
        }
    }
    if entries.iter().any(|v: &T| !v.is_finite()) {
        return Err(Error::NonFinite("psi entries".into()));
    }
    Ok(PsiMatrix { entries, n_train })
}

/// Optimal pre-symmetrization assignment of one test row: ones at every
/// negative coefficient, else a single one at the smallest coefficient
/// (ties toward the smallest column index). The excluded diagonal position
/// is always false.
pub fn row_assignment<T: Scalar>(psi: &PsiMatrix<T>, m: usize) -> Vec<bool> {
    let q = psi.n_total();
    let mut out = vec![false; q];
    let mut any_negative = false;
    for n in 0..q {
        if psi.is_excluded(m, n) {
            continue;
        }
        if psi.entry(m, n) < T::zero() {
            out[n] = true;
            any_negative = true;
        }
    }
    if !any_negative {
        let mut best: Option<(T, usize)> = None;
        for n in 0..q {
            if psi.is_excluded(m, n) {
                continue;
            }
            let v = psi.entry(m, n);
            best = match best {
                Some((bv, bn)) if bv <= v => Some((bv, bn)),
                _ => Some((v, n)),
            };
        }
        if let Some((_, n)) = best {
            out[n] = true;
        }
    }
    out
}

/// Overwrite the test-involving rows and columns of `s` with the optimal
/// assignment for `psi`, symmetrizing test-test conflicts by OR. The
/// train-train block is left untouched and the diagonal stays 1; every
/// test row ends with sum >= 2.
pub fn solve_similarity<T: Scalar>(psi: &PsiMatrix<T>, s: &mut SimilarityMatrix) -> Result<()> {
    let q = psi.n_total();
    if s.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "similarity is {}x{}, psi covers {q} samples",
            s.len(),
            s.len()
        )));
    }
    let n_train = psi.n_train();
    let rows: Vec<Vec<bool>> = (0..psi.n_test()).map(|m| row_assignment(psi, m)).collect();
    for (m, row) in rows.iter().enumerate() {
        let gm = n_train + m;
        for n in 0..q {
            if n == gm {
                continue;
            }
            let mut v = row[n];
            if n >= n_train {
                v = v || rows[n - n_train][gm];
            }
            s.set(gm, n, v);
            s.set(n, gm, v);
        }
        s.set(gm, gm, true);
    }
    Ok(())
}

/// Random initialization of the test-involving similarity entries:
/// symmetric Bernoulli(0.5) per free entry, then a repair pass giving every
/// test row at least one off-diagonal 1.
pub fn init_test_similarity(s: &mut SimilarityMatrix, n_train: usize, rng: &mut ChaCha8Rng) {
    let q = s.len();
    for gm in n_train..q {
        for n in 0..gm {
            let v = rng.gen_bool(0.5);
            s.set(gm, n, v);
            s.set(n, gm, v);
        }
        s.set(gm, gm, true);
    }
    for gm in n_train..q {
        if s.row_sum(gm) < 2 {
            let mut n = rng.gen_range(0..q - 1);
            if n >= gm {
                n += 1;
            }
            s.set(gm, n, true);
            s.set(n, gm, true);
        }
    }
}

/// The linear objective restricted to the free (test-involving) entries,
/// over ordered pairs. Used by diagnostics and by the trainer's
/// monotonicity guard.
pub fn free_entry_objective<T: Scalar>(psi: &PsiMatrix<T>, s: &SimilarityMatrix) -> T {
    let q = psi.n_total();
    let n_train = psi.n_train();
    let two = T::of(2.0);
    let mut total = T::zero();
    for m in 0..psi.n_test() {
        let gm = n_train + m;
        for n in 0..q {
            if psi.is_excluded(m, n) || !s.is_similar(gm, n) {
                continue;
            }
            // test-train pairs appear in one psi row but twice in the
            // ordered objective; test-test pairs appear in two psi rows
            let weight = if n >= n_train { T::one() } else { two };
            total += weight * psi.entry(m, n);
        }
    }
    total
}
