//! Block-2 minimization over the coefficient vectors.
//!
//! With the transforms fixed, the loss reduces to a quadratic form
//! `g^T S_tilde g` over the product of per-sample simplices, where
//! `S_tilde` is block-diagonal with one similarity-weighted distance matrix
//! per metric. The blocks are hollow, so the form is indefinite; a
//! majorize-minimize scheme turns each step into a strongly convex problem
//! whose unique minimizer has a closed form with one Lagrange multiplier
//! per sample, found by bisection.

use nalgebra::{DMatrix, DVector};

use crate::dataset::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{pair_sq_dists, symmetric_lambda_max, transformed};
use crate::scalar::Scalar;

/// The block-diagonal quadratic form of the coefficient subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm<T: Scalar> {
    sbar_blocks: Vec<DMatrix<T>>,
    lambda_max: T,
}

impl<T: Scalar> QuadraticForm<T> {
    /// Validates the blocks (symmetric within 1e-10, hollow, nonnegative)
    /// and computes the largest eigenvalue of the block-diagonal assembly.
    pub fn new(sbar_blocks: Vec<DMatrix<T>>) -> Result<Self> {
        if sbar_blocks.is_empty() {
            return Err(Error::InvalidConfig(
                "quadratic form needs at least one block".into(),
            ));
        }
        let q = sbar_blocks[0].nrows();
        let sym_tol = T::of(1e-10);
        for (k, b) in sbar_blocks.iter().enumerate() {
            if b.nrows() != q || b.ncols() != q {
                return Err(Error::DimensionMismatch(format!(
                    "block {k} is {}x{}, expected {q}x{q}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            for m in 0..q {
                if b[(m, m)] != T::zero() {
                    return Err(Error::InvalidConfig(format!("block {k} is not hollow")));
                }
                for n in 0..m {
                    if (b[(m, n)] - b[(n, m)]).abs() > sym_tol {
                        return Err(Error::InvalidConfig(format!("block {k} is not symmetric")));
                    }
                    if b[(m, n)] < T::zero() {
                        return Err(Error::InvalidConfig(format!(
                            "block {k} has a negative entry"
                        )));
                    }
                }
            }
        }
        let lambda_max = largest_eigenvalue(&sbar_blocks)?;
        Ok(Self {
            sbar_blocks,
            lambda_max,
        })
    }

    pub fn k(&self) -> usize {
        self.sbar_blocks.len()
    }

    pub fn q(&self) -> usize {
        self.sbar_blocks[0].nrows()
    }

    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }

    /// The majorization shift `mu = -lambda_max`.
    pub fn mu(&self) -> T {
        -self.lambda_max
    }

    pub fn blocks(&self) -> &[DMatrix<T>] {
        &self.sbar_blocks
    }

    /// `q(g) = g^T S_tilde g`, evaluated blockwise.
    pub fn value(&self, g: &DVector<T>) -> T {
        let q = self.q();
        let mut total = T::zero();
        for (k, block) in self.sbar_blocks.iter().enumerate() {
            let gk = g.rows(k * q, q);
            total += (block * gk).dot(&gk.clone_owned());
        }
        total
    }

    /// `S_tilde g`, evaluated blockwise (the KQ x KQ matrix is never formed).
    pub fn apply(&self, g: &DVector<T>) -> DVector<T> {
        let q = self.q();
        let mut out = DVector::zeros(self.k() * q);
        for (k, block) in self.sbar_blocks.iter().enumerate() {
            let gk = g.rows(k * q, q).clone_owned();
            out.rows_mut(k * q, q).copy_from(&(block * gk));
        }
        out
    }
}

/// The similarity-weighted squared-distance matrix of one metric:
/// entry `(m,n)` is `s_mn ||L dx_mn||^2`. Symmetric, hollow, nonnegative.
pub fn build_sbar<T: Scalar>(
    l: &DMatrix<T>,
    features: &DMatrix<T>,
    s: &SimilarityMatrix,
) -> Result<DMatrix<T>> {
    if l.ncols() != features.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "transform has {} columns, features have {}",
            l.ncols(),
            features.ncols()
        )));
    }
    if s.len() != features.nrows() {
        return Err(Error::DimensionMismatch(
            "similarity size must match feature rows".into(),
        ));
    }
    let y = transformed(features, l);
    let mut dist = pair_sq_dists(&y);
    let q = features.nrows();
    for m in 0..q {
        for n in (m + 1)..q {
            if !s.is_similar(m, n) {
                dist[(m, n)] = T::zero();
                dist[(n, m)] = T::zero();
            }
        }
    }
    Ok(dist)
}

/// Largest eigenvalue over the blocks of the block-diagonal assembly.
pub fn largest_eigenvalue<T: Scalar>(blocks: &[DMatrix<T>]) -> Result<T> {
    if blocks.is_empty() {
        return Err(Error::InvalidConfig("no blocks".into()));
    }
    let mut best: Option<T> = None;
    for block in blocks {
        let lm = symmetric_lambda_max(block)?;
        best = Some(match best {
            Some(b) if b >= lm => b,
            _ => lm,
        });
    }
    Ok(best.expect("at least one block"))
}

/// Unique minimizer of `(c/2)||g||^2 + d^T g` over the product of
/// per-sample simplices: `g_i = (1/c)[alpha_n - d_i]_+` with one multiplier
/// `alpha_n` per sample solving `sum_k [alpha_n - d_{n + kQ}]_+ = c` by
/// bisection on `[min_k d, min_k d + c]`.
///
/// Each per-sample block is renormalized after the bisection so the simplex
/// sums are exact. Returns `(g, alpha)`.
pub fn theorem1_project<T: Scalar>(
    c: T,
    d: &DVector<T>,
    k: usize,
    tol: T,
) -> Result<(DVector<T>, DVector<T>)> {
    if c <= T::zero() {
        return Err(Error::InvalidConfig(
            "projection constant c must be positive".into(),
        ));
    }
    if k == 0 || d.len() % k != 0 {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} does not split into {k} blocks",
            d.len()
        )));
    }
    let q = d.len() / k;
    let mut g = DVector::zeros(d.len());
    let mut alpha = DVector::zeros(q);

    if k == 1 {
        // single metric: the simplex is the point {1}
        for n in 0..q {
            g[n] = T::one();
            alpha[n] = d[n] + c;
        }
        return Ok((g, alpha));
    }

    for n in 0..q {
        let ds: Vec<T> = (0..k).map(|kk| d[kk * q + n]).collect();
        let lo = ds.iter().fold(ds[0], |a, &b| if b < a { b } else { a });
        let residual = |a: T| {
            ds.iter().fold(-c, |acc, &dv| {
                let e = a - dv;
                if e > T::zero() {
                    acc + e
                } else {
                    acc
                }
            })
        };
        let mut a = lo;
        let mut b = lo + c;
        let mut x = b;
        if residual(b).abs() > tol {
            for _ in 0..200 {
                x = (a + b) * T::of(0.5);
                let r = residual(x);
                if r.abs() <= tol {
                    break;
                }
                if r > T::zero() {
                    b = x;
                } else {
                    a = x;
                }
            }
        }
        alpha[n] = x;
        let mut sum = T::zero();
        for kk in 0..k {
            let e = x - ds[kk];
            let v = if e > T::zero() { e / c } else { T::zero() };
            g[kk * q + n] = v;
            sum += v;
        }
        if sum > T::zero() {
            for kk in 0..k {
                g[kk * q + n] /= sum;
            }
        } else {
            let uniform = T::one() / T::of(k as f64);
            for kk in 0..k {
                g[kk * q + n] = uniform;
            }
        }
    }
    Ok((g, alpha))
}

/// Result of one block-2 invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct MmResult<T: Scalar> {
    pub g: DVector<T>,
    /// `(iteration, q-value)` for every accepted iterate, starting at entry.
    pub trace: Vec<(usize, T)>,
}

fn check_feasible<T: Scalar>(g: &DVector<T>, k: usize, q: usize) -> Result<()> {
    if g.len() != k * q {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vector has length {}, expected {}",
            g.len(),
            k * q
        )));
    }
    let tol = T::of(1e-6);
    for n in 0..q {
        let mut sum = T::zero();
        for kk in 0..k {
            let v = g[kk * q + n];
            if v < -tol || v > T::one() + tol {
                return Err(Error::InfeasibleCoefficients(format!(
                    "entry ({kk},{n}) = {} outside [0,1]",
                    v.to_f64_value()
                )));
            }
            sum += v;
        }
        if (sum - T::one()).abs() > tol {
            return Err(Error::InfeasibleCoefficients(format!(
                "sample {n} sums to {}",
                sum.to_f64_value()
            )));
        }
    }
    Ok(())
}

/// Majorize-minimize loop: each step minimizes the convex majorizer
/// `2 g'^T H g - mu ||g||^2` over the feasible set via
/// [`theorem1_project`] with `c = -2 mu` and `d = 2 H g'`. The value
/// `q(g)` never increases; the loop stops when the decrease drops below
/// `mm_tol` or after `max_iters` steps.
pub fn mm_block<T: Scalar>(
    g_init: &DVector<T>,
    qf: &QuadraticForm<T>,
    max_iters: usize,
    mm_tol: T,
    bisection_tol: T,
) -> Result<MmResult<T>> {
    let (k, q) = (qf.k(), qf.q());
    check_feasible(g_init, k, q)?;
    let mut g = g_init.clone();
    let mut q_prev = qf.value(&g);
    let mut trace = vec![(0usize, q_prev)];

    if qf.lambda_max() <= T::zero() {
        // zero form: every feasible point is optimal; return the projection
        // of the zero linear term (uniform coefficients)
        let (uniform, _) = theorem1_project(T::one(), &DVector::zeros(k * q), k, bisection_tol)?;
        let value = qf.value(&uniform);
        trace.push((1, value));
        return Ok(MmResult { g: uniform, trace });
    }

    let c = T::of(2.0) * qf.lambda_max();
    let mu = qf.mu();
    for t in 1..=max_iters {
        // d = 2 H g = 2 (S_tilde + mu I) g
        let mut d = qf.apply(&g) * T::of(2.0);
        d.axpy(T::of(2.0) * mu, &g, T::one());
        let (g_new, _) = theorem1_project(c, &d, k, bisection_tol)?;
        let q_new = qf.value(&g_new);
        if q_new > q_prev {
            // numerical plateau: the exact majorizer minimum cannot increase q
            break;
        }
        g = g_new;
        trace.push((t, q_new));
        let decrease = q_prev - q_new;
        q_prev = q_new;
        if decrease < mm_tol {
            break;
        }
    }
    Ok(MmResult { g, trace })
}
