//! Block-1 minimization over the transforms: proximal subgradient descent.
//!
//! Each iteration takes a subgradient step on the nonsmooth
//! similarity/hinge loss and then applies singular-value thresholding, the
//! exact proximal map of the scaled nuclear norm. Fixed-step subgradient
//! iterates are not monotone, so the block tracks the objective at every
//! iterate and returns the best one; the block-level contract is
//! non-increase versus entry.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{finite, pair_sq_dists, singular_values, svd_checked, transformed};
use crate::scalar::Scalar;

/// Subgradient choice at the hinge kink `||L dx||^2 = 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum HingeBoundaryRule {
    /// Treat the hinge as inactive exactly at the kink.
    #[default]
    InactiveAtKink,
}

/// Configuration of one subgradient-descent block.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdConfig {
    /// Fixed step length; zero is accepted and makes the block a no-op.
    pub step_length: f64,
    /// Iterations per block invocation.
    pub iterations: usize,
    pub hinge_boundary_rule: HingeBoundaryRule,
}

impl PsdConfig {
    pub fn new(step_length: f64, iterations: usize) -> Result<Self> {
        if !(step_length >= 0.0 && step_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step_length must be finite and nonnegative, got {step_length}"
            )));
        }
        if iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        Ok(Self {
            step_length,
            iterations,
            hinge_boundary_rule: HingeBoundaryRule::InactiveAtKink,
        })
    }
}

/// Pair weights for the subgradient scatter: `s_mn g_m g_n` on similar
/// pairs, `-C` on dissimilar pairs strictly inside the unit margin, zero
/// otherwise (the kink counts as inactive).
fn pair_weights<T: Scalar>(
    dist: &DMatrix<T>,
    s: &SimilarityMatrix,
    g_k: &DVector<T>,
    c: T,
) -> DMatrix<T> {
    let q = dist.nrows();
    let one = T::one();
    let mut w = DMatrix::zeros(q, q);
    for m in 0..q {
        for n in (m + 1)..q {
            let v = if s.is_similar(m, n) {
                g_k[m] * g_k[n]
            } else if dist[(m, n)] < one {
                -c
            } else {
                T::zero()
            };
            w[(m, n)] = v;
            w[(n, m)] = v;
        }
    }
    w
}

/// `2 L sum_{m,n} w_mn dx dx^T`, accumulated in Laplacian form:
/// `sum w_mn dx dx^T = 2 X^T (diag(W 1) - W) X`.
fn subgradient_from_dists<T: Scalar>(
    l: &DMatrix<T>,
    features: &DMatrix<T>,
    dist: &DMatrix<T>,
    s: &SimilarityMatrix,
    g_k: &DVector<T>,
    c: T,
) -> DMatrix<T> {
    let w = pair_weights(dist, s, g_k, c);
    let mut lap_x = -(&w * features);
    for m in 0..features.nrows() {
        let row_sum = w.row(m).sum();
        let mut row = lap_x.row_mut(m);
        row += features.row(m) * row_sum;
    }
    let scatter = features.transpose() * lap_x;
    (l * scatter) * T::of(4.0)
}

/// Subgradient of the similarity/hinge loss of one metric with respect to
/// its transform.
pub fn loss_subgradient<T: Scalar>(
    l: &DMatrix<T>,
    features: &DMatrix<T>,
    s: &SimilarityMatrix,
    g_k: &DVector<T>,
    c: T,
) -> Result<DMatrix<T>> {
    if l.ncols() != features.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "transform has {} columns, features have {}",
            l.ncols(),
            features.ncols()
        )));
    }
    if g_k.len() != features.nrows() || s.len() != features.nrows() {
        return Err(Error::DimensionMismatch(
            "coefficients/similarity rows must match feature rows".into(),
        ));
    }
    let y = transformed(features, l);
    let dist = pair_sq_dists(&y);
    Ok(subgradient_from_dists(l, features, &dist, s, g_k, c))
}

/// Singular-value thresholding: `U diag([sigma - threshold]_+) V^T`, the
/// proximal map of `threshold * ||.||_*`. A zero threshold returns the
/// input unchanged.
pub fn svt<T: Scalar>(m: &DMatrix<T>, threshold: T) -> Result<DMatrix<T>> {
    Ok(svt_with_values(m, threshold)?.0)
}

/// As [`svt`], also returning the thresholded singular values (which are
/// the singular values of the result).
pub fn svt_with_values<T: Scalar>(
    m: &DMatrix<T>,
    threshold: T,
) -> Result<(DMatrix<T>, DVector<T>)> {
    if threshold < T::zero() {
        return Err(Error::InvalidConfig(
            "svt threshold must be nonnegative".into(),
        ));
    }
    if threshold == T::zero() {
        let values = singular_values(m)?;
        return Ok((m.clone(), values));
    }
    let svd = svd_checked(m)?;
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut values = svd.singular_values.clone();
    for v in values.iter_mut() {
        *v = if *v > threshold {
            *v - threshold
        } else {
            T::zero()
        };
    }
    let mut thresholded = u.clone();
    for (j, &sv) in values.iter().enumerate() {
        thresholded.column_mut(j).scale_mut(sv);
    }
    Ok((thresholded * v_t, values))
}

/// One per-iterate, per-metric record of the block trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdTraceRow<T> {
    pub iteration: usize,
    pub metric: usize,
    /// Loss terms of this metric plus its nuclear-norm term.
    pub objective: T,
    pub nuclear_norm: T,
}

/// Result of one block-1 invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlockResult<T: Scalar> {
    pub transforms: Vec<DMatrix<T>>,
    /// Sum over metrics of the best per-metric objective piece.
    pub best_objective: T,
    pub trace: Vec<PsdTraceRow<T>>,
}

struct PerMetric<T: Scalar> {
    best_l: DMatrix<T>,
    best_piece: T,
    trace: Vec<PsdTraceRow<T>>,
}

/// Loss of metric `k` at distance matrix `dist` (twice the upper triangle;
/// ordered-pair diagonal terms vanish).
fn loss_from_dists<T: Scalar>(
    dist: &DMatrix<T>,
    s: &SimilarityMatrix,
    g_k: &DVector<T>,
    c: T,
) -> T {
    let q = dist.nrows();
    let one = T::one();
    let two = T::of(2.0);
    let mut acc = T::zero();
    for m in 0..q {
        for n in (m + 1)..q {
            if s.is_similar(m, n) {
                acc += two * g_k[m] * g_k[n] * dist[(m, n)];
            } else {
                let margin = one - dist[(m, n)];
                if margin > T::zero() {
                    acc += two * c * margin;
                }
            }
        }
    }
    acc
}

fn run_metric<T: Scalar>(
    k: usize,
    l_entry: &DMatrix<T>,
    features: &DMatrix<T>,
    s: &SimilarityMatrix,
    g_k: &DVector<T>,
    c: T,
    lambda: T,
    cfg: &PsdConfig,
) -> Result<PerMetric<T>> {
    let eta = T::of(cfg.step_length);
    let threshold = eta * lambda;
    let mut l = l_entry.clone();
    let mut nuc = nuclear_norm_of(&l)?;
    let mut best_l = l.clone();
    let mut best_piece = T::zero();
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for t in 0..=cfg.iterations {
        let y = transformed(features, &l);
        let dist = pair_sq_dists(&y);
        let piece = loss_from_dists(&dist, s, g_k, c) + lambda * nuc;
        if !piece.is_finite() {
            return Err(Error::Divergence(format!(
                "metric {k}: non-finite objective at iteration {t} (step length too large?)"
            )));
        }
        trace.push(PsdTraceRow {
            iteration: t,
            metric: k,
            objective: piece,
            nuclear_norm: nuc,
        });
        if t == 0 || piece < best_piece {
            best_piece = piece;
            best_l = l.clone();
        }
        if t == cfg.iterations {
            break;
        }
        let step = subgradient_from_dists(&l, features, &dist, s, g_k, c) * eta;
        let (next, values) = svt_with_values(&(&l - step), threshold)?;
        l = next;
        nuc = values.iter().fold(T::zero(), |a, &v| a + v);
    }
    Ok(PerMetric {
        best_l,
        best_piece,
        trace,
    })
}

fn nuclear_norm_of<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    Ok(singular_values(m)?.iter().fold(T::zero(), |a, &v| a + v))
}

/// Run `cfg.iterations` proximal subgradient steps for each metric
/// independently (in parallel) and return the best-objective iterate per
/// metric. The per-metric pieces are independent, so the combination is
/// the best joint iterate as well.
pub fn psd_block<T: Scalar>(
    transforms: &[DMatrix<T>],
    coefficients: &DMatrix<T>,
    features: &DMatrix<T>,
    s: &SimilarityMatrix,
    c: T,
    lambda: T,
    cfg: &PsdConfig,
) -> Result<PsdBlockResult<T>> {
    if transforms.is_empty() {
        return Err(Error::InvalidConfig("no transforms to optimize".into()));
    }
    if coefficients.nrows() != transforms.len() || coefficients.ncols() != features.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients are {}x{}, expected {}x{}",
            coefficients.nrows(),
            coefficients.ncols(),
            transforms.len(),
            features.nrows()
        )));
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidConfig(
            "psd iterations must be at least 1".into(),
        ));
    }
    if !finite(features) {
        return Err(Error::NonFinite("features".into()));
    }
    let per_metric: Vec<Result<PerMetric<T>>> = transforms
        .par_iter()
        .enumerate()
        .map(|(k, l)| {
            let g_k: DVector<T> = coefficients.row(k).transpose();
            run_metric(k, l, features, s, &g_k, c, lambda, cfg)
        })
        .collect();
    let mut out_transforms = Vec::with_capacity(transforms.len());
    let mut best_objective = T::zero();
    let mut traces = Vec::new();
    for result in per_metric {
        let pm = result?;
        out_transforms.push(pm.best_l);
        best_objective += pm.best_piece;
        traces.push(pm.trace);
    }
    let mut trace = Vec::new();
    let rounds = traces.iter().map(Vec::len).max().unwrap_or(0);
    for t in 0..rounds {
        for per_k in &traces {
            if t < per_k.len() {
                trace.push(per_k[t].clone());
            }
        }
    }
    Ok(PsdBlockResult {
        transforms: out_transforms,
        best_objective,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn subgradient_two_similar_samples() {
        let features = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let s = SimilarityMatrix::from_labels(&[0, 0]).unwrap();
        let g = DVector::from_element(2, 1.0);
        let grad = loss_subgradient(&DMatrix::identity(2, 2), &features, &s, &g, 1.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        assert!((grad - expect).norm() < 1e-12);
    }

    #[test]
    fn subgradient_zero_when_hinge_inactive_everywhere() {
        let features = DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 0.0]);
        let s = SimilarityMatrix::from_labels(&[0, 1]).unwrap();
        let g = DVector::from_element(2, 0.5);
        let grad = loss_subgradient(&DMatrix::identity(2, 2), &features, &s, &g, 2.0).unwrap();
        assert_eq!(grad, DMatrix::zeros(2, 2));
    }

    #[test]
    fn subgradient_zero_when_coefficients_vanish() {
        let features = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
        let s = SimilarityMatrix::from_labels(&[0, 0, 0]).unwrap();
        let g = DVector::from_element(3, 0.0);
        let grad = loss_subgradient(&DMatrix::identity(2, 2), &features, &s, &g, 1.0).unwrap();
        assert_eq!(grad, DMatrix::zeros(2, 2));
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let mut rng = substream(61, "test-fd");
        for trial in 0..10 {
            let n = 6;
            let d = 3;
            let p = 2;
            let features = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0f64));
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let s = SimilarityMatrix::from_labels(&labels).unwrap();
            let g = DVector::from_fn(n, |_, _| rng.gen_range(0.0..1.0f64));
            let l = DMatrix::from_fn(p, d, |_, _| rng.gen_range(-0.8..0.8f64));
            let c = 1.3;

            // skip draws with a pair too close to the hinge kink
            let dist = pair_sq_dists(&transformed(&features, &l));
            let near_kink = (0..n).any(|m| {
                ((m + 1)..n).any(|nn| !s.is_similar(m, nn) && (dist[(m, nn)] - 1.0).abs() < 1e-3)
            });
            if near_kink {
                continue;
            }

            let grad = loss_subgradient(&l, &features, &s, &g, c).unwrap();
            let h = 1e-6;
            let loss_at = |l: &DMatrix<f64>| {
                let dist = pair_sq_dists(&transformed(&features, l));
                loss_from_dists(&dist, &s, &g, c)
            };
            let mut fd = DMatrix::zeros(p, d);
            for i in 0..p {
                for j in 0..d {
                    let mut lp = l.clone();
                    let mut lm = l.clone();
                    lp[(i, j)] += h;
                    lm[(i, j)] -= h;
                    fd[(i, j)] = (loss_at(&lp) - loss_at(&lm)) / (2.0 * h);
                }
            }
            let rel = (&grad - &fd).norm() / fd.norm().max(1e-12);
            assert!(rel < 1e-4, "trial {trial}: relative error {rel}");
        }
    }

    #[test]
    fn svt_diagonal_thresholding() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let out = svt(&m, 2.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((out - expect).norm() < 1e-12);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(svt(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn svt_values_match_thresholded_input_values() {
        let mut rng = substream(67, "test-svt");
        for _ in 0..20 {
            let m = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-2.0..2.0f64));
            let tau = rng.gen_range(0.0..1.5f64);
            let input_sv = {
                let mut v: Vec<f64> = singular_values(&m).unwrap().iter().copied().collect();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                v
            };
            let out = svt(&m, tau).unwrap();
            let mut out_sv: Vec<f64> = singular_values(&out).unwrap().iter().copied().collect();
            out_sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (si, so) in input_sv.iter().zip(out_sv.iter()) {
                assert!(((si - tau).max(0.0) - so).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn svt_is_non_expansive() {
        let mut rng = substream(71, "test-nonexp");
        for _ in 0..30 {
            let a = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-2.0..2.0f64));
            let b = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-2.0..2.0f64));
            let tau = rng.gen_range(0.01..1.0f64);
            let pa = svt(&a, tau).unwrap();
            let pb = svt(&b, tau).unwrap();
            assert!((pa - pb).norm() <= (&a - &b).norm() + 1e-12);
        }
    }

    #[test]
    fn svt_rejects_non_finite_input() {
        let mut m = DMatrix::from_element(2, 2, 1.0);
        m[(0, 0)] = f64::NAN;
        assert!(matches!(svt(&m, 0.5), Err(Error::SvdFailure(_))));
    }

    fn random_instance(
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> (
        Vec<DMatrix<f64>>,
        DMatrix<f64>,
        DMatrix<f64>,
        SimilarityMatrix,
    ) {
        let n = rng.gen_range(4..=10);
        let d = rng.gen_range(2..=4);
        let k = rng.gen_range(1..=2);
        let features = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let s = SimilarityMatrix::from_labels(&labels).unwrap();
        let transforms: Vec<DMatrix<f64>> = (0..k)
            .map(|_| DMatrix::from_fn(d, d, |_, _| rng.gen_range(-0.7..0.7)))
            .collect();
        let coefficients = DMatrix::from_fn(k, n, |_, _| 1.0 / k as f64);
        (transforms, coefficients, features, s)
    }

    #[test]
    fn zero_step_is_a_null_update() {
        let mut rng = substream(73, "test-null");
        let (transforms, coefficients, features, s) = random_instance(&mut rng);
        let cfg = PsdConfig::new(0.0, 5).unwrap();
        let out = psd_block(&transforms, &coefficients, &features, &s, 1.0, 0.0, &cfg).unwrap();
        assert_eq!(out.transforms, transforms);
        let first = out.trace.first().unwrap().objective;
        assert!(out
            .trace
            .iter()
            .filter(|r| r.metric == 0)
            .all(|r| r.objective == first));
    }

    #[test]
    fn huge_lambda_drives_transforms_to_zero() {
        let mut rng = substream(79, "test-huge");
        let (transforms, coefficients, features, s) = random_instance(&mut rng);
        let c = 1.0;
        let cfg = PsdConfig::new(1.0, 10).unwrap();
        let lambda = 1e6;
        let out = psd_block(&transforms, &coefficients, &features, &s, c, lambda, &cfg).unwrap();
        for l in &out.transforms {
            assert!(l.norm() < 1e-12, "transform not annihilated: {}", l.norm());
        }
        // objective at the fixed point is the pure hinge value
        let q = features.nrows();
        let mut hinge = 0.0;
        for m in 0..q {
            for n in (m + 1)..q {
                if !s.is_similar(m, n) {
                    hinge += 2.0 * c;
                }
            }
        }
        let k = transforms.len() as f64;
        let zeros: Vec<DMatrix<f64>> = transforms
            .iter()
            .map(|l| DMatrix::zeros(l.nrows(), l.ncols()))
            .collect();
        let fixed = psd_block(&zeros, &coefficients, &features, &s, c, lambda, &cfg).unwrap();
        assert!((fixed.best_objective - hinge * k).abs() < 1e-9);
    }

    #[test]
    fn best_iterate_never_exceeds_entry_objective() {
        let mut rng = substream(83, "test-best");
        for _ in 0..50 {
            let (transforms, coefficients, features, s) = random_instance(&mut rng);
            let cfg = PsdConfig::new(10f64.powi(-rng.gen_range(1..5)), 20).unwrap();
            let lambda = rng.gen_range(0.0..0.5);
            let out =
                psd_block(&transforms, &coefficients, &features, &s, 1.0, lambda, &cfg).unwrap();
            let entry: f64 = out
                .trace
                .iter()
                .filter(|r| r.iteration == 0)
                .map(|r| r.objective)
                .sum();
            assert!(out.best_objective <= entry);
        }
    }

    #[test]
    fn best_objective_is_monotone_in_iteration_budget() {
        let mut rng = substream(89, "test-trend");
        let (transforms, coefficients, features, s) = random_instance(&mut rng);
        let mut last = f64::INFINITY;
        for iters in [10usize, 40, 160] {
            let cfg = PsdConfig::new(1e-2, iters).unwrap();
            let out = psd_block(&transforms, &coefficients, &features, &s, 1.0, 0.1, &cfg).unwrap();
            assert!(out.best_objective <= last + 1e-12);
            last = out.best_objective;
        }
    }
}
