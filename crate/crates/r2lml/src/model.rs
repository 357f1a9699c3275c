//! The learned local metric: K linear transforms plus per-sample
//! combination coefficients, the training objective, and distances.
//!
//! The squared distance between samples `m` and `n` is
//! `sum_k g_m[k] * g_n[k] * ||L_k (x_m - x_n)||^2`: a conical combination of
//! K Mahalanobis metrics whose relevance is sample-specific. Coefficient
//! vectors live on the probability simplex; with K = 1 the model reduces to
//! a single global metric.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dataset::{SimilarityMatrix, StandardizationParams};
use crate::error::{Error, Result};
use crate::linalg::{finite, pair_sq_dists, singular_values, transformed};
use crate::rng::substream;
use crate::scalar::Scalar;

/// Simplex-sum tolerance for in-memory coefficient columns.
pub const COEFF_SUM_TOL: f64 = 1e-8;
/// Looser simplex tolerance applied when deserializing model files.
pub const COEFF_SUM_TOL_LOAD: f64 = 1e-6;

/// Which learning variant produced (or should consume) test coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Test coefficients copied from the Euclidean-nearest training sample.
    Efficient,
    /// Test coefficients learned jointly with the training set.
    Transductive,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Efficient => "e-r2lml",
            Method::Transductive => "t-r2lml",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e-r2lml" | "e" | "efficient" => Ok(Method::Efficient),
            "t-r2lml" | "t" | "transductive" => Ok(Method::Transductive),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected e-r2lml or t-r2lml)"
            ))),
        }
    }
}

/// Training hyperparameters, kept with the model for reproducibility.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hyperparams {
    /// Hinge penalty weight on dissimilar pairs.
    pub c: f64,
    /// Nuclear-norm regularization weight.
    pub lambda: f64,
    /// Number of local metrics.
    pub k: usize,
    /// Fixed step length of the proximal subgradient descent.
    pub step_length: f64,
    /// Outer epochs (block-1/block-2 alternations).
    pub epochs: usize,
    /// Subgradient iterations per epoch.
    pub psd_iters_per_epoch: usize,
    pub mm_max_iters: usize,
    pub mm_tol: f64,
    /// Outer loop stops when the objective changes by less than this.
    pub outer_tol: f64,
    /// Outer iteration cap for the transductive three-block loop.
    pub max_outer_blocks: usize,
    /// Residual tolerance of the per-sample simplex bisection.
    pub bisection_tol: f64,
    pub seed: u64,
    /// Output dimension of each transform; `None` means P = D.
    pub p: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            c: 1.0,
            lambda: 0.0,
            k: 1,
            step_length: 1e-6,
            epochs: 5,
            psd_iters_per_epoch: 500,
            mm_max_iters: 3000,
            mm_tol: 1e-3,
            outer_tol: 1e-4,
            max_outer_blocks: 5,
            bisection_tol: 1e-10,
            seed: 0,
            p: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        fn positive(v: f64, name: &str) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        }
        positive(self.c, "c")?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        positive(self.step_length, "step_length")?;
        positive(self.mm_tol, "mm_tol")?;
        positive(self.outer_tol, "outer_tol")?;
        positive(self.bisection_tol, "bisection_tol")?;
        for (v, name) in [
            (self.k, "k"),
            (self.epochs, "epochs"),
            (self.psd_iters_per_epoch, "psd_iters_per_epoch"),
            (self.mm_max_iters, "mm_max_iters"),
            (self.max_outer_blocks, "max_outer_blocks"),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if let Some(p) = self.p {
            if p == 0 || p > dim {
                return Err(Error::InvalidConfig(format!(
                    "p must lie in 1..={dim}, got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Effective output dimension.
    pub fn output_dim(&self, dim: usize) -> usize {
        self.p.unwrap_or(dim)
    }
}

/// A trained local metric model. Immutable after construction.
///
/// `coefficients` has one column per sample covered at training time: N
/// columns for the nearest-prototype variant, N+M when test samples were
/// embedded transductively (the first N always correspond to the embedded
/// training set).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMetricModel<T: Scalar> {
    pub transforms: Vec<DMatrix<T>>,
    pub coefficients: DMatrix<T>,
    pub train_features: DMatrix<T>,
    pub train_labels: Vec<usize>,
    pub hyper: Hyperparams,
    pub standardization: Option<StandardizationParams<T>>,
}

impl<T: Scalar> LocalMetricModel<T> {
    pub fn k(&self) -> usize {
        self.transforms.len()
    }

    pub fn dim(&self) -> usize {
        self.train_features.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.transforms.first().map_or(0, |l| l.nrows())
    }

    pub fn n_train(&self) -> usize {
        self.train_features.nrows()
    }

    /// Coefficient columns learned for transductive test samples, if any.
    pub fn transductive_coefficients(&self) -> Option<DMatrix<T>> {
        let extra = self.coefficients.ncols().checked_sub(self.n_train())?;
        if extra == 0 {
            return None;
        }
        Some(
            self.coefficients
                .columns(self.n_train(), extra)
                .into_owned(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_tol(COEFF_SUM_TOL)
    }

    pub fn validate_with_tol(&self, sum_tol: f64) -> Result<()> {
        if self.transforms.is_empty() {
            return Err(Error::InvalidConfig("model has no transforms".into()));
        }
        let (p, d) = (self.output_dim(), self.dim());
        for (k, l) in self.transforms.iter().enumerate() {
            if l.nrows() != p || l.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "transform {k} is {}x{}, expected {p}x{d}",
                    l.nrows(),
                    l.ncols()
                )));
            }
            if !finite(l) {
                return Err(Error::NonFinite(format!("transform {k}")));
            }
        }
        if self.coefficients.nrows() != self.k() || self.coefficients.ncols() < self.n_train() {
            return Err(Error::DimensionMismatch(format!(
                "coefficients are {}x{}, expected {}x>={}",
                self.coefficients.nrows(),
                self.coefficients.ncols(),
                self.k(),
                self.n_train()
            )));
        }
        if self.train_labels.len() != self.n_train() {
            return Err(Error::DimensionMismatch("labels vs train features".into()));
        }
        check_simplex_columns(&self.coefficients, T::of(sum_tol))?;
        if self.k() == 1 {
            let off = self.coefficients.iter().any(|&g| g != T::one());
            if off {
                return Err(Error::InfeasibleCoefficients(
                    "K = 1 requires all coefficients equal to 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Squared local distance between two points with given coefficient
    /// vectors. Symmetric in its arguments and zero when `x_m == x_n`.
    pub fn local_distance_sq(
        &self,
        g_m: &DVector<T>,
        g_n: &DVector<T>,
        x_m: &DVector<T>,
        x_n: &DVector<T>,
    ) -> Result<T> {
        let k = self.k();
        if g_m.len() != k || g_n.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vectors must have length {k}"
            )));
        }
        if x_m.len() != self.dim() || x_n.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "points must have dimension {}",
                self.dim()
            )));
        }
        let dx = x_m - x_n;
        let mut total = T::zero();
        for (kk, l) in self.transforms.iter().enumerate() {
            let w = g_m[kk] * g_n[kk];
            if w != T::zero() {
                total += w * (l * &dx).norm_squared();
            }
        }
        Ok(total)
    }

    /// Coefficient column of sample `n`.
    pub fn coefficient_column(&self, n: usize) -> DVector<T> {
        self.coefficients.column(n).into_owned()
    }

    /// Coefficients for an unseen point: the column of its Euclidean-nearest
    /// training sample, ties broken toward the smallest training index.
    pub fn assign_test_g(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if self.n_train() == 0 {
            return Err(Error::EmptyInput("model has no training samples".into()));
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        let mut best = (T::zero(), 0usize);
        let mut first = true;
        for n in 0..self.n_train() {
            let d = (self.train_features.row(n).transpose() - x).norm_squared();
            if first || d < best.0 {
                best = (d, n);
                first = false;
            }
        }
        Ok(self.coefficient_column(best.1))
    }

    /// Count of triangle-inequality violations over uniformly sampled
    /// triplets of training samples. The learned distance is a semi-metric,
    /// so violations are possible; this diagnostic measures how often.
    pub fn triangle_violations(&self, triplets: usize, seed: u64) -> Result<usize> {
        let n = self.n_train();
        if n < 3 {
            return Ok(0);
        }
        let mut rng = substream(seed, "triangle");
        let xs: Vec<DVector<T>> = (0..n)
            .map(|i| self.train_features.row(i).transpose())
            .collect();
        let mut violations = 0usize;
        let slack = T::of(1e-12);
        for _ in 0..triplets {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n);
            while b == a {
                b = rng.gen_range(0..n);
            }
            let mut c = rng.gen_range(0..n);
            while c == a || c == b {
                c = rng.gen_range(0..n);
            }
            let (ga, gb, gc) = (
                self.coefficient_column(a),
                self.coefficient_column(b),
                self.coefficient_column(c),
            );
            let dac = self.local_distance_sq(&ga, &gc, &xs[a], &xs[c])?.sqrt();
            let dab = self.local_distance_sq(&ga, &gb, &xs[a], &xs[b])?.sqrt();
            let dbc = self.local_distance_sq(&gb, &gc, &xs[b], &xs[c])?.sqrt();
            if dac > dab + dbc + slack {
                violations += 1;
            }
        }
        Ok(violations)
    }
}

fn check_simplex_columns<T: Scalar>(coefficients: &DMatrix<T>, sum_tol: T) -> Result<()> {
    let range_slack = T::of(1e-12);
    for n in 0..coefficients.ncols() {
        let mut sum = T::zero();
        for k in 0..coefficients.nrows() {
            let g = coefficients[(k, n)];
            if !g.is_finite() || g < -range_slack || g > T::one() + range_slack {
                return Err(Error::InfeasibleCoefficients(format!(
                    "coefficient ({k},{n}) = {} outside [0,1]",
                    g.to_f64_value()
                )));
            }
            sum += g;
        }
        if (sum - T::one()).abs() > sum_tol {
            return Err(Error::InfeasibleCoefficients(format!(
                "coefficient column {n} sums to {}",
                sum.to_f64_value()
            )));
        }
    }
    Ok(())
}

/// Nuclear norm: sum of singular values.
pub fn nuclear_norm<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    Ok(singular_values(m)?.iter().fold(T::zero(), |a, &s| a + s))
}

/// The full training objective over ordered sample pairs:
/// similarity-weighted squared distances, the hinge penalty pushing
/// dissimilar pairs beyond unit distance, and the nuclear-norm term.
pub fn objective<T: Scalar>(
    transforms: &[DMatrix<T>],
    coefficients: &DMatrix<T>,
    features: &DMatrix<T>,
    s: &SimilarityMatrix,
    c: T,
    lambda: T,
) -> Result<T> {
    let q = features.nrows();
    if s.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "similarity is {}x{} but features have {q} rows",
            s.len(),
            s.len()
        )));
    }
    if coefficients.ncols() != q || coefficients.nrows() != transforms.len() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients are {}x{}, expected {}x{q}",
            coefficients.nrows(),
            coefficients.ncols(),
            transforms.len()
        )));
    }
    if !finite(features) || !finite(coefficients) {
        return Err(Error::NonFinite("objective inputs".into()));
    }
    let mut total = T::zero();
    for (k, l) in transforms.iter().enumerate() {
        if !finite(l) {
            return Err(Error::NonFinite(format!("transform {k}")));
        }
        total += metric_loss(l, coefficients, k, features, s, c)?;
        total += lambda * nuclear_norm(l)?;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("objective value".into()));
    }
    Ok(total)
}

/// The loss terms of a single metric (no regularizer). Ordered pairs are
/// summed as twice the upper triangle; diagonal terms vanish identically.
pub(crate) fn metric_loss<T: Scalar>(
    l: &DMatrix<T>,
    coefficients: &DMatrix<T>,
    k: usize,
    features: &DMatrix<T>,
    s: &SimilarityMatrix,
    c: T,
) -> Result<T> {
    if l.ncols() != features.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "transform has {} columns but features have {}",
            l.ncols(),
            features.ncols()
        )));
    }
    let y = transformed(features, l);
    let dist = pair_sq_dists(&y);
    let q = features.nrows();
    let one = T::one();
    let two = T::of(2.0);
    let mut acc = T::zero();
    for m in 0..q {
        for n in (m + 1)..q {
            if s.is_similar(m, n) {
                acc += two * coefficients[(k, m)] * coefficients[(k, n)] * dist[(m, n)];
            } else {
                let margin = one - dist[(m, n)];
                if margin > T::zero() {
                    acc += two * c * margin;
                }
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(
        transforms: Vec<DMatrix<f64>>,
        coefficients: DMatrix<f64>,
    ) -> LocalMetricModel<f64> {
        let n = coefficients.ncols();
        let d = transforms[0].ncols();
        LocalMetricModel {
            transforms,
            coefficients,
            train_features: DMatrix::from_fn(n, d, |i, j| (i * d + j) as f64),
            train_labels: vec![0; n],
            hyper: Hyperparams::default(),
            standardization: None,
        }
    }

    #[test]
    fn single_identity_metric_is_euclidean() {
        let model = model_with(
            vec![DMatrix::identity(2, 2)],
            DMatrix::from_element(1, 3, 1.0),
        );
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = DVector::from_vec(vec![4.0, 6.0]);
        let g = DVector::from_vec(vec![1.0]);
        let d = model.local_distance_sq(&g, &g, &x, &y).unwrap();
        assert_eq!(d, 25.0);
    }

    #[test]
    fn disjoint_coefficient_support_gives_zero() {
        let model = model_with(
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 3.0],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        );
        let gm = DVector::from_vec(vec![1.0, 0.0]);
        let gn = DVector::from_vec(vec![0.0, 1.0]);
        let x = DVector::from_vec(vec![5.0, -2.0]);
        let y = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(model.local_distance_sq(&gm, &gn, &x, &y).unwrap(), 0.0);
    }

    #[test]
    fn two_metric_hand_evaluation() {
        // g_m = g_n = (0.5, 0.5), L1 = I, L2 = 2I, dx = (1, 0):
        // 0.25 * 1 + 0.25 * 4 = 1.25
        let model = model_with(
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 2.0],
            DMatrix::from_element(2, 2, 0.5),
        );
        let g = DVector::from_vec(vec![0.5, 0.5]);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 0.0]);
        let d = model.local_distance_sq(&g, &g, &x, &y).unwrap();
        assert!((d - 1.25).abs() < 1e-15);
    }

    #[test]
    fn distance_symmetry_and_nonnegativity() {
        let mut rng = substream(17, "test-dist");
        let model = model_with(
            vec![
                DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0)),
                DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0)),
            ],
            DMatrix::from_element(2, 4, 0.5),
        );
        for _ in 0..100 {
            let gm = DVector::from_vec(vec![0.3, 0.7]);
            let gn = DVector::from_vec(vec![0.9, 0.1]);
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0));
            let y = DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0));
            let a = model.local_distance_sq(&gm, &gn, &x, &y).unwrap();
            let b = model.local_distance_sq(&gn, &gm, &y, &x).unwrap();
            assert_eq!(a, b);
            assert!(a >= 0.0);
            assert_eq!(model.local_distance_sq(&gm, &gn, &x, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn assign_test_g_exact_match_and_tie_rule() {
        let mut model = model_with(
            vec![DMatrix::identity(1, 1)],
            DMatrix::from_row_slice(1, 5, &[1.0; 5]),
        );
        model.train_features = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        // coefficient columns must be distinguishable: use K = 2
        model.transforms = vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)];
        model.coefficients = DMatrix::from_fn(2, 5, |k, n| {
            if k == 0 {
                n as f64 / 10.0
            } else {
                1.0 - n as f64 / 10.0
            }
        });
        let g = model.assign_test_g(&DVector::from_vec(vec![3.0])).unwrap();
        assert_eq!(g[0], 0.3);
        // equidistant from samples 1 and 2 -> smaller index wins
        let g = model.assign_test_g(&DVector::from_vec(vec![1.5])).unwrap();
        assert_eq!(g[0], 0.1);
    }

    #[test]
    fn assign_test_g_matches_brute_force_scan() {
        let mut rng = substream(23, "test-assign");
        let n = 20;
        let d = 4;
        let feats = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0f64));
        let mut model = model_with(
            vec![DMatrix::identity(d, d), DMatrix::identity(d, d)],
            DMatrix::from_fn(2, n, |k, i| {
                if k == 0 {
                    i as f64 / n as f64
                } else {
                    1.0 - i as f64 / n as f64
                }
            }),
        );
        model.train_features = feats.clone();
        for _ in 0..50 {
            let x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0f64));
            let expected = (0..n)
                .map(|i| ((feats.row(i).transpose() - &x).norm_squared(), i))
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap()
                .1;
            let g = model.assign_test_g(&x).unwrap();
            assert_eq!(g, model.coefficient_column(expected));
        }
    }

    #[test]
    fn nuclear_norm_identity_rank1_and_oracle() {
        assert!((nuclear_norm(&DMatrix::<f64>::identity(3, 3)).unwrap() - 3.0).abs() < 1e-12);
        let u = DVector::from_vec(vec![0.6f64, 0.8]);
        let v = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let rank1 = u * v.transpose();
        assert!((nuclear_norm(&rank1).unwrap() - 1.0).abs() < 1e-12);

        let mut rng = substream(31, "test-nuc");
        let m = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-1.0..1.0f64));
        // oracle: sqrt of eigenvalues of MᵀM, summed
        let gram = m.transpose() * &m;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let oracle: f64 = eig.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).sum();
        assert!((nuclear_norm(&m).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn objective_worked_examples() {
        // two similar samples, K=1, g=1, L=I, lambda=0, dx=(1,0) -> 2
        let features = DMatrix::from_row_slice(2, 2, &[0.0f64, 0.0, 1.0, 0.0]);
        let s = SimilarityMatrix::from_labels(&[0, 0]).unwrap();
        let transforms = vec![DMatrix::identity(2, 2)];
        let coeff = DMatrix::from_element(1, 2, 1.0);
        let v = objective(&transforms, &coeff, &features, &s, 1.0, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-15);

        // same with lambda=1, L=I (nuclear norm 2) -> 4
        let v = objective(&transforms, &coeff, &features, &s, 1.0, 1.0).unwrap();
        assert!((v - 4.0).abs() < 1e-12);

        // all transforms zero, one dissimilar pair, lambda=0 -> 2C
        let s = SimilarityMatrix::from_labels(&[0, 1]).unwrap();
        let zero = vec![DMatrix::zeros(2, 2)];
        let v = objective(&zero, &coeff, &features, &s, 3.5, 0.0).unwrap();
        assert!((v - 7.0).abs() < 1e-15);
    }

    #[test]
    fn objective_permutation_invariance() {
        let mut rng = substream(37, "test-perm");
        let n = 6;
        let d = 3;
        let features = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0f64));
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let s = SimilarityMatrix::from_labels(&labels).unwrap();
        let transforms = vec![
            DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0f64)),
            DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0f64)),
        ];
        let coeff = DMatrix::from_fn(2, n, |k, i| if (i + k) % 2 == 0 { 0.25 } else { 0.75 });
        let base = objective(&transforms, &coeff, &features, &s, 2.0, 0.5).unwrap();

        let perm: Vec<usize> = vec![3, 1, 4, 0, 5, 2];
        let mut pf = DMatrix::zeros(n, d);
        let mut pc = DMatrix::zeros(2, n);
        let mut pl = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            pf.row_mut(new).copy_from(&features.row(old));
            pc.column_mut(new).copy_from(&coeff.column(old));
            pl[new] = labels[old];
        }
        let ps = SimilarityMatrix::from_labels(&pl).unwrap();
        let permuted = objective(&transforms, &pc, &pf, &ps, 2.0, 0.5).unwrap();
        assert!((base - permuted).abs() < 1e-9, "{base} vs {permuted}");
    }

    #[test]
    fn objective_single_metric_matches_independent_double_loop() {
        let mut rng = substream(41, "test-single");
        let n = 7;
        let d = 3;
        let features = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0f64));
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let s = SimilarityMatrix::from_labels(&labels).unwrap();
        let l = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0f64));
        let coeff = DMatrix::from_element(1, n, 1.0);
        let c = 1.7;
        let ours = objective(&[l.clone()], &coeff, &features, &s, c, 0.0).unwrap();

        // independent global-metric double loop over ordered pairs
        let mut expect = 0.0;
        for m in 0..n {
            for nn in 0..n {
                let dx = features.row(m) - features.row(nn);
                let dist = (&l * dx.transpose()).norm_squared();
                if labels[m] == labels[nn] {
                    expect += dist;
                } else {
                    expect += c * (1.0 - dist).max(0.0);
                }
            }
        }
        assert!((ours - expect).abs() < 1e-9);
    }

    #[test]
    fn k1_model_requires_unit_coefficients() {
        let model = model_with(
            vec![DMatrix::identity(2, 2)],
            DMatrix::from_element(1, 3, 0.99),
        );
        assert!(model.validate().is_err());
    }

    #[test]
    fn euclidean_model_has_no_triangle_violations() {
        let mut rng = substream(53, "test-tri");
        let mut model = model_with(
            vec![DMatrix::identity(3, 3)],
            DMatrix::from_element(1, 10, 1.0),
        );
        model.train_features = DMatrix::from_fn(10, 3, |_, _| rng.gen_range(-1.0..1.0));
        assert_eq!(model.triangle_violations(2000, 7).unwrap(), 0);
    }
}
