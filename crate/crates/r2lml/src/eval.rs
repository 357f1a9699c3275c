//! k-NN classification under the learned metric, accuracy computation, and
//! paired statistical comparison (McNemar with Holm's step-down FWER
//! control).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{LocalMetricModel, Method};
use crate::scalar::Scalar;

mod gamma;

pub use gamma::chi_square_survival_1df;

/// Predictions with optional ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    pub predicted: Vec<usize>,
    pub true_labels: Option<Vec<usize>>,
    /// Per-sample correctness, present when labels are.
    pub correct: Option<Vec<bool>>,
}

impl PredictionSet {
    pub fn accuracy(&self) -> Option<f64> {
        self.correct.as_ref().map(|c| {
            if c.is_empty() {
                0.0
            } else {
                c.iter().filter(|&&b| b).count() as f64 / c.len() as f64
            }
        })
    }
}

/// Classify `x` (with combination coefficients `g_x`) by majority vote of
/// its `k` nearest training samples under the local metric. Distance ties
/// prefer the smaller training index; vote ties resolve to the class of
/// the nearest neighbor among the tied classes.
pub fn knn_predict<T: Scalar>(
    model: &LocalMetricModel<T>,
    x: &DVector<T>,
    g_x: &DVector<T>,
    k: usize,
) -> Result<usize> {
    let n = model.n_train();
    if n == 0 {
        return Err(Error::EmptyInput("model has no training samples".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    let mut scored: Vec<(T, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let xi = model.train_features.row(i).transpose();
        let gi = model.coefficient_column(i);
        let d = model.local_distance_sq(g_x, &gi, x, &xi)?;
        scored.push((d, i));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let neighbors = &scored[..k];

    let n_classes = model
        .train_labels
        .iter()
        .copied()
        .max()
        .map_or(1, |m| m + 1);
    let mut votes = vec![0usize; n_classes];
    for &(_, i) in neighbors {
        votes[model.train_labels[i]] += 1;
    }
    let top = *votes.iter().max().expect("at least one class");
    // nearest neighbor whose class is among the top-voted ones
    for &(_, i) in neighbors {
        if votes[model.train_labels[i]] == top {
            return Ok(model.train_labels[i]);
        }
    }
    unreachable!("some neighbor carries the winning class")
}

/// Accuracy of `model` on a labeled test set.
///
/// For [`Method::Efficient`] each test point borrows the coefficients of
/// its nearest training sample; for [`Method::Transductive`] the caller
/// supplies the jointly learned coefficient columns (K x M, in test-row
/// order).
pub fn evaluate<T: Scalar>(
    model: &LocalMetricModel<T>,
    test: &crate::dataset::Dataset<T>,
    method: Method,
    transductive_g: Option<&DMatrix<T>>,
    k: usize,
) -> Result<(f64, PredictionSet)> {
    if test.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "test features have {} columns, model expects {}",
            test.dim(),
            model.dim()
        )));
    }
    let m = test.n_samples();
    let g_table: Option<&DMatrix<T>> = match method {
        Method::Efficient => None,
        Method::Transductive => {
            let g = transductive_g.ok_or_else(|| {
                Error::InvalidConfig(
                    "t-r2lml evaluation requires the learned test coefficients".into(),
                )
            })?;
            if g.ncols() != m || g.nrows() != model.k() {
                return Err(Error::DimensionMismatch(format!(
                    "transductive coefficients are {}x{}, expected {}x{m}",
                    g.nrows(),
                    g.ncols(),
                    model.k()
                )));
            }
            Some(g)
        }
    };
    let predicted: Vec<usize> = (0..m)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let x = test.features.row(i).transpose();
            let g = match g_table {
                Some(table) => table.column(i).into_owned(),
                None => model.assign_test_g(&x)?,
            };
            knn_predict(model, &x, &g, k)
        })
        .collect::<Result<Vec<_>>>()?;
    let correct: Vec<bool> = predicted
        .iter()
        .zip(test.labels.iter())
        .map(|(p, t)| p == t)
        .collect();
    let accuracy = correct.iter().filter(|&&b| b).count() as f64 / m.max(1) as f64;
    Ok((
        accuracy,
        PredictionSet {
            predicted,
            true_labels: Some(test.labels.clone()),
            correct: Some(correct),
        },
    ))
}

/// Which branch computed a McNemar p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McNemarBranch {
    /// Exact two-sided binomial test (fewer than 25 discordant pairs).
    ExactBinomial,
    /// Continuity-corrected chi-square statistic with one degree of freedom.
    ChiSquare,
}

impl std::fmt::Display for McNemarBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            McNemarBranch::ExactBinomial => "exact-binomial",
            McNemarBranch::ChiSquare => "chi-square",
        })
    }
}

/// Outcome of a paired McNemar test.
#[derive(Debug, Clone, PartialEq)]
pub struct McNemarOutcome {
    /// Discordant count: first correct, second wrong.
    pub b: usize,
    /// Discordant count: first wrong, second correct.
    pub c: usize,
    pub branch: McNemarBranch,
    /// Continuity-corrected statistic, present on the chi-square branch.
    pub statistic: Option<f64>,
    pub p_value: f64,
}

/// Threshold on discordant pairs below which the exact test is used.
const EXACT_BRANCH_LIMIT: usize = 25;

/// Paired McNemar test on per-sample correctness vectors.
pub fn mcnemar(correct_a: &[bool], correct_b: &[bool]) -> Result<McNemarOutcome> {
    if correct_a.len() != correct_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "correctness vectors have lengths {} and {}",
            correct_a.len(),
            correct_b.len()
        )));
    }
    let mut b = 0usize;
    let mut c = 0usize;
    for (&pa, &pb) in correct_a.iter().zip(correct_b.iter()) {
        match (pa, pb) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let n = b + c;
    if n == 0 {
        return Ok(McNemarOutcome {
            b,
            c,
            branch: McNemarBranch::ExactBinomial,
            statistic: None,
            p_value: 1.0,
        });
    }
    if n < EXACT_BRANCH_LIMIT {
        let tail = binomial_cdf_half(n, b.min(c));
        return Ok(McNemarOutcome {
            b,
            c,
            branch: McNemarBranch::ExactBinomial,
            statistic: None,
            p_value: (2.0 * tail).min(1.0),
        });
    }
    let diff = b.abs_diff(c) as f64;
    let statistic = (diff - 1.0).powi(2) / n as f64;
    Ok(McNemarOutcome {
        b,
        c,
        branch: McNemarBranch::ChiSquare,
        statistic: Some(statistic),
        p_value: chi_square_survival_1df(statistic),
    })
}

/// `P(X <= x)` for `X ~ Binomial(n, 1/2)`, exact for the small n used by
/// the exact branch.
fn binomial_cdf_half(n: usize, x: usize) -> f64 {
    let mut sum: u128 = 0;
    let mut coeff: u128 = 1;
    for i in 0..=x {
        if i > 0 {
            coeff = coeff * (n as u128 - i as u128 + 1) / i as u128;
        }
        sum += coeff;
    }
    sum as f64 / 2f64.powi(n as i32)
}

/// Holm's step-down procedure at family-wise level `alpha`; returns
/// rejection flags in the input order.
pub fn holm(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("p-value {p} outside [0,1]")));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        p_values[a]
            .partial_cmp(&p_values[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut rejected = vec![false; m];
    for (rank, &idx) in order.iter().enumerate() {
        let threshold = alpha / (m - rank) as f64;
        if p_values[idx] <= threshold {
            rejected[idx] = true;
        } else {
            break;
        }
    }
    Ok(rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Hyperparams;
    use crate::rng::substream;
    use rand::Rng;

    fn euclidean_model(features: DMatrix<f64>, labels: Vec<usize>) -> LocalMetricModel<f64> {
        let d = features.ncols();
        let n = features.nrows();
        LocalMetricModel {
            transforms: vec![DMatrix::identity(d, d)],
            coefficients: DMatrix::from_element(1, n, 1.0),
            train_features: features,
            train_labels: labels,
            hyper: Hyperparams::default(),
            standardization: None,
        }
    }

    /// Plain Euclidean k-NN written from scratch, with the same tie rules.
    fn euclid_knn(features: &DMatrix<f64>, labels: &[usize], x: &DVector<f64>, k: usize) -> usize {
        let mut scored: Vec<(f64, usize)> = (0..features.nrows())
            .map(|i| {
                let mut d = 0.0;
                for j in 0..features.ncols() {
                    let e = features[(i, j)] - x[j];
                    d += e * e;
                }
                (d, i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let neighbors = &scored[..k];
        let n_classes = labels.iter().copied().max().unwrap() + 1;
        let mut votes = vec![0usize; n_classes];
        for &(_, i) in neighbors {
            votes[labels[i]] += 1;
        }
        let top = *votes.iter().max().unwrap();
        neighbors
            .iter()
            .find(|&&(_, i)| votes[labels[i]] == top)
            .map(|&(_, i)| labels[i])
            .unwrap()
    }

    #[test]
    fn exact_match_with_k1_returns_its_label() {
        let features = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let model = euclidean_model(features.clone(), vec![0, 1, 2]);
        let x = features.row(1).transpose();
        let g = DVector::from_element(1, 1.0);
        assert_eq!(knn_predict(&model, &x, &g, 1).unwrap(), 1);
    }

    #[test]
    fn majority_vote_three_to_two() {
        let features = DMatrix::from_column_slice(5, 1, &[0.1, 0.2, 0.3, 0.4, 0.5]);
        let model = euclidean_model(features, vec![1, 1, 1, 0, 0]);
        let g = DVector::from_element(1, 1.0);
        let x = DVector::from_element(1, 0.3);
        assert_eq!(knn_predict(&model, &x, &g, 5).unwrap(), 1);
    }

    #[test]
    fn identity_single_metric_matches_euclidean_knn_exhaustively() {
        let mut rng = substream(151, "test-knn");
        for _ in 0..20 {
            let n = rng.gen_range(3..=8usize);
            let d = rng.gen_range(1..=3usize);
            let features = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0f64));
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let model = euclidean_model(features.clone(), labels.clone());
            let g = DVector::from_element(1, 1.0);
            for k in 1..=n {
                for qi in 0..n {
                    let x = features.row(qi).transpose();
                    let ours = knn_predict(&model, &x, &g, k).unwrap();
                    assert_eq!(ours, euclid_knn(&features, &labels, &x, k));
                }
                for _ in 0..10 {
                    let x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0f64));
                    let ours = knn_predict(&model, &x, &g, k).unwrap();
                    assert_eq!(ours, euclid_knn(&features, &labels, &x, k));
                }
            }
        }
    }

    #[test]
    fn evaluate_on_training_set_is_perfect_with_k1() {
        let mut rng = substream(157, "test-eval");
        let features = DMatrix::from_fn(12, 3, |_, _| rng.gen_range(-1.0..1.0f64));
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let model = euclidean_model(features.clone(), labels.clone());
        let test = crate::dataset::Dataset::new(features, labels, None).unwrap();
        let (acc, preds) = evaluate(&model, &test, Method::Efficient, None, 1).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(preds.accuracy(), Some(1.0));
    }

    #[test]
    fn transductive_with_matching_tables_equals_efficient() {
        let mut rng = substream(163, "test-tt");
        let features = DMatrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0f64));
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let model = euclidean_model(features, labels);
        let test_features = DMatrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0f64));
        let test =
            crate::dataset::Dataset::new(test_features, vec![0, 1, 0, 1, 0, 1], None).unwrap();
        // table copied from assign_test_g: identical predictions
        let mut table = DMatrix::zeros(1, 6);
        for i in 0..6 {
            let g = model
                .assign_test_g(&test.features.row(i).transpose())
                .unwrap();
            table[(0, i)] = g[0];
        }
        let (acc_e, pe) = evaluate(&model, &test, Method::Efficient, None, 3).unwrap();
        let (acc_t, pt) = evaluate(&model, &test, Method::Transductive, Some(&table), 3).unwrap();
        assert_eq!(acc_e, acc_t);
        assert_eq!(pe.predicted, pt.predicted);
    }

    #[test]
    fn transductive_requires_coefficients() {
        let model = euclidean_model(DMatrix::zeros(2, 2), vec![0, 1]);
        let test = crate::dataset::Dataset::new(DMatrix::zeros(2, 2), vec![0, 1], None).unwrap();
        assert!(evaluate(&model, &test, Method::Transductive, None, 1).is_err());
    }

    #[test]
    fn mcnemar_symmetric_and_degenerate() {
        let a = vec![true; 10];
        let outcome = mcnemar(&a, &a).unwrap();
        assert_eq!(outcome.p_value, 1.0);
        assert_eq!((outcome.b, outcome.c), (0, 0));

        // b = c = 7: exact branch at the median -> p = 1
        let mut x = vec![true; 7];
        x.extend(vec![false; 7]);
        let mut y = vec![false; 7];
        y.extend(vec![true; 7]);
        let outcome = mcnemar(&x, &y).unwrap();
        assert_eq!(outcome.branch, McNemarBranch::ExactBinomial);
        assert_eq!(outcome.p_value, 1.0);
    }

    #[test]
    fn mcnemar_exact_branch_worked_example() {
        // b = 10, c = 0 -> p = 2 * (1/2)^10
        let a = vec![true; 10];
        let b = vec![false; 10];
        let outcome = mcnemar(&a, &b).unwrap();
        assert_eq!(outcome.branch, McNemarBranch::ExactBinomial);
        assert!((outcome.p_value - 2.0 * 0.5f64.powi(10)).abs() < 1e-15);
    }

    #[test]
    fn mcnemar_chi_square_worked_example() {
        // b = 40, c = 10 -> chi2 = 29^2 / 50 = 16.82, p ~ 4.1e-5
        let mut a = vec![true; 40];
        a.extend(vec![false; 10]);
        let mut b = vec![false; 40];
        b.extend(vec![true; 10]);
        let outcome = mcnemar(&a, &b).unwrap();
        assert_eq!(outcome.branch, McNemarBranch::ChiSquare);
        assert!((outcome.statistic.unwrap() - 16.82).abs() < 1e-12);
        assert!(
            (outcome.p_value - 4.1e-5).abs() < 5e-7,
            "{}",
            outcome.p_value
        );
        // symmetry
        let swapped = mcnemar(&b, &a).unwrap();
        assert_eq!(outcome.p_value, swapped.p_value);
    }

    #[test]
    fn holm_worked_sequences() {
        assert_eq!(holm(&[0.01, 0.04], 0.05).unwrap(), vec![true, true]);
        assert_eq!(holm(&[0.03, 0.04], 0.05).unwrap(), vec![false, false]);
        assert_eq!(holm(&[0.049], 0.05).unwrap(), vec![true]);
    }

    #[test]
    fn holm_monotone_in_alpha_and_dominates_bonferroni() {
        let mut rng = substream(167, "test-holm");
        for _ in 0..100 {
            let m = rng.gen_range(1..=8usize);
            let ps: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..0.2f64)).collect();
            let lo = holm(&ps, 0.01).unwrap();
            let hi = holm(&ps, 0.05).unwrap();
            for i in 0..m {
                assert!(!lo[i] || hi[i], "rejection lost as alpha grew");
            }
            let alpha = 0.05;
            let rej = holm(&ps, alpha).unwrap();
            for i in 0..m {
                if ps[i] <= alpha / m as f64 {
                    assert!(rej[i], "bonferroni rejection missed by holm");
                }
            }
        }
    }
}
