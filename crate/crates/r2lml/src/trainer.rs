//! Block-coordinate training drivers.
//!
//! The two-block driver alternates the transform block and the coefficient
//! block; the transductive driver appends a similarity-assignment block for
//! the test-involving entries. The full objective is recomputed identically
//! after every block, and the trainer enforces the non-increasing cost
//! contract at every block boundary as a runtime check.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::{similarity_from_labels, Dataset, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::linalg::finite;
use crate::mm::{build_sbar, mm_block, QuadraticForm};
use crate::model::nuclear_norm;
use crate::model::{objective, Hyperparams, LocalMetricModel, Method};
use crate::psd::{psd_block, PsdConfig, PsdTraceRow};
use crate::rng::{derive_seed, substream};
use crate::scalar::Scalar;
use crate::transductive::{compute_psi, init_test_similarity, solve_similarity};

/// Column norms below this count as an all-zero column in diagnostics.
pub const ZERO_COLUMN_TOL: f64 = 1e-8;
/// Absolute slack allowed on the block-boundary monotonicity check.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Why a training run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EpochLimit,
    ObjectiveTolerance,
    OuterBlockLimit,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Termination::EpochLimit => "epoch-limit",
            Termination::ObjectiveTolerance => "objective-tolerance",
            Termination::OuterBlockLimit => "outer-block-limit",
        };
        f.write_str(s)
    }
}

/// Objective values and diagnostics for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord<T> {
    pub epoch: usize,
    pub objective_after_block1: T,
    pub objective_after_block2: T,
    /// Present only for the transductive driver.
    pub objective_after_block3: Option<T>,
    pub nuclear_norms: Vec<T>,
    pub zero_column_counts: Vec<usize>,
    pub wall_time: Duration,
}

/// The per-run convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace<T: Scalar> {
    pub initial_objective: T,
    pub final_objective: T,
    pub outer: Vec<OuterRecord<T>>,
    /// Per-iterate subgradient-block rows with globally increasing
    /// iteration numbers.
    pub psd_rows: Vec<PsdTraceRow<T>>,
    pub termination: Termination,
}

impl<T: Scalar> TrainingTrace<T> {
    /// End-of-iteration objective of record `i`.
    pub fn end_objective(&self, i: usize) -> T {
        let r = &self.outer[i];
        r.objective_after_block3.unwrap_or(r.objective_after_block2)
    }
}

fn init_transforms<T: Scalar>(k: usize, p: usize, d: usize, seed: u64) -> Vec<DMatrix<T>> {
    use rand::Rng;
    let mut rng = substream(seed, "init");
    let scale = T::one() / T::of(d as f64).sqrt();
    (0..k)
        .map(|_| {
            DMatrix::from_fn(p, d, |i, j| {
                let base = if i == j { scale } else { T::zero() };
                base + T::of(rng.gen_range(-0.01..0.01))
            })
        })
        .collect()
}

fn uniform_coefficients<T: Scalar>(k: usize, q: usize) -> DMatrix<T> {
    if k == 1 {
        DMatrix::from_element(1, q, T::one())
    } else {
        DMatrix::from_element(k, q, T::one() / T::of(k as f64))
    }
}

fn flatten<T: Scalar>(coefficients: &DMatrix<T>) -> DVector<T> {
    let (k, q) = (coefficients.nrows(), coefficients.ncols());
    DVector::from_fn(k * q, |i, _| coefficients[(i / q, i % q)])
}

fn unflatten<T: Scalar>(g: &DVector<T>, k: usize, q: usize) -> DMatrix<T> {
    DMatrix::from_fn(k, q, |kk, n| g[kk * q + n])
}

fn block_context<T>(result: Result<T>, block: &str, epoch: usize) -> Result<T> {
    result.map_err(|e| match e {
        Error::NonFinite(what) => Error::Divergence(format!(
            "non-finite {what} after {block} at outer iteration {epoch}"
        )),
        other => other,
    })
}

fn check_monotone<T: Scalar>(prev: T, next: T, block: &str, epoch: usize) -> Result<()> {
    if next > prev + T::of(MONOTONE_SLACK) {
        return Err(Error::Divergence(format!(
            "objective increased across {block} at outer iteration {epoch}: {} -> {}",
            prev.to_f64_value(),
            next.to_f64_value()
        )));
    }
    Ok(())
}

fn zero_columns<T: Scalar>(l: &DMatrix<T>) -> usize {
    let tol = T::of(ZERO_COLUMN_TOL);
    (0..l.ncols()).filter(|&j| l.column(j).norm() < tol).count()
}

struct CoreOutput<T: Scalar> {
    transforms: Vec<DMatrix<T>>,
    coefficients: DMatrix<T>,
    similarity: SimilarityMatrix,
    trace: TrainingTrace<T>,
}

/// Shared two/three-block loop. `n_train` splits the stacked feature rows;
/// the third block runs only when `transductive` and test rows exist.
fn train_core<T: Scalar>(
    features: &DMatrix<T>,
    n_train: usize,
    mut s: SimilarityMatrix,
    hyper: &Hyperparams,
    transductive: bool,
) -> Result<CoreOutput<T>> {
    let q = features.nrows();
    let d = features.ncols();
    let k = hyper.k;
    let p = hyper.output_dim(d);
    let c = T::of(hyper.c);
    let lambda = T::of(hyper.lambda);
    let psd_cfg = PsdConfig::new(hyper.step_length, hyper.psd_iters_per_epoch)?;

    let mut transforms = init_transforms::<T>(k, p, d, hyper.seed);
    let mut coefficients = uniform_coefficients::<T>(k, q);
    let mut obj = objective(&transforms, &coefficients, features, &s, c, lambda)?;
    let initial_objective = obj;

    let outer_limit = if transductive {
        hyper.max_outer_blocks
    } else {
        hyper.epochs
    };
    let mut outer = Vec::with_capacity(outer_limit);
    let mut psd_rows = Vec::new();
    let mut termination = if transductive {
        Termination::OuterBlockLimit
    } else {
        Termination::EpochLimit
    };

    for epoch in 0..outer_limit {
        let clock = Instant::now();

        // block 1: transforms
        let block1 = psd_block(
            &transforms,
            &coefficients,
            features,
            &s,
            c,
            lambda,
            &psd_cfg,
        )?;
        transforms = block1.transforms;
        let base_iter = epoch * (hyper.psd_iters_per_epoch + 1);
        psd_rows.extend(block1.trace.into_iter().map(|mut row| {
            row.iteration += base_iter;
            row
        }));
        let obj1 = block_context(
            objective(&transforms, &coefficients, features, &s, c, lambda),
            "block 1",
            epoch,
        )?;
        check_monotone(obj, obj1, "block 1", epoch)?;

        // block 2: coefficients
        let blocks = transforms
            .iter()
            .map(|l| build_sbar(l, features, &s))
            .collect::<Result<Vec<_>>>()?;
        let qf = QuadraticForm::new(blocks)?;
        let mm = mm_block(
            &flatten(&coefficients),
            &qf,
            hyper.mm_max_iters,
            T::of(hyper.mm_tol),
            T::of(hyper.bisection_tol),
        )?;
        coefficients = unflatten(&mm.g, k, q);
        let obj2 = block_context(
            objective(&transforms, &coefficients, features, &s, c, lambda),
            "block 2",
            epoch,
        )?;
        check_monotone(obj1, obj2, "block 2", epoch)?;

        // block 3: test-involving similarities
        let obj3 = if transductive {
            if q > n_train {
                let psi = compute_psi(&transforms, &coefficients, features, n_train, c)?;
                let mut candidate = s.clone();
                solve_similarity(&psi, &mut candidate)?;
                let cand_obj = block_context(
                    objective(&transforms, &coefficients, features, &candidate, c, lambda),
                    "block 3",
                    epoch,
                )?;
                // The per-row rules are optimal before symmetrization; the
                // OR reconciliation of test-test conflicts can, rarely,
                // cost more than it saves. Keep the previous assignment in
                // that case so the cost sequence stays non-increasing.
                if cand_obj <= obj2 {
                    s = candidate;
                    Some(cand_obj)
                } else {
                    Some(obj2)
                }
            } else {
                Some(obj2)
            }
        } else {
            None
        };
        let end_obj = obj3.unwrap_or(obj2);
        check_monotone(obj2, end_obj, "block 3", epoch)?;

        let nuclear_norms = transforms
            .iter()
            .map(nuclear_norm)
            .collect::<Result<Vec<_>>>()?;
        outer.push(OuterRecord {
            epoch,
            objective_after_block1: obj1,
            objective_after_block2: obj2,
            objective_after_block3: obj3,
            nuclear_norms,
            zero_column_counts: transforms.iter().map(zero_columns).collect(),
            wall_time: clock.elapsed(),
        });

        let delta = (obj - end_obj).abs();
        obj = end_obj;
        if delta < T::of(hyper.outer_tol) {
            termination = Termination::ObjectiveTolerance;
            break;
        }
    }

    Ok(CoreOutput {
        transforms,
        coefficients,
        similarity: s,
        trace: TrainingTrace {
            initial_objective,
            final_objective: obj,
            outer,
            psd_rows,
            termination,
        },
    })
}

/// Train the two-block (nearest-prototype) variant on a labeled dataset.
pub fn train_e_r2lml<T: Scalar>(
    train: &Dataset<T>,
    hyper: &Hyperparams,
) -> Result<(LocalMetricModel<T>, TrainingTrace<T>)> {
    train.validate()?;
    hyper.validate(train.dim())?;
    if train.n_samples() < 2 {
        return Err(Error::InvalidConfig(
            "training needs at least 2 samples".into(),
        ));
    }
    let s = similarity_from_labels(&train.labels)?;
    let out = train_core(&train.features, train.n_samples(), s, hyper, false)?;
    let model = LocalMetricModel {
        transforms: out.transforms,
        coefficients: out.coefficients,
        train_features: train.features.clone(),
        train_labels: train.labels.clone(),
        hyper: hyper.clone(),
        standardization: None,
    };
    model.validate()?;
    Ok((model, out.trace))
}

/// Train the transductive variant: the unlabeled test features take part
/// in the coefficient and similarity blocks. Returns the model (with
/// coefficients for all N+M samples), the learned similarity matrix, and
/// the trace.
pub fn train_t_r2lml<T: Scalar>(
    train: &Dataset<T>,
    test_features: &DMatrix<T>,
    hyper: &Hyperparams,
) -> Result<(LocalMetricModel<T>, SimilarityMatrix, TrainingTrace<T>)> {
    train.validate()?;
    hyper.validate(train.dim())?;
    if train.n_samples() < 2 {
        return Err(Error::InvalidConfig(
            "training needs at least 2 samples".into(),
        ));
    }
    let m_count = test_features.nrows();
    if m_count > 0 && test_features.ncols() != train.dim() {
        return Err(Error::DimensionMismatch(format!(
            "test features have {} columns, train has {}",
            test_features.ncols(),
            train.dim()
        )));
    }
    if !finite(test_features) {
        return Err(Error::NonFinite("test features".into()));
    }
    let n = train.n_samples();
    let q = n + m_count;
    let mut features = DMatrix::zeros(q, train.dim());
    features.rows_mut(0, n).copy_from(&train.features);
    if m_count > 0 {
        features.rows_mut(n, m_count).copy_from(test_features);
    }

    let train_s = similarity_from_labels(&train.labels)?;
    let mut s = SimilarityMatrix::identity(q);
    for m in 0..n {
        for nn in 0..n {
            s.set(m, nn, train_s.is_similar(m, nn));
        }
    }
    if m_count > 0 {
        let mut rng = substream(hyper.seed, "s-init");
        init_test_similarity(&mut s, n, &mut rng);
    }

    let out = train_core(&features, n, s, hyper, true)?;
    let model = LocalMetricModel {
        transforms: out.transforms,
        coefficients: out.coefficients,
        train_features: train.features.clone(),
        train_labels: train.labels.clone(),
        hyper: hyper.clone(),
        standardization: None,
    };
    model.validate()?;
    Ok((model, out.similarity, out.trace))
}

/// Run `restarts` independently seeded trainings and keep the one with the
/// lowest final objective. Restart 0 uses the seed as-is, so a single
/// restart is identical to [`train_e_r2lml`].
pub fn train_e_r2lml_restarted<T: Scalar>(
    train: &Dataset<T>,
    hyper: &Hyperparams,
    restarts: usize,
) -> Result<(LocalMetricModel<T>, TrainingTrace<T>)> {
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let mut best: Option<(LocalMetricModel<T>, TrainingTrace<T>)> = None;
    for r in 0..restarts {
        let mut h = hyper.clone();
        if r > 0 {
            h.seed = derive_seed(hyper.seed, "restart", r as u64);
        }
        let (model, trace) = train_e_r2lml(train, &h)?;
        let better = match &best {
            Some((_, bt)) => trace.final_objective < bt.final_objective,
            None => true,
        };
        if better {
            best = Some((model, trace));
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// As [`train_e_r2lml_restarted`], for the transductive driver.
pub fn train_t_r2lml_restarted<T: Scalar>(
    train: &Dataset<T>,
    test_features: &DMatrix<T>,
    hyper: &Hyperparams,
    restarts: usize,
) -> Result<(LocalMetricModel<T>, SimilarityMatrix, TrainingTrace<T>)> {
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let mut best: Option<(LocalMetricModel<T>, SimilarityMatrix, TrainingTrace<T>)> = None;
    for r in 0..restarts {
        let mut h = hyper.clone();
        if r > 0 {
            h.seed = derive_seed(hyper.seed, "restart", r as u64);
        }
        let (model, s, trace) = train_t_r2lml(train, test_features, &h)?;
        let better = match &best {
            Some((_, _, bt)) => trace.final_objective < bt.final_objective,
            None => true,
        };
        if better {
            best = Some((model, s, trace));
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// One grid point of a validation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub k: usize,
    pub lambda: f64,
    pub step_length: f64,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

/// Hyperparameter lists swept by [`cross_validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub ks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub step_lengths: Vec<f64>,
}

impl HyperGrid {
    /// The standard validation grids: K in 1..=7 and the per-method lambda
    /// decades, at a single fixed step length.
    pub fn standard(method: Method, step_length: f64) -> Self {
        let lambdas = match method {
            Method::Efficient => vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
            Method::Transductive => {
                vec![1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7]
            }
        };
        Self {
            ks: (1..=7).collect(),
            lambdas,
            step_lengths: vec![step_length],
        }
    }

    /// Cartesian points ordered by (k, lambda, step) ascending, so the
    /// first best row wins ties toward smaller k, then smaller lambda.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        let mut ks = self.ks.clone();
        let mut lambdas = self.lambdas.clone();
        let mut steps = self.step_lengths.clone();
        ks.sort_unstable();
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        steps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out = Vec::with_capacity(ks.len() * lambdas.len() * steps.len());
        for &k in &ks {
            for &l in &lambdas {
                for &st in &steps {
                    out.push((k, l, st));
                }
            }
        }
        out
    }
}

/// Number of neighbors used by the evaluation protocol.
pub const PROTOCOL_KNN: usize = 5;

/// Grid search scored by validation accuracy under the 5-NN rule. Grid
/// points run independently with seeds derived from (seed, point index);
/// per-point failures are recorded, not fatal. Ties prefer smaller k, then
/// smaller lambda, then smaller step.
pub fn cross_validate<T: Scalar>(
    train: &Dataset<T>,
    val: &Dataset<T>,
    grid: &HyperGrid,
    method: Method,
    base: &Hyperparams,
) -> Result<(Hyperparams, Vec<ScoreRow>)> {
    if grid.ks.is_empty() || grid.lambdas.is_empty() || grid.step_lengths.is_empty() {
        return Err(Error::InvalidConfig(
            "validation grid must be nonempty".into(),
        ));
    }
    if val.dim() != train.dim() {
        return Err(Error::DimensionMismatch(
            "validation features must match training dimension".into(),
        ));
    }
    let points = grid.points();
    let knn = PROTOCOL_KNN.min(train.n_samples());
    let rows: Vec<ScoreRow> = points
        .par_iter()
        .enumerate()
        .map(|(idx, &(k, lambda, step_length))| {
            let mut hyper = base.clone();
            hyper.k = k;
            hyper.lambda = lambda;
            hyper.step_length = step_length;
            hyper.seed = derive_seed(base.seed, "grid", idx as u64);
            let outcome: Result<f64> = (|| {
                let accuracy = match method {
                    Method::Efficient => {
                        let (model, _) = train_e_r2lml(train, &hyper)?;
                        evaluate(&model, val, Method::Efficient, None, knn)?.0
                    }
                    Method::Transductive => {
                        let (model, _, _) = train_t_r2lml(train, &val.features, &hyper)?;
                        let g = model.transductive_coefficients().ok_or_else(|| {
                            Error::InvalidConfig(
                                "transductive run produced no test coefficients".into(),
                            )
                        })?;
                        evaluate(&model, val, Method::Transductive, Some(&g), knn)?.0
                    }
                };
                Ok(accuracy)
            })();
            match outcome {
                Ok(acc) => ScoreRow {
                    k,
                    lambda,
                    step_length,
                    accuracy: Some(acc),
                    error: None,
                },
                Err(e) => ScoreRow {
                    k,
                    lambda,
                    step_length,
                    accuracy: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut best: Option<(f64, usize)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(acc) = row.accuracy {
            let improves = match best {
                Some((b, _)) => acc > b,
                None => true,
            };
            if improves {
                best = Some((acc, i));
            }
        }
    }
    let (_, idx) =
        best.ok_or_else(|| Error::InvalidConfig("every grid point failed to train".into()))?;
    let mut chosen = base.clone();
    chosen.k = rows[idx].k;
    chosen.lambda = rows[idx].lambda;
    chosen.step_length = rows[idx].step_length;
    Ok((chosen, rows))
}
