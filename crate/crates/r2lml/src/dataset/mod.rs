//! Datasets, label-derived similarities, standardization and splitting.

mod csv_io;
mod synth;

pub use csv_io::{load_csv, load_features_csv, write_csv, write_features_csv};
pub use synth::{sparsity_mask, synth_gaussian_mixture, SynthConfig, SynthKind};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::scalar::Scalar;

/// A feature matrix with integer class labels.
///
/// Rows of `features` are samples; labels are dense in `0..C-1`
/// (canonicalized by first appearance at load time).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    pub features: DMatrix<T>,
    pub labels: Vec<usize>,
    pub feature_names: Option<Vec<String>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: DMatrix<T>,
        labels: Vec<usize>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Number of classes (labels are dense, so this is max + 1).
    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples() == 0 || self.dim() == 0 {
            return Err(Error::EmptyInput(
                "dataset needs at least one sample and one feature".into(),
            ));
        }
        if self.labels.len() != self.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} samples",
                self.labels.len(),
                self.n_samples()
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features".into()));
        }
        if let Some(names) = &self.feature_names {
            if names.len() != self.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "{} feature names for {} features",
                    names.len(),
                    self.dim()
                )));
            }
        }
        // density: every class index below C appears
        let c = self.n_classes();
        let mut seen = vec![false; c];
        for &l in &self.labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidConfig(
                "labels are not dense in 0..C-1".into(),
            ));
        }
        Ok(())
    }

    /// Sub-dataset from a list of row indices.
    pub fn select(&self, idx: &[usize]) -> Dataset<T> {
        let mut features = DMatrix::zeros(idx.len(), self.dim());
        let mut labels = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            features.row_mut(r).copy_from(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Binary, symmetric, unit-diagonal pairwise similarity over `q` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityMatrix {
    q: usize,
    data: Vec<u8>,
}

impl SimilarityMatrix {
    /// All-dissimilar matrix (identity): unit diagonal, zero elsewhere.
    pub fn identity(q: usize) -> Self {
        let mut s = Self {
            q,
            data: vec![0; q * q],
        };
        for i in 0..q {
            s.data[i * q + i] = 1;
        }
        s
    }

    /// `s_mn = 1` iff `labels[m] == labels[n]`.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("labels for similarity matrix".into()));
        }
        let q = labels.len();
        let mut data = vec![0u8; q * q];
        for m in 0..q {
            for n in 0..q {
                data[m * q + n] = u8::from(labels[m] == labels[n]);
            }
        }
        Ok(Self { q, data })
    }

    pub fn len(&self) -> usize {
        self.q
    }

    pub fn is_empty(&self) -> bool {
        self.q == 0
    }

    #[inline]
    pub fn is_similar(&self, m: usize, n: usize) -> bool {
        self.data[m * self.q + n] == 1
    }

    pub fn set(&mut self, m: usize, n: usize, similar: bool) {
        self.data[m * self.q + n] = u8::from(similar);
    }

    pub fn row_sum(&self, m: usize) -> usize {
        self.data[m * self.q..(m + 1) * self.q]
            .iter()
            .map(|&v| v as usize)
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.q).all(|m| (0..m).all(|n| self.is_similar(m, n) == self.is_similar(n, m)))
    }

    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.q).all(|m| self.is_similar(m, m))
    }

    /// Checks the transductive feasibility constraint on rows `first..q`:
    /// every such row must contain at least two ones.
    pub fn rows_feasible(&self, first: usize) -> bool {
        (first..self.q).all(|m| self.row_sum(m) >= 2)
    }
}

/// Similarity as side information derived from class labels.
pub fn similarity_from_labels(labels: &[usize]) -> Result<SimilarityMatrix> {
    SimilarityMatrix::from_labels(labels)
}

/// Per-feature affine map fitted on a training set.
///
/// `scale` is the reciprocal standard deviation, or 0 for zero-variance
/// features so they map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationParams<T: Scalar> {
    pub mean: DVector<T>,
    pub scale: DVector<T>,
}

impl<T: Scalar> StandardizationParams<T> {
    pub fn fit(features: &DMatrix<T>) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::EmptyInput("standardization fit".into()));
        }
        let d = features.ncols();
        let inv_n = T::one() / T::of(n as f64);
        let mut mean = DVector::zeros(d);
        let mut scale = DVector::zeros(d);
        for j in 0..d {
            let col = features.column(j);
            let mu = col.iter().fold(T::zero(), |a, &v| a + v) * inv_n;
            let var = col.iter().fold(T::zero(), |a, &v| a + (v - mu) * (v - mu)) * inv_n;
            mean[j] = mu;
            scale[j] = if var > T::zero() {
                T::one() / var.sqrt()
            } else {
                T::zero()
            };
        }
        Ok(Self { mean, scale })
    }

    pub fn apply_matrix(&self, features: &mut DMatrix<T>) -> Result<()> {
        if features.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "standardization fitted on {} features, applied to {}",
                self.mean.len(),
                features.ncols()
            )));
        }
        for j in 0..features.ncols() {
            let (mu, sc) = (self.mean[j], self.scale[j]);
            for i in 0..features.nrows() {
                features[(i, j)] = (features[(i, j)] - mu) * sc;
            }
        }
        Ok(())
    }
}

/// Zero-mean/unit-variance per feature, fitted on `train` only and applied
/// to `train` and every dataset in `others`.
pub fn standardize<T: Scalar>(
    train: &Dataset<T>,
    others: &[&Dataset<T>],
) -> Result<(Dataset<T>, Vec<Dataset<T>>, StandardizationParams<T>)> {
    let params = StandardizationParams::fit(&train.features)?;
    let mut train_out = train.clone();
    params.apply_matrix(&mut train_out.features)?;
    let mut others_out = Vec::with_capacity(others.len());
    for other in others {
        let mut o = (*other).clone();
        params.apply_matrix(&mut o.features)?;
        others_out.push(o);
    }
    Ok((train_out, others_out, params))
}

/// What `split` did about stratification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitReport {
    pub stratified: bool,
    /// Classes with fewer samples than split parts, forcing the fallback.
    pub small_classes: Vec<usize>,
}

/// Deterministic (seeded) three-way split, stratified by label where class
/// counts permit. Fractions must be positive and sum to at most 1; any
/// remainder is dropped.
pub fn split<T: Scalar>(
    dataset: &Dataset<T>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>, SplitReport)> {
    let (ft, fv, fe) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fe <= 0.0 {
        return Err(Error::InvalidConfig(
            "split fractions must be positive".into(),
        ));
    }
    if ft + fv + fe > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(
            "split fractions must sum to at most 1".into(),
        ));
    }
    let n = dataset.n_samples();
    let n_parts = 3usize;
    let mut rng = substream(seed, "split");

    // Group indices per class to test stratifiability.
    let c = dataset.n_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in dataset.labels.iter().enumerate() {
        per_class[l].push(i);
    }
    let small_classes: Vec<usize> = (0..c).filter(|&l| per_class[l].len() < n_parts).collect();
    let stratified = small_classes.is_empty();

    let groups: Vec<Vec<usize>> = if stratified {
        per_class
    } else {
        vec![(0..n).collect()]
    };

    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    // Largest-remainder allocation with rounding debt carried across
    // groups, so per-class remainders balance out in the totals.
    let mut debt = [0.0f64; 3];
    for group in groups {
        let mut idx = group;
        idx.shuffle(&mut rng);
        let g = idx.len() as f64;
        let targets = [ft * g + debt[0], fv * g + debt[1], fe * g + debt[2]];
        let mut counts: Vec<usize> = targets
            .iter()
            .map(|t| t.floor().max(0.0) as usize)
            .collect();
        let assigned: usize = counts.iter().sum();
        let total = (targets.iter().sum::<f64>().round() as usize).min(idx.len());
        let mut leftover = total.saturating_sub(assigned);
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = targets[a] - targets[a].floor();
            let rb = targets[b] - targets[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &p in &order {
            if leftover == 0 {
                break;
            }
            counts[p] += 1;
            leftover -= 1;
        }
        let mut cursor = 0usize;
        for p in 0..3 {
            let take = counts[p].min(idx.len() - cursor);
            debt[p] = targets[p] - take as f64;
            parts[p].extend_from_slice(&idx[cursor..cursor + take]);
            cursor += take;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok((
        dataset.select(&parts[0]),
        dataset.select(&parts[1]),
        dataset.select(&parts[2]),
        SplitReport {
            stratified,
            small_classes,
        },
    ))
}
