//! Model persistence: a self-describing JSON document, schema version 1.
//!
//! Matrices are stored as row-major arrays alongside their dimensions, and
//! reals round-trip exactly (shortest-representation decimal encoding).

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::StandardizationParams;
use crate::error::{Error, Result};
use crate::model::{Hyperparams, LocalMetricModel, COEFF_SUM_TOL_LOAD};
use crate::scalar::Scalar;

const SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct StandardizationFile<T> {
    mean: Vec<T>,
    scale: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    schema_version: String,
    k: usize,
    d: usize,
    p: usize,
    c: f64,
    lambda: f64,
    hyper: Hyperparams,
    /// K row-major P*D arrays.
    transforms: Vec<Vec<T>>,
    /// Row-major K x Q array; Q >= n_train.
    coefficients: Vec<T>,
    coefficient_columns: usize,
    /// Row-major n_train x D array.
    train_features: Vec<T>,
    n_train: usize,
    train_labels: Vec<usize>,
    standardization: Option<StandardizationFile<T>>,
}

fn row_major<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn from_row_major<T: Scalar>(
    data: &[T],
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DMatrix<T>> {
    if data.len() != rows * cols {
        return Err(Error::ModelFile(format!(
            "{what}: expected {rows}x{cols} = {} values, found {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

/// Serialize a model to `path`.
pub fn save_model<T>(model: &LocalMetricModel<T>, path: impl AsRef<Path>) -> Result<()>
where
    T: Scalar + Serialize,
{
    model.validate()?;
    let file = ModelFile {
        schema_version: SCHEMA_VERSION.to_string(),
        k: model.k(),
        d: model.dim(),
        p: model.output_dim(),
        c: model.hyper.c,
        lambda: model.hyper.lambda,
        hyper: model.hyper.clone(),
        transforms: model.transforms.iter().map(row_major).collect(),
        coefficients: row_major(&model.coefficients),
        coefficient_columns: model.coefficients.ncols(),
        train_features: row_major(&model.train_features),
        n_train: model.n_train(),
        train_labels: model.train_labels.clone(),
        standardization: model.standardization.as_ref().map(|p| StandardizationFile {
            mean: p.mean.iter().copied().collect(),
            scale: p.scale.iter().copied().collect(),
        }),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::ModelFile(format!("serialization failed: {e}")))?;
    fs::write(path.as_ref(), json).map_err(|e| Error::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

/// Deserialize a model from `path`, checking the schema version and the
/// coefficient-simplex invariant.
pub fn load_model<T>(path: impl AsRef<Path>) -> Result<LocalMetricModel<T>>
where
    T: Scalar + Serialize + DeserializeOwned,
{
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    let file: ModelFile<T> = serde_json::from_str(&text)
        .map_err(|e| Error::ModelFile(format!("malformed model file: {e}")))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: file.schema_version,
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    let transforms = file
        .transforms
        .iter()
        .enumerate()
        .map(|(k, data)| from_row_major(data, file.p, file.d, &format!("transform {k}")))
        .collect::<Result<Vec<_>>>()?;
    if transforms.len() != file.k {
        return Err(Error::ModelFile(format!(
            "expected {} transforms, found {}",
            file.k,
            transforms.len()
        )));
    }
    let coefficients = from_row_major(
        &file.coefficients,
        file.k,
        file.coefficient_columns,
        "coefficients",
    )?;
    let train_features =
        from_row_major(&file.train_features, file.n_train, file.d, "train features")?;
    let standardization = file.standardization.map(|s| StandardizationParams {
        mean: DVector::from_vec(s.mean),
        scale: DVector::from_vec(s.scale),
    });
    let model = LocalMetricModel {
        transforms,
        coefficients,
        train_features,
        train_labels: file.train_labels,
        hyper: file.hyper,
        standardization,
    };
    model.validate_with_tol(COEFF_SUM_TOL_LOAD)?;
    Ok(model)
}
