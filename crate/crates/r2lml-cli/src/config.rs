//! Flat TOML config files whose keys mirror the long flag names.

use std::path::Path;

use r2lml::Hyperparams;

pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self {
            table: toml::Table::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| format!("malformed config {}: {e}", path.display()))?;
        Ok(Self { table })
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, super::CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(super::CliError::Usage(format!(
                "config key {key:?} must be a number, found {other}"
            ))),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, super::CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
            Some(other) => Err(super::CliError::Usage(format!(
                "config key {key:?} must be a nonnegative integer, found {other}"
            ))),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, super::CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(other) => Err(super::CliError::Usage(format!(
                "config key {key:?} must be a nonnegative integer, found {other}"
            ))),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, super::CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(v)) => Ok(Some(*v)),
            Some(other) => Err(super::CliError::Usage(format!(
                "config key {key:?} must be a boolean, found {other}"
            ))),
        }
    }
}

/// Render hyperparameters as a config file readable back through --config.
pub fn render_hyper(hyper: &Hyperparams, restarts: usize, standardize: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!("k-metrics = {}\n", hyper.k));
    out.push_str(&format!("lambda = {:?}\n", hyper.lambda));
    out.push_str(&format!("c = {:?}\n", hyper.c));
    out.push_str(&format!("step = {:?}\n", hyper.step_length));
    out.push_str(&format!("epochs = {}\n", hyper.epochs));
    out.push_str(&format!("psd-iters = {}\n", hyper.psd_iters_per_epoch));
    out.push_str(&format!("mm-max-iters = {}\n", hyper.mm_max_iters));
    out.push_str(&format!("mm-tol = {:?}\n", hyper.mm_tol));
    out.push_str(&format!("outer-tol = {:?}\n", hyper.outer_tol));
    out.push_str(&format!("max-outer-blocks = {}\n", hyper.max_outer_blocks));
    out.push_str(&format!("bisection-tol = {:?}\n", hyper.bisection_tol));
    if let Some(p) = hyper.p {
        out.push_str(&format!("p = {p}\n"));
    }
    out.push_str(&format!("seed = {}\n", hyper.seed));
    out.push_str(&format!("restarts = {restarts}\n"));
    out.push_str(&format!("standardize = {standardize}\n"));
    out
}
