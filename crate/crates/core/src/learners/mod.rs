//! The three base learners behind one fit/predict contract: elastic-net
//! linear regression, random-forest regression, and an MLP regressor. All
//! fits are deterministic under a fixed seed.

mod elastic_net;
mod forest;
mod mlp;

pub use elastic_net::{fit_elastic_net, ElasticNetConfig, LinearModel};
pub use forest::{fit_random_forest, ForestConfig, ForestModel, Tree, TreeNode};
pub use mlp::{fit_mlp, Layer, MlpConfig, MlpModel};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Common prediction surface over the three model families.
pub trait Regressor<F: Real> {
    fn n_features(&self) -> usize;

    fn predict_row(&self, x: &[F]) -> F;

    fn predict(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

impl<F: Real> Regressor<F> for LinearModel<F> {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_row(&self, x: &[F]) -> F {
        LinearModel::predict_row(self, x)
    }
}

impl<F: Real> Regressor<F> for ForestModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[F]) -> F {
        ForestModel::predict_row(self, x)
    }
}

impl<F: Real> Regressor<F> for MlpModel<F> {
    fn n_features(&self) -> usize {
        MlpModel::n_features(self)
    }

    fn predict_row(&self, x: &[F]) -> F {
        MlpModel::predict_row(self, x)
    }
}

/// Any of the three fitted models, for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound = "")]
pub enum Model<F: Real> {
    ElasticNet(LinearModel<F>),
    RandomForest(ForestModel<F>),
    Mlp(MlpModel<F>),
}

impl<F: Real> Regressor<F> for Model<F> {
    fn n_features(&self) -> usize {
        match self {
            Model::ElasticNet(m) => m.n_features(),
            Model::RandomForest(m) => Regressor::n_features(m),
            Model::Mlp(m) => Regressor::<F>::n_features(m),
        }
    }

    fn predict_row(&self, x: &[F]) -> F {
        match self {
            Model::ElasticNet(m) => m.predict_row(x),
            Model::RandomForest(m) => m.predict_row(x),
            Model::Mlp(m) => m.predict_row(x),
        }
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "")]
struct SavedModel<F: Real> {
    version: u32,
    model: Model<F>,
}

/// Writes a model as versioned JSON. serde_json prints floats in shortest
/// round-trip form, so a reload reproduces predictions bit-exactly.
pub fn save_model<F: Real>(model: &Model<F>, path: &Path) -> Result<()> {
    let payload = SavedModel {
        version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&payload)?)?;
    Ok(())
}

pub fn load_model<F: Real>(path: &Path) -> Result<Model<F>> {
    let text = fs::read_to_string(path)?;
    let payload: SavedModel<F> = serde_json::from_str(&text)?;
    if payload.version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
            payload.version
        )));
    }
    Ok(payload.model)
}
