//! Bundled radiata pine fixture and dataset builders.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Radiata pine data (n = 42): density, resin-adjusted density, maximum
/// compression strength parallel to the grain.
pub const RADIATA_CSV: &str = include_str!("../data/radiata.csv");

/// Which covariate the regression uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiataDesign {
    /// Density.
    M1,
    /// Resin-adjusted density.
    M2,
}

impl RadiataDesign {
    pub fn covariate(self) -> &'static str {
        match self {
            RadiataDesign::M1 => "density",
            RadiataDesign::M2 => "resin_density",
        }
    }

    pub fn model_name(self) -> &'static str {
        match self {
            RadiataDesign::M1 => "linreg_m1",
            RadiataDesign::M2 => "linreg_m2",
        }
    }
}

pub const RADIATA_RESPONSE: &str = "strength";

/// The raw three-column fixture.
pub fn radiata_raw() -> Dataset {
    Dataset::from_csv_reader(RADIATA_CSV.as_bytes()).expect("bundled fixture parses")
}

/// Two-column `(centered covariate, strength)` rows for the given design.
pub fn radiata(design: RadiataDesign) -> Dataset {
    regression_dataset(&radiata_raw(), design.covariate(), RADIATA_RESPONSE).expect("fixture has both columns")
}

/// Extracts `(covariate - mean(covariate), response)` rows from `raw`.
pub fn regression_dataset(raw: &Dataset, covariate: &str, response: &str) -> Result<Dataset> {
    let x = raw
        .column(covariate)
        .ok_or_else(|| Error::InvalidDataset(format!("missing covariate column '{covariate}'")))?;
    let y = raw
        .column(response)
        .ok_or_else(|| Error::InvalidDataset(format!("missing response column '{response}'")))?;
    let xbar = x.iter().sum::<f64>() / x.len() as f64;
    let values = x.iter().zip(&y).flat_map(|(&xi, &yi)| [xi - xbar, yi]).collect();
    Dataset::from_flat(vec![format!("{covariate}_centered"), response.to_string()], values)
}

/// `n` i.i.d. draws from `N(mean, sd^2)` as a single column named `x`.
pub fn synthetic_normal(n: usize, mean: f64, sd: f64, seed: u64) -> Result<Dataset> {
    let dist = Normal::new(mean, sd)
        .map_err(|e| Error::InvalidHyperparameter(format!("generator N({mean}, {sd}^2): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::from_column("x", (0..n).map(|_| dist.sample(&mut rng)).collect())
}
