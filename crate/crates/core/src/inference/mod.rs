//! Parameter estimation: composite likelihood when (X, Y) are observed,
//! minimum contrast on g or K and estimator averaging when only X is.

mod average;
mod cl;
mod contrast;
mod family;
pub mod study;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use average::{average_estimators, averaging_weights, AverageSettings};
pub use cl::{cl2_log_likelihood, cl2_pair_probabilities, fit_q_cl1, fit_theta_cl2, ClSettings, PairRange, K_GRID, NU_GRID};
pub use contrast::{contrast_grid, fit_contrast_to_curve, fit_min_contrast, ContrastSettings, ContrastStat};
pub use family::{BaseFamily, CorrFamily, ModelFamily, SelectionFamily};

use crate::error::Result;
use crate::geometry::{min_pairwise_distance, PointPattern};
use crate::thinning::InterruptedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CL1")]
    Cl1,
    #[serde(rename = "CL2")]
    Cl2,
    #[serde(rename = "MC_g")]
    McG,
    #[serde(rename = "MC_K")]
    McK,
    #[serde(rename = "AVG")]
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub estimates: BTreeMap<String, f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Method settings, e.g. r_l, r_u, c and the grid length.
    pub settings: BTreeMap<String, f64>,
    /// Averaging weights (λ_g, λ_K) per parameter.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    /// Fully specified fitted model, when the method determines one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<InterruptedModel>,
}

impl FitResult {
    pub(crate) fn new(method: Method) -> Self {
        FitResult {
            method,
            estimates: BTreeMap::new(),
            objective: f64::NAN,
            converged: false,
            iterations: 0,
            settings: BTreeMap::new(),
            weights: BTreeMap::new(),
            diagnostics: Vec::new(),
            model: None,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.estimates.get(name).copied()
    }
}

/// Hard-core distance estimated by the minimal pairwise distance.
pub fn estimate_hardcore_d(x: &PointPattern) -> Result<f64> {
    min_pairwise_distance(x)
}
