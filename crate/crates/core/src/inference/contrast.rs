//! Minimum contrast estimation on the pair correlation or K function of X.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::family::{BaseFamily, ModelFamily, Parametrization};
use super::{estimate_hardcore_d, FitResult, Method};
use crate::error::{invalid, Error, Result};
use crate::geometry::{PointPattern, Window};
use crate::optim::{latin_hypercube, nelder_mead, NelderMeadOptions};
use crate::rng::rng_from_seed;
use crate::special::{linspace, trapezoid};
use crate::summaries::{estimate_k, estimate_pcf, model_k_values};
use crate::thinning::InterruptedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContrastStat {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "K")]
    K,
}

impl ContrastStat {
    /// Default exponent c.
    pub fn default_c(&self) -> f64 {
        match self {
            ContrastStat::G => 1.0,
            ContrastStat::K => 0.5,
        }
    }

    fn method(&self) -> Method {
        match self {
            ContrastStat::G => Method::McG,
            ContrastStat::K => Method::McK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContrastSettings {
    /// Lower end of the fitting range; ℓ/100 by default (ℓ the minimal side).
    pub r_l: Option<f64>,
    /// Upper end; ℓ/4 by default.
    pub r_u: Option<f64>,
    /// Exponent; 1 for g and 0.5 for K by default.
    pub c: Option<f64>,
    pub n_grid: usize,
    pub restarts: usize,
    pub seed: u64,
    pub bandwidth: Option<f64>,
    /// Box overrides per parameter name (for α: fractions of the largest
    /// admissible scale).
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub max_evaluations: usize,
}

impl Default for ContrastSettings {
    fn default() -> Self {
        ContrastSettings {
            r_l: None,
            r_u: None,
            c: None,
            n_grid: 512,
            restarts: 8,
            seed: 0,
            bandwidth: None,
            bounds: BTreeMap::new(),
            max_evaluations: 1500,
        }
    }
}

/// The fitting grid: `n_grid` equispaced points on [r_l, r_u].
pub fn contrast_grid(w: &Window, s: &ContrastSettings) -> Result<Vec<f64>> {
    let ell = w.min_side();
    let r_l = s.r_l.unwrap_or(ell / 100.0);
    let r_u = s.r_u.unwrap_or(ell / 4.0);
    if !(r_l > 0.0 && r_l < r_u) || s.n_grid < 2 {
        return invalid(format!("invalid fitting range [{r_l}, {r_u}] with {} grid points", s.n_grid));
    }
    Ok(linspace(r_l, r_u, s.n_grid))
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(v: f64) -> f64 {
    let v = v.clamp(1e-9, 1.0 - 1e-9);
    (v / (1.0 - v)).ln()
}

/// Model curve (pcf or K) of `m` on the grid.
fn model_curve(m: &InterruptedModel, grid: &[f64], stat: ContrastStat) -> Result<Vec<f64>> {
    match stat {
        ContrastStat::G => grid.iter().map(|&r| m.pcf_x(r)).collect(),
        ContrastStat::K => {
            let mut err = None;
            let v = model_k_values(
                |t| {
                    m.pcf_x(t).unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        f64::NAN
                    })
                },
                grid,
                m.dim,
                1e-8,
            );
            match err {
                Some(e) => Err(e),
                None => v,
            }
        }
    }
}

fn contrast(m: &InterruptedModel, grid: &[f64], target_c: &[f64], stat: ContrastStat, c: f64) -> f64 {
    let Ok(curve) = model_curve(m, grid, stat) else {
        return f64::INFINITY;
    };
    let sq: Vec<f64> = curve
        .iter()
        .zip(target_c)
        .map(|(&mv, &t)| {
            let d = mv.max(0.0).powf(c) - t;
            d * d
        })
        .collect();
    trapezoid(grid, &sq)
}

/// Minimum contrast fit of a family to a target curve (ĝ or K̂ on `grid`).
#[allow(clippy::too_many_arguments)]
pub fn fit_contrast_to_curve(
    family: &ModelFamily,
    grid: &[f64],
    target: &[f64],
    rho_x: f64,
    d_hat: Option<f64>,
    ell: f64,
    stat: ContrastStat,
    settings: &ContrastSettings,
) -> Result<FitResult> {
    if grid.len() != target.len() || grid.len() < 2 {
        return invalid("target curve and grid differ in length");
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("target curve has non-finite values".into()));
    }
    if !(rho_x > 0.0) {
        return Err(Error::Degenerate("empty pattern".into()));
    }
    let c = settings.c.unwrap_or(stat.default_c());
    let target_c: Vec<f64> = target.iter().map(|&v| v.max(0.0).powf(c)).collect();
    let opts = NelderMeadOptions {
        max_evaluations: settings.max_evaluations,
        f_tol: 1e-18,
        f_rel: 1e-9,
        x_tol: 1e-7,
        initial_step: 0.5,
    };
    let mut best: Option<(f64, Vec<f64>, Parametrization)> = None;
    let (mut evals, mut any_converged) = (0usize, false);
    for profile in family.profiles() {
        let par = Parametrization::new(*family, profile, rho_x, d_hat, ell, &settings.bounds)?;
        let p = par.params.len();
        let starts = latin_hypercube(settings.restarts.max(1), p, &mut rng_from_seed(settings.seed));
        for start in starts {
            let u0: Vec<f64> = start.iter().map(|&v| logit(v)).collect();
            let m = nelder_mead(
                |u| {
                    let v: Vec<f64> = u.iter().map(|&x| sigmoid(x)).collect();
                    match par.model(&v) {
                        Ok((model, _)) => contrast(&model, grid, &target_c, stat, c),
                        Err(_) => f64::INFINITY,
                    }
                },
                &u0,
                &opts,
            );
            evals += m.evaluations;
            any_converged |= m.converged;
            if m.value.is_finite() && best.as_ref().is_none_or(|b| m.value < b.0) {
                let v: Vec<f64> = m.x.iter().map(|&x| sigmoid(x)).collect();
                best = Some((m.value, v, par.clone()));
            }
        }
    }
    let (value, v, par) = best.ok_or_else(|| Error::Numerical("minimum contrast objective is nowhere finite".into()))?;
    let (model, est) = par.model(&v)?;
    let mut fit = FitResult::new(stat.method());
    fit.estimates = est;
    fit.objective = value;
    fit.converged = any_converged;
    if !any_converged {
        fit.diagnostics.push("no restart converged; best point returned".into());
    }
    fit.iterations = evals;
    fit.settings.insert("r_l".into(), grid[0]);
    fit.settings.insert("r_u".into(), grid[grid.len() - 1]);
    fit.settings.insert("c".into(), c);
    fit.settings.insert("n_grid".into(), grid.len() as f64);
    fit.settings.insert("restarts".into(), settings.restarts as f64);
    fit.model = Some(model);
    Ok(fit)
}

/// Contrast value at given natural parameters (q, α, s or Δ₀, and the
/// shape parameters of the family).
#[cfg(test)]
#[allow(clippy::too_many_arguments)]
pub(crate) fn contrast_at(
    family: &ModelFamily,
    grid: &[f64],
    target: &[f64],
    rho_x: f64,
    d_hat: Option<f64>,
    ell: f64,
    stat: ContrastStat,
    settings: &ContrastSettings,
    natural: &BTreeMap<String, f64>,
) -> Result<f64> {
    let c = settings.c.unwrap_or(stat.default_c());
    let target_c: Vec<f64> = target.iter().map(|&v| v.max(0.0).powf(c)).collect();
    let profile = family.profiles()[0];
    let par = Parametrization::new(*family, profile, rho_x, d_hat, ell, &settings.bounds)?;
    let (model, _) = par.model(&par.coords_of(natural)?)?;
    Ok(contrast(&model, grid, &target_c, stat, c))
}

/// Estimated summary of X on the fitting grid.
pub(crate) fn target_curve(x: &PointPattern, grid: &[f64], stat: ContrastStat, settings: &ContrastSettings) -> Result<Vec<f64>> {
    Ok(match stat {
        ContrastStat::G => estimate_pcf(x, grid, settings.bandwidth)?.values,
        ContrastStat::K => estimate_k(x, grid)?.values,
    })
}

/// Minimum contrast fit from an observed pattern of X. ρ̂_X = n/|W|,
/// ρ̂_Y = ρ̂_X/q̂, and for Matérn II bases D̂ is the minimal pairwise distance.
pub fn fit_min_contrast(x: &PointPattern, family: &ModelFamily, stat: ContrastStat, settings: &ContrastSettings) -> Result<FitResult> {
    let w = x.window();
    if w.dim() != family.dim {
        return invalid("pattern and family dimensions differ");
    }
    let grid = contrast_grid(w, settings)?;
    let target = target_curve(x, &grid, stat, settings)?;
    let d_hat = match family.base {
        BaseFamily::MaternII => Some(estimate_hardcore_d(x)?),
        _ => None,
    };
    fit_contrast_to_curve(family, &grid, &target, x.intensity(), d_hat, w.min_side(), stat, settings)
}
