//! Parametric families for the X-only regime and their box parametrization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::base::BaseProcessModel;
use crate::covariance::{CorrelationModel, DppKernel};
use crate::error::{invalid, Error, Result};
use crate::geometry::unit_ball_volume;
use crate::selection::{RadiusLaw, SelectionModel};
use crate::thinning::InterruptedModel;

use super::cl::{K_GRID, NU_GRID};

/// Correlation family with the scale free; a missing Whittle–Matérn shape
/// is profiled over [`NU_GRID`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CorrFamily {
    Gaussian,
    Exponential,
    WhittleMatern {
        #[serde(default)]
        shape: Option<f64>,
    },
}

impl CorrFamily {
    pub fn of(c: &CorrelationModel) -> Self {
        match *c {
            CorrelationModel::Gaussian { .. } => CorrFamily::Gaussian,
            CorrelationModel::Exponential { .. } => CorrFamily::Exponential,
            CorrelationModel::WhittleMatern { shape, .. } => CorrFamily::WhittleMatern { shape: Some(shape) },
        }
    }

    pub(crate) fn shapes(&self) -> Vec<Option<f64>> {
        match *self {
            CorrFamily::WhittleMatern { shape: None } => NU_GRID.iter().map(|&v| Some(v)).collect(),
            CorrFamily::WhittleMatern { shape } => vec![shape],
            _ => vec![None],
        }
    }

    pub(crate) fn build(&self, scale: f64, shape: Option<f64>) -> Result<CorrelationModel> {
        match *self {
            CorrFamily::Gaussian => CorrelationModel::gaussian(scale),
            CorrFamily::Exponential => CorrelationModel::exponential(scale),
            CorrFamily::WhittleMatern { .. } => {
                CorrelationModel::whittle_matern(scale, shape.ok_or_else(|| Error::InvalidParameter("missing shape".into()))?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BaseFamily {
    Poisson,
    /// DPP with free scale α; ρ_Y follows from ρ̂_X/q.
    Dpp { correlation: CorrFamily },
    /// Matérn II with D estimated by the minimal pairwise distance.
    #[serde(rename = "matern_ii")]
    MaternII,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SelectionFamily {
    /// χ² field with free scale s; k profiled over [`K_GRID`] when absent.
    Chi2 {
        #[serde(default)]
        k: Option<u32>,
        correlation: CorrFamily,
    },
    /// Boolean model with deterministic radius Δ₀.
    Boolean {
        #[serde(default)]
        complement: bool,
    },
}

impl SelectionFamily {
    pub fn of(s: &SelectionModel) -> Result<Self> {
        match *s {
            SelectionModel::Chi2 { k, correlation, .. } => {
                Ok(SelectionFamily::Chi2 { k: Some(k), correlation: CorrFamily::of(&correlation) })
            }
            SelectionModel::Boolean { radius: RadiusLaw::Deterministic { .. }, complement, .. } => {
                Ok(SelectionFamily::Boolean { complement })
            }
            SelectionModel::Boolean { .. } => {
                Err(Error::Unsupported("fitting Boolean selection with random radii".into()))
            }
        }
    }

    pub(crate) fn theta_name(&self) -> &'static str {
        match self {
            SelectionFamily::Chi2 { .. } => "s",
            SelectionFamily::Boolean { .. } => "delta0",
        }
    }

    /// Selection model with mean q and parameter θ (s or Δ₀).
    pub(crate) fn build(&self, q: f64, theta: f64, k: u32, shape: Option<f64>, dim: usize) -> Result<SelectionModel> {
        match *self {
            SelectionFamily::Chi2 { correlation, .. } => {
                SelectionModel::chi2_with_q(k, q, correlation.build(theta, shape)?)
            }
            SelectionFamily::Boolean { complement } => {
                SelectionModel::boolean_with_q(q, RadiusLaw::Deterministic { radius: theta }, dim, complement)
            }
        }
    }

    pub(crate) fn ks(&self) -> Vec<u32> {
        match *self {
            SelectionFamily::Chi2 { k: Some(k), .. } => vec![k],
            SelectionFamily::Chi2 { k: None, .. } => K_GRID.to_vec(),
            SelectionFamily::Boolean { .. } => vec![1],
        }
    }

    pub(crate) fn shapes(&self) -> Vec<Option<f64>> {
        match self {
            SelectionFamily::Chi2 { correlation, .. } => correlation.shapes(),
            SelectionFamily::Boolean { .. } => vec![None],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub base: BaseFamily,
    pub selection: SelectionFamily,
    #[serde(default = "two")]
    pub dim: usize,
}

fn two() -> usize {
    2
}

impl ModelFamily {
    /// Family of a concrete model, with its shape parameters held fixed.
    pub fn of(m: &InterruptedModel) -> Result<Self> {
        let base = match m.base {
            BaseProcessModel::Poisson { .. } => BaseFamily::Poisson,
            BaseProcessModel::Dpp { kernel } => BaseFamily::Dpp { correlation: CorrFamily::of(&kernel.correlation) },
            BaseProcessModel::MaternII { .. } => BaseFamily::MaternII,
            BaseProcessModel::MaternI { .. } => return Err(Error::Unsupported("fitting Matérn I base processes".into())),
        };
        Ok(ModelFamily { base, selection: SelectionFamily::of(&m.selection)?, dim: m.dim })
    }

    /// Shape combinations (k, selection shape, base shape) to profile over.
    pub(crate) fn profiles(&self) -> Vec<Profile> {
        let base_shapes = match self.base {
            BaseFamily::Dpp { correlation } => correlation.shapes(),
            _ => vec![None],
        };
        let mut out = Vec::new();
        for &k in &self.selection.ks() {
            for &sel_shape in &self.selection.shapes() {
                for &base_shape in &base_shapes {
                    out.push(Profile { k, sel_shape, base_shape });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Profile {
    pub k: u32,
    pub sel_shape: Option<f64>,
    pub base_shape: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Param {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
}

impl Param {
    /// Natural value at box coordinate v ∈ [0, 1].
    pub fn at(&self, v: f64) -> f64 {
        if self.log {
            (self.lo.ln() + v * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + v * (self.hi - self.lo)
        }
    }

    #[cfg(test)]
    pub fn coord(&self, x: f64) -> f64 {
        if self.log {
            (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (x - self.lo) / (self.hi - self.lo)
        }
    }
}

/// Maps box coordinates to models. For DPP bases the box coordinate of α
/// is its fraction of the largest admissible scale at ρ_Y = ρ̂_X/q, so
/// every point of the box is a valid model.
#[derive(Debug, Clone)]
pub(crate) struct Parametrization {
    pub family: ModelFamily,
    pub profile: Profile,
    pub rho_x: f64,
    pub d_hat: Option<f64>,
    pub params: Vec<Param>,
}

impl Parametrization {
    pub fn new(
        family: ModelFamily,
        profile: Profile,
        rho_x: f64,
        d_hat: Option<f64>,
        ell: f64,
        overrides: &BTreeMap<String, (f64, f64)>,
    ) -> Result<Self> {
        let dim = family.dim;
        let mut q_lo = 0.02;
        if let BaseFamily::MaternII = family.base {
            let d = d_hat.ok_or_else(|| Error::InvalidParameter("Matérn II fit needs a hard-core distance".into()))?;
            let v = unit_ball_volume(dim)? * d.powi(dim as i32);
            q_lo = f64::max(q_lo, rho_x * v * (1.0 + 1e-6));
        }
        let mut params = vec![Param { name: "q", lo: q_lo, hi: 0.98, log: false }];
        if let BaseFamily::Dpp { .. } = family.base {
            params.push(Param { name: "alpha", lo: 0.02, hi: 1.0, log: false });
        }
        let name = family.selection.theta_name();
        let hi = if name == "s" { ell / 2.0 } else { ell / 4.0 };
        params.push(Param { name, lo: ell / 1000.0, hi, log: true });
        for p in params.iter_mut() {
            if let Some(&(lo, hi)) = overrides.get(p.name) {
                p.lo = lo;
                p.hi = hi;
            }
        }
        for p in &params {
            if !(p.lo < p.hi) || (p.log && p.lo <= 0.0) {
                return invalid(format!("empty parameter box for {}: [{}, {}]", p.name, p.lo, p.hi));
            }
        }
        Ok(Parametrization { family, profile, rho_x, d_hat, params })
    }

    /// Largest admissible DPP scale at intensity ρ_Y.
    fn alpha_max(&self, rho_y: f64) -> Result<f64> {
        let BaseFamily::Dpp { correlation } = self.family.base else {
            return Ok(f64::NAN);
        };
        let unit = correlation.build(1.0, self.profile.base_shape)?;
        let peak = unit.spectral_density(0.0, self.family.dim);
        Ok((1.0 / (rho_y * peak)).powf(1.0 / self.family.dim as f64))
    }

    /// Model and named natural values at box coordinates `v`.
    pub fn model(&self, v: &[f64]) -> Result<(InterruptedModel, BTreeMap<String, f64>)> {
        let dim = self.family.dim;
        let mut est = BTreeMap::new();
        let q = self.params[0].at(v[0]);
        let rho_y = self.rho_x / q;
        est.insert("q".to_string(), q);
        est.insert("rho_x".to_string(), self.rho_x);
        est.insert("rho_y".to_string(), rho_y);
        let mut next = 1;
        let base = match self.family.base {
            BaseFamily::Poisson => BaseProcessModel::poisson(rho_y)?,
            BaseFamily::Dpp { correlation } => {
                let frac = self.params[next].at(v[next]);
                next += 1;
                let alpha = frac * self.alpha_max(rho_y)?;
                est.insert("alpha".to_string(), alpha);
                if let Some(nu) = self.profile.base_shape {
                    est.insert("base_shape".to_string(), nu);
                }
                let kernel = DppKernel::new(rho_y, correlation.build(alpha, self.profile.base_shape)?)?;
                // The box keeps the kernel admissible up to round-off.
                let kernel = DppKernel { variance: kernel.variance.min(self.alpha_limit_intensity(&kernel)?), ..kernel };
                BaseProcessModel::dpp(kernel)?
            }
            BaseFamily::MaternII => {
                let d = self.d_hat.unwrap_or(f64::NAN);
                let vol = unit_ball_volume(dim)? * d.powi(dim as i32);
                let parent = -(-rho_y * vol).ln_1p() / vol;
                est.insert("D".to_string(), d);
                est.insert("rho_parent".to_string(), parent);
                BaseProcessModel::matern_ii(parent, d)?
            }
        };
        let theta = self.params[next].at(v[next]);
        est.insert(self.family.selection.theta_name().to_string(), theta);
        let sel = self.family.selection.build(q, theta, self.profile.k, self.profile.sel_shape, dim)?;
        if let SelectionFamily::Chi2 { .. } = self.family.selection {
            est.insert("k".to_string(), self.profile.k as f64);
            if let Some(nu) = self.profile.sel_shape {
                est.insert("nu".to_string(), nu);
            }
        }
        Ok((InterruptedModel::new(base, sel, dim)?, est))
    }

    fn alpha_limit_intensity(&self, k: &DppKernel) -> Result<f64> {
        Ok(1.0 / k.correlation.spectral_density(0.0, self.family.dim))
    }

    /// Box coordinates of natural parameter values (for evaluating the
    /// objective at a known point).
    #[cfg(test)]
    pub fn coords_of(&self, natural: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        let get = |n: &str| natural.get(n).copied().ok_or_else(|| Error::InvalidParameter(format!("missing {n}")));
        let q = get("q")?;
        let mut out = vec![self.params[0].coord(q)];
        let mut next = 1;
        if let BaseFamily::Dpp { .. } = self.family.base {
            out.push(self.params[next].coord(get("alpha")? / self.alpha_max(self.rho_x / q)?));
            next += 1;
        }
        out.push(self.params[next].coord(get(self.family.selection.theta_name())?));
        Ok(out)
    }
}
