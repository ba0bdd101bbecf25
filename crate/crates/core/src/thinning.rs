//! Interrupted point processes X = {x ∈ Y : Π(x) ≥ U(x)} and their
//! second-order structure.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::base::BaseProcessModel;
use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, PointPattern, ThinnedPair, Window};
use crate::rng::{rng_from_seed, split_seed, streams};
use crate::selection::{PiSampler, SelectionModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterruptedModel {
    pub base: BaseProcessModel,
    pub selection: SelectionModel,
    pub dim: usize,
}

impl InterruptedModel {
    pub fn new(base: BaseProcessModel, selection: SelectionModel, dim: usize) -> Result<Self> {
        let m = InterruptedModel { base, selection, dim };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        self.base.validate(self.dim)?;
        let q = self.selection.q(self.dim)?;
        if !(q > 0.0 && q < 1.0) {
            return invalid(format!("mean selection probability must lie in (0, 1), got {q}"));
        }
        if !(self.intensity_x()? > 0.0) {
            return invalid("retained intensity must be positive");
        }
        Ok(())
    }

    pub fn q(&self) -> Result<f64> {
        self.selection.q(self.dim)
    }

    pub fn intensity_y(&self) -> Result<f64> {
        self.base.intensity(self.dim)
    }

    /// ρ_X = q·ρ_Y.
    pub fn intensity_x(&self) -> Result<f64> {
        Ok(self.q()? * self.intensity_y()?)
    }

    pub fn m0(&self, r: f64) -> Result<f64> {
        self.selection.m0(r, self.dim)
    }

    pub fn pcf_y(&self, r: f64) -> Result<f64> {
        self.base.pcf(r, self.dim)
    }

    /// g_X = M₀·g_Y.
    pub fn pcf_x(&self, r: f64) -> Result<f64> {
        Ok(self.m0(r)? * self.pcf_y(r)?)
    }

    /// Pair correlation of the deleted points.
    pub fn pcf_xbar(&self, r: f64) -> Result<f64> {
        let q = self.q()?;
        if q >= 1.0 {
            return Err(Error::Degenerate("q = 1 leaves no deleted points".into()));
        }
        let m = self.m0(r)?;
        Ok((1.0 - 2.0 * q + q * q * m) / ((1.0 - q) * (1.0 - q)) * self.pcf_y(r)?)
    }

    /// Cross pair correlation of retained and deleted points.
    pub fn pcf_cross(&self, r: f64) -> Result<f64> {
        let q = self.q()?;
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Degenerate(format!("cross pcf needs 0 < q < 1, got {q}")));
        }
        let m = self.m0(r)?;
        Ok((q - q * q * m) / (q * (1.0 - q)) * self.pcf_y(r)?)
    }

    /// X inherits the hard-core distance of Y since M₀ > 0 everywhere.
    pub fn hardcore_radius(&self) -> f64 {
        self.base.hardcore_radius()
    }
}

/// One realization: Y ∩ W, Π at the points of Y, the uniforms, and the split.
#[derive(Debug, Clone)]
pub struct Triple {
    pub y: PointPattern,
    pub pi: Vec<f64>,
    pub uniforms: Vec<f64>,
    pub retained: Vec<bool>,
    pub split: ThinnedPair,
}

impl Triple {
    pub fn x(&self) -> &PointPattern {
        self.split.retained()
    }

    pub fn xbar(&self) -> &PointPattern {
        self.split.deleted()
    }
}

pub fn simulate_triple(m: &InterruptedModel, w: &Window, seed: u64) -> Result<Triple> {
    if w.dim() != m.dim {
        return invalid(format!("window dimension {} differs from model dimension {}", w.dim(), m.dim));
    }
    m.validate()?;
    let y = m.base.simulate(w, split_seed(seed, streams::BASE))?;
    thin_pattern(&y, &m.selection, seed)
}

/// Thins a given pattern of Y with an independent Π. Π uses the SELECTION
/// sub-stream of `seed` and the uniforms the UNIFORMS sub-stream, attached
/// in point order.
pub fn thin_pattern(y: &PointPattern, selection: &SelectionModel, seed: u64) -> Result<Triple> {
    let pi = PiSampler::new(*selection, y.window(), y.points())?.draw(&mut rng_from_seed(split_seed(seed, streams::SELECTION)))?;
    let mut urng = rng_from_seed(split_seed(seed, streams::UNIFORMS));
    let uniforms: Vec<f64> = (0..y.len()).map(|_| urng.random::<f64>()).collect();
    let retained: Vec<bool> = pi.iter().zip(&uniforms).map(|(p, u)| p >= u).collect();
    let (mut keep, mut drop) = (Vec::new(), Vec::new());
    for (p, &r) in y.points().iter().zip(&retained) {
        if r {
            keep.push(*p);
        } else {
            drop.push(*p);
        }
    }
    let w = y.window().clone();
    let split = ThinnedPair::from_trusted(PointPattern::from_trusted(w.clone(), keep), PointPattern::from_trusted(w, drop));
    Ok(Triple { y: y.clone(), pi, uniforms, retained, split })
}
