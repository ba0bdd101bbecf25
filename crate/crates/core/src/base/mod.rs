//! Regular base processes Y: Poisson, determinantal (DPP) and Matérn
//! hard-core types I and II, with their intensities and pair correlation
//! functions.

mod dpp;
mod matern;

pub use dpp::{simulate_dpp, DppSampler, DppSamplerOptions};
pub use matern::{simulate_matern_coupled, MaternPair};

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::covariance::{require_dpp_admissible, DppKernel};
use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, overlap_unchecked, unit_ball_volume, PointPattern, Window};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BaseProcessModel {
    Poisson {
        intensity: f64,
    },
    Dpp {
        kernel: DppKernel,
    },
    #[serde(rename = "matern_i")]
    MaternI {
        parent_intensity: f64,
        hardcore: f64,
    },
    #[serde(rename = "matern_ii")]
    MaternII {
        parent_intensity: f64,
        hardcore: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}

impl BaseProcessModel {
    pub fn poisson(intensity: f64) -> Result<Self> {
        let m = BaseProcessModel::Poisson { intensity };
        m.check_params()?;
        Ok(m)
    }

    pub fn dpp(kernel: DppKernel) -> Result<Self> {
        let m = BaseProcessModel::Dpp { kernel };
        m.check_params()?;
        Ok(m)
    }

    pub fn matern_i(parent_intensity: f64, hardcore: f64) -> Result<Self> {
        let m = BaseProcessModel::MaternI { parent_intensity, hardcore };
        m.check_params()?;
        Ok(m)
    }

    pub fn matern_ii(parent_intensity: f64, hardcore: f64) -> Result<Self> {
        let m = BaseProcessModel::MaternII { parent_intensity, hardcore };
        m.check_params()?;
        Ok(m)
    }

    fn check_params(&self) -> Result<()> {
        match *self {
            BaseProcessModel::Poisson { intensity } => positive("Poisson intensity", intensity),
            BaseProcessModel::Dpp { kernel } => DppKernel::new(kernel.variance, kernel.correlation).map(|_| ()),
            BaseProcessModel::MaternI { parent_intensity, hardcore }
            | BaseProcessModel::MaternII { parent_intensity, hardcore } => {
                positive("parent intensity", parent_intensity)?;
                positive("hard-core distance", hardcore)
            }
        }
    }

    /// Parameter checks plus DPP existence in dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        check_dim(dim)?;
        self.check_params()?;
        if let BaseProcessModel::Dpp { kernel } = self {
            require_dpp_admissible(kernel, dim)?;
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseProcessModel::Poisson { .. } => "poisson",
            BaseProcessModel::Dpp { .. } => "dpp",
            BaseProcessModel::MaternI { .. } => "matern_i",
            BaseProcessModel::MaternII { .. } => "matern_ii",
        }
    }

    /// ρ_Y.
    pub fn intensity(&self, dim: usize) -> Result<f64> {
        check_dim(dim)?;
        Ok(match *self {
            BaseProcessModel::Poisson { intensity } => intensity,
            BaseProcessModel::Dpp { kernel } => kernel.variance,
            BaseProcessModel::MaternI { parent_intensity: rho, hardcore } => {
                let v = unit_ball_volume(dim)? * hardcore.powi(dim as i32);
                rho * (-rho * v).exp()
            }
            BaseProcessModel::MaternII { parent_intensity: rho, hardcore } => {
                let v = unit_ball_volume(dim)? * hardcore.powi(dim as i32);
                // −expm1 keeps the D → 0 limit accurate.
                -(-rho * v).exp_m1() / v
            }
        })
    }

    /// Pair correlation function g_Y(r).
    pub fn pcf(&self, r: f64, dim: usize) -> Result<f64> {
        check_dim(dim)?;
        Ok(match *self {
            BaseProcessModel::Poisson { .. } => 1.0,
            BaseProcessModel::Dpp { kernel } => {
                let c = kernel.correlation.eval(r);
                1.0 - c * c
            }
            BaseProcessModel::MaternI { parent_intensity: rho, hardcore } => {
                if r <= hardcore {
                    0.0
                } else {
                    (rho * overlap_unchecked(r, hardcore, dim)).exp()
                }
            }
            BaseProcessModel::MaternII { parent_intensity: rho, hardcore } => {
                if r <= hardcore {
                    0.0
                } else if r >= 2.0 * hardcore {
                    1.0
                } else {
                    let v = unit_ball_volume(dim)? * hardcore.powi(dim as i32);
                    let k = overlap_unchecked(r, hardcore, dim);
                    let u = 2.0 * v - k;
                    let a = -(-rho * v).exp_m1();
                    let b = -(-rho * u).exp_m1();
                    2.0 * v / ((v - k) * a) * (1.0 - v * b / (u * a))
                }
            }
        })
    }

    /// Hard-core distance: D for Matérn models, 0 otherwise.
    pub fn hardcore_radius(&self) -> f64 {
        match *self {
            BaseProcessModel::MaternI { hardcore, .. } | BaseProcessModel::MaternII { hardcore, .. } => hardcore,
            _ => 0.0,
        }
    }

    /// A draw of Y ∩ W.
    pub fn simulate(&self, w: &Window, seed: u64) -> Result<PointPattern> {
        self.validate(w.dim())?;
        match *self {
            BaseProcessModel::Poisson { intensity } => simulate_poisson(intensity, w, &mut rng_from_seed(seed)),
            BaseProcessModel::Dpp { kernel } => simulate_dpp(&kernel, w, seed, &DppSamplerOptions::default()),
            BaseProcessModel::MaternI { parent_intensity, hardcore } => {
                Ok(simulate_matern_coupled(parent_intensity, hardcore, w, seed)?.type_i)
            }
            BaseProcessModel::MaternII { parent_intensity, hardcore } => {
                Ok(simulate_matern_coupled(parent_intensity, hardcore, w, seed)?.type_ii)
            }
        }
    }
}

/// Number of points of a Poisson process with the given mean.
pub(crate) fn poisson_count(mean: f64, rng: &mut Rng) -> Result<usize> {
    if mean <= 0.0 {
        return Ok(0);
    }
    if mean > 1e9 {
        return Err(Error::MemoryCap(format!("expected {mean:.3e} points")));
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(dist.sample(rng) as usize)
}

/// Homogeneous Poisson process on `w`.
pub fn simulate_poisson(intensity: f64, w: &Window, rng: &mut Rng) -> Result<PointPattern> {
    positive("Poisson intensity", intensity)?;
    let n = poisson_count(intensity * w.volume(), rng)?;
    let pts = (0..n).map(|_| w.uniform_point(rng)).collect();
    Ok(PointPattern::from_trusted(w.clone(), pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CorrelationModel;
    use crate::geometry::min_pairwise_distance;

    #[test]
    fn matern_intensities() {
        let m2 = BaseProcessModel::matern_ii(1736.0, 0.015).unwrap();
        let r2 = m2.intensity(2).unwrap();
        assert!((r2 - 1000.0).abs() < 1.0, "{r2}");
        let m1 = BaseProcessModel::matern_i(1736.0, 0.015).unwrap();
        let r1 = m1.intensity(2).unwrap();
        let want = 1736.0 * (-1736.0 * std::f64::consts::PI * 0.015f64.powi(2)).exp();
        assert!((r1 - want).abs() < 1e-9);
        assert!((r1 - 508.9).abs() < 0.5, "{r1}");
        for m in [BaseProcessModel::matern_i(1736.0, 1e-9).unwrap(), BaseProcessModel::matern_ii(1736.0, 1e-9).unwrap()] {
            assert!((m.intensity(2).unwrap() - 1736.0).abs() / 1736.0 < 1e-6);
        }
    }

    #[test]
    fn pcf_examples() {
        let k = DppKernel::new(1000.0, CorrelationModel::gaussian(0.015).unwrap()).unwrap();
        assert_eq!(BaseProcessModel::dpp(k).unwrap().pcf(0.0, 2).unwrap(), 0.0);
        for m in [BaseProcessModel::matern_i(1736.0, 0.015).unwrap(), BaseProcessModel::matern_ii(1736.0, 0.015).unwrap()] {
            assert_eq!(m.pcf(0.03, 2).unwrap(), 1.0);
            assert_eq!(m.pcf(0.5, 2).unwrap(), 1.0);
            assert_eq!(m.pcf(0.01, 2).unwrap(), 0.0);
        }
        let m2 = BaseProcessModel::matern_ii(1736.0, 0.015).unwrap();
        let vals: Vec<f64> = (1..=100).map(|i| m2.pcf(0.015 + 0.015 * i as f64 / 101.0, 2).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        // Continuity at 2D.
        assert!((m2.pcf(0.03 - 1e-9, 2).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn matern_ii_pcf_by_monte_carlo_second_moment() {
        // ρ²g integrates to E[N(N−1)] over a small ball pair; cheaper: check
        // the d = 1 formula against direct simulation of pair counts.
        let m = BaseProcessModel::matern_ii(40.0, 0.02).unwrap();
        let w = Window::new(&[0.0], &[10.0]).unwrap();
        let (a, b) = (0.025, 0.035);
        let mut pairs = 0usize;
        let mut total_w = 0.0;
        let reps = 400;
        for s in 0..reps {
            let y = m.simulate(&w, s).unwrap();
            let pts = y.points();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    let d = (pts[i][0] - pts[j][0]).abs();
                    if i != j && d > a && d <= b {
                        pairs += 1;
                    }
                }
            }
            total_w += 1.0;
        }
        // Expected ordered pairs ≈ ρ² ∫_{a<|t|≤b} g(|t|) (|W| − |t|) dt.
        let rho = m.intensity(1).unwrap();
        let n = 2000;
        let mut integral = 0.0;
        for i in 0..n {
            let t = a + (b - a) * (i as f64 + 0.5) / n as f64;
            integral += 2.0 * m.pcf(t, 1).unwrap() * (10.0 - t) * (b - a) / n as f64;
        }
        let want = rho * rho * integral;
        let got = pairs as f64 / total_w;
        assert!((got - want).abs() / want < 0.03, "{got} vs {want}");
    }

    #[test]
    fn hardcore_radius_by_family() {
        assert_eq!(BaseProcessModel::matern_ii(1736.0, 0.015).unwrap().hardcore_radius(), 0.015);
        assert_eq!(BaseProcessModel::poisson(10.0).unwrap().hardcore_radius(), 0.0);
    }

    #[test]
    fn invalid_models() {
        assert!(BaseProcessModel::poisson(0.0).is_err());
        assert!(BaseProcessModel::matern_i(10.0, -1.0).is_err());
        let k = DppKernel::new(1500.0, CorrelationModel::gaussian(0.015).unwrap()).unwrap();
        let m = BaseProcessModel::dpp(k).unwrap();
        assert!(matches!(m.validate(2), Err(Error::DppInadmissible { .. })));
        assert!(matches!(m.simulate(&Window::unit(2).unwrap(), 1), Err(Error::DppInadmissible { .. })));
    }

    #[test]
    fn intensity_ordering() {
        for (rho, d) in [(10.0, 0.1), (1736.0, 0.015), (5000.0, 0.02)] {
            let i1 = BaseProcessModel::matern_i(rho, d).unwrap().intensity(2).unwrap();
            let i2 = BaseProcessModel::matern_ii(rho, d).unwrap().intensity(2).unwrap();
            assert!(i1 < i2);
        }
    }

    #[test]
    fn matern_hardcore_respected() {
        let m = BaseProcessModel::matern_ii(1736.0, 0.015).unwrap();
        let y = m.simulate(&Window::unit(2).unwrap(), 3).unwrap();
        assert!(min_pairwise_distance(&y).unwrap() > 0.015);
    }

    #[test]
    fn serde_round_trip() {
        let k = DppKernel::new(1000.0, CorrelationModel::gaussian(0.015).unwrap()).unwrap();
        for m in [
            BaseProcessModel::dpp(k).unwrap(),
            BaseProcessModel::matern_ii(1736.0, 0.015).unwrap(),
            BaseProcessModel::poisson(3.0).unwrap(),
        ] {
            let s = serde_json::to_string(&m).unwrap();
            let back: BaseProcessModel = serde_json::from_str(&s).unwrap();
            assert_eq!(m, back);
        }
        let m: BaseProcessModel = serde_json::from_str(r#"{"type":"matern_ii","parent_intensity":1736,"hardcore":0.015}"#).unwrap();
        assert_eq!(m.hardcore_radius(), 0.015);
    }
}
