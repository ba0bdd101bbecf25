//! Stationary isotropic correlation families and determinantal kernels.
//!
//! The same [`CorrelationModel`] serves as the correlation R₀ of a Gaussian
//! field and, scaled by an intensity, as the kernel C₀ = ρ·R₀ of a
//! determinantal point process.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::check_dim;
use crate::special::{adaptive_simpson, bessel_j0, ln_bessel_k, ln_gamma_fn};

/// Largest supported Whittle–Matérn shape.
pub const MAX_SHAPE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CorrelationModel {
    /// exp(−(r/s)²)
    Gaussian { scale: f64 },
    /// exp(−r/s)
    Exponential { scale: f64 },
    /// 2^{1−ν}/Γ(ν) (r/s)^ν K_ν(r/s)
    WhittleMatern { scale: f64, shape: f64 },
}

impl CorrelationModel {
    pub fn gaussian(scale: f64) -> Result<Self> {
        CorrelationModel::Gaussian { scale }.validated()
    }

    pub fn exponential(scale: f64) -> Result<Self> {
        CorrelationModel::Exponential { scale }.validated()
    }

    pub fn whittle_matern(scale: f64, shape: f64) -> Result<Self> {
        CorrelationModel::WhittleMatern { scale, shape }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let s = self.scale();
        if !(s > 0.0 && s.is_finite()) {
            return invalid(format!("correlation scale must be positive, got {s}"));
        }
        if let CorrelationModel::WhittleMatern { shape, .. } = self {
            if !(shape > 0.0 && shape <= MAX_SHAPE) {
                return invalid(format!("Whittle-Matern shape must lie in (0, {MAX_SHAPE}], got {shape}"));
            }
        }
        Ok(self)
    }

    pub fn scale(&self) -> f64 {
        match *self {
            CorrelationModel::Gaussian { scale }
            | CorrelationModel::Exponential { scale }
            | CorrelationModel::WhittleMatern { scale, .. } => scale,
        }
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        match *self {
            CorrelationModel::Gaussian { .. } => CorrelationModel::Gaussian { scale },
            CorrelationModel::Exponential { .. } => CorrelationModel::Exponential { scale },
            CorrelationModel::WhittleMatern { shape, .. } => CorrelationModel::WhittleMatern { scale, shape },
        }
    }

    pub fn shape(&self) -> Option<f64> {
        match *self {
            CorrelationModel::WhittleMatern { shape, .. } => Some(shape),
            _ => None,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            CorrelationModel::Gaussian { .. } => "gaussian",
            CorrelationModel::Exponential { .. } => "exponential",
            CorrelationModel::WhittleMatern { .. } => "whittle_matern",
        }
    }

    /// R₀(r).
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            CorrelationModel::Gaussian { scale } => {
                let u = r / scale;
                (-u * u).exp()
            }
            CorrelationModel::Exponential { scale } => (-r / scale).exp(),
            CorrelationModel::WhittleMatern { scale, shape } => {
                if r == 0.0 {
                    return 1.0;
                }
                let u = r / scale;
                let ln = (1.0 - shape) * std::f64::consts::LN_2 - ln_gamma_fn(shape) + shape * u.ln()
                    + ln_bessel_k(shape, u);
                ln.exp().min(1.0)
            }
        }
    }

    /// Distance beyond which |R₀| < 1e-12 (used to truncate integrals).
    pub fn effective_range(&self) -> f64 {
        let s = self.scale();
        match *self {
            CorrelationModel::Gaussian { .. } => 5.3 * s,
            CorrelationModel::Exponential { .. } => 27.7 * s,
            CorrelationModel::WhittleMatern { shape, .. } => {
                // Bracket the crossing numerically.
                let mut r = s;
                while self.eval(r) > 1e-12 && r < 1e6 * s {
                    r *= 1.25;
                }
                r.max(s * (1.0 + shape))
            }
        }
    }

    /// Spectral density of R₀ (Fourier transform in d dimensions) at frequency norm `x`.
    pub fn spectral_density(&self, x: f64, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            CorrelationModel::Gaussian { scale } => {
                (PI.sqrt() * scale).powi(dim as i32) * (-(PI * scale * x).powi(2)).exp()
            }
            CorrelationModel::Exponential { scale } => matern_spectral(scale, 0.5, x, d),
            CorrelationModel::WhittleMatern { scale, shape } => matern_spectral(scale, shape, x, d),
        }
    }
}

fn matern_spectral(scale: f64, shape: f64, x: f64, d: f64) -> f64 {
    let ln = ln_gamma_fn(shape + d / 2.0) - ln_gamma_fn(shape) + d * (2.0 * PI.sqrt() * scale).ln()
        - (shape + d / 2.0) * (1.0 + (2.0 * PI * scale * x).powi(2)).ln();
    ln.exp()
}

/// Stationary determinantal kernel C₀(r) = ρ·R₀(r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DppKernel {
    /// ρ_Y = C₀(0), points per unit volume.
    pub variance: f64,
    #[serde(flatten)]
    pub correlation: CorrelationModel,
}

impl DppKernel {
    pub fn new(variance: f64, correlation: CorrelationModel) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return invalid(format!("DPP intensity must be positive, got {variance}"));
        }
        Ok(DppKernel { variance, correlation: correlation.validated()? })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.variance * self.correlation.eval(r)
    }

    /// φ₀(x) in closed form.
    pub fn spectral_density(&self, x: f64, dim: usize) -> Result<f64> {
        check_dim(dim)?;
        Ok(self.variance * self.correlation.spectral_density(x, dim))
    }
}

/// Outcome of the spectral existence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DppExistence {
    pub admissible: bool,
    /// sup φ₀.
    pub peak: f64,
    /// Largest intensity admissible at the kernel's scale and shape.
    pub max_intensity: f64,
}

/// DPP(C₀) exists iff sup φ₀ ≤ 1. All implemented spectral densities are
/// radially non-increasing, so the supremum sits at frequency 0.
pub fn check_dpp_existence(k: &DppKernel, dim: usize) -> Result<DppExistence> {
    check_dim(dim)?;
    let unit_peak = k.correlation.spectral_density(0.0, dim);
    let peak = k.variance * unit_peak;
    Ok(DppExistence { admissible: peak <= 1.0, peak, max_intensity: 1.0 / unit_peak })
}

pub fn require_dpp_admissible(k: &DppKernel, dim: usize) -> Result<()> {
    let e = check_dpp_existence(k, dim)?;
    if e.admissible {
        Ok(())
    } else {
        Err(Error::DppInadmissible { peak: e.peak, max_intensity: e.max_intensity })
    }
}

/// φ₀(x) by quadrature of the Hankel-transform integral of C₀.
///
/// Independent of the closed forms above; used to cross-check them.
pub fn spectral_density_by_quadrature(k: &DppKernel, x: f64, dim: usize) -> Result<f64> {
    check_dim(dim)?;
    let range = k.correlation.effective_range();
    // Split into pieces no longer than a quarter oscillation period.
    let period = if x > 0.0 { 1.0 / x } else { f64::INFINITY };
    let pieces = ((range / (0.25 * period)).ceil() as usize).clamp(64, 200_000);
    let h = range / pieces as f64;
    let tol = 1e-13 * k.variance.max(1.0) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        let part = match dim {
            1 => 2.0 * adaptive_simpson(|s| k.eval(s) * (2.0 * PI * x * s).cos(), a, b, tol)?,
            2 => 2.0 * PI * adaptive_simpson(|s| k.eval(s) * bessel_j0(2.0 * PI * x * s) * s, a, b, tol)?,
            _ => {
                if x == 0.0 {
                    4.0 * PI * adaptive_simpson(|s| k.eval(s) * s * s, a, b, tol)?
                } else {
                    2.0 / x * adaptive_simpson(|s| k.eval(s) * s * (2.0 * PI * x * s).sin(), a, b, tol)?
                }
            }
        };
        total += part;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_examples() {
        let g = CorrelationModel::gaussian(0.05).unwrap();
        assert_eq!(g.eval(0.0), 1.0);
        assert!((g.eval(0.05) - (-1f64).exp()).abs() < 1e-15);
        for s in [0.3, 2.0] {
            let wm = CorrelationModel::whittle_matern(s, 0.5).unwrap();
            let ex = CorrelationModel::exponential(s).unwrap();
            for f in [0.1, 1.0, 5.0] {
                assert!((wm.eval(f * s) - ex.eval(f * s)).abs() < 1e-12);
            }
            assert_eq!(wm.eval(0.0), 1.0);
        }
    }

    #[test]
    fn whittle_matern_continuous_at_origin() {
        for nu in [0.25, 0.5, 1.0, 2.0, 5.0, 50.0] {
            let m = CorrelationModel::whittle_matern(1.0, nu).unwrap();
            let near = m.eval(1e-9);
            assert!((near - 1.0).abs() < 1e-3, "nu {nu}: {near}");
            assert!(m.eval(3.0) < 1.0 && m.eval(3.0) > 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CorrelationModel::gaussian(0.0).is_err());
        assert!(CorrelationModel::whittle_matern(1.0, 60.0).is_err());
        assert!(DppKernel::new(-1.0, CorrelationModel::Gaussian { scale: 1.0 }).is_err());
    }

    #[test]
    fn gaussian_spectral_peak() {
        let k = DppKernel::new(1000.0, CorrelationModel::gaussian(0.015).unwrap()).unwrap();
        let v = k.spectral_density(0.0, 2).unwrap();
        assert!((v - 1000.0 * PI * 0.015f64.powi(2)).abs() < 1e-12);
        assert!((v - 0.70686).abs() < 1e-5);
        let q = spectral_density_by_quadrature(&k, 0.0, 2).unwrap();
        assert!((q - v).abs() / v < 1e-6, "quad {q} closed {v}");
    }

    #[test]
    fn spectral_density_vanishes_at_high_frequency() {
        let alpha = 0.015;
        for corr in [
            CorrelationModel::gaussian(alpha).unwrap(),
            CorrelationModel::exponential(alpha).unwrap(),
            CorrelationModel::whittle_matern(alpha, 2.0).unwrap(),
        ] {
            let k = DppKernel::new(1.0, corr).unwrap();
            for d in 1..=3 {
                assert!(k.spectral_density(100.0 / alpha, d).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for corr in [
            CorrelationModel::gaussian(0.7).unwrap(),
            CorrelationModel::exponential(0.4).unwrap(),
            CorrelationModel::whittle_matern(0.3, 1.5).unwrap(),
        ] {
            let k = DppKernel::new(1.3, corr).unwrap();
            for d in 1..=3 {
                for x in [0.0, 0.3, 1.1] {
                    let c = k.spectral_density(x, d).unwrap();
                    let q = spectral_density_by_quadrature(&k, x, d).unwrap();
                    assert!((c - q).abs() <= 1e-6 * c.max(1e-3), "{corr:?} d={d} x={x}: {c} vs {q}");
                }
            }
        }
    }

    #[test]
    fn spectral_density_integrates_to_variance() {
        // ∫ φ₀ over R² = 2π ∫ φ₀(x) x dx = C₀(0).
        for corr in [CorrelationModel::gaussian(0.5).unwrap(), CorrelationModel::whittle_matern(0.5, 3.0).unwrap()] {
            let k = DppKernel::new(2.0, corr).unwrap();
            let top = 60.0 / 0.5;
            let mut v = 0.0;
            for i in 0..240 {
                let (a, b) = (top * i as f64 / 240.0, top * (i + 1) as f64 / 240.0);
                v += 2.0 * PI * adaptive_simpson(|x| k.spectral_density(x, 2).unwrap() * x, a, b, 1e-12).unwrap();
            }
            assert!((v - 2.0).abs() / 2.0 < 1e-4, "{v}");
        }
    }

    #[test]
    fn existence_boundary() {
        let corr = CorrelationModel::gaussian(0.015).unwrap();
        let ok = check_dpp_existence(&DppKernel::new(1000.0, corr).unwrap(), 2).unwrap();
        assert!(ok.admissible);
        assert!((ok.max_intensity - 1.0 / (PI * 0.015f64.powi(2))).abs() < 1e-9);
        assert!((ok.max_intensity - 1414.7).abs() < 0.1);
        let bad = check_dpp_existence(&DppKernel::new(1500.0, corr).unwrap(), 2).unwrap();
        assert!(!bad.admissible);
        assert!((bad.peak - 1.06).abs() < 0.01);
        let tiny = check_dpp_existence(&DppKernel::new(1e-9, corr).unwrap(), 2).unwrap();
        assert!(tiny.admissible);
        let m = ok.max_intensity;
        assert!(!check_dpp_existence(&DppKernel::new(m * (1.0 + 1e-6), corr).unwrap(), 2).unwrap().admissible);
        assert!(check_dpp_existence(&DppKernel::new(m * (1.0 - 1e-6), corr).unwrap(), 2).unwrap().admissible);
    }

    #[test]
    fn spectral_max_on_log_grid_matches_closed_form() {
        let k = DppKernel::new(1000.0, CorrelationModel::gaussian(0.015).unwrap()).unwrap();
        let peak = 1000.0 * PI * 0.015f64.powi(2);
        let mut best = 0.0f64;
        for i in 0..10_000 {
            let x = if i == 0 { 0.0 } else { 10f64.powf(-6.0 + 10.0 * i as f64 / 9_999.0) };
            let v = k.spectral_density(x, 2).unwrap();
            assert!(v >= 0.0);
            best = best.max(v);
        }
        assert!((best - peak).abs() < 1e-10);
    }
}
