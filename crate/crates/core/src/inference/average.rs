//! Optimal linear combination of the g- and K-based estimators with
//! weights from a parametric bootstrap.

use rayon::prelude::*;

use super::contrast::{fit_min_contrast, ContrastSettings, ContrastStat};
use super::family::ModelFamily;
use super::{FitResult, Method};
use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::rng::replicate_seed;
use crate::thinning::simulate_triple;

#[derive(Debug, Clone, PartialEq)]
pub struct AverageSettings {
    pub contrast: ContrastSettings,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for AverageSettings {
    fn default() -> Self {
        AverageSettings { contrast: ContrastSettings::default(), bootstrap: 100, seed: 0 }
    }
}

/// λ = Σ⁻¹1/(1ᵀΣ⁻¹1) for a 2×2 matrix [[a, b], [b, c]]; `None` when Σ is
/// singular or the weights are not finite.
pub fn averaging_weights(sigma: [[f64; 2]; 2]) -> Option<[f64; 2]> {
    let [[a, b], [b2, c]] = sigma;
    let b = 0.5 * (b + b2);
    let det = a * c - b * b;
    if !(det.abs() > 1e-14 * (a * c).abs().max(f64::MIN_POSITIVE)) {
        return None;
    }
    // Σ⁻¹1 ∝ (c − b, a − b).
    let (u, v) = (c - b, a - b);
    let s = u + v;
    if s == 0.0 || !(u / s).is_finite() {
        return None;
    }
    Some([u / s, v / s])
}

/// Fits by g and by K, then combines the two per parameter with weights
/// from the MSE matrix over `bootstrap` patterns simulated from the g fit.
pub fn average_estimators(x: &PointPattern, family: &ModelFamily, settings: &AverageSettings) -> Result<FitResult> {
    let cs = &settings.contrast;
    let fit_g = fit_min_contrast(x, family, ContrastStat::G, cs)?;
    let fit_k = fit_min_contrast(x, family, ContrastStat::K, cs)?;
    let truth = fit_g.model.ok_or_else(|| Error::Numerical("g fit returned no model".into()))?;
    let names: Vec<String> = ["q", "alpha", "s", "delta0"]
        .iter()
        .filter(|n| fit_g.estimates.contains_key(**n) && fit_k.estimates.contains_key(**n))
        .map(|n| n.to_string())
        .collect();
    let w = x.window().clone();
    let reps: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..settings.bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let seed = replicate_seed(settings.seed, b);
            let sim = simulate_triple(&truth, &w, seed).ok()?;
            let bs = ContrastSettings { seed: seed ^ 0x5eed, ..cs.clone() };
            let g = fit_min_contrast(sim.x(), family, ContrastStat::G, &bs).ok()?;
            let k = fit_min_contrast(sim.x(), family, ContrastStat::K, &bs).ok()?;
            let pick = |f: &FitResult| names.iter().map(|n| f.get(n).unwrap_or(f64::NAN)).collect::<Vec<_>>();
            Some((pick(&g), pick(&k)))
        })
        .collect();
    let ok: Vec<&(Vec<f64>, Vec<f64>)> = reps.iter().flatten().collect();
    let mut out = FitResult::new(Method::Avg);
    out.estimates = fit_g.estimates.clone();
    out.converged = fit_g.converged && fit_k.converged;
    out.iterations = fit_g.iterations + fit_k.iterations;
    out.objective = f64::NAN;
    out.settings = fit_g.settings.clone();
    out.settings.insert("bootstrap".into(), settings.bootstrap as f64);
    out.settings.insert("bootstrap_ok".into(), ok.len() as f64);
    if ok.len() < reps.len() {
        out.diagnostics.push(format!("{} of {} bootstrap replicates failed", reps.len() - ok.len(), reps.len()));
    }
    for (i, name) in names.iter().enumerate() {
        let t = fit_g.get(name).unwrap_or(f64::NAN);
        let mut s = [[0.0; 2]; 2];
        for (g, k) in &ok {
            let e = [g[i] - t, k[i] - t];
            for r in 0..2 {
                for c in 0..2 {
                    s[r][c] += e[r] * e[c] / ok.len() as f64;
                }
            }
        }
        let lambda = match (ok.is_empty(), averaging_weights(s)) {
            (false, Some(l)) => l,
            _ => {
                out.diagnostics.push(format!("singular MSE matrix for {name}; using the g estimate"));
                [1.0, 0.0]
            }
        };
        let est = lambda[0] * fit_g.get(name).unwrap_or(f64::NAN) + lambda[1] * fit_k.get(name).unwrap_or(f64::NAN);
        out.estimates.insert(name.clone(), est);
        out.estimates.insert(format!("{name}_g"), fit_g.get(name).unwrap_or(f64::NAN));
        out.estimates.insert(format!("{name}_K"), fit_k.get(name).unwrap_or(f64::NAN));
        out.weights.insert(name.clone(), lambda);
    }
    if let Some(q) = out.get("q") {
        out.estimates.insert("rho_y".into(), x.intensity() / q);
    }
    out.model = fit_g.model;
    Ok(out)
}
