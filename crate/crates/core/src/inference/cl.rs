//! First- and second-order composite likelihood for observed (X, Y).

use serde::{Deserialize, Serialize};

use super::family::SelectionFamily;
use super::{FitResult, Method};
use crate::error::{invalid, Error, Result};
use crate::geometry::{close_pairs, Point, ThinnedPair};
use crate::optim::scan_then_golden;
use crate::selection::SelectionModel;

/// Profile grid for the χ² degrees of freedom.
pub const K_GRID: [u32; 5] = [1, 2, 3, 5, 10];
/// Profile grid for Whittle–Matérn shapes.
pub const NU_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 5.0];

const FLOOR: f64 = 1e-12;

/// Probabilities that a pair at normalized second moment `m0` is
/// (retained, retained), (deleted, deleted), or mixed in a given order.
pub fn cl2_pair_probabilities(q: f64, m0: f64) -> [f64; 3] {
    let both = q * q * m0;
    [both, 1.0 - 2.0 * q + both, q - both]
}

/// Pairs entering CL₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRange {
    /// Pairs closer than a quarter of the minimal window side.
    Default,
    Fixed(f64),
    Unlimited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClSettings {
    pub range: PairRange,
    /// Search box for s or Δ₀; defaults to [ℓ/1000, ℓ/2] for s and
    /// [ℓ/1000, ℓ/4] for Δ₀.
    pub bounds: Option<(f64, f64)>,
    pub scan_nodes: usize,
}

impl Default for ClSettings {
    fn default() -> Self {
        ClSettings { range: PairRange::Default, bounds: None, scan_nodes: 41 }
    }
}

/// q̂ = n(x)/n(y), the maximizer of CL₁.
pub fn fit_q_cl1(t: &ThinnedPair) -> Result<FitResult> {
    let nx = t.retained().len() as f64;
    let ny = nx + t.deleted().len() as f64;
    if ny == 0.0 {
        return Err(Error::Degenerate("CL1 needs at least one point of Y".into()));
    }
    let q = nx / ny;
    let xlogy = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * b.ln() };
    let mut fit = FitResult::new(Method::Cl1);
    fit.estimates.insert("q".into(), q);
    fit.objective = xlogy(nx, q) + xlogy(ny - nx, 1.0 - q);
    fit.converged = true;
    Ok(fit)
}

/// Distances of same-class and cross-class pairs.
struct PairSets {
    retained: Vec<f64>,
    deleted: Vec<f64>,
    mixed: Vec<f64>,
}

fn pair_sets(t: &ThinnedPair, range: f64) -> PairSets {
    let nx = t.retained().len();
    let pts: Vec<Point> = t.retained().points().iter().chain(t.deleted().points()).copied().collect();
    let mut out = PairSets { retained: Vec::new(), deleted: Vec::new(), mixed: Vec::new() };
    for (i, j, d) in close_pairs(t.window(), &pts, range) {
        match (i < nx, j < nx) {
            (true, true) => out.retained.push(d),
            (false, false) => out.deleted.push(d),
            _ => out.mixed.push(d),
        }
    }
    out
}

fn resolve_range(t: &ThinnedPair, range: PairRange) -> Result<f64> {
    let w = t.window();
    match range {
        PairRange::Default => Ok(w.min_side() / 4.0),
        PairRange::Fixed(r) if r > 0.0 => Ok(r),
        PairRange::Fixed(r) => invalid(format!("pair range must be positive, got {r}")),
        PairRange::Unlimited => Ok(w.sides().iter().map(|s| s * s).sum::<f64>().sqrt() * 1.0001),
    }
}

fn log_cl2(sets: &PairSets, sel: &SelectionModel, q: f64, dim: usize) -> Result<f64> {
    let mut total = 0.0;
    for (class, ds) in [&sets.retained, &sets.deleted, &sets.mixed].into_iter().enumerate() {
        for &d in ds {
            let p = cl2_pair_probabilities(q, sel.m0(d, dim)?)[class];
            total += p.max(FLOOR).ln();
        }
    }
    Ok(total)
}

/// log CL₂ of a thinned pattern under a selection model and fixed q.
pub fn cl2_log_likelihood(t: &ThinnedPair, sel: &SelectionModel, q: f64, range: PairRange) -> Result<f64> {
    let sets = pair_sets(t, resolve_range(t, range)?);
    log_cl2(&sets, sel, q, t.window().dim())
}

/// Maximizes CL₂ over θ_Π with q fixed, profiling k and ν over their grids
/// when the family leaves them free.
pub fn fit_theta_cl2(t: &ThinnedPair, family: &SelectionFamily, q_fixed: f64, settings: &ClSettings) -> Result<FitResult> {
    if !(q_fixed > 0.0 && q_fixed < 1.0) {
        return invalid(format!("CL2 needs 0 < q < 1, got {q_fixed}"));
    }
    let w = t.window();
    let dim = w.dim();
    let ell = w.min_side();
    let name = family.theta_name();
    let (lo, hi) = settings.bounds.unwrap_or(if name == "s" { (ell / 1000.0, ell / 2.0) } else { (ell / 1000.0, ell / 4.0) });
    if !(lo > 0.0 && lo < hi) {
        return invalid(format!("invalid search box [{lo}, {hi}] for {name}"));
    }
    let range = resolve_range(t, settings.range)?;
    let sets = pair_sets(t, range);
    if sets.retained.len() + sets.deleted.len() + sets.mixed.len() == 0 {
        return Err(Error::Degenerate("no pairs within the CL2 range".into()));
    }
    let mut best: Option<(f64, f64, u32, Option<f64>, usize)> = None;
    for &k in &family.ks() {
        for &shape in &family.shapes() {
            let mut failure = None;
            let m = scan_then_golden(
                |lt| {
                    let theta = lt.exp();
                    match family.build(q_fixed, theta, k, shape, dim).and_then(|s| log_cl2(&sets, &s, q_fixed, dim)) {
                        Ok(v) => -v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::INFINITY
                        }
                    }
                },
                lo.ln(),
                hi.ln(),
                settings.scan_nodes,
                1e-7,
            );
            if !m.value.is_finite() {
                return Err(failure.unwrap_or_else(|| Error::Numerical("CL2 objective is not finite".into())));
            }
            if best.is_none_or(|b| m.value < b.0) {
                best = Some((m.value, m.x[0].exp(), k, shape, m.evaluations));
            }
        }
    }
    let (value, theta, k, shape, evals) = best.ok_or_else(|| Error::Numerical("empty profile grid".into()))?;
    let mut fit = FitResult::new(Method::Cl2);
    fit.estimates.insert("q".into(), q_fixed);
    fit.estimates.insert(name.into(), theta);
    match family.build(q_fixed, theta, k, shape, dim)? {
        SelectionModel::Chi2 { kappa, .. } => {
            fit.estimates.insert("k".into(), k as f64);
            fit.estimates.insert("kappa".into(), kappa);
            if let Some(nu) = shape {
                fit.estimates.insert("nu".into(), nu);
            }
        }
        SelectionModel::Boolean { germ_intensity, .. } => {
            fit.estimates.insert("germ_intensity".into(), germ_intensity);
        }
    }
    fit.objective = -value;
    fit.converged = theta > lo * 1.0001 && theta < hi * 0.9999;
    if !fit.converged {
        fit.diagnostics.push(format!("{name} estimate lies on the search boundary"));
    }
    fit.iterations = evals;
    fit.settings.insert("pair_range".into(), range);
    fit.settings.insert("lower".into(), lo);
    fit.settings.insert("upper".into(), hi);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseProcessModel;
    use crate::covariance::{CorrelationModel, DppKernel};
    use crate::geometry::{PointPattern, Window};
    use crate::optim::golden_section;
    use crate::rng::rng_from_seed;
    use crate::selection::RadiusLaw;
    use crate::thinning::{simulate_triple, InterruptedModel};
    use proptest::prelude::*;

    fn pair_of(nx: usize, nbar: usize) -> ThinnedPair {
        let w = Window::unit(2).unwrap();
        let mut rng = rng_from_seed(1);
        let mut pts = |n: usize| -> PointPattern {
            PointPattern::new(w.clone(), (0..n).map(|_| w.uniform_point(&mut rng)).collect()).unwrap()
        };
        ThinnedPair::new(pts(nx), pts(nbar)).unwrap()
    }

    #[test]
    fn cl1_examples() {
        let f = fit_q_cl1(&pair_of(256, 654)).unwrap();
        assert!((f.get("q").unwrap() - 256.0 / 910.0).abs() < 1e-15);
        assert!((f.get("q").unwrap() - 0.281).abs() < 1e-3);
        assert_eq!(fit_q_cl1(&pair_of(40, 0)).unwrap().get("q"), Some(1.0));
        assert!(fit_q_cl1(&pair_of(0, 0)).is_err());
        // Golden-section search on the CL1 log-likelihood lands on n_x/n_y.
        let (nx, nb) = (37.0, 81.0);
        let m = golden_section(|q| -(nx * f64::ln(q) + nb * f64::ln(1.0 - q)), 1e-6, 1.0 - 1e-6, 1e-12);
        // Flat minimum: location resolvable to about sqrt(eps).
        assert!((m.x[0] - nx / (nx + nb)).abs() < 1e-7);
    }

    #[test]
    fn cl1_invariances() {
        let t = pair_of(30, 50);
        let shifted = |p: &PointPattern| {
            let w = p.window().translate(&[3.0, -1.0]);
            let pts: Vec<Point> = p.points().iter().rev().map(|x| [x[0] + 3.0, x[1] - 1.0, 0.0]).collect();
            PointPattern::new(w, pts).unwrap()
        };
        let u = ThinnedPair::new(shifted(t.retained()), shifted(t.deleted())).unwrap();
        assert_eq!(fit_q_cl1(&t).unwrap().get("q"), fit_q_cl1(&u).unwrap().get("q"));
    }

    proptest! {
        #[test]
        fn pair_probabilities_sum_to_one(q in 0.001f64..0.999, frac in 0.0f64..=1.0) {
            let m0 = 1.0 + frac * (1.0 / q - 1.0);
            let p = cl2_pair_probabilities(q, m0);
            prop_assert!((p[0] + p[1] + 2.0 * p[2] - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn cl2_recovers_parameters() {
        let w = Window::unit(2).unwrap();
        let base = BaseProcessModel::poisson(1000.0).unwrap();
        let chi = SelectionModel::chi2_with_q(1, 0.5, CorrelationModel::gaussian(0.05).unwrap()).unwrap();
        let boo = SelectionModel::boolean_with_q(0.5, RadiusLaw::Deterministic { radius: 0.05 }, 2, false).unwrap();
        for (sel, name) in [(chi, "s"), (boo, "delta0")] {
            let m = InterruptedModel::new(base, sel, 2).unwrap();
            let fam = SelectionFamily::of(&sel).unwrap();
            let mut est = Vec::new();
            for seed in 0..8 {
                let t = simulate_triple(&m, &w, seed).unwrap();
                let q = fit_q_cl1(&t.split).unwrap().get("q").unwrap();
                est.push(fit_theta_cl2(&t.split, &fam, q, &ClSettings::default()).unwrap().get(name).unwrap());
            }
            let mean = est.iter().sum::<f64>() / est.len() as f64;
            assert!((mean - 0.05).abs() < 0.01, "{name}: {est:?}");
        }
    }

    #[test]
    fn cl2_profiles_k() {
        let w = Window::unit(2).unwrap();
        let base = BaseProcessModel::dpp(DppKernel::new(500.0, CorrelationModel::gaussian(0.02).unwrap()).unwrap()).unwrap();
        let sel = SelectionModel::chi2_with_q(1, 0.5, CorrelationModel::gaussian(0.05).unwrap()).unwrap();
        let t = simulate_triple(&InterruptedModel::new(base, sel, 2).unwrap(), &w, 3).unwrap();
        let fam = SelectionFamily::Chi2 { k: None, correlation: super::super::CorrFamily::Gaussian };
        let f = fit_theta_cl2(&t.split, &fam, 0.5, &ClSettings::default()).unwrap();
        assert!(K_GRID.contains(&(f.get("k").unwrap() as u32)));
        let fixed = SelectionFamily::Chi2 { k: Some(1), correlation: super::super::CorrFamily::Gaussian };
        let f1 = fit_theta_cl2(&t.split, &fixed, 0.5, &ClSettings::default()).unwrap();
        assert!(f.objective >= f1.objective - 1e-9);
    }

    #[test]
    fn cl2_range_restricts_pairs() {
        let t = pair_of(60, 60);
        let sel = SelectionModel::chi2_with_q(1, 0.5, CorrelationModel::gaussian(0.05).unwrap()).unwrap();
        let near = cl2_log_likelihood(&t, &sel, 0.5, PairRange::Fixed(0.1)).unwrap();
        let all = cl2_log_likelihood(&t, &sel, 0.5, PairRange::Unlimited).unwrap();
        assert!(all < near);
        assert!(cl2_log_likelihood(&t, &sel, 0.5, PairRange::Fixed(-1.0)).is_err());
    }
}
