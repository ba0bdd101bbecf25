//! Random selection fields Π: the χ²-transformed Gaussian field
//! Π = exp(−½ΣZᵢ²) and the indicator of a Boolean model (or of its
//! complement), with closed-form mean q and normalized second moment M₀.

use std::sync::OnceLock;

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::base::poisson_count;
use crate::covariance::CorrelationModel;
use crate::error::{invalid, Error, Result};
use crate::field::{grid_standardized, ConditionalFieldSampler, FieldLaw, GridField, GridLayout, GridOptions, PointFieldSampler};
use crate::geometry::{check_dim, overlap_unchecked, unit_ball_volume, NeighborGrid, Point, Window};
use crate::rng::{rng_from_seed, Rng};
use crate::special::{gauss_legendre, ln_beta};

/// Law of the Boolean model radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum RadiusLaw {
    Deterministic { radius: f64 },
    /// Beta(α, β) on (0, 1).
    Beta { alpha: f64, beta: f64 },
}

fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(64))
}

impl RadiusLaw {
    pub fn validated(self) -> Result<Self> {
        match self {
            RadiusLaw::Deterministic { radius } if radius > 0.0 && radius.is_finite() => Ok(self),
            RadiusLaw::Beta { alpha, beta } if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() => {
                Ok(self)
            }
            _ => invalid(format!("invalid radius law {self:?}")),
        }
    }

    /// Essential supremum of the radius.
    pub fn max_radius(&self) -> f64 {
        match *self {
            RadiusLaw::Deterministic { radius } => radius,
            RadiusLaw::Beta { .. } => 1.0,
        }
    }

    /// E[Δ₀^d].
    pub fn moment(&self, dim: usize) -> f64 {
        match *self {
            RadiusLaw::Deterministic { radius } => radius.powi(dim as i32),
            RadiusLaw::Beta { alpha, beta } => (ln_beta(alpha + dim as f64, beta) - ln_beta(alpha, beta)).exp(),
        }
    }

    /// E[k_d(r, Δ₀)], by 64-node Gauss–Legendre against the Beta density.
    pub fn expected_overlap(&self, r: f64, dim: usize) -> f64 {
        match *self {
            RadiusLaw::Deterministic { radius } => overlap_unchecked(r, radius, dim),
            RadiusLaw::Beta { alpha, beta } => {
                let lo = 0.5 * r;
                if lo >= 1.0 {
                    return 0.0;
                }
                let (x, w) = gl64();
                let half = 0.5 * (1.0 - lo);
                let mid = 0.5 * (1.0 + lo);
                let lnb = ln_beta(alpha, beta);
                x.iter()
                    .zip(w)
                    .map(|(&t, &wt)| {
                        let d = mid + half * t;
                        let dens = ((alpha - 1.0) * d.ln() + (beta - 1.0) * (1.0 - d).ln() - lnb).exp();
                        wt * half * dens * overlap_unchecked(r, d, dim)
                    })
                    .sum()
            }
        }
    }

    fn sample(&self, rng: &mut Rng) -> Result<f64> {
        match *self {
            RadiusLaw::Deterministic { radius } => Ok(radius),
            RadiusLaw::Beta { alpha, beta } => {
                let b = Beta::new(alpha, beta).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Ok(b.sample(rng))
            }
        }
    }
}

/// The selection field Π.
///
/// In JSON a χ² model may be given by `q` instead of `kappa`; κ is then
/// obtained by inverting q = (1+κ)^{−k/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SelectionRepr", into = "SelectionRepr")]
pub enum SelectionModel {
    Chi2 { k: u32, kappa: f64, correlation: CorrelationModel },
    Boolean { germ_intensity: f64, radius: RadiusLaw, complement: bool },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum SelectionRepr {
    Chi2 {
        #[serde(default = "one")]
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
        correlation: CorrelationModel,
    },
    Boolean {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        germ_intensity: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
        /// Dimension used to derive the germ intensity from q.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        radius: RadiusLaw,
        #[serde(default)]
        complement: bool,
    },
}

fn one() -> u32 {
    1
}

impl TryFrom<SelectionRepr> for SelectionModel {
    type Error = Error;

    fn try_from(r: SelectionRepr) -> Result<Self> {
        match r {
            SelectionRepr::Chi2 { k, q, kappa, correlation } => {
                let kappa = match (kappa, q) {
                    (Some(kappa), _) => kappa,
                    (None, Some(q)) => kappa_from_q(q, k)?,
                    (None, None) => return invalid("chi2 selection needs `q` or `kappa`"),
                };
                SelectionModel::chi2(k, kappa, correlation)
            }
            SelectionRepr::Boolean { germ_intensity, q, dim, radius, complement } => {
                let rho = match (germ_intensity, q) {
                    (Some(rho), _) => rho,
                    (None, Some(q)) => germ_intensity_for_q(q, &radius, dim.unwrap_or(2), complement)?,
                    (None, None) => return invalid("boolean selection needs `germ_intensity` or `q`"),
                };
                SelectionModel::boolean(rho, radius, complement)
            }
        }
    }
}

impl From<SelectionModel> for SelectionRepr {
    fn from(m: SelectionModel) -> Self {
        match m {
            SelectionModel::Chi2 { k, kappa, correlation } => SelectionRepr::Chi2 {
                k,
                q: Some(q_from_kappa(kappa, k)),
                kappa: Some(kappa),
                correlation,
            },
            SelectionModel::Boolean { germ_intensity, radius, complement } => SelectionRepr::Boolean {
                germ_intensity: Some(germ_intensity),
                q: None,
                dim: None,
                radius,
                complement,
            },
        }
    }
}

/// κ such that (1+κ)^{−k/2} = q.
pub fn kappa_from_q(q: f64, k: u32) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) || k == 0 {
        return invalid(format!("need 0 < q < 1 and k >= 1, got q = {q}, k = {k}"));
    }
    Ok((-(2.0 / k as f64) * q.ln()).exp_m1())
}

pub fn q_from_kappa(kappa: f64, k: u32) -> f64 {
    (-(k as f64) / 2.0 * kappa.ln_1p()).exp()
}

/// Germ intensity giving mean selection `q` for the given radius law.
pub fn germ_intensity_for_q(q: f64, radius: &RadiusLaw, dim: usize, complement: bool) -> Result<f64> {
    check_dim(dim)?;
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("need 0 < q < 1, got {q}"));
    }
    let p = if complement { 1.0 - q } else { q };
    Ok(-(-p).ln_1p() / (unit_ball_volume(dim)? * radius.validated()?.moment(dim)))
}

impl SelectionModel {
    pub fn chi2(k: u32, kappa: f64, correlation: CorrelationModel) -> Result<Self> {
        if k == 0 {
            return invalid("chi2 selection needs k >= 1");
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return invalid(format!("chi2 selection needs kappa > 0, got {kappa}"));
        }
        Ok(SelectionModel::Chi2 { k, kappa, correlation: correlation.validated()? })
    }

    /// χ² model parameterized by its mean selection probability.
    pub fn chi2_with_q(k: u32, q: f64, correlation: CorrelationModel) -> Result<Self> {
        SelectionModel::chi2(k, kappa_from_q(q, k)?, correlation)
    }

    pub fn boolean(germ_intensity: f64, radius: RadiusLaw, complement: bool) -> Result<Self> {
        if !(germ_intensity > 0.0 && germ_intensity.is_finite()) {
            return invalid(format!("germ intensity must be positive, got {germ_intensity}"));
        }
        Ok(SelectionModel::Boolean { germ_intensity, radius: radius.validated()?, complement })
    }

    /// Boolean model parameterized by its mean selection probability.
    pub fn boolean_with_q(q: f64, radius: RadiusLaw, dim: usize, complement: bool) -> Result<Self> {
        SelectionModel::boolean(germ_intensity_for_q(q, &radius, dim, complement)?, radius, complement)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectionModel::Chi2 { .. } => "chi2",
            SelectionModel::Boolean { complement: false, .. } => "boolean",
            SelectionModel::Boolean { complement: true, .. } => "boolean_complement",
        }
    }

    /// Boolean coverage fraction p = 1 − exp(−ρ_Ψ ω_d E[Δ₀^d]).
    fn coverage(rho: f64, radius: &RadiusLaw, dim: usize) -> Result<f64> {
        Ok(-(-rho * unit_ball_volume(dim)? * radius.moment(dim)).exp_m1())
    }

    /// q = E[Π(o)].
    pub fn q(&self, dim: usize) -> Result<f64> {
        check_dim(dim)?;
        match *self {
            SelectionModel::Chi2 { k, kappa, .. } => Ok(q_from_kappa(kappa, k)),
            SelectionModel::Boolean { germ_intensity, radius, complement } => {
                let p = Self::coverage(germ_intensity, &radius, dim)?;
                Ok(if complement { 1.0 - p } else { p })
            }
        }
    }

    /// M₀(r) = E[Π(o)Π(x)]/q² at ‖x‖ = r.
    pub fn m0(&self, r: f64, dim: usize) -> Result<f64> {
        check_dim(dim)?;
        match *self {
            SelectionModel::Chi2 { k, kappa, correlation } => {
                let q = q_from_kappa(kappa, k);
                let a = 1.0 - q.powf(2.0 / k as f64);
                let c = correlation.eval(r);
                Ok((1.0 - a * a * c * c).powf(-(k as f64) / 2.0))
            }
            SelectionModel::Boolean { germ_intensity, radius, complement } => {
                let e = (germ_intensity * radius.expected_overlap(r, dim).max(0.0)).exp_m1();
                if complement {
                    Ok(1.0 + e)
                } else {
                    // 2/p − 1/p² + u²(1 + e) rearranged to avoid cancellation.
                    let p = Self::coverage(germ_intensity, &radius, dim)?;
                    let u = (1.0 - p) / p;
                    Ok(1.0 + u * u * e)
                }
            }
        }
    }

    /// Distance beyond which M₀ equals 1 to within round-off (Boolean with
    /// bounded radii), if any.
    pub fn correlation_range(&self) -> Option<f64> {
        match self {
            SelectionModel::Boolean { radius, .. } => Some(2.0 * radius.max_radius()),
            SelectionModel::Chi2 { .. } => None,
        }
    }
}

/// Exact sampler of Π at a fixed set of locations in a window.
#[derive(Debug, Clone)]
pub struct PiSampler {
    model: SelectionModel,
    window: Window,
    locations: Vec<Point>,
    field: Option<PointFieldSampler>,
}

impl PiSampler {
    pub fn new(model: SelectionModel, window: &Window, locations: &[Point]) -> Result<Self> {
        let field = match model {
            SelectionModel::Chi2 { correlation, .. } if !locations.is_empty() => {
                Some(PointFieldSampler::new(FieldLaw::new(1.0, correlation)?, locations)?)
            }
            _ => None,
        };
        Ok(PiSampler { model, window: window.clone(), locations: locations.to_vec(), field })
    }

    /// One draw of (Π(x₁), …, Π(xₙ)).
    pub fn draw(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        let n = self.locations.len();
        match self.model {
            SelectionModel::Chi2 { k, kappa, .. } => {
                let Some(field) = &self.field else { return Ok(Vec::new()) };
                let mut acc = vec![0.0; n];
                for _ in 0..k {
                    for (a, z) in acc.iter_mut().zip(field.draw_standardized(rng)) {
                        *a += z * z;
                    }
                }
                Ok(acc.into_iter().map(|s| (-0.5 * kappa * s).exp()).collect())
            }
            SelectionModel::Boolean { germ_intensity, radius, complement } => {
                let covered = boolean_coverage(germ_intensity, &radius, &self.window, &self.locations, rng)?;
                Ok(covered
                    .into_iter()
                    .map(|c| if c != complement { 1.0 } else { 0.0 })
                    .collect())
            }
        }
    }

    /// Standardized latent draws Z/√κ of shape k × n (χ² models only); the
    /// field is Π = exp(−½κΣZ²), so scaling κ with fixed latents gives the
    /// monotone coupling in κ.
    pub fn draw_latent(&self, rng: &mut Rng) -> Option<Vec<Vec<f64>>> {
        match self.model {
            SelectionModel::Chi2 { k, .. } => {
                let field = self.field.as_ref()?;
                Some((0..k).map(|_| field.draw_standardized(rng)).collect())
            }
            _ => None,
        }
    }
}

/// Coverage indicators of the locations by a Boolean model whose germs are
/// Poisson on the window dilated by the largest possible radius.
fn boolean_coverage(rho: f64, radius: &RadiusLaw, w: &Window, locations: &[Point], rng: &mut Rng) -> Result<Vec<bool>> {
    let reach = radius.max_radius();
    let big = w.dilate(reach);
    let n = poisson_count(rho * big.volume(), rng)?;
    let mut germs = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    for _ in 0..n {
        germs.push(big.uniform_point(rng));
        radii.push(radius.sample(rng)?);
    }
    if germs.is_empty() {
        return Ok(vec![false; locations.len()]);
    }
    let grid = NeighborGrid::new(&big, &germs, reach);
    Ok(locations
        .iter()
        .map(|x| {
            let mut hit = false;
            grid.for_each_near(&germs, x, reach, |j, d2| {
                if d2 <= radii[j] * radii[j] {
                    hit = true;
                }
            });
            hit
        })
        .collect())
}

/// One exact draw of Π at the locations.
pub fn sample_pi_at_points(model: &SelectionModel, window: &Window, locations: &[Point], seed: u64) -> Result<Vec<f64>> {
    PiSampler::new(*model, window, locations)?.draw(&mut rng_from_seed(seed))
}

/// Π on a raster.
pub fn sample_pi_grid(model: &SelectionModel, layout: &GridLayout, seed: u64) -> Result<GridField> {
    sample_pi_grid_with(model, layout, seed, &GridOptions::default())
}

pub fn sample_pi_grid_with(model: &SelectionModel, layout: &GridLayout, seed: u64, opts: &GridOptions) -> Result<GridField> {
    let mut rng = rng_from_seed(seed);
    let n = layout.len();
    let values = match *model {
        SelectionModel::Chi2 { k, kappa, correlation } => {
            let mut acc = vec![0.0; n];
            for _ in 0..k {
                let z = grid_standardized(&correlation, layout, &mut rng, opts)?;
                for (a, v) in acc.iter_mut().zip(z) {
                    *a += v * v;
                }
            }
            acc.into_iter().map(|s| (-0.5 * kappa * s).exp()).collect()
        }
        SelectionModel::Boolean { germ_intensity, radius, complement } => {
            if n > opts.max_nodes {
                return Err(Error::MemoryCap(format!("raster of {n} nodes exceeds the cap of {}", opts.max_nodes)));
            }
            let nodes = layout.nodes();
            boolean_coverage(germ_intensity, &radius, &layout.window, &nodes, &mut rng)?
                .into_iter()
                .map(|c| if c != complement { 1.0 } else { 0.0 })
                .collect()
        }
    };
    GridField::new(layout.clone(), values)
}

/// Π on a raster for the same realization that `PiSampler::draw` with
/// `rng_from_seed(seed)` gives at `points`. Boolean: the same germs are
/// evaluated at the nodes. χ²: each latent field is simulated on the raster
/// conditionally on its values at the points.
pub fn pi_raster_given_points(
    model: &SelectionModel,
    window: &Window,
    points: &[Point],
    layout: &GridLayout,
    seed: u64,
) -> Result<GridField> {
    let mut rng = rng_from_seed(seed);
    match *model {
        SelectionModel::Chi2 { kappa, correlation, .. } => {
            if points.is_empty() {
                return sample_pi_grid(model, layout, seed);
            }
            let latent = PiSampler::new(*model, window, points)?
                .draw_latent(&mut rng)
                .ok_or_else(|| Error::Numerical("missing latent field".into()))?;
            let cond = ConditionalFieldSampler::new(FieldLaw::new(1.0, correlation)?, points, layout.clone())?;
            let mut acc = vec![0.0; layout.len()];
            for z in &latent {
                for (a, v) in acc.iter_mut().zip(cond.draw(z, &mut rng)?.values) {
                    *a += v * v;
                }
            }
            GridField::new(layout.clone(), acc.into_iter().map(|s| (-0.5 * kappa * s).exp()).collect())
        }
        SelectionModel::Boolean { germ_intensity, radius, complement } => {
            let nodes = layout.nodes();
            let all: Vec<Point> = points.iter().chain(&nodes).copied().collect();
            let covered = boolean_coverage(germ_intensity, &radius, window, &all, &mut rng)?;
            let values = covered[points.len()..].iter().map(|&c| if c != complement { 1.0 } else { 0.0 }).collect();
            GridField::new(layout.clone(), values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(s: f64) -> CorrelationModel {
        CorrelationModel::gaussian(s).unwrap()
    }

    #[test]
    fn q_examples() {
        let m = SelectionModel::chi2(1, 3.0, gauss(0.05)).unwrap();
        assert!((m.q(2).unwrap() - 0.5).abs() < 1e-15);
        let tiny = SelectionModel::chi2(1, 1e-12, gauss(0.05)).unwrap();
        assert!((tiny.q(2).unwrap() - 1.0).abs() < 1e-9);
        let rho = germ_intensity_for_q(0.5, &RadiusLaw::Deterministic { radius: 0.05 }, 2, false).unwrap();
        assert!((rho - 2f64.ln() / (PI * 0.0025)).abs() < 1e-9);
        assert!((rho - 88.25).abs() < 0.01, "{rho}");
        for k in [1, 2, 5] {
            let m = SelectionModel::chi2_with_q(k, 0.3, gauss(0.1)).unwrap();
            assert!((m.q(2).unwrap() - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn m0_examples() {
        let m = SelectionModel::chi2_with_q(1, 0.5, gauss(0.05)).unwrap();
        let want = (1.0f64 - 0.75f64.powi(2)).powf(-0.5);
        assert!((m.m0(0.0, 2).unwrap() - want).abs() < 1e-14);
        assert!((want - 1.5119).abs() < 1e-4);
        let b = SelectionModel::boolean_with_q(0.5, RadiusLaw::Deterministic { radius: 0.05 }, 2, false).unwrap();
        assert_eq!(b.m0(0.1, 2).unwrap(), 1.0);
        assert_eq!(b.m0(0.3, 2).unwrap(), 1.0);
        let c = SelectionModel::boolean_with_q(0.3, RadiusLaw::Deterministic { radius: 0.05 }, 2, true).unwrap();
        assert!((c.m0(0.0, 2).unwrap() - 1.0 / 0.3).abs() < 1e-12);
        assert!((b.m0(0.0, 2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn m0_tends_to_one() {
        for corr in [gauss(0.05), CorrelationModel::exponential(0.05).unwrap()] {
            let m = SelectionModel::chi2_with_q(1, 0.5, corr).unwrap();
            let range = 10.0 * corr.effective_range();
            assert!((m.m0(range, 2).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn m0_bounded_by_inverse_q() {
        let models = [
            SelectionModel::chi2_with_q(1, 0.5, gauss(0.05)).unwrap(),
            SelectionModel::chi2_with_q(3, 0.2, CorrelationModel::whittle_matern(0.05, 1.5).unwrap()).unwrap(),
            SelectionModel::boolean_with_q(0.5, RadiusLaw::Deterministic { radius: 0.05 }, 2, false).unwrap(),
            SelectionModel::boolean_with_q(0.4, RadiusLaw::Beta { alpha: 2.0, beta: 5.0 }, 2, true).unwrap(),
            SelectionModel::boolean_with_q(0.4, RadiusLaw::Beta { alpha: 2.0, beta: 5.0 }, 2, false).unwrap(),
        ];
        for m in models {
            let q = m.q(2).unwrap();
            for i in 0..1000 {
                let r = 0.3 * i as f64 / 999.0;
                let v = m.m0(r, 2).unwrap();
                assert!(v <= 1.0 / q + 1e-12 && v >= 1.0 - 1e-12, "{} at {r}: {v}", m.name());
            }
        }
    }

    #[test]
    fn chi2_m0_decreasing_in_k() {
        let r_grid: Vec<f64> = (0..50).map(|i| 0.004 * i as f64).collect();
        let ks = [1u32, 2, 3, 5, 10];
        for &r in &r_grid {
            let vals: Vec<f64> = ks
                .iter()
                .map(|&k| SelectionModel::chi2_with_q(k, 0.5, gauss(0.05)).unwrap().m0(r, 2).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{vals:?}");
        }
    }

    #[test]
    fn chi2_large_scale_limit() {
        let r = 0.01;
        for k in [1u32, 2, 4] {
            let m = SelectionModel::chi2_with_q(k, 0.5, gauss(1e4 * r)).unwrap();
            let lim = (1.0 - (1.0 - 0.5f64.powf(2.0 / k as f64)).powi(2)).powf(-(k as f64) / 2.0);
            assert!((m.m0(r, 2).unwrap() - lim).abs() < 1e-6);
        }
    }

    #[test]
    fn beta_overlap_quadrature_matches_simpson() {
        let (a, b) = (2.0, 5.0);
        let law = RadiusLaw::Beta { alpha: a, beta: b };
        let lnb = ln_beta(a, b);
        for r in [0.0, 0.1, 0.3, 0.7, 1.5] {
            let f = |d: f64| {
                if d <= 0.0 || d >= 1.0 {
                    return 0.0;
                }
                ((a - 1.0) * d.ln() + (b - 1.0) * (1.0 - d).ln() - lnb).exp() * overlap_unchecked(r, d, 2)
            };
            let want = crate::special::adaptive_simpson(f, 0.5 * r.min(2.0), 1.0, 1e-13).unwrap();
            let got = law.expected_overlap(r, 2);
            assert!((got - want).abs() <= 1e-6 * want.max(1e-12), "{r}: {got} vs {want}");
        }
        // At r = 0 the overlap is the ball volume, so this recovers E[Δ²].
        let at0 = law.expected_overlap(0.0, 2) / PI;
        assert!((at0 - law.moment(2)).abs() < 1e-10);
    }

    #[test]
    fn pi_mean_and_pair_moment_by_monte_carlo() {
        let w = Window::unit(2).unwrap();
        let m = SelectionModel::chi2_with_q(1, 0.5, gauss(0.05)).unwrap();
        let locs = [[0.5, 0.5, 0.0], [0.55, 0.5, 0.0]];
        let s = PiSampler::new(m, &w, &locs).unwrap();
        let mut rng = rng_from_seed(11);
        let n = 200_000;
        let (mut s1, mut s2, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = s.draw(&mut rng).unwrap();
            s1 += v[0];
            s2 += v[0] * v[0];
            let prod = v[0] * v[1];
            p1 += prod;
            p2 += prod * prod;
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let se = ((s2 / nf - mean * mean) / nf).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se);
        let pm = p1 / nf;
        let pse = ((p2 / nf - pm * pm) / nf).sqrt();
        let want = 0.25 * m.m0(0.05, 2).unwrap();
        assert!((pm - want).abs() < 3.0 * pse, "{pm} vs {want}");
    }

    #[test]
    fn boolean_cover_fraction_by_monte_carlo() {
        let law = RadiusLaw::Deterministic { radius: 0.05 };
        let m = SelectionModel::boolean_with_q(0.5, law, 2, false).unwrap();
        let w = Window::new(&[0.0, 0.0], &[0.01, 0.01]).unwrap();
        let s = PiSampler::new(m, &w, &[[0.005, 0.005, 0.0]]).unwrap();
        let mut rng = rng_from_seed(4);
        let n = 100_000;
        let hits: f64 = (0..n).map(|_| s.draw(&mut rng).unwrap()[0]).sum();
        let mean = hits / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn complement_flips_pointwise() {
        let law = RadiusLaw::Beta { alpha: 2.0, beta: 20.0 };
        let w = Window::unit(2).unwrap();
        let locs: Vec<Point> = (0..50).map(|i| [0.02 * i as f64, 0.3, 0.0]).collect();
        let a = sample_pi_at_points(&SelectionModel::boolean(5.0, law, false).unwrap(), &w, &locs, 8).unwrap();
        let b = sample_pi_at_points(&SelectionModel::boolean(5.0, law, true).unwrap(), &w, &locs, 8).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, 1.0 - y);
        }
    }

    #[test]
    fn rasters() {
        let layout = GridLayout::square(Window::unit(2).unwrap(), 40).unwrap();
        let m = SelectionModel::chi2_with_q(2, 0.5, gauss(0.05)).unwrap();
        let g = sample_pi_grid(&m, &layout, 1).unwrap();
        assert!(g.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let b = SelectionModel::boolean_with_q(0.5, RadiusLaw::Deterministic { radius: 0.05 }, 2, false).unwrap();
        let g = sample_pi_grid(&b, &layout, 1).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn raster_mean_matches_q() {
        let layout = GridLayout::square(Window::unit(2).unwrap(), 256).unwrap();
        let m = SelectionModel::chi2_with_q(1, 0.5, gauss(0.05)).unwrap();
        let b = SelectionModel::boolean_with_q(0.5, RadiusLaw::Deterministic { radius: 0.05 }, 2, false).unwrap();
        for model in [m, b] {
            let mean: f64 = (0..20).map(|s| sample_pi_grid(&model, &layout, s).unwrap().mean()).sum::<f64>() / 20.0;
            assert!((mean - 0.5).abs() / 0.5 < 0.02, "{} {mean}", model.name());
        }
    }

    #[test]
    fn serde_accepts_q() {
        let m: SelectionModel = serde_json::from_str(
            r#"{"type":"chi2","k":1,"q":0.5,"correlation":{"family":"gaussian","scale":0.05}}"#,
        )
        .unwrap();
        assert!((m.q(2).unwrap() - 0.5).abs() < 1e-14);
        let b: SelectionModel = serde_json::from_str(
            r#"{"type":"boolean","q":0.5,"radius":{"law":"deterministic","radius":0.05}}"#,
        )
        .unwrap();
        assert!((b.q(2).unwrap() - 0.5).abs() < 1e-12);
        let back: SelectionModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        assert!(serde_json::from_str::<SelectionModel>(r#"{"type":"chi2","correlation":{"family":"gaussian","scale":0.05}}"#).is_err());
    }

    #[test]
    fn raster_agrees_with_point_draw() {
        let w = Window::unit(2).unwrap();
        let layout = GridLayout::square(w.clone(), 9).unwrap();
        let nodes = layout.nodes();
        let pts: Vec<Point> = [3, 20, 41, 77].iter().map(|&i| nodes[i]).collect();
        let models = [
            SelectionModel::chi2(2, 1.5, gauss(0.2)).unwrap(),
            SelectionModel::boolean_with_q(0.5, RadiusLaw::Deterministic { radius: 0.15 }, 2, true).unwrap(),
        ];
        for m in models {
            for seed in 0..5 {
                let at = sample_pi_at_points(&m, &w, &pts, seed).unwrap();
                let r = pi_raster_given_points(&m, &w, &pts, &layout, seed).unwrap();
                for (v, &i) in at.iter().zip(&[3, 20, 41, 77]) {
                    assert!((r.values[i] - v).abs() < 1e-8, "{} {} vs {}", m.name(), r.values[i], v);
                }
            }
        }
    }
}
