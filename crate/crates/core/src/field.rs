//! Zero-mean stationary Gaussian fields: exact draws at point sets, raster
//! draws (dense factorization or circulant embedding) and conditioning on
//! observed values by residual kriging.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::covariance::CorrelationModel;
use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, dist2, Point, Window};
use crate::linalg::{dot, Cholesky, SymMatrix};
use crate::rng::{rng_from_seed, Rng};

/// Covariance K₀ = κ·R₀ of a zero-mean Gaussian field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldLaw {
    pub variance: f64,
    pub correlation: CorrelationModel,
}

impl FieldLaw {
    pub fn new(variance: f64, correlation: CorrelationModel) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return invalid(format!("field variance must be positive, got {variance}"));
        }
        Ok(FieldLaw { variance, correlation: correlation.validated()? })
    }

    pub fn covariance(&self, r: f64) -> f64 {
        self.variance * self.correlation.eval(r)
    }
}

/// Size limits for raster simulation.
#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// Rasters up to this many nodes use dense factorization.
    pub dense_max_nodes: usize,
    /// Hard cap on the number of nodes of any raster.
    pub max_nodes: usize,
    /// Cap on the size of a dense covariance matrix (fallbacks, conditioning).
    pub dense_cap: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { dense_max_nodes: 64 * 64, max_nodes: 1 << 22, dense_cap: 6000 }
    }
}

/// Node layout of a raster over a window: `resolution[i] >= 2` nodes per
/// axis, including both boundary faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub window: Window,
    pub resolution: Vec<usize>,
}

impl GridLayout {
    pub fn new(window: Window, resolution: Vec<usize>) -> Result<Self> {
        if resolution.len() != window.dim() {
            return invalid(format!(
                "raster resolution has {} axes, window has {}",
                resolution.len(),
                window.dim()
            ));
        }
        if resolution.iter().any(|&n| n < 2) {
            return invalid("raster resolution must be at least 2 per axis");
        }
        Ok(GridLayout { window, resolution })
    }

    /// Same number of nodes on every axis.
    pub fn square(window: Window, n: usize) -> Result<Self> {
        let d = window.dim();
        GridLayout::new(window, vec![n; d])
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.window.side(axis) / (self.resolution[axis] - 1) as f64
    }

    /// Node `index` with x varying fastest, then y, then z.
    pub fn node(&self, index: usize) -> Point {
        let mut p = [0.0; 3];
        let mut rest = index;
        for (axis, &n) in self.resolution.iter().enumerate() {
            let i = rest % n;
            rest /= n;
            p[axis] = self.window.lower()[axis] + i as f64 * self.spacing(axis);
        }
        p
    }

    pub fn nodes(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Index of a node that coincides with `p` (up to 1e-9 of a spacing).
    pub fn node_at(&self, p: &Point) -> Option<usize> {
        let mut index = 0;
        let mut stride = 1;
        for (axis, &n) in self.resolution.iter().enumerate() {
            let h = self.spacing(axis);
            let t = (p[axis] - self.window.lower()[axis]) / h;
            let i = t.round();
            if (t - i).abs() > 1e-9 || i < 0.0 || i as usize >= n {
                return None;
            }
            index += i as usize * stride;
            stride *= n;
        }
        Some(index)
    }
}

/// Raster of real values on a [`GridLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub layout: GridLayout,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(layout: GridLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return invalid(format!("raster has {} values, layout needs {}", values.len(), layout.len()));
        }
        Ok(GridField { layout, values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField { layout: self.layout.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn check_distinct(locations: &[Point]) -> Result<()> {
    let mut sorted: Vec<&Point> = locations.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return invalid("field locations must be pairwise distinct");
    }
    Ok(())
}

fn correlation_matrix(corr: &CorrelationModel, locations: &[Point]) -> SymMatrix {
    SymMatrix::from_fn(locations.len(), |i, j| {
        if i == j {
            1.0
        } else {
            corr.eval(dist(&locations[i], &locations[j]))
        }
    })
}

/// Reusable exact sampler of a field at a fixed set of locations.
///
/// Draws are √κ·L·ξ with L the Cholesky factor of the correlation matrix and
/// ξ standard normal, so fields for different κ are coupled by scaling.
#[derive(Debug, Clone)]
pub struct PointFieldSampler {
    law: FieldLaw,
    chol: Cholesky,
}

impl PointFieldSampler {
    pub fn new(law: FieldLaw, locations: &[Point]) -> Result<Self> {
        check_distinct(locations)?;
        let r = correlation_matrix(&law.correlation, locations);
        debug_assert!(r.is_symmetric());
        let chol = Cholesky::factor_with_jitter(&r, 1.0)?;
        Ok(PointFieldSampler { law, chol })
    }

    pub fn len(&self) -> usize {
        self.chol.n()
    }

    pub fn is_empty(&self) -> bool {
        self.chol.n() == 0
    }

    /// Standard-normal-driven unit-variance draw (correlation only).
    pub fn draw_standardized(&self, rng: &mut Rng) -> Vec<f64> {
        let xi: Vec<f64> = (0..self.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.chol.mul_lower(&xi)
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        let s = self.law.variance.sqrt();
        self.draw_standardized(rng).into_iter().map(|v| s * v).collect()
    }
}

/// One exact draw of (Z(y₁), …, Z(yₙ)); output order follows input order.
pub fn sample_at_points(law: &FieldLaw, locations: &[Point], seed: u64) -> Result<Vec<f64>> {
    let sampler = PointFieldSampler::new(*law, locations)?;
    Ok(sampler.draw(&mut rng_from_seed(seed)))
}

/// Stationary draw on a raster.
pub fn sample_grid(law: &FieldLaw, layout: &GridLayout, seed: u64) -> Result<GridField> {
    sample_grid_with(law, layout, seed, &GridOptions::default())
}

pub fn sample_grid_with(law: &FieldLaw, layout: &GridLayout, seed: u64, opts: &GridOptions) -> Result<GridField> {
    let mut rng = rng_from_seed(seed);
    let z = grid_standardized(&law.correlation, layout, &mut rng, opts)?;
    let s = law.variance.sqrt();
    GridField::new(layout.clone(), z.into_iter().map(|v| s * v).collect())
}

/// Unit-variance raster draw; shared by the selection-field rasters.
pub(crate) fn grid_standardized(
    corr: &CorrelationModel,
    layout: &GridLayout,
    rng: &mut Rng,
    opts: &GridOptions,
) -> Result<Vec<f64>> {
    let n = layout.len();
    if n > opts.max_nodes {
        return Err(Error::MemoryCap(format!("raster of {n} nodes exceeds the cap of {}", opts.max_nodes)));
    }
    if n <= opts.dense_max_nodes {
        return dense_grid(corr, layout, rng, opts);
    }
    match CirculantEmbedding::new(corr, layout)? {
        Some(ce) => Ok(ce.draw(rng)),
        None => {
            log::warn!("circulant embedding is not nonnegative definite; falling back to dense factorization");
            dense_grid(corr, layout, rng, opts)
        }
    }
}

fn dense_grid(corr: &CorrelationModel, layout: &GridLayout, rng: &mut Rng, opts: &GridOptions) -> Result<Vec<f64>> {
    let n = layout.len();
    if n > opts.dense_cap {
        return Err(Error::MemoryCap(format!(
            "dense factorization of {n} nodes exceeds the cap of {}",
            opts.dense_cap
        )));
    }
    let nodes = layout.nodes();
    let chol = Cholesky::factor_with_jitter(&correlation_matrix(corr, &nodes), 1.0)?;
    let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(chol.mul_lower(&xi))
}

/// Circulant embedding on the torus of size 2(n_i − 1) per axis.
struct CirculantEmbedding {
    /// Embedding sizes per axis (1 for unused axes).
    sizes: [usize; 3],
    resolution: Vec<usize>,
    /// sqrt(λ / M) for each Fourier mode.
    amplitude: Vec<f64>,
}

impl CirculantEmbedding {
    fn new(corr: &CorrelationModel, layout: &GridLayout) -> Result<Option<Self>> {
        let dim = layout.resolution.len();
        let mut sizes = [1usize; 3];
        let mut h = [0.0; 3];
        for axis in 0..dim {
            sizes[axis] = 2 * (layout.resolution[axis] - 1);
            h[axis] = layout.spacing(axis);
        }
        let total: usize = sizes.iter().product();
        let mut base = vec![Complex64::new(0.0, 0.0); total];
        for (k, slot) in base.iter_mut().enumerate() {
            let mut rest = k;
            let mut r2 = 0.0;
            for axis in 0..3 {
                let m = sizes[axis];
                let j = rest % m;
                rest /= m;
                let jj = j.min(m - j) as f64 * h[axis];
                r2 += jj * jj;
            }
            *slot = Complex64::new(corr.eval(r2.sqrt()), 0.0);
        }
        fft_nd(&mut base, &sizes, false);
        let lam_max = base.iter().map(|c| c.re).fold(0.0, f64::max);
        // Eigenvalues below −1e-10·λ_max indicate a genuinely indefinite
        // embedding; smaller negatives are round-off of zero eigenvalues.
        if base.iter().any(|c| c.re < -1e-10 * lam_max) {
            return Ok(None);
        }
        let amplitude = base.iter().map(|c| (c.re.max(0.0) / total as f64).sqrt()).collect();
        Ok(Some(CirculantEmbedding { sizes, resolution: layout.resolution.clone(), amplitude }))
    }

    fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        let mut w: Vec<Complex64> = self
            .amplitude
            .iter()
            .map(|&a| Complex64::new(a * rng.sample::<f64, _>(StandardNormal), a * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        fft_nd(&mut w, &self.sizes, false);
        let n: usize = self.resolution.iter().product();
        let mut out = Vec::with_capacity(n);
        let res = |a: usize| self.resolution.get(a).copied().unwrap_or(1);
        for iz in 0..res(2) {
            for iy in 0..res(1) {
                for ix in 0..res(0) {
                    let k = (iz * self.sizes[1] + iy) * self.sizes[0] + ix;
                    out.push(w[k].re);
                }
            }
        }
        out
    }
}

/// In-place multidimensional DFT with axis 0 fastest.
fn fft_nd(data: &mut [Complex64], sizes: &[usize; 3], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = 1;
    for &m in sizes.iter() {
        if m > 1 {
            let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
            let mut line = vec![Complex64::new(0.0, 0.0); m];
            let outer = data.len() / (m * stride);
            for o in 0..outer {
                for s in 0..stride {
                    let start = o * m * stride + s;
                    for k in 0..m {
                        line[k] = data[start + k * stride];
                    }
                    fft.process(&mut line);
                    for k in 0..m {
                        data[start + k * stride] = line[k];
                    }
                }
            }
        }
        stride *= m;
    }
}

/// Draws of Z on a raster conditional on Z(obsᵢ) = zᵢ, by adding a simple
/// kriging correction of the residuals to an unconditional joint draw.
///
/// The factorizations depend only on the locations, so one instance serves
/// any number of conditioning vectors.
#[derive(Debug, Clone)]
pub struct ConditionalFieldSampler {
    law: FieldLaw,
    layout: GridLayout,
    /// Index into the joint location list of each observation.
    obs_index: Vec<usize>,
    joint: Cholesky,
    obs: Cholesky,
    /// κ·R₀ between every raster node and every observation (row per node),
    /// with the observation jitter added where a node coincides with one.
    cross: Vec<f64>,
}

impl ConditionalFieldSampler {
    pub fn new(law: FieldLaw, locations: &[Point], layout: GridLayout) -> Result<Self> {
        Self::with_options(law, locations, layout, &GridOptions::default())
    }

    pub fn with_options(law: FieldLaw, locations: &[Point], layout: GridLayout, opts: &GridOptions) -> Result<Self> {
        check_distinct(locations)?;
        let n_grid = layout.len();
        let mut joint_locs = layout.nodes();
        let mut obs_index = Vec::with_capacity(locations.len());
        for p in locations {
            match layout.node_at(p) {
                Some(i) => obs_index.push(i),
                None => {
                    obs_index.push(joint_locs.len());
                    joint_locs.push(*p);
                }
            }
        }
        if joint_locs.len() > opts.dense_cap {
            return Err(Error::MemoryCap(format!(
                "conditional simulation needs a dense matrix of size {} (cap {})",
                joint_locs.len(),
                opts.dense_cap
            )));
        }
        let corr = law.correlation;
        let kappa = law.variance;
        let gamma = SymMatrix::from_fn(locations.len(), |i, j| {
            if i == j {
                kappa
            } else {
                kappa * corr.eval(dist(&locations[i], &locations[j]))
            }
        });
        let obs = Cholesky::factor_with_jitter(&gamma, kappa).map_err(|e| match e {
            Error::NotFactorizable { size, .. } => {
                Error::Numerical(format!("observed covariance matrix of size {size} is singular"))
            }
            other => other,
        })?;
        let joint = Cholesky::factor_with_jitter(&correlation_matrix(&corr, &joint_locs), 1.0)?;
        let n_obs = locations.len();
        let mut cross = vec![0.0; n_grid * n_obs];
        for g in 0..n_grid {
            let node = &joint_locs[g];
            for (o, p) in locations.iter().enumerate() {
                let mut c = kappa * corr.eval(dist2(node, p).sqrt());
                if obs_index[o] == g {
                    c = kappa + obs.jitter();
                }
                cross[g * n_obs + o] = c;
            }
        }
        Ok(ConditionalFieldSampler { law, layout, obs_index, joint, obs, cross })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    /// Kriging predictor of the raster from observed values (the conditional mean).
    pub fn kriging_mean(&self, values: &[f64]) -> Result<GridField> {
        self.check_len(values)?;
        let alpha = self.obs.solve(values);
        let n_obs = values.len();
        let vals = (0..self.layout.len())
            .map(|g| dot(&self.cross[g * n_obs..(g + 1) * n_obs], &alpha))
            .collect();
        GridField::new(self.layout.clone(), vals)
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.obs_index.len() {
            return invalid(format!(
                "expected {} conditioning values, got {}",
                self.obs_index.len(),
                values.len()
            ));
        }
        Ok(())
    }

    /// One conditional draw given `values` at the observation locations.
    pub fn draw(&self, values: &[f64], rng: &mut Rng) -> Result<GridField> {
        self.check_len(values)?;
        let n_joint = self.joint.n();
        let xi: Vec<f64> = (0..n_joint).map(|_| rng.sample(StandardNormal)).collect();
        let s = self.law.variance.sqrt();
        let uncond: Vec<f64> = self.joint.mul_lower(&xi).into_iter().map(|v| s * v).collect();
        let resid: Vec<f64> = values.iter().zip(&self.obs_index).map(|(z, &i)| z - uncond[i]).collect();
        let alpha = self.obs.solve(&resid);
        let n_obs = values.len();
        let vals = (0..self.layout.len())
            .map(|g| uncond[g] + dot(&self.cross[g * n_obs..(g + 1) * n_obs], &alpha))
            .collect();
        GridField::new(self.layout.clone(), vals)
    }
}

/// A draw of Z on the raster conditional on Z(locations) = values.
pub fn condition_on_values(
    law: &FieldLaw,
    locations: &[Point],
    values: &[f64],
    layout: &GridLayout,
    seed: u64,
) -> Result<GridField> {
    if locations.len() != values.len() {
        return invalid("locations and values differ in length");
    }
    if locations.is_empty() {
        return sample_grid(law, layout, seed);
    }
    let sampler = ConditionalFieldSampler::new(*law, locations, layout.clone())?;
    sampler.draw(values, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(kappa: f64, s: f64) -> FieldLaw {
        FieldLaw::new(kappa, CorrelationModel::gaussian(s).unwrap()).unwrap()
    }

    #[test]
    fn single_point_variance() {
        let law = gauss(2.5, 0.1);
        let s = PointFieldSampler::new(law, &[[0.3, 0.3, 0.0]]).unwrap();
        let mut rng = rng_from_seed(1);
        let n = 100_000;
        let v: f64 = (0..n).map(|_| s.draw(&mut rng)[0].powi(2)).sum::<f64>() / n as f64;
        assert!((v - 2.5).abs() / 2.5 < 0.02, "{v}");
    }

    #[test]
    fn pair_correlation_matches() {
        let law = gauss(1.0, 0.1);
        let r = 0.08;
        let s = PointFieldSampler::new(law, &[[0.0; 3], [r, 0.0, 0.0]]).unwrap();
        let mut rng = rng_from_seed(2);
        let n = 100_000;
        let mut sxy = 0.0;
        let mut prods = Vec::with_capacity(n);
        for _ in 0..n {
            let z = s.draw(&mut rng);
            prods.push(z[0] * z[1]);
            sxy += z[0] * z[1];
        }
        let mean = sxy / n as f64;
        let sd = (prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let want = law.correlation.eval(r);
        assert!((mean - want).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {want}");
    }

    #[test]
    fn gaussian_integral_identity() {
        // E[exp(-Z²/2)] = 1/sqrt(1+κ) = 0.5 for κ = 3.
        let law = gauss(3.0, 0.1);
        let s = PointFieldSampler::new(law, &[[0.5, 0.5, 0.0]]).unwrap();
        let mut rng = rng_from_seed(3);
        let n = 1_000_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let z = s.draw(&mut rng)[0];
            let v = (-0.5 * z * z).exp();
            acc += v;
            acc2 += v * v;
        }
        let m = acc / n as f64;
        let se = ((acc2 / n as f64 - m * m) / n as f64).sqrt();
        assert!((m - 0.5).abs() < 3.0 * se, "{m}");
    }

    #[test]
    fn duplicate_locations_rejected() {
        let law = gauss(1.0, 0.1);
        assert!(sample_at_points(&law, &[[0.1; 3], [0.1; 3]], 0).is_err());
    }

    #[test]
    fn grid_is_deterministic_and_layout_checked() {
        let law = gauss(1.0, 0.1);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 20).unwrap();
        let a = sample_grid(&law, &layout, 9).unwrap();
        let b = sample_grid(&law, &layout, 9).unwrap();
        assert_eq!(a, b);
        assert!(GridLayout::new(Window::unit(2).unwrap(), vec![1, 5]).is_err());
        assert!(GridLayout::new(Window::unit(2).unwrap(), vec![5]).is_err());
    }

    #[test]
    fn circulant_draw_variance() {
        let law = gauss(2.0, 0.05);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 128).unwrap();
        let mut total = 0.0;
        for seed in 0..20 {
            let g = sample_grid(&law, &layout, seed).unwrap();
            let m = g.mean();
            total += g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (g.values.len() - 1) as f64;
        }
        let v = total / 20.0;
        assert!((v - 2.0).abs() / 2.0 < 0.05, "{v}");
    }

    #[test]
    fn circulant_matches_dense_covariance() {
        // Empirical covariance at two lags from many embedding draws.
        let law = FieldLaw::new(1.0, CorrelationModel::exponential(0.1).unwrap()).unwrap();
        let layout = GridLayout::new(Window::new(&[0.0, 0.0], &[1.0, 0.5]).unwrap(), vec![33, 17]).unwrap();
        let ce = CirculantEmbedding::new(&law.correlation, &layout).unwrap().unwrap();
        let mut rng = rng_from_seed(5);
        let n = 20_000;
        let (a, b) = (5 + 33 * 8, 9 + 33 * 8);
        let mut s = 0.0;
        for _ in 0..n {
            let z = ce.draw(&mut rng);
            s += z[a] * z[b];
        }
        let want = law.correlation.eval(4.0 / 32.0);
        assert!((s / n as f64 - want).abs() < 0.03, "{} vs {want}", s / n as f64);
    }

    #[test]
    fn indefinite_embedding_falls_back_to_dense() {
        let law = gauss(1.0, 0.3);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 12).unwrap();
        assert!(CirculantEmbedding::new(&law.correlation, &layout).unwrap().is_none());
        let opts = GridOptions { dense_max_nodes: 16, ..Default::default() };
        let g = sample_grid_with(&law, &layout, 1, &opts).unwrap();
        assert_eq!(g.values.len(), 144);
    }

    #[test]
    fn nearly_constant_field() {
        let law = gauss(0.1, 1000.0);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 16).unwrap();
        let g = sample_grid(&law, &layout, 4).unwrap();
        let lo = g.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = g.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 1e-3, "spread {}", hi - lo);
    }

    #[test]
    fn memory_cap_enforced() {
        let law = gauss(1.0, 0.1);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 100).unwrap();
        let opts = GridOptions { max_nodes: 5000, ..Default::default() };
        assert!(matches!(sample_grid_with(&law, &layout, 0, &opts), Err(Error::MemoryCap(_))));
    }

    #[test]
    fn conditioning_interpolates_and_is_idempotent() {
        let law = gauss(1.5, 0.2);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 11).unwrap();
        let locs = vec![layout.node(12), layout.node(60), layout.node(100), [0.33, 0.71, 0.0]];
        let vals = vec![0.4, -1.2, 2.0, 0.1];
        let sampler = ConditionalFieldSampler::new(law, &locs, layout.clone()).unwrap();
        let mut rng = rng_from_seed(8);
        let f = sampler.draw(&vals, &mut rng).unwrap();
        for (k, &i) in [12usize, 60, 100].iter().enumerate() {
            assert!((f.values[i] - vals[k]).abs() < 1e-8);
        }
        // Condition again on the raster's own values at the same nodes.
        let grid_locs: Vec<Point> = [12usize, 60, 100].iter().map(|&i| layout.node(i)).collect();
        let again_vals: Vec<f64> = [12usize, 60, 100].iter().map(|&i| f.values[i]).collect();
        let s2 = ConditionalFieldSampler::new(law, &grid_locs, layout.clone()).unwrap();
        let g = s2.draw(&again_vals, &mut rng).unwrap();
        for &i in &[12usize, 60, 100] {
            assert!((g.values[i] - f.values[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn conditional_variance_vanishes_at_data() {
        let law = gauss(1.0, 0.3);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 9).unwrap();
        let node = 40;
        let sampler = ConditionalFieldSampler::new(law, &[layout.node(node)], layout.clone()).unwrap();
        let mut rng = rng_from_seed(10);
        let draws: Vec<f64> = (0..100).map(|_| sampler.draw(&[0.7], &mut rng).unwrap().values[node]).collect();
        let m = draws.iter().sum::<f64>() / 100.0;
        let sd = (draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!(sd < 1e-6);
        // Away from the data the conditional spread is positive.
        let far: Vec<f64> = (0..100).map(|_| sampler.draw(&[0.7], &mut rng).unwrap().values[0]).collect();
        let fm = far.iter().sum::<f64>() / 100.0;
        assert!(far.iter().map(|v| (v - fm).powi(2)).sum::<f64>() > 1e-3);
    }

    #[test]
    fn empty_conditioning_is_unconditional() {
        let law = gauss(1.0, 0.2);
        let layout = GridLayout::square(Window::unit(2).unwrap(), 8).unwrap();
        let a = condition_on_values(&law, &[], &[], &layout, 3).unwrap();
        let b = sample_grid(&law, &layout, 3).unwrap();
        assert_eq!(a, b);
    }
}
