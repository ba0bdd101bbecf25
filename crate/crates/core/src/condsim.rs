//! Conditional simulation of a χ² (k = 1) selection field given the
//! retained and deleted points: Metropolis-within-Gibbs over the latent
//! Gaussian values at the points, then kriging-based reconstruction on a
//! raster.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::CorrelationModel;
use crate::error::{invalid, Error, Result};
use crate::field::{ConditionalFieldSampler, FieldLaw, GridField, GridLayout};
use crate::geometry::{dist, Point, ThinnedPair};
use crate::linalg::{Cholesky, SymMatrix};
use crate::rng::{rng_from_seed, split_seed, streams, Rng};
use crate::selection::SelectionModel;
use crate::thinning::InterruptedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl McmcSettings {
    /// burn_in = 10n, thin = 10, 1000 retained states.
    pub fn default_for(n: usize, seed: u64) -> Self {
        let burn_in = (10 * n).max(1);
        McmcSettings { sweeps: burn_in + 1000 * 10, burn_in, thin: 10, seed }
    }

    /// Settings keeping `draws` states after the default burn-in.
    pub fn with_draws(n: usize, draws: usize, seed: u64) -> Self {
        let d = Self::default_for(n, seed);
        McmcSettings { sweeps: d.burn_in + draws * d.thin, ..d }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.burn_in == 0 || self.burn_in >= self.sweeps {
            return invalid(format!(
                "need 0 < burn_in < sweeps and thin >= 1 (sweeps {}, burn_in {}, thin {})",
                self.sweeps, self.burn_in, self.thin
            ));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        (self.sweeps - self.burn_in) / self.thin
    }
}

/// U(z) = ½Σ_{retained} z² − Σ_{deleted} log(1 − e^{−z²/2}) + ½ zᵀΓ⁻¹z,
/// retained coordinates first.
#[derive(Debug, Clone)]
pub struct LatentEnergy {
    n_x: usize,
    kappa: f64,
    precision: SymMatrix,
}

impl LatentEnergy {
    /// From the covariance matrix Γ of the latent values.
    pub fn new(gamma: &SymMatrix, n_x: usize, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return invalid(format!("kappa must be positive, got {kappa}"));
        }
        if n_x > gamma.n() {
            return invalid("more retained points than latent coordinates");
        }
        let chol = Cholesky::factor_with_jitter(gamma, kappa)?;
        Ok(LatentEnergy { n_x, kappa, precision: chol.inverse() })
    }

    /// Γ = κ R₀(‖yᵢ − yⱼ‖) over the retained points followed by the deleted.
    pub fn from_points(kappa: f64, corr: &CorrelationModel, retained: &[Point], deleted: &[Point]) -> Result<Self> {
        let pts: Vec<Point> = retained.iter().chain(deleted).copied().collect();
        let gamma = SymMatrix::from_fn(pts.len(), |i, j| {
            if i == j {
                kappa
            } else {
                kappa * corr.eval(dist(&pts[i], &pts[j]))
            }
        });
        Self::new(&gamma, retained.len(), kappa)
    }

    pub fn n(&self) -> usize {
        self.precision.n()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_xbar(&self) -> usize {
        self.n() - self.n_x
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Contribution of coordinate i outside the quadratic form.
    #[inline]
    fn local(&self, i: usize, z: f64) -> f64 {
        if i < self.n_x {
            0.5 * z * z
        } else {
            // −log(1 − e^{−z²/2}) = −log(−expm1(−z²/2)); +∞ at z = 0.
            -(-(-0.5 * z * z).exp_m1()).ln()
        }
    }

    pub fn energy(&self, z: &[f64]) -> f64 {
        let quad = 0.5 * crate::linalg::dot(z, &self.precision.mul_vec(z));
        z.iter().enumerate().map(|(i, &v)| self.local(i, v)).sum::<f64>() + quad
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = self.precision.mul_vec(z);
        for (i, (gi, &v)) in g.iter_mut().zip(z).enumerate() {
            *gi += if i < self.n_x { v } else { -v / (0.5 * v * v).exp_m1() };
        }
        g
    }
}

/// Metropolis rule: certain acceptance for δ ≤ 0, else with probability e^{−δ}.
#[inline]
pub fn metropolis_accept(delta: f64, u: f64) -> bool {
    delta <= 0.0 || u < (-delta).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcRun {
    /// Thinned states after burn-in.
    pub states: Vec<Vec<f64>>,
    /// U at the end of every sweep.
    pub energy: Vec<f64>,
    pub acceptance_rate: f64,
}

/// Coordinate-wise independence sampler with N(0, κ) proposals.
///
/// δ is the Metropolis–Hastings log ratio including the proposal density,
/// so the chain targets exp(−U) exactly.
pub fn gibbs_sample_latent(e: &LatentEnergy, s: &McmcSettings) -> Result<McmcRun> {
    s.validate()?;
    let n = e.n();
    let mut rng = rng_from_seed(split_seed(s.seed, streams::MCMC));
    let sd = e.kappa.sqrt();
    let draw = |rng: &mut Rng| -> f64 {
        loop {
            let v = sd * rng.sample::<f64, _>(StandardNormal);
            if v != 0.0 {
                return v;
            }
        }
    };
    let mut z: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
    // w = Γ⁻¹z, kept current as coordinates change.
    let mut w = e.precision.mul_vec(&z);
    let mut u = e.energy(&z);
    let half_inv_kappa = 0.5 / e.kappa;
    let mut states = Vec::with_capacity(s.n_states());
    let mut energy = Vec::with_capacity(s.sweeps);
    let mut accepted = 0usize;
    for sweep in 1..=s.sweeps {
        for i in 0..n {
            let zi = z[i];
            let prop = draw(&mut rng);
            let d = prop - zi;
            let du = e.local(i, prop) - e.local(i, zi) + d * w[i] + 0.5 * d * d * e.precision.get(i, i);
            let delta = du - half_inv_kappa * (prop * prop - zi * zi);
            if metropolis_accept(delta, rng.random::<f64>()) {
                z[i] = prop;
                crate::linalg::axpy(d, e.precision.row(i), &mut w);
                u += du;
                accepted += 1;
            }
        }
        energy.push(u);
        if sweep > s.burn_in && (sweep - s.burn_in) % s.thin == 0 {
            states.push(z.clone());
        }
    }
    let acceptance_rate = if n == 0 { 0.0 } else { accepted as f64 / (n * s.sweeps) as f64 };
    Ok(McmcRun { states, energy, acceptance_rate })
}

#[derive(Debug, Clone)]
pub struct ConditionalPi {
    /// Π = exp(−Z²/2) on the raster, one per retained MCMC state.
    pub draws: Vec<GridField>,
    /// Pointwise average of the draws, approximating E[Π | data].
    pub mean: GridField,
    pub run: McmcRun,
}

fn chi2_k1(m: &InterruptedModel) -> Result<(f64, CorrelationModel)> {
    match m.selection {
        SelectionModel::Chi2 { k: 1, kappa, correlation } => Ok((kappa, correlation)),
        SelectionModel::Chi2 { k, .. } => {
            Err(Error::Unsupported(format!("conditional simulation needs k = 1, got k = {k}")))
        }
        SelectionModel::Boolean { .. } => {
            Err(Error::Unsupported("conditional simulation is implemented for the chi2 selection only".into()))
        }
    }
}

/// Samples the latent values at the points and rebuilds Π on the raster
/// for every retained chain state.
pub fn conditional_pi_field(
    model: &InterruptedModel,
    data: &ThinnedPair,
    layout: GridLayout,
    s: &McmcSettings,
) -> Result<ConditionalPi> {
    let (kappa, corr) = chi2_k1(model)?;
    s.validate()?;
    let retained = data.retained().points();
    let deleted = data.deleted().points();
    let energy = LatentEnergy::from_points(kappa, &corr, retained, deleted)?;
    let run = gibbs_sample_latent(&energy, s)?;
    let locations: Vec<Point> = retained.iter().chain(deleted).copied().collect();
    let law = FieldLaw::new(kappa, corr)?;
    let sampler = ConditionalFieldSampler::new(law, &locations, layout.clone())?;
    let mut rng = rng_from_seed(split_seed(s.seed, streams::FIELD));
    let mut draws = Vec::with_capacity(run.states.len());
    let mut acc = vec![0.0; layout.len()];
    for z in &run.states {
        let pi = sampler.draw(z, &mut rng)?.map(|v| (-0.5 * v * v).exp());
        for (a, v) in acc.iter_mut().zip(&pi.values) {
            *a += v;
        }
        draws.push(pi);
    }
    let k = draws.len().max(1) as f64;
    let mean = GridField::new(layout, acc.into_iter().map(|a| a / k).collect())?;
    Ok(ConditionalPi { draws, mean, run })
}
