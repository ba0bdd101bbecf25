//! Nonparametric summary statistics, model-implied K, and pointwise
//! simulation envelopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{close_pairs, unit_ball_volume, NeighborGrid, Point, PointPattern, Window};
use crate::rng::replicate_seed;
use crate::special::adaptive_simpson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Pcf,
    K,
    F,
    G,
    J,
}

impl std::str::FromStr for Stat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcf" | "g_pcf" => Ok(Stat::Pcf),
            "k" => Ok(Stat::K),
            "f" => Ok(Stat::F),
            "g" => Ok(Stat::G),
            "j" => Ok(Stat::J),
            _ => invalid(format!("unknown statistic `{s}` (expected pcf, K, F, G or J)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMeta {
    pub estimator: String,
    pub edge_correction: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub level: f64,
    pub n_sim: usize,
}

/// A summary function on an r-grid. Undefined values (J beyond the point
/// where F̂ reaches 1, pcf at r = 0 for d ≥ 2) are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFunction {
    pub stat: Stat,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: SummaryMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
}

fn check_grid(r: &[f64]) -> Result<()> {
    if r.is_empty() {
        return invalid("empty r-grid");
    }
    if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("r-grid must be finite, nonnegative and strictly increasing");
    }
    Ok(())
}

fn need_points(p: &PointPattern, n: usize, what: &str) -> Result<()> {
    if p.len() < n {
        return Err(Error::Degenerate(format!("{what} needs at least {n} points, got {}", p.len())));
    }
    Ok(())
}

/// Stoyan's rule: Epanechnikov half-width 0.15/√ρ̂ (in d = 2; the d-th
/// root generalizes it).
pub fn default_bandwidth(p: &PointPattern) -> f64 {
    0.15 / p.intensity().powf(1.0 / p.dim() as f64)
}

/// Translation-corrected kernel estimate of the pair correlation function
/// with an Epanechnikov kernel of half-width `bandwidth`.
pub fn estimate_pcf(p: &PointPattern, r: &[f64], bandwidth: Option<f64>) -> Result<SummaryFunction> {
    check_grid(r)?;
    need_points(p, 2, "pair correlation estimate")?;
    let h = bandwidth.unwrap_or_else(|| default_bandwidth(p));
    if !(h > 0.0 && h.is_finite()) {
        return invalid(format!("bandwidth must be positive, got {h}"));
    }
    let w = p.window();
    let dim = w.dim();
    let n = p.len() as f64;
    let rmax = r[r.len() - 1];
    let mut acc = vec![0.0; r.len()];
    for (i, j, d) in close_pairs(w, p.points(), rmax + h) {
        let wt = 2.0 / w.translation_overlap(&p.points()[i], &p.points()[j]);
        let start = r.partition_point(|&x| x < d - h);
        for (k, &rk) in r.iter().enumerate().skip(start) {
            let t = (rk - d) / h;
            if t > 1.0 {
                break;
            }
            if t >= -1.0 {
                acc[k] += wt * 0.75 / h * (1.0 - t * t);
            }
        }
    }
    let surface = dim as f64 * unit_ball_volume(dim)?;
    let rho2 = n * (n - 1.0) / (w.volume() * w.volume());
    let values = r
        .iter()
        .zip(acc)
        .map(|(&rk, a)| {
            let area = surface * rk.powi(dim as i32 - 1);
            if area > 0.0 {
                a / (area * rho2)
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(SummaryFunction {
        stat: Stat::Pcf,
        r: r.to_vec(),
        values,
        meta: SummaryMeta {
            estimator: "epanechnikov kernel".into(),
            edge_correction: "translation".into(),
            bandwidth: Some(h),
        },
        envelope: None,
    })
}

/// Translation-corrected Ripley K.
pub fn estimate_k(p: &PointPattern, r: &[f64]) -> Result<SummaryFunction> {
    check_grid(r)?;
    need_points(p, 2, "K estimate")?;
    let w = p.window();
    let n = p.len() as f64;
    let rmax = r[r.len() - 1];
    let mut pairs: Vec<(f64, f64)> = close_pairs(w, p.points(), rmax)
        .into_iter()
        .map(|(i, j, d)| (d, 2.0 / w.translation_overlap(&p.points()[i], &p.points()[j])))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rho2 = n * (n - 1.0) / (w.volume() * w.volume());
    let mut values = Vec::with_capacity(r.len());
    let (mut idx, mut sum) = (0usize, 0.0);
    for &rk in r {
        while idx < pairs.len() && pairs[idx].0 <= rk {
            sum += pairs[idx].1;
            idx += 1;
        }
        values.push(sum / rho2);
    }
    Ok(SummaryFunction {
        stat: Stat::K,
        r: r.to_vec(),
        values,
        meta: SummaryMeta { estimator: "empirical".into(), edge_correction: "translation".into(), bandwidth: None },
        envelope: None,
    })
}

/// Cumulative values K(r_i) = d·ω_d ∫₀^{r_i} t^{d−1} g(t) dt by adaptive
/// Simpson over successive grid intervals (total absolute tolerance `tol`).
pub fn model_k_values(mut g: impl FnMut(f64) -> f64, r: &[f64], dim: usize, tol: f64) -> Result<Vec<f64>> {
    check_grid(r)?;
    let c = dim as f64 * unit_ball_volume(dim)?;
    let rmax = r[r.len() - 1];
    let p = dim as i32 - 1;
    let mut out = Vec::with_capacity(r.len());
    let (mut prev, mut total) = (0.0, 0.0);
    for &rk in r {
        if rk > prev {
            let share = tol * (rk - prev) / rmax;
            total += adaptive_simpson(|t| t.powi(p) * g(t), prev, rk, share / c)?;
        }
        prev = rk;
        out.push(c * total);
    }
    Ok(out)
}

/// Model K function from a pair correlation function.
pub fn model_k(g: impl FnMut(f64) -> f64, r: &[f64], dim: usize) -> Result<SummaryFunction> {
    let values = model_k_values(g, r, dim, 1e-8)?;
    Ok(SummaryFunction {
        stat: Stat::K,
        r: r.to_vec(),
        values,
        meta: SummaryMeta { estimator: "model".into(), edge_correction: "none".into(), bandwidth: None },
        envelope: None,
    })
}

/// |W ⊖ r| for a box window.
fn eroded_volume(w: &Window, r: f64) -> f64 {
    (0..w.dim()).map(|i| (w.side(i) - 2.0 * r).max(0.0)).product()
}

/// Distance from each query to the nearest point of `pts`, skipping the
/// query's own index when `skip_self` is set.
fn nearest_distances(w: &Window, pts: &[Point], queries: &[Point], skip_self: bool) -> Vec<f64> {
    let start = (w.volume() / pts.len().max(1) as f64).powf(1.0 / w.dim() as f64);
    let grid = NeighborGrid::new(w, pts, start);
    let diam = w.sides().iter().map(|s| s * s).sum::<f64>().sqrt();
    queries
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let mut radius = start;
            loop {
                let mut best = f64::INFINITY;
                grid.for_each_near(pts, q, radius, |j, d2| {
                    if !(skip_self && j == qi) && d2 < best {
                        best = d2;
                    }
                });
                if best.is_finite() || radius > 2.0 * diam {
                    return best.sqrt();
                }
                radius *= 2.0;
            }
        })
        .collect()
}

/// Hanisch-type border-corrected distribution estimate: distances d_i
/// with boundary distances b_i are used when d_i ≤ b_i and weighted by
/// 1/|W ⊖ d_i|. The result is a distribution function, hence monotone.
fn border_cdf(w: &Window, dists: &[f64], bdist: &[f64], r: &[f64]) -> Vec<f64> {
    let mut used: Vec<(f64, f64)> = dists
        .iter()
        .zip(bdist)
        .filter(|(d, b)| d <= b && d.is_finite())
        .map(|(&d, _)| (d, 1.0 / eroded_volume(w, d)))
        .filter(|(_, wt)| wt.is_finite())
        .collect();
    used.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = used.iter().map(|u| u.1).sum();
    if total <= 0.0 {
        return vec![f64::NAN; r.len()];
    }
    let (mut idx, mut sum) = (0usize, 0.0);
    r.iter()
        .map(|&rk| {
            while idx < used.len() && used[idx].0 <= rk {
                sum += used[idx].1;
                idx += 1;
            }
            (sum / total).min(1.0)
        })
        .collect()
}

fn test_grid(w: &Window, resolution: usize) -> Vec<Point> {
    let dim = w.dim();
    let total = resolution.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let mut p = [0.0; 3];
            for (i, v) in p.iter_mut().enumerate().take(dim) {
                let c = k % resolution;
                k /= resolution;
                *v = w.lower()[i] + (c as f64 + 0.5) / resolution as f64 * w.side(i);
            }
            p
        })
        .collect()
}

/// Nearest-neighbour distance distribution G.
pub fn estimate_g(p: &PointPattern, r: &[f64]) -> Result<SummaryFunction> {
    check_grid(r)?;
    need_points(p, 2, "G estimate")?;
    let w = p.window();
    let d = nearest_distances(w, p.points(), p.points(), true);
    let b: Vec<f64> = p.points().iter().map(|x| w.boundary_distance(x)).collect();
    Ok(SummaryFunction {
        stat: Stat::G,
        r: r.to_vec(),
        values: border_cdf(w, &d, &b, r),
        meta: SummaryMeta { estimator: "nearest neighbour".into(), edge_correction: "border (Hanisch)".into(), bandwidth: None },
        envelope: None,
    })
}

/// Empty-space function F from a regular test grid with `resolution`
/// cells per axis.
pub fn estimate_f(p: &PointPattern, r: &[f64], resolution: usize) -> Result<SummaryFunction> {
    check_grid(r)?;
    need_points(p, 1, "F estimate")?;
    if resolution < 2 {
        return invalid("F test grid needs at least 2 cells per axis");
    }
    let w = p.window();
    let probes = test_grid(w, resolution);
    let d = nearest_distances(w, p.points(), &probes, false);
    let b: Vec<f64> = probes.iter().map(|x| w.boundary_distance(x)).collect();
    Ok(SummaryFunction {
        stat: Stat::F,
        r: r.to_vec(),
        values: border_cdf(w, &d, &b, r),
        meta: SummaryMeta {
            estimator: format!("empty space, {resolution}-point grid per axis"),
            edge_correction: "border (Chiu-Stoyan)".into(),
            bandwidth: None,
        },
        envelope: None,
    })
}

/// J = (1 − G)/(1 − F), NaN from the first r with F̂ = 1.
pub fn j_from(f: &SummaryFunction, g: &SummaryFunction) -> SummaryFunction {
    let mut dead = false;
    let values = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(&fv, &gv)| {
            if dead || fv >= 1.0 || fv.is_nan() || gv.is_nan() {
                dead = dead || fv >= 1.0;
                f64::NAN
            } else {
                (1.0 - gv) / (1.0 - fv)
            }
        })
        .collect();
    SummaryFunction {
        stat: Stat::J,
        r: f.r.clone(),
        values,
        meta: SummaryMeta { estimator: "(1-G)/(1-F)".into(), edge_correction: "border".into(), bandwidth: None },
        envelope: None,
    }
}

/// F, G and J together.
pub fn estimate_fgj(p: &PointPattern, r: &[f64], resolution: usize) -> Result<[SummaryFunction; 3]> {
    let f = estimate_f(p, r, resolution)?;
    let g = estimate_g(p, r)?;
    let j = j_from(&f, &g);
    Ok([f, g, j])
}

/// Options shared by the statistic dispatcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatOptions {
    pub bandwidth: Option<f64>,
    pub f_resolution: usize,
}

impl Default for StatOptions {
    fn default() -> Self {
        StatOptions { bandwidth: None, f_resolution: 128 }
    }
}

pub fn estimate(stat: Stat, p: &PointPattern, r: &[f64], opts: &StatOptions) -> Result<SummaryFunction> {
    match stat {
        Stat::Pcf => estimate_pcf(p, r, opts.bandwidth),
        Stat::K => estimate_k(p, r),
        Stat::F => estimate_f(p, r, opts.f_resolution),
        Stat::G => estimate_g(p, r),
        Stat::J => Ok(estimate_fgj(p, r, opts.f_resolution)?[2].clone()),
    }
}

/// Rank used for the lower (and, from the top, upper) envelope.
pub fn envelope_rank(n_sim: usize, level: f64) -> Result<usize> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("envelope level must lie in (0, 1), got {level}"));
    }
    let k = ((1.0 - level) / 2.0 * (n_sim as f64 + 1.0) - 1e-9).ceil() as usize;
    if (1.0 - level) / 2.0 * (n_sim as f64 + 1.0) < 1.0 - 1e-9 || k == 0 || 2 * k > n_sim {
        return invalid(format!("{n_sim} simulations are too few for level {level}"));
    }
    Ok(k)
}

/// Pointwise envelopes from already computed simulated curves.
pub fn envelope_from_curves(curves: &[Vec<f64>], level: f64) -> Result<Envelope> {
    let n_sim = curves.len();
    let k = envelope_rank(n_sim, level)?;
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return invalid("simulated curves differ in length");
    }
    let mut lo = Vec::with_capacity(len);
    let mut hi = Vec::with_capacity(len);
    let mut col = vec![0.0; n_sim];
    for i in 0..len {
        for (c, v) in curves.iter().zip(col.iter_mut()) {
            *v = c[i];
        }
        col.sort_by(|a, b| a.total_cmp(b));
        lo.push(col[k - 1]);
        hi.push(col[n_sim - k]);
    }
    Ok(Envelope { lo, hi, level, n_sim })
}

/// Observed statistic with pointwise envelopes from `n_sim` patterns drawn
/// by `sim(seed)`, seeds derived from `root_seed` by replicate index.
pub fn envelopes<S>(
    observed: &PointPattern,
    sim: S,
    stat: Stat,
    r: &[f64],
    n_sim: usize,
    level: f64,
    opts: &StatOptions,
    root_seed: u64,
) -> Result<SummaryFunction>
where
    S: Fn(u64) -> Result<PointPattern> + Sync,
{
    envelope_rank(n_sim, level)?;
    let mut out = estimate(stat, observed, r, opts)?;
    let curves: Vec<Vec<f64>> = (0..n_sim as u64)
        .into_par_iter()
        .map(|i| Ok(estimate(stat, &sim(replicate_seed(root_seed, i))?, r, opts)?.values))
        .collect::<Result<_>>()?;
    out.envelope = Some(envelope_from_curves(&curves, level)?);
    Ok(out)
}
