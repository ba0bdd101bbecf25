//! DPP simulation on a rectangle by the spectral (projection) method.
//!
//! The kernel is replaced by its periodic version on the box, whose
//! eigenfunctions are Fourier modes with eigenvalues φ₀(k/L). Each mode is
//! kept with probability equal to its eigenvalue; the resulting projection
//! DPP is sampled point by point, each point drawn from the normalized
//! squared norm of the projection onto the remaining subspace.

use rand::Rng as _;
use std::f64::consts::PI;

use crate::covariance::{require_dpp_admissible, DppKernel};
use crate::error::{Error, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::linalg::{axpy, dot, gemm};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy)]
pub struct DppSamplerOptions {
    /// Fraction of ρ|W| the retained spectrum must capture.
    pub mass: f64,
    /// Upper bound on the number of frequencies enumerated.
    pub max_frequencies: usize,
}

impl Default for DppSamplerOptions {
    fn default() -> Self {
        DppSamplerOptions { mass: 0.999, max_frequencies: 4_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Constant,
    Cos,
    Sin,
}

/// Fourier mode with frequency index k (components beyond d are zero).
#[derive(Debug, Clone, Copy)]
struct Frequency {
    k: [i64; 3],
    eigenvalue: f64,
}

/// Truncated spectrum of a DPP kernel on a window; reusable across draws.
#[derive(Debug, Clone)]
pub struct DppSampler {
    window: Window,
    /// Zero frequency first, then one representative of each ±k pair.
    freqs: Vec<Frequency>,
    /// Largest |k_a| per axis.
    reach: [i64; 3],
    captured: f64,
}

impl DppSampler {
    pub fn new(kernel: &DppKernel, w: &Window, opts: &DppSamplerOptions) -> Result<Self> {
        let dim = w.dim();
        require_dpp_admissible(kernel, dim)?;
        let sides = w.sides();
        let target = kernel.variance * w.volume();
        let mut radius = 1.0 / kernel.correlation.scale();
        let mut previous = 0.0;
        loop {
            let mut reach = [0i64; 3];
            let mut count_estimate = 1.0;
            for a in 0..dim {
                reach[a] = (radius * sides[a]).floor() as i64;
                count_estimate *= (2 * reach[a] + 1) as f64;
            }
            if count_estimate > 4.0 * opts.max_frequencies as f64 {
                return Err(Error::Numerical(format!(
                    "DPP spectral truncation at mass {} needs more than {} frequencies",
                    opts.mass, opts.max_frequencies
                )));
            }
            let mut freqs = Vec::new();
            let mut captured = 0.0;
            let r2 = radius * radius;
            for kz in -reach[2]..=reach[2] {
                for ky in -reach[1]..=reach[1] {
                    for kx in -reach[0]..=reach[0] {
                        let k = [kx, ky, kz];
                        let mut x2 = 0.0;
                        for a in 0..dim {
                            let f = k[a] as f64 / sides[a];
                            x2 += f * f;
                        }
                        if x2 > r2 {
                            continue;
                        }
                        let lam = kernel.spectral_density(x2.sqrt(), dim)?;
                        captured += lam;
                        // Keep k = 0 and the half with a positive leading component.
                        let lead = k.iter().rev().copied().find(|&c| c != 0).unwrap_or(0);
                        if lead >= 0 {
                            freqs.push(Frequency { k, eigenvalue: lam });
                        }
                    }
                }
            }
            if freqs.len() > opts.max_frequencies {
                return Err(Error::Numerical(format!(
                    "DPP spectral truncation at mass {} needs more than {} frequencies",
                    opts.mass, opts.max_frequencies
                )));
            }
            let converged = captured - previous <= 1e-9 * target;
            if captured >= opts.mass * target || converged {
                if captured < opts.mass * target {
                    log::warn!(
                        "periodic DPP spectrum captures {:.6} of the nominal mass on this window",
                        captured / target
                    );
                }
                freqs.sort_by_key(|f| f.k != [0, 0, 0]);
                return Ok(DppSampler { window: w.clone(), freqs, reach, captured });
            }
            previous = captured;
            radius *= 2.0;
        }
    }

    /// Expected number of points, Σ_k φ₀(k/L) over the retained spectrum.
    pub fn expected_count(&self) -> f64 {
        self.captured
    }

    pub fn sample(&self, rng: &mut Rng) -> PointPattern {
        let w = &self.window;
        let vol = w.volume();
        // Select modes.
        let mut basis: Vec<([i64; 3], Mode)> = Vec::new();
        let mut singles = 0usize;
        for f in &self.freqs {
            if f.k == [0, 0, 0] {
                if rng.random::<f64>() < f.eigenvalue {
                    basis.push((f.k, Mode::Constant));
                }
                continue;
            }
            let c = rng.random::<f64>() < f.eigenvalue;
            let s = rng.random::<f64>() < f.eigenvalue;
            if c {
                basis.push((f.k, Mode::Cos));
            }
            if s {
                basis.push((f.k, Mode::Sin));
            }
            if c != s {
                singles += 1;
            }
        }
        let n = basis.len();
        if n == 0 {
            return PointPattern::empty(w.clone());
        }
        let mut modes = ModeTable::new(w, &self.reach, basis);
        // sup_x ‖v(x)‖².
        let bound = (n + singles) as f64 / vol;
        let points = sample_projection(&mut modes, w, bound, rng);
        PointPattern::from_trusted(w.clone(), points)
    }
}

/// Evaluates the selected orthonormal Fourier modes at a point.
struct ModeTable {
    dim: usize,
    lower: [f64; 3],
    sides: [f64; 3],
    reach: [i64; 3],
    basis: Vec<([i64; 3], Mode)>,
    /// (cos, sin) of m·θ_a for m = −reach..=reach, per axis.
    tables: Vec<Vec<(f64, f64)>>,
    amp: f64,
    flat: f64,
}

impl ModeTable {
    fn new(w: &Window, reach: &[i64; 3], basis: Vec<([i64; 3], Mode)>) -> Self {
        let dim = w.dim();
        let mut lower = [0.0; 3];
        let mut sides = [1.0; 3];
        for a in 0..dim {
            lower[a] = w.lower()[a];
            sides[a] = w.side(a);
        }
        let vol = w.volume();
        ModeTable {
            dim,
            lower,
            sides,
            reach: *reach,
            basis,
            tables: (0..3).map(|a| vec![(1.0, 0.0); (2 * reach[a] + 1) as usize]).collect(),
            amp: (2.0 / vol).sqrt(),
            flat: 1.0 / vol.sqrt(),
        }
    }

    fn len(&self) -> usize {
        self.basis.len()
    }

    fn eval(&mut self, x: &Point, v: &mut [f64]) {
        for a in 0..self.dim {
            let reach = self.reach[a] as usize;
            let t = 2.0 * PI * (x[a] - self.lower[a]) / self.sides[a];
            let table = &mut self.tables[a];
            let (s1, c1) = t.sin_cos();
            table[reach] = (1.0, 0.0);
            // Angle addition, resynchronized every 16 steps.
            let (mut c, mut s) = (1.0, 0.0);
            for m in 1..=reach {
                if m % 16 == 0 {
                    let (sm, cm) = (m as f64 * t).sin_cos();
                    c = cm;
                    s = sm;
                } else {
                    let nc = c * c1 - s * s1;
                    s = s * c1 + c * s1;
                    c = nc;
                }
                table[reach + m] = (c, s);
                table[reach - m] = (c, -s);
            }
        }
        for (j, (k, mode)) in self.basis.iter().enumerate() {
            if *mode == Mode::Constant {
                v[j] = self.flat;
                continue;
            }
            let (mut re, mut im) = (1.0, 0.0);
            for a in 0..self.dim {
                let (c, s) = self.tables[a][(k[a] + self.reach[a]) as usize];
                let nr = re * c - im * s;
                im = re * s + im * c;
                re = nr;
            }
            v[j] = self.amp * if *mode == Mode::Cos { re } else { im };
        }
    }
}

/// Accepted points between updates of the stored basis.
const BLOCK: usize = 32;
/// Largest number of proposals scored in one pass.
const MAX_BATCH: usize = 8;

/// Sequential sampling of the projection DPP spanned by the modes.
///
/// With y the coordinates of v(x) in a stored orthonormal basis B₀ and g_l
/// orthonormal directions (in the same coordinates) already used up by
/// accepted points, the unnormalized density of the next point is
/// ‖y‖² − Σ_l (g_lᵀy)². During the first half of the points B₀ is the
/// identity; afterwards B₀ spans the remaining subspace and is refreshed
/// every BLOCK points, which keeps each pass over it short. Proposals are
/// uniform on W, accepted with probability density/bound, and scored in
/// batches so the stored vectors are streamed once per batch.
fn sample_projection(modes: &mut ModeTable, w: &Window, bound: f64, rng: &mut Rng) -> Vec<Point> {
    let n = modes.len();
    // None while B₀ is the identity.
    let mut b0: Option<Vec<f64>> = None;
    let mut i0 = n;
    let mut used: Vec<f64> = Vec::new();
    let mut points = Vec::with_capacity(n);
    let mut vs = vec![0.0; MAX_BATCH * n];
    let mut ys = vec![0.0; MAX_BATCH * n];
    let mut proj = vec![0.0; MAX_BATCH * n];
    let mut xs = [[0.0; 3]; MAX_BATCH];
    let mut us = [0.0; MAX_BATCH];
    while points.len() < n {
        let j = used.len() / i0;
        let i = i0 - j;
        let want = (1.3 * n as f64 / i as f64).ceil() as usize;
        let batch = want.clamp(1, MAX_BATCH).next_power_of_two();
        let accepted = 'search: loop {
            for p in 0..batch {
                xs[p] = w.uniform_point(rng);
                modes.eval(&xs[p], &mut vs[p * n..(p + 1) * n]);
                us[p] = rng.random::<f64>() * bound;
            }
            let ys: &[f64] = match &b0 {
                None => &vs[..batch * n],
                Some(b) => {
                    project_batch(b, n, i0, &vs[..batch * n], &mut ys[..batch * i0], batch);
                    &ys[..batch * i0]
                }
            };
            // proj[l * MAX_BATCH + p] = g_lᵀ y_p.
            project_batch(&used, i0, j, ys, &mut proj[..batch * j.max(1)], batch);
            for p in 0..batch {
                let y = &ys[p * i0..(p + 1) * i0];
                let mut t = dot(y, y);
                for l in 0..j {
                    let c = proj[p * j + l];
                    t -= c * c;
                }
                if us[p] <= t {
                    let keep: Vec<f64> = (0..j).map(|l| proj[p * j + l]).collect();
                    break 'search (p, y.to_vec(), keep);
                }
            }
        };
        let (p, y, coef) = accepted;
        points.push(xs[p]);
        if points.len() == n {
            break;
        }
        // Gram–Schmidt step, repeated once for stability.
        let mut g = y;
        for l in 0..j {
            axpy(-coef[l], &used[l * i0..(l + 1) * i0], &mut g);
        }
        for l in 0..j {
            let c = dot(&used[l * i0..(l + 1) * i0], &g);
            axpy(-c, &used[l * i0..(l + 1) * i0], &mut g);
        }
        let norm = dot(&g, &g).sqrt();
        g.iter_mut().for_each(|t| *t /= norm);
        used.extend_from_slice(&g);
        let k = j + 1;
        let refresh = match b0 {
            None => 2 * k >= n,
            Some(_) => k == BLOCK,
        };
        if refresh && k < i0 {
            b0 = Some(complement_basis(b0.as_deref(), n, i0, &used, k));
            i0 -= k;
            used.clear();
        }
    }
    points
}

/// Row p of `ys` (length `cols`) is Bᵀ·vs[p], with B n × cols column-major.
fn project_batch(b: &[f64], n: usize, cols: usize, vs: &[f64], ys: &mut [f64], batch: usize) {
    let mut out = [0.0; MAX_BATCH];
    for c in 0..cols {
        let col = &b[c * n..(c + 1) * n];
        match batch {
            1 => multi_dot::<1>(col, vs, &mut out),
            2 => multi_dot::<2>(col, vs, &mut out),
            4 => multi_dot::<4>(col, vs, &mut out),
            _ => multi_dot::<8>(col, vs, &mut out),
        }
        for p in 0..batch {
            ys[p * cols + c] = out[p];
        }
    }
}

/// out[p] = ⟨col, vs[p]⟩ for p < P; `vs` holds the vectors back to back.
#[inline]
fn multi_dot<const P: usize>(col: &[f64], vs: &[f64], out: &mut [f64; MAX_BATCH]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { multi_dot_avx2::<P>(col, vs, out) };
            return;
        }
    }
    multi_dot_portable::<P>(col, vs, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn multi_dot_avx2<const P: usize>(col: &[f64], vs: &[f64], out: &mut [f64; MAX_BATCH]) {
    multi_dot_portable::<P>(col, vs, out)
}

#[inline(always)]
fn multi_dot_portable<const P: usize>(col: &[f64], vs: &[f64], out: &mut [f64; MAX_BATCH]) {
    let n = col.len();
    let vs: [&[f64]; P] = std::array::from_fn(|p| &vs[p * n..(p + 1) * n]);
    let mut acc = [[0.0f64; 4]; P];
    let chunks = n / 4;
    for k in 0..chunks {
        let c = &col[4 * k..4 * k + 4];
        for p in 0..P {
            let v = &vs[p][4 * k..4 * k + 4];
            for l in 0..4 {
                acc[p][l] += c[l] * v[l];
            }
        }
    }
    for p in 0..P {
        let a = acc[p];
        let mut s = (a[0] + a[1]) + (a[2] + a[3]);
        for r in 4 * chunks..n {
            s += col[r] * vs[p][r];
        }
        out[p] = s;
    }
}

/// B·Q[:, k..] where Q = H₀⋯H_{k−1} = I − Y·T·Yᵀ comes from a Householder
/// QR of the k orthonormal `used` vectors (length `cols`), so its trailing
/// columns span their orthogonal complement. `b = None` means B = I.
fn complement_basis(b: Option<&[f64]>, n: usize, cols: usize, used: &[f64], k: usize) -> Vec<f64> {
    // Householder vectors overwrite a copy of the used vectors (column-major).
    let mut y = used.to_vec();
    let mut beta = vec![0.0; k];
    for l in 0..k {
        let (done, rest) = y.split_at_mut((l + 1) * cols);
        let h = &mut done[l * cols..];
        h[..l].iter_mut().for_each(|t| *t = 0.0);
        let norm = dot(&h[l..], &h[l..]).sqrt();
        h[l] += if h[l] >= 0.0 { norm } else { -norm };
        beta[l] = 2.0 / dot(&h[l..], &h[l..]);
        for m in 0..k - l - 1 {
            let col = &mut rest[m * cols..(m + 1) * cols];
            let f = beta[l] * dot(&h[l..], &col[l..]);
            axpy(-f, &h[l..], &mut col[l..]);
        }
    }
    // T upper triangular with Q = I − Y·T·Yᵀ (row-major k × k).
    let mut yty = vec![0.0; k * k];
    gemm(k, cols, k, 1.0, (&y, cols as isize, 1), (&y, 1, cols as isize), 0.0, &mut yty, k as isize, 1);
    let mut t = vec![0.0; k * k];
    for l in 0..k {
        for r in 0..l {
            let s: f64 = (r..l).map(|c| t[r * k + c] * yty[c * k + l]).sum();
            t[r * k + l] = -beta[l] * s;
        }
        t[l * k + l] = beta[l];
    }
    let kept = cols - k;
    // W = B·Y·T (n × k, row-major).
    let mut by = vec![0.0; n * k];
    match b {
        None => {
            for r in 0..n {
                for l in 0..k {
                    by[r * k + l] = y[l * cols + r];
                }
            }
        }
        Some(b) => gemm(n, cols, k, 1.0, (b, 1, n as isize), (&y, 1, cols as isize), 0.0, &mut by, k as isize, 1),
    }
    let mut wt = vec![0.0; n * k];
    gemm(n, k, k, 1.0, (&by, k as isize, 1), (&t, k as isize, 1), 0.0, &mut wt, k as isize, 1);
    // B[:, k..] − W·Y[k.., :]ᵀ, column-major n × kept.
    let mut next = vec![0.0; n * kept];
    match b {
        None => {
            for c in 0..kept {
                next[c * n + k + c] = 1.0;
            }
        }
        Some(b) => next.copy_from_slice(&b[k * n..cols * n]),
    }
    gemm(n, k, kept, -1.0, (&wt, k as isize, 1), (&y[k..], cols as isize, 1), 1.0, &mut next, 1, n as isize);
    next
}

/// One draw of a DPP on a rectangular window.
pub fn simulate_dpp(kernel: &DppKernel, w: &Window, seed: u64, opts: &DppSamplerOptions) -> Result<PointPattern> {
    let sampler = DppSampler::new(kernel, w, opts)?;
    Ok(sampler.sample(&mut rng_from_seed(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CorrelationModel;

    fn kernel(rho: f64, alpha: f64) -> DppKernel {
        DppKernel::new(rho, CorrelationModel::gaussian(alpha).unwrap()).unwrap()
    }

    #[test]
    fn captures_mass() {
        let w = Window::unit(2).unwrap();
        let s = DppSampler::new(&kernel(1000.0, 0.015), &w, &DppSamplerOptions::default()).unwrap();
        assert!(s.expected_count() >= 999.0 && s.expected_count() <= 1000.0 + 1e-6, "{}", s.expected_count());
    }

    #[test]
    fn small_window_counts() {
        let w = Window::unit(2).unwrap();
        let s = DppSampler::new(&kernel(100.0, 0.05), &w, &DppSamplerOptions::default()).unwrap();
        let mut rng = rng_from_seed(1);
        let reps = 200;
        let counts: Vec<f64> = (0..reps).map(|_| s.sample(&mut rng).len() as f64).collect();
        let m = counts.iter().sum::<f64>() / reps as f64;
        let sd = (counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((m - 100.0).abs() < 3.0 * sd / (reps as f64).sqrt() + 0.1, "{m}");
        // Repulsion: count variance below the Poisson value.
        assert!(sd * sd < 100.0);
    }

    #[test]
    fn repulsion_at_short_range() {
        // Pair counts at distance < α/2 are far below the Poisson level.
        let w = Window::unit(2).unwrap();
        let alpha = 0.05;
        let s = DppSampler::new(&kernel(100.0, alpha), &w, &DppSamplerOptions::default()).unwrap();
        let mut rng = rng_from_seed(2);
        let mut close = 0usize;
        let mut n_tot = 0.0;
        for _ in 0..50 {
            let y = s.sample(&mut rng);
            n_tot += (y.len() * y.len()) as f64;
            close += crate::geometry::close_pairs(&w, y.points(), alpha / 2.0).len();
        }
        let poisson = 0.5 * n_tot * PI * (alpha / 2.0).powi(2);
        assert!((close as f64) < 0.35 * poisson, "{close} vs {poisson}");
    }

    #[test]
    fn heavy_tailed_kernel_hits_cap() {
        let k = DppKernel::new(1000.0, CorrelationModel::exponential(0.01).unwrap()).unwrap();
        let opts = DppSamplerOptions { mass: 0.999, max_frequencies: 10_000 };
        assert!(matches!(DppSampler::new(&k, &Window::unit(2).unwrap(), &opts), Err(Error::Numerical(_))));
    }

    #[test]
    fn works_in_one_and_three_dimensions() {
        let w1 = Window::new(&[0.0], &[5.0]).unwrap();
        let k1 = DppKernel::new(20.0, CorrelationModel::gaussian(0.02).unwrap()).unwrap();
        let y1 = simulate_dpp(&k1, &w1, 3, &DppSamplerOptions::default()).unwrap();
        assert!(y1.len() > 50 && y1.len() < 150);
        let w3 = Window::unit(3).unwrap();
        let k3 = DppKernel::new(50.0, CorrelationModel::gaussian(0.1).unwrap()).unwrap();
        let y3 = simulate_dpp(&k3, &w3, 4, &DppSamplerOptions::default()).unwrap();
        assert!(y3.len() > 20 && y3.len() < 80);
    }
}
