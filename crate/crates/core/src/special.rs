//! Special functions and quadrature rules.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Fourth Taylor coefficient of 1/Γ(z).
const RGAMMA_C4: f64 = -0.042_002_635_034_095_24;

/// Temme's auxiliary gamma combinations for |mu| <= 1/2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / gamma(1.0 + mu);
    let gammi = 1.0 / gamma(1.0 - mu);
    let gam1 = if mu.abs() < 1e-4 {
        -EULER_GAMMA - RGAMMA_C4 * mu * mu
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    let gam2 = 0.5 * (gammi + gampl);
    (gam1, gam2, gampl, gammi)
}

/// Natural log of the modified Bessel function of the second kind K_nu(x),
/// for nu >= 0 and x > 0.
///
/// Temme's series for x < 2, Steed's continued fraction otherwise, followed
/// by forward recurrence in the order (rescaled to avoid overflow).
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x > 0.0, "ln_bessel_k needs nu >= 0, x > 0");
    const EPS: f64 = 1e-16;
    const MAXIT: usize = 100_000;
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut rkmu, mut rk1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        rkmu = sum;
        rk1 = sum1 * xi2;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..MAXIT {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        // Keep exp(-x) in the log to avoid underflow for large x.
        let ln_rkmu = 0.5 * (PI / (2.0 * x)).ln() - x - s.ln();
        let ratio = (mu + x + 0.5 - h) * xi;
        let mut ln_scale = ln_rkmu;
        rkmu = 1.0;
        rk1 = ratio;
        for i in 1..=nl {
            let t = (mu + i as f64) * xi2 * rk1 + rkmu;
            rkmu = rk1;
            rk1 = t;
            if rk1 > 1e250 {
                rkmu /= 1e250;
                rk1 /= 1e250;
                ln_scale += 250.0 * 10f64.ln();
            }
        }
        return ln_scale + rkmu.ln();
    }
    let mut ln_scale = 0.0;
    for i in 1..=nl {
        let t = (mu + i as f64) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = t;
        if rk1 > 1e250 {
            rkmu /= 1e250;
            rk1 /= 1e250;
            ln_scale += 250.0 * 10f64.ln();
        }
    }
    ln_scale + rkmu.ln()
}

pub fn bessel_k(nu: f64, x: f64) -> f64 {
    ln_bessel_k(nu, x).exp()
}

/// J_0 via the trapezoid rule on (1/π)∫₀^π cos(x sin θ) dθ, which converges
/// geometrically for this periodic integrand.
pub fn bessel_j0(x: f64) -> f64 {
    let n = 48 + (1.5 * x.abs()).ceil() as usize;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + 1.0); // cos(0) at both ends
    for i in 1..n {
        s += (x * (i as f64 * h).sin()).cos();
    }
    s * h / PI
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
///
/// Subintervals narrower than 1e-12·(b − a) are accepted as is, so finite
/// jumps in the integrand cost only a bounded amount of refinement.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let min_width = 1e-12 * (b - a).abs();
    let mut evals = 3usize;
    let v = simpson_rec(&mut f, a, b, fa, fm, fb, whole, tol, min_width, &mut evals, 0)?;
    if !v.is_finite() {
        return Err(Error::Numerical("quadrature produced a non-finite value".into()));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    min_width: f64,
    evals: &mut usize,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if *evals > 20_000_000 {
        return Err(Error::Numerical("adaptive quadrature did not converge".into()));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth > 60 || (b - a).abs() < min_width || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, min_width, evals, depth + 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, min_width, evals, depth + 1)?)
}

/// Trapezoid rule over tabulated values on an increasing grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}
