//! Derivative-free optimizers: golden-section search, Nelder–Mead, and
//! Latin-hypercube starting designs.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes a unimodal function on [a, b] to absolute tolerance `tol`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Minimum {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut evals = 2;
    while b - a > tol && evals < 10_000 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    Minimum { x: vec![x], value, evaluations: evals, converged: b - a <= tol }
}

/// Grid scan over [a, b] followed by golden section around the best node;
/// guards against local optima of mildly multimodal objectives.
pub fn scan_then_golden(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, nodes: usize, tol: f64) -> Minimum {
    let nodes = nodes.max(3);
    let step = (b - a) / (nodes - 1) as f64;
    let vals: Vec<f64> = (0..nodes).map(|i| f(a + step * i as f64)).collect();
    let best = vals
        .iter()
        .enumerate()
        .min_by(|x, y| nan_last(*x.1, *y.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = a + step * best.saturating_sub(1) as f64;
    let hi = (a + step * (best + 1) as f64).min(b);
    let mut m = golden_section(&mut f, lo, hi, tol);
    if vals[best] < m.value {
        m.x = vec![a + step * best as f64];
        m.value = vals[best];
    }
    m.evaluations += nodes;
    m
}

fn nan_last(a: f64, b: f64) -> std::cmp::Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        _ => a.total_cmp(&b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below
    /// `f_tol + f_rel·|f_best|`.
    pub f_tol: f64,
    pub f_rel: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evaluations: 2000, f_tol: 1e-12, f_rel: 0.0, x_tol: 1e-9, initial_step: 0.5 }
    }
}

/// Nelder–Mead with standard coefficients. Non-finite values count as +∞.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut evals = n + 1;
    let mut converged = false;
    while evals < opts.max_evaluations {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = vals[n] - vals[0];
        let diam = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= opts.f_tol + opts.f_rel * vals[0].abs()) || diam <= opts.x_tol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    vals[i] = eval(&v);
                    simplex[i] = v;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Minimum { x: simplex[best].clone(), value: vals[best], evaluations: evals, converged }
}

/// `n` Latin-hypercube points in [0, 1]^dim.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dim]; n];
    for j in 0..dim {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, &p) in perm.iter().enumerate() {
            out[i][j] = (p as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    out
}
