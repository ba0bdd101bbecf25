//! Goodness-of-fit helpers used by the diagnostics.

/// One-sample Kolmogorov–Smirnov test against a continuous CDF. Returns
/// the statistic D and the asymptotic p-value with Stephens' small-sample
/// correction.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    (d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d))
}

/// P(K > λ) for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn survival_reference_values() {
        // Classical critical values: 1.358 at 5%, 1.628 at 1%.
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 2e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn uniform_sample_passes_and_shifted_fails() {
        let mut rng = rng_from_seed(4);
        let u: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let (_, p) = ks_one_sample(&u, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.01);
        let (_, p) = ks_one_sample(&u, |x| (x * 1.1).clamp(0.0, 1.0));
        assert!(p < 1e-6);
    }
}
