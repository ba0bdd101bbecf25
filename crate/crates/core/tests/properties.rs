//! Randomized invariants across the library.

use interrupted::base::BaseProcessModel;
use interrupted::condsim::LatentEnergy;
use interrupted::covariance::{check_dpp_existence, CorrelationModel, DppKernel};
use interrupted::field::{condition_on_values, sample_at_points, FieldLaw, GridLayout};
use interrupted::geometry::{ball_overlap_volume, unit_ball_volume, Point, PointPattern, ThinnedPair, Window};
use interrupted::inference::{cl2_pair_probabilities, fit_q_cl1};
use interrupted::linalg::SymMatrix;
use interrupted::rng::rng_from_seed;
use interrupted::selection::{RadiusLaw, SelectionModel};
use interrupted::special::linspace;
use interrupted::summaries::{estimate, Stat, StatOptions};
use interrupted::thinning::{simulate_triple, InterruptedModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn correlation(family: u8, scale: f64, shape: f64) -> CorrelationModel {
    match family % 3 {
        0 => CorrelationModel::gaussian(scale).unwrap(),
        1 => CorrelationModel::exponential(scale).unwrap(),
        _ => CorrelationModel::whittle_matern(scale, shape).unwrap(),
    }
}

fn random_pattern(n: usize, seed: u64) -> PointPattern {
    let w = Window::unit(2).unwrap();
    let mut rng = rng_from_seed(seed);
    PointPattern::new(w.clone(), (0..n).map(|_| w.uniform_point(&mut rng)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn overlap_endpoints_exact(d in 1e-3f64..10.0, dim in 1usize..=3) {
        prop_assert_eq!(ball_overlap_volume(2.0 * d, d, dim).unwrap(), 0.0);
        let full = unit_ball_volume(dim).unwrap() * d.powi(dim as i32);
        prop_assert!((ball_overlap_volume(0.0, d, dim).unwrap() - full).abs() <= 1e-14 * full);
    }

    #[test]
    fn correlation_is_one_at_origin_and_continuous(family in 0u8..3, scale in 1e-3f64..10.0, shape in 0.1f64..5.0, t in 1e-3f64..5.0) {
        let c = correlation(family, scale, shape);
        prop_assert_eq!(c.eval(0.0), 1.0);
        let r = t * scale;
        let h = 1e-9 * scale;
        prop_assert!((c.eval(r + h) - c.eval(r)).abs() < 1e-6);
        prop_assert!(c.eval(r) <= 1.0 && c.eval(r) >= 0.0);
    }

    #[test]
    fn spectral_density_nonnegative(family in 0u8..3, scale in 1e-3f64..1.0, shape in 0.1f64..5.0, x in 0.0f64..1e4, dim in 1usize..=3) {
        let c = correlation(family, scale, shape);
        prop_assert!(c.spectral_density(x, dim) >= 0.0);
    }

    #[test]
    fn dpp_gate_at_boundary(alpha in 1e-3f64..0.5) {
        let corr = CorrelationModel::gaussian(alpha).unwrap();
        let rho_max = 1.0 / (std::f64::consts::PI * alpha * alpha);
        let above = DppKernel::new(rho_max * (1.0 + 1e-6), corr).unwrap();
        let below = DppKernel::new(rho_max * (1.0 - 1e-6), corr).unwrap();
        prop_assert!(!check_dpp_existence(&above, 2).unwrap().admissible);
        prop_assert!(check_dpp_existence(&below, 2).unwrap().admissible);
    }

    #[test]
    fn matern_i_thinner_than_ii(rho in 1.0f64..5000.0, d in 1e-3f64..0.2, dim in 1usize..=3) {
        let i = BaseProcessModel::matern_i(rho, d).unwrap().intensity(dim).unwrap();
        let ii = BaseProcessModel::matern_ii(rho, d).unwrap().intensity(dim).unwrap();
        prop_assert!(i < ii);
    }

    #[test]
    fn m0_tends_to_one_and_is_bounded(q in 0.05f64..0.95, scale in 0.01f64..0.2, family in 0u8..2) {
        let corr = correlation(family, scale, 1.0);
        let chi2 = SelectionModel::chi2_with_q(1, q, corr).unwrap();
        let boolean = SelectionModel::boolean_with_q(q, RadiusLaw::Deterministic { radius: scale }, 2, false).unwrap();
        for m in [chi2, boolean] {
            let range = m.correlation_range().unwrap_or(scale);
            prop_assert!((m.m0(10.0 * range, 2).unwrap() - 1.0).abs() < 1e-6, "{}", m.name());
            for r in linspace(0.0, 3.0 * range, 1000) {
                prop_assert!(m.m0(r, 2).unwrap() <= 1.0 / q * (1.0 + 1e-12));
            }
        }
    }

    /// Monotone in k only for q ≥ √2 − 1; see `chi2_m0_not_monotone_in_k_for_small_q`.
    #[test]
    fn chi2_m0_decreases_in_k(q in (2f64.sqrt() - 1.0)..0.95, s in 0.01f64..0.2, t in 0.0f64..3.0) {
        let corr = CorrelationModel::gaussian(s).unwrap();
        let r = t * s;
        let vals: Vec<f64> = [1, 2, 3, 5, 10]
            .iter()
            .map(|&k| SelectionModel::chi2_with_q(k, q, corr).unwrap().m0(r, 2).unwrap())
            .collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn second_order_mixture_identity(q in 0.05f64..0.95, s in 0.01f64..0.2, rho in 10.0f64..1400.0, alpha in 0.005f64..0.015, boolean in any::<bool>()) {
        let base = BaseProcessModel::dpp(DppKernel::new(rho, CorrelationModel::gaussian(alpha).unwrap()).unwrap()).unwrap();
        let sel = if boolean {
            SelectionModel::boolean_with_q(q, RadiusLaw::Deterministic { radius: s }, 2, false).unwrap()
        } else {
            SelectionModel::chi2_with_q(1, q, CorrelationModel::gaussian(s).unwrap()).unwrap()
        };
        prop_assume!(base.validate(2).is_ok());
        let m = InterruptedModel::new(base, sel, 2).unwrap();
        for r in linspace(1e-4, 0.3, 50) {
            let lhs = q * q * m.pcf_x(r).unwrap() + 2.0 * q * (1.0 - q) * m.pcf_cross(r).unwrap() + (1.0 - q) * (1.0 - q) * m.pcf_xbar(r).unwrap();
            prop_assert!((lhs - m.pcf_y(r).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn cl2_probabilities_form_a_law(q in 1e-6f64..(1.0 - 1e-6), u in 0.0f64..1.0) {
        let m0 = u / q;
        let [a, b, c] = cl2_pair_probabilities(q, m0);
        prop_assert!((a + b + 2.0 * c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cl1_permutation_and_translation_invariant(nx in 1usize..60, nb in 0usize..60, seed in any::<u64>(), dx in -5.0f64..5.0) {
        let x = random_pattern(nx, seed);
        let b = random_pattern(nb, seed ^ 1);
        let q0 = fit_q_cl1(&ThinnedPair::new(x.clone(), b.clone()).unwrap()).unwrap().get("q");
        let shift = |p: &PointPattern| {
            let mut pts: Vec<Point> = p.points().iter().map(|v| [v[0] + dx, v[1], 0.0]).collect();
            pts.shuffle(&mut rng_from_seed(seed));
            PointPattern::new(p.window().translate(&[dx, 0.0]), pts).unwrap()
        };
        let q1 = fit_q_cl1(&ThinnedPair::new(shift(&x), shift(&b)).unwrap()).unwrap().get("q");
        prop_assert_eq!(q0, q1);
    }

    #[test]
    fn latent_energy_collapses(kappa in 0.01f64..10.0, z in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
        let n = z.len();
        let g = SymMatrix::from_fn(n, |i, j| if i == j { kappa } else { 0.0 });
        let e = LatentEnergy::new(&g, n, kappa).unwrap();
        let ss: f64 = z.iter().map(|v| v * v).sum();
        let want = 0.5 * (1.0 + 1.0 / kappa) * ss;
        prop_assert!((e.energy(&z) - want).abs() <= 1e-10 * want.max(1.0));
    }
}

/// Near R₀ = 0, ln M₀ ≈ ½k(1 − q^{2/k})²R₀², and k(1 − q^{2/k})² grows from
/// k = 1 to k = 2 exactly when (1 + q)² < 2.
#[test]
fn chi2_m0_not_monotone_in_k_for_small_q() {
    let corr = CorrelationModel::gaussian(0.05).unwrap();
    let m0 = |k, q: f64| SelectionModel::chi2_with_q(k, q, corr).unwrap().m0(0.1, 2).unwrap();
    assert!(m0(2, 0.05) > m0(1, 0.05));
    let q_star = 2f64.sqrt() - 1.0;
    assert!(m0(2, q_star + 1e-3) <= m0(1, q_star + 1e-3));
    assert!(m0(2, q_star - 1e-3) > m0(1, q_star - 1e-3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn summaries_ignore_point_order(seed in any::<u64>(), n in 20usize..120) {
        let p = random_pattern(n, seed);
        let mut pts = p.points().to_vec();
        pts.shuffle(&mut rng_from_seed(seed ^ 7));
        let q = PointPattern::new(p.window().clone(), pts).unwrap();
        let r = linspace(0.0, 0.2, 21);
        let opts = StatOptions::default();
        for stat in [Stat::Pcf, Stat::K, Stat::F, Stat::G, Stat::J] {
            let a = estimate(stat, &p, &r, &opts).unwrap().values;
            let b = estimate(stat, &q, &r, &opts).unwrap().values;
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u.is_nan() && v.is_nan()) || (u - v).abs() <= 1e-12 * u.abs().max(1.0), "{:?}", stat);
            }
        }
    }

    #[test]
    fn coupling_in_kappa_never_adds_points(seed in any::<u64>(), kappa in 0.1f64..5.0, factor in 1.0f64..4.0) {
        let w = Window::unit(2).unwrap();
        let base = BaseProcessModel::poisson(200.0).unwrap();
        let corr = CorrelationModel::gaussian(0.08).unwrap();
        let lo = InterruptedModel::new(base, SelectionModel::chi2(1, kappa, corr).unwrap(), 2).unwrap();
        let hi = InterruptedModel::new(base, SelectionModel::chi2(1, kappa * factor, corr).unwrap(), 2).unwrap();
        let a = simulate_triple(&lo, &w, seed).unwrap();
        let b = simulate_triple(&hi, &w, seed).unwrap();
        prop_assert_eq!(a.y.points(), b.y.points());
        for (ra, rb) in a.retained.iter().zip(&b.retained) {
            prop_assert!(*ra || !*rb);
        }
    }

    #[test]
    fn point_draws_follow_input_order(seed in any::<u64>(), n in 2usize..30) {
        let law = FieldLaw::new(1.0, CorrelationModel::exponential(0.1).unwrap()).unwrap();
        let locs: Vec<Point> = random_pattern(n, seed).points().to_vec();
        let a = sample_at_points(&law, &locs, seed).unwrap();
        let b = sample_at_points(&law, &locs, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn conditioning_is_idempotent(seed in any::<u64>(), n in 1usize..12) {
        let w = Window::unit(2).unwrap();
        let layout = GridLayout::square(w.clone(), 9).unwrap();
        let law = FieldLaw::new(2.0, CorrelationModel::exponential(0.2).unwrap()).unwrap();
        let locs: Vec<Point> = random_pattern(n, seed).points().to_vec();
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let first = condition_on_values(&law, &locs, &vals, &layout, seed).unwrap();
        // Conditioning again on the raster values of the first draw.
        let node_locs: Vec<Point> = layout.nodes();
        let second = condition_on_values(&law, &node_locs, &first.values, &layout, seed ^ 1).unwrap();
        for (u, v) in first.values.iter().zip(&second.values) {
            prop_assert!((u - v).abs() < 1e-8);
        }
    }
}
