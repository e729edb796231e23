use num_complex::Complex64;
use proptest::prelude::*;

use psido::certify::{band_probe, certify_holder, symbol_gallery, CertifyParams};
use psido::littlewood_paley::{band_project, besov_norm, dyadic_band, psi0, DyadicSystem};
use psido::metrics::{
    hypoelliptic_gallery, lambda_g, paper_metric, q0_eps0, smg_seminorm, symplectic_dual, MetricAt,
    SamplePlan, SplitMetric, Weight,
};
use psido::quantize::{apply_multiplier, apply_toroidal, freeze_node};
use psido::symbol::{difference, extend_symbol, restriction_check, MultiIndex, SeparableTerm, Symbol, SymbolTable};
use psido::torus::{bracket, forward_fft, inverse_fft, GridFunction, TorusGrid};

fn c64() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn grid_fn(dim: usize, n: usize) -> impl Strategy<Value = GridFunction> {
    let grid = TorusGrid::new(dim, n).unwrap();
    proptest::collection::vec(c64(), grid.len()).prop_map(move |v| GridFunction::new(grid, v).unwrap())
}

fn max_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values().iter().zip(b.values()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

fn power(m: f64) -> Symbol {
    Symbol::multiplier(1, "power", move |xi| Complex64::new(bracket(xi).powf(m), 0.0))
}

fn x_dep(k: f64, m: f64) -> Symbol {
    Symbol::separable(
        1,
        "xdep",
        vec![SeparableTerm::new(
            move |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k * x[0]),
            move |xi| Complex64::new(bracket(xi).powf(m), 0.0),
        )],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval_and_roundtrip(f in grid_fn(2, 8)) {
        let c = forward_fft(&f);
        let lhs: f64 = c.coeffs().iter().map(|v| v.norm_sqr()).sum();
        let rhs: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / 64.0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        prop_assert!(max_diff(&inverse_fft(&c), &f) < 1e-13);
    }

    #[test]
    fn real_functions_have_conjugate_symmetric_coefficients(v in proptest::collection::vec(-1.0..1.0f64, 16)) {
        let grid = TorusGrid::new(1, 16).unwrap();
        let f = GridFunction::new(grid, v.into_iter().map(|r| Complex64::new(r, 0.0)).collect()).unwrap();
        let c = forward_fft(&f);
        for k in -7..=7i64 {
            let (a, b) = (c.get(&[k]).unwrap(), c.get(&[-k]).unwrap());
            prop_assert!((a - b.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn frequency_map_is_a_bijection(dim in 1usize..=3, log_n in 3u32..=4) {
        let grid = TorusGrid::new(dim, 1 << log_n).unwrap();
        let half = grid.nyquist();
        for flat in 0..grid.len() {
            let k = grid.frequency(flat);
            prop_assert!(k.iter().all(|&v| -half <= v && v < half));
            prop_assert_eq!(grid.flat_of_frequency(&k).unwrap(), flat);
        }
    }

    #[test]
    fn toroidal_is_linear(f in grid_fn(1, 32), g in grid_fn(1, 32), c in c64(), k in -3.0..3.0f64) {
        let a = x_dep(k.round(), -0.5);
        let lhs = apply_toroidal(&a, &f.add(&g.scale(c)).unwrap()).unwrap();
        let rhs = apply_toroidal(&a, &f).unwrap().add(&apply_toroidal(&a, &g).unwrap().scale(c)).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn multipliers_commute_and_match_toroidal(f in grid_fn(1, 64), m1 in -1.0..0.5f64, m2 in -1.0..0.5f64) {
        let (a, b) = (power(m1), power(m2));
        let ab = apply_multiplier(&a, &apply_multiplier(&b, &f).unwrap()).unwrap();
        let ba = apply_multiplier(&b, &apply_multiplier(&a, &f).unwrap()).unwrap();
        prop_assert!(max_diff(&ab, &ba) < 1e-12);
        prop_assert!(max_diff(&apply_toroidal(&a, &f).unwrap(), &apply_multiplier(&a, &f).unwrap()) < 1e-12);
        for l in [0usize, 2, 4] {
            let p = band_project(l, &apply_multiplier(&a, &f).unwrap());
            let q = apply_multiplier(&a, &band_project(l, &f)).unwrap();
            prop_assert!(max_diff(&p, &q) < 1e-12);
        }
    }

    #[test]
    fn frozen_symbols_agree_on_the_diagonal(f in grid_fn(1, 32), k in -2.0..2.0f64) {
        let a = x_dep(k.round(), 0.3);
        let out = apply_toroidal(&a, &f).unwrap();
        for node in [0usize, 5, 17, 31] {
            let frozen = apply_multiplier(&freeze_node(&a, f.grid(), node).unwrap(), &f).unwrap();
            prop_assert!((frozen.values()[node] - out.values()[node]).norm() < 1e-10);
        }
    }

    #[test]
    fn dyadic_partition_and_supports(lam in 0.0..4096.0f64) {
        let sum: f64 = (0..=13).map(|l| dyadic_band(l, lam)).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        let p = psi0(lam);
        prop_assert!((0.0..=1.0).contains(&p));
        for big_l in 2..=10usize {
            let s = DyadicSystem::new(big_l).partial_sum(lam);
            prop_assert!((s - psi0(lam / 2f64.powi(big_l as i32))).abs() < 1e-14);
        }
        for l in 1..=12usize {
            let (lo, hi) = (2f64.powi(l as i32 - 1), 2f64.powi(l as i32 + 1));
            if lam <= lo || lam >= hi {
                prop_assert_eq!(dyadic_band(l, lam), 0.0);
            }
        }
    }

    #[test]
    fn far_bands_annihilate(f in grid_fn(1, 128), l in 0usize..6, gap in 2usize..4) {
        let p = band_project(l + gap, &band_project(l, &f));
        prop_assert!(p.values().iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn besov_is_a_norm(f in grid_fn(1, 64), g in grid_fn(1, 64), c in c64(), s in 0.1..0.9f64) {
        let sum = besov_norm(&f.add(&g).unwrap(), s);
        prop_assert!(sum <= (besov_norm(&f, s) + besov_norm(&g, s)) * (1.0 + 1e-12));
        let scaled = besov_norm(&f.scale(c), s);
        prop_assert!((scaled - c.norm() * besov_norm(&f, s)).abs() <= 1e-12 * scaled.max(1.0));
    }

    #[test]
    fn differences_compose(a1 in 0u32..3, a2 in 0u32..3, m in -2.0..0.0f64) {
        let grid = TorusGrid::new(1, 8).unwrap();
        let t = SymbolTable::tabulate(&power(m), grid, 16, 6).unwrap();
        let s = Symbol::from_table(t, "t");
        let mi = |v: u32| MultiIndex::new(vec![v]).unwrap();
        let two = difference(&difference(&s, &mi(a1)).unwrap(), &mi(a2)).unwrap();
        let one = difference(&s, &mi(a1 + a2)).unwrap();
        for k in -10..=10i64 {
            prop_assert!((two.at_freq(&[k]).unwrap() - one.at_freq(&[k]).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn extension_restricts_exactly(m in -1.0..0.0f64, phase in -1.0..1.0f64) {
        let grid = TorusGrid::new(1, 8).unwrap();
        let sym = Symbol::multiplier(1, "p", move |xi| Complex64::from_polar(bracket(xi).powf(m), phase * xi[0]));
        let table = Symbol::from_table(SymbolTable::tabulate(&sym, grid, 40, 0).unwrap(), "t");
        let ext = extend_symbol(&table).unwrap();
        prop_assert_eq!(restriction_check(&table, &ext).unwrap(), 0.0);
    }

    #[test]
    fn split_metric_identities(hx in proptest::collection::vec(-6.0..6.0f64, 1..4), seed in any::<u64>()) {
        let n = hx.len();
        let hx: Vec<f64> = hx.iter().map(|e| e.exp2()).collect();
        let hxi: Vec<f64> = hx.iter().enumerate().map(|(i, h)| ((seed >> (8 * i)) % 97 + 1) as f64 / (50.0 * h)).collect();
        let g = MetricAt::new(hx.clone(), hxi.clone()).unwrap();
        prop_assert_eq!(g.dual().dual(), g.clone());
        let max = hx.iter().zip(&hxi).map(|(a, b)| a * b).fold(0.0, f64::max);
        prop_assert!((g.lambda().powi(2) * max - 1.0).abs() < 1e-12);
        let split = SplitMetric::new(n, "c", move |_, _| Ok((hx.clone(), hxi.clone())));
        let pt = vec![0.5; 2 * n];
        prop_assert_eq!(symplectic_dual(&split, &pt).unwrap(), g.dual());
    }

    #[test]
    fn q0_ranges(n in 1usize..=12, r in 1usize..=12) {
        prop_assume!(r <= n);
        let (q0, eps0) = q0_eps0(n, r).unwrap();
        let n_r = num_rational::Ratio::from_integer(n as i64);
        prop_assert!(q0 >= n_r && q0 <= n_r * 2);
        prop_assert!(eps0 >= num_rational::Ratio::from_integer(0) && eps0 < num_rational::Ratio::new(1, 2));
        prop_assert_eq!(eps0, q0 / (n_r * 2) - num_rational::Ratio::new(1, 2));
    }

    #[test]
    fn uncertainty_on_paper_metrics(seed in any::<u64>()) {
        for name in ["kolmogorov", "mumford", "sum-of-squares"] {
            let model = hypoelliptic_gallery(name).unwrap();
            let (g, _) = paper_metric(&model, 1.0);
            for p in SamplePlan::new(model.dim, 64, seed).points() {
                prop_assert!(lambda_g(&g, &p).unwrap() >= 1.0 - 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn smg_seminorm_is_homogeneous(c in c64(), seed in 0u64..1000) {
        prop_assume!(c.norm() > 1e-3);
        let g = SplitMetric::rho_delta(1, 1.0, 0.0).unwrap();
        let w = Weight::bracket_xi(1, -1.0);
        let sigma = Symbol::closed(1, "s", |x, xi| Complex64::new(x[0].cos() / bracket(xi), 0.0));
        let scaled = Symbol::closed(1, "cs", move |x, xi| c * Complex64::new(x[0].cos() / bracket(xi), 0.0));
        let plan = SamplePlan::new(1, 64, seed);
        let a = smg_seminorm(&sigma, &w, &g, 2, &plan).unwrap();
        let b = smg_seminorm(&scaled, &w, &g, 2, &plan).unwrap();
        for (x, y) in a.constants.iter().zip(&b.constants) {
            prop_assert!((y - c.norm() * x).abs() <= 1e-9 * y.max(1e-12));
        }
    }

    #[test]
    fn probes_are_reproducible(l in 1u32..=5, seed in any::<u64>()) {
        let grid = TorusGrid::new(1, 128).unwrap();
        let (a, b) = (band_probe(l, &grid, seed).unwrap(), band_probe(l, &grid, seed).unwrap());
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn certification_is_deterministic_and_positive(seed in any::<u64>()) {
        let e = symbol_gallery("xdep_eps:0.5", 1).unwrap();
        let p = CertifyParams::new(TorusGrid::new(1, 256).unwrap(), 0.5, 6, 2, seed);
        let a = certify_holder("a", &e.symbol, None, &p).unwrap();
        let b = certify_holder("a", &e.symbol, None, &p).unwrap();
        prop_assert_eq!(&a.bands, &b.bands);
        prop_assert!(a.bands.iter().all(|b| b.ratio > 0.0 && b.probes.iter().all(|p| p.ratio > 0.0)));
        prop_assert!(a.bands.len() >= 5);
    }
}

#[test]
fn power_symbols_grow_at_their_order() {
    let grid = TorusGrid::new(1, 1024).unwrap();
    for m in [0.25, 0.5, 1.0] {
        let mut p = CertifyParams::new(grid, 0.5, 8, 4, 11);
        p.l_min = 3;
        let r = certify_holder("pow", &power(m), None, &p).unwrap();
        assert!((0.9 * m..=1.1 * m).contains(&r.slope), "m={m} slope={}", r.slope);
    }
}
