use num_complex::Complex64;
use num_rational::Ratio;

use psido::certify::{certify_corollary_m, certify_graded, symbol_gallery, CertifyParams, GradingWeight, Verdict};
use psido::littlewood_paley::{band_project, dyadic_band, DyadicSystem};
use psido::metrics::{hypoelliptic_gallery, lambda_g, paper_metric, SplitMetric};
use psido::torus::{bracket, GridFunction, SpectralCoeffs, TorusGrid};

#[test]
fn partition_of_unity_at_a_point() {
    let sum: f64 = (0..=6).map(|l| dyadic_band(l, 3.7)).sum();
    assert_eq!(sum, 1.0);
    assert_eq!(DyadicSystem::new(6).partial_sum(3.7), 1.0);
}

#[test]
fn band_projections_resum_band_limited_functions() {
    let grid = TorusGrid::new(2, 64).unwrap();
    let mut c = SpectralCoeffs::zeros(grid);
    for (i, k) in [[1, 0], [3, -2], [-7, 5], [12, 9], [-20, 3]].iter().enumerate() {
        c.set(k, Complex64::new(1.0 + i as f64, -0.5 * i as f64)).unwrap();
    }
    let f = psido::torus::inverse_fft(&c);
    let top = 5;
    let mut acc = GridFunction::zeros(grid);
    for l in 0..=top {
        acc = acc.add(&band_project(l, &f)).unwrap();
    }
    let err = acc.sub(&f).unwrap().values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");
}

#[test]
fn uncertainty_bound_examples() {
    let g = SplitMetric::rho_delta(1, 1.0, 0.0).unwrap();
    for xi in [0.0, 1.0, 7.5, -300.0] {
        let lam = lambda_g(&g, &[0.2, xi]).unwrap();
        assert!((lam - bracket(&[xi])).abs() < 1e-12 * lam);
    }
    assert_eq!(lambda_g(&g, &[0.0, 0.0]).unwrap(), 1.0);
    let (pg, _) = paper_metric(&hypoelliptic_gallery("laplacian:1").unwrap(), 1.0);
    for xi in [0.0, 2.0, 40.0] {
        let b = bracket(&[xi]);
        let lam = lambda_g(&pg, &[0.3, xi]).unwrap();
        assert!((lam - (xi * xi + b) / b).abs() < 1e-12 * lam);
    }
}

#[test]
fn elliptic_models_have_vanishing_eps0() {
    for n in 1..=3 {
        let m = hypoelliptic_gallery(&format!("laplacian:{n}")).unwrap();
        assert_eq!(m.eps0, Ratio::from_integer(0));
    }
    let grid = TorusGrid::new(1, 256).unwrap();
    let p = CertifyParams::new(grid, 0.5, 6, 2, 1);
    let id = symbol_gallery("identity", 1).unwrap().symbol;
    let lap = hypoelliptic_gallery("laplacian:1").unwrap();
    assert!(certify_graded("e", &id, 0.1, 0.0, GradingWeight::Model(lap.clone()), &p).is_err());
    let r = certify_graded("e", &id, 0.0, 0.0, GradingWeight::Model(lap), &p).unwrap();
    assert_eq!((r.gamma, r.verdict), (Some(0.0), Verdict::Bounded));
}

#[test]
fn corollary_boundary_cases() {
    let grid = TorusGrid::new(1, 256).unwrap();
    let p = CertifyParams::new(grid, 0.5, 6, 2, 1);
    let id = symbol_gallery("identity", 1).unwrap().symbol;
    let a = certify_corollary_m("a", &id, 0.0, 1.0, 0.0, 0, &p).unwrap();
    assert!(a.hypothesis.unwrap().holds && a.verdict == Verdict::Bounded);
    let b = certify_corollary_m("b", &id, 0.25, 0.5, 0.0, 0, &p).unwrap();
    let h = b.hypothesis.unwrap();
    assert!(h.holds && (h.required - 0.25).abs() < 1e-15);
    let c = certify_corollary_m("c", &id, 0.0, 0.5, 0.0, 0, &p).unwrap();
    assert!(!c.hypothesis.unwrap().holds && c.verdict == Verdict::Info);
}
