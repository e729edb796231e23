//! Named test symbols on `T^n × Z^n`. Spatial dependence is through `x_1`
//! only, by trigonometric factors whose `x`-derivatives are registered.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbol::{MultiIndex, SeparableTerm, Symbol};
use crate::torus::bracket;

#[derive(Clone, Debug)]
pub struct GalleryEntry {
    pub symbol: Symbol,
    /// `ε` of the envelope `|Δ^α σ| <= C ⟨ξ⟩^{-nε/2 - (1-ε)|α|}` it satisfies.
    pub epsilon: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GalleryInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub const SYMBOL_GALLERY: &[GalleryInfo] = &[
    GalleryInfo { name: "identity", description: "σ = 1" },
    GalleryInfo {
        name: "mult_eps:<eps>",
        description: "⟨ξ⟩^{-nε/2} e^{iφ(ξ)}, φ = ⟨ξ⟩^ε (log⟨ξ⟩ at ε = 0)",
    },
    GalleryInfo {
        name: "xdep_eps:<eps>",
        description: "(1 + cos(2πx_1)/2) μ_ε(ξ) + sin(2πx_1)/2 conj(μ_ε(ξ)), μ_ε = mult_eps",
    },
    GalleryInfo {
        name: "xmix",
        description: "cos(2πx_1) ⟨ξ⟩^{-1/2} + (1 + sin(4πx_1)/3) e^{i ξ_1/⟨ξ⟩}",
    },
    GalleryInfo {
        name: "xphase",
        description: "exp(i cos(2πx_1) ξ_1/⟨ξ⟩), not separable",
    },
    GalleryInfo { name: "bracket:<m>", description: "⟨ξ⟩^m" },
    GalleryInfo { name: "control", description: "⟨ξ⟩^{1/2}, negative control" },
];

fn phase(eps: f64, b: f64) -> f64 {
    if eps == 0.0 {
        b.ln()
    } else {
        b.powf(eps)
    }
}

/// `⟨ξ⟩^{-nε/2} e^{iφ(ξ)}`.
fn mu(eps: f64, xi: &[f64]) -> Complex64 {
    let b = bracket(xi);
    Complex64::from_polar(b.powf(-(xi.len() as f64) * eps / 2.0), phase(eps, b))
}

/// `d^j/dx^j cos(2πk x + φ)`.
fn trig(k: f64, shift: f64, j: u32, x: f64) -> f64 {
    (2.0 * PI * k).powi(j as i32) * (2.0 * PI * k * x + shift + j as f64 * PI / 2.0).cos()
}

/// Order of `β` if it only differentiates in `x_1`.
fn x1_order(beta: &MultiIndex) -> Option<u32> {
    let e = beta.entries();
    e[1..].iter().all(|&v| v == 0).then_some(e[0])
}

fn parse_eps(name: &str, v: &str) -> Result<f64> {
    let eps: f64 = v
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad ε in '{name}'")))?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("'{name}' needs 0 <= ε < 1")));
    }
    Ok(eps)
}

pub fn symbol_gallery(name: &str, dim: usize) -> Result<GalleryEntry> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("gallery symbols need dimension 1..=3, got {dim}")));
    }
    let (base, param) = match name.split_once(':') {
        Some((b, p)) => (b, Some(p)),
        None => (name, None),
    };
    let n = dim as f64;
    match (base, param) {
        ("identity", None) => Ok(GalleryEntry {
            symbol: Symbol::constant(dim, Complex64::new(1.0, 0.0)).with_name("identity"),
            epsilon: Some(0.0),
        }),
        ("mult_eps", Some(v)) => {
            let eps = parse_eps(name, v)?;
            let symbol = Symbol::multiplier(dim, name, move |xi| mu(eps, xi))
                .with_class(-n * eps / 2.0, 1.0 - eps, 0.0);
            Ok(GalleryEntry { symbol, epsilon: Some(eps) })
        }
        ("xdep_eps", Some(v)) => {
            let eps = parse_eps(name, v)?;
            let terms = vec![
                SeparableTerm::new(
                    |x| Complex64::new(1.0 + 0.5 * (2.0 * PI * x[0]).cos(), 0.0),
                    move |xi| mu(eps, xi),
                ),
                SeparableTerm::new(
                    |x| Complex64::new(0.5 * (2.0 * PI * x[0]).sin(), 0.0),
                    move |xi| mu(eps, xi).conj(),
                ),
            ];
            let symbol = Symbol::separable(dim, name, terms)
                .with_x_derivative(move |beta, x, xi| match x1_order(beta) {
                    Some(0) => {
                        let c = 1.0 + 0.5 * (2.0 * PI * x[0]).cos();
                        let s = 0.5 * (2.0 * PI * x[0]).sin();
                        mu(eps, xi) * c + mu(eps, xi).conj() * s
                    }
                    Some(j) => {
                        let c = 0.5 * trig(1.0, 0.0, j, x[0]);
                        let s = 0.5 * trig(1.0, -PI / 2.0, j, x[0]);
                        mu(eps, xi) * c + mu(eps, xi).conj() * s
                    }
                    None => Complex64::default(),
                })
                .with_class(-n * eps / 2.0, 1.0 - eps, 0.0);
            Ok(GalleryEntry { symbol, epsilon: Some(eps) })
        }
        ("xmix", None) => {
            let m1 = |xi: &[f64]| Complex64::new(bracket(xi).powf(-0.5), 0.0);
            let m2 = |xi: &[f64]| Complex64::from_polar(1.0, xi[0] / bracket(xi));
            let terms = vec![
                SeparableTerm::new(|x| Complex64::new((2.0 * PI * x[0]).cos(), 0.0), m1),
                SeparableTerm::new(
                    |x| Complex64::new(1.0 + (4.0 * PI * x[0]).sin() / 3.0, 0.0),
                    m2,
                ),
            ];
            let symbol = Symbol::separable(dim, "xmix", terms)
                .with_x_derivative(move |beta, x, xi| match x1_order(beta) {
                    Some(j) => {
                        let c1 = trig(1.0, 0.0, j, x[0]);
                        let c2 = trig(2.0, -PI / 2.0, j, x[0]) / 3.0 + if j == 0 { 1.0 } else { 0.0 };
                        m1(xi) * c1 + m2(xi) * c2
                    }
                    None => Complex64::default(),
                })
                .with_class(0.0, 1.0, 0.0);
            Ok(GalleryEntry { symbol, epsilon: Some(0.0) })
        }
        ("xphase", None) => {
            let symbol = Symbol::closed(dim, "xphase", |x, xi| {
                Complex64::from_polar(1.0, (2.0 * PI * x[0]).cos() * xi[0] / bracket(xi))
            })
            .with_x_derivative(|beta, x, xi| {
                let h = xi[0] / bracket(xi);
                let c = (2.0 * PI * x[0]).cos();
                let sigma = Complex64::from_polar(1.0, c * h);
                let i = Complex64::i();
                match x1_order(beta) {
                    Some(0) => sigma,
                    Some(1) => i * h * trig(1.0, 0.0, 1, x[0]) * sigma,
                    Some(2) => {
                        let d1 = trig(1.0, 0.0, 1, x[0]);
                        (i * h * trig(1.0, 0.0, 2, x[0]) - h * h * d1 * d1) * sigma
                    }
                    Some(_) => Complex64::new(f64::NAN, f64::NAN),
                    None => Complex64::default(),
                }
            })
            .with_class(0.0, 1.0, 0.0);
            Ok(GalleryEntry { symbol, epsilon: Some(0.0) })
        }
        ("bracket", Some(v)) => {
            let m: f64 = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad order in '{name}'")))?;
            let symbol = Symbol::multiplier(dim, name, move |xi| Complex64::new(bracket(xi).powf(m), 0.0))
                .with_class(m, 1.0, 0.0);
            let epsilon = (m <= 0.0 && -2.0 * m / n < 1.0).then_some(0.0);
            Ok(GalleryEntry { symbol, epsilon })
        }
        ("control", None) => {
            let symbol = Symbol::multiplier(dim, "control", |xi| Complex64::new(bracket(xi).sqrt(), 0.0))
                .with_class(0.5, 1.0, 0.0);
            Ok(GalleryEntry { symbol, epsilon: None })
        }
        _ => Err(Error::Unknown {
            kind: "symbol",
            name: name.into(),
            available: SYMBOL_GALLERY.iter().map(|g| g.name).collect::<Vec<_>>().join(", "),
        }),
    }
}
