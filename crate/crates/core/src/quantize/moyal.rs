//! Moyal product on `R^2` by direct phase-space quadrature.
//!
//! With Weyl quantization `∫∫ e^{2πi(x-y)ξ} a((x+y)/2, ξ) f(y) dy dξ` the
//! product satisfying `(a#b)^w = a^w b^w` is
//!
//! `a#b(X) = 4 ∫∫ e^{-4πi σ(X-Y, X-Z)} a(Y) b(Z) dY dZ`,
//!
//! `σ((x,ξ),(y,η)) = yξ - xη`. It gives `x#ξ = xξ + i/(4π)` and
//! `[x^w, ξ^w] = (i/2π) Id`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::euclidean::{weyl_matrix, weyl_matrix_with, EuclideanGrid};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// Largest admissible number of quadrature terms `G^4` per evaluation.
pub const MOYAL_COST_LIMIT: f64 = 1e9;

/// `G` nodes `-L + i h`, `h = 2L/G`, on each phase axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid {
    points: usize,
    half_width: f64,
}

impl PhaseGrid {
    pub fn new(points: usize, half_width: f64) -> Result<Self> {
        if points < 4 {
            return Err(Error::InvalidGrid(format!("phase grid needs at least 4 points, got {points}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        let cost = (points as f64).powi(4);
        if cost > MOYAL_COST_LIMIT {
            return Err(Error::CostGuard(format!(
                "{points}^4 = {cost:.3e} quadrature terms exceed {MOYAL_COST_LIMIT:e}"
            )));
        }
        Ok(Self { points, half_width })
    }

    /// `L = (G/8)^{1/2}`: the step then matches the period of the phase, and
    /// `a#1 = a` holds exactly at the nodes.
    pub fn natural(points: usize) -> Result<Self> {
        Self::new(points, (points as f64 / 8.0).sqrt())
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }
}

struct Inner {
    grid: PhaseGrid,
    nodes: Vec<f64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    /// `E[υ][z] = e^{icυz}`, symmetric, also gives `F = conj(E)`.
    e: Vec<Complex64>,
}

const C: f64 = -4.0 * std::f64::consts::PI;

/// Sampled factors of `a#b`, evaluable at any phase point.
#[derive(Clone)]
pub struct MoyalProduct {
    inner: Arc<Inner>,
}

fn sample(s: &Symbol, nodes: &[f64]) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(nodes.len() * nodes.len());
    for &x in nodes {
        for &xi in nodes {
            let v = s.eval(&[x], &[xi])?;
            if !v.is_finite() {
                return Err(Error::NonFinite { node: vec![out.len() / nodes.len(), out.len() % nodes.len()] });
            }
            out.push(v);
        }
    }
    Ok(out)
}

pub fn moyal_product(a: &Symbol, b: &Symbol, grid: PhaseGrid) -> Result<MoyalProduct> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Unsupported("the Moyal product is implemented for n = 1".into()));
    }
    let g = grid.points;
    let nodes: Vec<f64> = (0..g).map(|i| grid.node(i)).collect();
    let mut e = vec![Complex64::default(); g * g];
    for (u, &nu) in nodes.iter().enumerate() {
        for (z, &nz) in nodes.iter().enumerate() {
            e[u * g + z] = Complex64::from_polar(1.0, C * nu * nz);
        }
    }
    Ok(MoyalProduct {
        inner: Arc::new(Inner {
            grid,
            a: sample(a, &nodes)?,
            b: sample(b, &nodes)?,
            nodes,
            e,
        }),
    })
}

impl MoyalProduct {
    pub fn grid(&self) -> PhaseGrid {
        self.inner.grid
    }

    /// `a#b(x, ξ)`, cost `2G^3`.
    pub fn eval(&self, x: f64, xi: f64) -> Complex64 {
        self.eval_row(x, &[xi])[0]
    }

    /// `a#b(x, ξ)` for every `ξ` in `xis`. The `x`-dependent contraction
    /// costs `2G^3` once; each `ξ` then costs `G^2`.
    pub fn eval_row(&self, x: f64, xis: &[f64]) -> Vec<Complex64> {
        let s = &*self.inner;
        let g = s.grid.points;
        let h = s.grid.step();
        let phase = |t: f64| Complex64::from_polar(1.0, C * t);
        let v: Vec<Complex64> = s.nodes.iter().map(|&w| phase(-x * w)).collect();
        let wq: Vec<Complex64> = s.nodes.iter().map(|&q| phase(x * q)).collect();
        // Q[y][z] = (Σ_υ a(y,υ) e^{-icxυ} E[υ][z]) (Σ_ζ F[y][ζ] b(z,ζ) e^{icxζ})
        let mut bt = vec![Complex64::default(); g * g];
        for z in 0..g {
            for q in 0..g {
                bt[z * g + q] = s.b[z * g + q] * wq[q];
            }
        }
        let mut qm = vec![Complex64::default(); g * g];
        let mut at = vec![Complex64::default(); g];
        let mut p = vec![Complex64::default(); g];
        for y in 0..g {
            for w in 0..g {
                at[w] = s.a[y * g + w] * v[w];
            }
            p.iter_mut().for_each(|c| *c = Complex64::default());
            for (w, &aw) in at.iter().enumerate() {
                let row = &s.e[w * g..(w + 1) * g];
                for (pc, ec) in p.iter_mut().zip(row) {
                    *pc += aw * ec;
                }
            }
            let frow = &s.e[y * g..(y + 1) * g];
            for z in 0..g {
                let brow = &bt[z * g..(z + 1) * g];
                let mut r = Complex64::default();
                for (f, bv) in frow.iter().zip(brow) {
                    r += f.conj() * bv;
                }
                qm[y * g + z] = p[z] * r;
            }
        }
        // Σ_{y,z} e^{icξ(y - z)} Q[y][z] depends on y - z only through the
        // node offset, so collapse Q onto its 2G - 1 diagonals first.
        let mut diag = vec![Complex64::default(); 2 * g - 1];
        for y in 0..g {
            for z in 0..g {
                diag[y + g - 1 - z] += qm[y * g + z];
            }
        }
        let scale = 4.0 * h.powi(4);
        xis.iter()
            .map(|&xi| {
                let mut acc = Complex64::default();
                for (d, &q) in diag.iter().enumerate() {
                    let off = (d as f64 - (g - 1) as f64) * h;
                    acc += phase(xi * off) * q;
                }
                acc * scale
            })
            .collect()
    }

    /// Values at every phase-grid node, row-major in `(x, ξ)`.
    pub fn table(&self) -> Vec<Complex64> {
        let nodes = &self.inner.nodes;
        let g = nodes.len();
        (0..g * g)
            .into_par_iter()
            .map(|i| self.eval(nodes[i / g], nodes[i % g]))
            .collect()
    }

    /// `a#b` as a closed-form symbol (each evaluation runs the quadrature).
    pub fn to_symbol(&self, name: impl Into<String>) -> Symbol {
        let p = self.clone();
        Symbol::closed(1, name, move |x, xi| p.eval(x[0], xi[0]))
    }
}

/// Normalized distance between the Weyl matrices of `a#b` and `a^w b^w`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionResidual {
    pub residual: f64,
    pub norm_a: f64,
    pub norm_b: f64,
}

pub fn composition_identity_residual(
    a: &Symbol,
    b: &Symbol,
    grid: &EuclideanGrid,
    phase: PhaseGrid,
) -> Result<CompositionResidual> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported("composition residual is implemented for n = 1".into()));
    }
    let ma = weyl_matrix(a, grid)?;
    let mb = weyl_matrix(b, grid)?;
    let c = moyal_product(a, b, phase)?;
    let mc = weyl_matrix_with(grid, |x, xis| {
        let xs: Vec<f64> = xis.iter().map(|v| v[0]).collect();
        Ok(c.eval_row(x[0], &xs))
    })?;
    let (na, nb) = (ma.max_abs(), mb.max_abs());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("zero operator in composition residual".into()));
    }
    let residual = mc.sub(&ma.matmul(&mb)).max_abs() / (na * nb);
    Ok(CompositionResidual {
        residual,
        norm_a: na,
        norm_b: nb,
    })
}
