//! Smooth extension of lattice symbols to real frequencies by cardinal
//! interpolation.
//!
//! The kernel is `θ(t) = ∫ φ(ω) e^{2πiωt} dω` with `φ(ω) = r(1 - |ω|)` on
//! `[-1, 1]`. Since `φ(ω) + φ(ω - 1) = 1` on `[0, 1]`, `θ(0) = 1` and
//! `θ(j) = 0` at every other integer; `φ` being flat at `0` and `±1` gives
//! rapid decay and exact reproduction of polynomials.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Symbol, SymbolTable};
use crate::littlewood_paley::smooth_step;
use crate::error::{Error, Result};

/// Truncation radius of the kernel, in lattice units.
pub const KERNEL_RADIUS: i64 = 24;

const STEPS_PER_UNIT: usize = 512;
const QUAD_INTERVALS: usize = 2048;

struct KernelTable {
    value: Vec<f64>,
    slope: Vec<f64>,
}

fn kernel_table() -> &'static KernelTable {
    static TABLE: OnceLock<KernelTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / QUAD_INTERVALS as f64;
        let nodes: Vec<(f64, f64)> = (0..=QUAD_INTERVALS)
            .map(|q| {
                let w = q as f64 * h;
                let trap = if q == 0 || q == QUAD_INTERVALS { 0.5 } else { 1.0 };
                (w, trap * h * smooth_step(1.0 - w))
            })
            .collect();
        let count = KERNEL_RADIUS as usize * STEPS_PER_UNIT + 1;
        let pairs: Vec<(f64, f64)> = (0..count)
            .into_par_iter()
            .map(|i| {
                if i % STEPS_PER_UNIT == 0 {
                    let v = if i == 0 { 1.0 } else { 0.0 };
                    let t = (i / STEPS_PER_UNIT) as f64;
                    let s: f64 = nodes
                        .iter()
                        .map(|&(w, c)| c * w * (2.0 * std::f64::consts::PI * w * t).sin())
                        .sum();
                    return (v, -4.0 * std::f64::consts::PI * s);
                }
                let t = i as f64 / STEPS_PER_UNIT as f64;
                let (mut v, mut s) = (0.0, 0.0);
                for &(w, c) in &nodes {
                    let (sn, cs) = (2.0 * std::f64::consts::PI * w * t).sin_cos();
                    v += c * cs;
                    s += c * w * sn;
                }
                (2.0 * v, -4.0 * std::f64::consts::PI * s)
            })
            .collect();
        KernelTable {
            value: pairs.iter().map(|p| p.0).collect(),
            slope: pairs.iter().map(|p| p.1).collect(),
        }
    })
}

/// `(θ(t), θ'(t))`, zero for `|t| >= KERNEL_RADIUS`.
pub fn cardinal_kernel(t: f64) -> (f64, f64) {
    let r = t.abs();
    if r >= KERNEL_RADIUS as f64 {
        return (0.0, 0.0);
    }
    let tab = kernel_table();
    let h = 1.0 / STEPS_PER_UNIT as f64;
    let pos = r * STEPS_PER_UNIT as f64;
    let i = (pos.floor() as usize).min(tab.value.len() - 2);
    let u = pos - i as f64;
    if u == 0.0 {
        let d = tab.slope[i];
        return (tab.value[i], if t < 0.0 { -d } else { d });
    }
    let (y0, y1) = (tab.value[i], tab.value[i + 1]);
    let (m0, m1) = (tab.slope[i] * h, tab.slope[i + 1] * h);
    let (u2, u3) = (u * u, u * u * u);
    let v = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
        + (u3 - 2.0 * u2 + u) * m0
        + (-2.0 * u3 + 3.0 * u2) * y1
        + (u3 - u2) * m1;
    let dv = ((6.0 * u2 - 6.0 * u) * y0
        + (3.0 * u2 - 4.0 * u + 1.0) * m0
        + (-6.0 * u2 + 6.0 * u) * y1
        + (3.0 * u2 - 2.0 * u) * m1)
        / h;
    (v, if t < 0.0 { -dv } else { dv })
}

/// Real-`ξ` extension `a'(x, ξ) = Σ_k θ(ξ - k) a(x, k)` of a table.
#[derive(Clone, Debug)]
pub struct Extension {
    table: SymbolTable,
}

impl Extension {
    pub fn new(table: SymbolTable) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    fn axis_weights(&self, axis: usize, xi: f64, derivative: bool) -> Result<Vec<(i64, f64)>> {
        let (lo, hi) = (self.table.lo()[axis], self.table.hi()[axis]);
        let near = xi.round();
        if !derivative && (xi - near).abs() <= 1e-12 {
            let k = near as i64;
            if k < lo || k > hi {
                return Err(Error::OutOfRange { axis, freq: k, lo, hi });
            }
            return Ok(vec![(k, 1.0)]);
        }
        let first = (xi - KERNEL_RADIUS as f64).ceil() as i64;
        let last = (xi + KERNEL_RADIUS as f64).floor() as i64;
        if first < lo || last > hi {
            return Err(Error::OutOfRange {
                axis,
                freq: xi.floor() as i64,
                lo: lo + KERNEL_RADIUS,
                hi: hi - KERNEL_RADIUS,
            });
        }
        Ok((first..=last)
            .map(|k| {
                let (v, d) = cardinal_kernel(xi - k as f64);
                (k, if derivative { d } else { v })
            })
            .filter(|&(_, w)| w != 0.0)
            .collect())
    }

    fn contract(&self, row: usize, weights: &[Vec<(i64, f64)>]) -> Result<Complex64> {
        let dim = weights.len();
        let mut idx = vec![0usize; dim];
        let mut k = vec![0i64; dim];
        let mut acc = Complex64::default();
        if weights.iter().any(|w| w.is_empty()) {
            return Ok(acc);
        }
        loop {
            let mut w = 1.0;
            for d in 0..dim {
                let (kk, ww) = weights[d][idx[d]];
                k[d] = kk;
                w *= ww;
            }
            acc += self.table.get_row(row, &k)? * w;
            let mut d = dim;
            loop {
                if d == 0 {
                    return Ok(acc);
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < weights[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// `a'` at table row `row` and real frequency `ξ`.
    pub fn eval_row(&self, row: usize, xi: &[f64]) -> Result<Complex64> {
        let w: Result<Vec<_>> = xi
            .iter()
            .enumerate()
            .map(|(d, &v)| self.axis_weights(d, v, false))
            .collect();
        self.contract(row, &w?)
    }

    pub(crate) fn eval_node(&self, row: usize, xi: &[f64]) -> Result<Complex64> {
        self.eval_row(row, xi)
    }

    /// `∂_{ξ_axis} a'` at table row `row`.
    pub fn derivative_row(&self, row: usize, axis: usize, xi: &[f64]) -> Result<Complex64> {
        let w: Result<Vec<_>> = xi
            .iter()
            .enumerate()
            .map(|(d, &v)| self.axis_weights(d, v, d == axis))
            .collect();
        self.contract(row, &w?)
    }
}

/// Extends a tabulated symbol to real frequencies.
pub fn extend_symbol(a: &Symbol) -> Result<Symbol> {
    let table = a.table().ok_or_else(|| {
        Error::Unsupported(format!("extension needs a tabulated symbol, '{}' is not", a.name()))
    })?;
    Ok(Symbol::from_extension(
        Extension::new(table.clone()),
        format!("ext {}", a.name()),
    ))
}

/// `max |a(x, k) - a'(x, k)|` over every row and lattice point of the table.
pub fn restriction_check(a: &Symbol, extended: &Symbol) -> Result<f64> {
    let table = a
        .table()
        .ok_or_else(|| Error::Unsupported("restriction check needs a tabulated symbol".into()))?;
    let ext = extended
        .extension()
        .ok_or_else(|| Error::Unsupported("restriction check needs an extended symbol".into()))?;
    let dim = table.grid().dim();
    let blen = table.box_len();
    let mut worst: f64 = 0.0;
    let mut k = vec![0i64; dim];
    let mut kf = vec![0.0; dim];
    for row in 0..table.rows() {
        for b in 0..blen {
            super::box_freq(table.lo(), table.hi(), b, &mut k);
            for d in 0..dim {
                kf[d] = k[d] as f64;
            }
            let ext_row = if ext.table().rows() == 1 { 0 } else { row };
            let diff = table.get_row(row, &k)? - ext.eval_row(ext_row, &kf)?;
            worst = worst.max(diff.norm());
        }
    }
    Ok(worst)
}
