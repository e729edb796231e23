//! Symbols `a(x, ξ)` on `T^n × Z^n` (and their real-`ξ` counterparts), the
//! forward difference calculus in `ξ` and spectral/analytic `x`-derivatives.

mod expr;
mod extend;
mod seminorm;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{forward_fft, inverse_fft, GridFunction, SpectralCoeffs, TorusGrid};

pub use expr::{parse_expression, symbol_from_expression, Expr};
pub use extend::{cardinal_kernel, extend_symbol, restriction_check, Extension, KERNEL_RADIUS};
pub use seminorm::{
    fefferman_seminorm, scan_drift, toroidal_seminorm, ClassSpec, FeffermanReport, ScanPlan,
    SeminormEntry, SeminormReport,
};

/// Cap on `|α|` and `|β|`.
pub const MAX_ORDER: u32 = 8;

/// Multi-index `α ∈ N_0^n` with `|α| <= 8`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        let order: u32 = entries.iter().sum();
        if order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "multi-index order {order} exceeds {MAX_ORDER}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// `e_axis` scaled by `k`.
    pub fn axis(dim: usize, axis: usize, k: u32) -> Result<Self> {
        let mut v = vec![0; dim];
        v[axis] = k;
        Self::new(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Every multi-index of dimension `dim` with order at most `max_order`,
    /// sorted by order and then lexicographically.
    pub fn enumerate(dim: usize, max_order: u32) -> Vec<Self> {
        fn rec(dim: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if cur.len() == dim {
                out.push(cur.clone());
                return;
            }
            for k in 0..=left {
                cur.push(k);
                rec(dim, left - k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(dim, max_order.min(MAX_ORDER), &mut Vec::new(), &mut out);
        let mut v: Vec<Self> = out.into_iter().map(Self).collect();
        v.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Declared class metadata `S^m_{ρ,δ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMeta {
    pub order: f64,
    pub rho: f64,
    pub delta: f64,
}

pub type EvalFn = dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync;
pub type XDerivFn = dyn Fn(&MultiIndex, &[f64], &[f64]) -> Complex64 + Send + Sync;
pub type FactorFn = dyn Fn(&[f64]) -> Complex64 + Send + Sync;

/// One term `c(x) m(ξ)` of a declared separable symbol.
#[derive(Clone)]
pub struct SeparableTerm {
    pub x_factor: Arc<FactorFn>,
    pub xi_factor: Arc<FactorFn>,
}

impl SeparableTerm {
    pub fn new(
        x_factor: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
        xi_factor: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            x_factor: Arc::new(x_factor),
            xi_factor: Arc::new(xi_factor),
        }
    }
}

#[derive(Clone)]
struct ClosedForm {
    eval: Arc<EvalFn>,
    dx: Option<Arc<XDerivFn>>,
    x_independent: bool,
    separable: Option<Arc<[SeparableTerm]>>,
}

#[derive(Clone)]
enum Backend {
    Closed(ClosedForm),
    Table(Arc<SymbolTable>),
    Extended(Arc<Extension>),
}

/// A symbol `a(x, ξ)` backed by a closed-form evaluator, a lattice table, or
/// the smooth extension of a table.
#[derive(Clone)]
pub struct Symbol {
    dim: usize,
    name: String,
    class: Option<ClassMeta>,
    backend: Backend,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.backend {
            Backend::Closed(_) => "closed",
            Backend::Table(_) => "table",
            Backend::Extended(_) => "extended",
        };
        f.debug_struct("Symbol")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("backend", &kind)
            .field("class", &self.class)
            .finish()
    }
}

impl Symbol {
    /// Closed-form symbol with no registered `x`-derivatives.
    pub fn closed(
        dim: usize,
        name: impl Into<String>,
        eval: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            name: name.into(),
            class: None,
            backend: Backend::Closed(ClosedForm {
                eval: Arc::new(eval),
                dx: None,
                x_independent: false,
                separable: None,
            }),
        }
    }

    /// Fourier multiplier `m(ξ)`. Declared separable, so quantization takes
    /// the FFT path.
    pub fn multiplier(
        dim: usize,
        name: impl Into<String>,
        m: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let m: Arc<FactorFn> = Arc::new(m);
        let eval_m = m.clone();
        let one: Arc<FactorFn> = Arc::new(|_: &[f64]| Complex64::new(1.0, 0.0));
        Self {
            dim,
            name: name.into(),
            class: None,
            backend: Backend::Closed(ClosedForm {
                eval: Arc::new(move |_x: &[f64], xi: &[f64]| eval_m(xi)),
                dx: None,
                x_independent: true,
                separable: Some(Arc::from(vec![SeparableTerm {
                    x_factor: one,
                    xi_factor: m,
                }])),
            }),
        }
    }

    /// `Σ_r c_r(x) m_r(ξ)`, declared separable by the caller.
    pub fn separable(dim: usize, name: impl Into<String>, terms: Vec<SeparableTerm>) -> Self {
        let terms: Arc<[SeparableTerm]> = Arc::from(terms);
        let t = terms.clone();
        Self {
            dim,
            name: name.into(),
            class: None,
            backend: Backend::Closed(ClosedForm {
                eval: Arc::new(move |x: &[f64], xi: &[f64]| {
                    t.iter().map(|t| (t.x_factor)(x) * (t.xi_factor)(xi)).sum()
                }),
                dx: None,
                x_independent: false,
                separable: Some(terms),
            }),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        Self::multiplier(dim, format!("{c}"), move |_| c)
    }

    pub fn from_table(table: SymbolTable, name: impl Into<String>) -> Self {
        Self {
            dim: table.grid.dim(),
            name: name.into(),
            class: None,
            backend: Backend::Table(Arc::new(table)),
        }
    }

    pub(crate) fn from_extension(ext: Extension, name: String) -> Self {
        Self {
            dim: ext.table().grid().dim(),
            name,
            class: None,
            backend: Backend::Extended(Arc::new(ext)),
        }
    }

    /// Registers the analytic `∂_x^β a` used by [`x_derivative`].
    pub fn with_x_derivative(
        mut self,
        dx: impl Fn(&MultiIndex, &[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        if let Backend::Closed(c) = &mut self.backend {
            c.dx = Some(Arc::new(dx));
        }
        self
    }

    /// Marks a closed form as independent of `x`.
    pub fn x_independent(mut self) -> Self {
        if let Backend::Closed(c) = &mut self.backend {
            c.x_independent = true;
        }
        self
    }

    pub fn with_class(mut self, order: f64, rho: f64, delta: f64) -> Self {
        self.class = Some(ClassMeta { order, rho, delta });
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> Option<ClassMeta> {
        self.class
    }

    pub fn is_x_independent(&self) -> bool {
        match &self.backend {
            Backend::Closed(c) => c.x_independent,
            Backend::Table(t) => t.rows == 1,
            Backend::Extended(e) => e.table().rows == 1,
        }
    }

    pub fn separable_terms(&self) -> Option<&[SeparableTerm]> {
        match &self.backend {
            Backend::Closed(c) => c.separable.as_deref(),
            _ => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.backend, Backend::Closed(_))
    }

    pub fn table(&self) -> Option<&SymbolTable> {
        match &self.backend {
            Backend::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn extension(&self) -> Option<&Extension> {
        match &self.backend {
            Backend::Extended(e) => Some(e),
            _ => None,
        }
    }

    fn check_dim(&self, len: usize, what: &str) -> Result<()> {
        if len != self.dim {
            return Err(Error::InvalidArgument(format!(
                "{what} has dimension {len}, symbol has {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Evaluates at a real point `(x, ξ)`. Tables accept only grid nodes and
    /// integer frequencies; extensions accept grid nodes and real `ξ`.
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        self.check_dim(x.len(), "x")?;
        self.check_dim(xi.len(), "ξ")?;
        match &self.backend {
            Backend::Closed(c) => Ok((c.eval)(x, xi)),
            Backend::Table(t) => {
                let node = t.node_of(x)?;
                let k = integer_frequency(xi)?;
                t.get(node, &k)
            }
            Backend::Extended(e) => {
                let node = e.table().node_of(x)?;
                e.eval_node(node, xi)
            }
        }
    }

    /// Evaluates at grid node `flat` of `grid` and lattice frequency `ξ`.
    pub fn at_node(&self, grid: &TorusGrid, flat: usize, xi: &[i64]) -> Result<Complex64> {
        self.check_dim(xi.len(), "ξ")?;
        match &self.backend {
            Backend::Closed(c) => {
                let mut xb = [0.0; 3];
                let mut kb = [0.0; 3];
                let (x, k) = node_and_freq(grid, flat, xi, &mut xb, &mut kb);
                Ok((c.eval)(x, k))
            }
            Backend::Table(t) => {
                let row = t.row_for(grid, flat)?;
                t.get_row(row, xi)
            }
            Backend::Extended(e) => {
                let row = e.table().row_for(grid, flat)?;
                let k: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
                e.eval_row(row, &k)
            }
        }
    }

    /// Value of an `x`-independent symbol at `ξ`.
    pub fn at_freq(&self, xi: &[i64]) -> Result<Complex64> {
        match &self.backend {
            Backend::Closed(c) => {
                let x = [0.0; 3];
                let k: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
                Ok((c.eval)(&x[..self.dim], &k))
            }
            Backend::Table(t) => t.get_row(0, xi),
            Backend::Extended(e) => {
                let k: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
                e.eval_row(0, &k)
            }
        }
    }
}

fn node_and_freq<'a>(
    grid: &TorusGrid,
    flat: usize,
    xi: &[i64],
    xb: &'a mut [f64; 3],
    kb: &'a mut [f64; 3],
) -> (&'a [f64], &'a [f64]) {
    let dim = grid.dim();
    let n = grid.points();
    let mut rest = flat;
    for d in (0..dim).rev() {
        xb[d] = (rest % n) as f64 / n as f64;
        rest /= n;
    }
    for (d, &k) in xi.iter().enumerate() {
        kb[d] = k as f64;
    }
    (&xb[..dim], &kb[..xi.len()])
}

fn integer_frequency(xi: &[f64]) -> Result<Vec<i64>> {
    xi.iter()
        .map(|&v| {
            let r = v.round();
            if (v - r).abs() > 1e-12 {
                Err(Error::Unsupported(format!(
                    "tabulated symbol evaluated at non-integer frequency {v}"
                )))
            } else {
                Ok(r as i64)
            }
        })
        .collect()
}

/// Values of a symbol on grid nodes × an integer frequency box
/// `lo_d <= ξ_d <= hi_d`. A table with a single row is `x`-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    grid: TorusGrid,
    lo: Vec<i64>,
    hi: Vec<i64>,
    rows: usize,
    values: Vec<Complex64>,
}

impl SymbolTable {
    fn check_box(grid: &TorusGrid, lo: &[i64], hi: &[i64]) -> Result<()> {
        if lo.len() != grid.dim() || hi.len() != grid.dim() {
            return Err(Error::InvalidArgument("frequency box dimension mismatch".into()));
        }
        if let Some(d) = (0..lo.len()).find(|&d| lo[d] > hi[d]) {
            return Err(Error::InvalidArgument(format!(
                "empty frequency range on axis {d}: [{}, {}]",
                lo[d], hi[d]
            )));
        }
        Ok(())
    }

    fn box_len_of(lo: &[i64], hi: &[i64]) -> usize {
        lo.iter().zip(hi).map(|(l, h)| (h - l + 1) as usize).product()
    }

    /// Builds a table from `f(row, ξ)`; `x_independent` stores a single row.
    pub fn from_fn(
        grid: TorusGrid,
        lo: Vec<i64>,
        hi: Vec<i64>,
        x_independent: bool,
        mut f: impl FnMut(usize, &[i64]) -> Complex64,
    ) -> Result<Self> {
        Self::check_box(&grid, &lo, &hi)?;
        let rows = if x_independent { 1 } else { grid.len() };
        let blen = Self::box_len_of(&lo, &hi);
        let mut values = Vec::with_capacity(rows * blen);
        let mut xi = vec![0i64; grid.dim()];
        for row in 0..rows {
            for b in 0..blen {
                box_freq(&lo, &hi, b, &mut xi);
                let v = f(row, &xi);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        node: grid.multi_index(row),
                    });
                }
                values.push(v);
            }
        }
        Ok(Self {
            grid,
            lo,
            hi,
            rows,
            values,
        })
    }

    /// Tabulates `sym` over `|ξ_d| <= xi_max` plus `margin` look-ahead
    /// columns on the upper side of every axis.
    pub fn tabulate(sym: &Symbol, grid: TorusGrid, xi_max: i64, margin: i64) -> Result<Self> {
        let lo = vec![-xi_max; grid.dim()];
        let hi = vec![xi_max + margin; grid.dim()];
        let xind = sym.is_x_independent();
        let mut err = None;
        let t = Self::from_fn(grid, lo, hi, xind, |row, xi| match sym.at_node(&grid, row, xi) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                Complex64::default()
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(t),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn box_len(&self) -> usize {
        Self::box_len_of(&self.lo, &self.hi)
    }

    pub fn contains(&self, xi: &[i64]) -> bool {
        xi.iter()
            .enumerate()
            .all(|(d, &k)| k >= self.lo[d] && k <= self.hi[d])
    }

    fn box_index(&self, xi: &[i64]) -> Result<usize> {
        let mut idx = 0usize;
        for (d, &k) in xi.iter().enumerate() {
            if k < self.lo[d] || k > self.hi[d] {
                return Err(Error::OutOfRange {
                    axis: d,
                    freq: k,
                    lo: self.lo[d],
                    hi: self.hi[d],
                });
            }
            idx = idx * (self.hi[d] - self.lo[d] + 1) as usize + (k - self.lo[d]) as usize;
        }
        Ok(idx)
    }

    fn row_for(&self, grid: &TorusGrid, flat: usize) -> Result<usize> {
        if *grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "table lives on {:?}, requested {:?}",
                self.grid, grid
            )));
        }
        Ok(if self.rows == 1 { 0 } else { flat })
    }

    fn node_of(&self, x: &[f64]) -> Result<usize> {
        let n = self.grid.points() as f64;
        let mut idx = Vec::with_capacity(x.len());
        for &v in x {
            let t = v.rem_euclid(1.0) * n;
            let r = t.round();
            if (t - r).abs() > 1e-9 {
                return Err(Error::Unsupported(format!(
                    "tabulated symbol evaluated off-grid at x = {v}"
                )));
            }
            idx.push((r as usize) % self.grid.points());
        }
        Ok(if self.rows == 1 {
            0
        } else {
            self.grid.flat_index(&idx)
        })
    }

    pub fn get_row(&self, row: usize, xi: &[i64]) -> Result<Complex64> {
        let b = self.box_index(xi)?;
        Ok(self.values[row * self.box_len() + b])
    }

    /// Value at grid node `flat` (ignored for single-row tables).
    pub fn get(&self, flat: usize, xi: &[i64]) -> Result<Complex64> {
        let row = if self.rows == 1 { 0 } else { flat };
        self.get_row(row, xi)
    }
}

/// Frequency at box position `b` (row-major, axis 0 slowest).
fn box_freq(lo: &[i64], hi: &[i64], mut b: usize, out: &mut [i64]) {
    for d in (0..lo.len()).rev() {
        let w = (hi[d] - lo[d] + 1) as usize;
        out[d] = lo[d] + (b % w) as i64;
        b /= w;
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(γ, (-1)^{|α-γ|} C(α, γ))` for `0 <= γ <= α`.
fn difference_stencil(alpha: &MultiIndex) -> Vec<(Vec<f64>, f64)> {
    let dims = alpha.entries();
    let mut out = vec![(Vec::new(), 1.0)];
    for &a in dims {
        let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
        for (shift, w) in &out {
            for g in 0..=a {
                let mut s = shift.clone();
                s.push(g as f64);
                let sign = if (a - g) % 2 == 0 { 1.0 } else { -1.0 };
                next.push((s, w * sign * binomial(a, g)));
            }
        }
        out = next;
    }
    out
}

/// `Δ_ξ^α a` with `Δ_{ξ_j} a(ξ) = a(ξ + e_j) - a(ξ)`.
pub fn difference(a: &Symbol, alpha: &MultiIndex) -> Result<Symbol> {
    a.check_dim(alpha.dim(), "α")?;
    if alpha.order() == 0 {
        return Ok(a.clone());
    }
    let name = format!("Δ^{alpha} {}", a.name);
    match &a.backend {
        Backend::Closed(c) => {
            let stencil: Arc<[(Vec<f64>, f64)]> = Arc::from(difference_stencil(alpha));
            let f = c.eval.clone();
            let st = stencil.clone();
            let eval = move |x: &[f64], xi: &[f64]| {
                let mut k = [0.0; 3];
                let mut acc = Complex64::default();
                for (shift, w) in st.iter() {
                    for d in 0..xi.len() {
                        k[d] = xi[d] + shift[d];
                    }
                    acc += f(x, &k[..xi.len()]) * *w;
                }
                acc
            };
            let dx = c.dx.clone().map(|dx| {
                let st = stencil.clone();
                Arc::new(move |beta: &MultiIndex, x: &[f64], xi: &[f64]| {
                    let mut k = [0.0; 3];
                    let mut acc = Complex64::default();
                    for (shift, w) in st.iter() {
                        for d in 0..xi.len() {
                            k[d] = xi[d] + shift[d];
                        }
                        acc += dx(beta, x, &k[..xi.len()]) * *w;
                    }
                    acc
                }) as Arc<XDerivFn>
            });
            let separable = c.separable.as_ref().map(|terms| {
                let v: Vec<SeparableTerm> = terms
                    .iter()
                    .map(|t| {
                        let m = t.xi_factor.clone();
                        let st = stencil.clone();
                        SeparableTerm {
                            x_factor: t.x_factor.clone(),
                            xi_factor: Arc::new(move |xi: &[f64]| {
                                let mut k = [0.0; 3];
                                let mut acc = Complex64::default();
                                for (shift, w) in st.iter() {
                                    for d in 0..xi.len() {
                                        k[d] = xi[d] + shift[d];
                                    }
                                    acc += m(&k[..xi.len()]) * *w;
                                }
                                acc
                            }),
                        }
                    })
                    .collect();
                Arc::from(v)
            });
            Ok(Symbol {
                dim: a.dim,
                name,
                class: None,
                backend: Backend::Closed(ClosedForm {
                    eval: Arc::new(eval),
                    dx,
                    x_independent: c.x_independent,
                    separable,
                }),
            })
        }
        Backend::Table(t) => {
            let mut cur: SymbolTable = (**t).clone();
            for (axis, &times) in alpha.entries().iter().enumerate() {
                for _ in 0..times {
                    cur = forward_difference_table(&cur, axis)?;
                }
            }
            Ok(Symbol {
                dim: a.dim,
                name,
                class: None,
                backend: Backend::Table(Arc::new(cur)),
            })
        }
        Backend::Extended(_) => Err(Error::Unsupported(
            "differences of an extended symbol; difference the underlying table".into(),
        )),
    }
}

fn forward_difference_table(t: &SymbolTable, axis: usize) -> Result<SymbolTable> {
    let mut hi = t.hi.clone();
    hi[axis] -= 1;
    if hi[axis] < t.lo[axis] {
        return Err(Error::OutOfRange {
            axis,
            freq: t.hi[axis],
            lo: t.lo[axis],
            hi: hi[axis],
        });
    }
    let mut shifted = vec![0i64; t.grid.dim()];
    SymbolTable::from_fn(t.grid, t.lo.clone(), hi, t.rows == 1, |row, xi| {
        shifted.copy_from_slice(xi);
        shifted[axis] += 1;
        let a1 = t.get_row(row, &shifted).expect("inside parent box");
        let a0 = t.get_row(row, xi).expect("inside parent box");
        a1 - a0
    })
}

/// `∂_x^β a`: spectral differentiation for tables, the registered analytic
/// derivative for closed forms.
pub fn x_derivative(a: &Symbol, beta: &MultiIndex) -> Result<Symbol> {
    a.check_dim(beta.dim(), "β")?;
    if beta.order() == 0 {
        return Ok(a.clone());
    }
    let name = format!("∂_x^{beta} {}", a.name);
    if a.is_x_independent() {
        return Ok(Symbol::multiplier(a.dim, name, |_| Complex64::default()));
    }
    match &a.backend {
        Backend::Closed(c) => {
            let dx = c.dx.clone().ok_or_else(|| {
                Error::Unsupported(format!(
                    "closed-form symbol '{}' has no registered x-derivative",
                    a.name
                ))
            })?;
            let b = beta.clone();
            let d1 = dx.clone();
            let eval = move |x: &[f64], xi: &[f64]| d1(&b, x, xi);
            let b2 = beta.clone();
            let chained = Arc::new(move |extra: &MultiIndex, x: &[f64], xi: &[f64]| {
                let total = b2.add(extra).unwrap_or_else(|_| b2.clone());
                dx(&total, x, xi)
            }) as Arc<XDerivFn>;
            Ok(Symbol {
                dim: a.dim,
                name,
                class: None,
                backend: Backend::Closed(ClosedForm {
                    eval: Arc::new(eval),
                    dx: Some(chained),
                    x_independent: false,
                    separable: None,
                }),
            })
        }
        Backend::Table(t) => Ok(Symbol {
            dim: a.dim,
            name,
            class: None,
            backend: Backend::Table(Arc::new(spectral_x_derivative(t, beta)?)),
        }),
        Backend::Extended(_) => Err(Error::Unsupported(
            "x-derivatives of an extended symbol; differentiate the underlying table".into(),
        )),
    }
}

fn spectral_x_derivative(t: &SymbolTable, beta: &MultiIndex) -> Result<SymbolTable> {
    let grid = t.grid;
    let blen = t.box_len();
    let mut out = vec![Complex64::default(); t.values.len()];
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    for b in 0..blen {
        let column: Vec<Complex64> = (0..grid.len()).map(|row| t.values[row * blen + b]).collect();
        let spec = forward_fft(&GridFunction::new(grid, column)?);
        let scaled: Vec<Complex64> = spec
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = grid.frequency(i);
                let mut factor = Complex64::new(1.0, 0.0);
                for (d, &p) in beta.entries().iter().enumerate() {
                    factor *= (two_pi_i * k[d] as f64).powu(p);
                }
                c * factor
            })
            .collect();
        let back = inverse_fft(&SpectralCoeffs::new(grid, scaled)?);
        for (row, v) in back.values().iter().enumerate() {
            out[row * blen + b] = *v;
        }
    }
    Ok(SymbolTable {
        grid,
        lo: t.lo.clone(),
        hi: t.hi.clone(),
        rows: t.rows,
        values: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::bracket;
    use std::f64::consts::PI;

    fn re(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(MultiIndex::enumerate(1, 3).len(), 4);
        assert_eq!(MultiIndex::enumerate(2, 2).len(), 6);
        assert_eq!(MultiIndex::enumerate(3, 1).len(), 4);
        assert!(MultiIndex::new(vec![5, 4]).is_err());
    }

    #[test]
    fn difference_of_linear_and_quadratic() {
        let lin = Symbol::multiplier(1, "ξ", |xi| re(xi[0]));
        let quad = Symbol::multiplier(1, "ξ²", |xi| re(xi[0] * xi[0]));
        let d1 = difference(&lin, &MultiIndex::axis(1, 0, 1).unwrap()).unwrap();
        let d2 = difference(&quad, &MultiIndex::axis(1, 0, 2).unwrap()).unwrap();
        for k in -20..20 {
            assert_eq!(d1.at_freq(&[k]).unwrap(), re(1.0));
            assert_eq!(d2.at_freq(&[k]).unwrap(), re(2.0));
        }
    }

    #[test]
    fn bracket_inverse_difference_is_order_minus_two() {
        let a = Symbol::multiplier(1, "<ξ>^-1", |xi| re(1.0 / bracket(xi)));
        let d = difference(&a, &MultiIndex::axis(1, 0, 1).unwrap()).unwrap();
        let c = (-1024..=1024)
            .map(|k| d.at_freq(&[k]).unwrap().norm() * bracket(&[k as f64]).powi(2))
            .fold(0.0, f64::max);
        assert!(c.is_finite() && c < 2.0, "scan constant {c}");
    }

    #[test]
    fn table_difference_matches_closed_and_reports_axis() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let a = Symbol::closed(2, "a", |x, xi| {
            Complex64::new((2.0 * PI * x[0]).cos() * xi[0] * xi[1], xi[0] - xi[1] * x[1])
        });
        let t = Symbol::from_table(SymbolTable::tabulate(&a, grid, 4, 2).unwrap(), "a");
        let alpha = MultiIndex::new(vec![1, 2]).unwrap();
        let dc = difference(&a, &alpha).unwrap();
        let dt = difference(&t, &alpha).unwrap();
        for flat in 0..grid.len() {
            for k1 in -4..=5 {
                for k2 in -4..=4 {
                    let u = dc.at_node(&grid, flat, &[k1, k2]).unwrap();
                    let v = dt.at_node(&grid, flat, &[k1, k2]).unwrap();
                    assert!((u - v).norm() < 1e-12);
                }
            }
        }
        match dt.at_node(&grid, 0, &[0, 5]).unwrap_err() {
            Error::OutOfRange { axis, .. } => assert_eq!(axis, 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn differences_commute_and_compose() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let a = Symbol::closed(1, "a", |x, xi| {
            re((2.0 * PI * x[0]).sin() + 1.0) * Complex64::from_polar(1.0, 0.3 * xi[0]).powf(1.5)
        });
        let t = Symbol::from_table(SymbolTable::tabulate(&a, grid, 16, 5).unwrap(), "a");
        let e2 = MultiIndex::axis(1, 0, 2).unwrap();
        let e3 = MultiIndex::axis(1, 0, 3).unwrap();
        let e5 = MultiIndex::axis(1, 0, 5).unwrap();
        let lhs = difference(&difference(&t, &e2).unwrap(), &e3).unwrap();
        let rhs = difference(&t, &e5).unwrap();
        for flat in 0..grid.len() {
            for k in -16..=16 {
                let u = lhs.at_node(&grid, flat, &[k]).unwrap();
                let v = rhs.at_node(&grid, flat, &[k]).unwrap();
                assert!((u - v).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn leibniz_rule_on_tables() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid = TorusGrid::new(1, 8).unwrap();
        let av: Vec<Complex64> = (0..41).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let bv: Vec<Complex64> = (0..41).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let mk = |v: &Vec<Complex64>| {
            let v = v.clone();
            Symbol::from_table(
                SymbolTable::from_fn(grid, vec![-20], vec![20], true, |_, xi| v[(xi[0] + 20) as usize])
                    .unwrap(),
                "t",
            )
        };
        let (a, b) = (mk(&av), mk(&bv));
        let ab = mk(&av.iter().zip(&bv).map(|(x, y)| x * y).collect());
        let e1 = MultiIndex::axis(1, 0, 1).unwrap();
        let (da, db, dab) = (
            difference(&a, &e1).unwrap(),
            difference(&b, &e1).unwrap(),
            difference(&ab, &e1).unwrap(),
        );
        for k in -20..20 {
            let lhs = dab.at_freq(&[k]).unwrap();
            let rhs = a.at_freq(&[k + 1]).unwrap() * db.at_freq(&[k]).unwrap()
                + da.at_freq(&[k]).unwrap() * b.at_freq(&[k]).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn x_derivative_eigenfunction_and_zero() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let g = |xi: &[f64]| 1.0 / bracket(xi);
        let a = Symbol::closed(1, "e(x)g", move |x, xi| Complex64::from_polar(g(xi), 2.0 * PI * x[0]));
        let t = Symbol::from_table(SymbolTable::tabulate(&a, grid, 8, 0).unwrap(), "e(x)g");
        let d = x_derivative(&t, &MultiIndex::axis(1, 0, 1).unwrap()).unwrap();
        for flat in 0..grid.len() {
            for k in -8..=8 {
                let expect = Complex64::new(0.0, 2.0 * PI) * t.at_node(&grid, flat, &[k]).unwrap();
                assert!((d.at_node(&grid, flat, &[k]).unwrap() - expect).norm() < 1e-12);
            }
        }
        let m = Symbol::multiplier(1, "g", move |xi| re(g(xi)));
        let z = x_derivative(&m, &MultiIndex::axis(1, 0, 2).unwrap()).unwrap();
        assert_eq!(z.at_freq(&[3]).unwrap(), Complex64::default());
        let bare = Symbol::closed(1, "bare", |x, _| re(x[0]));
        assert!(matches!(
            x_derivative(&bare, &MultiIndex::axis(1, 0, 1).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn spectral_derivative_matches_centered_difference() {
        // cos(2πx)<ξ>^{-1}: spectral ∂_x against (a(x+h) - a(x-h)) / 2h.
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let grid = TorusGrid::new(1, n).unwrap();
            let a = Symbol::closed(1, "cos", |x, xi| re((2.0 * PI * x[0]).cos() / bracket(xi)));
            let t = Symbol::from_table(SymbolTable::tabulate(&a, grid, 4, 0).unwrap(), "cos");
            let d = x_derivative(&t, &MultiIndex::axis(1, 0, 1).unwrap()).unwrap();
            let h = 1.0 / n as f64;
            let mut err: f64 = 0.0;
            for j in 0..n {
                let x = j as f64 * h;
                for k in -4..=4 {
                    let fd = ((2.0 * PI * (x + h)).cos() - (2.0 * PI * (x - h)).cos())
                        / (2.0 * h)
                        / bracket(&[k as f64]);
                    err = err.max((d.at_node(&grid, j, &[k]).unwrap() - re(fd)).norm());
                }
            }
            errs.push(err);
        }
        // Centered differences are second order: halving h quarters the gap.
        let rate = errs[0] / errs[1];
        assert!((3.5..4.5).contains(&rate), "errors {errs:?}");
    }

    #[test]
    fn registered_derivative_chains() {
        let a = Symbol::closed(1, "sin", |x, xi| re((2.0 * PI * x[0]).sin() * xi[0]))
            .with_x_derivative(|b, x, xi| {
                let k = b.entries()[0] as i32;
                let w = 2.0 * PI;
                re(w.powi(k) * (2.0 * PI * x[0] + k as f64 * PI / 2.0).sin() * xi[0])
            });
        let e1 = MultiIndex::axis(1, 0, 1).unwrap();
        let d2 = x_derivative(&x_derivative(&a, &e1).unwrap(), &e1).unwrap();
        let v = d2.eval(&[0.1], &[3.0]).unwrap();
        let expect = -(2.0 * PI).powi(2) * (2.0 * PI * 0.1).sin() * 3.0;
        assert!((v.re - expect).abs() < 1e-9);
    }
}
