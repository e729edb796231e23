//! Scan estimates of the toroidal class seminorms and the Fefferman-type
//! envelope constants.

use rayon::prelude::*;
use serde::Serialize;

use super::{difference, x_derivative, MultiIndex, Symbol};
use crate::error::{Error, Result};
use crate::torus::{bracket_int, TorusGrid};

/// Target class `S^m_{ρ,δ}` together with the difference order `k` and the
/// `x`-derivative order `ℓ` to audit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassSpec {
    pub order: f64,
    pub rho: f64,
    pub delta: f64,
    pub k: u32,
    pub l: u32,
}

impl ClassSpec {
    pub fn new(order: f64, rho: f64, delta: f64, k: u32, l: u32) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("ρ = {rho} outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!("δ = {delta} outside [0, 1]")));
        }
        if !order.is_finite() {
            return Err(Error::InvalidArgument("non-finite order".into()));
        }
        Ok(Self {
            order,
            rho,
            delta,
            k,
            l,
        })
    }

    /// `k = [n/2] + 1`, `ℓ = 0`.
    pub fn with_default_k(order: f64, rho: f64, delta: f64, dim: usize) -> Result<Self> {
        Self::new(order, rho, delta, dim as u32 / 2 + 1, 0)
    }
}

/// Lattice window `|ξ|_∞ <= xi_max` crossed with every `x_stride`-th grid node
/// along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanPlan {
    pub grid: TorusGrid,
    pub xi_max: i64,
    pub x_stride: usize,
}

impl ScanPlan {
    pub fn new(grid: TorusGrid, xi_max: i64) -> Self {
        Self {
            grid,
            xi_max,
            x_stride: 1,
        }
    }

    pub fn with_x_stride(mut self, stride: usize) -> Self {
        self.x_stride = stride.max(1);
        self
    }

    pub fn doubled(&self) -> Self {
        Self {
            xi_max: self.xi_max * 2,
            ..*self
        }
    }

    fn x_nodes(&self, x_independent: bool) -> Vec<usize> {
        if x_independent {
            return vec![0];
        }
        let g = &self.grid;
        (0..g.len())
            .filter(|&f| g.multi_index(f).iter().all(|&j| j % self.x_stride == 0))
            .collect()
    }

    fn frequencies(&self, dim: usize) -> Vec<Vec<i64>> {
        let w = (2 * self.xi_max + 1) as usize;
        let total = w.pow(dim as u32);
        (0..total)
            .map(|mut b| {
                let mut xi = vec![0i64; dim];
                for d in (0..dim).rev() {
                    xi[d] = (b % w) as i64 - self.xi_max;
                    b /= w;
                }
                xi
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormEntry {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    pub constant: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormReport {
    pub entries: Vec<SeminormEntry>,
    pub max: f64,
    pub threshold: Option<f64>,
}

impl SeminormReport {
    pub fn constant(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| &e.alpha == alpha && &e.beta == beta)
            .map(|e| e.constant)
    }

    pub fn any_flagged(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }
}

fn scan_max(
    s: &Symbol,
    plan: &ScanPlan,
    nodes: &[usize],
    freqs: &[Vec<i64>],
    exponent: f64,
) -> Result<f64> {
    let per_node: Result<Vec<f64>> = nodes
        .par_iter()
        .map(|&node| {
            let mut best: f64 = 0.0;
            for xi in freqs {
                let v = s.at_node(&plan.grid, node, xi)?.norm() * bracket_int(xi).powf(exponent);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        node: plan.grid.multi_index(node),
                    });
                }
                best = best.max(v);
            }
            Ok(best)
        })
        .collect();
    Ok(per_node?.into_iter().fold(0.0, f64::max))
}

/// `C_{α,β} = max |Δ^α ∂_x^β a(x, ξ)| ⟨ξ⟩^{-(m - ρ|α| + δ|β|)}` over the scan.
pub fn toroidal_seminorm(
    a: &Symbol,
    spec: &ClassSpec,
    plan: &ScanPlan,
    threshold: Option<f64>,
) -> Result<SeminormReport> {
    if plan.xi_max < 0 {
        return Err(Error::InvalidArgument("empty scan plan".into()));
    }
    if plan.grid.dim() != a.dim() {
        return Err(Error::GridMismatch(format!(
            "scan grid has dimension {}, symbol {}",
            plan.grid.dim(),
            a.dim()
        )));
    }
    let dim = a.dim();
    let nodes = plan.x_nodes(a.is_x_independent());
    let freqs = plan.frequencies(dim);
    let mut entries = Vec::new();
    for beta in MultiIndex::enumerate(dim, spec.l) {
        let db = x_derivative(a, &beta)?;
        for alpha in MultiIndex::enumerate(dim, spec.k) {
            let s = difference(&db, &alpha)?;
            let exponent = -(spec.order - spec.rho * alpha.order() as f64
                + spec.delta * beta.order() as f64);
            let constant = scan_max(&s, plan, &nodes, &freqs, exponent)?;
            let flagged = threshold.is_some_and(|t| constant > t);
            entries.push(SeminormEntry {
                alpha: alpha.clone(),
                beta: beta.clone(),
                constant,
                flagged,
            });
        }
    }
    let max = entries.iter().map(|e| e.constant).fold(0.0, f64::max);
    Ok(SeminormReport {
        entries,
        max,
        threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeffermanReport {
    pub epsilon: f64,
    pub k: u32,
    pub constants: Vec<(MultiIndex, f64)>,
    pub sup: f64,
}

/// `C_α = max |Δ^α a| ⟨ξ⟩^{nε/2 + (1-ε)|α|}` for `|α| <= k`, and their sup.
pub fn fefferman_seminorm(a: &Symbol, epsilon: f64, k: u32, plan: &ScanPlan) -> Result<FeffermanReport> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("ε = {epsilon} outside [0, 1)")));
    }
    let n = a.dim() as f64;
    let spec = ClassSpec::new(-n * epsilon / 2.0, 1.0 - epsilon, 0.0, k, 0)?;
    let report = toroidal_seminorm(a, &spec, plan, None)?;
    let constants: Vec<(MultiIndex, f64)> = report
        .entries
        .into_iter()
        .map(|e| (e.alpha, e.constant))
        .collect();
    Ok(FeffermanReport {
        epsilon,
        k,
        sup: report.max,
        constants,
    })
}

/// Largest relative change of any nonzero constant when the scan window is
/// doubled.
pub fn scan_drift(a: &Symbol, spec: &ClassSpec, plan: &ScanPlan) -> Result<f64> {
    let base = toroidal_seminorm(a, spec, plan, None)?;
    let wide = toroidal_seminorm(a, spec, &plan.doubled(), None)?;
    Ok(base
        .entries
        .iter()
        .zip(&wide.entries)
        .filter(|(_, w)| w.constant > 0.0)
        .map(|(b, w)| (w.constant - b.constant).abs() / w.constant)
        .fold(0.0, f64::max))
}
