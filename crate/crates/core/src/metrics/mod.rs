//! Split Hörmander metrics `g_X = Σ_d h^x_d(X) dx_d² + h^ξ_d(X) dξ_d²` on
//! `R^{2n}`, weights, axiom scans and the hypoelliptic model gallery.
//!
//! Phase points are flat slices `X = (x_1..x_n, ξ_1..ξ_n)`.

mod axioms;
mod gallery;
mod search;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::torus::bracket;

pub use axioms::{
    check_continuity, check_temperance, check_weight, smg_seminorm, AxiomReport, SamplePlan,
    SmgReport, CONTINUITY_C, CONTINUITY_LOWER, CONTINUITY_UPPER, MAX_EXPONENT, TEMPERANCE_LIMIT,
};
pub use gallery::{
    hypoelliptic_gallery, metric_by_name, paper_metric, q0_eps0, HypoellipticModel, GALLERY_NAMES,
    METRIC_NAMES,
};
pub use search::{dual_search, lambda_search, SearchParams};

type WeightFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;
type Coeffs = Arc<dyn Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)> + Send + Sync>;

/// A diagonal phase-space metric given by its coefficient evaluators.
#[derive(Clone)]
pub struct SplitMetric {
    dim: usize,
    name: String,
    coeffs: Coeffs,
}

impl fmt::Debug for SplitMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SplitMetric")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

/// Coefficients of a split metric at one phase point, with their reciprocals
/// kept alongside so that dualizing twice is exact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricAt {
    pub hx: Vec<f64>,
    pub hxi: Vec<f64>,
    inv_hx: Vec<f64>,
    inv_hxi: Vec<f64>,
}

impl MetricAt {
    pub fn new(hx: Vec<f64>, hxi: Vec<f64>) -> Result<Self> {
        if hx.len() != hxi.len() || hx.is_empty() {
            return Err(Error::InvalidArgument("coefficient lengths differ".into()));
        }
        for &h in hx.iter().chain(&hxi) {
            if !h.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite metric coefficient {h}")));
            }
            if h <= 0.0 {
                return Err(Error::ModelViolation(format!("metric coefficient {h} is not positive")));
            }
        }
        let inv_hx = hx.iter().map(|h| 1.0 / h).collect();
        let inv_hxi = hxi.iter().map(|h| 1.0 / h).collect();
        Ok(Self { hx, hxi, inv_hx, inv_hxi })
    }

    pub fn dim(&self) -> usize {
        self.hx.len()
    }

    /// `g_X(T)` for `T = (t_x, t_ξ)`.
    pub fn eval(&self, t: &[f64]) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|d| self.hx[d] * t[d] * t[d] + self.hxi[d] * t[n + d] * t[n + d])
            .sum()
    }

    /// `g^ω_X`: swap the blocks and invert.
    pub fn dual(&self) -> Self {
        Self {
            hx: self.inv_hxi.clone(),
            hxi: self.inv_hx.clone(),
            inv_hx: self.hxi.clone(),
            inv_hxi: self.hx.clone(),
        }
    }

    /// `λ_g = min_d (h^x_d h^ξ_d)^{-1/2}`.
    pub fn lambda(&self) -> f64 {
        self.hx
            .iter()
            .zip(&self.hxi)
            .map(|(a, b)| 1.0 / (a * b).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.hx.iter().map(|h| c * h).collect(),
            self.hxi.iter().map(|h| c * h).collect(),
        )
    }

    /// `sup_T g_X(T) / other(T)`.
    pub fn max_ratio(&self, other: &Self) -> f64 {
        self.hx
            .iter()
            .zip(&other.hx)
            .chain(self.hxi.iter().zip(&other.hxi))
            .map(|(a, b)| a / b)
            .fold(0.0, f64::max)
    }
}

impl SplitMetric {
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        coeffs: impl Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)> + Send + Sync + 'static,
    ) -> Self {
        Self { dim, name: name.into(), coeffs: Arc::new(coeffs) }
    }

    /// `dx² + dξ²`.
    pub fn flat(dim: usize) -> Self {
        Self::new(dim, format!("flat:{dim}"), move |_, _| Ok((vec![1.0; dim], vec![1.0; dim])))
    }

    /// `⟨ξ⟩^{2δ} dx² + ⟨ξ⟩^{-2ρ} dξ²`, offered for `0 <= δ <= ρ <= 1` only.
    pub fn rho_delta(dim: usize, rho: f64, delta: f64) -> Result<Self> {
        if !(0.0 <= delta && delta <= rho && rho <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "g^{{rho,delta}} needs 0 <= delta <= rho <= 1, got rho={rho}, delta={delta}"
            )));
        }
        Ok(Self::new(dim, format!("rho-delta:{rho}:{delta}"), move |_, xi| {
            let b = bracket(xi);
            Ok((vec![b.powf(2.0 * delta); dim], vec![b.powf(-2.0 * rho); dim]))
        }))
    }

    /// Shubin `⟨x, ξ⟩^{-ρ}(dx² + dξ²)`.
    pub fn shubin(dim: usize, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("Shubin rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self::new(dim, format!("shubin:{rho}"), move |x, xi| {
            let q: f64 = x.iter().chain(xi).map(|v| v * v).sum();
            let h = (1.0 + q).powf(-0.5 * rho);
            Ok((vec![h; dim], vec![h; dim]))
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn at(&self, point: &[f64]) -> Result<MetricAt> {
        if point.len() != 2 * self.dim {
            return Err(Error::InvalidArgument(format!(
                "phase point has {} entries, metric needs {}",
                point.len(),
                2 * self.dim
            )));
        }
        let (x, xi) = point.split_at(self.dim);
        let (hx, hxi) = (self.coeffs)(x, xi)?;
        MetricAt::new(hx, hxi)
    }
}

/// `g_X(T)`.
pub fn metric_eval(g: &SplitMetric, point: &[f64], t: &[f64]) -> Result<f64> {
    if t.len() != 2 * g.dim() {
        return Err(Error::InvalidArgument("tangent vector has the wrong length".into()));
    }
    Ok(g.at(point)?.eval(t))
}

/// `g^ω_X`, the symplectic dual at `X`.
pub fn symplectic_dual(g: &SplitMetric, point: &[f64]) -> Result<MetricAt> {
    Ok(g.at(point)?.dual())
}

pub fn lambda_g(g: &SplitMetric, point: &[f64]) -> Result<f64> {
    Ok(g.at(point)?.lambda())
}

/// Positive weight `M(X)`.
#[derive(Clone)]
pub struct Weight {
    name: String,
    eval: Arc<WeightFn>,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Weight {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), eval: Arc::new(eval) }
    }

    pub fn one() -> Self {
        Self::new("1", |_| Ok(1.0))
    }

    /// `⟨ξ⟩^p` on `R^{2n}`.
    pub fn bracket_xi(dim: usize, p: f64) -> Self {
        Self::new(format!("<xi>^{p}"), move |point| Ok(bracket(&point[dim..]).powf(p)))
    }

    /// `⟨(x, ξ)⟩^p`.
    pub fn bracket_phase(p: f64) -> Self {
        Self::new(format!("<x,xi>^{p}"), move |point| Ok(bracket(point).powf(p)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        let v = (self.eval)(point)?;
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::ModelViolation(format!(
                "weight '{}' is {v} at {point:?}",
                self.name
            )));
        }
        Ok(v)
    }
}
