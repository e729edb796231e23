//! Hypoelliptic model operators, their `(Q_0, ε_0)` and the associated metric
//! `m^{-2}(⟨ξ⟩² dx² + dξ²)` with `m = (a + ⟨ξ⟩)^{1/2}`.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use serde::Serialize;

use super::{SplitMetric, Weight};
use crate::error::{Error, Result};
use crate::torus::bracket;

type Principal = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// `L = -Σ a_ij(x) ∂_i ∂_j + ...` through its principal symbol `a(x, ξ) >= 0`.
#[derive(Clone)]
pub struct HypoellipticModel {
    pub name: String,
    pub dim: usize,
    /// Lower bound for the rank of `A(x)`.
    pub rank: usize,
    pub q0: Ratio<i64>,
    pub eps0: Ratio<i64>,
    /// Operator text, lower-order terms included. Not used numerically.
    pub operator: String,
    principal: Principal,
}

impl fmt::Debug for HypoellipticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HypoellipticModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("rank", &self.rank)
            .field("q0", &self.q0)
            .field("eps0", &self.eps0)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub dim: usize,
    pub rank: usize,
    pub q0: String,
    pub eps0: String,
    pub operator: String,
}

impl HypoellipticModel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        rank: usize,
        operator: impl Into<String>,
        principal: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let (q0, eps0) = q0_eps0(dim, rank)?;
        Ok(Self {
            name: name.into(),
            dim,
            rank,
            q0,
            eps0,
            operator: operator.into(),
            principal: Arc::new(principal),
        })
    }

    /// `a(x, ξ)`; negative values are a model violation.
    pub fn principal(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        let a = (self.principal)(x, xi);
        if a.is_nan() {
            return Err(Error::InvalidArgument(format!("principal symbol of '{}' is NaN", self.name)));
        }
        if a < 0.0 {
            return Err(Error::ModelViolation(format!(
                "principal symbol of '{}' is {a} < 0 at x={x:?}, xi={xi:?}",
                self.name
            )));
        }
        Ok(a)
    }

    /// `m(x, ξ) = (a(x, ξ) + ⟨ξ⟩)^{1/2}`.
    pub fn weight_m(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        Ok((self.principal(x, xi)? + bracket(xi)).sqrt())
    }

    pub fn eps0_f64(&self) -> f64 {
        *self.eps0.numer() as f64 / *self.eps0.denom() as f64
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            name: self.name.clone(),
            dim: self.dim,
            rank: self.rank,
            q0: self.q0.to_string(),
            eps0: self.eps0.to_string(),
            operator: self.operator.clone(),
        }
    }
}

/// `Q_0 = r_0 + 2(n - r_0)`, `ε_0 = Q_0/(2n) - 1/2`, exactly.
pub fn q0_eps0(n: usize, r0: usize) -> Result<(Ratio<i64>, Ratio<i64>)> {
    if n == 0 || r0 == 0 || r0 > n {
        return Err(Error::InvalidArgument(format!("need 1 <= r_0 <= n, got n={n}, r_0={r0}")));
    }
    let (n, r0) = (n as i64, r0 as i64);
    let q0 = Ratio::from_integer(r0 + 2 * (n - r0));
    let eps0 = q0 / Ratio::from_integer(2 * n) - Ratio::new(1, 2);
    Ok((q0, eps0))
}

pub const GALLERY_NAMES: &[&str] = &[
    "laplacian:<n>",
    "heat:<n>",
    "kolmogorov",
    "mumford",
    "degenerate-exp:<delta>",
    "sum-of-squares",
];

fn parse_param<T: std::str::FromStr>(name: &str, value: Option<&str>, default: T) -> Result<T> {
    match value {
        None => Ok(default),
        Some(v) => v.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("bad parameter '{v}' in model name '{name}'"))
        }),
    }
}

fn dims_ok(name: &str, n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::InvalidArgument(format!("'{name}' needs dimension in 1..={max}")));
    }
    Ok(())
}

/// Looks up a model by name, e.g. `kolmogorov`, `laplacian:3`, `degenerate-exp:0.5`.
pub fn hypoelliptic_gallery(name: &str) -> Result<HypoellipticModel> {
    let (base, param) = match name.split_once(':') {
        Some((b, p)) => (b, Some(p)),
        None => (name, None),
    };
    match base {
        "laplacian" => {
            let n: usize = parse_param(name, param, 2)?;
            dims_ok(name, n, 8)?;
            HypoellipticModel::new(format!("laplacian:{n}"), n, n, "-Δ_x", |_, xi| {
                xi.iter().map(|v| v * v).sum()
            })
        }
        "heat" => {
            let n: usize = parse_param(name, param, 2)?;
            dims_ok(name, n, 7)?;
            HypoellipticModel::new(format!("heat:{n}"), n + 1, n, "-Δ_x + ∂_t", move |_, xi| {
                xi[..n].iter().map(|v| v * v).sum()
            })
        }
        "kolmogorov" if param.is_none() => HypoellipticModel::new(
            "kolmogorov",
            3,
            1,
            "-∂_x² - x ∂_y + ∂_t",
            |_, xi| xi[0] * xi[0],
        ),
        "mumford" if param.is_none() => HypoellipticModel::new(
            "mumford",
            4,
            1,
            "-∂_θ² + cos(θ) ∂_x - sin(θ) ∂_y + ∂_t",
            |_, xi| xi[0] * xi[0],
        ),
        "degenerate-exp" => {
            let delta: f64 = parse_param(name, param, 1.0)?;
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::InvalidArgument(format!("'{name}' needs delta > 0")));
            }
            HypoellipticModel::new(
                format!("degenerate-exp:{delta}"),
                3,
                2,
                "-∂_x1² - ∂_x2² - exp(-1/|x2|^δ) ∂_y²",
                move |x, xi| {
                    let r = x[1].abs();
                    let c = if r == 0.0 { 0.0 } else { (-r.powf(-delta)).exp() };
                    xi[0] * xi[0] + xi[1] * xi[1] + c * xi[2] * xi[2]
                },
            )
        }
        "sum-of-squares" if param.is_none() => HypoellipticModel::new(
            "sum-of-squares",
            2,
            1,
            "-X_1*X_1 - X_2*X_2, X_1 = ∂_x1, X_2 = x1 ∂_x2",
            |x, xi| xi[0] * xi[0] + x[0] * x[0] * xi[1] * xi[1],
        ),
        _ => Err(Error::Unknown {
            kind: "model",
            name: name.into(),
            available: GALLERY_NAMES.join(", "),
        }),
    }
}

/// `g = m^{-2}(⟨ξ⟩² dx² + dξ²)` and the weight `m^p`.
pub fn paper_metric(model: &HypoellipticModel, weight_exponent: f64) -> (SplitMetric, Weight) {
    let n = model.dim;
    let mg = model.clone();
    let metric = SplitMetric::new(n, format!("paper:{}", model.name), move |x, xi| {
        let m2 = mg.principal(x, xi)? + bracket(xi);
        let b = bracket(xi);
        Ok((vec![b * b / m2; n], vec![1.0 / m2; n]))
    });
    let mw = model.clone();
    let weight = Weight::new(format!("m^{weight_exponent}"), move |p| {
        Ok(mw.weight_m(&p[..n], &p[n..])?.powf(weight_exponent))
    });
    (metric, weight)
}

pub const METRIC_NAMES: &[&str] = &[
    "flat[:n]",
    "rho-delta:<rho>:<delta>[:n]",
    "shubin:<rho>[:n]",
    "paper:<model>",
];

/// Metric and companion weight by name: `flat` (weight 1), `rho-delta`
/// (weight `⟨ξ⟩`), `shubin` (weight `⟨x, ξ⟩`), `paper:<model>` (weight `m`).
pub fn metric_by_name(name: &str) -> Result<(SplitMetric, Weight)> {
    if let Some(model) = name.strip_prefix("paper:") {
        return Ok(paper_metric(&hypoelliptic_gallery(model)?, 1.0));
    }
    let parts: Vec<&str> = name.split(':').collect();
    let num = |i: usize| -> Result<Option<f64>> {
        parts.get(i).map(|v| parse_param(name, Some(v), 0.0)).transpose()
    };
    let dim = |i: usize| -> Result<usize> {
        let n: usize = parse_param(name, parts.get(i).copied(), 1)?;
        dims_ok(name, n, 8)?;
        Ok(n)
    };
    match parts[0] {
        "flat" if parts.len() <= 2 => Ok((SplitMetric::flat(dim(1)?), Weight::one())),
        "rho-delta" if (3..=4).contains(&parts.len()) => {
            let n = dim(3)?;
            let g = SplitMetric::rho_delta(n, num(1)?.unwrap_or(1.0), num(2)?.unwrap_or(0.0))?;
            Ok((g, Weight::bracket_xi(n, 1.0)))
        }
        "shubin" if (2..=3).contains(&parts.len()) => {
            let n = dim(2)?;
            Ok((SplitMetric::shubin(n, num(1)?.unwrap_or(1.0))?, Weight::bracket_phase(1.0)))
        }
        _ => Err(Error::Unknown {
            kind: "metric",
            name: name.into(),
            available: METRIC_NAMES.join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{check_continuity, check_weight, lambda_g, SamplePlan};

    fn r(a: i64, b: i64) -> Ratio<i64> {
        Ratio::new(a, b)
    }

    #[test]
    fn q0_table() {
        for n in 1..=6 {
            assert_eq!(q0_eps0(n, n).unwrap(), (r(n as i64, 1), r(0, 1)));
        }
        assert_eq!(q0_eps0(3, 1).unwrap(), (r(5, 1), r(1, 3)));
        assert_eq!(q0_eps0(4, 1).unwrap(), (r(7, 1), r(3, 8)));
        assert_eq!(q0_eps0(3, 2).unwrap(), (r(4, 1), r(1, 6)));
        assert!(q0_eps0(3, 0).is_err() && q0_eps0(3, 4).is_err());
    }

    #[test]
    fn gallery_entries() {
        let k = hypoelliptic_gallery("kolmogorov").unwrap();
        assert_eq!((k.dim, k.rank, k.q0, k.eps0), (3, 1, r(5, 1), r(1, 3)));
        let l = hypoelliptic_gallery("laplacian:2").unwrap();
        assert_eq!((l.rank, l.q0, l.eps0), (2, r(2, 1), r(0, 1)));
        let d = hypoelliptic_gallery("degenerate-exp:1").unwrap();
        assert_eq!((d.dim, d.rank, d.q0, d.eps0), (3, 2, r(4, 1), r(1, 6)));
        let h = hypoelliptic_gallery("heat:2").unwrap();
        assert_eq!((h.dim, h.rank), (3, 2));
        match hypoelliptic_gallery("schrodinger") {
            Err(Error::Unknown { available, .. }) => assert!(available.contains("mumford")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn paper_metric_lambda() {
        let l = hypoelliptic_gallery("laplacian:1").unwrap();
        let (g, _) = paper_metric(&l, 1.0);
        let xi = 3.0f64;
        let b = (1.0 + xi * xi).sqrt();
        let lam = lambda_g(&g, &[0.2, xi]).unwrap();
        assert!((lam - (xi * xi + b) / b).abs() < 1e-13);
        let zero = HypoellipticModel::new("zero", 2, 2, "0", |_, _| 0.0).unwrap();
        let (g0, _) = paper_metric(&zero, 1.0);
        assert!((lambda_g(&g0, &[0.0, 0.0, 5.0, -2.0]).unwrap() - 1.0).abs() < 1e-14);
        let k = hypoelliptic_gallery("kolmogorov").unwrap();
        let (gk, _) = paper_metric(&k, 1.0);
        let p = [0.1, 0.2, 0.3, 2.0, -1.0, 4.0];
        let bk = (1.0f64 + 4.0 + 1.0 + 16.0).sqrt();
        assert!((lambda_g(&gk, &p).unwrap() - (4.0 + bk) / bk).abs() < 1e-13);
        let neg = HypoellipticModel::new("neg", 1, 1, "-", |_, _| -1.0).unwrap();
        let (gn, _) = paper_metric(&neg, 1.0);
        assert!(matches!(gn.at(&[0.0, 0.0]), Err(Error::ModelViolation(_))));
    }

    #[test]
    fn elliptic_axioms() {
        let l = hypoelliptic_gallery("laplacian:1").unwrap();
        let (g, m) = paper_metric(&l, 1.0);
        let plan = SamplePlan::new(1, 5000, 11);
        assert!(check_continuity(&g, &plan).unwrap().pass);
        assert!(check_weight(&m, &g, &plan).unwrap().pass);
    }

    #[test]
    fn metric_names() {
        assert_eq!(metric_by_name("flat:3").unwrap().0.dim(), 3);
        assert_eq!(metric_by_name("rho-delta:1:0").unwrap().0.dim(), 1);
        assert!(metric_by_name("rho-delta:0.5:0.7").is_err());
        assert_eq!(metric_by_name("shubin:0.5:2").unwrap().0.dim(), 2);
        assert_eq!(metric_by_name("paper:kolmogorov").unwrap().0.dim(), 3);
        assert!(matches!(metric_by_name("round"), Err(Error::Unknown { .. })));
    }
}
