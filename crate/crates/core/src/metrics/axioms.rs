//! Statistical scans of the metric and weight axioms and of `S(M, g)`
//! seminorms.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{MetricAt, SplitMetric, Weight};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// Slowness radius: triples use `g_X(Y) <= CONTINUITY_C`.
pub const CONTINUITY_C: f64 = 0.25;
pub const CONTINUITY_UPPER: f64 = 4.0;
pub const CONTINUITY_LOWER: f64 = 0.25;
/// Largest constant accepted by the temperance and weight fits.
pub const TEMPERANCE_LIMIT: f64 = 16.0;
pub const MAX_EXPONENT: u32 = 8;

/// Random phase points: `x` uniform in `[0, 1)^n`, `|ξ| + 1` log-uniform in
/// `[1, 2^{xi_log2}]` with a uniform direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePlan {
    pub dim: usize,
    pub count: usize,
    pub xi_log2: f64,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(dim: usize, count: usize, seed: u64) -> Self {
        Self { dim, count, xi_log2: 10.0, seed }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count).map(|_| random_point(self.dim, self.xi_log2, &mut rng)).collect()
    }
}

pub(crate) fn random_point(dim: usize, xi_log2: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let r = (rng.gen::<f64>() * xi_log2).exp2() - 1.0;
    let dir = random_vector(dim, rng);
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    p.extend(dir.iter().map(|v| r * v / len));
    p
}

fn random_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Phase displacement `Y` with `g_X(Y) = CONTINUITY_C · u`, `u` uniform.
fn slow_step(at: &MetricAt, rng: &mut impl Rng) -> Vec<f64> {
    let y = random_vector(2 * at.dim(), rng);
    let target = CONTINUITY_C * rng.gen::<f64>();
    let s = (target / at.eval(&y)).sqrt();
    y.iter().map(|v| v * s).collect()
}

fn shifted(p: &[f64], y: &[f64]) -> Vec<f64> {
    p.iter().zip(y).map(|(a, b)| a + b).collect()
}

fn diff(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| a - b).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub axiom: String,
    pub subject: String,
    pub plan_size: usize,
    pub constants: BTreeMap<String, f64>,
    pub violations: usize,
    pub pass: bool,
}

impl AxiomReport {
    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Independent per-sample seeds so that parallel scans stay reproducible.
fn sample_rngs(seed: u64, count: usize) -> Vec<ChaCha8Rng> {
    (0..count)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect()
}

/// Extremes of `g_X(Z) / g_{X+Y}(Z)` over `g_X(Y) <= C`, taken over all `Z`
/// in closed form.
pub fn check_continuity(g: &SplitMetric, plan: &SamplePlan) -> Result<AxiomReport> {
    let points = plan.points();
    let rngs = sample_rngs(plan.seed ^ 0xC0, points.len());
    let pairs: Result<Vec<(f64, f64)>> = points
        .par_iter()
        .zip(rngs)
        .map(|(p, mut rng)| {
            let at = g.at(p)?;
            let y = slow_step(&at, &mut rng);
            let moved = g.at(&shifted(p, &y))?;
            Ok((1.0 / moved.max_ratio(&at), at.max_ratio(&moved)))
        })
        .collect();
    let pairs = pairs?;
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let violations = pairs
        .iter()
        .filter(|p| p.0 < CONTINUITY_LOWER || p.1 > CONTINUITY_UPPER)
        .count();
    let constants = BTreeMap::from([
        ("C".to_string(), CONTINUITY_C),
        ("c".to_string(), CONTINUITY_UPPER),
        ("c'".to_string(), CONTINUITY_LOWER),
        ("ratio_min".to_string(), lo),
        ("ratio_max".to_string(), hi),
    ]);
    Ok(AxiomReport {
        axiom: "continuity".into(),
        subject: g.name().into(),
        plan_size: points.len(),
        constants,
        violations,
        pass: violations == 0,
    })
}

/// Smallest `J <= MAX_EXPONENT` with `max q / base^J <= TEMPERANCE_LIMIT`.
fn fit_exponent(samples: &[(f64, f64)]) -> Option<(u32, f64)> {
    (0..=MAX_EXPONENT)
        .map(|j| {
            let c = samples
                .iter()
                .map(|&(q, base)| q / base.powi(j as i32))
                .fold(0.0, f64::max);
            (j, c)
        })
        .find(|&(_, c)| c <= TEMPERANCE_LIMIT)
}

fn pair_points(plan: &SamplePlan) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = plan.points();
    let ys = SamplePlan { seed: plan.seed.wrapping_add(0x7E), ..plan.clone() }.points();
    (xs, ys)
}

/// Fits `sup_T g_X(T)/g_Y(T) <= C̄ (1 + g^ω_Y(X - Y))^J`.
pub fn check_temperance(g: &SplitMetric, plan: &SamplePlan) -> Result<AxiomReport> {
    let (xs, ys) = pair_points(plan);
    let samples: Result<Vec<(f64, f64)>> = xs
        .par_iter()
        .zip(&ys)
        .map(|(x, y)| {
            let (gx, gy) = (g.at(x)?, g.at(y)?);
            Ok((gx.max_ratio(&gy), 1.0 + gy.dual().eval(&diff(x, y))))
        })
        .collect();
    let samples = samples?;
    let fit = fit_exponent(&samples);
    let mut constants = BTreeMap::new();
    if let Some((j, c)) = fit {
        constants.insert("J".to_string(), j as f64);
        constants.insert("C_bar".to_string(), c);
    }
    Ok(AxiomReport {
        axiom: "temperance".into(),
        subject: g.name().into(),
        plan_size: samples.len(),
        constants,
        violations: usize::from(fit.is_none()),
        pass: fit.is_some(),
    })
}

/// Weight continuity `(M(X+Y)/M(X))^{±1} <= D` on `g_X(Y) <= C` and weight
/// temperance `(M(X)/M(Y))^{±1} <= D' (1 + g^ω_Y(X - Y))^N`.
pub fn check_weight(m: &Weight, g: &SplitMetric, plan: &SamplePlan) -> Result<AxiomReport> {
    let points = plan.points();
    let rngs = sample_rngs(plan.seed ^ 0x3E, points.len());
    let slow: Result<Vec<f64>> = points
        .par_iter()
        .zip(rngs)
        .map(|(p, mut rng)| {
            let at = g.at(p)?;
            let y = slow_step(&at, &mut rng);
            let r = m.eval(&shifted(p, &y))? / m.eval(p)?;
            Ok(r.max(1.0 / r))
        })
        .collect();
    let d = slow?.into_iter().fold(1.0, f64::max);
    let (xs, ys) = pair_points(plan);
    let samples: Result<Vec<(f64, f64)>> = xs
        .par_iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = m.eval(x)? / m.eval(y)?;
            Ok((r.max(1.0 / r), 1.0 + g.at(y)?.dual().eval(&diff(x, y))))
        })
        .collect();
    let fit = fit_exponent(&samples?);
    let mut constants = BTreeMap::from([("D".to_string(), d)]);
    if let Some((n, c)) = fit {
        constants.insert("N".to_string(), n as f64);
        constants.insert("D_prime".to_string(), c);
    }
    let continuity_ok = d <= TEMPERANCE_LIMIT;
    let violations = usize::from(!continuity_ok) + usize::from(fit.is_none());
    Ok(AxiomReport {
        axiom: "weight".into(),
        subject: format!("{} / {}", m.name(), g.name()),
        plan_size: points.len(),
        constants,
        violations,
        pass: violations == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmgReport {
    pub symbol: String,
    /// `C_j` for `j = 0..=k`.
    pub constants: Vec<f64>,
    pub plan_size: usize,
    pub directions: usize,
}

const SMG_STEP: f64 = 0.25;
const SMG_MIXTURES: usize = 4;

/// `j`-th derivative of `f(X + tT)` at `t = 0` by central stencils.
fn directional(
    sigma: &Symbol,
    p: &[f64],
    t: &[f64],
    j: u32,
    f0: num_complex::Complex64,
) -> Result<f64> {
    let n = p.len() / 2;
    let at = |s: f64| -> Result<num_complex::Complex64> {
        let q: Vec<f64> = p.iter().zip(t).map(|(a, b)| a + s * b).collect();
        sigma.eval(&q[..n], &q[n..])
    };
    let h = SMG_STEP;
    let v = match j {
        0 => f0,
        1 => (at(h)? - at(-h)?) / (2.0 * h),
        2 => (at(h)? - f0 * 2.0 + at(-h)?) / (h * h),
        3 => (at(2.0 * h)? - at(h)? * 2.0 + at(-h)? * 2.0 - at(-2.0 * h)?) / (2.0 * h * h * h),
        _ => unreachable!(),
    };
    Ok(v.norm())
}

/// Surrogate `S(M, g)` constants: `C_j = max |σ^{(j)}(T, .., T)| / M(X)` over
/// scanned `X` and directions `T` with `g_X(T) = 1` (coordinate axes plus
/// random mixtures), derivatives by central stencils of step `0.25` in
/// `g`-units.
pub fn smg_seminorm(
    sigma: &Symbol,
    m: &Weight,
    g: &SplitMetric,
    k: u32,
    plan: &SamplePlan,
) -> Result<SmgReport> {
    if k > 3 {
        return Err(Error::InvalidArgument(format!("S(m,g) order is capped at 3, got {k}")));
    }
    if sigma.dim() != g.dim() {
        return Err(Error::InvalidArgument("symbol and metric dimensions differ".into()));
    }
    let dim2 = 2 * g.dim();
    let points = plan.points();
    let rngs = sample_rngs(plan.seed ^ 0x5A, points.len());
    let rows: Result<Vec<Vec<f64>>> = points
        .par_iter()
        .zip(rngs)
        .map(|(p, mut rng)| {
            let at = g.at(p)?;
            let weight = m.eval(p)?;
            let mut dirs: Vec<Vec<f64>> = (0..dim2)
                .map(|i| {
                    let mut e = vec![0.0; dim2];
                    e[i] = 1.0;
                    e
                })
                .collect();
            dirs.extend((0..SMG_MIXTURES).map(|_| random_vector(dim2, &mut rng)));
            let n = g.dim();
            let f0 = sigma.eval(&p[..n], &p[n..])?;
            let mut row = vec![0.0f64; k as usize + 1];
            for d in &mut dirs {
                let s = at.eval(d).sqrt();
                d.iter_mut().for_each(|v| *v /= s);
                for j in 0..=k {
                    let v = directional(sigma, p, d, j, f0)? / weight;
                    row[j as usize] = row[j as usize].max(v);
                }
            }
            Ok(row)
        })
        .collect();
    let mut constants = vec![0.0f64; k as usize + 1];
    for row in rows? {
        for (c, v) in constants.iter_mut().zip(row) {
            *c = c.max(v);
        }
    }
    Ok(SmgReport {
        symbol: sigma.name().into(),
        constants,
        plan_size: points.len(),
        directions: dim2 + SMG_MIXTURES,
    })
}
