//! Random-search oracles for the symplectic dual and `λ_g`: random starts
//! followed by adaptive hill climbing.

use rand::Rng;
use rand_distr::StandardNormal;

use super::MetricAt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    pub starts: usize,
    pub iterations: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { starts: 256, iterations: 3000 }
    }
}

fn gaussian(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Maximizes a scale-invariant `f` on `R^dim \ {0}`.
fn climb(dim: usize, params: SearchParams, rng: &mut impl Rng, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut best = gaussian(dim, rng);
    let mut best_val = f(&best);
    for _ in 1..params.starts {
        let v = gaussian(dim, rng);
        let fv = f(&v);
        if fv > best_val {
            best = v;
            best_val = fv;
        }
    }
    let mut step = 0.3;
    for it in 0..params.iterations {
        let scale = norm(&best);
        let mut cand = best.clone();
        let r: f64 = rng.sample(StandardNormal);
        if it % 3 == 0 {
            let i = rng.gen_range(0..dim);
            cand[i] += step * scale * r;
        } else if it % 3 == 1 {
            let i = rng.gen_range(0..dim);
            cand[i] *= (4.0 * step * r).exp();
        } else {
            for (c, g) in cand.iter_mut().zip(gaussian(dim, rng)) {
                *c += step * scale * g / (dim as f64).sqrt();
            }
        }
        let fv = f(&cand);
        if fv > best_val {
            let s = norm(&cand);
            best = cand.iter().map(|c| c / s).collect();
            best_val = fv;
            step = (step * 1.5).min(1.0);
        } else {
            step = (step * 0.8).max(1e-9);
            if step < 1e-8 {
                step = 0.3;
            }
        }
    }
    best_val
}

/// `σ(T, Z) = ⟨t_ξ, z_x⟩ - ⟨t_x, z_ξ⟩`.
fn symplectic(t: &[f64], z: &[f64]) -> f64 {
    let n = t.len() / 2;
    (0..n).map(|d| t[n + d] * z[d] - t[d] * z[n + d]).sum()
}

/// `sup_{Z ≠ 0} σ(T, Z)² / g_X(Z)` by search.
pub fn dual_search(g: &MetricAt, t: &[f64], params: SearchParams, rng: &mut impl Rng) -> f64 {
    climb(2 * g.dim(), params, rng, |z| {
        let s = symplectic(t, z);
        s * s / g.eval(z)
    })
}

/// `inf_{T ≠ 0} (g^ω_X(T) / g_X(T))^{1/2}` by search.
pub fn lambda_search(g: &MetricAt, params: SearchParams, rng: &mut impl Rng) -> f64 {
    let dual = g.dual();
    let worst = climb(2 * g.dim(), params, rng, |t| -(dual.eval(t) / g.eval(t)));
    (-worst).sqrt()
}
