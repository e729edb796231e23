//! Dyadic decomposition `Σ_l ψ_l(R) = I`, `R = (I - Δ/4π²)^{1/2}`, Besov norms
//! `B^s_{∞,∞}` and direct Hölder seminorms on the torus.

use serde::Serialize;

use crate::torus::{bracket_int, forward_fft, inverse_fft, sup_norm, GridFunction, SpectralCoeffs};

/// `r(t) = e(t) / (e(t) + e(1 - t))`, `e(t) = exp(-1/t)` for `t > 0`: a smooth
/// step from 0 on `t <= 0` to 1 on `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// `ψ_0(λ) = 1 - r(|λ| - 1)`: equal to 1 on `|λ| <= 1`, 0 on `|λ| >= 2`.
pub fn psi0(lambda: f64) -> f64 {
    1.0 - smooth_step(lambda.abs() - 1.0)
}

/// The profile `ψ_0` and its dyadic bands up to `top`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicSystem {
    pub top: usize,
}

/// The bump `ψ_0` with the default band count.
pub fn build_bump() -> DyadicSystem {
    DyadicSystem { top: 2 }
}

impl DyadicSystem {
    pub fn new(top: usize) -> Self {
        Self { top: top.max(2) }
    }

    /// Smallest system whose top band satisfies `2^{L-1} >= max_bracket`.
    pub fn covering(max_bracket: f64) -> Self {
        let mut top = 2;
        while ((1u64 << (top - 1)) as f64) < max_bracket {
            top += 1;
        }
        Self { top }
    }

    pub fn psi0(&self, lambda: f64) -> f64 {
        psi0(lambda)
    }

    /// `ψ_l(λ) = ψ_0(2^{-l}λ) - ψ_0(2^{-l+1}λ)` for `l >= 1`.
    pub fn band(&self, l: usize, lambda: f64) -> f64 {
        dyadic_band(l, lambda)
    }

    pub fn partial_sum(&self, lambda: f64) -> f64 {
        (0..=self.top).map(|l| dyadic_band(l, lambda)).sum()
    }
}

pub fn dyadic_band(l: usize, lambda: f64) -> f64 {
    if l == 0 {
        return psi0(lambda);
    }
    let s = (l as f64).exp2();
    psi0(lambda / s) - psi0(2.0 * lambda / s)
}

/// `ψ_l(R)` on coefficients.
pub fn band_project_spectral(l: usize, fh: &SpectralCoeffs) -> SpectralCoeffs {
    fh.multiply(|k| num_complex::Complex64::new(dyadic_band(l, bracket_int(k)), 0.0))
}

/// `ψ_l(R) f`.
pub fn band_project(l: usize, f: &GridFunction) -> GridFunction {
    inverse_fft(&band_project_spectral(l, &forward_fft(f)))
}

/// `‖ψ_l(R) f‖_∞` for `l = 0..=L`, with `L` covering the grid.
pub fn band_sups(fh: &SpectralCoeffs) -> Vec<f64> {
    let sys = DyadicSystem::covering(fh.grid().max_bracket());
    (0..=sys.top)
        .map(|l| sup_norm(&inverse_fft(&band_project_spectral(l, fh))))
        .collect()
}

/// `sup_l 2^{ls} ‖ψ_l(R) f‖_∞` from precomputed band sups.
pub fn besov_from_bands(bands: &[f64], s: f64) -> f64 {
    bands
        .iter()
        .enumerate()
        .map(|(l, b)| (l as f64 * s).exp2() * b)
        .fold(0.0, f64::max)
}

pub fn besov_norm_spectral(fh: &SpectralCoeffs, s: f64) -> f64 {
    besov_from_bands(&band_sups(fh), s)
}

/// `‖f‖_{B^s_{∞,∞}}`.
pub fn besov_norm(f: &GridFunction, s: f64) -> f64 {
    besov_norm_spectral(&forward_fft(f), s)
}

/// Grid displacements, in node units, at magnitudes `2^j` along each axis
/// and along the diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderPlan {
    pub shifts: Vec<Vec<i64>>,
}

impl HolderPlan {
    pub fn dyadic(dim: usize, points: usize) -> Self {
        let mut shifts = Vec::new();
        let mut step = 1i64;
        while (step as usize) < points {
            for d in 0..dim {
                let mut h = vec![0; dim];
                h[d] = step;
                shifts.push(h);
            }
            if dim > 1 {
                // Diagonals with every sign pattern whose first entry is +.
                for mask in 0..(1u32 << (dim - 1)) {
                    let mut h = vec![step; dim];
                    for (d, v) in h.iter_mut().enumerate().skip(1) {
                        if mask >> (d - 1) & 1 == 1 {
                            *v = -step;
                        }
                    }
                    shifts.push(h);
                }
            }
            step *= 2;
        }
        Self { shifts }
    }
}

/// Quotient distance on `T^n` of a displacement given in node units.
pub fn torus_distance(h: &[i64], points: usize) -> f64 {
    let n = points as i64;
    h.iter()
        .map(|&v| {
            let r = v.rem_euclid(n);
            let m = r.min(n - r) as f64 / points as f64;
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

/// `max |f(x + h) - f(x)| |h|_T^{-s}` over the plan.
pub fn holder_seminorm(f: &GridFunction, s: f64, plan: &HolderPlan) -> f64 {
    let grid = f.grid();
    let n = grid.points();
    let vals = f.values();
    let mut best: f64 = 0.0;
    for h in &plan.shifts {
        let dist = torus_distance(h, n);
        if dist == 0.0 {
            continue;
        }
        let w = dist.powf(-s);
        for flat in 0..grid.len() {
            let j = grid.multi_index(flat);
            let shifted: Vec<usize> = j
                .iter()
                .zip(h)
                .map(|(&jd, &hd)| (jd as i64 + hd).rem_euclid(n as i64) as usize)
                .collect();
            let diff = (vals[grid.flat_index(&shifted)] - vals[flat]).norm();
            best = best.max(diff * w);
        }
    }
    best
}

/// `|f|_{Λ^s} + sup |f|` with the dyadic plan.
pub fn holder_norm(f: &GridFunction, s: f64) -> f64 {
    let plan = HolderPlan::dyadic(f.grid().dim(), f.grid().points());
    holder_seminorm(f, s, &plan) + sup_norm(f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub s: f64,
    /// `(family index, holder_norm / besov_norm)`.
    pub ratios: Vec<(usize, f64)>,
    pub excluded: Vec<(usize, String)>,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub pass: bool,
}

/// Harness bound on `max / min` of the Hölder-to-Besov ratios.
pub const EQUIVALENCE_SPREAD_LIMIT: f64 = 50.0;

pub fn equivalence_report(family: &[GridFunction], s: f64) -> EquivalenceReport {
    let mut ratios = Vec::new();
    let mut excluded = Vec::new();
    for (i, f) in family.iter().enumerate() {
        let fh = forward_fft(f);
        let nonconstant = fh
            .coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .any(|(_, c)| c.norm() > 1e-12 * (1.0 + fh.coeffs()[0].norm()));
        if !nonconstant {
            excluded.push((i, "constant function".to_string()));
            continue;
        }
        ratios.push((i, holder_norm(f, s) / besov_norm_spectral(&fh, s)));
    }
    let min = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let max = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let spread = if ratios.is_empty() { f64::NAN } else { max / min };
    EquivalenceReport {
        s,
        pass: !ratios.is_empty() && spread <= EQUIVALENCE_SPREAD_LIMIT,
        ratios,
        excluded,
        min,
        max,
        spread,
    }
}
