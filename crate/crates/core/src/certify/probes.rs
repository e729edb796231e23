//! Test functions: lacunary series, random band-limited probes, single modes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::besov_norm_spectral;
use crate::torus::{bracket_int, forward_fft, inverse_fft, sample, GridFunction, SpectralCoeffs, TorusGrid};

/// Frequencies per band probe.
pub const PROBE_MODES: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeSpec {
    Weierstrass { s: f64, terms: u32 },
    BandRandom { band: u32, seed: u64 },
    SingleMode { freq: Vec<i64> },
}

impl ProbeSpec {
    pub fn build(&self, grid: &TorusGrid) -> Result<GridFunction> {
        match self {
            Self::Weierstrass { s, terms } => weierstrass(*s, *terms, grid),
            Self::BandRandom { band, seed } => band_probe(*band, grid, *seed),
            Self::SingleMode { freq } => single_mode(freq, grid),
        }
    }
}

/// `W(x) = Σ_{j=0..M} 2^{-js} cos(2π 2^j x_1)`.
pub fn weierstrass(s: f64, terms: u32, grid: &TorusGrid) -> Result<GridFunction> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!("Weierstrass needs 0 < s < 1, got {s}")));
    }
    if terms >= 62 || (1u64 << terms) as usize >= grid.points() / 2 {
        return Err(Error::OutOfRange {
            axis: 0,
            freq: if terms >= 62 { i64::MAX } else { 1i64 << terms },
            lo: 0,
            hi: grid.points() as i64 / 2 - 1,
        });
    }
    sample(
        |x| {
            let v: f64 = (0..=terms)
                .map(|j| (-(j as f64) * s).exp2() * (2.0 * PI * (j as f64).exp2() * x[0]).cos())
                .sum();
            Complex64::new(v, 0.0)
        },
        grid,
    )
}

/// `e^{2πi⟨k, x⟩}`.
pub fn single_mode(freq: &[i64], grid: &TorusGrid) -> Result<GridFunction> {
    if freq.len() != grid.dim() {
        return Err(Error::InvalidArgument("mode has the wrong dimension".into()));
    }
    let mut c = SpectralCoeffs::zeros(*grid);
    c.set(freq, Complex64::new(1.0, 0.0))?;
    Ok(inverse_fft(&c))
}

/// `32` unimodular coefficients with random phases on lattice points drawn
/// uniformly from `2^{l-1} <= ⟨ξ⟩ <= 2^{l+1}`, scaled to `B^0_{∞,∞}` norm 1.
pub fn band_probe(l: u32, grid: &TorusGrid, seed: u64) -> Result<GridFunction> {
    Ok(inverse_fft(&band_probe_spectral(l, grid, seed)?))
}

/// Coefficients of `band_probe`, with exact support.
pub fn band_probe_spectral(l: u32, grid: &TorusGrid, seed: u64) -> Result<SpectralCoeffs> {
    if l == 0 || l > 40 {
        return Err(Error::InvalidArgument(format!("band index {l} outside 1..=40")));
    }
    let (lo, hi) = ((l as f64 - 1.0).exp2(), (l as f64 + 1.0).exp2());
    let reach = (hi.floor() as i64).min(grid.nyquist() - 1);
    if hi > grid.nyquist() as f64 {
        return Err(Error::OutOfRange {
            axis: 0,
            freq: hi as i64,
            lo: -(grid.nyquist() - 1),
            hi: grid.nyquist() - 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = SpectralCoeffs::zeros(*grid);
    let dim = grid.dim();
    let mut k = vec![0i64; dim];
    let mut drawn = 0;
    while drawn < PROBE_MODES {
        for v in k.iter_mut() {
            *v = rng.gen_range(-reach..=reach);
        }
        let b = bracket_int(&k);
        if b < lo || b > hi {
            continue;
        }
        let phase = Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>());
        let old = c.get(&k).unwrap_or_default();
        c.set(&k, old + phase)?;
        drawn += 1;
    }
    let norm = besov_norm_spectral(&c, 0.0);
    if norm == 0.0 {
        return Err(Error::InvalidArgument(format!("band {l} probe cancelled to zero")));
    }
    Ok(c.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// Seed of probe `p` in band `l` for a run seeded with `base`.
pub fn probe_seed(base: u64, l: u32, p: u32) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add((l as u64) << 20 | p as u64)
}

/// Spectrum support check used by tests and reports.
pub fn spectral_support(f: &GridFunction) -> Vec<Vec<i64>> {
    forward_fft(f)
        .nonzero()
        .into_iter()
        .filter(|(_, c)| c.norm() > 1e-12)
        .map(|(k, _)| k)
        .collect()
}
