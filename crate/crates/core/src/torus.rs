//! Periodic grids on the torus `[0,1)^n`, sampled functions and the exact
//! toroidal Fourier transform of trigonometric polynomials.
//!
//! Conventions: analysis is `c(ξ) = N^{-n} Σ_j f(x_j) e^{-2πi⟨x_j,ξ⟩}` and
//! synthesis is `f(x) = Σ_ξ c(ξ) e^{+2πi⟨x,ξ⟩}`. Frequencies are centred
//! integers `-N/2 <= ξ_d < N/2`; storage uses FFT order, so the per-axis
//! index `i` holds frequency `i` for `i < N/2` and `i - N` otherwise.

use std::cell::RefCell;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Japanese bracket `⟨ξ⟩ = (1 + |ξ|²)^{1/2}`.
pub fn bracket(xi: &[f64]) -> f64 {
    (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `⟨ξ⟩` for a lattice frequency.
pub fn bracket_int(xi: &[i64]) -> f64 {
    (1.0 + xi.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    points: usize,
}

impl TorusGrid {
    /// Upper bound on the total node count `N^n`.
    pub const MAX_NODES: usize = 1 << 26;

    pub fn new(dim: usize, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        let total = points
            .checked_pow(dim as u32)
            .filter(|&t| t <= Self::MAX_NODES)
            .ok_or_else(|| {
                Error::InvalidGrid(format!("{points}^{dim} exceeds {} nodes", Self::MAX_NODES))
            })?;
        debug_assert!(total > 0);
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Total number of nodes `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `N/2`; stored frequencies satisfy `-N/2 <= ξ_d < N/2`.
    pub fn nyquist(&self) -> i64 {
        (self.points / 2) as i64
    }

    pub fn step(&self) -> f64 {
        1.0 / self.points as f64
    }

    /// Row-major multi-index of a flat node index (axis 0 slowest).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for d in (0..self.dim).rev() {
            idx[d] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates `x_j = j/N` of a flat node index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .map(|j| j as f64 / self.points as f64)
            .collect()
    }

    /// Per-axis wrap map from storage index to signed frequency.
    pub fn freq_of_index(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Inverse of [`freq_of_index`](Self::freq_of_index); `None` outside the box.
    pub fn index_of_freq(&self, xi: i64) -> Option<usize> {
        let half = self.nyquist();
        if xi < -half || xi >= half {
            return None;
        }
        let n = self.points as i64;
        Some(if xi >= 0 { xi as usize } else { (xi + n) as usize })
    }

    /// Frequency multi-index stored at a flat spectral index.
    pub fn frequency(&self, flat: usize) -> Vec<i64> {
        self.multi_index(flat)
            .into_iter()
            .map(|i| self.freq_of_index(i))
            .collect()
    }

    pub fn flat_of_frequency(&self, xi: &[i64]) -> Option<usize> {
        if xi.len() != self.dim {
            return None;
        }
        let mut flat = 0;
        for &k in xi {
            flat = flat * self.points + self.index_of_freq(k)?;
        }
        Some(flat)
    }

    /// Largest `⟨ξ⟩` over stored frequencies.
    pub fn max_bracket(&self) -> f64 {
        let h = self.nyquist() as f64;
        (1.0 + self.dim as f64 * h * h).sqrt()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Unnormalized n-dimensional FFT over a row-major buffer.
fn fft_nd(grid: &TorusGrid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.points();
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); n];
    for axis in 0..grid.dim() {
        let stride = n.pow((grid.dim() - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = n * stride;
        for start in (0..data.len()).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// A complex field sampled on the nodes of a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: grid.multi_index(pos),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("operands live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| op(*a, *b))
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// CSV with columns `j1..jn,re,im`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.grid.dim()).map(|d| format!("j{d}")).collect();
        header.extend(["re".into(), "im".into()]);
        w.write_record(&header)?;
        for (flat, v) in self.values.iter().enumerate() {
            let mut rec: Vec<String> = self
                .grid
                .multi_index(flat)
                .iter()
                .map(|j| j.to_string())
                .collect();
            rec.push(v.re.to_string());
            rec.push(v.im.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`write_csv`](Self::write_csv). The grid is
    /// inferred from the number of index columns and rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let dim = headers.iter().filter(|h| h.starts_with('j')).count();
        if dim == 0 || headers.len() != dim + 2 {
            return Err(Error::InvalidArgument(
                "expected columns j1..jn,re,im".into(),
            ));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse_err = |what: &str| {
                Error::InvalidArgument(format!(
                    "bad {what} on line {}",
                    rec.position().map(|p| p.line()).unwrap_or(0)
                ))
            };
            let idx: Vec<usize> = (0..dim)
                .map(|d| rec[d].trim().parse::<usize>().map_err(|_| parse_err("index")))
                .collect::<Result<_>>()?;
            let re: f64 = rec[dim].trim().parse().map_err(|_| parse_err("re"))?;
            let im: f64 = rec[dim + 1].trim().parse().map_err(|_| parse_err("im"))?;
            rows.push((idx, Complex64::new(re, im)));
        }
        let points = (rows.len() as f64).powf(1.0 / dim as f64).round() as usize;
        let grid = TorusGrid::new(dim, points)?;
        if grid.len() != rows.len() {
            return Err(Error::GridMismatch(format!(
                "{} rows is not a full {dim}-dimensional grid",
                rows.len()
            )));
        }
        let mut values = vec![Complex64::default(); grid.len()];
        let mut seen = vec![false; grid.len()];
        for (idx, v) in rows {
            if idx.iter().any(|&j| j >= points) {
                return Err(Error::InvalidArgument(format!("node {idx:?} outside grid")));
            }
            let flat = grid.flat_index(&idx);
            if seen[flat] {
                return Err(Error::InvalidArgument(format!("duplicate node {idx:?}")));
            }
            seen[flat] = true;
            values[flat] = v;
        }
        GridFunction::new(grid, values)
    }
}

/// Fourier coefficients of a [`GridFunction`], stored in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} nodes",
                coeffs.len(),
                grid.len()
            )));
        }
        if let Some(pos) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: grid.multi_index(pos),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Raw coefficients in FFT order; use [`TorusGrid::frequency`] for the
    /// frequency of a position.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, xi: &[i64]) -> Option<Complex64> {
        self.grid.flat_of_frequency(xi).map(|i| self.coeffs[i])
    }

    pub fn set(&mut self, xi: &[i64], value: Complex64) -> Result<()> {
        let flat = self.grid.flat_of_frequency(xi).ok_or_else(|| Error::OutOfRange {
            axis: xi
                .iter()
                .position(|&k| self.grid.index_of_freq(k).is_none())
                .unwrap_or(0),
            freq: xi.iter().copied().find(|&k| self.grid.index_of_freq(k).is_none()).unwrap_or(0),
            lo: -self.grid.nyquist(),
            hi: self.grid.nyquist() - 1,
        })?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                node: self.grid.multi_index(flat),
            });
        }
        self.coeffs[flat] = value;
        Ok(())
    }

    /// `(frequency, coefficient)` for every exactly-nonzero coefficient.
    pub fn nonzero(&self) -> Vec<(Vec<i64>, Complex64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::default())
            .map(|(i, c)| (self.grid.frequency(i), *c))
            .collect()
    }

    /// Pointwise product with a frequency-side function.
    pub fn multiply(&self, mut m: impl FnMut(&[i64]) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if *c == Complex64::default() {
                    *c
                } else {
                    c * m(&self.grid.frequency(i))
                }
            })
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    /// CSV with columns `k1..kn,re,im` (signed frequencies).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.grid.dim()).map(|d| format!("k{d}")).collect();
        header.extend(["re".into(), "im".into()]);
        w.write_record(&header)?;
        for (flat, v) in self.coeffs.iter().enumerate() {
            let mut rec: Vec<String> = self
                .grid
                .frequency(flat)
                .iter()
                .map(|k| k.to_string())
                .collect();
            rec.push(v.re.to_string());
            rec.push(v.im.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Analysis transform with the `N^{-n}` normalization.
pub fn forward_fft(f: &GridFunction) -> SpectralCoeffs {
    let mut data = f.values.clone();
    fft_nd(&f.grid, &mut data, FftDirection::Forward);
    let scale = 1.0 / f.grid.len() as f64;
    for v in &mut data {
        *v *= scale;
    }
    SpectralCoeffs {
        grid: f.grid,
        coeffs: data,
    }
}

/// Synthesis transform (no normalization).
pub fn inverse_fft(c: &SpectralCoeffs) -> GridFunction {
    let mut data = c.coeffs.clone();
    fft_nd(&c.grid, &mut data, FftDirection::Inverse);
    GridFunction {
        grid: c.grid,
        values: data,
    }
}

/// Evaluates a closed-form expression at every grid node.
pub fn sample(expr: impl Fn(&[f64]) -> Complex64, grid: &TorusGrid) -> Result<GridFunction> {
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let v = expr(&grid.node(flat));
        if !v.is_finite() {
            return Err(Error::NonFinite {
                node: grid.multi_index(flat),
            });
        }
        values.push(v);
    }
    Ok(GridFunction { grid: *grid, values })
}

/// Maximum modulus over the grid nodes.
pub fn sup_norm(f: &GridFunction) -> f64 {
    f.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(1, 12).is_err());
        assert!(TorusGrid::new(1, 4).is_err());
        assert!(TorusGrid::new(4, 8).is_err());
        assert!(TorusGrid::new(3, 1024).is_err());
        assert!(TorusGrid::new(2, 4096).is_ok());
    }

    #[test]
    fn frequency_wrap_is_a_bijection() {
        let g = TorusGrid::new(2, 16).unwrap();
        for flat in 0..g.len() {
            let xi = g.frequency(flat);
            assert!(xi.iter().all(|&k| (-8..8).contains(&k)));
            assert_eq!(g.flat_of_frequency(&xi), Some(flat));
        }
        assert_eq!(g.flat_of_frequency(&[8, 0]), None);
        assert_eq!(g.flat_of_frequency(&[-8, 0]), Some(8 * 16));
    }

    #[test]
    fn constant_has_only_zero_mode() {
        let g = TorusGrid::new(2, 8).unwrap();
        let f = sample(|_| c(1.0), &g).unwrap();
        let fh = forward_fft(&f);
        for (i, v) in fh.coeffs().iter().enumerate() {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            assert!((v - c(expect)).norm() < 1e-15);
        }
    }

    #[test]
    fn single_mode_round_trip() {
        let g = TorusGrid::new(1, 16).unwrap();
        let k = -5;
        let f = sample(|x| Complex64::from_polar(1.0, 2.0 * PI * x[0] * k as f64), &g).unwrap();
        let fh = forward_fft(&f);
        for (i, v) in fh.coeffs().iter().enumerate() {
            let expect = if g.frequency(i)[0] == k { 1.0 } else { 0.0 };
            assert!((v - c(expect)).norm() < 1e-14);
        }
        let mut delta = SpectralCoeffs::zeros(g);
        delta.set(&[k], c(1.0)).unwrap();
        let back = inverse_fft(&delta);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn sample_reports_offending_node() {
        let g = TorusGrid::new(1, 8).unwrap();
        let err = sample(|x| c(1.0 / (x[0] - 0.25)), &g).unwrap_err();
        match err {
            Error::NonFinite { node } => assert_eq!(node, vec![2]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sample_cosine_and_sup() {
        let g = TorusGrid::new(1, 8).unwrap();
        let f = sample(|x| c((2.0 * PI * x[0]).cos()), &g).unwrap();
        for (j, v) in f.values().iter().enumerate() {
            assert!((v.re - (2.0 * PI * j as f64 / 8.0).cos()).abs() < 1e-15);
        }
        let three = sample(|_| c(3.0), &g).unwrap();
        assert_eq!(sup_norm(&three), 3.0);
        let wave = sample(|x| Complex64::from_polar(1.0, 2.0 * PI * x[0]), &g).unwrap();
        assert!((sup_norm(&wave) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let g = TorusGrid::new(2, 8).unwrap();
        let f = sample(|x| Complex64::new(x[0] + 0.1, x[1] * x[0] - 1.0 / 3.0), &g).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }
}
