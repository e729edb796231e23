//! Kohn–Nirenberg and Weyl quantization on a box `[-T/2, T/2)^n` with nodes
//! `x_j = -T/2 + j T/N`. Inputs are zero outside the box.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symbol::Symbol;
use crate::torus::{forward_fft, inverse_fft, GridFunction, SpectralCoeffs, TorusGrid};

/// Relative boundary mass above which results carry a truncation warning.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EuclideanGrid {
    lattice: TorusGrid,
    length: f64,
}

impl EuclideanGrid {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "Euclidean grids support dimension 1 or 2, got {dim}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!("box length {length} must be positive")));
        }
        Ok(Self {
            lattice: TorusGrid::new(dim, points)?,
            length,
        })
    }

    /// Box of side `√N`, which balances the `x` and `ξ` extents.
    pub fn balanced(dim: usize, points: usize) -> Result<Self> {
        Self::new(dim, points, (points as f64).sqrt())
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn points(&self) -> usize {
        self.lattice.points()
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points() as f64
    }

    pub fn dxi(&self) -> f64 {
        1.0 / self.length
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.length / 2.0 + j as f64 * self.dx()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.lattice
            .multi_index(flat)
            .into_iter()
            .map(|j| self.coord(j))
            .collect()
    }

    /// Frequency vector of the FFT-ordered index `flat`.
    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        self.lattice
            .frequency(flat)
            .into_iter()
            .map(|k| k as f64 / self.length)
            .collect()
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> Complex64) -> Result<EuclideanSamples> {
        let values: Vec<Complex64> = (0..self.len()).map(|i| f(&self.node(i))).collect();
        EuclideanSamples::new(*self, values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanSamples {
    grid: EuclideanGrid,
    values: Vec<Complex64>,
}

impl EuclideanSamples {
    pub fn new(grid: EuclideanGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: grid.lattice.multi_index(i),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &EuclideanGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Largest modulus on the outermost layer of nodes relative to the peak.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.grid.points();
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                self.grid
                    .lattice
                    .multi_index(*i)
                    .iter()
                    .any(|&j| j == 0 || j == n - 1)
            })
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        edge / peak
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorOutput {
    pub samples: EuclideanSamples,
    pub input_boundary_mass: f64,
    pub output_boundary_mass: f64,
    pub truncation_warning: Option<String>,
}

impl OperatorOutput {
    fn new(input: &EuclideanSamples, values: Vec<Complex64>) -> Result<Self> {
        let samples = EuclideanSamples::new(input.grid, values)?;
        let (bi, bo) = (input.boundary_mass(), samples.boundary_mass());
        let truncation_warning = (bi.max(bo) > BOUNDARY_MASS_LIMIT).then(|| {
            format!(
                "relative boundary mass {:.3e} (input) / {:.3e} (output) exceeds {BOUNDARY_MASS_LIMIT:e}; box truncation is not negligible",
                bi, bo
            )
        });
        Ok(Self {
            samples,
            input_boundary_mass: bi,
            output_boundary_mass: bo,
            truncation_warning,
        })
    }

    pub fn values(&self) -> &[Complex64] {
        self.samples.values()
    }
}

fn check_dim(a: &Symbol, grid: &EuclideanGrid) -> Result<()> {
    if a.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "symbol has dimension {}, grid {}",
            a.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// Twice-refined lattice carrying the zero-padded samples. Frequencies
/// `ξ_k = k/(2T)` keep the kernel in `x - y ∈ (-T, T)` free of aliasing.
fn padded(grid: &EuclideanGrid) -> Result<TorusGrid> {
    TorusGrid::new(grid.dim(), 2 * grid.points())
}

fn padded_frequency(grid: &EuclideanGrid, fine: &TorusGrid, flat: usize) -> Vec<f64> {
    fine.frequency(flat)
        .into_iter()
        .map(|k| k as f64 / (2.0 * grid.length))
        .collect()
}

/// `c_k = (2N)^{-n} Σ_j f_j e^{-2πi⟨j,k⟩/2N}` of the zero-padded samples. The
/// box offset phases cancel between analysis and synthesis.
fn padded_coeffs(f: &EuclideanSamples, fine: &TorusGrid) -> Result<SpectralCoeffs> {
    let mut buf = vec![Complex64::default(); fine.len()];
    for (i, v) in f.values.iter().enumerate() {
        buf[fine.flat_index(&f.grid.lattice.multi_index(i))] = *v;
    }
    Ok(forward_fft(&GridFunction::new(*fine, buf)?))
}

fn unpad(grid: &EuclideanGrid, fine: &TorusGrid, values: &[Complex64]) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| values[fine.flat_index(&grid.lattice.multi_index(i))])
        .collect()
}

/// `∫∫ e^{2πi(x-y)·ξ} a(x, ξ) f(y) dy dξ` with `y` over the box and the
/// `ξ` integral sampled at step `1/(2T)`.
pub fn kn_apply_euclidean(a: &Symbol, f: &EuclideanSamples) -> Result<OperatorOutput> {
    let grid = f.grid;
    check_dim(a, &grid)?;
    let fine = padded(&grid)?;
    let c = padded_coeffs(f, &fine)?;
    let values = if a.is_x_independent() {
        let x0 = vec![0.0; grid.dim()];
        let mut m = Vec::with_capacity(fine.len());
        for i in 0..fine.len() {
            m.push(a.eval(&x0, &padded_frequency(&grid, &fine, i))?);
        }
        let spec = SpectralCoeffs::new(fine, c.coeffs().iter().zip(&m).map(|(u, v)| u * v).collect())?;
        unpad(&grid, &fine, inverse_fft(&spec).values())
    } else {
        let n = fine.points();
        let roots: Vec<Complex64> = (0..n)
            .map(|t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / n as f64))
            .collect();
        let support: Vec<(Vec<i64>, Vec<f64>, Complex64)> = (0..fine.len())
            .filter(|&i| c.coeffs()[i] != Complex64::default())
            .map(|i| (fine.frequency(i), padded_frequency(&grid, &fine, i), c.coeffs()[i]))
            .collect();
        let r: Result<Vec<Complex64>> = (0..grid.len())
            .into_par_iter()
            .map(|flat| {
                let x = grid.node(flat);
                let j = grid.lattice.multi_index(flat);
                let mut acc = Complex64::default();
                for (k, xi, coeff) in &support {
                    let ph: i64 = j.iter().zip(k).map(|(&jd, &kd)| jd as i64 * kd).sum();
                    acc += roots[ph.rem_euclid(n as i64) as usize] * a.eval(&x, xi)? * coeff;
                }
                Ok(acc)
            })
            .collect();
        r?
    };
    OperatorOutput::new(f, values)
}

/// Dense square matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub size: usize,
    pub data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![Complex64::default(); size * size],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.size + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            size: self.size,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.size;
        let mut data = vec![Complex64::default(); n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::default() {
                    continue;
                }
                let b = &other.data[k * n..(k + 1) * n];
                for (r, v) in row.iter_mut().zip(b) {
                    *r += a * v;
                }
            }
        });
        Self { size: n, data }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.data
            .par_chunks(self.size)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Weyl kernel matrix `M[j][j'] = ΔxΔξ Σ_k e^{2πi(x_j - x_j')ξ_k} a((x_j + x_j')/2, ξ_k)`
/// with `ξ_k = k/(2T)`, `-N <= k < N` per axis.
pub fn weyl_matrix(a: &Symbol, grid: &EuclideanGrid) -> Result<DenseMatrix> {
    check_dim(a, grid)?;
    weyl_matrix_with(grid, |x, xis| xis.iter().map(|xi| a.eval(x, xi)).collect())
}

/// Weyl matrix from a row evaluator: `row(x, ξs)` returns the symbol at a
/// midpoint `x` and every padded frequency in `ξs`.
pub(crate) fn weyl_matrix_with(
    grid: &EuclideanGrid,
    row: impl Fn(&[f64], &[Vec<f64>]) -> Result<Vec<Complex64>> + Sync,
) -> Result<DenseMatrix> {
    let dim = grid.dim();
    let n = grid.points();
    let lattice = grid.lattice;
    let fine = padded(grid)?;
    let mids = 2 * n - 1;
    let mid_count = mids.pow(dim as u32);
    let freqs: Vec<Vec<f64>> = (0..fine.len()).map(|i| padded_frequency(grid, &fine, i)).collect();
    // For each midpoint index s = j + j', the inverse DFT of a(x_s/2, ·)
    // evaluated at every difference d = j - j' mod 2N.
    let columns: Result<Vec<Vec<Complex64>>> = (0..mid_count)
        .into_par_iter()
        .map(|s_flat| {
            let mut rest = s_flat;
            let mut x = vec![0.0; dim];
            for d in (0..dim).rev() {
                x[d] = -grid.length / 2.0 + (rest % mids) as f64 * grid.dx() / 2.0;
                rest /= mids;
            }
            let vals = row(&x, &freqs)?;
            Ok(inverse_fft(&SpectralCoeffs::new(fine, vals)?).into_values())
        })
        .collect();
    let columns = columns?;
    let scale = 1.0 / fine.len() as f64;
    let size = lattice.len();
    let m2 = 2 * n;
    let mut m = DenseMatrix::zeros(size);
    m.data.par_chunks_mut(size).enumerate().for_each(|(r, out)| {
        let j = lattice.multi_index(r);
        let mut d_idx = vec![0usize; dim];
        for (col, o) in out.iter_mut().enumerate() {
            let jp = lattice.multi_index(col);
            let mut s_flat = 0usize;
            for d in 0..dim {
                s_flat = s_flat * mids + j[d] + jp[d];
                d_idx[d] = (j[d] + m2 - jp[d]) % m2;
            }
            *o = columns[s_flat][fine.flat_index(&d_idx)] * scale;
        }
    });
    Ok(m)
}

/// `a^w f` via the dense Weyl kernel.
pub fn weyl_apply(a: &Symbol, f: &EuclideanSamples) -> Result<OperatorOutput> {
    let m = weyl_matrix(a, &f.grid)?;
    OperatorOutput::new(f, m.apply(&f.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: &EuclideanGrid) -> EuclideanSamples {
        grid.sample(|x| Complex64::new((-PI * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0))
            .unwrap()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn kn_examples() {
        let grid = EuclideanGrid::balanced(1, 64).unwrap();
        let f = gaussian(&grid);
        let one = Symbol::constant(1, Complex64::new(1.0, 0.0));
        let out = kn_apply_euclidean(&one, &f).unwrap();
        assert!(out.truncation_warning.is_none());
        assert!(max_diff(out.values(), f.values()) < 1e-8);

        let xi = Symbol::multiplier(1, "ξ", |xi| Complex64::new(xi[0], 0.0));
        let d = grid
            .sample(|x| Complex64::new(-2.0 * PI * x[0] * (-PI * x[0] * x[0]).exp(), 0.0) / Complex64::new(0.0, 2.0 * PI))
            .unwrap();
        assert!(max_diff(kn_apply_euclidean(&xi, &f).unwrap().values(), d.values()) < 1e-6);

        let x = Symbol::closed(1, "x", |x, _| Complex64::new(x[0], 0.0));
        let xf = grid.sample(|x| Complex64::new(x[0] * (-PI * x[0] * x[0]).exp(), 0.0)).unwrap();
        assert!(max_diff(kn_apply_euclidean(&x, &f).unwrap().values(), xf.values()) < 1e-8);
    }

    #[test]
    fn weyl_examples_and_kn_agreement() {
        let grid = EuclideanGrid::balanced(1, 64).unwrap();
        let f = gaussian(&grid);
        let one = Symbol::constant(1, Complex64::new(1.0, 0.0));
        assert!(max_diff(weyl_apply(&one, &f).unwrap().values(), f.values()) < 1e-8);

        let m = Symbol::multiplier(1, "m", |xi| Complex64::new(1.0 / (1.0 + xi[0] * xi[0]), xi[0]));
        let u = weyl_apply(&m, &f).unwrap();
        let v = kn_apply_euclidean(&m, &f).unwrap();
        assert!(max_diff(u.values(), v.values()) < 1e-12);

        let x = Symbol::closed(1, "x", |x, _| Complex64::new(x[0], 0.0));
        let xf = grid.sample(|x| Complex64::new(x[0] * (-PI * x[0] * x[0]).exp(), 0.0)).unwrap();
        assert!(max_diff(weyl_apply(&x, &f).unwrap().values(), xf.values()) < 1e-6);
    }

    #[test]
    fn two_dimensional_identity() {
        let grid = EuclideanGrid::balanced(2, 16).unwrap();
        let f = gaussian(&grid);
        let one = Symbol::constant(2, Complex64::new(1.0, 0.0));
        assert!(max_diff(weyl_apply(&one, &f).unwrap().values(), f.values()) < 1e-8);
        let x1 = Symbol::closed(2, "x1", |x, _| Complex64::new(x[0], 0.0));
        let want: Vec<Complex64> = (0..grid.len()).map(|i| f.values()[i] * grid.node(i)[0]).collect();
        assert!(max_diff(weyl_apply(&x1, &f).unwrap().values(), &want) < 1e-8);
        assert!(max_diff(kn_apply_euclidean(&x1, &f).unwrap().values(), &want) < 1e-8);
    }

    #[test]
    fn wide_input_triggers_warning() {
        let grid = EuclideanGrid::balanced(1, 32).unwrap();
        let f = grid.sample(|x| Complex64::new((-0.1 * x[0] * x[0]).exp(), 0.0)).unwrap();
        let one = Symbol::constant(1, Complex64::new(1.0, 0.0));
        assert!(kn_apply_euclidean(&one, &f).unwrap().truncation_warning.is_some());
    }
}
