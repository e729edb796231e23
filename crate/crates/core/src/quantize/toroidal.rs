use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symbol::{Symbol, SymbolTable};
use crate::torus::{forward_fft, inverse_fft, GridFunction, SpectralCoeffs, TorusGrid};

fn check_grid(a: &Symbol, grid: &TorusGrid) -> Result<()> {
    if a.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "symbol has dimension {}, grid {}",
            a.dim(),
            grid.dim()
        )));
    }
    if let Some(t) = a.table() {
        if t.grid() != grid {
            return Err(Error::GridMismatch(format!(
                "symbol table lives on {:?}, function on {:?}",
                t.grid(),
                grid
            )));
        }
    }
    Ok(())
}

fn check_coverage(a: &Symbol, support: &[(Vec<i64>, Complex64)]) -> Result<()> {
    let table = match a.table() {
        Some(t) => t,
        None => match a.extension() {
            Some(e) => e.table(),
            None => return Ok(()),
        },
    };
    for (xi, _) in support {
        for (d, &k) in xi.iter().enumerate() {
            if k < table.lo()[d] || k > table.hi()[d] {
                return Err(Error::OutOfRange {
                    axis: d,
                    freq: k,
                    lo: table.lo()[d],
                    hi: table.hi()[d],
                });
            }
        }
    }
    Ok(())
}

/// `Op(a) f`. Declared-separable symbols use the FFT path, everything else
/// the per-node synthesis sum.
pub fn apply_toroidal(a: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    check_grid(a, f.grid())?;
    apply_toroidal_spectral(a, &forward_fft(f))
}

/// `Op(a)` applied to a function given by its coefficients.
pub fn apply_toroidal_spectral(a: &Symbol, fh: &SpectralCoeffs) -> Result<GridFunction> {
    check_grid(a, fh.grid())?;
    match a.separable_terms() {
        Some(terms) => {
            let grid = *fh.grid();
            let mut out = vec![Complex64::default(); grid.len()];
            for t in terms {
                let spec = fh.multiply(|k| {
                    let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
                    (t.xi_factor)(&kf)
                });
                let part = inverse_fft(&spec);
                for (flat, (o, v)) in out.iter_mut().zip(part.values()).enumerate() {
                    *o += (t.x_factor)(&grid.node(flat)) * v;
                }
            }
            GridFunction::new(grid, out)
        }
        None => apply_toroidal_direct(a, fh),
    }
}

/// `(Op(a) f)(x_j) = Σ_ξ e^{2πi⟨x_j,ξ⟩} a(x_j, ξ) f̂(ξ)` summed over the nonzero
/// coefficients of `f̂`.
pub fn apply_toroidal_direct(a: &Symbol, fh: &SpectralCoeffs) -> Result<GridFunction> {
    check_grid(a, fh.grid())?;
    let grid = *fh.grid();
    let support = fh.nonzero();
    check_coverage(a, &support)?;
    let n = grid.points();
    let roots: Vec<Complex64> = (0..n)
        .map(|t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / n as f64))
        .collect();
    let xind = a.is_x_independent();
    let weights: Option<Vec<Complex64>> = if xind {
        Some(
            support
                .iter()
                .map(|(xi, c)| a.at_freq(xi).map(|v| v * c))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let values: Result<Vec<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let j = grid.multi_index(flat);
            let mut acc = Complex64::default();
            for (s, (xi, c)) in support.iter().enumerate() {
                let phase: i64 = j.iter().zip(xi).map(|(&jd, &k)| jd as i64 * k).sum();
                let e = roots[phase.rem_euclid(n as i64) as usize];
                let w = match &weights {
                    Some(w) => w[s],
                    None => a.at_node(&grid, flat, xi)? * c,
                };
                acc += e * w;
            }
            Ok(acc)
        })
        .collect();
    GridFunction::new(grid, values?)
}

/// `m(D) f = F^{-1}(m · f̂)` for an `x`-independent symbol.
pub fn apply_multiplier(m: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    apply_multiplier_spectral(m, &forward_fft(f))
}

pub fn apply_multiplier_spectral(m: &Symbol, fh: &SpectralCoeffs) -> Result<GridFunction> {
    check_grid(m, fh.grid())?;
    if !m.is_x_independent() {
        return Err(Error::Unsupported(format!(
            "'{}' depends on x and is not a Fourier multiplier",
            m.name()
        )));
    }
    check_coverage(m, &fh.nonzero())?;
    let mut err = None;
    let spec = fh.multiply(|k| match m.at_freq(k) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            Complex64::default()
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(inverse_fft(&spec))
}

fn node_index(grid: &TorusGrid, z: &[f64]) -> Result<usize> {
    let n = grid.points() as f64;
    let mut idx = Vec::with_capacity(z.len());
    for &v in z {
        let t = v.rem_euclid(1.0) * n;
        let r = t.round();
        if (t - r).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "z = {v} is not a node of the tabulation grid"
            )));
        }
        idx.push(r as usize % grid.points());
    }
    Ok(grid.flat_index(&idx))
}

fn freeze_table(t: &SymbolTable, z: &[f64]) -> Result<SymbolTable> {
    let node = node_index(t.grid(), z)?;
    let mut err = None;
    let frozen = SymbolTable::from_fn(*t.grid(), t.lo().to_vec(), t.hi().to_vec(), true, |_, xi| {
        t.get(node, xi).unwrap_or_else(|e| {
            err.get_or_insert(e);
            Complex64::default()
        })
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(frozen),
    }
}

/// Frozen symbol `σ_z(ξ) = a(z, ξ)`.
pub fn freeze(a: &Symbol, z: &[f64]) -> Result<Symbol> {
    if z.len() != a.dim() {
        return Err(Error::InvalidArgument(format!(
            "z has dimension {}, symbol {}",
            z.len(),
            a.dim()
        )));
    }
    if a.is_x_independent() {
        return Ok(a.clone());
    }
    let name = format!("{} at z={z:?}", a.name());
    if let Some(t) = a.table() {
        return Ok(Symbol::from_table(freeze_table(t, z)?, name));
    }
    if let Some(e) = a.extension() {
        let table = Symbol::from_table(freeze_table(e.table(), z)?, name);
        return crate::symbol::extend_symbol(&table);
    }
    let a = a.clone();
    let z = z.to_vec();
    let frozen = Symbol::multiplier(a.dim(), name, move |xi| {
        a.eval(&z, xi).expect("closed-form evaluation")
    });
    Ok(frozen)
}

/// `σ_z` for the grid node `flat`.
pub fn freeze_node(a: &Symbol, grid: &TorusGrid, flat: usize) -> Result<Symbol> {
    freeze(a, &grid.node(flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::SeparableTerm;
    use crate::torus::{bracket, sample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_fn(grid: TorusGrid, rng: &mut ChaCha8Rng) -> GridFunction {
        let v = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        GridFunction::new(grid, v).unwrap()
    }

    fn direct_double_sum(a: &Symbol, f: &GridFunction) -> Vec<Complex64> {
        let grid = *f.grid();
        let n = grid.len() as f64;
        (0..grid.len())
            .map(|j| {
                let x = grid.node(j);
                let mut acc = Complex64::default();
                for k in 0..grid.len() {
                    let xi = grid.frequency(k);
                    let mut fh = Complex64::default();
                    for jp in 0..grid.len() {
                        let y = grid.node(jp);
                        let ph: f64 = y.iter().zip(&xi).map(|(a, &b)| a * b as f64).sum();
                        fh += f.values()[jp] * Complex64::from_polar(1.0, -2.0 * PI * ph);
                    }
                    let ph: f64 = x.iter().zip(&xi).map(|(a, &b)| a * b as f64).sum();
                    acc += Complex64::from_polar(1.0, 2.0 * PI * ph)
                        * a.at_node(&grid, j, &xi).unwrap()
                        * fh
                        / n;
                }
                acc
            })
            .collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_and_multiplication() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_fn(grid, &mut rng);
        let one = Symbol::constant(1, Complex64::new(1.0, 0.0));
        assert!(max_diff(apply_toroidal(&one, &f).unwrap().values(), f.values()) < 1e-12);
        let e = |x: &[f64]| Complex64::from_polar(1.0, 2.0 * PI * x[0]);
        let mult = Symbol::closed(1, "e(x)", move |x, _| e(x));
        let g = apply_toroidal(&mult, &f).unwrap();
        let expect: Vec<Complex64> = (0..grid.len()).map(|j| e(&grid.node(j)) * f.values()[j]).collect();
        assert!(max_diff(g.values(), &expect) < 1e-12);
    }

    #[test]
    fn paths_agree_with_double_sum() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<Complex64> = (0..16 * 17)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let table = SymbolTable::from_fn(grid, vec![-8], vec![8], false, |row, xi| {
            vals[row * 17 + (xi[0] + 8) as usize]
        })
        .unwrap();
        let a = Symbol::from_table(table, "random");
        let f = random_fn(grid, &mut rng);
        let want = direct_double_sum(&a, &f);
        assert!(max_diff(apply_toroidal(&a, &f).unwrap().values(), &want) < 1e-10);

        let sep = Symbol::separable(
            1,
            "sep",
            vec![
                SeparableTerm::new(
                    |x| Complex64::new((2.0 * PI * x[0]).cos(), 0.0),
                    |xi| Complex64::new(1.0 / bracket(xi), 0.0),
                ),
                SeparableTerm::new(|x| Complex64::new(x[0], 0.0), |xi| Complex64::new(0.0, xi[0])),
            ],
        );
        let want = direct_double_sum(&sep, &f);
        assert!(max_diff(apply_toroidal(&sep, &f).unwrap().values(), &want) < 1e-10);
        let direct = apply_toroidal_direct(&sep, &forward_fft(&f)).unwrap();
        assert!(max_diff(direct.values(), &want) < 1e-10);
    }

    #[test]
    fn multiplier_examples() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_fn(grid, &mut rng);
        let delta = Symbol::multiplier(1, "δ_3", |xi| {
            Complex64::new(if xi[0] == 3.0 { 1.0 } else { 0.0 }, 0.0)
        });
        let g = apply_multiplier(&delta, &f).unwrap();
        let c3 = forward_fft(&f).get(&[3]).unwrap();
        let want = sample(|x| c3 * Complex64::from_polar(1.0, 6.0 * PI * x[0]), &grid).unwrap();
        assert!(max_diff(g.values(), want.values()) < 1e-12);

        let cut = |xi: &[f64]| Complex64::new(if bracket(xi) <= 4.0 { 1.0 } else { 0.0 }, 0.0);
        let m = Symbol::multiplier(1, "cut", cut);
        let closed = Symbol::closed(1, "cut", move |_, xi| cut(xi));
        let u = apply_multiplier(&m, &f).unwrap();
        let v = apply_toroidal(&closed, &f).unwrap();
        assert!(max_diff(u.values(), v.values()) < 1e-12);
        assert!(apply_multiplier(&closed, &f).is_err());
    }

    #[test]
    fn freeze_reproduces_operator_on_the_diagonal() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_fn(grid, &mut rng);
        let a = Symbol::closed(1, "a", |x, xi| {
            Complex64::from_polar(1.0 / bracket(xi).sqrt(), (1.0 + 0.5 * (2.0 * PI * x[0]).sin()) * xi[0])
        });
        let full = apply_toroidal(&a, &f).unwrap();
        for j in 0..grid.len() {
            let s = freeze_node(&a, &grid, j).unwrap();
            let v = apply_multiplier(&s, &f).unwrap().values()[j];
            assert!((v - full.values()[j]).norm() < 1e-10);
        }
        let c = Symbol::closed(1, "c", |x, _| Complex64::new(2.0 + x[0], 0.0));
        let s = freeze(&c, &[0.25]).unwrap();
        assert!((s.at_freq(&[7]).unwrap().re - 2.25).abs() < 1e-15);

        let table = SymbolTable::tabulate(&a, grid, 16, 0).unwrap();
        let ta = Symbol::from_table(table, "a");
        assert!(freeze(&ta, &[0.1]).is_err());
        let frozen = freeze(&ta, &[0.125]).unwrap();
        assert_eq!(frozen.at_freq(&[5]).unwrap(), a.eval(&[0.125], &[5.0]).unwrap());
    }

    #[test]
    fn coverage_gap_is_an_error() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let table = SymbolTable::from_fn(grid, vec![-2], vec![2], true, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        let a = Symbol::from_table(table, "narrow");
        let f = sample(|x| Complex64::from_polar(1.0, 2.0 * PI * 5.0 * x[0]), &grid).unwrap();
        assert!(matches!(apply_toroidal(&a, &f), Err(Error::OutOfRange { .. })));
    }
}
