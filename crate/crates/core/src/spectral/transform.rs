//! Discrete Fourier transform pair between lattice samples on `[-pi, pi)^d`
//! and Fourier coefficients with the `exp(i k.x)` convention.
//!
//! Real fields are transformed two at a time by packing them into the real
//! and imaginary parts of a single complex transform.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{PhysicalField, SpectralField, SpectralScalar};
use super::grid::GridSpec;
use crate::error::{Error, Result};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalized in-place d-dimensional FFT (row-major, last axis contiguous).
fn fft_nd(grid: GridSpec, buf: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let d = grid.dim();
    let p = plans(n);
    let plan = if inverse { &p.inverse } else { &p.forward };
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    let mut lines = vec![Complex64::new(0.0, 0.0); buf.len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            plan.process_with_scratch(buf, &mut scratch);
            continue;
        }
        let outer = buf.len() / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let line = (o * stride + inner) * n;
                let base = o * n * stride + inner;
                for j in 0..n {
                    lines[line + j] = buf[base + j * stride];
                }
            }
        }
        plan.process_with_scratch(&mut lines, &mut scratch);
        for o in 0..outer {
            for inner in 0..stride {
                let line = (o * stride + inner) * n;
                let base = o * n * stride + inner;
                for j in 0..n {
                    buf[base + j * stride] = lines[line + j];
                }
            }
        }
    }
}

/// Lattice samples of real functions given by their coefficients.
pub(crate) fn inverse_real_many(grid: GridSpec, coeffs: &[&[Complex64]]) -> Vec<Vec<f64>> {
    let t = grid.tables();
    let len = grid.len();
    let mut out = Vec::with_capacity(coeffs.len());
    for pair in coeffs.chunks(2) {
        let a = pair[0];
        let b = pair.get(1);
        let mut buf: Vec<Complex64> = (0..len)
            .map(|i| {
                let bi = b.map(|b| b[i]).unwrap_or_default();
                (a[i] + Complex64::new(-bi.im, bi.re)) * t.phase[i]
            })
            .collect();
        fft_nd(grid, &mut buf, true);
        out.push(buf.iter().map(|v| v.re).collect());
        if b.is_some() {
            out.push(buf.iter().map(|v| v.im).collect());
        }
    }
    out
}

/// Fourier coefficients of real lattice samples (all slots, including the
/// mean and the Nyquist planes).
pub(crate) fn forward_real_many(grid: GridSpec, samples: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let t = grid.tables();
    let len = grid.len();
    let norm = 1.0 / len as f64;
    let mut out = Vec::with_capacity(samples.len());
    for pair in samples.chunks(2) {
        let a = pair[0];
        let b = pair.get(1);
        let mut buf: Vec<Complex64> = (0..len)
            .map(|i| Complex64::new(a[i], b.map(|b| b[i]).unwrap_or(0.0)))
            .collect();
        fft_nd(grid, &mut buf, false);
        for (i, v) in buf.iter_mut().enumerate() {
            *v *= norm * t.phase[i];
        }
        match b {
            None => out.push(buf),
            Some(_) => {
                let half = Complex64::new(0.5, 0.0);
                let mut ca = Vec::with_capacity(len);
                let mut cb = Vec::with_capacity(len);
                for i in 0..len {
                    let f = buf[i];
                    let g = buf[t.neg[i]].conj();
                    ca.push((f + g) * half);
                    // (f - g) / (2i)
                    let diff = f - g;
                    cb.push(Complex64::new(diff.im * 0.5, -diff.re * 0.5));
                }
                out.push(ca);
                out.push(cb);
            }
        }
    }
    out
}

/// Sample a spectral field on the lattice.
pub fn to_physical(field: &SpectralField) -> PhysicalField {
    let grid = field.grid();
    let comps: Vec<&[Complex64]> = (0..grid.dim()).map(|c| field.component(c)).collect();
    let samples = inverse_real_many(grid, &comps);
    PhysicalField::new(grid, samples).expect("component count matches grid")
}

/// Fourier coefficients of lattice samples; the mean and the Nyquist planes
/// are discarded.
pub fn to_spectral(samples: &PhysicalField) -> SpectralField {
    let grid = samples.grid();
    let refs: Vec<&[f64]> = samples.components().iter().map(|c| c.as_slice()).collect();
    let mut comps = forward_real_many(grid, &refs);
    let t = grid.tables();
    for comp in comps.iter_mut() {
        for (i, v) in comp.iter_mut().enumerate() {
            if !t.retained[i] {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    SpectralField::from_components(grid, comps)
}

pub fn scalar_to_physical(phi: &SpectralScalar) -> Vec<f64> {
    inverse_real_many(phi.grid(), &[phi.coeffs()]).pop().expect("one output")
}

/// Fourier coefficients of scalar samples; the mean is kept, Nyquist planes dropped.
pub fn scalar_to_spectral(grid: GridSpec, samples: &[f64]) -> Result<SpectralScalar> {
    check_len(grid, samples.len())?;
    let mut c = forward_real_many(grid, &[samples]).pop().expect("one output");
    let t = grid.tables();
    for (i, v) in c.iter_mut().enumerate() {
        if t.ksq[i] != 0.0 && !t.retained[i] {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Ok(SpectralScalar::from_vec(grid, c))
}

fn check_len(grid: GridSpec, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::GridMismatch {
            expected: format!("{} samples ({grid})", grid.len()),
            found: format!("{len} samples"),
        });
    }
    Ok(())
}

/// Pointwise product of two real sample arrays, transformed and truncated
/// by the 2/3 rule (every mode with some `|k_i| > floor(n/3)` is zeroed).
pub fn dealias_product(grid: GridSpec, a: &[f64], b: &[f64]) -> Result<SpectralScalar> {
    check_len(grid, a.len())?;
    check_len(grid, b.len())?;
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mut c = forward_real_many(grid, &[&prod]).pop().expect("one output");
    let t = grid.tables();
    for (i, v) in c.iter_mut().enumerate() {
        if t.ksq[i] != 0.0 && !t.dealiased[i] {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Ok(SpectralScalar::from_vec(grid, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::WaveVector;

    #[test]
    fn single_cosine_round_trip() {
        let g = GridSpec::new(2, 16).unwrap();
        let mut f = SpectralField::zeros(g);
        let k = WaveVector::new(&[2, -3]).unwrap();
        // divergence-free direction (3, 2)
        f.set_mode(&k, &[Complex64::new(1.5, 0.0), Complex64::new(1.0, 0.0)])
            .unwrap();
        let phys = to_physical(&f);
        // B_1(x) = 2 * 1.5 cos(2x - 3y)
        let idx = 37;
        let x = g.point_at(idx);
        let expect = 3.0 * (2.0 * x[0] - 3.0 * x[1]).cos();
        assert!((phys.component(0)[idx] - expect).abs() < 1e-13);
        let back = to_spectral(&phys);
        assert!(back.sub(&f).max_abs() < 1e-14);
    }

    #[test]
    fn sin_squared_keeps_second_harmonic() {
        let g = GridSpec::new(2, 8).unwrap();
        let s: Vec<f64> = (0..g.len()).map(|i| g.point_at(i)[0].sin()).collect();
        let p = dealias_product(g, &s, &s).unwrap();
        let k2 = WaveVector::new(&[2, 0]).unwrap();
        assert!((p.get(&k2) - Complex64::new(-0.25, 0.0)).norm() < 1e-14);
        assert!((p.coeffs()[0] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn product_beyond_band_is_removed() {
        let g = GridSpec::new(2, 16).unwrap();
        // cutoff floor(16/3) = 5; cos(3x) * cos(3x) has a k = 6 part
        let a: Vec<f64> = (0..g.len()).map(|i| (3.0 * g.point_at(i)[0]).cos()).collect();
        let p = dealias_product(g, &a, &a).unwrap();
        assert!(p.get(&WaveVector::new(&[6, 0]).unwrap()).norm() < 1e-15);
        assert!((p.coeffs()[0].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn mismatched_lengths_error() {
        let g = GridSpec::new(2, 8).unwrap();
        assert!(dealias_product(g, &[0.0; 64], &[0.0; 63]).is_err());
        assert!(scalar_to_spectral(g, &[0.0; 10]).is_err());
    }
}
