use num_complex::Complex64;

use super::grid::{GridSpec, WaveVector};
use crate::error::{Error, Result};

/// Fourier coefficients of a real vector field on the torus,
/// `B(x) = sum_k B_k exp(i k.x)`.
///
/// Storage is dense in FFT slot order, component-major. Both `k` and `-k`
/// are stored; writers go through [`SpectralField::set_mode`], which
/// mirrors the conjugate so the field stays real.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.dim() * grid.len()],
        }
    }

    pub(crate) fn from_components(grid: GridSpec, comps: Vec<Vec<Complex64>>) -> Self {
        debug_assert_eq!(comps.len(), grid.dim());
        let mut data = Vec::with_capacity(grid.dim() * grid.len());
        for c in comps {
            debug_assert_eq!(c.len(), grid.len());
            data.extend(c);
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub(crate) fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Coefficient vector at `k` (zeros outside the retained band).
    pub fn get(&self, k: &WaveVector) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        if let Some(idx) = self.grid.index_of(k) {
            for (c, slot) in out.iter_mut().enumerate().take(self.dim()) {
                *slot = self.component(c)[idx];
            }
        }
        out
    }

    /// Write `value` at `k` and its conjugate at `-k`.
    pub fn set_mode(&mut self, k: &WaveVector, value: &[Complex64]) -> Result<()> {
        let idx = self
            .grid
            .index_of(k)
            .ok_or_else(|| Error::WaveVector(format!("{k} outside retained band of {}", self.grid)))?;
        let nidx = self.grid.tables().neg[idx];
        for c in 0..self.dim() {
            let v = value.get(c).copied().unwrap_or_default();
            self.component_mut(c)[idx] = v;
            self.component_mut(c)[nidx] = v.conj();
        }
        Ok(())
    }

    /// Add `value` at `k` and its conjugate at `-k`.
    pub fn add_mode(&mut self, k: &WaveVector, value: &[Complex64]) -> Result<()> {
        let idx = self
            .grid
            .index_of(k)
            .ok_or_else(|| Error::WaveVector(format!("{k} outside retained band of {}", self.grid)))?;
        let nidx = self.grid.tables().neg[idx];
        for c in 0..self.dim() {
            let v = value.get(c).copied().unwrap_or_default();
            self.component_mut(c)[idx] += v;
            self.component_mut(c)[nidx] += v.conj();
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + y * a)
                .collect(),
        }
    }

    pub(crate) fn axpy_in_place(&mut self, a: f64, other: &Self) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
    }

    /// Multiply each coefficient by a real function of `|k|^2`.
    pub fn map_multiplier(&self, f: impl Fn(f64) -> f64) -> Self {
        let t = self.grid.tables();
        let len = self.grid.len();
        let mult: Vec<f64> = t
            .ksq
            .iter()
            .map(|&q| if q == 0.0 { 0.0 } else { f(q) })
            .collect();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v * mult[i % len])
            .collect();
        Self {
            grid: self.grid,
            data,
        }
    }

    pub(crate) fn apply_multiplier_in_place(&mut self, mult: &[f64]) {
        let len = self.grid.len();
        for (i, v) in self.data.iter_mut().enumerate() {
            *v *= mult[i % len];
        }
    }

    /// Plain (unnormalized) L^2 inner product over the torus.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        s * self.grid.volume()
    }

    /// `||B||^2_{L^2}`.
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Weighted Parseval sum `(2 pi)^d sum_k w(|k|^2) |B_k|^2`.
    pub fn weighted_norm_sq(&self, w: impl Fn(f64) -> f64) -> f64 {
        let t = self.grid.tables();
        let len = self.grid.len();
        let mut s = 0.0;
        for c in 0..self.dim() {
            let comp = &self.data[c * len..(c + 1) * len];
            for (i, v) in comp.iter().enumerate() {
                let q = t.ksq[i];
                if q > 0.0 {
                    s += w(q) * v.norm_sqr();
                }
            }
        }
        s * self.grid.volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max_k |k . B_k| / (|k| max |B|)`; 0 for the zero field.
    pub fn divergence_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.grid.tables();
        let mut worst = 0.0f64;
        for i in 0..self.grid.len() {
            if t.ksq[i] == 0.0 {
                continue;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for c in 0..self.dim() {
                dot += self.component(c)[i] * t.k[i][c];
            }
            worst = worst.max(dot.norm() / t.ksq[i].sqrt());
        }
        worst / scale
    }

    /// `max_k |B_{-k} - conj(B_k)| / max |B|`.
    pub fn reality_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.grid.tables();
        let mut worst = 0.0f64;
        for c in 0..self.dim() {
            let comp = self.component(c);
            for i in 0..self.grid.len() {
                worst = worst.max((comp[t.neg[i]] - comp[i].conj()).norm());
            }
        }
        worst / scale
    }

    /// Largest coefficient magnitude at the zero mode or outside the retained band.
    pub fn out_of_band(&self) -> f64 {
        let t = self.grid.tables();
        let mut worst = 0.0f64;
        for c in 0..self.dim() {
            for (i, v) in self.component(c).iter().enumerate() {
                if !t.retained[i] {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst
    }

    /// True when the field is real, mean-zero, band-limited and divergence-free
    /// to the given relative tolerance.
    pub fn is_valid(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.reality_defect() <= tol
            && self.divergence_defect() <= tol
            && self.out_of_band() <= tol * scale
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Zero every slot outside the 2/3-rule band.
    pub fn truncate_dealiased(&mut self) {
        let t = self.grid.tables();
        let len = self.grid.len();
        for (i, v) in self.data.iter_mut().enumerate() {
            if !t.dealiased[i % len] {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Nonzero modes on the half-space `{k : last nonzero component > 0}`
    /// with their coefficient vectors, sorted lexicographically.
    pub fn support(&self, threshold: f64) -> Vec<(WaveVector, [Complex64; 3])> {
        let t = self.grid.tables();
        let mut out = Vec::new();
        for i in 0..self.grid.len() {
            if !t.retained[i] {
                continue;
            }
            let mut v = [Complex64::new(0.0, 0.0); 3];
            let mut mag = 0.0;
            for (c, slot) in v.iter_mut().enumerate().take(self.dim()) {
                *slot = self.component(c)[i];
                mag += slot.norm_sqr();
            }
            let kv = self.grid.wavevector_at(i);
            let last = kv[..self.dim()].iter().rev().find(|&&c| c != 0);
            if mag.sqrt() > threshold && matches!(last, Some(&c) if c > 0) {
                let comps: Vec<i32> = kv[..self.dim()].iter().map(|&c| c as i32).collect();
                out.push((WaveVector::new(&comps).expect("nonzero"), v));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// Fourier coefficients of a real scalar function on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalar {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub(crate) fn from_vec(grid: GridSpec, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, k: &WaveVector) -> Complex64 {
        self.grid
            .index_of(k)
            .map(|i| self.data[i])
            .unwrap_or_default()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn inner(&self, other: &Self) -> f64 {
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        s * self.grid.volume()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn weighted_norm_sq(&self, w: impl Fn(f64) -> f64) -> f64 {
        let t = self.grid.tables();
        let s: f64 = self
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| t.ksq[*i] > 0.0)
            .map(|(i, v)| w(t.ksq[i]) * v.norm_sqr())
            .sum();
        s * self.grid.volume()
    }

    /// `grad^perp phi = (-d_2 phi, d_1 phi)` (d = 2 only).
    pub fn perp_gradient(&self) -> SpectralField {
        assert_eq!(self.grid.dim(), 2, "perp gradient is two-dimensional");
        let t = self.grid.tables();
        let i = Complex64::new(0.0, 1.0);
        let c0 = self
            .data
            .iter()
            .enumerate()
            .map(|(idx, v)| -i * t.k[idx][1] * v)
            .collect();
        let c1 = self
            .data
            .iter()
            .enumerate()
            .map(|(idx, v)| i * t.k[idx][0] * v)
            .collect();
        SpectralField::from_components(self.grid, vec![c0, c1])
    }
}

/// Real samples of a vector field on the `n^d` lattice, component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    grid: GridSpec,
    comps: Vec<Vec<f64>>,
}

impl PhysicalField {
    pub fn new(grid: GridSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch {
                expected: format!("{} components of {} samples", grid.dim(), grid.len()),
                found: format!(
                    "{} components of {:?} samples",
                    comps.len(),
                    comps.iter().map(|c| c.len()).collect::<Vec<_>>()
                ),
            });
        }
        Ok(Self { grid, comps })
    }

    /// Sample `f(x)` at every lattice point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Self {
        let mut comps = vec![vec![0.0; grid.len()]; grid.dim()];
        for idx in 0..grid.len() {
            let v = f(&grid.point_at(idx));
            for (c, comp) in comps.iter_mut().enumerate() {
                comp[idx] = v[c];
            }
        }
        Self { grid, comps }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Midpoint-rule quadrature of `|B|^2` over the torus.
    pub fn quadrature_norm_sq(&self) -> f64 {
        let w = self.grid.volume() / self.grid.len() as f64;
        let s: f64 = (0..self.grid.len())
            .map(|i| self.comps.iter().map(|c| c[i] * c[i]).sum::<f64>())
            .sum();
        s * w
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
