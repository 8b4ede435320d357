use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization of the flat torus `[-pi, pi)^d` by an `n^d` lattice.
///
/// Retained wavenumbers satisfy `|k_i| <= n/2 - 1`; the Nyquist plane is
/// always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {d}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::Grid(format!("n must be even and >= 8, got {n}")));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of lattice points (and of Fourier slots per component).
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kmax(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    /// Largest per-axis wavenumber kept by the 2/3 rule, `|k_i| < n/3`.
    /// Equals `floor(n/3)` unless `3 | n`, where that band would alias.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n as i64 - 1) / 3
    }

    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.d as i32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Wavenumber stored at FFT slot `i` along one axis.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    fn slot(&self, k: i64) -> usize {
        if k >= 0 {
            k as usize
        } else {
            (self.n as i64 + k) as usize
        }
    }

    /// Flat index of a wavevector, or `None` outside the retained band.
    pub fn index_of(&self, k: &WaveVector) -> Option<usize> {
        if k.dim() != self.d {
            return None;
        }
        let kmax = self.kmax();
        let mut idx = 0usize;
        for &ki in k.components() {
            let ki = ki as i64;
            if ki.abs() > kmax {
                return None;
            }
            idx = idx * self.n + self.slot(ki);
        }
        Some(idx)
    }

    /// Integer wavevector at a flat index (unused trailing components are 0).
    pub fn wavevector_at(&self, idx: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        let mut rem = idx;
        for axis in (0..self.d).rev() {
            out[axis] = self.wavenumber(rem % self.n);
            rem /= self.n;
        }
        out
    }

    /// Coordinate of lattice point `i` along one axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -PI + self.spacing() * i as f64
    }

    /// Physical coordinates of a flat lattice index.
    pub fn point_at(&self, idx: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rem = idx;
        for axis in (0..self.d).rev() {
            out[axis] = self.coordinate(rem % self.n);
            rem /= self.n;
        }
        out
    }

    pub(crate) fn tables(&self) -> Arc<GridTables> {
        static CACHE: OnceLock<Mutex<HashMap<GridSpec, Arc<GridTables>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("grid table cache poisoned");
        guard
            .entry(*self)
            .or_insert_with(|| Arc::new(GridTables::build(*self)))
            .clone()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} n={}", self.d, self.n)
    }
}

/// Precomputed per-slot wavevector data shared by every field on a grid.
pub(crate) struct GridTables {
    pub k: Vec<[f64; 3]>,
    pub ksq: Vec<f64>,
    /// `|k_i| <= n/2 - 1` and `k != 0`.
    pub retained: Vec<bool>,
    /// `|k_i| <= n/3` and `k != 0`.
    pub dealiased: Vec<bool>,
    /// `(-1)^{k_1 + ... + k_d}`: shift from `[0, 2pi)` to `[-pi, pi)` sampling.
    pub phase: Vec<f64>,
    /// Flat index of `-k`.
    pub neg: Vec<usize>,
}

impl GridTables {
    fn build(grid: GridSpec) -> Self {
        let len = grid.len();
        let kmax = grid.kmax();
        let cut = grid.dealias_cutoff();
        let mut k = Vec::with_capacity(len);
        let mut ksq = Vec::with_capacity(len);
        let mut retained = Vec::with_capacity(len);
        let mut dealiased = Vec::with_capacity(len);
        let mut phase = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        for idx in 0..len {
            let kv = grid.wavevector_at(idx);
            let nonzero = kv.iter().any(|&c| c != 0);
            let maxabs = kv.iter().map(|c| c.abs()).max().unwrap_or(0);
            k.push([kv[0] as f64, kv[1] as f64, kv[2] as f64]);
            ksq.push(kv.iter().map(|&c| (c * c) as f64).sum());
            retained.push(nonzero && maxabs <= kmax);
            dealiased.push(nonzero && maxabs <= cut);
            let parity: i64 = kv.iter().sum();
            phase.push(if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 });
            let mut nidx = 0usize;
            for &c in kv.iter().take(grid.dim()) {
                nidx = nidx * grid.n() + grid.slot(-c);
            }
            neg.push(nidx);
        }
        Self {
            k,
            ksq,
            retained,
            dealiased,
            phase,
            neg,
        }
    }
}

/// Nonzero integer wavevector on `Z^d`, `d in {2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector {
    comps: [i32; 3],
    dim: u8,
}

impl WaveVector {
    pub fn new(k: &[i32]) -> Result<Self> {
        if k.len() != 2 && k.len() != 3 {
            return Err(Error::WaveVector(format!(
                "expected 2 or 3 components, got {}",
                k.len()
            )));
        }
        if k.iter().all(|&c| c == 0) {
            return Err(Error::WaveVector("zero mode is excluded".into()));
        }
        let mut comps = [0i32; 3];
        comps[..k.len()].copy_from_slice(k);
        Ok(Self {
            comps,
            dim: k.len() as u8,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn components(&self) -> &[i32] {
        &self.comps[..self.dim as usize]
    }

    pub fn norm_sq(&self) -> i64 {
        self.components().iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [
            self.comps[0] as f64,
            self.comps[1] as f64,
            self.comps[2] as f64,
        ]
    }

    pub fn neg(&self) -> Self {
        Self {
            comps: [-self.comps[0], -self.comps[1], -self.comps[2]],
            dim: self.dim,
        }
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}
