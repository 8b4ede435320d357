//! Constitutive law `u = (-Delta)^{-gamma} P div(B (x) B)`, the transport
//! term `div(B (x) u - u (x) B)`, the full drift, and the MHS residual.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    forward_real_many, inverse_real_many, project_in_place, sobolev_norm, GridSpec,
    SobolevKind, SpectralField, WaveVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// Test hook: when false the transport term is dropped and the system
    /// is linear.
    #[serde(default = "default_true")]
    pub transport: bool,
}

fn default_true() -> bool {
    true
}

impl PhysicsParams {
    /// `gamma = d/2 + 1`, `alpha = 1`.
    pub fn defaults(d: usize, kappa: f64) -> Self {
        PhysicsParams {
            gamma: d as f64 / 2.0 + 1.0,
            alpha: 1.0,
            kappa,
            transport: true,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.gamma > d as f64 / 2.0) {
            errs.push(format!("gamma must exceed d/2 = {}, got {}", d as f64 / 2.0, self.gamma));
        }
        if !(self.alpha >= 1.0) {
            errs.push(format!("alpha must be >= 1, got {}", self.alpha));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            errs.push(format!("kappa must be finite and >= 0, got {}", self.kappa));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Params(errs.join("; ")))
        }
    }
}

/// Upper-triangle index pairs `(i, j)`, `i <= j`.
fn pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push((i, j));
        }
    }
    out
}

/// Dealiased transforms of a list of pointwise products.
fn dealiased_products(grid: GridSpec, prods: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let refs: Vec<&[f64]> = prods.iter().map(|p| p.as_slice()).collect();
    let mut out = forward_real_many(grid, &refs);
    let t = grid.tables();
    for c in out.iter_mut() {
        for (i, v) in c.iter_mut().enumerate() {
            if !t.dealiased[i] {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    out
}

fn samples(f: &SpectralField) -> Vec<Vec<f64>> {
    let comps: Vec<&[Complex64]> = (0..f.dim()).map(|c| f.component(c)).collect();
    inverse_real_many(f.grid(), &comps)
}

/// `P div(B (x) B)` from physical samples of `B`; equals `P(B . grad B)` for
/// divergence-free `B`.
fn lorentz_from_samples(grid: GridSpec, b: &[Vec<f64>]) -> SpectralField {
    let d = grid.dim();
    let pr = pairs(d);
    let prods: Vec<Vec<f64>> = pr
        .iter()
        .map(|&(i, j)| b[i].iter().zip(&b[j]).map(|(x, y)| x * y).collect())
        .collect();
    let hat = dealiased_products(grid, &prods);
    let t = grid.tables();
    let len = grid.len();
    let im = Complex64::new(0.0, 1.0);
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); len]; d];
    for (p, &(i, j)) in pr.iter().enumerate() {
        // (div T)_j = sum_i d_i T_ij, T symmetric
        for idx in 0..len {
            let v = im * hat[p][idx];
            comps[j][idx] += v * t.k[idx][i];
            if i != j {
                comps[i][idx] += v * t.k[idx][j];
            }
        }
    }
    let mut f = SpectralField::from_components(grid, comps);
    project_in_place(&mut f);
    f
}

/// `P(B . grad B)`, the part of the Lorentz force not balanced by pressure.
pub fn lorentz(b: &SpectralField) -> SpectralField {
    lorentz_from_samples(b.grid(), &samples(b))
}

fn inverse_power(grid: GridSpec, gamma: f64) -> Vec<f64> {
    grid.tables()
        .ksq
        .iter()
        .map(|&q| if q == 0.0 { 0.0 } else { q.powf(-gamma) })
        .collect()
}

/// `u = K_gamma(B, B)`.
pub fn velocity(b: &SpectralField, gamma: f64) -> SpectralField {
    let mut f = lorentz(b);
    f.apply_multiplier_in_place(&inverse_power(b.grid(), gamma));
    f
}

/// `div A` for the antisymmetric `A_ij = B_i u_j - u_i B_j`, from samples.
fn transport_from_samples(grid: GridSpec, b: &[Vec<f64>], u: &[Vec<f64>]) -> SpectralField {
    let d = grid.dim();
    let pr: Vec<(usize, usize)> = pairs(d).into_iter().filter(|(i, j)| i != j).collect();
    let prods: Vec<Vec<f64>> = pr
        .iter()
        .map(|&(i, j)| {
            (0..grid.len())
                .map(|x| b[i][x] * u[j][x] - u[i][x] * b[j][x])
                .collect()
        })
        .collect();
    let hat = dealiased_products(grid, &prods);
    let t = grid.tables();
    let len = grid.len();
    let im = Complex64::new(0.0, 1.0);
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); len]; d];
    for (p, &(i, j)) in pr.iter().enumerate() {
        // (div A)_j += d_i A_ij ; (div A)_i += d_j A_ji = -d_j A_ij
        for idx in 0..len {
            let v = im * hat[p][idx];
            comps[j][idx] += v * t.k[idx][i];
            comps[i][idx] -= v * t.k[idx][j];
        }
    }
    let mut f = SpectralField::from_components(grid, comps);
    project_in_place(&mut f);
    f
}

/// `div(B (x) u - u (x) B) = B . grad u - u . grad B` for divergence-free arguments.
pub fn transport_term(b: &SpectralField, u: &SpectralField) -> SpectralField {
    transport_from_samples(b.grid(), &samples(b), &samples(u))
}

/// Velocity and transport term from one set of samples of `B`.
pub fn nonlinear(b: &SpectralField, gamma: f64) -> (SpectralField, SpectralField) {
    let grid = b.grid();
    let bs = samples(b);
    let mut u = lorentz_from_samples(grid, &bs);
    u.apply_multiplier_in_place(&inverse_power(grid, gamma));
    let us = samples(&u);
    let n = transport_from_samples(grid, &bs, &us);
    (u, n)
}

/// `-kappa (-Delta)^alpha B + div(B (x) u - u (x) B)` with `u = K_gamma(B, B)`.
pub fn drift(b: &SpectralField, params: &PhysicsParams) -> SpectralField {
    let lin = b.map_multiplier(|q| -params.kappa * q.powf(params.alpha));
    if !params.transport {
        return lin;
    }
    let (_, n) = nonlinear(b, params.gamma);
    lin.add(&n)
}

/// `||P(B . grad B)||_{H^order}` (inhomogeneous norm); zero exactly at MHS
/// equilibria.
pub fn mhs_residual(b: &SpectralField, order: f64) -> f64 {
    sobolev_norm(&lorentz(b), order, SobolevKind::Inhomogeneous)
}

pub const DEFAULT_MHS_ORDER: f64 = -1.0;

/// Geometric shape that a finite Fourier support lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    /// All `k` on one line through the origin.
    Line,
    /// All `k` with equal `|k|` (d = 2).
    Circle,
    /// All `k` in one plane through the origin (d = 3).
    Plane,
    /// All `k` with equal `|k|` (d = 3).
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteModeReport {
    /// Support on the half-space; the full support is this set and its negation.
    pub support: Vec<WaveVector>,
    /// Empty when no structure applies.
    pub structures: Vec<Structure>,
}

fn rank(vs: &[[f64; 3]]) -> usize {
    // integer-valued vectors, so exact zero tests are safe
    let nonzero: Vec<&[f64; 3]> = vs.iter().filter(|v| v.iter().any(|&c| c != 0.0)).collect();
    let Some(first) = nonzero.first() else {
        return 0;
    };
    let cross = |a: &[f64; 3], b: &[f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let Some(second) = nonzero
        .iter()
        .find(|v| cross(first, v).iter().any(|&c| c != 0.0))
    else {
        return 1;
    };
    let n = cross(first, second);
    if nonzero
        .iter()
        .all(|v| (0..3).map(|i| n[i] * v[i]).sum::<f64>() == 0.0)
    {
        2
    } else {
        3
    }
}

/// Support of `B` above `threshold` and the structures it lies on.
pub fn classify_finite_modes(b: &SpectralField, threshold: f64) -> FiniteModeReport {
    let support: Vec<WaveVector> = b.support(threshold).into_iter().map(|(k, _)| k).collect();
    let mut structures = Vec::new();
    if !support.is_empty() {
        let vs: Vec<[f64; 3]> = support.iter().map(|k| k.as_f64()).collect();
        let r = rank(&vs);
        if r == 1 {
            structures.push(Structure::Line);
        }
        let q0 = support[0].norm_sq();
        let round = support.iter().all(|k| k.norm_sq() == q0);
        if b.dim() == 2 {
            if round {
                structures.push(Structure::Circle);
            }
        } else {
            if r <= 2 {
                structures.push(Structure::Plane);
            }
            if round {
                structures.push(Structure::Sphere);
            }
        }
    }
    FiniteModeReport {
        support,
        structures,
    }
}
