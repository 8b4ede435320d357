//! Explicit real orthonormal eigenbases of `H`: Stokes eigenfunctions for
//! `d = 2, 3`, the scaled flux functions `sqrt(lambda_j) curl^{-1} e_j` for
//! `d = 2`, and real Beltrami waves (eigenfunctions of curl) for `d = 3`.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{curl_inv, GridSpec, PhysicalField, SpectralField, SpectralScalar, WaveVector};

/// Which family of eigenfunctions to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Stokes,
    Beltrami,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Stokes => write!(f, "stokes"),
            Flavor::Beltrami => write!(f, "beltrami"),
        }
    }
}

/// Real profile of a mode. Declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `a cos(k.x)`
    Cos,
    /// `a sin(k.x)`
    Sin,
    /// `a cos(k.x) - (xi x a) sin(k.x)`, curl eigenvalue `+|k|`
    P,
    /// `a sin(k.x) + (xi x a) cos(k.x)`, curl eigenvalue `+|k|`
    Q,
    /// `a cos(k.x) + (xi x a) sin(k.x)`, curl eigenvalue `-|k|`
    R,
    /// `a sin(k.x) - (xi x a) cos(k.x)`, curl eigenvalue `-|k|`
    S,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Branch::Cos => "cos",
            Branch::Sin => "sin",
            Branch::P => "p",
            Branch::Q => "q",
            Branch::R => "r",
            Branch::S => "s",
        };
        f.write_str(s)
    }
}

/// One normalized real eigenfunction `e_j`, stored as its coefficient at `+k`
/// (the coefficient at `-k` is the conjugate).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMode {
    pub index: usize,
    pub k: WaveVector,
    pub branch: Branch,
    /// Polarization `l` (1-based) for Stokes modes; 1 for Beltrami modes.
    pub polarization: u8,
    pub lambda: f64,
    /// Curl eigenvalue (Beltrami modes only), `tau^2 = lambda`.
    pub tau: Option<f64>,
    coeff: [Complex64; 3],
}

impl BasisMode {
    pub fn coefficient(&self) -> [Complex64; 3] {
        self.coeff
    }

    /// The mode as a spectral field on `grid`.
    pub fn field(&self, grid: GridSpec) -> Result<SpectralField> {
        let mut f = SpectralField::zeros(grid);
        self.add_to(&mut f, 1.0)?;
        Ok(f)
    }

    /// `f += amplitude * e_j`.
    pub fn add_to(&self, f: &mut SpectralField, amplitude: f64) -> Result<()> {
        if f.dim() != self.k.dim() {
            return Err(Error::GridMismatch {
                expected: format!("d={}", self.k.dim()),
                found: format!("d={}", f.dim()),
            });
        }
        let v: Vec<Complex64> = self.coeff.iter().map(|c| c * amplitude).collect();
        f.add_mode(&self.k, &v[..self.k.dim()])
    }

    /// `(B, e_j)_{L^2}`.
    pub fn project(&self, b: &SpectralField) -> f64 {
        let bk = b.get(&self.k);
        let s: f64 = (0..self.k.dim())
            .map(|c| (bk[c] * self.coeff[c].conj()).re)
            .sum();
        2.0 * s * b.grid().volume()
    }

    /// Pointwise value `e_j(x)`.
    pub fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        let kf = self.k.as_f64();
        let phase: f64 = (0..self.k.dim()).map(|c| kf[c] * x[c]).sum();
        let e = Complex64::new(phase.cos(), phase.sin());
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate().take(self.k.dim()) {
            *o = 2.0 * (self.coeff[c] * e).re;
        }
        out
    }
}

/// True when `k` lies in the fixed half-space `K` with `K u -K = Z^d \ {0}`.
///
/// `d = 2`: `{k_2 > 0} u {k_2 = 0, k_1 > 0}`; `d = 3`: `{k_3 > 0} u
/// {k_3 = 0, k_2 > 0} u {k_3 = k_2 = 0, k_1 > 0}`.
pub fn in_half_space(k: &WaveVector) -> bool {
    let c = k.components();
    match c.iter().rev().find(|&&x| x != 0) {
        Some(&x) => x > 0,
        None => false,
    }
}

/// Unit vector orthogonal to `k`: Gram-Schmidt of the coordinate axis least
/// aligned with `k`. Ties go to the first such axis cyclically after the most
/// aligned one. The choice depends only on `|k_i|`, so `a_k = a_{-k}`.
pub fn polarization(k: &WaveVector) -> [f64; 3] {
    let d = k.dim();
    let kf = k.as_f64();
    let abs: Vec<f64> = (0..d).map(|i| kf[i].abs()).collect();
    let mut top = 0;
    for i in 1..d {
        if abs[i] > abs[top] {
            top = i;
        }
    }
    let least = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let axis = (1..=d)
        .map(|s| (top + s) % d)
        .find(|&i| abs[i] == least)
        .expect("some axis attains the minimum");
    let q = k.norm_sq() as f64;
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let proj = kf[axis] / q;
    for i in 0..d {
        a[i] -= proj * kf[i];
    }
    let norm = (0..d).map(|i| a[i] * a[i]).sum::<f64>().sqrt();
    for v in a.iter_mut().take(d) {
        *v /= norm;
    }
    a
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit_k(k: &WaveVector) -> [f64; 3] {
    let kf = k.as_f64();
    let n = (k.norm_sq() as f64).sqrt();
    [kf[0] / n, kf[1] / n, kf[2] / n]
}

/// Stokes eigenfunction `N a_k^l cos(k.x)` or `N a_k^l sin(k.x)` with
/// `N = 1 / (2^{(d-1)/2} pi^{d/2})`. `index` is left at 0.
pub fn stokes_mode(k: &WaveVector, l: u8, branch: Branch) -> Result<BasisMode> {
    let d = k.dim();
    if l < 1 || l as usize > d - 1 {
        return Err(Error::Basis(format!(
            "polarization {l} out of range 1..={} for d={d}",
            d - 1
        )));
    }
    if !matches!(branch, Branch::Cos | Branch::Sin) {
        return Err(Error::Basis(format!("branch {branch} is not a Stokes branch")));
    }
    let a1 = polarization(k);
    let a = if l == 1 { a1 } else { cross(&unit_k(k), &a1) };
    let norm = 1.0 / (2f64.powf((d as f64 - 1.0) / 2.0) * PI.powf(d as f64 / 2.0));
    let unit = match branch {
        Branch::Cos => Complex64::new(0.5 * norm, 0.0),
        _ => Complex64::new(0.0, -0.5 * norm),
    };
    let mut coeff = [Complex64::new(0.0, 0.0); 3];
    for i in 0..d {
        coeff[i] = unit * a[i];
    }
    Ok(BasisMode {
        index: 0,
        k: *k,
        branch,
        polarization: l,
        lambda: k.norm_sq() as f64,
        tau: None,
        coeff,
    })
}

/// Real Beltrami wave `p_k, q_k, r_k` or `s_k`, normalized by `(2 pi)^{-3/2}`.
pub fn beltrami_mode(k: &WaveVector, branch: Branch) -> Result<BasisMode> {
    if k.dim() != 3 {
        return Err(Error::Basis(format!(
            "Beltrami modes need d=3, got d={}",
            k.dim()
        )));
    }
    let a = polarization(k);
    let v = cross(&unit_k(k), &a);
    let norm = (2.0 * PI).powf(-1.5);
    let half = 0.5 * norm;
    let i = Complex64::new(0.0, 1.0);
    // coefficient at +k is (alpha a + beta v) / 2
    let (alpha, beta, sign) = match branch {
        Branch::P => (Complex64::new(1.0, 0.0), i, 1.0),
        Branch::Q => (-i, Complex64::new(1.0, 0.0), 1.0),
        Branch::R => (Complex64::new(1.0, 0.0), -i, -1.0),
        Branch::S => (-i, Complex64::new(-1.0, 0.0), -1.0),
        _ => {
            return Err(Error::Basis(format!(
                "branch {branch} is not a Beltrami branch"
            )))
        }
    };
    let mut coeff = [Complex64::new(0.0, 0.0); 3];
    for c in 0..3 {
        coeff[c] = (alpha * a[c] + beta * v[c]) * half;
    }
    let lambda = k.norm_sq() as f64;
    Ok(BasisMode {
        index: 0,
        k: *k,
        branch,
        polarization: 1,
        lambda,
        tau: Some(sign * lambda.sqrt()),
        coeff,
    })
}

/// ABC field `(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)`.
pub fn abc_field(grid: GridSpec, a: f64, b: f64, c: f64) -> Result<SpectralField> {
    if grid.dim() != 3 {
        return Err(Error::Basis("ABC fields are three-dimensional".into()));
    }
    let mut f = SpectralField::zeros(grid);
    let half = 0.5;
    let i = Complex64::new(0.0, 1.0);
    let zero = Complex64::new(0.0, 0.0);
    // sin t = (e^{it} - e^{-it}) / 2i -> coefficient -i/2; cos t -> 1/2
    let ex = WaveVector::new(&[1, 0, 0])?;
    let ey = WaveVector::new(&[0, 1, 0])?;
    let ez = WaveVector::new(&[0, 0, 1])?;
    f.set_mode(&ez, &[-i * half * a, Complex64::new(half * a, 0.0), zero])?;
    f.set_mode(&ex, &[zero, -i * half * b, Complex64::new(half * b, 0.0)])?;
    f.set_mode(&ey, &[Complex64::new(half * c, 0.0), zero, -i * half * c])?;
    Ok(f)
}

/// Kolmogorov shear `(amplitude sin y, 0)` (d = 2).
pub fn kolmogorov_field(grid: GridSpec, amplitude: f64) -> Result<SpectralField> {
    if grid.dim() != 2 {
        return Err(Error::Basis("the Kolmogorov field is two-dimensional".into()));
    }
    Ok(crate::spectral::to_spectral(&PhysicalField::from_fn(grid, |x| {
        [amplitude * x[1].sin(), 0.0, 0.0]
    })))
}

/// All modes with `lambda <= lambda_max`, sorted by `lambda` then `(k, branch, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEnumeration {
    pub d: usize,
    pub lambda_max: f64,
    pub flavor: Flavor,
    pub modes: Vec<BasisMode>,
}

impl BasisEnumeration {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Distinct eigenvalues with their multiplicities, ascending.
    pub fn shells(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for m in &self.modes {
            match out.last_mut() {
                Some((l, n)) if *l == m.lambda => *n += 1,
                _ => out.push((m.lambda, 1)),
            }
        }
        out
    }

    /// Coefficients `(B, e_j)` for every mode.
    pub fn project(&self, b: &SpectralField) -> Vec<f64> {
        self.modes.iter().map(|m| m.project(b)).collect()
    }

    /// `sum_j c_j e_j`.
    pub fn synthesize(&self, grid: GridSpec, coeffs: &[f64]) -> Result<SpectralField> {
        let mut f = SpectralField::zeros(grid);
        for (m, &c) in self.modes.iter().zip(coeffs) {
            m.add_to(&mut f, c)?;
        }
        Ok(f)
    }
}

pub fn enumerate_basis(d: usize, lambda_max: f64, flavor: Flavor) -> Result<BasisEnumeration> {
    if d != 2 && d != 3 {
        return Err(Error::Basis(format!("dimension must be 2 or 3, got {d}")));
    }
    if flavor == Flavor::Beltrami && d != 3 {
        return Err(Error::Basis("Beltrami basis requires d=3".into()));
    }
    if !(lambda_max >= 1.0) {
        return Err(Error::Basis(format!("lambda_max must be >= 1, got {lambda_max}")));
    }
    let r = lambda_max.sqrt().floor() as i32;
    let mut ks: Vec<Vec<i32>> = vec![vec![]];
    for _ in 0..d {
        ks = ks
            .into_iter()
            .flat_map(|p| {
                (-r..=r).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    let mut modes = Vec::new();
    for comps in ks {
        let Ok(k) = WaveVector::new(&comps) else {
            continue;
        };
        if (k.norm_sq() as f64) > lambda_max || !in_half_space(&k) {
            continue;
        }
        match flavor {
            Flavor::Stokes => {
                for branch in [Branch::Cos, Branch::Sin] {
                    for l in 1..d as u8 {
                        modes.push(stokes_mode(&k, l, branch)?);
                    }
                }
            }
            Flavor::Beltrami => {
                for branch in [Branch::P, Branch::Q, Branch::R, Branch::S] {
                    modes.push(beltrami_mode(&k, branch)?);
                }
            }
        }
    }
    modes.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.k.cmp(&b.k))
            .then_with(|| a.branch.cmp(&b.branch))
            .then_with(|| a.polarization.cmp(&b.polarization))
    });
    for (j, m) in modes.iter_mut().enumerate() {
        m.index = j + 1;
    }
    Ok(BasisEnumeration {
        d,
        lambda_max,
        flavor,
        modes,
    })
}

/// `sqrt(lambda_j) curl^{-1} e_j` for a two-dimensional Stokes enumeration;
/// these are orthonormal in `L^2_av`.
pub fn curl_inv_basis(basis: &BasisEnumeration, grid: GridSpec) -> Result<Vec<SpectralScalar>> {
    if basis.d != 2 || grid.dim() != 2 {
        return Err(Error::Basis("flux-function basis requires d=2".into()));
    }
    basis
        .modes
        .iter()
        .map(|m| {
            let e = m.field(grid)?;
            let phi = curl_inv(&e).flux().expect("d=2 gives a flux function");
            Ok(phi.scale(m.lambda.sqrt()))
        })
        .collect()
}
