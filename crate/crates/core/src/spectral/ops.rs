use num_complex::Complex64;

use super::field::{SpectralField, SpectralScalar};

/// Leray projection `(I - k k^T / |k|^2)` applied mode by mode; the zero mode is dropped.
pub fn project_divfree(g: &SpectralField) -> SpectralField {
    let mut out = g.clone();
    project_in_place(&mut out);
    out
}

pub(crate) fn project_in_place(f: &mut SpectralField) {
    let grid = f.grid();
    let d = grid.dim();
    let t = grid.tables();
    let len = grid.len();
    let raw = f.raw_mut();
    for i in 0..len {
        let q = t.ksq[i];
        if q == 0.0 {
            for c in 0..d {
                raw[c * len + i] = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let k = &t.k[i];
        let mut dot = Complex64::new(0.0, 0.0);
        for c in 0..d {
            dot += raw[c * len + i] * k[c];
        }
        let s = dot / q;
        for c in 0..d {
            raw[c * len + i] -= s * k[c];
        }
    }
}

/// `(-Delta)^s`: multiply `B_k` by `|k|^{2s}`.
pub fn frac_laplacian(b: &SpectralField, s: f64) -> SpectralField {
    if s == 0.0 {
        return b.clone();
    }
    b.map_multiplier(|q| q.powf(s))
}

/// Which Sobolev weight to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevKind {
    /// `|k|^{2m}`
    Homogeneous,
    /// `(1 + |k|^2)^m`
    Inhomogeneous,
}

/// `||B||_{H^m}` or `||B||_{\dot H^m}` via Parseval.
pub fn sobolev_norm(b: &SpectralField, m: f64, kind: SobolevKind) -> f64 {
    sobolev_norm_sq(b, m, kind).sqrt()
}

pub fn sobolev_norm_sq(b: &SpectralField, m: f64, kind: SobolevKind) -> f64 {
    match kind {
        SobolevKind::Homogeneous if m == 0.0 => b.norm_sq(),
        SobolevKind::Homogeneous => b.weighted_norm_sq(|q| q.powf(m)),
        SobolevKind::Inhomogeneous => b.weighted_norm_sq(|q| (1.0 + q).powf(m)),
    }
}

/// Result of [`curl_inv`]: a flux function in two dimensions, a vector
/// potential in three.
#[derive(Debug, Clone, PartialEq)]
pub enum CurlInverse {
    Flux(SpectralScalar),
    Potential(SpectralField),
}

impl CurlInverse {
    pub fn flux(self) -> Option<SpectralScalar> {
        match self {
            CurlInverse::Flux(p) => Some(p),
            CurlInverse::Potential(_) => None,
        }
    }

    pub fn potential(self) -> Option<SpectralField> {
        match self {
            CurlInverse::Potential(a) => Some(a),
            CurlInverse::Flux(_) => None,
        }
    }
}

/// `-grad^perp . (-Delta)^{-1} B` for `d = 2`, `curl (-Delta)^{-1} B` for `d = 3`.
pub fn curl_inv(b: &SpectralField) -> CurlInverse {
    let grid = b.grid();
    let t = grid.tables();
    let i = Complex64::new(0.0, 1.0);
    if grid.dim() == 2 {
        let (b1, b2) = (b.component(0), b.component(1));
        let phi = (0..grid.len())
            .map(|idx| {
                let q = t.ksq[idx];
                if q == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let k = &t.k[idx];
                i * (b1[idx] * k[1] - b2[idx] * k[0]) / q
            })
            .collect();
        CurlInverse::Flux(SpectralScalar::from_vec(grid, phi))
    } else {
        let mut a = cross_k(b);
        a.apply_multiplier_in_place(
            &t.ksq
                .iter()
                .map(|&q| if q == 0.0 { 0.0 } else { 1.0 / q })
                .collect::<Vec<_>>(),
        );
        CurlInverse::Potential(a)
    }
}

/// `curl B` for `d = 3`.
pub fn curl(b: &SpectralField) -> SpectralField {
    assert_eq!(b.dim(), 3, "curl is three-dimensional");
    cross_k(b)
}

/// `i k x B_k`
fn cross_k(b: &SpectralField) -> SpectralField {
    let grid = b.grid();
    let t = grid.tables();
    let len = grid.len();
    let i = Complex64::new(0.0, 1.0);
    let (b0, b1, b2) = (b.component(0), b.component(1), b.component(2));
    let mut c0 = Vec::with_capacity(len);
    let mut c1 = Vec::with_capacity(len);
    let mut c2 = Vec::with_capacity(len);
    for idx in 0..len {
        let k = &t.k[idx];
        c0.push(i * (b2[idx] * k[1] - b1[idx] * k[2]));
        c1.push(i * (b0[idx] * k[2] - b2[idx] * k[0]));
        c2.push(i * (b1[idx] * k[0] - b0[idx] * k[1]));
    }
    SpectralField::from_components(grid, vec![c0, c1, c2])
}

/// Magnetic helicity `(curl^{-1} B, B)` (d = 3).
pub fn helicity(b: &SpectralField) -> f64 {
    match curl_inv(b) {
        CurlInverse::Potential(a) => a.inner(b),
        CurlInverse::Flux(_) => f64::NAN,
    }
}

/// Mean-square potential `||curl^{-1} B||^2` (d = 2).
pub fn mean_square_potential(b: &SpectralField) -> f64 {
    match curl_inv(b) {
        CurlInverse::Flux(phi) => phi.norm_sq(),
        CurlInverse::Potential(_) => f64::NAN,
    }
}
