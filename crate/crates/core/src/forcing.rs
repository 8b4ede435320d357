//! Noise spectrum `{b_j}`, the constants `C_s`, and reproducible Gaussian
//! streams for the Brownian motions `beta_j`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigenbasis::{BasisEnumeration, Flavor};
use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpectralField};

/// How the amplitudes were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// `b_j = c lambda_j^{-q}` on the first `shells` eigenvalue shells, zero beyond.
    PowerLaw { c: f64, q: f64, shells: usize },
    /// `b_j = amplitude` on the shell `lambda_j = lambda`.
    SingleShell { lambda: f64, amplitude: f64 },
    Explicit { amplitudes: Vec<f64> },
}

impl Preset {
    /// Build from a name and a flat parameter list (used by the CLI `basis` path).
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Forcing(format!(
                    "preset {name} takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        match name {
            "power_law" => {
                need(3)?;
                if params[2] < 0.0 || params[2].fract() != 0.0 {
                    return Err(Error::Forcing(format!(
                        "power_law shell count must be a nonnegative integer, got {}",
                        params[2]
                    )));
                }
                Ok(Preset::PowerLaw {
                    c: params[0],
                    q: params[1],
                    shells: params[2] as usize,
                })
            }
            "single_shell" => {
                need(2)?;
                Ok(Preset::SingleShell {
                    lambda: params[0],
                    amplitude: params[1],
                })
            }
            "explicit" => Ok(Preset::Explicit {
                amplitudes: params.to_vec(),
            }),
            other => Err(Error::Forcing(format!("unknown preset {other:?}"))),
        }
    }
}

/// Noise amplitudes aligned one-to-one with a basis enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    pub enumeration: BasisEnumeration,
    pub amplitudes: Vec<f64>,
    pub preset: Preset,
    /// Keep only Beltrami modes with this sign of `tau` (amplitudes of the
    /// others are set to zero).
    pub tau_sign: Option<i8>,
}

/// `C_s = sum_j lambda_j^s b_j^2` for the standard `s`, plus the helicity
/// injection constant `sum_j b_j^2 / tau_j` for Beltrami forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConstants {
    pub c0: f64,
    pub c_minus1: f64,
    pub c1: f64,
    /// `sum_j b_j^2 / sqrt(lambda_j)`
    pub c_minus_half: f64,
    /// `sum_j b_j^2 / tau_j` (Beltrami only)
    pub helicity: Option<f64>,
    /// Extra `(s, C_s)` pairs on request.
    pub extra: Vec<(f64, f64)>,
}

impl ForcingSpec {
    pub fn from_preset(
        enumeration: BasisEnumeration,
        preset: Preset,
        tau_sign: Option<i8>,
    ) -> Result<Self> {
        if let Some(s) = tau_sign {
            if enumeration.flavor != Flavor::Beltrami {
                return Err(Error::Forcing(
                    "a tau-sign filter needs a Beltrami enumeration".into(),
                ));
            }
            if s != 1 && s != -1 {
                return Err(Error::Forcing(format!("tau sign must be +1 or -1, got {s}")));
            }
        }
        let modes = &enumeration.modes;
        let mut amplitudes = match &preset {
            Preset::PowerLaw { c, q, shells } => {
                let all = enumeration.shells();
                if *shells > all.len() {
                    return Err(Error::Forcing(format!(
                        "power_law asks for {shells} shells but the enumeration has {}",
                        all.len()
                    )));
                }
                let cut = if *shells == 0 { 0.0 } else { all[*shells - 1].0 };
                modes
                    .iter()
                    .map(|m| if m.lambda <= cut { c * m.lambda.powf(-q) } else { 0.0 })
                    .collect::<Vec<_>>()
            }
            Preset::SingleShell { lambda, amplitude } => {
                if !modes.iter().any(|m| m.lambda == *lambda) {
                    return Err(Error::Forcing(format!(
                        "no shell with lambda = {lambda} in the enumeration"
                    )));
                }
                modes
                    .iter()
                    .map(|m| if m.lambda == *lambda { *amplitude } else { 0.0 })
                    .collect()
            }
            Preset::Explicit { amplitudes } => {
                if amplitudes.len() != modes.len() {
                    return Err(Error::Forcing(format!(
                        "explicit list has {} amplitudes for {} modes",
                        amplitudes.len(),
                        modes.len()
                    )));
                }
                amplitudes.clone()
            }
        };
        if amplitudes.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Forcing(
                "amplitudes must be finite and nonnegative".into(),
            ));
        }
        if let Some(s) = tau_sign {
            for (b, m) in amplitudes.iter_mut().zip(modes) {
                if m.tau.map(|t| t.signum() as i8) != Some(s) {
                    *b = 0.0;
                }
            }
        }
        Ok(ForcingSpec {
            enumeration,
            amplitudes,
            preset,
            tau_sign,
        })
    }

    pub fn dim(&self) -> usize {
        self.enumeration.d
    }

    /// True when every enumerated mode is forced.
    pub fn all_nonzero(&self) -> bool {
        self.amplitudes.iter().all(|&b| b != 0.0)
    }

    pub fn max_b_sq(&self) -> f64 {
        self.amplitudes.iter().map(|b| b * b).fold(0.0, f64::max)
    }

    /// `(j - 1, b_j)` for the forced modes.
    pub fn active(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(i, &b)| (i, b))
    }

    /// `C_s = sum_j lambda_j^s b_j^2`.
    pub fn c_s(&self, s: f64) -> f64 {
        self.enumeration
            .modes
            .iter()
            .zip(&self.amplitudes)
            .map(|(m, b)| m.lambda.powf(s) * b * b)
            .sum()
    }

    /// `sum_j b_j^2 / tau_j`.
    pub fn helicity_constant(&self) -> Result<f64> {
        if self.enumeration.flavor != Flavor::Beltrami {
            return Err(Error::Forcing(
                "the helicity constant needs a Beltrami enumeration".into(),
            ));
        }
        Ok(self
            .enumeration
            .modes
            .iter()
            .zip(&self.amplitudes)
            .map(|(m, b)| b * b / m.tau.expect("Beltrami modes carry tau"))
            .sum())
    }

    pub fn constants(&self) -> NoiseConstants {
        NoiseConstants {
            c0: self.c_s(0.0),
            c_minus1: self.c_s(-1.0),
            c1: self.c_s(1.0),
            c_minus_half: self.c_s(-0.5),
            helicity: self.helicity_constant().ok(),
            extra: Vec::new(),
        }
    }

    /// `sum_j b_j w_j e_j` for one weight per enumerated mode.
    pub fn synthesize(&self, grid: GridSpec, weights: &[f64]) -> Result<SpectralField> {
        let mut f = SpectralField::zeros(grid);
        for (j, b) in self.active() {
            self.enumeration.modes[j].add_to(&mut f, b * weights[j])?;
        }
        Ok(f)
    }
}

/// Constants for `spec` with extra exponents `s_list`.
pub fn noise_constants(spec: &ForcingSpec, s_list: &[f64]) -> NoiseConstants {
    let mut c = spec.constants();
    c.extra = s_list.iter().map(|&s| (s, spec.c_s(s))).collect();
    c
}

/// Per-mode Gaussian stream keyed by `(seed, trajectory, mode)`.
///
/// Every step consumes exactly four 32-bit words of a ChaCha8 stream, so the
/// draw for a given step is addressable directly and independent of thread
/// scheduling or of how many other streams exist.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    trajectory: u64,
    mode: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

fn stream_key(seed: u64, trajectory: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trajectory.to_le_bytes());
    key
}

impl RngStream {
    pub fn new(seed: u64, trajectory: u64, mode: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(stream_key(seed, trajectory));
        rng.set_stream(mode);
        RngStream {
            seed,
            trajectory,
            mode,
            counter: 0,
            rng,
        }
    }

    pub fn ids(&self) -> (u64, u64, u64) {
        (self.seed, self.trajectory, self.mode)
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Position the stream at step `counter`.
    pub fn seek(&mut self, counter: u64) {
        self.counter = counter;
        self.rng.set_word_pos(counter as u128 * 4);
    }

    /// Two independent standard normals for the current step (Box-Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let x = self.rng.next_u64();
        let y = self.rng.next_u64();
        self.counter += 1;
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (y >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        (r * c, r * s)
    }

    pub fn normal(&mut self) -> f64 {
        self.normal_pair().0
    }
}

/// One stream per enumerated mode of `spec`.
pub fn mode_streams(spec: &ForcingSpec, seed: u64, trajectory: u64) -> Vec<RngStream> {
    (0..spec.amplitudes.len())
        .map(|j| RngStream::new(seed, trajectory, j as u64))
        .collect()
}

/// `zeta(t + dt) - zeta(t) = sum_j b_j sqrt(dt) xi_j e_j`, one draw from each
/// stream.
pub fn wiener_increment(
    spec: &ForcingSpec,
    grid: GridSpec,
    dt: f64,
    streams: &mut [RngStream],
) -> Result<SpectralField> {
    if dt < 0.0 || !dt.is_finite() {
        return Err(Error::Params(format!("dt must be nonnegative, got {dt}")));
    }
    if streams.len() != spec.amplitudes.len() {
        return Err(Error::Forcing(format!(
            "{} streams for {} modes",
            streams.len(),
            spec.amplitudes.len()
        )));
    }
    let sq = dt.sqrt();
    let w: Vec<f64> = streams.iter_mut().map(|s| s.normal() * sq).collect();
    spec.synthesize(grid, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::enumerate_basis;

    #[test]
    fn two_term_constants() {
        let e = enumerate_basis(2, 2.0, Flavor::Stokes).unwrap();
        let mut amps = vec![0.0; e.len()];
        amps[0] = 1.0;
        amps[4] = 0.5;
        let s = ForcingSpec::from_preset(e, Preset::Explicit { amplitudes: amps }, None).unwrap();
        let c = noise_constants(&s, &[2.0]);
        assert_eq!(c.c0, 1.25);
        assert_eq!(c.c_minus1, 1.125);
        assert_eq!(c.c1, 1.5);
        assert_eq!(c.extra, vec![(2.0, 2.0)]);
        assert!(c.helicity.is_none());
        assert!(s.helicity_constant().is_err());
    }

    #[test]
    fn zero_amplitudes_give_zero_constants() {
        let e = enumerate_basis(2, 2.0, Flavor::Stokes).unwrap();
        let n = e.len();
        let s = ForcingSpec::from_preset(e, Preset::Explicit { amplitudes: vec![0.0; n] }, None)
            .unwrap();
        let c = s.constants();
        assert_eq!((c.c0, c.c_minus1, c.c1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_beltrami_mode_sign() {
        let e = enumerate_basis(3, 1.0, Flavor::Beltrami).unwrap();
        for sign in [1.0, -1.0] {
            let mut amps = vec![0.0; e.len()];
            let j = e.modes.iter().position(|m| m.tau == Some(sign)).unwrap();
            amps[j] = 1.0;
            let s = ForcingSpec::from_preset(
                e.clone(),
                Preset::Explicit { amplitudes: amps },
                None,
            )
            .unwrap();
            assert_eq!(s.helicity_constant().unwrap(), sign);
        }
    }

    #[test]
    fn presets() {
        let e = enumerate_basis(2, 5.0, Flavor::Stokes).unwrap();
        let s = ForcingSpec::from_preset(e.clone(), Preset::from_name("power_law", &[1.0, 1.0, 2.0]).unwrap(), None)
            .unwrap();
        assert_eq!(&s.amplitudes[..8], &[1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5]);
        assert!(s.amplitudes[8..].iter().all(|&b| b == 0.0));
        assert!(!s.all_nonzero());
        let one = ForcingSpec::from_preset(e.clone(), Preset::SingleShell { lambda: 1.0, amplitude: 1.0 }, None)
            .unwrap();
        assert_eq!(one.c_s(0.0), 4.0);
        assert!(ForcingSpec::from_preset(e.clone(), Preset::Explicit { amplitudes: vec![1.0] }, None).is_err());
        assert!(ForcingSpec::from_preset(e.clone(), Preset::from_name("power_law", &[1.0, 1.0, 9.0]).unwrap(), None).is_err());
        assert!(Preset::from_name("bogus", &[]).is_err());
        assert!(ForcingSpec::from_preset(e, Preset::SingleShell { lambda: 1.0, amplitude: 1.0 }, Some(1)).is_err());
    }

    #[test]
    fn tau_filter() {
        let e = enumerate_basis(3, 1.0, Flavor::Beltrami).unwrap();
        let s = ForcingSpec::from_preset(e, Preset::SingleShell { lambda: 1.0, amplitude: 1.0 }, Some(1))
            .unwrap();
        assert_eq!(s.c_s(0.0), 6.0);
        assert_eq!(s.helicity_constant().unwrap(), 6.0);
    }

    #[test]
    fn streams_are_addressable() {
        let mut a = RngStream::new(7, 3, 5);
        let first: Vec<(f64, f64)> = (0..10).map(|_| a.normal_pair()).collect();
        let mut b = RngStream::new(7, 3, 5);
        b.seek(6);
        assert_eq!(b.normal_pair(), first[6]);
        assert_eq!(b.counter(), 7);
        let mut c = RngStream::new(7, 4, 5);
        assert_ne!(c.normal_pair(), first[0]);
        let mut d = RngStream::new(7, 3, 6);
        assert_ne!(d.normal_pair(), first[0]);
    }

    #[test]
    fn zero_dt_increment_is_zero() {
        let e = enumerate_basis(2, 1.0, Flavor::Stokes).unwrap();
        let s = ForcingSpec::from_preset(e, Preset::SingleShell { lambda: 1.0, amplitude: 1.0 }, None)
            .unwrap();
        let g = GridSpec::new(2, 8).unwrap();
        let mut st = mode_streams(&s, 1, 0);
        assert_eq!(wiener_increment(&s, g, 0.0, &mut st).unwrap().max_abs(), 0.0);
        assert!(wiener_increment(&s, g, -1.0, &mut st).is_err());
    }
}
