//! Time stepping: exponential Euler-Maruyama on the mild form with the exact
//! per-mode Ornstein-Uhlenbeck noise integral, deterministic runs, and the
//! perturbed system for `b = B - Z`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{nonlinear, PhysicsParams};
use crate::error::{Error, Result};
use crate::forcing::{mode_streams, ForcingSpec, RngStream};
use crate::spectral::{to_physical, GridSpec, SpectralField, WaveVector};

/// Deterministic time-stepping scheme for the transport term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `B' = E (B + dt N(B)) + noise`, heat factor applied after the increment.
    ExpEuler,
    /// `B' = E B + dt phi_1(kappa L dt) N(B) + noise`.
    Etd1,
    /// Integrating-factor (Lawson) Runge-Kutta 4; deterministic only.
    IfRk4,
}

/// Per forced mode: where it lives and the exact OU moments over one step.
#[derive(Debug, Clone)]
struct NoiseMode {
    /// Index into the enumeration.
    j: usize,
    /// `sqrt(kappa) b_j` times the mode coefficient at `+k`.
    coeff: [Complex64; 3],
    k: WaveVector,
    b: f64,
    /// `kappa lambda_j^alpha`
    rate: f64,
    lambda: f64,
    tau: Option<f64>,
}

/// Exact moments of `(beta(h), int_0^h e^{-a (h - s)} d beta(s))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuMoments {
    pub var_beta: f64,
    pub var_conv: f64,
    pub cov: f64,
}

impl OuMoments {
    pub fn new(rate: f64, h: f64) -> Self {
        let (var_conv, cov) = if rate * h < 1e-8 {
            (h * (1.0 - rate * h), h * (1.0 - 0.5 * rate * h))
        } else {
            (
                -(-2.0 * rate * h).exp_m1() / (2.0 * rate),
                -(-rate * h).exp_m1() / rate,
            )
        };
        OuMoments {
            var_beta: h,
            var_conv,
            cov,
        }
    }

    /// Map two standard normals to `(delta beta, conv)`. The convolution uses
    /// only the first normal.
    pub fn draw(&self, z0: f64, z1: f64) -> (f64, f64) {
        let s = self.var_conv.sqrt();
        if s == 0.0 {
            return (0.0, 0.0);
        }
        let c = self.cov / s;
        let rest = (self.var_beta - c * c).max(0.0).sqrt();
        (c * z0 + rest * z1, s * z0)
    }
}

/// Cumulative zero-mean noise terms of the quadratic observables, used as
/// control variates in the balance identities. For a quadratic form `Q`
/// and noise kick `xi` on top of the deterministic update `D`,
/// `Q(D + xi) - Q(D) = 2 Q(D, xi) + Q(xi)`; the ledger accumulates this minus
/// its conditional mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Martingale {
    pub energy: f64,
    /// Helicity (d = 3) or mean-square potential (d = 2).
    pub secondary: f64,
}

/// Fixed ingredients of a run: grid, physics, forcing and time step.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub grid: GridSpec,
    pub params: PhysicsParams,
    pub forcing: Option<Arc<ForcingSpec>>,
    pub dt: f64,
    pub scheme: Scheme,
    heat: Vec<f64>,
    half_heat: Vec<f64>,
    phi1: Vec<f64>,
    noise: Vec<NoiseMode>,
    moments: Vec<OuMoments>,
}

impl Stepper {
    pub fn new(
        grid: GridSpec,
        params: PhysicsParams,
        forcing: Option<Arc<ForcingSpec>>,
        dt: f64,
        scheme: Scheme,
    ) -> Result<Self> {
        params.validate(grid.dim())?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Params(format!("dt must be positive, got {dt}")));
        }
        let mut noise = Vec::new();
        if let Some(f) = &forcing {
            if f.dim() != grid.dim() {
                return Err(Error::GridMismatch {
                    expected: format!("d={}", grid.dim()),
                    found: format!("forcing with d={}", f.dim()),
                });
            }
            if params.kappa > 0.0 {
                if scheme == Scheme::IfRk4 && f.active().next().is_some() {
                    return Err(Error::Params(
                        "the RK4 scheme is deterministic; use exp_euler or etd1 with forcing"
                            .into(),
                    ));
                }
                let cut = grid.dealias_cutoff() as i32;
                let sk = params.kappa.sqrt();
                for (j, b) in f.active() {
                    let m = &f.enumeration.modes[j];
                    if m.k.components().iter().any(|c| c.abs() > cut) {
                        return Err(Error::Forcing(format!(
                            "forced mode {} at k = {} lies outside the dealiased band |k_i| <= {cut}",
                            m.index, m.k
                        )));
                    }
                    let c = m.coefficient();
                    noise.push(NoiseMode {
                        j,
                        coeff: [c[0] * sk * b, c[1] * sk * b, c[2] * sk * b],
                        k: m.k,
                        b,
                        rate: params.kappa * m.lambda.powf(params.alpha),
                        lambda: m.lambda,
                        tau: m.tau,
                    });
                }
            }
        }
        let t = grid.tables();
        let lin: Vec<f64> = t
            .ksq
            .iter()
            .map(|&q| if q == 0.0 { 0.0 } else { params.kappa * q.powf(params.alpha) })
            .collect();
        let heat = lin.iter().map(|&a| (-a * dt).exp()).collect();
        let half_heat = lin.iter().map(|&a| (-0.5 * a * dt).exp()).collect();
        let phi1 = lin
            .iter()
            .map(|&a| {
                let z = a * dt;
                if z < 1e-8 {
                    1.0 - 0.5 * z
                } else {
                    -(-z).exp_m1() / z
                }
            })
            .collect();
        let moments = noise.iter().map(|m| OuMoments::new(m.rate, dt)).collect();
        Ok(Stepper {
            grid,
            params,
            forcing,
            dt,
            scheme,
            heat,
            half_heat,
            phi1,
            noise,
            moments,
        })
    }

    /// Number of forced modes (one noise value each per step).
    pub fn noise_count(&self) -> usize {
        self.noise.len()
    }

    /// Enumeration indices of the forced modes.
    pub fn noise_modes(&self) -> Vec<usize> {
        self.noise.iter().map(|m| m.j).collect()
    }

    /// Per-mode OU rates `kappa lambda_j^alpha`.
    pub fn noise_rates(&self) -> Vec<f64> {
        self.noise.iter().map(|m| m.rate).collect()
    }

    /// Streams for the forced modes of trajectory `trajectory`.
    pub fn streams(&self, seed: u64, trajectory: u64) -> Vec<RngStream> {
        match &self.forcing {
            Some(f) => {
                let all = mode_streams(f, seed, trajectory);
                self.noise.iter().map(|m| all[m.j].clone()).collect()
            }
            None => Vec::new(),
        }
    }

    /// Blow-up bound `1e6 max(C_{-1}, ||B_0||^2, 1)`.
    pub fn blowup_threshold(&self, b0: &SpectralField) -> f64 {
        let c = self.forcing.as_ref().map(|f| f.c_s(-1.0)).unwrap_or(0.0);
        1e6 * c.max(b0.norm_sq()).max(1.0)
    }

    fn transport(&self, b: &SpectralField) -> Option<SpectralField> {
        if self.params.transport {
            Some(nonlinear(b, self.params.gamma).1)
        } else {
            None
        }
    }

    /// Deterministic part of one step.
    pub fn deterministic_update(&self, b: &SpectralField) -> SpectralField {
        let dt = self.dt;
        match self.scheme {
            Scheme::ExpEuler => {
                let mut out = match self.transport(b) {
                    Some(n) => b.axpy(dt, &n),
                    None => b.clone(),
                };
                out.apply_multiplier_in_place(&self.heat);
                out
            }
            Scheme::Etd1 => self.etd1(b, b),
            Scheme::IfRk4 => {
                let Some(k1) = self.transport(b) else {
                    let mut out = b.clone();
                    out.apply_multiplier_in_place(&self.heat);
                    return out;
                };
                let n = |f: &SpectralField| nonlinear(f, self.params.gamma).1;
                let half = |f: &SpectralField| {
                    let mut g = f.clone();
                    g.apply_multiplier_in_place(&self.half_heat);
                    g
                };
                let full = |f: &SpectralField| {
                    let mut g = f.clone();
                    g.apply_multiplier_in_place(&self.heat);
                    g
                };
                let eb_half = half(b);
                let k2 = n(&half(&b.axpy(0.5 * dt, &k1)));
                let k3 = n(&eb_half.axpy(0.5 * dt, &k2));
                let k4 = n(&full(b).axpy(dt, &half(&k3)));
                let mut acc = full(&k1);
                acc = acc.add(&half(&k2.add(&k3)).scale(2.0));
                acc = acc.add(&k4);
                full(b).axpy(dt / 6.0, &acc)
            }
        }
    }

    /// `E b + dt phi_1 N(x)`.
    fn etd1(&self, b: &SpectralField, x: &SpectralField) -> SpectralField {
        let mut out = b.clone();
        out.apply_multiplier_in_place(&self.heat);
        if let Some(mut n) = self.transport(x) {
            n.apply_multiplier_in_place(&self.phi1);
            out.axpy_in_place(self.dt, &n);
        }
        out
    }

    /// Noise kick `sum_j sqrt(kappa) b_j I_j e_j` for given convolution values.
    pub fn noise_field(&self, conv: &[f64]) -> SpectralField {
        let mut xi = SpectralField::zeros(self.grid);
        for (m, &c) in self.noise.iter().zip(conv) {
            let v: Vec<Complex64> = m.coeff.iter().map(|z| z * c).collect();
            xi.add_mode(&m.k, &v[..self.grid.dim()])
                .expect("forced modes are inside the band");
        }
        xi
    }

    fn draw(&self, streams: &mut [RngStream]) -> Vec<f64> {
        streams
            .iter_mut()
            .zip(&self.moments)
            .map(|(s, mo)| {
                let (z0, z1) = s.normal_pair();
                mo.draw(z0, z1).1
            })
            .collect()
    }

    /// Exact conditional means of `Q(xi)` for the energy and secondary forms.
    fn kick_means(&self) -> (f64, f64) {
        let mut e = 0.0;
        let mut s = 0.0;
        for (m, mo) in self.noise.iter().zip(&self.moments) {
            let v = self.params.kappa * m.b * m.b * mo.var_conv;
            e += v;
            s += match m.tau {
                Some(t) => v / t,
                None => v / m.lambda,
            };
        }
        (e, s)
    }

    /// Apply a step given the deterministic update and the noise values.
    fn finish(&self, state: &mut SimState, det: SpectralField, conv: &[f64]) -> Result<()> {
        let mut next = det;
        if !self.noise.is_empty() {
            let xi = self.noise_field(conv);
            let (me, ms) = self.kick_means();
            let de = 2.0 * next.inner(&xi) + xi.norm_sq();
            let ds = 2.0 * secondary_form(&next, &xi) + secondary_form(&xi, &xi);
            state.martingale.energy += de - me;
            state.martingale.secondary += ds - ms;
            next.axpy_in_place(1.0, &xi);
        }
        state.step += 1;
        state.t = state.step as f64 * self.dt + state.t0;
        state.b = next;
        state.check()
    }

    /// One step drawing noise from the state's streams.
    pub fn step(&self, state: &mut SimState) -> Result<()> {
        let det = self.deterministic_update(&state.b);
        let conv = self.draw(&mut state.streams);
        self.finish(state, det, &conv)
    }

    /// One step with prescribed noise convolution values.
    pub fn step_with(&self, state: &mut SimState, conv: &[f64]) -> Result<()> {
        if conv.len() != self.noise.len() {
            return Err(Error::GridMismatch {
                expected: format!("{} noise values", self.noise.len()),
                found: format!("{}", conv.len()),
            });
        }
        let det = self.deterministic_update(&state.b);
        for s in state.streams.iter_mut() {
            s.seek(s.counter() + 1);
        }
        self.finish(state, det, conv)
    }

    /// Time step from the advective restriction `cfl dx / max|u|`, capped.
    pub fn auto_dt(b: &SpectralField, params: &PhysicsParams, cfl: f64, dt_max: f64) -> f64 {
        if !params.transport {
            return dt_max;
        }
        let (u, _) = nonlinear(b, params.gamma);
        let umax = to_physical(&u).max_norm();
        if umax == 0.0 {
            dt_max
        } else {
            (cfl * b.grid().spacing() / umax).min(dt_max)
        }
    }
}

/// `(S a, b)` for `S = curl^{-1}` (d = 3) or `(-Delta)^{-1}` (d = 2).
pub fn secondary_form(a: &SpectralField, b: &SpectralField) -> f64 {
    let grid = a.grid();
    let t = grid.tables();
    let len = grid.len();
    let mut s = 0.0;
    if grid.dim() == 2 {
        for c in 0..2 {
            let (ac, bc) = (a.component(c), b.component(c));
            for i in 0..len {
                if t.ksq[i] > 0.0 {
                    s += (ac[i] * bc[i].conj()).re / t.ksq[i];
                }
            }
        }
    } else {
        let im = Complex64::new(0.0, 1.0);
        let (a0, a1, a2) = (a.component(0), a.component(1), a.component(2));
        let (b0, b1, b2) = (b.component(0), b.component(1), b.component(2));
        for i in 0..len {
            let q = t.ksq[i];
            if q == 0.0 {
                continue;
            }
            let k = &t.k[i];
            let c0 = im * (a2[i] * k[1] - a1[i] * k[2]);
            let c1 = im * (a0[i] * k[2] - a2[i] * k[0]);
            let c2 = im * (a1[i] * k[0] - a0[i] * k[1]);
            s += (c0 * b0[i].conj() + c1 * b1[i].conj() + c2 * b2[i].conj()).re / q;
        }
    }
    s * grid.volume()
}

/// Mutable trajectory state.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    /// Time at which `step` was zero.
    pub t0: f64,
    pub step: u64,
    pub b: SpectralField,
    pub streams: Vec<RngStream>,
    pub martingale: Martingale,
    pub seed: u64,
    pub trajectory: u64,
    pub threshold: f64,
}

impl SimState {
    pub fn new(stepper: &Stepper, b0: SpectralField, seed: u64, trajectory: u64) -> Result<Self> {
        if b0.grid() != stepper.grid {
            return Err(Error::GridMismatch {
                expected: stepper.grid.to_string(),
                found: b0.grid().to_string(),
            });
        }
        let threshold = stepper.blowup_threshold(&b0);
        let mut b = b0;
        b.truncate_dealiased();
        Ok(SimState {
            t: 0.0,
            t0: 0.0,
            step: 0,
            b,
            streams: stepper.streams(seed, trajectory),
            martingale: Martingale::default(),
            seed,
            trajectory,
            threshold,
        })
    }

    /// Restore a state saved at `step`, with streams positioned to continue.
    pub fn resume(
        stepper: &Stepper,
        b: SpectralField,
        step: u64,
        t0: f64,
        seed: u64,
        trajectory: u64,
        threshold: f64,
    ) -> Result<Self> {
        let mut s = SimState::new(stepper, b, seed, trajectory)?;
        s.threshold = threshold;
        s.t0 = t0;
        s.step = step;
        s.t = t0 + step as f64 * stepper.dt;
        for st in s.streams.iter_mut() {
            st.seek(step);
        }
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if !self.b.is_finite() {
            return Err(Error::BlowUp {
                t: self.t,
                reason: "non-finite coefficient".into(),
            });
        }
        let e = self.b.norm_sq();
        if e > self.threshold {
            return Err(Error::BlowUp {
                t: self.t,
                reason: format!("||B||^2 = {e:.6e} exceeds {:.6e}", self.threshold),
            });
        }
        Ok(())
    }
}

/// Number of steps to cover `t` with step `dt`.
pub fn step_count(t: f64, dt: f64) -> u64 {
    let r = t / dt;
    let n = r.round();
    if (r - n).abs() < 1e-9 * r.max(1.0) {
        n as u64
    } else {
        r.ceil() as u64
    }
}

/// Advance `state` over time `t_total`, calling `visit` after every
/// `stride`-th step.
pub fn run_with<F>(
    stepper: &Stepper,
    state: &mut SimState,
    t_total: f64,
    stride: usize,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&SimState) -> Result<()>,
{
    if !(t_total > 0.0) {
        return Err(Error::Params(format!("T must be positive, got {t_total}")));
    }
    if stride == 0 {
        return Err(Error::Params("stride must be >= 1".into()));
    }
    let steps = step_count(t_total, stepper.dt);
    for s in 1..=steps {
        stepper.step(state)?;
        if s as usize % stride == 0 {
            visit(state)?;
        }
    }
    Ok(())
}

/// Jointly Gaussian per-mode pairs `(delta beta_j, I_j)` over a uniform time
/// grid, where `I_j` is the exact OU convolution with rate `kappa lambda_j^alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub rates: Vec<f64>,
    /// `[step][mode]`
    pub dbeta: Vec<Vec<f64>>,
    pub conv: Vec<Vec<f64>>,
}

impl NoisePath {
    /// Sample `steps` intervals from the same streams `Stepper::step` uses.
    pub fn sample(stepper: &Stepper, seed: u64, trajectory: u64, steps: usize) -> Self {
        let mut streams = stepper.streams(seed, trajectory);
        let mut dbeta = Vec::with_capacity(steps);
        let mut conv = Vec::with_capacity(steps);
        for _ in 0..steps {
            let (db, c): (Vec<f64>, Vec<f64>) = streams
                .iter_mut()
                .zip(&stepper.moments)
                .map(|(s, mo)| {
                    let (z0, z1) = s.normal_pair();
                    mo.draw(z0, z1)
                })
                .unzip();
            dbeta.push(db);
            conv.push(c);
        }
        NoisePath {
            dt: stepper.dt,
            rates: stepper.noise_rates(),
            dbeta,
            conv,
        }
    }

    pub fn steps(&self) -> usize {
        self.conv.len()
    }

    /// The same Brownian path on a grid twice as coarse (exact).
    pub fn coarsen(&self) -> Result<Self> {
        if self.steps() % 2 != 0 {
            return Err(Error::Params("coarsening needs an even step count".into()));
        }
        let decay: Vec<f64> = self.rates.iter().map(|a| (-a * self.dt).exp()).collect();
        let mut dbeta = Vec::with_capacity(self.steps() / 2);
        let mut conv = Vec::with_capacity(self.steps() / 2);
        for p in 0..self.steps() / 2 {
            let (i, j) = (2 * p, 2 * p + 1);
            dbeta.push(
                self.dbeta[i]
                    .iter()
                    .zip(&self.dbeta[j])
                    .map(|(x, y)| x + y)
                    .collect(),
            );
            conv.push(
                (0..self.rates.len())
                    .map(|m| decay[m] * self.conv[i][m] + self.conv[j][m])
                    .collect(),
            );
        }
        Ok(NoisePath {
            dt: 2.0 * self.dt,
            rates: self.rates.clone(),
            dbeta,
            conv,
        })
    }

    fn check(&self, stepper: &Stepper) -> Result<()> {
        let ok = (self.dt - stepper.dt).abs() <= 1e-12 * stepper.dt
            && self.rates.len() == stepper.noise_count();
        if ok {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: format!("dt = {}, {} modes", stepper.dt, stepper.noise_count()),
                found: format!("dt = {}, {} modes", self.dt, self.rates.len()),
            })
        }
    }
}

/// Stochastic convolution `Z(t_i)`, `Z(0) = 0`, driven by `path`.
pub fn stochastic_convolution(stepper: &Stepper, path: &NoisePath) -> Result<Vec<SpectralField>> {
    path.check(stepper)?;
    if stepper.params.kappa <= 0.0 {
        return Err(Error::Params("the stochastic convolution needs kappa > 0".into()));
    }
    let mut z = SpectralField::zeros(stepper.grid);
    let mut out = Vec::with_capacity(path.steps() + 1);
    out.push(z.clone());
    for conv in &path.conv {
        z.apply_multiplier_in_place(&stepper.heat);
        z.axpy_in_place(1.0, &stepper.noise_field(conv));
        out.push(z.clone());
    }
    Ok(out)
}

/// Direct run driven by a prescribed noise path; returns `B(t_i)`, `i = 0..=M`.
pub fn run_path(stepper: &Stepper, b0: &SpectralField, path: &NoisePath) -> Result<Vec<SpectralField>> {
    path.check(stepper)?;
    let mut state = SimState::new(stepper, b0.clone(), 0, 0)?;
    let mut out = Vec::with_capacity(path.steps() + 1);
    out.push(state.b.clone());
    for conv in &path.conv {
        stepper.step_with(&mut state, conv)?;
        out.push(state.b.clone());
    }
    Ok(out)
}

/// Perturbed system for `b = B - Z` with the realized `Z`:
/// `b' = E b + dt phi_1 N(b + Z)`. Returns `b(t_i)`.
pub fn run_perturbed(
    stepper: &Stepper,
    b0: &SpectralField,
    z: &[SpectralField],
) -> Result<Vec<SpectralField>> {
    if b0.grid() != stepper.grid || z.iter().any(|f| f.grid() != stepper.grid) {
        return Err(Error::GridMismatch {
            expected: stepper.grid.to_string(),
            found: "perturbed-run inputs on another grid".into(),
        });
    }
    if z.is_empty() {
        return Err(Error::Params("empty Z path".into()));
    }
    let threshold = stepper.blowup_threshold(b0);
    let mut b = b0.clone();
    b.truncate_dealiased();
    let mut out = Vec::with_capacity(z.len());
    out.push(b.clone());
    for (i, zi) in z[..z.len() - 1].iter().enumerate() {
        b = stepper.etd1(&b, &b.add(zi));
        if !b.is_finite() || b.norm_sq() > threshold {
            return Err(Error::BlowUp {
                t: (i + 1) as f64 * stepper.dt,
                reason: "perturbed run diverged".into(),
            });
        }
        out.push(b.clone());
    }
    Ok(out)
}

/// Noise-free run; returns the states at every step, starting with `B_0`.
pub fn run_deterministic(
    b0: &SpectralField,
    params: &PhysicsParams,
    t_total: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Vec<SpectralField>> {
    let stepper = Stepper::new(b0.grid(), *params, None, dt, scheme)?;
    let mut state = SimState::new(&stepper, b0.clone(), 0, 0)?;
    let mut out = vec![state.b.clone()];
    run_with(&stepper, &mut state, t_total, 1, |s| {
        out.push(s.b.clone());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::{enumerate_basis, kolmogorov_field, stokes_mode, Branch, Flavor};
    use crate::forcing::Preset;

    fn shell_forcing(d: usize, lmax: f64, lambda: f64) -> Arc<ForcingSpec> {
        let flavor = if d == 2 { Flavor::Stokes } else { Flavor::Beltrami };
        let e = enumerate_basis(d, lmax, flavor).unwrap();
        Arc::new(
            ForcingSpec::from_preset(e, Preset::SingleShell { lambda, amplitude: 1.0 }, None)
                .unwrap(),
        )
    }

    #[test]
    fn heat_factor_is_exact() {
        let g = GridSpec::new(2, 16).unwrap();
        let m = stokes_mode(&WaveVector::new(&[1, 2]).unwrap(), 1, Branch::Cos).unwrap();
        let e = m.field(g).unwrap();
        let p = PhysicsParams {
            gamma: 2.0,
            alpha: 1.0,
            kappa: 0.7,
            transport: false,
        };
        for dt in [0.3, 0.01] {
            let path = run_deterministic(&e, &p, 0.9, dt, Scheme::ExpEuler).unwrap();
            let want = e.scale((-0.7 * 5.0 * 0.9f64).exp());
            assert!(path.last().unwrap().sub(&want).max_abs() < 1e-15);
        }
    }

    #[test]
    fn kolmogorov_is_fixed() {
        let g = GridSpec::new(2, 16).unwrap();
        let b = kolmogorov_field(g, 1.0).unwrap();
        let p = PhysicsParams::defaults(2, 0.0);
        let path = run_deterministic(&b, &p, 0.5, 0.05, Scheme::IfRk4).unwrap();
        assert_eq!(path.len(), 11);
        assert!(path.last().unwrap().sub(&b).max_abs() < 1e-14);
    }

    #[test]
    fn ou_moments_small_rate_limit() {
        let a = OuMoments::new(1e-12, 0.1);
        assert!((a.var_conv - 0.1).abs() < 1e-12);
        assert!((a.cov - 0.1).abs() < 1e-12);
        let b = OuMoments::new(2.0, 0.5);
        assert!((b.var_conv - (1.0 - (-2.0f64).exp()) / 4.0).abs() < 1e-15);
        assert!((b.cov - (1.0 - (-1.0f64).exp()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ten_steps_ten_records_and_stride() {
        let g = GridSpec::new(2, 16).unwrap();
        let p = PhysicsParams::defaults(2, 0.5);
        let f = shell_forcing(2, 2.0, 1.0);
        let st = Stepper::new(g, p, Some(f), 0.01, Scheme::ExpEuler).unwrap();
        let b0 = SpectralField::zeros(g);
        let mut count = 0;
        let mut s1 = SimState::new(&st, b0.clone(), 3, 0).unwrap();
        run_with(&st, &mut s1, 0.1, 1, |_| {
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count, 10);
        let mut count2 = 0;
        let mut s2 = SimState::new(&st, b0, 3, 0).unwrap();
        run_with(&st, &mut s2, 0.1, 2, |_| {
            count2 += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count2, 5);
        assert_eq!(s1.b, s2.b);
        assert_eq!(s1.step, 10);
    }

    #[test]
    fn forcing_outside_band_is_rejected() {
        let g = GridSpec::new(2, 8).unwrap();
        // cutoff floor(8/3) = 2; lambda = 9 has k = (0, 3)
        let f = shell_forcing(2, 9.0, 9.0);
        let p = PhysicsParams::defaults(2, 0.5);
        assert!(Stepper::new(g, p, Some(f), 0.01, Scheme::ExpEuler).is_err());
    }

    #[test]
    fn noise_path_matches_streams() {
        let g = GridSpec::new(2, 16).unwrap();
        let p = PhysicsParams::defaults(2, 0.5);
        let st = Stepper::new(g, p, Some(shell_forcing(2, 2.0, 2.0)), 0.01, Scheme::ExpEuler)
            .unwrap();
        let path = NoisePath::sample(&st, 9, 1, 20);
        let b0 = SpectralField::zeros(g);
        let direct = run_path(&st, &b0, &path).unwrap();
        let mut s = SimState::new(&st, b0, 9, 1).unwrap();
        for _ in 0..20 {
            st.step(&mut s).unwrap();
        }
        assert_eq!(&s.b, direct.last().unwrap());
    }

    #[test]
    fn coarsening_composes() {
        let g = GridSpec::new(2, 16).unwrap();
        let p = PhysicsParams {
            transport: false,
            ..PhysicsParams::defaults(2, 0.8)
        };
        let f = shell_forcing(2, 2.0, 2.0);
        let fine = Stepper::new(g, p, Some(f.clone()), 0.01, Scheme::ExpEuler).unwrap();
        let coarse = Stepper::new(g, p, Some(f), 0.02, Scheme::ExpEuler).unwrap();
        let path = NoisePath::sample(&fine, 4, 0, 40);
        let zf = stochastic_convolution(&fine, &path).unwrap();
        let zc = stochastic_convolution(&coarse, &path.coarsen().unwrap()).unwrap();
        assert!(zf[40].sub(&zc[20]).max_abs() < 1e-14);
        assert_eq!(zf[0].max_abs(), 0.0);
        assert!(stochastic_convolution(&coarse, &path).is_err());
    }

    #[test]
    fn perturbed_trivial_cases() {
        let g = GridSpec::new(2, 16).unwrap();
        let p = PhysicsParams {
            transport: false,
            ..PhysicsParams::defaults(2, 0.8)
        };
        let st = Stepper::new(g, p, Some(shell_forcing(2, 2.0, 1.0)), 0.01, Scheme::ExpEuler)
            .unwrap();
        let path = NoisePath::sample(&st, 2, 0, 10);
        let z = stochastic_convolution(&st, &path).unwrap();
        let b = run_perturbed(&st, &SpectralField::zeros(g), &z).unwrap();
        assert!(b.iter().all(|f| f.max_abs() == 0.0));
        let direct = run_path(&st, &SpectralField::zeros(g), &path).unwrap();
        assert!(direct[10].sub(&z[10]).max_abs() < 1e-15);
    }

    #[test]
    fn blowup_reported() {
        let g = GridSpec::new(2, 16).unwrap();
        let p = PhysicsParams::defaults(2, 0.0);
        let st = Stepper::new(g, p, None, 0.01, Scheme::ExpEuler).unwrap();
        let mut s = SimState::new(&st, kolmogorov_field(g, 1.0).unwrap(), 0, 0).unwrap();
        s.threshold = 1.0;
        match st.step(&mut s) {
            Err(Error::BlowUp { t, .. }) => assert!((t - 0.01).abs() < 1e-15),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn step_count_rounding() {
        assert_eq!(step_count(0.1, 0.01), 10);
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(5.0, 0.005), 1000);
    }
}
