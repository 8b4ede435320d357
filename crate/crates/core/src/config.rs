//! Run configuration: a sectioned TOML document validated into [`SimConfig`].
//! Every violation is collected; unknown keys are errors.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::diagnostics::{ObserveOptions, StationaryOptions};
use crate::dynamics::PhysicsParams;
use crate::eigenbasis::{
    abc_field, beltrami_mode, enumerate_basis, kolmogorov_field, stokes_mode, Branch, Flavor,
};
use crate::error::{Error, Result};
use crate::forcing::{ForcingSpec, Preset};
use crate::integrator::{Scheme, Stepper};
use crate::spectral::{GridSpec, SpectralField, WaveVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DtChoice {
    Fixed { dt: f64 },
    /// `min(cfl dx / max|u(B_0)|, dt_max)`, fixed for the whole run.
    Auto { cfl: f64, dt_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialBase {
    Zero,
    Kolmogorov { amplitude: f64 },
    Abc { a: f64, b: f64, c: f64 },
    Snapshot { path: PathBuf },
}

/// An added basis mode `amplitude * e` with `e` a Stokes (`cos`/`sin`) or
/// Beltrami (`p`/`q`/`r`/`s`) mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTerm {
    pub k: Vec<i32>,
    pub branch: Branch,
    pub polarization: u8,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub base: InitialBase,
    pub modes: Vec<ModeTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingConfig {
    pub flavor: Flavor,
    pub preset: Preset,
    pub lambda_max: f64,
    pub tau_sign: Option<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSection {
    pub trajectories: usize,
    /// `None`: `20 / (kappa lambda_1)`.
    pub burn_in: Option<f64>,
    /// Steps between samples.
    pub sample_stride: usize,
    /// Samples per trajectory.
    pub samples: usize,
    /// Physical length of the windows over which the field is time-averaged.
    pub window: f64,
    /// Rayon worker count (0: all cores).
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub kappas: Vec<f64>,
    pub warm_start: bool,
    /// Sampling duration per kappa as a multiple of `20 / (kappa lambda_1)`.
    pub sample_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub stride: usize,
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSection {
    pub observe: ObserveOptions,
    pub stationary: StationaryOptions,
    /// Exponential-moment parameter; `None` uses `1 / (2 max b_j^2)`.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    pub n: usize,
    pub physics: PhysicsParams,
    pub t_end: f64,
    pub dt: DtChoice,
    pub scheme: Scheme,
    pub seed: u64,
    pub initial: InitialCondition,
    pub forcing: Option<ForcingConfig>,
    pub ensemble: EnsembleSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
    pub diagnostics: DiagnosticsSection,
}

impl SimConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.d, self.n)
    }

    /// SHA-256 of the canonical (sorted-key) JSON form.
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        let s = serde_json::to_string(&v).expect("value serializes");
        let digest = Sha256::digest(s.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Hash of everything that determines a trajectory except its length;
    /// checkpoints carry it so a resumed run can extend `T`.
    pub fn dynamics_hash(&self) -> String {
        let mut c = self.clone();
        c.t_end = 0.0;
        c.output = OutputSection { stride: 1, dir: None };
        c.hash()
    }

    pub fn forcing_spec(&self) -> Result<Option<Arc<ForcingSpec>>> {
        match &self.forcing {
            None => Ok(None),
            Some(f) => {
                let e = enumerate_basis(self.d, f.lambda_max, f.flavor)?;
                Ok(Some(Arc::new(ForcingSpec::from_preset(
                    e,
                    f.preset.clone(),
                    f.tau_sign,
                )?)))
            }
        }
    }

    pub fn initial_field(&self) -> Result<SpectralField> {
        let grid = self.grid()?;
        let mut b = match &self.initial.base {
            InitialBase::Zero => SpectralField::zeros(grid),
            InitialBase::Kolmogorov { amplitude } => kolmogorov_field(grid, *amplitude)?,
            InitialBase::Abc { a, b, c } => abc_field(grid, *a, *b, *c)?,
            InitialBase::Snapshot { path } => {
                let f = crate::io::read_snapshot(path)?;
                if f.grid() != grid {
                    return Err(Error::GridMismatch {
                        expected: grid.to_string(),
                        found: f.grid().to_string(),
                    });
                }
                f
            }
        };
        for m in &self.initial.modes {
            let k = WaveVector::new(&m.k)?;
            let mode = match m.branch {
                Branch::Cos | Branch::Sin => stokes_mode(&k, m.polarization, m.branch)?,
                _ => beltrami_mode(&k, m.branch)?,
            };
            mode.add_to(&mut b, m.amplitude)?;
        }
        Ok(b)
    }

    /// Stepper for this configuration; an automatic step is fixed from `b0`.
    pub fn stepper(&self, b0: &SpectralField) -> Result<Stepper> {
        let dt = match self.dt {
            DtChoice::Fixed { dt } => dt,
            DtChoice::Auto { cfl, dt_max } => Stepper::auto_dt(b0, &self.physics, cfl, dt_max),
        };
        Stepper::new(self.grid()?, self.physics, self.forcing_spec()?, dt, self.scheme)
    }

    /// Burn-in time: configured, or `20 / (kappa lambda_1)` with `lambda_1 = 1`.
    pub fn burn_in(&self, kappa: f64) -> f64 {
        self.ensemble.burn_in.unwrap_or(20.0 / kappa)
    }
}

/// Typed reader over one TOML section that records every problem.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str, errors: &'a mut Vec<String>) -> Self {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errors.push(format!("[{name}] must be a table"));
                None
            }
        };
        Section {
            name,
            table,
            seen: Vec::new(),
            errors,
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn err(&mut self, key: &str, msg: String) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn float(&mut self, key: &'static str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(key, format!("expected a number, got {other}"));
                None
            }
        }
    }

    fn int(&mut self, key: &'static str) -> Option<i64> {
        match self.raw(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.err(key, format!("expected an integer, got {other}"));
                None
            }
        }
    }

    fn uint(&mut self, key: &'static str) -> Option<usize> {
        let v = self.int(key)?;
        if v < 0 {
            self.err(key, format!("must be nonnegative, got {v}"));
            return None;
        }
        Some(v as usize)
    }

    fn boolean(&mut self, key: &'static str) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.err(key, format!("expected true or false, got {other}"));
                None
            }
        }
    }

    fn string(&mut self, key: &'static str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.err(key, format!("expected a string, got {other}"));
                None
            }
        }
    }

    fn floats(&mut self, key: &'static str) -> Option<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(a) => {
                let mut out = Vec::new();
                for v in a {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.err(key, format!("expected numbers, got {other}"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                self.err(key, format!("expected an array, got {other}"));
                None
            }
        }
    }

    fn finish(self) {
        if let Some(t) = self.table {
            let mut unknown: Vec<&String> =
                t.keys().filter(|k| !self.seen.contains(&k.as_str())).collect();
            unknown.sort();
            for k in unknown {
                self.errors
                    .push(format!("{}.{k}: unknown key", self.name));
            }
        }
    }
}

const SECTIONS: [&str; 9] = [
    "grid",
    "physics",
    "time",
    "initial",
    "forcing",
    "ensemble",
    "sweep",
    "output",
    "diagnostics",
];

fn parse_branch(s: &str) -> Option<Branch> {
    Some(match s {
        "cos" => Branch::Cos,
        "sin" => Branch::Sin,
        "p" => Branch::P,
        "q" => Branch::Q,
        "r" => Branch::R,
        "s" => Branch::S,
        _ => return None,
    })
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
    let mut errors = Vec::new();
    for k in root.keys() {
        if !SECTIONS.contains(&k.as_str()) {
            errors.push(format!("[{k}]: unknown section"));
        }
    }

    let mut s = Section::new(&root, "grid", &mut errors);
    let d = s.uint("d");
    let n = s.uint("n");
    if d.is_none() && s.table.and_then(|t| t.get("d")).is_none() {
        s.err("d", "required".into());
    }
    if n.is_none() && s.table.and_then(|t| t.get("n")).is_none() {
        s.err("n", "required".into());
    }
    if let Some(d) = d {
        if d != 2 && d != 3 {
            s.err("d", format!("must be 2 or 3, got {d}"));
        }
    }
    if let Some(n) = n {
        if n < 8 || n % 2 != 0 {
            s.err("n", format!("must be an even integer >= 8, got {n}"));
        }
    }
    s.finish();
    let d = d.filter(|d| *d == 2 || *d == 3).unwrap_or(2);
    let n = n.unwrap_or(32);

    let mut s = Section::new(&root, "physics", &mut errors);
    let kappa = s.float("kappa").unwrap_or(0.0);
    let gamma = s.float("gamma").unwrap_or(d as f64 / 2.0 + 1.0);
    let alpha = s.float("alpha").unwrap_or(1.0);
    let transport = s.boolean("transport").unwrap_or(true);
    if !(gamma > d as f64 / 2.0) {
        s.err("gamma", format!("gamma must exceed d/2 = {}, got {gamma}", d as f64 / 2.0));
    }
    if !(alpha >= 1.0) {
        s.err("alpha", format!("alpha must be >= 1, got {alpha}"));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        s.err("kappa", format!("kappa must be finite and >= 0, got {kappa}"));
    }
    s.finish();
    let physics = PhysicsParams {
        gamma,
        alpha,
        kappa,
        transport,
    };

    let mut s = Section::new(&root, "time", &mut errors);
    let t_end = s.float("T").unwrap_or(1.0);
    if !(t_end > 0.0) {
        s.err("T", format!("must be positive, got {t_end}"));
    }
    let cfl = s.float("cfl").unwrap_or(0.5);
    let dt_max = s.float("dt_max").unwrap_or(1e-2);
    let dt = match s.raw("dt") {
        None => DtChoice::Auto { cfl, dt_max },
        Some(Value::String(v)) if v == "auto" => DtChoice::Auto { cfl, dt_max },
        Some(Value::Float(f)) if *f > 0.0 => DtChoice::Fixed { dt: *f },
        Some(other) => {
            s.err("dt", format!("expected a positive number or \"auto\", got {other}"));
            DtChoice::Auto { cfl, dt_max }
        }
    };
    if !(cfl > 0.0) {
        s.err("cfl", format!("must be positive, got {cfl}"));
    }
    if !(dt_max > 0.0) {
        s.err("dt_max", format!("must be positive, got {dt_max}"));
    }
    let scheme = match s.string("scheme").as_deref() {
        None | Some("exp_euler") => Scheme::ExpEuler,
        Some("etd1") => Scheme::Etd1,
        Some("if_rk4") => Scheme::IfRk4,
        Some(other) => {
            s.err("scheme", format!("unknown scheme {other:?} (exp_euler, etd1, if_rk4)"));
            Scheme::ExpEuler
        }
    };
    s.finish();

    let mut s = Section::new(&root, "initial", &mut errors);
    let kind = s.string("kind").unwrap_or_else(|| "zero".into());
    let amplitude = s.float("amplitude").unwrap_or(1.0);
    let (a, b, c) = (
        s.float("a").unwrap_or(1.0),
        s.float("b").unwrap_or(1.0),
        s.float("c").unwrap_or(1.0),
    );
    let path = s.string("path");
    let base = match kind.as_str() {
        "zero" => InitialBase::Zero,
        "kolmogorov" => InitialBase::Kolmogorov { amplitude },
        "abc" => InitialBase::Abc { a, b, c },
        "snapshot" => match path {
            Some(p) => InitialBase::Snapshot { path: p.into() },
            None => {
                s.err("path", "required for kind = \"snapshot\"".into());
                InitialBase::Zero
            }
        },
        other => {
            s.err("kind", format!("unknown initial condition {other:?} (zero, kolmogorov, abc, snapshot)"));
            InitialBase::Zero
        }
    };
    if matches!(base, InitialBase::Kolmogorov { .. }) && d != 2 {
        s.err("kind", "kolmogorov needs d = 2".into());
    }
    if matches!(base, InitialBase::Abc { .. }) && d != 3 {
        s.err("kind", "abc needs d = 3".into());
    }
    let mut modes = Vec::new();
    match s.raw("modes") {
        None => {}
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let Value::Table(t) = item else {
                    s.err("modes", format!("entry {i} must be a table"));
                    continue;
                };
                let k: Option<Vec<i32>> = t.get("k").and_then(|v| v.as_array()).and_then(|a| {
                    a.iter().map(|x| x.as_integer().map(|v| v as i32)).collect()
                });
                let branch = t.get("branch").and_then(|v| v.as_str()).and_then(parse_branch);
                let pol = t.get("polarization").and_then(|v| v.as_integer()).unwrap_or(1);
                let amp = t
                    .get("amplitude")
                    .and_then(|v| v.as_float().or(v.as_integer().map(|x| x as f64)))
                    .unwrap_or(1.0);
                for key in t.keys() {
                    if !["k", "branch", "polarization", "amplitude"].contains(&key.as_str()) {
                        s.err("modes", format!("entry {i}: unknown key {key}"));
                    }
                }
                match (k, branch) {
                    (Some(k), Some(branch)) if k.len() == d => modes.push(ModeTerm {
                        k,
                        branch,
                        polarization: pol as u8,
                        amplitude: amp,
                    }),
                    _ => s.err(
                        "modes",
                        format!("entry {i} needs k (length {d}) and a branch (cos, sin, p, q, r, s)"),
                    ),
                }
            }
        }
        Some(other) => s.err("modes", format!("expected an array of tables, got {other}")),
    }
    s.finish();
    let initial = InitialCondition { base, modes };

    let seed_from_forcing;
    let forcing = if root.contains_key("forcing") {
        let mut s = Section::new(&root, "forcing", &mut errors);
        seed_from_forcing = s.int("seed").map(|v| v as u64);
        let flavor = match s.string("flavor").as_deref() {
            None => {
                if d == 3 {
                    Flavor::Beltrami
                } else {
                    Flavor::Stokes
                }
            }
            Some("stokes") => Flavor::Stokes,
            Some("beltrami") => Flavor::Beltrami,
            Some(other) => {
                s.err("flavor", format!("unknown flavor {other:?} (stokes, beltrami)"));
                Flavor::Stokes
            }
        };
        if flavor == Flavor::Beltrami && d != 3 {
            s.err("flavor", "beltrami forcing needs d = 3".into());
        }
        let preset_name = s.string("preset").unwrap_or_else(|| "power_law".into());
        let preset = match preset_name.as_str() {
            "power_law" => {
                let c = s.float("c").unwrap_or(1.0);
                let q = s.float("q").unwrap_or(1.0);
                let j = s.uint("J").unwrap_or(1);
                Some(Preset::PowerLaw { c, q, shells: j })
            }
            "single_shell" => {
                let lambda = s.float("lambda").unwrap_or(1.0);
                let amplitude = s.float("amplitude").unwrap_or(1.0);
                Some(Preset::SingleShell { lambda, amplitude })
            }
            "explicit" => match s.floats("amplitudes") {
                Some(amplitudes) => Some(Preset::Explicit { amplitudes }),
                None => {
                    s.err("amplitudes", "required for preset = \"explicit\"".into());
                    None
                }
            },
            other => {
                s.err("preset", format!("unknown preset {other:?} (power_law, single_shell, explicit)"));
                None
            }
        };
        let cut = ((n.max(1) - 1) / 3) as f64;
        let lambda_max = s.float("lambda_max").unwrap_or(cut * cut);
        let tau_sign = s.int("tau_sign").map(|v| v as i8);
        if let Some(t) = tau_sign {
            if t != 1 && t != -1 {
                s.err("tau_sign", format!("must be 1 or -1, got {t}"));
            }
        }
        s.finish();
        preset.map(|preset| ForcingConfig {
            flavor,
            preset,
            lambda_max,
            tau_sign,
        })
    } else {
        seed_from_forcing = None;
        None
    };

    let mut s = Section::new(&root, "ensemble", &mut errors);
    let ensemble = EnsembleSection {
        trajectories: s.uint("trajectories").unwrap_or(32),
        burn_in: s.float("burn_in"),
        sample_stride: s.uint("sample_stride").unwrap_or(10),
        samples: s.uint("samples").unwrap_or(100),
        window: s.float("window").unwrap_or(1.0),
        workers: s.uint("workers").unwrap_or(0),
    };
    if ensemble.trajectories < 1 {
        s.err("trajectories", "must be >= 1".into());
    }
    if ensemble.sample_stride < 1 {
        s.err("sample_stride", "must be >= 1".into());
    }
    if ensemble.burn_in.is_some_and(|b| !(b >= 0.0)) {
        s.err("burn_in", "must be >= 0".into());
    }
    if !(ensemble.window > 0.0) {
        s.err("window", "must be positive".into());
    }
    s.finish();

    let mut s = Section::new(&root, "sweep", &mut errors);
    let sweep = SweepSection {
        kappas: s.floats("kappas").unwrap_or_default(),
        warm_start: s.boolean("warm_start").unwrap_or(true),
        sample_factor: s.float("sample_factor").unwrap_or(1.0),
    };
    if sweep.kappas.windows(2).any(|w| !(w[1] < w[0])) || sweep.kappas.iter().any(|k| !(*k > 0.0)) {
        s.err("kappas", format!("must be positive and strictly decreasing, got {:?}", sweep.kappas));
    }
    s.finish();

    let mut s = Section::new(&root, "output", &mut errors);
    let output = OutputSection {
        stride: s.uint("stride").unwrap_or(1),
        dir: s.string("dir").map(PathBuf::from),
    };
    if output.stride < 1 {
        s.err("stride", "must be >= 1".into());
    }
    s.finish();

    let mut s = Section::new(&root, "diagnostics", &mut errors);
    let defaults = StationaryOptions::default();
    let observe = ObserveOptions {
        mhs_order: s.float("mhs_order").unwrap_or(-1.0),
        casimir_powers: s
            .floats("casimir_powers")
            .map(|v| v.iter().map(|&p| p as u32).collect())
            .unwrap_or_else(|| vec![2, 4]),
    };
    let stationary = StationaryOptions {
        flux_rel: s.float("flux_allowance").unwrap_or(defaults.flux_rel),
        msp_rel: s.float("msp_allowance").unwrap_or(defaults.msp_rel),
        helicity_rel: s.float("helicity_allowance").unwrap_or(defaults.helicity_rel),
        min_batches: s.uint("min_batches").unwrap_or(defaults.min_batches),
    };
    let rho = s.float("rho");
    s.finish();

    let seed = seed_from_forcing.unwrap_or(0);
    let config = SimConfig {
        d,
        n,
        physics,
        t_end,
        dt,
        scheme,
        seed,
        initial,
        forcing,
        ensemble,
        sweep,
        output,
        diagnostics: DiagnosticsSection {
            observe,
            stationary,
            rho,
        },
    };
    if errors.is_empty() {
        if let Err(e) = config.forcing_spec() {
            errors.push(format!("forcing: {e}"));
        }
    }
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(Error::Config(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("[grid]\nd = 2\nn = 16\n").unwrap();
        assert_eq!(c.physics.gamma, 2.0);
        assert_eq!(c.physics.alpha, 1.0);
        assert!(c.forcing.is_none());
        assert_eq!(c.dt, DtChoice::Auto { cfl: 0.5, dt_max: 1e-2 });
        let c3 = parse_config("[grid]\nd = 3\nn = 8\n").unwrap();
        assert_eq!(c3.physics.gamma, 2.5);
    }

    #[test]
    fn gamma_below_threshold() {
        let e = parse_config("[grid]\nd = 2\nn = 16\n[physics]\ngamma = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("gamma must exceed d/2"));
    }

    #[test]
    fn duplicate_key_named() {
        let e = parse_config("[grid]\nd = 2\nd = 3\nn = 16\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("duplicate") && msg.contains('d'), "{msg}");
    }

    #[test]
    fn all_errors_collected() {
        let e = parse_config(
            "[grid]\nd = 4\nn = 7\nbogus = 1\n[physics]\nalpha = 0.5\n[extra]\nx = 1\n",
        )
        .unwrap_err();
        let Error::Config(list) = e else { panic!() };
        assert!(list.len() >= 5, "{list:?}");
        assert!(list.iter().any(|m| m.contains("grid.bogus: unknown key")));
        assert!(list.iter().any(|m| m.contains("[extra]")));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = parse_config("[grid]\nd = 2\nn = 16\n[physics]\nkappa = 0.5\ngamma = 2.0\n").unwrap();
        let b = parse_config("[physics]\ngamma = 2.0\nkappa = 0.5\n[grid]\nn = 16\nd = 2\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config("[grid]\nd = 2\nn = 16\n[physics]\nkappa = 0.25\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn forcing_and_initial_sections() {
        let c = parse_config(
            r#"
[grid]
d = 2
n = 16
[physics]
kappa = 0.5
[initial]
kind = "kolmogorov"
amplitude = 2.0
modes = [{ k = [1, 1], branch = "cos", amplitude = 0.1 }]
[forcing]
preset = "power_law"
c = 1.0
q = 1.0
J = 2
seed = 17
"#,
        )
        .unwrap();
        assert_eq!(c.seed, 17);
        let f = c.forcing_spec().unwrap().unwrap();
        assert_eq!(f.c_s(0.0), 5.0);
        let b = c.initial_field().unwrap();
        assert!(b.norm_sq() > 0.0);
        let bad = parse_config("[grid]\nd = 2\nn = 16\n[forcing]\npreset = \"explicit\"\namplitudes = [1.0]\n");
        assert!(bad.is_err());
    }
}
