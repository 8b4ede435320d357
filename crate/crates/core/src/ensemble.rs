//! Monte Carlo ensembles: burn-in, sampling, Cesaro averages and the
//! vanishing-resistivity sweep.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::diagnostics::{
    exp_moment, law_histogram, observe, running_average, stationary_relations, BalanceReport,
    DiagnosticsRecord, ExpMomentReport, LawReport, ObserveOptions, StationaryOptions,
};
use crate::dynamics::{mhs_residual, PhysicsParams};
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::integrator::{step_count, SimState, Stepper};
use crate::spectral::SpectralField;
use crate::stats::{batch_means, iat, linear_fit, mean, mean_se, Estimate, LinearFit};

/// Fraction of trajectories that must finish without blow-up.
pub const MIN_SURVIVAL: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub stepper: Stepper,
    /// One shared initial field, or one per trajectory.
    pub initial: Vec<SpectralField>,
    pub seed: u64,
    pub trajectories: usize,
    pub burn_in: f64,
    /// Steps between samples.
    pub sample_stride: usize,
    /// Samples per trajectory.
    pub samples: usize,
    /// Length of the windows for the time-averaged field, if wanted.
    pub window: Option<f64>,
    pub observe: ObserveOptions,
    /// Rayon workers (0: global pool).
    pub workers: usize,
}

impl EnsembleSpec {
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        let b0 = cfg.initial_field()?;
        let stepper = cfg.stepper(&b0)?;
        Ok(EnsembleSpec {
            stepper,
            initial: vec![b0],
            seed: cfg.seed,
            trajectories: cfg.ensemble.trajectories,
            burn_in: cfg.burn_in(cfg.physics.kappa),
            sample_stride: cfg.ensemble.sample_stride,
            samples: cfg.ensemble.samples,
            window: Some(cfg.ensemble.window),
            observe: cfg.diagnostics.observe.clone(),
            workers: cfg.ensemble.workers,
        })
    }

    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.trajectories == 0 {
            bad.push("trajectories must be >= 1".to_string());
        }
        if !(self.burn_in >= 0.0) {
            bad.push(format!("burn_in must be >= 0, got {}", self.burn_in));
        }
        if self.sample_stride == 0 {
            bad.push("sample_stride must be >= 1".into());
        }
        if self.samples == 0 {
            bad.push("samples must be >= 1".into());
        }
        if self.initial.is_empty()
            || (self.initial.len() != 1 && self.initial.len() != self.trajectories)
        {
            bad.push(format!(
                "need 1 or {} initial fields, got {}",
                self.trajectories,
                self.initial.len()
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Params(bad.join("; ")))
        }
    }

    /// Steps per trajectory: burn-in plus sampling.
    pub fn steps_per_trajectory(&self) -> u64 {
        let burn = if self.burn_in > 0.0 {
            step_count(self.burn_in, self.stepper.dt)
        } else {
            0
        };
        burn + (self.samples * self.sample_stride) as u64
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryOutput {
    pub trajectory: u64,
    /// Post-burn-in samples.
    pub samples: Vec<DiagnosticsRecord>,
    pub final_state: SpectralField,
    /// MHS residual of the field averaged over each complete window.
    pub window_residuals: Vec<f64>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trajectory: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// Survivors, sorted by trajectory id.
    pub outputs: Vec<TrajectoryOutput>,
    pub failures: Vec<Failure>,
    pub requested: usize,
    /// Steps between consecutive samples.
    pub sample_stride: usize,
}

impl EnsembleResult {
    pub fn survival(&self) -> f64 {
        self.outputs.len() as f64 / self.requested as f64
    }

    pub fn samples(&self) -> Vec<Vec<DiagnosticsRecord>> {
        self.outputs.iter().map(|o| o.samples.clone()).collect()
    }

    pub fn series(&self, f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<Vec<f64>> {
        self.outputs
            .iter()
            .map(|o| o.samples.iter().map(&f).collect())
            .collect()
    }

    pub fn total_steps(&self) -> u64 {
        self.outputs.iter().map(|o| o.steps).sum()
    }
}

fn run_trajectory(spec: &EnsembleSpec, trajectory: u64) -> Result<TrajectoryOutput> {
    let stepper = &spec.stepper;
    let b0 = if spec.initial.len() == 1 {
        &spec.initial[0]
    } else {
        &spec.initial[trajectory as usize]
    };
    let mut state = SimState::new(stepper, b0.clone(), spec.seed, trajectory)?;
    let burn = if spec.burn_in > 0.0 {
        step_count(spec.burn_in, stepper.dt)
    } else {
        0
    };
    for _ in 0..burn {
        stepper.step(&mut state)?;
    }
    let window_steps = spec
        .window
        .map(|w| step_count(w, stepper.dt).max(1) as usize);
    let mut acc = SpectralField::zeros(stepper.grid);
    let mut in_window = 0usize;
    let mut window_residuals = Vec::new();
    let mut samples = Vec::with_capacity(spec.samples);
    for s in 1..=spec.samples * spec.sample_stride {
        stepper.step(&mut state)?;
        if let Some(ws) = window_steps {
            acc.axpy_in_place(1.0, &state.b);
            in_window += 1;
            if in_window == ws {
                let avg = acc.scale(1.0 / ws as f64);
                window_residuals.push(mhs_residual(&avg, spec.observe.mhs_order));
                acc = SpectralField::zeros(stepper.grid);
                in_window = 0;
            }
        }
        if s % spec.sample_stride == 0 {
            let mut r = observe(&state.b, state.t, &stepper.params, &spec.observe);
            r.extra.step = state.step;
            r.extra.martingale = state.martingale;
            samples.push(r);
        }
    }
    Ok(TrajectoryOutput {
        trajectory,
        samples,
        final_state: state.b,
        window_residuals,
        steps: state.step,
    })
}

/// Run `spec.trajectories` independent trajectories (seed-disjoint streams
/// `(seed, j, mode)`), in parallel, and gather them in trajectory order.
/// Blown-up trajectories are excluded; fewer than [`MIN_SURVIVAL`] survivors
/// is an error.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult> {
    spec.validate()?;
    let run = || -> Vec<(u64, Result<TrajectoryOutput>)> {
        (0..spec.trajectories as u64)
            .into_par_iter()
            .map(|j| (j, run_trajectory(spec, j)))
            .collect()
    };
    let results = if spec.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Ensemble(format!("thread pool: {e}")))?
            .install(run)
    } else {
        run()
    };
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for (j, r) in results {
        match r {
            Ok(o) => outputs.push(o),
            Err(e @ Error::BlowUp { .. }) => failures.push(Failure {
                trajectory: j,
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let result = EnsembleResult {
        outputs,
        failures,
        requested: spec.trajectories,
        sample_stride: spec.sample_stride,
    };
    if result.survival() < MIN_SURVIVAL {
        return Err(Error::Ensemble(format!(
            "{} of {} trajectories blew up (first: {})",
            result.failures.len(),
            result.requested,
            result.failures[0].error
        )));
    }
    Ok(result)
}

/// Estimate over per-trajectory series: batch means when the series are long
/// enough, otherwise the plain pooled mean.
pub fn estimate(series: &[Vec<f64>], min_batches: usize) -> Result<Estimate> {
    batch_means(series, min_batches).or_else(|_| {
        let flat: Vec<f64> = series.iter().flatten().copied().collect();
        mean_se(&flat)
    })
}

/// Longest decorrelation stride, in steps.
pub const MAX_DECORRELATION_STEPS: usize = 100;

/// Thin each series by its own integrated autocorrelation time (at most
/// [`MAX_DECORRELATION_STEPS`] steps apart) and pool. `sample_stride` is the
/// number of steps between consecutive entries.
pub fn decorrelated(series: &[Vec<f64>], sample_stride: usize) -> Vec<f64> {
    let cap = (MAX_DECORRELATION_STEPS / sample_stride.max(1)).max(1);
    let mut out = Vec::new();
    for s in series {
        let stride = (iat(s).ceil().max(1.0) as usize).min(cap);
        out.extend(s.iter().step_by(stride));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub trajectories: usize,
    pub survival: f64,
    pub failures: Vec<Failure>,
    pub total_steps: u64,
    /// `E ||B||^2`
    pub norm_sq: Estimate,
    /// `E ||u||^2_{H^gamma}`
    pub u_sq: Estimate,
    /// `E (kappa ||B||^2_{H^alpha} + ||u||^2_{H^gamma})`
    pub dissipation: Estimate,
    pub mhs_res: Estimate,
    /// Mean MHS residual of the window-averaged field.
    pub window_mhs_res: Option<Estimate>,
    pub stationary: Option<BalanceReport>,
    pub exp_moment: Option<ExpMomentReport>,
    pub law: Option<LawReport>,
}

/// Pooled statistics of an ensemble: stationary relations, exponential
/// moment (at `rho`, default `1 / (2 max b_j^2)`) and the law of `E`.
pub fn summarize(
    result: &EnsembleResult,
    spec: Option<&ForcingSpec>,
    params: &PhysicsParams,
    opts: &StationaryOptions,
    rho: Option<f64>,
) -> Result<EnsembleSummary> {
    let mb = opts.min_batches;
    let norm_sq = result.series(|r| r.extra.norm_sq);
    let windows: Vec<f64> = result
        .outputs
        .iter()
        .flat_map(|o| o.window_residuals.iter().copied())
        .collect();
    let window_mhs_res = if windows.len() >= 2 {
        Some(mean_se(&windows)?)
    } else {
        None
    };
    let (stationary, exp) = match spec {
        Some(s) if params.kappa > 0.0 => {
            let rho = rho.unwrap_or(1.0 / (2.0 * s.max_b_sq()));
            (
                stationary_relations(&result.samples(), s, params, opts).ok(),
                exp_moment(&norm_sq, rho, s).ok(),
            )
        }
        _ => (None, None),
    };
    let energies = decorrelated(&result.series(|r| r.energy), result.sample_stride);
    Ok(EnsembleSummary {
        trajectories: result.requested,
        survival: result.survival(),
        failures: result.failures.clone(),
        total_steps: result.total_steps(),
        norm_sq: estimate(&norm_sq, mb)?,
        u_sq: estimate(&result.series(|r| r.u_norm), mb)?,
        dissipation: estimate(&result.series(|r| r.extra.dissipation), mb)?,
        mhs_res: estimate(&result.series(|r| r.mhs_res), mb)?,
        window_mhs_res,
        stationary,
        exp_moment: exp,
        law: law_histogram(&energies, None).ok(),
    })
}

/// Running time averages of one trajectory's observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroSeries {
    pub label: String,
    pub running: Vec<f64>,
    /// `|mean over the last half - mean over the whole run|`.
    pub half_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroReport {
    pub t: Vec<f64>,
    pub series: Vec<CesaroSeries>,
}

impl CesaroReport {
    pub fn get(&self, label: &str) -> Option<&CesaroSeries> {
        self.series.iter().find(|s| s.label == label)
    }
}

/// `f(t) = (1/(t - t_0)) int_{t_0}^t f` for each scalar observable of a
/// single trajectory's records.
pub fn cesaro_statistics(records: &[DiagnosticsRecord]) -> Result<CesaroReport> {
    if records.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "Cesaro averages need at least 10 records, got {}",
            records.len()
        )));
    }
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let mut columns: Vec<(String, Vec<f64>)> = vec![
        ("E".into(), records.iter().map(|r| r.energy).collect()),
        ("gradE".into(), records.iter().map(|r| r.grad_energy).collect()),
        ("uHg".into(), records.iter().map(|r| r.u_norm).collect()),
        ("mhs_res".into(), records.iter().map(|r| r.mhs_res).collect()),
    ];
    if records[0].helicity.is_some() {
        columns.push(("H".into(), records.iter().map(|r| r.helicity.unwrap_or(0.0)).collect()));
        columns.push(("curlBB".into(), records.iter().map(|r| r.curl_inner.unwrap_or(0.0)).collect()));
    }
    if records[0].msp.is_some() {
        columns.push(("M".into(), records.iter().map(|r| r.msp.unwrap_or(0.0)).collect()));
    }
    if let Some(cas) = &records[0].casimirs {
        for (i, c) in cas.iter().enumerate() {
            let v = records
                .iter()
                .map(|r| r.casimirs.as_ref().map_or(0.0, |c| c[i].value))
                .collect();
            columns.push((c.label.clone(), v));
        }
    }
    let half = records.len() / 2;
    let series = columns
        .into_iter()
        .map(|(label, f)| {
            let running = running_average(&t, &f)?;
            let half_gap = (mean(&f[half..]) - mean(&f)).abs();
            Ok(CesaroSeries {
                label,
                running,
                half_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CesaroReport { t, series })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kappa: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub sample_time: f64,
    pub warm_start: bool,
    pub summary: EnsembleSummary,
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Fit of `log E||u||^2_{H^gamma}` against `log kappa`.
    pub slope: LinearFit,
    /// Window-averaged MHS residual nonincreasing along the sweep, allowing
    /// each step to rise by at most its combined standard error.
    pub residual_monotone: bool,
    pub total_steps: u64,
    pub caveat: String,
}

/// Sampling plan for one kappa: mixing time `T_kappa = 20 / (kappa lambda_1)`
/// sets the burn-in (halved on warm start) and `sample_factor * T_kappa` of
/// sampling.
fn sweep_spec(cfg: &SimConfig, kappa: f64, initial: Vec<SpectralField>, warm: bool) -> Result<EnsembleSpec> {
    let mut c = cfg.clone();
    c.physics.kappa = kappa;
    let mut spec = EnsembleSpec::from_config(&c)?;
    if warm {
        spec.stepper = c.stepper(&initial[0])?;
        spec.initial = initial;
    }
    let t_mix = 20.0 / kappa;
    let burn = cfg.ensemble.burn_in.unwrap_or(t_mix);
    spec.burn_in = if warm { burn / 2.0 } else { burn };
    let sample_steps = step_count(cfg.sweep.sample_factor * t_mix, spec.stepper.dt) as usize;
    spec.samples = (sample_steps / spec.sample_stride).max(1);
    Ok(spec)
}

/// Ensembles along a strictly decreasing kappa list, optionally warm-started
/// from the previous kappa's final states. Writes trajectory 0's final
/// field per kappa under `out_dir` when given.
pub fn kappa_sweep(
    cfg: &SimConfig,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&SweepPoint),
) -> Result<SweepResult> {
    let kappas = &cfg.sweep.kappas;
    if kappas.len() < 3 {
        return Err(Error::Params(format!(
            "a sweep needs at least 3 kappa values, got {}",
            kappas.len()
        )));
    }
    if kappas.windows(2).any(|w| !(w[1] < w[0])) || kappas.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Params(format!(
            "kappa list must be positive and strictly decreasing, got {kappas:?}"
        )));
    }
    let forcing = cfg.forcing_spec()?;
    let mut points: Vec<SweepPoint> = Vec::new();
    let mut previous: Option<Vec<SpectralField>> = None;
    for &kappa in kappas {
        let warm = cfg.sweep.warm_start && previous.is_some();
        let initial = match previous.take() {
            Some(fin) if warm => (0..cfg.ensemble.trajectories)
                .map(|j| fin[j % fin.len()].clone())
                .collect(),
            _ => vec![cfg.initial_field()?],
        };
        let spec = sweep_spec(cfg, kappa, initial, warm)?;
        let result = run_ensemble(&spec)?;
        let params = spec.stepper.params;
        let summary = summarize(
            &result,
            forcing.as_deref(),
            &params,
            &cfg.diagnostics.stationary,
            cfg.diagnostics.rho,
        )?;
        let snapshot = match out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let p = dir.join(format!("sweep_kappa_{kappa}.bin"));
                crate::io::write_snapshot(&p, &result.outputs[0].final_state)?;
                Some(p)
            }
            None => None,
        };
        let point = SweepPoint {
            kappa,
            dt: spec.stepper.dt,
            burn_in: spec.burn_in,
            sample_time: (spec.samples * spec.sample_stride) as f64 * spec.stepper.dt,
            warm_start: warm,
            summary,
            snapshot,
        };
        progress(&point);
        points.push(point);
        previous = Some(result.outputs.into_iter().map(|o| o.final_state).collect());
    }
    let x: Vec<f64> = points.iter().map(|p| p.kappa.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.summary.u_sq.mean.ln()).collect();
    let sig: Vec<f64> = points
        .iter()
        .map(|p| p.summary.u_sq.se / p.summary.u_sq.mean)
        .collect();
    let slope = linear_fit(&x, &y, Some(&sig))?;
    let residual_monotone = points.windows(2).all(|w| {
        match (&w[0].summary.window_mhs_res, &w[1].summary.window_mhs_res) {
            (Some(a), Some(b)) => b.mean <= a.mean + (a.se * a.se + b.se * b.se).sqrt(),
            _ => false,
        }
    });
    let total_steps = points.iter().map(|p| p.summary.total_steps).sum();
    Ok(SweepResult {
        points,
        slope,
        residual_monotone,
        total_steps,
        caveat: "a single decreasing kappa path is sampled; distinct subsequential limits cannot be told apart".into(),
    })
}

impl SweepResult {
    /// CSV sweep table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kappa,u_sq,u_sq_se,norm_sq,norm_sq_se,mhs_res,mhs_res_se,slope\n");
        for p in &self.points {
            let w = p.summary.window_mhs_res.unwrap_or(Estimate {
                mean: f64::NAN,
                se: f64::NAN,
                effective: 0.0,
            });
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                p.kappa,
                p.summary.u_sq.mean,
                p.summary.u_sq.se,
                p.summary.norm_sq.mean,
                p.summary.norm_sq.se,
                w.mean,
                w.se,
                self.slope.slope
            ));
        }
        s
    }
}
