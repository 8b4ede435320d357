//! `magrelax` command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magrelax::config::{parse_config, SimConfig};
use magrelax::diagnostics::{observe, trajectory_balance, DiagnosticsRecord};
use magrelax::dynamics::PhysicsParams;
use magrelax::eigenbasis::{enumerate_basis, Flavor};
use magrelax::ensemble::{kappa_sweep, run_ensemble, summarize, EnsembleSpec, SweepResult};
use magrelax::integrator::{run_with, SimState, Stepper};
use magrelax::io::{
    read_checkpoint, read_snapshot, to_json_string, write_checkpoint, write_snapshot,
    CheckpointMeta, NdjsonWriter,
};
use magrelax::spectral::GridSpec;
use magrelax::Error;
use serde_json::json;

const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "magrelax", version, about = "Forced resistive magnetic relaxation on the torus")]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the forcing seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// No progress or tables.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One trajectory with NDJSON diagnostics, final snapshot and checkpoint.
    Simulate {
        #[arg(long)]
        check: bool,
    },
    /// Monte Carlo ensemble with stationary statistics.
    Ensemble {
        #[arg(long)]
        check: bool,
    },
    /// Ensembles along the configured kappa list.
    Sweep {
        #[arg(long)]
        check: bool,
    },
    /// CSV table of the eigenbasis up to an eigenvalue cutoff.
    Basis {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 2.0)]
        lambda_max: f64,
        /// stokes or beltrami
        #[arg(long)]
        flavor: Option<String>,
        /// Also write each mode as a snapshot into the output directory.
        #[arg(long)]
        snapshots: bool,
    },
    /// Recompute observables from snapshot files.
    Diagnose { snapshots: Vec<PathBuf> },
    /// Continue a checkpoint up to the configured T.
    CheckpointResume {
        #[arg(long)]
        from: PathBuf,
    },
}

enum Failure {
    Lib(Error),
    Check(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{}", e.render());
            report(&json!({"error": "usage", "message": e.kind().to_string()}));
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            report(&json!({"error": "usage", "message": msg}));
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Check(msg)) => {
            report(&json!({"error": "check_failed", "message": msg}));
            ExitCode::from(EXIT_CHECK)
        }
        Err(Failure::Lib(Error::Io(e))) if e.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(Failure::Lib(e)) => {
            let details = match &e {
                Error::Config(list) => list.clone(),
                _ => vec![],
            };
            report(&json!({"error": e.kind(), "message": e.to_string(), "details": details}));
            ExitCode::from(match e {
                Error::BlowUp { .. } | Error::Ensemble(_) => EXIT_BLOWUP,
                Error::Io(_) => 1,
                _ => EXIT_CONFIG,
            })
        }
    }
}

fn report(v: &serde_json::Value) {
    eprintln!("{v}");
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Simulate { check } => simulate(cli, *check),
        Command::Ensemble { check } => ensemble(cli, *check),
        Command::Sweep { check } => sweep(cli, *check),
        Command::Basis {
            d,
            lambda_max,
            flavor,
            snapshots,
        } => basis(cli, *d, *lambda_max, flavor.as_deref(), *snapshots),
        Command::Diagnose { snapshots } => diagnose(cli, snapshots),
        Command::CheckpointResume { from } => resume(cli, from),
    }
}

fn load_config(cli: &Cli) -> Result<SimConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config is required for this subcommand".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::Lib(Error::Config(vec![format!("cannot read {}: {e}", path.display())]))
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&SimConfig>) -> Result<PathBuf, Failure> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_doc(path: &Path, value: &impl serde::Serialize) -> Outcome {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(to_json_string(value)?.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn ndjson(path: &Path) -> Result<NdjsonWriter<BufWriter<File>>, Failure> {
    Ok(NdjsonWriter::new(BufWriter::new(File::create(path)?)))
}

/// Advance `state` to `t_end`, streaming a record every `stride` steps.
fn drive(
    cfg: &SimConfig,
    stepper: &Stepper,
    state: &mut SimState,
    t_end: f64,
    out: &mut NdjsonWriter<BufWriter<File>>,
    records: &mut Vec<DiagnosticsRecord>,
) -> Outcome {
    let opts = &cfg.diagnostics.observe;
    let remaining = t_end - state.t;
    if remaining > 1e-12 * t_end.max(1.0) {
        run_with(stepper, state, remaining, cfg.output.stride, |s| {
            let mut r = observe(&s.b, s.t, &stepper.params, opts);
            r.extra.step = s.step;
            r.extra.martingale = s.martingale;
            out.write(&r)?;
            records.push(r);
            Ok(())
        })?;
    }
    out.flush()?;
    Ok(())
}

fn simulate(cli: &Cli, check: bool) -> Outcome {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let b0 = cfg.initial_field()?;
    let stepper = cfg.stepper(&b0)?;
    let mut state = SimState::new(&stepper, b0, cfg.seed, 0)?;
    let mut out = ndjson(&dir.join("diagnostics.ndjson"))?;
    let first = observe(&state.b, 0.0, &stepper.params, &cfg.diagnostics.observe);
    out.write(&first)?;
    let mut records = vec![first];
    drive(&cfg, &stepper, &mut state, cfg.t_end, &mut out, &mut records)?;
    finish_trajectory(cli, &cfg, &dir, &stepper, &state, &records, check)
}

fn finish_trajectory(
    cli: &Cli,
    cfg: &SimConfig,
    dir: &Path,
    stepper: &Stepper,
    state: &SimState,
    records: &[DiagnosticsRecord],
    check: bool,
) -> Outcome {
    write_snapshot(dir.join("final.bin"), &state.b)?;
    write_checkpoint(
        dir.join("checkpoint"),
        &state.b,
        &CheckpointMeta {
            t: state.t,
            t0: state.t0,
            step: state.step,
            dt: stepper.dt,
            seed: state.seed,
            trajectory: state.trajectory,
            threshold: state.threshold,
            config_hash: cfg.dynamics_hash(),
            martingale: state.martingale,
        },
    )?;
    let forcing = cfg.forcing_spec()?;
    let e0 = records.first().map_or(0.0, |r| r.extra.norm_sq);
    let balance = if records.len() >= 2 {
        Some(trajectory_balance(
            &[records.to_vec()],
            forcing.as_deref(),
            &stepper.params,
            1e-6 * e0.max(1e-300),
        )?)
    } else {
        None
    };
    // A single forced trajectory has no ensemble error bar, so its table is
    // only written to disk.
    let deterministic = forcing.is_none() || stepper.params.kappa == 0.0;
    if let Some(b) = &balance {
        write_doc(&dir.join("balance.json"), b)?;
        if !cli.quiet && deterministic {
            println!("{b}");
        }
    }
    if check {
        if !state.b.is_valid(1e-8) {
            return Err(Failure::Check("final field is not a valid divergence-free real field".into()));
        }
        if deterministic {
            if let Some(b) = &balance {
                if !b.all_pass() {
                    return Err(Failure::Check(format!("balance failed:\n{b}")));
                }
            }
        }
    }
    Ok(())
}

fn resume(cli: &Cli, from: &Path) -> Outcome {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let (b, meta) = read_checkpoint(from)?;
    if meta.config_hash != cfg.dynamics_hash() {
        return Err(Failure::Lib(Error::Config(vec![format!(
            "checkpoint was written under a different configuration (hash {})",
            meta.config_hash
        )])));
    }
    let stepper = Stepper::new(
        cfg.grid()?,
        cfg.physics,
        cfg.forcing_spec()?,
        meta.dt,
        cfg.scheme,
    )?;
    let mut state = SimState::resume(
        &stepper,
        b,
        meta.step,
        meta.t0,
        meta.seed,
        meta.trajectory,
        meta.threshold,
    )?;
    state.martingale = meta.martingale;
    let mut out = ndjson(&dir.join("diagnostics.ndjson"))?;
    let first = observe(&state.b, state.t, &stepper.params, &cfg.diagnostics.observe);
    out.write(&first)?;
    let mut records = vec![first];
    drive(&cfg, &stepper, &mut state, cfg.t_end, &mut out, &mut records)?;
    finish_trajectory(cli, &cfg, &dir, &stepper, &state, &records, false)
}

fn ensemble(cli: &Cli, check: bool) -> Outcome {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let spec = EnsembleSpec::from_config(&cfg)?;
    if !cli.quiet {
        eprintln!(
            "ensemble: {} trajectories x {} steps (dt = {:e})",
            spec.trajectories,
            spec.steps_per_trajectory(),
            spec.stepper.dt
        );
    }
    let result = run_ensemble(&spec)?;
    for o in &result.outputs {
        let mut w = ndjson(&dir.join(format!("samples_{:04}.ndjson", o.trajectory)))?;
        for r in &o.samples {
            w.write(r)?;
        }
        w.flush()?;
    }
    let forcing = cfg.forcing_spec()?;
    let summary = summarize(
        &result,
        forcing.as_deref(),
        &spec.stepper.params,
        &cfg.diagnostics.stationary,
        cfg.diagnostics.rho,
    )?;
    write_doc(&dir.join("summary.json"), &summary)?;
    if !cli.quiet {
        println!(
            "survival {:.3}  E||B||^2 = {:.6e} +- {:.2e}  E||u||^2 = {:.6e} +- {:.2e}",
            summary.survival,
            summary.norm_sq.mean,
            summary.norm_sq.se,
            summary.u_sq.mean,
            summary.u_sq.se
        );
        if let Some(s) = &summary.stationary {
            println!("{s}");
        }
    }
    if check {
        let mut problems = Vec::new();
        match &summary.stationary {
            Some(s) if s.all_pass() => {}
            Some(s) => problems.push(format!("stationary relations failed:\n{s}")),
            None => problems.push("no stationary report (forcing and kappa > 0 required)".into()),
        }
        if summary.exp_moment.is_some_and(|e| e.exceeds) {
            problems.push("exponential moment exceeds its bound".into());
        }
        if !problems.is_empty() {
            return Err(Failure::Check(problems.join("\n")));
        }
    }
    Ok(())
}

/// The E||B||^2 estimates of all sweep points agree pairwise within their
/// combined error bars (3 sigma).
fn norm_consistent(r: &SweepResult) -> bool {
    let p = &r.points;
    (0..p.len()).all(|i| {
        (i + 1..p.len()).all(|j| {
            let (a, b) = (p[i].summary.norm_sq, p[j].summary.norm_sq);
            (a.mean - b.mean).abs() <= 3.0 * (a.se * a.se + b.se * b.se).sqrt()
        })
    })
}

fn sweep(cli: &Cli, check: bool) -> Outcome {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let quiet = cli.quiet;
    let result = kappa_sweep(&cfg, Some(&dir), |p| {
        if !quiet {
            eprintln!(
                "kappa = {}: E||u||^2 = {:.4e} +- {:.1e}, E||B||^2 = {:.4e} +- {:.1e}",
                p.kappa,
                p.summary.u_sq.mean,
                p.summary.u_sq.se,
                p.summary.norm_sq.mean,
                p.summary.norm_sq.se
            );
        }
    })?;
    write_doc(&dir.join("sweep.json"), &result)?;
    std::fs::write(dir.join("sweep.csv"), result.to_csv())?;
    if !quiet {
        println!(
            "slope {:.4} +- {:.4}; residual monotone: {}; total steps {}",
            result.slope.slope, result.slope.slope_se, result.residual_monotone, result.total_steps
        );
        println!("note: {}", result.caveat);
    }
    if check {
        let mut problems = Vec::new();
        if !(0.85..=1.15).contains(&result.slope.slope) {
            problems.push(format!("slope {} outside [0.85, 1.15]", result.slope.slope));
        }
        if !result.residual_monotone {
            problems.push("time-averaged MHS residual is not nonincreasing".into());
        }
        if cfg.d == 2 && !norm_consistent(&result) {
            problems.push("E||B||^2 varies with kappa beyond its error bars".into());
        }
        if !problems.is_empty() {
            return Err(Failure::Check(problems.join("; ")));
        }
    }
    Ok(())
}

fn basis(cli: &Cli, d: Option<usize>, lambda_max: f64, flavor: Option<&str>, snapshots: bool) -> Outcome {
    let cfg = match &cli.config {
        Some(_) => Some(load_config(cli)?),
        None => None,
    };
    let d = d
        .or(cfg.as_ref().map(|c| c.d))
        .ok_or_else(|| Failure::Usage("basis needs --d or --config".into()))?;
    let flavor = match flavor {
        Some("stokes") => Flavor::Stokes,
        Some("beltrami") => Flavor::Beltrami,
        Some(other) => return Err(Failure::Usage(format!("unknown flavor {other:?}"))),
        None if d == 3 => Flavor::Beltrami,
        None => Flavor::Stokes,
    };
    let e = enumerate_basis(d, lambda_max, flavor)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "j,k,lambda,tau,branch,polarization")?;
    for m in &e.modes {
        let k: Vec<String> = m.k.components().iter().map(|c| c.to_string()).collect();
        let tau = m.tau.map(|t| format!("{t:.17e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{:.17e},{},{},{}",
            m.index,
            k.join(" "),
            m.lambda,
            tau,
            m.branch,
            m.polarization
        )?;
    }
    w.flush()?;
    if snapshots {
        // smallest even grid whose dealiased band holds every mode
        let need = lambda_max.sqrt().floor() as usize;
        let n_min = (3 * need + 2).max(8);
        let n = cfg.as_ref().map(|c| c.n).unwrap_or(n_min + n_min % 2);
        let grid = GridSpec::new(d, n)?;
        let dir = out_dir(cli, cfg.as_ref())?;
        for m in &e.modes {
            write_snapshot(dir.join(format!("mode_{:04}.bin", m.index)), &m.field(grid)?)?;
        }
    }
    Ok(())
}

fn diagnose(cli: &Cli, snapshots: &[PathBuf]) -> Outcome {
    if snapshots.is_empty() {
        return Err(Failure::Usage("diagnose needs at least one snapshot path".into()));
    }
    let cfg = match &cli.config {
        Some(_) => Some(load_config(cli)?),
        None => None,
    };
    let stdout = std::io::stdout();
    let mut w = NdjsonWriter::new(stdout.lock());
    for p in snapshots {
        let b = read_snapshot(p)?;
        let (params, opts) = match &cfg {
            Some(c) => {
                if c.grid()? != b.grid() {
                    return Err(Failure::Lib(Error::GridMismatch {
                        expected: c.grid()?.to_string(),
                        found: b.grid().to_string(),
                    }));
                }
                (c.physics, c.diagnostics.observe.clone())
            }
            None => (PhysicsParams::defaults(b.dim(), 0.0), Default::default()),
        };
        w.write(&observe(&b, 0.0, &params, &opts))?;
    }
    w.flush()?;
    Ok(())
}
