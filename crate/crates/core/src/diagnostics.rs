//! Observables (energy, helicity, mean-square potential, Casimirs,
//! dissipation, MHS residual) and the balance-identity estimators built on
//! them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{lorentz, PhysicsParams, DEFAULT_MHS_ORDER};
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::integrator::{secondary_form, Martingale};
use crate::spectral::{
    curl, curl_inv, scalar_to_physical, sobolev_norm_sq, SobolevKind, SpectralField,
};
use crate::stats::{batch_means, linear_fit, mean_se, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Casimir {
    pub label: String,
    pub value: f64,
}

/// Quantities kept alongside a record but not written to the NDJSON stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordExtra {
    pub step: u64,
    /// `||B||^2`
    pub norm_sq: f64,
    /// `kappa ||B||^2_{H^alpha} + ||u||^2_{H^gamma}`
    pub dissipation: f64,
    /// d = 2: `||B||^2_{H^{alpha-1}}` (equals `||curl^{-1} B||^2_{H^alpha}`);
    /// d = 3: `((-Delta)^{alpha-1} curl B, B)`.
    pub secondary_dissipation: f64,
    pub martingale: Martingale,
}

/// One row of diagnostics; serializes to exactly the NDJSON key set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `||B||^2 / 2`
    #[serde(rename = "E")]
    pub energy: f64,
    /// `||B||^2_{H^alpha}` (homogeneous)
    #[serde(rename = "gradE")]
    pub grad_energy: f64,
    /// `||u||^2_{H^gamma}` (homogeneous)
    #[serde(rename = "uHg")]
    pub u_norm: f64,
    #[serde(rename = "H")]
    pub helicity: Option<f64>,
    #[serde(rename = "M")]
    pub msp: Option<f64>,
    #[serde(rename = "curlBB")]
    pub curl_inner: Option<f64>,
    pub mhs_res: f64,
    pub casimirs: Option<Vec<Casimir>>,
    #[serde(skip)]
    pub extra: RecordExtra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserveOptions {
    pub mhs_order: f64,
    /// Casimirs `int phi^p` for these powers (d = 2).
    pub casimir_powers: Vec<u32>,
}

impl Default for ObserveOptions {
    fn default() -> Self {
        ObserveOptions {
            mhs_order: DEFAULT_MHS_ORDER,
            casimir_powers: vec![2, 4],
        }
    }
}

/// All observables of `B` at time `t`.
pub fn observe(b: &SpectralField, t: f64, params: &PhysicsParams, opts: &ObserveOptions) -> DiagnosticsRecord {
    let d = b.dim();
    let norm_sq = b.norm_sq();
    let alpha = params.alpha;
    let grad_energy = sobolev_norm_sq(b, alpha, SobolevKind::Homogeneous);
    let (u_norm, mhs_res) = if params.transport {
        let l = lorentz(b);
        // u = (-Delta)^{-gamma} L, so ||u||^2_{H^gamma} = sum q^{-gamma} |L|^2
        let g = params.gamma;
        (
            l.weighted_norm_sq(|q| q.powf(-g)),
            sobolev_norm_sq(&l, opts.mhs_order, SobolevKind::Inhomogeneous).sqrt(),
        )
    } else {
        (0.0, 0.0)
    };
    let secondary_dissipation = if d == 2 {
        sobolev_norm_sq(b, alpha - 1.0, SobolevKind::Homogeneous)
    } else {
        let c = curl(b);
        let w = if alpha == 1.0 { c } else { c.map_multiplier(|q| q.powf(alpha - 1.0)) };
        w.inner(b)
    };
    let (helicity, msp, curl_inner, casimirs) = if d == 2 {
        let m = secondary_form(b, b);
        let cas = opts
            .casimir_powers
            .iter()
            .map(|&p| Casimir {
                label: format!("phi^{p}"),
                value: casimir(b, |r| r.powi(p as i32)).expect("d = 2"),
            })
            .collect();
        (None, Some(m), None, Some(cas))
    } else {
        (Some(secondary_form(b, b)), None, Some(curl(b).inner(b)), None)
    };
    DiagnosticsRecord {
        t,
        energy: 0.5 * norm_sq,
        grad_energy,
        u_norm,
        helicity,
        msp,
        curl_inner,
        mhs_res,
        casimirs,
        extra: RecordExtra {
            step: 0,
            norm_sq,
            dissipation: params.kappa * grad_energy + u_norm,
            secondary_dissipation,
            martingale: Martingale::default(),
        },
    }
}

/// `int f(curl^{-1} B) dx` by lattice quadrature (d = 2).
pub fn casimir(b: &SpectralField, f: impl Fn(f64) -> f64) -> Result<f64> {
    if b.dim() != 2 {
        return Err(Error::Params("Casimir invariants are defined for d = 2".into()));
    }
    let phi = curl_inv(b).flux().expect("d = 2");
    let s = scalar_to_physical(&phi);
    let grid = b.grid();
    Ok(s.iter().map(|&v| f(v)).sum::<f64>() * grid.volume() / grid.len() as f64)
}

/// One balance identity or stationary relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceEntry {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// Monte Carlo standard error of `lhs - rhs`.
    pub se: f64,
    /// Explicit discretization allowance added to `3 se`.
    pub allowance: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Same identity after subtracting the accumulated zero-mean noise terms.
    pub compensated: Option<Compensated>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compensated {
    pub residual: f64,
    pub se: f64,
}

impl BalanceEntry {
    fn new(id: &str, lhs: f64, rhs: f64, se: f64, allowance: f64) -> Self {
        let residual = (lhs - rhs).abs();
        let tolerance = 3.0 * se + allowance;
        BalanceEntry {
            id: id.to_string(),
            lhs,
            rhs,
            residual,
            relative_residual: residual / rhs.abs().max(1e-300),
            se,
            allowance,
            tolerance,
            pass: residual <= tolerance,
            compensated: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub entries: Vec<BalanceEntry>,
}

impl BalanceReport {
    pub fn get(&self, id: &str) -> Option<&BalanceEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

impl fmt::Display for BalanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>14} {:>14} {:>12} {:>12} {:>12}  result",
            "identity", "lhs", "rhs", "residual", "se", "tolerance"
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<20} {:>14.6e} {:>14.6e} {:>12.4e} {:>12.4e} {:>12.4e}  {}",
                e.id,
                e.lhs,
                e.rhs,
                e.residual,
                e.se,
                e.tolerance,
                if e.pass { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn trapezoid(rs: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    rs.windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1])))
        .sum()
}

/// Time-integrated energy identity and its helicity (d = 3) or mean-square
/// potential (d = 2) analogue, with expectations over the given
/// trajectories. Each trajectory must start with its `t = 0` record.
/// `allowance` is the explicit discretization allowance of each identity.
pub fn trajectory_balance(
    trajectories: &[Vec<DiagnosticsRecord>],
    spec: Option<&ForcingSpec>,
    params: &PhysicsParams,
    allowance: f64,
) -> Result<BalanceReport> {
    if trajectories.is_empty() || trajectories.iter().any(|t| t.len() < 2) {
        return Err(Error::InsufficientData(
            "trajectory balance needs records with at least two times".into(),
        ));
    }
    let kappa = params.kappa;
    let d2 = trajectories[0][0].msp.is_some();
    let (c0, csec) = match spec {
        Some(s) if kappa > 0.0 => (
            s.c_s(0.0),
            if d2 { s.c_s(-1.0) } else { s.helicity_constant().unwrap_or(0.0) },
        ),
        _ => (0.0, 0.0),
    };
    let secondary = |r: &DiagnosticsRecord| r.msp.or(r.helicity).unwrap_or(0.0);
    let mut report = BalanceReport::default();
    type Pieces = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);
    let collect = |value: &dyn Fn(&DiagnosticsRecord) -> f64,
                   rate: &dyn Fn(&DiagnosticsRecord) -> f64,
                   mart: &dyn Fn(&DiagnosticsRecord) -> f64|
     -> Pieces {
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        let mut res = Vec::new();
        let mut comp = Vec::new();
        for tr in trajectories {
            let first = &tr[0];
            let last = tr.last().expect("nonempty");
            let l = value(last) + 2.0 * trapezoid(tr, rate);
            let r = value(first);
            lhs.push(l);
            rhs.push(r);
            res.push(l - r);
            comp.push(l - r - (mart(last) - mart(first)));
        }
        (lhs, rhs, res, comp)
    };
    let t_end = trajectories[0].last().unwrap().t - trajectories[0][0].t;
    let mut push = |id: &str, pieces: Pieces, inject: f64| -> Result<()> {
        let (lhs, rhs, res, comp) = pieces;
        let n = lhs.len() as f64;
        let lhs_m = lhs.iter().sum::<f64>() / n;
        let rhs_m = rhs.iter().sum::<f64>() / n + inject;
        let se = if lhs.len() > 1 { mean_se(&res)?.se } else { 0.0 };
        let mut e = BalanceEntry::new(id, lhs_m, rhs_m, se, allowance);
        let cm = comp.iter().sum::<f64>() / n - inject;
        let cse = if comp.len() > 1 { mean_se(&comp)?.se } else { 0.0 };
        e.compensated = Some(Compensated { residual: cm.abs(), se: cse });
        report.entries.push(e);
        Ok(())
    };
    push(
        "energy_balance",
        collect(
            &|r| r.extra.norm_sq,
            &|r| r.extra.dissipation,
            &|r| r.extra.martingale.energy,
        ),
        kappa * c0 * t_end,
    )?;
    push(
        if d2 { "msp_balance" } else { "helicity_balance" },
        collect(
            &secondary,
            &|r| kappa * r.extra.secondary_dissipation,
            &|r| r.extra.martingale.secondary,
        ),
        kappa * csec * t_end,
    )?;
    Ok(report)
}

/// Relative allowances for the stationary relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryOptions {
    /// Allowance for the energy-flux relation, relative to `kappa C_0 / 2`.
    pub flux_rel: f64,
    /// Allowance for the d = 2 mean-square-potential relation, relative to `C_{-1}`.
    pub msp_rel: f64,
    /// Allowance for the d = 3 helicity relation, relative to `|sum b^2/tau|`.
    pub helicity_rel: f64,
    pub min_batches: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            flux_rel: 0.1,
            msp_rel: 0.05,
            helicity_rel: 0.1,
            min_batches: 20,
        }
    }
}

/// Stationary relations from post-burn-in samples, one series per trajectory.
///
/// * `stat_energy_flux`: `E(kappa ||B||^2_{H^alpha} + ||u||^2_{H^gamma}) = kappa C_0 / 2`
/// * `stat_msp` (d = 2): `E ||B||^2_{H^{alpha-1}} = C_{-1} / 2`
/// * `stat_helicity` (d = 3): `E((-Delta)^{alpha-1} curl B, B) = (sum b^2/tau) / 2`
pub fn stationary_relations(
    samples: &[Vec<DiagnosticsRecord>],
    spec: &ForcingSpec,
    params: &PhysicsParams,
    opts: &StationaryOptions,
) -> Result<BalanceReport> {
    let series = |f: &dyn Fn(&DiagnosticsRecord) -> f64| -> Vec<Vec<f64>> {
        samples.iter().map(|s| s.iter().map(f).collect()).collect()
    };
    let flux = batch_means(&series(&|r| r.extra.dissipation), opts.min_batches)?;
    check_effective(&flux)?;
    let c0 = spec.c_s(0.0);
    let mut report = BalanceReport::default();
    let target = params.kappa * c0 / 2.0;
    report.entries.push(BalanceEntry::new(
        "stat_energy_flux",
        flux.mean,
        target,
        flux.se,
        opts.flux_rel * target,
    ));
    if spec.dim() == 2 {
        let m = batch_means(&series(&|r| r.extra.secondary_dissipation), opts.min_batches)?;
        check_effective(&m)?;
        let cm1 = spec.c_s(-1.0);
        report.entries.push(BalanceEntry::new(
            "stat_msp",
            m.mean,
            cm1 / 2.0,
            m.se,
            opts.msp_rel * cm1,
        ));
    } else {
        let h = batch_means(&series(&|r| r.extra.secondary_dissipation), opts.min_batches)?;
        check_effective(&h)?;
        let ch = spec.helicity_constant()?;
        report.entries.push(BalanceEntry::new(
            "stat_helicity",
            h.mean,
            ch / 2.0,
            h.se,
            opts.helicity_rel * ch.abs(),
        ));
    }
    Ok(report)
}

fn check_effective(e: &Estimate) -> Result<()> {
    if e.effective < 10.0 {
        return Err(Error::InsufficientData(format!(
            "only {:.1} effective samples (need 10)",
            e.effective
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentReport {
    pub rho: f64,
    pub estimate: f64,
    pub se: f64,
    /// `(C_0 + 1) exp(rho (C_0 + 1))`
    pub bound: f64,
    /// Estimate exceeds the bound by more than `3 se`.
    pub exceeds: bool,
}

/// Sample mean of `exp(rho ||B||^2)` against its a-priori bound.
pub fn exp_moment(norm_sq: &[Vec<f64>], rho: f64, spec: &ForcingSpec) -> Result<ExpMomentReport> {
    let cap = 1.0 / (2.0 * spec.max_b_sq());
    if !(rho > 0.0 && rho <= cap) {
        return Err(Error::Params(format!(
            "rho must lie in (0, {cap}], got {rho}"
        )));
    }
    let vals: Vec<Vec<f64>> = norm_sq
        .iter()
        .map(|s| s.iter().map(|v| (rho * v).exp()).collect())
        .collect();
    let est = if vals.iter().map(|v| v.len()).sum::<usize>() >= 2 && vals.iter().all(|v| v.len() >= 2) {
        batch_means(&vals, 20.min(vals.iter().map(|v| v.len()).sum::<usize>()))?
    } else {
        mean_se(&vals.concat())?
    };
    let c0 = spec.c_s(0.0);
    let bound = (c0 + 1.0) * (rho * (c0 + 1.0)).exp();
    Ok(ExpMomentReport {
        rho,
        estimate: est.mean,
        se: est.se,
        bound,
        exceeds: est.mean > bound + 3.0 * est.se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub samples: usize,
    pub edges: Vec<f64>,
    /// Bin probabilities.
    pub mass: Vec<f64>,
    /// Empirical CDF at the right bin edges.
    pub cdf: Vec<f64>,
    /// Largest bin mass divided by its width relative to the range.
    pub max_density: f64,
    /// Largest bin mass: the biggest jump of the binned CDF.
    pub max_jump: f64,
    /// Largest fraction of samples sharing one exact value.
    pub atom_statistic: f64,
}

/// Histogram of scalar samples (`bins` defaults to `ceil(sqrt(N))`) with the
/// atom statistic.
pub fn law_histogram(values: &[f64], bins: Option<usize>) -> Result<LawReport> {
    let n = values.len();
    if n < 1000 {
        return Err(Error::InsufficientData(format!(
            "law histogram needs >= 1000 samples, got {n}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = 1usize;
    let mut run = 1usize;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    let nb = bins.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).max(1);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let width = if hi > lo { (hi - lo) / nb as f64 } else { 1.0 };
    let mut counts = vec![0usize; nb];
    for &v in &sorted {
        let b = if hi > lo { (((v - lo) / width) as usize).min(nb - 1) } else { 0 };
        counts[b] += 1;
    }
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut cdf = Vec::with_capacity(nb);
    let mut acc = 0.0;
    for m in &mass {
        acc += m;
        cdf.push(acc);
    }
    let max_jump = mass.iter().cloned().fold(0.0, f64::max);
    Ok(LawReport {
        samples: n,
        edges: (0..=nb).map(|i| lo + i as f64 * width).collect(),
        max_density: max_jump * nb as f64,
        max_jump,
        cdf,
        mass,
        atom_statistic: best as f64 / n as f64,
    })
}

/// Running time averages `(1/t) int_0^t f` by the trapezoid rule.
pub fn running_average(t: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    if t.len() != f.len() || t.len() < 2 {
        return Err(Error::InsufficientData("running average needs >= 2 matched points".into()));
    }
    let mut out = Vec::with_capacity(t.len());
    out.push(f[0]);
    let mut acc = 0.0;
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
        out.push(acc / (t[i] - t[0]));
    }
    Ok(out)
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64], y_se: Option<&[f64]>) -> Result<crate::stats::LinearFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let sig: Option<Vec<f64>> = y_se.map(|s| s.iter().zip(y).map(|(e, v)| e / v).collect());
    linear_fit(&lx, &ly, sig.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::{abc_field, kolmogorov_field};
    use crate::spectral::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_observables() {
        let g = GridSpec::new(2, 16).unwrap();
        let r = observe(&SpectralField::zeros(g), 0.0, &PhysicsParams::defaults(2, 0.1), &ObserveOptions::default());
        assert_eq!((r.energy, r.grad_energy, r.u_norm, r.mhs_res), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.msp, Some(0.0));
        assert!(r.helicity.is_none() && r.curl_inner.is_none());
    }

    #[test]
    fn shear_observables() {
        let g = GridSpec::new(2, 16).unwrap();
        let b = kolmogorov_field(g, 1.0).unwrap();
        let r = observe(&b, 0.0, &PhysicsParams::defaults(2, 0.1), &ObserveOptions::default());
        assert!((r.energy - PI * PI).abs() < 1e-12);
        assert!((r.msp.unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        let cas = r.casimirs.unwrap();
        assert!((cas[0].value - r.msp.unwrap()).abs() < 1e-10);
        assert!((cas[1].value - 4.0 * PI * PI * 3.0 / 8.0).abs() < 1e-10);
        assert!(casimir(&b, |x| x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn abc_observables() {
        let g = GridSpec::new(3, 8).unwrap();
        let b = abc_field(g, 1.0, 1.0, 1.0).unwrap();
        let r = observe(&b, 0.0, &PhysicsParams::defaults(3, 0.1), &ObserveOptions::default());
        let v = (2.0 * PI).powi(3);
        assert!((r.helicity.unwrap() - 3.0 * v).abs() < 1e-10);
        assert!((r.energy - 1.5 * v).abs() < 1e-10);
        assert!((r.curl_inner.unwrap() - 3.0 * v).abs() < 1e-10);
        assert!(r.casimirs.is_none() && r.msp.is_none());
        assert!(casimir(&b, |x| x).is_err());
    }

    #[test]
    fn ndjson_keys() {
        let g = GridSpec::new(3, 8).unwrap();
        let r = observe(&abc_field(g, 1.0, 0.0, 0.0).unwrap(), 0.5, &PhysicsParams::defaults(3, 0.1), &ObserveOptions::default());
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["E", "H", "M", "casimirs", "curlBB", "gradE", "mhs_res", "t", "uHg"]);
        assert!(v["M"].is_null() && v["casimirs"].is_null());
    }

    #[test]
    fn histogram_atoms() {
        let same = vec![1.0; 1000];
        let r = law_histogram(&same, None).unwrap();
        assert_eq!(r.atom_statistic, 1.0);
        let smooth: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.618034).fract()).collect();
        let r = law_histogram(&smooth, None).unwrap();
        assert_eq!(r.atom_statistic, 1.0 / 2000.0);
        assert!(r.max_jump < 0.05);
        assert!((r.cdf.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(law_histogram(&smooth[..10], None).is_err());
    }

    #[test]
    fn running_average_cases() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let c = running_average(&t, &vec![2.5; t.len()]).unwrap();
        assert!(c.iter().all(|&v| (v - 2.5).abs() < 1e-13));
        let s: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        let r = running_average(&t, &s).unwrap();
        // (1/t) sin t up to trapezoid error
        assert!((r[100] - 10f64.sin() / 10.0).abs() < 1e-3);
    }
}
