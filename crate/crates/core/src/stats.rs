//! Small statistical toolkit: means with standard errors, batch means,
//! integrated autocorrelation time, two-sample KS test, least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    /// Number of (approximately) independent samples behind `se`.
    pub effective: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean and standard error of independent samples.
pub fn mean_se(xs: &[f64]) -> Result<Estimate> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {}",
            xs.len()
        )));
    }
    Ok(Estimate {
        mean: mean(xs),
        se: (variance(xs) / xs.len() as f64).sqrt(),
        effective: xs.len() as f64,
    })
}

/// Integrated autocorrelation time `1 + 2 sum rho(t)` with Sokal's
/// self-consistent window `W >= c tau` (`c = 5`).
pub fn iat(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let m = mean(xs);
    let c0: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for w in 1..n / 2 {
        let c: f64 = (0..n - w).map(|i| (xs[i] - m) * (xs[i + w] - m)).sum::<f64>() / n as f64;
        tau += 2.0 * c / c0;
        if w as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Batch-means estimate over one or more independent series. Each series is
/// cut into equal batches (at least `min_batches` in total); batch means are
/// treated as independent.
pub fn batch_means(series: &[Vec<f64>], min_batches: usize) -> Result<Estimate> {
    let m = series.len();
    if m == 0 || series.iter().any(|s| s.is_empty()) {
        return Err(Error::InsufficientData("empty sample series".into()));
    }
    let per = min_batches.div_ceil(m).max(1);
    let mut means = Vec::new();
    for s in series {
        let size = s.len() / per;
        if size == 0 {
            return Err(Error::InsufficientData(format!(
                "series of length {} cannot form {per} batches",
                s.len()
            )));
        }
        for b in 0..per {
            means.push(mean(&s[b * size..(b + 1) * size]));
        }
    }
    let total: usize = series.iter().map(|s| s.len()).sum();
    let tau = mean(&series.iter().map(|s| iat(s)).collect::<Vec<_>>());
    let est = mean_se(&means)?;
    Ok(Estimate {
        mean: mean(&series.iter().flatten().copied().collect::<Vec<_>>()),
        se: est.se,
        effective: total as f64 / tau,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lam))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lam: f64) -> f64 {
    if lam < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lam * lam).exp();
        s += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Weighted least squares `y = a + s x` with weights `1/sigma^2` (unit
/// weights when `sigma` is `None`).
pub fn linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs >= 2 matched points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|v| 1.0 / (v * v).max(f64::MIN_POSITIVE)).collect(),
        None => vec![1.0; x.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let slope_se = match sigma {
        Some(_) => (1.0 / sxx).sqrt(),
        None if x.len() > 2 => {
            let rss: f64 = (0..x.len())
                .map(|i| {
                    let r = y[i] - my - slope * (x[i] - mx);
                    r * r
                })
                .sum();
            (rss / (x.len() as f64 - 2.0) / sxx).sqrt()
        }
        None => f64::NAN,
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        slope_se,
    })
}
