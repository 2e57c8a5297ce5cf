use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Least-squares line through `(log eps, log value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
}

/// `value = C eps ln(1/eps)` fitted in log space; only `C` is free.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogModelFit {
    pub constant: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub power: SlopeFit,
    pub log: LogModelFit,
    /// `log.residual <= power.residual`.
    pub log_wins: bool,
}

fn logs(points: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("a slope fit needs at least 3 points, got {}", points.len())));
    }
    for &(e, v) in points {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue(v));
        }
        if !(e > 0.0) {
            return Err(Error::NonPositiveValue(e));
        }
    }
    Ok(points.iter().map(|&(e, v)| (e.ln(), v.ln())).unzip())
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let (x, y) = logs(points)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit { slope, stderr, intercept, residual: (rss / n).sqrt() })
}

pub fn fit_log_model(points: &[(f64, f64)]) -> Result<LogModelFit> {
    let (x, y) = logs(points)?;
    if points.iter().any(|&(e, _)| e >= 1.0) {
        return Err(Error::InvalidInput("the eps ln(1/eps) model needs eps < 1".into()));
    }
    // log v = log C + log(eps ln(1/eps))
    let basis: Vec<f64> = x.iter().map(|lx| lx + (-lx).ln()).collect();
    let n = x.len() as f64;
    let logc = y.iter().zip(&basis).map(|(a, b)| a - b).sum::<f64>() / n;
    let rss: f64 = y.iter().zip(&basis).map(|(a, b)| (a - b - logc).powi(2)).sum();
    Ok(LogModelFit { constant: logc.exp(), residual: (rss / n).sqrt() })
}

pub fn compare_models(points: &[(f64, f64)]) -> Result<ModelComparison> {
    let power = fit_loglog_slope(points)?;
    let log = fit_log_model(points)?;
    Ok(ModelComparison { power, log, log_wins: log.residual <= power.residual })
}

/// Largest change of the fitted slope when one point is dropped.
pub fn leave_one_out_change(points: &[(f64, f64)]) -> Result<f64> {
    let full = fit_loglog_slope(points)?.slope;
    if points.len() < 4 {
        return Ok(f64::NAN);
    }
    let mut worst = 0.0f64;
    for k in 0..points.len() {
        let rest: Vec<_> = points.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, p)| *p).collect();
        worst = worst.max((fit_loglog_slope(&rest)?.slope - full).abs());
    }
    Ok(worst)
}
