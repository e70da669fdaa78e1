//! Total return, Sharpe ratio and maximum drawdown of equity curves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} points, got {len}")]
    TooShort { needed: usize, len: usize },
    #[error("initial equity must be positive, got {0}")]
    NonPositiveStart(f64),
    #[error("equity must stay positive (index {index})")]
    NonPositiveValue { index: usize },
    #[error("Sharpe ratio undefined: zero variance of excess returns")]
    ZeroVariance,
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// `(V_T - V_0) / V_0`.
pub fn total_return(curve: &[f64]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(MetricsError::TooShort {
            needed: 2,
            len: curve.len(),
        });
    }
    let v0 = curve[0];
    if v0 <= 0.0 {
        return Err(MetricsError::NonPositiveStart(v0));
    }
    Ok((curve[curve.len() - 1] - v0) / v0)
}

/// Per-period simple returns, one shorter than the curve.
pub fn simple_returns(curve: &[f64]) -> Vec<f64> {
    curve.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect()
}

/// Mean excess return over its sample (n - 1) standard deviation.
pub fn sharpe(returns: &[f64], risk_free: f64) -> Result<f64> {
    if returns.len() < 2 {
        return Err(MetricsError::TooShort {
            needed: 2,
            len: returns.len(),
        });
    }
    let n = returns.len() as f64;
    let mean = returns.iter().map(|r| r - risk_free).sum::<f64>() / n;
    let var = returns
        .iter()
        .map(|r| (r - risk_free - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    // Relative threshold: constant returns computed from rounded prices
    // differ by a few ulps, which would otherwise give an enormous ratio.
    if var == 0.0 || var.sqrt() <= 1e-12 * mean.abs() {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(mean / var.sqrt())
}

/// Sharpe ratio scaled by `sqrt(periods_per_year)`.
pub fn sharpe_annualized(returns: &[f64], risk_free: f64, periods_per_year: f64) -> Result<f64> {
    Ok(sharpe(returns, risk_free)? * periods_per_year.sqrt())
}

/// Largest fractional decline from a running peak, in one pass.
pub fn max_drawdown(curve: &[f64]) -> Result<f64> {
    if curve.is_empty() {
        return Err(MetricsError::TooShort { needed: 1, len: 0 });
    }
    let mut peak = f64::NEG_INFINITY;
    let mut mdd: f64 = 0.0;
    for (index, &v) in curve.iter().enumerate() {
        if v <= 0.0 {
            return Err(MetricsError::NonPositiveValue { index });
        }
        peak = peak.max(v);
        mdd = mdd.max((peak - v) / peak);
    }
    Ok(mdd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub total_return: f64,
    /// `None` when the return series has zero variance.
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
    pub periods: usize,
}

impl MetricReport {
    pub fn from_curve(curve: &[f64]) -> Result<Self> {
        let total_return = total_return(curve)?;
        let max_drawdown = max_drawdown(curve)?;
        let sharpe = match sharpe(&simple_returns(curve), 0.0) {
            Ok(s) => Some(s),
            Err(MetricsError::ZeroVariance | MetricsError::TooShort { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            total_return,
            sharpe,
            max_drawdown,
            periods: curve.len() - 1,
        })
    }

    /// Sharpe with the undefined case read as zero, for reward shaping.
    pub fn sharpe_or_zero(&self) -> f64 {
        self.sharpe.unwrap_or(0.0)
    }
}

/// Percent with two decimals, e.g. `0.2575` renders as `25.75`.
pub fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}
