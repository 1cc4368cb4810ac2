use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OlsFlag {
    /// Residual variance is zero; `slope_p` is reported as 0.
    PerfectFit,
    /// Every response is identical; slope is 0 and `slope_p` is 1.
    ConstantResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub t: f64,
    /// Two-sided p-value of the slope t-test with n-2 degrees of freedom.
    pub slope_p: f64,
    pub n: usize,
    pub flag: Option<OlsFlag>,
}

impl OlsResult {
    /// One-sided p-value for a positive slope.
    pub fn slope_p_positive(&self) -> f64 {
        if self.slope > 0.0 {
            self.slope_p / 2.0
        } else {
            1.0 - self.slope_p / 2.0
        }
    }
}

/// Simple linear regression of y on x.
pub fn ols(points: &[(f64, f64)]) -> Result<OlsResult, StatsError> {
    let n = points.len();
    if n < 3 {
        return Err(StatsError::InsufficientData { need: 3, got: n });
    }
    let nf = n as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(StatsError::DegeneratePredictor);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    if syy == 0.0 {
        return Ok(OlsResult {
            slope: 0.0,
            intercept: y_mean,
            slope_se: 0.0,
            t: 0.0,
            slope_p: 1.0,
            n,
            flag: Some(OlsFlag::ConstantResponse),
        });
    }
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let df = nf - 2.0;
    if sse <= 1e-24 * syy {
        return Ok(OlsResult {
            slope,
            intercept,
            slope_se: 0.0,
            t: f64::INFINITY.copysign(slope),
            slope_p: 0.0,
            n,
            flag: Some(OlsFlag::PerfectFit),
        });
    }
    let slope_se = (sse / df / sxx).sqrt();
    let t = slope / slope_se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let slope_p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(OlsResult { slope, intercept, slope_se, t, slope_p, n, flag: None })
}
