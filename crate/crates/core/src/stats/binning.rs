use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::StatsError;

/// Binning rule.
///
/// `RepetitionDyadic` keeps repetitions 1 through 8 as their own bins and
/// then groups (8,16], (16,32], ... under their upper edge. `Linear` bins are
/// `[k*width, (k+1)*width)` and are labeled by their lower edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinKind {
    RepetitionDyadic,
    Linear { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinSpec {
    pub kind: BinKind,
    pub min_samples: usize,
}

pub const DEFAULT_MIN_SAMPLES: usize = 100;

impl BinSpec {
    pub fn repetition(min_samples: usize) -> Self {
        BinSpec { kind: BinKind::RepetitionDyadic, min_samples }
    }

    pub fn linear(width: f64, min_samples: usize) -> Result<Self, StatsError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(StatsError::InvalidBinSpec(format!("linear width must be positive, got {width}")));
        }
        Ok(BinSpec { kind: BinKind::Linear { width }, min_samples })
    }

    pub fn bin_of(&self, coordinate: f64) -> Bin {
        match self.kind {
            BinKind::RepetitionDyadic => {
                let r = coordinate.max(1.0).round() as i64;
                let key = if r <= 8 { r } else { (r as u64).next_power_of_two() as i64 };
                Bin { key, label: key as f64 }
            }
            BinKind::Linear { width } => {
                let key = (coordinate / width).floor() as i64;
                Bin { key, label: key as f64 * width }
            }
        }
    }
}

/// A bin identity: `key` orders bins, `label` is what gets printed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub key: i64,
    pub label: f64,
}

impl fmt::Display for Bin {
    /// Integral labels print without decimals, others with six.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.label.fract() == 0.0 && self.label.abs() < 1e15 {
            write!(f, "{}", self.label as i64)
        } else {
            write!(f, "{:.6}", self.label)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinPoint {
    pub bin: Bin,
    pub mean: f64,
    /// Sample standard deviation (n-1 divisor) over sqrt(n); 0 when n = 1.
    pub se: f64,
    pub n: usize,
    pub single_sample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct BinnedSeries {
    pub points: Vec<BinPoint>,
    /// Bins dropped for having fewer than `min_samples` observations.
    pub suppressed: Vec<(Bin, usize)>,
}

impl BinnedSeries {
    pub fn total_observations(&self) -> usize {
        self.points.iter().map(|p| p.n).sum::<usize>() + self.suppressed.iter().map(|s| s.1).sum::<usize>()
    }

    pub fn point(&self, key: i64) -> Option<&BinPoint> {
        self.points.iter().find(|p| p.bin.key == key)
    }
}

/// Groups values by bin key, preserving input order inside each bin.
pub fn group_into_bins(observations: &[(f64, f64)], spec: &BinSpec) -> BTreeMap<i64, (Bin, Vec<f64>)> {
    let mut groups: BTreeMap<i64, (Bin, Vec<f64>)> = BTreeMap::new();
    for &(coord, value) in observations {
        let bin = spec.bin_of(coord);
        groups.entry(bin.key).or_insert_with(|| (bin, Vec::new())).1.push(value);
    }
    groups
}

pub(crate) fn summarize_values(bin: Bin, values: &[f64]) -> BinPoint {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return BinPoint { bin, mean, se: 0.0, n, single_sample: true };
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    BinPoint { bin, mean, se: sd / (n as f64).sqrt(), n, single_sample: false }
}

pub fn bin_series(observations: &[(f64, f64)], spec: &BinSpec) -> BinnedSeries {
    let mut out = BinnedSeries::default();
    for (_, (bin, values)) in group_into_bins(observations, spec) {
        if values.len() < spec.min_samples.max(1) {
            out.suppressed.push((bin, values.len()));
        } else {
            out.points.push(summarize_values(bin, &values));
        }
    }
    out
}
