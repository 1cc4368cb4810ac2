//! Statistics kernel used by every analysis: least squares with slope
//! significance, the one-sided Wilcoxon rank-sum test, and per-bin summaries.

mod binning;
mod ols;
mod rank_sum;

pub use binning::{bin_series, group_into_bins, Bin, BinKind, BinPoint, BinSpec, BinnedSeries, DEFAULT_MIN_SAMPLES};
pub use ols::{ols, OlsFlag, OlsResult};
pub use rank_sum::{
    exact_upper_tail, exact_upper_tail_scores, rank_sum_one_sided, rank_sum_with, RankSumMethod, RankSumResult,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} observations, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("predictor has zero variance")]
    DegeneratePredictor,
    #[error("sample {0} is empty")]
    EmptySample(&'static str),
    #[error("invalid bin spec: {0}")]
    InvalidBinSpec(String),
}
