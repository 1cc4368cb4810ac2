//! The repetition analyses: subsequent-patent counts after a baseline patent,
//! hit-anchored stay series, switch series and their ratio, the hit-threshold
//! sweep, and the two diversity splits.
//!
//! Each analysis is split into an observation step (plain tuples, one per
//! counted patent) and a summarizing step that bins observations and attaches
//! rank-sum tests. The observation functions are public so they can be
//! checked against independent implementations.

mod diversity;
mod predictions;

pub use diversity::{pair_diversity, pair_observations, tech_diversity, tech_observations, DiversityObs};
pub use predictions::{
    compare_prediction1, prediction1, prediction1_observations, prediction2_stay_series, prediction3_switch_series,
    rho_series, stay_observations, switch_observations, threshold_sweep, RhoPoint, RhoSeries, SweepEntry, SweepResult,
};

use serde::Serialize;

use crate::metrics::HitPopulation;
use crate::model::HitSpec;
use crate::stats::{
    bin_series, group_into_bins, rank_sum_one_sided, Bin, BinPoint, BinSpec, RankSumResult, DEFAULT_MIN_SAMPLES,
};

/// Knobs shared by all analyses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub hit: HitSpec,
    pub hit_population: HitPopulation,
    pub min_samples: usize,
    pub impact_bin_width: f64,
    pub include_first_as_inex: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            hit: HitSpec::default(),
            hit_population: HitPopulation::All,
            min_samples: DEFAULT_MIN_SAMPLES,
            impact_bin_width: 1.0,
            include_first_as_inex: false,
        }
    }
}

impl AnalysisConfig {
    pub fn repetition_bins(&self) -> BinSpec {
        BinSpec::repetition(self.min_samples)
    }
}

/// Settings needed to reproduce one analysis output.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Provenance {
    pub analysis: String,
    pub hit_spec: Option<String>,
    pub hit_cutoff: Option<f64>,
    pub hit_population: Option<String>,
    pub min_samples: usize,
    pub bins: Option<BinSpec>,
    pub include_first_as_inex: Option<bool>,
    pub n_observations: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinTest {
    pub bin: Bin,
    pub result: RankSumResult,
}

/// A binned series: mean, standard error and count per bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult {
    pub label: String,
    pub points: Vec<BinPoint>,
    pub suppressed: Vec<(Bin, usize)>,
    pub provenance: Provenance,
}

impl SeriesResult {
    fn from_observations(label: &str, obs: &[(f64, f64)], bins: &BinSpec, provenance: Provenance) -> Self {
        let binned = bin_series(obs, bins);
        SeriesResult {
            label: label.to_owned(),
            points: binned.points,
            suppressed: binned.suppressed,
            provenance: Provenance { n_observations: obs.len(), bins: Some(*bins), ..provenance },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, key: i64) -> Option<&BinPoint> {
        self.points.iter().find(|p| p.bin.key == key)
    }
}

/// Two series compared bin by bin with a one-sided rank-sum test of
/// `greater` over `lesser`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub greater: SeriesResult,
    pub lesser: SeriesResult,
    pub tests: Vec<BinTest>,
}

/// Builds both series and tests every bin where both sides reach
/// `min_samples`, using the raw per-observation values.
pub(crate) fn compare(
    greater: (&str, &[(f64, f64)]),
    lesser: (&str, &[(f64, f64)]),
    bins: &BinSpec,
    provenance: Provenance,
) -> Comparison {
    let g = group_into_bins(greater.1, bins);
    let l = group_into_bins(lesser.1, bins);
    let min = bins.min_samples.max(1);
    let tests = g
        .iter()
        .filter_map(|(key, (bin, gv))| {
            let (_, lv) = l.get(key)?;
            if gv.len() < min || lv.len() < min {
                return None;
            }
            let result = rank_sum_one_sided(gv, lv).ok()?;
            Some(BinTest { bin: *bin, result })
        })
        .collect();
    Comparison {
        greater: SeriesResult::from_observations(greater.0, greater.1, bins, provenance.clone()),
        lesser: SeriesResult::from_observations(lesser.0, lesser.1, bins, provenance),
        tests,
    }
}
