//! Impact normalization, hit-cutoff binding and the descriptive
//! distributions (empirical CCDFs with log-normal overlays).

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::model::{CohortBasis, Dataset, HitMode, HitSpec, ImpactTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("patent {0} has no grant year but grant-year cohorts were requested")]
    MissingGrantYear(String),
    #[error("need at least 2 positive samples for a log-normal fit, got {0}")]
    InsufficientData(usize),
    #[error("no samples to build a distribution from")]
    EmptySamples,
}

/// Citations divided by the mean citation count of the patent's cohort.
/// Cohorts whose mean is zero get impact 0 throughout.
pub fn compute_impact(ds: &Dataset, basis: CohortBasis) -> Result<ImpactTable, MetricsError> {
    let counts = ds.citation_counts();
    let mut years = Vec::with_capacity(ds.patents.len());
    for i in 0..ds.patents.len() {
        let y = ds.cohort_year(i, basis).ok_or_else(|| MetricsError::MissingGrantYear(ds.patents[i].id.clone()))?;
        years.push(y);
    }
    let mut totals: BTreeMap<i32, (u64, u64)> = BTreeMap::new();
    for (&y, &c) in years.iter().zip(&counts) {
        let e = totals.entry(y).or_default();
        e.0 += c;
        e.1 += 1;
    }
    let cohort_means: BTreeMap<i32, f64> = totals.iter().map(|(&y, &(sum, n))| (y, sum as f64 / n as f64)).collect();
    let impacts = years
        .iter()
        .zip(&counts)
        .map(|(y, &c)| {
            let mean = cohort_means[y];
            if mean > 0.0 {
                c as f64 / mean
            } else {
                0.0
            }
        })
        .collect();
    Ok(ImpactTable { basis, impacts, cohort_means })
}

/// Which patents define the quantile when a hit spec is bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitPopulation {
    #[default]
    All,
    /// Only patents with two or more inventors.
    Team,
}

impl FromStr for HitPopulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(HitPopulation::All),
            "team" => Ok(HitPopulation::Team),
            other => Err(format!("unknown hit population `{other}` (expected all|team)")),
        }
    }
}

impl HitPopulation {
    pub fn as_str(&self) -> &'static str {
        match self {
            HitPopulation::All => "all",
            HitPopulation::Team => "team",
        }
    }

    pub fn impacts(&self, ds: &Dataset, table: &ImpactTable) -> Vec<f64> {
        match self {
            HitPopulation::All => table.impacts.clone(),
            HitPopulation::Team => {
                ds.patents.iter().zip(&table.impacts).filter(|(p, _)| p.inventors.len() >= 2).map(|(_, &v)| v).collect()
            }
        }
    }
}

/// Resolves a hit spec to a concrete impact cutoff; hits are `I > cutoff`.
///
/// Quantile mode returns the smallest observed impact `c` such that at most a
/// fraction `q` of the population has `I > c`.
pub fn bind_hit_threshold(spec: &HitSpec, impacts: &[f64]) -> Result<f64, MetricsError> {
    if impacts.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    match spec.mode {
        HitMode::Absolute => Ok(spec.value),
        HitMode::Quantile => {
            let n = impacts.len();
            let allowed = ((spec.value * n as f64) + 1e-9).floor() as usize;
            if allowed >= n {
                return Ok(impacts.iter().copied().fold(f64::INFINITY, f64::min));
            }
            let mut sorted = impacts.to_vec();
            sorted.sort_by(f64::total_cmp);
            Ok(sorted[n - 1 - allowed])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
    /// Nonpositive samples left out of the fit.
    pub excluded: usize,
    /// All positive samples were identical (sigma = 0).
    pub degenerate: bool,
}

impl LogNormalFit {
    /// P(X >= x) under the fitted distribution.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let z = x.ln() - self.mu;
        if self.degenerate {
            return if z <= 0.0 { 1.0 } else { 0.0 };
        }
        Normal::standard().sf(z / self.sigma)
    }
}

/// Maximum-likelihood log-normal fit: mean and population standard deviation
/// of the log samples.
pub fn fit_lognormal(samples: &[f64]) -> Result<LogNormalFit, MetricsError> {
    let logs: Vec<f64> = samples.iter().filter(|&&v| v > 0.0).map(|v| v.ln()).collect();
    let n = logs.len();
    if n < 2 {
        return Err(MetricsError::InsufficientData(n));
    }
    let mu = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    Ok(LogNormalFit { mu, sigma, n, excluded: samples.len() - n, degenerate: sigma == 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdfSeries {
    pub label: String,
    pub years: Option<(i32, i32)>,
    /// `(v, P(X >= v))` for each distinct observed `v`, ascending.
    pub points: Vec<(f64, f64)>,
    pub fit: Option<LogNormalFit>,
}

pub fn ccdf(samples: &[f64], label: &str) -> Result<CcdfSeries, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        points.push((v, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    Ok(CcdfSeries { label: label.to_owned(), years: None, points, fit: None })
}

/// First half runs from `min` through `floor((min+max)/2)` inclusive.
pub fn split_halves((min, max): (i32, i32)) -> ((i32, i32), (i32, i32)) {
    let mid = (min + max).div_euclid(2);
    ((min, mid), (mid + 1, max))
}

/// CCDFs for the first and second half of `duration`. Halves without
/// samples are omitted and reported in the returned warnings.
pub fn ccdf_split(samples: &[(i32, f64)], duration: (i32, i32), label: &str) -> (Vec<CcdfSeries>, Vec<String>) {
    let (first, second) = split_halves(duration);
    let mut series = Vec::new();
    let mut warnings = Vec::new();
    for (tag, (lo, hi)) in [("first_half", first), ("second_half", second)] {
        let values: Vec<f64> = samples.iter().filter(|(y, _)| *y >= lo && *y <= hi).map(|s| s.1).collect();
        match ccdf(&values, &format!("{label}:{tag}:{lo}-{hi}")) {
            Ok(mut s) => {
                s.years = Some((lo, hi));
                series.push(s);
            }
            Err(_) => warnings.push(format!("{label}: no samples in {tag} {lo}-{hi}; series omitted")),
        }
    }
    (series, warnings)
}

/// Inventor count per patent, paired with the application year.
pub fn team_sizes(ds: &Dataset, include_solo: bool) -> Vec<(i32, f64)> {
    ds.patents
        .iter()
        .filter(|p| include_solo || p.inventors.len() >= 2)
        .map(|p| (p.year, p.inventors.len() as f64))
        .collect()
}

pub fn impacts_by_year(ds: &Dataset, table: &ImpactTable) -> Vec<(i32, f64)> {
    ds.patents.iter().zip(&table.impacts).map(|(p, &v)| (p.year, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassCode, InventorId, Patent, Vocabulary};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, LogNormal};

    fn dataset(years: &[i32], cites: &[(u32, u32)]) -> Dataset {
        Dataset {
            patents: years
                .iter()
                .enumerate()
                .map(|(i, &y)| Patent {
                    id: format!("P{i}"),
                    year: y,
                    grant_year: None,
                    inventors: vec![InventorId(0)],
                    classes: vec![ClassCode(0)],
                })
                .collect(),
            inventors: Vocabulary::from_tokens(["A"]),
            classes: Vocabulary::from_tokens(["X"]),
            citations: cites.to_vec(),
        }
    }

    #[test]
    fn impact_from_definition() {
        // P0:2, P1:4, P2:0 citations, all in 2000; P3 cites from 2001
        let cites = [(3, 0), (3, 0), (3, 1), (3, 1), (3, 1), (3, 1)];
        let ds = dataset(&[2000, 2000, 2000, 2001], &cites);
        let t = compute_impact(&ds, CohortBasis::Application).unwrap();
        assert_eq!(t.impacts[..3], [1.0, 2.0, 0.0]);
        assert_eq!(t.cohort_means[&2000], 2.0);
        // 2001 cohort is uncited: 0/0 := 0
        assert_eq!(t.impacts[3], 0.0);
        assert_eq!(t.cohort_means[&2001], 0.0);
    }

    #[test]
    fn grant_basis_needs_grant_years() {
        let ds = dataset(&[2000], &[]);
        assert!(matches!(compute_impact(&ds, CohortBasis::Grant), Err(MetricsError::MissingGrantYear(_))));
    }

    #[test]
    fn quantile_cutoff_brute_force() {
        let impacts = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 9.0];
        let spec = HitSpec::top_fraction(0.10).unwrap();
        assert_eq!(bind_hit_threshold(&spec, &impacts).unwrap(), 1.0);
        let abs = HitSpec::greater_than(2.0).unwrap();
        assert_eq!(bind_hit_threshold(&abs, &impacts).unwrap(), 2.0);
        let flat = [3.0; 20];
        let c = bind_hit_threshold(&spec, &flat).unwrap();
        assert_eq!(flat.iter().filter(|&&v| v > c).count(), 0);
        assert_eq!(bind_hit_threshold(&spec, &[]), Err(MetricsError::EmptyDataset));
    }

    proptest! {
        #[test]
        fn quantile_cutoff_is_smallest_admissible(
            v in proptest::collection::vec(0u32..20, 1..200),
            q in 0.01f64..0.99,
        ) {
            let impacts: Vec<f64> = v.iter().map(|&x| x as f64 / 4.0).collect();
            let c = bind_hit_threshold(&HitSpec::top_fraction(q).unwrap(), &impacts).unwrap();
            let frac = |c: f64| impacts.iter().filter(|&&x| x > c).count() as f64 / impacts.len() as f64;
            prop_assert!(frac(c) <= q + 1e-12);
            // no smaller observed value is admissible
            for &x in &impacts {
                if x < c {
                    prop_assert!(frac(x) > q);
                }
            }
        }

        #[test]
        fn impact_is_invariant_to_cohort_scaling(counts in proptest::collection::vec(0u32..6, 1..25), k in 1u32..5) {
            let n = counts.len() as u32;
            // patent n is the citing source in another year
            let mut years = vec![2000; counts.len()];
            years.push(1999);
            let mut cites = Vec::new();
            let mut scaled = Vec::new();
            for (i, &c) in counts.iter().enumerate() {
                for _ in 0..c { cites.push((n, i as u32)); }
                for _ in 0..c * k { scaled.push((n, i as u32)); }
            }
            let a = compute_impact(&dataset(&years, &cites), CohortBasis::Application).unwrap();
            let b = compute_impact(&dataset(&years, &scaled), CohortBasis::Application).unwrap();
            for (x, y) in a.impacts.iter().zip(&b.impacts) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let mean = a.impacts[..counts.len()].iter().sum::<f64>() / counts.len() as f64;
            if a.cohort_means[&2000] > 0.0 {
                prop_assert!((mean - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn lognormal_fit_is_scale_equivariant(
            v in proptest::collection::vec(0.01f64..100.0, 2..50),
            k in 0.1f64..10.0,
        ) {
            let a = fit_lognormal(&v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
            let b = fit_lognormal(&scaled).unwrap();
            prop_assert!((b.mu - a.mu - k.ln()).abs() < 1e-9);
            prop_assert!((b.sigma - a.sigma).abs() < 1e-9);
        }

        #[test]
        fn ccdf_is_monotone(v in proptest::collection::vec(0u32..30, 1..100)) {
            let samples: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            let s = ccdf(&samples, "x").unwrap();
            prop_assert_eq!(s.points[0].1, 1.0);
            prop_assert!(s.points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1));
        }
    }

    #[test]
    fn lognormal_hand_cases() {
        let e = std::f64::consts::E;
        let f = fit_lognormal(&[e, e, e]).unwrap();
        assert!((f.mu - 1.0).abs() < 1e-15);
        assert_eq!(f.sigma, 0.0);
        assert!(f.degenerate);
        let f = fit_lognormal(&[1.0, e * e]).unwrap();
        assert!((f.mu - 1.0).abs() < 1e-15 && (f.sigma - 1.0).abs() < 1e-15);
        let f = fit_lognormal(&[0.0, 0.0, 1.0, e * e]).unwrap();
        assert_eq!((f.n, f.excluded), (2, 2));
        assert_eq!(fit_lognormal(&[0.0, 5.0]), Err(MetricsError::InsufficientData(1)));
    }

    #[test]
    fn lognormal_recovers_seeded_parameters() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let dist = LogNormal::new(0.5, 1.2).unwrap();
        let draws: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let f = fit_lognormal(&draws).unwrap();
        assert!((f.mu - 0.5).abs() <= 0.02, "mu {}", f.mu);
        assert!((f.sigma - 1.2).abs() <= 0.02, "sigma {}", f.sigma);
    }

    #[test]
    fn ccdf_of_team_sizes() {
        let s = ccdf(&[1.0, 1.0, 2.0, 3.0], "teamsize").unwrap();
        assert_eq!(s.points, vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.25)]);
        let s = ccdf(&[4.0, 4.0], "x").unwrap();
        assert_eq!(s.points, vec![(4.0, 1.0)]);
        assert!(ccdf(&[], "x").is_err());
    }

    #[test]
    fn halves_follow_the_midpoint_rule() {
        assert_eq!(split_halves((1964, 2012)), ((1964, 1988), (1989, 2012)));
        assert_eq!(split_halves((1975, 2010)), ((1975, 1992), (1993, 2010)));
        let (series, warnings) = ccdf_split(&[(1964, 1.0), (1970, 2.0)], (1964, 2012), "t");
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].years, Some((1964, 1988)));
        assert_eq!(warnings.len(), 1);
    }
}
