use serde::Serialize;

use super::{compare, AnalysisConfig, BinTest, Comparison, Provenance, SeriesResult};
use crate::model::ImpactTable;
use crate::sequences::{find_hits, find_switch_events, HitRef, SwitchEvent, TeamSequence};
use crate::stats::{group_into_bins, ols, rank_sum_one_sided, Bin, BinSpec, OlsResult, StatsError};

/// `(baseline impact, number of strictly later patents by the same team)`,
/// one per team patent.
pub fn prediction1_observations(teams: &[TeamSequence], impact: &ImpactTable) -> Vec<(f64, u32)> {
    teams
        .iter()
        .flat_map(|s| {
            let len = s.entries.len() as u32;
            s.entries.iter().map(move |e| (impact.get(e.patent as usize), len - e.r))
        })
        .collect()
}

/// Mean subsequent-patent count per baseline-impact bin, plus a regression
/// of the count on the unbinned impact.
pub fn prediction1(
    teams: &[TeamSequence],
    impact: &ImpactTable,
    cfg: &AnalysisConfig,
) -> Result<(SeriesResult, Result<OlsResult, StatsError>), StatsError> {
    let bins = BinSpec::linear(cfg.impact_bin_width, cfg.min_samples)?;
    let obs: Vec<(f64, f64)> =
        prediction1_observations(teams, impact).into_iter().map(|(x, c)| (x, c as f64)).collect();
    let provenance = Provenance { analysis: "prediction1".into(), min_samples: cfg.min_samples, ..Default::default() };
    let series = SeriesResult::from_observations("subsequent_patents", &obs, &bins, provenance);
    Ok((series, ols(&obs)))
}

/// Cross-dataset check that the first dataset's teams continue longer: per
/// impact bin, one-sided rank-sum of subsequent counts (first > second).
pub fn compare_prediction1(
    first: &[(f64, u32)],
    second: &[(f64, u32)],
    cfg: &AnalysisConfig,
) -> Result<Comparison, StatsError> {
    let bins = BinSpec::linear(cfg.impact_bin_width, cfg.min_samples)?;
    let a: Vec<(f64, f64)> = first.iter().map(|&(x, c)| (x, c as f64)).collect();
    let b: Vec<(f64, f64)> = second.iter().map(|&(x, c)| (x, c as f64)).collect();
    let provenance = Provenance { analysis: "compare-p1".into(), min_samples: cfg.min_samples, ..Default::default() };
    Ok(compare(("first", &a), ("second", &b), &bins, provenance))
}

/// `(r, impact)` for the hit (r = 1) and every later patent of the same team,
/// for each hit. Teams with several hits contribute one run per hit.
pub fn stay_observations(teams: &[TeamSequence], impact: &ImpactTable, hits: &[HitRef]) -> Vec<(u32, f64)> {
    hits.iter()
        .flat_map(|h| {
            teams[h.team as usize].entries[h.position as usize..]
                .iter()
                .enumerate()
                .map(|(k, e)| (k as u32 + 1, impact.get(e.patent as usize)))
        })
        .collect()
}

/// `(aligned_r, impact of the new team's first patent)` per switch event.
pub fn switch_observations(events: &[SwitchEvent], impact: &ImpactTable) -> Vec<(u32, f64)> {
    events.iter().map(|e| (e.aligned_r, impact.get(e.first_patent as usize))).collect()
}

fn hit_provenance(analysis: &str, cfg: &AnalysisConfig, cutoff: f64) -> Provenance {
    Provenance {
        analysis: analysis.into(),
        hit_spec: Some(cfg.hit.to_string()),
        hit_cutoff: Some(cutoff),
        hit_population: Some(cfg.hit_population.as_str().into()),
        min_samples: cfg.min_samples,
        ..Default::default()
    }
}

fn as_coords(obs: &[(u32, f64)]) -> Vec<(f64, f64)> {
    obs.iter().map(|&(r, v)| (r as f64, v)).collect()
}

/// Average impact at each repetition counted from a hit (hits are
/// `impact > cutoff`).
pub fn prediction2_stay_series(
    teams: &[TeamSequence],
    impact: &ImpactTable,
    cutoff: f64,
    cfg: &AnalysisConfig,
) -> SeriesResult {
    let hits = find_hits(teams, impact, cutoff);
    let obs = as_coords(&stay_observations(teams, impact, &hits));
    let mut prov = hit_provenance("prediction2", cfg, cutoff);
    prov.notes.push(format!("hits: {}", hits.len()));
    SeriesResult::from_observations("no_switch", &obs, &cfg.repetition_bins(), prov)
}

/// Switch series (first patents of new teams formed by hit-team members,
/// aligned to the hit team's repetition count) tested per bin as greater
/// than the stay series.
pub fn prediction3_switch_series(
    teams: &[TeamSequence],
    impact: &ImpactTable,
    cutoff: f64,
    cfg: &AnalysisConfig,
) -> Comparison {
    let hits = find_hits(teams, impact, cutoff);
    let events = find_switch_events(&hits, teams);
    let stay = as_coords(&stay_observations(teams, impact, &hits));
    let switch = as_coords(&switch_observations(&events, impact));
    let mut prov = hit_provenance("prediction3", cfg, cutoff);
    prov.notes.push(format!("hits: {}, switch events: {}", hits.len(), events.len()));
    prov.notes.push("new teams that contain the whole hit team count as switches".into());
    compare(("switch", &switch), ("no_switch", &stay), &cfg.repetition_bins(), prov)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoPoint {
    pub bin: Bin,
    pub rho: f64,
    pub n_switch: usize,
    pub n_stay: usize,
}

/// Ratio of switch mean to stay mean per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RhoSeries {
    pub points: Vec<RhoPoint>,
    pub notes: Vec<String>,
}

impl RhoSeries {
    pub fn point(&self, key: i64) -> Option<&RhoPoint> {
        self.points.iter().find(|p| p.bin.key == key)
    }
}

/// Defined on bins present (i.e. not suppressed) in both series.
pub fn rho_series(stay: &SeriesResult, switch: &SeriesResult) -> RhoSeries {
    let mut out = RhoSeries::default();
    for sw in &switch.points {
        let Some(st) = stay.point(sw.bin.key) else { continue };
        if st.mean == 0.0 {
            out.notes.push(format!("bin {}: stay mean is zero, rho omitted (division by zero)", sw.bin));
            continue;
        }
        if sw.mean == 0.0 {
            out.notes.push(format!("bin {}: switch mean is zero, rho omitted", sw.bin));
            continue;
        }
        out.points.push(RhoPoint { bin: sw.bin, rho: sw.mean / st.mean, n_switch: sw.n, n_stay: st.n });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub threshold: f64,
    pub n_hits: usize,
    pub stay: SeriesResult,
    pub switch: SeriesResult,
    pub rho: RhoSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Lowest threshold tested as having greater rho than the highest, per
    /// bin. Samples are switch impacts divided by that threshold's stay mean.
    pub tests: Vec<BinTest>,
}

/// One rho series per absolute hit threshold.
pub fn threshold_sweep(
    teams: &[TeamSequence],
    impact: &ImpactTable,
    thresholds: &[f64],
    cfg: &AnalysisConfig,
) -> SweepResult {
    let bins = cfg.repetition_bins();
    let mut entries = Vec::with_capacity(thresholds.len());
    let mut ratio_samples = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let hits = find_hits(teams, impact, threshold);
        let events = find_switch_events(&hits, teams);
        let stay_obs = as_coords(&stay_observations(teams, impact, &hits));
        let switch_obs = as_coords(&switch_observations(&events, impact));
        let mut prov = hit_provenance("sweep", cfg, threshold);
        prov.hit_spec = Some(format!("gt:{threshold}"));
        prov.hit_population = None;
        let stay = SeriesResult::from_observations("no_switch", &stay_obs, &bins, prov.clone());
        let switch = SeriesResult::from_observations("switch", &switch_obs, &bins, prov);
        let rho = rho_series(&stay, &switch);
        let grouped = group_into_bins(&switch_obs, &bins);
        let per_bin: Vec<(i64, Bin, Vec<f64>)> = rho
            .points
            .iter()
            .map(|p| {
                let stay_mean = stay.point(p.bin.key).expect("rho bins exist in stay").mean;
                let values = grouped[&p.bin.key].1.iter().map(|v| v / stay_mean).collect();
                (p.bin.key, p.bin, values)
            })
            .collect();
        ratio_samples.push(per_bin);
        entries.push(SweepEntry { threshold, n_hits: hits.len(), stay, switch, rho });
    }
    let mut tests = Vec::new();
    if let (Some(low), Some(high)) = (ratio_samples.first(), ratio_samples.last()) {
        if ratio_samples.len() >= 2 {
            for (key, bin, lv) in low {
                if let Some((_, _, hv)) = high.iter().find(|h| h.0 == *key) {
                    if let Ok(result) = rank_sum_one_sided(lv, hv) {
                        tests.push(BinTest { bin: *bin, result });
                    }
                }
            }
        }
    }
    SweepResult { entries, tests }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassCode, Dataset, InventorId, Patent, Vocabulary};
    use crate::sequences::build_team_sequences;
    use std::collections::BTreeMap;

    fn ds(rows: &[(&str, i32, &str)]) -> Dataset {
        let mut rows = rows.to_vec();
        rows.sort_by_key(|r| r.0);
        Dataset {
            patents: rows
                .iter()
                .map(|&(id, year, inv)| {
                    let mut inventors: Vec<InventorId> = inv.bytes().map(|b| InventorId((b - b'A') as u32)).collect();
                    inventors.sort_unstable();
                    Patent { id: id.into(), year, grant_year: None, inventors, classes: vec![ClassCode(0)] }
                })
                .collect(),
            inventors: Vocabulary::from_tokens(["A", "B", "C", "D"]),
            classes: Vocabulary::from_tokens(["X"]),
            citations: vec![],
        }
    }

    fn table(v: &[f64]) -> ImpactTable {
        ImpactTable { basis: Default::default(), impacts: v.to_vec(), cohort_means: BTreeMap::new() }
    }

    fn cfg1() -> AnalysisConfig {
        AnalysisConfig { min_samples: 1, ..Default::default() }
    }

    #[test]
    fn subsequent_counts() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2001, "AB"), ("P3", 2002, "AB")]);
        let teams = build_team_sequences(&d);
        let obs = prediction1_observations(&teams, &table(&[5.0, 1.0, 1.0]));
        assert_eq!(obs, vec![(5.0, 2), (1.0, 1), (1.0, 0)]);
    }

    #[test]
    fn single_patent_teams_give_zero_slope() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2001, "AC"), ("P3", 2002, "AD")]);
        let teams = build_team_sequences(&d);
        let (series, fit) = prediction1(&teams, &table(&[0.5, 1.0, 1.5]), &cfg1()).unwrap();
        assert!(series.points.iter().all(|p| p.mean == 0.0));
        assert_eq!(fit.unwrap().slope, 0.0);
        let (series, fit) = prediction1(&[], &table(&[]), &cfg1()).unwrap();
        assert!(series.is_empty());
        assert!(fit.is_err());
    }

    #[test]
    fn stay_series_starts_at_the_hit() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2001, "AB"), ("P3", 2002, "AB")]);
        let teams = build_team_sequences(&d);
        let t = table(&[3.0, 1.0, 0.5]);
        let hits = find_hits(&teams, &t, 2.0);
        assert_eq!(stay_observations(&teams, &t, &hits), vec![(1, 3.0), (2, 1.0), (3, 0.5)]);
        let t = table(&[1.0, 3.0, 0.5]);
        let hits = find_hits(&teams, &t, 2.0);
        assert_eq!(stay_observations(&teams, &t, &hits), vec![(1, 3.0), (2, 0.5)]);
        let s = prediction2_stay_series(&teams, &t, 2.0, &cfg1());
        assert_eq!(s.points.len(), 2);
        assert_eq!(s.provenance.hit_cutoff, Some(2.0));
    }

    #[test]
    fn single_hit_patent_team() {
        let d = ds(&[("P1", 2000, "AB")]);
        let teams = build_team_sequences(&d);
        let s = prediction2_stay_series(&teams, &table(&[9.0]), 2.0, &cfg1());
        assert_eq!(s.points.len(), 1);
        assert_eq!(s.points[0].mean, 9.0);
    }

    #[test]
    fn zero_hits_yield_empty_series() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2001, "AC")]);
        let teams = build_team_sequences(&d);
        let c = prediction3_switch_series(&teams, &table(&[1.0, 1.0]), 1.0, &cfg1());
        assert!(c.greater.is_empty() && c.lesser.is_empty() && c.tests.is_empty());
    }

    #[test]
    fn switch_event_lands_at_its_aligned_bin() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2002, "AB"), ("P3", 2003, "AC")]);
        let teams = build_team_sequences(&d);
        let c = prediction3_switch_series(&teams, &table(&[5.0, 1.0, 2.5]), 2.0, &cfg1());
        let p = c.greater.point(3).unwrap();
        assert_eq!((p.mean, p.n), (2.5, 1));
    }

    #[test]
    fn rho_arithmetic() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2002, "AB"), ("P3", 2004, "AB"), ("P4", 2003, "AC")]);
        let teams = build_team_sequences(&d);
        // stay r=3 is P3 (1.0), switch at r=3 is P4 (2.0)
        let t = table(&[5.0, 1.0, 1.0, 2.0]);
        let c = prediction3_switch_series(&teams, &t, 2.0, &cfg1());
        let rho = rho_series(&c.lesser, &c.greater);
        assert_eq!(rho.point(3).unwrap().rho, 2.0);
        let same = rho_series(&c.lesser, &c.lesser);
        assert!(same.points.iter().all(|p| p.rho == 1.0));
    }

    #[test]
    fn rho_skips_zero_stay_mean() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2001, "AB"), ("P3", 2004, "AB"), ("P4", 2003, "AC")]);
        let teams = build_team_sequences(&d);
        let t = table(&[5.0, 0.0, 0.0, 2.0]);
        let c = prediction3_switch_series(&teams, &t, 2.0, &cfg1());
        let rho = rho_series(&c.lesser, &c.greater);
        assert!(rho.point(3).is_none());
        assert_eq!(rho.notes.len(), 1);
    }

    #[test]
    fn sweep_records_each_cutoff() {
        let d = ds(&[("P1", 2000, "AB"), ("P2", 2002, "AB"), ("P3", 2003, "AC")]);
        let teams = build_team_sequences(&d);
        let t = table(&[20.0, 1.0, 2.5]);
        let sweep = threshold_sweep(&teams, &t, &[2.0, 4.0, 8.0, 16.0], &cfg1());
        assert_eq!(sweep.entries.len(), 4);
        let cutoffs: Vec<Option<f64>> = sweep.entries.iter().map(|e| e.stay.provenance.hit_cutoff).collect();
        assert_eq!(cutoffs, vec![Some(2.0), Some(4.0), Some(8.0), Some(16.0)]);
        let above_max = threshold_sweep(&teams, &t, &[50.0], &cfg1());
        assert!(above_max.entries[0].stay.is_empty());
        // a single threshold is just rho_series
        let single = threshold_sweep(&teams, &t, &[2.0], &cfg1());
        let direct = prediction3_switch_series(&teams, &t, 2.0, &cfg1());
        assert_eq!(single.entries[0].rho, rho_series(&direct.lesser, &direct.greater));
        assert!(single.tests.is_empty());
    }
}
