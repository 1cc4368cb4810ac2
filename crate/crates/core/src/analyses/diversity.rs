use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use super::{compare, AnalysisConfig, Comparison, Provenance};
use crate::model::{ClassCode, Dataset, ImpactTable, InventorId};
use crate::sequences::{PairSequence, TeamSequence};

/// One sequence entry classified as inexperienced (InEx) or experienced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiversityObs {
    pub r: u32,
    pub impact: f64,
    pub inex: bool,
}

/// A team patent at r >= 2 is InEx when it carries a class the team has not
/// used at any earlier repetition.
pub fn tech_observations(
    teams: &[TeamSequence],
    ds: &Dataset,
    impact: &ImpactTable,
    include_first: bool,
) -> Vec<DiversityObs> {
    teams
        .par_iter()
        .flat_map_iter(|s| {
            let mut seen: BTreeSet<ClassCode> = BTreeSet::new();
            let mut out = Vec::with_capacity(s.entries.len());
            for e in &s.entries {
                let classes = &ds.patents[e.patent as usize].classes;
                let novel = classes.iter().any(|c| !seen.contains(c));
                if e.r >= 2 || include_first {
                    out.push(DiversityObs { r: e.r, impact: impact.get(e.patent as usize), inex: e.r == 1 || novel });
                }
                seen.extend(classes.iter().copied());
            }
            out
        })
        .collect()
}

/// A pair's patent at r >= 2 is InEx when its set of other co-inventors
/// (possibly empty) has not occurred at an earlier repetition of the pair.
pub fn pair_observations(
    pairs: &[PairSequence],
    ds: &Dataset,
    impact: &ImpactTable,
    include_first: bool,
) -> Vec<DiversityObs> {
    pairs
        .par_iter()
        .flat_map_iter(|s| {
            let mut seen: HashSet<Vec<InventorId>> = HashSet::new();
            let mut out = Vec::with_capacity(s.entries.len());
            for e in &s.entries {
                let others = s.others(e, ds);
                let novel = !seen.contains(&others);
                if e.r >= 2 || include_first {
                    out.push(DiversityObs { r: e.r, impact: impact.get(e.patent as usize), inex: e.r == 1 || novel });
                }
                seen.insert(others);
            }
            out
        })
        .collect()
}

type Coords = Vec<(f64, f64)>;

fn split(obs: &[DiversityObs]) -> (Coords, Coords) {
    let (inex, ex): (Vec<_>, Vec<_>) = obs.iter().partition(|o| o.inex);
    let coords = |v: Vec<&DiversityObs>| v.into_iter().map(|o| (o.r as f64, o.impact)).collect();
    (coords(inex), coords(ex))
}

fn summarize(analysis: &str, obs: &[DiversityObs], cfg: &AnalysisConfig) -> Comparison {
    let (inex, ex) = split(obs);
    let provenance = Provenance {
        analysis: analysis.into(),
        min_samples: cfg.min_samples,
        include_first_as_inex: Some(cfg.include_first_as_inex),
        ..Default::default()
    };
    compare(("InEx", &inex), ("Ex", &ex), &cfg.repetition_bins(), provenance)
}

/// InEx versus experienced-technology team patents, tested per bin as InEx
/// greater.
pub fn tech_diversity(teams: &[TeamSequence], ds: &Dataset, impact: &ImpactTable, cfg: &AnalysisConfig) -> Comparison {
    summarize("tech", &tech_observations(teams, ds, impact, cfg.include_first_as_inex), cfg)
}

/// InEx versus experienced team setup over pair sequences, tested per bin as
/// InEx greater.
pub fn pair_diversity(pairs: &[PairSequence], ds: &Dataset, impact: &ImpactTable, cfg: &AnalysisConfig) -> Comparison {
    summarize("pair", &pair_observations(pairs, ds, impact, cfg.include_first_as_inex), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Patent, Vocabulary};
    use crate::sequences::{build_pair_sequences, build_team_sequences};
    use std::collections::BTreeMap;

    /// `(id, year, inventors as letters, classes as letters)`
    fn ds(rows: &[(&str, i32, &str, &str)]) -> Dataset {
        let ids = |s: &str| -> Vec<u32> {
            let mut v: Vec<u32> = s.bytes().map(|b| (b - b'A') as u32).collect();
            v.sort_unstable();
            v
        };
        let mut rows = rows.to_vec();
        rows.sort_by_key(|r| r.0);
        Dataset {
            patents: rows
                .iter()
                .map(|&(id, year, inv, cls)| Patent {
                    id: id.into(),
                    year,
                    grant_year: None,
                    inventors: ids(inv).into_iter().map(InventorId).collect(),
                    classes: ids(cls).into_iter().map(ClassCode).collect(),
                })
                .collect(),
            inventors: Vocabulary::from_tokens(["A", "B", "C", "D", "E"]),
            classes: Vocabulary::from_tokens(["A", "B", "C"]),
            citations: vec![],
        }
    }

    fn flat(n: usize) -> ImpactTable {
        ImpactTable { basis: Default::default(), impacts: vec![1.0; n], cohort_means: BTreeMap::new() }
    }

    fn flags(obs: &[DiversityObs]) -> Vec<(u32, bool)> {
        obs.iter().map(|o| (o.r, o.inex)).collect()
    }

    #[test]
    fn new_class_is_inex_and_subset_is_ex() {
        let d = ds(&[("P1", 2000, "AB", "A"), ("P2", 2001, "AB", "AB"), ("P3", 2002, "AB", "A")]);
        let teams = build_team_sequences(&d);
        let obs = tech_observations(&teams, &d, &flat(3), false);
        assert_eq!(flags(&obs), vec![(2, true), (3, false)]);
        let obs = tech_observations(&teams, &d, &flat(3), true);
        assert_eq!(flags(&obs), vec![(1, true), (2, true), (3, false)]);
    }

    #[test]
    fn setup_history() {
        let d = ds(&[
            ("P1", 2000, "ABC", "A"),
            ("P2", 2001, "ABD", "A"),
            ("P3", 2002, "ABC", "A"),
            ("P4", 2003, "AB", "A"),
            ("P5", 2004, "AB", "A"),
        ]);
        let pairs = build_pair_sequences(&d);
        let ab = pairs.iter().find(|p| p.key.low() == InventorId(0) && p.key.high() == InventorId(1)).unwrap();
        let obs = pair_observations(std::slice::from_ref(ab), &d, &flat(5), false);
        // {D} new, {C} seen, {} new, {} seen
        assert_eq!(flags(&obs), vec![(2, true), (3, false), (4, true), (5, false)]);
    }

    #[test]
    fn partition_is_lossless() {
        let d = ds(&[
            ("P1", 2000, "AB", "A"),
            ("P2", 2001, "AB", "B"),
            ("P3", 2002, "AB", "AB"),
            ("P4", 2002, "BC", "C"),
            ("P5", 2003, "BC", "C"),
        ]);
        let teams = build_team_sequences(&d);
        let cfg = AnalysisConfig { min_samples: 1, ..Default::default() };
        let c = tech_diversity(&teams, &d, &flat(5), &cfg);
        let n_at = |key| c.greater.point(key).map_or(0, |p| p.n) + c.lesser.point(key).map_or(0, |p| p.n);
        assert_eq!(n_at(2), 2);
        assert_eq!(n_at(3), 1);
        assert!(c.greater.point(1).is_none() && c.lesser.point(1).is_none());
        assert_eq!(c.greater.provenance.include_first_as_inex, Some(false));
    }
}
