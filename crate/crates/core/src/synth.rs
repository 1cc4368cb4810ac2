//! Seeded simulator of inventor careers with plantable effects.
//!
//! Teams continue with a probability that grows with their last realized
//! impact (`alpha`), lose log-impact with each repetition (`beta`), and gain
//! log-impact on inexperienced patents (`gamma`). A patent is inexperienced
//! when a repeating team uses a class new to its history, or when a newly
//! formed team contains a pair that has collaborated before.
//!
//! All randomness comes from one ChaCha8 stream seeded with `seed`. Draw
//! order, per year: for each continuing team (in the order they were
//! continued) the class draws then one normal draw; then new formations until
//! the year holds `patents_per_year` patents (solo draw, size draw, spinoff
//! draw and its picks, member draws, class draws, normal draw); then one continuation draw per team
//! patent in patent order. After the last year, citing patents are sampled
//! per cited patent in id order.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ingest::{csv_field, CitationRows, PatentRows, CITATIONS_HEADER, PATENTS_HEADER};
use crate::model::{CitationEdge, PatentRecord};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid generator config: {0}")]
    Infeasible(String),
    #[error("cannot parse generator config: {0}")]
    Parse(String),
}

/// Generator settings; the JSON form is a flat object with these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_inventors: u32,
    /// Inclusive `(start, end)` years.
    pub years: (i32, i32),
    pub patents_per_year: u32,
    /// `(mu, sigma)` of the log-normal team size, rounded and truncated to
    /// `[2, max_team_size]`.
    pub team_size_lognormal: (f64, f64),
    pub max_team_size: u32,
    pub solo_fraction: f64,
    /// `(mu0, sigma0)` of the per-patent log-impact.
    pub base_impact_lognormal: (f64, f64),
    /// Continuation probability at zero impact.
    pub p0: f64,
    #[serde(alias = "continuation_gain")]
    pub alpha: f64,
    #[serde(alias = "decline_rate")]
    pub beta: f64,
    #[serde(alias = "diversity_boost")]
    pub gamma: f64,
    pub class_pool: u32,
    /// Probability that a repeating team adds a class new to its history.
    pub p_new_class: f64,
    /// Probability that a member of a new team is drawn from last year's
    /// team inventors rather than from the whole population.
    pub p_recruit: f64,
    /// Probability that a new team is built around two members of one of
    /// last year's teams.
    pub p_spinoff: f64,
    pub mean_citations: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 1,
            n_inventors: 20_000,
            years: (1976, 2005),
            patents_per_year: 1_000,
            team_size_lognormal: (1.0, 0.35),
            max_team_size: 10,
            solo_fraction: 0.2,
            base_impact_lognormal: (0.0, 0.5),
            p0: 0.5,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            class_pool: 200,
            p_new_class: 0.3,
            p_recruit: 0.5,
            p_spinoff: 0.3,
            mean_citations: 20.0,
        }
    }
}

impl GenConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: GenConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Infeasible(msg.to_owned()));
        let reals = [
            self.team_size_lognormal.0,
            self.team_size_lognormal.1,
            self.solo_fraction,
            self.base_impact_lognormal.0,
            self.base_impact_lognormal.1,
            self.p0,
            self.alpha,
            self.beta,
            self.gamma,
            self.p_new_class,
            self.p_recruit,
            self.p_spinoff,
            self.mean_citations,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return bad("all real parameters must be finite");
        }
        if self.years.1 < self.years.0 {
            return bad("years: end precedes start");
        }
        if self.max_team_size < 2 {
            return bad("max_team_size must be at least 2");
        }
        if self.n_inventors < self.max_team_size {
            return bad("n_inventors must be at least max_team_size");
        }
        if self.team_size_lognormal.1 < 0.0 || self.base_impact_lognormal.1 < 0.0 {
            return bad("log-normal sigmas must be nonnegative");
        }
        if self.beta < 0.0 {
            return bad("beta must be nonnegative");
        }
        if self.class_pool == 0 {
            return bad("class_pool must be positive");
        }
        if self.mean_citations < 0.0 {
            return bad("mean_citations must be nonnegative");
        }
        Ok(())
    }
}

/// Generated interchange rows, ready for CSV output or direct ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<PatentRecord>,
    pub edges: Vec<CitationEdge>,
}

impl SynthOutput {
    pub fn rows(&self) -> (PatentRows, CitationRows) {
        (
            PatentRows::from_records("<synth>", self.records.clone()),
            CitationRows::from_edges("<synth>", self.edges.clone()),
        )
    }

    pub fn patents_csv(&self) -> Vec<u8> {
        let mut w = Vec::new();
        writeln!(w, "{}", PATENTS_HEADER.join(",")).unwrap();
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{}",
                csv_field(&r.patent_id),
                r.cohort_year,
                csv_field(&r.inventors.join(";")),
                csv_field(&r.classes.join(";"))
            )
            .unwrap();
        }
        w
    }

    pub fn citations_csv(&self) -> Vec<u8> {
        let mut w = Vec::new();
        writeln!(w, "{}", CITATIONS_HEADER.join(",")).unwrap();
        for e in &self.edges {
            writeln!(w, "{},{}", csv_field(&e.citing), csv_field(&e.cited)).unwrap();
        }
        w
    }

    /// Writes `patents.csv` and `citations.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> io::Result<()> {
        fs::write(dir.join("patents.csv"), self.patents_csv())?;
        fs::write(dir.join("citations.csv"), self.citations_csv())
    }
}

struct Team {
    members: Vec<u32>,
    r: u32,
    /// Sorted class history.
    classes: Vec<u32>,
    last_year: i32,
}

struct Draft {
    inventors: Vec<u32>,
    classes: Vec<u32>,
    log_impact: f64,
    team: Option<usize>,
}

struct Sim<'a> {
    cfg: &'a GenConfig,
    rng: ChaCha8Rng,
    teams: Vec<Team>,
    index: HashMap<Vec<u32>, usize>,
    pairs_seen: HashSet<(u32, u32)>,
}

fn clamp01(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

impl Sim<'_> {
    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn log_impact(&mut self, r: u32, inex: bool) -> f64 {
        let (mu0, sigma0) = self.cfg.base_impact_lognormal;
        let z = self.normal();
        mu0 - self.cfg.beta * (r - 1) as f64 + if inex { self.cfg.gamma } else { 0.0 } + sigma0 * z
    }

    fn fresh_classes(&mut self) -> Vec<u32> {
        let pool = self.cfg.class_pool;
        let mut c = vec![self.rng.random_range(0..pool)];
        if pool > 1 && self.rng.random_bool(0.3) {
            let second = (c[0] + self.rng.random_range(1..pool)) % pool;
            c.push(second);
            c.sort_unstable();
        }
        c
    }

    /// Next patent of an existing team.
    fn repeat(&mut self, t: usize, year: i32) -> Draft {
        let pool = self.cfg.class_pool as usize;
        let add_new = self.rng.random_bool(clamp01(self.cfg.p_new_class));
        let hist = &self.teams[t].classes;
        let old = hist[self.rng.random_range(0..hist.len())];
        let mut classes = vec![old];
        let mut inex = false;
        if add_new && hist.len() < pool {
            // k-th class absent from the history
            let mut fresh = self.rng.random_range(0..(pool - hist.len()) as u32);
            for &h in hist {
                if h > fresh {
                    break;
                }
                fresh += 1;
            }
            classes.push(fresh);
            classes.sort_unstable();
            inex = true;
        }
        let team = &mut self.teams[t];
        team.r += 1;
        team.last_year = year;
        let r = team.r;
        for &c in &classes {
            if let Err(pos) = team.classes.binary_search(&c) {
                team.classes.insert(pos, c);
            }
        }
        let inventors = team.members.clone();
        let log_impact = self.log_impact(r, inex);
        Draft { inventors, classes, log_impact, team: Some(t) }
    }

    fn draw_member(&mut self, recent: &[u32], taken: &[u32]) -> u32 {
        if !recent.is_empty() && self.rng.random_bool(clamp01(self.cfg.p_recruit)) {
            let m = recent[self.rng.random_range(0..recent.len())];
            if !taken.contains(&m) {
                return m;
            }
        }
        loop {
            let m = self.rng.random_range(0..self.cfg.n_inventors);
            if !taken.contains(&m) {
                return m;
            }
        }
    }

    /// One new formation: a solo patent, a new team, or (when the drawn set
    /// already exists) the next patent of that team. `None` when the drawn
    /// team already patented this year.
    fn form(&mut self, year: i32, recent: &[u32], recent_teams: &[usize]) -> Option<Draft> {
        if self.rng.random_bool(clamp01(self.cfg.solo_fraction)) {
            let inventor = self.rng.random_range(0..self.cfg.n_inventors);
            let classes = self.fresh_classes();
            let log_impact = self.log_impact(1, false);
            return Some(Draft { inventors: vec![inventor], classes, log_impact, team: None });
        }
        let (mu, sigma) = self.cfg.team_size_lognormal;
        let z = self.normal();
        let size = (mu + sigma * z).exp().round().clamp(2.0, self.cfg.max_team_size as f64) as usize;
        let mut members = Vec::with_capacity(size);
        if !recent_teams.is_empty() && self.rng.random_bool(clamp01(self.cfg.p_spinoff)) {
            let source = &self.teams[recent_teams[self.rng.random_range(0..recent_teams.len())]].members;
            let picked = index::sample(&mut self.rng, source.len(), 2);
            members.extend(picked.iter().map(|i| source[i]));
        }
        while members.len() < size {
            let m = self.draw_member(recent, &members);
            members.push(m);
        }
        members.sort_unstable();
        if let Some(&t) = self.index.get(&members) {
            if self.teams[t].last_year == year {
                return None;
            }
            return Some(self.repeat(t, year));
        }
        let classes = self.fresh_classes();
        let inex = self.cfg.gamma != 0.0
            && members
                .iter()
                .enumerate()
                .any(|(i, &a)| members[i + 1..].iter().any(|&b| self.pairs_seen.contains(&(a, b))));
        let t = self.teams.len();
        self.teams.push(Team { members: members.clone(), r: 1, classes: classes.clone(), last_year: year });
        self.index.insert(members.clone(), t);
        let log_impact = self.log_impact(1, inex);
        Some(Draft { inventors: members, classes, log_impact, team: Some(t) })
    }
}

/// Integer citation counts proportional to `exp(log_impact)`, summing to
/// `round(mean_citations * n)`, by largest remainder (ties to lower index).
fn cohort_citations(log_impacts: &[f64], mean_citations: f64) -> Vec<u64> {
    let n = log_impacts.len();
    let total = (mean_citations * n as f64).round() as u64;
    if n == 0 || total == 0 {
        return vec![0; n];
    }
    let top = log_impacts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_impacts.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

pub fn generate(cfg: &GenConfig) -> Result<SynthOutput, ConfigError> {
    cfg.validate()?;
    let mut sim = Sim {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        teams: Vec::new(),
        index: HashMap::new(),
        pairs_seen: HashSet::new(),
    };
    let mut records = Vec::new();
    let mut counts_all: Vec<u64> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut recent: Vec<u32> = Vec::new();
    let mut recent_teams: Vec<usize> = Vec::new();
    let target = cfg.patents_per_year as usize;
    for year in cfg.years.0..=cfg.years.1 {
        let mut drafts: Vec<Draft> = Vec::with_capacity(target);
        for t in std::mem::take(&mut active) {
            drafts.push(sim.repeat(t, year));
        }
        let mut misses = 0usize;
        while drafts.len() < target && misses <= 100 * target {
            match sim.form(year, &recent, &recent_teams) {
                Some(d) => drafts.push(d),
                None => misses += 1,
            }
        }
        let logs: Vec<f64> = drafts.iter().map(|d| d.log_impact).collect();
        let counts = cohort_citations(&logs, cfg.mean_citations);
        let mean = counts.iter().sum::<u64>() as f64 / counts.len().max(1) as f64;
        recent.clear();
        recent_teams.clear();
        for (d, &c) in drafts.iter().zip(&counts) {
            let Some(t) = d.team else { continue };
            let impact = if mean > 0.0 { c as f64 / mean } else { 0.0 };
            if sim.rng.random_bool(clamp01(cfg.p0 + cfg.alpha * impact)) {
                active.push(t);
            }
            recent.extend_from_slice(&d.inventors);
            recent_teams.push(t);
            if cfg.gamma != 0.0 {
                for (i, &a) in d.inventors.iter().enumerate() {
                    for &b in &d.inventors[i + 1..] {
                        sim.pairs_seen.insert((a, b));
                    }
                }
            }
        }
        for d in drafts {
            records.push(PatentRecord {
                patent_id: format!("S{:08}", records.len()),
                cohort_year: year,
                grant_year: None,
                inventors: d.inventors.iter().map(|i| format!("N{i:07}")).collect(),
                classes: d.classes.iter().map(|c| format!("C{c:04}")).collect(),
            });
        }
        counts_all.extend(counts);
    }
    let n = records.len();
    let mut edges = Vec::with_capacity(counts_all.iter().sum::<u64>() as usize);
    for (cited, &c) in counts_all.iter().enumerate() {
        let amount = (c as usize).min(n.saturating_sub(1));
        if amount == 0 {
            continue;
        }
        for j in index::sample(&mut sim.rng, n - 1, amount) {
            let citing = if j >= cited { j + 1 } else { j };
            edges.push(CitationEdge {
                citing: records[citing].patent_id.clone(),
                cited: records[cited].patent_id.clone(),
            });
        }
    }
    Ok(SynthOutput { records, edges })
}
