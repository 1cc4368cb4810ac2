//! Domain types shared by every stage of the pipeline.
//!
//! Inventors and technology classes are opaque tokens. Inside a loaded
//! [`Dataset`] they are interned into sorted vocabularies, so an
//! [`InventorId`] compares in the same order as the token it stands for.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("a team needs at least two inventors, got {0}")]
    SoloTeam(usize),
    #[error("inventor {0} appears more than once in the same set")]
    DuplicateInventor(u32),
    #[error("invalid hit spec `{0}`: {1}")]
    InvalidHitSpec(String, &'static str),
}

/// Interned inventor token; index into [`Dataset::inventors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InventorId(pub u32);

/// Interned technology class token; index into [`Dataset::classes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassCode(pub u32);

impl fmt::Display for InventorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// One patent application as it appears in the interchange files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatentRecord {
    pub patent_id: String,
    pub cohort_year: i32,
    pub grant_year: Option<i32>,
    pub inventors: Vec<String>,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationEdge {
    pub citing: String,
    pub cited: String,
}

/// Sorted, duplicate-free token table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let mut names: Vec<String> = tokens.into_iter().map(str::to_owned).collect();
        names.sort_unstable();
        names.dedup();
        Vocabulary { names }
    }

    /// Caller guarantees `names` is sorted and unique (used by the decoder).
    pub(crate) fn from_sorted(names: Vec<String>) -> Self {
        Vocabulary { names }
    }

    pub fn lookup(&self, token: &str) -> Option<u32> {
        self.names.binary_search_by(|n| n.as_str().cmp(token)).ok().map(|i| i as u32)
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A patent after interning. `inventors` and `classes` are sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patent {
    pub id: String,
    pub year: i32,
    pub grant_year: Option<i32>,
    pub inventors: Vec<InventorId>,
    pub classes: Vec<ClassCode>,
}

/// Which year a patent's impact is normalized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CohortBasis {
    #[default]
    Application,
    Grant,
}

impl FromStr for CohortBasis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "application" => Ok(CohortBasis::Application),
            "grant" => Ok(CohortBasis::Grant),
            other => Err(format!("unknown cohort basis `{other}`")),
        }
    }
}

/// The full, interned dataset held by a workspace.
///
/// Patents are ordered by `patent_id` (byte order), so patent index order and
/// id order coincide. Citations are `(citing, cited)` patent indices, sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub patents: Vec<Patent>,
    pub inventors: Vocabulary,
    pub classes: Vocabulary,
    pub citations: Vec<(u32, u32)>,
}

impl Dataset {
    /// Received citations per patent, indexed like `patents`.
    pub fn citation_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.patents.len()];
        for &(_, cited) in &self.citations {
            counts[cited as usize] += 1;
        }
        counts
    }

    pub fn cohort_year(&self, idx: usize, basis: CohortBasis) -> Option<i32> {
        let p = &self.patents[idx];
        match basis {
            CohortBasis::Application => Some(p.year),
            CohortBasis::Grant => p.grant_year,
        }
    }

    /// Observed (min, max) application year.
    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.patents.iter().map(|p| p.year).min()?;
        let max = self.patents.iter().map(|p| p.year).max()?;
        Some((min, max))
    }

    /// Number of distinct exact inventor sets with at least two members.
    pub fn count_teams(&self) -> usize {
        let mut sets: Vec<&[InventorId]> =
            self.patents.iter().filter(|p| p.inventors.len() >= 2).map(|p| p.inventors.as_slice()).collect();
        sets.sort_unstable();
        sets.dedup();
        sets.len()
    }
}

/// Exact inventor-set identity of a team: sorted, at least two members.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TeamKey(Box<[InventorId]>);

impl TeamKey {
    pub fn members(&self) -> &[InventorId] {
        &self.0
    }

    pub fn contains(&self, id: InventorId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// For slices already known to be sorted and unique.
    pub(crate) fn from_canonical(members: &[InventorId]) -> Self {
        debug_assert!(members.len() >= 2 && members.windows(2).all(|w| w[0] < w[1]));
        TeamKey(members.into())
    }
}

pub fn make_team_key(inventors: &[InventorId]) -> Result<TeamKey, ModelError> {
    if inventors.len() < 2 {
        return Err(ModelError::SoloTeam(inventors.len()));
    }
    let mut members = inventors.to_vec();
    members.sort_unstable();
    if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
        return Err(ModelError::DuplicateInventor(w[0].0));
    }
    Ok(TeamKey(members.into_boxed_slice()))
}

/// Unordered pair of distinct inventors, stored as `(low, high)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    low: InventorId,
    high: InventorId,
}

impl PairKey {
    pub fn new(a: InventorId, b: InventorId) -> Option<PairKey> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(PairKey { low: a, high: b }),
            std::cmp::Ordering::Greater => Some(PairKey { low: b, high: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn low(&self) -> InventorId {
        self.low
    }

    pub fn high(&self) -> InventorId {
        self.high
    }
}

/// All unordered pairs of a set, in lexicographic order. Fewer than two
/// members yields no pairs.
pub fn enumerate_pairs(inventors: &[InventorId]) -> Vec<PairKey> {
    let mut members = inventors.to_vec();
    members.sort_unstable();
    members.dedup();
    let mut pairs = Vec::with_capacity(members.len() * members.len().saturating_sub(1) / 2);
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            pairs.push(PairKey { low: a, high: b });
        }
    }
    pairs
}

/// Normalized impact per patent, indexed like [`Dataset::patents`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTable {
    pub basis: CohortBasis,
    pub impacts: Vec<f64>,
    pub cohort_means: BTreeMap<i32, f64>,
}

impl ImpactTable {
    pub fn get(&self, idx: usize) -> f64 {
        self.impacts[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitMode {
    Quantile,
    Absolute,
}

/// Hit criterion. A patent is a hit iff its impact is strictly greater than
/// the bound cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitSpec {
    pub mode: HitMode,
    pub value: f64,
}

impl HitSpec {
    pub fn top_fraction(q: f64) -> Result<HitSpec, ModelError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ModelError::InvalidHitSpec(q.to_string(), "quantile must lie in (0, 1)"));
        }
        Ok(HitSpec { mode: HitMode::Quantile, value: q })
    }

    pub fn greater_than(cutoff: f64) -> Result<HitSpec, ModelError> {
        if !(cutoff.is_finite() && cutoff >= 0.0) {
            return Err(ModelError::InvalidHitSpec(
                cutoff.to_string(),
                "absolute cutoff must be finite and nonnegative",
            ));
        }
        Ok(HitSpec { mode: HitMode::Absolute, value: cutoff })
    }
}

impl Default for HitSpec {
    fn default() -> Self {
        HitSpec { mode: HitMode::Quantile, value: 0.10 }
    }
}

/// Accepts `topN` (top N percent, e.g. `top10`) and `gt:X` (impact > X).
impl FromStr for HitSpec {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why| ModelError::InvalidHitSpec(s.to_owned(), why);
        if let Some(pct) = s.strip_prefix("top") {
            let pct: f64 = pct.parse().map_err(|_| bad("expected a percentage after `top`"))?;
            HitSpec::top_fraction(pct / 100.0).map_err(|_| bad("percentage must lie in (0, 100)"))
        } else if let Some(x) = s.strip_prefix("gt:") {
            let x: f64 = x.parse().map_err(|_| bad("expected a number after `gt:`"))?;
            HitSpec::greater_than(x)
        } else {
            Err(bad("expected `topN` or `gt:X`"))
        }
    }
}

impl fmt::Display for HitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            HitMode::Quantile => write!(f, "top{}", self.value * 100.0),
            HitMode::Absolute => write!(f, "gt:{}", self.value),
        }
    }
}
