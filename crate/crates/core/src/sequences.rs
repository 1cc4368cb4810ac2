//! Time-ordered repetition sequences for exact-set teams and inventor pairs,
//! hit identification, and switch-event detection.
//!
//! Within a sequence, entries are ordered by cohort year and then by patent
//! id; `r` is the 1-based position.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Dataset, ImpactTable, InventorId, PairKey, TeamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeqEntry {
    /// Index into [`Dataset::patents`].
    pub patent: u32,
    pub year: i32,
    pub r: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeamSequence {
    pub key: TeamKey,
    pub entries: Vec<SeqEntry>,
}

impl TeamSequence {
    pub fn first_year(&self) -> i32 {
        self.entries[0].year
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSequence {
    pub key: PairKey,
    pub entries: Vec<SeqEntry>,
}

impl PairSequence {
    /// Co-inventors on `entry` other than the pair itself.
    pub fn others(&self, entry: &SeqEntry, ds: &Dataset) -> Vec<InventorId> {
        ds.patents[entry.patent as usize]
            .inventors
            .iter()
            .copied()
            .filter(|&i| i != self.key.low() && i != self.key.high())
            .collect()
    }
}

fn entries_from(patents: &[u32], ds: &Dataset) -> Vec<SeqEntry> {
    patents
        .iter()
        .enumerate()
        .map(|(k, &p)| SeqEntry { patent: p, year: ds.patents[p as usize].year, r: k as u32 + 1 })
        .collect()
}

/// Partitions every multi-inventor patent into the sequence of its exact
/// inventor set. Sequences come back sorted by key.
pub fn build_team_sequences(ds: &Dataset) -> Vec<TeamSequence> {
    let pats = &ds.patents;
    let mut idx: Vec<u32> = (0..pats.len() as u32).filter(|&i| pats[i as usize].inventors.len() >= 2).collect();
    // patent index order is patent_id order, so it is the tie breaker
    idx.par_sort_unstable_by(|&a, &b| {
        let (pa, pb) = (&pats[a as usize], &pats[b as usize]);
        pa.inventors.cmp(&pb.inventors).then(pa.year.cmp(&pb.year)).then(a.cmp(&b))
    });
    idx.chunk_by(|&a, &b| pats[a as usize].inventors == pats[b as usize].inventors)
        .map(|group| TeamSequence {
            key: TeamKey::from_canonical(&pats[group[0] as usize].inventors),
            entries: entries_from(group, ds),
        })
        .collect()
}

/// Every multi-inventor patent contributes one entry to each of its pairs.
/// Sequences come back sorted by pair.
pub fn build_pair_sequences(ds: &Dataset) -> Vec<PairSequence> {
    let mut rows: Vec<(InventorId, InventorId, i32, u32)> = ds
        .patents
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, p)| {
            let inv = &p.inventors;
            (0..inv.len()).flat_map(move |a| (a + 1..inv.len()).map(move |b| (inv[a], inv[b], p.year, i as u32)))
        })
        .collect();
    rows.par_sort_unstable();
    rows.chunk_by(|x, y| x.0 == y.0 && x.1 == y.1)
        .map(|group| {
            let patents: Vec<u32> = group.iter().map(|g| g.3).collect();
            PairSequence {
                key: PairKey::new(group[0].0, group[0].1).expect("inventors on a patent are distinct"),
                entries: entries_from(&patents, ds),
            }
        })
        .collect()
}

/// Maps each patent to the index of its team sequence (solo patents: None).
pub fn team_of_patent(seqs: &[TeamSequence], n_patents: usize) -> Vec<Option<u32>> {
    let mut out = vec![None; n_patents];
    for (t, s) in seqs.iter().enumerate() {
        for e in &s.entries {
            out[e.patent as usize] = Some(t as u32);
        }
    }
    out
}

/// A hit inside a team sequence: `(sequence index, 0-based entry position)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct HitRef {
    pub team: u32,
    pub position: u32,
}

/// Every team patent with impact strictly above `cutoff`.
pub fn find_hits(seqs: &[TeamSequence], impact: &ImpactTable, cutoff: f64) -> Vec<HitRef> {
    seqs.iter()
        .enumerate()
        .flat_map(|(t, s)| {
            s.entries
                .iter()
                .enumerate()
                .filter(move |(_, e)| impact.get(e.patent as usize) > cutoff)
                .map(move |(pos, _)| HitRef { team: t as u32, position: pos as u32 })
        })
        .collect()
}

/// A member of a hit team appearing in a different team whose first patent
/// is dated after the hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SwitchEvent {
    pub hit: HitRef,
    /// Index of the new team's sequence.
    pub new_team: u32,
    /// Lowest shared member; the event is counted once per new team.
    pub mover: InventorId,
    /// Patent index of repetition 1 of the new team.
    pub first_patent: u32,
    /// 1 + number of hit-team patents from the hit through the last one
    /// dated no later than the new team's first patent.
    pub aligned_r: u32,
}

/// Inventor -> team sequence indices that include the inventor, ascending.
pub fn teams_by_inventor(seqs: &[TeamSequence]) -> Vec<Vec<u32>> {
    let n = seqs.iter().flat_map(|s| s.key.members()).map(|m| m.0 as usize + 1).max().unwrap_or(0);
    let mut out: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (t, s) in seqs.iter().enumerate() {
        for m in s.key.members() {
            out[m.0 as usize].push(t as u32);
        }
    }
    out
}

pub fn find_switch_events(hits: &[HitRef], seqs: &[TeamSequence]) -> Vec<SwitchEvent> {
    let by_inventor = teams_by_inventor(seqs);
    hits.par_iter()
        .flat_map_iter(|&hit| {
            let team = &seqs[hit.team as usize];
            let after_hit = &team.entries[hit.position as usize..];
            let hit_year = after_hit[0].year;
            let mut candidates: Vec<(u32, InventorId)> = team
                .key
                .members()
                .iter()
                .flat_map(|&m| by_inventor[m.0 as usize].iter().map(move |&t| (t, m)))
                .filter(|&(t, _)| t != hit.team && seqs[t as usize].first_year() > hit_year)
                .collect();
            candidates.sort_unstable();
            candidates.dedup_by_key(|c| c.0);
            candidates.into_iter().map(move |(t, mover)| {
                let first = seqs[t as usize].entries[0];
                // same-year hit-team patents count before the new team's first
                let upto = after_hit.partition_point(|e| e.year <= first.year) as u32;
                SwitchEvent { hit, new_team: t, mover, first_patent: first.patent, aligned_r: 1 + upto }
            })
        })
        .collect()
}

fn key_tokens(ids: &[InventorId], ds: &Dataset) -> String {
    ids.iter().map(|i| ds.inventors.name(i.0)).collect::<Vec<_>>().join(";")
}

pub fn write_team_csv<W: Write>(seqs: &[TeamSequence], ds: &Dataset, mut w: W) -> io::Result<()> {
    writeln!(w, "key,patent_id,year,r")?;
    for s in seqs {
        let key = key_tokens(s.key.members(), ds);
        for e in &s.entries {
            writeln!(w, "{key},{},{},{}", ds.patents[e.patent as usize].id, e.year, e.r)?;
        }
    }
    Ok(())
}

pub fn write_pair_csv<W: Write>(seqs: &[PairSequence], ds: &Dataset, mut w: W) -> io::Result<()> {
    writeln!(w, "key,patent_id,year,r,others")?;
    for s in seqs {
        let key = key_tokens(&[s.key.low(), s.key.high()], ds);
        for e in &s.entries {
            let others = key_tokens(&s.others(e, ds), ds);
            writeln!(w, "{key},{},{},{},{others}", ds.patents[e.patent as usize].id, e.year, e.r)?;
        }
    }
    Ok(())
}

const SEQ_MAGIC: &[u8; 4] = b"CLSQ";

/// Binary dump of sequences: magic, u8 kind (0 team, 1 pair), u32 count,
/// then per sequence the member ids and `(patent, year, r)` entries.
pub fn encode_sequences<'a, I>(kind: u8, seqs: I) -> Vec<u8>
where
    I: IntoIterator<Item = (&'a [InventorId], &'a [SeqEntry])>,
    I::IntoIter: ExactSizeIterator,
{
    let seqs = seqs.into_iter();
    let mut buf = Vec::new();
    buf.extend_from_slice(SEQ_MAGIC);
    buf.push(kind);
    buf.extend_from_slice(&(seqs.len() as u32).to_le_bytes());
    for (members, entries) in seqs {
        buf.extend_from_slice(&(members.len() as u32).to_le_bytes());
        for m in members {
            buf.extend_from_slice(&m.0.to_le_bytes());
        }
        buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for e in entries {
            buf.extend_from_slice(&e.patent.to_le_bytes());
            buf.extend_from_slice(&e.year.to_le_bytes());
            buf.extend_from_slice(&e.r.to_le_bytes());
        }
    }
    buf
}

pub fn encode_team_sequences(seqs: &[TeamSequence]) -> Vec<u8> {
    encode_sequences(0, seqs.iter().map(|s| (s.key.members(), s.entries.as_slice())))
}

pub fn encode_pair_sequences(seqs: &[PairSequence]) -> Vec<u8> {
    let keys: Vec<[InventorId; 2]> = seqs.iter().map(|s| [s.key.low(), s.key.high()]).collect();
    encode_sequences(1, keys.iter().zip(seqs).map(|(k, s)| (k.as_slice(), s.entries.as_slice())))
}

/// Inverse of [`encode_sequences`]: `(kind, [(members, entries)])`.
#[allow(clippy::type_complexity)]
pub fn decode_sequences(bytes: &[u8]) -> Option<(u8, Vec<(Vec<InventorId>, Vec<SeqEntry>)>)> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Option<&[u8]> {
        let s = bytes.get(pos..pos + n)?;
        pos += n;
        Some(s)
    };
    if take(4)? != SEQ_MAGIC {
        return None;
    }
    let kind = take(1)?[0];
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    let count = u32_at(take(4)?);
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let k = u32_at(take(4)?);
        let mut members = Vec::with_capacity(k as usize);
        for _ in 0..k {
            members.push(InventorId(u32_at(take(4)?)));
        }
        let m = u32_at(take(4)?);
        let mut entries = Vec::with_capacity(m as usize);
        for _ in 0..m {
            let patent = u32_at(take(4)?);
            let year = i32::from_le_bytes(take(4)?.try_into().unwrap());
            let r = u32_at(take(4)?);
            entries.push(SeqEntry { patent, year, r });
        }
        out.push((members, entries));
    }
    if pos != bytes.len() {
        return None;
    }
    Some((kind, out))
}
