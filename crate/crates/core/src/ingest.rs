//! Parsing and validation of the interchange CSV files, and materialization
//! of a workspace.
//!
//! `patents.csv` has header `patent_id,year,inventors,classes` with an
//! optional trailing `grant_year` column; `inventors` and `classes` hold
//! `;`-separated tokens. `citations.csv` has header `citing,cited`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CitationEdge, ClassCode, Dataset, InventorId, Patent, PatentRecord, Vocabulary};
use crate::workspace::{IngestConfig, Manifest, Workspace, WorkspaceError};

pub(crate) const PATENTS_HEADER: [&str; 4] = ["patent_id", "year", "inventors", "classes"];
const GRANT_COLUMN: &str = "grant_year";
pub(crate) const CITATIONS_HEADER: [&str; 2] = ["citing", "cited"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: PathBuf, expected: String, found: String },
    #[error("{path}:{line}: malformed row: {reason}")]
    Malformed { path: PathBuf, line: u64, reason: String },
    #[error("{path}:{line}: duplicate patent_id `{id}` (first seen on line {first_line})")]
    DuplicatePatent { path: PathBuf, line: u64, id: String, first_line: u64 },
    #[error("{path}:{line}: inventor `{inventor}` listed twice on the same patent")]
    DuplicateInventor { path: PathBuf, line: u64, inventor: String },
    #[error("{path}:{line}: year {year} outside declared duration {min}-{max}")]
    YearOutOfRange { path: PathBuf, line: u64, year: i32, min: i32, max: i32 },
    #[error("{path}:{line}: citation {citing} -> {cited} cannot be resolved ({reason})")]
    UnresolvedCitation { path: PathBuf, line: u64, citing: String, cited: String, reason: &'static str },
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

/// Table-1 style summary of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n_patents: usize,
    pub n_inventors: usize,
    pub n_teams: usize,
    pub n_citations_kept: usize,
    pub n_citations_dropped: usize,
    pub duration: Option<(i32, i32)>,
}

/// Patent rows together with the source line each came from.
#[derive(Debug, Clone, Default)]
pub struct PatentRows {
    pub source: PathBuf,
    pub records: Vec<PatentRecord>,
    pub lines: Vec<u64>,
}

impl PatentRows {
    /// In-memory records, numbered as if written one per line after a header.
    pub fn from_records(source: impl Into<PathBuf>, records: Vec<PatentRecord>) -> Self {
        let lines = (0..records.len() as u64).map(|i| i + 2).collect();
        PatentRows { source: source.into(), records, lines }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CitationRows {
    pub source: PathBuf,
    pub edges: Vec<CitationEdge>,
    pub lines: Vec<u64>,
}

impl CitationRows {
    pub fn from_edges(source: impl Into<PathBuf>, edges: Vec<CitationEdge>) -> Self {
        let lines = (0..edges.len() as u64).map(|i| i + 2).collect();
        CitationRows { source: source.into(), edges, lines }
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IngestError::Io { path: path.to_owned(), source },
        kind => IngestError::Malformed { path: path.to_owned(), line, reason: format!("{kind:?}") },
    }
}

fn split_tokens(field: &str) -> Option<Vec<String>> {
    let tokens: Vec<String> = field.split(';').map(|t| t.trim().to_owned()).collect();
    if tokens.iter().any(String::is_empty) {
        None
    } else {
        Some(tokens)
    }
}

pub fn read_patents_csv(path: &Path) -> Result<PatentRows, IngestError> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let found: Vec<&str> = header.iter().collect();
    let with_grant = match found.as_slice() {
        h if h == PATENTS_HEADER => false,
        [a, b, c, d, g] if [*a, *b, *c, *d] == PATENTS_HEADER && *g == GRANT_COLUMN => true,
        _ => {
            return Err(IngestError::Header {
                path: path.to_owned(),
                expected: format!("{}[,{GRANT_COLUMN}]", PATENTS_HEADER.join(",")),
                found: found.join(","),
            })
        }
    };
    let width = if with_grant { 5 } else { 4 };
    let mut rows = PatentRows { source: path.to_owned(), ..Default::default() };
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| IngestError::Malformed { path: path.to_owned(), line, reason };
        if rec.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", rec.len())));
        }
        let patent_id = rec[0].trim();
        if patent_id.is_empty() {
            return Err(bad("empty patent_id".into()));
        }
        let year: i32 = rec[1].trim().parse().map_err(|_| bad(format!("invalid year `{}`", &rec[1])))?;
        let inventors = split_tokens(&rec[2]).ok_or_else(|| bad("empty inventor token".into()))?;
        let classes = split_tokens(&rec[3]).ok_or_else(|| bad("empty class token".into()))?;
        let grant_year = if with_grant && !rec[4].trim().is_empty() {
            Some(rec[4].trim().parse().map_err(|_| bad(format!("invalid grant_year `{}`", &rec[4])))?)
        } else {
            None
        };
        rows.records.push(PatentRecord {
            patent_id: patent_id.to_owned(),
            cohort_year: year,
            grant_year,
            inventors,
            classes,
        });
        rows.lines.push(line);
    }
    Ok(rows)
}

pub fn read_citations_csv(path: &Path) -> Result<CitationRows, IngestError> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != CITATIONS_HEADER {
        return Err(IngestError::Header {
            path: path.to_owned(),
            expected: CITATIONS_HEADER.join(","),
            found: found.join(","),
        });
    }
    let mut rows = CitationRows { source: path.to_owned(), ..Default::default() };
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 || rec[0].trim().is_empty() || rec[1].trim().is_empty() {
            return Err(IngestError::Malformed {
                path: path.to_owned(),
                line,
                reason: "expected two nonempty fields `citing,cited`".into(),
            });
        }
        rows.edges.push(CitationEdge { citing: rec[0].trim().to_owned(), cited: rec[1].trim().to_owned() });
        rows.lines.push(line);
    }
    Ok(rows)
}

/// Validates rows and interns them into a [`Dataset`]. Patents are ordered by
/// id; citations to unknown patents (or self-citations) are dropped and
/// counted unless `config.strict` is set.
pub fn build_dataset(
    patents: &PatentRows,
    citations: &CitationRows,
    config: &IngestConfig,
) -> Result<(Dataset, IngestReport), IngestError> {
    let ppath = &patents.source;
    let mut first_seen: HashMap<&str, u64> = HashMap::with_capacity(patents.records.len());
    for (rec, &line) in patents.records.iter().zip(&patents.lines) {
        if let Some(&first_line) = first_seen.get(rec.patent_id.as_str()) {
            return Err(IngestError::DuplicatePatent {
                path: ppath.clone(),
                line,
                id: rec.patent_id.clone(),
                first_line,
            });
        }
        first_seen.insert(&rec.patent_id, line);
        if rec.inventors.is_empty() || rec.classes.is_empty() {
            return Err(IngestError::Malformed {
                path: ppath.clone(),
                line,
                reason: "a patent needs at least one inventor and one class".into(),
            });
        }
        let mut sorted: Vec<&str> = rec.inventors.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(IngestError::DuplicateInventor { path: ppath.clone(), line, inventor: w[0].to_owned() });
        }
        if let Some((min, max)) = config.declared_duration {
            if rec.cohort_year < min || rec.cohort_year > max {
                return Err(IngestError::YearOutOfRange { path: ppath.clone(), line, year: rec.cohort_year, min, max });
            }
        }
        if config.cohort == crate::model::CohortBasis::Grant && rec.grant_year.is_none() {
            return Err(IngestError::Malformed {
                path: ppath.clone(),
                line,
                reason: "grant-year cohorts requested but grant_year is missing".into(),
            });
        }
    }
    drop(first_seen);

    let inventors =
        Vocabulary::from_tokens(patents.records.iter().flat_map(|r| r.inventors.iter().map(String::as_str)));
    let classes = Vocabulary::from_tokens(patents.records.iter().flat_map(|r| r.classes.iter().map(String::as_str)));
    let inv_index: HashMap<&str, u32> =
        inventors.names().iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();
    let cls_index: HashMap<&str, u32> =
        classes.names().iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();

    let mut order: Vec<usize> = (0..patents.records.len()).collect();
    order.sort_unstable_by(|&a, &b| patents.records[a].patent_id.cmp(&patents.records[b].patent_id));
    let interned: Vec<Patent> = order
        .iter()
        .map(|&i| {
            let r = &patents.records[i];
            let mut inv: Vec<InventorId> = r.inventors.iter().map(|t| InventorId(inv_index[t.as_str()])).collect();
            inv.sort_unstable();
            let mut cls: Vec<ClassCode> = r.classes.iter().map(|t| ClassCode(cls_index[t.as_str()])).collect();
            cls.sort_unstable();
            cls.dedup();
            Patent {
                id: r.patent_id.clone(),
                year: r.cohort_year,
                grant_year: r.grant_year,
                inventors: inv,
                classes: cls,
            }
        })
        .collect();
    drop(inv_index);
    drop(cls_index);

    let id_index: HashMap<&str, u32> = interned.iter().enumerate().map(|(i, p)| (p.id.as_str(), i as u32)).collect();
    let mut kept = Vec::with_capacity(citations.edges.len());
    let mut dropped = 0usize;
    for (edge, &line) in citations.edges.iter().zip(&citations.lines) {
        let citing = id_index.get(edge.citing.as_str());
        let cited = id_index.get(edge.cited.as_str());
        let reason = match (citing, cited) {
            (Some(&a), Some(&b)) if a != b => {
                kept.push((a, b));
                continue;
            }
            (Some(_), Some(_)) => "self-citation",
            _ => "unknown patent",
        };
        if config.strict {
            return Err(IngestError::UnresolvedCitation {
                path: citations.source.clone(),
                line,
                citing: edge.citing.clone(),
                cited: edge.cited.clone(),
                reason,
            });
        }
        dropped += 1;
    }
    drop(id_index);
    kept.sort_unstable();

    let ds = Dataset { patents: interned, inventors, classes, citations: kept };
    let report = IngestReport {
        n_patents: ds.patents.len(),
        n_inventors: ds.inventors.len(),
        n_teams: ds.count_teams(),
        n_citations_kept: ds.citations.len(),
        n_citations_dropped: dropped,
        duration: config.declared_duration.or_else(|| ds.year_range()),
    };
    Ok((ds, report))
}

/// Writes the dataset and its manifest. Any previously computed impact table
/// is removed because it no longer matches.
pub fn materialize(
    ws: &Workspace,
    ds: &Dataset,
    report: &IngestReport,
    config: &IngestConfig,
) -> Result<(), IngestError> {
    ws.create_dir()?;
    ws.remove_impact()?;
    ws.write_dataset(ds)?;
    ws.write_manifest(&Manifest {
        format_version: 1,
        duration: report.duration,
        n_patents: report.n_patents,
        n_inventors: report.n_inventors,
        n_teams: report.n_teams,
        n_citations_kept: report.n_citations_kept,
        n_citations_dropped: report.n_citations_dropped,
        config: config.clone(),
        config_hash: config.hash(),
        hit_cutoffs: Vec::new(),
    })?;
    Ok(())
}

pub fn ingest(
    patents_file: &Path,
    citations_file: &Path,
    workspace: &Path,
    config: &IngestConfig,
) -> Result<IngestReport, IngestError> {
    let patents = read_patents_csv(patents_file)?;
    let citations = read_citations_csv(citations_file)?;
    let (ds, report) = build_dataset(&patents, &citations, config)?;
    materialize(&Workspace::open(workspace), &ds, &report, config)?;
    Ok(report)
}

/// Recomputes the summary from the stored records.
pub fn summarize(workspace: &Path) -> Result<IngestReport, WorkspaceError> {
    let ws = Workspace::open(workspace);
    let manifest = ws.load_manifest()?;
    let ds = ws.load_dataset()?;
    Ok(IngestReport {
        n_patents: ds.patents.len(),
        n_inventors: ds.inventors.len(),
        n_teams: ds.count_teams(),
        n_citations_kept: ds.citations.len(),
        n_citations_dropped: manifest.n_citations_dropped,
        duration: manifest.config.declared_duration.or_else(|| ds.year_range()),
    })
}

/// Writes a dataset back out in canonical interchange form (patents by id,
/// tokens sorted, kept citations only).
pub fn export_csv(ds: &Dataset, patents_out: &Path, citations_out: &Path) -> io::Result<()> {
    let with_grant = ds.patents.iter().any(|p| p.grant_year.is_some());
    let mut w = BufWriter::new(File::create(patents_out)?);
    write!(w, "{}", PATENTS_HEADER.join(","))?;
    if with_grant {
        write!(w, ",{GRANT_COLUMN}")?;
    }
    writeln!(w)?;
    for p in &ds.patents {
        let inv: Vec<&str> = p.inventors.iter().map(|i| ds.inventors.name(i.0)).collect();
        let cls: Vec<&str> = p.classes.iter().map(|c| ds.classes.name(c.0)).collect();
        write!(w, "{},{},{},{}", csv_field(&p.id), p.year, csv_field(&inv.join(";")), csv_field(&cls.join(";")))?;
        if with_grant {
            match p.grant_year {
                Some(g) => write!(w, ",{g}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(citations_out)?);
    writeln!(w, "{}", CITATIONS_HEADER.join(","))?;
    for &(a, b) in &ds.citations {
        writeln!(w, "{},{}", csv_field(&ds.patents[a as usize].id), csv_field(&ds.patents[b as usize].id))?;
    }
    w.flush()
}

pub(crate) fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}
