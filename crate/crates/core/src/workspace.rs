//! On-disk workspace: `patents.bin`, `citations.bin`, `impact.bin` and
//! `manifest.json`.
//!
//! The binary files use a private little-endian encoding: a four byte magic,
//! a `u32` format version, then the payload. Strings are `u32` length + UTF-8.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassCode, CohortBasis, Dataset, ImpactTable, InventorId, Patent, Vocabulary};

pub const PATENTS_FILE: &str = "patents.bin";
pub const CITATIONS_FILE: &str = "citations.bin";
pub const IMPACT_FILE: &str = "impact.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

const FORMAT_VERSION: u32 = 1;
const PATENTS_MAGIC: &[u8; 4] = b"CLPT";
const CITATIONS_MAGIC: &[u8; 4] = b"CLCT";
const IMPACT_MAGIC: &[u8; 4] = b"CLIM";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("workspace {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("workspace file {path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("workspace {0} has no computed impact table; run `impact` first")]
    MissingImpact(PathBuf),
}

impl WorkspaceError {
    fn io(path: &Path, source: io::Error) -> Self {
        WorkspaceError::Io { path: path.to_owned(), source }
    }
}

/// A bound hit cutoff recorded for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCutoff {
    pub spec: String,
    pub population: String,
    pub cutoff: f64,
}

/// Settings that influence the materialized workspace bytes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub cohort: CohortBasis,
    pub strict: bool,
    pub declared_duration: Option<(i32, i32)>,
}

impl IngestConfig {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub duration: Option<(i32, i32)>,
    pub n_patents: usize,
    pub n_inventors: usize,
    pub n_teams: usize,
    pub n_citations_kept: usize,
    pub n_citations_dropped: usize,
    pub config: IngestConfig,
    pub config_hash: String,
    #[serde(default)]
    pub hit_cutoffs: Vec<BoundCutoff>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let file_name =
        path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn create_dir(&self) -> Result<(), WorkspaceError> {
        fs::create_dir_all(&self.root).map_err(|e| WorkspaceError::io(&self.root, e))
    }

    fn write(&self, file: &str, bytes: &[u8]) -> Result<(), WorkspaceError> {
        let path = self.path(file);
        write_atomic(&path, bytes).map_err(|e| WorkspaceError::io(&path, e))
    }

    fn read(&self, file: &str) -> Result<Vec<u8>, WorkspaceError> {
        let path = self.path(file);
        fs::read(&path).map_err(|e| WorkspaceError::io(&path, e))
    }

    pub fn write_dataset(&self, ds: &Dataset) -> Result<(), WorkspaceError> {
        self.write(PATENTS_FILE, &encode_patents(ds))?;
        self.write(CITATIONS_FILE, &encode_citations(&ds.citations))
    }

    pub fn load_dataset(&self) -> Result<Dataset, WorkspaceError> {
        let path = self.path(PATENTS_FILE);
        let bytes = self.read(PATENTS_FILE)?;
        let (patents, inventors, classes) =
            decode_patents(&bytes).map_err(|reason| WorkspaceError::Corrupt { path, reason })?;
        let path = self.path(CITATIONS_FILE);
        let bytes = self.read(CITATIONS_FILE)?;
        let citations =
            decode_citations(&bytes, patents.len()).map_err(|reason| WorkspaceError::Corrupt { path, reason })?;
        Ok(Dataset { patents, inventors, classes, citations })
    }

    pub fn write_manifest(&self, m: &Manifest) -> Result<(), WorkspaceError> {
        let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
        text.push('\n');
        self.write(MANIFEST_FILE, text.as_bytes())
    }

    pub fn load_manifest(&self) -> Result<Manifest, WorkspaceError> {
        let path = self.path(MANIFEST_FILE);
        let bytes = self.read(MANIFEST_FILE)?;
        serde_json::from_slice(&bytes).map_err(|e| WorkspaceError::Corrupt { path, reason: e.to_string() })
    }

    pub fn write_impact(&self, table: &ImpactTable) -> Result<(), WorkspaceError> {
        self.write(IMPACT_FILE, &encode_impact(table))
    }

    pub fn has_impact(&self) -> bool {
        self.path(IMPACT_FILE).is_file()
    }

    pub fn load_impact(&self, n_patents: usize) -> Result<ImpactTable, WorkspaceError> {
        let path = self.path(IMPACT_FILE);
        if !path.is_file() {
            return Err(WorkspaceError::MissingImpact(self.root.clone()));
        }
        let bytes = self.read(IMPACT_FILE)?;
        decode_impact(&bytes, n_patents).map_err(|reason| WorkspaceError::Corrupt { path, reason })
    }

    pub fn remove_impact(&self) -> Result<(), WorkspaceError> {
        let path = self.path(IMPACT_FILE);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(WorkspaceError::io(&path, e)),
        }
    }
}

struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        Encoder { buf }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(buf: &'a [u8], magic: &[u8; 4]) -> Result<Self, String> {
        if buf.len() < 8 || &buf[..4] != magic {
            return Err("bad magic".into());
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(format!("unsupported format version {version}"));
        }
        Ok(Decoder { buf, pos: 8 })
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i32(&mut self) -> Result<i32, String> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| e.to_string())
    }
    fn finish(self) -> Result<(), String> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err("trailing bytes".into())
        }
    }
}

fn encode_patents(ds: &Dataset) -> Vec<u8> {
    let mut e = Encoder::new(PATENTS_MAGIC);
    for vocab in [&ds.inventors, &ds.classes] {
        e.u32(vocab.len() as u32);
        for name in vocab.names() {
            e.str(name);
        }
    }
    e.u32(ds.patents.len() as u32);
    for p in &ds.patents {
        e.str(&p.id);
        e.i32(p.year);
        match p.grant_year {
            Some(g) => {
                e.u8(1);
                e.i32(g);
            }
            None => e.u8(0),
        }
        e.u32(p.inventors.len() as u32);
        for i in &p.inventors {
            e.u32(i.0);
        }
        e.u32(p.classes.len() as u32);
        for c in &p.classes {
            e.u32(c.0);
        }
    }
    e.buf
}

fn decode_vocab(d: &mut Decoder<'_>) -> Result<Vocabulary, String> {
    let n = d.u32()? as usize;
    let mut names = Vec::with_capacity(n);
    for _ in 0..n {
        names.push(d.string()?);
    }
    if names.windows(2).any(|w| w[0] >= w[1]) {
        return Err("vocabulary not sorted".into());
    }
    Ok(Vocabulary::from_sorted(names))
}

fn decode_patents(bytes: &[u8]) -> Result<(Vec<Patent>, Vocabulary, Vocabulary), String> {
    let mut d = Decoder::new(bytes, PATENTS_MAGIC)?;
    let inventors = decode_vocab(&mut d)?;
    let classes = decode_vocab(&mut d)?;
    let n = d.u32()? as usize;
    let mut patents = Vec::with_capacity(n);
    for _ in 0..n {
        let id = d.string()?;
        let year = d.i32()?;
        let grant_year = match d.u8()? {
            0 => None,
            1 => Some(d.i32()?),
            t => return Err(format!("bad grant-year tag {t}")),
        };
        let k = d.u32()? as usize;
        let mut inv = Vec::with_capacity(k);
        for _ in 0..k {
            let v = d.u32()?;
            if v as usize >= inventors.len() {
                return Err("inventor index out of range".into());
            }
            inv.push(InventorId(v));
        }
        let m = d.u32()? as usize;
        let mut cls = Vec::with_capacity(m);
        for _ in 0..m {
            let v = d.u32()?;
            if v as usize >= classes.len() {
                return Err("class index out of range".into());
            }
            cls.push(ClassCode(v));
        }
        patents.push(Patent { id, year, grant_year, inventors: inv, classes: cls });
    }
    d.finish()?;
    Ok((patents, inventors, classes))
}

fn encode_citations(edges: &[(u32, u32)]) -> Vec<u8> {
    let mut e = Encoder::new(CITATIONS_MAGIC);
    e.u64(edges.len() as u64);
    for &(a, b) in edges {
        e.u32(a);
        e.u32(b);
    }
    e.buf
}

fn decode_citations(bytes: &[u8], n_patents: usize) -> Result<Vec<(u32, u32)>, String> {
    let mut d = Decoder::new(bytes, CITATIONS_MAGIC)?;
    let n = d.u64()? as usize;
    let mut edges = Vec::with_capacity(n);
    for _ in 0..n {
        let a = d.u32()?;
        let b = d.u32()?;
        if a as usize >= n_patents || b as usize >= n_patents {
            return Err("citation references unknown patent index".into());
        }
        edges.push((a, b));
    }
    d.finish()?;
    Ok(edges)
}

fn encode_impact(t: &ImpactTable) -> Vec<u8> {
    let mut e = Encoder::new(IMPACT_MAGIC);
    e.u8(match t.basis {
        CohortBasis::Application => 0,
        CohortBasis::Grant => 1,
    });
    e.u32(t.cohort_means.len() as u32);
    for (&y, &m) in &t.cohort_means {
        e.i32(y);
        e.f64(m);
    }
    e.u32(t.impacts.len() as u32);
    for &v in &t.impacts {
        e.f64(v);
    }
    e.buf
}

fn decode_impact(bytes: &[u8], n_patents: usize) -> Result<ImpactTable, String> {
    let mut d = Decoder::new(bytes, IMPACT_MAGIC)?;
    let basis = match d.u8()? {
        0 => CohortBasis::Application,
        1 => CohortBasis::Grant,
        t => return Err(format!("bad cohort basis tag {t}")),
    };
    let nc = d.u32()? as usize;
    let mut cohort_means = BTreeMap::new();
    for _ in 0..nc {
        let y = d.i32()?;
        cohort_means.insert(y, d.f64()?);
    }
    let n = d.u32()? as usize;
    if n != n_patents {
        return Err(format!("impact table has {n} entries, dataset has {n_patents} patents"));
    }
    let mut impacts = Vec::with_capacity(n);
    for _ in 0..n {
        impacts.push(d.f64()?);
    }
    d.finish()?;
    Ok(ImpactTable { basis, impacts, cohort_means })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            patents: vec![
                Patent {
                    id: "P1".into(),
                    year: 2000,
                    grant_year: Some(2003),
                    inventors: vec![InventorId(0), InventorId(1)],
                    classes: vec![ClassCode(0)],
                },
                Patent {
                    id: "P2".into(),
                    year: 2001,
                    grant_year: None,
                    inventors: vec![InventorId(1)],
                    classes: vec![ClassCode(0), ClassCode(1)],
                },
            ],
            inventors: Vocabulary::from_tokens(["A", "B"]),
            classes: Vocabulary::from_tokens(["X", "Y"]),
            citations: vec![(1, 0)],
        }
    }

    #[test]
    fn dataset_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path());
        let ds = tiny();
        ws.write_dataset(&ds).unwrap();
        assert_eq!(ws.load_dataset().unwrap(), ds);
    }

    #[test]
    fn truncated_file_is_reported_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path());
        ws.write_dataset(&tiny()).unwrap();
        let p = ws.path(PATENTS_FILE);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(ws.load_dataset(), Err(WorkspaceError::Corrupt { .. })));
    }

    #[test]
    fn missing_workspace_is_an_io_error() {
        let ws = Workspace::open("/nonexistent/collabline/ws");
        assert!(matches!(ws.load_dataset(), Err(WorkspaceError::Io { .. })));
        assert!(matches!(ws.load_impact(0), Err(WorkspaceError::MissingImpact(_))));
    }

    #[test]
    fn impact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path());
        let t = ImpactTable {
            basis: CohortBasis::Grant,
            impacts: vec![0.5, 1.5],
            cohort_means: [(2000, 2.0)].into_iter().collect(),
        };
        ws.write_impact(&t).unwrap();
        assert_eq!(ws.load_impact(2).unwrap(), t);
        assert!(ws.load_impact(3).is_err());
    }
}
