//! Rendering of analysis results into plot-ready files, the report layout,
//! and atomic output directories with a run manifest.
//!
//! CSV conventions: fixed header, LF line endings, reals with nine decimals,
//! p-values in scientific notation with six decimals, bins by their label.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::analyses::{
    pair_diversity, prediction1, prediction2_stay_series, prediction3_switch_series, rho_series, tech_diversity,
    threshold_sweep, AnalysisConfig, BinTest, Comparison, Provenance, RhoSeries, SeriesResult, SweepResult,
};
use crate::metrics::{
    bind_hit_threshold, ccdf, ccdf_split, fit_lognormal, impacts_by_year, team_sizes, CcdfSeries, MetricsError,
};
use crate::model::{Dataset, ImpactTable};
use crate::sequences::{build_pair_sequences, PairSequence, TeamSequence};
use crate::stats::{OlsResult, StatsError};
use crate::workspace::sha256_hex;

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Default absolute thresholds for the hit-threshold sweep.
pub const DEFAULT_SWEEP: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

pub fn real(v: f64) -> String {
    format!("{v:.9}")
}

pub fn pvalue(v: f64) -> String {
    format!("{v:.6e}")
}

/// `bin,mean,se,n,label`
pub fn series_csv<'a>(series: impl IntoIterator<Item = &'a SeriesResult>) -> String {
    let mut out = String::from("bin,mean,se,n,label\n");
    for s in series {
        for p in &s.points {
            writeln!(out, "{},{},{},{},{}", p.bin, real(p.mean), real(p.se), p.n, s.label).unwrap();
        }
    }
    out
}

/// `bin,u,z,p,n1,n2`
pub fn tests_csv(tests: &[BinTest]) -> String {
    let mut out = String::from("bin,u,z,p,n1,n2\n");
    for t in tests {
        let r = &t.result;
        writeln!(out, "{},{},{},{},{},{}", t.bin, real(r.u_statistic), real(r.z), pvalue(r.p_one_sided), r.n1, r.n2)
            .unwrap();
    }
    out
}

/// `bin,rho,n_switch,n_stay,label`
pub fn rho_csv<'a>(series: impl IntoIterator<Item = (&'a RhoSeries, &'a str)>) -> String {
    let mut out = String::from("bin,rho,n_switch,n_stay,label\n");
    for (rho, label) in series {
        for p in &rho.points {
            writeln!(out, "{},{},{},{},{}", p.bin, real(p.rho), p.n_switch, p.n_stay, label).unwrap();
        }
    }
    out
}

/// `value,ccdf,series_label`; fitted series add `<label>:lognormal` rows
/// evaluated at the same values.
pub fn ccdf_csv(series: &[CcdfSeries]) -> String {
    let mut out = String::from("value,ccdf,series_label\n");
    for s in series {
        for &(v, p) in &s.points {
            writeln!(out, "{},{},{}", real(v), real(p), s.label).unwrap();
        }
    }
    for s in series {
        if let Some(fit) = &s.fit {
            for &(v, _) in &s.points {
                writeln!(out, "{},{},{}:lognormal", real(v), real(fit.survival(v)), s.label).unwrap();
            }
        }
    }
    out
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("output types serialize");
    v.push(b'\n');
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistVariable {
    TeamSize,
    Impact,
}

impl FromStr for DistVariable {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "teamsize" => Ok(DistVariable::TeamSize),
            "impact" => Ok(DistVariable::Impact),
            _ => Err(format!("unknown variable `{s}` (expected teamsize or impact)")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitRecord {
    pub series_label: String,
    pub years: Option<(i32, i32)>,
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
    pub excluded_zeros: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistFit {
    pub variable: DistVariable,
    pub include_solo: bool,
    pub fits: Vec<FitRecord>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub series: Vec<CcdfSeries>,
}

/// Empirical CCDF (whole duration, or the two halves) with log-normal fits.
/// An empty dataset yields no series.
pub fn distfit(
    ds: &Dataset,
    impact: Option<&ImpactTable>,
    variable: DistVariable,
    split: bool,
    include_solo: bool,
) -> DistFit {
    let samples = match variable {
        DistVariable::TeamSize => team_sizes(ds, include_solo),
        DistVariable::Impact => impacts_by_year(ds, impact.expect("impact table for impact fits")),
    };
    let label = match variable {
        DistVariable::TeamSize => "teamsize",
        DistVariable::Impact => "impact",
    };
    let mut warnings = Vec::new();
    let mut series = match (split, ds.year_range()) {
        (true, Some(duration)) => {
            let (s, w) = ccdf_split(&samples, duration, label);
            warnings.extend(w);
            s
        }
        _ => {
            let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
            ccdf(&values, label)
                .into_iter()
                .map(|mut s| {
                    s.years = ds.year_range();
                    s
                })
                .collect()
        }
    };
    let mut fits = Vec::new();
    for s in &mut series {
        let values: Vec<f64> =
            samples.iter().filter(|(y, _)| s.years.is_none_or(|(lo, hi)| *y >= lo && *y <= hi)).map(|v| v.1).collect();
        match fit_lognormal(&values) {
            Ok(fit) => {
                fits.push(FitRecord {
                    series_label: s.label.clone(),
                    years: s.years,
                    mu: fit.mu,
                    sigma: fit.sigma,
                    n: fit.n,
                    excluded_zeros: fit.excluded,
                    degenerate: fit.degenerate,
                });
                s.fit = Some(fit);
            }
            Err(e) => warnings.push(format!("{}: no log-normal fit ({e})", s.label)),
        }
    }
    if series.is_empty() && !split {
        warnings.push(format!("{label}: no samples"));
    }
    DistFit { variable, include_solo, fits, warnings, series }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    P1,
    P2,
    P3,
    Rho,
    Sweep,
    Tech,
    Pair,
}

impl FromStr for AnalysisKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "p1" => AnalysisKind::P1,
            "p2" => AnalysisKind::P2,
            "p3" => AnalysisKind::P3,
            "rho" => AnalysisKind::Rho,
            "sweep" => AnalysisKind::Sweep,
            "tech" => AnalysisKind::Tech,
            "pair" => AnalysisKind::Pair,
            _ => return Err(format!("unknown analysis `{s}` (expected p1|p2|p3|rho|sweep|tech|pair)")),
        })
    }
}

/// Named file contents, in write order.
pub type Files = Vec<(String, Vec<u8>)>;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Inputs shared by every analysis.
pub struct Context<'a> {
    pub ds: &'a Dataset,
    pub impact: &'a ImpactTable,
    pub teams: &'a [TeamSequence],
    pub config: &'a AnalysisConfig,
}

impl Context<'_> {
    /// Hit cutoff for the configured spec and population. An empty population
    /// has no hits; the cutoff is then infinite.
    pub fn hit_cutoff(&self) -> Result<f64, MetricsError> {
        let population = self.config.hit_population.impacts(self.ds, self.impact);
        match bind_hit_threshold(&self.config.hit, &population) {
            Err(MetricsError::EmptyDataset) => Ok(f64::INFINITY),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Regression<'a> {
    regressand: &'static str,
    regressor: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<&'a OlsResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_p_positive: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn regression_json(fit: &Result<OlsResult, StatsError>) -> Vec<u8> {
    json(&Regression {
        regressand: "subsequent_patents",
        regressor: "impact",
        fit: fit.as_ref().ok(),
        slope_p_positive: fit.as_ref().ok().map(OlsResult::slope_p_positive),
        error: fit.as_ref().err().map(ToString::to_string),
    })
}

fn sweep_series(sweep: &SweepResult) -> String {
    let mut out = String::from("bin,mean,se,n,label\n");
    for e in &sweep.entries {
        let tag = format!("gt:{}", e.threshold);
        for s in [&e.switch, &e.stay] {
            for p in &s.points {
                writeln!(out, "{},{},{},{},{tag}/{}", p.bin, real(p.mean), real(p.se), p.n, s.label).unwrap();
            }
        }
    }
    out
}

fn sweep_rho(sweep: &SweepResult) -> String {
    let tags: Vec<String> = sweep.entries.iter().map(|e| format!("gt:{}", e.threshold)).collect();
    rho_csv(sweep.entries.iter().zip(&tags).map(|(e, t)| (&e.rho, t.as_str())))
}

#[derive(Serialize)]
struct ComparisonProvenance<'a> {
    greater: &'a Provenance,
    lesser: &'a Provenance,
    test: &'static str,
}

fn comparison_provenance(c: &Comparison, test: &'static str) -> Vec<u8> {
    json(&ComparisonProvenance { greater: &c.greater.provenance, lesser: &c.lesser.provenance, test })
}

#[derive(Serialize)]
struct SweepProvenance<'a> {
    thresholds: &'a [f64],
    series: Vec<&'a Provenance>,
    rho_notes: Vec<&'a String>,
    test: &'static str,
}

fn sweep_provenance(sweep: &SweepResult, thresholds: &[f64]) -> Vec<u8> {
    json(&SweepProvenance {
        thresholds,
        series: sweep.entries.iter().map(|e| &e.stay.provenance).collect(),
        rho_notes: sweep.entries.iter().flat_map(|e| &e.rho.notes).collect(),
        test: "lowest threshold rho > highest threshold rho (one-sided rank-sum on switch impact / stay mean)",
    })
}

const SWITCH_TEST: &str = "switch > no_switch (one-sided rank-sum per bin)";
const INEX_TEST: &str = "InEx > Ex (one-sided rank-sum per bin)";

/// Files for one `analyze` run: `series.csv`, `tests.csv`,
/// `provenance.json`, plus `regression.json` (p1) or `rho.csv` (rho, sweep).
pub fn analysis_files(
    kind: AnalysisKind,
    ctx: &Context<'_>,
    pairs: Option<&[PairSequence]>,
    thresholds: &[f64],
) -> Result<Files, OutputError> {
    let cfg = ctx.config;
    let empty_tests = tests_csv(&[]);
    let files: Files = match kind {
        AnalysisKind::P1 => {
            let (series, fit) = prediction1(ctx.teams, ctx.impact, cfg)?;
            vec![
                ("series.csv".into(), series_csv([&series]).into_bytes()),
                ("tests.csv".into(), empty_tests.into_bytes()),
                ("regression.json".into(), regression_json(&fit)),
                ("provenance.json".into(), json(&series.provenance)),
            ]
        }
        AnalysisKind::P2 => {
            let series = prediction2_stay_series(ctx.teams, ctx.impact, ctx.hit_cutoff()?, cfg);
            vec![
                ("series.csv".into(), series_csv([&series]).into_bytes()),
                ("tests.csv".into(), empty_tests.into_bytes()),
                ("provenance.json".into(), json(&series.provenance)),
            ]
        }
        AnalysisKind::P3 | AnalysisKind::Rho => {
            let c = prediction3_switch_series(ctx.teams, ctx.impact, ctx.hit_cutoff()?, cfg);
            let mut files = vec![
                ("series.csv".to_string(), series_csv([&c.greater, &c.lesser]).into_bytes()),
                ("tests.csv".to_string(), tests_csv(&c.tests).into_bytes()),
            ];
            if kind == AnalysisKind::Rho {
                let rho = rho_series(&c.lesser, &c.greater);
                files.push(("rho.csv".into(), rho_csv([(&rho, "rho")]).into_bytes()));
                let mut prov = c.greater.provenance.clone();
                prov.analysis = "rho".into();
                prov.notes.extend(rho.notes.iter().cloned());
                files.push(("provenance.json".into(), json(&prov)));
            } else {
                files.push(("provenance.json".into(), comparison_provenance(&c, SWITCH_TEST)));
            }
            files
        }
        AnalysisKind::Sweep => {
            let sweep = threshold_sweep(ctx.teams, ctx.impact, thresholds, cfg);
            vec![
                ("series.csv".into(), sweep_series(&sweep).into_bytes()),
                ("tests.csv".into(), tests_csv(&sweep.tests).into_bytes()),
                ("rho.csv".into(), sweep_rho(&sweep).into_bytes()),
                ("provenance.json".into(), sweep_provenance(&sweep, thresholds)),
            ]
        }
        AnalysisKind::Tech => {
            let c = tech_diversity(ctx.teams, ctx.ds, ctx.impact, cfg);
            vec![
                ("series.csv".into(), series_csv([&c.greater, &c.lesser]).into_bytes()),
                ("tests.csv".into(), tests_csv(&c.tests).into_bytes()),
                ("provenance.json".into(), comparison_provenance(&c, INEX_TEST)),
            ]
        }
        AnalysisKind::Pair => {
            let owned;
            let pairs = match pairs {
                Some(p) => p,
                None => {
                    owned = build_pair_sequences(ctx.ds);
                    &owned
                }
            };
            let c = pair_diversity(pairs, ctx.ds, ctx.impact, cfg);
            vec![
                ("series.csv".into(), series_csv([&c.greater, &c.lesser]).into_bytes()),
                ("tests.csv".into(), tests_csv(&c.tests).into_bytes()),
                ("provenance.json".into(), comparison_provenance(&c, INEX_TEST)),
            ]
        }
    };
    Ok(files)
}

#[derive(Serialize)]
struct ReportProvenance<'a> {
    config: &'a AnalysisConfig,
    hit_cutoff: Option<f64>,
    sweep_thresholds: &'a [f64],
    include_solo_in_teamsize: bool,
    figures: BTreeMap<&'static str, serde_json::Value>,
    warnings: Vec<String>,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("output types serialize")
}

/// Every figure as a data series: ten `figNN_*.csv` files plus their fits,
/// tests, regression and a combined `provenance.json`.
pub fn report_files(
    ctx: &Context<'_>,
    pairs: &[PairSequence],
    thresholds: &[f64],
    include_solo: bool,
) -> Result<Files, OutputError> {
    let cfg = ctx.config;
    let cutoff = ctx.hit_cutoff()?;
    let mut files: Files = Vec::new();
    let mut figures = BTreeMap::new();
    let mut warnings = Vec::new();

    let dists = [
        ("fig01_teamsize", DistVariable::TeamSize, false),
        ("fig02_teamsize_halves", DistVariable::TeamSize, true),
        ("fig03_impact_halves", DistVariable::Impact, true),
        ("fig04_impact", DistVariable::Impact, false),
    ];
    for (name, variable, split) in dists {
        let d = distfit(ctx.ds, Some(ctx.impact), variable, split, include_solo);
        files.push((format!("{name}.csv"), ccdf_csv(&d.series).into_bytes()));
        files.push((format!("{name}_fit.json"), json(&d)));
        warnings.extend(d.warnings.iter().map(|w| format!("{name}: {w}")));
        figures.insert(name, to_value(&d));
    }

    let (p1, fit) = prediction1(ctx.teams, ctx.impact, cfg)?;
    files.push(("fig05_p1.csv".into(), series_csv([&p1]).into_bytes()));
    files.push(("fig05_p1_regression.json".into(), regression_json(&fit)));
    figures.insert("fig05_p1", to_value(&p1.provenance));

    let c = prediction3_switch_series(ctx.teams, ctx.impact, cutoff, cfg);
    files.push(("fig06_stay_switch.csv".into(), series_csv([&c.greater, &c.lesser]).into_bytes()));
    files.push(("fig06_stay_switch_tests.csv".into(), tests_csv(&c.tests).into_bytes()));
    figures.insert("fig06_stay_switch", to_value(&c.greater.provenance));

    let rho = rho_series(&c.lesser, &c.greater);
    files.push(("fig07_rho.csv".into(), rho_csv([(&rho, "rho")]).into_bytes()));
    figures.insert("fig07_rho", to_value(&rho.notes));

    let sweep = threshold_sweep(ctx.teams, ctx.impact, thresholds, cfg);
    files.push(("fig08_sweep.csv".into(), sweep_rho(&sweep).into_bytes()));
    files.push(("fig08_sweep_series.csv".into(), sweep_series(&sweep).into_bytes()));
    files.push(("fig08_sweep_tests.csv".into(), tests_csv(&sweep.tests).into_bytes()));
    figures.insert("fig08_sweep", serde_json::from_slice(&sweep_provenance(&sweep, thresholds)).unwrap());

    let tech = tech_diversity(ctx.teams, ctx.ds, ctx.impact, cfg);
    files.push(("fig09_tech.csv".into(), series_csv([&tech.greater, &tech.lesser]).into_bytes()));
    files.push(("fig09_tech_tests.csv".into(), tests_csv(&tech.tests).into_bytes()));
    figures.insert("fig09_tech", to_value(&tech.greater.provenance));

    let pair = pair_diversity(pairs, ctx.ds, ctx.impact, cfg);
    files.push(("fig10_pair.csv".into(), series_csv([&pair.greater, &pair.lesser]).into_bytes()));
    files.push(("fig10_pair_tests.csv".into(), tests_csv(&pair.tests).into_bytes()));
    figures.insert("fig10_pair", to_value(&pair.greater.provenance));

    files.push((
        "provenance.json".into(),
        json(&ReportProvenance {
            config: cfg,
            hit_cutoff: cutoff.is_finite().then_some(cutoff),
            sweep_thresholds: thresholds,
            include_solo_in_teamsize: include_solo,
            figures,
            warnings,
        }),
    ));
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Written into every output directory as [`RUN_MANIFEST`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub config_hash: String,
    /// `(path, sha256)` of every input file read.
    pub input_digests: Vec<OutputDigest>,
    pub wall_time_secs: f64,
    pub outputs: Vec<OutputDigest>,
}

/// Writes `files` plus a run manifest into a sibling temp directory, then
/// renames it onto `dest`, replacing any previous contents. On error the temp
/// directory is removed and `dest` is untouched.
pub fn commit_dir(
    dest: &Path,
    files: &Files,
    manifest: impl FnOnce(Vec<OutputDigest>) -> RunManifest,
) -> Result<(), OutputError> {
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| OutputError::Io { path, source }
    };
    let parent = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let name = dest.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    let old = parent.join(format!(".{name}.old-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    let result = (|| {
        fs::create_dir(&tmp).map_err(io_err(&tmp))?;
        let mut digests = Vec::with_capacity(files.len());
        for (file, bytes) in files {
            let path = tmp.join(file);
            fs::write(&path, bytes).map_err(io_err(&path))?;
            digests.push(OutputDigest { file: file.clone(), sha256: sha256_hex(bytes) });
        }
        let path = tmp.join(RUN_MANIFEST);
        fs::write(&path, json(&manifest(digests))).map_err(io_err(&path))?;
        if dest.exists() {
            fs::rename(dest, &old).map_err(io_err(dest))?;
        }
        fs::rename(&tmp, dest).map_err(io_err(dest))?;
        let _ = fs::remove_dir_all(&old);
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
        if old.exists() && !dest.exists() {
            let _ = fs::rename(&old, dest);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_dataset, CitationRows, PatentRows};
    use crate::metrics::compute_impact;
    use crate::model::{CitationEdge, CohortBasis, PatentRecord};
    use crate::sequences::build_team_sequences;
    use crate::stats::{Bin, RankSumResult};
    use crate::workspace::IngestConfig;

    fn fixture() -> Dataset {
        let rec = |id: &str, year, inv: &[&str], cls: &[&str]| PatentRecord {
            patent_id: id.into(),
            cohort_year: year,
            grant_year: None,
            inventors: inv.iter().map(|s| s.to_string()).collect(),
            classes: cls.iter().map(|s| s.to_string()).collect(),
        };
        let patents = vec![
            rec("P1", 2000, &["A", "B"], &["X"]),
            rec("P2", 2001, &["A", "B"], &["X", "Y"]),
            rec("P3", 2002, &["A", "B"], &["X"]),
            rec("P4", 2002, &["A", "C"], &["Z"]),
            rec("P5", 2001, &["D"], &["X"]),
        ];
        let edge = |a: &str, b: &str| CitationEdge { citing: a.into(), cited: b.into() };
        let edges = vec![edge("P2", "P1"), edge("P3", "P1"), edge("P4", "P1"), edge("P3", "P2"), edge("P4", "P3")];
        let (ds, _) = build_dataset(
            &PatentRows::from_records("p", patents),
            &CitationRows::from_edges("c", edges),
            &IngestConfig::default(),
        )
        .unwrap();
        ds
    }

    #[test]
    fn number_formats() {
        assert_eq!(real(1.0 / 3.0), "0.333333333");
        assert_eq!(pvalue(0.000123456789), "1.234568e-4");
        let t = BinTest {
            bin: Bin { key: 16, label: 16.0 },
            result: RankSumResult {
                u_statistic: 10.5,
                z: -0.25,
                p_one_sided: 0.5,
                n1: 3,
                n2: 4,
                exact: false,
                ties: true,
                all_ties: false,
            },
        };
        assert_eq!(tests_csv(&[t]), "bin,u,z,p,n1,n2\n16,10.500000000,-0.250000000,5.000000e-1,3,4\n");
    }

    #[test]
    fn ccdf_rows_and_overlay() {
        let mut s = ccdf(&[1.0, 1.0, 2.0, 3.0], "teamsize").unwrap();
        s.fit = Some(fit_lognormal(&[1.0, 1.0, 2.0, 3.0]).unwrap());
        let text = ccdf_csv(&[s]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "value,ccdf,series_label");
        assert_eq!(lines[1], "1.000000000,1.000000000,teamsize");
        assert_eq!(lines[3], "3.000000000,0.250000000,teamsize");
        assert_eq!(lines.len(), 7);
        assert!(lines[4].ends_with(",teamsize:lognormal"));
    }

    #[test]
    fn distfit_halves_and_solo_switch() {
        let ds = fixture();
        let d = distfit(&ds, None, DistVariable::TeamSize, true, true);
        let labels: Vec<&str> = d.series.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["teamsize:first_half:2000-2001", "teamsize:second_half:2002-2002"]);
        let with_solo = distfit(&ds, None, DistVariable::TeamSize, false, true);
        let without = distfit(&ds, None, DistVariable::TeamSize, false, false);
        assert_eq!(with_solo.series[0].points[0].0, 1.0);
        assert_eq!(without.series[0].points[0].0, 2.0);
        // all team sizes 2: degenerate fit
        assert!(without.fits[0].degenerate);
        let table = compute_impact(&ds, CohortBasis::Application).unwrap();
        let imp = distfit(&ds, Some(&table), DistVariable::Impact, false, true);
        assert!(imp.fits[0].excluded_zeros > 0);
    }

    #[test]
    fn report_has_ten_series_and_is_repeatable() {
        let ds = fixture();
        let table = compute_impact(&ds, CohortBasis::Application).unwrap();
        let teams = build_team_sequences(&ds);
        let pairs = build_pair_sequences(&ds);
        let cfg = AnalysisConfig { min_samples: 1, ..Default::default() };
        let ctx = Context { ds: &ds, impact: &table, teams: &teams, config: &cfg };
        let files = report_files(&ctx, &pairs, &DEFAULT_SWEEP, true).unwrap();
        let series: Vec<&str> = files
            .iter()
            .map(|f| f.0.as_str())
            .filter(|n| n.starts_with("fig") && n.ends_with(".csv") && !n.contains("_tests") && !n.contains("_series"))
            .collect();
        assert_eq!(series.len(), 10, "{series:?}");
        assert_eq!(files, report_files(&ctx, &pairs, &DEFAULT_SWEEP, true).unwrap());
    }

    #[test]
    fn every_analysis_renders() {
        let ds = fixture();
        let table = compute_impact(&ds, CohortBasis::Application).unwrap();
        let teams = build_team_sequences(&ds);
        let cfg = AnalysisConfig { min_samples: 1, ..Default::default() };
        let ctx = Context { ds: &ds, impact: &table, teams: &teams, config: &cfg };
        for kind in ["p1", "p2", "p3", "rho", "sweep", "tech", "pair"] {
            let files = analysis_files(kind.parse().unwrap(), &ctx, None, &DEFAULT_SWEEP).unwrap();
            let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
            for required in ["series.csv", "tests.csv", "provenance.json"] {
                assert!(names.contains(&required), "{kind}: {names:?}");
            }
            for (_, bytes) in &files {
                assert!(!bytes.contains(&b'\r'));
            }
        }
        assert!("p4".parse::<AnalysisKind>().is_err());
    }

    #[test]
    fn empty_team_population_has_no_hits() {
        let ds = Dataset::default();
        let table = ImpactTable { basis: CohortBasis::Application, impacts: vec![], cohort_means: Default::default() };
        let cfg = AnalysisConfig::default();
        let ctx = Context { ds: &ds, impact: &table, teams: &[], config: &cfg };
        assert_eq!(ctx.hit_cutoff().unwrap(), f64::INFINITY);
        let files = analysis_files(AnalysisKind::P3, &ctx, None, &DEFAULT_SWEEP).unwrap();
        assert_eq!(files[0].1, b"bin,mean,se,n,label\n");
    }

    #[test]
    fn committed_dir_replaces_and_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("out");
        let make = |digests: Vec<OutputDigest>| RunManifest {
            tool_version: "t".into(),
            command_line: vec![],
            config_hash: String::new(),
            input_digests: vec![],
            wall_time_secs: 0.0,
            outputs: digests,
        };
        commit_dir(&dest, &vec![("a.csv".into(), b"x\n".to_vec()), ("b.csv".into(), vec![])], make).unwrap();
        commit_dir(&dest, &vec![("c.csv".into(), b"y\n".to_vec())], make).unwrap();
        let mut names: Vec<String> =
            fs::read_dir(&dest).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
        names.sort();
        assert_eq!(names, vec!["c.csv", RUN_MANIFEST]);
        let leftovers = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
        let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dest.join(RUN_MANIFEST)).unwrap()).unwrap();
        assert_eq!(manifest["outputs"][0]["sha256"], sha256_hex(b"y\n"));
    }
}
