use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use collabline::analyses::{compare_prediction1, prediction1_observations, AnalysisConfig};
use collabline::ingest::{self, IngestReport};
use collabline::metrics::{bind_hit_threshold, compute_impact, HitPopulation};
use collabline::model::{CohortBasis, Dataset, HitSpec, ImpactTable};
use collabline::output::{
    analysis_files, ccdf_csv, commit_dir, distfit, json, report_files, series_csv, tests_csv, AnalysisKind, Context,
    DistVariable, Files, OutputDigest, RunManifest, DEFAULT_SWEEP, RUN_MANIFEST,
};
use collabline::sequences::{
    build_pair_sequences, build_team_sequences, encode_pair_sequences, encode_team_sequences, write_pair_csv,
    write_team_csv,
};
use collabline::synth::{generate, GenConfig};
use collabline::workspace::{
    sha256_hex, write_atomic, BoundCutoff, IngestConfig, Workspace, CITATIONS_FILE, IMPACT_FILE, PATENTS_FILE,
};
use serde_json::json;

const VERSION: &str = concat!("collabline ", env!("CARGO_PKG_VERSION"));

/// Team repetition, hit and switching analytics over patent-like data.
#[derive(Parser)]
#[command(name = "collabline", version = env!("CARGO_PKG_VERSION"))]
struct Cli {
    /// Worker threads (default: available cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct WorkspaceArg {
    /// Workspace directory.
    #[arg(long, env = "COLLABLINE_WORKSPACE")]
    workspace: PathBuf,
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// Hit criterion: `topN` (top N percent) or `gt:X` (impact > X).
    #[arg(long, default_value = "top10", value_parser = parse_hit)]
    hit: HitSpec,
    /// Patents defining the quantile of a `topN` hit criterion.
    #[arg(long, default_value = "all", value_parser = parse_population)]
    hit_population: HitPopulation,
    /// Bins with fewer observations are omitted.
    #[arg(long, default_value_t = 100)]
    min_samples: usize,
    /// Width of the impact bins of the subsequent-patent series.
    #[arg(long, default_value_t = 1.0)]
    impact_bin_width: f64,
    /// Count first patents of teams and pairs as inexperienced.
    #[arg(long)]
    include_first_as_inex: bool,
    /// Ascending absolute thresholds for the sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
    thresholds: Vec<f64>,
}

impl AnalysisArgs {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            hit: self.hit,
            hit_population: self.hit_population,
            min_samples: self.min_samples,
            impact_bin_width: self.impact_bin_width,
            include_first_as_inex: self.include_first_as_inex,
        }
    }

    fn validate(&self) -> Result<(), UsageError> {
        if !(self.impact_bin_width > 0.0 && self.impact_bin_width.is_finite()) {
            return Err(UsageError("--impact-bin-width must be positive".into()));
        }
        if self.thresholds.is_empty()
            || self.thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite()))
            || self.thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(UsageError("--thresholds must be positive and strictly ascending".into()));
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate interchange CSVs and materialize a workspace.
    Ingest {
        #[arg(long)]
        patents: PathBuf,
        #[arg(long)]
        citations: PathBuf,
        #[command(flatten)]
        ws: WorkspaceArg,
        /// Year used as the impact cohort.
        #[arg(long, default_value = "application", value_parser = parse_cohort)]
        cohort: CohortBasis,
        /// Treat unresolved citation edges as errors.
        #[arg(long)]
        strict: bool,
        /// Declared dataset duration `START-END`; years outside are errors.
        #[arg(long, value_parser = parse_duration)]
        duration: Option<(i32, i32)>,
    },
    /// Print dataset counts recomputed from a workspace.
    Summarize {
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Compute normalized impact and record the default hit cutoffs.
    Impact {
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Empirical CCDF and log-normal fit of team size or impact.
    Distfit {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[arg(long, value_parser = parse_variable)]
        variable: DistVariable,
        /// Separate first and second half of the duration.
        #[arg(long)]
        split_halves: bool,
        /// Leave solo patents out of team-size distributions.
        #[arg(long)]
        exclude_solo: bool,
        /// Series CSV; `fit.json` and the run manifest go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump team and pair sequences.
    Sequences {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[arg(long, default_value = "csv", value_parser = ["csv", "bin"])]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one analysis.
    Analyze {
        #[arg(value_parser = parse_kind)]
        kind: AnalysisKind,
        #[command(flatten)]
        ws: WorkspaceArg,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test whether teams of the first workspace continue longer than those
    /// of the second at equal impact.
    #[command(name = "compare-p1")]
    CompareP1 {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 100)]
        min_samples: usize,
        #[arg(long, default_value_t = 1.0)]
        impact_bin_width: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from a JSON generator config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every figure as plot-ready CSV in one directory.
    Report {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Leave solo patents out of team-size distributions.
        #[arg(long)]
        exclude_solo: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn parse_hit(s: &str) -> Result<HitSpec, String> {
    s.parse().map_err(|e: collabline::model::ModelError| e.to_string())
}

fn parse_population(s: &str) -> Result<HitPopulation, String> {
    s.parse()
}

fn parse_cohort(s: &str) -> Result<CohortBasis, String> {
    s.parse()
}

fn parse_variable(s: &str) -> Result<DistVariable, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<AnalysisKind, String> {
    s.parse()
}

fn parse_duration(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once('-').ok_or("expected START-END")?;
    let a: i32 = a.trim().parse().map_err(|_| format!("invalid year `{a}`"))?;
    let b: i32 = b.trim().parse().map_err(|_| format!("invalid year `{b}`"))?;
    if b < a {
        return Err("END precedes START".into());
    }
    Ok((a, b))
}

fn file_digest(path: &Path) -> Result<OutputDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(OutputDigest { file: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

struct Run {
    started: Instant,
    argv: Vec<String>,
    inputs: Vec<OutputDigest>,
    config_hash: String,
}

impl Run {
    fn manifest(&self, outputs: Vec<OutputDigest>) -> RunManifest {
        RunManifest {
            tool_version: VERSION.into(),
            command_line: self.argv.clone(),
            config_hash: self.config_hash.clone(),
            input_digests: self.inputs.clone(),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            outputs,
        }
    }

    fn commit(&self, dest: &Path, files: &Files) -> Result<()> {
        commit_dir(dest, files, |d| self.manifest(d))?;
        Ok(())
    }
}

/// Dataset plus impact (stored table if present, else recomputed).
struct Loaded {
    ds: Dataset,
    impact: ImpactTable,
}

fn load(ws_path: &Path, run: &mut Run) -> Result<Loaded> {
    let ws = Workspace::open(ws_path);
    let manifest = ws.load_manifest()?;
    let ds = ws.load_dataset()?;
    for f in [PATENTS_FILE, CITATIONS_FILE] {
        run.inputs.push(file_digest(&ws.path(f))?);
    }
    let impact = if ws.has_impact() {
        run.inputs.push(file_digest(&ws.path(IMPACT_FILE))?);
        ws.load_impact(ds.patents.len())?
    } else {
        compute_impact(&ds, manifest.config.cohort)?
    };
    Ok(Loaded { ds, impact })
}

fn print_report(report: &IngestReport) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<()> {
    let mut run = Run { started: Instant::now(), argv, inputs: Vec::new(), config_hash: String::new() };
    match cli.command {
        Command::Ingest { patents, citations, ws, cohort, strict, duration } => {
            let cfg = IngestConfig { cohort, strict, declared_duration: duration };
            let report = ingest::ingest(&patents, &citations, &ws.workspace, &cfg)?;
            print_report(&report)
        }
        Command::Summarize { ws } => print_report(&ingest::summarize(&ws.workspace)?),
        Command::Impact { ws } => {
            let workspace = Workspace::open(&ws.workspace);
            let mut manifest = workspace.load_manifest()?;
            let ds = workspace.load_dataset()?;
            let table = compute_impact(&ds, manifest.config.cohort)?;
            workspace.write_impact(&table)?;
            let spec = HitSpec::default();
            manifest.hit_cutoffs.clear();
            for population in [HitPopulation::All, HitPopulation::Team] {
                if let Ok(cutoff) = bind_hit_threshold(&spec, &population.impacts(&ds, &table)) {
                    manifest.hit_cutoffs.push(BoundCutoff {
                        spec: spec.to_string(),
                        population: population.as_str().into(),
                        cutoff,
                    });
                }
            }
            workspace.write_manifest(&manifest)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "n_patents": table.impacts.len(),
                    "cohort": table.basis,
                    "cohort_means": table.cohort_means,
                    "hit_cutoffs": manifest.hit_cutoffs,
                }))?
            );
            Ok(())
        }
        Command::Distfit { ws, variable, split_halves, exclude_solo, out } => {
            let loaded = load(&ws.workspace, &mut run)?;
            run.config_hash = sha256_hex(
                json!({"variable": variable, "split_halves": split_halves, "include_solo": !exclude_solo})
                    .to_string()
                    .as_bytes(),
            );
            let d = distfit(&loaded.ds, Some(&loaded.impact), variable, split_halves, !exclude_solo);
            let series = ccdf_csv(&d.series).into_bytes();
            let fit = json(&d);
            let dir = match out.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
                _ => PathBuf::from("."),
            };
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let name = out.file_name().context("--out needs a file name")?.to_string_lossy().into_owned();
            let outputs = vec![
                OutputDigest { file: name, sha256: sha256_hex(&series) },
                OutputDigest { file: "fit.json".into(), sha256: sha256_hex(&fit) },
            ];
            write_atomic(&out, &series).with_context(|| format!("writing {}", out.display()))?;
            write_atomic(&dir.join("fit.json"), &fit)?;
            write_atomic(&dir.join(RUN_MANIFEST), &json(&run.manifest(outputs)))?;
            Ok(())
        }
        Command::Sequences { ws, format, out } => {
            let loaded = load(&ws.workspace, &mut run)?;
            let teams = build_team_sequences(&loaded.ds);
            let pairs = build_pair_sequences(&loaded.ds);
            run.config_hash = sha256_hex(format.as_bytes());
            let files: Files = if format == "bin" {
                vec![
                    ("team_sequences.bin".into(), encode_team_sequences(&teams)),
                    ("pair_sequences.bin".into(), encode_pair_sequences(&pairs)),
                ]
            } else {
                let mut t = Vec::new();
                write_team_csv(&teams, &loaded.ds, &mut t)?;
                let mut p = Vec::new();
                write_pair_csv(&pairs, &loaded.ds, &mut p)?;
                vec![("team_sequences.csv".into(), t), ("pair_sequences.csv".into(), p)]
            };
            run.commit(&out, &files)
        }
        Command::Analyze { kind, ws, analysis, out } => {
            analysis.validate()?;
            let loaded = load(&ws.workspace, &mut run)?;
            let cfg = analysis.config();
            run.config_hash = sha256_hex(
                json!({"analysis": kind, "config": cfg, "thresholds": analysis.thresholds}).to_string().as_bytes(),
            );
            let teams = build_team_sequences(&loaded.ds);
            let ctx = Context { ds: &loaded.ds, impact: &loaded.impact, teams: &teams, config: &cfg };
            let files = analysis_files(kind, &ctx, None, &analysis.thresholds)?;
            run.commit(&out, &files)
        }
        Command::CompareP1 { first, second, min_samples, impact_bin_width, out } => {
            if !(impact_bin_width > 0.0 && impact_bin_width.is_finite()) {
                bail!(UsageError("--impact-bin-width must be positive".into()));
            }
            let cfg = AnalysisConfig { min_samples, impact_bin_width, ..Default::default() };
            run.config_hash = sha256_hex(json!({"analysis": "compare-p1", "config": cfg}).to_string().as_bytes());
            let mut obs = Vec::new();
            for ws in [&first, &second] {
                let loaded = load(ws, &mut run)?;
                let teams = build_team_sequences(&loaded.ds);
                obs.push(prediction1_observations(&teams, &loaded.impact));
            }
            let c = compare_prediction1(&obs[0], &obs[1], &cfg)?;
            let files: Files = vec![
                ("series.csv".into(), series_csv([&c.greater, &c.lesser]).into_bytes()),
                ("tests.csv".into(), tests_csv(&c.tests).into_bytes()),
                (
                    "provenance.json".into(),
                    json(&json!({
                        "first": first.display().to_string(),
                        "second": second.display().to_string(),
                        "provenance": c.greater.provenance,
                        "test": "first > second subsequent-patent counts (one-sided rank-sum per impact bin)",
                    })),
                ),
            ];
            run.commit(&out, &files)
        }
        Command::Synth { config, out } => {
            run.inputs.push(file_digest(&config)?);
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = GenConfig::from_json(&text)?;
            let canonical = serde_json::to_vec_pretty(&cfg)?;
            run.config_hash = sha256_hex(&canonical);
            let data = generate(&cfg)?;
            let files: Files = vec![
                ("patents.csv".into(), data.patents_csv()),
                ("citations.csv".into(), data.citations_csv()),
                ("config.json".into(), canonical),
            ];
            run.commit(&out, &files)
        }
        Command::Report { ws, analysis, exclude_solo, out } => {
            analysis.validate()?;
            let loaded = load(&ws.workspace, &mut run)?;
            let cfg = analysis.config();
            run.config_hash = sha256_hex(
                json!({"report": true, "config": cfg, "thresholds": analysis.thresholds, "include_solo": !exclude_solo})
                    .to_string()
                    .as_bytes(),
            );
            let teams = build_team_sequences(&loaded.ds);
            let pairs = build_pair_sequences(&loaded.ds);
            let ctx = Context { ds: &loaded.ds, impact: &loaded.impact, teams: &teams, config: &cfg };
            let files = report_files(&ctx, &pairs, &analysis.thresholds, !exclude_solo)?;
            run.commit(&out, &files)
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
