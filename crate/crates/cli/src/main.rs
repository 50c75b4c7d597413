//! `subext`: command-line front end for sources, oracles, extractors, the
//! pipeline and the bipartite-graph harness.
//!
//! Exit codes: 0 pass, 1 fail, 2 inconclusive.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use subext_core::extract::{standard_family, verify_extractor, ExtractorDescriptor, ExtractorKind};
use subext_core::harness::disperser::run_disperser_experiment;
use subext_core::harness::ramsey::{adjacency, ramsey_edge, rectangle_search, RectangleOutcome, SearchMode};
use subext_core::harness::{ExperimentConfig, OutputFormat};
use subext_core::oracles::{
    check_discovery, check_fix, check_split, check_three_types, find_entropy_tree, fix_function_subsource, split_by_conditional_entropy,
    three_types,
};
use subext_core::pipeline::{check_trace, subext_trace, PipelineConfig, PipelineDescriptor};
use subext_core::tree::validate_structure;
use subext_core::{BitString, EntropyTree, ExplicitSource};

#[derive(Parser)]
#[command(name = "subext", version, about = "Weak sources, subsource oracles and a two-source sub-extractor pipeline")]
struct Cli {
    /// Root seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of trials for sampled experiments.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Source files: structure, entropy and distances.
    #[command(subcommand)]
    Src(SrcCommand),
    /// Subsource oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Extractor verification.
    #[command(subcommand)]
    Xtract(XtractCommand),
    /// The sub-extractor pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Bipartite graphs from the first output bit.
    #[command(subcommand)]
    Ramsey(RamseyCommand),
}

#[derive(Args)]
struct SourceArg {
    /// Source JSON file.
    #[arg(long)]
    source: PathBuf,
}

#[derive(Subcommand)]
enum SrcCommand {
    /// Checks a source against an entropy-tree at entropy `k`.
    Validate {
        #[command(flatten)]
        src: SourceArg,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Min-entropy and block-source profile.
    Entropy {
        #[command(flatten)]
        src: SourceArg,
    },
    /// Distance to min-entropy `k`, or to a `k`-block-source with `--block`.
    Distance {
        #[command(flatten)]
        src: SourceArg,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        block: bool,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Fixes the bits `start..end` to their heaviest value.
    Fix {
        #[command(flatten)]
        src: SourceArg,
        #[arg(long)]
        start: usize,
        #[arg(long)]
        end: usize,
    },
    /// Splits by conditional min-entropy of the right half.
    Split {
        #[command(flatten)]
        src: SourceArg,
        #[arg(long)]
        tau1: f64,
        #[arg(long)]
        tau2: f64,
    },
    /// Left-heavy, block-source or left-fixed subsource.
    ThreeTypes {
        #[command(flatten)]
        src: SourceArg,
        #[arg(long)]
        k: f64,
    },
    /// Finds an entropy-tree carried by a subsource.
    Tree {
        #[command(flatten)]
        src: SourceArg,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

#[derive(Subcommand)]
enum XtractCommand {
    /// Worst exact output distance over random flat block/weak source pairs.
    Verify {
        #[arg(long, value_enum, default_value_t = Kind::Table)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Entropy of the sampled sources.
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ip,
    Table,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    l: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Runs the disperser experiment described by `--config`.
    Run,
    /// Full trace of one evaluation. The pipeline comes from `--config` or
    /// the shape flags with table extractors keyed by `--seed`.
    Trace {
        #[arg(long)]
        x: BitString,
        #[arg(long)]
        y: BitString,
        #[command(flatten)]
        shape: PipelineArgs,
    },
}

#[derive(Subcommand)]
enum RamseyCommand {
    /// Edge bit between `u` and `v`.
    Edge {
        #[arg(long)]
        u: BitString,
        #[arg(long)]
        v: BitString,
        #[command(flatten)]
        shape: PipelineArgs,
    },
    /// Builds the graph and searches for a `k x k` monochromatic rectangle.
    Scan {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Mode::Exhaustive)]
        mode: Mode,
        /// Row-times-column subset budget (exhaustive) or attempts
        /// (randomized).
        #[arg(long, default_value_t = 100_000_000)]
        budget: u128,
        #[command(flatten)]
        shape: PipelineArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Randomized,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    fn of(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_source(arg: &SourceArg) -> Result<ExplicitSource> {
    Ok(ExplicitSource::from_json(&read(&arg.source)?)?)
}

fn pipeline_config(cli: &Cli, shape: &PipelineArgs) -> Result<PipelineConfig> {
    let descriptor = match &cli.config {
        Some(path) => serde_json::from_str::<PipelineDescriptor>(&read(path)?).context("parsing pipeline descriptor")?,
        None => PipelineDescriptor::table(shape.n, shape.l, shape.m, cli.seed.unwrap_or(0)),
    };
    Ok(PipelineConfig::build(&descriptor)?)
}

/// Flattens nested JSON into `path,value` rows.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn emit<T: Serialize>(format: Format, value: &T) -> Result<()> {
    let value = serde_json::to_value(value)?;
    let stdout = io::stdout();
    match format {
        Format::Json => {
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &value)?;
            writeln!(lock)?;
        }
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut w = csv::Writer::from_writer(stdout.lock());
            w.write_record(["key", "value"])?;
            for (k, v) in rows {
                w.write_record([k, v])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Status> {
    let format = cli.format;
    match &cli.command {
        Command::Src(cmd) => match cmd {
            SrcCommand::Validate { src, tree, k, eps } => {
                let source = load_source(src)?;
                let tree = EntropyTree::from_json(&read(tree)?)?;
                let report = validate_structure(&source, &tree, *k, *eps)?;
                emit(format, &report)?;
                Ok(Status::of(report.pass))
            }
            SrcCommand::Entropy { src } => {
                let source = load_source(src)?;
                let mut out = json!({ "n": source.n(), "support": source.support_size(), "minEntropy": source.min_entropy() });
                if source.n() % 2 == 0 {
                    out["block"] = serde_json::to_value(source.block_report()?)?;
                }
                emit(format, &out)?;
                Ok(Status::Pass)
            }
            SrcCommand::Distance { src, k, block } => {
                let source = load_source(src)?;
                let distance = if *block { source.distance_to_block_source(*k)? } else { source.distance_to_min_entropy(*k)? };
                emit(format, &json!({ "k": k, "target": if *block { "block-source" } else { "min-entropy" }, "distance": distance }))?;
                Ok(Status::Pass)
            }
        },
        Command::Oracle(cmd) => match cmd {
            OracleCommand::Fix { src, start, end } => {
                let source = load_source(src)?;
                if start >= end || *end > source.n() {
                    bail!("bit range {start}..{end} is outside 0..{}", source.n());
                }
                let f = |x: &BitString| x.slice(*start, *end);
                let out = fix_function_subsource(&source, end - start, f)?;
                let ok = check_fix(&source, end - start, f, &out);
                emit(format, &json!({ "value": out.value, "witness": out.witness.to_record(), "verified": ok }))?;
                Ok(Status::of(ok))
            }
            OracleCommand::Split { src, tau1, tau2 } => {
                let source = load_source(src)?;
                let out = split_by_conditional_entropy(&source, *tau1, *tau2)?;
                let check = check_split(&source, *tau1, *tau2, &out)?;
                emit(format, &json!({ "bucket": out.bucket, "route": out.route, "witness": out.witness.to_record(), "check": check }))?;
                Ok(Status::of(check.pass()))
            }
            OracleCommand::ThreeTypes { src, k } => {
                let source = load_source(src)?;
                let out = three_types(&source, *k)?;
                let check = check_three_types(*k, &out)?;
                emit(
                    format,
                    &json!({ "case": out.case, "withinBudget": out.within_budget, "witness": out.witness.to_record(), "check": check }),
                )?;
                Ok(Status::of(check.pass()))
            }
            OracleCommand::Tree { src, k, levels } => {
                let source = load_source(src)?;
                let d = find_entropy_tree(&source, *k, *levels)?;
                let ok = check_discovery(&d)?;
                emit(
                    format,
                    &json!({
                        "tree": d.tree,
                        "witness": d.witness.to_record(),
                        "budgetUsed": d.budget_used,
                        "budgetBound": d.budget_bound,
                        "structureK": d.structure_k,
                        "verified": ok,
                    }),
                )?;
                Ok(Status::of(ok))
            }
        },
        Command::Xtract(XtractCommand::Verify { kind, n, m, k, threshold }) => {
            let kind = match kind {
                Kind::Ip => ExtractorKind::Ip,
                Kind::Table => ExtractorKind::Table,
            };
            let seed = cli.seed.unwrap_or(0);
            let ext = ExtractorDescriptor { seed, ..ExtractorDescriptor::new(kind) }.with_shape(*n, *m).block_weak()?;
            let trials = usize::try_from(cli.trials.unwrap_or(20))?;
            let verdict = verify_extractor(ext.as_ref(), standard_family(*n, *k), &format!("block-flat k={k}"), trials, *threshold, seed)?;
            emit(format, &verdict)?;
            Ok(Status::of(verdict.pass))
        }
        Command::Pipeline(cmd) => match cmd {
            PipelineCommand::Run => {
                let path = cli.config.as_ref().context("pipeline run needs --config")?;
                let mut cfg = ExperimentConfig::from_json(&read(path)?)?;
                if let Some(t) = cli.trials {
                    cfg.trials = t;
                }
                if let Some(s) = cli.seed {
                    cfg.seed = s;
                }
                let report = run_disperser_experiment(&cfg)?;
                let format = if cli.format == Format::Csv || cfg.format == OutputFormat::Csv { Format::Csv } else { Format::Json };
                emit(format, &report)?;
                Ok(Status::of(report.pass))
            }
            PipelineCommand::Trace { x, y, shape } => {
                let cfg = pipeline_config(cli, shape)?;
                let trace = subext_trace(x, y, &cfg)?;
                let violations = check_trace(&trace, &cfg);
                emit(format, &json!({ "trace": trace, "violations": violations }))?;
                Ok(Status::of(violations.is_empty()))
            }
        },
        Command::Ramsey(cmd) => match cmd {
            RamseyCommand::Edge { u, v, shape } => {
                let cfg = pipeline_config(cli, shape)?;
                emit(format, &json!({ "u": u, "v": v, "edge": ramsey_edge(u, v, &cfg)? }))?;
                Ok(Status::Pass)
            }
            RamseyCommand::Scan { k, mode, budget, shape } => {
                let cfg = pipeline_config(cli, shape)?;
                let graph = adjacency(&cfg)?;
                let mode = match mode {
                    Mode::Exhaustive => SearchMode::Exhaustive,
                    Mode::Randomized => SearchMode::Randomized,
                };
                let out = match rectangle_search(&graph, *k, mode, *budget, cli.seed.unwrap_or(0)) {
                    Ok(out) => out,
                    Err(e @ subext_core::Error::BudgetRefused { .. }) => {
                        emit(format, &json!({ "refused": e.to_string() }))?;
                        return Ok(Status::Inconclusive);
                    }
                    Err(e) => return Err(e.into()),
                };
                emit(format, &out)?;
                // a rectangle means the graph fails to be Ramsey at this size
                Ok(match out {
                    RectangleOutcome::Found { .. } => Status::Fail,
                    RectangleOutcome::NoneExists => Status::Pass,
                    RectangleOutcome::NoneFound { .. } => Status::Inconclusive,
                })
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Inconclusive.code())
        }
    }
}
