// SPDX-License-Identifier: Apache-2.0

//! `gnnceff` pipeline: generate, label, reduce, export, infer, evaluate, bench.

pub mod bench;
pub mod config;
pub mod error;
pub mod io;

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use ceff_core::ceff::{compute_ceff_dartu_net, CeffMethod, CeffResult};
use ceff_core::gat::{predict, WeightBundle};
use ceff_core::graph::{
    attach_label, export_dataset, to_gnn_graph, DatasetManifest, GraphOptions, SplitCounts, DATASET_FORMAT_VERSION,
    FEATURE_ORDER,
};
use ceff_core::metrics::{check_lengths, evaluate, EvalReport, Sample};
use ceff_core::mor::reduce_network;
use ceff_core::netgen::{corpus_counts, dataset_split, generate_net, CorpusCounts, GenSpec, Split};
use ceff_core::rc::{total_capacitance, RcNetwork};
use ceff_core::sim::{oracle_ceff, simulate, spice_deck, SimOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::PipelineConfig;
pub use error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "gnnceff", version, about = "Effective-capacitance labeling, graph export and GNN inference")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration file (JSON); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-net work.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override every driver's low threshold fraction.
    #[arg(long, global = true)]
    pub vlo: Option<f64>,
    /// Override every driver's high threshold fraction.
    #[arg(long, global = true)]
    pub vhi: Option<f64>,
    /// Write the run report here instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic net corpus and its train/test split.
    Gen(GenArgs),
    /// Oracle labels from transient simulation.
    Label(LabelArgs),
    /// Pi-model reduction of every net.
    Reduce(IoArgs),
    /// Effective capacitance by an analytical method.
    Ceff(CeffArgs),
    /// Driver-output t50 from transient simulation.
    Simulate(SimulateArgs),
    /// Labeled train/test graph files plus a manifest.
    ExportGraphs(ExportArgs),
    /// Predict Ceff with a weight bundle.
    Infer(InferArgs),
    /// Accuracy report against labels, optionally with a baseline.
    Eval(EvalArgs),
    /// Throughput of Dartu against batched inference.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Inclusive degree range, `min:max`.
    #[arg(long, value_parser = parse_degrees)]
    pub degrees: Option<(usize, usize)>,
    #[arg(long)]
    pub per_degree: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Technology profile (JSON).
    #[arg(long)]
    pub tech: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Also write one SPICE deck per net into this directory.
    #[arg(long)]
    pub spice_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Dartu,
    Oracle,
    Lumped,
}

#[derive(Debug, Args)]
pub struct CeffArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_enum, default_value = "dartu")]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// End time in seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Fixed time step in seconds; skips step refinement.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Corpus manifest written by `gen`, for the split.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub bidirectional: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Dartu results; splits the report by their failed flag.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Net corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Timed passes per method; the fastest counts.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_degrees(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad degree `{v}`: {e}"));
    Ok((p(a)?, p(b)?))
}

// ---------------------------------------------------------------------------
// Records

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub name: String,
    pub ceff_f: f64,
    pub ctotal_f: f64,
    pub ratio: f64,
    pub t50_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceRecord {
    pub name: String,
    pub c1_f: f64,
    pub c2_f: f64,
    pub rpi_ohm: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeffRecord {
    pub name: String,
    pub ceff_f: f64,
    pub failed: bool,
    pub iterations: u32,
    pub converged: bool,
    pub method: CeffMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub name: String,
    pub t50_s: f64,
    pub step_s: f64,
    pub step_converged: bool,
    pub ctotal_f: f64,
    pub delivered_charge_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredRecord {
    pub name: String,
    pub ratio: f64,
    pub ceff_f: f64,
}

/// Written next to a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub spec: GenSpec,
    pub tech: String,
    pub counts: CorpusCounts,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub model: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<EvalReport>,
}

// ---------------------------------------------------------------------------
// Execution

/// Maps `f` over `items` on `workers` threads, keeping input order.
pub fn par_map<T, R, E, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool starts");
    pool.install(|| items.par_iter().map(f).collect())
}

/// Effective configuration and the run context derived from it.
pub struct Context {
    pub config: PipelineConfig,
    pub report: Option<PathBuf>,
}

impl Context {
    pub fn from_global(g: &GlobalArgs) -> Result<Self, CliError> {
        let mut config = match &g.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if g.workers.is_some() {
            config.workers = g.workers;
        }
        if g.vlo.is_some() {
            config.driver.vlo = g.vlo;
        }
        if g.vhi.is_some() {
            config.driver.vhi = g.vhi;
        }
        Ok(Self { config, report: g.report.clone() })
    }

    fn workers(&self) -> usize {
        self.config.workers()
    }

    /// Reads a corpus and applies driver threshold overrides.
    fn nets(&self, path: &Path) -> Result<Vec<RcNetwork>, CliError> {
        let nets = io::read_nets(path)?;
        let o = self.config.driver;
        if o.is_empty() {
            return Ok(nets);
        }
        nets.into_iter()
            .map(|n| {
                let mut d = *n.driver();
                d.v_low_frac = o.vlo.unwrap_or(d.v_low_frac);
                d.v_high_frac = o.vhi.unwrap_or(d.v_high_frac);
                n.with_driver(d).map_err(|e| CliError::Validation(format!("net `{}`: {e}", n.name())))
            })
            .collect()
    }

    fn report(&self, command: &str, body: Value) -> Value {
        json!({
            "command": command,
            "tool_version": TOOL_VERSION,
            "seed": self.config.gen.seed,
            "config_hash": self.config.hash(),
            "result": body,
        })
    }
}

fn numeric(net: &RcNetwork, e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(format!("net `{}`: {e}", net.name()))
}

pub fn run(cli: Cli) -> Result<Value, CliError> {
    let mut ctx = Context::from_global(&cli.global)?;
    match cli.command {
        Command::Gen(a) => cmd_gen(&mut ctx, a),
        Command::Label(a) => cmd_label(&ctx, a),
        Command::Reduce(a) => cmd_reduce(&ctx, a),
        Command::Ceff(a) => cmd_ceff(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::ExportGraphs(a) => cmd_export(&ctx, a),
        Command::Infer(a) => cmd_infer(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
    }
}

/// Runs the command and writes its report; returns the process exit code.
pub fn run_and_report(cli: Cli) -> i32 {
    let report_path = cli.global.report.clone();
    match run(cli) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("reports serialize");
            match report_path {
                Some(p) => match std::fs::write(&p, text + "\n") {
                    Ok(()) => 0,
                    Err(e) => {
                        eprintln!("error: {}", CliError::io(&p, e));
                        4
                    }
                },
                None => {
                    println!("{text}");
                    0
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_gen(ctx: &mut Context, a: GenArgs) -> Result<Value, CliError> {
    let spec = &mut ctx.config.gen;
    if let Some((lo, hi)) = a.degrees {
        spec.degree_min = lo;
        spec.degree_max = hi;
    }
    if let Some(n) = a.per_degree {
        spec.nets_per_degree = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(f) = a.train_fraction {
        spec.train_fraction = f;
    }
    if a.tech.is_some() {
        ctx.config.tech = a.tech.clone();
    }
    let spec = ctx.config.gen.clone();
    spec.validate()?;
    let tech = ctx.config.tech_profile()?;
    let slots: Vec<(usize, u32)> =
        spec.degrees().flat_map(|d| (0..spec.nets_per_degree).map(move |i| (d, i))).collect();
    let nets = par_map(ctx.workers(), &slots, |&(d, i)| Ok::<_, CliError>(generate_net(&spec, &tech, d, i)))?;
    {
        use std::io::Write;
        let mut w = io::create(&a.out)?;
        for n in &nets {
            w.write_all(n.to_json().as_bytes()).and_then(|_| w.write_all(b"\n")).map_err(|e| CliError::io(&a.out, e))?;
        }
        w.flush().map_err(|e| CliError::io(&a.out, e))?;
    }
    let split = dataset_split(&spec);
    let manifest = CorpusManifest {
        tool_version: TOOL_VERSION.into(),
        seed: spec.seed,
        config_hash: ctx.config.hash(),
        spec: spec.clone(),
        tech: tech.name.clone(),
        counts: corpus_counts(&spec, &split),
        split,
    };
    let manifest_path = a.manifest.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".manifest.json");
        PathBuf::from(p)
    });
    io::write_json(&manifest_path, &manifest)?;
    Ok(ctx.report(
        "gen",
        json!({
            "out": a.out, "manifest": manifest_path, "counts": manifest.counts,
        }),
    ))
}

fn label_one(net: &RcNetwork) -> Result<LabelRecord, CliError> {
    let r = oracle_ceff(net).map_err(|e| numeric(net, e))?;
    let ct = total_capacitance(net);
    Ok(LabelRecord { name: net.name().into(), ceff_f: r.ceff, ctotal_f: ct, ratio: r.ceff / ct, t50_s: r.t50 })
}

fn cmd_label(ctx: &Context, a: LabelArgs) -> Result<Value, CliError> {
    let nets = ctx.nets(&a.io.corpus)?;
    let labels = par_map(ctx.workers(), &nets, label_one)?;
    io::write_records(&a.io.out, &labels)?;
    if let Some(dir) = &a.spice_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for n in &nets {
            let p = dir.join(format!("{}.sp", n.name()));
            std::fs::write(&p, spice_deck(n, None)).map_err(|e| CliError::io(&p, e))?;
        }
    }
    let mean_ratio = labels.iter().map(|l| l.ratio).sum::<f64>() / labels.len().max(1) as f64;
    Ok(ctx.report("label", json!({ "nets": labels.len(), "out": a.io.out, "mean_ratio": mean_ratio })))
}

fn cmd_reduce(ctx: &Context, a: IoArgs) -> Result<Value, CliError> {
    let nets = ctx.nets(&a.corpus)?;
    let recs = par_map(ctx.workers(), &nets, |n| {
        let pi = reduce_network(n).map_err(|e| numeric(n, e))?;
        Ok::<_, CliError>(ReduceRecord {
            name: n.name().into(),
            c1_f: pi.c1,
            c2_f: pi.c2,
            rpi_ohm: pi.r_pi,
            degenerate: pi.degenerate,
        })
    })?;
    io::write_records(&a.out, &recs)?;
    let degenerate = recs.iter().filter(|r| r.degenerate).count();
    Ok(ctx.report("reduce", json!({ "nets": recs.len(), "degenerate": degenerate, "out": a.out })))
}

fn ceff_one(net: &RcNetwork, method: Method) -> Result<CeffResult, CliError> {
    match method {
        Method::Dartu => compute_ceff_dartu_net(net).map_err(|e| numeric(net, e)),
        Method::Oracle => oracle_ceff(net).map_err(|e| numeric(net, e)),
        Method::Lumped => Ok(CeffResult {
            ceff: total_capacitance(net),
            method: CeffMethod::LumpedFallback,
            converged: true,
            failed: false,
            iterations: 0,
            t50: f64::NAN,
        }),
    }
}

fn cmd_ceff(ctx: &Context, a: CeffArgs) -> Result<Value, CliError> {
    let nets = ctx.nets(&a.io.corpus)?;
    let recs = par_map(ctx.workers(), &nets, |n| {
        let r = ceff_one(n, a.method)?;
        Ok::<_, CliError>(CeffRecord {
            name: n.name().into(),
            ceff_f: r.ceff,
            failed: r.failed,
            iterations: r.iterations,
            converged: r.converged,
            method: r.method,
        })
    })?;
    io::write_records(&a.io.out, &recs)?;
    let failed = recs.iter().filter(|r| r.failed).count();
    Ok(ctx.report(
        "ceff",
        json!({
            "nets": recs.len(),
            "failed": failed,
            "fail_pct": 100.0 * failed as f64 / recs.len().max(1) as f64,
            "out": a.io.out,
        }),
    ))
}

fn cmd_simulate(ctx: &Context, a: SimulateArgs) -> Result<Value, CliError> {
    let nets = ctx.nets(&a.io.corpus)?;
    let opts = SimOptions { horizon: a.horizon, fixed_step: a.step, ..Default::default() };
    if let Some(h) = a.step.filter(|h| !(*h > 0.0)) {
        return Err(CliError::Validation(format!("step {h} must be positive")));
    }
    let recs = par_map(ctx.workers(), &nets, |n| {
        let r = simulate(n, &opts).map_err(|e| numeric(n, e))?;
        Ok::<_, CliError>(SimRecord {
            name: n.name().into(),
            t50_s: r.t50_root,
            step_s: r.step,
            step_converged: r.step_converged,
            ctotal_f: total_capacitance(n),
            delivered_charge_c: r.delivered_charge,
        })
    })?;
    io::write_records(&a.io.out, &recs)?;
    let unconverged = recs.iter().filter(|r| !r.step_converged).count();
    Ok(ctx.report("simulate", json!({ "nets": recs.len(), "step_unconverged": unconverged, "out": a.io.out })))
}

fn cmd_export(ctx: &Context, a: ExportArgs) -> Result<Value, CliError> {
    let nets = ctx.nets(&a.corpus)?;
    let labels: HashMap<String, LabelRecord> =
        io::read_records::<LabelRecord>(&a.labels)?.into_iter().map(|l| (l.name.clone(), l)).collect();
    let manifest: CorpusManifest = io::read_json(&a.manifest)?;
    let train: HashSet<&str> = manifest.split.train.iter().map(String::as_str).collect();
    let test: HashSet<&str> = manifest.split.test.iter().map(String::as_str).collect();
    let opts = GraphOptions { bidirectional: a.bidirectional };
    let graphs = par_map(ctx.workers(), &nets, |n| {
        let name = n.name();
        let is_train = if train.contains(name) {
            true
        } else if test.contains(name) {
            false
        } else {
            return Err(CliError::Validation(format!("net `{name}` is in neither split")));
        };
        let label = labels
            .get(name)
            .ok_or_else(|| CliError::from(ceff_core::graph::GraphError::MissingLabel(name.into())))?;
        Ok((attach_label(to_gnn_graph(n, opts), label.ceff_f)?, is_train))
    })?;
    let train_path = a.out_dir.join("train.jsonl");
    let test_path = a.out_dir.join("test.jsonl");
    let mut tw = io::create(&train_path)?;
    let mut sw = io::create(&test_path)?;
    let (names, norm_stats) = export_dataset(graphs, &mut tw, &mut sw)?;
    use std::io::Write;
    tw.flush().map_err(|e| CliError::io(&train_path, e))?;
    sw.flush().map_err(|e| CliError::io(&test_path, e))?;
    let ds = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        tool_version: TOOL_VERSION.into(),
        seed: Some(manifest.seed),
        config_hash: ctx.config.hash(),
        feature_order: FEATURE_ORDER.iter().map(|s| s.to_string()).collect(),
        counts: SplitCounts { train: names.train.len() as u64, test: names.test.len() as u64 },
        split: names,
        norm_stats,
        bidirectional: a.bidirectional,
    };
    let manifest_path = a.out_dir.join("manifest.json");
    io::write_json(&manifest_path, &ds)?;
    Ok(ctx.report(
        "export-graphs",
        json!({ "counts": ds.counts, "train": train_path, "test": test_path, "manifest": manifest_path }),
    ))
}

fn cmd_infer(ctx: &Context, a: InferArgs) -> Result<Value, CliError> {
    let bundle = WeightBundle::load(&a.weights).map_err(|e| match e {
        ceff_core::gat::BundleError::Io(s) => CliError::io(&a.weights, s),
        other => CliError::Validation(format!("{}: {other}", a.weights.display())),
    })?;
    let graphs = io::read_graph_file(&a.input)?;
    predict(&[], &bundle)?;
    let chunks: Vec<&[ceff_core::graph::GnnGraph]> = graphs.chunks(bench::BATCH_GRAPHS).collect();
    let model = ceff_core::gat::Model::new(&bundle);
    let preds: Vec<PredRecord> = par_map(ctx.workers(), &chunks, |c| Ok::<_, CliError>(model.predict(c)))?
        .into_iter()
        .flatten()
        .map(|p| PredRecord { name: p.name, ratio: p.ratio, ceff_f: p.ceff })
        .collect();
    io::write_records(&a.out, &preds)?;
    Ok(ctx.report("infer", json!({ "graphs": preds.len(), "out": a.out })))
}

/// Joins predictions to labels by name. Labels may cover more nets than were
/// predicted; a prediction without a label is a length mismatch.
fn samples_by_label<'a, I>(labels: &HashMap<&str, f64>, preds: I, what: &'static str) -> Result<Vec<Sample>, CliError>
where
    I: Iterator<Item = (&'a str, f64)>,
{
    let preds: Vec<(&str, f64)> = preds.collect();
    let samples: Vec<Sample> = preds
        .iter()
        .filter_map(|&(name, pred)| labels.get(name).map(|&label| Sample { name: name.into(), pred, label }))
        .collect();
    check_lengths(what, preds.len(), samples.len())?;
    Ok(samples)
}

fn cmd_eval(ctx: &Context, a: EvalArgs) -> Result<Value, CliError> {
    let labels_vec: Vec<LabelRecord> = io::read_records(&a.labels)?;
    let labels: HashMap<&str, f64> = labels_vec.iter().map(|l| (l.name.as_str(), l.ceff_f)).collect();
    let preds: Vec<PredRecord> = io::read_records(&a.pred)?;
    let model_samples = samples_by_label(&labels, preds.iter().map(|p| (p.name.as_str(), p.ceff_f)), "predictions")?;
    let out = match &a.baseline {
        None => EvalOutput { model: evaluate(&model_samples, None)?, baseline: None },
        Some(path) => {
            let base: Vec<CeffRecord> = io::read_records(path)?;
            let failed_by_name: HashMap<&str, bool> = base.iter().map(|b| (b.name.as_str(), b.failed)).collect();
            let flags = model_samples
                .iter()
                .map(|s| {
                    failed_by_name
                        .get(s.name.as_str())
                        .copied()
                        .ok_or_else(|| CliError::Validation(format!("baseline: no result for `{}`", s.name)))
                })
                .collect::<Result<Vec<bool>, _>>()?;
            let base_ceff: HashMap<&str, f64> = base.iter().map(|b| (b.name.as_str(), b.ceff_f)).collect();
            check_lengths("baseline", flags.len(), model_samples.len())?;
            let base_samples = samples_by_label(
                &labels,
                model_samples.iter().map(|s| (s.name.as_str(), base_ceff[s.name.as_str()])),
                "baseline",
            )?;
            EvalOutput {
                model: evaluate(&model_samples, Some(&flags))?,
                baseline: Some(evaluate(&base_samples, Some(&flags))?),
            }
        }
    };
    if let Some(p) = &a.out {
        io::write_json(p, &ctx.report("eval", serde_json::to_value(&out).expect("serializes")))?;
    }
    Ok(ctx.report("eval", serde_json::to_value(&out).expect("serializes")))
}

fn cmd_bench(ctx: &Context, a: BenchArgs) -> Result<Value, CliError> {
    let nets = ctx.nets(&a.corpus)?;
    let bundle = WeightBundle::load(&a.weights)?;
    let report = bench::run_bench(&nets, &bundle, ctx.workers(), a.repeats)?;
    let value = ctx.report("bench", serde_json::to_value(&report).expect("serializes"));
    if let Some(p) = &a.out {
        io::write_json(p, &value)?;
    }
    Ok(value)
}
