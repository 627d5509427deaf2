use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cinepipe_core::eval::{
    aggregate_ratings, binary_accuracy, parse_jsonl, round_half_up, summarize_llm_audit, win_rate, BinaryLabel,
    RankingRecord, RatingRecord,
};
use cinepipe_core::screenplay::{RetrievalAudit, SampleVotes};
use cinepipe_core::taxonomy::{generate_plan, parse_plan_jsonl, Taxonomy};
use cinepipe_core::transition::{
    ingest_tracks, plan_transition, stitch_timeline, synth_tracks, ClipRef, MotionProfile, SynthSpec, Vec2,
};
use cinepipe_pipeline::server::{serve, AppState};
use cinepipe_pipeline::{export_manifest, run_batch, Pipeline, PipelineConfig, RunStore, Stage};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "cinepipe", version, about = "Staged cinematic video generation pipeline")]
struct Cli {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run store directory.
    #[arg(long, global = true, default_value = "cinepipe-store")]
    store: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a balanced plan of control signals.
    Plan {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Plan file to write (JSON lines); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also create run records in the store.
        #[arg(long)]
        register: bool,
    },
    /// Register samples from a plan file and run them one after another.
    Run {
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Runs to advance; defaults to every sample in the plan.
        ids: Vec<String>,
    },
    /// Continue failed or interrupted runs; all unfinished runs when no id is given.
    Resume { ids: Vec<String> },
    /// Register a plan and run it on parallel workers.
    Batch {
        plan: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Plan one transition from a track file.
    Transition(TransitionArgs),
    /// Aggregate annotation exports.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Write the dataset manifest of all final runs.
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        balance_out: Option<PathBuf>,
    },
    /// Serve the review API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8787")]
        bind: SocketAddr,
        /// Environment variable holding the bearer token.
        #[arg(long)]
        token_env: Option<String>,
        /// Do not continue runs after approval.
        #[arg(long)]
        no_auto_resume: bool,
    },
    /// Write a synthetic track file with known ground truth.
    MockGen(MockGenArgs),
}

#[derive(Args)]
struct TransitionArgs {
    tracks: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    k_fit: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    field_out: Option<PathBuf>,
    #[arg(long)]
    cuts_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Mean and dispersion per method and metric.
    Ratings { file: PathBuf },
    /// Binary correctness accuracy per field.
    Accuracy { file: PathBuf },
    /// Share of rankings placing each method first.
    WinRate { file: PathBuf },
    /// Retrieval accuracy per storyteller model from judge votes.
    Audit { file: PathBuf },
}

#[derive(Args)]
struct MockGenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 24)]
    points: usize,
    #[arg(long, default_value_t = 1280)]
    width: u32,
    #[arg(long, default_value_t = 720)]
    height: u32,
    #[arg(long, default_value_t = 24.0)]
    fps: f64,
    #[arg(long, default_value_t = 48)]
    len_a: usize,
    #[arg(long, default_value_t = 48)]
    len_b: usize,
    #[arg(long, default_value_t = 0)]
    stall_a: usize,
    #[arg(long, default_value_t = 0)]
    stall_b: usize,
    /// Pixels per frame.
    #[arg(long, default_value_t = 3.0)]
    speed_a: f64,
    #[arg(long, default_value_t = 3.0)]
    speed_b: f64,
    /// Direction in degrees.
    #[arg(long, default_value_t = 0.0)]
    angle_a: f64,
    #[arg(long, default_value_t = 0.0)]
    angle_b: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn pipeline(cli: &Cli) -> Result<Pipeline> {
    let cfg = load_config(cli.config.as_deref())?;
    let store = RunStore::open(&cli.store).with_context(|| format!("opening store {}", cli.store.display()))?;
    Ok(Pipeline::new(cfg, store)?)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn print(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn register(p: &Pipeline, plan: &Path) -> Result<Vec<String>> {
    let samples = parse_plan_jsonl(&read(plan)?)?;
    Ok(p.plan(&samples)?)
}

fn summary(rec: &cinepipe_pipeline::RunRecord) -> serde_json::Value {
    json!({
        "run_id": rec.run_id,
        "stage": rec.stage,
        "paused": rec.is_paused(),
        "failure": rec.failure.as_ref().map(|f| &f.message),
        "video": rec.output.as_ref().map(|o| &o.video),
        "total_frames": rec.output.as_ref().map(|o| o.total_frames),
    })
}

fn cmd_transition(cli: &Cli, args: &TransitionArgs) -> Result<()> {
    let mut params = load_config(cli.config.as_deref())?.transition;
    if let Some(v) = args.window {
        params.window = v;
    }
    if let Some(v) = args.tau {
        params.tau = v;
    }
    if let Some(v) = args.k_fit {
        params.k_fit = v;
    }
    if let Some(v) = args.frames {
        params.frames = v;
    }
    if let Some(v) = args.points {
        params.points = v;
    }
    let tracks = ingest_tracks(&read(&args.tracks)?).context("ingesting track file")?;
    let meta = tracks.meta();
    let mut notes = vec![];
    // An explicit window is taken as given; the configured one shrinks to fit short clips.
    let cap = meta.clip_a_len.min(meta.clip_b_len).saturating_sub(1);
    if args.window.is_none() && params.window > cap {
        notes.push(format!(
            "scan window reduced from {} to {cap} for clips of {} and {} frames",
            params.window, meta.clip_a_len, meta.clip_b_len
        ));
        params.window = cap;
    }
    let plan = plan_transition(&tracks, &params)?;
    notes.extend(plan.warnings.iter().cloned());
    let cuts = stitch_timeline(
        &plan,
        &ClipRef::new("clip_a", meta.clip_a_len),
        &ClipRef::new("transition", params.frames),
        &ClipRef::new("clip_b", meta.clip_b_len),
    )?;
    if let Some(p) = &args.field_out {
        write(p, &plan.field.to_json())?;
    }
    if let Some(p) = &args.cuts_out {
        write(p, &serde_json::to_string_pretty(&cuts)?)?;
    }
    print(&json!({
        "cut_a": plan.cut_a,
        "cut_b": plan.cut_b,
        "frames": plan.field.header.frames,
        "points": plan.field.trajectories.len(),
        "clip_a_len": meta.clip_a_len,
        "clip_b_len": meta.clip_b_len,
        "total_frames": cuts.total_frames,
        "warnings": notes,
    }))
}

#[derive(Deserialize)]
struct AuditLine {
    model: String,
    #[serde(flatten)]
    votes: SampleVotes,
}

fn cmd_eval(cmd: &EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Ratings { file } => {
            let records: Vec<RatingRecord> = parse_jsonl(&read(file)?)?;
            let cells = aggregate_ratings(&records)?;
            let rows: Vec<_> = cells
                .iter()
                .map(|c| {
                    json!({
                        "method": c.method_id,
                        "metric": c.metric_id,
                        "summary": c.summary,
                        "display": format!("{:.1} ± {:.1}", round_half_up(c.summary.mean, 1), round_half_up(c.summary.sample_sd, 1)),
                    })
                })
                .collect();
            print(&rows)
        }
        EvalCmd::Accuracy { file } => {
            let labels: Vec<BinaryLabel> = parse_jsonl(&read(file)?)?;
            if labels.is_empty() {
                bail!("no labels in {}", file.display());
            }
            let acc: BTreeMap<String, f64> =
                binary_accuracy(&labels).into_iter().map(|(k, v)| (k, round_half_up(v, 1))).collect();
            print(&acc)
        }
        EvalCmd::WinRate { file } => {
            let rankings: Vec<RankingRecord> = parse_jsonl(&read(file)?)?;
            print(&win_rate(&rankings)?)
        }
        EvalCmd::Audit { file } => {
            let lines: Vec<AuditLine> = parse_jsonl(&read(file)?)?;
            let mut by_model: BTreeMap<String, Vec<SampleVotes>> = BTreeMap::new();
            for l in lines {
                by_model.entry(l.model).or_default().push(l.votes);
            }
            let audits = by_model
                .into_iter()
                .map(|(m, v)| Ok((m, RetrievalAudit::from_votes(&v)?)))
                .collect::<Result<Vec<_>>>()?;
            print(&summarize_llm_audit(&audits)?)
        }
    }
}

fn cmd_mock_gen(args: &MockGenArgs) -> Result<()> {
    let profile = |speed: f64, angle: f64, stall: usize| {
        let r = angle.to_radians();
        MotionProfile { stall, ..MotionProfile::moving(Vec2::new(speed * r.cos(), speed * r.sin())) }
    };
    if args.len_a < 2 || args.len_b < 2 || args.points == 0 {
        bail!("clips need at least 2 frames and at least one point");
    }
    let spec = SynthSpec {
        width: args.width,
        height: args.height,
        fps: args.fps,
        clip_a_len: args.len_a,
        clip_b_len: args.len_b,
        n_points: args.points,
        a: profile(args.speed_a, args.angle_a, args.stall_a),
        b: profile(args.speed_b, args.angle_b, args.stall_b),
    };
    let out = synth_tracks(&spec, args.seed);
    match &args.out {
        Some(p) => write(p, &out.tracks.to_json())?,
        None => println!("{}", out.tracks.to_json()),
    }
    if let Some(p) = &args.truth_out {
        write(p, &serde_json::to_string_pretty(&out.truth)?)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Plan { n, seed, taxonomy, out, register: reg } => {
            let taxonomy = match taxonomy.as_ref().or(load_config(cli.config.as_deref())?.taxonomy.as_ref()) {
                Some(p) => Taxonomy::load(&read(p)?)?,
                None => Taxonomy::default_taxonomy(),
            };
            let plan = generate_plan(*n, &taxonomy, *seed)?;
            match out {
                Some(p) => {
                    write(p, &plan.to_jsonl())?;
                    print(&plan.report)?;
                }
                None => print!("{}", plan.to_jsonl()),
            }
            if *reg {
                pipeline(&cli)?.plan(&plan.entries)?;
            }
            Ok(())
        }
        Cmd::Run { plan, ids } => {
            let p = pipeline(&cli)?;
            let mut targets = match plan {
                Some(path) => register(&p, path)?,
                None => vec![],
            };
            if !ids.is_empty() {
                targets = ids.clone();
            }
            if targets.is_empty() {
                bail!("nothing to run: pass --plan or run ids");
            }
            let results = targets.iter().map(|id| Ok(summary(&p.run(id)?))).collect::<Result<Vec<_>>>()?;
            print(&results)
        }
        Cmd::Resume { ids } => {
            let p = pipeline(&cli)?;
            let targets = if ids.is_empty() {
                p.store().list()?.into_iter().filter(|r| r.stage != Stage::Final).map(|r| r.run_id).collect()
            } else {
                ids.clone()
            };
            let results = targets.iter().map(|id| Ok(summary(&p.resume(id)?))).collect::<Result<Vec<_>>>()?;
            print(&results)
        }
        Cmd::Batch { plan, parallelism } => {
            let p = pipeline(&cli)?;
            let ids = register(&p, plan)?;
            let report = run_batch(&p, &ids, parallelism.unwrap_or(p.config().parallelism));
            print(&report)?;
            if report.failed > 0 {
                bail!("{} of {} samples failed", report.failed, report.total);
            }
            Ok(())
        }
        Cmd::Transition(args) => cmd_transition(&cli, args),
        Cmd::Eval(cmd) => cmd_eval(cmd),
        Cmd::Export { out, balance_out } => {
            let p = pipeline(&cli)?;
            let manifest = export_manifest(p.store(), p.taxonomy())?;
            match out {
                Some(path) => write(path, &manifest.to_jsonl())?,
                None => print!("{}", manifest.to_jsonl()),
            }
            if let Some(path) = balance_out {
                write(path, &serde_json::to_string_pretty(&manifest.balance)?)?;
            }
            log::info!("exported {} runs, skipped {}", manifest.entries.len(), manifest.skipped.len());
            Ok(())
        }
        Cmd::Serve { bind, token_env, no_auto_resume } => {
            let token = match token_env {
                Some(var) => Some(std::env::var(var).with_context(|| format!("token variable {var} is not set"))?),
                None => None,
            };
            let state = AppState { pipeline: Arc::new(pipeline(&cli)?), token, auto_resume: !no_auto_resume };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, *bind))?;
            Ok(())
        }
        Cmd::MockGen(args) => cmd_mock_gen(args),
    }
}
