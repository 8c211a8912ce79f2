//! Configuration-driven command-line frontend.
//!
//! Every command is a pure function of (config file, master seed): outputs
//! land in the resolved output directory and repeated runs are byte
//! identical. Exit codes: 0 success, 1 check failure, 2 configuration or
//! usage error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{resolve_analysis_policy, AnalysisConfig, BoundsConfig, LoadedConfig};
use crate::error::{Error, Result};
use crate::fed::{run_federated_policy_iteration, Algorithm, FedConfig, FedHistory};
use crate::hetero::{heterogeneity_report, uniform_weights};
use crate::report::{
    history_csv_rows, history_json, iteration_csv_rows, OutputWriter, HISTORY_CSV_COLUMNS,
    ITERATION_CSV_COLUMNS,
};
use crate::rng::RngStream;
use crate::sweep::run_bound_sweep;
use crate::trainer::run_fedkl;

pub const OUTPUT_DIR_ENV: &str = "FEDKL_OUTPUT_DIR";
pub const COMPARE_REPS: usize = 3;
const COMPARE_LABEL: u64 = 0x636f_6d70_6172_65;

/// The per-repetition master seeds `compare` derives from the run seed; all
/// algorithms share them so their return columns are directly comparable.
pub fn compare_rep_seeds(master_seed: u64) -> Vec<u64> {
    (0..COMPARE_REPS)
        .map(|r| RngStream::derive(master_seed, &[COMPARE_LABEL, r as u64]).next_u64())
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "fedkl", version, about = "Federated RL laboratory on exact finite MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Master-seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory override (also via FEDKL_OUTPUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker-thread cap for per-agent parallelism.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Print per-step progress notes.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured MDP family as JSON documents.
    GenEnv(CommonArgs),
    /// Heterogeneity analysis under the configured policy.
    Analyze(CommonArgs),
    /// Certify the policy-improvement bounds on seeded random instances.
    VerifyBounds(CommonArgs),
    /// Run the configured federated training algorithm.
    Train(CommonArgs),
    /// Run several algorithms with shared seeds and aligned return columns.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated algorithm tags (exact-tabular, fedkl, fedavg, fedprox).
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<String>,
    },
}

pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::GenEnv(common) => cmd_gen_env(common),
        Command::Analyze(common) => cmd_analyze(common),
        Command::VerifyBounds(common) => cmd_verify_bounds(common),
        Command::Train(common) => cmd_train(common),
        Command::Compare { common, algorithms } => cmd_compare(common, algorithms),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

struct Context {
    loaded: LoadedConfig,
    writer: OutputWriter,
    seed: u64,
}

fn build_context(common: &CommonArgs) -> Result<Context> {
    let loaded = LoadedConfig::load(&common.config)?;
    let seed =
        common.seed.or_else(|| loaded.config.fed.as_ref().map(|f| f.master_seed)).unwrap_or(0);
    let dir = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| loaded.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let writer = OutputWriter::new(&dir, &loaded.config_hash, seed)?;
    Ok(Context { loaded, writer, seed })
}

fn effective_fed(ctx: &Context) -> Result<FedConfig> {
    let mut fed = ctx.loaded.config.fed()?.clone();
    fed.master_seed = ctx.seed;
    Ok(fed)
}

fn cmd_gen_env(common: &CommonArgs) -> Result<i32> {
    let ctx = build_context(common)?;
    let family = ctx.loaded.config.env()?.build_family()?;
    let mut files = Vec::new();
    for (agent, mdp) in family.iter().enumerate() {
        let name = format!("mdp_agent_{agent:03}.json");
        let path = ctx.writer.write_raw(&name, &mdp.to_json_string())?;
        println!("wrote {}", path.display());
        files.push(name);
    }
    let manifest = serde_json::json!({
        "n_agents": family.len(),
        "n_states": family[0].n_states(),
        "n_actions": family[0].n_actions(),
        "gamma": family[0].gamma(),
        "files": files,
    });
    let path = ctx.writer.write_json("family_manifest.json", manifest)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn weights_for(ctx: &Context, n_agents: usize) -> Vec<f64> {
    match &ctx.loaded.config.fed {
        Some(fed) if fed.n_agents == n_agents => fed.effective_weights(),
        _ => uniform_weights(n_agents),
    }
}

fn cmd_analyze(common: &CommonArgs) -> Result<i32> {
    let ctx = build_context(common)?;
    let family = ctx.loaded.config.env()?.build_family()?;
    let analysis = ctx.loaded.config.analysis.clone().unwrap_or_else(AnalysisConfig::default);
    let policy =
        resolve_analysis_policy(&analysis.policy, family[0].n_states(), family[0].n_actions())?;
    let weights = weights_for(&ctx, family.len());
    let report = heterogeneity_report(&family, &weights, &policy)?;
    let csv = ctx.writer.write_csv(
        "hetero.csv",
        "round,agent,b_norm,a_norm,g_scaled,alpha,beta,delta",
        &report.csv_rows(0),
    )?;
    println!("wrote {}", csv.display());
    let json = ctx.writer.write_json("hetero.json", report.to_json())?;
    println!("wrote {}", json.display());
    Ok(0)
}

fn cmd_verify_bounds(common: &CommonArgs) -> Result<i32> {
    let ctx = build_context(common)?;
    let bounds = ctx.loaded.config.bounds.clone().unwrap_or_else(BoundsConfig::default);
    let records = run_bound_sweep(bounds.sweeps, ctx.seed, &bounds.sizes, bounds.inject_bug)?;
    let path = ctx.writer.write_bound_records("bounds.jsonl", &records)?;
    println!("wrote {}", path.display());

    // one verdict line per check family
    let mut names: Vec<&str> = records.iter().map(|r| r.check.name).collect();
    names.sort_unstable();
    names.dedup();
    let mut all_hold = true;
    for name in names {
        let total = records.iter().filter(|r| r.check.name == name).count();
        let failed = records.iter().filter(|r| r.check.name == name && !r.check.holds).count();
        if failed == 0 {
            println!("{name}: PASS ({total} instances)");
        } else {
            println!("{name}: FAIL ({failed} of {total} instances violated)");
            all_hold = false;
        }
    }
    Ok(if all_hold { 0 } else { 1 })
}

fn write_history(ctx: &Context, history: &FedHistory) -> Result<()> {
    let csv =
        ctx.writer.write_csv("history.csv", HISTORY_CSV_COLUMNS, &history_csv_rows(history))?;
    println!("wrote {}", csv.display());
    let iteration_rows = iteration_csv_rows(history);
    if !iteration_rows.is_empty() {
        let path =
            ctx.writer.write_csv("iterations.csv", ITERATION_CSV_COLUMNS, &iteration_rows)?;
        println!("wrote {}", path.display());
    }
    let summary = ctx.writer.write_json("summary.json", history_json(history))?;
    println!("wrote {}", summary.display());
    // the checkpoint keeps the loadable policy schema at the top level; the
    // provenance fields ride along and are ignored on load
    let mut checkpoint = match serde_json::to_value(&history.final_policy)? {
        serde_json::Value::Object(map) => map,
        other => {
            return Err(Error::Config(format!("unexpected checkpoint form: {other}")));
        }
    };
    checkpoint.insert("config_hash".into(), ctx.loaded.config_hash.clone().into());
    checkpoint.insert("seed".into(), ctx.seed.into());
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(checkpoint))?;
    let path = ctx.writer.write_raw("checkpoint.json", &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_algorithm(
    fed: &FedConfig,
    ctx: &Context,
    workers: usize,
    family: &[crate::mdp::FiniteMdp],
) -> Result<FedHistory> {
    match fed.algorithm {
        Algorithm::ExactTabular => run_federated_policy_iteration(fed, family, workers),
        _ => {
            let trainer = ctx.loaded.config.trainer()?;
            run_fedkl(fed, trainer, family, workers)
        }
    }
}

fn cmd_train(common: &CommonArgs) -> Result<i32> {
    let ctx = build_context(common)?;
    let family = ctx.loaded.config.env()?.build_family()?;
    let fed = effective_fed(&ctx)?;
    let history = run_algorithm(&fed, &ctx, common.workers, &family)?;
    if common.verbose > 0 {
        for round in &history.rounds {
            eprintln!("round {}: eta_global {}", round.round, round.eta_global);
        }
    }
    write_history(&ctx, &history)?;
    Ok(0)
}

fn cmd_compare(common: &CommonArgs, algorithms: &[String]) -> Result<i32> {
    if algorithms.is_empty() {
        return Err(Error::Config("compare requires --algorithms with at least one tag".into()));
    }
    let tags: Vec<Algorithm> =
        algorithms.iter().map(|t| Algorithm::parse(t)).collect::<Result<_>>()?;
    let ctx = build_context(common)?;
    let family = ctx.loaded.config.env()?.build_family()?;
    let base_fed = effective_fed(&ctx)?;

    let rep_seeds = compare_rep_seeds(ctx.seed);

    let mut series: Vec<Vec<Vec<f64>>> = Vec::new(); // [algorithm][rep][round]
    for &tag in &tags {
        let mut per_rep = Vec::new();
        for &rep_seed in &rep_seeds {
            let mut fed = base_fed.clone();
            fed.algorithm = tag;
            fed.master_seed = rep_seed;
            let history = run_algorithm(&fed, &ctx, common.workers, &family)?;
            if common.verbose > 0 {
                let etas = history.eta_series();
                eprintln!(
                    "{} seed {rep_seed}: eta {} -> {}",
                    tag.tag(),
                    etas[0],
                    etas[etas.len() - 1]
                );
            }
            per_rep.push(history.eta_series());
        }
        series.push(per_rep);
    }

    let n_rounds = series[0][0].len();
    let columns = std::iter::once("round".to_string())
        .chain(tags.iter().map(|t| format!("mean_return_{}", t.tag())))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = (0..n_rounds)
        .map(|round| {
            let mut row = round.to_string();
            for per_rep in &series {
                let mean: f64 =
                    per_rep.iter().map(|etas| etas[round]).sum::<f64>() / per_rep.len() as f64;
                row.push(',');
                row.push_str(&format!("{mean}"));
            }
            row
        })
        .collect();
    let path = ctx.writer.write_csv("compare.csv", &columns, &rows)?;
    println!("wrote {}", path.display());

    let payload = serde_json::json!({
        "algorithms": tags.iter().map(|t| t.tag()).collect::<Vec<_>>(),
        "repetitions": COMPARE_REPS,
        "rep_seeds": rep_seeds,
        "series": series,
    });
    let path = ctx.writer.write_json("compare.json", payload)?;
    println!("wrote {}", path.display());
    Ok(0)
}
