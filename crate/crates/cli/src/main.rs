use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lngplan::bigpairs::{solve_big_pairs, BigPairsOptions};
use lngplan::generator::{generate_instance, restrict_flexibility, GeneratorParams};
use lngplan::instance::{load_bundle, save_bundle, Instance};
use lngplan::parallel::Parallelism;
use lngplan::pipeline::{self, prepare_instance, Approach, RunConfig, RunReport};
use lngplan::schedule::Schedule;
use lngplan::trips::{generate_trips_with, PenaltyParams, TripConfig};
use lngplan::validator::{evaluate_profit, validate, Mode};

#[derive(Parser)]
#[command(name = "lngplan", version, about = "LNG trading and shipping planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check instances.
    #[command(subcommand)]
    Instance(InstanceCmd),
    /// Run one or more planning approaches and write a report.
    Run(RunArgs),
    /// Flexibility sweep over keep fractions, written as CSV.
    Bench(BenchArgs),
    /// Check a schedule against an instance and print its profit.
    Validate {
        schedule: PathBuf,
        instance: PathBuf,
        #[arg(long, default_value = "main")]
        mode: Mode,
    },
}

#[derive(Subcommand)]
enum InstanceCmd {
    /// Write a synthetic instance as a bundle directory, or as one JSON file
    /// when the output ends in `.json`.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        vessels: Option<usize>,
        #[arg(long)]
        buys: Option<usize>,
        #[arg(long)]
        sells: Option<usize>,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        ports: Option<usize>,
        #[arg(long)]
        small_fraction: Option<f64>,
        /// Keep roughly this share of flexible contracts.
        #[arg(long)]
        keep_fraction: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Load an instance and report its size, or the first error found.
    Validate { path: PathBuf },
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML file with `RunConfig` keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance bundle directory or JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    approach: Vec<Approach>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    fill_fraction: Option<f64>,
    #[arg(long)]
    max_idle_days: Option<f64>,
    #[arg(long)]
    insertion_nodes: Option<u64>,
    #[arg(long)]
    insertion_candidates: Option<usize>,
    /// Tune for this many seconds instead of a fixed evaluation budget.
    #[arg(long)]
    wallclock: Option<f64>,
    /// Evaluate sequentially even when built with the `parallel` feature.
    #[arg(long)]
    sequential: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write every generated trip as CSV.
    #[arg(long)]
    dump_trips: bool,
    /// Write the unpenalized big-pairs selection as JSON.
    #[arg(long)]
    dump_bigpairs: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    fractions: Vec<f64>,
}

fn load_instance(path: &Path) -> Result<Instance> {
    let inst = if path.is_dir() {
        load_bundle(path)
    } else {
        fs::read_to_string(path)
            .map_err(Into::into)
            .and_then(|t| Instance::from_json(&t))
    };
    inst.with_context(|| format!("loading instance {}", path.display()))
}

fn build_config(a: &CommonArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if a.instance.is_some() {
        cfg.instance.clone_from(&a.instance);
    }
    if !a.approach.is_empty() {
        cfg.approaches.clone_from(&a.approach);
    }
    if let Some(b) = a.budget {
        cfg.tuning.budget = b;
    }
    if let Some(g) = a.grid {
        cfg.tuning.grid_size = g;
    }
    if let Some(r) = a.rank {
        cfg.tuning.rank = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.omega.is_some() {
        cfg.omega = a.omega;
    }
    if a.fill_fraction.is_some() {
        cfg.fill_fraction = a.fill_fraction;
    }
    if a.max_idle_days.is_some() {
        cfg.max_idle_days = a.max_idle_days;
    }
    if let Some(n) = a.insertion_nodes {
        cfg.insertion_node_limit = n;
    }
    if a.insertion_candidates.is_some() {
        cfg.insertion_candidates = a.insertion_candidates;
    }
    if a.wallclock.is_some() {
        cfg.wallclock = a.wallclock;
    }
    if a.sequential {
        cfg.parallelism = Parallelism::Sequential;
    }
    if a.out.is_some() {
        cfg.output_dir.clone_from(&a.out);
    }
    cfg.check()?;
    Ok(cfg)
}

fn config_instance(cfg: &RunConfig) -> Result<Instance> {
    let Some(path) = &cfg.instance else {
        bail!("no instance given (use --instance or the `instance` config key)");
    };
    Ok(prepare_instance(&load_instance(path)?, cfg)?)
}

fn write_outputs(dir: &Path, report: &mut RunReport) -> Result<()> {
    let sched_dir = dir.join("schedules");
    fs::create_dir_all(&sched_dir)?;
    for a in &mut report.approaches {
        if let Some(s) = &a.schedule {
            let path = sched_dir.join(format!("{}.json", a.approach.as_str()));
            fs::write(&path, s.to_json())?;
            a.schedule_path = Some(path.display().to_string());
        }
        if let Some(t) = &a.trace {
            let file = fs::File::create(dir.join("trace.csv"))?;
            t.write_trace_csv(file)?;
        }
    }
    fs::write(dir.join("report.json"), report.to_json())?;
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let cfg = build_config(&args.common)?;
    let inst = config_instance(&cfg)?;
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        if args.dump_trips || args.dump_bigpairs {
            let trips = generate_trips_with(
                &inst,
                &TripConfig {
                    max_idle_days: cfg.max_idle_days,
                    parallelism: cfg.parallelism,
                },
            );
            if args.dump_trips {
                trips.write_csv(&inst, fs::File::create(dir.join("trips.csv"))?)?;
            }
            if args.dump_bigpairs {
                let sol = solve_big_pairs(&inst, &trips, &PenaltyParams::default(), &BigPairsOptions::default())?;
                sol.write_report(&inst, &trips, fs::File::create(dir.join("bigpairs.json"))?)?;
            }
        }
    } else if args.dump_trips || args.dump_bigpairs {
        bail!("--dump-trips and --dump-bigpairs need an output directory (--out)");
    }
    let mut report = pipeline::run(&inst, &cfg);
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, &mut report)?;
    }
    println!("{}", report.to_json());
    Ok(report.approaches.iter().all(|a| a.is_valid()))
}

fn cmd_bench(args: &BenchArgs) -> Result<bool> {
    let mut cfg = build_config(&args.common)?;
    if !args.fractions.is_empty() {
        cfg.keep_fractions.clone_from(&args.fractions);
        cfg.check()?;
    }
    let inst = config_instance(&cfg)?;
    let rows = pipeline::sweep(&inst, &cfg);
    match &cfg.output_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("flexibility.csv");
            pipeline::write_sweep_csv(&rows, fs::File::create(&path)?)?;
            eprintln!("wrote {}", path.display());
        }
        None => pipeline::write_sweep_csv(&rows, std::io::stdout())?,
    }
    Ok(true)
}

fn cmd_validate(schedule: &Path, instance: &Path, mode: Mode) -> Result<bool> {
    let inst = load_instance(instance)?;
    let text = fs::read_to_string(schedule).with_context(|| format!("reading {}", schedule.display()))?;
    let sched = Schedule::from_json(&text).context("parsing schedule")?;
    let report = validate(&sched, &inst, mode)?;
    let profit = evaluate_profit(&sched, &inst)?;
    let out = serde_json::json!({
        "feasible": report.is_empty(),
        "violations": report.violations,
        "profit": profit,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(report.is_empty())
}

fn cmd_instance(cmd: &InstanceCmd) -> Result<bool> {
    match cmd {
        InstanceCmd::Gen {
            seed,
            vessels,
            buys,
            sells,
            horizon,
            ports,
            small_fraction,
            keep_fraction,
            out,
        } => {
            let d = GeneratorParams::default();
            let p = GeneratorParams {
                n_vessels: vessels.unwrap_or(d.n_vessels),
                n_buy: buys.unwrap_or(d.n_buy),
                n_sell: sells.unwrap_or(d.n_sell),
                horizon_days: horizon.unwrap_or(d.horizon_days),
                n_ports: ports.unwrap_or(d.n_ports),
                small_fraction: small_fraction.unwrap_or(d.small_fraction),
            };
            let mut inst = generate_instance(*seed, &p)?;
            if let Some(f) = keep_fraction {
                inst = restrict_flexibility(&inst, *f, *seed);
            }
            if out.extension().is_some_and(|e| e == "json") {
                fs::write(out, inst.to_json())?;
            } else {
                save_bundle(&inst, out)?;
            }
            eprintln!(
                "wrote {} ({} vessels, {} contracts)",
                out.display(),
                inst.vessels().len(),
                inst.contracts().len()
            );
            Ok(true)
        }
        InstanceCmd::Validate { path } => match load_instance(path) {
            Ok(inst) => {
                println!(
                    "ok: {} vessels, {} contracts, {} ports, horizon {} days",
                    inst.vessels().len(),
                    inst.contracts().len(),
                    inst.ports().len(),
                    inst.horizon_days()
                );
                Ok(true)
            }
            Err(e) => {
                println!("invalid: {e:#}");
                Ok(false)
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Instance(c) => cmd_instance(c),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate { schedule, instance, mode } => cmd_validate(schedule, instance, *mode),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
