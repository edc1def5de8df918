//! `vepm`: run the value-equivalent partial model experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vepm_core::estimation::{BoundParams, PolicyClassSize};
use vepm_core::squirrels_world::{ModelId, DEFAULT_GAMMA, DEFAULT_NUT_REWARD};
use vepm_experiments::certify::{
    exp_certify, planning_bound_records, sample_budget_records, BOUNDS_NAME, NAME as CERTIFY_NAME,
};
use vepm_experiments::{records_file_name, run_to_dir, write_run, Experiment, RunManifest, Settings, Variant};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "VEPM_OUT";
const DEFAULT_OUT: &str = "vepm-out";

#[derive(Debug, Parser)]
#[command(
    name = "vepm",
    version,
    about = "Value-equivalent partial models on the squirrel-and-hawk world"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file of `key = value` lines under [section] headers.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for the manifest and record files.
    #[arg(long, value_name = "DIR", env = OUT_ENV, default_value = DEFAULT_OUT)]
    out: PathBuf,

    /// World variant; each experiment has its own default.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,

    /// Number of seeded runs; overrides the config file.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Value loss of every catalog model (single run).
    ValueLoss(RunArgs),
    /// Certainty-equivalence planning loss for m4..m7 over dataset sizes.
    PlanningLoss(RunArgs),
    /// Cost of one value-iteration sweep for m4..m7.
    PlanningTime(RunArgs),
    /// Learning curves of m4 and m7 agents.
    SampleComplexity(RunArgs),
    /// Certify value equivalence and minimality of a catalog model.
    Certify {
        /// Catalog model, m1..m7.
        #[arg(value_parser = parse_model)]
        model: ModelId,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the planning-loss bound (2) or the sample budget (3).
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Which bound: 2 = planning loss, 3 = generative-model sample budget.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    thm: u8,
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    /// Target accuracy (budget only).
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Samples per (state, action) pair (loss bound only).
    #[arg(long, default_value_t = 20)]
    n: u64,
    /// Natural log of the policy-class size; defaults to `states · ln(actions)`.
    #[arg(long)]
    ln_policy_class: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NUT_REWARD)]
    r_max: f64,
    /// Also run the seeded Monte Carlo check of the bound.
    #[arg(long)]
    simulate: bool,
    #[command(flatten)]
    common: Common,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: vepm_experiments::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse().map_err(|e: vepm_core::Error| e.to_string())
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn load_settings(common: &Common) -> AnyResult<Settings> {
    let mut settings = match &common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    if let Some(seed) = common.seed {
        settings.seed = seed;
    }
    if let Some(variant) = common.variant {
        settings.variant = Some(variant);
    }
    Ok(settings)
}

fn run_experiment(experiment: Experiment, args: &RunArgs) -> AnyResult<()> {
    let mut settings = load_settings(&args.common)?;
    if let Some(runs) = args.runs {
        match experiment {
            Experiment::PlanningLoss => settings.planning_loss.runs = runs,
            Experiment::PlanningTime => settings.planning_time.runs = runs,
            Experiment::SampleComplexity => settings.sample_complexity.runs = runs,
            _ => eprintln!("note: {experiment} is a single run; --runs ignored"),
        }
    }
    let files = run_to_dir(experiment, &settings, &args.common.out, args.common.config.as_deref())?;
    println!("{experiment}: {} records", files.record_count);
    println!("manifest: {}", files.manifest.display());
    println!("records:  {}", files.records.display());
    if let Some(t) = &files.timing {
        println!("timing:   {}", t.display());
    }
    Ok(())
}

fn manifest_for(
    name: &str,
    settings: &Settings,
    variant: Variant,
    out: &Path,
    config: Option<&Path>,
) -> AnyResult<RunManifest> {
    Ok(RunManifest::new(
        name,
        settings,
        variant,
        out,
        config,
        vec![records_file_name(name)],
    )?)
}

fn certify(model: ModelId, common: &Common) -> AnyResult<()> {
    let settings = load_settings(common)?;
    settings.validate()?;
    let variant = settings.variant.unwrap_or(Variant::Det);
    let manifest = manifest_for(CERTIFY_NAME, &settings, variant, &common.out, common.config.as_deref())?;
    let mut report = None;
    write_run(&manifest, || {
        let out = exp_certify(&settings, variant, model)?;
        report = Some(out.summary);
        Ok((out.records, out.timing))
    })?;
    let report = report.expect("certificate computed");
    println!(
        "{model} ({}) on {variant}: VE={} minimal={} loss={:e}",
        model.subset(),
        report.certificate.value_equivalent,
        report.minimal,
        report.certificate.loss
    );
    for (feature, cert) in &report.reductions {
        println!("  without {feature}: VE={} loss={:e}", cert.value_equivalent, cert.loss);
    }
    Ok(())
}

fn bounds(args: &BoundsArgs) -> AnyResult<()> {
    let common = &args.common;
    let settings = load_settings(common)?;
    let policy_class_size = match args.ln_policy_class {
        Some(ln) => PolicyClassSize::from_ln(ln)?,
        None => PolicyClassSize::all_deterministic(args.states, args.actions)?,
    };
    let params = BoundParams {
        delta: args.delta,
        epsilon: args.eps,
        n: args.n,
        policy_class_size,
    };
    let seed = settings.seed;
    let (records, experiment) = if args.thm == 2 {
        let (bound, records) =
            planning_bound_records(seed, args.states, args.actions, &params, args.r_max, args.gamma)?;
        println!(
            "planning-loss bound: states={} actions={} n={} delta={} ln|Pi|={} r_max={} gamma={}",
            args.states,
            args.actions,
            args.n,
            args.delta,
            params.policy_class_size.ln(),
            args.r_max,
            args.gamma
        );
        println!("bound = {bound}");
        (records, Experiment::BoundCheck)
    } else {
        let (budget, records) = sample_budget_records(seed, args.states, args.actions, &params, args.gamma)?;
        println!(
            "sample budget: states={} actions={} eps={} delta={} gamma={}",
            args.states, args.actions, args.eps, args.delta, args.gamma
        );
        println!("N = {}", budget.samples_per_pair);
        println!("k = {}", budget.epochs);
        println!("total samples = {}", budget.total_samples(args.states, args.actions));
        (records, Experiment::SampleBudget)
    };
    let variant = settings.variant.unwrap_or(Variant::Det);
    let manifest = manifest_for(BOUNDS_NAME, &settings, variant, &common.out, common.config.as_deref())?;
    let files = write_run(&manifest, || Ok((records, Vec::new())))?;
    println!("records:  {}", files.records.display());

    if args.simulate {
        settings.validate()?;
        let out = common.out.join(experiment.name());
        let files = run_to_dir(experiment, &settings, &out, common.config.as_deref())?;
        println!(
            "{experiment}: {} records in {}",
            files.record_count,
            files.records.display()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> AnyResult<()> {
    match &cli.command {
        Command::ValueLoss(a) => run_experiment(Experiment::ValueLoss, a),
        Command::PlanningLoss(a) => run_experiment(Experiment::PlanningLoss, a),
        Command::PlanningTime(a) => run_experiment(Experiment::PlanningTime, a),
        Command::SampleComplexity(a) => run_experiment(Experiment::SampleComplexity, a),
        Command::Certify { model, common } => certify(*model, common),
        Command::Bounds(a) => bounds(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
