//! Seeded experiments on the squirrel-and-hawk world: value loss of partial
//! models, certainty-equivalence planning loss, per-sweep planning cost and
//! the sample efficiency of learning agents.
//!
//! Every experiment is a pure function of its [`Settings`] and master seed;
//! [`run_to_dir`] writes a manifest followed by the record files.

pub mod certify;
pub mod config;
mod error;
pub mod planning_loss;
pub mod planning_time;
pub mod records;
pub mod sample_budget;
pub mod sample_complexity;
pub mod value_loss;
pub mod worlds;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::{SampleComplexityConfig, Settings, UnvisitedRows};
pub use error::{Error, Result};
pub use records::{ExperimentRecord, Variant};

/// Records of one experiment plus a typed summary for callers that check
/// results directly. `timing` holds the wall-clock rows, which are kept out
/// of the reproducible record file.
#[derive(Debug, Clone, Default)]
pub struct Output<S> {
    pub records: Vec<ExperimentRecord>,
    pub timing: Vec<ExperimentRecord>,
    pub summary: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    ValueLoss,
    PlanningLoss,
    PlanningTime,
    SampleComplexity,
    /// Planning losses against the high-probability loss bound.
    BoundCheck,
    /// Q-value accuracy reached with the generative-model sample budget.
    SampleBudget,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::ValueLoss,
        Experiment::PlanningLoss,
        Experiment::PlanningTime,
        Experiment::SampleComplexity,
        Experiment::BoundCheck,
        Experiment::SampleBudget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ValueLoss => value_loss::NAME,
            Experiment::PlanningLoss => planning_loss::NAME,
            Experiment::PlanningTime => planning_time::NAME,
            Experiment::SampleComplexity => sample_complexity::NAME,
            Experiment::BoundCheck => planning_loss::BOUND_NAME,
            Experiment::SampleBudget => sample_budget::NAME,
        }
    }

    /// Variant used when none is configured.
    pub fn default_variant(self) -> Variant {
        match self {
            Experiment::PlanningLoss | Experiment::BoundCheck | Experiment::SampleBudget => Variant::Stoch,
            _ => Variant::Det,
        }
    }

    /// Runs the experiment and returns its records and timing rows.
    pub fn run(self, settings: &Settings, variant: Variant) -> Result<(Vec<ExperimentRecord>, Vec<ExperimentRecord>)> {
        fn parts<S>(o: Output<S>) -> (Vec<ExperimentRecord>, Vec<ExperimentRecord>) {
            (o.records, o.timing)
        }
        Ok(match self {
            Experiment::ValueLoss => parts(value_loss::exp_value_loss(settings, variant)?),
            Experiment::PlanningLoss => parts(planning_loss::exp_planning_loss(settings, variant)?),
            Experiment::PlanningTime => parts(planning_time::exp_planning_time(settings, variant)?),
            Experiment::SampleComplexity => parts(sample_complexity::exp_sample_complexity(settings, variant)?),
            Experiment::BoundCheck => parts(planning_loss::exp_bound_check(
                settings,
                variant,
                &planning_loss::BoundCheckConfig::default(),
            )?),
            Experiment::SampleBudget => parts(sample_budget::exp_budget_check(
                settings,
                variant,
                &sample_budget::BudgetCheckConfig::default(),
            )?),
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::setting("experiment", format!("unknown experiment `{s}`")))
    }
}

pub const MANIFEST_FILE: &str = "manifest.txt";

/// What a run was asked to do, written before any record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub experiment: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub variant: Variant,
    pub output_dir: PathBuf,
    pub record_files: Vec<String>,
    pub version: String,
    /// Resolved settings in config-file form.
    pub settings: String,
}

impl RunManifest {
    pub fn new(
        experiment: &str,
        settings: &Settings,
        variant: Variant,
        output_dir: &Path,
        config_path: Option<&Path>,
        record_files: Vec<String>,
    ) -> Result<Self> {
        Ok(Self {
            experiment: experiment.to_owned(),
            config_path: config_path.map(Path::to_path_buf),
            seed: settings.seed,
            variant,
            output_dir: output_dir.to_path_buf(),
            record_files,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            settings: settings.to_config_text(variant)?,
        })
    }

    /// The manifest is itself a valid config file: the `[manifest]` section
    /// is ignored when read back.
    pub fn to_text(&self) -> String {
        let config = self
            .config_path
            .as_ref()
            .map_or_else(|| "none".to_owned(), |p| p.display().to_string());
        format!(
            "[manifest]\nexperiment = {}\nconfig = {}\nseed = {}\nvariant = {}\noutput_dir = {}\nrecords = {}\nversion = {}\n\n{}",
            self.experiment,
            config,
            self.seed,
            self.variant,
            self.output_dir.display(),
            self.record_files.join(","),
            self.version,
            self.settings,
        )
    }

    pub fn write(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))?;
        let path = self.output_dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

pub fn records_file_name(experiment: &str) -> String {
    format!("{experiment}.csv")
}

pub fn timing_file_name(experiment: &str) -> String {
    format!("{experiment}-timing.csv")
}

/// Files produced by [`run_to_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub manifest: PathBuf,
    pub records: PathBuf,
    pub timing: Option<PathBuf>,
    pub record_count: usize,
}

/// Writes the manifest, runs `produce` and writes its records (and timing
/// rows, if any) next to it.
pub fn write_run<F>(manifest: &RunManifest, produce: F) -> Result<RunFiles>
where
    F: FnOnce() -> Result<(Vec<ExperimentRecord>, Vec<ExperimentRecord>)>,
{
    let manifest_path = manifest.write()?;
    let (records, timing) = produce()?;
    let dir = &manifest.output_dir;
    let records_path = dir.join(records_file_name(&manifest.experiment));
    records::write_records_file(&records_path, &records)?;
    let timing_path = if timing.is_empty() {
        None
    } else {
        let p = dir.join(timing_file_name(&manifest.experiment));
        records::write_records_file(&p, &timing)?;
        Some(p)
    };
    Ok(RunFiles {
        manifest: manifest_path,
        records: records_path,
        timing: timing_path,
        record_count: records.len(),
    })
}

/// Runs `experiment` with `settings` and writes everything under `out_dir`.
pub fn run_to_dir(
    experiment: Experiment,
    settings: &Settings,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> Result<RunFiles> {
    settings.validate()?;
    let variant = settings.variant.unwrap_or_else(|| experiment.default_variant());
    let name = experiment.name();
    let mut files = vec![records_file_name(name)];
    if experiment == Experiment::PlanningTime {
        files.push(timing_file_name(name));
    }
    let manifest = RunManifest::new(name, settings, variant, out_dir, config_path, files)?;
    write_run(&manifest, || experiment.run(settings, variant))
}
