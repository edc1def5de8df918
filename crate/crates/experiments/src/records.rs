//! Experiment output rows and their CSV encoding.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = [
    "experiment",
    "model_id",
    "variant",
    "seed",
    "parameter",
    "metric",
    "value",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Det,
    Stoch,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Det, Variant::Stoch];

    pub fn is_stochastic(self) -> bool {
        self == Variant::Stoch
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Det => "det",
            Variant::Stoch => "stoch",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(Variant::Det),
            "stoch" => Ok(Variant::Stoch),
            other => Err(Error::setting("variant", format!("`{other}` is not det or stoch"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub model_id: String,
    pub variant: Variant,
    pub seed: u64,
    /// `name=value`, or empty.
    pub parameter: String,
    pub metric: String,
    pub value: f64,
}

impl ExperimentRecord {
    pub fn new(
        experiment: &str,
        model_id: impl ToString,
        variant: Variant,
        seed: u64,
        parameter: impl Into<String>,
        metric: &str,
        value: f64,
    ) -> Self {
        Self {
            experiment: experiment.to_owned(),
            model_id: model_id.to_string(),
            variant,
            seed,
            parameter: parameter.into(),
            metric: metric.to_owned(),
            value,
        }
    }

    fn fields(&self) -> [String; 7] {
        [
            self.experiment.clone(),
            self.model_id.clone(),
            self.variant.to_string(),
            self.seed.to_string(),
            self.parameter.clone(),
            self.metric.clone(),
            // shortest representation that round-trips
            self.value.to_string(),
        ]
    }
}

/// Checks the per-file invariants: finite values and unique
/// `(experiment, model_id, variant, seed, parameter, metric)` keys.
pub fn check_records(records: &[ExperimentRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !r.value.is_finite() {
            return Err(Error::setting(
                &r.metric,
                format!("non-finite value {} for {} {}", r.value, r.experiment, r.model_id),
            ));
        }
        let key = (&r.experiment, &r.model_id, r.variant, r.seed, &r.parameter, &r.metric);
        if !seen.insert(key) {
            return Err(Error::setting(
                &r.metric,
                format!(
                    "duplicate record for {} {} {} seed {} {}",
                    r.experiment, r.model_id, r.variant, r.seed, r.parameter
                ),
            ));
        }
    }
    Ok(())
}

pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    check_records(records)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let parse_err = |what: &str| Error::setting(what, format!("unreadable value in {}", path.display()));
        out.push(ExperimentRecord {
            experiment: field(0).to_owned(),
            model_id: field(1).to_owned(),
            variant: field(2).parse()?,
            seed: field(3).parse().map_err(|_| parse_err("seed"))?,
            parameter: field(4).to_owned(),
            metric: field(5).to_owned(),
            value: field(6).parse().map_err(|_| parse_err("value"))?,
        });
    }
    Ok(out)
}

/// Mean and standard error of the mean (sample standard deviation over
/// `√n`; zero for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
