//! Experiment settings and their flat `key = value` file format.
//!
//! ```text
//! # comment
//! [run]
//! seed = 7
//!
//! [world]
//! bush_columns = 2,3,7,8,12,13
//!
//! [planning_loss]
//! n_values = 3,5,10,20
//! runs = 50
//! ```
//!
//! Keys before the first section header belong to `[run]`. Unknown sections
//! and keys are errors, except `[manifest]`, which is ignored so a written
//! manifest can be fed back in as a config.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use vepm_core::squirrels_world::SwConfig;
use vepm_core::{PlanningConfig, TieBreak};

use crate::error::{Error, Result};
use crate::records::Variant;

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningLossConfig {
    pub n_values: Vec<u64>,
    pub runs: usize,
}

impl Default for PlanningLossConfig {
    fn default() -> Self {
        Self {
            n_values: vec![3, 5, 10, 20],
            runs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningTimeConfig {
    pub runs: usize,
}

impl Default for PlanningTimeConfig {
    fn default() -> Self {
        Self { runs: 50 }
    }
}

/// What the learning agent's model assumes about (state, action) pairs it
/// has never tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnvisitedRows {
    /// Self-loop with reward 0.
    Neutral,
    /// Self-loop with reward `r_max`, so untried actions look worth
    /// `r_max / (1 - γ)`.
    Optimistic,
}

impl FromStr for UnvisitedRows {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(Self::Neutral),
            "optimistic" => Ok(Self::Optimistic),
            other => Err(Error::setting(
                "unvisited",
                format!("`{other}` is not neutral or optimistic"),
            )),
        }
    }
}

impl std::fmt::Display for UnvisitedRows {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Neutral => "neutral",
            Self::Optimistic => "optimistic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleComplexityConfig {
    pub episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly to `epsilon_end`.
    pub decay_episodes: usize,
    pub eval_interval: usize,
    pub eval_rollouts: usize,
    pub runs: usize,
    pub unvisited: UnvisitedRows,
    /// Visits after which a pair's estimate is used; rarer pairs are
    /// treated as unvisited.
    pub known_visits: u64,
    /// Fraction of the optimal return that counts as solved.
    pub success_fraction: f64,
}

impl Default for SampleComplexityConfig {
    fn default() -> Self {
        Self {
            episodes: 600,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            decay_episodes: 300,
            eval_interval: 1,
            eval_rollouts: 20,
            runs: 50,
            unvisited: UnvisitedRows::Optimistic,
            known_visits: 2,
            success_fraction: 0.95,
        }
    }
}

impl SampleComplexityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::setting(key, msg));
        if self.episodes == 0 {
            return bad("episodes", "must be at least 1");
        }
        for (key, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("success_fraction", self.success_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, "must lie in [0, 1]");
            }
        }
        if self.eval_interval == 0 {
            return bad("eval_interval", "must be at least 1");
        }
        if self.eval_rollouts == 0 {
            return bad("eval_rollouts", "must be at least 1");
        }
        if self.runs == 0 {
            return bad("runs", "must be at least 1");
        }
        if self.known_visits == 0 {
            return bad("known_visits", "must be at least 1");
        }
        Ok(())
    }

    /// Exploration rate for episode `episode` (1-based).
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.decay_episodes == 0 || episode > self.decay_episodes {
            return self.epsilon_end;
        }
        let frac = (episode - 1) as f64 / self.decay_episodes as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Everything an experiment reads, with defaults for every field.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    /// Overrides the experiment's default variant when set.
    pub variant: Option<Variant>,
    /// `[world]` settings, applied on top of the variant's defaults.
    pub world_overrides: Vec<(String, String)>,
    pub planning: PlanningConfig<f64>,
    pub planning_loss: PlanningLossConfig,
    pub planning_time: PlanningTimeConfig,
    pub sample_complexity: SampleComplexityConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            variant: None,
            world_overrides: Vec::new(),
            planning: PlanningConfig::default(),
            planning_loss: PlanningLossConfig::default(),
            planning_time: PlanningTimeConfig::default(),
            sample_complexity: SampleComplexityConfig::default(),
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::setting(key, format!("cannot parse `{value}`")))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<V: ToString>(values: &[V]) -> String {
    values.iter().map(V::to_string).collect::<Vec<_>>().join(",")
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// World configuration for `variant` with the `[world]` overrides applied.
    pub fn world(&self, variant: Variant) -> Result<SwConfig> {
        let mut cfg = SwConfig::variant(variant.is_stochastic());
        for (k, v) in &self.world_overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.planning.validate()?;
        if self.planning_loss.n_values.is_empty() || self.planning_loss.n_values.contains(&0) {
            return Err(Error::setting("n_values", "needs at least one positive size"));
        }
        if self.planning_loss.runs == 0 {
            return Err(Error::setting("runs", "must be at least 1"));
        }
        if self.planning_time.runs == 0 {
            return Err(Error::setting("runs", "must be at least 1"));
        }
        self.sample_complexity.validate()?;
        for variant in Variant::ALL {
            self.world(variant)?;
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("run", "seed") => self.seed = parse(key, value)?,
            ("run", "variant") => self.variant = Some(value.parse()?),
            ("world", _) => {
                // checked now so errors point at the config file
                SwConfig::default().set(key, value)?;
                self.world_overrides.retain(|(k, _)| k != key);
                self.world_overrides.push((key.to_owned(), value.to_owned()));
            }
            ("planning", "tol") => self.planning.tol = parse(key, value)?,
            ("planning", "max_sweeps") => self.planning.max_sweeps = parse(key, value)?,
            ("planning", "tie_break") => self.planning.tie_break = value.parse::<TieBreak>()?,
            ("planning_loss", "n_values") => self.planning_loss.n_values = parse_list(key, value)?,
            ("planning_loss", "runs") => self.planning_loss.runs = parse(key, value)?,
            ("planning_time", "runs") => self.planning_time.runs = parse(key, value)?,
            ("sample_complexity", k) => {
                let sc = &mut self.sample_complexity;
                match k {
                    "episodes" => sc.episodes = parse(key, value)?,
                    "epsilon_start" => sc.epsilon_start = parse(key, value)?,
                    "epsilon_end" => sc.epsilon_end = parse(key, value)?,
                    "decay_episodes" => sc.decay_episodes = parse(key, value)?,
                    "eval_interval" => sc.eval_interval = parse(key, value)?,
                    "eval_rollouts" => sc.eval_rollouts = parse(key, value)?,
                    "runs" => sc.runs = parse(key, value)?,
                    "unvisited" => sc.unvisited = value.parse()?,
                    "known_visits" => sc.known_visits = parse(key, value)?,
                    "success_fraction" => sc.success_fraction = parse(key, value)?,
                    _ => return Err(Error::setting(key, "unknown key in [sample_complexity]")),
                }
            }
            _ => return Err(Error::setting(key, format!("unknown key in [{section}]"))),
        }
        Ok(())
    }

    /// Resolved settings in the file format [`FromStr`] reads. The world
    /// section is written out for `variant` in full.
    pub fn to_config_text(&self, variant: Variant) -> Result<String> {
        let mut out = String::new();
        let world = self.world(variant)?;
        let sc = &self.sample_complexity;
        let mut section = |name: &str, pairs: Vec<(String, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in pairs {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        let kv = |k: &str, v: String| (k.to_owned(), v);
        section(
            "run",
            vec![kv("seed", self.seed.to_string()), kv("variant", variant.to_string())],
        );
        section("world", world.to_key_values());
        section(
            "planning",
            vec![
                kv("tol", self.planning.tol.to_string()),
                kv("max_sweeps", self.planning.max_sweeps.to_string()),
                kv("tie_break", self.planning.tie_break.to_string()),
            ],
        );
        section(
            "planning_loss",
            vec![
                kv("n_values", join(&self.planning_loss.n_values)),
                kv("runs", self.planning_loss.runs.to_string()),
            ],
        );
        section("planning_time", vec![kv("runs", self.planning_time.runs.to_string())]);
        section(
            "sample_complexity",
            vec![
                kv("episodes", sc.episodes.to_string()),
                kv("epsilon_start", sc.epsilon_start.to_string()),
                kv("epsilon_end", sc.epsilon_end.to_string()),
                kv("decay_episodes", sc.decay_episodes.to_string()),
                kv("eval_interval", sc.eval_interval.to_string()),
                kv("eval_rollouts", sc.eval_rollouts.to_string()),
                kv("runs", sc.runs.to_string()),
                kv("unvisited", sc.unvisited.to_string()),
                kv("known_visits", sc.known_visits.to_string()),
                kv("success_fraction", sc.success_fraction.to_string()),
            ],
        );
        Ok(out)
    }
}

impl FromStr for Settings {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut settings = Settings::default();
        let mut section = String::from("run");
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigSyntax {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                section = name.trim().to_owned();
                if !matches!(
                    section.as_str(),
                    "run" | "world" | "planning" | "planning_loss" | "planning_time" | "sample_complexity" | "manifest"
                ) {
                    return Err(Error::ConfigSyntax {
                        line: line_no,
                        message: format!("unknown section [{section}]"),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            if section == "manifest" {
                continue;
            }
            settings
                .set(&section, key.trim(), value.trim())
                .map_err(|e| Error::ConfigSyntax {
                    line: line_no,
                    message: e.to_string(),
                })?;
        }
        Ok(settings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let text =
            "seed = 7\n# note\n[world]\nbush_columns = 2,3\n[planning_loss]\nn_values = 3, 20 # short\nruns = 4\n";
        let s: Settings = text.parse().unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.planning_loss.n_values, vec![3, 20]);
        assert_eq!(s.planning_loss.runs, 4);
        assert_eq!(s.world(Variant::Det).unwrap().bush_columns.len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = "[world]\ncolumns = many\n".parse::<Settings>().unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 2, .. }));
        let err = "[nope]\n".parse::<Settings>().unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 1, .. }));
        assert!("just words\n".parse::<Settings>().is_err());
        assert!("[planning]\nspeed = 3\n".parse::<Settings>().is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let mut s = Settings {
            seed: 11,
            ..Settings::default()
        };
        s.sample_complexity.episodes = 30;
        let text = s.to_config_text(Variant::Stoch).unwrap();
        let back: Settings = text.parse().unwrap();
        assert_eq!(back.seed, 11);
        assert_eq!(back.variant, Some(Variant::Stoch));
        assert_eq!(back.sample_complexity, s.sample_complexity);
        assert_eq!(back.world(Variant::Stoch).unwrap(), s.world(Variant::Stoch).unwrap());
        assert_eq!(back.to_config_text(Variant::Stoch).unwrap(), text);
    }

    #[test]
    fn epsilon_schedule() {
        let sc = SampleComplexityConfig {
            episodes: 10,
            decay_episodes: 5,
            ..SampleComplexityConfig::default()
        };
        assert_eq!(sc.epsilon(1), 1.0);
        assert!((sc.epsilon(5) - (1.0 - 0.95 * 0.8)).abs() < 1e-15);
        assert_eq!(sc.epsilon(6), 0.05);
    }
}
