//! The squirrel-and-hawk corridor world as a factored tabular model.
//!
//! The squirrel walks a single row of `columns` cells from column 0 to the
//! nut in the last column. A hawk patrols the same columns `hawk_speed`
//! cells per step, bouncing off the walls, and catches the squirrel when its
//! path crosses the squirrel's cell outside a bush. A cloud, the wind in two
//! rows and the weather also change every step but never influence the
//! squirrel, the hawk or the reward.
//!
//! Feature order: `squirrel_col, hawk_col, hawk_dir, cloud_col, wind,
//! weather`, followed by the `caught` and `nut` sentinel states.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::abstraction::{FeatureSubset, OmittedDistribution, Projection};
use crate::error::{Error, Result};
use crate::mdp::{validate_model, FeatureSchema, ModelParts, StateIndex, TabularModel, TransitionRow};
use crate::planners::{value_iteration, PlanningConfig};
use crate::rng::{seeded, Rng};
use crate::scalar::Scalar;

pub const SQUIRREL: &str = "squirrel_col";
pub const HAWK: &str = "hawk_col";
pub const HAWK_DIR: &str = "hawk_dir";
pub const CLOUD: &str = "cloud_col";
pub const WIND: &str = "wind";
pub const WEATHER: &str = "weather";

pub const CAUGHT: &str = "caught";
pub const NUT: &str = "nut";

pub const ACTION_COUNT: usize = 3;
pub const DEFAULT_GAMMA: f64 = 0.95;
pub const DEFAULT_NUT_REWARD: f64 = 10.0;
/// Wind values: row A direction then row B direction.
pub const WIND_VALUES: [&str; 4] = ["LL", "LR", "RL", "RR"];
pub const WEATHER_VALUES: [&str; 2] = ["sunny", "rainy"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left = 0,
    Right = 1,
    Stay = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Left, Action::Right, Action::Stay];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HawkDir {
    Left = 0,
    Right = 1,
}

impl HawkDir {
    fn flipped(self) -> Self {
        match self {
            Self::Left => Self::Right,
            Self::Right => Self::Left,
        }
    }

    fn from_index(i: usize) -> Self {
        if i == 0 {
            Self::Left
        } else {
            Self::Right
        }
    }
}

impl FromStr for HawkDir {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            other => Err(Error::InvalidConfig(format!("unknown hawk direction `{other}`"))),
        }
    }
}

impl fmt::Display for HawkDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Left => "left",
            Self::Right => "right",
        })
    }
}

/// How the cloud column evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CloudDrift {
    /// One column left, right or no move with equal probability; blocked
    /// moves stay put. Stochastic variant only.
    LazyWalk,
    /// One column right per step, wrapping around.
    WrapRight,
    Fixed,
}

impl FromStr for CloudDrift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lazy-walk" => Ok(Self::LazyWalk),
            "wrap-right" => Ok(Self::WrapRight),
            "fixed" => Ok(Self::Fixed),
            other => Err(Error::InvalidConfig(format!("unknown cloud drift `{other}`"))),
        }
    }
}

impl fmt::Display for CloudDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LazyWalk => "lazy-walk",
            Self::WrapRight => "wrap-right",
            Self::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwConfig {
    pub columns: usize,
    /// Sheltering cells (0-indexed); never the start or nut column.
    pub bush_columns: BTreeSet<usize>,
    pub hawk_speed: usize,
    pub hawk_start_col: usize,
    pub hawk_start_dir: HawkDir,
    pub gamma: f64,
    /// Simulation-only step limit; not part of the planning model.
    pub episode_limit: usize,
    pub nut_reward: f64,
    pub stochastic: bool,
    /// Probability that a left/right move fails and the squirrel stays.
    pub slip_prob: f64,
    pub hawk_reverse_prob: f64,
    /// Per-row probability that the wind direction flips.
    pub wind_flip_prob: f64,
    pub weather_flip_prob: f64,
    pub cloud_drift: CloudDrift,
}

impl SwConfig {
    /// Deterministic variant: no slips or reversals; the cloud wraps right,
    /// the wind cycles through its four values and the weather alternates.
    pub fn deterministic() -> Self {
        Self {
            columns: 16,
            bush_columns: [2, 3, 7, 8, 12, 13].into_iter().collect(),
            hawk_speed: 5,
            hawk_start_col: 0,
            hawk_start_dir: HawkDir::Right,
            gamma: DEFAULT_GAMMA,
            episode_limit: 100,
            nut_reward: DEFAULT_NUT_REWARD,
            stochastic: false,
            slip_prob: 0.1,
            hawk_reverse_prob: 0.1,
            wind_flip_prob: 0.25,
            weather_flip_prob: 0.1,
            cloud_drift: CloudDrift::WrapRight,
        }
    }

    pub fn stochastic() -> Self {
        Self {
            stochastic: true,
            cloud_drift: CloudDrift::LazyWalk,
            ..Self::deterministic()
        }
    }

    pub fn variant(stochastic: bool) -> Self {
        if stochastic {
            Self::stochastic()
        } else {
            Self::deterministic()
        }
    }

    pub fn nut_column(&self) -> usize {
        self.columns - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.columns < 2 {
            return bad(format!("columns = {} (need at least 2)", self.columns));
        }
        if let Some(&b) = self.bush_columns.iter().find(|&&b| b == 0 || b >= self.nut_column()) {
            return bad(format!(
                "bush column {b} must lie strictly between the start and nut columns"
            ));
        }
        if self.hawk_speed == 0 {
            return bad("hawk_speed must be at least 1".into());
        }
        if self.hawk_start_col >= self.columns {
            return bad(format!("hawk_start_col {} outside the corridor", self.hawk_start_col));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.nut_reward > 0.0 && self.nut_reward.is_finite()) {
            return bad(format!("nut_reward {} must be positive", self.nut_reward));
        }
        for (name, p) in [
            ("slip_prob", self.slip_prob),
            ("hawk_reverse_prob", self.hawk_reverse_prob),
            ("wind_flip_prob", self.wind_flip_prob),
            ("weather_flip_prob", self.weather_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if !self.stochastic && self.cloud_drift == CloudDrift::LazyWalk {
            return bad("the deterministic variant needs a deterministic cloud drift".into());
        }
        Ok(())
    }

    fn is_bush(&self, col: usize) -> bool {
        self.bush_columns.contains(&col)
    }

    /// Resolved settings as `key = value` lines.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let bushes: Vec<String> = self.bush_columns.iter().map(|b| b.to_string()).collect();
        vec![
            ("columns".into(), self.columns.to_string()),
            ("bush_columns".into(), bushes.join(",")),
            ("hawk_speed".into(), self.hawk_speed.to_string()),
            ("hawk_start_col".into(), self.hawk_start_col.to_string()),
            ("hawk_start_dir".into(), self.hawk_start_dir.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("episode_limit".into(), self.episode_limit.to_string()),
            ("nut_reward".into(), self.nut_reward.to_string()),
            ("stochastic".into(), self.stochastic.to_string()),
            ("slip_prob".into(), self.slip_prob.to_string()),
            ("hawk_reverse_prob".into(), self.hawk_reverse_prob.to_string()),
            ("wind_flip_prob".into(), self.wind_flip_prob.to_string()),
            ("weather_flip_prob".into(), self.weather_flip_prob.to_string()),
            ("cloud_drift".into(), self.cloud_drift.to_string()),
        ]
    }

    /// Applies one `key = value` setting, as written by
    /// [`to_key_values`](Self::to_key_values).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse `{value}` for `{key}`")))
        }
        match key {
            "columns" => self.columns = parse(key, value)?,
            "bush_columns" => {
                self.bush_columns = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "hawk_speed" => self.hawk_speed = parse(key, value)?,
            "hawk_start_col" => self.hawk_start_col = parse(key, value)?,
            "hawk_start_dir" => self.hawk_start_dir = value.parse()?,
            "gamma" => self.gamma = parse(key, value)?,
            "episode_limit" => self.episode_limit = parse(key, value)?,
            "nut_reward" => self.nut_reward = parse(key, value)?,
            "stochastic" => self.stochastic = parse(key, value)?,
            "slip_prob" => self.slip_prob = parse(key, value)?,
            "hawk_reverse_prob" => self.hawk_reverse_prob = parse(key, value)?,
            "wind_flip_prob" => self.wind_flip_prob = parse(key, value)?,
            "weather_flip_prob" => self.weather_flip_prob = parse(key, value)?,
            "cloud_drift" => self.cloud_drift = value.parse()?,
            other => return Err(Error::InvalidConfig(format!("unknown world setting `{other}`"))),
        }
        Ok(())
    }
}

impl Default for SwConfig {
    fn default() -> Self {
        Self::deterministic()
    }
}

/// Outcome of the hawk's move within one step.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkMove {
    pub col: usize,
    pub dir: HawkDir,
    /// Every column entered during the step, in order.
    pub swept: Vec<usize>,
}

/// Moves the hawk `speed` cells, reversing when the next cell would leave
/// the corridor.
pub fn hawk_move(col: usize, dir: HawkDir, speed: usize, columns: usize) -> HawkMove {
    let mut col = col;
    let mut dir = dir;
    let mut swept = Vec::with_capacity(speed);
    for _ in 0..speed {
        let blocked = match dir {
            HawkDir::Left => col == 0,
            HawkDir::Right => col + 1 >= columns,
        };
        if blocked {
            dir = dir.flipped();
        }
        col = match dir {
            HawkDir::Left => col.saturating_sub(1),
            HawkDir::Right => (col + 1).min(columns - 1),
        };
        swept.push(col);
    }
    HawkMove { col, dir, swept }
}

fn squirrel_target(col: usize, action: Action, columns: usize) -> usize {
    match action {
        Action::Left => col.saturating_sub(1),
        Action::Right => (col + 1).min(columns - 1),
        Action::Stay => col,
    }
}

struct Dynamics<'a> {
    cfg: &'a SwConfig,
}

impl Dynamics<'_> {
    fn squirrel_outcomes(&self, col: usize, action: Action) -> Vec<(usize, f64)> {
        let target = squirrel_target(col, action, self.cfg.columns);
        if self.cfg.stochastic && target != col && self.cfg.slip_prob > 0.0 {
            vec![(target, 1.0 - self.cfg.slip_prob), (col, self.cfg.slip_prob)]
        } else {
            vec![(target, 1.0)]
        }
    }

    fn hawk_outcomes(&self, col: usize, dir: HawkDir) -> Vec<(HawkMove, f64)> {
        let step = |d| hawk_move(col, d, self.cfg.hawk_speed, self.cfg.columns);
        let rev = self.cfg.hawk_reverse_prob;
        if self.cfg.stochastic && rev > 0.0 {
            vec![(step(dir), 1.0 - rev), (step(dir.flipped()), rev)]
        } else {
            vec![(step(dir), 1.0)]
        }
    }

    fn cloud_outcomes(&self, cloud: usize) -> Vec<(usize, f64)> {
        let c = self.cfg.columns;
        match self.cfg.cloud_drift {
            CloudDrift::Fixed => vec![(cloud, 1.0)],
            CloudDrift::WrapRight => vec![((cloud + 1) % c, 1.0)],
            CloudDrift::LazyWalk => {
                let third = 1.0 / 3.0;
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(3);
                for target in [cloud.checked_sub(1), Some(cloud), (cloud + 1 < c).then_some(cloud + 1)] {
                    let t = target.unwrap_or(cloud);
                    match out.iter_mut().find(|(s, _)| *s == t) {
                        Some((_, p)) => *p += third,
                        None => out.push((t, third)),
                    }
                }
                out
            }
        }
    }

    fn wind_outcomes(&self, wind: usize) -> Vec<(usize, f64)> {
        if !self.cfg.stochastic {
            return vec![((wind + 1) % 4, 1.0)];
        }
        let q = self.cfg.wind_flip_prob;
        let mut out = Vec::with_capacity(4);
        for (flip_a, pa) in [(false, 1.0 - q), (true, q)] {
            for (flip_b, pb) in [(false, 1.0 - q), (true, q)] {
                let p = pa * pb;
                if p > 0.0 {
                    let next = wind ^ ((flip_a as usize) << 1) ^ (flip_b as usize);
                    out.push((next, p));
                }
            }
        }
        out
    }

    fn weather_outcomes(&self, weather: usize) -> Vec<(usize, f64)> {
        if !self.cfg.stochastic {
            return vec![(1 - weather, 1.0)];
        }
        let q = self.cfg.weather_flip_prob;
        [(weather, 1.0 - q), (1 - weather, q)]
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }
}

/// Which features a built model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Full,
    RelevantOnly,
}

pub fn schema(cfg: &SwConfig) -> Result<FeatureSchema> {
    FeatureSchema::new([
        (SQUIRREL, cfg.columns),
        (HAWK, cfg.columns),
        (HAWK_DIR, 2),
        (CLOUD, cfg.columns),
        (WIND, 4),
        (WEATHER, 2),
    ])
}

fn relevant_schema(cfg: &SwConfig) -> Result<FeatureSchema> {
    FeatureSchema::new([(SQUIRREL, cfg.columns), (HAWK, cfg.columns), (HAWK_DIR, 2)])
}

/// A built world: the model plus the states a simulator needs.
#[derive(Debug, Clone)]
pub struct SwWorld<T> {
    pub config: SwConfig,
    pub model: TabularModel<T>,
    pub start: StateIndex,
    pub caught: StateIndex,
    pub nut: StateIndex,
}

impl<T: Scalar> SwWorld<T> {
    /// Reward realized on a transition into `next`.
    pub fn realized_reward(&self, next: StateIndex) -> T {
        if next == self.nut {
            T::lit(self.config.nut_reward)
        } else {
            T::zero()
        }
    }

    /// The same world seen through a feature subset: projected model, with
    /// start and sentinel states mapped through the projection.
    pub fn project(
        &self,
        subset: &FeatureSubset,
        omitted_dist: &OmittedDistribution<T>,
    ) -> Result<(SwWorld<T>, Projection)> {
        let partial = crate::abstraction::project_model(&self.model, subset, omitted_dist)?;
        let p = &partial.projection;
        let world = SwWorld {
            config: self.config.clone(),
            start: p.project_index(self.start),
            caught: p.project_index(self.caught),
            nut: p.project_index(self.nut),
            model: partial.model,
        };
        Ok((world, partial.projection))
    }
}

fn build_layout<T: Scalar>(cfg: &SwConfig, layout: Layout) -> Result<SwWorld<T>> {
    cfg.validate()?;
    let schema = match layout {
        Layout::Full => schema(cfg)?,
        Layout::RelevantOnly => relevant_schema(cfg)?,
    };
    let c = cfg.columns;
    let relevant_count = c * c * 2;
    let irrelevant_count = schema.size() / relevant_count;
    let product = schema.size();
    let caught = product;
    let nut = product + 1;
    let n = product + 2;
    let nut_col = cfg.nut_column();
    let dynamics = Dynamics { cfg };

    // successors of every irrelevant assignment (cloud, wind, weather)
    let irrelevant_next: Vec<Vec<(usize, f64)>> = match layout {
        Layout::RelevantOnly => vec![vec![(0, 1.0)]],
        Layout::Full => (0..irrelevant_count)
            .map(|irr| {
                let cloud = irr / 8;
                let wind = (irr / 2) % 4;
                let weather = irr % 2;
                let mut out = Vec::new();
                for (cl, pc) in dynamics.cloud_outcomes(cloud) {
                    for (wi, pw) in dynamics.wind_outcomes(wind) {
                        for (we, pe) in dynamics.weather_outcomes(weather) {
                            out.push((cl * 8 + wi * 2 + we, pc * pw * pe));
                        }
                    }
                }
                out
            })
            .collect(),
    };

    let mut transitions = Vec::with_capacity(n * ACTION_COUNT);
    let mut rewards = Vec::with_capacity(n * ACTION_COUNT);
    let mut terminal = Vec::with_capacity(n);

    for s in 0..product {
        let rel = s / irrelevant_count;
        let irr = s % irrelevant_count;
        let sq = rel / (2 * c);
        let hawk = (rel / 2) % c;
        let dir = HawkDir::from_index(rel % 2);

        if sq == nut_col {
            terminal.push(true);
            for _ in 0..ACTION_COUNT {
                transitions.push(TransitionRow::point_mass(n, s));
                rewards.push(T::zero());
            }
            continue;
        }
        terminal.push(false);

        let hawk_moves = dynamics.hawk_outcomes(hawk, dir);
        for action in Action::ALL {
            let mut entries: Vec<(StateIndex, T)> = Vec::new();
            let mut reward = 0.0;
            for (sq_next, ps) in dynamics.squirrel_outcomes(sq, action) {
                for (mv, ph) in &hawk_moves {
                    let p = ps * ph;
                    if mv.swept.contains(&sq_next) && !cfg.is_bush(sq_next) {
                        entries.push((caught, T::lit(p)));
                    } else if sq_next == nut_col {
                        entries.push((nut, T::lit(p)));
                        reward += p * cfg.nut_reward;
                    } else {
                        let rel_next = (sq_next * c + mv.col) * 2 + mv.dir as usize;
                        for &(irr_next, pi) in &irrelevant_next[irr] {
                            entries.push((rel_next * irrelevant_count + irr_next, T::lit(p * pi)));
                        }
                    }
                }
            }
            transitions.push(TransitionRow::from_entries(n, entries)?);
            rewards.push(T::lit(reward));
        }
    }
    for sentinel in [caught, nut] {
        terminal.push(true);
        for _ in 0..ACTION_COUNT {
            transitions.push(TransitionRow::point_mass(n, sentinel));
            rewards.push(T::zero());
        }
    }

    let start_values: Vec<usize> = match layout {
        Layout::Full => vec![0, cfg.hawk_start_col, cfg.hawk_start_dir as usize, 0, 0, 0],
        Layout::RelevantOnly => vec![0, cfg.hawk_start_col, cfg.hawk_start_dir as usize],
    };
    let start = schema.encode_values(&start_values)?;

    let model = TabularModel::new(ModelParts {
        schema,
        sentinels: vec![CAUGHT.to_owned(), NUT.to_owned()],
        action_count: ACTION_COUNT,
        transitions,
        rewards,
        discount: T::lit(cfg.gamma),
        terminal,
        r_max: T::lit(cfg.nut_reward),
    })?;
    validate_model(&model).into_result()?;

    Ok(SwWorld {
        config: cfg.clone(),
        model,
        start,
        caught,
        nut,
    })
}

/// Model over the squirrel and hawk features only. Its dynamics and rewards
/// are those of the full world with the cloud, wind and weather removed.
pub fn build_sw_relevant<T: Scalar>(cfg: &SwConfig) -> Result<SwWorld<T>> {
    build_layout(cfg, Layout::RelevantOnly)
}

/// Full six-feature world. Fails with [`Error::Unsolvable`] when the nut
/// cannot be reached from the start state.
pub fn build_sw<T: Scalar>(cfg: &SwConfig) -> Result<SwWorld<T>> {
    check_solvable(cfg)?;
    build_layout(cfg, Layout::Full)
}

/// Optimal start value, computed on the relevant-feature model.
pub fn start_value(cfg: &SwConfig) -> Result<f64> {
    let core = build_sw_relevant::<f64>(cfg)?;
    let plan = value_iteration(&core.model, &PlanningConfig::default())?;
    Ok(plan.values[core.start])
}

fn check_solvable(cfg: &SwConfig) -> Result<()> {
    if start_value(cfg)? > 0.0 {
        Ok(())
    } else {
        Err(Error::Unsolvable(format!(
            "the nut is unreachable from the start with bushes {:?} and hawk start {} {}; \
             change the bush layout",
            cfg.bush_columns, cfg.hawk_start_col, cfg.hawk_start_dir
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<T> {
    pub state: StateIndex,
    pub action: usize,
    pub next_state: StateIndex,
    pub reward: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<T> {
    pub steps: Vec<Step<T>>,
    pub total_reward: T,
}

impl<T: Scalar> Episode<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn discounted_return(&self, gamma: T) -> T {
        let mut g = T::zero();
        for step in self.steps.iter().rev() {
            g = step.reward + gamma * g;
        }
        g
    }

    /// `(state, action, next_state)` triples for count updates.
    pub fn triples(&self) -> impl Iterator<Item = (StateIndex, usize, StateIndex)> + '_ {
        self.steps.iter().map(|s| (s.state, s.action, s.next_state))
    }
}

/// Runs one episode from the world's start state until a terminal state or
/// `limit` steps, drawing successors from the world's model.
pub fn simulate_episode<T, F>(world: &SwWorld<T>, policy: F, limit: usize, rng: &mut Rng) -> Episode<T>
where
    T: Scalar,
    F: FnMut(StateIndex, &mut Rng) -> usize,
{
    let mut policy = policy;
    let mut state = world.start;
    let mut steps = Vec::new();
    let mut total = T::zero();
    for _ in 0..limit {
        if world.model.is_terminal(state) {
            break;
        }
        let action = policy(state, rng);
        let next_state = world.model.row(state, action).sample(rng);
        let reward = world.realized_reward(next_state);
        total = total + reward;
        steps.push(Step {
            state,
            action,
            next_state,
            reward,
        });
        state = next_state;
    }
    Episode {
        steps,
        total_reward: total,
    }
}

/// [`simulate_episode`] with a fresh generator seeded by `seed`.
pub fn simulate_episode_seeded<T, F>(world: &SwWorld<T>, policy: F, limit: usize, seed: u64) -> Episode<T>
where
    T: Scalar,
    F: FnMut(StateIndex, &mut Rng) -> usize,
{
    simulate_episode(world, policy, limit, &mut seeded(seed))
}

/// Partial models of the world, from the table of candidate feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
}

impl ModelId {
    pub const ALL: [ModelId; 7] = [
        ModelId::M1,
        ModelId::M2,
        ModelId::M3,
        ModelId::M4,
        ModelId::M5,
        ModelId::M6,
        ModelId::M7,
    ];

    pub fn subset(self) -> FeatureSubset {
        let names: &[&str] = match self {
            ModelId::M1 => &[SQUIRREL, CLOUD],
            ModelId::M2 => &[SQUIRREL, CLOUD, WIND],
            ModelId::M3 => &[SQUIRREL, CLOUD, WIND, HAWK],
            ModelId::M4 => &[SQUIRREL, HAWK, HAWK_DIR],
            ModelId::M5 => &[SQUIRREL, HAWK, HAWK_DIR, CLOUD],
            ModelId::M6 => &[SQUIRREL, HAWK, HAWK_DIR, CLOUD, WIND],
            ModelId::M7 => &[SQUIRREL, HAWK, HAWK_DIR, CLOUD, WIND, WEATHER],
        };
        FeatureSubset::new(names.iter().copied()).expect("catalog subsets are well formed")
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = ModelId::ALL.iter().position(|m| m == self).unwrap() + 1;
        write!(f, "m{i}")
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .iter()
            .copied()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model id `{s}` (expected m1..m7)")))
    }
}

/// The m1..m7 catalog.
pub fn relevant_subsets() -> Vec<(ModelId, FeatureSubset)> {
    ModelId::ALL.iter().map(|&m| (m, m.subset())).collect()
}

/// Long-run occupancy of the action-independent features (hawk, cloud,
/// wind, weather) started from their initial values, as a distribution over
/// the features `subset` omits.
///
/// Periodic chains are handled by averaging the first `horizon` step
/// distributions rather than taking a limit.
pub fn uncontrolled_occupancy<T: Scalar>(
    cfg: &SwConfig,
    subset: &FeatureSubset,
    horizon: usize,
) -> Result<OmittedDistribution<T>> {
    cfg.validate()?;
    if !subset.contains(SQUIRREL) {
        return Err(Error::InvalidConfig(
            "occupancy weights need the squirrel feature to be kept".into(),
        ));
    }
    let parent = schema(cfg)?;
    let projection = Projection::new(&parent, 2, subset)?;
    let dynamics = Dynamics { cfg };
    let c = cfg.columns;

    let hawk = cesaro(
        2 * c,
        cfg.hawk_start_col * 2 + cfg.hawk_start_dir as usize,
        |s| {
            dynamics
                .hawk_outcomes(s / 2, HawkDir::from_index(s % 2))
                .into_iter()
                .map(|(mv, p)| (mv.col * 2 + mv.dir as usize, p))
                .collect()
        },
        horizon,
    );
    let cloud = cesaro(c, 0, |s| dynamics.cloud_outcomes(s), horizon);
    let wind = cesaro(4, 0, |s| dynamics.wind_outcomes(s), horizon);
    let weather = cesaro(2, 0, |s| dynamics.weather_outcomes(s), horizon);

    let omitted = projection.omitted_schema();
    let pos = |name: &str| omitted.position(name);
    let mut weights = Vec::with_capacity(omitted.size());
    for h in 0..omitted.size() {
        let value = |name: &str| pos(name).map(|p| omitted.value_at(h, p));
        let hawk_p = match (value(HAWK), value(HAWK_DIR)) {
            (Some(col), Some(dir)) => hawk[col * 2 + dir],
            (Some(col), None) => hawk[col * 2] + hawk[col * 2 + 1],
            (None, Some(dir)) => (0..c).map(|col| hawk[col * 2 + dir]).sum(),
            (None, None) => 1.0,
        };
        let p = hawk_p
            * value(CLOUD).map_or(1.0, |v| cloud[v])
            * value(WIND).map_or(1.0, |v| wind[v])
            * value(WEATHER).map_or(1.0, |v| weather[v]);
        weights.push(p);
    }
    let total: f64 = weights.iter().sum();
    Ok(OmittedDistribution::Weights(
        weights.into_iter().map(|w| T::lit(w / total)).collect(),
    ))
}

fn cesaro<F>(n: usize, start: usize, step: F, horizon: usize) -> Vec<f64>
where
    F: Fn(usize) -> Vec<(usize, f64)>,
{
    let transitions: Vec<Vec<(usize, f64)>> = (0..n).map(step).collect();
    let mut dist = vec![0.0; n];
    dist[start] = 1.0;
    let mut avg = vec![0.0; n];
    let horizon = horizon.max(1);
    for _ in 0..horizon {
        for (a, d) in avg.iter_mut().zip(&dist) {
            *a += d / horizon as f64;
        }
        let mut next = vec![0.0; n];
        for (s, &d) in dist.iter().enumerate() {
            for &(t, p) in &transitions[s] {
                next[t] += d * p;
            }
        }
        dist = next;
    }
    avg
}
