//! Learning curves of a model-based agent that plans in a partial model
//! estimated from its own episodes.
//!
//! Each episode the agent acts epsilon-greedily in the full world, sees only
//! the projection of every state onto its feature subset, adds the episode to
//! its counts and re-plans with Q-value iteration over the pairs it has
//! tried. After every `eval_interval` episodes its greedy policy is scored by
//! the mean undiscounted return of a fixed set of seeded rollouts.

use std::collections::HashMap;

use rand::Rng as _;
use vepm_core::abstraction::{lift_policy, Projection};
use vepm_core::estimation::CountTable;
use vepm_core::planners::{greedy_action, value_iteration};
use vepm_core::rng::{derive_seed, substream, Rng};
use vepm_core::squirrels_world::{simulate_episode, simulate_episode_seeded, ModelId, ACTION_COUNT};
use vepm_core::{Error as CoreError, PlanningConfig, Policy, StateIndex, TieBreak, World};

use crate::config::{SampleComplexityConfig, Settings, UnvisitedRows};
use crate::error::Result;
use crate::records::{mean_stderr, median, ExperimentRecord, Variant};
use crate::worlds::{build_world, partial_model, projection};
use crate::Output;

pub const NAME: &str = "sample-complexity";
pub const MODELS: [ModelId; 2] = [ModelId::M4, ModelId::M7];

const A: usize = ACTION_COUNT;

/// Where a sampled successor leads, from the planner's point of view.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Tracked(usize),
    /// Terminal, or never acted from: a fixed value.
    Fixed(f64),
}

/// Q-values over the states the agent has acted from. Untracked states and
/// untried actions are worth `unknown_value`; terminal states are worth 0.
#[derive(Debug, Clone)]
pub struct Agent {
    projection: Option<Projection>,
    terminal: Vec<bool>,
    counts: CountTable,
    reward_sums: HashMap<(StateIndex, usize), f64>,
    index: HashMap<StateIndex, usize>,
    tracked: Vec<StateIndex>,
    q: Vec<[f64; A]>,
    gamma: f64,
    unknown_value: f64,
    /// Visits before a pair's estimate replaces `unknown_value`.
    known_visits: u64,
    planning: PlanningConfig<f64>,
}

impl Agent {
    pub fn new(
        world: &World,
        id: ModelId,
        cfg: &SampleComplexityConfig,
        planning: PlanningConfig<f64>,
    ) -> Result<Self> {
        let projection = projection(world, id)?;
        let full = &world.model;
        let (projection, states) = if id.subset().is_identity_for(full.schema()) {
            (None, full.state_count())
        } else {
            let n = projection.projected_state_count();
            (Some(projection), n)
        };
        // a projected state is terminal when every state it covers is
        let mut terminal = vec![true; states];
        for s in 0..full.state_count() {
            let p = projection.as_ref().map_or(s, |p| p.project_index(s));
            terminal[p] &= full.is_terminal(s);
        }
        let gamma = full.discount();
        let unknown_value = match cfg.unvisited {
            UnvisitedRows::Neutral => 0.0,
            UnvisitedRows::Optimistic => full.r_max() / (1.0 - gamma),
        };
        Ok(Self {
            projection,
            terminal,
            counts: CountTable::new(states, A),
            reward_sums: HashMap::new(),
            index: HashMap::new(),
            tracked: Vec::new(),
            q: Vec::new(),
            gamma,
            unknown_value,
            known_visits: cfg.known_visits.max(1),
            planning,
        })
    }

    pub fn observe(&self, full_state: StateIndex) -> StateIndex {
        self.projection
            .as_ref()
            .map_or(full_state, |p| p.project_index(full_state))
    }

    pub fn greedy(&self, full_state: StateIndex) -> usize {
        match self.index.get(&self.observe(full_state)) {
            Some(&i) => greedy_action(&self.q[i], self.planning.tie_break),
            None => match self.planning.tie_break {
                TieBreak::LowestIndex => 0,
                TieBreak::HighestIndex => A - 1,
            },
        }
    }

    pub fn visited_pairs(&self) -> usize {
        self.counts.visited_pairs()
    }

    pub fn record(&mut self, state: StateIndex, action: usize, next: StateIndex, reward: f64) -> Result<()> {
        let (s, n) = (self.observe(state), self.observe(next));
        self.counts.add(s, action, n, 1)?;
        *self.reward_sums.entry((s, action)).or_insert(0.0) += reward;
        if !self.index.contains_key(&s) {
            self.index.insert(s, self.tracked.len());
            self.tracked.push(s);
            self.q.push([self.unknown_value; A]);
        }
        Ok(())
    }

    fn target(&self, s: StateIndex) -> Target {
        if self.terminal[s] {
            Target::Fixed(0.0)
        } else if let Some(&i) = self.index.get(&s) {
            Target::Tracked(i)
        } else {
            Target::Fixed(self.unknown_value)
        }
    }

    /// Q-value iteration on the current estimate until successive iterates
    /// differ by at most the planning tolerance, starting from the previous
    /// solution. Returns the number of epochs.
    pub fn plan(&mut self) -> Result<usize> {
        type Row = Option<(f64, Vec<(Target, f64)>)>;
        let rows: Vec<[Row; A]> = self
            .tracked
            .iter()
            .map(|&s| {
                std::array::from_fn(|a| {
                    let total = self.counts.total(s, a);
                    (total >= self.known_visits).then(|| {
                        let t = total as f64;
                        let reward = self.reward_sums.get(&(s, a)).copied().unwrap_or(0.0) / t;
                        let next = self
                            .counts
                            .row(s, a)
                            .map(|(n, c)| (self.target(n), c as f64 / t))
                            .collect();
                        (reward, next)
                    })
                })
            })
            .collect();

        let tie = self.planning.tie_break;
        let mut v: Vec<f64> = self.q.iter().map(|q| q[greedy_action(q, tie)]).collect();
        let mut next_q = self.q.clone();
        let mut diff = f64::INFINITY;
        for epoch in 1..=self.planning.max_sweeps {
            diff = 0.0;
            for (i, row) in rows.iter().enumerate() {
                for (a, r) in row.iter().enumerate() {
                    let q = match r {
                        None => self.unknown_value,
                        Some((reward, next)) => {
                            let ev: f64 = next
                                .iter()
                                .map(|&(t, p)| {
                                    p * match t {
                                        Target::Tracked(j) => v[j],
                                        Target::Fixed(x) => x,
                                    }
                                })
                                .sum();
                            reward + self.gamma * ev
                        }
                    };
                    diff = diff.max((q - self.q[i][a]).abs());
                    next_q[i][a] = q;
                }
            }
            std::mem::swap(&mut self.q, &mut next_q);
            if diff <= self.planning.tol {
                return Ok(epoch);
            }
            for (vi, q) in v.iter_mut().zip(&self.q) {
                *vi = q[greedy_action(q, tie)];
            }
        }
        Err(CoreError::NotConverged {
            sweeps: self.planning.max_sweeps,
            residual: diff,
        }
        .into())
    }
}

/// Mean undiscounted return of `policy` over rollouts seeded by `seeds`.
fn evaluate<F>(world: &World, limit: usize, seeds: &[u64], mut policy: F) -> f64
where
    F: FnMut(StateIndex) -> usize,
{
    let total: f64 = seeds
        .iter()
        .map(|&seed| simulate_episode_seeded(world, |s, _: &mut Rng| policy(s), limit, seed).total_reward)
        .sum();
    total / seeds.len() as f64
}

/// An optimal policy of the full world, planned in the m4 model (which is
/// exact for the world) and lifted back.
pub fn optimal_policy(world: &World, planning: &PlanningConfig<f64>) -> Result<Policy> {
    let view = partial_model(world, ModelId::M4)?;
    let plan = value_iteration(view.model(), planning)?;
    Ok(lift_policy(&plan.policy, &projection(world, ModelId::M4)?)?)
}

/// One agent's learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRun {
    pub model: ModelId,
    pub seed: u64,
    /// `(episode, evaluation return)`, episode 0 being before any data.
    pub curve: Vec<(usize, f64)>,
    /// First evaluated episode reaching the success threshold, or
    /// `episodes + 1` if none did.
    pub first_success: usize,
    pub visited_pairs: usize,
}

/// Runs one agent for `cfg.episodes` episodes.
pub fn learn(
    world: &World,
    id: ModelId,
    cfg: &SampleComplexityConfig,
    planning: &PlanningConfig<f64>,
    eval_seeds: &[u64],
    threshold: f64,
    seed: u64,
) -> Result<LearningRun> {
    let limit = world.config.episode_limit;
    let mut agent = Agent::new(world, id, cfg, *planning)?;
    let mut rng = substream(seed, "explore", 0);
    let mut curve = vec![(0, evaluate(world, limit, eval_seeds, |s| agent.greedy(s)))];
    let mut first_success = (curve[0].1 >= threshold).then_some(0);
    for episode in 1..=cfg.episodes {
        let eps = cfg.epsilon(episode);
        let policy = |s: StateIndex, rng: &mut Rng| {
            if rng.random::<f64>() < eps {
                rng.random_range(0..A)
            } else {
                agent.greedy(s)
            }
        };
        let trajectory = simulate_episode(world, policy, limit, &mut rng);
        for step in &trajectory.steps {
            agent.record(step.state, step.action, step.next_state, step.reward)?;
        }
        agent.plan()?;
        if episode % cfg.eval_interval == 0 || episode == cfg.episodes {
            let ret = evaluate(world, limit, eval_seeds, |s| agent.greedy(s));
            curve.push((episode, ret));
            if first_success.is_none() && ret >= threshold {
                first_success = Some(episode);
            }
        }
    }
    Ok(LearningRun {
        model: id,
        seed,
        curve,
        first_success: first_success.unwrap_or(cfg.episodes + 1),
        visited_pairs: agent.visited_pairs(),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleComplexitySummary {
    pub optimal_return: f64,
    pub threshold: f64,
    pub runs: Vec<LearningRun>,
}

impl SampleComplexitySummary {
    pub fn median_first_success(&self, id: ModelId) -> f64 {
        let v: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.model == id)
            .map(|r| r.first_success as f64)
            .collect();
        median(&v)
    }
}

pub fn exp_sample_complexity(settings: &Settings, variant: Variant) -> Result<Output<SampleComplexitySummary>> {
    exp_sample_complexity_for(settings, variant, &MODELS)
}

pub fn exp_sample_complexity_for(
    settings: &Settings,
    variant: Variant,
    models: &[ModelId],
) -> Result<Output<SampleComplexitySummary>> {
    let cfg = &settings.sample_complexity;
    cfg.validate()?;
    let world = build_world(&settings.world(variant)?)?;
    let limit = world.config.episode_limit;
    let eval_label = format!("{NAME}/{variant}/eval");
    let eval_seeds: Vec<u64> = (0..cfg.eval_rollouts)
        .map(|j| derive_seed(settings.seed, &eval_label, j as u64))
        .collect();
    let optimal = optimal_policy(&world, &settings.planning)?;
    let optimal_return = evaluate(&world, limit, &eval_seeds, |s| optimal.action(s));
    let threshold = cfg.success_fraction * optimal_return;

    let mut out: Output<SampleComplexitySummary> = Output::default();
    let master = settings.seed;
    for (metric, value) in [("optimal_return", optimal_return), ("success_threshold", threshold)] {
        out.records
            .push(ExperimentRecord::new(NAME, "full", variant, master, "", metric, value));
    }
    let run_label = format!("{NAME}/{variant}");
    for &id in models {
        let mut runs = Vec::with_capacity(cfg.runs);
        for run in 0..cfg.runs {
            // the same exploration stream for every model in a given run
            let seed = derive_seed(master, &run_label, run as u64);
            let result = learn(&world, id, cfg, &settings.planning, &eval_seeds, threshold, seed)?;
            for &(episode, ret) in &result.curve {
                out.records.push(ExperimentRecord::new(
                    NAME,
                    id,
                    variant,
                    seed,
                    format!("episode={episode}"),
                    "eval_return",
                    ret,
                ));
            }
            for (metric, value) in [
                ("first_success_episode", result.first_success as f64),
                ("visited_pairs", result.visited_pairs as f64),
            ] {
                out.records
                    .push(ExperimentRecord::new(NAME, id, variant, seed, "", metric, value));
            }
            runs.push(result);
        }
        let points = runs[0].curve.len();
        for k in 0..points {
            let episode = runs[0].curve[k].0;
            let returns: Vec<f64> = runs.iter().map(|r| r.curve[k].1).collect();
            let (mean, se) = mean_stderr(&returns);
            let param = format!("episode={episode}");
            out.records.push(ExperimentRecord::new(
                NAME,
                id,
                variant,
                master,
                param.clone(),
                "mean_eval_return",
                mean,
            ));
            out.records.push(ExperimentRecord::new(
                NAME,
                id,
                variant,
                master,
                param,
                "stderr_eval_return",
                se,
            ));
        }
        let firsts: Vec<f64> = runs.iter().map(|r| r.first_success as f64).collect();
        out.records.push(ExperimentRecord::new(
            NAME,
            id,
            variant,
            master,
            "",
            "median_first_success_episode",
            median(&firsts),
        ));
        out.summary.runs.extend(runs);
    }
    out.summary.optimal_return = optimal_return;
    out.summary.threshold = threshold;
    Ok(out)
}
