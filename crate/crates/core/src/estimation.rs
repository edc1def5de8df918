//! Count-based model estimation, certainty-equivalence planning loss and the
//! planning-loss / sample-complexity bound calculators.

use rand::Rng as _;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::mdp::{
    inf_norm_diff, policy_evaluation, q_from_values, ModelParts, Policy, StateIndex, TabularModel, TransitionRow,
    ValueTable,
};
use crate::planners::{value_iteration, Plan, PlanningConfig};
use crate::rng::{seeded, Rng};
use crate::scalar::Scalar;

/// Observed next-state counts per (state, action).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    state_count: usize,
    action_count: usize,
    // sorted by next state
    rows: Vec<Vec<(u32, u64)>>,
    totals: Vec<u64>,
}

impl CountTable {
    pub fn new(state_count: usize, action_count: usize) -> Self {
        Self {
            state_count,
            action_count,
            rows: vec![Vec::new(); state_count * action_count],
            totals: vec![0; state_count * action_count],
        }
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn total(&self, state: StateIndex, action: usize) -> u64 {
        self.totals[state * self.action_count + action]
    }

    pub fn count(&self, state: StateIndex, action: usize, next: StateIndex) -> u64 {
        let row = &self.rows[state * self.action_count + action];
        row.binary_search_by_key(&(next as u32), |&(s, _)| s)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    /// Nonzero `(next_state, count)` pairs in state order.
    pub fn row(&self, state: StateIndex, action: usize) -> impl Iterator<Item = (StateIndex, u64)> + '_ {
        self.rows[state * self.action_count + action]
            .iter()
            .map(|&(s, c)| (s as usize, c))
    }

    /// Number of (state, action) pairs with at least one observation.
    pub fn visited_pairs(&self) -> usize {
        self.totals.iter().filter(|&&n| n > 0).count()
    }

    fn check(&self, state: StateIndex, action: usize, next: StateIndex) -> Result<()> {
        for (what, index, bound) in [
            ("state space", state, self.state_count),
            ("action set", action, self.action_count),
            ("state space", next, self.state_count),
        ] {
            if index >= bound {
                return Err(Error::IndexOutOfRange { what, index, bound });
            }
        }
        Ok(())
    }

    pub fn add(&mut self, state: StateIndex, action: usize, next: StateIndex, by: u64) -> Result<()> {
        self.check(state, action, next)?;
        let i = state * self.action_count + action;
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&(next as u32), |&(s, _)| s) {
            Ok(j) => row[j].1 += by,
            Err(j) => row.insert(j, (next as u32, by)),
        }
        self.totals[i] += by;
        Ok(())
    }

    /// Adds one count per `(state, action, next_state)` triple. Nothing is
    /// applied if any triple is out of range.
    pub fn update_from_trajectory<I>(&mut self, trajectory: I) -> Result<()>
    where
        I: IntoIterator<Item = (StateIndex, usize, StateIndex)>,
    {
        let steps: Vec<_> = trajectory.into_iter().collect();
        for &(s, a, n) in &steps {
            self.check(s, a, n)?;
        }
        for (s, a, n) in steps {
            self.add(s, a, n, 1)?;
        }
        Ok(())
    }
}

/// Functional form of [`CountTable::update_from_trajectory`].
pub fn update_counts_from_trajectory<I>(mut counts: CountTable, trajectory: I) -> Result<CountTable>
where
    I: IntoIterator<Item = (StateIndex, usize, StateIndex)>,
{
    counts.update_from_trajectory(trajectory)?;
    Ok(counts)
}

/// Multinomial draw of `n` successors from `row`. Small draws sample one
/// successor at a time; large ones use conditional binomials, which costs
/// one draw per support entry regardless of `n`.
fn sample_row<T: Scalar>(row: &TransitionRow<T>, n: u64, rng: &mut Rng) -> Vec<(StateIndex, u64)> {
    let entries: Vec<(StateIndex, f64)> = row.entries().map(|(s, p)| (s, p.as_f64())).collect();
    if entries.is_empty() || n == 0 {
        return Vec::new();
    }
    let total: f64 = entries.iter().map(|&(_, p)| p).sum();

    if n <= 4 * entries.len() as u64 {
        let mut counts = vec![0u64; entries.len()];
        for _ in 0..n {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = entries.len() - 1;
            for (i, &(_, p)) in entries.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            counts[pick] += 1;
        }
        return entries
            .iter()
            .zip(counts)
            .filter(|&(_, c)| c > 0)
            .map(|(&(s, _), c)| (s, c))
            .collect();
    }

    let mut remaining_n = n;
    let mut remaining_p = total;
    let mut out = Vec::with_capacity(entries.len());
    for (i, &(s, p)) in entries.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        let k = if i + 1 == entries.len() {
            remaining_n
        } else {
            let q = (p / remaining_p).clamp(0.0, 1.0);
            Binomial::new(remaining_n, q)
                .expect("probability clamped to [0, 1]")
                .sample(rng)
        };
        if k > 0 {
            out.push((s, k));
        }
        remaining_n -= k;
        remaining_p -= p;
    }
    out
}

/// Draws `n` i.i.d. successors for every non-terminal (state, action) pair.
/// Terminal rows are left empty.
pub fn sample_dataset<T: Scalar>(m: &TabularModel<T>, n: u64, seed: u64) -> Result<CountTable> {
    if n == 0 {
        return Err(Error::InvalidConfig("samples per pair must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let mut counts = CountTable::new(m.state_count(), m.action_count());
    for s in 0..m.state_count() {
        if m.is_terminal(s) {
            continue;
        }
        for a in 0..m.action_count() {
            let i = s * m.action_count() + a;
            let row: Vec<(u32, u64)> = sample_row(m.row(s, a), n, &mut rng)
                .into_iter()
                .map(|(next, c)| (next as u32, c))
                .collect();
            counts.totals[i] = row.iter().map(|&(_, c)| c).sum();
            counts.rows[i] = row;
        }
    }
    Ok(counts)
}

fn check_shapes<T: Scalar>(m: &TabularModel<T>, counts: &CountTable) -> Result<()> {
    if counts.state_count != m.state_count() {
        return Err(Error::LengthMismatch {
            what: "count table states",
            expected: m.state_count(),
            found: counts.state_count,
        });
    }
    if counts.action_count != m.action_count() {
        return Err(Error::LengthMismatch {
            what: "count table actions",
            expected: m.action_count(),
            found: counts.action_count,
        });
    }
    Ok(())
}

fn empirical_row<T: Scalar>(counts: &CountTable, s: StateIndex, a: usize, n_states: usize) -> Result<TransitionRow<T>> {
    let total = T::lit(counts.total(s, a) as f64);
    TransitionRow::from_entries(
        n_states,
        counts
            .row(s, a)
            .map(|(next, c)| (next, T::lit(c as f64) / total))
            .collect(),
    )
}

/// `p̂(f,a,f') = count(f,a,f') / N(f,a)` with rewards, discount and terminal
/// set taken from `truth_rewards`.
pub fn estimate_model<T: Scalar>(truth_rewards: &TabularModel<T>, counts: &CountTable) -> Result<TabularModel<T>> {
    build_estimate(truth_rewards, counts, false)
}

/// Like [`estimate_model`], but unvisited non-terminal pairs become
/// zero-reward self-loops instead of an error.
pub fn estimate_visited_model<T: Scalar>(
    truth_rewards: &TabularModel<T>,
    counts: &CountTable,
) -> Result<TabularModel<T>> {
    build_estimate(truth_rewards, counts, true)
}

fn build_estimate<T: Scalar>(
    truth: &TabularModel<T>,
    counts: &CountTable,
    default_unvisited: bool,
) -> Result<TabularModel<T>> {
    check_shapes(truth, counts)?;
    let n = truth.state_count();
    let a_n = truth.action_count();
    let mut transitions = Vec::with_capacity(n * a_n);
    let mut rewards = Vec::with_capacity(n * a_n);
    for s in 0..n {
        for a in 0..a_n {
            if truth.is_terminal(s) {
                transitions.push(TransitionRow::point_mass(n, s));
                rewards.push(T::zero());
            } else if counts.total(s, a) == 0 {
                if !default_unvisited {
                    return Err(Error::EmptyRow { state: s, action: a });
                }
                transitions.push(TransitionRow::point_mass(n, s));
                rewards.push(T::zero());
            } else {
                transitions.push(empirical_row(counts, s, a, n)?);
                rewards.push(truth.reward(s, a));
            }
        }
    }
    TabularModel::new(ModelParts {
        schema: truth.schema().clone(),
        sentinels: truth.sentinels().to_vec(),
        action_count: a_n,
        transitions,
        rewards,
        discount: truth.discount(),
        terminal: truth.terminal_flags().to_vec(),
        r_max: truth.r_max(),
    })
}

/// Max over (state, action) of the L1 distance between the rows of two
/// models on the same state space.
pub fn max_row_l1<T: Scalar>(a: &TabularModel<T>, b: &TabularModel<T>) -> Result<T> {
    if a.state_count() != b.state_count() || a.action_count() != b.action_count() {
        return Err(Error::LengthMismatch {
            what: "model",
            expected: a.state_count() * a.action_count(),
            found: b.state_count() * b.action_count(),
        });
    }
    let mut worst = T::zero();
    let mut scratch: Vec<(StateIndex, T)> = Vec::new();
    for (ra, rb) in a.rows().iter().zip(b.rows()) {
        scratch.clear();
        scratch.extend(ra.entries());
        scratch.extend(rb.entries().map(|(s, p)| (s, -p)));
        scratch.sort_by_key(|&(s, _)| s);
        let mut l1 = T::zero();
        let mut i = 0;
        while i < scratch.len() {
            let mut acc = scratch[i].1;
            let mut j = i + 1;
            while j < scratch.len() && scratch[j].0 == scratch[i].0 {
                acc = acc + scratch[j].1;
                j += 1;
            }
            l1 = l1 + acc.abs();
            i = j;
        }
        worst = worst.max(l1);
    }
    Ok(worst)
}

/// Left- and right-hand sides of one inequality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Scalar> InequalityCheck<T> {
    pub fn holds(&self, slack: T) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// Outcome of certainty-equivalence planning against a reference model.
#[derive(Debug, Clone)]
pub struct CertaintyEquivalenceReport<T> {
    /// `||V*_truth - V^π̃_truth||∞`.
    pub loss: T,
    /// Optimal policy of the estimated model.
    pub policy: Policy,
    /// Planning loss is at most twice the worst value error of `π*` and `π̃`.
    pub value_error_check: InequalityCheck<T>,
    /// For `π*` then `π̃`: Q error bounded by the one-step residual of the
    /// estimated model on the true values, scaled by `1/(1-γ)`.
    pub residual_checks: [InequalityCheck<T>; 2],
}

/// Optimal solution of a reference ("true") model, reused across many
/// estimated models.
#[derive(Debug, Clone)]
pub struct TruthReference<'a, T> {
    truth: &'a TabularModel<T>,
    cfg: PlanningConfig<T>,
    plan: Plan<T>,
    optimal: ValueTable<T>,
}

fn evaluation_tol<T: Scalar>(m: &TabularModel<T>, cfg: &PlanningConfig<T>) -> T {
    let tol = cfg.tol * (T::one() - m.discount());
    tol.max(T::epsilon() * T::lit(16.0) * m.value_bound().max(T::one()))
}

impl<'a, T: Scalar> TruthReference<'a, T> {
    pub fn new(truth: &'a TabularModel<T>, cfg: &PlanningConfig<T>) -> Result<Self> {
        let plan = value_iteration(truth, cfg)?;
        let optimal = policy_evaluation(truth, &plan.policy, evaluation_tol(truth, cfg))?;
        Ok(Self {
            truth,
            cfg: *cfg,
            plan,
            optimal,
        })
    }

    pub fn truth(&self) -> &TabularModel<T> {
        self.truth
    }

    pub fn optimal_values(&self) -> &ValueTable<T> {
        &self.optimal
    }

    pub fn optimal_policy(&self) -> &Policy {
        &self.plan.policy
    }

    /// Numerical allowance for the inequality checks: every value involved
    /// is computed to within `γ·tol`, amplified by at most `1/(1-γ)`.
    pub fn check_slack(&self) -> T {
        T::lit(4.0) * self.cfg.tol / (T::one() - self.truth.discount())
    }

    /// Planning loss only.
    pub fn loss(&self, estimated: &TabularModel<T>) -> Result<T> {
        self.check_same_space(estimated)?;
        let plan = value_iteration(estimated, &self.cfg)?;
        let values = policy_evaluation(self.truth, &plan.policy, evaluation_tol(self.truth, &self.cfg))?;
        inf_norm_diff(&self.optimal, &values)
    }

    /// Planning loss together with the value-error and residual inequalities.
    pub fn report(&self, estimated: &TabularModel<T>) -> Result<CertaintyEquivalenceReport<T>> {
        self.check_same_space(estimated)?;
        let truth = self.truth;
        let tol_t = evaluation_tol(truth, &self.cfg);
        let tol_e = evaluation_tol(estimated, &self.cfg);
        let plan = value_iteration(estimated, &self.cfg)?;
        let tilde = plan.policy;

        let v_tilde_truth = policy_evaluation(truth, &tilde, tol_t)?;
        let v_tilde_est = policy_evaluation(estimated, &tilde, tol_e)?;
        let v_star_truth = &self.optimal;
        let v_star_est = policy_evaluation(estimated, &self.plan.policy, tol_e)?;

        let loss = inf_norm_diff(v_star_truth, &v_tilde_truth)?;
        let value_error = inf_norm_diff(v_star_truth, &v_star_est)?.max(inf_norm_diff(&v_tilde_truth, &v_tilde_est)?);

        let gamma = truth.discount();
        let residual_check = |v_truth: &ValueTable<T>, v_est: &ValueTable<T>| -> Result<InequalityCheck<T>> {
            let q_truth = q_from_values(truth, v_truth)?;
            let q_est = q_from_values(estimated, v_est)?;
            let q_mixed = q_from_values(estimated, v_truth)?;
            Ok(InequalityCheck {
                lhs: q_truth.inf_norm_diff(&q_est)?,
                rhs: q_mixed.inf_norm_diff(&q_truth)? / (T::one() - gamma),
            })
        };

        Ok(CertaintyEquivalenceReport {
            loss,
            value_error_check: InequalityCheck {
                lhs: loss,
                rhs: T::lit(2.0) * value_error,
            },
            residual_checks: [
                residual_check(v_star_truth, &v_star_est)?,
                residual_check(&v_tilde_truth, &v_tilde_est)?,
            ],
            policy: tilde,
        })
    }

    fn check_same_space(&self, estimated: &TabularModel<T>) -> Result<()> {
        if estimated.schema() != self.truth.schema()
            || estimated.sentinels() != self.truth.sentinels()
            || estimated.action_count() != self.truth.action_count()
        {
            return Err(Error::InvalidModel(
                "estimated model does not share the reference state/action space".into(),
            ));
        }
        Ok(())
    }
}

/// Plans optimally in `estimated`, evaluates that policy in `truth` and
/// returns `||V*_truth - V^π̃_truth||∞`.
pub fn certainty_equivalence_loss<T: Scalar>(
    truth: &TabularModel<T>,
    estimated: &TabularModel<T>,
    cfg: &PlanningConfig<T>,
) -> Result<T> {
    TruthReference::new(truth, cfg)?.loss(estimated)
}

/// Size of a policy class, carried as a natural logarithm since the useful
/// surrogates (`|A|^|F|`) overflow every integer type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyClassSize {
    ln: f64,
}

impl PolicyClassSize {
    pub fn count(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("policy class size must be positive".into()));
        }
        Ok(Self { ln: (n as f64).ln() })
    }

    /// `base^exponent`, e.g. `|A|^|F|` for all deterministic policies.
    pub fn power(base: u64, exponent: u64) -> Result<Self> {
        if base == 0 {
            return Err(Error::InvalidConfig("policy class size must be positive".into()));
        }
        Ok(Self {
            ln: exponent as f64 * (base as f64).ln(),
        })
    }

    /// From the natural log of the size directly.
    pub fn from_ln(ln: f64) -> Result<Self> {
        if !(ln >= 0.0 && ln.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "log policy-class size {ln} must be finite and non-negative"
            )));
        }
        Ok(Self { ln })
    }

    pub fn all_deterministic(state_count: usize, action_count: usize) -> Result<Self> {
        Self::power(action_count as u64, state_count as u64)
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub delta: f64,
    /// Target accuracy for [`sample_budget`](Self::sample_budget); the
    /// planning-loss bound does not use it.
    pub epsilon: f64,
    /// Samples per (state, action) pair.
    pub n: u64,
    pub policy_class_size: PolicyClassSize,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        Ok(())
    }

    pub fn sample_budget(&self, state_count: usize, action_count: usize, gamma: f64) -> Result<SampleBudget> {
        self.validate()?;
        sample_complexity_budget(state_count, action_count, self.epsilon, gamma, self.delta)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("gamma {gamma} outside [0, 1)")));
    }
    Ok(())
}

/// High-probability bound on the certainty-equivalence planning loss:
/// `2 R_max / (1-γ)² · sqrt( ln(2 |F| |A| |Π| / δ) / (2n) )`.
pub fn planning_loss_bound(
    state_count: usize,
    action_count: usize,
    params: &BoundParams,
    r_max: f64,
    gamma: f64,
) -> Result<f64> {
    params.validate()?;
    check_gamma(gamma)?;
    let log_term = 2f64.ln() + (state_count as f64).ln() + (action_count as f64).ln() + params.policy_class_size.ln()
        - params.delta.ln();
    Ok(2.0 * r_max / (1.0 - gamma).powi(2) * (log_term / (2.0 * params.n as f64)).sqrt())
}

/// Generative-model calls per (state, action) pair and Q-value iteration
/// epochs that together give an `epsilon`-accurate Q with probability at
/// least `1 - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleBudget {
    pub samples_per_pair: u64,
    pub epochs: u64,
}

impl SampleBudget {
    pub fn total_samples(&self, state_count: usize, action_count: usize) -> f64 {
        self.samples_per_pair as f64 * state_count as f64 * action_count as f64
    }
}

/// Unrounded `N = 4γ² / ((1-γ)⁴ ε²) · ln(2 |F| |A| / δ)`.
pub fn samples_per_pair_exact(state_count: usize, action_count: usize, epsilon: f64, gamma: f64, delta: f64) -> f64 {
    4.0 * gamma * gamma / ((1.0 - gamma).powi(4) * epsilon * epsilon)
        * (2.0 * state_count as f64 * action_count as f64 / delta).ln()
}

/// Unrounded `k = ln(ε (1-γ) / 2) / ln γ`.
pub fn budget_epochs_exact(epsilon: f64, gamma: f64) -> f64 {
    (epsilon * (1.0 - gamma) / 2.0).ln() / gamma.ln()
}

pub fn sample_complexity_budget(
    state_count: usize,
    action_count: usize,
    epsilon: f64,
    gamma: f64,
    delta: f64,
) -> Result<SampleBudget> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig(format!("gamma {gamma} outside (0, 1)")));
    }
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || state_count == 0 || action_count == 0 {
        return Err(Error::InvalidConfig("invalid budget parameters".into()));
    }
    let n = samples_per_pair_exact(state_count, action_count, epsilon, gamma, delta).ceil();
    let k = budget_epochs_exact(epsilon, gamma).ceil().max(0.0);
    Ok(SampleBudget {
        samples_per_pair: n as u64,
        epochs: k as u64,
    })
}

/// Epochs after which `γᵏ <= ε (1-γ)`: `⌈ln(ε (1-γ)) / ln γ⌉`.
pub fn epochs_for_accuracy(epsilon: f64, gamma: f64) -> Result<u64> {
    if !(gamma > 0.0 && gamma < 1.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("invalid epsilon or gamma".into()));
    }
    Ok(((epsilon * (1.0 - gamma)).ln() / gamma.ln()).ceil().max(0.0) as u64)
}
