use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::schema::{FeatureSchema, StateIndex};

/// Successor distribution of one (state, action) pair.
///
/// Rows whose support is under a tenth of the state count are stored sparse;
/// everything else is stored dense.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionRow<T> {
    Dense(Box<[T]>),
    Sparse { next: Box<[u32]>, prob: Box<[T]> },
}

impl<T: Scalar> TransitionRow<T> {
    /// Builds a row from `(next_state, probability)` pairs. Duplicate states are
    /// summed and zero entries dropped.
    pub fn from_entries(state_count: usize, mut entries: Vec<(StateIndex, T)>) -> Result<Self> {
        entries.sort_by_key(|&(s, _)| s);
        let mut merged: Vec<(StateIndex, T)> = Vec::with_capacity(entries.len());
        for (s, p) in entries {
            if s >= state_count {
                return Err(Error::IndexOutOfRange {
                    what: "state space",
                    index: s,
                    bound: state_count,
                });
            }
            match merged.last_mut() {
                Some((last, acc)) if *last == s => *acc = *acc + p,
                _ => merged.push((s, p)),
            }
        }
        merged.retain(|&(_, p)| p != T::zero());

        if merged.len() * 10 < state_count {
            Ok(Self::Sparse {
                next: merged.iter().map(|&(s, _)| s as u32).collect(),
                prob: merged.iter().map(|&(_, p)| p).collect(),
            })
        } else {
            let mut dense = vec![T::zero(); state_count];
            for (s, p) in merged {
                dense[s] = p;
            }
            Ok(Self::Dense(dense.into_boxed_slice()))
        }
    }

    pub fn point_mass(state_count: usize, state: StateIndex) -> Self {
        Self::from_entries(state_count, vec![(state, T::one())]).expect("point mass on an in-range state")
    }

    /// Expected value of `v` under this row. Summation order is fixed by the
    /// storage order, so the result is reproducible bit for bit.
    #[inline]
    pub fn dot(&self, v: &[T]) -> T {
        match self {
            Self::Dense(p) => p.iter().zip(v).fold(T::zero(), |acc, (&p, &x)| acc + p * x),
            Self::Sparse { next, prob } => next
                .iter()
                .zip(prob.iter())
                .fold(T::zero(), |acc, (&s, &p)| acc + p * v[s as usize]),
        }
    }

    /// Multiply-adds performed by [`dot`](Self::dot).
    pub fn stored_len(&self) -> usize {
        match self {
            Self::Dense(p) => p.len(),
            Self::Sparse { next, .. } => next.len(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Self::Sparse { .. })
    }

    pub fn prob(&self, state: StateIndex) -> T {
        match self {
            Self::Dense(p) => p.get(state).copied().unwrap_or_else(T::zero),
            Self::Sparse { next, prob } => next
                .binary_search(&(state as u32))
                .map(|i| prob[i])
                .unwrap_or_else(|_| T::zero()),
        }
    }

    pub fn sum(&self) -> T {
        match self {
            Self::Dense(p) => p.iter().copied().sum(),
            Self::Sparse { prob, .. } => prob.iter().copied().sum(),
        }
    }

    /// Nonzero entries in increasing state order.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (StateIndex, T)> + '_> {
        match self {
            Self::Dense(p) => Box::new(
                p.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != T::zero())
                    .map(|(s, &p)| (s, p)),
            ),
            Self::Sparse { next, prob } => Box::new(next.iter().zip(prob.iter()).map(|(&s, &p)| (s as usize, p))),
        }
    }

    pub fn support_len(&self) -> usize {
        self.entries().count()
    }

    /// Draws one successor by inverting the cumulative distribution.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> StateIndex {
        let u = T::lit(rng.random::<f64>()) * self.sum();
        let mut acc = T::zero();
        let mut last = 0;
        for (s, p) in self.entries() {
            acc = acc + p;
            last = s;
            if u < acc {
                return s;
            }
        }
        last
    }
}

/// Everything needed to assemble a [`TabularModel`]. Tables are indexed by
/// `state * action_count + action`.
#[derive(Debug, Clone)]
pub struct ModelParts<T> {
    pub schema: FeatureSchema,
    /// Named states appended after the feature-vector states.
    pub sentinels: Vec<String>,
    pub action_count: usize,
    pub transitions: Vec<TransitionRow<T>>,
    pub rewards: Vec<T>,
    pub discount: T,
    pub terminal: Vec<bool>,
    pub r_max: T,
}

/// Finite MDP over a feature schema plus a few named sentinel states.
///
/// Construction checks shapes only; numerical well-formedness (row sums,
/// reward range, absorbing terminals) is reported by [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel<T> {
    schema: FeatureSchema,
    sentinels: Vec<String>,
    action_count: usize,
    transitions: Vec<TransitionRow<T>>,
    rewards: Vec<T>,
    discount: T,
    terminal: Vec<bool>,
    r_max: T,
}

impl<T: Scalar> TabularModel<T> {
    pub fn new(parts: ModelParts<T>) -> Result<Self> {
        let ModelParts {
            schema,
            sentinels,
            action_count,
            transitions,
            rewards,
            discount,
            terminal,
            r_max,
        } = parts;

        let states = schema
            .size()
            .checked_add(sentinels.len())
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidModel("too many states".into()))?;
        if action_count == 0 {
            return Err(Error::InvalidModel("action count must be positive".into()));
        }
        if !(discount >= T::zero() && discount < T::one()) {
            return Err(Error::InvalidModel(format!("discount {discount} outside [0, 1)")));
        }
        if !(r_max >= T::zero()) || !r_max.is_finite() {
            return Err(Error::InvalidModel(format!("r_max {r_max} must be finite and >= 0")));
        }
        let pairs = states * action_count;
        for (what, found) in [("transition table", transitions.len()), ("reward table", rewards.len())] {
            if found != pairs {
                return Err(Error::LengthMismatch {
                    what,
                    expected: pairs,
                    found,
                });
            }
        }
        if terminal.len() != states {
            return Err(Error::LengthMismatch {
                what: "terminal flags",
                expected: states,
                found: terminal.len(),
            });
        }
        for row in &transitions {
            if let TransitionRow::Dense(p) = row {
                if p.len() != states {
                    return Err(Error::LengthMismatch {
                        what: "dense transition row",
                        expected: states,
                        found: p.len(),
                    });
                }
            }
            if let TransitionRow::Sparse { next, .. } = row {
                if let Some(&s) = next.iter().find(|&&s| s as usize >= states) {
                    return Err(Error::IndexOutOfRange {
                        what: "state space",
                        index: s as usize,
                        bound: states,
                    });
                }
            }
        }

        Ok(Self {
            schema,
            sentinels,
            action_count,
            transitions,
            rewards,
            discount,
            terminal,
            r_max,
        })
    }

    pub fn into_parts(self) -> ModelParts<T> {
        ModelParts {
            schema: self.schema,
            sentinels: self.sentinels,
            action_count: self.action_count,
            transitions: self.transitions,
            rewards: self.rewards,
            discount: self.discount,
            terminal: self.terminal,
            r_max: self.r_max,
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn sentinels(&self) -> &[String] {
        &self.sentinels
    }

    pub fn sentinel_index(&self, name: &str) -> Option<StateIndex> {
        self.sentinels
            .iter()
            .position(|s| s == name)
            .map(|i| self.schema.size() + i)
    }

    pub fn state_count(&self) -> usize {
        self.terminal.len()
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    /// Upper end of the value range, `r_max / (1 - discount)`.
    pub fn value_bound(&self) -> T {
        self.r_max / (T::one() - self.discount)
    }

    #[inline]
    pub fn row(&self, state: StateIndex, action: usize) -> &TransitionRow<T> {
        &self.transitions[state * self.action_count + action]
    }

    #[inline]
    pub fn reward(&self, state: StateIndex, action: usize) -> T {
        self.rewards[state * self.action_count + action]
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn rows(&self) -> &[TransitionRow<T>] {
        &self.transitions
    }

    pub fn is_terminal(&self, state: StateIndex) -> bool {
        self.terminal[state]
    }

    pub fn terminal_flags(&self) -> &[bool] {
        &self.terminal
    }

    /// `r(s,a) + γ <p(s,a,·), v>`.
    #[inline]
    pub fn backup(&self, state: StateIndex, action: usize, v: &[T]) -> T {
        let i = state * self.action_count + action;
        self.rewards[i] + self.discount * self.transitions[i].dot(v)
    }

    /// Total multiply-adds of one full sweep over all (state, action) pairs.
    pub fn sweep_cost(&self) -> u64 {
        self.transitions.iter().map(|r| r.stored_len() as u64).sum()
    }

    /// Human-readable label for a state: its feature vector or sentinel name.
    pub fn state_label(&self, state: StateIndex) -> String {
        if state < self.schema.size() {
            let values = self.schema.decode_unchecked(state);
            let parts: Vec<String> = self
                .schema
                .features()
                .iter()
                .zip(values)
                .map(|(f, v)| format!("{}={}", f.name, v))
                .collect();
            parts.join(" ")
        } else {
            self.sentinels
                .get(state - self.schema.size())
                .cloned()
                .unwrap_or_else(|| format!("#{state}"))
        }
    }

    /// Replaces the discount, keeping everything else.
    pub fn with_discount(mut self, discount: T) -> Result<Self> {
        if !(discount >= T::zero() && discount < T::one()) {
            return Err(Error::InvalidModel(format!("discount {discount} outside [0, 1)")));
        }
        self.discount = discount;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum {
        state: StateIndex,
        action: usize,
        sum: f64,
    },
    NegativeProbability {
        state: StateIndex,
        action: usize,
        next: StateIndex,
    },
    RewardRange {
        state: StateIndex,
        action: usize,
        reward: f64,
    },
    TerminalNotAbsorbing {
        state: StateIndex,
        action: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(first) => Err(Error::InvalidModel(format!(
                "{} violation(s), first: {first:?}",
                self.violations.len()
            ))),
        }
    }
}

/// Row-sum tolerance for validation: 1e-9, or a few ulps of the scalar type
/// when that is coarser.
pub fn row_sum_tolerance<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(256.0))
}

pub fn validate_model<T: Scalar>(m: &TabularModel<T>) -> ValidationReport {
    let tol = row_sum_tolerance::<T>();
    let mut violations = Vec::new();
    for s in 0..m.state_count() {
        for a in 0..m.action_count() {
            let row = m.row(s, a);
            let r = m.reward(s, a);
            if let Some((next, _)) = row.entries().find(|&(_, p)| !(p >= T::zero())) {
                violations.push(Violation::NegativeProbability {
                    state: s,
                    action: a,
                    next,
                });
            }
            if m.is_terminal(s) {
                if row.prob(s) != T::one() || r != T::zero() {
                    violations.push(Violation::TerminalNotAbsorbing { state: s, action: a });
                }
                continue;
            }
            let sum = row.sum();
            if !((sum - T::one()).abs() <= tol) {
                violations.push(Violation::RowSum {
                    state: s,
                    action: a,
                    sum: sum.as_f64(),
                });
            }
            if !(r >= T::zero() && r <= m.r_max()) {
                violations.push(Violation::RewardRange {
                    state: s,
                    action: a,
                    reward: r.as_f64(),
                });
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(reward: f64) -> ModelParts<f64> {
        // s0 -a0-> s1 (terminal), s0 -a1-> s0
        let schema = FeatureSchema::new([("s", 2)]).unwrap();
        ModelParts {
            schema,
            sentinels: vec![],
            action_count: 2,
            transitions: vec![
                TransitionRow::point_mass(2, 1),
                TransitionRow::point_mass(2, 0),
                TransitionRow::point_mass(2, 1),
                TransitionRow::point_mass(2, 1),
            ],
            rewards: vec![reward, 0.0, 0.0, 0.0],
            discount: 0.9,
            terminal: vec![false, true],
            r_max: 10.0,
        }
    }

    #[test]
    fn valid_chain_passes() {
        let m = TabularModel::new(chain(10.0)).unwrap();
        assert!(validate_model(&m).is_ok());
    }

    #[test]
    fn short_row_reported_once() {
        let mut parts = chain(10.0);
        parts.transitions[1] = TransitionRow::from_entries(2, vec![(0, 0.9)]).unwrap();
        let report = validate_model(&TabularModel::new(parts).unwrap());
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::RowSum {
                state: 0,
                action: 1,
                ..
            }
        ));
    }

    #[test]
    fn reward_above_r_max_reported_once() {
        let m = TabularModel::new(chain(11.0)).unwrap();
        let report = validate_model(&m);
        assert_eq!(
            report.violations,
            vec![Violation::RewardRange {
                state: 0,
                action: 0,
                reward: 11.0
            }]
        );
    }

    #[test]
    fn leaky_terminal_reported() {
        let mut parts = chain(10.0);
        parts.transitions[3] = TransitionRow::point_mass(2, 0);
        let report = validate_model(&TabularModel::new(parts).unwrap());
        assert_eq!(
            report.violations,
            vec![Violation::TerminalNotAbsorbing { state: 1, action: 1 }]
        );
    }

    #[test]
    fn shape_errors() {
        let mut parts = chain(10.0);
        parts.rewards.pop();
        assert!(TabularModel::new(parts).is_err());
        let mut parts = chain(10.0);
        parts.discount = 1.0;
        assert!(TabularModel::new(parts).is_err());
    }

    #[test]
    fn sparse_fallback_threshold() {
        let sparse = TransitionRow::from_entries(100, vec![(3, 0.5), (7, 0.5)]).unwrap();
        assert!(sparse.is_sparse());
        let dense = TransitionRow::from_entries(10, vec![(3, 0.5), (7, 0.5)]).unwrap();
        assert!(!dense.is_sparse());
        assert_eq!(dense.stored_len(), 10);
        assert_eq!(sparse.stored_len(), 2);
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(sparse.dot(&v), 5.0);
        assert_eq!(dense.dot(&v[..10]), 5.0);
    }

    #[test]
    fn duplicate_entries_merge() {
        let row = TransitionRow::from_entries(50, vec![(4, 0.25), (1, 0.5), (4, 0.25)]).unwrap();
        assert_eq!(row.entries().collect::<Vec<_>>(), vec![(1, 0.5), (4, 0.5)]);
        assert_eq!(row.prob(4), 0.5);
        assert_eq!(row.prob(2), 0.0);
    }
}
