use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::model::TabularModel;
use super::schema::StateIndex;

/// Deterministic policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(actions: Vec<usize>, action_count: usize) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= action_count) {
            return Err(Error::IndexOutOfRange {
                what: "action set",
                index: a,
                bound: action_count,
            });
        }
        Ok(Self { actions })
    }

    pub fn constant(state_count: usize, action: usize) -> Self {
        Self {
            actions: vec![action; state_count],
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, state: StateIndex) -> usize {
        self.actions[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }
}

/// State values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable<T>(Vec<T>);

impl<T: Scalar> ValueTable<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }
}

impl<T> Index<StateIndex> for ValueTable<T> {
    type Output = T;

    fn index(&self, s: StateIndex) -> &T {
        &self.0[s]
    }
}

/// Action values, stored state-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    action_count: usize,
    values: Vec<T>,
}

impl<T: Scalar> QTable<T> {
    pub fn new(values: Vec<T>, action_count: usize) -> Result<Self> {
        if action_count == 0 || values.len() % action_count != 0 {
            return Err(Error::LengthMismatch {
                what: "q table",
                expected: action_count.max(1) * (values.len() / action_count.max(1)),
                found: values.len(),
            });
        }
        Ok(Self { action_count, values })
    }

    pub fn zeros(state_count: usize, action_count: usize) -> Self {
        Self {
            action_count,
            values: vec![T::zero(); state_count * action_count],
        }
    }

    pub fn state_count(&self) -> usize {
        self.values.len() / self.action_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn row(&self, state: StateIndex) -> &[T] {
        &self.values[state * self.action_count..(state + 1) * self.action_count]
    }

    pub fn get(&self, state: StateIndex, action: usize) -> T {
        self.values[state * self.action_count + action]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// `max_a Q(s, a)` for every state.
    pub fn max_values(&self) -> ValueTable<T> {
        ValueTable(
            self.values
                .chunks(self.action_count)
                .map(|row| row.iter().copied().fold(T::neg_infinity(), T::max))
                .collect(),
        )
    }

    /// Largest absolute entrywise difference.
    pub fn inf_norm_diff(&self, other: &Self) -> Result<T> {
        if self.values.len() != other.values.len() || self.action_count != other.action_count {
            return Err(Error::LengthMismatch {
                what: "q table",
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(max_abs_diff(&self.values, &other.values))
    }
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).fold(T::zero(), T::max)
}

/// `max_s |a(s) - b(s)|`.
pub fn inf_norm_diff<T: Scalar>(a: &ValueTable<T>, b: &ValueTable<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "value table",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(max_abs_diff(&a.0, &b.0))
}

/// Index of the largest gap, with the gap itself.
pub fn max_gap_state<T: Scalar>(a: &ValueTable<T>, b: &ValueTable<T>) -> Option<(StateIndex, T)> {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs())
        .enumerate()
        .fold(None, |best, (s, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((s, d)),
        })
}

/// Sweeps after which iteration from zero is guaranteed to have reached a
/// residual of `tol` in exact arithmetic, with headroom.
pub(crate) fn sweep_budget<T: Scalar>(m: &TabularModel<T>, tol: T) -> usize {
    let gamma = m.discount().as_f64();
    let scale = m.r_max().as_f64().max(1.0);
    if gamma <= 0.0 {
        return 4;
    }
    let needed = ((tol.as_f64() / scale).ln() / gamma.ln()).ceil();
    if needed.is_finite() && needed > 0.0 {
        2 * needed as usize + 16
    } else {
        16
    }
}

/// One application of the policy's Bellman evaluation operator.
pub fn evaluation_backup<T: Scalar>(m: &TabularModel<T>, pi: &Policy, v: &[T], out: &mut [T]) {
    for (s, o) in out.iter_mut().enumerate() {
        *o = m.backup(s, pi.action(s), v);
    }
}

/// Iterative policy evaluation from `V = 0`, stopping once successive
/// iterates differ by at most `tol` in the max norm. The returned table then
/// satisfies `||V - T^π V||∞ <= γ·tol`.
pub fn policy_evaluation<T: Scalar>(m: &TabularModel<T>, pi: &Policy, tol: T) -> Result<ValueTable<T>> {
    if pi.len() != m.state_count() {
        return Err(Error::LengthMismatch {
            what: "policy",
            expected: m.state_count(),
            found: pi.len(),
        });
    }
    if let Some(&a) = pi.actions().iter().find(|&&a| a >= m.action_count()) {
        return Err(Error::IndexOutOfRange {
            what: "action set",
            index: a,
            bound: m.action_count(),
        });
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidConfig(format!("tolerance {tol} must be positive")));
    }

    let n = m.state_count();
    let mut v = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let budget = sweep_budget(m, tol);
    let mut residual = T::infinity();
    for _ in 0..budget {
        evaluation_backup(m, pi, &v, &mut next);
        residual = max_abs_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if residual <= tol {
            return Ok(ValueTable(v));
        }
    }
    Err(Error::NotConverged {
        sweeps: budget,
        residual: residual.as_f64(),
    })
}

/// `Q^π(s,a) = r(s,a) + γ <p(s,a,·), V^π>` for all pairs.
pub fn q_from_values<T: Scalar>(m: &TabularModel<T>, v: &ValueTable<T>) -> Result<QTable<T>> {
    if v.len() != m.state_count() {
        return Err(Error::LengthMismatch {
            what: "value table",
            expected: m.state_count(),
            found: v.len(),
        });
    }
    let a_n = m.action_count();
    let values = (0..m.state_count() * a_n)
        .map(|i| m.backup(i / a_n, i % a_n, v.as_slice()))
        .collect();
    Ok(QTable {
        action_count: a_n,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{FeatureSchema, ModelParts, TransitionRow};

    fn single_absorbing(reward: f64, gamma: f64) -> TabularModel<f64> {
        TabularModel::new(ModelParts {
            schema: FeatureSchema::new([("s", 1)]).unwrap(),
            sentinels: vec![],
            action_count: 2,
            transitions: vec![TransitionRow::point_mass(1, 0), TransitionRow::point_mass(1, 0)],
            rewards: vec![reward, reward],
            discount: gamma,
            terminal: vec![false],
            r_max: reward,
        })
        .unwrap()
    }

    #[test]
    fn geometric_series() {
        let m = single_absorbing(1.0, 0.5);
        for a in 0..2 {
            let v = policy_evaluation(&m, &Policy::constant(1, a), 1e-12).unwrap();
            assert!((v[0] - 2.0).abs() <= 1e-11);
        }
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let m = single_absorbing(0.0, 0.9);
        let v = policy_evaluation(&m, &Policy::constant(1, 0), 1e-8).unwrap();
        assert_eq!(v.as_slice(), &[0.0]);
    }

    #[test]
    fn evaluation_rejects_bad_inputs() {
        let m = single_absorbing(1.0, 0.5);
        assert!(policy_evaluation(&m, &Policy::constant(2, 0), 1e-8).is_err());
        assert!(policy_evaluation(&m, &Policy::constant(1, 2), 1e-8).is_err());
        assert!(policy_evaluation(&m, &Policy::constant(1, 0), 0.0).is_err());
    }

    #[test]
    fn inf_norm_examples() {
        let a = ValueTable::new(vec![1.0, 2.0]);
        let b = ValueTable::new(vec![1.0, 5.0]);
        assert_eq!(inf_norm_diff(&a, &a).unwrap(), 0.0);
        assert_eq!(inf_norm_diff(&a, &b).unwrap(), 3.0);
        assert_eq!(inf_norm_diff(&b, &a).unwrap(), 3.0);
        assert!(inf_norm_diff(&a, &ValueTable::new(vec![1.0])).is_err());
        assert_eq!(max_gap_state(&a, &b), Some((1, 3.0)));
    }

    #[test]
    fn policy_rejects_out_of_range_actions() {
        assert!(Policy::new(vec![0, 3], 3).is_err());
        assert!(Policy::new(vec![0, 2], 3).is_ok());
    }

    #[test]
    fn q_max_values() {
        let q = QTable::new(vec![1.0, 3.0, 2.0, 0.0, -1.0, 0.5], 3).unwrap();
        assert_eq!(q.max_values().as_slice(), &[3.0, 0.5]);
        assert_eq!(q.row(1), &[0.0, -1.0, 0.5]);
    }
}
