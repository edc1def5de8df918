//! Value iteration, model-based Q-value iteration and greedy action extraction.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::mdp::{Policy, QTable, TabularModel, ValueTable, DEFAULT_TOL};
use crate::scalar::Scalar;

/// How `argmax` resolves equal action values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestIndex,
    HighestIndex,
}

impl std::str::FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest-index" | "lowest" => Ok(Self::LowestIndex),
            "highest-index" | "highest" => Ok(Self::HighestIndex),
            other => Err(Error::InvalidConfig(format!("unknown tie-break rule `{other}`"))),
        }
    }
}

impl std::fmt::Display for TieBreak {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LowestIndex => "lowest-index",
            Self::HighestIndex => "highest-index",
        })
    }
}

pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningConfig<T> {
    /// Stop once the Bellman residual is at most this.
    pub tol: T,
    pub max_sweeps: usize,
    pub tie_break: TieBreak,
}

impl<T: Scalar> Default for PlanningConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

impl<T: Scalar> PlanningConfig<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidConfig(format!("tol {} must be positive", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan<T> {
    pub values: ValueTable<T>,
    pub policy: Policy,
    pub sweeps: usize,
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    pub wall_time: Duration,
    pub multiply_add_count: u64,
    pub bellman_residual: f64,
}

/// Index of the best entry of `row` under `tie_break`.
pub fn greedy_action<T: Scalar>(row: &[T], tie_break: TieBreak) -> usize {
    let mut best = 0;
    for (a, &q) in row.iter().enumerate().skip(1) {
        let better = match tie_break {
            TieBreak::LowestIndex => q > row[best],
            TieBreak::HighestIndex => q >= row[best],
        };
        if better {
            best = a;
        }
    }
    best
}

pub fn greedy_policy<T: Scalar>(q: &QTable<T>, tie_break: TieBreak) -> Policy {
    let actions = (0..q.state_count())
        .map(|s| greedy_action(q.row(s), tie_break))
        .collect();
    Policy::new(actions, q.action_count()).expect("argmax is a valid action")
}

/// One Bellman optimality backup of every state into `out`; returns the
/// number of multiply-adds.
fn optimality_sweep<T: Scalar>(m: &TabularModel<T>, v: &[T], out: &mut [T]) -> u64 {
    let a_n = m.action_count();
    let mut ops = 0u64;
    for (s, o) in out.iter_mut().enumerate() {
        let mut best = T::neg_infinity();
        for a in 0..a_n {
            ops += m.row(s, a).stored_len() as u64;
            best = best.max(m.backup(s, a, v));
        }
        *o = best;
    }
    ops
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).fold(T::zero(), T::max)
}

/// Greedy policy with respect to `v` (one extra backup per pair).
pub fn greedy_from_values<T: Scalar>(m: &TabularModel<T>, v: &[T], tie_break: TieBreak) -> Policy {
    let a_n = m.action_count();
    let mut row = vec![T::zero(); a_n];
    let actions = (0..m.state_count())
        .map(|s| {
            for (a, q) in row.iter_mut().enumerate() {
                *q = m.backup(s, a, v);
            }
            greedy_action(&row, tie_break)
        })
        .collect();
    Policy::new(actions, a_n).expect("argmax is a valid action")
}

/// Value iteration from `V = 0` until the Bellman residual drops to
/// `cfg.tol`. The returned values are within `tol·γ/(1-γ)` of `V*`.
pub fn value_iteration<T: Scalar>(m: &TabularModel<T>, cfg: &PlanningConfig<T>) -> Result<Plan<T>> {
    cfg.validate()?;
    let n = m.state_count();
    let mut v = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut residual = T::infinity();
    for sweep in 1..=cfg.max_sweeps {
        optimality_sweep(m, &v, &mut next);
        residual = max_abs_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if residual <= cfg.tol {
            let policy = greedy_from_values(m, &v, cfg.tie_break);
            return Ok(Plan {
                values: ValueTable::new(v),
                policy,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        sweeps: cfg.max_sweeps,
        residual: residual.as_f64(),
    })
}

/// Model-based Q-value iteration: `Q⁰ = 0`, `V⁰ = 0`,
/// `Qᵏ(f,a) = r(f,a) + γ <p(f,a,·), Vᵏ⁻¹>`, `Vᵏ(f) = max_a Qᵏ(f,a)`.
/// Returns `Q^epochs`.
pub fn q_value_iteration<T: Scalar>(m: &TabularModel<T>, epochs: usize) -> QTable<T> {
    let (q, _) = qvi_run(m, epochs, None);
    q
}

/// Q-value iteration continued until successive `V` iterates differ by at
/// most `cfg.tol`; returns the final table and the number of epochs run.
pub fn q_value_iteration_converged<T: Scalar>(
    m: &TabularModel<T>,
    cfg: &PlanningConfig<T>,
) -> Result<(QTable<T>, usize)> {
    cfg.validate()?;
    let (q, stop) = qvi_run(m, cfg.max_sweeps, Some(cfg.tol));
    match stop {
        QviStop::Converged(epochs) => Ok((q, epochs)),
        QviStop::Exhausted(residual) => Err(Error::NotConverged {
            sweeps: cfg.max_sweeps,
            residual: residual.as_f64(),
        }),
    }
}

enum QviStop<T> {
    Converged(usize),
    Exhausted(T),
}

fn qvi_run<T: Scalar>(m: &TabularModel<T>, epochs: usize, tol: Option<T>) -> (QTable<T>, QviStop<T>) {
    let n = m.state_count();
    let a_n = m.action_count();
    let mut q = vec![T::zero(); n * a_n];
    let mut v = vec![T::zero(); n];
    let mut next_v = vec![T::zero(); n];
    let mut residual = T::infinity();
    for k in 1..=epochs {
        for s in 0..n {
            let mut best = T::neg_infinity();
            for a in 0..a_n {
                let value = m.backup(s, a, &v);
                q[s * a_n + a] = value;
                best = best.max(value);
            }
            next_v[s] = best;
        }
        residual = max_abs_diff(&v, &next_v);
        std::mem::swap(&mut v, &mut next_v);
        if let Some(tol) = tol {
            if residual <= tol {
                return (QTable::new(q, a_n).expect("shape"), QviStop::Converged(k));
            }
        }
    }
    let stop = if tol.is_some() {
        QviStop::Exhausted(residual)
    } else {
        QviStop::Converged(epochs)
    };
    (QTable::new(q, a_n).expect("shape"), stop)
}

/// One full Bellman optimality sweep, instrumented.
pub fn vi_single_sweep<T: Scalar>(m: &TabularModel<T>, v_in: &ValueTable<T>) -> Result<(ValueTable<T>, SweepStats)> {
    if v_in.len() != m.state_count() {
        return Err(Error::LengthMismatch {
            what: "value table",
            expected: m.state_count(),
            found: v_in.len(),
        });
    }
    let mut out = vec![T::zero(); v_in.len()];
    let start = Instant::now();
    let ops = optimality_sweep(m, v_in.as_slice(), &mut out);
    let wall_time = start.elapsed();
    let residual = max_abs_diff(v_in.as_slice(), &out);
    Ok((
        ValueTable::new(out),
        SweepStats {
            wall_time,
            multiply_add_count: ops,
            bellman_residual: residual.as_f64(),
        },
    ))
}
