//! Feature-subset projections of states, models and policies, and the value
//! loss of planning in a projection.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::mdp::{
    inf_norm_diff, max_gap_state, policy_evaluation, FeatureSchema, FeatureVector, ModelParts, Policy, StateIndex,
    TabularModel, TransitionRow, ValueTable,
};
use crate::planners::{value_iteration, Plan, PlanningConfig};
use crate::scalar::Scalar;

/// Max deviation across omitted-feature assignments under which a projection
/// is reported exact.
pub const EXACTNESS_THRESHOLD: f64 = 1e-9;

/// Names of the features a partial model keeps, in the order of the
/// projected schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSubset {
    kept: Vec<String>,
}

impl FeatureSubset {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let kept: Vec<String> = names.into_iter().map(Into::into).collect();
        if kept.is_empty() {
            return Err(Error::InvalidConfig("feature subset must not be empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = kept.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidConfig(format!("feature `{dup}` listed twice")));
        }
        Ok(Self { kept })
    }

    /// Every feature of `schema`, in schema order.
    pub fn all(schema: &FeatureSchema) -> Self {
        Self {
            kept: schema.features().iter().map(|f| f.name.clone()).collect(),
        }
    }

    pub fn kept(&self) -> &[String] {
        &self.kept
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.kept.iter().any(|k| k == name)
    }

    /// Same subset without `name`; `None` when that would leave it empty.
    pub fn without(&self, name: &str) -> Option<Self> {
        let kept: Vec<String> = self.kept.iter().filter(|k| *k != name).cloned().collect();
        (!kept.is_empty() && kept.len() < self.kept.len()).then_some(Self { kept })
    }

    /// True when this keeps every feature of `schema` in schema order.
    pub fn is_identity_for(&self, schema: &FeatureSchema) -> bool {
        self.kept.len() == schema.len() && self.kept.iter().zip(schema.features()).all(|(k, f)| *k == f.name)
    }
}

impl std::fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}}}", self.kept.join(", "))
    }
}

/// Coordinate deletion: the kept coordinates of `fv`, in subset order.
pub fn project_state(schema: &FeatureSchema, fv: &FeatureVector, subset: &FeatureSubset) -> Result<FeatureVector> {
    schema.encode(fv)?;
    subset
        .kept()
        .iter()
        .map(|name| {
            schema
                .position(name)
                .map(|p| fv.values()[p])
                .ok_or_else(|| Error::UnknownFeature(name.clone()))
        })
        .collect::<Result<Vec<_>>>()
        .map(FeatureVector)
}

/// Precomputed index maps between a parent state space and the state space
/// of a feature subset. Sentinel states map to themselves.
#[derive(Debug, Clone)]
pub struct Projection {
    subset: FeatureSubset,
    projected: FeatureSchema,
    omitted: FeatureSchema,
    parent_size: usize,
    sentinel_count: usize,
    // parent product index -> (projected index, omitted index)
    to_kept: Vec<u32>,
    to_omitted: Vec<u32>,
    // projected index * omitted size + omitted index -> parent index
    join: Vec<u32>,
}

impl Projection {
    pub fn new(parent: &FeatureSchema, sentinel_count: usize, subset: &FeatureSubset) -> Result<Self> {
        let kept_pos = subset
            .kept()
            .iter()
            .map(|name| parent.position(name).ok_or_else(|| Error::UnknownFeature(name.clone())))
            .collect::<Result<Vec<_>>>()?;
        let omitted_pos: Vec<usize> = (0..parent.len()).filter(|p| !kept_pos.contains(p)).collect();

        let feats = parent.features();
        let projected = FeatureSchema::new(kept_pos.iter().map(|&p| (feats[p].name.clone(), feats[p].domain_size)))?;
        let omitted = FeatureSchema::new(
            omitted_pos
                .iter()
                .map(|&p| (feats[p].name.clone(), feats[p].domain_size)),
        )?;
        if parent.size() + sentinel_count > u32::MAX as usize {
            return Err(Error::InvalidModel("too many states".into()));
        }

        let mut to_kept = vec![0u32; parent.size()];
        let mut to_omitted = vec![0u32; parent.size()];
        let mut join = vec![0u32; parent.size()];
        for s in 0..parent.size() {
            let g: usize = kept_pos
                .iter()
                .enumerate()
                .map(|(i, &p)| parent.value_at(s, p) * projected.stride(i))
                .sum();
            let h: usize = omitted_pos
                .iter()
                .enumerate()
                .map(|(i, &p)| parent.value_at(s, p) * omitted.stride(i))
                .sum();
            to_kept[s] = g as u32;
            to_omitted[s] = h as u32;
            join[g * omitted.size() + h] = s as u32;
        }

        Ok(Self {
            subset: subset.clone(),
            projected,
            omitted,
            parent_size: parent.size(),
            sentinel_count,
            to_kept,
            to_omitted,
            join,
        })
    }

    pub fn for_model<T: Scalar>(m: &TabularModel<T>, subset: &FeatureSubset) -> Result<Self> {
        Self::new(m.schema(), m.sentinels().len(), subset)
    }

    pub fn subset(&self) -> &FeatureSubset {
        &self.subset
    }

    pub fn projected_schema(&self) -> &FeatureSchema {
        &self.projected
    }

    pub fn omitted_schema(&self) -> &FeatureSchema {
        &self.omitted
    }

    pub fn parent_state_count(&self) -> usize {
        self.parent_size + self.sentinel_count
    }

    pub fn projected_state_count(&self) -> usize {
        self.projected.size() + self.sentinel_count
    }

    /// Parent state (feature vector or sentinel) to projected state.
    #[inline]
    pub fn project_index(&self, s: StateIndex) -> StateIndex {
        if s < self.parent_size {
            self.to_kept[s] as usize
        } else {
            s - self.parent_size + self.projected.size()
        }
    }

    /// Omitted-feature assignment of a parent feature-vector state.
    #[inline]
    pub fn omitted_index(&self, s: StateIndex) -> usize {
        self.to_omitted[s] as usize
    }

    /// Parent state with kept assignment `g` and omitted assignment `h`.
    #[inline]
    pub fn join(&self, g: usize, h: usize) -> StateIndex {
        self.join[g * self.omitted.size() + h] as usize
    }
}

/// Weights over omitted-feature assignments used to marginalize a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum OmittedDistribution<T> {
    #[default]
    Uniform,
    /// One weight per omitted assignment, indexed by the omitted schema
    /// (omitted features in parent order).
    Weights(Vec<T>),
}

impl<T: Scalar> OmittedDistribution<T> {
    fn resolve(&self, size: usize) -> Result<Vec<T>> {
        match self {
            Self::Uniform => Ok(vec![T::one() / T::lit(size as f64); size]),
            Self::Weights(w) => {
                if w.len() != size {
                    return Err(Error::InvalidDistribution(format!(
                        "expected {size} weights, found {}",
                        w.len()
                    )));
                }
                if w.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                    return Err(Error::InvalidDistribution("negative or non-finite weight".into()));
                }
                let sum: T = w.iter().copied().sum();
                if (sum - T::one()).abs() > crate::mdp::row_sum_tolerance::<T>() {
                    return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
                }
                Ok(w.clone())
            }
        }
    }
}

/// A model over a feature subset together with the projection that produced
/// it.
#[derive(Debug, Clone)]
pub struct PartialModel<T> {
    pub model: TabularModel<T>,
    pub projection: Projection,
    /// True when marginalized dynamics and rewards do not depend on the
    /// omitted features.
    pub exact: bool,
    pub max_deviation: T,
}

impl<T> PartialModel<T> {
    pub fn subset(&self) -> &FeatureSubset {
        self.projection.subset()
    }
}

/// Scratch accumulator over projected states.
struct RowAccumulator<T> {
    dense: Vec<T>,
    touched: Vec<usize>,
}

impl<T: Scalar> RowAccumulator<T> {
    fn new(size: usize) -> Self {
        Self {
            dense: vec![T::zero(); size],
            touched: Vec::new(),
        }
    }

    #[inline]
    fn add(&mut self, s: usize, p: T) {
        if self.dense[s] == T::zero() {
            self.touched.push(s);
        }
        self.dense[s] = self.dense[s] + p;
    }

    fn drain(&mut self) -> Vec<(usize, T)> {
        self.touched.sort_unstable();
        self.touched.dedup();
        let out = self.touched.iter().map(|&s| (s, self.dense[s])).collect();
        for &s in &self.touched {
            self.dense[s] = T::zero();
        }
        self.touched.clear();
        out
    }
}

/// Marginalizes `full` onto `subset`:
/// `p_P(g,a,g') = Σ_h w(h) Σ_{h'} p((g,h),a,(g',h'))` and
/// `r_P(g,a) = Σ_h w(h) r((g,h),a)`.
///
/// A projected state is terminal when every parent state it covers is.
pub fn project_model<T: Scalar>(
    full: &TabularModel<T>,
    subset: &FeatureSubset,
    omitted_dist: &OmittedDistribution<T>,
) -> Result<PartialModel<T>> {
    let projection = Projection::for_model(full, subset)?;
    let h_count = projection.omitted_schema().size();
    let weights = omitted_dist.resolve(h_count)?;

    if subset.is_identity_for(full.schema()) {
        return Ok(PartialModel {
            model: full.clone(),
            projection,
            exact: true,
            max_deviation: T::zero(),
        });
    }

    let g_count = projection.projected_schema().size();
    let n_proj = projection.projected_state_count();
    let a_n = full.action_count();
    let mut transitions = Vec::with_capacity(n_proj * a_n);
    let mut rewards = Vec::with_capacity(n_proj * a_n);
    let mut terminal = Vec::with_capacity(n_proj);
    let mut marginal = RowAccumulator::new(n_proj);
    let mut single = RowAccumulator::new(n_proj);
    let mut max_dev = T::zero();

    for g in 0..g_count {
        let is_terminal = (0..h_count).all(|h| full.is_terminal(projection.join(g, h)));
        terminal.push(is_terminal);
        for a in 0..a_n {
            if is_terminal {
                transitions.push(TransitionRow::point_mass(n_proj, g));
                rewards.push(T::zero());
                continue;
            }
            let mut reward = T::zero();
            for (h, &w) in weights.iter().enumerate() {
                let s = projection.join(g, h);
                reward = reward + w * full.reward(s, a);
                for (next, p) in full.row(s, a).entries() {
                    marginal.add(projection.project_index(next), w * p);
                }
            }
            let row = marginal.drain();

            // deviation of each omitted assignment from the marginal
            for h in 0..h_count {
                let s = projection.join(g, h);
                max_dev = max_dev.max((full.reward(s, a) - reward).abs());
                for (next, p) in full.row(s, a).entries() {
                    single.add(projection.project_index(next), p);
                }
                let own = single.drain();
                max_dev = max_dev.max(row_deviation(&row, &own));
            }

            transitions.push(TransitionRow::from_entries(n_proj, row)?);
            rewards.push(reward);
        }
    }

    for i in 0..full.sentinels().len() {
        let s = full.schema().size() + i;
        let ps = g_count + i;
        terminal.push(full.is_terminal(s));
        for a in 0..a_n {
            if full.is_terminal(s) {
                transitions.push(TransitionRow::point_mass(n_proj, ps));
                rewards.push(T::zero());
                continue;
            }
            for (next, p) in full.row(s, a).entries() {
                marginal.add(projection.project_index(next), p);
            }
            transitions.push(TransitionRow::from_entries(n_proj, marginal.drain())?);
            rewards.push(full.reward(s, a));
        }
    }

    let model = TabularModel::new(ModelParts {
        schema: projection.projected_schema().clone(),
        sentinels: full.sentinels().to_vec(),
        action_count: a_n,
        transitions,
        rewards,
        discount: full.discount(),
        terminal,
        r_max: full.r_max(),
    })?;

    Ok(PartialModel {
        model,
        exact: max_dev <= T::lit(EXACTNESS_THRESHOLD),
        max_deviation: max_dev,
        projection,
    })
}

/// Max absolute difference between two sorted sparse rows.
fn row_deviation<T: Scalar>(a: &[(usize, T)], b: &[(usize, T)]) -> T {
    let (mut i, mut j) = (0, 0);
    let mut dev = T::zero();
    while i < a.len() || j < b.len() {
        let d = match (a.get(i), b.get(j)) {
            (Some(&(sa, pa)), Some(&(sb, pb))) if sa == sb => {
                i += 1;
                j += 1;
                (pa - pb).abs()
            }
            (Some(&(sa, pa)), Some(&(sb, _))) if sa < sb => {
                i += 1;
                pa.abs()
            }
            (Some(&(_, pa)), None) => {
                i += 1;
                pa.abs()
            }
            (_, Some(&(_, pb))) => {
                j += 1;
                pb.abs()
            }
            (None, None) => unreachable!(),
        };
        dev = dev.max(d);
    }
    dev
}

/// `π(f) = π_P(φ(f))` for every parent state.
pub fn lift_policy(pi_p: &Policy, projection: &Projection) -> Result<Policy> {
    if pi_p.len() != projection.projected_state_count() {
        return Err(Error::LengthMismatch {
            what: "projected policy",
            expected: projection.projected_state_count(),
            found: pi_p.len(),
        });
    }
    let actions: Vec<usize> = (0..projection.parent_state_count())
        .map(|s| pi_p.action(projection.project_index(s)))
        .collect();
    let action_bound = actions.iter().copied().max().map_or(1, |a| a + 1);
    Policy::new(actions, action_bound)
}

#[derive(Debug, Clone)]
pub struct ValueLossReport<T> {
    pub loss: T,
    /// State with the largest gap.
    pub witness: StateIndex,
    pub exact: bool,
    pub lifted_policy: Policy,
    pub lifted_values: ValueTable<T>,
}

/// Optimal values of a full model, computed once and shared across subsets.
///
/// `V*` is obtained by evaluating the value-iteration policy at tolerance
/// `tol·(1-γ)`, which puts it within `γ·tol` of the true optimum; lifted
/// policies are evaluated the same way, so a value-equivalent subset shows a
/// loss below `2·tol`.
#[derive(Debug, Clone)]
pub struct ValueLossContext<'a, T> {
    full: &'a TabularModel<T>,
    cfg: PlanningConfig<T>,
    plan: Plan<T>,
    optimal: ValueTable<T>,
}

impl<'a, T: Scalar> ValueLossContext<'a, T> {
    pub fn new(full: &'a TabularModel<T>, cfg: &PlanningConfig<T>) -> Result<Self> {
        let plan = value_iteration(full, cfg)?;
        let optimal = policy_evaluation(full, &plan.policy, evaluation_tol(full, cfg))?;
        Ok(Self {
            full,
            cfg: *cfg,
            plan,
            optimal,
        })
    }

    pub fn optimal_values(&self) -> &ValueTable<T> {
        &self.optimal
    }

    pub fn optimal_plan(&self) -> &Plan<T> {
        &self.plan
    }

    pub fn value_loss(&self, subset: &FeatureSubset) -> Result<ValueLossReport<T>> {
        self.value_loss_with(subset, &OmittedDistribution::Uniform)
    }

    pub fn value_loss_with(
        &self,
        subset: &FeatureSubset,
        omitted_dist: &OmittedDistribution<T>,
    ) -> Result<ValueLossReport<T>> {
        let partial = project_model(self.full, subset, omitted_dist)?;
        let plan = value_iteration(&partial.model, &self.cfg)?;
        let lifted = lift_policy(&plan.policy, &partial.projection)?;
        let lifted_values = policy_evaluation(self.full, &lifted, evaluation_tol(self.full, &self.cfg))?;
        let loss = inf_norm_diff(&self.optimal, &lifted_values)?;
        let (witness, _) = max_gap_state(&self.optimal, &lifted_values).unwrap_or((0, T::zero()));
        Ok(ValueLossReport {
            loss,
            witness,
            exact: partial.exact,
            lifted_policy: lifted,
            lifted_values,
        })
    }
}

fn evaluation_tol<T: Scalar>(m: &TabularModel<T>, cfg: &PlanningConfig<T>) -> T {
    let tol = cfg.tol * (T::one() - m.discount());
    tol.max(T::epsilon() * T::lit(16.0) * m.value_bound().max(T::one()))
}

/// `||V*_full - V^{lift(π_P)}_full||∞` where `π_P` is optimal in the uniform
/// marginalization of `full` onto `subset`.
pub fn value_loss<T: Scalar>(full: &TabularModel<T>, subset: &FeatureSubset, cfg: &PlanningConfig<T>) -> Result<T> {
    Ok(ValueLossContext::new(full, cfg)?.value_loss(subset)?.loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    pub value_equivalent: bool,
    pub loss: T,
    /// State maximizing the gap, when not value equivalent.
    pub witness: Option<StateIndex>,
}

fn certify_in<T: Scalar>(ctx: &ValueLossContext<'_, T>, subset: &FeatureSubset, tol: T) -> Result<Certificate<T>> {
    let report = ctx.value_loss(subset)?;
    let ve = report.loss <= tol;
    Ok(Certificate {
        value_equivalent: ve,
        loss: report.loss,
        witness: (!ve).then_some(report.witness),
    })
}

fn certification_cfg<T: Scalar>(tol: T) -> PlanningConfig<T> {
    PlanningConfig::with_tol(tol / T::lit(2.0))
}

/// Value equivalence of the partial model on `subset`: its optimal policy,
/// lifted and evaluated in `full`, loses at most `tol`.
pub fn certify_value_equivalence<T: Scalar>(
    full: &TabularModel<T>,
    subset: &FeatureSubset,
    tol: T,
) -> Result<Certificate<T>> {
    let ctx = ValueLossContext::new(full, &certification_cfg(tol))?;
    certify_in(&ctx, subset, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityReport<T> {
    pub certificate: Certificate<T>,
    /// Certificate for the subset with each kept feature removed in turn.
    pub reductions: Vec<(String, Certificate<T>)>,
    /// Value equivalent, and no single-feature removal is.
    pub minimal: bool,
}

/// Value equivalence plus the one-step downward minimality check.
pub fn certify_minimal<T: Scalar>(
    full: &TabularModel<T>,
    subset: &FeatureSubset,
    tol: T,
) -> Result<MinimalityReport<T>> {
    let ctx = ValueLossContext::new(full, &certification_cfg(tol))?;
    let certificate = certify_in(&ctx, subset, tol)?;
    let mut reductions = Vec::new();
    for name in subset.kept() {
        if let Some(smaller) = subset.without(name) {
            reductions.push((name.clone(), certify_in(&ctx, &smaller, tol)?));
        }
    }
    let minimal = certificate.value_equivalent && reductions.iter().all(|(_, c)| !c.value_equivalent);
    Ok(MinimalityReport {
        certificate,
        reductions,
        minimal,
    })
}
