//! Plan search: the layer-by-layer Pareto search, its mutation step, and the
//! exhaustive and greedy baselines used to judge it.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arch::{count_layers, ensure_valid, NetworkSpec};
use crate::context::ContextState;
use crate::costmodel::{objective_score, CostModelConfig, DeviceProfile, PerfReport};
use crate::encoding::{encode, CompressionPlan, PlanEncoding};
use crate::error::{Error, Result};
use crate::operators::{apply_assignments, OperatorCatalog};
use crate::oracle::AccuracyProfile;

pub mod baselines;
pub mod mutation;
pub mod pareto;
pub mod runtime3c;

pub use baselines::{exhaustive_rescale, exhaustive_search, greedy_search, DEFAULT_EXHAUSTIVE_CAP};
pub use mutation::{mutate, MutationConfig};
pub use pareto::{dominates, pareto_front, pareto_front_bruteforce, pick_two};
pub use runtime3c::{runtime3c, SearchBudget};

/// Everything a search needs besides its own tuning knobs.
#[derive(Clone, Copy)]
pub struct SearchInputs<'a> {
    pub backbone: &'a NetworkSpec,
    pub catalog: &'a OperatorCatalog,
    pub profile: &'a AccuracyProfile,
    pub device: &'a DeviceProfile,
    pub context: &'a ContextState,
    pub cost: CostModelConfig,
}

impl<'a> SearchInputs<'a> {
    pub fn new(
        backbone: &'a NetworkSpec,
        catalog: &'a OperatorCatalog,
        profile: &'a AccuracyProfile,
        device: &'a DeviceProfile,
        context: &'a ContextState,
    ) -> Self {
        SearchInputs {
            backbone,
            catalog,
            profile,
            device,
            context,
            cost: CostModelConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_valid(self.backbone)?;
        self.device.validate()?;
        self.cost.validate()?;
        self.profile.validate_for(self.backbone, self.catalog)?;
        self.context.validate_budgets()
    }

    pub fn score(&self, report: &PerfReport) -> f64 {
        objective_score(report, self.context.lambda1, self.context.lambda2, &self.cost)
    }

    pub fn violations(&self, report: &PerfReport) -> Vec<Constraint> {
        let ctx = self.context;
        let mut v = Vec::new();
        if report.latency > ctx.t_budget {
            v.push(Constraint::Latency);
        }
        if report.memory_bytes > ctx.s_budget {
            v.push(Constraint::Memory);
        }
        if report.accuracy_loss > ctx.a_threshold {
            v.push(Constraint::Accuracy);
        }
        v
    }

    /// Layer the progressive searches start from when none is given: the
    /// second conv layer, or the first if there is only one.
    pub(crate) fn default_start_layer(&self) -> usize {
        self.backbone
            .second_conv_index()
            .or_else(|| self.backbone.conv_indices().first().copied())
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `T > T_bgt`
    Latency,
    /// `S_p * bytes_per_param > S_bgt`
    Memory,
    /// `A_loss > A_threshold`
    Accuracy,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Latency => "latency",
            Constraint::Memory => "memory",
            Constraint::Accuracy => "accuracy",
        })
    }
}

/// A plan together with the network it produces and that network's metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub plan: CompressionPlan,
    pub network: NetworkSpec,
    pub report: PerfReport,
}

impl Candidate {
    /// Group assigned to `layer`, 0 if the layer is untouched.
    pub fn group_at(&self, layer: usize) -> usize {
        self.plan.group_at(layer).unwrap_or(0)
    }

    pub fn last_group(&self) -> usize {
        self.plan.assignments().last().map_or(0, |a| a.group_id)
    }
}

/// Builds candidates and counts whole-model evaluations. With caching on, a
/// plan seen before is returned without being counted again.
pub(crate) struct Evaluator<'a> {
    inputs: SearchInputs<'a>,
    cache: Option<HashMap<CompressionPlan, Option<Candidate>>>,
    evaluations: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(inputs: SearchInputs<'a>, cached: bool) -> Self {
        Evaluator {
            inputs,
            cache: cached.then(HashMap::new),
            evaluations: 0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// `None` when the plan cannot be applied or the profile has no entry for it.
    pub fn eval(&mut self, plan: &CompressionPlan) -> Option<Candidate> {
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(plan)) {
            return hit.clone();
        }
        let out = self.build(plan);
        if out.is_some() {
            self.evaluations += 1;
        }
        if let Some(cache) = self.cache.as_mut() {
            cache.insert(plan.clone(), out.clone());
        }
        out
    }

    fn build(&self, plan: &CompressionPlan) -> Option<Candidate> {
        let inputs = &self.inputs;
        let network = apply_assignments(inputs.backbone, plan.pairs(), inputs.catalog).ok()?;
        let accuracy = inputs.profile.predict(plan).ok()?;
        let cost = count_layers(&network).ok()?;
        let report = PerfReport::build(
            &cost,
            accuracy,
            inputs.profile.base_accuracy(),
            inputs.device,
            &inputs.cost,
        )
        .ok()?;
        Some(Candidate {
            plan: plan.clone(),
            network,
            report,
        })
    }
}

/// What one visited layer of a progressive search did, by group id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerStep {
    pub layer: usize,
    pub valid: Vec<usize>,
    pub front: Vec<usize>,
    pub picked: Vec<usize>,
    pub candidates: Vec<usize>,
    /// `None` when no group was valid and the layer was left as is.
    pub survivor: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: Candidate,
    pub feasible: bool,
    pub violated: Vec<Constraint>,
    pub evaluations: usize,
    pub wall_time_seconds: f64,
    pub layers_visited: usize,
    pub trace: Vec<LayerStep>,
    /// Size of the fixed-width encoding space covered (exhaustive only).
    pub encodings_enumerated: Option<u128>,
}

impl SearchOutcome {
    pub fn plan(&self) -> &CompressionPlan {
        &self.best.plan
    }

    pub fn report(&self) -> &PerfReport {
        &self.best.report
    }

    pub fn encoding(&self) -> PlanEncoding {
        encode(&self.best.plan)
    }

    pub fn to_record(&self, optimizer: &str, catalog: &OperatorCatalog) -> SearchResultRecord {
        SearchResultRecord {
            optimizer: optimizer.to_string(),
            encoding: self.encoding().to_string(),
            plan: self
                .best
                .plan
                .assignments()
                .iter()
                .map(|a| PlanEntry {
                    layer: a.layer,
                    group_id: a.group_id,
                    label: catalog.get(a.group_id).map(|g| g.label.clone()).unwrap_or_default(),
                })
                .collect(),
            report: self.best.report.clone(),
            evaluations: self.evaluations,
            wall_time_seconds: self.wall_time_seconds,
            feasible: self.feasible,
            violated: self.violated.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub layer: usize,
    pub group_id: usize,
    pub label: String,
}

/// JSON form of a search result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResultRecord {
    pub optimizer: String,
    pub encoding: String,
    pub plan: Vec<PlanEntry>,
    pub report: PerfReport,
    pub evaluations: usize,
    pub wall_time_seconds: f64,
    pub feasible: bool,
    pub violated: Vec<Constraint>,
}

impl SearchResultRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Ordering used wherever a single candidate must be chosen: score, then
/// accuracy loss, then the group at `layer`.
pub(crate) fn rank_key(inputs: &SearchInputs, c: &Candidate, layer: usize) -> (f64, f64, usize) {
    (inputs.score(&c.report), c.report.accuracy_loss, c.group_at(layer))
}

pub(crate) fn cmp_keys(a: &(f64, f64, usize), b: &(f64, f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
}

pub(crate) fn backbone_candidate(ev: &mut Evaluator) -> Result<Candidate> {
    ev.eval(&CompressionPlan::empty())
        .ok_or_else(|| Error::InvalidValue("backbone cannot be evaluated".into()))
}
