//! Layer-by-layer Pareto search.
//!
//! Starting at `start_layer`, each compressible layer is visited once. Every
//! catalog group is appended to the fixed prefix and evaluated on the whole
//! model. Groups that apply and stay within the accuracy threshold form the
//! valid set. Its Pareto front over `(A_loss, E)` yields two picks, mutation
//! turns them into six candidates, and the lowest-scoring one is fixed as the
//! new prefix. The search stops as soon as latency, memory and accuracy
//! constraints all hold.

use std::time::Instant;

use super::mutation::{mutate, rng_for, MutationConfig};
use super::pareto::{pareto_front, pick_two};
use super::{backbone_candidate, cmp_keys, rank_key, Candidate, Evaluator, LayerStep, SearchInputs, SearchOutcome};
use crate::arch::{count_layers, LayerCost};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchBudget {
    /// Candidates evaluated after mutation at each layer.
    pub max_layer_evals: usize,
    /// First layer to visit; defaults to the second conv layer.
    pub start_layer: Option<usize>,
    /// Seconds; the search returns its current plan once exceeded.
    pub wall_clock_cap: Option<f64>,
    /// Keep only candidates that remove at least this layer's share of the
    /// latency and memory excess, when any such candidate exists.
    pub pacing: bool,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_layer_evals: 6,
            start_layer: None,
            wall_clock_cap: None,
            pacing: true,
        }
    }
}

impl SearchBudget {
    /// Plain layer-by-layer search: every valid candidate reaches the front.
    pub fn literal() -> Self {
        SearchBudget {
            pacing: false,
            ..SearchBudget::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_layer_evals == 0 {
            return Err(Error::InvalidValue("max_layer_evals must be positive".into()));
        }
        if let Some(cap) = self.wall_clock_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidValue("wall_clock_cap must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Part of the current excess over budget a candidate must remove at one
/// layer. Each remaining layer is assigned a share of the excess in
/// proportion to its size in the backbone: parameters for memory, MACs for
/// latency.
struct Pace {
    memory: f64,
    latency: f64,
}

impl Pace {
    fn new(inputs: &SearchInputs, current: &Candidate, sizes: &[LayerCost], layer: usize, remaining: &[usize]) -> Self {
        let share = |size: fn(&LayerCost) -> u64| {
            let total: u64 = remaining.iter().map(|&l| size(&sizes[l])).sum();
            if total == 0 {
                1.0 / remaining.len() as f64
            } else {
                size(&sizes[layer]) as f64 / total as f64
            }
        };
        let r = &current.report;
        let ctx = inputs.context;
        Pace {
            memory: (r.memory_bytes - ctx.s_budget).max(0.0) * share(|c| c.params),
            latency: (r.latency - ctx.t_budget).max(0.0) * share(|c| c.macs),
        }
    }

    fn met_by(&self, current: &Candidate, c: &Candidate) -> bool {
        let tol = 1e-12;
        current.report.memory_bytes - c.report.memory_bytes >= self.memory * (1.0 - tol)
            && current.report.latency - c.report.latency >= self.latency * (1.0 - tol)
    }
}

pub fn runtime3c(inputs: &SearchInputs, budget: &SearchBudget, mutation: &MutationConfig) -> Result<SearchOutcome> {
    let started = Instant::now();
    inputs.validate()?;
    budget.validate()?;
    mutation.validate()?;

    let mut ev = Evaluator::new(*inputs, true);
    let mut rng = rng_for(mutation);
    let mut current = backbone_candidate(&mut ev)?;
    let start = budget.start_layer.unwrap_or_else(|| inputs.default_start_layer());
    let layers: Vec<usize> = inputs
        .backbone
        .compressible_indices()
        .into_iter()
        .filter(|&l| l >= start)
        .collect();
    let sizes = count_layers(inputs.backbone)?.per_layer;
    let a_th = inputs.context.a_threshold;
    let importance = inputs.profile.importance();

    let mut trace = Vec::new();
    let mut feasible = inputs.violations(&current.report).is_empty();
    let mut visited = 0;

    for (pos, &layer) in layers.iter().enumerate() {
        if feasible {
            break;
        }
        if budget
            .wall_clock_cap
            .is_some_and(|cap| started.elapsed().as_secs_f64() > cap)
        {
            break;
        }
        visited += 1;

        let mut valid: Vec<Candidate> = Vec::new();
        for group in inputs.catalog.groups() {
            let Ok(plan) = current.plan.extended(layer, group.id) else {
                continue;
            };
            if let Some(c) = ev.eval(&plan) {
                if c.report.accuracy_loss <= a_th {
                    valid.push(c);
                }
            }
        }
        let pace = Pace::new(inputs, &current, &sizes, layer, &layers[pos..]);
        let paced = budget.pacing && valid.iter().any(|c| pace.met_by(&current, c));
        if paced {
            valid.retain(|c| pace.met_by(&current, c));
        }
        let mut step = LayerStep {
            layer,
            valid: valid.iter().map(|c| c.group_at(layer)).collect(),
            front: Vec::new(),
            picked: Vec::new(),
            candidates: Vec::new(),
            survivor: None,
        };
        if valid.is_empty() {
            trace.push(step);
            continue;
        }

        let points: Vec<(f64, f64)> = valid
            .iter()
            .map(|c| (c.report.accuracy_loss, c.report.energy_proxy))
            .collect();
        let front: Vec<&Candidate> = pareto_front(&points).into_iter().map(|i| &valid[i]).collect();
        let keys: Vec<_> = front.iter().map(|c| rank_key(inputs, c, layer)).collect();
        let (i, j) = pick_two(&keys)?;
        let picks = [front[i], front[j]];
        step.front = front.iter().map(|c| c.group_at(layer)).collect();
        step.picked = picks.iter().map(|c| c.group_at(layer)).collect();

        let plans = mutate(
            [&picks[0].plan, &picks[1].plan],
            layer,
            inputs.catalog,
            importance,
            mutation,
            &mut rng,
        );
        let mutants_per = mutation.mutants_per_candidate;
        let mut candidates: Vec<Candidate> = Vec::with_capacity(plans.len());
        for (k, plan) in plans.iter().enumerate().take(budget.max_layer_evals) {
            // Mutants that are not valid fall back to the pick they came from.
            let origin = if k < 2 { k } else { (k - 2) / mutants_per.max(1) };
            let fallback = picks[origin.min(1)];
            let c = match ev.eval(plan) {
                Some(c) if c.report.accuracy_loss <= a_th && (!paced || pace.met_by(&current, &c)) => c,
                _ => fallback.clone(),
            };
            candidates.push(c);
        }
        step.candidates = candidates.iter().map(|c| c.group_at(layer)).collect();

        let survivor = candidates
            .into_iter()
            .map(|c| (rank_key(inputs, &c, layer), c))
            .min_by(|a, b| cmp_keys(&a.0, &b.0))
            .map(|(_, c)| c)
            .expect("at least the picks are candidates");
        step.survivor = Some(survivor.group_at(layer));
        trace.push(step);
        current = survivor;
        feasible = inputs.violations(&current.report).is_empty();
    }

    let violated = inputs.violations(&current.report);
    Ok(SearchOutcome {
        feasible: violated.is_empty(),
        violated,
        evaluations: ev.evaluations(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        layers_visited: visited,
        trace,
        best: current,
        encodings_enumerated: None,
    })
}
