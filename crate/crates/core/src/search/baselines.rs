//! Reference optimizers: full enumeration, ratio-only enumeration around a
//! given plan, and a layer-local greedy pass.

use std::time::Instant;

use super::{backbone_candidate, Candidate, Evaluator, LayerStep, SearchInputs, SearchOutcome};
use crate::costmodel::norm;
use crate::encoding::{search_space_sizes, Assignment, CompressionPlan};
use crate::error::{Error, Result};

/// Largest fixed-width encoding space the exhaustive search will enumerate.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Tracks the best feasible plan and, failing that, the least-violating one.
struct Best {
    feasible: Option<(f64, f64, usize, Candidate)>,
    fallback: Option<(usize, f64, usize, Candidate)>,
}

impl Best {
    fn new() -> Self {
        Best {
            feasible: None,
            fallback: None,
        }
    }

    fn offer(&mut self, inputs: &SearchInputs, idx: usize, c: Candidate) {
        let score = inputs.score(&c.report);
        let violations = inputs.violations(&c.report).len();
        if violations == 0 {
            let better = match &self.feasible {
                None => true,
                Some((s, a, _, _)) => score.total_cmp(s).then(c.report.accuracy_loss.total_cmp(a)).is_lt(),
            };
            if better {
                self.feasible = Some((score, c.report.accuracy_loss, idx, c));
            }
        } else if self.feasible.is_none() {
            let better = match &self.fallback {
                None => true,
                Some((v, s, _, _)) => violations.cmp(v).then(score.total_cmp(s)).is_lt(),
            };
            if better {
                self.fallback = Some((violations, score, idx, c));
            }
        }
    }

    fn finish(self) -> Option<Candidate> {
        self.feasible.map(|f| f.3).or(self.fallback.map(|f| f.3))
    }
}

fn outcome(
    inputs: &SearchInputs,
    best: Candidate,
    evaluations: usize,
    started: Instant,
    layers_visited: usize,
    trace: Vec<LayerStep>,
    encodings: Option<u128>,
) -> SearchOutcome {
    let violated = inputs.violations(&best.report);
    SearchOutcome {
        feasible: violated.is_empty(),
        violated,
        evaluations,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        layers_visited,
        trace,
        best,
        encodings_enumerated: encodings,
    }
}

/// Enumerates every product of per-layer choices; `choices[i]` lists group ids
/// for `layers[i]`, with 0 meaning untouched.
fn enumerate(inputs: &SearchInputs, layers: &[usize], choices: &[Vec<usize>]) -> (Option<Candidate>, usize) {
    let mut ev = Evaluator::new(*inputs, false);
    let mut best = Best::new();
    let mut digits = vec![0usize; layers.len()];
    let mut idx = 0;
    loop {
        let assignments: Vec<Assignment> = layers
            .iter()
            .zip(&digits)
            .zip(choices)
            .map(|((&l, &d), options)| Assignment::new(l, options[d]))
            .filter(|a| a.group_id != 0)
            .collect();
        if let Ok(plan) = CompressionPlan::new(assignments) {
            if let Some(c) = ev.eval(&plan) {
                best.offer(inputs, idx, c);
            }
        }
        idx += 1;
        // odometer increment, last layer fastest
        let mut pos = layers.len();
        loop {
            if pos == 0 {
                return (best.finish(), ev.evaluations());
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < choices[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Global optimum of the objective among plans that satisfy all constraints,
/// over every compressible layer and every catalog group. Refuses when the
/// fixed-width encoding space `2^N * M^N` exceeds `cap`.
pub fn exhaustive_search(inputs: &SearchInputs, cap: u128) -> Result<SearchOutcome> {
    let started = Instant::now();
    inputs.validate()?;
    let layers = inputs.backbone.compressible_indices();
    let m = inputs.catalog.len();
    let classic = search_space_sizes(layers.len() as u32, m as u64).classic;
    if classic > cap {
        return Err(Error::CapExceeded { count: classic, cap });
    }
    let all: Vec<usize> = (0..=m).collect();
    let choices = vec![all; layers.len()];
    let (best, evaluations) = enumerate(inputs, &layers, &choices);
    let best = best.ok_or_else(|| Error::InvalidValue("backbone cannot be evaluated".into()))?;
    Ok(outcome(inputs, best, evaluations, started, layers.len(), Vec::new(), Some(classic)))
}

/// Keeps the operator kinds of `base` and sweeps only the catalog's keep-ratio
/// variants at each of its layers.
pub fn exhaustive_rescale(inputs: &SearchInputs, base: &CompressionPlan, cap: u128) -> Result<SearchOutcome> {
    let started = Instant::now();
    inputs.validate()?;
    let layers = base.layers();
    let choices: Vec<Vec<usize>> = base
        .assignments()
        .iter()
        .map(|a| {
            let sib = inputs.catalog.ratio_siblings(a.group_id);
            if sib.len() <= 1 {
                vec![a.group_id]
            } else {
                sib.into_iter().map(|(id, _)| id).collect()
            }
        })
        .collect();
    let count = choices.iter().map(|c| c.len() as u128).product::<u128>();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    if layers.is_empty() {
        let mut ev = Evaluator::new(*inputs, false);
        let c = backbone_candidate(&mut ev)?;
        return Ok(outcome(inputs, c, ev.evaluations(), started, 0, Vec::new(), Some(1)));
    }
    let (best, evaluations) = enumerate(inputs, &layers, &choices);
    let best = best.ok_or_else(|| Error::InvalidValue("no variant of the plan can be evaluated".into()))?;
    Ok(outcome(inputs, best, evaluations, started, layers.len(), Vec::new(), Some(count)))
}

/// Per layer, fixes the group minimizing `0.5 * norm(A_loss) + 0.5 * norm(S_p)`
/// among groups within the accuracy threshold, and stops once feasible.
pub fn greedy_search(inputs: &SearchInputs, start_layer: Option<usize>) -> Result<SearchOutcome> {
    let started = Instant::now();
    inputs.validate()?;
    let mut ev = Evaluator::new(*inputs, true);
    let mut current = backbone_candidate(&mut ev)?;
    let start = start_layer.unwrap_or_else(|| inputs.default_start_layer());
    let a_th = inputs.context.a_threshold;
    let cfg = &inputs.cost;
    let mut trace = Vec::new();
    let mut visited = 0;

    for layer in inputs.backbone.compressible_indices().into_iter().filter(|&l| l >= start) {
        if inputs.violations(&current.report).is_empty() {
            break;
        }
        visited += 1;
        let mut valid = Vec::new();
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
        let chosen = valid
            .iter()
            .map(|c| {
                let key = 0.5 * norm(c.report.accuracy_loss, cfg) + 0.5 * norm(c.report.params as f64, cfg);
                (key, c)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.group_at(layer).cmp(&b.1.group_at(layer))))
            .map(|(_, c)| c.clone());
        trace.push(LayerStep {
            layer,
            valid: valid.iter().map(|c| c.group_at(layer)).collect(),
            front: Vec::new(),
            picked: Vec::new(),
            candidates: Vec::new(),
            survivor: chosen.as_ref().map(|c| c.group_at(layer)),
        });
        if let Some(c) = chosen {
            current = c;
        }
    }
    Ok(outcome(inputs, current, ev.evaluations(), started, visited, trace, None))
}
