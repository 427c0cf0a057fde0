//! Candidate mutation: two picks become six by perturbing the channel keep
//! ratio of the group at the current layer.
//!
//! Noise scales with the layer's channel noise magnitude, so important layers
//! move less. The perturbed ratio snaps to the nearest catalog group that
//! differs only in its ratio, which keeps every mutant expressible as a group
//! id with a profile entry.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::encoding::CompressionPlan;
use crate::error::{Error, Result};
use crate::operators::OperatorCatalog;
use crate::oracle::ImportanceRanking;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MutationConfig {
    pub mutants_per_candidate: usize,
    pub ratio_sigma_base: f64,
    pub ratio_bounds: (f64, f64),
    pub seed: u64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            mutants_per_candidate: 2,
            ratio_sigma_base: 0.2,
            ratio_bounds: (0.1, 1.0),
            seed: 0,
        }
    }
}

impl MutationConfig {
    pub fn with_seed(seed: u64) -> Self {
        MutationConfig {
            seed,
            ..MutationConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ratio_bounds;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidValue(format!("ratio bounds ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1")));
        }
        if !(self.ratio_sigma_base >= 0.0 && self.ratio_sigma_base.is_finite()) {
            return Err(Error::InvalidValue("ratio_sigma_base must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// `clamp(ratio + noise, bounds)`.
pub fn perturb_ratio(ratio: f64, noise: f64, bounds: (f64, f64)) -> f64 {
    (ratio + noise).clamp(bounds.0, bounds.1)
}

/// Sibling whose ratio is closest to `ratio`; ties go to the lower ratio.
/// `siblings` must be sorted by ratio.
pub fn snap_to_sibling(ratio: f64, siblings: &[(usize, f64)]) -> Option<usize> {
    siblings
        .iter()
        .min_by(|a, b| (a.1 - ratio).abs().total_cmp(&(b.1 - ratio).abs()))
        .map(|&(id, _)| id)
}

/// Group a mutant of `group_id` at `layer` switches to.
fn mutant_group(
    group_id: usize,
    layer: usize,
    catalog: &OperatorCatalog,
    importance: &ImportanceRanking,
    config: &MutationConfig,
    rng: &mut ChaCha8Rng,
) -> usize {
    let Some(group) = catalog.get(group_id) else {
        return group_id;
    };
    let siblings = catalog.ratio_siblings(group_id);
    if group.has_channel_scale() {
        let ratio = group.keep_ratio().expect("channel scale implies a ratio");
        let sigma = config.ratio_sigma_base * importance.noise_magnitude(layer);
        let noise = match Normal::new(0.0, sigma) {
            Ok(dist) if sigma > 0.0 => dist.sample(rng),
            _ => 0.0,
        };
        let target = perturb_ratio(ratio, noise, config.ratio_bounds);
        return snap_to_sibling(target, &siblings).unwrap_or(group_id);
    }
    // No channel scaling to perturb: step to the neighbouring ratio variant.
    match siblings.iter().position(|&(id, _)| id == group_id) {
        Some(pos) if siblings.len() > 1 => {
            let next = if pos > 0 { pos - 1 } else { pos + 1 };
            siblings[next].0
        }
        _ => group_id,
    }
}

/// Returns the originals followed by `mutants_per_candidate` mutants of each,
/// mutating only the group assigned to `layer`.
pub fn mutate(
    originals: [&CompressionPlan; 2],
    layer: usize,
    catalog: &OperatorCatalog,
    importance: &ImportanceRanking,
    config: &MutationConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<CompressionPlan> {
    let mut out: Vec<CompressionPlan> = originals.iter().map(|p| (*p).clone()).collect();
    for plan in originals {
        let Some(group_id) = plan.group_at(layer) else {
            out.extend(std::iter::repeat_n(plan.clone(), config.mutants_per_candidate));
            continue;
        };
        for _ in 0..config.mutants_per_candidate {
            let g = mutant_group(group_id, layer, catalog, importance, config, rng);
            out.push(plan.with_group(layer, g).unwrap_or_else(|_| plan.clone()));
        }
    }
    out
}

/// Fresh generator for a run.
pub fn rng_for(config: &MutationConfig) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(config.seed)
}
