//! Accuracy oracle: predicts the accuracy of a compressed network from tabulated
//! per-(layer, group) losses instead of running inference.
//!
//! Stacked losses are composed in plan order with a geometric discount
//! `A = base - sum_k loss_k * (1 - gamma)^(k-1)`, clamped to `[0, 1]`. Exact
//! whole-plan measurements, when present, override the composed estimate.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::NetworkSpec;
use crate::encoding::{decode, encode, Assignment, CompressionPlan, PlanEncoding};
use crate::error::{Error, Result};
use crate::operators::{apply_group, kept_param_fraction, OperatorCatalog, OperatorGroup};

pub const DEFAULT_INTERACTION_COEFF: f64 = 0.5;
const MIN_LOSS: f64 = -0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerImportance {
    pub importance: f64,
    pub noise_magnitude: f64,
}

/// Per-layer importance and channel noise magnitude. More important layers get
/// less mutation noise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImportanceRanking {
    per_layer: BTreeMap<usize, LayerImportance>,
}

impl ImportanceRanking {
    pub fn new(per_layer: BTreeMap<usize, LayerImportance>) -> Result<Self> {
        for (layer, li) in &per_layer {
            if !(li.importance.is_finite() && li.importance >= 0.0) {
                return Err(Error::InvalidValue(format!("layer {layer}: importance must be non-negative")));
            }
            if !(li.noise_magnitude.is_finite() && li.noise_magnitude >= 0.0) {
                return Err(Error::InvalidValue(format!(
                    "layer {layer}: noise magnitude must be finite and non-negative"
                )));
            }
        }
        Ok(ImportanceRanking { per_layer })
    }

    pub fn get(&self, layer: usize) -> Option<LayerImportance> {
        self.per_layer.get(&layer).copied()
    }

    /// Noise magnitude for `layer`; layers without an entry get 1.0.
    pub fn noise_magnitude(&self, layer: usize) -> f64 {
        self.per_layer.get(&layer).map_or(1.0, |l| l.noise_magnitude)
    }

    /// Layers by decreasing importance, ties broken by lower layer index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut layers: Vec<(usize, f64)> = self.per_layer.iter().map(|(&l, v)| (l, v.importance)).collect();
        layers.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        layers.into_iter().map(|(l, _)| l).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, LayerImportance)> + '_ {
        self.per_layer.iter().map(|(&l, &v)| (l, v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyProfile {
    backbone_name: String,
    base_accuracy: f64,
    interaction_coeff: f64,
    default_loss: Option<f64>,
    entries: HashMap<(usize, usize), f64>,
    samples: HashMap<Vec<Assignment>, f64>,
    importance: ImportanceRanking,
}

impl AccuracyProfile {
    pub fn new(backbone_name: impl Into<String>, base_accuracy: f64, interaction_coeff: f64) -> Result<Self> {
        if !(base_accuracy > 0.0 && base_accuracy <= 1.0) {
            return Err(Error::InvalidValue(format!("base_accuracy {base_accuracy} outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&interaction_coeff) {
            return Err(Error::InvalidValue(format!(
                "interaction_coeff {interaction_coeff} outside [0, 1]"
            )));
        }
        Ok(AccuracyProfile {
            backbone_name: backbone_name.into(),
            base_accuracy,
            interaction_coeff,
            default_loss: None,
            entries: HashMap::new(),
            samples: HashMap::new(),
            importance: ImportanceRanking::default(),
        })
    }

    pub fn backbone_name(&self) -> &str {
        &self.backbone_name
    }

    pub fn base_accuracy(&self) -> f64 {
        self.base_accuracy
    }

    pub fn interaction_coeff(&self) -> f64 {
        self.interaction_coeff
    }

    pub fn importance(&self) -> &ImportanceRanking {
        &self.importance
    }

    pub fn loss(&self, layer: usize, group_id: usize) -> Option<f64> {
        if group_id == 0 {
            return Some(0.0);
        }
        self.entries.get(&(layer, group_id)).copied().or(self.default_loss)
    }

    pub fn set_loss(&mut self, layer: usize, group_id: usize, loss: f64) -> Result<()> {
        check_loss(loss)?;
        self.entries.insert((layer, group_id), loss);
        Ok(())
    }

    pub fn set_default_loss(&mut self, loss: Option<f64>) -> Result<()> {
        if let Some(l) = loss {
            check_loss(l)?;
        }
        self.default_loss = loss;
        Ok(())
    }

    pub fn add_sample(&mut self, plan: &CompressionPlan, accuracy: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::InvalidValue(format!("sample accuracy {accuracy} outside [0, 1]")));
        }
        self.samples.insert(plan.assignments().to_vec(), accuracy);
        Ok(())
    }

    pub fn set_importance(&mut self, importance: ImportanceRanking) {
        self.importance = importance;
    }

    /// Predicted accuracy of the backbone with `plan` applied.
    pub fn predict(&self, plan: &CompressionPlan) -> Result<f64> {
        if let Some(&a) = self.samples.get(plan.assignments()) {
            return Ok(a);
        }
        let keep = 1.0 - self.interaction_coeff;
        let mut discount = 1.0;
        let mut total = 0.0;
        for a in plan.assignments() {
            let loss = self.loss(a.layer, a.group_id).ok_or(Error::ProfileIncomplete {
                layer: a.layer,
                group: a.group_id,
            })?;
            total += loss * discount;
            discount *= keep;
        }
        Ok((self.base_accuracy - total).clamp(0.0, 1.0))
    }

    /// Checks that every group applicable to every compressible layer of `net`
    /// has a loss entry (or that a default covers it).
    pub fn validate_for(&self, net: &NetworkSpec, catalog: &OperatorCatalog) -> Result<()> {
        if self.backbone_name != net.name {
            return Err(Error::InvalidValue(format!(
                "profile is for backbone {:?}, not {:?}",
                self.backbone_name, net.name
            )));
        }
        if self.default_loss.is_some() {
            return Ok(());
        }
        for layer in net.compressible_indices() {
            for group in catalog.groups() {
                if apply_group(net, layer, group).is_ok() && !self.entries.contains_key(&(layer, group.id)) {
                    return Err(Error::ProfileIncomplete {
                        layer,
                        group: group.id,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProfileDocument = serde_json::from_str(text)?;
        doc.into_profile()
    }

    pub fn to_json(&self) -> String {
        let mut entries: Vec<EntryRecord> = self
            .entries
            .iter()
            .map(|(&(layer, group_id), &loss)| EntryRecord { layer, group_id, loss })
            .collect();
        entries.sort_by_key(|e| (e.layer, e.group_id));
        let mut samples: Vec<SampleRecord> = self
            .samples
            .iter()
            .map(|(assignments, &accuracy)| {
                let plan = CompressionPlan::new(assignments.clone()).expect("stored plans are valid");
                SampleRecord {
                    encoding: encode(&plan).to_string(),
                    accuracy,
                    layers: Some(plan.layers()),
                }
            })
            .collect();
        samples.sort_by(|a, b| (&a.layers, &a.encoding).cmp(&(&b.layers, &b.encoding)));
        let doc = ProfileDocument {
            backbone_name: self.backbone_name.clone(),
            base_accuracy: self.base_accuracy,
            interaction_coeff: self.interaction_coeff,
            default_loss: self.default_loss,
            entries,
            whole_plan_samples: samples,
            compressed_layer_order: None,
            importance: self
                .importance
                .iter()
                .map(|(layer, li)| ImportanceRecord {
                    layer,
                    importance: li.importance,
                    noise_magnitude: li.noise_magnitude,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("profile serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        AccuracyProfile::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_loss(loss: f64) -> Result<()> {
    if !(MIN_LOSS..=1.0).contains(&loss) {
        return Err(Error::InvalidValue(format!("loss {loss} outside [{MIN_LOSS}, 1]")));
    }
    Ok(())
}

/// `predict_accuracy(plan, profile)`.
pub fn predict_accuracy(plan: &CompressionPlan, profile: &AccuracyProfile) -> Result<f64> {
    profile.predict(plan)
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    layer: usize,
    group_id: usize,
    loss: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    encoding: String,
    accuracy: f64,
    /// Layers the encoding's group digits refer to. Falls back to the
    /// document-level `compressed_layer_order`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct ImportanceRecord {
    layer: usize,
    importance: f64,
    noise_magnitude: f64,
}

#[derive(Serialize, Deserialize)]
struct ProfileDocument {
    backbone_name: String,
    base_accuracy: f64,
    #[serde(default = "default_gamma")]
    interaction_coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default_loss: Option<f64>,
    entries: Vec<EntryRecord>,
    #[serde(default)]
    whole_plan_samples: Vec<SampleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    compressed_layer_order: Option<Vec<usize>>,
    #[serde(default)]
    importance: Vec<ImportanceRecord>,
}

fn default_gamma() -> f64 {
    DEFAULT_INTERACTION_COEFF
}

impl ProfileDocument {
    fn into_profile(self) -> Result<AccuracyProfile> {
        let mut profile = AccuracyProfile::new(self.backbone_name, self.base_accuracy, self.interaction_coeff)?;
        profile.set_default_loss(self.default_loss)?;
        for e in self.entries {
            if e.group_id == 0 {
                return Err(Error::InvalidValue(format!(
                    "layer {}: identity group cannot carry a loss entry",
                    e.layer
                )));
            }
            profile.set_loss(e.layer, e.group_id, e.loss)?;
        }
        for s in self.whole_plan_samples {
            let encoding: PlanEncoding = s.encoding.parse()?;
            let order = s.layers.as_ref().or(self.compressed_layer_order.as_ref()).ok_or_else(|| {
                Error::InvalidValue(format!(
                    "sample {:?} has no layers and the profile has no compressed_layer_order",
                    s.encoding
                ))
            })?;
            let plan = decode(&encoding, order, usize::MAX)?;
            profile.add_sample(&plan, s.accuracy)?;
        }
        let per_layer = self
            .importance
            .into_iter()
            .map(|r| {
                (
                    r.layer,
                    LayerImportance {
                        importance: r.importance,
                        noise_magnitude: r.noise_magnitude,
                    },
                )
            })
            .collect();
        profile.set_importance(ImportanceRanking::new(per_layer)?);
        Ok(profile)
    }
}

/// Parameters of the synthetic loss family
/// `loss = depth_scale * (a * (1 - kept) + b * coarse + U[0, noise_max])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticParams {
    pub a: f64,
    pub b: f64,
    pub noise_max: f64,
    /// Depth scale is `1 / (1 + depth_decay * conv_rank)`.
    pub depth_decay: f64,
    pub interaction_coeff: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            a: 0.04,
            b: 0.01,
            noise_max: 0.005,
            depth_decay: 0.25,
            interaction_coeff: DEFAULT_INTERACTION_COEFF,
        }
    }
}

/// Seeded synthetic profile with default parameters.
pub fn synthetic_profile(net: &NetworkSpec, catalog: &OperatorCatalog, seed: u64) -> Result<AccuracyProfile> {
    synthetic_profile_with(net, catalog, seed, &SyntheticParams::default())
}

pub fn synthetic_profile_with(
    net: &NetworkSpec,
    catalog: &OperatorCatalog,
    seed: u64,
    params: &SyntheticParams,
) -> Result<AccuracyProfile> {
    crate::arch::ensure_valid(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profile = AccuracyProfile::new(net.name.clone(), net.base_accuracy, params.interaction_coeff)?;
    let conv_rank: HashMap<usize, usize> = net.conv_indices().into_iter().enumerate().map(|(r, i)| (i, r)).collect();
    let scale = |layer: usize| 1.0 / (1.0 + params.depth_decay * conv_rank[&layer] as f64);

    let compressible = net.compressible_indices();
    let max_scale = compressible.iter().map(|&l| scale(l)).fold(0.0, f64::max);
    let mut per_layer = BTreeMap::new();
    for &layer in &compressible {
        let s = scale(layer);
        for group in catalog.groups() {
            let noise = rng.random::<f64>() * params.noise_max;
            let loss = s * (base_loss(net, layer, group, params) + noise);
            profile.set_loss(layer, group.id, loss.min(1.0))?;
        }
        let importance = s / max_scale;
        per_layer.insert(
            layer,
            LayerImportance {
                importance,
                noise_magnitude: 1.0 - 0.5 * importance,
            },
        );
    }
    profile.set_importance(ImportanceRanking::new(per_layer)?);
    Ok(profile)
}

fn base_loss(net: &NetworkSpec, layer: usize, group: &OperatorGroup, params: &SyntheticParams) -> f64 {
    // Groups that cannot apply to the backbone layer get the worst-case kept
    // fraction of zero; they only become reachable after an earlier layer's
    // channel count changes.
    let kept = kept_param_fraction(net, layer, group).unwrap_or(0.0).clamp(0.0, 1.0);
    let coarse = if group.coarse().is_some() { 1.0 } else { 0.0 };
    params.a * (1.0 - kept) + params.b * coarse
}
