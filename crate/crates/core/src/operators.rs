//! Retraining-free compression operators as pure descriptor transformations,
//! and the catalog of operator groups the search chooses from.
//!
//! Four operator families are supported:
//!
//! - `delta1_fire`: replace a conv by a Fire block (1x1 squeeze, then a
//!   concatenated 1x1 / 3x3 expand).
//! - `delta2_lowrank`: factorize a conv into a rank-`r` conv with the original
//!   kernel followed by a 1x1 conv, with `r = max(1, floor(M / rank_divisor))`.
//! - `delta3_channel_scale`: keep `max(1, round(keep_ratio * N))` output
//!   channels and shrink the successor's input accordingly.
//! - `delta4_depth_skip`: drop `skip_depth` identity-compatible layers.
//!
//! A group pairs at most one coarse member (`delta1`/`delta2`) with at most one
//! fine member (`delta3`/`delta4`). The coarse member runs first and the fine
//! member is applied to the first layer the coarse member produced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::{LayerKind, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

/// Squeeze ratio used by the default Fire operator (SqueezeNet convention).
pub const DEFAULT_SQUEEZE_RATIO: f64 = 0.125;
/// Fraction of the expand channels produced by the 1x1 branch.
pub const DEFAULT_EXPAND_SPLIT: f64 = 0.5;
/// Kernel side of the Fire expand branch.
pub const FIRE_EXPAND_KERNEL: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "hyperparams")]
pub enum CompressionOperator {
    #[serde(rename = "delta1_fire")]
    Fire { squeeze_ratio: f64, expand_split: f64 },
    #[serde(rename = "delta2_lowrank")]
    LowRank { rank_divisor: u64 },
    #[serde(rename = "delta3_channel_scale")]
    ChannelScale { keep_ratio: f64 },
    #[serde(rename = "delta4_depth_skip")]
    DepthSkip { skip_depth: usize },
}

impl CompressionOperator {
    pub fn fire() -> Self {
        CompressionOperator::Fire {
            squeeze_ratio: DEFAULT_SQUEEZE_RATIO,
            expand_split: DEFAULT_EXPAND_SPLIT,
        }
    }

    pub fn lowrank(rank_divisor: u64) -> Self {
        CompressionOperator::LowRank { rank_divisor }
    }

    pub fn channel_scale(keep_ratio: f64) -> Self {
        CompressionOperator::ChannelScale { keep_ratio }
    }

    pub fn depth_skip(skip_depth: usize) -> Self {
        CompressionOperator::DepthSkip { skip_depth }
    }

    /// `delta1` and `delta2` are coarse-grained; `delta3` and `delta4` fine-grained.
    pub fn is_coarse(&self) -> bool {
        matches!(self, CompressionOperator::Fire { .. } | CompressionOperator::LowRank { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidValue(msg));
        match *self {
            CompressionOperator::Fire {
                squeeze_ratio,
                expand_split,
            } => {
                if !(squeeze_ratio > 0.0 && squeeze_ratio <= 1.0) {
                    return bad(format!("squeeze_ratio {squeeze_ratio} outside (0, 1]"));
                }
                if !(0.0..=1.0).contains(&expand_split) {
                    return bad(format!("expand_split {expand_split} outside [0, 1]"));
                }
            }
            CompressionOperator::LowRank { rank_divisor } => {
                if rank_divisor == 0 {
                    return bad("rank_divisor must be at least 1".into());
                }
            }
            CompressionOperator::ChannelScale { keep_ratio } => {
                if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
                    return bad(format!("keep_ratio {keep_ratio} outside (0, 1]"));
                }
            }
            CompressionOperator::DepthSkip { skip_depth } => {
                if skip_depth == 0 {
                    return bad("skip_depth must be at least 1".into());
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match *self {
            CompressionOperator::Fire { .. } => "δ1".to_string(),
            CompressionOperator::LowRank { rank_divisor } => format!("δ2({rank_divisor})"),
            CompressionOperator::ChannelScale { keep_ratio } => {
                format!("δ3({}%)", trim_float(keep_ratio * 100.0))
            }
            CompressionOperator::DepthSkip { skip_depth } => format!("δ4({skip_depth})"),
        }
    }
}

fn trim_float(x: f64) -> String {
    let rounded = (x * 100.0).round() / 100.0;
    let mut s = format!("{rounded:.2}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

/// Round half up, with a floor of one channel.
pub fn round_channels(x: f64) -> u64 {
    ((x + 0.5 + 1e-9).floor() as u64).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorGroup {
    pub id: usize,
    pub label: String,
    pub members: Vec<CompressionOperator>,
}

impl OperatorGroup {
    pub fn new(id: usize, members: Vec<CompressionOperator>) -> Self {
        let label = if members.is_empty() {
            "identity".to_string()
        } else {
            members.iter().map(|m| m.label()).collect::<Vec<_>>().join("+")
        };
        OperatorGroup { id, label, members }
    }

    pub fn identity() -> Self {
        OperatorGroup::new(0, Vec::new())
    }

    pub fn is_identity(&self) -> bool {
        self.members.is_empty()
    }

    pub fn coarse(&self) -> Option<&CompressionOperator> {
        self.members.iter().find(|m| m.is_coarse())
    }

    pub fn fine(&self) -> Option<&CompressionOperator> {
        self.members.iter().find(|m| !m.is_coarse())
    }

    /// Effective channel keep ratio for groups whose fine member is absent or
    /// a channel scale; `None` for depth-skip groups.
    pub fn keep_ratio(&self) -> Option<f64> {
        match self.fine() {
            None => Some(1.0),
            Some(CompressionOperator::ChannelScale { keep_ratio }) => Some(*keep_ratio),
            Some(_) => None,
        }
    }

    pub fn has_channel_scale(&self) -> bool {
        matches!(self.fine(), Some(CompressionOperator::ChannelScale { .. }))
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.len() > 2 {
            return Err(Error::InvalidValue(format!(
                "group {} has {} members, at most 2 allowed",
                self.id,
                self.members.len()
            )));
        }
        let coarse = self.members.iter().filter(|m| m.is_coarse()).count();
        if coarse > 1 || self.members.len() - coarse > 1 {
            return Err(Error::InvalidValue(format!(
                "group {} needs at most one coarse and one fine member",
                self.id
            )));
        }
        self.members.iter().try_for_each(|m| m.validate())
    }
}

/// Ordered operator groups with dense ids `1..=M`; id 0 is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorCatalog {
    groups: Vec<OperatorGroup>,
}

impl OperatorCatalog {
    /// Builds a catalog from non-identity groups; ids must be dense `1..=M`.
    pub fn new(mut groups: Vec<OperatorGroup>) -> Result<Self> {
        groups.sort_by_key(|g| g.id);
        for (i, g) in groups.iter().enumerate() {
            if g.id != i + 1 {
                return Err(Error::InvalidValue(format!(
                    "catalog ids must be dense 1..M, found {} at position {}",
                    g.id,
                    i + 1
                )));
            }
            if g.is_identity() {
                return Err(Error::InvalidValue(format!("group {} has no members", g.id)));
            }
            g.validate()?;
        }
        let mut all = Vec::with_capacity(groups.len() + 1);
        all.push(OperatorGroup::identity());
        all.extend(groups);
        Ok(OperatorCatalog { groups: all })
    }

    /// Catalog with only the identity group.
    pub fn identity_only() -> Self {
        OperatorCatalog {
            groups: vec![OperatorGroup::identity()],
        }
    }

    /// Number of non-identity groups (M).
    pub fn len(&self) -> usize {
        self.groups.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: usize) -> Option<&OperatorGroup> {
        self.groups.get(id)
    }

    /// Non-identity groups in id order.
    pub fn groups(&self) -> &[OperatorGroup] {
        &self.groups[1..]
    }

    pub fn by_label(&self, label: &str) -> Option<&OperatorGroup> {
        self.groups.iter().find(|g| g.label == label)
    }

    /// Groups that differ from `id` only in their channel keep ratio, as
    /// `(id, ratio)` sorted by ratio (ties by id). Includes `id` itself.
    pub fn ratio_siblings(&self, id: usize) -> Vec<(usize, f64)> {
        let Some(group) = self.get(id) else {
            return Vec::new();
        };
        if group.keep_ratio().is_none() {
            return vec![(id, f64::NAN)];
        }
        let coarse = group.coarse();
        let mut out: Vec<(usize, f64)> = self
            .groups()
            .iter()
            .filter(|g| g.coarse() == coarse)
            .filter_map(|g| g.keep_ratio().map(|r| (g.id, r)))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let groups: Vec<OperatorGroup> = serde_json::from_str(text)?;
        OperatorCatalog::new(groups)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self.groups()).expect("catalog serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        OperatorCatalog::from_json(&std::fs::read_to_string(path)?)
    }
}

/// The nine groups used by default: each coarse operator alone, channel
/// scaling at 50% and 75%, a one-layer skip, and three coarse+fine pairs.
pub fn default_catalog() -> OperatorCatalog {
    use CompressionOperator as Op;
    let members = vec![
        vec![Op::fire()],
        vec![Op::lowrank(12)],
        vec![Op::lowrank(6)],
        vec![Op::channel_scale(0.5)],
        vec![Op::channel_scale(0.75)],
        vec![Op::depth_skip(1)],
        vec![Op::fire(), Op::channel_scale(0.5)],
        vec![Op::lowrank(12), Op::depth_skip(1)],
        vec![Op::lowrank(12), Op::channel_scale(0.65)],
    ];
    let groups = members
        .into_iter()
        .enumerate()
        .map(|(i, m)| OperatorGroup::new(i + 1, m))
        .collect();
    OperatorCatalog::new(groups).expect("default catalog is valid")
}

/// Layers `[start, start + removed)` of the input were replaced by `inserted` layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Splice {
    pub start: usize,
    pub removed: usize,
    pub inserted: usize,
}

impl Splice {
    const NONE: Splice = Splice {
        start: 0,
        removed: 0,
        inserted: 0,
    };

    /// Combine `self` with a later splice `next` whose start lies inside the
    /// region `self` produced.
    fn then(self, next: Splice) -> Splice {
        let produced_end = self.start + self.inserted;
        let next_end = next.start + next.removed;
        let kept_prefix = next.start - self.start;
        Splice {
            start: self.start,
            removed: self.removed + next_end.saturating_sub(produced_end),
            inserted: kept_prefix + next.inserted + produced_end.saturating_sub(next_end),
        }
    }

    /// New position of a layer that sat at `pos` before the splice.
    pub fn map(&self, pos: usize) -> Option<usize> {
        if pos < self.start {
            Some(pos)
        } else if pos < self.start + self.removed {
            None
        } else {
            Some(pos + self.inserted - self.removed)
        }
    }
}

fn target(net: &NetworkSpec, index: usize) -> Result<&LayerSpec> {
    let layer = net.layers.get(index).ok_or_else(|| Error::InvalidOperator {
        layer: index,
        reason: format!("network has only {} layers", net.layers.len()),
    })?;
    if !layer.is_conv() || !layer.compressible {
        return Err(Error::InvalidOperator {
            layer: index,
            reason: "layer is not a compressible conv".into(),
        });
    }
    Ok(layer)
}

fn replace(net: &NetworkSpec, index: usize, removed: usize, with: Vec<LayerSpec>) -> NetworkSpec {
    let mut out = net.clone();
    out.layers.splice(index..index + removed, with);
    out.renumber();
    out
}

fn fire(net: &NetworkSpec, index: usize, squeeze_ratio: f64, expand_split: f64) -> Result<(NetworkSpec, Splice)> {
    CompressionOperator::Fire {
        squeeze_ratio,
        expand_split,
    }
    .validate()?;
    let layer = target(net, index)?;
    let n = layer.out_channels;
    if n < 2 {
        return Err(Error::InvalidOperator {
            layer: index,
            reason: "Fire needs at least 2 output channels".into(),
        });
    }
    let squeeze = ((squeeze_ratio * n as f64 + 0.5 + 1e-9).floor() as u64).min(n);
    if squeeze == 0 {
        return Err(Error::InvalidOperator {
            layer: index,
            reason: "squeeze width rounds to 0".into(),
        });
    }
    let e1 = ((expand_split * n as f64 + 0.5 + 1e-9).floor() as u64).min(n);
    let squeeze_layer = LayerSpec {
        index: 0,
        kind: LayerKind::Conv,
        in_channels: layer.in_channels,
        out_channels: squeeze,
        kernel: 1,
        out_spatial: layer.out_spatial,
        stride: layer.stride,
        compressible: true,
        expand_1x1: None,
    };
    let expand_layer = LayerSpec {
        index: 0,
        kind: LayerKind::FireExpand,
        in_channels: squeeze,
        out_channels: n,
        kernel: FIRE_EXPAND_KERNEL,
        out_spatial: layer.out_spatial,
        stride: 1,
        compressible: false,
        expand_1x1: Some(e1),
    };
    let out = replace(net, index, 1, vec![squeeze_layer, expand_layer]);
    Ok((
        out,
        Splice {
            start: index,
            removed: 1,
            inserted: 2,
        },
    ))
}

fn lowrank(net: &NetworkSpec, index: usize, rank_divisor: u64) -> Result<(NetworkSpec, Splice)> {
    CompressionOperator::LowRank { rank_divisor }.validate()?;
    let layer = target(net, index)?;
    let rank = (layer.in_channels / rank_divisor).max(1);
    let reduce = LayerSpec {
        out_channels: rank,
        ..layer.clone()
    };
    let restore = LayerSpec {
        index: 0,
        kind: LayerKind::Conv,
        in_channels: rank,
        out_channels: layer.out_channels,
        kernel: 1,
        out_spatial: layer.out_spatial,
        stride: 1,
        compressible: true,
        expand_1x1: None,
    };
    let out = replace(net, index, 1, vec![reduce, restore]);
    Ok((
        out,
        Splice {
            start: index,
            removed: 1,
            inserted: 2,
        },
    ))
}

fn channel_scale(net: &NetworkSpec, index: usize, keep_ratio: f64) -> Result<(NetworkSpec, Splice)> {
    CompressionOperator::ChannelScale { keep_ratio }.validate()?;
    let layer = target(net, index)?;
    let kept = round_channels(keep_ratio * layer.out_channels as f64).min(layer.out_channels);
    let mut out = net.clone();
    out.layers[index].out_channels = kept;
    // Pooling passes channels through, so the change propagates past it.
    for next in out.layers.iter_mut().skip(index + 1) {
        next.in_channels = kept;
        if next.kind == LayerKind::GlobalAveragePool {
            next.out_channels = kept;
        } else {
            break;
        }
    }
    Ok((
        out,
        Splice {
            start: index,
            removed: 1,
            inserted: 1,
        },
    ))
}

fn depth_skip(net: &NetworkSpec, index: usize, skip_depth: usize) -> Result<(NetworkSpec, Splice)> {
    CompressionOperator::DepthSkip { skip_depth }.validate()?;
    target(net, index)?;
    if net.conv_indices().first() == Some(&index) {
        return Err(Error::InvalidOperator {
            layer: index,
            reason: "the first conv layer cannot be skipped".into(),
        });
    }
    if index + skip_depth > net.layers.len() {
        return Err(Error::InvalidOperator {
            layer: index,
            reason: format!("cannot skip {skip_depth} layers from here"),
        });
    }
    for layer in &net.layers[index..index + skip_depth] {
        if !layer.is_conv() || layer.in_channels != layer.out_channels {
            return Err(Error::InvalidOperator {
                layer: index,
                reason: format!(
                    "layer {} ({} -> {}) is not identity-compatible",
                    layer.index, layer.in_channels, layer.out_channels
                ),
            });
        }
    }
    let out = replace(net, index, skip_depth, Vec::new());
    Ok((
        out,
        Splice {
            start: index,
            removed: skip_depth,
            inserted: 0,
        },
    ))
}

fn apply_operator_splice(net: &NetworkSpec, index: usize, op: &CompressionOperator) -> Result<(NetworkSpec, Splice)> {
    match *op {
        CompressionOperator::Fire {
            squeeze_ratio,
            expand_split,
        } => fire(net, index, squeeze_ratio, expand_split),
        CompressionOperator::LowRank { rank_divisor } => lowrank(net, index, rank_divisor),
        CompressionOperator::ChannelScale { keep_ratio } => channel_scale(net, index, keep_ratio),
        CompressionOperator::DepthSkip { skip_depth } => depth_skip(net, index, skip_depth),
    }
}

/// Replaces a conv with a Fire squeeze/expand pair.
pub fn apply_fire(net: &NetworkSpec, index: usize, squeeze_ratio: f64, expand_split: f64) -> Result<NetworkSpec> {
    fire(net, index, squeeze_ratio, expand_split).map(|r| r.0)
}

/// Replaces a conv with a rank-reducing conv and a 1x1 restoring conv.
pub fn apply_lowrank(net: &NetworkSpec, index: usize, rank_divisor: u64) -> Result<NetworkSpec> {
    lowrank(net, index, rank_divisor).map(|r| r.0)
}

/// Keeps a fraction of the layer's output channels.
pub fn apply_channel_scale(net: &NetworkSpec, index: usize, keep_ratio: f64) -> Result<NetworkSpec> {
    channel_scale(net, index, keep_ratio).map(|r| r.0)
}

/// Removes `skip_depth` identity-compatible layers starting at `index`.
pub fn apply_depth_skip(net: &NetworkSpec, index: usize, skip_depth: usize) -> Result<NetworkSpec> {
    depth_skip(net, index, skip_depth).map(|r| r.0)
}

pub fn apply_operator(net: &NetworkSpec, index: usize, op: &CompressionOperator) -> Result<NetworkSpec> {
    apply_operator_splice(net, index, op).map(|r| r.0)
}

pub(crate) fn apply_group_splice(net: &NetworkSpec, index: usize, group: &OperatorGroup) -> Result<(NetworkSpec, Splice)> {
    group.validate()?;
    if group.is_identity() {
        return Ok((net.clone(), Splice::NONE));
    }
    let mut current = net.clone();
    let mut splice: Option<Splice> = None;
    for op in group.coarse().into_iter().chain(group.fine()) {
        let (next, s) = apply_operator_splice(&current, index, op)?;
        current = next;
        splice = Some(match splice {
            None => s,
            Some(prev) => prev.then(s),
        });
    }
    Ok((current, splice.unwrap_or(Splice::NONE)))
}

/// Applies a group at `index`: coarse member first, then the fine member on
/// the first layer the coarse member produced. Any member failure aborts the
/// whole group.
pub fn apply_group(net: &NetworkSpec, index: usize, group: &OperatorGroup) -> Result<NetworkSpec> {
    apply_group_splice(net, index, group).map(|r| r.0)
}

/// Applies `(backbone layer, group id)` assignments front to back.
///
/// Layer indices refer to the backbone; positions are tracked as earlier
/// groups insert or remove layers. Assigning a layer that an earlier group
/// removed is an error.
pub fn apply_assignments<I>(backbone: &NetworkSpec, assignments: I, catalog: &OperatorCatalog) -> Result<NetworkSpec>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let mut positions: Vec<Option<usize>> = (0..backbone.layers.len()).map(Some).collect();
    let mut net = backbone.clone();
    let mut last: Option<usize> = None;
    for (layer, group_id) in assignments {
        if last.is_some_and(|l| layer <= l) {
            return Err(Error::InvalidValue(format!(
                "plan layers must be strictly increasing, got {layer} after {}",
                last.unwrap_or_default()
            )));
        }
        last = Some(layer);
        let group = catalog
            .get(group_id)
            .ok_or_else(|| Error::InvalidValue(format!("unknown group id {group_id}")))?;
        let pos = positions
            .get(layer)
            .copied()
            .flatten()
            .ok_or_else(|| Error::InvalidOperator {
                layer,
                reason: "layer does not exist in the compressed network".into(),
            })?;
        if !backbone.layers[layer].compressible {
            return Err(Error::InvalidOperator {
                layer,
                reason: "layer is not compressible in the backbone".into(),
            });
        }
        let (next, splice) = apply_group_splice(&net, pos, group)?;
        net = next;
        for p in positions.iter_mut().skip(layer + 1) {
            *p = p.and_then(|p| splice.map(p));
        }
    }
    Ok(net)
}

/// Ratio of weights in the layers replacing `index` to the weights of the
/// original layer, for a group applied alone.
pub fn kept_param_fraction(net: &NetworkSpec, index: usize, group: &OperatorGroup) -> Result<f64> {
    let before = crate::arch::count_layer(&net.layers[index])?.params as f64;
    let (after_net, splice) = apply_group_splice(net, index, group)?;
    let mut after = 0.0;
    for layer in &after_net.layers[splice.start..splice.start + splice.inserted] {
        after += crate::arch::count_layer(layer)?.params as f64;
    }
    Ok(after / before)
}
