//! Network descriptors and exact MAC / parameter / activation counting.
//!
//! A [`NetworkSpec`] is an ordered list of square-kernel layer descriptors.
//! Every layer carries its own output feature-map side (`out_spatial`), so
//! transformations never have to re-derive spatial geometry.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current version of the network file format.
pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    /// Expand half of a Fire block: a 1x1 branch and a `kernel`-sized
    /// branch, concatenated along channels.
    FireExpand,
    #[serde(alias = "global-average-pool", alias = "gap")]
    GlobalAveragePool,
    Classifier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Position in the network, reassigned whenever layers are inserted or removed.
    #[serde(skip_serializing, default)]
    pub index: usize,
    pub kind: LayerKind,
    pub in_channels: u64,
    pub out_channels: u64,
    /// Square kernel side.
    pub kernel: u64,
    /// Square output feature-map side.
    pub out_spatial: u64,
    #[serde(default = "one")]
    pub stride: u64,
    #[serde(default)]
    pub compressible: bool,
    /// Output channels of the 1x1 branch; only meaningful for `fire_expand`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expand_1x1: Option<u64>,
}

fn one() -> u64 {
    1
}

impl LayerSpec {
    pub fn conv(in_channels: u64, out_channels: u64, kernel: u64, out_spatial: u64) -> Self {
        LayerSpec {
            index: 0,
            kind: LayerKind::Conv,
            in_channels,
            out_channels,
            kernel,
            out_spatial,
            stride: 1,
            compressible: true,
            expand_1x1: None,
        }
    }

    pub fn global_average_pool(channels: u64) -> Self {
        LayerSpec {
            index: 0,
            kind: LayerKind::GlobalAveragePool,
            in_channels: channels,
            out_channels: channels,
            kernel: 1,
            out_spatial: 1,
            stride: 1,
            compressible: false,
            expand_1x1: None,
        }
    }

    pub fn classifier(in_features: u64, classes: u64) -> Self {
        LayerSpec {
            index: 0,
            kind: LayerKind::Classifier,
            in_channels: in_features,
            out_channels: classes,
            kernel: 1,
            out_spatial: 1,
            stride: 1,
            compressible: false,
            expand_1x1: None,
        }
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_compressible(mut self, compressible: bool) -> Self {
        self.compressible = compressible;
        self
    }

    pub fn is_conv(&self) -> bool {
        self.kind == LayerKind::Conv
    }

    /// Layers that carry weights and produce a new feature map.
    pub fn is_convolutional(&self) -> bool {
        matches!(self.kind, LayerKind::Conv | LayerKind::FireExpand)
    }

    /// Checks the per-layer invariants, returning a description of the first problem.
    pub fn check(&self) -> std::result::Result<(), String> {
        let positive = |name: &str, v: u64| {
            if v == 0 {
                Err(format!("{name} must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("in_channels", self.in_channels)?;
        positive("out_channels", self.out_channels)?;
        positive("kernel", self.kernel)?;
        positive("out_spatial", self.out_spatial)?;
        positive("stride", self.stride)?;
        match self.kind {
            LayerKind::Conv => {
                if self.expand_1x1.is_some() {
                    return Err("expand_1x1 is only valid on fire_expand layers".into());
                }
            }
            LayerKind::FireExpand => {
                match self.expand_1x1 {
                    Some(e1) if e1 <= self.out_channels => {}
                    Some(_) => return Err("expand_1x1 exceeds out_channels".into()),
                    None => return Err("fire_expand layer needs expand_1x1".into()),
                }
                if self.compressible {
                    return Err("fire_expand layers are not compressible".into());
                }
            }
            LayerKind::GlobalAveragePool | LayerKind::Classifier => {
                if self.kernel != 1 {
                    return Err("non-conv layers must have kernel 1".into());
                }
                if self.kind == LayerKind::GlobalAveragePool && self.in_channels != self.out_channels {
                    return Err("pooling must keep the channel count".into());
                }
                if self.compressible {
                    return Err("only conv layers may be compressible".into());
                }
                if self.expand_1x1.is_some() {
                    return Err("expand_1x1 is only valid on fire_expand layers".into());
                }
            }
        }
        Ok(())
    }
}

/// The backbone (or a compressed variant of it).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    /// Accuracy of the uncompressed backbone, a fraction in `[0, 1]`.
    pub base_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkDocument {
    #[serde(default = "default_version")]
    format_version: u32,
    name: String,
    base_accuracy: f64,
    layers: Vec<LayerSpec>,
}

fn default_version() -> u32 {
    NETWORK_FORMAT_VERSION
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>, base_accuracy: f64) -> Self {
        let mut net = NetworkSpec {
            name: name.into(),
            layers,
            base_accuracy,
        };
        net.renumber();
        net
    }

    pub fn renumber(&mut self) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.index = i;
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        if doc.format_version != NETWORK_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(doc.format_version));
        }
        Ok(NetworkSpec::new(doc.name, doc.layers, doc.base_accuracy))
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDocument {
            format_version: NETWORK_FORMAT_VERSION,
            name: self.name.clone(),
            base_accuracy: self.base_accuracy,
            layers: self.layers.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("network serializes")
    }

    /// Reads a network file without validating it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        NetworkSpec::from_json(&std::fs::read_to_string(path)?)
    }

    /// Indices of plain conv layers, front to back.
    pub fn conv_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_conv())
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of compressible layers, front to back.
    pub fn compressible_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.compressible)
            .map(|(i, _)| i)
            .collect()
    }

    /// Index of the second conv layer, where runtime search starts by default.
    pub fn second_conv_index(&self) -> Option<usize> {
        self.conv_indices().get(1).copied()
    }
}

/// One broken invariant found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ChannelMismatch {
        boundary: (usize, usize),
        out_channels: u64,
        in_channels: u64,
    },
    InvalidLayer {
        index: usize,
        reason: String,
    },
    NoCompressibleLayer,
    BaseAccuracyOutOfRange,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ChannelMismatch {
                boundary: (a, b),
                out_channels,
                in_channels,
            } => write!(
                f,
                "channel mismatch at boundary {a}/{b}: layer {a} outputs {out_channels}, layer {b} expects {in_channels}"
            ),
            Violation::InvalidLayer { index, reason } => write!(f, "layer {index}: {reason}"),
            Violation::NoCompressibleLayer => write!(f, "no compressible layer"),
            Violation::BaseAccuracyOutOfRange => write!(f, "base_accuracy must lie in [0, 1]"),
        }
    }
}

/// Returns every invariant violation; an empty list means the network is valid.
pub fn validate(net: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(0.0..=1.0).contains(&net.base_accuracy) {
        out.push(Violation::BaseAccuracyOutOfRange);
    }
    for (i, layer) in net.layers.iter().enumerate() {
        if let Err(reason) = layer.check() {
            out.push(Violation::InvalidLayer { index: i, reason });
        }
    }
    for (i, pair) in net.layers.windows(2).enumerate() {
        if pair[0].out_channels != pair[1].in_channels {
            out.push(Violation::ChannelMismatch {
                boundary: (i, i + 1),
                out_channels: pair[0].out_channels,
                in_channels: pair[1].in_channels,
            });
        }
    }
    if !net.layers.iter().any(|l| l.compressible && l.is_conv()) {
        out.push(Violation::NoCompressibleLayer);
    }
    out
}

/// Like [`validate`], but as a `Result`.
pub fn ensure_valid(net: &NetworkSpec) -> Result<()> {
    let violations = validate(net);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidNetwork(violations))
    }
}

/// MACs, weight scalars and output activations of one layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub macs: u64,
    pub params: u64,
    pub activations: u64,
}

impl std::ops::Add for LayerCost {
    type Output = LayerCost;

    fn add(self, rhs: LayerCost) -> LayerCost {
        LayerCost {
            macs: self.macs + rhs.macs,
            params: self.params + rhs.params,
            activations: self.activations + rhs.activations,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub macs: u64,
    pub params: u64,
    pub activations: u64,
    pub per_layer: Vec<LayerCost>,
}

impl CostBreakdown {
    pub fn from_layers(per_layer: Vec<LayerCost>) -> Self {
        let total = per_layer.iter().copied().fold(LayerCost::default(), |a, b| a + b);
        CostBreakdown {
            macs: total.macs,
            params: total.params,
            activations: total.activations,
            per_layer,
        }
    }

    pub fn totals(&self) -> LayerCost {
        LayerCost {
            macs: self.macs,
            params: self.params,
            activations: self.activations,
        }
    }
}

/// Exact analytic counts for one layer.
///
/// Conv: `S_p = M*N*k^2`, `S_a = N*S_A^2`, `C = S_p*S_A^2`. Pooling has no
/// weights and classifiers are counted as 1x1 dense maps.
pub fn count_layer(layer: &LayerSpec) -> Result<LayerCost> {
    layer.check().map_err(|reason| Error::InvalidLayer {
        index: layer.index,
        reason,
    })?;
    let m = layer.in_channels;
    let n = layer.out_channels;
    let area = layer.out_spatial * layer.out_spatial;
    Ok(match layer.kind {
        LayerKind::Conv => {
            let params = m * n * layer.kernel * layer.kernel;
            LayerCost {
                macs: params * area,
                params,
                activations: n * area,
            }
        }
        LayerKind::FireExpand => {
            let e1 = layer.expand_1x1.unwrap_or(0);
            let e3 = n - e1;
            let params = m * (e1 + e3 * layer.kernel * layer.kernel);
            LayerCost {
                macs: params * area,
                params,
                activations: n * area,
            }
        }
        LayerKind::GlobalAveragePool => LayerCost {
            macs: 0,
            params: 0,
            activations: n * area,
        },
        LayerKind::Classifier => LayerCost {
            macs: m * n,
            params: m * n,
            activations: n,
        },
    })
}

/// Per-layer counts in layer order plus totals. Validates the network first.
pub fn count_network(net: &NetworkSpec) -> Result<CostBreakdown> {
    ensure_valid(net)?;
    count_layers(net)
}

/// Counting without the network-level checks (continuity, compressibility).
pub(crate) fn count_layers(net: &NetworkSpec) -> Result<CostBreakdown> {
    let per_layer = net.layers.iter().map(count_layer).collect::<Result<Vec<_>>>()?;
    Ok(CostBreakdown::from_layers(per_layer))
}
