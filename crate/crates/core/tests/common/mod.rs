#![allow(dead_code)]

use std::path::PathBuf;

use ctxcompress::arch::{count_network, LayerCost, LayerKind, LayerSpec, NetworkSpec};
use ctxcompress::context::{weights_from_battery, ContextState, WeightRule};
use ctxcompress::costmodel::{latency, DeviceProfile};
use ctxcompress::operators::{CompressionOperator as Op, OperatorCatalog, OperatorGroup};
use ctxcompress::oracle::{synthetic_profile, AccuracyProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// The four-group catalog used by the small instances.
pub fn small_catalog() -> OperatorCatalog {
    OperatorCatalog::new(vec![
        OperatorGroup::new(1, vec![Op::fire()]),
        OperatorGroup::new(2, vec![Op::lowrank(12)]),
        OperatorGroup::new(3, vec![Op::channel_scale(0.5)]),
        OperatorGroup::new(4, vec![Op::channel_scale(0.75)]),
    ])
    .unwrap()
}

pub struct Instance {
    pub net: NetworkSpec,
    pub catalog: OperatorCatalog,
    pub profile: AccuracyProfile,
    pub device: DeviceProfile,
    pub context: ContextState,
}

/// Seeded instance with a fixed stem and three compressible convs (N=3, M=4).
/// Memory and latency budgets are random fractions of the backbone's own.
pub fn small_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = [32u64, 48, 64, 96, 128];
    let pick = |rng: &mut ChaCha8Rng| widths[rng.random_range(0..widths.len())];
    let stem = [16u64, 24, 32][rng.random_range(0..3)];
    let (c1, c2, c3) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
    let net = NetworkSpec::new(
        format!("small-{seed}"),
        vec![
            LayerSpec::conv(3, stem, 3, 32).with_compressible(false),
            LayerSpec::conv(stem, c1, 3, 32),
            LayerSpec::conv(c1, c2, 3, 16).with_stride(2),
            LayerSpec::conv(c2, c3, 3, 8).with_stride(2),
            LayerSpec::global_average_pool(c3),
            LayerSpec::classifier(c3, 10),
        ],
        0.9,
    );
    let catalog = small_catalog();
    let profile = synthetic_profile(&net, &catalog, seed).unwrap();
    let device = DeviceProfile::single_board();
    let cost = count_network(&net).unwrap();
    let full_s = cost.params as f64 * device.bytes_per_param;
    let full_t = latency(&cost, &device).total;
    let s_budget = full_s * rng.random_range(0.1..0.9);
    let t_budget = full_t * rng.random_range(0.6..1.1);
    let battery: f64 = rng.random_range(0.0..1.0);
    let (l1, l2) = weights_from_battery(battery, WeightRule::default()).unwrap();
    let context = ContextState::fixed(0.05, t_budget, s_budget, l1, l2);
    Instance {
        net,
        catalog,
        profile,
        device,
        context,
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Reference counter that walks every multiply-accumulate, weight and output
/// element one at a time.
pub fn brute_force_layer(layer: &LayerSpec) -> LayerCost {
    let (m, n, s) = (layer.in_channels, layer.out_channels, layer.out_spatial);
    let mut cost = LayerCost::default();
    // kernel side of every output channel
    let side = |oc: u64| match layer.kind {
        LayerKind::FireExpand if oc < layer.expand_1x1.unwrap_or(0) => 1,
        _ => layer.kernel,
    };
    match layer.kind {
        LayerKind::Conv | LayerKind::FireExpand => {
            for oc in 0..n {
                let k = side(oc);
                for _ic in 0..m {
                    for _tap in 0..k * k {
                        cost.params += 1;
                        for _pos in 0..s * s {
                            cost.macs += 1;
                        }
                    }
                }
            }
        }
        LayerKind::GlobalAveragePool => {}
        LayerKind::Classifier => {
            for _o in 0..n {
                for _i in 0..m {
                    cost.params += 1;
                    cost.macs += 1;
                }
            }
        }
    }
    for _oc in 0..n {
        for _pos in 0..s * s {
            cost.activations += 1;
        }
    }
    cost
}

pub fn brute_force_network(net: &NetworkSpec) -> LayerCost {
    net.layers.iter().map(brute_force_layer).fold(LayerCost::default(), |a, b| a + b)
}
