//! Regenerates the derived fixtures under `fixtures/`. Run with
//! `cargo test -p ctxcompress --test generate_fixtures -- --ignored`.

mod common;

use std::fs;

use common::*;
use ctxcompress::arch::NetworkSpec;
use ctxcompress::search::{exhaustive_search, SearchInputs, DEFAULT_EXHAUSTIVE_CAP};
use serde_json::json;

/// Seed of the N=3, M=4 instance. Greedy's choice at the second visited
/// layer leaves no feasible option at the third on this instance.
const N3M4_SEED: u64 = 87;

#[test]
#[ignore]
fn regenerate_describe_totals() {
    let net = NetworkSpec::load(fixture("backbone_5conv.json")).unwrap();
    let per_layer: Vec<_> = net.layers.iter().map(brute_force_layer).collect();
    let total = brute_force_network(&net);
    let doc = json!({
        "network": net.name,
        "per_layer": per_layer,
        "total": total,
    });
    fs::write(fixture("backbone_5conv.totals.json"), serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
}

#[test]
#[ignore]
fn regenerate_n3m4() {
    let inst = small_instance(N3M4_SEED);
    let dir = fixture("n3m4");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("backbone.json"), inst.net.to_json() + "\n").unwrap();
    fs::write(dir.join("catalog.json"), inst.catalog.to_json() + "\n").unwrap();
    fs::write(dir.join("profile.json"), inst.profile.to_json() + "\n").unwrap();
    fs::write(dir.join("device.json"), serde_json::to_string_pretty(&inst.device).unwrap() + "\n").unwrap();

    let inputs = SearchInputs::new(&inst.net, &inst.catalog, &inst.profile, &inst.device, &inst.context);
    let ex = exhaustive_search(&inputs, DEFAULT_EXHAUSTIVE_CAP).unwrap();
    // lambda2 = max(0.3, 1 - battery); any battery at or above 0.7 gives the floor
    let battery = 1.0 - inst.context.lambda2;
    let doc = json!({
        "instance_seed": N3M4_SEED,
        "mutation_seed": N3M4_SEED,
        "a_threshold": inst.context.a_threshold,
        "t_budget": inst.context.t_budget,
        "s_budget": inst.context.s_budget,
        "battery": battery,
        "exhaustive_optimum": {
            "encoding": ex.encoding().to_string(),
            "plan": ex.plan().pairs().collect::<Vec<_>>(),
            "score": inputs.score(ex.report()),
            "feasible": ex.feasible,
        },
    });
    fs::write(dir.join("instance.json"), serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
}
