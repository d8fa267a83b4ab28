//! Shared fixtures for the criterion benchmarks in `benches/`.

use gplp_core::ingest;
use gplp_core::subgraph::{extract_pair, featurize};
use gplp_core::synth::BlockModel;
use gplp_core::{EdgeRecord, FeatureMode, FeaturizedGraph, InteractionMatrix, SplitSpec};

pub struct Fixture {
    pub matrix: InteractionMatrix,
    pub train: Vec<EdgeRecord>,
    pub test: Vec<EdgeRecord>,
}

/// The default planted block benchmark, split 80-20.
pub fn fixture() -> Fixture {
    let e = BlockModel::default().generate().expect("default block model is valid");
    let (train, test) = ingest::split(&e.records, SplitSpec::new(0.8, 0)).expect("non-empty benchmark");
    let matrix = InteractionMatrix::build(e.num_attackers, e.num_targets, &train).expect("consistent labels");
    Fixture { matrix, train, test }
}

/// Featurised pair graphs for the first `n` training records.
pub fn graphs(f: &Fixture, n: usize, mode: FeatureMode) -> Vec<FeaturizedGraph> {
    f.train
        .iter()
        .take(n)
        .map(|r| featurize(&extract_pair(&f.matrix, r.attacker, r.target).expect("in range"), &f.matrix, mode))
        .collect()
}
