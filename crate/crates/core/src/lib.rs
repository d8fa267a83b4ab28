//! Link prediction on bipartite attacker/target interaction networks.
//!
//! Every candidate pair `(a, t)` is turned into a small input graph made of two
//! 1-hop stars: the attacker `a` with the targets it is known to hit, and the
//! target `t` with the attackers known to hit it. A sum+max message passing
//! network reads the pair graph and a three layer MLP head turns the pooled
//! representation into a link probability.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] sparse observed interaction matrix and neighbourhood queries
//! * [`ingest`] edge-list parsing, splits, folds, rebalancing and shuffles
//! * [`subgraph`] star extraction, leakage removal and node featurisation
//! * [`autodiff`] the dense tensor core with a reverse-mode tape
//! * [`model`] message passing layers, readout and head
//! * [`optim`] the AdaBelief optimizer
//! * [`train`] the mini-batch training loop and evaluation
//! * [`checkpoint`] binary parameter files
//! * [`metrics`] exact AUROC/AUPR and the dual-class report
//! * [`knockout`] edge knock-out for simulating incomplete networks
//! * [`synth`] planted block-model benchmark generator

pub mod autodiff;
pub mod checkpoint;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod knockout;
pub mod metrics;
pub mod model;
mod rng;
pub mod optim;
pub mod subgraph;
pub mod synth;
pub mod train;

pub use autodiff::{Real, Tape, Tensor, Var};
pub use error::{Error, Result};
pub use graph::{Entry, InteractionMatrix, NodeId, Role};
pub use ingest::{EdgeRecord, SplitSpec};
pub use knockout::{KnockoutConfig, KnockoutScope};
pub use metrics::{MetricsReport, ScoredSet};
pub use model::{FeatureMode, ModelConfig, ModelParams, Readout};
pub use subgraph::{FeaturizedGraph, Star, SubgraphPair};
pub use train::{EpochRecord, History, Rebalance, TrainConfig};
