//! Mini-batch training and evaluation.
//!
//! The protocol: rebalance the training records to 1:1 once, then for every
//! epoch shuffle, cut into batches, and apply one AdaBelief step per batch on
//! the mean cross-entropy. Pair graphs are built from the interaction matrix
//! handed to [`fit`], which should contain only training edges; test pairs are
//! featurised against the same topology.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::graph::InteractionMatrix;
use crate::ingest::{self, BalanceMode, EdgeRecord};
use crate::knockout::{self, KnockoutConfig, KnockoutMode, KnockoutScope};
use crate::metrics::{dual_class_report, MetricsReport, ScoredSet};
use crate::model::{self, GraphBatch, ModelConfig, ModelParams};
use crate::optim::{adabelief_step, AdaBeliefConfig, OptimizerState};
use crate::subgraph::{extract_pair, featurize, FeatureMode, FeaturizedGraph, SubgraphPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rebalance {
    #[default]
    Upsample,
    Downsample,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Evaluate on the test records every this many epochs (and after the
    /// last one). 0 evaluates only after the last epoch.
    pub eval_every: usize,
    pub rebalance: Rebalance,
    /// Redraw the rebalanced set every epoch instead of once up front.
    pub resample_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = AdaBeliefConfig::default();
        TrainConfig {
            lr: opt.lr,
            eps: opt.eps,
            beta1: opt.beta1,
            beta2: opt.beta2,
            weight_decay: opt.weight_decay,
            batch_size: 256,
            epochs: 1000,
            seed: 0,
            eval_every: 10,
            rebalance: Rebalance::Upsample,
            resample_each_epoch: false,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> AdaBeliefConfig {
        AdaBeliefConfig {
            lr: self.lr,
            eps: self.eps,
            beta1: self.beta1,
            beta2: self.beta2,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        if self.batch_size == 0 {
            return Err(Error::BadParameter("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Test AUROC and harmonic AUPR when evaluated this epoch.
    pub test: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    pub fn last_test(&self) -> Option<(f64, f64)> {
        self.epochs.iter().rev().find_map(|e| e.test)
    }

    /// `epoch, train_loss, test_auroc, test_aupr`; unevaluated epochs get `NA`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch\ttrain_loss\ttest_auroc\ttest_aupr")?;
        for e in &self.epochs {
            match e.test {
                Some((auroc, aupr)) => writeln!(w, "{}\t{}\t{}\t{}", e.epoch, e.train_loss, auroc, aupr)?,
                None => writeln!(w, "{}\t{}\tNA\tNA", e.epoch, e.train_loss)?,
            }
        }
        Ok(())
    }
}

/// Pair graphs for `(attacker, target)` queries against `m`.
pub fn pair_graphs(m: &InteractionMatrix, pairs: &[SubgraphPair], mode: FeatureMode) -> Vec<FeaturizedGraph> {
    pairs.iter().map(|p| featurize(p, m, mode)).collect()
}

fn extract_all(m: &InteractionMatrix, records: &[EdgeRecord]) -> Result<Vec<SubgraphPair>> {
    records.iter().map(|r| extract_pair(m, r.attacker, r.target)).collect()
}

/// Trains a model from scratch. See [`fit_with`].
pub fn fit(
    matrix: &InteractionMatrix,
    train: &[EdgeRecord],
    test: &[EdgeRecord],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(ModelParams, History)> {
    fit_with(matrix, train, test, model_cfg, train_cfg, None, &mut |_| {})
}

/// Trains a model, optionally on knocked-out pair graphs, calling `on_epoch`
/// after every epoch.
pub fn fit_with(
    matrix: &InteractionMatrix,
    train: &[EdgeRecord],
    test: &[EdgeRecord],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    knock: Option<&KnockoutConfig>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(ModelParams, History)> {
    train_cfg.validate()?;
    model_cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let has_pos = train.iter().any(EdgeRecord::is_positive);
    let has_neg = train.iter().any(|r| !r.is_positive());
    if train_cfg.rebalance != Rebalance::Off && !(has_pos && has_neg) {
        return Err(Error::SingleClass);
    }

    // Topology each side is featurised against.
    let global = knock.filter(|k| k.mode == KnockoutMode::GlobalMatrix);
    let knocked_matrix = global.map(|k| knockout::knockout_matrix(matrix, k)).transpose()?;
    let train_matrix = knocked_matrix.as_ref().unwrap_or(matrix);
    let test_matrix = match global {
        Some(k) if k.scope == KnockoutScope::TrainAndTest => train_matrix,
        _ => matrix,
    };

    let mut unique: Vec<EdgeRecord> = Vec::new();
    let mut slot: HashMap<EdgeRecord, usize> = HashMap::new();
    for r in train {
        slot.entry(*r).or_insert_with(|| {
            unique.push(*r);
            unique.len() - 1
        });
    }
    let mut train_pairs = extract_all(train_matrix, &unique)?;
    let mut test_pairs = extract_all(test_matrix, test)?;
    if let Some(k) = knock.filter(|k| k.mode == KnockoutMode::Subgraph) {
        train_pairs = knockout::knock_pairs(&train_pairs, k, 0);
        if k.scope == KnockoutScope::TrainAndTest {
            test_pairs = knockout::knock_pairs(&test_pairs, k, 1);
        }
    }
    let train_graphs = pair_graphs(train_matrix, &train_pairs, model_cfg.features);
    let test_graphs = pair_graphs(test_matrix, &test_pairs, model_cfg.features);
    let test_labels: Vec<u8> = test.iter().map(|r| r.label).collect();
    let test_evaluable = test_labels.contains(&0) && test_labels.contains(&1);

    let balanced = |seed: u64| -> Result<Vec<usize>> {
        let recs = match train_cfg.rebalance {
            Rebalance::Off => train.to_vec(),
            Rebalance::Upsample => ingest::rebalance(train, seed, BalanceMode::Upsample)?,
            Rebalance::Downsample => ingest::rebalance(train, seed, BalanceMode::Downsample)?,
        };
        Ok(recs.iter().map(|r| slot[r]).collect())
    };

    let mut params = ModelParams::<f32>::init(*model_cfg, train_cfg.seed)?;
    let mut state = OptimizerState::new(params.tensors());
    let opt = train_cfg.optimizer();
    let mut history = History::default();
    let mut samples = balanced(train_cfg.seed)?;

    for epoch in 0..train_cfg.epochs {
        if train_cfg.resample_each_epoch && epoch > 0 {
            samples = balanced(train_cfg.seed.wrapping_add(epoch as u64))?;
        }
        let order = ingest::epoch_shuffle(&samples, train_cfg.seed, epoch as u64);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(train_cfg.batch_size).enumerate() {
            let graphs: Vec<&FeaturizedGraph> = chunk.iter().map(|&i| &train_graphs[i]).collect();
            let labels: Vec<f64> = chunk.iter().map(|&i| unique[i].label as f64).collect();
            let batch = GraphBatch::new(&graphs)?;
            let nonfinite = |e: Error| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss { epoch, batch: b },
                other => other,
            };
            let (loss, grads) = model::loss_and_grads(&params, &batch, &labels).map_err(nonfinite)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adabelief_step(params.tensors_mut(), &grads, &mut state, &opt)?;
            if !params.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let last = epoch + 1 == train_cfg.epochs;
        let due = train_cfg.eval_every > 0 && (epoch + 1) % train_cfg.eval_every == 0;
        let test_metrics = if test_evaluable && (last || due) {
            let scores = predict_graphs(&params, &test_graphs, train_cfg.batch_size)?;
            let r = dual_class_report(&ScoredSet::new(scores, test_labels.clone())?)?;
            Some((r.auroc_harmonic, r.aupr_harmonic))
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / samples.len().max(1) as f64,
            test: test_metrics,
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok((params, history))
}

/// Scores pre-built graphs in chunks of `chunk` graphs.
pub fn predict_graphs(params: &ModelParams, graphs: &[FeaturizedGraph], chunk: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(graphs.len());
    for c in graphs.chunks(chunk.max(1)) {
        let refs: Vec<&FeaturizedGraph> = c.iter().collect();
        out.extend(model::predict(params, &refs)?);
    }
    Ok(out)
}

/// Link probabilities for `(attacker, target)` pairs against topology `m`.
pub fn score_pairs(params: &ModelParams, m: &InteractionMatrix, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let extracted: Vec<SubgraphPair> =
        pairs.iter().map(|&(a, t)| extract_pair(m, a, t)).collect::<Result<_>>()?;
    let graphs = pair_graphs(m, &extracted, params.config().features);
    predict_graphs(params, &graphs, 512)
}

/// Scores labelled records against topology `m`.
pub fn score_records(params: &ModelParams, m: &InteractionMatrix, records: &[EdgeRecord]) -> Result<ScoredSet> {
    let pairs: Vec<(usize, usize)> = records.iter().map(|r| (r.attacker, r.target)).collect();
    let scores = score_pairs(params, m, &pairs)?;
    ScoredSet::new(scores, records.iter().map(|r| r.label).collect())
}

/// Full dual-class report of `params` on `records`.
pub fn evaluate(params: &ModelParams, m: &InteractionMatrix, records: &[EdgeRecord]) -> Result<MetricsReport> {
    dual_class_report(&score_records(params, m, records)?)
}
