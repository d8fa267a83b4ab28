//! Edge-list parsing and the dataset protocol helpers: splits, k-fold
//! partitions, 1:1 class rebalancing and per-epoch shuffles.
//!
//! All randomised helpers are pure functions of their input and seed.

use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRecord {
    pub attacker: usize,
    pub target: usize,
    /// 1 = active interaction, 0 = observed inactive.
    pub label: u8,
}

impl EdgeRecord {
    pub fn new(attacker: usize, target: usize, label: u8) -> Self {
        debug_assert!(label <= 1);
        EdgeRecord { attacker, target, label }
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// Result of parsing an edge-list file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub num_attackers: usize,
    pub num_targets: usize,
    pub records: Vec<EdgeRecord>,
}

/// Parses `attacker<TAB>target<TAB>label` lines.
///
/// Lines starting with `#` are comments, except `#dims M N` which fixes the
/// index space sizes. Without it the sizes are one past the largest index seen.
/// Blank lines are skipped; CRLF endings are accepted.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<EdgeList> {
    let mut dims: Option<(usize, usize)> = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(d) = rest.strip_prefix("dims") {
                dims = Some(parse_dims(d, lineno)?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let attacker = parse_index(fields[0], lineno, "attacker")?;
        let target = parse_index(fields[1], lineno, "target")?;
        let label = match fields[2].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(lineno, format!("bad label {other:?}, expected 0 or 1"))),
        };
        if let Some((m, n)) = dims {
            if attacker >= m || target >= n {
                return Err(parse_err(lineno, format!("pair ({attacker}, {target}) outside #dims {m} {n}")));
            }
        }
        records.push(EdgeRecord { attacker, target, label });
    }
    let (num_attackers, num_targets) = match dims {
        Some(d) => {
            // A header may follow records; re-validate everything against it.
            if let Some(r) = records.iter().find(|r| r.attacker >= d.0 || r.target >= d.1) {
                return Err(parse_err(0, format!("pair ({}, {}) outside #dims {} {}", r.attacker, r.target, d.0, d.1)));
            }
            d
        }
        None => (
            records.iter().map(|r| r.attacker + 1).max().unwrap_or(0),
            records.iter().map(|r| r.target + 1).max().unwrap_or(0),
        ),
    };
    Ok(EdgeList { num_attackers, num_targets, records })
}

/// Writes records in the format read by [`parse_edge_list`], with a `#dims` header.
pub fn write_edge_list<W: std::io::Write>(
    mut w: W,
    num_attackers: usize,
    num_targets: usize,
    records: &[EdgeRecord],
) -> std::io::Result<()> {
    writeln!(w, "#dims {num_attackers} {num_targets}")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.attacker, r.target, r.label)?;
    }
    Ok(())
}

fn parse_dims(rest: &str, lineno: usize) -> Result<(usize, usize)> {
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(parse_err(lineno, "expected `#dims M N`".into()));
    }
    Ok((parse_index(parts[0], lineno, "M")?, parse_index(parts[1], lineno, "N")?))
}

fn parse_index(s: &str, lineno: usize, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(lineno, format!("bad {what} {s:?}")))
}

fn parse_err(line: usize, reason: String) -> Error {
    Error::Parse { line, reason }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Split each class separately so both sides keep the class ratio.
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        SplitSpec { train_fraction, seed, stratified: false }
    }
}

/// Random train/test partition. `|train| = round(fraction * n)` (per class when
/// stratified). Both sides keep the input order.
pub fn split(records: &[EdgeRecord], spec: SplitSpec) -> Result<(Vec<EdgeRecord>, Vec<EdgeRecord>)> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::BadParameter(format!("train fraction {} not in (0, 1)", spec.train_fraction)));
    }
    let mut rng = rng::stream_rng(rng::SPLIT, spec.seed, 0);
    let mut in_train = vec![false; records.len()];
    let groups: Vec<Vec<usize>> = if spec.stratified {
        [1u8, 0]
            .iter()
            .map(|&l| (0..records.len()).filter(|&i| records[i].label == l).collect())
            .collect()
    } else {
        vec![(0..records.len()).collect()]
    };
    for mut idx in groups {
        idx.shuffle(&mut rng);
        let take = (spec.train_fraction * idx.len() as f64).round() as usize;
        for &i in &idx[..take] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = records.iter().zip(&in_train).partition(|(_, &t)| t);
    Ok((train.into_iter().map(|(r, _)| *r).collect(), test.into_iter().map(|(r, _)| *r).collect()))
}

/// One fold of a k-fold partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<EdgeRecord>,
    pub validation: Vec<EdgeRecord>,
}

/// k-fold partition; fold sizes differ by at most one, the first `n % k` folds
/// taking the extra record.
pub fn kfold(records: &[EdgeRecord], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || records.len() < k {
        return Err(Error::BadFoldCount { k, records: records.len() });
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut rng::stream_rng(rng::KFOLD, seed, 0));
    let n = records.len();
    let mut fold_of = vec![0usize; n];
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        for &i in &idx[start..start + size] {
            fold_of[i] = f;
        }
        start += size;
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<_>, Vec<_>) =
                records.iter().zip(&fold_of).partition(|(_, &g)| g == f);
            Fold {
                train: train.into_iter().map(|(r, _)| *r).collect(),
                validation: validation.into_iter().map(|(r, _)| *r).collect(),
            }
        })
        .collect())
}

/// Class balancing strategy applied to the training records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceMode {
    /// Copy random minority records (with replacement) up to the majority count.
    Upsample,
    /// Keep a random subset of the majority class of the minority's size.
    Downsample,
}

/// Equalises the positive and negative counts.
///
/// With [`BalanceMode::Upsample`] the input is returned unchanged followed by
/// the extra minority copies.
pub fn rebalance(records: &[EdgeRecord], seed: u64, mode: BalanceMode) -> Result<Vec<EdgeRecord>> {
    let (pos, neg): (Vec<EdgeRecord>, Vec<EdgeRecord>) = records.iter().partition(|r| r.is_positive());
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let (minority, majority) = if pos.len() < neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = rng::stream_rng(rng::REBALANCE, seed, 0);
    match mode {
        BalanceMode::Upsample => {
            let extra = majority.len() - minority.len();
            let mut out = records.to_vec();
            out.extend((0..extra).map(|_| minority[rng.gen_range(0..minority.len())]));
            Ok(out)
        }
        BalanceMode::Downsample => {
            let mut keep: Vec<usize> = (0..majority.len()).collect();
            keep.shuffle(&mut rng);
            keep.truncate(minority.len());
            keep.sort_unstable();
            let mut out = minority;
            out.extend(keep.into_iter().map(|i| majority[i]));
            Ok(out)
        }
    }
}

/// Shorthand for up-sampling to a 1:1 class ratio.
pub fn rebalance_1to1(records: &[EdgeRecord], seed: u64) -> Result<Vec<EdgeRecord>> {
    rebalance(records, seed, BalanceMode::Upsample)
}

/// Deterministic permutation keyed by `(seed, epoch)`.
pub fn epoch_shuffle<T: Clone>(items: &[T], seed: u64, epoch: u64) -> Vec<T> {
    let mut out = items.to_vec();
    out.shuffle(&mut rng::stream_rng(rng::SHUFFLE, seed, epoch));
    out
}
