//! Planted block-model benchmark generator.
//!
//! Attackers and targets are split into `blocks` contiguous co-blocks. A pair
//! inside the same co-block is positive with probability `p_in`, any other
//! pair with `p_out`. Observed negatives are then drawn without replacement
//! from the non-positive pairs, `round(neg_ratio * positives)` of them (capped
//! at the number available).

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{EdgeList, EdgeRecord};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockModel {
    pub num_attackers: usize,
    pub num_targets: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub neg_ratio: f64,
    pub seed: u64,
}

impl Default for BlockModel {
    /// The desk-scale benchmark used by the end-to-end tests.
    fn default() -> Self {
        BlockModel {
            num_attackers: 200,
            num_targets: 100,
            blocks: 4,
            p_in: 0.3,
            p_out: 0.02,
            neg_ratio: 2.0,
            seed: 7,
        }
    }
}

impl BlockModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadParameter(m));
        if self.num_attackers == 0 || self.num_targets == 0 {
            return bad("need at least one attacker and one target".into());
        }
        if self.blocks == 0 || self.blocks > self.num_attackers.min(self.num_targets) {
            return bad(format!("blocks must be in 1..={}", self.num_attackers.min(self.num_targets)));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.neg_ratio >= 0.0 && self.neg_ratio.is_finite()) {
            return bad(format!("neg_ratio = {} must be >= 0", self.neg_ratio));
        }
        Ok(())
    }

    pub fn attacker_block(&self, a: usize) -> usize {
        a * self.blocks / self.num_attackers
    }

    pub fn target_block(&self, t: usize) -> usize {
        t * self.blocks / self.num_targets
    }

    /// Number of `(a, t)` pairs that share a co-block.
    pub fn within_block_pairs(&self) -> usize {
        (0..self.blocks)
            .map(|b| {
                let na = (0..self.num_attackers).filter(|&a| self.attacker_block(a) == b).count();
                let nt = (0..self.num_targets).filter(|&t| self.target_block(t) == b).count();
                na * nt
            })
            .sum()
    }

    /// Records sorted by `(attacker, target)`.
    pub fn generate(&self) -> Result<EdgeList> {
        self.validate()?;
        let mut rng = rng::stream_rng(rng::SYNTH, self.seed, 0);
        let (m, n) = (self.num_attackers, self.num_targets);
        let mut positive = vec![false; m * n];
        for a in 0..m {
            for t in 0..n {
                let p = if self.attacker_block(a) == self.target_block(t) { self.p_in } else { self.p_out };
                positive[a * n + t] = rng.gen_bool(p);
            }
        }
        let num_pos = positive.iter().filter(|&&p| p).count();
        let candidates: Vec<usize> = (0..m * n).filter(|&i| !positive[i]).collect();
        let want = ((self.neg_ratio * num_pos as f64).round() as usize).min(candidates.len());
        let mut negative = vec![false; m * n];
        for i in index::sample(&mut rng, candidates.len(), want) {
            negative[candidates[i]] = true;
        }
        let records = (0..m * n)
            .filter_map(|i| {
                let (a, t) = (i / n, i % n);
                if positive[i] {
                    Some(EdgeRecord::new(a, t, 1))
                } else if negative[i] {
                    Some(EdgeRecord::new(a, t, 0))
                } else {
                    None
                }
            })
            .collect();
        Ok(EdgeList { num_attackers: m, num_targets: n, records })
    }
}
