//! Edge knock-out for simulating incompletely observed networks.
//!
//! Each star of degree `d >= 1` loses `k` of its leaves, where `k` is drawn
//! with probability `C(d, k) / (2^d - 1)` for `k = 1..=d`. That is the size
//! distribution of a uniformly random non-empty subset of the leaves, which is
//! how it is sampled here.

use std::io::Write;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{InteractionMatrix, NodeId, Role};
use crate::ingest::EdgeRecord;
use crate::metrics::{MetricsReport, METRIC_NAMES};
use crate::rng;
use crate::subgraph::{Star, SubgraphPair};

/// Which pair graphs are degraded during a knock-out study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnockoutScope {
    #[default]
    TrainOnly,
    TrainAndTest,
}

/// Where edges are removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnockoutMode {
    /// Independently per extracted star.
    #[default]
    Subgraph,
    /// Once on the interaction matrix, attacker stars first, then target stars.
    GlobalMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnockoutConfig {
    pub seed: u64,
    pub scope: KnockoutScope,
    /// Whether a star may lose every leaf.
    pub allow_empty: bool,
    /// Optional multiplier on the sampled count (rounded, clamped to the degree).
    pub severity: Option<f64>,
    pub mode: KnockoutMode,
}

impl Default for KnockoutConfig {
    fn default() -> Self {
        KnockoutConfig {
            seed: 0,
            scope: KnockoutScope::TrainOnly,
            allow_empty: true,
            severity: None,
            mode: KnockoutMode::Subgraph,
        }
    }
}

/// `P(k) = C(d, k) / (2^d - 1)` for `k = 0..=d` (entry 0 is always 0).
pub fn knockout_pmf(degree: usize) -> Result<Vec<f64>> {
    if degree == 0 {
        return Err(Error::BadDegree(0));
    }
    // work in log space so large degrees do not overflow
    let ln_norm = if degree >= 64 {
        degree as f64 * std::f64::consts::LN_2
    } else {
        (((1u128 << degree) - 1) as f64).ln()
    };
    let mut ln_c = 0.0f64;
    let mut pmf = vec![0.0; degree + 1];
    for (k, p) in pmf.iter_mut().enumerate().skip(1) {
        ln_c += ((degree - k + 1) as f64).ln() - (k as f64).ln();
        *p = (ln_c - ln_norm).exp();
    }
    Ok(pmf)
}

/// Draws how many leaves to knock out of a star with `degree` leaves.
pub fn sample_knockout_count<R: Rng + ?Sized>(degree: usize, rng: &mut R) -> Result<usize> {
    if degree == 0 {
        return Err(Error::BadDegree(0));
    }
    loop {
        // a uniform subset is one fair coin per leaf; reject the empty one
        let mut count = 0usize;
        let mut left = degree;
        while left > 0 {
            let take = left.min(64);
            let bits: u64 = rng.gen();
            let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
            count += (bits & mask).count_ones() as usize;
            left -= take;
        }
        if count > 0 {
            return Ok(count);
        }
    }
}

/// Removes a random subset of leaves. The center is never touched.
///
/// Without `allow_empty`, a draw that would remove every leaf is redrawn (or,
/// with a severity multiplier, capped at one leaf short); a single-leaf star is
/// then returned unchanged.
pub fn knock_star<R: Rng + ?Sized>(star: &Star, config: &KnockoutConfig, rng: &mut R) -> Star {
    let degree = star.degree();
    if degree == 0 || (!config.allow_empty && degree == 1) {
        return star.clone();
    }
    let cap = if config.allow_empty { degree } else { degree - 1 };
    let count = loop {
        let k = sample_knockout_count(degree, rng).expect("degree >= 1");
        if let Some(f) = config.severity {
            break ((k as f64 * f).round().max(0.0) as usize).min(cap);
        }
        if k <= cap {
            break k;
        }
    };
    let mut removed = vec![false; degree];
    for i in index::sample(rng, degree, count) {
        removed[i] = true;
    }
    Star {
        center: star.center,
        leaves: star.leaves.iter().zip(&removed).filter(|(_, &r)| !r).map(|(l, _)| *l).collect(),
    }
}

/// Knocks both stars of every pair with independent draws; pair `i` uses its
/// own random stream, so the result does not depend on processing order.
pub fn knockout_training_set(pairs: &[SubgraphPair], config: &KnockoutConfig) -> Vec<SubgraphPair> {
    knock_pairs(pairs, config, 0)
}

/// As [`knockout_training_set`] with a caller-chosen stream namespace, so
/// train and test sets can be degraded independently under one seed.
pub(crate) fn knock_pairs(pairs: &[SubgraphPair], config: &KnockoutConfig, namespace: u64) -> Vec<SubgraphPair> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = rng::stream_rng(rng::KNOCKOUT ^ (namespace << 32), config.seed, i as u64);
            SubgraphPair {
                attacker_star: knock_star(&p.attacker_star, config, &mut rng),
                target_star: knock_star(&p.target_star, config, &mut rng),
                label: p.label,
            }
        })
        .collect()
}

/// Knocks the stars of the matrix itself: each attacker star, then each target
/// star of the result. Negative entries are kept.
pub fn knockout_matrix(m: &InteractionMatrix, config: &KnockoutConfig) -> Result<InteractionMatrix> {
    let mut records: Vec<EdgeRecord> = Vec::with_capacity(m.num_positives());
    let mut stream = 0u64;
    let mut knock_all = |role: Role, m: &InteractionMatrix| -> Result<Vec<(usize, usize)>> {
        let mut kept = Vec::new();
        for i in 0..m.size(role) {
            let center = NodeId { role, index: i };
            let star = Star { center, leaves: m.positive_neighbors(center)? };
            let mut rng = rng::stream_rng(rng::KNOCKOUT ^ (2 << 32), config.seed, stream);
            stream += 1;
            for leaf in knock_star(&star, config, &mut rng).leaves {
                kept.push(match role {
                    Role::Attacker => (i, leaf.index),
                    Role::Target => (leaf.index, i),
                });
            }
        }
        Ok(kept)
    };
    let negatives: Vec<EdgeRecord> = m.negatives().map(|(a, t)| EdgeRecord::new(a, t, 0)).collect();
    let after_attackers = knock_all(Role::Attacker, m)?;
    let mut tmp: Vec<EdgeRecord> = after_attackers.iter().map(|&(a, t)| EdgeRecord::new(a, t, 1)).collect();
    tmp.extend_from_slice(&negatives);
    let mid = InteractionMatrix::build(m.num_attackers(), m.num_targets(), &tmp)?;
    records.extend(knock_all(Role::Target, &mid)?.into_iter().map(|(a, t)| EdgeRecord::new(a, t, 1)));
    records.extend(negatives);
    InteractionMatrix::build(m.num_attackers(), m.num_targets(), &records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRow {
    pub metric: &'static str,
    pub clean: f64,
    pub degraded: f64,
    /// `degraded - clean`
    pub abs_delta: f64,
    /// `(degraded - clean) / clean`, NaN when `clean` is 0
    pub rel_delta: f64,
}

/// Per-metric change from a clean run to a knock-out run.
pub fn degradation_report(clean: &MetricsReport, degraded: &MetricsReport) -> Vec<DegradationRow> {
    METRIC_NAMES
        .iter()
        .zip(clean.values().iter().zip(degraded.values()))
        .map(|(&metric, (&c, d))| DegradationRow {
            metric,
            clean: c,
            degraded: d,
            abs_delta: d - c,
            rel_delta: if c == 0.0 { f64::NAN } else { (d - c) / c },
        })
        .collect()
}

pub fn write_degradation_tsv<W: Write>(mut w: W, rows: &[DegradationRow]) -> std::io::Result<()> {
    writeln!(w, "metric\tclean\tdegraded\tabs_delta\trel_delta")?;
    for r in rows {
        writeln!(w, "{}\t{}\t{}\t{}\t{}", r.metric, r.clean, r.degraded, r.abs_delta, r.rel_delta)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Entry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn star(n: usize) -> Star {
        Star { center: NodeId::attacker(0), leaves: (0..n).map(NodeId::target).collect() }
    }

    #[test]
    fn heavy_severity_respects_allow_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = KnockoutConfig { allow_empty: false, severity: Some(50.0), ..Default::default() };
        for _ in 0..100 {
            assert_eq!(knock_star(&star(3), &cfg, &mut rng).degree(), 1);
        }
        let cfg = KnockoutConfig { severity: Some(50.0), ..Default::default() };
        assert_eq!(knock_star(&star(3), &cfg, &mut rng).degree(), 0);
        let cfg = KnockoutConfig { severity: Some(0.0), ..Default::default() };
        assert_eq!(knock_star(&star(3), &cfg, &mut rng).degree(), 3);
    }

    #[test]
    fn pmf_values() {
        assert_eq!(knockout_pmf(1).unwrap(), vec![0.0, 1.0]);
        let p2 = knockout_pmf(2).unwrap();
        assert!((p2[1] - 2.0 / 3.0).abs() < 1e-12 && (p2[2] - 1.0 / 3.0).abs() < 1e-12);
        for d in [1, 3, 8, 40, 100] {
            let s: f64 = knockout_pmf(d).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "{d}: {s}");
        }
        assert!(matches!(knockout_pmf(0), Err(Error::BadDegree(0))));
    }

    #[test]
    fn degree_one_always_removes_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_eq!(sample_knockout_count(1, &mut rng).unwrap(), 1);
        }
        assert!(sample_knockout_count(0, &mut rng).is_err());
    }

    #[test]
    fn large_degree_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let k = sample_knockout_count(150, &mut rng).unwrap();
            assert!((1..=150).contains(&k));
        }
    }

    #[test]
    fn knock_star_cases() {
        let cfg = KnockoutConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(knock_star(&star(0), &cfg, &mut rng), star(0));
        for _ in 0..50 {
            assert!(knock_star(&star(1), &cfg, &mut rng).leaves.is_empty());
        }
        let keep = KnockoutConfig { allow_empty: false, ..cfg };
        assert_eq!(knock_star(&star(1), &keep, &mut rng), star(1));
        for _ in 0..200 {
            let s = star(6);
            let k = knock_star(&s, &keep, &mut rng);
            assert!(!k.leaves.is_empty() && k.leaves.len() < 6);
            assert_eq!(k.center, s.center);
            assert!(k.leaves.iter().all(|l| s.leaves.contains(l)));
        }
    }

    #[test]
    fn severity_scales_counts() {
        let cfg = KnockoutConfig { severity: Some(0.0), ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(knock_star(&star(5), &cfg, &mut rng), star(5));
    }

    fn pairs() -> Vec<SubgraphPair> {
        (0..20)
            .map(|i| SubgraphPair {
                attacker_star: Star { center: NodeId::attacker(i), leaves: (0..i % 7).map(NodeId::target).collect() },
                target_star: Star { center: NodeId::target(i), leaves: (0..(i + 3) % 5).map(NodeId::attacker).collect() },
                label: if i % 2 == 0 { Entry::Positive } else { Entry::Negative },
            })
            .collect()
    }

    #[test]
    fn training_set_is_deterministic_and_shrinks() {
        let cfg = KnockoutConfig { seed: 9, ..Default::default() };
        let p = pairs();
        let a = knockout_training_set(&p, &cfg);
        assert_eq!(a, knockout_training_set(&p, &cfg));
        let edges = |v: &[SubgraphPair]| v.iter().map(|p| p.attacker_star.degree() + p.target_star.degree()).sum::<usize>();
        assert!(edges(&a) < edges(&p));
        assert!(a.iter().zip(&p).all(|(x, y)| x.label == y.label));
        // per-pair streams: a prefix gets the same result
        assert_eq!(knockout_training_set(&p[..5], &cfg), a[..5].to_vec());
    }

    #[test]
    fn global_matrix_knockout() {
        let recs: Vec<_> = (0..6)
            .flat_map(|a| (0..4).map(move |t| EdgeRecord::new(a, t, u8::from((a + t) % 3 != 0))))
            .collect();
        let m = InteractionMatrix::build(6, 4, &recs).unwrap();
        let k = knockout_matrix(&m, &KnockoutConfig::default()).unwrap();
        assert!(k.num_positives() < m.num_positives());
        assert_eq!(k.num_negatives(), m.num_negatives());
        assert!(k.positives().all(|(a, t)| m.is_positive(a, t)));
    }

    #[test]
    fn degradation_rows() {
        let clean = MetricsReport::from_values([0.96, 0.96, 0.96, 0.92, 0.9, 0.91, 0.8, 0.7]);
        let same = degradation_report(&clean, &clean);
        assert_eq!(same.len(), 8);
        assert!(same.iter().all(|r| r.abs_delta == 0.0 && r.rel_delta == 0.0));

        let mut v = clean.values();
        v[3] = 0.82;
        let rows = degradation_report(&clean, &MetricsReport::from_values(v));
        assert!((rows[3].abs_delta + 0.10).abs() < 1e-12);
        assert!((rows[3].rel_delta + 0.10 / 0.92).abs() < 1e-12);

        let mut buf = Vec::new();
        write_degradation_tsv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }
}
