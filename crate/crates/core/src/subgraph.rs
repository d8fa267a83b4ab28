//! 1-hop star extraction, pairing into one input graph, and node features.
//!
//! For a query `(a, t)` the attacker star holds `a` and the targets it is
//! positively linked to; the target star holds `t` and its attackers. When the
//! queried entry is itself positive, `t` is dropped from the attacker star and
//! `a` from the target star so the label never appears in the input.

use crate::error::Result;
use crate::graph::{Entry, InteractionMatrix, NodeId, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Star {
    pub center: NodeId,
    /// Opposite-role nodes linked to the center, ascending.
    pub leaves: Vec<NodeId>,
}

impl Star {
    pub fn degree(&self) -> usize {
        self.leaves.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphPair {
    pub attacker_star: Star,
    pub target_star: Star,
    pub label: Entry,
}

impl SubgraphPair {
    pub fn attacker(&self) -> usize {
        self.attacker_star.center.index
    }

    pub fn target(&self) -> usize {
        self.target_star.center.index
    }

    pub fn num_nodes(&self) -> usize {
        2 + self.attacker_star.degree() + self.target_star.degree()
    }
}

/// Structural position of a node inside a pair graph. The discriminant is the
/// one-hot slot used by the featuriser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    AttackerCenter = 0,
    TargetCenter = 1,
    TargetLeaf = 2,
    AttackerLeaf = 3,
}

/// Which initial node features to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FeatureMode {
    /// Role one-hot (4) + `ln(1 + degree)`.
    #[default]
    RoleDegree,
    /// Role one-hot only.
    RoleOnly,
    /// Role one-hot + `ln(1 + degree)` + `ln(1 + cross links)`, where cross
    /// links counts the leaves of the other star a leaf is positively linked to.
    RoleDegreeCross,
}

impl FeatureMode {
    pub fn dim(self) -> usize {
        match self {
            FeatureMode::RoleOnly => 4,
            FeatureMode::RoleDegree => 5,
            FeatureMode::RoleDegreeCross => 6,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            FeatureMode::RoleDegree => 0,
            FeatureMode::RoleOnly => 1,
            FeatureMode::RoleDegreeCross => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(FeatureMode::RoleDegree),
            1 => Some(FeatureMode::RoleOnly),
            2 => Some(FeatureMode::RoleDegreeCross),
            _ => None,
        }
    }
}

/// Model input built from a [`SubgraphPair`].
///
/// Node order: attacker center, attacker-star leaves, target center,
/// target-star leaves. Edges only join a center to its own leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedGraph {
    /// Row-major `[num_nodes x feature_dim]`.
    pub node_features: Vec<f32>,
    pub feature_dim: usize,
    pub adjacency: Vec<(u32, u32)>,
    pub node_roles: Vec<NodeRole>,
}

impl FeaturizedGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_roles.len()
    }

    /// Number of nodes that belong to the attacker star (center included).
    pub fn attacker_star_len(&self) -> usize {
        1 + self.node_roles.iter().filter(|r| **r == NodeRole::TargetLeaf).count()
    }
}

/// Builds the paired stars for `(attacker, target)` with leakage removal.
pub fn extract_pair(m: &InteractionMatrix, attacker: usize, target: usize) -> Result<SubgraphPair> {
    let label = m.entry(attacker, target)?;
    let a = NodeId::attacker(attacker);
    let t = NodeId::target(target);
    let mut a_leaves = m.positive_neighbors(a)?;
    let mut t_leaves = m.positive_neighbors(t)?;
    if label == Entry::Positive {
        a_leaves.retain(|n| *n != t);
        t_leaves.retain(|n| *n != a);
    }
    Ok(SubgraphPair {
        attacker_star: Star { center: a, leaves: a_leaves },
        target_star: Star { center: t, leaves: t_leaves },
        label,
    })
}

/// Assigns initial features and builds the star adjacency.
///
/// Center degrees are the star sizes (leakage removal and any knock-out
/// already applied); leaf degrees come from `m`.
pub fn featurize(pair: &SubgraphPair, m: &InteractionMatrix, mode: FeatureMode) -> FeaturizedGraph {
    let a_star = &pair.attacker_star;
    let t_star = &pair.target_star;
    let n = pair.num_nodes();
    let dim = mode.dim();
    let mut node_features = Vec::with_capacity(n * dim);
    let mut node_roles = Vec::with_capacity(n);
    let mut adjacency = Vec::with_capacity(n - 2);

    let cross = |leaf: NodeId, other: &Star| -> usize {
        other
            .leaves
            .iter()
            .filter(|o| match leaf.role {
                Role::Target => m.is_positive(o.index, leaf.index),
                Role::Attacker => m.is_positive(leaf.index, o.index),
            })
            .count()
    };
    let mut push = |role: NodeRole, degree: usize, cross_links: usize| {
        let mut onehot = [0.0f32; 4];
        onehot[role as usize] = 1.0;
        node_features.extend_from_slice(&onehot);
        if mode != FeatureMode::RoleOnly {
            node_features.push((degree as f32).ln_1p());
        }
        if mode == FeatureMode::RoleDegreeCross {
            node_features.push((cross_links as f32).ln_1p());
        }
        node_roles.push(role);
    };

    push(NodeRole::AttackerCenter, a_star.degree(), 0);
    for leaf in &a_star.leaves {
        let cross_links = if mode == FeatureMode::RoleDegreeCross { cross(*leaf, t_star) } else { 0 };
        push(NodeRole::TargetLeaf, m.degree(*leaf).unwrap_or(0), cross_links);
    }
    let t_center = 1 + a_star.degree();
    push(NodeRole::TargetCenter, t_star.degree(), 0);
    for leaf in &t_star.leaves {
        let cross_links = if mode == FeatureMode::RoleDegreeCross { cross(*leaf, a_star) } else { 0 };
        push(NodeRole::AttackerLeaf, m.degree(*leaf).unwrap_or(0), cross_links);
    }

    for i in 0..a_star.degree() {
        adjacency.push((0, (1 + i) as u32));
    }
    for i in 0..t_star.degree() {
        adjacency.push((t_center as u32, (t_center + 1 + i) as u32));
    }
    FeaturizedGraph { node_features, feature_dim: dim, adjacency, node_roles }
}
