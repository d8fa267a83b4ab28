//! Sparse observed interaction matrix over attacker x target index spaces.
//!
//! Only positive entries are graph edges. Negative entries are kept as
//! training labels and never show up in neighbourhood queries.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::ingest::EdgeRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Attacker,
    Target,
}

impl Role {
    pub fn opposite(self) -> Role {
        match self {
            Role::Attacker => Role::Target,
            Role::Target => Role::Attacker,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub role: Role,
    pub index: usize,
}

impl NodeId {
    pub fn attacker(index: usize) -> Self {
        NodeId { role: Role::Attacker, index }
    }

    pub fn target(index: usize) -> Self {
        NodeId { role: Role::Target, index }
    }
}

/// Value of one matrix cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entry {
    Positive,
    Negative,
    Unknown,
}

impl Entry {
    pub fn from_label(label: u8) -> Entry {
        if label == 1 {
            Entry::Positive
        } else {
            Entry::Negative
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    num_attackers: usize,
    num_targets: usize,
    /// Sorted positive neighbours of each attacker.
    attacker_adj: Vec<Vec<usize>>,
    /// Sorted positive neighbours of each target.
    target_adj: Vec<Vec<usize>>,
    negatives: BTreeSet<(usize, usize)>,
    num_positives: usize,
}

impl InteractionMatrix {
    /// Builds the matrix from labelled records. Repeating a record with the
    /// same label is allowed; repeating it with the other label is not.
    pub fn build(num_attackers: usize, num_targets: usize, records: &[EdgeRecord]) -> Result<Self> {
        let mut positives = BTreeSet::new();
        let mut negatives = BTreeSet::new();
        for r in records {
            check_index(Role::Attacker, r.attacker, num_attackers)?;
            check_index(Role::Target, r.target, num_targets)?;
            let key = (r.attacker, r.target);
            let (mine, other) = if r.label == 1 {
                (&mut positives, &negatives)
            } else {
                (&mut negatives, &positives)
            };
            if other.contains(&key) {
                return Err(Error::ConflictingLabel { attacker: r.attacker, target: r.target });
            }
            mine.insert(key);
        }

        let mut attacker_adj = vec![Vec::new(); num_attackers];
        let mut target_adj = vec![Vec::new(); num_targets];
        // BTreeSet iteration is (a, t) ordered, so attacker lists come out sorted.
        for &(a, t) in &positives {
            attacker_adj[a].push(t);
            target_adj[t].push(a);
        }
        for list in &mut target_adj {
            list.sort_unstable();
        }
        Ok(InteractionMatrix {
            num_attackers,
            num_targets,
            attacker_adj,
            target_adj,
            negatives,
            num_positives: positives.len(),
        })
    }

    pub fn num_attackers(&self) -> usize {
        self.num_attackers
    }

    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    pub fn num_positives(&self) -> usize {
        self.num_positives
    }

    pub fn num_negatives(&self) -> usize {
        self.negatives.len()
    }

    pub fn size(&self, role: Role) -> usize {
        match role {
            Role::Attacker => self.num_attackers,
            Role::Target => self.num_targets,
        }
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        check_index(node.role, node.index, self.size(node.role))
    }

    pub fn entry(&self, attacker: usize, target: usize) -> Result<Entry> {
        check_index(Role::Attacker, attacker, self.num_attackers)?;
        check_index(Role::Target, target, self.num_targets)?;
        Ok(if self.is_positive(attacker, target) {
            Entry::Positive
        } else if self.negatives.contains(&(attacker, target)) {
            Entry::Negative
        } else {
            Entry::Unknown
        })
    }

    /// Unchecked positive lookup; indices must be in range.
    pub fn is_positive(&self, attacker: usize, target: usize) -> bool {
        self.attacker_adj[attacker].binary_search(&target).is_ok()
    }

    /// Raw sorted neighbour indices of `node` (opposite role).
    pub fn neighbor_indices(&self, node: NodeId) -> Result<&[usize]> {
        self.check_node(node)?;
        Ok(match node.role {
            Role::Attacker => &self.attacker_adj[node.index],
            Role::Target => &self.target_adj[node.index],
        })
    }

    /// Opposite-role nodes joined to `node` by a positive entry, ascending.
    pub fn positive_neighbors(&self, node: NodeId) -> Result<Vec<NodeId>> {
        let role = node.role.opposite();
        Ok(self
            .neighbor_indices(node)?
            .iter()
            .map(|&index| NodeId { role, index })
            .collect())
    }

    pub fn degree(&self, node: NodeId) -> Result<usize> {
        Ok(self.neighbor_indices(node)?.len())
    }

    /// Degree -> number of nodes of `role` with that many positive links.
    pub fn degree_histogram(&self, role: Role) -> BTreeMap<usize, usize> {
        let lists = match role {
            Role::Attacker => &self.attacker_adj,
            Role::Target => &self.target_adj,
        };
        let mut hist = BTreeMap::new();
        for l in lists {
            *hist.entry(l.len()).or_insert(0) += 1;
        }
        hist
    }

    /// All positive pairs in `(attacker, target)` order.
    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.attacker_adj
            .iter()
            .enumerate()
            .flat_map(|(a, ts)| ts.iter().map(move |&t| (a, t)))
    }

    pub fn negatives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.negatives.iter().copied()
    }

    /// Labelled records equivalent to this matrix, positives first.
    pub fn to_records(&self) -> Vec<EdgeRecord> {
        self.positives()
            .map(|(a, t)| EdgeRecord::new(a, t, 1))
            .chain(self.negatives().map(|(a, t)| EdgeRecord::new(a, t, 0)))
            .collect()
    }
}

fn check_index(role: Role, index: usize, bound: usize) -> Result<()> {
    if index < bound {
        Ok(())
    } else {
        Err(Error::OutOfRange { role, index, bound })
    }
}
