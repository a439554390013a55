//! Key recovery against vaults whose zero bits all share one fake template.
//!
//! Two biocodes whose word `t` sits at the same offset with the same length
//! leak the parity of the same template bits. Biocodes are grouped by their
//! word-length prefix and split by the leaked parity of the current word.
//! With exactly two source templates, a group that splits into two non-empty
//! parity classes has one genuine class and one fake class. A group that
//! does not split is regrouped on the next word.
//!
//! When the tree gets too bushy, labels are instead propagated across every
//! word slot the biocodes share, prefix-aligned or not.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use super::RecoveryReport;
use crate::bitcore::BitString;
use crate::error::{Error, Result};
use crate::vault::{Key, PublicVault};

/// Default cap on digest evaluations spent after the first candidate pass.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Node of the partition tree. Members share the word lengths in
/// `layout_prefix`, and for `word_depth > 1` they also share the leaked
/// parities of every earlier word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupNode {
    /// 1-based index of the word examined at this node.
    pub word_depth: usize,
    /// Lengths of words `1..=word_depth`.
    pub layout_prefix: Vec<usize>,
    /// 0-based slot indices, ascending.
    pub members: Vec<usize>,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    /// Both classes populated; `classes[z]` holds members with parity `z`.
    Split { classes: [Vec<usize>; 2] },
    /// A single parity class, regrouped on the next word.
    Descend { parity: bool, children: Vec<GroupNode> },
    /// No split anywhere in this subtree, down to the final word.
    Unsplit,
}

impl GroupNode {
    pub fn is_leaf(&self) -> bool {
        !matches!(self.kind, NodeKind::Descend { .. })
    }

    fn has_split(&self) -> bool {
        match &self.kind {
            NodeKind::Split { .. } => true,
            NodeKind::Descend { children, .. } => children.iter().any(GroupNode::has_split),
            NodeKind::Unsplit => false,
        }
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a GroupNode>) {
        match &self.kind {
            NodeKind::Descend { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
            _ => out.push(self),
        }
    }

    fn max_depth(&self) -> usize {
        match &self.kind {
            NodeKind::Descend { children, .. } => children
                .iter()
                .map(GroupNode::max_depth)
                .max()
                .unwrap_or(self.word_depth),
            _ => self.word_depth,
        }
    }
}

/// Partition of all slots, one root per first-word length (shortest first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupPartition {
    pub roots: Vec<GroupNode>,
}

impl GroupPartition {
    pub fn build(view: &PublicVault<'_>) -> Self {
        let all: Vec<usize> = (0..view.biocodes.len()).collect();
        GroupPartition {
            roots: regroup(view, &all, 0, &[]),
        }
    }

    /// Leaves in depth-first order, which fixes the candidate numbering.
    pub fn leaves(&self) -> Vec<&GroupNode> {
        let mut out = Vec::new();
        self.roots.iter().for_each(|r| r.collect_leaves(&mut out));
        out
    }

    pub fn split_leaves(&self) -> usize {
        self.leaves()
            .iter()
            .filter(|l| matches!(l.kind, NodeKind::Split { .. }))
            .count()
    }

    pub fn max_depth(&self) -> usize {
        self.roots.iter().map(GroupNode::max_depth).max().unwrap_or(0)
    }

    /// Number of first-pass candidates, `2^leaves`, or `None` on overflow.
    pub fn candidate_count(&self) -> Option<u64> {
        1u64.checked_shl(self.leaves().len() as u32)
    }

    /// Candidate `index` of `2^leaves`. Leaf `k` reads bit `leaves - 1 - k`
    /// of the index: for a split leaf, bit value `z` marks class `z` genuine;
    /// for an unsplit leaf it is the value given to every member.
    pub fn candidate(&self, index: u64, key_len: usize) -> BitString {
        let leaves = self.leaves();
        let count = leaves.len();
        let mut key = BitString::zeros(key_len);
        for (k, leaf) in leaves.iter().enumerate() {
            let bit = (index >> (count - 1 - k)) & 1 == 1;
            match &leaf.kind {
                NodeKind::Split { classes } => {
                    for &i in &classes[usize::from(bit)] {
                        key.set(i, true);
                    }
                }
                NodeKind::Unsplit => {
                    for &i in &leaf.members {
                        key.set(i, bit);
                    }
                }
                NodeKind::Descend { .. } => unreachable!("leaves never descend"),
            }
        }
        key
    }

    /// All first-pass candidates in enumeration order.
    pub fn candidates(&self, key_len: usize) -> Vec<BitString> {
        let count = self.candidate_count().expect("candidate count fits in u64");
        (0..count).map(|i| self.candidate(i, key_len)).collect()
    }
}

/// Groups `members` (which share `prefix`) by the length of word `depth`
/// (0-based) and builds one node per group.
fn regroup(view: &PublicVault<'_>, members: &[usize], depth: usize, prefix: &[usize]) -> Vec<GroupNode> {
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in members {
        let lengths = view.biocodes[i].layout().lengths();
        by_len.entry(lengths[depth]).or_default().push(i);
    }
    by_len
        .into_iter()
        .map(|(len, group)| {
            let mut p = prefix.to_vec();
            p.push(len);
            build_node(view, group, depth, p)
        })
        .collect()
}

fn build_node(view: &PublicVault<'_>, members: Vec<usize>, depth: usize, prefix: Vec<usize>) -> GroupNode {
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for &i in &members {
        classes[usize::from(view.biocodes[i].leaked_parity(depth))].push(i);
    }
    let word_depth = depth + 1;
    if !classes[0].is_empty() && !classes[1].is_empty() {
        return GroupNode {
            word_depth,
            layout_prefix: prefix,
            members,
            kind: NodeKind::Split { classes },
        };
    }
    let parity = classes[0].is_empty();
    let is_last_word = view.biocodes[members[0]].d2() == word_depth;
    if !is_last_word {
        let children = regroup(view, &members, depth + 1, &prefix);
        if children.iter().any(GroupNode::has_split) {
            return GroupNode {
                word_depth,
                layout_prefix: prefix,
                members,
                kind: NodeKind::Descend { parity, children },
            };
        }
    }
    GroupNode {
        word_depth,
        layout_prefix: prefix,
        members,
        kind: NodeKind::Unsplit,
    }
}

/// Largest first pass run over the partition tree.
pub const TREE_PASS_LIMIT: u64 = 16;

/// Biocodes linked by shared word slots, each with its label relative to
/// the first member of its component.
///
/// A slot is an exact `(offset, length)` pair. When both parities leak on a
/// slot, the two source templates differ there, so every biocode covering
/// it is genuine or fake according to its parity: equal parities force equal
/// labels, different parities force different labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotComponents {
    /// Each component lists `(slot, flipped)`; `flipped` members take the
    /// opposite label of the component's first member.
    pub components: Vec<Vec<(usize, bool)>>,
}

impl SlotComponents {
    /// `None` when the constraints contradict each other, which no vault
    /// with a single shared fake can produce.
    pub fn build(view: &PublicVault<'_>) -> Option<Self> {
        let l = view.biocodes.len();
        let mut uf = ParityUnionFind::new(l);
        let mut slots: BTreeMap<(usize, usize), Vec<(usize, bool)>> = BTreeMap::new();
        for (i, bc) in view.biocodes.iter().enumerate() {
            for (j, slot) in bc.layout().words().enumerate() {
                slots.entry(slot).or_default().push((i, bc.leaked_parity(j)));
            }
        }
        for covering in slots.values() {
            let (first, z0) = covering[0];
            if covering.iter().all(|&(_, z)| z == z0) {
                continue;
            }
            for &(i, z) in &covering[1..] {
                if !uf.union(first, i, z != z0) {
                    return None;
                }
            }
        }
        let mut index_of_root: BTreeMap<usize, usize> = BTreeMap::new();
        let mut components: Vec<Vec<(usize, bool)>> = Vec::new();
        for i in 0..l {
            let (root, rel) = uf.find(i);
            let k = *index_of_root.entry(root).or_insert_with(|| {
                components.push(Vec::new());
                components.len() - 1
            });
            components[k].push((i, rel));
        }
        for comp in &mut components {
            let base = comp[0].1;
            comp.iter_mut().for_each(|m| m.1 ^= base);
        }
        Some(SlotComponents { components })
    }

    /// Candidate `index`: component `k` reads bit `k` of the index as the
    /// label of its first member.
    pub fn candidate(&self, index: u64, key_len: usize) -> BitString {
        let mut key = BitString::zeros(key_len);
        for (k, comp) in self.components.iter().enumerate() {
            let bit = k < 64 && (index >> k) & 1 == 1;
            for &(i, flipped) in comp {
                key.set(i, bit ^ flipped);
            }
        }
        key
    }
}

struct ParityUnionFind {
    parent: Vec<usize>,
    /// Label parity relative to the parent.
    rel: Vec<bool>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        ParityUnionFind {
            parent: (0..n).collect(),
            rel: vec![false; n],
        }
    }

    fn find(&mut self, i: usize) -> (usize, bool) {
        let p = self.parent[i];
        if p == i {
            return (i, false);
        }
        let (root, rel_p) = self.find(p);
        self.parent[i] = root;
        self.rel[i] ^= rel_p;
        (root, self.rel[i])
    }

    /// Records `label(a) ^ label(b) == differ`; false on contradiction.
    fn union(&mut self, a: usize, b: usize, differ: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa ^ pb == differ;
        }
        self.parent[ra] = rb;
        self.rel[ra] = pa ^ pb ^ differ;
        true
    }
}

/// Recovers the key of a shared-fake vault.
///
/// The first pass tests the `2^leaves` labelings of the partition tree when
/// there are at most [`TREE_PASS_LIMIT`] of them. Otherwise, or if none
/// matches, the fallback tests the `2^components` labelings of
/// [`SlotComponents`], spending at most `budget` digests.
pub fn recover_key(view: &PublicVault<'_>, budget: u64) -> Result<RecoveryReport> {
    let start = Instant::now();
    let l = view.biocodes.len();
    let partition = GroupPartition::build(view);
    let leaves = partition.leaves();
    let mut report = RecoveryReport {
        recovered_key: None,
        candidates_tested: 0,
        groups: leaves.len(),
        max_depth: partition.max_depth(),
        fallback_used: false,
        elapsed: Default::default(),
        eliminated_per_depth: Vec::new(),
    };
    let finish = |report: &mut RecoveryReport, key: BitString| -> Result<()> {
        report.recovered_key = Some(Key::new(key)?);
        report.elapsed = start.elapsed();
        Ok(())
    };

    if let Some(count) = partition.candidate_count().filter(|&c| c <= TREE_PASS_LIMIT) {
        for index in 0..count {
            let candidate = partition.candidate(index, l);
            report.candidates_tested += 1;
            if view.matches(&candidate) {
                finish(&mut report, candidate)?;
                return Ok(report);
            }
        }
    }

    report.fallback_used = true;
    let Some(slots) = SlotComponents::build(view) else {
        return Err(Error::NoCandidateMatched {
            tested: report.candidates_tested,
        });
    };
    let labelings = 1u64.checked_shl(slots.components.len() as u32);
    let mut spent = 0u64;
    let mut index = 0u64;
    while Some(index) != labelings {
        if spent >= budget {
            return Err(Error::BudgetExceeded {
                tested: report.candidates_tested,
            });
        }
        let candidate = slots.candidate(index, l);
        spent += 1;
        report.candidates_tested += 1;
        if view.matches(&candidate) {
            finish(&mut report, candidate)?;
            return Ok(report);
        }
        index += 1;
    }
    Err(Error::NoCandidateMatched {
        tested: report.candidates_tested,
    })
}
