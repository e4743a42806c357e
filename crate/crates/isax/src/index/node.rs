//! Tree nodes. The root is a fan-out map keyed by the first bit of every
//! segment; below it, inner nodes split one segment by one extra bit and
//! leaves hold series identifiers.

use std::collections::BTreeMap;

use crate::sax::IsaxWord;
use crate::series::SeriesId;

/// Root of the index: one subtree per populated first-bits key.
#[derive(Debug)]
pub struct RootNode {
    pub(crate) subtrees: BTreeMap<u64, Node>,
}

impl RootNode {
    pub(crate) fn empty() -> Self {
        Self { subtrees: BTreeMap::new() }
    }

    pub fn subtree(&self, key: u64) -> Option<&Node> {
        self.subtrees.get(&key)
    }

    /// Subtrees in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &Node)> {
        self.subtrees.iter().map(|(&k, n)| (k, n))
    }

    pub fn len(&self) -> usize {
        self.subtrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtrees.is_empty()
    }

    pub fn num_leaves(&self) -> usize {
        let mut leaves = 0;
        for node in self.subtrees.values() {
            node.for_each_leaf(&mut |_| leaves += 1);
        }
        leaves
    }
}

#[derive(Debug)]
pub(crate) enum NodeKind {
    Inner {
        split_segment: u16,
        /// Children indexed by the value of the refined bit.
        children: Box<[Node; 2]>,
    },
    Leaf {
        entries: Vec<SeriesId>,
        /// Set when the leaf exceeds capacity but no split can separate its
        /// contents (all segments at maximum cardinality, or duplicates).
        overflow: bool,
    },
}

#[derive(Debug)]
pub struct Node {
    pub(crate) word: IsaxWord,
    pub(crate) kind: NodeKind,
}

impl Node {
    pub(crate) fn leaf(word: IsaxWord, entries: Vec<SeriesId>) -> Self {
        Self { word, kind: NodeKind::Leaf { entries, overflow: false } }
    }

    /// iSAX word shared (as a prefix) by every series below this node.
    pub fn word(&self) -> &IsaxWord {
        &self.word
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    /// Leaf entry identifiers; `None` for inner nodes. Each entry's full
    /// iSAX word lives in the index's SAX array.
    pub fn entries(&self) -> Option<&[SeriesId]> {
        match &self.kind {
            NodeKind::Leaf { entries, .. } => Some(entries),
            NodeKind::Inner { .. } => None,
        }
    }

    pub fn is_overflow(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { overflow: true, .. })
    }

    /// Segment refined when this node split; `None` for leaves.
    pub fn split_segment(&self) -> Option<u16> {
        match &self.kind {
            NodeKind::Inner { split_segment, .. } => Some(*split_segment),
            NodeKind::Leaf { .. } => None,
        }
    }

    /// Children `[bit 0, bit 1]`; `None` for leaves.
    pub fn children(&self) -> Option<[&Node; 2]> {
        match &self.kind {
            NodeKind::Inner { children, .. } => Some([&children[0], &children[1]]),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        match &self.kind {
            NodeKind::Leaf { .. } => f(self),
            NodeKind::Inner { children, .. } => {
                children[0].for_each_leaf(f);
                children[1].for_each_leaf(f);
            }
        }
    }
}
