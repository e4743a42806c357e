//! Two-stage parallel bulk loading.
//!
//! Stage 1 summarizes the collection: workers claim fixed-size chunks of
//! series through a shared atomic counter, write each series' max-cardinality
//! symbols into its own row of the SAX array, and append the series id to the
//! claiming worker's private part of the buffer keyed by the series' first
//! bits. Stage 2 turns buffers into subtrees: workers claim whole root
//! subtrees through a second counter, so no two workers ever touch the same
//! node and no locking is needed.
//!
//! The produced tree is canonical: within each buffer the records are sorted
//! by series id before insertion, which makes the result independent of the
//! worker count and of how chunks happened to be interleaved.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::sax::{first_bits_key, symbol_for, BreakpointTable, IsaxWord, SaxArray};
use crate::series::{paa_into, SeriesCollection, SeriesId};
use crate::Result;

use super::node::{Node, NodeKind, RootNode};
use super::IndexConfig;

/// Per-subtree record buffers, one private part per worker.
///
/// A record is logically a `(series id, iSAX word)` pair; the word is the
/// series' max-cardinality row in the SAX array produced alongside, so only
/// the id is stored here.
#[derive(Debug)]
pub struct IsaxBufferSet {
    parts: Vec<BTreeMap<u64, Vec<SeriesId>>>,
}

impl IsaxBufferSet {
    /// Number of per-worker parts.
    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn part(&self, worker: usize) -> &BTreeMap<u64, Vec<SeriesId>> {
        &self.parts[worker]
    }

    /// Union of populated buffer keys, ascending.
    pub fn keys(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self.parts.iter().flat_map(|p| p.keys().copied()).collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    /// Total records across all buffers and parts.
    pub fn record_count(&self) -> usize {
        self.parts.iter().map(|p| p.values().map(Vec::len).sum::<usize>()).sum()
    }

    /// Records of one buffer, parts concatenated in worker order.
    pub fn records_for(&self, key: u64) -> impl Iterator<Item = SeriesId> + '_ {
        self.parts.iter().filter_map(move |p| p.get(&key)).flatten().copied()
    }
}

/// Stage 1: summarize every series, filling the SAX array and the per-worker
/// buffer parts. Series must already be z-normalized.
pub fn summarize_stage(
    raw: &SeriesCollection,
    table: &BreakpointTable,
    config: &IndexConfig,
) -> Result<(IsaxBufferSet, SaxArray)> {
    config.validate()?;
    config.check_collection(raw)?;

    let w = config.segments;
    let max_bits = config.max_bits;
    let count = raw.len();
    let num_chunks = count.div_ceil(config.chunk_size);
    let mut symbols = vec![0u16; count * w];
    let mut parts: Vec<BTreeMap<u64, Vec<SeriesId>>> =
        (0..config.num_workers).map(|_| BTreeMap::new()).collect();

    {
        // Chunk rows are claimed through `next_chunk`, so each slot mutex is
        // taken exactly once and never contended.
        let slots: Vec<Mutex<&mut [u16]>> =
            symbols.chunks_mut(config.chunk_size * w).map(Mutex::new).collect();
        let slots = &slots;
        let next_chunk = &AtomicUsize::new(0);
        let level = table.level(max_bits);

        std::thread::scope(|scope| {
            for part in parts.iter_mut() {
                scope.spawn(move || {
                    let mut means = vec![0.0f64; w];
                    loop {
                        let chunk = next_chunk.fetch_add(1, Ordering::Relaxed);
                        if chunk >= num_chunks {
                            break;
                        }
                        let mut slot = slots[chunk].lock().unwrap();
                        let first = chunk * config.chunk_size;
                        for row in 0..slot.len() / w {
                            let id = (first + row) as SeriesId;
                            paa_into(raw.series(id), &mut means);
                            let dst = &mut slot[row * w..(row + 1) * w];
                            for (symbol, &mean) in dst.iter_mut().zip(means.iter()) {
                                *symbol = symbol_for(mean, level);
                            }
                            let key = first_bits_key(dst, max_bits);
                            part.entry(key).or_default().push(id);
                        }
                    }
                });
            }
        });
    }

    Ok((IsaxBufferSet { parts }, SaxArray::from_raw(symbols, w, max_bits)))
}

/// Stage 2: build every root subtree from its buffer. Workers claim whole
/// subtrees, so their outputs are disjoint; the records of each buffer are
/// sorted by id first so the tree does not depend on stage-1 interleaving.
pub fn build_stage(buffers: &IsaxBufferSet, sax: &SaxArray, config: &IndexConfig) -> RootNode {
    let keys = buffers.keys();
    let next_key = &AtomicUsize::new(0);
    let keys_ref = &keys;
    let mut outputs: Vec<Vec<(u64, Node)>> =
        (0..config.num_workers).map(|_| Vec::new()).collect();

    std::thread::scope(|scope| {
        for out in outputs.iter_mut() {
            scope.spawn(move || loop {
                let i = next_key.fetch_add(1, Ordering::Relaxed);
                if i >= keys_ref.len() {
                    break;
                }
                let key = keys_ref[i];
                let mut ids: Vec<SeriesId> = buffers.records_for(key).collect();
                ids.sort_unstable();
                let mut subtree =
                    Node::leaf(IsaxWord::from_first_bits(key, config.segments), Vec::new());
                for id in ids {
                    insert(&mut subtree, id, sax, config);
                }
                out.push((key, subtree));
            });
        }
    });

    RootNode { subtrees: outputs.into_iter().flatten().collect() }
}

fn insert(node: &mut Node, id: SeriesId, sax: &SaxArray, config: &IndexConfig) {
    match &mut node.kind {
        NodeKind::Inner { split_segment, children } => {
            let seg = *split_segment as usize;
            let child_bits = children[0].word.bits()[seg];
            let bit = (sax.word(id)[seg] >> (config.max_bits - child_bits)) & 1;
            insert(&mut children[bit as usize], id, sax, config);
        }
        NodeKind::Leaf { entries, .. } => entries.push(id),
    }
    if let NodeKind::Leaf { entries, .. } = &node.kind {
        if entries.len() > config.leaf_capacity {
            try_split(node, id, sax, config);
        }
    }
}

/// Splits an over-capacity leaf on the segment giving the most balanced
/// children (ties to the lowest segment index). When no refinable segment
/// exists, or the contents are exact duplicates that no refinement can ever
/// separate, the leaf is kept over capacity instead.
fn try_split(node: &mut Node, newest: SeriesId, sax: &SaxArray, config: &IndexConfig) {
    let max_bits = config.max_bits;
    let (entries, was_overflow) = match &node.kind {
        NodeKind::Leaf { entries, overflow } => (entries, *overflow),
        NodeKind::Inner { .. } => unreachable!("split of an inner node"),
    };
    let len = entries.len();

    let refinable =
        (0..node.word.segments()).filter(|&s| node.word.bits()[s] < max_bits);
    if was_overflow {
        // Already known un-splittable; only a new distinct summary changes that.
        if refinable.clone().next().is_none() || sax.word(newest) == sax.word(entries[0]) {
            return;
        }
    }

    let mut best: Option<(usize, usize)> = None; // (imbalance, segment)
    for seg in refinable {
        let shift = max_bits - node.word.bits()[seg] - 1;
        let ones =
            entries.iter().filter(|&&id| (sax.word(id)[seg] >> shift) & 1 == 1).count();
        let imbalance = len.abs_diff(2 * ones);
        if best.is_none_or(|(bi, _)| imbalance < bi) {
            best = Some((imbalance, seg));
        }
    }

    let one_sided = match best {
        None => true, // every segment at maximum cardinality
        Some((imbalance, _)) => {
            // A fully one-sided split still makes progress unless the
            // summaries are identical at full cardinality.
            imbalance == len
                && entries.iter().all(|&id| sax.word(id) == sax.word(entries[0]))
        }
    };
    if one_sided {
        if let NodeKind::Leaf { overflow, .. } = &mut node.kind {
            if !*overflow {
                *overflow = true;
                eprintln!(
                    "warning: leaf {:?} holds {} entries (capacity {}) but cannot split; \
                     keeping overflow leaf",
                    node.word.symbols(),
                    len,
                    config.leaf_capacity
                );
            }
        }
        return;
    }

    let (_, seg) = best.expect("a refinable segment exists");
    let shift = max_bits - node.word.bits()[seg] - 1;
    let entries = match &mut node.kind {
        NodeKind::Leaf { entries, .. } => std::mem::take(entries),
        NodeKind::Inner { .. } => unreachable!(),
    };
    let (mut zeros, mut ones) = (Vec::new(), Vec::new());
    for id in entries {
        if (sax.word(id)[seg] >> shift) & 1 == 1 {
            ones.push(id);
        } else {
            zeros.push(id);
        }
    }
    let children = Box::new([
        Node::leaf(node.word.refined(seg, 0), zeros),
        Node::leaf(node.word.refined(seg, 1), ones),
    ]);
    node.kind = NodeKind::Inner { split_segment: seg as u16, children };

    if let NodeKind::Inner { children, .. } = &mut node.kind {
        for child in children.iter_mut() {
            if child.entries().is_some_and(|e| e.len() > config.leaf_capacity) {
                try_split(child, newest, sax, config);
            }
        }
    }
}
