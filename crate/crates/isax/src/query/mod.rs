//! Exact 1-NN query engines over a built index.
//!
//! Three engines answer the same question and must agree on the distance:
//!
//! * [`Index::search_tree`] — tree traversal with concurrent minimum priority
//!   queues of leaves and best-so-far pruning;
//! * [`Index::search_flat`] — flat scan of the SAX array into a candidate
//!   list, refined by parallel real-distance workers;
//! * [`search_scan`] — serial early-abandoning scan, the correctness oracle.
//!
//! One query runs at a time; the engines parallelize internally.

mod flat;
mod tree;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::index::{Index, Node};
use crate::sax::{first_bits_key, lower_bound_distance, IsaxWord};
use crate::series::{euclidean_abandoning, paa, PaaSummary, SeriesCollection, SeriesId};

pub use flat::{search_flat, FlatSeed};
pub use tree::search_tree;

/// Worker-pool shape for one query.
#[derive(Clone, Debug)]
pub struct QueryOpts {
    pub num_workers: usize,
    /// Number of concurrent minimum priority queues (tree engine only);
    /// one per worker by default.
    pub num_queues: usize,
}

impl QueryOpts {
    pub fn with_workers(num_workers: usize) -> Self {
        Self { num_workers, num_queues: num_workers }
    }

    pub fn single_threaded() -> Self {
        Self::with_workers(1)
    }

    fn assert_valid(&self) {
        assert!(self.num_workers >= 1, "at least one worker");
        assert!(self.num_queues >= 1, "at least one queue");
    }
}

impl Default for QueryOpts {
    fn default() -> Self {
        Self::with_workers(crate::index::default_workers())
    }
}

/// One successful tightening of the best-so-far distance.
#[derive(Clone, Copy, Debug)]
pub struct BsfUpdate {
    pub previous: f64,
    pub current: f64,
}

/// A pop that made a worker give up its queue: the popped lower bound had
/// reached the best-so-far. `next_lb` is the head left behind.
#[derive(Clone, Copy, Debug)]
pub struct AbandonedPop {
    pub popped_lb: f64,
    pub next_lb: Option<f64>,
    pub bsf: f64,
}

/// Work counters and phase timings for one query.
#[derive(Clone, Debug, Default)]
pub struct QueryStats {
    /// Lower-bound distance computations (node words and SAX rows).
    pub lb_calcs: u64,
    /// Real-distance computations started, abandoned ones included.
    pub real_calcs: u64,
    /// Real-distance computations cut short by early abandoning.
    pub abandoned_calcs: u64,
    /// Leaves never scanned (tree engine) or series filtered out by their
    /// lower bound (flat engine).
    pub pruned: u64,
    /// Entries of the flat engine's candidate list; zero elsewhere.
    pub candidates: u64,
    pub queue_abandonments: u64,
    /// Elements inserted per priority queue during the fill phase.
    pub queue_fill: Vec<u64>,
    pub bsf_updates: Vec<BsfUpdate>,
    pub abandoned_pops: Vec<AbandonedPop>,
    /// Initial-answer phase (tree descent plus one leaf of real distances).
    pub approx_time: Duration,
    /// Traversal/queue-fill phase (tree) or lower-bound filter (flat).
    pub fill_time: Duration,
    /// Queue processing (tree) or candidate refinement (flat).
    pub refine_time: Duration,
}

/// An exact nearest-neighbor answer.
#[derive(Clone, Debug)]
pub struct QueryAnswer {
    pub id: SeriesId,
    pub distance: f64,
    pub stats: QueryStats,
}

/// Per-worker counters, merged into [`QueryStats`] after the pool joins.
#[derive(Default)]
pub(crate) struct LocalStats {
    pub lb_calcs: u64,
    pub real_calcs: u64,
    pub abandoned_calcs: u64,
    pub leaves_scanned: u64,
    pub queue_abandonments: u64,
    pub bsf_updates: Vec<BsfUpdate>,
    pub abandoned_pops: Vec<AbandonedPop>,
    pub fill_elapsed: Duration,
    pub refine_elapsed: Duration,
}

impl QueryStats {
    pub(crate) fn absorb(&mut self, local: LocalStats) {
        self.lb_calcs += local.lb_calcs;
        self.real_calcs += local.real_calcs;
        self.abandoned_calcs += local.abandoned_calcs;
        self.queue_abandonments += local.queue_abandonments;
        self.bsf_updates.extend(local.bsf_updates);
        self.abandoned_pops.extend(local.abandoned_pops);
        self.fill_time = self.fill_time.max(local.fill_elapsed);
        self.refine_time = self.refine_time.max(local.refine_elapsed);
    }
}

/// Best-so-far state shared by one query's workers.
///
/// The pruning threshold is a lock-free `f64` tightened by compare-and-swap;
/// stale reads are harmless because the value only shrinks. The answer pair
/// sits behind a mutex taken only on improvements, with exact ties resolved
/// toward the lower series id so answers do not depend on scheduling.
pub(crate) struct SharedBsf {
    bits: AtomicU64,
    best: Mutex<Option<(f64, SeriesId)>>,
}

impl SharedBsf {
    pub fn new(seed: Option<(f64, SeriesId)>) -> Self {
        let distance = seed.map_or(f64::INFINITY, |(d, _)| d);
        Self { bits: AtomicU64::new(distance.to_bits()), best: Mutex::new(seed) }
    }

    /// Current pruning threshold.
    pub fn threshold(&self) -> f64 {
        f64::from_bits(self.bits.load(Ordering::Acquire))
    }

    /// Offers a computed real distance; tightens the threshold and the
    /// answer pair when it improves on them.
    pub fn improve(&self, distance: f64, id: SeriesId, log: &mut Vec<BsfUpdate>) {
        let mut current = self.bits.load(Ordering::Relaxed);
        while distance < f64::from_bits(current) {
            match self.bits.compare_exchange_weak(
                current,
                distance.to_bits(),
                Ordering::AcqRel,
                Ordering::Relaxed,
            ) {
                Ok(_) => {
                    log.push(BsfUpdate { previous: f64::from_bits(current), current: distance });
                    break;
                }
                Err(actual) => current = actual,
            }
        }
        if distance <= self.threshold() {
            let mut best = self.best.lock().unwrap();
            let replace = match *best {
                None => true,
                Some((bd, bid)) => distance < bd || (distance == bd && id < bid),
            };
            if replace {
                *best = Some((distance, id));
            }
        }
    }

    pub fn best(&self) -> Option<(f64, SeriesId)> {
        *self.best.lock().unwrap()
    }
}

/// Approximate answer: the leaf the query's own bits lead to, scanned fully.
pub struct ApproxAnswer<'a> {
    pub leaf: &'a Node,
    /// Smallest real distance in the leaf and its series id; `None` only for
    /// an empty leaf.
    pub best: Option<(f64, SeriesId)>,
    pub lb_calcs: u64,
    pub real_calcs: u64,
    pub abandoned_calcs: u64,
}

/// Descends from the root along the query's iSAX bits and scans the reached
/// leaf for an initial best-so-far. When the query's first-bits key has no
/// subtree, the subtree with the smallest lower bound stands in.
///
/// `None` means the index is empty.
pub fn approximate_search<'a>(
    index: &'a Index,
    raw: &SeriesCollection,
    query: &[f32],
) -> Option<ApproxAnswer<'a>> {
    let q_paa = query_paa(index, query);
    let q_symbols = IsaxWord::uniform_from_paa(&q_paa, index.config().max_bits, index.breakpoints());
    approximate_internal(index, raw, query, &q_paa, q_symbols.symbols())
}

pub(crate) fn approximate_internal<'a>(
    index: &'a Index,
    raw: &SeriesCollection,
    query: &[f32],
    q_paa: &PaaSummary,
    q_symbols: &[u16],
) -> Option<ApproxAnswer<'a>> {
    assert_eq!(raw.len(), index.series_count(), "collection does not match the index");
    let root = index.root();
    if root.is_empty() {
        return None;
    }
    let max_bits = index.config().max_bits;
    let n = index.config().series_len;
    let mut lb_calcs = 0u64;

    let key = first_bits_key(q_symbols, max_bits);
    let subtree = root.subtree(key).unwrap_or_else(|| {
        // no subtree under the query's own key: fall back to the root
        // subtree with the smallest lower bound
        let (_, node) = root
            .iter()
            .map(|(_, node)| {
                lb_calcs += 1;
                (lower_bound_distance(q_paa, node.word(), index.breakpoints(), n), node)
            })
            .reduce(|best, next| if next.0 < best.0 { next } else { best })
            .expect("root is not empty");
        node
    });

    let leaf = descend(subtree, q_symbols, max_bits);
    let mut best: Option<(f64, SeriesId)> = None;
    let mut real_calcs = 0u64;
    let mut abandoned_calcs = 0u64;
    for &id in leaf.entries().expect("descent ends at a leaf") {
        let cutoff = best.map_or(f64::INFINITY, |(d, _)| d);
        real_calcs += 1;
        match euclidean_abandoning(query, raw.series(id), cutoff) {
            Some(d) => {
                let better = match best {
                    None => true,
                    Some((bd, bid)) => d < bd || (d == bd && id < bid),
                };
                if better {
                    best = Some((d, id));
                }
            }
            None => abandoned_calcs += 1,
        }
    }
    Some(ApproxAnswer { leaf, best, lb_calcs, real_calcs, abandoned_calcs })
}

/// Follows the query's bits down to a leaf: at each inner node, take the
/// child whose extra bit matches the query's bit on the split segment.
pub(crate) fn descend<'a>(subtree: &'a Node, q_symbols: &[u16], max_bits: u8) -> &'a Node {
    let mut node = subtree;
    loop {
        match node.children() {
            None => return node,
            Some(children) => {
                let seg = node.split_segment().expect("inner node") as usize;
                let child_bits = children[0].word().bits()[seg];
                let bit = (q_symbols[seg] >> (max_bits - child_bits)) & 1;
                node = children[bit as usize];
            }
        }
    }
}

/// Serial early-abandoning scan over the whole collection: the exactness
/// oracle the other engines are checked against. Ties go to the lowest id.
pub fn search_scan(raw: &SeriesCollection, query: &[f32]) -> Option<(SeriesId, f64)> {
    if raw.is_empty() {
        return None;
    }
    assert_eq!(query.len(), raw.series_len(), "query length mismatch");
    let mut best: Option<(f64, SeriesId)> = None;
    for (i, series) in raw.iter().enumerate() {
        let cutoff = best.map_or(f64::INFINITY, |(d, _)| d);
        if let Some(d) = euclidean_abandoning(query, series, cutoff) {
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i as SeriesId));
            }
        }
    }
    best.map(|(d, id)| (id, d))
}

pub(crate) fn query_paa(index: &Index, query: &[f32]) -> PaaSummary {
    assert_eq!(query.len(), index.config().series_len, "query length mismatch");
    paa(query, index.config().segments).expect("segment count divides series length")
}

impl Index {
    /// Exact 1-NN through the tree engine: approximate first answer, pruned
    /// traversal into round-robin priority queues, then queue processing
    /// with per-series lower bounds and early-abandoning real distances.
    pub fn search_tree(
        &self,
        raw: &SeriesCollection,
        query: &[f32],
        opts: &QueryOpts,
    ) -> Option<QueryAnswer> {
        tree::search_tree(self, raw, query, opts)
    }

    /// Exact 1-NN through the flat engine, seeded by [`approximate_search`].
    ///
    /// The returned counters cover the filter and refine phases; the seeding
    /// descent contributes only to `approx_time`.
    pub fn search_flat(
        &self,
        raw: &SeriesCollection,
        query: &[f32],
        opts: &QueryOpts,
    ) -> Option<QueryAnswer> {
        let start = Instant::now();
        let approx = approximate_search(self, raw, query)?;
        let seed = approx.best.map(|(distance, id)| FlatSeed { id, distance });
        let approx_time = start.elapsed();
        let mut answer =
            flat::search_flat(self.sax(), self.breakpoints(), raw, query, opts, seed)?;
        answer.stats.approx_time = approx_time;
        Some(answer)
    }
}
