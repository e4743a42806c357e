//! Tree engine: pruned traversal feeding concurrent minimum priority queues
//! of leaves, processed by the same workers until every queue is finished.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::index::{Index, Node};
use crate::sax::{lower_bound_distance, lower_bound_uniform, IsaxWord, SaxArray};
use crate::series::{euclidean_abandoning, PaaSummary, SeriesCollection};

use super::{
    approximate_internal, AbandonedPop, LocalStats, QueryAnswer, QueryOpts, QueryStats, SharedBsf,
};

struct QueueItem<'a> {
    lb: f64,
    leaf: &'a Node,
}

impl PartialEq for QueueItem<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.lb.total_cmp(&other.lb).is_eq()
    }
}
impl Eq for QueueItem<'_> {}
impl PartialOrd for QueueItem<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueItem<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.lb.total_cmp(&other.lb)
    }
}

/// One synchronized minimum priority queue of non-pruned leaves. `finished`
/// flips once the queue empties or any worker abandons it; the min-heap
/// order guarantees nothing behind an abandoned head can beat the BSF.
struct LeafQueue<'a> {
    heap: Mutex<BinaryHeap<Reverse<QueueItem<'a>>>>,
    finished: AtomicBool,
    inserted: AtomicU64,
}

impl<'a> LeafQueue<'a> {
    fn new() -> Self {
        Self {
            heap: Mutex::new(BinaryHeap::new()),
            finished: AtomicBool::new(false),
            inserted: AtomicU64::new(0),
        }
    }

    fn push(&self, lb: f64, leaf: &'a Node) {
        self.heap.lock().unwrap().push(Reverse(QueueItem { lb, leaf }));
        self.inserted.fetch_add(1, Ordering::Relaxed);
    }
}

pub fn search_tree(
    index: &Index,
    raw: &SeriesCollection,
    query: &[f32],
    opts: &QueryOpts,
) -> Option<QueryAnswer> {
    opts.assert_valid();
    let q_paa = super::query_paa(index, query);
    let max_bits = index.config().max_bits;
    let q_word = IsaxWord::uniform_from_paa(&q_paa, max_bits, index.breakpoints());
    let q_symbols = q_word.symbols();

    let approx_start = Instant::now();
    let approx = approximate_internal(index, raw, query, &q_paa, q_symbols)?;
    let bsf = SharedBsf::new(approx.best);
    let approx_time = approx_start.elapsed();

    let subtrees: Vec<&Node> = index.root().iter().map(|(_, node)| node).collect();
    let queues: Vec<LeafQueue> = (0..opts.num_queues).map(|_| LeafQueue::new()).collect();
    let claim = AtomicUsize::new(0);
    let fill_barrier = std::sync::Barrier::new(opts.num_workers);
    let mut locals: Vec<LocalStats> = Vec::new();

    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(opts.num_workers);
        for worker in 0..opts.num_workers {
            let q_paa = &q_paa;
            let bsf = &bsf;
            let queues = &queues;
            let claim = &claim;
            let fill_barrier = &fill_barrier;
            let subtrees = &subtrees;
            let approx_leaf: &Node = approx.leaf;
            handles.push(scope.spawn(move || {
                let mut local = LocalStats::default();
                let phase_start = Instant::now();

                // fill: claim whole root subtrees, push non-pruned leaves
                // round-robin; the BSF cannot move during this phase
                let threshold = bsf.threshold();
                let mut next_queue = worker % queues.len();
                loop {
                    let i = claim.fetch_add(1, Ordering::Relaxed);
                    if i >= subtrees.len() {
                        break;
                    }
                    traverse(
                        subtrees[i],
                        q_paa,
                        index,
                        threshold,
                        approx_leaf,
                        &mut next_queue,
                        queues,
                        &mut local,
                    );
                }
                local.fill_elapsed = phase_start.elapsed();
                fill_barrier.wait();

                let phase_start = Instant::now();
                process_queues(worker, queues, index, raw, query, q_paa, bsf, &mut local);
                local.refine_elapsed = phase_start.elapsed();
                local
            }));
        }
        for handle in handles {
            locals.push(handle.join().expect("query worker panicked"));
        }
    });

    let mut stats = QueryStats {
        approx_time,
        lb_calcs: approx.lb_calcs,
        real_calcs: approx.real_calcs,
        abandoned_calcs: approx.abandoned_calcs,
        ..QueryStats::default()
    };
    let mut scanned = 1u64; // the approximate leaf
    for local in locals {
        scanned += local.leaves_scanned;
        stats.absorb(local);
    }
    stats.pruned = index.num_leaves() as u64 - scanned;
    stats.queue_fill = queues.iter().map(|q| q.inserted.load(Ordering::Relaxed)).collect();

    let (distance, id) = bsf.best().expect("non-empty index yields an answer");
    Some(QueryAnswer { id, distance, stats })
}

#[allow(clippy::too_many_arguments)]
fn traverse<'a>(
    node: &'a Node,
    q_paa: &PaaSummary,
    index: &Index,
    threshold: f64,
    approx_leaf: &Node,
    next_queue: &mut usize,
    queues: &[LeafQueue<'a>],
    local: &mut LocalStats,
) {
    local.lb_calcs += 1;
    let lb =
        lower_bound_distance(q_paa, node.word(), index.breakpoints(), index.config().series_len);
    if lb >= threshold {
        return;
    }
    match node.children() {
        Some(children) => {
            for child in children {
                traverse(child, q_paa, index, threshold, approx_leaf, next_queue, queues, local);
            }
        }
        None => {
            // the approximate leaf was already scanned in full
            if !std::ptr::eq(node, approx_leaf) {
                queues[*next_queue].push(lb, node);
                *next_queue = (*next_queue + 1) % queues.len();
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn process_queues(
    worker: usize,
    queues: &[LeafQueue],
    index: &Index,
    raw: &SeriesCollection,
    query: &[f32],
    q_paa: &PaaSummary,
    bsf: &SharedBsf,
    local: &mut LocalStats,
) {
    let sax = index.sax();
    let level = index.breakpoints().level(sax.max_bits());
    let scale = raw.series_len() as f64 / sax.segments() as f64;
    let num_queues = queues.len();
    let mut qi = worker % num_queues;
    let mut finished_streak = 0;
    while finished_streak < num_queues {
        let queue = &queues[qi];
        if queue.finished.load(Ordering::Acquire) {
            qi = (qi + 1) % num_queues;
            finished_streak += 1;
            continue;
        }
        finished_streak = 0;
        loop {
            let mut heap = queue.heap.lock().unwrap();
            let Some(Reverse(item)) = heap.pop() else {
                drop(heap);
                queue.finished.store(true, Ordering::Release);
                break;
            };
            let threshold = bsf.threshold();
            if item.lb >= threshold {
                let next_lb = heap.peek().map(|Reverse(next)| next.lb);
                drop(heap);
                local
                    .abandoned_pops
                    .push(AbandonedPop { popped_lb: item.lb, next_lb, bsf: threshold });
                if !queue.finished.swap(true, Ordering::AcqRel) {
                    local.queue_abandonments += 1;
                }
                break;
            }
            drop(heap);
            scan_leaf(item.leaf, sax, level, scale, raw, query, q_paa, bsf, local);
            local.leaves_scanned += 1;
        }
        qi = (qi + 1) % num_queues;
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_leaf(
    leaf: &Node,
    sax: &SaxArray,
    level: &[f64],
    scale: f64,
    raw: &SeriesCollection,
    query: &[f32],
    q_paa: &PaaSummary,
    bsf: &SharedBsf,
    local: &mut LocalStats,
) {
    for &id in leaf.entries().expect("queues hold leaves only") {
        local.lb_calcs += 1;
        let lb = lower_bound_uniform(q_paa.means(), sax.word(id), level, scale);
        let threshold = bsf.threshold();
        if lb < threshold {
            local.real_calcs += 1;
            match euclidean_abandoning(query, raw.series(id), threshold) {
                Some(d) => bsf.improve(d, id, &mut local.bsf_updates),
                None => local.abandoned_calcs += 1,
            }
        }
    }
}
