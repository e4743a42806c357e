//! Flat engine: one pass over the SAX array filters series by lower bound
//! against the initial best-so-far into a shared candidate list; real
//! distance workers then consume the list in parallel.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use crate::sax::{lower_bound_uniform, BreakpointTable, SaxArray};
use crate::series::{euclidean, euclidean_abandoning, paa, SeriesCollection, SeriesId};

use super::{LocalStats, QueryAnswer, QueryOpts, QueryStats, SharedBsf};

/// Candidates are claimed from the shared list in batches of this size.
const CLAIM_BATCH: usize = 64;

/// Initial best-so-far handed to the flat engine, normally the result of
/// [`super::approximate_search`].
#[derive(Clone, Copy, Debug)]
pub struct FlatSeed {
    pub id: SeriesId,
    pub distance: f64,
}

/// Exact 1-NN over the SAX array and raw collection. Without a seed the
/// first series of the collection provides the initial best-so-far.
///
/// `None` means the collection is empty.
pub fn search_flat(
    sax: &SaxArray,
    table: &BreakpointTable,
    raw: &SeriesCollection,
    query: &[f32],
    opts: &QueryOpts,
    seed: Option<FlatSeed>,
) -> Option<QueryAnswer> {
    opts.assert_valid();
    if raw.is_empty() {
        return None;
    }
    assert_eq!(sax.len(), raw.len(), "SAX array does not match the collection");
    assert_eq!(query.len(), raw.series_len(), "query length mismatch");
    let count = raw.len();
    let segments = sax.segments();
    let q_paa = paa(query, segments).expect("segment count divides series length");
    let level = table.level(sax.max_bits());
    let scale = raw.series_len() as f64 / segments as f64;

    let mut stats = QueryStats::default();
    let seed = seed.unwrap_or_else(|| {
        stats.real_calcs += 1;
        FlatSeed { id: 0, distance: euclidean(query, raw.series(0)) }
    });

    // filter: every series' lower bound against the fixed initial BSF
    let fill_start = Instant::now();
    let workers = opts.num_workers;
    let mut passing: Vec<Vec<SeriesId>> = (0..workers).map(|_| Vec::new()).collect();
    std::thread::scope(|scope| {
        for (worker, out) in passing.iter_mut().enumerate() {
            let q_paa = &q_paa;
            scope.spawn(move || {
                let lo = worker * count / workers;
                let hi = (worker + 1) * count / workers;
                for id in lo..hi {
                    let id = id as SeriesId;
                    let lb = lower_bound_uniform(q_paa.means(), sax.word(id), level, scale);
                    if lb < seed.distance {
                        out.push(id);
                    }
                }
            });
        }
    });
    let candidates = passing.concat();
    stats.lb_calcs += count as u64;
    stats.pruned = (count - candidates.len()) as u64;
    stats.candidates = candidates.len() as u64;
    stats.fill_time = fill_start.elapsed();

    // refine: consume the candidate list in parallel with early abandoning
    let refine_start = Instant::now();
    let bsf = SharedBsf::new(Some((seed.distance, seed.id)));
    let next = AtomicUsize::new(0);
    let mut locals: Vec<LocalStats> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for _ in 0..workers {
            let candidates = &candidates;
            let next = &next;
            let bsf = &bsf;
            handles.push(scope.spawn(move || {
                let mut local = LocalStats::default();
                loop {
                    let start = next.fetch_add(CLAIM_BATCH, Ordering::Relaxed);
                    if start >= candidates.len() {
                        break;
                    }
                    let end = (start + CLAIM_BATCH).min(candidates.len());
                    for &id in &candidates[start..end] {
                        if id == seed.id {
                            continue; // distance already known
                        }
                        let threshold = bsf.threshold();
                        local.real_calcs += 1;
                        match euclidean_abandoning(query, raw.series(id), threshold) {
                            Some(d) => bsf.improve(d, id, &mut local.bsf_updates),
                            None => local.abandoned_calcs += 1,
                        }
                    }
                }
                local
            }));
        }
        for handle in handles {
            locals.push(handle.join().expect("query worker panicked"));
        }
    });
    for local in locals {
        stats.absorb(local);
    }
    stats.refine_time = refine_start.elapsed();

    let (distance, id) = bsf.best().expect("seeded state always has a best");
    Some(QueryAnswer { id, distance, stats })
}
