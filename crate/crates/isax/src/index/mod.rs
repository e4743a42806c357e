//! The in-memory tree index: configuration, two-stage parallel construction,
//! and single-file serialization for build-once/query-many workflows.

mod build;
mod file;
mod node;

use std::path::Path;
use std::time::{Duration, Instant};

use crate::sax::{BreakpointTable, SaxArray};
use crate::series::SeriesCollection;
use crate::{Error, Result};

pub use build::{build_stage, summarize_stage, IsaxBufferSet};
pub use node::{Node, RootNode};

pub const DEFAULT_SEGMENTS: usize = 16;
pub const DEFAULT_LEAF_CAPACITY: usize = 1024;
pub const DEFAULT_MAX_BITS: u8 = 8;
pub const DEFAULT_CHUNK_SIZE: usize = 4096;

/// Build-time parameters. `series_len`, `segments`, `leaf_capacity` and
/// `max_bits` shape the index; `num_workers` and `chunk_size` only steer the
/// parallel construction and never change the result.
#[derive(Clone, Debug)]
pub struct IndexConfig {
    /// Series length `n`; every series in the collection shares it.
    pub series_len: usize,
    /// Segment count `w`; must divide `series_len`.
    pub segments: usize,
    /// Maximum entries per leaf before it splits.
    pub leaf_capacity: usize,
    /// Per-segment cardinality cap in bits.
    pub max_bits: u8,
    /// Worker threads for both construction stages.
    pub num_workers: usize,
    /// Series per stage-1 work unit.
    pub chunk_size: usize,
}

impl IndexConfig {
    pub fn new(series_len: usize) -> Self {
        Self {
            series_len,
            segments: DEFAULT_SEGMENTS,
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
            max_bits: DEFAULT_MAX_BITS,
            num_workers: default_workers(),
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 || self.segments > 64 {
            return Err(Error::Config(format!("segment count {} outside 1..=64", self.segments)));
        }
        if self.series_len == 0 || !self.series_len.is_multiple_of(self.segments) {
            return Err(Error::Config(format!(
                "segment count {} does not divide series length {}",
                self.segments, self.series_len
            )));
        }
        if self.series_len > u32::MAX as usize {
            return Err(Error::Config("series length exceeds u32".into()));
        }
        if self.leaf_capacity < 2 {
            return Err(Error::Config(format!("leaf capacity {} below 2", self.leaf_capacity)));
        }
        if self.max_bits < 1 || self.max_bits > crate::sax::MAX_BITS_LIMIT {
            return Err(Error::Config(format!("max_bits {} outside 1..=16", self.max_bits)));
        }
        if self.num_workers == 0 {
            return Err(Error::Config("worker count must be positive".into()));
        }
        if self.chunk_size == 0 || self.chunk_size > u32::MAX as usize {
            return Err(Error::Config(format!("chunk size {} outside 1..=2^32", self.chunk_size)));
        }
        Ok(())
    }

    fn check_collection(&self, raw: &SeriesCollection) -> Result<()> {
        if raw.series_len() != self.series_len {
            return Err(Error::Config(format!(
                "collection holds series of length {}, config says {}",
                raw.series_len(),
                self.series_len
            )));
        }
        Ok(())
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Wall time of the two construction stages.
#[derive(Clone, Copy, Debug)]
pub struct BuildTimings {
    pub summarize: Duration,
    pub construct: Duration,
}

impl BuildTimings {
    pub fn total(&self) -> Duration {
        self.summarize + self.construct
    }
}

/// The built index: the tree, the flat array of max-cardinality words, and
/// the breakpoint table they were encoded with. Immutable once built; safe to
/// share across threads.
#[derive(Debug)]
pub struct Index {
    config: IndexConfig,
    table: BreakpointTable,
    root: RootNode,
    sax: SaxArray,
    num_leaves: usize,
}

impl Index {
    /// Builds the index over a z-normalized collection. The result is
    /// identical for any `num_workers`/`chunk_size`.
    pub fn build(raw: &SeriesCollection, config: IndexConfig) -> Result<(Self, BuildTimings)> {
        config.validate()?;
        config.check_collection(raw)?;
        let table = BreakpointTable::new(config.max_bits)?;

        let start = Instant::now();
        let (buffers, sax) = build::summarize_stage(raw, &table, &config)?;
        let summarize = start.elapsed();

        let start = Instant::now();
        let root = build::build_stage(&buffers, &sax, &config);
        let construct = start.elapsed();

        let num_leaves = root.num_leaves();
        let index = Self { config, table, root, sax, num_leaves };
        Ok((index, BuildTimings { summarize, construct }))
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn breakpoints(&self) -> &BreakpointTable {
        &self.table
    }

    pub fn root(&self) -> &RootNode {
        &self.root
    }

    pub fn sax(&self) -> &SaxArray {
        &self.sax
    }

    pub fn series_count(&self) -> usize {
        self.sax.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    /// Full structural sweep: every series appears in exactly one leaf, leaf
    /// words cover their entries, split children refine their parent by one
    /// bit, and no leaf exceeds capacity unless flagged as overflow.
    pub fn verify_invariants(&self) -> Result<()> {
        let count = self.series_count();
        let mut seen = vec![false; count];
        let mut total = 0usize;
        for (key, subtree) in self.root.iter() {
            let expected = crate::sax::IsaxWord::from_first_bits(key, self.config.segments);
            if *subtree.word() != expected {
                return Err(Error::Format(format!(
                    "subtree {key:#x} top word does not encode its key"
                )));
            }
            self.verify_node(subtree, &mut seen, &mut total)?;
        }
        if total != count {
            return Err(Error::Format(format!(
                "{total} entries reachable from the root, expected {count}"
            )));
        }
        Ok(())
    }

    fn verify_node(&self, node: &Node, seen: &mut [bool], total: &mut usize) -> Result<()> {
        if let Some(children) = node.children() {
            let seg = node.split_segment().expect("inner node") as usize;
            if seg >= self.config.segments {
                return Err(Error::Format(format!("split segment {seg} out of range")));
            }
            for (bit, child) in children.iter().enumerate() {
                if *child.word() != node.word().refined(seg, bit as u16) {
                    return Err(Error::Format(
                        "child word is not the parent refined by one bit".into(),
                    ));
                }
                self.verify_node(child, seen, total)?;
            }
            return Ok(());
        }
        let entries = node.entries().expect("leaf node");
        if entries.len() > self.config.leaf_capacity && !node.is_overflow() {
            return Err(Error::Format(format!(
                "leaf holds {} entries over capacity {} without overflow flag",
                entries.len(),
                self.config.leaf_capacity
            )));
        }
        for &id in entries {
            let slot = seen
                .get_mut(id as usize)
                .ok_or_else(|| Error::Format(format!("entry id {id} out of range")))?;
            if *slot {
                return Err(Error::Format(format!("series {id} appears in two leaves")));
            }
            *slot = true;
            *total += 1;
            if !node.word().covers_uniform(self.sax.word(id), self.config.max_bits) {
                return Err(Error::Format(format!("leaf word does not cover entry {id}")));
            }
        }
        Ok(())
    }

    /// Serializes to the single-file index format (little-endian throughout).
    pub fn write_to<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        file::write_index(self, out)
    }

    pub fn read_from<R: std::io::Read>(input: &mut R) -> Result<Self> {
        file::read_index(input)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)?;
        use std::io::Write;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut input = std::io::BufReader::new(file);
        Self::read_from(&mut input)
    }

    /// Serialized form as bytes; handy for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::new();
        self.write_to(&mut bytes).expect("writing to memory cannot fail");
        bytes
    }

    pub(crate) fn from_parts(
        config: IndexConfig,
        table: BreakpointTable,
        root: RootNode,
        sax: SaxArray,
    ) -> Self {
        let num_leaves = root.num_leaves();
        Self { config, table, root, sax, num_leaves }
    }
}
