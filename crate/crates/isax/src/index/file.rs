//! Single-file index format.
//!
//! Layout, all integers little-endian fixed-width:
//!
//! ```text
//! magic            8 bytes  "ISAXIDX1"
//! version          u32
//! series_len       u32
//! segments         u32
//! leaf_capacity    u32
//! max_bits         u32
//! series_count     u64
//! breakpoint hash  u64      fingerprint of the quantile table
//! subtree_count    u32
//! subtrees         key: u64, then the subtree pre-order
//! ```
//!
//! Each node starts with a tag byte (0 leaf, 1 inner) and its word
//! (`segments` u16 symbols, then `segments` u8 bit counts). Inner nodes add
//! the split segment (u16) and their two children, bit 0 first. Leaves add
//! an entry count (u32) and the entries as (id u32, max-cardinality symbols
//! as `segments` u16). Serialization is canonical: the same index always
//! produces the same bytes.

use std::io::{self, Read, Write};

use crate::sax::{BreakpointTable, IsaxWord, SaxArray};
use crate::series::SeriesId;
use crate::{Error, Result};

use super::node::{Node, NodeKind, RootNode};
use super::{Index, IndexConfig};

const MAGIC: [u8; 8] = *b"ISAXIDX1";
const VERSION: u32 = 1;

pub(super) fn write_index<W: Write>(index: &Index, out: &mut W) -> io::Result<()> {
    let config = index.config();
    out.write_all(&MAGIC)?;
    write_u32(out, VERSION)?;
    write_u32(out, config.series_len as u32)?;
    write_u32(out, config.segments as u32)?;
    write_u32(out, config.leaf_capacity as u32)?;
    write_u32(out, config.max_bits as u32)?;
    write_u64(out, index.series_count() as u64)?;
    write_u64(out, index.breakpoints().fingerprint())?;
    write_u32(out, index.root().len() as u32)?;
    for (key, node) in index.root().iter() {
        write_u64(out, key)?;
        write_node(node, index.sax(), out)?;
    }
    Ok(())
}

fn write_node<W: Write>(node: &Node, sax: &SaxArray, out: &mut W) -> io::Result<()> {
    match &node.kind {
        NodeKind::Leaf { entries, .. } => {
            out.write_all(&[0u8])?;
            write_word(node.word(), out)?;
            write_u32(out, entries.len() as u32)?;
            for &id in entries {
                write_u32(out, id)?;
                for &symbol in sax.word(id) {
                    write_u16(out, symbol)?;
                }
            }
        }
        NodeKind::Inner { split_segment, children } => {
            out.write_all(&[1u8])?;
            write_word(node.word(), out)?;
            write_u16(out, *split_segment)?;
            write_node(&children[0], sax, out)?;
            write_node(&children[1], sax, out)?;
        }
    }
    Ok(())
}

fn write_word<W: Write>(word: &IsaxWord, out: &mut W) -> io::Result<()> {
    for &symbol in word.symbols() {
        write_u16(out, symbol)?;
    }
    out.write_all(word.bits())
}

pub(super) fn read_index<R: Read>(input: &mut R) -> Result<Index> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format("not an index file (bad magic)".into()));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported index version {version}")));
    }
    let series_len = read_u32(input)? as usize;
    let segments = read_u32(input)? as usize;
    let leaf_capacity = read_u32(input)? as usize;
    let max_bits = read_u32(input)?;
    if max_bits < 1 || max_bits > crate::sax::MAX_BITS_LIMIT as u32 {
        return Err(Error::Format(format!("max_bits {max_bits} out of range")));
    }
    let max_bits = max_bits as u8;
    let count = read_u64(input)?;
    if count > SeriesId::MAX as u64 {
        return Err(Error::Format("series count exceeds the id space".into()));
    }
    let count = count as usize;

    let config = IndexConfig {
        series_len,
        segments,
        leaf_capacity,
        max_bits,
        ..IndexConfig::new(series_len)
    };
    config.validate().map_err(|e| Error::Format(format!("index header: {e}")))?;

    let table = BreakpointTable::new(max_bits)?;
    let fingerprint = read_u64(input)?;
    if fingerprint != table.fingerprint() {
        return Err(Error::Format(
            "breakpoint table mismatch: index was built with a different quantile scheme".into(),
        ));
    }

    let subtree_count = read_u32(input)? as usize;
    let mut reader = NodeReader {
        input,
        segments,
        max_bits,
        leaf_capacity,
        symbols: vec![0u16; count * segments],
        entries_seen: 0,
        count,
        // deepest legal chain: one extra bit per split, every segment to the cap
        max_depth: segments * max_bits as usize + 2,
    };
    let mut root = RootNode::empty();
    let mut previous_key = None;
    for _ in 0..subtree_count {
        let key = read_u64(&mut *reader.input)?;
        if segments < 64 && key >= 1u64 << segments {
            return Err(Error::Format(format!("subtree key {key:#x} out of range")));
        }
        if previous_key.is_some_and(|p| p >= key) {
            return Err(Error::Format("subtree keys not strictly ascending".into()));
        }
        previous_key = Some(key);
        let node = reader.read_node(0)?;
        root.subtrees.insert(key, node);
    }
    if reader.entries_seen != count {
        return Err(Error::Format(format!(
            "{} entries in leaves, header says {count}",
            reader.entries_seen
        )));
    }

    let sax = SaxArray::from_raw(reader.symbols, segments, max_bits);
    let index = Index::from_parts(config, table, root, sax);
    index.verify_invariants()?;
    Ok(index)
}

struct NodeReader<'a, R: Read> {
    input: &'a mut R,
    segments: usize,
    max_bits: u8,
    leaf_capacity: usize,
    symbols: Vec<u16>,
    entries_seen: usize,
    count: usize,
    max_depth: usize,
}

impl<R: Read> NodeReader<'_, R> {
    fn read_node(&mut self, depth: usize) -> Result<Node> {
        if depth > self.max_depth {
            return Err(Error::Format("tree deeper than the cardinality budget allows".into()));
        }
        let mut tag = [0u8; 1];
        self.input.read_exact(&mut tag)?;
        let word = self.read_word()?;
        match tag[0] {
            0 => {
                let entry_count = read_u32(self.input)? as usize;
                if self.entries_seen + entry_count > self.count {
                    return Err(Error::Format("more leaf entries than the header count".into()));
                }
                let mut entries = Vec::with_capacity(entry_count);
                for _ in 0..entry_count {
                    let id = read_u32(self.input)?;
                    if id as usize >= self.count {
                        return Err(Error::Format(format!("entry id {id} out of range")));
                    }
                    for seg in 0..self.segments {
                        let symbol = read_u16(self.input)?;
                        if symbol as u32 >= 1u32 << self.max_bits {
                            return Err(Error::Format(format!(
                                "entry symbol {symbol} exceeds {} bits",
                                self.max_bits
                            )));
                        }
                        self.symbols[id as usize * self.segments + seg] = symbol;
                    }
                    entries.push(id);
                }
                self.entries_seen += entry_count;
                let mut node = Node::leaf(word, entries);
                if let NodeKind::Leaf { entries, overflow } = &mut node.kind {
                    // derived, not stored: the builder flags exactly the
                    // leaves it left over capacity
                    *overflow = entries.len() > self.leaf_capacity;
                }
                Ok(node)
            }
            1 => {
                let split_segment = read_u16(self.input)?;
                let zero = self.read_node(depth + 1)?;
                let one = self.read_node(depth + 1)?;
                Ok(Node {
                    word,
                    kind: NodeKind::Inner {
                        split_segment,
                        children: Box::new([zero, one]),
                    },
                })
            }
            other => Err(Error::Format(format!("unknown node tag {other}"))),
        }
    }

    fn read_word(&mut self) -> Result<IsaxWord> {
        let mut symbols = Vec::with_capacity(self.segments);
        for _ in 0..self.segments {
            symbols.push(read_u16(self.input)?);
        }
        let mut bits = Vec::with_capacity(self.segments);
        let mut raw = vec![0u8; self.segments];
        self.input.read_exact(&mut raw)?;
        for (i, &b) in raw.iter().enumerate() {
            if b < 1 || b > self.max_bits {
                return Err(Error::Format(format!("segment {i}: bit count {b} out of range")));
            }
            if symbols[i] as u32 >= 1u32 << b {
                return Err(Error::Format(format!(
                    "segment {i}: symbol {} out of range for {b} bits",
                    symbols[i]
                )));
            }
            bits.push(b);
        }
        Ok(IsaxWord::new(symbols, bits))
    }
}

fn write_u16<W: Write>(out: &mut W, value: u16) -> io::Result<()> {
    out.write_all(&value.to_le_bytes())
}

fn write_u32<W: Write>(out: &mut W, value: u32) -> io::Result<()> {
    out.write_all(&value.to_le_bytes())
}

fn write_u64<W: Write>(out: &mut W, value: u64) -> io::Result<()> {
    out.write_all(&value.to_le_bytes())
}

fn read_u16<R: Read>(input: &mut R) -> io::Result<u16> {
    let mut buf = [0u8; 2];
    input.read_exact(&mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32<R: Read>(input: &mut R) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(input: &mut R) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
