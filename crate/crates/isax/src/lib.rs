//! In-memory data-series similarity search.
//!
//! The crate summarizes fixed-length series into iSAX words, bulk-loads them
//! into a tree index in two parallel stages, and answers exact 1-NN queries
//! under Euclidean distance through three engines: a tree search with
//! concurrent priority queues and best-so-far pruning, a flat scan of the
//! SAX array with a parallel candidate list, and a serial early-abandoning
//! scan that serves as the correctness oracle.

pub mod dataset;
mod error;
pub mod index;
pub mod query;
pub mod sax;
pub mod series;

pub use error::{Error, Result};
pub use index::{BuildTimings, Index, IndexConfig};
pub use query::{search_scan, QueryAnswer, QueryOpts, QueryStats};
pub use sax::{BreakpointTable, IsaxWord, SaxArray};
pub use series::{PaaSummary, SeriesCollection, SeriesId};
