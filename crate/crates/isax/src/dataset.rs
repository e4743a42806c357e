//! Raw binary dataset files and the random-walk generator.
//!
//! A dataset file is headerless: little-endian `f32` values, row-major,
//! `count * series_len` of them and nothing else. Dimensions travel on the
//! command line, so the file size must check out exactly. Query files use
//! the same format.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::series::{znormalize_in_place, SeriesCollection};
use crate::{Error, Result};

/// Serializes a collection as raw little-endian `f32`s.
pub fn write_raw<W: Write>(out: &mut W, collection: &SeriesCollection) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(1 << 16);
    for &value in collection.values() {
        buf.extend_from_slice(&value.to_le_bytes());
        if buf.len() >= (1 << 16) {
            out.write_all(&buf)?;
            buf.clear();
        }
    }
    out.write_all(&buf)
}

pub fn save_raw(path: impl AsRef<Path>, collection: &SeriesCollection) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_raw(&mut out, collection)?;
    out.flush()?;
    Ok(())
}

/// Loads a dataset whose dimensions are known, refusing any size mismatch.
pub fn read_raw(path: impl AsRef<Path>, count: usize, series_len: usize) -> Result<SeriesCollection> {
    let path = path.as_ref();
    let expected = count as u64 * series_len as u64 * 4;
    let actual = std::fs::metadata(path)?.len();
    if actual != expected {
        return Err(Error::Format(format!(
            "{} is {actual} bytes, expected {expected} ({count} series x {series_len} points x 4)",
            path.display()
        )));
    }
    read_values(path, series_len)
}

/// Loads a dataset of unknown series count; the file size must be a whole
/// number of series.
pub fn read_raw_unsized(path: impl AsRef<Path>, series_len: usize) -> Result<SeriesCollection> {
    let path = path.as_ref();
    let actual = std::fs::metadata(path)?.len();
    if series_len == 0 || actual % (series_len as u64 * 4) != 0 {
        return Err(Error::Format(format!(
            "{} is {actual} bytes, not a whole number of length-{series_len} series",
            path.display()
        )));
    }
    read_values(path, series_len)
}

fn read_values(path: &Path, series_len: usize) -> Result<SeriesCollection> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!("{} is not a whole number of f32s", path.display())));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    SeriesCollection::new(values, series_len)
}

/// Generates `count` z-normalized random walks of length `series_len`:
/// cumulative sums of i.i.d. standard-normal steps. Deterministic for a
/// fixed seed.
pub fn random_walk(count: usize, series_len: usize, seed: u64) -> SeriesCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(count * series_len);
    let mut walk = vec![0.0f64; series_len];
    for _ in 0..count {
        let mut level = 0.0f64;
        for slot in walk.iter_mut() {
            let step: f64 = StandardNormal.sample(&mut rng);
            level += step;
            *slot = level;
        }
        znormalize_in_place(&mut walk);
        values.extend(walk.iter().map(|&v| v as f32));
    }
    SeriesCollection::new(values, series_len).expect("generated dimensions are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = random_walk(5, 64, 42);
        let b = random_walk(5, 64, 42);
        assert_eq!(a.values(), b.values());
        let c = random_walk(5, 64, 43);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn generated_series_are_normalized() {
        let collection = random_walk(50, 256, 7);
        for series in collection.iter() {
            let n = series.len() as f64;
            let mean = series.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = series
                .iter()
                .map(|&v| (v as f64 - mean) * (v as f64 - mean))
                .sum::<f64>()
                / n;
            assert!(mean.abs() < 1e-6, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-3, "stddev {}", var.sqrt());
        }
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("isax-dataset-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.bin");
        let collection = random_walk(100, 128, 3);
        save_raw(&path, &collection).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 100 * 128 * 4);
        let loaded = read_raw(&path, 100, 128).unwrap();
        assert_eq!(collection.values(), loaded.values());
        let unsized_load = read_raw_unsized(&path, 128).unwrap();
        assert_eq!(unsized_load.len(), 100);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn size_mismatch_is_refused() {
        let dir = std::env::temp_dir().join(format!("isax-dataset-mismatch-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("short.bin");
        save_raw(&path, &random_walk(10, 32, 1)).unwrap();
        assert!(matches!(read_raw(&path, 11, 32), Err(Error::Format(_))));
        assert!(matches!(read_raw_unsized(&path, 33), Err(Error::Format(_))));
        std::fs::remove_file(&path).ok();
    }
}
