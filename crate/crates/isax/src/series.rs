//! Series storage and the numeric kernels everything else is built on:
//! z-normalization, piecewise aggregate approximation (PAA), and Euclidean
//! distance with early abandoning.
//!
//! Raw values are stored as `f32`; every sum of squares and every mean is
//! accumulated in `f64`.

use std::slice::ChunksExact;

use crate::{Error, Result};

/// Position of a series inside its collection. Doubles as the identifier
/// stored in index leaves and in the index file.
pub type SeriesId = u32;

/// Standard deviations below this are treated as zero: the series is
/// constant and z-normalizes to the all-zero series.
pub const CONSTANT_STDDEV_EPSILON: f64 = 1e-12;

/// A set of equal-length series stored contiguously, row-major.
#[derive(Clone, Debug)]
pub struct SeriesCollection {
    values: Vec<f32>,
    series_len: usize,
}

impl SeriesCollection {
    /// Wraps a flat buffer of `count * series_len` values.
    pub fn new(values: Vec<f32>, series_len: usize) -> Result<Self> {
        if series_len == 0 {
            return Err(Error::Config("series length must be positive".into()));
        }
        if !values.len().is_multiple_of(series_len) {
            return Err(Error::Format(format!(
                "{} values do not divide into series of length {}",
                values.len(),
                series_len
            )));
        }
        let count = values.len() / series_len;
        if count > SeriesId::MAX as usize {
            return Err(Error::Format(format!("collection of {count} series exceeds the id space")));
        }
        Ok(Self { values, series_len })
    }

    /// Number of series in the collection.
    pub fn len(&self) -> usize {
        self.values.len() / self.series_len
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Length `n` shared by every series.
    pub fn series_len(&self) -> usize {
        self.series_len
    }

    pub fn series(&self, id: SeriesId) -> &[f32] {
        let start = id as usize * self.series_len;
        &self.values[start..start + self.series_len]
    }

    pub fn iter(&self) -> ChunksExact<'_, f32> {
        self.values.chunks_exact(self.series_len)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Segment means of one series: the PAA summary at `w` segments.
#[derive(Clone, Debug, PartialEq)]
pub struct PaaSummary {
    means: Vec<f64>,
}

impl PaaSummary {
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Segment count `w`.
    pub fn segments(&self) -> usize {
        self.means.len()
    }
}

/// Rescales to mean 0 and population standard deviation 1, in place.
///
/// A constant input (stddev below [`CONSTANT_STDDEV_EPSILON`]) becomes the
/// all-zero series rather than an error.
pub fn znormalize_in_place(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let stddev = var.sqrt();
    if stddev < CONSTANT_STDDEV_EPSILON {
        values.fill(0.0);
    } else {
        for v in values.iter_mut() {
            *v = (*v - mean) / stddev;
        }
    }
}

/// Z-normalizes a stored series. The arithmetic runs in `f64` and the result
/// is rounded back to `f32`.
pub fn znormalize(series: &[f32]) -> Vec<f32> {
    let mut wide: Vec<f64> = series.iter().map(|&v| v as f64).collect();
    znormalize_in_place(&mut wide);
    wide.into_iter().map(|v| v as f32).collect()
}

/// Splits the series into `w` equal segments and returns their means.
///
/// `w` must divide the series length exactly; there is no padding.
pub fn paa(series: &[f32], w: usize) -> Result<PaaSummary> {
    if w == 0 || !series.len().is_multiple_of(w) {
        return Err(Error::Config(format!(
            "segment count {} does not divide series length {}",
            w,
            series.len()
        )));
    }
    let seg = series.len() / w;
    let means = series
        .chunks_exact(seg)
        .map(|chunk| chunk.iter().map(|&v| v as f64).sum::<f64>() / seg as f64)
        .collect();
    Ok(PaaSummary { means })
}

/// Allocation-free [`paa`] for the bulk-loading hot path; the segment count
/// is taken from `out.len()`.
pub(crate) fn paa_into(series: &[f32], out: &mut [f64]) {
    let seg = series.len() / out.len();
    debug_assert_eq!(seg * out.len(), series.len());
    for (mean, chunk) in out.iter_mut().zip(series.chunks_exact(seg)) {
        *mean = chunk.iter().map(|&v| v as f64).sum::<f64>() / seg as f64;
    }
}

/// Euclidean distance between two equal-length series.
///
/// Panics if the lengths differ.
pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len(), "series length mismatch");
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc.sqrt()
}

/// Early-abandoning Euclidean distance: `None` once the running sum of
/// squares exceeds `abandon_at^2`.
///
/// With `abandon_at = f64::INFINITY` this always completes and matches
/// [`euclidean`] exactly (same accumulation order). Panics if the lengths
/// differ.
pub fn euclidean_abandoning(a: &[f32], b: &[f32], abandon_at: f64) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "series length mismatch");
    let cutoff = abandon_at * abandon_at;
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x as f64 - y as f64;
        acc += d * d;
        if acc > cutoff {
            return None;
        }
    }
    Some(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_walk_f64(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut acc = 0.0;
        (0..n)
            .map(|_| {
                acc += rng.gen::<f64>() * 2.0 - 1.0;
                acc
            })
            .collect()
    }

    #[test]
    fn znormalize_constant_series_becomes_zero() {
        assert_eq!(znormalize(&[1.0, 1.0, 1.0, 1.0]), vec![0.0; 4]);
    }

    #[test]
    fn znormalize_symmetric_pair() {
        assert_eq!(znormalize(&[0.0, 2.0]), vec![-1.0, 1.0]);
    }

    #[test]
    fn znormalize_random_walk_moments() {
        // Oracle: recompute the moments of the normalized values directly.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut values = random_walk_f64(256, &mut rng);
        znormalize_in_place(&mut values);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-9, "stddev {}", var.sqrt());
    }

    #[test]
    fn paa_exact_segment_means() {
        let summary = paa(&[1.0, 1.0, 3.0, 3.0], 2).unwrap();
        assert_eq!(summary.means(), &[1.0, 3.0]);
    }

    #[test]
    fn paa_constant_series() {
        let summary = paa(&[2.5; 12], 3).unwrap();
        assert!(summary.means().iter().all(|&m| m == 2.5));
    }

    #[test]
    fn paa_matches_direct_averages() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let series: Vec<f32> = (0..256).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
        let summary = paa(&series, 16).unwrap();
        for (i, &mean) in summary.means().iter().enumerate() {
            let direct: f64 =
                series[i * 16..(i + 1) * 16].iter().map(|&v| v as f64).sum::<f64>() / 16.0;
            assert!((mean - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn paa_rejects_non_dividing_segments() {
        assert!(matches!(paa(&[0.0; 10], 3), Err(Error::Config(_))));
    }

    #[test]
    fn euclidean_identity_and_triangle() {
        let a = [1.0f32, -2.0, 0.5];
        assert_eq!(euclidean(&a, &a), 0.0);
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn euclidean_abandons_past_threshold() {
        assert_eq!(euclidean_abandoning(&[0.0, 0.0], &[3.0, 4.0], 1.0), None);
    }

    #[test]
    fn euclidean_abandoning_with_infinite_threshold_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 2.0 - 1.0).collect();
            let b: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 2.0 - 1.0).collect();
            assert_eq!(euclidean_abandoning(&a, &b, f64::INFINITY), Some(euclidean(&a, &b)));
        }
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn euclidean_rejects_length_mismatch() {
        euclidean(&[0.0], &[0.0, 1.0]);
    }
}
