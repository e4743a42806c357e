//! iSAX symbols: breakpoint tables, per-segment words with variable
//! cardinality, and the admissible lower-bound distance computed from them.
//!
//! Breakpoints for a cardinality of `b` bits are the `2^b - 1` equiprobable
//! quantiles of the standard normal distribution, so the tables nest: the
//! breakpoints at `b` bits are a subset of those at `b + 1` bits, which is
//! what makes cardinality promotion work. A segment mean equal to a
//! breakpoint belongs to the region above it.

use crate::series::{PaaSummary, SeriesId};
use crate::{Error, Result};

/// Hard cap on per-segment cardinality; symbols must fit in 16 bits.
pub const MAX_BITS_LIMIT: u8 = 16;

/// Normal quantiles for every cardinality from 1 bit up to `max_bits`.
#[derive(Clone, Debug)]
pub struct BreakpointTable {
    max_bits: u8,
    /// `levels[b - 1]` holds the sorted `2^b - 1` breakpoints for `b` bits.
    levels: Vec<Vec<f64>>,
}

impl BreakpointTable {
    pub fn new(max_bits: u8) -> Result<Self> {
        if !(1..=MAX_BITS_LIMIT).contains(&max_bits) {
            return Err(Error::Config(format!(
                "max_bits {max_bits} outside 1..={MAX_BITS_LIMIT}"
            )));
        }
        let levels = (1..=max_bits)
            .map(|b| {
                let regions = 1u32 << b;
                (1..regions).map(|k| inverse_normal_cdf(k as f64 / regions as f64)).collect()
            })
            .collect();
        Ok(Self { max_bits, levels })
    }

    pub fn max_bits(&self) -> u8 {
        self.max_bits
    }

    /// Breakpoints for a cardinality of `bits` bits, sorted ascending.
    pub fn level(&self, bits: u8) -> &[f64] {
        &self.levels[bits as usize - 1]
    }

    /// FNV-1a over the little-endian bytes of every level; stored in index
    /// files so a loader can detect a foreign breakpoint scheme.
    pub fn fingerprint(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for level in &self.levels {
            for value in level {
                for byte in value.to_le_bytes() {
                    hash ^= byte as u64;
                    hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        hash
    }
}

/// Inverse CDF of the standard normal distribution (Wichura's AS 241,
/// PPND16 variant), accurate to well below 1e-9 over (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0, 1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_055e-4)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Region index for a value: breakpoints partition the axis into regions
/// numbered from 0 (lowest) upward, and a value equal to a breakpoint lands
/// in the region above it.
pub fn symbol_for(value: f64, breakpoints: &[f64]) -> u16 {
    breakpoints.partition_point(|&b| b <= value) as u16
}

/// One iSAX word: a symbol and a cardinality (bit count) per segment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IsaxWord {
    symbols: Box<[u16]>,
    bits: Box<[u8]>,
}

impl IsaxWord {
    pub fn new(symbols: Vec<u16>, bits: Vec<u8>) -> Self {
        assert_eq!(symbols.len(), bits.len(), "segment count mismatch");
        for (i, (&s, &b)) in symbols.iter().zip(bits.iter()).enumerate() {
            assert!((1..=MAX_BITS_LIMIT).contains(&b), "segment {i}: invalid bit count {b}");
            assert!((s as u32) < (1u32 << b), "segment {i}: symbol {s} out of range for {b} bits");
        }
        Self { symbols: symbols.into(), bits: bits.into() }
    }

    /// Discretizes a PAA summary, one cardinality per segment.
    pub fn from_paa(paa: &PaaSummary, bits_per_segment: &[u8], table: &BreakpointTable) -> Self {
        assert_eq!(paa.segments(), bits_per_segment.len(), "segment count mismatch");
        let symbols = paa
            .means()
            .iter()
            .zip(bits_per_segment.iter())
            .map(|(&m, &b)| symbol_for(m, table.level(b)))
            .collect();
        Self { symbols, bits: bits_per_segment.into() }
    }

    /// Discretizes a PAA summary at one uniform cardinality.
    pub fn uniform_from_paa(paa: &PaaSummary, bits: u8, table: &BreakpointTable) -> Self {
        let level = table.level(bits);
        let symbols = paa.means().iter().map(|&m| symbol_for(m, level)).collect();
        Self { symbols, bits: vec![bits; paa.segments()].into() }
    }

    /// The 1-bit-per-segment word encoded by a root subtree key.
    pub fn from_first_bits(key: u64, segments: usize) -> Self {
        let symbols =
            (0..segments).map(|i| ((key >> (segments - 1 - i)) & 1) as u16).collect();
        Self { symbols, bits: vec![1u8; segments].into() }
    }

    /// Copy of this word with `segment` refined by one extra bit.
    pub fn refined(&self, segment: usize, bit: u16) -> Self {
        debug_assert!(bit <= 1);
        debug_assert!(self.bits[segment] < MAX_BITS_LIMIT);
        let mut symbols = self.symbols.to_vec();
        let mut bits = self.bits.to_vec();
        symbols[segment] = (symbols[segment] << 1) | bit;
        bits[segment] += 1;
        Self { symbols: symbols.into(), bits: bits.into() }
    }

    pub fn segments(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Prefix containment: does this (coarser) word describe the same region
    /// of space as `finer`, segment by segment? This is the cardinality
    /// promotion check that decides tree membership.
    ///
    /// Panics if some segment of `finer` has fewer bits than this word.
    pub fn covers(&self, finer: &IsaxWord) -> bool {
        assert_eq!(self.segments(), finer.segments(), "segment count mismatch");
        self.symbols
            .iter()
            .zip(self.bits.iter())
            .zip(finer.symbols.iter().zip(finer.bits.iter()))
            .all(|((&ls, &lb), (&hs, &hb))| {
                assert!(lb <= hb, "cardinality of the coarser word exceeds the finer word");
                hs >> (hb - lb) == ls
            })
    }

    /// Same check against a max-cardinality symbol row from a [`SaxArray`].
    pub fn covers_uniform(&self, symbols: &[u16], max_bits: u8) -> bool {
        assert_eq!(self.segments(), symbols.len(), "segment count mismatch");
        self.symbols
            .iter()
            .zip(self.bits.iter())
            .zip(symbols.iter())
            .all(|((&ls, &lb), &hs)| {
                assert!(lb <= max_bits, "word cardinality exceeds the array cardinality");
                hs >> (max_bits - lb) == ls
            })
    }
}

/// Key of the root subtree a word belongs to: the first bit of each segment,
/// segment 0 in the most significant position.
pub fn first_bits_key(symbols: &[u16], max_bits: u8) -> u64 {
    debug_assert!(symbols.len() <= 64);
    symbols
        .iter()
        .fold(0u64, |key, &s| (key << 1) | (s >> (max_bits - 1)) as u64)
}

/// Distance from a query segment mean to the value region `[lo, hi]` of a
/// symbol; zero when the mean falls inside the region.
#[inline]
fn segment_gap(mean: f64, symbol: u16, breakpoints: &[f64]) -> f64 {
    let sym = symbol as usize;
    if sym > 0 {
        let lo = breakpoints[sym - 1];
        if mean < lo {
            return lo - mean;
        }
    }
    if sym < breakpoints.len() {
        let hi = breakpoints[sym];
        if mean > hi {
            return mean - hi;
        }
    }
    0.0
}

/// Lower bound on the Euclidean distance between the query (given by its PAA
/// summary) and any series whose iSAX word is `word`; `n` is the series
/// length. Admissible: never exceeds the true distance.
pub fn lower_bound_distance(
    query: &PaaSummary,
    word: &IsaxWord,
    table: &BreakpointTable,
    n: usize,
) -> f64 {
    assert_eq!(query.segments(), word.segments(), "segment count mismatch");
    let mut acc = 0.0f64;
    for ((&mean, &sym), &bits) in
        query.means().iter().zip(word.symbols.iter()).zip(word.bits.iter())
    {
        let gap = segment_gap(mean, sym, table.level(bits));
        acc += gap * gap;
    }
    ((n as f64 / word.segments() as f64) * acc).sqrt()
}

/// Same bound against a row of max-cardinality symbols. `scale` is `n / w`,
/// `level` the breakpoints at the array's cardinality; hoisted out so the
/// per-series scans stay tight.
#[inline]
pub fn lower_bound_uniform(means: &[f64], symbols: &[u16], level: &[f64], scale: f64) -> f64 {
    let mut acc = 0.0f64;
    for (&mean, &sym) in means.iter().zip(symbols.iter()) {
        let gap = segment_gap(mean, sym, level);
        acc += gap * gap;
    }
    (scale * acc).sqrt()
}

/// Max-cardinality iSAX symbols for a whole collection, one row per series.
/// This is the flat array the scan-style engine prunes against.
#[derive(Clone, Debug)]
pub struct SaxArray {
    symbols: Vec<u16>,
    segments: usize,
    max_bits: u8,
}

impl SaxArray {
    pub(crate) fn from_raw(symbols: Vec<u16>, segments: usize, max_bits: u8) -> Self {
        debug_assert_eq!(symbols.len() % segments, 0);
        Self { symbols, segments, max_bits }
    }

    /// Number of series summarized.
    pub fn len(&self) -> usize {
        self.symbols.len() / self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn max_bits(&self) -> u8 {
        self.max_bits
    }

    /// Symbol row of one series.
    pub fn word(&self, id: SeriesId) -> &[u16] {
        let start = id as usize * self.segments;
        &self.symbols[start..start + self.segments]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, u16> {
        self.symbols.chunks_exact(self.segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::paa;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent quantile oracle: standard normal CDF by composite Simpson
    /// quadrature, inverted by bisection.
    mod oracle {
        pub fn normal_cdf(x: f64) -> f64 {
            // integrate the density from 0 to |x| with Simpson's rule
            let steps = 20_000;
            let upper = x.abs();
            if upper == 0.0 {
                return 0.5;
            }
            let h = upper / steps as f64;
            let density =
                |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut sum = density(0.0) + density(upper);
            for i in 1..steps {
                let factor = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += factor * density(i as f64 * h);
            }
            let integral = sum * h / 3.0;
            if x >= 0.0 {
                0.5 + integral
            } else {
                0.5 - integral
            }
        }

        pub fn normal_quantile(p: f64) -> f64 {
            let (mut lo, mut hi) = (-10.0f64, 10.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if normal_cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }

    #[test]
    fn one_bit_breakpoint_is_the_median() {
        let table = BreakpointTable::new(8).unwrap();
        assert_eq!(table.level(1), &[0.0]);
    }

    #[test]
    fn two_bit_breakpoints_match_quartiles() {
        let table = BreakpointTable::new(8).unwrap();
        let level = table.level(2);
        assert_eq!(level.len(), 3);
        assert!((level[0] + 0.67449).abs() < 1e-5);
        assert_eq!(level[1], 0.0);
        assert!((level[2] - 0.67449).abs() < 1e-5);
        for (bp, p) in level.iter().zip([0.25, 0.5, 0.75]) {
            assert!((bp - oracle::normal_quantile(p)).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_cdf_matches_quadrature_oracle() {
        for &p in &[0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999, 1.0 / 256.0, 255.0 / 256.0]
        {
            let got = inverse_normal_cdf(p);
            let want = oracle::normal_quantile(p);
            assert!((got - want).abs() < 1e-9, "p={p}: {got} vs {want}");
        }
        // far tail; the quadrature oracle loses resolution out here
        for &p in &[1e-12, 1.0 - 1e-12] {
            let got = inverse_normal_cdf(p);
            let want = oracle::normal_quantile(p);
            assert!((got - want).abs() < 5e-3, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn breakpoints_nest_and_increase() {
        let table = BreakpointTable::new(8).unwrap();
        for b in 1..8u8 {
            let coarse = table.level(b);
            let fine = table.level(b + 1);
            assert!(coarse.windows(2).all(|w| w[0] < w[1]));
            // every coarse breakpoint appears verbatim one level down
            assert!(coarse.iter().all(|bp| fine.contains(bp)), "level {b} not nested");
        }
    }

    #[test]
    fn breakpoints_symmetric_about_zero() {
        let table = BreakpointTable::new(8).unwrap();
        for b in 1..=8u8 {
            let level = table.level(b);
            for (i, bp) in level.iter().enumerate() {
                assert!((bp + level[level.len() - 1 - i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_max_bits() {
        assert!(BreakpointTable::new(0).is_err());
        assert!(BreakpointTable::new(17).is_err());
    }

    #[test]
    fn symbols_locate_regions() {
        let table = BreakpointTable::new(8).unwrap();
        assert_eq!(symbol_for(-5.0, table.level(2)), 0);
        assert_eq!(symbol_for(0.5, table.level(2)), 2);
        // tie goes to the upper region
        assert_eq!(symbol_for(0.0, table.level(1)), 1);
    }

    #[test]
    fn prefix_containment() {
        let low = IsaxWord::new(vec![1], vec![1]);
        assert!(low.covers(&IsaxWord::new(vec![0b10], vec![2])));
        assert!(!low.covers(&IsaxWord::new(vec![0b01], vec![2])));
        assert!(low.covers(&low.clone()));
    }

    #[test]
    #[should_panic(expected = "coarser word exceeds")]
    fn covers_rejects_inverted_cardinality() {
        let fine = IsaxWord::new(vec![0b10], vec![2]);
        let coarse = IsaxWord::new(vec![1], vec![1]);
        let _ = fine.covers(&coarse);
    }

    #[test]
    fn words_at_lower_cardinality_are_prefixes() {
        let table = BreakpointTable::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let series: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 6.0 - 3.0).collect();
            let summary = paa(&series, 8).unwrap();
            let fine = IsaxWord::uniform_from_paa(&summary, 8, &table);
            for b in 1..8u8 {
                let coarse = IsaxWord::uniform_from_paa(&summary, b, &table);
                assert!(coarse.covers(&fine));
                for (cs, fs) in coarse.symbols().iter().zip(fine.symbols()) {
                    assert_eq!(*cs, fs >> (8 - b));
                }
            }
        }
    }

    #[test]
    fn lower_bound_zero_inside_regions() {
        let table = BreakpointTable::new(8).unwrap();
        let series: Vec<f32> = vec![0.1, 0.1, -0.3, -0.3];
        let summary = paa(&series, 2).unwrap();
        let word = IsaxWord::uniform_from_paa(&summary, 4, &table);
        assert_eq!(lower_bound_distance(&summary, &word, &table, 4), 0.0);
    }

    #[test]
    fn lower_bound_hand_case() {
        // one segment, n = 4, symbol 3 of 4 regions: the region above the
        // 0.75 quantile; a query mean of 0 sits one quartile away.
        let table = BreakpointTable::new(8).unwrap();
        let query = paa(&[0.0f32; 4], 1).unwrap();
        let word = IsaxWord::new(vec![3], vec![2]);
        let got = lower_bound_distance(&query, &word, &table, 4);
        let quartile = table.level(2)[2];
        assert!((got - 2.0 * quartile).abs() < 1e-12);
        assert!((got - 1.34898).abs() < 1e-5);
    }

    #[test]
    fn lower_bound_admissible_on_random_pairs() {
        let table = BreakpointTable::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let series: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
            let query: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
            let q_paa = paa(&query, 8).unwrap();
            let s_paa = paa(&series, 8).unwrap();
            let ed = crate::series::euclidean(&query, &series);
            for bits in [1u8, 2, 4, 8] {
                let word = IsaxWord::uniform_from_paa(&s_paa, bits, &table);
                let lb = lower_bound_distance(&q_paa, &word, &table, 64);
                assert!(lb <= ed + 1e-6, "bits {bits}: lb {lb} > ed {ed}");
            }
        }
    }

    #[test]
    fn lower_bound_grows_with_cardinality() {
        let table = BreakpointTable::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let series: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
            let query: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
            let q_paa = paa(&query, 8).unwrap();
            let s_paa = paa(&series, 8).unwrap();
            let mut previous = 0.0;
            for bits in 1..=8u8 {
                let word = IsaxWord::uniform_from_paa(&s_paa, bits, &table);
                let lb = lower_bound_distance(&q_paa, &word, &table, 64);
                assert!(
                    lb >= previous - 1e-12,
                    "bits {bits}: lb {lb} fell below {previous}"
                );
                previous = lb;
            }
        }
    }

    #[test]
    fn uniform_bound_matches_general_bound() {
        let table = BreakpointTable::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let level = table.level(8);
        for _ in 0..200 {
            let series: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
            let query: Vec<f32> = (0..64).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
            let q_paa = paa(&query, 8).unwrap();
            let word = IsaxWord::uniform_from_paa(&paa(&series, 8).unwrap(), 8, &table);
            let general = lower_bound_distance(&q_paa, &word, &table, 64);
            let uniform = lower_bound_uniform(q_paa.means(), word.symbols(), level, 8.0);
            assert_eq!(general, uniform);
        }
    }

    #[test]
    fn first_bits_key_orders_segment_zero_first(){
        // symbols 0b1000.. has first bit 1 only when >= 128 at 8 bits
        assert_eq!(first_bits_key(&[128, 0, 255, 127], 8), 0b1010);
    }
}
