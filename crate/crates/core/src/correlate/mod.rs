//! Exact start-stop correlation of timetag streams and peak-area analysis.

mod peaks;
mod stream;

pub use peaks::{g2_zero, hom_visibility, integrate_peaks, Measured, PeakIntegration};
pub use stream::StreamCorrelator;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::timetag::{first_unsorted, TimeTagStream};

/// Tags of `a` handled per parallel task.
const TASK_TAGS: usize = 1 << 16;

/// Coincidence histogram of `t_b − t_a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorrelationHistogram {
    /// [ps]
    pub bin_width: u64,
    /// Half-width of the delay axis [ps]; the axis spans `[-range, +range]`.
    pub range: u64,
    pub counts: Vec<u64>,
    pub channel_pair: (u16, u16),
    pub total_pairs: u64,
}

impl CorrelationHistogram {
    pub fn empty(bin_width: u64, range: u64, channel_pair: (u16, u16)) -> Result<Self> {
        if bin_width == 0 || range == 0 {
            return Err(Error::domain("bin_width and range must be > 0"));
        }
        let bins = (2 * range).div_ceil(bin_width) as usize;
        Ok(CorrelationHistogram {
            bin_width,
            range,
            counts: vec![0; bins],
            channel_pair,
            total_pairs: 0,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Delay at the center of bin `i` [ps].
    pub fn bin_center(&self, i: usize) -> f64 {
        -(self.range as f64) + (i as f64 + 0.5) * self.bin_width as f64
    }

    pub fn same_binning(&self, other: &Self) -> bool {
        self.bin_width == other.bin_width && self.range == other.range
    }

    /// Adds `other` bin by bin.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_binning(other) {
            return Err(Error::BinningMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.bin_width, self.range, other.bin_width, other.range
            )));
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total_pairs += other.total_pairs;
        Ok(())
    }
}

/// Correlates `a` against the slice `b`, accumulating into `counts`.
///
/// Every pair with `|t_b − t_a| ≤ range` is counted exactly once.
pub(crate) fn accumulate(
    a: &[u64],
    b: &[u64],
    bin_width: u64,
    range: u64,
    counts: &mut [u64],
) -> u64 {
    let last = counts.len() - 1;
    let mut lo = 0usize;
    let mut pairs = 0u64;
    for &ta in a {
        let start = ta.saturating_sub(range);
        while lo < b.len() && b[lo] < start {
            lo += 1;
        }
        let stop = ta.saturating_add(range);
        // offset of t_b on the shifted axis: d + range ∈ [0, 2·range]
        let base = range.wrapping_sub(ta);
        let mut j = lo;
        if bin_width == 1 {
            while j < b.len() && b[j] <= stop {
                let idx = (b[j].wrapping_add(base) as usize).min(last);
                counts[idx] += 1;
                j += 1;
            }
        } else {
            while j < b.len() && b[j] <= stop {
                let idx = ((b[j].wrapping_add(base) / bin_width) as usize).min(last);
                counts[idx] += 1;
                j += 1;
            }
        }
        pairs += (j - lo) as u64;
    }
    pairs
}

/// Parallel exact correlation over raw tag slices.
pub(crate) fn correlate_slices(a: &[u64], b: &[u64], hist: &mut CorrelationHistogram) {
    let (bw, range, n) = (hist.bin_width, hist.range, hist.counts.len());
    let partial = a
        .par_chunks(TASK_TAGS)
        .map(|chunk| {
            let start = chunk[0].saturating_sub(range);
            let stop = chunk[chunk.len() - 1].saturating_add(range);
            let lo = b.partition_point(|&t| t < start);
            let hi = b.partition_point(|&t| t <= stop);
            let mut counts = vec![0u64; n];
            let pairs = accumulate(chunk, &b[lo..hi], bw, range, &mut counts);
            (counts, pairs)
        })
        .reduce_with(|(mut c1, p1), (c2, p2)| {
            for (x, y) in c1.iter_mut().zip(&c2) {
                *x += y;
            }
            (c1, p1 + p2)
        });
    if let Some((counts, pairs)) = partial {
        for (x, y) in hist.counts.iter_mut().zip(&counts) {
            *x += y;
        }
        hist.total_pairs += pairs;
    }
}

/// Histogram of `t_b − t_a` over `[-range, +range]` using a sorted two-pointer sweep.
pub fn cross_correlate(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width: u64,
    range: u64,
) -> Result<CorrelationHistogram> {
    for s in [a, b] {
        if let Some(index) = first_unsorted(&s.tags) {
            return Err(Error::Unsorted {
                channel: s.channel,
                index,
            });
        }
    }
    let mut hist = CorrelationHistogram::empty(bin_width, range, (a.channel, b.channel))?;
    correlate_slices(&a.tags, &b.tags, &mut hist);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timetag::StreamMeta;
    use proptest::prelude::*;

    fn stream(ch: u16, tags: Vec<u64>) -> TimeTagStream {
        TimeTagStream::new(ch, tags, StreamMeta::default()).unwrap()
    }

    fn brute(a: &[u64], b: &[u64], bw: u64, range: u64) -> Vec<u64> {
        let bins = (2 * range).div_ceil(bw) as usize;
        let mut c = vec![0; bins];
        for &x in a {
            for &y in b {
                let d = y as i128 - x as i128;
                if d.abs() <= range as i128 {
                    let idx = ((d + range as i128) / bw as i128) as usize;
                    c[idx.min(bins - 1)] += 1;
                }
            }
        }
        c
    }

    #[test]
    fn comb_self_correlation() {
        let tags: Vec<u64> = (0..100).map(|k| 1000 + k * 500).collect();
        let s = stream(1, tags);
        let h = cross_correlate(&s, &s, 10, 1600).unwrap();
        for (i, &c) in h.counts.iter().enumerate() {
            let lower = h.bin_center(i) - 5.0;
            let k = (lower / 500.0).ceil();
            if k * 500.0 < lower + 10.0 {
                assert_eq!(c, 100 - k.abs() as u64, "bin {i}");
            } else {
                assert_eq!(c, 0);
            }
        }
    }

    #[test]
    fn edge_delays_land_in_edge_bins() {
        let a = stream(1, vec![100]);
        let b = stream(2, vec![90, 110, 111]);
        let h = cross_correlate(&a, &b, 5, 10).unwrap();
        assert_eq!(h.counts, vec![1, 0, 0, 1]);
        assert_eq!(h.total_pairs, 2);
    }

    #[test]
    fn unsorted_input_rejected() {
        let good = stream(1, vec![1, 2]);
        let bad = TimeTagStream {
            channel: 4,
            tags: vec![5, 3],
            meta: StreamMeta::default(),
        };
        assert!(matches!(
            cross_correlate(&good, &bad, 1, 10),
            Err(Error::Unsorted {
                channel: 4,
                index: 1
            })
        ));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            mut a in proptest::collection::vec(0u64..20_000, 0..300),
            mut b in proptest::collection::vec(0u64..20_000, 0..300),
            bw in 1u64..50, range in 1u64..3000,
        ) {
            a.sort_unstable(); a.dedup();
            b.sort_unstable(); b.dedup();
            let h = cross_correlate(&stream(1, a.clone()), &stream(2, b.clone()), bw, range).unwrap();
            let expect = brute(&a, &b, bw, range);
            prop_assert_eq!(h.total_pairs, expect.iter().sum::<u64>());
            prop_assert_eq!(h.counts, expect);
        }
    }
}
