//! Bounded-memory correlation of streams delivered in time-ordered blocks.

use super::{correlate_slices, CorrelationHistogram};
use crate::error::{Error, Result};

/// Incremental correlator: memory is bounded by the block size plus `2·range` of history.
///
/// Call [`push`](Self::push) with the tags of both channels that fall before `upto`,
/// then [`finish`](Self::finish). The result equals [`super::cross_correlate`] on the
/// concatenated streams.
#[derive(Debug)]
pub struct StreamCorrelator {
    hist: CorrelationHistogram,
    pending_a: Vec<u64>,
    window_b: Vec<u64>,
    last: [Option<u64>; 2],
    upto: u64,
    processed_a: u64,
}

impl StreamCorrelator {
    pub fn new(bin_width: u64, range: u64, channel_pair: (u16, u16)) -> Result<Self> {
        Ok(StreamCorrelator {
            hist: CorrelationHistogram::empty(bin_width, range, channel_pair)?,
            pending_a: Vec::new(),
            window_b: Vec::new(),
            last: [None, None],
            upto: 0,
            processed_a: 0,
        })
    }

    fn check(&mut self, which: usize, tags: &[u64]) -> Result<()> {
        let channel = if which == 0 {
            self.hist.channel_pair.0
        } else {
            self.hist.channel_pair.1
        };
        let mut prev = self.last[which];
        for (i, &t) in tags.iter().enumerate() {
            if prev.is_some_and(|p| t <= p) || t < self.upto {
                return Err(Error::Unsorted { channel, index: i });
            }
            prev = Some(t);
        }
        self.last[which] = prev;
        Ok(())
    }

    /// Delivers all remaining tags below `upto` on both channels.
    pub fn push(&mut self, a: &[u64], b: &[u64], upto: u64) -> Result<()> {
        self.check(0, a)?;
        self.check(1, b)?;
        if a.iter().chain(b).any(|&t| t >= upto) {
            return Err(Error::domain(
                "block contains tags at or beyond its `upto` bound",
            ));
        }
        self.upto = upto;
        self.pending_a.extend_from_slice(a);
        self.window_b.extend_from_slice(b);
        let range = self.hist.range;
        // a-tags whose full partner window lies below `upto` are complete
        let ready = self
            .pending_a
            .partition_point(|&t| t.saturating_add(range) < upto);
        if ready > 0 {
            correlate_slices(&self.pending_a[..ready], &self.window_b, &mut self.hist);
            self.processed_a += ready as u64;
            self.pending_a.drain(..ready);
        }
        // future a-tags are ≥ the first pending tag (or ≥ upto)
        let horizon = self
            .pending_a
            .first()
            .copied()
            .unwrap_or(upto)
            .saturating_sub(range);
        let stale = self.window_b.partition_point(|&t| t < horizon);
        self.window_b.drain(..stale);
        Ok(())
    }

    pub fn finish(mut self) -> CorrelationHistogram {
        if !self.pending_a.is_empty() {
            correlate_slices(&self.pending_a, &self.window_b, &mut self.hist);
        }
        self.hist
    }

    /// Tags of the first channel fully processed so far.
    pub fn processed(&self) -> u64 {
        self.processed_a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlate::cross_correlate;
    use crate::timetag::{StreamMeta, TimeTagStream};
    use rand::{Rng, SeedableRng};

    #[test]
    fn blockwise_equals_whole() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut a: Vec<u64> = (0..20_000)
            .map(|_| rng.random_range(0..10_000_000))
            .collect();
        let mut b: Vec<u64> = (0..20_000)
            .map(|_| rng.random_range(0..10_000_000))
            .collect();
        a.sort_unstable();
        a.dedup();
        b.sort_unstable();
        b.dedup();
        let whole = cross_correlate(
            &TimeTagStream::new(0, a.clone(), StreamMeta::default()).unwrap(),
            &TimeTagStream::new(1, b.clone(), StreamMeta::default()).unwrap(),
            7,
            40_000,
        )
        .unwrap();
        let mut sc = StreamCorrelator::new(7, 40_000, (0, 1)).unwrap();
        let block = 123_457u64;
        let mut t0 = 0;
        while t0 < 10_000_000 {
            let t1 = t0 + block;
            let pick = |v: &[u64]| {
                v.iter()
                    .copied()
                    .filter(|&t| t >= t0 && t < t1)
                    .collect::<Vec<_>>()
            };
            sc.push(&pick(&a), &pick(&b), t1).unwrap();
            t0 = t1;
        }
        assert_eq!(sc.finish(), whole);
    }

    #[test]
    fn out_of_order_block_rejected() {
        let mut sc = StreamCorrelator::new(1, 10, (0, 1)).unwrap();
        sc.push(&[5, 9], &[7], 100).unwrap();
        assert!(sc.push(&[50], &[], 200).is_err());
    }
}
