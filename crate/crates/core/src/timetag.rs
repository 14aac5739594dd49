//! Timetag streams and their on-disk formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::constants::RESOLUTION_PS;
use crate::error::{Error, Result};
use crate::source::PhotonRecord;

pub const MAGIC: &[u8; 4] = b"PTT1";
pub const FORMAT_VERSION: u32 = 1;
/// Size of the fixed file header in bytes.
pub const HEADER_LEN: usize = 4 + 4 + 2 + 4 + 8 + 8 + 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamMeta {
    pub seed: u64,
    pub config_hash: [u8; 32],
    /// Acquisition length [ps].
    pub duration_ps: u64,
}

/// Strictly increasing detector clicks on one channel [ps].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    pub channel: u16,
    pub tags: Vec<u64>,
    pub meta: StreamMeta,
}

/// Index of the first tag that is not strictly greater than its predecessor.
pub fn first_unsorted(tags: &[u64]) -> Option<usize> {
    tags.windows(2).position(|w| w[1] <= w[0]).map(|i| i + 1)
}

impl TimeTagStream {
    pub fn new(channel: u16, tags: Vec<u64>, meta: StreamMeta) -> Result<Self> {
        if let Some(index) = first_unsorted(&tags) {
            return Err(Error::Unsorted { channel, index });
        }
        Ok(TimeTagStream {
            channel,
            tags,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.extend_from_slice(&self.channel.to_le_bytes());
        header.extend_from_slice(&RESOLUTION_PS.to_le_bytes());
        header.extend_from_slice(&(self.tags.len() as u64).to_le_bytes());
        header.extend_from_slice(&self.meta.seed.to_le_bytes());
        header.extend_from_slice(&self.meta.config_hash);
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(8 * 65_536);
        for chunk in self.tags.chunks(65_536) {
            buf.clear();
            for t in chunk {
                buf.extend_from_slice(&t.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format("file shorter than the timetag header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"PTT1\"",
                &header[0..4]
            )));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let channel = u16::from_le_bytes([header[8], header[9]]);
        let resolution = u32_at(10);
        if resolution != RESOLUTION_PS {
            return Err(Error::Format(format!(
                "unsupported resolution {resolution} ps"
            )));
        }
        let count = u64_at(14);
        let seed = u64_at(22);
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(&header[30..62]);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() as u64 != count.saturating_mul(8) {
            return Err(Error::Format(format!(
                "header announces {count} tags but payload holds {} bytes",
                bytes.len()
            )));
        }
        let tags: Vec<u64> = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let duration_ps = tags.last().map_or(0, |t| t + 1);
        TimeTagStream::new(
            channel,
            tags,
            StreamMeta {
                seed,
                config_hash,
                duration_ps,
            },
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Writes the truth-level photon sidecar table.
pub fn write_truth_csv<W: Write>(photons: &[PhotonRecord], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "emission_time_ps,pulse_index,freq_offset_GHz,origin")?;
    for p in photons {
        writeln!(
            w,
            "{},{},{:.6},{}",
            p.emission_time.round() as i64,
            p.pulse_index,
            p.frequency_offset,
            p.origin.as_str()
        )?;
    }
    w.flush()?;
    Ok(())
}
