//! Flat binary spill files for sample buffers.
//!
//! Layout (little endian): magic `SDCB`, u32 version, u8 kind, u64 capacity,
//! u64 seen, u32 slot count, u64 record count, then per record a u32 payload
//! length followed by u32 iteration, u32 mask, u32 feature count, the f32
//! features and the f32 slot targets. A u32 CRC-32 of everything before it
//! closes the file.

use std::io::{Read, Write};

use crate::game::LegalMask;

use super::{AdvantageSample, ReservoirBuffer, SamplingError, StrategySample, TrainingSample};

pub const SPILL_MAGIC: &[u8; 4] = b"SDCB";
pub const SPILL_VERSION: u32 = 1;

pub trait SpillRecord: TrainingSample + Sized {
    const KIND: u8;
    fn from_parts(features: Vec<f32>, target: Vec<f32>, mask: LegalMask, iteration: u32) -> Self;
}

impl SpillRecord for AdvantageSample {
    const KIND: u8 = 0;
    fn from_parts(features: Vec<f32>, target: Vec<f32>, mask: LegalMask, iteration: u32) -> Self {
        AdvantageSample { features, target, mask, iteration, key: None }
    }
}

impl SpillRecord for StrategySample {
    const KIND: u8 = 1;
    fn from_parts(features: Vec<f32>, target: Vec<f32>, mask: LegalMask, iteration: u32) -> Self {
        StrategySample { features, target, mask, iteration, key: None }
    }
}

/// Serializes `buffer`, whose targets have `n_slots` entries.
pub fn write_spill<T: SpillRecord, W: Write>(
    buffer: &ReservoirBuffer<T>,
    n_slots: usize,
    mut w: W,
) -> Result<(), SamplingError> {
    let mut out = Vec::new();
    out.extend_from_slice(SPILL_MAGIC);
    out.extend_from_slice(&SPILL_VERSION.to_le_bytes());
    out.push(T::KIND);
    out.extend_from_slice(&(buffer.capacity() as u64).to_le_bytes());
    out.extend_from_slice(&buffer.seen().to_le_bytes());
    out.extend_from_slice(&(n_slots as u32).to_le_bytes());
    out.extend_from_slice(&(buffer.len() as u64).to_le_bytes());
    for s in buffer.iter() {
        if s.target().len() != n_slots {
            return Err(SamplingError::Inconsistent("target length differs from slot count".into()));
        }
        let payload = 12 + 4 * (s.features().len() + n_slots);
        out.extend_from_slice(&(payload as u32).to_le_bytes());
        out.extend_from_slice(&s.iteration().to_le_bytes());
        out.extend_from_slice(&s.mask().0.to_le_bytes());
        out.extend_from_slice(&(s.features().len() as u32).to_le_bytes());
        for x in s.features().iter().chain(s.target()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    w.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SamplingError> {
        let s = self.buf.get(self.pos..self.pos + n).ok_or(SamplingError::Truncated)?;
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, SamplingError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, SamplingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, SamplingError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, SamplingError> {
        Ok(self.take(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Reads a spill file back into a buffer, checking magic, version, kind and checksum.
pub fn read_spill<T: SpillRecord, R: Read>(mut r: R) -> Result<ReservoirBuffer<T>, SamplingError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 4 {
        return Err(SamplingError::Truncated);
    }
    if &bytes[..4] != SPILL_MAGIC {
        return Err(SamplingError::BadMagic);
    }
    let mut c = Cursor { buf: &bytes, pos: 4 };
    let version = c.u32()?;
    if version != SPILL_VERSION {
        return Err(SamplingError::VersionMismatch { found: version });
    }
    if c.u8()? != T::KIND {
        return Err(SamplingError::Inconsistent("spill holds the other sample kind".into()));
    }
    let capacity = c.u64()? as usize;
    let seen = c.u64()?;
    let n_slots = c.u32()? as usize;
    let count = c.u64()?;
    let mut entries = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let payload = c.u32()? as usize;
        let start = c.pos;
        let iteration = c.u32()?;
        let mask = LegalMask(c.u32()?);
        let n_feat = c.u32()? as usize;
        let features = c.f32s(n_feat)?;
        let target = c.f32s(n_slots)?;
        if c.pos - start != payload {
            return Err(SamplingError::Inconsistent("record length prefix disagrees with contents".into()));
        }
        entries.push(T::from_parts(features, target, mask, iteration));
    }
    let body_end = c.pos;
    let crc = c.u32()?;
    if c.pos != bytes.len() {
        return Err(SamplingError::Inconsistent("trailing bytes after checksum".into()));
    }
    if crc32fast::hash(&bytes[..body_end]) != crc {
        return Err(SamplingError::ChecksumMismatch);
    }
    ReservoirBuffer::from_parts(capacity, entries, seen)
        .ok_or_else(|| SamplingError::Inconsistent("record count disagrees with capacity and seen".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn buffer() -> ReservoirBuffer<AdvantageSample> {
        let mut rng = stream(0, Purpose::Test, 0, 0);
        let mut b = ReservoirBuffer::new(4);
        for i in 0..7u32 {
            let s = AdvantageSample::from_parts(
                vec![i as f32, -0.5, f32::MIN_POSITIVE],
                vec![1.25 * i as f32, 0.0, -3.0],
                LegalMask::from_slots(&[0, 2]),
                i + 1,
            );
            b.insert(s, &mut rng);
        }
        b
    }

    #[test]
    fn round_trip_is_exact() {
        let b = buffer();
        let mut bytes = Vec::new();
        write_spill(&b, 3, &mut bytes).unwrap();
        let back: ReservoirBuffer<AdvantageSample> = read_spill(bytes.as_slice()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = Vec::new();
        write_spill(&buffer(), 3, &mut bytes).unwrap();
        let mut flipped = bytes.clone();
        flipped[60] ^= 1;
        assert!(matches!(read_spill::<AdvantageSample, _>(flipped.as_slice()), Err(SamplingError::ChecksumMismatch)));
        assert!(matches!(
            read_spill::<AdvantageSample, _>(&bytes[..bytes.len() - 9]),
            Err(SamplingError::Truncated)
        ));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(read_spill::<AdvantageSample, _>(magic.as_slice()), Err(SamplingError::BadMagic)));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(
            read_spill::<AdvantageSample, _>(version.as_slice()),
            Err(SamplingError::VersionMismatch { found: 9 })
        ));
        assert!(matches!(read_spill::<StrategySample, _>(bytes.as_slice()), Err(SamplingError::Inconsistent(_))));
    }
}
