//! Packed bit sequences with provenance.
//!
//! Bits are packed most-significant-bit first. The final byte is zero-padded.
//! On disk a stream is a raw byte file plus a JSON sidecar (`<file>.json`)
//! holding `{length, meta}`; an ASCII `0`/`1` export is also supported.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapKind;

/// One post-processing step applied to a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PostprocessRecord {
    VonNeumann,
    XorDebias { l: usize, stages: usize },
}

/// Generation parameters echoed alongside a stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_kind: Option<MapKind>,
    /// Per-stage `(dg1, dg2)` slope deviations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discard: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub postprocess: Vec<PostprocessRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: usize,
    meta: StreamMeta,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    length: usize,
    meta: StreamMeta,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
            meta: StreamMeta::default(),
        }
    }

    /// Packs a slice of 0/1 values; any nonzero value counts as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        bits.iter().map(|&b| b != 0).collect()
    }

    /// Wraps already-packed bytes, rejecting streams whose byte count or
    /// padding disagrees with `len`.
    pub fn from_packed(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::CorruptStream(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let rem = len % 8;
        if rem != 0 && bytes[bytes.len() - 1] & (0xffu8 >> rem) != 0 {
            return Err(Error::CorruptStream("nonzero padding in final byte".into()));
        }
        Ok(Self {
            bytes,
            len,
            meta: StreamMeta::default(),
        })
    }

    /// Parses an ASCII `0`/`1` string; whitespace is ignored.
    pub fn from_ascii(s: &str) -> Result<Self> {
        let mut out = BitStream::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                c if c.is_whitespace() => {}
                c => {
                    return Err(Error::CorruptStream(format!(
                        "unexpected character {c:?} at offset {i}"
                    )))
                }
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        let offset = self.len % 8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> offset;
        }
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.bytes[i / 8] >> (7 - i % 8)) & 1
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Unpacks into one byte per bit.
    pub fn to_bits(&self) -> Vec<u8> {
        self.iter().collect()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn meta(&self) -> &StreamMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut StreamMeta {
        &mut self.meta
    }

    pub fn with_meta(mut self, meta: StreamMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Bits from `start` to the end, keeping the metadata.
    pub fn slice_from(&self, start: usize) -> Self {
        let mut out: BitStream = (start.min(self.len)..self.len).map(|i| self.get(i) == 1).collect();
        out.meta = self.meta.clone();
        out
    }

    pub fn to_ascii(&self) -> String {
        self.iter().map(|b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// Path of the JSON sidecar that accompanies a packed stream file.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes the packed bytes to `path` and `{length, meta}` to the sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.bytes)?;
        let sidecar = Sidecar {
            length: self.len,
            meta: self.meta.clone(),
        };
        fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Reads a packed stream. Without a sidecar every byte is taken as 8 bits.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let sidecar_path = Self::sidecar_path(path);
        if !sidecar_path.exists() {
            let len = bytes.len() * 8;
            return Self::from_packed(bytes, len);
        }
        let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
        Ok(Self::from_packed(bytes, sidecar.length)?.with_meta(sidecar.meta))
    }

    pub fn write_ascii(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ascii())?;
        Ok(())
    }

    pub fn read_ascii(path: &Path) -> Result<Self> {
        Self::from_ascii(&fs::read_to_string(path)?)
    }

    /// Reads either format: `.txt` files are ASCII, everything else packed.
    pub fn read_any(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => Self::read_ascii(path),
            _ => Self::read(path),
        }
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let iter = iter.into_iter();
        let mut out = BitStream::with_capacity(iter.size_hint().0);
        for b in iter {
            out.push(b);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_packing() {
        let s = BitStream::from_bits(&[1, 0, 1, 1, 0, 0, 0, 0, 1]);
        assert_eq!(s.bytes(), &[0b1011_0000, 0b1000_0000]);
        assert_eq!(s.len(), 9);
        assert_eq!(s.count_ones(), 4);
        assert_eq!(s.to_ascii(), "101100001");
    }

    #[test]
    fn rejects_length_mismatch_and_dirty_padding() {
        assert!(matches!(
            BitStream::from_packed(vec![0xff, 0x00], 17),
            Err(Error::CorruptStream(_))
        ));
        assert!(matches!(
            BitStream::from_packed(vec![0b1010_0001], 4),
            Err(Error::CorruptStream(_))
        ));
        assert!(BitStream::from_packed(vec![0b1010_0000], 4).is_ok());
    }

    #[test]
    fn ascii_parse_errors() {
        assert_eq!(BitStream::from_ascii("01 1\n0").unwrap().to_ascii(), "0110");
        assert!(BitStream::from_ascii("0102").is_err());
    }

    #[test]
    fn sidecar_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let mut s = BitStream::from_bits(&[1, 1, 0, 1, 0]);
        s.meta_mut().seed = Some(7);
        s.meta_mut().postprocess.push(PostprocessRecord::XorDebias { l: 5, stages: 4 });
        s.write(&path).unwrap();
        let back = BitStream::read(&path).unwrap();
        assert_eq!(back, s);

        std::fs::write(BitStream::sidecar_path(&path), r#"{"length": 40, "meta": {}}"#).unwrap();
        assert!(matches!(BitStream::read(&path), Err(Error::CorruptStream(_))));
    }

    proptest! {
        #[test]
        fn pack_unpack(bits in proptest::collection::vec(0u8..2, 0..200)) {
            let s = BitStream::from_bits(&bits);
            prop_assert_eq!(s.to_bits(), bits.clone());
            let again = BitStream::from_packed(s.bytes().to_vec(), s.len()).unwrap();
            prop_assert_eq!(again.to_bits(), bits.clone());
            prop_assert_eq!(BitStream::from_ascii(&s.to_ascii()).unwrap().to_bits(), bits);
        }
    }
}
