//! Little-endian binary encoding with CRC32 framing, shared by the dataset
//! and weights file formats.

use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: [u8; 4] },
    #[error("unsupported version {got} (expected {expected})")]
    Version { got: u32, expected: u32 },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed file: {0}")]
    Malformed(&'static str),
}

const CRC_TABLE: [u32; 256] = build_crc_table();

const fn build_crc_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

/// IEEE CRC32 of a byte slice.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = CRC_TABLE[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

/// Byte sink that tracks a running CRC32 of everything written.
pub struct CrcWriter<W: Write> {
    inner: W,
    crc: u32,
}

impl<W: Write> CrcWriter<W> {
    pub fn new(inner: W) -> Self {
        CrcWriter { inner, crc: 0xFFFF_FFFF }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) -> io::Result<()> {
        for &b in bytes {
            self.crc = CRC_TABLE[((self.crc ^ b as u32) & 0xFF) as usize] ^ (self.crc >> 8);
        }
        self.inner.write_all(bytes)
    }

    pub fn write_u32(&mut self, v: u32) -> io::Result<()> {
        self.write_bytes(&v.to_le_bytes())
    }

    pub fn write_u64(&mut self, v: u64) -> io::Result<()> {
        self.write_bytes(&v.to_le_bytes())
    }

    pub fn write_f32(&mut self, v: f32) -> io::Result<()> {
        self.write_bytes(&v.to_le_bytes())
    }

    pub fn write_f64(&mut self, v: f64) -> io::Result<()> {
        self.write_bytes(&v.to_le_bytes())
    }

    pub fn crc(&self) -> u32 {
        self.crc ^ 0xFFFF_FFFF
    }

    /// Append the running CRC as a little-endian footer and flush.
    pub fn finish(mut self) -> io::Result<W> {
        let crc = self.crc();
        self.inner.write_all(&crc.to_le_bytes())?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Byte source mirroring [`CrcWriter`].
pub struct CrcReader<R: Read> {
    inner: R,
    crc: u32,
}

impl<R: Read> CrcReader<R> {
    pub fn new(inner: R) -> Self {
        CrcReader { inner, crc: 0xFFFF_FFFF }
    }

    pub fn read_bytes(&mut self, buf: &mut [u8]) -> Result<(), FormatError> {
        self.inner.read_exact(buf)?;
        for &b in buf.iter() {
            self.crc = CRC_TABLE[((self.crc ^ b as u32) & 0xFF) as usize] ^ (self.crc >> 8);
        }
        Ok(())
    }

    pub fn read_u32(&mut self) -> Result<u32, FormatError> {
        let mut b = [0u8; 4];
        self.read_bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn read_u64(&mut self) -> Result<u64, FormatError> {
        let mut b = [0u8; 8];
        self.read_bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn read_f32(&mut self) -> Result<f32, FormatError> {
        let mut b = [0u8; 4];
        self.read_bytes(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }

    pub fn read_f64(&mut self) -> Result<f64, FormatError> {
        let mut b = [0u8; 8];
        self.read_bytes(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    /// Read the CRC footer (not itself checksummed) and verify it.
    pub fn verify_crc(mut self) -> Result<(), FormatError> {
        let computed = self.crc ^ 0xFFFF_FFFF;
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        let stored = u32::from_le_bytes(b);
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed });
        }
        Ok(())
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        let mut b = [0u8; 4];
        self.read_bytes(&mut b)?;
        if &b != magic {
            return Err(FormatError::BadMagic { expected: *magic });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc32_known_vector() {
        // "123456789" is the standard check input for CRC-32/IEEE.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn writer_reader_round_trip() {
        let mut w = CrcWriter::new(Vec::new());
        w.write_u32(0xDEAD_BEEF).unwrap();
        w.write_f32(1.5).unwrap();
        w.write_u64(42).unwrap();
        let bytes = w.finish().unwrap();

        let mut r = CrcReader::new(&bytes[..]);
        assert_eq!(r.read_u32().unwrap(), 0xDEAD_BEEF);
        assert_eq!(r.read_f32().unwrap(), 1.5);
        assert_eq!(r.read_u64().unwrap(), 42);
        r.verify_crc().unwrap();
    }

    #[test]
    fn corruption_detected() {
        let mut w = CrcWriter::new(Vec::new());
        w.write_u32(7).unwrap();
        let mut bytes = w.finish().unwrap();
        bytes[1] ^= 0x40;
        let mut r = CrcReader::new(&bytes[..]);
        let _ = r.read_u32().unwrap();
        assert!(matches!(r.verify_crc(), Err(FormatError::Checksum { .. })));
    }
}
