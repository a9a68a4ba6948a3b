//! Shared helpers for the versioned little-endian binary file formats
//! (model checkpoints, activation dumps, reading vectors, steering
//! policies). Every format starts with a 4-byte magic and a u32 version;
//! strings are u32-length-prefixed UTF-8.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io failure: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt file: {0}")]
    Corrupt(String),
}

impl FormatError {
    pub fn corrupt(msg: impl Into<String>) -> Self {
        Self::Corrupt(msg.into())
    }
}

pub fn write_magic(w: &mut impl Write, magic: &[u8; 4]) -> Result<(), FormatError> {
    w.write_all(magic)?;
    Ok(())
}

pub fn expect_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<(), FormatError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| FormatError::corrupt("file too short for magic"))?;
    if &buf != magic {
        return Err(FormatError::corrupt(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub fn write_u8(w: &mut impl Write, v: u8) -> Result<(), FormatError> {
    w.write_all(&[v])?;
    Ok(())
}

pub fn read_u8(r: &mut impl Read) -> Result<u8, FormatError> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf).map_err(|_| FormatError::corrupt("truncated u8"))?;
    Ok(buf[0])
}

pub fn write_u32(w: &mut impl Write, v: u32) -> Result<(), FormatError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_u32(r: &mut impl Read) -> Result<u32, FormatError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| FormatError::corrupt("truncated u32"))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_u64(w: &mut impl Write, v: u64) -> Result<(), FormatError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_u64(r: &mut impl Read) -> Result<u64, FormatError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| FormatError::corrupt("truncated u64"))?;
    Ok(u64::from_le_bytes(buf))
}

pub fn write_f64(w: &mut impl Write, v: f64) -> Result<(), FormatError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_f64(r: &mut impl Read) -> Result<f64, FormatError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| FormatError::corrupt("truncated f64"))?;
    Ok(f64::from_le_bytes(buf))
}

pub fn write_f64_slice(w: &mut impl Write, values: &[f64]) -> Result<(), FormatError> {
    for &v in values {
        write_f64(w, v)?;
    }
    Ok(())
}

pub fn read_f64_vec(r: &mut impl Read, len: usize) -> Result<Vec<f64>, FormatError> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(read_f64(r)?);
    }
    Ok(out)
}

pub fn write_f32_slice(w: &mut impl Write, values: &[f64]) -> Result<(), FormatError> {
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_f32_vec_as_f64(r: &mut impl Read, len: usize) -> Result<Vec<f64>, FormatError> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf).map_err(|_| FormatError::corrupt("truncated f32"))?;
        out.push(f32::from_le_bytes(buf) as f64);
    }
    Ok(out)
}

pub fn write_string(w: &mut impl Write, s: &str) -> Result<(), FormatError> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_string(r: &mut impl Read) -> Result<String, FormatError> {
    let len = read_u32(r)? as usize;
    if len > 64 * 1024 * 1024 {
        return Err(FormatError::corrupt("string length implausibly large"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|_| FormatError::corrupt("truncated string"))?;
    String::from_utf8(buf).map_err(|_| FormatError::corrupt("string not valid UTF-8"))
}

/// Fail if any bytes remain; trailing garbage means the file is not what it
/// claims to be.
pub fn expect_eof(r: &mut impl Read) -> Result<(), FormatError> {
    let mut buf = [0u8; 1];
    match r.read(&mut buf)? {
        0 => Ok(()),
        _ => Err(FormatError::corrupt("trailing bytes after payload")),
    }
}
