//! Dense row-major complex tensors and the TFK1 binary format.
//!
//! Layout: magic `TFK1`, u32 LE rank, rank x u32 LE dims, then the values
//! as (re, im) f64 LE pairs, last index fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TFK1";

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    pub dims: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn new(dims: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        let len = checked_len(&dims)?;
        if values.len() != len {
            return Err(Error::Dimension(format!(
                "{} values for dims {:?} ({} expected)",
                values.len(),
                dims,
                len
            )));
        }
        Ok(ComplexTensor { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = checked_len(&dims)?;
        Ok(ComplexTensor { dims, values: vec![Complex64::new(0.0, 0.0); len] })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            let d32 = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
            w.write_all(&d32.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected TFK1".into()));
        }
        let rank = read_u32(&mut r, "rank")? as usize;
        if rank == 0 {
            return Err(Error::Format("rank-0 tensor".into()));
        }
        if rank > 16 {
            return Err(Error::Format(format!("implausible rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(&mut r, "dims")? as usize);
        }
        let len = checked_len(&dims)?;
        let mut values = Vec::new();
        let mut buf = [0u8; 16];
        for _ in 0..len {
            read_exact(&mut r, &mut buf, "payload")?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            values.push(Complex64::new(re, im));
        }
        Ok(ComplexTensor { dims, values })
    }

    pub fn write_tfk1(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read_tfk1(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::Format("rank-0 tensor".into()));
    }
    let mut len: usize = 1;
    for &d in dims {
        if d == 0 {
            return Err(Error::Format("zero dimension".into()));
        }
        len = len
            .checked_mul(d)
            .filter(|&l| l <= (usize::MAX >> 5))
            .ok_or_else(|| Error::Format(format!("dimension overflow for {dims:?}")))?;
    }
    Ok(len)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}
