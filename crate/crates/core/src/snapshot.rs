//! Binary density-matrix snapshots.
//!
//! Layout, all little-endian: magic `KFLX`, `u16` version, `u32` N, then
//! ħ, q, K, γ, T as `f64`, `u64` kick counter, and N² entries in row-major
//! order, each as `f64` real part followed by `f64` imaginary part.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operator::{DensityMatrix, OperatorMatrix};
use crate::params::SystemParams;

pub const MAGIC: &[u8; 4] = b"KFLX";
pub const VERSION: u16 = 1;

/// Size in bytes of a snapshot of dimension `n`.
pub fn encoded_len(n: usize) -> usize {
    4 + 2 + 4 + 5 * 8 + 8 + n * n * 16
}

/// Writes `op` with its parameter stamp and kick counter.
pub fn write_operator(w: &mut impl Write, op: &OperatorMatrix, params: &SystemParams, kick: u64) -> Result<()> {
    let n = op.dim();
    let dim = u32::try_from(n).map_err(|_| Error::Snapshot(format!("dimension {n} does not fit in u32")))?;
    let mut buf = Vec::with_capacity(encoded_len(n));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    for v in [
        params.hbar(),
        params.q(),
        params.kick_k(),
        params.gamma(),
        params.period_t(),
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&kick.to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            let z = op.get(i, j);
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_snapshot(w: &mut impl Write, rho: &DensityMatrix) -> Result<()> {
    write_operator(w, rho.op(), rho.params(), rho.kick())
}

pub fn encode(rho: &DensityMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(rho.dim()));
    write_snapshot(&mut out, rho).expect("writing to a Vec cannot fail");
    out
}

/// Decoded contents without density-matrix validation.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSnapshot {
    pub op: OperatorMatrix,
    pub params: SystemParams,
    pub kick: u64,
}

fn take<const L: usize>(r: &mut impl Read) -> Result<[u8; L]> {
    let mut b = [0u8; L];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Snapshot("truncated snapshot".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

fn take_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(take::<8>(r)?))
}

pub fn read_operator(r: &mut impl Read) -> Result<RawSnapshot> {
    if &take::<4>(r)? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u16::from_le_bytes(take::<2>(r)?);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(take::<4>(r)?) as usize;
    let (hbar, q, k, gamma, t) = (take_f64(r)?, take_f64(r)?, take_f64(r)?, take_f64(r)?, take_f64(r)?);
    let params = SystemParams::new(hbar, q, k, gamma, n)?.with_period(t)?;
    let kick = u64::from_le_bytes(take::<8>(r)?);
    let mut entries = vec![0u8; n * n * 16];
    r.read_exact(&mut entries)
        .map_err(|_| Error::Snapshot("truncated snapshot".into()))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Snapshot("trailing bytes after snapshot".into()));
    }
    let at = |i: usize, j: usize| {
        let off = (i * n + j) * 16;
        let re = f64::from_le_bytes(entries[off..off + 8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(entries[off + 8..off + 16].try_into().expect("8 bytes"));
        C64::new(re, im)
    };
    let op = OperatorMatrix::from_fn(n, at);
    Ok(RawSnapshot { op, params, kick })
}

/// Reads and validates a density-matrix snapshot.
pub fn read_snapshot(r: &mut impl Read) -> Result<DensityMatrix> {
    let raw = read_operator(r)?;
    DensityMatrix::new(raw.op, raw.params, raw.kick)
}
