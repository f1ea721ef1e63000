//! Binary trajectory files.
//!
//! Layout (little endian): the magic `LCSWTRJ1`, a fixed header
//! (`u32` version, `u8` scheme, `u8` warning flags, `u16` reserved, `u64`
//! seed, `f64` aleph, `u64` n_a_max, `u64` n_b_max, `f64` dt_sample, `f64`
//! transient cut, `u64` samples, `u64` jumps), seven `f64` columns
//! `t, ñ_a, ñ_b, Re α̃, Im α̃, Re β̃, Im β̃`, then `(f64 time, u8 channel)`
//! per jump.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use super::propagator::{JumpChannel, JumpEvent};
use super::trajectory::{TrajectoryRecord, TruncationWarnings};
use crate::error::{Error, Result};
use crate::model::{FockCutoffs, Scheme};

pub const MAGIC: &[u8; 8] = b"LCSWTRJ1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 1 + 2 + 8 * 8;

pub fn encode_record(r: &TrajectoryRecord) -> Vec<u8> {
    let n = r.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 56 * n + 9 * r.jumps.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(r.scheme.tag());
    out.push(u8::from(r.warnings.optical) | (u8::from(r.warnings.mechanical) << 1));
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&r.seed.to_le_bytes());
    out.extend_from_slice(&r.aleph.to_le_bytes());
    out.extend_from_slice(&(r.cutoffs.n_a_max as u64).to_le_bytes());
    out.extend_from_slice(&(r.cutoffs.n_b_max as u64).to_le_bytes());
    out.extend_from_slice(&r.dt_sample.to_le_bytes());
    out.extend_from_slice(&r.transient_cut.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(r.jumps.len() as u64).to_le_bytes());
    let columns: [Box<dyn Fn(usize) -> f64 + '_>; 7] = [
        Box::new(|k| r.times[k]),
        Box::new(|k| r.n_a[k]),
        Box::new(|k| r.n_b[k]),
        Box::new(|k| r.alpha[k].re),
        Box::new(|k| r.alpha[k].im),
        Box::new(|k| r.beta[k].re),
        Box::new(|k| r.beta[k].im),
    ];
    for col in &columns {
        for k in 0..n {
            out.extend_from_slice(&col(k).to_le_bytes());
        }
    }
    for j in &r.jumps {
        out.extend_from_slice(&j.time.to_le_bytes());
        out.push(j.channel.as_byte());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn column(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_record(buf: &[u8]) -> Result<TrajectoryRecord> {
    let mut rd = Reader { buf, pos: 0 };
    if rd.take(8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = rd.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let scheme = Scheme::from_tag(rd.u8()?).ok_or_else(|| Error::Format("unknown scheme tag".into()))?;
    let flags = rd.u8()?;
    let _reserved = rd.u16()?;
    let seed = rd.u64()?;
    let aleph = rd.f64()?;
    let cutoffs = FockCutoffs::new(rd.u64()? as usize, rd.u64()? as usize);
    let dt_sample = rd.f64()?;
    let transient_cut = rd.f64()?;
    let n = rd.u64()? as usize;
    let n_jumps = rd.u64()? as usize;
    let expected = n
        .checked_mul(56)
        .and_then(|c| n_jumps.checked_mul(9).and_then(|j| c.checked_add(j)))
        .and_then(|b| b.checked_add(HEADER_LEN));
    if expected != Some(buf.len()) {
        return Err(Error::Format(format!(
            "length {} does not match header ({n} samples, {n_jumps} jumps)",
            buf.len()
        )));
    }
    let times = rd.column(n)?;
    let n_a = rd.column(n)?;
    let n_b = rd.column(n)?;
    let (ar, ai) = (rd.column(n)?, rd.column(n)?);
    let (br, bi) = (rd.column(n)?, rd.column(n)?);
    let mut jumps = Vec::with_capacity(n_jumps);
    for _ in 0..n_jumps {
        let time = rd.f64()?;
        let channel = JumpChannel::from_byte(rd.u8()?).ok_or_else(|| Error::Format("unknown jump channel".into()))?;
        jumps.push(JumpEvent { time, channel });
    }
    let rec = TrajectoryRecord {
        seed,
        aleph,
        scheme,
        cutoffs,
        dt_sample,
        transient_cut,
        times,
        n_a,
        n_b,
        alpha: ar.iter().zip(&ai).map(|(&re, &im)| Complex64::new(re, im)).collect(),
        beta: br.iter().zip(&bi).map(|(&re, &im)| Complex64::new(re, im)).collect(),
        jumps,
        warnings: TruncationWarnings {
            optical: flags & 1 != 0,
            mechanical: flags & 2 != 0,
        },
    };
    rec.validate()?;
    Ok(rec)
}

pub fn write_record(path: &Path, r: &TrajectoryRecord) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_record(r))?;
    w.flush()?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<TrajectoryRecord> {
    decode_record(&fs::read(path)?)
}
