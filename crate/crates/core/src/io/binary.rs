//! Little-endian binary time series:
//! magic `CCTS0001`, `dt` f64, `t0` f64, label length u32 and UTF-8 bytes,
//! sample count u64, then the samples as f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::waveform::{SeriesLabel, TimeSeries};

const MAGIC: &[u8; 8] = b"CCTS0001";

pub fn write_series_binary(path: &Path, ts: &TimeSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&ts.dt().to_le_bytes())?;
    w.write_all(&ts.t0().to_le_bytes())?;
    let label = ts.label().as_str().as_bytes();
    w.write_all(&(label.len() as u32).to_le_bytes())?;
    w.write_all(label)?;
    w.write_all(&(ts.len() as u64).to_le_bytes())?;
    for v in ts.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_series_binary(path: &Path) -> Result<TimeSeries> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_array::<8>(&mut r)? != MAGIC {
        return Err(Error::Parse { what: "binary series".into(), reason: "bad magic".into() });
    }
    let dt = f64::from_le_bytes(read_array(&mut r)?);
    let t0 = f64::from_le_bytes(read_array(&mut r)?);
    let label_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if label_len > 64 {
        return Err(Error::Parse { what: "binary series".into(), reason: "label too long".into() });
    }
    let mut label = vec![0u8; label_len];
    r.read_exact(&mut label)?;
    let label: SeriesLabel = String::from_utf8(label)
        .map_err(|_| Error::Parse { what: "binary series".into(), reason: "label is not UTF-8".into() })?
        .parse()?;
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Parse {
            what: "binary series".into(),
            reason: format!("expected {} bytes of samples, found {}", n * 8, bytes.len()),
        });
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    TimeSeries::new(dt, t0, values, label)
}
