//! Raw IQ files: little-endian `f32` interleaved I,Q plus a text sidecar
//! (`<file>.hdr`) with `sample_rate_hz`, `units` and `length`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{IqStream, Units};

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn units_name(u: Units) -> &'static str {
    match u {
        Units::Arbitrary => "ARBITRARY",
        Units::SnuSqrt => "SNU_SQRT",
    }
}

pub fn write_iq<T: Scalar>(path: &Path, stream: &IqStream<T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for s in &stream.samples {
        w.write_all(&(s.re.as_f64() as f32).to_le_bytes())?;
        w.write_all(&(s.im.as_f64() as f32).to_le_bytes())?;
    }
    w.flush()?;
    let header = format!(
        "sample_rate_hz = {}\nunits = {}\nlength = {}\n",
        stream.sample_rate_hz.as_f64(),
        units_name(stream.units),
        stream.len()
    );
    fs::write(sidecar(path), header)?;
    Ok(())
}

pub fn read_iq(path: &Path) -> Result<IqStream<f32>> {
    let header = fs::read_to_string(sidecar(path))?;
    let mut rate = None;
    let mut units = None;
    let mut length = None;
    for line in header.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        match k.trim() {
            "sample_rate_hz" => rate = v.trim().parse::<f32>().ok(),
            "units" => {
                units = match v.trim() {
                    "ARBITRARY" => Some(Units::Arbitrary),
                    "SNU_SQRT" => Some(Units::SnuSqrt),
                    _ => None,
                }
            }
            "length" => length = v.trim().parse::<usize>().ok(),
            _ => {}
        }
    }
    let (Some(rate), Some(units), Some(length)) = (rate, units, length) else {
        return Err(Error::Io(format!("incomplete IQ header for {}", path.display())));
    };
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * length {
        return Err(Error::Io(format!(
            "{} holds {} bytes, header says {} samples",
            path.display(),
            bytes.len(),
            length
        )));
    }
    let f = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    let samples = bytes
        .chunks_exact(8)
        .map(|c| Complex::new(f(&c[..4]), f(&c[4..])))
        .collect();
    IqStream::new(samples, rate, units)
}
