//! Sample files.
//!
//! Baseband files hold interleaved little-endian `i16` pairs, I first.
//! Passband files hold bare little-endian `i16` samples. Both carry a
//! sidecar at `<path>.meta` with `sample_rate`, `chip_rate`, `amplitude`
//! and `if_frequency` as `key=value` lines.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::modem::{IqBuffer, ModemConfig};

#[derive(Debug, Error)]
pub enum IqFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("sidecar {path}: {reason}")]
    Sidecar { path: PathBuf, reason: String },
    #[error("{path}: {len} bytes is not a whole number of samples")]
    Truncated { path: PathBuf, len: usize },
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IqFileError + '_ {
    move |source| IqFileError::Io { path: path.to_path_buf(), source }
}

fn write_sidecar(path: &Path, cfg: &ModemConfig) -> Result<(), IqFileError> {
    let meta = sidecar_path(path);
    let text = format!(
        "sample_rate={}\nchip_rate={}\namplitude={}\nif_frequency={}\n",
        cfg.sample_rate(),
        cfg.chip_rate,
        cfg.amplitude,
        cfg.if_frequency
    );
    fs::write(&meta, text).map_err(io_err(&meta))
}

fn read_sidecar(path: &Path) -> Result<ModemConfig, IqFileError> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(io_err(&meta))?;
    let bad = |reason: String| IqFileError::Sidecar { path: meta.clone(), reason };
    let mut cfg = ModemConfig::default();
    let mut sample_rate = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed line {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        let parse_err = |_| bad(format!("bad value for {k}: {v:?}"));
        match k {
            "sample_rate" => sample_rate = Some(v.parse::<u32>().map_err(|e| parse_err(e.to_string()))?),
            "chip_rate" => cfg.chip_rate = v.parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            "amplitude" => cfg.amplitude = v.parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            "if_frequency" => {
                cfg.if_frequency = v.parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?
            }
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    if let Some(rate) = sample_rate {
        if rate != cfg.sample_rate() {
            return Err(bad(format!("sample_rate {rate} does not match chip_rate {}", cfg.chip_rate)));
        }
    }
    cfg.validate().map_err(|e| bad(e.to_string()))?;
    Ok(cfg)
}

fn samples_to_bytes(samples: impl Iterator<Item = i16>) -> Vec<u8> {
    samples.flat_map(i16::to_le_bytes).collect()
}

fn read_samples(path: &Path) -> Result<Vec<i16>, IqFileError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 2 != 0 {
        return Err(IqFileError::Truncated { path: path.to_path_buf(), len: bytes.len() });
    }
    Ok(bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect())
}

/// Writes a baseband buffer and its sidecar.
pub fn write_iq(path: &Path, buf: &IqBuffer, cfg: &ModemConfig) -> Result<(), IqFileError> {
    fs::write(path, samples_to_bytes(buf.interleaved())).map_err(io_err(path))?;
    write_sidecar(path, cfg)
}

/// Reads a baseband file and its sidecar.
pub fn read_iq(path: &Path) -> Result<(IqBuffer, ModemConfig), IqFileError> {
    let cfg = read_sidecar(path)?;
    let samples = read_samples(path)?;
    if samples.len() % 2 != 0 {
        return Err(IqFileError::Truncated { path: path.to_path_buf(), len: samples.len() * 2 });
    }
    let (i, q) = samples.chunks_exact(2).map(|p| (p[0], p[1])).unzip();
    let buf = IqBuffer::new(i, q, cfg.sample_rate()).expect("equal halves");
    Ok((buf, cfg))
}

/// Writes a passband sample stream and its sidecar.
pub fn write_passband(path: &Path, samples: &[i16], cfg: &ModemConfig) -> Result<(), IqFileError> {
    fs::write(path, samples_to_bytes(samples.iter().copied())).map_err(io_err(path))?;
    write_sidecar(path, cfg)
}

/// Reads a passband file and its sidecar.
pub fn read_passband(path: &Path) -> Result<(Vec<i16>, ModemConfig), IqFileError> {
    let cfg = read_sidecar(path)?;
    Ok((read_samples(path)?, cfg))
}
