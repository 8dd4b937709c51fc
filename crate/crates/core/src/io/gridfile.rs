//! Grid file format.
//!
//! ```text
//! binary:  b"SGRD0001" | header | "\n" | n_bias·n_freq·(1|2) little-endian f64
//! text:               header | "\n" | one comma-separated line per trace
//! header:  key=value lines, UTF-8, every key below exactly once
//! ```
//!
//! Complex payloads interleave (re, im). Text values use 17 significant
//! digits, which round-trips every f64.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::model::DeviceParams;
use crate::sim::grid::{Axis, GridData, GridMeta, SpectrumGrid, SweepDirection};

pub const MAGIC: &[u8; 8] = b"SGRD0001";
pub const FORMAT_VERSION: u32 = 1;

const KEYS: [&str; 19] = [
    "format_version",
    "n_freq",
    "n_bias",
    "f_start_hz",
    "f_step_hz",
    "v_start_v",
    "v_step_v",
    "trace_time_s",
    "t0_s",
    "complex",
    "seed",
    "sweep_direction",
    "device.d0",
    "device.cap_area",
    "device.v_total",
    "device.eps_r",
    "device.f_c",
    "device.q_c",
    "device.q_i0",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridFormat {
    Text,
    Binary,
}

impl GridFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text" => Some(GridFormat::Text),
            "binary" => Some(GridFormat::Binary),
            _ => None,
        }
    }
}

/// Parse failures. Every variant names the byte offset where the problem
/// was detected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("byte {offset}: not a grid file (bad magic)")]
    BadMagic { offset: usize },
    #[error("byte {offset}: header is not valid UTF-8")]
    NonUtf8 { offset: usize },
    #[error("byte {offset}: malformed header line {line:?}")]
    MalformedLine { offset: usize, line: String },
    #[error("byte {offset}: unknown header key {key:?}")]
    UnknownKey { offset: usize, key: String },
    #[error("byte {offset}: duplicate header key {key:?}")]
    DuplicateKey { offset: usize, key: String },
    #[error("byte {offset}: missing header key {key:?}")]
    MissingKey { offset: usize, key: String },
    #[error("byte {offset}: bad value {value:?} for {key}")]
    BadValue { offset: usize, key: String, value: String },
    #[error("byte {offset}: unsupported format_version {version}")]
    UnsupportedVersion { offset: usize, version: String },
    #[error("byte {offset}: header ends without the blank separator line")]
    UnterminatedHeader { offset: usize },
    #[error("byte {offset}: expected {expected} values, found {found}")]
    DimensionMismatch { offset: usize, expected: usize, found: usize },
    #[error("byte {offset}: payload truncated, expected {expected} bytes, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
    #[error("byte {offset}: unexpected data after payload")]
    TrailingData { offset: usize },
    #[error("byte {offset}: invalid number {token:?}")]
    BadNumber { offset: usize, token: String },
}

fn write_header(grid: &SpectrumGrid) -> String {
    let d = &grid.meta.device;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("format_version", FORMAT_VERSION.to_string());
    kv("n_freq", grid.freqs.len.to_string());
    kv("n_bias", grid.biases.len.to_string());
    kv("f_start_hz", grid.freqs.start.to_string());
    kv("f_step_hz", grid.freqs.step.to_string());
    kv("v_start_v", grid.biases.start.to_string());
    kv("v_step_v", grid.biases.step.to_string());
    kv("trace_time_s", grid.trace_time_s.to_string());
    kv("t0_s", grid.t0_s.to_string());
    kv("complex", grid.data.is_complex().to_string());
    kv("seed", grid.meta.seed.to_string());
    kv("sweep_direction", grid.meta.direction.as_str().to_string());
    kv("device.d0", d.d0.to_string());
    kv("device.cap_area", d.cap_area.to_string());
    kv("device.v_total", d.v_total.to_string());
    kv("device.eps_r", d.eps_r.to_string());
    kv("device.f_c", d.f_c.to_string());
    kv("device.q_c", d.q_c.to_string());
    kv("device.q_i0", d.q_i0.to_string());
    s.push('\n');
    s
}

fn flat_values(data: &GridData) -> Vec<f64> {
    match data {
        GridData::Complex(v) => v.iter().flat_map(|z| [z.re, z.im]).collect(),
        GridData::Real(v) => v.clone(),
    }
}

/// Serialises a grid to bytes.
pub fn encode_grid(grid: &SpectrumGrid, format: GridFormat) -> Vec<u8> {
    let header = write_header(grid);
    let values = flat_values(&grid.data);
    match format {
        GridFormat::Binary => {
            let mut out = Vec::with_capacity(MAGIC.len() + header.len() + values.len() * 8);
            out.extend_from_slice(MAGIC);
            out.extend_from_slice(header.as_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
        GridFormat::Text => {
            let mut s = header;
            let per_row = values.len() / grid.biases.len.max(1);
            for row in values.chunks(per_row.max(1)) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
            s.into_bytes()
        }
    }
}

struct Header {
    fields: Vec<(String, String, usize)>,
}

impl Header {
    fn get(&self, key: &str) -> (&str, usize) {
        let (_, v, off) = self.fields.iter().find(|(k, _, _)| k == key).expect("presence checked");
        (v.as_str(), *off)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, FormatError> {
        let (v, offset) = self.get(key);
        v.parse().map_err(|_| FormatError::BadValue {
            offset,
            key: key.into(),
            value: v.into(),
        })
    }

    fn finite(&self, key: &str) -> Result<f64, FormatError> {
        let x: f64 = self.parse(key)?;
        if x.is_finite() {
            Ok(x)
        } else {
            let (v, offset) = self.get(key);
            Err(FormatError::BadValue {
                offset,
                key: key.into(),
                value: v.into(),
            })
        }
    }
}

/// Reads header lines starting at `start`; returns the header and the offset
/// of the first payload byte.
fn read_header(bytes: &[u8], start: usize) -> Result<(Header, usize), FormatError> {
    let mut pos = start;
    let mut fields: Vec<(String, String, usize)> = Vec::new();
    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(FormatError::UnterminatedHeader { offset: bytes.len() });
        };
        let raw = &bytes[pos..pos + nl];
        if raw.is_empty() {
            pos += 1;
            break;
        }
        let line = std::str::from_utf8(raw).map_err(|e| FormatError::NonUtf8 {
            offset: pos + e.valid_up_to(),
        })?;
        let Some((k, v)) = line.split_once('=') else {
            return Err(FormatError::MalformedLine {
                offset: pos,
                line: line.into(),
            });
        };
        if !KEYS.contains(&k) {
            return Err(FormatError::UnknownKey { offset: pos, key: k.into() });
        }
        if fields.iter().any(|(kk, _, _)| kk == k) {
            return Err(FormatError::DuplicateKey { offset: pos, key: k.into() });
        }
        fields.push((k.into(), v.into(), pos + k.len() + 1));
        pos += nl + 1;
    }
    for key in KEYS {
        if !fields.iter().any(|(k, _, _)| k == key) {
            return Err(FormatError::MissingKey { offset: pos, key: key.into() });
        }
    }
    Ok((Header { fields }, pos))
}

fn build_grid(h: &Header, values: Vec<f64>, offset: usize) -> Result<SpectrumGrid, FormatError> {
    let n_freq: usize = h.parse("n_freq")?;
    let n_bias: usize = h.parse("n_bias")?;
    let complex: bool = h.parse("complex")?;
    let bad = |key: &str| {
        let (v, off) = h.get(key);
        FormatError::BadValue {
            offset: off,
            key: key.into(),
            value: v.into(),
        }
    };
    let freqs = Axis::new(h.finite("f_start_hz")?, h.finite("f_step_hz")?, n_freq).map_err(|_| bad("f_step_hz"))?;
    let biases = Axis::new(h.finite("v_start_v")?, h.finite("v_step_v")?, n_bias).map_err(|_| bad("v_step_v"))?;
    let (dir_s, dir_off) = h.get("sweep_direction");
    let direction = SweepDirection::parse(dir_s).ok_or_else(|| FormatError::BadValue {
        offset: dir_off,
        key: "sweep_direction".into(),
        value: dir_s.into(),
    })?;
    let device = DeviceParams {
        d0: h.finite("device.d0")?,
        cap_area: h.finite("device.cap_area")?,
        v_total: h.finite("device.v_total")?,
        eps_r: h.finite("device.eps_r")?,
        f_c: h.finite("device.f_c")?,
        q_c: h.finite("device.q_c")?,
        q_i0: h.finite("device.q_i0")?,
    };
    let trace_time_s = h.finite("trace_time_s")?;
    if !(trace_time_s > 0.0) {
        return Err(bad("trace_time_s"));
    }
    let expected = n_freq * n_bias * if complex { 2 } else { 1 };
    if values.len() != expected {
        return Err(FormatError::DimensionMismatch {
            offset,
            expected,
            found: values.len(),
        });
    }
    let data = if complex {
        GridData::Complex(values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
    } else {
        GridData::Real(values)
    };
    Ok(SpectrumGrid {
        freqs,
        biases,
        data,
        trace_time_s,
        t0_s: h.finite("t0_s")?,
        meta: GridMeta {
            seed: h.parse("seed")?,
            direction,
            device,
        },
    })
}

fn check_version(h: &Header) -> Result<(), FormatError> {
    let (v, offset) = h.get("format_version");
    if v != FORMAT_VERSION.to_string() {
        return Err(FormatError::UnsupportedVersion { offset, version: v.into() });
    }
    Ok(())
}

fn dims(h: &Header) -> Result<(usize, usize, bool), FormatError> {
    let n_freq: usize = h.parse("n_freq")?;
    let n_bias: usize = h.parse("n_bias")?;
    let complex: bool = h.parse("complex")?;
    for key in ["n_freq", "n_bias"] {
        let n: usize = h.parse(key)?;
        if n == 0 {
            let (v, offset) = h.get(key);
            return Err(FormatError::BadValue {
                offset,
                key: key.into(),
                value: v.into(),
            });
        }
    }
    Ok((n_freq, n_bias, complex))
}

/// Parses a grid from bytes, detecting binary or text by the leading bytes.
pub fn decode_grid(bytes: &[u8]) -> Result<SpectrumGrid, FormatError> {
    if bytes.starts_with(MAGIC) {
        let (h, start) = read_header(bytes, MAGIC.len())?;
        check_version(&h)?;
        let (n_freq, n_bias, complex) = dims(&h)?;
        let count = n_freq * n_bias * if complex { 2 } else { 1 };
        let need = count * 8;
        let have = bytes.len() - start;
        if have < need {
            return Err(FormatError::Truncated {
                offset: bytes.len(),
                expected: need,
                found: have,
            });
        }
        if have > need {
            return Err(FormatError::TrailingData { offset: start + need });
        }
        let values = bytes[start..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        build_grid(&h, values, start)
    } else if bytes.starts_with(b"format_version=") {
        let (h, start) = read_header(bytes, 0)?;
        check_version(&h)?;
        let (n_freq, n_bias, complex) = dims(&h)?;
        let per_row = n_freq * if complex { 2 } else { 1 };
        let body = std::str::from_utf8(&bytes[start..]).map_err(|e| FormatError::NonUtf8 {
            offset: start + e.valid_up_to(),
        })?;
        let mut values = Vec::with_capacity(per_row * n_bias);
        let mut pos = start;
        let mut rows = 0;
        for line in body.split_inclusive('\n') {
            let Some(content) = line.strip_suffix('\n') else {
                return Err(FormatError::Truncated {
                    offset: pos + line.len(),
                    expected: per_row * n_bias,
                    found: values.len(),
                });
            };
            if rows == n_bias {
                return Err(FormatError::TrailingData { offset: pos });
            }
            let mut tok_pos = pos;
            let mut found = 0;
            for tok in content.split(',') {
                let v: f64 = tok.parse().map_err(|_| FormatError::BadNumber {
                    offset: tok_pos,
                    token: tok.into(),
                })?;
                values.push(v);
                found += 1;
                tok_pos += tok.len() + 1;
            }
            if found != per_row {
                return Err(FormatError::DimensionMismatch {
                    offset: pos,
                    expected: per_row,
                    found,
                });
            }
            rows += 1;
            pos += line.len();
        }
        if rows != n_bias {
            return Err(FormatError::Truncated {
                offset: bytes.len(),
                expected: per_row * n_bias,
                found: values.len(),
            });
        }
        build_grid(&h, values, start)
    } else {
        Err(FormatError::BadMagic { offset: 0 })
    }
}

pub fn write_grid(grid: &SpectrumGrid, path: &Path, format: GridFormat) -> Result<()> {
    super::write_atomic(path, &encode_grid(grid, format))
}

pub fn read_grid(path: &Path) -> Result<SpectrumGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_grid(&bytes)?)
}
