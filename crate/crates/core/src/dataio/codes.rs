use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CODES_MAGIC;
use crate::codec::BinaryCodes;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodesFormat {
    #[default]
    Text,
    Packed,
}

impl FromStr for CodesFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(CodesFormat::Text),
            "packed" => Ok(CodesFormat::Packed),
            _ => Err(Error::InvalidConfig(format!("unknown codes format `{s}`"))),
        }
    }
}

pub fn write_codes(path: &Path, codes: &BinaryCodes, format: CodesFormat) -> Result<()> {
    match format {
        CodesFormat::Text => write_codes_text(path, codes),
        CodesFormat::Packed => write_codes_packed(path, codes),
    }
}

/// Reads either format, detected from the magic bytes.
pub fn read_codes(path: &Path) -> Result<BinaryCodes> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(CODES_MAGIC) {
        parse_packed(path, &bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::format(path, "codes file is neither packed nor text"))?;
        parse_text(path, &text)
    }
}

pub fn write_codes_text(path: &Path, codes: &BinaryCodes) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut line = String::with_capacity(3 * codes.ncols());
    for i in 0..codes.nrows() {
        line.clear();
        for (k, &b) in codes.row(i).iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(if b > 0 { "1" } else { "-1" });
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codes_text(path: &Path) -> Result<BinaryCodes> {
    parse_text(path, &fs::read_to_string(path)?)
}

fn parse_text(path: &Path, text: &str) -> Result<BinaryCodes> {
    let mut bits = Vec::new();
    let mut width = None;
    let mut n = 0;
    for (lineno, line) in text.lines().enumerate() {
        let before = bits.len();
        for tok in line.split_whitespace() {
            bits.push(match tok {
                "1" | "+1" => 1i8,
                "-1" => -1,
                _ => {
                    return Err(Error::format(
                        path,
                        format!("line {}: bad code token `{tok}`", lineno + 1),
                    ))
                }
            });
        }
        let d = bits.len() - before;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::format(
                    path,
                    format!("line {}: {d} bits, expected {w}", lineno + 1),
                ))
            }
            _ => {}
        }
        n += 1;
    }
    BinaryCodes::new(n, width.unwrap_or(0), bits)
}

/// Packed layout: `ceil(d / 8)` bytes per row, most significant bit first.
pub fn write_codes_packed(path: &Path, codes: &BinaryCodes) -> Result<()> {
    let (n, d) = (codes.nrows(), codes.ncols());
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(CODES_MAGIC)?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(d as u64).to_le_bytes())?;
    let mut row = vec![0u8; d.div_ceil(8)];
    for i in 0..n {
        row.iter_mut().for_each(|b| *b = 0);
        for (k, &bit) in codes.row(i).iter().enumerate() {
            if bit > 0 {
                row[k / 8] |= 0x80 >> (k % 8);
            }
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codes_packed(path: &Path) -> Result<BinaryCodes> {
    let bytes = fs::read(path)?;
    if !bytes.starts_with(CODES_MAGIC) {
        return Err(Error::format(path, "missing EMHBIN01 header"));
    }
    parse_packed(path, &bytes)
}

fn parse_packed(path: &Path, bytes: &[u8]) -> Result<BinaryCodes> {
    if bytes.len() < 24 {
        return Err(Error::format(path, "truncated header"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let d = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let stride = d.div_ceil(8);
    let need = n
        .checked_mul(stride)
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let body = &bytes[24..];
    if (body.len() as u64) != need {
        return Err(Error::format(
            path,
            format!(
                "expected {need} code bytes for {n} x {d}, found {}",
                body.len()
            ),
        ));
    }
    let (n, d, stride) = (n as usize, d as usize, stride as usize);
    let mut bits = Vec::with_capacity(n * d);
    for (i, row) in body.chunks_exact(stride.max(1)).take(n).enumerate() {
        for k in 0..d {
            bits.push(if row[k / 8] & (0x80 >> (k % 8)) != 0 {
                1
            } else {
                -1
            });
        }
        if d % 8 != 0 && row[stride - 1] & (0xFF >> (d % 8)) != 0 {
            return Err(Error::format(
                path,
                format!("row {i}: nonzero padding bits"),
            ));
        }
    }
    BinaryCodes::new(n, d, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BinaryCodes {
        BinaryCodes::from_fn(4, 11, |i, k| (i * 7 + k * 3) % 5 < 2)
    }

    #[test]
    fn packed_layout_is_msb_first() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let codes = BinaryCodes::new(1, 3, vec![1, -1, 1]).unwrap();
        write_codes_packed(&p, &codes).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 25);
        assert_eq!(bytes[24], 0b1010_0000);
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let codes = sample();
        let t = dir.path().join("c.txt");
        let b = dir.path().join("c.bin");
        write_codes(&t, &codes, CodesFormat::Text).unwrap();
        write_codes(&b, &codes, CodesFormat::Packed).unwrap();
        assert_eq!(read_codes_text(&t).unwrap(), codes);
        assert_eq!(read_codes_packed(&b).unwrap(), codes);
        assert_eq!(read_codes(&t).unwrap(), codes);
        assert_eq!(read_codes(&b).unwrap(), codes);
    }

    #[test]
    fn rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.txt");
        fs::write(&t, "1 -1\n1 0\n").unwrap();
        assert!(read_codes_text(&t).is_err());
        fs::write(&t, "1 -1\n1\n").unwrap();
        assert!(read_codes_text(&t).is_err());

        let b = dir.path().join("c.bin");
        write_codes_packed(&b, &sample()).unwrap();
        let mut bytes = fs::read(&b).unwrap();
        bytes.pop();
        fs::write(&b, &bytes).unwrap();
        assert!(read_codes_packed(&b).is_err());

        let mut bytes = CODES_MAGIC.to_vec();
        bytes.extend(1u64.to_le_bytes());
        bytes.extend(3u64.to_le_bytes());
        bytes.push(0b1010_0001);
        fs::write(&b, &bytes).unwrap();
        let err = read_codes_packed(&b).unwrap_err().to_string();
        assert!(err.contains("padding"), "{err}");
    }
}
