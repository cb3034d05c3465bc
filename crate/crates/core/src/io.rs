//! `DSF1` field files.
//!
//! One header line `DSF1 {"n":N,"L":L,"space":"z"|"k"}` followed by `n*n`
//! little-endian `f64` pairs `(re, im)`, row-major with rows along the
//! imaginary axis. Round trips are bit-exact. Writers may add string
//! metadata keys to the header; readers ignore keys they do not know.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{GridSpec, Space};

const MAGIC: &str = "DSF1 ";

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    #[serde(rename = "L")]
    half_width: f64,
    space: Space,
    #[serde(flatten)]
    meta: BTreeMap<String, String>,
}

pub fn write_field<W: Write>(f: &Field, w: W) -> Result<()> {
    write_field_with_meta(f, &BTreeMap::new(), w)
}

/// Like [`write_field`], with extra header keys such as a config hash.
pub fn write_field_with_meta<W: Write>(f: &Field, meta: &BTreeMap<String, String>, mut w: W) -> Result<()> {
    if let Some(k) = meta.keys().find(|k| matches!(k.as_str(), "n" | "L" | "space")) {
        return Err(Error::Format(format!("metadata key {k:?} is reserved")));
    }
    let header = Header { n: f.n(), half_width: f.grid().half_width, space: f.space(), meta: meta.clone() };
    let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w, "{MAGIC}{json}")?;
    let mut buf = Vec::with_capacity(f.data().len() * 16);
    for v in f.data() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<Field> {
    read_field_with_meta(r).map(|(f, _)| f)
}

/// Reads a field together with any string metadata in its header.
pub fn read_field_with_meta<R: Read>(r: R) -> Result<(Field, BTreeMap<String, String>)> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let json = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Format("missing DSF1 magic".into()))?
        .trim_end_matches('\n');
    let header: Header = serde_json::from_str::<serde_json::Value>(json)
        .and_then(|mut v| {
            // Keep only string-valued extras so unknown numeric keys stay harmless.
            if let Some(obj) = v.as_object_mut() {
                obj.retain(|k, val| matches!(k.as_str(), "n" | "L" | "space") || val.is_string());
            }
            serde_json::from_value(v)
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    let grid = GridSpec::new(header.n, header.half_width)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != grid.len() * 16 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            grid.len() * 16,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((Field::from_vec(grid, header.space, data)?, header.meta))
}

pub fn save(f: &Field, path: impl AsRef<Path>) -> Result<()> {
    save_with_meta(f, &BTreeMap::new(), path)
}

pub fn save_with_meta(f: &Field, meta: &BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_field_with_meta(f, meta, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Field> {
    read_field(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = GridSpec::new(16, 0.1 + 0.2).unwrap();
        let f = Field::from_fn(g, Space::K, |k| Complex64::new(k.re.sin() / 3.0, f64::MIN_POSITIVE * k.im));
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let back = read_field(&buf[..]).unwrap();
        assert_eq!(back.grid().half_width.to_bits(), g.half_width.to_bits());
        assert_eq!(back.space(), Space::K);
        for (a, b) in f.data().iter().zip(back.data()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = GridSpec::new(8, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&Field::zeros(g, Space::Z), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_field(&buf[..]), Err(Error::Format(_))));
        assert!(matches!(read_field(&b"XXXX {}\n"[..]), Err(Error::Format(_))));
    }

    #[test]
    fn metadata_survives_and_plain_readers_ignore_it() {
        let g = GridSpec::new(8, 1.0).unwrap();
        let f = Field::from_fn(g, Space::Z, |z| z);
        let meta = BTreeMap::from([("config_hash".to_string(), "ab12".to_string())]);
        let mut buf = Vec::new();
        write_field_with_meta(&f, &meta, &mut buf).unwrap();
        let (back, m) = read_field_with_meta(&buf[..]).unwrap();
        assert_eq!(back, f);
        assert_eq!(m, meta);
        assert_eq!(read_field(&buf[..]).unwrap(), f);
        let bad = BTreeMap::from([("n".to_string(), "1".to_string())]);
        assert!(write_field_with_meta(&f, &bad, &mut Vec::new()).is_err());
    }
}
