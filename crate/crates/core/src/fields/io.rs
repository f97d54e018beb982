//! Field files: a JSON header line followed by row-major values.
//!
//! `.fld` stores one value per line in decimal text with 17 significant
//! digits; `.fldb` stores raw 64-bit little-endian floats. The extension
//! selects the format.

use super::{Grid, ScalarField};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
}

fn format_of(path: &Path) -> Result<bool> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("fld") => Ok(false),
        Some("fldb") => Ok(true),
        other => Err(Error::BadExtension(other.unwrap_or("").to_string())),
    }
}

pub fn write_scalar_field(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let path = path.as_ref();
    let binary = format_of(path)?;
    let grid = field.grid();
    let header = Header {
        n: grid.dim(),
        shape: grid.shape().to_vec(),
        origin: grid.origin().to_vec(),
        spacing: grid.spacing().to_vec(),
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(b"\n")?;
    if binary {
        for v in field.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    } else {
        for v in field.values() {
            writeln!(w, "{v:.16e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_scalar_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let binary = format_of(path)?;
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header =
        serde_json::from_str(line.trim()).map_err(|e| Error::Parse(format!("header: {e}")))?;
    if header.shape.len() != header.n {
        return Err(Error::Parse("header shape/dimension mismatch".into()));
    }
    let grid = Grid::new(header.origin, header.spacing, header.shape)?;
    let want = grid.len();
    let mut values = Vec::with_capacity(want);
    if binary {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() != want * 8 {
            return Err(Error::Parse(format!(
                "expected {} bytes of data, found {}",
                want * 8,
                buf.len()
            )));
        }
        for chunk in buf.chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
    } else {
        for (ln, text) in r.lines().enumerate() {
            let text = text?;
            let t = text.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|e| Error::Parse(format!("value line {}: {e}", ln + 2)))?;
            values.push(v);
        }
        if values.len() != want {
            return Err(Error::Parse(format!(
                "expected {want} values, found {}",
                values.len()
            )));
        }
    }
    ScalarField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(vec![0.0, -1.0], vec![0.125, 0.25], vec![9, 9]).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] * 3.1).sin() + x[1]);
        for name in ["a.fld", "a.fldb"] {
            let p = dir.path().join(name);
            write_scalar_field(&p, &f).unwrap();
            let back = read_scalar_field(&p).unwrap();
            assert_eq!(back.grid(), f.grid());
            assert_eq!(back.values(), f.values(), "{name}");
        }
    }

    #[test]
    fn rejects_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.fld");
        std::fs::write(&p, "{\"n\":1,\"shape\":[5],\"origin\":[0.0],\"spacing\":[1.0]}\n1.0\n2.0\n").unwrap();
        assert!(matches!(read_scalar_field(&p), Err(Error::Parse(_))));
        let q = dir.path().join("bad.xyz");
        assert!(matches!(
            read_scalar_field(&q),
            Err(Error::BadExtension(_))
        ));
        let r = dir.path().join("garbage.fld");
        std::fs::write(&r, "not a header\n").unwrap();
        assert!(matches!(read_scalar_field(&r), Err(Error::Parse(_))));
    }
}
