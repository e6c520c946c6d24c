//! Binary Gram files and CSV export.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes   "SQKG"
//! version  u32       1
//! n        u64
//! ids      n x (u32 byte length, UTF-8 bytes)
//! kernel   u32 byte length, UTF-8 JSON of the kernel configuration
//! values   n*n f64, row-major, IEEE-754 bit patterns
//! checksum 32 bytes  SHA-256 of the input sequences
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{dataset_checksum, GramMatrix};
use crate::error::{Error, Result};
use crate::kernels::SequenceKernel;
use crate::sequence::Sequence;

pub const GRAM_MAGIC: &[u8; 4] = b"SQKG";
pub const GRAM_VERSION: u32 = 1;

pub fn save_gram(gram: &GramMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_gram(gram, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_gram<W: Write>(gram: &GramMatrix, w: &mut W) -> Result<()> {
    let n = gram.ids.len();
    if gram.values.shape() != (n, n) {
        return Err(Error::InvalidInput(format!(
            "{} ids for a {:?} matrix",
            n,
            gram.values.shape()
        )));
    }
    w.write_all(GRAM_MAGIC)?;
    w.write_all(&GRAM_VERSION.to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    for id in &gram.ids {
        write_blob(w, id.as_bytes())?;
    }
    write_blob(w, serde_json::to_string(&gram.kernel)?.as_bytes())?;
    for i in 0..n {
        for j in 0..n {
            w.write_all(&gram.values[(i, j)].to_le_bytes())?;
        }
    }
    w.write_all(&gram.checksum)?;
    Ok(())
}

fn write_blob<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    let len = u32::try_from(bytes.len())
        .map_err(|_| Error::InvalidInput("string too long for Gram file".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

pub fn load_gram(path: impl AsRef<Path>) -> Result<GramMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    read_gram(&mut r)
}

/// Loads a Gram file and compares its input checksum against `data`.
///
/// A mismatch is not an error: the matrix is returned together with a
/// provenance warning (also emitted through `log`).
pub fn load_gram_checked(
    path: impl AsRef<Path>,
    data: &[Sequence],
) -> Result<(GramMatrix, Vec<String>)> {
    let gram = load_gram(path)?;
    let mut warnings = Vec::new();
    if gram.checksum != dataset_checksum(data) {
        let msg = "Gram file was computed from a different dataset (checksum mismatch)".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok((gram, warnings))
}

fn truncated(what: &str) -> Error {
    Error::format(None, format!("truncated Gram file while reading {what}"))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => truncated(what),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let len = read_u32(r, what)? as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(truncated(what));
    }
    String::from_utf8(buf).map_err(|_| Error::format(None, format!("{what} is not valid UTF-8")))
}

pub fn read_gram<R: Read>(r: &mut R) -> Result<GramMatrix> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if &magic != GRAM_MAGIC {
        return Err(Error::format(None, "not a Gram file (bad magic bytes)"));
    }
    let version = read_u32(r, "version")?;
    if version != GRAM_VERSION {
        return Err(Error::format(None, format!("unsupported Gram file version {version}")));
    }
    let mut nb = [0u8; 8];
    read_exact(r, &mut nb, "size")?;
    let n = usize::try_from(u64::from_le_bytes(nb))
        .map_err(|_| Error::format(None, "matrix size does not fit in memory"))?;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        ids.push(read_string(r, "ids")?);
    }
    let kernel: SequenceKernel = serde_json::from_str(&read_string(r, "kernel")?)
        .map_err(|e| Error::format(None, format!("bad kernel description: {e}")))?;
    let mut values = DMatrix::zeros(n, n);
    let mut b = [0u8; 8];
    for i in 0..n {
        for j in 0..n {
            read_exact(r, &mut b, "values")?;
            values[(i, j)] = f64::from_le_bytes(b);
        }
    }
    let mut checksum = [0u8; 32];
    read_exact(r, &mut checksum, "checksum")?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format(None, "trailing bytes after Gram checksum"));
    }
    Ok(GramMatrix {
        values,
        ids,
        kernel,
        checksum,
    })
}

/// CSV with a header row of ids followed by one row per sequence, values
/// written with 17 significant digits.
pub fn export_csv<W: Write>(gram: &GramMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "{}", gram.ids.join(","))?;
    write_matrix_csv(&gram.values, w)
}

/// Rows of a matrix as CSV, 17 significant digits per value.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, w: &mut W) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::build_gram;
    use crate::kernels::{KernelConfig, StructureKernel, SymbolKernel};

    fn gram() -> (Vec<Sequence>, GramMatrix) {
        let data: Vec<Sequence> = (0..4)
            .map(|k| {
                Sequence::univariate(format!("seq-{k}"), (0..k + 2).map(|i| (i as f64 * 0.3 + k as f64).cos()).collect())
                    .unwrap()
            })
            .collect();
        let cfg = KernelConfig::new(SymbolKernel::Rbf { sigma: 0.5 }, StructureKernel::Path { chv: 0.3, cd: 0.3 });
        let g = build_gram(&data, &cfg.into()).unwrap();
        (data, g)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (_, g) = gram();
        let mut buf = Vec::new();
        write_gram(&g, &mut buf).unwrap();
        let back = read_gram(&mut buf.as_slice()).unwrap();
        assert_eq!(back, g);
        for (a, b) in back.values.iter().zip(g.values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_is_format_error() {
        let (_, g) = gram();
        let mut buf = Vec::new();
        write_gram(&g, &mut buf).unwrap();
        for cut in [2, 10, buf.len() / 2, buf.len() - 1] {
            let err = read_gram(&mut &buf[..cut]).unwrap_err();
            assert!(matches!(err, Error::Format { .. }), "cut {cut}: {err}");
        }
        let mut longer = buf.clone();
        longer.push(0);
        assert!(matches!(read_gram(&mut longer.as_slice()), Err(Error::Format { .. })));
        buf[0] = b'X';
        assert!(matches!(read_gram(&mut buf.as_slice()), Err(Error::Format { .. })));
    }

    #[test]
    fn checksum_mismatch_warns() {
        let (mut data, g) = gram();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.sqkg");
        save_gram(&g, &path).unwrap();
        let (_, warnings) = load_gram_checked(&path, &data).unwrap();
        assert!(warnings.is_empty());
        data.pop();
        let (loaded, warnings) = load_gram_checked(&path, &data).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(loaded, g);
    }

    #[test]
    fn csv_has_header_and_seventeen_digits() {
        let (_, g) = gram();
        let mut out = Vec::new();
        export_csv(&g, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "seq-0,seq-1,seq-2,seq-3");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1.0000000000000000e0");
        let parsed: f64 = first[1].parse().unwrap();
        assert_eq!(parsed, g.values[(0, 1)]);
    }
}
