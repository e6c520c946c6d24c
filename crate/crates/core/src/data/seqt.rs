//! SEQT: one sequence per line, `label<TAB>sym;sym;...` where each symbol is
//! a comma-separated list of decimals. Lines starting with `#` are comments;
//! `#@key=value` comments carry dataset metadata. An empty label field means
//! the sequence is unlabeled. Sequence ids are the 0-based record index.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::sequence::Sequence;

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_seqt(BufReader::new(File::open(path)?))
}

pub fn parse_seqt<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut sequences = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut dim: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if let Some(meta) = line.strip_prefix("#@") {
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| Error::format(Some(lineno), "metadata line needs key=value"))?;
            metadata.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (label, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(Some(lineno), "expected label<TAB>symbols"))?;
        if body.trim().is_empty() {
            return Err(Error::format(Some(lineno), "empty symbol list"));
        }
        let mut values = Vec::new();
        let mut line_dim = None;
        for (k, sym) in body.split(';').enumerate() {
            let before = values.len();
            for field in sym.split(',') {
                let field = field.trim();
                let v: f64 = field.parse().map_err(|_| {
                    Error::format(Some(lineno), format!("cannot parse {field:?} as a number"))
                })?;
                if !v.is_finite() {
                    return Err(Error::format(Some(lineno), format!("non-finite value {field:?}")));
                }
                values.push(v);
            }
            let d = values.len() - before;
            match line_dim {
                None => line_dim = Some(d),
                Some(e) if e != d => {
                    return Err(Error::format(
                        Some(lineno),
                        format!("symbol {} has dimension {d}, expected {e}", k + 1),
                    ))
                }
                _ => {}
            }
        }
        let d = line_dim.unwrap();
        match dim {
            None => dim = Some(d),
            Some(e) if e != d => {
                return Err(Error::format(
                    Some(lineno),
                    format!("symbols have dimension {d}, earlier records have {e}"),
                ))
            }
            _ => {}
        }
        let mut s = Sequence::new(sequences.len().to_string(), d, values)
            .map_err(|e| Error::format(Some(lineno), e.to_string()))?;
        if !label.is_empty() {
            s = s.with_label(label);
        }
        sequences.push(s);
    }
    if sequences.is_empty() {
        return Err(Error::format(None, "no sequences in file"));
    }
    Dataset::new(sequences, metadata)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_seqt(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes values in shortest round-trip form, so parsing the output gives
/// back bit-identical values.
pub fn write_seqt<W: Write>(dataset: &Dataset, w: &mut W) -> Result<()> {
    for (k, v) in &dataset.metadata {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::InvalidInput(format!("metadata entry {k:?} cannot be written")));
        }
        writeln!(w, "#@{k}={v}")?;
    }
    for s in &dataset.sequences {
        let label = s.label().unwrap_or("");
        if label.contains('\t') || label.contains('\n') || label.starts_with('#') {
            return Err(Error::InvalidInput(format!("label {label:?} cannot be written")));
        }
        if s.is_empty() {
            return Err(Error::InvalidInput(format!("sequence {} is empty", s.id())));
        }
        let body: Vec<String> = s
            .symbols()
            .map(|sym| sym.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(","))
            .collect();
        writeln!(w, "{label}\t{}", body.join(";"))?;
    }
    Ok(())
}
