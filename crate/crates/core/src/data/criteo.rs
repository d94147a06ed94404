//! Criteo-style TSV: `label \t dense_1 … dense_M \t cat_1 … cat_N`.
//!
//! Empty dense fields read as 0 before normalization; empty or unknown
//! categorical tokens map to [`OOV_ID`](super::OOV_ID). Files ending in `.gz`
//! are decompressed transparently.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::vocab::{build_vocab, FieldVocab};
use super::{Dataset, Instance};
use crate::error::{Result, XcnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub num_dense: usize,
    pub num_sparse: usize,
}

impl Schema {
    pub fn num_columns(&self) -> usize {
        1 + self.num_dense + self.num_sparse
    }
}

/// 13 integer fields and 26 categorical fields.
pub const CRITEO_SCHEMA: Schema = Schema {
    num_dense: 13,
    num_sparse: 26,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenseTransform {
    /// `log(1 + x)` for `x ≥ 0`, `−log(1 − x)` for `x < 0`.
    #[default]
    Log,
    Identity,
}

impl DenseTransform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            DenseTransform::Log if x >= 0.0 => x.ln_1p(),
            DenseTransform::Log => -(-x).ln_1p(),
            DenseTransform::Identity => x,
        }
    }
}

impl std::str::FromStr for DenseTransform {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "log" => Ok(Self::Log),
            "identity" => Ok(Self::Identity),
            other => Err(format!("unknown dense transform '{other}' (expected log or identity)")),
        }
    }
}

pub(crate) fn split_fields(line: &str, line_no: usize, schema: Schema) -> Result<Vec<&str>> {
    let line = line.trim_end_matches(['\n', '\r']);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != schema.num_columns() {
        return Err(XcnError::Parse {
            line: line_no,
            msg: format!("expected {} tab-separated fields, found {}", schema.num_columns(), fields.len()),
        });
    }
    Ok(fields)
}

/// Parses one data row. `line_no` is 1-based and only used in errors.
pub fn parse_line(
    line: &str,
    line_no: usize,
    schema: Schema,
    transform: DenseTransform,
    vocab: &FieldVocab,
) -> Result<Instance> {
    let fields = split_fields(line, line_no, schema)?;
    let label = match fields[0] {
        "0" => 0,
        "1" => 1,
        other => {
            return Err(XcnError::Parse {
                line: line_no,
                msg: format!("label must be 0 or 1, found '{other}'"),
            })
        }
    };
    let mut dense = Vec::with_capacity(schema.num_dense);
    for (j, tok) in fields[1..=schema.num_dense].iter().enumerate() {
        let raw = if tok.is_empty() {
            0.0
        } else {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| XcnError::Parse {
                    line: line_no,
                    msg: format!("dense field {} is not a finite number: '{tok}'", j + 1),
                })?
        };
        dense.push(transform.apply(raw));
    }
    let sparse = fields[1 + schema.num_dense..]
        .iter()
        .enumerate()
        .map(|(f, tok)| vocab.id(f, tok))
        .collect();
    Ok(Instance { dense, sparse, label })
}

pub fn open_lines(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// All non-empty lines of a (possibly gzipped) text file.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in open_lines(path)?.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

fn parse_rows(rows: &[String], first_line_no: usize, schema: Schema, transform: DenseTransform, vocab: &FieldVocab) -> Result<Dataset> {
    let instances = rows
        .par_iter()
        .enumerate()
        .map(|(i, l)| parse_line(l, first_line_no + i, schema, transform, vocab))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema.num_dense, schema.num_sparse, instances)
}

/// Reads a whole file with an existing vocabulary.
pub fn read_dataset(path: &Path, schema: Schema, transform: DenseTransform, vocab: &FieldVocab) -> Result<Dataset> {
    let rows = read_lines(path)?;
    parse_rows(&rows, 1, schema, transform, vocab)
}

/// Train/validation datasets and the vocabulary built from the training rows.
#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub train: Dataset,
    pub valid: Dataset,
    pub vocab: FieldVocab,
}

/// Loads training data and a validation split.
///
/// With `valid_path` the validation rows come from that file; otherwise the
/// last `valid_fraction` of the training file's rows (a row-range split) are
/// held out. The vocabulary only ever sees training rows.
pub fn load_split(
    train_path: &Path,
    valid_path: Option<&Path>,
    valid_fraction: f64,
    schema: Schema,
    transform: DenseTransform,
    min_freq: u64,
) -> Result<LoadedSplit> {
    let mut train_rows = read_lines(train_path)?;
    let (valid_rows, valid_offset) = match valid_path {
        Some(p) => (read_lines(p)?, 1),
        None => {
            if !(0.0..1.0).contains(&valid_fraction) {
                return Err(XcnError::InvalidConfig(format!(
                    "valid_fraction must be in [0, 1), got {valid_fraction}"
                )));
            }
            let n_valid = (train_rows.len() as f64 * valid_fraction).round() as usize;
            let cut = train_rows.len() - n_valid;
            (train_rows.split_off(cut), cut + 1)
        }
    };
    if train_rows.is_empty() {
        return Err(XcnError::Empty("training split has no rows"));
    }
    let vocab = build_vocab(train_rows.iter().map(String::as_str), schema, min_freq)?;
    let train = parse_rows(&train_rows, 1, schema, transform, &vocab)?;
    let valid = parse_rows(&valid_rows, valid_offset, schema, transform, &vocab)?;
    Ok(LoadedSplit { train, valid, vocab })
}

/// Writes a dataset in the same TSV layout. Dense values are written as-is
/// (shortest round-trip form); sparse ids become 8-digit hex tokens, with the
/// OOV id written as an empty field.
pub fn write_tsv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let sink: Box<dyn Write> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(file)
    };
    let mut w = BufWriter::new(sink);
    for inst in dataset.instances() {
        write!(w, "{}", inst.label)?;
        for v in &inst.dense {
            write!(w, "\t{v}")?;
        }
        for &id in &inst.sparse {
            if id == super::OOV_ID {
                write!(w, "\t")?;
            } else {
                write!(w, "\t{id:08x}")?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
