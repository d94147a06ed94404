use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use xcrossnet::metrics::{evaluate, predict_all, EvalReport};

use crate::error::CliError;
use crate::source::{open_checkpoint, scoring_data, DataArg};

pub fn eval(checkpoint: &Path, data: &DataArg) -> Result<EvalReport, CliError> {
    let (model, header) = open_checkpoint(checkpoint)?;
    let dataset = scoring_data(data, checkpoint, &header)?;
    Ok(evaluate(&model, &dataset)?)
}

/// Writes predictions in input order; returns how many were written.
pub fn predict(checkpoint: &Path, data: &DataArg, out: &Path) -> Result<usize, CliError> {
    let (model, header) = open_checkpoint(checkpoint)?;
    let dataset = scoring_data(data, checkpoint, &header)?;
    let preds = predict_all(&model, &dataset)?;
    if let Some(bad) = preds.iter().find(|p| !p.is_finite()) {
        return Err(CliError::Numeric(format!("non-finite prediction {bad}")));
    }
    let mut w = BufWriter::new(File::create(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?);
    for p in &preds {
        writeln!(w, "{p}")?;
    }
    w.flush()?;
    Ok(preds.len())
}
