//! Delimited-text matrices with an optional header line and row-name column.

use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use trcm::{Error as CoreError, MaskedMatrix64};

use crate::config::RunConfig;

/// A parsed matrix with the labels it was read with.
#[derive(Clone, Debug)]
pub struct LabeledMatrix {
    pub matrix: MaskedMatrix64,
    pub header: Option<Vec<String>>,
    pub rownames: Option<Vec<String>>,
    /// Header field above the row names.
    pub corner: String,
    /// Source line of each data row, for error messages.
    lines: Vec<u64>,
}

impl LabeledMatrix {
    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
            header: self.rownames.clone(),
            rownames: self.header.clone(),
            corner: self.corner.clone(),
            lines: Vec::new(),
        }
    }
}

pub fn parse_matrix(path: &Path, cfg: &RunConfig) -> Result<LabeledMatrix> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_matrix_from(file, &path.display().to_string(), cfg)
}

/// Parses delimited text. Fields equal to the missing token or empty are
/// missing; everything else must be a finite number.
pub fn parse_matrix_from<R: std::io::Read>(reader: R, name: &str, cfg: &RunConfig) -> Result<LabeledMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(cfg.delimiter as u8)
        .from_reader(reader);
    let skip = usize::from(cfg.rownames);
    let mut header = None;
    let mut corner = String::new();
    let mut rownames = cfg.rownames.then(Vec::new);
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut lines = Vec::new();
    let mut width: Option<usize> = None;
    for record in rdr.records() {
        let record = record.with_context(|| format!("{name}: malformed delimited text"))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let fields = record.len().saturating_sub(skip);
        match width {
            None => width = Some(fields),
            Some(w) if w != fields => {
                bail!("{name}:{line}: expected {w} data fields, found {fields}")
            }
            _ => {}
        }
        if cfg.header && header.is_none() {
            header = Some(record.iter().skip(skip).map(str::to_string).collect());
            if skip == 1 {
                corner = record[0].to_string();
            }
            continue;
        }
        if let Some(names) = rownames.as_mut() {
            names.push(record[0].to_string());
        }
        let row = record
            .iter()
            .enumerate()
            .skip(skip)
            .map(|(col, field)| parse_cell(field, &cfg.na_token).map_err(|m| anyhow!("{name}:{line}:{}: {m}", col + 1)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        lines.push(line);
    }
    if rows.is_empty() || width == Some(0) {
        bail!("{name}: no data");
    }
    let matrix = MaskedMatrix64::from_rows(&rows).map_err(|e| match e {
        CoreError::EmptyRow(i) => anyhow!("{name}:{}: row {} has no observed entries", lines[i], i + 1),
        CoreError::EmptyColumn(j) => anyhow!("{name}: column {} has no observed entries", j + 1 + skip),
        e => anyhow!("{name}: {e}"),
    })?;
    log::info!(
        "{name}: {} x {} matrix, {:.1}% missing",
        matrix.nrows(),
        matrix.ncols(),
        100.0 * matrix.missing_fraction()
    );
    Ok(LabeledMatrix { matrix, header, rownames, corner, lines })
}

fn parse_cell(field: &str, token: &str) -> std::result::Result<Option<f64>, String> {
    if field == token || field.trim().is_empty() {
        return Ok(None);
    }
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Err(format!("non-finite value {field:?}")),
        Err(_) => Err(format!("cannot parse {field:?} as a number")),
    }
}

/// Reads a matrix that must have no missing cells.
pub fn parse_complete(path: &Path, cfg: &RunConfig) -> Result<LabeledMatrix> {
    let m = parse_matrix(path, cfg)?;
    if let Some((i, j)) = m.matrix.missing_cells().into_iter().min() {
        let line = m.lines[i];
        bail!("{}:{line}:{}: truth matrix has a missing cell", path.display(), j + 1 + usize::from(cfg.rownames));
    }
    Ok(m)
}

/// Writes `values` with the given labels; `corner` fills the header field
/// above the row names. Numbers use the shortest text that parses back to
/// the same value.
pub fn write_matrix(
    path: &Path,
    values: &DMatrix<f64>,
    header: Option<&[String]>,
    rownames: Option<&[String]>,
    corner: &str,
    delimiter: char,
) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().delimiter(delimiter as u8).flexible(true).from_writer(file);
    if let Some(h) = header {
        let mut rec: Vec<&str> = Vec::with_capacity(h.len() + 1);
        if rownames.is_some() {
            rec.push(corner);
        }
        rec.extend(h.iter().map(String::as_str));
        w.write_record(&rec)?;
    }
    for i in 0..values.nrows() {
        let mut rec: Vec<String> = Vec::with_capacity(values.ncols() + 1);
        if let Some(names) = rownames {
            rec.push(names[i].clone());
        }
        rec.extend(values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut inner = w.into_inner().map_err(|e| anyhow!("writing {}: {e}", path.display()))?;
    inner.flush()?;
    Ok(())
}
