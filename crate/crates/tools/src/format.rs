//! Text formats: sparse multiview examples, probability matrices, metrics CSV.
//!
//! Multiview files start with a `#dims d1 d2 K` header. Every other
//! non-blank, non-comment line is one example:
//!
//! ```text
//! <label>\t<view 1>\t<view 2>
//! ```
//!
//! A view is space-separated `index:value` pairs (0-based, strictly
//! increasing; absent indices are 0) or a single `-` when the view is missing.

use std::fmt::Write as _;
use std::path::Path;

use mvgan_core::train::IterationMetrics;
use mvgan_core::{MultiviewExample, PartitionedDataset};

use crate::error::{Error, Result};

pub const MISSING_VIEW: &str = "-";

/// Examples in file order plus the declared dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewFile {
    pub d1: usize,
    pub d2: usize,
    pub num_classes: usize,
    pub examples: Vec<MultiviewExample>,
}

impl MultiviewFile {
    pub fn into_partition(self) -> Result<PartitionedDataset> {
        Ok(PartitionedDataset::from_examples(self.d1, self.d2, self.num_classes, self.examples)?)
    }

    pub fn l2_normalize(&mut self) {
        self.examples.iter_mut().for_each(MultiviewExample::l2_normalize);
    }
}

fn parse_sparse(field: &str, dim: usize, line: usize) -> Result<Option<Vec<f64>>> {
    let field = field.trim();
    if field == MISSING_VIEW {
        return Ok(None);
    }
    let mut v = vec![0.0; dim];
    let mut last: Option<usize> = None;
    for pair in field.split_whitespace() {
        let (idx, val) = pair
            .split_once(':')
            .ok_or_else(|| Error::parse(line, format!("expected index:value, got `{pair}`")))?;
        let index: usize = idx
            .parse()
            .map_err(|_| Error::parse(line, format!("bad index `{idx}`")))?;
        let value: f64 = val
            .parse()
            .map_err(|_| Error::parse(line, format!("bad value `{val}`")))?;
        if !value.is_finite() {
            return Err(Error::parse(line, format!("non-finite value `{val}`")));
        }
        if last.is_some_and(|l| index <= l) {
            return Err(Error::parse(line, "indices must be strictly increasing"));
        }
        if index >= dim {
            return Err(Error::Range { line, index, dim });
        }
        v[index] = value;
        last = Some(index);
    }
    Ok(Some(v))
}

fn parse_dims(rest: &str, line: usize) -> Result<(usize, usize, usize)> {
    let nums: Vec<usize> = rest
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::parse(line, format!("bad #dims field `{t}`"))))
        .collect::<Result<_>>()?;
    match nums[..] {
        [d1, d2, k] if d1 > 0 && d2 > 0 && k > 0 => Ok((d1, d2, k)),
        _ => Err(Error::parse(line, "#dims needs three positive integers: d1 d2 K")),
    }
}

pub fn parse_multiview(text: &str) -> Result<MultiviewFile> {
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut examples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#dims") {
            if dims.is_some() {
                return Err(Error::parse(line, "duplicate #dims header"));
            }
            dims = Some(parse_dims(rest, line)?);
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let (d1, d2, k) = dims.ok_or_else(|| Error::parse(line, "example before the #dims header"))?;

        let fields: Vec<&str> = raw.trim_end_matches(['\r', '\n']).split('\t').collect();
        let [label, v1, v2] = fields[..] else {
            return Err(Error::parse(line, format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad label `{label}`")))?;
        if label >= k {
            return Err(Error::parse(line, format!("label {label} outside [0, {k})")));
        }
        let view1 = parse_sparse(v1, d1, line)?;
        let view2 = parse_sparse(v2, d2, line)?;
        if view1.is_none() && view2.is_none() {
            return Err(Error::parse(line, "both views are missing"));
        }
        examples.push(MultiviewExample { view1, view2, label });
    }
    let (d1, d2, num_classes) = dims.ok_or_else(|| Error::parse(1, "missing #dims header"))?;
    Ok(MultiviewFile {
        d1,
        d2,
        num_classes,
        examples,
    })
}

pub fn read_multiview(path: &Path) -> Result<MultiviewFile> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_multiview(&text)
}

/// Loads a file straight into the three-way partition.
pub fn load_multiview_file(path: &Path) -> Result<PartitionedDataset> {
    read_multiview(path)?.into_partition()
}

fn write_sparse(out: &mut String, view: Option<&[f64]>) {
    match view {
        None => out.push_str(MISSING_VIEW),
        Some(v) => {
            let mut first = true;
            for (i, &x) in v.iter().enumerate().filter(|(_, x)| **x != 0.0) {
                if !first {
                    out.push(' ');
                }
                first = false;
                // `Display` for f64 is the shortest string that parses back exactly.
                let _ = write!(out, "{i}:{x}");
            }
        }
    }
}

pub fn format_multiview<'a>(
    d1: usize,
    d2: usize,
    num_classes: usize,
    examples: impl IntoIterator<Item = &'a MultiviewExample>,
) -> String {
    let mut out = format!("#dims {d1} {d2} {num_classes}\n");
    for ex in examples {
        let _ = write!(out, "{}\t", ex.label);
        write_sparse(&mut out, ex.view1.as_deref());
        out.push('\t');
        write_sparse(&mut out, ex.view2.as_deref());
        out.push('\n');
    }
    out
}

pub fn write_multiview<'a>(
    path: &Path,
    d1: usize,
    d2: usize,
    num_classes: usize,
    examples: impl IntoIterator<Item = &'a MultiviewExample>,
) -> Result<()> {
    std::fs::write(path, format_multiview(d1, d2, num_classes, examples)).map_err(Error::io(path))
}

pub fn write_dataset(path: &Path, ds: &PartitionedDataset) -> Result<()> {
    write_multiview(path, ds.d1(), ds.d2(), ds.num_classes(), ds.iter())
}

/// Whitespace-separated matrix, one row per line, `#` comments allowed.
/// Returns `(rows, cols, row-major values)`.
pub fn parse_matrix(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(i + 1, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::parse(i + 1, format!("row has {} entries, expected {c}", row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(1, "empty matrix"))?;
    Ok((rows, cols, values))
}

pub fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    parse_matrix(&std::fs::read_to_string(path).map_err(Error::io(path))?)
}

pub const METRICS_CSV_HEADER: &str = "iter,loss_d,loss_g1,loss_g2,heldout_acc";

pub fn metrics_csv_row(row: &IterationMetrics) -> String {
    let acc = row.heldout_acc.map(|a| a.to_string()).unwrap_or_default();
    format!("{},{},{},{},{}", row.iter, row.loss_d, row.loss_g1, row.loss_g2, acc)
}
