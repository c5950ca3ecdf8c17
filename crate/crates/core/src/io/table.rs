use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::EpochRecord;

pub const SIDECAR_HEADER: [&str; 4] = ["index", "param_error", "norm_recon_error", "unnorm_recon_error"];

/// Shortest text that parses back to the same bits; missing values are empty.
pub fn format_float(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

/// Comma-separated table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Dimension(format!("row has {} cells, header {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty table".into()))?;
        let mut t = Table::new(header.split(','));
        for (i, line) in lines.enumerate() {
            t.push(line.split(',').map(str::to_string).collect())
                .map_err(|_| Error::Format(format!("row {} has the wrong number of cells", i + 1)))?;
        }
        Ok(t)
    }
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    write_atomic(path, table.to_csv().as_bytes())
}

/// Per-sample errors written next to a reconstruction dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SidecarRow {
    pub index: usize,
    pub param_error: Option<f64>,
    pub norm_recon_error: f64,
    pub unnorm_recon_error: f64,
}

pub fn write_sidecar(path: &Path, rows: &[SidecarRow]) -> Result<()> {
    let mut t = Table::new(SIDECAR_HEADER);
    for r in rows {
        t.push(vec![
            r.index.to_string(),
            format_float(r.param_error),
            format_float(Some(r.norm_recon_error)),
            format_float(Some(r.unnorm_recon_error)),
        ])?;
    }
    write_table(path, &t)
}

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    cell.parse().map_err(|_| Error::Format(format!("line {line}: bad number {cell:?}")))
}

pub fn read_sidecar(path: &Path) -> Result<Vec<SidecarRow>> {
    let t = Table::parse(&std::fs::read_to_string(path)?)?;
    if t.header != SIDECAR_HEADER {
        return Err(Error::Format(format!("unexpected sidecar header {:?}", t.header)));
    }
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            Ok(SidecarRow {
                index: r[0].parse().map_err(|_| Error::Format(format!("line {line}: bad index")))?,
                param_error: if r[1].is_empty() { None } else { Some(parse_cell(&r[1], line)?) },
                norm_recon_error: parse_cell(&r[2], line)?,
                unnorm_recon_error: parse_cell(&r[3], line)?,
            })
        })
        .collect()
}

/// Loss history as `epoch,train_loss,val_loss`.
pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut t = Table::new(["epoch", "train_loss", "val_loss"]);
    for h in history {
        t.push(vec![h.epoch.to_string(), format_float(Some(h.train_loss)), format_float(h.val_loss)])?;
    }
    write_table(path, &t)
}
