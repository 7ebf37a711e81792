//! CSV schemas for sweeps, grids and mAST tables.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use posepatch::eval::{GridResult, ParamKind, SweepResult};
use serde::{Deserialize, Serialize};

pub const SWEEP_HEADER: [&str; 6] = ["param_kind", "target_class", "phi", "success_rate", "n_images", "seed"];
pub const GRID_HEADER: [&str; 6] = ["yaw", "roll", "target_class", "success_rate", "n_images", "seed"];
pub const MAST_HEADER: [&str; 4] = ["target_class", "tier", "train_support", "mast"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param_kind: ParamKind,
    pub target_class: usize,
    pub phi: f64,
    pub success_rate: f64,
    pub n_images: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub yaw: f64,
    pub roll: f64,
    pub target_class: usize,
    pub success_rate: f64,
    pub n_images: usize,
    pub seed: u64,
}

/// One mAST value. `target_class` is empty on tier-mean rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MastRow {
    pub target_class: Option<usize>,
    pub tier: String,
    pub train_support: String,
    pub mast: f64,
}

pub fn sweep_rows(r: &SweepResult) -> Vec<SweepRow> {
    r.phis
        .iter()
        .zip(&r.rates)
        .map(|(&phi, &rate)| SweepRow {
            param_kind: r.kind,
            target_class: r.target,
            phi,
            success_rate: rate,
            n_images: r.n_images,
            seed: r.seed,
        })
        .collect()
}

/// Yaw varies fastest, rolls in ascending order.
pub fn grid_rows(g: &GridResult) -> Vec<GridRow> {
    let mut rows = Vec::with_capacity(g.rolls.len() * g.yaws.len());
    for (row, &roll) in g.rates.iter().zip(&g.rolls) {
        for (&rate, &yaw) in row.iter().zip(&g.yaws) {
            rows.push(GridRow { yaw, roll, target_class: g.target, success_rate: rate, n_images: g.n_images, seed: g.seed });
        }
    }
    rows
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `path`, checking the header and naming the offending row on error.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        bail!("{}: header {:?} does not match expected {:?}", path.display(), found, header);
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        // row 1 is the header
        rows.push(rec.map_err(|e| anyhow!("{}: row {}: {e}", path.display(), i + 2))?);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Sweep,
    Grid,
    Mast,
}

/// Classifies a CSV by its header line.
pub fn detect_kind(path: &Path) -> Result<CsvKind> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let h: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let is = |expected: &[&str]| h == expected;
    if is(&SWEEP_HEADER) {
        Ok(CsvKind::Sweep)
    } else if is(&GRID_HEADER) {
        Ok(CsvKind::Grid)
    } else if is(&MAST_HEADER) {
        Ok(CsvKind::Mast)
    } else {
        bail!("{}: unrecognized header {:?}", path.display(), h)
    }
}
