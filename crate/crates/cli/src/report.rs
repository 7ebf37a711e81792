//! `report` and `plot`: pure functions of files already on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};

use crate::config::Family;
use crate::csvio::{detect_kind, read_rows, CsvKind, GridRow, MastRow, SweepRow, GRID_HEADER, MAST_HEADER, SWEEP_HEADER};
use crate::pipeline::{render_table, Paths};
use crate::svg::{Heatmap, LinePlot, Series};

/// Tier-mean rows of a mAST CSV arranged as `(columns, [(group, values)])`,
/// both in order of first appearance.
pub type Table = (Vec<String>, Vec<(String, Vec<f64>)>);

pub fn table_from_mast_csv(path: &Path) -> Result<Table> {
    let rows: Vec<MastRow> = read_rows(path, &MAST_HEADER)?;
    let mut columns: Vec<String> = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    let mut cells = BTreeMap::new();
    for r in rows.iter().filter(|r| r.target_class.is_none()) {
        if !columns.contains(&r.train_support) {
            columns.push(r.train_support.clone());
        }
        if !groups.contains(&r.tier) {
            groups.push(r.tier.clone());
        }
        cells.insert((r.tier.clone(), r.train_support.clone()), r.mast);
    }
    if cells.is_empty() {
        bail!("{}: no tier-mean rows", path.display());
    }
    let mut table = Vec::new();
    for g in &groups {
        let mut vals = Vec::new();
        for c in &columns {
            match cells.get(&(g.clone(), c.clone())) {
                Some(&v) => vals.push(v),
                None => bail!("{}: missing value for tier {g}, support {c}", path.display()),
            }
        }
        table.push((g.clone(), vals));
    }
    Ok((columns, table))
}

/// Markdown tables for every family that has results under `paths`.
pub fn report(paths: &Paths) -> Result<String> {
    let mut out = String::new();
    for f in Family::ALL {
        let p = paths.mast_csv(f);
        if !p.exists() {
            continue;
        }
        let (columns, rows) = table_from_mast_csv(&p)?;
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&render_table(f, &columns, &rows));
    }
    if out.is_empty() {
        bail!("no experiment results under {}; run `posepatch experiment` first", paths.root.display());
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plot".into())
}

/// Renders sweep CSVs into one line plot (a line per file and class) and
/// each grid CSV into a heatmap per class. Everything is parsed before any
/// file is written.
pub fn plot_csvs(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        bail!("no CSV files given");
    }
    let mut series = Vec::new();
    let mut kinds = Vec::new();
    let mut maps = Vec::new();
    for path in inputs {
        match detect_kind(path)? {
            CsvKind::Sweep => {
                let rows: Vec<SweepRow> = read_rows(path, &SWEEP_HEADER)?;
                let mut by_class: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
                for r in &rows {
                    let e = by_class.entry(r.target_class).or_default();
                    e.0.push(r.phi);
                    e.1.push(r.success_rate);
                }
                for (class, (xs, ys)) in by_class {
                    series.push(Series { label: format!("{} c{class}", stem(path)), xs, ys, support: None });
                }
                kinds.push(rows[0].param_kind);
            }
            CsvKind::Grid => {
                let rows: Vec<GridRow> = read_rows(path, &GRID_HEADER)?;
                let mut by_class: BTreeMap<usize, Vec<&GridRow>> = BTreeMap::new();
                for r in &rows {
                    by_class.entry(r.target_class).or_default().push(r);
                }
                for (class, rows) in by_class {
                    let mut yaws: Vec<f64> = rows.iter().map(|r| r.yaw).collect();
                    let mut rolls: Vec<f64> = rows.iter().map(|r| r.roll).collect();
                    for v in [&mut yaws, &mut rolls] {
                        v.sort_by(f64::total_cmp);
                        v.dedup();
                    }
                    let mut values = vec![vec![f64::NAN; yaws.len()]; rolls.len()];
                    for r in rows {
                        let yi = yaws.iter().position(|&y| y == r.yaw).unwrap();
                        let ri = rolls.iter().position(|&x| x == r.roll).unwrap();
                        values[ri][yi] = r.success_rate;
                    }
                    if values.iter().flatten().any(|v| v.is_nan()) {
                        bail!("{}: grid for class {class} is not a full yaw × roll lattice", path.display());
                    }
                    let map = Heatmap {
                        title: format!("{} class {class}", stem(path)),
                        x_label: "yaw ψ (degrees)".into(),
                        y_label: "roll θ (degrees)".into(),
                        xs: yaws,
                        ys: rolls,
                        values,
                    };
                    maps.push((format!("{}_class_{class}.svg", stem(path)), map));
                }
            }
            CsvKind::Mast => bail!("{}: mAST tables are reported, not plotted (see `posepatch report`)", path.display()),
        }
    }
    kinds.dedup();
    if kinds.len() > 1 {
        bail!("sweep CSVs mix parameter kinds {kinds:?}");
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if let Some(kind) = kinds.first() {
        let plot = LinePlot {
            title: format!("{} sweep", kind.name()),
            x_label: kind.name().to_string(),
            y_label: "attack success rate".into(),
            series,
        };
        let p = out_dir.join(format!("{}_sweep.svg", kind.name()));
        fs::write(&p, plot.render())?;
        written.push(p);
    }
    for (name, map) in maps {
        let p = out_dir.join(name);
        fs::write(&p, map.render())?;
        written.push(p);
    }
    Ok(written)
}
