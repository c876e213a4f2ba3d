//! CSV and JSON writers for matrices, operators, series and reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::basis::{FockContext, Word};
use crate::error::Result;
use crate::gauge::IsometryFamily;
use crate::gram::GramFamily;
use crate::op::GradedOperator;
use crate::report::{sorted_json, DecaySeries, VerificationReport};

fn labels(ctx: &FockContext, k: usize) -> Vec<String> {
    (0..ctx.dim(k))
        .map(|c| Word::from_index(ctx.n(), k, c).label())
        .collect()
}

/// Writes a matrix with a header row of column labels and a leading row-label column.
pub fn write_matrix_csv(
    path: &Path,
    m: &DMatrix<f64>,
    row_labels: &[String],
    col_labels: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![String::new()];
    header.extend(col_labels.iter().cloned());
    w.write_record(&header)?;
    for r in 0..m.nrows() {
        let mut rec = vec![row_labels[r].clone()];
        rec.extend((0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One `gram_k.csv` per level, rows and columns labelled by words.
pub fn write_gram_csv(dir: &Path, gram: &GramFamily) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let ctx = gram.ctx();
    let mut out = Vec::new();
    for k in 0..=ctx.levels() {
        let l = labels(ctx, k);
        let path = dir.join(format!("gram_{k}.csv"));
        write_matrix_csv(&path, gram.gram(k), &l, &l)?;
        out.push(path);
    }
    Ok(out)
}

#[derive(Serialize)]
struct BlockEntry {
    k_out: usize,
    k_in: usize,
    rows: usize,
    cols: usize,
    file: String,
    norm: f64,
}

/// One CSV per stored block plus `<stem>.json` listing block shapes and q-norms.
pub fn write_operator(
    dir: &Path,
    stem: &str,
    x: &GradedOperator,
    gram: &GramFamily,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let ctx = x.ctx();
    let mut entries = Vec::new();
    for (&(ko, ki), b) in x.blocks() {
        let file = format!("{stem}_{ko}_{ki}.csv");
        write_matrix_csv(&dir.join(&file), b, &labels(ctx, ko), &labels(ctx, ki))?;
        let single = GradedOperator::from_blocks(ctx, x.label(), [((ko, ki), b.clone())])?;
        entries.push(BlockEntry {
            k_out: ko,
            k_in: ki,
            rows: b.nrows(),
            cols: b.ncols(),
            file,
            norm: single.operator_norm(gram, ki, ki)?,
        });
    }
    let mut manifest = BTreeMap::new();
    manifest.insert("label", serde_json::to_value(x.label())?);
    manifest.insert("n", serde_json::to_value(ctx.n())?);
    manifest.insert("q", serde_json::to_value(ctx.q())?);
    manifest.insert("N", serde_json::to_value(ctx.levels())?);
    manifest.insert("blocks", serde_json::to_value(&entries)?);
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, sorted_json(&manifest))?;
    Ok(path)
}

/// `<stem>.csv` with the values and `<stem>.json` with the fit metadata.
pub fn write_series(dir: &Path, stem: &str, series: &DecaySeries) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&csv_path, series.to_csv())?;
    fs::write(&json_path, series.to_json())?;
    Ok((csv_path, json_path))
}

pub fn write_report(dir: &Path, stem: &str, report: &VerificationReport) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, report.to_json())?;
    Ok(path)
}

/// Rows `i,j,level,value` with 1-based letters.
pub fn write_defect_profile(path: &Path, iso: &IsometryFamily) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "level", "value"])?;
    for (&(i, j, m), v) in &iso.defect_profile {
        w.write_record([
            (i + 1).to_string(),
            (j + 1).to_string(),
            m.to_string(),
            format!("{v:e}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
