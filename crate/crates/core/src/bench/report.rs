//! Report files: accuracy CSV, confusion matrix CSV, confusion heat map PGM
//! and the config snapshot.

use std::io::Write;
use std::path::Path;

use crate::bench::experiment::ExperimentReport;
use crate::error::{Error, Result};

/// Writes `accuracy.csv`, `confusion.csv`, `confusion.pgm` and `config.json`
/// into `out_dir` (created if missing).
pub fn write_report(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_accuracy_csv(report, &out_dir.join("accuracy.csv"))?;
    write_confusion_csv(report, &out_dir.join("confusion.csv"))?;
    write_confusion_pgm(report, &out_dir.join("confusion.pgm"))?;
    let snapshot = serde_json::to_string_pretty(&report.config)
        .map_err(|e| Error::parse(out_dir.join("config.json"), e.to_string()))?;
    std::fs::write(out_dir.join("config.json"), snapshot + "\n")
        .map_err(|e| Error::io(out_dir.join("config.json"), e))?;
    Ok(())
}

pub fn write_accuracy_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut out = String::from("rep,accuracy\n");
    for (rep, acc) in report.per_rep_accuracy.iter().enumerate() {
        out.push_str(&format!("{},{}\n", rep + 1, acc));
    }
    out.push_str(&format!("mean,{}\n", report.mean_accuracy));
    out.push_str(&format!("std,{}\n", report.std_accuracy));
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses an accuracy CSV back into (per-repetition, mean, std).
pub fn read_accuracy_csv(path: &Path) -> Result<(Vec<f64>, f64, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reps = Vec::new();
    let mut mean = None;
    let mut std = None;
    for line in text.lines().skip(1) {
        let (key, value) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, format!("bad line {line:?}")))?;
        let value: f64 = value
            .parse()
            .map_err(|e| Error::parse(path, format!("bad value in {line:?}: {e}")))?;
        match key {
            "mean" => mean = Some(value),
            "std" => std = Some(value),
            _ => reps.push(value),
        }
    }
    match (mean, std) {
        (Some(m), Some(s)) => Ok((reps, m, s)),
        _ => Err(Error::parse(path, "missing mean/std rows")),
    }
}

pub fn write_confusion_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let n = report.n_classes();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut header = vec!["true_class".to_string()];
    header.extend(report.class_names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    for (row, name) in report.class_names.iter().enumerate() {
        let mut record = vec![name.clone()];
        record.extend(
            report.confusion[row * n..(row + 1) * n]
                .iter()
                .map(|c| c.to_string()),
        );
        writer
            .write_record(&record)
            .map_err(|e| Error::parse(path, e.to_string()))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parses a confusion CSV back into (class names, row-major counts).
pub fn read_confusion_csv(path: &Path) -> Result<(Vec<String>, Vec<u64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .skip(1)
        .map(|s| s.to_string())
        .collect();
    let mut counts = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        for field in record.iter().skip(1) {
            counts.push(
                field
                    .parse::<u64>()
                    .map_err(|e| Error::parse(path, format!("bad count {field:?}: {e}")))?,
            );
        }
    }
    if counts.len() != names.len() * names.len() {
        return Err(Error::parse(path, "confusion matrix is not square"));
    }
    Ok((names, counts))
}

/// Row-normalized grayscale heat map: cell value 255 * count / row total.
pub fn write_confusion_pgm(report: &ExperimentReport, path: &Path) -> Result<()> {
    let n = report.n_classes();
    let mut raster = Vec::with_capacity(n * n);
    for row in 0..n {
        let total: u64 = report.confusion[row * n..(row + 1) * n].iter().sum();
        for col in 0..n {
            let v = if total == 0 {
                0.0
            } else {
                report.confusion[row * n + col] as f64 / total as f64
            };
            raster.push((255.0 * v).round() as u8);
        }
    }
    // The matrix can be smaller than the minimum GrayImage shape, so the
    // raster is written directly.
    let mut out = Vec::with_capacity(raster.len() + 32);
    write!(out, "P5\n{n} {n}\n255\n").expect("vec write");
    out.extend_from_slice(&raster);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
