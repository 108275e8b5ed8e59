use std::fmt::Write as _;
use std::path::Path;

use super::pretrain::stack;
use crate::dataset::Dataset;
use crate::geodata::{LABEL_NAMES, NUM_LABELS};
use crate::models::ModelState;
use crate::{Result, WamError};

/// Denormalized predictions for every sample, batched in inference mode.
pub fn predict_dataset(state: &ModelState, ds: &Dataset, batch: usize) -> Result<Vec<[f64; NUM_LABELS]>> {
    let inputs = ds.inputs();
    let mut out = Vec::with_capacity(ds.len());
    for chunk in inputs.chunks(batch.max(1)) {
        let y = state.predict_normalized(&stack(chunk)?)?;
        for row in y.data().chunks(y.shape()[1]) {
            let v = state.denormalize(row)?;
            let mut a = [0.0; NUM_LABELS];
            a.copy_from_slice(&v[..NUM_LABELS]);
            out.push(a);
        }
    }
    Ok(out)
}

/// Per-label mean absolute error in natural units.
pub fn mae(pred: &[[f64; NUM_LABELS]], truth: &[[f64; NUM_LABELS]]) -> Result<[f64; NUM_LABELS]> {
    if pred.is_empty() {
        return Err(WamError::EmptyEvaluation);
    }
    if pred.len() != truth.len() {
        return Err(WamError::Config(format!(
            "{} predictions for {} labelled samples",
            pred.len(),
            truth.len()
        )));
    }
    let mut acc = [0.0; NUM_LABELS];
    for (p, t) in pred.iter().zip(truth) {
        for l in 0..NUM_LABELS {
            acc[l] += (p[l] - t[l]).abs();
        }
    }
    Ok(acc.map(|a| a / pred.len() as f64))
}

/// Per-label MAE of a model on labelled samples.
pub fn evaluate_mae(state: &ModelState, ds: &Dataset) -> Result<[f64; NUM_LABELS]> {
    if ds.is_empty() {
        return Err(WamError::EmptyEvaluation);
    }
    mae(&predict_dataset(state, ds, 64)?, &ds.labels()?)
}

/// CSV with a header of label names and one row per named method.
pub fn mae_csv(rows: &[(String, [f64; NUM_LABELS])]) -> String {
    let mut out = format!("method,{}\n", LABEL_NAMES.join(","));
    for (name, v) in rows {
        let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{name},{}", cells.join(",")).expect("string write");
    }
    out
}

/// Predictions table: one row per sample with label-named columns.
pub fn write_predictions(path: &Path, pred: &[[f64; NUM_LABELS]]) -> Result<()> {
    let mut out = format!("{}\n", LABEL_NAMES.join(","));
    for p in pred {
        let cells: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", cells.join(",")).expect("string write");
    }
    std::fs::write(path, out).map_err(|e| WamError::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<[f64; NUM_LABELS]>> {
    let ctx = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?
        .clone();
    let cols: Vec<usize> = LABEL_NAMES
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| WamError::parse(ctx.clone(), format!("missing column `{n}`")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?;
        let mut a = [0.0; NUM_LABELS];
        for (l, &c) in cols.iter().enumerate() {
            a[l] = rec
                .get(c)
                .unwrap_or("")
                .parse()
                .map_err(|e| WamError::parse(ctx.clone(), format!("{}: {e}", LABEL_NAMES[l])))?;
        }
        out.push(a);
    }
    Ok(out)
}

/// Reads a table written by [`mae_csv`].
pub fn read_mae_csv(path: &Path) -> Result<Vec<(String, [f64; NUM_LABELS])>> {
    let ctx = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?
        .clone();
    let expected: Vec<&str> = std::iter::once("method").chain(LABEL_NAMES.iter().copied()).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(WamError::parse(
            ctx,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?;
        let mut a = [0.0; NUM_LABELS];
        for (l, v) in a.iter_mut().enumerate() {
            *v = rec[l + 1]
                .parse()
                .map_err(|e| WamError::parse(ctx.clone(), format!("{}: {e}", LABEL_NAMES[l])))?;
        }
        out.push((rec[0].to_string(), a));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_has_zero_error() {
        let t = [[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [0.5; 6]];
        assert_eq!(mae(&t, &t).unwrap(), [0.0; 6]);
        assert!(matches!(mae(&[], &[]), Err(WamError::EmptyEvaluation)));
    }

    #[test]
    fn order_does_not_matter() {
        let p = [[1.0; 6], [3.0; 6], [0.0; 6]];
        let t = [[2.0; 6], [2.5; 6], [1.0; 6]];
        let a = mae(&p, &t).unwrap();
        let b = mae(&[p[2], p[0], p[1]], &[t[2], t[0], t[1]]).unwrap();
        assert_eq!(a, b);
        assert!((a[0] - 2.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn predictions_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let v = vec![[0.1, 2.0, 1e5, 0.3, 7.0, 1.0 / 3.0]];
        write_predictions(&p, &v).unwrap();
        assert_eq!(read_predictions(&p).unwrap(), v);
    }

    #[test]
    fn mae_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mae.csv");
        let rows = vec![("frozen".to_string(), [0.25, 1.5, 3.0, 0.0, 1e-9, 2.0 / 3.0])];
        std::fs::write(&p, mae_csv(&rows)).unwrap();
        assert_eq!(read_mae_csv(&p).unwrap(), rows);
    }
}
