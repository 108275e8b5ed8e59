use std::fmt::Write as _;
use std::path::Path;

use crate::{Result, WamError};

/// One evaluation of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub metric: f64,
    /// Whether this evaluation improved the monitored metric and was kept.
    pub saved: bool,
}

/// Per-epoch loss and monitored metric of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricLog {
    pub metric: String,
    pub higher_is_better: bool,
    pub records: Vec<EpochRecord>,
}

impl MetricLog {
    pub fn new(metric: &str, higher_is_better: bool) -> Self {
        MetricLog {
            metric: metric.to_string(),
            higher_is_better,
            records: Vec::new(),
        }
    }

    pub fn improves(&self, best: Option<f64>, value: f64) -> bool {
        match best {
            None => value.is_finite(),
            Some(b) if self.higher_is_better => value > b,
            Some(b) => value < b,
        }
    }

    /// Metric values at the saved evaluations, in order.
    pub fn saved_values(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.saved).map(|r| r.metric).collect()
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().rev().find(|r| r.saved)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,loss,{},saved\n", self.metric);
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.epoch, r.loss, r.metric, u8::from(r.saved)).expect("string write");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| WamError::io(path, e))
    }
}
