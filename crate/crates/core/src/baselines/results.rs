use std::fmt::Write as _;

use crate::geodata::{LABEL_NAMES, NUM_LABELS};

/// Test MAE per label for baselines and networks, laid out with labels as
/// rows and methods as columns.
#[derive(Clone, Debug, Default)]
pub struct ResultsTable {
    pub baselines: Vec<(String, [f64; NUM_LABELS])>,
    pub networks: Vec<(String, [f64; NUM_LABELS])>,
}

fn best(rows: &[(String, [f64; NUM_LABELS])], l: usize) -> Option<f64> {
    rows.iter().map(|r| r.1[l]).min_by(f64::total_cmp)
}

impl ResultsTable {
    /// Relative MAE reduction of the best network over the best baseline, in percent.
    pub fn improvement(&self, label: usize) -> Option<f64> {
        let b = best(&self.baselines, label)?;
        let n = best(&self.networks, label)?;
        (b != 0.0).then(|| (b - n) / b * 100.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for (name, _) in self.baselines.iter().chain(&self.networks) {
            write!(out, ",{name}").expect("string write");
        }
        if !self.networks.is_empty() {
            out.push_str(",improvement_pct");
        }
        out.push('\n');
        for (l, label) in LABEL_NAMES.iter().enumerate() {
            out.push_str(label);
            for (_, v) in self.baselines.iter().chain(&self.networks) {
                write!(out, ",{}", v[l]).expect("string write");
            }
            if !self.networks.is_empty() {
                match self.improvement(l) {
                    Some(p) => write!(out, ",{p}").expect("string write"),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_compares_best_of_each_side() {
        let t = ResultsTable {
            baselines: vec![("average".into(), [10.0; 6]), ("tree".into(), [8.0; 6])],
            networks: vec![("finetune".into(), [6.0; 6])],
        };
        assert_eq!(t.improvement(0), Some(25.0));
        let csv = t.to_csv();
        assert!(csv.starts_with("label,average,tree,finetune,improvement_pct\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
