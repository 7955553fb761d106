use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{paired_ttest, RecallReport, TTest};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub recall: Vec<f64>,
    /// Paired t-test against the baseline row at each K; absent for the
    /// baseline itself and for single-model reports.
    pub vs_baseline: Option<Vec<TTest>>,
}

/// Models as rows, Recall@K as columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ks: Vec<usize>,
    pub baseline: Option<String>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// `baseline` indexes into `models`. All reports must cover the same users in the same order.
    pub fn build(models: &[(String, RecallReport)], baseline: usize) -> Result<Self> {
        let (_, base) = models
            .get(baseline)
            .ok_or_else(|| Error::Config(format!("baseline row {baseline} out of range")))?;
        for (name, r) in models {
            if r.ks != base.ks || r.users != base.users {
                return Err(Error::Data(format!("report {name:?} is not paired with the baseline")));
            }
        }
        let with_tests = models.len() > 1;
        let rows = models
            .iter()
            .enumerate()
            .map(|(i, (name, r))| {
                let vs_baseline = if with_tests && i != baseline {
                    Some(
                        (0..r.ks.len())
                            .map(|k| paired_ttest(&r.column(k), &base.column(k)))
                            .collect::<Result<Vec<_>>>()?,
                    )
                } else {
                    None
                };
                Ok(ComparisonRow {
                    name: name.clone(),
                    recall: r.mean.clone(),
                    vs_baseline,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ComparisonReport {
            ks: base.ks.clone(),
            baseline: with_tests.then(|| models[baseline].0.clone()),
            rows,
        })
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "Model");
        for k in &self.ks {
            let _ = write!(out, "  {:>10}", format!("Recall@{k}"));
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<width$}", row.name);
            for v in &row.recall {
                let _ = write!(out, "  {v:>10.4}");
            }
            out.push('\n');
        }
        if let Some(base) = &self.baseline {
            let _ = writeln!(out, "\npaired t-test p-values vs {base}");
            for row in &self.rows {
                let Some(tests) = &row.vs_baseline else {
                    continue;
                };
                let _ = write!(out, "{:<width$}", row.name);
                for t in tests {
                    let _ = write!(out, "  {:>10}", format!("{:.3e}", t.p));
                }
                out.push('\n');
            }
        }
        out
    }
}
