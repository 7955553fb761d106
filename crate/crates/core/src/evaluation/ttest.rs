use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub df: usize,
    /// Set when every difference is equal, so the standard error is zero.
    pub zero_variance: bool,
}

/// Two-sided paired t-test on `a[i] − b[i]`.
///
/// When all differences are equal the statistic is undefined; the result
/// then has `zero_variance` set with t = ±∞, p = 0 (or t = 0, p = 1 when the
/// common difference is zero).
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "paired samples of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Data("a paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let spread = diffs.iter().any(|&d| d != diffs[0]);
    if !spread {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTest {
            t,
            p,
            df,
            zero_variance: true,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        df,
        zero_variance: false,
    })
}
