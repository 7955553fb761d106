use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::{Error, Result};

/// One fixed-length embedding per item, e.g. the encoder's pooled document vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseItemEmbeddings {
    pub vectors: Array2<f64>,
}

impl DenseItemEmbeddings {
    pub fn new(vectors: Array2<f64>) -> Result<Self> {
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite entry in item embeddings".into()));
        }
        Ok(DenseItemEmbeddings { vectors })
    }

    pub fn n_items(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn row(&self, item: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(item)
    }

    /// Header `n_items dim`, then `item_id v1 ... v_dim` per line with 9
    /// significant digits.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{} {}", self.n_items(), self.dim()).map_err(io)?;
        for (j, row) in self.vectors.rows().into_iter().enumerate() {
            write!(out, "{j}").map_err(io)?;
            for &v in row {
                write!(out, " {}", format_sig9(v)).map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut lines = crate::corpus::open_lines(path)?;
        let header = match lines.next() {
            Some(line) => line?.1,
            None => return Err(Error::parse(path, 1, "empty embedding file")),
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|f| f.parse().map_err(|_| Error::parse(path, 1, "bad header")))
            .collect::<Result<_>>()?;
        let [n_items, dim] = dims[..] else {
            return Err(Error::parse(path, 1, "expected header `n_items dim`"));
        };
        let mut vectors = Array2::zeros((n_items, dim));
        let mut seen = vec![false; n_items];
        for line in lines {
            let (no, text) = line?;
            if text.trim().is_empty() {
                continue;
            }
            let mut fields = text.split_whitespace();
            let item: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(path, no, "bad item id"))?;
            if item >= n_items || seen[item] {
                return Err(Error::parse(path, no, format!("item {item} out of range or repeated")));
            }
            seen[item] = true;
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(path, no, format!("bad value {f:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::parse(
                    path,
                    no,
                    format!("expected {dim} values, got {}", values.len()),
                ));
            }
            for (slot, v) in vectors.row_mut(item).iter_mut().zip(values) {
                *slot = v;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Data(format!("{}: no vector for item {missing}", path.display())));
        }
        Self::new(vectors)
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}
