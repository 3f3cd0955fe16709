//! Compressed sparse row storage with sorted column indices.
//!
//! Rows are reduced left to right in column order, so products are
//! bit-identical for any number of worker threads.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

const PAR_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row entry lists. Entries must have strictly increasing
    /// columns within a row; exact zeros are dropped.
    pub fn from_rows<I, R>(nrows: usize, ncols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, f64)>,
    {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if c >= ncols || last.is_some_and(|l| c <= l) {
                    return Err(Error::DimensionMismatch(format!(
                        "row {i}: column {c} out of order or out of range"
                    )));
                }
                last = Some(c);
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        if row_ptr.len() != nrows + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {nrows} rows, got {}",
                row_ptr.len() - 1
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "matvec: y has wrong length");
        y.par_iter_mut()
            .with_min_len(PAR_ROWS)
            .enumerate()
            .for_each(|(i, yi)| {
                let (cols, vals) = self.row(i);
                let mut acc = 0.0;
                for (c, v) in cols.iter().zip(vals) {
                    acc += v * x[*c];
                }
                *yi = acc;
            });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Column sums accumulated in row order.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                sums[*c] += v;
            }
        }
        sums
    }

    /// Entry-wise sum of matrices with equal shape. Rows are merged in
    /// column order; coincident entries are added in argument order.
    pub fn sum(parts: &[&CsrMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty sum".into()))?;
        let (nrows, ncols) = (first.nrows, first.ncols);
        if parts.iter().any(|m| m.nrows != nrows || m.ncols != ncols) {
            return Err(Error::DimensionMismatch("operand shapes differ".into()));
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        let rows = (0..nrows).map(|i| {
            merged.clear();
            for m in parts {
                let (cols, vals) = m.row(i);
                merged.extend(cols.iter().copied().zip(vals.iter().copied()));
            }
            // stable: equal columns keep argument order
            merged.sort_by_key(|e| e.0);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(merged.len());
            for &(c, v) in merged.iter() {
                match row.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => row.push((c, v)),
                }
            }
            row
        });
        let rows: Vec<Vec<(usize, f64)>> = rows.collect();
        Self::from_rows(nrows, ncols, rows)
    }

    /// `I − scale·A` for square `A`.
    pub fn identity_minus_scaled(&self, scale: f64) -> Result<Self> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch("matrix is not square".into()));
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let mut row: Vec<(usize, f64)> = cols
                    .iter()
                    .zip(vals)
                    .map(|(&c, &v)| (c, -scale * v))
                    .collect();
                match row.binary_search_by_key(&i, |e| e.0) {
                    Ok(k) => row[k].1 += 1.0,
                    Err(k) => row.insert(k, (i, 1.0)),
                }
                row
            })
            .collect();
        Self::from_rows(self.nrows, self.ncols, rows)
    }

    /// Coordinate text, one `row col value` triple per line, 17 significant digits.
    pub fn write_coo<W: Write>(
        &self,
        w: &mut W,
        row_offset: usize,
        col_offset: usize,
    ) -> Result<()> {
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(
                    w,
                    "{} {} {}",
                    i + row_offset,
                    c + col_offset,
                    crate::fmt_f64(*v)
                )?;
            }
        }
        Ok(())
    }
}
