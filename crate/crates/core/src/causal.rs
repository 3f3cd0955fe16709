//! Explicit Euler marching recast as one block lower-triangular system.
//!
//! With `S = I − dt·L` and slices `p^(0) … p^(M)`:
//!
//! ```text
//! [  I              ] [p^(0)]   [p0]
//! [ −S   I          ] [p^(1)]   [ 0]
//! [     −S   I      ] [p^(2)] = [ 0]
//! [          ⋱   ⋱  ] [  ⋮  ]   [ ⋮]
//! ```
//!
//! The unit block diagonal makes forward substitution a causal sequence of
//! matrix-vector products; no pivoting is ever needed. `A` is applied block by
//! block; [`CausalSystem::assemble_full`] materializes it only for small
//! systems, as a cross-check.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::liouville::FluxOperator;
use crate::phase_space::DensityField;
use crate::sparse::CsrMatrix;

/// Largest dimension [`CausalSystem::assemble_full`] agrees to build.
pub const FULL_ASSEMBLY_LIMIT: usize = 5000;

#[derive(Debug, Clone)]
pub struct CausalSystem {
    step: CsrMatrix,
    slices: usize,
    p0: DensityField,
    dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SparsityReport {
    /// Maximum nonzeros in any row of `A`.
    pub s: usize,
    pub total_nonzeros: usize,
    pub dimension: usize,
}

/// Build `A p = q` for `time_slices` Euler steps of size `dt` from `p0`.
pub fn build_causal_system(
    l: &FluxOperator,
    dt: f64,
    time_slices: usize,
    p0: &DensityField,
) -> Result<CausalSystem> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("{dt} is not positive")));
    }
    if time_slices == 0 {
        return Err(invalid("time_slices", "need at least one time slice"));
    }
    if p0.grid() != l.grid() {
        return Err(Error::DimensionMismatch(format!(
            "seed has {} cells, operator acts on {}",
            p0.values().len(),
            l.dim()
        )));
    }
    Ok(CausalSystem {
        step: l.combined().identity_minus_scaled(dt)?,
        slices: time_slices + 1,
        p0: p0.clone(),
        dt,
    })
}

impl CausalSystem {
    pub fn slice_dim(&self) -> usize {
        self.step.nrows()
    }

    /// Number of slices, `M_t + 1`.
    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn dimension(&self) -> usize {
        self.slice_dim() * self.slices
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> &DensityField {
        &self.p0
    }

    /// `S = I − dt·L`.
    pub fn step_matrix(&self) -> &CsrMatrix {
        &self.step
    }

    pub fn sparsity(&self) -> SparsityReport {
        let n = self.slice_dim();
        let steps = self.slices - 1;
        SparsityReport {
            s: (self.step.max_row_nnz() + 1).max(1),
            total_nonzeros: n + steps * (self.step.nnz() + n),
            dimension: self.dimension(),
        }
    }

    /// `A x`, block row by block row.
    pub fn apply(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_slices(x)?;
        let mut out = Vec::with_capacity(self.slices);
        out.push(x[0].clone());
        let mut sx = vec![0.0; self.slice_dim()];
        for m in 1..self.slices {
            self.step.matvec_into(&x[m - 1], &mut sx);
            out.push(x[m].iter().zip(&sx).map(|(a, b)| a - b).collect());
        }
        Ok(out)
    }

    /// Right-hand side `q`: `p0` in block 0, zeros elsewhere.
    pub fn rhs(&self) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.slice_dim()]; self.slices];
        q[0] = self.p0.values().to_vec();
        q
    }

    fn check_slices(&self, x: &[Vec<f64>]) -> Result<()> {
        if x.len() != self.slices {
            return Err(Error::DimensionMismatch(format!(
                "{} slices supplied, system has {}",
                x.len(),
                self.slices
            )));
        }
        if let Some(s) = x.iter().find(|s| s.len() != self.slice_dim()) {
            return Err(Error::LengthMismatch {
                expected: self.slice_dim(),
                actual: s.len(),
            });
        }
        Ok(())
    }

    /// Materialize `A` as one sparse matrix (dimension ≤ [`FULL_ASSEMBLY_LIMIT`]).
    pub fn assemble_full(&self) -> Result<CsrMatrix> {
        let dim = self.dimension();
        if dim > FULL_ASSEMBLY_LIMIT {
            return Err(Error::DimensionMismatch(format!(
                "dimension {dim} exceeds the full-assembly limit {FULL_ASSEMBLY_LIMIT}"
            )));
        }
        let n = self.slice_dim();
        let rows = (0..dim).map(|r| {
            let (m, i) = (r / n, r % n);
            let mut row = Vec::new();
            if m > 0 {
                let (cols, vals) = self.step.row(i);
                row.extend(cols.iter().zip(vals).map(|(c, v)| ((m - 1) * n + c, -v)));
            }
            row.push((r, 1.0));
            row
        });
        let rows: Vec<_> = rows.collect();
        CsrMatrix::from_rows(dim, dim, rows)
    }

    /// Coordinate text for the whole of `A` (written block-wise, never stored).
    pub fn write_coo<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.slice_dim();
        for m in 0..self.slices {
            for i in 0..n {
                if m > 0 {
                    let (cols, vals) = self.step.row(i);
                    for (c, v) in cols.iter().zip(vals) {
                        writeln!(
                            w,
                            "{} {} {}",
                            m * n + i,
                            (m - 1) * n + c,
                            crate::fmt_f64(-v)
                        )?;
                    }
                }
                writeln!(w, "{} {} {}", m * n + i, m * n + i, crate::fmt_f64(1.0))?;
            }
        }
        Ok(())
    }
}

/// Forward substitution returning raw slice vectors.
pub fn forward_solve_raw(sys: &CausalSystem) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(sys.slices);
    out.push(sys.p0.values().to_vec());
    for m in 1..sys.slices {
        let next = sys.step.matvec(&out[m - 1]);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSlice { slice: m });
        }
        out.push(next);
    }
    Ok(out)
}

/// `p^(0) = p0`, `p^(m+1) = S p^(m)`.
pub fn forward_solve(sys: &CausalSystem) -> Result<Vec<DensityField>> {
    forward_solve_raw(sys)?
        .into_iter()
        .map(|v| DensityField::new(*sys.p0.grid(), v))
        .collect()
}

/// `max_m ‖(A p − q)_m‖∞`.
pub fn residual(sys: &CausalSystem, solution: &[Vec<f64>]) -> Result<f64> {
    let ap = sys.apply(solution)?;
    let q0 = sys.p0.values();
    let mut worst: f64 = 0.0;
    for (m, block) in ap.iter().enumerate() {
        for (i, v) in block.iter().enumerate() {
            let r = if m == 0 { v - q0[i] } else { *v };
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

pub fn residual_fields(sys: &CausalSystem, solution: &[DensityField]) -> Result<f64> {
    let raw: Vec<Vec<f64>> = solution.iter().map(|f| f.values().to_vec()).collect();
    residual(sys, &raw)
}
