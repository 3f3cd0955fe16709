//! Conservative finite-volume transport of a phase-space PDF,
//!
//! ```text
//! ∂_t p + Σ_i ∂_{u_i} [ f_i(u) p − D ∂_{u_i} p ] = 0
//! ```
//!
//! with donor-cell (first-order upwind) advective fluxes, central diffusive
//! fluxes and zero flux through the outer faces of the phase domain.
//!
//! The assembled operator `L` is stored so that `dp/dt = −L p`; the forward
//! Euler update is then `p ← (I − dt·L) p`. Every face contributes `+rate` to
//! the diagonal of its donor cell and `−rate` to the receiving cell, so column
//! sums vanish and mass is conserved by construction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::burgers::{DynamicsSpec, SpatialGrid};
use crate::error::{invalid, Error, Result};
use crate::phase_space::{DensityField, PhaseGrid, NEGATIVE_TOLERANCE};
use crate::sparse::CsrMatrix;

/// Advection speeds tabulated at cell centers, one table per axis, plus a
/// constant diffusion coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVelocityField {
    grid: PhaseGrid,
    speeds: Vec<Vec<f64>>,
    diffusion: f64,
}

impl PhaseVelocityField {
    /// Evaluate `speed(axis, center)` at every cell center.
    pub fn from_fn(
        grid: PhaseGrid,
        diffusion: f64,
        mut speed: impl FnMut(usize, &[f64]) -> f64,
    ) -> Result<Self> {
        let cells = grid.cell_count();
        let mut speeds = vec![Vec::with_capacity(cells); grid.axes()];
        let mut point = vec![0.0; grid.axes()];
        for flat in 0..cells {
            grid.cell_center(flat, &mut point);
            for (axis, table) in speeds.iter_mut().enumerate() {
                table.push(speed(axis, &point));
            }
        }
        Self::from_tables(grid, diffusion, speeds)
    }

    /// Like [`from_fn`](Self::from_fn), with all axis speeds produced by one call.
    pub fn from_vector_fn(
        grid: PhaseGrid,
        diffusion: f64,
        mut field: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let cells = grid.cell_count();
        let m = grid.axes();
        let mut speeds = vec![Vec::with_capacity(cells); m];
        let mut point = vec![0.0; m];
        let mut out = vec![0.0; m];
        for flat in 0..cells {
            grid.cell_center(flat, &mut point);
            field(&point, &mut out);
            for (table, &s) in speeds.iter_mut().zip(&out) {
                table.push(s);
            }
        }
        Self::from_tables(grid, diffusion, speeds)
    }

    pub fn from_tables(grid: PhaseGrid, diffusion: f64, speeds: Vec<Vec<f64>>) -> Result<Self> {
        if !(diffusion >= 0.0 && diffusion.is_finite()) {
            return Err(invalid(
                "diffusion",
                format!("{diffusion} is not a finite value >= 0"),
            ));
        }
        if speeds.len() != grid.axes() {
            return Err(Error::LengthMismatch {
                expected: grid.axes(),
                actual: speeds.len(),
            });
        }
        if let Some(t) = speeds.iter().find(|t| t.len() != grid.cell_count()) {
            return Err(Error::LengthMismatch {
                expected: grid.cell_count(),
                actual: t.len(),
            });
        }
        Ok(Self {
            grid,
            speeds,
            diffusion,
        })
    }

    pub fn zero(grid: PhaseGrid, diffusion: f64) -> Result<Self> {
        Self::from_tables(
            grid,
            diffusion,
            vec![vec![0.0; grid.cell_count()]; grid.axes()],
        )
    }

    /// N-site Burgers dynamics: axis `j` of phase space is site `j`.
    pub fn burgers(
        grid: PhaseGrid,
        spec: &DynamicsSpec,
        sites: &SpatialGrid,
        diffusion: f64,
    ) -> Result<Self> {
        spec.validate()?;
        if grid.axes() != sites.sites() {
            return Err(Error::DimensionMismatch(format!(
                "{} phase axes for {} sites",
                grid.axes(),
                sites.sites()
            )));
        }
        Self::from_vector_fn(grid, diffusion, |u, out| {
            crate::burgers::rhs_into(u, spec, sites, out).expect("lengths checked above")
        })
    }

    /// Rigid rotation `f = (−ω v, ω u)` on a 2-axis grid.
    pub fn rotation(grid: PhaseGrid, omega: f64) -> Result<Self> {
        if grid.axes() != 2 {
            return Err(Error::DimensionMismatch(
                "rotation needs a 2-axis grid".into(),
            ));
        }
        Self::from_fn(grid, 0.0, |axis, x| {
            if axis == 0 {
                -omega * x[1]
            } else {
                omega * x[0]
            }
        })
    }

    /// Same speeds with a different diffusion coefficient.
    pub fn with_diffusion(self, diffusion: f64) -> Result<Self> {
        Self::from_tables(self.grid, diffusion, self.speeds)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn speed(&self, axis: usize, cell: usize) -> f64 {
        self.speeds[axis][cell]
    }

    pub fn speeds(&self, axis: usize) -> &[f64] {
        &self.speeds[axis]
    }

    /// `max_cells Σ_axes |f_axis|`.
    pub fn max_speed_sum(&self) -> f64 {
        (0..self.grid.cell_count())
            .map(|c| self.speeds.iter().map(|t| t[c].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn check_finite(&self) -> Result<()> {
        for (axis, table) in self.speeds.iter().enumerate() {
            if let Some(cell) = table.iter().position(|s| !s.is_finite()) {
                return Err(Error::NonFiniteSpeed { axis, cell });
            }
        }
        Ok(())
    }
}

/// Per-axis flux matrices and their sum `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxOperator {
    grid: PhaseGrid,
    per_axis: Vec<CsrMatrix>,
    combined: CsrMatrix,
}

impl FluxOperator {
    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// Flux matrix of a single axis (`U`, `V`, `W` for a 3-axis grid).
    pub fn axis(&self, axis: usize) -> &CsrMatrix {
        &self.per_axis[axis]
    }

    /// `L = Σ_axes`.
    pub fn combined(&self) -> &CsrMatrix {
        &self.combined
    }

    pub fn dim(&self) -> usize {
        self.combined.nrows()
    }

    /// Largest `dt` for which `I − dt·L` has no negative entries.
    pub fn positivity_dt(&self) -> f64 {
        let max_rate = self.combined.diagonal().into_iter().fold(0.0, f64::max);
        if max_rate > 0.0 {
            1.0 / max_rate
        } else {
            f64::INFINITY
        }
    }

    /// `out = L p`.
    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        self.combined.matvec_into(p, out)
    }
}

#[inline]
fn face_rates(left_speed: f64, right_speed: f64, inv_du: f64, diff: f64) -> (f64, f64) {
    let s = 0.5 * (left_speed + right_speed);
    // (left -> right, right -> left)
    (s.max(0.0) * inv_du + diff, (-s).max(0.0) * inv_du + diff)
}

/// Assemble the donor-cell flux operator for `vel` on `phase`.
pub fn assemble_operator(phase: &PhaseGrid, vel: &PhaseVelocityField) -> Result<FluxOperator> {
    if phase != vel.grid() {
        return Err(Error::DimensionMismatch(
            "velocity field lives on another grid".into(),
        ));
    }
    vel.check_finite()?;
    let n = phase.levels();
    let cells = phase.cell_count();
    let inv_du = 1.0 / phase.du();
    let diff = vel.diffusion() * inv_du * inv_du;
    let mut per_axis = Vec::with_capacity(phase.axes());
    for axis in 0..phase.axes() {
        let stride = phase.stride(axis);
        let f = vel.speeds(axis);
        let rows = (0..cells).map(|c| {
            let i = (c / stride) % n;
            let mut row = Vec::with_capacity(3);
            let mut diag = 0.0;
            if i > 0 {
                let nb = c - stride;
                let (into_c, out_of_c) = face_rates(f[nb], f[c], inv_du, diff);
                row.push((nb, -into_c));
                diag += out_of_c;
            }
            let right = if i + 1 < n {
                let nb = c + stride;
                let (out_of_c, into_c) = face_rates(f[c], f[nb], inv_du, diff);
                diag += out_of_c;
                Some((nb, -into_c))
            } else {
                None
            };
            row.push((c, diag));
            row.extend(right);
            row
        });
        per_axis.push(CsrMatrix::from_rows(cells, cells, rows)?);
    }
    let refs: Vec<&CsrMatrix> = per_axis.iter().collect();
    let combined = CsrMatrix::sum(&refs)?;
    Ok(FluxOperator {
        grid: *phase,
        per_axis,
        combined,
    })
}

/// Explicit time-step bound.
///
/// Returns the smallest of `cfl·du / max Σ|f|`, `cfl·du²/(2·M·D)` and
/// `cfl / max_cell(outflow rate)`; the last one is the exact nonnegativity
/// bound of the donor-cell Euler update. `+∞` when nothing moves.
pub fn max_stable_dt(phase: &PhaseGrid, vel: &PhaseVelocityField, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(invalid("cfl", format!("{cfl} is outside (0, 1]")));
    }
    if phase != vel.grid() {
        return Err(Error::DimensionMismatch(
            "velocity field lives on another grid".into(),
        ));
    }
    vel.check_finite()?;
    let du = phase.du();
    let adv = vel.max_speed_sum();
    let dt_adv = if adv > 0.0 {
        cfl * du / adv
    } else {
        f64::INFINITY
    };
    let d = vel.diffusion();
    let dt_diff = if d > 0.0 {
        cfl * du * du / (2.0 * phase.axes() as f64 * d)
    } else {
        f64::INFINITY
    };
    let inv_du = 1.0 / du;
    let diff = d * inv_du * inv_du;
    let n = phase.levels();
    let mut max_rate: f64 = 0.0;
    for c in 0..phase.cell_count() {
        let mut rate = 0.0;
        for axis in 0..phase.axes() {
            let stride = phase.stride(axis);
            let f = vel.speeds(axis);
            let i = (c / stride) % n;
            if i > 0 {
                rate += face_rates(f[c - stride], f[c], inv_du, diff).1;
            }
            if i + 1 < n {
                rate += face_rates(f[c], f[c + stride], inv_du, diff).0;
            }
        }
        max_rate = max_rate.max(rate);
    }
    let dt_pos = if max_rate > 0.0 {
        cfl / max_rate
    } else {
        f64::INFINITY
    };
    Ok(dt_adv.min(dt_diff).min(dt_pos))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `p ← p − dt·L p`.
    #[default]
    Euler,
    /// Two-stage strong-stability-preserving Runge-Kutta (Heun).
    Rk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub min_value: f64,
    pub boundary_mass: f64,
}

/// Per-step mass, minimum and boundary-mass history, step 0 included.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub records: Vec<StepRecord>,
}

impl Diagnostics {
    pub fn max_mass_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .map(|r| (r.mass - first.mass).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.min_value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "step,time,mass,min_value,boundary_mass")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.step,
                crate::fmt_f64(r.time),
                crate::fmt_f64(r.mass),
                crate::fmt_f64(r.min_value),
                crate::fmt_f64(r.boundary_mass)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: DensityField,
    pub diagnostics: Diagnostics,
}

struct Probe {
    boundary: Vec<bool>,
}

impl Probe {
    fn new(grid: &PhaseGrid) -> Self {
        Self {
            boundary: (0..grid.cell_count())
                .map(|c| grid.is_boundary_cell(c))
                .collect(),
        }
    }

    fn record(&self, step: usize, time: f64, p: &[f64]) -> Result<StepRecord> {
        let mut mass = 0.0;
        let mut boundary_mass = 0.0;
        let mut min_value = f64::INFINITY;
        let mut min_cell = 0;
        for (c, &v) in p.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteSlice { slice: step });
            }
            mass += v;
            if self.boundary[c] {
                boundary_mass += v;
            }
            if v < min_value {
                min_value = v;
                min_cell = c;
            }
        }
        if min_value < -NEGATIVE_TOLERANCE {
            return Err(Error::PositivityViolation {
                step,
                cell: min_cell,
                min_value,
            });
        }
        Ok(StepRecord {
            step,
            time,
            mass,
            min_value,
            boundary_mass,
        })
    }
}

/// March `p0` forward `steps` times, calling `observe(step, values)` after the
/// initial state and after every step.
pub fn evolve_observed(
    p0: &DensityField,
    op: &FluxOperator,
    dt: f64,
    steps: usize,
    method: Method,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<Evolution> {
    if p0.grid() != op.grid() {
        return Err(Error::DimensionMismatch(
            "initial field and operator grids differ".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("{dt} is not positive")));
    }
    let probe = Probe::new(op.grid());
    let mut p = p0.values().to_vec();
    let mut lp = vec![0.0; p.len()];
    let mut stage = match method {
        Method::Euler => Vec::new(),
        Method::Rk2 => vec![0.0; p.len()],
    };
    let mut records = Vec::with_capacity(steps + 1);
    records.push(probe.record(0, 0.0, &p)?);
    observe(0, &p);
    for step in 1..=steps {
        match method {
            Method::Euler => {
                op.apply_into(&p, &mut lp);
                for (pi, li) in p.iter_mut().zip(&lp) {
                    *pi -= dt * li;
                }
            }
            Method::Rk2 => {
                op.apply_into(&p, &mut lp);
                for ((s, pi), li) in stage.iter_mut().zip(&p).zip(&lp) {
                    *s = pi - dt * li;
                }
                op.apply_into(&stage, &mut lp);
                for ((pi, s), li) in p.iter_mut().zip(&stage).zip(&lp) {
                    *pi = 0.5 * *pi + 0.5 * (s - dt * li);
                }
            }
        }
        records.push(probe.record(step, step as f64 * dt, &p)?);
        observe(step, &p);
    }
    Ok(Evolution {
        field: DensityField::new(*op.grid(), p)?,
        diagnostics: Diagnostics { records },
    })
}

pub fn evolve(
    p0: &DensityField,
    op: &FluxOperator,
    dt: f64,
    steps: usize,
    method: Method,
) -> Result<Evolution> {
    evolve_observed(p0, op, dt, steps, method, |_, _| {})
}
