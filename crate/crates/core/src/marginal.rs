//! Three-point marginal transport over `(u, v, w) = (u_{j−1}, u_j, u_{j+1})`.
//!
//! The retained triplet only closes on itself once the exterior neighbours
//! `u_{j−2}` and `u_{j+2}` are expressed through retained quantities:
//!
//! * [`ClosureSpec::TripletPeriodic`] identifies `j−2 ≡ j+1` and `j+2 ≡ j−1`,
//!   turning the triplet into a 3-site ring. For a 3-site periodic grid this
//!   is exact and the marginal equation is the full Liouville equation.
//! * [`ClosureSpec::MeanField`] replaces each exterior neighbour with the mean
//!   of a supplied one-point marginal.

use crate::burgers::DynamicsSpec;
use crate::error::{Error, Result};
use crate::liouville::{
    assemble_operator, evolve, Evolution, FluxOperator, Method, PhaseVelocityField,
};
use crate::phase_space::{DensityField, Observable, ObservableSpec, PhaseGrid};

#[derive(Debug, Clone, PartialEq)]
pub enum ClosureSpec {
    TripletPeriodic,
    MeanField { p1: DensityField },
}

/// Speeds `(A_u, A_v, A_w)` of the conservative 3-point equation.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveField {
    spec: DynamicsSpec,
    exterior_mean: Option<f64>,
}

impl EffectiveField {
    #[inline]
    pub fn speeds(&self, u: f64, v: f64, w: f64) -> [f64; 3] {
        let (outer_left, outer_right) = match self.exterior_mean {
            None => (w, u),
            Some(m) => (m, m),
        };
        [
            self.spec.rhs_center(outer_left, u, v),
            self.spec.rhs_center(u, v, w),
            self.spec.rhs_center(v, w, outer_right),
        ]
    }

    /// Mean used for the exterior neighbours, if any.
    pub fn exterior_mean(&self) -> Option<f64> {
        self.exterior_mean
    }

    pub fn velocity_field(&self, phase: &PhaseGrid, diffusion: f64) -> Result<PhaseVelocityField> {
        if phase.axes() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "3-point field needs 3 axes, grid has {}",
                phase.axes()
            )));
        }
        PhaseVelocityField::from_vector_fn(*phase, diffusion, |x, out| {
            out.copy_from_slice(&self.speeds(x[0], x[1], x[2]));
        })
    }
}

pub fn effective_field(closure: &ClosureSpec, spec: &DynamicsSpec) -> Result<EffectiveField> {
    spec.validate()?;
    let exterior_mean = match closure {
        ClosureSpec::TripletPeriodic => None,
        ClosureSpec::MeanField { p1 } => {
            if p1.grid().axes() != 1 {
                return Err(Error::InvalidField(format!(
                    "mean-field closure needs a 1-point marginal, got {} axes",
                    p1.grid().axes()
                )));
            }
            let z = p1.total_mass();
            if !(z > 0.0) {
                return Err(Error::EmptyDistribution);
            }
            if (z - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidField(format!(
                    "p1 is not normalized (mass {z})"
                )));
            }
            Some(
                p1.average(&ObservableSpec::normalized(Observable::AxisMean {
                    axis: 0,
                }))?,
            )
        }
    };
    Ok(EffectiveField {
        spec: spec.clone(),
        exterior_mean,
    })
}

/// Per-axis `U`, `V`, `W` flux matrices and `L = U + V + W` on a 3-axis grid.
pub fn assemble_3pt_operator(phase: &PhaseGrid, field: &EffectiveField) -> Result<FluxOperator> {
    assemble_operator(phase, &field.velocity_field(phase, 0.0)?)
}

pub fn evolve_3pt(
    p0: &DensityField,
    op: &FluxOperator,
    dt: f64,
    steps: usize,
    method: Method,
) -> Result<Evolution> {
    if op.grid().axes() != 3 {
        return Err(Error::DimensionMismatch(
            "3-point evolution needs a 3-axis operator".into(),
        ));
    }
    evolve(p0, op, dt, steps, method)
}
