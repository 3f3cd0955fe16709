//! Semi-discrete viscous Burgers right-hand sides on a 1-D site grid.
//!
//! Two schemes are provided. [`Scheme::PaperMatrix`] evaluates the state-dependent
//! tridiagonal rows `B_{j,k}(u_j)`:
//!
//! ```text
//! B_{j,j-1} = ν − u_j/4,   B_{j,j} = −2ν − u_j/4,   B_{j,j+1} = ν + u_j/4
//! ```
//!
//! which does not annihilate constant states (each row sums to `−u_j/4`).
//! [`Scheme::ConsistentCentral`] is the usual second-order central scheme
//! `−u_j (u_{j+1} − u_{j−1})/2 + ν (u_{j+1} − 2u_j + u_{j−1})` and is the one
//! to use whenever results are compared against Burgers physics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PaperMatrix,
    #[default]
    ConsistentCentral,
}

/// 1-D physical grid with unit spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialGrid {
    sites: usize,
    periodic: bool,
}

impl SpatialGrid {
    pub fn new(sites: usize, periodic: bool) -> Result<Self> {
        if sites < 2 {
            return Err(invalid("sites", format!("N = {sites}, need N >= 2")));
        }
        Ok(Self { sites, periodic })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn dx(&self) -> f64 {
        1.0
    }

    /// Left and right neighbour indices of site `j`. Non-periodic ends reuse
    /// the boundary site (zero-gradient ghost).
    pub fn neighbours(&self, j: usize) -> (usize, usize) {
        let n = self.sites;
        if self.periodic {
            ((j + n - 1) % n, (j + 1) % n)
        } else {
            (j.saturating_sub(1), (j + 1).min(n - 1))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    #[serde(default)]
    pub scheme: Scheme,
    pub nu: f64,
    /// Parameter perturbations; reserved, ignored by both deterministic schemes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_params: Option<Vec<f64>>,
}

impl DynamicsSpec {
    pub fn new(scheme: Scheme, nu: f64) -> Result<Self> {
        let spec = Self {
            scheme,
            nu,
            noise_params: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(invalid(
                "nu",
                format!("{} is not a finite value >= 0", self.nu),
            ));
        }
        Ok(())
    }

    /// Right-hand side of one site given its left, own and right values.
    #[inline]
    pub fn rhs_center(&self, left: f64, center: f64, right: f64) -> f64 {
        site_rhs(self.scheme, self.nu, left, center, right, 1.0)
    }
}

/// One row `(B_{j,j−1}, B_{j,j}, B_{j,j+1})` of the Burgers matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersCoeffs {
    pub b_minus: f64,
    pub b_zero: f64,
    pub b_plus: f64,
}

impl BurgersCoeffs {
    pub fn apply(&self, left: f64, center: f64, right: f64) -> f64 {
        self.b_minus * left + self.b_zero * center + self.b_plus * right
    }
}

pub fn burgers_coeffs_paper(u_center: f64, nu: f64) -> BurgersCoeffs {
    let q = 0.25 * u_center;
    BurgersCoeffs {
        b_minus: nu - q,
        b_zero: -2.0 * nu - q,
        b_plus: nu + q,
    }
}

#[inline]
fn site_rhs(scheme: Scheme, nu: f64, left: f64, center: f64, right: f64, dx: f64) -> f64 {
    match scheme {
        Scheme::ConsistentCentral => {
            -center * (right - left) / (2.0 * dx) + nu * (right - 2.0 * center + left) / (dx * dx)
        }
        Scheme::PaperMatrix if dx == 1.0 => {
            burgers_coeffs_paper(center, nu).apply(left, center, right)
        }
        Scheme::PaperMatrix => {
            let q = 0.25 * center / dx;
            let d = nu / (dx * dx);
            (d - q) * left + (-2.0 * d - q) * center + (d + q) * right
        }
    }
}

/// `du/dt` for every site.
pub fn rhs(state: &[f64], spec: &DynamicsSpec, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.len()];
    rhs_into(state, spec, grid, &mut out)?;
    Ok(out)
}

pub fn rhs_into(
    state: &[f64],
    spec: &DynamicsSpec,
    grid: &SpatialGrid,
    out: &mut [f64],
) -> Result<()> {
    rhs_with_dx(state, spec, grid, 1.0, out)
}

/// Same as [`rhs`] with an explicit site spacing, for refinement studies.
pub fn rhs_with_dx(
    state: &[f64],
    spec: &DynamicsSpec,
    grid: &SpatialGrid,
    dx: f64,
    out: &mut [f64],
) -> Result<()> {
    if state.len() != grid.sites() {
        return Err(Error::LengthMismatch {
            expected: grid.sites(),
            actual: state.len(),
        });
    }
    if out.len() != grid.sites() {
        return Err(Error::LengthMismatch {
            expected: grid.sites(),
            actual: out.len(),
        });
    }
    for (j, slot) in out.iter_mut().enumerate() {
        let (l, r) = grid.neighbours(j);
        *slot = site_rhs(spec.scheme, spec.nu, state[l], state[j], state[r], dx);
    }
    Ok(())
}

/// Reusable buffers for classical RK4 steps on a fixed grid.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(sites: usize) -> Self {
        Self {
            k1: vec![0.0; sites],
            k2: vec![0.0; sites],
            k3: vec![0.0; sites],
            k4: vec![0.0; sites],
            tmp: vec![0.0; sites],
        }
    }

    /// Advance `state` in place by one step of size `dt`.
    pub fn step(
        &mut self,
        state: &mut [f64],
        spec: &DynamicsSpec,
        grid: &SpatialGrid,
        dt: f64,
    ) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("{dt} is not positive")));
        }
        let n = state.len();
        rhs_into(state, spec, grid, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * dt * self.k1[i];
        }
        rhs_into(&self.tmp, spec, grid, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * dt * self.k2[i];
        }
        rhs_into(&self.tmp, spec, grid, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = state[i] + dt * self.k3[i];
        }
        rhs_into(&self.tmp, spec, grid, &mut self.k4)?;
        for i in 0..n {
            state[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        if let Some(site) = state.iter().position(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                site,
                realization: None,
            });
        }
        Ok(())
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn step_rk4(
    state: &[f64],
    spec: &DynamicsSpec,
    grid: &SpatialGrid,
    dt: f64,
) -> Result<Vec<f64>> {
    let mut next = state.to_vec();
    Rk4::new(state.len()).step(&mut next, spec, grid, dt)?;
    Ok(next)
}
