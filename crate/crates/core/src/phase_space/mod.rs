//! Tensor-product phase-space grids and the discrete PDFs that live on them.
//!
//! A [`DensityField`] stores probability *mass per cell*: every value already
//! includes the `du^M` cell volume. Marginals are therefore plain sums over the
//! dropped axes and observables are midpoint sums over cell centers.
//!
//! Flattening is row-major with axis 0 slowest. Operator assembly, histograms
//! and the binary container all rely on this order.

mod io;

pub use io::{BINARY_MAGIC, BINARY_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values below zero but above this bound are accepted as floating-point
/// cancellation residue from explicit transport steps.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Uniform grid over `[u_min, u_max)^M` with `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    axes: usize,
    levels: usize,
    u_min: f64,
    u_max: f64,
}

impl PhaseGrid {
    pub fn new(axes: usize, levels: usize, u_min: f64, u_max: f64) -> Result<Self> {
        if axes == 0 {
            return Err(Error::InvalidGrid("at least one axis is required".into()));
        }
        if axes > u16::MAX as usize {
            return Err(Error::InvalidGrid(format!(
                "{axes} axes exceed the supported maximum"
            )));
        }
        if levels < 2 {
            return Err(Error::InvalidGrid(format!("n = {levels}, need n >= 2")));
        }
        if levels > u32::MAX as usize {
            return Err(Error::InvalidGrid(format!(
                "n = {levels} does not fit in 32 bits"
            )));
        }
        if !(u_min.is_finite() && u_max.is_finite()) || u_max <= u_min {
            return Err(Error::InvalidGrid(format!(
                "non-positive extent [{u_min}, {u_max}]"
            )));
        }
        let exp = u32::try_from(axes).map_err(|_| Error::InvalidGrid("too many axes".into()))?;
        if levels.checked_pow(exp).is_none() {
            return Err(Error::InvalidGrid(format!(
                "{levels}^{axes} cells overflow"
            )));
        }
        Ok(Self {
            axes,
            levels,
            u_min,
            u_max,
        })
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn du(&self) -> f64 {
        (self.u_max - self.u_min) / self.levels as f64
    }

    /// Total number of cells, `n^M`.
    pub fn cell_count(&self) -> usize {
        self.levels.pow(self.axes as u32)
    }

    /// Coordinate of the center of level `i` on any axis.
    pub fn center(&self, i: usize) -> f64 {
        self.u_min + (i as f64 + 0.5) * self.du()
    }

    /// Cell centers along one axis.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.levels).map(|i| self.center(i)).collect()
    }

    /// Level containing `u`, or `None` when `u` falls outside `[u_min, u_max)`.
    pub fn level_of(&self, u: f64) -> Option<usize> {
        if !(u >= self.u_min && u < self.u_max) {
            return None;
        }
        let i = ((u - self.u_min) / self.du()).floor() as usize;
        Some(i.min(self.levels - 1))
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.levels.pow((self.axes - 1 - axis) as u32)
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.axes);
        multi.iter().fold(0, |acc, &i| acc * self.levels + i)
    }

    pub fn unravel(&self, mut flat: usize, multi: &mut [usize]) {
        debug_assert_eq!(multi.len(), self.axes);
        for slot in multi.iter_mut().rev() {
            *slot = flat % self.levels;
            flat /= self.levels;
        }
    }

    /// Cell-center coordinates of a flat index.
    pub fn cell_center(&self, flat: usize, point: &mut [f64]) {
        let mut rem = flat;
        for slot in point.iter_mut().rev() {
            *slot = self.center(rem % self.levels);
            rem /= self.levels;
        }
    }

    /// True when the cell touches the boundary of the phase domain.
    pub fn is_boundary_cell(&self, flat: usize) -> bool {
        let mut rem = flat;
        for _ in 0..self.axes {
            let i = rem % self.levels;
            if i == 0 || i == self.levels - 1 {
                return true;
            }
            rem /= self.levels;
        }
        false
    }

    /// Same grid restricted to `axes` axes.
    pub fn with_axes(&self, axes: usize) -> Result<Self> {
        Self::new(axes, self.levels, self.u_min, self.u_max)
    }
}

/// Build a grid with `M` axes and `n` levels per axis on `[u_min, u_max)`.
pub fn build_phase_grid(axes: usize, levels: usize, u_min: f64, u_max: f64) -> Result<PhaseGrid> {
    PhaseGrid::new(axes, levels, u_min, u_max)
}

/// Discrete PDF: nonnegative probability mass per phase-space cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: PhaseGrid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: PhaseGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::LengthMismatch {
                expected: grid.cell_count(),
                actual: values.len(),
            });
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -NEGATIVE_TOLERANCE)
        {
            return Err(Error::InvalidField(format!("cell {i} holds {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        Self {
            values: vec![0.0; grid.cell_count()],
            grid,
        }
    }

    pub fn uniform(grid: PhaseGrid) -> Self {
        let cells = grid.cell_count();
        Self {
            values: vec![1.0 / cells as f64; cells],
            grid,
        }
    }

    /// Single occupied cell holding `mass`.
    pub fn delta(grid: PhaseGrid, cell: usize, mass: f64) -> Result<Self> {
        let mut values = vec![0.0; grid.cell_count()];
        let slot = values.get_mut(cell).ok_or_else(|| {
            Error::InvalidField(format!("cell {cell} outside {} cells", grid.cell_count()))
        })?;
        *slot = mass;
        Self::new(grid, values)
    }

    /// Cell masses from a function of the cell-center coordinates.
    pub fn from_fn(grid: PhaseGrid, mut mass: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut point = vec![0.0; grid.axes()];
        let values = (0..grid.cell_count())
            .map(|flat| {
                grid.cell_center(flat, &mut point);
                mass(&point)
            })
            .collect();
        Self::new(grid, values)
    }

    /// Product of independent normals, integrated exactly over each cell and
    /// renormalized to unit mass on the truncated domain.
    pub fn gaussian_product(grid: PhaseGrid, means: &[f64], sigmas: &[f64]) -> Result<Self> {
        if means.len() != grid.axes() || sigmas.len() != grid.axes() {
            return Err(Error::LengthMismatch {
                expected: grid.axes(),
                actual: means.len().min(sigmas.len()),
            });
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(crate::error::invalid(
                "sigma",
                format!("{s} is not positive"),
            ));
        }
        let du = grid.du();
        let per_axis: Vec<Vec<f64>> = means
            .iter()
            .zip(sigmas)
            .map(|(&mu, &sigma)| {
                (0..grid.levels())
                    .map(|i| {
                        let lo = grid.u_min() + i as f64 * du;
                        normal_cdf((lo + du - mu) / sigma) - normal_cdf((lo - mu) / sigma)
                    })
                    .collect()
            })
            .collect();
        let mut multi = vec![0usize; grid.axes()];
        let mut values: Vec<f64> = (0..grid.cell_count())
            .map(|flat| {
                grid.unravel(flat, &mut multi);
                multi.iter().zip(&per_axis).map(|(&i, w)| w[i]).product()
            })
            .collect();
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `Z = Σ p`, summed in flat order.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mass carried by cells on the phase-domain boundary.
    pub fn boundary_mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_boundary_cell(*i))
            .map(|(_, v)| v)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Sum out every axis not listed in `keep_axes`.
    pub fn marginalize(&self, keep_axes: &[usize]) -> Result<DensityField> {
        marginalize(self, keep_axes)
    }

    pub fn average(&self, obs: &ObservableSpec) -> Result<f64> {
        average(self, obs)
    }

    /// Relabel axes: output axis `k` is input axis `order[k]`.
    pub fn permute_axes(&self, order: &[usize]) -> Result<DensityField> {
        let m = self.grid.axes();
        let mut seen = vec![false; m];
        if order.len() != m
            || order
                .iter()
                .any(|&a| a >= m || std::mem::replace(&mut seen[a], true))
        {
            return Err(Error::InvalidAxes(format!(
                "{order:?} is not a permutation of 0..{m}"
            )));
        }
        let mut values = vec![0.0; self.values.len()];
        let mut src = vec![0usize; m];
        let mut dst = vec![0usize; m];
        for (flat, &v) in self.values.iter().enumerate() {
            self.grid.unravel(flat, &mut src);
            for (k, &a) in order.iter().enumerate() {
                dst[k] = src[a];
            }
            values[self.grid.ravel(&dst)] = v;
        }
        Ok(DensityField {
            grid: self.grid,
            values,
        })
    }
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `Z(t)`: total probability mass of the field.
pub fn total_mass(p: &DensityField) -> f64 {
    p.total_mass()
}

/// Discrete marginal over the retained axes.
///
/// `keep_axes` must be nonempty and strictly increasing. Input cells are visited
/// in flat order, so the summation order is fixed.
pub fn marginalize(p: &DensityField, keep_axes: &[usize]) -> Result<DensityField> {
    let m = p.grid.axes();
    if keep_axes.is_empty() {
        return Err(Error::InvalidAxes("keep_axes is empty".into()));
    }
    if keep_axes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidAxes(format!(
            "{keep_axes:?} is not strictly increasing"
        )));
    }
    if let Some(&a) = keep_axes.iter().find(|&&a| a >= m) {
        return Err(Error::InvalidAxes(format!(
            "axis {a} out of range for {m} axes"
        )));
    }
    let out_grid = p.grid.with_axes(keep_axes.len())?;
    if keep_axes.len() == m {
        return Ok(DensityField {
            grid: out_grid,
            values: p.values.clone(),
        });
    }
    let mut out = vec![0.0; out_grid.cell_count()];
    let mut multi = vec![0usize; m];
    for (flat, &v) in p.values.iter().enumerate() {
        p.grid.unravel(flat, &mut multi);
        let j = keep_axes
            .iter()
            .fold(0, |acc, &a| acc * p.grid.levels() + multi[a]);
        out[j] += v;
    }
    Ok(DensityField {
        grid: out_grid,
        values: out,
    })
}

/// Observable evaluated at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Observable {
    AxisMean {
        axis: usize,
    },
    AxisMoment {
        axis: usize,
        order: u32,
    },
    /// `K = Σ_axes u_axis²`.
    KineticEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub observable: Observable,
    /// Divide by `Z` when set.
    pub normalize: bool,
}

impl ObservableSpec {
    pub fn normalized(observable: Observable) -> Self {
        Self {
            observable,
            normalize: true,
        }
    }

    pub fn raw(observable: Observable) -> Self {
        Self {
            observable,
            normalize: false,
        }
    }
}

/// `Σ A(center)·p(cell)`, optionally divided by `Z`.
pub fn average(p: &DensityField, obs: &ObservableSpec) -> Result<f64> {
    let m = p.grid.axes();
    let (axis, order) = match obs.observable {
        Observable::AxisMean { axis } => (Some(axis), 1),
        Observable::AxisMoment { axis, order } => {
            if order == 0 {
                return Err(crate::error::invalid("order", "moment order must be >= 1"));
            }
            (Some(axis), order)
        }
        Observable::KineticEnergy => (None, 2),
    };
    if let Some(a) = axis {
        if a >= m {
            return Err(Error::InvalidAxes(format!(
                "axis {a} out of range for {m} axes"
            )));
        }
    }
    let centers = p.grid.centers();
    let powers: Vec<f64> = centers.iter().map(|c| c.powi(order as i32)).collect();
    let mut multi = vec![0usize; m];
    let mut sum = 0.0;
    for (flat, &v) in p.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        p.grid.unravel(flat, &mut multi);
        let a = match axis {
            Some(a) => powers[multi[a]],
            None => multi.iter().map(|&i| powers[i]).sum(),
        };
        sum += a * v;
    }
    if obs.normalize {
        let z = p.total_mass();
        if !(z > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        Ok(sum / z)
    } else {
        Ok(sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize, n: usize) -> PhaseGrid {
        PhaseGrid::new(m, n, -3.0, 3.0).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = build_phase_grid(3, 6, -3.0, 3.0).unwrap();
        assert_eq!(g.cell_count(), 216);
        assert_eq!(g.du(), 1.0);
        let g = build_phase_grid(1, 2, 0.0, 1.0).unwrap();
        assert_eq!(g.cell_count(), 2);
        assert_eq!(g.du(), 0.5);
        let g = build_phase_grid(3, 64, -2.0, 2.0).unwrap();
        assert_eq!(g.cell_count(), 262_144);
        assert_eq!(g.du(), 0.0625);
        assert_eq!(g.center(0), -2.0 + 0.03125);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_phase_grid(1, 1, 0.0, 1.0).is_err());
        assert!(build_phase_grid(1, 4, 1.0, 1.0).is_err());
        assert!(build_phase_grid(1, 4, 2.0, 1.0).is_err());
        assert!(build_phase_grid(0, 4, 0.0, 1.0).is_err());
        assert!(build_phase_grid(1, 4, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn ravel_roundtrip_axis0_slowest() {
        let g = grid(3, 6);
        let mut m = [0; 3];
        g.unravel(6 * 6 * 4 + 6 * 1 + 3, &mut m);
        assert_eq!(m, [4, 1, 3]);
        assert_eq!(g.ravel(&m), 6 * 6 * 4 + 6 + 3);
        assert_eq!(g.stride(0), 36);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn level_lookup() {
        let g = grid(1, 6);
        assert_eq!(g.level_of(-3.0), Some(0));
        assert_eq!(g.level_of(2.999), Some(5));
        assert_eq!(g.level_of(3.0), None);
        assert_eq!(g.level_of(-3.0001), None);
        assert_eq!(g.level_of(f64::NAN), None);
    }

    #[test]
    fn mass_examples() {
        let g = grid(3, 6);
        let p = DensityField::new(g, vec![1.0 / 216.0; 216]).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-14);
        assert_eq!(DensityField::zeros(g).total_mass(), 0.0);
        assert_eq!(DensityField::delta(g, 17, 0.7).unwrap().total_mass(), 0.7);
    }

    #[test]
    fn field_rejects_negative_and_nan() {
        let g = grid(1, 2);
        assert!(DensityField::new(g, vec![0.5, -0.1]).is_err());
        assert!(DensityField::new(g, vec![0.5, f64::NAN]).is_err());
        assert!(DensityField::new(g, vec![0.5]).is_err());
    }

    #[test]
    fn marginal_of_product_is_factor() {
        let g = grid(2, 6);
        let f = [0.1, 0.2, 0.3, 0.2, 0.1, 0.1];
        let h = [0.05, 0.05, 0.4, 0.4, 0.05, 0.05];
        let p = DensityField::from_fn(g, |x| {
            let i = g.level_of(x[0]).unwrap();
            let j = g.level_of(x[1]).unwrap();
            f[i] * h[j]
        })
        .unwrap();
        let m0 = p.marginalize(&[0]).unwrap();
        for (a, b) in m0.values().iter().zip(f) {
            assert!((a - b).abs() < 1e-15);
        }
        let m1 = p.marginalize(&[1]).unwrap();
        for (a, b) in m1.values().iter().zip(h) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p.marginalize(&[0, 1]).unwrap(), p);
    }

    #[test]
    fn marginalize_rejects_bad_axes() {
        let p = DensityField::uniform(grid(3, 2));
        assert!(p.marginalize(&[]).is_err());
        assert!(p.marginalize(&[3]).is_err());
        assert!(p.marginalize(&[1, 0]).is_err());
        assert!(p.marginalize(&[1, 1]).is_err());
    }

    #[test]
    fn average_examples() {
        let g = grid(1, 6);
        let p = DensityField::new(g, vec![0.1, 0.15, 0.25, 0.25, 0.15, 0.1]).unwrap();
        let mean = p
            .average(&ObservableSpec::normalized(Observable::AxisMean {
                axis: 0,
            }))
            .unwrap();
        assert!(mean.abs() < 1e-15);

        let d = DensityField::delta(g, 4, 1.0).unwrap();
        let c = g.center(4);
        let m2 = d
            .average(&ObservableSpec::normalized(Observable::AxisMoment {
                axis: 0,
                order: 2,
            }))
            .unwrap();
        assert_eq!(m2, c * c);

        let empty = DensityField::zeros(g);
        assert_eq!(
            empty.average(&ObservableSpec::normalized(Observable::KineticEnergy)),
            Err(Error::EmptyDistribution)
        );
        assert_eq!(
            empty
                .average(&ObservableSpec::raw(Observable::KineticEnergy))
                .unwrap(),
            0.0
        );
        assert!(p
            .average(&ObservableSpec::raw(Observable::AxisMoment {
                axis: 0,
                order: 0
            }))
            .is_err());
    }

    #[test]
    fn gaussian_product_is_normalized() {
        let g = PhaseGrid::new(2, 32, -2.0, 2.0).unwrap();
        let p = DensityField::gaussian_product(g, &[0.3, -0.1], &[0.4, 0.2]).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-14);
        let m = p
            .average(&ObservableSpec::normalized(Observable::AxisMean {
                axis: 1,
            }))
            .unwrap();
        assert!((m + 0.1).abs() < 1e-3);
    }

    #[test]
    fn permute_axes_cycles() {
        let g = grid(3, 3);
        let p = DensityField::delta(g, g.ravel(&[0, 1, 2]), 1.0).unwrap();
        let q = p.permute_axes(&[1, 2, 0]).unwrap();
        assert_eq!(q.values()[g.ravel(&[1, 2, 0])], 1.0);
        assert!(p.permute_axes(&[0, 0, 1]).is_err());
    }
}
