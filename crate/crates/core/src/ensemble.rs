//! Monte-Carlo ensemble oracle.
//!
//! Realization `r` draws its perturbation from a ChaCha8 stream selected by
//! `(seed, r)`, so the sampled ensemble does not depend on how realizations
//! are scheduled across threads. Histograms are accumulated as integer counts
//! and normalized once, which keeps them bit-identical for any worker count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burgers::{DynamicsSpec, Rk4, Scheme, SpatialGrid};
use crate::error::{invalid, Error, Result};
use crate::phase_space::{DensityField, PhaseGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Perturbation {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl Perturbation {
    fn width(&self) -> f64 {
        match *self {
            Perturbation::Gaussian { sigma } => sigma,
            Perturbation::Uniform { half_width } => half_width,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Perturbation::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Perturbation::Uniform { half_width } => rng.gen_range(-half_width..half_width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEnsembleSpec {
    pub base_profile: Vec<f64>,
    pub perturbation: Perturbation,
    pub count: usize,
    pub seed: u64,
}

impl InitialEnsembleSpec {
    /// A perturbation is degenerate when it cannot move any base value in
    /// double precision.
    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if self.base_profile.len() != grid.sites() {
            return Err(Error::LengthMismatch {
                expected: grid.sites(),
                actual: self.base_profile.len(),
            });
        }
        if self.base_profile.iter().any(|v| !v.is_finite()) {
            return Err(invalid("base_profile", "non-finite entry"));
        }
        if self.count == 0 {
            return Err(invalid("count", "need at least one realization"));
        }
        let w = self.perturbation.width();
        let scale = self.base_profile.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if !(w.is_finite() && w > f64::EPSILON * scale) {
            return Err(Error::DegeneratePerturbation(format!(
                "width {w:e} cannot perturb a profile of magnitude {scale}"
            )));
        }
        Ok(())
    }
}

fn substream(seed: u64, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization as u64);
    rng
}

/// `R × N` perturbed initial states.
pub fn sample_initial_conditions(
    spec: &InitialEnsembleSpec,
    grid: &SpatialGrid,
) -> Result<Vec<Vec<f64>>> {
    spec.validate(grid)?;
    Ok((0..spec.count)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(spec.seed, r);
            spec.base_profile
                .iter()
                .map(|b| b + spec.perturbation.draw(&mut rng))
                .collect()
        })
        .collect())
}

/// Trajectories stored as `realization × slice × site`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    realizations: usize,
    slices: usize,
    sites: usize,
    states: Vec<f64>,
    /// Time between stored slices.
    pub dt: f64,
    pub seed: Option<u64>,
    pub scheme: Scheme,
    pub nu: f64,
}

impl TrajectoryBundle {
    pub fn realizations(&self) -> usize {
        self.realizations
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn state(&self, realization: usize, slice: usize) -> &[f64] {
        let start = (realization * self.slices + slice) * self.sites;
        &self.states[start..start + self.sites]
    }

    pub fn final_time(&self) -> f64 {
        (self.slices - 1) as f64 * self.dt
    }

    /// Sample statistics of each site and of `Σ_j u_j²` at one slice.
    pub fn moments(&self, slice: usize) -> SampleMoments {
        let r = self.realizations as f64;
        let mut mean = vec![0.0; self.sites];
        let mut kinetic = 0.0;
        for k in 0..self.realizations {
            let s = self.state(k, slice);
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
            kinetic += s.iter().map(|v| v * v).sum::<f64>();
        }
        mean.iter_mut().for_each(|m| *m /= r);
        kinetic /= r;
        let mut var = vec![0.0; self.sites];
        let mut kinetic_var = 0.0;
        for k in 0..self.realizations {
            let s = self.state(k, slice);
            for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
            let e = s.iter().map(|v| v * v).sum::<f64>() - kinetic;
            kinetic_var += e * e;
        }
        let denom = (r - 1.0).max(1.0);
        var.iter_mut().for_each(|v| *v /= denom);
        kinetic_var /= denom;
        SampleMoments {
            standard_error: var.iter().map(|v| (v / r).sqrt()).collect(),
            mean,
            variance: var,
            kinetic_energy: kinetic,
            kinetic_energy_standard_error: (kinetic_var / r).sqrt(),
        }
    }

    /// CSV with columns `t,u_0..u_{N-1}`; rows grouped by realization.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.sites).map(|j| format!("u_{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for r in 0..self.realizations {
            for s in 0..self.slices {
                let row: Vec<String> = std::iter::once(s as f64 * self.dt)
                    .chain(self.state(r, s).iter().copied())
                    .map(crate::fmt_f64)
                    .collect();
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMoments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub kinetic_energy: f64,
    pub kinetic_energy_standard_error: f64,
}

/// Integrate every realization for `steps` RK4 steps and keep all slices.
pub fn run_ensemble(
    init: &[Vec<f64>],
    spec: &DynamicsSpec,
    grid: &SpatialGrid,
    dt: f64,
    steps: usize,
) -> Result<TrajectoryBundle> {
    run_ensemble_strided(init, spec, grid, dt, steps, 1)
}

/// Like [`run_ensemble`] but keeps only every `save_every`-th slice (slice 0
/// and the final state are always kept). `steps` must be a multiple of
/// `save_every`.
pub fn run_ensemble_strided(
    init: &[Vec<f64>],
    spec: &DynamicsSpec,
    grid: &SpatialGrid,
    dt: f64,
    steps: usize,
    save_every: usize,
) -> Result<TrajectoryBundle> {
    spec.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("{dt} is not positive")));
    }
    if steps == 0 {
        return Err(invalid("steps", "need at least one step"));
    }
    if save_every == 0 || !steps.is_multiple_of(save_every) {
        return Err(invalid(
            "save_every",
            format!("{save_every} does not divide {steps} steps"),
        ));
    }
    if init.is_empty() {
        return Err(invalid("init", "empty ensemble"));
    }
    let sites = grid.sites();
    if let Some(row) = init.iter().find(|row| row.len() != sites) {
        return Err(Error::LengthMismatch {
            expected: sites,
            actual: row.len(),
        });
    }
    let slices = steps / save_every + 1;
    let runs: Vec<Result<Vec<f64>>> = init
        .par_iter()
        .enumerate()
        .map(|(r, row)| {
            let mut out = Vec::with_capacity(slices * sites);
            out.extend_from_slice(row);
            let mut state = row.clone();
            let mut rk = Rk4::new(sites);
            for step in 1..=steps {
                rk.step(&mut state, spec, grid, dt).map_err(|e| match e {
                    Error::IntegrationFailure { site, .. } => Error::IntegrationFailure {
                        site,
                        realization: Some(r),
                    },
                    other => other,
                })?;
                if step % save_every == 0 {
                    out.extend_from_slice(&state);
                }
            }
            Ok(out)
        })
        .collect();
    let mut states = Vec::with_capacity(init.len() * slices * sites);
    for run in runs {
        states.extend(run?);
    }
    Ok(TrajectoryBundle {
        realizations: init.len(),
        slices,
        sites,
        states,
        dt: dt * save_every as f64,
        seed: None,
        scheme: spec.scheme,
        nu: spec.nu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum HistogramMode {
    /// Ensemble histogram at one stored slice.
    Snapshot { t_index: usize },
    /// Fraction of `[0, T]` each trajectory spends in a cell, averaged over
    /// realizations.
    TimeOccupation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub field: DensityField,
    /// Mass that fell outside the phase grid.
    pub out_of_range: f64,
}

/// Histogram of `(u_{axes[0]}, u_{axes[1]}, ...)` on `phase`.
pub fn empirical_pdf(
    bundle: &TrajectoryBundle,
    phase: &PhaseGrid,
    axes: &[usize],
    mode: HistogramMode,
) -> Result<Histogram> {
    if axes.len() != phase.axes() {
        return Err(Error::InvalidAxes(format!(
            "{} site indices for {} phase axes",
            axes.len(),
            phase.axes()
        )));
    }
    if let Some(&j) = axes.iter().find(|&&j| j >= bundle.sites) {
        return Err(Error::InvalidAxes(format!(
            "site {j} outside {} sites",
            bundle.sites
        )));
    }
    let slice_range = match mode {
        HistogramMode::Snapshot { t_index } => {
            if t_index >= bundle.slices {
                return Err(invalid(
                    "t_index",
                    format!("{t_index} outside {} slices", bundle.slices),
                ));
            }
            t_index..t_index + 1
        }
        // left-endpoint rule: slice m stands for [t_m, t_{m+1})
        HistogramMode::TimeOccupation if bundle.slices > 1 => 0..bundle.slices - 1,
        HistogramMode::TimeOccupation => 0..1,
    };
    let cells = phase.cell_count();
    let (counts, missed) = (0..bundle.realizations)
        .into_par_iter()
        .fold(
            || (vec![0u64; cells], 0u64),
            |(mut counts, mut missed), r| {
                let mut multi = vec![0usize; axes.len()];
                for s in slice_range.clone() {
                    let state = bundle.state(r, s);
                    let hit = axes
                        .iter()
                        .zip(multi.iter_mut())
                        .all(|(&j, slot)| phase.level_of(state[j]).map(|i| *slot = i).is_some());
                    if hit {
                        counts[phase.ravel(&multi)] += 1;
                    } else {
                        missed += 1;
                    }
                }
                (counts, missed)
            },
        )
        .reduce(
            || (vec![0u64; cells], 0u64),
            |(mut a, ma), (b, mb)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, ma + mb)
            },
        );
    let total = (bundle.realizations * slice_range.len()) as f64;
    let values = counts.iter().map(|&c| c as f64 / total).collect();
    Ok(Histogram {
        field: DensityField::new(*phase, values)?,
        out_of_range: missed as f64 / total,
    })
}
