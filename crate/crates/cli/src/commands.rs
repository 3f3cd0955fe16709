use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use liouville_core::causal::{
    build_causal_system, forward_solve_raw, residual, FULL_ASSEMBLY_LIMIT,
};
use liouville_core::ensemble::{
    empirical_pdf, run_ensemble_strided, sample_initial_conditions, HistogramMode,
    InitialEnsembleSpec,
};
use liouville_core::liouville::{assemble_operator, evolve_observed, max_stable_dt, Evolution};
use liouville_core::marginal::{assemble_3pt_operator, effective_field, ClosureSpec};
use liouville_core::{
    DensityField, DynamicsSpec, FluxOperator, Observable, ObservableSpec, PhaseGrid,
    PhaseVelocityField, SpatialGrid,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    CausalConfig, ClosureConfig, CompareConfig, EnsembleConfig, InitialConfig, Invocation,
    LiouvilleConfig, MarchConfig, MarginalConfig, PhaseConfig, SystemConfig,
};
use crate::error::{CliError, CliResult};

/// Fields up to this many cells are also written as JSON.
const JSON_EXPORT_CELLS: usize = 4096;
/// Largest phase grid the transport commands will allocate.
const MAX_CELLS: usize = 1 << 24;
const MAX_AXES: usize = 4;

pub const VERSION: &str = env!("LIOU_VERSION");

/// Print to stdout, ignoring a closed pipe.
pub fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a Value,
    seed: Option<u64>,
    threads: usize,
    wall_time_seconds: f64,
    artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    run: Value,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::config("bad_out", format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::config("bad_out", format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write_field(&mut self, stem: &str, field: &DensityField) -> CliResult<()> {
        self.write(&format!("{stem}.bin"), &field.to_binary())?;
        if field.values().len() <= JSON_EXPORT_CELLS {
            let mut text = field.to_json()?;
            text.push('\n');
            self.write(&format!("{stem}.json"), text.as_bytes())?;
        }
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        inv: &Invocation,
        seed: Option<u64>,
        start: Instant,
        run: Value,
    ) -> CliResult<()> {
        let mut artifacts = self.written.clone();
        artifacts.push("manifest.json".into());
        let manifest = Manifest {
            command,
            version: VERSION,
            config: &inv.config,
            seed,
            threads: rayon::current_num_threads(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
            artifacts,
            run,
        };
        self.write_json("manifest.json", &manifest)
    }
}

fn phase_grid(axes: usize, cfg: &PhaseConfig) -> CliResult<PhaseGrid> {
    Ok(PhaseGrid::new(axes, cfg.n, cfg.u_min, cfg.u_max)?)
}

fn check_dt(dt: f64) -> CliResult<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::config(
            "bad_dt",
            format!("dt = {dt} must be positive"),
        ));
    }
    Ok(())
}

pub fn read_field(path: &Path) -> CliResult<DensityField> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::config("io_error", format!("{}: {e}", path.display())))?;
    let field = if path.extension().is_some_and(|e| e == "json") {
        let text = String::from_utf8(bytes)
            .map_err(|e| CliError::mismatch("bad_artifact", e.to_string()))?;
        DensityField::from_json(&text)?
    } else {
        DensityField::read_binary(&bytes[..])?
    };
    Ok(field)
}

pub fn ensemble(inv: &Invocation) -> CliResult<()> {
    let start = Instant::now();
    let cfg: EnsembleConfig = inv.typed()?;
    check_dt(cfg.dt)?;
    if cfg.steps == 0 {
        return Err(CliError::config("bad_steps", "steps must be >= 1"));
    }
    let grid = SpatialGrid::new(cfg.base_profile.len(), cfg.periodic)?;
    let spec = DynamicsSpec::new(cfg.scheme, cfg.nu)?;
    let axes = cfg
        .axes
        .clone()
        .unwrap_or_else(|| (0..grid.sites()).collect());
    let phase = phase_grid(axes.len(), &cfg.phase)?;
    let init_spec = InitialEnsembleSpec {
        base_profile: cfg.base_profile.clone(),
        perturbation: cfg.perturbation,
        count: cfg.count,
        seed: cfg.seed,
    };
    let init = sample_initial_conditions(&init_spec, &grid)?;
    let mut bundle = run_ensemble_strided(&init, &spec, &grid, cfg.dt, cfg.steps, cfg.save_every)?;
    bundle.seed = Some(cfg.seed);

    let mode = cfg.histogram.unwrap_or(HistogramMode::Snapshot {
        t_index: bundle.slices() - 1,
    });
    let hist = empirical_pdf(&bundle, &phase, &axes, mode)?;
    let moment_slice = match mode {
        HistogramMode::Snapshot { t_index } => t_index,
        HistogramMode::TimeOccupation => bundle.slices() - 1,
    };
    let moments = bundle.moments(moment_slice);

    let mut out = Artifacts::new(&cfg.out)?;
    out.write_field("histogram", &hist.field)?;
    out.write_json(
        "oracle_moments.json",
        &json!({
            "slice": moment_slice,
            "time": moment_slice as f64 * bundle.dt,
            "histogram_axes": axes,
            "histogram_mode": mode,
            "histogram_mass": hist.field.total_mass(),
            "out_of_range": hist.out_of_range,
            "moments": moments,
        }),
    )?;
    if cfg.export_csv {
        let mut buf = Vec::new();
        bundle.write_csv(&mut buf)?;
        out.write("trajectories.csv", &buf)?;
    }
    out.finish(
        "ensemble",
        inv,
        Some(cfg.seed),
        start,
        json!({ "slices": bundle.slices(), "slice_dt": bundle.dt }),
    )
}

struct Schedule {
    dt: f64,
    steps: usize,
    dt_max: f64,
}

fn schedule(
    march: &MarchConfig,
    phase: &PhaseGrid,
    vel: &PhaseVelocityField,
    fixed_steps: Option<usize>,
) -> CliResult<Schedule> {
    let dt_max = max_stable_dt(phase, vel, march.cfl)?;
    if let Some(dt) = march.dt {
        check_dt(dt)?;
    }
    if let Some(t) = march.t_end {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::config(
                "bad_t_end",
                format!("t_end = {t} must be positive"),
            ));
        }
    }
    let base = match march.dt {
        Some(dt) => dt,
        None if dt_max.is_finite() => dt_max,
        None => {
            return Err(CliError::config(
                "bad_dt",
                "static field: dt must be given explicitly",
            ))
        }
    };
    let (dt, steps) = match (fixed_steps.or(march.steps), march.t_end) {
        (Some(steps), None) => (base, steps),
        (steps, Some(t_end)) => {
            let steps = steps.unwrap_or_else(|| (t_end / base).ceil().max(1.0) as usize);
            (t_end / steps as f64, steps)
        }
        (None, None) => return Err(CliError::config("bad_steps", "give steps or t_end")),
    };
    if steps == 0 {
        return Err(CliError::config("bad_steps", "steps must be >= 1"));
    }
    Ok(Schedule { dt, steps, dt_max })
}

fn initial_field(init: &InitialConfig, phase: &PhaseGrid) -> CliResult<DensityField> {
    match init {
        InitialConfig::Gaussian { mean, sigma } => {
            Ok(DensityField::gaussian_product(*phase, mean, sigma)?)
        }
        InitialConfig::File { path } => {
            let f = read_field(path)?;
            if f.grid() != phase {
                return Err(CliError::mismatch(
                    "grid_mismatch",
                    format!(
                        "{} does not live on the configured phase grid",
                        path.display()
                    ),
                ));
            }
            Ok(f)
        }
    }
}

fn check_size(phase: &PhaseGrid) -> CliResult<()> {
    if phase.axes() > MAX_AXES || phase.cell_count() > MAX_CELLS {
        return Err(CliError::config(
            "bad_grid",
            format!(
                "{}^{} cells exceed the supported size (<= {MAX_AXES} axes, <= {MAX_CELLS} cells)",
                phase.levels(),
                phase.axes()
            ),
        ));
    }
    Ok(())
}

fn march(
    command: &str,
    inv: &Invocation,
    cfg: &MarchConfig,
    phase: &PhaseGrid,
    vel: &PhaseVelocityField,
    op: &FluxOperator,
    start: Instant,
) -> CliResult<()> {
    let sched = schedule(cfg, phase, vel, None)?;
    let p0 = initial_field(&cfg.initial, phase)?;
    let Evolution { field, diagnostics } =
        evolve_observed(&p0, op, sched.dt, sched.steps, cfg.method, |_, _| {})?;
    let mut out = Artifacts::new(&cfg.out)?;
    out.write_field("final", &field)?;
    let mut csv = Vec::new();
    diagnostics.write_csv(&mut csv)?;
    out.write("diagnostics.csv", &csv)?;
    out.finish(
        command,
        inv,
        None,
        start,
        json!({
            "dt": sched.dt,
            "steps": sched.steps,
            "max_stable_dt": if sched.dt_max.is_finite() { json!(sched.dt_max) } else { Value::Null },
            "max_mass_drift": diagnostics.max_mass_drift(),
            "min_value": diagnostics.min_value(),
        }),
    )
}

pub fn liouville(inv: &Invocation) -> CliResult<()> {
    let start = Instant::now();
    let cfg: LiouvilleConfig = inv.typed()?;
    let vel = match &cfg.system {
        SystemConfig::Burgers {
            sites,
            periodic,
            scheme,
            nu,
        } => {
            let phase = phase_grid(*sites, &cfg.march.phase)?;
            check_size(&phase)?;
            let spec = DynamicsSpec::new(*scheme, *nu)?;
            PhaseVelocityField::burgers(
                phase,
                &spec,
                &SpatialGrid::new(*sites, *periodic)?,
                cfg.diffusion,
            )?
        }
        SystemConfig::Rotation { omega } => {
            let phase = phase_grid(2, &cfg.march.phase)?;
            check_size(&phase)?;
            PhaseVelocityField::rotation(phase, *omega)?.with_diffusion(cfg.diffusion)?
        }
        SystemConfig::Zero { axes } => {
            let phase = phase_grid(*axes, &cfg.march.phase)?;
            check_size(&phase)?;
            PhaseVelocityField::zero(phase, cfg.diffusion)?
        }
    };
    let phase = *vel.grid();
    let op = assemble_operator(&phase, &vel)?;
    march("liouville", inv, &cfg.march, &phase, &vel, &op, start)
}

fn closure(cfg: &ClosureConfig) -> CliResult<ClosureSpec> {
    Ok(match cfg {
        ClosureConfig::TripletPeriodic => ClosureSpec::TripletPeriodic,
        ClosureConfig::MeanField { p1 } => ClosureSpec::MeanField {
            p1: read_field(p1)?,
        },
    })
}

pub fn marginal(inv: &Invocation) -> CliResult<()> {
    let start = Instant::now();
    let cfg: MarginalConfig = inv.typed()?;
    let phase = phase_grid(3, &cfg.march.phase)?;
    check_size(&phase)?;
    let spec = DynamicsSpec::new(cfg.scheme, cfg.nu)?;
    let field = effective_field(&closure(&cfg.closure)?, &spec)?;
    let vel = field.velocity_field(&phase, 0.0)?;
    let op = assemble_3pt_operator(&phase, &field)?;
    march("marginal", inv, &cfg.march, &phase, &vel, &op, start)
}

fn moments(p: &DensityField) -> CliResult<(Vec<f64>, f64)> {
    let means = (0..p.grid().axes())
        .map(|axis| p.average(&ObservableSpec::normalized(Observable::AxisMean { axis })))
        .collect::<Result<Vec<_>, _>>()?;
    let ke = p.average(&ObservableSpec::normalized(Observable::KineticEnergy))?;
    Ok((means, ke))
}

pub fn compare(inv: &Invocation) -> CliResult<()> {
    let cfg: CompareConfig = inv.typed()?;
    let solver = read_field(&cfg.solver)?;
    let oracle = read_field(&cfg.oracle)?;
    if solver.grid() != oracle.grid() {
        return Err(CliError::mismatch(
            "grid_mismatch",
            format!(
                "solver grid {:?} differs from oracle grid {:?}",
                solver.grid(),
                oracle.grid()
            ),
        ));
    }
    let tol = &cfg.tolerances;
    let (sm, sk) = moments(&solver)?;
    let (om, ok) = moments(&oracle)?;
    let mut pass = true;
    let means: Vec<Value> = sm
        .iter()
        .zip(&om)
        .enumerate()
        .map(|(axis, (s, o))| {
            let diff = (s - o).abs();
            let bound = (tol.mean_rel * o.abs()).max(tol.mean_abs);
            let ok = diff <= bound;
            pass &= ok;
            json!({ "axis": axis, "solver": s, "oracle": o, "abs_diff": diff, "tolerance": bound, "pass": ok })
        })
        .collect();
    let ke_rel = if ok != 0.0 {
        (sk - ok).abs() / ok.abs()
    } else {
        (sk - ok).abs()
    };
    let ke_pass = ke_rel <= tol.kinetic_rel;
    pass &= ke_pass;
    let mut l1 = Vec::new();
    for axis in 0..solver.grid().axes() {
        let a = solver.marginalize(&[axis])?;
        let b = oracle.marginalize(&[axis])?;
        let d = a.l1_distance(&b);
        let ok = tol.l1.is_none_or(|t| d <= t);
        pass &= ok;
        l1.push(json!({ "axis": axis, "l1": d, "pass": ok }));
    }
    let report = json!({
        "solver": cfg.solver,
        "oracle": cfg.oracle,
        "means": means,
        "kinetic_energy": { "solver": sk, "oracle": ok, "rel_diff": ke_rel, "tolerance": tol.kinetic_rel, "pass": ke_pass },
        "marginal_l1": l1,
        "tolerances": tol,
        "pass": pass,
    });
    let mut out = Artifacts::new(&cfg.out)?;
    out.write_json("compare_report.json", &report)?;
    emit(&format!(
        "{}\n",
        serde_json::to_string(&report).expect("serializable")
    ));
    if !pass {
        return Err(CliError::mismatch(
            "tolerance_exceeded",
            "solver and oracle differ beyond tolerance",
        ));
    }
    Ok(())
}

pub fn causal(inv: &Invocation) -> CliResult<()> {
    let start = Instant::now();
    let cfg: CausalConfig = inv.typed()?;
    if cfg.time_slices == 0 {
        return Err(CliError::config(
            "bad_time_slices",
            "time_slices must be >= 1",
        ));
    }
    let phase = phase_grid(3, &cfg.march.phase)?;
    check_size(&phase)?;
    let spec = DynamicsSpec::new(cfg.scheme, cfg.nu)?;
    let field = effective_field(&ClosureSpec::TripletPeriodic, &spec)?;
    let vel = field.velocity_field(&phase, 0.0)?;
    let op = assemble_3pt_operator(&phase, &field)?;
    let sched = schedule(&cfg.march, &phase, &vel, Some(cfg.time_slices))?;
    let p0 = initial_field(&cfg.march.initial, &phase)?;
    let sys = build_causal_system(&op, sched.dt, cfg.time_slices, &p0)?;
    let solution = forward_solve_raw(&sys)?;
    let res = residual(&sys, &solution)?;
    let scale = solution
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_diff: f64 = 0.0;
    evolve_observed(
        &p0,
        &op,
        sched.dt,
        cfg.time_slices,
        liouville_core::Method::Euler,
        |m, p| {
            for (a, b) in p.iter().zip(&solution[m]) {
                max_diff = max_diff.max((a - b).abs());
            }
        },
    )?;
    let sparsity = sys.sparsity();
    let report = json!({
        "sparsity": sparsity,
        "stencil_bound": 2 * phase.axes() + 2,
        "slice_dim": sys.slice_dim(),
        "time_slices": cfg.time_slices,
        "dt": sched.dt,
        "residual": res,
        "relative_residual": if scale > 0.0 { res / scale } else { res },
        "max_diff_vs_euler": max_diff,
    });
    let mut out = Artifacts::new(&cfg.march.out)?;
    out.write_json("causal_report.json", &report)?;
    if let Some(name) = &cfg.coo {
        if sys.dimension() > FULL_ASSEMBLY_LIMIT {
            return Err(CliError::config(
                "bad_coo",
                format!("matrix export is limited to dimension {FULL_ASSEMBLY_LIMIT}"),
            ));
        }
        let mut buf = Vec::new();
        sys.write_coo(&mut buf)?;
        out.write(&name.to_string_lossy(), &buf)?;
    }
    emit(&format!(
        "{}\n",
        serde_json::to_string(&report).expect("serializable")
    ));
    out.finish("causal", inv, None, start, Value::Null)
}
