//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use liouville_core::burgers::rhs;
use liouville_core::causal::{build_causal_system, forward_solve_raw, residual};
use liouville_core::ensemble::{
    run_ensemble_strided, sample_initial_conditions, InitialEnsembleSpec, Perturbation,
};
use liouville_core::liouville::{assemble_operator, evolve, evolve_observed, max_stable_dt};
use liouville_core::marginal::{assemble_3pt_operator, effective_field, evolve_3pt, ClosureSpec};
use liouville_core::{
    DensityField, DynamicsSpec, Method, Observable, ObservableSpec, PhaseGrid, PhaseVelocityField,
    Scheme, SpatialGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const BASE: [f64; 3] = [0.5, -0.2, -0.3];
const SIGMA: f64 = 0.3;
const NU: f64 = 0.1;
const T_END: f64 = 0.5;

fn liou() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liou"))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn spec() -> DynamicsSpec {
    DynamicsSpec::new(Scheme::ConsistentCentral, NU).unwrap()
}

/// Step count and step for reaching `t_end` under the stability bound.
fn schedule(phase: &PhaseGrid, vel: &PhaseVelocityField, t_end: f64) -> (usize, f64) {
    let dt_max = max_stable_dt(phase, vel, 0.9).unwrap();
    let steps = (t_end / dt_max).ceil() as usize;
    (steps, t_end / steps as f64)
}

fn estimate_qubits(args: &[&str]) -> Result<u64, String> {
    let out = liou().arg("estimate").args(args).output().map_err(fail)?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let v: Value = serde_json::from_slice(&out.stdout).map_err(fail)?;
    v["qubits"].as_u64().ok_or_else(|| "no qubits field".into())
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let q1 = estimate_qubits(&["--marginal", "--z", "3", "--F", "1", "--n", "1000"])?;
    let q2 = estimate_qubits(&["--marginal", "--z", "7", "--F", "4", "--n", "1000"])?;
    let q3 = estimate_qubits(&["--dynamic", "--dof", "1e24"])?;
    let secs = start.elapsed().as_secs_f64();
    check(
        q1 == 30 && q2 == 280 && q3 == 80 && secs < 1.0,
        format!("qubits {q1}, {q2}, {q3} in {secs:.3} s"),
    )
}

fn ac2() -> Outcome {
    let phase = PhaseGrid::new(3, 8, -2.0, 2.0).unwrap();
    let field = effective_field(&ClosureSpec::TripletPeriodic, &spec()).map_err(fail)?;
    let vel = field.velocity_field(&phase, 0.0).map_err(fail)?;
    let op = assemble_3pt_operator(&phase, &field).map_err(fail)?;
    let dt = max_stable_dt(&phase, &vel, 0.9).map_err(fail)?;
    let p0 = DensityField::gaussian_product(phase, &BASE, &[SIGMA; 3]).map_err(fail)?;
    let slices = 100;
    let sys = build_causal_system(&op, dt, slices, &p0).map_err(fail)?;
    let x = forward_solve_raw(&sys).map_err(fail)?;
    let mut diff: f64 = 0.0;
    evolve_observed(&p0, &op, dt, slices, Method::Euler, |m, p| {
        for (a, b) in p.iter().zip(&x[m]) {
            diff = diff.max((a - b).abs());
        }
    })
    .map_err(fail)?;
    let scale = x.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = residual(&sys, &x).map_err(fail)? / scale;
    check(
        diff <= 1e-13 && rel <= 1e-12,
        format!("max |x - euler| = {diff:.3e}, relative residual = {rel:.3e}"),
    )
}

/// Worst mass drift and minimum value over a run of at least 1000 steps.
fn conservation(p0: &DensityField, vel: &PhaseVelocityField) -> Result<(f64, f64, usize), String> {
    let phase = *vel.grid();
    let op = assemble_operator(&phase, vel).map_err(fail)?;
    let dt = max_stable_dt(&phase, vel, 0.9).map_err(fail)?;
    let steps = 1000;
    let mut drift: f64 = 0.0;
    let mut min = f64::INFINITY;
    evolve_observed(p0, &op, dt, steps, Method::Euler, |_, p| {
        drift = drift.max((p.iter().sum::<f64>() - 1.0).abs());
        min = min.min(p.iter().copied().fold(f64::INFINITY, f64::min));
    })
    .map_err(fail)?;
    Ok((drift, min, steps))
}

fn ac3() -> Outcome {
    let rot = PhaseGrid::new(2, 64, -2.0, 2.0).unwrap();
    let vel = PhaseVelocityField::rotation(rot, 1.0).map_err(fail)?;
    let p0 = DensityField::gaussian_product(rot, &[0.8, 0.0], &[0.25, 0.25]).map_err(fail)?;
    let (d1, m1, s1) = conservation(&p0, &vel)?;

    let phase = PhaseGrid::new(3, 64, -2.0, 2.0).unwrap();
    let vel = PhaseVelocityField::burgers(phase, &spec(), &SpatialGrid::new(3, true).unwrap(), 0.0)
        .map_err(fail)?;
    let p0 = DensityField::gaussian_product(phase, &BASE, &[SIGMA; 3]).map_err(fail)?;
    let (d2, m2, s2) = conservation(&p0, &vel)?;
    check(
        d1.max(d2) <= 1e-12 && m1.min(m2) >= -1e-12,
        format!("rotation: drift {d1:.2e}, min {m1:.2e} ({s1} steps); burgers: drift {d2:.2e}, min {m2:.2e} ({s2} steps)"),
    )
}

fn ac4() -> Outcome {
    let sites = SpatialGrid::new(3, true).unwrap();
    let init = sample_initial_conditions(
        &InitialEnsembleSpec {
            base_profile: BASE.to_vec(),
            perturbation: Perturbation::Gaussian { sigma: SIGMA },
            count: 100_000,
            seed: 42,
        },
        &sites,
    )
    .map_err(fail)?;
    let steps = 100;
    let bundle = run_ensemble_strided(&init, &spec(), &sites, T_END / steps as f64, steps, steps)
        .map_err(fail)?;
    let oracle = bundle.moments(1);

    let phase = PhaseGrid::new(3, 64, -2.0, 2.0).unwrap();
    let field = effective_field(&ClosureSpec::TripletPeriodic, &spec()).map_err(fail)?;
    let vel = field.velocity_field(&phase, 0.0).map_err(fail)?;
    let op = assemble_3pt_operator(&phase, &field).map_err(fail)?;
    let (n, dt) = schedule(&phase, &vel, T_END);
    let p0 = DensityField::gaussian_product(phase, &BASE, &[SIGMA; 3]).map_err(fail)?;
    let p = evolve_3pt(&p0, &op, dt, n, Method::Euler)
        .map_err(fail)?
        .field;

    let mut ok = true;
    let mut detail = Vec::new();
    for axis in 0..3 {
        let m = p
            .average(&ObservableSpec::normalized(Observable::AxisMean { axis }))
            .map_err(fail)?;
        let o = oracle.mean[axis];
        let bound = (0.05 * o.abs()).max(3.0 * oracle.standard_error[axis]);
        ok &= (m - o).abs() <= bound;
        detail.push(format!("mean[{axis}] {m:.4} vs {o:.4} (tol {bound:.4})"));
    }
    let ke = p
        .average(&ObservableSpec::normalized(Observable::KineticEnergy))
        .map_err(fail)?;
    let rel = (ke - oracle.kinetic_energy).abs() / oracle.kinetic_energy;
    ok &= rel <= 0.05;
    detail.push(format!(
        "kinetic {ke:.4} vs {:.4} (rel {rel:.3})",
        oracle.kinetic_energy
    ));
    check(ok, detail.join(", "))
}

fn ac5() -> Outcome {
    let phase = PhaseGrid::new(3, 64, -2.0, 2.0).unwrap();
    let p0 = DensityField::gaussian_product(phase, &BASE, &[SIGMA; 3]).map_err(fail)?;
    let field = effective_field(&ClosureSpec::TripletPeriodic, &spec()).map_err(fail)?;
    let vel3 = field.velocity_field(&phase, 0.0).map_err(fail)?;
    let op3 = assemble_3pt_operator(&phase, &field).map_err(fail)?;
    let (n, dt) = schedule(&phase, &vel3, T_END);
    let marginal = evolve_3pt(&p0, &op3, dt, n, Method::Euler)
        .map_err(fail)?
        .field;

    let full_vel =
        PhaseVelocityField::burgers(phase, &spec(), &SpatialGrid::new(3, true).unwrap(), 0.0)
            .map_err(fail)?;
    let full_op = assemble_operator(&phase, &full_vel).map_err(fail)?;
    let full = evolve(&p0, &full_op, dt, n, Method::Euler)
        .map_err(fail)?
        .field;
    let diff = marginal.max_abs_diff(&full);
    check(
        diff <= 1e-12,
        format!("max |p3 - p| = {diff:.3e} after {n} steps"),
    )
}

fn ac6() -> Outcome {
    let period = 2.0 * std::f64::consts::PI;
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let phase = PhaseGrid::new(2, n, -2.0, 2.0).unwrap();
        let vel = PhaseVelocityField::rotation(phase, 1.0).map_err(fail)?;
        let op = assemble_operator(&phase, &vel).map_err(fail)?;
        let (steps, dt) = schedule(&phase, &vel, period);
        let p0 = DensityField::gaussian_product(phase, &[0.8, 0.0], &[0.25, 0.25]).map_err(fail)?;
        let p = evolve(&p0, &op, dt, steps, Method::Euler)
            .map_err(fail)?
            .field;
        errors.push(p.l1_distance(&p0));
    }
    check(
        errors[1] < errors[0] && errors[2] < errors[1],
        format!(
            "L1 return error {:.4} / {:.4} / {:.4} (ratios {:.2}, {:.2})",
            errors[0],
            errors[1],
            errors[2],
            errors[0] / errors[1],
            errors[1] / errors[2]
        ),
    )
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=12);
        let phase = PhaseGrid::new(3, n, -3.0, 3.0).unwrap();
        let raw: Vec<f64> = (0..phase.cell_count()).map(|_| rng.gen::<f64>()).collect();
        let z: f64 = raw.iter().sum();
        let p = DensityField::new(phase, raw.iter().map(|v| v / z).collect()).map_err(fail)?;
        let joint = p
            .average(&ObservableSpec::normalized(Observable::KineticEnergy))
            .map_err(fail)?;
        let mut sum = 0.0;
        for axis in 0..3 {
            let m = p.marginalize(&[axis]).map_err(fail)?;
            sum += m
                .average(&ObservableSpec::normalized(Observable::AxisMoment {
                    axis: 0,
                    order: 2,
                }))
                .map_err(fail)?;
        }
        worst = worst.max((joint - sum).abs());
    }
    check(
        worst <= 1e-12,
        format!("max |K - sum of marginal moments| = {worst:.3e} over 100 fields"),
    )
}

fn ac8() -> Outcome {
    let grid = SpatialGrid::new(5, true).unwrap();
    let mut ok = true;
    let mut worst_paper: f64 = 0.0;
    let mut worst_central: f64 = 0.0;
    for c in [-1.5, -0.3, 0.0, 0.7, 2.0] {
        let state = vec![c; 5];
        let paper = rhs(
            &state,
            &DynamicsSpec::new(Scheme::PaperMatrix, NU).unwrap(),
            &grid,
        )
        .map_err(fail)?;
        let central = rhs(&state, &spec(), &grid).map_err(fail)?;
        for (p, q) in paper.iter().zip(&central) {
            worst_paper = worst_paper.max((p + c * c / 4.0).abs());
            worst_central = worst_central.max(q.abs());
        }
        ok &= paper.iter().all(|&p| (p + c * c / 4.0).abs() <= 1e-15)
            && central.iter().all(|&q| q == 0.0);
    }
    check(
        ok,
        format!("paper_matrix |rhs + c^2/4| <= {worst_paper:.1e}, consistent_central |rhs| <= {worst_central:.1e}"),
    )
}

fn run_cli(args: &[&str], dir: &Path, threads: &str) -> Result<(), String> {
    let out = liou()
        .args(args)
        .arg("--out")
        .arg(dir)
        .arg("--threads")
        .arg(threads)
        .output()
        .map_err(fail)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn numeric_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn ac9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(fail)?;
    let root = tmp.path();
    let configs = [
        (
            "ensemble",
            r#"{"base_profile":[0.5,-0.2,-0.3],"nu":0.1,"perturbation":{"kind":"gaussian","sigma":0.3},
                "count":20000,"seed":42,"dt":0.005,"steps":100,"save_every":10,
                "phase":{"n":16,"u_min":-2,"u_max":2},"export_csv":true}"#,
        ),
        (
            "liouville",
            r#"{"system":{"kind":"burgers","sites":3,"nu":0.1},"phase":{"n":24,"u_min":-2,"u_max":2},
                "initial":{"kind":"gaussian","mean":[0.5,-0.2,-0.3],"sigma":[0.3,0.3,0.3]},"t_end":0.5}"#,
        ),
        (
            "marginal",
            r#"{"nu":0.1,"phase":{"n":24,"u_min":-2,"u_max":2},
                "initial":{"kind":"gaussian","mean":[0.5,-0.2,-0.3],"sigma":[0.3,0.3,0.3]},"t_end":0.5}"#,
        ),
        (
            "causal",
            r#"{"nu":0.1,"time_slices":20,"phase":{"n":6,"u_min":-2,"u_max":2},
                "initial":{"kind":"gaussian","mean":[0.5,-0.2,-0.3],"sigma":[0.3,0.3,0.3]},"coo":"system.coo"}"#,
        ),
    ];
    let mut checked = 0;
    for (command, config) in configs {
        let path = root.join(format!("{command}.json"));
        fs::write(&path, config).map_err(fail)?;
        let cfg = path.to_str().unwrap();
        let a = root.join(format!("{command}-1"));
        let b = root.join(format!("{command}-4"));
        let c = root.join(format!("{command}-replay"));
        run_cli(&[command, "--config", cfg], &a, "1")?;
        run_cli(&[command, "--config", cfg], &b, "4")?;
        // Replay from the recorded manifest alone.
        let manifest: Value =
            serde_json::from_slice(&fs::read(a.join("manifest.json")).map_err(fail)?)
                .map_err(fail)?;
        let replay = root.join(format!("{command}-manifest.json"));
        fs::write(&replay, manifest["config"].to_string()).map_err(fail)?;
        run_cli(&[command, "--config", replay.to_str().unwrap()], &c, "2")?;
        let reference = numeric_artifacts(&a);
        for other in [&b, &c] {
            if numeric_artifacts(other) != reference {
                return Err(format!(
                    "{command}: artifacts in {} differ",
                    other.display()
                ));
            }
        }
        checked += reference.len();
    }
    Ok(format!(
        "{checked} artifacts byte-identical across --threads 1/4 and manifest replay"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC-1 resource counts", ac1),
        ("AC-2 causal system equals time stepping", ac2),
        ("AC-3 conservation and positivity", ac3),
        ("AC-4 oracle agreement", ac4),
        ("AC-5 3-point and full solver agree", ac5),
        ("AC-6 rotation convergence", ac6),
        ("AC-7 kinetic energy from marginals", ac7),
        ("AC-8 scheme split on uniform states", ac8),
        ("AC-9 determinism", ac9),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} [{secs:.1} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1} s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
