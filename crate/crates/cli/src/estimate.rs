use clap::Args;
use liouville_core::fmt_f64;
use liouville_core::resources::{
    cost_classical, cost_quantum, dynamic_approach_dof, dynamic_approach_qubits, qubits_full,
    qubits_marginal, CostQuery, ProblemShape, ResourceReport, NOTE_CEIL, NOTE_POLYLOG,
    NOTE_PROPORTIONAL,
};
use num_bigint::BigUint;
use serde_json::{json, Map, Value};

use crate::commands::emit;
use crate::error::{CliError, CliResult};

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    /// Qubits for the full joint distribution over all sites.
    #[arg(long, group = "mode")]
    pub full: bool,
    /// Qubits for a z-point marginal.
    #[arg(long, group = "mode")]
    pub marginal: bool,
    /// Qubits to index the degrees of freedom of an ensemble of dynamic runs.
    #[arg(long, group = "mode")]
    pub dynamic: bool,
    /// CSV of qubits and costs for G = 2^10 .. 2^40 with T = G^(1/3).
    #[arg(long, group = "mode")]
    pub sweep: bool,

    #[arg(long = "G")]
    pub sites: Option<u64>,
    #[arg(long = "F", default_value_t = 1)]
    pub fields: u64,
    #[arg(long = "z")]
    pub connectivity: Option<u64>,
    #[arg(long = "n")]
    pub levels: Option<u64>,

    /// Degrees of freedom, e.g. `1e24`, `2^30` or a plain integer.
    #[arg(long)]
    pub dof: Option<String>,
    #[arg(long)]
    pub grid_points: Option<u64>,
    #[arg(long)]
    pub time_steps: Option<u64>,
    #[arg(long)]
    pub ensemble: Option<u64>,

    /// Sparsity s of the evolution operator.
    #[arg(long = "s")]
    pub sparsity: Option<u64>,
    /// Fidelity factor φ in (0, 1].
    #[arg(long = "phi")]
    pub fidelity: Option<f64>,
    /// Time span T in units of the step.
    #[arg(long = "T")]
    pub time_span: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

fn need<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::config("bad_shape", format!("--{flag} is required")))
}

/// Parse `1e24`, `2^30` or a decimal integer exactly.
pub fn parse_dof(raw: &str) -> CliResult<BigUint> {
    let bad = || {
        CliError::config(
            "bad_dof",
            format!("`{raw}` is not a positive integer count"),
        )
    };
    let s = raw.trim();
    let (base, exp, mant) = if let Some((b, e)) = s.split_once('^') {
        (
            b.parse::<u32>().map_err(|_| bad())?,
            e.parse::<u32>().map_err(|_| bad())?,
            BigUint::from(1u32),
        )
    } else if let Some((m, e)) = s.split_once(['e', 'E']) {
        (
            10,
            e.parse::<u32>().map_err(|_| bad())?,
            m.parse::<BigUint>().map_err(|_| bad())?,
        )
    } else {
        (1, 0, s.parse::<BigUint>().map_err(|_| bad())?)
    };
    let value = mant * BigUint::from(base).pow(exp);
    if value == BigUint::from(0u32) {
        return Err(bad());
    }
    Ok(value)
}

fn shape(a: &EstimateArgs) -> CliResult<ProblemShape> {
    // The full count does not depend on the stencil.
    let z = if a.full { a.connectivity.unwrap_or(1) } else { need(a.connectivity, "z")? };
    let levels = need(a.levels, "n")?;
    // A lone marginal needs no grid size; any G >= z gives the same count.
    let sites = if a.marginal {
        a.sites.unwrap_or(z)
    } else {
        need(a.sites, "G")?
    };
    Ok(ProblemShape::new(sites, a.fields, z, levels)?)
}

fn costs(
    a: &EstimateArgs,
    grid: Option<u64>,
    notes: &mut Vec<String>,
) -> CliResult<(Option<f64>, Option<f64>)> {
    let (Some(s), Some(t), Some(g)) = (a.sparsity, a.time_span, grid) else {
        return Ok((None, None));
    };
    let classical = cost_classical(s, t, g)?;
    let quantum = match (a.fidelity, a.epsilon) {
        (Some(phi), Some(eps)) => Some(cost_quantum(&CostQuery {
            sparsity: s,
            fidelity: phi,
            time_span: t,
            grid_size: g,
            epsilon: eps,
        })?),
        _ => None,
    };
    notes.push(NOTE_PROPORTIONAL.into());
    if quantum.is_some() {
        notes.push(NOTE_POLYLOG.into());
    }
    Ok((quantum, Some(classical)))
}

pub fn report(a: &EstimateArgs) -> CliResult<ResourceReport> {
    let mut notes = vec![NOTE_CEIL.to_string()];
    let mut inputs = Map::new();
    let (qubits, grid) = if a.dynamic {
        let dof = match (&a.dof, a.grid_points, a.time_steps, a.ensemble) {
            (Some(raw), None, None, None) => parse_dof(raw)?,
            (None, Some(g), Some(t), Some(e)) => {
                inputs.insert("grid_points".into(), json!(g));
                inputs.insert("time_steps".into(), json!(t));
                inputs.insert("ensemble".into(), json!(e));
                notes.push("dof = grid_points * time_steps^2 * ensemble".into());
                dynamic_approach_dof(g, t, e)
            }
            _ => {
                return Err(CliError::config(
                    "bad_shape",
                    "--dynamic needs --dof, or all of --grid-points --time-steps --ensemble",
                ))
            }
        };
        inputs.insert("dof".into(), Value::String(dof.to_string()));
        let q = dynamic_approach_qubits(&dof)?;
        if q == 0 {
            notes.push("a single degree of freedom needs no qubits".into());
        }
        (u128::from(q), a.sites.or(a.grid_points))
    } else {
        let sh = shape(a)?;
        inputs.insert("G".into(), json!(sh.sites));
        inputs.insert("F".into(), json!(sh.fields));
        inputs.insert("z".into(), json!(sh.connectivity));
        inputs.insert("n".into(), json!(sh.levels));
        let q = if a.full {
            qubits_full(&sh)?
        } else {
            qubits_marginal(&sh)?
        };
        (q, a.sites)
    };
    let (cost_quantum, cost_classical) = costs(a, grid, &mut notes)?;
    for (k, v) in [
        ("s", a.sparsity.map(|v| json!(v))),
        ("phi", a.fidelity.map(|v| json!(v))),
        ("T", a.time_span.map(|v| json!(v))),
        ("epsilon", a.epsilon.map(|v| json!(v))),
    ] {
        if let Some(v) = v {
            inputs.insert(k.into(), v);
        }
    }
    let mode = if a.full {
        "full"
    } else if a.dynamic {
        "dynamic"
    } else {
        "marginal"
    };
    inputs.insert("mode".into(), json!(mode));
    Ok(ResourceReport {
        qubits,
        cost_quantum,
        cost_classical,
        inputs: Value::Object(inputs),
        convention_notes: notes,
    })
}

/// One CSV row per `G = 2^k`, `k = 10..=40`, with `T = G^(1/3)`.
pub fn sweep(a: &EstimateArgs) -> CliResult<String> {
    let z = a.connectivity.unwrap_or(3);
    let levels = a.levels.unwrap_or(1000);
    let s = a.sparsity.unwrap_or(2 * z + 1);
    let phi = a.fidelity.unwrap_or(1.0);
    let eps = a.epsilon.unwrap_or(1e-3);
    let mut out =
        String::from("G,T,qubits_full,qubits_marginal,cost_quantum,cost_classical,ratio\n");
    for k in 10..=40u32 {
        let g = 1u64 << k;
        let t = (g as f64).cbrt();
        let sh = ProblemShape::new(g, a.fields, z, levels)?;
        let cq = cost_quantum(&CostQuery {
            sparsity: s,
            fidelity: phi,
            time_span: t,
            grid_size: g,
            epsilon: eps,
        })?;
        let cc = cost_classical(s, t, g)?;
        out.push_str(&format!(
            "{g},{},{},{},{},{},{}\n",
            fmt_f64(t),
            qubits_full(&sh)?,
            qubits_marginal(&sh)?,
            fmt_f64(cq),
            fmt_f64(cc),
            fmt_f64(cq / cc)
        ));
    }
    Ok(out)
}

pub fn run(a: &EstimateArgs) -> CliResult<()> {
    if a.sweep {
        emit(&sweep(a)?);
    } else {
        let r = report(a)?;
        emit(&format!(
            "{}\n",
            serde_json::to_string_pretty(&r).expect("serializable")
        ));
    }
    Ok(())
}
