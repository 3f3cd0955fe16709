//! Qubit counts and cost-scaling models for phase-space and dynamic encodings.
//!
//! Each discretized real variable with `n` levels occupies one register of
//! `ceil(log2 n)` qubits. Costs are proportionality models in dimensionless
//! units; no absolute constants are implied.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Register width for `n` levels: `ceil(log2 n)`, zero for `n = 1`.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

fn ceil_log2_big(n: &BigUint) -> u64 {
    if *n <= BigUint::one() {
        0
    } else {
        (n - 1u32).bits()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProblemShape {
    /// Grid sites `G`.
    pub sites: u64,
    /// Fields per site `F`.
    pub fields: u64,
    /// Stencil connectivity `z` (site plus neighbours).
    pub connectivity: u64,
    /// Levels per variable `n`.
    pub levels: u64,
}

impl ProblemShape {
    pub fn new(sites: u64, fields: u64, connectivity: u64, levels: u64) -> Result<Self> {
        let shape = Self {
            sites,
            fields,
            connectivity,
            levels,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("G", self.sites),
            ("F", self.fields),
            ("z", self.connectivity),
            ("n", self.levels),
        ] {
            if v == 0 {
                return Err(invalid_shape(name));
            }
        }
        if self.connectivity > self.sites {
            return Err(invalid(
                "z",
                format!("z = {} exceeds G = {}", self.connectivity, self.sites),
            ));
        }
        Ok(())
    }
}

fn invalid_shape(name: &'static str) -> Error {
    invalid(name, "must be >= 1")
}

/// Qubits for the full joint PDF: `G·F·ceil(log2 n)`.
pub fn qubits_full(shape: &ProblemShape) -> Result<u128> {
    shape.validate()?;
    (shape.sites as u128)
        .checked_mul(shape.fields as u128)
        .and_then(|v| v.checked_mul(ceil_log2(shape.levels) as u128))
        .ok_or(Error::Overflow("qubits_full"))
}

/// Qubits for the lowest irreducible marginal: `z·F·ceil(log2 n)`.
pub fn qubits_marginal(shape: &ProblemShape) -> Result<u128> {
    shape.validate()?;
    (shape.connectivity as u128)
        .checked_mul(shape.fields as u128)
        .and_then(|v| v.checked_mul(ceil_log2(shape.levels) as u128))
        .ok_or(Error::Overflow("qubits_marginal"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostQuery {
    /// Sparsity `s` of the system matrix.
    pub sparsity: u64,
    /// Initial-condition fidelity `φ`, taken as given.
    pub fidelity: f64,
    pub time_span: f64,
    pub grid_size: u64,
    pub epsilon: f64,
}

impl CostQuery {
    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(invalid("s", "must be >= 1"));
        }
        if !(self.fidelity > 0.0 && self.fidelity <= 1.0) {
            return Err(invalid(
                "phi",
                format!("{} is outside (0, 1]", self.fidelity),
            ));
        }
        if !(self.time_span > 0.0 && self.time_span.is_finite()) {
            return Err(invalid("T", format!("{} is not positive", self.time_span)));
        }
        if self.grid_size < 2 {
            return Err(invalid("G", "polylog model needs G >= 2"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(
                "epsilon",
                format!("{} is outside (0, 1)", self.epsilon),
            ));
        }
        Ok(())
    }
}

/// `C_q = s·φ·T²·log2(G)·log2(1/ε)`.
pub fn cost_quantum(q: &CostQuery) -> Result<f64> {
    q.validate()?;
    let polylog = (q.grid_size as f64).log2() * (1.0 / q.epsilon).log2();
    Ok(q.sparsity as f64 * q.fidelity * q.time_span * q.time_span * polylog)
}

/// `C_c = s·T·G`.
pub fn cost_classical(sparsity: u64, time_span: f64, grid_size: u64) -> Result<f64> {
    if sparsity == 0 || grid_size == 0 {
        return Err(invalid("s, G", "must be >= 1"));
    }
    if !(time_span > 0.0 && time_span.is_finite()) {
        return Err(invalid("T", format!("{time_span} is not positive")));
    }
    Ok(sparsity as f64 * time_span * grid_size as f64)
}

/// Degrees of freedom of an ensemble of dynamic runs whose cost scales with
/// grid size and quadratically with step count: `grid·steps²·ensemble`.
pub fn dynamic_approach_dof(grid_points: u64, time_steps: u64, ensemble: u64) -> BigUint {
    BigUint::from(grid_points)
        * BigUint::from(time_steps)
        * BigUint::from(time_steps)
        * BigUint::from(ensemble)
}

/// Qubits to index `dof` states: `ceil(log2 dof)`.
pub fn dynamic_approach_qubits(dof: &BigUint) -> Result<u64> {
    if dof.is_zero() {
        return Err(invalid("dof", "must be >= 1"));
    }
    Ok(ceil_log2_big(dof))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub qubits: u128,
    pub cost_quantum: Option<f64>,
    pub cost_classical: Option<f64>,
    pub inputs: serde_json::Value,
    pub convention_notes: Vec<String>,
}

pub const NOTE_CEIL: &str = "log2 n realized as ceil(log2 n) qubits per encoded variable";
pub const NOTE_POLYLOG: &str = "polylog(G, 1/eps) realized as log2(G) * log2(1/eps)";
pub const NOTE_PROPORTIONAL: &str = "costs are proportionality models in dimensionless units";

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape(g: u64, f: u64, z: u64, n: u64) -> ProblemShape {
        ProblemShape::new(g, f, z, n).unwrap()
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(6), 3);
        assert_eq!(ceil_log2(1000), 10);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
        assert_eq!(ceil_log2(u64::MAX), 64);
    }

    #[test]
    fn full_counts() {
        assert_eq!(
            qubits_full(&shape(1_000_000_000, 4, 7, 1000)).unwrap(),
            40_000_000_000
        );
        assert_eq!(qubits_full(&shape(1, 1, 1, 2)).unwrap(), 1);
        assert_eq!(qubits_full(&shape(3, 1, 3, 6)).unwrap(), 9);
        assert_eq!(
            qubits_full(&shape(u64::MAX, u64::MAX, 1, 1 << 40)).unwrap_err(),
            Error::Overflow("qubits_full")
        );
    }

    #[test]
    fn marginal_counts() {
        assert_eq!(qubits_marginal(&shape(1000, 1, 3, 1000)).unwrap(), 30);
        assert_eq!(qubits_marginal(&shape(1000, 4, 7, 1000)).unwrap(), 280);
        assert_eq!(qubits_marginal(&shape(3, 1, 3, 2)).unwrap(), 3);
    }

    #[test]
    fn invalid_shapes() {
        assert!(ProblemShape::new(0, 1, 1, 2).is_err());
        assert!(ProblemShape::new(2, 1, 3, 2).is_err());
        assert!(ProblemShape::new(2, 1, 1, 0).is_err());
    }

    #[test]
    fn quantum_cost_examples() {
        let q = CostQuery {
            sparsity: 8,
            fidelity: 1.0,
            time_span: 10.0,
            grid_size: 1 << 20,
            epsilon: 2f64.powi(-10),
        };
        assert_eq!(cost_quantum(&q).unwrap(), 160_000.0);
        let doubled = CostQuery {
            time_span: 20.0,
            ..q
        };
        assert_eq!(cost_quantum(&doubled).unwrap(), 4.0 * 160_000.0);
        let squared = CostQuery {
            grid_size: 1 << 40,
            ..q
        };
        assert_eq!(cost_quantum(&squared).unwrap(), 2.0 * 160_000.0);
        assert!(cost_quantum(&CostQuery { epsilon: 1.0, ..q }).is_err());
        assert!(cost_quantum(&CostQuery { fidelity: 0.0, ..q }).is_err());
        assert!(cost_quantum(&CostQuery { fidelity: 1.5, ..q }).is_err());
    }

    #[test]
    fn classical_cost_examples() {
        let c = cost_classical(8, 10.0, 1 << 20).unwrap();
        assert_eq!(c, 83_886_080.0);
        assert_eq!(cost_classical(8, 10.0, 1 << 21).unwrap(), 2.0 * c);
    }

    #[test]
    fn quantum_advantage_grows_with_grid() {
        let mut last = f64::INFINITY;
        for k in 10..=40 {
            let g = 1u64 << k;
            let t = (g as f64).cbrt();
            let q = CostQuery {
                sparsity: 8,
                fidelity: 1.0,
                time_span: t,
                grid_size: g,
                epsilon: 1e-3,
            };
            let ratio = cost_quantum(&q).unwrap() / cost_classical(8, t, g).unwrap();
            assert!(ratio < last, "ratio not decreasing at G = 2^{k}");
            last = ratio;
        }
    }

    #[test]
    fn dynamic_counts() {
        let dof = BigUint::from(10u32).pow(24);
        assert_eq!(dynamic_approach_qubits(&dof).unwrap(), 80);
        assert_eq!(dynamic_approach_dof(1_000_000_000, 1_000_000, 1000), dof);
        assert_eq!(
            dynamic_approach_qubits(&BigUint::from(1u64 << 30)).unwrap(),
            30
        );
        assert_eq!(
            dynamic_approach_qubits(&BigUint::from(1_000_000_000u64)).unwrap(),
            30
        );
        assert_eq!(dynamic_approach_qubits(&BigUint::one()).unwrap(), 0);
        assert!(dynamic_approach_qubits(&BigUint::zero()).is_err());
    }

    proptest! {
        #[test]
        fn marginal_never_exceeds_full(g in 1u64..10_000, f in 1u64..8, z in 1u64..50, n in 1u64..1_000_000) {
            prop_assume!(z <= g);
            let s = shape(g, f, z, n);
            prop_assert!(qubits_marginal(&s).unwrap() <= qubits_full(&s).unwrap());
        }

        #[test]
        fn costs_monotone(s in 1u64..64, t in 0.1f64..100.0, k in 2u32..50) {
            let g = 1u64 << k;
            let base = CostQuery { sparsity: s, fidelity: 0.5, time_span: t, grid_size: g, epsilon: 1e-3 };
            let c = cost_quantum(&base).unwrap();
            let bumped = [
                CostQuery { sparsity: s + 1, ..base },
                CostQuery { time_span: t * 1.5, ..base },
                CostQuery { grid_size: g * 2, ..base },
                CostQuery { fidelity: 0.75, ..base },
                CostQuery { epsilon: 1e-4, ..base },
            ];
            for q in bumped {
                let bigger = cost_quantum(&q).unwrap();
                prop_assert!(bigger > c);
            }
            let cc = cost_classical(s, t, g).unwrap();
            prop_assert!(cost_classical(s + 1, t, g).unwrap() > cc);
            prop_assert!(cost_classical(s, t * 1.5, g).unwrap() > cc);
            prop_assert!(cost_classical(s, t, g + 1).unwrap() > cc);
        }
    }
}
