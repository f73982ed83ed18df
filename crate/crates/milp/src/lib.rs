//! Exact solver for mixed-integer linear programs with bounded integer
//! variables.
//!
//! LP relaxations are solved by a bounded-variable primal simplex on a sparse
//! LU-factored basis; integrality is enforced by best-first branch-and-bound
//! that branches on the most fractional variable.
//!
//! ```
//! use minrep_milp::{solve_milp, Budget, Model, MilpStatus, Sense};
//!
//! // max 3a + 2b  s.t.  a + b <= 1, as a minimization
//! let mut m = Model::new();
//! let a = m.add_binary(-3.0);
//! let b = m.add_binary(-2.0);
//! m.add_row(vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
//! let sol = solve_milp(&m, &Budget::default()).unwrap();
//! assert_eq!(sol.status, MilpStatus::Optimal);
//! assert_eq!(sol.values, vec![1.0, 0.0]);
//! ```

mod bnb;
mod lu;
mod model;
mod simplex;

use std::time::Duration;

pub use bnb::{BoundPoint, MilpSolution, MilpSolver, MilpStatus, INT_TOL};
pub use model::{Constraint, Model, Sense, Variable};
pub use simplex::{Basis, LpStatus};

/// Primal feasibility tolerance of the simplex.
pub const FEAS_TOL: f64 = simplex::FEAS_TOL;

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("row {row} references unknown variable {var}")]
    BadIndex { row: usize, var: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("integer variable {0} has an infinite bound")]
    UnboundedInteger(usize),
}

/// Resource limits for a solve. `None` means unlimited.
#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    /// Simplex iterations allowed per LP relaxation.
    pub lp_iteration_limit: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            time_limit: None,
            node_limit: None,
            lp_iteration_limit: 1_000_000,
        }
    }
}

impl Budget {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }

    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
}

/// Solves the continuous relaxation of `model` (integrality is ignored).
pub fn solve_lp(model: &Model) -> Result<LpSolution, MilpError> {
    model.validate()?;
    let mut simplex = simplex::Simplex::new(model);
    let status = simplex.solve(Budget::default().lp_iteration_limit);
    let (values, objective) = if status == LpStatus::Optimal {
        (simplex.values().to_vec(), simplex.objective())
    } else {
        (Vec::new(), f64::NAN)
    };
    Ok(LpSolution {
        status,
        values,
        objective,
        iterations: simplex.iterations,
    })
}

/// Solves `model` to optimality or until `budget` runs out.
pub fn solve_milp(model: &Model, budget: &Budget) -> Result<MilpSolution, MilpError> {
    MilpSolver::new(model).solve(budget)
}
