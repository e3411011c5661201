//! Thin semidefinite-programming adapter: problems are stated as a linear
//! objective over scalar decision variables subject to matrix inequalities
//! that are affine in those variables, and lowered onto a semidefinite-cone
//! solver (Clarabel).
//!
//! The adapter owns the cone-program plumbing (scaled triangular
//! vectorization, sparse constraint assembly) so the synthesis code can stay
//! at the "list of symmetric affine constraints" level.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use thiserror::Error;

use crate::linalg::Matrix;

/// One constraint `constant + sum_j x_j * coeffs[j]  >=  0` (positive
/// semidefinite). All matrices must be symmetric and share one dimension.
#[derive(Debug, Clone)]
pub struct MatrixInequality {
    /// Constant term of the affine matrix expression.
    pub constant: Matrix,
    /// Per-variable coefficient matrices; one entry per decision variable.
    pub coeffs: Vec<Matrix>,
}

impl MatrixInequality {
    /// Side length of the constraint matrix.
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

/// A complete SDP: minimize `objective . x` subject to every listed
/// matrix inequality.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    /// Linear objective coefficients, one per decision variable.
    pub objective: Vec<f64>,
    /// Affine matrix inequalities over the same variable vector.
    pub constraints: Vec<MatrixInequality>,
}

impl SdpProblem {
    /// Number of scalar decision variables.
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }
}

/// Variable values and solver status for a solved SDP.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Optimal (or best found) values of the decision variables.
    pub x: Vec<f64>,
    /// Human-readable solver status, e.g. `"Solved"`.
    pub status: String,
}

/// Errors surfaced by the solver adapter.
#[derive(Debug, Error)]
pub enum SdpError {
    /// Constraint matrices disagree with the declared variable count or are
    /// not square.
    #[error("malformed SDP: {0}")]
    Malformed(String),
    /// The solver terminated without a usable primal point.
    #[error("SDP solve failed with status {0}")]
    NotSolved(String),
}

/// Interface the synthesis layer programs against; lets tests substitute
/// instrumented solvers.
pub trait SdpSolve {
    /// Solves the problem, returning variable values on success.
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution, SdpError>;
}

/// Adapter backed by the Clarabel interior-point solver.
#[derive(Debug, Default, Clone)]
pub struct ClarabelSolver;

/// Scaled upper-triangle vectorization (column-major) used by the PSD
/// triangle cone: off-diagonal entries are multiplied by sqrt(2) so that
/// inner products of vectorizations match matrix inner products.
fn svec(m: &Matrix) -> Vec<f64> {
    let d = m.nrows();
    let sqrt2 = 2.0_f64.sqrt();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for i in 0..=j {
            let v = m[(i, j)];
            out.push(if i == j { v } else { v * sqrt2 });
        }
    }
    out
}

impl SdpSolve for ClarabelSolver {
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution, SdpError> {
        let n = problem.n_vars();
        for (k, c) in problem.constraints.iter().enumerate() {
            if c.constant.nrows() != c.constant.ncols() {
                return Err(SdpError::Malformed(format!(
                    "constraint {k} constant term is not square"
                )));
            }
            if c.coeffs.len() != n {
                return Err(SdpError::Malformed(format!(
                    "constraint {k} has {} coefficient matrices for {n} variables",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|m| m.shape() != c.constant.shape()) {
                return Err(SdpError::Malformed(format!(
                    "constraint {k} mixes matrix dimensions"
                )));
            }
        }

        // Lower `constant + sum x_j coeffs[j] >= 0` to the conic form
        // `A x + s = b, s in PSD-triangle`: b = svec(constant) and the
        // j-th column of A is -svec(coeffs[j]).
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        for c in &problem.constraints {
            b.extend_from_slice(&svec(&c.constant));
            cones.push(SupportedConeT::PSDTriangleConeT(c.dim()));
        }
        let m_rows = b.len();

        let mut colptr: Vec<usize> = Vec::with_capacity(n + 1);
        let mut rowval: Vec<usize> = Vec::new();
        let mut nzval: Vec<f64> = Vec::new();
        colptr.push(0);
        for j in 0..n {
            let mut row_offset = 0;
            for c in &problem.constraints {
                for (i, v) in svec(&c.coeffs[j]).into_iter().enumerate() {
                    if v != 0.0 {
                        rowval.push(row_offset + i);
                        nzval.push(-v);
                    }
                }
                let d = c.dim();
                row_offset += d * (d + 1) / 2;
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m_rows, n, colptr, rowval, nzval);
        let p = CscMatrix::zeros((n, n));

        let settings = DefaultSettings {
            verbose: false,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &problem.objective, &a, &b, &cones, settings)
            .map_err(|e| SdpError::Malformed(format!("solver rejected problem: {e:?}")))?;
        solver.solve();

        let status = solver.solution.status;
        match status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(SdpSolution {
                x: solver.solution.x.clone(),
                status: format!("{status:?}"),
            }),
            other => Err(SdpError::NotSolved(format!("{other:?}"))),
        }
    }
}
