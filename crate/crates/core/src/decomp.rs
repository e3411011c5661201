//! Per-node preparation: rank-condition checks, the disturbance decoupler
//! `(E_i, P_i)`, and the detectability / observability decomposition that
//! puts `P_i A` into block-triangular form.
//!
//! Every node of the network sees the plant through its own output matrix
//! `C_i` and knows only a subset of the input channels. The channels it does
//! not know are stacked with the exogenous disturbance into one "unknown
//! input" matrix, and the decoupler projects the state update onto the
//! complement of those directions so that the estimation error never sees
//! them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, kernel_basis, left_pseudoinverse, orthonormal_image_basis, rank_with_tolerance,
    unit_circle_split, LinalgError, Matrix, Tolerance,
};

/// Errors from assumption checking, decoupling and decomposition.
#[derive(Debug, Error)]
pub enum DecompError {
    /// Matrix dimensions disagree with the declared plant/node sizes.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    /// The rank assumptions fail, so no unknown-input observer exists for
    /// this node.
    #[error("observer not constructible for node {node}: {reason}")]
    UioNotConstructible { node: usize, reason: String },
    /// The computed decoupler leaves a residual on the unknown-input
    /// directions larger than the zero tolerance.
    #[error("decoupling failed: residual {residual:.3e} exceeds tolerance")]
    DecouplingFailed { residual: f64 },
    /// A produced decomposition violates its own invariants (numerical
    /// breakdown; should not occur on well-posed inputs).
    #[error("decomposition invariant violated: {0}")]
    InvariantViolated(String),
    /// Propagated matrix-primitive failure.
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The global LTI plant `x(k+1) = A x(k) + B u(k) + B_w w(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    /// State transition matrix, `n_x x n_x`.
    pub a: Matrix,
    /// Known-input matrix, `n_x x n_u`.
    pub b: Matrix,
    /// Unknown-disturbance matrix, `n_x x n_w`.
    pub b_w: Matrix,
    /// Sampling step in seconds (used only to evaluate time-based signals).
    pub t_c: f64,
}

impl PlantModel {
    /// State dimension.
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }
    /// Known-input dimension.
    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }
    /// Disturbance dimension.
    pub fn n_w(&self) -> usize {
        self.b_w.ncols()
    }

    /// Checks shape consistency and entry finiteness.
    pub fn validate(&self) -> Result<(), DecompError> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(DecompError::InvalidScenario("A must be square".into()));
        }
        if self.b.nrows() != n {
            return Err(DecompError::InvalidScenario(
                "B row count must match A".into(),
            ));
        }
        if self.b_w.nrows() != n {
            return Err(DecompError::InvalidScenario(
                "B_w row count must match A".into(),
            ));
        }
        if !self.t_c.is_finite() || self.t_c <= 0.0 {
            return Err(DecompError::InvalidScenario(
                "step time must be positive".into(),
            ));
        }
        for m in [&self.a, &self.b, &self.b_w] {
            if !m.iter().all(|v| v.is_finite()) {
                return Err(DecompError::InvalidScenario(
                    "non-finite plant entry".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One sensor node: its output matrix and the input channels it knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    /// 0-based node index within the network.
    pub index: usize,
    /// Output matrix `C_i`, `n_iy x n_x`, full row rank.
    pub c: Matrix,
    /// 0-based indices into the plant's input columns this node can read.
    pub known_input_columns: Vec<usize>,
}

impl NodeSpec {
    /// Output dimension of this node.
    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// Columns of `B` for the input channels this node knows.
    pub fn b_known(&self, plant: &PlantModel) -> Matrix {
        select_columns(&plant.b, &self.known_input_columns)
    }

    /// 0-based indices of the input channels hidden from this node.
    pub fn unknown_input_columns(&self, plant: &PlantModel) -> Vec<usize> {
        (0..plant.n_u())
            .filter(|c| !self.known_input_columns.contains(c))
            .collect()
    }

    /// Columns of `B` for the channels hidden from this node.
    pub fn b_unknown(&self, plant: &PlantModel) -> Matrix {
        select_columns(&plant.b, &self.unknown_input_columns(plant))
    }

    /// Combined unknown-input matrix `[B_i^u, B_w]`: hidden input channels
    /// stacked with the disturbance channels.
    pub fn b_bar_iw(&self, plant: &PlantModel) -> Matrix {
        let bu = self.b_unknown(plant);
        let mut out = Matrix::zeros(plant.n_x(), bu.ncols() + plant.n_w());
        out.view_mut((0, 0), (plant.n_x(), bu.ncols())).copy_from(&bu);
        out.view_mut((0, bu.ncols()), (plant.n_x(), plant.n_w()))
            .copy_from(&plant.b_w);
        out
    }

    /// Checks shapes and that the known-column list is a well-formed subset.
    pub fn validate(&self, plant: &PlantModel) -> Result<(), DecompError> {
        if self.c.ncols() != plant.n_x() {
            return Err(DecompError::InvalidScenario(format!(
                "node {}: C has {} columns, state dimension is {}",
                self.index,
                self.c.ncols(),
                plant.n_x()
            )));
        }
        if self.c.nrows() == 0 {
            return Err(DecompError::InvalidScenario(format!(
                "node {}: C must have at least one row",
                self.index
            )));
        }
        let mut seen = vec![false; plant.n_u()];
        for &col in &self.known_input_columns {
            if col >= plant.n_u() {
                return Err(DecompError::InvalidScenario(format!(
                    "node {}: known input column {} out of range",
                    self.index, col
                )));
            }
            if seen[col] {
                return Err(DecompError::InvalidScenario(format!(
                    "node {}: duplicate known input column {}",
                    self.index, col
                )));
            }
            seen[col] = true;
        }
        Ok(())
    }
}

fn select_columns(m: &Matrix, cols: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        out.set_column(k, &m.column(c));
    }
    out
}

/// Outcome of the three rank conditions a node must satisfy before an
/// unknown-input observer can be built for it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `rank([B_i^u, B_w])` equals its column count.
    pub b_bar_full_column_rank: bool,
    /// `rank(C_i)` equals its row count.
    pub c_full_row_rank: bool,
    /// `rank(C_i [B_i^u, B_w])` equals the unknown-input column count.
    pub c_b_bar_full_column_rank: bool,
}

impl AssumptionReport {
    /// True when all three rank conditions hold.
    pub fn pass(&self) -> bool {
        self.b_bar_full_column_rank && self.c_full_row_rank && self.c_b_bar_full_column_rank
    }

    /// Names of the failed conditions (empty when passing).
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.b_bar_full_column_rank {
            out.push("rank([B_i^u, B_w]) is column-deficient");
        }
        if !self.c_full_row_rank {
            out.push("rank(C_i) is row-deficient");
        }
        if !self.c_b_bar_full_column_rank {
            out.push("rank(C_i [B_i^u, B_w]) is column-deficient");
        }
        out
    }
}

/// Evaluates the rank conditions for one node.
pub fn check_assumptions(
    plant: &PlantModel,
    node: &NodeSpec,
    tol: &Tolerance,
) -> Result<AssumptionReport, DecompError> {
    plant.validate()?;
    node.validate(plant)?;
    let b_bar = node.b_bar_iw(plant);
    let cb = &node.c * &b_bar;
    Ok(AssumptionReport {
        b_bar_full_column_rank: rank_with_tolerance(&b_bar, tol)? == b_bar.ncols(),
        c_full_row_rank: rank_with_tolerance(&node.c, tol)? == node.c.nrows(),
        c_b_bar_full_column_rank: rank_with_tolerance(&cb, tol)? == b_bar.ncols(),
    })
}

/// Disturbance decoupler of one node: `P_i = I + E_i C_i` annihilates every
/// unknown-input direction (`P_i [B_i^u, B_w] = 0`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDecoupler {
    /// Output-injection matrix `E_i`, `n_x x n_iy`.
    pub e: Matrix,
    /// Projector `P_i = I + E_i C_i`, `n_x x n_x`.
    pub p: Matrix,
    /// Free design term in the decoupler family; fixed to zero here, kept
    /// for interface completeness.
    pub h: Matrix,
}

/// Computes the decoupler `E_i = -B̄_iw (C_i B̄_iw)^+`, `P_i = I + E_i C_i`
/// and verifies the annihilation residual before returning.
pub fn disturbance_decoupler(
    plant: &PlantModel,
    node: &NodeSpec,
    tol: &Tolerance,
) -> Result<NodeDecoupler, DecompError> {
    let report = check_assumptions(plant, node, tol)?;
    if !report.pass() {
        return Err(DecompError::UioNotConstructible {
            node: node.index,
            reason: report.failures().join("; "),
        });
    }
    let n = plant.n_x();
    let b_bar = node.b_bar_iw(plant);
    let cb = &node.c * &b_bar;
    let cb_pinv = left_pseudoinverse(&cb, tol)?;
    let e = -&b_bar * cb_pinv;
    let p = Matrix::identity(n, n) + &e * &node.c;
    let scale = b_bar.norm().max(1.0);
    let residual = (&p * &b_bar).norm() / scale;
    if residual > tol.zero_tol {
        return Err(DecompError::DecouplingFailed { residual });
    }
    let h = Matrix::zeros(n, node.n_y());
    Ok(NodeDecoupler { e, p, h })
}

/// Which subspace is routed to the consensus correction: only the
/// unobservable-and-nonstable part (detectability) or the entire
/// unobservable part (observability).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionMode {
    /// `U_i` spans unobservable modes that are also nonstable; stable
    /// unobservable modes stay in the locally handled block.
    Detectability,
    /// `U_i` spans the full unobservable subspace, stable modes included.
    Observability,
}

impl std::fmt::Display for DecompositionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecompositionMode::Detectability => write!(f, "detectability"),
            DecompositionMode::Observability => write!(f, "observability"),
        }
    }
}

/// Orthonormal split of the state space induced by one node's output:
/// `[D_i U_i]` is orthogonal, `D_i^T (P_i A) U_i = 0` and `C_i U_i = 0`,
/// so in this basis the projected dynamics are block lower triangular.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDecomposition {
    /// Isometry onto the locally reconstructable block, `n_x x (n_x - nu)`.
    pub d: Matrix,
    /// Isometry onto the consensus-handled block, `n_x x nu`.
    pub u: Matrix,
    /// Dimension of the consensus-handled subspace.
    pub nu: usize,
    /// Reduced block `D^T P A D`.
    pub a_id: Matrix,
    /// Coupling block `U^T P A D`.
    pub a_ir: Matrix,
    /// Reduced block `U^T P A U`.
    pub a_iu: Matrix,
    /// Reduced output `C D`.
    pub c_id: Matrix,
    /// Mode that produced this split.
    pub mode: DecompositionMode,
    /// True when the stable/nonstable classification of some eigenvalue was
    /// numerically ambiguous (only possible in detectability mode).
    pub boundary_ambiguous: bool,
}

impl NodeDecomposition {
    /// State dimension `n_x`.
    pub fn n_x(&self) -> usize {
        self.d.nrows()
    }
}

/// Detectability decomposition of `(P_i A, C_i)`: `U_i` spans the
/// intersection of the unobservable subspace with the nonstable generalized
/// eigenspace; `D_i` spans its orthogonal complement.
pub fn detectability_decomposition(
    pa: &Matrix,
    c: &Matrix,
    tol: &Tolerance,
) -> Result<NodeDecomposition, DecompError> {
    decompose(pa, c, DecompositionMode::Detectability, tol)
}

/// Observability decomposition of `(P_i A, C_i)`: `U_i` spans the entire
/// unobservable subspace, so `A_iu` may also contain stable eigenvalues.
pub fn observability_decomposition(
    pa: &Matrix,
    c: &Matrix,
    tol: &Tolerance,
) -> Result<NodeDecomposition, DecompError> {
    decompose(pa, c, DecompositionMode::Observability, tol)
}

fn decompose(
    pa: &Matrix,
    c: &Matrix,
    mode: DecompositionMode,
    tol: &Tolerance,
) -> Result<NodeDecomposition, DecompError> {
    let n = pa.nrows();
    if pa.ncols() != n {
        return Err(DecompError::InvalidScenario(
            "projected dynamics matrix must be square".into(),
        ));
    }
    if c.ncols() != n {
        return Err(DecompError::InvalidScenario(
            "output matrix column count must match the state dimension".into(),
        ));
    }
    let obs = linalg::observability_matrix(pa, c);
    // Orthonormal basis of the unobservable subspace (invariant under P_i A).
    let unobs = kernel_basis(&obs, tol)?;

    let mut boundary_ambiguous = false;
    let u = match mode {
        DecompositionMode::Observability => unobs,
        DecompositionMode::Detectability => {
            if unobs.ncols() == 0 {
                unobs
            } else {
                // Restrict the dynamics to the unobservable subspace and keep
                // only its nonstable directions, lifted back to state space.
                let restricted = unobs.transpose() * pa * &unobs;
                let split = unit_circle_split(&restricted, tol)?;
                boundary_ambiguous = split.boundary_ambiguous;
                &unobs * split.nonstable
            }
        }
    };

    let nu = u.ncols();
    let d = if nu == 0 {
        Matrix::identity(n, n)
    } else if nu == n {
        Matrix::zeros(n, 0)
    } else {
        kernel_basis(&u.transpose(), tol)?
    };
    let u = if nu == n { Matrix::identity(n, n) } else { u };

    let a_id = d.transpose() * pa * &d;
    let a_ir = u.transpose() * pa * &d;
    let a_iu = u.transpose() * pa * &u;
    let c_id = c * &d;

    let dec = NodeDecomposition {
        d,
        u,
        nu,
        a_id,
        a_ir,
        a_iu,
        c_id,
        mode,
        boundary_ambiguous,
    };
    verify_invariants(&dec, pa, c, tol)?;
    Ok(dec)
}

fn verify_invariants(
    dec: &NodeDecomposition,
    pa: &Matrix,
    c: &Matrix,
    tol: &Tolerance,
) -> Result<(), DecompError> {
    let n = dec.n_x();
    let mut basis = Matrix::zeros(n, n);
    basis
        .view_mut((0, 0), (n, n - dec.nu))
        .copy_from(&dec.d);
    basis.view_mut((0, n - dec.nu), (n, dec.nu)).copy_from(&dec.u);
    let ortho = (basis.transpose() * &basis - Matrix::identity(n, n)).norm();
    if ortho > 1e-10 {
        return Err(DecompError::InvariantViolated(format!(
            "[D U] deviates from orthonormality by {ortho:.3e}"
        )));
    }
    let tri = (dec.d.transpose() * pa * &dec.u).norm();
    if tri > tol.zero_tol * pa.norm().max(1.0) {
        return Err(DecompError::InvariantViolated(format!(
            "upper coupling block has norm {tri:.3e}"
        )));
    }
    let cu = (c * &dec.u).norm();
    if cu > tol.zero_tol * c.norm().max(1.0) {
        return Err(DecompError::InvariantViolated(format!(
            "output does not vanish on the consensus subspace ({cu:.3e})"
        )));
    }
    if dec.mode == DecompositionMode::Detectability && dec.nu > 0 {
        let radius_floor = 1.0 - tol.stability_margin;
        let eigs = linalg::eigenvalues(&dec.a_iu)?;
        if eigs.iter().any(|&(re, im)| re.hypot(im) < radius_floor - 1e-9) {
            return Err(DecompError::InvariantViolated(
                "stable eigenvalue leaked into the consensus block".into(),
            ));
        }
    }
    Ok(())
}

/// Orthonormal basis of the observable subspace: image of the transposed
/// observability matrix. Exposed for report tooling.
pub fn observable_subspace_basis(
    pa: &Matrix,
    c: &Matrix,
    tol: &Tolerance,
) -> Result<Matrix, DecompError> {
    let obs = linalg::observability_matrix(pa, c);
    Ok(orthonormal_image_basis(&obs.transpose(), tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn toy_plant(n_x: usize, b: Matrix, b_w: Matrix) -> PlantModel {
        PlantModel {
            a: Matrix::identity(n_x, n_x),
            b,
            b_w,
            t_c: 1.0,
        }
    }

    #[test]
    fn assumptions_fail_when_disturbance_invisible() {
        // Output reads state 1 but the disturbance drives state 2.
        let plant = toy_plant(2, Matrix::zeros(2, 0), Matrix::from_column_slice(2, 1, &[0.0, 1.0]));
        let node = NodeSpec {
            index: 0,
            c: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            known_input_columns: vec![],
        };
        let report = check_assumptions(&plant, &node, &tol()).unwrap();
        assert!(report.b_bar_full_column_rank);
        assert!(report.c_full_row_rank);
        assert!(!report.c_b_bar_full_column_rank);
        assert!(!report.pass());
    }

    #[test]
    fn assumptions_fail_on_duplicated_unknown_column() {
        let b_w = Matrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let plant = toy_plant(2, Matrix::zeros(2, 0), b_w);
        let node = NodeSpec {
            index: 0,
            c: Matrix::identity(2, 2),
            known_input_columns: vec![],
        };
        let report = check_assumptions(&plant, &node, &tol()).unwrap();
        assert!(!report.b_bar_full_column_rank);
    }

    #[test]
    fn decoupler_with_full_input_knowledge_is_trivial() {
        // No unknown channels at all: E = 0 and P = I.
        let plant = toy_plant(3, Matrix::identity(3, 3), Matrix::zeros(3, 0));
        let node = NodeSpec {
            index: 0,
            c: Matrix::identity(3, 3),
            known_input_columns: vec![0, 1, 2],
        };
        let dec = disturbance_decoupler(&plant, &node, &tol()).unwrap();
        assert_eq!(dec.e, Matrix::zeros(3, 3));
        assert_eq!(dec.p, Matrix::identity(3, 3));
    }

    #[test]
    fn decoupler_for_single_scaled_disturbance_channel() {
        // 9-state plant, disturbance 0.1*e9, outputs reading states 2,5,6,9:
        // E gets a single -1 entry on the row/output pair that sees the
        // disturbance and P deflates exactly that state.
        let n = 9;
        let mut b_w = Matrix::zeros(n, 1);
        b_w[(8, 0)] = 0.1;
        let plant = toy_plant(n, Matrix::zeros(n, 0), b_w);
        let mut c = Matrix::zeros(4, n);
        c[(0, 1)] = 1.0;
        c[(1, 4)] = 1.0;
        c[(2, 5)] = 1.0;
        c[(3, 8)] = 1.0;
        let node = NodeSpec {
            index: 3,
            c,
            known_input_columns: vec![],
        };
        let dec = disturbance_decoupler(&plant, &node, &tol()).unwrap();
        let mut expected_e = Matrix::zeros(n, 4);
        expected_e[(8, 3)] = -1.0;
        assert!((dec.e - expected_e).norm() < 1e-9);
        let mut expected_p = Matrix::identity(n, n);
        expected_p[(8, 8)] = 0.0;
        assert!((dec.p - expected_p).norm() < 1e-9);
    }

    #[test]
    fn decoupler_with_full_state_output_projects_out_disturbance() {
        let mut b_w = Matrix::zeros(3, 1);
        b_w[(0, 0)] = 1.0;
        let plant = toy_plant(3, Matrix::zeros(3, 0), b_w);
        let node = NodeSpec {
            index: 0,
            c: Matrix::identity(3, 3),
            known_input_columns: vec![],
        };
        let dec = disturbance_decoupler(&plant, &node, &tol()).unwrap();
        let mut expected_p = Matrix::identity(3, 3);
        expected_p[(0, 0)] = 0.0;
        assert!((dec.p - expected_p).norm() < 1e-9);
    }

    #[test]
    fn decoupler_is_rejected_when_assumptions_fail() {
        let plant = toy_plant(2, Matrix::zeros(2, 0), Matrix::from_column_slice(2, 1, &[0.0, 1.0]));
        let node = NodeSpec {
            index: 0,
            c: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            known_input_columns: vec![],
        };
        assert!(matches!(
            disturbance_decoupler(&plant, &node, &tol()),
            Err(DecompError::UioNotConstructible { .. })
        ));
    }

    #[test]
    fn detectability_split_keeps_unstable_unobservable_mode() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 2.0]));
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let dec = detectability_decomposition(&a, &c, &tol()).unwrap();
        assert_eq!(dec.nu, 1);
        assert_abs_diff_eq!(dec.u[(1, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.a_id[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.a_iu[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.a_ir[(0, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.c_id[(0, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn detectability_split_drops_stable_unobservable_mode() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.9]));
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let dec = detectability_decomposition(&a, &c, &tol()).unwrap();
        assert_eq!(dec.nu, 0);
        assert_eq!(dec.d, Matrix::identity(2, 2));
    }

    #[test]
    fn observability_split_keeps_stable_unobservable_mode() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.9]));
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let dec = observability_decomposition(&a, &c, &tol()).unwrap();
        assert_eq!(dec.nu, 1);
        assert_abs_diff_eq!(dec.u[(1, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.a_iu[(0, 0)], 0.9, epsilon = 1e-12);
    }

    #[test]
    fn observable_pair_yields_identity_basis() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        for dec in [
            detectability_decomposition(&a, &c, &tol()).unwrap(),
            observability_decomposition(&a, &c, &tol()).unwrap(),
        ] {
            assert_eq!(dec.nu, 0);
            assert_eq!(dec.d, Matrix::identity(2, 2));
            assert_eq!(dec.u.shape(), (2, 0));
        }
    }

    #[test]
    fn full_state_output_is_always_observable() {
        let a = Matrix::from_row_slice(2, 2, &[1.3, 0.4, 0.0, 0.2]);
        let c = Matrix::identity(2, 2);
        let dec = observability_decomposition(&a, &c, &tol()).unwrap();
        assert_eq!(dec.nu, 0);
    }

    #[test]
    fn triangular_blocks_reconstruct_the_operator() {
        // Mixed case: two unobservable modes, one stable and one unstable.
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.9, 1.2]));
        let c = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let dec = detectability_decomposition(&a, &c, &tol()).unwrap();
        assert_eq!(dec.nu, 1);
        let n = 3;
        let mut basis = Matrix::zeros(n, n);
        basis.view_mut((0, 0), (n, n - dec.nu)).copy_from(&dec.d);
        basis
            .view_mut((0, n - dec.nu), (n, dec.nu))
            .copy_from(&dec.u);
        let mut blocks = Matrix::zeros(n, n);
        blocks
            .view_mut((0, 0), (n - dec.nu, n - dec.nu))
            .copy_from(&dec.a_id);
        blocks
            .view_mut((n - dec.nu, 0), (dec.nu, n - dec.nu))
            .copy_from(&dec.a_ir);
        blocks
            .view_mut((n - dec.nu, n - dec.nu), (dec.nu, dec.nu))
            .copy_from(&dec.a_iu);
        let reconstructed = &basis * blocks * basis.transpose();
        assert!((reconstructed - a).norm() < 1e-8);
    }
}
