//! Deterministic lockstep simulation of the plant, the state-feedback
//! controller, and the distributed observer network: seeded measurement
//! noise, scripted unknown inputs, two-phase estimation rounds, and trace
//! collection with summary statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomp::{DecompositionMode, NodeSpec, PlantModel};
use crate::graph::CommGraph;
use crate::linalg::{Matrix, Vector};
use crate::synthesis::ObserverNetworkDesign;

/// Error norms below this threshold count as converged in trace summaries.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-6;

/// Iteration cap for the Riccati fixed-point recursion.
const RICCATI_MAX_ITERS: usize = 10_000;

/// Errors from scenario validation and simulation.
#[derive(Debug, Error)]
pub enum SimError {
    /// The Riccati recursion failed to reach a fixed point (unstabilizable
    /// pair or too tight a tolerance).
    #[error("Riccati recursion did not converge within {0} iterations")]
    RiccatiDiverged(usize),
    /// The scenario is internally inconsistent or disagrees with the design.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    /// The two-phase round contract was broken (state vectors missing or of
    /// the wrong dimension when a neighbor's estimate is read).
    #[error("round protocol violated: {0}")]
    ProtocolViolation(String),
}

// ---------------------------------------------------------------------------
// Scenario description
// ---------------------------------------------------------------------------

/// Scripted scalar signal driving the unknown-disturbance channels. The
/// scalar value is broadcast across all disturbance columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    /// Identically zero.
    Zero,
    /// Constant amplitude.
    Constant { amplitude: f64 },
    /// `amplitude * sin(2*pi * k * t_c / period)`, with `period` in the same
    /// time unit as the sampling step `t_c`.
    Sinusoid { amplitude: f64, period: f64 },
    /// Explicit per-step values; zero beyond the end of the table.
    Tabulated { values: Vec<f64> },
}

impl SignalSpec {
    /// Signal value at step `k` for sampling time `t_c`.
    pub fn value(&self, k: usize, t_c: f64) -> f64 {
        match self {
            SignalSpec::Zero => 0.0,
            SignalSpec::Constant { amplitude } => *amplitude,
            SignalSpec::Sinusoid { amplitude, period } => {
                amplitude * (2.0 * std::f64::consts::PI * k as f64 * t_c / period).sin()
            }
            SignalSpec::Tabulated { values } => values.get(k).copied().unwrap_or(0.0),
        }
    }
}

/// Measurement-noise covariance over the stacked outputs of all nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// `variance * I` on every output channel.
    Scalar { variance: f64 },
    /// Independent channels with per-output variances.
    Diagonal { variances: Vec<f64> },
    /// Full covariance matrix over the stacked outputs.
    Matrix { covariance: Matrix },
}

impl NoiseSpec {
    /// Expands to a full covariance over `dim` stacked outputs.
    pub fn covariance(&self, dim: usize) -> Result<Matrix, SimError> {
        match self {
            NoiseSpec::Scalar { variance } => {
                if !variance.is_finite() || *variance < 0.0 {
                    return Err(SimError::InvalidScenario(
                        "noise variance must be finite and nonnegative".into(),
                    ));
                }
                Ok(*variance * Matrix::identity(dim, dim))
            }
            NoiseSpec::Diagonal { variances } => {
                if variances.len() != dim {
                    return Err(SimError::InvalidScenario(format!(
                        "{} noise variances for {dim} outputs",
                        variances.len()
                    )));
                }
                if variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(SimError::InvalidScenario(
                        "noise variances must be finite and nonnegative".into(),
                    ));
                }
                Ok(Matrix::from_diagonal(&Vector::from_vec(variances.clone())))
            }
            NoiseSpec::Matrix { covariance } => {
                if covariance.shape() != (dim, dim) {
                    return Err(SimError::InvalidScenario(format!(
                        "noise covariance is {}x{} for {dim} outputs",
                        covariance.nrows(),
                        covariance.ncols()
                    )));
                }
                Ok(covariance.clone())
            }
        }
    }
}

/// State-feedback controller choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ControllerMode {
    /// Infinite-horizon LQR weights; the feedback gain is computed from the
    /// Riccati fixed point at scenario start.
    Lqr { q: Matrix, r: Matrix },
    /// Open loop: `u = 0`.
    None,
}

/// Controller configuration: mode plus the reference the feedback acts on
/// (`u = F (x - x_ref)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    /// Feedback mode.
    #[serde(flatten)]
    pub mode: ControllerMode,
    /// Reference state.
    pub x_ref: Vector,
}

/// Complete simulation configuration: the plant and node layout the design
/// was synthesized for, plus signals, noise, controller, and run length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Global plant.
    pub plant: PlantModel,
    /// Sensor nodes, in network order.
    pub nodes: Vec<NodeSpec>,
    /// Communication topology.
    pub graph: CommGraph,
    /// Measurement-noise covariance over the stacked outputs.
    pub noise: NoiseSpec,
    /// Unknown-input script.
    pub unknown_input: SignalSpec,
    /// Controller configuration.
    pub controller: ControllerSpec,
    /// Number of simulated transitions; the trace holds `horizon + 1` steps.
    pub horizon: usize,
    /// Which decomposition the design pipeline should use.
    pub decomposition_mode: DecompositionMode,
    /// Seed of the measurement-noise stream.
    pub seed: u64,
    /// Initial plant state.
    pub x0: Vector,
}

impl Scenario {
    /// Total stacked output dimension across nodes.
    pub fn total_outputs(&self) -> usize {
        self.nodes.iter().map(NodeSpec::n_y).sum()
    }

    /// Checks dimensional consistency of every section.
    pub fn validate(&self) -> Result<(), SimError> {
        self.plant
            .validate()
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if self.nodes.is_empty() {
            return Err(SimError::InvalidScenario("no nodes".into()));
        }
        for node in &self.nodes {
            node.validate(&self.plant)
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        }
        if self.graph.node_count() != self.nodes.len() {
            return Err(SimError::InvalidScenario(format!(
                "graph has {} nodes, scenario has {}",
                self.graph.node_count(),
                self.nodes.len()
            )));
        }
        if self.horizon == 0 {
            return Err(SimError::InvalidScenario("horizon must be at least 1".into()));
        }
        if self.x0.len() != self.plant.n_x() {
            return Err(SimError::InvalidScenario(format!(
                "initial state has dimension {}, plant has {}",
                self.x0.len(),
                self.plant.n_x()
            )));
        }
        if self.controller.x_ref.len() != self.plant.n_x() {
            return Err(SimError::InvalidScenario(
                "reference state dimension disagrees with the plant".into(),
            ));
        }
        if let ControllerMode::Lqr { q, r } = &self.controller.mode {
            let (n, nu) = (self.plant.n_x(), self.plant.n_u());
            if q.shape() != (n, n) || r.shape() != (nu, nu) {
                return Err(SimError::InvalidScenario(
                    "LQR weight dimensions disagree with the plant".into(),
                ));
            }
        }
        self.noise.covariance(self.total_outputs()).map(|_| ())
    }
}

// ---------------------------------------------------------------------------
// Controller and noise
// ---------------------------------------------------------------------------

/// Computes the infinite-horizon LQR state-feedback gain `F` (so that
/// `u = F x` minimizes the quadratic cost) by iterating the discrete
/// Riccati recursion to a fixed point with relative tolerance `tol`.
pub fn lqr_state_feedback(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    tol: f64,
) -> Result<Matrix, SimError> {
    let n = a.nrows();
    let nu = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (nu, nu) {
        return Err(SimError::InvalidScenario(
            "LQR matrices have inconsistent dimensions".into(),
        ));
    }
    // With no actuation the recursion is a pure Lyapunov iteration and the
    // gain is empty (nalgebra's LU cannot factor 0x0 systems).
    let negated_gain = |p: &Matrix| -> Result<Matrix, SimError> {
        if nu == 0 {
            return Ok(Matrix::zeros(0, n));
        }
        let btpb = r + b.transpose() * p * b;
        let btpa = b.transpose() * p * a;
        btpb.lu().solve(&btpa).ok_or_else(|| {
            SimError::InvalidScenario("R + B'PB is singular; R must be positive definite".into())
        })
    };
    let mut p = q.clone();
    for _ in 0..RICCATI_MAX_ITERS {
        let gain = negated_gain(&p)?;
        let p_next = q + a.transpose() * &p * a - a.transpose() * &p * b * &gain;
        if !p_next.iter().all(|v| v.is_finite()) {
            return Err(SimError::RiccatiDiverged(RICCATI_MAX_ITERS));
        }
        // Max-entry comparison: a Frobenius norm would overflow to infinity
        // (and fake convergence) once the divergent iterates near 1e308.
        let delta = (&p_next - &p).amax();
        p = p_next;
        if delta.is_finite() && delta <= tol * p.amax().max(1.0) {
            return Ok(-negated_gain(&p)?);
        }
    }
    Err(SimError::RiccatiDiverged(RICCATI_MAX_ITERS))
}

/// Reproducible stream of zero-mean Gaussian vectors with a fixed
/// covariance: the covariance is factorized once through its symmetric
/// square root, and each step consumes one standard-normal draw per output
/// from a counter-based generator.
pub struct GaussianNoiseStream {
    factor: Matrix,
    rng: ChaCha8Rng,
    dim: usize,
}

impl GaussianNoiseStream {
    /// Validates positive semidefiniteness and factorizes the covariance.
    pub fn new(seed: u64, covariance: &Matrix) -> Result<Self, SimError> {
        let dim = covariance.nrows();
        if covariance.ncols() != dim {
            return Err(SimError::InvalidScenario(
                "noise covariance must be square".into(),
            ));
        }
        let asym = (covariance - covariance.transpose()).norm();
        if asym > 1e-10 * covariance.norm().max(1.0) {
            return Err(SimError::InvalidScenario(
                "noise covariance must be symmetric".into(),
            ));
        }
        let eig = (0.5 * (covariance + covariance.transpose())).symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale.max(1.0)) {
            return Err(SimError::InvalidScenario(
                "noise covariance is not positive semidefinite".into(),
            ));
        }
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * Matrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        Ok(GaussianNoiseStream {
            factor,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim,
        })
    }

    /// Draws the next noise vector.
    pub fn next_vector(&mut self) -> Vector {
        let z = Vector::from_fn(self.dim, |_, _| StandardNormal.sample(&mut self.rng));
        &self.factor * z
    }
}

// ---------------------------------------------------------------------------
// Runtime state and round execution
// ---------------------------------------------------------------------------

/// Mutable per-node runtime state of the estimation recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRuntimeState {
    /// Internal observer state; starts at zero.
    pub xi: Vector,
    /// Current-round state estimate (phase-1 output).
    pub x_hat: Vector,
}

impl NodeRuntimeState {
    /// Fresh state of dimension `n_x`, with the zero initialization the
    /// recursion is defined for.
    pub fn new(n_x: usize) -> Self {
        NodeRuntimeState {
            xi: Vector::zeros(n_x),
            x_hat: Vector::zeros(n_x),
        }
    }
}

/// Exact plant update `x(k+1) = A x + B u + B_w w`.
pub fn plant_step(plant: &PlantModel, x: &Vector, u: &Vector, w: &Vector) -> Vector {
    &plant.a * x + &plant.b * u + &plant.b_w * w
}

/// Executes one synchronous estimation round.
///
/// Phase 1 reconstructs every node's estimate from its own fresh
/// measurement: `x_hat_i = xi_i - E_i y_i`. Phase 2 then advances every
/// internal state using the phase-1 estimates of the node's neighbors, so no
/// node ever reads a phase-2 result from the same round:
/// `xi_i' = (P_i A - K_i C_i) xi_i + L_i y_i + P_i B_i u_i - G_i * sum_j
/// a_ij (x_hat_i - x_hat_j)`.
pub fn observer_round(
    states: &mut [NodeRuntimeState],
    y: &[Vector],
    u_known: &[Vector],
    design: &ObserverNetworkDesign,
    plant: &PlantModel,
) -> Result<(), SimError> {
    let m = design.nodes.len();
    let n = plant.n_x();
    if states.len() != m || y.len() != m || u_known.len() != m {
        return Err(SimError::ProtocolViolation(format!(
            "round started with {} states, {} outputs, {} inputs for {m} nodes",
            states.len(),
            y.len(),
            u_known.len()
        )));
    }

    // Phase 1: local reconstruction.
    for (i, node) in design.nodes.iter().enumerate() {
        if states[i].xi.len() != n {
            return Err(SimError::ProtocolViolation(format!(
                "node {i} entered the round with a state of dimension {}",
                states[i].xi.len()
            )));
        }
        if y[i].len() != node.spec.n_y() {
            return Err(SimError::InvalidScenario(format!(
                "node {i} received an output of dimension {}, expected {}",
                y[i].len(),
                node.spec.n_y()
            )));
        }
        states[i].x_hat = &states[i].xi - &node.decoupler.e * &y[i];
    }

    // Phase 2: advance internal states from phase-1 estimates only.
    let mut next_xi = Vec::with_capacity(m);
    for (i, node) in design.nodes.iter().enumerate() {
        if u_known[i].len() != node.spec.known_input_columns.len() {
            return Err(SimError::InvalidScenario(format!(
                "node {i} received {} known-input entries, expected {}",
                u_known[i].len(),
                node.spec.known_input_columns.len()
            )));
        }
        let mut consensus = Vector::zeros(n);
        for j in 0..m {
            if j == i {
                continue;
            }
            let lij = design.laplacian[(i, j)];
            if lij == 0.0 {
                continue;
            }
            if states[j].x_hat.len() != n {
                return Err(SimError::ProtocolViolation(format!(
                    "node {i} read a neighbor estimate of dimension {}",
                    states[j].x_hat.len()
                )));
            }
            // Off-diagonal Laplacian entries are minus the edge weights.
            consensus += (-lij) * (&states[i].x_hat - &states[j].x_hat);
        }
        let b_known = node.spec.b_known(plant);
        let xi_next = (&node.decoupler.p * &plant.a - &node.k * &node.spec.c) * &states[i].xi
            + &node.l * &y[i]
            + &node.decoupler.p * b_known * &u_known[i]
            - &node.consensus_gain * consensus;
        next_xi.push(xi_next);
    }
    for (state, xi) in states.iter_mut().zip(next_xi) {
        state.xi = xi;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// One recorded simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Step index.
    pub k: usize,
    /// True plant state.
    pub x: Vector,
    /// Applied control input.
    pub u: Vector,
    /// Unknown-input scalar at this step.
    pub w: f64,
    /// Per-node state estimates.
    pub x_hat: Vec<Vector>,
    /// Per-node estimation-error norms.
    pub err_norm: Vec<f64>,
}

/// Summary statistics over one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// Per-node RMS error over the last tenth of the trace.
    pub rms_per_node: Vec<f64>,
    /// Largest error norm over all steps and nodes.
    pub peak_error: f64,
    /// First step after which every node's error stays below
    /// [`CONVERGENCE_THRESHOLD`] for the rest of the trace.
    pub convergence_step: Option<usize>,
}

/// Full simulation output: per-step records plus the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    /// `horizon + 1` step records.
    pub records: Vec<StepRecord>,
    /// Aggregate statistics.
    pub summary: TraceSummary,
}

fn summarize(records: &[StepRecord]) -> TraceSummary {
    let m = records.first().map_or(0, |r| r.err_norm.len());
    let window = (records.len() / 10).max(1).min(records.len());
    let tail = &records[records.len() - window..];
    let rms_per_node = (0..m)
        .map(|i| {
            let mean_sq: f64 =
                tail.iter().map(|r| r.err_norm[i] * r.err_norm[i]).sum::<f64>() / window as f64;
            mean_sq.sqrt()
        })
        .collect();
    let peak_error = records
        .iter()
        .flat_map(|r| r.err_norm.iter().copied())
        .fold(0.0_f64, f64::max);
    let mut convergence_step = None;
    for record in records.iter().rev() {
        if record
            .err_norm
            .iter()
            .all(|&e| e < CONVERGENCE_THRESHOLD)
        {
            convergence_step = Some(record.k);
        } else {
            break;
        }
    }
    TraceSummary {
        rms_per_node,
        peak_error,
        convergence_step,
    }
}

/// Runs the full lockstep loop: at each step the controller computes
/// `u = F (x - x_ref)` from the true state, every node measures with fresh
/// noise, one estimation round executes, the step is recorded, and the plant
/// advances under the scripted unknown input.
pub fn run_scenario(
    scenario: &Scenario,
    design: &ObserverNetworkDesign,
) -> Result<TraceSet, SimError> {
    scenario.validate()?;
    let m = scenario.nodes.len();
    if design.nodes.len() != m {
        return Err(SimError::InvalidScenario(format!(
            "design has {} nodes, scenario has {m}",
            design.nodes.len()
        )));
    }
    if design.laplacian != scenario.graph.laplacian() {
        return Err(SimError::InvalidScenario(
            "design was synthesized for a different communication graph".into(),
        ));
    }
    for (node, spec) in design.nodes.iter().zip(&scenario.nodes) {
        if node.spec != *spec {
            return Err(SimError::InvalidScenario(format!(
                "design node {} disagrees with the scenario node layout",
                spec.index
            )));
        }
    }

    let plant = &scenario.plant;
    let n = plant.n_x();
    let feedback = match &scenario.controller.mode {
        ControllerMode::Lqr { q, r } => lqr_state_feedback(&plant.a, &plant.b, q, r, 1e-12)?,
        ControllerMode::None => Matrix::zeros(plant.n_u(), n),
    };
    let covariance = scenario.noise.covariance(scenario.total_outputs())?;
    let mut noise = GaussianNoiseStream::new(scenario.seed, &covariance)?;

    let mut x = scenario.x0.clone();
    let mut states: Vec<NodeRuntimeState> = (0..m).map(|_| NodeRuntimeState::new(n)).collect();
    let mut records = Vec::with_capacity(scenario.horizon + 1);

    for k in 0..=scenario.horizon {
        let stacked = noise.next_vector();
        let mut y = Vec::with_capacity(m);
        let mut offset = 0;
        for spec in &scenario.nodes {
            let ny = spec.n_y();
            let v = stacked.rows(offset, ny).clone_owned();
            offset += ny;
            y.push(&spec.c * &x + v);
        }

        let u = &feedback * (&x - &scenario.controller.x_ref);
        let u_known: Vec<Vector> = scenario
            .nodes
            .iter()
            .map(|spec| {
                Vector::from_iterator(
                    spec.known_input_columns.len(),
                    spec.known_input_columns.iter().map(|&c| u[c]),
                )
            })
            .collect();

        observer_round(&mut states, &y, &u_known, design, plant)?;

        let w = scenario.unknown_input.value(k, plant.t_c);
        records.push(StepRecord {
            k,
            x: x.clone(),
            u: u.clone(),
            w,
            x_hat: states.iter().map(|s| s.x_hat.clone()).collect(),
            err_norm: states.iter().map(|s| (&s.x_hat - &x).norm()).collect(),
        });

        if k < scenario.horizon {
            let w_vec = Vector::from_element(plant.n_w(), w);
            x = plant_step(plant, &x, &u, &w_vec);
        }
    }

    let summary = summarize(&records);
    Ok(TraceSet { records, summary })
}
