//! On-disk scenario format: a single JSON document with matrices written as
//! nested row arrays. All node, edge and input-column indices are 0-based.

use duio_core::decomp::{DecompositionMode, NodeSpec, PlantModel};
use duio_core::graph::CommGraph;
use duio_core::sim::{
    ControllerMode, ControllerSpec, NoiseSpec, Scenario, SignalSpec,
};
use duio_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::pipeline::DesignOptions;

/// Root document of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    /// Plant matrices and sampling time.
    pub plant: PlantSection,
    /// Sensor nodes in network order.
    pub nodes: Vec<NodeSection>,
    /// Communication topology.
    pub graph: GraphSection,
    /// Measurement-noise covariance (exactly one form).
    pub noise: NoiseSection,
    /// Unknown-input script.
    pub unknown_input: SignalSpec,
    /// Controller configuration.
    pub controller: ControllerSection,
    /// Run length, seed, and initial state.
    pub sim: SimSection,
    /// Synthesis options.
    #[serde(default)]
    pub design: DesignSection,
}

/// Plant matrices as nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub b_w: Vec<Vec<f64>>,
    pub t_c: f64,
}

/// One node: its output matrix and the input columns it can read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSection {
    pub c: Vec<Vec<f64>>,
    #[serde(default)]
    pub known_input_columns: Vec<usize>,
}

/// Undirected topology over `m` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSection {
    pub m: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Noise covariance: either a scalar variance applied to every output or a
/// full matrix over the stacked outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

/// Controller: LQR weights (omit for open loop) plus the reference state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lqr: Option<LqrSection>,
    pub x_ref: Vec<f64>,
}

/// LQR weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrSection {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

/// Simulation length, noise seed, and initial plant state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub horizon: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
}

/// Synthesis options for the design step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSection {
    /// Which subspace split to design against.
    pub decomposition: DecompositionMode,
    /// Use the optimal noise-attenuation program (`true`) or the
    /// pole-placement fallback (`false`).
    #[serde(default = "default_true")]
    pub hinf: bool,
    /// Pole pool for the fallback; node `i` takes the first entries it
    /// needs. Supplying poles switches the fallback on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<f64>>,
}

fn default_true() -> bool {
    true
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection {
            decomposition: DecompositionMode::Detectability,
            hinf: true,
            poles: None,
        }
    }
}

/// Converts nested row arrays into a matrix, rejecting ragged rows with the
/// offending field named.
fn matrix(rows: &[Vec<f64>], field: &str) -> Result<Matrix, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(CliError::Load(format!(
                "{field}: row {r} has {} entries, expected {ncols}",
                row.len()
            )));
        }
    }
    let mut out = Matrix::zeros(nrows, ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

/// Nested row arrays from a matrix (for writing scenario files back out).
pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

impl ScenarioFile {
    /// Validates the document and converts it into the runtime scenario plus
    /// the design options it carries.
    pub fn into_scenario(self) -> Result<(Scenario, DesignOptions), CliError> {
        let plant = PlantModel {
            a: matrix(&self.plant.a, "plant.a")?,
            b: matrix(&self.plant.b, "plant.b")?,
            b_w: matrix(&self.plant.b_w, "plant.b_w")?,
            t_c: self.plant.t_c,
        };
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                Ok(NodeSpec {
                    index: i,
                    c: matrix(&node.c, &format!("nodes[{i}].c"))?,
                    known_input_columns: node.known_input_columns.clone(),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let graph = CommGraph::new(self.graph.m, &self.graph.edges)
            .map_err(|e| CliError::Load(format!("graph: {e}")))?;
        let noise = match (self.noise.scalar, &self.noise.covariance) {
            (Some(v), None) => NoiseSpec::Scalar { variance: v },
            (None, Some(rows)) => NoiseSpec::Matrix {
                covariance: matrix(rows, "noise.covariance")?,
            },
            _ => {
                return Err(CliError::Load(
                    "noise: exactly one of `scalar` and `covariance` must be given".into(),
                ))
            }
        };
        let mode = match &self.controller.lqr {
            Some(lqr) => ControllerMode::Lqr {
                q: matrix(&lqr.q, "controller.lqr.q")?,
                r: matrix(&lqr.r, "controller.lqr.r")?,
            },
            None => ControllerMode::None,
        };
        let scenario = Scenario {
            plant,
            nodes,
            graph,
            noise,
            unknown_input: self.unknown_input,
            controller: ControllerSpec {
                mode,
                x_ref: Vector::from_vec(self.controller.x_ref),
            },
            horizon: self.sim.horizon,
            seed: self.sim.seed,
            x0: Vector::from_vec(self.sim.x0),
            decomposition_mode: self.design.decomposition,
        };
        scenario
            .validate()
            .map_err(|e| CliError::Load(e.to_string()))?;
        let options = DesignOptions {
            hinf: self.design.hinf && self.design.poles.is_none(),
            poles: self.design.poles,
        };
        Ok((scenario, options))
    }

    /// Builds the document from a runtime scenario (inverse of
    /// [`ScenarioFile::into_scenario`] up to the noise representation).
    pub fn from_scenario(scenario: &Scenario, options: &DesignOptions) -> Self {
        let noise = match &scenario.noise {
            NoiseSpec::Scalar { variance } => NoiseSection {
                scalar: Some(*variance),
                covariance: None,
            },
            NoiseSpec::Diagonal { variances } => NoiseSection {
                scalar: None,
                covariance: Some(matrix_rows(&Matrix::from_diagonal(&Vector::from_vec(
                    variances.clone(),
                )))),
            },
            NoiseSpec::Matrix { covariance } => NoiseSection {
                scalar: None,
                covariance: Some(matrix_rows(covariance)),
            },
        };
        let lqr = match &scenario.controller.mode {
            ControllerMode::Lqr { q, r } => Some(LqrSection {
                q: matrix_rows(q),
                r: matrix_rows(r),
            }),
            ControllerMode::None => None,
        };
        ScenarioFile {
            plant: PlantSection {
                a: matrix_rows(&scenario.plant.a),
                b: matrix_rows(&scenario.plant.b),
                b_w: matrix_rows(&scenario.plant.b_w),
                t_c: scenario.plant.t_c,
            },
            nodes: scenario
                .nodes
                .iter()
                .map(|n| NodeSection {
                    c: matrix_rows(&n.c),
                    known_input_columns: n.known_input_columns.clone(),
                })
                .collect(),
            graph: GraphSection {
                m: scenario.graph.node_count(),
                edges: scenario.graph.edges().collect(),
            },
            noise,
            unknown_input: scenario.unknown_input.clone(),
            controller: ControllerSection {
                lqr,
                x_ref: scenario.controller.x_ref.iter().copied().collect(),
            },
            sim: SimSection {
                horizon: scenario.horizon,
                seed: scenario.seed,
                x0: scenario.x0.iter().copied().collect(),
            },
            design: DesignSection {
                decomposition: scenario.decomposition_mode,
                hinf: options.hinf,
                poles: options.poles.clone(),
            },
        }
    }
}
