//! The end-to-end pipeline behind every subcommand: scenario loading,
//! assumption checks, per-node analysis, network design, and simulation.

use std::fs;
use std::path::Path;

use duio_core::decomp::{
    check_assumptions, detectability_decomposition, disturbance_decoupler,
    observability_decomposition, AssumptionReport, DecompositionMode, NodeDecomposition,
    NodeDecoupler,
};
use duio_core::sdp::ClarabelSolver;
use duio_core::sim::{run_scenario, Scenario, TraceSet};
use duio_core::synthesis::{
    assemble_network, assemble_observer, design_detectable_gain_hinf,
    design_detectable_gain_poleplacement, design_diffusive_gains, verify_closed_loop,
    DetectableGainResult, ObserverNetworkDesign,
};
use duio_core::Tolerance;
use serde::Serialize;

use crate::builtin::{builtin, BuiltinScenario, BUILTIN_IDS};
use crate::error::CliError;
use crate::file::ScenarioFile;

/// Gain-synthesis options, from the scenario file or command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    /// Solve the optimal noise-attenuation program for the local gains;
    /// when false the pole-placement fallback is used.
    pub hinf: bool,
    /// Pole pool for the fallback: node `i` takes the first `dim` entries
    /// for its detectable block. `None` selects the default spread.
    pub poles: Option<Vec<f64>>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            hinf: true,
            poles: None,
        }
    }
}

/// A scenario resolved from a file or a built-in id.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    /// Display label: the builtin id or the file path.
    pub label: String,
    /// The scenario itself.
    pub scenario: Scenario,
    /// Synthesis options it carries.
    pub options: DesignOptions,
    /// Reference consensus gains for regression comparison, when recorded.
    pub reference_g: Option<Vec<f64>>,
}

impl From<BuiltinScenario> for LoadedScenario {
    fn from(b: BuiltinScenario) -> Self {
        LoadedScenario {
            label: b.id.to_string(),
            scenario: b.scenario,
            options: b.options,
            reference_g: b.reference_g,
        }
    }
}

/// Resolves a built-in id or reads and validates a scenario file.
pub fn load_scenario(source: &str) -> Result<LoadedScenario, CliError> {
    if let Some(b) = builtin(source) {
        return Ok(b.into());
    }
    if !Path::new(source).exists() {
        return Err(CliError::Load(format!(
            "`{source}` is neither a readable file nor a built-in id ({})",
            BUILTIN_IDS.join(", ")
        )));
    }
    let text = fs::read_to_string(source).map_err(|e| CliError::Io {
        path: source.to_string(),
        source: e,
    })?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| CliError::Load(format!("{source}: {e}")))?;
    let (scenario, options) = file.into_scenario()?;
    Ok(LoadedScenario {
        label: source.to_string(),
        scenario,
        options,
        reference_g: None,
    })
}

/// Evaluates the rank assumptions for every node.
pub fn check_nodes(scenario: &Scenario) -> Result<Vec<AssumptionReport>, CliError> {
    let tol = Tolerance::default();
    scenario
        .nodes
        .iter()
        .map(|node| Ok(check_assumptions(&scenario.plant, node, &tol)?))
        .collect()
}

/// Renders failing reports as one line per node; empty when all pass.
pub fn assumption_failures(reports: &[AssumptionReport]) -> Vec<String> {
    reports
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.pass())
        .map(|(i, r)| format!("node {i}: {}", r.failures().join("; ")))
        .collect()
}

/// Per-node decoupler plus subspace decomposition.
pub struct NodeAnalysis {
    /// Unknown-input decoupler.
    pub decoupler: NodeDecoupler,
    /// Subspace split of the decoupled dynamics.
    pub decomposition: NodeDecomposition,
}

/// Builds the decoupler and decomposition for every node, in the scenario's
/// decomposition mode.
pub fn analyze_nodes(scenario: &Scenario) -> Result<Vec<NodeAnalysis>, CliError> {
    let tol = Tolerance::default();
    scenario
        .nodes
        .iter()
        .map(|node| {
            let decoupler = disturbance_decoupler(&scenario.plant, node, &tol)?;
            let pa = &decoupler.p * &scenario.plant.a;
            let decomposition = match scenario.decomposition_mode {
                DecompositionMode::Detectability => {
                    detectability_decomposition(&pa, &node.c, &tol)?
                }
                DecompositionMode::Observability => {
                    observability_decomposition(&pa, &node.c, &tol)?
                }
            };
            Ok(NodeAnalysis {
                decoupler,
                decomposition,
            })
        })
        .collect()
}

/// Per-node summary of a finished design.
#[derive(Debug, Clone, Serialize)]
pub struct NodeDesignReport {
    /// Node index.
    pub node: usize,
    /// Dimension of the locally reconstructable block.
    pub detectable_dimension: usize,
    /// Dimension routed to the consensus coupling.
    pub undetectable_dimension: usize,
    /// Certified noise-attenuation level of the local gain.
    pub beta_id: f64,
    /// Certified decay-disk radius, when the optimal program produced one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_radius: Option<f64>,
}

/// Machine-readable summary of a network design.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    /// Scenario label the design was built from.
    pub scenario: String,
    /// Subspace split used.
    pub decomposition: DecompositionMode,
    /// Local-gain method: `hinf` or `pole-placement`.
    pub method: String,
    /// Per-node dimensions and attenuation levels.
    pub nodes: Vec<NodeDesignReport>,
    /// Diffusive consensus gains.
    pub g: Vec<f64>,
    /// Certified contraction level of the consensus coupling (negative
    /// when the coupled undetectable dynamics contract).
    pub beta_u: f64,
    /// Spectral radius of the decoupled detectable blocks.
    pub rho_detectable: f64,
    /// Spectral radius of the coupled undetectable blocks.
    pub rho_undetectable: f64,
    /// Spectral radius of the full error dynamics.
    pub rho_overall: f64,
    /// Whether the full error dynamics contract.
    pub stable: bool,
    /// Reference consensus gains for regression comparison, when recorded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_g: Option<Vec<f64>>,
}

/// Evenly spread default poles for the fallback design.
fn default_poles(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.2],
        _ => (0..count)
            .map(|i| 0.2 + 0.4 * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Runs the full synthesis pipeline: assumption checks, per-node analysis,
/// consensus-gain program, local-gain design, assembly, and certification.
pub fn design_network(
    loaded: &LoadedScenario,
    options: &DesignOptions,
) -> Result<(ObserverNetworkDesign, DesignReport), CliError> {
    let scenario = &loaded.scenario;
    scenario
        .validate()
        .map_err(|e| CliError::Load(e.to_string()))?;
    let analyses = analyze_nodes(scenario)?;
    let decs: Vec<NodeDecomposition> =
        analyses.iter().map(|a| a.decomposition.clone()).collect();
    let laplacian = scenario.graph.laplacian();
    let solver = ClarabelSolver;
    let diffusive = design_diffusive_gains(&decs, &laplacian, &solver)?;

    let tol = Tolerance::default();
    let mut nodes = Vec::with_capacity(scenario.nodes.len());
    let mut node_reports = Vec::with_capacity(scenario.nodes.len());
    for (i, (spec, analysis)) in scenario.nodes.iter().zip(&analyses).enumerate() {
        let dec = &analysis.decomposition;
        let gain: DetectableGainResult = if options.hinf {
            design_detectable_gain_hinf(dec, &analysis.decoupler.e, &solver)?
        } else {
            let dim = dec.d.ncols();
            let poles = match &options.poles {
                Some(pool) => {
                    if pool.len() < dim {
                        return Err(CliError::Load(format!(
                            "node {i}: the detectable block needs {dim} poles, {} given",
                            pool.len()
                        )));
                    }
                    pool[..dim].to_vec()
                }
                None => default_poles(dim),
            };
            design_detectable_gain_poleplacement(dec, &analysis.decoupler.e, &poles, &tol)?
        };
        node_reports.push(NodeDesignReport {
            node: i,
            detectable_dimension: dec.d.ncols(),
            undetectable_dimension: dec.nu,
            beta_id: gain.beta,
            decay_radius: gain.decay_radius,
        });
        nodes.push(assemble_observer(
            &scenario.plant,
            spec,
            &analysis.decoupler,
            dec,
            gain,
            diffusive.g[i],
        )?);
    }
    let design = assemble_network(nodes, &scenario.graph, &diffusive)?;
    let cert = verify_closed_loop(&design);
    let report = DesignReport {
        scenario: loaded.label.clone(),
        decomposition: scenario.decomposition_mode,
        method: if options.hinf { "hinf" } else { "pole-placement" }.to_string(),
        nodes: node_reports,
        g: diffusive.g.clone(),
        beta_u: diffusive.beta_u,
        rho_detectable: cert.rho_d,
        rho_undetectable: cert.rho_u,
        rho_overall: cert.rho_overall,
        stable: cert.stable,
        reference_g: loaded.reference_g.clone(),
    };
    Ok((design, report))
}

/// Runs the lockstep simulation for a designed network.
pub fn simulate(
    scenario: &Scenario,
    design: &ObserverNetworkDesign,
) -> Result<TraceSet, CliError> {
    Ok(run_scenario(scenario, design)?)
}
