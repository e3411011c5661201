//! Built-in benchmark scenarios with embedded plant data: a six-state
//! unstable process watched by a five-node ring, and a nine-state heat
//! exchange network watched by four nodes under two topologies.

use duio_core::decomp::{DecompositionMode, NodeSpec, PlantModel};
use duio_core::graph::CommGraph;
use duio_core::sim::{ControllerMode, ControllerSpec, NoiseSpec, Scenario, SignalSpec};
use duio_core::{Matrix, Vector};

use crate::pipeline::DesignOptions;

/// A named, fully specified scenario ready for the pipeline.
pub struct BuiltinScenario {
    /// Identifier accepted wherever a scenario path is expected.
    pub id: &'static str,
    /// One-line description for listings.
    pub summary: &'static str,
    /// The scenario itself.
    pub scenario: Scenario,
    /// Synthesis options the scenario was tuned for.
    pub options: DesignOptions,
    /// Reference consensus-gain vector recorded for this scenario, reported
    /// alongside fresh designs for regression comparison. Agreement is
    /// expected but not required: the gain program's optimum need not be
    /// unique.
    pub reference_g: Option<Vec<f64>>,
}

/// Identifiers of all built-in scenarios.
pub const BUILTIN_IDS: [&str; 3] = ["example1-ring5", "heatx-ring4", "heatx-split"];

/// Looks up a built-in scenario by id.
pub fn builtin(id: &str) -> Option<BuiltinScenario> {
    match id {
        "example1-ring5" => Some(example1_ring5()),
        "heatx-ring4" => Some(heat_exchange(
            CommGraph::ring(4),
            "heatx-ring4",
            "9-state heat exchange network, 4 nodes in a ring",
            vec![0.3335, 0.3348, 0.3315, 0.3330],
        )),
        "heatx-split" => Some(heat_exchange(
            CommGraph::new(4, &[(0, 1), (2, 3)]).expect("static edge list"),
            "heatx-split",
            "9-state heat exchange network, 4 nodes in two disconnected pairs",
            vec![0.6690, 0.6685, 0.1434, 0.1428],
        )),
        _ => None,
    }
}

/// Six-state unstable plant with one disturbance channel, watched by five
/// two-output nodes in a ring. Nodes 0 and 2 cannot read the third input
/// channel, so it joins the disturbance in their unknown-input set.
fn example1_ring5() -> BuiltinScenario {
    #[rustfmt::skip]
    let a = 0.1 * Matrix::from_row_slice(6, 6, &[
        10.39,  0.0,   0.0,   0.0,   0.0,   0.0,
         0.31, 10.36,  0.0,   0.0,   0.0,   0.0,
         1.59,  0.67, 11.06,  0.0,   0.0,   0.0,
         0.25,  0.0,   0.0,  10.58,  0.0,   0.0,
         0.01,  0.0,   0.0,   0.48, 11.26, -0.02,
         0.00,  0.0,   0.0,   0.05,  2.46, 11.05,
    ]);
    #[rustfmt::skip]
    let b = Matrix::from_row_slice(6, 3, &[
        0.0,    0.0,     0.1019,
        0.1018, 0.0,     0.0015,
        0.0033, 0.0,     0.0078,
        0.0,    0.1029,  0.0012,
        0.0,    0.1085, -0.0001,
        0.0,    0.0120,  0.1052,
    ]);
    let b_w = Matrix::from_column_slice(6, 1, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.1]);
    #[rustfmt::skip]
    let c_rows: [(&[f64], Vec<usize>); 5] = [
        (&[1., 0., 0., 0., 0., 1.,   1., 1., 0., 0., 0., 0.], vec![0, 1]),
        (&[1., 0., 1., 0., 0., 1.,   0., 1., 0., 1., 0., 1.], vec![0, 1, 2]),
        (&[1., 0., 0., 0., 0., 0.,   0., 0., 0., 0., 0., 1.], vec![0, 1]),
        (&[0., 0., 0., 1., 0., 0.,   0., 0., 0., 0., 0., 1.], vec![0, 1, 2]),
        (&[0., 0., 0., 0., 1., 1.,   0., 0., 0., 0., 0., 1.], vec![0, 1, 2]),
    ];
    let nodes = c_rows
        .iter()
        .enumerate()
        .map(|(i, (rows, known))| NodeSpec {
            index: i,
            c: Matrix::from_row_slice(2, 6, rows),
            known_input_columns: known.clone(),
        })
        .collect();
    let scenario = Scenario {
        plant: PlantModel { a, b, b_w, t_c: 0.1 },
        nodes,
        graph: CommGraph::ring(5),
        noise: NoiseSpec::Scalar { variance: 1e-3 },
        unknown_input: SignalSpec::Sinusoid {
            amplitude: 2.0,
            period: 60.0,
        },
        controller: ControllerSpec {
            mode: ControllerMode::Lqr {
                q: Matrix::identity(6, 6),
                r: Matrix::identity(3, 3),
            },
            x_ref: Vector::zeros(6),
        },
        horizon: 600,
        decomposition_mode: DecompositionMode::Detectability,
        seed: 42,
        x0: Vector::from_element(6, 0.1),
    };
    BuiltinScenario {
        id: "example1-ring5",
        summary: "6-state unstable plant, 5 nodes in a ring",
        scenario,
        options: DesignOptions::default(),
        reference_g: Some(vec![0.4962, 0.4992, 0.4976, 0.4894, 0.4702]),
    }
}

/// Nine-state symmetric heat exchange plant with four inputs and one
/// disturbance channel. Node `i` reads input channels `{i, 3}` (node 3 only
/// channel 3) and a three- or four-sensor subset of the states; the
/// undetectable subspaces are large, so the consensus coupling carries most
/// of the reconstruction.
fn heat_exchange(
    graph: CommGraph,
    id: &'static str,
    summary: &'static str,
    reference_g: Vec<f64>,
) -> BuiltinScenario {
    #[rustfmt::skip]
    let a = 1e-3 * Matrix::from_row_slice(9, 9, &[
        844.4, 114.0,   8.3,  23.4,   5.9,   0.8,   2.8,   0.5,   0.0,
        114.0, 695.7, 103.6,   4.4,  60.5,  14.0,   0.5,   6.4,   0.8,
          8.3, 103.6, 704.2,   0.4,   9.4, 162.8,   0.0,   1.0,  10.4,
         23.4,   4.4,   0.4, 721.4,  61.7,   1.9, 174.7,  11.7,   0.4,
          5.9,  60.5,   9.4,  61.7, 658.8,  40.4,  11.9, 142.1,   9.3,
          0.8,  14.0, 162.8,   1.9,  40.4, 682.6,   0.3,   8.2,  89.1,
          2.8,   0.5,   0.0, 174.7,  11.9,   0.3, 763.2,  44.5,   2.1,
          0.5,   6.4,   1.0,  11.7, 142.1,   8.2,  44.5, 717.0,  68.7,
          0.0,   0.8,  10.4,   0.4,   9.3,  89.1,   2.1,  68.7, 819.2,
    ]);
    #[rustfmt::skip]
    let b = Matrix::from_row_slice(4, 9, &[
        0.4, 5.0, 0.4, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.2, 0.0, 0.2, 4.9, 0.1, 0.0, 0.5, 0.0,
        0.0, 0.0, 0.6, 0.0, 0.1, 5.0, 0.0, 0.0, 0.3,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ]).transpose();
    let mut b_w = Matrix::zeros(9, 1);
    b_w[(8, 0)] = 0.1;
    // Each node selects a handful of states with unit rows.
    let sensor_states: [&[usize]; 4] = [&[4, 5, 8], &[1, 5, 8], &[1, 4, 8], &[1, 4, 5, 8]];
    let known: [&[usize]; 4] = [&[0, 3], &[1, 3], &[2, 3], &[3]];
    let nodes = sensor_states
        .iter()
        .zip(&known)
        .enumerate()
        .map(|(i, (states, known))| {
            let mut c = Matrix::zeros(states.len(), 9);
            for (row, &s) in states.iter().enumerate() {
                c[(row, s)] = 1.0;
            }
            NodeSpec {
                index: i,
                c,
                known_input_columns: known.to_vec(),
            }
        })
        .collect();
    let scenario = Scenario {
        plant: PlantModel {
            a,
            b,
            b_w,
            t_c: 60.0,
        },
        nodes,
        graph,
        noise: NoiseSpec::Scalar { variance: 0.2 },
        unknown_input: SignalSpec::Sinusoid {
            amplitude: 2.0,
            period: 6000.0,
        },
        controller: ControllerSpec {
            mode: ControllerMode::Lqr {
                q: Matrix::identity(9, 9),
                r: Matrix::identity(4, 4),
            },
            x_ref: Vector::from_element(9, 18.0),
        },
        horizon: 100,
        decomposition_mode: DecompositionMode::Observability,
        seed: 42,
        x0: Vector::zeros(9),
    };
    BuiltinScenario {
        id,
        summary,
        scenario,
        options: DesignOptions::default(),
        reference_g: Some(reference_g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_resolves_and_validates() {
        for id in BUILTIN_IDS {
            let b = builtin(id).expect(id);
            assert_eq!(b.id, id);
            b.scenario.validate().expect(id);
        }
        assert!(builtin("no-such-scenario").is_none());
    }

    #[test]
    fn example1_layout_matches_its_description() {
        let b = builtin("example1-ring5").unwrap();
        let s = &b.scenario;
        assert_eq!(s.plant.n_x(), 6);
        assert_eq!(s.plant.n_u(), 3);
        assert_eq!(s.plant.n_w(), 1);
        assert_eq!(s.nodes.len(), 5);
        assert!(s.nodes.iter().all(|n| n.n_y() == 2));
        // Ring Laplacian: every diagonal entry is the degree 2.
        let lap = s.graph.laplacian();
        for i in 0..5 {
            assert_eq!(lap[(i, i)], 2.0);
        }
        assert_eq!(b.reference_g.as_ref().unwrap().len(), 5);
        // The plant must actually be unstable for the design to be
        // interesting.
        let rho = duio_core::linalg::spectral_radius(&s.plant.a).unwrap();
        assert!(rho > 1.0, "rho = {rho}");
    }

    #[test]
    fn heat_exchange_layout_matches_its_description() {
        let b = builtin("heatx-split").unwrap();
        let s = &b.scenario;
        assert_eq!(s.plant.n_x(), 9);
        assert_eq!(s.plant.n_u(), 4);
        assert_eq!(s.nodes.len(), 4);
        assert_eq!(
            s.graph.edges().collect::<Vec<_>>(),
            vec![(0, 1), (2, 3)]
        );
        assert_eq!(s.graph.connected_components().len(), 2);
        // Symmetric plant sitting essentially on the stability boundary.
        assert!((&s.plant.a - s.plant.a.transpose()).norm() < 1e-12);
        let rho = duio_core::linalg::spectral_radius(&s.plant.a).unwrap();
        assert!((rho - 1.0).abs() < 1e-3, "rho = {rho}");
        let ring = builtin("heatx-ring4").unwrap();
        assert_eq!(ring.scenario.graph.connected_components().len(), 1);
        assert_eq!(ring.scenario.plant, s.plant);
    }
}
