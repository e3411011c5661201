//! Property-based checks of the matrix, graph, and decomposition
//! primitives: invariants that must hold for arbitrary well-formed inputs,
//! not just for the worked examples in the unit tests.

use duio_core::decomp::{
    check_assumptions, detectability_decomposition, disturbance_decoupler,
    observability_decomposition, NodeSpec, PlantModel,
};
use duio_core::graph::CommGraph;
use duio_core::linalg::{
    kernel_basis, left_pseudoinverse, observability_matrix, orthonormal_image_basis,
    rank_with_tolerance, spectral_radius, unit_circle_split,
};
use duio_core::{Matrix, Tolerance};
use proptest::prelude::*;

fn tol() -> Tolerance {
    Tolerance::default()
}

/// `‖q^T q - I‖` for an alleged orthonormal basis.
fn orthonormality_residual(q: &Matrix) -> f64 {
    let k = q.ncols();
    (q.transpose() * q - Matrix::identity(k, k)).norm()
}

/// Random matrix of the given shape with entries in `[-3, 3]`.
fn entries(nrows: usize, ncols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, nrows * ncols)
        .prop_map(move |v| Matrix::from_vec(nrows, ncols, v))
}

/// Random matrix with independently chosen dimensions up to `max_dim`.
fn any_matrix(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| entries(r, c))
}

/// Random square matrix up to `max_dim`.
fn square_matrix(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim).prop_flat_map(|n| entries(n, n))
}

/// Random rank-bounded matrix built as an `n x r` times `r x m` product.
fn low_rank_matrix(max_dim: usize) -> impl Strategy<Value = (Matrix, usize)> {
    (2..=max_dim, 2..=max_dim)
        .prop_flat_map(|(n, m)| (Just(n), Just(m), 1..n.min(m)))
        .prop_flat_map(|(n, m, r)| {
            (entries(n, r), entries(r, m)).prop_map(move |(l, rt)| (l * rt, r))
        })
}

/// Random state-space pair `(a, c)` with `a` square and `c` wide.
fn state_output_pair(max_n: usize) -> impl Strategy<Value = (Matrix, Matrix)> {
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), 1..=n))
        .prop_flat_map(|(n, p)| (entries(n, n), entries(p, n)))
}

/// Random undirected graph: node count plus an arbitrary subset of the
/// possible edges.
fn any_graph(max_m: usize) -> impl Strategy<Value = CommGraph> {
    (1..=max_m).prop_flat_map(|m| {
        let pairs: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
            .collect();
        let count = pairs.len();
        prop::collection::vec(any::<bool>(), count).prop_map(move |mask| {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .zip(&mask)
                .filter(|(_, &keep)| keep)
                .map(|(&e, _)| e)
                .collect();
            CommGraph::new(m, &edges).expect("generated edges are in range")
        })
    })
}

proptest! {
    #[test]
    fn image_basis_is_orthonormal_and_spans_the_columns(m in any_matrix(8)) {
        let q = orthonormal_image_basis(&m, &tol()).unwrap();
        prop_assert!(orthonormality_residual(&q) <= 1e-10);
        prop_assert_eq!(q.ncols(), rank_with_tolerance(&m, &tol()).unwrap());
        // Projecting onto the basis reproduces every column.
        let residual = (&m - &q * q.transpose() * &m).norm();
        prop_assert!(residual <= 1e-7 * m.norm().max(1.0), "span residual {residual:.2e}");
    }

    #[test]
    fn kernel_basis_is_orthonormal_and_annihilated(m in any_matrix(8)) {
        let k = kernel_basis(&m, &tol()).unwrap();
        prop_assert!(orthonormality_residual(&k) <= 1e-10);
        let residual = (&m * &k).norm();
        prop_assert!(residual <= 1e-7 * m.norm().max(1.0), "kernel residual {residual:.2e}");
        // Rank-nullity over the column space.
        let rank = rank_with_tolerance(&m, &tol()).unwrap();
        prop_assert_eq!(rank + k.ncols(), m.ncols());
    }

    #[test]
    fn rank_of_a_product_never_exceeds_the_inner_dimension(
        (m, r) in low_rank_matrix(8)
    ) {
        let rank = rank_with_tolerance(&m, &tol()).unwrap();
        prop_assert!(rank <= r, "rank {rank} exceeds factor width {r}");
        let k = kernel_basis(&m, &tol()).unwrap();
        prop_assert!(k.ncols() >= m.ncols() - r);
        let residual = (&m * &k).norm();
        prop_assert!(residual <= 1e-7 * m.norm().max(1.0));
    }

    #[test]
    fn left_pseudoinverse_is_a_left_inverse(m in any_matrix(6)) {
        // Only well-conditioned full-column-rank inputs are in contract.
        let tall = if m.nrows() >= m.ncols() { m } else { m.transpose() };
        let sv = tall.clone().singular_values();
        prop_assume!(sv.min() > 1e-3 * sv.max());
        let pinv = left_pseudoinverse(&tall, &tol()).unwrap();
        let c = tall.ncols();
        let residual = (pinv * &tall - Matrix::identity(c, c)).norm();
        prop_assert!(residual <= 1e-8, "left-inverse residual {residual:.2e}");
    }

    #[test]
    fn unit_circle_split_returns_invariant_orthonormal_bases(m in square_matrix(6)) {
        let split = unit_circle_split(&m, &tol()).unwrap();
        let n = m.nrows();
        let (s, u) = (&split.stable, &split.nonstable);
        prop_assert_eq!(s.ncols() + u.ncols(), n);
        prop_assert!(orthonormality_residual(s) <= 1e-10);
        prop_assert!(orthonormality_residual(u) <= 1e-10);
        let scale = m.norm().max(1.0);
        for basis in [s, u] {
            if basis.ncols() == 0 {
                continue;
            }
            // Invariance: mapping the subspace stays inside it.
            let image = &m * basis;
            let escape = (&image - basis * (basis.transpose() * &image)).norm();
            prop_assert!(escape <= 1e-8 * scale, "invariance residual {escape:.2e}");
        }
        // The restricted blocks carry eigenvalues on the advertised side of
        // the circle (when no eigenvalue sits on the classification edge).
        if !split.boundary_ambiguous {
            let margin = tol().stability_margin;
            if s.ncols() > 0 {
                let block = s.transpose() * &m * s;
                for lambda in block.complex_eigenvalues().iter() {
                    prop_assert!(lambda.norm() < 1.0 - margin + 1e-6 * scale);
                }
            }
            if u.ncols() > 0 {
                let block = u.transpose() * &m * u;
                for lambda in block.complex_eigenvalues().iter() {
                    prop_assert!(lambda.norm() >= 1.0 - margin - 1e-6 * scale);
                }
            }
        }
    }

    #[test]
    fn spectral_radius_is_bounded_by_the_largest_singular_value(m in square_matrix(8)) {
        let rho = spectral_radius(&m).unwrap();
        let sigma = m.clone().singular_values().max();
        prop_assert!(rho <= sigma + 1e-9 * sigma.max(1.0), "rho {rho} > sigma {sigma}");
    }

    #[test]
    fn laplacian_is_consistent_with_the_component_structure(g in any_graph(8)) {
        let l = g.laplacian();
        prop_assert_eq!(&l, &l.transpose());
        // Assembled from integer degree counts, so row sums are exact.
        for i in 0..l.nrows() {
            prop_assert_eq!(l.row(i).sum(), 0.0);
        }
        let edge_count = g.edges().count() as f64;
        prop_assert_eq!(l.trace(), 2.0 * edge_count);
        let eigs = l.symmetric_eigenvalues();
        prop_assert!(eigs.min() >= -1e-9);
        // The zero eigenvalue appears once per connected component.
        let zero_count = eigs.iter().filter(|&&lam| lam.abs() < 1e-7).count();
        prop_assert_eq!(zero_count, g.connected_components().len());
    }

    #[test]
    fn rings_are_connected_with_uniform_degree(m in 2..=8usize) {
        let g = CommGraph::ring(m);
        prop_assert_eq!(g.connected_components().len(), 1);
        // Two nodes share a single edge; larger rings close the loop.
        let expected_edges = if m == 2 { 1 } else { m };
        prop_assert_eq!(g.edges().count(), expected_edges);
        let adjacency = g.adjacency();
        for i in 0..m {
            prop_assert_eq!(adjacency.row(i).sum(), if m == 2 { 1.0 } else { 2.0 });
        }
    }

    #[test]
    fn observability_split_has_the_complementary_dimensions(
        (a, c) in state_output_pair(6)
    ) {
        let dec = observability_decomposition(&a, &c, &tol()).unwrap();
        let n = a.nrows();
        let obs_rank = rank_with_tolerance(&observability_matrix(&a, &c), &tol()).unwrap();
        prop_assert_eq!(dec.nu, n - obs_rank);
        prop_assert_eq!(dec.d.ncols(), obs_rank);
        // The retained pair is observable: nothing hidden remains in it.
        let retained_rank =
            rank_with_tolerance(&observability_matrix(&dec.a_id, &dec.c_id), &tol()).unwrap();
        prop_assert_eq!(retained_rank, dec.a_id.nrows());
    }

    #[test]
    fn decompositions_triangularize_and_reconstruct(
        (a, c) in state_output_pair(6),
        detect in any::<bool>(),
    ) {
        let dec = if detect {
            detectability_decomposition(&a, &c, &tol()).unwrap()
        } else {
            observability_decomposition(&a, &c, &tol()).unwrap()
        };
        let n = a.nrows();
        let scale = a.norm().max(1.0);

        // `[D U]` is a full orthonormal basis of the state space.
        let mut basis = Matrix::zeros(n, n);
        basis
            .view_mut((0, 0), (n, dec.d.ncols()))
            .copy_from(&dec.d);
        basis.view_mut((0, dec.d.ncols()), (n, dec.nu)).copy_from(&dec.u);
        prop_assert!(orthonormality_residual(&basis) <= 1e-9);

        // Block triangular: the retained block never feeds from `U`.
        let tri = (dec.d.transpose() * &a * &dec.u).norm();
        prop_assert!(tri <= 1e-7 * scale, "triangular residual {tri:.2e}");

        // The output is blind to the consensus-handled subspace.
        let blind = (&c * &dec.u).norm();
        prop_assert!(blind <= 1e-7 * c.norm().max(1.0), "blindness residual {blind:.2e}");

        // The four stored blocks tile the rotated dynamics exactly.
        let mut blocks = Matrix::zeros(n, n);
        let nd = dec.d.ncols();
        blocks.view_mut((0, 0), (nd, nd)).copy_from(&dec.a_id);
        blocks.view_mut((nd, 0), (dec.nu, nd)).copy_from(&dec.a_ir);
        blocks
            .view_mut((nd, nd), (dec.nu, dec.nu))
            .copy_from(&dec.a_iu);
        let rebuilt = &basis * blocks * basis.transpose();
        let recon = (&rebuilt - &a).norm();
        prop_assert!(recon <= 1e-7 * scale, "reconstruction residual {recon:.2e}");
    }

    #[test]
    fn detectability_keeps_a_subspace_of_the_unobservable_part(
        (a, c) in state_output_pair(6)
    ) {
        let det = detectability_decomposition(&a, &c, &tol()).unwrap();
        let obs = observability_decomposition(&a, &c, &tol()).unwrap();
        prop_assert!(det.nu <= obs.nu, "detectability split is larger");
        if det.nu > 0 {
            // Every consensus-handled direction is also unobservable.
            let escape =
                (&det.u - &obs.u * (obs.u.transpose() * &det.u)).norm();
            prop_assert!(escape <= 1e-6, "containment residual {escape:.2e}");
            // And every eigenvalue it carries refuses to decay on its own.
            if !det.boundary_ambiguous {
                let margin = tol().stability_margin;
                for lambda in det.a_iu.complex_eigenvalues().iter() {
                    prop_assert!(
                        lambda.norm() >= 1.0 - margin - 1e-4 * a.norm().max(1.0),
                        "stable mode {lambda} routed to consensus"
                    );
                }
            }
        }
    }

    #[test]
    fn decoupler_annihilates_and_projects(
        n in 3..=6usize,
        seed_a in prop::collection::vec(-3.0..3.0f64, 36),
        seed_b in prop::collection::vec(-3.0..3.0f64, 12),
        seed_c in prop::collection::vec(-3.0..3.0f64, 18),
    ) {
        let p_rows = 3usize;
        let plant = PlantModel {
            a: Matrix::from_vec(n, n, seed_a[..n * n].to_vec()),
            b: Matrix::from_vec(n, 1, seed_b[..n].to_vec()),
            b_w: Matrix::from_vec(n, 1, seed_b[6..6 + n].to_vec()),
            t_c: 1.0,
        };
        let node = NodeSpec {
            index: 0,
            c: Matrix::from_vec(p_rows, n, seed_c[..p_rows * n].to_vec()),
            known_input_columns: vec![],
        };
        // Discard the measure-zero draws that break the rank assumptions.
        let report = check_assumptions(&plant, &node, &tol()).unwrap();
        prop_assume!(report.pass());

        let decoupler = disturbance_decoupler(&plant, &node, &tol()).unwrap();
        let b_bar = node.b_bar_iw(&plant);
        let annihilation = (&decoupler.p * &b_bar).norm();
        prop_assert!(annihilation <= 1e-7 * b_bar.norm().max(1.0));
        // P = I + EC is idempotent: it projects along the disturbance span.
        let idem = (&decoupler.p * &decoupler.p - &decoupler.p).norm();
        prop_assert!(idem <= 1e-7 * decoupler.p.norm().max(1.0), "projector residual {idem:.2e}");

        // The decoupled dynamics always admit both subspace splits.
        let pa = &decoupler.p * &plant.a;
        let det = detectability_decomposition(&pa, &node.c, &tol()).unwrap();
        let obs = observability_decomposition(&pa, &node.c, &tol()).unwrap();
        prop_assert!(det.nu <= obs.nu);
    }
}
