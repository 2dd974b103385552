//! Laplacian spectrum invariants checked against a dense oracle.

use kdegraph::SparseGraph;

/// Zero eigenvalues of the unnormalized Laplacian count the connected
/// components.
#[test]
fn zero_eigenvalue_multiplicity_counts_components() {
    // One, two, and three components on the same vertex count.
    let n = 12;
    let graphs: Vec<(usize, Vec<(usize, usize, f64)>)> = vec![
        // Single path: one component.
        (
            1,
            (0..n - 1)
                .map(|i| (i, i + 1, 1.0 + 0.1 * i as f64))
                .collect(),
        ),
        // Two halves.
        (2, {
            let mut e: Vec<(usize, usize, f64)> = (0..5).map(|i| (i, i + 1, 1.0)).collect();
            e.extend((6..n - 1).map(|i| (i, i + 1, 0.5)));
            e
        }),
        // Three cycles of four.
        (3, {
            let mut e = Vec::new();
            for block in 0..3 {
                let base = block * 4;
                for i in 0..4 {
                    e.push((base + i, base + (i + 1) % 4, 2.0));
                }
            }
            e
        }),
    ];
    for (components, edges) in graphs {
        let g = SparseGraph::from_edge_list(n, &edges).unwrap();
        let dense = g.laplacian(false).to_dense();
        let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let eigen = nalgebra::SymmetricEigen::new(mat);
        let zeros = eigen.eigenvalues.iter().filter(|v| v.abs() < 1e-8).count();
        assert_eq!(
            zeros, components,
            "expected {components} zero eigenvalues, found {zeros}"
        );
    }
}
