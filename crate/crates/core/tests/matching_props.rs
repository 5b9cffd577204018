use a2b_core::matching::knn_graph;
use a2b_core::matching::{select_matches, sinkhorn_assign};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
    lo: f64,
    hi: f64,
) -> impl Strategy<Value = DMatrix<f64>> {
    (rows, cols).prop_flat_map(move |(r, c)| {
        proptest::collection::vec(lo..hi, r * c).prop_map(move |v| DMatrix::from_row_slice(r, c, &v))
    })
}

fn brute_knn(f: &DMatrix<f64>, k: usize) -> Vec<Vec<usize>> {
    (0..f.nrows())
        .map(|i| {
            let mut d: Vec<(f64, usize)> =
                (0..f.nrows()).filter(|&j| j != i).map(|j| ((f.row(i) - f.row(j)).norm_squared(), j)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|x| x.1).collect()
        })
        .collect()
}

proptest! {
    #[test]
    fn knn_matches_brute_force(f in matrix(10..40, 1..6, -5.0, 5.0), k in 1usize..9) {
        let g = knn_graph(&f, k).unwrap();
        prop_assert_eq!(g.neighbor_index, brute_knn(&f, k));
    }

    #[test]
    fn knn_on_grid_ties_prefer_lower_index(n in 10usize..30, k in 1usize..6) {
        // integer coordinates produce many exact distance ties
        let f = DMatrix::from_fn(n, 2, |i, c| ((i * (c + 3)) % 5) as f64);
        let g = knn_graph(&f, k).unwrap();
        prop_assert_eq!(g.neighbor_index, brute_knn(&f, k));
    }

    #[test]
    fn sinkhorn_is_doubly_stochastic_on_interior(s in matrix(1..20, 1..20, -10.0, 10.0), z in -2.0..2.0f64) {
        // small or extreme matrices need more rounds than the default to settle
        let p = sinkhorn_assign(&s, z, 2000);
        prop_assert!(p.m.iter().all(|&v| v >= 0.0 && v.is_finite()));
        prop_assert!(p.interior_marginal_error() < 1e-6, "{}", p.interior_marginal_error());
    }

    #[test]
    fn selected_matches_are_one_to_one_and_above_threshold(s in matrix(2..15, 2..15, -5.0, 5.0), alpha in 0.0..0.9f64) {
        let p = sinkhorn_assign(&s, 0.0, 50);
        let m = select_matches(&p, alpha);
        let mut rows: Vec<usize> = m.iter().map(|x| x.i).collect();
        let mut cols: Vec<usize> = m.iter().map(|x| x.j).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), m.len());
        prop_assert_eq!(cols.len(), m.len());
        for x in &m {
            prop_assert!(x.i < p.n_a() && x.j < p.n_b());
            prop_assert!(x.confidence > alpha);
        }
    }
}
