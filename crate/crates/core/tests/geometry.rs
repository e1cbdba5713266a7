use proptest::prelude::*;

use nullwave_core::geometry::{build_grid, Dir, ExteriorGrid, NodeKind, ObstacleShape};

fn mirror(grid: &ExteriorGrid, idx: usize, s: usize) -> usize {
    let n = grid.n();
    let (i, j) = grid.ij(idx);
    let (i, j) = if s & 4 != 0 { (j, i) } else { (i, j) };
    let i = if s & 1 != 0 { n - 1 - i } else { i };
    let j = if s & 2 != 0 { n - 1 - j } else { j };
    grid.idx(i, j)
}

#[test]
fn disk_mask_has_square_symmetry() {
    let g = build_grid(&ObstacleShape::disk(0.37), 0.05, 2.0).unwrap();
    for s in 1..8 {
        for idx in 0..g.len() {
            assert_eq!(g.kind(idx), g.kind(mirror(&g, idx, s)), "symmetry {s} at node {idx}");
        }
    }
    // fractions as an unordered multiset per node
    for idx in 0..g.len() {
        if let Some(c) = g.cut(idx) {
            let mut a: Vec<f64> = c.frac.iter().flatten().copied().collect();
            let mut b: Vec<f64> = g.cut(mirror(&g, idx, 5)).unwrap().frac.iter().flatten().copied().collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn boundary_nodes_hug_the_boundary_under_refinement() {
    let shape = ObstacleShape::star(0.3, vec![(0.0, 0.0), (0.2, 0.1)]);
    for h in [0.05, 0.025] {
        let g = build_grid(&shape, h, 2.0).unwrap();
        for idx in 0..g.len() {
            if g.kind(idx) == NodeKind::BoundaryAdjacent {
                let (x, y) = g.coord(idx);
                let gap = x.hypot(y) - shape.radius_at(y.atan2(x));
                assert!((0.0..=h * 1.5).contains(&gap), "gap {gap} at h = {h}");
            }
        }
    }
}

#[test]
fn star_fractions_along_axis_match_radius() {
    let shape = ObstacleShape::star(0.3, vec![(0.0, 0.0), (0.1, 0.0)]);
    let h = 0.05;
    let g = build_grid(&shape, h, 2.0).unwrap();
    // on the positive x-axis the boundary sits at rho(0) = 0.33
    let idx = g.node_at(0.35, 0.0).unwrap();
    let frac = g.cut(idx).unwrap().frac[Dir::West as usize].unwrap();
    assert!((frac - (0.35 - 0.33) / h).abs() < 1e-10, "{frac}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mask_matches_radial_graph(a1 in -0.3f64..0.3, b2 in -0.3f64..0.3, a3 in -0.2f64..0.2, s in 0.0f64..1.0, th in 0.0f64..6.28) {
        let shape = ObstacleShape::star(0.3, vec![(a1 * 0.5, 0.0), (0.0, b2 * 0.5), (a3 * 0.5, 0.0)]);
        let g = build_grid(&shape, 0.025, 1.5).unwrap();
        for idx in 0..g.len() {
            let (x, y) = g.coord(idx);
            prop_assert_eq!(g.kind(idx) == NodeKind::Obstacle, shape.contains(x, y));
        }
        let r = s * shape.radius_at(th);
        prop_assert!(s == 0.0 || shape.contains(r * th.cos(), r * th.sin()));
    }
}
