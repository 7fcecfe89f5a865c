//! Projection properties against a dense grid oracle.

use chasectl_core::geometry::{box_polytope, BoxBounds, Halfspace, Polytope};
use chasectl_core::reference::grid_project_distance;
use nalgebra::DVector;
use proptest::prelude::*;

fn arb_point(dim: usize, range: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-range..range, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn projection_is_idempotent(
        dim in 2usize..=3,
        coords in arb_point(3, 3.0),
        cut in arb_point(3, 1.0),
    ) {
        let z = DVector::from_vec(coords[..dim].to_vec());
        let normal = DVector::from_vec(cut[..dim].to_vec());
        let mut halfspaces = box_polytope(BoxBounds::new(-1.0, 1.0).unwrap(), 1, dim - 1)
            .halfspaces()
            .to_vec();
        if normal.norm() > 1e-6 {
            halfspaces.push(Halfspace::new(normal, 0.3).unwrap());
        }
        let poly = Polytope::new(dim, halfspaces).unwrap();
        let p1 = poly.project(&z).unwrap();
        let p2 = poly.project(&p1).unwrap();
        prop_assert!((&p2 - &p1).norm() <= 1e-7, "moved {}", (&p2 - &p1).norm());
        prop_assert!(poly.contains(&p1, 1e-7));
    }

    #[test]
    fn projection_distance_matches_grid_oracle(
        dim in 2usize..=3,
        coords in arb_point(3, 2.5),
        cut in arb_point(3, 1.0),
    ) {
        let z = DVector::from_vec(coords[..dim].to_vec());
        let normal = DVector::from_vec(cut[..dim].to_vec());
        let mut raw: Vec<(DVector<f64>, f64)> = Vec::new();
        for i in 0..dim {
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            raw.push((e.clone(), 1.0));
            raw.push((-e, 1.0));
        }
        if normal.norm() > 1e-6 {
            raw.push((normal, 0.3));
        }
        let halfspaces: Vec<Halfspace> = raw
            .iter()
            .map(|(a, b)| Halfspace::new(a.clone(), *b).unwrap())
            .collect();
        let poly = Polytope::new(dim, halfspaces).unwrap();

        let pitch = 0.05;
        let oracle = grid_project_distance(&raw, -1.0, 1.0, pitch, &z);
        prop_assume!(oracle.is_finite()); // grid found a feasible point
        let projected = poly.project(&z).unwrap();
        let dist = (&projected - &z).norm();
        let slack = pitch * (dim as f64).sqrt();
        prop_assert!(
            dist <= oracle + 1e-6 && oracle <= dist + slack,
            "solver {dist} vs grid {oracle} (pitch {pitch})"
        );
    }
}
