//! Property tests of the structural invariants: mesh geometry identities,
//! discrete-gradient kernels and adjoints, upwind splitting, and form
//! symmetry, all over randomized perturbed meshes and fields.

use hmm_core::discrete::{self, DiscreteField};
use hmm_core::geometry::Vec2;
use hmm_core::mesh::{check_admissibility, generate_perturbed_mesh, Mesh, Rect};
use hmm_core::transport::upwind_split;
use proptest::prelude::*;

fn arb_mesh() -> impl Strategy<Value = Mesh> {
    (2usize..7, 2usize..7, 0.0f64..0.3, any::<u64>()).prop_map(|(nx, ny, amp, seed)| {
        generate_perturbed_mesh(nx, ny, Rect::UNIT, amp, seed).expect("admissible mesh")
    })
}

proptest! {
    #[test]
    fn perturbed_meshes_satisfy_geometric_identities(mesh in arb_mesh()) {
        check_admissibility(&mesh).unwrap();
        prop_assert!((mesh.total_measure - 1.0).abs() < 1e-12);
        for (ci, cell) in mesh.cells.iter().enumerate() {
            // closed polygon: sum |sigma| n = 0
            let mut normal_sum = Vec2::ZERO;
            // pyramid partition: sum |sigma| d / 2 = |K|
            let mut measure_sum = 0.0;
            // first-moment identity behind gradient exactness:
            // sum |sigma| n (xbar_sigma - x_K)^T = |K| Id
            let mut m = [0.0f64; 4];
            for (li, &ei) in cell.edges.iter().enumerate() {
                let e = &mesh.edges[ei];
                normal_sum += cell.normals[li].scale(e.measure);
                measure_sum += mesh.pyramid_measure(ci, li);
                let n = cell.normals[li].scale(e.measure);
                let r = e.midpoint - cell.centre;
                m[0] += n.x * r.x;
                m[1] += n.x * r.y;
                m[2] += n.y * r.x;
                m[3] += n.y * r.y;
            }
            let scale = cell.measure.max(1e-12);
            prop_assert!(normal_sum.norm() < 1e-12);
            prop_assert!((measure_sum - cell.measure).abs() < 1e-12 * scale);
            prop_assert!((m[0] - cell.measure).abs() < 1e-12);
            prop_assert!(m[1].abs() < 1e-12);
            prop_assert!(m[2].abs() < 1e-12);
            prop_assert!((m[3] - cell.measure).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_exactly_on_constants(mesh in arb_mesh(), value in -10.0f64..10.0) {
        let g = discrete::gradient(&mesh, &DiscreteField::constant(&mesh, value));
        for gq in &g.values {
            prop_assert!(gq.norm() < 1e-12 * value.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_is_exact_on_random_affines(
        mesh in arb_mesh(),
        a in -5.0f64..5.0,
        bx in -5.0f64..5.0,
        by in -5.0f64..5.0,
    ) {
        let b = Vec2::new(bx, by);
        let v = discrete::interpolate(&mesh, |x| a + b.dot(x));
        let g = discrete::gradient(&mesh, &v);
        for gq in &g.values {
            prop_assert!((*gq - b).norm() < 1e-11 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn upwind_split_identities(flux in -1e6f64..1e6) {
        let s = upwind_split(flux);
        prop_assert!(s.plus >= 0.0 && s.minus >= 0.0);
        prop_assert_eq!(s.plus - s.minus, -flux);
        prop_assert_eq!(s.plus * s.minus, 0.0);
    }

    #[test]
    fn forms_are_symmetric_and_bilinear(mesh in arb_mesh(), seed in any::<u64>()) {
        // deterministic pseudo-random fields from the seed
        let hash = |i: usize, salt: u64| -> f64 {
            let mut z = seed ^ salt ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15);
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            ((z >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let field = |salt: u64| -> DiscreteField {
            let mut f = DiscreteField::zeros(&mesh);
            for (i, c) in f.cell.iter_mut().enumerate() { *c = hash(i, salt); }
            for (i, e) in f.edge.iter_mut().enumerate() { *e = hash(i, salt ^ 0xabcd); }
            f
        };
        let (v, w, z) = (field(1), field(2), field(3));
        let phi = vec![1.0; mesh.n_cells()];
        let tensors = discrete::PyramidTensors::identity(&mesh);

        let mass = |a: &DiscreteField, b: &DiscreteField| discrete::mass_form(&mesh, &phi, a, b);
        let diff = |a: &DiscreteField, b: &DiscreteField| discrete::diffusion_form(&mesh, &tensors, a, b);
        prop_assert!((mass(&v, &w) - mass(&w, &v)).abs() < 1e-12);
        prop_assert!((diff(&v, &w) - diff(&w, &v)).abs() < 1e-10);
        // bilinearity in the first slot
        // axpy(a, other) = a * self + other
        let vw = w.axpy(2.5, &v);
        prop_assert!((mass(&vw, &z) - mass(&v, &z) - 2.5 * mass(&w, &z)).abs() < 1e-11);
        prop_assert!((diff(&vw, &z) - diff(&v, &z) - 2.5 * diff(&w, &z)).abs() < 1e-9);
        // coercivity of the stabilized diffusion form
        prop_assert!(diff(&v, &v) >= -1e-12);
    }

    #[test]
    fn interpolation_and_reconstruction_are_consistent(mesh in arb_mesh(), c in -3.0f64..3.0) {
        let v = discrete::interpolate(&mesh, |_| c);
        let integral = discrete::integrate_reconstruction(&mesh, &v);
        prop_assert!((integral - c * mesh.total_measure).abs() < 1e-12 * c.abs().max(1.0));
        let p = Vec2::new(0.37, 0.81);
        let val = discrete::eval_reconstruction(&mesh, &v, p).unwrap();
        prop_assert_eq!(val, c);
    }
}
