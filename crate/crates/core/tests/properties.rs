use std::sync::Arc;

use proptest::prelude::*;

use kkmembrane::elliptic::{assemble, assemble_sided};
use kkmembrane::mesh::{build_interval_mesh, build_rect_mesh, MembraneMesh};
use kkmembrane::parabolic::{Integrator, SimState};
use kkmembrane::reactions::{builtin_annihilation, builtin_transport_demo, make_truncation, regularize, ReactionField, ReactionSystem};
use kkmembrane::{Field, MultiField};

fn mesh_strategy() -> impl Strategy<Value = Arc<MembraneMesh>> {
    prop_oneof![
        (0.2f64..3.0, 0.2f64..3.0, 2usize..12, 2usize..12)
            .prop_map(|(a, b, n1, n2)| Arc::new(build_interval_mesh(a, b, n1, n2).unwrap())),
        (0.2f64..2.0, 0.2f64..2.0, 0.3f64..2.0, 2usize..6, 2usize..6, 2usize..6)
            .prop_map(|(a, b, h, n1, n2, ny)| Arc::new(build_rect_mesh(a, b, h, n1, n2, ny).unwrap())),
    ]
}

fn field(n: usize, seed: &[f64]) -> Field {
    Field::from_fn(n, |i| seed[i % seed.len()] * (1.0 + (i as f64 * 0.7).sin()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_symmetric_positive(mesh in mesh_strategy(), d1 in 0.1f64..5.0, d2 in 0.1f64..5.0, k in 0.01f64..50.0,
                                      seed in prop::collection::vec(-1.0f64..1.0, 1..8)) {
        let op = assemble_sided(&mesh, d1, d2, k).unwrap();
        prop_assert!(op.matrix().max_asymmetry() < 1e-12);
        let v = field(mesh.cell_count(), &seed);
        let e = op.bilinear_form(&v, &v).unwrap();
        prop_assert!(e >= 0.0);
        if v.iter().any(|x| *x != 0.0) {
            prop_assert!(e > 0.0);
        }
    }

    #[test]
    fn dual_norm_is_a_norm(mesh in mesh_strategy(), k in 0.05f64..20.0,
                           a in prop::collection::vec(-1.0f64..1.0, 1..8), b in prop::collection::vec(-1.0f64..1.0, 1..8),
                           c in -3.0f64..3.0) {
        let op = assemble(&mesh, 1.0, k).unwrap();
        let n = mesh.cell_count();
        let (fa, fb) = (field(n, &a), field(n, &b));
        let na = op.dual_norm(&fa).unwrap();
        let nb = op.dual_norm(&fb).unwrap();
        let nsum = op.dual_norm(&fa.combine(1.0, &fb, 1.0)).unwrap();
        prop_assert!(nsum <= (na + nb) * (1.0 + 1e-9) + 1e-12);
        let scaled = op.dual_norm(&fa.scaled(c)).unwrap();
        prop_assert!((scaled - c.abs() * na).abs() <= 1e-8 * (1.0 + na));
    }

    #[test]
    fn diffusion_step_preserves_sign_and_order(mesh in mesh_strategy(), d in 0.1f64..3.0, k in 0.05f64..20.0, dt in 1e-4f64..1.0,
                                               lo in prop::collection::vec(0.0f64..1.0, 1..8), gap in prop::collection::vec(0.0f64..1.0, 1..8)) {
        let op = assemble(&mesh, d, k).unwrap();
        let integ = Integrator::new(Arc::clone(&mesh), vec![op], Arc::new(ReactionSystem::zero(1))).unwrap();
        let n = mesh.cell_count();
        let u_lo = field(n, &lo);
        let u_hi = u_lo.combine(1.0, &field(n, &gap), 1.0);
        let step = |u: &Field| {
            let s = SimState { t: 0.0, step: 0, u: MultiField::new(vec![u.clone()]) };
            integ.step_imex(&s, dt).unwrap()
        };
        let (a, ra) = step(&u_lo);
        let (b, _) = step(&u_hi);
        prop_assert!(a.u.species[0].min() >= 0.0);
        prop_assert!(a.u.species[0].iter().zip(b.u.species[0].iter()).all(|(x, y)| x <= y));
        let vol = mesh.volumes();
        let mass = |f: &Field| f.iter().zip(&vol).map(|(a, m)| a * m).sum::<f64>();
        prop_assert!(mass(&a.u.species[0]) <= mass(&u_lo) * (1.0 + 1e-14) + 1e-300);
        prop_assert!(ra.budget_residual <= 1e-12 * (1.0 + mass(&u_lo)));
    }

    #[test]
    fn regularized_reaction_is_bounded(n in 1u32..200, u in prop::collection::vec(0.0f64..1e4, 6)) {
        let transport = builtin_transport_demo(&[1.0, 2.0, 0.5, 3.0, 0.7]).unwrap();
        let systems = [builtin_annihilation(), transport];
        for sys in &systems {
            let r = regularize(sys, n).unwrap();
            let mut out = vec![0.0; r.species()];
            r.eval(&u[..r.species()], &mut out);
            prop_assert!(out.iter().all(|v| v.abs() <= f64::from(n)));
            let total: f64 = out.iter().map(|v| v.abs()).sum();
            prop_assert!(total <= f64::from(n));
        }
    }

    #[test]
    fn regularization_preserves_quasi_positivity(n in 1u32..100, u in prop::collection::vec(0.0f64..100.0, 6), i in 0usize..6) {
        let sys = builtin_transport_demo(&[1.0, 2.0, 0.5, 3.0, 0.7]).unwrap();
        let r = regularize(&sys, n).unwrap();
        let mut v = u.clone();
        v[i] = 0.0;
        let mut out = vec![0.0; 6];
        r.eval(&v, &mut out);
        prop_assert!(out[i] >= 0.0);
    }

    #[test]
    fn truncation_invariants(b in 4.0f64..1e3, s in 0.0f64..2e3) {
        let t = make_truncation(b).unwrap();
        let (v, d, dd) = (t.value(s), t.derivative(s), t.second_derivative(s));
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((-1.0..=0.0).contains(&dd));
        prop_assert!(v <= s + 1e-12 && v <= b - 1.0 + 1e-12);
        if s <= b - 2.0 { prop_assert_eq!(v, s); }
        if s >= b { prop_assert_eq!(d, 0.0); prop_assert!((v - (b - 1.0)).abs() < 1e-12); }
    }
}
