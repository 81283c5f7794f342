use nalgebra::DMatrix;
use proptest::prelude::*;

use sgiga::experiments::CLASSIFY_LEVELS;
use sgiga::interface_geometry::{classify_elements, ElementLabel, ImplicitInterface};
use sgiga::linalg::ldlt;
use sgiga::quasi_interp::{eval_1d, qi_1d, qi_2d, qi_modified_2d, ExtensionPair};
use sgiga::splines::{KnotVector, SplineSpace2D};

/// Open quadratic knot vector on [0, 1] with sorted, well-separated interior knots.
fn knot_vector() -> impl Strategy<Value = KnotVector> {
    prop::collection::vec(0.02f64..0.98, 1..12).prop_filter_map("knots too close", |mut v| {
        v.sort_by(f64::total_cmp);
        if v.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            return None;
        }
        let mut knots = vec![0.0; 3];
        knots.extend(v);
        knots.extend([1.0; 3]);
        KnotVector::new(2, knots).ok()
    })
}

fn quadratic(c: [f64; 6]) -> impl Fn(f64, f64) -> f64 {
    move |s, t| c[0] + c[1] * s + c[2] * t + c[3] * s * s + c[4] * s * t + c[5] * t * t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_is_partition_of_unity(kv in knot_vector(), s in 0.0f64..=1.0) {
        let be = kv.eval_basis_derivs(s, 2).unwrap();
        let sum: f64 = be.ders[0][..=2].iter().sum();
        let dsum: f64 = be.ders[1][..=2].iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-13);
        prop_assert!(dsum.abs() <= 1e-9);
        prop_assert!(be.ders[0][..=2].iter().all(|&v| v >= -1e-15));
    }

    #[test]
    fn qi_reproduces_quadratics(kv in knot_vector(), c in prop::array::uniform3(-5.0f64..5.0), s in 0.0f64..=1.0) {
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x;
        let qi = qi_1d(&f, &kv).unwrap();
        let v = eval_1d(&kv, &qi.coeffs, s).unwrap();
        prop_assert!((v - f(s)).abs() <= 1e-10, "{} vs {}", v, f(s));
    }

    #[test]
    fn qi_is_linear(n in 2usize..9, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let space = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, n).unwrap();
        let f = |s: f64, t: f64| (3.0 * s).sin() * t;
        let g = |s: f64, t: f64| (s * t).exp();
        let h = |s: f64, t: f64| a * f(s, t) + b * g(s, t);
        let (qf, qg, qh) = (qi_2d(&f, &space).unwrap(), qi_2d(&g, &space).unwrap(), qi_2d(&h, &space).unwrap());
        for i in 0..qh.coeffs.len() {
            let lin = a * qf.coeffs[i] + b * qg.coeffs[i];
            prop_assert!((qh.coeffs[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn modified_qi_exact_away_from_interface(
        cx in 0.4f64..0.6,
        cy in 0.4f64..0.6,
        r in 0.15f64..0.3,
        c0 in prop::array::uniform6(-2.0f64..2.0),
        c1 in prop::array::uniform6(-2.0f64..2.0),
    ) {
        let space = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 12).unwrap();
        let iface = ImplicitInterface::circle([cx, cy], r, false);
        let Ok(class) = classify_elements(&space, &iface, CLASSIFY_LEVELS) else {
            return Err(TestCaseError::reject("interface not resolved"));
        };
        let (f0, f1) = (quadratic(c0), quadratic(c1));
        let ext = ExtensionPair { f0: &f0, f1: &f1 };
        let qi = qi_modified_2d(&ext, &class, &space).unwrap();
        for e in 0..space.n_elements() {
            let exact: &dyn Fn(f64, f64) -> f64 = match class.labels[e] {
                ElementLabel::Plus if !class.in_j1_plus(e) => &f0,
                ElementLabel::Minus => &f1,
                _ => continue,
            };
            let [s0, s1, t0, t1] = space.element_box(e);
            let (s, t) = (0.3 * s0 + 0.7 * s1, 0.6 * t0 + 0.4 * t1);
            let (v, _) = space.eval_field_on_element(&qi.coeffs, e, s, t);
            prop_assert!((v - exact(s, t)).abs() <= 1e-10, "element {}: {} vs {}", e, v, exact(s, t));
        }
    }

    #[test]
    fn ldlt_reconstructs_spd(n in 1usize..25, entries in prop::collection::vec(-1.0f64..1.0, 625)) {
        let b = DMatrix::from_fn(n, n, |i, j| entries[i * 25 + j]);
        let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
        let (l, d) = ldlt(&a).unwrap();
        let back = &l * DMatrix::from_diagonal(&d) * l.transpose();
        prop_assert!((&back - &a).norm() <= 1e-12 * a.norm());
        prop_assert!(d.iter().all(|&v| v > 0.0));
        for i in 0..n {
            prop_assert_eq!(l[(i, i)], 1.0);
            for j in i + 1..n {
                prop_assert_eq!(l[(i, j)], 0.0);
            }
        }
    }
}
