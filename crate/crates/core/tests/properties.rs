use std::cmp::Ordering;

use proptest::prelude::*;
use transversal::family::{cubic_chart, cubic_chart_inverse};
use transversal::kneading::{compare, kneading, lap_numbers};
use transversal::lifting::{lift_tower, make_motion, vertex_angle, Grid};
use transversal::linalg::CMat;
use transversal::orbit::{critical_orbit, enumerate_superstable, OrbitOptions};
use transversal::transfer::{assemble_a, assemble_aj, assemble_d, exceptional_values, identify_labels, is_exceptional, spectrum};
use transversal::{re, Exec, FamilySpec, Scalar};

fn quad() -> FamilySpec {
    FamilySpec::MonicAdditive { d: 2 }
}

fn centers() -> &'static Vec<f64> {
    static C: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    C.get_or_init(|| enumerate_superstable(&quad(), -2.0, 0.25, 8).unwrap().params.iter().map(|p| p.c).collect())
}

fn families() -> impl Strategy<Value = (FamilySpec, Vec<f64>)> {
    prop_oneof![
        (2u32..6, -1.5f64..0.2).prop_map(|(d, c)| (FamilySpec::MonicAdditive { d }, vec![c])),
        (1.0f64..6.0, 1.0f64..6.0, -1.0f64..0.0)
            .prop_map(|(lm, lp, c)| (FamilySpec::PowerAdditive { ell_minus: lm, ell_plus: lp }, vec![c])),
        (0.3f64..1.5, -1.0f64..1.0).prop_map(|(a, b)| {
            let (w1, w2) = cubic_chart_inverse(a, b);
            (FamilySpec::Cubic, vec![w1, w2])
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn derivatives_match_differences((spec, w) in families(), x in 0.3f64..1.4) {
        let p: Vec<Scalar> = spec.from_critical_values(&w.iter().map(|&v| re(v)).collect::<Vec<_>>());
        let z = re(x);
        let h = 1e-6;
        let fd = (spec.eval(&p, z + h).unwrap() - spec.eval(&p, z - h).unwrap()) / (2.0 * h);
        let d = spec.deriv_z(&p, z).unwrap();
        prop_assert!((fd - d).norm() <= 1e-5 * (1.0 + d.norm()));
        for k in 0..w.len() {
            let shifted = |s: f64| {
                let mut ww: Vec<Scalar> = w.iter().map(|&v| re(v)).collect();
                ww[k] += s;
                spec.eval(&spec.from_critical_values(&ww), z).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let l = spec.deriv_w(&p, z, k).unwrap();
            prop_assert!((fd - l).norm() <= 1e-5 * (1.0 + l.norm()), "k={} fd={} l={}", k, fd, l);
        }
    }

    #[test]
    fn angle_triangle_inequality(
        o in (-2.0f64..2.0, -2.0f64..2.0),
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
        c in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let [o, a, b, c] = [o, a, b, c].map(|(x, y)| Scalar::new(x, y));
        prop_assume!((a - o).norm() > 1e-6 && (b - o).norm() > 1e-6 && (c - o).norm() > 1e-6);
        let ab = vertex_angle(o, a, b);
        prop_assert!(ab <= vertex_angle(o, a, c) + vertex_angle(o, c, b) + 1e-12);
        prop_assert!((ab - vertex_angle(o, b, a)).abs() < 1e-12);
    }

    #[test]
    fn kneading_order_is_strict_weak(c1 in -2.0f64..0.25, c2 in -2.0f64..0.25, c3 in -2.0f64..0.25) {
        let ks: Vec<_> = [c1, c2, c3].iter().map(|&c| kneading(&quad(), c, 40).unwrap()).collect();
        for x in &ks {
            prop_assert_eq!(compare(x, x).unwrap(), Ordering::Equal);
            for y in &ks {
                prop_assert_eq!(compare(x, y).unwrap(), compare(y, x).unwrap().reverse());
                for z in &ks {
                    if compare(x, y).unwrap() != Ordering::Greater && compare(y, z).unwrap() != Ordering::Greater {
                        prop_assert_ne!(compare(x, z).unwrap(), Ordering::Greater);
                    }
                }
            }
        }
    }

    #[test]
    fn lap_tables_are_submultiplicative(c in -2.0f64..0.25) {
        let t = lap_numbers(&quad(), c, 10).unwrap();
        prop_assert!(t.is_submultiplicative());
    }

    #[test]
    fn label_operator_matches_set_operator(i in 0usize..1000) {
        let c = centers()[i % centers().len()];
        let o = critical_orbit(&quad(), &[re(c)], OrbitOptions::default()).unwrap();
        let a = assemble_a(&o).unwrap();
        let aj = assemble_aj(&o).unwrap();
        let mapped = identify_labels(&o, &aj).unwrap();
        prop_assert!((mapped - a.entries).iter().all(|z| z.norm() <= 1e-9));
    }

    #[test]
    fn label_determinant_matches_d(i in 0usize..1000, r in 0.05f64..1.5, t in 0.0f64..6.3) {
        let c = centers()[i % centers().len()];
        let o = critical_orbit(&quad(), &[re(c)], OrbitOptions::default()).unwrap();
        let rho = Scalar::from_polar(r, t);
        prop_assume!(!is_exceptional(&exceptional_values(&o), rho, 1e-6));
        let aj = assemble_aj(&o).unwrap();
        let n = aj.dim();
        let lhs = (CMat::identity(n, n) - aj.entries * rho).determinant();
        let rhs = assemble_d(&o, rho).determinant();
        prop_assert!((lhs - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
    }

    #[test]
    fn spectrum_agrees_with_schur(entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25)) {
        let m = CMat::from_iterator(5, 5, entries.iter().map(|&(x, y)| Scalar::new(x, y)));
        let tm = transversal::transfer::TransferMatrix {
            entries: m.clone(),
            index: transversal::transfer::MatrixIndex::SetIndexed(vec![re(0.0); 5]),
            w: vec![re(0.0)],
        };
        let ours = spectrum(&tm).unwrap();
        let schur = m.schur().eigenvalues().unwrap();
        for z in schur.iter() {
            let d = ours.iter().map(|u| (u - z).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d <= 1e-6, "{} missing", z);
        }
    }

    #[test]
    fn lift_velocity_is_transfer_image(v0 in -1.0f64..1.0, v1 in -1.0f64..1.0, i in 0usize..1000) {
        let small: Vec<f64> = centers().iter().copied().take(12).collect();
        let c = small[i % small.len()];
        let o = critical_orbit(&quad(), &[re(c)], OrbitOptions::default()).unwrap();
        let v: Vec<Scalar> = (0..o.gp.len()).map(|k| re(if k % 2 == 0 { v0 } else { v1 })).collect();
        let m = make_motion(&o.gp, &v, Grid::disk(1e-5, 4, 2)).unwrap();
        let t = lift_tower(&quad(), &o, &m, 1, 4, Exec::Sequential).unwrap();
        let av = assemble_a(&o).unwrap().entries * transversal::linalg::CVec::from_vec(v.clone());
        // first-order difference quotient of the lifted motion at the smallest radius
        let lam = m.grid.lambda(0, 0);
        for x in 0..o.gp.len() {
            let dq = (t.motions[1].samples[0][0][x] - o.gp[x]) / lam;
            prop_assert!((dq - av[x]).norm() <= 1e-3 * (1.0 + av[x].norm()), "x={} dq={} Av={}", x, dq, av[x]);
        }
    }

    #[test]
    fn real_motions_lift_symmetrically(v0 in -1.0f64..1.0) {
        let o = critical_orbit(&quad(), &[re(-1.0)], OrbitOptions::default()).unwrap();
        let v: Vec<Scalar> = o.gp.iter().map(|x| re(v0 * x.re)).collect();
        let m = make_motion(&o.gp, &v, Grid::disk(0.1, 8, 4)).unwrap();
        let t = lift_tower(&quad(), &o, &m, 3, 4, Exec::Sequential).unwrap();
        for mo in &t.motions {
            for ray in 1..8 {
                for (s, row) in mo.samples[ray].iter().enumerate() {
                    for (x, z) in row.iter().enumerate() {
                        let w = mo.samples[8 - ray][s][x];
                        prop_assert!((z - w.conj()).norm() <= 1e-10);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cubic_chart_round_trip(a in 0.05f64..3.0, b in -5.0f64..5.0) {
        let (w1, w2) = cubic_chart_inverse(a, b);
        let ch = cubic_chart(w1, w2).unwrap();
        prop_assert!(!ch.swapped);
        prop_assert!((ch.a - a).abs() <= 1e-12 * (1.0 + a));
        prop_assert!((ch.b - b).abs() <= 1e-12 * (1.0 + b.abs() + a.powi(3)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn angle_triangle_inequality_dense(
        a in 0.0f64..6.3, b in 0.0f64..6.3, c in 0.0f64..6.3, r in 0.1f64..3.0,
    ) {
        let o = re(0.0);
        let [a, b, c] = [a, b, c].map(|t| Scalar::from_polar(r, t));
        prop_assert!(vertex_angle(o, a, b) <= vertex_angle(o, a, c) + vertex_angle(o, c, b) + 1e-12);
    }
}
