use std::sync::Arc;

use growthmech_core::diffgeo::{ConformalMetric, Euclidean, Metric};
use growthmech_core::evolution::{Driver, Evolution, EvolutionParams, EvolutionState, NeoHookean};
use growthmech_core::expr::{Chart, Expr, ExprField};
use growthmech_core::field::TabulatedRadial;
use growthmech_core::kinematics::decompose;
use growthmech_core::linearized::{svk_tensors, SvkParams};
use growthmech_core::roots::{expand_bracket, Bisection, Brent, RootFinder, RootOptions};
use growthmech_core::stressfree::{flatness_equations_at, inversion_map, radial_cone_family, GeneralFamily};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.3
    })
}

fn invertible(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-0.4f64..0.4, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v) + DMatrix::identity(n, n))
}

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(3usize)]
}

proptest! {
    #[test]
    fn decomposition_identities((big_g, g, f) in dims().prop_flat_map(|n| (spd(n), spd(n), invertible(n)))) {
        let d = decompose(&f, &big_g, &g).unwrap();
        prop_assert!(d.reassembly_error() <= 1e-12 * d.f_hat.amax().max(1.0));
        let det = (g.determinant() / big_g.determinant()).sqrt() * f.determinant();
        prop_assert!((d.det_fe() - det).abs() <= 1e-11 * det.abs().max(1.0));
        let tr = (big_g.clone().try_inverse().unwrap() * f.transpose() * &g * &f).trace();
        prop_assert!((d.trace_ce() - tr).abs() <= 1e-11 * tr.abs().max(1.0));
    }

    #[test]
    fn euclidean_charts_have_no_curvature(r in 0.2f64..5.0, th in 0.1f64..3.0, ph in -3.0f64..3.0) {
        prop_assert!(Euclidean::Polar.curvature(&[r, ph]).unwrap().riemann.max_abs() < 1e-10);
        prop_assert!(Euclidean::Spherical.curvature(&[r, th, ph]).unwrap().riemann.max_abs() < 1e-10);
    }

    #[test]
    fn conformal_2d_ricci_is_proportional(a in -1.0f64..1.0, b in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let omega = ExprField::parse(&format!("{a}*sin(x)*y + {b}*x^2"), Chart::Cartesian(2)).unwrap();
        let m = ConformalMetric::new(Arc::new(omega));
        let c = m.curvature(&[x, y]).unwrap();
        let g = m.metric(&[x, y]).unwrap();
        prop_assert!((&c.ricci - &g * (0.5 * c.scalar)).amax() < 1e-10);
        prop_assert!((c.scalar - m.scalar_curvature_2d(&[x, y])).abs() < 1e-9 * c.scalar.abs().max(1.0));
    }

    #[test]
    fn cone_family_is_harmonic(xi in 0.1f64..5.0, eta in -3.0f64..3.0, x in 0.3f64..2.0, y in 0.3f64..2.0) {
        prop_assume!((eta + 1.0).abs() > 1e-3);
        let fam = radial_cone_family(xi, eta).unwrap();
        let lap: f64 = { let h = fam.omega.hessian(&[x, y], 0.0); h[0] + h[3] };
        prop_assert!(lap.abs() < 1e-9);
        prop_assert!((fam.cone_parameter - 1.0 / (1.0 + eta)).abs() < 1e-12);
    }

    #[test]
    fn flat_general_members_solve_the_flatness_system(
        c0 in 0.2f64..3.0,
        center in prop::array::uniform3(-3.0f64..-1.5),
        x in prop::array::uniform3(0.0f64..1.0),
    ) {
        let fam = GeneralFamily::flat(c0, center);
        prop_assert!(fam.is_flat());
        let eqs = flatness_equations_at(fam.omega().unwrap().as_ref(), &x, 0.0);
        prop_assert!(eqs.iter().all(|e| e.abs() < 1e-9), "{:?}", eqs);
    }

    #[test]
    fn inversion_is_an_involution(c in 0.2f64..4.0, x in prop::array::uniform3(-2.0f64..2.0)) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let back = inversion_map(c, &inversion_map(c, &x).unwrap()).unwrap();
        prop_assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9 * b.abs().max(1.0)));
    }

    #[test]
    fn svk_tensor_major_symmetry(lambda in -0.5f64..3.0, mu in 0.1f64..3.0) {
        prop_assume!(3.0 * lambda + 2.0 * mu > 0.0);
        let t = svk_tensors(SvkParams::new(lambda, mu).unwrap(), 3);
        for a in 0..3 { for aa in 0..3 { for b in 0..3 { for bb in 0..3 {
            prop_assert_eq!(t.a(a, aa, b, bb), t.a(b, bb, a, aa));
        }}}}
    }

    #[test]
    fn root_finders_agree(r in -2.0f64..2.0, s in 0.1f64..3.0) {
        let mut f = |x: f64| (x - r) * (x * x + s);
        let bracket = expand_bracket(&mut f, r - 0.37, r + 0.5, None).unwrap();
        let a = Bisection.solve(&mut f, bracket, RootOptions::default()).unwrap();
        let b = Brent.solve(&mut f, bracket, RootOptions::default()).unwrap();
        prop_assert!((a.x - r).abs() < 1e-12 && (b.x - r).abs() < 1e-12);
    }

    #[test]
    fn symbolic_derivative_matches_difference(a in -2.0f64..2.0, b in 0.1f64..2.0, x in 0.2f64..3.0) {
        let e = Expr::parse(&format!("{a}*x^3 + exp({b}*x)*sin(x) - ln(x)")).unwrap().bind(Chart::Cartesian(1)).unwrap();
        let d = e.diff(Some(0));
        let h = 1e-5;
        let fd = (e.eval(&[x + h], 0.0) - e.eval(&[x - h], 0.0)) / (2.0 * h);
        prop_assert!((d.eval(&[x], 0.0) - fd).abs() < 1e-5 * fd.abs().max(1.0));
    }

    #[test]
    fn spline_interpolates_its_nodes(v in prop::collection::vec(-5.0f64..5.0, 4..12)) {
        let r: Vec<f64> = (0..v.len()).map(|i| 1.0 + 0.5 * i as f64).collect();
        let s = TabulatedRadial::new(r.clone(), v.clone()).unwrap();
        for (x, y) in r.iter().zip(&v) {
            prop_assert!((s.eval(*x).0 - y).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn neo_hookean_flow_stays_spd_and_conserves_mass(big_g in spd(2), f in invertible(2), rho in 0.5f64..2.0) {
        let driver = Driver::Energy {
            energy: Arc::new(NeoHookean { mu: 1.0 }),
            deformation: Arc::new(move |_| f.clone()),
            spatial: DMatrix::identity(2, 2),
        };
        let ev = Evolution::new(driver, EvolutionParams::default()).unwrap();
        let s0 = EvolutionState::new(big_g, rho, 0.0).unwrap();
        let traj = ev.integrate(&s0, 0.5, 1e-3).unwrap();
        let m0 = s0.rho * s0.big_g.determinant().sqrt();
        for s in &traj.states {
            prop_assert!(s.big_g.clone().cholesky().is_some());
            let m = s.rho * s.big_g.determinant().sqrt();
            prop_assert!((m - m0).abs() < 1e-8 * m0, "{} vs {} at t = {}", m, m0, s.t);
        }
        prop_assert!(traj.min_entropy() >= 0.0);
    }
}
