use std::sync::Arc;

use growthmech_core::diffgeo::{ConformalMetric, FnMetric, Metric, RadialFamily, RadialMetric};
use growthmech_core::embed::{embed_metric, RevolutionProfile};
use growthmech_core::expr::{Chart, ExprField};
use growthmech_core::field::SharedField;
use growthmech_core::residual::{BoundaryMode, BvpConfig, GrowthBvp, ProblemRegistry};
use nalgebra::{DMatrix, DVector};

fn radial(src: &str) -> SharedField {
    Arc::new(ExprField::parse(src, Chart::Radial).unwrap())
}

#[test]
fn uniform_growth_is_stress_free_with_free_boundaries() {
    let reg = ProblemRegistry::default();
    for name in ["annulus-iso", "sphere"] {
        let mut cfg = BvpConfig::new(reg.get(name).unwrap(), radial("0.2"), 1.0, 2.0, 1.5);
        cfg.mode = BoundaryMode::TractionFree;
        cfg.nodes = 65;
        let s = GrowthBvp::new(cfg).unwrap().solve().unwrap();
        let scale = 0.2f64.exp();
        assert!((s.r1 - scale).abs() < 1e-10, "{name}: r1 = {}", s.r1);
        for (x, r) in s.grid.iter().zip(&s.r) {
            assert!((r - scale * x).abs() < 1e-10, "{name}");
        }
        for component in &s.stresses {
            assert!(component.iter().all(|v| v.abs() < 1e-9), "{name}: {component:?}");
        }
    }
}

#[test]
fn anisotropic_growth_preserves_area() {
    let reg = ProblemRegistry::default();
    let mut cfg = BvpConfig::new(reg.get("annulus-aniso").unwrap(), radial("-0.3*R^2"), 1.0, 3.0, 1.0);
    cfg.nodes = 101;
    let s = GrowthBvp::new(cfg).unwrap().solve().unwrap();
    // det G does not depend on Ω, so r² − R² is constant
    let c = s.r[0] * s.r[0] - 1.0;
    for (x, r) in s.grid.iter().zip(&s.r) {
        assert!((r * r - x * x - c).abs() < 1e-11);
    }
}

#[test]
fn hyperbolic_half_plane() {
    let m = ConformalMetric::new(Arc::new(ExprField::parse("-ln(y)", Chart::Cartesian(2)).unwrap()));
    for x in [[0.1, 0.5], [-2.0, 1.7], [3.0, 0.2]] {
        assert!((m.curvature(&x).unwrap().scalar + 2.0).abs() < 1e-10);
        assert!((m.scalar_curvature_2d(&x) + 2.0).abs() < 1e-10);
    }
}

#[test]
fn round_sphere_in_stereographic_and_polar_charts() {
    // 4(dR² + R²dΘ²)/(1 + R²)²
    let stereo = RadialMetric::new(RadialFamily::Iso2D { omega: radial("ln(2/(1 + R^2))") }, 0.1, 5.0).unwrap();
    for r in [0.3, 1.0, 2.5] {
        assert!((stereo.curvature(&[r, 0.4]).unwrap().scalar - 2.0).abs() < 1e-9);
    }
    let a = 0.8;
    let polar = FnMetric::new(2, move |x: &[f64]| {
        DMatrix::from_diagonal(&DVector::from_vec(vec![a * a, a * a * x[0].sin().powi(2)]))
    });
    assert!((polar.curvature(&[1.1, 0.0]).unwrap().scalar - 2.0 / (a * a)).abs() < 1e-6);
}

#[test]
fn stereographic_metric_embeds_as_unit_sphere() {
    let profile = RevolutionProfile::isotropic(radial("ln(2/(1 + R^2))"));
    let curve = embed_metric(&profile, 0.0, 3.0, 3001).unwrap();
    assert!(curve.violations.is_empty());
    for (rho, xi) in curve.rho.iter().zip(&curve.xi) {
        assert!((rho * rho + (xi - 1.0).powi(2) - 1.0).abs() < 1e-6, "rho = {rho}, xi = {xi}");
    }
}

#[test]
fn flat_metric_in_polar_chart_embeds_as_plane() {
    let profile = RevolutionProfile::general(radial("1"), radial("R"));
    let curve = embed_metric(&profile, 0.0, 2.0, 33).unwrap();
    assert!(curve.xi.iter().all(|x| x.abs() < 1e-15));
    assert!(curve.rho.iter().zip(&curve.s).all(|(r, s)| (r - s).abs() < 1e-15));
}
