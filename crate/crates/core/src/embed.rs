//! Surfaces of revolution realizing M²dR² + N²dΘ²: ρ = N and
//! ξ(s) = ∫√(M² − Ṅ²) ds.

use std::f64::consts::PI;

use crate::error::{GrowthError, Result};
use crate::field::{RadialField, SharedField};
use crate::output::{Mesh, Table};
use crate::quadrature::{adaptive, AdaptiveOptions};

enum Shape {
    /// M = e^Ω, N = Re^Ω.
    Iso(SharedField),
    /// M = e^Ω, N = Re^Π.
    Aniso(SharedField, SharedField),
    /// M, N given directly.
    General(SharedField, SharedField),
}

/// Rotationally symmetric 2D metric as (M, N) over the radial coordinate.
pub struct RevolutionProfile {
    shape: Shape,
    t: f64,
}

impl RevolutionProfile {
    pub fn isotropic(omega: SharedField) -> Self {
        Self { shape: Shape::Iso(omega), t: 0.0 }
    }

    pub fn anisotropic(omega: SharedField, pi: SharedField) -> Self {
        Self { shape: Shape::Aniso(omega, pi), t: 0.0 }
    }

    pub fn general(m: SharedField, n: SharedField) -> Self {
        Self { shape: Shape::General(m, n), t: 0.0 }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn m(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Iso(w) | Shape::Aniso(w, _) => w.at(s, self.t).exp(),
            Shape::General(m, _) => m.at(s, self.t),
        }
    }

    pub fn n(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Iso(w) | Shape::Aniso(_, w) => s * w.at(s, self.t).exp(),
            Shape::General(_, n) => n.at(s, self.t),
        }
    }

    /// dN/ds; for the conformal shapes e^ψ(1 + sψ′) from the field's own
    /// derivative, otherwise whatever the field's gradient provides.
    pub fn dn(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Iso(w) | Shape::Aniso(_, w) => w.at(s, self.t).exp() * (1.0 + s * w.d1(s, self.t)),
            Shape::General(_, n) => n.d1(s, self.t),
        }
    }

    /// M² − Ṅ².
    pub fn discriminant(&self, s: f64) -> f64 {
        self.m(s).powi(2) - self.dn(s).powi(2)
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingCurve {
    pub s: Vec<f64>,
    pub rho: Vec<f64>,
    /// NaN outside the embedded run.
    pub xi: Vec<f64>,
    pub valid: Vec<bool>,
    /// Sample range [first, last] of the longest valid run.
    pub run: (usize, usize),
    /// Maximal intervals of samples where M² < Ṅ².
    pub violations: Vec<(f64, f64)>,
    /// M at each sample.
    pub m: Vec<f64>,
    /// Ṅ at each sample.
    pub dn: Vec<f64>,
}

impl EmbeddingCurve {
    pub fn valid_interval(&self) -> (f64, f64) {
        (self.s[self.run.0], self.s[self.run.1])
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["s", "rho", "xi", "valid"]);
        for i in 0..self.s.len() {
            t.push_row(&[self.s[i], self.rho[i], self.xi[i], if self.valid[i] { 1.0 } else { 0.0 }]);
        }
        let (a, b) = self.valid_interval();
        t.push_meta("valid_interval", format!("[{a}, {b}]"));
        t
    }
}

/// Discriminant values within this relative distance of zero count as valid,
/// so that exact validity endpoints survive rounding.
const VALID_SLACK: f64 = 1e-12;

pub fn embed_metric(profile: &RevolutionProfile, s0: f64, s1: f64, samples: usize) -> Result<EmbeddingCurve> {
    if !(s1 > s0) || samples < 2 {
        return Err(GrowthError::Configuration(format!(
            "need s0 < s1 and at least 2 samples, got [{s0}, {s1}] with {samples}"
        )));
    }
    let h = (s1 - s0) / (samples - 1) as f64;
    let s: Vec<f64> = (0..samples).map(|i| if i + 1 == samples { s1 } else { s0 + i as f64 * h }).collect();
    let m: Vec<f64> = s.iter().map(|&x| profile.m(x)).collect();
    let rho: Vec<f64> = s.iter().map(|&x| profile.n(x)).collect();
    let dn: Vec<f64> = s.iter().map(|&x| profile.dn(x)).collect();
    for i in 0..samples {
        if !(m[i] > 0.0) || !(rho[i] >= 0.0) || !dn[i].is_finite() {
            return Err(GrowthError::Domain(format!(
                "need M > 0 and N >= 0, got M = {}, N = {} at s = {}",
                m[i], rho[i], s[i]
            )));
        }
    }
    let valid: Vec<bool> = (0..samples).map(|i| m[i] * m[i] - dn[i] * dn[i] >= -VALID_SLACK * m[i] * m[i]).collect();

    let mut runs = Vec::new();
    let mut violations = Vec::new();
    let mut i = 0;
    while i < samples {
        let j = (i..samples).find(|&k| valid[k] != valid[i]).unwrap_or(samples);
        if valid[i] {
            runs.push((i, j - 1));
        } else {
            violations.push((s[i], s[j - 1]));
        }
        i = j;
    }
    // longest run; the first one on ties
    let run = runs
        .iter()
        .copied()
        .filter(|(a, b)| b > a)
        .fold(None, |best: Option<(usize, usize)>, r| match best {
            Some(b) if b.1 - b.0 >= r.1 - r.0 => Some(b),
            _ => Some(r),
        })
        .ok_or(GrowthError::NonEmbeddable { start: s0, end: s1 })?;

    let speed = |x: f64| profile.discriminant(x).max(0.0).sqrt();
    let mut xi = vec![f64::NAN; samples];
    xi[run.0] = 0.0;
    for k in run.0..run.1 {
        let seg = adaptive(speed, s[k], s[k + 1], AdaptiveOptions::default())?;
        xi[k + 1] = xi[k] + seg.value;
    }
    Ok(EmbeddingCurve { s, rho, xi, valid, run, violations, m, dn })
}

/// Band mesh Φ(s, Θ) = (ρcosΘ, ρsinΘ, ξ) over the valid run, periodic in Θ,
/// triangles counterclockwise about Φ_s × Φ_Θ.
pub fn revolve(curve: &EmbeddingCurve, n_theta: usize) -> Result<Mesh> {
    let (a, b) = curve.run;
    if b <= a {
        return Err(GrowthError::Mesh("need at least 2 valid samples".into()));
    }
    if n_theta < 3 {
        return Err(GrowthError::Mesh(format!("need at least 3 angular samples, got {n_theta}")));
    }
    let mut mesh = Mesh::default();
    for i in a..=b {
        let slope = curve.m[i].powi(2) - curve.dn[i].powi(2);
        let dxi = slope.max(0.0).sqrt();
        let drho = curve.dn[i];
        let norm = (dxi * dxi + drho * drho).sqrt().max(f64::MIN_POSITIVE);
        for j in 0..n_theta {
            let th = 2.0 * PI * j as f64 / n_theta as f64;
            let (sn, cs) = th.sin_cos();
            mesh.vertices.push([curve.rho[i] * cs, curve.rho[i] * sn, curve.xi[i]]);
            mesh.normals.push([-dxi * cs / norm, -dxi * sn / norm, drho / norm]);
        }
    }
    for i in 0..(b - a) {
        for j in 0..n_theta {
            let jn = (j + 1) % n_theta;
            let v = |r: usize, c: usize| r * n_theta + c;
            mesh.triangles.push([v(i, j), v(i + 1, j), v(i + 1, jn)]);
            mesh.triangles.push([v(i, j), v(i + 1, jn), v(i, jn)]);
        }
    }
    Ok(mesh)
}

/// Largest relative mismatch between mesh edge lengths and the target
/// metric: ∫M ds along s-edges (midpoint rule), N·ΔΘ along Θ-edges.
pub fn induced_metric_error(profile: &RevolutionProfile, curve: &EmbeddingCurve, mesh: &Mesh, n_theta: usize) -> f64 {
    let (a, b) = curve.run;
    let dist = |p: usize, q: usize| {
        let (u, v) = (mesh.vertices[p], mesh.vertices[q]);
        ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)).sqrt()
    };
    let rel = |got: f64, want: f64| if want > 1e-12 { (got / want - 1.0).abs() } else { got.abs() };
    let dtheta = 2.0 * PI / n_theta as f64;
    let mut worst = 0.0f64;
    for i in 0..=(b - a) {
        let k = a + i;
        for j in 0..n_theta {
            let p = i * n_theta + j;
            worst = worst.max(rel(dist(p, i * n_theta + (j + 1) % n_theta), curve.rho[k] * dtheta));
            if k < b {
                let ds = curve.s[k + 1] - curve.s[k];
                let want = profile.m(0.5 * (curve.s[k] + curve.s[k + 1])) * ds;
                worst = worst.max(rel(dist(p, p + n_theta), want));
            }
        }
    }
    worst
}

/// Angle-defect Gauss curvature (2π − Σθ)/(A/3) per vertex; boundary rows
/// are left at NaN.
pub fn angle_defect_curvature(mesh: &Mesh, n_theta: usize) -> Vec<f64> {
    let nv = mesh.vertices.len();
    let mut angle = vec![0.0; nv];
    let mut area = vec![0.0; nv];
    let sub = |u: [f64; 3], v: [f64; 3]| [u[0] - v[0], u[1] - v[1], u[2] - v[2]];
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross =
        |u: [f64; 3], v: [f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    for t in &mesh.triangles {
        let p = t.map(|k| mesh.vertices[k]);
        let c = cross(sub(p[1], p[0]), sub(p[2], p[0]));
        let a = 0.5 * dot(c, c).sqrt();
        for k in 0..3 {
            let e1 = sub(p[(k + 1) % 3], p[k]);
            let e2 = sub(p[(k + 2) % 3], p[k]);
            let cos = dot(e1, e2) / (dot(e1, e1) * dot(e2, e2)).sqrt();
            if cos.is_finite() {
                angle[t[k]] += cos.clamp(-1.0, 1.0).acos();
            }
            area[t[k]] += a / 3.0;
        }
    }
    let rows = nv / n_theta;
    (0..nv)
        .map(|k| {
            let r = k / n_theta;
            if r == 0 || r + 1 == rows || area[k] <= 0.0 {
                f64::NAN
            } else {
                (2.0 * PI - angle[k]) / area[k]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Chart, ExprField};
    use crate::field::RadialField;
    use std::sync::Arc;

    fn f(src: &str) -> SharedField {
        Arc::new(ExprField::parse(src, Chart::Radial).unwrap())
    }

    #[test]
    fn reference_discriminants() {
        type Case = (RevolutionProfile, fn(f64) -> f64);
        let cases: [Case; 4] = [
            (RevolutionProfile::isotropic(f("-R")), |r| (-2.0 * r).exp() * (2.0 * r - r * r)),
            (RevolutionProfile::isotropic(f("-R^2")), |r| 4.0 * r * r * (-2.0 * r * r).exp() * (1.0 - r * r)),
            (RevolutionProfile::anisotropic(f("cos(R)^2"), f("0")), |r| (2.0 * r.cos().powi(2)).exp() - 1.0),
            (RevolutionProfile::anisotropic(f("0"), f("-ln(R^2)")), |r| 1.0 - r.powi(-4)),
        ];
        for (p, want) in &cases {
            for k in 1..40 {
                let r = 0.1 * k as f64;
                assert!((p.discriminant(r) - want(r)).abs() <= 1e-12 * want(r).abs().max(1.0), "R = {r}");
            }
        }
    }

    #[test]
    fn validity_intervals() {
        let c = embed_metric(&RevolutionProfile::isotropic(f("-R")), 0.0, 3.0, 301).unwrap();
        assert_eq!(c.valid_interval(), (0.0, 2.0));
        assert!((c.violations[0].0 - 2.01).abs() < 1e-12);
        let c = embed_metric(&RevolutionProfile::isotropic(f("-R^2")), 0.0, 1.5, 151).unwrap();
        assert_eq!(c.valid_interval(), (0.0, 1.0));
        let c = embed_metric(&RevolutionProfile::anisotropic(f("cos(R)^2"), f("0")), 0.0, 6.0, 121).unwrap();
        assert!(c.violations.is_empty());
        let c = embed_metric(&RevolutionProfile::anisotropic(f("0"), f("-ln(R^2)")), 0.5, 3.0, 251).unwrap();
        assert_eq!(c.valid_interval(), (1.0, 3.0));
        assert_eq!(c.violations, vec![(0.5, 0.99)]);
        assert!(c.xi[..50].iter().all(|x| x.is_nan()) && c.xi[50] == 0.0);
    }

    #[test]
    fn xi_is_monotone_and_matches_closed_form() {
        // Ω = −R: ξ′ = e^{−R}√(2R − R²)
        let p = RevolutionProfile::isotropic(f("-R"));
        let c = embed_metric(&p, 0.0, 2.0, 41).unwrap();
        assert!(c.xi.windows(2).all(|w| w[1] >= w[0]));
        let fine = crate::quadrature::composite(|r| (-r).exp() * (2.0 * r - r * r).max(0.0).sqrt(), 0.0, 1.0, 4000);
        assert!((c.xi[20] - fine).abs() < 1e-6);
    }

    #[test]
    fn plane_and_nonembeddable() {
        let p = RevolutionProfile::isotropic(f("0"));
        let c = embed_metric(&p, 0.5, 2.0, 16).unwrap();
        assert!(c.xi.iter().all(|x| x.abs() < 1e-15));
        let mesh = revolve(&c, 12).unwrap();
        assert!(mesh.normals.iter().all(|n| (n[2] - 1.0).abs() < 1e-15));
        // N = 3R, M = 1: Ṅ² = 9 > 1 everywhere
        let p = RevolutionProfile::general(f("1"), f("3*R"));
        assert!(matches!(embed_metric(&p, 0.5, 2.0, 16), Err(GrowthError::NonEmbeddable { .. })));
    }

    #[test]
    fn dome_mesh_metric_and_curvature() {
        let omega = f("-R^2");
        let p = RevolutionProfile::isotropic(omega.clone());
        let c = embed_metric(&p, 0.0, 1.0, 257).unwrap();
        let mesh = revolve(&c, 128).unwrap();
        assert_eq!(mesh.vertices.len(), 257 * 128);
        assert!(induced_metric_error(&p, &c, &mesh, 128) < 1e-3);
        // intrinsic 𝖱 = −2e^{−2Ω}(Ω″ + Ω′/R) = 8e^{2R²}, so K = 4e^{2R²} > 0
        let k = angle_defect_curvature(&mesh, 128);
        for row in [32usize, 128, 200] {
            let r = c.s[row];
            let want = -(-2.0 * omega.at(r, 0.0)).exp() * (omega.d2(r, 0.0) + omega.d1(r, 0.0) / r);
            let got = k[row * 128];
            assert!(got > 0.0 && (got / want - 1.0).abs() < 0.05, "R = {r}: {got} vs {want}");
        }
    }

    #[test]
    fn mesh_needs_two_samples() {
        let p = RevolutionProfile::isotropic(f("0"));
        let mut c = embed_metric(&p, 0.5, 2.0, 4).unwrap();
        c.run = (1, 1);
        assert!(matches!(revolve(&c, 8), Err(GrowthError::Mesh(_))));
    }
}
