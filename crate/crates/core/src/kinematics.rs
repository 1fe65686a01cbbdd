//! Radial deformation maps, strain measures and the Fe·Fg decomposition.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::diffgeo::{check_spd, Christoffel, Euclidean, Metric, RadialKind, RadialMetric};
use crate::error::{GrowthError, Result};
use crate::field::{RadialField, SharedField};
use crate::lattice::{FdScheme, Lattice};

/// r(R) together with its derivative.
pub trait RadialProfile: Send + Sync {
    fn r(&self, big_r: f64) -> f64;
    fn dr(&self, big_r: f64) -> f64;
}

/// A profile backed by a one-dimensional scalar field.
pub struct FieldProfile {
    field: SharedField,
    t: f64,
}

impl FieldProfile {
    pub fn new(field: SharedField) -> Self {
        Self { field, t: 0.0 }
    }
}

impl RadialProfile for FieldProfile {
    fn r(&self, big_r: f64) -> f64 {
        self.field.at(big_r, self.t)
    }
    fn dr(&self, big_r: f64) -> f64 {
        self.field.d1(big_r, self.t)
    }
}

/// r = R.
#[derive(Debug, Clone, Copy)]
pub struct IdentityProfile;

impl RadialProfile for IdentityProfile {
    fn r(&self, big_r: f64) -> f64 {
        big_r
    }
    fn dr(&self, _: f64) -> f64 {
        1.0
    }
}

/// φ(R, Θ[, Φ]) = (r(R), Θ[, Φ]).
#[derive(Clone)]
pub struct RadialMap {
    kind: RadialKind,
    profile: Arc<dyn RadialProfile>,
    inner: f64,
    outer: f64,
}

impl fmt::Debug for RadialMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialMap({}, [{}, {}] -> [{}, {}])", self.kind.name(), self.inner, self.outer, self.r1(), self.r2())
    }
}

impl RadialMap {
    pub fn new(kind: RadialKind, profile: Arc<dyn RadialProfile>, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) {
            return Err(GrowthError::Domain(format!("map domain must satisfy 0 < R1 < R2, got [{inner}, {outer}]")));
        }
        Ok(Self { kind, profile, inner, outer })
    }

    pub fn identity(kind: RadialKind, inner: f64, outer: f64) -> Result<Self> {
        Self::new(kind, Arc::new(IdentityProfile), inner, outer)
    }

    pub fn kind(&self) -> RadialKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.inner, self.outer)
    }

    pub fn r1(&self) -> f64 {
        self.profile.r(self.inner)
    }

    pub fn r2(&self) -> f64 {
        self.profile.r(self.outer)
    }

    pub fn r(&self, big_r: f64) -> f64 {
        self.profile.r(big_r)
    }

    pub fn dr(&self, big_r: f64) -> f64 {
        self.profile.dr(big_r)
    }

    fn check(&self, big_r: f64) -> Result<(f64, f64)> {
        let slack = 1e-12 * self.outer;
        if !(big_r >= self.inner - slack && big_r <= self.outer + slack) {
            return Err(GrowthError::Domain(format!("R = {big_r} outside [{}, {}]", self.inner, self.outer)));
        }
        let dr = self.dr(big_r);
        if !(dr > 0.0) {
            return Err(GrowthError::Orientation { radius: big_r, stretch: dr });
        }
        Ok((self.r(big_r), dr))
    }

    /// Material chart point at radius R on the equator.
    pub fn material_point(&self, big_r: f64) -> Vec<f64> {
        match self.dim() {
            3 => vec![big_r, FRAC_PI_2, 0.0],
            _ => vec![big_r, 0.0],
        }
    }

    /// Image of a material chart point.
    pub fn spatial_point(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y[0] = self.r(x[0]);
        y
    }

    pub fn ambient(&self) -> Euclidean {
        match self.dim() {
            3 => Euclidean::Spherical,
            _ => Euclidean::Polar,
        }
    }
}

/// F = diag(r′, 1[, 1]) and its inverse.
pub fn deformation_gradient(map: &RadialMap, big_r: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (_, dr) = map.check(big_r)?;
    let n = map.dim();
    let mut f = DMatrix::identity(n, n);
    let mut f_inv = DMatrix::identity(n, n);
    f[(0, 0)] = dr;
    f_inv[(0, 0)] = 1.0 / dr;
    Ok((f, f_inv))
}

/// J = √(det g / det G)·det F.
pub fn jacobian(map: &RadialMap, metric: &RadialMetric, big_r: f64) -> Result<f64> {
    if map.kind() != metric.kind() {
        return Err(GrowthError::Configuration(format!(
            "map family {} does not match metric family {}",
            map.kind().name(),
            metric.kind().name()
        )));
    }
    let (_, dr) = map.check(big_r)?;
    let x = map.material_point(big_r);
    let det_g = map.ambient().metric(&map.spatial_point(&x))?.determinant();
    Ok((det_g / metric.det(&x)?).sqrt() * dr)
}

#[derive(Debug, Clone)]
pub struct CauchyGreen {
    /// C_AB = g_ab F^a_A F^b_B.
    pub lower: DMatrix<f64>,
    /// C^A_B = G^{AC} C_CB.
    pub mixed: DMatrix<f64>,
}

impl CauchyGreen {
    /// tr_G C = G^{AB} C_AB.
    pub fn trace(&self) -> f64 {
        self.mixed.trace()
    }
}

/// Right Cauchy–Green tensor at material point `x`.
pub fn cauchy_green(map: &RadialMap, metric: &dyn Metric, ambient: &dyn Metric, x: &[f64]) -> Result<CauchyGreen> {
    let (f, _) = deformation_gradient(map, x[0])?;
    let g = ambient.metric(&map.spatial_point(x))?;
    let big_g = metric.metric(x)?;
    let lower = f.transpose() * g * &f;
    let g_inv = crate::diffgeo::inverse_spd(&big_g)?;
    Ok(CauchyGreen { mixed: g_inv * &lower, lower })
}

fn symmetric_power(g: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let eig = g.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(p)));
    let m = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    (&m + m.transpose()) * 0.5
}

/// Material orthonormal frame 𝖥_Â^B (columns are the frame vectors) and its
/// dual coframe 𝖥^Â_B.
#[derive(Debug, Clone)]
pub struct Frame {
    pub frame: DMatrix<f64>,
    pub coframe: DMatrix<f64>,
}

impl Frame {
    /// max |𝖥ᵀ G 𝖥 − I|.
    pub fn orthonormality_error(&self, g: &DMatrix<f64>) -> f64 {
        let n = g.nrows();
        (self.frame.transpose() * g * &self.frame - DMatrix::identity(n, n)).amax()
    }
}

/// Canonical frame 𝖥 = G^{−1/2}.
pub fn orthonormal_frame(g: &DMatrix<f64>) -> Result<Frame> {
    check_spd(g)?;
    Ok(Frame { frame: symmetric_power(g, -0.5), coframe: symmetric_power(g, 0.5) })
}

/// F = Fe·Fg with Fg = G^{1/2} and Fe = g^{1/2}·F·G^{−1/2}.
///
/// Both legs are written in orthonormal frames, so `f_hat` = g^{1/2}F is the
/// product that reassembles; it equals F when g = δ.
#[derive(Debug, Clone)]
pub struct GrowthDecomposition {
    pub f: DMatrix<f64>,
    pub f_hat: DMatrix<f64>,
    pub fe: DMatrix<f64>,
    pub fg: DMatrix<f64>,
    pub frame: Frame,
}

impl GrowthDecomposition {
    pub fn det_fe(&self) -> f64 {
        self.fe.determinant()
    }

    /// tr(FeᵀFe) = tr C_e.
    pub fn trace_ce(&self) -> f64 {
        self.fe.norm_squared()
    }

    /// max |Fe·Fg − F̂|.
    pub fn reassembly_error(&self) -> f64 {
        (&self.fe * &self.fg - &self.f_hat).amax()
    }
}

pub fn decompose(f: &DMatrix<f64>, big_g: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<GrowthDecomposition> {
    let n = f.nrows();
    if f.ncols() != n || big_g.nrows() != n || g.nrows() != n {
        return Err(GrowthError::Decomposition(format!(
            "dimension mismatch: F {}x{}, G {}x{}, g {}x{}",
            f.nrows(),
            f.ncols(),
            big_g.nrows(),
            big_g.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let det = f.determinant();
    if !(det.abs() > 1e-14 * f.amax().powi(n as i32)) {
        return Err(GrowthError::Decomposition(format!("deformation gradient is singular (det F = {det:e})")));
    }
    let frame = orthonormal_frame(big_g)?;
    let spatial = orthonormal_frame(g)?;
    let f_hat = &spatial.coframe * f;
    let fe = &f_hat * &frame.frame;
    Ok(GrowthDecomposition { f: f.clone(), f_hat, fe, fg: frame.coframe.clone(), frame })
}

/// Metric history G(t) at a fixed material point.
pub trait MetricFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn metric(&self, t: f64) -> DMatrix<f64>;
    /// Ġ when known in closed form.
    fn rate(&self, _t: f64) -> Option<DMatrix<f64>> {
        None
    }
}

pub struct FnMetricFamily<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> DMatrix<f64> + Send + Sync> FnMetricFamily<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64) -> DMatrix<f64> + Send + Sync> MetricFamily for FnMetricFamily<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, t: f64) -> DMatrix<f64> {
        (self.f)(t)
    }
}

/// Conformal history e^{2Ω(X,t)}·δ at a fixed point.
pub struct ConformalFamily {
    pub omega: SharedField,
    pub point: Vec<f64>,
}

impl MetricFamily for ConformalFamily {
    fn dim(&self) -> usize {
        self.point.len()
    }
    fn metric(&self, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::identity(n, n) * (2.0 * self.omega.value(&self.point, t)).exp()
    }
    fn rate(&self, t: f64) -> Option<DMatrix<f64>> {
        let w_dot = self.omega.time_derivative(&self.point, t);
        Some(self.metric(t) * (2.0 * w_dot))
    }
}

pub fn time_step(t: f64) -> f64 {
    1e-6 * t.abs().max(1.0)
}

/// Ġ, analytic when the family provides it.
pub fn metric_rate(family: &dyn MetricFamily, t: f64) -> DMatrix<f64> {
    family.rate(t).unwrap_or_else(|| {
        let dt = time_step(t);
        (family.metric(t + dt) - family.metric(t - dt)) / (2.0 * dt)
    })
}

/// (tr_G Ġ, 2 tr Lg) with Lg = Ḟg Fg⁻¹ and Fg = G^{1/2}.
pub fn growth_trace_identity(family: &dyn MetricFamily, t: f64) -> Result<(f64, f64)> {
    let g = family.metric(t);
    let g_inv = crate::diffgeo::inverse_spd(&g)?;
    let lhs = (g_inv * metric_rate(family, t)).trace();
    let dt = time_step(t);
    let fg_plus = orthonormal_frame(&family.metric(t + dt))?.coframe;
    let fg_minus = orthonormal_frame(&family.metric(t - dt))?.coframe;
    let frame = orthonormal_frame(&g)?;
    let fg_dot = (fg_plus - fg_minus) / (2.0 * dt);
    Ok((lhs, 2.0 * (fg_dot * frame.frame).trace()))
}

/// The growth connection Γ^I_JK = (Fg)^I_A ∂_K(Fg⁻¹)^A_J on a lattice.
#[derive(Debug, Clone)]
pub struct GrowthConnection {
    /// Nodes (lattice order) at which the connection is available.
    pub nodes: Vec<usize>,
    pub connection: Vec<Christoffel>,
    /// Max-abs curvature R^I_LJK over nodes two cells from the boundary.
    pub curvature_residual: f64,
    /// Max-abs torsion T^I_JK = Γ^I_JK − Γ^I_KJ.
    pub torsion_max: f64,
}

pub fn growth_connection(lattice: &Lattice, fg: &[DMatrix<f64>]) -> Result<GrowthConnection> {
    let n = lattice.dim();
    if fg.len() != lattice.len() {
        return Err(GrowthError::Configuration(format!(
            "growth field has {} values for {} nodes",
            fg.len(),
            lattice.len()
        )));
    }
    lattice.require_min_nodes(5, "growth connection")?;
    let inv = fg
        .iter()
        .enumerate()
        .map(|(k, m)| {
            m.clone()
                .try_inverse()
                .filter(|_| m.determinant().abs() > 1e-300)
                .ok_or_else(|| GrowthError::Decomposition(format!("Fg is singular at {:?}", lattice.coords(k))))
        })
        .collect::<Result<Vec<_>>>()?;
    let h = lattice.spacing();
    let stencil = FdScheme::Second.first_derivative();
    let deriv = |node: usize, k: usize, vals: &dyn Fn(usize) -> DMatrix<f64>| {
        stencil.iter().fold(DMatrix::zeros(n, n), |acc, &(o, w)| acc + vals(lattice.shift(node, k, o)) * (w / h))
    };
    let nodes = lattice.interior(1);
    let connection: Vec<Christoffel> = nodes
        .par_iter()
        .map(|&node| {
            let mut gam = Christoffel::zeros(n);
            for k in 0..n {
                let prod = &fg[node] * deriv(node, k, &|m| inv[m].clone());
                for i in 0..n {
                    for j in 0..n {
                        gam.set(i, j, k, prod[(i, j)]);
                    }
                }
            }
            gam
        })
        .collect();
    let torsion_max = connection.iter().fold(0.0f64, |m, g| {
        let mut t = m;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t = t.max((g.get(i, j, k) - g.get(i, k, j)).abs());
                }
            }
        }
        t
    });
    let index_of = |node: usize| nodes.binary_search(&node).expect("interior node");
    let curvature_residual = lattice
        .interior(2)
        .par_iter()
        .map(|&node| {
            let g0 = &connection[index_of(node)];
            // ∂_J Γ^I_LK stored per J
            let d: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let mut acc = vec![0.0; n * n * n];
                    for &(o, w) in stencil {
                        let g = &connection[index_of(lattice.shift(node, j, o))];
                        for (a, v) in acc.iter_mut().zip(g.as_slice()) {
                            *a += w / h * v;
                        }
                    }
                    acc
                })
                .collect();
            let mut worst = 0.0f64;
            for i in 0..n {
                for l in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut v = d[j][(i * n + l) * n + k] - d[k][(i * n + l) * n + j];
                            for m in 0..n {
                                v += g0.get(m, l, k) * g0.get(i, m, j) - g0.get(m, l, j) * g0.get(i, m, k);
                            }
                            worst = worst.max(v.abs());
                        }
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(GrowthConnection { nodes, connection, curvature_residual, torsion_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgeo::RadialFamily;
    use crate::expr::{Chart, ExprField};

    fn field(src: &str) -> SharedField {
        Arc::new(ExprField::parse(src, Chart::Radial).unwrap())
    }

    fn profile(src: &str) -> Arc<dyn RadialProfile> {
        Arc::new(FieldProfile::new(field(src)))
    }

    #[test]
    fn identity_map() {
        let m = RadialMap::identity(RadialKind::Iso2D, 1.0, 2.0).unwrap();
        let (f, fi) = deformation_gradient(&m, 1.5).unwrap();
        assert_eq!(f, DMatrix::identity(2, 2));
        assert_eq!(fi, DMatrix::identity(2, 2));
        let metric = RadialMetric::new(RadialFamily::Iso2D { omega: field("0") }, 1.0, 2.0).unwrap();
        assert!((jacobian(&m, &metric, 1.5).unwrap() - 1.0).abs() < 1e-15);
        let c = cauchy_green(&m, &metric, &Euclidean::Polar, &[1.5, 0.3]).unwrap();
        assert!(
            (c.lower.clone() - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.25]))).amax() < 1e-15
        );
    }

    #[test]
    fn aniso_closed_form_map() {
        let c = 0.7;
        let m = RadialMap::new(RadialKind::Aniso2D, profile("sqrt(R^2 + 0.7)"), 1.0, 2.0).unwrap();
        let metric = RadialMetric::new(RadialFamily::Aniso2D { omega: field("0.1*R"), pi: None }, 1.0, 2.0).unwrap();
        let r: f64 = 1.4;
        let (f, _) = deformation_gradient(&m, r).unwrap();
        assert!((f[(0, 0)] - r / (r * r + c).sqrt()).abs() < 1e-14);
        let cg = cauchy_green(&m, &metric, &Euclidean::Polar, &[r, 0.0]).unwrap();
        assert!((cg.lower[(0, 0)] - r * r / (r * r + c)).abs() < 1e-14);
        assert!((cg.lower[(1, 1)] - (r * r + c)).abs() < 1e-13);
        assert!((jacobian(&m, &metric, r).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn iso_trace_and_det_fe() {
        let m = RadialMap::new(RadialKind::Iso2D, profile("R + 0.2*R^2"), 1.0, 2.0).unwrap();
        let w = field("0.3*sin(R)");
        let metric = RadialMetric::new(RadialFamily::Iso2D { omega: w.clone() }, 1.0, 2.0).unwrap();
        let big_r: f64 = 1.3;
        let (r, dr, om) = (big_r + 0.2 * big_r * big_r, 1.0 + 0.4 * big_r, 0.3 * big_r.sin());
        let x = [big_r, 0.0];
        let cg = cauchy_green(&m, &metric, &Euclidean::Polar, &x).unwrap();
        let expected = dr * dr * (-2.0 * om).exp() + r * r / (big_r * big_r) * (-2.0 * om).exp();
        assert!((cg.trace() - expected).abs() < 1e-13);
        let (f, _) = deformation_gradient(&m, big_r).unwrap();
        let d = decompose(&f, &metric.metric(&x).unwrap(), &Euclidean::Polar.metric(&m.spatial_point(&x)).unwrap())
            .unwrap();
        let det_fe = r * dr * (-2.0 * om).exp() / big_r;
        assert!((d.det_fe() - det_fe).abs() < 1e-13);
        assert!((d.det_fe() - jacobian(&m, &metric, big_r).unwrap()).abs() < 1e-13);
        assert!((d.trace_ce() - cg.trace()).abs() < 1e-13);
    }

    #[test]
    fn sphere_jacobian_formula() {
        let m = RadialMap::new(RadialKind::Iso3D, profile("R^2"), 1.0, 2.0).unwrap();
        let metric = RadialMetric::new(RadialFamily::Iso3D { omega: field("0.2*R") }, 1.0, 2.0).unwrap();
        let big_r: f64 = 1.5;
        let expected = big_r.powi(4) / (big_r * big_r) * (-0.9f64).exp() * 2.0 * big_r;
        assert!((jacobian(&m, &metric, big_r).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn orientation_and_domain_errors() {
        let m = RadialMap::new(RadialKind::Iso2D, profile("3 - R"), 1.0, 2.0).unwrap();
        assert!(matches!(deformation_gradient(&m, 1.5), Err(GrowthError::Orientation { .. })));
        assert!(matches!(deformation_gradient(&m, 2.5), Err(GrowthError::Domain(_))));
    }

    #[test]
    fn conformal_frame() {
        let g = DMatrix::identity(3, 3) * (2.0f64 * 0.4).exp();
        let fr = orthonormal_frame(&g).unwrap();
        assert!((fr.frame.clone() - DMatrix::identity(3, 3) * (-0.4f64).exp()).amax() < 1e-14);
        let d = decompose(&DMatrix::identity(3, 3), &g, &DMatrix::identity(3, 3)).unwrap();
        assert!((d.fg.clone() - DMatrix::identity(3, 3) * 0.4f64.exp()).amax() < 1e-14);
    }

    #[test]
    fn singular_f_is_rejected() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let id = DMatrix::identity(2, 2);
        assert!(matches!(decompose(&f, &id, &id), Err(GrowthError::Decomposition(_))));
    }

    #[test]
    fn conformal_trace_identity() {
        let fam = ConformalFamily {
            omega: Arc::new(ExprField::parse("0.7*t*x", Chart::Cartesian(2)).unwrap()),
            point: vec![1.2, 0.5],
        };
        let (a, b) = growth_trace_identity(&fam, 0.4).unwrap();
        assert!((a - 4.0 * 0.7 * 1.2).abs() < 1e-12);
        assert!((a - b).abs() < 1e-8, "{a} {b}");
        let constant = FnMetricFamily::new(2, |_| DMatrix::identity(2, 2) * 2.0);
        assert_eq!(growth_trace_identity(&constant, 1.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn growth_connection_is_flat_with_torsion() {
        let lat = Lattice::cube(2, 0.0, 1.0, 17).unwrap();
        let fg: Vec<_> = (0..lat.len())
            .map(|k| {
                let x = lat.coords(k);
                DMatrix::identity(2, 2) * (x[0] * x[1] + 0.3 * x[0]).exp()
            })
            .collect();
        let gc = growth_connection(&lat, &fg).unwrap();
        assert!(gc.torsion_max > 0.1);
        assert!(gc.curvature_residual < 1e-2, "{}", gc.curvature_residual);
        let constant = vec![DMatrix::identity(2, 2) * 2.0; lat.len()];
        let gc = growth_connection(&lat, &constant).unwrap();
        assert_eq!((gc.torsion_max, gc.curvature_residual), (0.0, 0.0));
    }
}
