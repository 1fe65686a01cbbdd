//! Metrics, Levi-Civita connections and curvature.
//!
//! Two evaluation routes share the same tensor types: exact curvature from a
//! metric jet `(G, ∂G, ∂∂G)` at a point, and central differences over a
//! [`GridMetric`] sampled on a lattice.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{GrowthError, Result};
use crate::field::{RadialField, SharedField};
use crate::lattice::{FdScheme, Lattice};

/// Γ^a_bc stored as `[a][b][c]`.
#[derive(Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let n = self.n;
        self.data[(a * n + b) * n + c] = v;
    }

    /// Sets Γ^a_bc and Γ^a_cb.
    pub fn set_sym(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.set(a, b, c, v);
        self.set(a, c, b, v);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl fmt::Debug for Christoffel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Christoffel(n = {}, {:?})", self.n, self.data)
    }
}

/// R^a_bcd stored as `[a][b][c][d]`.
#[derive(Clone, PartialEq)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + d]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + d] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// R_ab = R^c_acb.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |a, b| (0..n).map(|c| self.get(c, a, c, b)).sum())
    }

    /// R_abcd = G_ae R^e_bcd.
    pub fn lowered(&self, g: &DMatrix<f64>) -> Riemann {
        let n = self.n;
        let mut out = Riemann::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let v = (0..n).map(|e| g[(a, e)] * self.get(e, b, c, d)).sum();
                        out.set(a, b, c, d, v);
                    }
                }
            }
        }
        out
    }
}

impl fmt::Debug for Riemann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Riemann(n = {}, max |R| = {:e})", self.n, self.max_abs())
    }
}

/// Metric with its first and second coordinate derivatives at one point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    /// `dg[k]` = ∂_k G.
    pub dg: Vec<DMatrix<f64>>,
    /// `ddg[k * n + l]` = ∂_k ∂_l G.
    pub ddg: Vec<DMatrix<f64>>,
}

/// Curvature at one point.
#[derive(Debug, Clone)]
pub struct PointCurvature {
    pub riemann: Riemann,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
}

impl PointCurvature {
    pub fn from_riemann(riemann: Riemann, g_inv: &DMatrix<f64>) -> Self {
        let ricci = riemann.ricci();
        let scalar = g_inv.component_mul(&ricci).sum();
        Self { riemann, ricci, scalar }
    }
}

pub fn inverse_spd(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(g)?;
    g.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| GrowthError::Definiteness(format!("metric is not positive-definite: {g}")))
}

/// Symmetry and Sylvester's criterion.
pub fn check_spd(g: &DMatrix<f64>) -> Result<()> {
    let n = g.nrows();
    if g.ncols() != n || n == 0 {
        return Err(GrowthError::Definiteness(format!("metric must be square, got {}x{}", n, g.ncols())));
    }
    let scale = g.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (g[(i, j)] - g[(j, i)]).abs() > 1e-12 * scale {
                return Err(GrowthError::Definiteness(format!(
                    "metric not symmetric: G[{i}][{j}] = {} but G[{j}][{i}] = {}",
                    g[(i, j)],
                    g[(j, i)]
                )));
            }
        }
    }
    for k in 1..=n {
        let det = g.view((0, 0), (k, k)).determinant();
        if !(det > 0.0) {
            return Err(GrowthError::Definiteness(format!("leading minor {k} of metric is {det:e} (not positive)")));
        }
    }
    Ok(())
}

fn christoffel_from_derivs(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Christoffel {
    let n = g_inv.nrows();
    let mut out = Christoffel::zeros(n);
    for i in 0..n {
        for j in i..n {
            // Γ_l,ij
            let lower: Vec<f64> = (0..n).map(|l| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])).collect();
            for k in 0..n {
                let v = (0..n).map(|l| g_inv[(k, l)] * lower[l]).sum();
                out.set_sym(k, i, j, v);
            }
        }
    }
    out
}

/// R^a_bcd = ∂_cΓ^a_bd − ∂_dΓ^a_bc + Γ^a_ce Γ^e_bd − Γ^a_de Γ^e_bc,
/// with `d_gamma(c, a, b, d)` = ∂_c Γ^a_bd.
pub fn riemann_from_connection<F: Fn(usize, usize, usize, usize) -> f64>(gamma: &Christoffel, d_gamma: F) -> Riemann {
    let n = gamma.dim();
    let mut r = Riemann::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in (c + 1)..n {
                    let mut v = d_gamma(c, a, b, d) - d_gamma(d, a, b, c);
                    for e in 0..n {
                        v += gamma.get(a, c, e) * gamma.get(e, b, d) - gamma.get(a, d, e) * gamma.get(e, b, c);
                    }
                    r.set(a, b, c, d, v);
                    r.set(a, b, d, c, -v);
                }
            }
        }
    }
    r
}

/// Exact connection and curvature from a jet.
pub fn curvature_from_jet(jet: &MetricJet) -> Result<(Christoffel, PointCurvature)> {
    let n = jet.g.nrows();
    let g_inv = inverse_spd(&jet.g)?;
    let gamma = christoffel_from_derivs(&g_inv, &jet.dg);
    // ∂_c g^{ae} = −g^{af} ∂_c g_fh g^{he}
    let d_inv: Vec<DMatrix<f64>> = jet.dg.iter().map(|d| -(&g_inv * d * &g_inv)).collect();
    let lower = |e: usize, b: usize, d: usize| 0.5 * (jet.dg[b][(d, e)] + jet.dg[d][(b, e)] - jet.dg[e][(b, d)]);
    let d_lower = |c: usize, e: usize, b: usize, d: usize| {
        0.5 * (jet.ddg[c * n + b][(d, e)] + jet.ddg[c * n + d][(b, e)] - jet.ddg[c * n + e][(b, d)])
    };
    let d_gamma = |c: usize, a: usize, b: usize, d: usize| {
        (0..n).map(|e| d_inv[c][(a, e)] * lower(e, b, d) + g_inv[(a, e)] * d_lower(c, e, b, d)).sum()
    };
    let riemann = riemann_from_connection(&gamma, d_gamma);
    Ok((gamma, PointCurvature::from_riemann(riemann, &g_inv)))
}

/// A Riemannian metric expressed in a single chart.
pub trait Metric: Send + Sync {
    fn dim(&self) -> usize;

    /// Domain error when `x` is outside the chart domain.
    fn check_point(&self, x: &[f64]) -> Result<()>;

    fn jet(&self, x: &[f64]) -> Result<MetricJet>;

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.jet(x)?.g)
    }

    fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        let jet = self.jet(x)?;
        let g_inv = inverse_spd(&jet.g)?;
        Ok(christoffel_from_derivs(&g_inv, &jet.dg))
    }

    fn curvature(&self, x: &[f64]) -> Result<PointCurvature> {
        Ok(curvature_from_jet(&self.jet(x)?)?.1)
    }
}

fn check_arity(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n || x.iter().any(|v| !v.is_finite()) {
        return Err(GrowthError::Domain(format!("expected {n} finite coordinates, got {x:?}")));
    }
    Ok(())
}

/// Rotationally symmetric metric families in polar/spherical charts.
#[derive(Clone)]
pub enum RadialFamily {
    /// e^{2Ω}(dR² + R²dΘ²) on (R, Θ).
    Iso2D { omega: SharedField },
    /// e^{2Ω}dR² + R²e^{2Π}dΘ² on (R, Θ); Π defaults to −Ω.
    Aniso2D { omega: SharedField, pi: Option<SharedField> },
    /// e^{2Ω}(dR² + R²dΘ² + R²sin²Θ dΦ²) on (R, Θ polar, Φ azimuth).
    Iso3D { omega: SharedField },
}

/// Tag shared by radial metrics, maps and problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RadialKind {
    Iso2D,
    Aniso2D,
    Iso3D,
}

impl RadialKind {
    pub fn name(self) -> &'static str {
        match self {
            RadialKind::Iso2D => "iso2d",
            RadialKind::Aniso2D => "aniso2d",
            RadialKind::Iso3D => "iso3d",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            RadialKind::Iso3D => 3,
            _ => 2,
        }
    }
}

#[derive(Clone)]
pub struct RadialMetric {
    family: RadialFamily,
    r_min: f64,
    r_max: f64,
    t: f64,
}

impl fmt::Debug for RadialMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialMetric({}, [{}, {}], t = {})", self.family_name(), self.r_min, self.r_max, self.t)
    }
}

/// h = R^m e^{2ψ}: returns (h, h', h'').
fn power_exp(r: f64, m: f64, psi: f64, dpsi: f64, ddpsi: f64) -> (f64, f64, f64) {
    let h = r.powf(m) * (2.0 * psi).exp();
    let k = m / r + 2.0 * dpsi;
    (h, k * h, (k * k - m / (r * r) + 2.0 * ddpsi) * h)
}

impl RadialMetric {
    pub fn new(family: RadialFamily, r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(GrowthError::Domain(format!(
                "radial domain must satisfy 0 < R_min < R_max, got [{r_min}, {r_max}]"
            )));
        }
        Ok(Self { family, r_min, r_max, t: 0.0 })
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn family(&self) -> &RadialFamily {
        &self.family
    }

    pub fn kind(&self) -> RadialKind {
        match self.family {
            RadialFamily::Iso2D { .. } => RadialKind::Iso2D,
            RadialFamily::Aniso2D { .. } => RadialKind::Aniso2D,
            RadialFamily::Iso3D { .. } => RadialKind::Iso3D,
        }
    }

    pub fn family_name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }

    pub fn omega(&self) -> &SharedField {
        match &self.family {
            RadialFamily::Iso2D { omega } | RadialFamily::Aniso2D { omega, .. } | RadialFamily::Iso3D { omega } => {
                omega
            }
        }
    }

    /// (Ω, Ω′, Ω″) at radius `r`.
    pub fn omega_jet(&self, r: f64) -> (f64, f64, f64) {
        let w = self.omega();
        (w.at(r, self.t), w.d1(r, self.t), w.d2(r, self.t))
    }

    /// (Π, Π′, Π″); equals −(Ω, Ω′, Ω″) when Π is not given.
    pub fn pi_jet(&self, r: f64) -> (f64, f64, f64) {
        match &self.family {
            RadialFamily::Aniso2D { pi: Some(p), .. } => (p.at(r, self.t), p.d1(r, self.t), p.d2(r, self.t)),
            _ => {
                let (a, b, c) = self.omega_jet(r);
                (-a, -b, -c)
            }
        }
    }

    pub fn det(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let r = x[0];
        let (w, _, _) = self.omega_jet(r);
        Ok(match &self.family {
            RadialFamily::Iso2D { .. } => r * r * (4.0 * w).exp(),
            RadialFamily::Aniso2D { pi: None, .. } => r * r,
            RadialFamily::Aniso2D { .. } => r * r * (2.0 * (w + self.pi_jet(r).0)).exp(),
            RadialFamily::Iso3D { .. } => r.powi(4) * x[1].sin().powi(2) * (6.0 * w).exp(),
        })
    }
}

impl Metric for RadialMetric {
    fn dim(&self) -> usize {
        match self.family {
            RadialFamily::Iso3D { .. } => 3,
            _ => 2,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_arity(x, self.dim())?;
        let slack = 1e-12 * self.r_max;
        if x[0] < self.r_min - slack || x[0] > self.r_max + slack {
            return Err(GrowthError::Domain(format!("R = {} outside [{}, {}]", x[0], self.r_min, self.r_max)));
        }
        if self.dim() == 3 && x[1].sin().abs() < 1e-12 {
            return Err(GrowthError::Definiteness(format!("spherical chart is singular at polar angle {}", x[1])));
        }
        Ok(())
    }

    fn jet(&self, x: &[f64]) -> Result<MetricJet> {
        self.check_point(x)?;
        let n = self.dim();
        let r = x[0];
        let (w, dw, ddw) = self.omega_jet(r);
        let rr = power_exp(r, 0.0, w, dw, ddw);
        let tt = match self.family {
            RadialFamily::Aniso2D { .. } => {
                let (p, dp, ddp) = self.pi_jet(r);
                power_exp(r, 2.0, p, dp, ddp)
            }
            _ => power_exp(r, 2.0, w, dw, ddw),
        };
        let mut g = DMatrix::zeros(n, n);
        let mut dg = vec![DMatrix::zeros(n, n); n];
        let mut ddg = vec![DMatrix::zeros(n, n); n * n];
        g[(0, 0)] = rr.0;
        dg[0][(0, 0)] = rr.1;
        ddg[0][(0, 0)] = rr.2;
        g[(1, 1)] = tt.0;
        dg[0][(1, 1)] = tt.1;
        ddg[0][(1, 1)] = tt.2;
        if n == 3 {
            let th = x[1];
            let s2 = th.sin().powi(2);
            let ds2 = (2.0 * th).sin();
            let dds2 = 2.0 * (2.0 * th).cos();
            g[(2, 2)] = tt.0 * s2;
            dg[0][(2, 2)] = tt.1 * s2;
            dg[1][(2, 2)] = tt.0 * ds2;
            ddg[0][(2, 2)] = tt.2 * s2;
            ddg[1][(2, 2)] = tt.1 * ds2;
            ddg[n][(2, 2)] = tt.1 * ds2;
            ddg[n + 1][(2, 2)] = tt.0 * dds2;
        }
        Ok(MetricJet { g, dg, ddg })
    }

    fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        self.check_point(x)?;
        let r = x[0];
        let (_, dw, _) = self.omega_jet(r);
        let mut gam = Christoffel::zeros(self.dim());
        gam.set(0, 0, 0, dw);
        match &self.family {
            RadialFamily::Iso2D { .. } => {
                gam.set(0, 1, 1, -r - r * r * dw);
                gam.set_sym(1, 0, 1, 1.0 / r + dw);
            }
            RadialFamily::Aniso2D { .. } => {
                let (w, _, _) = self.omega_jet(r);
                let (p, dp, _) = self.pi_jet(r);
                gam.set(0, 1, 1, -(2.0 * (p - w)).exp() * r * (1.0 + r * dp));
                gam.set_sym(1, 0, 1, 1.0 / r + dp);
            }
            RadialFamily::Iso3D { .. } => {
                let th = x[1];
                let (s, c) = th.sin_cos();
                gam.set(0, 1, 1, -r - r * r * dw);
                gam.set(0, 2, 2, -(r + r * r * dw) * s * s);
                gam.set_sym(1, 0, 1, 1.0 / r + dw);
                gam.set_sym(2, 0, 2, 1.0 / r + dw);
                gam.set(1, 2, 2, -s * c);
                gam.set_sym(2, 1, 2, c / s);
            }
        }
        Ok(gam)
    }
}

/// Euclidean metric in Cartesian, polar (r, θ) or spherical (r, θ polar, φ) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Euclidean {
    Cartesian(usize),
    Polar,
    Spherical,
}

impl Metric for Euclidean {
    fn dim(&self) -> usize {
        match *self {
            Euclidean::Cartesian(n) => n,
            Euclidean::Polar => 2,
            Euclidean::Spherical => 3,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_arity(x, self.dim())?;
        match self {
            Euclidean::Cartesian(_) => Ok(()),
            _ if x[0] <= 0.0 => Err(GrowthError::Domain(format!("radius {} must be positive", x[0]))),
            Euclidean::Spherical if x[1].sin().abs() < 1e-12 => {
                Err(GrowthError::Definiteness(format!("spherical chart is singular at polar angle {}", x[1])))
            }
            _ => Ok(()),
        }
    }

    fn jet(&self, x: &[f64]) -> Result<MetricJet> {
        self.check_point(x)?;
        let n = self.dim();
        let mut g = DMatrix::identity(n, n);
        let mut dg = vec![DMatrix::zeros(n, n); n];
        let mut ddg = vec![DMatrix::zeros(n, n); n * n];
        if !matches!(self, Euclidean::Cartesian(_)) {
            let r = x[0];
            g[(1, 1)] = r * r;
            dg[0][(1, 1)] = 2.0 * r;
            ddg[0][(1, 1)] = 2.0;
            if n == 3 {
                let th = x[1];
                let s2 = th.sin().powi(2);
                g[(2, 2)] = r * r * s2;
                dg[0][(2, 2)] = 2.0 * r * s2;
                dg[1][(2, 2)] = r * r * (2.0 * th).sin();
                ddg[0][(2, 2)] = 2.0 * s2;
                ddg[1][(2, 2)] = 2.0 * r * (2.0 * th).sin();
                ddg[n][(2, 2)] = 2.0 * r * (2.0 * th).sin();
                ddg[n + 1][(2, 2)] = 2.0 * r * r * (2.0 * th).cos();
            }
        }
        Ok(MetricJet { g, dg, ddg })
    }
}

/// Conformally flat metric e^{2Ω}δ on Cartesian coordinates.
#[derive(Clone)]
pub struct ConformalMetric {
    omega: SharedField,
    t: f64,
}

impl ConformalMetric {
    pub fn new(omega: SharedField) -> Self {
        Self { omega, t: 0.0 }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn omega(&self) -> &SharedField {
        &self.omega
    }

    /// −2e^{−2Ω}∇²Ω, the scalar curvature in two dimensions.
    pub fn scalar_curvature_2d(&self, x: &[f64]) -> f64 {
        let w = self.omega.value(x, self.t);
        let h = self.omega.hessian(x, self.t);
        -2.0 * (-2.0 * w).exp() * (h[0] + h[3])
    }
}

impl Metric for ConformalMetric {
    fn dim(&self) -> usize {
        self.omega.dim()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_arity(x, self.dim())?;
        let w = self.omega.value(x, self.t);
        if !w.is_finite() {
            return Err(GrowthError::Domain(format!("conformal factor undefined at {x:?}")));
        }
        Ok(())
    }

    fn jet(&self, x: &[f64]) -> Result<MetricJet> {
        self.check_point(x)?;
        let n = self.dim();
        let e = (2.0 * self.omega.value(x, self.t)).exp();
        let grad = self.omega.gradient(x, self.t);
        let hess = self.omega.hessian(x, self.t);
        let id = DMatrix::<f64>::identity(n, n);
        let g = &id * e;
        let dg = grad.iter().map(|gk| &id * (2.0 * gk * e)).collect();
        let ddg = (0..n * n)
            .map(|kl| {
                let (k, l) = (kl / n, kl % n);
                &id * ((2.0 * hess[kl] + 4.0 * grad[k] * grad[l]) * e)
            })
            .collect();
        Ok(MetricJet { g, dg, ddg })
    }
}

type MetricFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A metric given by an arbitrary closure; derivatives by central differences.
pub struct FnMetric {
    dim: usize,
    f: Box<MetricFn>,
    step: f64,
}

impl FnMetric {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { dim, f: Box::new(f), step: 1e-4 }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl Metric for FnMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_arity(x, self.dim)
    }

    fn jet(&self, x: &[f64]) -> Result<MetricJet> {
        self.check_point(x)?;
        let n = self.dim;
        let h = self.step;
        let eval = |dx: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(k, s) in dx {
                y[k] += s * h;
            }
            (self.f)(&y)
        };
        let g = eval(&[]);
        let dg = (0..n).map(|k| (eval(&[(k, 1.0)]) - eval(&[(k, -1.0)])) / (2.0 * h)).collect();
        let ddg = (0..n * n)
            .map(|kl| {
                let (k, l) = (kl / n, kl % n);
                if k == l {
                    (eval(&[(k, 1.0)]) - &g * 2.0 + eval(&[(k, -1.0)])) / (h * h)
                } else {
                    (eval(&[(k, 1.0), (l, 1.0)]) - eval(&[(k, 1.0), (l, -1.0)]) - eval(&[(k, -1.0), (l, 1.0)])
                        + eval(&[(k, -1.0), (l, -1.0)]))
                        / (4.0 * h * h)
                }
            })
            .collect();
        Ok(MetricJet { g, dg, ddg })
    }
}

/// Curvature at a set of query points.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub points: Vec<Vec<f64>>,
    pub curvature: Vec<PointCurvature>,
    pub max_riemann: f64,
    pub max_ricci: f64,
    pub max_scalar: f64,
}

impl CurvatureReport {
    pub fn from_parts(points: Vec<Vec<f64>>, curvature: Vec<PointCurvature>) -> Self {
        let max_riemann = curvature.iter().fold(0.0, |m: f64, c| m.max(c.riemann.max_abs()));
        let max_ricci = curvature.iter().fold(0.0, |m: f64, c| m.max(c.ricci.amax()));
        let max_scalar = curvature.iter().fold(0.0, |m: f64, c| m.max(c.scalar.abs()));
        Self { points, curvature, max_riemann, max_ricci, max_scalar }
    }
}

pub fn curvature_report(metric: &dyn Metric, points: &[Vec<f64>]) -> Result<CurvatureReport> {
    let curvature = points.par_iter().map(|x| metric.curvature(x)).collect::<Result<Vec<_>>>()?;
    Ok(CurvatureReport::from_parts(points.to_vec(), curvature))
}

/// A symmetric positive-definite matrix field on a lattice.
#[derive(Debug, Clone)]
pub struct GridMetric {
    lattice: Lattice,
    values: Vec<DMatrix<f64>>,
}

impl GridMetric {
    pub fn new(lattice: Lattice, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(GrowthError::Configuration(format!(
                "grid metric has {} values for {} nodes",
                values.len(),
                lattice.len()
            )));
        }
        let n = lattice.dim();
        for (k, g) in values.iter().enumerate() {
            if g.nrows() != n || g.ncols() != n {
                return Err(GrowthError::Configuration(format!(
                    "node {k}: expected {n}x{n} metric, got {}x{}",
                    g.nrows(),
                    g.ncols()
                )));
            }
            check_spd(g).map_err(|e| GrowthError::Definiteness(format!("node {k} at {:?}: {e}", lattice.coords(k))))?;
        }
        Ok(Self { lattice, values })
    }

    pub fn sample<F>(lattice: Lattice, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Sync,
    {
        let values = (0..lattice.len()).into_par_iter().map(|k| f(&lattice.coords(k))).collect::<Result<Vec<_>>>()?;
        Self::new(lattice, values)
    }

    pub fn from_metric(lattice: Lattice, metric: &dyn Metric) -> Result<Self> {
        if metric.dim() != lattice.dim() {
            return Err(GrowthError::Configuration(format!(
                "metric dimension {} does not match lattice dimension {}",
                metric.dim(),
                lattice.dim()
            )));
        }
        Self::sample(lattice, |x| metric.metric(x))
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.amax()))
    }

    fn require_margin(&self, node: usize, margin: usize) -> Result<()> {
        if node >= self.lattice.len() || self.lattice.margin(node) < margin {
            return Err(GrowthError::Domain(format!(
                "node {node} needs {margin} nodes of clearance from the lattice boundary"
            )));
        }
        Ok(())
    }

    fn fd<T, F>(&self, node: usize, axis: usize, scheme: FdScheme, f: F) -> T
    where
        F: Fn(usize) -> T,
        T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let h = self.lattice.spacing();
        let mut terms = scheme.first_derivative().iter().map(|&(o, w)| f(self.lattice.shift(node, axis, o)) * (w / h));
        let first = terms.next().unwrap();
        terms.fold(first, |acc, t| acc + t)
    }

    /// Central-difference connection at `node`.
    pub fn christoffel_at(&self, node: usize, scheme: FdScheme) -> Result<Christoffel> {
        self.require_margin(node, scheme.half_width())?;
        let g_inv = inverse_spd(&self.values[node])?;
        let dg: Vec<DMatrix<f64>> =
            (0..self.dim()).map(|k| self.fd(node, k, scheme, |m| self.values[m].clone())).collect();
        Ok(christoffel_from_derivs(&g_inv, &dg))
    }

    /// Central-difference connection at every node with enough clearance.
    pub fn christoffel_field(&self, scheme: FdScheme) -> Vec<Option<Christoffel>> {
        let w = scheme.half_width();
        (0..self.lattice.len())
            .into_par_iter()
            .map(|k| if self.lattice.margin(k) >= w { self.christoffel_at(k, scheme).ok() } else { None })
            .collect()
    }

    fn curvature_with(
        &self,
        node: usize,
        scheme: FdScheme,
        gamma_at: &dyn Fn(usize) -> Result<Christoffel>,
    ) -> Result<PointCurvature> {
        let n = self.dim();
        let gamma = gamma_at(node)?;
        let h = self.lattice.spacing();
        // d[c] = ∂_c Γ
        let mut d = Vec::with_capacity(n);
        for c in 0..n {
            let mut acc = vec![0.0; n * n * n];
            for &(o, wgt) in scheme.first_derivative() {
                let g = gamma_at(self.lattice.shift(node, c, o))?;
                for (a, v) in acc.iter_mut().zip(g.as_slice()) {
                    *a += wgt / h * v;
                }
            }
            d.push(acc);
        }
        let riemann = riemann_from_connection(&gamma, |c, a, b, dd| d[c][(a * n + b) * n + dd]);
        Ok(PointCurvature::from_riemann(riemann, &inverse_spd(&self.values[node])?))
    }

    /// Curvature at `node`, which must be `2 × half_width` nodes from the boundary.
    pub fn curvature_at(&self, node: usize, scheme: FdScheme) -> Result<PointCurvature> {
        self.require_margin(node, 2 * scheme.half_width())?;
        self.curvature_with(node, scheme, &|k| self.christoffel_at(k, scheme))
    }

    /// Curvature at every node with enough clearance, in lattice order.
    pub fn curvature_field(&self, scheme: FdScheme) -> Result<GridCurvature> {
        let gammas = self.christoffel_field(scheme);
        let nodes = self.lattice.interior(2 * scheme.half_width());
        let lookup =
            |k: usize| gammas[k].clone().ok_or_else(|| GrowthError::Domain(format!("no connection at node {k}")));
        let curvature =
            nodes.par_iter().map(|&k| self.curvature_with(k, scheme, &lookup)).collect::<Result<Vec<_>>>()?;
        Ok(GridCurvature { nodes, curvature })
    }

    /// Every other node, when the lattice can be coarsened.
    pub fn coarsen(&self) -> Option<GridMetric> {
        let coarse = self.lattice.coarsen()?;
        let values = (0..coarse.len()).map(|k| self.values[self.lattice.fine_of_coarse(&coarse, k)].clone()).collect();
        Some(GridMetric { lattice: coarse, values })
    }
}

#[derive(Debug, Clone)]
pub struct GridCurvature {
    pub nodes: Vec<usize>,
    pub curvature: Vec<PointCurvature>,
}

impl GridCurvature {
    /// The quantity whose vanishing means flatness: 𝖱 in 2D, R_AB in 3D.
    fn flatness_values(&self, dim: usize) -> Vec<Vec<f64>> {
        self.curvature.iter().map(|c| if dim == 2 { vec![c.scalar] } else { c.ricci.as_slice().to_vec() }).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlatnessOptions {
    pub scheme: FdScheme,
    /// Absolute floor on the tolerance.
    pub abs_tol: f64,
    /// Multiplier on the error estimate (Richardson or h²‖G‖).
    pub safety: f64,
}

impl Default for FlatnessOptions {
    fn default() -> Self {
        Self { scheme: FdScheme::Second, abs_tol: 1e-6, safety: 10.0 }
    }
}

#[derive(Debug, Clone)]
pub struct FlatnessReport {
    /// Max-abs Ricci (3D) or scalar curvature (2D) over interior nodes.
    pub residual: f64,
    /// Same quantity on the every-other-node lattice, when available.
    pub coarse_residual: Option<f64>,
    /// Discretisation error estimate behind the tolerance.
    pub error_estimate: f64,
    pub tolerance: f64,
    pub flat: bool,
    pub nodes: usize,
    pub worst_point: Vec<f64>,
}

/// Flatness verdict for a sampled metric.
///
/// With odd node counts the residual is compared against a Richardson
/// estimate of its own discretisation error, obtained from the coarsened
/// lattice; otherwise the tolerance is `abs_tol + safety·h²·max|G|`.
pub fn flatness_residual(metric: &GridMetric, opts: FlatnessOptions) -> Result<FlatnessReport> {
    let lat = metric.lattice();
    let w = opts.scheme.half_width();
    lat.require_min_nodes((4 * w + 1).max(5), "flatness check")?;
    let dim = metric.dim();
    if dim == 1 {
        return Ok(FlatnessReport {
            residual: 0.0,
            coarse_residual: None,
            error_estimate: 0.0,
            tolerance: opts.abs_tol,
            flat: true,
            nodes: lat.len(),
            worst_point: lat.coords(0),
        });
    }
    let fine = metric.curvature_field(opts.scheme)?;
    let values = fine.flatness_values(dim);
    let (mut residual, mut worst) = (0.0f64, fine.nodes[0]);
    for (k, v) in fine.nodes.iter().zip(&values) {
        let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if m > residual {
            residual = m;
            worst = *k;
        }
    }

    let coarse = metric.coarsen().filter(|c| c.lattice().min_count() > 4 * w);
    let (coarse_residual, error_estimate) = match coarse {
        Some(c) => {
            let cc = c.curvature_field(opts.scheme)?;
            let cvals = cc.flatness_values(dim);
            let order = 2 * w as i32;
            let denom = 2f64.powi(order) - 1.0;
            let mut est = 0.0f64;
            let mut cres = 0.0f64;
            for (ck, cv) in cc.nodes.iter().zip(&cvals) {
                let fk = lat.fine_of_coarse(c.lattice(), *ck);
                let idx = fine
                    .nodes
                    .binary_search(&fk)
                    .map_err(|_| GrowthError::Numeric("coarse node missing from fine interior".into()))?;
                for (a, b) in values[idx].iter().zip(cv) {
                    est = est.max((a - b).abs() / denom);
                    cres = cres.max(b.abs());
                }
            }
            (Some(cres), est)
        }
        None => (None, lat.spacing().powi(2) * metric.max_entry()),
    };
    let tolerance = opts.abs_tol + opts.safety * error_estimate;
    Ok(FlatnessReport {
        residual,
        coarse_residual,
        error_estimate,
        tolerance,
        flat: residual <= tolerance,
        nodes: fine.nodes.len(),
        worst_point: lat.coords(worst),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Chart, ExprField};
    use std::sync::Arc;

    fn radial(src: &str) -> SharedField {
        Arc::new(ExprField::parse(src, Chart::Radial).unwrap())
    }

    #[test]
    fn iso2d_closed_form_matches_jet() {
        let m = RadialMetric::new(RadialFamily::Iso2D { omega: radial("0.3*R^2 - R") }, 0.5, 2.0).unwrap();
        let x = [1.3, 0.4];
        let closed = m.christoffel(&x).unwrap();
        let jet = m.jet(&x).unwrap();
        let generic = christoffel_from_derivs(&inverse_spd(&jet.g).unwrap(), &jet.dg);
        assert!(closed.max_abs_diff(&generic) < 1e-13, "{closed:?} vs {generic:?}");
    }

    #[test]
    fn aniso_and_sphere_closed_forms_match_jet() {
        let a = RadialMetric::new(RadialFamily::Aniso2D { omega: radial("sin(R)"), pi: None }, 0.5, 2.0).unwrap();
        let s = RadialMetric::new(RadialFamily::Iso3D { omega: radial("0.2*R") }, 0.5, 2.0).unwrap();
        for (m, x) in [(&a, vec![1.1, 0.2]), (&s, vec![1.1, 0.7, 2.0])] {
            let jet = m.jet(&x).unwrap();
            let generic = christoffel_from_derivs(&inverse_spd(&jet.g).unwrap(), &jet.dg);
            assert!(m.christoffel(&x).unwrap().max_abs_diff(&generic) < 1e-13);
        }
    }

    #[test]
    fn determinants() {
        let w = radial("0.1*R");
        let iso = RadialMetric::new(RadialFamily::Iso2D { omega: w.clone() }, 1.0, 2.0).unwrap();
        let an = RadialMetric::new(RadialFamily::Aniso2D { omega: w.clone(), pi: None }, 1.0, 2.0).unwrap();
        let sp = RadialMetric::new(RadialFamily::Iso3D { omega: w }, 1.0, 2.0).unwrap();
        let r: f64 = 1.5;
        assert!((iso.det(&[r, 0.0]).unwrap() - r * r * (0.6f64).exp()).abs() < 1e-12);
        assert!((an.det(&[r, 0.0]).unwrap() - r * r).abs() < 1e-12);
        let x = [r, 0.8, 0.1];
        let exact = r.powi(4) * 0.8f64.sin().powi(2) * (0.9f64).exp();
        assert!((sp.det(&x).unwrap() - exact).abs() < 1e-12);
        assert!((sp.metric(&x).unwrap().determinant() - exact).abs() < 1e-12);
    }

    #[test]
    fn domain_and_definiteness_errors() {
        let m = RadialMetric::new(RadialFamily::Iso3D { omega: radial("0") }, 1.0, 2.0).unwrap();
        assert!(matches!(m.christoffel(&[3.0, 1.0, 0.0]), Err(GrowthError::Domain(_))));
        assert!(matches!(m.christoffel(&[1.5, 0.0, 0.0]), Err(GrowthError::Definiteness(_))));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(check_spd(&bad), Err(GrowthError::Definiteness(_))));
    }

    #[test]
    fn euclidean_charts_are_flat() {
        for (m, x) in [
            (Euclidean::Cartesian(3), vec![0.1, 0.2, 0.3]),
            (Euclidean::Polar, vec![1.3, 0.2]),
            (Euclidean::Spherical, vec![1.3, 0.7, 0.2]),
        ] {
            assert!(m.curvature(&x).unwrap().riemann.max_abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_scalar_curvature() {
        let a = 1.7;
        let m = FnMetric::new(2, move |x: &[f64]| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a * a, a * a * x[0].sin().powi(2)]))
        });
        let c = m.curvature(&[0.9, 0.3]).unwrap();
        assert!((c.scalar - 2.0 / (a * a)).abs() < 1e-6, "{}", c.scalar);
    }

    #[test]
    fn antisymmetries() {
        let m =
            ConformalMetric::new(Arc::new(ExprField::parse("0.3*x*y - 0.1*z^2 + 0.2*x", Chart::Cartesian(3)).unwrap()));
        let x = [0.3, -0.2, 0.5];
        let jet = m.jet(&x).unwrap();
        let c = m.curvature(&x).unwrap();
        let low = c.riemann.lowered(&jet.g);
        for a in 0..3 {
            for b in 0..3 {
                for cc in 0..3 {
                    for d in 0..3 {
                        assert_eq!(c.riemann.get(a, b, cc, d), -c.riemann.get(a, b, d, cc));
                        assert!((low.get(a, b, cc, d) + low.get(b, a, cc, d)).abs() < 1e-12);
                    }
                }
            }
        }
        assert!((&c.ricci - c.ricci.transpose()).amax() < 1e-12);
    }

    #[test]
    fn two_dimensional_ricci_is_half_scalar_times_metric() {
        let m = ConformalMetric::new(Arc::new(ExprField::parse("sin(x)*y", Chart::Cartesian(2)).unwrap()));
        let x = [0.4, 0.7];
        let c = m.curvature(&x).unwrap();
        let g = m.metric(&x).unwrap();
        assert!((&c.ricci - &g * (0.5 * c.scalar)).amax() < 1e-12);
        assert!((c.scalar - m.scalar_curvature_2d(&x)).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_metrics_are_flat() {
        let m = FnMetric::new(1, |x: &[f64]| DMatrix::from_element(1, 1, 1.0 + x[0] * x[0]));
        assert_eq!(m.curvature(&[0.3]).unwrap().ricci[(0, 0)], 0.0);
        let g = GridMetric::from_metric(Lattice::cube(1, 0.0, 1.0, 9).unwrap(), &m).unwrap();
        assert!(flatness_residual(&g, FlatnessOptions::default()).unwrap().flat);
    }

    #[test]
    fn grid_christoffel_converges_to_closed_form() {
        let m = RadialMetric::new(RadialFamily::Iso2D { omega: radial("-R^2/4") }, 0.5, 2.0).unwrap();
        let mut errs = Vec::new();
        for n in [17, 33] {
            let lat = Lattice::new(vec![1.0, 0.0], 0.5 / (n - 1) as f64, vec![n, n]).unwrap();
            let g = GridMetric::from_metric(lat.clone(), &m).unwrap();
            let node = lat.flat(&[(n - 1) / 2, (n - 1) / 2]);
            let fd = g.christoffel_at(node, FdScheme::Second).unwrap();
            errs.push(fd.max_abs_diff(&m.christoffel(&lat.coords(node)).unwrap()));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "{errs:?}");
    }

    #[test]
    fn small_grid_is_configuration_error() {
        let lat = Lattice::cube(2, 0.0, 1.0, 4).unwrap();
        let g = GridMetric::new(lat.clone(), vec![DMatrix::identity(2, 2); lat.len()]).unwrap();
        assert!(matches!(flatness_residual(&g, FlatnessOptions::default()), Err(GrowthError::Configuration(_))));
    }

    #[test]
    fn flatness_verdicts() {
        let lat = Lattice::cube(3, 0.0, 1.0, 17).unwrap();
        let delta = GridMetric::new(lat.clone(), vec![DMatrix::identity(3, 3); lat.len()]).unwrap();
        let r = flatness_residual(&delta, FlatnessOptions::default()).unwrap();
        assert!(r.flat && r.residual == 0.0);
        let curved = ConformalMetric::new(Arc::new(ExprField::parse("x*y", Chart::Cartesian(3)).unwrap()));
        let g = GridMetric::from_metric(lat, &curved).unwrap();
        let r = flatness_residual(&g, FlatnessOptions::default()).unwrap();
        assert!(!r.flat && r.residual > 0.5, "{r:?}");
    }

    #[test]
    fn grid_boundary_nodes_are_rejected() {
        let lat = Lattice::cube(2, 0.0, 1.0, 9).unwrap();
        let g = GridMetric::new(lat.clone(), vec![DMatrix::identity(2, 2); lat.len()]).unwrap();
        assert!(matches!(g.curvature_at(lat.flat(&[1, 4]), FdScheme::Second), Err(GrowthError::Domain(_))));
        assert!(g.curvature_at(lat.flat(&[2, 4]), FdScheme::Second).is_ok());
    }
}
