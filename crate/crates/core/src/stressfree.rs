//! Stress-free (flat) conformal growth: the 2D harmonic condition, the
//! radial cone family, the 3D flatness system and its space-form solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::diffgeo::{flatness_residual, FlatnessOptions, FlatnessReport, GridMetric};
use crate::error::{GrowthError, Result};
use crate::expr::{Chart, Expr, ExprField};
use crate::field::{ScalarField, SharedField};
use crate::lattice::Lattice;

/// Finite-difference derivatives of a sampled scalar at one node.
#[derive(Debug, Clone)]
pub struct NodeDerivatives {
    pub gradient: Vec<f64>,
    /// Row-major.
    pub hessian: Vec<f64>,
}

impl NodeDerivatives {
    pub fn laplacian(&self) -> f64 {
        let n = self.gradient.len();
        (0..n).map(|i| self.hessian[i * n + i]).sum()
    }
}

/// Second-order central differences at a node one cell from the boundary.
pub fn node_derivatives(lattice: &Lattice, values: &[f64], node: usize) -> NodeDerivatives {
    let n = lattice.dim();
    let h = lattice.spacing();
    let at = |k: usize| values[k];
    let mut gradient = vec![0.0; n];
    let mut hessian = vec![0.0; n * n];
    for i in 0..n {
        let p = lattice.shift(node, i, 1);
        let m = lattice.shift(node, i, -1);
        gradient[i] = (at(p) - at(m)) / (2.0 * h);
        hessian[i * n + i] = (at(p) - 2.0 * at(node) + at(m)) / (h * h);
        for j in (i + 1)..n {
            let pp = lattice.shift(p, j, 1);
            let pm = lattice.shift(p, j, -1);
            let mp = lattice.shift(m, j, 1);
            let mm = lattice.shift(m, j, -1);
            let v = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * h * h);
            hessian[i * n + j] = v;
            hessian[j * n + i] = v;
        }
    }
    NodeDerivatives { gradient, hessian }
}

/// Residuals of the six 3D flatness equations for e^{2Ω}δ:
/// Ω,ᵢⱼ − Ω,ᵢΩ,ⱼ for (1,2), (1,3), (2,3), then
/// Ω,ᵢᵢ + ∇²Ω + Σ_{k≠i} Ω,ₖ² for i = 1, 2, 3.
pub fn flatness_equations(gradient: &[f64], hessian: &[f64]) -> [f64; 6] {
    let g = gradient;
    let h = |i: usize, j: usize| hessian[i * 3 + j];
    let lap = h(0, 0) + h(1, 1) + h(2, 2);
    let sq = [g[0] * g[0], g[1] * g[1], g[2] * g[2]];
    let total: f64 = sq.iter().sum();
    [
        h(0, 1) - g[0] * g[1],
        h(0, 2) - g[0] * g[2],
        h(1, 2) - g[1] * g[2],
        h(0, 0) + lap + total - sq[0],
        h(1, 1) + lap + total - sq[1],
        h(2, 2) + lap + total - sq[2],
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub abs_tol: f64,
    pub safety: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-6, safety: 10.0 }
    }
}

/// Grid verdict on a family of residual equations.
#[derive(Debug, Clone)]
pub struct Verdict {
    /// Max-abs residual of each equation over interior nodes.
    pub per_equation: Vec<f64>,
    pub residual: f64,
    pub error_estimate: f64,
    pub tolerance: f64,
    pub flat: bool,
}

fn residual_field<F>(lattice: &Lattice, values: &[f64], eqs: &F) -> (Vec<usize>, Vec<Vec<f64>>)
where
    F: Fn(&NodeDerivatives) -> Vec<f64> + Sync,
{
    let nodes = lattice.interior(1);
    let res = nodes.par_iter().map(|&k| eqs(&node_derivatives(lattice, values, k))).collect();
    (nodes, res)
}

/// Residuals on the lattice, with a Richardson error estimate from the
/// every-other-node lattice when the node counts allow it.
fn grid_verdict<F>(lattice: &Lattice, values: &[f64], scale: f64, opts: CheckOptions, eqs: F) -> Result<Verdict>
where
    F: Fn(&NodeDerivatives) -> Vec<f64> + Sync,
{
    let (nodes, fine) = residual_field(lattice, values, &eqs);
    let m = fine.first().map_or(0, Vec::len);
    let mut per_equation = vec![0.0f64; m];
    for r in &fine {
        for (p, v) in per_equation.iter_mut().zip(r) {
            *p = p.max(v.abs());
        }
    }
    let residual = per_equation.iter().fold(0.0f64, |a, b| a.max(*b));
    let coarse = lattice.coarsen().filter(|c| c.min_count() >= 5);
    let error_estimate = match coarse {
        Some(c) => {
            let cvals: Vec<f64> = (0..c.len()).map(|k| values[lattice.fine_of_coarse(&c, k)]).collect();
            let (cnodes, cres) = residual_field(&c, &cvals, &eqs);
            let mut est = 0.0f64;
            for (ck, cr) in cnodes.iter().zip(&cres) {
                let fk = lattice.fine_of_coarse(&c, *ck);
                let idx = nodes
                    .binary_search(&fk)
                    .map_err(|_| GrowthError::Numeric("coarse node missing from fine interior".into()))?;
                for (a, b) in fine[idx].iter().zip(cr) {
                    est = est.max((a - b).abs() / 3.0);
                }
            }
            est
        }
        None => lattice.spacing().powi(2) * scale,
    };
    let tolerance = opts.abs_tol + opts.safety * error_estimate;
    Ok(Verdict { per_equation, residual, error_estimate, tolerance, flat: residual <= tolerance })
}

fn sample(field: &dyn ScalarField, lattice: &Lattice, t: f64) -> Result<Vec<f64>> {
    if field.dim() != lattice.dim() {
        return Err(GrowthError::Configuration(format!(
            "field dimension {} does not match lattice dimension {}",
            field.dim(),
            lattice.dim()
        )));
    }
    let values: Vec<f64> = (0..lattice.len()).into_par_iter().map(|k| field.value(&lattice.coords(k), t)).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(GrowthError::Domain(format!("growth field is undefined at {:?}", lattice.coords(k))));
    }
    Ok(values)
}

fn conformal_grid(lattice: &Lattice, values: &[f64]) -> Result<GridMetric> {
    let n = lattice.dim();
    let g = values.iter().map(|w| DMatrix::identity(n, n) * (2.0 * w).exp()).collect();
    GridMetric::new(lattice.clone(), g)
}

/// 2D verdict: max |∇²Ω| over interior nodes.
pub fn check_2d(omega: &dyn ScalarField, lattice: &Lattice, t: f64, opts: CheckOptions) -> Result<Verdict> {
    if lattice.dim() != 2 {
        return Err(GrowthError::Configuration("check_2d needs a 2D lattice".into()));
    }
    lattice.require_min_nodes(5, "2D flatness check")?;
    let values = sample(omega, lattice, t)?;
    let scale = values.iter().fold(0.0f64, |m, w| m.max((2.0 * w).exp()));
    grid_verdict(lattice, &values, scale, opts, |d| vec![d.laplacian()])
}

/// 3D verdict from the six PDEs, cross-checked against the Ricci tensor of
/// the sampled metric e^{2Ω}δ.
#[derive(Debug, Clone)]
pub struct Check3d {
    pub pde: Verdict,
    pub ricci: FlatnessReport,
}

impl Check3d {
    pub fn agree(&self) -> bool {
        self.pde.flat == self.ricci.flat
    }
}

pub fn check_3d(omega: &dyn ScalarField, lattice: &Lattice, t: f64, opts: CheckOptions) -> Result<Check3d> {
    if lattice.dim() != 3 {
        return Err(GrowthError::Configuration("check_3d needs a 3D lattice".into()));
    }
    lattice.require_min_nodes(5, "3D flatness check")?;
    let values = sample(omega, lattice, t)?;
    let scale = values.iter().fold(0.0f64, |m, w| m.max((2.0 * w).exp()));
    let pde = grid_verdict(lattice, &values, scale, opts, |d| flatness_equations(&d.gradient, &d.hessian).to_vec())?;
    let ricci = flatness_residual(
        &conformal_grid(lattice, &values)?,
        FlatnessOptions { abs_tol: opts.abs_tol, safety: opts.safety, ..FlatnessOptions::default() },
    )?;
    Ok(Check3d { pde, ricci })
}

/// Six flatness residuals from the field's own derivatives at `x`.
pub fn flatness_equations_at(omega: &dyn ScalarField, x: &[f64], t: f64) -> [f64; 6] {
    flatness_equations(&omega.gradient(x, t), &omega.hessian(x, t))
}

/// e^{2Ω} = ξR^{2η}: an annular piece of a cone.
#[derive(Debug, Clone)]
pub struct ConeFamily {
    pub xi_amplitude: f64,
    pub eta: f64,
    /// c = 1/(1+η).
    pub cone_parameter: f64,
    /// 2π(1 − 1/|c|); negative values are surplus angles.
    pub deficit_angle: f64,
    pub omega: SharedField,
}

pub fn radial_cone_family(xi_amplitude: f64, eta: f64) -> Result<ConeFamily> {
    if !(xi_amplitude > 0.0 && xi_amplitude.is_finite()) {
        return Err(GrowthError::Configuration(format!("cone amplitude must be positive, got {xi_amplitude}")));
    }
    if (1.0 + eta).abs() < 1e-14 {
        return Err(GrowthError::DegenerateCone);
    }
    let c = 1.0 / (1.0 + eta);
    let e = Expr::num(0.5 * xi_amplitude.ln()) + Expr::num(eta) * Expr::radius().ln();
    let source = format!("0.5*ln({xi_amplitude}) + {eta}*ln(R)");
    let omega = Arc::new(ExprField::from_expr(source, &e, Chart::Cartesian(2))?);
    Ok(ConeFamily { xi_amplitude, eta, cone_parameter: c, deficit_angle: 2.0 * PI * (1.0 - 1.0 / c.abs()), omega })
}

/// Ω = −ln(c₀|X|² + c·X + c₄) in three dimensions.
///
/// e^{2Ω}δ has constant sectional curvature K = 4c₀c₄ − |c|², so the member
/// is flat exactly when |c|² = 4c₀c₄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralFamily {
    pub c0: f64,
    pub c: [f64; 3],
    pub c4: f64,
}

impl GeneralFamily {
    /// Flat member c₀|X − X₀|² (an inversion centred at X₀).
    pub fn flat(c0: f64, center: [f64; 3]) -> Self {
        let c = center.map(|x| -2.0 * c0 * x);
        let c4 = c0 * center.iter().map(|x| x * x).sum::<f64>();
        Self { c0, c, c4 }
    }

    /// Ω = −ln(c₁X¹): the half-space member.
    pub fn half_space(c1: f64) -> Self {
        Self { c0: 0.0, c: [c1, 0.0, 0.0], c4: 0.0 }
    }

    pub fn argument(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.c0 * r2 + self.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.c4
    }

    pub fn sectional_curvature(&self) -> f64 {
        4.0 * self.c0 * self.c4 - self.c.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn is_flat(&self) -> bool {
        let scale = (4.0 * self.c0 * self.c4).abs().max(self.c.iter().map(|v| v * v).sum::<f64>());
        self.sectional_curvature().abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    }

    pub fn omega(&self) -> Result<SharedField> {
        let x = |i| Expr::cart(i);
        let e = Expr::num(self.c0) * Expr::radius().powf(2.0)
            + Expr::num(self.c[0]) * x(0)
            + Expr::num(self.c[1]) * x(1)
            + Expr::num(self.c[2]) * x(2)
            + Expr::num(self.c4);
        let source =
            format!("-ln({}*R^2 + {}*X1 + {}*X2 + {}*X3 + {})", self.c0, self.c[0], self.c[1], self.c[2], self.c4);
        Ok(Arc::new(ExprField::from_expr(source, &-e.ln(), Chart::Cartesian(3))?))
    }

    /// Domain error unless the argument stays positive with the given margin
    /// (fraction of its largest value on the lattice).
    pub fn require_positive(&self, lattice: &Lattice, margin: f64) -> Result<()> {
        let vals: Vec<f64> = (0..lattice.len()).map(|k| self.argument(&lattice.coords(k))).collect();
        let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(k) = vals.iter().position(|v| *v <= margin * max) {
            return Err(GrowthError::Domain(format!(
                "growth argument {:e} is not positive at {:?}",
                vals[k],
                lattice.coords(k)
            )));
        }
        Ok(())
    }
}

/// Domain error when a lattice node comes within `margin × extent` of a
/// singular set, measured by `distance`.
pub fn require_clearance(lattice: &Lattice, distance: impl Fn(&[f64]) -> f64, margin: f64) -> Result<()> {
    let extent = lattice.counts().iter().map(|&n| (n - 1) as f64 * lattice.spacing()).fold(0.0, f64::max);
    for k in 0..lattice.len() {
        let x = lattice.coords(k);
        if distance(&x) < margin * extent {
            return Err(GrowthError::Domain(format!(
                "node {x:?} is within {margin} of the domain extent from a singular point"
            )));
        }
    }
    Ok(())
}

/// X ↦ X/(c|X|²), so that R̃ = 1/(cR).
pub fn inversion_map(c: f64, x: &[f64; 3]) -> Result<[f64; 3]> {
    if c == 0.0 || !c.is_finite() {
        return Err(GrowthError::Configuration(format!("inversion constant must be nonzero, got {c}")));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return Err(GrowthError::SingularPoint("inversion is undefined at the origin".into()));
    }
    Ok(x.map(|v| v / (c * r2)))
}

/// max over `points` of |JᵀJ − e^{2Ω}δ| with J the central-difference
/// Jacobian of the inversion and Ω = −ln(c|X|²).
pub fn inversion_pullback_error(c: f64, points: &[[f64; 3]], step: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in points {
        let mut j = DMatrix::zeros(3, 3);
        for k in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += step;
            xm[k] -= step;
            let (fp, fm) = (inversion_map(c, &xp)?, inversion_map(c, &xm)?);
            for i in 0..3 {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let target = DMatrix::<f64>::identity(3, 3) / (c * c * r2 * r2);
        worst = worst.max((j.transpose() * j - target).amax());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgeo::{ConformalMetric, Metric};
    use crate::field::Constant;

    fn cart(src: &str, n: usize) -> ExprField {
        ExprField::parse(src, Chart::Cartesian(n)).unwrap()
    }

    #[test]
    fn harmonic_and_non_harmonic_2d() {
        let lat = Lattice::new(vec![0.5, 0.5], 1.0 / 32.0, vec![33, 33]).unwrap();
        let v = check_2d(&cart("0.3*x - 1.2*y", 2), &lat, 0.0, CheckOptions::default()).unwrap();
        assert!(v.flat && v.residual < 1e-9);
        let v = check_2d(&cart("R^2", 2), &lat, 0.0, CheckOptions::default()).unwrap();
        assert!(!v.flat && (v.residual - 4.0).abs() < 1e-8);
    }

    #[test]
    fn cone_family() {
        let c = radial_cone_family(1.0, 0.0).unwrap();
        assert_eq!(c.deficit_angle, 0.0);
        let c = radial_cone_family(2.0, 1.0).unwrap();
        assert!((c.cone_parameter - 0.5).abs() < 1e-15);
        assert!((c.deficit_angle + 2.0 * PI).abs() < 1e-14);
        assert!(matches!(radial_cone_family(1.0, -1.0), Err(GrowthError::DegenerateCone)));
        let lat = Lattice::new(vec![0.5, 0.5], 1.0 / 32.0, vec![33, 33]).unwrap();
        for (xi, eta) in [(0.5, 0.3), (2.0, -0.7), (1.3, 2.5)] {
            let fam = radial_cone_family(xi, eta).unwrap();
            assert!(check_2d(fam.omega.as_ref(), &lat, 0.0, CheckOptions::default()).unwrap().flat);
            let x = [0.9, 0.7];
            assert!((fam.omega.value(&x, 0.0) * 2.0 - (xi * (0.81f64 + 0.49).powf(eta)).ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn check_2d_agrees_with_scalar_curvature() {
        let lat = Lattice::new(vec![0.5, 0.5], 1.0 / 16.0, vec![17, 17]).unwrap();
        for src in ["x*y", "0.2*x^2 + 0.1*y", "ln(R)", "exp(x)*cos(y)", "sin(x)*y"] {
            let f = cart(src, 2);
            let a = check_2d(&f, &lat, 0.0, CheckOptions::default()).unwrap();
            let g = GridMetric::from_metric(lat.clone(), &ConformalMetric::new(Arc::new(f))).unwrap();
            let b = flatness_residual(&g, FlatnessOptions::default()).unwrap();
            assert_eq!(a.flat, b.flat, "{src}");
        }
    }

    #[test]
    fn space_form_curvature() {
        let sphere = GeneralFamily { c0: 0.5, c: [0.0; 3], c4: 2.0 };
        assert_eq!(sphere.sectional_curvature(), 4.0);
        let flat = GeneralFamily::flat(1.0, [-2.0, -2.0, -2.0]);
        assert!(flat.is_flat());
        assert!(flat.c.iter().all(|c| *c != 0.0) && flat.c4 != 0.0);
        assert_eq!(GeneralFamily::half_space(2.0).sectional_curvature(), -4.0);
        // Ricci = 2K·G for every member
        for fam in
            [sphere, flat, GeneralFamily::half_space(1.5), GeneralFamily { c0: 1.0, c: [0.3, -0.2, 0.5], c4: 1.0 }]
        {
            let m = ConformalMetric::new(fam.omega().unwrap());
            let x = [0.6, 0.4, 0.7];
            let c = m.curvature(&x).unwrap();
            let g = m.metric(&x).unwrap();
            let k = fam.sectional_curvature();
            assert!((&c.ricci - &g * (2.0 * k)).amax() < 1e-9 * (1.0 + k.abs()), "{fam:?}");
            let pde = flatness_equations_at(fam.omega().unwrap().as_ref(), &x, 0.0);
            assert_eq!(pde.iter().all(|v| v.abs() < 1e-10), fam.is_flat(), "{fam:?}");
        }
    }

    #[test]
    fn check_3d_verdicts() {
        let lat = Lattice::cube(3, 0.0, 1.0, 17).unwrap();
        let flat = GeneralFamily::flat(1.0, [-2.0, -2.0, -2.0]);
        flat.require_positive(&lat, 0.0).unwrap();
        let r = check_3d(flat.omega().unwrap().as_ref(), &lat, 0.0, CheckOptions::default()).unwrap();
        assert!(r.pde.flat && r.ricci.flat && r.agree(), "{r:?}");
        let r = check_3d(&Constant { dim: 3, value: 0.4 }, &lat, 0.0, CheckOptions::default()).unwrap();
        assert!(r.pde.residual == 0.0 && r.pde.flat && r.ricci.flat);
        let r = check_3d(&cart("x*y", 3), &lat, 0.0, CheckOptions::default()).unwrap();
        assert!(!r.pde.flat && !r.ricci.flat);
        let lat = Lattice::new(vec![0.5, 0.0, 0.0], 1.0 / 16.0, vec![17, 17, 17]).unwrap();
        let r = check_3d(GeneralFamily::half_space(1.0).omega().unwrap().as_ref(), &lat, 0.0, CheckOptions::default())
            .unwrap();
        assert!(!r.pde.flat && !r.ricci.flat && r.agree());
    }

    #[test]
    fn inversion() {
        assert_eq!(inversion_map(1.0, &[2.0, 0.0, 0.0]).unwrap(), [0.5, 0.0, 0.0]);
        assert_eq!(inversion_map(1.0, &[0.0, 1.0, 0.0]).unwrap(), [0.0, 1.0, 0.0]);
        let x = [0.3, -1.2, 0.8];
        let back = inversion_map(2.5, &inversion_map(2.5, &x).unwrap()).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(matches!(inversion_map(1.0, &[0.0; 3]), Err(GrowthError::SingularPoint(_))));
        assert!(inversion_pullback_error(1.5, &[[0.3, 0.5, 0.9], [1.0, -1.0, 2.0]], 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn clearance() {
        let lat = Lattice::cube(2, -1.0, 1.0, 5).unwrap();
        let r = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(require_clearance(&lat, r, 0.1).is_err());
        let lat = Lattice::cube(2, 0.5, 1.0, 5).unwrap();
        assert!(require_clearance(&lat, r, 0.1).is_ok());
    }
}
