//! Scalar fields over a coordinate chart, with time as a frozen parameter.
//!
//! Implementors supply values and, when they can, exact derivatives. The
//! default derivative methods fall back to central finite differences.

use std::fmt;
use std::sync::Arc;

/// Step used by the finite-difference fallbacks, scaled by `max(1, |x|)`.
pub const FD_GRADIENT_STEP: f64 = 1e-5;
pub const FD_HESSIAN_STEP: f64 = 1e-4;

pub trait ScalarField: Send + Sync {
    /// Number of chart coordinates the field expects.
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64], t: f64) -> f64;

    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        fd_gradient(|y| self.value(y, t), x, FD_GRADIENT_STEP)
    }

    /// Row-major `dim × dim` Hessian.
    fn hessian(&self, x: &[f64], t: f64) -> Vec<f64> {
        fd_hessian(|y| self.value(y, t), x, FD_HESSIAN_STEP)
    }

    fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        let dt = FD_GRADIENT_STEP * t.abs().max(1.0);
        (self.value(x, t + dt) - self.value(x, t - dt)) / (2.0 * dt)
    }

    /// True when `gradient`/`hessian` are exact rather than finite differences.
    fn has_analytic_derivatives(&self) -> bool {
        false
    }
}

pub type SharedField = Arc<dyn ScalarField>;

impl fmt::Debug for dyn ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField(dim = {})", self.dim())
    }
}

/// Convenience accessors for one-dimensional (radial) fields.
pub trait RadialField {
    fn at(&self, r: f64, t: f64) -> f64;
    fn d1(&self, r: f64, t: f64) -> f64;
    fn d2(&self, r: f64, t: f64) -> f64;
    fn dt(&self, r: f64, t: f64) -> f64;
}

impl<F: ScalarField + ?Sized> RadialField for F {
    fn at(&self, r: f64, t: f64) -> f64 {
        self.value(&[r], t)
    }
    fn d1(&self, r: f64, t: f64) -> f64 {
        self.gradient(&[r], t)[0]
    }
    fn d2(&self, r: f64, t: f64) -> f64 {
        self.hessian(&[r], t)[0]
    }
    fn dt(&self, r: f64, t: f64) -> f64 {
        self.time_derivative(&[r], t)
    }
}

pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step * x[i].abs().max(1.0);
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n * n];
    let mut y = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        let hi = step * x[i].abs().max(1.0);
        y[i] = x[i] + hi;
        let fp = f(&y);
        y[i] = x[i] - hi;
        let fm = f(&y);
        y[i] = x[i];
        out[i * n + i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..n {
            let hj = step * x[j].abs().max(1.0);
            let mut corner = |si: f64, sj: f64| {
                y[i] = x[i] + si * hi;
                y[j] = x[j] + sj * hj;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * hi * hj);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// A field backed by a closure; derivatives by finite differences.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], f64) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> ScalarField for FnField<F>
where
    F: Fn(&[f64], f64) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        (self.f)(x, t)
    }
}

/// Constant field.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl ScalarField for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64], _t: f64) -> f64 {
        self.value
    }
    fn gradient(&self, _x: &[f64], _t: f64) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn hessian(&self, _x: &[f64], _t: f64) -> Vec<f64> {
        vec![0.0; self.dim * self.dim]
    }
    fn time_derivative(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
    fn has_analytic_derivatives(&self) -> bool {
        true
    }
}

pub fn zero(dim: usize) -> SharedField {
    Arc::new(Constant { dim, value: 0.0 })
}

/// Natural cubic spline through (R, value) samples, time independent.
/// Outside the table the end cubics are extended.
#[derive(Debug, Clone)]
pub struct TabulatedRadial {
    r: Vec<f64>,
    v: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl TabulatedRadial {
    pub fn new(r: Vec<f64>, v: Vec<f64>) -> crate::Result<Self> {
        let n = r.len();
        if n < 3 || v.len() != n {
            return Err(crate::GrowthError::Configuration(format!(
                "a table needs at least 3 (R, value) rows, got {n}"
            )));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
            return Err(crate::GrowthError::Configuration(
                "table radii must be strictly increasing with finite values".into(),
            ));
        }
        // tridiagonal solve for the interior second derivatives
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
            let rhs = 6.0 * ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { r, v, m })
    }

    /// Rows `R,value`; blank lines and `#` comments are skipped, as is a
    /// non-numeric header row.
    pub fn parse_csv(text: &str) -> crate::Result<Self> {
        let (mut r, mut v) = (Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<Vec<f64>> = cells.iter().map(|c| c.parse().ok()).collect();
            match parsed {
                Some(p) if p.len() == 2 => {
                    r.push(p[0]);
                    v.push(p[1]);
                }
                None if r.is_empty() => continue,
                _ => {
                    return Err(crate::GrowthError::Parse {
                        line: i + 1,
                        column: 1,
                        message: format!("expected 'R,value', got '{line}'"),
                    })
                }
            }
        }
        Self::new(r, v)
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.r.partition_point(|&ri| ri <= x);
        k.clamp(1, self.r.len() - 1) - 1
    }

    /// (value, first, second derivative).
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let i = self.segment(x);
        let h = self.r[i + 1] - self.r[i];
        let (a, b) = ((self.r[i + 1] - x) / h, (x - self.r[i]) / h);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let val = a * self.v[i] + b * self.v[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 =
            (self.v[i + 1] - self.v[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        (val, d1, a * m0 + b * m1)
    }
}

impl ScalarField for TabulatedRadial {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64], _t: f64) -> f64 {
        self.eval(x[0]).0
    }
    fn gradient(&self, x: &[f64], _t: f64) -> Vec<f64> {
        vec![self.eval(x[0]).1]
    }
    fn hessian(&self, x: &[f64], _t: f64) -> Vec<f64> {
        vec![self.eval(x[0]).2]
    }
    fn time_derivative(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
    fn has_analytic_derivatives(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_fallback_matches_closed_form() {
        let f = FnField::new(2, |x: &[f64], t: f64| (x[0] * x[1]).sin() + t * x[0] * x[0]);
        let x = [0.3, 1.2];
        let g = f.gradient(&x, 0.5);
        assert!((g[0] - (1.2 * (0.36f64).cos() + 0.3)).abs() < 1e-8);
        assert!((g[1] - 0.3 * (0.36f64).cos()).abs() < 1e-8);
        let h = f.hessian(&x, 0.5);
        let exact_xy = (0.36f64).cos() - 0.36 * (0.36f64).sin();
        assert!((h[1] - exact_xy).abs() < 1e-6);
        assert!((h[1] - h[2]).abs() < 1e-12);
        assert!((f.time_derivative(&x, 0.5) - 0.09).abs() < 1e-8);
    }

    #[test]
    fn spline_reproduces_smooth_table() {
        let r: Vec<f64> = (0..=40).map(|i| 1.0 + i as f64 / 40.0).collect();
        let v: Vec<f64> = r.iter().map(|x| (0.5 * x).sin()).collect();
        let s = TabulatedRadial::new(r, v).unwrap();
        let (val, d1, d2) = s.eval(1.37);
        assert!((val - (0.685f64).sin()).abs() < 1e-7);
        assert!((d1 - 0.5 * (0.685f64).cos()).abs() < 1e-5);
        assert!((d2 + 0.25 * (0.685f64).sin()).abs() < 1e-2);
        let t = TabulatedRadial::parse_csv("R,omega\n1,0\n2,1\n3,2\n").unwrap();
        assert!((t.value(&[2.5], 0.0) - 1.5).abs() < 1e-15);
        assert!(matches!(TabulatedRadial::parse_csv("1,0\n2\n3,1\n"), Err(crate::GrowthError::Parse { line: 2, .. })));
    }
}
