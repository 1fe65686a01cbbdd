//! Linearized growth: Saint-Venant–Kirchhoff moduli, the displacement PDE
//! (λ+μ)U_b,ab + μU_a,bb = ((nλ+2μ)/2)∂_aβ on a Cartesian grid, and
//! curvature variations about a Euclidean reference.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{GrowthError, Result};
use crate::field::ScalarField;
use crate::lattice::Lattice;
use crate::output::Table;
use crate::stressfree::{node_derivatives, CheckOptions, Verdict};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvkParams {
    pub lambda: f64,
    pub mu: f64,
}

impl SvkParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0) {
            return Err(GrowthError::Configuration(format!(
                "need mu > 0 and 3 lambda + 2 mu > 0, got lambda = {lambda}, mu = {mu}"
            )));
        }
        Ok(Self { lambda, mu })
    }

    /// Coefficient (nλ + 2μ)/2 of the eigenstrain source.
    pub fn source_coefficient(&self, n: usize) -> f64 {
        0.5 * (n as f64 * self.lambda + 2.0 * self.mu)
    }
}

/// 𝔸^{aA}_b^B and the contraction 𝔹^{aACD}δ_CD at the identity reference.
#[derive(Debug, Clone)]
pub struct SvkTensors {
    pub dim: usize,
    /// Index ((a·n + A)·n + b)·n + B.
    pub a: Vec<f64>,
    pub b_contraction: DMatrix<f64>,
}

impl SvkTensors {
    pub fn a(&self, a: usize, big_a: usize, b: usize, big_b: usize) -> f64 {
        let n = self.dim;
        self.a[((a * n + big_a) * n + b) * n + big_b]
    }

    /// 𝔸^{aA}_b^B ∂²U^b/∂X^A∂X^B for a constant Hessian `ddu[b][A·n+B]`.
    pub fn apply(&self, ddu: &[Vec<f64>]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|a| {
                let mut s = 0.0;
                for big_a in 0..n {
                    for (b, ddu_b) in ddu.iter().enumerate() {
                        for big_b in 0..n {
                            s += self.a(a, big_a, b, big_b) * ddu_b[big_a * n + big_b];
                        }
                    }
                }
                s
            })
            .collect()
    }
}

pub fn svk_tensors(params: SvkParams, n: usize) -> SvkTensors {
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut a = vec![0.0; n.pow(4)];
    for i in 0..n {
        for ia in 0..n {
            for j in 0..n {
                for jb in 0..n {
                    a[((i * n + ia) * n + j) * n + jb] =
                        params.lambda * d(i, ia) * d(j, jb) + params.mu * (d(ia, jb) * d(i, j) + d(ia, j) * d(jb, i));
                }
            }
        }
    }
    let b_contraction = DMatrix::identity(n, n) * -params.source_coefficient(n);
    SvkTensors { dim: n, a, b_contraction }
}

/// Vector field on a lattice, `values[node][component]`.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    pub lattice: Lattice,
    pub values: Vec<Vec<f64>>,
}

impl DisplacementField {
    pub fn sample(lattice: &Lattice, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Self {
        let values = (0..lattice.len()).into_par_iter().map(|k| f(&lattice.coords(k))).collect();
        Self { lattice: lattice.clone(), values }
    }

    pub fn max_abs_diff(&self, other: &DisplacementField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// ε_ab = ½(U_a,b + U_b,a) by central differences at interior nodes;
/// returns (nodes, ε per node).
pub fn linearized_strain(u: &DisplacementField) -> (Vec<usize>, Vec<DMatrix<f64>>) {
    let lat = &u.lattice;
    let n = lat.dim();
    let h = lat.spacing();
    let nodes = lat.interior(1);
    let eps = nodes
        .par_iter()
        .map(|&k| {
            let mut grad = DMatrix::zeros(n, n);
            for b in 0..n {
                let (p, m) = (lat.shift(k, b, 1), lat.shift(k, b, -1));
                for a in 0..n {
                    grad[(a, b)] = (u.values[p][a] - u.values[m][a]) / (2.0 * h);
                }
            }
            (&grad + grad.transpose()) * 0.5
        })
        .collect();
    (nodes, eps)
}

/// L_h U = (λ+μ)∇_h(div_h U) + μΔ_h U at one interior node.
fn operator_at(lat: &Lattice, params: SvkParams, u: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = lat.dim();
    let h2 = lat.spacing().powi(2);
    let mut out = vec![0.0; n];
    for (a, o) in out.iter_mut().enumerate() {
        let mut lap = 0.0;
        for c in 0..n {
            lap += u[lat.shift(k, c, 1)][a] - 2.0 * u[k][a] + u[lat.shift(k, c, -1)][a];
        }
        let mut gd = 0.0;
        for b in 0..n {
            if b == a {
                gd += u[lat.shift(k, a, 1)][a] - 2.0 * u[k][a] + u[lat.shift(k, a, -1)][a];
            } else {
                let p = lat.shift(k, a, 1);
                let m = lat.shift(k, a, -1);
                gd += 0.25
                    * (u[lat.shift(p, b, 1)][b] - u[lat.shift(p, b, -1)][b] - u[lat.shift(m, b, 1)][b]
                        + u[lat.shift(m, b, -1)][b]);
            }
        }
        *o = ((params.lambda + params.mu) * gd + params.mu * lap) / h2;
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop once ‖r‖ ≤ tol·max(‖b‖, 1).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct LinearizedSolution {
    pub field: DisplacementField,
    pub iterations: usize,
    /// ‖r‖₂ of the CG system after each iteration.
    pub history: Vec<f64>,
    /// max |L_h U − f| over interior nodes and components.
    pub residual: f64,
}

impl LinearizedSolution {
    pub fn to_table(&self) -> Table {
        let lat = &self.field.lattice;
        let n = lat.dim();
        let (nodes, eps) = linearized_strain(&self.field);
        let mut headers: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
        headers.extend((1..=n).map(|i| format!("U{i}")));
        for a in 0..n {
            for b in a..n {
                headers.push(format!("eps{}{}", a + 1, b + 1));
            }
        }
        let mut t = Table::new(headers);
        for (k, e) in nodes.iter().zip(&eps) {
            let mut row = lat.coords(*k);
            row.extend(&self.field.values[*k]);
            for a in 0..n {
                for b in a..n {
                    row.push(e[(a, b)]);
                }
            }
            t.push_row(&row);
        }
        t.push_meta("iterations", self.iterations);
        t.push_meta("residual", crate::output::format_number(self.residual));
        t
    }
}

/// Solves L_h U = f with U = `boundary` on the lattice boundary, by
/// conjugate gradients on the SPD system −L_h.
pub fn solve_with_rhs(
    params: SvkParams,
    lattice: &Lattice,
    rhs: impl Fn(&[f64]) -> Vec<f64> + Sync,
    boundary: impl Fn(&[f64]) -> Vec<f64> + Sync,
    opts: SolverOptions,
) -> Result<LinearizedSolution> {
    lattice.require_min_nodes(9, "linearized solve")?;
    let n = lattice.dim();
    let interior = lattice.interior(1);
    let mut is_interior = vec![false; lattice.len()];
    for &k in &interior {
        is_interior[k] = true;
    }
    // boundary lift
    let mut u: Vec<Vec<f64>> = (0..lattice.len())
        .into_par_iter()
        .map(|k| if is_interior[k] { vec![0.0; n] } else { boundary(&lattice.coords(k)) })
        .collect();
    if u.iter().any(|v| v.len() != n) {
        return Err(GrowthError::Configuration("boundary data has the wrong number of components".into()));
    }
    let f: Vec<Vec<f64>> = interior.par_iter().map(|&k| rhs(&lattice.coords(k))).collect();
    let lift: Vec<Vec<f64>> = interior.par_iter().map(|&k| operator_at(lattice, params, &u, k)).collect();
    // −L_h x = −(f − L_h(lift)) on interior unknowns
    let b: Vec<f64> = f.iter().zip(&lift).flat_map(|(fi, li)| fi.iter().zip(li).map(|(x, y)| y - x)).collect();

    let apply = |x: &[f64], scratch: &mut Vec<Vec<f64>>| -> Vec<f64> {
        for (i, &k) in interior.iter().enumerate() {
            scratch[k].copy_from_slice(&x[i * n..(i + 1) * n]);
        }
        let s: &Vec<Vec<f64>> = scratch;
        let y: Vec<Vec<f64>> = interior.par_iter().map(|&k| operator_at(lattice, params, s, k)).collect();
        y.into_iter().flatten().map(|v| -v).collect()
    };
    let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();

    let mut scratch = vec![vec![0.0; n]; lattice.len()];
    let mut x = vec![0.0; b.len()];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = opts.tol * dot(&b, &b).sqrt().max(1.0);
    let mut history = Vec::new();
    let mut iterations = 0;
    while rr.sqrt() > target {
        if iterations >= opts.max_iter {
            let tail: Vec<String> = history.iter().rev().take(5).map(|v: &f64| format!("{v:e}")).collect();
            return Err(GrowthError::Numeric(format!(
                "CG did not converge in {} iterations; last residuals {}",
                opts.max_iter,
                tail.join(", ")
            )));
        }
        let ap = apply(&p, &mut scratch);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        for i in 0..p.len() {
            p[i] = r[i] + rr_new / rr * p[i];
        }
        rr = rr_new;
        iterations += 1;
        history.push(rr.sqrt());
    }
    for (i, &k) in interior.iter().enumerate() {
        u[k].copy_from_slice(&x[i * n..(i + 1) * n]);
    }
    let residual = interior
        .par_iter()
        .zip(&f)
        .map(|(&k, fk)| {
            operator_at(lattice, params, &u, k).iter().zip(fk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(LinearizedSolution {
        field: DisplacementField { lattice: lattice.clone(), values: u },
        iterations,
        history,
        residual,
    })
}

/// The eigenstrain problem with source ((nλ+2μ)/2)∇β.
pub fn solve_linearized(
    params: SvkParams,
    beta: &dyn ScalarField,
    lattice: &Lattice,
    boundary: impl Fn(&[f64]) -> Vec<f64> + Sync,
    opts: SolverOptions,
) -> Result<LinearizedSolution> {
    if beta.dim() != lattice.dim() {
        return Err(GrowthError::Configuration("beta and lattice dimensions differ".into()));
    }
    let c = params.source_coefficient(lattice.dim());
    solve_with_rhs(params, lattice, |x| beta.gradient(x, 0.0).iter().map(|g| c * g).collect(), boundary, opts)
}

/// U_a = ½(a·X)X_a − ¼a_a|X|², whose strain is ½(a·X)δ.
pub fn manufactured_quadratic(a: &[f64], x: &[f64]) -> Vec<f64> {
    let ax: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    x.iter().zip(a).map(|(xi, ai)| 0.5 * ax * xi - 0.25 * ai * r2).collect()
}

/// δRiem_ABCD, δRic_AB and δ𝖱 about the Euclidean metric.
#[derive(Debug, Clone)]
pub struct CurvatureVariation {
    pub dim: usize,
    /// Index ((A·n + B)·n + C)·n + D.
    pub riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
}

/// Curvature variation at interior nodes from δG sampled on the lattice.
pub fn linearized_curvature(
    lattice: &Lattice,
    delta_g: &[DMatrix<f64>],
) -> Result<(Vec<usize>, Vec<CurvatureVariation>)> {
    if delta_g.len() != lattice.len() {
        return Err(GrowthError::Configuration("one δG per lattice node is required".into()));
    }
    lattice.require_min_nodes(3, "curvature variation")?;
    let n = lattice.dim();
    let nodes = lattice.interior(1);
    // components[r * n + c] = δG_rc at every node
    let components: Vec<Vec<f64>> =
        (0..n * n).map(|rc| delta_g.iter().map(|g| g[(rc / n, rc % n)]).collect()).collect();
    let out = nodes
        .par_iter()
        .map(|&k| {
            // hess[rc][i * n + j] = ∂_i∂_j δG_rc
            let hess: Vec<Vec<f64>> = components.iter().map(|v| node_derivatives(lattice, v, k).hessian).collect();
            let dd = |a: usize, b: usize, r: usize, c: usize| hess[r * n + c][a * n + b];
            let mut riemann = vec![0.0; n.pow(4)];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            riemann[((a * n + b) * n + c) * n + d] =
                                -0.5 * (dd(a, c, b, d) - dd(a, d, b, c) - dd(b, c, a, d) + dd(b, d, a, c));
                        }
                    }
                }
            }
            let ricci = DMatrix::from_fn(n, n, |a, b| {
                -0.5 * (0..n).map(|c| dd(a, b, c, c) - dd(a, c, b, c) - dd(b, c, a, c) + dd(c, c, a, b)).sum::<f64>()
            });
            let scalar = ricci.trace();
            CurvatureVariation { dim: n, riemann, ricci, scalar }
        })
        .collect();
    Ok((nodes, out))
}

/// Grid verdict on the stress-free conditions for δG = βδ: the Laplacian
/// in 2D; β,₁₂, β,₁₃, β,₂₃ and β,ᵢᵢ + ∇²β in 3D.
pub fn stress_free_beta_check(beta: &dyn ScalarField, lattice: &Lattice, opts: CheckOptions) -> Result<Verdict> {
    let n = lattice.dim();
    if !(n == 2 || n == 3) || beta.dim() != n {
        return Err(GrowthError::Configuration(format!("stress-free check needs a 2D or 3D field, got {n}")));
    }
    lattice.require_min_nodes(9, "stress-free check")?;
    let values: Vec<f64> = (0..lattice.len()).into_par_iter().map(|k| beta.value(&lattice.coords(k), 0.0)).collect();
    let nodes = lattice.interior(1);
    let eqs = |k: usize| -> Vec<f64> {
        let d = node_derivatives(lattice, &values, k);
        let h = |i: usize, j: usize| d.hessian[i * n + j];
        let lap = d.laplacian();
        if n == 2 {
            vec![lap]
        } else {
            vec![h(0, 1), h(0, 2), h(1, 2), h(0, 0) + lap, h(1, 1) + lap, h(2, 2) + lap]
        }
    };
    let res: Vec<Vec<f64>> = nodes.par_iter().map(|&k| eqs(k)).collect();
    let m = res.first().map_or(0, Vec::len);
    let mut per_equation = vec![0.0f64; m];
    for r in &res {
        for (p, v) in per_equation.iter_mut().zip(r) {
            *p = p.max(v.abs());
        }
    }
    let residual = per_equation.iter().copied().fold(0.0, f64::max);
    // Central differences are exact on quadratics, so the truncation estimate
    // scales with the fourth differences of β.
    let h = lattice.spacing();
    let fourth = lattice
        .interior(2)
        .into_iter()
        .map(|k| {
            (0..n)
                .map(|a| {
                    let s = |o: isize| values[lattice.shift(k, a, o)];
                    ((s(2) - 4.0 * s(1) + 6.0 * s(0) - 4.0 * s(-1) + s(-2)) / h.powi(4)).abs()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let error_estimate = h * h * fourth / 6.0;
    let tolerance = opts.abs_tol + opts.safety * error_estimate;
    Ok(Verdict { per_equation, residual, error_estimate, tolerance, flat: residual <= tolerance })
}
