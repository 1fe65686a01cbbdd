//! Residual stress in radially grown incompressible neo-Hookean bodies.
//!
//! Three problems share one pipeline: incompressibility fixes r(R) up to the
//! inner image r₁, the radial equilibrium equation gives the pressure by
//! quadrature, and a traction condition picks r₁.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_3;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::diffgeo::{inverse_spd, Euclidean, Metric, RadialFamily, RadialKind, RadialMetric};
use crate::error::{GrowthError, Result};
use crate::field::{RadialField, SharedField};
use crate::kinematics::{deformation_gradient, jacobian, RadialMap, RadialProfile};
use crate::output::Table;
use crate::quadrature::{adaptive, gk21, kronrod_nodes, AdaptiveOptions};
use crate::roots::{scan_bracket, Root, RootFinder, RootFinderRegistry, RootOptions};

/// One of the radial growth problems.
pub trait RadialProblem: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> RadialKind;

    /// `(n, k)` in r^n = r₁^n + ∫ nξ^{n−1}e^{kΩ} dξ.
    fn volume_exponents(&self) -> (i32, f64);

    /// dp/dR at radius ξ, given r(ξ), Ω(ξ) and Ω′(ξ).
    fn pressure_integrand(&self, mu: f64, xi: f64, r: f64, omega: f64, d_omega: f64) -> f64;

    /// Nonzero stresses on the equator: P^{rR}, P^{θΘ}[, P^{φΦ}].
    fn stresses(&self, mu: f64, big_r: f64, r: f64, p: f64, omega: f64) -> Vec<f64>;

    fn stress_labels(&self) -> &'static [&'static str];

    /// κ in ∂ρ₀/∂t + κ·(∂Ω/∂t)·ρ₀ = S_m.
    fn mass_rate_factor(&self) -> f64;

    fn metric(&self, omega: SharedField, inner: f64, outer: f64) -> Result<RadialMetric> {
        let family = match self.kind() {
            RadialKind::Iso2D => RadialFamily::Iso2D { omega },
            RadialKind::Aniso2D => RadialFamily::Aniso2D { omega, pi: None },
            RadialKind::Iso3D => RadialFamily::Iso3D { omega },
        };
        RadialMetric::new(family, inner, outer)
    }
}

impl fmt::Debug for dyn RadialProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Annulus with G = e^{2Ω}(dR² + R²dΘ²).
#[derive(Debug, Clone, Copy, Default)]
pub struct AnnulusIso;

impl RadialProblem for AnnulusIso {
    fn name(&self) -> &'static str {
        "annulus-iso"
    }
    fn kind(&self) -> RadialKind {
        RadialKind::Iso2D
    }
    fn volume_exponents(&self) -> (i32, f64) {
        (2, 2.0)
    }
    fn pressure_integrand(&self, mu: f64, xi: f64, r: f64, w: f64, dw: f64) -> f64 {
        let e = (2.0 * w).exp();
        let (xi2, r2) = (xi * xi, r * r);
        2.0 * mu * xi / r2 * e * (2.0 * (1.0 + xi * dw) - xi2 / r2 * e - r2 / xi2 / e)
    }
    fn stresses(&self, mu: f64, big_r: f64, r: f64, p: f64, w: f64) -> Vec<f64> {
        let e = (-2.0 * w).exp();
        vec![2.0 * mu * big_r / r - p * r / big_r * e, 2.0 * mu * e / (big_r * big_r) - p / (r * r)]
    }
    fn stress_labels(&self) -> &'static [&'static str] {
        &["P_rR", "P_thTh"]
    }
    fn mass_rate_factor(&self) -> f64 {
        2.0
    }
}

/// Annulus with G = e^{2Ω}dR² + R²e^{−2Ω}dΘ² (det G independent of Ω).
#[derive(Debug, Clone, Copy, Default)]
pub struct AnnulusAniso;

impl RadialProblem for AnnulusAniso {
    fn name(&self) -> &'static str {
        "annulus-aniso"
    }
    fn kind(&self) -> RadialKind {
        RadialKind::Aniso2D
    }
    fn volume_exponents(&self) -> (i32, f64) {
        (2, 0.0)
    }
    fn pressure_integrand(&self, mu: f64, xi: f64, r: f64, w: f64, dw: f64) -> f64 {
        let (xi2, r2) = (xi * xi, r * r);
        2.0 * mu * xi / r2 * (-2.0 * w).exp() * (2.0 - 2.0 * xi * dw - r2 / xi2 * (4.0 * w).exp() - xi2 / r2)
    }
    fn stresses(&self, mu: f64, big_r: f64, r: f64, p: f64, w: f64) -> Vec<f64> {
        vec![
            2.0 * mu * (-2.0 * w).exp() * big_r / r - p * r / big_r,
            2.0 * mu * (2.0 * w).exp() / (big_r * big_r) - p / (r * r),
        ]
    }
    fn stress_labels(&self) -> &'static [&'static str] {
        &["P_rR", "P_thTh"]
    }
    fn mass_rate_factor(&self) -> f64 {
        0.0
    }
}

/// Hollow sphere with G = e^{2Ω}(dR² + R²dΘ² + R²sin²Θ dΦ²).
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereIso;

impl RadialProblem for SphereIso {
    fn name(&self) -> &'static str {
        "sphere"
    }
    fn kind(&self) -> RadialKind {
        RadialKind::Iso3D
    }
    fn volume_exponents(&self) -> (i32, f64) {
        (3, 3.0)
    }
    fn pressure_integrand(&self, mu: f64, xi: f64, r: f64, w: f64, dw: f64) -> f64 {
        let (r3, xi2) = (r * r * r, xi * xi);
        let e3 = (3.0 * w).exp();
        4.0 * mu * xi2 * xi2 / (r3 * r)
            * (4.0 * w).exp()
            * (2.0 / xi + 2.0 * dw - xi2 / r3 * e3 - r3 / (xi2 * xi2) / e3)
    }
    fn stresses(&self, mu: f64, big_r: f64, r: f64, p: f64, w: f64) -> Vec<f64> {
        let (rr, r2) = (big_r * big_r, r * r);
        let hoop = 2.0 * mu * (-2.0 * w).exp() / rr - p / r2;
        vec![2.0 * mu * rr * w.exp() / r2 - p * r2 * (-3.0 * w).exp() / rr, hoop, hoop]
    }
    fn stress_labels(&self) -> &'static [&'static str] {
        &["P_rR", "P_thTh", "P_phPh"]
    }
    fn mass_rate_factor(&self) -> f64 {
        3.0
    }
}

/// Radial problems registered by name.
#[derive(Clone)]
pub struct ProblemRegistry {
    entries: BTreeMap<&'static str, Arc<dyn RadialProblem>>,
}

impl ProblemRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, p: Arc<dyn RadialProblem>) {
        self.entries.insert(p.name(), p);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RadialProblem>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            GrowthError::Configuration(format!("unknown problem '{name}' (available: {})", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for ProblemRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(AnnulusIso));
        r.register(Arc::new(AnnulusAniso));
        r.register(Arc::new(SphereIso));
        r
    }
}

/// How the free constant is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// p(R₁) = 0 and p(R₂) = 0.
    #[default]
    PaperExact,
    /// P^{rR}(R₁) = 0 and P^{rR}(R₂) = 0.
    TractionFree,
}

impl BoundaryMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryMode::PaperExact => "paper-exact",
            BoundaryMode::TractionFree => "traction-free",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper-exact" => Ok(BoundaryMode::PaperExact),
            "traction-free" | "traction" => Ok(BoundaryMode::TractionFree),
            _ => Err(GrowthError::Configuration(format!(
                "unknown boundary mode '{s}' (expected paper-exact or traction-free)"
            ))),
        }
    }
}

#[derive(Clone)]
pub struct BvpConfig {
    pub problem: Arc<dyn RadialProblem>,
    pub omega: SharedField,
    pub inner: f64,
    pub outer: f64,
    pub mu: f64,
    pub t: f64,
    pub mode: BoundaryMode,
    pub nodes: usize,
    pub root_finder: String,
    pub quadrature: AdaptiveOptions,
    pub roots: RootOptions,
}

impl BvpConfig {
    pub fn new(problem: Arc<dyn RadialProblem>, omega: SharedField, inner: f64, outer: f64, mu: f64) -> Self {
        Self {
            problem,
            omega,
            inner,
            outer,
            mu,
            t: 0.0,
            mode: BoundaryMode::PaperExact,
            nodes: 512,
            root_finder: "brent".into(),
            quadrature: AdaptiveOptions::default(),
            roots: RootOptions::default(),
        }
    }
}

/// ∫_{R₁}^{R} nξ^{n−1}e^{kΩ(ξ)} dξ on the solution grid and at the Kronrod
/// nodes of every grid interval. Independent of r₁.
struct VolumeTable {
    grid: Vec<f64>,
    at_grid: Vec<f64>,
    /// Per interval: (ξ, weight, V(ξ), Ω(ξ), Ω′(ξ)).
    kronrod: Vec<Vec<[f64; 5]>>,
    n: i32,
    k: f64,
    omega: SharedField,
    t: f64,
}

impl VolumeTable {
    fn integrand(&self, xi: f64) -> f64 {
        self.n as f64 * xi.powi(self.n - 1) * (self.k * self.omega.at(xi, self.t)).exp()
    }

    fn build(grid: Vec<f64>, n: i32, k: f64, omega: SharedField, t: f64, opts: AdaptiveOptions) -> Result<Self> {
        let mut table = Self { grid, at_grid: Vec::new(), kronrod: Vec::new(), n, k, omega, t };
        let intervals = table.grid.len() - 1;
        let per = AdaptiveOptions { abs_tol: opts.abs_tol / intervals as f64, ..opts };
        let mut acc = 0.0;
        let mut at_grid = vec![0.0];
        let mut kron = Vec::with_capacity(intervals);
        for w in table.grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let nodes = kronrod_nodes(a, b)
                .map(|(xi, wt)| {
                    let v = acc + gk21(&mut |s| table.integrand(s), a, xi).0;
                    [xi, wt, v, table.omega.at(xi, t), table.omega.d1(xi, t)]
                })
                .collect();
            kron.push(nodes);
            acc += adaptive(|s| table.integrand(s), a, b, per)?.value;
            at_grid.push(acc);
        }
        table.at_grid = at_grid;
        table.kronrod = kron;
        Ok(table)
    }

    fn interval(&self, xi: f64) -> usize {
        let h = (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64;
        (((xi - self.grid[0]) / h).floor().max(0.0) as usize).min(self.grid.len() - 2)
    }

    fn volume(&self, xi: f64) -> f64 {
        let i = self.interval(xi);
        let a = self.grid[i];
        self.at_grid[i] + gk21(&mut |s| self.integrand(s), a, xi).0
    }
}

/// r(R) = (r₁^n + V(R))^{1/n}, with r′ from the incompressibility ODE.
pub struct SolvedProfile {
    table: Arc<VolumeTable>,
    r1: f64,
}

impl SolvedProfile {
    fn radius_from_volume(&self, v: f64) -> f64 {
        let n = self.table.n;
        (self.r1.powi(n) + v).powf(1.0 / n as f64)
    }
}

impl RadialProfile for SolvedProfile {
    fn r(&self, big_r: f64) -> f64 {
        self.radius_from_volume(self.table.volume(big_r))
    }
    fn dr(&self, big_r: f64) -> f64 {
        let n = self.table.n;
        let r = self.r(big_r);
        self.table.integrand(big_r) / (n as f64 * r.powi(n - 1))
    }
}

/// A prepared growth boundary-value problem.
pub struct GrowthBvp {
    cfg: BvpConfig,
    metric: RadialMetric,
    table: Arc<VolumeTable>,
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub problem: &'static str,
    pub mode: BoundaryMode,
    pub grid: Vec<f64>,
    pub r: Vec<f64>,
    pub dr: Vec<f64>,
    pub p: Vec<f64>,
    pub stress_labels: Vec<&'static str>,
    /// One array per stress component.
    pub stresses: Vec<Vec<f64>>,
    pub jacobian: Vec<f64>,
    /// Radial component of P^{aA}|_A at each node.
    pub momentum: Vec<f64>,
    /// Largest non-radial component of P^{aA}|_A at each node.
    pub hoop: Vec<f64>,
    pub r1: f64,
    /// r₁ for the isotropic problems, C = r₁² − R₁² for the anisotropic annulus.
    pub constant: f64,
    pub root: Root,
    pub map: RadialMap,
}

impl fmt::Debug for GrowthBvp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrowthBvp({}, [{}, {}])", self.cfg.problem.name(), self.cfg.inner, self.cfg.outer)
    }
}

impl RadialSolution {
    pub fn max_momentum_residual(&self) -> f64 {
        self.momentum.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_hoop_residual(&self) -> f64 {
        self.hoop.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_jacobian_error(&self) -> f64 {
        self.jacobian.iter().fold(0.0, |m, j| m.max((j - 1.0).abs()))
    }

    pub fn to_table(&self) -> Table {
        let mut headers = vec!["R", "r", "p"];
        headers.extend(self.stress_labels.iter().copied());
        headers.extend(["J", "residual"]);
        let mut t = Table::new(headers);
        t.columns = [&self.grid, &self.r, &self.p]
            .into_iter()
            .chain(self.stresses.iter())
            .chain([&self.jacobian, &self.momentum])
            .cloned()
            .collect();
        t.push_meta("example", self.problem);
        t.push_meta("mode", self.mode.name());
        t.push_meta("r1", crate::output::format_number(self.r1));
        t.push_meta("constant", crate::output::format_number(self.constant));
        t.push_meta("max_momentum_residual", format!("{:e}", self.max_momentum_residual()));
        t
    }
}

/// Fourth-order first derivative of samples on a uniform grid (at least 5),
/// one-sided near the ends.
pub fn uniform_derivative(values: &[f64], h: f64) -> Vec<f64> {
    const EDGE: [[f64; 5]; 2] = [[-25.0, 48.0, -36.0, 16.0, -3.0], [-3.0, -10.0, 18.0, -6.0, 1.0]];
    let n = values.len();
    let dot = |w: &[f64; 5], start: usize, sign: f64| -> f64 {
        (0..5).map(|k| w[k] * values[if sign > 0.0 { start + k } else { start - k }]).sum::<f64>() * sign / (12.0 * h)
    };
    (0..n)
        .map(|i| match i {
            0 | 1 => dot(&EDGE[i], 0, 1.0),
            _ if i + 2 >= n => dot(&EDGE[n - 1 - i], n - 1, -1.0),
            _ => (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h),
        })
        .collect()
}

/// P^{aA} = 2μ F^a_B G^{BA} − p (F⁻¹)^A_b g^{ba}, as a matrix with rows a.
pub fn constitutive_stress(
    f: &DMatrix<f64>,
    big_g: &DMatrix<f64>,
    g: &DMatrix<f64>,
    p: f64,
    mu: f64,
) -> Result<DMatrix<f64>> {
    let f_inv =
        f.clone().try_inverse().ok_or_else(|| GrowthError::Constitutive("deformation gradient is singular".into()))?;
    Ok(f * inverse_spd(big_g)? * (2.0 * mu) - inverse_spd(g)? * f_inv.transpose() * p)
}

impl GrowthBvp {
    pub fn new(cfg: BvpConfig) -> Result<Self> {
        if !(cfg.inner > 0.0 && cfg.outer > cfg.inner) {
            return Err(GrowthError::Configuration(format!(
                "radii must satisfy 0 < R1 < R2, got R1 = {}, R2 = {}",
                cfg.inner, cfg.outer
            )));
        }
        if !(cfg.mu > 0.0) {
            return Err(GrowthError::Configuration(format!("shear modulus must be positive, got {}", cfg.mu)));
        }
        if cfg.nodes < 5 {
            return Err(GrowthError::Configuration(format!("need at least 5 radial nodes, got {}", cfg.nodes)));
        }
        if cfg.omega.dim() != 1 {
            return Err(GrowthError::Configuration(format!(
                "growth field must depend on R only, got a {}-dimensional field",
                cfg.omega.dim()
            )));
        }
        let metric = cfg.problem.metric(cfg.omega.clone(), cfg.inner, cfg.outer)?.at_time(cfg.t);
        let h = (cfg.outer - cfg.inner) / (cfg.nodes - 1) as f64;
        let grid: Vec<f64> =
            (0..cfg.nodes).map(|i| if i == cfg.nodes - 1 { cfg.outer } else { cfg.inner + h * i as f64 }).collect();
        let (n, k) = cfg.problem.volume_exponents();
        let table = VolumeTable::build(grid, n, k, cfg.omega.clone(), cfg.t, cfg.quadrature)?;
        Ok(Self { cfg, metric, table: Arc::new(table) })
    }

    pub fn config(&self) -> &BvpConfig {
        &self.cfg
    }

    pub fn metric(&self) -> &RadialMetric {
        &self.metric
    }

    pub fn grid(&self) -> &[f64] {
        &self.table.grid
    }

    fn omega_at(&self, r: f64) -> f64 {
        self.cfg.omega.at(r, self.cfg.t)
    }

    /// The map with inner image `r1`.
    pub fn solve_incompressibility(&self, r1: f64) -> Result<RadialMap> {
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(GrowthError::Geometry(format!("inner image radius must be positive, got {r1}")));
        }
        let profile = SolvedProfile { table: self.table.clone(), r1 };
        RadialMap::new(self.cfg.problem.kind(), Arc::new(profile), self.cfg.inner, self.cfg.outer)
    }

    /// Pressure that makes P^{rR} vanish at R with image r.
    fn traction_free_pressure(&self, big_r: f64, r: f64) -> f64 {
        let w = self.omega_at(big_r);
        let s0 = self.cfg.problem.stresses(self.cfg.mu, big_r, r, 0.0, w)[0];
        let s1 = self.cfg.problem.stresses(self.cfg.mu, big_r, r, 1.0, w)[0];
        s0 / (s0 - s1)
    }

    /// p(R₁) for the configured boundary mode.
    pub fn inner_pressure(&self, map: &RadialMap) -> f64 {
        match self.cfg.mode {
            BoundaryMode::PaperExact => 0.0,
            BoundaryMode::TractionFree => self.traction_free_pressure(self.cfg.inner, map.r1()),
        }
    }

    /// p at the grid nodes by adaptive quadrature of the equilibrium equation.
    pub fn pressure_profile(&self, map: &RadialMap, p_inner: f64) -> Result<Vec<f64>> {
        let (mu, t) = (self.cfg.mu, self.cfg.t);
        let integrand = |xi: f64| {
            let w = self.cfg.omega.at(xi, t);
            let dw = self.cfg.omega.d1(xi, t);
            self.cfg.problem.pressure_integrand(mu, xi, map.r(xi), w, dw)
        };
        let grid = &self.table.grid;
        let per =
            AdaptiveOptions { abs_tol: self.cfg.quadrature.abs_tol / (grid.len() - 1) as f64, ..self.cfg.quadrature };
        let mut p = Vec::with_capacity(grid.len());
        let mut acc = p_inner;
        p.push(acc);
        for w in grid.windows(2) {
            acc += adaptive(integrand, w[0], w[1], per)?.value;
            p.push(acc);
        }
        Ok(p)
    }

    /// Closed-form stresses at the grid nodes.
    pub fn stresses(&self, map: &RadialMap, p: &[f64]) -> Vec<Vec<f64>> {
        let per_node: Vec<Vec<f64>> = self
            .table
            .grid
            .iter()
            .zip(p)
            .map(|(&big_r, &pp)| self.cfg.problem.stresses(self.cfg.mu, big_r, map.r(big_r), pp, self.omega_at(big_r)))
            .collect();
        let m = per_node[0].len();
        (0..m).map(|c| per_node.iter().map(|s| s[c]).collect()).collect()
    }

    /// Boundary condition at R₂ as a smooth function of r₁ (zero at the solution).
    pub fn boundary_function(&self, r1: f64) -> Result<f64> {
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(GrowthError::Geometry(format!("inner image radius must be positive, got {r1}")));
        }
        let profile = SolvedProfile { table: self.table.clone(), r1 };
        let mu = self.cfg.mu;
        let mut integral = 0.0;
        for nodes in &self.table.kronrod {
            for &[xi, wt, v, w, dw] in nodes {
                let r = profile.radius_from_volume(v);
                integral += wt * self.cfg.problem.pressure_integrand(mu, xi, r, w, dw);
            }
        }
        Ok(match self.cfg.mode {
            BoundaryMode::PaperExact => integral / mu,
            BoundaryMode::TractionFree => {
                let p1 = self.traction_free_pressure(self.cfg.inner, r1);
                let outer = self.cfg.outer;
                let r2 = profile.radius_from_volume(self.table.at_grid[self.table.at_grid.len() - 1]);
                self.cfg.problem.stresses(mu, outer, r2, p1 + integral, self.omega_at(outer))[0] / mu
            }
        })
    }

    /// Root of the boundary function for r₁.
    pub fn find_inner_radius(&self, finder: &dyn RootFinder) -> Result<Root> {
        let (n, k) = self.cfg.problem.volume_exponents();
        let inner = self.cfg.inner;
        let guess = inner * (k / n as f64 * self.omega_at(inner)).exp();
        let mut f = |r1: f64| self.boundary_function(r1).unwrap_or(f64::NAN);
        match scan_bracket(&mut f, guess) {
            Ok(bracket) => finder.solve(&mut f, bracket, self.cfg.roots),
            Err(err) => self.stationary_root(finder, guess, err),
        }
    }

    /// The pressure integral can touch zero without crossing it (for Ω ≡ 0 it
    /// is −∫(2ξ/r²)(ξ/r − r/ξ)² ≤ 0). Locate its stationary point and accept
    /// it when the boundary value there vanishes, or bracket the crossing
    /// nearest to it.
    fn stationary_root(&self, finder: &dyn RootFinder, guess: f64, err: GrowthError) -> Result<Root> {
        let f = |r1: f64| self.boundary_function(r1).unwrap_or(f64::NAN);
        let mut df = |r1: f64| {
            let d = 1e-6 * r1;
            (f(r1 + d) - f(r1 - d)) / (2.0 * d)
        };
        let Ok(b) = scan_bracket(&mut df, guess) else {
            return Err(err);
        };
        let peak = finder.solve(&mut df, b, self.cfg.roots)?;
        let f_peak = f(peak.x);
        if f_peak.abs() <= 1e-10 {
            return Ok(Root { x: peak.x, residual: f_peak, iterations: peak.iterations });
        }
        if f_peak > 0.0 {
            let mut g = |r1: f64| f(r1);
            let bracket = scan_bracket(&mut g, peak.x)?;
            return finder.solve(&mut g, bracket, self.cfg.roots);
        }
        Err(GrowthError::Bracket(format!(
            "{} mode: p(R2) never vanishes for this growth field (largest value {:e} at r1 = {}); {}",
            self.cfg.mode.name(),
            f_peak * self.cfg.mu,
            peak.x,
            err
        )))
    }

    pub fn solve(&self) -> Result<RadialSolution> {
        let finder = RootFinderRegistry::default().get(&self.cfg.root_finder)?;
        self.solve_with(finder.as_ref())
    }

    pub fn solve_with(&self, finder: &dyn RootFinder) -> Result<RadialSolution> {
        let root = self.find_inner_radius(finder)?;
        self.assemble(root)
    }

    /// Builds the full solution for a given r₁.
    pub fn assemble(&self, root: Root) -> Result<RadialSolution> {
        let map = self.solve_incompressibility(root.x)?;
        let p = self.pressure_profile(&map, self.inner_pressure(&map))?;
        let stresses = self.stresses(&map, &p);
        let grid = self.table.grid.clone();
        let r: Vec<f64> = grid.iter().map(|&x| map.r(x)).collect();
        let dr: Vec<f64> = grid.iter().map(|&x| map.dr(x)).collect();
        let jac = grid.iter().map(|&x| jacobian(&map, &self.metric, x)).collect::<Result<Vec<_>>>()?;
        let (momentum, hoop) = self.momentum_residual(&map, &stresses)?;
        let constant = match self.cfg.problem.kind() {
            RadialKind::Aniso2D => root.x * root.x - self.cfg.inner * self.cfg.inner,
            _ => root.x,
        };
        Ok(RadialSolution {
            problem: self.cfg.problem.name(),
            mode: self.cfg.mode,
            grid,
            r,
            dr,
            p,
            stress_labels: self.cfg.problem.stress_labels().to_vec(),
            stresses,
            jacobian: jac,
            momentum,
            hoop,
            r1: root.x,
            constant,
            root,
            map,
        })
    }

    /// P^{aA}|_A = ∂_A P^{aA} + Γ^A_AB P^{aB} + P^{bA} γ^a_bc F^c_A at each node,
    /// with ∂_R P^{rR} by finite differences. Returns (radial, largest other).
    pub fn momentum_residual(&self, map: &RadialMap, stresses: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = &self.table.grid;
        let h = grid[1] - grid[0];
        let d_prr = uniform_derivative(&stresses[0], h);
        let dim = map.dim();
        let ambient = map.ambient();
        let mut radial = Vec::with_capacity(grid.len());
        let mut other = Vec::with_capacity(grid.len());
        for (i, &big_r) in grid.iter().enumerate() {
            // off the equator so the polar balance is not trivially zero
            let x: Vec<f64> = if dim == 3 { vec![big_r, FRAC_PI_3, 0.0] } else { vec![big_r, 0.0] };
            let mut p = DMatrix::zeros(dim, dim);
            for (a, s) in stresses.iter().enumerate() {
                p[(a, a)] = s[i];
            }
            if dim == 3 {
                p[(2, 2)] /= x[1].sin().powi(2);
            }
            let big_gamma = self.metric.christoffel(&x)?;
            let small_gamma = ambient.christoffel(&map.spatial_point(&x))?;
            let (f, _) = deformation_gradient(map, big_r)?;
            let mut div = vec![0.0; dim];
            div[0] = d_prr[i];
            for (a, d) in div.iter_mut().enumerate() {
                for aa in 0..dim {
                    for b in 0..dim {
                        *d += big_gamma.get(aa, aa, b) * p[(a, b)];
                        for c in 0..dim {
                            *d += p[(b, aa)] * small_gamma.get(a, b, c) * f[(c, aa)];
                        }
                    }
                }
            }
            radial.push(div[0]);
            other.push(div[1..].iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        Ok((radial, other))
    }
}

/// Which derivative of Ω drives the density equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassRateForm {
    /// ∂Ω/∂t, as the mass balance requires.
    #[default]
    TimeDerivative,
    /// ∂Ω/∂R in place of ∂Ω/∂t.
    LiteralRadial,
}

#[derive(Debug, Clone)]
pub struct MassDensity {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    /// `rho[i][j]` at `times[i]`, `radii[j]`.
    pub rho: Vec<Vec<f64>>,
}

/// Integrates ∂ρ₀/∂t + κ·w·ρ₀ = S_m pointwise in R with RK4.
#[allow(clippy::too_many_arguments)]
pub fn mass_density(
    problem: &dyn RadialProblem,
    omega: &SharedField,
    rho_initial: f64,
    source: &SharedField,
    radii: &[f64],
    t_span: (f64, f64),
    steps: usize,
    form: MassRateForm,
) -> Result<MassDensity> {
    let (t0, t1) = t_span;
    if !(rho_initial > 0.0) {
        return Err(GrowthError::Configuration(format!("initial density must be positive, got {rho_initial}")));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) || steps == 0 {
        return Err(GrowthError::Configuration(format!("bad time span [{t0}, {t1}] with {steps} steps")));
    }
    let kappa = problem.mass_rate_factor();
    let dt = (t1 - t0) / steps as f64;
    let rate = |big_r: f64, t: f64, rho: f64| {
        let w = match form {
            MassRateForm::TimeDerivative => omega.dt(big_r, t),
            MassRateForm::LiteralRadial => omega.d1(big_r, t),
        };
        source.at(big_r, t) - kappa * w * rho
    };
    let times: Vec<f64> = (0..=steps).map(|i| t0 + dt * i as f64).collect();
    let mut rho = vec![vec![rho_initial; radii.len()]];
    for (i, &t) in times[..steps].iter().enumerate() {
        let prev = &rho[i];
        let next = radii
            .iter()
            .zip(prev)
            .map(|(&big_r, &y)| {
                let k1 = rate(big_r, t, y);
                let k2 = rate(big_r, t + 0.5 * dt, y + 0.5 * dt * k1);
                let k3 = rate(big_r, t + 0.5 * dt, y + 0.5 * dt * k2);
                let k4 = rate(big_r, t + dt, y + dt * k3);
                let y1 = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if !y1.is_finite() || (y1 <= 0.0 && source.at(big_r, t) >= 0.0) {
                    return Err(GrowthError::StepSize { t, reason: format!("density at R = {big_r} became {y1:e}") });
                }
                Ok(y1)
            })
            .collect::<Result<Vec<_>>>()?;
        rho.push(next);
    }
    Ok(MassDensity { times, radii: radii.to_vec(), rho })
}

/// Evaluates stresses through the generic constitutive law at material point `x`.
pub fn generic_stress(bvp: &GrowthBvp, map: &RadialMap, x: &[f64], p: f64) -> Result<DMatrix<f64>> {
    let (f, _) = deformation_gradient(map, x[0])?;
    let big_g = bvp.metric.metric(x)?;
    let g = Euclidean::metric(&map.ambient(), &map.spatial_point(x))?;
    constitutive_stress(&f, &big_g, &g, p, bvp.cfg.mu)
}
