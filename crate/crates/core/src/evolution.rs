//! Material-metric kinetics Ġ♯ = −(ρ₀/β)∂Ψ/∂G with the mass balance
//! ρ̇₀ + ½ρ₀ tr_G Ġ = S_m, integrated pointwise by RK4.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::diffgeo::{check_spd, inverse_spd};
use crate::error::{GrowthError, Result};
use crate::field::SharedField;
use crate::kinematics::{metric_rate as family_rate, MetricFamily};
use crate::output::Table;

/// Ψ(G, F, g) at one material point.
pub trait FreeEnergy: Send + Sync {
    fn name(&self) -> &str;
    fn energy(&self, big_g: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64>;
    /// ∂Ψ/∂G_AB in closed form, if available.
    fn analytic_gradient(
        &self,
        _big_g: &DMatrix<f64>,
        _f: &DMatrix<f64>,
        _g: &DMatrix<f64>,
    ) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

fn right_cauchy_green(f: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    f.transpose() * g * f
}

/// Ψ = μ tr_G C.
#[derive(Debug, Clone, Copy)]
pub struct NeoHookean {
    pub mu: f64,
}

impl FreeEnergy for NeoHookean {
    fn name(&self) -> &str {
        "neo-hookean"
    }
    fn energy(&self, big_g: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
        let gi = inverse_spd(big_g)?;
        Ok(self.mu * (gi * right_cauchy_green(f, g)).trace())
    }
    fn analytic_gradient(
        &self,
        big_g: &DMatrix<f64>,
        f: &DMatrix<f64>,
        g: &DMatrix<f64>,
    ) -> Option<Result<DMatrix<f64>>> {
        Some(inverse_spd(big_g).map(|gi| -(&gi * right_cauchy_green(f, g) * &gi) * self.mu))
    }
}

/// Ψ = μ tr_G C + κ(ln J)², J = √(det g/det G)·det F.
#[derive(Debug, Clone, Copy)]
pub struct VolumetricNeoHookean {
    pub mu: f64,
    pub kappa: f64,
}

impl VolumetricNeoHookean {
    fn log_j(big_g: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
        let j = (g.determinant() / big_g.determinant()).sqrt() * f.determinant();
        if !(j > 0.0) {
            return Err(GrowthError::Constitutive(format!("Jacobian {j:e} is not positive")));
        }
        Ok(j.ln())
    }
}

impl FreeEnergy for VolumetricNeoHookean {
    fn name(&self) -> &str {
        "neo-hookean-volumetric"
    }
    fn energy(&self, big_g: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
        let base = NeoHookean { mu: self.mu }.energy(big_g, f, g)?;
        Ok(base + self.kappa * Self::log_j(big_g, f, g)?.powi(2))
    }
    fn analytic_gradient(
        &self,
        big_g: &DMatrix<f64>,
        f: &DMatrix<f64>,
        g: &DMatrix<f64>,
    ) -> Option<Result<DMatrix<f64>>> {
        Some((|| {
            let gi = inverse_spd(big_g)?;
            let lj = Self::log_j(big_g, f, g)?;
            Ok(-(&gi * right_cauchy_green(f, g) * &gi) * self.mu - &gi * (self.kappa * lj))
        })())
    }
}

/// User-supplied Ψ; its gradient always comes from finite differences.
pub struct FnEnergy<E> {
    pub name: String,
    pub f: E,
}

impl<E> FreeEnergy for FnEnergy<E>
where
    E: Fn(&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) -> f64 + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn energy(&self, big_g: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
        Ok((self.f)(big_g, f, g))
    }
}

/// Central differences along symmetrized directions, step 1e-6·‖G‖.
pub fn fd_gradient(
    energy: &dyn FreeEnergy,
    big_g: &DMatrix<f64>,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = big_g.nrows();
    let eps = 1e-6 * big_g.norm().max(f64::MIN_POSITIVE);
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut dir = DMatrix::zeros(n, n);
            dir[(a, b)] = 0.5;
            dir[(b, a)] += 0.5;
            let plus = energy.energy(&(big_g + &dir * eps), f, g)?;
            let minus = energy.energy(&(big_g - &dir * eps), f, g)?;
            let d = (plus - minus) / (2.0 * eps);
            out[(a, b)] = d;
            out[(b, a)] = d;
        }
    }
    Ok(out)
}

/// ∂Ψ/∂G, analytic when available. Constitutive error if not symmetric.
pub fn energy_gradient(
    energy: &dyn FreeEnergy,
    big_g: &DMatrix<f64>,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = match energy.analytic_gradient(big_g, f, g) {
        Some(d) => d?,
        None => fd_gradient(energy, big_g, f, g)?,
    };
    let asym = (&d - d.transpose()).amax();
    if asym > 1e-10 * d.amax().max(1.0) {
        return Err(GrowthError::Constitutive(format!(
            "{}: dPsi/dG is not symmetric (defect {asym:e})",
            energy.name()
        )));
    }
    Ok(d)
}

type EnergyFactory = fn(&BTreeMap<String, f64>) -> Result<Box<dyn FreeEnergy>>;

fn param(p: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    p.get(key).copied().unwrap_or(default)
}

pub struct FreeEnergyRegistry {
    entries: BTreeMap<&'static str, EnergyFactory>,
}

impl Default for FreeEnergyRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register("neo-hookean", |p| Ok(Box::new(NeoHookean { mu: param(p, "mu", 1.0) })));
        r.register("neo-hookean-volumetric", |p| {
            Ok(Box::new(VolumetricNeoHookean { mu: param(p, "mu", 1.0), kappa: param(p, "kappa", 1.0) }))
        });
        r
    }
}

impl FreeEnergyRegistry {
    pub fn register(&mut self, name: &'static str, factory: EnergyFactory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn build(&self, name: &str, params: &BTreeMap<String, f64>) -> Result<Box<dyn FreeEnergy>> {
        let f = self.entries.get(name).ok_or_else(|| {
            GrowthError::Configuration(format!("unknown free energy '{name}' (known: {})", self.names().join(", ")))
        })?;
        f(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub big_g: DMatrix<f64>,
    pub rho: f64,
    pub t: f64,
}

impl EvolutionState {
    pub fn new(big_g: DMatrix<f64>, rho: f64, t: f64) -> Result<Self> {
        check_spd(&big_g)?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(GrowthError::Configuration(format!("mass density must be positive, got {rho}")));
        }
        Ok(Self { big_g, rho, t })
    }
}

/// Lowered Ġ = −(ρ₀/β) G·∂Ψ/∂G·G.
pub fn metric_rate(
    state: &EvolutionState,
    energy: &dyn FreeEnergy,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    beta: f64,
) -> Result<DMatrix<f64>> {
    let d = energy_gradient(energy, &state.big_g, f, g)?;
    let rate = &state.big_g * d * &state.big_g * (-state.rho / beta);
    Ok((&rate + rate.transpose()) * 0.5)
}

/// tr_G Ġ = tr(G⁻¹Ġ).
pub fn trace_rate(big_g: &DMatrix<f64>, rate: &DMatrix<f64>) -> Result<f64> {
    Ok((inverse_spd(big_g)? * rate).trace())
}

/// Λ as the quadratic form β tr(G⁻¹ĠG⁻¹Ġ) − thermal, and, when ∂Ψ/∂G is
/// supplied, as −ρ₀ ∂Ψ/∂G : Ġ − thermal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyProduction {
    pub quadratic: f64,
    pub constraint: Option<f64>,
}

pub fn entropy_production(
    state: &EvolutionState,
    rate: &DMatrix<f64>,
    beta: f64,
    energy_gradient: Option<&DMatrix<f64>>,
    thermal_term: f64,
) -> Result<EntropyProduction> {
    let m = inverse_spd(&state.big_g)? * rate;
    let quadratic = beta * (&m * &m).trace() - thermal_term;
    let constraint = energy_gradient.map(|d| -state.rho * d.component_mul(rate).sum() - thermal_term);
    Ok(EntropyProduction { quadratic, constraint })
}

pub type Deformation = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type Source = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// What drives Ġ.
#[derive(Clone)]
pub enum Driver {
    /// Kinetic law from a free energy with a prescribed F(t) and ambient g.
    Energy { energy: Arc<dyn FreeEnergy>, deformation: Deformation, spatial: DMatrix<f64> },
    /// G(t) taken from a given history.
    Prescribed(Arc<dyn MetricFamily>),
}

#[derive(Debug, Clone, Copy)]
pub struct EvolutionParams {
    pub beta: f64,
    /// Integration stops once (det G/det G₀)^{1/n} exceeds this.
    pub max_conformal_factor: f64,
    pub max_time: f64,
    /// Maximum number of dt halvings when a step leaves the SPD cone.
    pub max_halvings: u32,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self { beta: 1.0, max_conformal_factor: 1e6, max_time: 1e6, max_halvings: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub rho: f64,
    pub trace_rate: f64,
    pub entropy: EntropyProduction,
    pub det: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<EvolutionState>,
    pub records: Vec<StepRecord>,
    /// Why integration ended before the requested time, if it did.
    pub stopped: Option<String>,
}

impl Trajectory {
    pub fn to_table(&self) -> Table {
        let n = self.states.first().map_or(0, |s| s.big_g.nrows());
        let mut headers = vec!["t".to_string()];
        for a in 0..n {
            for b in a..n {
                headers.push(format!("G{}{}", a + 1, b + 1));
            }
        }
        headers.extend(["rho", "trG_Gdot", "lambda", "lambda_constraint", "detG"].map(String::from));
        let mut table = Table::new(headers);
        for (s, r) in self.states.iter().zip(&self.records) {
            let mut row = vec![s.t];
            for a in 0..n {
                for b in a..n {
                    row.push(s.big_g[(a, b)]);
                }
            }
            row.extend([r.rho, r.trace_rate, r.entropy.quadratic, r.entropy.constraint.unwrap_or(f64::NAN), r.det]);
            table.push_row(&row);
        }
        if let Some(reason) = &self.stopped {
            table.push_meta("stopped", reason);
        }
        table
    }

    pub fn min_entropy(&self) -> f64 {
        self.records.iter().map(|r| r.entropy.quadratic).fold(f64::INFINITY, f64::min)
    }

    /// max |quadratic − constraint| over the trajectory.
    pub fn entropy_disagreement(&self) -> f64 {
        self.records
            .iter()
            .filter_map(|r| r.entropy.constraint.map(|c| (c - r.entropy.quadratic).abs()))
            .fold(0.0, f64::max)
    }
}

pub struct Evolution {
    pub driver: Driver,
    pub source: Source,
    pub params: EvolutionParams,
}

impl Evolution {
    pub fn new(driver: Driver, params: EvolutionParams) -> Result<Self> {
        if !(params.beta > 0.0) {
            return Err(GrowthError::Configuration(format!("beta must be positive, got {}", params.beta)));
        }
        Ok(Self { driver, source: Arc::new(|_| 0.0), params })
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    /// S_m(X, t) sampled at a fixed material point.
    pub fn with_source_field(self, field: SharedField, point: Vec<f64>) -> Self {
        self.with_source(Arc::new(move |t| field.value(&point, t)))
    }

    fn metric_rate_at(&self, s: &EvolutionState) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
        match &self.driver {
            Driver::Energy { energy, deformation, spatial } => {
                let f = deformation(s.t);
                let d = energy_gradient(energy.as_ref(), &s.big_g, &f, spatial)?;
                let rate = &s.big_g * &d * &s.big_g * (-s.rho / self.params.beta);
                Ok(((&rate + rate.transpose()) * 0.5, Some(d)))
            }
            Driver::Prescribed(family) => Ok((family_rate(family.as_ref(), s.t), None)),
        }
    }

    /// (Ġ, ρ̇₀) at a state.
    pub fn rates(&self, s: &EvolutionState) -> Result<(DMatrix<f64>, f64)> {
        let (rate, _) = self.metric_rate_at(s)?;
        let rho_dot = (self.source)(s.t) - 0.5 * s.rho * trace_rate(&s.big_g, &rate)?;
        Ok((rate, rho_dot))
    }

    pub fn record(&self, s: &EvolutionState) -> Result<StepRecord> {
        let (rate, d) = self.metric_rate_at(s)?;
        Ok(StepRecord {
            t: s.t,
            rho: s.rho,
            trace_rate: trace_rate(&s.big_g, &rate)?,
            entropy: entropy_production(s, &rate, self.params.beta, d.as_ref(), 0.0)?,
            det: s.big_g.determinant(),
        })
    }

    /// One classical RK4 step; StepSize error if G leaves the SPD cone or
    /// ρ₀ stops being positive.
    pub fn step(&self, s: &EvolutionState, dt: f64) -> Result<EvolutionState> {
        if !(dt > 0.0) {
            return Err(GrowthError::Configuration(format!("time step must be positive, got {dt}")));
        }
        let stage = |g: DMatrix<f64>, rho: f64, t: f64| -> Result<(DMatrix<f64>, f64)> {
            let probe = EvolutionState { big_g: g, rho, t };
            check_spd(&probe.big_g).map_err(|e| GrowthError::StepSize { t, reason: e.to_string() })?;
            self.rates(&probe)
        };
        let (k1, l1) = stage(s.big_g.clone(), s.rho, s.t)?;
        let (k2, l2) = stage(&s.big_g + &k1 * (0.5 * dt), s.rho + 0.5 * dt * l1, s.t + 0.5 * dt)?;
        let (k3, l3) = stage(&s.big_g + &k2 * (0.5 * dt), s.rho + 0.5 * dt * l2, s.t + 0.5 * dt)?;
        let (k4, l4) = stage(&s.big_g + &k3 * dt, s.rho + dt * l3, s.t + dt)?;
        let big_g = &s.big_g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let big_g = (&big_g + big_g.transpose()) * 0.5;
        let rho = s.rho + dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        let t = s.t + dt;
        check_spd(&big_g).map_err(|e| GrowthError::StepSize { t, reason: e.to_string() })?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(GrowthError::StepSize { t, reason: format!("mass density became {rho}") });
        }
        Ok(EvolutionState { big_g, rho, t })
    }

    /// Step of size dt, split into halves (recursively) while it fails.
    fn adaptive_step(&self, s: &EvolutionState, dt: f64, depth: u32) -> Result<EvolutionState> {
        match self.step(s, dt) {
            Err(GrowthError::StepSize { .. }) if depth < self.params.max_halvings => {
                let mid = self.adaptive_step(s, 0.5 * dt, depth + 1)?;
                self.adaptive_step(&mid, 0.5 * dt, depth + 1)
            }
            r => r,
        }
    }

    /// Fixed-step integration to `t_end`, recording every step.
    pub fn integrate(&self, initial: &EvolutionState, t_end: f64, dt: f64) -> Result<Trajectory> {
        if !(dt > 0.0) || !(t_end >= initial.t) {
            return Err(GrowthError::Configuration(format!(
                "need dt > 0 and t_end >= t0, got dt = {dt}, t_end = {t_end}"
            )));
        }
        let n = initial.big_g.nrows() as i32;
        let det0 = initial.big_g.determinant();
        let steps = ((t_end - initial.t) / dt).round() as usize;
        let mut state = initial.clone();
        let mut traj = Trajectory { states: vec![state.clone()], records: vec![self.record(&state)?], stopped: None };
        for k in 1..=steps {
            let next_t = initial.t + k as f64 * dt;
            if next_t > self.params.max_time {
                traj.stopped = Some(format!("reached max time {}", self.params.max_time));
                break;
            }
            let mut next = self.adaptive_step(&state, next_t - state.t, 0)?;
            next.t = next_t;
            state = next;
            traj.records.push(self.record(&state)?);
            traj.states.push(state.clone());
            let factor = (state.big_g.determinant() / det0).powf(1.0 / n as f64);
            if factor > self.params.max_conformal_factor {
                traj.stopped =
                    Some(format!("conformal factor {factor:e} exceeds {:e}", self.params.max_conformal_factor));
                break;
            }
        }
        Ok(traj)
    }

    /// Independent points integrated in parallel; each trajectory is serial.
    pub fn integrate_many(&self, initial: &[EvolutionState], t_end: f64, dt: f64) -> Result<Vec<Trajectory>> {
        initial.par_iter().map(|s| self.integrate(s, t_end, dt)).collect()
    }

    /// max |ρ₀(dt) − ρ₀(dt/2)| at the shared times.
    pub fn mass_balance_error(&self, initial: &EvolutionState, t_end: f64, dt: f64) -> Result<f64> {
        let coarse = self.integrate(initial, t_end, dt)?;
        let fine = self.integrate(initial, t_end, 0.5 * dt)?;
        Ok(coarse
            .states
            .iter()
            .zip(fine.states.iter().step_by(2))
            .map(|(a, b)| (a.rho - b.rho).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Chart, ExprField};
    use crate::kinematics::ConformalFamily;

    fn spd2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])
    }

    #[test]
    fn neo_hookean_rate_is_scaled_c() {
        let f = DMatrix::from_row_slice(2, 2, &[1.2, 0.1, -0.3, 0.9]);
        let g = DMatrix::identity(2, 2);
        let s = EvolutionState::new(spd2(), 1.5, 0.0).unwrap();
        let nh = NeoHookean { mu: 0.7 };
        let rate = metric_rate(&s, &nh, &f, &g, 2.0).unwrap();
        let expect = f.transpose() * &f * (0.7 * 1.5 / 2.0);
        assert!((rate - expect).amax() < 1e-13);
        // F at reference: C = G
        let fg = crate::kinematics::orthonormal_frame(&spd2()).unwrap().coframe;
        let rate = metric_rate(&s, &nh, &fg, &g, 1.0).unwrap();
        assert!((rate - spd2() * (0.7 * 1.5)).amax() < 1e-12);
    }

    #[test]
    fn analytic_gradients_match_fd() {
        let f = DMatrix::from_row_slice(3, 3, &[1.1, 0.2, 0.0, 0.1, 0.9, 0.3, 0.0, -0.2, 1.3]);
        let big_g = DMatrix::from_row_slice(3, 3, &[1.5, 0.2, 0.1, 0.2, 1.1, -0.1, 0.1, -0.1, 0.8]);
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.2, 0.9]));
        let energies: [Box<dyn FreeEnergy>; 2] =
            [Box::new(NeoHookean { mu: 1.3 }), Box::new(VolumetricNeoHookean { mu: 0.8, kappa: 2.0 })];
        for e in &energies {
            let a = e.analytic_gradient(&big_g, &f, &g).unwrap().unwrap();
            let d = fd_gradient(e.as_ref(), &big_g, &f, &g).unwrap();
            assert!((a - d).amax() < 1e-7, "{}", e.name());
        }
    }

    #[test]
    fn fd_fallback_and_zero_density() {
        let e = FnEnergy {
            name: "custom".into(),
            f: |gg: &DMatrix<f64>, _: &DMatrix<f64>, _: &DMatrix<f64>| gg.determinant(),
        };
        let big_g = spd2();
        let d = energy_gradient(&e, &big_g, &big_g, &big_g).unwrap();
        // ∂det G/∂G = det G · G⁻¹
        let expect = inverse_spd(&big_g).unwrap() * big_g.determinant();
        assert!((d - expect).amax() < 1e-8);
        let mut s = EvolutionState::new(big_g.clone(), 1.0, 0.0).unwrap();
        s.rho = 0.0;
        let r = metric_rate(&s, &NeoHookean { mu: 1.0 }, &big_g, &DMatrix::identity(2, 2), 1.0).unwrap();
        assert_eq!(r.amax(), 0.0);
    }

    #[test]
    fn asymmetric_gradient_is_rejected() {
        struct Bad;
        impl FreeEnergy for Bad {
            fn name(&self) -> &str {
                "bad"
            }
            fn energy(&self, _: &DMatrix<f64>, _: &DMatrix<f64>, _: &DMatrix<f64>) -> Result<f64> {
                Ok(0.0)
            }
            fn analytic_gradient(
                &self,
                _: &DMatrix<f64>,
                _: &DMatrix<f64>,
                _: &DMatrix<f64>,
            ) -> Option<Result<DMatrix<f64>>> {
                Some(Ok(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])))
            }
        }
        let i = DMatrix::identity(2, 2);
        assert!(matches!(energy_gradient(&Bad, &i, &i, &i), Err(GrowthError::Constitutive(_))));
    }

    fn nh_evolution(f: DMatrix<f64>) -> Evolution {
        let n = f.nrows();
        let driver = Driver::Energy {
            energy: Arc::new(NeoHookean { mu: 1.0 }),
            deformation: Arc::new(move |_| f.clone()),
            spatial: DMatrix::identity(n, n),
        };
        Evolution::new(driver, EvolutionParams::default()).unwrap()
    }

    #[test]
    fn density_times_volume_is_conserved_without_source() {
        let ev = nh_evolution(DMatrix::from_row_slice(2, 2, &[1.1, 0.2, 0.0, 0.9]));
        let s0 = EvolutionState::new(spd2(), 1.0, 0.0).unwrap();
        let traj = ev.integrate(&s0, 1.0, 1e-2).unwrap();
        let m0 = s0.rho * s0.big_g.determinant().sqrt();
        for s in &traj.states {
            assert!((s.rho * s.big_g.determinant().sqrt() - m0).abs() < 1e-9);
        }
        assert!(traj.min_entropy() > 0.0);
        assert!(traj.entropy_disagreement() < 1e-12);
        assert!(ev.mass_balance_error(&s0, 1.0, 1e-2).unwrap() < 1e-8);
    }

    #[test]
    fn pure_source() {
        let fam = crate::kinematics::FnMetricFamily::new(2, |_| DMatrix::identity(2, 2));
        let ev = Evolution::new(Driver::Prescribed(Arc::new(fam)), EvolutionParams::default())
            .unwrap()
            .with_source(Arc::new(|_| 0.25));
        let s = ev.step(&EvolutionState::new(DMatrix::identity(2, 2), 2.0, 0.0).unwrap(), 0.1).unwrap();
        assert!((s.rho - 2.025).abs() < 1e-15);
    }

    #[test]
    fn conformal_flow_mass_form() {
        let omega: SharedField = Arc::new(ExprField::parse("0.3*t*x + 0.1*t^2", Chart::Cartesian(2)).unwrap());
        let point = vec![0.7, 0.2];
        let fam = ConformalFamily { omega: omega.clone(), point: point.clone() };
        let ev = Evolution::new(Driver::Prescribed(Arc::new(fam)), EvolutionParams::default()).unwrap();
        let s0 = EvolutionState::new(DMatrix::identity(2, 2), 1.0, 0.0).unwrap();
        let traj = ev.integrate(&s0, 1.0, 1e-2).unwrap();
        for s in &traj.states {
            let w = omega.value(&point, s.t);
            // dV/dV₀ = e^{NΩ}
            assert!((s.big_g.determinant().sqrt() - (2.0 * w).exp()).abs() < 1e-9);
            // m = ρ₀ dV is constant, so ρ₀ = e^{−NΩ}
            assert!((s.rho - (-2.0 * w).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn guard_stops_inflation() {
        let ev = Evolution::new(
            Driver::Energy {
                energy: Arc::new(NeoHookean { mu: 1.0 }),
                deformation: Arc::new(|_| DMatrix::identity(2, 2) * 3.0),
                spatial: DMatrix::identity(2, 2),
            },
            EvolutionParams { max_conformal_factor: 2.0, ..EvolutionParams::default() },
        )
        .unwrap();
        let traj = ev.integrate(&EvolutionState::new(DMatrix::identity(2, 2), 1.0, 0.0).unwrap(), 10.0, 1e-2).unwrap();
        assert!(traj.stopped.is_some());
        assert!(traj.states.last().unwrap().t < 10.0);
    }

    #[test]
    fn registry() {
        let r = FreeEnergyRegistry::default();
        assert_eq!(r.names(), vec!["neo-hookean", "neo-hookean-volumetric"]);
        let e = r.build("neo-hookean", &BTreeMap::from([("mu".to_string(), 2.0)])).unwrap();
        let i = DMatrix::identity(2, 2);
        assert_eq!(e.energy(&i, &i, &i).unwrap(), 4.0);
        assert!(r.build("nope", &BTreeMap::new()).is_err());
    }
}
