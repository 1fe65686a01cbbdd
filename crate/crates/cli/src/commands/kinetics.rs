use std::collections::BTreeMap;
use std::sync::Arc;

use growthmech_core::evolution::{Driver, Evolution, EvolutionParams, EvolutionState, FreeEnergyRegistry};
use growthmech_core::expr::Chart;
use nalgebra::DMatrix;

use super::{sci, stamp, Command, Outcome};
use crate::config::{field_from, key, Key, Settings};
use crate::CliError;

pub struct Evolve;

impl Command for Evolve {
    fn name(&self) -> &'static str {
        "evolve"
    }
    fn about(&self) -> &'static str {
        "Integrate the material-metric kinetic law and mass balance at one material point"
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("energy", "neo-hookean", "free energy: neo-hookean | neo-hookean-volumetric"),
            key("mu", "1", "shear modulus"),
            key("kappa", "1", "volumetric modulus (neo-hookean-volumetric)"),
            key("beta", "1", "dissipation coefficient"),
            key("rho0", "1", "initial mass density"),
            key("dim", "2", "dimension of the material point"),
            key("G", "", "initial metric, rows split by ';' (default identity)"),
            key("F", "", "deformation gradient, entries may depend on t (default identity)"),
            key("source", "0", "mass source S_m(t)"),
            key("t-end", "1", "final time"),
            key("dt", "1e-3", "time step"),
            key("max-factor", "1e6", "stop once the conformal factor exceeds this"),
            key("tol", "1e-10", "tolerance on the entropy-production consistency"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let n = s.usize("dim")?;
        if !(1..=3).contains(&n) {
            return Err(CliError::Usage(format!("dim must be 1, 2 or 3, got {n}")));
        }
        let params = BTreeMap::from([("mu".to_string(), s.f64("mu")?), ("kappa".to_string(), s.f64("kappa")?)]);
        let energy = FreeEnergyRegistry::default().build(s.str("energy"), &params)?;
        let identity = |k: &str| -> Result<Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>, CliError> {
            if s.str(k).is_empty() {
                Ok(Arc::new(move |_| DMatrix::identity(n, n)))
            } else {
                Ok(Arc::new(s.matrix_fn(k, n)?))
            }
        };
        let big_g = identity("G")?(0.0);
        let deformation = identity("F")?;
        let source = field_from("source", s.str("source"), Chart::Radial)?;
        let driver = Driver::Energy { energy: Arc::from(energy), deformation, spatial: DMatrix::identity(n, n) };
        let evolution = Evolution::new(
            driver,
            EvolutionParams {
                beta: s.positive("beta")?,
                max_conformal_factor: s.positive("max-factor")?,
                ..EvolutionParams::default()
            },
        )?
        .with_source(Arc::new(move |t| source.value(&[0.0], t)));
        let state = EvolutionState::new(big_g, s.positive("rho0")?, 0.0)?;
        let (t_end, dt) = (s.f64("t-end")?, s.positive("dt")?);
        let trajectory = evolution.integrate(&state, t_end, dt)?;

        let tol = s.positive("tol")?;
        let scale = trajectory.records.iter().map(|r| r.entropy.quadratic.abs()).fold(1.0, f64::max);
        let min_entropy = trajectory.min_entropy();
        let disagreement = trajectory.entropy_disagreement();
        let mut out = Outcome::new(min_entropy >= -tol * scale && disagreement <= tol * scale);
        let last = trajectory.states.last().expect("trajectory has its initial state");
        out.note("t_final", last.t);
        out.note("rho_final", format!("{:.16e}", last.rho));
        out.note("min_entropy_production", sci(min_entropy));
        out.note("entropy_disagreement", sci(disagreement));
        if let Some(reason) = &trajectory.stopped {
            out.note("stopped", reason);
        }
        out.file("evolve.csv", stamp(trajectory.to_table(), self.name(), s));
        Ok(out)
    }
}
