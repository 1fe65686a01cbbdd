use growthmech_core::expr::Chart;
use growthmech_core::residual::{BoundaryMode, BvpConfig, GrowthBvp, ProblemRegistry};

use super::{sci, stamp, Command, Outcome};
use crate::config::{key, Key, Settings};
use crate::CliError;

/// One of the registered radial residual-stress problems.
pub struct RadialBvp {
    problem: &'static str,
}

impl RadialBvp {
    pub fn new(problem: &'static str) -> Self {
        Self { problem }
    }
}

impl Command for RadialBvp {
    fn name(&self) -> &'static str {
        self.problem
    }
    fn about(&self) -> &'static str {
        match self.problem {
            "annulus-iso" => "Residual stress in an incompressible annulus under isotropic growth",
            "annulus-aniso" => "Residual stress in an incompressible annulus under anisotropic growth",
            _ => "Residual stress in an incompressible spherical shell under isotropic growth",
        }
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("omega", "0", "radial growth field in R (and t), or @table.csv"),
            key("r1", "1", "inner material radius"),
            key("r2", "2", "outer material radius"),
            key("mu", "1", "shear modulus"),
            key("t", "0", "time at which the growth field is evaluated"),
            key("grid", "512", "number of radial nodes"),
            key("boundary", "traction-free", "traction-free | paper-exact"),
            key("root-finder", "brent", "bisection | brent"),
            key("tol", "1e-5", "tolerance on the equilibrium residual, relative to the largest stress"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let problem = ProblemRegistry::default().get(self.problem)?;
        let omega = s.field("omega", Chart::Radial)?;
        let mut cfg = BvpConfig::new(problem, omega, s.positive("r1")?, s.positive("r2")?, s.positive("mu")?);
        cfg.t = s.f64("t")?;
        cfg.nodes = s.usize("grid")?;
        cfg.mode = BoundaryMode::parse(s.str("boundary"))?;
        cfg.root_finder = s.str("root-finder").to_string();
        let solution = GrowthBvp::new(cfg)?.solve()?;
        let momentum = solution.max_momentum_residual();
        let jacobian = solution.max_jacobian_error();
        let hoop = solution.max_hoop_residual();
        let scale = solution.stresses.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = s.positive("tol")? * scale;
        let mut out = Outcome::new(momentum <= tol && jacobian <= 1e-8);
        out.note("r1", format!("{:.16e}", solution.r1));
        out.note("constant", format!("{:.16e}", solution.constant));
        out.note("max_momentum_residual", sci(momentum));
        out.note("max_hoop_residual", sci(hoop));
        out.note("max_jacobian_error", sci(jacobian));
        out.file(&format!("{}.csv", self.problem), stamp(solution.to_table(), self.problem, s));
        Ok(out)
    }
}
