use std::sync::Arc;

use growthmech_core::diffgeo::{
    flatness_residual, ConformalMetric, Euclidean, FlatnessOptions, GridMetric, Metric, RadialFamily, RadialMetric,
};
use growthmech_core::expr::Chart;
use growthmech_core::field::ScalarField;
use growthmech_core::lattice::{FdScheme, Lattice};
use growthmech_core::output::Table;
use growthmech_core::stressfree::{
    check_2d, check_3d, node_derivatives, radial_cone_family, require_clearance, CheckOptions, GeneralFamily,
};

use super::{sci, stamp, Command, Outcome};
use crate::config::{key, Key, Settings};
use crate::CliError;

fn scheme(s: &Settings) -> Result<FdScheme, CliError> {
    match s.str("scheme") {
        "second" => Ok(FdScheme::Second),
        "fourth" => Ok(FdScheme::Fourth),
        other => Err(CliError::Usage(format!("scheme: expected 'second' or 'fourth', got '{other}'"))),
    }
}

fn cube(s: &Settings, dim: usize) -> Result<Lattice, CliError> {
    Ok(Lattice::cube(dim, s.f64("lo")?, s.f64("hi")?, s.usize("grid")?)?)
}

pub struct Curvature;

impl Command for Curvature {
    fn name(&self) -> &'static str {
        "curvature"
    }
    fn about(&self) -> &'static str {
        "Scalar curvature of a metric on a grid, analytic and finite-difference"
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("metric", "conformal2d", "iso2d | aniso2d | iso3d | conformal2d | conformal3d | polar | spherical"),
            key("omega", "0", "growth field"),
            key("pi", "", "tangential field for aniso2d (default -omega)"),
            key("lo", "1", "lower coordinate bound on every axis"),
            key("hi", "2", "upper coordinate bound on every axis"),
            key("grid", "33", "nodes per axis"),
            key("scheme", "fourth", "first-derivative stencil: second | fourth"),
            key("abs-tol", "1e-6", "absolute floor of the flatness tolerance"),
            key("expect", "none", "none | flat | curved; a different verdict exits 2"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let (lo, hi) = (s.f64("lo")?, s.f64("hi")?);
        let metric: Box<dyn Metric> = match s.str("metric") {
            "polar" => Box::new(Euclidean::Polar),
            "spherical" => Box::new(Euclidean::Spherical),
            "conformal2d" => Box::new(ConformalMetric::new(s.field("omega", Chart::Cartesian(2))?)),
            "conformal3d" => Box::new(ConformalMetric::new(s.field("omega", Chart::Cartesian(3))?)),
            kind @ ("iso2d" | "aniso2d" | "iso3d") => {
                let omega = s.field("omega", Chart::Radial)?;
                let family = match kind {
                    "iso2d" => RadialFamily::Iso2D { omega },
                    "iso3d" => RadialFamily::Iso3D { omega },
                    _ => {
                        let pi = if s.str("pi").is_empty() { None } else { Some(s.field("pi", Chart::Radial)?) };
                        RadialFamily::Aniso2D { omega, pi }
                    }
                };
                Box::new(RadialMetric::new(family, lo, hi)?)
            }
            other => return Err(CliError::Usage(format!("metric: unknown kind '{other}'"))),
        };
        let lattice = cube(s, metric.dim())?;
        let grid = GridMetric::from_metric(lattice.clone(), metric.as_ref())?;
        let scheme = scheme(s)?;
        let report = flatness_residual(
            &grid,
            FlatnessOptions { scheme, abs_tol: s.positive("abs-tol")?, ..FlatnessOptions::default() },
        )?;
        let fd = grid.curvature_field(scheme)?;

        let n = lattice.dim();
        let mut headers: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        headers.extend(["scalar_fd", "scalar_exact", "ricci_max_fd"].map(String::from));
        let mut table = Table::new(headers);
        let mut worst = 0.0f64;
        for (k, c) in fd.nodes.iter().zip(&fd.curvature) {
            let x = lattice.coords(*k);
            let exact = metric.curvature(&x)?.scalar;
            worst = worst.max((exact - c.scalar).abs());
            let mut row = x;
            row.extend([c.scalar, exact, c.ricci.amax()]);
            table.push_row(&row);
        }
        table.push_meta("flat", report.flat);
        table.push_meta("residual", sci(report.residual));
        table.push_meta("tolerance", sci(report.tolerance));

        let passed = match s.str("expect") {
            "none" => true,
            "flat" => report.flat,
            "curved" => !report.flat,
            other => return Err(CliError::Usage(format!("expect: unknown value '{other}'"))),
        };
        let mut out = Outcome::new(passed);
        out.note("flat", report.flat);
        out.note("residual", sci(report.residual));
        out.note("tolerance", sci(report.tolerance));
        out.note("max_fd_vs_exact", sci(worst));
        out.file("curvature.csv", stamp(table, self.name(), s));
        Ok(out)
    }
}

pub struct StressFree2d;

impl Command for StressFree2d {
    fn name(&self) -> &'static str {
        "stressfree-2d"
    }
    fn about(&self) -> &'static str {
        "Check that a 2D conformal growth field is harmonic (stress-free)"
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("family", "expr", "expr | cone"),
            key("omega", "0", "growth field in X1, X2 (family = expr)"),
            key("xi", "1", "cone amplitude (family = cone)"),
            key("eta", "0", "cone exponent (family = cone)"),
            key("lo", "0.5", "lower coordinate bound"),
            key("hi", "1.5", "upper coordinate bound"),
            key("grid", "33", "nodes per axis"),
            key("margin", "0.1", "required clearance from singular points, as a fraction of the domain"),
            key("abs-tol", "1e-6", "absolute floor of the tolerance"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let lattice = cube(s, 2)?;
        let mut extra = Vec::new();
        let omega: Arc<dyn ScalarField> = match s.str("family") {
            "expr" => s.field("omega", Chart::Cartesian(2))?,
            "cone" => {
                let cone = radial_cone_family(s.f64("xi")?, s.f64("eta")?)?;
                require_clearance(&lattice, |x| x.iter().map(|v| v * v).sum::<f64>().sqrt(), s.f64("margin")?)?;
                extra.push(("cone_parameter", cone.cone_parameter));
                extra.push(("deficit_angle", cone.deficit_angle));
                cone.omega
            }
            other => return Err(CliError::Usage(format!("family: unknown value '{other}'"))),
        };
        let opts = CheckOptions { abs_tol: s.positive("abs-tol")?, ..CheckOptions::default() };
        let verdict = check_2d(omega.as_ref(), &lattice, 0.0, opts)?;
        let values: Vec<f64> = (0..lattice.len()).map(|k| omega.value(&lattice.coords(k), 0.0)).collect();
        let mut table = Table::new(["x1", "x2", "omega", "laplacian"]);
        for k in lattice.interior(1) {
            let x = lattice.coords(k);
            table.push_row(&[x[0], x[1], values[k], node_derivatives(&lattice, &values, k).laplacian()]);
        }
        let mut out = Outcome::new(verdict.flat);
        for (k, v) in extra {
            table.push_meta(k, sci(v));
            out.note(k, sci(v));
        }
        table.push_meta("flat", verdict.flat);
        table.push_meta("residual", sci(verdict.residual));
        out.note("flat", verdict.flat);
        out.note("residual", sci(verdict.residual));
        out.note("tolerance", sci(verdict.tolerance));
        out.file("stressfree-2d.csv", stamp(table, self.name(), s));
        Ok(out)
    }
}

pub struct StressFree3d;

impl Command for StressFree3d {
    fn name(&self) -> &'static str {
        "stressfree-3d"
    }
    fn about(&self) -> &'static str {
        "Check the 3D flatness equations for a conformal growth field"
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("family", "expr", "expr | general"),
            key("omega", "0", "growth field in X1, X2, X3 (family = expr)"),
            key("c", "1 0 0 0 1", "c0 c1 c2 c3 c4 of -ln(c0 R^2 + c.X + c4) (family = general)"),
            key("lo", "0", "lower coordinate bound"),
            key("hi", "1", "upper coordinate bound"),
            key("grid", "17", "nodes per axis"),
            key("margin", "0.1", "required margin on the logarithm's argument, relative to its maximum"),
            key("abs-tol", "1e-6", "absolute floor of the tolerance"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let lattice = cube(s, 3)?;
        let mut out = Outcome::new(true);
        let mut meta = Vec::new();
        let omega = match s.str("family") {
            "expr" => s.field("omega", Chart::Cartesian(3))?,
            "general" => {
                let c = s.f64s("c")?;
                if c.len() != 5 {
                    return Err(CliError::Usage(format!("c: expected 5 numbers, got {}", c.len())));
                }
                let fam = GeneralFamily { c0: c[0], c: [c[1], c[2], c[3]], c4: c[4] };
                fam.require_positive(&lattice, s.f64("margin")?)?;
                meta.push(("sectional_curvature", sci(fam.sectional_curvature())));
                fam.omega()?
            }
            other => return Err(CliError::Usage(format!("family: unknown value '{other}'"))),
        };
        let opts = CheckOptions { abs_tol: s.positive("abs-tol")?, ..CheckOptions::default() };
        let check = check_3d(omega.as_ref(), &lattice, 0.0, opts)?;
        let values: Vec<f64> = (0..lattice.len()).map(|k| omega.value(&lattice.coords(k), 0.0)).collect();
        let mut table = Table::new(["x1", "x2", "x3", "omega", "e12", "e13", "e23", "e11", "e22", "e33"]);
        for k in lattice.interior(1) {
            let d = node_derivatives(&lattice, &values, k);
            let mut row = lattice.coords(k);
            row.push(values[k]);
            row.extend(growthmech_core::stressfree::flatness_equations(&d.gradient, &d.hessian));
            table.push_row(&row);
        }
        meta.push(("flat", check.pde.flat.to_string()));
        meta.push(("pde_residual", sci(check.pde.residual)));
        meta.push(("pde_tolerance", sci(check.pde.tolerance)));
        meta.push(("ricci_flat", check.ricci.flat.to_string()));
        meta.push(("ricci_residual", sci(check.ricci.residual)));
        for (k, v) in meta {
            table.push_meta(k, &v);
            out.note(k, v);
        }
        out.passed = check.pde.flat && check.agree();
        out.file("stressfree-3d.csv", stamp(table, self.name(), s));
        Ok(out)
    }
}
