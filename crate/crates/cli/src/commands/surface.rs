use growthmech_core::embed::{embed_metric, induced_metric_error, revolve, RevolutionProfile};
use growthmech_core::expr::Chart;

use super::{header_lines, sci, stamp, Command, Outcome};
use crate::config::{key, required, Key, Settings};
use crate::CliError;

pub struct Embed;

impl Command for Embed {
    fn name(&self) -> &'static str {
        "embed"
    }
    fn about(&self) -> &'static str {
        "Realize a rotationally symmetric material metric as a surface of revolution"
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("family", "iso", "iso (M = e^omega, N = R e^omega) | aniso (N = R e^pi) | general (M, N)"),
            key("omega", "0", "radial growth field"),
            key("pi", "0", "tangential growth field (family = aniso)"),
            key("m", "1", "M(R) (family = general)"),
            key("n", "R", "N(R) (family = general)"),
            required("range", "radial interval 'start end'", 2),
            key("t", "0", "time"),
            key("samples", "257", "radial samples"),
            key("n-theta", "128", "angular samples"),
            key("tol", "1e-3", "tolerance on the relative edge-length mismatch"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let range = s.f64s("range")?;
        if range.len() != 2 {
            return Err(CliError::Usage(format!("range: expected 2 numbers, got {}", range.len())));
        }
        let field = |k: &str| s.field(k, Chart::Radial);
        let profile = match s.str("family") {
            "iso" => RevolutionProfile::isotropic(field("omega")?),
            "aniso" => RevolutionProfile::anisotropic(field("omega")?, field("pi")?),
            "general" => RevolutionProfile::general(field("m")?, field("n")?),
            other => return Err(CliError::Usage(format!("family: unknown value '{other}'"))),
        }
        .at_time(s.f64("t")?);
        let n_theta = s.usize("n-theta")?;
        let curve = embed_metric(&profile, range[0], range[1], s.usize("samples")?)?;
        let mesh = revolve(&curve, n_theta)?;
        let err = induced_metric_error(&profile, &curve, &mesh, n_theta);
        let (a, b) = curve.valid_interval();

        let mut out = Outcome::new(err <= s.positive("tol")?);
        out.note("valid_interval", format!("[{a}, {b}]"));
        for (p, q) in &curve.violations {
            out.note("violation", format!("[{p}, {q}]"));
        }
        out.note("vertices", mesh.vertices.len());
        out.note("triangles", mesh.triangles.len());
        out.note("induced_metric_error", sci(err));
        let mut comments = header_lines(self.name(), s);
        comments.push(format!("valid_interval: [{a}, {b}]"));
        out.file("embed.obj", mesh.to_obj(&comments));
        out.file("embed_profile.csv", stamp(curve.to_table(), self.name(), s));
        Ok(out)
    }
}
