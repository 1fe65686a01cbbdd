use growthmech_core::expr::Chart;
use growthmech_core::field::SharedField;
use growthmech_core::kinematics::decompose;
use growthmech_core::lattice::Lattice;
use growthmech_core::linearized::{solve_linearized, stress_free_beta_check, SolverOptions, SvkParams};
use growthmech_core::output::Table;
use growthmech_core::stressfree::CheckOptions;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sci, stamp, Command, Outcome};
use crate::config::{field_from, key, Key, Settings};
use crate::CliError;

pub struct Linearized;

impl Command for Linearized {
    fn name(&self) -> &'static str {
        "linearized"
    }
    fn about(&self) -> &'static str {
        "Solve the linearized growth problem for an isotropic growth variation beta"
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("dim", "2", "2 or 3"),
            key("beta", "0", "growth variation in X1..Xn"),
            key("lambda", "1", "first Lame constant"),
            key("mu", "1", "shear modulus"),
            key("lo", "0", "lower coordinate bound"),
            key("hi", "1", "upper coordinate bound"),
            key("grid", "17", "nodes per axis (at least 9)"),
            key("bc", "", "Dirichlet displacement components split by ';' (default zero)"),
            key("tol", "1e-10", "tolerance on the assembled residual"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let n = s.usize("dim")?;
        if !(n == 2 || n == 3) {
            return Err(CliError::Usage(format!("dim must be 2 or 3, got {n}")));
        }
        let lattice = Lattice::cube(n, s.f64("lo")?, s.f64("hi")?, s.usize("grid")?)?;
        let beta = s.field("beta", Chart::Cartesian(n))?;
        let bc: Vec<SharedField> = if s.str("bc").is_empty() {
            Vec::new()
        } else {
            let parts: Vec<&str> = s.str("bc").split(';').collect();
            if parts.len() != n {
                return Err(CliError::Usage(format!("bc: expected {n} components, got {}", parts.len())));
            }
            parts.iter().map(|p| field_from("bc", p, Chart::Cartesian(n))).collect::<Result<_, _>>()?
        };
        let params = SvkParams::new(s.f64("lambda")?, s.f64("mu")?)?;
        let solution = solve_linearized(
            params,
            beta.as_ref(),
            &lattice,
            |x| if bc.is_empty() { vec![0.0; n] } else { bc.iter().map(|f| f.value(x, 0.0)).collect() },
            SolverOptions::default(),
        )?;
        let verdict = stress_free_beta_check(beta.as_ref(), &lattice, CheckOptions::default())?;
        let mut table = solution.to_table();
        table.push_meta("stress_free", verdict.flat);

        let mut out = Outcome::new(solution.residual <= s.positive("tol")?);
        out.note("iterations", solution.iterations);
        out.note("residual", sci(solution.residual));
        out.note("stress_free", verdict.flat);
        out.note("stress_free_residual", sci(verdict.residual));
        out.file("linearized.csv", stamp(table, self.name(), s));
        Ok(out)
    }
}

pub struct DecomposeCheck;

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.2
}

fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let f = DMatrix::<f64>::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 1.5 } else { 0.0 });
        if f.determinant().abs() > 0.1 {
            return f;
        }
    }
}

impl Command for DecomposeCheck {
    fn name(&self) -> &'static str {
        "decompose-check"
    }
    fn about(&self) -> &'static str {
        "Verify the Fe.Fg decomposition identities on random metrics and deformations"
    }
    fn keys(&self) -> Vec<Key> {
        vec![
            key("samples", "1000", "samples per dimension"),
            key("dims", "2 3", "dimensions to test"),
            key("seed", "7", "random seed"),
            key("tol", "1e-12", "relative tolerance"),
        ]
    }
    fn run(&self, s: &Settings) -> Result<Outcome, CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(s.usize("seed")? as u64);
        let samples = s.usize("samples")?;
        let tol = s.positive("tol")?;
        let mut table = Table::new(["dim", "reassembly", "det_fe", "trace_ce"]);
        let mut worst = [0.0f64; 3];
        for d in s.f64s("dims")? {
            let n = d as usize;
            if !(1..=3).contains(&n) || d != n as f64 {
                return Err(CliError::Usage(format!("dims: unsupported dimension {d}")));
            }
            for _ in 0..samples {
                let big_g = random_spd(&mut rng, n);
                let g = random_spd(&mut rng, n);
                let f = random_invertible(&mut rng, n);
                let dec = decompose(&f, &big_g, &g)?;
                let det = (g.determinant() / big_g.determinant()).sqrt() * f.determinant();
                let c = f.transpose() * &g * &f;
                let tr_g_c = (big_g.clone().try_inverse().expect("SPD") * c).trace();
                let errs = [
                    dec.reassembly_error() / dec.f_hat.amax(),
                    (dec.det_fe() - det).abs() / det.abs(),
                    (dec.trace_ce() - tr_g_c).abs() / tr_g_c.abs(),
                ];
                for (w, e) in worst.iter_mut().zip(errs) {
                    *w = w.max(e);
                }
                table.push_row(&[d, errs[0], errs[1], errs[2]]);
            }
        }
        let mut out = Outcome::new(worst.iter().all(|w| *w <= tol));
        out.note("max_reassembly_error", sci(worst[0]));
        out.note("max_det_error", sci(worst[1]));
        out.note("max_trace_error", sci(worst[2]));
        out.file("decompose-check.csv", stamp(table, self.name(), s));
        Ok(out)
    }
}
