//! Scalar root finders behind a common trait, selectable by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{GrowthError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { x_tol: 1e-14, f_tol: 0.0, max_iter: 400 }
    }
}

pub trait RootFinder: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, f: &mut dyn FnMut(f64) -> f64, bracket: Bracket, opts: RootOptions) -> Result<Root>;
}

/// Grow `[lo, hi]` geometrically until `f` changes sign.
///
/// `hi` is moved away from `lo` by doubling the width; `lo` is moved towards
/// `floor` (exclusive) by halving its distance to it. At most 50 doublings.
pub fn expand_bracket(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, floor: Option<f64>) -> Result<Bracket> {
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut trail = Vec::new();
    for _ in 0..50 {
        if f_lo.is_finite() && f_hi.is_finite() && f_lo * f_hi <= 0.0 {
            return Ok(Bracket { lo, hi, f_lo, f_hi });
        }
        trail.push(format!("[{lo:.6e}, {hi:.6e}] -> ({f_lo:.3e}, {f_hi:.3e})"));
        let width = hi - lo;
        hi += width;
        f_hi = f(hi);
        lo = match floor {
            Some(fl) => fl + 0.5 * (lo - fl),
            None => lo - width,
        };
        f_lo = f(lo);
    }
    let last = trail.iter().rev().take(3).cloned().collect::<Vec<_>>().join("; ");
    Err(GrowthError::Bracket(format!("no sign change after 50 expansions; last brackets: {last}")))
}

/// Nearest sign change to `guess` on a positive half-line.
///
/// Walks outward from `guess` in both directions in steps of 2^{1/4}, up to
/// 50 doublings each way, alternating sides so the first bracket found is the
/// one closest to `guess` in log distance.
pub fn scan_bracket(f: &mut dyn FnMut(f64) -> f64, guess: f64) -> Result<Bracket> {
    if !(guess > 0.0 && guess.is_finite()) {
        return Err(GrowthError::Bracket(format!("scan needs a positive finite guess, got {guess}")));
    }
    let ratio = 2f64.powf(0.25);
    let f0 = f(guess);
    if f0 == 0.0 {
        return Ok(Bracket { lo: guess, hi: guess, f_lo: 0.0, f_hi: 0.0 });
    }
    let (mut up, mut f_up) = (guess, f0);
    let (mut down, mut f_down) = (guess, f0);
    for _ in 0..200 {
        let next = up * ratio;
        let fn_ = f(next);
        if fn_.is_finite() && f_up.is_finite() && fn_ * f_up <= 0.0 {
            return Ok(Bracket { lo: up, hi: next, f_lo: f_up, f_hi: fn_ });
        }
        up = next;
        f_up = fn_;
        let next = down / ratio;
        let fn_ = f(next);
        if fn_.is_finite() && f_down.is_finite() && fn_ * f_down <= 0.0 {
            return Ok(Bracket { lo: next, hi: down, f_lo: fn_, f_hi: f_down });
        }
        down = next;
        f_down = fn_;
    }
    Err(GrowthError::Bracket(format!(
        "no sign change within 50 doublings of {guess}: f({down:.3e}) = {f_down:.3e}, \
         f({guess:.6e}) = {f0:.3e}, f({up:.3e}) = {f_up:.3e}"
    )))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Bisection;

impl RootFinder for Bisection {
    fn name(&self) -> &'static str {
        "bisection"
    }

    fn solve(&self, f: &mut dyn FnMut(f64) -> f64, b: Bracket, opts: RootOptions) -> Result<Root> {
        let (mut lo, mut hi, mut f_lo) = (b.lo, b.hi, b.f_lo);
        if f_lo == 0.0 {
            return Ok(Root { x: lo, residual: 0.0, iterations: 0 });
        }
        if b.f_hi == 0.0 {
            return Ok(Root { x: hi, residual: 0.0, iterations: 0 });
        }
        for it in 1..=opts.max_iter {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 || fm.abs() <= opts.f_tol || (hi - lo) * 0.5 <= opts.x_tol * mid.abs().max(1.0) {
                return Ok(Root { x: mid, residual: fm, iterations: it });
            }
            if (fm > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
        }
        Err(GrowthError::Numeric(format!("bisection exceeded {} iterations on [{lo:e}, {hi:e}]", opts.max_iter)))
    }
}

/// Brent's method: inverse quadratic interpolation and secant steps,
/// safeguarded by bisection.
#[derive(Debug, Default, Clone, Copy)]
pub struct Brent;

impl RootFinder for Brent {
    fn name(&self) -> &'static str {
        "brent"
    }

    fn solve(&self, f: &mut dyn FnMut(f64) -> f64, b: Bracket, opts: RootOptions) -> Result<Root> {
        let (mut a, mut fa) = (b.lo, b.f_lo);
        let (mut bb, mut fb) = (b.hi, b.f_hi);
        if fa == 0.0 {
            return Ok(Root { x: a, residual: 0.0, iterations: 0 });
        }
        if fb == 0.0 {
            return Ok(Root { x: bb, residual: 0.0, iterations: 0 });
        }
        let (mut c, mut fc) = (a, fa);
        let mut d = bb - a;
        let mut e = d;
        for it in 1..=opts.max_iter {
            if (fb > 0.0) == (fc > 0.0) {
                c = a;
                fc = fa;
                d = bb - a;
                e = d;
            }
            if fc.abs() < fb.abs() {
                a = bb;
                bb = c;
                c = a;
                fa = fb;
                fb = fc;
                fc = fa;
            }
            let tol = 2.0 * f64::EPSILON * bb.abs() + 0.5 * opts.x_tol * bb.abs().max(1.0);
            let m = 0.5 * (c - bb);
            if m.abs() <= tol || fb == 0.0 || fb.abs() <= opts.f_tol {
                return Ok(Root { x: bb, residual: fb, iterations: it });
            }
            if e.abs() >= tol && fa.abs() > fb.abs() {
                let s = fb / fa;
                let (mut p, mut q);
                if a == c {
                    p = 2.0 * m * s;
                    q = 1.0 - s;
                } else {
                    let qa = fa / fc;
                    let r = fb / fc;
                    p = s * (2.0 * m * qa * (qa - r) - (bb - a) * (r - 1.0));
                    q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
                }
                if p > 0.0 {
                    q = -q;
                } else {
                    p = -p;
                }
                if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                    e = d;
                    d = p / q;
                } else {
                    d = m;
                    e = m;
                }
            } else {
                d = m;
                e = m;
            }
            a = bb;
            fa = fb;
            bb += if d.abs() > tol { d } else { tol.copysign(m) };
            fb = f(bb);
        }
        Err(GrowthError::Numeric(format!("brent exceeded {} iterations near {bb:e}", opts.max_iter)))
    }
}

/// Root finders registered by name.
#[derive(Clone)]
pub struct RootFinderRegistry {
    entries: BTreeMap<&'static str, Arc<dyn RootFinder>>,
}

impl RootFinderRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, finder: Arc<dyn RootFinder>) {
        self.entries.insert(finder.name(), finder);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RootFinder>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            GrowthError::Configuration(format!("unknown root finder '{name}' (available: {})", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for RootFinderRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Bisection));
        r.register(Arc::new(Brent));
        r
    }
}
