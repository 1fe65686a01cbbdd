//! Gauss–Kronrod quadrature: a fixed composite rule and an adaptive driver.

#![allow(clippy::excessive_precision)]

use crate::error::{GrowthError, Result};

// 21-point Kronrod extension of the 10-point Gauss rule on [-1, 1]
// (non-negative half; the rule is symmetric).
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Nodes and weights of the 21-point Kronrod rule mapped to `[a, b]`.
pub fn kronrod_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (0..21).map(move |k| {
        let (i, s) = if k < 10 {
            (k, -1.0)
        } else if k == 10 {
            (10, 0.0)
        } else {
            (20 - k, 1.0)
        };
        (c + s * h * XGK[i], h * WGK[i])
    })
}

/// One Gauss–Kronrod panel: (Kronrod estimate, |Kronrod − Gauss|).
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Fixed composite Gauss–Kronrod rule with `panels` equal panels.
///
/// Unlike the adaptive driver, the node set does not depend on `f`, so the
/// result is a smooth function of any parameters `f` depends on.
pub fn composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1);
    let w = (b - a) / n as f64;
    (0..n)
        .map(|k| {
            let lo = a + w * k as f64;
            gk21(&mut f, lo, lo + w).0
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReport {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

/// Globally adaptive Gauss–Kronrod integration (bisect the worst panel).
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<QuadratureReport> {
    if a == b {
        return Ok(QuadratureReport { value: 0.0, error: 0.0, evaluations: 0, intervals: 0 });
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk21(&mut f, a, b);
    panels.push((a, b, v, e));
    let mut evaluations = 21;
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(GrowthError::Numeric(format!("quadrature on [{a}, {b}] produced a non-finite value")));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(QuadratureReport { value: total, error: err, evaluations, intervals: panels.len() });
        }
        if panels.len() >= opts.max_intervals {
            return Err(GrowthError::Numeric(format!(
                "adaptive quadrature on [{a}, {b}] did not converge: estimate {total:e}, \
                 error {err:e} after {} panels ({evaluations} evaluations)",
                panels.len()
            )));
        }
        let worst = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).map(|(i, _)| i).unwrap();
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk21(&mut f, lo, mid);
        let (v2, e2) = gk21(&mut f, mid, hi);
        evaluations += 42;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_high_degree_polynomials() {
        let (v, _) = gk21(&mut |x: f64| x.powi(20) - 3.0 * x.powi(7), -1.0, 2.0);
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert!((v - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let r = adaptive(|x: f64| x.sqrt(), 0.0, 1.0, AdaptiveOptions::default()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn composite_nodes_reproduce_rule() {
        let direct = composite(|x: f64| x.cos(), 0.0, 3.0, 4);
        let via_nodes: f64 =
            (0..4).flat_map(|k| kronrod_nodes(0.75 * k as f64, 0.75 * (k + 1) as f64)).map(|(x, w)| w * x.cos()).sum();
        assert!((direct - via_nodes).abs() < 1e-15);
        assert!((direct - 3f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let opts = AdaptiveOptions { abs_tol: 1e-14, rel_tol: 0.0, max_intervals: 3 };
        let err = adaptive(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, opts).unwrap_err();
        assert!(matches!(err, GrowthError::Numeric(_)));
    }
}
