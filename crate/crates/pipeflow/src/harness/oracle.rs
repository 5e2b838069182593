//! Adaptive quadrature used to audit every closed-form moment integral.
//!
//! The integrator is deliberately independent of the closed forms it checks:
//! plain adaptive Simpson refinement over explicitly supplied breakpoints.

use crate::kinetic::{GibbsParams, SQRT3};

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + adaptive(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson integral of `f` over `[a, b]` with absolute tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    adaptive(&f, a, fa, b, fb, fm, whole, tol, 48)
}

/// Integral split at the given breakpoints (for piecewise densities).
pub fn integrate_with_breaks(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> f64 {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    pts.dedup();
    pts.windows(2).map(|w| integrate(&f, w[0], w[1], tol)).sum()
}

/// Pointwise value of the equilibrium density for `gp`.
pub fn density(gp: &GibbsParams, xi: f64) -> f64 {
    if gp.a <= 0.0 {
        return 0.0;
    }
    let lo = gp.u - SQRT3 * gp.b;
    let hi = gp.u + SQRT3 * gp.b;
    if xi >= lo && xi <= hi {
        gp.a / (2.0 * SQRT3 * gp.b)
    } else {
        0.0
    }
}

/// Moment of order `k` of the equilibrium density over `[lo, hi]`, by
/// quadrature. Infinite bounds are clipped to the compact support.
pub fn moment(gp: &GibbsParams, lo: f64, hi: f64, k: u32, tol: f64) -> f64 {
    if gp.a <= 0.0 {
        return 0.0;
    }
    let slo = gp.u - SQRT3 * gp.b;
    let shi = gp.u + SQRT3 * gp.b;
    let a = lo.max(slo);
    let b = hi.min(shi);
    integrate(|xi| xi.powi(k as i32) * density(gp, xi), a, b, tol)
}

/// Reconstructed interface density on the upstream side of an interface with
/// potential barrier `dphi` (upstream equilibrium `left`, downstream `right`).
pub fn density_minus(left: &GibbsParams, right: &GibbsParams, dphi: f64, g: f64, xi: f64) -> f64 {
    if xi > 0.0 {
        density(left, xi)
    } else {
        let e = xi * xi - 2.0 * g * dphi;
        if e < 0.0 {
            density(left, -xi)
        } else {
            density(right, -e.sqrt())
        }
    }
}

/// Reconstructed interface density on the downstream side.
pub fn density_plus(left: &GibbsParams, right: &GibbsParams, dphi: f64, g: f64, xi: f64) -> f64 {
    if xi < 0.0 {
        density(right, xi)
    } else {
        let e = xi * xi + 2.0 * g * dphi;
        if e < 0.0 {
            density(right, -xi)
        } else {
            density(left, e.sqrt())
        }
    }
}

fn reach(gp: &GibbsParams) -> f64 {
    if gp.a <= 0.0 {
        0.0
    } else {
        gp.u.abs() + SQRT3 * gp.b
    }
}

/// Breakpoints where an interface density may be discontinuous.
fn flux_breaks(left: &GibbsParams, right: &GibbsParams, dphi: f64, g: f64) -> (f64, Vec<f64>) {
    let barrier = (2.0 * g * dphi.abs()).sqrt();
    let span = reach(left).max(reach(right)) + barrier + 1.0;
    let mut breaks = vec![0.0, -barrier, barrier];
    // Support edges of both densities and the preimages of the shifted
    // branch arguments, in both sign conventions.
    for gp in [left, right] {
        for edge in [gp.u - SQRT3 * gp.b, gp.u + SQRT3 * gp.b] {
            breaks.push(edge);
            breaks.push(-edge);
            for e in [
                edge * edge + 2.0 * g * dphi,
                edge * edge - 2.0 * g * dphi,
            ] {
                if e >= 0.0 {
                    breaks.push(e.sqrt());
                    breaks.push(-e.sqrt());
                }
            }
        }
    }
    (span, breaks)
}

/// Quadrature value of the upstream-side interface flux (mass, momentum).
pub fn flux_minus_oracle(
    left: &GibbsParams,
    right: &GibbsParams,
    dphi: f64,
    g: f64,
    tol: f64,
) -> (f64, f64) {
    let (span, breaks) = flux_breaks(left, right, dphi, g);
    let mass = integrate_with_breaks(
        |xi| xi * density_minus(left, right, dphi, g, xi),
        -span,
        span,
        &breaks,
        tol,
    );
    let momentum = integrate_with_breaks(
        |xi| xi * xi * density_minus(left, right, dphi, g, xi),
        -span,
        span,
        &breaks,
        tol,
    );
    (mass, momentum)
}

/// Quadrature value of the downstream-side interface flux (mass, momentum).
pub fn flux_plus_oracle(
    left: &GibbsParams,
    right: &GibbsParams,
    dphi: f64,
    g: f64,
    tol: f64,
) -> (f64, f64) {
    let (span, breaks) = flux_breaks(left, right, dphi, g);
    let mass = integrate_with_breaks(
        |xi| xi * density_plus(left, right, dphi, g, xi),
        -span,
        span,
        &breaks,
        tol,
    );
    let momentum = integrate_with_breaks(
        |xi| xi * xi * density_plus(left, right, dphi, g, xi),
        -span,
        span,
        &breaks,
        tol,
    );
    (mass, momentum)
}
