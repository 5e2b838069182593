//! Equilibrium densities, closed-form half-moments, the interface potential
//! barrier and the reflection/transmission fluxes.
//!
//! The density ansatz is uniform on a compact support:
//! `M(xi) = A / (2 sqrt(3) b)` for `xi` in `[u - sqrt(3) b, u + sqrt(3) b]`,
//! so every moment integral reduces to polynomial antiderivatives, and the
//! barrier-shifted branches to `(mu^2 -+ 2 g dphi)^(3/2) / 3` terms.

use crate::geometry::{IfaceGeom, Section, SectionShape};
use crate::model::{CellState, FlowRegime, ModelParams};

/// Half-width of the support of the normalized density.
pub const SQRT3: f64 = 1.732_050_807_568_877_2_f64;

/// `sqrt(v^2 + c)` with cancellation noise snapped to zero: the argument is
/// exactly zero whenever `v` was clipped at `sqrt(-c)`, but floating point
/// leaves ~eps residue that the square root would amplify to ~1e-8.
pub(crate) fn sqrt_shifted(v: f64, c: f64) -> f64 {
    let e = v * v + c;
    if e <= 64.0 * f64::EPSILON * (v * v).max(c.abs()) {
        0.0
    } else {
        e.sqrt()
    }
}

/// Parameters of one equilibrium density.
#[derive(Debug, Clone, Copy)]
pub struct GibbsParams {
    pub a: f64,
    pub u: f64,
    pub b: f64,
}

impl GibbsParams {
    pub fn dry() -> Self {
        GibbsParams {
            a: 0.0,
            u: 0.0,
            b: 1.0,
        }
    }

    /// Equilibrium of a cell state; dry cells yield the empty density.
    pub fn from_state(sec: Section, cos_theta: f64, st: CellState, p: &ModelParams) -> Self {
        if st.is_dry(sec.area_full()) {
            return GibbsParams::dry();
        }
        GibbsParams {
            a: st.a,
            u: st.u(),
            b: crate::model::kinetic_speed(sec, cos_theta, st.a, st.e, p),
        }
    }

    pub fn is_dry(&self) -> bool {
        self.a <= 0.0
    }

    pub fn support(&self) -> (f64, f64) {
        (self.u - SQRT3 * self.b, self.u + SQRT3 * self.b)
    }

    fn density_level(&self) -> f64 {
        self.a / (2.0 * SQRT3 * self.b)
    }
}

/// Closed-form moment `int_[lo,hi] xi^k M(xi) dxi` (intersected with the
/// support; infinite bounds allowed).
pub fn partial_moment(gp: &GibbsParams, lo: f64, hi: f64, order: u32) -> f64 {
    if gp.is_dry() {
        return 0.0;
    }
    let (slo, shi) = gp.support();
    let p = lo.max(slo);
    let q = hi.min(shi);
    if p >= q {
        return 0.0;
    }
    let k = order as i32;
    gp.density_level() * (q.powi(k + 1) - p.powi(k + 1)) / (k + 1) as f64
}

/// The source vector whose interface jump builds the potential barrier.
#[derive(Debug, Clone, Copy)]
pub struct SourceVector {
    pub z_dyn: f64,
    pub s_full: f64,
    pub cos_theta: f64,
}

/// Midpoint-quadrature barrier `dphi = [Z] + B_S [S] + B_theta [cos]` where
/// the coefficients are evaluated at the straight-line midpoint of the jump.
/// The pressurized branch of `B_S` is used only when `e_mid` is pressurized.
pub fn potential_barrier(
    left: SourceVector,
    right: SourceVector,
    iface: &IfaceGeom,
    a_mid: f64,
    e_mid: FlowRegime,
    p: &ModelParams,
) -> f64 {
    let dz = right.z_dyn - left.z_dyn;
    let ds = right.s_full - left.s_full;
    let dcos = right.cos_theta - left.cos_theta;
    if ds == 0.0 && dcos == 0.0 {
        return dz;
    }
    let s_mid = 0.5 * (left.s_full + right.s_full);
    let cos_mid = 0.5 * (left.cos_theta + right.cos_theta);
    if a_mid < 1e-10 * s_mid {
        return dz;
    }
    let mid_sec = match iface.section.shape {
        SectionShape::Circular { .. } => {
            Section::circular((s_mid / std::f64::consts::PI).sqrt())
        }
        SectionShape::Rectangular { .. } => iface.section,
    };
    let sw = match e_mid {
        FlowRegime::Pressurized => s_mid,
        FlowRegime::FreeSurface => a_mid.min(s_mid),
    };
    let gamma = mid_sec.gamma(sw).unwrap_or(0.0);
    let level = mid_sec
        .level_from_area(sw)
        .expect("midpoint wet area within section");
    let z_bar = level - mid_sec.i1(sw) / sw;
    let b_s = match e_mid {
        FlowRegime::Pressurized => {
            -(p.c * p.c / p.g) * (a_mid - s_mid) / (a_mid * s_mid) - gamma * cos_mid / a_mid
        }
        FlowRegime::FreeSurface => -gamma * cos_mid / a_mid,
    };
    dz + b_s * ds + z_bar * dcos
}

/// Interface fluxes: mass and momentum of the two reconstructed interface
/// densities. The two mass components are equal analytically and are both
/// computed so the identity can be audited.
#[derive(Debug, Clone, Copy, Default)]
pub struct FluxPair {
    pub mass_minus: f64,
    pub mom_minus: f64,
    pub mass_plus: f64,
    pub mom_plus: f64,
}

impl FluxPair {
    /// Single mass value used for the conservative update (the two variants
    /// coincide analytically; the upstream-side expression is taken).
    pub fn mass(&self) -> f64 {
        self.mass_minus
    }
}

// int over support(right) /\ (-inf, -s_minus) of (-nu) sqrt(nu^2 + 2 g dphi) M_r dnu
fn shifted_momentum_from_right(right: &GibbsParams, two_g_dphi: f64, s_minus: f64) -> f64 {
    if right.is_dry() {
        return 0.0;
    }
    let (slo, shi) = right.support();
    let p = slo;
    let q = shi.min(-s_minus);
    if p >= q {
        return 0.0;
    }
    let e = |v: f64| (v * v + two_g_dphi).max(0.0).powf(1.5);
    right.density_level() * (e(p) - e(q)) / 3.0
}

// int over support(left) /\ (s_plus, inf) of mu sqrt(mu^2 - 2 g dphi) M_l dmu
fn shifted_momentum_from_left(left: &GibbsParams, two_g_dphi: f64, s_plus: f64) -> f64 {
    if left.is_dry() {
        return 0.0;
    }
    let (slo, shi) = left.support();
    let p = slo.max(s_plus);
    let q = shi;
    if p >= q {
        return 0.0;
    }
    let e = |v: f64| (v * v - two_g_dphi).max(0.0).powf(1.5);
    left.density_level() * (e(q) - e(p)) / 3.0
}

/// Both interface fluxes for the equilibrium pair `(left, right)` across a
/// barrier `dphi` (positive when the potential rises from left to right).
pub fn interface_fluxes(left: &GibbsParams, right: &GibbsParams, dphi: f64, g: f64) -> FluxPair {
    if left.is_dry() && right.is_dry() {
        return FluxPair::default();
    }
    let two_g_dphi = 2.0 * g * dphi;
    let s_plus = two_g_dphi.max(0.0).sqrt();
    let s_minus = (-two_g_dphi).max(0.0).sqrt();

    // Upstream side: positive transmission, reflection of the blocked part,
    // and transmission of downstream particles through the drop.
    let mass_minus = partial_moment(left, 0.0, f64::INFINITY, 1)
        - partial_moment(left, 0.0, s_plus, 1)
        + partial_moment(right, f64::NEG_INFINITY, -s_minus, 1);
    let mom_minus = partial_moment(left, 0.0, f64::INFINITY, 2)
        + partial_moment(left, 0.0, s_plus, 2)
        + shifted_momentum_from_right(right, two_g_dphi, s_minus);

    // Downstream side, assembled independently.
    let mass_plus = partial_moment(right, f64::NEG_INFINITY, 0.0, 1)
        - partial_moment(right, -s_minus, 0.0, 1)
        + partial_moment(left, s_plus, f64::INFINITY, 1);
    let mom_plus = partial_moment(right, f64::NEG_INFINITY, 0.0, 2)
        + partial_moment(right, -s_minus, 0.0, 2)
        + shifted_momentum_from_left(left, two_g_dphi, s_plus);

    FluxPair {
        mass_minus,
        mom_minus,
        mass_plus,
        mom_plus,
    }
}

/// Upstream-side interface flux (mass, momentum).
pub fn interface_flux_minus(left: &GibbsParams, right: &GibbsParams, dphi: f64, g: f64) -> (f64, f64) {
    let f = interface_fluxes(left, right, dphi, g);
    (f.mass_minus, f.mom_minus)
}

/// Downstream-side interface flux (mass, momentum).
pub fn interface_flux_plus(left: &GibbsParams, right: &GibbsParams, dphi: f64, g: f64) -> (f64, f64) {
    let f = interface_fluxes(left, right, dphi, g);
    (f.mass_plus, f.mom_plus)
}

/// Time step from the kinetic support speeds:
/// `dt = cfl * min h / max(|u| + sqrt(3) b)` over wet cells.
/// An all-dry mesh advances by `fallback_dt`.
pub fn cfl_timestep(
    cells: &[crate::geometry::CellGeom],
    states: &[CellState],
    p: &ModelParams,
    cfl: f64,
    fallback_dt: f64,
) -> f64 {
    let mut max_speed = 0.0_f64;
    for (c, st) in cells.iter().zip(states) {
        if st.is_dry(c.s_full) {
            continue;
        }
        let b = crate::model::kinetic_speed(c.section, c.cos_theta, st.a, st.e, p);
        max_speed = max_speed.max(st.u().abs() + SQRT3 * b);
    }
    if max_speed == 0.0 {
        return fallback_dt;
    }
    let min_h = cells[1..cells.len() - 1]
        .iter()
        .map(|c| c.h)
        .fold(f64::INFINITY, f64::min);
    cfl * min_h / max_speed
}
