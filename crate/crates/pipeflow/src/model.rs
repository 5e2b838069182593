//! Pointwise algebra of the mixed-flow model: pressure law, fluxes, wave and
//! kinetic speeds, friction, dynamic slope, total head and entropy.
//!
//! Conventions: A is the equivalent wet area (it encodes the density ratio
//! under pressurization), Q the discharge, and the physical wet area is
//! `S(x)` when pressurized and `A` at a free surface. Dry cells carry
//! `A = Q = 0` and are inert.

use crate::geometry::{CellGeom, Section};

/// Relative dryness threshold: a cell with `A < DRY_REL * S(x)` is dry.
pub const DRY_REL: f64 = 1e-12;

/// Per-cell flow regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowRegime {
    FreeSurface,
    Pressurized,
}

impl FlowRegime {
    pub fn indicator(self) -> u8 {
        match self {
            FlowRegime::FreeSurface => 0,
            FlowRegime::Pressurized => 1,
        }
    }

    pub fn is_pressurized(self) -> bool {
        matches!(self, FlowRegime::Pressurized)
    }
}

/// Conservative state of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub a: f64,
    pub q: f64,
    pub e: FlowRegime,
}

impl CellState {
    pub fn dry() -> Self {
        CellState {
            a: 0.0,
            q: 0.0,
            e: FlowRegime::FreeSurface,
        }
    }

    pub fn new(a: f64, q: f64, e: FlowRegime) -> Self {
        CellState { a, q, e }
    }

    /// Velocity; zero on dry cells.
    pub fn u(&self) -> f64 {
        if self.a > 0.0 {
            self.q / self.a
        } else {
            0.0
        }
    }

    pub fn is_dry(&self, s_full: f64) -> bool {
        self.a < DRY_REL * s_full
    }
}

/// Physical constants of a run.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Sonic speed of the pressurized flow (m/s).
    pub c: f64,
    /// Strickler friction coefficient (m^(1/3)/s).
    pub ks: f64,
    /// Gravity (m/s^2).
    pub g: f64,
}

impl ModelParams {
    pub fn new(c: f64, ks: f64) -> Self {
        ModelParams { c, ks, g: 9.81 }
    }
}

/// Physical wet area: the full section when pressurized, A otherwise.
pub fn physical_wet_area(a: f64, e: FlowRegime, s_full: f64) -> f64 {
    match e {
        FlowRegime::Pressurized => s_full,
        FlowRegime::FreeSurface => a,
    }
}

/// Mean pressure term of the momentum flux:
/// `c^2 (A - S_w) + g I1(S_w) cos(theta)` with `S_w` the physical wet area.
pub fn pressure(sec: Section, cos_theta: f64, a: f64, e: FlowRegime, p: &ModelParams) -> f64 {
    let s_full = sec.area_full();
    let sw = physical_wet_area(a, e, s_full);
    p.c * p.c * (a - sw) + p.g * sec.i1(sw.min(s_full)) * cos_theta
}

/// Momentum flux `Q^2/A + pressure`; a dry cell carries no flux.
pub fn flux_momentum(
    sec: Section,
    cos_theta: f64,
    a: f64,
    q: f64,
    e: FlowRegime,
    p: &ModelParams,
) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    q * q / a + pressure(sec, cos_theta, a, e, p)
}

/// Speed scale of the equilibrium density:
/// free surface `sqrt(g I1(A) cos/A)`, pressurized `sqrt(g I1(S) cos/A + c^2)`.
pub fn kinetic_speed(sec: Section, cos_theta: f64, a: f64, e: FlowRegime, p: &ModelParams) -> f64 {
    debug_assert!(a > 0.0, "kinetic speed undefined on dry cells");
    match e {
        FlowRegime::FreeSurface => {
            let s = a.min(sec.area_full());
            (p.g * sec.i1(s) * cos_theta / a).sqrt()
        }
        FlowRegime::Pressurized => {
            (p.g * sec.i1(sec.area_full()) * cos_theta / a + p.c * p.c).sqrt()
        }
    }
}

/// Convective wave celerity: sonic speed when pressurized, `sqrt(g A cos/T)`
/// with `T` the surface width at a free surface. An exactly full free-surface
/// section uses the sonic branch; close to the crown the vanishing width is
/// floored so the celerity never exceeds the kinetic support edge
/// `sqrt(3) b`.
pub fn celerity(sec: Section, cos_theta: f64, a: f64, e: FlowRegime, p: &ModelParams) -> f64 {
    match e {
        FlowRegime::Pressurized => p.c,
        FlowRegime::FreeSurface => {
            let s_full = sec.area_full();
            if a >= s_full {
                return p.c;
            }
            let level = sec
                .level_from_area(a.clamp(0.0, s_full))
                .expect("free-surface area within section");
            let t = sec.width_at(level);
            let t_floor = a * a / (3.0 * sec.i1(a));
            (p.g * a * cos_theta / t.max(t_floor)).sqrt()
        }
    }
}

/// Total head `u^2/2 + c^2 ln(A/S_w) + g H(S_w) cos + g Zdyn`.
pub fn total_head(
    sec: Section,
    cos_theta: f64,
    a: f64,
    q: f64,
    e: FlowRegime,
    z_dyn: f64,
    p: &ModelParams,
) -> f64 {
    debug_assert!(a > 0.0, "total head undefined on dry cells");
    let u = q / a;
    let s_full = sec.area_full();
    let (log_term, level) = match e {
        FlowRegime::FreeSurface => {
            let aw = a.clamp(0.0, s_full);
            (0.0, sec.level_from_area(aw).expect("area within section"))
        }
        FlowRegime::Pressurized => (p.c * p.c * (a / s_full).ln(), sec.crown()),
    };
    0.5 * u * u + log_term + p.g * level * cos_theta + p.g * z_dyn
}

/// Friction coefficient `1 / (Ks^2 Rh(S_w)^{4/3})`; zero on dry cells.
pub fn friction_coefficient(sec: Section, a: f64, e: FlowRegime, p: &ModelParams) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let sw = physical_wet_area(a, e, sec.area_full()).min(sec.area_full());
    let rh = sec.hydraulic_radius(sw);
    if rh <= 0.0 {
        return 0.0;
    }
    1.0 / (p.ks * p.ks * rh.powf(4.0 / 3.0))
}

/// Dynamic slope: static bed altitude plus the running integral of the
/// friction force, accumulated by the trapezoid rule from the upstream end
/// (fictitious cells included).
pub fn update_dynamic_slope(cells: &[CellGeom], states: &[CellState], p: &ModelParams) -> Vec<f64> {
    assert_eq!(cells.len(), states.len());
    let f: Vec<f64> = cells
        .iter()
        .zip(states)
        .map(|(c, st)| {
            if st.is_dry(c.s_full) {
                0.0
            } else {
                let u = st.u();
                friction_coefficient(c.section, st.a, st.e, p) * u * u.abs()
            }
        })
        .collect();
    let mut z = Vec::with_capacity(cells.len());
    z.push(cells[0].z);
    for i in 1..cells.len() {
        let dx = cells[i].x - cells[i - 1].x;
        let prev = z[i - 1];
        z.push(prev + (cells[i].z - cells[i - 1].z) + 0.5 * (f[i] + f[i - 1]) * dx);
    }
    z
}

/// Mathematical entropy (diagnostic only).
pub fn entropy(
    sec: Section,
    cos_theta: f64,
    st: CellState,
    z_dyn: f64,
    p: &ModelParams,
) -> f64 {
    if st.a <= 0.0 {
        return 0.0;
    }
    let s_full = sec.area_full();
    let sw = physical_wet_area(st.a, st.e, s_full).min(s_full);
    let level = sec.level_from_area(sw).expect("area within section");
    let z_bar = level - sec.i1(sw) / sw;
    let log_term = match st.e {
        FlowRegime::FreeSurface => 0.0,
        FlowRegime::Pressurized => p.c * p.c * st.a * (st.a / s_full).ln(),
    };
    st.q * st.q / (2.0 * st.a)
        + log_term
        + p.c * p.c * s_full
        + p.g * st.a * z_bar * cos_theta
        + p.g * st.a * z_dyn
}
