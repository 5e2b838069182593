//! One full time step: dynamic slope, interface classification
//! (equilibrium latch / front solve / plain kinetic flux), conservative
//! update, regime-indicator update and boundary solves.
//!
//! The equilibrium latch is what makes every discrete steady state an exact
//! fixed point: when the two cells of an interface carry the same discharge
//! and the head of each state continued into the neighbor geometry matches
//! the neighbor's head, the interface sees no jump at all, and both sides
//! receive their own consistent kinetic flux. Fluxes then telescope per cell
//! and the state freezes to machine precision.

use crate::boundary::{
    boundary_regime_update, solve_boundary, BcEnd, BcKind, BoundaryCondition, BoundaryContext,
};
use crate::error::{Error, Result};
use crate::geometry::PipeGeometry;
use crate::kinetic::{
    cfl_timestep, interface_fluxes, potential_barrier, GibbsParams, SourceVector,
};
use crate::model::{
    kinetic_speed, total_head, update_dynamic_slope, CellState, FlowRegime, ModelParams, DRY_REL,
};
use crate::transition::{
    ghost_source_psi, predicted_speed, solve_transition, transition_fluxes, TransitionContext,
    TransitionMethod,
};

/// Discharge agreement required to consider an interface in equilibrium.
const EQ_Q_TOL: f64 = 1e-12;
/// Head agreement (relative to max(1, |head|)) for the equilibrium latch.
const EQ_HEAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct StepperConfig {
    pub cfl: f64,
    pub method: TransitionMethod,
    /// Time step used when the whole mesh is dry.
    pub fallback_dt: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            cfl: 0.8,
            method: TransitionMethod::Fka,
            fallback_dt: 0.1,
        }
    }
}

/// Mesh state: interior cells 1..=n plus the two fictitious end cells.
#[derive(Debug, Clone)]
pub struct MeshState {
    pub states: Vec<CellState>,
    pub t: f64,
    pub step: u64,
}

impl MeshState {
    pub fn new(states: Vec<CellState>) -> Self {
        MeshState {
            states,
            t: 0.0,
            step: 0,
        }
    }
}

/// One solved front, for the transition log.
#[derive(Debug, Clone, Copy)]
pub struct TransitionEvent {
    pub t: f64,
    pub iface: usize,
    pub method: TransitionMethod,
    pub w: f64,
    pub residual: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    /// Interior mass (sum of A h).
    pub mass: f64,
    pub min_a: f64,
    pub transitions: u32,
    pub fallbacks: u32,
    pub boundary_fallbacks: u32,
    pub events: Vec<TransitionEvent>,
    /// Mass fluxes through the two ends during the step.
    pub mass_flux_in: f64,
    pub mass_flux_out: f64,
}

struct IfaceFlux {
    mass: f64,
    /// Momentum flux seen by the left cell (upstream-side variant).
    mom_left: f64,
    /// Momentum flux seen by the right cell (downstream-side variant).
    mom_right: f64,
}

pub struct Stepper<'a> {
    pub geom: &'a PipeGeometry,
    pub params: ModelParams,
    pub bc_up: BoundaryCondition,
    pub bc_down: BoundaryCondition,
    pub config: StepperConfig,
}

impl<'a> Stepper<'a> {
    pub fn new(
        geom: &'a PipeGeometry,
        params: ModelParams,
        bc_up: BoundaryCondition,
        bc_down: BoundaryCondition,
        config: StepperConfig,
    ) -> Self {
        Stepper {
            geom,
            params,
            bc_up,
            bc_down,
            config,
        }
    }

    pub fn interior_mass(&self, mesh: &MeshState) -> f64 {
        let n = self.geom.n_interior();
        (1..=n)
            .map(|i| mesh.states[i].a * self.geom.cells[i].h)
            .sum()
    }

    /// Head of `(a, q, e)` evaluated in the geometry of `cell`, if the state
    /// fits that section.
    fn head_in_cell(&self, cell: usize, a: f64, q: f64, e: FlowRegime, z_dyn: f64) -> Option<f64> {
        let c = &self.geom.cells[cell];
        if a <= 0.0 {
            return None;
        }
        let a_eval = match e {
            FlowRegime::FreeSurface => {
                if a > c.s_full * (1.0 + 1e-12) {
                    return None;
                }
                a.min(c.s_full)
            }
            FlowRegime::Pressurized => a,
        };
        Some(total_head(
            c.section,
            c.cos_theta,
            a_eval,
            q,
            e,
            z_dyn,
            &self.params,
        ))
    }

    /// Equilibrium latch: both transplant conditions (left state continued
    /// into the right geometry and vice versa) at matched discharge, or for a
    /// regime-change interface a still front with equal own-geometry heads.
    fn equilibrium_latched(&self, k: usize, states: &[CellState], z_dyn: &[f64]) -> bool {
        let (l, r) = (states[k], states[k + 1]);
        let (cl, cr) = (&self.geom.cells[k], &self.geom.cells[k + 1]);
        if l.is_dry(cl.s_full) || r.is_dry(cr.s_full) {
            return false;
        }
        let q_scale = 1.0 + l.q.abs().max(r.q.abs());
        if (l.q - r.q).abs() > EQ_Q_TOL * q_scale {
            return false;
        }
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() <= EQ_HEAD_TOL * x.abs().max(y.abs()).max(1.0),
            _ => false,
        };
        if l.e == r.e {
            // Same regime: both head continuations must match.
            let into_right = close(
                self.head_in_cell(k + 1, l.a, r.q, r.e, z_dyn[k]),
                self.head_in_cell(k + 1, r.a, r.q, r.e, z_dyn[k + 1]),
            );
            let into_left = close(
                self.head_in_cell(k, r.a, l.q, l.e, z_dyn[k + 1]),
                self.head_in_cell(k, l.a, l.q, l.e, z_dyn[k]),
            );
            into_right && into_left
        } else {
            // Still front: zero discharge on both sides, continuous head
            // across the regime change (each side in its own geometry).
            let still = l.q.abs() <= EQ_Q_TOL * q_scale && r.q.abs() <= EQ_Q_TOL * q_scale;
            still
                && close(
                    self.head_in_cell(k, l.a, l.q, l.e, z_dyn[k]),
                    self.head_in_cell(k + 1, r.a, r.q, r.e, z_dyn[k + 1]),
                )
        }
    }

    /// Consistent kinetic momentum flux of a cell's own state.
    fn consistent_momentum(&self, cell: usize, st: CellState) -> f64 {
        let c = &self.geom.cells[cell];
        let b = kinetic_speed(c.section, c.cos_theta, st.a, st.e, &self.params);
        let u = st.u();
        st.a * (u * u + b * b)
    }

    fn source_vector(&self, cell: usize, z_dyn: &[f64]) -> SourceVector {
        let c = &self.geom.cells[cell];
        SourceVector {
            z_dyn: z_dyn[cell],
            s_full: c.s_full,
            cos_theta: c.cos_theta,
        }
    }

    fn flux_at_interface(
        &self,
        k: usize,
        states: &[CellState],
        z_dyn: &[f64],
        t: f64,
        diag: &mut StepDiagnostics,
    ) -> IfaceFlux {
        let p = &self.params;
        let (l, r) = (states[k], states[k + 1]);
        let (cl, cr) = (&self.geom.cells[k], &self.geom.cells[k + 1]);
        let iface = &self.geom.ifaces[k];
        let dry_l = l.is_dry(cl.s_full);
        let dry_r = r.is_dry(cr.s_full);

        if dry_l && dry_r {
            return IfaceFlux {
                mass: 0.0,
                mom_left: 0.0,
                mom_right: 0.0,
            };
        }

        // Exact steady-state freeze.
        if self.equilibrium_latched(k, states, z_dyn) {
            return IfaceFlux {
                mass: 0.5 * (l.q + r.q),
                mom_left: self.consistent_momentum(k, l),
                mom_right: self.consistent_momentum(k + 1, r),
            };
        }

        let wl = self.source_vector(k, z_dyn);
        let wr = self.source_vector(k + 1, z_dyn);
        let a_mid = 0.5 * (l.a + r.a);
        let e_mid = if l.e.is_pressurized() && r.e.is_pressurized() {
            FlowRegime::Pressurized
        } else {
            FlowRegime::FreeSurface
        };

        // A moving regime front owns the interface unless the data is
        // degenerate or the solver fails, in which case the plain kinetic
        // flux runs with the barrier.
        if l.e != r.e && !dry_l && !dry_r {
            if predicted_speed(l, r, iface.s_full).is_some() {
                let ctx = TransitionContext {
                    left_cell: cl,
                    right_cell: cr,
                    iface,
                    left: l,
                    right: r,
                    dphi_left_zone: potential_barrier(wl, wr, iface, a_mid, l.e, p),
                    dphi_right_zone: potential_barrier(wl, wr, iface, a_mid, r.e, p),
                    psi_ghost: ghost_source_psi(wl, wr, iface, a_mid, e_mid, p),
                    params: p,
                };
                diag.transitions += 1;
                match solve_transition(self.config.method, &ctx) {
                    Ok(sol) => {
                        diag.events.push(TransitionEvent {
                            t,
                            iface: k,
                            method: sol.method,
                            w: sol.w,
                            residual: sol.residual,
                            fallback: false,
                        });
                        let f = transition_fluxes(&ctx, &sol);
                        return IfaceFlux {
                            mass: f.mass_minus,
                            mom_left: f.mom_minus,
                            mom_right: f.mom_plus,
                        };
                    }
                    Err(_) => {
                        diag.fallbacks += 1;
                        diag.events.push(TransitionEvent {
                            t,
                            iface: k,
                            method: self.config.method,
                            w: f64::NAN,
                            residual: f64::NAN,
                            fallback: true,
                        });
                    }
                }
            }
        }

        let dphi = potential_barrier(wl, wr, iface, a_mid, e_mid, p);
        let gl = GibbsParams::from_state(cl.section, cl.cos_theta, l, p);
        let gr = GibbsParams::from_state(cr.section, cr.cos_theta, r, p);
        let f = interface_fluxes(&gl, &gr, dphi, p.g);
        IfaceFlux {
            mass: f.mass_minus,
            mom_left: f.mom_minus,
            mom_right: f.mom_plus,
        }
    }

    /// Advance one step; `dt_cap` crops the CFL step (end of run, output).
    pub fn advance(&self, mesh: &mut MeshState, dt_cap: f64) -> Result<StepDiagnostics> {
        let p = &self.params;
        let n = self.geom.n_interior();
        let cells = &self.geom.cells;
        let states = &mesh.states;

        let z_dyn = update_dynamic_slope(cells, states, p);
        let dt = cfl_timestep(cells, states, p, self.config.cfl, self.config.fallback_dt)
            .min(dt_cap)
            .max(0.0);
        if !(dt > 0.0) {
            return Err(Error::Abort {
                t: mesh.t,
                detail: "nonpositive time step".into(),
            });
        }

        let mut diag = StepDiagnostics {
            t: mesh.t + dt,
            dt,
            mass: 0.0,
            min_a: f64::INFINITY,
            transitions: 0,
            fallbacks: 0,
            boundary_fallbacks: 0,
            events: Vec::new(),
            mass_flux_in: 0.0,
            mass_flux_out: 0.0,
        };

        // Interface fluxes (one mass value per interface, two momentum
        // variants feeding the adjacent cells).
        let mut fluxes = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut f = self.flux_at_interface(k, states, &z_dyn, mesh.t, &mut diag);
            // A prescribed discharge is imposed exactly on the end mass flux.
            if k == 0 && self.bc_up.kind == BcKind::Discharge {
                f.mass = self.bc_up.table.eval(mesh.t);
            }
            if k == n && self.bc_down.kind == BcKind::Discharge {
                f.mass = self.bc_down.table.eval(mesh.t);
            }
            fluxes.push(f);
        }
        diag.mass_flux_in = fluxes[0].mass;
        diag.mass_flux_out = fluxes[n].mass;

        // Conservative update of the interior cells.
        let mut new_states = states.clone();
        for i in 1..=n {
            let c = &cells[i];
            let lam = dt / c.h;
            let a_new = states[i].a + lam * (fluxes[i - 1].mass - fluxes[i].mass);
            let q_new = states[i].q + lam * (fluxes[i - 1].mom_right - fluxes[i].mom_left);
            if !a_new.is_finite() || !q_new.is_finite() {
                return Err(Error::Abort {
                    t: mesh.t,
                    detail: format!("non-finite state in cell {i} (x = {})", c.x),
                });
            }
            if a_new < -1e-9 * c.s_full {
                return Err(Error::Abort {
                    t: mesh.t,
                    detail: format!("negative wet area {a_new} in cell {i} (x = {})", c.x),
                });
            }
            new_states[i] = CellState::new(a_new.max(0.0), q_new, states[i].e);
        }

        // Regime indicator from the new areas and the previous-step
        // neighbors, then the dry clamp.
        for i in 1..=n {
            let c = &cells[i];
            let a_new = new_states[i].a;
            let e_new = match states[i].e {
                FlowRegime::FreeSurface => {
                    if a_new < c.s_full {
                        FlowRegime::FreeSurface
                    } else {
                        FlowRegime::Pressurized
                    }
                }
                FlowRegime::Pressurized => {
                    if a_new >= c.s_full {
                        FlowRegime::Pressurized
                    } else if states[i - 1].e.is_pressurized() && states[i + 1].e.is_pressurized()
                    {
                        FlowRegime::Pressurized
                    } else {
                        FlowRegime::FreeSurface
                    }
                }
            };
            new_states[i].e = e_new;
            if new_states[i].a < DRY_REL * c.s_full {
                new_states[i] = CellState::dry();
            }
            if new_states[i].e.is_pressurized() && new_states[i].a < 0.1 * c.s_full {
                return Err(Error::Abort {
                    t: mesh.t,
                    detail: format!(
                        "pressurized cell {i} collapsed to A/S = {}",
                        new_states[i].a / c.s_full
                    ),
                });
            }
        }

        let t_new = mesh.t + dt;

        // Boundary solves use the new interior states; the regime of each
        // fictitious cell is fixed beforehand by the duplicated-neighbor rule.
        let e_up = boundary_regime_update(
            states[0].e,
            states[0].a,
            cells[0].s_full,
            states[1].e,
        );
        let wu0 = self.source_vector(0, &z_dyn);
        let wu1 = self.source_vector(1, &z_dyn);
        let dphi_up = potential_barrier(
            wu0,
            wu1,
            &self.geom.ifaces[0],
            0.5 * (states[0].a + new_states[1].a),
            if e_up.is_pressurized() && new_states[1].e.is_pressurized() {
                FlowRegime::Pressurized
            } else {
                FlowRegime::FreeSurface
            },
            p,
        );
        let up = solve_boundary(&BoundaryContext {
            end: BcEnd::Upstream,
            bc: &self.bc_up,
            cell_b: &cells[0],
            cell_i: &cells[1],
            iface: &self.geom.ifaces[0],
            interior: new_states[1],
            prev: states[0],
            e_boundary: e_up,
            dphi: dphi_up,
            z_dyn_boundary: z_dyn[0],
            z_dyn_interior: z_dyn[1],
            t: t_new,
            params: p,
        });
        if up.fallback {
            diag.boundary_fallbacks += 1;
        }
        new_states[0] = up.state;

        let e_down = boundary_regime_update(
            states[n + 1].e,
            states[n + 1].a,
            cells[n + 1].s_full,
            states[n].e,
        );
        let wdn = self.source_vector(n, &z_dyn);
        let wdb = self.source_vector(n + 1, &z_dyn);
        let dphi_down = -potential_barrier(
            wdn,
            wdb,
            &self.geom.ifaces[n],
            0.5 * (states[n + 1].a + new_states[n].a),
            if e_down.is_pressurized() && new_states[n].e.is_pressurized() {
                FlowRegime::Pressurized
            } else {
                FlowRegime::FreeSurface
            },
            p,
        );
        let down = solve_boundary(&BoundaryContext {
            end: BcEnd::Downstream,
            bc: &self.bc_down,
            cell_b: &cells[n + 1],
            cell_i: &cells[n],
            iface: &self.geom.ifaces[n],
            interior: new_states[n],
            prev: states[n + 1],
            e_boundary: e_down,
            dphi: dphi_down,
            z_dyn_boundary: z_dyn[n + 1],
            z_dyn_interior: z_dyn[n],
            t: t_new,
            params: p,
        });
        if down.fallback {
            diag.boundary_fallbacks += 1;
        }
        new_states[n + 1] = down.state;

        mesh.states = new_states;
        mesh.t = t_new;
        mesh.step += 1;
        diag.mass = self.interior_mass(mesh);
        diag.min_a = mesh.states[1..=n]
            .iter()
            .map(|s| s.a)
            .fold(f64::INFINITY, f64::min);
        Ok(diag)
    }
}

/// Build a discrete still-water profile adapted to the equilibrium latch:
/// starting from the area of the first interior cell, each next cell solves
/// the head-continuation relation across the interface (same-regime
/// interfaces continue the left state into the right geometry; regime-change
/// interfaces match the own-geometry heads). Fictitious cells are continued
/// the same way.
pub fn discrete_still_profile(
    geom: &PipeGeometry,
    p: &ModelParams,
    a_first: f64,
    regimes: &[FlowRegime],
) -> Result<Vec<CellState>> {
    let n_all = geom.cells.len();
    assert_eq!(regimes.len(), n_all);
    let mut areas = vec![0.0_f64; n_all];
    areas[1] = a_first;

    let head_own = |cell: usize, a: f64, e: FlowRegime| -> f64 {
        let c = &geom.cells[cell];
        total_head(c.section, c.cos_theta, a, 0.0, e, c.z, p)
    };
    // Solve head(target_cell, A) = target for A by bisection.
    let solve_area = |cell: usize, e: FlowRegime, target: f64| -> Result<f64> {
        let c = &geom.cells[cell];
        let (mut lo, mut hi) = match e {
            FlowRegime::FreeSurface => (1e-10 * c.s_full, c.s_full),
            FlowRegime::Pressurized => (0.2 * c.s_full, 5.0 * c.s_full),
        };
        let f = |a: f64| head_own(cell, a, e) - target;
        if f(lo) * f(hi) > 0.0 {
            return Err(Error::Domain(format!(
                "no still-water continuation into cell {cell}"
            )));
        }
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) * flo <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    // March to the right from cell 1, then continue to the left end.
    for i in 1..n_all - 1 {
        let (el, er) = (regimes[i], regimes[i + 1]);
        let target = if el == er {
            // Transplant of the left state into the right geometry.
            let cr = &geom.cells[i + 1];
            let a_eval = match er {
                FlowRegime::FreeSurface => areas[i].min(cr.s_full),
                FlowRegime::Pressurized => areas[i],
            };
            total_head(cr.section, cr.cos_theta, a_eval, 0.0, er, geom.cells[i].z, p)
        } else {
            head_own(i, areas[i], el)
        };
        areas[i + 1] = solve_area(i + 1, er, target)?;
    }
    {
        // Upstream fictitious cell continues cell 1 leftward.
        let (el, er) = (regimes[0], regimes[1]);
        let target = if el == er {
            let cb = &geom.cells[0];
            let a_eval = match el {
                FlowRegime::FreeSurface => areas[1].min(cb.s_full),
                FlowRegime::Pressurized => areas[1],
            };
            total_head(cb.section, cb.cos_theta, a_eval, 0.0, el, geom.cells[1].z, p)
        } else {
            head_own(1, areas[1], er)
        };
        areas[0] = solve_area(0, el, target)?;
    }

    Ok(areas
        .iter()
        .zip(regimes)
        .map(|(&a, &e)| CellState::new(a, 0.0, e))
        .collect())
}
