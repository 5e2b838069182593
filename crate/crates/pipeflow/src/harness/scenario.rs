//! Built-in scenarios, initial-state construction and the run loop.

use crate::boundary::{BcKind, BoundaryCondition, TimeSeries};
use crate::error::{Error, Result};
use crate::geometry::{CellGeom, PipeGeometry, SectionShape, SegmentSpec};
use crate::model::{
    entropy, total_head, update_dynamic_slope, CellState, FlowRegime, ModelParams,
};
use crate::stepper::{MeshState, StepperConfig, Stepper, TransitionEvent};
use crate::transition::TransitionMethod;

pub use super::config::{InitialCondition, Scenario};

/// Level over the pipe axis reported for a cell: free-surface water level or
/// the pressure head of a pressurized column; a dry cell reports the invert.
pub fn pressure_level(cell: &CellGeom, st: CellState, p: &ModelParams) -> f64 {
    let s = cell.s_full;
    if st.is_dry(s) {
        return -cell.section.crown();
    }
    match st.e {
        FlowRegime::FreeSurface => cell
            .section
            .level_from_area(st.a.min(s))
            .expect("free-surface area within section"),
        FlowRegime::Pressurized => {
            cell.section.crown() + p.c * p.c * (st.a - s) / (p.g * s)
        }
    }
}

/// Piezometric head: axis altitude plus the pressure level.
pub fn piezometric_head(cell: &CellGeom, st: CellState, p: &ModelParams) -> f64 {
    cell.z + pressure_level(cell, st, p)
}

#[derive(Debug, Clone, Copy)]
pub struct SnapshotRow {
    pub x: f64,
    pub a: f64,
    pub q: f64,
    pub e: u8,
    pub u: f64,
    pub h: f64,
    pub piezo: f64,
    pub head: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub rows: Vec<SnapshotRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct DiagRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub min_a: f64,
    pub transitions: u32,
    pub fallbacks: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeSample {
    pub t: f64,
    pub a: f64,
    pub q: f64,
    pub u: f64,
    pub piezo: f64,
    pub head: f64,
}

#[derive(Debug, Clone)]
pub struct ProbeSeries {
    pub x: f64,
    pub cell: usize,
    pub samples: Vec<ProbeSample>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub diags: Vec<DiagRow>,
    pub events: Vec<TransitionEvent>,
    pub probes: Vec<ProbeSeries>,
    pub initial_mass: f64,
    pub final_mass: f64,
}

/// Build the initial cell states of a scenario (fictitious cells included).
pub fn initial_states(sc: &Scenario) -> Result<Vec<CellState>> {
    let p = &sc.params;
    let g = p.g;
    let states = match &sc.initial {
        InitialCondition::Dry => vec![CellState::dry(); sc.geom.cells.len()],
        InitialCondition::Uniform { a, q, pressurized } => {
            let e = if *pressurized {
                FlowRegime::Pressurized
            } else {
                FlowRegime::FreeSurface
            };
            vec![CellState::new(*a, *q, e); sc.geom.cells.len()]
        }
        InitialCondition::StillLevel { level } => sc
            .geom
            .cells
            .iter()
            .map(|c| still_state(c, *level, p))
            .collect(),
        InitialCondition::Pool { depth, from, to } => {
            if *depth <= 0.0 {
                return Err(Error::Config("initial pool depth must be positive".into()));
            }
            sc.geom
                .cells
                .iter()
                .map(|c| {
                    if c.x >= *from && c.x <= *to {
                        let crown = c.section.crown();
                        let level = (depth - crown).min(crown);
                        if level >= crown {
                            CellState::new(c.s_full, 0.0, FlowRegime::Pressurized)
                        } else {
                            CellState::new(
                                c.section.area_from_level(level),
                                0.0,
                                FlowRegime::FreeSurface,
                            )
                        }
                    } else {
                        CellState::dry()
                    }
                })
                .collect()
        }
        InitialCondition::SteadyDischarge {
            discharge,
            upstream_head,
        } => {
            // Pressurized start: piezometric line dropping at the friction
            // slope from the upstream head (velocity head removed).
            let q = *discharge;
            let cells = &sc.geom.cells;
            let mut piezo = Vec::with_capacity(cells.len());
            let u0 = q / cells[0].s_full;
            let mut line = upstream_head - u0 * u0 / (2.0 * g);
            let sf = |c: &CellGeom| {
                let u = q / c.s_full;
                let rh = c.section.hydraulic_radius(c.s_full);
                u * u.abs() / (p.ks * p.ks * rh.powf(4.0 / 3.0))
            };
            piezo.push(line);
            for i in 1..cells.len() {
                let dx = cells[i].x - cells[i - 1].x;
                line -= 0.5 * (sf(&cells[i]) + sf(&cells[i - 1])) * dx;
                piezo.push(line);
            }
            cells
                .iter()
                .zip(&piezo)
                .map(|(c, &h)| {
                    let crown_line = c.z + c.section.crown() * c.cos_theta;
                    if h <= crown_line {
                        return Err(Error::Config(format!(
                            "steady_discharge start is not pressurized at x = {}",
                            c.x
                        )));
                    }
                    let a = c.s_full * ((g * (h - crown_line)) / (p.c * p.c)).exp();
                    Ok(CellState::new(a, q, FlowRegime::Pressurized))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(states)
}

/// Still-water state of one cell for an absolute piezometric level.
fn still_state(c: &CellGeom, level: f64, p: &ModelParams) -> CellState {
    let crown = c.section.crown();
    let crown_line = c.z + crown * c.cos_theta;
    let invert_line = c.z - crown * c.cos_theta;
    if level >= crown_line {
        let a = c.s_full * ((p.g * (level - crown_line)) / (p.c * p.c)).exp();
        CellState::new(a, 0.0, FlowRegime::Pressurized)
    } else if level <= invert_line {
        CellState::dry()
    } else {
        let h = (level - c.z) / c.cos_theta;
        CellState::new(
            c.section.area_from_level(h.clamp(-crown, crown)),
            0.0,
            FlowRegime::FreeSurface,
        )
    }
}

fn snapshot(sc: &Scenario, mesh: &MeshState) -> Snapshot {
    let p = &sc.params;
    let z_dyn = update_dynamic_slope(&sc.geom.cells, &mesh.states, p);
    let n = sc.geom.n_interior();
    let rows = (1..=n)
        .map(|i| {
            let c = &sc.geom.cells[i];
            let st = mesh.states[i];
            let h = pressure_level(c, st, p);
            let (head, ent) = if st.is_dry(c.s_full) {
                (0.0, 0.0)
            } else {
                (
                    total_head(c.section, c.cos_theta, st.a, st.q, st.e, z_dyn[i], p),
                    entropy(c.section, c.cos_theta, st, z_dyn[i], p),
                )
            };
            SnapshotRow {
                x: c.x,
                a: st.a,
                q: st.q,
                e: st.e.indicator(),
                u: st.u(),
                h,
                piezo: c.z + h,
                head,
                entropy: ent,
            }
        })
        .collect();
    Snapshot { t: mesh.t, rows }
}

fn probe_cell(geom: &PipeGeometry, x: f64) -> usize {
    let n = geom.n_interior();
    (1..=n)
        .min_by(|&a, &b| {
            (geom.cells[a].x - x)
                .abs()
                .partial_cmp(&(geom.cells[b].x - x).abs())
                .unwrap()
        })
        .unwrap_or(1)
}

/// Execute the scenario to its end time.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput> {
    let states = initial_states(sc)?;
    run_from(sc, states)
}

/// Execute the scenario from explicitly supplied initial states.
pub fn run_from(sc: &Scenario, states: Vec<CellState>) -> Result<RunOutput> {
    let stepper = Stepper::new(
        &sc.geom,
        sc.params,
        sc.bc_up.clone(),
        sc.bc_down.clone(),
        sc.stepper,
    );
    let mut mesh = MeshState::new(states);
    let mut out = RunOutput {
        snapshots: vec![snapshot(sc, &mesh)],
        diags: Vec::new(),
        events: Vec::new(),
        probes: sc
            .probes
            .iter()
            .map(|&x| ProbeSeries {
                x,
                cell: probe_cell(&sc.geom, x),
                samples: Vec::new(),
            })
            .collect(),
        initial_mass: stepper.interior_mass(&mesh),
        final_mass: 0.0,
    };
    let sample_probes = |out: &mut RunOutput, mesh: &MeshState| {
        for series in &mut out.probes {
            let c = &sc.geom.cells[series.cell];
            let st = mesh.states[series.cell];
            let piezo = piezometric_head(c, st, &sc.params);
            let head = if st.is_dry(c.s_full) {
                0.0
            } else {
                total_head(c.section, c.cos_theta, st.a, st.q, st.e, c.z, &sc.params)
            };
            series.samples.push(ProbeSample {
                t: mesh.t,
                a: st.a,
                q: st.q,
                u: st.u(),
                piezo,
                head,
            });
        }
    };
    sample_probes(&mut out, &mesh);

    let mut next_output = sc.output_dt;
    while mesh.t < sc.t_end - 1e-12 {
        let dt_cap = sc.t_end - mesh.t;
        let d = stepper.advance(&mut mesh, dt_cap)?;
        out.diags.push(DiagRow {
            t: d.t,
            dt: d.dt,
            mass: d.mass,
            min_a: d.min_a,
            transitions: d.transitions,
            fallbacks: d.fallbacks,
        });
        out.events.extend(d.events.iter().copied());
        sample_probes(&mut out, &mesh);
        if mesh.t >= next_output - 1e-12 {
            out.snapshots.push(snapshot(sc, &mesh));
            while next_output <= mesh.t + 1e-12 {
                next_output += sc.output_dt;
            }
        }
    }
    if out
        .snapshots
        .last()
        .map(|s| (s.t - mesh.t).abs() > 1e-12)
        .unwrap_or(true)
    {
        out.snapshots.push(snapshot(sc, &mesh));
    }
    out.final_mass = stepper.interior_mass(&mesh);
    Ok(out)
}

fn walls() -> (BoundaryCondition, BoundaryCondition) {
    (
        BoundaryCondition {
            kind: BcKind::Discharge,
            table: TimeSeries::constant(0.0),
        },
        BoundaryCondition {
            kind: BcKind::Discharge,
            table: TimeSeries::constant(0.0),
        },
    )
}

/// Closed rectangular laboratory channel pressurizing from the upstream end.
/// The measured end hydrographs are approximated by piecewise-linear tables;
/// the front timing check downstream is therefore qualitative.
pub fn wiggert_scenario() -> Scenario {
    let seg = SegmentSpec::prismatic(
        10.0,
        80,
        SectionShape::Rectangular {
            width: 0.51,
            height: 0.148,
        },
        0.0,
    );
    let geom = PipeGeometry::new(&[seg], 0.074).unwrap();
    // Strickler from the Manning roughness n = 0.012.
    let params = ModelParams::new(40.0, 1.0 / 0.012);
    let up = TimeSeries::new(
        vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 18.0],
        vec![0.128, 0.155, 0.19, 0.222, 0.25, 0.272, 0.288, 0.305, 0.31, 0.31],
    )
    .unwrap();
    let down = TimeSeries::new(
        vec![0.0, 9.4, 9.9, 10.5, 18.0],
        vec![0.128, 0.128, 0.20, 0.235, 0.24],
    )
    .unwrap();
    Scenario {
        name: "wiggert".into(),
        geom,
        params,
        stepper: StepperConfig {
            cfl: 0.5,
            method: TransitionMethod::Fka,
            fallback_dt: 0.05,
        },
        bc_up: BoundaryCondition {
            kind: BcKind::Level,
            table: up,
        },
        bc_down: BoundaryCondition {
            kind: BcKind::Level,
            table: down,
        },
        initial: InitialCondition::StillLevel { level: 0.128 },
        t_end: 18.0,
        output_dt: 0.05,
        probes: vec![0.5, 3.5, 5.5, 9.5],
    }
}

/// Fast downstream valve closure in a long pressurized pipe.
pub fn hammer_scenario(cells: usize, t_end: f64, frictionless: bool) -> Scenario {
    let radius = (2.0_f64 / std::f64::consts::PI).sqrt(); // S = 2 m^2
    let seg = SegmentSpec {
        length: 2000.0,
        cells,
        shape_start: SectionShape::Circular { radius },
        shape_end: SectionShape::Circular { radius },
        sin_theta: (5.0_f64).to_radians().sin(),
    };
    let geom = PipeGeometry::new(&[seg], 250.0).unwrap();
    let ks = if frictionless { 215.63e6 } else { 90.0 };
    let params = ModelParams::new(1414.2, ks);
    Scenario {
        name: "hammer".into(),
        geom,
        params,
        stepper: StepperConfig {
            cfl: 1.0,
            method: TransitionMethod::Fka,
            fallback_dt: 0.5,
        },
        bc_up: BoundaryCondition {
            kind: BcKind::Head,
            table: TimeSeries::constant(300.0),
        },
        bc_down: BoundaryCondition {
            kind: BcKind::Discharge,
            table: TimeSeries::new(vec![0.0, 5.0], vec![10.0, 0.0]).unwrap(),
        },
        initial: InitialCondition::SteadyDischarge {
            discharge: 10.0,
            upstream_head: 300.0,
        },
        t_end,
        output_dt: 1.0,
        probes: vec![1000.0],
    }
}

/// Two sloped circular reaches with closed ends: a pool released over a dry
/// bed, flooding downhill and partially pressurizing against the far end.
pub fn dryflood_scenario(cells_first: usize, cells_second: usize, t_end: f64) -> Scenario {
    let shape = SectionShape::Circular { radius: 1.0 };
    let seg1 = SegmentSpec::prismatic(50.0, cells_first, shape, 0.003);
    let seg2 = SegmentSpec::prismatic(100.0, cells_second, shape, 0.05);
    let geom = PipeGeometry::new(&[seg1, seg2], 100.0).unwrap();
    let params = ModelParams::new(10.0, 215.63e6);
    let (bc_up, bc_down) = walls();
    Scenario {
        name: "dryflood".into(),
        geom,
        params,
        stepper: StepperConfig {
            cfl: 0.9,
            method: TransitionMethod::Fka,
            fallback_dt: 0.5,
        },
        bc_up,
        bc_down,
        initial: InitialCondition::Pool {
            depth: 1.8,
            from: 0.0,
            to: 25.0,
        },
        t_end,
        output_dt: (t_end / 100.0).max(0.5),
        probes: vec![],
    }
}

/// Expanding pipe slowly pressurized from the upstream end against a closed
/// valve: a sharp mixed transient with moving fronts.
pub fn expansion_scenario(method: TransitionMethod) -> Scenario {
    let seg = SegmentSpec {
        length: 5.0,
        cells: 100,
        shape_start: SectionShape::Circular { radius: 1.0 },
        shape_end: SectionShape::Circular { radius: 1.6 },
        sin_theta: 0.0,
    };
    let geom = PipeGeometry::new(&[seg], 1.0).unwrap();
    let params = ModelParams::new(20.0, 215.63e6);
    Scenario {
        name: "expansion".into(),
        geom,
        params,
        stepper: StepperConfig {
            cfl: 0.8,
            method,
            fallback_dt: 0.05,
        },
        bc_up: BoundaryCondition {
            kind: BcKind::Level,
            table: TimeSeries::new(vec![0.0, 5.0], vec![1.0, 3.2]).unwrap(),
        },
        bc_down: BoundaryCondition {
            kind: BcKind::Discharge,
            table: TimeSeries::constant(0.0),
        },
        initial: InitialCondition::StillLevel { level: 1.0 },
        t_end: 5.0,
        output_dt: 0.1,
        probes: vec![],
    }
}

/// Subcritical pressurized reach driven from a constant upstream head toward
/// a steady profile; used for the mesh-convergence study.
pub fn order_study_scenario(cells: usize) -> Scenario {
    let seg = SegmentSpec::prismatic(
        100.0,
        cells,
        SectionShape::Circular { radius: 1.5 },
        0.001,
    );
    let geom = PipeGeometry::new(&[seg], 100.0).unwrap();
    let params = ModelParams::new(40.0, 63.7);
    Scenario {
        name: "order-study".into(),
        geom,
        params,
        stepper: StepperConfig {
            cfl: 0.9,
            method: TransitionMethod::Fka,
            fallback_dt: 0.5,
        },
        bc_up: BoundaryCondition {
            kind: BcKind::Head,
            table: TimeSeries::new(vec![0.0, 20.0], vec![103.2, 104.0]).unwrap(),
        },
        bc_down: BoundaryCondition {
            kind: BcKind::Level,
            table: TimeSeries::constant(103.2),
        },
        initial: InitialCondition::StillLevel { level: 103.2 },
        t_end: 100.0,
        output_dt: 20.0,
        probes: vec![],
    }
}

/// Look up a built-in scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "wiggert" => Ok(wiggert_scenario()),
        "hammer" => Ok(hammer_scenario(1000, 100.0, false)),
        "hammer-frictionless" => Ok(hammer_scenario(1000, 100.0, true)),
        "dryflood" => Ok(dryflood_scenario(100, 200, 500.0)),
        "expansion" => Ok(expansion_scenario(TransitionMethod::Fka)),
        "order-study" => Ok(order_study_scenario(100)),
        other => Err(Error::Config(format!(
            "unknown builtin {other:?}; available: wiggert, hammer, hammer-frictionless, dryflood, expansion, order-study"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn still_level_initial_state_matches_regimes() {
        let sc = wiggert_scenario();
        let states = initial_states(&sc).unwrap();
        // Depth 0.128 in a 0.148 duct: free surface everywhere.
        for (c, st) in sc.geom.cells.iter().zip(&states) {
            assert_eq!(st.e, FlowRegime::FreeSurface);
            let depth = st.a / 0.51;
            assert!((depth - 0.128).abs() < 1e-12);
            let _ = c;
        }
    }

    #[test]
    fn pool_initial_state() {
        let sc = dryflood_scenario(20, 40, 10.0);
        let states = initial_states(&sc).unwrap();
        let mut wet = 0;
        for (c, st) in sc.geom.cells.iter().zip(&states) {
            if c.x <= 25.0 && c.x >= 0.0 {
                assert!(st.a > 0.0);
                wet += 1;
                let level = c.section.level_from_area(st.a).unwrap();
                assert!((level - 0.8).abs() < 1e-10);
            } else {
                assert_eq!(st.a, 0.0);
            }
        }
        assert_eq!(wet, 10);
    }

    #[test]
    fn steady_discharge_initial_state_is_pressurized() {
        let sc = hammer_scenario(50, 10.0, false);
        let states = initial_states(&sc).unwrap();
        for st in &states {
            assert_eq!(st.e, FlowRegime::Pressurized);
            assert!((st.q - 10.0).abs() < 1e-12);
            assert!(st.a > 0.9 * 2.0);
        }
        // The piezometric line drops along the pipe (friction).
        let p0 = piezometric_head(&sc.geom.cells[1], states[1], &sc.params);
        let n = sc.geom.n_interior();
        let p1 = piezometric_head(&sc.geom.cells[n], states[n], &sc.params);
        assert!(p0 > p1);
    }

    #[test]
    fn short_still_run_is_steady_and_deterministic() {
        let mut sc = wiggert_scenario();
        sc.t_end = 0.3;
        // Hold both ends at the initial level: nothing may move.
        sc.bc_up.table = TimeSeries::constant(0.128);
        sc.bc_down.table = TimeSeries::constant(0.128);
        let out1 = run_scenario(&sc).unwrap();
        let out2 = run_scenario(&sc).unwrap();
        let last1 = out1.snapshots.last().unwrap();
        let last2 = out2.snapshots.last().unwrap();
        for (r1, r2) in last1.rows.iter().zip(&last2.rows) {
            assert_eq!(r1.a, r2.a);
            assert_eq!(r1.q, r2.q);
        }
        for r in &last1.rows {
            assert!((r.a - 0.51 * 0.128).abs() < 1e-12 * 0.51 * 0.128);
            assert!(r.q.abs() < 1e-12);
        }
        assert!((out1.final_mass - out1.initial_mass).abs() < 1e-12 * out1.initial_mass);
    }
}
