//! Scenario configuration: TOML with geometry, model, numerics, initial
//! condition and the two boundary blocks.

use serde::Deserialize;
use std::path::Path;

use crate::boundary::{BcKind, BoundaryCondition, TimeSeries};
use crate::error::{Error, Result};
use crate::geometry::{PipeGeometry, SectionShape, SegmentSpec};
use crate::model::ModelParams;
use crate::stepper::StepperConfig;
use crate::transition::TransitionMethod;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelBlock,
    pub numerics: NumericsBlock,
    pub geometry: GeometryBlock,
    pub initial: InitialBlock,
    pub boundary: BoundaryBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub sonic_speed: f64,
    pub strickler: f64,
    #[serde(default)]
    pub gravity: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    pub cfl: f64,
    #[serde(default = "default_method")]
    pub method: String,
    pub t_end: f64,
    pub output_dt: f64,
    #[serde(default)]
    pub probes: Vec<f64>,
}

fn default_method() -> String {
    "fka".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub z_upstream: f64,
    pub segments: Vec<SegmentBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentBlock {
    pub length: f64,
    pub cells: usize,
    pub section: SectionBlock,
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default)]
    pub angle_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "shape", deny_unknown_fields)]
pub enum SectionBlock {
    #[serde(rename = "circular")]
    Circular {
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        radius_start: Option<f64>,
        #[serde(default)]
        radius_end: Option<f64>,
    },
    #[serde(rename = "rectangular")]
    Rectangular { width: f64, height: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    pub kind: String,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub depth: Option<f64>,
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub e: Option<u8>,
    #[serde(default)]
    pub discharge: Option<f64>,
    #[serde(default)]
    pub upstream_head: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryBlock {
    pub upstream: BcBlock,
    pub downstream: BcBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcBlock {
    pub kind: String,
    #[serde(default)]
    pub table: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub csv: Option<String>,
}

/// Initial-condition recipe after validation.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// Still water at an absolute piezometric level.
    StillLevel { level: f64 },
    Dry,
    /// Constant depth over the invert on a sub-range of the pipe, dry outside.
    Pool { depth: f64, from: f64, to: f64 },
    Uniform { a: f64, q: f64, pressurized: bool },
    /// Pressurized steady flow: linear piezometric line at the friction slope.
    SteadyDischarge { discharge: f64, upstream_head: f64 },
}

/// Fully validated scenario.
pub struct Scenario {
    pub name: String,
    pub geom: PipeGeometry,
    pub params: ModelParams,
    pub stepper: StepperConfig,
    pub bc_up: BoundaryCondition,
    pub bc_down: BoundaryCondition,
    pub initial: InitialCondition,
    pub t_end: f64,
    pub output_dt: f64,
    pub probes: Vec<f64>,
}

fn parse_method(s: &str) -> Result<TransitionMethod> {
    match s {
        "fka" => Ok(TransitionMethod::Fka),
        "ghost" => Ok(TransitionMethod::Ghost),
        other => Err(Error::Config(format!(
            "numerics.method must be \"fka\" or \"ghost\", got {other:?}"
        ))),
    }
}

fn parse_bc(block: &BcBlock, base_dir: &Path, which: &str) -> Result<BoundaryCondition> {
    let kind = match block.kind.as_str() {
        "level" => BcKind::Level,
        "discharge" => BcKind::Discharge,
        "head" => BcKind::Head,
        other => {
            return Err(Error::Config(format!(
                "boundary.{which}.kind must be level|discharge|head, got {other:?}"
            )))
        }
    };
    let table = match (&block.table, &block.csv) {
        (Some(rows), None) => {
            let (t, v) = rows.iter().map(|r| (r[0], r[1])).unzip();
            TimeSeries::new(t, v)
                .map_err(|e| Error::Config(format!("boundary.{which}.table: {e}")))?
        }
        (None, Some(path)) => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| {
                Error::Config(format!(
                    "boundary.{which}.csv {}: {e}",
                    full.display()
                ))
            })?;
            let mut t = Vec::new();
            let mut v = Vec::new();
            for (ln, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let mut cols = line.split(',');
                let parse = |s: Option<&str>| -> Result<f64> {
                    s.and_then(|x| x.trim().parse().ok()).ok_or_else(|| {
                        Error::Config(format!(
                            "boundary.{which}.csv line {}: expected two numeric columns",
                            ln + 1
                        ))
                    })
                };
                t.push(parse(cols.next())?);
                v.push(parse(cols.next())?);
            }
            TimeSeries::new(t, v)
                .map_err(|e| Error::Config(format!("boundary.{which}.csv: {e}")))?
        }
        _ => {
            return Err(Error::Config(format!(
                "boundary.{which}: give exactly one of `table` or `csv`"
            )))
        }
    };
    Ok(BoundaryCondition { kind, table })
}

fn parse_segment(block: &SegmentBlock, idx: usize) -> Result<SegmentSpec> {
    let sin_theta = match (block.slope, block.angle_deg) {
        (Some(s), None) => s,
        (None, Some(a)) => a.to_radians().sin(),
        (None, None) => 0.0,
        (Some(_), Some(_)) => {
            return Err(Error::Config(format!(
                "geometry.segments[{idx}]: give slope or angle_deg, not both"
            )))
        }
    };
    let (shape_start, shape_end) = match &block.section {
        SectionBlock::Circular {
            radius,
            radius_start,
            radius_end,
        } => match (radius, radius_start, radius_end) {
            (Some(r), None, None) => (
                SectionShape::Circular { radius: *r },
                SectionShape::Circular { radius: *r },
            ),
            (None, Some(r0), Some(r1)) => (
                SectionShape::Circular { radius: *r0 },
                SectionShape::Circular { radius: *r1 },
            ),
            _ => {
                return Err(Error::Config(format!(
                    "geometry.segments[{idx}]: circular section needs radius, or radius_start and radius_end"
                )))
            }
        },
        SectionBlock::Rectangular { width, height } => {
            let s = SectionShape::Rectangular {
                width: *width,
                height: *height,
            };
            (s, s)
        }
    };
    Ok(SegmentSpec {
        length: block.length,
        cells: block.cells,
        shape_start,
        shape_end,
        sin_theta,
    })
}

fn parse_initial(block: &InitialBlock) -> Result<InitialCondition> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::Config(format!("initial.{name} required for kind {:?}", block.kind)))
    };
    match block.kind.as_str() {
        "still_level" => Ok(InitialCondition::StillLevel {
            level: need(block.level, "level")?,
        }),
        "dry" => Ok(InitialCondition::Dry),
        "pool" => Ok(InitialCondition::Pool {
            depth: need(block.depth, "depth")?,
            from: need(block.from, "from")?,
            to: need(block.to, "to")?,
        }),
        "uniform" => Ok(InitialCondition::Uniform {
            a: need(block.a, "a")?,
            q: need(block.q, "q")?,
            pressurized: block.e.unwrap_or(0) == 1,
        }),
        "steady_discharge" => Ok(InitialCondition::SteadyDischarge {
            discharge: need(block.discharge, "discharge")?,
            upstream_head: need(block.upstream_head, "upstream_head")?,
        }),
        other => Err(Error::Config(format!(
            "initial.kind {other:?} not one of still_level|dry|pool|uniform|steady_discharge"
        ))),
    }
}

impl Scenario {
    /// Parse and validate a scenario from TOML text. `base_dir` resolves
    /// relative CSV paths.
    pub fn from_toml(name: &str, text: &str, base_dir: &Path) -> Result<Scenario> {
        let file: ConfigFile = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{name}: {e}")))?;
        if !(file.numerics.cfl > 0.0 && file.numerics.cfl <= 1.0) {
            return Err(Error::Config("numerics.cfl must be in (0, 1]".into()));
        }
        if !(file.numerics.t_end > 0.0) {
            return Err(Error::Config("numerics.t_end must be positive".into()));
        }
        if !(file.numerics.output_dt > 0.0) {
            return Err(Error::Config("numerics.output_dt must be positive".into()));
        }
        if !(file.model.sonic_speed > 0.0 && file.model.strickler > 0.0) {
            return Err(Error::Config(
                "model.sonic_speed and model.strickler must be positive".into(),
            ));
        }
        let segments: Vec<SegmentSpec> = file
            .geometry
            .segments
            .iter()
            .enumerate()
            .map(|(i, b)| parse_segment(b, i))
            .collect::<Result<_>>()?;
        let geom = PipeGeometry::new(&segments, file.geometry.z_upstream)?;
        let mut params = ModelParams::new(file.model.sonic_speed, file.model.strickler);
        if let Some(g) = file.model.gravity {
            params.g = g;
        }
        let method = parse_method(&file.numerics.method)?;
        let total = geom.total_length();
        for &x in &file.numerics.probes {
            if !(0.0..=total).contains(&x) {
                return Err(Error::Config(format!(
                    "numerics.probes: x = {x} outside the pipe [0, {total}]"
                )));
            }
        }
        Ok(Scenario {
            name: name.to_string(),
            geom,
            params,
            stepper: StepperConfig {
                cfl: file.numerics.cfl,
                method,
                fallback_dt: file.numerics.output_dt,
            },
            bc_up: parse_bc(&file.boundary.upstream, base_dir, "upstream")?,
            bc_down: parse_bc(&file.boundary.downstream, base_dir, "downstream")?,
            initial: parse_initial(&file.initial)?,
            t_end: file.numerics.t_end,
            output_dt: file.numerics.output_dt,
            probes: file.numerics.probes.clone(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        Scenario::from_toml(&name, &text, base)
    }
}
