//! Pipe geometry: cross-sections, axis profile and the mesh.
//!
//! All vertical coordinates are measured from the pipe axis, so a water level
//! lives in `[-crown, crown]` where `crown` is the axis-to-crown distance
//! (the radius for a circular section, half the height for a rectangular
//! duct). The hydrostatic integral `i1` and the section-variation coefficient
//! `gamma` (defined by `I2 = gamma * S'`) come in closed form for both shapes.

use crate::error::{Error, Result};

/// Cross-section descriptor at a fixed axis position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectionShape {
    Circular { radius: f64 },
    Rectangular { width: f64, height: f64 },
}

/// A concrete cross-section, with all per-section geometric evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub shape: SectionShape,
}

impl Section {
    pub fn circular(radius: f64) -> Self {
        Section {
            shape: SectionShape::Circular { radius },
        }
    }

    pub fn rectangular(width: f64, height: f64) -> Self {
        Section {
            shape: SectionShape::Rectangular { width, height },
        }
    }

    /// Full-section area S.
    pub fn area_full(&self) -> f64 {
        match self.shape {
            SectionShape::Circular { radius } => std::f64::consts::PI * radius * radius,
            SectionShape::Rectangular { width, height } => width * height,
        }
    }

    /// Axis-to-crown distance (level of the soffit over the axis).
    pub fn crown(&self) -> f64 {
        match self.shape {
            SectionShape::Circular { radius } => radius,
            SectionShape::Rectangular { height, .. } => 0.5 * height,
        }
    }

    /// Width sigma(z) of the section at level z over the axis.
    pub fn width_at(&self, z: f64) -> f64 {
        match self.shape {
            SectionShape::Circular { radius } => {
                2.0 * (radius * radius - z * z).max(0.0).sqrt()
            }
            SectionShape::Rectangular { width, height } => {
                if z.abs() <= 0.5 * height {
                    width
                } else {
                    0.0
                }
            }
        }
    }

    /// Wet area below level z.
    pub fn area_from_level(&self, z: f64) -> f64 {
        match self.shape {
            SectionShape::Circular { radius } => {
                let r = radius;
                let h = z.clamp(-r, r);
                h * (r * r - h * h).max(0.0).sqrt()
                    + r * r * ((h / r).asin() + std::f64::consts::FRAC_PI_2)
            }
            SectionShape::Rectangular { width, height } => {
                width * (z.clamp(-0.5 * height, 0.5 * height) + 0.5 * height)
            }
        }
    }

    /// Water level over the axis for a given wet area (inverse of
    /// `area_from_level`). Newton iteration, switching to bisection close to
    /// the crown and the invert where the surface width vanishes.
    pub fn level_from_area(&self, a_wet: f64) -> Result<f64> {
        let s = self.area_full();
        if a_wet < -1e-12 * s || a_wet > s * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "wet area {a_wet} outside [0, {s}]"
            )));
        }
        let a_wet = a_wet.clamp(0.0, s);
        match self.shape {
            SectionShape::Rectangular { width, height } => {
                Ok(a_wet / width - 0.5 * height)
            }
            SectionShape::Circular { radius } => {
                if a_wet == 0.0 {
                    return Ok(-radius);
                }
                if a_wet == s {
                    return Ok(radius);
                }
                let tol = 1e-14 * s;
                // Newton from the axis; the derivative is the surface width.
                let mut h = 0.0_f64;
                for _ in 0..60 {
                    let f = self.area_from_level(h) - a_wet;
                    if f.abs() <= tol {
                        return Ok(h);
                    }
                    let sigma = self.width_at(h);
                    if sigma <= 0.0 {
                        break;
                    }
                    let step = f / sigma;
                    h -= step;
                    if h.abs() > 0.99 * radius {
                        break;
                    }
                    if step.abs() <= 1e-16 * radius {
                        return Ok(h);
                    }
                }
                // Bisection fallback: robust where sigma -> 0.
                let (mut lo, mut hi) = (-radius, radius);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.area_from_level(mid) < a_wet {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * radius {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// Hydrostatic pressure integral I1(S_wet) = int (H - z) sigma dz.
    pub fn i1(&self, s_wet: f64) -> f64 {
        if s_wet <= 0.0 {
            return 0.0;
        }
        let level = self
            .level_from_area(s_wet)
            .expect("i1: wet area within section");
        match self.shape {
            SectionShape::Circular { radius } => {
                let r2 = radius * radius;
                level * s_wet + (2.0 / 3.0) * (r2 - level * level).max(0.0).powf(1.5)
            }
            SectionShape::Rectangular { width, height } => {
                let depth = level + 0.5 * height;
                0.5 * width * depth * depth
            }
        }
    }

    /// Wetted perimeter of the cross-section for a given wet area.
    pub fn wet_perimeter(&self, s_wet: f64) -> f64 {
        if s_wet <= 0.0 {
            return 0.0;
        }
        let s = self.area_full();
        match self.shape {
            SectionShape::Circular { radius } => {
                if s_wet >= s {
                    2.0 * std::f64::consts::PI * radius
                } else {
                    let level = self
                        .level_from_area(s_wet)
                        .expect("wet_perimeter: area in range");
                    2.0 * radius * (-level / radius).clamp(-1.0, 1.0).acos()
                }
            }
            SectionShape::Rectangular { width, height } => {
                if s_wet >= s {
                    2.0 * (width + height)
                } else {
                    width + 2.0 * s_wet / width
                }
            }
        }
    }

    /// Hydraulic radius S_wet / wetted perimeter. Zero area yields zero
    /// (dry cells bypass friction).
    pub fn hydraulic_radius(&self, s_wet: f64) -> f64 {
        if s_wet <= 0.0 {
            return 0.0;
        }
        s_wet / self.wet_perimeter(s_wet)
    }

    /// Coefficient gamma such that the section-variation pressure source
    /// satisfies I2 = gamma * S'. Closed form for circular sections; zero for
    /// rectangular ducts, which are only used prismatic (S' = 0).
    pub fn gamma(&self, s_wet: f64) -> Result<f64> {
        match self.shape {
            SectionShape::Rectangular { .. } => Ok(0.0),
            SectionShape::Circular { radius } => {
                let level = self.level_from_area(s_wet.max(0.0))?;
                if level.abs() > radius * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "level {level} outside circular section of radius {radius}"
                    )));
                }
                let half_sigma = (radius * radius - level * level).max(0.0).sqrt();
                Ok((level * std::f64::consts::FRAC_PI_2
                    + level * (level / radius).clamp(-1.0, 1.0).asin()
                    + half_sigma)
                    / std::f64::consts::PI)
            }
        }
    }
}

/// One reach of the pipe: constant inclination, linearly varying descriptor.
#[derive(Debug, Clone, Copy)]
pub struct SegmentSpec {
    pub length: f64,
    pub cells: usize,
    pub shape_start: SectionShape,
    pub shape_end: SectionShape,
    /// sin(theta); positive descends downstream (dZ/dx = -sin_theta).
    pub sin_theta: f64,
}

impl SegmentSpec {
    pub fn prismatic(length: f64, cells: usize, shape: SectionShape, sin_theta: f64) -> Self {
        SegmentSpec {
            length,
            cells,
            shape_start: shape,
            shape_end: shape,
            sin_theta,
        }
    }
}

/// Geometry attached to one cell of the mesh (fictitious cells included).
#[derive(Debug, Clone, Copy)]
pub struct CellGeom {
    pub x: f64,
    pub h: f64,
    pub z: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub section: Section,
    pub s_full: f64,
}

/// Geometry attached to one mesh interface.
#[derive(Debug, Clone, Copy)]
pub struct IfaceGeom {
    pub x: f64,
    pub cos_theta: f64,
    pub section: Section,
    pub s_full: f64,
}

/// The discretized pipe: interior cells 1..=n, fictitious boundary cells 0 and
/// n+1, and the n+1 interfaces in between. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PipeGeometry {
    segments: Vec<(f64, f64, SegmentSpec)>, // (x_start, z_start, spec)
    pub cells: Vec<CellGeom>,
    pub ifaces: Vec<IfaceGeom>,
    total_length: f64,
}

impl PipeGeometry {
    pub fn new(segments: &[SegmentSpec], z_upstream: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("geometry needs at least one segment".into()));
        }
        for seg in segments {
            if !(seg.length > 0.0) || seg.cells == 0 {
                return Err(Error::Config(
                    "segment length must be positive and cell count nonzero".into(),
                ));
            }
            if seg.sin_theta.abs() >= 1.0 {
                return Err(Error::Config("inclination must satisfy |sin| < 1".into()));
            }
            match (seg.shape_start, seg.shape_end) {
                (SectionShape::Circular { radius: r0 }, SectionShape::Circular { radius: r1 }) => {
                    if r0 <= 0.0 || r1 <= 0.0 {
                        return Err(Error::Config("radius must be positive".into()));
                    }
                }
                (
                    SectionShape::Rectangular {
                        width: w0,
                        height: h0,
                    },
                    SectionShape::Rectangular {
                        width: w1,
                        height: h1,
                    },
                ) => {
                    if w0 <= 0.0 || h0 <= 0.0 || (w0, h0) != (w1, h1) {
                        return Err(Error::Config(
                            "rectangular segments must be prismatic with positive sides".into(),
                        ));
                    }
                }
                _ => {
                    return Err(Error::Config(
                        "segment must keep a single section shape".into(),
                    ))
                }
            }
        }

        let mut placed = Vec::with_capacity(segments.len());
        let (mut x0, mut z0) = (0.0_f64, z_upstream);
        for seg in segments {
            placed.push((x0, z0, *seg));
            x0 += seg.length;
            z0 -= seg.sin_theta * seg.length;
        }
        let total_length = x0;

        let mut geom = PipeGeometry {
            segments: placed,
            cells: Vec::new(),
            ifaces: Vec::new(),
            total_length,
        };

        let mut cells = Vec::new();
        for &(xs, _, seg) in &geom.segments {
            let h = seg.length / seg.cells as f64;
            for k in 0..seg.cells {
                let x = xs + (k as f64 + 0.5) * h;
                cells.push(geom.cell_at(x, h));
            }
        }
        // Fictitious cells: same section and inclination as the adjacent
        // interior cell, axis altitude extended linearly.
        let first = cells[0];
        let last = *cells.last().unwrap();
        let z_front = if cells.len() >= 2 {
            2.0 * cells[0].z - cells[1].z
        } else {
            first.z + first.h * first.sin_theta
        };
        let z_back = if cells.len() >= 2 {
            2.0 * last.z - cells[cells.len() - 2].z
        } else {
            last.z - last.h * last.sin_theta
        };
        let mut all = Vec::with_capacity(cells.len() + 2);
        all.push(CellGeom {
            x: first.x - first.h,
            z: z_front,
            ..first
        });
        all.extend_from_slice(&cells);
        all.push(CellGeom {
            x: last.x + last.h,
            z: z_back,
            ..last
        });
        geom.cells = all;

        let n = geom.cells.len() - 1;
        let mut ifaces = Vec::with_capacity(n);
        for k in 0..n {
            let l = &geom.cells[k];
            let r = &geom.cells[k + 1];
            let x = (l.x + 0.5 * l.h).clamp(0.0, total_length);
            let section = geom.section_at(x);
            ifaces.push(IfaceGeom {
                x,
                cos_theta: 0.5 * (l.cos_theta + r.cos_theta),
                section,
                s_full: section.area_full(),
            });
        }
        geom.ifaces = ifaces;
        Ok(geom)
    }

    fn cell_at(&self, x: f64, h: f64) -> CellGeom {
        let (xs, zs, seg) = self.segment_of(x);
        let section = self.section_at(x);
        let cos_theta = (1.0 - seg.sin_theta * seg.sin_theta).sqrt();
        CellGeom {
            x,
            h,
            z: zs - seg.sin_theta * (x - xs),
            cos_theta,
            sin_theta: seg.sin_theta,
            section,
            s_full: section.area_full(),
        }
    }

    fn segment_of(&self, x: f64) -> (f64, f64, SegmentSpec) {
        let x = x.clamp(0.0, self.total_length);
        for &(xs, zs, seg) in self.segments.iter().rev() {
            if x >= xs - 1e-12 * self.total_length.max(1.0) {
                return (xs, zs, seg);
            }
        }
        self.segments[0]
    }

    /// Section descriptor interpolated at axis position x (clamped to the
    /// pipe extent).
    pub fn section_at(&self, x: f64) -> Section {
        let (xs, _, seg) = self.segment_of(x);
        let t = ((x - xs) / seg.length).clamp(0.0, 1.0);
        match (seg.shape_start, seg.shape_end) {
            (SectionShape::Circular { radius: r0 }, SectionShape::Circular { radius: r1 }) => {
                Section::circular(r0 + t * (r1 - r0))
            }
            (shape, _) => Section { shape },
        }
    }

    /// Full-section area at axis position x.
    pub fn full_section_area(&self, x: f64) -> Result<f64> {
        if x < -1e-9 || x > self.total_length + 1e-9 {
            return Err(Error::Domain(format!(
                "x = {x} outside pipe extent [0, {}]",
                self.total_length
            )));
        }
        Ok(self.section_at(x).area_full())
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Number of interior cells.
    pub fn n_interior(&self) -> usize {
        self.cells.len() - 2
    }

    /// Smallest interior cell width.
    pub fn min_h(&self) -> f64 {
        self.cells[1..self.cells.len() - 1]
            .iter()
            .map(|c| c.h)
            .fold(f64::INFINITY, f64::min)
    }
}
