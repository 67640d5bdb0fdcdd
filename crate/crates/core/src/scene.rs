//! Scatterer geometry, contrast rasterization, and the reconstruction pixel grid.
//!
//! Grids are cell-centered and row-major: row `r` runs along `y` from the
//! bottom edge, column `c` along `x` from the left edge.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Samples used for the polygonal boundary of the parametric shapes.
const BOUNDARY_SAMPLES: usize = 720;

/// Square grid of contrast samples, row-major with row 0 at the bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterGrid {
    pub resolution: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShapeKind {
    Disc {
        radius: f64,
    },
    /// Semi-axes along the shape's local x and y before rotation.
    Ellipse {
        semi_axes: [f64; 2],
    },
    /// `t -> (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)` times `scale`.
    Kite {
        scale: f64,
    },
    /// Polar curve `r(t) = scale * sqrt(0.75 + 0.25 cos 2t)`.
    Nut {
        scale: f64,
    },
    /// Gridded contrast on the square `center +- halfwidth` (unrotated).
    Raster {
        halfwidth: f64,
        grid: RasterGrid,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shape {
    pub name: Option<String>,
    pub kind: ShapeKind,
    pub center: Point,
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
    /// Constant contrast for the analytic kinds; ignored for rasters.
    pub contrast: f64,
}

impl Shape {
    pub fn disc(center: Point, radius: f64, contrast: f64) -> Self {
        Self::new(ShapeKind::Disc { radius }, center, contrast)
    }

    pub fn ellipse(center: Point, semi_axes: [f64; 2], rotation: f64, contrast: f64) -> Self {
        Self { rotation, ..Self::new(ShapeKind::Ellipse { semi_axes }, center, contrast) }
    }

    pub fn kite(center: Point, scale: f64, rotation: f64, contrast: f64) -> Self {
        Self { rotation, ..Self::new(ShapeKind::Kite { scale }, center, contrast) }
    }

    pub fn nut(center: Point, scale: f64, rotation: f64, contrast: f64) -> Self {
        Self { rotation, ..Self::new(ShapeKind::Nut { scale }, center, contrast) }
    }

    fn new(kind: ShapeKind, center: Point, contrast: f64) -> Self {
        Self { name: None, kind, center, rotation: 0.0, contrast }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ShapeKind::Disc { .. } => "disc",
            ShapeKind::Ellipse { .. } => "ellipse",
            ShapeKind::Kite { .. } => "kite",
            ShapeKind::Nut { .. } => "nut",
            ShapeKind::Raster { .. } => "raster",
        }
    }

    /// Name used in diagnostics: the explicit name, else `kind#index`.
    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}#{index}", self.kind_name()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidScene(format!("{} shape: {what}", self.kind_name())));
        if !(self.center.x.is_finite() && self.center.y.is_finite() && self.rotation.is_finite()) {
            return bad("non-finite center or rotation");
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match &self.kind {
            ShapeKind::Disc { radius } if !positive(*radius) => return bad("radius must be positive"),
            ShapeKind::Ellipse { semi_axes } if !semi_axes.iter().all(|&a| positive(a)) => {
                return bad("semi-axes must be positive")
            }
            ShapeKind::Kite { scale } | ShapeKind::Nut { scale } if !positive(*scale) => {
                return bad("scale must be positive")
            }
            ShapeKind::Raster { halfwidth, grid } => {
                if !positive(*halfwidth) {
                    return bad("raster half-width must be positive");
                }
                if grid.resolution < 1 || grid.values.len() != grid.resolution * grid.resolution {
                    return bad("raster grid is not square");
                }
                if grid.values.iter().any(|&v| !(v.is_finite() && v >= -1.0)) {
                    return bad("raster contrast values must be finite and >= -1");
                }
            }
            _ => {}
        }
        if !matches!(self.kind, ShapeKind::Raster { .. }) && !(self.contrast.is_finite() && self.contrast >= -1.0) {
            return bad("contrast must be >= -1");
        }
        Ok(())
    }

    fn to_local(&self, p: Point) -> Point {
        p.sub(self.center).rotate(-self.rotation)
    }

    fn to_global(&self, p: Point) -> Point {
        let r = p.rotate(self.rotation);
        Point::new(r.x + self.center.x, r.y + self.center.y)
    }

    /// Boundary points of the closed curve (the square outline for rasters).
    pub fn boundary(&self, samples: usize) -> Vec<Point> {
        let local = |t: f64| -> Point {
            match &self.kind {
                ShapeKind::Disc { radius } => Point::new(radius * t.cos(), radius * t.sin()),
                ShapeKind::Ellipse { semi_axes } => Point::new(semi_axes[0] * t.cos(), semi_axes[1] * t.sin()),
                ShapeKind::Kite { scale } => {
                    Point::new(scale * (t.cos() + 0.65 * (2.0 * t).cos() - 0.65), scale * 1.5 * t.sin())
                }
                ShapeKind::Nut { scale } => {
                    let r = scale * (0.75 + 0.25 * (2.0 * t).cos()).sqrt();
                    Point::new(r * t.cos(), r * t.sin())
                }
                ShapeKind::Raster { halfwidth, .. } => {
                    // square traced by the polar angle
                    let (s, c) = t.sin_cos();
                    let m = c.abs().max(s.abs());
                    Point::new(halfwidth * c / m, halfwidth * s / m)
                }
            }
        };
        (0..samples).map(|i| self.to_global(local(2.0 * PI * i as f64 / samples as f64))).collect()
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let pts = match &self.kind {
            ShapeKind::Raster { halfwidth, .. } => {
                let h = *halfwidth;
                [(-h, -h), (h, -h), (h, h), (-h, h)].iter().map(|&(x, y)| self.to_global(Point::new(x, y))).collect()
            }
            ShapeKind::Disc { radius } => {
                let r = *radius;
                vec![Point::new(self.center.x - r, self.center.y - r), Point::new(self.center.x + r, self.center.y + r)]
            }
            _ => self.boundary(BOUNDARY_SAMPLES),
        };
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pts {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Largest distance of the support from the origin.
    pub fn extent_from_origin(&self) -> f64 {
        match &self.kind {
            ShapeKind::Disc { radius } => self.center.norm() + radius,
            ShapeKind::Raster { halfwidth, .. } => {
                let h = *halfwidth;
                [(-h, -h), (h, -h), (h, h), (-h, h)]
                    .iter()
                    .map(|&(x, y)| self.to_global(Point::new(x, y)).norm())
                    .fold(0.0, f64::max)
            }
            _ => self.boundary(BOUNDARY_SAMPLES).iter().map(|p| p.norm()).fold(0.0, f64::max),
        }
    }

    /// Contrast at `p`, or `None` when `p` is not strictly inside the shape.
    pub fn contrast_at(&self, p: Point) -> Option<f64> {
        self.prepare().contrast_at(p)
    }

    fn prepare(&self) -> PreparedShape<'_> {
        let polygon = match self.kind {
            ShapeKind::Kite { .. } | ShapeKind::Nut { .. } => self.boundary(BOUNDARY_SAMPLES),
            _ => Vec::new(),
        };
        PreparedShape { shape: self, bbox: self.bounding_box(), polygon }
    }
}

/// True iff `point` lies strictly inside the shape's boundary curve. Kite and
/// nut use the winding number of the sampled boundary polygon. A raster
/// contains the points of its square whose sample is nonzero.
pub fn shape_contains(shape: &Shape, point: Point) -> bool {
    shape.contrast_at(point).is_some()
}

struct PreparedShape<'a> {
    shape: &'a Shape,
    bbox: (Point, Point),
    polygon: Vec<Point>,
}

impl PreparedShape<'_> {
    fn contrast_at(&self, p: Point) -> Option<f64> {
        let (lo, hi) = self.bbox;
        if p.x <= lo.x || p.x >= hi.x || p.y <= lo.y || p.y >= hi.y {
            return None;
        }
        let shape = self.shape;
        let local = shape.to_local(p);
        let inside = match &shape.kind {
            ShapeKind::Disc { radius } => local.norm() < *radius,
            ShapeKind::Ellipse { semi_axes } => {
                (local.x / semi_axes[0]).powi(2) + (local.y / semi_axes[1]).powi(2) < 1.0
            }
            ShapeKind::Kite { .. } | ShapeKind::Nut { .. } => winding_number(&self.polygon, p) != 0,
            ShapeKind::Raster { halfwidth, grid } => {
                let h = *halfwidth;
                if local.x.abs() >= h || local.y.abs() >= h {
                    return None;
                }
                let m = grid.resolution;
                let cell = |v: f64| (((v + h) / (2.0 * h) * m as f64) as usize).min(m - 1);
                let value = grid.values[cell(local.y) * m + cell(local.x)];
                return (value != 0.0).then_some(value);
            }
        };
        inside.then_some(shape.contrast)
    }
}

fn winding_number(polygon: &[Point], p: Point) -> i32 {
    let mut wn = 0;
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && cross > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub shapes: Vec<Shape>,
    pub wavenumber: f64,
    pub bounding_radius: f64,
}

impl Scene {
    pub fn new(shapes: Vec<Shape>, wavenumber: f64, bounding_radius: f64) -> Result<Self> {
        let scene = Self { shapes, wavenumber, bounding_radius };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavenumber.is_finite() && self.wavenumber > 0.0) {
            return Err(Error::InvalidScene(format!("wavenumber must be positive, got {}", self.wavenumber)));
        }
        if !(self.bounding_radius.is_finite() && self.bounding_radius > 0.0) {
            return Err(Error::InvalidScene(format!("bounding radius must be positive, got {}", self.bounding_radius)));
        }
        for (i, shape) in self.shapes.iter().enumerate() {
            shape.validate()?;
            let extent = shape.extent_from_origin();
            if extent > self.bounding_radius {
                return Err(Error::InvalidScene(format!(
                    "shape {} reaches radius {extent:.4} outside the bounding ball of radius {}",
                    shape.label(i),
                    self.bounding_radius
                )));
            }
        }
        Ok(())
    }

    /// Smallest and largest contrast over the shapes (0 for an empty scene).
    pub fn contrast_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.shapes {
            let vals: Vec<f64> = match &s.kind {
                ShapeKind::Raster { grid, .. } => grid.values.iter().copied().filter(|&v| v != 0.0).collect(),
                _ => vec![s.contrast],
            };
            for v in vals {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// Cell-centered samples of the contrast `q` on `[-w, w]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastField {
    pub box_halfwidth: f64,
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl ContrastField {
    pub fn zeros(box_halfwidth: f64, resolution: usize) -> Self {
        Self { box_halfwidth, resolution, values: vec![0.0; resolution * resolution] }
    }

    pub fn cell_size(&self) -> f64 {
        2.0 * self.box_halfwidth / self.resolution as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size().powi(2)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        let h = self.cell_size();
        Point::new(-self.box_halfwidth + (col as f64 + 0.5) * h, -self.box_halfwidth + (row as f64 + 0.5) * h)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Flat indices of the nonzero cells, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    pub fn same_grid(&self, other_halfwidth: f64, other_resolution: usize) -> bool {
        self.box_halfwidth == other_halfwidth && self.resolution == other_resolution
    }
}

/// Samples the scene's contrast at cell centers; overlaps take the value of the
/// last containing shape in list order.
pub fn rasterize(scene: &Scene, box_halfwidth: f64, resolution: usize) -> Result<ContrastField> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!("grid resolution must be >= 2, got {resolution}")));
    }
    if !(box_halfwidth >= scene.bounding_radius) {
        return Err(Error::InvalidParameter(format!(
            "box half-width {box_halfwidth} is smaller than the scene bounding radius {}",
            scene.bounding_radius
        )));
    }
    let mut field = ContrastField::zeros(box_halfwidth, resolution);
    let h = field.cell_size();
    for (index, shape) in scene.shapes.iter().enumerate() {
        shape.validate()?;
        let prepared = shape.prepare();
        let (lo, hi) = prepared.bbox;
        if lo.x < -box_halfwidth || lo.y < -box_halfwidth || hi.x > box_halfwidth || hi.y > box_halfwidth {
            return Err(Error::ShapeOutsideBox { name: shape.label(index), box_halfwidth });
        }
        // only cells whose centers fall in the bounding box
        let span = |a: f64, b: f64| {
            let first = (((a + box_halfwidth) / h - 0.5).floor().max(0.0)) as usize;
            let last = ((((b + box_halfwidth) / h - 0.5).ceil()) as usize).min(resolution - 1);
            first..=last
        };
        for row in span(lo.y, hi.y) {
            for col in span(lo.x, hi.x) {
                if let Some(q) = prepared.contrast_at(field.cell_center(row, col)) {
                    field.values[row * resolution + col] = q;
                }
            }
        }
    }
    Ok(field)
}

/// Uniform `J1 x J1` partition of `[-R, R]^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelGrid {
    pub halfwidth: f64,
    pub per_axis: usize,
}

impl PixelGrid {
    pub fn len(&self) -> usize {
        self.per_axis * self.per_axis
    }

    pub fn is_empty(&self) -> bool {
        self.per_axis == 0
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.halfwidth / self.per_axis as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size().powi(2)
    }

    /// `(row, col)` of pixel `j` (row-major).
    pub fn row_col(&self, j: usize) -> (usize, usize) {
        (j / self.per_axis, j % self.per_axis)
    }

    pub fn center(&self, j: usize) -> Point {
        let (row, col) = self.row_col(j);
        let s = self.pixel_size();
        Point::new(-self.halfwidth + (col as f64 + 0.5) * s, -self.halfwidth + (row as f64 + 0.5) * s)
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|j| self.center(j)).collect()
    }
}

pub fn make_pixel_grid(halfwidth: f64, per_axis: usize) -> Result<PixelGrid> {
    if !(halfwidth.is_finite() && halfwidth > 0.0) || per_axis < 1 {
        return Err(Error::InvalidParameter(format!(
            "pixel grid needs R > 0 and at least one pixel per axis, got R={halfwidth}, J1={per_axis}"
        )));
    }
    Ok(PixelGrid { halfwidth, per_axis })
}
