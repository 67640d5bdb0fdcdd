//! Discrete far field, scattering and Born pixel operators on a direction grid.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::directions::DirectionGrid;
use crate::error::{Error, Result};
use crate::forward::{evaluate_herglotz, far_field, IncidentField, LippmannSchwinger, SolverConfig};
use crate::scene::{rasterize, ContrastField, PixelGrid, Point, Scene};

/// `|C_2|^2 = 1 / (8 pi k)`.
pub fn c2_squared(k: f64) -> f64 {
    1.0 / (8.0 * PI * k)
}

/// `(A + A^*) / 2`, Hermitian to the last bit.
pub fn hermitian_part(a: &Mat<Complex64>) -> Mat<Complex64> {
    let n = a.nrows();
    let mut h = Mat::<Complex64>::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = Complex64::new(a[(j, j)].re, 0.0);
        for i in 0..j {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h
}

#[derive(Clone, Debug)]
pub struct FarFieldMatrix {
    /// `(2 pi / N) [u_inf(x_l; theta_m)]`.
    pub matrix: Mat<Complex64>,
    pub wavenumber: f64,
    pub grid: DirectionGrid,
}

impl FarFieldMatrix {
    pub fn new(matrix: Mat<Complex64>, wavenumber: f64, grid: DirectionGrid) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a grid of {} directions",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        if !(wavenumber > 0.0) {
            return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {wavenumber}")));
        }
        if matrix.col_iter().any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
            return Err(Error::InvalidParameter("far field matrix has non-finite entries".into()));
        }
        Ok(Self { matrix, wavenumber, grid })
    }

    pub fn zeros(grid: DirectionGrid, wavenumber: f64) -> Self {
        Self { matrix: Mat::zeros(grid.len(), grid.len()), wavenumber, grid }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `Re F = (F + F^*) / 2`.
    pub fn real_part(&self) -> Mat<Complex64> {
        hermitian_part(&self.matrix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardConfig {
    /// Cells per axis of the contrast grid.
    pub resolution: usize,
    /// Half width of the computational box; the scene's bounding radius if `None`.
    pub box_halfwidth: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self { resolution: 128, box_halfwidth: None, solver: SolverConfig::default() }
    }
}

pub fn assemble_far_field_matrix(scene: &Scene, dirs: &DirectionGrid, cfg: &ForwardConfig) -> Result<FarFieldMatrix> {
    scene.validate()?;
    let box_halfwidth = cfg.box_halfwidth.unwrap_or(scene.bounding_radius);
    let q = rasterize(scene, box_halfwidth, cfg.resolution)?;
    if (dirs.len() as f64) < 2.0 * scene.wavenumber * scene.bounding_radius {
        log::warn!(
            "N = {} directions is below 2kR = {:.1}; the data do not resolve the scene",
            dirs.len(),
            2.0 * scene.wavenumber * scene.bounding_radius
        );
    }
    far_field_matrix_for_contrast(&q, scene.wavenumber, dirs, &cfg.solver)
}

/// Column `m` is `(2 pi / N) u_inf(.; theta_m)` from one Lippmann-Schwinger solve.
/// Columns are solved in parallel; the result does not depend on the schedule.
pub fn far_field_matrix_for_contrast(
    q: &ContrastField,
    k: f64,
    dirs: &DirectionGrid,
    solver: &SolverConfig,
) -> Result<FarFieldMatrix> {
    let n = dirs.len();
    if q.is_zero() {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {k}")));
        }
        return Ok(FarFieldMatrix::zeros(*dirs, k));
    }
    let op = LippmannSchwinger::new(q, k, solver)?;
    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|m| {
            let u = op.solve(&IncidentField::plane_wave(dirs.angle(m)), solver)?;
            far_field(q, &u, dirs)
        })
        .collect::<Result<_>>()?;
    let w = dirs.weight();
    FarFieldMatrix::new(Mat::from_fn(n, n, |l, m| columns[m][l] * w), k, *dirs)
}

#[derive(Clone, Debug)]
pub struct ScatteringMatrix {
    pub matrix: Mat<Complex64>,
    pub wavenumber: f64,
}

impl ScatteringMatrix {
    /// `||S^* S - I||_2`.
    pub fn unitarity_residual(&self) -> Result<f64> {
        let n = self.matrix.nrows();
        let d = self.matrix.adjoint() * &self.matrix - Mat::<Complex64>::identity(n, n);
        spectral_norm(&d)
    }
}

/// `S = I + 2ik |C_2|^2 F`.
pub fn scattering_matrix(f: &FarFieldMatrix) -> ScatteringMatrix {
    let n = f.len();
    let factor = Complex64::new(0.0, 2.0 * f.wavenumber * c2_squared(f.wavenumber));
    let matrix = Mat::from_fn(n, n, |i, j| {
        let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::default() };
        id + factor * f.matrix[(i, j)]
    });
    ScatteringMatrix { matrix, wavenumber: f.wavenumber }
}

pub fn spectral_norm(a: &Mat<Complex64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let s = a.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CirclePoint {
    pub eigenvalue: Complex64,
    /// `| |lambda - c| - r | / r`.
    pub residual: f64,
}

/// Center `i / (2k|C_2|^2)` and radius `1 / (2k|C_2|^2)` of the circle carrying the
/// eigenvalues of the far field operator.
pub fn eigenvalue_circle(k: f64) -> (Complex64, f64) {
    let r = 1.0 / (2.0 * k * c2_squared(k));
    (Complex64::new(0.0, r), r)
}

/// Eigenvalues of `F` with their relative distance to the circle, sorted by angle on it.
pub fn circle_residuals(f: &FarFieldMatrix) -> Result<Vec<CirclePoint>> {
    let (center, radius) = eigenvalue_circle(f.wavenumber);
    let eig = f.matrix.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let mut out: Vec<CirclePoint> = eig
        .into_iter()
        .map(|lambda| CirclePoint { eigenvalue: lambda, residual: ((lambda - center).norm() - radius).abs() / radius })
        .collect();
    let angle = |p: &CirclePoint| {
        let d = p.eigenvalue - center;
        // measured from the origin, which lies on the circle
        (d.im.atan2(d.re) + 2.5 * PI) % (2.0 * PI)
    };
    out.sort_by(|a, b| angle(a).total_cmp(&angle(b)).then(a.residual.total_cmp(&b.residual)));
    Ok(out)
}

/// `max |F[l, m] - F[m', l']| / max |F|` with `'` the opposite direction (even `N` only).
pub fn reciprocity_defect(f: &FarFieldMatrix) -> Option<f64> {
    let n = f.len();
    f.grid.opposite(0)?;
    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for l in 0..n {
        for m in 0..n {
            scale = scale.max(f.matrix[(l, m)].norm());
            let (ml, lm) = (f.grid.opposite(m)?, f.grid.opposite(l)?);
            defect = defect.max((f.matrix[(l, m)] - f.matrix[(ml, lm)]).norm());
        }
    }
    Some(if scale > 0.0 { defect / scale } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelQuadrature {
    /// Constant phase `e^{ik z.(theta_m - theta_l)}` per pixel; rank one.
    Midpoint,
    /// Exact integral of the phase over the square pixel.
    Exact,
}

#[derive(Clone, Debug)]
pub struct BornPixelOperator {
    pub center: Point,
    pub area: f64,
    pub matrix: Mat<Complex64>,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(2 pi / N) k^2 |P| e^{ik z.(theta_m - theta_l)}`, built from the upper triangle.
pub fn assemble_born_pixel(z: Point, area: f64, dirs: &DirectionGrid, k: f64) -> Result<BornPixelOperator> {
    born_pixel(z, area, dirs, k, PixelQuadrature::Midpoint)
}

pub fn born_pixel(
    z: Point,
    area: f64,
    dirs: &DirectionGrid,
    k: f64,
    rule: PixelQuadrature,
) -> Result<BornPixelOperator> {
    if !(area > 0.0) {
        return Err(Error::InvalidParameter(format!("pixel area must be positive, got {area}")));
    }
    let n = dirs.len();
    let theta = dirs.directions();
    let scale = dirs.weight() * k * k * area;
    let side = area.sqrt();
    let v: Vec<Complex64> = theta.iter().map(|t| Complex64::from_polar(1.0, -k * z.dot(*t))).collect();
    let mut matrix = Mat::<Complex64>::zeros(n, n);
    for m in 0..n {
        matrix[(m, m)] = Complex64::new(scale, 0.0);
        for l in 0..m {
            let mut e = v[l] * v[m].conj() * scale;
            if rule == PixelQuadrature::Exact {
                let (dx, dy) = (theta[m].x - theta[l].x, theta[m].y - theta[l].y);
                e *= sinc(0.5 * k * side * dx) * sinc(0.5 * k * side * dy);
            }
            matrix[(l, m)] = e;
            matrix[(m, l)] = e.conj();
        }
    }
    Ok(BornPixelOperator { center: z, area, matrix })
}

/// `T_B` for a union of pixels: the sum of the pixel operators.
pub fn born_region(
    grid: &PixelGrid,
    pixels: &[usize],
    dirs: &DirectionGrid,
    k: f64,
    rule: PixelQuadrature,
) -> Result<Mat<Complex64>> {
    let n = dirs.len();
    let mut t = Mat::<Complex64>::zeros(n, n);
    for &j in pixels {
        let p = born_pixel(grid.center(j), grid.pixel_area(), dirs, k, rule)?;
        t += &p.matrix;
    }
    Ok(t)
}

/// `g^* T g`, real for Hermitian `T`.
pub fn herglotz_energy(t: &Mat<Complex64>, g: &[Complex64]) -> Result<f64> {
    if t.nrows() != g.len() || t.ncols() != g.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator, density of length {}",
            t.nrows(),
            t.ncols(),
            g.len()
        )));
    }
    let mut acc = Complex64::default();
    for i in 0..g.len() {
        let mut row = Complex64::default();
        for j in 0..g.len() {
            row += t[(i, j)] * g[j];
        }
        acc += g[i].conj() * row;
    }
    Ok(acc.re)
}

/// `|(2 pi / N) sum_l g_l conj((F g)_l) - k^2 sum_cells q u^i_g conj(u_{q,g}) h^2|`,
/// with `u_{q,g}` from a separate Herglotz solve on the contrast grid of `F`.
pub fn check_energy_identity(
    f: &FarFieldMatrix,
    q: &ContrastField,
    g: &[Complex64],
    solver: &SolverConfig,
) -> Result<f64> {
    let n = f.len();
    if g.len() != n {
        return Err(Error::DimensionMismatch(format!("density of length {} for {n} directions", g.len())));
    }
    let k = f.wavenumber;
    let w = f.grid.weight();
    let mut lhs = Complex64::default();
    for l in 0..n {
        let fg: Complex64 = (0..n).map(|m| f.matrix[(l, m)] * g[m]).sum();
        lhs += g[l] * fg.conj();
    }
    lhs *= w;
    let incident = IncidentField::Herglotz { density: g.to_vec(), grid: f.grid };
    let m = q.resolution;
    let support = q.support();
    let rhs = if support.is_empty() {
        Complex64::default()
    } else {
        let u = LippmannSchwinger::new(q, k, solver)?.solve(&incident, solver)?;
        let points: Vec<Point> = support.iter().map(|&i| q.cell_center(i / m, i % m)).collect();
        let ui = evaluate_herglotz(g, &f.grid, k, &points);
        let s: Complex64 = support.iter().zip(&ui).map(|(&i, a)| a * u.values[i].conj() * q.values[i]).sum();
        s * (k * k * q.cell_area())
    };
    Ok((lhs - rhs).norm())
}
