//! Direct scattering by a penetrable medium: the Lippmann-Schwinger equation
//! `u = u^i + k^2 V(q u)` discretized by midpoint collocation on the contrast
//! grid, far field evaluation, Herglotz wave functions, and the Mie-series
//! oracle for a homogeneous disc.

mod gmres;
pub mod kernel;
pub mod mie;

use num_complex::Complex64;

use crate::directions::DirectionGrid;
use crate::error::{Error, Result};
use crate::scene::{ContrastField, Point};

use self::gmres::gmres;
use self::kernel::{ConvolutionWorkspace, GreenConvolution};

pub use self::mie::{mie_coefficients, mie_default_terms, mie_far_field, mie_total_field};

#[derive(Clone, Debug, PartialEq)]
pub enum IncidentField {
    /// `e^{ik theta . x}` with `|theta| = 1`.
    PlaneWave { direction: Point },
    /// `sum_m (2 pi / N) e^{ik x . theta_m} g_m`.
    Herglotz { density: Vec<Complex64>, grid: DirectionGrid },
}

impl IncidentField {
    pub fn plane_wave(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        IncidentField::PlaneWave { direction: Point::new(c, s) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IncidentField::PlaneWave { direction } => {
                if (direction.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("plane wave direction has norm {}", direction.norm())));
                }
            }
            IncidentField::Herglotz { density, grid } => {
                if density.len() != grid.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "Herglotz density has {} values for {} directions",
                        density.len(),
                        grid.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, k: f64, points: &[Point]) -> Vec<Complex64> {
        match self {
            IncidentField::PlaneWave { direction } => {
                points.iter().map(|p| Complex64::from_polar(1.0, k * direction.dot(*p))).collect()
            }
            IncidentField::Herglotz { density, grid } => evaluate_herglotz(density, grid, k, points),
        }
    }
}

/// Herglotz wave function by the trapezoidal rule on the direction grid.
pub fn evaluate_herglotz(density: &[Complex64], grid: &DirectionGrid, k: f64, points: &[Point]) -> Vec<Complex64> {
    assert_eq!(density.len(), grid.len(), "density length must match the direction grid");
    let dirs = grid.directions();
    let w = grid.weight();
    points
        .iter()
        .map(|x| {
            let s: Complex64 =
                dirs.iter().zip(density).map(|(d, g)| Complex64::from_polar(1.0, k * x.dot(*d)) * g).sum();
            s * w
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub gmres_tolerance: f64,
    pub max_iterations: usize,
    pub points_per_wavelength_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { gmres_tolerance: 1e-10, max_iterations: 500, points_per_wavelength_min: 10.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gmres_tolerance > 0.0) || self.max_iterations < 1 {
            return Err(Error::InvalidParameter(format!(
                "solver needs tolerance > 0 and max_iterations >= 1, got {} and {}",
                self.gmres_tolerance, self.max_iterations
            )));
        }
        Ok(())
    }
}

/// Total field at the cell centers of the contrast grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalField {
    pub box_halfwidth: f64,
    pub resolution: usize,
    pub values: Vec<Complex64>,
    pub incident: IncidentField,
    pub wavenumber: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// The discretized operator `I - k^2 V Q` for one contrast and wavenumber,
/// reusable across incident fields.
pub struct LippmannSchwinger {
    contrast: ContrastField,
    k: f64,
    support: Vec<usize>,
    rows: (usize, usize),
    conv: Option<GreenConvolution>,
}

impl LippmannSchwinger {
    pub fn new(contrast: &ContrastField, k: f64, cfg: &SolverConfig) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {k}")));
        }
        cfg.validate()?;
        let wavelength = 2.0 * std::f64::consts::PI / k;
        let ppw = wavelength / contrast.cell_size();
        if ppw < cfg.points_per_wavelength_min {
            return Err(Error::InvalidParameter(format!(
                "grid has {ppw:.2} points per wavelength, need at least {}",
                cfg.points_per_wavelength_min
            )));
        }
        let support = contrast.support();
        let m = contrast.resolution;
        let rows = match (support.first(), support.last()) {
            (Some(&a), Some(&b)) => (a / m, b / m),
            _ => (0, 0),
        };
        let conv = (!support.is_empty()).then(|| GreenConvolution::new(k, contrast.cell_size(), m));
        Ok(Self { contrast: contrast.clone(), k, support, rows, conv })
    }

    pub fn contrast(&self) -> &ContrastField {
        &self.contrast
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn cell_centers(&self) -> Vec<Point> {
        let m = self.contrast.resolution;
        (0..m * m).map(|i| self.contrast.cell_center(i / m, i % m)).collect()
    }

    /// `k^2 V(q u_S)` on the full grid for `u_S` given on the support.
    fn scattered_from_support(
        &self,
        u_support: &[Complex64],
        ws: &mut ConvolutionWorkspace,
        full_rows: bool,
    ) -> Vec<Complex64> {
        let m = self.contrast.resolution;
        let mut w = vec![Complex64::default(); m * m];
        for (&i, u) in self.support.iter().zip(u_support) {
            w[i] = u * (self.k * self.k * self.contrast.values[i]);
        }
        let mut out = vec![Complex64::default(); m * m];
        let rows = if full_rows { (0, m - 1) } else { self.rows };
        self.conv.as_ref().expect("nonempty support").apply(&w, rows, &mut out, ws);
        out
    }

    pub fn solve(&self, incident: &IncidentField, cfg: &SolverConfig) -> Result<TotalField> {
        incident.validate()?;
        cfg.validate()?;
        let centers = self.cell_centers();
        let u_inc = incident.evaluate(self.k, &centers);
        let make = |values, iterations, relative_residual| TotalField {
            box_halfwidth: self.contrast.box_halfwidth,
            resolution: self.contrast.resolution,
            values,
            incident: incident.clone(),
            wavenumber: self.k,
            iterations,
            relative_residual,
        };
        if self.support.is_empty() {
            return Ok(make(u_inc, 0, 0.0));
        }
        let conv = self.conv.as_ref().expect("nonempty support");
        let mut ws = conv.workspace();
        let rhs: Vec<Complex64> = self.support.iter().map(|&i| u_inc[i]).collect();
        let outcome = {
            let ws = &mut ws;
            let apply = |x: &[Complex64], y: &mut [Complex64]| {
                let s = self.scattered_from_support(x, ws, false);
                for ((yi, xi), &i) in y.iter_mut().zip(x).zip(&self.support) {
                    *yi = xi - s[i];
                }
            };
            gmres(apply, &rhs, rhs.clone(), cfg.gmres_tolerance, cfg.max_iterations)?
        };
        let scattered = self.scattered_from_support(&outcome.solution, &mut ws, true);
        let mut values: Vec<Complex64> = u_inc.iter().zip(&scattered).map(|(a, b)| a + b).collect();
        for (&i, u) in self.support.iter().zip(&outcome.solution) {
            values[i] = *u;
        }
        Ok(make(values, outcome.iterations, outcome.relative_residual))
    }

    /// `u^i + k^2 V(q u^i)`: the first Born approximation of the total field.
    pub fn born_total_field(&self, incident: &IncidentField) -> Vec<Complex64> {
        let centers = self.cell_centers();
        let u_inc = incident.evaluate(self.k, &centers);
        if self.support.is_empty() {
            return u_inc;
        }
        let conv = self.conv.as_ref().expect("nonempty support");
        let mut ws = conv.workspace();
        let on_support: Vec<Complex64> = self.support.iter().map(|&i| u_inc[i]).collect();
        let s = self.scattered_from_support(&on_support, &mut ws, true);
        u_inc.iter().zip(&s).map(|(a, b)| a + b).collect()
    }
}

pub fn solve_total_field(
    q: &ContrastField,
    incident: &IncidentField,
    k: f64,
    cfg: &SolverConfig,
) -> Result<TotalField> {
    LippmannSchwinger::new(q, k, cfg)?.solve(incident, cfg)
}

/// `u_inf(x_l) = k^2 sum_cells q u e^{-ik x_l . y} h^2` for every grid direction.
pub fn far_field(q: &ContrastField, u: &TotalField, dirs: &DirectionGrid) -> Result<Vec<Complex64>> {
    if !q.same_grid(u.box_halfwidth, u.resolution) || u.values.len() != q.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "total field grid ({}, {}) differs from contrast grid ({}, {})",
            u.box_halfwidth, u.resolution, q.box_halfwidth, q.resolution
        )));
    }
    let k = u.wavenumber;
    let m = q.resolution;
    let weight = k * k * q.cell_area();
    let sources: Vec<(Point, Complex64)> =
        q.support().into_iter().map(|i| (q.cell_center(i / m, i % m), u.values[i] * q.values[i])).collect();
    Ok(dirs
        .directions()
        .iter()
        .map(|d| {
            let s: Complex64 = sources.iter().map(|(y, qu)| Complex64::from_polar(1.0, -k * d.dot(*y)) * qu).sum();
            s * weight
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{rasterize, Scene, Shape};
    use std::f64::consts::PI;

    fn disc_field(radius: f64, q: f64, box_halfwidth: f64, m: usize) -> ContrastField {
        let scene = Scene::new(vec![Shape::disc(Point::ORIGIN, radius, q)], 1.0, box_halfwidth).unwrap();
        rasterize(&scene, box_halfwidth, m).unwrap()
    }

    #[test]
    fn zero_contrast_returns_incident_field() {
        let q = ContrastField::zeros(1.0, 32);
        let k = 3.0;
        let inc = IncidentField::plane_wave(0.0);
        let u = solve_total_field(&q, &inc, k, &SolverConfig::default()).unwrap();
        for (i, v) in u.values.iter().enumerate() {
            let x = q.cell_center(i / 32, i % 32).x;
            assert_eq!(*v, Complex64::from_polar(1.0, k * x));
        }
        let ff = far_field(&q, &u, &DirectionGrid::new(8).unwrap()).unwrap();
        assert!(ff.iter().all(|v| *v == Complex64::default()));
    }

    #[test]
    fn rejects_bad_wavenumber_and_coarse_grids() {
        let q = disc_field(0.5, 1.0, 1.0, 16);
        let inc = IncidentField::plane_wave(0.0);
        assert!(solve_total_field(&q, &inc, 0.0, &SolverConfig::default()).is_err());
        assert!(solve_total_field(&q, &inc, 20.0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn herglotz_examples() {
        let grid = DirectionGrid::new(64).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); 64];
        let v = evaluate_herglotz(&ones, &grid, 1.0, &[Point::ORIGIN])[0];
        assert!((v - 2.0 * PI).norm() < 1e-13);
        let zeros = vec![Complex64::default(); 64];
        assert_eq!(evaluate_herglotz(&zeros, &grid, 1.0, &[Point::new(0.3, 0.1)])[0], Complex64::default());
    }

    #[test]
    fn herglotz_converges_to_dense_quadrature() {
        // independent oracle: the same integral with 4096 nodes
        let x = Point::new(1.0, 0.0);
        let coarse =
            evaluate_herglotz(&vec![Complex64::new(1.0, 0.0); 64], &DirectionGrid::new(64).unwrap(), 1.0, &[x])[0];
        let n = 4096;
        let dense: Complex64 =
            (0..n).map(|i| Complex64::from_polar(1.0, (2.0 * PI * i as f64 / n as f64).cos())).sum::<Complex64>()
                * (2.0 * PI / n as f64);
        assert!((coarse - dense).norm() < 1e-10);
        // 2 pi J_0(1)
        assert!((dense.re - 2.0 * PI * 0.765_197_686_557_966_6).abs() < 1e-12);
    }

    #[test]
    fn solver_residual_meets_tolerance() {
        let q = disc_field(0.5, 1.0, 0.5, 40);
        let cfg = SolverConfig { gmres_tolerance: 1e-11, ..SolverConfig::default() };
        let u = solve_total_field(&q, &IncidentField::plane_wave(0.3), 2.0, &cfg).unwrap();
        assert!(u.relative_residual <= 1e-11);
        assert!(u.iterations > 0);
    }

    #[test]
    fn born_regime_is_second_order() {
        let base = disc_field(0.5, 1.0, 0.5, 48);
        let cfg = SolverConfig { gmres_tolerance: 1e-14, ..SolverConfig::default() };
        let inc = IncidentField::plane_wave(0.0);
        let k = 2.0;
        let defect = |eps: f64| {
            let op = LippmannSchwinger::new(&base.scaled(eps), k, &cfg).unwrap();
            let u = op.solve(&inc, &cfg).unwrap().values;
            let born = op.born_total_field(&inc);
            let ui = inc.evaluate(k, &op.cell_centers());
            let num: f64 = u.iter().zip(&born).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = ui.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            num / den
        };
        let d1 = defect(1e-3);
        let d2 = defect(2e-3);
        assert!(d1 < 1e-5, "defect {d1}");
        let order = (d2 / d1).log2();
        assert!((order - 2.0).abs() < 0.05, "observed order {order}");
    }

    #[test]
    fn far_field_rejects_mismatched_grids() {
        let q = disc_field(0.5, 1.0, 1.0, 32);
        let u = solve_total_field(&q, &IncidentField::plane_wave(0.0), 1.0, &SolverConfig::default()).unwrap();
        let other = ContrastField::zeros(1.0, 16);
        assert!(far_field(&other, &u, &DirectionGrid::new(4).unwrap()).is_err());
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let q = disc_field(0.5, 1.5, 0.6, 40);
        let inc = IncidentField::plane_wave(1.1);
        let a = solve_total_field(&q, &inc, 3.0, &SolverConfig::default()).unwrap();
        let b = solve_total_field(&q, &inc, 3.0, &SolverConfig::default()).unwrap();
        assert_eq!(a.values, b.values);
    }
}
