//! Eigenvalue counting, the finite order `A <=_fin B`, monotonicity indicators
//! and localized Herglotz densities.

use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::directions::DirectionGrid;
use crate::error::{Error, Result};
use crate::operators::{
    assemble_born_pixel, born_pixel, hermitian_part, scattering_matrix, FarFieldMatrix, PixelQuadrature,
};
use crate::scene::{make_pixel_grid, PixelGrid, Point};

/// Default absolute eigenvalue threshold.
pub const DEFAULT_DELTA: f64 = 1e-14;
/// Default factor of the relative threshold `delta_rel * ||H||_2`.
pub const DEFAULT_DELTA_REL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Absolute(f64),
    /// Multiple of the spectral norm of the matrix being counted.
    Relative(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Absolute(DEFAULT_DELTA)
    }
}

impl Threshold {
    fn resolve(self, spectral_norm: f64) -> Result<f64> {
        let (value, delta) = match self {
            Threshold::Absolute(d) => (d, d),
            Threshold::Relative(r) => (r, r * spectral_norm),
        };
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("threshold must be a finite nonnegative number, got {value}")));
        }
        Ok(delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigCountReport {
    pub n_negative: usize,
    pub n_positive: usize,
    pub n_discarded: usize,
    /// The absolute threshold that was applied.
    pub delta: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl EigCountReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, delta: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let n_negative = eigenvalues.iter().filter(|&&l| l < -delta).count();
        let n_positive = eigenvalues.iter().filter(|&&l| l > delta).count();
        let n_discarded = eigenvalues.len() - n_negative - n_positive;
        Self { n_negative, n_positive, n_discarded, delta, eigenvalues }
    }

    pub fn significant(&self) -> usize {
        self.n_negative + self.n_positive
    }
}

fn frobenius(a: &Mat<Complex64>) -> f64 {
    a.col_iter().flat_map(|c| c.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()).sum::<f64>().sqrt()
}

/// Symmetrizes `h` and counts its eigenvalues below `-delta` and above `delta`.
/// Inputs further than `1e-12 ||H||_F` from Hermitian are rejected.
pub fn count_signed_eigs(h: &Mat<Complex64>, threshold: Threshold) -> Result<EigCountReport> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", h.nrows(), h.ncols())));
    }
    let sym = hermitian_part(h);
    let defect = frobenius(&(h - &sym));
    if defect > 1e-12 * frobenius(h) {
        return Err(Error::InvalidParameter(format!("matrix is not Hermitian (defect {defect:.3e})")));
    }
    count_hermitian(&sym, threshold)
}

fn count_hermitian(h: &Mat<Complex64>, threshold: Threshold) -> Result<EigCountReport> {
    let eig = if h.nrows() == 0 {
        Vec::new()
    } else {
        h.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?
    };
    let norm = eig.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let delta = threshold.resolve(norm)?;
    Ok(EigCountReport::from_eigenvalues(eig, delta))
}

fn check_same_shape(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Result<()> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} versus {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// `Re(S_1^* (F_2 - F_1))` with `S_1` the scattering matrix of `F_1`.
pub fn monotonicity_gap(f1: &FarFieldMatrix, f2: &FarFieldMatrix) -> Result<Mat<Complex64>> {
    check_same_shape(&f1.matrix, &f2.matrix)?;
    if f1.wavenumber != f2.wavenumber {
        return Err(Error::InvalidParameter(format!("wavenumbers differ: {} and {}", f1.wavenumber, f2.wavenumber)));
    }
    let s1 = scattering_matrix(f1);
    let diff = &f2.matrix - &f1.matrix;
    Ok(hermitian_part(&(s1.matrix.adjoint() * diff)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeqFinOutcome {
    pub holds: bool,
    /// Counts for `B - A`.
    pub report: EigCountReport,
}

/// `A <=_fin B` certified by at most `budget` eigenvalues of `B - A` below `-delta`.
pub fn leqfin_test(
    a: &Mat<Complex64>,
    b: &Mat<Complex64>,
    threshold: Threshold,
    budget: usize,
) -> Result<LeqFinOutcome> {
    check_same_shape(a, b)?;
    let report = count_signed_eigs(&(b - a), threshold)?;
    Ok(LeqFinOutcome { holds: report.n_negative <= budget, report })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorMap {
    pub grid: PixelGrid,
    /// `I_alpha(j)`, negative eigenvalue count of `sign (Re F - alpha T_j)`.
    pub values: Vec<usize>,
    /// Eigenvalues of each pixel matrix above the threshold in magnitude.
    pub significant: Vec<usize>,
    pub alpha: f64,
    pub sign: Sign,
    pub threshold: Threshold,
    /// Negative eigenvalue count of `sign Re F`.
    pub baseline: usize,
}

impl IndicatorMap {
    pub fn distinct_values(&self) -> Vec<usize> {
        let mut v = self.values.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn max_value(&self) -> usize {
        self.values.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_significant(&self) -> f64 {
        self.significant.iter().sum::<usize>() as f64 / self.significant.len().max(1) as f64
    }
}

/// Counts per pixel in parallel; each pixel is independent, so the map does not
/// depend on the thread count.
pub fn indicator_map(
    f: &FarFieldMatrix,
    pixels: &PixelGrid,
    alpha: f64,
    sign: Sign,
    threshold: Threshold,
) -> Result<IndicatorMap> {
    if alpha * sign.value() <= 0.0 {
        log::warn!(
            "alpha = {alpha} does not have the sign of the contrast; the indicator is not covered by the theory"
        );
    }
    let s = sign.value();
    let re_f = f.real_part();
    let baseline = count_hermitian(&combine(s, &re_f, 0.0, &re_f), threshold)?.n_negative;
    let counts: Vec<(usize, usize)> = (0..pixels.len())
        .into_par_iter()
        .map(|j| {
            let t = assemble_born_pixel(pixels.center(j), pixels.pixel_area(), &f.grid, f.wavenumber)?;
            let a = combine(s, &re_f, -s * alpha, &t.matrix);
            let report = count_hermitian(&a, threshold)?;
            Ok((report.n_negative, report.significant()))
        })
        .collect::<Result<_>>()?;
    let (values, significant) = counts.into_iter().unzip();
    Ok(IndicatorMap { grid: *pixels, values, significant, alpha, sign, threshold, baseline })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoSidedOutcome {
    pub inside: bool,
    /// Counts for `Re F - alpha T_B`.
    pub lower: EigCountReport,
    /// Counts for `beta T_B - Re F`.
    pub upper: EigCountReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoSidedConfig {
    pub alpha: f64,
    pub beta: f64,
    pub threshold: Threshold,
    pub budget: usize,
}

impl TwoSidedConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha <= 0.0 && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "two-sided test needs alpha <= 0 <= beta, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// `a x + b y` for Hermitian `x`, `y`.
fn combine(a: f64, x: &Mat<Complex64>, b: f64, y: &Mat<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * a + y[(i, j)] * b)
}

fn two_sided_with(re_f: &Mat<Complex64>, t_b: &Mat<Complex64>, cfg: &TwoSidedConfig) -> Result<TwoSidedOutcome> {
    let lower = count_hermitian(&combine(1.0, re_f, -cfg.alpha, t_b), cfg.threshold)?;
    let upper = count_hermitian(&combine(-1.0, re_f, cfg.beta, t_b), cfg.threshold)?;
    let inside = lower.n_negative <= cfg.budget && upper.n_negative <= cfg.budget;
    Ok(TwoSidedOutcome { inside, lower, upper })
}

/// `alpha T_B <=_fin Re F <=_fin beta T_B` with `T_B` summed from exactly
/// integrated pixel operators over `region`.
pub fn twosided_test(
    f: &FarFieldMatrix,
    grid: &PixelGrid,
    region: &[usize],
    cfg: &TwoSidedConfig,
) -> Result<TwoSidedOutcome> {
    cfg.validate()?;
    if region.is_empty() {
        return Err(Error::InvalidParameter("two-sided test needs a nonempty region".into()));
    }
    let pixels = exact_pixels(f, grid)?;
    two_sided_with(&f.real_part(), &region_sum(&pixels, region.iter().copied(), f.len()), cfg)
}

fn exact_pixels(f: &FarFieldMatrix, grid: &PixelGrid) -> Result<Vec<Mat<Complex64>>> {
    (0..grid.len())
        .into_par_iter()
        .map(|j| {
            Ok(born_pixel(grid.center(j), grid.pixel_area(), &f.grid, f.wavenumber, PixelQuadrature::Exact)?.matrix)
        })
        .collect()
}

// Summed in index order so that the result depends on the region only.
fn region_sum(pixels: &[Mat<Complex64>], region: impl Iterator<Item = usize>, n: usize) -> Mat<Complex64> {
    let mut t = Mat::<Complex64>::zeros(n, n);
    for j in region {
        t += &pixels[j];
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkResult {
    pub grid: PixelGrid,
    pub mask: Vec<bool>,
    /// Full row-major scans performed, including the final one without removals.
    pub passes: usize,
}

impl ShrinkResult {
    pub fn area(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 * self.grid.pixel_area()
    }
}

/// Removes pixels from `[-R, R]^2` while the two-sided test still holds, scanning
/// row-major until a full pass removes nothing.
pub fn shrink_reconstruct(
    f: &FarFieldMatrix,
    halfwidth: f64,
    per_axis: usize,
    cfg: &TwoSidedConfig,
) -> Result<ShrinkResult> {
    cfg.validate()?;
    let grid = make_pixel_grid(halfwidth, per_axis)?;
    let pixels = exact_pixels(f, &grid)?;
    let re_f = f.real_part();
    let n = f.len();
    let mut mask = vec![true; grid.len()];
    let test = |mask: &[bool]| {
        let region = mask.iter().enumerate().filter(|(_, &m)| m).map(|(j, _)| j);
        two_sided_with(&re_f, &region_sum(&pixels, region, n), cfg)
    };
    if !test(&mask)?.inside {
        return Err(Error::InvalidParameter("sampling region too small or budget too strict".into()));
    }
    let mut passes = 0;
    loop {
        passes += 1;
        let mut removed = false;
        for j in 0..grid.len() {
            if !mask[j] {
                continue;
            }
            mask[j] = false;
            if test(&mask)?.inside {
                removed = true;
            } else {
                mask[j] = true;
            }
        }
        if !removed {
            break;
        }
    }
    Ok(ShrinkResult { grid, mask, passes })
}

/// Sample points carrying a common area weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Point>,
    pub weight: f64,
}

impl SampleSet {
    pub fn empty() -> Self {
        Self { points: Vec::new(), weight: 0.0 }
    }

    /// Cell centers of the coarsest uniform grid with at least `min_points`
    /// centers inside the disc.
    pub fn disc(center: Point, radius: f64, min_points: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("sample disc radius must be positive, got {radius}")));
        }
        let mut per_axis = ((min_points as f64 * 4.0 / std::f64::consts::PI).sqrt().ceil() as usize).max(2);
        loop {
            let h = 2.0 * radius / per_axis as f64;
            let points: Vec<Point> = (0..per_axis * per_axis)
                .map(|i| {
                    let (r, c) = (i / per_axis, i % per_axis);
                    Point::new(center.x - radius + (c as f64 + 0.5) * h, center.y - radius + (r as f64 + 0.5) * h)
                })
                .filter(|p| Point::new(p.x - center.x, p.y - center.y).norm() < radius)
                .collect();
            if points.len() >= min_points {
                return Ok(Self { points, weight: h * h });
            }
            per_axis += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationResult {
    /// Unit-norm densities, one per regularization value.
    pub densities: Vec<Vec<Complex64>>,
    /// `||u_g||^2_B / ||u_g||^2_D`; the generalized eigenvalue when `D` is empty.
    pub ratios: Vec<f64>,
    /// Largest eigenvalue of `L_B^* L_B g = lambda (L_D^* L_D + eps I) g`.
    pub eigenvalues: Vec<f64>,
    pub eps: Vec<f64>,
}

// L_X^* L_X with L_X[p, m] = sqrt(w) (2 pi / N) e^{ik x_p . theta_m}
fn herglotz_gram(samples: &SampleSet, dirs: &DirectionGrid, k: f64) -> Mat<Complex64> {
    let n = dirs.len();
    let theta = dirs.directions();
    let scale = samples.weight.sqrt() * dirs.weight();
    let l =
        Mat::from_fn(samples.points.len(), n, |p, m| Complex64::from_polar(scale, k * samples.points[p].dot(theta[m])));
    hermitian_part(&(l.adjoint() * &l))
}

fn quadratic(a: &Mat<Complex64>, g: &[Complex64]) -> f64 {
    let mut acc = Complex64::default();
    for i in 0..g.len() {
        let row: Complex64 = (0..g.len()).map(|j| a[(i, j)] * g[j]).sum();
        acc += g[i].conj() * row;
    }
    acc.re
}

/// Densities whose Herglotz waves concentrate energy on `B` while keeping it small on `D`.
pub fn localize_density(
    b: &SampleSet,
    d: &SampleSet,
    dirs: &DirectionGrid,
    k: f64,
    eps_schedule: &[f64],
) -> Result<LocalizationResult> {
    if b.points.is_empty() {
        return Err(Error::InvalidParameter("localization needs sample points in B".into()));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {k}")));
    }
    if eps_schedule.is_empty()
        || eps_schedule.iter().any(|e| !(*e > 0.0))
        || eps_schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidParameter("regularization schedule must be positive and strictly decreasing".into()));
    }
    let n = dirs.len();
    let a = herglotz_gram(b, dirs, k);
    let dd = if d.points.is_empty() { Mat::zeros(n, n) } else { herglotz_gram(d, dirs, k) };
    let mut out = LocalizationResult {
        densities: Vec::new(),
        ratios: Vec::new(),
        eigenvalues: Vec::new(),
        eps: eps_schedule.to_vec(),
    };
    for &eps in eps_schedule {
        let reg = Mat::from_fn(n, n, |i, j| {
            dd[(i, j)] + if i == j { Complex64::new(eps, 0.0) } else { Complex64::default() }
        });
        // reg = V diag(s) V^*, W = V diag(s)^{-1/2}, reduce to W^* A W
        let evd = reg.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let w = Mat::from_fn(n, n, |i, j| evd.U()[(i, j)] / s[j].re.max(f64::MIN_POSITIVE).sqrt());
        let c = hermitian_part(&(w.adjoint() * &a * &w));
        let top = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let lambda = top.S().column_vector()[n - 1].re;
        let y = top.U().col(n - 1);
        let mut g: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| w[(i, j)] * y[j]).sum()).collect();
        let norm = g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        // fix the phase so that the largest component is real and positive
        let pivot = g.iter().copied().fold(Complex64::default(), |m, v| if v.norm() > m.norm() { v } else { m });
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
        for v in g.iter_mut() {
            *v *= phase / norm;
        }
        let ratio = if d.points.is_empty() { lambda } else { quadratic(&a, &g) / quadratic(&dd, &g) };
        out.densities.push(g);
        out.ratios.push(ratio);
        out.eigenvalues.push(lambda);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::make_pixel_grid;

    fn diag(values: &[f64]) -> Mat<Complex64> {
        Mat::from_fn(values.len(), values.len(), |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::default()
            }
        })
    }

    #[test]
    fn count_examples() {
        let r = count_signed_eigs(&diag(&[1.0, -1.0, 0.0]), Threshold::Absolute(1e-14)).unwrap();
        assert_eq!((r.n_negative, r.n_positive, r.n_discarded), (1, 1, 1));
        assert_eq!(r.eigenvalues.len(), 3);
        let z = count_signed_eigs(&Mat::zeros(5, 5), Threshold::default()).unwrap();
        assert_eq!((z.n_negative, z.n_positive, z.n_discarded), (0, 0, 5));
        let dirs = DirectionGrid::new(16).unwrap();
        let t = assemble_born_pixel(Point::new(0.3, 0.2), 0.01, &dirs, 2.0).unwrap();
        let neg = count_signed_eigs(&combine(-0.5, &t.matrix, 0.0, &t.matrix), Threshold::default()).unwrap();
        assert_eq!((neg.n_negative, neg.n_positive, neg.n_discarded), (1, 0, 15));
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut a = diag(&[1.0, 2.0]);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(count_signed_eigs(&a, Threshold::default()).is_err());
    }

    #[test]
    fn relative_threshold_scales_with_norm() {
        let r = count_signed_eigs(&diag(&[1e6, 1e-5, -1e-5]), Threshold::Relative(1e-10)).unwrap();
        assert_eq!(r.delta, 1e-4);
        assert_eq!((r.n_negative, r.n_positive, r.n_discarded), (0, 1, 2));
    }

    #[test]
    fn leqfin_examples() {
        let a = diag(&[1.0, -2.0, 3.0]);
        let same = leqfin_test(&a, &a, Threshold::default(), 0).unwrap();
        assert!(same.holds && same.report.n_negative == 0);
        let id = diag(&[1.0; 4]);
        let fails = leqfin_test(&id, &Mat::zeros(4, 4), Threshold::default(), 3).unwrap();
        assert!(!fails.holds);
        assert_eq!(fails.report.n_negative, 4);
    }

    #[test]
    fn gap_of_identical_data_is_zero() {
        let grid = DirectionGrid::new(4).unwrap();
        let m = Mat::from_fn(4, 4, |i, j| Complex64::new(i as f64, j as f64));
        let f = FarFieldMatrix::new(m, 1.0, grid).unwrap();
        let gap = monotonicity_gap(&f, &f).unwrap();
        assert!(gap.col_iter().all(|c| c.iter().all(|v| *v == Complex64::default())));
        let g = FarFieldMatrix::zeros(DirectionGrid::new(6).unwrap(), 1.0);
        assert!(monotonicity_gap(&f, &g).is_err());
    }

    #[test]
    fn indicator_of_zero_data_is_one_everywhere() {
        let f = FarFieldMatrix::zeros(DirectionGrid::new(16).unwrap(), 2.0);
        let grid = make_pixel_grid(2.0, 5).unwrap();
        let map = indicator_map(&f, &grid, 0.1, Sign::Positive, Threshold::default()).unwrap();
        assert_eq!(map.baseline, 0);
        assert!(map.values.iter().all(|&v| v == 1));
    }

    #[test]
    fn twosided_accepts_zero_data() {
        let f = FarFieldMatrix::zeros(DirectionGrid::new(16).unwrap(), 2.0);
        let grid = make_pixel_grid(1.0, 4).unwrap();
        let cfg = TwoSidedConfig { alpha: -0.5, beta: 2.0, threshold: Threshold::Relative(1e-10), budget: 0 };
        assert!(twosided_test(&f, &grid, &[0, 5, 6], &cfg).unwrap().inside);
        assert!(twosided_test(&f, &grid, &[], &cfg).is_err());
        let bad = TwoSidedConfig { alpha: 0.5, ..cfg };
        assert!(twosided_test(&f, &grid, &[0], &bad).is_err());
    }

    #[test]
    fn shrinking_zero_data_empties_the_mask() {
        let f = FarFieldMatrix::zeros(DirectionGrid::new(16).unwrap(), 2.0);
        let cfg = TwoSidedConfig { alpha: 0.0, beta: 1.0, threshold: Threshold::Relative(1e-10), budget: 0 };
        let r = shrink_reconstruct(&f, 1.0, 4, &cfg).unwrap();
        assert!(r.mask.iter().all(|m| !m));
        assert_eq!(r.passes, 2);
    }

    #[test]
    fn localization_without_d_grows_like_inverse_eps() {
        let dirs = DirectionGrid::new(32).unwrap();
        let b = SampleSet::disc(Point::new(1.0, 0.5), 0.5, 200).unwrap();
        assert!(b.points.len() >= 200);
        let r = localize_density(&b, &SampleSet::empty(), &dirs, 2.0, &[1e-2, 1e-4]).unwrap();
        assert!((r.ratios[1] / r.ratios[0] - 100.0).abs() < 1e-6);
        for g in &r.densities {
            assert!((g.iter().map(|v| v.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn localization_rejects_bad_schedules() {
        let dirs = DirectionGrid::new(8).unwrap();
        let b = SampleSet::disc(Point::ORIGIN, 1.0, 10).unwrap();
        assert!(localize_density(&b, &SampleSet::empty(), &dirs, 1.0, &[1e-2, 1e-2]).is_err());
        assert!(localize_density(&b, &SampleSet::empty(), &dirs, 1.0, &[]).is_err());
        assert!(localize_density(&SampleSet::empty(), &b, &dirs, 1.0, &[1e-2]).is_err());
    }
}
