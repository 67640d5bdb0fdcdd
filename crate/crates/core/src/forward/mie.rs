//! Separation-of-variables solution for plane-wave scattering by a homogeneous
//! disc of radius `a` and contrast `q`, centered at the origin.
//!
//! With `k1 = k sqrt(1 + q)` and `Delta = angle(x) - angle(theta)`:
//!
//! ```text
//! u   = sum_n i^n c_n J_n(k1 r) e^{in Delta}                    (r < a)
//! u   = sum_n i^n (J_n(k r) + b_n H_n(k r)) e^{in Delta}        (r > a)
//! u_inf(Delta) = -4i sum_n b_n e^{in Delta}
//! ```
//!
//! The far field normalization matches `u^s ~ C_2 e^{ikr} / sqrt(r) u_inf` with
//! `C_2 = e^{i pi/4} / sqrt(8 pi k)`.

use faer::Mat;
use num_complex::Complex64;

use crate::directions::DirectionGrid;
use crate::error::{Error, Result};
use crate::scene::Point;
use crate::special::{bessel_j_sequence, bessel_y_sequence, sequence_derivative};

/// Coefficient magnitude of the last retained term relative to the series.
pub const MIE_TRUNCATION: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct MieCoefficients {
    /// Scattered-field coefficients `b_0..=b_{n_terms}` (`b_{-n} = b_n`).
    pub scattered: Vec<Complex64>,
    /// Interior coefficients `c_0..=c_{n_terms}`.
    pub interior: Vec<Complex64>,
    pub interior_wavenumber: f64,
}

/// A number of terms that comfortably satisfies the truncation criterion.
pub fn mie_default_terms(radius: f64, q: f64, k: f64) -> usize {
    let size = k * radius * (1.0 + q.max(0.0)).sqrt();
    (size + 4.0 * size.cbrt() + 20.0).ceil() as usize
}

pub fn mie_coefficients(radius: f64, q: f64, k: f64, n_terms: usize) -> Result<MieCoefficients> {
    if !(radius > 0.0) || !(q > -1.0) || !(k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Mie series needs radius > 0, q > -1, k > 0 (got {radius}, {q}, {k})"
        )));
    }
    let k1 = k * (1.0 + q).sqrt();
    let (x, x1) = (k * radius, k1 * radius);
    let j = bessel_j_sequence(n_terms + 1, x);
    let y = bessel_y_sequence(n_terms + 1, x);
    let j1 = bessel_j_sequence(n_terms + 1, x1);
    let dj = sequence_derivative(&j, x);
    let dy = sequence_derivative(&y, x);
    let dj1 = sequence_derivative(&j1, x1);
    let mut scattered = Vec::with_capacity(n_terms + 1);
    let mut interior = Vec::with_capacity(n_terms + 1);
    for n in 0..=n_terms {
        let h = Complex64::new(j[n], y[n]);
        let dh = Complex64::new(dj[n], dy[n]);
        // continuity of u and du/dr at r = a
        let det = k1 * dj1[n] * h - k * dh * j1[n];
        let b = (j1[n] * k * dj[n] - j[n] * k1 * dj1[n]) / det;
        // Wronskian J H' - J' H = 2i / (pi x)
        let c = Complex64::new(0.0, -2.0) / (std::f64::consts::PI * radius * det);
        scattered.push(if q == 0.0 { Complex64::default() } else { b });
        interior.push(if q == 0.0 { Complex64::new(1.0, 0.0) } else { c });
    }
    let total: f64 = scattered.iter().map(|b| b.norm()).sum();
    let last = scattered[n_terms].norm();
    if total > 0.0 && last > MIE_TRUNCATION * total {
        return Err(Error::SeriesNotConverged { n_terms, ratio: last / total });
    }
    Ok(MieCoefficients { scattered, interior, interior_wavenumber: k1 })
}

/// `u_inf(x_l; theta_m)` for the grid directions (not scaled by `2 pi / N`).
pub fn mie_far_field(radius: f64, q: f64, k: f64, dirs: &DirectionGrid, n_terms: usize) -> Result<Mat<Complex64>> {
    let coef = mie_coefficients(radius, q, k, n_terms)?;
    let n = dirs.len();
    // depends on (l - m) mod N only
    let pattern: Vec<Complex64> = (0..n)
        .map(|d| {
            let delta = dirs.angle(d);
            let mut s = coef.scattered[0];
            for (order, b) in coef.scattered.iter().enumerate().skip(1) {
                s += b * (2.0 * (order as f64 * delta).cos());
            }
            Complex64::new(0.0, -4.0) * s
        })
        .collect();
    Ok(Mat::from_fn(n, n, |l, m| pattern[(l + n - m) % n]))
}

/// Total field for the plane wave of direction angle `incident_angle` at `points`.
pub fn mie_total_field(
    radius: f64,
    q: f64,
    k: f64,
    incident_angle: f64,
    n_terms: usize,
    points: &[Point],
) -> Result<Vec<Complex64>> {
    let coef = mie_coefficients(radius, q, k, n_terms)?;
    let i_pow: Vec<Complex64> = (0..=n_terms).map(|n| Complex64::i().powu(n as u32)).collect();
    Ok(points
        .iter()
        .map(|p| {
            let r = p.norm();
            let delta = p.y.atan2(p.x) - incident_angle;
            let radial: Vec<Complex64> = if r < radius {
                let jn = bessel_j_sequence(n_terms, coef.interior_wavenumber * r);
                (0..=n_terms).map(|n| coef.interior[n] * jn[n]).collect()
            } else {
                let jn = bessel_j_sequence(n_terms, k * r);
                let yn = bessel_y_sequence(n_terms, k * r);
                (0..=n_terms).map(|n| jn[n] + coef.scattered[n] * Complex64::new(jn[n], yn[n])).collect()
            };
            let mut s = radial[0];
            for n in 1..=n_terms {
                s += i_pow[n] * radial[n] * (2.0 * (n as f64 * delta).cos());
            }
            s
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_contrast_gives_zero_far_field() {
        let dirs = DirectionGrid::new(16).unwrap();
        let f = mie_far_field(1.0, 0.0, 2.0, &dirs, 30).unwrap();
        for l in 0..16 {
            for m in 0..16 {
                assert_eq!(f[(l, m)], Complex64::default());
            }
        }
    }

    #[test]
    fn circulant_structure() {
        let dirs = DirectionGrid::new(32).unwrap();
        let f = mie_far_field(1.0, 1.0, 2.0, &dirs, mie_default_terms(1.0, 1.0, 2.0)).unwrap();
        for l in 0..32 {
            for m in 0..32 {
                assert_eq!(f[(l, m)], f[((l + 5) % 32, (m + 5) % 32)]);
            }
        }
    }

    #[test]
    fn coefficients_are_unitary() {
        // lossless scattering: |1 + 2 b_n| = 1
        let c = mie_coefficients(1.0, 1.0, 2.0, 40).unwrap();
        for b in &c.scattered {
            assert!(((Complex64::new(1.0, 0.0) + b * 2.0).norm() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn truncation_is_enforced() {
        assert!(matches!(mie_coefficients(1.0, 1.0, 5.0, 6), Err(Error::SeriesNotConverged { .. })));
    }

    #[test]
    fn field_is_continuous_across_the_interface() {
        let n = mie_default_terms(1.0, 1.0, 2.0);
        for &angle in &[0.0f64, 0.7, 2.0] {
            let inside = Point::new((1.0 - 1e-9) * angle.cos(), (1.0 - 1e-9) * angle.sin());
            let outside = Point::new((1.0 + 1e-9) * angle.cos(), (1.0 + 1e-9) * angle.sin());
            let u = mie_total_field(1.0, 1.0, 2.0, 0.3, n, &[inside, outside]).unwrap();
            assert!((u[0] - u[1]).norm() < 1e-7);
        }
    }

    #[test]
    fn far_field_matches_scattered_field_asymptotics() {
        // u^s(r x) sqrt(r) e^{-ikr} / C_2 -> u_inf(x), with u^s summed directly
        let (a, q, k) = (1.0, 1.0, 2.0);
        let n = mie_default_terms(a, q, k);
        let coef = mie_coefficients(a, q, k, n).unwrap();
        let dirs = DirectionGrid::new(8).unwrap();
        let f = mie_far_field(a, q, k, &dirs, n).unwrap();
        let r = 4.0e4;
        let jn = bessel_j_sequence(n, k * r);
        let yn = bessel_y_sequence(n, k * r);
        let c2 = Complex64::from_polar(1.0, PI / 4.0) / (8.0 * PI * k).sqrt();
        for l in 0..8 {
            let delta = dirs.angle(l);
            let mut scattered = coef.scattered[0] * Complex64::new(jn[0], yn[0]);
            for m in 1..=n {
                scattered += Complex64::i().powu(m as u32)
                    * coef.scattered[m]
                    * Complex64::new(jn[m], yn[m])
                    * (2.0 * (m as f64 * delta).cos());
            }
            let estimate = scattered * r.sqrt() * Complex64::from_polar(1.0, -k * r) / c2;
            assert!(
                (estimate - f[(l, 0)]).norm() < 1e-2 * f[(l, 0)].norm().max(1.0),
                "l={l}: {estimate} vs {}",
                f[(l, 0)]
            );
        }
    }
}
