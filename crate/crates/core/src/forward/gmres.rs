//! Restarted GMRES with modified Gram-Schmidt and Givens rotations.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const RESTART: usize = 50;

pub(crate) struct GmresOutcome {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(
    apply: &mut impl FnMut(&[Complex64], &mut [Complex64]),
    rhs: &[Complex64],
    x: &[Complex64],
    out: &mut Vec<Complex64>,
) {
    out.resize(x.len(), Complex64::default());
    apply(x, out);
    for (r, b) in out.iter_mut().zip(rhs) {
        *r = b - *r;
    }
}

/// Solves `A x = rhs` with `A` given by `apply(x, y)` writing `y = A x`.
/// Stops when the true residual satisfies `|r| <= tolerance * |rhs|`.
pub(crate) fn gmres(
    mut apply: impl FnMut(&[Complex64], &mut [Complex64]),
    rhs: &[Complex64],
    initial: Vec<Complex64>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<GmresOutcome> {
    let n = rhs.len();
    let rhs_norm = norm(rhs);
    let mut x = initial;
    if rhs_norm == 0.0 {
        return Ok(GmresOutcome { solution: vec![Complex64::default(); n], iterations: 0, relative_residual: 0.0 });
    }
    let target = tolerance * rhs_norm;
    let mut r = Vec::with_capacity(n);
    let mut w = vec![Complex64::default(); n];
    let mut iterations = 0;
    loop {
        residual(&mut apply, rhs, &x, &mut r);
        let beta = norm(&r);
        if beta <= target {
            return Ok(GmresOutcome { solution: x, iterations, relative_residual: beta / rhs_norm });
        }
        if iterations >= max_iterations {
            return Err(Error::NotConverged { iterations, residual: beta / rhs_norm });
        }

        let m = RESTART.min(n);
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns, rotated in place
        let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<Complex64> = Vec::with_capacity(m);
        let mut g = vec![Complex64::default(); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k = 0;
        while k < m && iterations < max_iterations {
            apply(&basis[k], &mut w);
            let mut col = vec![Complex64::default(); k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(v, &w);
                col[i] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            col[k + 1] = Complex64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i].conj() * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = Complex64::default();
            let t = c * g[k] + s * g[k + 1];
            g[k + 1] = -s.conj() * g[k] + c * g[k + 1];
            g[k] = t;
            cs.push(c);
            sn.push(s);
            h.push(col);
            iterations += 1;
            k += 1;
            if wn == 0.0 || g[k].norm() <= 0.5 * target {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution on the triangular k x k system
        let mut y = vec![Complex64::default(); k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
}

fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    if b.norm() == 0.0 {
        return (1.0, Complex64::default());
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let r = a.norm().hypot(b.norm());
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}
