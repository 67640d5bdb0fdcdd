//! Bessel and Hankel functions of integer order for real positive arguments.
//!
//! `J_0, J_1, Y_0, Y_1` use the ascending power series for small arguments,
//! Neumann series over Miller-recurrence values of `J_n` on
//! `[SERIES_LIMIT, ASYMPTOTIC_SWITCH)` where the power series cancels badly,
//! and the Hankel asymptotic expansion (truncated at its smallest term) above.
//! Integer-order sequences use Miller's backward recurrence for `J_n` (forward
//! recurrence for large arguments) and forward recurrence for `Y_n`.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// Argument at which the power series hands over to the asymptotic expansion.
pub const ASYMPTOTIC_SWITCH: f64 = 12.0;

/// Upper end of the ascending power series.
pub const SERIES_LIMIT: f64 = 8.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn bessel_j0(x: f64) -> f64 {
    let a = x.abs();
    if a < SERIES_LIMIT {
        series_j(0, x)
    } else if a < ASYMPTOTIC_SWITCH {
        miller_j_sequence(1, a)[0]
    } else {
        hankel_asymptotic(0, a).re
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let a = x.abs();
    if a < SERIES_LIMIT {
        series_j(1, x)
    } else if a < ASYMPTOTIC_SWITCH {
        x.signum() * miller_j_sequence(1, a)[1]
    } else {
        x.signum() * hankel_asymptotic(1, a).re
    }
}

/// `Y_0(x)` for `x > 0`.
pub fn bessel_y0(x: f64) -> f64 {
    hankel1_0(x).im
}

/// `Y_1(x)` for `x > 0`.
pub fn bessel_y1(x: f64) -> f64 {
    hankel1_1(x).im
}

/// `H_0^{(1)}(x) = J_0(x) + i Y_0(x)` for `x > 0`.
pub fn hankel1_0(x: f64) -> Complex64 {
    debug_assert!(x > 0.0);
    if x < SERIES_LIMIT {
        Complex64::new(series_j(0, x), series_y0(x))
    } else if x < ASYMPTOTIC_SWITCH {
        neumann(x).0
    } else {
        hankel_asymptotic(0, x)
    }
}

/// `H_1^{(1)}(x) = J_1(x) + i Y_1(x)` for `x > 0`.
pub fn hankel1_1(x: f64) -> Complex64 {
    debug_assert!(x > 0.0);
    if x < SERIES_LIMIT {
        Complex64::new(series_j(1, x), series_y1(x))
    } else if x < ASYMPTOTIC_SWITCH {
        neumann(x).1
    } else {
        hankel_asymptotic(1, x)
    }
}

// Y_0 = (2/pi)(ln(x/2) + gamma) J_0 - (4/pi) sum_k (-1)^k J_{2k} / k
// Y_1 = -Y_0' = -(2/pi) J_0 / x + (2/pi)(ln(x/2) + gamma) J_1
//       + (2/pi) sum_k (-1)^k (J_{2k-1} - J_{2k+1}) / k
fn neumann(x: f64) -> (Complex64, Complex64) {
    let n_max = x as usize + 40;
    let j = miller_j_sequence(n_max, x);
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k < n_max {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * log_term * j[0] - 4.0 / PI * s0;
    let y1 = -2.0 / PI * j[0] / x + 2.0 / PI * log_term * j[1] + 2.0 / PI * s1;
    (Complex64::new(j[0], y0), Complex64::new(j[1], y1))
}

// J_n(x) = sum_m (-1)^m (x/2)^(2m+n) / (m! (m+n)!), n in {0, 1}.
fn series_j(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let z = -half * half;
    let mut term = if n == 0 { 1.0 } else { half };
    let mut sum = term;
    let mut m = 1.0;
    loop {
        term *= z / (m * (m + n as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && m > half {
            break;
        }
        m += 1.0;
    }
    sum
}

fn series_y0(x: f64) -> f64 {
    let half = 0.5 * x;
    let z = -half * half;
    // sum_{m>=1} (-1)^(m+1) H_m (x/2)^(2m) / (m!)^2
    let mut base = 1.0;
    let mut harmonic = 0.0;
    let mut tail = 0.0;
    let mut m = 1.0;
    loop {
        base *= z / (m * m);
        harmonic += 1.0 / m;
        let term = -base * harmonic;
        tail += term;
        if term.abs() <= 1e-17 * tail.abs() && m > half {
            break;
        }
        m += 1.0;
    }
    2.0 / PI * ((half.ln() + EULER_GAMMA) * series_j(0, x) + tail)
}

fn series_y1(x: f64) -> f64 {
    let half = 0.5 * x;
    let z = -half * half;
    // sum_{m>=0} (psi(m+1) + psi(m+2)) (-z)^m ... with psi(m+1) = -gamma + H_m
    let mut base = half;
    let mut h_m = 0.0;
    let mut tail = base * (2.0 * (-EULER_GAMMA) + 1.0);
    let mut m = 1.0;
    loop {
        base *= z / (m * (m + 1.0));
        h_m += 1.0 / m;
        let h_m1 = h_m + 1.0 / (m + 1.0);
        let term = base * (h_m + h_m1 - 2.0 * EULER_GAMMA);
        tail += term;
        if term.abs() <= 1e-17 * tail.abs() && m > half {
            break;
        }
        m += 1.0;
    }
    -2.0 / (PI * x) + 2.0 / PI * half.ln() * series_j(1, x) - tail / PI
}

/// Hankel expansion `H_n(x) ~ sqrt(2/(pi x)) e^{i(x - n pi/2 - pi/4)} sum_k i^k a_k(n) / x^k`,
/// summed up to (excluding) the smallest term.
fn hankel_asymptotic(n: u32, x: f64) -> Complex64 {
    let mu = 4.0 * (n * n) as f64;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut coef = 1.0;
    let mut ik = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = coef * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= last || next == 0.0 {
            break;
        }
        coef = next;
        last = next.abs();
        ik *= Complex64::i();
        sum += ik * coef;
        if last < 1e-17 {
            break;
        }
    }
    let phase = x - n as f64 * FRAC_PI_2 - FRAC_PI_4;
    Complex64::from_polar((2.0 / (PI * x)).sqrt(), phase) * sum
}

/// `J_0(x), ..., J_{n_max}(x)` for `x >= 0`: forward recurrence when all
/// orders lie below a large argument, Miller's backward recurrence otherwise.
pub fn bessel_j_sequence(n_max: usize, x: f64) -> Vec<f64> {
    if x < ASYMPTOTIC_SWITCH || x <= n_max as f64 {
        return miller_j_sequence(n_max, x);
    }
    let mut out = vec![0.0; n_max + 1];
    out[0] = bessel_j0(x);
    if n_max >= 1 {
        out[1] = bessel_j1(x);
    }
    for n in 1..n_max {
        out[n + 1] = 2.0 * n as f64 / x * out[n] - out[n - 1];
    }
    out
}

// Normalized with J_0 + 2 sum_k J_{2k} = 1, which cancels badly for large x.
fn miller_j_sequence(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = n_max.max(x.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut next = 0.0f64; // J_{m+1}
    let mut cur = 1e-300f64; // J_m
    let mut norm = 0.0;
    for m in (1..=start).rev() {
        let prev = 2.0 * m as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur = J_{m-1}
        let idx = m - 1;
        if idx <= n_max {
            out[idx] = cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `Y_0(x), ..., Y_{n_max}(x)` for `x > 0` by forward recurrence.
pub fn bessel_y_sequence(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(bessel_y0(x));
    if n_max >= 1 {
        out.push(bessel_y1(x));
    }
    for n in 1..n_max {
        let v = 2.0 * n as f64 / x * out[n] - out[n - 1];
        out.push(v);
    }
    out
}

/// Derivatives `Z_n'(x) = Z_{n-1}(x) - (n/x) Z_n(x)` (with `Z_0' = -Z_1`) from a
/// sequence `Z_0..=Z_{n_max+1}`.
pub fn sequence_derivative<T>(values: &[T], x: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    let n_max = values.len() - 1;
    (0..n_max).map(|n| if n == 0 { -values[1] } else { values[n - 1] - values[n] * (n as f64 / x) }).collect()
}
