//! Special functions used by the Fourier–Bessel machinery and pulse shapes.
//!
//! Everything here is real-valued and dependency free.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Truncation control for infinite sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTolerance {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl SeriesTolerance {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(Error::invalid(format!("rel_tol {rel_tol} not in (0, 1e-6]")));
        }
        if max_terms < 32 {
            return Err(Error::invalid(format!("max_terms {max_terms} < 32")));
        }
        Ok(SeriesTolerance { rel_tol, max_terms })
    }
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        SeriesTolerance { rel_tol: 1e-15, max_terms: 10_000 }
    }
}

/// Largest |x| accepted by the Bessel routines.
pub const BESSEL_MAX_ARG: f64 = 1e4;
/// Largest order accepted by [`bessel_j`].
pub const BESSEL_MAX_ORDER: i64 = 64;

/// Bessel function of the first kind of integer order.
///
/// Negative orders use J_{-k}(x) = (-1)^k J_k(x).
pub fn bessel_j(k: i64, x: f64) -> Result<f64> {
    if k.abs() > BESSEL_MAX_ORDER {
        return Err(Error::domain(format!("Bessel order {k} exceeds {BESSEL_MAX_ORDER}")));
    }
    let n = k.unsigned_abs() as usize;
    let all = bessel_j_all(n, x)?;
    let v = all[n];
    Ok(if k < 0 && n % 2 == 1 { -v } else { v })
}

/// J_0(x), ..., J_kmax(x) in one downward sweep.
///
/// Miller's algorithm: recur downward from an order well above both `kmax`
/// and |x|, then normalize with J_0 + 2 Σ J_{2m} = 1. The recurrence is
/// stable downward for every order, including the oscillatory region k < x,
/// so no separate large-argument branch is needed.
pub fn bessel_j_all(kmax: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x.abs() >= BESSEL_MAX_ARG {
        return Err(Error::domain(format!("Bessel argument {x} outside |x| < {BESSEL_MAX_ARG}")));
    }
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let ax = x.abs();
    let top = (kmax as f64).max(ax.ceil());
    let mut m = (top + 30.0 + (80.0 * top).sqrt()) as usize;
    m += m % 2;

    const BIG: f64 = 1e250;
    const RESCALE: f64 = 1e-250;
    let two_over_x = 2.0 / ax;
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-30; // J_k
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let j_prev = k as f64 * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let idx = k - 1;
        if idx <= kmax {
            out[idx] = j_cur;
        }
        if idx % 2 == 0 {
            norm += if idx == 0 { j_cur } else { 2.0 * j_cur };
        }
        if j_cur.abs() > BIG {
            j_cur *= RESCALE;
            j_next *= RESCALE;
            norm *= RESCALE;
            for v in out.iter_mut() {
                *v *= RESCALE;
            }
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    Ok(out)
}

/// Pochhammer symbol a(a+1)…(a+n−1); the empty product for n = 0 is 1.
pub fn rising_factorial(a: f64, n: u32) -> f64 {
    let mut p = 1.0;
    for i in 0..n {
        p *= a + i as f64;
    }
    p
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) for 0 ≤ z < 1 by direct series.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64, tol: SeriesTolerance) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::domain(format!("hyp2f1 argument z={z} outside [0, 1)")));
    }
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(Error::domain(format!("hyp2f1 parameter c={c} is a non-positive integer")));
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..tol.max_terms {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.abs() <= tol.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Convergence { what: format!("hyp2f1({a}, {b}; {c}; {z})"), iterations: tol.max_terms })
}

/// Error function, accurate to ~1e-15 absolute.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let v = if ax < 3.0 { erf_series(ax) } else { 1.0 - erfc_cf(ax) };
    v.copysign(x)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x >= 3.0 {
        erfc_cf(x)
    } else {
        1.0 - erf(x)
    }
}

// erf(x) = 2/√π e^{-x²} Σ 2^n x^{2n+1} / (2n+1)!!  (all terms positive)
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-17 * sum {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    std::f64::consts::FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))) for x ≥ 3,
// evaluated with the modified Lentz scheme.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..200 {
        let a = n as f64 * 0.5;
        d = x + a * d;
        d = if d.abs() < TINY { TINY } else { d };
        c = x + a / c;
        c = if c.abs() < TINY { TINY } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
}
