//! Adaptive Dormand–Prince 5(4) integrator for real state vectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-9, atol: 1e-12 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator state that persists between calls to [`Dopri5::advance`], so
/// step-size information survives output checkpoints.
pub struct Dopri5 {
    pub tol: Tolerance,
    pub h: f64,
    pub h_min: f64,
    pub max_steps: usize,
    pub steps_taken: usize,
    pub rejected: usize,
    k: [Vec<f64>; 7],
    y_tmp: Vec<f64>,
    y_new: Vec<f64>,
    fsal: bool,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerance, h0: f64) -> Self {
        Dopri5 {
            tol,
            h: h0,
            h_min: 0.0,
            max_steps: 50_000_000,
            steps_taken: 0,
            rejected: 0,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            fsal: false,
        }
    }

    /// Integrates `y` from `t` to `t_end` in place; returns `t_end`.
    pub fn advance<F>(&mut self, f: &mut F, t: f64, t_end: f64, y: &mut [f64]) -> Result<f64>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let mut t = t;
        if t_end <= t {
            return Ok(t);
        }
        if !self.fsal {
            f(t, y, &mut self.k[0]);
            self.fsal = true;
        }
        while t < t_end {
            if self.steps_taken >= self.max_steps {
                return Err(Error::Accuracy { t, step: self.h });
            }
            let last = t + self.h >= t_end;
            let h = if last { t_end - t } else { self.h };

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let yt = &mut self.y_tmp;
            for i in 0..n {
                yt[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, yt, k2);
            for i in 0..n {
                yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, yt, k3);
            for i in 0..n {
                yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, yt, k4);
            for i in 0..n {
                yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, yt, k5);
            for i in 0..n {
                yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, yt, k6);
            let yn = &mut self.y_new;
            for i in 0..n {
                yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t + h, yn, k7);

            // Max norm: a few large components (accumulated phases) must not
            // hide behind many small ones.
            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(yn[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                err = 1e10;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t_end } else { t + h };
                y.copy_from_slice(yn);
                std::mem::swap(k1, k7);
                self.steps_taken += 1;
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
            } else {
                self.rejected += 1;
                self.h = h * factor.min(1.0);
                if self.h <= self.h_min || self.h < 1e-14 * t.abs().max(1e-300) {
                    return Err(Error::Accuracy { t, step: self.h });
                }
            }
        }
        Ok(t)
    }
}
