//! Ideal-CZ comparison of two treatments of slow flux noise: averaging the
//! coherent dynamics over sampled noise trajectories, and the master
//! equation with the time-dependent rate 2βt^{β−1}Γ^β.
//!
//! Five levels: |00⟩, |01⟩, |10⟩, |11⟩ and the auxiliary level (|02⟩ for
//! CZ02, |20⟩ for CZ20) resonantly coupled to |11⟩ at g_eff. The noise shifts
//! each level by δω_T times its tunable-qubit dephasing weight (0, 1, 0, 1,
//! 2Λ or 0).

use super::process::{Block, ProcessMatrix};
use super::{average_fidelity, GateKind};
use crate::error::{Error, Result};
use crate::noise::synth_fgn;
use crate::ode::{Dopri5, Tolerance};
use crate::seed;
use crate::TWO_PI;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    /// Ramsey 1/e time of the noise (s).
    pub t_phi: f64,
    /// Ramsey decay exponent, exp(−(t/T_φ)^β); must lie in (1, 2).
    pub beta: f64,
    /// Sets the trajectory time step, 1/(20 f_m).
    pub f_m_hz: f64,
    pub lambda_qutrit: f64,
    pub n_traj: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessRow {
    pub tcz_over_tphi: f64,
    pub f_me: f64,
    pub f_avg_coherent: f64,
    /// NaN outside the small-t_CZ regime.
    pub f_asymptotic: f64,
    pub gate: GateKind,
}

fn weights(gate: GateKind, lambda: f64) -> Result<[f64; 5]> {
    match gate {
        GateKind::Cz02 => Ok([0.0, 1.0, 0.0, 1.0, 2.0 * lambda]),
        GateKind::Cz20 => Ok([0.0, 1.0, 0.0, 1.0, 0.0]),
        _ => Err(Error::invalid("the coherent-average harness covers CZ02 and CZ20 only")),
    }
}

/// 1 − c (t_CZ/T_φ)^β with c = 61/80 (CZ02) or 29/80 (CZ20).
pub fn asymptotic_fidelity(t_cz: f64, t_phi: f64, beta: f64, gate: GateKind) -> Result<f64> {
    let r = t_cz / t_phi;
    if !(r >= 0.0 && r < 0.2) {
        return Err(Error::domain(format!("t_cz/t_phi = {r} outside the small-time regime [0, 0.2)")));
    }
    let c = match gate {
        GateKind::Cz02 => 61.0 / 80.0,
        GateKind::Cz20 => 29.0 / 80.0,
        _ => return Err(Error::invalid("asymptotic form exists for CZ02 and CZ20 only")),
    };
    Ok(1.0 - c * r.powf(beta))
}

// exp(−iH dt) for H = [[h0, g], [g, h1]].
fn step2(h0: f64, h1: f64, g: f64, dt: f64) -> [[Complex64; 2]; 2] {
    let c = 0.5 * (h0 + h1);
    let d = 0.5 * (h0 - h1);
    let r = (d * d + g * g).sqrt();
    let (s, co) = (r * dt).sin_cos();
    let sr = if r > 0.0 { s / r } else { dt };
    let ph = Complex64::cis(-c * dt);
    let i = Complex64::new(0.0, 1.0);
    [[ph * (co - i * sr * d), ph * (-i * sr * g)], [ph * (-i * sr * g), ph * (co + i * sr * d)]]
}

fn to_process(m: &[[Complex64; 4]; 4], t: f64) -> ProcessMatrix {
    let outputs: [[Block; 4]; 4] = std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
            e[a][b] = m[a][b];
            e
        })
    });
    ProcessMatrix::from_outputs(&outputs, f64::NAN, t)
}

fn coherent_average(cfg: &HarnessConfig, w: &[f64; 5], g: f64, t_cz: f64, tag: u64) -> Result<f64> {
    let n = ((20.0 * cfg.f_m_hz * t_cz).ceil() as usize).max(200);
    let dt = t_cz / n as f64;
    let hurst = 0.5 * cfg.beta;
    let kappa = (2.0 / cfg.t_phi.powf(cfg.beta)).sqrt();
    let chunks: Vec<Result<[[Complex64; 4]; 4]>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|r| {
            let x = synth_fgn(hurst, dt, n, seed::derive(cfg.seed, "harness", tag * 1_000_003 + r as u64))?.samples;
            let mut phase01 = 0.0;
            let (mut a, mut b) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
            for &xi in &x {
                let dphi = kappa * xi;
                phase01 += w[1] * dphi;
                let dw = dphi / dt;
                let u = step2(w[3] * dw, w[4] * dw, g, dt);
                (a, b) = (u[0][0] * a + u[0][1] * b, u[1][0] * a + u[1][1] * b);
            }
            let k = [Complex64::new(1.0, 0.0), Complex64::cis(-phase01), Complex64::new(1.0, 0.0), a];
            Ok(std::array::from_fn(|i| std::array::from_fn(|j| k[i] * k[j].conj())))
        })
        .collect();
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for c in chunks {
        let c = c?;
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] += c[i][j];
            }
        }
    }
    let inv = 1.0 / cfg.n_traj as f64;
    m.iter_mut().flatten().for_each(|z| *z *= inv);
    Ok(average_fidelity(&to_process(&m, t_cz), GateKind::Cz02, false).fidelity)
}

fn master_equation(cfg: &HarnessConfig, w: &[f64; 5], g: f64, t_cz: f64) -> Result<f64> {
    const D: usize = 5;
    let gamma = 1.0 / cfg.t_phi;
    let beta = cfg.beta;
    let mut y = vec![0.0; 16 * D * D * 2];
    for a in 0..4 {
        for b in 0..4 {
            let k = 4 * a + b;
            y[2 * (D * D * k + D * a + b)] = 1.0;
        }
    }
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let rate = if t > 0.0 { beta * t.powf(beta - 1.0) * gamma.powf(beta) } else { 0.0 };
        for k in 0..16 {
            let base = D * D * k;
            let rho = |a: usize, b: usize| Complex64::new(y[2 * (base + D * a + b)], y[2 * (base + D * a + b) + 1]);
            for a in 0..D {
                for b in 0..D {
                    // −i[H, ρ] with H = g(|3⟩⟨4| + |4⟩⟨3|).
                    let mut hr = Complex64::new(0.0, 0.0);
                    if a == 3 {
                        hr += g * rho(4, b);
                    } else if a == 4 {
                        hr += g * rho(3, b);
                    }
                    if b == 3 {
                        hr -= g * rho(a, 4);
                    } else if b == 4 {
                        hr -= g * rho(a, 3);
                    }
                    let z = Complex64::new(hr.im, -hr.re) - rate * (w[a] - w[b]).powi(2) * rho(a, b);
                    dy[2 * (base + D * a + b)] = z.re;
                    dy[2 * (base + D * a + b) + 1] = z.im;
                }
            }
        }
    };
    let mut solver = Dopri5::new(y.len(), Tolerance { rtol: 1e-10, atol: 1e-13 }, 1e-12);
    solver.advance(&mut rhs, 0.0, t_cz, &mut y)?;
    let outputs: [[Block; 4]; 4] = std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let k = 4 * a + b;
            std::array::from_fn(|r| std::array::from_fn(|c| Complex64::new(y[2 * (D * D * k + D * r + c)], y[2 * (D * D * k + D * r + c) + 1])))
        })
    });
    Ok(average_fidelity(&ProcessMatrix::from_outputs(&outputs, f64::NAN, t_cz), GateKind::Cz02, false).fidelity)
}

/// For each g_eff (Hz), a CZ of duration t_CZ = π/g_eff evaluated by
/// trajectory averaging and by the master equation, against the ideal CZ.
///
/// Trajectories use fractional Gaussian noise with Hurst exponent β/2,
/// scaled so that the Ramsey coherence is exactly exp(−(t/T_φ)^β).
pub fn coherent_noise_average(cfg: &HarnessConfig, gate: GateKind, geff_hz_grid: &[f64]) -> Result<Vec<HarnessRow>> {
    if !(cfg.t_phi > 0.0 && cfg.beta > 1.0 && cfg.beta < 2.0 && cfg.f_m_hz > 0.0 && cfg.n_traj > 0 && cfg.lambda_qutrit > 0.0) {
        return Err(Error::invalid(format!("harness config needs t_phi > 0, 1 < beta < 2, f_m > 0, n_traj > 0: {cfg:?}")));
    }
    let w = weights(gate, cfg.lambda_qutrit)?;
    geff_hz_grid
        .iter()
        .enumerate()
        .map(|(i, &g_hz)| {
            if !(g_hz > 0.0) {
                return Err(Error::invalid(format!("g_eff must be positive, got {g_hz}")));
            }
            let g = TWO_PI * g_hz;
            let t_cz = std::f64::consts::PI / g;
            let f_avg = coherent_average(cfg, &w, g, t_cz, i as u64)?;
            let f_me = master_equation(cfg, &w, g, t_cz)?;
            let f_asym = asymptotic_fidelity(t_cz, cfg.t_phi, cfg.beta, gate).unwrap_or(f64::NAN);
            Ok(HarnessRow { tcz_over_tphi: t_cz / cfg.t_phi, f_me, f_avg_coherent: f_avg, f_asymptotic: f_asym, gate })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_traj: usize) -> HarnessConfig {
        HarnessConfig { t_phi: 18e-6, beta: 1.9, f_m_hz: 3e8, lambda_qutrit: 1.0, n_traj, seed: 5 }
    }

    #[test]
    fn asymptotic_examples() {
        let f = asymptotic_fidelity(0.01, 1.0, 1.9, GateKind::Cz02).unwrap();
        assert!(((1.0 - f) - 0.7625 * 0.01f64.powf(1.9)).abs() < 1e-15);
        assert!((1.0 - f - 1.2085e-4).abs() < 0.001e-4);
        let f20 = asymptotic_fidelity(0.01, 1.0, 1.9, GateKind::Cz20).unwrap();
        assert!(((1.0 - f) / (1.0 - f20) - 61.0 / 29.0).abs() < 1e-12);
        assert_eq!(asymptotic_fidelity(0.0, 1.0, 1.9, GateKind::Cz02).unwrap(), 1.0);
        assert!(asymptotic_fidelity(0.3, 1.0, 1.9, GateKind::Cz02).is_err());
    }

    #[test]
    fn noiseless_cz_is_exact() {
        let c = HarnessConfig { t_phi: 1e9, ..cfg(4) };
        let rows = coherent_noise_average(&c, GateKind::Cz02, &[5e6]).unwrap();
        assert!((rows[0].f_avg_coherent - 1.0).abs() < 1e-9);
        assert!((rows[0].f_me - 1.0).abs() < 1e-9);
    }

    #[test]
    fn step_matches_rotation() {
        let u = step2(0.0, 0.0, 1.0, std::f64::consts::FRAC_PI_2);
        assert!((u[0][1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let u = step2(2.0, -1.0, 0.0, 0.3);
        assert!((u[0][0] - Complex64::cis(-0.6)).norm() < 1e-15 && (u[1][1] - Complex64::cis(0.3)).norm() < 1e-15);
    }
}
