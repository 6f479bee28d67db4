//! Lindblad and Schrödinger integration of the 9-level system.
//!
//! Integration runs in the interaction frame of the full diagonal
//! Hamiltonian, U_d(t) = exp(−i∫H_diag), which is exact: the frame phases
//! Θ_a(t) are carried as two extra ODE components (∫ω_T and ∫η_T) and every
//! result is rotated back to the lab frame at output times. Only the coupling
//! and jump operators pick up phase factors e^{i(Θ_a − Θ_b)}; diagonal
//! dissipators are frame-invariant.

use super::process::{Block, ProcessMatrix};
use super::{DecoherenceConfig, TwoQubitSystem};
use crate::error::{Error, Result};
use crate::modulation::{check_excursion, ModulationSpec};
use crate::ode::{Dopri5, Tolerance};
use num_complex::Complex64;
use std::f64::consts::SQRT_2;

pub(crate) const DIM: usize = 9;
/// Flat indices of |00⟩, |01⟩, |10⟩, |11⟩.
pub(crate) const COMPUTATIONAL: [usize; 4] = [0, 1, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub tol: Tolerance,
    /// First trial step (s).
    pub h0: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { tol: Tolerance::default(), h0: 1e-12 }
    }
}

/// Lab-frame amplitudes of several evolved states at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateColumns {
    pub t: f64,
    /// One 9-vector per input state.
    pub psi: Vec<[Complex64; DIM]>,
}

impl StateColumns {
    pub fn population(&self, column: usize, level: usize) -> f64 {
        self.psi[column][level].norm_sqr()
    }
}

#[inline]
fn level_f(a: usize) -> usize {
    a / 3
}

#[inline]
fn level_t(a: usize) -> usize {
    a % 3
}

// Lowering-operator matrix elements ⟨n−1|σ|n⟩ for n = 1, 2.
const LOWER: [f64; 2] = [1.0, SQRT_2];

struct Model<'a> {
    sys: &'a TwoQubitSystem,
    modu: &'a ModulationSpec,
    /// Nonzero entries (a, b, V_ab) of g (σ_F + σ_F†)(σ_T + σ_T†).
    coupling: Vec<(usize, usize, f64)>,
}

impl<'a> Model<'a> {
    fn new(sys: &'a TwoQubitSystem, modu: &'a ModulationSpec) -> Result<Self> {
        sys.validate()?;
        modu.validate()?;
        check_excursion(&sys.tunable, modu.phi_dc, modu.phi_ac)?;
        let x = |p: usize, q: usize| match (p.min(q), p.max(q)) {
            (0, 1) => 1.0,
            (1, 2) => SQRT_2,
            _ => 0.0,
        };
        let mut coupling = Vec::new();
        for a in 0..DIM {
            for b in 0..DIM {
                let v = sys.g * x(level_f(a), level_f(b)) * x(level_t(a), level_t(b));
                if v != 0.0 {
                    coupling.push((a, b, v));
                }
            }
        }
        Ok(Model { sys, modu, coupling })
    }

    /// ω_T and η_T at time t.
    #[inline]
    fn drive(&self, t: f64) -> (f64, f64) {
        let phi = self.modu.flux(t);
        (self.sys.tunable.frequency_unchecked(phi), self.sys.tunable.anharmonicity_unchecked(phi))
    }

    /// e^{iΘ_a} from the accumulated tunable phases.
    fn frame(&self, t: f64, omega_int: f64, eta_int: f64) -> [Complex64; DIM] {
        let wf = self.sys.fixed_f;
        let tf = [0.0, wf * t, (2.0 * wf - self.sys.fixed_eta) * t];
        let tt = [0.0, omega_int, 2.0 * omega_int - eta_int];
        std::array::from_fn(|a| Complex64::cis(tf[level_f(a)] + tt[level_t(a)]))
    }
}

#[inline]
fn get(y: &[f64], i: usize) -> Complex64 {
    Complex64::new(y[2 * i], y[2 * i + 1])
}

#[inline]
fn put(dy: &mut [f64], i: usize, z: Complex64) {
    dy[2 * i] = z.re;
    dy[2 * i + 1] = z.im;
}

/// Schrödinger evolution of the given basis states (flat level indices),
/// with lab-frame snapshots at each of `times` (ascending, within [0, t_f]).
pub fn evolve_columns(
    sys: &TwoQubitSystem,
    modu: &ModulationSpec,
    inputs: &[usize],
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<StateColumns>> {
    let model = Model::new(sys, modu)?;
    if inputs.iter().any(|&a| a >= DIM) {
        return Err(Error::invalid(format!("input level out of range: {inputs:?}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0 || t > modu.t_f) {
        return Err(Error::invalid("snapshot times must be ascending within the pulse"));
    }
    let n_in = inputs.len();
    let mut y = vec![0.0; 2 + 2 * DIM * n_in];
    for (k, &a) in inputs.iter().enumerate() {
        y[2 + 2 * (DIM * k + a)] = 1.0;
    }
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (w, e) = model.drive(t);
        dy[0] = w;
        dy[1] = e;
        let u = model.frame(t, y[0], y[1]);
        let (ys, dys) = (&y[2..], &mut dy[2..]);
        for k in 0..n_in {
            let base = DIM * k;
            let mut acc = [Complex64::new(0.0, 0.0); DIM];
            for &(a, b, v) in &model.coupling {
                acc[a] += v * u[a] * u[b].conj() * get(ys, base + b);
            }
            for a in 0..DIM {
                put(dys, base + a, Complex64::new(acc[a].im, -acc[a].re));
            }
        }
    };
    let mut solver = Dopri5::new(y.len(), opts.tol, opts.h0);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t_out in times {
        t = solver.advance(&mut rhs, t, t_out, &mut y)?;
        let u = model.frame(t, y[0], y[1]);
        let psi = (0..n_in)
            .map(|k| std::array::from_fn(|a| u[a].conj() * get(&y[2..], DIM * k + a)))
            .collect();
        out.push(StateColumns { t, psi });
    }
    Ok(out)
}

/// Lindblad evolution of the computational operator basis |a⟩⟨b| through the
/// full pulse; returns the Pauli transfer matrix on the computational
/// subspace (trace lost to |2⟩ levels shows up as leakage).
pub fn evolve_process(
    sys: &TwoQubitSystem,
    modu: &ModulationSpec,
    dec: &DecoherenceConfig,
    opts: &EvolveOptions,
) -> Result<ProcessMatrix> {
    dec.validate()?;
    let model = Model::new(sys, modu)?;
    const N2: usize = DIM * DIM;
    const N_IN: usize = 16;

    // Static elementwise decay of ρ_ab, and the weight of the 1/f term.
    let nf = |a: usize| level_f(a) as f64;
    let nt = |a: usize| level_t(a) as f64;
    let ell = |a: usize| match level_t(a) {
        0 => 0.0,
        1 => 1.0,
        _ => 2.0 * dec.lambda_qutrit,
    };
    let mut decay = [0.0; N2];
    let mut pink_w = [0.0; N2];
    for a in 0..DIM {
        for b in 0..DIM {
            let dl = (ell(a) - ell(b)).powi(2);
            decay[DIM * a + b] = 0.5 * sys.gamma1_f * (nf(a) + nf(b))
                + 0.5 * sys.gamma1_t * (nt(a) + nt(b))
                + sys.gammaphi_f * (nf(a) - nf(b)).powi(2)
                + dec.gammaphi_w * dl
                + sys.gammaphi_bkgd * (nt(a) - nt(b)).powi(2);
            pink_w[DIM * a + b] = dl;
        }
    }
    let pink_rate = |t: f64| {
        if dec.gammaphi_pink == 0.0 || t <= 0.0 {
            0.0
        } else {
            dec.beta * t.powf(dec.beta - 1.0) * dec.gammaphi_pink.powf(dec.beta)
        }
    };
    // Jump targets: ρ_ab picks up ρ_{a↑,b↑} through σ ρ σ†.
    let up_f: Vec<usize> = (0..DIM).filter(|&a| level_f(a) < 2).collect();
    let up_t: Vec<usize> = (0..DIM).filter(|&a| level_t(a) < 2).collect();

    let mut y = vec![0.0; 2 + 2 * N2 * N_IN];
    for (k, (a, b)) in basis_pairs().enumerate() {
        y[2 + 2 * (N2 * k + DIM * a + b)] = 1.0;
    }
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (w, e) = model.drive(t);
        dy[0] = w;
        dy[1] = e;
        let u = model.frame(t, y[0], y[1]);
        let v_i: Vec<(usize, usize, Complex64)> =
            model.coupling.iter().map(|&(a, b, v)| (a, b, v * u[a] * u[b].conj())).collect();
        let mut jf = [Complex64::new(0.0, 0.0); DIM];
        for &a in &up_f {
            jf[a] = (sys.gamma1_f.sqrt() * LOWER[level_f(a)]) * u[a] * u[a + 3].conj();
        }
        let mut jt = [Complex64::new(0.0, 0.0); DIM];
        for &a in &up_t {
            jt[a] = (sys.gamma1_t.sqrt() * LOWER[level_t(a)]) * u[a] * u[a + 1].conj();
        }
        let rp = pink_rate(t);
        let (ys, dys) = (&y[2..], &mut dy[2..]);
        for k in 0..N_IN {
            let base = N2 * k;
            let rho = |a: usize, b: usize| get(ys, base + DIM * a + b);
            let mut d = [Complex64::new(0.0, 0.0); N2];
            // −i[V, ρ]
            for &(a, c, v) in &v_i {
                for b in 0..DIM {
                    d[DIM * a + b] += v * rho(c, b);
                    // (ρV)_{b c'} with V_{a c}: element (b, c) gets ρ_{b a} V_{a c}.
                    d[DIM * b + c] -= rho(b, a) * v;
                }
            }
            for z in d.iter_mut() {
                *z = Complex64::new(z.im, -z.re);
            }
            if sys.gamma1_f > 0.0 {
                for &a in &up_f {
                    for &b in &up_f {
                        d[DIM * a + b] += jf[a] * rho(a + 3, b + 3) * jf[b].conj();
                    }
                }
            }
            if sys.gamma1_t > 0.0 {
                for &a in &up_t {
                    for &b in &up_t {
                        d[DIM * a + b] += jt[a] * rho(a + 1, b + 1) * jt[b].conj();
                    }
                }
            }
            for i in 0..N2 {
                let z = d[i] - (decay[i] + rp * pink_w[i]) * get(ys, base + i);
                put(dys, base + i, z);
            }
        }
    };
    let mut solver = Dopri5::new(y.len(), opts.tol, opts.h0);
    solver.advance(&mut rhs, 0.0, modu.t_f, &mut y)?;

    let u = model.frame(modu.t_f, y[0], y[1]);
    let mut outputs = [[[[Complex64::new(0.0, 0.0); 4]; 4]; 4]; 4];
    for (k, (a, b)) in basis_pairs().enumerate() {
        let (qa, qb) = (k / 4, k % 4);
        debug_assert_eq!((COMPUTATIONAL[qa], COMPUTATIONAL[qb]), (a, b));
        let block: &mut Block = &mut outputs[qa][qb];
        for (i, &c) in COMPUTATIONAL.iter().enumerate() {
            for (j, &e) in COMPUTATIONAL.iter().enumerate() {
                block[i][j] = u[c].conj() * u[e] * get(&y[2..], N2 * k + DIM * c + e);
            }
        }
    }
    Ok(ProcessMatrix::from_outputs(&outputs, modu.f_m_hz, modu.t_f))
}

fn basis_pairs() -> impl Iterator<Item = (usize, usize)> {
    COMPUTATIONAL.iter().flat_map(|&a| COMPUTATIONAL.iter().map(move |&b| (a, b)))
}

#[cfg(test)]
mod tests {
    use super::super::tests::device;
    use super::super::GateKind;
    use super::super::process::average_fidelity;
    use super::*;

    fn idle(t_f: f64) -> ModulationSpec {
        ModulationSpec { phi_dc: 0.0, phi_ac: 0.0, f_m_hz: 3e8, theta_m: 0.0, t_ramp: 0.0, t_f }
    }

    fn decoupled() -> TwoQubitSystem {
        // Far below any resonance so the residual exchange is negligible.
        TwoQubitSystem { g: 1e-3, ..device().0 }
    }

    #[test]
    fn uncoupled_idle_is_identity_up_to_z() {
        let sys = decoupled();
        let p = evolve_process(&sys, &idle(100e-9), &DecoherenceConfig::none(), &EvolveOptions::default()).unwrap();
        let r = average_fidelity(&p, GateKind::Identity, true);
        assert!((r.fidelity - 1.0).abs() < 1e-6, "{}", r.fidelity);
        assert!(r.leakage.abs() < 1e-8);
        let row0 = &p.entries[0];
        assert!((row0[0] - 1.0).abs() < 1e-6 && row0[1..].iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn fixed_qubit_relaxation_closed_form() {
        let sys = TwoQubitSystem { gamma1_f: 1e5, ..decoupled() };
        let t_f = 5e-6;
        let p = evolve_process(&sys, &idle(t_f), &DecoherenceConfig::none(), &EvolveOptions::default()).unwrap();
        let pops = p.populations_from(2);
        let want = (-1e5 * t_f).exp();
        assert!((pops[2] - want).abs() < 1e-8, "{} vs {want}", pops[2]);
        assert!((pops[0] - (1.0 - want)).abs() < 1e-8);
    }

    #[test]
    fn tunable_dephasing_closed_form() {
        let sys = TwoQubitSystem { gammaphi_bkgd: 2e5, ..decoupled() };
        let t_f = 3e-6;
        let p = evolve_process(&sys, &idle(t_f), &DecoherenceConfig::none(), &EvolveOptions::default()).unwrap();
        let r = average_fidelity(&p, GateKind::Identity, true);
        // Coherence |ρ01| of the tunable qubit equals the X/Y transfer magnitude.
        let c = p.transverse_t();
        let want = (-2e5 * t_f).exp();
        assert!((c - want).abs() < 1e-8, "{c} vs {want}");
        assert!(r.fidelity < 1.0);
    }

    #[test]
    fn pink_term_gives_stretched_decay() {
        let sys = decoupled();
        let dec = DecoherenceConfig { gammaphi_w: 0.0, gammaphi_pink: 3e5, beta: 2.0, lambda_qutrit: 1.0 };
        let t_f = 2e-6;
        let p = evolve_process(&sys, &idle(t_f), &dec, &EvolveOptions::default()).unwrap();
        let want = (-(3e5f64 * t_f).powi(2)).exp();
        assert!((p.transverse_t() - want).abs() < 1e-8);
    }

    #[test]
    fn trace_preserved_without_decoherence() {
        let (sys, _) = device();
        let modu = ModulationSpec { phi_dc: 0.0, phi_ac: 0.3, f_m_hz: 4.3e8, theta_m: 0.0, t_ramp: 10e-9, t_f: 60e-9 };
        let times: Vec<f64> = (0..=12).map(|i| (5e-9 * i as f64).min(modu.t_f)).collect();
        let cols = evolve_columns(&sys, &modu, &COMPUTATIONAL, &times, &EvolveOptions::default()).unwrap();
        for snap in &cols {
            for k in 0..4 {
                let norm: f64 = (0..DIM).map(|a| snap.population(k, a)).sum();
                assert!((norm - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn process_is_positive_and_trace_non_increasing() {
        let (sys, _) = device();
        let sys = TwoQubitSystem { gamma1_f: 2e4, gamma1_t: 3e4, gammaphi_f: 1e4, gammaphi_bkgd: 1e4, ..sys };
        let dec = DecoherenceConfig { gammaphi_w: 5e4, gammaphi_pink: 5e4, beta: 2.0, lambda_qutrit: 1.0 };
        let modu = ModulationSpec { phi_dc: 0.0, phi_ac: 0.3, f_m_hz: 4.3e8, theta_m: 0.0, t_ramp: 10e-9, t_f: 60e-9 };
        let p = evolve_process(&sys, &modu, &dec, &EvolveOptions::default()).unwrap();
        assert!(p.entries[0][0] <= 1.0 + 1e-8);
        let choi = p.choi();
        let m = nalgebra::DMatrix::from_fn(16, 16, |r, c| choi[r][c]);
        let min = m.symmetric_eigenvalues().min();
        assert!(min > -1e-8, "{min}");
    }
}
