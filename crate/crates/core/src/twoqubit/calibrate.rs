//! Gate calibration (resonance scan, coupling extraction, pulse refinement)
//! and fidelity sweeps over the modulation amplitude.

use super::dynamics::{evolve_columns, evolve_process, EvolveOptions, COMPUTATIONAL};
use super::process::{average_fidelity, Block, ProcessMatrix};
use super::{effective_coupling_closed, gate_frequencies, mean_qutrit_lambda, DecoherenceConfig, GateKind, GateResult, TwoQubitSystem};
use crate::dephasing::{analytic_rates, lambda_factor, self_consistent_pink_rate};
use crate::error::{Error, Result};
use crate::modulation::{fourier_series, ModulationSpec, DEFAULT_HARMONICS};
use crate::noise::NoiseSpec;
use crate::optimize::nelder_mead;
use crate::transmon::StaticCoeffs;
use crate::TWO_PI;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const SCAN_HALF_WIDTH_HZ: f64 = 5e6;
pub const SCAN_STEP_HZ: f64 = 0.1e6;
/// Snapshot spacing when tracking the transferred population (s).
const TRACK_DT: f64 = 0.25e-9;

/// Exponent used for 1/f dephasing inside the gate.
pub const PINK_BETA: f64 = 2.0;

fn transfer_levels(gate: GateKind) -> Result<(usize, usize)> {
    gate.transition().ok_or_else(|| Error::invalid("the identity has no transition to calibrate"))
}

/// First maximum of the transferred population under a square pulse at
/// `f_m_hz`: (P_max, t_max), with t_max polished by a parabola through the
/// neighbouring snapshots.
fn first_transfer_peak(
    sys: &TwoQubitSystem,
    phi_dc: f64,
    phi_ac: f64,
    f_m_hz: f64,
    gate: GateKind,
    t_window: f64,
    opts: &EvolveOptions,
) -> Result<(f64, f64)> {
    let (src, dst) = transfer_levels(gate)?;
    let modu = ModulationSpec::continuous(phi_dc, phi_ac, f_m_hz, t_window);
    let n = (t_window / TRACK_DT).ceil() as usize;
    let times: Vec<f64> = (0..=n).map(|i| (i as f64 * TRACK_DT).min(t_window)).collect();
    let snaps = evolve_columns(&sys.coherent(), &modu, &[src], &times, opts)?;
    let p: Vec<f64> = snaps.iter().map(|s| s.population(0, dst)).collect();
    // Global maximum on the window; the window spans less than one full cycle.
    let (i, &pm) = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    if i == 0 || i == p.len() - 1 {
        return Ok((pm, times[i]));
    }
    let (a, b, c) = (p[i - 1], pm, p[i + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let t_max = times[i] + shift.clamp(-1.0, 1.0) * TRACK_DT;
    let p_max = b - 0.25 * (a - c) * shift;
    Ok((p_max.min(1.0), t_max))
}

fn half_cycle_guess(g: f64) -> f64 {
    std::f64::consts::PI / (2.0 * g)
}

/// Scans f_m over ±5 MHz around the analytic activation frequency in
/// 0.1 MHz steps, maximizing the peak population transferred by a square
/// pulse. Returns (f_m, P_max).
pub fn resonance_scan(
    sys: &TwoQubitSystem,
    coeffs: &StaticCoeffs,
    phi_dc: f64,
    phi_ac: f64,
    gate: GateKind,
    opts: &EvolveOptions,
) -> Result<(f64, f64)> {
    let f0 = gate_frequencies(sys, coeffs, phi_dc, phi_ac)?.fundamental(gate)?;
    let g0 = effective_coupling_closed(sys, coeffs, phi_dc, phi_ac, f0, gate)?;
    if !(g0 > 0.0) {
        return Err(Error::DegeneratePoint(format!("no sideband coupling at phi_ac={phi_ac}")));
    }
    let window = 1.5 * half_cycle_guess(g0);
    let n_half = (SCAN_HALF_WIDTH_HZ / SCAN_STEP_HZ).round() as i64;
    let mut best = (f0, f64::NEG_INFINITY);
    for i in -n_half..=n_half {
        let f = f0 + i as f64 * SCAN_STEP_HZ;
        let (p, _) = first_transfer_peak(sys, phi_dc, phi_ac, f, gate, window, opts)?;
        if p > best.1 {
            best = (f, p);
        }
    }
    Ok(best)
}

/// g_eff (rad/s) from the first transfer maximum: P(t) = A sin²(Ωt) with
/// Ω² = g_eff² + (δ/2)², so g_eff = √A · π/(2 t_max).
pub fn effective_coupling_numeric(
    sys: &TwoQubitSystem,
    coeffs: &StaticCoeffs,
    phi_dc: f64,
    phi_ac: f64,
    f_m_hz: f64,
    gate: GateKind,
    opts: &EvolveOptions,
) -> Result<f64> {
    let g0 = effective_coupling_closed(sys, coeffs, phi_dc, phi_ac, f_m_hz, gate)?;
    if !(g0 > 0.0) {
        return Ok(0.0);
    }
    let (p, t) = first_transfer_peak(sys, phi_dc, phi_ac, f_m_hz, gate, 1.5 * half_cycle_guess(g0), opts)?;
    Ok(p.sqrt() * std::f64::consts::PI / (2.0 * t))
}

/// A calibrated pulse and its coherent (decoherence-free) performance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedGate {
    pub gate: GateKind,
    pub phi_dc: f64,
    pub phi_ac: f64,
    pub t_ramp: f64,
    pub f_m_hz: f64,
    /// Numeric effective coupling (rad/s).
    pub g_eff: f64,
    /// Small-amplitude closed form (rad/s).
    pub g_eff_closed: f64,
    pub t_f: f64,
    pub coherent: GateResult,
}

impl CalibratedGate {
    pub fn modulation(&self) -> ModulationSpec {
        ModulationSpec { phi_dc: self.phi_dc, phi_ac: self.phi_ac, f_m_hz: self.f_m_hz, theta_m: 0.0, t_ramp: self.t_ramp, t_f: self.t_f }
    }
}

/// Unitary restricted to the computational subspace, `u[out][in]`, lab frame.
fn computational_block(sys: &TwoQubitSystem, modu: &ModulationSpec, opts: &EvolveOptions) -> Result<Block> {
    let snap = evolve_columns(&sys.coherent(), modu, &COMPUTATIONAL, &[modu.t_f], opts)?.remove(0);
    Ok(std::array::from_fn(|r| std::array::from_fn(|c| snap.psi[c][COMPUTATIONAL[r]])))
}

fn coherent_result(sys: &TwoQubitSystem, modu: &ModulationSpec, gate: GateKind, opts: &EvolveOptions) -> Result<GateResult> {
    let k = computational_block(sys, modu, opts)?;
    Ok(average_fidelity(&ProcessMatrix::from_kraus(&k, modu.f_m_hz, modu.t_f), gate, true))
}

/// Full calibration at one operating point: resonance scan, numeric g_eff,
/// t_f = π/g_eff + 2t_ramp (half that pulse area for the iSWAP), then a
/// joint Nelder–Mead polish of (f_m, t_f) on the Z-optimized coherent
/// fidelity.
pub fn calibrate_gate(
    sys: &TwoQubitSystem,
    coeffs: &StaticCoeffs,
    phi_dc: f64,
    phi_ac: f64,
    gate: GateKind,
    t_ramp: f64,
    opts: &EvolveOptions,
) -> Result<CalibratedGate> {
    let (f_scan, _) = resonance_scan(sys, coeffs, phi_dc, phi_ac, gate, opts)?;
    let g_num = effective_coupling_numeric(sys, coeffs, phi_dc, phi_ac, f_scan, gate, opts)?;
    let g_closed = effective_coupling_closed(sys, coeffs, phi_dc, phi_ac, f_scan, gate)?;
    let area = if gate == GateKind::Iswap { 0.5 } else { 1.0 };
    let t0 = area * std::f64::consts::PI / g_num + 2.0 * t_ramp;

    let base = ModulationSpec { phi_dc, phi_ac, f_m_hz: f_scan, theta_m: 0.0, t_ramp, t_f: t0 };
    // Scaled variables: f_m in units of the scan step, t_f in ns.
    let at = |x: &[f64]| ModulationSpec { f_m_hz: f_scan + x[0] * SCAN_STEP_HZ, t_f: t0 + x[1] * 1e-9, ..base };
    let mut err = None;
    let (x, _) = nelder_mead(
        |x: &[f64]| match coherent_result(sys, &at(x), gate, opts) {
            Ok(r) => 1.0 - r.fidelity,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        },
        &[0.0, 0.0],
        &[1.0, 1.0],
        1e-9,
        60,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let modu = at(&x);
    let coherent = coherent_result(sys, &modu, gate, opts)?;
    Ok(CalibratedGate { gate, phi_dc, phi_ac, t_ramp, f_m_hz: modu.f_m_hz, g_eff: g_num, g_eff_closed: g_closed, t_f: modu.t_f, coherent })
}

/// Flux-noise dephasing during a gate at (Φ_dc, Φ_ac), driven at `f_m_hz`.
/// White noise uses the filtered rate when the spec carries a lowpass.
pub fn decoherence_at(
    sys: &TwoQubitSystem,
    coeffs: &StaticCoeffs,
    spec: &NoiseSpec,
    phi_dc: f64,
    phi_ac: f64,
    f_m_hz: f64,
) -> Result<DecoherenceConfig> {
    spec.validate()?;
    let series = fourier_series(coeffs, phi_dc, phi_ac, DEFAULT_HARMONICS)?;
    let unit = analytic_rates(&series, spec, f_m_hz, 1.0);
    let pink = match self_consistent_pink_rate(unit.gamma_pink, spec.f_ir_hz) {
        Ok((g, _)) => g,
        // Decay slower than the infrared cutoff (near an AC sweet spot): the
        // rate is negligible, take λ at the long-time edge of its range.
        Err(Error::Domain(_)) => unit.gamma_pink * lambda_factor(spec.f_ir_hz, 0.099 / (TWO_PI * spec.f_ir_hz))?,
        Err(e) => return Err(e),
    };
    let white = if spec.lowpass_cutoff_hz.is_some() { unit.gamma_white_filtered } else { unit.gamma_white };
    Ok(DecoherenceConfig {
        gammaphi_w: white,
        gammaphi_pink: pink,
        beta: PINK_BETA,
        lambda_qutrit: mean_qutrit_lambda(&sys.tunable, phi_dc, phi_ac)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub phi_ac: f64,
    pub f_m_hz: f64,
    pub geff_hz: f64,
    pub tcz_s: f64,
    pub infidelity: f64,
    pub infidelity_nodecoherence: f64,
    pub leakage: f64,
}

/// Calibrates the gate at every Φ_ac and evaluates it with the system's
/// Markovian rates plus flux-noise dephasing from `spec`. Points with no
/// sideband coupling (Φ_ac = 0) give a row of NaNs.
pub fn fidelity_sweep(
    sys: &TwoQubitSystem,
    coeffs: &StaticCoeffs,
    spec: &NoiseSpec,
    phi_dc: f64,
    phi_ac_grid: &[f64],
    gate: GateKind,
    t_ramp: f64,
    opts: &EvolveOptions,
) -> Result<Vec<FidelityRow>> {
    phi_ac_grid
        .par_iter()
        .map(|&phi_ac| {
            let cal = match calibrate_gate(sys, coeffs, phi_dc, phi_ac, gate, t_ramp, opts) {
                Ok(c) => c,
                Err(Error::DegeneratePoint(_)) => {
                    return Ok(FidelityRow {
                        phi_ac,
                        f_m_hz: f64::NAN,
                        geff_hz: 0.0,
                        tcz_s: f64::INFINITY,
                        infidelity: f64::NAN,
                        infidelity_nodecoherence: f64::NAN,
                        leakage: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            let dec = decoherence_at(sys, coeffs, spec, phi_dc, phi_ac, cal.f_m_hz)?;
            let process = evolve_process(sys, &cal.modulation(), &dec, opts)?;
            let noisy = average_fidelity(&process, gate, true);
            Ok(FidelityRow {
                phi_ac,
                f_m_hz: cal.f_m_hz,
                geff_hz: cal.g_eff / TWO_PI,
                tcz_s: cal.t_f,
                infidelity: 1.0 - noisy.fidelity,
                infidelity_nodecoherence: 1.0 - cal.coherent.fidelity,
                leakage: noisy.leakage,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::tests::device;
    use super::*;

    #[test]
    fn numeric_coupling_tracks_closed_form() {
        let (sys, coeffs) = device();
        let opts = EvolveOptions::default();
        for gate in [GateKind::Cz02, GateKind::Iswap] {
            let (f_m, p) = resonance_scan(&sys, &coeffs, 0.0, 0.3, gate, &opts).unwrap();
            assert!(p > 0.98, "{gate:?}: peak transfer {p}");
            let g_num = effective_coupling_numeric(&sys, &coeffs, 0.0, 0.3, f_m, gate, &opts).unwrap();
            let g_closed = effective_coupling_closed(&sys, &coeffs, 0.0, 0.3, f_m, gate).unwrap();
            assert!((g_num / g_closed - 1.0).abs() < 0.1, "{gate:?}: {g_num} vs {g_closed}");
        }
    }

    #[test]
    fn lowpass_suppresses_white_gate_dephasing() {
        let (sys, coeffs) = device();
        let f_m = gate_frequencies(&sys, &coeffs, 0.0, 0.5).unwrap().f_cz02;
        let spec = NoiseSpec { a_dc_white: 50e-9, a_ac_white: 50e-9, ..Default::default() };
        let open = decoherence_at(&sys, &coeffs, &spec, 0.0, 0.5, f_m).unwrap();
        let filtered =
            decoherence_at(&sys, &coeffs, &NoiseSpec { lowpass_cutoff_hz: Some(1.5 * f_m), ..spec }, 0.0, 0.5, f_m).unwrap();
        assert!(filtered.gammaphi_w < open.gammaphi_w && filtered.gammaphi_w > 0.0);
        assert_eq!(open.gammaphi_pink, 0.0);
        assert_eq!(open.beta, PINK_BETA);
    }

    #[test]
    fn pink_rate_survives_the_sweet_spot() {
        let (sys, coeffs) = device();
        let star = crate::modulation::find_ac_sweet_spot(&coeffs, 0.0, (0.4, 0.8)).unwrap();
        let spec = NoiseSpec { a_dc_pink: 3.63e-6, a_ac_pink: 3.63e-6, ..Default::default() };
        let at_star = decoherence_at(&sys, &coeffs, &spec, 0.0, star, 400e6).unwrap();
        let away = decoherence_at(&sys, &coeffs, &spec, 0.0, 0.3, 400e6).unwrap();
        assert!(at_star.gammaphi_pink.is_finite() && at_star.gammaphi_pink < 1e-3 * away.gammaphi_pink);
    }

    #[test]
    fn identity_has_nothing_to_calibrate() {
        let (sys, coeffs) = device();
        assert!(resonance_scan(&sys, &coeffs, 0.0, 0.3, GateKind::Identity, &EvolveOptions::default()).is_err());
    }
}
