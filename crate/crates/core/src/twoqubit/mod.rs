//! Fixed-frequency transmon capacitively coupled to a flux-modulated tunable
//! transmon, each truncated to three levels.
//!
//! Level |ij⟩ has the fixed qubit in i and the tunable qubit in j; the flat
//! index is 3i + j. The computational subspace is {|00⟩, |01⟩, |10⟩, |11⟩}.

mod calibrate;
mod dynamics;
mod harness;
mod process;

pub use calibrate::{
    calibrate_gate, decoherence_at, effective_coupling_numeric, fidelity_sweep, resonance_scan, CalibratedGate,
    FidelityRow, SCAN_HALF_WIDTH_HZ, SCAN_STEP_HZ,
};
pub use dynamics::{evolve_columns, evolve_process, EvolveOptions, StateColumns};
pub use harness::{asymptotic_fidelity, coherent_noise_average, HarnessConfig, HarnessRow};
pub use process::{average_fidelity, average_fidelity_at, ProcessMatrix};

use crate::error::{Error, Result};
use crate::modulation::{average_anharmonicity, fourier_series, PERIOD_QUADRATURE_POINTS};
use crate::specialfn::bessel_j;
use crate::transmon::{StaticCoeffs, TransmonParams};
use crate::TWO_PI;
use serde::{Deserialize, Serialize};

/// Device and Markovian background rates. Frequencies in rad/s, rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitSystem {
    pub fixed_f: f64,
    pub fixed_eta: f64,
    pub tunable: TransmonParams,
    /// Static capacitive coupling.
    pub g: f64,
    pub gamma1_f: f64,
    pub gamma1_t: f64,
    pub gammaphi_f: f64,
    /// Flux-independent pure dephasing of the tunable qubit.
    pub gammaphi_bkgd: f64,
}

impl TwoQubitSystem {
    pub fn validate(&self) -> Result<()> {
        self.tunable.validate()?;
        let rates = [self.gamma1_f, self.gamma1_t, self.gammaphi_f, self.gammaphi_bkgd];
        if !(self.g > 0.0) || rates.iter().any(|r| !(*r >= 0.0)) || !(self.fixed_f > 0.0) {
            return Err(Error::invalid(format!("need g > 0, fixed_f > 0 and non-negative rates: {self:?}")));
        }
        Ok(())
    }

    /// Same device with every dissipative rate set to zero.
    pub fn coherent(&self) -> Self {
        TwoQubitSystem { gamma1_f: 0.0, gamma1_t: 0.0, gammaphi_f: 0.0, gammaphi_bkgd: 0.0, ..*self }
    }
}

/// Flux-noise dephasing of the tunable qubit during the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceConfig {
    pub gammaphi_w: f64,
    pub gammaphi_pink: f64,
    /// Exponent of the 1/f decay, exp(−(Γt)^β).
    pub beta: f64,
    /// Weight of |2⟩ in the tunable dephasing operator |1⟩⟨1| + 2Λ|2⟩⟨2|.
    pub lambda_qutrit: f64,
}

impl DecoherenceConfig {
    pub fn none() -> Self {
        DecoherenceConfig { gammaphi_w: 0.0, gammaphi_pink: 0.0, beta: 2.0, lambda_qutrit: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gammaphi_w >= 0.0 && self.gammaphi_pink >= 0.0 && self.beta >= 1.0 && self.lambda_qutrit > 0.0) {
            return Err(Error::invalid(format!("need non-negative rates, beta >= 1 and Lambda > 0: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// |11⟩ ↔ |02⟩ full cycle.
    Cz02,
    /// |11⟩ ↔ |20⟩ full cycle.
    Cz20,
    /// |01⟩ ↔ |10⟩ half cycle.
    Iswap,
    Identity,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::Cz02 => "cz02",
            GateKind::Cz20 => "cz20",
            GateKind::Iswap => "iswap",
            GateKind::Identity => "identity",
        }
    }

    /// Flat level indices (source, target) of the resonant transition.
    pub(crate) fn transition(&self) -> Option<(usize, usize)> {
        match self {
            GateKind::Cz02 => Some((4, 2)),
            GateKind::Cz20 => Some((4, 6)),
            GateKind::Iswap => Some((1, 3)),
            GateKind::Identity => None,
        }
    }
}

/// Modulation frequencies (Hz) that bring each transition into resonance
/// through the first and second sidebands of the 2ω_m frequency oscillation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateFrequencies {
    pub f_cz02: f64,
    pub f_cz20: f64,
    pub f_iswap: f64,
    pub f_cz02_second: f64,
    pub f_cz20_second: f64,
    pub f_iswap_second: f64,
}

impl GateFrequencies {
    pub fn fundamental(&self, gate: GateKind) -> Result<f64> {
        match gate {
            GateKind::Cz02 => Ok(self.f_cz02),
            GateKind::Cz20 => Ok(self.f_cz20),
            GateKind::Iswap => Ok(self.f_iswap),
            GateKind::Identity => Err(Error::invalid("the identity has no activation frequency")),
        }
    }
}

/// Optimized fidelity of one process against an ideal gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub fidelity: f64,
    pub theta_f: f64,
    pub theta_t: f64,
    pub f_m_opt: f64,
    pub t_f_opt: f64,
    pub leakage: f64,
}

/// Period-averaged η̄_T (rad/s), or the static value without modulation.
fn mean_anharmonicity(params: &TransmonParams, phi_dc: f64, phi_ac: f64) -> Result<f64> {
    if phi_ac == 0.0 {
        params.anharmonicity(phi_dc)
    } else {
        average_anharmonicity(params, phi_dc, phi_ac)
    }
}

pub fn gate_frequencies(sys: &TwoQubitSystem, coeffs: &StaticCoeffs, phi_dc: f64, phi_ac: f64) -> Result<GateFrequencies> {
    let w_t = fourier_series(coeffs, phi_dc, phi_ac, 0)?.omega[0];
    let eta_t = mean_anharmonicity(&sys.tunable, phi_dc, phi_ac)?;
    let d = w_t - sys.fixed_f;
    let hz = |x: f64| x.abs() / TWO_PI;
    let (cz02, cz20, iswap) = (hz(d - eta_t) / 2.0, hz(d + sys.fixed_eta) / 2.0, hz(d) / 2.0);
    Ok(GateFrequencies {
        f_cz02: cz02,
        f_cz20: cz20,
        f_iswap: iswap,
        f_cz02_second: cz02 / 2.0,
        f_cz20_second: cz20 / 2.0,
        f_iswap_second: iswap / 2.0,
    })
}

/// Small-amplitude sideband coupling √2 g |J_1(𝝎_2/2ω_m)| (rad/s) for the
/// CZ transitions; g |J_1(·)| for the iSWAP.
pub fn effective_coupling_closed(
    sys: &TwoQubitSystem,
    coeffs: &StaticCoeffs,
    phi_dc: f64,
    phi_ac: f64,
    f_m_hz: f64,
    gate: GateKind,
) -> Result<f64> {
    let series = fourier_series(coeffs, phi_dc, phi_ac, 2)?;
    let x = series.omega[2] / (2.0 * TWO_PI * f_m_hz);
    let element = match gate {
        GateKind::Cz02 | GateKind::Cz20 => std::f64::consts::SQRT_2,
        GateKind::Iswap => 1.0,
        GateKind::Identity => return Err(Error::invalid("the identity has no coupling")),
    };
    Ok(element * sys.g * bessel_j(1, x)?.abs())
}

/// t_CZ = π/g_eff + 2 t_ramp.
pub fn gate_time(g_eff: f64, t_ramp: f64) -> Result<f64> {
    if !(g_eff > 0.0) {
        return Err(Error::DegeneratePoint(format!("effective coupling {g_eff:e} gives no gate")));
    }
    if !(t_ramp >= 0.0) {
        return Err(Error::invalid(format!("negative ramp time {t_ramp:e}")));
    }
    Ok(std::f64::consts::PI / g_eff + 2.0 * t_ramp)
}

/// Period average of Λ over the modulation.
pub fn mean_qutrit_lambda(params: &TransmonParams, phi_dc: f64, phi_ac: f64) -> Result<f64> {
    let n = PERIOD_QUADRATURE_POINTS;
    let mut acc = 0.0;
    for j in 0..n {
        let c = (TWO_PI * j as f64 / n as f64).cos();
        acc += params.qutrit_lambda(phi_dc + phi_ac * c)?;
    }
    Ok(acc / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfn::SeriesTolerance;
    use crate::transmon::{calibrate, static_coeffs, QubitBand};

    pub(crate) fn device() -> (TwoQubitSystem, StaticCoeffs) {
        let p = calibrate(&QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.5e9, eta0_hz: 0.2e9 }).unwrap();
        let c = static_coeffs(&p, SeriesTolerance::default()).unwrap();
        let sys = TwoQubitSystem {
            fixed_f: TWO_PI * 4.0e9,
            fixed_eta: TWO_PI * 0.2e9,
            tunable: p,
            g: TWO_PI * 7e6,
            gamma1_f: 0.0,
            gamma1_t: 0.0,
            gammaphi_f: 0.0,
            gammaphi_bkgd: 0.0,
        };
        (sys, c)
    }

    #[test]
    fn gate_frequencies_unmodulated() {
        let (sys, c) = device();
        let f = gate_frequencies(&sys, &c, 0.0, 0.0).unwrap();
        assert!((f.f_cz02 - 0.45e9).abs() < 0.01e9, "{}", f.f_cz02);
        assert!((f.f_iswap - 0.55e9).abs() < 1e3, "{}", f.f_iswap);
        assert!((f.f_cz20 - 0.65e9).abs() < 1e3);
        assert_eq!(f.f_cz02_second, f.f_cz02 / 2.0);
    }

    #[test]
    fn gate_frequencies_fall_with_amplitude() {
        let (sys, c) = device();
        let mut last = gate_frequencies(&sys, &c, 0.0, 0.0).unwrap();
        for i in 1..=30 {
            let f = gate_frequencies(&sys, &c, 0.0, 0.02 * i as f64).unwrap();
            assert!(f.f_cz02 < last.f_cz02 && f.f_cz20 < last.f_cz20 && f.f_iswap < last.f_iswap, "step {i}");
            last = f;
        }
    }

    #[test]
    fn closed_form_coupling_limits() {
        let (sys, c) = device();
        assert_eq!(effective_coupling_closed(&sys, &c, 0.0, 0.0, 4.5e8, GateKind::Cz02).unwrap(), 0.0);
        let bound = 0.5818652 * std::f64::consts::SQRT_2 * sys.g;
        for i in 1..=40 {
            let ac = 0.02 * i as f64;
            let f = gate_frequencies(&sys, &c, 0.0, ac).unwrap().f_cz02;
            let g = effective_coupling_closed(&sys, &c, 0.0, ac, f, GateKind::Cz02).unwrap();
            assert!(g > 0.0 && g <= bound);
        }
    }

    #[test]
    fn gate_time_examples() {
        let g = TWO_PI * 2.5e6;
        assert!((gate_time(g, 10e-9).unwrap() - 220e-9).abs() < 1e-15);
        assert_eq!(gate_time(g, 0.0).unwrap(), std::f64::consts::PI / g);
        let half = gate_time(2.0 * g, 0.0).unwrap();
        assert!((2.0 * half - gate_time(g, 0.0).unwrap()).abs() < 1e-18);
        assert!(matches!(gate_time(0.0, 10e-9), Err(Error::DegeneratePoint(_))));
    }

    #[test]
    fn qutrit_lambda_near_one() {
        let (sys, _) = device();
        for ac in [0.0, 0.3, 0.6] {
            let l = mean_qutrit_lambda(&sys.tunable, 0.0, ac).unwrap();
            assert!((l - 1.0).abs() < 0.02, "{l}");
        }
    }
}
