//! Shared fixtures for the criterion benches.

use fluxmod::transmon::{calibrate, static_coeffs};
use fluxmod::{QubitBand, SeriesTolerance, StaticCoeffs, TransmonParams, TwoQubitSystem, TWO_PI};

pub const BAND: QubitBand = QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.1e9, eta0_hz: 0.2e9 };

pub fn device() -> (TransmonParams, StaticCoeffs) {
    let p = calibrate(&BAND).expect("default band calibrates");
    let c = static_coeffs(&p, SeriesTolerance::default()).expect("coefficients");
    (p, c)
}

/// Tunable qubit at 5.1/4.5 GHz against a fixed 4 GHz qubit, g = 7 MHz.
pub fn two_qubit() -> (TwoQubitSystem, StaticCoeffs) {
    let tunable = calibrate(&QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.5e9, eta0_hz: 0.2e9 }).expect("gate band calibrates");
    let c = static_coeffs(&tunable, SeriesTolerance::default()).expect("coefficients");
    let sys = TwoQubitSystem {
        fixed_f: TWO_PI * 4.0e9,
        fixed_eta: TWO_PI * 0.2e9,
        tunable,
        g: TWO_PI * 7e6,
        gamma1_f: 1.0 / 150e-6,
        gamma1_t: 1.0 / 150e-6,
        gammaphi_f: 0.5 / 150e-6,
        gammaphi_bkgd: 1.0 / 300e-6,
    };
    (sys, c)
}
