//! Static tunable-transmon model: flux to frequency and anharmonicity, the
//! cosine series of the band, and calibration against measured band edges.

use crate::error::{Error, Result};
use crate::specialfn::{hyp2f1, rising_factorial, SeriesTolerance};
use crate::{hz_to_rad, TWO_PI};
use serde::{Deserialize, Serialize};

/// Perturbative coefficients ω^(p) of ω_T = E_C Σ_p ω^(p) ξ^p, for p = −1..=8.
pub const PERTURBATION_TABLE: [f64; 10] = [
    4.0,
    -1.0,
    -1.0 / 4.0,
    -21.0 / 128.0,
    -19.0 / 128.0,
    -5319.0 / 32768.0,
    -6649.0 / 32768.0,
    -1180581.0 / 4194304.0,
    -446287.0 / 1048576.0,
    -1489138635.0 / 2147483648.0,
];

/// Power of ξ multiplying `PERTURBATION_TABLE[i]`.
#[inline]
pub fn table_power(i: usize) -> i32 {
    i as i32 - 1
}

/// Coefficients of η = E_C (1 + c1 ξ + c2 ξ² + c3 ξ³).
const ETA_SERIES: [f64; 3] = [9.0 / 16.0, 81.0 / 128.0, 3645.0 / 4096.0];

/// Largest ξ for which the perturbation series is trusted.
pub const XI_MAX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Charging energy (rad/s).
    pub ec: f64,
    /// Larger junction energy (rad/s).
    pub ej1: f64,
    /// Smaller junction energy (rad/s).
    pub ej2: f64,
}

impl TransmonParams {
    pub fn new(ec: f64, ej1: f64, ej2: f64) -> Result<Self> {
        let p = TransmonParams { ec, ej1, ej2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ec > 0.0 && self.ej2 > 0.0 && self.ej1 >= self.ej2) {
            return Err(Error::invalid(format!(
                "need E_J1 >= E_J2 > 0 and E_C > 0, got E_C={:e}, E_J1={:e}, E_J2={:e}",
                self.ec, self.ej1, self.ej2
            )));
        }
        let xi_half = self.xi(0.5);
        if !(xi_half < XI_MAX) {
            return Err(Error::invalid(format!(
                "xi at half flux is {xi_half:.4}, outside perturbative range < {XI_MAX}"
            )));
        }
        Ok(())
    }

    /// Ξ̄ = 4E_C² / (E_J1² + E_J2²).
    pub fn xi_bar(&self) -> f64 {
        4.0 * self.ec * self.ec / (self.ej1 * self.ej1 + self.ej2 * self.ej2)
    }

    /// 𝒳 = 2E_J1E_J2 / (E_J1² + E_J2²).
    pub fn chi(&self) -> f64 {
        2.0 * self.ej1 * self.ej2 / (self.ej1 * self.ej1 + self.ej2 * self.ej2)
    }

    pub fn effective_ej(&self, phi: f64) -> f64 {
        let (a, b) = (self.ej1, self.ej2);
        let v = a * a + b * b + 2.0 * a * b * (TWO_PI * phi).cos();
        v.max(0.0).sqrt()
    }

    /// ξ = √(2E_C / E_Jeff).
    pub fn xi(&self, phi: f64) -> f64 {
        (2.0 * self.ec / self.effective_ej(phi)).sqrt()
    }

    fn checked_xi(&self, phi: f64) -> Result<f64> {
        let xi = self.xi(phi);
        if xi < XI_MAX {
            Ok(xi)
        } else {
            Err(Error::domain(format!("flux {phi} gives xi={xi:.4} >= {XI_MAX}")))
        }
    }

    pub fn frequency(&self, phi: f64) -> Result<f64> {
        Ok(frequency_at_xi(self.ec, self.checked_xi(phi)?))
    }

    /// Frequency without the validity check; for inner loops that already
    /// verified the flux excursion.
    #[inline]
    pub fn frequency_unchecked(&self, phi: f64) -> f64 {
        frequency_at_xi(self.ec, self.xi(phi))
    }

    pub fn anharmonicity(&self, phi: f64) -> Result<f64> {
        Ok(anharmonicity_at_xi(self.ec, self.checked_xi(phi)?))
    }

    #[inline]
    pub fn anharmonicity_unchecked(&self, phi: f64) -> f64 {
        anharmonicity_at_xi(self.ec, self.xi(phi))
    }

    /// Weight Λ = |1 − η'/(2ω')| of the second-level flux dephasing term.
    ///
    /// Both derivatives are taken along ξ, so the ratio is finite at the DC
    /// sweet spot where the flux derivatives themselves vanish.
    pub fn qutrit_lambda(&self, phi: f64) -> Result<f64> {
        let xi = self.checked_xi(phi)?;
        let dw = d_frequency_d_xi(self.ec, xi);
        let de = d_anharmonicity_d_xi(self.ec, xi);
        Ok((1.0 - de / (2.0 * dw)).abs())
    }

    /// Band edges and anharmonicity at zero flux, in Hz.
    pub fn band(&self) -> Result<QubitBand> {
        Ok(QubitBand {
            f_max_hz: self.frequency(0.0)? / TWO_PI,
            f_min_hz: self.frequency(0.5)? / TWO_PI,
            eta0_hz: self.anharmonicity(0.0)? / TWO_PI,
        })
    }
}

/// ω_T as a function of ξ.
#[inline]
pub fn frequency_at_xi(ec: f64, xi: f64) -> f64 {
    // Horner over ξ^0..ξ^9, then divide by ξ for the ξ^{-1} offset.
    let mut acc = 0.0;
    for c in PERTURBATION_TABLE.iter().rev() {
        acc = acc * xi + c;
    }
    ec * acc / xi
}

fn d_frequency_d_xi(ec: f64, xi: f64) -> f64 {
    let mut acc = 0.0;
    for (i, c) in PERTURBATION_TABLE.iter().enumerate() {
        let p = table_power(i);
        if p != 0 {
            acc += c * p as f64 * xi.powi(p - 1);
        }
    }
    ec * acc
}

#[inline]
pub fn anharmonicity_at_xi(ec: f64, xi: f64) -> f64 {
    ec * (1.0 + xi * (ETA_SERIES[0] + xi * (ETA_SERIES[1] + xi * ETA_SERIES[2])))
}

fn d_anharmonicity_d_xi(ec: f64, xi: f64) -> f64 {
    ec * (ETA_SERIES[0] + xi * (2.0 * ETA_SERIES[1] + xi * 3.0 * ETA_SERIES[2]))
}

/// Measured band of a tunable qubit, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitBand {
    /// Frequency at zero flux.
    pub f_max_hz: f64,
    /// Frequency at half a flux quantum.
    pub f_min_hz: f64,
    /// Anharmonicity at zero flux.
    pub eta0_hz: f64,
}

impl QubitBand {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f_max_hz > self.f_min_hz
            && self.f_min_hz > 0.0
            && self.eta0_hz > 0.0
            && self.eta0_hz < self.f_min_hz;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("band needs f_max > f_min > eta0 > 0, got {self:?}")))
        }
    }
}

/// Inverts the forward model: finds (E_C, E_J1, E_J2) reproducing `band`.
///
/// Damped Newton on (E_C, E_J1 + E_J2, E_J1 − E_J2) with a finite-difference
/// Jacobian; the zero-flux data depend only on the sum and the half-flux
/// frequency only on the difference, so this parametrization is nearly
/// block-diagonal.
pub fn calibrate(band: &QubitBand) -> Result<TransmonParams> {
    band.validate()?;
    let w_max = hz_to_rad(band.f_max_hz);
    let w_min = hz_to_rad(band.f_min_hz);
    let eta0 = hz_to_rad(band.eta0_hz);

    let residual = |u: &[f64; 3]| -> Option<[f64; 3]> {
        let [ec, sum, diff] = *u;
        if !(ec > 0.0 && diff > 0.0 && sum > diff) {
            return None;
        }
        let xi0 = (2.0 * ec / sum).sqrt();
        let xi_half = (2.0 * ec / diff).sqrt();
        if xi_half >= XI_MAX {
            return None;
        }
        Some([
            frequency_at_xi(ec, xi0) / w_max - 1.0,
            frequency_at_xi(ec, xi_half) / w_min - 1.0,
            anharmonicity_at_xi(ec, xi0) / eta0 - 1.0,
        ])
    };
    let norm = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>().sqrt();

    let ec0 = eta0;
    let mut u = [ec0, (w_max + ec0).powi(2) / (8.0 * ec0), (w_min + ec0).powi(2) / (8.0 * ec0)];
    let mut r = residual(&u).ok_or_else(|| Error::Calibration {
        reason: "initial guess outside the perturbative region; band not reachable".into(),
        residual: f64::NAN,
    })?;

    const MAX_ITER: usize = 100;
    const TOL: f64 = 1e-10;
    for _ in 0..MAX_ITER {
        if norm(&r) < TOL {
            let [ec, sum, diff] = u;
            return TransmonParams::new(ec, 0.5 * (sum + diff), 0.5 * (sum - diff));
        }
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let h = 1e-7 * u[j];
            let mut up = u;
            let mut dn = u;
            up[j] += h;
            dn[j] -= h;
            let (rp, rm) = match (residual(&up), residual(&dn)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Calibration {
                        reason: "iterate reached the edge of the perturbative region".into(),
                        residual: norm(&r),
                    })
                }
            };
            for i in 0..3 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let step = solve3(jac, r).ok_or_else(|| Error::Calibration {
            reason: "singular Jacobian".into(),
            residual: norm(&r),
        })?;
        let mut damping = 1.0;
        loop {
            let trial = [u[0] - damping * step[0], u[1] - damping * step[1], u[2] - damping * step[2]];
            if let Some(rt) = residual(&trial) {
                if norm(&rt) < norm(&r) {
                    u = trial;
                    r = rt;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-8 {
                return Err(Error::Calibration {
                    reason: "line search failed; band likely outside the reachable region".into(),
                    residual: norm(&r),
                });
            }
        }
    }
    Err(Error::Calibration { reason: "iteration cap reached".into(), residual: norm(&r) })
}

// Cramer's rule; the system is tiny and well scaled.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (j, xj) in x.iter_mut().enumerate() {
        let mut m = a;
        for i in 0..3 {
            m[i][j] = b[i];
        }
        *xj = det(&m) / d;
    }
    Some(x)
}

/// Cosine-series coefficients of the static band, ω_T(φ) = Σ s_n cos(nφ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticCoeffs {
    /// s_0 ..= s_{n_max} (rad/s).
    pub s: Vec<f64>,
    pub n_max: usize,
}

impl StaticCoeffs {
    pub const N_CAP: usize = 40;

    pub fn perturbation_table(&self) -> &'static [f64; 10] {
        &PERTURBATION_TABLE
    }

    /// Σ s_n cos(2πnΦ).
    pub fn evaluate(&self, phi: f64) -> f64 {
        self.s.iter().enumerate().map(|(n, s)| s * (TWO_PI * n as f64 * phi).cos()).sum()
    }
}

/// Expands the band ω_T(Φ) into its cosine series.
pub fn static_coeffs(params: &TransmonParams, tol: SeriesTolerance) -> Result<StaticCoeffs> {
    let chi = params.chi();
    let z = chi * chi;
    if z >= 1.0 {
        return Err(Error::domain("symmetric junctions: chi^2 = 1"));
    }
    let xb = params.xi_bar();
    let mut s = Vec::with_capacity(StaticCoeffs::N_CAP + 1);
    // (1/n!)(−𝒳/2)^n, built incrementally.
    let mut pref = 1.0;
    for n in 0..=StaticCoeffs::N_CAP {
        if n > 0 {
            pref *= -chi / 2.0 / n as f64;
        }
        let nf = n as f64;
        let mut acc = 0.0;
        for (i, w) in PERTURBATION_TABLE.iter().enumerate() {
            let p = table_power(i) as f64;
            let r = rising_factorial(p / 4.0, n as u32);
            if r == 0.0 {
                continue;
            }
            let f = hyp2f1(nf / 2.0 + p / 8.0, (nf + 1.0) / 2.0 + p / 8.0, nf + 1.0, z, tol)?;
            acc += w * xb.powf(p / 4.0) * r * f;
        }
        let weight = if n == 0 { 1.0 } else { 2.0 };
        let sn = pref * weight * params.ec * acc;
        s.push(sn);
        if n > 0 && sn.abs() < tol.rel_tol * s[0].abs() {
            return Ok(StaticCoeffs { n_max: n, s });
        }
    }
    Err(Error::Convergence { what: "static cosine series".into(), iterations: StaticCoeffs::N_CAP })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn device_iv() -> TransmonParams {
        calibrate(&QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.1e9, eta0_hz: 0.2e9 }).unwrap()
    }

    #[test]
    fn table_matches_rationals() {
        assert_eq!(PERTURBATION_TABLE[0], 4.0);
        assert_eq!(PERTURBATION_TABLE[1], -1.0);
        assert_eq!(PERTURBATION_TABLE[3], -21.0 / 2f64.powi(7));
        assert_eq!(PERTURBATION_TABLE[9], -1489138635.0 / 2f64.powi(31));
    }

    #[test]
    fn effective_ej_examples() {
        let p = TransmonParams::new(1.0, 30.0, 10.0).unwrap();
        assert!((p.effective_ej(0.0) - 40.0).abs() < 1e-12);
        assert!((p.effective_ej(0.5) - 20.0).abs() < 1e-12);
        assert!((p.effective_ej(0.25) - 1000f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn leading_order_is_plasma_frequency() {
        let (ec, ej) = (1.0f64, 2000.0f64);
        let xi = (2.0 * ec / ej).sqrt();
        let w = frequency_at_xi(ec, xi);
        let lead = (8.0 * ec * ej).sqrt() - ec;
        assert!((w - lead).abs() < ec * xi);
    }

    #[test]
    fn calibration_round_trips_both_devices() {
        for band in [
            QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.1e9, eta0_hz: 0.2e9 },
            QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.5e9, eta0_hz: 0.2e9 },
        ] {
            let p = calibrate(&band).unwrap();
            let back = p.band().unwrap();
            assert!((back.f_max_hz / band.f_max_hz - 1.0).abs() < 1e-6);
            assert!((back.f_min_hz / band.f_min_hz - 1.0).abs() < 1e-6);
            assert!((back.eta0_hz / band.eta0_hz - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn calibration_asymmetry_monotone_and_bounded() {
        // Narrowing the band shrinks the small junction; widening it too far
        // leaves the perturbative region.
        let mut last = f64::INFINITY;
        for i in 0..12 {
            let f_min = 3.2e9 + i as f64 * 0.15e9;
            let p = calibrate(&QubitBand { f_max_hz: 5.1e9, f_min_hz: f_min, eta0_hz: 0.2e9 }).unwrap();
            let ratio = p.ej2 / p.ej1;
            assert!(ratio < last, "ratio not decreasing at f_min={f_min}");
            last = ratio;
        }
        let err = calibrate(&QubitBand { f_max_hz: 5.1e9, f_min_hz: 0.6e9, eta0_hz: 0.2e9 });
        assert!(matches!(err, Err(Error::Calibration { .. })), "{err:?}");
    }

    #[test]
    fn anharmonicity_at_zero_flux() {
        let p = device_iv();
        let eta = p.anharmonicity(0.0).unwrap() / TWO_PI;
        assert!((eta / 0.2e9 - 1.0).abs() < 0.02);
    }

    #[test]
    fn qutrit_lambda_near_one() {
        let p = device_iv();
        for i in 0..=10 {
            let l = p.qutrit_lambda(0.05 * i as f64).unwrap();
            assert!((l - 1.0).abs() < 0.02, "Lambda={l}");
        }
    }

    #[test]
    fn domain_error_outside_perturbative_range() {
        let p = TransmonParams { ec: 1.0, ej1: 10.0, ej2: 9.99 };
        assert!(p.validate().is_err());
        assert!(matches!(p.frequency(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn cosine_series_reproduces_band() {
        let p = device_iv();
        let c = static_coeffs(&p, SeriesTolerance::default()).unwrap();
        assert!(c.n_max <= StaticCoeffs::N_CAP);
        let w0 = p.frequency(0.0).unwrap();
        let sum: f64 = c.s.iter().sum();
        assert!((sum / w0 - 1.0).abs() < 1e-8);
        let alt: f64 = c.s.iter().enumerate().map(|(n, s)| if n % 2 == 0 { *s } else { -*s }).sum();
        assert!((alt / p.frequency(0.5).unwrap() - 1.0).abs() < 1e-8);
        for i in 0..32 {
            let phi = i as f64 / 32.0;
            let w = p.frequency(phi).unwrap();
            assert!((c.evaluate(phi) / w - 1.0).abs() < 1e-8, "phi={phi}");
        }
        for n in 2..c.n_max {
            assert!(c.s[n + 1].abs() < c.s[n].abs(), "n={n}");
        }
        assert!(c.s[c.n_max].abs() < 1e-15 * c.s[0].abs());
    }

    #[test]
    fn cosine_series_truncation_failure() {
        // Nearly symmetric junctions decay too slowly for the 40-term cap.
        let p = TransmonParams { ec: 1.0, ej1: 1000.0, ej2: 990.0 };
        let r = static_coeffs(&p, SeriesTolerance::default());
        assert!(matches!(r, Err(Error::Convergence { .. })), "{r:?}");
    }

    proptest! {
        #[test]
        fn frequency_even_and_periodic(phi in -2.0f64..2.0) {
            let p = device_iv();
            let w = p.frequency(phi).unwrap();
            prop_assert!(w > 0.0);
            prop_assert!((w - p.frequency(-phi).unwrap()).abs() <= 1e-12 * w);
            prop_assert!((w - p.frequency(phi + 1.0).unwrap()).abs() <= 1e-9 * w);
            let e = p.anharmonicity(phi).unwrap();
            prop_assert!(e > 0.0);
            prop_assert!((e - p.anharmonicity(-phi).unwrap()).abs() <= 1e-12 * e);
            prop_assert!((e - p.anharmonicity(phi + 1.0).unwrap()).abs() <= 1e-9 * e);
        }

        #[test]
        fn effective_ej_bounds(phi in -1.0f64..1.0) {
            let p = device_iv();
            let e = p.effective_ej(phi);
            prop_assert!(e >= (p.ej1 - p.ej2) * (1.0 - 1e-12));
            prop_assert!(e <= (p.ej1 + p.ej2) * (1.0 + 1e-12));
        }
    }
}
