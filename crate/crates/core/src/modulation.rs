//! The tunable qubit under sinusoidal flux modulation
//! Φ(t) = Φ_dc + Φ_ac cos(ω_m t + θ_m).

use crate::error::{Error, Result};
use crate::specialfn::{bessel_j_all, erf};
use crate::transmon::{StaticCoeffs, TransmonParams};
use crate::TWO_PI;
use serde::{Deserialize, Serialize};

/// Default harmonic truncation.
pub const DEFAULT_HARMONICS: usize = 10;
/// Largest harmonic truncation accepted by [`fourier_series`].
pub const MAX_HARMONICS: usize = 32;
/// Points in the periodic trapezoid rule used for period averages.
pub const PERIOD_QUADRATURE_POINTS: usize = 64;

/// Flux drive with erf-shaped rising and falling edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    /// Parking flux (Φ0).
    pub phi_dc: f64,
    /// Modulation amplitude (Φ0).
    pub phi_ac: f64,
    /// Modulation frequency (Hz).
    pub f_m_hz: f64,
    /// Carrier phase (rad).
    pub theta_m: f64,
    /// Edge duration (s); zero gives a square pulse.
    pub t_ramp: f64,
    /// Total pulse length (s).
    pub t_f: f64,
}

impl ModulationSpec {
    /// Continuous modulation with no envelope, for a pulse of length `t_f`.
    pub fn continuous(phi_dc: f64, phi_ac: f64, f_m_hz: f64, t_f: f64) -> Self {
        ModulationSpec { phi_dc, phi_ac, f_m_hz, theta_m: 0.0, t_ramp: 0.0, t_f }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_ac >= 0.0 && self.f_m_hz > 0.0 && self.t_ramp >= 0.0 && 2.0 * self.t_ramp <= self.t_f) {
            return Err(Error::invalid(format!("modulation spec violates phi_ac >= 0, f_m > 0, 0 <= 2 t_ramp <= t_f: {self:?}")));
        }
        Ok(())
    }

    /// Width of the erf edges, t_ramp / (4√(2 ln 2)).
    pub fn sigma(&self) -> f64 {
        self.t_ramp / (4.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    pub fn omega_m(&self) -> f64 {
        TWO_PI * self.f_m_hz
    }

    /// Instantaneous modulation amplitude Φ_ac(t).
    pub fn envelope(&self, t: f64) -> f64 {
        if self.t_ramp == 0.0 {
            return if (0.0..=self.t_f).contains(&t) { self.phi_ac } else { 0.0 };
        }
        let s = self.sigma();
        0.5 * self.phi_ac * (erf((t - self.t_ramp) / s) - erf((t + self.t_ramp - self.t_f) / s))
    }

    /// Carrier angle ω_m t + θ_m.
    #[inline]
    pub fn carrier(&self, t: f64) -> f64 {
        self.omega_m() * t + self.theta_m
    }

    pub fn flux(&self, t: f64) -> f64 {
        self.phi_dc + self.envelope(t) * self.carrier(t).cos()
    }
}

/// Harmonic content of the modulated frequency,
/// ω_T(t) = Σ_k 𝝎_k cos(k(ω_m t + θ_m)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub phi_dc: f64,
    pub phi_ac: f64,
    /// 𝝎_k (rad/s), k = 0..=K.
    pub omega: Vec<f64>,
    /// ∂𝝎_k/∂Φ_dc (rad/s per Φ0).
    pub d_dc: Vec<f64>,
    /// ∂𝝎_k/∂Φ_ac (rad/s per Φ0).
    pub d_ac: Vec<f64>,
}

impl FourierSeries {
    /// Harmonic truncation K.
    pub fn k_max(&self) -> usize {
        self.omega.len() - 1
    }

    /// Reconstructs ω_T at carrier angle θ.
    pub fn evaluate(&self, theta: f64) -> f64 {
        self.omega.iter().enumerate().map(|(k, w)| w * (k as f64 * theta).cos()).sum()
    }
}

// cos(a + kπ/2) and sin(a + kπ/2) from cos a, sin a with exact quarter-turn
// factors, so parity zeros come out exactly zero.
#[inline]
fn quarter_turn(c: f64, s: f64, k: usize) -> (f64, f64) {
    match k % 4 {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

/// Fourier–Bessel expansion of the modulated frequency and its flux derivatives.
pub fn fourier_series(coeffs: &StaticCoeffs, phi_dc: f64, phi_ac: f64, k_max: usize) -> Result<FourierSeries> {
    if k_max > MAX_HARMONICS {
        return Err(Error::domain(format!("harmonic truncation {k_max} exceeds {MAX_HARMONICS}")));
    }
    let a_dc = TWO_PI * phi_dc;
    let a_ac = TWO_PI * phi_ac;
    let mut omega = vec![0.0; k_max + 1];
    let mut d_dc = vec![0.0; k_max + 1];
    let mut d_ac = vec![0.0; k_max + 1];
    for (n, &s) in coeffs.s.iter().enumerate() {
        let nf = n as f64;
        let j = bessel_j_all(k_max + 1, nf * a_ac)?;
        let (sn, cn) = (nf * a_dc).sin_cos();
        for k in 0..=k_max {
            let (ck, sk) = quarter_turn(cn, sn, k);
            let j_lower = if k == 0 { -j[1] } else { j[k - 1] };
            omega[k] += s * ck * j[k];
            d_dc[k] += nf * s * sk * j[k];
            d_ac[k] += nf * s * ck * 0.5 * (j[k + 1] - j_lower);
        }
    }
    for k in 0..=k_max {
        let w = if k == 0 { 1.0 } else { 2.0 };
        omega[k] *= w;
        d_dc[k] *= -w * TWO_PI;
        d_ac[k] *= -w * TWO_PI;
    }
    Ok(FourierSeries { phi_dc, phi_ac, omega, d_dc, d_ac })
}

/// ω̄_T = 𝝎_0.
pub fn average_frequency(series: &FourierSeries) -> f64 {
    series.omega[0]
}

fn period_average(phi_dc: f64, phi_ac: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let n = PERIOD_QUADRATURE_POINTS;
    let mut acc = 0.0;
    for j in 0..n {
        let theta = TWO_PI * j as f64 / n as f64;
        acc += f(phi_dc + phi_ac * theta.cos())?;
    }
    Ok(acc / n as f64)
}

/// Period-averaged anharmonicity η̄_T.
pub fn average_anharmonicity(params: &TransmonParams, phi_dc: f64, phi_ac: f64) -> Result<f64> {
    period_average(phi_dc, phi_ac, |phi| params.anharmonicity(phi))
}

/// Period-averaged frequency by direct quadrature of ω_T(Φ(θ)); agrees with
/// 𝝎_0 without going through the cosine series.
pub fn period_average_frequency(params: &TransmonParams, phi_dc: f64, phi_ac: f64) -> Result<f64> {
    period_average(phi_dc, phi_ac, |phi| params.frequency(phi))
}

/// Checks that the whole excursion [Φ_dc − Φ_ac, Φ_dc + Φ_ac] stays perturbative.
pub fn check_excursion(params: &TransmonParams, phi_dc: f64, phi_ac: f64) -> Result<()> {
    // ξ is largest where cos(2πΦ) is smallest, i.e. closest to half flux.
    let lo = phi_dc - phi_ac.abs();
    let hi = phi_dc + phi_ac.abs();
    let worst = if (lo - 0.5).ceil() + 0.5 <= hi {
        0.5
    } else if (TWO_PI * lo).cos() < (TWO_PI * hi).cos() {
        lo
    } else {
        hi
    };
    params.frequency(worst).map(|_| ())
}

pub fn instantaneous_frequency(params: &TransmonParams, spec: &ModulationSpec, t: f64) -> Result<f64> {
    if !(0.0..=spec.t_f).contains(&t) {
        return Err(Error::domain(format!("time {t:e} outside pulse window [0, {:e}]", spec.t_f)));
    }
    params.frequency(spec.flux(t))
}

/// Root of ∂ω̄_T/∂Φ_ac in `bracket` at fixed Φ_dc.
///
/// Bisection down to 1e-4 Φ0, then secant polish to 1e-6 Φ0 or better.
pub fn find_ac_sweet_spot(coeffs: &StaticCoeffs, phi_dc: f64, bracket: (f64, f64)) -> Result<f64> {
    let g = |phi_ac: f64| -> Result<f64> { Ok(fourier_series(coeffs, phi_dc, phi_ac, 1)?.d_ac[0]) };
    let (mut lo, mut hi) = bracket;
    let (mut g_lo, g_hi) = (g(lo)?, g(hi)?);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo: g_lo, f_hi: g_hi });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    let (mut x0, mut x1) = (lo, hi);
    let (mut f0, mut f1) = (g(x0)?, g(x1)?);
    for _ in 0..50 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = g(x1)?;
        if (x1 - x0).abs() < 1e-10 {
            break;
        }
    }
    let h = 1e-4;
    let curvature = (g(x1 + h)? - g(x1 - h)?) / (2.0 * h);
    if !(curvature.abs() > 0.0) {
        return Err(Error::DegeneratePoint(format!("flat derivative at phi_ac={x1}")));
    }
    Ok(x1)
}

/// Joint stationary point of ω̄_T(Φ_dc, Φ_ac): both ∂ω̄_T/∂Φ_dc and
/// ∂ω̄_T/∂Φ_ac vanish, so both additive and multiplicative slow noise drop
/// out at first order. Newton iteration from `guess` = (Φ_dc, Φ_ac).
pub fn find_joint_sweet_spot(coeffs: &StaticCoeffs, guess: (f64, f64)) -> Result<(f64, f64)> {
    let grad = |dc: f64, ac: f64| -> Result<[f64; 2]> {
        let s = fourier_series(coeffs, dc, ac, 1)?;
        Ok([s.d_dc[0], s.d_ac[0]])
    };
    let (mut dc, mut ac) = guess;
    let h = 1e-6;
    for _ in 0..100 {
        let g = grad(dc, ac)?;
        let gx = grad(dc + h, ac)?;
        let gy = grad(dc, ac + h)?;
        let (a, b, c, d) = ((gx[0] - g[0]) / h, (gy[0] - g[0]) / h, (gx[1] - g[1]) / h, (gy[1] - g[1]) / h);
        let det = a * d - b * c;
        if det == 0.0 {
            return Err(Error::DegeneratePoint("singular Hessian of the average frequency".into()));
        }
        let step_dc = (d * g[0] - b * g[1]) / det;
        let step_ac = (a * g[1] - c * g[0]) / det;
        dc -= step_dc;
        ac -= step_ac;
        if step_dc.abs().max(step_ac.abs()) < 1e-11 {
            return Ok((dc, ac));
        }
    }
    Err(Error::Convergence { what: "joint sweet spot Newton".into(), iterations: 100 })
}
