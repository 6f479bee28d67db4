//! Flux-noise synthesis, filtering and spectral estimation.
//!
//! PSD convention: two-sided in ordinary frequency, so that
//! ∫_{-∞}^{∞} S(f) df is the variance. A 1/f trace with amplitude A has
//! S(f) = A²/|f|^α, which equals A² at 1 Hz for every α.

use crate::error::{Error, Result};
use crate::seed;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    /// Zero every bin above the corner.
    #[default]
    BrickWall,
    /// Smooth 4th-order rolloff, |H|² = 1/(1 + (f/f_c)^8).
    Butterworth4,
}

/// Flux-noise amplitudes and cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// 1/f amplitude on the parking flux (Φ0).
    pub a_dc_pink: f64,
    /// 1/f amplitude on the modulation amplitude (Φ0).
    pub a_ac_pink: f64,
    /// White amplitude on the parking flux (Φ0/√Hz).
    pub a_dc_white: f64,
    /// White amplitude on the modulation amplitude (Φ0/√Hz).
    pub a_ac_white: f64,
    pub alpha: f64,
    /// Infrared cutoff (Hz).
    pub f_ir_hz: f64,
    /// Ultraviolet cutoff (Hz); sets how many harmonics see white noise.
    pub f_uv_hz: f64,
    /// Optional lowpass corner applied to both white components (Hz).
    pub lowpass_cutoff_hz: Option<f64>,
    #[serde(default)]
    pub filter_shape: FilterShape,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            a_dc_pink: 0.0,
            a_ac_pink: 0.0,
            a_dc_white: 0.0,
            a_ac_white: 0.0,
            alpha: 1.0,
            f_ir_hz: 1.0,
            f_uv_hz: 1e10,
            lowpass_cutoff_hz: None,
            filter_shape: FilterShape::BrickWall,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let amps = [self.a_dc_pink, self.a_ac_pink, self.a_dc_white, self.a_ac_white];
        if amps.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::invalid("noise amplitudes must be non-negative"));
        }
        if !(self.f_ir_hz > 0.0 && self.f_ir_hz < self.f_uv_hz) {
            return Err(Error::invalid(format!("need 0 < f_ir < f_uv, got {} and {}", self.f_ir_hz, self.f_uv_hz)));
        }
        if !(0.5..=1.5).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0.5, 1.5]", self.alpha)));
        }
        if let Some(fc) = self.lowpass_cutoff_hz {
            if !(fc > 0.0) {
                return Err(Error::invalid("lowpass cutoff must be positive"));
            }
        }
        Ok(())
    }

    pub fn has_white(&self) -> bool {
        self.a_dc_white > 0.0 || self.a_ac_white > 0.0
    }

    pub fn has_pink(&self) -> bool {
        self.a_dc_pink > 0.0 || self.a_ac_pink > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    Filtered,
    /// Increments of fractional Brownian motion.
    Fractional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    /// Sample spacing (s).
    pub dt: f64,
    /// Flux deviations (Φ0).
    pub samples: Vec<f64>,
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
    }
}

fn check_grid(dt: f64, n: usize) -> Result<()> {
    if !(dt > 0.0) || n < 2 {
        return Err(Error::invalid(format!("need dt > 0 and n >= 2, got dt={dt}, n={n}")));
    }
    Ok(())
}

/// Discretized delta-correlated noise: i.i.d. Gaussian samples with variance A²/dt.
pub fn synth_white(amplitude: f64, dt: f64, n: usize, seed: u64) -> Result<NoiseTrace> {
    check_grid(dt, n)?;
    let mut rng = seed::rng(seed, "white", 0);
    let std = amplitude / dt.sqrt();
    let samples = (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(NoiseTrace { dt, samples, kind: NoiseKind::White, seed })
}

/// Gaussian trace with prescribed two-sided PSD `psd(f)` by spectral shaping.
///
/// The DC bin is zero; bins 0 < m < n/2 are complex Gaussian with
/// E|X_m|² = n S(f_m)/dt and the Nyquist bin is real, so the periodogram of
/// the result has expectation S(f_m).
pub fn synth_spectral(psd: impl Fn(f64) -> f64, dt: f64, n: usize, seed: u64, kind: NoiseKind) -> Result<NoiseTrace> {
    check_grid(dt, n)?;
    if n % 2 != 0 {
        return Err(Error::invalid(format!("spectral synthesis needs an even length, got {n}")));
    }
    let mut rng = seed::rng(seed, "spectral", 0);
    let df = 1.0 / (n as f64 * dt);
    let scale = n as f64 / dt;
    let mut bins = vec![Complex64::new(0.0, 0.0); n];
    for m in 1..n / 2 {
        let s = psd(m as f64 * df);
        let sd = (0.5 * scale * s).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        bins[m] = Complex64::new(sd * re, sd * im);
        bins[n - m] = bins[m].conj();
    }
    let nyq: f64 = rng.sample(StandardNormal);
    bins[n / 2] = Complex64::new((scale * psd(0.5 / dt)).sqrt() * nyq, 0.0);

    FftPlanner::new().plan_fft_inverse(n).process(&mut bins);
    let inv_n = 1.0 / n as f64;
    let samples = bins.iter().map(|c| c.re * inv_n).collect();
    Ok(NoiseTrace { dt, samples, kind, seed })
}

/// 1/f^α noise with S(f) = A²/|f|^α between 1/(n dt) and the Nyquist frequency.
pub fn synth_pink(amplitude: f64, alpha: f64, dt: f64, n: usize, seed: u64) -> Result<NoiseTrace> {
    if n < 1024 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("pink trace length must be a power of two >= 1024, got {n}")));
    }
    let a2 = amplitude * amplitude;
    synth_spectral(|f| a2 / f.powf(alpha), dt, n, seed, NoiseKind::Pink)
}

/// Increments of fractional Brownian motion with Hurst exponent `hurst`,
/// normalized so that a sum of k consecutive samples has variance (k dt)^{2H}.
///
/// Exact (Davies–Harte circulant embedding). A stationary noise whose
/// integral has variance ∝ t^{2H}: the α → 2H − 1 limit of 1/f^α noise with
/// the infrared cutoff sent to zero.
pub fn synth_fgn(hurst: f64, dt: f64, n: usize, seed: u64) -> Result<NoiseTrace> {
    check_grid(dt, n)?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::domain(format!("Hurst exponent must lie in (0, 1), got {hurst}")));
    }
    let h2 = 2.0 * hurst;
    let acov = |k: usize| {
        let k = k as f64;
        0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
    };
    let m = 2 * n;
    let mut circ: Vec<Complex64> = (0..m).map(|j| Complex64::new(acov(j.min(m - j)), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut circ);
    let mut rng = seed::rng(seed, "fgn", 0);
    let mut bins = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..=n {
        let lam = circ[k].re;
        if lam < -1e-9 * circ[0].re {
            return Err(Error::domain(format!("circulant embedding not positive for H={hurst}, n={n}")));
        }
        let a = (lam.max(0.0) / m as f64).sqrt();
        if k == 0 || k == n {
            bins[k] = Complex64::new(a * rng.sample::<f64, _>(StandardNormal), 0.0);
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            bins[k] = a * std::f64::consts::FRAC_1_SQRT_2 * Complex64::new(re, im);
            bins[m - k] = bins[k].conj();
        }
    }
    planner.plan_fft_forward(m).process(&mut bins);
    let scale = dt.powf(hurst);
    let samples = bins[..n].iter().map(|c| c.re * scale).collect();
    Ok(NoiseTrace { dt, samples, kind: NoiseKind::Fractional, seed })
}

/// Spectral lowpass with a brick wall at `cutoff` (Hz).
pub fn lowpass(trace: &NoiseTrace, cutoff: f64) -> Result<NoiseTrace> {
    lowpass_shaped(trace, cutoff, FilterShape::BrickWall)
}

pub fn lowpass_shaped(trace: &NoiseTrace, cutoff: f64, shape: FilterShape) -> Result<NoiseTrace> {
    let mut out = trace.clone();
    lowpass_in_place(&mut out.samples, trace.dt, cutoff, shape, &mut FftPlanner::new())?;
    out.kind = NoiseKind::Filtered;
    Ok(out)
}

/// In-place variant reusing a planner; the Monte-Carlo loops call this per window.
pub fn lowpass_in_place(
    samples: &mut [f64],
    dt: f64,
    cutoff: f64,
    shape: FilterShape,
    planner: &mut FftPlanner<f64>,
) -> Result<()> {
    let nyquist = 0.5 / dt;
    if !(cutoff > 0.0) || cutoff > nyquist * (1.0 + 1e-12) {
        return Err(Error::domain(format!("lowpass cutoff {cutoff:e} Hz outside (0, Nyquist={nyquist:e}]")));
    }
    let n = samples.len();
    let mut bins: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut bins);
    let df = 1.0 / (n as f64 * dt);
    for (m, b) in bins.iter_mut().enumerate() {
        let f = m.min(n - m) as f64 * df;
        let gain = match shape {
            FilterShape::BrickWall => {
                if f > cutoff {
                    0.0
                } else {
                    1.0
                }
            }
            FilterShape::Butterworth4 => 1.0 / (1.0 + (f / cutoff).powi(8)).sqrt(),
        };
        *b *= gain;
    }
    planner.plan_fft_inverse(n).process(&mut bins);
    let inv_n = 1.0 / n as f64;
    for (x, b) in samples.iter_mut().zip(&bins) {
        *x = b.re * inv_n;
    }
    Ok(())
}

/// One side (f ≥ 0) of a two-sided PSD estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub f_hz: Vec<f64>,
    /// Φ0²/Hz.
    pub s: Vec<f64>,
}

impl Psd {
    /// ∫ S df over both signs of f; equals the trace variance by Parseval.
    pub fn integrated_power(&self) -> f64 {
        let n = self.f_hz.len();
        let df = self.f_hz[1] - self.f_hz[0];
        let inner: f64 = self.s[1..n - 1].iter().sum();
        (self.s[0] + 2.0 * inner + self.s[n - 1]) * df
    }
}

/// Welch estimate: non-overlapping Hann-windowed segments, averaged periodograms.
pub fn estimate_psd(trace: &NoiseTrace, n_segments: usize) -> Result<Psd> {
    if n_segments < 4 {
        return Err(Error::invalid(format!("need at least 4 segments, got {n_segments}")));
    }
    let seg = trace.samples.len() / n_segments;
    if seg < 16 {
        return Err(Error::domain(format!("trace of {} samples too short for {n_segments} segments", trace.len())));
    }
    let seg = seg - seg % 2;
    let window: Vec<f64> = (0..seg)
        .map(|j| 0.5 * (1.0 - (crate::TWO_PI * j as f64 / seg as f64).cos()))
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut acc = vec![0.0; seg / 2 + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    for chunk in trace.samples.chunks_exact(seg).take(n_segments) {
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let norm = trace.dt / (w2 * n_segments as f64);
    let df = 1.0 / (seg as f64 * trace.dt);
    Ok(Psd {
        f_hz: (0..=seg / 2).map(|m| m as f64 * df).collect(),
        s: acc.into_iter().map(|a| a * norm).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kurtosis(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
        x.iter().map(|a| (a - m).powi(4)).sum::<f64>() / n / (v * v) - 3.0
    }

    fn band_mean(p: &Psd, lo: f64, hi: f64) -> f64 {
        let v: Vec<f64> = p.f_hz.iter().zip(&p.s).filter(|(f, _)| **f >= lo && **f <= hi).map(|(_, s)| *s).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn zero_amplitude_traces_vanish() {
        assert!(synth_white(0.0, 1e-6, 100, 1).unwrap().samples.iter().all(|x| *x == 0.0));
        assert!(synth_pink(0.0, 1.0, 1e-6, 1024, 1).unwrap().samples.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn fgn_integral_variance_scaling() {
        let (dt, n, reps) = (1e-9, 256, 4000);
        for hurst in [0.5, 0.75, 0.95] {
            let (mut v1, mut v64, mut v256) = (0.0, 0.0, 0.0);
            for r in 0..reps {
                let x = synth_fgn(hurst, dt, n, r).unwrap().samples;
                v1 += x[0] * x[0];
                let s64: f64 = x[..64].iter().sum();
                let s256: f64 = x.iter().sum();
                v64 += s64 * s64;
                v256 += s256 * s256;
            }
            let want = |k: f64| (k * dt).powf(2.0 * hurst) * reps as f64;
            assert!((v1 / want(1.0) - 1.0).abs() < 0.08, "H={hurst}");
            assert!((v64 / want(64.0) - 1.0).abs() < 0.08, "H={hurst}");
            assert!((v256 / want(256.0) - 1.0).abs() < 0.08, "H={hurst}");
        }
        assert!(synth_fgn(1.0, dt, n, 0).is_err());
    }

    #[test]
    fn white_sample_std() {
        let t = synth_white(10e-9, 50e-9, 1_000_000, 3).unwrap();
        let std = t.variance().sqrt();
        let want = 10e-9 / (50e-9f64).sqrt();
        assert!((std / want - 1.0).abs() < 0.03);
        assert!((want - 4.47e-5).abs() < 0.01e-5);
        assert!(kurtosis(&t.samples).abs() < 0.05);
    }

    #[test]
    fn white_psd_flat() {
        let t = synth_white(10e-9, 50e-9, 1 << 20, 11).unwrap();
        let p = estimate_psd(&t, 64).unwrap();
        let level = 1e-16;
        let n = p.s.len();
        for chunk in p.s[1..n - 1].chunks(n / 8) {
            let m = chunk.iter().sum::<f64>() / chunk.len() as f64;
            assert!((m / level - 1.0).abs() < 0.1, "{m:e}");
        }
        assert!((p.integrated_power() / t.variance() - 1.0).abs() < 0.05);
    }

    #[test]
    fn pink_psd_level_and_slope() {
        let a: f64 = 3.63e-6;
        let (dt, n) = (1e-5, 1 << 16);
        let mut mean_s = None::<Vec<f64>>;
        let mut f = Vec::new();
        for s in 0..50 {
            let t = synth_pink(a, 1.0, dt, n, 1000 + s).unwrap();
            let p = estimate_psd(&t, 8).unwrap();
            f = p.f_hz.clone();
            match mean_s.as_mut() {
                None => mean_s = Some(p.s),
                Some(m) => m.iter_mut().zip(&p.s).for_each(|(x, y)| *x += y),
            }
        }
        let s: Vec<f64> = mean_s.unwrap().into_iter().map(|x| x / 50.0).collect();
        let p = Psd { f_hz: f, s };
        let at100 = band_mean(&p, 90.0, 110.0) / (a * a / 100.0);
        assert!((at100 - 1.0).abs() < 0.1, "ratio {at100}");
        let slope = crate::dephasing::loglog_slope(&p.f_hz, &p.s, 10.0, 1e4);
        assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn alpha_zero_is_white() {
        let a = 2e-8;
        let t = synth_spectral(|f| a * a / f.powf(0.0), 1e-6, 1 << 18, 5, NoiseKind::Pink).unwrap();
        let want = a * a / 1e-6;
        assert!((t.variance() / want - 1.0).abs() < 0.02);
    }

    #[test]
    fn reproducible_and_independent() {
        let a = synth_pink(1e-6, 1.0, 1e-6, 1 << 20, 42).unwrap();
        let b = synth_pink(1e-6, 1.0, 1e-6, 1 << 20, 42).unwrap();
        assert_eq!(a.samples, b.samples);
        let w1 = synth_white(1.0, 1.0, 1_000_000, 1).unwrap();
        let w2 = synth_white(1.0, 1.0, 1_000_000, 2).unwrap();
        let r: f64 = w1.samples.iter().zip(&w2.samples).map(|(x, y)| x * y).sum::<f64>()
            / (w1.variance() * w2.variance()).sqrt()
            / 1e6;
        assert!(r.abs() < 0.01);
        assert!(kurtosis(&a.samples).abs() < 0.05);
    }

    #[test]
    fn synthesis_is_linear_in_amplitude() {
        let a = synth_pink(1e-6, 1.0, 1e-6, 4096, 9).unwrap();
        let b = synth_pink(3e-6, 1.0, 1e-6, 4096, 9).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((3.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-12));
        }
        let w = synth_white(2.0, 1e-3, 100, 9).unwrap();
        let v = synth_white(1.0, 1e-3, 100, 9).unwrap();
        assert!(w.samples.iter().zip(&v.samples).all(|(x, y)| *x == 2.0 * y));
    }

    #[test]
    fn lowpass_at_nyquist_is_identity() {
        let t = synth_white(1.0, 1e-3, 4096, 4).unwrap();
        let f = lowpass(&t, 500.0).unwrap();
        for (x, y) in t.samples.iter().zip(&f.samples) {
            assert!((x - y).abs() < 1e-12 * t.variance().sqrt());
        }
        assert!(lowpass(&t, 501.0).is_err());
    }

    #[test]
    fn lowpass_stopband_and_passband() {
        let f_m = 300e6;
        let dt = 1.0 / (20.0 * f_m);
        let t = synth_white(10e-9, dt, 1 << 20, 8).unwrap();
        let f = lowpass(&t, 1.5 * f_m).unwrap();
        let p_in = estimate_psd(&t, 64).unwrap();
        let p_out = estimate_psd(&f, 64).unwrap();
        let pass = band_mean(&p_out, 0.0, 0.8 * 1.5 * f_m);
        let stop = band_mean(&p_out, 580e6, 620e6);
        assert!(stop < 1e-6 * pass, "stop {stop:e} pass {pass:e}");
        let ratio = pass / band_mean(&p_in, 0.0, 0.8 * 1.5 * f_m);
        assert!((ratio - 1.0).abs() < 0.01, "passband ratio {ratio}");
    }

    #[test]
    fn lowpass_keeps_pink_rms() {
        // 1 ns sampling, corner at 1.5 × 300 MHz: the band above the corner
        // holds ln(500/450)/ln(5e8/238) ≈ 0.7% of the 1/f variance.
        let t = synth_pink(3.63e-6, 1.0, 1e-9, 1 << 22, 77).unwrap();
        let f = lowpass(&t, 450e6).unwrap();
        let ratio = (f.variance() / t.variance()).sqrt();
        assert!((ratio - 1.0).abs() < 0.02, "rms ratio {ratio}");
    }

    #[test]
    fn sine_gives_single_peak() {
        let dt = 1e-3;
        let n = 1 << 14;
        let seg = n / 8;
        let f0 = 100.0 / (seg as f64 * dt);
        let samples = (0..n).map(|j| (crate::TWO_PI * f0 * j as f64 * dt).sin()).collect();
        let t = NoiseTrace { dt, samples, kind: NoiseKind::White, seed: 0 };
        let p = estimate_psd(&t, 8).unwrap();
        let (imax, _) = p.s.iter().enumerate().fold((0, 0.0), |b, (i, s)| if *s > b.1 { (i, *s) } else { b });
        assert!((p.f_hz[imax] - f0).abs() < 1e-9);
        assert!((p.integrated_power() - 0.5).abs() < 0.025);
    }

    #[test]
    fn psd_errors() {
        let t = synth_white(1.0, 1.0, 40, 0).unwrap();
        assert!(estimate_psd(&t, 3).is_err());
        assert!(estimate_psd(&t, 4).is_err());
        assert!(synth_pink(1.0, 1.0, 1.0, 1000, 0).is_err());
    }
}
