//! Dephasing under flux modulation: closed-form rates from the harmonic
//! derivatives, a Monte-Carlo Ramsey experiment with full nonlinear flux
//! transduction, and decay fitting.

use crate::error::{Error, Result};
use crate::modulation::{check_excursion, fourier_series, FourierSeries, ModulationSpec, DEFAULT_HARMONICS, PERIOD_QUADRATURE_POINTS};
use crate::noise::{lowpass_in_place, synth_pink, NoiseSpec};
use crate::seed;
use crate::transmon::{StaticCoeffs, TransmonParams};
use crate::TWO_PI;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Times longer than this are reported as this value with a flag.
pub const T_CLAMP: f64 = 10.0;

/// λ = √(3/2 − γ_E − ln(ω_ir t)), the logarithmic factor of the 1/f rate.
pub fn lambda_factor(f_ir_hz: f64, t: f64) -> Result<f64> {
    let x = TWO_PI * f_ir_hz * t;
    if !(x > 0.0 && x < 0.1) {
        return Err(Error::domain(format!("lambda needs 0 < omega_ir t < 0.1, got {x:e}")));
    }
    Ok((1.5 - EULER_GAMMA - x.ln()).sqrt())
}

/// 1/f rate with λ evaluated at the decay time itself: Γ = λ(1/Γ)·Γ₁ where
/// Γ₁ is the rate per unit λ. Returns (Γ, λ).
pub fn self_consistent_pink_rate(rate_per_lambda: f64, f_ir_hz: f64) -> Result<(f64, f64)> {
    if rate_per_lambda <= 0.0 {
        return Ok((0.0, f64::NAN));
    }
    let mut lambda = 3.0;
    for _ in 0..100 {
        let next = lambda_factor(f_ir_hz, 1.0 / (lambda * rate_per_lambda))?;
        if (next - lambda).abs() < 1e-12 {
            return Ok((next * rate_per_lambda, next));
        }
        lambda = next;
    }
    Err(Error::Convergence { what: "self-consistent lambda".into(), iterations: 100 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingRates {
    /// Gaussian-decay 1/f rate (1/s).
    pub gamma_pink: f64,
    /// Exponential white-noise rate summed over harmonics up to k_uv (1/s).
    pub gamma_white: f64,
    /// White rate with both components independently lowpassed below 2ω_m (1/s).
    pub gamma_white_filtered: f64,
    /// White rate with one lowpass on the total flux signal (1/s).
    pub gamma_white_shared_filter: f64,
    /// Oscillation amplitudes of the white dephasing function, k = 1..=K.
    pub b_k: Vec<f64>,
    pub lambda_used: f64,
    pub k_uv: usize,
}

/// Harmonic cutoff floor(f_uv / f_m), clamped to [1, K].
pub fn harmonic_cutoff(f_uv_hz: f64, f_m_hz: f64, k_max: usize) -> usize {
    ((f_uv_hz / f_m_hz).floor() as usize).clamp(1, k_max.max(1))
}

// ¼ Σ_{k=0}^{kc} (1+δ_k)(d_dc,k² S_dc + d_ac,k² S_ac)
fn white_sum(series: &FourierSeries, kc: usize, s_dc: f64, s_ac: f64) -> f64 {
    (0..=kc.min(series.k_max()))
        .map(|k| {
            let w = if k == 0 { 2.0 } else { 1.0 };
            w * (series.d_dc[k].powi(2) * s_dc + series.d_ac[k].powi(2) * s_ac)
        })
        .sum::<f64>()
        / 4.0
}

pub fn analytic_rates(series: &FourierSeries, spec: &NoiseSpec, f_m_hz: f64, lambda: f64) -> DephasingRates {
    let k_max = series.k_max();
    let k_uv = harmonic_cutoff(spec.f_uv_hz, f_m_hz, k_max);
    let (dc0, ac0) = (series.d_dc[0], series.d_ac[0]);
    let gamma_pink = lambda * (dc0.powi(2) * spec.a_dc_pink.powi(2) + ac0.powi(2) * spec.a_ac_pink.powi(2)).sqrt();
    let (s_dc, s_ac) = (spec.a_dc_white.powi(2), spec.a_ac_white.powi(2));
    let gamma_white = white_sum(series, k_uv, s_dc, s_ac);
    let gamma_white_filtered = white_sum(series, 1, s_dc, s_ac);
    // A single filter on δΦ_dc + δΦ_ac cos(ω_m t) sees the flat level
    // S = A_dc² + ½A_ac² at both 0 and ω_m; only the DC-derivative weights enter.
    let s_total = s_dc + 0.5 * s_ac;
    let gamma_white_shared_filter = white_sum(series, 1, s_total, 0.0);

    let omega_m = TWO_PI * f_m_hz;
    let b_k = (1..=k_max)
        .map(|k| {
            let part = |d: &[f64]| {
                let low: f64 = (0..=k).map(|l| d[k - l] * d[l]).sum();
                let high: f64 = (0..=k_max - k).map(|l| d[k + l] * d[l]).sum();
                low + 2.0 * high
            };
            (s_dc * part(&series.d_dc) + s_ac * part(&series.d_ac)) / (4.0 * k as f64 * omega_m)
        })
        .collect();
    DephasingRates {
        gamma_pink,
        gamma_white,
        gamma_white_filtered,
        gamma_white_shared_filter,
        b_k,
        lambda_used: lambda,
        k_uv,
    }
}

/// γ_w(t) = Γ_w t + Σ_k B_k [sin(k(ω_m t + θ)) − sin(kθ)].
pub fn white_dephasing_function(rates: &DephasingRates, t: f64, f_m_hz: f64, theta: f64) -> f64 {
    let wt = TWO_PI * f_m_hz * t;
    rates.gamma_white * t
        + rates
            .b_k
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let k = (i + 1) as f64;
                b * ((k * (wt + theta)).sin() - (k * theta).sin())
            })
            .sum::<f64>()
}

/// Averaged Ramsey coherence |⟨e^{iφ(t)}⟩|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceCurve {
    pub t: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub n_windows: usize,
    /// Infrared cutoff the 1/f noise of the run actually has (Hz), when there
    /// is any: the spec's f_ir, or the trace resolution if the traces
    /// already reach below it. This sets λ for the run.
    pub pink_f_ir_hz: Option<f64>,
}

/// Monte-Carlo budget for one Ramsey run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub n_windows: usize,
    /// Window length (s).
    pub window_len: f64,
    /// Integration step (s).
    pub dt: f64,
    pub seed: u64,
    /// Number of recorded times after t = 0.
    pub record_points: usize,
}

impl McRun {
    pub fn new(n_windows: usize, window_len: f64, dt: f64, seed: u64) -> Self {
        McRun { n_windows, window_len, dt, seed, record_points: 200 }
    }

    fn steps(&self) -> Result<(usize, usize)> {
        if self.n_windows == 0 || !(self.dt > 0.0) || !(self.window_len >= self.dt) || self.record_points == 0 {
            return Err(Error::invalid(format!("invalid Monte-Carlo budget {self:?}")));
        }
        let raw = (self.window_len / self.dt).round() as usize;
        let stride = (raw / self.record_points).max(1);
        Ok((stride * self.record_points.min(raw), stride))
    }
}

/// How the optional lowpass acts on the two white components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum McNoise {
    /// δΦ_dc and δΦ_ac are filtered separately.
    #[default]
    Independent,
    /// One filter acts on δΦ_dc + δΦ_ac cos(ω_m t).
    SharedFilter,
}

/// Coherence curves from one set of noise draws: only the DC noise, only the
/// AC noise, and both together.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCurves {
    pub dc: CoherenceCurve,
    pub ac: CoherenceCurve,
    pub both: CoherenceCurve,
}

/// Variance per A² of 1/f^α noise that a trace with bin spacing `df` lacks
/// relative to a continuous spectrum cut off at `f_ir`. The trace's discrete
/// mode sum is compared with the integral (Euler–Maclaurin tail past 4096
/// bins). For α = 1 this is 2(ln(df/f_ir) − γ_E). Zero when the trace
/// already reaches below f_ir.
pub fn missing_low_band(alpha: f64, f_ir_hz: f64, df: f64) -> f64 {
    const K: usize = 4096;
    let x0 = f_ir_hz / df;
    let kf = K as f64;
    let integral = if (alpha - 1.0).abs() < 1e-12 { (kf / x0).ln() } else { (kf.powf(1.0 - alpha) - x0.powf(1.0 - alpha)) / (1.0 - alpha) };
    let sum: f64 = (1..=K).map(|m| (m as f64).powf(-alpha)).sum();
    (2.0 * df.powf(1.0 - alpha) * (integral - sum + 0.5 * kf.powf(-alpha))).max(0.0)
}

/// Step used for the slow 1/f component when it is held across fine white-noise steps.
pub const PINK_HOLD_DT: f64 = 50e-9;
/// Windows tiling each independent 1/f trace.
pub const PINK_WINDOWS_PER_TRACE: usize = 8;

/// Effective harmonic cutoff seen by white noise in the Monte-Carlo.
pub fn mc_harmonic_cutoff(spec: &NoiseSpec, f_m_hz: f64) -> usize {
    match spec.lowpass_cutoff_hz {
        Some(fc) => ((fc / f_m_hz).floor() as usize).max(1),
        None => harmonic_cutoff(spec.f_uv_hz, f_m_hz, DEFAULT_HARMONICS),
    }
}

/// Largest step that resolves the carrier for the given noise.
pub fn max_white_dt(spec: &NoiseSpec, f_m_hz: f64) -> f64 {
    1.0 / (20.0 * mc_harmonic_cutoff(spec, f_m_hz) as f64 * f_m_hz)
}

/// Ramsey Monte-Carlo with every noise source in `spec` acting together.
pub fn ramsey_mc(
    params: &TransmonParams,
    modu: &ModulationSpec,
    spec: &NoiseSpec,
    n_windows: usize,
    window_len: f64,
    dt: f64,
    seed: u64,
) -> Result<CoherenceCurve> {
    let run = McRun::new(n_windows, window_len, dt, seed);
    Ok(run_engine(params, modu, spec, &run, McNoise::Independent, false)?.pop().unwrap())
}

/// As [`ramsey_mc`] with an explicit budget and filter topology.
pub fn ramsey_mc_with(
    params: &TransmonParams,
    modu: &ModulationSpec,
    spec: &NoiseSpec,
    run: &McRun,
    topology: McNoise,
) -> Result<CoherenceCurve> {
    Ok(run_engine(params, modu, spec, run, topology, false)?.pop().unwrap())
}

/// DC-only, AC-only and combined curves driven by the same noise draws.
pub fn ramsey_mc_split(params: &TransmonParams, modu: &ModulationSpec, spec: &NoiseSpec, run: &McRun) -> Result<SplitCurves> {
    let mut v = run_engine(params, modu, spec, run, McNoise::Independent, true)?;
    let both = v.pop().unwrap();
    let ac = v.pop().unwrap();
    let dc = v.pop().unwrap();
    Ok(SplitCurves { dc, ac, both })
}

// Windows are reduced in fixed-size chunks, and chunk partial sums are added
// in chunk order, so the result does not depend on the thread count.
const CHUNK: usize = 8;

fn run_engine(
    params: &TransmonParams,
    modu: &ModulationSpec,
    spec: &NoiseSpec,
    run: &McRun,
    topology: McNoise,
    split: bool,
) -> Result<Vec<CoherenceCurve>> {
    spec.validate()?;
    modu.validate()?;
    let (n_steps, stride) = run.steps()?;
    let n_rec = n_steps / stride;
    check_excursion(params, modu.phi_dc, modu.phi_ac)?;

    let resolved = run.dt <= 1.0 / (20.0 * modu.f_m_hz) * (1.0 + 1e-9);
    if spec.has_white() && run.dt > max_white_dt(spec, modu.f_m_hz) * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "dt={:e} s does not resolve {} harmonics of f_m={:e} Hz (need <= {:e})",
            run.dt,
            mc_harmonic_cutoff(spec, modu.f_m_hz),
            modu.f_m_hz,
            max_white_dt(spec, modu.f_m_hz)
        )));
    }
    if topology == McNoise::SharedFilter && (split || spec.lowpass_cutoff_hz.is_none()) {
        return Err(Error::invalid("shared-filter runs need a lowpass cutoff and cannot be split"));
    }
    let n_comp = if split { 3 } else { 1 };

    // Slow 1/f traces: short independent realizations, each tiled end to end
    // by a few windows. Few long traces would leave the modes just below the
    // window rate with only a handful of draws.
    let pink_dt = if resolved { PINK_HOLD_DT.max(run.dt) } else { run.dt };
    let pink_per_window = ((n_steps as f64 * run.dt / pink_dt).ceil() as usize).max(1) + 1;
    let windows_per_trace = PINK_WINDOWS_PER_TRACE.min(run.n_windows);
    let n_traces = run.n_windows.div_ceil(windows_per_trace);
    let trace_len = (pink_per_window * windows_per_trace).next_power_of_two().max(1024);
    let make_pink = |a: f64, tag: &str| -> Result<Option<Vec<f64>>> {
        if a == 0.0 {
            return Ok(None);
        }
        let mut all = Vec::with_capacity(n_traces * trace_len);
        for i in 0..n_traces {
            let s = seed::derive(run.seed, tag, i as u64);
            all.extend(synth_pink(a, spec.alpha, pink_dt, trace_len, s)?.samples);
        }
        Ok(Some(all))
    };
    let pink_dc = make_pink(spec.a_dc_pink, "pink-dc")?;
    let pink_ac = make_pink(spec.a_ac_pink, "pink-ac")?;

    // Modes between f_ir and the trace resolution are static over a window;
    // they enter as one Gaussian offset per window.
    let df = 1.0 / (trace_len as f64 * pink_dt);
    let missing = if spec.has_pink() { missing_low_band(spec.alpha, spec.f_ir_hz, df) } else { 0.0 };
    let offsets = |a: f64, tag: &str| -> Option<Vec<f64>> {
        (a > 0.0 && missing > 0.0).then(|| {
            let sd = a * missing.sqrt();
            let mut rng = seed::rng(run.seed, tag, 0);
            (0..run.n_windows).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        })
    };
    let offset_dc = offsets(spec.a_dc_pink, "pink-dc-offset");
    let offset_ac = offsets(spec.a_ac_pink, "pink-ac-offset");
    let peak = |v: &Option<Vec<f64>>| v.as_ref().map(|v| v.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    if let Some(m) = [peak(&pink_dc), peak(&pink_ac)]
        .into_iter()
        .zip([peak(&offset_dc), peak(&offset_ac)])
        .filter_map(|(p, o)| p.map(|p| p + o.unwrap_or(0.0)))
        .reduce(f64::max)
    {
        check_excursion(params, modu.phi_dc, modu.phi_ac + 2.0 * m)
            .map_err(|e| Error::domain(format!("noise excursion leaves perturbative range: {e}")))?;
    }

    let ctx = Ctx {
        params,
        spec,
        run,
        n_steps,
        stride,
        n_rec,
        n_comp,
        topology,
        pink_dc: pink_dc.as_deref(),
        pink_ac: pink_ac.as_deref(),
        offset_dc: offset_dc.as_deref(),
        offset_ac: offset_ac.as_deref(),
        pink_dt,
        windows_per_trace,
        trace_len,
    };

    let partials: Vec<Result<Vec<Complex64>>> = if resolved {
        let nominal = Nominal::new(params, modu, run.dt, n_steps);
        (0..run.n_windows.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![Complex64::new(0.0, 0.0); n_comp * (n_rec + 1)];
                let mut planner = FftPlanner::new();
                for w in c * CHUNK..((c + 1) * CHUNK).min(run.n_windows) {
                    ctx.resolved_window(&nominal, w, &mut acc, &mut planner)?;
                }
                Ok(acc)
            })
            .collect()
    } else {
        let avg = PeriodAverage::new(params, modu.phi_dc, modu.phi_ac);
        (0..run.n_windows.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![Complex64::new(0.0, 0.0); n_comp * (n_rec + 1)];
                for w in c * CHUNK..((c + 1) * CHUNK).min(run.n_windows) {
                    ctx.averaged_window(&avg, w, &mut acc)?;
                }
                Ok(acc)
            })
            .collect()
    };
    let mut total = vec![Complex64::new(0.0, 0.0); n_comp * (n_rec + 1)];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p?) {
            *t += v;
        }
    }
    let t: Vec<f64> = (0..=n_rec).map(|r| (r * stride) as f64 * run.dt).collect();
    let inv = 1.0 / run.n_windows as f64;
    Ok((0..n_comp)
        .map(|c| CoherenceCurve {
            t: t.clone(),
            magnitude: total[c * (n_rec + 1)..(c + 1) * (n_rec + 1)].iter().map(|z| z.norm() * inv).collect(),
            n_windows: run.n_windows,
            pink_f_ir_hz: spec.has_pink().then(|| if missing > 0.0 { spec.f_ir_hz } else { df }),
        })
        .collect())
}

struct Ctx<'a> {
    params: &'a TransmonParams,
    spec: &'a NoiseSpec,
    run: &'a McRun,
    n_steps: usize,
    stride: usize,
    n_rec: usize,
    n_comp: usize,
    topology: McNoise,
    pink_dc: Option<&'a [f64]>,
    pink_ac: Option<&'a [f64]>,
    offset_dc: Option<&'a [f64]>,
    offset_ac: Option<&'a [f64]>,
    pink_dt: f64,
    windows_per_trace: usize,
    trace_len: usize,
}

// Nominal flux and frequency at step midpoints; identical for every window
// because each Ramsey shot restarts the carrier.
struct Nominal {
    phi: Vec<f64>,
    omega: Vec<f64>,
    cos: Vec<f64>,
}

impl Nominal {
    fn new(params: &TransmonParams, modu: &ModulationSpec, dt: f64, n: usize) -> Self {
        let mut phi = Vec::with_capacity(n);
        let mut omega = Vec::with_capacity(n);
        let mut cos = Vec::with_capacity(n);
        for j in 0..n {
            let c = modu.carrier((j as f64 + 0.5) * dt).cos();
            let p = modu.phi_dc + modu.phi_ac * c;
            phi.push(p);
            omega.push(params.frequency_unchecked(p));
            cos.push(c);
        }
        Nominal { phi, omega, cos }
    }
}

// Period average of ω_T over the carrier, for noise much slower than it.
struct PeriodAverage {
    nodes: Vec<f64>,
    nominal: f64,
    phi_dc: f64,
    phi_ac: f64,
}

impl PeriodAverage {
    fn new(params: &TransmonParams, phi_dc: f64, phi_ac: f64) -> Self {
        let n = PERIOD_QUADRATURE_POINTS;
        let nodes: Vec<f64> = (0..n).map(|j| (TWO_PI * j as f64 / n as f64).cos()).collect();
        let mut s = PeriodAverage { nodes, nominal: 0.0, phi_dc, phi_ac };
        s.nominal = s.eval(params, 0.0, 0.0);
        s
    }

    #[inline]
    fn eval(&self, params: &TransmonParams, d_dc: f64, d_ac: f64) -> f64 {
        let (dc, ac) = (self.phi_dc + d_dc, self.phi_ac + d_ac);
        self.nodes.iter().map(|c| params.frequency_unchecked(dc + ac * c)).sum::<f64>() / self.nodes.len() as f64
    }
}

impl Ctx<'_> {
    #[inline]
    fn pink_at(&self, w: usize, t: f64) -> (f64, f64) {
        let (trace, slot) = (w / self.windows_per_trace, w % self.windows_per_trace);
        let idx = trace * self.trace_len + slot * (self.trace_len / self.windows_per_trace) + (t / self.pink_dt) as usize;
        let at = |p: Option<&[f64]>, o: Option<&[f64]>| p.map_or(0.0, |p| p[idx]) + o.map_or(0.0, |o| o[w]);
        (at(self.pink_dc, self.offset_dc), at(self.pink_ac, self.offset_ac))
    }

    fn record(&self, acc: &mut [Complex64], r: usize, phases: &[f64; 3]) {
        for c in 0..self.n_comp {
            acc[c * (self.n_rec + 1) + r] += Complex64::from_polar(1.0, phases[c]);
        }
    }

    // Which (dc, ac) noise sources each output component sees.
    fn components(&self) -> &'static [(bool, bool)] {
        if self.n_comp == 3 {
            &[(true, false), (false, true), (true, true)]
        } else {
            &[(true, true)]
        }
    }

    fn resolved_window(&self, nominal: &Nominal, w: usize, acc: &mut [Complex64], planner: &mut FftPlanner<f64>) -> Result<()> {
        let n = self.n_steps;
        let dt = self.run.dt;
        let spec = self.spec;
        let mut dc = vec![0.0; n];
        let mut ac = vec![0.0; n];
        if spec.has_white() {
            let fill = |buf: &mut [f64], a: f64, tag: &str| {
                if a > 0.0 {
                    let mut rng = seed::rng(self.run.seed, tag, w as u64);
                    let sd = a / dt.sqrt();
                    buf.iter_mut().for_each(|x| *x = sd * rng.sample::<f64, _>(StandardNormal));
                }
            };
            fill(&mut dc, spec.a_dc_white, "white-dc");
            fill(&mut ac, spec.a_ac_white, "white-ac");
            if let Some(fc) = spec.lowpass_cutoff_hz {
                let shape = spec.filter_shape;
                match self.topology {
                    McNoise::Independent => {
                        lowpass_in_place(&mut dc, dt, fc, shape, planner)?;
                        lowpass_in_place(&mut ac, dt, fc, shape, planner)?;
                    }
                    McNoise::SharedFilter => {
                        for j in 0..n {
                            dc[j] += ac[j] * nominal.cos[j];
                            ac[j] = 0.0;
                        }
                        lowpass_in_place(&mut dc, dt, fc, shape, planner)?;
                    }
                }
            }
        }
        if self.pink_dc.is_some() || self.pink_ac.is_some() {
            for j in 0..n {
                let (pd, pa) = self.pink_at(w, j as f64 * dt);
                dc[j] += pd;
                ac[j] += pa;
            }
        }

        let comps = self.components();
        let mut phases = [0.0f64; 3];
        self.record(acc, 0, &phases);
        for j in 0..n {
            let (p0, w0, c) = (nominal.phi[j], nominal.omega[j], nominal.cos[j]);
            for (k, &(use_dc, use_ac)) in comps.iter().enumerate() {
                let d = if use_dc { dc[j] } else { 0.0 } + if use_ac { ac[j] * c } else { 0.0 };
                phases[k] += dt * (self.params.frequency_unchecked(p0 + d) - w0);
            }
            if (j + 1) % self.stride == 0 {
                self.record(acc, (j + 1) / self.stride, &phases);
            }
        }
        Ok(())
    }

    fn averaged_window(&self, avg: &PeriodAverage, w: usize, acc: &mut [Complex64]) -> Result<()> {
        let dt = self.run.dt;
        let comps = self.components();
        let mut phases = [0.0f64; 3];
        self.record(acc, 0, &phases);
        for j in 0..self.n_steps {
            let (pd, pa) = self.pink_at(w, j as f64 * dt);
            for (k, &(use_dc, use_ac)) in comps.iter().enumerate() {
                let d_dc = if use_dc { pd } else { 0.0 };
                let d_ac = if use_ac { pa } else { 0.0 };
                phases[k] += dt * (avg.eval(self.params, d_dc, d_ac) - avg.nominal);
            }
            if (j + 1) % self.stride == 0 {
                self.record(acc, (j + 1) / self.stride, &phases);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// γ(t) = (Γt)^β.
    Stretched,
    /// γ(t) = Γ_w t + (Γ_p t)².
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Rate (1/s); for the combined model the inverse 1/e time.
    pub gamma: f64,
    /// Stretch exponent; for the combined model the local log-slope at the 1/e time.
    pub beta: f64,
    /// RMS residual of ln γ(t).
    pub residual: f64,
    pub model: DecayModel,
    /// The curve never reached 1/e; the rate is an extrapolation.
    pub censored: bool,
    /// Linear coefficient Γ_w of the combined model.
    pub linear_rate: Option<f64>,
    /// Quadratic rate Γ_p of the combined model.
    pub quadratic_rate: Option<f64>,
}

/// Upper bound on the log-space RMS residual accepted by [`fit_decay`].
pub const FIT_RESIDUAL_LIMIT: f64 = 0.25;

/// Least-squares slope of ln s against ln f over lo ≤ f ≤ hi.
pub fn loglog_slope(f: &[f64], s: &[f64], lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = f
        .iter()
        .zip(s)
        .filter(|(x, y)| **x >= lo && **x <= hi && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    linear_fit(&pts).0
}

// Ordinary least squares y = a x + b; returns (a, b).
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// Fits γ(t) = −ln|ρ01(t)| on the part of the curve above the Monte-Carlo
/// noise floor 3/√N and above γ = 0.02.
pub fn fit_decay(curve: &CoherenceCurve, model: DecayModel) -> Result<DecayFit> {
    let floor = (3.0 / (curve.n_windows as f64).sqrt()).max(0.02);
    let gamma_hi = -floor.ln();
    let pts: Vec<(f64, f64)> = curve
        .t
        .iter()
        .zip(&curve.magnitude)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, m)| (*t, -m.ln()))
        .take_while(|(_, g)| *g <= gamma_hi || g.is_nan())
        .filter(|(_, g)| *g >= 0.02 && g.is_finite())
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitQuality { reason: format!("only {} usable points", pts.len()), residual: f64::NAN });
    }
    let censored = curve.magnitude.iter().all(|m| *m > (-1.0f64).exp());
    let fit = match model {
        DecayModel::Stretched => {
            let logs: Vec<(f64, f64)> = pts.iter().map(|(t, g)| (t.ln(), g.ln())).collect();
            let (beta, c) = linear_fit(&logs);
            let residual = rms(logs.iter().map(|(x, y)| y - (beta * x + c)));
            DecayFit {
                gamma: (c / beta).exp(),
                beta,
                residual,
                model,
                censored,
                linear_rate: None,
                quadratic_rate: None,
            }
        }
        DecayModel::Combined => {
            // Normal equations for g = a t + b t².
            let (mut s2, mut s3, mut s4, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (t, g) in &pts {
                s2 += t * t;
                s3 += t * t * t;
                s4 += t * t * t * t;
                y1 += g * t;
                y2 += g * t * t;
            }
            let det = s2 * s4 - s3 * s3;
            let a = (y1 * s4 - y2 * s3) / det;
            let b = (s2 * y2 - s3 * y1) / det;
            let te = if b > 0.0 { (-a + (a * a + 4.0 * b).sqrt()) / (2.0 * b) } else { 1.0 / a };
            let residual = rms(pts.iter().map(|(t, g)| (a * t + b * t * t).max(1e-300).ln() - g.ln()));
            DecayFit {
                gamma: 1.0 / te,
                beta: 1.0 + b.max(0.0) * te * te,
                residual,
                model,
                censored,
                linear_rate: Some(a),
                quadratic_rate: Some(b.max(0.0).sqrt()),
            }
        }
    };
    if !(fit.gamma > 0.0 && fit.gamma.is_finite()) || !(0.5..=2.5).contains(&fit.beta) || fit.residual > FIT_RESIDUAL_LIMIT {
        return Err(Error::FitQuality {
            reason: format!("gamma={:e}, beta={:.3}", fit.gamma, fit.beta),
            residual: fit.residual,
        });
    }
    Ok(fit)
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (s / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Analytic,
    Mc,
}

/// One row of a dephasing sweep. Times are clamped to [`T_CLAMP`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub phi_ac: f64,
    pub tphi_pink: f64,
    pub tphi_white: f64,
    pub tphi_white_lp: f64,
    pub beta: f64,
    /// At least one time hit the clamp or the fit was censored.
    pub clamped: bool,
}

/// Budgets for Monte-Carlo sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    pub pink_windows: usize,
    pub pink_window_s: f64,
    pub pink_dt_s: f64,
    pub white_windows: usize,
    pub white_window_s: f64,
    /// Step for white runs; `None` picks 1/(20 k_uv f_m).
    pub white_dt_s: Option<f64>,
    pub seed: u64,
}

impl Default for McBudget {
    fn default() -> Self {
        McBudget {
            pink_windows: 4000,
            pink_window_s: 250e-6,
            pink_dt_s: 50e-9,
            white_windows: 2000,
            white_window_s: 20e-6,
            white_dt_s: None,
            seed: 1,
        }
    }
}

fn clamp_time(rate: f64) -> (f64, bool) {
    if rate > 1.0 / T_CLAMP {
        (1.0 / rate, false)
    } else {
        (T_CLAMP, true)
    }
}

/// Dephasing times over a grid of modulation amplitudes.
///
/// Analytic mode evaluates the closed-form rates, with λ taken at the 1/f
/// decay time itself. Monte-Carlo mode runs separate Ramsey experiments for
/// the 1/f part, the unfiltered white part, and the white part with a lowpass
/// (the spec's corner, or 1.5 f_m if none is set).
pub fn sweep_dephasing(
    params: &TransmonParams,
    coeffs: &StaticCoeffs,
    spec: &NoiseSpec,
    f_m_hz: f64,
    phi_dc: f64,
    phi_ac_grid: &[f64],
    mode: SweepMode,
    budget: &McBudget,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let lp = spec.lowpass_cutoff_hz.unwrap_or(1.5 * f_m_hz);
    phi_ac_grid
        .iter()
        .enumerate()
        .map(|(i, &phi_ac)| match mode {
            SweepMode::Analytic => {
                let series = fourier_series(coeffs, phi_dc, phi_ac, DEFAULT_HARMONICS)?;
                let unit = analytic_rates(&series, spec, f_m_hz, 1.0);
                let (gp, _) = self_consistent_pink_rate(unit.gamma_pink, spec.f_ir_hz)?;
                let (tp, c1) = clamp_time(gp);
                let (tw, c2) = clamp_time(unit.gamma_white);
                let (tl, c3) = clamp_time(unit.gamma_white_filtered);
                let beta = local_exponent(gp, unit.gamma_white);
                let clamped = (spec.has_pink() && c1) || (spec.has_white() && (c2 || c3));
                Ok(SweepRow { phi_ac, tphi_pink: tp, tphi_white: tw, tphi_white_lp: tl, beta, clamped })
            }
            SweepMode::Mc => {
                let modu = ModulationSpec::continuous(phi_dc, phi_ac, f_m_hz, budget.pink_window_s.max(budget.white_window_s));
                let mut row = SweepRow { phi_ac, tphi_pink: T_CLAMP, tphi_white: T_CLAMP, tphi_white_lp: T_CLAMP, beta: f64::NAN, clamped: false };
                let fit_time = |s: NoiseSpec, run: McRun| -> Result<(f64, f64, bool)> {
                    let curve = ramsey_mc_with(params, &modu, &s, &run, McNoise::Independent)?;
                    match fit_decay(&curve, DecayModel::Stretched) {
                        Ok(f) => {
                            let (t, c) = clamp_time(f.gamma);
                            Ok((t, f.beta, c || f.censored))
                        }
                        Err(Error::FitQuality { .. }) => Ok((T_CLAMP, f64::NAN, true)),
                        Err(e) => Err(e),
                    }
                };
                if spec.has_pink() {
                    let s = NoiseSpec { a_dc_white: 0.0, a_ac_white: 0.0, lowpass_cutoff_hz: None, ..*spec };
                    let run = McRun::new(budget.pink_windows, budget.pink_window_s, budget.pink_dt_s, seed::derive(budget.seed, "sweep-pink", i as u64));
                    let (t, b, c) = fit_time(s, run)?;
                    row.tphi_pink = t;
                    row.beta = b;
                    row.clamped |= c;
                }
                if spec.has_white() {
                    let white = NoiseSpec { a_dc_pink: 0.0, a_ac_pink: 0.0, lowpass_cutoff_hz: None, ..*spec };
                    let dt = budget.white_dt_s.unwrap_or_else(|| max_white_dt(&white, f_m_hz));
                    let run = McRun::new(budget.white_windows, budget.white_window_s, dt, seed::derive(budget.seed, "sweep-white", i as u64));
                    let (t, b, c) = fit_time(white, run)?;
                    row.tphi_white = t;
                    if row.beta.is_nan() {
                        row.beta = b;
                    }
                    row.clamped |= c;
                    let filtered = NoiseSpec { lowpass_cutoff_hz: Some(lp), ..white };
                    let dt = budget.white_dt_s.unwrap_or_else(|| max_white_dt(&filtered, f_m_hz));
                    let run = McRun::new(budget.white_windows, budget.white_window_s, dt, seed::derive(budget.seed, "sweep-white-lp", i as u64));
                    let (t, _, c) = fit_time(filtered, run)?;
                    row.tphi_white_lp = t;
                    row.clamped |= c;
                }
                Ok(row)
            }
        })
        .collect()
}

/// Log-slope of γ(t) = (Γ_p t)² + Γ_w t at its 1/e time.
fn local_exponent(gp: f64, gw: f64) -> f64 {
    if gp <= 0.0 && gw <= 0.0 {
        return f64::NAN;
    }
    let te = if gp > 0.0 { (-gw + (gw * gw + 4.0 * gp * gp).sqrt()) / (2.0 * gp * gp) } else { 1.0 / gw };
    2.0 * (gp * te).powi(2) + gw * te
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfn::SeriesTolerance;
    use crate::transmon::{calibrate, static_coeffs, QubitBand};

    fn device() -> (TransmonParams, StaticCoeffs) {
        let p = calibrate(&QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.1e9, eta0_hz: 0.2e9 }).unwrap();
        let c = static_coeffs(&p, SeriesTolerance::default()).unwrap();
        (p, c)
    }

    fn synthetic(f: impl Fn(f64) -> f64, t_max: f64) -> CoherenceCurve {
        let t: Vec<f64> = (0..=400).map(|i| i as f64 * t_max / 400.0).collect();
        let magnitude = t.iter().map(|t| f(*t)).collect();
        CoherenceCurve { t, magnitude, n_windows: 1_000_000, pink_f_ir_hz: None }
    }

    #[test]
    fn missing_band_closed_form() {
        let got = missing_low_band(1.0, 1.0, 125.0);
        assert!((got - 2.0 * (125f64.ln() - EULER_GAMMA)).abs() < 1e-7, "{got}");
        assert_eq!(missing_low_band(1.0, 1.0, 1.5), 0.0);
        // α = 1/2: Σ_{m ≤ K} m^{-1/2} → 2√K + ζ(1/2), so the gap is 2(−2√x0 − ζ(1/2)).
        let zeta_half = -1.460_354_508_809_586_8;
        let want = 2.0 * (-2.0 * 0.1f64.sqrt() - zeta_half);
        assert!((missing_low_band(0.5, 0.1, 1.0) - want).abs() < 1e-6);
    }

    #[test]
    fn lambda_examples() {
        let l = lambda_factor(1.0, 10e-6).unwrap();
        let direct = (1.5 - 0.5772 - (TWO_PI * 1e-5f64).ln()).sqrt();
        assert!((l - 3.26).abs() < 0.01 && (l - direct).abs() < 1e-4);
        assert!(lambda_factor(1.0, 20e-6).unwrap() < l);
        assert!(lambda_factor(1.0, 1.0).is_err());
        let (g, lam) = self_consistent_pink_rate(1e4, 1.0).unwrap();
        assert!((g - lam * 1e4).abs() < 1e-6 && (lam - lambda_factor(1.0, 1.0 / g).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn no_modulation_parked_rates_vanish() {
        let (_, c) = device();
        let spec = NoiseSpec { a_dc_pink: 3.63e-6, a_ac_pink: 3.63e-6, a_dc_white: 1e-8, a_ac_white: 1e-8, ..Default::default() };
        let s = fourier_series(&c, 0.0, 0.0, DEFAULT_HARMONICS).unwrap();
        let r = analytic_rates(&s, &spec, 300e6, 3.0);
        assert_eq!(r.gamma_pink, 0.0);
        assert_eq!(r.gamma_white, 0.0);
    }

    #[test]
    fn sweet_spot_kills_pink_and_filtered_white() {
        let (_, c) = device();
        let star = crate::modulation::find_ac_sweet_spot(&c, 0.0, (0.4, 0.8)).unwrap();
        let spec = NoiseSpec { a_dc_pink: 3.63e-6, a_ac_pink: 3.63e-6, a_dc_white: 1e-8, a_ac_white: 1e-8, ..Default::default() };
        let s = fourier_series(&c, 0.0, star, DEFAULT_HARMONICS).unwrap();
        let r = analytic_rates(&s, &spec, 300e6, 3.0);
        let away = analytic_rates(&fourier_series(&c, 0.0, 0.3, DEFAULT_HARMONICS).unwrap(), &spec, 300e6, 3.0);
        assert!(r.gamma_pink < 1e-6 * away.gamma_pink);
        assert!(r.gamma_white_filtered < 1e-10 * away.gamma_white_filtered);
        assert!(r.gamma_white > 0.1 * away.gamma_white);
        assert!(r.gamma_white_filtered <= r.gamma_white);
    }

    #[test]
    fn parked_pink_rate_is_multiplicative_only() {
        let (_, c) = device();
        let spec = NoiseSpec { a_dc_pink: 3.63e-6, a_ac_pink: 2e-6, ..Default::default() };
        let s = fourier_series(&c, 0.0, 0.3, DEFAULT_HARMONICS).unwrap();
        let r = analytic_rates(&s, &spec, 300e6, 3.0);
        assert!((r.gamma_pink - 3.0 * s.d_ac[0].abs() * 2e-6).abs() < 1e-9 * r.gamma_pink);
    }

    #[test]
    fn filtered_rate_matches_parked_closed_form() {
        let (_, c) = device();
        let spec = NoiseSpec { a_dc_white: 1e-8, a_ac_white: 2e-8, ..Default::default() };
        for ac in [0.1, 0.3, 0.55] {
            let s = fourier_series(&c, 0.0, ac, DEFAULT_HARMONICS).unwrap();
            let r = analytic_rates(&s, &spec, 300e6, 3.0);
            let closed = s.d_ac[0].powi(2) * (1e-16 + 0.5 * 4e-16);
            assert!((r.gamma_white_filtered / closed - 1.0).abs() < 1e-8);
            assert!((r.gamma_white_shared_filter / closed - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn b_k_scale_inversely_with_modulation_frequency() {
        let (_, c) = device();
        let spec = NoiseSpec { a_dc_white: 1e-8, a_ac_white: 1e-8, ..Default::default() };
        let s = fourier_series(&c, 0.1, 0.4, DEFAULT_HARMONICS).unwrap();
        let r1 = analytic_rates(&s, &spec, 100e6, 3.0);
        let r2 = analytic_rates(&s, &spec, 200e6, 3.0);
        for (a, b) in r1.b_k.iter().zip(&r2.b_k) {
            assert!((a / b - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn white_dephasing_function_matches_direct_integral() {
        // ½A² ∫₀ᵗ (∂ω_T/∂Φ)² dt for additive noise, by quadrature of the
        // flux derivative of the static band along the carrier.
        let (p, c) = device();
        let (dc, ac, fm) = (0.1, 0.35, 100e6);
        let a = 1e-8;
        let spec = NoiseSpec { a_dc_white: a, ..Default::default() };
        let s = fourier_series(&c, dc, ac, 16).unwrap();
        let r = analytic_rates(&s, &spec, fm, 3.0);
        let slope = |phi: f64| (p.frequency(phi + 1e-6).unwrap() - p.frequency(phi - 1e-6).unwrap()) / 2e-6;
        let t_end = 2.37 / fm;
        let n = 20000;
        let h = t_end / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            integral += slope(dc + ac * (TWO_PI * fm * t).cos()).powi(2) * h;
        }
        let direct = 0.5 * a * a * integral;
        let model = white_dephasing_function(&r, t_end, fm, 0.0);
        assert!((model / direct - 1.0).abs() < 1e-5, "{model:e} vs {direct:e}");
    }

    #[test]
    fn fit_recovers_own_models() {
        let g = fit_decay(&synthetic(|t| (-(1e5 * t).powi(2)).exp(), 40e-6), DecayModel::Stretched).unwrap();
        assert!((g.gamma / 1e5 - 1.0).abs() < 1e-3 && (g.beta - 2.0).abs() < 0.01);
        let e = fit_decay(&synthetic(|t| (-1e4 * t).exp(), 500e-6), DecayModel::Stretched).unwrap();
        assert!((e.gamma / 1e4 - 1.0).abs() < 1e-6 && (e.beta - 1.0).abs() < 1e-6);
        let c = fit_decay(&synthetic(|t| (-(2e4 * t) - (3e4 * t).powi(2)).exp(), 100e-6), DecayModel::Combined).unwrap();
        assert!((c.linear_rate.unwrap() / 2e4 - 1.0).abs() < 1e-6);
        assert!((c.quadratic_rate.unwrap() / 3e4 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_flags_censoring_and_rejects_flat_curves() {
        let c = fit_decay(&synthetic(|t| (-1e3 * t).exp(), 500e-6), DecayModel::Stretched).unwrap();
        assert!(c.censored);
        assert!(matches!(fit_decay(&synthetic(|_| 1.0, 1e-3), DecayModel::Stretched), Err(Error::FitQuality { .. })));
    }

    #[test]
    fn zero_noise_keeps_full_coherence() {
        let (p, _) = device();
        let modu = ModulationSpec::continuous(0.0, 0.3, 300e6, 1e-6);
        let spec = NoiseSpec::default();
        let curve = ramsey_mc(&p, &modu, &spec, 4, 1e-6, 1e-10, 1).unwrap();
        assert!(curve.magnitude.iter().all(|m| (*m - 1.0).abs() < 1e-12));
        assert_eq!(curve.magnitude[0], 1.0);
    }

    #[test]
    fn mc_is_deterministic_across_thread_counts() {
        let (p, _) = device();
        let modu = ModulationSpec::continuous(0.0, 0.3, 300e6, 2e-6);
        let spec = NoiseSpec { a_dc_white: 1e-8, a_ac_white: 1e-8, lowpass_cutoff_hz: Some(450e6), ..Default::default() };
        let run = McRun::new(20, 2e-6, max_white_dt(&spec, 300e6), 5);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| ramsey_mc_split(&p, &modu, &spec, &run).unwrap());
        let b = three.install(|| ramsey_mc_split(&p, &modu, &spec, &run).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mc_rejects_coarse_white_step() {
        let (p, _) = device();
        let modu = ModulationSpec::continuous(0.0, 0.3, 300e6, 1e-6);
        let spec = NoiseSpec { a_dc_white: 1e-8, ..Default::default() };
        assert!(ramsey_mc(&p, &modu, &spec, 4, 1e-6, 1e-9, 1).is_err());
    }

    #[test]
    fn analytic_sweep_clamps_at_parked_point() {
        let (p, c) = device();
        let spec = NoiseSpec { a_ac_pink: 3.63e-6, ..Default::default() };
        let rows = sweep_dephasing(&p, &c, &spec, 300e6, 0.0, &[0.0, 0.3], SweepMode::Analytic, &McBudget::default()).unwrap();
        assert_eq!(rows[0].tphi_pink, T_CLAMP);
        assert!(rows[0].clamped);
        assert!(rows[1].tphi_pink < 1e-3 && !rows[1].clamped);
    }
}
