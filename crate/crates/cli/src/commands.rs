use crate::config::{ParamsHz, RunConfig};
use crate::output::{write_csv, write_json};
use crate::{CliError, Command, GateSel, Mode, NoiseSel};
use fluxmod::dephasing::{sweep_dephasing, SweepMode};
use fluxmod::modulation::{fourier_series, find_ac_sweet_spot, find_joint_sweet_spot};
use fluxmod::noise::{estimate_psd, synth_pink, synth_white};
use fluxmod::transmon::static_coeffs;
use fluxmod::twoqubit::{coherent_noise_average, effective_coupling_closed, fidelity_sweep, gate_frequencies, EvolveOptions};
use fluxmod::{seed, GateKind, HarnessConfig, NoiseSpec, QubitBand, SeriesTolerance, TWO_PI};
use serde::Serialize;
use std::path::Path;

pub fn execute(cmd: &Command, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    match cmd {
        Command::Calibrate => calibrate(cfg, out),
        Command::Spectrum { points } => spectrum(cfg, out, *points),
        Command::Fourier { harmonics } => fourier(cfg, out, *harmonics),
        Command::SweetSpot { bracket_lo, bracket_hi, joint } => sweet_spot(cfg, out, (*bracket_lo, *bracket_hi), *joint),
        Command::NoiseGen => noise_gen(cfg, out),
        Command::NoisePsd => noise_psd(cfg, out),
        Command::Dephasing { mode, noise, filter } => dephasing(cfg, out, *mode, *noise, *filter),
        Command::GateFreqs => gate_freqs(cfg, out),
        Command::GateFidelity { gate, filter } => gate_fidelity(cfg, out, *gate, *filter),
        Command::AppendixC => appendix_c(cfg, out),
    }
}

#[derive(Serialize)]
struct Calibration {
    params: ParamsHz,
    /// Band recomputed from the fitted energies.
    band: QubitBand,
}

fn calibrate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = cfg.device.resolve()?;
    write_json(&out.join("params.json"), &Calibration { params: ParamsHz::from_params(&p), band: p.band()? })
}

#[derive(Serialize)]
struct SpectrumRow {
    phi_dc_phi0: f64,
    f01_hz: f64,
    eta_hz: f64,
}

fn spectrum(cfg: &RunConfig, out: &Path, points: usize) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Config("spectrum needs at least 2 points".into()));
    }
    let p = cfg.device.resolve()?;
    let rows = (0..points)
        .map(|i| {
            let phi = -0.5 + i as f64 / (points - 1) as f64;
            Ok(SpectrumRow { phi_dc_phi0: phi, f01_hz: p.frequency(phi)? / TWO_PI, eta_hz: p.anharmonicity(phi)? / TWO_PI })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_csv(&out.join("spectrum.csv"), &rows)
}

#[derive(Serialize)]
struct FourierRow {
    phi_ac_phi0: f64,
    k: usize,
    omega_k_hz: f64,
    d_dc_hz_per_phi0: f64,
    d_ac_hz_per_phi0: f64,
}

fn fourier(cfg: &RunConfig, out: &Path, harmonics: usize) -> Result<(), CliError> {
    let p = cfg.device.resolve()?;
    let coeffs = static_coeffs(&p, SeriesTolerance::default())?;
    let mut rows = Vec::new();
    for phi_ac in cfg.grid.points()? {
        let s = fourier_series(&coeffs, cfg.modulation.phi_dc_phi0, phi_ac, harmonics)?;
        for k in 0..=harmonics {
            rows.push(FourierRow {
                phi_ac_phi0: phi_ac,
                k,
                omega_k_hz: s.omega[k] / TWO_PI,
                d_dc_hz_per_phi0: s.d_dc[k] / TWO_PI,
                d_ac_hz_per_phi0: s.d_ac[k] / TWO_PI,
            });
        }
    }
    write_csv(&out.join("fourier.csv"), &rows)
}

#[derive(Serialize)]
struct SweetSpot {
    phi_dc_phi0: f64,
    phi_ac_star: f64,
    joint: bool,
}

fn sweet_spot(cfg: &RunConfig, out: &Path, bracket: (f64, f64), joint: bool) -> Result<(), CliError> {
    let p = cfg.device.resolve()?;
    let coeffs = static_coeffs(&p, SeriesTolerance::default())?;
    let dc = cfg.modulation.phi_dc_phi0;
    let (phi_dc_phi0, phi_ac_star) = if joint {
        find_joint_sweet_spot(&coeffs, (dc, 0.5 * (bracket.0 + bracket.1)))?
    } else {
        (dc, find_ac_sweet_spot(&coeffs, dc, bracket)?)
    };
    write_json(&out.join("sweet_spot.json"), &SweetSpot { phi_dc_phi0, phi_ac_star, joint })
}

#[derive(Serialize)]
struct TraceRow {
    t_s: f64,
    pink_phi0: f64,
    white_phi0: f64,
}

fn noise_gen(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (n, tr) = (&cfg.noise, &cfg.trace);
    let pink = synth_pink(n.a_dc_pink_phi0, n.alpha, tr.dt_s, tr.n_samples, seed::derive(cfg.seed, "cli-pink", 0))?;
    let white = synth_white(n.a_dc_white_phi0_rthz, tr.dt_s, tr.n_samples, seed::derive(cfg.seed, "cli-white", 0))?;
    let rows: Vec<_> = (0..tr.n_samples)
        .map(|i| TraceRow { t_s: i as f64 * tr.dt_s, pink_phi0: pink.samples[i], white_phi0: white.samples[i] })
        .collect();
    write_csv(&out.join("noise_trace.csv"), &rows)
}

#[derive(Serialize)]
struct PsdRow {
    f_hz: f64,
    s_pink_phi0sq_per_hz: f64,
    s_white_phi0sq_per_hz: f64,
    s_pink_model: f64,
    s_white_model: f64,
}

fn noise_psd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (n, tr) = (&cfg.noise, &cfg.trace);
    if tr.psd_seeds == 0 {
        return Err(CliError::Config("psd_seeds must be positive".into()));
    }
    let mut pink_avg: Vec<f64> = Vec::new();
    let mut white_avg: Vec<f64> = Vec::new();
    let mut f_hz = Vec::new();
    for s in 0..tr.psd_seeds as u64 {
        let pink = synth_pink(n.a_dc_pink_phi0, n.alpha, tr.dt_s, tr.n_samples, seed::derive(cfg.seed, "cli-psd-pink", s))?;
        let white = synth_white(n.a_dc_white_phi0_rthz, tr.dt_s, tr.n_samples, seed::derive(cfg.seed, "cli-psd-white", s))?;
        let (pp, pw) = (estimate_psd(&pink, tr.psd_segments)?, estimate_psd(&white, tr.psd_segments)?);
        if pink_avg.is_empty() {
            pink_avg = vec![0.0; pp.s.len()];
            white_avg = vec![0.0; pw.s.len()];
            f_hz = pp.f_hz.clone();
        }
        pink_avg.iter_mut().zip(&pp.s).for_each(|(a, v)| *a += v);
        white_avg.iter_mut().zip(&pw.s).for_each(|(a, v)| *a += v);
    }
    let m = tr.psd_seeds as f64;
    let rows: Vec<_> = (1..f_hz.len())
        .map(|i| PsdRow {
            f_hz: f_hz[i],
            s_pink_phi0sq_per_hz: pink_avg[i] / m,
            s_white_phi0sq_per_hz: white_avg[i] / m,
            s_pink_model: n.a_dc_pink_phi0.powi(2) / f_hz[i].powf(n.alpha),
            s_white_model: n.a_dc_white_phi0_rthz.powi(2),
        })
        .collect();
    write_csv(&out.join("noise_psd.csv"), &rows)
}

#[derive(Serialize)]
struct DephasingRow {
    phi_ac_phi0: f64,
    tphi_pink_s: f64,
    tphi_white_s: f64,
    tphi_white_lp_s: f64,
    beta: f64,
    mode: &'static str,
    clamped: bool,
}

fn dephasing(cfg: &RunConfig, out: &Path, mode: Mode, noise: NoiseSel, filter: bool) -> Result<(), CliError> {
    let p = cfg.device.resolve()?;
    let coeffs = static_coeffs(&p, SeriesTolerance::default())?;
    let mut spec = cfg.noise.spec();
    match noise {
        NoiseSel::Pink => (spec.a_dc_white, spec.a_ac_white) = (0.0, 0.0),
        NoiseSel::White => (spec.a_dc_pink, spec.a_ac_pink) = (0.0, 0.0),
        NoiseSel::Both => {}
    }
    let sweep_mode = match mode {
        Mode::Analytic => SweepMode::Analytic,
        Mode::Mc => SweepMode::Mc,
    };
    let m = &cfg.modulation;
    let rows = sweep_dephasing(&p, &coeffs, &spec, m.f_m_hz, m.phi_dc_phi0, &cfg.grid.points()?, sweep_mode, &cfg.mc.budget(cfg.seed))?;
    let (pink, white) = (spec.has_pink(), spec.has_white());
    let rows: Vec<_> = rows
        .into_iter()
        .map(|r| DephasingRow {
            phi_ac_phi0: r.phi_ac,
            tphi_pink_s: if pink { r.tphi_pink } else { f64::NAN },
            tphi_white_s: if white { r.tphi_white } else { f64::NAN },
            tphi_white_lp_s: if white && filter { r.tphi_white_lp } else { f64::NAN },
            beta: r.beta,
            mode: match mode {
                Mode::Analytic => "analytic",
                Mode::Mc => "mc",
            },
            clamped: r.clamped,
        })
        .collect();
    write_csv(&out.join("dephasing.csv"), &rows)
}

#[derive(Serialize)]
struct GateFreqRow {
    phi_ac_phi0: f64,
    f_cz02_hz: f64,
    f_cz20_hz: f64,
    f_iswap_hz: f64,
    f_cz02_second_hz: f64,
    f_cz20_second_hz: f64,
    f_iswap_second_hz: f64,
    geff_cz02_hz: f64,
    geff_cz20_hz: f64,
    geff_iswap_hz: f64,
}

fn gate_freqs(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let sys = cfg.two_qubit.system(&cfg.device)?;
    let coeffs = static_coeffs(&sys.tunable, SeriesTolerance::default())?;
    let dc = cfg.modulation.phi_dc_phi0;
    let rows = cfg
        .grid
        .points()?
        .into_iter()
        .map(|ac| {
            let f = gate_frequencies(&sys, &coeffs, dc, ac)?;
            let g = |gate: GateKind| -> Result<f64, CliError> {
                Ok(effective_coupling_closed(&sys, &coeffs, dc, ac, f.fundamental(gate)?, gate)? / TWO_PI)
            };
            Ok(GateFreqRow {
                phi_ac_phi0: ac,
                f_cz02_hz: f.f_cz02,
                f_cz20_hz: f.f_cz20,
                f_iswap_hz: f.f_iswap,
                f_cz02_second_hz: f.f_cz02_second,
                f_cz20_second_hz: f.f_cz20_second,
                f_iswap_second_hz: f.f_iswap_second,
                geff_cz02_hz: g(GateKind::Cz02)?,
                geff_cz20_hz: g(GateKind::Cz20)?,
                geff_iswap_hz: g(GateKind::Iswap)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_csv(&out.join("gate_freqs.csv"), &rows)
}

#[derive(Serialize)]
struct FidelityOut {
    phi_ac_phi0: f64,
    f_m_hz: f64,
    geff_hz: f64,
    tcz_s: f64,
    infidelity: f64,
    infidelity_nodecoherence: f64,
    leakage: f64,
}

fn gate_kind(g: GateSel) -> GateKind {
    match g {
        GateSel::Cz02 => GateKind::Cz02,
        GateSel::Cz20 => GateKind::Cz20,
        GateSel::Iswap => GateKind::Iswap,
    }
}

fn gate_fidelity(cfg: &RunConfig, out: &Path, gate: GateSel, filter: bool) -> Result<(), CliError> {
    let sys = cfg.two_qubit.system(&cfg.device)?;
    let coeffs = static_coeffs(&sys.tunable, SeriesTolerance::default())?;
    let m = &cfg.modulation;
    // The filtered white rate assumes a corner between f_m and 2 f_m; the
    // corner value itself does not enter.
    let spec = NoiseSpec {
        lowpass_cutoff_hz: if filter { Some(cfg.noise.lowpass_cutoff_hz.unwrap_or(1.5 * m.f_m_hz)) } else { None },
        ..cfg.noise.spec()
    };
    let rows = fidelity_sweep(&sys, &coeffs, &spec, m.phi_dc_phi0, &cfg.grid.points()?, gate_kind(gate), m.t_ramp_s, &EvolveOptions::default())?;
    let rows: Vec<_> = rows
        .into_iter()
        .map(|r| FidelityOut {
            phi_ac_phi0: r.phi_ac,
            f_m_hz: r.f_m_hz,
            geff_hz: r.geff_hz,
            tcz_s: r.tcz_s,
            infidelity: r.infidelity,
            infidelity_nodecoherence: r.infidelity_nodecoherence,
            leakage: r.leakage,
        })
        .collect();
    write_csv(&out.join("gate_fidelity.csv"), &rows)
}

#[derive(Serialize)]
struct HarnessOut {
    tcz_over_tphi: f64,
    f_me: f64,
    f_avg_coherent: f64,
    f_asymptotic: f64,
    gate: &'static str,
}

fn appendix_c(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let h = &cfg.harness;
    let hc = HarnessConfig { t_phi: h.t_phi_s, beta: h.beta, f_m_hz: h.f_m_hz, lambda_qutrit: h.lambda_qutrit, n_traj: h.n_traj, seed: cfg.seed };
    let mut rows = Vec::new();
    for gate in [GateKind::Cz02, GateKind::Cz20] {
        for r in coherent_noise_average(&hc, gate, &h.geff_hz)? {
            rows.push(HarnessOut {
                tcz_over_tphi: r.tcz_over_tphi,
                f_me: r.f_me,
                f_avg_coherent: r.f_avg_coherent,
                f_asymptotic: r.f_asymptotic,
                gate: r.gate.name(),
            });
        }
    }
    write_csv(&out.join("appendix_c.csv"), &rows)
}
