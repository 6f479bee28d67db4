//! Run configuration: a JSON document with defaults for every key, overridden
//! by command-line flags. Frequencies are plain Hz, fluxes Φ0, times seconds.

use fluxmod::dephasing::McBudget;
use fluxmod::{FilterShape, NoiseSpec, QubitBand, TransmonParams, TwoQubitSystem, TWO_PI};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

/// Device with band edges at 5.1 and 4.1 GHz.
pub const DEFAULT_BAND: QubitBand = QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.1e9, eta0_hz: 0.2e9 };
/// Tunable qubit of the default two-qubit device.
pub const DEFAULT_GATE_BAND: QubitBand = QubitBand { f_max_hz: 5.1e9, f_min_hz: 4.5e9, eta0_hz: 0.2e9 };

/// Josephson and charging energies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsHz {
    pub ec_hz: f64,
    pub ej1_hz: f64,
    pub ej2_hz: f64,
}

impl ParamsHz {
    pub fn from_params(p: &TransmonParams) -> Self {
        ParamsHz { ec_hz: p.ec / TWO_PI, ej1_hz: p.ej1 / TWO_PI, ej2_hz: p.ej2 / TWO_PI }
    }

    pub fn to_params(self) -> fluxmod::Result<TransmonParams> {
        TransmonParams::new(self.ec_hz * TWO_PI, self.ej1_hz * TWO_PI, self.ej2_hz * TWO_PI)
    }
}

/// A tunable qubit given either by its measured band or by its energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<QubitBand>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsHz>,
}

impl DeviceConfig {
    pub fn with_band(band: QubitBand) -> Self {
        DeviceConfig { band: Some(band), params: None }
    }

    pub fn resolve(&self) -> Result<TransmonParams, CliError> {
        match (self.band, self.params) {
            (Some(b), None) => Ok(fluxmod::transmon::calibrate(&b)?),
            (None, Some(p)) => Ok(p.to_params()?),
            _ => Err(CliError::Config("device needs exactly one of `band` or `params`".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub a_dc_pink_phi0: f64,
    pub a_ac_pink_phi0: f64,
    pub a_dc_white_phi0_rthz: f64,
    pub a_ac_white_phi0_rthz: f64,
    pub alpha: f64,
    pub f_ir_hz: f64,
    pub f_uv_hz: f64,
    pub lowpass_cutoff_hz: Option<f64>,
    pub filter_shape: FilterShape,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            a_dc_pink_phi0: 3.63e-6,
            a_ac_pink_phi0: 3.63e-6,
            a_dc_white_phi0_rthz: 10e-9,
            a_ac_white_phi0_rthz: 10e-9,
            alpha: 1.0,
            f_ir_hz: 1.0,
            f_uv_hz: 1e10,
            lowpass_cutoff_hz: None,
            filter_shape: FilterShape::BrickWall,
        }
    }
}

impl NoiseConfig {
    pub fn spec(&self) -> NoiseSpec {
        NoiseSpec {
            a_dc_pink: self.a_dc_pink_phi0,
            a_ac_pink: self.a_ac_pink_phi0,
            a_dc_white: self.a_dc_white_phi0_rthz,
            a_ac_white: self.a_ac_white_phi0_rthz,
            alpha: self.alpha,
            f_ir_hz: self.f_ir_hz,
            f_uv_hz: self.f_uv_hz,
            lowpass_cutoff_hz: self.lowpass_cutoff_hz,
            filter_shape: self.filter_shape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    pub phi_dc_phi0: f64,
    pub phi_ac_phi0: f64,
    pub f_m_hz: f64,
    pub t_ramp_s: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        ModulationConfig { phi_dc_phi0: 0.0, phi_ac_phi0: 0.3, f_m_hz: 300e6, t_ramp_s: 10e-9 }
    }
}

/// Evenly spaced modulation amplitudes, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub phi_ac_start_phi0: f64,
    pub phi_ac_stop_phi0: f64,
    pub phi_ac_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { phi_ac_start_phi0: 0.0, phi_ac_stop_phi0: 0.7, phi_ac_points: 71 }
    }
}

impl GridConfig {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let (a, b, n) = (self.phi_ac_start_phi0, self.phi_ac_stop_phi0, self.phi_ac_points);
        if n == 0 || !(a.is_finite() && b.is_finite()) || a < 0.0 || b < a || (n == 1 && a != b) {
            return Err(CliError::Config(format!("bad phi_ac grid [{a}, {b}] with {n} points")));
        }
        Ok((0..n).map(|i| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub pink_windows: usize,
    pub pink_window_s: f64,
    pub pink_dt_s: f64,
    pub white_windows: usize,
    pub white_window_s: f64,
    pub white_dt_s: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        let b = McBudget::default();
        McConfig {
            pink_windows: b.pink_windows,
            pink_window_s: b.pink_window_s,
            pink_dt_s: b.pink_dt_s,
            white_windows: b.white_windows,
            white_window_s: b.white_window_s,
            white_dt_s: b.white_dt_s,
        }
    }
}

impl McConfig {
    pub fn budget(&self, seed: u64) -> McBudget {
        McBudget {
            pink_windows: self.pink_windows,
            pink_window_s: self.pink_window_s,
            pink_dt_s: self.pink_dt_s,
            white_windows: self.white_windows,
            white_window_s: self.white_window_s,
            white_dt_s: self.white_dt_s,
            seed,
        }
    }
}

/// Fixed qubit, coupling and Markovian times of the two-qubit device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoQubitConfig {
    /// Tunable qubit; falls back to the top-level `device` when absent.
    pub tunable: Option<DeviceConfig>,
    pub fixed_f_hz: f64,
    pub fixed_eta_hz: f64,
    pub g_hz: f64,
    /// Infinite times switch the corresponding process off; JSON has no
    /// infinity, so use null.
    pub t1_fixed_s: Option<f64>,
    pub t1_tunable_s: Option<f64>,
    pub t2star_fixed_s: Option<f64>,
    pub tphi_bkgd_s: Option<f64>,
}

impl Default for TwoQubitConfig {
    fn default() -> Self {
        TwoQubitConfig {
            tunable: Some(DeviceConfig::with_band(DEFAULT_GATE_BAND)),
            fixed_f_hz: 4.0e9,
            fixed_eta_hz: 0.2e9,
            g_hz: 7e6,
            t1_fixed_s: Some(150e-6),
            t1_tunable_s: Some(150e-6),
            t2star_fixed_s: Some(150e-6),
            tphi_bkgd_s: Some(300e-6),
        }
    }
}

fn rate(t: Option<f64>) -> f64 {
    t.map_or(0.0, |t| 1.0 / t)
}

impl TwoQubitConfig {
    pub fn system(&self, fallback: &DeviceConfig) -> Result<TwoQubitSystem, CliError> {
        let tunable = self.tunable.as_ref().unwrap_or(fallback).resolve()?;
        let gamma1_f = rate(self.t1_fixed_s);
        let gammaphi_f = rate(self.t2star_fixed_s) - 0.5 * gamma1_f;
        if gammaphi_f < -1e-12 * gamma1_f {
            return Err(CliError::Config("t2star_fixed_s exceeds 2 t1_fixed_s".into()));
        }
        let sys = TwoQubitSystem {
            fixed_f: TWO_PI * self.fixed_f_hz,
            fixed_eta: TWO_PI * self.fixed_eta_hz,
            tunable,
            g: TWO_PI * self.g_hz,
            gamma1_f,
            gamma1_t: rate(self.t1_tunable_s),
            gammaphi_f: gammaphi_f.max(0.0),
            gammaphi_bkgd: rate(self.tphi_bkgd_s),
        };
        sys.validate()?;
        Ok(sys)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSettings {
    pub t_phi_s: f64,
    pub beta: f64,
    pub f_m_hz: f64,
    pub lambda_qutrit: f64,
    pub n_traj: usize,
    pub geff_hz: Vec<f64>,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        HarnessSettings {
            t_phi_s: 18e-6,
            beta: 1.9,
            f_m_hz: 300e6,
            lambda_qutrit: 1.0,
            n_traj: 2000,
            geff_hz: vec![1.0e6, 1.5e6, 2.0e6, 3.0e6, 5.0e6, 8.0e6, 12.5e6, 25e6],
        }
    }
}

/// Sampling of the noise-trace and PSD commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub dt_s: f64,
    /// Power of two.
    pub n_samples: usize,
    pub psd_segments: usize,
    pub psd_seeds: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { dt_s: 1e-5, n_samples: 1 << 16, psd_segments: 8, psd_seeds: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub noise: NoiseConfig,
    pub modulation: ModulationConfig,
    pub grid: GridConfig,
    pub mc: McConfig,
    pub two_qubit: TwoQubitConfig,
    pub harness: HarnessSettings,
    pub trace: TraceConfig,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            device: DeviceConfig::with_band(DEFAULT_BAND),
            noise: NoiseConfig::default(),
            modulation: ModulationConfig::default(),
            grid: GridConfig::default(),
            mc: McConfig::default(),
            two_qubit: TwoQubitConfig::default(),
            harness: HarnessSettings::default(),
            trace: TraceConfig::default(),
            seed: 1,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
