//! `fluxmod` command-line front end.
//!
//! Every subcommand writes its artifacts plus a `run.json` echo of the fully
//! resolved configuration into `--out`. Errors go to stderr as one JSON
//! object; the exit status is 2 for configuration problems, 3 for inputs
//! outside a model's domain and 4 for numerical non-convergence.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(fluxmod::Error),
}

impl From<fluxmod::Error> for CliError {
    fn from(e: fluxmod::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use fluxmod::Error as E;
        match self {
            CliError::Config(_) | CliError::Core(E::InvalidParameter(_)) => 2,
            CliError::Core(E::Domain(_) | E::Bracket { .. } | E::DegeneratePoint(_)) => 3,
            CliError::Core(E::Convergence { .. } | E::Accuracy { .. } | E::Calibration { .. } | E::FitQuality { .. }) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.kind(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fluxmod", version, about = "Flux-modulated transmon dephasing and gate simulations")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring configuration keys.
#[derive(clap::Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    f_max_hz: Option<f64>,
    #[arg(long, global = true)]
    f_min_hz: Option<f64>,
    #[arg(long, global = true)]
    eta0_hz: Option<f64>,
    #[arg(long, global = true)]
    phi_dc_phi0: Option<f64>,
    #[arg(long, global = true)]
    phi_ac_phi0: Option<f64>,
    #[arg(long, global = true)]
    f_m_hz: Option<f64>,
    #[arg(long, global = true)]
    t_ramp_s: Option<f64>,
    #[arg(long, global = true)]
    phi_ac_start_phi0: Option<f64>,
    #[arg(long, global = true)]
    phi_ac_stop_phi0: Option<f64>,
    #[arg(long, global = true)]
    phi_ac_points: Option<usize>,
    #[arg(long, global = true)]
    a_dc_pink_phi0: Option<f64>,
    #[arg(long, global = true)]
    a_ac_pink_phi0: Option<f64>,
    #[arg(long, global = true)]
    a_dc_white_phi0_rthz: Option<f64>,
    #[arg(long, global = true)]
    a_ac_white_phi0_rthz: Option<f64>,
    #[arg(long, global = true)]
    f_ir_hz: Option<f64>,
    #[arg(long, global = true)]
    lowpass_cutoff_hz: Option<f64>,
    #[arg(long, global = true)]
    pink_windows: Option<usize>,
    #[arg(long, global = true)]
    white_windows: Option<usize>,
    #[arg(long, global = true)]
    n_traj: Option<usize>,
    #[arg(long, global = true)]
    t_phi_s: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        if self.f_max_hz.is_some() || self.f_min_hz.is_some() || self.eta0_hz.is_some() {
            let mut band = c.device.band.unwrap_or(config::DEFAULT_BAND);
            set(&mut band.f_max_hz, self.f_max_hz);
            set(&mut band.f_min_hz, self.f_min_hz);
            set(&mut band.eta0_hz, self.eta0_hz);
            c.device = config::DeviceConfig::with_band(band);
        }
        set(&mut c.modulation.phi_dc_phi0, self.phi_dc_phi0);
        set(&mut c.modulation.phi_ac_phi0, self.phi_ac_phi0);
        set(&mut c.modulation.f_m_hz, self.f_m_hz);
        set(&mut c.modulation.t_ramp_s, self.t_ramp_s);
        set(&mut c.grid.phi_ac_start_phi0, self.phi_ac_start_phi0);
        set(&mut c.grid.phi_ac_stop_phi0, self.phi_ac_stop_phi0);
        set(&mut c.grid.phi_ac_points, self.phi_ac_points);
        set(&mut c.noise.a_dc_pink_phi0, self.a_dc_pink_phi0);
        set(&mut c.noise.a_ac_pink_phi0, self.a_ac_pink_phi0);
        set(&mut c.noise.a_dc_white_phi0_rthz, self.a_dc_white_phi0_rthz);
        set(&mut c.noise.a_ac_white_phi0_rthz, self.a_ac_white_phi0_rthz);
        set(&mut c.noise.f_ir_hz, self.f_ir_hz);
        if self.lowpass_cutoff_hz.is_some() {
            c.noise.lowpass_cutoff_hz = self.lowpass_cutoff_hz;
        }
        set(&mut c.mc.pink_windows, self.pink_windows);
        set(&mut c.mc.white_windows, self.white_windows);
        set(&mut c.harness.n_traj, self.n_traj);
        set(&mut c.harness.t_phi_s, self.t_phi_s);
        set(&mut c.harness.beta, self.beta);
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
enum Command {
    /// Fit (E_C, E_J1, E_J2) to the device band.
    Calibrate,
    /// Frequency and anharmonicity against static flux.
    Spectrum {
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Harmonics of the modulated frequency and their flux derivatives.
    Fourier {
        #[arg(long, default_value_t = fluxmod::modulation::DEFAULT_HARMONICS)]
        harmonics: usize,
    },
    /// Modulation amplitude where the average frequency is stationary.
    SweetSpot {
        #[arg(long, default_value_t = 0.4)]
        bracket_lo: f64,
        #[arg(long, default_value_t = 0.8)]
        bracket_hi: f64,
        /// Solve for parking flux and amplitude together, starting from
        /// (phi_dc, bracket midpoint).
        #[arg(long)]
        joint: bool,
    },
    /// One 1/f and one white flux-noise trace.
    NoiseGen,
    /// Seed-averaged power spectral densities of synthesized noise.
    NoisePsd,
    /// Dephasing times over the modulation-amplitude grid.
    Dephasing {
        #[arg(long, value_enum, default_value_t = Mode::Analytic)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = NoiseSel::Both)]
        noise: NoiseSel,
        /// Also report white-noise dephasing behind the lowpass.
        #[arg(long)]
        filter: bool,
    },
    /// Modulation frequencies activating each two-qubit transition.
    GateFreqs,
    /// Calibrated gate infidelity over the modulation-amplitude grid.
    GateFidelity {
        #[arg(long, value_enum, default_value_t = GateSel::Cz02)]
        gate: GateSel,
        /// Lowpass the white flux noise.
        #[arg(long)]
        filter: bool,
    },
    /// Master equation against trajectory-averaged coherent dynamics for an ideal CZ.
    AppendixC,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Analytic,
    Mc,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum NoiseSel {
    Pink,
    White,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum GateSel {
    Cz02,
    Cz20,
    Iswap,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cli.overrides.apply(&mut cfg);
    set(&mut cfg.seed, cli.seed);
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Config(format!("{}: {e}", cli.out.display())))?;
    output::write_json(&cli.out.join("run.json"), &output::RunEcho::new(&cli.command, &cfg))?;
    commands::execute(&cli.command, &cfg, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.message(), "exit_code": e.exit_code() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code())
        }
    }
}
