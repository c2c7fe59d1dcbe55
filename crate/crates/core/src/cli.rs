//! Command-line runs: configuration, presets, sweeps and CSV/JSON output.
//!
//! All rates and frequencies are in units of the cavity decay rate `kappa`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::effective::{
    build_effective_hamiltonian, effective_params, eta0_for_drive, ground_state, photon_number_ss,
    EffectiveParams, PhysicalParams,
};
use crate::entanglement::{concurrence, reduced_two_qubit, rescale_concurrence};
use crate::error::Error;
use crate::lindblad::{
    build_qubit_liouvillian, purity, steady_state, validate_adiabatic, AdiabaticOptions,
    QubitState, SteadyStateOptions,
};
use crate::meanfield::{
    all_fixed_points, bifurcation_sweep, energy_density, integrate_trajectory, BlochVector,
    MeanFieldParams, Stability, TrajectoryOptions, DEFAULT_DT,
};
use crate::spin::SpinSector;

pub const MAX_QUBITS_JOINT: usize = 6;
pub const MAX_QUBITS_LINDBLAD: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GroundSweep,
    Bifurcation,
    Trajectory,
    ValidateAdiabatic,
    QubitLindblad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2a,
    Fig2b,
}

impl Preset {
    fn mode(self) -> Mode {
        match self {
            Preset::Fig1 => Mode::GroundSweep,
            Preset::Fig2a | Preset::Fig2b => Mode::Bifurcation,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, true).ok()
    }
}

const AFTER_HELP: &str = "\
Units: every rate, detuning, drive and time is in units of kappa (kappa = 1).

Config file (--config): flat `key = value` lines, `#` starts a comment.
Keys: preset, n, g0, deltac, deltaa, eta0, gamma, gamma_prime, h, h_min,
h_max, h_steps, eta0_min, eta0_max, s0, t_final, dt, renormalize, out.
deltac and deltaa accept comma-separated lists. Command-line flags override
the file, which overrides the preset, which overrides the mode defaults.

The sweep variable is h. --eta0-min/--eta0-max give the grid as pump
amplitudes instead; each eta0 is converted to h = -2 g0 eta0 / (1 + deltac^2).

Exit codes: 0 success, 1 output could not be written, 2 invalid
configuration, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "cqed-lmg", version, about = "Driven LMG model from cavity QED", after_help = AFTER_HELP)]
pub struct Args {
    pub mode: Mode,
    #[arg(long)]
    pub preset: Option<Preset>,
    /// key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of qubits
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub g0: Option<f64>,
    /// Cavity detuning(s), comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltac: Option<Vec<f64>>,
    /// Qubit detuning(s), comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltaa: Option<Vec<f64>>,
    /// Pump amplitude (validate-adiabatic)
    #[arg(long, allow_hyphen_values = true)]
    pub eta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_prime: Option<f64>,
    /// Drive for a single trajectory
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub h_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub h_max: Option<f64>,
    #[arg(long)]
    pub h_steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta0_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta0_max: Option<f64>,
    /// Initial Bloch vector "sx,sy,sz" (normalized)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub s0: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_final: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    /// Renormalize the Bloch vector after every step
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure at {context}: {source}")]
    Numerical { context: String, source: Error },
    #[error("cannot write {path}: {reason}")]
    Output { path: String, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Output { .. } => 1,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn numerical(context: impl Into<String>) -> impl FnOnce(Error) -> CliError {
    let context = context.into();
    move |source| CliError::Numerical { context, source }
}

/// Optional settings from one source (file or flags).
#[derive(Debug, Clone, Default)]
struct Overrides {
    preset: Option<Preset>,
    n: Option<usize>,
    g0: Option<f64>,
    deltac: Option<Vec<f64>>,
    deltaa: Option<Vec<f64>>,
    eta0: Option<f64>,
    gamma: Option<f64>,
    gamma_prime: Option<f64>,
    h: Option<f64>,
    h_min: Option<f64>,
    h_max: Option<f64>,
    h_steps: Option<usize>,
    eta0_min: Option<f64>,
    eta0_max: Option<f64>,
    s0: Option<Vec<f64>>,
    t_final: Option<f64>,
    dt: Option<f64>,
    renormalize: Option<bool>,
    out: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl Overrides {
    fn merge(mut self, other: Overrides) -> Self {
        merge_fields!(self, other; preset, n, g0, deltac, deltaa, eta0, gamma, gamma_prime, h,
            h_min, h_max, h_steps, eta0_min, eta0_max, s0, t_final, dt, renormalize, out);
        self
    }

    fn from_args(a: &Args) -> Self {
        Self {
            preset: a.preset,
            n: a.n,
            g0: a.g0,
            deltac: a.deltac.clone(),
            deltaa: a.deltaa.clone(),
            eta0: a.eta0,
            gamma: a.gamma,
            gamma_prime: a.gamma_prime,
            h: a.h,
            h_min: a.h_min,
            h_max: a.h_max,
            h_steps: a.h_steps,
            eta0_min: a.eta0_min,
            eta0_max: a.eta0_max,
            s0: a.s0.clone(),
            t_final: a.t_final,
            dt: a.dt,
            renormalize: a.renormalize.then_some(true),
            out: a.out.clone(),
        }
    }

    fn from_config_text(text: &str) -> Result<Self, CliError> {
        let mut o = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim().replace('-', "_"), value.trim());
            let bad = |what: &str| {
                config_err(format!(
                    "line {}: {key} must be {what}, got {value:?}",
                    lineno + 1
                ))
            };
            let float = || value.parse::<f64>().map_err(|_| bad("a number"));
            let list = || {
                value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("a comma-separated list of numbers"))
            };
            match key.as_str() {
                "preset" => {
                    o.preset =
                        Some(Preset::parse(value).ok_or_else(|| bad("fig1, fig2a or fig2b"))?)
                }
                "n" => o.n = Some(value.parse().map_err(|_| bad("a positive integer"))?),
                "g0" => o.g0 = Some(float()?),
                "deltac" => o.deltac = Some(list()?),
                "deltaa" => o.deltaa = Some(list()?),
                "eta0" => o.eta0 = Some(float()?),
                "gamma" => o.gamma = Some(float()?),
                "gamma_prime" => o.gamma_prime = Some(float()?),
                "h" => o.h = Some(float()?),
                "h_min" => o.h_min = Some(float()?),
                "h_max" => o.h_max = Some(float()?),
                "h_steps" => o.h_steps = Some(value.parse().map_err(|_| bad("an integer"))?),
                "eta0_min" => o.eta0_min = Some(float()?),
                "eta0_max" => o.eta0_max = Some(float()?),
                "s0" => o.s0 = Some(list()?),
                "t_final" => o.t_final = Some(float()?),
                "dt" => o.dt = Some(float()?),
                "renormalize" => {
                    o.renormalize = Some(value.parse().map_err(|_| bad("true or false"))?)
                }
                "out" => o.out = Some(PathBuf::from(value)),
                _ => {
                    return Err(config_err(format!(
                        "line {}: unknown key {key:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(o)
    }

    fn from_preset(p: Preset) -> Self {
        let common = Overrides {
            preset: Some(p),
            g0: Some(100.0),
            deltac: Some(vec![2000.0]),
            h_min: Some(-10.0),
            h_max: Some(10.0),
            h_steps: Some(401),
            ..Default::default()
        };
        match p {
            Preset::Fig1 => Overrides {
                n: Some(200),
                deltaa: Some(vec![0.0, 0.2]),
                ..common
            },
            Preset::Fig2a => Overrides {
                deltaa: Some(vec![0.0]),
                gamma: Some(0.2),
                ..common
            },
            Preset::Fig2b => Overrides {
                deltaa: Some(vec![0.0]),
                gamma: Some(0.02),
                ..common
            },
        }
    }

    fn mode_defaults(mode: Mode) -> Self {
        let base = Overrides {
            g0: Some(100.0),
            deltac: Some(vec![2000.0]),
            deltaa: Some(vec![0.0]),
            eta0: Some(0.0),
            gamma: Some(0.0),
            gamma_prime: Some(0.0),
            h: Some(0.0),
            s0: Some(vec![0.6, 0.0, 0.8]),
            t_final: Some(100.0),
            dt: Some(DEFAULT_DT),
            renormalize: Some(false),
            ..Default::default()
        };
        match mode {
            Mode::GroundSweep => Overrides {
                n: Some(200),
                h_min: Some(-10.0),
                h_max: Some(10.0),
                h_steps: Some(401),
                ..base
            },
            Mode::Bifurcation => Overrides {
                n: Some(200),
                gamma: Some(0.2),
                h_min: Some(-10.0),
                h_max: Some(10.0),
                h_steps: Some(401),
                ..base
            },
            Mode::Trajectory => Overrides {
                n: Some(200),
                gamma: Some(0.2),
                ..base
            },
            Mode::ValidateAdiabatic => Overrides {
                n: Some(2),
                eta0: Some(50.0),
                deltac: Some(vec![500.0, 1000.0, 2000.0]),
                deltaa: Some(vec![10.0]),
                ..base
            },
            Mode::QubitLindblad => Overrides {
                n: Some(20),
                gamma: Some(0.2),
                h_min: Some(-8.0),
                h_max: Some(8.0),
                h_steps: Some(17),
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVariable {
    H,
    Eta0,
}

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub variable: GridVariable,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let span = self.stop - self.start;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.stop
                } else {
                    self.start + span * i as f64 / (self.count - 1) as f64
                }
            })
            .collect()
    }
}

/// Fully resolved configuration, echoed into the JSON sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: Option<Preset>,
    pub n_qubits: usize,
    pub kappa: f64,
    pub g0: f64,
    pub delta_c: Vec<f64>,
    pub delta_a: Vec<f64>,
    pub eta0: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub grid: Option<Grid>,
    pub h: f64,
    pub s0: Vec<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub renormalize: bool,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_args(args: &Args) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    config_err(format!("cannot read config {}: {e}", path.display()))
                })?;
                Overrides::from_config_text(&text)?
            }
            None => Overrides::default(),
        };
        let cli = Overrides::from_args(args);
        let preset = cli.preset.or(file.preset);
        Self::resolve(args.mode, preset, file.merge(cli))
    }

    fn resolve(mode: Mode, preset: Option<Preset>, user: Overrides) -> Result<Self, CliError> {
        if let Some(p) = preset {
            if p.mode() != mode {
                return Err(config_err(format!(
                    "preset {} belongs to mode {}",
                    p.to_possible_value().unwrap().get_name(),
                    p.mode().to_possible_value().unwrap().get_name()
                )));
            }
        }
        let mut o = Overrides::mode_defaults(mode);
        if let Some(p) = preset {
            o = o.merge(Overrides::from_preset(p));
        }
        let o = o.merge(user);

        let grid = match (o.eta0_min, o.eta0_max) {
            (None, None) => Some(Grid {
                variable: GridVariable::H,
                start: o.h_min.unwrap_or(f64::NAN),
                stop: o.h_max.unwrap_or(f64::NAN),
                count: o.h_steps.unwrap_or(0),
            }),
            (Some(start), Some(stop)) => Some(Grid {
                variable: GridVariable::Eta0,
                start,
                stop,
                count: o.h_steps.unwrap_or(0),
            }),
            _ => return Err(config_err("eta0_min and eta0_max must be given together")),
        };
        let uses_grid = matches!(
            mode,
            Mode::GroundSweep | Mode::Bifurcation | Mode::QubitLindblad
        );
        let cfg = RunConfig {
            mode,
            preset,
            n_qubits: o.n.unwrap(),
            kappa: 1.0,
            g0: o.g0.unwrap(),
            delta_c: o.deltac.unwrap(),
            delta_a: o.deltaa.unwrap(),
            eta0: o.eta0.unwrap(),
            gamma: o.gamma.unwrap(),
            gamma_prime: o.gamma_prime.unwrap(),
            grid: if uses_grid { grid } else { None },
            h: o.h.unwrap(),
            s0: o.s0.unwrap(),
            t_final: o.t_final.unwrap(),
            dt: o.dt.unwrap(),
            renormalize: o.renormalize.unwrap(),
            out: o.out.unwrap_or_else(|| {
                PathBuf::from(format!(
                    "{}.csv",
                    mode.to_possible_value().unwrap().get_name()
                ))
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let finite = [
            ("g0", self.g0),
            ("eta0", self.eta0),
            ("gamma", self.gamma),
            ("gamma_prime", self.gamma_prime),
            ("h", self.h),
            ("t_final", self.t_final),
            ("dt", self.dt),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(config_err(format!("{name} must be finite")));
            }
        }
        if self.n_qubits == 0 {
            return Err(config_err("n must be at least 1"));
        }
        if self.gamma < 0.0 || self.gamma_prime < 0.0 {
            return Err(config_err("gamma and gamma_prime must be >= 0"));
        }
        if self.delta_c.is_empty() || self.delta_a.is_empty() {
            return Err(config_err("deltac and deltaa need at least one value"));
        }
        if self
            .delta_c
            .iter()
            .chain(&self.delta_a)
            .any(|v| !v.is_finite())
        {
            return Err(config_err("deltac and deltaa must be finite"));
        }
        if let Some(g) = &self.grid {
            if g.count < 2 {
                return Err(config_err(format!("h_steps must be >= 2, got {}", g.count)));
            }
            if !(g.start.is_finite() && g.stop.is_finite()) || g.start == g.stop {
                return Err(config_err("grid bounds must be finite and distinct"));
            }
            if g.variable == GridVariable::Eta0 && (self.g0 == 0.0 || self.delta_c.len() != 1) {
                return Err(config_err("an eta0 grid needs g0 != 0 and a single deltac"));
            }
        }
        let single = |name: &str, v: &[f64]| {
            if v.len() == 1 {
                Ok(())
            } else {
                Err(config_err(format!(
                    "{name} takes a single value in this mode"
                )))
            }
        };
        match self.mode {
            Mode::GroundSweep => {
                single("deltac", &self.delta_c)?;
                if self.n_qubits < 2 {
                    return Err(config_err(
                        "ground-sweep needs n >= 2 for pairwise concurrence",
                    ));
                }
                if self.g0 == 0.0 {
                    return Err(config_err(
                        "ground-sweep sets h through the pump and needs g0 != 0",
                    ));
                }
            }
            Mode::Bifurcation | Mode::Trajectory | Mode::QubitLindblad => {
                single("deltac", &self.delta_c)?;
                single("deltaa", &self.delta_a)?;
                if self.g0 == 0.0 || self.delta_c[0] <= 0.0 {
                    return Err(config_err("lambda > 0 requires g0 != 0 and deltac > 0"));
                }
                if self.mode == Mode::QubitLindblad && self.n_qubits > MAX_QUBITS_LINDBLAD {
                    return Err(config_err(format!(
                        "qubit-lindblad supports n <= {MAX_QUBITS_LINDBLAD}"
                    )));
                }
                if self.mode == Mode::Trajectory {
                    if self.s0.len() != 3 || self.s0.iter().all(|v| *v == 0.0) {
                        return Err(config_err("s0 must be three numbers, not all zero"));
                    }
                    if !(self.dt > 0.0 && self.t_final > 0.0) {
                        return Err(config_err("dt and t_final must be > 0"));
                    }
                }
            }
            Mode::ValidateAdiabatic => {
                single("deltaa", &self.delta_a)?;
                if self.n_qubits > MAX_QUBITS_JOINT {
                    return Err(config_err(format!(
                        "validate-adiabatic supports n <= {MAX_QUBITS_JOINT}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn lambda(&self) -> f64 {
        let dc = self.delta_c[0];
        self.g0 * self.g0 * dc / (self.kappa * self.kappa + dc * dc)
    }

    /// The sweep grid expressed as drive values h.
    pub fn h_values(&self) -> Vec<f64> {
        let Some(grid) = &self.grid else {
            return Vec::new();
        };
        let values = grid.values();
        match grid.variable {
            GridVariable::H => values,
            GridVariable::Eta0 => {
                let dc = self.delta_c[0];
                let denom = self.kappa * self.kappa + dc * dc;
                values
                    .into_iter()
                    .map(|eta0| -2.0 * self.g0 * eta0 * self.kappa / denom)
                    .collect()
            }
        }
    }
}

/// Locale-independent float with 12 significant digits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Column names plus formatted rows of one output table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub const GROUND_SWEEP_COLUMNS: [&str; 8] = [
    "h_over_kappa",
    "delta_a_over_kappa",
    "N",
    "energy_per_qubit",
    "s_x",
    "s_x_squared_over_N2",
    "C_R",
    "n_ss",
];

pub const BIFURCATION_COLUMNS: [&str; 11] = [
    "h_over_kappa",
    "branch",
    "s_x",
    "s_y",
    "s_z",
    "re_eig1",
    "im_eig1",
    "re_eig2",
    "im_eig2",
    "stability",
    "energy_density",
];

pub const TRAJECTORY_COLUMNS: [&str; 6] =
    ["t", "s_x", "s_y", "s_z", "norm_drift", "energy_density"];

pub const ADIABATIC_COLUMNS: [&str; 7] = [
    "delta_c_over_kappa",
    "delta_c_over_g0",
    "fock_cutoff",
    "max_relative_error",
    "mean_relative_error",
    "max_top_fock_population",
    "window_samples",
];

pub const QUBIT_LINDBLAD_COLUMNS: [&str; 10] = [
    "h_over_kappa",
    "s_x",
    "s_y",
    "s_z",
    "bloch_norm",
    "purity",
    "stable_fixed_points",
    "nearest_stable_distance",
    "nearest_fixed_point_distance",
    "steady_state_residual",
];

fn ground_sweep(cfg: &RunConfig) -> Result<Table, CliError> {
    let sector = SpinSector::new(cfg.n_qubits).map_err(|e| config_err(e.to_string()))?;
    let dc = cfg.delta_c[0];
    let hs = cfg.h_values();
    let mut rows = Vec::new();
    for &da in &cfg.delta_a {
        let lambda = effective_params(&PhysicalParams {
            g0: cfg.g0,
            eta0: 0.0,
            kappa: cfg.kappa,
            delta_c: dc,
            delta_a: da,
            n_qubits: cfg.n_qubits,
        })
        .map_err(|e| config_err(e.to_string()))?
        .lambda;
        let block: Vec<Vec<String>> = hs
            .par_iter()
            .map(|&h| {
                let at = numerical(format!("h={h}, delta_a={da}"));
                let point = || -> Result<Vec<String>, Error> {
                    let phys = PhysicalParams {
                        g0: cfg.g0,
                        eta0: eta0_for_drive(h, cfg.g0, cfg.kappa, dc)?,
                        kappa: cfg.kappa,
                        delta_c: dc,
                        delta_a: da,
                        n_qubits: cfg.n_qubits,
                    };
                    let eff = EffectiveParams {
                        h,
                        lambda,
                        delta_a: da,
                    };
                    let gs = ground_state(&build_effective_hamiltonian(&eff, sector))?;
                    let c_r =
                        rescale_concurrence(concurrence(&reduced_two_qubit(&gs.state)?), sector);
                    let n_ss = photon_number_ss(&phys, gs.sx_squared())?;
                    Ok(vec![
                        format_float(h),
                        format_float(da),
                        cfg.n_qubits.to_string(),
                        format_float(gs.energy_per_qubit),
                        format_float(gs.s_x),
                        format_float(gs.s_x2),
                        format_float(c_r),
                        format_float(n_ss),
                    ])
                };
                point().map_err(at)
            })
            .collect::<Result<_, _>>()?;
        rows.extend(block);
    }
    Ok(Table {
        columns: GROUND_SWEEP_COLUMNS.to_vec(),
        rows,
    })
}

fn mean_field_params(cfg: &RunConfig, h: f64) -> Result<MeanFieldParams, CliError> {
    MeanFieldParams::new(h, cfg.lambda(), cfg.gamma, cfg.delta_a[0])
        .map_err(|e| config_err(e.to_string()))
}

fn bifurcation(cfg: &RunConfig) -> Result<Table, CliError> {
    let base = mean_field_params(cfg, 0.0)?;
    let sweep =
        bifurcation_sweep(&cfg.h_values(), &base).map_err(numerical("bifurcation sweep"))?;
    let mut rows = Vec::new();
    for point in sweep {
        for fp in point.fixed_points {
            let [e1, e2] = fp.transverse_eigs();
            rows.push(vec![
                format_float(point.h),
                fp.branch.to_string(),
                format_float(fp.point.s_x),
                format_float(fp.point.s_y),
                format_float(fp.point.s_z),
                format_float(e1.re),
                format_float(e1.im),
                format_float(e2.re),
                format_float(e2.im),
                fp.stability.to_string(),
                format_float(fp.energy_density),
            ]);
        }
    }
    Ok(Table {
        columns: BIFURCATION_COLUMNS.to_vec(),
        rows,
    })
}

fn trajectory(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = mean_field_params(cfg, cfg.h)?;
    let s0 = BlochVector::normalized(cfg.s0[0], cfg.s0[1], cfg.s0[2])
        .map_err(|e| config_err(e.to_string()))?;
    let opts = TrajectoryOptions {
        dt: cfg.dt,
        renormalize: cfg.renormalize,
        ..Default::default()
    };
    let traj = integrate_trajectory(&s0, &p, cfg.t_final, &opts)
        .map_err(numerical(format!("h={}", cfg.h)))?;
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            vec![
                format_float(*t),
                format_float(s.s_x),
                format_float(s.s_y),
                format_float(s.s_z),
                format_float((s.norm() - 1.0).abs()),
                format_float(energy_density(s, &p)),
            ]
        })
        .collect();
    Ok(Table {
        columns: TRAJECTORY_COLUMNS.to_vec(),
        rows,
    })
}

fn adiabatic(cfg: &RunConfig) -> Result<Table, CliError> {
    let opts = AdiabaticOptions::default();
    let rows = cfg
        .delta_c
        .par_iter()
        .map(|&dc| {
            let p = PhysicalParams {
                g0: cfg.g0,
                eta0: cfg.eta0,
                kappa: cfg.kappa,
                delta_c: dc,
                delta_a: cfg.delta_a[0],
                n_qubits: cfg.n_qubits,
            };
            let r = validate_adiabatic(&p, &opts).map_err(numerical(format!("delta_c={dc}")))?;
            Ok(vec![
                format_float(dc),
                format_float(dc / cfg.g0),
                r.fock_cutoff.to_string(),
                format_float(r.max_relative_error),
                format_float(r.mean_relative_error),
                format_float(r.max_top_fock_population),
                r.samples.len().to_string(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    Ok(Table {
        columns: ADIABATIC_COLUMNS.to_vec(),
        rows,
    })
}

fn qubit_lindblad(cfg: &RunConfig) -> Result<Table, CliError> {
    let sector = SpinSector::new(cfg.n_qubits).map_err(|e| config_err(e.to_string()))?;
    let lambda = cfg.lambda();
    let da = cfg.delta_a[0];
    let rows = cfg
        .h_values()
        .par_iter()
        .map(|&h| {
            let at = numerical(format!("h={h}"));
            let point = || -> Result<Vec<String>, Error> {
                let eff = EffectiveParams {
                    h,
                    lambda,
                    delta_a: da,
                };
                let l = build_qubit_liouvillian(&eff, cfg.gamma, cfg.gamma_prime, sector)?;
                let ss = steady_state(&l, &SteadyStateOptions::default())?;
                let state = QubitState::new(sector, ss.rho.clone())?;
                let b = state.bloch();
                let v = BlochVector {
                    s_x: b[0],
                    s_y: b[1],
                    s_z: b[2],
                };
                let fps = all_fixed_points(&MeanFieldParams::new(h, lambda, cfg.gamma, da)?)?;
                let nearest = |stable_only: bool| {
                    fps.iter()
                        .filter(|f| !stable_only || f.stability == Stability::Stable)
                        .map(|f| f.point.distance(&v))
                        .fold(f64::NAN, f64::min)
                };
                let stable = fps
                    .iter()
                    .filter(|f| f.stability == Stability::Stable)
                    .count();
                Ok(vec![
                    format_float(h),
                    format_float(b[0]),
                    format_float(b[1]),
                    format_float(b[2]),
                    format_float(v.norm()),
                    format_float(purity(state.rho())),
                    stable.to_string(),
                    format_float(nearest(true)),
                    format_float(nearest(false)),
                    format_float(ss.residual),
                ])
            };
            point().map_err(at)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(Table {
        columns: QUBIT_LINDBLAD_COLUMNS.to_vec(),
        rows,
    })
}

/// Computes the output table for a configuration without touching disk.
pub fn compute(cfg: &RunConfig) -> Result<Table, CliError> {
    match cfg.mode {
        Mode::GroundSweep => ground_sweep(cfg),
        Mode::Bifurcation => bifurcation(cfg),
        Mode::Trajectory => trajectory(cfg),
        Mode::ValidateAdiabatic => adiabatic(cfg),
        Mode::QubitLindblad => qubit_lindblad(cfg),
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn conventions(mode: Mode) -> BTreeMap<&'static str, &'static str> {
    let mut m = BTreeMap::new();
    m.insert(
        "units",
        "all rates, detunings, drives and times in units of kappa",
    );
    match mode {
        Mode::GroundSweep => {
            m.insert(
                "s_x",
                "<S_x>/N, range [-1/2, 1/2]; the mean-field Bloch component is 2*s_x",
            );
            m.insert("s_x_squared_over_N2", "<S_x^2>/N^2");
            m.insert(
                "C_R",
                "(N-1) times the two-qubit concurrence of the ground state",
            );
            m.insert(
                "n_ss",
                "steady-state photon number from the slaved cavity field",
            );
            m.insert(
                "eta0",
                "each h is produced by eta0 = -h (1 + deltac^2) / (2 g0)",
            );
        }
        Mode::Bifurcation | Mode::Trajectory => {
            m.insert(
                "s_x",
                "unit-sphere Bloch component 2<S_x>/N; the exact-diagonalization s_x is half of it",
            );
            m.insert(
                "eigs",
                "transverse Jacobian eigenvalues; the radial zero eigenvalue is omitted",
            );
            m.insert("energy_density", "-h s_x - lambda (s_y^2 + s_z^2)");
        }
        Mode::ValidateAdiabatic => {
            m.insert(
                "relative_error",
                "|<a> - a_ss(<S_x>)| / |a_ss| over t in [5, 10], starting from |S,S>_x and the slaved coherent field",
            );
        }
        Mode::QubitLindblad => {
            m.insert("s_x", "2<S>/N of the steady state (unit-sphere convention)");
            m.insert(
                "nearest_stable_distance",
                "Euclidean distance to the closest stable mean-field fixed point, nan if none",
            );
        }
    }
    m
}

fn write_outputs(cfg: &RunConfig, table: &Table) -> Result<(), CliError> {
    let out_err = |path: &Path| {
        let path = path.display().to_string();
        move |e: &dyn std::fmt::Display| CliError::Output {
            path,
            reason: e.to_string(),
        }
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.columns)
        .map_err(|e| out_err(&cfg.out)(&e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| out_err(&cfg.out)(&e))?;
    }
    let bytes = w.into_inner().map_err(|e| out_err(&cfg.out)(&e))?;
    fs::write(&cfg.out, bytes).map_err(|e| out_err(&cfg.out)(&e))?;

    let meta = json!({
        "library": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "columns": table.columns,
        "rows": table.rows.len(),
        "conventions": conventions(cfg.mode),
    });
    let side = sidecar_path(&cfg.out);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| out_err(&side)(&e))?;
    fs::write(&side, text + "\n").map_err(|e| out_err(&side)(&e))?;
    Ok(())
}

/// Resolves, computes and writes one run. Nothing is written on failure.
pub fn run(args: &Args) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::from_args(args)?;
    let table = compute(&cfg)?;
    write_outputs(&cfg, &table)?;
    log::info!("wrote {} rows to {}", table.rows.len(), cfg.out.display());
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("cqed-lmg").chain(list.iter().copied())).unwrap()
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1.0), "1.00000000000e0");
        assert_eq!(format_float(-0.125), "-1.25000000000e-1");
        assert_eq!(format_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = Grid {
            variable: GridVariable::H,
            start: -10.0,
            stop: 10.0,
            count: 401,
        };
        let v = g.values();
        assert_eq!(v.len(), 401);
        assert_eq!(v[0], -10.0);
        assert_eq!(v[200], 0.0);
        assert_eq!(v[400], 10.0);
    }

    #[test]
    fn preset_values() {
        let cfg = RunConfig::from_args(&args(&["ground-sweep", "--preset", "fig1"])).unwrap();
        assert_eq!(cfg.n_qubits, 200);
        assert_eq!(cfg.delta_a, vec![0.0, 0.2]);
        assert_eq!(cfg.delta_c, vec![2000.0]);
        let cfg = RunConfig::from_args(&args(&["bifurcation", "--preset", "fig2b"])).unwrap();
        assert_eq!(cfg.gamma, 0.02);
        assert!(RunConfig::from_args(&args(&["trajectory", "--preset", "fig1"])).is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let text = "# comment\nn = 12\ngamma = 0.5  # trailing\ndeltaa = 0.1\nh_steps=5\n";
        let file = Overrides::from_config_text(text).unwrap();
        let cli = Overrides::from_args(&args(&["bifurcation", "--gamma", "0.3"]));
        let cfg = RunConfig::resolve(Mode::Bifurcation, None, file.merge(cli)).unwrap();
        assert_eq!(cfg.n_qubits, 12);
        assert_eq!(cfg.gamma, 0.3);
        assert_eq!(cfg.delta_a, vec![0.1]);
        assert_eq!(cfg.grid.unwrap().count, 5);
    }

    #[test]
    fn config_errors_name_the_field() {
        let e = Overrides::from_config_text("bogus = 1").unwrap_err();
        assert!(e.to_string().contains("bogus"));
        let e = Overrides::from_config_text("gamma = fast").unwrap_err();
        assert!(e.to_string().contains("gamma"));
        let e = RunConfig::from_args(&args(&["bifurcation", "--h-steps", "1"])).unwrap_err();
        assert!(e.to_string().contains("h_steps"));
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_args(&args(&["qubit-lindblad", "--gamma", "-1"])).unwrap_err();
        assert!(e.to_string().contains("gamma"));
        assert!(
            RunConfig::from_args(&args(&["bifurcation", "--h-min", "1", "--h-max", "1"])).is_err()
        );
        assert!(RunConfig::from_args(&args(&["bifurcation", "--eta0-min", "1"])).is_err());
    }

    #[test]
    fn eta0_grid_converts_to_h() {
        let cfg = RunConfig::from_args(&args(&[
            "bifurcation",
            "--eta0-min",
            "-100000",
            "--eta0-max",
            "100000",
            "--h-steps",
            "3",
        ]))
        .unwrap();
        let h = cfg.h_values();
        let expected = 2.0 * 100.0 * 100000.0 / (1.0 + 2000.0f64 * 2000.0);
        assert!((h[0] - expected).abs() < 1e-12);
        assert_eq!(h[1], 0.0);
        assert!((h[2] + expected).abs() < 1e-12);
    }

    #[test]
    fn negative_values_parse() {
        let cfg =
            RunConfig::from_args(&args(&["trajectory", "--h", "-2.5", "--s0", "-1,0,0"])).unwrap();
        assert_eq!(cfg.h, -2.5);
        assert_eq!(cfg.s0, vec![-1.0, 0.0, 0.0]);
    }

    #[test]
    fn small_ground_sweep_table() {
        let cfg = RunConfig::from_args(&args(&[
            "ground-sweep",
            "--n",
            "10",
            "--h-min",
            "-8",
            "--h-max",
            "8",
            "--h-steps",
            "5",
        ]))
        .unwrap();
        let t = compute(&cfg).unwrap();
        assert_eq!(t.columns, GROUND_SWEEP_COLUMNS.to_vec());
        assert_eq!(t.rows.len(), 5);
        // |h| > lambda saturates the order parameter at -1/2 and +1/2
        assert_eq!(t.rows[0][4], "-5.00000000000e-1");
        assert_eq!(t.rows[4][4], "5.00000000000e-1");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("out/a.csv")),
            PathBuf::from("out/a.csv.meta.json")
        );
    }
}
