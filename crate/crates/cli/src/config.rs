//! Flat `block.key = value` experiment configuration.
//!
//! Lines are `key = value`; blank lines and `#` comments are skipped.
//! Later assignments win, and `--set` overrides are applied after the file.

use std::fmt;
use std::path::{Path, PathBuf};

use cityroad::model::{rescale_to_unit_length, Nonlinearity, Parameters};
use thiserror::Error;

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "CITYROAD_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}:{line}: unknown key `{key}`")]
    UnknownKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactionKind {
    Logistic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    LeftBlock,
    SineBump,
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Alpha,
    Beta,
    D,
    Fprime0,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::Beta => "beta",
            SweepParameter::D => "d",
            SweepParameter::Fprime0 => "fprime0",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model constants as written in the configuration, before rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBlock {
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
    pub fprime0: f64,
    pub ell: f64,
    pub reaction: ReactionKind,
}

impl ParameterBlock {
    /// Unit-length parameters used by every computation. Roads of length
    /// `ell` are mapped to `[0, 1]`; speeds in cities per unit time are
    /// unchanged by this.
    pub fn build(&self) -> std::result::Result<Parameters, cityroad::Error> {
        let reaction = match self.reaction {
            ReactionKind::Logistic => Nonlinearity::logistic(self.fprime0),
            ReactionKind::None => Nonlinearity::none(),
        };
        let p = Parameters::with_reaction(self.alpha, self.beta, self.d, reaction)?
            .with_length(self.ell)?;
        Ok(rescale_to_unit_length(&p).params)
    }

    fn set(&mut self, which: SweepParameter, value: f64) {
        match which {
            SweepParameter::Alpha => self.alpha = value,
            SweepParameter::Beta => self.beta = value,
            SweepParameter::D => self.d = value,
            SweepParameter::Fprime0 => self.fprime0 = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBlock {
    pub t_final: f64,
    pub dt: f64,
    pub m: usize,
    pub margin: usize,
    /// Steps between snapshots; 0 lets the simulator choose.
    pub stride: usize,
    pub initial: InitialKind,
    pub amplitude: f64,
    /// Cities carrying the sine bump.
    pub bump_cities: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticBlock {
    pub dt: f64,
    /// Values of `1 / d` for the large-diffusion comparison; empty skips it.
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBlock {
    pub threshold: f64,
    /// Fit window as fractions of `T`.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Write road profiles for every n-th snapshot (and the last).
    pub edge_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub parameters: ParameterBlock,
    pub simulation: SimulationBlock,
    pub asymptotic: AsymptoticBlock,
    pub sweep: SweepBlock,
    pub measurement: MeasurementBlock,
    pub output: OutputBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            parameters: ParameterBlock {
                alpha: 1.0,
                beta: 1.0,
                d: 1.0,
                fprime0: 1.0,
                ell: 1.0,
                reaction: ReactionKind::Logistic,
            },
            simulation: SimulationBlock {
                t_final: 50.0,
                dt: 1e-3,
                m: 32,
                margin: 8,
                stride: 0,
                initial: InitialKind::LeftBlock,
                amplitude: 1.0,
                bump_cities: 5,
            },
            asymptotic: AsymptoticBlock {
                dt: 1e-2,
                epsilons: Vec::new(),
            },
            sweep: SweepBlock {
                parameter: SweepParameter::Alpha,
                values: vec![0.5, 1.0, 2.0],
            },
            measurement: MeasurementBlock {
                threshold: 0.5,
                window: (0.5, 1.0),
            },
            output: OutputBlock {
                dir: PathBuf::from("output"),
                edge_every: 10,
            },
        }
    }
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub parameter: SweepParameter,
    pub value: f64,
    pub params: Parameters,
}

impl ExperimentConfig {
    pub fn params(&self) -> Parameters {
        self.parameters
            .build()
            .expect("parameters are checked when the configuration is parsed")
    }

    /// One run per sweep value, each differing from the base parameters in
    /// the swept entry only.
    pub fn sweep_plan(&self) -> Result<Vec<SweepRun>> {
        self.sweep
            .values
            .iter()
            .map(|&value| {
                let mut block = self.parameters.clone();
                block.set(self.sweep.parameter, value);
                let params = block.build().map_err(|e| ConfigError::Invalid {
                    key: "sweep.values".into(),
                    reason: format!("{} = {value}: {e}", self.sweep.parameter),
                })?;
                Ok(SweepRun {
                    parameter: self.sweep.parameter,
                    value,
                    params,
                })
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let invalid = |key: &str, reason: String| {
            Err(ConfigError::Invalid {
                key: key.into(),
                reason,
            })
        };
        if let Err(e) = self.parameters.build() {
            let key = match &e {
                cityroad::Error::InvalidParameter { name, .. } => format!("parameters.{name}"),
                _ => "parameters".into(),
            };
            return invalid(&key, e.to_string());
        }
        let s = &self.simulation;
        if !(s.t_final.is_finite() && s.t_final > 0.0) {
            return invalid("simulation.T", format!("{} must be positive", s.t_final));
        }
        for (key, dt) in [("simulation.dt", s.dt), ("asymptotic.dt", self.asymptotic.dt)] {
            if !(dt.is_finite() && dt > 0.0) {
                return invalid(key, format!("{dt} must be positive"));
            }
            let steps = s.t_final / dt;
            if (steps.round() - steps).abs() > 1e-6 * steps.max(1.0) {
                return invalid(key, format!("T = {} is not a multiple of {dt}", s.t_final));
            }
        }
        if s.m < 2 {
            return invalid("simulation.m", format!("{} must be at least 2", s.m));
        }
        if s.margin < 4 {
            return invalid("simulation.margin", format!("{} must be at least 4", s.margin));
        }
        if !(s.amplitude.is_finite() && s.amplitude > 0.0) {
            return invalid("simulation.amplitude", format!("{} must be positive", s.amplitude));
        }
        if s.bump_cities == 0 {
            return invalid("simulation.bump_cities", "must be at least 1".into());
        }
        if let Some(e) = self.asymptotic.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return invalid("asymptotic.epsilons", format!("{e} must be positive"));
        }
        let m = &self.measurement;
        if !(m.threshold > 0.0 && m.threshold < 1.0) {
            return invalid("measurement.threshold", format!("{} must lie in (0, 1)", m.threshold));
        }
        let (lo, hi) = m.window;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return invalid(
                "measurement.window",
                format!("({lo}, {hi}) must satisfy 0 <= lo < hi <= 1"),
            );
        }
        if self.output.edge_every == 0 {
            return invalid("output.edge_every", "must be at least 1".into());
        }
        self.sweep_plan().map(|_| ())
    }
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("expected a number, found `{v}`"))
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, found `{v}`"))
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_f64(x.trim())).collect()
}

/// Applies one assignment. `Ok(false)` means the key is unknown.
fn assign(cfg: &mut ExperimentConfig, key: &str, v: &str) -> std::result::Result<bool, String> {
    match key {
        "parameters.alpha" => cfg.parameters.alpha = parse_f64(v)?,
        "parameters.beta" => cfg.parameters.beta = parse_f64(v)?,
        "parameters.d" => cfg.parameters.d = parse_f64(v)?,
        "parameters.fprime0" => cfg.parameters.fprime0 = parse_f64(v)?,
        "parameters.ell" => cfg.parameters.ell = parse_f64(v)?,
        "parameters.nonlinearity" => {
            cfg.parameters.reaction = match v {
                "logistic" => ReactionKind::Logistic,
                "none" => ReactionKind::None,
                _ => return Err(format!("expected `logistic` or `none`, found `{v}`")),
            }
        }
        "simulation.T" => cfg.simulation.t_final = parse_f64(v)?,
        "simulation.dt" => cfg.simulation.dt = parse_f64(v)?,
        "simulation.m" => cfg.simulation.m = parse_usize(v)?,
        "simulation.margin" => cfg.simulation.margin = parse_usize(v)?,
        "simulation.stride" => cfg.simulation.stride = parse_usize(v)?,
        "simulation.initial" => {
            cfg.simulation.initial = match v {
                "left_block" => InitialKind::LeftBlock,
                "sine_bump" => InitialKind::SineBump,
                "point_mass" => InitialKind::PointMass,
                _ => {
                    return Err(format!(
                        "expected `left_block`, `sine_bump` or `point_mass`, found `{v}`"
                    ))
                }
            }
        }
        "simulation.amplitude" => cfg.simulation.amplitude = parse_f64(v)?,
        "simulation.bump_cities" => cfg.simulation.bump_cities = parse_usize(v)?,
        "asymptotic.dt" => cfg.asymptotic.dt = parse_f64(v)?,
        "asymptotic.epsilons" => cfg.asymptotic.epsilons = parse_list(v)?,
        "sweep.parameter" => {
            cfg.sweep.parameter = match v {
                "alpha" => SweepParameter::Alpha,
                "beta" => SweepParameter::Beta,
                "d" => SweepParameter::D,
                "fprime0" => SweepParameter::Fprime0,
                _ => return Err(format!("cannot sweep over `{v}`")),
            }
        }
        "sweep.values" => cfg.sweep.values = parse_list(v)?,
        "measurement.threshold" => cfg.measurement.threshold = parse_f64(v)?,
        "measurement.window" => {
            let w = parse_list(v)?;
            if w.len() != 2 {
                return Err(format!("expected two comma-separated fractions, found `{v}`"));
            }
            cfg.measurement.window = (w[0], w[1]);
        }
        "output.dir" => cfg.output.dir = PathBuf::from(v),
        "output.edge_every" => cfg.output.edge_every = parse_usize(v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn apply_line(cfg: &mut ExperimentConfig, origin: &str, line: usize, text: &str) -> Result<()> {
    let text = text.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(());
    }
    let Some((key, value)) = text.split_once('=') else {
        return Err(ConfigError::Parse {
            origin: origin.into(),
            line,
            message: format!("expected `key = value`, found `{text}`"),
        });
    };
    let (key, value) = (key.trim(), value.trim());
    match assign(cfg, key, value) {
        Ok(true) => Ok(()),
        Ok(false) => Err(ConfigError::UnknownKey {
            origin: origin.into(),
            line,
            key: key.into(),
        }),
        Err(message) => Err(ConfigError::Parse {
            origin: origin.into(),
            line,
            message: format!("{key}: {message}"),
        }),
    }
}

/// Parses configuration text and `--set` overrides, then validates.
/// The output directory is taken from [`OUTPUT_DIR_ENV`] when `env_dir`
/// is given.
pub fn parse_config_str(
    text: &str,
    origin: &str,
    overrides: &[String],
    env_dir: Option<PathBuf>,
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (k, line) in text.lines().enumerate() {
        apply_line(&mut cfg, origin, k + 1, line)?;
    }
    for (k, line) in overrides.iter().enumerate() {
        apply_line(&mut cfg, "--set", k + 1, line)?;
    }
    if let Some(dir) = env_dir {
        cfg.output.dir = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads the optional configuration file, applies overrides and the
/// output-directory environment variable.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let (text, origin) = match path {
        Some(path) => (
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?,
            path.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    parse_config_str(&text, &origin, overrides, env_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config_str(text, "test.cfg", &[], None)
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse("# header\n\nparameters.d = 10  # trailing\n").unwrap();
        assert_eq!(cfg.parameters.d, 10.0);
    }

    #[test]
    fn later_assignment_wins() {
        let cfg = parse_config_str(
            "parameters.beta = 2\nparameters.beta = 3\n",
            "t",
            &["parameters.beta=4".into()],
            None,
        )
        .unwrap();
        assert_eq!(cfg.parameters.beta, 4.0);
    }

    #[test]
    fn env_dir_overrides_file() {
        let cfg = parse_config_str("output.dir = a\n", "t", &[], Some("b".into())).unwrap();
        assert_eq!(cfg.output.dir, PathBuf::from("b"));
    }

    #[test]
    fn ell_is_rescaled() {
        let cfg = parse("parameters.ell = 2\nparameters.d = 4\n").unwrap();
        let p = cfg.params();
        assert_eq!(p.ell, 1.0);
        assert_eq!(p.d, 1.0);
        assert_eq!(p.alpha, 0.5);
    }

    #[test]
    fn bad_window() {
        let err = parse("measurement.window = 0.8, 0.2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "measurement.window"));
    }
}
