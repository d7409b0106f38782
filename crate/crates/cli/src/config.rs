//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use noisyqed::scattering::Method;
use noisyqed::{Channel, NoiseModel, SystemParams};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    Ramsey,
    Invert,
    McValidate,
    Fano,
    Bloch,
    Figure,
}

impl Task {
    pub fn stem(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Ramsey => "ramsey",
            Task::Invert => "invert",
            Task::McValidate => "mc_validate",
            Task::Fano => "fano",
            Task::Bloch => "bloch",
            Task::Figure => "figure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            min: -5.0,
            max: 5.0,
            n: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max: f64,
    pub n: usize,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec { t_max: 10.0, n: 501 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumOptions {
    pub method: Method,
    pub series_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            method: Method::Auto,
            series_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseyOptions {
    pub times: TimeSpec,
    pub monte_carlo: bool,
    pub n_traj: usize,
}

impl Default for RamseyOptions {
    fn default() -> Self {
        RamseyOptions {
            times: TimeSpec::default(),
            monte_carlo: false,
            n_traj: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InvertRoute {
    /// Re t only.
    #[default]
    Real,
    /// Full complex t.
    Complex,
    /// Re t completed by Kramers–Kronig, then the complex route.
    Kk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertOptions {
    /// Scattering CSV; relative paths resolve against the config file.
    pub input: PathBuf,
    #[serde(default)]
    pub route: InvertRoute,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub noise_floor: f64,
    #[serde(default)]
    pub tukey: Option<f64>,
    #[serde(default = "yes")]
    pub extrapolate: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McOptions {
    pub n_traj: usize,
    pub t_ss: f64,
    pub dt: Option<f64>,
    /// Largest accepted |MC − reference|/std_error.
    pub k_sigma: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            n_traj: 10_000,
            t_ss: 30.0,
            dt: None,
            k_sigma: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoOptions {
    pub omega_c: f64,
    pub kappa_c: f64,
    #[serde(default)]
    pub recover: bool,
    #[serde(default)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlochOptions {
    /// Real Rabi frequency |Ω| in units of Γ.
    pub rabi: f64,
    pub monte_carlo: bool,
    pub n_traj: usize,
    pub t_relax: f64,
}

impl Default for BlochOptions {
    fn default() -> Self {
        BlochOptions {
            rabi: noisyqed::bloch::DEFAULT_WEAK_RABI,
            monte_carlo: true,
            n_traj: 2000,
            t_relax: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureOptions {
    pub name: String,
}

fn default_params() -> SystemParams {
    SystemParams::canonical()
}

fn default_noise() -> NoiseModel {
    NoiseModel::noiseless()
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default = "default_params")]
    pub params: SystemParams,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub input_channel: Channel,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub ramsey: RamseyOptions,
    #[serde(default)]
    pub invert: Option<InvertOptions>,
    #[serde(default)]
    pub mc: McOptions,
    #[serde(default)]
    pub fano: Option<FanoOptions>,
    #[serde(default)]
    pub bloch: BlochOptions,
    #[serde(default)]
    pub figure: Option<FigureOptions>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            task: None,
            params: default_params(),
            noise: default_noise(),
            grid: GridSpec::default(),
            input_channel: Channel::Plus,
            seed: default_seed(),
            spectrum: SpectrumOptions::default(),
            ramsey: RamseyOptions::default(),
            invert: None,
            mc: McOptions::default(),
            fano: None,
            bloch: BlochOptions::default(),
            figure: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads a config file; relative input paths are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(inv), Some(dir)) = (cfg.invert.as_mut(), path.parent()) {
            if inv.input.is_relative() {
                inv.input = dir.join(&inv.input);
            }
        }
        Ok(cfg)
    }

    /// Checks the fields the task needs.
    pub fn validate(&self, task: Task) -> Result<(), CliError> {
        if let Some(t) = self.task {
            if t != task {
                return Err(CliError::config(format!(
                    "task: config is for `{}`, command is `{}`",
                    t.stem(),
                    task.stem()
                )));
            }
        }
        if task == Task::Figure {
            return Ok(());
        }
        self.params.validate().map_err(|e| CliError::field("params", e))?;
        self.noise.validate().map_err(|e| CliError::field("noise", e))?;
        if self.grid.n == 0 || !(self.grid.min <= self.grid.max) {
            return Err(CliError::config("grid: need n >= 1 and min <= max"));
        }
        match task {
            Task::Spectrum => check_method(self.spectrum.method, &self.noise)?,
            Task::Ramsey => {
                if self.ramsey.times.n < 2 || !(self.ramsey.times.t_max > 0.0) {
                    return Err(CliError::config("ramsey.times: need n >= 2 and t_max > 0"));
                }
            }
            Task::Invert => {
                if self.invert.is_none() {
                    return Err(CliError::config("invert: section with `input` is required"));
                }
            }
            Task::McValidate => check_method(self.spectrum.method, &self.noise)?,
            Task::Fano => {
                if self.fano.is_none() {
                    return Err(CliError::config("fano: section with `omega_c` and `kappa_c` is required"));
                }
            }
            Task::Bloch => {
                if !(self.bloch.rabi > 0.0) {
                    return Err(CliError::config("bloch.rabi: must be > 0"));
                }
            }
            Task::Figure => {}
        }
        Ok(())
    }
}

/// Rejects solver routes that do not exist for the model.
pub fn check_method(method: Method, noise: &NoiseModel) -> Result<(), CliError> {
    let (_, colored) = noise.split_white();
    let ok = match (method, colored) {
        (Method::Auto | Method::Laplace, _) => true,
        (Method::Closed, None) => true,
        (Method::Closed, Some(NoiseModel::ColoredGaussian { sigma, kappa })) => *kappa == 0.0 && *sigma > 0.0,
        (Method::Closed, Some(NoiseModel::Telegraph { .. })) => true,
        (Method::Closed, Some(_)) => false,
        (Method::Series, Some(NoiseModel::ColoredGaussian { .. })) => true,
        (Method::Series, _) => false,
        (Method::Jump, Some(m)) => m.is_discrete(),
        (Method::Jump, None) => false,
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "spectrum.method: `{}` is not available for this noise model",
            serde_json::to_value(method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("schema_version = 1\n").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::parse("schema_version = 1\n[params]\ngamma_plus = 0.45\ngama_minus = 0.45\ngamma_loss = 0.1\n")
            .unwrap_err();
        assert!(e.to_string().contains("gama_minus"), "{e}");
        let e = RunConfig::parse("schema_version = 1\n[noise]\ntype = \"telegraph\"\nsigma = 1.0\nkappa = 1.0\nkapa = 2.0\n")
            .unwrap_err();
        assert!(e.to_string().contains("kapa"), "{e}");
    }

    #[test]
    fn schema_version_is_checked() {
        assert!(RunConfig::parse("schema_version = 2\n").is_err());
        assert!(RunConfig::parse("task = \"spectrum\"\n").is_err());
    }

    #[test]
    fn series_is_rejected_for_telegraph() {
        let c = RunConfig::parse(
            "schema_version = 1\n[noise]\ntype = \"telegraph\"\nsigma = 1.0\nkappa = 1.0\n[spectrum]\nmethod = \"series\"\n",
        )
        .unwrap();
        let e = c.validate(Task::Spectrum).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("series"));
    }

    #[test]
    fn field_errors_name_the_section() {
        let c = RunConfig::parse("schema_version = 1\n[noise]\ntype = \"white\"\ngamma_phi = -1.0\n").unwrap();
        let e = c.validate(Task::Spectrum).unwrap_err();
        assert!(e.to_string().starts_with("noise:"), "{e}");
    }

    #[test]
    fn task_mismatch_is_an_error() {
        let c = RunConfig::parse("schema_version = 1\ntask = \"ramsey\"\n").unwrap();
        assert!(c.validate(Task::Spectrum).is_err());
        assert!(c.validate(Task::Ramsey).is_ok());
    }

    #[test]
    fn nested_noise_parses() {
        let c = RunConfig::parse(
            "schema_version = 1\n[noise]\ntype = \"with_white_background\"\ngamma_wb = 0.2\n[noise.base]\ntype = \"colored_gaussian\"\nsigma = 1.0\nkappa = 10.0\n",
        )
        .unwrap();
        assert!(matches!(c.noise, NoiseModel::WithWhiteBackground { .. }));
    }
}
