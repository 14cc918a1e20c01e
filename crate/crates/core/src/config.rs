//! Declarative experiment descriptions, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! mode = "forward_wave"
//! seed = 7
//!
//! [profiles.c]
//! base = 1.0
//! window = { left = 0.1, right = 0.9, ramp = 0.1 }
//! terms = [{ shape = "gaussian", amplitude = 0.3, centre = 0.5, rate = 100.0 }]
//!
//! [profiles.f]
//! terms = [{ shape = "bump", amplitude = 1.0, left = 0.2, right = 0.7, power = 4 }]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::profile::{Profile, ProfileKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ForwardWave,
    ForwardHeat,
    Extract,
    InvertWave,
    InvertHeat,
    ComparePairs,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ForwardWave => "forward_wave",
            Mode::ForwardHeat => "forward_heat",
            Mode::Extract => "extract",
            Mode::InvertWave => "invert_wave",
            Mode::InvertHeat => "invert_heat",
            Mode::ComparePairs => "compare_pairs",
        }
    }

    /// Tolerance names the mode checks its outputs against.
    fn tolerance_names(self) -> &'static [&'static str] {
        match self {
            Mode::InvertWave => &["speed_sup", "initial_data_rel"],
            Mode::InvertHeat => &["convection_sup", "initial_data_rel"],
            Mode::ComparePairs => &["floor_factor"],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    #[default]
    Wave,
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatSolver {
    #[default]
    Modal,
    CrankNicolson,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Optional when the caller fixes the mode (CLI subcommands do).
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub profiles: BTreeMap<String, ProfileSpec>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise: Noise,
    /// Trace read from disk instead of simulated.
    pub trace_file: Option<PathBuf>,
    #[serde(default)]
    pub wave: WaveSection,
    #[serde(default)]
    pub heat: HeatSection,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub compare: CompareSection,
    /// Directory that relative paths resolve against; set by the loader.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Samples of every analytic profile on its interval.
    pub nodes: usize,
    /// Wave cells on `[0, 1]`.
    pub wave_resolution: usize,
    pub cfl: f64,
    pub t_max: f64,
    pub heat_t1: f64,
    pub heat_t2: f64,
    pub heat_samples: usize,
    pub heat_solver: HeatSolver,
    pub mode_count: usize,
    pub fd_resolution: usize,
    pub fd_dt: f64,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            nodes: 1025,
            wave_resolution: 2048,
            cfl: 0.9,
            t_max: 8.0,
            heat_t1: 3e-3,
            heat_t2: 0.3,
            heat_samples: 1000,
            heat_solver: HeatSolver::Modal,
            mode_count: 250,
            fd_resolution: 4097,
            fd_dt: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    /// Standard deviation of additive Gaussian noise on the trace.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveSection {
    pub c0: f64,
    pub modes: Option<usize>,
    pub basis_count: Option<usize>,
    pub regularization: Option<f64>,
}

impl Default for WaveSection {
    fn default() -> Self {
        Self { c0: 1.0, modes: None, basis_count: None, regularization: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatSection {
    pub epsilon: f64,
    pub modes: Option<usize>,
    pub basis_count: Option<usize>,
    pub regularization: Option<f64>,
    pub refine_with_samples: Option<bool>,
}

impl Default for HeatSection {
    fn default() -> Self {
        Self { epsilon: 0.1, modes: None, basis_count: None, regularization: None, refine_with_samples: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractSection {
    pub count: usize,
    pub equation: Equation,
}

impl Default for ExtractSection {
    fn default() -> Self {
        Self { count: 12, equation: Equation::Wave }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub equation: Equation,
}

/// `file`, or `base + window · Σ terms` sampled on `[left, right]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub file: Option<PathBuf>,
    pub kind: Option<String>,
    #[serde(default)]
    pub base: f64,
    #[serde(default)]
    pub terms: Vec<Term>,
    pub window: Option<Window>,
    #[serde(default)]
    pub left: f64,
    #[serde(default = "one")]
    pub right: f64,
    pub nodes: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub left: f64,
    pub right: f64,
    pub ramp: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Term {
    /// `amplitude · exp(−rate (x − centre)²)`
    Gaussian { amplitude: f64, centre: f64, rate: f64 },
    /// `amplitude · (4 s (1 − s))^power` for `s` in `(0, 1)` across `[left, right]`.
    Bump { amplitude: f64, left: f64, right: f64, power: i32 },
    /// `amplitude · cos(frequency x + phase)`
    Cosine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `Σ coefficients[i] xⁱ`
    Polynomial { coefficients: Vec<f64> },
}

impl Term {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Term::Gaussian { amplitude, centre, rate } => amplitude * (-rate * (x - centre).powi(2)).exp(),
            Term::Bump { amplitude, left, right, power } => {
                if x > left && x < right {
                    let s = (x - left) / (right - left);
                    amplitude * (4.0 * s * (1.0 - s)).powi(power)
                } else {
                    0.0
                }
            }
            Term::Cosine { amplitude, frequency, phase } => amplitude * (frequency * x + phase).cos(),
            Term::Polynomial { ref coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c),
        }
    }
}

/// `C^∞` cutoff: 1 on `[left + ramp, right − ramp]`, 0 outside `(left, right)`.
pub fn smooth_window(left: f64, right: f64, ramp: f64, x: f64) -> f64 {
    let step = |t: f64| -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
            f(t) / (f(t) + f(1.0 - t))
        }
    };
    step((x - left) / ramp) * step((right - x) / ramp)
}

impl ProfileSpec {
    pub fn eval(&self, x: f64) -> f64 {
        let sum: f64 = self.terms.iter().map(|t| t.eval(x)).sum();
        let w = self.window.map_or(1.0, |w| smooth_window(w.left, w.right, w.ramp, x));
        self.base + w * sum
    }

    pub fn build(&self, default_kind: ProfileKind, nodes: usize, base_dir: &Path) -> Result<Profile> {
        let kind = match &self.kind {
            Some(k) => k.parse()?,
            None => default_kind,
        };
        if let Some(file) = &self.file {
            if !self.terms.is_empty() || self.window.is_some() {
                return Err(Error::Validation("a profile takes either `file` or `terms`, not both".into()));
            }
            let path = base_dir.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            return Profile::from_csv(&text)?.with_kind(kind);
        }
        Profile::from_fn(kind, self.left, self.right, self.nodes.unwrap_or(nodes), |x| self.eval(x))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.ok_or_else(|| Error::Validation("config does not name a mode".into()))
    }

    /// Profiles each mode requires, in the order they are built.
    pub fn required_profiles(&self) -> Result<Vec<(&'static str, ProfileKind)>> {
        use ProfileKind::*;
        let wave = vec![("c", Speed), ("f", InitialData)];
        let heat = vec![("b", Convection), ("g", InitialData)];
        Ok(match self.mode()? {
            Mode::ForwardWave => wave,
            Mode::ForwardHeat => heat,
            Mode::InvertWave | Mode::InvertHeat | Mode::Extract if self.trace_file.is_some() => match self.mode()? {
                Mode::InvertHeat => vec![("b", Convection)],
                _ => vec![],
            },
            Mode::InvertWave => wave,
            Mode::InvertHeat => heat,
            Mode::Extract => match self.extract.equation {
                Equation::Wave => wave,
                Equation::Heat => heat,
            },
            Mode::ComparePairs => match self.compare.equation {
                Equation::Wave => vec![("c1", Speed), ("f1", InitialData), ("c2", Speed), ("f2", InitialData)],
                Equation::Heat => {
                    vec![("b1", Convection), ("g1", InitialData), ("b2", Convection), ("g2", InitialData)]
                }
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mode = self.mode()?;
        let g = &self.grids;
        let counts = [
            ("nodes", g.nodes),
            ("wave_resolution", g.wave_resolution),
            ("heat_samples", g.heat_samples),
            ("mode_count", g.mode_count),
            ("fd_resolution", g.fd_resolution),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Validation(format!("grids.{name} must be positive")));
            }
        }
        let reals = [("cfl", g.cfl), ("t_max", g.t_max), ("heat_t1", g.heat_t1), ("fd_dt", g.fd_dt)];
        for (name, v) in reals {
            if !(v > 0.0) {
                return Err(Error::Validation(format!("grids.{name} must be positive")));
            }
        }
        if !(g.heat_t2 > g.heat_t1) {
            return Err(Error::Validation("grids.heat_t2 must exceed grids.heat_t1".into()));
        }
        if !(self.noise.amplitude >= 0.0) {
            return Err(Error::Validation("noise.amplitude must be non-negative".into()));
        }
        for (name, v) in &self.tolerances {
            if !mode.tolerance_names().contains(&name.as_str()) {
                return Err(Error::Validation(format!(
                    "tolerances.{name} is not used by mode {}; known: {:?}",
                    mode.as_str(),
                    mode.tolerance_names()
                )));
            }
            if !(*v > 0.0) {
                return Err(Error::Validation(format!("tolerances.{name} must be positive")));
            }
        }
        for (name, _) in self.required_profiles()? {
            if !self.profiles.contains_key(name) {
                return Err(Error::Validation(format!("mode {} needs profile `{name}`", mode.as_str())));
            }
        }
        Ok(())
    }

    pub fn profile(&self, name: &str, kind: ProfileKind) -> Result<Profile> {
        let spec = self
            .profiles
            .get(name)
            .ok_or_else(|| Error::Validation(format!("missing profile `{name}`")))?;
        spec.build(kind, self.grids.nodes, &self.base_dir)
            .map_err(|e| e.at_stage(format!("profile {name}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
mode = "forward_wave"
[profiles.c]
base = 1.0
[profiles.f]
terms = [{ shape = "bump", amplitude = 1.0, left = 0.2, right = 0.7, power = 4 }]
"#;

    #[test]
    fn minimal_config_validates() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        let f = c.profile("f", ProfileKind::InitialData).unwrap();
        // 0.4375 is a grid node
        let s: f64 = (0.4375 - 0.2) / 0.5;
        assert!((f.eval(0.4375).unwrap() - (4.0 * s * (1.0 - s)).powi(4)).abs() < 1e-12);
    }

    #[test]
    fn empty_config_is_a_parse_error() {
        assert!(matches!(ExperimentConfig::from_toml(""), Err(Error::Parse(_))));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = MINIMAL.replace("[profiles.c]", "[grids]\ncfll = 0.5\n[profiles.c]");
        let Err(Error::Parse(msg)) = ExperimentConfig::from_toml(&text) else {
            panic!("typo accepted")
        };
        assert!(msg.contains("cfll") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_tolerance_names_are_rejected() {
        let text = format!("{MINIMAL}\n[tolerances]\nspeed_sup = 0.01\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn wrong_schema_version() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_profile_is_named() {
        let text = MINIMAL.replace("[profiles.f]", "[profiles.g]");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let Err(Error::Validation(msg)) = c.validate() else { panic!() };
        assert!(msg.contains("`f`"));
    }

    #[test]
    fn polynomial_term_uses_horner() {
        let t = Term::Polynomial { coefficients: vec![1.0, -2.0, 3.0] };
        assert!((t.eval(2.0) - 9.0).abs() < 1e-15);
    }
}
