//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[problem]`, `[ic]`,
//! `[grid]`, `[stepping]`, `[analysis]` and `[output]`. Keys carry the names
//! of the corresponding library fields:
//!
//! ```toml
//! [ic]
//! builtin = "example_A"      # fills [problem] and the coefficients
//!
//! [grid]
//! h = 0.001                  # or n = 124
//!
//! [stepping]
//! mode = "adaptive"
//! tau0 = 1e-6
//! tau_min = 1e-9
//! ```
//!
//! Keys given explicitly override whatever a builtin supplies.

use std::fmt;
use std::path::{Path, PathBuf};

use quench_core::ic::{self, DEFAULT_COMPAT_TOL};
use quench_core::{
    ExperimentConfig, InitialCondition, PhiSpec, ProblemSpec, QuenchError, StepMode,
};
use serde::{Deserialize, Serialize};

/// A config problem, located at a line of the file when that is possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    ic: RawIc,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    stepping: SteppingSpec,
    #[serde(default)]
    analysis: RawAnalysis,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    a: Option<f64>,
    p: Option<f64>,
    q: Option<f64>,
    r: Option<f64>,
    /// "identity" or "power"
    phi: Option<String>,
    m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIc {
    builtin: Option<String>,
    c0: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
}

/// Spatial resolution: exactly one of `n` and `h`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: Option<usize>,
    pub h: Option<f64>,
}

/// Raw `[stepping]` keys; unset keys fall back to [`ExperimentConfig::new`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingSpec {
    pub mode: Option<StepMode>,
    pub tau0: Option<f64>,
    pub tau1: Option<f64>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub epsilon_quench: Option<f64>,
    pub max_time: Option<f64>,
    pub max_steps: Option<usize>,
    pub max_halvings: Option<u32>,
    pub sample_stride: Option<usize>,
    pub tail_len: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    window_decades: Option<f64>,
    fit_floor: Option<f64>,
    compat_tol: Option<f64>,
    compare_time: Option<f64>,
    ref_divisor: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub window_decades: f64,
    /// Lower end of T - t in rate fits; h^2 when unset.
    pub fit_floor: Option<f64>,
    pub compat_tol: f64,
    pub compare_time: Option<f64>,
    pub ref_divisor: Option<u32>,
}

/// A parsed config with the problem and initial condition already checked.
/// Grid and stepping are checked on demand, since `validate-ic` needs
/// neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub builtin: Option<String>,
    pub problem: ProblemSpec,
    pub ic: InitialCondition,
    pub grid: GridSpec,
    pub stepping: SteppingSpec,
    pub analysis: AnalysisSettings,
    pub output_dir: PathBuf,
    #[serde(skip)]
    source: Source,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Source {
    path: PathBuf,
    text: String,
}

/// Settings of the temporal order study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSettings {
    pub n: usize,
    pub tau: f64,
    pub compare_time: f64,
    pub divisor: u32,
    pub epsilon_quench: f64,
}

/// Smallest reference-step divisor that makes the reference run credibly
/// finer than both runs under test.
pub const MIN_REF_DIVISOR: u32 = 4;

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Config::parse(&text, path)
    }

    /// Parses `text`; `path` is used for messages and to resolve a relative
    /// `output_dir`.
    pub fn parse(text: &str, path: &Path) -> Result<Config, ConfigError> {
        let source = Source {
            path: path.to_path_buf(),
            text: text.to_owned(),
        };
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_owned(),
        })?;

        let base = match &raw.ic.builtin {
            Some(name) => Some(ic::builtin::<f64>(name).ok_or_else(|| {
                source.error_at(
                    "ic",
                    "builtin",
                    format!("unknown builtin `{name}` (known: example_A, example_B)"),
                )
            })?),
            None => None,
        };
        let pick = |section: &str, key: &str, value: Option<f64>, fallback: Option<f64>| {
            value.or(fallback).ok_or_else(|| {
                source.error_at(section, key, format!("missing `{key}` in [{section}]"))
            })
        };
        let bp = base.as_ref().map(|b| b.0);
        let a = pick("problem", "a", raw.problem.a, bp.map(|s| s.a))?;
        let p = pick("problem", "p", raw.problem.p, bp.map(|s| s.p))?;
        let q = pick("problem", "q", raw.problem.q, bp.map(|s| s.q))?;
        let r = raw.problem.r.or(bp.map(|s| s.r)).unwrap_or(2.0);
        let phi = match raw.problem.phi.as_deref() {
            None | Some("identity") => {
                if raw.problem.m.is_some() && raw.problem.phi.is_none() {
                    return Err(source.error_at(
                        "problem",
                        "m",
                        "`m` needs phi = \"power\"".into(),
                    ));
                }
                bp.map(|s| s.phi).unwrap_or(PhiSpec::Identity)
            }
            Some("power") => {
                let m = pick("problem", "m", raw.problem.m, None)?;
                PhiSpec::power(m).map_err(|e| source.core_error(e))?
            }
            Some(other) => {
                return Err(source.error_at(
                    "problem",
                    "phi",
                    format!("unknown phi `{other}` (expected \"identity\" or \"power\")"),
                ))
            }
        };
        let problem = ProblemSpec::new(a, p, q, r, phi).map_err(|e| source.core_error(e))?;

        let bc = base.as_ref().map(|b| b.1.coeffs());
        let c0 = pick("ic", "c0", raw.ic.c0, bc.map(|c| c[0]))?;
        let c1 = pick("ic", "c1", raw.ic.c1, bc.map(|c| c[1]))?;
        let c2 = pick("ic", "c2", raw.ic.c2, bc.map(|c| c[2]))?;
        let ic = InitialCondition::quadratic(c0, c1, c2, a).map_err(|e| source.core_error(e))?;

        let analysis = AnalysisSettings {
            window_decades: raw
                .analysis
                .window_decades
                .unwrap_or(quench_core::analysis::DEFAULT_WINDOW_DECADES),
            fit_floor: raw.analysis.fit_floor,
            compat_tol: raw.analysis.compat_tol.unwrap_or(DEFAULT_COMPAT_TOL),
            compare_time: raw.analysis.compare_time,
            ref_divisor: raw.analysis.ref_divisor,
        };
        if !(analysis.window_decades > 0.0) {
            return Err(source.error_at("analysis", "window_decades", "must be positive".into()));
        }
        if !(analysis.compat_tol >= 0.0) {
            return Err(source.error_at("analysis", "compat_tol", "must be non-negative".into()));
        }
        if let Some(floor) = analysis.fit_floor {
            if !(floor >= 0.0) {
                return Err(source.error_at(
                    "analysis",
                    "fit_floor",
                    "must be non-negative".into(),
                ));
            }
        }

        let output_dir = match raw.output.output_dir {
            Some(dir) if dir.is_relative() => path.parent().unwrap_or(Path::new("")).join(dir),
            Some(dir) => dir,
            None => PathBuf::from("out"),
        };

        Ok(Config {
            builtin: raw.ic.builtin,
            problem,
            ic,
            grid: raw.grid,
            stepping: raw.stepping,
            analysis,
            output_dir,
            source,
        })
    }

    pub fn path(&self) -> &Path {
        &self.source.path
    }

    /// Interior resolution from `n`, or from `h` as n = round(a / h) - 1.
    pub fn grid_n(&self) -> Result<usize, ConfigError> {
        match (self.grid.n, self.grid.h) {
            (Some(n), None) => Ok(n),
            (None, Some(h)) => {
                if !(h > 0.0 && h < self.problem.a) {
                    return Err(self.source.error_at(
                        "grid",
                        "h",
                        format!("need 0 < h < a, got {h}"),
                    ));
                }
                let cells = (self.problem.a / h).round() as usize;
                Ok(cells.max(1) - 1)
            }
            (Some(_), Some(_)) => {
                Err(self
                    .source
                    .error_at("grid", "h", "give either `n` or `h`, not both".into()))
            }
            (None, None) => Err(self
                .source
                .error_section("grid", "missing `n` or `h` in [grid]".into())),
        }
    }

    /// The full simulation setup for `run`.
    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let s = &self.stepping;
        let tau0 = s.tau0.ok_or_else(|| {
            self.source
                .error_section("stepping", "missing `tau0` in [stepping]".into())
        })?;
        let mut cfg = ExperimentConfig::new(self.problem, self.ic, self.grid_n()?, tau0);
        if let Some(mode) = s.mode {
            cfg.mode = mode;
        }
        cfg.tau1 = s.tau1.unwrap_or(cfg.tau1);
        cfg.tau_min = s.tau_min.unwrap_or(cfg.tau_min);
        cfg.tau_max = s.tau_max.unwrap_or(cfg.tau_max);
        cfg.epsilon_quench = s.epsilon_quench.unwrap_or(cfg.epsilon_quench);
        cfg.max_time = s.max_time;
        cfg.max_steps = s.max_steps;
        cfg.max_halvings = s.max_halvings.unwrap_or(cfg.max_halvings);
        cfg.sample_stride = s.sample_stride.unwrap_or(cfg.sample_stride);
        cfg.tail_len = s.tail_len.unwrap_or(cfg.tail_len);
        cfg.output_dir = self.output_dir.clone();
        cfg.validate().map_err(|e| self.source.core_error(e))?;
        Ok(cfg)
    }

    /// Settings for `convergence`: step `tau0`, comparison time and
    /// reference divisor from `[analysis]`.
    pub fn convergence(&self) -> Result<ConvergenceSettings, ConfigError> {
        let n = self.grid_n()?;
        if n < 2 {
            return Err(self
                .source
                .error_at("grid", "n", format!("need n >= 2, got {n}")));
        }
        let tau = self.stepping.tau0.ok_or_else(|| {
            self.source
                .error_section("stepping", "missing `tau0` in [stepping]".into())
        })?;
        if !(tau > 0.0) {
            return Err(self
                .source
                .error_at("stepping", "tau0", "must be positive".into()));
        }
        let compare_time = self.analysis.compare_time.ok_or_else(|| {
            self.source
                .error_section("analysis", "missing `compare_time` in [analysis]".into())
        })?;
        if !(compare_time > 0.0) {
            return Err(self.source.error_at(
                "analysis",
                "compare_time",
                "must be positive".into(),
            ));
        }
        let steps = compare_time / tau;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
            return Err(self.source.error_at(
                "analysis",
                "compare_time",
                format!("compare_time {compare_time} is not a whole number of steps tau0 = {tau}"),
            ));
        }
        let divisor = self.analysis.ref_divisor.unwrap_or(16);
        if divisor < MIN_REF_DIVISOR {
            return Err(self.source.error_at(
                "analysis",
                "ref_divisor",
                format!("ref_divisor {divisor} < {MIN_REF_DIVISOR}: the reference run would not be credibly finer"),
            ));
        }
        Ok(ConvergenceSettings {
            n,
            tau,
            compare_time,
            divisor,
            epsilon_quench: self.stepping.epsilon_quench.unwrap_or(1e-4),
        })
    }
}

impl Source {
    fn error_at(&self, section: &str, key: &str, message: String) -> ConfigError {
        ConfigError {
            path: self.path.clone(),
            line: key_line(&self.text, section, key).or_else(|| section_line(&self.text, section)),
            message,
        }
    }

    fn error_section(&self, section: &str, message: String) -> ConfigError {
        ConfigError {
            path: self.path.clone(),
            line: section_line(&self.text, section),
            message,
        }
    }

    /// Points a library validation error at the key it names.
    fn core_error(&self, e: QuenchError) -> ConfigError {
        let (section, key) = match &e {
            QuenchError::InvalidParameter { name, .. } => match *name {
                "a" | "p" | "q" | "r" | "m" | "phi" => ("problem", *name),
                "n" => ("grid", "n"),
                "ic" => ("ic", "c0"),
                "tau" => ("stepping", "tau0"),
                other => ("stepping", other),
            },
            QuenchError::InitialConditionRange { .. } => ("ic", "c0"),
            _ => ("problem", ""),
        };
        let mut err = self.error_at(section, key, e.to_string());
        if err.line.is_none() && section == "ic" {
            err.line = key_line(&self.text, "ic", "builtin");
        }
        err
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn section_line(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.trim() == format!("[{section}]"))
        .map(|i| i + 1)
}

/// 1-based line of `key = ...` inside `[section]`.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim();
        } else if let Some((k, _)) = line.split_once('=') {
            if current == section && k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, ConfigError> {
        Config::parse(text, Path::new("cfg.toml"))
    }

    #[test]
    fn builtin_fills_everything() {
        let cfg =
            parse("[ic]\nbuiltin = \"example_A\"\n[grid]\nh = 0.001\n[stepping]\ntau0 = 1e-6\n")
                .unwrap();
        let (spec, ic) = quench_core::example_a::<f64>();
        assert_eq!(cfg.problem, spec);
        assert_eq!(cfg.ic, ic);
        assert_eq!(cfg.grid_n().unwrap(), 124);
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp.tau1, 1e-6);
        assert_eq!(exp.mode, StepMode::Adaptive);
    }

    #[test]
    fn explicit_keys_override_builtin() {
        let cfg = parse("[problem]\nr = 3\n[ic]\nbuiltin = \"example_A\"\n").unwrap();
        assert_eq!(cfg.problem.r, 3.0);
        assert_eq!(cfg.problem.p, 1.0);
    }

    #[test]
    fn h_rounds_to_whole_cells() {
        let cfg = parse("[ic]\nbuiltin = \"example_A\"\n[grid]\nh = 0.01\n").unwrap();
        assert_eq!(cfg.grid_n().unwrap(), 12);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let err = parse("[ic]\nbuiltin = \"example_A\"\n\n[grid]\nn = = 3\n").unwrap_err();
        assert_eq!(err.line, Some(5), "{err}");
        let err = parse("[ic]\nbuiltin = \"example_A\"\n[grid]\nnodes = 3\n").unwrap_err();
        assert_eq!(err.line, Some(4), "{err}");
    }

    #[test]
    fn semantic_errors_carry_lines() {
        let err = parse("[problem]\na = 0.125\np = -1\nq = 1\n[ic]\nc0 = 0.25\nc1 = 4\nc2 = 4\n")
            .unwrap_err();
        assert_eq!(err.line, Some(3), "{err}");
        let err = parse("[ic]\nbuiltin = \"example_C\"\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err =
            parse("[problem]\na = 1\np = 1\nq = 1\n[ic]\nc0 = 0.5\nc1 = 2\nc2 = 0\n").unwrap_err();
        assert_eq!(err.line, Some(6), "{err}");
    }

    #[test]
    fn missing_keys_are_reported() {
        let err = parse("[problem]\na = 1\np = 1\n").unwrap_err();
        assert!(err.message.contains("`q`"), "{err}");
        let cfg = parse("[ic]\nbuiltin = \"example_A\"\n").unwrap();
        assert!(cfg.experiment().unwrap_err().message.contains("`tau0`"));
        assert!(cfg.grid_n().unwrap_err().message.contains("[grid]"));
    }

    #[test]
    fn convergence_guards() {
        let base = "[ic]\nbuiltin = \"example_A\"\n[grid]\nh = 0.01\n[stepping]\ntau0 = 1e-4\n[analysis]\ncompare_time = 5e-4\n";
        let ok = parse(base).unwrap().convergence().unwrap();
        assert_eq!((ok.n, ok.divisor), (12, 16));
        let err = parse(&format!("{base}ref_divisor = 3\n"))
            .unwrap()
            .convergence()
            .unwrap_err();
        assert_eq!(err.line, Some(9));
        let err = parse(&base.replace("5e-4", "2.5e-4"))
            .unwrap()
            .convergence()
            .unwrap_err();
        assert!(err.message.contains("whole number"));
    }

    #[test]
    fn relative_output_dir_follows_config() {
        let cfg = Config::parse(
            "[ic]\nbuiltin = \"example_B\"\n[output]\noutput_dir = \"res\"\n",
            Path::new("/tmp/x/c.toml"),
        )
        .unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x/res"));
    }
}
