//! TOML configuration for the command-line front end.
//!
//! ```toml
//! [problem]
//! model = "damped_wave"
//! n = 1
//! p = 3.0
//! q = 3.0
//! eps = 1.0
//! data = { shape = "smooth_bump", a_u0 = 0.4, a_v0 = 0.4, radius = 4.0 }
//!
//! [grid]
//! L = 128.0
//! N = 1024
//!
//! [run]
//! t_max = 200.0
//!
//! [sweep]
//! eps_start = 1.2
//! eps_count = 6
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, GridSpec};
use crate::problem::ProblemSpec;
use crate::run::RunConfig;
use crate::sweep::{geometric_eps, Rung, SweepSpec};

pub const DEFAULT_EPS_RATIO: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

/// Either an explicit `eps_list` or `eps_start`/`eps_count` with ratio
/// `eps_ratio` (default 0.85). `ladder` defaults to the `[grid]` section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<Rung>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: ProblemSpec,
    pub grid: GridSection,
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::Parse { line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.grid_spec()?;
        self.run.validate()
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        make_grid(self.problem.n, self.grid.half_width, self.grid.points)
    }

    /// Sweep settings with every default filled in. `jobs` falls back to
    /// `default_jobs` when the file does not set it.
    pub fn sweep_spec(&self, default_jobs: usize) -> Result<SweepSpec> {
        let s = self.sweep.clone().unwrap_or_default();
        let eps_list = match (&s.eps_list, s.eps_start, s.eps_count) {
            (Some(list), None, None) => list.clone(),
            (None, Some(start), Some(count)) => {
                geometric_eps(start, s.eps_ratio.unwrap_or(DEFAULT_EPS_RATIO), count)
            }
            (None, None, None) => return Err(Error::Config("sweep needs eps_list or eps_start/eps_count".into())),
            _ => {
                return Err(Error::Config(
                    "give either eps_list or eps_start with eps_count, not both".into(),
                ))
            }
        };
        let ladder = s
            .ladder
            .clone()
            .unwrap_or_else(|| vec![Rung { half_width: self.grid.half_width, points: self.grid.points }]);
        let spec = SweepSpec {
            problem: self.problem,
            eps_list,
            ladder,
            config: self.run,
            jobs: s.jobs.unwrap_or(default_jobs),
            output: s.output.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The configuration with all defaults written out. Parsing the result
    /// gives back the same configuration.
    pub fn resolved(&self, default_jobs: usize) -> Result<ConfigFile> {
        let mut out = self.clone();
        if self.sweep.is_some() {
            let spec = self.sweep_spec(default_jobs)?;
            out.sweep = Some(SweepSection {
                eps_list: Some(spec.eps_list),
                eps_start: None,
                eps_ratio: None,
                eps_count: None,
                ladder: Some(spec.ladder),
                jobs: Some(spec.jobs),
                output: spec.output,
            });
        }
        Ok(out)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[problem]
model = "damped_wave"
n = 1
p = 3.0
q = 3.0
eps = 1.0
data = { shape = "smooth_bump", a_u0 = 0.4, a_v0 = 0.4, radius = 4.0 }

[grid]
L = 128.0
N = 1024

[run]
t_max = 50.0
"#;

    #[test]
    fn defaults_are_filled_and_echo_is_stable() {
        let text = format!("{BASE}\n[sweep]\neps_start = 1.2\neps_count = 3\n");
        let cfg = ConfigFile::parse(&text).unwrap();
        assert_eq!(cfg.run.dt0, 0.1);
        let resolved = cfg.resolved(2).unwrap();
        let echo = resolved.to_toml().unwrap();
        let again = ConfigFile::parse(&echo).unwrap();
        assert_eq!(again, resolved);
        assert_eq!(again.resolved(7).unwrap(), resolved);
        let spec = again.sweep_spec(7).unwrap();
        assert_eq!(spec.eps_list, geometric_eps(1.2, 0.85, 3));
        assert_eq!(spec.eps_list[1], 1.2 * 0.85);
        assert_eq!(spec.jobs, 2);
        assert_eq!(spec.ladder, vec![Rung { half_width: 128.0, points: 1024 }]);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = BASE.replace("t_max = 50.0", "t_max = 50.0\nt_mux = 1.0");
        let e = ConfigFile::parse(&text).unwrap_err();
        assert!(e.to_string().contains("t_mux"), "{e}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ConfigFile::parse(&BASE.replace("N = 1024", "N = 1000")).is_err());
        assert!(ConfigFile::parse(&BASE.replace("p = 3.0", "p = 0.5")).is_err());
        let both = format!("{BASE}\n[sweep]\neps_list = [1.0, 0.5]\neps_start = 1.0\neps_count = 2\n");
        let cfg = ConfigFile::parse(&both).unwrap();
        assert!(cfg.sweep_spec(1).is_err());
    }
}
