//! Run configuration: command-line flags over an optional key=value file over defaults.

use crate::CliError;
use hdivct::divfree::{Mode, GLOBAL_FULL_TOL};
use hdivct::induction::{Cadence, Integration};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Inclusive integer range written as `a..b`, `a..=b`, a comma list or a single value.
pub fn parse_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("invalid range '{s}' (expected e.g. 2..4, 2,3,4 or 3)"));
    let s = s.trim();
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Comma-separated correction modes; `all` expands to every mode.
pub fn parse_modes(s: &str) -> Result<Vec<Mode>, CliError> {
    if s.trim() == "all" {
        return Ok(Mode::ALL.to_vec());
    }
    let mut modes = Vec::new();
    for part in s.split(',') {
        let m: Mode = part.trim().parse().map_err(|e: hdivct::Error| CliError::Usage(e.to_string()))?;
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    Ok(modes)
}

/// Values read from a configuration file, keyed like the long flags.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

pub const FILE_KEYS: [&str; 11] =
    ["p", "levels", "dt", "steps", "mode", "integration", "cadence", "full-tol", "seed", "out", "pretty"];

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
            let k = k.trim().replace('_', "-");
            if !FILE_KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key '{k}'", n + 1)));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| CliError::Usage(format!("config key '{key}': invalid value '{v}'"))))
            .transpose()
    }
}

/// Flags of the `run` command as given on the command line.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct RunFlags {
    pub p: Option<usize>,
    pub levels: Option<String>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub mode: Option<String>,
    pub integration: Option<String>,
    pub cadence: Option<String>,
    pub full_tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub pretty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: usize,
    pub levels: Vec<usize>,
    pub dt: f64,
    pub steps: usize,
    pub modes: Vec<Mode>,
    pub integration: Integration,
    pub cadence: Cadence,
    pub full_tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub pretty: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 3,
            levels: vec![2, 3, 4],
            dt: 0.005,
            steps: 100,
            modes: vec![Mode::None],
            integration: Integration::Exact,
            cadence: Cadence::Final,
            full_tol: GLOBAL_FULL_TOL,
            seed: 0,
            out: None,
            pretty: false,
        }
    }
}

fn parsed<T: FromStr>(s: &str, what: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| CliError::Usage(format!("invalid {what} '{s}': {e}")))
}

impl RunConfig {
    /// Command line wins over the file, the file over the defaults.
    pub fn resolve(flags: &RunFlags, file: &FileConfig) -> Result<Self, CliError> {
        let d = Self::default();
        let levels = match flags.levels.as_deref().or(file.raw("levels")) {
            Some(s) => parse_range(s)?,
            None => d.levels,
        };
        let modes = match flags.mode.as_deref().or(file.raw("mode")) {
            Some(s) => parse_modes(s)?,
            None => d.modes,
        };
        let integration = match flags.integration.as_deref().or(file.raw("integration")) {
            Some(s) => parsed(s, "integration")?,
            None => d.integration,
        };
        let cadence = match flags.cadence.as_deref().or(file.raw("cadence")) {
            Some(s) => parsed(s, "cadence")?,
            None => d.cadence,
        };
        let out = flags.out.clone().or_else(|| file.raw("out").map(PathBuf::from));
        let cfg = Self {
            p: flags.p.or(file.get("p")?).unwrap_or(d.p),
            levels,
            dt: flags.dt.or(file.get("dt")?).unwrap_or(d.dt),
            steps: flags.steps.or(file.get("steps")?).unwrap_or(d.steps),
            modes,
            integration,
            cadence,
            full_tol: flags.full_tol.or(file.get("full-tol")?).unwrap_or(d.full_tol),
            seed: flags.seed.or(file.get("seed")?).unwrap_or(d.seed),
            out,
            pretty: flags.pretty || file.get("pretty")?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.p == 0 {
            return Err(CliError::Usage("--p must be at least 1".into()));
        }
        if self.levels.contains(&0) {
            return Err(CliError::Usage("mesh levels start at 1".into()));
        }
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(CliError::Usage(format!("--dt {} must be a non-negative number", self.dt)));
        }
        if !(self.full_tol.is_finite() && self.full_tol > 0.0) {
            return Err(CliError::Usage(format!("--full-tol {} must be positive", self.full_tol)));
        }
        if self.p < 2 && self.modes.contains(&Mode::Local) {
            return Err(CliError::Usage("mode local needs --p 2 or higher".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_range("3").unwrap(), vec![3]);
        assert_eq!(parse_range("1, 3").unwrap(), vec![1, 3]);
        assert!(parse_range("4..2").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn modes() {
        assert_eq!(parse_modes("all").unwrap().len(), 4);
        assert_eq!(parse_modes("local+global,none").unwrap(), vec![Mode::LocalGlobal, Mode::None]);
        assert!(parse_modes("both").is_err());
    }

    #[test]
    fn precedence_is_flags_then_file_then_defaults() {
        let file = FileConfig::parse("# experiment\np = 2\nsteps=10\ndt=0.01\nmode=local\n").unwrap();
        let flags = RunFlags { steps: Some(4), ..Default::default() };
        let cfg = RunConfig::resolve(&flags, &file).unwrap();
        assert_eq!(cfg.p, 2);
        assert_eq!(cfg.steps, 4);
        assert_eq!(cfg.dt, 0.01);
        assert_eq!(cfg.modes, vec![Mode::Local]);
        assert_eq!(cfg.levels, vec![2, 3, 4]);
    }

    #[test]
    fn bad_files_are_usage_errors() {
        assert!(matches!(FileConfig::parse("colour=red"), Err(CliError::Usage(_))));
        assert!(matches!(FileConfig::parse("p"), Err(CliError::Usage(_))));
        let file = FileConfig::parse("p=zero").unwrap();
        assert!(matches!(RunConfig::resolve(&RunFlags::default(), &file), Err(CliError::Usage(_))));
    }

    #[test]
    fn degree_zero_is_rejected() {
        let flags = RunFlags { p: Some(0), ..Default::default() };
        assert!(matches!(RunConfig::resolve(&flags, &FileConfig::default()), Err(CliError::Usage(_))));
    }
}
