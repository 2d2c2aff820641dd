use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use effv_core::smt::{Solver, SolverConfig};

/// Overrides the solver executable; takes precedence over the config file.
pub const SOLVER_PATH_ENV: &str = "EFFV_SOLVER_PATH";

/// Settings read from a `key = value` file. Flags override them.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub solver: String,
    /// Executable; defaults to the solver name looked up on `PATH`.
    pub solver_path: Option<PathBuf>,
    /// Further solvers tried when the first gives no answer.
    pub fallback: Vec<String>,
    pub timeout_secs: u64,
    pub jobs: usize,
    pub logic: String,
    pub fuel: u64,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            solver: "z3".into(),
            solver_path: None,
            fallback: Vec::new(),
            timeout_secs: 10,
            jobs: 4,
            logic: "ALL".into(),
            fuel: 10_000_000,
        }
    }
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Config> {
        let mut c = Config::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", n + 1);
            };
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            let num = |what: &str| -> Result<u64> {
                v.parse().with_context(|| format!("line {}: `{what}` needs a non-negative integer", n + 1))
            };
            match k {
                "solver" => c.solver = v.to_string(),
                "solver_path" => c.solver_path = Some(PathBuf::from(v)),
                "fallback" => c.fallback = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                "timeout" => c.timeout_secs = num("timeout")?,
                "jobs" => c.jobs = num("jobs")? as usize,
                "logic" => c.logic = v.to_string(),
                "fuel" => c.fuel = num("fuel")?,
                _ => bail!("line {}: unknown key `{k}`", n + 1),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Config::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies the environment override for the solver path.
    pub fn with_env(mut self) -> Config {
        if let Some(p) = std::env::var_os(SOLVER_PATH_ENV).filter(|p| !p.is_empty()) {
            self.solver_path = Some(PathBuf::from(p));
        }
        self
    }

    pub fn solver_config(&self, dump_dir: Option<PathBuf>) -> SolverConfig {
        let mut solvers = vec![Solver {
            name: self.solver.clone(),
            path: self.solver_path.clone().unwrap_or_else(|| PathBuf::from(&self.solver)),
        }];
        for f in &self.fallback {
            solvers.push(Solver { name: f.clone(), path: PathBuf::from(f) });
        }
        SolverConfig { solvers, timeout_secs: self.timeout_secs, logic: self.logic.clone(), jobs: self.jobs, dump_dir }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let c = Config::parse("# solver settings\nsolver = cvc5\ntimeout=3 # seconds\njobs = 2\nfallback = z3, alt-ergo\n").unwrap();
        assert_eq!(c.solver, "cvc5");
        assert_eq!(c.timeout_secs, 3);
        assert_eq!(c.jobs, 2);
        assert_eq!(c.fallback, ["z3", "alt-ergo"]);
        assert_eq!(c.logic, "ALL");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_numbers() {
        assert!(Config::parse("colour = red").is_err());
        assert!(Config::parse("timeout = soon").is_err());
        assert!(Config::parse("timeout").is_err());
    }

    #[test]
    fn solver_path_defaults_to_name() {
        let sc = Config::default().solver_config(None);
        assert_eq!(sc.solvers[0].path, PathBuf::from("z3"));
        let c = Config { solver_path: Some("/opt/z3".into()), ..Config::default() };
        assert_eq!(c.solver_config(None).solvers[0].path, PathBuf::from("/opt/z3"));
    }
}
