//! Flat `key = value` run configuration.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored. Lists
//! are comma separated. Step functions on `[0, 1]` are written as values
//! interleaved with breakpoints, `v0 | b1 | v1 | b2 | v2`. Unknown keys and
//! repeated keys are errors.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::bench::{
    benchmark_catalog, Benchmark, BenchmarkId, BenchmarkParams, Material, PiecewiseConstant,
};
use crate::evolution::{graded_times, BoundaryMode, EvolutionOptions};
use crate::numfmt::real;
use crate::rigid_limit::default_epsilons;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for {field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Run,
    Sweep,
    Example41,
    Safeload,
    Report,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Self::Run,
        Self::Sweep,
        Self::Example41,
        Self::Safeload,
        Self::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Sweep => "sweep",
            Self::Example41 => "example41",
            Self::Safeload => "safeload",
            Self::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub benchmark: BenchmarkId,
    pub mesh_n: usize,
    pub time_steps: usize,
    /// Exponent `q` of the grid `t_k = T (k/M)^q`; unset means 1 for `run`
    /// and `report`, 3 for `sweep`.
    pub time_grading: Option<f64>,
    pub horizon: f64,
    pub epsilon: f64,
    pub epsilon_list: Vec<f64>,
    pub shear_modulus: f64,
    pub bulk_modulus: f64,
    pub yield_radius: f64,
    /// Unset means the benchmark default.
    pub boundary_mode: Option<BoundaryMode>,
    pub tol: f64,
    pub max_iters: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub shear_rate: f64,
    pub traction_factor: f64,
    pub rigid_rotation: f64,
    pub rigid_translation: [f64; 2],
    pub ex41_c: f64,
    pub ex41_f: PiecewiseConstant,
    pub ex41_g: PiecewiseConstant,
    pub ex41_lambdas: [f64; 2],
    pub safeload_iters: usize,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = BenchmarkParams::default();
        let m = Material::default();
        let o = EvolutionOptions::default();
        Self {
            command: None,
            benchmark: BenchmarkId::Shear,
            mesh_n: 16,
            time_steps: 32,
            time_grading: None,
            horizon: p.horizon,
            epsilon: 1.0,
            epsilon_list: default_epsilons(),
            shear_modulus: m.shear_modulus,
            bulk_modulus: m.bulk_modulus,
            yield_radius: m.yield_radius,
            boundary_mode: None,
            tol: o.tol,
            max_iters: o.max_iters,
            output_dir: PathBuf::from("out"),
            seed: 0,
            shear_rate: p.shear_rate,
            traction_factor: p.traction_factor,
            rigid_rotation: p.rigid_rotation,
            rigid_translation: p.rigid_translation,
            ex41_c: 0.3,
            ex41_f: PiecewiseConstant::constant(0.0),
            ex41_g: PiecewiseConstant::constant(0.0),
            ex41_lambdas: [2.0, -2.0],
            safeload_iters: 20_000,
            threads: 1,
        }
    }
}

pub const KEYS: [&str; 26] = [
    "command",
    "benchmark",
    "mesh_n",
    "time_steps",
    "time_grading",
    "horizon",
    "epsilon",
    "epsilon_list",
    "shear_modulus",
    "bulk_modulus",
    "yield_radius",
    "boundary_mode",
    "tol",
    "max_iters",
    "output_dir",
    "seed",
    "shear_rate",
    "traction_factor",
    "rigid_rotation",
    "rigid_translation",
    "ex41_c",
    "ex41_f",
    "ex41_g",
    "ex41_lambdas",
    "safeload_iters",
    "threads",
];

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.trim()
        .parse::<T>()
        .map_err(|_| format!("cannot parse {:?} as a number", v.trim()))
}

fn list(v: &str) -> Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(vec![]);
    }
    v.split(',').map(num::<f64>).collect()
}

fn pair(v: &str) -> Result<[f64; 2], String> {
    match list(v)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        other => Err(format!(
            "expected 2 comma-separated numbers, got {}",
            other.len()
        )),
    }
}

fn step_function(v: &str) -> Result<PiecewiseConstant, String> {
    let parts: Vec<f64> = v.split('|').map(num::<f64>).collect::<Result<_, _>>()?;
    if parts.len().is_multiple_of(2) {
        return Err("expected v0 | b1 | v1 | ...".into());
    }
    let values = parts.iter().step_by(2).copied().collect();
    let breaks = parts.iter().skip(1).step_by(2).copied().collect();
    PiecewiseConstant::new(breaks, values).map_err(|e| e.to_string())
}

fn show_step_function(p: &PiecewiseConstant) -> String {
    let mut s = real(p.values[0]);
    for (b, v) in p.breaks.iter().zip(&p.values[1..]) {
        s.push_str(&format!(" | {} | {}", real(*b), real(*v)));
    }
    s
}

fn show_list(v: &[f64]) -> String {
    v.iter().map(|x| real(*x)).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "command" => self.command = Some(v.parse()?),
            "benchmark" => {
                self.benchmark = v
                    .parse()
                    .map_err(|e: crate::bench::BenchError| e.to_string())?
            }
            "mesh_n" => self.mesh_n = num(v)?,
            "time_steps" => self.time_steps = num(v)?,
            "time_grading" => self.time_grading = Some(num(v)?),
            "horizon" => self.horizon = num(v)?,
            "epsilon" => self.epsilon = num(v)?,
            "epsilon_list" => self.epsilon_list = list(v)?,
            "shear_modulus" => self.shear_modulus = num(v)?,
            "bulk_modulus" => self.bulk_modulus = num(v)?,
            "yield_radius" => self.yield_radius = num(v)?,
            "boundary_mode" => self.boundary_mode = Some(v.parse().map_err(|e: String| e)?),
            "tol" => self.tol = num(v)?,
            "max_iters" => self.max_iters = num(v)?,
            "output_dir" => {
                if v.is_empty() {
                    return Err("output_dir must not be empty".into());
                }
                self.output_dir = PathBuf::from(v)
            }
            "seed" => self.seed = num(v)?,
            "shear_rate" => self.shear_rate = num(v)?,
            "traction_factor" => self.traction_factor = num(v)?,
            "rigid_rotation" => self.rigid_rotation = num(v)?,
            "rigid_translation" => self.rigid_translation = pair(v)?,
            "ex41_c" => self.ex41_c = num(v)?,
            "ex41_f" => self.ex41_f = step_function(v)?,
            "ex41_g" => self.ex41_g = step_function(v)?,
            "ex41_lambdas" => self.ex41_lambdas = pair(v)?,
            "safeload_iters" => self.safeload_iters = num(v)?,
            "threads" => self.threads = num(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    message: format!("must be positive and finite, got {v}"),
                })
            }
        }
        fn at_least_one(field: &'static str, v: usize) -> Result<(), ConfigError> {
            if v >= 1 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    message: "must be at least 1".into(),
                })
            }
        }
        fn finite(field: &'static str, v: &[f64]) -> Result<(), ConfigError> {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    message: "must be finite".into(),
                })
            }
        }
        at_least_one("mesh_n", self.mesh_n)?;
        at_least_one("time_steps", self.time_steps)?;
        at_least_one("max_iters", self.max_iters)?;
        at_least_one("safeload_iters", self.safeload_iters)?;
        at_least_one("threads", self.threads)?;
        if let Some(q) = self.time_grading {
            positive("time_grading", q)?;
        }
        positive("horizon", self.horizon)?;
        positive("epsilon", self.epsilon)?;
        positive("shear_modulus", self.shear_modulus)?;
        positive("bulk_modulus", self.bulk_modulus)?;
        positive("yield_radius", self.yield_radius)?;
        positive("tol", self.tol)?;
        positive("shear_rate", self.shear_rate)?;
        positive("traction_factor", self.traction_factor)?;
        finite("rigid_rotation", &[self.rigid_rotation])?;
        finite("rigid_translation", &self.rigid_translation)?;
        finite("ex41_c", &[self.ex41_c])?;
        finite("ex41_lambdas", &self.ex41_lambdas)?;
        if self.epsilon_list.is_empty() {
            return Err(ConfigError::Invalid {
                field: "epsilon_list",
                message: "must not be empty".into(),
            });
        }
        for &e in &self.epsilon_list {
            positive("epsilon_list", e)?;
        }
        if self.epsilon_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ConfigError::Invalid {
                field: "epsilon_list",
                message: "must be strictly decreasing".into(),
            });
        }
        Ok(())
    }

    pub fn material(&self) -> Material {
        Material {
            shear_modulus: self.shear_modulus,
            bulk_modulus: self.bulk_modulus,
            yield_radius: self.yield_radius,
        }
    }

    pub fn benchmark(&self) -> Benchmark {
        let params = BenchmarkParams {
            shear_rate: self.shear_rate,
            traction_factor: self.traction_factor,
            rigid_rotation: self.rigid_rotation,
            rigid_translation: self.rigid_translation,
            horizon: self.horizon,
        };
        benchmark_catalog(self.benchmark, self.material(), params)
    }

    pub fn options(&self) -> EvolutionOptions {
        EvolutionOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            mode: self
                .boundary_mode
                .unwrap_or_else(|| self.benchmark().default_mode()),
        }
    }

    pub fn times(&self, default_grading: f64) -> Vec<f64> {
        graded_times(
            self.horizon,
            self.time_steps,
            self.time_grading.unwrap_or(default_grading),
        )
    }

    /// Canonical text form; `parse_config(c.serialize()) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        if let Some(c) = self.command {
            put("command", c.to_string());
        }
        put("benchmark", self.benchmark.to_string());
        put("mesh_n", self.mesh_n.to_string());
        put("time_steps", self.time_steps.to_string());
        if let Some(q) = self.time_grading {
            put("time_grading", real(q));
        }
        put("horizon", real(self.horizon));
        put("epsilon", real(self.epsilon));
        put("epsilon_list", show_list(&self.epsilon_list));
        put("shear_modulus", real(self.shear_modulus));
        put("bulk_modulus", real(self.bulk_modulus));
        put("yield_radius", real(self.yield_radius));
        if let Some(m) = self.boundary_mode {
            put("boundary_mode", m.to_string());
        }
        put("tol", real(self.tol));
        put("max_iters", self.max_iters.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        put("shear_rate", real(self.shear_rate));
        put("traction_factor", real(self.traction_factor));
        put("rigid_rotation", real(self.rigid_rotation));
        put("rigid_translation", show_list(&self.rigid_translation));
        put("ex41_c", real(self.ex41_c));
        put("ex41_f", show_step_function(&self.ex41_f));
        put("ex41_g", show_step_function(&self.ex41_g));
        put("ex41_lambdas", show_list(&self.ex41_lambdas));
        put("safeload_iters", self.safeload_iters.to_string());
        put("threads", self.threads.to_string());
        out
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected key = value, got {content:?}"),
            });
        };
        let key = key.trim();
        let Some(canonical) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key {key:?}"),
            });
        };
        if seen.contains(canonical) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key {key:?}"),
            });
        }
        seen.push(canonical);
        config
            .set(key, value)
            .map_err(|message| ConfigError::Parse {
                line,
                message: format!("{key}: {message}"),
            })?;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(
            (c.benchmark, c.mesh_n, c.time_steps),
            (BenchmarkId::Shear, 16, 32)
        );
        assert_eq!(c.epsilon_list.len(), 7);
        assert_eq!(c.options().mode, BoundaryMode::Strong);
        let c = parse_config("# only a comment\n\n   \n").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn epsilon_order() {
        assert_eq!(
            parse_config("epsilon_list = 1, 0.5").unwrap().epsilon_list,
            vec![1.0, 0.5]
        );
        let err = parse_config("epsilon_list = 0.5, 1").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Invalid {
                field: "epsilon_list",
                ..
            }
        ));
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(
            parse_config("mesh_n = 4\nbogus = 1").unwrap_err(),
            ConfigError::Parse {
                line: 2,
                message: "unknown key \"bogus\"".into()
            }
        );
        assert!(matches!(
            parse_config("\n\nmesh_n = four"),
            Err(ConfigError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_config("mesh_n 4"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("mesh_n = 4\nmesh_n = 5"),
            Err(ConfigError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("time_steps = 0"),
            Err(ConfigError::Invalid {
                field: "time_steps",
                ..
            })
        ));
        assert!(matches!(
            parse_config("yield_radius = -1"),
            Err(ConfigError::Invalid {
                field: "yield_radius",
                ..
            })
        ));
    }

    #[test]
    fn round_trip() {
        let c = parse_config("mesh_n = 16").unwrap();
        assert_eq!(parse_config(&c.serialize()).unwrap(), c);
        let text = "command = sweep\nbenchmark = traction\nboundary_mode = relaxed\ntime_grading = 2.5\n\
                    ex41_f = 0.1 | 0.5 | -0.1\nepsilon_list = 1, 0.1, 0.01\noutput_dir = results/a # trailing\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.ex41_f.breaks, vec![0.5]);
        assert_eq!(c.output_dir, PathBuf::from("results/a"));
        assert_eq!(parse_config(&c.serialize()).unwrap(), c);
    }
}
