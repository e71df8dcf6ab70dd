//! Run configuration: a single JSON document describing the system, the
//! parameter value or range, truncations, schedule overrides, oracle
//! settings and output file names.

use std::fmt;
use std::path::Path;

use qpresp::averaging::AveragingOptions;
use qpresp::demo;
use qpresp::kam::ledger::LedgerConstants;
use qpresp::kam::pipeline::SolveOptions;
use qpresp::kam::{EngineConfig, Schedule};
use qpresp::reductions::{degenerate_scale, second_order_reduce, DegenerateRecord, DegenerateSpec, SecondOrderRecord, SecondOrderSpec};
use qpresp::system::{SystemRecord, SystemSpec};
use qpresp::torus::Truncation;
use qpresp::verify::{IntegrationOptions, MIN_GRID};
use serde::{Deserialize, Serialize};

/// Malformed or inconsistent configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    /// One of the built-in systems: `elliptic`, `nonlinear`, `hyperbolic`.
    Demo(String),
    FirstOrder(SystemRecord),
    SecondOrder(SecondOrderRecord),
    Degenerate(DegenerateRecord),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSetting {
    Value(f64),
    Range { lo: f64, hi: f64, cells: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub k_trunc: u32,
    pub deg_max: u32,
    /// Cutoff of the finite Diophantine check on `w`.
    pub k_check: u32,
    pub mode_budget: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { k_trunc: 30, deg_max: 4, k_check: 30, mode_budget: 200_000 }
    }
}

/// Overrides of the iteration schedule; unset fields come from the system.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub rho0: Option<f64>,
    pub c0: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub m_max: Option<usize>,
    pub p_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSettings {
    pub neumann_terms: usize,
    pub divisor_floor: f64,
    pub margin_fraction: f64,
    pub ledger: bool,
    pub strict_ledger: bool,
    pub ledger_constants: LedgerConstants,
    pub conjugacy_samples: usize,
    pub divergence_window: usize,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            neumann_terms: 8,
            divisor_floor: 1e-13,
            margin_fraction: 0.8,
            ledger: true,
            strict_ledger: false,
            ledger_constants: LedgerConstants::default(),
            conjugacy_samples: 16,
            divergence_window: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Residual grid points per angle.
    pub grid: usize,
    pub residual_bound: f64,
    /// Direct integration from `x0` with shadowing against the response.
    pub integrate: Option<IntegrationOptions>,
    pub x0: Option<Vec<f64>>,
    pub shadowing_bound: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { grid: 16, residual_bound: 1e-8, integrate: None, x0: None, shadowing_bound: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Largest step index checked per cell.
    pub m_cap: usize,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { m_cap: 12, a1: 0.5, a2: 0.5, a3: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub average: String,
    pub normal_form: String,
    pub report: String,
    pub iterations: String,
    pub sweep: String,
    pub sweep_csv: String,
    pub verify: String,
    pub reduce: String,
    pub bounds: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            average: "average.json".into(),
            normal_form: "normal_form.json".into(),
            report: "report.json".into(),
            iterations: "iterations.csv".into(),
            sweep: "sweep.json".into(),
            sweep_csv: "sweep.csv".into(),
            verify: "verify.json".into(),
            reduce: "reduce.json".into(),
            bounds: "bounds.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSource,
    #[serde(default)]
    pub epsilon: Option<EpsilonSetting>,
    #[serde(default)]
    pub x_init: Option<Vec<f64>>,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub engine: EngineSettings,
    #[serde(default)]
    pub oracles: OracleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Response file checked by `verify`.
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// Parses a config document, reporting the field path and position of the
/// first error.
pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        config_err(format!("at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// First-order system the engine works on, with the map from the
/// configured parameter to the engine's parameter.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: SystemSpec,
    pub kind: &'static str,
    /// Engine parameter is `eps^eps_power`.
    pub eps_power: f64,
    pub x_init: Vec<f64>,
}

impl Problem {
    pub fn engine_eps(&self, eps: f64) -> f64 {
        eps.powf(self.eps_power)
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        let t = &self.truncation;
        if t.k_trunc == 0 || t.k_check == 0 {
            return Err(config_err("truncation.k_trunc and truncation.k_check must be positive"));
        }
        if self.oracles.grid < MIN_GRID {
            return Err(config_err(format!("oracles.grid must be at least {MIN_GRID}, got {}", self.oracles.grid)));
        }
        if !(self.oracles.residual_bound > 0.0) {
            return Err(config_err("oracles.residual_bound must be positive"));
        }
        let e = &self.engine;
        if !(e.margin_fraction > 0.0 && e.margin_fraction <= 1.0) {
            return Err(config_err(format!("engine.margin_fraction must lie in (0, 1], got {}", e.margin_fraction)));
        }
        if e.neumann_terms == 0 || e.divergence_window == 0 {
            return Err(config_err("engine.neumann_terms and engine.divergence_window must be positive"));
        }
        match &self.epsilon {
            Some(EpsilonSetting::Value(v)) if !(*v > 0.0 && v.is_finite()) => return Err(config_err(format!("epsilon must be positive, got {v}"))),
            Some(EpsilonSetting::Range { lo, hi, cells }) if !(*lo >= 0.0 && hi > lo && *cells > 0) => {
                return Err(config_err(format!("epsilon range needs 0 <= lo < hi and cells > 0, got lo = {lo}, hi = {hi}, cells = {cells}")))
            }
            _ => {}
        }
        let s = &self.sweep;
        if !(s.a2 > 0.0 && s.a3 > 0.0) {
            return Err(config_err("sweep.a2 and sweep.a3 must be positive"));
        }
        Ok(())
    }

    pub fn epsilon_value(&self) -> anyhow::Result<f64> {
        match &self.epsilon {
            Some(EpsilonSetting::Value(v)) => Ok(*v),
            Some(EpsilonSetting::Range { .. }) => Err(config_err("this command needs a single `epsilon` value, not a range")),
            None => Err(config_err("missing field `epsilon`")),
        }
    }

    pub fn epsilon_range(&self) -> anyhow::Result<(f64, f64, usize)> {
        match &self.epsilon {
            Some(EpsilonSetting::Range { lo, hi, cells }) => Ok((*lo, *hi, *cells)),
            Some(EpsilonSetting::Value(_)) => Err(config_err("`sweep` needs an `epsilon` range {lo, hi, cells}")),
            None => Err(config_err("missing field `epsilon`")),
        }
    }

    /// Builds the first-order problem, reducing second-order and degenerate
    /// systems first.
    pub fn problem(&self) -> anyhow::Result<Problem> {
        let wrap = |e: qpresp::Error| config_err(format!("system: {e}"));
        let (spec, kind, eps_power) = match &self.system {
            SystemSource::Demo(name) => {
                let rec = demo::by_name(name).ok_or_else(|| config_err(format!("system.demo: unknown demo `{name}` (expected elliptic, nonlinear or hyperbolic)")))?;
                (SystemSpec::from_record(&rec).map_err(wrap)?, "first_order", 1.0)
            }
            SystemSource::FirstOrder(rec) => (SystemSpec::from_record(rec).map_err(wrap)?, "first_order", 1.0),
            SystemSource::SecondOrder(rec) => {
                let so = SecondOrderSpec::from_record(rec).map_err(wrap)?;
                let x = self.x_init.clone().unwrap_or_else(|| so.center.clone());
                let red = second_order_reduce(&so, &x).map_err(wrap)?;
                (red.first_order, "second_order", 1.0)
            }
            SystemSource::Degenerate(rec) => {
                let ds = DegenerateSpec::from_record(rec).map_err(wrap)?;
                let sys = degenerate_scale(&ds, self.seed).map_err(wrap)?;
                (sys.spec, "degenerate", 1.0 / sys.l as f64)
            }
        };
        let check = spec.validate(self.truncation.k_check).map_err(wrap)?;
        if !check.passed {
            return Err(config_err(format!("system: frequency fails the Diophantine check up to |k| = {}: {:?}", self.truncation.k_check, check.worst)));
        }
        let x_init = match (&self.system, &self.x_init) {
            (SystemSource::SecondOrder(_), Some(x)) => x.iter().cloned().chain(std::iter::repeat(0.0).take(x.len())).collect(),
            (_, Some(x)) => x.clone(),
            (_, None) => spec.center.clone(),
        };
        if x_init.len() != spec.n {
            return Err(config_err(format!("x_init has length {}, expected {}", x_init.len(), spec.n)));
        }
        Ok(Problem { spec, kind, eps_power, x_init })
    }

    pub fn schedule(&self, spec: &SystemSpec) -> anyhow::Result<Schedule> {
        let o = &self.schedule;
        let s = Schedule {
            rho0: o.rho0.unwrap_or(spec.rho),
            c0: o.c0.unwrap_or(0.2),
            kappa: o.kappa.unwrap_or(1.5),
            tau: o.tau.unwrap_or(spec.freq.tau),
            gamma: o.gamma.unwrap_or(spec.freq.gamma),
            m_max: o.m_max.unwrap_or(12),
            p_tol: o.p_tol.unwrap_or(1e-14),
            k_trunc: self.truncation.k_trunc,
            deg_max: self.truncation.deg_max,
        };
        s.validate().map_err(|e| config_err(format!("schedule: {e}")))?;
        Ok(s)
    }

    /// Solver options; `strict` and `seed` come from the command line when given.
    pub fn solve_options(&self, spec: &SystemSpec, strict: bool, seed: Option<u64>) -> anyhow::Result<SolveOptions> {
        let e = &self.engine;
        let trunc = Truncation { k_max: self.truncation.k_trunc, deg_max: self.truncation.deg_max, mode_budget: self.truncation.mode_budget };
        let mut engine = EngineConfig::new(self.schedule(spec)?);
        engine.neumann_terms = e.neumann_terms;
        engine.ledger = e.ledger || strict;
        engine.strict_ledger = e.strict_ledger || strict;
        engine.ledger_constants = e.ledger_constants.clone();
        engine.conjugacy_samples = e.conjugacy_samples;
        engine.divergence_window = e.divergence_window;
        engine.mode_budget = self.truncation.mode_budget;
        engine.seed = seed.unwrap_or(self.seed);
        Ok(SolveOptions {
            averaging: AveragingOptions { trunc, neumann_terms: e.neumann_terms, divisor_floor: e.divisor_floor },
            margin_fraction: e.margin_fraction,
            engine,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_demo_config_parses() {
        let cfg = parse(r#"{"system": {"demo": "elliptic"}, "epsilon": 0.001}"#).unwrap();
        assert_eq!(cfg.epsilon_value().unwrap(), 0.001);
        assert_eq!(cfg.problem().unwrap().spec.n, 2);
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse("{\"system\": {\"demo\": \"elliptic\"},\n \"truncation\": {\"k_trunk\": 3}}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncation") && msg.contains("line 2"), "{msg}");
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn range_and_value_are_distinguished() {
        let cfg = parse(r#"{"system": {"demo": "elliptic"}, "epsilon": {"lo": 0.0, "hi": 0.1, "cells": 8}}"#).unwrap();
        assert_eq!(cfg.epsilon_range().unwrap(), (0.0, 0.1, 8));
        assert!(cfg.epsilon_value().is_err());
    }
}
