//! Experiment configuration: a flat key=value surface shared by config
//! files, `--set` overrides, and the dedicated command-line flags, with
//! fixed precedence (flags beat `--set`, which beats the file, which beats
//! the preset defaults).

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::HarnessError;

/// Which physical system to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Damped spin-1/2 with closed-form references.
    SpinHalf,
    /// Thermally damped particle in a discretized double-well potential.
    CaldeiraLeggett,
}

/// Which time-evolution backend to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolverKind {
    /// Dense superoperator exponential.
    Exact,
    /// Fixed-step fourth-order Runge–Kutta on the master equation.
    Rk4,
    /// The unitary-dilation stepper (the circuit-faithful path).
    Modular,
}

/// Which picture carries the time dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PictureKind {
    Heisenberg,
    Schrodinger,
}

/// Which quantities to estimate per time point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantitySet {
    /// Only the correlation function C(t).
    C,
    /// Only the transition rate Ċ(t).
    Cdot,
    /// Both quantities.
    Both,
}

impl QuantitySet {
    pub fn wants_correlation(self) -> bool {
        matches!(self, QuantitySet::C | QuantitySet::Both)
    }

    pub fn wants_rate(self) -> bool {
        matches!(self, QuantitySet::Cdot | QuantitySet::Both)
    }
}

/// Complete description of one experiment run. Every field is addressable
/// through the flat key=value syntax; [`ExperimentConfig::echo`] lists the
/// keys in their canonical order.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Spin coherent-drive strength.
    pub mu: f64,
    /// Damping strength (spin dephasing rate or bath coupling).
    pub gamma: f64,
    pub hbar: f64,
    /// Particle mass (grid model only).
    pub mass: f64,
    /// Bath temperature in energy units (grid model only).
    pub k_b_t: f64,
    /// Number of position-register qubits (grid model only).
    pub grid_qubits: usize,
    /// Reactant region, inclusive bounds inside the unit interval.
    pub region_a_lo: f64,
    pub region_a_hi: f64,
    /// Product region, inclusive bounds inside the unit interval.
    pub region_b_lo: f64,
    pub region_b_hi: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub t_count: usize,
    pub evolver: EvolverKind,
    /// Step count for the modular evolver.
    pub steps: usize,
    /// Step length for the RK4 evolver.
    pub dt: f64,
    pub picture: PictureKind,
    pub quantities: QuantitySet,
    /// When set, estimates are finite-shot sampled instead of exact reads.
    pub shots: Option<u64>,
    pub seed: u64,
    /// Worker threads for the sweep over time points. Does not affect the
    /// numbers (per-point seeds are derived from the global seed), so it is
    /// excluded from the config echo.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    /// The spin-1/2 profile: exact evolution over t ∈ [0, 2].
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::SpinHalf,
            mu: 0.1,
            gamma: 1.0,
            hbar: 1.0,
            mass: 1.0,
            k_b_t: 0.0162,
            grid_qubits: 5,
            region_a_lo: 0.125,
            region_a_hi: 0.25,
            region_b_lo: 0.75,
            region_b_hi: 0.875,
            t_start: 0.0,
            t_end: 2.0,
            t_count: 11,
            evolver: EvolverKind::Exact,
            steps: 100,
            dt: 1e-3,
            picture: PictureKind::Heisenberg,
            quantities: QuantitySet::Both,
            shots: None,
            seed: 0,
            jobs: 1,
        }
    }
}

fn field_error(field: &str, message: impl fmt::Display) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| field_error(field, format!("cannot parse {value:?}: {e}")))
}

impl ExperimentConfig {
    /// Named starting points. `spin` is the default profile; `cl-desk` is
    /// the small grid-model profile suitable for interactive use and CI;
    /// `cl-full` is the production-scale grid profile (minutes of runtime).
    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        let mut config = ExperimentConfig::default();
        match name {
            "spin" => {}
            "cl-desk" => {
                config.model = ModelKind::CaldeiraLeggett;
                config.gamma = 0.1;
                config.hbar = 0.01;
                config.grid_qubits = 4;
                config.t_start = 0.5;
                config.t_end = 3.0;
                config.t_count = 6;
                config.evolver = EvolverKind::Modular;
                config.steps = 2_000;
                config.quantities = QuantitySet::Cdot;
            }
            "cl-full" => {
                config.model = ModelKind::CaldeiraLeggett;
                config.gamma = 0.1;
                config.hbar = 0.01;
                config.grid_qubits = 5;
                config.t_start = 0.5;
                config.t_end = 3.0;
                config.t_count = 6;
                config.evolver = EvolverKind::Modular;
                config.steps = 25_000;
                config.quantities = QuantitySet::Cdot;
            }
            other => {
                return Err(field_error(
                    "preset",
                    format!("unknown preset {other:?}; expected spin, cl-desk, or cl-full"),
                ))
            }
        }
        Ok(config)
    }

    /// Applies one `key=value` assignment. Unknown keys and malformed
    /// values report the offending field by name.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key {
            "model" => {
                self.model = match value {
                    "spin_half" => ModelKind::SpinHalf,
                    "caldeira_leggett" => ModelKind::CaldeiraLeggett,
                    other => {
                        return Err(field_error(
                            "model",
                            format!("unknown model {other:?}; expected spin_half or caldeira_leggett"),
                        ))
                    }
                }
            }
            "mu" => self.mu = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "hbar" => self.hbar = parse_num(key, value)?,
            "mass" => self.mass = parse_num(key, value)?,
            "k_b_t" => self.k_b_t = parse_num(key, value)?,
            "grid_qubits" => self.grid_qubits = parse_num(key, value)?,
            "region_a_lo" => self.region_a_lo = parse_num(key, value)?,
            "region_a_hi" => self.region_a_hi = parse_num(key, value)?,
            "region_b_lo" => self.region_b_lo = parse_num(key, value)?,
            "region_b_hi" => self.region_b_hi = parse_num(key, value)?,
            "t_start" => self.t_start = parse_num(key, value)?,
            "t_end" => self.t_end = parse_num(key, value)?,
            "t_count" => self.t_count = parse_num(key, value)?,
            "evolver" => {
                self.evolver = match value {
                    "exact" => EvolverKind::Exact,
                    "rk4" => EvolverKind::Rk4,
                    "modular" => EvolverKind::Modular,
                    other => {
                        return Err(field_error(
                            "evolver",
                            format!("unknown evolver {other:?}; expected exact, rk4, or modular"),
                        ))
                    }
                }
            }
            "steps" => self.steps = parse_num(key, value)?,
            "dt" => self.dt = parse_num(key, value)?,
            "picture" => {
                self.picture = match value {
                    "heisenberg" => PictureKind::Heisenberg,
                    "schrodinger" => PictureKind::Schrodinger,
                    other => {
                        return Err(field_error(
                            "picture",
                            format!("unknown picture {other:?}; expected heisenberg or schrodinger"),
                        ))
                    }
                }
            }
            "quantities" => {
                self.quantities = match value {
                    "C" | "c" => QuantitySet::C,
                    "Cdot" | "cdot" => QuantitySet::Cdot,
                    "both" => QuantitySet::Both,
                    other => {
                        return Err(field_error(
                            "quantities",
                            format!("unknown selection {other:?}; expected C, Cdot, or both"),
                        ))
                    }
                }
            }
            "shots" => {
                self.shots = match value {
                    "" | "none" => None,
                    _ => Some(parse_num(key, value)?),
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            other => {
                return Err(field_error(
                    other,
                    "unknown configuration key".to_string(),
                ))
            }
        }
        Ok(())
    }

    /// Reads a flat config file: one `key=value` per line, `#` comments and
    /// blank lines ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            field_error("config", format!("cannot read {}: {e}", path.display()))
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(field_error(
                    "config",
                    format!(
                        "{} line {}: expected key=value, got {raw:?}",
                        path.display(),
                        lineno + 1
                    ),
                ));
            };
            self.apply_kv(key.trim(), value)?;
        }
        Ok(())
    }

    /// Full semantic validation; errors report the offending field path.
    pub fn validate(&self) -> Result<(), HarnessError> {
        for (field, value) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("k_b_t", self.k_b_t),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(field_error(field, format!("must be positive, got {value}")));
            }
        }
        match self.model {
            ModelKind::SpinHalf => {
                for (field, value) in [("mu", self.mu), ("gamma", self.gamma)] {
                    if !(value > 0.0) || !value.is_finite() {
                        return Err(field_error(field, format!("must be positive, got {value}")));
                    }
                }
            }
            ModelKind::CaldeiraLeggett => {
                if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
                    return Err(field_error(
                        "gamma",
                        format!("must be non-negative, got {}", self.gamma),
                    ));
                }
                if !(2..=7).contains(&self.grid_qubits) {
                    return Err(field_error(
                        "grid_qubits",
                        format!("must lie in 2..=7, got {}", self.grid_qubits),
                    ));
                }
                for (lo_name, lo, hi_name, hi) in [
                    ("region_a_lo", self.region_a_lo, "region_a_hi", self.region_a_hi),
                    ("region_b_lo", self.region_b_lo, "region_b_hi", self.region_b_hi),
                ] {
                    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                        return Err(field_error(
                            lo_name,
                            format!("region bounds must lie in [0, 1], got [{lo}, {hi}]"),
                        ));
                    }
                    if lo > hi {
                        return Err(field_error(
                            hi_name,
                            format!("region is empty: lower bound {lo} exceeds upper bound {hi}"),
                        ));
                    }
                }
            }
        }
        if !self.t_start.is_finite() || self.t_start < 0.0 {
            return Err(field_error(
                "t_start",
                format!("must be finite and non-negative, got {}", self.t_start),
            ));
        }
        if !self.t_end.is_finite() || self.t_end < self.t_start {
            return Err(field_error(
                "t_end",
                format!("must be at least t_start={}, got {}", self.t_start, self.t_end),
            ));
        }
        if self.t_count < 1 {
            return Err(field_error("t_count", "must be at least 1"));
        }
        match self.evolver {
            EvolverKind::Modular if self.steps < 1 => {
                return Err(field_error("steps", "must be at least 1"));
            }
            EvolverKind::Rk4 if !(self.dt > 0.0) => {
                return Err(field_error(
                    "dt",
                    format!("must be positive, got {}", self.dt),
                ));
            }
            _ => {}
        }
        if let Some(shots) = self.shots {
            if shots == 0 {
                return Err(field_error("shots", "must be at least 1 when set"));
            }
        }
        if self.jobs < 1 {
            return Err(field_error("jobs", "must be at least 1"));
        }
        Ok(())
    }

    /// The time grid: `t_count` evenly spaced points from `t_start` to
    /// `t_end` (a single point collapses onto `t_start`).
    pub fn time_grid(&self) -> Vec<f64> {
        if self.t_count == 1 {
            return vec![self.t_start];
        }
        let span = self.t_end - self.t_start;
        (0..self.t_count)
            .map(|i| self.t_start + span * i as f64 / (self.t_count - 1) as f64)
            .collect()
    }

    /// Canonical `(key, value)` echo of every reproducibility-relevant
    /// field, in declaration order. This is what the CSV metadata block and
    /// the determinism guarantees are defined over.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let model = match self.model {
            ModelKind::SpinHalf => "spin_half",
            ModelKind::CaldeiraLeggett => "caldeira_leggett",
        };
        let evolver = match self.evolver {
            EvolverKind::Exact => "exact",
            EvolverKind::Rk4 => "rk4",
            EvolverKind::Modular => "modular",
        };
        let picture = match self.picture {
            PictureKind::Heisenberg => "heisenberg",
            PictureKind::Schrodinger => "schrodinger",
        };
        let quantities = match self.quantities {
            QuantitySet::C => "C",
            QuantitySet::Cdot => "Cdot",
            QuantitySet::Both => "both",
        };
        vec![
            ("model", model.to_string()),
            ("mu", self.mu.to_string()),
            ("gamma", self.gamma.to_string()),
            ("hbar", self.hbar.to_string()),
            ("mass", self.mass.to_string()),
            ("k_b_t", self.k_b_t.to_string()),
            ("grid_qubits", self.grid_qubits.to_string()),
            ("region_a_lo", self.region_a_lo.to_string()),
            ("region_a_hi", self.region_a_hi.to_string()),
            ("region_b_lo", self.region_b_lo.to_string()),
            ("region_b_hi", self.region_b_hi.to_string()),
            ("t_start", self.t_start.to_string()),
            ("t_end", self.t_end.to_string()),
            ("t_count", self.t_count.to_string()),
            ("evolver", evolver.to_string()),
            ("steps", self.steps.to_string()),
            ("dt", self.dt.to_string()),
            ("picture", picture.to_string()),
            ("quantities", quantities.to_string()),
            (
                "shots",
                self.shots.map_or_else(|| "none".to_string(), |s| s.to_string()),
            ),
            ("seed", self.seed.to_string()),
        ]
    }
}
