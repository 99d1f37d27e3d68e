//! Experiment execution: one result row per time point, an always-on exact
//! reference wherever the dimension permits it, optional finite-shot
//! sampling with derived per-point seeds, and modular-step convergence
//! studies.

use rayon::prelude::*;
use serde::Serialize;

use ratesim_core::lindblad::{propagate_exact, EXACT_PROPAGATION_DIM_CAP};
use ratesim_core::models::{
    build_grid_1d, caldeira_leggett_model, double_well_potential, gibbs_state, region_projector,
    spin_half_model, CLParams, SpinHalfParams,
};
use ratesim_core::modular::{evolve_modular, ModularConfig};
use ratesim_core::rate::{
    derive_stream_seed, heisenberg_terms_from_observable, sample_correlation,
    sample_rate_heisenberg, sample_rate_schrodinger, schrodinger_terms_from_states,
    trace_formula_expectation, CircuitParams, Evolver, TransitionSetup,
};
use ratesim_core::{CMatrix, LindbladModel, Picture};

use crate::config::{EvolverKind, ExperimentConfig, ModelKind, PictureKind};
use crate::HarnessError;

/// One time point of an experiment. Relative errors follow the convention
/// `(reference − estimate) / reference` and are absent whenever the
/// reference is unavailable or exactly zero.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub t: f64,
    pub c_estimate: Option<f64>,
    pub cdot_estimate: Option<f64>,
    pub c_oracle: Option<f64>,
    pub cdot_oracle: Option<f64>,
    pub rel_err_c: Option<f64>,
    pub rel_err_cdot: Option<f64>,
    /// Post-selection success probability of the evolution behind the
    /// estimates (1 for deterministic evolvers and the state picture).
    pub success_probability: f64,
    /// Standard error of the sampled estimate; absent without `shots`. When
    /// both quantities are sampled this reports the rate's error.
    pub standard_error: Option<f64>,
}

/// A full experiment: the echoed configuration plus one row per time point.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
}

/// The physical system behind a configuration.
pub struct System {
    pub model: LindbladModel,
    pub setup: TransitionSetup,
}

/// Instantiates the configured model and transition setup.
pub fn build_system(config: &ExperimentConfig) -> Result<System, HarnessError> {
    match config.model {
        ModelKind::SpinHalf => {
            let params = SpinHalfParams {
                mu: config.mu,
                gamma: config.gamma,
                hbar: config.hbar,
            };
            let (model, setup) = spin_half_model(&params)?;
            Ok(System { model, setup })
        }
        ModelKind::CaldeiraLeggett => {
            let grid = build_grid_1d(config.grid_qubits, config.hbar)?;
            let params = CLParams {
                mass: config.mass,
                k_b_t: config.k_b_t,
                gamma: config.gamma,
                hbar: config.hbar,
            };
            let potential = double_well_potential(&grid);
            let model = caldeira_leggett_model(&grid, &params, &potential)?;
            let rho = gibbs_state(&grid, &potential, &params)?;
            let theta_a = region_projector(&grid, config.region_a_lo, config.region_a_hi)?;
            let theta_b = region_projector(&grid, config.region_b_lo, config.region_b_hi)?;
            let setup = TransitionSetup::new(theta_a, theta_b, rho)?;
            Ok(System { model, setup })
        }
    }
}

fn evolver_of(config: &ExperimentConfig) -> Evolver {
    match config.evolver {
        EvolverKind::Exact => Evolver::Exact,
        EvolverKind::Rk4 => Evolver::Rk4 { dt: config.dt },
        EvolverKind::Modular => Evolver::Modular,
    }
}

fn modular_config(config: &ExperimentConfig, t: f64, picture: Picture) -> ModularConfig {
    ModularConfig {
        steps: config.steps,
        total_time: t,
        picture,
    }
}

fn checked_denominator(setup: &TransitionSetup) -> Result<f64, HarnessError> {
    let den = setup.denominator();
    if !den.is_finite() || den.abs() < 1e-14 {
        return Err(HarnessError::Config {
            field: "region_a_lo".to_string(),
            message: format!("equilibrium weight of the initial region is degenerate ({den})"),
        });
    }
    Ok(den)
}

/// Evolves the target observable to time `t` under the configured evolver,
/// returning the evolved operator and the accumulated log success
/// probability (zero for deterministic evolvers).
fn evolve_observable(
    system: &System,
    config: &ExperimentConfig,
    t: f64,
) -> Result<(CMatrix, f64), HarnessError> {
    let theta_b = system.setup.theta_b();
    match config.evolver {
        EvolverKind::Exact => Ok((
            propagate_exact(&system.model, theta_b, t, Picture::Heisenberg)?,
            0.0,
        )),
        EvolverKind::Rk4 => Ok((
            ratesim_core::lindblad::propagate_rk4(
                &system.model,
                theta_b,
                t,
                config.dt,
                Picture::Heisenberg,
            )?,
            0.0,
        )),
        EvolverKind::Modular => {
            let result = evolve_modular(
                &system.model,
                theta_b,
                &modular_config(config, t, Picture::Heisenberg),
            )?;
            Ok((result.operator, result.log_success_probability))
        }
    }
}

/// Evolves one state-picture operand to time `t` under the configured
/// evolver.
fn evolve_state(
    system: &System,
    config: &ExperimentConfig,
    op: &CMatrix,
    t: f64,
) -> Result<CMatrix, HarnessError> {
    match config.evolver {
        EvolverKind::Exact => Ok(propagate_exact(&system.model, op, t, Picture::Schrodinger)?),
        EvolverKind::Rk4 => Ok(ratesim_core::lindblad::propagate_rk4(
            &system.model,
            op,
            t,
            config.dt,
            Picture::Schrodinger,
        )?),
        EvolverKind::Modular => Ok(evolve_modular(
            &system.model,
            op,
            &modular_config(config, t, Picture::Schrodinger),
        )?
        .operator),
    }
}

/// Correlation and rate from an already-evolved observable.
fn quantities_from_observable(
    system: &System,
    theta_b_t: &CMatrix,
) -> Result<(f64, f64), HarnessError> {
    let den = checked_denominator(&system.setup)?;
    let raw = trace_formula_expectation(
        &system.setup,
        theta_b_t,
        &CircuitParams::plain(system.setup.dim()),
    )?;
    let terms = heisenberg_terms_from_observable(&system.model, &system.setup, theta_b_t)?;
    Ok((raw / (2.0 * den), terms.rate()))
}

/// Exact-propagation reference values at time `t`, when the dimension
/// permits building the dense superoperator.
fn oracle_values(system: &System, t: f64) -> Result<Option<(f64, f64)>, HarnessError> {
    if system.model.dim() > EXACT_PROPAGATION_DIM_CAP {
        return Ok(None);
    }
    let evolved = propagate_exact(&system.model, system.setup.theta_b(), t, Picture::Heisenberg)?;
    Ok(Some(quantities_from_observable(system, &evolved)?))
}

fn relative_error(reference: Option<f64>, estimate: Option<f64>) -> Option<f64> {
    match (reference, estimate) {
        (Some(r), Some(e)) if r != 0.0 => Some((r - e) / r),
        _ => None,
    }
}

/// Deterministic per-row seed: stream `index` of the experiment seed.
fn row_seed(config: &ExperimentConfig, index: usize) -> u64 {
    derive_stream_seed(config.seed, index as u64)
}

/// Computes the estimates (and, where available, references) for one time
/// point.
fn compute_row(
    system: &System,
    config: &ExperimentConfig,
    index: usize,
    t: f64,
) -> Result<ResultRow, HarnessError> {
    let wants_c = config.quantities.wants_correlation();
    let wants_rate = config.quantities.wants_rate();
    let mut c_estimate = None;
    let mut cdot_estimate = None;
    let mut standard_error = None;
    let mut log_p = 0.0f64;

    if let Some(shots) = config.shots {
        let seed = row_seed(config, index);
        let evolver = evolver_of(config);
        let mc = modular_config(config, t, Picture::Heisenberg);
        if wants_c {
            let sampled = sample_correlation(
                &system.model,
                &system.setup,
                t,
                &mc,
                evolver,
                shots,
                derive_stream_seed(seed, 0),
            )?;
            c_estimate = Some(sampled.value);
            standard_error = Some(sampled.standard_error);
            log_p = sampled.log_success_probability;
        }
        if wants_rate {
            let sampled = match config.picture {
                PictureKind::Heisenberg => sample_rate_heisenberg(
                    &system.model,
                    &system.setup,
                    t,
                    &mc,
                    evolver,
                    shots,
                    derive_stream_seed(seed, 1),
                )?,
                PictureKind::Schrodinger => sample_rate_schrodinger(
                    &system.model,
                    &system.setup,
                    t,
                    &mc,
                    evolver,
                    shots,
                    derive_stream_seed(seed, 1),
                )?,
            };
            cdot_estimate = Some(sampled.value);
            standard_error = Some(sampled.standard_error);
            if config.picture == PictureKind::Heisenberg {
                log_p = sampled.log_success_probability;
            }
        }
    } else {
        match config.picture {
            PictureKind::Heisenberg => {
                let (theta_b_t, lp) = evolve_observable(system, config, t)?;
                log_p = lp;
                let (c, rate) = quantities_from_observable(system, &theta_b_t)?;
                if wants_c {
                    c_estimate = Some(c);
                }
                if wants_rate {
                    cdot_estimate = Some(rate);
                }
            }
            PictureKind::Schrodinger => {
                let den = checked_denominator(&system.setup)?;
                let rho_theta = system.setup.rho_eq() * system.setup.theta_a();
                let theta_rho = system.setup.theta_a() * system.setup.rho_eq();
                let a = evolve_state(system, config, &rho_theta, t)?;
                let b = evolve_state(system, config, &theta_rho, t)?;
                if wants_c {
                    let overlap = (system.setup.theta_b() * (&a + &b)).trace().re;
                    c_estimate = Some(overlap / (2.0 * den));
                }
                if wants_rate {
                    let terms =
                        schrodinger_terms_from_states(&system.model, &system.setup, &a, &b)?;
                    cdot_estimate = Some(terms.rate());
                }
            }
        }
    }

    for value in [c_estimate, cdot_estimate].into_iter().flatten() {
        if !value.is_finite() {
            return Err(HarnessError::Divergence(format!(
                "estimate at t={t} is not finite ({value})"
            )));
        }
    }

    let oracle = oracle_values(system, t)?;
    let (c_oracle, cdot_oracle) = match oracle {
        Some((c, rate)) => (Some(c), Some(rate)),
        None => (None, None),
    };
    Ok(ResultRow {
        t,
        c_estimate,
        cdot_estimate,
        c_oracle,
        cdot_oracle,
        rel_err_c: relative_error(c_oracle, c_estimate),
        rel_err_cdot: relative_error(cdot_oracle, cdot_estimate),
        success_probability: log_p.exp(),
        standard_error,
    })
}

/// Runs the configured sweep: one row per time point, in ascending time
/// order, computed in parallel when `jobs > 1`. Identical configurations
/// (including the seed) produce identical outputs regardless of `jobs`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let system = build_system(config)?;
    let grid = config.time_grid();
    let indexed: Vec<(usize, f64)> = grid.iter().cloned().enumerate().collect();
    let rows: Result<Vec<ResultRow>, HarnessError> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| HarnessError::Config {
                field: "jobs".to_string(),
                message: e.to_string(),
            })?;
        pool.install(|| {
            indexed
                .par_iter()
                .map(|&(i, t)| compute_row(&system, config, i, t))
                .collect()
        })
    } else {
        indexed
            .iter()
            .map(|&(i, t)| compute_row(&system, config, i, t))
            .collect()
    };
    Ok(ExperimentOutput {
        config: config.clone(),
        rows: rows?,
    })
}

/// One step-count entry of a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub rel_err_c: Option<f64>,
    pub rel_err_cdot: Option<f64>,
}

/// Modular-evolver convergence against the exact reference at a fixed time,
/// with fitted log–log error slopes (absent unless at least two usable
/// points exist).
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub t: f64,
    pub rows: Vec<ConvergenceRow>,
    pub slope_c: Option<f64>,
    pub slope_cdot: Option<f64>,
}

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let cov: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (var > 0.0).then(|| cov / var)
}

/// Runs the configured model at `t` for every step count in `step_counts`
/// (strictly ascending) with the modular evolver and reports relative
/// errors against exact propagation.
pub fn convergence_study(
    config: &ExperimentConfig,
    step_counts: &[usize],
    t: f64,
) -> Result<ConvergenceStudy, HarnessError> {
    config.validate()?;
    if step_counts.is_empty() {
        return Err(HarnessError::Config {
            field: "n_list".to_string(),
            message: "needs at least one step count".to_string(),
        });
    }
    if step_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config {
            field: "n_list".to_string(),
            message: format!("step counts must be strictly ascending, got {step_counts:?}"),
        });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(HarnessError::Config {
            field: "t_fixed".to_string(),
            message: format!("must be finite and non-negative, got {t}"),
        });
    }
    let system = build_system(config)?;
    let Some((c_reference, cdot_reference)) = oracle_values(&system, t)? else {
        return Err(HarnessError::Config {
            field: "grid_qubits".to_string(),
            message: format!(
                "dimension {} exceeds the exact-propagation cap {EXACT_PROPAGATION_DIM_CAP}; \
                 no reference available for a convergence study",
                system.model.dim()
            ),
        });
    };

    let mut rows = Vec::with_capacity(step_counts.len());
    for &steps in step_counts {
        let mut per_n = config.clone();
        per_n.evolver = EvolverKind::Modular;
        per_n.steps = steps;
        per_n.shots = None;
        let (c_estimate, cdot_estimate) = match config.picture {
            PictureKind::Heisenberg => {
                let (theta_b_t, _) = evolve_observable(&system, &per_n, t)?;
                quantities_from_observable(&system, &theta_b_t)?
            }
            PictureKind::Schrodinger => {
                let den = checked_denominator(&system.setup)?;
                let rho_theta = system.setup.rho_eq() * system.setup.theta_a();
                let theta_rho = system.setup.theta_a() * system.setup.rho_eq();
                let a = evolve_state(&system, &per_n, &rho_theta, t)?;
                let b = evolve_state(&system, &per_n, &theta_rho, t)?;
                let overlap = (system.setup.theta_b() * (&a + &b)).trace().re;
                let terms = schrodinger_terms_from_states(&system.model, &system.setup, &a, &b)?;
                (overlap / (2.0 * den), terms.rate())
            }
        };
        rows.push(ConvergenceRow {
            steps,
            rel_err_c: relative_error(Some(c_reference), Some(c_estimate)),
            rel_err_cdot: relative_error(Some(cdot_reference), Some(cdot_estimate)),
        });
    }

    let slope_points = |selector: fn(&ConvergenceRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter_map(|row| {
                selector(row).and_then(|err| {
                    let err = err.abs();
                    (err.is_finite() && err > 0.0)
                        .then(|| ((row.steps as f64).ln(), err.ln()))
                })
            })
            .collect()
    };
    let slope_c = fit_slope(&slope_points(|r| r.rel_err_c));
    let slope_cdot = fit_slope(&slope_points(|r| r.rel_err_cdot));
    Ok(ConvergenceStudy {
        t,
        rows,
        slope_c,
        slope_cdot,
    })
}
