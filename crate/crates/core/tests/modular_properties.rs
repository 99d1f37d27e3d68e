//! Behavior of the unitary-dilation time stepper under composition: first
//! order convergence of assembled estimates in both pictures, exact
//! preservation of the density-operator structure along state-picture
//! trajectories, and agreement between the cached propagator and the
//! one-shot step functions.

use ratesim_core::lindblad::Picture;
use ratesim_core::models::{spin_half_analytic, spin_half_model, SpinHalfParams};
use ratesim_core::modular::{
    evolve_modular, heisenberg_step, schrodinger_step, ModularConfig, ModularPropagator,
};
use ratesim_core::operators::{basis_matrix, max_abs_diff, validate_density};
use ratesim_core::rate::{estimate_rate_heisenberg, estimate_rate_schrodinger, Evolver};

const STEP_COUNTS: [usize; 5] = [10, 20, 40, 80, 160];

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// Halving the step size halves the rate error, in either picture.
#[test]
fn rate_error_decays_at_first_order_in_both_pictures() {
    let params = SpinHalfParams {
        mu: 0.1,
        gamma: 1.0,
        hbar: 1.0,
    };
    let (model, setup) = spin_half_model(&params).unwrap();
    let t = 1.0;
    let reference = spin_half_analytic(&params, t).rate;
    for picture in [Picture::Heisenberg, Picture::Schrodinger] {
        let mut errors = Vec::new();
        for &steps in &STEP_COUNTS {
            let config = ModularConfig {
                steps,
                total_time: t,
                picture,
            };
            let estimate = match picture {
                Picture::Heisenberg => {
                    estimate_rate_heisenberg(&model, &setup, t, &config, Evolver::Modular).unwrap()
                }
                Picture::Schrodinger => {
                    estimate_rate_schrodinger(&model, &setup, t, &config, Evolver::Modular).unwrap()
                }
            };
            errors.push(((estimate - reference) / reference).abs());
        }
        for pair in errors.windows(2) {
            assert!(
                pair[1] < pair[0],
                "{picture:?}: error not monotone: {errors:?}"
            );
        }
        let counts: Vec<f64> = STEP_COUNTS.iter().map(|&n| n as f64).collect();
        let slope = log_log_slope(&counts, &errors);
        assert!(
            (slope + 1.0).abs() <= 0.3,
            "{picture:?}: slope {slope} not first order; errors {errors:?}"
        );
    }
}

/// Each state-picture step is a physical channel: iterates of a density
/// operator stay unit-trace, Hermitian, and positive to tight tolerance.
#[test]
fn state_picture_iterates_stay_physical() {
    let params = SpinHalfParams {
        mu: 0.1,
        gamma: 1.0,
        hbar: 1.0,
    };
    let (model, _) = spin_half_model(&params).unwrap();
    let mut rho = basis_matrix(2, 0, 0);
    let delta = 0.05;
    for step in 0..40 {
        rho = schrodinger_step(&model, &rho, delta).unwrap();
        validate_density(&rho, 1e-10)
            .unwrap_or_else(|e| panic!("iterate {step} left the density set: {e}"));
    }
}

/// Reusing one cached propagator for many steps gives bit-identical results
/// to constructing a fresh one per step, and the accumulated success
/// probability matches the per-step product.
#[test]
fn cached_propagator_matches_single_step_functions() {
    let params = SpinHalfParams {
        mu: 0.3,
        gamma: 0.8,
        hbar: 1.0,
    };
    let (model, setup) = spin_half_model(&params).unwrap();
    let delta = 0.02;
    let steps = 10;
    let propagator = ModularPropagator::new(&model, delta).unwrap();

    let mut rho_cached = setup.rho_eq().clone();
    let mut rho_fresh = setup.rho_eq().clone();
    for _ in 0..steps {
        rho_cached = propagator.schrodinger_step(&rho_cached);
        rho_fresh = schrodinger_step(&model, &rho_fresh, delta).unwrap();
    }
    assert_eq!(max_abs_diff(&rho_cached, &rho_fresh), 0.0);

    let mut theta_cached = setup.theta_b().clone();
    let mut theta_fresh = setup.theta_b().clone();
    let mut log_p_manual = 0.0f64;
    for _ in 0..steps {
        let (next, p) = propagator.heisenberg_step(&theta_cached);
        theta_cached = next;
        log_p_manual += p.ln();
        let (next_fresh, p_fresh) = heisenberg_step(&model, &theta_fresh, delta).unwrap();
        assert_eq!(p, p_fresh);
        theta_fresh = next_fresh;
    }
    assert_eq!(max_abs_diff(&theta_cached, &theta_fresh), 0.0);

    let result = evolve_modular(
        &model,
        setup.theta_b(),
        &ModularConfig {
            steps,
            total_time: delta * steps as f64,
            picture: Picture::Heisenberg,
        },
    )
    .unwrap();
    assert_eq!(max_abs_diff(&result.operator, &theta_cached), 0.0);
    assert_eq!(result.log_success_probability, log_p_manual);
}
