//! Concrete physical systems and the classical kinetic fit.
//!
//! Three layers live here:
//!
//! - the damped spin-1/2 benchmark, whose correlation function and rate have
//!   closed forms used as the primary validation oracle;
//! - a 1D position-grid model of barrier crossing: quantized position and
//!   momentum operators, a quartic double-well potential, a
//!   Caldeira-Leggett-type damped Hamiltonian with its single non-Hermitian
//!   coupling operator, a Gibbs state of the bare Hamiltonian, and
//!   position-region projectors;
//! - a two-state kinetic fit extracting a rate constant from simulated
//!   `C(t)` / `Ċ(t)` series.

use crate::error::{CoreError, Result};
use crate::lindblad::LindbladModel;
use crate::operators::{basis_matrix, hermitian_eigen, identity, zeros};
use crate::rate::TransitionSetup;
use crate::{C64, CMatrix};
use nalgebra::DVector;
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Damped spin-1/2 benchmark
// ---------------------------------------------------------------------------

/// Parameters of the damped spin-1/2 benchmark: transverse field `μ`,
/// dephasing coupling `γ` (both in energy units), and `ħ`.
#[derive(Debug, Clone, Copy)]
pub struct SpinHalfParams {
    /// Transverse field strength (energy units).
    pub mu: f64,
    /// Dephasing coupling strength (energy units).
    pub gamma: f64,
    /// Reduced Planck constant.
    pub hbar: f64,
}

impl SpinHalfParams {
    /// Checks that all three parameters are finite and positive.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("mu", self.mu), ("gamma", self.gamma), ("hbar", self.hbar)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(CoreError::InvalidParameter {
                    name,
                    message: format!("must be finite and positive, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// True in the overdamped (metastable) regime `γ > 2μ`, where the decay
    /// frequency `ω = √(γ² − 4μ²)/ħ` is real and the correlation function
    /// grows monotonically.
    pub fn is_metastable(&self) -> bool {
        self.gamma > 2.0 * self.mu
    }
}

/// Closed-form values of the spin-1/2 benchmark at one time.
#[derive(Debug, Clone, Copy)]
pub struct SpinHalfAnalytic {
    /// The correlation function `C(t)`.
    pub correlation: f64,
    /// Its time derivative `Ċ(t)`.
    pub rate: f64,
    /// Coefficient of `σ_x` in the evolved destination observable.
    pub c_x: f64,
    /// Coefficient of `σ_z` in the evolved destination observable (the
    /// identity coefficient stays `½` and the `σ_y` coefficient stays `0`).
    pub c_z: f64,
}

fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    )
}

fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ],
    )
}

/// Builds the spin-1/2 benchmark: Hamiltonian `μσ_y`, single jump operator
/// `√γ σ_z`, source projector `|0⟩⟨0|`, destination projector `|1⟩⟨1|`, and
/// the maximally mixed stationary state.
pub fn spin_half_model(params: &SpinHalfParams) -> Result<(LindbladModel, TransitionSetup)> {
    params.validate()?;
    let model = LindbladModel::new(
        params.hbar,
        pauli_y() * C64::new(params.mu, 0.0),
        vec![pauli_z() * C64::new(params.gamma.sqrt(), 0.0)],
    )
    .expect("spin-1/2 operators are exactly Hermitian");
    let setup = TransitionSetup::new(
        basis_matrix(2, 0, 0),
        basis_matrix(2, 1, 1),
        identity(2) * C64::new(0.5, 0.0),
    )
    .expect("spin-1/2 setup operators are exact projectors and a valid density");
    Ok((model, setup))
}

/// Closed-form `C(t)`, `Ċ(t)` and observable coefficients for the spin-1/2
/// benchmark.
///
/// In the overdamped regime `γ > 2μ` the decay frequency
/// `ω = √(γ² − 4μ²)/ħ` is real and the hyperbolic forms apply; for
/// `γ < 2μ` the same expressions continue analytically with
/// `cosh → cos`, `sinh(ωt)/ω → sin(|ω|t)/|ω|`; at `γ = 2μ` the limits
/// `cosh → 1`, `sinh(ωt)/ω → t` are used directly.
pub fn spin_half_analytic(params: &SpinHalfParams, t: f64) -> SpinHalfAnalytic {
    let SpinHalfParams { mu, gamma, hbar } = *params;
    let omega_sq = (gamma * gamma - 4.0 * mu * mu) / (hbar * hbar);
    // The decayed factors e^{−γt/ħ}·cosh(ωt) and e^{−γt/ħ}·sinh(ωt)/ω in all
    // three regimes. In the overdamped branch the decay is kept inside the
    // exponentials (γ/ħ > ω there, so both exponents are negative); the naive
    // product would overflow for large ωt.
    let (decayed_cosh, decayed_sinc) = if omega_sq > 0.0 {
        let omega = omega_sq.sqrt();
        let slow = ((omega - gamma / hbar) * t).exp();
        let fast = (-(omega + gamma / hbar) * t).exp();
        (0.5 * (slow + fast), 0.5 * (slow - fast) / omega)
    } else if omega_sq < 0.0 {
        let omega = (-omega_sq).sqrt();
        let decay = (-gamma * t / hbar).exp();
        (decay * (omega * t).cos(), decay * (omega * t).sin() / omega)
    } else {
        let decay = (-gamma * t / hbar).exp();
        (decay, decay * t)
    };
    let decayed_envelope = decayed_cosh + gamma / hbar * decayed_sinc;
    SpinHalfAnalytic {
        correlation: 0.5 * (1.0 - decayed_envelope),
        rate: 2.0 * mu * mu / (hbar * hbar) * decayed_sinc,
        c_x: mu / hbar * decayed_sinc,
        c_z: -0.5 * decayed_envelope,
    }
}

// ---------------------------------------------------------------------------
// 1D grid, double well, damped barrier-crossing model
// ---------------------------------------------------------------------------

/// Smallest supported grid-qubit count.
pub const GRID_QUBITS_MIN: usize = 2;
/// Largest supported grid-qubit count (dense matrices up to 128×128).
pub const GRID_QUBITS_MAX: usize = 7;

/// A uniform position grid on `[0, 1 − 2^{−n}]` with `2^n` points and the
/// matching discrete momentum operator.
///
/// Positions are `x_k = k·2^{−n}`; momentum eigenvalues are
/// `p_j = (−2^{n−1} + j)·δp` with `δp = 2πħ`, so that `δx·δp = 2πħ/2^n`
/// exactly. The momentum operator is built from the Fourier-like unitary
/// `Ũ_jk = 2^{−n/2}·exp(i x_j p_k / ħ)`.
#[derive(Debug, Clone)]
pub struct Grid1D {
    n: usize,
    hbar: f64,
    positions: Vec<f64>,
    momenta: Vec<f64>,
    delta_x: f64,
    delta_p: f64,
    fourier: CMatrix,
    position_op: CMatrix,
    momentum_op: CMatrix,
}

impl Grid1D {
    /// Number of grid qubits.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points, `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Reduced Planck constant the grid was built with.
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Grid coordinates `x_k`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Momentum eigenvalues `p_j`.
    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    /// Grid spacing `2^{−n}`.
    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    /// Momentum spacing `2πħ`.
    pub fn delta_p(&self) -> f64 {
        self.delta_p
    }

    /// The position-to-momentum basis unitary.
    pub fn fourier(&self) -> &CMatrix {
        &self.fourier
    }

    /// Diagonal position operator.
    pub fn position_op(&self) -> &CMatrix {
        &self.position_op
    }

    /// Momentum operator (dense Hermitian).
    pub fn momentum_op(&self) -> &CMatrix {
        &self.momentum_op
    }
}

/// Builds the position grid and both quadrature operators for `n` qubits,
/// `2 ≤ n ≤ 7`.
pub fn build_grid_1d(n: usize, hbar: f64) -> Result<Grid1D> {
    if !(GRID_QUBITS_MIN..=GRID_QUBITS_MAX).contains(&n) {
        return Err(CoreError::InvalidParameter {
            name: "n",
            message: format!("grid qubit count must lie in [{GRID_QUBITS_MIN}, {GRID_QUBITS_MAX}], got {n}"),
        });
    }
    if !hbar.is_finite() || hbar <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "hbar",
            message: format!("must be finite and positive, got {hbar}"),
        });
    }
    let dim = 1usize << n;
    let delta_x = (dim as f64).recip();
    let delta_p = 2.0 * PI * hbar;
    let positions: Vec<f64> = (0..dim).map(|k| k as f64 * delta_x).collect();
    let half = (dim / 2) as f64;
    let momenta: Vec<f64> = (0..dim).map(|j| (j as f64 - half) * delta_p).collect();
    let norm = (dim as f64).sqrt().recip();
    let fourier = CMatrix::from_fn(dim, dim, |j, k| {
        C64::from_polar(norm, positions[j] * momenta[k] / hbar)
    });
    let position_op = CMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        positions.iter().map(|&x| C64::new(x, 0.0)),
    ));
    let p_diag = CMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        momenta.iter().map(|&p| C64::new(p, 0.0)),
    ));
    let momentum_op = &fourier * p_diag * fourier.adjoint();
    Ok(Grid1D {
        n,
        hbar,
        positions,
        momenta,
        delta_x,
        delta_p,
        fourier,
        position_op,
        momentum_op,
    })
}

/// The quartic double-well profile `20(x − 0.2)²(x − 0.8)²`: minima at
/// `x = 0.2` and `x = 0.8`, barrier height `0.162` at `x = 0.5`.
pub fn double_well_value(x: f64) -> f64 {
    let a = x - 0.2;
    let b = x - 0.8;
    20.0 * a * a * b * b
}

/// The double-well potential as a diagonal operator on the grid.
pub fn double_well_potential(grid: &Grid1D) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(
        grid.dim(),
        grid.positions().iter().map(|&x| C64::new(double_well_value(x), 0.0)),
    ))
}

/// Parameters of the damped barrier-crossing model.
#[derive(Debug, Clone, Copy)]
pub struct CLParams {
    /// Particle mass.
    pub mass: f64,
    /// Thermal energy `k_B T`.
    pub k_b_t: f64,
    /// Damping rate `γ ≥ 0` (zero gives the closed system).
    pub gamma: f64,
    /// Reduced Planck constant.
    pub hbar: f64,
}

impl CLParams {
    /// Checks positivity of mass, temperature, and `ħ`, and that `γ ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("mass", self.mass), ("k_b_t", self.k_b_t), ("hbar", self.hbar)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(CoreError::InvalidParameter {
                    name,
                    message: format!("must be finite and positive, got {value}"),
                });
            }
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "gamma",
                message: format!("must be finite and non-negative, got {}", self.gamma),
            });
        }
        Ok(())
    }

    /// Thermal length `λ_T = √(ħ/(4 m k_B T))` balancing the position and
    /// momentum parts of the coupling operator.
    pub fn thermal_length(&self) -> f64 {
        (self.hbar / (4.0 * self.mass * self.k_b_t)).sqrt()
    }
}

/// Bare grid Hamiltonian `P²/2m + V`.
fn bare_hamiltonian(grid: &Grid1D, potential: &CMatrix, params: &CLParams) -> CMatrix {
    let p = grid.momentum_op();
    p * p * C64::new(0.5 / params.mass, 0.0) + potential
}

/// Builds the damped barrier-crossing model on the grid: Hamiltonian
/// `P²/2m + V + (γ/2)(XP + PX)` and the single non-Hermitian coupling
/// operator `√γ(λ_T⁻¹X + iλ_T P)`. With `γ = 0` the system is closed.
pub fn caldeira_leggett_model(
    grid: &Grid1D,
    params: &CLParams,
    potential: &CMatrix,
) -> Result<LindbladModel> {
    params.validate()?;
    let dim = grid.dim();
    if potential.nrows() != dim || potential.ncols() != dim {
        return Err(CoreError::DimensionMismatch {
            context: "potential",
            expected: dim,
            found: potential.nrows(),
        });
    }
    let x = grid.position_op();
    let p = grid.momentum_op();
    let hamiltonian =
        bare_hamiltonian(grid, potential, params) + (x * p + p * x) * C64::new(0.5 * params.gamma, 0.0);
    let lambda = params.thermal_length();
    let jump = (x * C64::new(lambda.recip(), 0.0) + p * C64::new(0.0, lambda))
        * C64::new(params.gamma.sqrt(), 0.0);
    LindbladModel::new(params.hbar, hamiltonian, vec![jump])
}

/// Thermal state `e^{−H₀/k_BT}/Z` of the bare Hamiltonian `H₀ = P²/2m + V`
/// (the damping term is excluded on purpose: the reference state is the
/// undamped thermal ensemble).
pub fn gibbs_state(grid: &Grid1D, potential: &CMatrix, params: &CLParams) -> Result<CMatrix> {
    params.validate()?;
    let dim = grid.dim();
    if potential.nrows() != dim || potential.ncols() != dim {
        return Err(CoreError::DimensionMismatch {
            context: "potential",
            expected: dim,
            found: potential.nrows(),
        });
    }
    let h0 = bare_hamiltonian(grid, potential, params);
    let (energies, vectors) = hermitian_eigen(&h0);
    let ground = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies
        .iter()
        .map(|&e| (-(e - ground) / params.k_b_t).exp())
        .collect();
    let partition: f64 = weights.iter().sum();
    let mut rho = zeros(dim);
    for (i, &w) in weights.iter().enumerate() {
        let v = vectors.column(i);
        let vi = CMatrix::from_fn(dim, dim, |r, c| v[r] * v[c].conj());
        rho += vi * C64::new(w / partition, 0.0);
    }
    Ok(rho)
}

/// Projector onto the grid points with `lo ≤ x_k ≤ hi` (both ends
/// inclusive).
pub fn region_projector(grid: &Grid1D, lo: f64, hi: f64) -> Result<CMatrix> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(CoreError::InvalidParameter {
            name: "region",
            message: format!("need 0 ≤ lo ≤ hi ≤ 1, got [{lo}, {hi}]"),
        });
    }
    let mut projector = zeros(grid.dim());
    for (k, &x) in grid.positions().iter().enumerate() {
        if x >= lo && x <= hi {
            projector[(k, k)] = C64::new(1.0, 0.0);
        }
    }
    Ok(projector)
}

// ---------------------------------------------------------------------------
// Two-state kinetics
// ---------------------------------------------------------------------------

/// One simulated point of the correlation series; either field may be
/// absent depending on which estimators were run.
#[derive(Debug, Clone, Copy)]
pub struct KineticSample {
    /// Time of the sample.
    pub t: f64,
    /// `C(t)`, if estimated.
    pub correlation: Option<f64>,
    /// `Ċ(t)`, if estimated.
    pub rate: Option<f64>,
}

/// How the rate constant is extracted from the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Mean of `Ċ(t)` over the window; residual is the spread (population
    /// standard deviation).
    Plateau,
    /// Least-squares slope of `C(t)` over the window; residual is the RMS
    /// deviation from the fitted line.
    LinearC,
}

/// Result of the two-state kinetic fit.
#[derive(Debug, Clone, Copy)]
pub struct KineticFit {
    /// Forward rate constant `k_AB ≥ 0`.
    pub k_ab: f64,
    /// Backward rate constant, when the window's `Ċ` samples support the
    /// exponential-decay fit (`ln Ċ` linear in `t`); absent otherwise.
    pub k_ba: Option<f64>,
    /// Actual time span of the samples used.
    pub fit_window: (f64, f64),
    /// Method-specific residual (see [`FitMethod`]).
    pub residual: f64,
}

/// Forward two-state model `C(t) = (k_AB/k)(1 − e^{−kt})`, `k = k_AB + k_BA`
/// (the `k → 0` limit `k_AB·t` is taken explicitly). Useful as a synthetic
/// data generator.
pub fn two_state_correlation(k_ab: f64, k_ba: f64, t: f64) -> f64 {
    let k = k_ab + k_ba;
    if k.abs() < 1e-12 {
        k_ab * t
    } else {
        k_ab / k * (1.0 - (-k * t).exp())
    }
}

/// Forward two-state rate `Ċ(t) = k_AB·e^{−kt}`.
pub fn two_state_rate(k_ab: f64, k_ba: f64, t: f64) -> f64 {
    k_ab * (-(k_ab + k_ba) * t).exp()
}

fn window_samples<F: Fn(&KineticSample) -> Option<f64>>(
    series: &[KineticSample],
    window: (f64, f64),
    pick: F,
) -> Vec<(f64, f64)> {
    series
        .iter()
        .filter(|s| s.t >= window.0 && s.t <= window.1)
        .filter_map(|s| pick(s).map(|v| (s.t, v)))
        .collect()
}

const FIT_MIN_SAMPLES: usize = 3;

fn require_samples(points: &[(f64, f64)], window: (f64, f64)) -> Result<()> {
    if points.len() < FIT_MIN_SAMPLES {
        return Err(CoreError::EmptyWindow {
            lo: window.0,
            hi: window.1,
            count: points.len(),
            needed: FIT_MIN_SAMPLES,
        });
    }
    Ok(())
}

fn span(points: &[(f64, f64)]) -> (f64, f64) {
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Least-squares line through `points`; returns (slope, intercept, rms
/// residual), or an error when all abscissae coincide.
fn linear_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let v_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, v) in points {
        cov += (t - t_mean) * (v - v_mean);
        var += (t - t_mean) * (t - t_mean);
    }
    if var < 1e-300 {
        return Err(CoreError::InvalidParameter {
            name: "series",
            message: "all samples in the window share one time; cannot fit a slope".to_string(),
        });
    }
    let slope = cov / var;
    let intercept = v_mean - slope * t_mean;
    let rms = (points
        .iter()
        .map(|(t, v)| (v - slope * t - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, rms))
}

/// Estimates the backward rate from the exponential decay of positive `Ċ`
/// samples: `ln Ċ = ln k_AB − (k_AB + k_BA)·t`.
fn backward_rate(rate_points: &[(f64, f64)], k_ab: f64) -> Option<f64> {
    if rate_points.len() < FIT_MIN_SAMPLES || rate_points.iter().any(|&(_, v)| v <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = rate_points.iter().map(|&(t, v)| (t, v.ln())).collect();
    let (slope, _, _) = linear_fit(&logs).ok()?;
    let total = -slope;
    if total < 0.0 {
        // Growing rate: outside the two-state regime.
        return None;
    }
    Some((total - k_ab).max(0.0))
}

/// Fits the forward rate constant over `window`, by either plateau
/// averaging of `Ċ` or the slope of `C`. Needs at least three usable
/// samples inside the window.
pub fn fit_rate_constant(
    series: &[KineticSample],
    window: (f64, f64),
    method: FitMethod,
) -> Result<KineticFit> {
    if !(window.0.is_finite() && window.1.is_finite()) || window.0 > window.1 {
        return Err(CoreError::InvalidParameter {
            name: "window",
            message: format!("need finite t_lo ≤ t_hi, got [{}, {}]", window.0, window.1),
        });
    }
    let rate_points = window_samples(series, window, |s| s.rate);
    match method {
        FitMethod::Plateau => {
            require_samples(&rate_points, window)?;
            let n = rate_points.len() as f64;
            let mean = rate_points.iter().map(|p| p.1).sum::<f64>() / n;
            let variance = rate_points.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n;
            let k_ab = mean.max(0.0);
            Ok(KineticFit {
                k_ab,
                k_ba: backward_rate(&rate_points, k_ab),
                fit_window: span(&rate_points),
                residual: variance.sqrt(),
            })
        }
        FitMethod::LinearC => {
            let c_points = window_samples(series, window, |s| s.correlation);
            require_samples(&c_points, window)?;
            let (slope, _, rms) = linear_fit(&c_points)?;
            let k_ab = slope.max(0.0);
            Ok(KineticFit {
                k_ab,
                k_ba: backward_rate(&rate_points, k_ab),
                fit_window: span(&c_points),
                residual: rms,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{commutator, max_abs, max_abs_diff, validate_density};

    #[test]
    fn spin_half_jump_operator_squares_to_coupling_times_identity() {
        let params = SpinHalfParams { mu: 0.1, gamma: 1.0, hbar: 1.0 };
        let (model, setup) = spin_half_model(&params).unwrap();
        let l = &model.lindblads()[0];
        let ldl = l.adjoint() * l;
        assert!(max_abs_diff(&ldl, &(identity(2) * C64::new(params.gamma, 0.0))) < 1e-15);
        // Orthogonal regions and a stationary mixed state.
        assert!(max_abs(&(setup.theta_a() * setup.theta_b())) < 1e-15);
        assert!(max_abs(&model.apply_generator(setup.rho_eq())) < 1e-15);
    }

    #[test]
    fn spin_half_analytic_initial_values() {
        let params = SpinHalfParams { mu: 0.1, gamma: 1.0, hbar: 1.0 };
        let at0 = spin_half_analytic(&params, 0.0);
        assert_eq!(at0.correlation, 0.0);
        assert_eq!(at0.rate, 0.0);
        assert_eq!(at0.c_x, 0.0);
        assert_eq!(at0.c_z, -0.5);
    }

    #[test]
    fn spin_half_analytic_reference_points() {
        let params = SpinHalfParams { mu: 0.1, gamma: 1.0, hbar: 1.0 };
        let at1 = spin_half_analytic(&params, 1.0);
        assert!((at1.correlation - 0.00562).abs() < 1e-4, "C(1) = {}", at1.correlation);
        assert!((at1.rate - 0.00859).abs() < 1e-4, "rate(1) = {}", at1.rate);
        // The slowest relaxation mode decays at rate (γ − √(γ²−4μ²))/ħ ≈
        // 0.0202, so saturation to ½ within 1e-6 needs t ≳ 800 here.
        let late = spin_half_analytic(&params, 800.0);
        assert!((late.correlation - 0.5).abs() < 1e-6);
        assert!(params.is_metastable());
        // At critical damping the envelope decays at the bare rate γ/ħ and
        // t = 20 is already deep in the plateau.
        let critical = SpinHalfParams { mu: 0.5, gamma: 1.0, hbar: 1.0 };
        assert!((spin_half_analytic(&critical, 20.0).correlation - 0.5).abs() < 1e-6);
        assert!(!critical.is_metastable());
    }

    #[test]
    fn spin_half_analytic_regimes_join_continuously() {
        let mu = 0.3;
        let hbar = 1.0;
        let t = 0.8;
        let critical = spin_half_analytic(&SpinHalfParams { mu, gamma: 2.0 * mu, hbar }, t);
        let above = spin_half_analytic(
            &SpinHalfParams { mu, gamma: 2.0 * mu * (1.0 + 1e-9), hbar },
            t,
        );
        let below = spin_half_analytic(
            &SpinHalfParams { mu, gamma: 2.0 * mu * (1.0 - 1e-9), hbar },
            t,
        );
        for (a, b) in [
            (critical.correlation, above.correlation),
            (critical.correlation, below.correlation),
            (critical.rate, above.rate),
            (critical.rate, below.rate),
        ] {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn spin_half_rejects_non_positive_parameters() {
        assert!(SpinHalfParams { mu: 0.0, gamma: 1.0, hbar: 1.0 }.validate().is_err());
        assert!(SpinHalfParams { mu: 0.1, gamma: -1.0, hbar: 1.0 }.validate().is_err());
        assert!(SpinHalfParams { mu: 0.1, gamma: 1.0, hbar: f64::NAN }.validate().is_err());
    }

    #[test]
    fn grid_spacings_and_unitarity() {
        let grid = build_grid_1d(5, 0.01).unwrap();
        assert_eq!(grid.dim(), 32);
        assert_eq!(grid.delta_x(), 0.03125);
        assert!((grid.delta_p() - 2.0 * PI * 0.01).abs() < 1e-15);
        assert!((grid.delta_x() * grid.delta_p() - 2.0 * PI * 0.01 / 32.0).abs() < 1e-15);
        let gram = grid.fourier() * grid.fourier().adjoint();
        assert!(max_abs_diff(&gram, &identity(32)) < 1e-10);
    }

    #[test]
    fn grid_operator_traces_and_spectra() {
        let grid = build_grid_1d(5, 0.01).unwrap();
        // Direct coordinate sum: Σ_k k/32 over k = 0..31 is 15.5.
        let direct: f64 = (0..32).map(|k| k as f64 / 32.0).sum();
        assert!((grid.position_op().trace().re - direct).abs() < 1e-12);
        assert!((direct - 15.5).abs() < 1e-15);
        // The momentum operator is Hermitian and traceless (the eigenvalue
        // grid is asymmetric, but its sum is −2^{n−1}·δp... checked against
        // the explicit sum).
        let p = grid.momentum_op();
        assert!(max_abs_diff(p, &p.adjoint()) < 1e-10);
        let p_sum: f64 = grid.momenta().iter().sum();
        assert!((p.trace().re - p_sum).abs() < 1e-10);
        // Commutator trace identity (canonical commutation itself fails on a
        // finite grid).
        let c = commutator(grid.position_op(), p);
        assert!(c.trace().norm() < 1e-12);
    }

    #[test]
    fn grid_rejects_out_of_range_sizes() {
        assert!(build_grid_1d(1, 0.01).is_err());
        assert!(build_grid_1d(8, 0.01).is_err());
        assert!(build_grid_1d(5, 0.0).is_err());
    }

    #[test]
    fn double_well_profile_values() {
        assert!(double_well_value(0.2).abs() < 1e-15);
        assert!(double_well_value(0.8).abs() < 1e-15);
        assert!((double_well_value(0.5) - 0.162).abs() < 1e-12);
        assert!((double_well_value(0.0) - 0.512).abs() < 1e-12);
        let grid = build_grid_1d(4, 0.01).unwrap();
        let v = double_well_potential(&grid);
        assert!((v[(8, 8)].re - double_well_value(0.5)).abs() < 1e-15);
        assert!(v[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn thermal_length_reference_value() {
        let params = CLParams { mass: 1.0, k_b_t: 0.0162, gamma: 0.1, hbar: 0.01 };
        assert!((params.thermal_length() - 0.39284).abs() < 1e-5);
    }

    #[test]
    fn damped_model_reduces_to_closed_system_without_damping() {
        let grid = build_grid_1d(4, 0.01).unwrap();
        let v = double_well_potential(&grid);
        let open = CLParams { mass: 1.0, k_b_t: 0.0162, gamma: 0.1, hbar: 0.01 };
        let closed = CLParams { gamma: 0.0, ..open };
        let model_open = caldeira_leggett_model(&grid, &open, &v).unwrap();
        let model_closed = caldeira_leggett_model(&grid, &closed, &v).unwrap();
        assert!(max_abs(&model_closed.lindblads()[0]) < 1e-15);
        let p = grid.momentum_op();
        let bare = p * p * C64::new(0.5, 0.0) + &v;
        assert!(max_abs_diff(model_closed.hamiltonian(), &bare) < 1e-12);
        // The damped Hamiltonian differs by the symmetrized damping term and
        // stays Hermitian (construction would have failed otherwise).
        let diff = model_open.hamiltonian() - model_closed.hamiltonian();
        let x = grid.position_op();
        assert!(max_abs_diff(&diff, &((x * p + p * x) * C64::new(0.05, 0.0))) < 1e-12);
    }

    #[test]
    fn gibbs_state_is_thermal_in_the_bare_eigenbasis() {
        let grid = build_grid_1d(4, 0.01).unwrap();
        let v = double_well_potential(&grid);
        let params = CLParams { mass: 1.0, k_b_t: 0.0162, gamma: 0.1, hbar: 0.01 };
        let rho = gibbs_state(&grid, &v, &params).unwrap();
        validate_density(&rho, 1e-10).unwrap();
        let p = grid.momentum_op();
        let h0 = p * p * C64::new(0.5, 0.0) + &v;
        assert!(max_abs(&commutator(&h0, &rho)) < 1e-10);
        // Boltzmann ratio between the two dominant eigen-populations (the
        // two lowest energies; higher states have populations so small that
        // roundoff in ρ would swamp the comparison).
        let (energies, vectors) = hermitian_eigen(&h0);
        let mut order: Vec<usize> = (0..16).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
        let population = |i: usize| {
            let col = vectors.column(i);
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..16 {
                for c in 0..16 {
                    acc += col[r].conj() * rho[(r, c)] * col[c];
                }
            }
            acc.re
        };
        let (i0, i1) = (order[0], order[1]);
        let (p0, p1) = (population(i0), population(i1));
        let expect = (-(energies[i1] - energies[i0]) / params.k_b_t).exp();
        assert!((p1 / p0 - expect).abs() < 1e-10, "{} vs {expect}", p1 / p0);
    }

    #[test]
    fn gibbs_state_approaches_maximally_mixed_at_high_temperature() {
        let grid = build_grid_1d(4, 0.01).unwrap();
        let v = double_well_potential(&grid);
        let params = CLParams { mass: 1.0, k_b_t: 1e6, gamma: 0.1, hbar: 0.01 };
        let rho = gibbs_state(&grid, &v, &params).unwrap();
        assert!(max_abs_diff(&rho, &(identity(16) * C64::new(1.0 / 16.0, 0.0))) < 1e-4);
    }

    #[test]
    fn region_projectors_select_inclusive_coordinate_ranges() {
        let grid = build_grid_1d(5, 0.01).unwrap();
        let all = region_projector(&grid, 0.0, 1.0).unwrap();
        assert!(max_abs_diff(&all, &identity(32)) < 1e-15);
        let source = region_projector(&grid, 0.125, 0.25).unwrap();
        assert!((source.trace().re - 5.0).abs() < 1e-15);
        for k in 4..=8 {
            assert_eq!(source[(k, k)].re, 1.0);
        }
        let sink = region_projector(&grid, 0.75, 0.875).unwrap();
        assert!(max_abs(&(&source * &sink)) < 1e-15);
        assert!(region_projector(&grid, 0.5, 0.25).is_err());
        assert!(region_projector(&grid, -0.1, 0.5).is_err());
    }

    #[test]
    fn exact_linear_series_fits_its_slope_with_zero_residual() {
        let series: Vec<KineticSample> = (0..11)
            .map(|i| {
                let t = i as f64 * 0.01;
                KineticSample { t, correlation: Some(0.3 * t), rate: None }
            })
            .collect();
        let fit = fit_rate_constant(&series, (0.0, 0.1), FitMethod::LinearC).unwrap();
        assert!((fit.k_ab - 0.3).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.fit_window, (0.0, 0.1));
        assert!(fit.k_ba.is_none());
    }

    #[test]
    fn synthetic_two_state_series_recovers_both_rate_constants() {
        let (k_ab, k_ba) = (0.3, 0.1);
        let series: Vec<KineticSample> = (0..11)
            .map(|i| {
                let t = i as f64 * 0.01;
                KineticSample {
                    t,
                    correlation: Some(two_state_correlation(k_ab, k_ba, t)),
                    rate: Some(two_state_rate(k_ab, k_ba, t)),
                }
            })
            .collect();
        let linear = fit_rate_constant(&series, (0.0, 0.1), FitMethod::LinearC).unwrap();
        assert!((linear.k_ab - k_ab).abs() / k_ab < 0.05, "k_AB = {}", linear.k_ab);
        let plateau = fit_rate_constant(&series, (0.0, 0.1), FitMethod::Plateau).unwrap();
        assert!((plateau.k_ab - k_ab).abs() / k_ab < 0.05);
        let recovered = plateau.k_ba.expect("decay fit available");
        assert!((recovered - k_ba).abs() < 0.01, "k_BA = {recovered}");
    }

    #[test]
    fn plateau_fit_brackets_the_spin_rate_maximum() {
        let params = SpinHalfParams { mu: 0.1, gamma: 1.0, hbar: 1.0 };
        let series: Vec<KineticSample> = (0..13)
            .map(|i| {
                let t = 2.2 + i as f64 * 0.05;
                KineticSample { t, correlation: None, rate: Some(spin_half_analytic(&params, t).rate) }
            })
            .collect();
        let fit = fit_rate_constant(&series, (2.2, 2.8), FitMethod::Plateau).unwrap();
        // Numerical maximum of the analytic rate over a fine grid.
        let peak = (0..3000)
            .map(|i| spin_half_analytic(&params, 2.0 + i as f64 * 0.0005).rate)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (fit.k_ab - peak).abs() <= fit.residual,
            "plateau {} vs peak {peak}, residual {}",
            fit.k_ab,
            fit.residual
        );
    }

    #[test]
    fn windows_without_enough_samples_are_rejected() {
        let series = [
            KineticSample { t: 0.0, correlation: Some(0.0), rate: None },
            KineticSample { t: 1.0, correlation: Some(0.3), rate: None },
        ];
        let err = fit_rate_constant(&series, (0.0, 1.0), FitMethod::LinearC);
        assert!(matches!(err, Err(CoreError::EmptyWindow { count: 2, needed: 3, .. })));
        // A window with correlation samples but no rate samples cannot serve
        // the plateau method.
        let err = fit_rate_constant(&series, (0.0, 1.0), FitMethod::Plateau);
        assert!(matches!(err, Err(CoreError::EmptyWindow { count: 0, .. })));
    }
}
