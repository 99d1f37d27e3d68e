//! Measurement circuits for correlation functions and transition rates.
//!
//! The estimated quantities are the overlap `C(t)` between two projective
//! regions under open-system dynamics and its time derivative `Ċ(t)`. Both
//! are assembled from expectation values of a single control qubit measured
//! after a mixed-state interference circuit:
//!
//! - a control qubit prepared in `|+⟩` and phase-shifted by `χ`,
//! - a register holding the evolved region observable `θ_B(t)`,
//! - a symmetric two-slot mixture of `θ_A` and the stationary state `ρ_eq`,
//! - controlled insertions of two (not necessarily unitary) operators `N̂`
//!   and `M̂`,
//! - a pair of controlled swaps closing a trace cycle, then a Hadamard and a
//!   `σ_z` readout of the control.
//!
//! Written out, the readout equals the real part of
//! `½⟨e^{−iχ}{θ_A, M̂†θ_B(t)N̂†} + e^{iχ}{θ_A, N̂θ_B(t)M̂}⟩_eq`,
//! which [`trace_formula_expectation`] evaluates directly and
//! [`simulate_heisenberg_circuit`] reproduces gate by gate. (Each branch of
//! the symmetric mixture carries weight ½, so the raw control expectation is
//! half of the anticommutator average; the reported value is doubled to
//! restore the operator normalization, making the two functions agree
//! identically.)
//!
//! Specific choices of `(χ, N̂, M̂)` produce every term of the rate: the
//! Hamiltonian commutator term, one jump term per Lindblad operator, and the
//! anticommutator counter-terms. In the state picture the same terms are
//! instead built from the forward-evolved one-sided products
//! `e^{𝓛t}(ρ_eq θ_A)` and `e^{𝓛t}(θ_A ρ_eq)`; both assemblies divide by the
//! same static normalization `2⟨θ_A⟩_eq`.

use crate::error::{CoreError, Result};
use crate::lindblad::{propagate_exact, propagate_rk4, ExactPropagator, LindbladModel, Picture};
use crate::modular::{evolve_modular, ModularConfig};
use crate::operators::{
    anticommutator, basis_matrix, controlled_swap_permutation, embed_factor, ensure_projector,
    identity, kron, kron_all, permute_conjugate, swap_permutation, validate_density,
};
use crate::{C64, CMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

/// Absolute tolerance for the projector checks on the region observables.
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Absolute imaginary residue above which a formally real expectation value
/// is reported as an input-consistency error.
pub const IMAG_RESIDUE_ERROR_TOL: f64 = 1e-9;

/// Composite-dimension cap for the explicit tensor-network circuit path
/// (control ⊗ three system registers = `2·dim³`).
pub const CIRCUIT_TENSOR_CAP: usize = 256;

/// Denominator magnitude below which the correlation is reported undefined.
const DENOMINATOR_TOL: f64 = 1e-14;

/// The two region projectors and the stationary state they are measured in.
#[derive(Debug, Clone)]
pub struct TransitionSetup {
    theta_a: CMatrix,
    theta_b: CMatrix,
    rho_eq: CMatrix,
}

impl TransitionSetup {
    /// Validates projector and density properties and shape agreement.
    pub fn new(theta_a: CMatrix, theta_b: CMatrix, rho_eq: CMatrix) -> Result<Self> {
        ensure_projector(&theta_a, PROJECTOR_TOL, "theta_A")?;
        ensure_projector(&theta_b, PROJECTOR_TOL, "theta_B")?;
        validate_density(&rho_eq, crate::operators::DENSITY_TOL)
            .map_err(|e| match e {
                CoreError::NotDensity { reason } => CoreError::NotDensity {
                    reason: format!("rho_eq: {reason}"),
                },
                other => other,
            })?;
        let dim = theta_a.nrows();
        for (m, context) in [(&theta_b, "theta_B"), (&rho_eq, "rho_eq")] {
            if m.nrows() != dim {
                return Err(CoreError::DimensionMismatch {
                    context,
                    expected: dim,
                    found: m.nrows(),
                });
            }
        }
        Ok(Self {
            theta_a,
            theta_b,
            rho_eq,
        })
    }

    /// System dimension.
    pub fn dim(&self) -> usize {
        self.theta_a.nrows()
    }

    /// Source-region projector.
    pub fn theta_a(&self) -> &CMatrix {
        &self.theta_a
    }

    /// Destination-region projector.
    pub fn theta_b(&self) -> &CMatrix {
        &self.theta_b
    }

    /// Stationary state.
    pub fn rho_eq(&self) -> &CMatrix {
        &self.rho_eq
    }

    /// Static normalization `⟨θ_A⟩_eq = Tr(ρ_eq θ_A)`; the reduced circuit
    /// (observable register set to the identity, no evolution) reports twice
    /// this value.
    pub fn denominator(&self) -> f64 {
        (&self.rho_eq * &self.theta_a).trace().re
    }
}

/// Control-qubit phase and the two controlled operator insertions.
#[derive(Debug, Clone)]
pub struct CircuitParams {
    /// Phase `χ` (radians) applied to the control `|1⟩` amplitude.
    pub chi: f64,
    /// Operator inserted on the observable register, controlled on `|1⟩`.
    pub n_gate: CMatrix,
    /// Operator inserted on the second mixture slot, controlled on `|1⟩`.
    pub m_gate: CMatrix,
}

impl CircuitParams {
    /// Identity insertions with phase `χ = 0`.
    pub fn plain(dim: usize) -> Self {
        Self {
            chi: 0.0,
            n_gate: identity(dim),
            m_gate: identity(dim),
        }
    }
}

/// A (possibly finite-shot) estimate of one circuit expectation value.
#[derive(Debug, Clone)]
pub struct ExpectationEstimate {
    /// The estimated expectation value.
    pub value: f64,
    /// Post-selection probability of the conditional evolution behind the
    /// estimate (`1` when no post-selection is involved). Long conditional
    /// runs underflow `f64`; see
    /// [`ModularResult::log_success_probability`](crate::modular::ModularResult::log_success_probability).
    pub success_probability: f64,
    /// Number of simulated shots, when finite sampling was requested.
    pub shots: Option<u64>,
    /// Binomial standard error of `value`, when finite sampling was
    /// requested.
    pub standard_error: Option<f64>,
}

/// How the region observable (or the one-sided state products) are moved
/// through time.
#[derive(Debug, Clone, Copy)]
pub enum Evolver {
    /// Exact superoperator exponential.
    Exact,
    /// Fixed-step RK4 integration with step `dt`.
    Rk4 {
        /// Integration step.
        dt: f64,
    },
    /// Modular ancilla-dilation stepping; the step count is taken from the
    /// `ModularConfig` argument of the estimator call.
    Modular,
}

/// Which evaluation path `estimate_correlation` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMethod {
    /// Explicit tensor circuit (dimension-capped).
    Circuit,
    /// Direct trace-formula evaluation.
    TraceFormula,
}

/// Symmetric two-slot mixture `½(θ_A ⊗ ρ_eq + ρ_eq ⊗ θ_A)` on the doubled
/// space.
pub fn mixed_swap(theta_a: &CMatrix, rho_eq: &CMatrix) -> CMatrix {
    assert_eq!(
        theta_a.nrows(),
        rho_eq.nrows(),
        "mixture slots must have equal dimension"
    );
    (kron(theta_a, rho_eq) + kron(rho_eq, theta_a)) * C64::new(0.5, 0.0)
}

/// Conjugates `phi` by the controlled swap of `swap_pair` (control on the
/// qubit factor `control_factor`).
///
/// Block action on the control: the `|0⟩⟨0|` block is untouched, the
/// `|1⟩⟨1|` block is swapped on both sides, and the off-diagonal blocks
/// receive the one-sided ket/bra swaps whose partial traces contract operator
/// pairs into products.
pub fn controlled_swap_blocks(
    phi: &CMatrix,
    dims: &[usize],
    control_factor: usize,
    swap_pair: (usize, usize),
) -> CMatrix {
    let perm = controlled_swap_permutation(dims, control_factor, swap_pair);
    permute_conjugate(phi, &perm)
}

fn expect_real(value: C64, context: &'static str) -> Result<f64> {
    if value.im.abs() > IMAG_RESIDUE_ERROR_TOL {
        return Err(CoreError::ImaginaryResidue {
            context,
            residue: value.im.abs(),
            tolerance: IMAG_RESIDUE_ERROR_TOL,
        });
    }
    Ok(value.re)
}

/// Evaluates the readout expectation directly:
/// `½ Re[e^{−iχ} Tr(ρ_eq{θ_A, M̂†θ_B(t)N̂†}) + e^{iχ} Tr(ρ_eq{θ_A, N̂θ_B(t)M̂})]`.
///
/// `theta_b_t` is the already-evolved observable; any Hermitian matrix is
/// accepted. An imaginary residue above [`IMAG_RESIDUE_ERROR_TOL`] is
/// reported as an error (inconsistent inputs); below that it is discarded.
pub fn trace_formula_expectation(
    setup: &TransitionSetup,
    theta_b_t: &CMatrix,
    params: &CircuitParams,
) -> Result<f64> {
    let dim = setup.dim();
    for (m, context) in [
        (theta_b_t, "theta_B(t)"),
        (&params.n_gate, "N gate"),
        (&params.m_gate, "M gate"),
    ] {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(CoreError::DimensionMismatch {
                context,
                expected: dim,
                found: m.nrows(),
            });
        }
    }
    let n = &params.n_gate;
    let m = &params.m_gate;
    let forward = m.adjoint() * theta_b_t * n.adjoint();
    let backward = n * theta_b_t * m;
    let phase = C64::from_polar(1.0, -params.chi);
    let value = (phase * (setup.rho_eq() * anticommutator(setup.theta_a(), &forward)).trace()
        + phase.conj() * (setup.rho_eq() * anticommutator(setup.theta_a(), &backward)).trace())
        * C64::new(0.5, 0.0);
    expect_real(value, "trace formula expectation")
}

fn qubit_hadamard() -> CMatrix {
    let h = 1.0 / 2.0f64.sqrt();
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(h, 0.0),
            C64::new(h, 0.0),
            C64::new(h, 0.0),
            C64::new(-h, 0.0),
        ],
    )
}

fn qubit_sigma_z() -> CMatrix {
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

/// Runs the explicit four-register circuit on a fixed observable and returns
/// the doubled control readout.
///
/// Gate sequence: control in `|+⟩⟨+|`, phase `χ`, symmetric mixture of the
/// two system slots, controlled `N̂` on the observable register, controlled
/// `M̂` on the second slot, controlled swap of the two slots, controlled swap
/// of the observable register into the first slot, Hadamard, `σ_z` readout.
pub fn heisenberg_circuit_expectation(
    setup: &TransitionSetup,
    theta_b_t: &CMatrix,
    params: &CircuitParams,
) -> Result<f64> {
    let s = setup.dim();
    let total = 2 * s * s * s;
    if total > CIRCUIT_TENSOR_CAP {
        return Err(CoreError::DimensionCap {
            context: "explicit circuit tensor",
            dim: total,
            cap: CIRCUIT_TENSOR_CAP,
        });
    }
    if theta_b_t.nrows() != s {
        return Err(CoreError::DimensionMismatch {
            context: "theta_B(t)",
            expected: s,
            found: theta_b_t.nrows(),
        });
    }
    let dims = [2usize, s, s, s];
    let sys_dims = [s, s, s];
    let plus = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
    let mut phi = kron_all(&[&plus, theta_b_t, setup.theta_a(), setup.rho_eq()]);

    // Phase gate diag(1, e^{iχ}) on the control.
    let mut r = identity(2);
    r[(1, 1)] = C64::from_polar(1.0, params.chi);
    let r_full = embed_factor(&r, &dims, 0);
    phi = &r_full * phi * r_full.adjoint();

    // Symmetric mixture of the two system slots (an equal-weight channel, not
    // a unitary).
    let ms = swap_permutation(&dims, 2, 3);
    phi = (&phi + permute_conjugate(&phi, &ms)) * C64::new(0.5, 0.0);

    // Controlled insertions: N̂ on the observable register, M̂ on the second
    // slot. Non-unitary insertions act by congruence, which keeps the state
    // positive but rescales its trace.
    let p0 = basis_matrix(2, 0, 0);
    let p1 = basis_matrix(2, 1, 1);
    let sys_eye = identity(s * s * s);
    let c_n = kron(&p0, &sys_eye) + kron(&p1, &embed_factor(&params.n_gate, &sys_dims, 0));
    phi = &c_n * phi * c_n.adjoint();
    let c_m = kron(&p0, &sys_eye) + kron(&p1, &embed_factor(&params.m_gate, &sys_dims, 2));
    phi = &c_m * phi * c_m.adjoint();

    // Two controlled swaps close the trace cycle.
    phi = controlled_swap_blocks(&phi, &dims, 0, (2, 3));
    phi = controlled_swap_blocks(&phi, &dims, 0, (1, 2));

    // Interfere and read out the control.
    let h_full = embed_factor(&qubit_hadamard(), &dims, 0);
    phi = &h_full * phi * h_full.adjoint();
    let z_full = embed_factor(&qubit_sigma_z(), &dims, 0);
    let readout = (&z_full * &phi).trace();
    expect_real(readout * C64::new(2.0, 0.0), "circuit readout")
}

/// Total trace of the four-register circuit state after the controlled
/// insertions — the normalization against which the control readout is a
/// proper `[−1, 1]` expectation. Equals `1` when `N̂`, `M̂` are unitary and
/// the inputs are normalized.
pub fn heisenberg_circuit_trace(
    setup: &TransitionSetup,
    theta_b_t: &CMatrix,
    n_gate: &CMatrix,
    m_gate: &CMatrix,
) -> f64 {
    let t_b = theta_b_t.trace().re;
    let t_a = setup.theta_a().trace().re;
    let t_r = setup.rho_eq().trace().re;
    let n_part = (n_gate * theta_b_t * n_gate.adjoint()).trace().re;
    let m_rho = (m_gate * setup.rho_eq() * m_gate.adjoint()).trace().re;
    let m_a = (m_gate * setup.theta_a() * m_gate.adjoint()).trace().re;
    0.5 * t_b * t_a * t_r + 0.25 * n_part * (t_a * m_rho + t_r * m_a)
}

/// Total trace of the three-register state-picture circuit; `evolved_core` is
/// the forward-evolved sandwich `e^{𝓛t}(θ_A ρ_eq θ_A)`.
pub fn schrodinger_circuit_trace(
    setup: &TransitionSetup,
    evolved_core: &CMatrix,
    n_gate: &CMatrix,
    m_gate: &CMatrix,
) -> f64 {
    let t_b = setup.theta_b().trace().re;
    let t_r = setup.rho_eq().trace().re;
    let n_part = (n_gate * setup.theta_b() * n_gate.adjoint()).trace().re;
    let m_part = (m_gate * evolved_core * m_gate.adjoint()).trace().re;
    0.5 * (t_b * t_r + n_part * m_part)
}

fn evolve_observable(
    model: &LindbladModel,
    theta: &CMatrix,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
) -> Result<(CMatrix, f64)> {
    match evolver {
        Evolver::Exact => Ok((propagate_exact(model, theta, t, Picture::Heisenberg)?, 0.0)),
        Evolver::Rk4 { dt } => Ok((propagate_rk4(model, theta, t, dt, Picture::Heisenberg)?, 0.0)),
        Evolver::Modular => {
            let run = ModularConfig {
                steps: config.steps,
                total_time: t,
                picture: Picture::Heisenberg,
            };
            let result = evolve_modular(model, theta, &run)?;
            Ok((result.operator, result.log_success_probability))
        }
    }
}

fn evolve_states(
    model: &LindbladModel,
    inputs: &[&CMatrix],
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
) -> Result<Vec<CMatrix>> {
    match evolver {
        Evolver::Exact => {
            let propagator = ExactPropagator::new(model, t, Picture::Schrodinger)?;
            Ok(inputs.iter().map(|x| propagator.apply(x)).collect())
        }
        Evolver::Rk4 { dt } => inputs
            .iter()
            .map(|x| propagate_rk4(model, x, t, dt, Picture::Schrodinger))
            .collect(),
        Evolver::Modular => {
            let run = ModularConfig {
                steps: config.steps,
                total_time: t,
                picture: Picture::Schrodinger,
            };
            inputs
                .iter()
                .map(|x| Ok(evolve_modular(model, x, &run)?.operator))
                .collect()
        }
    }
}

/// Full circuit emulation of one expectation value in the observable
/// picture: evolves `θ_B` through `(t, evolver)` and runs the explicit
/// four-register circuit on the result.
///
/// Must agree with [`trace_formula_expectation`] on the same evolved
/// observable to `1e-12`; restricted to `2·dim³ ≤ 256`.
pub fn simulate_heisenberg_circuit(
    model: &LindbladModel,
    setup: &TransitionSetup,
    params: &CircuitParams,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
) -> Result<ExpectationEstimate> {
    check_same_dim(model, setup)?;
    let (theta_b_t, log_p) = evolve_observable(model, setup.theta_b(), t, config, evolver)?;
    let value = heisenberg_circuit_expectation(setup, &theta_b_t, params)?;
    Ok(ExpectationEstimate {
        value,
        success_probability: log_p.exp(),
        shots: None,
        standard_error: None,
    })
}

fn check_same_dim(model: &LindbladModel, setup: &TransitionSetup) -> Result<()> {
    if model.dim() != setup.dim() {
        return Err(CoreError::DimensionMismatch {
            context: "model vs setup",
            expected: setup.dim(),
            found: model.dim(),
        });
    }
    Ok(())
}

fn checked_denominator(setup: &TransitionSetup) -> Result<f64> {
    let denominator = setup.denominator();
    if denominator.abs() < DENOMINATOR_TOL {
        return Err(CoreError::UndefinedCorrelation);
    }
    Ok(denominator)
}

/// Estimates `C(t)`: the overlap expectation at `(χ=0, N̂=M̂=I)` divided by
/// twice the static normalization `⟨θ_A⟩_eq`.
pub fn estimate_correlation(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    method: CorrelationMethod,
    evolver: Evolver,
) -> Result<f64> {
    check_same_dim(model, setup)?;
    let denominator = checked_denominator(setup)?;
    let (theta_b_t, _) = evolve_observable(model, setup.theta_b(), t, config, evolver)?;
    let params = CircuitParams::plain(setup.dim());
    let overlap = match method {
        CorrelationMethod::Circuit => heisenberg_circuit_expectation(setup, &theta_b_t, &params)?,
        CorrelationMethod::TraceFormula => {
            trace_formula_expectation(setup, &theta_b_t, &params)?
        }
    };
    Ok(overlap / (2.0 * denominator))
}

/// The observable-picture rate decomposition: one Hamiltonian commutator
/// term plus, per Lindblad operator, a jump term and an anticommutator
/// counter-term, all normalized by the same static denominator.
#[derive(Debug, Clone)]
pub struct HeisenbergTerms {
    /// Commutator term `(2/ħ)·𝓔(χ=−π/2, N̂=I, M̂=Ĥ)`.
    pub hamiltonian: f64,
    /// Jump terms `(1/ħ)·𝓔(χ=0, N̂=L_k†, M̂=L_k)`, one per Lindblad operator.
    pub jump: Vec<f64>,
    /// Counter-terms `−(1/ħ)·𝓔(χ=0, N̂=I, M̂=L_k†L_k)`.
    pub anticommutator: Vec<f64>,
    /// Static normalization `⟨θ_A⟩_eq` (the rate divides by twice this).
    pub denominator: f64,
    /// Log success probability of the observable evolution (0 for the exact
    /// and RK4 evolvers).
    pub log_success_probability: f64,
}

impl HeisenbergTerms {
    /// Sum of all numerator terms.
    pub fn numerator(&self) -> f64 {
        self.hamiltonian + self.jump.iter().sum::<f64>() + self.anticommutator.iter().sum::<f64>()
    }

    /// The assembled rate `Ċ(t)`.
    pub fn rate(&self) -> f64 {
        self.numerator() / (2.0 * self.denominator)
    }
}

/// Computes the observable-picture term family at time `t`.
pub fn heisenberg_terms(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
) -> Result<HeisenbergTerms> {
    let (theta_b_t, log_p) = evolve_observable(model, setup.theta_b(), t, config, evolver)?;
    let mut terms = heisenberg_terms_from_observable(model, setup, &theta_b_t)?;
    terms.log_success_probability = log_p;
    Ok(terms)
}

/// Observable-picture term family evaluated on an already-evolved
/// observable. Lets a caller that produced `θ_B(t)` once reuse it for the
/// correlation function and the full rate decomposition;
/// `log_success_probability` is reported as zero (the caller tracks the
/// evolution that produced `theta_b_t`).
pub fn heisenberg_terms_from_observable(
    model: &LindbladModel,
    setup: &TransitionSetup,
    theta_b_t: &CMatrix,
) -> Result<HeisenbergTerms> {
    check_same_dim(model, setup)?;
    let denominator = checked_denominator(setup)?;
    let hbar = model.hbar();
    let dim = setup.dim();
    let hamiltonian = 2.0 / hbar
        * trace_formula_expectation(
            setup,
            theta_b_t,
            &CircuitParams {
                chi: -FRAC_PI_2,
                n_gate: identity(dim),
                m_gate: model.hamiltonian().clone(),
            },
        )?;
    let mut jump = Vec::with_capacity(model.lindblads().len());
    let mut anti = Vec::with_capacity(model.lindblads().len());
    for l in model.lindblads() {
        jump.push(
            1.0 / hbar
                * trace_formula_expectation(
                    setup,
                    theta_b_t,
                    &CircuitParams {
                        chi: 0.0,
                        n_gate: l.adjoint(),
                        m_gate: l.clone(),
                    },
                )?,
        );
        anti.push(
            -1.0 / hbar
                * trace_formula_expectation(
                    setup,
                    theta_b_t,
                    &CircuitParams {
                        chi: 0.0,
                        n_gate: identity(dim),
                        m_gate: l.adjoint() * l,
                    },
                )?,
        );
    }
    Ok(HeisenbergTerms {
        hamiltonian,
        jump,
        anticommutator: anti,
        denominator,
        log_success_probability: 0.0,
    })
}

/// Estimates `Ċ(t)` from the observable-picture term family.
pub fn estimate_rate_heisenberg(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
) -> Result<f64> {
    Ok(heisenberg_terms(model, setup, t, config, evolver)?.rate())
}

/// Evaluates one state-picture expectation
/// `Re[e^{−iχ} Tr(θ_B N̂† A M̂†) + e^{iχ} Tr(θ_B M̂ B N̂)]` on the two
/// forward-evolved one-sided products `A = e^{𝓛t}(ρ_eq θ_A)` and
/// `B = e^{𝓛t}(θ_A ρ_eq)`.
fn schrodinger_pair_expectation(
    setup: &TransitionSetup,
    evolved_rho_theta: &CMatrix,
    evolved_theta_rho: &CMatrix,
    chi: f64,
    n_gate: &CMatrix,
    m_gate: &CMatrix,
) -> Result<f64> {
    let phase = C64::from_polar(1.0, -chi);
    let first = (setup.theta_b() * n_gate.adjoint() * evolved_rho_theta * m_gate.adjoint()).trace();
    let second = (setup.theta_b() * m_gate * evolved_theta_rho * n_gate).trace();
    expect_real(
        phase * first + phase.conj() * second,
        "state-picture expectation",
    )
}

/// The state-picture rate decomposition: two Hamiltonian terms, one jump
/// term per Lindblad operator, and two anticommutator counter-terms per
/// Lindblad operator.
#[derive(Debug, Clone)]
pub struct SchrodingerTerms {
    /// `(1/ħ)·𝓔(χ=−π/2, N̂=I, M̂=Ĥ)`.
    pub hamiltonian_first: f64,
    /// `(1/ħ)·𝓔(χ=+π/2, N̂=Ĥ, M̂=I)`.
    pub hamiltonian_second: f64,
    /// `(1/ħ)·𝓔(χ=0, N̂=L_k†, M̂=L_k)`.
    pub jump: Vec<f64>,
    /// `−(1/2ħ)·𝓔(χ=0, N̂=I, M̂=L_k†L_k)`.
    pub anticommutator_first: Vec<f64>,
    /// `−(1/2ħ)·𝓔(χ=0, N̂=L_k†L_k, M̂=I)`.
    pub anticommutator_second: Vec<f64>,
    /// Static normalization `⟨θ_A⟩_eq`.
    pub denominator: f64,
}

impl SchrodingerTerms {
    /// Sum of all numerator terms.
    pub fn numerator(&self) -> f64 {
        self.hamiltonian_first
            + self.hamiltonian_second
            + self.jump.iter().sum::<f64>()
            + self.anticommutator_first.iter().sum::<f64>()
            + self.anticommutator_second.iter().sum::<f64>()
    }

    /// The assembled rate `Ċ(t)`.
    pub fn rate(&self) -> f64 {
        self.numerator() / (2.0 * self.denominator)
    }
}

/// Computes the state-picture term family at time `t`.
///
/// The one-sided products `ρ_eq θ_A` and `θ_A ρ_eq` are individually
/// non-Hermitian; they are evolved as such (every offered evolver is linear,
/// so this equals evolving the Hermitian combinations and recombining).
pub fn schrodinger_terms(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
) -> Result<SchrodingerTerms> {
    check_same_dim(model, setup)?;
    let rho_theta = setup.rho_eq() * setup.theta_a();
    let theta_rho = setup.theta_a() * setup.rho_eq();
    let evolved = evolve_states(model, &[&rho_theta, &theta_rho], t, config, evolver)?;
    schrodinger_terms_from_states(model, setup, &evolved[0], &evolved[1])
}

/// State-picture term family evaluated on the already-evolved one-sided
/// products `e^{𝓛t}(ρ_eq θ_A)` and `e^{𝓛t}(θ_A ρ_eq)`, in that order. Lets a
/// caller that propagated the pair once reuse it for the correlation function
/// and the full rate decomposition.
pub fn schrodinger_terms_from_states(
    model: &LindbladModel,
    setup: &TransitionSetup,
    evolved_rho_theta: &CMatrix,
    evolved_theta_rho: &CMatrix,
) -> Result<SchrodingerTerms> {
    check_same_dim(model, setup)?;
    let denominator = checked_denominator(setup)?;
    let (a, b) = (evolved_rho_theta, evolved_theta_rho);
    let hbar = model.hbar();
    let dim = setup.dim();
    let eye = identity(dim);
    let hamiltonian_first =
        1.0 / hbar * schrodinger_pair_expectation(setup, a, b, -FRAC_PI_2, &eye, model.hamiltonian())?;
    let hamiltonian_second =
        1.0 / hbar * schrodinger_pair_expectation(setup, a, b, FRAC_PI_2, model.hamiltonian(), &eye)?;
    let mut jump = Vec::with_capacity(model.lindblads().len());
    let mut anti_first = Vec::with_capacity(model.lindblads().len());
    let mut anti_second = Vec::with_capacity(model.lindblads().len());
    for l in model.lindblads() {
        let ldag = l.adjoint();
        let ldl = &ldag * l;
        jump.push(1.0 / hbar * schrodinger_pair_expectation(setup, a, b, 0.0, &ldag, l)?);
        anti_first.push(-0.5 / hbar * schrodinger_pair_expectation(setup, a, b, 0.0, &eye, &ldl)?);
        anti_second.push(-0.5 / hbar * schrodinger_pair_expectation(setup, a, b, 0.0, &ldl, &eye)?);
    }
    Ok(SchrodingerTerms {
        hamiltonian_first,
        hamiltonian_second,
        jump,
        anticommutator_first: anti_first,
        anticommutator_second: anti_second,
        denominator,
    })
}

/// Estimates `Ċ(t)` from the state-picture term family. Agrees with
/// [`estimate_rate_heisenberg`] to `1e-10` when both use exact evolvers.
pub fn estimate_rate_schrodinger(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
) -> Result<f64> {
    Ok(schrodinger_terms(model, setup, t, config, evolver)?.rate())
}

/// Draws `shots` Bernoulli samples of a `±1`-valued measurement with
/// expectation `expectation` and returns the empirical mean `2p̂ − 1` with
/// its binomial standard error `2√(p̂(1−p̂)/shots)`. Deterministic for a
/// fixed seed.
pub fn sample_shots(expectation: f64, shots: u64, seed: u64) -> Result<ExpectationEstimate> {
    if !(expectation.abs() <= 1.0) {
        return Err(CoreError::ExpectationOutOfRange { value: expectation });
    }
    if shots == 0 {
        return Err(CoreError::InvalidParameter {
            name: "shots",
            message: "must be positive".to_string(),
        });
    }
    let p = 0.5 * (1.0 + expectation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u64;
    for _ in 0..shots {
        if rng.random::<f64>() < p {
            successes += 1;
        }
    }
    let p_hat = successes as f64 / shots as f64;
    Ok(ExpectationEstimate {
        value: 2.0 * p_hat - 1.0,
        success_probability: 1.0,
        shots: Some(shots),
        standard_error: Some(2.0 * (p_hat * (1.0 - p_hat) / shots as f64).sqrt()),
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent, reproducible sub-stream seed from a global seed
/// and an item index, so parallel and serial sweeps draw identical samples.
pub fn derive_stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

/// A finite-shot estimate of an assembled quantity, with the propagated
/// standard error.
#[derive(Debug, Clone)]
pub struct SampledEstimate {
    /// The sampled estimate.
    pub value: f64,
    /// Standard error propagated in quadrature over the sampled terms.
    pub standard_error: f64,
    /// Log success probability of the underlying evolution.
    pub log_success_probability: f64,
}

/// Samples one raw circuit term: the readout is normalized by the circuit
/// trace (so it is a genuine `[−1, 1]` expectation), Bernoulli-sampled, and
/// rescaled back. Returns the sampled doubled value and its standard error.
fn sample_term(raw_doubled: f64, circuit_trace: f64, shots: u64, seed: u64) -> Result<(f64, f64)> {
    if circuit_trace.abs() < 1e-14 {
        // Degenerate normalization: the readout is exactly zero too.
        return Ok((raw_doubled, 0.0));
    }
    let scale = 2.0 * circuit_trace;
    let mut e = raw_doubled / scale;
    if e.abs() > 1.0 + 1e-9 {
        return Err(CoreError::ExpectationOutOfRange { value: e });
    }
    e = e.clamp(-1.0, 1.0);
    let sampled = sample_shots(e, shots, seed)?;
    Ok((
        scale * sampled.value,
        scale * sampled.standard_error.unwrap_or(0.0),
    ))
}

/// Finite-shot estimate of `C(t)`: the overlap term is sampled; the static
/// denominator is kept exact so the ratio stays unbiased.
pub fn sample_correlation(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
    shots: u64,
    seed: u64,
) -> Result<SampledEstimate> {
    check_same_dim(model, setup)?;
    let denominator = checked_denominator(setup)?;
    let (theta_b_t, log_p) = evolve_observable(model, setup.theta_b(), t, config, evolver)?;
    let params = CircuitParams::plain(setup.dim());
    let raw = trace_formula_expectation(setup, &theta_b_t, &params)?;
    let trace = heisenberg_circuit_trace(setup, &theta_b_t, &params.n_gate, &params.m_gate);
    let (value, err) = sample_term(raw, trace, shots, derive_stream_seed(seed, 0))?;
    Ok(SampledEstimate {
        value: value / (2.0 * denominator),
        standard_error: err / (2.0 * denominator).abs(),
        log_success_probability: log_p,
    })
}

/// Finite-shot estimate of `Ċ(t)` in the observable picture: every term of
/// the decomposition is sampled on its own derived sub-stream and the
/// standard errors combine in quadrature.
pub fn sample_rate_heisenberg(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
    shots: u64,
    seed: u64,
) -> Result<SampledEstimate> {
    check_same_dim(model, setup)?;
    let denominator = checked_denominator(setup)?;
    let (theta_b_t, log_p) = evolve_observable(model, setup.theta_b(), t, config, evolver)?;
    let hbar = model.hbar();
    let dim = setup.dim();
    let mut families: Vec<(f64, CircuitParams)> = vec![(
        2.0 / hbar,
        CircuitParams {
            chi: -FRAC_PI_2,
            n_gate: identity(dim),
            m_gate: model.hamiltonian().clone(),
        },
    )];
    for l in model.lindblads() {
        families.push((
            1.0 / hbar,
            CircuitParams {
                chi: 0.0,
                n_gate: l.adjoint(),
                m_gate: l.clone(),
            },
        ));
        families.push((
            -1.0 / hbar,
            CircuitParams {
                chi: 0.0,
                n_gate: identity(dim),
                m_gate: l.adjoint() * l,
            },
        ));
    }
    let mut numerator = 0.0;
    let mut variance = 0.0;
    for (index, (weight, params)) in families.iter().enumerate() {
        let raw = trace_formula_expectation(setup, &theta_b_t, params)?;
        let trace = heisenberg_circuit_trace(setup, &theta_b_t, &params.n_gate, &params.m_gate);
        let (value, err) = sample_term(raw, trace, shots, derive_stream_seed(seed, index as u64))?;
        numerator += weight * value;
        variance += (weight * err).powi(2);
    }
    Ok(SampledEstimate {
        value: numerator / (2.0 * denominator),
        standard_error: variance.sqrt() / (2.0 * denominator).abs(),
        log_success_probability: log_p,
    })
}

/// Finite-shot estimate of `Ċ(t)` in the state picture; the per-term
/// normalizations use the forward-evolved sandwich `e^{𝓛t}(θ_A ρ_eq θ_A)`.
pub fn sample_rate_schrodinger(
    model: &LindbladModel,
    setup: &TransitionSetup,
    t: f64,
    config: &ModularConfig,
    evolver: Evolver,
    shots: u64,
    seed: u64,
) -> Result<SampledEstimate> {
    check_same_dim(model, setup)?;
    let denominator = checked_denominator(setup)?;
    let rho_theta = setup.rho_eq() * setup.theta_a();
    let theta_rho = setup.theta_a() * setup.rho_eq();
    let sandwich = setup.theta_a() * setup.rho_eq() * setup.theta_a();
    let evolved = evolve_states(
        model,
        &[&rho_theta, &theta_rho, &sandwich],
        t,
        config,
        evolver,
    )?;
    let (a, b, core) = (&evolved[0], &evolved[1], &evolved[2]);
    let hbar = model.hbar();
    let dim = setup.dim();
    let eye = identity(dim);
    let mut families: Vec<(f64, f64, CMatrix, CMatrix)> = vec![
        (1.0 / hbar, -FRAC_PI_2, eye.clone(), model.hamiltonian().clone()),
        (1.0 / hbar, FRAC_PI_2, model.hamiltonian().clone(), eye.clone()),
    ];
    for l in model.lindblads() {
        let ldag = l.adjoint();
        let ldl = &ldag * l;
        families.push((1.0 / hbar, 0.0, ldag, l.clone()));
        families.push((-0.5 / hbar, 0.0, eye.clone(), ldl.clone()));
        families.push((-0.5 / hbar, 0.0, ldl, eye.clone()));
    }
    let mut numerator = 0.0;
    let mut variance = 0.0;
    for (index, (weight, chi, n_gate, m_gate)) in families.iter().enumerate() {
        let raw = schrodinger_pair_expectation(setup, a, b, *chi, n_gate, m_gate)?;
        let trace = schrodinger_circuit_trace(setup, core, n_gate, m_gate);
        let (value, err) = sample_term(raw, trace, shots, derive_stream_seed(seed, index as u64))?;
        numerator += weight * value;
        variance += (weight * err).powi(2);
    }
    Ok(SampledEstimate {
        value: numerator / (2.0 * denominator),
        standard_error: variance.sqrt() / (2.0 * denominator).abs(),
        log_success_probability: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{max_abs_diff, partial_trace};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
    }

    fn sigma_z() -> CMatrix {
        qubit_sigma_z()
    }

    fn damped_spin(mu: f64, gamma: f64, hbar: f64) -> LindbladModel {
        LindbladModel::new(
            hbar,
            sigma_y() * c(mu, 0.0),
            vec![sigma_z() * c(gamma.sqrt(), 0.0)],
        )
        .unwrap()
    }

    fn spin_setup() -> TransitionSetup {
        TransitionSetup::new(
            basis_matrix(2, 0, 0),
            basis_matrix(2, 1, 1),
            identity(2) * c(0.5, 0.0),
        )
        .unwrap()
    }

    fn exact_config() -> ModularConfig {
        ModularConfig {
            steps: 1,
            total_time: 0.0,
            picture: Picture::Heisenberg,
        }
    }

    #[test]
    fn mixed_swap_of_equal_inputs_is_their_tensor_square() {
        let theta = basis_matrix(2, 0, 0);
        let out = mixed_swap(&theta, &theta);
        assert!(max_abs_diff(&out, &kron(&theta, &theta)) < 1e-15);
    }

    #[test]
    fn mixed_swap_trace_is_product_of_traces() {
        let setup = spin_setup();
        let out = mixed_swap(setup.theta_a(), setup.rho_eq());
        assert!((out.trace().re - 1.0).abs() < 1e-14);
        // Entrywise check of the symmetric mixture for the spin setup.
        let expect = (kron(setup.theta_a(), setup.rho_eq())
            + kron(setup.rho_eq(), setup.theta_a()))
            * c(0.5, 0.0);
        assert!(max_abs_diff(&out, &expect) < 1e-15);
    }

    #[test]
    fn controlled_swap_contracts_off_diagonal_block_to_operator_product() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.4, 0.1), c(-0.3, 0.9), c(1.2, 0.0), c(0.2, -0.5)]);
        let b = CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.3), c(0.6, 0.0), c(0.0, 1.1), c(0.8, 0.2)]);
        let phi = kron_all(&[&basis_matrix(2, 1, 0), &a, &b]);
        let swapped = controlled_swap_blocks(&phi, &[2, 2, 2], 0, (1, 2));
        let reduced = partial_trace(&partial_trace(&swapped, &[2, 2, 2], 2), &[2, 2], 1);
        let product_trace = (&a * &b).trace();
        let expect = basis_matrix(2, 1, 0) * product_trace;
        assert!(max_abs_diff(&reduced, &expect) < 1e-13);
    }

    #[test]
    fn trace_formula_vanishes_for_orthogonal_projectors_without_evolution() {
        let setup = spin_setup();
        let params = CircuitParams::plain(2);
        let value = trace_formula_expectation(&setup, setup.theta_b(), &params).unwrap();
        assert!(value.abs() < 1e-15);
    }

    #[test]
    fn circuit_on_identity_observable_reports_twice_the_static_overlap() {
        // Replacing the observable register content by the identity reduces
        // the readout to twice ⟨θ_A⟩: exactly 1 for the spin setup.
        let setup = spin_setup();
        let params = CircuitParams::plain(2);
        let value = heisenberg_circuit_expectation(&setup, &identity(2), &params).unwrap();
        assert!((value - 1.0).abs() < 1e-13);
        let formula = trace_formula_expectation(&setup, &identity(2), &params).unwrap();
        assert!((formula - 1.0).abs() < 1e-14);
    }

    #[test]
    fn circuit_matches_trace_formula_for_non_unitary_insertions() {
        let setup = spin_setup();
        let theta_b_t = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.1, -0.4), c(0.1, 0.4), c(0.9, 0.0)],
        );
        let params = CircuitParams {
            chi: 0.77,
            n_gate: CMatrix::from_row_slice(2, 2, &[c(0.2, 0.5), c(1.4, 0.0), c(0.0, -0.9), c(0.3, 0.1)]),
            m_gate: CMatrix::from_row_slice(2, 2, &[c(-0.6, 0.0), c(0.8, 0.2), c(0.4, 1.0), c(0.0, 0.0)]),
        };
        let circuit = heisenberg_circuit_expectation(&setup, &theta_b_t, &params).unwrap();
        let formula = trace_formula_expectation(&setup, &theta_b_t, &params).unwrap();
        assert!(
            (circuit - formula).abs() < 1e-12,
            "circuit {circuit} vs formula {formula}"
        );
    }

    #[test]
    fn circuit_trace_formula_matches_explicit_tensor_trace() {
        // Rebuild the tensor circuit up to the readout and compare its total
        // trace against the closed-form normalization.
        let setup = spin_setup();
        let theta_b_t = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.6, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.4, 0.0)],
        );
        let n_gate = CMatrix::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.5, -0.3), c(0.1, 0.2), c(1.1, 0.0)]);
        let m_gate = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.4), c(0.0, 0.0), c(0.7, 0.0), c(-0.2, 0.6)]);
        let analytic = heisenberg_circuit_trace(&setup, &theta_b_t, &n_gate, &m_gate);

        let dims = [2usize, 2, 2, 2];
        let sys_dims = [2usize, 2, 2];
        let plus = CMatrix::from_element(2, 2, c(0.5, 0.0));
        let mut phi = kron_all(&[&plus, &theta_b_t, setup.theta_a(), setup.rho_eq()]);
        let ms = swap_permutation(&dims, 2, 3);
        phi = (&phi + permute_conjugate(&phi, &ms)) * c(0.5, 0.0);
        let p0 = basis_matrix(2, 0, 0);
        let p1 = basis_matrix(2, 1, 1);
        let sys_eye = identity(8);
        let c_n = kron(&p0, &sys_eye) + kron(&p1, &embed_factor(&n_gate, &sys_dims, 0));
        phi = &c_n * phi * c_n.adjoint();
        let c_m = kron(&p0, &sys_eye) + kron(&p1, &embed_factor(&m_gate, &sys_dims, 2));
        phi = &c_m * phi * c_m.adjoint();
        assert!((phi.trace().re - analytic).abs() < 1e-13);
        assert!(phi.trace().im.abs() < 1e-13);
    }

    #[test]
    fn hamiltonian_family_matches_direct_commutator_average() {
        let model = damped_spin(0.1, 1.0, 1.0);
        let setup = spin_setup();
        let theta_b_t =
            propagate_exact(&model, setup.theta_b(), 1.0, Picture::Heisenberg).unwrap();
        let value = 2.0 / model.hbar()
            * trace_formula_expectation(
                &setup,
                &theta_b_t,
                &CircuitParams {
                    chi: -FRAC_PI_2,
                    n_gate: identity(2),
                    m_gate: model.hamiltonian().clone(),
                },
            )
            .unwrap();
        // Independent evaluation of i·ħ⁻¹⟨{θ_A, [Ĥ, θ_B(t)]}⟩.
        let comm = model.hamiltonian() * &theta_b_t - &theta_b_t * model.hamiltonian();
        let direct = (setup.rho_eq() * anticommutator(setup.theta_a(), &comm)).trace()
            * c(0.0, 1.0 / model.hbar());
        assert!(direct.im.abs() < 1e-12);
        assert!((value - direct.re).abs() < 1e-12);
    }

    #[test]
    fn jump_family_with_full_source_region_gives_decay_rate() {
        // With θ_A widened to the identity, the jump expectation at t = 0
        // evaluates to γ/ħ; the per-component entry of the θ_A = ½(I + σ_z)
        // split is half of that.
        let gamma = 1.0;
        let hbar = 1.0;
        let model = damped_spin(0.1, gamma, hbar);
        let wide = TransitionSetup::new(identity(2), basis_matrix(2, 1, 1), identity(2) * c(0.5, 0.0))
            .unwrap();
        let l = &model.lindblads()[0];
        let value = 1.0 / hbar
            * trace_formula_expectation(
                &wide,
                wide.theta_b(),
                &CircuitParams {
                    chi: 0.0,
                    n_gate: l.adjoint(),
                    m_gate: l.clone(),
                },
            )
            .unwrap();
        assert!((value - gamma / hbar).abs() < 1e-14);
        let identity_component_weight = 0.5;
        assert!((identity_component_weight * value - gamma / (2.0 * hbar)).abs() < 1e-14);
    }

    #[test]
    fn correlation_is_zero_at_time_zero_and_grows_towards_half() {
        let model = damped_spin(0.1, 1.0, 1.0);
        let setup = spin_setup();
        let config = exact_config();
        let at_zero = estimate_correlation(
            &model,
            &setup,
            0.0,
            &config,
            CorrelationMethod::Circuit,
            Evolver::Exact,
        )
        .unwrap();
        assert!(at_zero.abs() < 1e-14);
        // Saturation to ½ is governed by the slow mode (rate ≈ 0.0202 for
        // these parameters), so a long horizon is needed for 1e-6.
        let late = estimate_correlation(
            &model,
            &setup,
            800.0,
            &config,
            CorrelationMethod::TraceFormula,
            Evolver::Exact,
        )
        .unwrap();
        assert!((late - 0.5).abs() < 1e-6);
    }

    #[test]
    fn correlation_at_unit_time_matches_reference_value() {
        let model = damped_spin(0.1, 1.0, 1.0);
        let setup = spin_setup();
        let value = estimate_correlation(
            &model,
            &setup,
            1.0,
            &exact_config(),
            CorrelationMethod::TraceFormula,
            Evolver::Exact,
        )
        .unwrap();
        assert!((value - 0.00562).abs() < 1e-4, "C(1) = {value}");
    }

    #[test]
    fn rate_vanishes_at_time_zero_and_matches_reference_at_unit_time() {
        let model = damped_spin(0.1, 1.0, 1.0);
        let setup = spin_setup();
        let config = exact_config();
        let at_zero =
            estimate_rate_heisenberg(&model, &setup, 0.0, &config, Evolver::Exact).unwrap();
        assert!(at_zero.abs() < 1e-13);
        let at_one =
            estimate_rate_heisenberg(&model, &setup, 1.0, &config, Evolver::Exact).unwrap();
        assert!((at_one - 0.00859).abs() < 1e-4, "rate(1) = {at_one}");
    }

    #[test]
    fn state_picture_terms_cancel_and_track_the_rate() {
        let model = damped_spin(0.1, 1.0, 1.0);
        let setup = spin_setup();
        let config = exact_config();
        for &t in &[0.0, 0.5, 1.0, 1.7] {
            let terms = schrodinger_terms(&model, &setup, t, &config, Evolver::Exact).unwrap();
            let cancel = terms.jump[0] + terms.anticommutator_first[0] + terms.anticommutator_second[0];
            assert!(cancel.abs() < 1e-12, "cancellation failed at t={t}: {cancel}");
            assert!(
                (terms.rate() - 2.0 * terms.hamiltonian_first).abs() < 1e-12,
                "rate ≠ 2×first Hamiltonian term at t={t}"
            );
        }
    }

    #[test]
    fn first_state_picture_hamiltonian_term_matches_reference_value() {
        let model = damped_spin(0.1, 1.0, 1.0);
        let setup = spin_setup();
        let terms = schrodinger_terms(&model, &setup, 1.0, &exact_config(), Evolver::Exact).unwrap();
        assert!(
            (terms.hamiltonian_first - 0.004296).abs() < 1e-5,
            "got {}",
            terms.hamiltonian_first
        );
    }

    #[test]
    fn shot_sampling_is_exact_for_unit_expectation() {
        let est = sample_shots(1.0, 500, 7).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.standard_error, Some(0.0));
    }

    #[test]
    fn shot_sampling_error_scale_for_balanced_expectation() {
        let est = sample_shots(0.0, 10_000, 123).unwrap();
        let se = est.standard_error.unwrap();
        assert!((se - 0.01).abs() < 0.002, "standard error {se}");
        assert!(est.value.abs() < 0.05);
    }

    #[test]
    fn shot_sampling_is_reproducible_for_fixed_seed() {
        let first = sample_shots(0.5, 100, 42).unwrap();
        let second = sample_shots(0.5, 100, 42).unwrap();
        assert_eq!(first.value, second.value);
        assert_eq!(first.standard_error, second.standard_error);
        let third = sample_shots(0.5, 100, 43).unwrap();
        // Different stream; almost surely a different empirical mean.
        assert!(first.value != third.value || first.standard_error != third.standard_error);
    }

    #[test]
    fn shot_sampling_rejects_out_of_range_expectations() {
        assert!(sample_shots(1.2, 10, 0).is_err());
        assert!(sample_shots(-1.0001, 10, 0).is_err());
        assert!(sample_shots(f64::NAN, 10, 0).is_err());
    }

    #[test]
    fn setup_validation_rejects_non_projectors_and_bad_densities() {
        let half = identity(2) * c(0.5, 0.0);
        assert!(TransitionSetup::new(half.clone(), basis_matrix(2, 1, 1), half.clone()).is_err());
        assert!(TransitionSetup::new(
            basis_matrix(2, 0, 0),
            basis_matrix(2, 1, 1),
            identity(2)
        )
        .is_err());
    }

    #[test]
    fn undefined_correlation_is_reported_when_source_region_has_no_weight() {
        let model = damped_spin(0.1, 1.0, 1.0);
        // ρ_eq concentrated on |1⟩ while θ_A projects on |0⟩.
        let setup = TransitionSetup::new(
            basis_matrix(2, 0, 0),
            basis_matrix(2, 1, 1),
            basis_matrix(2, 1, 1),
        )
        .unwrap();
        let err = estimate_correlation(
            &model,
            &setup,
            0.5,
            &exact_config(),
            CorrelationMethod::TraceFormula,
            Evolver::Exact,
        );
        assert!(matches!(err, Err(CoreError::UndefinedCorrelation)));
    }
}
