//! Markovian master-equation generator, its observable-picture adjoint, and
//! two reference propagators: an exact superoperator exponential and a
//! fixed-step RK4 integrator.
//!
//! Conventions, with `ħ` explicit throughout:
//!
//! - state picture: `𝓛(ρ) = −(i/ħ)[H, ρ] + (1/ħ) Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`
//! - observable picture: `𝓛†(θ) = +(i/ħ)[H, θ] + (1/ħ) Σ_k (L_k† θ L_k − ½{L_k†L_k, θ})`
//!
//! The two are trace-duals: `Tr(θ 𝓛(ρ)) = Tr(ρ 𝓛†(θ))` for all inputs.
//! `𝓛` is trace-preserving (its output is traceless); `𝓛†` is unital
//! (`𝓛†(I) = 0`).

use crate::error::{CoreError, Result};
use crate::operators::{
    anticommutator, commutator, ensure_hermitian, identity, matrix_exp, max_abs, unvectorize,
    vectorize,
};
use crate::{C64, CMatrix};

/// Absolute entrywise tolerance for Hermitian model inputs.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-10;

/// Largest system dimension for which the exact superoperator propagator is
/// offered (the superoperator is `dim² × dim²`).
pub const EXACT_PROPAGATION_DIM_CAP: usize = 64;

/// Norm blow-up factor beyond which the RK4 integrator reports divergence.
const RK4_DIVERGENCE_FACTOR: f64 = 1e9;

/// Which side of the trace pairing is evolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Picture {
    /// States evolve; observables are fixed.
    Schrodinger,
    /// Observables evolve; states are fixed.
    Heisenberg,
}

/// A Markovian open-system model: Hamiltonian, jump operators, and `ħ`.
///
/// The jump operators keep their construction order; all per-operator
/// expectation families downstream report in the same order.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    hbar: f64,
    hamiltonian: CMatrix,
    lindblads: Vec<CMatrix>,
}

impl LindbladModel {
    /// Builds a model, checking `ħ > 0`, Hermiticity of the Hamiltonian, and
    /// shape agreement of every jump operator.
    pub fn new(hbar: f64, hamiltonian: CMatrix, lindblads: Vec<CMatrix>) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "hbar",
                message: format!("must be a positive finite real, got {hbar}"),
            });
        }
        let dim = hamiltonian.nrows();
        if hamiltonian.ncols() != dim {
            return Err(CoreError::DimensionMismatch {
                context: "Hamiltonian",
                expected: dim,
                found: hamiltonian.ncols(),
            });
        }
        ensure_hermitian(&hamiltonian, HERMITIAN_INPUT_TOL, "Hamiltonian")?;
        for l in &lindblads {
            if l.nrows() != dim || l.ncols() != dim {
                return Err(CoreError::DimensionMismatch {
                    context: "jump operator",
                    expected: dim,
                    found: l.nrows().max(l.ncols()),
                });
            }
        }
        Ok(Self {
            hbar,
            hamiltonian,
            lindblads,
        })
    }

    /// System dimension.
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// `ħ`.
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// The Hamiltonian.
    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    /// The jump operators, in construction order.
    pub fn lindblads(&self) -> &[CMatrix] {
        &self.lindblads
    }

    /// Applies the state-picture generator to `rho`.
    pub fn apply_generator(&self, rho: &CMatrix) -> CMatrix {
        let i_over_hbar = C64::new(0.0, 1.0 / self.hbar);
        let mut out = commutator(&self.hamiltonian, rho) * (-i_over_hbar);
        let inv_hbar = C64::new(1.0 / self.hbar, 0.0);
        let half = C64::new(0.5, 0.0);
        for l in &self.lindblads {
            let ldag = l.adjoint();
            let ldl = &ldag * l;
            out += (l * rho * &ldag - anticommutator(&ldl, rho) * half) * inv_hbar;
        }
        out
    }

    /// Applies the observable-picture (adjoint) generator to `theta`.
    pub fn apply_adjoint(&self, theta: &CMatrix) -> CMatrix {
        let i_over_hbar = C64::new(0.0, 1.0 / self.hbar);
        let mut out = commutator(&self.hamiltonian, theta) * i_over_hbar;
        let inv_hbar = C64::new(1.0 / self.hbar, 0.0);
        let half = C64::new(0.5, 0.0);
        for l in &self.lindblads {
            let ldag = l.adjoint();
            let ldl = &ldag * l;
            out += (&ldag * theta * l - anticommutator(&ldl, theta) * half) * inv_hbar;
        }
        out
    }

    /// Applies the generator of the requested picture.
    pub fn apply_picture(&self, op: &CMatrix, picture: Picture) -> CMatrix {
        match picture {
            Picture::Schrodinger => self.apply_generator(op),
            Picture::Heisenberg => self.apply_adjoint(op),
        }
    }

    /// The generator as a `dim² × dim²` matrix acting on column-stacked
    /// operators (`vec(A X B) = (Bᵀ ⊗ A) vec(X)`).
    pub fn superoperator(&self, picture: Picture) -> CMatrix {
        let d = self.dim();
        let eye = identity(d);
        let h = &self.hamiltonian;
        let ht = h.transpose();
        let commutator_part = eye.kronecker(h) - ht.kronecker(&eye);
        let i_over_hbar = C64::new(0.0, 1.0 / self.hbar);
        let mut sup = match picture {
            Picture::Schrodinger => commutator_part * (-i_over_hbar),
            Picture::Heisenberg => commutator_part * i_over_hbar,
        };
        let inv_hbar = C64::new(1.0 / self.hbar, 0.0);
        let half = C64::new(0.5, 0.0);
        for l in &self.lindblads {
            let ldag = l.adjoint();
            let ldl = &ldag * l;
            let jump = match picture {
                Picture::Schrodinger => l.conjugate().kronecker(l),
                Picture::Heisenberg => l.transpose().kronecker(&ldag),
            };
            let anti = eye.kronecker(&ldl) + ldl.transpose().kronecker(&eye);
            sup += (jump - anti * half) * inv_hbar;
        }
        sup
    }
}

/// Exact propagation `e^{𝓖 t}` with `𝓖` the superoperator of the chosen
/// picture, applied to an arbitrary (not necessarily Hermitian) operator.
///
/// Restricted to `dim ≤ 64`; Hermitian inputs stay Hermitian to numerical
/// precision.
pub fn propagate_exact(
    model: &LindbladModel,
    op: &CMatrix,
    t: f64,
    picture: Picture,
) -> Result<CMatrix> {
    Ok(ExactPropagator::new(model, t, picture)?.apply(op))
}

/// Cached exact propagator for one `(model, t, picture)` triple.
///
/// Building the propagator costs one `dim² × dim²` matrix exponential; each
/// `apply` is then a single matrix-vector product, so reuse it when several
/// operators must be moved through the same interval.
pub struct ExactPropagator {
    exp_superop: CMatrix,
    dim: usize,
}

impl ExactPropagator {
    /// Exponentiates the superoperator of the chosen picture over time `t`.
    pub fn new(model: &LindbladModel, t: f64, picture: Picture) -> Result<Self> {
        let dim = model.dim();
        if dim > EXACT_PROPAGATION_DIM_CAP {
            return Err(CoreError::DimensionCap {
                context: "exact superoperator propagation",
                dim,
                cap: EXACT_PROPAGATION_DIM_CAP,
            });
        }
        if !t.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "t",
                message: format!("must be finite, got {t}"),
            });
        }
        let sup = model.superoperator(picture) * C64::new(t, 0.0);
        Ok(Self {
            exp_superop: matrix_exp(&sup),
            dim,
        })
    }

    /// Applies the cached propagator.
    pub fn apply(&self, op: &CMatrix) -> CMatrix {
        assert_eq!(op.nrows(), self.dim, "operator does not match propagator");
        unvectorize(&(&self.exp_superop * vectorize(op)), self.dim)
    }
}

/// Classic fixed-step fourth-order Runge-Kutta integration of
/// `d op/dt = 𝓖(op)` from 0 to `t`.
///
/// The last step is shortened so the integration lands exactly on `t`.
/// A blow-up of the iterate norm (or a non-finite entry) is reported as
/// divergence together with the offending step index.
pub fn propagate_rk4(
    model: &LindbladModel,
    op: &CMatrix,
    t: f64,
    dt: f64,
    picture: Picture,
) -> Result<CMatrix> {
    if t == 0.0 {
        return Ok(op.clone());
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(CoreError::InvalidParameter {
            name: "t",
            message: format!("must be a non-negative finite real, got {t}"),
        });
    }
    if !(dt > 0.0) || dt > t {
        return Err(CoreError::InvalidParameter {
            name: "dt",
            message: format!("must satisfy 0 < dt ≤ t, got dt = {dt} with t = {t}"),
        });
    }
    let norm_cap = RK4_DIVERGENCE_FACTOR * (1.0 + max_abs(op));
    let mut x = op.clone();
    let mut remaining = t;
    let mut step_index = 0usize;
    while remaining > 0.0 {
        let h = dt.min(remaining);
        let half = C64::new(h / 2.0, 0.0);
        let sixth = C64::new(h / 6.0, 0.0);
        let k1 = model.apply_picture(&x, picture);
        let k2 = model.apply_picture(&(&x + &k1 * half), picture);
        let k3 = model.apply_picture(&(&x + &k2 * half), picture);
        let k4 = model.apply_picture(&(&x + &k3 * C64::new(h, 0.0)), picture);
        x += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * sixth;
        let norm = max_abs(&x);
        if !norm.is_finite() || norm > norm_cap {
            return Err(CoreError::Divergence {
                step: step_index,
                norm,
            });
        }
        // Subtracting h each iteration accumulates rounding; recompute from
        // the step count so the final shortened step is exact.
        step_index += 1;
        remaining = t - (step_index as f64) * dt;
        if remaining < 0.0 {
            remaining = 0.0;
        }
    }
    Ok(x)
}
