//! Dense complex-matrix utilities: tensor products, factor embeddings,
//! partial traces, permutation gates, Hermitian checks, and matrix
//! exponentials.
//!
//! Composite indices follow the usual big-endian convention: for factor
//! dimensions `[d0, d1, ..]` the leftmost factor is the most significant
//! digit of the composite index, matching `kron(a, b)` placing `a` on the
//! left.

use crate::error::{CoreError, Result};
use crate::{C64, CMatrix};
use nalgebra::DVector;

/// `n × n` identity.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `n × n` zero matrix.
pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

/// Matrix unit `|i⟩⟨j|` in dimension `dim`.
pub fn basis_matrix(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&CMatrix]) -> CMatrix {
    assert!(!factors.is_empty(), "kron_all needs at least one factor");
    let mut out = factors[0].clone();
    for f in &factors[1..] {
        out = out.kronecker(f);
    }
    out
}

/// Commutator `[a, b] = ab − ba`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Anticommutator `{a, b} = ab + ba`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Largest entrywise absolute value.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise absolute deviation between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

/// Hermiticity residue `max |m − m†|`.
pub fn hermiticity_residue(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Checks that `m` is Hermitian within `tol` (absolute, entrywise).
pub fn ensure_hermitian(m: &CMatrix, tol: f64, context: &'static str) -> Result<()> {
    let residue = hermiticity_residue(m);
    if residue > tol {
        return Err(CoreError::NotHermitian {
            context,
            residue,
            tolerance: tol,
        });
    }
    Ok(())
}

/// Projector residue `max |m² − m|`.
pub fn projector_residue(m: &CMatrix) -> f64 {
    max_abs_diff(&(m * m), m)
}

/// Checks that `m` is an orthogonal projector (`m² = m`, Hermitian) within
/// `tol`.
pub fn ensure_projector(m: &CMatrix, tol: f64, context: &'static str) -> Result<()> {
    ensure_hermitian(m, tol, context)?;
    let residue = projector_residue(m);
    if residue > tol {
        return Err(CoreError::NotProjector {
            context,
            residue,
            tolerance: tol,
        });
    }
    Ok(())
}

/// Default tolerance for density-operator validation.
pub const DENSITY_TOL: f64 = 1e-10;

/// Checks Hermiticity, unit trace, and positive semidefiniteness of a density
/// operator, all within `tol` (absolute).
pub fn validate_density(rho: &CMatrix, tol: f64) -> Result<()> {
    let herm = hermiticity_residue(rho);
    if herm > tol {
        return Err(CoreError::NotDensity {
            reason: format!("Hermiticity residue {herm:.3e} exceeds {tol:.1e}"),
        });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(CoreError::NotDensity {
            reason: format!("trace {tr} differs from 1 beyond {tol:.1e}"),
        });
    }
    // Symmetrize before the eigenvalue check so the decomposition sees an
    // exactly Hermitian input.
    let sym = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    if let Some(lambda) = eig.eigenvalues.iter().copied().find(|l| *l < -tol) {
        return Err(CoreError::NotDensity {
            reason: format!("negative eigenvalue {lambda:.3e} beyond {tol:.1e}"),
        });
    }
    Ok(())
}

/// Hermitian eigendecomposition: eigenvalues (real, ascending not guaranteed)
/// and the unitary of eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// `e^{z·h}` for Hermitian `h` and complex scalar `z`, via eigendecomposition.
///
/// For purely imaginary `z` the result is unitary to machine precision.
pub fn hermitian_exp_scaled(h: &CMatrix, z: C64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(h);
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|l| (z * *l).exp()));
    &vecs * CMatrix::from_diagonal(&phases) * vecs.adjoint()
}

/// General (non-Hermitian) matrix exponential `e^m` by scaling-and-squaring.
pub fn matrix_exp(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Column-stacking vectorization `vec(m)`: columns concatenated top to bottom.
pub fn vectorize(m: &CMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`] for a square `dim × dim` matrix.
pub fn unvectorize(v: &DVector<C64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Decomposes composite index `idx` into per-factor digits for `dims`.
fn split_index(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0usize; dims.len()];
    for (k, d) in dims.iter().enumerate().rev() {
        digits[k] = idx % d;
        idx /= d;
    }
    digits
}

/// Recombines per-factor digits into a composite index.
fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0usize;
    for (digit, d) in digits.iter().zip(dims) {
        idx = idx * d + digit;
    }
    idx
}

/// Embeds `op` on factor `factor` of a tensor space with factor dimensions
/// `dims`, identity elsewhere.
pub fn embed_factor(op: &CMatrix, dims: &[usize], factor: usize) -> CMatrix {
    assert_eq!(
        op.nrows(),
        dims[factor],
        "embedded operator does not match its factor dimension"
    );
    let pre: usize = dims[..factor].iter().product();
    let post: usize = dims[factor + 1..].iter().product();
    kron_all(&[&identity(pre), op, &identity(post)])
}

/// Permutation (as an index map) for the unitary that swaps factors `i` and
/// `j`: entry `r` holds the preimage index whose digits have `i` and `j`
/// exchanged.
pub fn swap_permutation(dims: &[usize], i: usize, j: usize) -> Vec<usize> {
    assert_eq!(dims[i], dims[j], "swapped factors must have equal dimension");
    let total: usize = dims.iter().product();
    (0..total)
        .map(|r| {
            let mut digits = split_index(r, dims);
            digits.swap(i, j);
            join_index(&digits, dims)
        })
        .collect()
}

/// Permutation for the controlled swap: factors `swap_pair` are exchanged on
/// the subspace where factor `control` (dimension 2) is `|1⟩`, untouched on
/// `|0⟩`.
pub fn controlled_swap_permutation(
    dims: &[usize],
    control: usize,
    swap_pair: (usize, usize),
) -> Vec<usize> {
    assert_eq!(dims[control], 2, "control factor must be a qubit");
    let (i, j) = swap_pair;
    assert_eq!(dims[i], dims[j], "swapped factors must have equal dimension");
    let total: usize = dims.iter().product();
    (0..total)
        .map(|r| {
            let mut digits = split_index(r, dims);
            if digits[control] == 1 {
                digits.swap(i, j);
            }
            join_index(&digits, dims)
        })
        .collect()
}

/// Conjugates `phi` by the self-inverse permutation unitary described by
/// `perm`: `(P φ P†)[r, c] = φ[perm[r], perm[c]]`.
///
/// `perm` must be an involution (as produced by the swap builders above).
pub fn permute_conjugate(phi: &CMatrix, perm: &[usize]) -> CMatrix {
    let n = phi.nrows();
    assert_eq!(perm.len(), n);
    let mut out = CMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            out[(r, c)] = phi[(perm[r], perm[c])];
        }
    }
    out
}

/// Partial trace over factor `factor` of a tensor space with dimensions
/// `dims`; the result acts on the remaining factors in their original order.
pub fn partial_trace(m: &CMatrix, dims: &[usize], factor: usize) -> CMatrix {
    let df = dims[factor];
    let pre: usize = dims[..factor].iter().product();
    let post: usize = dims[factor + 1..].iter().product();
    let out_dim = pre * post;
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for p1 in 0..pre {
        for q1 in 0..post {
            for p2 in 0..pre {
                for q2 in 0..post {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..df {
                        let r = (p1 * df + a) * post + q1;
                        let c = (p2 * df + a) * post + q2;
                        acc += m[(r, c)];
                    }
                    out[(p1 * post + q1, p2 * post + q2)] = acc;
                }
            }
        }
    }
    out
}

/// Top-left `dim × dim` block of `m`.
pub fn leading_block(m: &CMatrix, dim: usize) -> CMatrix {
    m.view((0, 0), (dim, dim)).into_owned()
}
