//! Dense complex-matrix kernel: adjoints, Kronecker products, Hermitian
//! matrix exponentials, partial transposition and negativity.
//!
//! All generators that appear in pure-dephasing models are Hermitian, so
//! propagators are computed by eigendecomposition rather than by series;
//! the resulting operators are unitary by construction (up to one
//! eigensolve worth of rounding).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use thiserror::Error;

/// Double-precision complex scalar used everywhere in the crate.
pub type C64 = Complex64;

/// Dense complex matrix, row-major.
pub type CMat = Array2<C64>;

/// Relative Frobenius tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Frobenius tolerance on `‖UU† − 1‖` for propagator unitarity.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Absolute tolerance on `|tr ρ − 1|` for density matrices.
pub const DENSITY_TRACE_TOL: f64 = 1e-9;

/// Eigenvalues of a density matrix may undershoot zero by this much.
pub const DENSITY_EIG_TOL: f64 = 1e-9;

/// Eigenvalues below this magnitude are treated as zero in the negativity.
pub const EIG_ZERO_TOL: f64 = 1e-12;

/// Largest dimension the dense path will materialize (2^10).
pub const DENSE_DIM_CAP: usize = 1 << 10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: relative defect {defect:.3e} exceeds {tol:.1e}")]
    NonHermitianInput { defect: f64, tol: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a density matrix: {0}")]
    NotADensityMatrix(String),
    #[error("dense dimension {dim} exceeds cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },
    #[error(transparent)]
    Backend(#[from] ndarray_linalg::error::LinalgError),
}

/// n-by-n identity.
pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

/// n-by-n zero matrix.
pub fn zeros(n: usize) -> CMat {
    Array2::zeros((n, n))
}

/// Conjugate transpose.
pub fn adjoint(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    ndarray::linalg::kron(a, b)
}

/// Matrix trace.
pub fn trace(m: &CMat) -> C64 {
    m.diag().sum()
}

/// Frobenius norm.
pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance between two matrices.
pub fn frobenius_distance(a: &CMat, b: &CMat) -> f64 {
    frobenius_norm(&(a - b))
}

/// Commutator `ab − ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

/// `‖M − M†‖_F / max(1, ‖M‖_F)`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    frobenius_distance(m, &adjoint(m)) / frobenius_norm(m).max(1.0)
}

/// Errors unless `m` is square and Hermitian within [`HERMITICITY_TOL`].
pub fn ensure_hermitian(m: &CMat) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = hermiticity_defect(m);
    if defect > HERMITICITY_TOL {
        return Err(LinalgError::NonHermitianInput {
            defect,
            tol: HERMITICITY_TOL,
        });
    }
    Ok(())
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMat) -> Result<Array1<f64>, LinalgError> {
    ensure_hermitian(m)?;
    let (vals, _) = m.eigh(UPLO::Lower)?;
    Ok(vals)
}

/// Hermitian eigendecomposition `(λ, P)` with eigenvectors in the columns
/// of `P`, so `m = P · diag(λ) · P†`.
///
/// The backend hands back the factor of `mᵀ` for complex input; the
/// conjugation here restores column eigenvectors of `m`, and the unit
/// tests pin this convention against the eigen-equation.
pub fn eigh_decompose(m: &CMat) -> Result<(Array1<f64>, CMat), LinalgError> {
    ensure_hermitian(m)?;
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

/// Unitary `exp(−i H t)` for Hermitian `H`, via eigendecomposition
/// `P · diag(e^{−iλt}) · P†`.
pub fn hermitian_propagator(h: &CMat, t: f64) -> Result<CMat, LinalgError> {
    let (vals, vecs) = eigh_decompose(h)?;
    Ok(propagator_from_spectrum(&vals, &vecs, t))
}

/// Same as [`hermitian_propagator`] but from a precomputed spectrum, so a
/// single eigensolve can serve a whole time grid.
pub fn propagator_from_spectrum(vals: &Array1<f64>, vecs: &CMat, t: f64) -> CMat {
    let phases: Array1<C64> = vals.mapv(|lam| (-C64::i() * lam * t).exp());
    // entry (i, j) of `vecs` scaled by phases[j]: columns pick up e^{−iλ_j t}
    let scaled = vecs * &phases;
    scaled.dot(&adjoint(vecs))
}

/// Transpose on the system factor of a `(dim_sys·dim_env)`-dimensional
/// bipartite operator.
pub fn partial_transpose(m: &CMat, dim_sys: usize, dim_env: usize) -> Result<CMat, LinalgError> {
    let d = dim_sys * dim_env;
    if m.nrows() != d || m.ncols() != d {
        return Err(LinalgError::DimensionMismatch(format!(
            "expected {d}x{d} for dim_sys={dim_sys}, dim_env={dim_env}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = Array2::zeros((d, d));
    for k in 0..dim_sys {
        for l in 0..dim_sys {
            for a in 0..dim_env {
                for b in 0..dim_env {
                    out[(l * dim_env + a, k * dim_env + b)] =
                        m[(k * dim_env + a, l * dim_env + b)];
                }
            }
        }
    }
    Ok(out)
}

/// Errors unless `m` is Hermitian, unit-trace and positive semidefinite
/// within the density-matrix tolerances.
pub fn ensure_density_matrix(m: &CMat) -> Result<(), LinalgError> {
    ensure_hermitian(m).map_err(|e| LinalgError::NotADensityMatrix(e.to_string()))?;
    let tr = trace(m);
    if (tr.re - 1.0).abs() > DENSITY_TRACE_TOL || tr.im.abs() > DENSITY_TRACE_TOL {
        return Err(LinalgError::NotADensityMatrix(format!(
            "trace is {tr}, expected 1"
        )));
    }
    let vals = eigvalsh(m)?;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -DENSITY_EIG_TOL {
        return Err(LinalgError::NotADensityMatrix(format!(
            "minimum eigenvalue {min:.3e} below -{DENSITY_EIG_TOL:.1e}"
        )));
    }
    Ok(())
}

/// Sum of the absolute values of the negative eigenvalues of the partial
/// transpose (transpose taken on the system factor). Zero for separable
/// states; strictly positive implies entanglement.
pub fn negativity(m: &CMat, dim_sys: usize, dim_env: usize) -> Result<f64, LinalgError> {
    ensure_density_matrix(m)?;
    let pt = partial_transpose(m, dim_sys, dim_env)?;
    let vals = eigvalsh(&pt)?;
    Ok(vals
        .iter()
        .filter(|&&lam| lam < -EIG_ZERO_TOL)
        .map(|&lam| -lam)
        .sum())
}

/// `‖UU† − 1‖_F`, the unitarity defect.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    frobenius_distance(&u.dot(&adjoint(u)), &identity(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Series `exp(A)` by scaling and squaring; independent of the
    /// eigendecomposition route.
    fn series_exp(a: &CMat) -> CMat {
        let norm = frobenius_norm(a);
        let s = norm.log2().ceil().max(0.0) as u32 + 1;
        let scaled = a.mapv(|z| z / C64::new(2f64.powi(s as i32), 0.0));
        let n = a.nrows();
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..=24 {
            term = term.dot(&scaled).mapv(|z| z / C64::new(k as f64, 0.0));
            sum += &term;
        }
        for _ in 0..s {
            sum = sum.dot(&sum);
        }
        sum
    }

    #[test]
    fn adjoint_of_identity_is_identity() {
        let id = identity(3);
        assert_eq!(adjoint(&id), id);
    }

    #[test]
    fn adjoint_conjugate_transposes() {
        let m = ndarray::array![[c(0.0, 0.0), c(1.0, 2.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let expected = ndarray::array![[c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, -2.0), c(0.0, 0.0)]];
        assert_eq!(adjoint(&m), expected);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random::ginibre(&mut rng, 4);
        assert_eq!(adjoint(&adjoint(&m)), m);
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        assert_eq!(tensor(&identity(2), &identity(3)), identity(6));
    }

    #[test]
    fn tensor_trace_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random::ginibre(&mut rng, 2);
        let b = random::ginibre(&mut rng, 2);
        let lhs = trace(&tensor(&a, &b));
        let rhs = trace(&a) * trace(&b);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn tensor_mixed_product_matches_direct_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let a = random::ginibre(&mut rng, 2);
            let b = random::ginibre(&mut rng, 2);
            let cc = random::ginibre(&mut rng, 2);
            let d = random::ginibre(&mut rng, 2);
            let lhs = tensor(&a, &b).dot(&tensor(&cc, &d));
            let rhs = tensor(&a.dot(&cc), &b.dot(&d));
            assert!(frobenius_distance(&lhs, &rhs) <= 1e-12);
        }
    }

    #[test]
    fn tensor_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random::ginibre(&mut rng, 2);
        let b = random::ginibre(&mut rng, 3);
        let cc = random::ginibre(&mut rng, 2);
        let lhs = tensor(&tensor(&a, &b), &cc);
        let rhs = tensor(&a, &tensor(&b, &cc));
        assert!(frobenius_distance(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn eigh_decompose_returns_column_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for d in [2, 4, 6] {
            let h = random::hermitian(&mut rng, d, 1.0);
            let (vals, vecs) = eigh_decompose(&h).unwrap();
            for j in 0..d {
                let col = vecs.column(j).to_owned();
                let hv = h.dot(&col);
                let lv = col.mapv(|z| z * vals[j]);
                let resid: f64 = hv.iter().zip(lv.iter()).map(|(a, b)| (a - b).norm()).sum();
                assert!(resid < 1e-12, "eigenvector residual {resid:e}");
            }
            let lam = CMat::from_diag(&vals.mapv(|v| C64::new(v, 0.0)));
            let rebuilt = vecs.dot(&lam).dot(&adjoint(&vecs));
            assert!(frobenius_distance(&rebuilt, &h) < 1e-12);
        }
    }

    #[test]
    fn propagator_of_zero_hamiltonian_is_identity() {
        let u = hermitian_propagator(&zeros(3), 2.5).unwrap();
        assert!(frobenius_distance(&u, &identity(3)) < 1e-12);
    }

    #[test]
    fn propagator_of_diagonal_hamiltonian_is_phase_diagonal() {
        let h = ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let u = hermitian_propagator(&h, std::f64::consts::PI).unwrap();
        // diag(e^{−iπ}, e^{iπ}) = −1
        assert!(frobenius_distance(&u, &identity(2).mapv(|z| -z)) < 1e-12);
    }

    #[test]
    fn propagator_matches_series_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let h = random::hermitian(&mut rng, 4, 1.0);
        let t = 0.7;
        let u = hermitian_propagator(&h, t).unwrap();
        let series = series_exp(&h.mapv(|z| -C64::i() * z * t));
        assert!(frobenius_distance(&u, &series) <= 1e-10);
    }

    #[test]
    fn propagator_rejects_non_hermitian_input() {
        let m = ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        assert!(matches!(
            hermitian_propagator(&m, 1.0),
            Err(LinalgError::NonHermitianInput { .. })
        ));
    }

    #[test]
    fn propagator_is_unitary_and_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let h = random::hermitian(&mut rng, 5, 1.0);
            let (t1, t2) = (1.3, 4.2);
            let u1 = hermitian_propagator(&h, t1).unwrap();
            let u2 = hermitian_propagator(&h, t2).unwrap();
            let u12 = hermitian_propagator(&h, t1 + t2).unwrap();
            assert!(unitarity_defect(&u1) <= UNITARITY_TOL);
            assert!(frobenius_distance(&u1.dot(&u2), &u12) <= 1e-10);
        }
    }

    #[test]
    fn partial_transpose_of_product_state_transposes_system_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let rho_s = random::density(&mut rng, 2);
        let rho_e = random::density(&mut rng, 3);
        let pt = partial_transpose(&tensor(&rho_s, &rho_e), 2, 3).unwrap();
        let expected = tensor(&rho_s.t().to_owned(), &rho_e);
        assert!(frobenius_distance(&pt, &expected) < 1e-14);
    }

    #[test]
    fn partial_transpose_is_an_involution_and_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = random::density(&mut rng, 6);
        let pt = partial_transpose(&m, 2, 3).unwrap();
        assert!((trace(&pt) - trace(&m)).norm() == 0.0);
        assert_eq!(partial_transpose(&pt, 2, 3).unwrap(), m);
        assert!(hermiticity_defect(&pt) < 1e-14);
    }

    #[test]
    fn partial_transpose_rejects_bad_dimensions() {
        assert!(matches!(
            partial_transpose(&identity(5), 2, 3),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    fn bell_state() -> CMat {
        // (|00⟩ + |11⟩)/√2 as a density matrix
        let mut psi = Array2::zeros((4, 1));
        psi[(0, 0)] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi[(3, 0)] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi.dot(&adjoint(&psi))
    }

    #[test]
    fn bell_state_partial_transpose_has_minus_half_eigenvalue() {
        let pt = partial_transpose(&bell_state(), 2, 2).unwrap();
        let vals = eigvalsh(&pt).unwrap();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min + 0.5).abs() < 1e-12);
    }

    #[test]
    fn negativity_of_bell_state_is_half() {
        let neg = negativity(&bell_state(), 2, 2).unwrap();
        assert!((neg - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negativity_of_product_state_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let rho = tensor(&random::density(&mut rng, 2), &random::density(&mut rng, 3));
        assert!(negativity(&rho, 2, 3).unwrap() < 1e-12);
    }

    #[test]
    fn negativity_rejects_non_density_input() {
        let m = identity(4); // trace 4
        assert!(matches!(
            negativity(&m, 2, 2),
            Err(LinalgError::NotADensityMatrix(_))
        ));
    }
}
