//! Pure-dephasing qudit-environment models and block-form joint states.
//!
//! A pure-dephasing Hamiltonian is diagonal in the system's pointer basis:
//! pointer energies ε_k, a free environment Hamiltonian, and one Hermitian
//! environment coupling per pointer state. The joint evolution operator is
//! block diagonal, so a joint state starting from a pure system state and a
//! product with the environment stays in block form for all times: one
//! environment matrix per pair of pointer states, with the diagonal blocks
//! being the environment states conditional on each pointer state.
//!
//! Evolution therefore never materializes the full joint matrix; blocks are
//! propagated individually and assembly is on demand.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, adjoint, ensure_density_matrix, ensure_hermitian, trace, CMat, C64, LinalgError,
};

/// The crate works in natural units: ħ = 1, so every energy or coupling is
/// an angular frequency in rad per time unit.
pub const HBAR: f64 = 1.0;

/// Absolute tolerance on `Σ|c_k|² − 1` for system amplitudes.
pub const AMPLITUDE_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("pointer index {index} out of range for {n_sys} pointer states")]
    IndexOutOfRange { index: usize, n_sys: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("amplitudes not normalized: Σ|c|² = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Pure-dephasing Hamiltonian data: pointer energies, environment
/// Hamiltonian, and one conditional coupling per pointer state.
#[derive(Debug, Clone)]
pub struct PureDephasingModel {
    epsilons: Vec<f64>,
    h_env: CMat,
    couplings: Vec<CMat>,
}

impl PureDephasingModel {
    /// Validates Hermiticity and shared dimensions. Requires at least two
    /// pointer states.
    pub fn new(epsilons: Vec<f64>, h_env: CMat, couplings: Vec<CMat>) -> Result<Self, ModelError> {
        let n = epsilons.len();
        if n < 2 {
            return Err(ModelError::InvalidModel(format!(
                "need at least 2 pointer states, got {n}"
            )));
        }
        if couplings.len() != n {
            return Err(ModelError::InvalidModel(format!(
                "{n} pointer energies but {} couplings",
                couplings.len()
            )));
        }
        ensure_hermitian(&h_env)?;
        let d = h_env.nrows();
        for (k, v) in couplings.iter().enumerate() {
            ensure_hermitian(v)?;
            if v.nrows() != d {
                return Err(ModelError::InvalidModel(format!(
                    "coupling {k} is {}x{} but the environment dimension is {d}",
                    v.nrows(),
                    v.ncols()
                )));
            }
        }
        Ok(Self {
            epsilons,
            h_env,
            couplings,
        })
    }

    /// Number of system pointer states.
    pub fn n_sys(&self) -> usize {
        self.epsilons.len()
    }

    /// Environment dimension.
    pub fn dim_env(&self) -> usize {
        self.h_env.nrows()
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn h_env(&self) -> &CMat {
        &self.h_env
    }

    pub fn coupling(&self, k: usize) -> Result<&CMat, ModelError> {
        self.couplings.get(k).ok_or(ModelError::IndexOutOfRange {
            index: k,
            n_sys: self.n_sys(),
        })
    }

    /// Environment generator conditional on pointer state `k`, i.e. the sum
    /// of the free environment Hamiltonian and the k-th coupling.
    pub fn branch_generator(&self, k: usize) -> Result<CMat, ModelError> {
        Ok(&self.h_env + self.coupling(k)?)
    }

    /// Environment evolution operator conditional on pointer state `k`:
    /// `exp(−i(H_E + V_k)t)`, optionally multiplied by the pointer state's
    /// free phase `e^{−iε_k t}`. The free phase has no bearing on
    /// entanglement, so it defaults to off everywhere downstream.
    pub fn conditional_propagator(
        &self,
        k: usize,
        t: f64,
        include_free_phase: bool,
    ) -> Result<CMat, ModelError> {
        let u = linalg::hermitian_propagator(&self.branch_generator(k)?, t)?;
        if include_free_phase {
            let phase = (-C64::i() * self.epsilons[k] * t).exp();
            Ok(u.mapv(|z| z * phase))
        } else {
            Ok(u)
        }
    }

    /// Evolves the product initial condition (pure system amplitudes `c`,
    /// environment state `r0`) for time `t`, free phases off.
    pub fn evolve(
        &self,
        c: &SystemAmplitudes,
        r0: &CMat,
        t: f64,
    ) -> Result<BlockJointState, ModelError> {
        self.evolve_with_phases(c, r0, t, false)
    }

    /// As [`evolve`](Self::evolve) with the free-phase convention explicit.
    pub fn evolve_with_phases(
        &self,
        c: &SystemAmplitudes,
        r0: &CMat,
        t: f64,
        include_free_phase: bool,
    ) -> Result<BlockJointState, ModelError> {
        let n = self.n_sys();
        if c.len() != n {
            return Err(ModelError::InvalidModel(format!(
                "{} amplitudes for {n} pointer states",
                c.len()
            )));
        }
        if r0.nrows() != self.dim_env() || r0.ncols() != self.dim_env() {
            return Err(ModelError::Linalg(LinalgError::DimensionMismatch(format!(
                "initial environment state is {}x{}, expected {d}x{d}",
                r0.nrows(),
                r0.ncols(),
                d = self.dim_env()
            ))));
        }
        ensure_density_matrix(r0)?;

        let props = ConditionalPropagators::new(self)?;
        let ws: Vec<CMat> = (0..n)
            .map(|k| props.propagator(k, t, include_free_phase))
            .collect::<Result<_, _>>()?;
        let w_daggers: Vec<CMat> = ws.iter().map(adjoint).collect();

        let mut blocks = Vec::with_capacity(n * n);
        for w in &ws {
            let w_r0 = w.dot(r0);
            for w_dag in &w_daggers {
                blocks.push(w_r0.dot(w_dag));
            }
        }
        Ok(BlockJointState {
            amplitudes: c.clone(),
            blocks,
            time: t,
        })
    }
}

/// Pure system state in the pointer basis, `Σ|c_k|² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemAmplitudes {
    c: Vec<C64>,
}

impl SystemAmplitudes {
    pub fn new(c: Vec<C64>) -> Result<Self, ModelError> {
        let norm_sq: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > AMPLITUDE_NORM_TOL {
            return Err(ModelError::NotNormalized { norm_sq });
        }
        Ok(Self { c })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(c: Vec<C64>) -> Result<Self, ModelError> {
        let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ModelError::NotNormalized { norm_sq: 0.0 });
        }
        Ok(Self {
            c: c.into_iter().map(|z| z / norm).collect(),
        })
    }

    /// `(1/√n, …, 1/√n)`, the ideal test state for the witness protocol.
    pub fn equal_superposition(n: usize) -> Self {
        let amp = C64::new(1.0 / (n as f64).sqrt(), 0.0);
        Self { c: vec![amp; n] }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn get(&self, k: usize) -> C64 {
        self.c[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.c.iter()
    }
}

/// Joint system-environment state in block form: amplitudes `c_k` and an
/// N×N grid of environment matrices, of which the diagonal ones are the
/// conditional environment states.
#[derive(Debug, Clone)]
pub struct BlockJointState {
    amplitudes: SystemAmplitudes,
    blocks: Vec<CMat>, // row-major: index k * n_sys + l
    time: f64,
}

impl BlockJointState {
    /// Block form of the product state `|ψ⟩⟨ψ| ⊗ r0` (every block equals
    /// `r0`), the initial condition of every evolution here.
    pub fn product(c: &SystemAmplitudes, r0: &CMat) -> Result<Self, ModelError> {
        ensure_density_matrix(r0)?;
        let n = c.len();
        Ok(Self {
            amplitudes: c.clone(),
            blocks: vec![r0.clone(); n * n],
            time: 0.0,
        })
    }

    pub fn n_sys(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn dim_env(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn amplitudes(&self) -> &SystemAmplitudes {
        &self.amplitudes
    }

    /// Environment block for the pointer pair `(k, l)`.
    pub fn block(&self, k: usize, l: usize) -> &CMat {
        &self.blocks[k * self.n_sys() + l]
    }

    /// Materializes the full joint density matrix
    /// `Σ_{k,l} c_k c_l* |k⟩⟨l| ⊗ R_kl`.
    pub fn assemble(&self) -> CMat {
        let n = self.n_sys();
        let d = self.dim_env();
        let mut out = Array2::zeros((n * d, n * d));
        for k in 0..n {
            for l in 0..n {
                let weight = self.amplitudes.get(k) * self.amplitudes.get(l).conj();
                let scaled = self.block(k, l).mapv(|z| z * weight);
                out.slice_mut(s![k * d..(k + 1) * d, l * d..(l + 1) * d])
                    .assign(&scaled);
            }
        }
        out
    }

    /// Reduced system state: entry `(i, j)` is `c_i c_j* tr(R_ij)`, so the
    /// system's coherences are amplitude-weighted block traces and the
    /// populations are the `|c_i|²`.
    pub fn reduced_system(&self) -> CMat {
        let n = self.n_sys();
        Array2::from_shape_fn((n, n), |(i, j)| {
            self.amplitudes.get(i) * self.amplitudes.get(j).conj() * trace(self.block(i, j))
        })
    }

    /// Checks the block-form invariants: adjoint pairing of mirror blocks,
    /// diagonal blocks being density matrices, and positivity of the
    /// assembled matrix.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n_sys();
        for k in 0..n {
            ensure_density_matrix(self.block(k, k))?;
            for l in 0..n {
                let defect = linalg::frobenius_distance(self.block(l, k), &adjoint(self.block(k, l)));
                if defect > 1e-10 {
                    return Err(ModelError::InvalidModel(format!(
                        "blocks ({l},{k}) and ({k},{l}) are not adjoints: defect {defect:.3e}"
                    )));
                }
            }
        }
        let assembled = self.assemble();
        let vals = linalg::eigvalsh(&assembled)?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(ModelError::InvalidModel(format!(
                "assembled state has eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// Eigendecompositions of every conditional generator, so propagators over
/// a whole time grid cost one eigensolve per pointer state.
pub struct ConditionalPropagators<'m> {
    model: &'m PureDephasingModel,
    spectra: Vec<(Array1<f64>, CMat)>,
}

impl<'m> ConditionalPropagators<'m> {
    pub fn new(model: &'m PureDephasingModel) -> Result<Self, ModelError> {
        let spectra = (0..model.n_sys())
            .map(|k| {
                let gen = model.branch_generator(k)?;
                Ok(linalg::eigh_decompose(&gen)?)
            })
            .collect::<Result<_, ModelError>>()?;
        Ok(Self { model, spectra })
    }

    /// Conditional propagator for pointer state `k` at time `t`.
    pub fn propagator(
        &self,
        k: usize,
        t: f64,
        include_free_phase: bool,
    ) -> Result<CMat, ModelError> {
        let (vals, vecs) = self.spectra.get(k).ok_or(ModelError::IndexOutOfRange {
            index: k,
            n_sys: self.model.n_sys(),
        })?;
        let u = linalg::propagator_from_spectrum(vals, vecs, t);
        if include_free_phase {
            let phase = (-C64::i() * self.model.epsilons()[k] * t).exp();
            Ok(u.mapv(|z| z * phase))
        } else {
            Ok(u)
        }
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

/// On-disk form of a model: JSON with complex entries as `[re, im]` pairs
/// in row-major order. See the repository README for the schema.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_sys: usize,
    pub dim_env: usize,
    pub epsilons: Vec<f64>,
    pub h_env: Vec<[f64; 2]>,
    pub couplings: Vec<Vec<[f64; 2]>>,
}

/// On-disk form of a density matrix, same entry convention.
#[derive(Debug, Serialize, Deserialize)]
pub struct DensityConfig {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

fn mat_to_pairs(m: &CMat) -> Vec<[f64; 2]> {
    m.iter().map(|z| [z.re, z.im]).collect()
}

fn pairs_to_mat(dim: usize, pairs: &[[f64; 2]]) -> Result<CMat, ModelError> {
    if pairs.len() != dim * dim {
        return Err(ModelError::InvalidModel(format!(
            "expected {} entries for a {dim}x{dim} matrix, got {}",
            dim * dim,
            pairs.len()
        )));
    }
    Ok(Array2::from_shape_fn((dim, dim), |(i, j)| {
        let [re, im] = pairs[i * dim + j];
        C64::new(re, im)
    }))
}

impl ModelConfig {
    pub fn from_model(model: &PureDephasingModel) -> Self {
        Self {
            n_sys: model.n_sys(),
            dim_env: model.dim_env(),
            epsilons: model.epsilons().to_vec(),
            h_env: mat_to_pairs(model.h_env()),
            couplings: (0..model.n_sys())
                .map(|k| mat_to_pairs(model.coupling(k).expect("k < n_sys")))
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<PureDephasingModel, ModelError> {
        if self.epsilons.len() != self.n_sys || self.couplings.len() != self.n_sys {
            return Err(ModelError::InvalidModel(format!(
                "n_sys = {} but {} pointer energies and {} couplings",
                self.n_sys,
                self.epsilons.len(),
                self.couplings.len()
            )));
        }
        let h_env = pairs_to_mat(self.dim_env, &self.h_env)?;
        let couplings = self
            .couplings
            .iter()
            .map(|pairs| pairs_to_mat(self.dim_env, pairs))
            .collect::<Result<Vec<_>, _>>()?;
        PureDephasingModel::new(self.epsilons.clone(), h_env, couplings)
    }
}

impl DensityConfig {
    pub fn from_matrix(m: &CMat) -> Self {
        Self {
            dim: m.nrows(),
            entries: mat_to_pairs(m),
        }
    }

    /// Rebuilds and validates the density matrix.
    pub fn to_matrix(&self) -> Result<CMat, ModelError> {
        let m = pairs_to_mat(self.dim, &self.entries)?;
        ensure_density_matrix(&m)?;
        Ok(m)
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PureDephasingModel, ModelError> {
    let text = fs::read_to_string(path)?;
    let config: ModelConfig = serde_json::from_str(&text)?;
    config.to_model()
}

pub fn save_model(path: impl AsRef<Path>, model: &PureDephasingModel) -> Result<(), ModelError> {
    let config = ModelConfig::from_model(model);
    fs::write(path, serde_json::to_string_pretty(&config)?)?;
    Ok(())
}

pub fn load_density(path: impl AsRef<Path>) -> Result<CMat, ModelError> {
    let text = fs::read_to_string(path)?;
    let config: DensityConfig = serde_json::from_str(&text)?;
    config.to_matrix()
}

pub fn save_density(path: impl AsRef<Path>, m: &CMat) -> Result<(), ModelError> {
    let config = DensityConfig::from_matrix(m);
    fs::write(path, serde_json::to_string_pretty(&config)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_distance, identity};
    use crate::random;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rejects_single_pointer_state() {
        let err = PureDephasingModel::new(vec![0.0], identity(2), vec![identity(2)]);
        assert!(matches!(err, Err(ModelError::InvalidModel(_))));
    }

    #[test]
    fn rejects_mismatched_coupling_dimension() {
        let err = PureDephasingModel::new(
            vec![0.0, 1.0],
            identity(2),
            vec![identity(2), identity(3)],
        );
        assert!(matches!(err, Err(ModelError::InvalidModel(_))));
    }

    #[test]
    fn propagator_at_zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = random::model(&mut rng, 3, 4, 1.0);
        for k in 0..3 {
            let u = model.conditional_propagator(k, 0.0, true).unwrap();
            assert!(frobenius_distance(&u, &identity(4)) < 1e-12);
        }
    }

    #[test]
    fn propagator_with_diagonal_environment_is_phase_diagonal() {
        let h_env = array![[c(0.3, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.9, 0.0)]];
        let model = PureDephasingModel::new(
            vec![0.5, -0.2],
            h_env,
            vec![linalg::zeros(2), linalg::zeros(2)],
        )
        .unwrap();
        let t = 1.7;
        for (k, eps) in [(0usize, 0.5), (1usize, -0.2)] {
            let u = model.conditional_propagator(k, t, true).unwrap();
            for (m, lam) in [(0usize, 0.3), (1usize, -0.9)] {
                let expected = (-C64::i() * (eps + lam) * t).exp();
                assert!((u[(m, m)] - expected).norm() < 1e-12);
                assert!(u[(m, 1 - m)].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn propagator_inverts_under_time_reversal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random::model(&mut rng, 2, 4, 1.0);
        let fwd = model.conditional_propagator(0, 1.9, true).unwrap();
        let bwd = model.conditional_propagator(0, -1.9, true).unwrap();
        assert!(frobenius_distance(&fwd.dot(&bwd), &identity(4)) <= 1e-10);
    }

    #[test]
    fn propagator_index_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = random::model(&mut rng, 2, 2, 1.0);
        assert!(matches!(
            model.conditional_propagator(2, 1.0, false),
            Err(ModelError::IndexOutOfRange { index: 2, n_sys: 2 })
        ));
    }

    #[test]
    fn evolve_at_zero_time_keeps_every_block_at_r0() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = random::model(&mut rng, 3, 2, 1.0);
        let r0 = random::density(&mut rng, 2);
        let c = SystemAmplitudes::equal_superposition(3);
        let state = model.evolve(&c, &r0, 0.0).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                assert!(frobenius_distance(state.block(k, l), &r0) < 1e-12);
            }
        }
    }

    #[test]
    fn equal_couplings_give_identical_conditional_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h_env = random::hermitian(&mut rng, 3, 1.0);
        let v = random::hermitian(&mut rng, 3, 1.0);
        let model =
            PureDephasingModel::new(vec![0.1, 0.7, -0.3], h_env, vec![v.clone(), v.clone(), v])
                .unwrap();
        let r0 = random::density(&mut rng, 3);
        let c = SystemAmplitudes::equal_superposition(3);
        let state = model.evolve(&c, &r0, 2.3).unwrap();
        for k in 1..3 {
            assert!(frobenius_distance(state.block(k, k), state.block(0, 0)) < 1e-12);
        }
    }

    #[test]
    fn evolve_rejects_non_density_initial_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = random::model(&mut rng, 2, 2, 1.0);
        let c = SystemAmplitudes::equal_superposition(2);
        let not_density = identity(2); // trace 2
        assert!(model.evolve(&c, &not_density, 1.0).is_err());
    }

    #[test]
    fn assemble_of_product_state_is_projector_tensor_r0() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r0 = random::density(&mut rng, 2);
        let amps = random::amplitudes(&mut rng, 2, 0.1);
        let state = BlockJointState::product(&amps, &r0).unwrap();
        let psi = Array2::from_shape_fn((2, 1), |(k, _)| amps.get(k));
        let expected = linalg::tensor(&psi.dot(&adjoint(&psi)), &r0);
        assert!(frobenius_distance(&state.assemble(), &expected) < 1e-12);
        assert!((trace(&state.assemble()) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reduced_system_starts_pure_and_dephases_to_populations() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c_amps = random::amplitudes(&mut rng, 3, 0.1);
        let r0 = random::density(&mut rng, 2);
        let state = BlockJointState::product(&c_amps, &r0).unwrap();
        let rho = state.reduced_system();
        for i in 0..3 {
            for j in 0..3 {
                let expected = c_amps.get(i) * c_amps.get(j).conj();
                assert!((rho[(i, j)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn populations_are_constant_under_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = random::model(&mut rng, 3, 4, 1.0);
        let r0 = random::density(&mut rng, 4);
        let c = random::amplitudes(&mut rng, 3, 0.1);
        for &t in &[0.0, 0.4, 2.0, 7.3] {
            let rho = model.evolve(&c, &r0, t).unwrap().reduced_system();
            for i in 0..3 {
                assert!((rho[(i, i)].re - c.get(i).norm_sqr()).abs() < 1e-10);
                assert!(rho[(i, i)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coherence_damping_factors_stay_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = random::model(&mut rng, 3, 4, 1.0);
        let r0 = random::density(&mut rng, 4);
        let c = SystemAmplitudes::equal_superposition(3);
        for &t in &[0.3, 1.1, 4.9] {
            let state = model.evolve(&c, &r0, t).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!(trace(state.block(i, j)).norm() <= 1.0 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn free_phase_only_rotates_off_diagonal_coherences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = random::model(&mut rng, 3, 3, 1.0);
        let r0 = random::density(&mut rng, 3);
        let c = SystemAmplitudes::equal_superposition(3);
        let t = 1.6;
        let plain = model.evolve_with_phases(&c, &r0, t, false).unwrap();
        let phased = model.evolve_with_phases(&c, &r0, t, true).unwrap();
        for k in 0..3 {
            assert!(frobenius_distance(plain.block(k, k), phased.block(k, k)) < 1e-12);
        }
        let rho_a = plain.reduced_system();
        let rho_b = phased.reduced_system();
        for i in 0..3 {
            for j in 0..3 {
                assert!((rho_a[(i, j)].norm() - rho_b[(i, j)].norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evolution_preserves_spectrum_and_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = random::model(&mut rng, 2, 3, 1.0);
        let r0 = random::density(&mut rng, 3);
        let c = random::amplitudes(&mut rng, 2, 0.1);
        let before = BlockJointState::product(&c, &r0).unwrap().assemble();
        let state = model.evolve(&c, &r0, 3.7).unwrap();
        state.validate().unwrap();
        let after = state.assemble();
        let s0 = linalg::eigvalsh(&before).unwrap();
        let s1 = linalg::eigvalsh(&after).unwrap();
        for (a, b) in s0.iter().zip(s1.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn amplitudes_must_be_normalized() {
        assert!(SystemAmplitudes::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        let normalized = SystemAmplitudes::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((normalized.get(0).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn model_config_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let model = random::model(&mut rng, 3, 2, 1.0);
        let config = ModelConfig::from_model(&model);
        let text = serde_json::to_string(&config).unwrap();
        let back: ModelConfig = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_model().unwrap();
        assert_eq!(rebuilt.n_sys(), 3);
        assert!(frobenius_distance(rebuilt.h_env(), model.h_env()) == 0.0);
        for k in 0..3 {
            assert!(
                frobenius_distance(rebuilt.coupling(k).unwrap(), model.coupling(k).unwrap()) == 0.0
            );
        }
        assert_eq!(rebuilt.epsilons(), model.epsilons());
    }

    #[test]
    fn density_config_validates_on_load() {
        let bad = DensityConfig {
            dim: 2,
            entries: vec![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]], // trace 2
        };
        assert!(bad.to_matrix().is_err());
    }
}
