//! Random matrices, states and models for randomized validation.
//!
//! Everything here takes the RNG by argument so callers control seeding;
//! the acceptance and property suites use these generators with fixed
//! seeds for reproducible sweeps.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{adjoint, trace, CMat, C64};
use crate::model::{PureDephasingModel, SystemAmplitudes};

/// Square matrix with independent standard complex Gaussian entries.
pub fn ginibre<R: Rng>(rng: &mut R, d: usize) -> CMat {
    Array2::from_shape_fn((d, d), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random Hermitian matrix `(G + G†)/2`, scaled.
pub fn hermitian<R: Rng>(rng: &mut R, d: usize, scale: f64) -> CMat {
    let g = ginibre(rng, d);
    (&g + &adjoint(&g)).mapv(|z| z * 0.5 * scale)
}

/// Random full-rank density matrix `GG† / tr(GG†)`.
pub fn density<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let g = ginibre(rng, d);
    let rho = g.dot(&adjoint(&g));
    let tr = trace(&rho);
    rho.mapv(|z| z / tr)
}

/// Random normalized amplitudes with every component bounded away from
/// zero (`|c_k| ≥ min_weight` after normalization).
pub fn amplitudes<R: Rng>(rng: &mut R, n: usize, min_weight: f64) -> SystemAmplitudes {
    loop {
        let raw: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        let c: Vec<C64> = raw.iter().map(|z| z / norm).collect();
        if c.iter().all(|z| z.norm() >= min_weight) {
            return SystemAmplitudes::new(c).expect("normalized by construction");
        }
    }
}

/// Random pure-dephasing model with Gaussian Hermitian generators.
pub fn model<R: Rng>(rng: &mut R, n_sys: usize, dim_env: usize, scale: f64) -> PureDephasingModel {
    let epsilons: Vec<f64> = (0..n_sys).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h_env = hermitian(rng, dim_env, scale);
    let couplings: Vec<CMat> = (0..n_sys).map(|_| hermitian(rng, dim_env, scale)).collect();
    PureDephasingModel::new(epsilons, h_env, couplings).expect("generators are Hermitian")
}

/// Random model whose bath Hamiltonian and couplings are all real
/// diagonal, so every conditional propagator commutes with every other.
pub fn commuting_model<R: Rng>(
    rng: &mut R,
    n_sys: usize,
    dim_env: usize,
    scale: f64,
) -> PureDephasingModel {
    let diag = |rng: &mut R| {
        let mut m = Array2::zeros((dim_env, dim_env));
        for i in 0..dim_env {
            m[(i, i)] = C64::new(rng.random_range(-scale..scale), 0.0);
        }
        m
    };
    let epsilons: Vec<f64> = (0..n_sys).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h_env = diag(rng);
    let couplings: Vec<CMat> = (0..n_sys).map(|_| diag(rng)).collect();
    PureDephasingModel::new(epsilons, h_env, couplings).expect("diagonal matrices are Hermitian")
}
