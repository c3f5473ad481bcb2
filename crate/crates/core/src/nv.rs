//! NV-center spin qutrit dephasing in a bath of spin-1/2 nuclei.
//!
//! The qutrit's three lowest spin levels (−1, 0, +1) are its pointer
//! states, mapped to model indices (0, 1, 2). The bath response is
//! branch-proportional: pointer 0 leaves the bath free, pointers ±1 couple
//! with opposite signs through per-spin hyperfine vectors. The bath
//! Hamiltonian, the couplings, and the polarized initial state all
//! factorize over the nuclei, so conditional propagators are tensor
//! products of 2×2 rotations and prepared-coherence traces reduce to
//! products of 2×2 traces. That factorized path costs linear time in the
//! spin count; the dense path exists for cross-validation and refuses
//! beyond the dimension cap.
//!
//! Units: time in µs, angular frequencies and couplings in rad/µs,
//! magnetic field in T, gyromagnetic ratios in MHz/T (1 MHz/T = 2π
//! rad/µs/T), distances in nm.

use std::f64::consts::TAU;
use std::fs;
use std::io::{Read, Write as IoWrite};
use std::path::Path;

use ndarray::array;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, adjoint, tensor, CMat, C64, LinalgError, DENSE_DIM_CAP};
use crate::model::{ModelError, PureDephasingModel, SystemAmplitudes};

/// Gyromagnetic ratio of the spin-1/2 bath nuclei (MHz/T).
pub const GAMMA_N_MHZ_PER_T: f64 = 10.71;

/// Electron gyromagnetic ratio entering the qutrit level splittings
/// (MHz/T). Affects only the optional pointer free phases, which are off
/// by default; see the README units appendix for the conventions.
pub const GAMMA_E_MHZ_PER_T: f64 = 28.08;

/// Electron gyromagnetic ratio used when generating dipolar couplings
/// (MHz/T); 28.08 GHz/T puts couplings at sub-nm distances in the
/// rad/µs range of the bundled bath.
pub const GAMMA_E_DIPOLAR_MHZ_PER_T: f64 = 28_080.0;

/// Zero-field splitting of the qutrit (MHz). Enters only the ±1 pointer
/// free phases.
pub const ZERO_FIELD_SPLITTING_MHZ: f64 = 2_870.0;

/// `(μ0/4π)·ħ` expressed so that gyromagnetic ratios in rad/µs/T and
/// distances in nm give dipolar couplings in rad/µs.
pub const DIPOLAR_PREFACTOR: f64 = 1.054_571_817e-8;

/// Nuclei closer than this to the qutrit are outside the point-dipole
/// regime and rejected.
pub const MIN_DISTANCE_NM: f64 = 0.1;

#[derive(Debug, Error)]
pub enum NvError {
    #[error("nucleus at {r_nm:.4} nm is too close; minimum distance is {MIN_DISTANCE_NM} nm")]
    TooClose { r_nm: f64 },
    #[error("polarization {p} outside [-1, 1]")]
    PolarizationOutOfRange { p: f64 },
    #[error("invalid radial range [{r_min_nm}, {r_max_nm}]: need {MIN_DISTANCE_NM} < r_min < r_max")]
    InvalidRange { r_min_nm: f64, r_max_nm: f64 },
    #[error("invalid NV config: {0}")]
    InvalidConfig(String),
    #[error("spin table parse error at row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Qutrit pointer branch, in the fixed index order (−1, 0, +1) → (0, 1, 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    MinusOne,
    Zero,
    PlusOne,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::MinusOne, Branch::Zero, Branch::PlusOne];

    /// Model pointer index.
    pub fn index(self) -> usize {
        match self {
            Branch::MinusOne => 0,
            Branch::Zero => 1,
            Branch::PlusOne => 2,
        }
    }

    /// Sign of the bath response: V_b = sign · V.
    pub fn sign(self) -> f64 {
        match self {
            Branch::MinusOne => -1.0,
            Branch::Zero => 0.0,
            Branch::PlusOne => 1.0,
        }
    }

    /// Physical spin projection label, for reports.
    pub fn label(self) -> i32 {
        match self {
            Branch::MinusOne => -1,
            Branch::Zero => 0,
            Branch::PlusOne => 1,
        }
    }

    pub fn from_label(label: i32) -> Option<Branch> {
        match label {
            -1 => Some(Branch::MinusOne),
            0 => Some(Branch::Zero),
            1 => Some(Branch::PlusOne),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Branch> {
        match index {
            0 => Some(Branch::MinusOne),
            1 => Some(Branch::Zero),
            2 => Some(Branch::PlusOne),
            _ => None,
        }
    }
}

/// One bath nucleus: hyperfine coupling components along z (rad/µs),
/// polarization, and where it sits if known.
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearSpin {
    /// Distance from the qutrit (nm); first column of the table format.
    pub distance_nm: f64,
    pub a_zx: f64,
    pub a_zy: f64,
    pub a_zz: f64,
    /// Polarization in [−1, 1].
    pub polarization: f64,
    /// Displacement vector (nm) when the geometry is known.
    pub position_nm: Option<[f64; 3]>,
}

impl NuclearSpin {
    pub fn validate(&self) -> Result<(), NvError> {
        let p = self.polarization;
        if p.abs() > 1.0 || p.is_nan() {
            return Err(NvError::PolarizationOutOfRange { p });
        }
        if ![self.a_zx, self.a_zy, self.a_zz].iter().all(|a| a.is_finite()) {
            return Err(NvError::InvalidConfig(format!(
                "non-finite coupling on nucleus at {} nm",
                self.distance_nm
            )));
        }
        Ok(())
    }

    /// In-plane coupling magnitude `√(a_zx² + a_zy²)`.
    pub fn a_plane(&self) -> f64 {
        self.a_zx.hypot(self.a_zy)
    }
}

/// Full description of the qutrit-bath setup.
#[derive(Debug, Clone)]
pub struct NvConfig {
    /// Magnetic field along z (T).
    pub b_z_tesla: f64,
    pub gamma_e_mhz_per_t: f64,
    pub gamma_n_mhz_per_t: f64,
    pub zero_field_splitting_mhz: f64,
    pub spins: Vec<NuclearSpin>,
    pub include_free_phases: bool,
}

impl NvConfig {
    pub fn new(b_z_tesla: f64, spins: Vec<NuclearSpin>) -> Result<Self, NvError> {
        let cfg = Self {
            b_z_tesla,
            gamma_e_mhz_per_t: GAMMA_E_MHZ_PER_T,
            gamma_n_mhz_per_t: GAMMA_N_MHZ_PER_T,
            zero_field_splitting_mhz: ZERO_FIELD_SPLITTING_MHZ,
            spins,
            include_free_phases: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NvError> {
        if self.b_z_tesla < 0.0 {
            return Err(NvError::InvalidConfig(format!(
                "negative magnetic field {}",
                self.b_z_tesla
            )));
        }
        if self.spins.is_empty() {
            return Err(NvError::InvalidConfig("no bath spins".into()));
        }
        for spin in &self.spins {
            spin.validate()?;
        }
        Ok(())
    }

    /// Sets every nucleus to the same polarization.
    pub fn with_uniform_polarization(mut self, p: f64) -> Result<Self, NvError> {
        if p.abs() > 1.0 || p.is_nan() {
            return Err(NvError::PolarizationOutOfRange { p });
        }
        for spin in &mut self.spins {
            spin.polarization = p;
        }
        Ok(self)
    }

    /// Nuclear Zeeman frequency `γ_n B_z` (rad/µs).
    pub fn nuclear_zeeman_rad_per_us(&self) -> f64 {
        TAU * self.gamma_n_mhz_per_t * self.b_z_tesla
    }

    /// Pointer energies (rad/µs) in index order (−1, 0, +1):
    /// zero-field splitting ∓/± the electron Zeeman shift for ∓1/±1, zero
    /// for pointer 0.
    pub fn epsilons_rad_per_us(&self) -> [f64; 3] {
        let delta = TAU * self.zero_field_splitting_mhz;
        let zeeman = TAU * self.gamma_e_mhz_per_t * self.b_z_tesla;
        [delta - zeeman, 0.0, delta + zeeman]
    }
}

/// Spin-1/2 operator, x component (entries ±1/2).
pub fn spin_x() -> CMat {
    array![
        [C64::new(0.0, 0.0), C64::new(0.5, 0.0)],
        [C64::new(0.5, 0.0), C64::new(0.0, 0.0)]
    ]
}

/// Spin-1/2 operator, y component.
pub fn spin_y() -> CMat {
    array![
        [C64::new(0.0, 0.0), C64::new(0.0, -0.5)],
        [C64::new(0.0, 0.5), C64::new(0.0, 0.0)]
    ]
}

/// Spin-1/2 operator, z component.
pub fn spin_z() -> CMat {
    array![
        [C64::new(0.5, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]
    ]
}

/// Secular dipolar coupling components `(a_zx, a_zy, a_zz)` in rad/µs for
/// a nucleus displaced by `r_nm` (nm) from the qutrit:
/// `(μ0/4π)(γ_e γ_n ħ / r³)(δ_iz − 3 r_i r_z / r²)`, gyromagnetic ratios
/// in MHz/T.
pub fn dipolar_couplings(
    r_nm: [f64; 3],
    gamma_e_mhz_per_t: f64,
    gamma_n_mhz_per_t: f64,
) -> Result<(f64, f64, f64), NvError> {
    let r2 = r_nm.iter().map(|x| x * x).sum::<f64>();
    let r = r2.sqrt();
    if r <= MIN_DISTANCE_NM {
        return Err(NvError::TooClose { r_nm: r });
    }
    let gamma_e = TAU * gamma_e_mhz_per_t;
    let gamma_n = TAU * gamma_n_mhz_per_t;
    let k = DIPOLAR_PREFACTOR * gamma_e * gamma_n / (r * r2);
    let geom = |i: usize| {
        let delta_iz = if i == 2 { 1.0 } else { 0.0 };
        delta_iz - 3.0 * r_nm[i] * r_nm[2] / r2
    };
    Ok((k * geom(0), k * geom(1), k * geom(2)))
}

fn embed(op: &CMat, site: usize, n: usize) -> CMat {
    let left = linalg::identity(1 << site);
    let right = linalg::identity(1 << (n - 1 - site));
    tensor(&tensor(&left, op), &right)
}

/// Dense three-pointer model for the configured bath: bath Zeeman
/// Hamiltonian, branch couplings (−V, 0, +V), pointer energies in index
/// order (−1, 0, +1). Refuses baths beyond the dense dimension cap.
pub fn build_dense_model(cfg: &NvConfig) -> Result<PureDephasingModel, NvError> {
    build_dense_model_with_cap(cfg, DENSE_DIM_CAP)
}

/// As [`build_dense_model`] with an explicit cap on the bath dimension.
pub fn build_dense_model_with_cap(
    cfg: &NvConfig,
    dense_cap: usize,
) -> Result<PureDephasingModel, NvError> {
    cfg.validate()?;
    let n = cfg.spins.len();
    if n >= usize::BITS as usize || (1usize << n) > dense_cap {
        return Err(NvError::Linalg(LinalgError::DenseCapExceeded {
            dim: 1usize.checked_shl(n as u32).unwrap_or(usize::MAX),
            cap: dense_cap,
        }));
    }
    let d = 1 << n;
    let zeeman = cfg.nuclear_zeeman_rad_per_us();
    let mut h_env = linalg::zeros(d);
    let mut v = linalg::zeros(d);
    for (j, spin) in cfg.spins.iter().enumerate() {
        h_env = h_env + embed(&spin_z(), j, n).mapv(|z| z * zeeman);
        let local = spin_x().mapv(|z| z * spin.a_zx)
            + spin_y().mapv(|z| z * spin.a_zy)
            + spin_z().mapv(|z| z * spin.a_zz);
        v = v + embed(&local, j, n);
    }
    let couplings = vec![v.mapv(|z| -z), linalg::zeros(d), v];
    let epsilons = cfg.epsilons_rad_per_us().to_vec();
    Ok(PureDephasingModel::new(epsilons, h_env, couplings)?)
}

/// Per-spin conditional propagator: exact exponential of the 2×2 Hermitian
/// generator `γ_n B_z Î^z + sign(branch)·(a_zx Î^x + a_zy Î^y + a_zz Î^z)`
/// for time `t` (µs). Free pointer phases are not included here; they are
/// global factors applied at the coherence level.
pub fn per_spin_propagator(spin: &NuclearSpin, branch: Branch, cfg: &NvConfig, t: f64) -> CMat {
    let s = branch.sign();
    let vx = s * spin.a_zx;
    let vy = s * spin.a_zy;
    let vz = cfg.nuclear_zeeman_rad_per_us() + s * spin.a_zz;
    let m = (vx * vx + vy * vy + vz * vz).sqrt();
    if m == 0.0 {
        return linalg::identity(2);
    }
    let (sin, cos) = (m * t / 2.0).sin_cos();
    let f = C64::new(0.0, -sin / m);
    array![
        [C64::new(cos, 0.0) + f * vz, f * C64::new(vx, -vy)],
        [f * C64::new(vx, vy), C64::new(cos, 0.0) - f * vz]
    ]
}

/// Per-spin initial bath states `(1 + p_j Î^z)/2 = diag((2+p)/4, (2−p)/4)`.
pub fn initial_env(spins: &[NuclearSpin]) -> Result<Vec<CMat>, NvError> {
    spins
        .iter()
        .map(|spin| {
            spin.validate()?;
            let p = spin.polarization;
            Ok(array![
                [C64::new((2.0 + p) / 4.0, 0.0), C64::new(0.0, 0.0)],
                [C64::new(0.0, 0.0), C64::new((2.0 - p) / 4.0, 0.0)]
            ])
        })
        .collect()
}

/// Tensor product of the per-spin initial states, for the dense path.
pub fn dense_initial_env(cfg: &NvConfig) -> Result<CMat, NvError> {
    let factors = initial_env(&cfg.spins)?;
    let mut out = linalg::identity(1);
    for f in &factors {
        out = tensor(&out, f);
    }
    Ok(out)
}

/// Prepared coherence of the test superposition, evaluated as a product
/// of 2×2 traces over the bath spins: cost linear in the spin count, no
/// dimension cap. Matches the dense block-form pipeline on small baths.
pub fn factorized_prepared_coherence(
    cfg: &NvConfig,
    c: &SystemAmplitudes,
    prep: Branch,
    tau: f64,
    pair: (Branch, Branch),
    t: f64,
) -> Result<C64, NvError> {
    Ok(factorized_coherence_trace(cfg, c, prep, tau, pair, &[t])?[0])
}

/// As [`factorized_prepared_coherence`] over a whole observation grid,
/// preparing each spin once.
pub fn factorized_coherence_trace(
    cfg: &NvConfig,
    c: &SystemAmplitudes,
    prep: Branch,
    tau: f64,
    pair: (Branch, Branch),
    grid: &[f64],
) -> Result<Vec<C64>, NvError> {
    cfg.validate()?;
    if c.len() != 3 {
        return Err(NvError::InvalidConfig(format!(
            "{} test amplitudes for a 3-pointer system",
            c.len()
        )));
    }
    let weight = c.get(pair.0.index()) * c.get(pair.1.index()).conj();

    // the prepared per-spin bath states depend on τ only
    let prepared: Vec<CMat> = initial_env(&cfg.spins)?
        .iter()
        .zip(&cfg.spins)
        .map(|(rho, spin)| {
            let u = per_spin_propagator(spin, prep, cfg, tau);
            u.dot(rho).dot(&adjoint(&u))
        })
        .collect();

    let phase_rate = if cfg.include_free_phases {
        let eps = cfg.epsilons_rad_per_us();
        eps[pair.0.index()] - eps[pair.1.index()]
    } else {
        0.0
    };

    Ok(grid
        .iter()
        .map(|&t| {
            let mut value = weight;
            for (spin, rho) in cfg.spins.iter().zip(&prepared) {
                let ui = per_spin_propagator(spin, pair.0, cfg, t);
                let uj = per_spin_propagator(spin, pair.1, cfg, t);
                let ui_rho = ui.dot(rho);
                let factor: C64 = ui_rho
                    .iter()
                    .zip(uj.iter())
                    .map(|(x, y)| x * y.conj())
                    .sum();
                value *= factor;
            }
            value * (-C64::i() * phase_rate * t).exp()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Demo sweep
// ---------------------------------------------------------------------------

/// Preparation pairs compared in the demo, physical labels (0,+1),
/// (0,−1), (−1,+1).
pub const DEMO_PREP_PAIRS: [(Branch, Branch); 3] = [
    (Branch::Zero, Branch::PlusOne),
    (Branch::Zero, Branch::MinusOne),
    (Branch::MinusOne, Branch::PlusOne),
];

/// Coherences recorded in the demo: (0,+1) and (−1,+1). Any two suffice
/// to decide every preparation pair; these are the two reported.
pub const DEMO_COHERENCES: [(Branch, Branch); 2] = [
    (Branch::Zero, Branch::PlusOne),
    (Branch::MinusOne, Branch::PlusOne),
];

/// Difference of one coherence's evolution between two preparation
/// branches, along the observation grid.
#[derive(Debug, Clone)]
pub struct DemoDiff {
    pub coherence: (Branch, Branch),
    pub prep_pair: (Branch, Branch),
    pub times: Vec<f64>,
    pub values: Vec<C64>,
}

impl DemoDiff {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

/// Runs the factorized protocol for the demo coherences and preparation
/// pairs: equal test superposition, preparation time `tau`, observation
/// times `grid`.
pub fn demo_differences(cfg: &NvConfig, tau: f64, grid: &[f64]) -> Result<Vec<DemoDiff>, NvError> {
    let c = SystemAmplitudes::equal_superposition(3);
    let mut out = Vec::new();
    for &coherence in &DEMO_COHERENCES {
        let traces: Vec<Vec<C64>> = Branch::ALL
            .iter()
            .map(|&prep| factorized_coherence_trace(cfg, &c, prep, tau, coherence, grid))
            .collect::<Result<_, _>>()?;
        for &(k, q) in &DEMO_PREP_PAIRS {
            let values = traces[k.index()]
                .iter()
                .zip(&traces[q.index()])
                .map(|(a, b)| a - b)
                .collect();
            out.push(DemoDiff {
                coherence,
                prep_pair: (k, q),
                times: grid.to_vec(),
                values,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Factorized criteria and witness
// ---------------------------------------------------------------------------

/// `tr(a·b)` for small matrices, without forming the product.
fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| a[(i, j)] * b[(j, i)])
        .sum()
}

/// Frobenius inner product `tr(a†·b)`.
fn frobenius_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Both criteria classes evaluated through the bath's product structure:
/// the same numbers the dense path produces, at cost linear in the spin
/// count. Norms are recovered from products of per-spin traces, so values
/// near zero carry a cancellation floor of roughly `√(dim·ε)`; the dense
/// route is exact there and preferable when it fits under the cap.
pub fn factorized_criteria(
    cfg: &NvConfig,
    t: f64,
    tol: f64,
) -> Result<crate::criteria::CriteriaReport, NvError> {
    cfg.validate()?;
    let n = cfg.spins.len();
    let rhos = initial_env(&cfg.spins)?;
    let props: Vec<[CMat; 3]> = cfg
        .spins
        .iter()
        .map(|spin| {
            [
                per_spin_propagator(spin, Branch::MinusOne, cfg, t),
                per_spin_propagator(spin, Branch::Zero, cfg, t),
                per_spin_propagator(spin, Branch::PlusOne, cfg, t),
            ]
        })
        .collect();

    // conditional bath states per spin and branch
    let conditional: Vec<[CMat; 3]> = props
        .iter()
        .zip(&rhos)
        .map(|(us, rho)| {
            [0, 1, 2].map(|b| {
                let u = &us[b];
                u.dot(rho).dot(&adjoint(u))
            })
        })
        .collect();

    // ‖R_kk − R_00‖² = Π tr(r_k²) + Π tr(r_0²) − 2 Π tr(r_k r_0)
    let class_one = (1..3)
        .map(|k| {
            let mut nk = 1.0;
            let mut n0 = 1.0;
            let mut inner = 1.0;
            for cond in &conditional {
                nk *= trace_product(&cond[k], &cond[k]).re;
                n0 *= trace_product(&cond[0], &cond[0]).re;
                inner *= trace_product(&cond[k], &cond[0]).re;
            }
            crate::criteria::ClassOneEntry {
                k,
                l: 0,
                distance: (nk + n0 - 2.0 * inner).max(0.0).sqrt(),
            }
        })
        .collect();

    // single canonical quadruple (1, 0, 2, 0):
    // ‖[PQ]‖² = 2·2^n − 2 Re Π tr((p_j q_j)† (q_j p_j))
    let mut cross = C64::new(1.0, 0.0);
    for us in &props {
        let p = us[1].dot(&adjoint(&us[0]));
        let q = us[2].dot(&adjoint(&us[0]));
        cross *= frobenius_inner(&p.dot(&q), &q.dot(&p));
    }
    let norm_sq = 2.0 * 2f64.powi(n as i32) - 2.0 * cross.re;
    let class_two = vec![crate::criteria::ClassTwoEntry {
        i: 1,
        j: 0,
        k: 2,
        l: 0,
        commutator_norm: norm_sq.max(0.0).sqrt(),
    }];

    Ok(crate::criteria::classify(t, tol, class_one, class_two))
}

/// Full witness protocol on the factorized path: equal test
/// superposition, every preparation branch, every coherence pair. Yields
/// the same report the dense scan produces, without the dimension cap.
pub fn factorized_witness_scan(
    cfg: &NvConfig,
    tau: f64,
    grid: &[f64],
    firing_threshold: f64,
) -> Result<crate::witness::WitnessReport, NvError> {
    cfg.validate()?;
    let mut protocol = crate::witness::ProtocolConfig::standard(3, tau, grid.to_vec())
        .map_err(|e| NvError::InvalidConfig(e.to_string()))?;
    protocol.firing_threshold = firing_threshold;

    let c = SystemAmplitudes::equal_superposition(3);
    let pairs: Vec<(usize, usize)> = vec![(0, 1), (0, 2), (1, 2)];
    let mut traces = Vec::with_capacity(3 * pairs.len());
    for prep_idx in 0..3 {
        let prep = Branch::from_index(prep_idx).expect("three branches");
        for &(i, j) in &pairs {
            let pair = (
                Branch::from_index(i).expect("three branches"),
                Branch::from_index(j).expect("three branches"),
            );
            let values = factorized_coherence_trace(cfg, &c, prep, tau, pair, grid)?;
            traces.push(crate::witness::CoherenceTrace {
                pair: (i, j),
                prep: prep_idx,
                times: grid.to_vec(),
                values,
            });
        }
    }
    Ok(crate::witness::report_from_traces(
        traces,
        &[0, 1, 2],
        &pairs,
        firing_threshold,
    ))
}

// ---------------------------------------------------------------------------
// Spin tables
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SpinRecord {
    r_nm: f64,
    a_zx: f64,
    a_zy: f64,
    a_zz: f64,
    p: f64,
}

/// Reads a spin table: delimited text with header
/// `r_nm,a_zx,a_zy,a_zz,p`, couplings in rad/µs.
pub fn read_spin_table<R: Read>(reader: R) -> Result<Vec<NuclearSpin>, NvError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    {
        let headers = csv_reader
            .headers()
            .map_err(|e| NvError::ParseError {
                row: 0,
                message: e.to_string(),
            })?
            .clone();
        let expected = ["r_nm", "a_zx", "a_zy", "a_zz", "p"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(NvError::ParseError {
                row: 0,
                message: format!("expected header {:?}, got {:?}", expected.join(","), headers),
            });
        }
    }
    let mut spins = Vec::new();
    for (i, record) in csv_reader.deserialize::<SpinRecord>().enumerate() {
        let record = record.map_err(|e| NvError::ParseError {
            row: i + 1,
            message: e.to_string(),
        })?;
        let spin = NuclearSpin {
            distance_nm: record.r_nm,
            a_zx: record.a_zx,
            a_zy: record.a_zy,
            a_zz: record.a_zz,
            polarization: record.p,
            position_nm: None,
        };
        spin.validate().map_err(|e| NvError::ParseError {
            row: i + 1,
            message: e.to_string(),
        })?;
        spins.push(spin);
    }
    Ok(spins)
}

pub fn load_spin_table(path: impl AsRef<Path>) -> Result<Vec<NuclearSpin>, NvError> {
    let file = fs::File::open(path)?;
    read_spin_table(file)
}

/// Writes a spin table in the format [`read_spin_table`] accepts.
pub fn write_spin_table<W: IoWrite>(mut out: W, spins: &[NuclearSpin]) -> Result<(), NvError> {
    out.write_all(b"r_nm,a_zx,a_zy,a_zz,p\n")?;
    for s in spins {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.distance_nm, s.a_zx, s.a_zy, s.a_zz, s.polarization
        )?;
    }
    Ok(())
}

pub fn save_spin_table(path: impl AsRef<Path>, spins: &[NuclearSpin]) -> Result<(), NvError> {
    let mut buf = Vec::new();
    write_spin_table(&mut buf, spins)?;
    fs::write(path, buf)?;
    Ok(())
}

/// The bundled fourteen-spin demo bath (unpolarized; set polarizations
/// per run).
pub fn demo_bath() -> Vec<NuclearSpin> {
    read_spin_table(include_str!("../data/nv_demo_bath.csv").as_bytes())
        .expect("bundled bath table is valid")
}

/// Deterministic random bath: positions uniform over the spherical shell
/// `r_min ≤ r ≤ r_max` (nm), couplings from [`dipolar_couplings`] with
/// the physical electron gyromagnetic ratio, polarization zero.
pub fn random_spins(
    seed: u64,
    count: usize,
    r_min_nm: f64,
    r_max_nm: f64,
) -> Result<Vec<NuclearSpin>, NvError> {
    if !(r_min_nm > MIN_DISTANCE_NM && r_max_nm > r_min_nm) {
        return Err(NvError::InvalidRange { r_min_nm, r_max_nm });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            // uniform density in the shell: CDF linear in r³
            let u: f64 = rng.random();
            let r = (r_min_nm.powi(3) + u * (r_max_nm.powi(3) - r_min_nm.powi(3))).cbrt();
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..TAU);
            let s = (1.0 - z * z).sqrt();
            let pos = [r * s * phi.cos(), r * s * phi.sin(), r * z];
            let (a_zx, a_zy, a_zz) =
                dipolar_couplings(pos, GAMMA_E_DIPOLAR_MHZ_PER_T, GAMMA_N_MHZ_PER_T)?;
            Ok(NuclearSpin {
                distance_nm: r,
                a_zx,
                a_zy,
                a_zz,
                polarization: 0.0,
                position_nm: Some(pos),
            })
        })
        .collect()
}
