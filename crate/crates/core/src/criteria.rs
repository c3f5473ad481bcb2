//! The two classes of separability criteria for block-form joint states,
//! and a negativity cross-check on small instances.
//!
//! Class one compares the conditional environment states pairwise: any
//! difference between `R_kk(t)` and `R_ll(t)` certifies entanglement. Class
//! two checks commutation between products of different conditional
//! propagators and is a pure operator statement, independent of the
//! initial environment state. For states in block form, passing both
//! classes is necessary and sufficient for separability, which is what the
//! negativity cross-check exercises.
//!
//! Anchoring one index at pointer state 0 yields the independent subsets:
//! N−1 class-one pairs and (N−1)(N−2)/2 class-two quadruples. Exhaustive
//! scans over all pairs/quadruples are provided as a verification mode.
//! Free pointer phases cancel in both classes, so all checks here run with
//! them off.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, adjoint, commutator, ensure_density_matrix, frobenius_distance, frobenius_norm, CMat,
    LinalgError, DENSE_DIM_CAP,
};
use crate::model::{ConditionalPropagators, ModelError, PureDephasingModel, SystemAmplitudes};

/// Default Frobenius tolerance for both criteria classes.
pub const DEFAULT_CRITERIA_TOL: f64 = 1e-8;

/// Negativities at or below this are treated as zero by the oracle.
pub const NEGATIVITY_ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outcome of the criteria evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Separable,
    EntangledClassOne,
    EntangledClassTwoOnly,
    EntangledBoth,
}

impl Verdict {
    pub fn is_entangled(self) -> bool {
        self != Verdict::Separable
    }
}

/// Distance between the conditional environment states of pointer pair
/// `(k, l)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassOneEntry {
    pub k: usize,
    pub l: usize,
    pub distance: f64,
}

/// Frobenius norm of `[w_i w_j†, w_k w_l†]` for the index quadruple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassTwoEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub commutator_norm: f64,
}

/// Canonical class-one and class-two results plus the verdict they imply
/// at the given tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub time: f64,
    pub tolerance: f64,
    pub class_one: Vec<ClassOneEntry>,
    pub class_two: Vec<ClassTwoEntry>,
    pub verdict: Verdict,
}

fn conditional_states(
    model: &PureDephasingModel,
    r0: &CMat,
    t: f64,
) -> Result<Vec<CMat>, CriteriaError> {
    ensure_density_matrix(r0)?;
    let props = ConditionalPropagators::new(model)?;
    (0..model.n_sys())
        .map(|k| {
            let w = props.propagator(k, t, false)?;
            Ok(w.dot(r0).dot(&adjoint(&w)))
        })
        .collect()
}

/// Canonical class-one distances: pairs `(k, 0)` for `k = 1..N−1`.
pub fn class_one_check(
    model: &PureDephasingModel,
    r0: &CMat,
    t: f64,
) -> Result<Vec<ClassOneEntry>, CriteriaError> {
    let states = conditional_states(model, r0, t)?;
    Ok((1..model.n_sys())
        .map(|k| ClassOneEntry {
            k,
            l: 0,
            distance: frobenius_distance(&states[k], &states[0]),
        })
        .collect())
}

/// All `N(N−1)/2` class-one distances. Passing the canonical set at `tol`
/// bounds every exhaustive distance by `2·tol` (triangle inequality), which
/// is asserted here in debug builds.
pub fn class_one_check_exhaustive(
    model: &PureDephasingModel,
    r0: &CMat,
    t: f64,
    tol: f64,
) -> Result<Vec<ClassOneEntry>, CriteriaError> {
    let states = conditional_states(model, r0, t)?;
    let n = model.n_sys();
    let mut entries = Vec::with_capacity(n * (n - 1) / 2);
    for l in 0..n {
        for k in (l + 1)..n {
            entries.push(ClassOneEntry {
                k,
                l,
                distance: frobenius_distance(&states[k], &states[l]),
            });
        }
    }
    debug_assert!({
        let anchored = |k: usize| frobenius_distance(&states[k], &states[0]);
        entries.iter().all(|e| {
            anchored(e.k) > tol || anchored(e.l) > tol || e.distance <= 2.0 * tol + 1e-15
        })
    });
    Ok(entries)
}

fn propagators_at(model: &PureDephasingModel, t: f64) -> Result<Vec<CMat>, CriteriaError> {
    let props = ConditionalPropagators::new(model)?;
    let ws: Vec<CMat> = (0..model.n_sys())
        .map(|k| props.propagator(k, t, false))
        .collect::<Result<_, _>>()?;
    Ok(ws)
}

/// Canonical class-two commutator norms:
/// `‖[w_k w_0†, w_l w_0†]‖_F` for `1 ≤ k < l ≤ N−1`. Empty for a qubit
/// system. No initial environment state enters: this class is a pure
/// operator statement.
pub fn class_two_check(
    model: &PureDephasingModel,
    t: f64,
) -> Result<Vec<ClassTwoEntry>, CriteriaError> {
    let ws = propagators_at(model, t)?;
    let w0_dag = adjoint(&ws[0]);
    let products: Vec<CMat> = ws.iter().map(|w| w.dot(&w0_dag)).collect();
    let n = model.n_sys();
    let mut entries = Vec::new();
    for k in 1..n {
        for l in (k + 1)..n {
            entries.push(ClassTwoEntry {
                i: k,
                j: 0,
                k: l,
                l: 0,
                commutator_norm: frobenius_norm(&commutator(&products[k], &products[l])),
            });
        }
    }
    Ok(entries)
}

/// Exhaustive class-two scan over all unordered pairs of propagator
/// products `w_i w_j†` with `i ≠ j`. O(N⁴) in matrix products; intended
/// for validating the canonical set.
pub fn class_two_check_exhaustive(
    model: &PureDephasingModel,
    t: f64,
) -> Result<Vec<ClassTwoEntry>, CriteriaError> {
    let ws = propagators_at(model, t)?;
    let daggers: Vec<CMat> = ws.iter().map(adjoint).collect();
    let mut pairs = Vec::new();
    for (i, w) in ws.iter().enumerate() {
        for (j, dag) in daggers.iter().enumerate() {
            if i != j {
                pairs.push(((i, j), w.dot(dag)));
            }
        }
    }
    let mut entries = Vec::new();
    for a in 0..pairs.len() {
        for b in (a + 1)..pairs.len() {
            let ((i, j), ref pa) = pairs[a];
            let ((k, l), ref pb) = pairs[b];
            entries.push(ClassTwoEntry {
                i,
                j,
                k,
                l,
                commutator_norm: frobenius_norm(&commutator(pa, pb)),
            });
        }
    }
    Ok(entries)
}

/// Classifies evaluated criteria lists into a report.
pub fn classify(
    time: f64,
    tolerance: f64,
    class_one: Vec<ClassOneEntry>,
    class_two: Vec<ClassTwoEntry>,
) -> CriteriaReport {
    let class_one_violated = class_one.iter().any(|e| e.distance > tolerance);
    let class_two_violated = class_two.iter().any(|e| e.commutator_norm > tolerance);
    let verdict = match (class_one_violated, class_two_violated) {
        (false, false) => Verdict::Separable,
        (true, false) => Verdict::EntangledClassOne,
        (false, true) => Verdict::EntangledClassTwoOnly,
        (true, true) => Verdict::EntangledBoth,
    };
    CriteriaReport {
        time,
        tolerance,
        class_one,
        class_two,
        verdict,
    }
}

/// Evaluates both canonical criteria sets and classifies the state.
pub fn separability_verdict(
    model: &PureDephasingModel,
    r0: &CMat,
    t: f64,
    tol: f64,
) -> Result<CriteriaReport, CriteriaError> {
    let class_one = class_one_check(model, r0, t)?;
    let class_two = class_two_check(model, t)?;
    Ok(classify(t, tol, class_one, class_two))
}

/// Verdict of a criteria evaluation checked against the negativity of the
/// densely assembled state.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCrosscheck {
    pub report: CriteriaReport,
    pub negativity: f64,
    /// True iff the verdict and the negativity agree: separable exactly
    /// when the negativity is at most [`NEGATIVITY_ORACLE_TOL`].
    pub consistent: bool,
}

/// Runs [`separability_verdict`] and the dense negativity on the same
/// instance. The criteria are necessary and sufficient for block-form
/// states (all amplitudes nonzero), so disagreement flags a defect.
pub fn oracle_crosscheck(
    model: &PureDephasingModel,
    c: &SystemAmplitudes,
    r0: &CMat,
    t: f64,
    tol: f64,
) -> Result<OracleCrosscheck, CriteriaError> {
    oracle_crosscheck_with_cap(model, c, r0, t, tol, DENSE_DIM_CAP)
}

/// As [`oracle_crosscheck`] with an explicit cap on the assembled
/// dimension `N·d`.
pub fn oracle_crosscheck_with_cap(
    model: &PureDephasingModel,
    c: &SystemAmplitudes,
    r0: &CMat,
    t: f64,
    tol: f64,
    dense_cap: usize,
) -> Result<OracleCrosscheck, CriteriaError> {
    let dim = model.n_sys() * model.dim_env();
    if dim > dense_cap {
        return Err(CriteriaError::Linalg(LinalgError::DenseCapExceeded {
            dim,
            cap: dense_cap,
        }));
    }
    if c.iter().any(|z| z.norm() == 0.0) {
        return Err(CriteriaError::Model(ModelError::InvalidModel(
            "a zero amplitude removes that pointer state from the entanglement question"
                .into(),
        )));
    }
    let report = separability_verdict(model, r0, t, tol)?;
    let state = model.evolve(c, r0, t)?;
    let negativity = linalg::negativity(&state.assemble(), model.n_sys(), model.dim_env())?;
    let consistent = (report.verdict == Verdict::Separable) == (negativity <= NEGATIVITY_ORACLE_TOL);
    Ok(OracleCrosscheck {
        report,
        negativity,
        consistent,
    })
}
