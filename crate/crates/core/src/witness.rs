//! Measurement-only detection protocol for system-environment
//! entanglement.
//!
//! The system is prepared in a pointer state and left to evolve for a
//! preparation time, which steers the environment into the corresponding
//! conditional state. A test superposition is then excited and the system
//! coherences are recorded as a function of the time elapsed since the
//! excitation. If any coherence evolves differently for two preparation
//! pointer states, the conditional environment states at the preparation
//! time differ, so an undisturbed superposition of those pointer states
//! would have been entangled with the environment at that time.
//!
//! A negative outcome certifies nothing: the protocol is blind whenever
//! all conditional propagators commute, and to entanglement that violates
//! only the commutation-class criteria.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    adjoint, commutator, ensure_density_matrix, frobenius_norm, CMat, C64, LinalgError,
};
use crate::model::{ConditionalPropagators, ModelError, PureDephasingModel, SystemAmplitudes};

/// Default threshold on `|ρ^{(k)} − ρ^{(q)}|` above which a preparation
/// pair counts as fired: far above numerical noise, far below the
/// physical signals the protocol is meant to resolve.
pub const DEFAULT_FIRING_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("witness comparison needs at least two preparation states, got {0}")]
    InsufficientPrepStates(usize),
    #[error("invalid protocol config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Parameters of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Preparation time: how long the environment evolves next to each
    /// preparation pointer state before the test superposition is excited.
    pub tau: f64,
    /// Pointer states used in the preparation stage.
    pub prep_states: Vec<usize>,
    /// Test superposition excited after preparation.
    pub test_amplitudes: SystemAmplitudes,
    /// Post-excitation observation times, strictly increasing, all ≥ 0.
    pub time_grid: Vec<f64>,
    pub firing_threshold: f64,
    /// Include pointer free phases in the traces. Common phase factors
    /// cancel in same-coherence comparisons, so firing is unaffected.
    pub include_free_phases: bool,
}

impl ProtocolConfig {
    /// All pointer states prepared, equal test superposition, default
    /// firing threshold, free phases off.
    pub fn standard(n_sys: usize, tau: f64, time_grid: Vec<f64>) -> Result<Self, WitnessError> {
        let cfg = Self {
            tau,
            prep_states: (0..n_sys).collect(),
            test_amplitudes: SystemAmplitudes::equal_superposition(n_sys),
            time_grid,
            firing_threshold: DEFAULT_FIRING_THRESHOLD,
            include_free_phases: false,
        };
        cfg.validate(n_sys)?;
        Ok(cfg)
    }

    pub fn validate(&self, n_sys: usize) -> Result<(), WitnessError> {
        if self.time_grid.is_empty() {
            return Err(WitnessError::InvalidConfig("empty time grid".into()));
        }
        if !self.time_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(WitnessError::InvalidConfig(
                "time grid must be strictly increasing".into(),
            ));
        }
        if self.time_grid[0] < 0.0 {
            return Err(WitnessError::InvalidConfig(
                "time grid must be nonnegative".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for &k in &self.prep_states {
            if k >= n_sys {
                return Err(WitnessError::InvalidConfig(format!(
                    "preparation state {k} out of range for {n_sys} pointer states"
                )));
            }
            if !seen.insert(k) {
                return Err(WitnessError::InvalidConfig(format!(
                    "preparation state {k} listed twice"
                )));
            }
        }
        if self.test_amplitudes.len() != n_sys {
            return Err(WitnessError::InvalidConfig(format!(
                "{} test amplitudes for {n_sys} pointer states",
                self.test_amplitudes.len()
            )));
        }
        Ok(())
    }
}

/// One recorded coherence: pointer pair `(i, j)`, preparation state, and
/// the complex coherence values along the observation grid.
#[derive(Debug, Clone)]
pub struct CoherenceTrace {
    pub pair: (usize, usize),
    pub prep: usize,
    pub times: Vec<f64>,
    pub values: Vec<C64>,
}

/// Largest pointwise difference between the traces of one coherence for
/// two preparation states.
#[derive(Debug, Clone, Serialize)]
pub struct TraceDiff {
    pub prep_pair: (usize, usize),
    pub pair: (usize, usize),
    pub max_abs_diff: f64,
}

/// Everything one protocol run produces.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub traces: Vec<CoherenceTrace>,
    pub diffs: Vec<TraceDiff>,
    /// Preparation pairs with some coherence differing beyond threshold.
    pub fired_pairs: Vec<(usize, usize)>,
    /// Transitive closure of the fired pairs: all pointer pairs certified
    /// entangled at the preparation time.
    pub implied_entangled: Vec<(usize, usize)>,
    pub firing_threshold: f64,
}

fn check_pair(pair: (usize, usize), n_sys: usize) -> Result<(), WitnessError> {
    if pair.0 >= pair.1 || pair.1 >= n_sys {
        return Err(WitnessError::InvalidConfig(format!(
            "coherence pair ({}, {}) invalid for {n_sys} pointer states",
            pair.0, pair.1
        )));
    }
    Ok(())
}

/// `tr(a · p · b†)` without forming the second product.
fn sandwich_trace(a: &CMat, p: &CMat, b: &CMat) -> C64 {
    let ap = a.dot(p);
    ap.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

fn trace_values(
    props: &ConditionalPropagators,
    prepared: &CMat,
    c: &SystemAmplitudes,
    pair: (usize, usize),
    grid: &[f64],
    include_free_phases: bool,
) -> Result<Vec<C64>, WitnessError> {
    let weight = c.get(pair.0) * c.get(pair.1).conj();
    grid.iter()
        .map(|&t| {
            let wi = props.propagator(pair.0, t, include_free_phases)?;
            let wj = props.propagator(pair.1, t, include_free_phases)?;
            Ok(weight * sandwich_trace(&wi, prepared, &wj))
        })
        .collect()
}

/// Coherence `(i, j)` of the test superposition after preparing pointer
/// state `prep` for time `tau`: the value at elapsed time `t` is
/// `c_i c_j* tr(w_i(t) · w_prep(τ) r0 w_prep†(τ) · w_j†(t))`. Free phases
/// off; see [`prepared_trace_with_phases`].
pub fn prepared_trace(
    model: &PureDephasingModel,
    r0: &CMat,
    prep: usize,
    tau: f64,
    pair: (usize, usize),
    grid: &[f64],
    c: &SystemAmplitudes,
) -> Result<CoherenceTrace, WitnessError> {
    prepared_trace_with_phases(model, r0, prep, tau, pair, grid, c, false)
}

/// As [`prepared_trace`] with the free-phase convention explicit.
#[allow(clippy::too_many_arguments)]
pub fn prepared_trace_with_phases(
    model: &PureDephasingModel,
    r0: &CMat,
    prep: usize,
    tau: f64,
    pair: (usize, usize),
    grid: &[f64],
    c: &SystemAmplitudes,
    include_free_phases: bool,
) -> Result<CoherenceTrace, WitnessError> {
    check_pair(pair, model.n_sys())?;
    ensure_density_matrix(r0)?;
    let props = ConditionalPropagators::new(model)?;
    let w_prep = props.propagator(prep, tau, false)?;
    let prepared = w_prep.dot(r0).dot(&adjoint(&w_prep));
    let values = trace_values(&props, &prepared, c, pair, grid, include_free_phases)?;
    Ok(CoherenceTrace {
        pair,
        prep,
        times: grid.to_vec(),
        values,
    })
}

/// Runs the full protocol: traces every coherence for every preparation
/// state, compares preparation pairs pointwise, and closes the fired
/// pairs transitively.
pub fn witness_scan(
    model: &PureDephasingModel,
    r0: &CMat,
    cfg: &ProtocolConfig,
) -> Result<WitnessReport, WitnessError> {
    cfg.validate(model.n_sys())?;
    if cfg.prep_states.len() < 2 {
        return Err(WitnessError::InsufficientPrepStates(cfg.prep_states.len()));
    }
    ensure_density_matrix(r0)?;

    let n = model.n_sys();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    let props = ConditionalPropagators::new(model)?;
    let prepared: Vec<CMat> = cfg
        .prep_states
        .iter()
        .map(|&k| {
            let w = props.propagator(k, cfg.tau, false)?;
            Ok::<_, WitnessError>(w.dot(r0).dot(&adjoint(&w)))
        })
        .collect::<Result<_, _>>()?;

    let tasks: Vec<(usize, (usize, usize))> = (0..cfg.prep_states.len())
        .flat_map(|pi| pairs.iter().map(move |&p| (pi, p)))
        .collect();
    let traces: Vec<CoherenceTrace> = tasks
        .par_iter()
        .map(|&(pi, pair)| {
            let values = trace_values(
                &props,
                &prepared[pi],
                &cfg.test_amplitudes,
                pair,
                &cfg.time_grid,
                cfg.include_free_phases,
            )?;
            Ok(CoherenceTrace {
                pair,
                prep: cfg.prep_states[pi],
                times: cfg.time_grid.clone(),
                values,
            })
        })
        .collect::<Result<_, WitnessError>>()?;

    Ok(report_from_traces(
        traces,
        &cfg.prep_states,
        &pairs,
        cfg.firing_threshold,
    ))
}

/// Builds the comparison report from recorded traces. Traces must be laid
/// out preparation-major: one block of coherence pairs per preparation
/// state, same pair order within each block.
pub fn report_from_traces(
    traces: Vec<CoherenceTrace>,
    prep_states: &[usize],
    pairs: &[(usize, usize)],
    firing_threshold: f64,
) -> WitnessReport {
    let trace_of = |pi: usize, pair_idx: usize| &traces[pi * pairs.len() + pair_idx];

    let mut diffs = Vec::new();
    let mut fired = BTreeSet::new();
    for a in 0..prep_states.len() {
        for b in (a + 1)..prep_states.len() {
            let prep_pair = ordered(prep_states[a], prep_states[b]);
            for (pair_idx, &pair) in pairs.iter().enumerate() {
                let ta = trace_of(a, pair_idx);
                let tb = trace_of(b, pair_idx);
                let max_abs_diff = ta
                    .values
                    .iter()
                    .zip(&tb.values)
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                if max_abs_diff > firing_threshold {
                    fired.insert(prep_pair);
                }
                diffs.push(TraceDiff {
                    prep_pair,
                    pair,
                    max_abs_diff,
                });
            }
        }
    }

    let fired_pairs: Vec<(usize, usize)> = fired.into_iter().collect();
    let implied_entangled = implied_pairs_closure(&fired_pairs);
    WitnessReport {
        traces,
        diffs,
        fired_pairs,
        implied_entangled,
        firing_threshold,
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Transitive closure of detected pairs: a pointer state entangled with
/// two others certifies those two as an entangled pair as well, so each
/// connected component of the fired-pair graph contributes all of its
/// internal pairs.
pub fn implied_pairs_closure(fired: &[(usize, usize)]) -> Vec<(usize, usize)> {
    // union-find over the pointer states that appear
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    fn root(parent: &mut BTreeMap<usize, usize>, mut x: usize) -> usize {
        while parent[&x] != x {
            let up = parent[&parent[&x]];
            parent.insert(x, up);
            x = up;
        }
        x
    }
    for &(a, b) in fired {
        parent.entry(a).or_insert(a);
        parent.entry(b).or_insert(b);
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent.insert(ra.max(rb), ra.min(rb));
        }
    }
    let nodes: Vec<usize> = parent.keys().cloned().collect();
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for x in nodes {
        let r = root(&mut parent, x);
        components.entry(r).or_default().push(x);
    }
    let mut out = Vec::new();
    for members in components.values() {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                out.push(ordered(a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Commutation analysis of the conditional propagators over a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct UndetectabilityReport {
    /// Every pair of conditional propagators commutes at every grid time,
    /// so the witness cannot fire for any preparation pair.
    pub all_commuting: bool,
    /// Pointer pairs whose propagators commute at every grid time.
    pub commuting_pairs: Vec<(usize, usize)>,
}

/// Flags the protocol's blind spot: pointer pairs whose conditional
/// propagators commute throughout the grid leave no trace in the system's
/// coherence evolution even when class-one entanglement is present.
pub fn undetectability_analysis(
    model: &PureDephasingModel,
    grid: &[f64],
    tol: f64,
) -> Result<UndetectabilityReport, WitnessError> {
    let props = ConditionalPropagators::new(model)?;
    let n = model.n_sys();
    let mut commuting_pairs = Vec::new();
    for k in 0..n {
        for l in (k + 1)..n {
            let mut commutes = true;
            for &t in grid {
                let wk = props.propagator(k, t, false)?;
                let wl = props.propagator(l, t, false)?;
                if frobenius_norm(&commutator(&wk, &wl)) > tol {
                    commutes = false;
                    break;
                }
            }
            if commutes {
                commuting_pairs.push((k, l));
            }
        }
    }
    let all_commuting = commuting_pairs.len() == n * (n - 1) / 2;
    Ok(UndetectabilityReport {
        all_commuting,
        commuting_pairs,
    })
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Writes one trace as CSV: `t,prep_k,i,j,re,im`, LF line endings.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &CoherenceTrace) -> io::Result<()> {
    out.write_all(b"t,prep_k,i,j,re,im\n")?;
    for (t, v) in trace.times.iter().zip(&trace.values) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t, trace.prep, trace.pair.0, trace.pair.1, v.re, v.im
        )?;
    }
    Ok(())
}

/// Writes every preparation-pair difference curve as CSV:
/// `t,k,q,i,j,re_diff,im_diff`, grouped by preparation pair then
/// coherence, time ascending within each group.
pub fn write_differences_csv<W: Write>(mut out: W, report: &WitnessReport) -> io::Result<()> {
    out.write_all(b"t,k,q,i,j,re_diff,im_diff\n")?;
    let mut by_key: BTreeMap<(usize, (usize, usize)), &CoherenceTrace> = BTreeMap::new();
    for trace in &report.traces {
        by_key.insert((trace.prep, trace.pair), trace);
    }
    let mut prep_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for d in &report.diffs {
        prep_pairs.insert(d.prep_pair);
        pairs.insert(d.pair);
    }
    for &(k, q) in &prep_pairs {
        for &pair in &pairs {
            let (Some(ta), Some(tb)) = (by_key.get(&(k, pair)), by_key.get(&(q, pair))) else {
                continue;
            };
            for ((t, va), vb) in ta.times.iter().zip(&ta.values).zip(&tb.values) {
                let d = va - vb;
                writeln!(out, "{},{},{},{},{},{},{}", t, k, q, pair.0, pair.1, d.re, d.im)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn maximally_mixed(d: usize) -> CMat {
        identity(d).mapv(|z| z / d as f64)
    }

    fn grid(n: usize, stop: f64) -> Vec<f64> {
        (0..n).map(|i| stop * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn trace_at_zero_elapsed_time_is_the_bare_coherence() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let model = random::model(&mut rng, 3, 4, 1.0);
        let r0 = random::density(&mut rng, 4);
        let c = random::amplitudes(&mut rng, 3, 0.1);
        for prep in 0..3 {
            let tr = prepared_trace(&model, &r0, prep, 2.0, (0, 2), &[0.0], &c).unwrap();
            let expected = c.get(0) * c.get(2).conj();
            assert!((tr.values[0] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn maximally_mixed_environment_hides_the_preparation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let model = random::model(&mut rng, 3, 2, 1.0);
        let c = SystemAmplitudes::equal_superposition(3);
        let g = grid(7, 3.0);
        let r0 = maximally_mixed(2);
        let t0 = prepared_trace(&model, &r0, 0, 1.5, (0, 1), &g, &c).unwrap();
        let t1 = prepared_trace(&model, &r0, 1, 1.5, (0, 1), &g, &c).unwrap();
        let t2 = prepared_trace(&model, &r0, 2, 1.5, (0, 1), &g, &c).unwrap();
        for i in 0..g.len() {
            assert!((t0.values[i] - t1.values[i]).norm() < 1e-13);
            assert!((t0.values[i] - t2.values[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn coherence_values_respect_the_damping_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let model = random::model(&mut rng, 3, 4, 1.0);
        let r0 = random::density(&mut rng, 4);
        let c = random::amplitudes(&mut rng, 3, 0.1);
        let tr = prepared_trace(&model, &r0, 1, 2.0, (1, 2), &grid(20, 5.0), &c).unwrap();
        let bound = c.get(1).norm() * c.get(2).norm();
        for v in &tr.values {
            assert!(v.norm() <= bound + 1e-12);
        }
    }

    #[test]
    fn scan_requires_two_preparation_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let model = random::model(&mut rng, 2, 2, 1.0);
        let r0 = random::density(&mut rng, 2);
        let mut cfg = ProtocolConfig::standard(2, 1.0, grid(4, 2.0)).unwrap();
        cfg.prep_states = vec![0];
        assert!(matches!(
            witness_scan(&model, &r0, &cfg),
            Err(WitnessError::InsufficientPrepStates(1))
        ));
    }

    #[test]
    fn commuting_propagators_never_fire() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let model = random::commuting_model(&mut rng, 3, 3, 1.0);
        let r0 = random::density(&mut rng, 3);
        let cfg = ProtocolConfig::standard(3, 2.0, grid(25, 4.0)).unwrap();
        let report = witness_scan(&model, &r0, &cfg).unwrap();
        assert!(report.fired_pairs.is_empty());
        assert!(report.implied_entangled.is_empty());
        for d in &report.diffs {
            assert!(d.max_abs_diff < 1e-12);
        }
        // ... yet class-one entanglement is present (the blind spot)
        let c1 = crate::criteria::class_one_check(&model, &r0, 2.0).unwrap();
        assert!(c1.iter().any(|e| e.distance > 1e-3));
    }

    #[test]
    fn maximally_mixed_environment_never_fires() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let model = random::model(&mut rng, 3, 2, 1.0);
        let cfg = ProtocolConfig::standard(3, 2.0, grid(15, 4.0)).unwrap();
        let report = witness_scan(&model, &maximally_mixed(2), &cfg).unwrap();
        assert!(report.fired_pairs.is_empty());
    }

    #[test]
    fn generic_model_fires_and_closure_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let model = random::model(&mut rng, 3, 2, 1.0);
        let r0 = random::density(&mut rng, 2);
        let cfg = ProtocolConfig::standard(3, 2.0, grid(15, 4.0)).unwrap();
        let report = witness_scan(&model, &r0, &cfg).unwrap();
        assert!(!report.fired_pairs.is_empty());
        for pair in &report.fired_pairs {
            assert!(report.implied_entangled.contains(pair));
        }
    }

    #[test]
    fn free_phases_do_not_change_what_fires() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let model = random::model(&mut rng, 3, 2, 1.0);
        let r0 = random::density(&mut rng, 2);
        let mut cfg = ProtocolConfig::standard(3, 1.5, grid(12, 3.0)).unwrap();
        let plain = witness_scan(&model, &r0, &cfg).unwrap();
        cfg.include_free_phases = true;
        let phased = witness_scan(&model, &r0, &cfg).unwrap();
        assert_eq!(plain.fired_pairs, phased.fired_pairs);
        for (a, b) in plain.diffs.iter().zip(&phased.diffs) {
            assert!((a.max_abs_diff - b.max_abs_diff).abs() < 1e-10);
        }
    }

    #[test]
    fn closure_examples() {
        assert!(implied_pairs_closure(&[]).is_empty());
        assert_eq!(implied_pairs_closure(&[(0, 1)]), vec![(0, 1)]);
        assert_eq!(
            implied_pairs_closure(&[(0, 1), (0, 2)]),
            vec![(0, 1), (0, 2), (1, 2)]
        );
        // two disjoint components stay disjoint
        assert_eq!(
            implied_pairs_closure(&[(0, 1), (2, 3)]),
            vec![(0, 1), (2, 3)]
        );
    }

    #[test]
    fn undetectability_flags_commuting_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let g = grid(8, 3.0);
        let commuting = random::commuting_model(&mut rng, 3, 3, 1.0);
        let report = undetectability_analysis(&commuting, &g, 1e-10).unwrap();
        assert!(report.all_commuting);
        assert_eq!(report.commuting_pairs.len(), 3);

        let generic = random::model(&mut rng, 3, 3, 1.0);
        let report = undetectability_analysis(&generic, &g, 1e-10).unwrap();
        assert!(!report.all_commuting);
    }

    #[test]
    fn config_validation_rejects_bad_grids_and_preps() {
        assert!(ProtocolConfig::standard(3, 1.0, vec![]).is_err());
        assert!(ProtocolConfig::standard(3, 1.0, vec![0.0, 0.0]).is_err());
        assert!(ProtocolConfig::standard(3, 1.0, vec![-1.0, 0.0]).is_err());
        let mut cfg = ProtocolConfig::standard(3, 1.0, vec![0.0, 1.0]).unwrap();
        cfg.prep_states = vec![0, 3];
        assert!(cfg.validate(3).is_err());
        cfg.prep_states = vec![1, 1];
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn trace_csv_format_is_stable() {
        let trace = CoherenceTrace {
            pair: (0, 1),
            prep: 2,
            times: vec![0.0, 0.5],
            values: vec![C64::new(0.5, 0.0), C64::new(0.25, -0.125)],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,prep_k,i,j,re,im\n0,2,0,1,0.5,0\n0.5,2,0,1,0.25,-0.125\n"
        );
    }
}
