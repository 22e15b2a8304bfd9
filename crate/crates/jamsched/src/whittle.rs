//! Single-channel subsidy relaxation and the closed-form channel index.
//!
//! Consider one channel in isolation, attacked or left alone at every step,
//! where skipping the attack earns a constant subsidy `z`. The optimal rule
//! is a threshold in the holding time: attack iff `τ ≥ ℓ(z)`. The index
//! `o(j)` is the subsidy making "attack" and "don't attack" equally
//! attractive at holding time `j`; ranking channels by `o(τ)` gives a policy
//! that is asymptotically optimal as the number of channels grows.
//!
//! Balancing the long-run rewards of the two threshold policies `j` and
//! `j+1` gives a linear equation in `o(j)`,
//!
//! ```text
//! v(j)·[α(j)·o + S(j)] = v(j+1)·[α(j+1)·o + S'(j)]
//! ```
//!
//! with `α(j) = (1−(1−ε)^j)/ε`, `v(j)` the reciprocal of the expected
//! return time to holding time 0 under the threshold-`j` policy, and
//! `S, S'` trace sums over the pre- and post-threshold phases. Solved and
//! simplified, the index has the cancellation-free form
//!
//! ```text
//! o(j) = (ε − ε̲)·[ ε̲·(1−(1−ε)^{j+1})/ε · B(j) − H(j) ]
//! H(j) = Σ_{n=0..j}  Tr(h^n(P̂))·(1−ε)^n
//! B(j) = Σ_{n≥0}     Tr(h^{j+1+n}(P̂))·(1−ε̲)^n
//! ```
//!
//! which this module evaluates. The raw ratio's denominator
//! `v(j)α(j) − v(j+1)α(j+1)` decays like `(1−ε)^j`, so in double precision
//! the balance equation stops being solvable once that difference falls
//! under machine epsilon; indices past that point are reported as
//! numerically unreliable rather than returned as garbage.
//!
//! Everything here is cross-checked by [`index_oracle`], which recovers the
//! same number with no shared algebra: a binary search for the subsidy at
//! which the solved single-channel policy stops attacking state `j`.

use serde::Serialize;
use thiserror::Error;

use crate::model::System;

/// Relative conditioning floor on the balance-equation denominator: half a
/// machine epsilon, the point where double precision loses the difference
/// between `v(j)α(j)` and `v(j+1)α(j+1)`.
pub const COND_FLOOR: f64 = f64::EPSILON / 2.0;
/// Default relative truncation tolerance for the geometric trace tails.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Hard cap on index positions when building a table.
const MAX_TABLE_LEN: usize = 512;
/// Iteration safety cap for single-arm value iteration.
const ARM_MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Error)]
pub enum WhittleError {
    #[error(
        "index of {label} at holding time {j} is numerically unreliable: the balance-equation \
         denominator is below the double-precision conditioning floor"
    )]
    NumericallyUnreliable { label: String, j: usize },
    #[error("single-arm value iteration did not converge within {iterations} sweeps (span {span:.3e})")]
    NonConvergence { iterations: usize, span: f64 },
    #[error("single-arm optimal policy is not a threshold policy: {detail}")]
    NonThresholdPolicy { detail: String },
    #[error("subsidy bracket for state {j} not found below {hi:.3e}")]
    BracketNotFound { j: usize, hi: f64 },
    #[error("index table of {label} is not nondecreasing at j={j}: {prev} then {next}")]
    NonMonotoneIndex {
        label: String,
        j: usize,
        prev: f64,
        next: f64,
    },
}

/// Expected return time to holding time 0 under the threshold-`j` policy:
/// a geometric phase at rate ε below the threshold, then one at rate ε̲.
fn mean_return_time(eps: f64, epsa: f64, j: usize) -> f64 {
    let u = (1.0 - eps).powi(j as i32);
    (1.0 - u) / eps + u / epsa
}

/// Stationary probability of holding time 0 under the threshold-`j`
/// single-channel policy; interpolates between ε̲ (j = 0) and ε (j → ∞).
pub fn v_stationary(eps: f64, epsa: f64, j: usize) -> f64 {
    1.0 / mean_return_time(eps, epsa, j)
}

/// Closed-form index `o(j)`, or [`WhittleError::NumericallyUnreliable`] when
/// the balance equation is unsolvable in double precision at this `j`.
pub fn whittle_index(system: &System, j: usize, tail_tol: f64) -> Result<f64, WhittleError> {
    let eps = system.model.arrival_rate;
    let epsa = system.model.attacked_rate;

    // Conditioning check on the raw denominator v(j)α(j) − v(j+1)α(j+1).
    // Its exact value is u_j / (ε̲ m_j m_{j+1}) with m the mean return time,
    // so the check itself does not suffer the cancellation it detects.
    let u_j = (1.0 - eps).powi(j as i32);
    let m_j = mean_return_time(eps, epsa, j);
    let m_j1 = mean_return_time(eps, epsa, j + 1);
    let den = u_j / (epsa * m_j * m_j1);
    let v_alpha = |jj: usize, m: f64| (1.0 - (1.0 - eps).powi(jj as i32)) / (eps * m);
    let scale = v_alpha(j, m_j).max(v_alpha(j + 1, m_j1));
    if den < COND_FLOOR * scale {
        return Err(WhittleError::NumericallyUnreliable {
            label: system.model.label.clone(),
            j,
        });
    }

    let mut cache = system.steady.trace_cache(&system.model);

    // Head sum H(j) over the pre-threshold phase.
    let mut head = 0.0;
    let mut w = 1.0;
    for n in 0..=j {
        head += cache.get(n) * w;
        w *= 1.0 - eps;
    }

    // Tail sum B(j) over the attacked phase, truncated once terms stop
    // contributing at tail_tol, plus a geometric estimate of the remainder.
    let rho = 1.0 - epsa;
    let ratio = system.model.tail_ratio();
    let mut tail = 0.0;
    let mut wp = 1.0;
    let mut n = 0usize;
    loop {
        let term = cache.get(j + 1 + n) * wp;
        tail += term;
        if n > 0 && term < tail_tol * tail {
            if ratio < 1.0 {
                tail += term * ratio / (1.0 - ratio);
            }
            break;
        }
        wp *= rho;
        n += 1;
        if n > 200_000 {
            break; // tail_tol is met long before this for any validated model
        }
    }

    let u_j1 = (1.0 - eps).powi(j as i32 + 1);
    Ok((eps - epsa) * (epsa * (1.0 - u_j1) / eps * tail - head))
}

/// Index values for holding times `0..=j_max`, where `j_max` is the last
/// numerically reliable position.
#[derive(Debug, Clone, Serialize)]
pub struct IndexTable {
    pub label: String,
    pub values: Vec<f64>,
    pub j_max: usize,
}

impl IndexTable {
    /// Computes indices until they become unreliable (or a hard cap), and
    /// verifies they are nondecreasing along the way.
    pub fn build(system: &System, tail_tol: f64) -> Result<Self, WhittleError> {
        let mut values: Vec<f64> = Vec::new();
        for j in 0..MAX_TABLE_LEN {
            match whittle_index(system, j, tail_tol) {
                Ok(v) => {
                    if let Some(&prev) = values.last() {
                        if v < prev - 1e-9 * prev.abs().max(1.0) {
                            return Err(WhittleError::NonMonotoneIndex {
                                label: system.model.label.clone(),
                                j,
                                prev,
                                next: v,
                            });
                        }
                    }
                    values.push(v);
                }
                Err(WhittleError::NumericallyUnreliable { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        let j_max = values.len().saturating_sub(1);
        Ok(Self {
            label: system.model.label.clone(),
            values,
            j_max,
        })
    }

    /// Index at `τ`, clamped to the last reliable position. Holding times
    /// beyond `j_max` share that value; callers break the tie by `τ` itself
    /// (the index is nondecreasing, so a longer holding time is never less
    /// urgent).
    pub fn value_clamped(&self, tau: usize) -> f64 {
        self.values[tau.min(self.j_max)]
    }

    /// CSV rows `j,o_j,reliable` for `j = 0..=upto`; unreliable positions
    /// have an empty value field.
    pub fn to_csv(&self, upto: usize) -> String {
        let mut out = String::from("j,o_j,reliable\n");
        for j in 0..=upto {
            if j < self.values.len() {
                out.push_str(&format!("{},{},true\n", j, self.values[j]));
            } else {
                out.push_str(&format!("{},,false\n", j));
            }
        }
        out
    }
}

/// One channel plus a constant subsidy for not attacking, on holding times
/// `{0..=trunc}` with the failed transition clamped at `trunc`.
#[derive(Debug, Clone)]
pub struct SubsidyArm<'a> {
    pub system: &'a System,
    pub subsidy: f64,
    pub trunc: usize,
}

/// Result of solving a subsidy arm.
#[derive(Debug, Clone)]
pub struct SingleArmSolution {
    pub gain: f64,
    /// Smallest holding time at which the optimal rule attacks;
    /// `trunc + 1` means "never attack".
    pub threshold: usize,
    pub iterations: usize,
    pub span_at_exit: f64,
}

struct ArmChain {
    traces: Vec<f64>,
    eps: f64,
    epsa: f64,
    subsidy: f64,
}

impl ArmChain {
    fn new(arm: &SubsidyArm) -> Self {
        let mut cache = arm.system.steady.trace_cache(&arm.system.model);
        let traces = (0..=arm.trunc).map(|j| cache.get(j)).collect();
        Self {
            traces,
            eps: arm.system.model.arrival_rate,
            epsa: arm.system.model.attacked_rate,
            subsidy: arm.subsidy,
        }
    }

    /// Relative value iteration, normalized at holding time 0. `fixed`
    /// evaluates the given threshold policy instead of optimizing.
    ///
    /// Rewards at large holding times grow like |A|^{2τ}, so the computed
    /// span bottoms out at rounding noise long before an absolute
    /// tolerance is reachable. Exit is therefore on either the computed
    /// span or the contraction certificate span₁·(1−ε̲)^{n−1}: every
    /// transition puts at least ε̲ mass on the reset state, so the span
    /// seminorm contracts at least that fast per sweep in exact arithmetic.
    fn rvi(
        &self,
        tol: f64,
        fixed: Option<usize>,
    ) -> Result<(Vec<f64>, f64, usize, f64), WhittleError> {
        let len = self.traces.len();
        let last = len - 1;
        let mut q = vec![0.0; len];
        let mut raw = vec![0.0; len];
        let contraction = 1.0 - self.epsa;
        let mut span1 = f64::INFINITY;
        let mut span = f64::INFINITY;

        for sweep in 1..=ARM_MAX_SWEEPS {
            for tau in 0..len {
                let up = (tau + 1).min(last);
                let attack = (1.0 - self.epsa) * q[up];
                let hold = self.subsidy + (1.0 - self.eps) * q[up];
                let choice = match fixed {
                    Some(threshold) => {
                        if tau >= threshold {
                            attack
                        } else {
                            hold
                        }
                    }
                    None => attack.max(hold),
                };
                raw[tau] = self.traces[tau] + choice;
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for tau in 0..len {
                let d = raw[tau] - q[tau];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            span = hi - lo;
            let gain = raw[0]; // q[0] was 0, so the diff at the reference is raw[0]
            if sweep == 1 {
                span1 = span.max(1.0);
            }
            let origin = raw[0];
            for tau in 0..len {
                q[tau] = raw[tau] - origin;
            }
            let target = tol * gain.abs().max(1.0);
            let certified = span1 * contraction.powi(sweep as i32 - 1);
            if span <= target || certified <= target {
                return Ok((q, gain, sweep, span));
            }
        }
        Err(WhittleError::NonConvergence {
            iterations: ARM_MAX_SWEEPS,
            span,
        })
    }

    /// Attack-vs-hold advantage at holding time τ given the differential
    /// value: ΔQ(τ) = (ε − ε̲)·q(τ⁺) − z.
    fn advantage(&self, q: &[f64], tau: usize) -> f64 {
        let up = (tau + 1).min(self.traces.len() - 1);
        (self.eps - self.epsa) * q[up] - self.subsidy
    }
}

/// Solves the subsidy arm by relative value iteration and extracts the
/// threshold of the optimal rule, verifying it actually has threshold form.
pub fn single_arm_solve(arm: &SubsidyArm, tol: f64) -> Result<SingleArmSolution, WhittleError> {
    let chain = ArmChain::new(arm);
    let (q, gain, iterations, span_at_exit) = chain.rvi(tol, None)?;

    // ΔQ is nondecreasing iff q is; a threshold policy then follows. Allow
    // convergence-level slack before declaring a structure violation.
    let slack = 10.0 * tol * q.last().map(|v| v.abs()).unwrap_or(1.0).max(1.0);
    for tau in 0..q.len() - 1 {
        if q[tau + 1] < q[tau] - slack {
            return Err(WhittleError::NonThresholdPolicy {
                detail: format!(
                    "differential value decreases from {} to {} at holding time {}",
                    q[tau],
                    q[tau + 1],
                    tau
                ),
            });
        }
    }
    let threshold = (0..q.len())
        .find(|&tau| chain.advantage(&q, tau) >= 0.0)
        .unwrap_or(q.len());
    Ok(SingleArmSolution {
        gain,
        threshold,
        iterations,
        span_at_exit,
    })
}

/// Long-run average reward of the fixed threshold-`threshold` rule on the
/// subsidy arm (policy evaluation, no optimization).
pub fn threshold_policy_gain(
    arm: &SubsidyArm,
    threshold: usize,
    tol: f64,
) -> Result<f64, WhittleError> {
    let chain = ArmChain::new(arm);
    let (_, gain, _, _) = chain.rvi(tol, Some(threshold))?;
    Ok(gain)
}

/// Truncation level at which a single-arm solve reproduces the infinite
/// chain to roughly `bias_target` relative accuracy for decisions at
/// holding time `j`: truncation error decays like `tail_ratio^(L−j)`.
pub fn suggested_arm_trunc(system: &System, j: usize, bias_target: f64) -> usize {
    let ratio = system.model.tail_ratio().clamp(1e-6, 0.999_999);
    let extra = (bias_target.ln() / ratio.ln()).ceil() as usize;
    let trunc = j + 1 + extra.max(8);

    // Keep Tr(h^L(P̂)) comfortably inside double range.
    let t0 = system.steady.trace_seq[0].max(1.0);
    let growth = system.model.spectral_radius().powi(2).max(1.0 + 1e-9);
    let cap = ((250.0 * std::f64::consts::LN_10 - t0.ln()) / growth.ln()) as usize;
    trunc.min(cap.max(j + 8))
}

/// Independent check of [`whittle_index`]: binary search for the subsidy at
/// which the solved single-arm policy stops attacking holding time `j`
/// (threshold crosses from `≤ j` to `> j`). Shares no algebra with the
/// closed form.
pub fn index_oracle(system: &System, j: usize, trunc: usize, tol: f64) -> Result<f64, WhittleError> {
    assert!(j < trunc, "oracle needs j strictly inside the truncation");
    let attacks_at_j = |z: f64| -> Result<bool, WhittleError> {
        let arm = SubsidyArm {
            system,
            subsidy: z,
            trunc,
        };
        Ok(single_arm_solve(&arm, 1e-10)?.threshold <= j)
    };

    if !attacks_at_j(0.0)? {
        return Err(WhittleError::BracketNotFound { j, hi: 0.0 });
    }
    let mut cache = system.steady.trace_cache(&system.model);
    let mut lo = 0.0;
    let mut hi = 2.0 * cache.get(trunc);
    let mut widen = 0;
    while attacks_at_j(hi)? {
        lo = hi;
        hi *= 2.0;
        widen += 1;
        if widen > 60 {
            return Err(WhittleError::BracketNotFound { j, hi });
        }
    }
    while hi - lo > tol * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if attacks_at_j(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A monotonicity witness: the not-attack region shrank although the
/// subsidy grew.
#[derive(Debug, Clone, Serialize)]
pub struct IndexabilityWitness {
    pub z_low: f64,
    pub z_high: f64,
    pub threshold_low: usize,
    pub threshold_high: usize,
}

/// Indexability report over a subsidy grid.
#[derive(Debug, Clone, Serialize)]
pub struct IndexabilityReport {
    pub label: String,
    /// (subsidy, threshold) per grid point.
    pub thresholds: Vec<(f64, usize)>,
    pub witnesses: Vec<IndexabilityWitness>,
}

impl IndexabilityReport {
    pub fn passed(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// Scans (subsidy, threshold) pairs for monotonicity violations. Split out
/// from [`indexability_check`] so constructed tables can be scanned too.
pub fn scan_threshold_monotonicity(pairs: &[(f64, usize)]) -> Vec<IndexabilityWitness> {
    let mut witnesses = Vec::new();
    for w in pairs.windows(2) {
        let (z0, t0) = w[0];
        let (z1, t1) = w[1];
        if t1 < t0 {
            witnesses.push(IndexabilityWitness {
                z_low: z0,
                z_high: z1,
                threshold_low: t0,
                threshold_high: t1,
            });
        }
    }
    witnesses
}

/// Verifies indexability on a sorted subsidy grid: the optimal single-arm
/// threshold `ℓ(z)` must be nondecreasing in the subsidy.
pub fn indexability_check(
    system: &System,
    z_grid: &[f64],
    trunc: usize,
    tol: f64,
) -> Result<IndexabilityReport, WhittleError> {
    let mut thresholds = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let arm = SubsidyArm {
            system,
            subsidy: z,
            trunc,
        };
        let sol = single_arm_solve(&arm, tol)?;
        thresholds.push((z, sol.threshold));
    }
    let witnesses = scan_threshold_monotonicity(&thresholds);
    Ok(IndexabilityReport {
        label: system.model.label.clone(),
        thresholds,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench;
    use crate::model::System;
    use proptest::prelude::*;

    fn sys1() -> System {
        System::prepare(bench::system_1()).unwrap()
    }

    fn sys2() -> System {
        System::prepare(bench::system_2()).unwrap()
    }

    #[test]
    fn v_stationary_base_cases() {
        // Empty pre-threshold phase: the chain resets at the attacked rate.
        assert_eq!(v_stationary(0.9, 0.4, 0), 0.4);
        // One ε-step then the attacked phase: mean return time 1 + 0.1/0.4.
        assert!((v_stationary(0.9, 0.4, 1) - 0.8).abs() < 1e-15);
        // Long thresholds forget the attacked phase entirely.
        assert!((v_stationary(0.9, 0.4, 200) - 0.9).abs() < 1e-12);
        assert!((v_stationary(0.95, 0.5, 200) - 0.95).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn v_stationary_interpolates_the_rates(
            eps in 0.05f64..1.0,
            frac in 0.05f64..0.95,
            j in 0usize..300,
        ) {
            let epsa = eps * frac;
            let v = v_stationary(eps, epsa, j);
            prop_assert!(v >= epsa - 1e-12 && v <= eps + 1e-12, "v = {v}");
        }
    }

    #[test]
    fn closed_form_matches_oracle_on_small_holding_times() {
        for sys in [sys1(), sys2()] {
            for j in 0..=5usize {
                let trunc = suggested_arm_trunc(&sys, j, 1e-5);
                let oracle = index_oracle(&sys, j, trunc, 1e-7).unwrap();
                let closed = whittle_index(&sys, j, DEFAULT_TAIL_TOL).unwrap();
                let rel = (closed - oracle).abs() / oracle.abs().max(1.0);
                assert!(
                    rel < 1e-4,
                    "{} j={j}: closed {closed} vs oracle {oracle} (rel {rel:.2e})",
                    sys.model.label
                );
            }
        }
    }

    #[test]
    fn reliability_cutoffs_match_double_precision_breakdown() {
        let s1 = sys1();
        assert!(whittle_index(&s1, 12, DEFAULT_TAIL_TOL).is_ok());
        assert!(matches!(
            whittle_index(&s1, 13, DEFAULT_TAIL_TOL),
            Err(WhittleError::NumericallyUnreliable { j: 13, .. })
        ));

        let s2 = sys2();
        assert!(whittle_index(&s2, 16, DEFAULT_TAIL_TOL).is_ok());
        assert!(matches!(
            whittle_index(&s2, 17, DEFAULT_TAIL_TOL),
            Err(WhittleError::NumericallyUnreliable { j: 17, .. })
        ));
    }

    #[test]
    fn index_table_is_nondecreasing_with_expected_extent() {
        let t1 = IndexTable::build(&sys1(), DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(t1.j_max, 12);
        let t2 = IndexTable::build(&sys2(), DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(t2.j_max, 16);
        for t in [&t1, &t2] {
            for w in t.values.windows(2) {
                assert!(w[1] >= w[0], "index decreased: {} -> {}", w[0], w[1]);
            }
        }
        // Clamped extension: beyond j_max the last value is reused.
        assert_eq!(t1.value_clamped(40), t1.values[12]);
    }

    #[test]
    fn identical_systems_share_the_index_table() {
        let a = IndexTable::build(&sys2(), DEFAULT_TAIL_TOL).unwrap();
        let b = IndexTable::build(&sys2(), DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn zero_subsidy_attacks_immediately() {
        let sys = sys2();
        let arm = SubsidyArm {
            system: &sys,
            subsidy: 0.0,
            trunc: 60,
        };
        let sol = single_arm_solve(&arm, 1e-10).unwrap();
        assert_eq!(sol.threshold, 0);
    }

    #[test]
    fn huge_subsidy_never_attacks() {
        let sys = sys2();
        let mut cache = sys.steady.trace_cache(&sys.model);
        let z = 2.0 * cache.get(60);
        let arm = SubsidyArm {
            system: &sys,
            subsidy: z,
            trunc: 60,
        };
        let sol = single_arm_solve(&arm, 1e-10).unwrap();
        assert_eq!(sol.threshold, 61, "never-attack is trunc + 1");
    }

    #[test]
    fn index_is_the_indifference_subsidy() {
        // At z = o(3), the threshold-3 and threshold-4 rules earn the same
        // long-run reward, and the solved threshold transitions there.
        let sys = sys2();
        let z = whittle_index(&sys, 3, DEFAULT_TAIL_TOL).unwrap();
        let trunc = suggested_arm_trunc(&sys, 3, 1e-6);

        let arm = |subsidy| SubsidyArm {
            system: &sys,
            subsidy,
            trunc,
        };
        let g3 = threshold_policy_gain(&arm(z), 3, 1e-11).unwrap();
        let g4 = threshold_policy_gain(&arm(z), 4, 1e-11).unwrap();
        let rel = (g3 - g4).abs() / g3.abs().max(1.0);
        assert!(rel < 1e-6, "gains {g3} vs {g4} (rel {rel:.2e})");

        let lo = single_arm_solve(&arm(z * (1.0 - 1e-3)), 1e-10).unwrap();
        assert!(lo.threshold <= 3, "below o(3) the rule still attacks at 3");
        let hi = single_arm_solve(&arm(z * (1.0 + 1e-3)), 1e-10).unwrap();
        assert_eq!(hi.threshold, 4, "above o(3) state 3 is left alone");
    }

    #[test]
    fn oracle_is_monotone_in_holding_time() {
        let sys = sys1();
        let mut prev = f64::NEG_INFINITY;
        for j in 0..4usize {
            let trunc = suggested_arm_trunc(&sys, j, 1e-5);
            let o = index_oracle(&sys, j, trunc, 1e-7).unwrap();
            assert!(o >= prev - 1e-6 * prev.abs().max(1.0), "o({j}) = {o} < {prev}");
            prev = o;
        }
    }

    #[test]
    fn indexability_holds_on_benchmark_systems() {
        for sys in [sys1(), sys2()] {
            let table = IndexTable::build(&sys, DEFAULT_TAIL_TOL).unwrap();
            let top = 2.0 * table.values[table.j_max];
            let grid: Vec<f64> = (0..12).map(|k| top * k as f64 / 11.0).collect();
            let trunc = suggested_arm_trunc(&sys, table.j_max, 1e-4);
            let report = indexability_check(&sys, &grid, trunc, 1e-10).unwrap();
            assert!(report.passed(), "witnesses: {:?}", report.witnesses);
            assert_eq!(report.thresholds.first().unwrap().1, 0);
        }
    }

    #[test]
    fn constructed_non_monotone_table_yields_witness() {
        let fake = vec![(0.0, 0), (1.0, 3), (2.0, 2), (3.0, 5)];
        let witnesses = scan_threshold_monotonicity(&fake);
        assert_eq!(witnesses.len(), 1);
        assert_eq!(witnesses[0].threshold_low, 3);
        assert_eq!(witnesses[0].threshold_high, 2);
        assert_eq!(witnesses[0].z_high, 2.0);
    }

    #[test]
    fn csv_export_flags_unreliable_rows() {
        let table = IndexTable::build(&sys1(), DEFAULT_TAIL_TOL).unwrap();
        let csv = table.to_csv(14);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "j,o_j,reliable");
        assert_eq!(lines.len(), 16); // header + j = 0..=14
        assert!(lines[14].starts_with("13,,false"));
        assert!(lines[1].ends_with("true"));
    }
}
