//! Truncated product-state average-reward MDP and its solver.
//!
//! State: the vector of channel holding times `(τ₁, …, τ_M)`, each clamped
//! to `{0..=trunc}`. Action: which N of the M channels to jam; the action
//! set is exactly the C(M, N) subsets of size N — attacking fewer channels
//! is never better because the one-stage reward is nondecreasing in every
//! holding time. Transitions factor per channel: an attacked channel resets
//! with probability ε̲ᵢ (otherwise εᵢ) and advances by one on failure, with
//! the failed transition at `trunc` looping in place so the kernel stays
//! stochastic. The one-stage reward `Σᵢ wᵢ·Tr(hᵢ^{τᵢ}(P̂ⁱ))` does not depend
//! on the action.
//!
//! The solver is relative value iteration: `J ← max_a { r + P_a J }`,
//! re-normalized at a reference state every sweep so values stay bounded,
//! stopping when the span of successive differences falls below tolerance.
//! The per-action expectation `P_a J` exploits the product kernel: it is
//! computed by composing M one-coordinate averaging passes over the value
//! table (`O(M·S)` instead of `O(2^M·S)` per action), each pass a pure
//! gather so sweeps parallelize over states with results independent of
//! the worker count.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::System;

/// Default span tolerance for relative value iteration.
pub const DEFAULT_VI_TOL: f64 = 1e-6;
/// Default sweep budget.
pub const DEFAULT_VI_MAX_ITER: usize = 20_000;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("state space {size} does not fit in addressable memory")]
    StateSpaceTooLarge { size: u128 },
    #[error(
        "relative value iteration did not converge within {iterations} sweeps (span {span:.3e})"
    )]
    NonConvergence { iterations: usize, span: f64 },
    #[error("verifier requires M=2, N=1 but the problem has M={m}, N={n}")]
    WrongShape { m: usize, n: usize },
    #[error("policy file malformed at line {line}: {detail}")]
    MalformedPolicy { line: usize, detail: String },
}

/// Mixed-radix layout of the product state space `{0..=trunc}^M`.
/// Coordinate `i` has stride `(trunc+1)^i`.
#[derive(Debug, Clone, Serialize)]
pub struct StateSpace {
    pub m: usize,
    pub base: usize,
    pub size: usize,
}

impl StateSpace {
    pub fn new(m: usize, trunc: usize) -> Result<Self, MdpError> {
        let base = trunc + 1;
        let size_u128 = (base as u128).checked_pow(m as u32).ok_or(
            MdpError::StateSpaceTooLarge {
                size: u128::MAX,
            },
        )?;
        if size_u128 > usize::MAX as u128 / 8 {
            return Err(MdpError::StateSpaceTooLarge { size: size_u128 });
        }
        Ok(Self {
            m,
            base,
            size: size_u128 as usize,
        })
    }

    pub fn stride(&self, coord: usize) -> usize {
        self.base.pow(coord as u32)
    }

    pub fn flat(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.m);
        let mut f = 0;
        for &c in coords.iter().rev() {
            debug_assert!(c < self.base);
            f = f * self.base + c;
        }
        f
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.m];
        self.coords_into(flat, &mut out);
        out
    }

    pub fn coords_into(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut() {
            *slot = flat % self.base;
            flat /= self.base;
        }
    }
}

/// A state as both its coordinate vector and its flat mixed-radix encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateIndex {
    pub coords: Vec<usize>,
    pub flat: usize,
}

impl StateIndex {
    pub fn from_coords(space: &StateSpace, coords: Vec<usize>) -> Self {
        let flat = space.flat(&coords);
        Self { coords, flat }
    }

    pub fn from_flat(space: &StateSpace, flat: usize) -> Self {
        Self {
            coords: space.coords(flat),
            flat,
        }
    }
}

/// All size-`n` subsets of `{0..m-1}` in lexicographic order.
pub fn enumerate_actions(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn recurse(m: usize, n: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current.push(i);
            recurse(m, n, i + 1, current, out);
            current.pop();
        }
    }
    recurse(m, n, 0, &mut current, &mut out);
    out
}

/// The truncated jamming MDP for `M` systems and budget `N`.
#[derive(Debug, Clone)]
pub struct MdpProblem {
    pub systems: Vec<System>,
    pub budget: usize,
    pub trunc: usize,
    pub space: StateSpace,
    /// Attack subsets of size exactly `budget`, lexicographic.
    pub actions: Vec<Vec<usize>>,
    /// Per system: `wᵢ·Tr(hᵢ^j(P̂ⁱ))` for `j = 0..=trunc`.
    weighted_traces: Vec<Vec<f64>>,
}

impl MdpProblem {
    pub fn new(systems: Vec<System>, budget: usize, trunc: usize) -> Result<Self, MdpError> {
        let m = systems.len();
        if m == 0 {
            return Err(MdpError::InvalidProblem("no systems given".into()));
        }
        if budget == 0 || budget > m {
            return Err(MdpError::InvalidProblem(format!(
                "budget must satisfy 1 <= N <= M, got N={budget}, M={m}"
            )));
        }
        if trunc == 0 {
            return Err(MdpError::InvalidProblem("truncation level must be >= 1".into()));
        }
        let space = StateSpace::new(m, trunc)?;
        let actions = enumerate_actions(m, budget);
        if actions.len() > u16::MAX as usize {
            return Err(MdpError::InvalidProblem(format!(
                "action set with {} subsets does not fit the policy table",
                actions.len()
            )));
        }
        let weighted_traces = systems
            .iter()
            .map(|sys| {
                let mut cache = sys.steady.trace_cache(&sys.model);
                (0..=trunc).map(|j| sys.model.weight * cache.get(j)).collect()
            })
            .collect();
        Ok(Self {
            systems,
            budget,
            trunc,
            space,
            actions,
            weighted_traces,
        })
    }

    /// Reset rate of system `i` under attack subset `action`.
    fn reset_rate(&self, i: usize, action: &[usize]) -> f64 {
        if action.contains(&i) {
            self.systems[i].model.attacked_rate
        } else {
            self.systems[i].model.arrival_rate
        }
    }

    /// One-stage reward `Σᵢ wᵢ·Tr(hᵢ^{τᵢ}(P̂ⁱ))`; the action plays no role.
    pub fn one_stage_reward(&self, s: &StateIndex) -> f64 {
        s.coords
            .iter()
            .enumerate()
            .map(|(i, &j)| self.weighted_traces[i][j])
            .sum()
    }

    /// Full successor distribution of `(s, a)`: every arrival/failure
    /// pattern over the M channels, with duplicate successors merged.
    pub fn transition_distribution(
        &self,
        s: &StateIndex,
        action_idx: usize,
    ) -> Vec<(StateIndex, f64)> {
        let action = &self.actions[action_idx];
        let m = self.space.m;
        let last = self.space.base - 1;
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(1 << m);
        for mask in 0u64..(1u64 << m) {
            let mut prob = 1.0;
            let mut coords = vec![0usize; m];
            for i in 0..m {
                let rate = self.reset_rate(i, action);
                if mask >> i & 1 == 1 {
                    // arrival: holding time resets
                    prob *= rate;
                    coords[i] = 0;
                } else {
                    prob *= 1.0 - rate;
                    coords[i] = (s.coords[i] + 1).min(last);
                }
            }
            if prob > 0.0 {
                out.push((self.space.flat(&coords), prob));
            }
        }
        out.sort_unstable_by_key(|&(f, _)| f);
        let mut merged: Vec<(StateIndex, f64)> = Vec::with_capacity(out.len());
        for (flat, prob) in out {
            match merged.last_mut() {
                Some((prev, p)) if prev.flat == flat => *p += prob,
                _ => merged.push((StateIndex::from_flat(&self.space, flat), prob)),
            }
        }
        merged
    }

    /// Rewards for every flat state, in state order.
    fn reward_table(&self) -> Vec<f64> {
        let base = self.space.base;
        let m = self.space.m;
        let mut rewards = vec![0.0; self.space.size];
        let chunk = base.max(1 << 12);
        rewards
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(ci, slice)| {
                let mut coords = vec![0usize; m];
                let start = ci * chunk;
                self.space.coords_into(start, &mut coords);
                for (off, slot) in slice.iter_mut().enumerate() {
                    if off > 0 {
                        // odometer increment
                        for c in coords.iter_mut() {
                            *c += 1;
                            if *c < base {
                                break;
                            }
                            *c = 0;
                        }
                    }
                    *slot = coords
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| self.weighted_traces[i][j])
                        .sum();
                }
            });
        rewards
    }
}

/// Options for [`relative_value_iteration`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop once the span of successive value differences is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Flat index of the normalization reference state (default: origin).
    pub reference: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_VI_TOL,
            max_iter: DEFAULT_VI_MAX_ITER,
            reference: 0,
        }
    }
}

/// Output of the solver: gain, differential value, greedy policy.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Long-run average reward ρ*.
    pub gain: f64,
    /// Differential value, normalized to 0 at the reference state.
    pub q: Vec<f64>,
    /// Greedy action index per flat state (into `problem.actions`).
    pub policy: Vec<u16>,
    pub iterations: usize,
    pub span_at_exit: f64,
    /// `max_s |q(s) − (r(s) − ρ* + max_a Σ P(s'|s,a) q(s'))|` at exit.
    pub bellman_residual: f64,
}

/// One-coordinate averaging pass:
/// `out[s] = rate·in[s with τᵢ=0] + (1−rate)·in[s with τᵢ=min(τᵢ+1, trunc)]`.
fn mix_pass(input: &[f64], output: &mut [f64], stride: usize, base: usize, rate: f64) {
    let block = stride * base;
    let size = input.len();
    debug_assert_eq!(size % block, 0);

    if size <= 1 << 14 {
        for (ib, ob) in input.chunks(block).zip(output.chunks_mut(block)) {
            mix_block(ib, ob, stride, base, rate);
        }
        return;
    }

    let nblocks = size / block;
    let tasks = 8 * rayon::current_num_threads().max(1);
    if nblocks >= tasks {
        let per = ((size / tasks).max(block) / block) * block;
        output
            .par_chunks_mut(per)
            .zip(input.par_chunks(per))
            .for_each(|(o, i)| {
                for (ib, ob) in i.chunks(block).zip(o.chunks_mut(block)) {
                    mix_block(ib, ob, stride, base, rate);
                }
            });
    } else {
        // Few top-level blocks (large-stride coordinate): go parallel over
        // the planes inside each block instead.
        for b in 0..nblocks {
            let inp = &input[b * block..(b + 1) * block];
            let out = &mut output[b * block..(b + 1) * block];
            out.par_chunks_mut(stride).enumerate().for_each(|(j, plane)| {
                let zero = &inp[..stride];
                let up_off = (j + 1).min(base - 1) * stride;
                let up = &inp[up_off..up_off + stride];
                for t in 0..stride {
                    plane[t] = rate * zero[t] + (1.0 - rate) * up[t];
                }
            });
        }
    }
}

fn mix_block(inp: &[f64], out: &mut [f64], stride: usize, base: usize, rate: f64) {
    for j in 0..base {
        let up_off = (j + 1).min(base - 1) * stride;
        let zero = &inp[..stride];
        let up = &inp[up_off..up_off + stride];
        let dst = &mut out[j * stride..(j + 1) * stride];
        for t in 0..stride {
            dst[t] = rate * zero[t] + (1.0 - rate) * up[t];
        }
    }
}

/// `P_a J` for one action: M composed per-coordinate passes. The result
/// lands in one of the two scratch buffers; returns which.
fn expected_next<'a>(
    problem: &MdpProblem,
    action: &[usize],
    input: &[f64],
    s1: &'a mut Vec<f64>,
    s2: &'a mut Vec<f64>,
) -> &'a [f64] {
    let base = problem.space.base;
    let mut src_is_s1 = false;
    for i in 0..problem.space.m {
        let rate = problem.reset_rate(i, action);
        let stride = problem.space.stride(i);
        if i == 0 {
            mix_pass(input, s1, stride, base, rate);
            src_is_s1 = true;
        } else if src_is_s1 {
            mix_pass(s1, s2, stride, base, rate);
            src_is_s1 = false;
        } else {
            mix_pass(s2, s1, stride, base, rate);
            src_is_s1 = true;
        }
    }
    if src_is_s1 {
        s1
    } else {
        s2
    }
}

fn max_into(best: &mut [f64], candidate: &[f64]) {
    best.par_chunks_mut(1 << 14)
        .zip(candidate.par_chunks(1 << 14))
        .for_each(|(b, c)| {
            for (bv, cv) in b.iter_mut().zip(c) {
                if *cv > *bv {
                    *bv = *cv;
                }
            }
        });
}

/// Solves the average-reward problem by relative value iteration and
/// extracts the greedy policy of the final differential value.
pub fn relative_value_iteration(
    problem: &MdpProblem,
    opts: &SolveOptions,
) -> Result<SolveResult, MdpError> {
    let size = problem.space.size;
    if opts.reference >= size {
        return Err(MdpError::InvalidProblem(format!(
            "reference state {} outside the state space",
            opts.reference
        )));
    }
    let rewards = problem.reward_table();
    let mut prev = vec![0.0; size];
    let mut best = vec![0.0; size];
    let mut s1 = vec![0.0; size];
    let mut s2 = vec![0.0; size];

    // Every action resets all coordinates jointly with probability at least
    // ∏ᵢ ε̲ᵢ, so the span seminorm contracts at least that fast per sweep in
    // exact arithmetic. When rewards near the truncation boundary are so
    // large that the computed span bottoms out at rounding noise, this
    // certificate still bounds the exact span and licenses an exit.
    let contraction = 1.0
        - problem
            .systems
            .iter()
            .map(|s| s.model.attacked_rate.min(s.model.arrival_rate))
            .product::<f64>();
    let mut span1 = f64::INFINITY;

    let mut iterations = 0;
    let mut span = f64::INFINITY;

    while iterations < opts.max_iter {
        iterations += 1;
        for (ai, action) in problem.actions.iter().enumerate() {
            let ea = expected_next(problem, action, &prev, &mut s1, &mut s2);
            if ai == 0 {
                best.copy_from_slice(ea);
            } else {
                max_into(&mut best, ea);
            }
        }
        let raw_ref = rewards[opts.reference] + best[opts.reference];
        // Fused pass: raw = r + best, track the span of (raw − prev),
        // store the normalized table back into prev.
        let (lo, hi) = prev
            .par_chunks_mut(1 << 14)
            .zip(best.par_chunks(1 << 14))
            .zip(rewards.par_chunks(1 << 14))
            .map(|((p, b), r)| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for ((pv, bv), rv) in p.iter_mut().zip(b).zip(r) {
                    let raw = rv + bv;
                    let d = raw - *pv;
                    if d < lo {
                        lo = d;
                    }
                    if d > hi {
                        hi = d;
                    }
                    *pv = raw - raw_ref;
                }
                (lo, hi)
            })
            .reduce(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |a, b| (a.0.min(b.0), a.1.max(b.1)),
            );
        span = hi - lo;
        let gain = raw_ref; // prev[reference] was 0, so the diff there is raw_ref
        if iterations == 1 {
            span1 = span.max(1.0);
        }
        let certified = span1 * contraction.powi(iterations as i32 - 1);
        if span <= opts.tol || certified <= opts.tol {
            let (policy, bellman_residual) = extract_greedy(problem, &rewards, &prev, gain);
            return Ok(SolveResult {
                gain,
                q: prev,
                policy,
                iterations,
                span_at_exit: span,
                bellman_residual,
            });
        }
    }
    Err(MdpError::NonConvergence {
        iterations,
        span,
    })
}

/// Greedy argmax over actions for the final q, with ties broken toward the
/// lexicographically smallest attack subset, plus the Bellman residual.
fn extract_greedy(
    problem: &MdpProblem,
    rewards: &[f64],
    q: &[f64],
    gain: f64,
) -> (Vec<u16>, f64) {
    let size = problem.space.size;
    let mut bestv = vec![f64::NEG_INFINITY; size];
    let mut policy = vec![0u16; size];
    let mut s1 = vec![0.0; size];
    let mut s2 = vec![0.0; size];
    for (ai, action) in problem.actions.iter().enumerate() {
        let ea = expected_next(problem, action, q, &mut s1, &mut s2);
        bestv
            .par_chunks_mut(1 << 14)
            .zip(policy.par_chunks_mut(1 << 14))
            .zip(ea.par_chunks(1 << 14))
            .for_each(|((bv, pol), e)| {
                for ((b, p), &v) in bv.iter_mut().zip(pol.iter_mut()).zip(e) {
                    if v > *b {
                        *b = v;
                        *p = ai as u16;
                    }
                }
            });
    }
    let residual = bestv
        .par_chunks(1 << 14)
        .zip(q.par_chunks(1 << 14))
        .zip(rewards.par_chunks(1 << 14))
        .map(|((b, qs), r)| {
            let mut worst = 0.0f64;
            for ((bv, qv), rv) in b.iter().zip(qs).zip(r) {
                let res = (qv - (rv - gain + bv)).abs();
                if res > worst {
                    worst = res;
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    (policy, residual)
}

// ---------------------------------------------------------------------------
// Structure verifiers
// ---------------------------------------------------------------------------

/// A state at which a structural property fails.
#[derive(Debug, Clone, Serialize)]
pub struct StructureViolation {
    pub coords: Vec<usize>,
    pub detail: String,
}

/// Report of the two-system threshold check.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    /// `l₁(j₂)`: smallest j₁ at which system 0 is attacked, per j₂;
    /// `trunc+1` when system 0 is never attacked on that row.
    pub critical_curve: Vec<usize>,
    pub violations: Vec<StructureViolation>,
}

impl ThresholdReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// True iff every prescribed attack subset has size exactly `n`.
/// Policies produced by the solver satisfy this by construction; imported
/// policies may not.
pub fn verify_exactly_n<'a>(subsets: impl IntoIterator<Item = &'a [usize]>, n: usize) -> bool {
    subsets.into_iter().all(|s| s.len() == n)
}

/// Checks the two-system threshold structure of a policy: for each fixed
/// j₂ the set `{j₁ : attack system 0}` must be upward closed, and for each
/// fixed j₁ the set `{j₂ : attack system 1}` must be upward closed.
/// Also extracts the critical curve separating the two regions.
pub fn verify_threshold_structure(
    policy: &[u16],
    problem: &MdpProblem,
) -> Result<ThresholdReport, MdpError> {
    if problem.space.m != 2 || problem.budget != 1 {
        return Err(MdpError::WrongShape {
            m: problem.space.m,
            n: problem.budget,
        });
    }
    let base = problem.space.base;
    let attacks = |j1: usize, j2: usize, system: usize| -> bool {
        let a = policy[j1 + base * j2] as usize;
        problem.actions[a].contains(&system)
    };
    let mut violations = Vec::new();
    let mut curve = Vec::with_capacity(base);
    for j2 in 0..base {
        let mut seen = false;
        let mut first = base; // trunc + 1 when never attacked
        for j1 in 0..base {
            let e1 = attacks(j1, j2, 0);
            if e1 && !seen {
                seen = true;
                first = j1;
            }
            if !e1 && seen {
                violations.push(StructureViolation {
                    coords: vec![j1, j2],
                    detail: format!("system 0 attacked at j1={} but not at j1={j1}", first),
                });
            }
        }
        curve.push(first);
    }
    for j1 in 0..base {
        let mut seen = false;
        let mut first = base;
        for j2 in 0..base {
            let e2 = attacks(j1, j2, 1);
            if e2 && !seen {
                seen = true;
                first = j2;
            }
            if !e2 && seen {
                violations.push(StructureViolation {
                    coords: vec![j1, j2],
                    detail: format!("system 1 attacked at j2={} but not at j2={j2}", first),
                });
            }
        }
    }
    Ok(ThresholdReport {
        critical_curve: curve,
        violations,
    })
}

/// General-M threshold check: along every coordinate line of every system,
/// "system i is attacked" must be upward closed in τᵢ. Cost grows with
/// M·S, so it is a separate entry point from the two-system verifier.
pub fn verify_threshold_structure_general(
    policy: &[u16],
    problem: &MdpProblem,
) -> Vec<StructureViolation> {
    let base = problem.space.base;
    let mut violations = Vec::new();
    for i in 0..problem.space.m {
        let stride = problem.space.stride(i);
        let lines = problem.space.size / base;
        for line in 0..lines {
            let start = (line / stride) * stride * base + (line % stride);
            let mut seen = false;
            for j in 0..base {
                let flat = start + j * stride;
                let attacked = problem.actions[policy[flat] as usize].contains(&i);
                if attacked {
                    seen = true;
                } else if seen {
                    violations.push(StructureViolation {
                        coords: problem.space.coords(flat),
                        detail: format!("system {i} dropped from the attack set along its line"),
                    });
                }
            }
        }
    }
    violations
}

/// Report of the monotonicity/submodularity check of the differential value.
#[derive(Debug, Clone, Serialize)]
pub struct QStructureReport {
    /// Worst `q(s) − q(s')` over componentwise-ordered pairs `s ⪯ s'`
    /// (positive numbers mean monotonicity failed by that much).
    pub worst_monotonicity_gap: f64,
    /// Worst `q(s∧s') + q(s∨s') − q(s) − q(s')` over all pairs
    /// (positive numbers mean submodularity failed by that much).
    pub worst_submodularity_gap: f64,
    pub slack: f64,
    pub monotone_violations: usize,
    pub submodular_violations: usize,
}

impl QStructureReport {
    pub fn passed(&self) -> bool {
        self.monotone_violations == 0 && self.submodular_violations == 0
    }
}

/// Exhaustive pair check of the differential value on the two-system grid:
/// `q` must be nondecreasing in the componentwise order and submodular on
/// the lattice, up to `slack`.
pub fn verify_q_structure(
    q: &[f64],
    problem: &MdpProblem,
    slack: f64,
) -> Result<QStructureReport, MdpError> {
    if problem.space.m != 2 {
        return Err(MdpError::WrongShape {
            m: problem.space.m,
            n: problem.budget,
        });
    }
    let base = problem.space.base;
    let at = |j1: usize, j2: usize| q[j1 + base * j2];
    let mut worst_mono = f64::NEG_INFINITY;
    let mut worst_sub = f64::NEG_INFINITY;
    let mut mono_viols = 0usize;
    let mut sub_viols = 0usize;
    for a1 in 0..base {
        for a2 in 0..base {
            for b1 in 0..base {
                for b2 in 0..base {
                    if a1 <= b1 && a2 <= b2 {
                        let gap = at(a1, a2) - at(b1, b2);
                        if gap > worst_mono {
                            worst_mono = gap;
                        }
                        if gap > slack {
                            mono_viols += 1;
                        }
                    }
                    let meet = at(a1.min(b1), a2.min(b2));
                    let join = at(a1.max(b1), a2.max(b2));
                    let gap = meet + join - at(a1, a2) - at(b1, b2);
                    if gap > worst_sub {
                        worst_sub = gap;
                    }
                    if gap > slack {
                        sub_viols += 1;
                    }
                }
            }
        }
    }
    Ok(QStructureReport {
        worst_monotonicity_gap: worst_mono,
        worst_submodularity_gap: worst_sub,
        slack,
        monotone_violations: mono_viols,
        submodular_violations: sub_viols,
    })
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

/// Machine-readable solve summary.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub gain: f64,
    pub iterations: usize,
    pub span_at_exit: f64,
    pub trunc: usize,
    pub budget: usize,
    pub systems: usize,
    pub bellman_residual: f64,
}

impl SolveResult {
    pub fn summary(&self, problem: &MdpProblem) -> SolveSummary {
        SolveSummary {
            gain: self.gain,
            iterations: self.iterations,
            span_at_exit: self.span_at_exit,
            trunc: problem.trunc,
            budget: problem.budget,
            systems: problem.space.m,
            bellman_residual: self.bellman_residual,
        }
    }

    /// Attack subset prescribed at a flat state.
    pub fn action<'p>(&self, problem: &'p MdpProblem, flat: usize) -> &'p [usize] {
        &problem.actions[self.policy[flat] as usize]
    }

    /// Policy CSV: `j_1,...,j_M,attack_set` with the subset as sorted
    /// semicolon-joined system indices.
    pub fn policy_csv(&self, problem: &MdpProblem) -> String {
        let mut out = String::new();
        let m = problem.space.m;
        for i in 1..=m {
            out.push_str(&format!("j_{i},"));
        }
        out.push_str("attack_set\n");
        let mut coords = vec![0usize; m];
        for flat in 0..problem.space.size {
            problem.space.coords_into(flat, &mut coords);
            for c in &coords {
                out.push_str(&format!("{c},"));
            }
            let set: Vec<String> = self.action(problem, flat).iter().map(|i| i.to_string()).collect();
            out.push_str(&set.join(";"));
            out.push('\n');
        }
        out
    }

    /// Differential-value CSV: `j_1,...,j_M,q`.
    pub fn q_csv(&self, problem: &MdpProblem) -> String {
        let mut out = String::new();
        let m = problem.space.m;
        for i in 1..=m {
            out.push_str(&format!("j_{i},"));
        }
        out.push_str("q\n");
        let mut coords = vec![0usize; m];
        for flat in 0..problem.space.size {
            problem.space.coords_into(flat, &mut coords);
            for c in &coords {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{}\n", self.q[flat]));
        }
        out
    }
}

/// Parses a policy CSV (the format written by [`SolveResult::policy_csv`])
/// into per-flat-state attack subsets.
pub fn parse_policy_csv(text: &str, space: &StateSpace) -> Result<Vec<Vec<usize>>, MdpError> {
    let mut table = vec![None; space.size];
    let mut lines = text.lines().enumerate();
    let _header = lines.next();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != space.m + 1 {
            return Err(MdpError::MalformedPolicy {
                line: lineno + 1,
                detail: format!("expected {} fields, got {}", space.m + 1, fields.len()),
            });
        }
        let mut coords = Vec::with_capacity(space.m);
        for f in &fields[..space.m] {
            let c: usize = f.trim().parse().map_err(|e| MdpError::MalformedPolicy {
                line: lineno + 1,
                detail: format!("bad coordinate {f:?}: {e}"),
            })?;
            if c >= space.base {
                return Err(MdpError::MalformedPolicy {
                    line: lineno + 1,
                    detail: format!("coordinate {c} outside 0..={}", space.base - 1),
                });
            }
            coords.push(c);
        }
        let set = fields[space.m].trim();
        let subset: Vec<usize> = if set.is_empty() {
            Vec::new()
        } else {
            set.split(';')
                .map(|t| {
                    t.trim().parse().map_err(|e| MdpError::MalformedPolicy {
                        line: lineno + 1,
                        detail: format!("bad attack set entry {t:?}: {e}"),
                    })
                })
                .collect::<Result<_, _>>()?
        };
        table[space.flat(&coords)] = Some(subset);
    }
    table
        .into_iter()
        .enumerate()
        .map(|(flat, entry)| {
            entry.ok_or(MdpError::MalformedPolicy {
                line: 0,
                detail: format!("state {flat} missing from the policy file"),
            })
        })
        .collect()
}
