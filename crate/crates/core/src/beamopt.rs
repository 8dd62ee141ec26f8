//! Reaction-aware beamforming: per-level Lagrange dual decomposition with
//! semidefinite subproblems, and a one-dimensional search over the level.
//!
//! For a fixed water level every subcarrier independently chooses between
//! flooding the primary off that subcarrier (interference at or above the
//! flood threshold) and leaving it served (interference below the threshold).
//! Each branch is a two-constraint quadratic program solved exactly through
//! its semidefinite relaxation. The optimum lies in span{g_i, f_i}, so every
//! relaxation is posed on that two-dimensional subspace and lifted back.
//!
//! The dual iterates' per-subcarrier maximizers are turned into feasible
//! beamformers (interference components shrunk to meet the interference
//! budget, then a common power scale) and scored by the true received power,
//! which re-solves the primary water-filling. The best such candidate is kept.

use std::cell::{Cell, RefCell};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{feasible_candidates, Limits};
use crate::ellipsoid::{ellipsoid_minimize, EllipsoidOptions, EllipsoidState, OracleAnswer, Sign, StopReason};
use crate::error::{Error, Result};
use crate::lambda_range::{lambda_range, LambdaRange, DUAL_BALL_RADIUS};
use crate::linalg::{coordinates, gain, inner, lift, norm_sqr, span_basis, zeros, CVector};
use crate::scenario::Scenario;
use crate::sdp::{extract_rank_one_report, solve_sdp, HermitianMatrix, SdpInstance, SdpOutcome, Sense};
use crate::waterfill::{evaluate_terms, received_power, PowerBreakdown};

pub const DEFAULT_GRID_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct P3DualPoint {
    /// Multiplier of the interference budget.
    pub eta1: f64,
    /// Multiplier of the secondary sum-power budget.
    pub mu1: f64,
    /// Multiplier of the primary power equality; unconstrained in sign.
    pub theta1: f64,
}

/// Constraint slacks of a solution; positive entries are violations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `Σ P_i − P_sum` at the induced level.
    pub primary_power: f64,
    /// `Σ |f_iᴴω_i|² − Γ`
    pub interference: f64,
    /// `Σ ‖ω_i‖² − Q_sum`
    pub sum_power: f64,
    /// `max_i ‖ω_i‖² − Q_peak`
    pub peak_power: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Search level the returned solution came from, when there was a search.
    pub grid_lambda: Option<f64>,
    pub lambda_range: Option<LambdaRange>,
    /// Dual iterations, summed over the search.
    pub iterations: usize,
    /// Final dual-minus-primal gap at the chosen level (objective units).
    pub dual_gap: Option<f64>,
    pub sdp: SdpStats,
    /// Levels whose subproblem failed, with the error text.
    pub failed_levels: Vec<(f64, String)>,
    /// The returned solution is one of the caller's warm-start candidates.
    pub warm_start: bool,
}

/// Aggregate health of the semidefinite subproblems solved along the way.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SdpStats {
    pub solved: usize,
    /// Branches settled without an SDP (the cross-channel constraint was inactive).
    pub closed_form: usize,
    pub max_relative_gap: f64,
    /// Largest `λ₂/λ₁` of a relaxation optimum after rank reduction.
    pub max_rank_ratio: f64,
    /// Largest `λ₂/λ₁` straight out of the solver.
    pub max_raw_rank_ratio: f64,
    /// Largest relative change of the objective caused by rank-one extraction.
    pub max_extraction_error: f64,
}

impl SdpStats {
    pub fn merge(&mut self, other: &SdpStats) {
        self.solved += other.solved;
        self.closed_form += other.closed_form;
        self.max_relative_gap = self.max_relative_gap.max(other.max_relative_gap);
        self.max_rank_ratio = self.max_rank_ratio.max(other.max_rank_ratio);
        self.max_raw_rank_ratio = self.max_raw_rank_ratio.max(other.max_raw_rank_ratio);
        self.max_extraction_error = self.max_extraction_error.max(other.max_extraction_error);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub omegas: Vec<CVector>,
    /// Water level induced by the solution's interference.
    pub lambda: f64,
    pub breakdown: PowerBreakdown,
    pub primary_power: Vec<f64>,
    pub interference: Vec<f64>,
    pub residuals: Residuals,
    pub diagnostics: Diagnostics,
}

/// Relative slack allowed on the secondary budgets.
pub const BUDGET_TOL: f64 = 1e-6;

impl BeamformingSolution {
    pub fn evaluate(s: &Scenario, omegas: Vec<CVector>, diagnostics: Diagnostics) -> Result<Self> {
        let (breakdown, wf) = received_power(s, &omegas)?;
        let interference: Vec<f64> = s.f.iter().zip(&omegas).map(|(f, w)| gain(f, w)).collect();
        let powers: Vec<f64> = omegas.iter().map(norm_sqr).collect();
        let residuals = Residuals {
            primary_power: wf.p.iter().sum::<f64>() - s.p_sum,
            interference: interference.iter().sum::<f64>() - s.gamma,
            sum_power: powers.iter().sum::<f64>() - s.q_sum,
            peak_power: powers.iter().copied().fold(f64::NEG_INFINITY, f64::max) - s.q_peak,
        };
        Ok(Self {
            omegas,
            lambda: wf.lambda,
            breakdown,
            primary_power: wf.p,
            interference,
            residuals,
            diagnostics,
        })
    }

    pub fn sum_power(&self) -> f64 {
        self.omegas.iter().map(norm_sqr).sum()
    }

    /// Checks the budgets with the relative slack [`BUDGET_TOL`].
    pub fn is_feasible(&self, s: &Scenario) -> bool {
        let r = &self.residuals;
        r.sum_power <= BUDGET_TOL * s.q_sum
            && r.peak_power <= BUDGET_TOL * s.q_peak
            && r.interference <= BUDGET_TOL * s.gamma.max(s.sigma2)
    }
}

/// Per-subcarrier data in the two-dimensional subspace that holds an optimum.
#[derive(Debug, Clone)]
struct Carrier {
    basis: Vec<CVector>,
    g_mat: HermitianMatrix,
    f_mat: HermitianMatrix,
    eye: HermitianMatrix,
    /// Effective cross channel (zero when interference is forbidden).
    f: CVector,
    g: CVector,
    h: f64,
    phi: f64,
}

/// Per-level problem data shared by the dual iterations.
#[derive(Debug, Clone)]
pub struct P3Context<'a> {
    scenario: &'a Scenario,
    carriers: Vec<Carrier>,
}

impl<'a> P3Context<'a> {
    pub fn new(s: &'a Scenario) -> Self {
        // A zero budget forces f_iᴴω_i = 0: optimize in the null space of each f_i.
        let forbid = s.gamma <= 0.0;
        let carriers = (0..s.n_subcarriers)
            .map(|i| {
                let (g, f) = if forbid {
                    let f = &s.f[i];
                    let nf = norm_sqr(f);
                    let g_perp = if nf > 0.0 { &s.g[i] - f * (inner(f, &s.g[i]) / nf) } else { s.g[i].clone() };
                    (g_perp, zeros(s.n_antennas))
                } else {
                    (s.g[i].clone(), s.f[i].clone())
                };
                let basis = span_basis(&g, &s.f[i]);
                let g_red = coordinates(&basis, &g);
                let f_red = coordinates(&basis, &f);
                let dim = basis.len();
                Carrier {
                    g_mat: HermitianMatrix::outer(&g_red),
                    f_mat: HermitianMatrix::outer(&f_red),
                    eye: HermitianMatrix::identity(dim),
                    basis,
                    f,
                    g,
                    h: s.h[i],
                    phi: s.phi[i],
                }
            })
            .collect();
        Self { scenario: s, carriers }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Interference at or above the flood threshold; the primary leaves the subcarrier.
    Flooded,
    /// Interference below the threshold; the primary keeps transmitting.
    Served,
}

#[derive(Debug, Clone)]
pub struct P4Solution {
    pub omega: CVector,
    pub branch: Branch,
    /// Per-subcarrier Lagrangian at `omega`.
    pub value: f64,
    /// Relaxation optimum of the chosen branch.
    pub relaxation_value: f64,
    pub stats: SdpStats,
}

fn solve_branch(inst: &SdpInstance, stats: &mut SdpStats) -> Result<Option<(f64, CVector)>> {
    match solve_sdp(inst)? {
        SdpOutcome::Optimal(opt) => {
            let report = extract_rank_one_report(&opt.w, inst)?;
            let achieved = inst.value_at(&HermitianMatrix::outer(&report.omega));
            let scale = opt.value.abs().max(inst.objective.frobenius() * opt.w.frobenius()).max(f64::MIN_POSITIVE);
            stats.solved += 1;
            stats.max_relative_gap = stats.max_relative_gap.max(opt.relative_gap);
            stats.max_rank_ratio = stats.max_rank_ratio.max(report.final_ratio);
            stats.max_raw_rank_ratio = stats.max_raw_rank_ratio.max(report.initial_ratio);
            stats.max_extraction_error = stats.max_extraction_error.max((achieved - opt.value).abs() / scale);
            Ok(Some((opt.value, report.omega)))
        }
        SdpOutcome::Infeasible => Ok(None),
        SdpOutcome::Unbounded => Err(Error::SdpNumerical {
            iterations: 0,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::INFINITY,
        }),
    }
}

fn carrier_lagrangian(c: &Carrier, duals: &P3DualPoint, lambda: f64, sigma2: f64, omega: &CVector) -> f64 {
    let interference = gain(&c.f, omega);
    let served = (lambda - (interference + sigma2) / c.h).max(0.0);
    (c.phi - duals.theta1) * served + gain(&c.g, omega) - duals.eta1 * interference - duals.mu1 * norm_sqr(omega)
}

/// One branch of the per-subcarrier subproblem:
/// `max tr(objective·W) + offset` s.t. `tr(F W) ⋚ bound`, `tr(W) ≤ q_peak`.
struct BranchProblem {
    objective: HermitianMatrix,
    offset: f64,
    sense: Sense,
    bound: f64,
    /// Top two eigenvalues and the top eigenvector of `objective`.
    top: (f64, f64, CVector),
}

impl BranchProblem {
    fn new(objective: HermitianMatrix, offset: f64, sense: Sense, bound: f64) -> Self {
        let (vals, mut vecs) = objective.eigen_descending();
        let second = vals.get(1).copied().unwrap_or(f64::NEG_INFINITY);
        let top = (vals[0], second, vecs.swap_remove(0));
        Self {
            objective,
            offset,
            sense,
            bound,
            top,
        }
    }

    /// Valid for the relaxation: the cross-channel constraint only removes points.
    fn upper_bound(&self, q_peak: f64) -> f64 {
        self.offset + q_peak * self.top.0.max(0.0)
    }

    /// Optimum of the problem without the cross-channel constraint, when it is
    /// unique and happens to satisfy that constraint with margin.
    fn unconstrained_optimum(&self, c: &Carrier, q_peak: f64) -> Option<(f64, CVector)> {
        let (l1, l2, ref v) = self.top;
        let scale = l1.abs().max(l2.abs());
        let margin = 1e-9;
        let (value, omega) = if l1 > margin * scale && l1 - l2 > margin * scale {
            (self.offset + q_peak * l1, v * Complex64::new(q_peak.sqrt(), 0.0))
        } else if l1 < -margin * scale {
            (self.offset, zeros(v.len()))
        } else {
            return None;
        };
        let cross = c.f_mat.quadratic(&omega);
        let room = margin * self.bound.abs().max(cross) + f64::MIN_POSITIVE;
        let holds = match self.sense {
            Sense::Ge => cross >= self.bound + room,
            Sense::Le => cross <= self.bound - room,
            Sense::Eq => false,
        };
        holds.then_some((value, omega))
    }

    fn solve(&self, c: &Carrier, q_peak: f64, stats: &mut SdpStats) -> Result<Option<(f64, CVector)>> {
        if let Some(found) = self.unconstrained_optimum(c, q_peak) {
            stats.closed_form += 1;
            return Ok(Some(found));
        }
        let inst = SdpInstance::new(self.objective.clone(), self.offset)
            .constrain(c.f_mat.clone(), self.sense, self.bound)
            .constrain(c.eye.clone(), Sense::Le, q_peak);
        solve_branch(&inst, stats)
    }
}

fn p4_carrier(ctx: &P3Context, i: usize, duals: &P3DualPoint, lambda: f64) -> Result<P4Solution> {
    let s = ctx.scenario;
    let c = &ctx.carriers[i];
    let threshold = c.h * lambda - s.sigma2;
    let k = norm_sqr(&c.f);
    let mut stats = SdpStats::default();

    let flooded = (s.q_peak * k >= threshold).then(|| {
        let objective = c.g_mat.add(&c.f_mat.scaled(-duals.eta1)).add(&c.eye.scaled(-duals.mu1));
        BranchProblem::new(objective, 0.0, Sense::Ge, threshold)
    });
    let served = (threshold >= 0.0).then(|| {
        let coef = -duals.eta1 + (duals.theta1 - c.phi) / c.h;
        let objective = c.g_mat.add(&c.f_mat.scaled(coef)).add(&c.eye.scaled(-duals.mu1));
        let offset = (c.phi - duals.theta1) * (lambda - s.sigma2 / c.h);
        BranchProblem::new(objective, offset, Sense::Le, threshold)
    });

    // Solve the more promising branch first; skip the other when its bound
    // shows it cannot win (ties go to the served branch).
    let bound_of = |b: &Option<BranchProblem>| b.as_ref().map_or(f64::NEG_INFINITY, |b| b.upper_bound(s.q_peak));
    let (ub_flooded, ub_served) = (bound_of(&flooded), bound_of(&served));
    let mut solved_flooded = None;
    let mut solved_served = None;
    if ub_flooded > ub_served {
        solved_flooded = match &flooded {
            Some(b) => b.solve(c, s.q_peak, &mut stats)?,
            None => None,
        };
        let beaten = solved_flooded.as_ref().is_some_and(|(v, _)| ub_served < *v);
        if !beaten {
            if let Some(b) = &served {
                solved_served = b.solve(c, s.q_peak, &mut stats)?;
            }
        }
    } else {
        solved_served = match &served {
            Some(b) => b.solve(c, s.q_peak, &mut stats)?,
            None => None,
        };
        let beaten = solved_served.as_ref().is_some_and(|(v, _)| ub_flooded <= *v);
        if !beaten {
            if let Some(b) = &flooded {
                solved_flooded = b.solve(c, s.q_peak, &mut stats)?;
            }
        }
    }

    let (branch, relaxation_value, reduced) = match (solved_flooded, solved_served) {
        (Some(a), Some(b)) => {
            if a.0 > b.0 {
                (Branch::Flooded, a.0, a.1)
            } else {
                (Branch::Served, b.0, b.1)
            }
        }
        (Some(a), None) => (Branch::Flooded, a.0, a.1),
        (None, Some(b)) => (Branch::Served, b.0, b.1),
        (None, None) => return Err(Error::BothBranchesInfeasible { subcarrier: i, lambda }),
    };
    let omega = lift(&c.basis, &reduced);
    let value = carrier_lagrangian(c, duals, lambda, s.sigma2, &omega);
    Ok(P4Solution {
        omega,
        branch,
        value,
        relaxation_value,
        stats,
    })
}

/// Per-subcarrier dual subproblem: the better of the flooded and served
/// branches at the given multipliers and level.
pub fn p4_solve(i: usize, duals: &P3DualPoint, lambda: f64, s: &Scenario) -> Result<P4Solution> {
    p4_carrier(&P3Context::new(s), i, duals, lambda)
}

#[derive(Debug, Clone)]
pub struct P3Result {
    /// Best feasible beamformers found (after repair).
    pub omegas: Vec<CVector>,
    pub breakdown: PowerBreakdown,
    /// Smallest dual value seen (an upper bound on the per-level optimum).
    pub dual_value: f64,
    pub duals: P3DualPoint,
    pub iterations: usize,
    /// `dual_value − breakdown.total`
    pub gap: f64,
    pub stop_reason: StopReason,
    pub stats: SdpStats,
}

#[derive(Debug, Clone, Copy)]
pub struct P3Options {
    /// Relative tolerance on the dual gap bound and on the primal-dual gap.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for P3Options {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iter: 4000,
        }
    }
}

/// Objective and constraint scales used to normalize the multipliers.
fn p3_scales(s: &Scenario) -> (f64, [f64; 3]) {
    let n = s.n_subcarriers as f64;
    let mean_phi = s.phi.iter().sum::<f64>() / n.max(1.0);
    let direct: f64 = s.g.iter().map(norm_sqr).sum::<f64>() * s.q_peak;
    let objective = (s.p_sum * mean_phi + direct).max(f64::MIN_POSITIVE);
    let interference = if s.gamma > 0.0 {
        s.gamma
    } else {
        (s.q_peak * s.f_gains().iter().sum::<f64>()).max(f64::MIN_POSITIVE)
    };
    let power = if s.q_sum > 0.0 { s.q_sum } else { (s.q_peak * n).max(f64::MIN_POSITIVE) };
    let primary = if s.p_sum > 0.0 { s.p_sum } else { 1.0 };
    (objective, [interference, power, primary])
}

/// Feasible beamformers from arbitrary ones: shrink interference components
/// to meet the interference budget, then scale everything to meet the power
/// budgets.
pub fn repair(s: &Scenario, omegas: &[CVector]) -> Vec<CVector> {
    let mut out: Vec<CVector> = omegas.to_vec();
    for w in out.iter_mut() {
        let p = norm_sqr(w);
        if p > s.q_peak {
            *w *= Complex64::new((s.q_peak / p).sqrt(), 0.0);
        }
    }
    let total_interference: f64 = s.f.iter().zip(&out).map(|(f, w)| gain(f, w)).sum();
    if total_interference > s.gamma {
        let beta = if s.gamma > 0.0 { (s.gamma / total_interference).sqrt() } else { 0.0 };
        for (w, f) in out.iter_mut().zip(&s.f) {
            let nf = norm_sqr(f);
            if nf > 0.0 {
                let along = f * (inner(f, w) / nf);
                *w -= along * Complex64::new(1.0 - beta, 0.0);
            }
        }
    }
    let total_power: f64 = out.iter().map(norm_sqr).sum();
    if total_power > s.q_sum {
        let scale = if s.q_sum > 0.0 { (s.q_sum / total_power).sqrt() } else { 0.0 };
        for w in out.iter_mut() {
            *w *= Complex64::new(scale, 0.0);
        }
    }
    out
}

fn score(s: &Scenario, omegas: &[CVector]) -> f64 {
    let interference: Vec<f64> = s.f.iter().zip(omegas).map(|(f, w)| gain(f, w)).collect();
    let direct: Vec<f64> = s.g.iter().zip(omegas).map(|(g, w)| gain(g, w)).collect();
    evaluate_terms(s, &interference, &direct).0.total
}

/// Best feasible beamformers derived from one dual iterate: the repaired
/// iterate, or the iterate's directions with reallocated powers. Subcarriers
/// the iterate leaves dark fall back to their effective intended channel.
fn recover(ctx: &P3Context, omegas: &[CVector]) -> (f64, Vec<CVector>) {
    let s = ctx.scenario;
    let repaired = repair(s, omegas);
    let mut best = (score(s, &repaired), None);

    let n = s.n_subcarriers;
    let mut dirs = Vec::with_capacity(n);
    let (mut a, mut c, mut q) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (w, carrier) in omegas.iter().zip(&ctx.carriers) {
        let p = norm_sqr(w);
        let u = if p > 0.0 {
            w / Complex64::new(p.sqrt(), 0.0)
        } else {
            let ng = norm_sqr(&carrier.g);
            if ng > 0.0 {
                &carrier.g / Complex64::new(ng.sqrt(), 0.0)
            } else {
                zeros(s.n_antennas)
            }
        };
        a.push(gain(&carrier.g, &u));
        c.push(gain(&carrier.f, &u));
        q.push(p);
        dirs.push(u);
    }
    for powers in feasible_candidates(&a, &c, &q, Limits::of(s)) {
        let interference: Vec<f64> = c.iter().zip(&powers).map(|(c, q)| c * q).collect();
        let direct: Vec<f64> = a.iter().zip(&powers).map(|(a, q)| a * q).collect();
        let v = evaluate_terms(s, &interference, &direct).0.total;
        if v > best.0 {
            best = (v, Some(powers));
        }
    }
    match best {
        (v, None) => (v, repaired),
        (v, Some(powers)) => {
            let beams = dirs.iter().zip(&powers).map(|(u, q)| u * Complex64::new(q.sqrt(), 0.0)).collect();
            (v, beams)
        }
    }
}

struct Best {
    value: f64,
    omegas: Vec<CVector>,
}

/// Dual decomposition at a fixed level.
pub fn p3_solve(s: &Scenario, lambda: f64) -> Result<P3Result> {
    p3_solve_with(&P3Context::new(s), lambda, &P3Options::default())
}

pub fn p3_solve_with(ctx: &P3Context, lambda: f64, opts: &P3Options) -> Result<P3Result> {
    p3_run(ctx, lambda, opts, None)
}

/// Levels solved together between incumbent updates. Fixed so that pruning,
/// and hence the result, does not depend on the thread count.
const LEVEL_CHUNK: usize = 4;

/// With an incumbent, the run also stops once its dual bound shows the level
/// cannot beat the incumbent by more than the tolerance.
fn p3_run(ctx: &P3Context, lambda: f64, opts: &P3Options, incumbent: Option<f64>) -> Result<P3Result> {
    let s = ctx.scenario;
    let (obj_scale, scales) = p3_scales(s);
    let to_duals = |y: &DVector<f64>| P3DualPoint {
        eta1: y[0] * obj_scale / scales[0],
        mu1: y[1] * obj_scale / scales[1],
        theta1: y[2] * obj_scale / scales[2],
    };

    let zero: Vec<CVector> = vec![zeros(s.n_antennas); s.n_subcarriers];
    let best = RefCell::new(Best {
        value: score(s, &zero),
        omegas: zero,
    });
    let stats = RefCell::new(SdpStats::default());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let best_dual = Cell::new(f64::INFINITY);
    let best_dual_point = Cell::new(P3DualPoint::default());

    let oracle = |y: &DVector<f64>| {
        let duals = to_duals(y);
        let mut value = duals.eta1 * s.gamma + duals.mu1 * s.q_sum + duals.theta1 * s.p_sum;
        let mut interference = 0.0;
        let mut power = 0.0;
        let mut primary = 0.0;
        let mut omegas = Vec::with_capacity(s.n_subcarriers);
        for i in 0..s.n_subcarriers {
            match p4_carrier(ctx, i, &duals, lambda) {
                Ok(sol) => {
                    let c = &ctx.carriers[i];
                    let inter = gain(&c.f, &sol.omega);
                    value += sol.value;
                    interference += inter;
                    power += norm_sqr(&sol.omega);
                    primary += (lambda - (inter + s.sigma2) / c.h).max(0.0);
                    stats.borrow_mut().merge(&sol.stats);
                    omegas.push(sol.omega);
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    // A zero subgradient ends the run; the error is reported afterwards.
                    return OracleAnswer::Value {
                        value: f64::NEG_INFINITY,
                        subgradient: DVector::zeros(3),
                    };
                }
            }
        }
        let (v, candidate) = recover(ctx, &omegas);
        {
            let mut b = best.borrow_mut();
            if v > b.value {
                b.value = v;
                b.omegas = candidate;
            }
        }
        if value < best_dual.get() {
            best_dual.set(value);
            best_dual_point.set(duals);
        }
        let residual = [s.gamma - interference, s.q_sum - power, s.p_sum - primary];
        let g = DVector::from_fn(3, |j, _| residual[j] / scales[j]);
        OracleAnswer::Value {
            value: value / obj_scale,
            subgradient: g,
        }
    };
    let stop = |_: f64, _: &EllipsoidState| {
        let slack = opts.tolerance * obj_scale;
        failure.borrow().is_some()
            || best.borrow().value >= best_dual.get() - slack
            || incumbent.is_some_and(|inc| best_dual.get() <= inc + slack)
    };
    let out = ellipsoid_minimize(
        oracle,
        EllipsoidState::ball(DVector::zeros(3), DUAL_BALL_RADIUS),
        &[Sign::NonNegative, Sign::NonNegative, Sign::Free],
        stop,
        &EllipsoidOptions {
            tolerance: opts.tolerance,
            max_iter: opts.max_iter,
        },
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let best = best.into_inner();
    let dual_value = best_dual.get();
    if out.stop_reason == StopReason::MaxIterations {
        return Err(Error::NoConvergence {
            iterations: out.iterations,
            gap: out.gap() * obj_scale,
        });
    }
    let breakdown = {
        let interference: Vec<f64> = s.f.iter().zip(&best.omegas).map(|(f, w)| gain(f, w)).collect();
        let direct: Vec<f64> = s.g.iter().zip(&best.omegas).map(|(g, w)| gain(g, w)).collect();
        evaluate_terms(s, &interference, &direct).0
    };
    Ok(P3Result {
        omegas: best.omegas,
        breakdown,
        dual_value,
        duals: best_dual_point.get(),
        iterations: out.iterations,
        gap: dual_value - breakdown.total,
        stop_reason: out.stop_reason,
        stats: stats.into_inner(),
    })
}

/// The proposed design: dual decomposition on a uniform grid of `grid_points`
/// levels across the feasible range, keeping the candidate with the largest
/// true received power.
pub fn p1_solve(s: &Scenario, grid_points: usize) -> Result<BeamformingSolution> {
    p1_solve_with(s, grid_points, &P3Options::default())
}

pub fn p1_solve_with(s: &Scenario, grid_points: usize, opts: &P3Options) -> Result<BeamformingSolution> {
    p1_solve_seeded(s, grid_points, opts, &[])
}

/// [`p1_solve_with`] with warm-start candidates, e.g. the solution of a
/// neighbouring instance with tighter budgets. Each candidate is made
/// feasible with [`repair`] and competes with the level search; its score
/// also lets the search abandon levels that cannot beat it.
pub fn p1_solve_seeded(
    s: &Scenario,
    grid_points: usize,
    opts: &P3Options,
    seeds: &[Vec<CVector>],
) -> Result<BeamformingSolution> {
    assert!(grid_points >= 2, "the level grid needs at least two points");
    s.validate()?;
    let mut warm: Option<(f64, Vec<CVector>)> = None;
    for seed in seeds {
        if seed.len() != s.n_subcarriers || seed.iter().any(|w| w.len() != s.n_antennas) {
            return Err(Error::InvalidScenario("warm-start beamformers do not match the scenario shape".into()));
        }
        let fixed = repair(s, seed);
        let v = score(s, &fixed);
        if warm.as_ref().is_none_or(|(b, _)| v > *b) {
            warm = Some((v, fixed));
        }
    }
    let range = lambda_range(s, None)?;
    let grid = range.grid(grid_points);
    let ctx = P3Context::new(s);
    let mut incumbent = warm.as_ref().map_or(0.0, |(v, _)| *v);
    let mut results: Vec<(f64, Result<P3Result>)> = Vec::with_capacity(grid.len());
    for chunk in grid.chunks(LEVEL_CHUNK) {
        let part: Vec<(f64, Result<P3Result>)> = chunk
            .par_iter()
            .map(|&lambda| (lambda, p3_run(&ctx, lambda, opts, Some(incumbent))))
            .collect();
        for (_, r) in &part {
            if let Ok(r) = r {
                incumbent = incumbent.max(r.breakdown.total);
            }
        }
        results.extend(part);
    }

    let mut diagnostics = Diagnostics {
        lambda_range: Some(range),
        ..Diagnostics::default()
    };
    let mut best: Option<(f64, P3Result)> = None;
    let mut last_error = None;
    for (lambda, r) in results {
        match r {
            Ok(r) => {
                diagnostics.iterations += r.iterations;
                diagnostics.sdp.merge(&r.stats);
                if best.as_ref().is_none_or(|(_, b)| r.breakdown.total > b.breakdown.total) {
                    best = Some((lambda, r));
                }
            }
            Err(e) => {
                log::warn!("level {lambda:e} failed: {e}");
                diagnostics.failed_levels.push((lambda, e.to_string()));
                last_error = Some(e);
            }
        }
    }
    match (best, warm) {
        (Some((_, r)), Some((v, omegas))) if v > r.breakdown.total => {
            diagnostics.warm_start = true;
            BeamformingSolution::evaluate(s, omegas, diagnostics)
        }
        (Some((lambda, r)), _) => {
            diagnostics.grid_lambda = Some(lambda);
            diagnostics.dual_gap = Some(r.gap);
            BeamformingSolution::evaluate(s, r.omegas, diagnostics)
        }
        (None, Some((_, omegas))) => {
            diagnostics.warm_start = true;
            BeamformingSolution::evaluate(s, omegas, diagnostics)
        }
        (None, None) => Err(Error::AllGridPointsFailed(last_error.map(|e| e.to_string()).unwrap_or_default())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, Budgets, Geometry};

    fn small(seed: u64, n: usize, m: usize) -> Scenario {
        generate_scenario(&Geometry::default(), &Budgets::default(), n, m, seed).unwrap()
    }

    #[test]
    fn repair_meets_every_budget() {
        let s = small(4, 8, 3);
        let omegas: Vec<CVector> = s.g.iter().map(|g| g * Complex64::new(1e3, 0.0)).collect();
        let fixed = repair(&s, &omegas);
        let sol = BeamformingSolution::evaluate(&s, fixed, Diagnostics::default()).unwrap();
        assert!(sol.is_feasible(&s), "{:?}", sol.residuals);
    }

    #[test]
    fn served_branch_only_when_threshold_unreachable() {
        let mut s = small(1, 1, 2);
        s.q_peak = 1e-12;
        let lambda = crate::lambda_range::lambda_min(&s) * 1.01;
        let sol = p4_solve(0, &P3DualPoint::default(), lambda, &s).unwrap();
        assert_eq!(sol.branch, Branch::Served);
    }

    #[test]
    fn flooded_branch_only_below_noise_floor() {
        let s = small(1, 1, 2);
        let lambda = 0.5 * s.sigma2 / s.h[0];
        let sol = p4_solve(0, &P3DualPoint::default(), lambda, &s).unwrap();
        assert_eq!(sol.branch, Branch::Flooded);
    }

    #[test]
    fn zero_power_budget_gives_zero_beams() {
        let mut s = small(2, 4, 2);
        s.q_sum = 0.0;
        let sol = p1_solve(&s, 2).unwrap();
        assert!(sol.omegas.iter().all(|w| norm_sqr(w) == 0.0));
        let lmin = crate::lambda_range::lambda_min(&s);
        let wf = crate::waterfill::waterfill(&vec![0.0; 4], &s.h, s.sigma2, s.p_sum);
        let expect: f64 = wf.p.iter().zip(&s.phi).map(|(p, f)| p * f).sum();
        assert_eq!(sol.breakdown.total, expect);
        assert!((sol.lambda - lmin).abs() <= 1e-15 * lmin);
    }
}
