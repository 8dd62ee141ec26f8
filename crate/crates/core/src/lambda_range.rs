//! Feasible interval of the primary water level.
//!
//! The lower end is the zero-interference level. The upper end is the largest
//! level for which some per-subcarrier allocation of secondary power, steered
//! entirely at the primary receiver, satisfies the secondary budgets and still
//! leaves the primary's water-filling at exactly that level. Feasibility at a
//! given level is decided through the sign of a Lagrange dual function that is
//! positively homogeneous in its multipliers: it is nonnegative everywhere
//! when the level is reachable and takes negative values otherwise.
//!
//! The same machinery handles any per-unit-power interference coefficients, so
//! the fixed-direction benchmark reuses it with its own coefficients.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{ellipsoid_minimize, EllipsoidOptions, EllipsoidState, OracleAnswer, Sign, StopReason};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::waterfill::{waterfill, zero_interference_level};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRange {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl LambdaRange {
    pub fn width(&self) -> f64 {
        self.lambda_max - self.lambda_min
    }

    /// `points` uniformly spaced levels from `lambda_min` to `lambda_max`.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        if points <= 1 || self.width() <= 0.0 {
            return vec![self.lambda_min];
        }
        let step = self.width() / (points - 1) as f64;
        (0..points)
            .map(|j| if j + 1 == points { self.lambda_max } else { self.lambda_min + step * j as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct P2DualPoint {
    /// Multiplier of the interference budget.
    pub eta: f64,
    /// Multiplier of the secondary sum-power budget.
    pub mu: f64,
    /// Multiplier of the primary power equality; unconstrained in sign.
    pub theta: f64,
}

/// Scalar view of a scenario: each subcarrier's secondary power `Q_i` causes
/// interference `k_i Q_i` at the primary receiver.
#[derive(Debug, Clone)]
pub struct ScalarModel {
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    pub sigma2: f64,
    pub p_sum: f64,
    pub q_sum: f64,
    pub q_peak: f64,
    pub gamma: f64,
}

impl ScalarModel {
    /// Full alignment with the cross channel: `k_i = ‖f_i‖²`.
    pub fn aligned(s: &Scenario) -> Self {
        Self::with_coefficients(s, s.f_gains())
    }

    pub fn with_coefficients(s: &Scenario, k: Vec<f64>) -> Self {
        assert_eq!(k.len(), s.n_subcarriers);
        Self {
            h: s.h.clone(),
            k,
            sigma2: s.sigma2,
            p_sum: s.p_sum,
            q_sum: s.q_sum,
            q_peak: s.q_peak,
            gamma: s.gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    fn max_k(&self) -> f64 {
        self.k.iter().copied().fold(0.0, f64::max)
    }

    /// Per-coordinate scales of the normalized dual variables.
    fn dual_scales(&self) -> [f64; 3] {
        let interference = self.q_peak * self.max_k();
        [
            if interference > 0.0 { interference } else { 1.0 },
            if self.q_peak > 0.0 { self.q_peak } else { 1.0 },
            if self.p_sum > 0.0 { self.p_sum } else { 1.0 },
        ]
    }

    /// Default feasibility tolerance in normalized dual units.
    pub fn default_tolerance(&self) -> f64 {
        let [s1, s2, s3] = self.dual_scales();
        1e-6 * (self.gamma / s1 + self.q_sum / s2 + self.p_sum / s3)
    }

    /// Primary power left on subcarrier `i` by secondary power `q`.
    pub fn primary_power(&self, i: usize, lambda: f64, q: f64) -> f64 {
        (lambda - (self.k[i] * q + self.sigma2) / self.h[i]).max(0.0)
    }

    /// Water level when every subcarrier carries `q_peak` of secondary power.
    pub fn saturated_level(&self) -> f64 {
        let interference: Vec<f64> = self.k.iter().map(|k| k * self.q_peak).collect();
        waterfill(&interference, &self.h, self.sigma2, self.p_sum).lambda
    }

    pub fn zero_interference_level(&self) -> f64 {
        waterfill(&vec![0.0; self.len()], &self.h, self.sigma2, self.p_sum).lambda
    }
}

/// Secondary power on one subcarrier at which the primary stops transmitting
/// there; `±∞` when the subcarrier's interference coefficient is zero.
fn flood_threshold(h: f64, k: f64, sigma2: f64, lambda: f64) -> f64 {
    let numer = h * lambda - sigma2;
    if k > 0.0 {
        numer / k
    } else if numer > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-subcarrier maximizer of
/// `−η k Q − μ Q − θ (λ − (kQ + σ²)/h)⁺` over `0 ≤ Q ≤ q_peak`.
/// Returns `(Q*, value)`.
pub fn p2_subproblem_scalar(h: f64, k: f64, sigma2: f64, q_peak: f64, duals: &P2DualPoint, lambda: f64) -> (f64, f64) {
    let P2DualPoint { eta, mu, theta } = *duals;
    let t = flood_threshold(h, k, sigma2, lambda);
    // slope while the primary still transmits on this subcarrier, and the offset there
    let served_slope = -eta * k - mu + theta * k / h;
    let served_offset = -theta * (lambda - sigma2 / h);
    let flooded_slope = -(eta * k + mu);

    if t < 0.0 {
        (0.0, 0.0)
    } else if t > q_peak {
        if served_slope > 0.0 {
            (q_peak, served_slope * q_peak + served_offset)
        } else {
            (0.0, served_offset)
        }
    } else {
        let below = if served_slope > 0.0 { flooded_slope * t } else { served_offset };
        let above = flooded_slope * t;
        if below < above || served_slope > 0.0 {
            (t, above.max(below))
        } else {
            (0.0, served_offset)
        }
    }
}

/// [`p2_subproblem_scalar`] on subcarrier `i` of `s` with full alignment.
pub fn p2_subproblem(s: &Scenario, i: usize, duals: &P2DualPoint, lambda: f64) -> (f64, f64) {
    let k = s.f[i].norm_squared();
    p2_subproblem_scalar(s.h[i], k, s.sigma2, s.q_peak, duals, lambda)
}

#[derive(Debug, Clone)]
pub struct DualEvaluation {
    pub value: f64,
    /// Gradient in raw multiplier coordinates `(η, μ, θ)`.
    pub subgradient: [f64; 3],
    pub q: Vec<f64>,
}

/// Dual function of the feasibility problem and one of its subgradients.
pub fn p2_dual(model: &ScalarModel, duals: &P2DualPoint, lambda: f64) -> DualEvaluation {
    let mut value = duals.eta * model.gamma + duals.mu * model.q_sum + duals.theta * model.p_sum;
    let mut interference = 0.0;
    let mut power = 0.0;
    let mut primary = 0.0;
    let mut q = Vec::with_capacity(model.len());
    for i in 0..model.len() {
        let (qi, vi) = p2_subproblem_scalar(model.h[i], model.k[i], model.sigma2, model.q_peak, duals, lambda);
        value += vi;
        interference += model.k[i] * qi;
        power += qi;
        primary += model.primary_power(i, lambda, qi);
        q.push(qi);
    }
    DualEvaluation {
        value,
        subgradient: [model.gamma - interference, model.q_sum - power, model.p_sum - primary],
        q,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible {
        /// Lower bound on the dual function over the search region.
        dual_lower_bound: f64,
        iterations: usize,
    },
    Infeasible {
        /// Multipliers at which the dual function is negative.
        certificate: P2DualPoint,
        dual_value: f64,
        iterations: usize,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Radius of the dual search ball in normalized coordinates.
pub const DUAL_BALL_RADIUS: f64 = 1e2;
const P2_MAX_ITER: usize = 20_000;

/// Dual feasibility test at level `lambda`. `tolerance` is in normalized dual
/// units; see [`ScalarModel::default_tolerance`].
pub fn p2_feasible_model(model: &ScalarModel, lambda: f64, tolerance: f64) -> Result<Feasibility> {
    let scales = model.dual_scales();
    let to_duals = |y: &DVector<f64>| P2DualPoint {
        eta: y[0] / scales[0],
        mu: y[1] / scales[1],
        theta: y[2] / scales[2],
    };
    let oracle = |y: &DVector<f64>| {
        let ev = p2_dual(model, &to_duals(y), lambda);
        let g = DVector::from_fn(3, |j, _| ev.subgradient[j] / scales[j]);
        OracleAnswer::Value { value: ev.value, subgradient: g }
    };
    let out = ellipsoid_minimize(
        oracle,
        EllipsoidState::ball(DVector::zeros(3), DUAL_BALL_RADIUS),
        &[Sign::NonNegative, Sign::NonNegative, Sign::Free],
        |v, _| v < -tolerance,
        &EllipsoidOptions {
            tolerance,
            max_iter: P2_MAX_ITER,
        },
    )?;
    log::trace!(
        "p2 at lambda={lambda:e}: {:?} after {} iterations, best {:e}, bound {:e}, radius {}",
        out.stop_reason,
        out.iterations,
        out.best_value,
        out.lower_bound,
        DUAL_BALL_RADIUS
    );
    match out.stop_reason {
        StopReason::Predicate => Ok(Feasibility::Infeasible {
            certificate: to_duals(&out.best_point),
            dual_value: out.best_value,
            iterations: out.iterations,
        }),
        StopReason::Converged | StopReason::Exhausted => Ok(Feasibility::Feasible {
            dual_lower_bound: out.lower_bound,
            iterations: out.iterations,
        }),
        StopReason::MaxIterations => Err(Error::Inconclusive {
            lambda,
            best_value: out.best_value,
            lower_bound: out.lower_bound,
            iterations: out.iterations,
        }),
    }
}

pub fn p2_feasible(s: &Scenario, lambda: f64, tolerance: Option<f64>) -> Result<Feasibility> {
    let model = ScalarModel::aligned(s);
    let tol = tolerance.unwrap_or_else(|| model.default_tolerance());
    p2_feasible_model(&model, lambda, tol)
}

pub fn lambda_min(s: &Scenario) -> f64 {
    zero_interference_level(s)
}

/// Default bisection tolerance: a fixed fraction of the bracket width.
pub const LAMBDA_BISECT_REL_TOL: f64 = 1e-7;

/// Largest feasible level, bisected to within `bisect_tol`; the returned value
/// is always on the feasible side.
pub fn lambda_range_model(model: &ScalarModel, bisect_tol: Option<f64>) -> Result<LambdaRange> {
    let lambda_min = model.zero_interference_level();
    let degenerate = model.gamma <= 0.0 || model.q_sum <= 0.0 || model.q_peak <= 0.0 || model.max_k() <= 0.0;
    if degenerate || model.is_empty() {
        return Ok(LambdaRange {
            lambda_min,
            lambda_max: lambda_min,
        });
    }
    let tol = model.default_tolerance();
    let mut hi = model.saturated_level();
    if hi <= lambda_min {
        return Ok(LambdaRange {
            lambda_min,
            lambda_max: lambda_min,
        });
    }
    if p2_feasible_model(model, hi, tol)?.is_feasible() {
        return Ok(LambdaRange { lambda_min, lambda_max: hi });
    }
    let mut lo = lambda_min;
    let step = bisect_tol.unwrap_or(LAMBDA_BISECT_REL_TOL * (hi - lo));
    while hi - lo > step {
        let mid = 0.5 * (lo + hi);
        if p2_feasible_model(model, mid, tol)?.is_feasible() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LambdaRange { lambda_min, lambda_max: lo })
}

pub fn lambda_range(s: &Scenario, bisect_tol: Option<f64>) -> Result<LambdaRange> {
    lambda_range_model(&ScalarModel::aligned(s), bisect_tol)
}

pub fn lambda_max(s: &Scenario, bisect_tol: Option<f64>) -> Result<f64> {
    Ok(lambda_range(s, bisect_tol)?.lambda_max)
}
