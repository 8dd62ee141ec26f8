//! Ellipsoid method for minimizing convex, possibly non-differentiable
//! functions from subgradient information.
//!
//! Sign constraints on coordinates are enforced with deep feasibility cuts;
//! objective steps use deep cuts against the best value seen so far. The
//! returned lower bound `max_k f(x_k) − sqrt(g_kᵀ P_k g_k)` is valid as long
//! as the initial ellipsoid contains a minimizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    pub center: DVector<f64>,
    /// `E = {x : (x−c)ᵀ P⁻¹ (x−c) ≤ 1}`
    pub shape: DMatrix<f64>,
}

impl EllipsoidState {
    pub fn ball(center: DVector<f64>, radius: f64) -> Self {
        let n = center.len();
        Self {
            center,
            shape: DMatrix::identity(n, n) * (radius * radius),
        }
    }

    pub fn axis_aligned(center: DVector<f64>, radii: &[f64]) -> Self {
        assert_eq!(center.len(), radii.len());
        let diag = DVector::from_iterator(radii.len(), radii.iter().map(|r| r * r));
        Self {
            center,
            shape: DMatrix::from_diagonal(&diag),
        }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// Cut with `{x : aᵀ(x − c) ≤ −depth}`. Returns `false` when the cut
    /// leaves nothing of the ellipsoid (`depth ≥ sqrt(aᵀPa)`).
    fn cut(&mut self, a: &DVector<f64>, depth: f64, iteration: usize) -> Result<bool> {
        let n = self.dimension() as f64;
        let pa = &self.shape * a;
        let apa = a.dot(&pa);
        if !(apa > 0.0) || !apa.is_finite() {
            return Err(Error::EllipsoidCollapse { iteration });
        }
        let root = apa.sqrt();
        let alpha = (depth / root).max(0.0);
        if alpha >= 1.0 {
            return Ok(false);
        }
        let b = pa / root;
        if self.dimension() == 1 {
            self.center -= &b * (0.5 * (1.0 + alpha));
            self.shape *= 0.25 * (1.0 - alpha) * (1.0 - alpha);
        } else {
            let tau = (1.0 + n * alpha) / (n + 1.0);
            let sigma = 2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha));
            let delta = n * n * (1.0 - alpha * alpha) / (n * n - 1.0);
            self.center -= &b * tau;
            let bbt = &b * b.transpose();
            self.shape = (&self.shape - bbt * sigma) * delta;
            let sym = (&self.shape + self.shape.transpose()) * 0.5;
            self.shape = sym;
        }
        if (0..self.dimension()).any(|k| !(self.shape[(k, k)] > 0.0)) {
            return Err(Error::EllipsoidCollapse { iteration });
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Free,
    NonNegative,
}

/// What the oracle reports at a query point.
#[derive(Debug, Clone)]
pub enum OracleAnswer {
    Value { value: f64, subgradient: DVector<f64> },
    /// The point is outside the oracle's domain; keep `{x : normalᵀ(x−c) ≤ −depth}`.
    Cut { normal: DVector<f64>, depth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The caller's predicate fired.
    Predicate,
    /// The value-gap bound dropped below tolerance.
    Converged,
    /// Every point that could still improve on the best value was cut away.
    Exhausted,
    MaxIterations,
}

#[derive(Debug, Clone, Copy)]
pub struct EllipsoidOptions {
    /// Absolute tolerance on `best value − lower bound`.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for EllipsoidOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipsoidOutcome {
    pub best_point: DVector<f64>,
    pub best_value: f64,
    pub lower_bound: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_state: EllipsoidState,
}

impl EllipsoidOutcome {
    pub fn gap(&self) -> f64 {
        self.best_value - self.lower_bound
    }
}

pub fn ellipsoid_minimize<O, S>(
    mut oracle: O,
    init: EllipsoidState,
    signs: &[Sign],
    mut stop: S,
    opts: &EllipsoidOptions,
) -> Result<EllipsoidOutcome>
where
    O: FnMut(&DVector<f64>) -> OracleAnswer,
    S: FnMut(f64, &EllipsoidState) -> bool,
{
    let n = init.dimension();
    assert!(n >= 1, "ellipsoid dimension must be positive");
    assert_eq!(signs.len(), n, "one sign constraint per coordinate");

    let mut state = init;
    let mut best_point = state.center.clone();
    let mut best_value = f64::INFINITY;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut iterations = 0;

    let outcome = |state: EllipsoidState, best_point, best_value, lower_bound, iterations, stop_reason| {
        Ok(EllipsoidOutcome {
            best_point,
            best_value,
            lower_bound,
            iterations,
            stop_reason,
            final_state: state,
        })
    };

    while iterations < opts.max_iter {
        iterations += 1;

        if let Some(k) = (0..n).find(|&k| signs[k] == Sign::NonNegative && state.center[k] < 0.0) {
            // keep x_k ≥ 0:  −(x_k − c_k) ≤ c_k
            let mut a = DVector::zeros(n);
            a[k] = -1.0;
            let depth = -state.center[k];
            if !state.cut(&a, depth, iterations)? {
                return outcome(state, best_point, best_value, lower_bound, iterations, StopReason::Exhausted);
            }
            continue;
        }

        match oracle(&state.center) {
            OracleAnswer::Cut { normal, depth } => {
                if !state.cut(&normal, depth, iterations)? {
                    return outcome(state, best_point, best_value, lower_bound, iterations, StopReason::Exhausted);
                }
            }
            OracleAnswer::Value { value, subgradient } => {
                if value < best_value {
                    best_value = value;
                    best_point = state.center.clone();
                }
                if stop(value, &state) {
                    return outcome(state, best_point, best_value, lower_bound, iterations, StopReason::Predicate);
                }
                let spread = subgradient.dot(&(&state.shape * &subgradient));
                if !(spread >= 0.0) || !spread.is_finite() {
                    return Err(Error::EllipsoidCollapse { iteration: iterations });
                }
                let radius = spread.sqrt();
                lower_bound = lower_bound.max(value - radius);
                if best_value - lower_bound <= opts.tolerance {
                    return outcome(state, best_point, best_value, lower_bound, iterations, StopReason::Converged);
                }
                if radius == 0.0 {
                    // zero subgradient: the center is a minimizer
                    lower_bound = value;
                    return outcome(state, best_point, best_value, lower_bound, iterations, StopReason::Converged);
                }
                let depth = value - best_value;
                if !state.cut(&subgradient, depth, iterations)? {
                    lower_bound = lower_bound.max(best_value);
                    return outcome(state, best_point, best_value, lower_bound, iterations, StopReason::Exhausted);
                }
            }
        }
    }
    outcome(state, best_point, best_value, lower_bound, iterations, StopReason::MaxIterations)
}
