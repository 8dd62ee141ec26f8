//! Baseline designs, each scored under the true primary reaction:
//! zero-forcing, maximum-ratio directions with optimized powers, and the
//! reaction-unaware design that maximizes direct power only.

use std::cell::{Cell, RefCell};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::allocation::{feasible_candidates, Limits};
pub use crate::allocation::{greedy_power_allocation, interference_limited_allocation};
use crate::beamopt::{BeamformingSolution, Diagnostics, P3Options};
use crate::ellipsoid::{ellipsoid_minimize, EllipsoidOptions, EllipsoidState, OracleAnswer, Sign, StopReason};
use crate::error::{Error, Result};
use crate::lambda_range::{lambda_range_model, ScalarModel, DUAL_BALL_RADIUS};
use crate::linalg::{coordinates, gain, inner, lift, norm_sqr, span_basis, zeros, CVector};
use crate::scenario::Scenario;
use crate::sdp::HermitianMatrix;
use crate::waterfill::evaluate_terms;

fn finish(s: &Scenario, omegas: Vec<CVector>, diagnostics: Diagnostics) -> Result<BeamformingSolution> {
    BeamformingSolution::evaluate(s, omegas, diagnostics)
}

/// Unit direction of `g` projected off `f`, and the resulting gain `|gᴴu|²`.
fn null_direction(g: &CVector, f: &CVector) -> (CVector, f64) {
    let nf = norm_sqr(f);
    let p = if nf > 0.0 { g - f * (inner(f, g) / nf) } else { g.clone() };
    let np = norm_sqr(&p);
    if np <= 1e-30 * norm_sqr(g).max(f64::MIN_POSITIVE) || np == 0.0 {
        return (zeros(g.len()), 0.0);
    }
    let u = &p / Complex64::new(np.sqrt(), 0.0);
    let a = gain(g, &u);
    (u, a)
}

/// Zero-forcing: each beam lies in the null space of its cross channel;
/// powers by the greedy allocation on the projected gains.
pub fn zf_solve(s: &Scenario) -> Result<BeamformingSolution> {
    s.validate()?;
    if s.n_antennas < 2 {
        return Err(Error::ZeroForcingInfeasible(s.n_antennas));
    }
    let (dirs, gains): (Vec<CVector>, Vec<f64>) = s.g.iter().zip(&s.f).map(|(g, f)| null_direction(g, f)).unzip();
    let q = greedy_power_allocation(&gains, s.q_sum, s.q_peak);
    let omegas = dirs.iter().zip(&q).map(|(u, q)| u * Complex64::new(q.sqrt(), 0.0)).collect();
    finish(s, omegas, Diagnostics::default())
}

/// Per-subcarrier coefficients of maximum-ratio beams `√Q g/‖g‖`:
/// interference `c_i Q_i` and direct power `d_i Q_i`.
pub fn mrt_coefficients(s: &Scenario) -> (Vec<f64>, Vec<f64>) {
    s.g.iter()
        .zip(&s.f)
        .map(|(g, f)| {
            let d = norm_sqr(g);
            let c = if d > 0.0 { gain(f, g) / d } else { 0.0 };
            (c, d)
        })
        .unzip()
}

/// Maximizer of `(φ − θ)(λ − (cQ + σ²)/h)⁺ + (d − ηc − μ) Q` over `[0, q_peak]`.
fn mrt_carrier(model: &ScalarModel, d: f64, phi: f64, i: usize, duals: [f64; 3], lambda: f64) -> (f64, f64) {
    let [eta, mu, theta] = duals;
    let c = model.k[i];
    let value = |q: f64| (phi - theta) * model.primary_power(i, lambda, q) + (d - eta * c - mu) * q;
    let mut best = (0.0, value(0.0));
    if c > 0.0 {
        let kink = ((model.h[i] * lambda - model.sigma2) / c).clamp(0.0, model.q_peak);
        let v = value(kink);
        if v > best.1 {
            best = (kink, v);
        }
    }
    let v = value(model.q_peak);
    if v > best.1 {
        best = (model.q_peak, v);
    }
    best
}

fn scalar_total(s: &Scenario, model: &ScalarModel, d: &[f64], q: &[f64]) -> f64 {
    let interference: Vec<f64> = q.iter().zip(&model.k).map(|(q, c)| q * c).collect();
    let direct: Vec<f64> = q.iter().zip(d).map(|(q, d)| q * d).collect();
    evaluate_terms(s, &interference, &direct).0.total
}

struct ScalarLevel {
    q: Vec<f64>,
    total: f64,
    iterations: usize,
    gap: f64,
}

fn mrt_level(s: &Scenario, model: &ScalarModel, d: &[f64], lambda: f64, opts: &P3Options) -> Result<ScalarLevel> {
    let n = model.len();
    let mean_phi = s.phi.iter().sum::<f64>() / (n as f64).max(1.0);
    let obj_scale = (s.p_sum * mean_phi + d.iter().sum::<f64>() * s.q_peak).max(f64::MIN_POSITIVE);
    let scales = [
        if s.gamma > 0.0 { s.gamma } else { (s.q_peak * model.k.iter().sum::<f64>()).max(f64::MIN_POSITIVE) },
        if s.q_sum > 0.0 { s.q_sum } else { (s.q_peak * n as f64).max(f64::MIN_POSITIVE) },
        if s.p_sum > 0.0 { s.p_sum } else { 1.0 },
    ];
    let limits = Limits::of(s);
    let zero = vec![0.0; n];
    let best = RefCell::new((scalar_total(s, model, d, &zero), zero));
    let best_dual = Cell::new(f64::INFINITY);
    let oracle = |y: &DVector<f64>| {
        let duals = [0, 1, 2].map(|j| y[j] * obj_scale / scales[j]);
        let mut value = duals[0] * s.gamma + duals[1] * s.q_sum + duals[2] * s.p_sum;
        let mut q = Vec::with_capacity(n);
        let (mut load, mut total, mut primary) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (qi, vi) = mrt_carrier(model, d[i], s.phi[i], i, duals, lambda);
            value += vi;
            load += model.k[i] * qi;
            total += qi;
            primary += model.primary_power(i, lambda, qi);
            q.push(qi);
        }
        for candidate in feasible_candidates(d, &model.k, &q, limits) {
            let v = scalar_total(s, model, d, &candidate);
            if v > best.borrow().0 {
                *best.borrow_mut() = (v, candidate);
            }
        }
        best_dual.set(best_dual.get().min(value));
        let residual = [s.gamma - load, s.q_sum - total, s.p_sum - primary];
        OracleAnswer::Value {
            value: value / obj_scale,
            subgradient: DVector::from_fn(3, |j, _| residual[j] / scales[j]),
        }
    };
    let stop = |_: f64, _: &EllipsoidState| best.borrow().0 >= best_dual.get() - opts.tolerance * obj_scale;
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
    if out.stop_reason == StopReason::MaxIterations {
        return Err(Error::NoConvergence {
            iterations: out.iterations,
            gap: out.gap() * obj_scale,
        });
    }
    let (total, q) = best.into_inner();
    Ok(ScalarLevel {
        q,
        total,
        iterations: out.iterations,
        gap: best_dual.get() - total,
    })
}

/// Maximum-ratio directions with powers from the same level search and dual
/// decomposition as the proposed design, on scalar per-subcarrier problems.
pub fn mrt_solve(s: &Scenario, grid_points: usize) -> Result<BeamformingSolution> {
    mrt_solve_with(s, grid_points, &P3Options::default())
}

pub fn mrt_solve_with(s: &Scenario, grid_points: usize, opts: &P3Options) -> Result<BeamformingSolution> {
    assert!(grid_points >= 2, "the level grid needs at least two points");
    s.validate()?;
    let (c, d) = mrt_coefficients(s);
    let model = ScalarModel::with_coefficients(s, c);
    let range = lambda_range_model(&model, None)?;
    let results: Vec<(f64, Result<ScalarLevel>)> = range
        .grid(grid_points)
        .par_iter()
        .map(|&lambda| (lambda, mrt_level(s, &model, &d, lambda, opts)))
        .collect();
    let mut diagnostics = Diagnostics {
        lambda_range: Some(range),
        ..Diagnostics::default()
    };
    let mut best: Option<(f64, ScalarLevel)> = None;
    let mut last_error = None;
    for (lambda, r) in results {
        match r {
            Ok(r) => {
                diagnostics.iterations += r.iterations;
                if best.as_ref().is_none_or(|(_, b)| r.total > b.total) {
                    best = Some((lambda, r));
                }
            }
            Err(e) => {
                diagnostics.failed_levels.push((lambda, e.to_string()));
                last_error = Some(e);
            }
        }
    }
    let Some((lambda, r)) = best else {
        return Err(Error::AllGridPointsFailed(last_error.map(|e| e.to_string()).unwrap_or_default()));
    };
    diagnostics.grid_lambda = Some(lambda);
    diagnostics.dual_gap = Some(r.gap);
    let omegas = s
        .g
        .iter()
        .zip(&r.q)
        .map(|(g, q)| {
            let n = norm_sqr(g);
            if n > 0.0 {
                g * Complex64::new((q / n).sqrt(), 0.0)
            } else {
                zeros(s.n_antennas)
            }
        })
        .collect();
    finish(s, omegas, diagnostics)
}

/// Top eigenpair of `G − ηF − μI` on span{g, f}, lifted back.
fn conventional_direction(g: &CVector, f: &CVector, eta: f64, mu: f64) -> (f64, CVector) {
    let basis = span_basis(g, f);
    let gr = coordinates(&basis, g);
    let fr = coordinates(&basis, f);
    let m = HermitianMatrix::outer(&gr)
        .add(&HermitianMatrix::outer(&fr).scaled(-eta))
        .add(&HermitianMatrix::identity(basis.len()).scaled(-mu));
    let (vals, vecs) = m.eigen_descending();
    (vals[0], lift(&basis, &vecs[0]))
}

/// Reaction-unaware design: maximize direct power under the secondary budgets
/// alone, then score under the true primary reaction. Directions come from
/// the dual optimum over the interference and sum-power multipliers; powers
/// from the exact linear program given those directions.
pub fn conventional_solve(s: &Scenario) -> Result<BeamformingSolution> {
    conventional_solve_with(s, &P3Options::default())
}

pub fn conventional_solve_with(s: &Scenario, opts: &P3Options) -> Result<BeamformingSolution> {
    s.validate()?;
    let n = s.n_subcarriers;
    let mut diagnostics = Diagnostics::default();
    let dirs: Vec<CVector> = if s.gamma <= 0.0 {
        s.g.iter().zip(&s.f).map(|(g, f)| null_direction(g, f).0).collect()
    } else {
        let obj_scale = (s.q_peak * s.g.iter().map(norm_sqr).sum::<f64>()).max(f64::MIN_POSITIVE);
        let scales = [
            s.gamma,
            if s.q_sum > 0.0 { s.q_sum } else { (s.q_peak * n as f64).max(f64::MIN_POSITIVE) },
        ];
        let oracle = |y: &DVector<f64>| {
            let eta = y[0] * obj_scale / scales[0];
            let mu = y[1] * obj_scale / scales[1];
            let mut value = eta * s.gamma + mu * s.q_sum;
            let (mut load, mut total) = (0.0, 0.0);
            for (g, f) in s.g.iter().zip(&s.f) {
                let (top, u) = conventional_direction(g, f, eta, mu);
                if top > 0.0 {
                    value += s.q_peak * top;
                    load += s.q_peak * gain(f, &u);
                    total += s.q_peak;
                }
            }
            let residual = [s.gamma - load, s.q_sum - total];
            OracleAnswer::Value {
                value: value / obj_scale,
                subgradient: DVector::from_fn(2, |j, _| residual[j] / scales[j]),
            }
        };
        let out = ellipsoid_minimize(
            oracle,
            EllipsoidState::ball(DVector::zeros(2), DUAL_BALL_RADIUS),
            &[Sign::NonNegative, Sign::NonNegative],
            |_, _| false,
            &EllipsoidOptions {
                tolerance: opts.tolerance,
                max_iter: opts.max_iter,
            },
        )?;
        if out.stop_reason == StopReason::MaxIterations {
            return Err(Error::NoConvergence {
                iterations: out.iterations,
                gap: out.gap() * obj_scale,
            });
        }
        diagnostics.iterations = out.iterations;
        diagnostics.dual_gap = Some(out.gap() * obj_scale);
        let eta = out.best_point[0] * obj_scale / scales[0];
        let mu = out.best_point[1] * obj_scale / scales[1];
        s.g.iter().zip(&s.f).map(|(g, f)| conventional_direction(g, f, eta, mu).1).collect()
    };
    let a: Vec<f64> = s.g.iter().zip(&dirs).map(|(g, u)| gain(g, u)).collect();
    let c: Vec<f64> = s.f.iter().zip(&dirs).map(|(f, u)| gain(f, u)).collect();
    let q = if s.gamma <= 0.0 {
        greedy_power_allocation(&a, s.q_sum, s.q_peak)
    } else {
        interference_limited_allocation(&a, &c, s.gamma, s.q_sum, s.q_peak)
    };
    let omegas = dirs.iter().zip(&q).map(|(u, q)| u * Complex64::new(q.sqrt(), 0.0)).collect();
    finish(s, omegas, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, Budgets, Geometry};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn orthogonal_and_parallel_channels() {
        let g = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let f = CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 2.0)]);
        let (u, a) = null_direction(&g, &f);
        assert!((a - 1.0).abs() < 1e-15);
        assert!((&u - &g).norm() < 1e-15);
        let (_, a) = null_direction(&g, &(&g * c(0.0, 3.0)));
        assert_eq!(a, 0.0);
    }

    #[test]
    fn zero_forcing_needs_two_antennas() {
        let s = generate_scenario(&Geometry::default(), &Budgets::default(), 4, 1, 0).unwrap();
        assert!(matches!(zf_solve(&s), Err(Error::ZeroForcingInfeasible(1))));
    }

    #[test]
    fn zero_forcing_causes_no_interference() {
        let s = generate_scenario(&Geometry::default(), &Budgets::default(), 16, 4, 3).unwrap();
        let sol = zf_solve(&s).unwrap();
        assert!(sol.interference.iter().all(|&i| i <= 1e-30), "{:?}", sol.interference);
        assert!(sol.is_feasible(&s));
    }

    #[test]
    fn conventional_without_interference_limit_aligns_with_g() {
        let mut s = generate_scenario(&Geometry::default(), &Budgets::default(), 8, 3, 9).unwrap();
        s.gamma = 1e3;
        let sol = conventional_solve(&s).unwrap();
        for (w, g) in sol.omegas.iter().zip(&s.g) {
            let cos = gain(g, w) / (norm_sqr(g) * norm_sqr(w));
            assert!((cos - 1.0).abs() < 1e-9, "{cos}");
        }
    }

    #[test]
    fn conventional_with_zero_limit_matches_zero_forcing() {
        let mut s = generate_scenario(&Geometry::default(), &Budgets::default(), 8, 3, 9).unwrap();
        s.gamma = 0.0;
        let a = conventional_solve(&s).unwrap();
        let b = zf_solve(&s).unwrap();
        assert!((a.breakdown.direct - b.breakdown.direct).abs() <= 1e-12 * b.breakdown.direct);
    }

    #[test]
    fn mrt_with_orthogonal_cross_channels_is_greedy() {
        let mut s = generate_scenario(&Geometry::default(), &Budgets::default(), 6, 2, 1).unwrap();
        for (g, f) in s.g.iter().zip(s.f.iter_mut()) {
            // rotate g by 90° in the antenna plane: orthogonal to g
            *f = CVector::from_vec(vec![-g[1].conj(), g[0].conj()]);
        }
        s.q_sum = 0.25;
        let sol = mrt_solve(&s, 4).unwrap();
        let gains: Vec<f64> = s.g.iter().map(norm_sqr).collect();
        let q = greedy_power_allocation(&gains, s.q_sum, s.q_peak);
        let expect: f64 = q.iter().zip(&gains).map(|(q, g)| q * g).sum();
        assert!((sol.breakdown.direct - expect).abs() <= 1e-9 * expect, "{} vs {}", sol.breakdown.direct, expect);
    }
}
