//! Brute-force reference solutions for small instances.
//!
//! Everything here is plain enumeration plus the exact water-filling
//! reaction; none of the optimization machinery is used, so the results can
//! check it independently.
//!
//! Beamformers are searched in span{g_i, f_i}: a component orthogonal to both
//! channels changes neither the direct power nor the interference and only
//! spends power, so some optimum always lies in that span. Within the span
//! `ω = α ĝ + β e^{jψ} û` with `ĝ = g/‖g‖`, `û` the unit vector completing
//! the span, `α, β ≥ 0` and `ψ ∈ [0, 2π)`; a common phase does not matter, so
//! `α` is taken real. The ray orthogonal to `f` is added explicitly so that
//! exact zero-forcing points are always on the grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::scenario::Scenario;
use crate::waterfill::waterfill;

/// Interference up to this multiple of the noise power counts as zero when
/// checking the interference budget.
pub const ZERO_INTERFERENCE: f64 = 1e-9;

fn dot(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn energy(a: &CVector) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn unit(v: &CVector) -> Option<CVector> {
    let n = energy(v).sqrt();
    (n > 0.0).then(|| v / Complex64::new(n, 0.0))
}

/// Orthonormal basis `(ĝ, û)` of span{g, f}; `û` is `None` when the span is
/// one-dimensional.
fn span_basis(g: &CVector, f: &CVector) -> (CVector, Option<CVector>) {
    let e0 = {
        let mut e = CVector::from_element(g.len(), Complex64::new(0.0, 0.0));
        e[0] = Complex64::new(1.0, 0.0);
        e
    };
    let g_hat = unit(g).unwrap_or_else(|| unit(f).unwrap_or(e0));
    let r = f - &g_hat * dot(&g_hat, f);
    let u_hat = if energy(&r) > 1e-24 * energy(f) { unit(&r) } else { None };
    (g_hat, u_hat)
}

/// Maximize `eval(a, ψ)` over `a ∈ [0, π/2]`, `ψ ∈ [0, 2π)`: an
/// `angles × phases` grid followed by three zoomed grids around the best
/// direction. `eval` returns `None` where nothing is feasible.
fn search_directions<T>(
    (angles, phases): (usize, usize),
    eval: impl Fn(f64, f64) -> Option<(f64, T)>,
) -> Option<(f64, T)> {
    const ZOOM_POINTS: usize = 101;
    let mut best: Option<(f64, f64, f64, T)> = None;
    let scan = |best: &mut Option<(f64, f64, f64, T)>, a_range: (f64, f64), psi_range: (f64, f64), na: usize, np: usize, closed_phase: bool| {
        for ka in 0..na {
            let a = (a_range.0 + (a_range.1 - a_range.0) * ka as f64 / (na - 1).max(1) as f64).clamp(0.0, 0.5 * PI);
            for kp in 0..np {
                let denom = if closed_phase { (np - 1).max(1) } else { np } as f64;
                let psi = psi_range.0 + (psi_range.1 - psi_range.0) * kp as f64 / denom;
                if let Some((v, x)) = eval(a, psi) {
                    if best.as_ref().is_none_or(|b| v > b.0) {
                        *best = Some((v, a, psi, x));
                    }
                }
            }
        }
    };
    scan(&mut best, (0.0, 0.5 * PI), (0.0, 2.0 * PI), angles, phases, false);
    let (mut da, mut dp) = (0.5 * PI / (angles - 1).max(1) as f64, 2.0 * PI / phases as f64);
    for _ in 0..3 {
        let Some((_, a, psi, _)) = best.as_ref() else { break };
        let (a, psi) = (*a, *psi);
        scan(&mut best, (a - 2.0 * da, a + 2.0 * da), (psi - 2.0 * dp, psi + 2.0 * dp), ZOOM_POINTS, ZOOM_POINTS, true);
        da *= 4.0 / (ZOOM_POINTS - 1) as f64;
        dp *= 4.0 / (ZOOM_POINTS - 1) as f64;
    }
    best.map(|(v, _, _, x)| (v, x))
}

/// One beamformer on the per-subcarrier grid and the quantities that matter.
#[derive(Debug, Clone)]
pub struct SpanPoint {
    pub omega: CVector,
    pub power: f64,
    pub interference: f64,
    pub direct: f64,
}

/// Grid over `ω = α ĝ + β e^{jψ} û` with `‖ω‖² ≤ q_peak`, `resolution` values
/// per axis, plus the zero-forcing ray. Points whose power or interference
/// already exceed `power_cap` or `interference_cap` are dropped.
pub fn span_grid(
    g: &CVector,
    f: &CVector,
    q_peak: f64,
    resolution: usize,
    power_cap: f64,
    interference_cap: f64,
) -> Vec<SpanPoint> {
    assert!(resolution >= 2, "resolution must be at least 2");
    let (g_hat, u_hat) = span_basis(g, f);
    let amp_max = q_peak.sqrt();
    let amp = |k: usize| amp_max * k as f64 / (resolution - 1) as f64;
    let cap = q_peak.min(power_cap) * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut push = |omega: CVector| {
        let power = energy(&omega);
        if power > cap {
            return;
        }
        let interference = dot(f, &omega).norm_sqr();
        if interference > interference_cap {
            return;
        }
        let direct = dot(g, &omega).norm_sqr();
        out.push(SpanPoint {
            omega,
            power,
            interference,
            direct,
        });
    };
    for ka in 0..resolution {
        let alpha = amp(ka);
        match &u_hat {
            None => push(&g_hat * Complex64::new(alpha, 0.0)),
            Some(u) => {
                for kb in 0..resolution {
                    let beta = amp(kb);
                    if alpha * alpha + beta * beta > q_peak * (1.0 + 1e-12) {
                        break;
                    }
                    let phases = if kb == 0 { 1 } else { resolution };
                    for kp in 0..phases {
                        let psi = 2.0 * PI * kp as f64 / phases as f64;
                        push(&g_hat * Complex64::new(alpha, 0.0) + u * Complex64::from_polar(beta, psi));
                    }
                }
            }
        }
    }
    // zero-forcing ray
    let zf = match unit(f) {
        Some(fh) => g - &fh * dot(&fh, g),
        None => g.clone(),
    };
    if let Some(z) = unit(&zf) {
        for k in 1..resolution {
            push(&z * Complex64::new(amp(k), 0.0));
        }
    }
    out
}

/// Keep, per (power, interference) cell of a `bins × bins` partition, the
/// point with the largest direct power.
fn best_per_cell(points: Vec<SpanPoint>, power_range: f64, interference_range: f64, bins: usize) -> Vec<SpanPoint> {
    let cell = |v: f64, range: f64| -> usize {
        if range > 0.0 {
            ((v / range * bins as f64) as usize).min(bins - 1)
        } else {
            0
        }
    };
    let mut table: Vec<Option<SpanPoint>> = vec![None; bins * bins];
    for p in points {
        let key = cell(p.power, power_range) * bins + cell(p.interference, interference_range);
        let slot = &mut table[key];
        if slot.as_ref().is_none_or(|q| p.direct > q.direct) {
            *slot = Some(p);
        }
    }
    table.into_iter().flatten().collect()
}

/// Enumerate per-subcarrier grid combinations for `N ≤ 2` and keep the one
/// maximizing `score`, which returns `None` for infeasible combinations.
fn search<F>(s: &Scenario, resolution: usize, mut score: F) -> Option<(f64, Vec<CVector>)>
where
    F: FnMut(&[f64], &[f64], f64) -> Option<f64>,
{
    let power_range = s.q_peak.min(s.q_sum);
    let interference_cap = s.gamma + ZERO_INTERFERENCE * s.sigma2;
    let grids: Vec<Vec<SpanPoint>> = (0..s.n_subcarriers)
        .map(|i| {
            let pts = span_grid(&s.g[i], &s.f[i], s.q_peak, resolution, s.q_sum, interference_cap);
            if s.n_subcarriers == 1 {
                pts
            } else {
                let i_range = (s.q_peak * energy(&s.f[i])).min(s.gamma);
                best_per_cell(pts, power_range, i_range, resolution)
            }
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |idx: Vec<usize>| {
        let pts: Vec<&SpanPoint> = idx.iter().enumerate().map(|(i, &k)| &grids[i][k]).collect();
        let power: f64 = pts.iter().map(|p| p.power).sum();
        let interference: Vec<f64> = pts.iter().map(|p| p.interference).collect();
        if power > s.q_sum * (1.0 + 1e-12) || interference.iter().sum::<f64>() > interference_cap {
            return;
        }
        let direct: Vec<f64> = pts.iter().map(|p| p.direct).collect();
        if let Some(v) = score(&interference, &direct, power) {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, idx));
            }
        }
    };
    match grids.len() {
        1 => (0..grids[0].len()).for_each(|a| consider(vec![a])),
        2 => {
            for a in 0..grids[0].len() {
                for b in 0..grids[1].len() {
                    consider(vec![a, b]);
                }
            }
        }
        _ => unreachable!(),
    }
    best.map(|(v, idx)| (v, idx.iter().enumerate().map(|(i, &k)| grids[i][k].omega.clone()).collect()))
}

fn check_small(s: &Scenario) -> Result<()> {
    s.validate()?;
    if s.n_subcarriers == 0 || s.n_subcarriers > 2 || s.n_antennas > 3 {
        return Err(Error::Oracle(format!(
            "brute force supports N ≤ 2 and M ≤ 3, got N={} M={}",
            s.n_subcarriers, s.n_antennas
        )));
    }
    Ok(())
}

fn reacted_total(s: &Scenario, interference: &[f64], direct: &[f64]) -> f64 {
    let wf = waterfill(interference, &s.h, s.sigma2, s.p_sum);
    let reactive: f64 = wf.p.iter().zip(&s.phi).map(|(p, phi)| p * phi).sum();
    reactive + direct.iter().sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct BruteForce {
    pub total: f64,
    pub omegas: Vec<CVector>,
}

/// Best total received power over the span grid, under the true reaction.
/// For two subcarriers each one's grid is first reduced to the best direct
/// power per (power, interference) cell, `resolution × resolution` cells.
pub fn brute_force_p1(s: &Scenario, resolution: usize) -> Result<BruteForce> {
    check_small(s)?;
    search(s, resolution, |interference, direct, _| Some(reacted_total(s, interference, direct)))
        .map(|(total, omegas)| BruteForce { total, omegas })
        .ok_or_else(|| Error::Oracle("no feasible grid point".into()))
}

/// Best objective of the fixed-level problem over the span grid: primary
/// powers `(λ − (I_i+σ²)/h_i)⁺` must add up to `P_sum` within `slack`.
pub fn brute_force_p3(s: &Scenario, lambda: f64, resolution: usize, slack: f64) -> Result<BruteForce> {
    check_small(s)?;
    search(s, resolution, |interference, direct, _| {
        let powers: Vec<f64> = (0..s.n_subcarriers)
            .map(|i| (lambda - (interference[i] + s.sigma2) / s.h[i]).max(0.0))
            .collect();
        if (powers.iter().sum::<f64>() - s.p_sum).abs() > slack {
            return None;
        }
        let reactive: f64 = powers.iter().zip(&s.phi).map(|(p, phi)| p * phi).sum();
        Some(reactive + direct.iter().sum::<f64>())
    })
    .map(|(total, omegas)| BruteForce { total, omegas })
    .ok_or_else(|| Error::Oracle("no grid point meets the primary power equality".into()))
}

/// Largest direct power over the span grid under the secondary budgets alone.
pub fn brute_force_direct(s: &Scenario, resolution: usize) -> Result<BruteForce> {
    check_small(s)?;
    search(s, resolution, |_, direct, _| Some(direct.iter().sum()))
        .map(|(total, omegas)| BruteForce { total, omegas })
        .ok_or_else(|| Error::Oracle("no feasible grid point".into()))
}

/// Verdict of the power-grid feasibility check at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityGrid {
    pub feasible: bool,
    /// Smallest `Σ_i (λ − (‖f_i‖²Q_i+σ²)/h_i)⁺` over grid points meeting the
    /// budget inequalities.
    pub min_primary_power: f64,
    /// Smallest `|Σ_i (λ − (‖f_i‖²Q_i+σ²)/h_i)⁺ − P_sum|` over the same points.
    pub min_residual: f64,
    /// Allowed deviation from `P_sum`: grid spacing × `max_i ‖f_i‖²/h_i`.
    pub slack: f64,
}

/// Grid over per-subcarrier powers `Q ∈ [0, Q_peak]^N` with beams aligned to
/// the cross channel: feasible when some point meets the interference and
/// sum-power budgets and puts the primary power within `slack` of `P_sum`.
pub fn brute_force_p2(s: &Scenario, lambda: f64, resolution: usize) -> Result<FeasibilityGrid> {
    check_small(s)?;
    assert!(resolution >= 2);
    let k: Vec<f64> = s.f.iter().map(energy).collect();
    let step = s.q_peak / (resolution - 1) as f64;
    let slack = step * (0..s.n_subcarriers).map(|i| k[i] / s.h[i]).fold(0.0, f64::max);
    let level = |i: usize, q: f64| (lambda - (k[i] * q + s.sigma2) / s.h[i]).max(0.0);
    let mut feasible = false;
    let mut min_primary = f64::INFINITY;
    let mut min_residual = f64::INFINITY;
    let mut visit = |q: &[f64]| {
        let interference: f64 = q.iter().zip(&k).map(|(q, k)| q * k).sum();
        let power: f64 = q.iter().sum();
        if interference > s.gamma * (1.0 + 1e-12) || power > s.q_sum * (1.0 + 1e-12) {
            return;
        }
        let primary: f64 = q.iter().enumerate().map(|(i, &q)| level(i, q)).sum();
        min_primary = min_primary.min(primary);
        min_residual = min_residual.min((primary - s.p_sum).abs());
        if (primary - s.p_sum).abs() <= slack {
            feasible = true;
        }
    };
    match s.n_subcarriers {
        1 => (0..resolution).for_each(|a| visit(&[a as f64 * step])),
        _ => {
            for a in 0..resolution {
                for b in 0..resolution {
                    visit(&[a as f64 * step, b as f64 * step]);
                }
            }
        }
    }
    Ok(FeasibilityGrid {
        feasible,
        min_primary_power: min_primary,
        min_residual,
        slack,
    })
}

/// Maximum of `φ(Q) = −(ηk + μ)Q − θ·(λ − (kQ+σ²)/h)⁺` over `[0, q_peak]`
/// on `points` uniform samples, refined three times by resampling the two
/// cells around the incumbent at 1001 points each.
pub fn grid_max_dual_term(
    h: f64,
    k: f64,
    sigma2: f64,
    q_peak: f64,
    (eta, mu, theta): (f64, f64, f64),
    lambda: f64,
    points: usize,
) -> (f64, f64) {
    assert!(points >= 2);
    let value = |q: f64| -(eta * k + mu) * q - theta * (lambda - (k * q + sigma2) / h).max(0.0);
    let sample = |lo: f64, hi: f64, points: usize| -> (f64, f64, f64) {
        let step = (hi - lo) / (points - 1) as f64;
        let mut best = (lo, value(lo));
        for j in 1..points {
            let q = if j == points - 1 { hi } else { lo + step * j as f64 };
            let v = value(q);
            if v > best.1 {
                best = (q, v);
            }
        }
        (best.0, best.1, step)
    };
    let (mut q, mut v, mut step) = sample(0.0, q_peak, points);
    for _ in 0..3 {
        let (nq, nv, nstep) = sample((q - step).max(0.0), (q + step).min(q_peak), 1001);
        if nv > v {
            q = nq;
            v = nv;
        }
        step = nstep;
    }
    (q, v)
}

/// Per-subcarrier Lagrangian of the fixed-level problem,
/// `(φ − θ)(λ − (|fᴴω|²+σ²)/h)⁺ + |gᴴω|² − η|fᴴω|² − μ‖ω‖²`, maximized over
/// `ω = r d` in span{g_i, f_i} with `‖ω‖² ≤ Q_peak`. Along a direction the
/// Lagrangian is piecewise linear in `r²` with one kink, so only `r² = 0`,
/// `Q_peak` and the kink need checking; `resolution²` directions are searched.
pub fn grid_max_lagrangian(s: &Scenario, i: usize, (eta, mu, theta): (f64, f64, f64), lambda: f64, resolution: usize) -> f64 {
    let (g_hat, u_hat) = span_basis(&s.g[i], &s.f[i]);
    let (h, sigma2, q_peak) = (s.h[i], s.sigma2, s.q_peak);
    let along = |d: &CVector| {
        let a = dot(&s.f[i], d).norm_sqr();
        let b = dot(&s.g[i], d).norm_sqr();
        let value = |t: f64| (s.phi[i] - theta) * (lambda - (a * t + sigma2) / h).max(0.0) + t * (b - eta * a - mu);
        let mut best = value(0.0).max(value(q_peak));
        if a > 0.0 {
            let kink = (h * lambda - sigma2) / a;
            if (0.0..=q_peak).contains(&kink) {
                best = best.max(value(kink));
            }
        }
        best
    };
    let Some(u) = u_hat else {
        return along(&g_hat);
    };
    search_directions((resolution, resolution), |a, psi| {
        let d = &g_hat * Complex64::new(a.cos(), 0.0) + &u * Complex64::from_polar(a.sin(), psi);
        Some((along(&d), ()))
    })
    .map_or(f64::NEG_INFINITY, |(v, _)| v)
}

/// `max ωᴴCω` over two-dimensional `ω = r (cos a, sin a·e^{jψ})` subject to
/// `lo_k ≤ ωᴴA_kω ≤ hi_k` and `r ≤ radius`, on `angles × phases` directions
/// with `a ∈ [0, π/2]`, refined around the best one. Objective and
/// constraints scale with `r²`, so for each direction the feasible `r²` form
/// an interval and the best one is an end point. Returns `None` if no
/// direction admits a feasible point.
pub fn grid_max_rank_one(
    objective: &DMatrix<Complex64>,
    constraints: &[(DMatrix<Complex64>, f64, f64)],
    radius: f64,
    grid: (usize, usize),
) -> Option<(f64, CVector)> {
    assert_eq!(objective.nrows(), 2, "two-dimensional search only");
    let quad = |m: &DMatrix<Complex64>, w: &CVector| dot(w, &(m * w)).re;
    search_directions(grid, |a, psi| {
        let d = CVector::from_vec(vec![Complex64::new(a.cos(), 0.0), Complex64::from_polar(a.sin(), psi)]);
        // feasible interval of t = r²
        let (mut t_lo, mut t_hi) = (0.0_f64, radius * radius);
        for (m, lo, hi) in constraints {
            let v = quad(m, &d);
            if v > 0.0 {
                t_lo = t_lo.max(lo / v);
                t_hi = t_hi.min(hi / v);
            } else if v < 0.0 {
                t_lo = t_lo.max(hi / v);
                t_hi = t_hi.min(lo / v);
            } else if *lo > 0.0 || *hi < 0.0 {
                return None;
            }
        }
        if t_lo > t_hi {
            return None;
        }
        let c = quad(objective, &d);
        let t = if c > 0.0 { t_hi } else { t_lo };
        Some((c * t, d * Complex64::new(t.sqrt(), 0.0)))
    })
}

/// Maximum-ratio beams on a single subcarrier: best total over `points`
/// uniform powers in `[0, min(Q_peak, Q_sum)]` that meet the interference
/// budget.
pub fn grid_max_mrt_single(s: &Scenario, points: usize) -> Result<(f64, f64)> {
    if s.n_subcarriers != 1 {
        return Err(Error::Oracle("single-subcarrier search only".into()));
    }
    let g = &s.g[0];
    let d = energy(g);
    let c = if d > 0.0 { dot(&s.f[0], g).norm_sqr() / d } else { 0.0 };
    let top = s.q_peak.min(s.q_sum);
    let mut best = (0.0, f64::NEG_INFINITY);
    for j in 0..points {
        let q = top * j as f64 / (points - 1) as f64;
        if c * q > s.gamma + ZERO_INTERFERENCE * s.sigma2 {
            continue;
        }
        let v = reacted_total(s, &[c * q], &[d * q]);
        if v > best.1 {
            best = (q, v);
        }
    }
    Ok(best)
}
