//! Power allocation over fixed beam directions. Each subcarrier `i` has a
//! direct gain `a_i` and a cross gain `c_i` per unit power; budgets are the
//! interference threshold, the sum power and the per-subcarrier peak.

use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub gamma: f64,
    pub q_sum: f64,
    pub q_peak: f64,
}

impl Limits {
    pub fn of(s: &Scenario) -> Self {
        Self {
            gamma: s.gamma,
            q_sum: s.q_sum,
            q_peak: s.q_peak,
        }
    }
}

/// Optimal powers for `max Σ a_i Q_i` s.t. `Σ Q_i ≤ q_sum`, `0 ≤ Q_i ≤ q_peak`:
/// fill subcarriers in descending order of gain, skipping zero gains.
pub fn greedy_power_allocation(gains: &[f64], q_sum: f64, q_peak: f64) -> Vec<f64> {
    greedy_with_caps(gains, q_sum, &vec![q_peak; gains.len()])
}

pub(crate) fn greedy_with_caps(gains: &[f64], q_sum: f64, caps: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]));
    let mut q = vec![0.0; gains.len()];
    let mut left = q_sum.max(0.0);
    for i in order {
        if gains[i] <= 0.0 || left <= 0.0 {
            break;
        }
        let take = caps[i].max(0.0).min(left);
        q[i] = take;
        left -= take;
    }
    q
}

/// Optimal powers for `max Σ a_i Q_i` s.t. `Σ c_i Q_i ≤ gamma`,
/// `Σ Q_i ≤ q_sum`, `0 ≤ Q_i ≤ q_peak`. The interference constraint is
/// priced by a multiplier found by bisection; at the critical price the two
/// adjacent greedy allocations are mixed to meet it with equality.
pub fn interference_limited_allocation(a: &[f64], c: &[f64], gamma: f64, q_sum: f64, q_peak: f64) -> Vec<f64> {
    limited_with_caps(a, c, gamma, q_sum, &vec![q_peak; a.len()])
}

pub(crate) fn limited_with_caps(a: &[f64], c: &[f64], gamma: f64, q_sum: f64, caps: &[f64]) -> Vec<f64> {
    let alloc = |nu: f64| -> Vec<f64> {
        let w: Vec<f64> = a.iter().zip(c).map(|(a, c)| a - nu * c).collect();
        greedy_with_caps(&w, q_sum, caps)
    };
    let load = |q: &[f64]| -> f64 { q.iter().zip(c).map(|(q, c)| q * c).sum() };
    let gamma = gamma.max(0.0);
    let free = alloc(0.0);
    if load(&free) <= gamma {
        return free;
    }
    let mut lo = 0.0;
    let mut hi = a
        .iter()
        .zip(c)
        .filter(|(_, &c)| c > 0.0)
        .map(|(a, c)| a / c)
        .fold(0.0, f64::max)
        * 2.0
        + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if load(&alloc(mid)) > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let over = alloc(lo);
    let under = alloc(hi);
    let (lo_load, hi_load) = (load(&over), load(&under));
    if lo_load <= hi_load {
        return under;
    }
    let t = ((gamma - hi_load) / (lo_load - hi_load)).clamp(0.0, 1.0);
    over.iter().zip(&under).map(|(o, u)| t * o + (1.0 - t) * u).collect()
}

fn load(q: &[f64], c: &[f64]) -> f64 {
    q.iter().zip(c).map(|(q, c)| q * c).sum()
}

/// Scale all powers down together until every budget holds.
pub fn uniform_repair(c: &[f64], q: &[f64], limits: Limits) -> Vec<f64> {
    let mut out: Vec<f64> = q.iter().map(|&x| x.clamp(0.0, limits.q_peak)).collect();
    let interference = load(&out, c);
    let total: f64 = out.iter().sum();
    let mut scale: f64 = 1.0;
    if interference > limits.gamma {
        scale = scale.min(limits.gamma / interference);
    }
    if total > limits.q_sum {
        scale = scale.min(limits.q_sum / total);
    }
    if scale < 1.0 {
        out.iter_mut().for_each(|x| *x *= scale.max(0.0));
    }
    out
}

/// Remove `excess` of the weighted sum `Σ w_i Q_i`, cheapest `value_i / w_i` first.
fn shed(q: &mut [f64], weight: &[f64], value: &[f64], mut excess: f64) {
    let mut order: Vec<usize> = (0..q.len()).filter(|&i| weight[i] > 0.0 && q[i] > 0.0).collect();
    order.sort_by(|&i, &j| (value[i] / weight[i]).total_cmp(&(value[j] / weight[j])));
    for i in order {
        if excess <= 0.0 {
            break;
        }
        let cut = (excess / weight[i]).min(q[i]);
        q[i] -= cut;
        excess -= cut * weight[i];
    }
}

/// Budget-feasible variants of a raw power vector: uniform scaling, shedding
/// the power with the least direct gain first, and shedding followed by
/// filling the leftover budget by direct gain.
pub fn feasible_candidates(a: &[f64], c: &[f64], q: &[f64], limits: Limits) -> Vec<Vec<f64>> {
    let mut shedded: Vec<f64> = q.iter().map(|&x| x.clamp(0.0, limits.q_peak)).collect();
    let interference = load(&shedded, c);
    if interference > limits.gamma {
        shed(&mut shedded, c, a, interference - limits.gamma);
    }
    let total: f64 = shedded.iter().sum();
    if total > limits.q_sum {
        shed(&mut shedded, &vec![1.0; a.len()], a, total - limits.q_sum);
    }
    let interference = load(&shedded, c);
    let total: f64 = shedded.iter().sum();
    let caps: Vec<f64> = shedded.iter().map(|q| (limits.q_peak - q).max(0.0)).collect();
    let extra = limited_with_caps(a, c, limits.gamma - interference, limits.q_sum - total, &caps);
    let filled = shedded.iter().zip(&extra).map(|(q, e)| (q + e).min(limits.q_peak)).collect();
    vec![uniform_repair(c, q, limits), shedded, filled]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_fills_best_gains_first() {
        assert_eq!(greedy_power_allocation(&[3.0, 2.0, 1.0], 2.0, 1.0), vec![1.0, 1.0, 0.0]);
        assert_eq!(greedy_power_allocation(&[1.0, 0.0, 2.0], 1.5, 1.0), vec![0.5, 0.0, 1.0]);
        assert_eq!(greedy_power_allocation(&[0.0, 0.0], 1.0, 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn interference_limited_allocation_meets_budget_exactly() {
        let a = [3.0, 2.0, 1.0];
        let cc = [2.0, 0.5, 0.0];
        let q = interference_limited_allocation(&a, &cc, 1.0, 2.0, 1.0);
        let load: f64 = q.iter().zip(&cc).map(|(q, c)| q * c).sum();
        assert!((load - 1.0).abs() < 1e-9, "{q:?}");
        // brute force over a fine grid
        let mut best = f64::NEG_INFINITY;
        let steps = 200;
        for i in 0..=steps {
            for j in 0..=steps {
                let q0 = i as f64 / steps as f64;
                let q1 = j as f64 / steps as f64;
                let q2 = (2.0 - q0 - q1).clamp(0.0, 1.0);
                if 2.0 * q0 + 0.5 * q1 <= 1.0 + 1e-12 {
                    best = best.max(3.0 * q0 + 2.0 * q1 + q2);
                }
            }
        }
        let v: f64 = q.iter().zip(&a).map(|(q, a)| q * a).sum();
        assert!(v >= best - 1e-9, "{v} vs {best}");
    }

    #[test]
    fn candidates_respect_budgets() {
        let a = [1.0, 2.0, 3.0, 0.5];
        let c = [0.5, 1.0, 0.0, 2.0];
        let limits = Limits { gamma: 0.6, q_sum: 1.5, q_peak: 0.8 };
        for cand in feasible_candidates(&a, &c, &[2.0, 0.8, 0.8, 0.3], limits) {
            assert!(cand.iter().all(|&q| (0.0..=0.8).contains(&q)), "{cand:?}");
            assert!(cand.iter().sum::<f64>() <= 1.5 + 1e-12);
            assert!(load(&cand, &c) <= 0.6 + 1e-12);
        }
    }
}
