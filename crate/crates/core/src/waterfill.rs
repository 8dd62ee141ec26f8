//! The primary link's reaction to interference: sum-rate water-filling over
//! subcarriers, and the power the energy receiver collects as a result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gain, CVector};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfillResponse {
    /// Water level (W).
    pub lambda: f64,
    /// Primary transmit power per subcarrier (W).
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerBreakdown {
    /// Power delivered by the secondary transmitter, `Σ|g_iᴴω_i|²`.
    pub direct: f64,
    /// Power harvested from the primary transmitter, `Σ P_i φ_i`.
    pub reactive: f64,
    pub total: f64,
}

impl PowerBreakdown {
    pub fn new(direct: f64, reactive: f64) -> Self {
        Self {
            direct,
            reactive,
            total: direct + reactive,
        }
    }
}

const BISECTION_REL_TOL: f64 = 1e-12;

/// Water-filling allocation `P_i = (λ − (I_i + σ²)/h_i)⁺` with `Σ P_i = p_sum`.
///
/// The level is bracketed in `[0, p_sum + max_i (I_i+σ²)/h_i]` and bisected
/// down to `1e-12` of the bracket width, then snapped to the closed form on
/// the resulting active set when that set is self-consistent. Subcarriers with
/// infinite interference never receive power.
pub fn waterfill(interference: &[f64], h: &[f64], sigma2: f64, p_sum: f64) -> WaterfillResponse {
    assert_eq!(interference.len(), h.len(), "interference and h lengths differ");
    let floors: Vec<f64> = interference
        .iter()
        .zip(h)
        .map(|(&i, &hi)| (i + sigma2) / hi)
        .collect();
    let allocated = |lambda: f64| -> f64 { floors.iter().map(|&x| (lambda - x).max(0.0)).sum() };

    let max_floor = floors
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(0.0_f64, f64::max);
    let mut lo = 0.0_f64;
    let mut hi = p_sum + max_floor;
    let width = hi - lo;
    while hi - lo > BISECTION_REL_TOL * width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if allocated(mid) < p_sum {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut lambda = 0.5 * (lo + hi);

    // Closed form on the active set, kept only if it reproduces that set.
    let active: Vec<bool> = floors.iter().map(|&x| x < lambda).collect();
    let count = active.iter().filter(|&&a| a).count();
    if count > 0 {
        let sum_floor: f64 = floors.iter().zip(&active).filter(|(_, &a)| a).map(|(x, _)| x).sum();
        let exact = (p_sum + sum_floor) / count as f64;
        let consistent = floors.iter().zip(&active).all(|(&x, &a)| (x < exact) == a);
        if consistent {
            lambda = exact;
        }
    }
    let p = floors.iter().map(|&x| (lambda - x).max(0.0)).collect();
    WaterfillResponse { lambda, p }
}

/// Water level with no interference; the smallest level any beamformer can induce.
pub fn zero_interference_level(s: &Scenario) -> f64 {
    waterfill(&vec![0.0; s.n_subcarriers], &s.h, s.sigma2, s.p_sum).lambda
}

fn check_dims(s: &Scenario, omegas: &[CVector]) -> Result<()> {
    if omegas.len() != s.n_subcarriers {
        return Err(Error::DimensionMismatch {
            what: "beamformer count",
            expected: s.n_subcarriers,
            found: omegas.len(),
        });
    }
    if let Some(w) = omegas.iter().find(|w| w.len() != s.n_antennas) {
        return Err(Error::DimensionMismatch {
            what: "beamformer length",
            expected: s.n_antennas,
            found: w.len(),
        });
    }
    Ok(())
}

/// `|f_iᴴω_i|²` per subcarrier.
pub fn interference_profile(s: &Scenario, omegas: &[CVector]) -> Result<Vec<f64>> {
    check_dims(s, omegas)?;
    Ok(s.f.iter().zip(omegas).map(|(f, w)| gain(f, w)).collect())
}

/// Received power at the energy receiver given per-subcarrier interference and
/// direct-link powers. Shared by every scheme, including the scalar-power ones.
pub fn evaluate_terms(s: &Scenario, interference: &[f64], direct: &[f64]) -> (PowerBreakdown, WaterfillResponse) {
    let wf = waterfill(interference, &s.h, s.sigma2, s.p_sum);
    let reactive = wf.p.iter().zip(&s.phi).map(|(p, phi)| p * phi).sum();
    let direct = direct.iter().sum();
    (PowerBreakdown::new(direct, reactive), wf)
}

pub fn received_power(s: &Scenario, omegas: &[CVector]) -> Result<(PowerBreakdown, WaterfillResponse)> {
    let interference = interference_profile(s, omegas)?;
    let direct: Vec<f64> = s.g.iter().zip(omegas).map(|(g, w)| gain(g, w)).collect();
    Ok(evaluate_terms(s, &interference, &direct))
}

/// Primary sum rate `Σ log₂(1 + h_i P_i/(|f_iᴴω_i|² + σ²))` in bits/s/Hz.
pub fn primary_sum_rate(s: &Scenario, omegas: &[CVector]) -> Result<f64> {
    let interference = interference_profile(s, omegas)?;
    let wf = waterfill(&interference, &s.h, s.sigma2, s.p_sum);
    Ok(interference
        .iter()
        .zip(&wf.p)
        .zip(&s.h)
        .map(|((i, p), h)| (1.0 + h * p / (i + s.sigma2)).log2())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_subcarrier_takes_everything() {
        let r = waterfill(&[0.0], &[2.0], 0.5, 3.0);
        assert_eq!(r.p, vec![3.0]);
        assert!((r.lambda - (3.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn two_subcarrier_closed_form() {
        // both active: 2λ − 0.1 − 0.2 = 1
        let r = waterfill(&[0.0, 0.0], &[1.0, 0.5], 0.1, 1.0);
        assert!((r.lambda - 0.65).abs() < 1e-14);
        assert!((r.p[0] - 0.55).abs() < 1e-14);
        assert!((r.p[1] - 0.45).abs() < 1e-14);
    }

    #[test]
    fn flooded_subcarrier_gets_nothing() {
        let r = waterfill(&[f64::INFINITY, 0.0, 0.0], &[1.0, 1.0, 0.5], 0.1, 1.0);
        assert_eq!(r.p[0], 0.0);
        assert!((r.p[1] + r.p[2] - 1.0).abs() < 1e-12);
        assert!((r.lambda - 0.65).abs() < 1e-12);
    }

    #[test]
    fn weak_subcarrier_stays_off() {
        let r = waterfill(&[0.0, 0.0], &[1.0, 1e-6], 0.1, 1.0);
        assert_eq!(r.p[1], 0.0);
        assert!((r.lambda - 1.1).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn sums_to_budget_and_matches_formula(
            raw in prop::collection::vec((1e-3f64..10.0, 0.0f64..5.0), 1..40),
            sigma2 in 1e-3f64..1.0,
            p_sum in 1e-2f64..20.0,
        ) {
            let h: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let i: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let r = waterfill(&i, &h, sigma2, p_sum);
            let total: f64 = r.p.iter().sum();
            prop_assert!((total - p_sum).abs() <= 1e-9 * p_sum);
            for k in 0..h.len() {
                let floor = (i[k] + sigma2) / h[k];
                prop_assert_eq!(r.p[k], (r.lambda - floor).max(0.0));
                prop_assert_eq!(r.p[k] > 0.0, r.lambda > floor);
            }
        }

        #[test]
        fn more_interference_raises_level_and_lowers_own_power(
            raw in prop::collection::vec((1e-3f64..10.0, 0.0f64..5.0), 1..20),
            pick in 0usize..20,
            bump in 0.0f64..3.0,
        ) {
            let h: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let mut i: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let k = pick % h.len();
            let before = waterfill(&i, &h, 0.1, 2.0);
            i[k] += bump;
            let after = waterfill(&i, &h, 0.1, 2.0);
            prop_assert!(after.lambda >= before.lambda - 1e-12 * before.lambda);
            prop_assert!(after.p[k] <= before.p[k] + 1e-12);
        }
    }
}
