//! Channel allocation rules and the alternating channel/power driver.
//!
//! All three rules read SINRs computed from per-user-band powers `P(u,k)`,
//! i.e. as if each user sent its whole band power to the BS under
//! consideration:
//!
//! * UC: each user picks, per band, the BS where its SINR is largest.
//! * BSC: each BS picks, per band, the user with the largest SINR.
//! * MSRM: per band, a maximum-weight one-to-one matching of users and BSs
//!   with weights `W_k·log2(1 + SINR)`.

use serde::{Deserialize, Serialize};

use crate::matching::max_weight_matching;
use crate::power::{solve_power_continuous, PowerSolution, SolverError, SolverSettings};
use crate::rate::{shannon_rate, user_band_sinr, CellView, ChannelAssignment, PowerMatrix};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationRule {
    Uc,
    Bsc,
    Msrm,
}

pub fn uc_allocation(view: &CellView, p_by_user_band: &Matrix) -> ChannelAssignment {
    let s = user_band_sinr(view, p_by_user_band);
    let [nu, nb, nk] = view.dims();
    let mut g = ChannelAssignment::empty([nu, nb, nk]);
    if nb == 0 {
        return g;
    }
    for u in 0..nu {
        for k in 0..nk {
            let mut best = 0;
            for b in 1..nb {
                if s.at(u, b, k) > s.at(u, best, k) {
                    best = b;
                }
            }
            g.gamma.set(u, best, k, true);
        }
    }
    g
}

/// BS-centric selection. A user may be picked by several BSs on the same
/// band; the power step then decides which of those links carries power.
pub fn bsc_allocation(view: &CellView, p_by_user_band: &Matrix) -> ChannelAssignment {
    let s = user_band_sinr(view, p_by_user_band);
    let [nu, nb, nk] = view.dims();
    let mut g = ChannelAssignment::empty([nu, nb, nk]);
    if nu == 0 {
        return g;
    }
    for b in 0..nb {
        for k in 0..nk {
            let mut best = 0;
            for u in 1..nu {
                if s.at(u, b, k) > s.at(best, b, k) {
                    best = u;
                }
            }
            g.gamma.set(best, b, k, true);
        }
    }
    g
}

/// Per-band maximum sum-rate matching between users and BSs.
pub fn msrm_allocation(view: &CellView, p_by_user_band: &Matrix) -> ChannelAssignment {
    let s = user_band_sinr(view, p_by_user_band);
    let [nu, nb, nk] = view.dims();
    let mut g = ChannelAssignment::empty([nu, nb, nk]);
    for k in 0..nk {
        let w = Matrix::from_fn(nu, nb, |u, b| shannon_rate(view.band_widths[k], s.at(u, b, k)));
        let m = max_weight_matching(&w);
        for (u, col) in m.row_to_col.iter().enumerate() {
            if let Some(b) = col {
                g.gamma.set(u, *b, k, true);
            }
        }
    }
    g
}

pub fn allocate(rule: AllocationRule, view: &CellView, p_by_user_band: &Matrix) -> ChannelAssignment {
    match rule {
        AllocationRule::Uc => uc_allocation(view, p_by_user_band),
        AllocationRule::Bsc => bsc_allocation(view, p_by_user_band),
        AllocationRule::Msrm => msrm_allocation(view, p_by_user_band),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlternatingSettings {
    /// Stop once the rate improves by no more than this, bits/s.
    pub delta: f64,
    pub n_max: usize,
}

impl Default for AlternatingSettings {
    fn default() -> Self {
        AlternatingSettings { delta: 10.0, n_max: 20 }
    }
}

/// One channel-then-power round.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub gamma: ChannelAssignment,
    pub power: PowerMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingOutcome {
    /// Best round by rate.
    pub gamma: ChannelAssignment,
    pub power: PowerMatrix,
    pub rate: f64,
    /// `R_1, R_2, …` in round order.
    pub rates: Vec<f64>,
    /// `δ_n = R_n − R_{n−1}` with `R_0 = 0`.
    pub deltas: Vec<f64>,
    pub iterations: usize,
    /// Stopped because `n_max` was reached rather than by the δ rule.
    pub hit_n_max: bool,
}

/// Generic alternating loop: `round` maps the previous `P(u,k)` to the next
/// round. Starts from `P(u,k) = P̄_u/|K|` and stops when `δ_n ≤ delta` or
/// after `n_max` rounds; returns the best round seen.
pub fn alternate<E>(
    budgets: &[f64],
    num_bands: usize,
    settings: &AlternatingSettings,
    mut round: impl FnMut(&Matrix) -> Result<Round, E>,
) -> Result<AlternatingOutcome, E> {
    let mut p_uk = Matrix::from_fn(budgets.len(), num_bands, |u, _| budgets[u] / num_bands as f64);
    let mut prev_rate = 0.0;
    let mut delta_n = 2.0 * settings.delta;
    let mut n = 0;
    let mut rates = Vec::new();
    let mut deltas = Vec::new();
    let mut best: Option<Round> = None;
    while delta_n > settings.delta && n < settings.n_max {
        n += 1;
        let r = round(&p_uk)?;
        p_uk = r.power.per_user_band();
        delta_n = r.rate - prev_rate;
        prev_rate = r.rate;
        rates.push(r.rate);
        deltas.push(delta_n);
        if best.as_ref().is_none_or(|b| r.rate > b.rate) {
            best = Some(r);
        }
    }
    let hit_n_max = delta_n > settings.delta;
    let best = best.expect("n_max >= 1");
    Ok(AlternatingOutcome {
        gamma: best.gamma,
        power: best.power,
        rate: best.rate,
        rates,
        deltas,
        iterations: n,
        hit_n_max,
    })
}

/// Alternates the channel rule with the surrogate power solver started from
/// `α = γ`. The round rate counts the assigned links only.
pub fn alternating_solve(
    view: &CellView,
    rule: AllocationRule,
    settings: &AlternatingSettings,
    solver: &SolverSettings,
) -> Result<AlternatingOutcome, SolverError> {
    alternate(&view.budgets, view.num_bands(), settings, |p_uk| {
        let gamma = allocate(rule, view, p_uk);
        let PowerSolution { power, rate, .. } = solve_power_continuous(view, solver, Some(&gamma))?;
        Ok(Round { gamma, power, rate })
    })
}
